//! Joint channel and antenna-impedance estimation from switched-load training.
//!
//! A receiver that switches its front-end load between two known impedances
//! during the training part of each packet modulates the received gain by a
//! complex ratio `F` that pins down the antenna impedance. This crate covers
//! the full pipeline around that idea:
//!
//! - [`model`]: impedances, the invertible load-ratio map, Zadoff-Chu
//!   training, Gaussian channel priors and forward packet simulation;
//! - [`stats`]: matched-filter reduction of packets to sufficient statistics
//!   and their second-order cross moments, plus a small CSV format;
//! - [`estimators`]: the hybrid MAP/ML joint estimator in general (Newton)
//!   and closed forms (white prior, single packet, block-constant fading,
//!   moment-corrected consistent variant);
//! - [`bounds`]: hybrid error floors, the fixed-SNR asymptotic limit of the
//!   quadratic estimator and Monte Carlo score-moment checks;
//! - [`montecarlo`]: seeded, reproducible performance sweeps producing CSV
//!   records.
//!
//! The typical flow is scenario -> simulate -> reduce -> estimate:
//!
//! ```
//! use loadswitch::model::{ChannelPrior, ReceiverScenario, simulate_packet};
//! use loadswitch::stats::reduce_all;
//! use loadswitch::estimators::estimate_iid_quadratic;
//! use rand::SeedableRng;
//!
//! let scenario = ReceiverScenario::reference(0.1).unwrap();
//! let prior = ChannelPrior::iid(8, 1.0).unwrap();
//! let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
//! let gains = prior.sample(&mut rng);
//! let packets: Vec<_> = gains
//!     .iter()
//!     .map(|&h| simulate_packet(h, scenario.f(), &scenario, &mut rng))
//!     .collect();
//! let stats = reduce_all(&packets, &scenario).unwrap();
//! let est = estimate_iid_quadratic(&stats, 1.0).unwrap();
//! assert!((est.f_hat - scenario.f()).norm() < 0.2);
//! ```

pub mod bounds;
pub mod error;
pub mod estimators;
pub mod model;
pub mod montecarlo;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
