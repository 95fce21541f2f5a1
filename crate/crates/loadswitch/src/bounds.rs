//! Accuracy floors and large-sample behavior of the joint estimator.
//!
//! For the hybrid problem (random channel, deterministic ratio) the relevant
//! floor blends Bayesian and classical information. With
//! `kappa = (S1 + |F|^2 S2) / nv` the information matrix is block diagonal in
//! `(H, F)`:
//!
//! ```text
//! I_HH = kappa I + C_H^{-1}        I_FF = (S2/nv) Tr[C_H]
//! ```
//!
//! so the bound on the channel error covariance is
//! `h_block = (kappa I + C_H^{-1})^{-1} = C_H (kappa C_H + I)^{-1}` (the
//! push-through form, defined even for singular priors) and the ratio
//! variance floor is `f_bound = nv / (S2 Tr[C_H])`. The off-diagonal blocks
//! vanish because the score of `F` is odd in the second-segment noise while
//! the score of `H` is linear in `(H, noise)`; [`pseudo_information_mc`]
//! checks both that and the vanishing unconjugated second moment empirically.
//!
//! [`asymptotic_ml_limit`] gives the fixed-SNR, infinite-packet limit of the
//! white-prior quadratic estimator, which settles away from the true ratio;
//! the distance to `F` is exactly the bias the moment-corrected estimator
//! removes.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{draw_cn, ChannelPrior};
use crate::rng::trial_rng;

/// Error floors for one operating point.
#[derive(Debug, Clone)]
pub struct HcrbReport {
    /// Bound on the channel error covariance `E[(H_hat - H)(H_hat - H)^H]`.
    /// Materialized as a dense L x L matrix; for large L prefer
    /// [`hcrb_relative_h`], which never leaves O(L).
    pub h_block: DMatrix<Complex64>,
    /// Bound on `E[|F_hat - F|^2]`.
    pub f_bound: f64,
}

fn check_scales(s1: f64, s2: f64, noise_var: f64) -> Result<()> {
    if !(s1.is_finite() && s1 > 0.0 && s2.is_finite() && s2 > 0.0) {
        return Err(Error::ZeroSegmentEnergy { s1, s2 });
    }
    if !noise_var.is_finite() || noise_var < 0.0 {
        return Err(Error::InvalidParameter {
            what: format!("noise_var must be finite and >= 0, got {noise_var}"),
        });
    }
    Ok(())
}

/// Joint error floor for the channel block and the ratio.
///
/// Defined for singular priors through the push-through form. A zero noise
/// variance yields zero bounds; a zero-trace prior leaves the ratio floor
/// undefined and fails with [`Error::ZeroTrace`].
pub fn hcrb(
    prior: &ChannelPrior,
    f: Complex64,
    s1: f64,
    s2: f64,
    noise_var: f64,
) -> Result<HcrbReport> {
    check_scales(s1, s2, noise_var)?;
    let l = prior.len();
    let trace = prior.trace();
    if trace <= 0.0 {
        return Err(Error::ZeroTrace);
    }
    if noise_var == 0.0 {
        return Ok(HcrbReport {
            h_block: DMatrix::zeros(l, l),
            f_bound: 0.0,
        });
    }
    let kappa = (s1 + f.norm_sqr() * s2) / noise_var;
    let cov = prior.covariance();
    let mut m = &cov * Complex64::new(kappa, 0.0);
    for i in 0..l {
        m[(i, i)] += Complex64::new(1.0, 0.0);
    }
    // kappa C + I is Hermitian positive definite for any PSD C
    let chol = nalgebra::Cholesky::new(m).ok_or(Error::SingularCovariance)?;
    let h_block = chol.solve(&cov);
    Ok(HcrbReport {
        h_block,
        f_bound: noise_var / (s2 * trace),
    })
}

/// Channel floor normalized by the prior energy,
/// `Tr[h_block] / Tr[C_H] = (sum_i lambda_i/(kappa lambda_i + 1)) / sum_i lambda_i`,
/// computed from the covariance eigenvalues without forming any matrix.
pub fn hcrb_relative_h(
    prior: &ChannelPrior,
    f: Complex64,
    s1: f64,
    s2: f64,
    noise_var: f64,
) -> Result<f64> {
    check_scales(s1, s2, noise_var)?;
    let trace = prior.trace();
    if trace <= 0.0 {
        return Err(Error::ZeroTrace);
    }
    if noise_var == 0.0 {
        return Ok(0.0);
    }
    let kappa = (s1 + f.norm_sqr() * s2) / noise_var;
    let tr_h: f64 = prior
        .eigenvalues()
        .iter()
        .map(|&lam| lam / (kappa * lam + 1.0))
        .sum();
    Ok(tr_h / trace)
}

/// Ratio floor normalized by the ratio energy, `f_bound / |F|^2`.
pub fn hcrb_relative_f(
    prior: &ChannelPrior,
    f: Complex64,
    s1: f64,
    s2: f64,
    noise_var: f64,
) -> Result<f64> {
    check_scales(s1, s2, noise_var)?;
    let trace = prior.trace();
    if trace <= 0.0 {
        return Err(Error::ZeroTrace);
    }
    if f.norm() == 0.0 {
        return Err(Error::InvalidParameter {
            what: "relative ratio floor needs |F| > 0".to_string(),
        });
    }
    Ok(noise_var / (s2 * trace * f.norm_sqr()))
}

/// Fixed-SNR limit of the white-prior quadratic estimator as the packet count
/// grows: the selected root evaluated at the population moments,
///
/// ```text
/// F_inf = [(alpha |F|^2 - c d) + sqrt((alpha |F|^2 - c d)^2 + 4 alpha c |F|^2)]
///         / (2 alpha c conj(F))
/// ```
///
/// Equals `F` only in the noiseless limit `c = d = 1`; the residual offset is
/// the estimator's irreducible bias at that SNR.
pub fn asymptotic_ml_limit(f: Complex64, alpha: f64, c: f64, d: f64) -> Result<Complex64> {
    if !alpha.is_finite() || alpha <= 0.0 {
        return Err(Error::InvalidParameter {
            what: format!("alpha must be finite and > 0, got {alpha}"),
        });
    }
    if !c.is_finite() || c <= 0.0 || c > 1.0 {
        return Err(Error::InvalidParameter {
            what: format!("shrinkage c must lie in (0, 1], got {c}"),
        });
    }
    if !d.is_finite() || d > 1.0 {
        return Err(Error::InvalidParameter {
            what: format!("moment correction d must be finite and <= 1, got {d}"),
        });
    }
    let fn2 = f.norm_sqr();
    if fn2 == 0.0 {
        return Err(Error::InvalidParameter {
            what: "asymptotic limit needs |F| > 0".to_string(),
        });
    }
    let b = alpha * fn2 - c * d;
    let disc = (b * b + 4.0 * alpha * c * fn2).sqrt();
    Ok(Complex64::new(b + disc, 0.0) / (f.conj() * (2.0 * alpha * c)))
}

/// Empirical second moments of the score vector at the true parameters.
#[derive(Debug, Clone)]
pub struct PseudoInfoReport {
    /// Unconjugated second moment `(1/N) sum s s^T`; circularity of the score
    /// drives every entry to zero as N grows.
    pub pseudo: DMatrix<Complex64>,
    /// Per-entry standard error of `pseudo`, for significance checks.
    pub pseudo_se: DMatrix<f64>,
    /// Conjugated second moment `(1/N) sum s s^H`; converges to the block
    /// diagonal information matrix.
    pub hermitian: DMatrix<Complex64>,
    pub trials: usize,
}

/// Monte Carlo estimate of both score second moments.
///
/// The score at the true `(H, F)` is, with `N1 = V1 - H` and `N2 = V2 - F H`,
///
/// ```text
/// s_H = (S1/nv) N1 + (S2/nv) conj(F) N2 - C_H^{-1} H
/// s_F = (S2/nv) H^H N2
/// ```
///
/// Trials draw `(H, N1, N2)` directly at the reduced-statistic level using
/// one stream per trial index, so results are reproducible for any `trials`
/// and independent of execution order.
pub fn pseudo_information_mc(
    prior: &ChannelPrior,
    f: Complex64,
    s1: f64,
    s2: f64,
    noise_var: f64,
    trials: usize,
    seed: u64,
) -> Result<PseudoInfoReport> {
    check_scales(s1, s2, noise_var)?;
    if noise_var == 0.0 {
        return Err(Error::InvalidParameter {
            what: "score moments need noise_var > 0".to_string(),
        });
    }
    if trials == 0 {
        return Err(Error::EmptyInput {
            what: "score moment estimation needs at least one trial",
        });
    }
    if prior.is_singular() {
        return Err(Error::SingularCovariance);
    }
    let l = prior.len();
    let dim = l + 1;
    let mut pseudo = DMatrix::<Complex64>::zeros(dim, dim);
    let mut hermitian = DMatrix::<Complex64>::zeros(dim, dim);
    // accumulate E|s_a s_b|^2 to get per-entry variances of the pseudo moment
    let mut second = DMatrix::<f64>::zeros(dim, dim);
    let mut s = vec![Complex64::new(0.0, 0.0); dim];
    let g1 = s1 / noise_var;
    let g2 = s2 / noise_var;
    for trial in 0..trials {
        let mut rng = trial_rng(seed, 0, trial as u64);
        let h = prior.sample(&mut rng);
        let n1: Vec<Complex64> = (0..l).map(|_| draw_cn(noise_var / s1, &mut rng)).collect();
        let n2: Vec<Complex64> = (0..l).map(|_| draw_cn(noise_var / s2, &mut rng)).collect();
        let cinv_h = prior.inv_mul(&h)?;
        let mut s_f = Complex64::new(0.0, 0.0);
        for i in 0..l {
            s[i] = n1[i] * g1 + n2[i] * (f.conj() * g2) - cinv_h[i];
            s_f += h[i].conj() * n2[i];
        }
        s[l] = s_f * g2;
        for a in 0..dim {
            for b in 0..dim {
                let prod = s[a] * s[b];
                pseudo[(a, b)] += prod;
                second[(a, b)] += prod.norm_sqr();
                hermitian[(a, b)] += s[a] * s[b].conj();
            }
        }
    }
    let n = trials as f64;
    pseudo /= Complex64::new(n, 0.0);
    hermitian /= Complex64::new(n, 0.0);
    let mut pseudo_se = DMatrix::<f64>::zeros(dim, dim);
    for a in 0..dim {
        for b in 0..dim {
            let var = (second[(a, b)] / n - pseudo[(a, b)].norm_sqr()).max(0.0);
            pseudo_se[(a, b)] = (var / n).sqrt();
        }
    }
    Ok(PseudoInfoReport {
        pseudo,
        pseudo_se,
        hermitian,
        trials,
    })
}
