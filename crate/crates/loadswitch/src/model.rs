//! Physical model of the switched-load receiver.
//!
//! A receive antenna with unknown impedance `Z_A` feeds a front end whose load
//! impedance is deliberately switched between two known states `Z_1` and `Z_2`
//! during training. The voltage-divider gain under the second load differs from
//! the first by the complex ratio
//!
//! ```text
//! F = (1 + Z_A/Z_1) / (1 + Z_A/Z_2)
//! ```
//!
//! which is an invertible function of `Z_A` once the loads are fixed. A packet
//! carries `T` known training symbols, the first `K` under load 1 and the rest
//! under load 2, so the i-th received packet is
//!
//! ```text
//! v_i = [H_i * x_1 ; F * H_i * x_2] + n_i,    n_i ~ CN(0, sigma_n^2 I)
//! ```
//!
//! with `H_i` the effective channel gain of that packet. This module owns the
//! ground-truth side of the problem: validated impedances, load plans, training
//! sequences (Zadoff-Chu construction included), channel priors over the
//! per-packet gains, and the forward simulation of raw packets.
//!
//! Complex Gaussian convention: `CN(0, s)` has variance `s/2` per real
//! component, i.e. circularly symmetric with total variance `s`.

use nalgebra::{DMatrix, DVector, Dyn};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// A complex impedance in ohms, restricted to passive elements.
///
/// Scenario inputs (antenna and both loads) go through this type so that
/// non-finite or negative-resistance values are rejected at the boundary.
/// Estimated impedances are plain `Complex64`: a noisy estimate may land
/// slightly outside the passive half-plane and still be a valid report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Impedance {
    resistance: f64,
    reactance: f64,
}

impl Impedance {
    /// Builds a passive impedance; requires finite components and resistance >= 0.
    pub fn new(resistance: f64, reactance: f64) -> Result<Self> {
        if !resistance.is_finite() || !reactance.is_finite() {
            return Err(Error::NonFiniteImpedance {
                re: resistance,
                im: reactance,
            });
        }
        if resistance < 0.0 {
            return Err(Error::NegativeResistance { resistance });
        }
        Ok(Self {
            resistance,
            reactance,
        })
    }

    pub fn resistance(&self) -> f64 {
        self.resistance
    }

    pub fn reactance(&self) -> f64 {
        self.reactance
    }

    pub fn as_complex(&self) -> Complex64 {
        Complex64::new(self.resistance, self.reactance)
    }
}

impl From<Impedance> for Complex64 {
    fn from(z: Impedance) -> Self {
        z.as_complex()
    }
}

/// The two-state load switching schedule of one packet: load `z1` for the
/// first `k` training symbols, load `z2` for the remaining `t - k`.
#[derive(Debug, Clone, Copy)]
pub struct LoadSwitchPlan {
    z1: Impedance,
    z2: Impedance,
    k: usize,
    t: usize,
}

impl LoadSwitchPlan {
    /// Requires `1 <= k < t` and distinct loads (equal loads pin F at 1 and
    /// hide the antenna impedance entirely).
    pub fn new(z1: Impedance, z2: Impedance, k: usize, t: usize) -> Result<Self> {
        if k < 1 || k >= t {
            return Err(Error::BadSplit { k, t });
        }
        if z1.as_complex() == z2.as_complex() {
            return Err(Error::DegeneratePlan);
        }
        Ok(Self { z1, z2, k, t })
    }

    pub fn z1(&self) -> Impedance {
        self.z1
    }

    pub fn z2(&self) -> Impedance {
        self.z2
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn t(&self) -> usize {
        self.t
    }
}

/// Known training symbols of one packet with their load-switch split.
///
/// `x1` is the first `k` symbols (sent under load 1), `x2` the rest. The
/// segment energies `S1 = ||x1||^2` and `S2 = ||x2||^2` drive every
/// estimator's noise scaling and must both be positive.
#[derive(Debug, Clone)]
pub struct TrainingSequence {
    symbols: Vec<Complex64>,
    k: usize,
    s1: f64,
    s2: f64,
}

impl TrainingSequence {
    pub fn new(symbols: Vec<Complex64>, k: usize) -> Result<Self> {
        let t = symbols.len();
        if k < 1 || k >= t {
            return Err(Error::BadSplit { k, t });
        }
        let s1: f64 = symbols[..k].iter().map(|x| x.norm_sqr()).sum();
        let s2: f64 = symbols[k..].iter().map(|x| x.norm_sqr()).sum();
        if s1 <= 0.0 || s2 <= 0.0 {
            return Err(Error::ZeroSegmentEnergy { s1, s2 });
        }
        Ok(Self { symbols, k, s1, s2 })
    }

    pub fn symbols(&self) -> &[Complex64] {
        &self.symbols
    }

    /// Symbols sent under load 1.
    pub fn x1(&self) -> &[Complex64] {
        &self.symbols[..self.k]
    }

    /// Symbols sent under load 2.
    pub fn x2(&self) -> &[Complex64] {
        &self.symbols[self.k..]
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Energy of the first segment, `||x1||^2`.
    pub fn s1(&self) -> f64 {
        self.s1
    }

    /// Energy of the second segment, `||x2||^2`.
    pub fn s2(&self) -> f64 {
        self.s2
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let r = a % b;
        a = b;
        b = r;
    }
    a
}

/// Builds a unit-magnitude Zadoff-Chu training sequence of even length `t`
/// with root `u`, split at `k`:
///
/// ```text
/// x_n = exp(-j pi u n^2 / t),   n = 0, ..., t-1
/// ```
///
/// `u` must be odd and coprime with `t`. The phase is reduced modulo `2t`
/// in exact integer arithmetic before the trig call, so symbols stay exact
/// for any root size.
pub fn zadoff_chu(t: usize, k: usize, u: u64) -> Result<TrainingSequence> {
    if t == 0 || !t.is_multiple_of(2) {
        return Err(Error::OddLength { t });
    }
    if u.is_multiple_of(2) || u == 0 || gcd(u, t as u64) != 1 {
        return Err(Error::BadRoot { u, t });
    }
    let modulus = 2 * t as u128;
    let symbols = (0..t)
        .map(|n| {
            let n = n as u128;
            let phase_units = (u as u128 * n * n) % modulus;
            let phase = -std::f64::consts::PI * phase_units as f64 / t as f64;
            Complex64::from_polar(1.0, phase)
        })
        .collect();
    TrainingSequence::new(symbols, k)
}

/// Load-switch ratio `F = (1 + za/z1) / (1 + za/z2)`.
///
/// Operates on raw complex values; validated [`Impedance`] inputs convert via
/// `as_complex`. Keeping the map unconstrained matters because its inverse is
/// applied to noisy ratio estimates that may leave the passive half-plane.
pub fn f_from_impedance(za: Complex64, z1: Complex64, z2: Complex64) -> Result<Complex64> {
    if z1 == z2 {
        return Err(Error::DegeneratePlan);
    }
    if z1.norm() == 0.0 || z2.norm() == 0.0 {
        return Err(Error::SingularMap {
            what: "zero load impedance",
        });
    }
    let num = Complex64::new(1.0, 0.0) + za / z1;
    let den = Complex64::new(1.0, 0.0) + za / z2;
    if den.norm() == 0.0 {
        return Err(Error::SingularMap {
            what: "1 + za/z2 vanishes",
        });
    }
    Ok(num / den)
}

/// Inverse of [`f_from_impedance`] at fixed loads:
///
/// ```text
/// za = (1 - F) / (F/z2 - 1/z1)
/// ```
///
/// The pole `F = z2/z1` corresponds to an unbounded antenna impedance and is
/// rejected. The result is a plain complex value; it is passive (and then
/// convertible to [`Impedance`]) exactly when F lies in the image of the
/// passive half-plane.
pub fn impedance_from_f(f: Complex64, z1: Complex64, z2: Complex64) -> Result<Complex64> {
    if z1 == z2 {
        return Err(Error::DegeneratePlan);
    }
    if z1.norm() == 0.0 || z2.norm() == 0.0 {
        return Err(Error::SingularMap {
            what: "zero load impedance",
        });
    }
    let den = f / z2 - Complex64::new(1.0, 0.0) / z1;
    if den.norm() == 0.0 {
        return Err(Error::UnboundedImpedance { f });
    }
    Ok((Complex64::new(1.0, 0.0) - f) / den)
}

/// Effective channel seen by downstream processing: the raw path gain `g`
/// scaled by the load-1 voltage divider, `H = z1 * g / (za + z1)`.
pub fn effective_channel(g: Complex64, za: Complex64, z1: Complex64) -> Result<Complex64> {
    let den = za + z1;
    if den.norm() == 0.0 {
        return Err(Error::SingularMap {
            what: "voltage divider za + z1 vanishes",
        });
    }
    Ok(z1 * g / den)
}

/// Complete ground truth for simulation: antenna, load plan, training and
/// noise level. Derives and caches `F`, and exposes the segment energies and
/// their ratio `alpha = S2/S1`.
#[derive(Debug, Clone)]
pub struct ReceiverScenario {
    antenna: Impedance,
    plan: LoadSwitchPlan,
    training: TrainingSequence,
    noise_var: f64,
    f: Complex64,
}

impl ReceiverScenario {
    /// `noise_var` is the per-symbol complex noise variance `sigma_n^2`;
    /// zero selects the exact noiseless mode.
    pub fn new(
        antenna: Impedance,
        plan: LoadSwitchPlan,
        training: TrainingSequence,
        noise_var: f64,
    ) -> Result<Self> {
        if training.len() != plan.t() {
            return Err(Error::LengthMismatch {
                what: format!(
                    "training has {} symbols but the load plan covers {}",
                    training.len(),
                    plan.t()
                ),
            });
        }
        if training.k() != plan.k() {
            return Err(Error::LengthMismatch {
                what: format!(
                    "training splits at {} but the load plan switches at {}",
                    training.k(),
                    plan.k()
                ),
            });
        }
        if !noise_var.is_finite() || noise_var < 0.0 {
            return Err(Error::InvalidParameter {
                what: format!("noise_var must be finite and >= 0, got {noise_var}"),
            });
        }
        let f = f_from_impedance(
            antenna.as_complex(),
            plan.z1().as_complex(),
            plan.z2().as_complex(),
        )?;
        Ok(Self {
            antenna,
            plan,
            training,
            noise_var,
            f,
        })
    }

    /// Bundled reference setup: half-wave dipole antenna (73 + j42.5 ohms),
    /// 50 ohm primary load switched to 50 + j20 ohms, length-64 Zadoff-Chu
    /// training with root 1 split at midpoint.
    pub fn reference(noise_var: f64) -> Result<Self> {
        let za = Impedance::new(73.0, 42.5)?;
        let z1 = Impedance::new(50.0, 0.0)?;
        let z2 = Impedance::new(50.0, 20.0)?;
        let plan = LoadSwitchPlan::new(z1, z2, 32, 64)?;
        let training = zadoff_chu(64, 32, 1)?;
        Self::new(za, plan, training, noise_var)
    }

    /// Same scenario with a different noise level.
    pub fn with_noise_var(&self, noise_var: f64) -> Result<Self> {
        if !noise_var.is_finite() || noise_var < 0.0 {
            return Err(Error::InvalidParameter {
                what: format!("noise_var must be finite and >= 0, got {noise_var}"),
            });
        }
        let mut s = self.clone();
        s.noise_var = noise_var;
        Ok(s)
    }

    pub fn antenna(&self) -> Impedance {
        self.antenna
    }

    pub fn plan(&self) -> &LoadSwitchPlan {
        &self.plan
    }

    pub fn training(&self) -> &TrainingSequence {
        &self.training
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    /// The load-switch ratio derived from the antenna and the plan.
    pub fn f(&self) -> Complex64 {
        self.f
    }

    pub fn s1(&self) -> f64 {
        self.training.s1()
    }

    pub fn s2(&self) -> f64 {
        self.training.s2()
    }

    /// Segment energy ratio `alpha = S2/S1`.
    pub fn alpha(&self) -> f64 {
        self.training.s2() / self.training.s1()
    }
}

/// One draw from `CN(0, var)`: independent real and imaginary parts with
/// variance `var/2` each.
pub(crate) fn draw_cn(var: f64, rng: &mut impl Rng) -> Complex64 {
    if var == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let s = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// Which covariance family a [`ChannelPrior`] came from.
#[derive(Debug, Clone, PartialEq)]
pub enum PriorKind {
    /// Independent packets, `C_H = sigma_h2 * I`.
    Iid { sigma_h2: f64 },
    /// One gain shared by every packet, `C_H = sigma_h2 * (all ones)`;
    /// singular for L > 1 and routed to the pooled estimator.
    SlowFading { sigma_h2: f64 },
    /// Geometric inter-packet correlation, `C_H[i][j] = sigma_h2 * r^|i-j|`.
    Exponential { sigma_h2: f64, r: f64 },
    /// Caller-supplied Hermitian PSD matrix.
    Explicit,
}

enum CovRepr {
    /// Diagonal sigma_h2 * I.
    Scalar { sigma_h2: f64 },
    /// Rank-one sigma_h2 * ones; one scalar draw replicated.
    Replicated { sigma_h2: f64 },
    /// Materialized covariance with an eigen square root for sampling and,
    /// when positive definite, a Cholesky factor for solves.
    Dense {
        cov: DMatrix<Complex64>,
        sqrt: DMatrix<Complex64>,
        chol: Option<nalgebra::Cholesky<Complex64, Dyn>>,
        eigs: Vec<f64>,
    },
}

/// Gaussian prior over the L per-packet channel gains, `H ~ CN(0, C_H)`.
///
/// The i.i.d. and slow-fading kinds keep O(L) structure-aware representations
/// so large-L studies never materialize an L x L matrix; `covariance()`
/// materializes on demand.
pub struct ChannelPrior {
    l: usize,
    kind: PriorKind,
    repr: CovRepr,
}

impl std::fmt::Debug for ChannelPrior {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ChannelPrior")
            .field("l", &self.l)
            .field("kind", &self.kind)
            .finish()
    }
}

/// Relative eigenvalue threshold below which a covariance counts as singular.
const SINGULAR_REL_TOL: f64 = 1e-12;

fn check_scale(name: &str, v: f64) -> Result<()> {
    if !v.is_finite() || v < 0.0 {
        return Err(Error::InvalidParameter {
            what: format!("{name} must be finite and >= 0, got {v}"),
        });
    }
    Ok(())
}

impl ChannelPrior {
    /// Independent packets with per-packet power `sigma_h2`.
    pub fn iid(l: usize, sigma_h2: f64) -> Result<Self> {
        if l == 0 {
            return Err(Error::EmptyInput {
                what: "prior needs at least one packet",
            });
        }
        check_scale("sigma_h2", sigma_h2)?;
        Ok(Self {
            l,
            kind: PriorKind::Iid { sigma_h2 },
            repr: CovRepr::Scalar { sigma_h2 },
        })
    }

    /// One shared gain: fully correlated across packets.
    pub fn slow_fading(l: usize, sigma_h2: f64) -> Result<Self> {
        if l == 0 {
            return Err(Error::EmptyInput {
                what: "prior needs at least one packet",
            });
        }
        check_scale("sigma_h2", sigma_h2)?;
        Ok(Self {
            l,
            kind: PriorKind::SlowFading { sigma_h2 },
            repr: CovRepr::Replicated { sigma_h2 },
        })
    }

    /// Geometric correlation `sigma_h2 * r^|i-j|` with `0 <= r < 1`.
    pub fn exponential(l: usize, sigma_h2: f64, r: f64) -> Result<Self> {
        if l == 0 {
            return Err(Error::EmptyInput {
                what: "prior needs at least one packet",
            });
        }
        check_scale("sigma_h2", sigma_h2)?;
        if !(0.0..1.0).contains(&r) {
            return Err(Error::InvalidParameter {
                what: format!("correlation r must satisfy 0 <= r < 1, got {r}"),
            });
        }
        let cov = DMatrix::from_fn(l, l, |i, j| {
            let d = i.abs_diff(j) as i32;
            Complex64::new(sigma_h2 * r.powi(d), 0.0)
        });
        Self::from_dense(cov, PriorKind::Exponential { sigma_h2, r })
    }

    /// Caller-supplied covariance; must be square, Hermitian and PSD.
    pub fn explicit(cov: DMatrix<Complex64>) -> Result<Self> {
        if cov.nrows() == 0 || cov.nrows() != cov.ncols() {
            return Err(Error::NotPsd {
                what: "covariance must be square and nonempty",
            });
        }
        Self::from_dense(cov, PriorKind::Explicit)
    }

    fn from_dense(cov: DMatrix<Complex64>, kind: PriorKind) -> Result<Self> {
        let l = cov.nrows();
        let scale = cov.iter().map(|z| z.norm()).fold(0.0_f64, f64::max);
        let herm_tol = 1e-10 * (1.0 + scale);
        for i in 0..l {
            for j in 0..l {
                if (cov[(i, j)] - cov[(j, i)].conj()).norm() > herm_tol {
                    return Err(Error::NotPsd {
                        what: "matrix is not Hermitian",
                    });
                }
            }
        }
        // Work on the exactly-Hermitian average so the eigensolver sees a
        // clean input even when entries carry round-off.
        let cov = {
            let adj = cov.adjoint();
            (&cov + adj) * Complex64::new(0.5, 0.0)
        };
        let eig = cov.clone().symmetric_eigen();
        let max_eig = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
        let psd_tol = SINGULAR_REL_TOL * (1.0 + max_eig);
        let mut eigs: Vec<f64> = Vec::with_capacity(l);
        for &lam in eig.eigenvalues.iter() {
            if lam < -psd_tol {
                return Err(Error::NotPsd {
                    what: "matrix has a negative eigenvalue",
                });
            }
            eigs.push(lam.max(0.0));
        }
        // Sampling square root B = U diag(sqrt(lambda)); covariance of B z is
        // exactly the (cleaned) covariance for z ~ CN(0, I).
        let mut sqrt = eig.eigenvectors.clone();
        for (j, &lam) in eigs.iter().enumerate() {
            let s = Complex64::new(lam.sqrt(), 0.0);
            for i in 0..l {
                sqrt[(i, j)] *= s;
            }
        }
        let chol = nalgebra::Cholesky::new(cov.clone());
        Ok(Self {
            l,
            kind,
            repr: CovRepr::Dense {
                cov,
                sqrt,
                chol,
                eigs,
            },
        })
    }

    /// Number of packets L.
    pub fn len(&self) -> usize {
        self.l
    }

    pub fn is_empty(&self) -> bool {
        self.l == 0
    }

    pub fn kind(&self) -> &PriorKind {
        &self.kind
    }

    /// Materializes the covariance matrix. O(L^2) memory for the structured
    /// kinds; prefer the scalar accessors for very large L.
    pub fn covariance(&self) -> DMatrix<Complex64> {
        match &self.repr {
            CovRepr::Scalar { sigma_h2 } => {
                DMatrix::from_diagonal_element(self.l, self.l, Complex64::new(*sigma_h2, 0.0))
            }
            CovRepr::Replicated { sigma_h2 } => {
                DMatrix::from_element(self.l, self.l, Complex64::new(*sigma_h2, 0.0))
            }
            CovRepr::Dense { cov, .. } => cov.clone(),
        }
    }

    /// Tr[C_H]; real because the covariance is Hermitian.
    pub fn trace(&self) -> f64 {
        match &self.repr {
            CovRepr::Scalar { sigma_h2 } | CovRepr::Replicated { sigma_h2 } => {
                *sigma_h2 * self.l as f64
            }
            CovRepr::Dense { cov, .. } => cov.diagonal().iter().map(|z| z.re).sum(),
        }
    }

    /// Mean per-packet power Tr[C_H]/L; the scalar stand-in for sigma_h2 used
    /// when a closed-form i.i.d. expression needs a scale from a general prior.
    pub fn mean_packet_power(&self) -> f64 {
        self.trace() / self.l as f64
    }

    /// Covariance eigenvalues (ascending order not guaranteed).
    pub(crate) fn eigenvalues(&self) -> Vec<f64> {
        match &self.repr {
            CovRepr::Scalar { sigma_h2 } => vec![*sigma_h2; self.l],
            CovRepr::Replicated { sigma_h2 } => {
                let mut v = vec![0.0; self.l];
                v[0] = *sigma_h2 * self.l as f64;
                v
            }
            CovRepr::Dense { eigs, .. } => eigs.clone(),
        }
    }

    /// True when the covariance cannot be inverted (slow fading with L > 1,
    /// zero scale, or an explicit matrix with a vanishing eigenvalue).
    pub fn is_singular(&self) -> bool {
        match &self.repr {
            CovRepr::Scalar { sigma_h2 } => *sigma_h2 <= 0.0,
            CovRepr::Replicated { sigma_h2 } => *sigma_h2 <= 0.0 || self.l > 1,
            CovRepr::Dense { chol, eigs, .. } => {
                let max = eigs.iter().cloned().fold(0.0_f64, f64::max);
                chol.is_none() || eigs.iter().any(|&e| e <= SINGULAR_REL_TOL * (1.0 + max))
            }
        }
    }

    /// One draw `H ~ CN(0, C_H)`. Always consumes exactly L complex normal
    /// draws from `rng`, so trial streams stay aligned across prior kinds.
    pub fn sample(&self, rng: &mut impl Rng) -> Vec<Complex64> {
        let z: Vec<Complex64> = (0..self.l).map(|_| draw_cn(1.0, rng)).collect();
        match &self.repr {
            CovRepr::Scalar { sigma_h2 } => {
                let s = sigma_h2.sqrt();
                z.iter().map(|w| w * s).collect()
            }
            CovRepr::Replicated { sigma_h2 } => {
                let h = z[0] * sigma_h2.sqrt();
                vec![h; self.l]
            }
            CovRepr::Dense { sqrt, .. } => {
                let zv = DVector::from_vec(z);
                let h = sqrt * zv;
                h.iter().copied().collect()
            }
        }
    }

    /// ln det C_H; requires a nonsingular covariance.
    pub(crate) fn ln_det(&self) -> Result<f64> {
        if self.is_singular() {
            return Err(Error::SingularCovariance);
        }
        match &self.repr {
            CovRepr::Scalar { sigma_h2 } => Ok(self.l as f64 * sigma_h2.ln()),
            CovRepr::Replicated { sigma_h2 } => Ok(sigma_h2.ln()), // only reachable at L = 1
            CovRepr::Dense { eigs, .. } => Ok(eigs.iter().map(|&e| e.ln()).sum()),
        }
    }

    /// `C_H * v`.
    pub(crate) fn cov_mul(&self, v: &[Complex64]) -> Vec<Complex64> {
        debug_assert_eq!(v.len(), self.l);
        match &self.repr {
            CovRepr::Scalar { sigma_h2 } => v.iter().map(|x| x * *sigma_h2).collect(),
            CovRepr::Replicated { sigma_h2 } => {
                let sum: Complex64 = v.iter().sum();
                vec![sum * *sigma_h2; self.l]
            }
            CovRepr::Dense { cov, .. } => {
                let out = cov * DVector::from_column_slice(v);
                out.iter().copied().collect()
            }
        }
    }

    /// `C_H^{-1} * v`; requires a nonsingular covariance.
    pub(crate) fn inv_mul(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        if self.is_singular() {
            return Err(Error::SingularCovariance);
        }
        match &self.repr {
            CovRepr::Scalar { sigma_h2 } => Ok(v.iter().map(|x| x / *sigma_h2).collect()),
            CovRepr::Replicated { sigma_h2 } => Ok(v.iter().map(|x| x / *sigma_h2).collect()),
            CovRepr::Dense { chol, .. } => {
                let chol = chol.as_ref().ok_or(Error::SingularCovariance)?;
                let sol = chol.solve(&DVector::from_column_slice(v));
                Ok(sol.iter().copied().collect())
            }
        }
    }

    /// Solves `(s * C_H + t * I) x = w`. Well defined for singular covariance
    /// as long as `t > 0`; this is the push-through form every estimator uses
    /// so that no explicit covariance inverse is ever formed.
    pub(crate) fn solve_shifted(&self, s: f64, t: f64, w: &[Complex64]) -> Result<Vec<Complex64>> {
        debug_assert_eq!(w.len(), self.l);
        match &self.repr {
            CovRepr::Scalar { sigma_h2 } => {
                let d = s * sigma_h2 + t;
                if d <= 0.0 {
                    return Err(Error::SingularCovariance);
                }
                Ok(w.iter().map(|x| x / d).collect())
            }
            CovRepr::Replicated { sigma_h2 } => {
                // (t I + s*sigma_h2 * ones)^{-1} by Sherman-Morrison.
                if t <= 0.0 {
                    let d = s * sigma_h2;
                    if d <= 0.0 || self.l > 1 {
                        return Err(Error::SingularCovariance);
                    }
                    return Ok(w.iter().map(|x| x / d).collect());
                }
                let g = s * sigma_h2;
                let sum: Complex64 = w.iter().sum();
                let corr = sum * (g / (t + g * self.l as f64)) / t;
                Ok(w.iter().map(|x| x / t - corr).collect())
            }
            CovRepr::Dense { cov, .. } => {
                let mut m = cov * Complex64::new(s, 0.0);
                for i in 0..self.l {
                    m[(i, i)] += Complex64::new(t, 0.0);
                }
                let chol = nalgebra::Cholesky::new(m).ok_or(Error::SingularCovariance)?;
                let sol = chol.solve(&DVector::from_column_slice(w));
                Ok(sol.iter().copied().collect())
            }
        }
    }
}

/// Raw samples of one received packet: the first `k` under load 1, the rest
/// under load 2.
#[derive(Debug, Clone)]
pub struct PacketObservation {
    pub samples: Vec<Complex64>,
}

impl PacketObservation {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Simulates one packet: `[h_i * x1 ; f * h_i * x2]` plus circular complex
/// Gaussian noise of variance `noise_var` per sample.
///
/// `f` is passed explicitly rather than read from the scenario so studies can
/// exercise ratio values with no passive antenna preimage; pass `scenario.f()`
/// for the physical forward model. Exactly `t` noise draws are consumed in
/// sample order.
pub fn simulate_packet(
    h_i: Complex64,
    f: Complex64,
    scenario: &ReceiverScenario,
    rng: &mut impl Rng,
) -> PacketObservation {
    let training = scenario.training();
    let k = training.k();
    let nv = scenario.noise_var();
    let samples = training
        .symbols()
        .iter()
        .enumerate()
        .map(|(n, x)| {
            let mean = if n < k { h_i * x } else { f * h_i * x };
            mean + draw_cn(nv, rng)
        })
        .collect();
    PacketObservation { samples }
}
