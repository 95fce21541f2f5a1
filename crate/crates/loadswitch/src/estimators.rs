//! Joint estimation of the channel block and the load-switch ratio.
//!
//! The channel vector `H` is random with a known Gaussian prior while the
//! ratio `F` (equivalently the antenna impedance) is a deterministic unknown,
//! so the natural objective is the hybrid posterior-likelihood
//!
//! ```text
//! L(H, F) = -(S1/nv) ||V1 - H||^2 - (S2/nv) ||V2 - F H||^2 - H^H C_H^{-1} H + const
//! ```
//!
//! maximized over both arguments: MAP in `H`, ML in `F`. For fixed `F` the
//! inner maximizer is linear,
//!
//! ```text
//! H_hat(F) = A(F) (V1 + alpha conj(F) V2),
//! A(F)     = [(1 + alpha |F|^2) I + (nv/S1) C_H^{-1}]^{-1}
//! ```
//!
//! and eliminating `H` reduces the outer problem to the single complex root
//! condition `g(F) = H_hat(F)^H (V2 - F H_hat(F)) = 0`. All linear algebra
//! here goes through the shifted solve `(s C_H + t I) x = w`, never an
//! explicit covariance inverse, so ill-conditioned priors stay usable.
//!
//! Estimators provided:
//! - [`joint_map_ml_general`]: damped Newton on `g` with multistart, any
//!   nonsingular prior.
//! - [`ml_f_iid`] / [`estimate_iid_quadratic`]: closed-form quadratic in the
//!   cross moments for white priors, exact in one shot.
//! - [`estimate_low_noise`]: the same quadratic with the shrinkage factor
//!   forced to 1; cheaper, biased at low SNR.
//! - [`estimate_single_packet`] / [`estimate_slow_fading`]: scalar closed
//!   forms for L = 1 and for a block-constant channel (pooled statistics).
//! - [`consistent_f`] / [`estimate_consistent`]: a moment-corrected variant
//!   whose fixed-SNR, large-L limit is the true ratio.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::ChannelPrior;
use crate::stats::{cross_moments, CrossMoments, SufficientStats};

/// Which estimator produced a [`HybridEstimate`]; doubles as the label used
/// in sweep output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    General,
    IidQuadratic,
    LowNoise,
    SinglePacket,
    SlowFading,
    Consistent,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::General => "general",
            Method::IidQuadratic => "iid_quadratic",
            Method::LowNoise => "low_noise",
            Method::SinglePacket => "single_packet",
            Method::SlowFading => "slow_fading",
            Method::Consistent => "consistent",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Joint estimate of the channel block and the load-switch ratio.
#[derive(Debug, Clone)]
pub struct HybridEstimate {
    /// MAP channel estimate, one entry per packet.
    pub h_hat: Vec<Complex64>,
    /// ML ratio estimate.
    pub f_hat: Complex64,
    /// Antenna impedance mapped back from `f_hat`; filled by callers that
    /// know the load pair, since the estimators themselves do not.
    pub z_a_hat: Option<Complex64>,
    /// Hybrid objective value at the estimate. Positive infinity marks an
    /// exact fit in the noiseless mode, negative infinity a miss there.
    pub loglik: f64,
    pub method: Method,
    /// Distinct stationary candidates examined, best first.
    pub candidates: Vec<Complex64>,
}

/// Tuning for the general root search.
#[derive(Debug, Clone)]
pub struct SolverSettings {
    /// Normalized residual below which a point counts as a root of `g`:
    /// `|H^H b| / (||H|| ||b||)` with `b = V2 - F H`, a scale-free cosine.
    pub root_tolerance: f64,
    /// Newton iteration budget per start point.
    pub max_iterations: usize,
    /// Extra start points tried in addition to the built-in closed-form seeds.
    pub multistart: Vec<Complex64>,
    /// Converged roots closer than `dedupe_radius * (1 + |root|)` collapse
    /// into one candidate.
    pub dedupe_radius: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            root_tolerance: 1e-10,
            max_iterations: 60,
            multistart: Vec::new(),
            dedupe_radius: 1e-6,
        }
    }
}

/// Prior-vs-noise shrinkage of the first-segment statistic:
/// `c = S1 sigma_h2 / (S1 sigma_h2 + noise_var)`, in (0, 1].
pub fn shrinkage_c(s1: f64, sigma_h2: f64, noise_var: f64) -> f64 {
    let p = s1 * sigma_h2;
    p / (p + noise_var)
}

/// Moment correction `d = 1 - (noise_var / (S1 sigma_h2))^2` used by the
/// consistent ratio estimator. Equals 1 in the noiseless mode and can go
/// negative when noise dominates the first segment.
pub fn correction_d(s1: f64, sigma_h2: f64, noise_var: f64) -> f64 {
    let r = noise_var / (s1 * sigma_h2);
    1.0 - r * r
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !v.is_finite() || v <= 0.0 {
        return Err(Error::InvalidParameter {
            what: format!("{name} must be finite and > 0, got {v}"),
        });
    }
    Ok(())
}

/// Hybrid objective at `(h, f)`: Gaussian data terms for both segments plus
/// the prior quadratic, with the full normalization constant so values are
/// comparable across priors and noise levels.
///
/// In the noiseless mode the density degenerates; the function returns
/// positive infinity when the data terms vanish to relative precision and
/// negative infinity otherwise.
pub fn hybrid_loglik(
    stats: &SufficientStats,
    prior: &ChannelPrior,
    h: &[Complex64],
    f: Complex64,
) -> Result<f64> {
    let l = stats.len();
    if prior.len() != l || h.len() != l {
        return Err(Error::LengthMismatch {
            what: format!(
                "stats cover {l} packets, prior {}, channel {}",
                prior.len(),
                h.len()
            ),
        });
    }
    let mut r1 = 0.0;
    let mut r2 = 0.0;
    let mut scale = 0.0;
    for ((hi, a), b) in h.iter().zip(&stats.v1).zip(&stats.v2) {
        r1 += (a - hi).norm_sqr();
        r2 += (b - f * hi).norm_sqr();
        scale += a.norm_sqr() + b.norm_sqr();
    }
    let nv = stats.noise_var;
    if nv == 0.0 {
        // degenerate density: exact fit or impossible
        return Ok(if r1 + r2 <= 1e-24 * (1.0 + scale) {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        });
    }
    let cinv_h = prior.inv_mul(h)?;
    let quad: f64 = h
        .iter()
        .zip(cinv_h.iter())
        .map(|(a, b)| (a.conj() * b).re)
        .sum();
    let lf = l as f64;
    let pi = std::f64::consts::PI;
    let log_norm = -lf * (pi * nv / stats.s1).ln()
        - lf * (pi * nv / stats.s2).ln()
        - (lf * pi.ln() + prior.ln_det()?);
    Ok(-(stats.s1 / nv) * r1 - (stats.s2 / nv) * r2 - quad + log_norm)
}

/// MAP channel estimate for a fixed ratio value:
/// `H_hat = C_H ((1 + alpha |f|^2) C_H + (nv/S1) I)^{-1} (V1 + alpha conj(f) V2)`.
pub fn map_h_given_f(
    stats: &SufficientStats,
    prior: &ChannelPrior,
    f: Complex64,
) -> Result<Vec<Complex64>> {
    let l = stats.len();
    if prior.len() != l {
        return Err(Error::LengthMismatch {
            what: format!("stats cover {l} packets, prior {}", prior.len()),
        });
    }
    let alpha = stats.alpha();
    let fc = f.conj();
    let u: Vec<Complex64> = (0..l)
        .map(|i| stats.v1[i] + stats.v2[i] * (fc * alpha))
        .collect();
    let s = 1.0 + alpha * f.norm_sqr();
    let t = stats.noise_var / stats.s1;
    let cu = prior.cov_mul(&u);
    prior.solve_shifted(s, t, &cu)
}

/// Stationarity function of the profiled objective. `f` is a joint stationary
/// point exactly when `g(f) = H_hat(f)^H (V2 - f H_hat(f)) = 0`; up to the
/// positive factor `S2/nv` this is the conjugate gradient of the profile.
pub fn g_of_f(stats: &SufficientStats, prior: &ChannelPrior, f: Complex64) -> Result<Complex64> {
    Ok(eval_g(stats, prior, f)?.0)
}

/// Returns `(g, residual)` where the residual is the scale-free cosine
/// `|H^H b| / (||H|| ||b||)`; a vanishing denominator is a genuine root.
fn eval_g(stats: &SufficientStats, prior: &ChannelPrior, f: Complex64) -> Result<(Complex64, f64)> {
    let h = map_h_given_f(stats, prior, f)?;
    let mut dot = Complex64::new(0.0, 0.0);
    let mut na = 0.0;
    let mut nb = 0.0;
    let mut nb_scale = 0.0;
    for (hi, v2) in h.iter().zip(&stats.v2) {
        let fit = f * hi;
        let b = v2 - fit;
        dot += hi.conj() * b;
        na += hi.norm_sqr();
        nb += b.norm_sqr();
        nb_scale += v2.norm_sqr() + fit.norm_sqr();
    }
    // a second segment fit down to rounding noise is an exact root; past
    // that point the residual direction is noise and its cosine means nothing
    if nb <= 1e-24 * nb_scale {
        return Ok((Complex64::new(0.0, 0.0), 0.0));
    }
    let denom = (na * nb).sqrt();
    if denom == 0.0 {
        return Ok((dot, 0.0));
    }
    let res = dot.norm() / denom;
    // the products feeding `dot` carry rounding of order eps * sqrt(nb_scale),
    // so a cosine at or below that floor is a converged root; accepting there
    // leaves an error in the ratio of order eps * |F|
    let floor = f64::EPSILON * (2.0 * nb_scale / nb).sqrt();
    if res <= floor {
        return Ok((Complex64::new(0.0, 0.0), 0.0));
    }
    Ok((dot, res))
}

/// Closed-form stationary roots of the white-prior profile objective.
#[derive(Debug, Clone, Copy)]
pub struct IidRoots {
    /// Root taking the positive branch of the discriminant; the consistent
    /// choice on clean data.
    pub plus: Complex64,
    /// The negative branch, `-1/(alpha conj(F))` on clean data.
    pub minus: Complex64,
    /// Whichever root scores higher on the profiled objective.
    pub selected: Complex64,
    pub selected_is_plus: bool,
}

/// Profile objective restricted to second-order moments, up to positive
/// affine terms that do not depend on `f`; used to pick between the two
/// stationary roots without going back to the raw statistics.
fn profile_score(m: &CrossMoments, c: f64, alpha: f64, f: Complex64) -> f64 {
    let gain = 1.0 / (1.0 / c + alpha * f.norm_sqr());
    let u_norm = m.p11 + alpha * alpha * f.norm_sqr() * m.p22 + 2.0 * alpha * (f.conj() * m.p12).re;
    gain * u_norm
}

/// Solves the stationarity quadratic for a white channel prior,
///
/// ```text
/// p12 + (alpha p22 - c p11) f - alpha c p21 f^2 = 0,
/// ```
///
/// returning both roots and the one with the higher profile score. The
/// discriminant `(alpha p22 - c p11)^2 + 4 alpha c |p12|^2` is real and
/// nonnegative, so the roots always exist; a vanishing cross moment
/// degenerates the quadratic to its linear part (both root slots then carry
/// the same value) and fails with `NoInformation` when even that is flat.
pub fn ml_f_iid(m: &CrossMoments, c: f64, alpha: f64) -> Result<IidRoots> {
    check_positive("alpha", alpha)?;
    if !c.is_finite() || c <= 0.0 || c > 1.0 {
        return Err(Error::InvalidParameter {
            what: format!("shrinkage c must lie in (0, 1], got {c}"),
        });
    }
    let b = alpha * m.p22 - c * m.p11;
    let cross_scale = (m.p11 * m.p22).sqrt();
    if m.p12.norm() <= 1e-12 * cross_scale {
        // quadratic degenerates to b f + p12 = 0
        if b.abs() <= 1e-12 * (c * m.p11 + alpha * m.p22) {
            return Err(Error::NoInformation);
        }
        let f = m.p12 / (c * m.p11 - alpha * m.p22);
        return Ok(IidRoots {
            plus: f,
            minus: f,
            selected: f,
            selected_is_plus: true,
        });
    }
    let disc = (b * b + 4.0 * alpha * c * m.p12.norm_sqr()).sqrt();
    let den = m.p21 * (2.0 * alpha * c);
    let plus = Complex64::new(b + disc, 0.0) / den;
    let minus = Complex64::new(b - disc, 0.0) / den;
    let (selected, selected_is_plus) =
        if profile_score(m, c, alpha, plus) >= profile_score(m, c, alpha, minus) {
            (plus, true)
        } else {
            (minus, false)
        };
    Ok(IidRoots {
        plus,
        minus,
        selected,
        selected_is_plus,
    })
}

/// Moment-corrected ratio estimator,
///
/// ```text
/// f = [alpha p22 - c p11 + sqrt((alpha p22 - c p11)^2 + 4 alpha c d |p12|^2)]
///     / (2 alpha p21)
/// ```
///
/// which maps the population moments back to the exact ratio at any fixed
/// SNR, removing the estimation-noise bias the plain quadratic keeps as
/// L grows.
pub fn consistent_f(m: &CrossMoments, c: f64, alpha: f64, d: f64) -> Result<Complex64> {
    check_positive("alpha", alpha)?;
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
    let cross_scale = (m.p11 * m.p22).sqrt();
    if m.p12.norm() <= 1e-12 * cross_scale {
        return Err(Error::NoInformation);
    }
    let b = alpha * m.p22 - c * m.p11;
    let radicand = b * b + 4.0 * alpha * c * d * m.p12.norm_sqr();
    if radicand < 0.0 {
        return Err(Error::InvalidParameter {
            what: format!(
                "negative discriminant {radicand:e} in the consistent estimator; \
                 noise dominates the first training segment"
            ),
        });
    }
    Ok(Complex64::new(b + radicand.sqrt(), 0.0) / (m.p21 * (2.0 * alpha)))
}

fn all_zero(v: &[Complex64]) -> bool {
    v.iter().all(|z| z.re == 0.0 && z.im == 0.0)
}

/// MAP channel under a white prior at a fixed ratio, in scalar form:
/// `H_i = (V1_i + alpha conj(f) V2_i) / (1/c + alpha |f|^2)`.
fn map_h_white(stats: &SufficientStats, c: f64, f: Complex64) -> Vec<Complex64> {
    let alpha = stats.alpha();
    let gain = 1.0 / (1.0 / c + alpha * f.norm_sqr());
    let fc = f.conj();
    (0..stats.len())
        .map(|i| (stats.v1[i] + stats.v2[i] * (fc * alpha)) * gain)
        .collect()
}

/// Closed-form joint estimate for a white prior `C_H = sigma_h2 I` via the
/// stationarity quadratic in the cross moments. Exact maximizer, no
/// iteration.
pub fn estimate_iid_quadratic(stats: &SufficientStats, sigma_h2: f64) -> Result<HybridEstimate> {
    check_positive("sigma_h2", sigma_h2)?;
    if all_zero(&stats.v1) {
        return Err(Error::Unidentifiable {
            h_hat: vec![Complex64::new(0.0, 0.0); stats.len()],
        });
    }
    let c = shrinkage_c(stats.s1, sigma_h2, stats.noise_var);
    let m = cross_moments(stats);
    let roots = ml_f_iid(&m, c, stats.alpha())?;
    finish_white_estimate(stats, sigma_h2, c, roots.selected, Method::IidQuadratic, {
        let mut cands = vec![roots.selected];
        let other = if roots.selected_is_plus {
            roots.minus
        } else {
            roots.plus
        };
        if other != roots.selected {
            cands.push(other);
        }
        cands
    })
}

/// The quadratic estimator with the shrinkage factor pinned at 1, i.e. the
/// high-SNR simplification. The channel estimate and objective still use the
/// true shrinkage so values stay comparable.
pub fn estimate_low_noise(stats: &SufficientStats, sigma_h2: f64) -> Result<HybridEstimate> {
    check_positive("sigma_h2", sigma_h2)?;
    if all_zero(&stats.v1) {
        return Err(Error::Unidentifiable {
            h_hat: vec![Complex64::new(0.0, 0.0); stats.len()],
        });
    }
    let m = cross_moments(stats);
    let roots = ml_f_iid(&m, 1.0, stats.alpha())?;
    let c = shrinkage_c(stats.s1, sigma_h2, stats.noise_var);
    finish_white_estimate(stats, sigma_h2, c, roots.selected, Method::LowNoise, {
        let mut cands = vec![roots.selected];
        let other = if roots.selected_is_plus {
            roots.minus
        } else {
            roots.plus
        };
        if other != roots.selected {
            cands.push(other);
        }
        cands
    })
}

/// Moment-corrected estimate under a white prior; see [`consistent_f`].
pub fn estimate_consistent(stats: &SufficientStats, sigma_h2: f64) -> Result<HybridEstimate> {
    check_positive("sigma_h2", sigma_h2)?;
    if all_zero(&stats.v1) {
        return Err(Error::Unidentifiable {
            h_hat: vec![Complex64::new(0.0, 0.0); stats.len()],
        });
    }
    let c = shrinkage_c(stats.s1, sigma_h2, stats.noise_var);
    let d = correction_d(stats.s1, sigma_h2, stats.noise_var);
    let m = cross_moments(stats);
    let f = consistent_f(&m, c, stats.alpha(), d)?;
    finish_white_estimate(stats, sigma_h2, c, f, Method::Consistent, vec![f])
}

fn finish_white_estimate(
    stats: &SufficientStats,
    sigma_h2: f64,
    c: f64,
    f: Complex64,
    method: Method,
    candidates: Vec<Complex64>,
) -> Result<HybridEstimate> {
    let h_hat = map_h_white(stats, c, f);
    let prior = ChannelPrior::iid(stats.len(), sigma_h2)?;
    let loglik = hybrid_loglik(stats, &prior, &h_hat, f)?;
    Ok(HybridEstimate {
        h_hat,
        f_hat: f,
        z_a_hat: None,
        loglik,
        method,
        candidates,
    })
}

/// Scalar closed form for a single packet: `H_hat = c V1`, `F_hat = V2 / (c V1)`.
///
/// The fit to the second segment is exact, so the ratio estimate has no
/// finite moments; prefer median-style error metrics when aggregating it.
pub fn estimate_single_packet(stats: &SufficientStats, sigma_h2: f64) -> Result<HybridEstimate> {
    check_positive("sigma_h2", sigma_h2)?;
    if stats.len() != 1 {
        return Err(Error::InvalidParameter {
            what: format!(
                "single-packet estimator needs exactly one packet, got {}",
                stats.len()
            ),
        });
    }
    let v1 = stats.v1[0];
    let v2 = stats.v2[0];
    if v1.re == 0.0 && v1.im == 0.0 {
        return Err(Error::Unidentifiable {
            h_hat: vec![Complex64::new(0.0, 0.0)],
        });
    }
    let c = shrinkage_c(stats.s1, sigma_h2, stats.noise_var);
    let h_hat = v1 * c;
    let f_hat = v2 / h_hat;
    let prior = ChannelPrior::iid(1, sigma_h2)?;
    let loglik = hybrid_loglik(stats, &prior, &[h_hat], f_hat)?;
    // the rival stationary point puts all the energy on the second segment
    let mut candidates = vec![f_hat];
    if v2.norm() > 0.0 {
        candidates.push(-v1.conj() / (v2.conj() * stats.alpha()));
    }
    Ok(HybridEstimate {
        h_hat: vec![h_hat],
        f_hat,
        z_a_hat: None,
        loglik,
        method: Method::SinglePacket,
        candidates,
    })
}

/// Closed form for a block-constant channel (fully correlated prior): pool
/// the per-packet statistics into one average pair with energies `L S1`,
/// `L S2`, apply the single-packet solution, and replicate the channel.
pub fn estimate_slow_fading(stats: &SufficientStats, sigma_h2: f64) -> Result<HybridEstimate> {
    check_positive("sigma_h2", sigma_h2)?;
    let l = stats.len();
    let lf = l as f64;
    let v1p: Complex64 = stats.v1.iter().sum::<Complex64>() / lf;
    let v2p: Complex64 = stats.v2.iter().sum::<Complex64>() / lf;
    if v1p.re == 0.0 && v1p.im == 0.0 {
        return Err(Error::Unidentifiable {
            h_hat: vec![Complex64::new(0.0, 0.0); l],
        });
    }
    let c_l = shrinkage_c(lf * stats.s1, sigma_h2, stats.noise_var);
    let h = v1p * c_l;
    let f_hat = v2p / h;

    // objective under the shared-gain density: every packet repeats the same
    // scalar channel, so the prior term is a single complex Gaussian
    let nv = stats.noise_var;
    let mut r1 = 0.0;
    let mut r2 = 0.0;
    let mut scale = 0.0;
    for i in 0..l {
        r1 += (stats.v1[i] - h).norm_sqr();
        r2 += (stats.v2[i] - f_hat * h).norm_sqr();
        scale += stats.v1[i].norm_sqr() + stats.v2[i].norm_sqr();
    }
    let loglik = if nv == 0.0 {
        if r1 + r2 <= 1e-24 * (1.0 + scale) {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        }
    } else {
        let pi = std::f64::consts::PI;
        -(stats.s1 / nv) * r1
            - (stats.s2 / nv) * r2
            - h.norm_sqr() / sigma_h2
            - lf * (pi * nv / stats.s1).ln()
            - lf * (pi * nv / stats.s2).ln()
            - (pi * sigma_h2).ln()
    };
    Ok(HybridEstimate {
        h_hat: vec![h; l],
        f_hat,
        z_a_hat: None,
        loglik,
        method: Method::SlowFading,
        candidates: vec![f_hat],
    })
}

/// Newton root search on `g` over the real-imaginary plane with multistart.
///
/// Start points are the closed-form white-prior roots (with the prior scale
/// taken as the mean packet power), their shrinkage-free variants, the
/// origin, and any extras in `settings.multistart`. Converged roots are
/// deduplicated and the one with the highest hybrid objective wins.
pub fn joint_map_ml_general(
    stats: &SufficientStats,
    prior: &ChannelPrior,
    settings: &SolverSettings,
) -> Result<HybridEstimate> {
    let l = stats.len();
    if prior.len() != l {
        return Err(Error::LengthMismatch {
            what: format!("stats cover {l} packets, prior {}", prior.len()),
        });
    }
    if prior.is_singular() {
        return Err(Error::SingularCovariance);
    }
    check_positive("root_tolerance", settings.root_tolerance)?;
    check_positive("dedupe_radius", settings.dedupe_radius)?;
    if all_zero(&stats.v1) {
        return Err(Error::Unidentifiable {
            h_hat: vec![Complex64::new(0.0, 0.0); l],
        });
    }

    let alpha = stats.alpha();
    let m = cross_moments(stats);
    let mut seeds: Vec<Complex64> = Vec::new();
    let push_seed = |list: &mut Vec<Complex64>, f: Complex64| {
        if !f.re.is_finite() || !f.im.is_finite() {
            return;
        }
        let dup = list
            .iter()
            .any(|s| (s - f).norm() <= settings.dedupe_radius * (1.0 + f.norm()));
        if !dup {
            list.push(f);
        }
    };
    let c_proxy = shrinkage_c(stats.s1, prior.mean_packet_power(), stats.noise_var);
    if c_proxy > 0.0 && c_proxy <= 1.0 {
        if let Ok(r) = ml_f_iid(&m, c_proxy, alpha) {
            push_seed(&mut seeds, r.selected);
            push_seed(&mut seeds, r.plus);
            push_seed(&mut seeds, r.minus);
        }
    }
    if let Ok(r) = ml_f_iid(&m, 1.0, alpha) {
        push_seed(&mut seeds, r.plus);
        push_seed(&mut seeds, r.minus);
    }
    push_seed(&mut seeds, Complex64::new(0.0, 0.0));
    for &f in &settings.multistart {
        push_seed(&mut seeds, f);
    }

    let mut roots: Vec<Complex64> = Vec::new();
    let mut best_residual = f64::INFINITY;
    for &seed in &seeds {
        match newton_root(stats, prior, seed, settings) {
            Ok(NewtonOutcome::Converged(f)) => {
                let dup = roots
                    .iter()
                    .any(|r| (r - f).norm() <= settings.dedupe_radius * (1.0 + r.norm()));
                if !dup {
                    roots.push(f);
                }
            }
            Ok(NewtonOutcome::Stalled(res)) => best_residual = best_residual.min(res),
            Err(e) => return Err(e),
        }
    }
    if roots.is_empty() {
        return Err(Error::SolverFailure { best_residual });
    }

    let mut scored: Vec<(f64, Complex64)> = Vec::with_capacity(roots.len());
    for &f in &roots {
        let h = map_h_given_f(stats, prior, f)?;
        let ll = hybrid_loglik(stats, prior, &h, f)?;
        let ll = if ll.is_nan() { f64::NEG_INFINITY } else { ll };
        scored.push((ll, f));
    }
    scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal));
    let (loglik, f_hat) = scored[0];
    let h_hat = map_h_given_f(stats, prior, f_hat)?;
    Ok(HybridEstimate {
        h_hat,
        f_hat,
        z_a_hat: None,
        loglik,
        method: Method::General,
        candidates: scored.into_iter().map(|(_, f)| f).collect(),
    })
}

enum NewtonOutcome {
    Converged(Complex64),
    /// Best residual reached before the budget ran out.
    Stalled(f64),
}

fn newton_root(
    stats: &SufficientStats,
    prior: &ChannelPrior,
    seed: Complex64,
    settings: &SolverSettings,
) -> Result<NewtonOutcome> {
    let mut f = seed;
    let (mut g, mut res) = eval_g(stats, prior, f)?;
    let mut best = res;
    for _ in 0..settings.max_iterations {
        if res <= settings.root_tolerance {
            return Ok(NewtonOutcome::Converged(f));
        }
        // Jacobian of (Re g, Im g) over (Re f, Im f) by central differences.
        let step_h = 6e-6 * (1.0 + f.norm());
        let dre = (eval_g(stats, prior, f + Complex64::new(step_h, 0.0))?.0
            - eval_g(stats, prior, f - Complex64::new(step_h, 0.0))?.0)
            / (2.0 * step_h);
        let dim = (eval_g(stats, prior, f + Complex64::new(0.0, step_h))?.0
            - eval_g(stats, prior, f - Complex64::new(0.0, step_h))?.0)
            / (2.0 * step_h);
        let det = dre.re * dim.im - dim.re * dre.im;
        if !det.is_finite() || det.abs() < 1e-300 {
            break;
        }
        let dx = (-g.re * dim.im + dim.re * g.im) / det;
        let dy = (-dre.re * g.im + g.re * dre.im) / det;
        let mut step = Complex64::new(dx, dy);
        if !step.re.is_finite() || !step.im.is_finite() {
            break;
        }
        // halve until the raw root function shrinks
        let mut accepted = false;
        for _ in 0..25 {
            let cand = f + step;
            let (gc, resc) = eval_g(stats, prior, cand)?;
            if gc.norm() < g.norm() || resc <= settings.root_tolerance {
                f = cand;
                g = gc;
                res = resc;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        best = best.min(res);
    }
    if res <= settings.root_tolerance {
        Ok(NewtonOutcome::Converged(f))
    } else {
        Ok(NewtonOutcome::Stalled(best.min(res)))
    }
}
