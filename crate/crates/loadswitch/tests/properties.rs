//! Randomized invariant checks over the public API. Each property encodes a
//! structural fact the estimators rely on, so a failure here usually means a
//! convention drifted (moment ordering, branch selection, normalization)
//! rather than a tolerance being too tight.

use num_complex::Complex64;
use proptest::prelude::*;

use loadswitch::bounds::hcrb_relative_h;
use loadswitch::estimators::{
    consistent_f, correction_d, estimate_single_packet, g_of_f, hybrid_loglik, map_h_given_f,
    ml_f_iid, shrinkage_c,
};
use loadswitch::model::{
    f_from_impedance, impedance_from_f, simulate_packet, zadoff_chu, ChannelPrior,
    PacketObservation, ReceiverScenario,
};
use loadswitch::rng::trial_rng;
use loadswitch::stats::{
    cross_moments, read_stats_csv, reduce_packet, write_stats_csv, SufficientStats,
};

fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

prop_compose! {
    /// Passive antenna impedance away from the short-circuit edge.
    fn arb_antenna()(re in 0.5f64..400.0, im in -400.0f64..400.0) -> Complex64 {
        c64(re, im)
    }
}

prop_compose! {
    fn arb_load()(re in 1.0f64..200.0, im in -100.0f64..100.0) -> Complex64 {
        c64(re, im)
    }
}

prop_compose! {
    /// Reduced statistics with bounded entries and strictly positive scales.
    fn arb_stats()(
        l in 2usize..8,
        s1 in 1.0f64..64.0,
        s2 in 1.0f64..64.0,
        nv in 1e-3f64..2.0,
    )(
        v1 in prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), l),
        v2 in prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), l),
        s1 in Just(s1),
        s2 in Just(s2),
        nv in Just(nv),
    ) -> SufficientStats {
        let lift = |xs: Vec<(f64, f64)>| xs.into_iter().map(|(a, b)| c64(a, b)).collect();
        SufficientStats::new(lift(v1), lift(v2), s1, s2, nv).unwrap()
    }
}

proptest! {
    #[test]
    fn impedance_ratio_round_trip(za in arb_antenna(), z1 in arb_load(), z2 in arb_load()) {
        prop_assume!((z1 - z2).norm() > 1e-3);
        let f = f_from_impedance(za, z1, z2).unwrap();
        let back = impedance_from_f(f, z1, z2).unwrap();
        prop_assert!(
            (back - za).norm() <= 1e-9 * (1.0 + za.norm()),
            "za={za} back={back}"
        );
    }

    #[test]
    fn ratio_image_never_hits_the_pole(za in arb_antenna(), z1 in arb_load(), z2 in arb_load()) {
        prop_assume!((z1 - z2).norm() > 1e-3);
        // the pole of the inverse map is the image of an unbounded antenna
        let f = f_from_impedance(za, z1, z2).unwrap();
        let pole = z2 / z1;
        prop_assert!((f - pole).norm() > 0.0);
    }

    #[test]
    fn cross_moments_are_hermitian_and_cauchy_schwarz(stats in arb_stats()) {
        let m = cross_moments(&stats);
        prop_assert!(m.p11 >= 0.0 && m.p22 >= 0.0);
        prop_assert_eq!(m.p21, m.p12.conj());
        prop_assert!(
            m.p12.norm_sqr() <= m.p11 * m.p22 * (1.0 + 1e-12) + 1e-300,
            "|p12|^2={} p11*p22={}",
            m.p12.norm_sqr(),
            m.p11 * m.p22
        );
    }

    #[test]
    fn zadoff_chu_symbols_stay_on_the_unit_circle(
        half_t in 1usize..=64,
        k_frac in 0.01f64..0.99,
        u_odd in 0u64..64,
    ) {
        let t = 2 * half_t;
        let u = 2 * u_odd + 1;
        prop_assume!(gcd(u, t as u64) == 1);
        let k = ((t as f64 * k_frac) as usize).clamp(1, t - 1);
        let training = zadoff_chu(t, k, u).unwrap();
        for x in training.symbols() {
            prop_assert!((x.norm() - 1.0).abs() < 1e-12);
        }
        // unit symbols make the segment energies pure counts
        prop_assert!((training.s1() - k as f64).abs() < 1e-9 * k as f64);
        prop_assert!((training.s2() - (t - k) as f64).abs() < 1e-9 * (t - k) as f64);
    }

    #[test]
    fn packet_reduction_is_linear(
        a in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 64),
        b in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 64),
        lam in (-3.0f64..3.0, -3.0f64..3.0),
        mu in (-3.0f64..3.0, -3.0f64..3.0),
    ) {
        let scenario = ReceiverScenario::reference(0.5).unwrap();
        let training = scenario.training();
        let lam = c64(lam.0, lam.1);
        let mu = c64(mu.0, mu.1);
        let lift = |xs: &[(f64, f64)]| -> Vec<Complex64> {
            xs.iter().map(|&(re, im)| c64(re, im)).collect()
        };
        let pa = PacketObservation { samples: lift(&a) };
        let pb = PacketObservation { samples: lift(&b) };
        let mixed = PacketObservation {
            samples: pa
                .samples
                .iter()
                .zip(&pb.samples)
                .map(|(x, y)| lam * x + mu * y)
                .collect(),
        };
        let (a1, a2) = reduce_packet(&pa, training).unwrap();
        let (b1, b2) = reduce_packet(&pb, training).unwrap();
        let (m1, m2) = reduce_packet(&mixed, training).unwrap();
        prop_assert!((m1 - (lam * a1 + mu * b1)).norm() < 1e-10 * (1.0 + m1.norm()));
        prop_assert!((m2 - (lam * a2 + mu * b2)).norm() < 1e-10 * (1.0 + m2.norm()));
    }

    #[test]
    fn noiseless_reduction_recovers_channel_and_ratio(
        h in (-3.0f64..3.0, -3.0f64..3.0),
        f in (-2.0f64..2.0, -2.0f64..2.0),
        seed in 0u64..1024,
    ) {
        let h = c64(h.0, h.1);
        let f = c64(f.0, f.1);
        prop_assume!(f.norm() > 0.05);
        let scenario = ReceiverScenario::reference(0.0).unwrap();
        let mut rng = trial_rng(seed, 0, 0);
        let packet = simulate_packet(h, f, &scenario, &mut rng);
        let (v1, v2) = reduce_packet(&packet, scenario.training()).unwrap();
        prop_assert!((v1 - h).norm() <= 1e-12 * (1.0 + h.norm()));
        prop_assert!((v2 - f * h).norm() <= 1e-12 * (1.0 + (f * h).norm()));
    }

    #[test]
    fn quadratic_roots_are_stationary_points(stats in arb_stats(), sigma_h2 in 0.2f64..4.0) {
        let m = cross_moments(&stats);
        prop_assume!(m.p12.norm() > 1e-4 * (m.p11 * m.p22).sqrt());
        let c = shrinkage_c(stats.s1, sigma_h2, stats.noise_var);
        let roots = ml_f_iid(&m, c, stats.alpha()).unwrap();
        let prior = ChannelPrior::iid(stats.len(), sigma_h2).unwrap();
        let scale = 1.0 + m.p11 + m.p22;
        for root in [roots.plus, roots.minus] {
            let g = g_of_f(&stats, &prior, root).unwrap();
            prop_assert!(
                g.norm() <= 1e-7 * scale * stats.len() as f64,
                "g({root}) = {g}"
            );
        }
    }

    #[test]
    fn selected_root_wins_the_hybrid_objective(stats in arb_stats(), sigma_h2 in 0.2f64..4.0) {
        let m = cross_moments(&stats);
        prop_assume!(m.p12.norm() > 1e-4 * (m.p11 * m.p22).sqrt());
        let c = shrinkage_c(stats.s1, sigma_h2, stats.noise_var);
        let roots = ml_f_iid(&m, c, stats.alpha()).unwrap();
        let prior = ChannelPrior::iid(stats.len(), sigma_h2).unwrap();
        let ll = |f: Complex64| -> f64 {
            let h = map_h_given_f(&stats, &prior, f).unwrap();
            hybrid_loglik(&stats, &prior, &h, f).unwrap()
        };
        let ll_plus = ll(roots.plus);
        let ll_minus = ll(roots.minus);
        let ll_sel = ll(roots.selected);
        let tol = 1e-9 * (1.0 + ll_plus.abs().max(ll_minus.abs()));
        prop_assert!(
            ll_sel >= ll_plus.max(ll_minus) - tol,
            "selected {} scored {ll_sel}, branches {ll_plus} / {ll_minus}",
            roots.selected
        );
    }

    #[test]
    fn conditional_map_maximizes_over_the_channel(
        stats in arb_stats(),
        sigma_h2 in 0.2f64..4.0,
        f in (-2.0f64..2.0, -2.0f64..2.0),
        bump in prop::collection::vec((-0.1f64..0.1, -0.1f64..0.1), 8),
    ) {
        let f = c64(f.0, f.1);
        let prior = ChannelPrior::iid(stats.len(), sigma_h2).unwrap();
        let h_map = map_h_given_f(&stats, &prior, f).unwrap();
        let best = hybrid_loglik(&stats, &prior, &h_map, f).unwrap();
        let perturbed: Vec<Complex64> = h_map
            .iter()
            .zip(bump.iter().cycle())
            .map(|(h, &(re, im))| h + c64(re, im))
            .collect();
        let worse = hybrid_loglik(&stats, &prior, &perturbed, f).unwrap();
        prop_assert!(worse <= best + 1e-9 * (1.0 + best.abs()));
    }

    #[test]
    fn consistent_estimator_inverts_population_moments(
        f in (-2.0f64..2.0, -2.0f64..2.0),
        sigma_h2 in 0.2f64..4.0,
        s1 in 4.0f64..128.0,
        s2 in 4.0f64..128.0,
        nv in 1e-3f64..2.0,
    ) {
        let f = c64(f.0, f.1);
        prop_assume!(f.norm() > 0.05);
        let alpha = s2 / s1;
        let m = loadswitch::stats::CrossMoments {
            p11: sigma_h2 + nv / s1,
            p22: f.norm_sqr() * sigma_h2 + nv / s2,
            p12: f * sigma_h2,
            p21: (f * sigma_h2).conj(),
        };
        let c = shrinkage_c(s1, sigma_h2, nv);
        let d = correction_d(s1, sigma_h2, nv);
        let got = consistent_f(&m, c, alpha, d).unwrap();
        prop_assert!(
            (got - f).norm() <= 1e-9 * f.norm(),
            "got {got}, want {f}"
        );
    }

    #[test]
    fn single_packet_estimate_tops_its_own_candidates(
        v1 in (-3.0f64..3.0, -3.0f64..3.0),
        v2 in (-3.0f64..3.0, -3.0f64..3.0),
        sigma_h2 in 0.2f64..4.0,
        nv in 1e-3f64..2.0,
    ) {
        let v1 = c64(v1.0, v1.1);
        let v2 = c64(v2.0, v2.1);
        prop_assume!(v1.norm() > 1e-3);
        let stats = SufficientStats::new(vec![v1], vec![v2], 32.0, 32.0, nv).unwrap();
        let est = estimate_single_packet(&stats, sigma_h2).unwrap();
        let prior = ChannelPrior::iid(1, sigma_h2).unwrap();
        for &cand in &est.candidates {
            let h = map_h_given_f(&stats, &prior, cand).unwrap();
            let ll = hybrid_loglik(&stats, &prior, &h, cand).unwrap();
            prop_assert!(
                est.loglik >= ll - 1e-9 * (1.0 + est.loglik.abs()),
                "candidate {cand} scored {ll}, estimate {} scored {}",
                est.f_hat,
                est.loglik
            );
        }
    }

    #[test]
    fn shrinkage_and_correction_stay_in_range(
        s1 in 1e-3f64..1e6,
        sigma_h2 in 1e-3f64..1e6,
        nv in 0.0f64..1e6,
    ) {
        let c = shrinkage_c(s1, sigma_h2, nv);
        prop_assert!(c > 0.0 && c <= 1.0);
        prop_assert!(correction_d(s1, sigma_h2, nv) <= 1.0);
        prop_assert_eq!(shrinkage_c(s1, sigma_h2, 0.0), 1.0);
        prop_assert_eq!(correction_d(s1, sigma_h2, 0.0), 1.0);
    }

    #[test]
    fn channel_bound_grows_with_noise(
        l in 1usize..6,
        sigma_h2 in 0.2f64..4.0,
        nv_lo in 1e-3f64..1.0,
        bump in 1e-3f64..4.0,
        f in (-2.0f64..2.0, -2.0f64..2.0),
    ) {
        let f = c64(f.0, f.1);
        prop_assume!(f.norm() > 0.05);
        let prior = ChannelPrior::iid(l, sigma_h2).unwrap();
        let lo = hcrb_relative_h(&prior, f, 32.0, 32.0, nv_lo).unwrap();
        let hi = hcrb_relative_h(&prior, f, 32.0, 32.0, nv_lo + bump).unwrap();
        prop_assert!(lo > 0.0 && hi < 1.0);
        prop_assert!(lo <= hi + 1e-15);
    }

    #[test]
    fn stats_csv_round_trips_bit_for_bit(stats in arb_stats()) {
        let mut buf = Vec::new();
        write_stats_csv(&stats, &mut buf).unwrap();
        let back = read_stats_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back.len(), stats.len());
        for i in 0..stats.len() {
            prop_assert_eq!(back.v1[i].re.to_bits(), stats.v1[i].re.to_bits());
            prop_assert_eq!(back.v1[i].im.to_bits(), stats.v1[i].im.to_bits());
            prop_assert_eq!(back.v2[i].re.to_bits(), stats.v2[i].re.to_bits());
            prop_assert_eq!(back.v2[i].im.to_bits(), stats.v2[i].im.to_bits());
        }
        prop_assert_eq!(back.s1.to_bits(), stats.s1.to_bits());
        prop_assert_eq!(back.s2.to_bits(), stats.s2.to_bits());
        prop_assert_eq!(back.noise_var.to_bits(), stats.noise_var.to_bits());
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
