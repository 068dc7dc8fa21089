// SPDX-License-Identifier: Apache-2.0

use proptest::prelude::*;
use rvb_core::analysis::{self, CalibrationMap};
use rvb_core::dynamics::{self, evolve, PHASE_PER_MHZ_NS};
use rvb_core::hamiltonians::{self, ExchangeConfig};
use rvb_core::measurement::{measure_pair_probabilities, ReadoutDirection};
use rvb_core::spin::{self, BasisLabel};

fn damped(t: &[f64], a: f64, f: f64, phi: f64, t_phi: f64, a0: f64) -> Vec<f64> {
    t.iter()
        .map(|&x| a * (PHASE_PER_MHZ_NS * f * x + phi).cos() * (-(x / t_phi).powi(2)).exp() + a0)
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn fit_recovers_noiseless_parameters(
        a in 0.1f64..0.5, f in 10.0f64..60.0, phi in -3.0f64..3.0,
        t_phi in 80.0f64..400.0, a0 in 0.2f64..0.8,
    ) {
        let t: Vec<f64> = (0..200).map(|k| 1.0 * k as f64).collect();
        let r = analysis::fit_damped_cosine(&t, &damped(&t, a, f, phi, t_phi, a0)).unwrap();
        prop_assert!((r.f - f).abs() < 1e-6 * f);
        prop_assert!((r.t_phi - t_phi).abs() < 1e-5 * t_phi);
        prop_assert!((r.a - a).abs() < 1e-6);
    }

    #[test]
    fn fit_is_scale_and_offset_equivariant(
        f in 15.0f64..50.0, scale in 0.2f64..3.0, shift in -1.0f64..1.0,
    ) {
        let t: Vec<f64> = (0..150).map(|k| 2.0 * k as f64).collect();
        let p = damped(&t, 0.3, f, 0.7, 150.0, 0.5);
        let q: Vec<f64> = p.iter().map(|x| scale * x + shift).collect();
        let a = analysis::fit_damped_cosine(&t, &p).unwrap();
        let b = analysis::fit_damped_cosine(&t, &q).unwrap();
        prop_assert!((b.f - a.f).abs() < 1e-6 * a.f);
        prop_assert!((b.a - scale * a.a).abs() < 1e-6 * scale);
        prop_assert!((b.a0 - (scale * a.a0 + shift)).abs() < 1e-6 * scale.max(1.0));
    }

    #[test]
    fn frequency_minimum_follows_a_shift(x0 in -4.0f64..4.0, shift in -5.0f64..5.0, c in 0.05f64..1.0) {
        let pts = |s: f64| -> Vec<(f64, f64, f64)> {
            (-10..=10).map(|k| {
                let x = k as f64 + s;
                (x, 20.0 + c * (x - x0 - s).powi(2), 0.1)
            }).collect()
        };
        let a = analysis::find_frequency_minimum_values(&pts(0.0)).unwrap();
        let b = analysis::find_frequency_minimum_values(&pts(shift)).unwrap();
        prop_assert!((a.dv_star - x0).abs() < 1e-9);
        prop_assert!((b.dv_star - a.dv_star - shift).abs() < 1e-9);
    }

    #[test]
    fn ellipse_center_follows_a_translation(cx in -4.0f64..4.0, cy in -4.0f64..4.0) {
        let axis: Vec<f64> = (-20..=20).map(|k| k as f64).collect();
        let map = CalibrationMap::from_fn(axis.clone(), axis, |x, y| {
            let (u, v) = (x - cx, y - cy);
            (0.3 * (u * u / 40.0 + v * v / 90.0).sqrt()).cos().powi(2)
        }).unwrap();
        let e = analysis::find_ellipse_center(&map).unwrap();
        prop_assert!((e.x - cx).abs() < 0.25 && (e.y - cy).abs() < 0.25);
    }

    #[test]
    fn evolution_conserves_norm_and_readout_sums(
        j12 in 0.0f64..100.0, j34 in 0.0f64..100.0, j23 in 0.0f64..100.0, j14 in 0.0f64..100.0,
        t in 0.0f64..2000.0,
    ) {
        let j = ExchangeConfig::new(j12, j34, j23, j14).unwrap();
        let h = hamiltonians::build_hj_full(&j).unwrap();
        let psi = evolve(&spin::singlet_x().to_full(), &h, t).unwrap();
        prop_assert!((psi.norm() - 1.0).abs() < 1e-12);
        prop_assert!(psi.leakage(BasisLabel::GlobalSinglet2) < 1e-12);
        for dir in [ReadoutDirection::Horizontal, ReadoutDirection::Vertical] {
            let p = measure_pair_probabilities(&psi, dir).unwrap();
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(p.iter().all(|&x| x >= -1e-15));
        }
    }

    #[test]
    fn singlet_frequency_is_symmetric_and_bounded(jx in 1.0f64..150.0, jy in 1.0f64..150.0) {
        let f = dynamics::f_ss(jx, jy).unwrap();
        prop_assert!((f - dynamics::f_ss(jy, jx).unwrap()).abs() < 1e-12 * f);
        prop_assert!(f >= 0.5 * 3f64.sqrt() * jx.max(jy) - 1e-9);
        prop_assert!(f <= jx.max(jy) + 1e-9);
        let (vx, vy) = dynamics::visibilities(jx, jy).unwrap();
        prop_assert!((0.0..=1.0).contains(&vx) && (0.0..=1.0).contains(&vy));
    }

    #[test]
    fn exact_triplet_frequency_matches_second_order(
        jx in 20.0f64..120.0, jy in 20.0f64..120.0, rx in -0.02f64..0.02, ry in -0.02f64..0.02,
    ) {
        prop_assume!((jx - jy).abs() > 10.0);
        let j = ExchangeConfig::from_sums(jx, jy, rx * jx, ry * jy).unwrap();
        let exact = dynamics::f_st_exact(&j).unwrap();
        let approx = dynamics::f_st_second_order(&j);
        prop_assert!((exact - approx).abs() < 1e-3 * exact);
    }
}
