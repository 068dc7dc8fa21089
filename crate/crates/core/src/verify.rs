// SPDX-License-Identifier: Apache-2.0

//! Acceptance criteria and module invariant checks, shared by the `verify`
//! command and the acceptance test target.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::analysis;
use crate::config::{linear_grid, Config};
use crate::control::{
    propagate_calibration_error, CalibrationUncertainty, ExchangeVoltageModel,
    SymmetricSweepModel, DEFAULT_KAPPA,
};
use crate::dynamics::{
    self, evolve, hamiltonian_for, run_sequence_observe, NoiseModel, Propagator, PulseSequence,
};
use crate::error::Result;
use crate::experiments::{
    self, adiabatic_sequence, half_range, j23_pulse_sequence, mean, observe_readouts,
    set_and_dwell,
};
use crate::hamiltonians::{self, ExchangeConfig, ZeemanConfig};
use crate::measurement::{measure_pair_probabilities, sample_shots, ReadoutConfig, ReadoutDirection};
use crate::spin::{self, BasisLabel, SpinState};

/// Outcome of one check.
#[derive(Clone, Debug, Serialize)]
pub struct CheckReport {
    pub id: String,
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl CheckReport {
    pub fn line(&self) -> String {
        format!(
            "{} {:<10} {} ({:.2} s): {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.seconds,
            self.detail
        )
    }
}

fn timed(id: &str, name: &str, f: impl FnOnce() -> Result<(bool, String)>) -> CheckReport {
    let start = Instant::now();
    let (passed, detail) = match f() {
        Ok(r) => r,
        Err(e) => (false, format!("error: {e}")),
    };
    CheckReport {
        id: id.to_string(),
        name: name.to_string(),
        passed,
        detail,
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Fitted singlet-singlet frequency against `√(Jx² + Jy² − JxJy)`.
pub fn criterion_1(seed: u64) -> CheckReport {
    timed("C1", "RVB frequency law", || {
        let mut r = rng(seed, 1);
        let pairs: Vec<(f64, f64)> = (0..100)
            .map(|_| (r.random_range(5.0..120.0), r.random_range(5.0..120.0)))
            .collect();
        let t = linear_grid(0.0, 1000.0, 1.0)?;
        let errors: Vec<f64> = pairs
            .par_iter()
            .map(|&(jx, jy)| -> Result<f64> {
                let seq = set_and_dwell(spin::singlet_x().to_full(), ExchangeConfig::balanced(jx, jy)?, &t);
                let p: Vec<f64> = observe_readouts(&seq, None)?.iter().map(|r| r[0][0]).collect();
                let fit = analysis::fit_damped_cosine(&t, &p)?;
                Ok((fit.f / dynamics::f_ss(jx, jy)? - 1.0).abs())
            })
            .collect::<Result<_>>()?;
        let worst = errors.iter().cloned().fold(0.0, f64::max);
        Ok((worst <= 5e-3, format!("max relative error {worst:.2e} over 100 pairs (limit 5e-3)")))
    })
}

/// Peak-to-peak amplitudes against the closed-form visibilities.
pub fn criterion_2(seed: u64) -> CheckReport {
    timed("C2", "Visibility law", || {
        let mut r = rng(seed, 2);
        let mut cases: Vec<(f64, f64)> = (0..50)
            .map(|_| (r.random_range(5.0..120.0), r.random_range(5.0..120.0)))
            .collect();
        let equal = [10.0, 25.0, 50.0, 100.0];
        cases.extend(equal.iter().map(|&j| (j, j)));
        let mut worst = 0.0f64;
        let mut anti = true;
        for &(jx, jy) in &cases {
            let half = 0.5e3 / dynamics::f_ss(jx, jy)?;
            let seq = set_and_dwell(spin::singlet_x(), ExchangeConfig::balanced(jx, jy)?, &[0.0, half]);
            let p = observe_readouts(&seq, None)?;
            let dh = p[0][0][0] - p[1][0][0];
            let dv = p[0][1][0] - p[1][1][0];
            let (vx, vy) = dynamics::visibilities(jx, jy)?;
            worst = worst.max((dh.abs() - vx).abs()).max((dv.abs() - vy).abs());
            anti &= dh * dv < 0.0;
        }
        let mut equal_ok = true;
        for &j in &equal {
            let (vx, vy) = dynamics::visibilities(j, j)?;
            equal_ok &= vx == 0.75 && vy == 0.75;
        }
        Ok((
            worst <= 1e-6 && anti && equal_ok,
            format!("max |ptp - V| {worst:.2e}, anti-phase {anti}, V = 3/4 at Jx = Jy {equal_ok}"),
        ))
    })
}

/// Fourth-order convergence of the perturbative S/T⁻ frequency.
pub fn criterion_3(seed: u64) -> CheckReport {
    timed("C3", "Perturbative frequency", || {
        let mut r = rng(seed, 3);
        let mut ratios = Vec::new();
        let mut tries = 0;
        while ratios.len() < 20 {
            tries += 1;
            if tries > 10_000 {
                return Ok((false, "could not draw 20 admissible configurations".into()));
            }
            let j0x = r.random_range(10.0..120.0);
            let j0y = r.random_range(10.0..120.0);
            let mut draw = || {
                let a = r.random_range(0.06..0.12) / DEFAULT_KAPPA;
                if r.random::<bool>() {
                    a
                } else {
                    -a
                }
            };
            let (dvx, dvy) = (draw(), draw());
            let model = ExchangeVoltageModel::new(j0x, j0y, DEFAULT_KAPPA)?;
            let j = model.exchange_from_voltages(dvx, dvy)?;
            if dynamics::f_st_perturbative(&j).is_err() {
                continue;
            }
            let mut errors = Vec::new();
            for k in 0..5 {
                let s = 0.5f64.powi(k);
                let h = ExchangeConfig::from_sums(j.jx(), j.jy(), s * j.delta_x(), s * j.delta_y())?;
                errors.push((dynamics::f_st_perturbative(&h)? - dynamics::f_st_exact(&h)?).abs());
            }
            ratios.push((errors[0] / errors[1], errors[3] / errors[4]));
        }
        // δ⁶ terms still matter at the first halving when δ is not small
        // against Jx, Jy; the order is read from the last halving.
        let first = ratios
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(a, b), &(x, _)| (a.min(x), b.max(x)));
        let (lo, hi) = ratios
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(a, b), &(_, x)| (a.min(x), b.max(x)));
        let order_ok = lo >= 15.5 && hi <= 16.5;
        let mut zero_ok = true;
        for &(jx, jy) in &[(30.0, 70.0), (80.0, 20.0), (45.0, 100.0)] {
            let j = ExchangeConfig::balanced(jx, jy)?;
            zero_ok &= dynamics::f_st_perturbative(&j)? == jy / 2.0;
            zero_ok &= (dynamics::f_st_exact(&j)? - jy / 2.0).abs() <= 1e-12 * jy;
        }
        Ok((
            order_ok && zero_ok,
            format!(
                "error ratio per halving: first in [{:.2}, {:.2}], fourth in [{lo:.2}, {hi:.2}] (16 +- 0.5 required); delta = 0 gives Jy/2: {zero_ok}",
                first.0, first.1
            ),
        ))
    })
}

/// Degenerate-case closed form against three-level evolution, and the beat
/// frequency from the spectrum of a long trace.
pub fn criterion_4(seed: u64) -> CheckReport {
    timed("C4", "Degenerate formula", || {
        let mut r = rng(seed, 4);
        let init = SpinState::basis_state(BasisLabel::TripletMinus3, 0)?;
        let mut worst = 0.0f64;
        for _ in 0..200 {
            let j = r.random_range(10.0..100.0);
            let dx = r.random_range(-0.2..0.2) * j;
            let dy = r.random_range(-0.2..0.2) * j;
            let t = r.random_range(0.0..2000.0);
            let cfg = ExchangeConfig::from_sums(j, j, dx, dy)?;
            let h = hamiltonian_for(BasisLabel::TripletMinus3, &cfg, None)?;
            let p = evolve(&init, &h, t)?.overlap_probability(&init);
            worst = worst.max((p - dynamics::p_st_degenerate(j, dx, dy, t)).abs());
        }
        let (j, dx, dy) = (50.0, 2.0, 1.5);
        let t = linear_grid(0.0, 200_000.0, 5.0)?;
        let h = hamiltonian_for(BasisLabel::TripletMinus3, &ExchangeConfig::from_sums(j, j, dx, dy)?, None)?;
        let prop = Propagator::new(&h)?;
        let c = prop.decompose(init.amplitudes());
        let psi0 = init.amplitudes();
        let p: Vec<f64> = t
            .par_iter()
            .map(|&tk| psi0.dotc(&prop.recompose(&c, tk)).norm_sqr())
            .collect();
        let peaks = analysis::spectral_peaks(&t, &p, 8)?;
        let mut near: Vec<f64> = peaks
            .iter()
            .filter(|pk| (pk.f - j / 2.0).abs() < 1.0)
            .map(|pk| pk.f)
            .take(2)
            .collect();
        near.sort_by(f64::total_cmp);
        let beat = if near.len() == 2 {
            0.5 * (near[1] - near[0])
        } else {
            f64::NAN
        };
        let expected = (dx * dx + dy * dy) / (4.0 * j);
        let rel = (beat / expected - 1.0).abs();
        Ok((
            worst <= 1e-8 && rel <= 0.01,
            format!("max |P - P_exact| {worst:.2e}; beat {beat:.5} MHz vs {expected:.5} MHz ({:.2}%)", 100.0 * rel),
        ))
    })
}

/// Residual oscillation half-amplitude after an adiabatic ramp.
pub fn ramp_residual(j_ij: f64, t_ramp: f64) -> Result<f64> {
    let t = linear_grid(0.0, 200.0, 1.0)?;
    let seq = adiabatic_sequence(ExchangeConfig::new(j_ij, j_ij, j_ij, j_ij)?, 0.0, t_ramp, &t);
    let p: Vec<f64> = observe_readouts(&seq, None)?.iter().map(|r| r[0][0]).collect();
    Ok(half_range(&p))
}

/// s-wave preparation by an adiabatic ramp.
pub fn criterion_5(_seed: u64) -> CheckReport {
    timed("C5", "s-wave preparation", || {
        let j_ij = 25.0;
        let jx = 2.0 * j_ij;
        let t_ramp = 200.0 / jx * 1e3;
        let t = linear_grid(0.0, 200.0, 1.0)?;
        let target = ExchangeConfig::new(j_ij, j_ij, j_ij, j_ij)?;
        let seq = adiabatic_sequence(target, 0.0, t_ramp, &t);
        let rows = run_sequence_observe(&seq, None, |s| s.clone())?;
        let fidelity = rows[0][0].overlap_probability(&spin::s_wave());
        let p = observe_readouts(&seq, None)?;
        let ph = mean(&p.iter().map(|r| r[0][0]).collect::<Vec<_>>());
        let pv = mean(&p.iter().map(|r| r[1][0]).collect::<Vec<_>>());
        // The residual interferes between the two ends of the ramp with the
        // gap period 1/f_SS, so the trend is read from one maximum per period.
        let period = 1e3 / dynamics::f_ss(jx, jx)?;
        let ramps = linear_grid(140.0, 600.0, period / 5.0)?;
        let amps: Vec<f64> = ramps
            .par_iter()
            .map(|&tr| ramp_residual(j_ij, tr))
            .collect::<Result<_>>()?;
        let envelope: Vec<f64> = amps
            .chunks(5)
            .filter(|c| c.len() == 5)
            .map(|c| c.iter().cloned().fold(0.0, f64::max))
            .collect();
        let monotone = envelope.windows(2).all(|w| w[1] < w[0]);
        let below = amps.iter().all(|&a| a < 0.01);
        let ok = fidelity >= 0.999
            && (ph - 0.75).abs() <= 5e-3
            && (pv - 0.75).abs() <= 5e-3
            && monotone
            && below;
        Ok((
            ok,
            format!(
                "t_ramp {t_ramp:.0} ns: |<s|psi>|^2 = {fidelity:.6}, P_SS = {ph:.4} / {pv:.4}; residual per {period:.0} ns window from 140 ns: {} (monotone {monotone}, all < 0.01 {below})",
                envelope.iter().map(|a| format!("{a:.1e}")).collect::<Vec<_>>().join(" ")
            ),
        ))
    })
}

/// d-wave preparation by a half-swap `J23` pulse.
pub fn criterion_6(_seed: u64) -> CheckReport {
    timed("C6", "d-wave preparation", || {
        let t = linear_grid(0.0, 200.0, 1.0)?;
        let seq = j23_pulse_sequence(20.0, 25.0, ExchangeConfig::new(25.0, 25.0, 25.0, 25.0)?, &t);
        let p = observe_readouts(&seq, None)?;
        let h: Vec<f64> = p.iter().map(|r| r[0][0]).collect();
        let v: Vec<f64> = p.iter().map(|r| r[1][0]).collect();
        let (vh, vv) = (2.0 * half_range(&h), 2.0 * half_range(&v));
        let (mh, mv) = (mean(&h), mean(&v));
        let ok = vh < 1e-3 && vv < 1e-3 && (mh - 0.25).abs() <= 5e-3 && (mv - 0.25).abs() <= 5e-3;
        Ok((
            ok,
            format!("visibility {vh:.2e} / {vv:.2e}, mean P_SS {mh:.4} / {mv:.4}"),
        ))
    })
}

fn max_leakage(z: ZeemanConfig) -> Result<f64> {
    let t = linear_grid(0.0, 2000.0, 20.0)?;
    let mut seq = set_and_dwell(spin::singlet_x().to_full(), ExchangeConfig::balanced(50.0, 30.0)?, &t);
    seq.zeeman = Some(z);
    let rows = run_sequence_observe(&seq, None, |s| s.leakage(BasisLabel::GlobalSinglet2))?;
    Ok(rows[0].iter().cloned().fold(0.0, f64::max))
}

/// Zeeman sector elements and singlet leakage.
pub fn criterion_7(_seed: u64) -> CheckReport {
    timed("C7", "Zeeman elements", || {
        let z = ZeemanConfig::default();
        let hz = hamiltonians::build_hz_full(&z);
        let elements = hamiltonians::zeeman_sector_elements(&z);
        let mut worst = 0.0f64;
        let mut largest = 0.0f64;
        for e in &elements {
            let proj = e.bra.ket().dot(&(&hz * e.ket.ket()));
            worst = worst.max((proj - e.value).abs());
            largest = largest.max(e.value.abs());
        }
        let leak_default = max_leakage(z)?;
        let leak_equal = max_leakage(ZeemanConfig {
            g: [0.2; 4],
            ..z
        })?;
        let ok = elements.len() == 15 && worst <= 1e-12 && largest < 4.0 && leak_default > 1e-6 && leak_equal < 1e-12;
        Ok((
            ok,
            format!(
                "{} elements, max |closed - projected| {worst:.2e}, max |element| {largest:.3} MHz, leakage {leak_default:.2e} (default g) / {leak_equal:.2e} (equal g)",
                elements.len()
            ),
        ))
    })
}

/// Symmetric sweep range with the calibrated `J0`.
pub fn criterion_8(seed: u64) -> CheckReport {
    timed("C8", "Exchange-range reproduction", || {
        let (report, _) = experiments::cmd_calibrate(&Config::default(), seed)?;
        let model = SymmetricSweepModel {
            j0x: report.j0x_estimate_mhz,
            j0y: report.j0y_estimate_mhz,
            ..SymmetricSweepModel::default()
        };
        let v = linear_grid(-20.0, 26.0, 1.0)?;
        let jx: Vec<f64> = v
            .iter()
            .map(|&x| model.exchange_at(x).map(|j| j.jx()))
            .collect::<Result<_>>()?;
        let monotone = jx.windows(2).all(|w| w[1] < w[0]) || jx.windows(2).all(|w| w[1] > w[0]);
        let lo = jx.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = jx.iter().cloned().fold(0.0, f64::max);
        let ok = monotone && (lo / 15.0 - 1.0).abs() <= 0.15 && (hi / 108.0 - 1.0).abs() <= 0.15;
        Ok((
            ok,
            format!(
                "calibrated J0x {:.2} MHz; Jx spans [{lo:.1}, {hi:.1}] MHz vs target [15, 108] (+-15%), monotone {monotone}",
                report.j0x_estimate_mhz
            ),
        ))
    })
}

/// Fit recovery under 500-shot readout noise.
pub fn criterion_9(seed: u64) -> CheckReport {
    timed("C9", "Fit recovery under shot noise", || {
        let t: Vec<f64> = (0..50).map(|k| 5.0 * k as f64).collect();
        let seq = set_and_dwell(spin::singlet_x(), ExchangeConfig::new(25.0, 25.0, 25.0, 25.0)?, &t);
        let noise = NoiseModel::from_t_phi(130.0, 4000, seed)?;
        let ideal = observe_readouts(&seq, Some(&noise))?;
        let trials = 200;
        let ok: Vec<bool> = (0..trials as u64)
            .into_par_iter()
            .map(|trial| -> Result<bool> {
                let p: Vec<f64> = ideal
                    .iter()
                    .enumerate()
                    .map(|(k, pr)| {
                        let cfg = ReadoutConfig {
                            direction: ReadoutDirection::Horizontal,
                            n_shots: 500,
                            seed: seed ^ (trial << 32) ^ k as u64,
                            ..ReadoutConfig::default()
                        };
                        Ok(sample_shots(&pr[0], &cfg)?.probabilities()[0])
                    })
                    .collect::<Result<_>>()?;
                Ok(match analysis::fit_damped_cosine(&t, &p) {
                    Ok(fit) => (fit.f / 50.0 - 1.0).abs() <= 0.02 && (fit.t_phi / 130.0 - 1.0).abs() <= 0.10,
                    Err(_) => false,
                })
            })
            .collect::<Result<_>>()?;
        let good = ok.iter().filter(|&&b| b).count();
        Ok((
            good * 100 >= 95 * trials,
            format!("{good}/{trials} trials within 2% (f) and 10% (T_phi)"),
        ))
    })
}

fn random_state(r: &mut ChaCha8Rng, basis: BasisLabel) -> Result<SpinState> {
    let v = DVector::from_fn(basis.dim(), |_, _| {
        Complex64::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0))
    });
    SpinState::normalized(basis, v)
}

fn random_exchange(r: &mut ChaCha8Rng) -> Result<ExchangeConfig> {
    ExchangeConfig::new(
        r.random_range(0.0..100.0),
        r.random_range(0.0..100.0),
        r.random_range(0.0..100.0),
        r.random_range(0.0..100.0),
    )
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |a, x| a.max(x.abs()))
}

/// Brute-force `max(2 f_ST − Jy)` over the `±ΔV` square, with `Jy` the
/// local vertical sum.
pub fn brute_force_jy_error(model: &ExchangeVoltageModel, dv: f64) -> Result<f64> {
    let grid = linear_grid(-dv, dv, dv / 10.0)?;
    let mut worst = 0.0f64;
    for &x in &grid {
        for &y in &grid {
            let j = model.exchange_from_voltages(x, y)?;
            worst = worst.max(2.0 * dynamics::f_st_exact(&j)? - j.jy());
        }
    }
    Ok(worst)
}

/// Conservation laws, subspace consistency and calibration-error oracle.
pub fn criterion_10(seed: u64) -> CheckReport {
    timed("C10", "Conservation and oracle suite", || {
        let mut r = rng(seed, 10);
        let mut drift = 0.0f64;
        let mut comm = 0.0f64;
        let mut agree = 0.0f64;
        let (s2, sz) = spin::total_spin_operators();
        for _ in 0..30 {
            let j = random_exchange(&mut r)?;
            let h = hamiltonians::build_hj_full(&j)?;
            comm = comm.max(max_abs(&(&h * &s2 - &s2 * &h))).max(max_abs(&(&h * &sz - &sz * &h)));
            let t = r.random_range(0.0..1000.0);
            let psi = random_state(&mut r, BasisLabel::Full16)?;
            drift = drift.max((evolve(&psi, &h, t)?.norm() - 1.0).abs());
            for basis in [BasisLabel::GlobalSinglet2, BasisLabel::GlobalSinglet2Y, BasisLabel::TripletMinus3] {
                let sub = random_state(&mut r, basis)?;
                let hs = hamiltonian_for(basis, &j, None)?;
                let a = evolve(&sub, &hs, t)?;
                drift = drift.max((a.norm() - 1.0).abs());
                let b = evolve(&sub.to_full(), &h, t)?;
                agree = agree.max((a.to_full().amplitudes() - b.amplitudes()).norm());
            }
        }
        let mut oracle = 0.0f64;
        for &(jx, jy) in &[(30.0, 60.0), (60.0, 30.0), (40.0, 90.0), (90.0, 45.0)] {
            let model = ExchangeVoltageModel::new(jx, jy, DEFAULT_KAPPA)?;
            let dv = 0.12 / DEFAULT_KAPPA;
            let (_, s20) = propagate_calibration_error(&model, &CalibrationUncertainty::symmetric(dv))?;
            let brute = brute_force_jy_error(&model, dv)?;
            oracle = oracle.max((s20 / brute - 1.0).abs());
        }
        let (sjx, sjy) = propagate_calibration_error(
            &ExchangeVoltageModel::new(50.0, 50.0, DEFAULT_KAPPA)?,
            &CalibrationUncertainty::symmetric(2.0),
        )?;
        let ok = drift <= 1e-12
            && comm <= 1e-12
            && agree <= 1e-10
            && oracle <= 0.2
            && (2.0..=3.0).contains(&sjy)
            && (2.0..=3.0).contains(&sjx);
        Ok((
            ok,
            format!(
                "norm drift {drift:.1e}, commutators {comm:.1e}, full vs subspace {agree:.1e}, S20 vs brute force {:.1}%, sigma_J at 2 mV = {sjx:.2} / {sjy:.2} MHz",
                100.0 * oracle
            ),
        ))
    })
}

/// Largest deviation of a singlet-subspace builder from the projection of
/// the full exchange Hamiltonian, over random couplings.
pub fn singlet_congruence_with<F>(build: F, seed: u64) -> Result<f64>
where
    F: Fn(f64, f64) -> Result<DMatrix<f64>>,
{
    let mut r = rng(seed, 100);
    let p = spin::subspace_projector(BasisLabel::GlobalSinglet2);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let j = random_exchange(&mut r)?;
        let proj = &p * hamiltonians::build_hj_full(&j)? * p.transpose();
        worst = worst.max(max_abs(&(proj - build(j.jx(), j.jy())?)));
    }
    Ok(worst)
}

/// Module-level invariants beyond the numbered criteria.
pub fn invariant_suite(seed: u64) -> Vec<CheckReport> {
    vec![
        timed("I1", "singlet Hamiltonian congruence", || {
            let d = singlet_congruence_with(hamiltonians::build_hs, seed)?;
            Ok((d <= 1e-12, format!("max deviation {d:.1e}")))
        }),
        timed("I2", "triplet Hamiltonian congruence", || {
            let mut r = rng(seed, 101);
            let p = spin::subspace_projector(BasisLabel::TripletMinus3);
            let mut worst = 0.0f64;
            for _ in 0..20 {
                let j = random_exchange(&mut r)?;
                let proj = &p * hamiltonians::build_hj_full(&j)? * p.transpose();
                worst = worst.max(max_abs(&(proj - hamiltonians::build_ht_projected(&j)?)));
            }
            Ok((worst <= 1e-12, format!("max deviation {worst:.1e}")))
        }),
        timed("I3", "compensated sweep keeps Jy flat", || {
            let m = SymmetricSweepModel::default();
            let jy0 = m.exchange_at(0.0)?.jy();
            let mut worst = 0.0f64;
            for v in linear_grid(-20.0, 26.0, 1.0)? {
                worst = worst.max((m.exchange_at(v)?.jy() / jy0 - 1.0).abs());
            }
            Ok((worst <= 1e-12, format!("max relative Jy change {worst:.1e}")))
        }),
        timed("I4", "readout probabilities normalized", || {
            let mut r = rng(seed, 102);
            let mut worst = 0.0f64;
            for _ in 0..20 {
                let s = random_state(&mut r, BasisLabel::Full16)?;
                for dir in [ReadoutDirection::Horizontal, ReadoutDirection::Vertical] {
                    let p = measure_pair_probabilities(&s, dir)?;
                    worst = worst.max((p.iter().sum::<f64>() - 1.0).abs());
                }
            }
            Ok((worst <= 1e-12, format!("max |sum - 1| {worst:.1e}")))
        }),
        timed("I5", "closed-form singlet oscillation", || {
            let mut r = rng(seed, 103);
            let mut worst = 0.0f64;
            for _ in 0..20 {
                let (jx, jy) = (r.random_range(1.0..100.0), r.random_range(1.0..100.0));
                let t = r.random_range(0.0..500.0);
                let seq: PulseSequence = set_and_dwell(spin::singlet_x(), ExchangeConfig::balanced(jx, jy)?, &[t]);
                let p = observe_readouts(&seq, None)?;
                let (px, py) = dynamics::singlet_oscillation(jx, jy, t)?;
                worst = worst.max((p[0][0][0] - px).abs()).max((p[0][1][0] - py).abs());
            }
            Ok((worst <= 1e-10, format!("max deviation {worst:.1e}")))
        }),
        timed("I6", "fit scale equivariance", || {
            let t: Vec<f64> = (0..120).map(|k| 3.0 * k as f64).collect();
            let p: Vec<f64> = t
                .iter()
                .map(|&x| 0.3 * (dynamics::PHASE_PER_MHZ_NS * 21.0 * x + 0.4).cos() * (-(x / 200.0f64).powi(2)).exp() + 0.5)
                .collect();
            let a = analysis::fit_damped_cosine(&t, &p)?;
            let q: Vec<f64> = p.iter().map(|x| 0.6 * x).collect();
            let b = analysis::fit_damped_cosine(&t, &q)?;
            let d = (b.a - 0.6 * a.a).abs().max((b.f - a.f).abs()).max((b.t_phi - a.t_phi).abs() / a.t_phi);
            Ok((d <= 1e-6, format!("max deviation {d:.1e}")))
        }),
    ]
}

pub type Criterion = fn(u64) -> CheckReport;

pub const CRITERIA: [Criterion; 10] = [
    criterion_1,
    criterion_2,
    criterion_3,
    criterion_4,
    criterion_5,
    criterion_6,
    criterion_7,
    criterion_8,
    criterion_9,
    criterion_10,
];

/// Invariants followed by the ten acceptance criteria.
pub fn run_all(seed: u64) -> Vec<CheckReport> {
    let mut out = invariant_suite(seed);
    out.extend(CRITERIA.iter().map(|c| c(seed)));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn congruence_detects_sign_error() {
        assert!(singlet_congruence_with(hamiltonians::build_hs, 0).unwrap() <= 1e-12);
        let mutated = |jx: f64, jy: f64| -> Result<DMatrix<f64>> {
            let mut h = hamiltonians::build_hs(jx, jy)?;
            h[(0, 1)] = -h[(0, 1)];
            h[(1, 0)] = -h[(1, 0)];
            Ok(h)
        };
        assert!(singlet_congruence_with(mutated, 0).unwrap() > 1e-3);
    }

    #[test]
    fn report_line_format() {
        let r = timed("X", "demo", || Ok((true, "fine".into())));
        assert!(r.line().starts_with("PASS X"));
        let r = timed("Y", "demo", || Err(crate::Error::Bracket));
        assert!(!r.passed && r.detail.contains("error"));
    }
}
