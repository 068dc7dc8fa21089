// SPDX-License-Identifier: Apache-2.0

//! Time evolution under piecewise-constant and ramped exchange, quasi-static
//! noise ensembles, and closed-form dynamical predictions.
//!
//! Phase convention: a level at `E` MHz accumulates `2π·E·t·10⁻³` rad over
//! `t` ns, so `U(t) = exp(−i·2π·10⁻³·H·t)`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonians::{self, ExchangeConfig, ZeemanConfig};
use crate::spin::{self, BasisLabel, SpinState};

/// Radians per (MHz · ns).
pub const PHASE_PER_MHZ_NS: f64 = 2.0 * PI * 1e-3;
/// Waiting time of the S→T⁻ rotation step, ns.
pub const DEFAULT_T_PI_NS: f64 = 300.0;
/// Convergence threshold on the ramp final state.
pub const RAMP_TOLERANCE: f64 = 1e-9;
pub const RAMP_MIN_STEPS: usize = 64;
pub const RAMP_MAX_STEPS: usize = 1 << 20;

/// Eigendecomposition of a real symmetric Hamiltonian, reused across times.
#[derive(Clone, Debug)]
pub struct Propagator {
    energies: DVector<f64>,
    vectors: DMatrix<Complex64>,
}

impl Propagator {
    pub fn new(h: &DMatrix<f64>) -> Result<Self> {
        if h.nrows() != h.ncols() {
            return Err(Error::DimensionMismatch {
                expected: h.nrows(),
                got: h.ncols(),
            });
        }
        let asym = (h - h.transpose()).abs().max();
        if asym > 1e-9 * h.abs().max().max(1.0) {
            return Err(Error::Domain(format!("Hamiltonian is not symmetric ({asym:e})")));
        }
        let eig = SymmetricEigen::new(h.clone());
        Ok(Self {
            energies: eig.eigenvalues,
            vectors: eig.eigenvectors.map(|x| Complex64::new(x, 0.0)),
        })
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn energies(&self) -> &DVector<f64> {
        &self.energies
    }

    /// Coordinates of `psi` in the eigenbasis.
    pub fn decompose(&self, psi: &DVector<Complex64>) -> DVector<Complex64> {
        self.vectors.adjoint() * psi
    }

    /// Evolves eigenbasis coordinates `c` for `t` ns and maps back.
    pub fn recompose(&self, c: &DVector<Complex64>, t: f64) -> DVector<Complex64> {
        let phased = DVector::from_iterator(
            c.len(),
            c.iter()
                .zip(self.energies.iter())
                .map(|(a, &e)| a * Complex64::from_polar(1.0, -PHASE_PER_MHZ_NS * e * t)),
        );
        &self.vectors * phased
    }

    pub fn apply(&self, psi: &DVector<Complex64>, t: f64) -> DVector<Complex64> {
        self.recompose(&self.decompose(psi), t)
    }

    pub fn unitary(&self, t: f64) -> DMatrix<Complex64> {
        let d = DVector::from_iterator(
            self.dim(),
            self.energies
                .iter()
                .map(|&e| Complex64::from_polar(1.0, -PHASE_PER_MHZ_NS * e * t)),
        );
        &self.vectors * DMatrix::from_diagonal(&d) * self.vectors.adjoint()
    }
}

/// `exp(−i·2π·10⁻³·H·t)|state⟩`.
pub fn evolve(state: &SpinState, h: &DMatrix<f64>, t: f64) -> Result<SpinState> {
    if h.nrows() != state.dim() {
        return Err(Error::DimensionMismatch {
            expected: state.dim(),
            got: h.nrows(),
        });
    }
    let p = Propagator::new(h)?;
    SpinState::with_tolerance(
        state.basis(),
        p.apply(state.amplitudes(), t),
        state.norm_tolerance(),
    )
}

/// Exchange Hamiltonian of `j` in `basis`. `H_Z` is added only in `Full16`.
pub fn hamiltonian_for(
    basis: BasisLabel,
    j: &ExchangeConfig,
    zeeman: Option<&ZeemanConfig>,
) -> Result<DMatrix<f64>> {
    match basis {
        BasisLabel::Full16 => {
            let mut h = hamiltonians::build_hj_full(j)?;
            if let Some(z) = zeeman {
                h += hamiltonians::build_hz_full(z);
            }
            Ok(h)
        }
        BasisLabel::GlobalSinglet2 => hamiltonians::build_hs(j.jx(), j.jy()),
        BasisLabel::GlobalSinglet2Y => {
            let m = spin::singlet_xy_rotation();
            Ok(&m * hamiltonians::build_hs(j.jx(), j.jy())? * m.transpose())
        }
        BasisLabel::TripletMinus3 => hamiltonians::build_ht_projected(j),
        BasisLabel::TripletMinusPlusQ4 => {
            let p = spin::subspace_projector(basis);
            Ok(&p * hamiltonians::build_hj_full(j)? * p.transpose())
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SegmentKind {
    /// Jump to `target`; if `duration_ns > 0` then hold there.
    SetDiabatic,
    /// Interpolate from the current setting to `target`.
    LinearRamp,
    /// Evolve under `target` and keep it.
    Hold,
    /// Evolve under `target`, then return to the previous setting.
    ExchangePulse,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseSegment {
    pub kind: SegmentKind,
    pub target: ExchangeConfig,
    pub duration_ns: f64,
}

impl PulseSegment {
    pub fn set(target: ExchangeConfig) -> Self {
        Self {
            kind: SegmentKind::SetDiabatic,
            target,
            duration_ns: 0.0,
        }
    }

    pub fn ramp(target: ExchangeConfig, duration_ns: f64) -> Self {
        Self {
            kind: SegmentKind::LinearRamp,
            target,
            duration_ns,
        }
    }

    pub fn hold(target: ExchangeConfig, duration_ns: f64) -> Self {
        Self {
            kind: SegmentKind::Hold,
            target,
            duration_ns,
        }
    }

    pub fn pulse(target: ExchangeConfig, duration_ns: f64) -> Self {
        Self {
            kind: SegmentKind::ExchangePulse,
            target,
            duration_ns,
        }
    }
}

/// How a ramp moves between two exchange settings.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum RampMode {
    /// Barrier voltages move linearly, so each coupling moves geometrically:
    /// `J(s) = J_a^(1−s)·J_b^s`. Couplings that change need positive endpoints.
    #[default]
    Voltage,
    /// Couplings move linearly.
    LinearJ,
}

/// Time profile `s(τ)` of a ramp, `τ ∈ [0, 1]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum RampProfile {
    /// Constant rate; the rate jumps at both ends.
    #[default]
    Linear,
    /// `(1 − cos πτ)/2`: zero rate at both ends.
    Cosine,
    /// `6τ⁵ − 15τ⁴ + 10τ³`: zero rate and zero acceleration at both ends.
    Smootherstep,
}

impl RampProfile {
    pub fn at(self, tau: f64) -> f64 {
        match self {
            RampProfile::Linear => tau,
            RampProfile::Cosine => 0.5 * (1.0 - (std::f64::consts::PI * tau).cos()),
            RampProfile::Smootherstep => tau * tau * tau * (tau * (6.0 * tau - 15.0) + 10.0),
        }
    }
}

fn interpolate(a: &ExchangeConfig, b: &ExchangeConfig, s: f64, mode: RampMode) -> Result<ExchangeConfig> {
    let f = |x: f64, y: f64| -> Result<f64> {
        match mode {
            RampMode::LinearJ => Ok(x + (y - x) * s),
            RampMode::Voltage => {
                if x == y {
                    Ok(x)
                } else if x > 0.0 && y > 0.0 {
                    Ok(x.powf(1.0 - s) * y.powf(s))
                } else {
                    Err(Error::Domain(
                        "voltage ramps need positive couplings at both ends".into(),
                    ))
                }
            }
        }
    };
    Ok(ExchangeConfig {
        j12: f(a.j12, b.j12)?,
        j34: f(a.j34, b.j34)?,
        j23: f(a.j23, b.j23)?,
        j14: f(a.j14, b.j14)?,
    })
}

/// A complete experiment: initial state, control segments and dwell grid.
/// The dwell evolution uses the setting left by the last segment.
#[derive(Clone, Debug)]
pub struct PulseSequence {
    pub init: SpinState,
    /// Setting in force when the initial state is prepared.
    pub start: ExchangeConfig,
    pub segments: Vec<PulseSegment>,
    pub dwell_ns: Vec<f64>,
    pub ramp_mode: RampMode,
    pub ramp_profile: RampProfile,
    pub zeeman: Option<ZeemanConfig>,
}

impl PulseSequence {
    pub fn new(init: SpinState, segments: Vec<PulseSegment>, dwell_ns: Vec<f64>) -> Self {
        Self {
            init,
            start: ExchangeConfig::zero(),
            segments,
            dwell_ns,
            ramp_mode: RampMode::Voltage,
            ramp_profile: RampProfile::Linear,
            zeeman: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.segments.is_empty() {
            return Err(Error::Domain("pulse sequence has no segments".into()));
        }
        for seg in &self.segments {
            if !(seg.duration_ns >= 0.0) {
                return Err(Error::Domain(format!(
                    "segment duration {} must be >= 0",
                    seg.duration_ns
                )));
            }
            seg.target.validate()?;
        }
        if self.dwell_ns.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(Error::Domain("dwell times must be >= 0".into()));
        }
        self.start.validate()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum NoiseMode {
    /// One draw per trajectory scales every coupling.
    #[default]
    CommonScale,
    /// Independent draws per coupling.
    PerBond,
}

/// Quasi-static Gaussian frequency noise.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Standard deviation of the dominant oscillation frequency, MHz.
    pub sigma_f: f64,
    pub n_samples: usize,
    pub seed: u64,
    pub mode: NoiseMode,
}

impl NoiseModel {
    pub fn new(sigma_f: f64, n_samples: usize, seed: u64) -> Result<Self> {
        let m = Self {
            sigma_f,
            n_samples,
            seed,
            mode: NoiseMode::CommonScale,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn from_t_phi(t_phi_ns: f64, n_samples: usize, seed: u64) -> Result<Self> {
        Self::new(sigma_f_for_t_phi(t_phi_ns)?, n_samples, seed)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_f >= 0.0 && self.sigma_f.is_finite()) {
            return Err(Error::Domain(format!("sigma_f = {} must be >= 0", self.sigma_f)));
        }
        if self.n_samples == 0 {
            return Err(Error::Domain("n_samples must be >= 1".into()));
        }
        Ok(())
    }

    /// Standard normal draws for sample `index`; stream-per-sample so the
    /// result does not depend on scheduling.
    pub fn normals(&self, index: u64, n: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }
}

/// States along the dwell grid for one noise realization.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times_ns: Vec<f64>,
    pub states: Vec<SpinState>,
}

type Scale<'a> = &'a (dyn Fn(&ExchangeConfig) -> ExchangeConfig + Sync);

struct Runner<'a> {
    seq: &'a PulseSequence,
    scale: Scale<'a>,
}

impl Runner<'_> {
    fn h(&self, j: &ExchangeConfig) -> Result<DMatrix<f64>> {
        hamiltonian_for(self.seq.init.basis(), &(self.scale)(j), self.seq.zeeman.as_ref())
    }

    fn step(&self, psi: &DVector<Complex64>, j: &ExchangeConfig, t: f64) -> Result<DVector<Complex64>> {
        if t == 0.0 {
            return Ok(psi.clone());
        }
        Ok(Propagator::new(&self.h(j)?)?.apply(psi, t))
    }

    fn ramp_once(
        &self,
        psi: &DVector<Complex64>,
        a: &ExchangeConfig,
        b: &ExchangeConfig,
        t: f64,
        n: usize,
    ) -> Result<DVector<Complex64>> {
        let dt = t / n as f64;
        let mut out = psi.clone();
        for k in 0..n {
            let s = self.seq.ramp_profile.at((k as f64 + 0.5) / n as f64);
            let j = interpolate(a, b, s, self.seq.ramp_mode)?;
            out = self.step(&out, &j, dt)?;
        }
        Ok(out)
    }

    fn ramp(
        &self,
        psi: &DVector<Complex64>,
        a: &ExchangeConfig,
        b: &ExchangeConfig,
        t: f64,
    ) -> Result<DVector<Complex64>> {
        if t == 0.0 || a == b {
            return self.step(psi, b, t);
        }
        let mut n = RAMP_MIN_STEPS;
        let mut prev = self.ramp_once(psi, a, b, t, n)?;
        loop {
            if n * 2 > RAMP_MAX_STEPS {
                let next = self.ramp_once(psi, a, b, t, n * 2);
                let change = next.map(|v| (v - &prev).norm()).unwrap_or(f64::NAN);
                return Err(Error::Convergence { steps: n, change });
            }
            n *= 2;
            let next = self.ramp_once(psi, a, b, t, n)?;
            let change = (&next - &prev).norm();
            if change < RAMP_TOLERANCE {
                return Ok(next);
            }
            prev = next;
        }
    }

    /// State after all segments, and the setting used for the dwell.
    fn prepare(&self) -> Result<(DVector<Complex64>, ExchangeConfig)> {
        let mut psi = self.seq.init.amplitudes().clone();
        let mut cur = self.seq.start;
        for seg in &self.seq.segments {
            match seg.kind {
                SegmentKind::SetDiabatic | SegmentKind::Hold => {
                    cur = seg.target;
                    psi = self.step(&psi, &cur, seg.duration_ns)?;
                }
                SegmentKind::ExchangePulse => {
                    psi = self.step(&psi, &seg.target, seg.duration_ns)?;
                }
                SegmentKind::LinearRamp => {
                    psi = self.ramp(&psi, &cur, &seg.target, seg.duration_ns)?;
                    // Thousands of steps accumulate roundoff in the norm.
                    let norm = psi.norm();
                    psi.unscale_mut(norm);
                    cur = seg.target;
                }
            }
        }
        Ok((psi, cur))
    }

    fn observe<T, F>(&self, f: &F) -> Result<Vec<T>>
    where
        F: Fn(&SpinState) -> T,
    {
        let (psi, cur) = self.prepare()?;
        let p = Propagator::new(&self.h(&cur)?)?;
        let c = p.decompose(&psi);
        let basis = self.seq.init.basis();
        let tol = self.seq.init.norm_tolerance();
        self.seq
            .dwell_ns
            .iter()
            .map(|&t| {
                let s = SpinState::with_tolerance(basis, p.recompose(&c, t), tol)?;
                Ok(f(&s))
            })
            .collect()
    }
}

fn identity_scale(j: &ExchangeConfig) -> ExchangeConfig {
    *j
}

/// Gap between the two most populated dwell eigenstates of the noiseless
/// pre-dwell state; the reference frequency that noise is scaled to.
pub fn reference_frequency(seq: &PulseSequence) -> Result<f64> {
    let runner = Runner {
        seq,
        scale: &identity_scale,
    };
    let (psi, cur) = runner.prepare()?;
    let p = Propagator::new(&runner.h(&cur)?)?;
    let c = p.decompose(&psi);
    let mut idx: Vec<usize> = (0..c.len()).collect();
    idx.sort_by(|&a, &b| c[b].norm_sqr().total_cmp(&c[a].norm_sqr()));
    let e = p.energies();
    let gap = (e[idx[0]] - e[idx[1]]).abs();
    if gap > 1e-9 {
        return Ok(gap);
    }
    let spread = e.max() - e.min();
    if spread > 0.0 {
        Ok(spread)
    } else {
        Err(Error::Domain("dwell Hamiltonian has no gap to scale noise to".into()))
    }
}

/// Runs `seq` and maps each dwell state through `f`. Returns one row per
/// noise sample (a single row without noise or with `σ_f = 0`).
pub fn run_sequence_observe<T, F>(
    seq: &PulseSequence,
    noise: Option<&NoiseModel>,
    f: F,
) -> Result<Vec<Vec<T>>>
where
    T: Send,
    F: Fn(&SpinState) -> T + Sync,
{
    seq.validate()?;
    let noise = match noise {
        Some(n) if n.sigma_f > 0.0 => n,
        other => {
            if let Some(n) = other {
                n.validate()?;
            }
            let runner = Runner {
                seq,
                scale: &identity_scale,
            };
            return Ok(vec![runner.observe(&f)?]);
        }
    };
    noise.validate()?;
    let f_ref = reference_frequency(seq)?;
    (0..noise.n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let z = noise.normals(i, 4);
            let k = noise.sigma_f / f_ref;
            let scale = move |j: &ExchangeConfig| match noise.mode {
                NoiseMode::CommonScale => j.scaled((1.0 + k * z[0]).max(0.0)),
                NoiseMode::PerBond => ExchangeConfig {
                    j12: j.j12 * (1.0 + k * z[0]).max(0.0),
                    j34: j.j34 * (1.0 + k * z[1]).max(0.0),
                    j23: j.j23 * (1.0 + k * z[2]).max(0.0),
                    j14: j.j14 * (1.0 + k * z[3]).max(0.0),
                },
            };
            Runner { seq, scale: &scale }.observe(&f)
        })
        .collect()
}

/// Full state trajectories, one per noise sample.
pub fn run_sequence(seq: &PulseSequence, noise: Option<&NoiseModel>) -> Result<Vec<Trajectory>> {
    let rows = run_sequence_observe(seq, noise, |s| s.clone())?;
    Ok(rows
        .into_iter()
        .map(|states| Trajectory {
            times_ns: seq.dwell_ns.clone(),
            states,
        })
        .collect())
}

/// Ensemble mean of a scalar observable over samples, per dwell time.
pub fn ensemble_mean(rows: &[Vec<f64>]) -> Vec<f64> {
    let n = rows.len() as f64;
    let len = rows.first().map_or(0, |r| r.len());
    (0..len)
        .map(|k| rows.iter().map(|r| r[k]).sum::<f64>() / n)
        .collect()
}

fn check_pair(jx: f64, jy: f64) -> Result<f64> {
    if !(jx >= 0.0 && jy >= 0.0) {
        return Err(Error::Domain(format!("Jx = {jx}, Jy = {jy} must be >= 0")));
    }
    let q = jx * jx - jx * jy + jy * jy;
    if q == 0.0 {
        return Err(Error::UndefinedFrequency);
    }
    Ok(q)
}

/// Singlet-singlet oscillation frequency `√(Jx² + Jy² − JxJy)`.
pub fn f_ss(jx: f64, jy: f64) -> Result<f64> {
    Ok(check_pair(jx, jy)?.sqrt())
}

/// Peak-to-peak amplitudes `(Vx, Vy)` of the horizontal and vertical
/// singlet-singlet probabilities.
pub fn visibilities(jx: f64, jy: f64) -> Result<(f64, f64)> {
    let q = check_pair(jx, jy)?;
    Ok((3.0 * jy * jy / (4.0 * q), 3.0 * jx * jy / (4.0 * q)))
}

/// Closed-form `(P_S12S34(t), P_S23S14(t))` starting from `|S_x⟩`.
pub fn singlet_oscillation(jx: f64, jy: f64, t_ns: f64) -> Result<(f64, f64)> {
    let q = check_pair(jx, jy)?;
    let r = q.sqrt();
    let cos_t = (-2.0 * jx + jy) / (2.0 * r);
    let sin_t = 3f64.sqrt() * jy / (2.0 * r);
    let c = (PHASE_PER_MHZ_NS * r * t_ns).cos();
    let px = 0.5 * (1.0 + cos_t * cos_t + sin_t * sin_t * c);
    let py = 0.25 * (1.0 + (sin_t * sin_t - 3f64.sqrt() * sin_t * cos_t) * (1.0 - c));
    Ok((px, py))
}

/// Singlet-singlet probabilities `(P_x, P_y)` of the ground state of `H_S`.
pub fn ground_state_probabilities(jx: f64, jy: f64) -> Result<(f64, f64)> {
    let r = check_pair(jx, jy)?.sqrt();
    Ok((
        0.5 - (-2.0 * jx + jy) / (4.0 * r),
        0.5 + (-jx + 2.0 * jy) / (4.0 * r),
    ))
}

/// `δ²/(|Jx − Jy|·min(Jx, Jy))` with `δ² = max(δx², δy²)`; zero when both
/// imbalances vanish.
pub fn degeneracy_guard(j: &ExchangeConfig) -> f64 {
    let d2 = j.delta_x().powi(2).max(j.delta_y().powi(2));
    if d2 == 0.0 {
        return 0.0;
    }
    let denom = (j.jx() - j.jy()).abs() * j.jx().min(j.jy());
    if denom == 0.0 {
        f64::INFINITY
    } else {
        d2 / denom
    }
}

pub const DEGENERACY_GUARD_LIMIT: f64 = 0.1;

/// Second-order S/T⁻ frequency `Jy/2 + δx²/Jy + δy²/(2Jx)` without the
/// regime check.
pub fn f_st_second_order(j: &ExchangeConfig) -> f64 {
    let (jx, jy, dx, dy) = (j.jx(), j.jy(), j.delta_x(), j.delta_y());
    let mut f = jy / 2.0;
    if dx != 0.0 {
        f += dx * dx / jy;
    }
    if dy != 0.0 {
        f += dy * dy / (2.0 * jx);
    }
    f
}

/// Second-order S/T⁻ frequency, refused near `Jx = Jy`.
pub fn f_st_perturbative(j: &ExchangeConfig) -> Result<f64> {
    j.validate()?;
    let g = degeneracy_guard(j);
    if g >= DEGENERACY_GUARD_LIMIT {
        return Err(Error::DegenerateRegime(g));
    }
    Ok(f_st_second_order(j))
}

/// Exact S/T⁻ frequency: gap between the eigenstates of `H_T′` that are
/// adiabatically connected to `|0⟩` and `|1⟩`.
pub fn f_st_exact(j: &ExchangeConfig) -> Result<f64> {
    let (h, _, _) = hamiltonians::build_ht_prime(j)?;
    let eig = SymmetricEigen::new(h);
    let pick = |k: usize| {
        (0..3)
            .max_by(|&a, &b| {
                eig.eigenvectors[(k, a)]
                    .abs()
                    .total_cmp(&eig.eigenvectors[(k, b)].abs())
            })
            .unwrap()
    };
    let (a, b) = (pick(0), pick(1));
    if a == b {
        return Err(Error::DegenerateRegime(degeneracy_guard(j)));
    }
    Ok((eig.eigenvalues[a] - eig.eigenvalues[b]).abs())
}

/// Return probability of `|S12 T⁻34⟩` at `Jx = Jy = J` under `H_T′`,
/// from the exact three-level eigensystem.
pub fn p_st_degenerate(j: f64, delta_x: f64, delta_y: f64, t_ns: f64) -> f64 {
    let d2 = delta_x * delta_x + delta_y * delta_y;
    if d2 == 0.0 {
        return 0.5 * (1.0 + (PHASE_PER_MHZ_NS * j / 2.0 * t_ns).cos());
    }
    let r = (j * j + 4.0 * d2).sqrt();
    // J − R without cancellation
    let j_minus_r = -4.0 * d2 / (j + r);
    let energies = [(-3.0 * j - r) / 4.0, -j / 2.0, (-3.0 * j + r) / 4.0];
    let vecs = [
        [2.0 * delta_x, j + r, 2.0 * delta_y],
        [-delta_y, 0.0, delta_x],
        [2.0 * delta_x, j_minus_r, 2.0 * delta_y],
    ];
    let w: Vec<f64> = vecs
        .iter()
        .map(|v| {
            let n2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
            (v[0] + v[1]).powi(2) / (2.0 * n2)
        })
        .collect();
    let mut p: f64 = w.iter().map(|x| x * x).sum();
    for a in 0..3 {
        for b in (a + 1)..3 {
            p += 2.0
                * w[a]
                * w[b]
                * (PHASE_PER_MHZ_NS * (energies[a] - energies[b]) * t_ns).cos();
        }
    }
    p
}

/// Envelope modulation frequency `(ω_e1 − ω_e2)/2` of the degenerate case,
/// exact form `(R − J)/8`.
pub fn degenerate_beat_frequency(j: f64, delta_x: f64, delta_y: f64) -> f64 {
    let d2 = delta_x * delta_x + delta_y * delta_y;
    let r = (j * j + 4.0 * d2).sqrt();
    d2 / (2.0 * (j + r))
}

/// `Tφ = √2/(2π σ_f)` in ns for `σ_f` in MHz.
pub fn t_phi(sigma_f: f64) -> Result<f64> {
    if !(sigma_f > 0.0) {
        return Err(Error::Domain(format!("sigma_f = {sigma_f} must be > 0")));
    }
    Ok(2f64.sqrt() / (2.0 * PI * sigma_f * 1e-3))
}

pub fn sigma_f_for_t_phi(t_phi_ns: f64) -> Result<f64> {
    if !(t_phi_ns > 0.0) {
        return Err(Error::Domain(format!("T_phi = {t_phi_ns} must be > 0")));
    }
    Ok(2f64.sqrt() / (2.0 * PI * t_phi_ns * 1e-3))
}

/// `exp(−(t/Tφ)²)`; 1 when `σ_f = 0`.
pub fn gaussian_envelope(sigma_f: f64, t_ns: f64) -> f64 {
    let a = PHASE_PER_MHZ_NS * sigma_f * t_ns;
    (-0.5 * a * a).exp()
}

/// Monte-Carlo ensemble average of `cos(2π·δf·t)` with `δf ~ N(0, σ_f²)`.
pub fn dephasing_envelope(noise: &NoiseModel, t_ns: f64) -> Result<f64> {
    noise.validate()?;
    if noise.sigma_f == 0.0 {
        return Ok(1.0);
    }
    let sum: f64 = (0..noise.n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let z = noise.normals(i, 1)[0];
            (PHASE_PER_MHZ_NS * noise.sigma_f * z * t_ns).cos()
        })
        .sum();
    Ok(sum / noise.n_samples as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::singlet_x;
    use rand::Rng;

    fn ps(state: &SpinState, k: usize) -> f64 {
        state.amplitudes()[k].norm_sqr()
    }

    #[test]
    fn zero_time_is_identity() {
        let s = singlet_x();
        let out = evolve(&s, &hamiltonians::build_hs(30.0, 70.0).unwrap(), 0.0).unwrap();
        assert_eq!(out.amplitudes(), s.amplitudes());
    }

    #[test]
    fn full_period_at_equal_exchange() {
        let h = hamiltonians::build_hs(50.0, 50.0).unwrap();
        let out = evolve(&singlet_x(), &h, 20.0).unwrap();
        assert!((ps(&out, 0) - 1.0).abs() < 1e-12);
        let half = evolve(&singlet_x(), &h, 10.0).unwrap();
        assert!((ps(&half, 0) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn group_property() {
        let h = hamiltonians::build_hj_full(&ExchangeConfig::new(11.0, 7.0, 23.0, 5.0).unwrap())
            .unwrap();
        let s = singlet_x().to_full();
        let a = evolve(&evolve(&s, &h, 13.7).unwrap(), &h, 13.7).unwrap();
        let b = evolve(&s, &h, 27.4).unwrap();
        assert!((a.amplitudes() - b.amplitudes()).norm() < 1e-12);
    }

    #[test]
    fn evolve_dimension_check() {
        let h = hamiltonians::build_hs(1.0, 1.0).unwrap();
        let s = singlet_x().to_full();
        assert!(matches!(evolve(&s, &h, 1.0), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn unitary_is_unitary() {
        let h = hamiltonians::build_hj_full(&ExchangeConfig::new(3.0, 9.0, 4.0, 1.0).unwrap())
            .unwrap();
        let u = Propagator::new(&h).unwrap().unitary(17.0);
        let id = DMatrix::<Complex64>::identity(16, 16);
        assert!((u.adjoint() * &u - id).norm() < 1e-12);
    }

    #[test]
    fn singlet_closed_form_matches_evolution() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let jx = rng.random_range(1.0..100.0);
            let jy = rng.random_range(1.0..100.0);
            let t = rng.random_range(0.0..200.0);
            let h = hamiltonians::build_hs(jx, jy).unwrap();
            let out = evolve(&singlet_x(), &h, t).unwrap();
            let (px, py) = singlet_oscillation(jx, jy, t).unwrap();
            assert!((ps(&out, 0) - px).abs() < 1e-12);
            assert!((out.overlap_probability(&spin::singlet_y()) - py).abs() < 1e-12);
        }
    }

    #[test]
    fn frequency_and_visibility_examples() {
        assert!((f_ss(40.0, 40.0).unwrap() - 40.0).abs() < 1e-12);
        assert!((f_ss(108.0, 56.0).unwrap() - 93.55).abs() < 0.005);
        assert_eq!(f_ss(30.0, 0.0).unwrap(), 30.0);
        assert!(matches!(f_ss(0.0, 0.0), Err(Error::UndefinedFrequency)));
        let (vx, vy) = visibilities(20.0, 20.0).unwrap();
        assert!((vx - 0.75).abs() < 1e-15 && (vy - 0.75).abs() < 1e-15);
        assert_eq!(visibilities(20.0, 0.0).unwrap(), (0.0, 0.0));
        let (vx, vy) = visibilities(60.0, 30.0).unwrap();
        assert!((vx - 0.25).abs() < 1e-15 && (vy - 0.5).abs() < 1e-15);
    }

    #[test]
    fn perturbative_examples() {
        let j = ExchangeConfig::new(26.0, 24.0, 30.0, 30.0).unwrap();
        assert!((f_st_perturbative(&j).unwrap() - (30.0 + 4.0 / 60.0)).abs() < 1e-12);
        let j = ExchangeConfig::balanced(40.0, 70.0).unwrap();
        assert_eq!(f_st_perturbative(&j).unwrap(), 35.0);
        assert_eq!(f_st_exact(&j).unwrap(), 35.0);
        let near = ExchangeConfig::from_sums(50.0, 51.0, 3.0, 0.0).unwrap();
        assert!(matches!(f_st_perturbative(&near), Err(Error::DegenerateRegime(_))));
    }

    #[test]
    fn perturbative_error_is_fourth_order() {
        let base = |s: f64| ExchangeConfig::from_sums(30.0, 80.0, 4.0 * s, 3.0 * s).unwrap();
        let err = |s: f64| {
            let j = base(s);
            (f_st_second_order(&j) - f_st_exact(&j).unwrap()).abs()
        };
        let r = err(1.0) / err(0.5);
        assert!((r - 16.0).abs() < 1.0, "{r}");
    }

    #[test]
    fn degenerate_formula_matches_three_level() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..50 {
            let j = rng.random_range(5.0..100.0);
            let dx = rng.random_range(-5.0..5.0);
            let dy = rng.random_range(-5.0..5.0);
            let t = rng.random_range(0.0..2000.0);
            let cfg = ExchangeConfig::from_sums(j, j, dx, dy).unwrap();
            let (h, _, _) = hamiltonians::build_ht_prime(&cfg).unwrap();
            let s = 1.0 / 2f64.sqrt();
            let psi0 = DVector::from_vec(vec![
                Complex64::new(s, 0.0),
                Complex64::new(s, 0.0),
                Complex64::new(0.0, 0.0),
            ]);
            let out = Propagator::new(&h).unwrap().apply(&psi0, t);
            let p = psi0.dotc(&out).norm_sqr();
            assert!((p - p_st_degenerate(j, dx, dy, t)).abs() < 1e-8);
        }
        assert_eq!(p_st_degenerate(30.0, 1.0, 2.0, 0.0), 1.0);
        assert!((p_st_degenerate(30.0, 0.0, 0.0, 0.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn delta_y_zero_frequency() {
        // the only oscillating term sits at R/2
        let (j, dx) = (50.0f64, 2.0f64);
        let f = (j * j + 4.0 * dx * dx).sqrt() / 2.0;
        assert!((f - (j / 2.0 + dx * dx / j)).abs() < 1e-3);
        let t = 1e3 / f;
        assert!((p_st_degenerate(j, dx, 0.0, t) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn beat_frequency_limit() {
        let b = degenerate_beat_frequency(50.0, 2.0, 1.5);
        assert!((b / (6.25 / 200.0) - 1.0).abs() < 0.005);
    }

    #[test]
    fn dephasing_time_conversions() {
        let s = sigma_f_for_t_phi(130.0).unwrap();
        assert!((s - 1.7313).abs() < 1e-3);
        assert!((t_phi(s).unwrap() - 130.0).abs() < 1e-9);
        assert!((gaussian_envelope(s, 130.0) - (-1f64).exp()).abs() < 1e-12);
        let n = NoiseModel::new(0.0, 10, 1).unwrap();
        assert_eq!(dephasing_envelope(&n, 100.0).unwrap(), 1.0);
    }

    #[test]
    fn envelope_monte_carlo() {
        let noise = NoiseModel::from_t_phi(130.0, 4000, 7).unwrap();
        let tol = 3.0 / (noise.n_samples as f64).sqrt();
        for t in [0.0, 50.0, 130.0, 200.0] {
            let mc = dephasing_envelope(&noise, t).unwrap();
            let exact = (-(t / 130.0f64).powi(2)).exp();
            assert!((mc - exact).abs() < tol, "t={t}: {mc} vs {exact}");
        }
    }

    #[test]
    fn hold_sequence_matches_evolve() {
        let j = ExchangeConfig::balanced(50.0, 30.0).unwrap();
        let seq = PulseSequence::new(
            singlet_x(),
            vec![PulseSegment::hold(j, 12.5)],
            vec![0.0],
        );
        let tr = run_sequence(&seq, None).unwrap();
        let direct = evolve(&singlet_x(), &hamiltonians::build_hs(50.0, 30.0).unwrap(), 12.5).unwrap();
        assert!((tr[0].states[0].amplitudes() - direct.amplitudes()).norm() < 1e-12);
    }

    #[test]
    fn empty_sequence_rejected() {
        let seq = PulseSequence::new(singlet_x(), vec![], vec![0.0]);
        assert!(run_sequence(&seq, None).is_err());
    }

    #[test]
    fn diabatic_step_oscillates_at_j() {
        let j = ExchangeConfig::balanced(50.0, 50.0).unwrap();
        let seq = PulseSequence::new(
            singlet_x(),
            vec![PulseSegment::set(j)],
            (0..=40).map(|k| k as f64).collect(),
        );
        let rows = run_sequence_observe(&seq, None, |s| ps(s, 0)).unwrap();
        let p = &rows[0];
        let max = p.iter().cloned().fold(f64::MIN, f64::max);
        let min = p.iter().cloned().fold(f64::MAX, f64::min);
        assert!((max - min - 0.75).abs() < 1e-12);
        assert!((p[20] - 1.0).abs() < 1e-12 && (p[10] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn voltage_ramp_needs_positive_ends() {
        let a = ExchangeConfig::balanced(50.0, 0.0).unwrap();
        let b = ExchangeConfig::balanced(50.0, 50.0).unwrap();
        let mut seq = PulseSequence::new(singlet_x(), vec![PulseSegment::ramp(b, 100.0)], vec![0.0]);
        seq.start = a;
        assert!(run_sequence(&seq, None).is_err());
        seq.ramp_mode = RampMode::LinearJ;
        assert!(run_sequence(&seq, None).is_ok());
    }

    #[test]
    fn ramp_profiles_fix_endpoints() {
        for p in [RampProfile::Linear, RampProfile::Cosine, RampProfile::Smootherstep] {
            assert!(p.at(0.0).abs() < 1e-15 && (p.at(1.0) - 1.0).abs() < 1e-15);
            assert!((p.at(0.5) - 0.5).abs() < 1e-15);
        }
        let h = 1e-6;
        let rate = |p: RampProfile, x: f64| (p.at(x + h) - p.at(x - h)) / (2.0 * h);
        assert!(rate(RampProfile::Smootherstep, h).abs() < 1e-9);
        assert!(rate(RampProfile::Cosine, 1.0 - h).abs() < 1e-4);
    }

    #[test]
    fn slow_ramp_reaches_ground_state() {
        let j = 25.0;
        let a = ExchangeConfig::new(j, j, j / 100.0, j / 100.0).unwrap();
        let b = ExchangeConfig::new(j, j, j, j).unwrap();
        let mut seq = PulseSequence::new(
            singlet_x(),
            vec![PulseSegment::ramp(b, 200.0 / (2.0 * j) * 1e3)],
            vec![0.0],
        );
        seq.start = a;
        let tr = run_sequence(&seq, None).unwrap();
        assert!(tr[0].states[0].overlap_probability(&spin::s_wave()) > 0.999);
    }

    #[test]
    fn full_space_matches_subspace() {
        let j = ExchangeConfig::new(20.0, 20.0, 35.0, 35.0).unwrap();
        let times: Vec<f64> = (0..50).map(|k| 3.3 * k as f64).collect();
        let small = PulseSequence::new(singlet_x(), vec![PulseSegment::set(j)], times.clone());
        let big = PulseSequence::new(singlet_x().to_full(), vec![PulseSegment::set(j)], times);
        let a = run_sequence(&small, None).unwrap();
        let b = run_sequence(&big, None).unwrap();
        for (x, y) in a[0].states.iter().zip(&b[0].states) {
            let proj = y.components_in(BasisLabel::GlobalSinglet2);
            assert!((proj - x.amplitudes()).norm() < 1e-10);
            assert!(y.leakage(BasisLabel::GlobalSinglet2) < 1e-12);
        }
    }

    #[test]
    fn zeeman_causes_leakage() {
        let j = ExchangeConfig::new(20.0, 20.0, 20.0, 20.0).unwrap();
        let mut seq = PulseSequence::new(
            singlet_x().to_full(),
            vec![PulseSegment::set(j)],
            vec![0.0, 200.0, 400.0],
        );
        seq.zeeman = Some(ZeemanConfig::default());
        let tr = run_sequence(&seq, None).unwrap();
        let leak = tr[0].states[2].leakage(BasisLabel::GlobalSinglet2);
        assert!(leak > 1e-6, "{leak}");
        seq.zeeman = Some(ZeemanConfig {
            b_mt: 1.0,
            g: [0.2; 4],
        });
        let tr = run_sequence(&seq, None).unwrap();
        assert!(tr[0].states[2].leakage(BasisLabel::GlobalSinglet2) < 1e-12);
    }

    #[test]
    fn noise_is_deterministic_and_dephases() {
        let j = ExchangeConfig::balanced(50.0, 50.0).unwrap();
        let seq = PulseSequence::new(
            singlet_x(),
            vec![PulseSegment::set(j)],
            vec![0.0, 130.0],
        );
        let noise = NoiseModel::from_t_phi(130.0, 400, 3).unwrap();
        let a = run_sequence_observe(&seq, Some(&noise), |s| ps(s, 0)).unwrap();
        let b = run_sequence_observe(&seq, Some(&noise), |s| ps(s, 0)).unwrap();
        assert_eq!(a, b);
        let mean = ensemble_mean(&a);
        // 6.5 periods at t = Tφ: the cosine part is −0.375 damped by e^-1
        let expect = 0.625 - 0.375 * (-1f64).exp();
        assert!((mean[1] - expect).abs() < 0.05, "{}", mean[1]);
        assert!((reference_frequency(&seq).unwrap() - 50.0).abs() < 1e-9);
    }

    #[test]
    fn exchange_pulse_reverts() {
        let off = ExchangeConfig::new(1.0, 1.0, 0.0, 0.0).unwrap();
        let swap = ExchangeConfig::new(0.0, 0.0, 20.0, 0.0).unwrap();
        let mut seq = PulseSequence::new(
            singlet_x().to_full(),
            vec![PulseSegment::set(off), PulseSegment::pulse(swap, 25.0)],
            vec![0.0],
        );
        seq.start = off;
        let tr = run_sequence(&seq, None).unwrap();
        // a half swap period on Q2Q3 maps |S12 S34⟩ to |S13 S24⟩
        let s = &tr[0].states[0];
        let p = s.overlap_probability(&spin::d_wave());
        assert!((p - 1.0).abs() < 1e-12, "{p}");
    }
}
