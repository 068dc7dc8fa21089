// SPDX-License-Identifier: Apache-2.0

//! Sequential two-pair singlet/triplet readout and shot sampling.

use std::io::Write;
use std::sync::OnceLock;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spin::{spin_dot, Pair, SpinState, FULL_DIM};

/// Which pairs are read, in readout order.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReadoutDirection {
    /// Q34 first, then Q12.
    #[default]
    Horizontal,
    /// Q23 first, then Q14.
    Vertical,
}

impl ReadoutDirection {
    pub fn pairs(self) -> (Pair, Pair) {
        match self {
            ReadoutDirection::Horizontal => (Pair::Q34, Pair::Q12),
            ReadoutDirection::Vertical => (Pair::Q23, Pair::Q14),
        }
    }
}

/// Order of the joint outcomes: `(first, second)` pair results.
pub const OUTCOME_LABELS: [&str; 4] = ["SS", "ST", "TS", "TT"];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReadoutConfig {
    pub direction: ReadoutDirection,
    /// Probability that a true singlet is recorded as S, per pair in readout order.
    pub f_s: [f64; 2],
    /// Probability that a true triplet is recorded as T, per pair in readout order.
    pub f_t: [f64; 2],
    pub n_shots: usize,
    pub seed: u64,
}

impl Default for ReadoutConfig {
    fn default() -> Self {
        Self {
            direction: ReadoutDirection::Horizontal,
            f_s: [1.0; 2],
            f_t: [1.0; 2],
            n_shots: 500,
            seed: 0,
        }
    }
}

impl ReadoutConfig {
    pub fn validate(&self) -> Result<()> {
        for &f in self.f_s.iter().chain(&self.f_t) {
            if !(f > 0.5 && f <= 1.0) {
                return Err(Error::Domain(format!("readout fidelity {f} must be in (0.5, 1]")));
            }
        }
        if self.n_shots == 0 {
            return Err(Error::Domain("n_shots must be >= 1".into()));
        }
        Ok(())
    }

    pub fn with_fidelity(mut self, f_s: f64, f_t: f64) -> Self {
        self.f_s = [f_s; 2];
        self.f_t = [f_t; 2];
        self
    }
}

/// Rank-4 singlet projector on `pair` in the full space: `1/4 − S_i·S_j`.
pub fn singlet_projector(pair: Pair) -> DMatrix<f64> {
    let (i, j) = pair.dots();
    DMatrix::identity(FULL_DIM, FULL_DIM) * 0.25 - spin_dot(i, j)
}

fn complex_projector(pair: Pair) -> &'static DMatrix<Complex64> {
    static CACHE: OnceLock<Vec<DMatrix<Complex64>>> = OnceLock::new();
    let all = CACHE.get_or_init(|| {
        Pair::ALL
            .iter()
            .map(|&p| singlet_projector(p).map(|x| Complex64::new(x, 0.0)))
            .collect()
    });
    let k = Pair::ALL.iter().position(|&p| p == pair).expect("pair is listed");
    &all[k]
}

/// Joint probabilities `[SS, ST, TS, TT]` of reading both pairs of
/// `direction`, obtained by projecting on the first pair and then the second.
pub fn measure_pair_probabilities(state: &SpinState, direction: ReadoutDirection) -> Result<[f64; 4]> {
    let full = state.to_full();
    let psi = full.amplitudes();
    let norm = psi.norm();
    if (norm - 1.0).abs() > state.norm_tolerance() {
        return Err(Error::NotNormalized { norm });
    }
    let (a, b) = direction.pairs();
    let (pa, pb) = (complex_projector(a), complex_projector(b));
    let sa = pa * psi;
    let ta = psi - &sa;
    let mut out = [0.0; 4];
    for (k, first) in [sa, ta].iter().enumerate() {
        let s = pb * first;
        let t = first - &s;
        out[2 * k] = s.norm_squared();
        out[2 * k + 1] = t.norm_squared();
    }
    Ok(out)
}

/// Probabilities as recorded through the per-pair flip channel.
pub fn apply_readout_channel(probs: &[f64; 4], cfg: &ReadoutConfig) -> [f64; 4] {
    // conf[p][true][recorded], 0 = S, 1 = T
    let conf = |p: usize| {
        [
            [cfg.f_s[p], 1.0 - cfg.f_s[p]],
            [1.0 - cfg.f_t[p], cfg.f_t[p]],
        ]
    };
    let (c0, c1) = (conf(0), conf(1));
    let mut out = [0.0; 4];
    for t in 0..4 {
        for r in 0..4 {
            out[r] += probs[t] * c0[t / 2][r / 2] * c1[t % 2][r % 2];
        }
    }
    out
}

/// Single-shot outcomes; `true` means the pair was recorded as singlet.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotRecord {
    pub outcomes: Vec<(bool, bool)>,
}

impl ShotRecord {
    pub fn n_shots(&self) -> usize {
        self.outcomes.len()
    }

    pub fn counts(&self) -> [usize; 4] {
        let mut c = [0; 4];
        for &(a, b) in &self.outcomes {
            c[(!a as usize) * 2 + (!b as usize)] += 1;
        }
        c
    }

    /// Empirical `[SS, ST, TS, TT]`.
    pub fn probabilities(&self) -> [f64; 4] {
        let n = self.n_shots().max(1) as f64;
        self.counts().map(|c| c as f64 / n)
    }

    /// Binomial standard errors `√(p(1−p)/n)` of [`Self::probabilities`].
    pub fn standard_errors(&self) -> [f64; 4] {
        let n = self.n_shots().max(1) as f64;
        self.probabilities().map(|p| (p * (1.0 - p) / n).sqrt())
    }

    /// Fraction of shots with the first pair recorded as singlet.
    pub fn first_singlet_fraction(&self) -> f64 {
        let p = self.probabilities();
        p[0] + p[1]
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["shot_index", "pair1_outcome", "pair2_outcome"])?;
        let label = |s: bool| if s { "S" } else { "T" };
        for (k, &(a, b)) in self.outcomes.iter().enumerate() {
            w.write_record([k.to_string().as_str(), label(a), label(b)])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Draws `cfg.n_shots` readouts from `probs` and passes each through the
/// flip channel. Shot `k` uses its own stream of the seeded generator.
pub fn sample_shots(probs: &[f64; 4], cfg: &ReadoutConfig) -> Result<ShotRecord> {
    cfg.validate()?;
    if probs.iter().any(|&p| !(p >= -1e-12)) {
        return Err(Error::Domain("negative probability".into()));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Domain(format!("probabilities sum to {total}")));
    }
    let cum = [probs[0], probs[0] + probs[1], probs[0] + probs[1] + probs[2]];
    let outcomes = (0..cfg.n_shots as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(k);
            let u: f64 = rng.random::<f64>() * total;
            let idx = cum.iter().position(|&c| u < c).unwrap_or(3);
            let mut first = idx < 2;
            let mut second = idx % 2 == 0;
            let keep = |singlet: bool, p: usize, rng: &mut ChaCha8Rng| {
                let f = if singlet { cfg.f_s[p] } else { cfg.f_t[p] };
                rng.random::<f64>() < f
            };
            if !keep(first, 0, &mut rng) {
                first = !first;
            }
            if !keep(second, 1, &mut rng) {
                second = !second;
            }
            (first, second)
        })
        .collect();
    Ok(ShotRecord { outcomes })
}
