// SPDX-License-Identifier: Apache-2.0

//! Four-spin Hilbert space of the 2x2 array.
//!
//! Product-basis convention: dots are ordered Q1..Q4 and dot `k` (0-based)
//! sits on bit `k` of the basis index, with bit value 0 for spin-up and 1 for
//! spin-down. So `|↑↑↑↑⟩` is index 0, `|↓↑↑↑⟩` (Q1 down) is index 1 and
//! `|↓↓↓↓⟩` is index 15.
//!
//! Pair kets follow the usual conventions, with `i < j` read from the pair
//! name (`Q14` means `i = 1`, `j = 4`):
//! `|S_ij⟩ = (|↑_i↓_j⟩ − |↓_i↑_j⟩)/√2`, `|T⁰_ij⟩ = (|↑_i↓_j⟩ + |↓_i↑_j⟩)/√2`,
//! `|T⁺_ij⟩ = |↑_i↑_j⟩`, `|T⁻_ij⟩ = |↓_i↓_j⟩`.
//!
//! The second global-singlet ket is `(|T⁺T⁻⟩ + |T⁻T⁺⟩ − |T⁰T⁰⟩)/√3`. Some
//! write-ups print the last coefficient as −2; that vector is neither
//! normalized nor a total-spin singlet, so it is not used here.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FULL_DIM: usize = 16;
pub const NORM_TOLERANCE: f64 = 1e-12;

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Working bases used throughout the crate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BasisLabel {
    /// 16-dim product basis (see module docs for ordering).
    Full16,
    /// `{|S12 S34⟩, (|T⁺12T⁻34⟩ + |T⁻12T⁺34⟩ − |T⁰12T⁰34⟩)/√3}`.
    GlobalSinglet2,
    /// Same sector with the vertical pairing:
    /// `{|S14 S23⟩, (|T⁺14T⁻23⟩ + |T⁻14T⁺23⟩ − |T⁰14T⁰23⟩)/√3}`.
    GlobalSinglet2Y,
    /// `{|S12 T⁻34⟩, |T⁻12 S34⟩, (|T⁰12T⁻34⟩ − |T⁻12T⁰34⟩)/√2}`.
    TripletMinus3,
    /// `TripletMinus3` plus `|Q⁻⟩ = (|T⁰12T⁻34⟩ + |T⁻12T⁰34⟩)/√2`.
    TripletMinusPlusQ4,
}

impl BasisLabel {
    pub fn dim(self) -> usize {
        match self {
            BasisLabel::Full16 => FULL_DIM,
            BasisLabel::GlobalSinglet2 | BasisLabel::GlobalSinglet2Y => 2,
            BasisLabel::TripletMinus3 => 3,
            BasisLabel::TripletMinusPlusQ4 => 4,
        }
    }

    pub fn ket_names(self) -> Vec<String> {
        match self {
            BasisLabel::Full16 => (0..FULL_DIM)
                .map(|idx| {
                    (0..4)
                        .map(|k| if idx >> k & 1 == 0 { '↑' } else { '↓' })
                        .collect()
                })
                .collect(),
            BasisLabel::GlobalSinglet2 => vec!["S12S34".into(), "TT12,34".into()],
            BasisLabel::GlobalSinglet2Y => vec!["S14S23".into(), "TT14,23".into()],
            BasisLabel::TripletMinus3 => {
                vec!["S12T-34".into(), "T-12S34".into(), "(T0T- - T-T0)".into()]
            }
            BasisLabel::TripletMinusPlusQ4 => vec![
                "S12T-34".into(),
                "T-12S34".into(),
                "(T0T- - T-T0)".into(),
                "Q-".into(),
            ],
        }
    }
}

/// Nearest-neighbour pairs of the square; Q12/Q34 are horizontal, Q23/Q14 vertical.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pair {
    Q12,
    Q34,
    Q23,
    Q14,
}

impl Pair {
    pub const ALL: [Pair; 4] = [Pair::Q12, Pair::Q34, Pair::Q23, Pair::Q14];

    /// 0-based dot indices `(i, j)`.
    pub fn dots(self) -> (usize, usize) {
        match self {
            Pair::Q12 => (0, 1),
            Pair::Q34 => (2, 3),
            Pair::Q23 => (1, 2),
            Pair::Q14 => (0, 3),
        }
    }

    pub fn is_horizontal(self) -> bool {
        matches!(self, Pair::Q12 | Pair::Q34)
    }

    /// The opposite pair covering the remaining two dots.
    pub fn partner(self) -> Pair {
        match self {
            Pair::Q12 => Pair::Q34,
            Pair::Q34 => Pair::Q12,
            Pair::Q23 => Pair::Q14,
            Pair::Q14 => Pair::Q23,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PairLabel {
    S,
    T0,
    TPlus,
    TMinus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PairState {
    pub pair: Pair,
    pub label: PairLabel,
}

impl PairState {
    pub fn new(pair: Pair, label: PairLabel) -> Self {
        Self { pair, label }
    }
}

/// Two-spin amplitudes as `(coefficient, bit_i, bit_j)`; bit 0 = up.
fn pair_terms(label: PairLabel) -> Vec<(f64, usize, usize)> {
    let h = 1.0 / SQRT2;
    match label {
        PairLabel::S => vec![(h, 0, 1), (-h, 1, 0)],
        PairLabel::T0 => vec![(h, 0, 1), (h, 1, 0)],
        PairLabel::TPlus => vec![(1.0, 0, 0)],
        PairLabel::TMinus => vec![(1.0, 1, 1)],
    }
}

/// Real 16-dim ket of a pair product state, without validation.
pub(crate) fn product_ket(a: PairState, b: PairState) -> DVector<f64> {
    let (ai, aj) = a.pair.dots();
    let (bi, bj) = b.pair.dots();
    let mut v = DVector::zeros(FULL_DIM);
    for (ca, si, sj) in pair_terms(a.label) {
        for (cb, sk, sl) in pair_terms(b.label) {
            let idx = (si << ai) | (sj << aj) | (sk << bi) | (sl << bj);
            v[idx] += ca * cb;
        }
    }
    v
}

fn ps(pair: Pair, label: PairLabel) -> PairState {
    PairState::new(pair, label)
}

/// Total-spin singlet built from two triplets on the given pairs.
fn triplet_pair_singlet(p: Pair, q: Pair) -> DVector<f64> {
    use PairLabel::*;
    (product_ket(ps(p, TPlus), ps(q, TMinus)) + product_ket(ps(p, TMinus), ps(q, TPlus))
        - product_ket(ps(p, T0), ps(q, T0)))
        / 3f64.sqrt()
}

/// Orthonormal kets (16-dim, real) spanning the given basis, in documented order.
pub fn basis_kets(basis: BasisLabel) -> Vec<DVector<f64>> {
    use PairLabel::*;
    match basis {
        BasisLabel::Full16 => (0..FULL_DIM)
            .map(|k| {
                let mut v = DVector::zeros(FULL_DIM);
                v[k] = 1.0;
                v
            })
            .collect(),
        BasisLabel::GlobalSinglet2 => vec![
            product_ket(ps(Pair::Q12, S), ps(Pair::Q34, S)),
            triplet_pair_singlet(Pair::Q12, Pair::Q34),
        ],
        BasisLabel::GlobalSinglet2Y => vec![
            product_ket(ps(Pair::Q14, S), ps(Pair::Q23, S)),
            triplet_pair_singlet(Pair::Q14, Pair::Q23),
        ],
        BasisLabel::TripletMinus3 | BasisLabel::TripletMinusPlusQ4 => {
            let t0m = product_ket(ps(Pair::Q12, T0), ps(Pair::Q34, TMinus));
            let tm0 = product_ket(ps(Pair::Q12, TMinus), ps(Pair::Q34, T0));
            let mut kets = vec![
                product_ket(ps(Pair::Q12, S), ps(Pair::Q34, TMinus)),
                product_ket(ps(Pair::Q12, TMinus), ps(Pair::Q34, S)),
                (&t0m - &tm0) / SQRT2,
            ];
            if basis == BasisLabel::TripletMinusPlusQ4 {
                kets.push((t0m + tm0) / SQRT2);
            }
            kets
        }
    }
}

/// Isometry from the full space onto `basis`: a `dim × 16` real matrix whose
/// rows are the basis kets. For `Full16` this is the identity.
pub fn subspace_projector(basis: BasisLabel) -> DMatrix<f64> {
    let kets = basis_kets(basis);
    DMatrix::from_fn(kets.len(), FULL_DIM, |r, c| kets[r][c])
}

/// A normalized state over one of the working bases.
#[derive(Clone, Debug, PartialEq)]
pub struct SpinState {
    basis: BasisLabel,
    amplitudes: DVector<Complex64>,
    norm_tolerance: f64,
}

impl SpinState {
    pub fn new(basis: BasisLabel, amplitudes: DVector<Complex64>) -> Result<Self> {
        Self::with_tolerance(basis, amplitudes, NORM_TOLERANCE)
    }

    pub fn with_tolerance(
        basis: BasisLabel,
        amplitudes: DVector<Complex64>,
        norm_tolerance: f64,
    ) -> Result<Self> {
        if amplitudes.len() != basis.dim() {
            return Err(Error::DimensionMismatch {
                expected: basis.dim(),
                got: amplitudes.len(),
            });
        }
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > norm_tolerance {
            return Err(Error::NotNormalized { norm });
        }
        Ok(Self {
            basis,
            amplitudes,
            norm_tolerance,
        })
    }

    pub fn from_real(basis: BasisLabel, amplitudes: &[f64]) -> Result<Self> {
        let v = DVector::from_iterator(
            amplitudes.len(),
            amplitudes.iter().map(|&a| Complex64::new(a, 0.0)),
        );
        Self::new(basis, v)
    }

    /// Rescales to unit norm. Fails only for the zero vector.
    pub fn normalized(basis: BasisLabel, amplitudes: DVector<Complex64>) -> Result<Self> {
        let norm = amplitudes.norm();
        if norm == 0.0 {
            return Err(Error::NotNormalized { norm });
        }
        Self::new(basis, amplitudes.unscale(norm))
    }

    /// Basis vector `k` of `basis`.
    pub fn basis_state(basis: BasisLabel, k: usize) -> Result<Self> {
        if k >= basis.dim() {
            return Err(Error::DimensionMismatch {
                expected: basis.dim(),
                got: k + 1,
            });
        }
        let mut v = DVector::zeros(basis.dim());
        v[k] = Complex64::new(1.0, 0.0);
        Self::new(basis, v)
    }

    pub fn basis(&self) -> BasisLabel {
        self.basis
    }

    pub fn amplitudes(&self) -> &DVector<Complex64> {
        &self.amplitudes
    }

    pub fn norm_tolerance(&self) -> f64 {
        self.norm_tolerance
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    /// Embeds the state in the 16-dim product basis.
    pub fn to_full(&self) -> SpinState {
        if self.basis == BasisLabel::Full16 {
            return self.clone();
        }
        let p = subspace_projector(self.basis).map(|x| Complex64::new(x, 0.0));
        SpinState {
            basis: BasisLabel::Full16,
            amplitudes: p.transpose() * &self.amplitudes,
            norm_tolerance: self.norm_tolerance,
        }
    }

    /// Coordinates of the state's component inside `basis` (not renormalized).
    pub fn components_in(&self, basis: BasisLabel) -> DVector<Complex64> {
        let full = self.to_full();
        let p = subspace_projector(basis).map(|x| Complex64::new(x, 0.0));
        p * full.amplitudes
    }

    /// Weight outside `basis`: `1 − ‖P ψ‖²`.
    pub fn leakage(&self, basis: BasisLabel) -> f64 {
        (1.0 - self.components_in(basis).norm_squared()).max(0.0)
    }

    /// Re-expresses the state in `basis`; fails if it has weight outside it.
    pub fn project_onto(&self, basis: BasisLabel) -> Result<SpinState> {
        Self::with_tolerance(basis, self.components_in(basis), self.norm_tolerance)
    }

    /// `⟨self|other⟩`, evaluated in the full space when bases differ.
    pub fn inner(&self, other: &SpinState) -> Complex64 {
        if self.basis == other.basis {
            self.amplitudes.dotc(&other.amplitudes)
        } else {
            self.to_full().amplitudes.dotc(&other.to_full().amplitudes)
        }
    }

    pub fn overlap_probability(&self, other: &SpinState) -> f64 {
        self.inner(other).norm_sqr()
    }
}

/// Normalized tensor product of two pair states covering all four dots.
pub fn build_pair_product_state(a: PairState, b: PairState) -> Result<SpinState> {
    let (ai, aj) = a.pair.dots();
    let (bi, bj) = b.pair.dots();
    if ai == bi || ai == bj || aj == bi || aj == bj {
        return Err(Error::InvalidPair(format!(
            "{:?} and {:?} share a dot",
            a.pair, b.pair
        )));
    }
    let v = product_ket(a, b).map(|x| Complex64::new(x, 0.0));
    SpinState::new(BasisLabel::Full16, v)
}

/// `|S_x⟩ = |S12 S34⟩` in the x-convention singlet basis.
pub fn singlet_x() -> SpinState {
    SpinState::from_real(BasisLabel::GlobalSinglet2, &[1.0, 0.0]).expect("unit vector")
}

/// `|S_y⟩ = |S14 S23⟩` expressed in the x-convention singlet basis.
pub fn singlet_y() -> SpinState {
    let h = 0.5;
    let r = 3f64.sqrt() / 2.0;
    // inverse of the x→y rotation applied to (1, 0)
    SpinState::from_real(BasisLabel::GlobalSinglet2, &[-h, r]).expect("unit vector")
}

/// s-wave RVB state `(−√3/2, 1/2)`, ground state at `Jx = Jy`.
pub fn s_wave() -> SpinState {
    SpinState::from_real(BasisLabel::GlobalSinglet2, &[-(3f64.sqrt()) / 2.0, 0.5])
        .expect("unit vector")
}

/// d-wave RVB state `(1/2, √3/2)`, excited state at `Jx = Jy`.
pub fn d_wave() -> SpinState {
    SpinState::from_real(BasisLabel::GlobalSinglet2, &[0.5, 3f64.sqrt() / 2.0])
        .expect("unit vector")
}

/// Matrix taking x-convention singlet coordinates to y-convention ones.
pub fn singlet_xy_rotation() -> DMatrix<f64> {
    let r = 3f64.sqrt() / 2.0;
    DMatrix::from_row_slice(2, 2, &[-0.5, r, -r, -0.5])
}

/// Rewrites a `GlobalSinglet2` state in the `GlobalSinglet2Y` basis.
pub fn change_basis_singlet_xy(state: &SpinState) -> Result<SpinState> {
    if state.basis() != BasisLabel::GlobalSinglet2 {
        return Err(Error::Domain(format!(
            "expected a GlobalSinglet2 state, got {:?}",
            state.basis()
        )));
    }
    let m = singlet_xy_rotation().map(|x| Complex64::new(x, 0.0));
    SpinState::with_tolerance(
        BasisLabel::GlobalSinglet2Y,
        m * state.amplitudes(),
        state.norm_tolerance(),
    )
}

/// `S_i · S_j` for spin-1/2 operators in the product basis.
pub fn spin_dot(i: usize, j: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(FULL_DIM, FULL_DIM);
    for idx in 0..FULL_DIM {
        let bi = idx >> i & 1;
        let bj = idx >> j & 1;
        m[(idx, idx)] += if bi == bj { 0.25 } else { -0.25 };
        if bi != bj {
            let flipped = idx ^ (1 << i) ^ (1 << j);
            m[(flipped, idx)] += 0.5;
        }
    }
    m
}

/// `S_z` of dot `k` (diagonal).
pub fn spin_z(k: usize) -> DMatrix<f64> {
    DMatrix::from_fn(FULL_DIM, FULL_DIM, |r, c| {
        if r == c {
            if r >> k & 1 == 0 {
                0.5
            } else {
                -0.5
            }
        } else {
            0.0
        }
    })
}

/// `(S_tot², S_z,tot)` on the full space, ħ = 1.
pub fn total_spin_operators() -> (DMatrix<f64>, DMatrix<f64>) {
    let mut s2 = DMatrix::identity(FULL_DIM, FULL_DIM) * (4.0 * 0.75);
    for i in 0..4 {
        for j in (i + 1)..4 {
            s2 += spin_dot(i, j) * 2.0;
        }
    }
    let sz = (0..4).fold(DMatrix::zeros(FULL_DIM, FULL_DIM), |acc, k| acc + spin_z(k));
    (s2, sz)
}
