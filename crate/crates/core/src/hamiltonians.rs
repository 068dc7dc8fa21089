// SPDX-License-Identifier: Apache-2.0

//! Heisenberg and Zeeman Hamiltonians, closed-form subspace matrices and the
//! double-dot S/T⁻ energy model. All energies are in MHz (energy/h).

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spin::{self, product_ket, BasisLabel, Pair, PairLabel, PairState, FULL_DIM};

/// Bohr magneton over Planck's constant, MHz/mT.
pub const MU_B_OVER_H: f64 = 13.996;

/// Measured upper bound on the S/T⁻ spin-orbit gap at 1 mT, MHz.
pub const SPIN_ORBIT_GAP_BOUND: f64 = 2.0;

/// Upper bound on hyperfine Zeeman noise, MHz.
pub const HYPERFINE_BOUND: f64 = 0.48;

/// Nearest-neighbour exchange couplings in MHz.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExchangeConfig {
    pub j12: f64,
    pub j34: f64,
    pub j23: f64,
    pub j14: f64,
}

impl ExchangeConfig {
    pub fn new(j12: f64, j34: f64, j23: f64, j14: f64) -> Result<Self> {
        let cfg = Self { j12, j34, j23, j14 };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Balanced pairs: `J12 = J34 = Jx/2`, `J23 = J14 = Jy/2`.
    pub fn balanced(jx: f64, jy: f64) -> Result<Self> {
        Self::new(jx / 2.0, jx / 2.0, jy / 2.0, jy / 2.0)
    }

    /// Builds from sums and imbalances.
    pub fn from_sums(jx: f64, jy: f64, delta_x: f64, delta_y: f64) -> Result<Self> {
        Self::new(
            (jx + delta_x) / 2.0,
            (jx - delta_x) / 2.0,
            (jy + delta_y) / 2.0,
            (jy - delta_y) / 2.0,
        )
    }

    pub fn zero() -> Self {
        Self {
            j12: 0.0,
            j34: 0.0,
            j23: 0.0,
            j14: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in self.named() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Domain(format!("coupling {name} = {v} must be >= 0")));
            }
        }
        Ok(())
    }

    pub fn named(&self) -> [(&'static str, f64); 4] {
        [
            ("J12", self.j12),
            ("J34", self.j34),
            ("J23", self.j23),
            ("J14", self.j14),
        ]
    }

    pub fn jx(&self) -> f64 {
        self.j12 + self.j34
    }

    pub fn jy(&self) -> f64 {
        self.j14 + self.j23
    }

    pub fn delta_x(&self) -> f64 {
        self.j12 - self.j34
    }

    pub fn delta_y(&self) -> f64 {
        self.j23 - self.j14
    }

    pub fn get(&self, pair: Pair) -> f64 {
        match pair {
            Pair::Q12 => self.j12,
            Pair::Q34 => self.j34,
            Pair::Q23 => self.j23,
            Pair::Q14 => self.j14,
        }
    }

    pub fn with(&self, pair: Pair, value: f64) -> Self {
        let mut out = *self;
        match pair {
            Pair::Q12 => out.j12 = value,
            Pair::Q34 => out.j34 = value,
            Pair::Q23 => out.j23 = value,
            Pair::Q14 => out.j14 = value,
        }
        out
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            j12: self.j12 * factor,
            j34: self.j34 * factor,
            j23: self.j23 * factor,
            j14: self.j14 * factor,
        }
    }
}

/// Static in-plane field and per-dot g-factors.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZeemanConfig {
    pub b_mt: f64,
    pub g: [f64; 4],
}

impl Default for ZeemanConfig {
    fn default() -> Self {
        Self {
            b_mt: 1.0,
            g: [0.14, 0.24, 0.23, 0.26],
        }
    }
}

impl ZeemanConfig {
    /// `B·μB/h` in MHz per unit g.
    pub fn scale(&self) -> f64 {
        self.b_mt * MU_B_OVER_H
    }
}

/// Two-dot charge model near the (2,0)/(1,1) transition.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoubleDotModel {
    /// Tunnel coupling, MHz.
    pub tc: f64,
    /// Sum of the two g-factors.
    pub sum_g: f64,
    pub b_mt: f64,
    /// S/T⁻ gap bound, MHz; carried for reporting only.
    pub delta_so: f64,
    /// Detuning at which the (1,1) sector ends, MHz.
    pub eps_max: f64,
}

impl Default for DoubleDotModel {
    fn default() -> Self {
        Self {
            tc: 10.0,
            sum_g: 0.49,
            b_mt: 1.0,
            delta_so: SPIN_ORBIT_GAP_BOUND,
            eps_max: 1000.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoubleDotEnergies {
    pub e_s: f64,
    pub e_t0: f64,
    pub e_tplus: f64,
    pub e_tminus: f64,
}

/// `H_J = Σ J_ij (S_i·S_j − 1/4)` over the four nearest-neighbour bonds.
pub fn build_hj_full(j: &ExchangeConfig) -> Result<DMatrix<f64>> {
    j.validate()?;
    let mut h = DMatrix::zeros(FULL_DIM, FULL_DIM);
    let id = DMatrix::<f64>::identity(FULL_DIM, FULL_DIM);
    for pair in Pair::ALL {
        let jij = j.get(pair);
        if jij != 0.0 {
            let (a, b) = pair.dots();
            h += (spin::spin_dot(a, b) - &id * 0.25) * jij;
        }
    }
    Ok(h)
}

/// Singlet-subspace Hamiltonian in the `GlobalSinglet2` basis.
pub fn build_hs(jx: f64, jy: f64) -> Result<DMatrix<f64>> {
    if !(jx >= 0.0 && jy >= 0.0) {
        return Err(Error::Domain(format!("Jx = {jx}, Jy = {jy} must be >= 0")));
    }
    let c = 3f64.sqrt() / 4.0 * jy;
    Ok(DMatrix::from_row_slice(
        2,
        2,
        &[-jx - jy / 4.0, c, c, -0.75 * jy],
    ))
}

/// `m = −1` triplet-sector Hamiltonian in the `TripletMinus3` basis, as
/// usually printed. The (1,0) entry is taken equal to (0,1) so the matrix is
/// Hermitian.
///
/// With the third ket defined as `(|T⁰T⁻⟩ − |T⁻T⁰⟩)/√2` the true projection
/// of `H_J` differs from this matrix by the sign of the `δy` entries, i.e. by
/// the gauge `D = diag(1, 1, −1)`. [`build_ht_projected`] returns that form.
pub fn build_ht(j: &ExchangeConfig) -> Result<DMatrix<f64>> {
    j.validate()?;
    let (jx, jy, dx, dy) = (j.jx(), j.jy(), j.delta_x(), j.delta_y());
    let c = -dy / (2.0 * 2f64.sqrt());
    Ok(DMatrix::from_row_slice(
        3,
        3,
        &[
            -(jx + dx) / 2.0 - jy / 4.0,
            -jy / 4.0,
            c,
            -jy / 4.0,
            -(jx - dx) / 2.0 - jy / 4.0,
            c,
            c,
            c,
            -jy / 2.0,
        ],
    ))
}

/// `build_ht` in the gauge of the documented `TripletMinus3` kets.
pub fn build_ht_projected(j: &ExchangeConfig) -> Result<DMatrix<f64>> {
    let mut h = build_ht(j)?;
    for k in 0..2 {
        h[(k, 2)] = -h[(k, 2)];
        h[(2, k)] = -h[(2, k)];
    }
    Ok(h)
}

/// Orthogonal change of basis from the natural triplet basis to
/// `{(a−b)/√2, (a+b)/√2, c}`; rows are the new kets.
pub fn triplet_rotation() -> DMatrix<f64> {
    let h = 1.0 / 2f64.sqrt();
    DMatrix::from_row_slice(3, 3, &[h, -h, 0.0, h, h, 0.0, 0.0, 0.0, 1.0])
}

/// Rotated triplet Hamiltonian split into its diagonal part and the
/// imbalance-only coupling: `(H_T′, H0, V)`.
pub fn build_ht_prime(j: &ExchangeConfig) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
    j.validate()?;
    let (jx, jy, dx, dy) = (j.jx(), j.jy(), j.delta_x(), j.delta_y());
    let h0 = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
        -jx / 2.0,
        -(jx + jy) / 2.0,
        -jy / 2.0,
    ]));
    let v = DMatrix::from_row_slice(
        3,
        3,
        &[0.0, -dx / 2.0, 0.0, -dx / 2.0, 0.0, -dy / 2.0, 0.0, -dy / 2.0, 0.0],
    );
    Ok((&h0 + &v, h0, v))
}

/// `H_Z = Σ g_i (μB/h) B S_z,i`, diagonal in the product basis.
pub fn build_hz_full(z: &ZeemanConfig) -> DMatrix<f64> {
    let s = z.scale();
    let mut h = DMatrix::zeros(FULL_DIM, FULL_DIM);
    for idx in 0..FULL_DIM {
        h[(idx, idx)] = (0..4)
            .map(|k| z.g[k] * s * if idx >> k & 1 == 0 { 0.5 } else { -0.5 })
            .sum();
    }
    h
}

/// Kets named in the Zeeman element table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SectorKet {
    /// `|S12 S34⟩`.
    S0,
    /// `(|T⁺T⁻⟩ + |T⁻T⁺⟩ − |T⁰T⁰⟩)/√3` on Q12/Q34.
    S1,
    /// `|S12 T⁰34⟩`.
    T0Zero,
    /// `|T⁰12 S34⟩`.
    T0One,
    /// `(|T⁺12T⁻34⟩ − |T⁻12T⁺34⟩)/√2`.
    T0Two,
    /// `|S12 T⁻34⟩`.
    TmZero,
    /// `|T⁻12 S34⟩`.
    TmOne,
    /// `(|T⁰12T⁻34⟩ − |T⁻12T⁰34⟩)/√2`.
    TmTwo,
    /// `(|T⁰12T⁻34⟩ + |T⁻12T⁰34⟩)/√2`.
    QMinus,
}

impl SectorKet {
    pub fn ket(self) -> nalgebra::DVector<f64> {
        use PairLabel::*;
        let p = |a, b, c, d| product_ket(PairState::new(a, b), PairState::new(c, d));
        let r2 = 2f64.sqrt();
        match self {
            SectorKet::S0 => spin::basis_kets(BasisLabel::GlobalSinglet2)[0].clone(),
            SectorKet::S1 => spin::basis_kets(BasisLabel::GlobalSinglet2)[1].clone(),
            SectorKet::T0Zero => p(Pair::Q12, S, Pair::Q34, T0),
            SectorKet::T0One => p(Pair::Q12, T0, Pair::Q34, S),
            SectorKet::T0Two => {
                (p(Pair::Q12, TPlus, Pair::Q34, TMinus) - p(Pair::Q12, TMinus, Pair::Q34, TPlus))
                    / r2
            }
            SectorKet::TmZero => p(Pair::Q12, S, Pair::Q34, TMinus),
            SectorKet::TmOne => p(Pair::Q12, TMinus, Pair::Q34, S),
            SectorKet::TmTwo => {
                (p(Pair::Q12, T0, Pair::Q34, TMinus) - p(Pair::Q12, TMinus, Pair::Q34, T0)) / r2
            }
            SectorKet::QMinus => {
                (p(Pair::Q12, T0, Pair::Q34, TMinus) + p(Pair::Q12, TMinus, Pair::Q34, T0)) / r2
            }
        }
    }
}

/// One closed-form matrix element `⟨bra|H_Z|ket⟩` in MHz.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZeemanElement {
    pub bra: SectorKet,
    pub ket: SectorKet,
    pub value: f64,
}

/// The fifteen sector matrix elements of `H_Z` in closed form.
///
/// Singlet couplings go to the `m = 0` triplets; the diagonal and intra-sector
/// entries use the `m = −1` kets; the last three couple to `|Q⁻⟩`.
pub fn zeeman_sector_elements(z: &ZeemanConfig) -> Vec<ZeemanElement> {
    use SectorKet::*;
    let s = z.scale();
    let [g1, g2, g3, g4] = z.g;
    let r2 = 2f64.sqrt();
    let r3 = 3f64.sqrt();
    let r6 = 6f64.sqrt();
    let el = |bra, ket, value: f64| ZeemanElement {
        bra,
        ket,
        value: value * s,
    };
    vec![
        el(T0Zero, S0, 0.5 * (g3 - g4)),
        el(T0One, S0, 0.5 * (g1 - g2)),
        el(T0Two, S0, 0.0),
        el(T0Zero, S1, (g2 - g1) / (2.0 * r3)),
        el(T0One, S1, (g4 - g3) / (2.0 * r3)),
        el(T0Two, S1, (g1 + g2 - g3 - g4) / r6),
        el(TmZero, TmZero, -0.5 * (g3 + g4)),
        el(TmOne, TmZero, 0.0),
        el(TmTwo, TmZero, (g1 - g2) / (2.0 * r2)),
        el(TmOne, TmOne, -0.5 * (g1 + g2)),
        el(TmTwo, TmOne, (g4 - g3) / (2.0 * r2)),
        el(TmTwo, TmTwo, -0.25 * (g1 + g2 + g3 + g4)),
        el(QMinus, TmTwo, 0.25 * (g1 + g2 - g3 - g4)),
        el(QMinus, TmOne, (g3 - g4) / (2.0 * r2)),
        el(QMinus, TmZero, (g1 - g2) / (2.0 * r2)),
    ]
}

/// Energies of the (1,1) singlet and the three triplets at detuning `eps` (MHz).
pub fn double_dot_energies(m: &DoubleDotModel, eps: f64) -> Result<DoubleDotEnergies> {
    if !(m.tc > 0.0) {
        return Err(Error::Domain(format!("tunnel coupling {} must be > 0", m.tc)));
    }
    let ez = 0.5 * m.sum_g * MU_B_OVER_H * m.b_mt;
    Ok(DoubleDotEnergies {
        e_s: eps / 2.0 - (eps * eps / 4.0 + 2.0 * m.tc * m.tc).sqrt(),
        e_t0: 0.0,
        e_tplus: ez,
        e_tminus: -ez,
    })
}

/// Detuning where the singlet meets `T⁻`, or `None` when the singlet stays the
/// ground state up to `eps_max`.
pub fn find_anticrossing(m: &DoubleDotModel) -> Result<Option<f64>> {
    double_dot_energies(m, 0.0)?;
    let ez = 0.5 * m.sum_g * MU_B_OVER_H * m.b_mt;
    if ez <= 0.0 {
        return Ok(None);
    }
    // E_S(ε) = −E_z has the single root below; E_S increases monotonically.
    let eps = (2.0 * m.tc * m.tc - ez * ez) / ez;
    Ok((eps <= m.eps_max).then_some(eps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::{subspace_projector, total_spin_operators};
    use nalgebra::{DVector, SymmetricEigen};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_j(rng: &mut ChaCha8Rng) -> ExchangeConfig {
        ExchangeConfig::new(
            rng.random_range(0.0..60.0),
            rng.random_range(0.0..60.0),
            rng.random_range(0.0..60.0),
            rng.random_range(0.0..60.0),
        )
        .unwrap()
    }

    fn sorted_eigs(m: DMatrix<f64>) -> Vec<f64> {
        let mut e: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
        e.sort_by(f64::total_cmp);
        e
    }

    #[test]
    fn negative_coupling_rejected() {
        assert!(ExchangeConfig::new(-1.0, 0.0, 0.0, 0.0).is_err());
        let bad = ExchangeConfig {
            j12: 1.0,
            j34: -0.5,
            j23: 0.0,
            j14: 0.0,
        };
        assert!(build_hj_full(&bad).is_err());
    }

    #[test]
    fn derived_quantities() {
        let j = ExchangeConfig::new(26.0, 24.0, 30.0, 30.0).unwrap();
        assert_eq!(j.jx(), 50.0);
        assert_eq!(j.jy(), 60.0);
        assert_eq!(j.delta_x(), 2.0);
        assert_eq!(j.delta_y(), 0.0);
        let k = ExchangeConfig::from_sums(50.0, 60.0, 2.0, -3.0).unwrap();
        assert!((k.j12 - 26.0).abs() < 1e-15 && (k.j14 - 31.5).abs() < 1e-15);
    }

    #[test]
    fn zero_coupling_gives_zero_matrix() {
        let h = build_hj_full(&ExchangeConfig::zero()).unwrap();
        assert_eq!(h.abs().max(), 0.0);
    }

    #[test]
    fn hj_conserves_total_spin() {
        let (s2, sz) = total_spin_operators();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let h = build_hj_full(&random_j(&mut rng)).unwrap();
            assert!((&h - h.transpose()).abs().max() < 1e-12);
            assert!((&h * &s2 - &s2 * &h).abs().max() < 1e-12);
            assert!((&h * &sz - &sz * &h).abs().max() < 1e-12);
        }
    }

    #[test]
    fn hj_has_no_diagonal_bonds() {
        // Only Q1-Q3 and Q2-Q4 would flip these two configurations into each other.
        let h = build_hj_full(&ExchangeConfig::new(7.0, 5.0, 3.0, 2.0).unwrap()).unwrap();
        // |↑↓↑↓⟩ ↔ |↓↑↓↑⟩ differ on every site; no single bond connects them
        let a = 0b1010;
        let b = 0b0101;
        assert_eq!(h[(a, b)], 0.0);
        // Q1Q3 flip: |↑↑↓↑⟩ (dot 3 down) ↔ |↓↑↑↑⟩ (dot 1 down)
        assert_eq!(h[(0b0100, 0b0001)], 0.0);
    }

    #[test]
    fn hs_matches_projection_for_balanced_pairs() {
        let p = subspace_projector(BasisLabel::GlobalSinglet2);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let jx: f64 = rng.random_range(0.0..120.0);
            let jy: f64 = rng.random_range(0.0..120.0);
            let j = ExchangeConfig::balanced(jx, jy).unwrap();
            let proj = &p * build_hj_full(&j).unwrap() * p.transpose();
            let err = (proj - build_hs(jx, jy).unwrap()).abs().max();
            assert!(err < 1e-12, "{err}");
        }
    }

    #[test]
    fn sx_expectation_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sx = spin::basis_kets(BasisLabel::GlobalSinglet2)[0].clone();
        for _ in 0..20 {
            let j = random_j(&mut rng);
            let e = sx.dot(&(build_hj_full(&j).unwrap() * &sx));
            assert!((e - (-j.jx() - j.jy() / 4.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn hs_example_values() {
        let h = build_hs(50.0, 50.0).unwrap();
        assert!((h[(0, 0)] + 62.5).abs() < 1e-12);
        assert!((h[(0, 1)] - 21.650635094610966).abs() < 1e-12);
        assert!((h[(1, 1)] + 37.5).abs() < 1e-12);
        let h = build_hs(30.0, 0.0).unwrap();
        assert_eq!(h[(0, 1)], 0.0);
        assert_eq!(h[(0, 0)], -30.0);
    }

    #[test]
    fn hs_ground_state_at_equal_exchange() {
        let eig = SymmetricEigen::new(build_hs(40.0, 40.0).unwrap());
        let k = eig.eigenvalues.imin();
        let v = eig.eigenvectors.column(k);
        let sign = if v[1] > 0.0 { 1.0 } else { -1.0 };
        assert!((sign * v[0] + 3f64.sqrt() / 2.0).abs() < 1e-12);
        assert!((sign * v[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn hs_gap_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let jx: f64 = rng.random_range(0.0..120.0);
            let jy: f64 = rng.random_range(0.0..120.0);
            let e = sorted_eigs(build_hs(jx, jy).unwrap());
            let gap = (jx * jx - jx * jy + jy * jy).sqrt();
            assert!((e[1] - e[0] - gap).abs() < 1e-10);
        }
    }

    #[test]
    fn ht_rotation_gives_prime_form() {
        let r = triplet_rotation();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let j = random_j(&mut rng);
            let rotated = &r * build_ht(&j).unwrap() * r.transpose();
            let (hp, h0, v) = build_ht_prime(&j).unwrap();
            assert!((&rotated - &hp).abs().max() < 1e-12);
            assert!((&h0 + &v - &hp).abs().max() < 1e-15);
            for k in 0..3 {
                assert_eq!(v[(k, k)], 0.0);
                for l in 0..3 {
                    if k != l {
                        assert_eq!(h0[(k, l)], 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn ht_diagonal_when_balanced() {
        let j = ExchangeConfig::new(10.0, 10.0, 20.0, 20.0).unwrap();
        let r = triplet_rotation();
        let rotated = &r * build_ht(&j).unwrap() * r.transpose();
        let expect = [-10.0, -30.0, -20.0];
        for k in 0..3 {
            assert!((rotated[(k, k)] - expect[k]).abs() < 1e-12);
        }
        assert!(rotated[(1, 2)].abs() < 1e-15 && rotated[(0, 1)].abs() < 1e-15);
    }

    #[test]
    fn ht_matches_projection() {
        let p = subspace_projector(BasisLabel::TripletMinus3);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..20 {
            let j = random_j(&mut rng);
            let proj = &p * build_hj_full(&j).unwrap() * p.transpose();
            let a = sorted_eigs(proj.clone());
            let b = sorted_eigs(build_ht(&j).unwrap());
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-12);
            }
            assert!((proj - build_ht_projected(&j).unwrap()).abs().max() < 1e-12);
        }
    }

    #[test]
    fn hz_is_diagonal() {
        let h = build_hz_full(&ZeemanConfig::default());
        for r in 0..16 {
            for c in 0..16 {
                if r != c {
                    assert_eq!(h[(r, c)], 0.0);
                }
            }
        }
        let z = ZeemanConfig::default();
        let sum: f64 = z.g.iter().sum();
        assert!((h[(15, 15)] + 0.5 * sum * z.scale()).abs() < 1e-12);
    }

    fn bra_ket(h: &DMatrix<f64>, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        a.dot(&(h * b))
    }

    #[test]
    fn zeeman_elements_match_projections() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut configs = vec![ZeemanConfig::default()];
        for _ in 0..10 {
            configs.push(ZeemanConfig {
                b_mt: rng.random_range(0.1..5.0),
                g: [
                    rng.random_range(0.0..1.0),
                    rng.random_range(0.0..1.0),
                    rng.random_range(0.0..1.0),
                    rng.random_range(0.0..1.0),
                ],
            });
        }
        for z in configs {
            let h = build_hz_full(&z);
            let els = zeeman_sector_elements(&z);
            assert_eq!(els.len(), 15);
            for e in els {
                let direct = bra_ket(&h, &e.bra.ket(), &e.ket.ket());
                assert!(
                    (direct - e.value).abs() < 1e-12,
                    "{:?}|{:?}: {direct} vs {}",
                    e.bra,
                    e.ket,
                    e.value
                );
            }
        }
    }

    #[test]
    fn zeeman_reference_values() {
        let z = ZeemanConfig::default();
        let els = zeeman_sector_elements(&z);
        let find = |b, k| els.iter().find(|e| e.bra == b && e.ket == k).unwrap().value;
        assert!((find(SectorKet::T0One, SectorKet::S0) + 0.6998).abs() < 1e-12);
        let expect = (0.14 + 0.24 - 0.23 - 0.26) / 6f64.sqrt() * 13.996;
        assert!((find(SectorKet::T0Two, SectorKet::S1) - expect).abs() < 1e-12);
        let expect = (0.23 - 0.26) / (2.0 * 2f64.sqrt()) * 13.996;
        assert!((find(SectorKet::QMinus, SectorKet::TmOne) - expect).abs() < 1e-12);
        assert_eq!(find(SectorKet::T0Two, SectorKet::S0), 0.0);
        let max = els.iter().map(|e| e.value.abs()).fold(0.0, f64::max);
        assert!(max < 4.0, "{max}");
    }

    #[test]
    fn equal_g_decouples_singlets() {
        let z = ZeemanConfig {
            b_mt: 2.0,
            g: [0.3; 4],
        };
        let h = build_hz_full(&z);
        let p = subspace_projector(BasisLabel::GlobalSinglet2);
        // H_Z maps the singlet sector to zero when all g are equal
        let leak = &h * p.transpose();
        assert!(leak.abs().max() < 1e-12);
    }

    #[test]
    fn double_dot_energy_model() {
        let m = DoubleDotModel {
            tc: 5.0,
            ..Default::default()
        };
        let e = double_dot_energies(&m, 0.0).unwrap();
        assert!((e.e_s + 2f64.sqrt() * 5.0).abs() < 1e-12);
        assert_eq!(e.e_t0, 0.0);
        assert!((e.e_tplus + e.e_tminus).abs() < 1e-15);
        assert!(double_dot_energies(&DoubleDotModel { tc: 0.0, ..m }, 0.0).is_err());
    }

    #[test]
    fn anticrossing_root_and_tc_trend() {
        let zero_field = DoubleDotModel {
            b_mt: 0.0,
            ..Default::default()
        };
        assert_eq!(find_anticrossing(&zero_field).unwrap(), None);

        let mut last = f64::NEG_INFINITY;
        let mut removed = false;
        for tc in [1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0] {
            let m = DoubleDotModel {
                tc,
                eps_max: 500.0,
                ..Default::default()
            };
            match find_anticrossing(&m).unwrap() {
                Some(eps) => {
                    assert!(!removed);
                    assert!(eps > last);
                    last = eps;
                    // bisection oracle on E_S + E_z
                    let f = |x: f64| {
                        let e = double_dot_energies(&m, x).unwrap();
                        e.e_s - e.e_tminus
                    };
                    let (mut lo, mut hi) = (-1e4, 1e4);
                    for _ in 0..200 {
                        let mid = 0.5 * (lo + hi);
                        if f(mid) < 0.0 {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                    assert!((lo - eps).abs() < 1e-8 * eps.abs().max(1.0));
                }
                None => removed = true,
            }
        }
        assert!(removed);
    }
}
