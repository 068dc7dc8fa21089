// SPDX-License-Identifier: Apache-2.0

//! Gate-voltage control layer: virtual gate matrices, the exponential
//! exchange model, compensation pulses and calibration-error propagation.
//! Voltages are in mV, couplings in MHz.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonians::ExchangeConfig;

/// Default lever-arm of the exponential exchange model, 1/mV.
pub const DEFAULT_KAPPA: f64 = 0.059;
/// Vertical-barrier compensation applied per mV of symmetric horizontal pulse.
pub const COMPENSATION_FACTOR: f64 = 0.18;
/// Largest `κ|δV|` the exponential model is trusted for.
pub const MODEL_GUARD: f64 = 3.0;

const PLUNGER: [f64; 36] = [
    1.0, -0.28, 0.03, -0.2, -0.14, 0.0, //
    -0.26, 1.0, -0.27, -0.01, 0.0, -0.02, //
    0.02, -0.2, 1.0, -0.29, 0.0, -0.08, //
    -0.48, -0.03, -0.31, 1.0, 0.0, 0.0, //
    -0.12, -0.03, -0.01, -0.02, 1.0, 0.0, //
    0.0, 0.0, -0.12, -0.03, 0.0, 1.0,
];

#[allow(clippy::approx_constant)]
const BARRIER: [f64; 36] = [
    -0.564, 0.042, 0.076, -0.181, //
    -1.296, 0.492, -1.212, 0.713, //
    0.048, -0.554, -0.16, -0.062, //
    0.65, -1.207, 0.954, -1.57, //
    1.0, -0.149, 0.191, -0.457, //
    -0.227, 1.0, -0.56, 0.324, //
    0.232, -0.298, 1.0, -0.228, //
    -0.289, 0.115, -0.318, 1.0, //
    -0.012, 0.015, -0.05, 0.011,
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GateKind {
    Plunger,
    Barrier,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VirtualGateMatrix {
    pub kind: GateKind,
    pub matrix: DMatrix<f64>,
    pub input_labels: Vec<String>,
    pub output_labels: Vec<String>,
}

fn labels(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

impl VirtualGateMatrix {
    /// Device default for `kind`.
    pub fn default_for(kind: GateKind) -> Self {
        match kind {
            GateKind::Plunger => Self {
                kind,
                matrix: DMatrix::from_row_slice(6, 6, &PLUNGER),
                input_labels: labels(&["vP1", "vP2", "vP3", "vP4", "vP_SHT1", "vP_SHT2"]),
                output_labels: labels(&["P1", "P2", "P3", "P4", "P_SHT1", "P_SHT2"]),
            },
            GateKind::Barrier => Self {
                kind,
                matrix: DMatrix::from_row_slice(9, 4, &BARRIER),
                input_labels: labels(&["vB12", "vB34", "vB23", "vB14"]),
                output_labels: labels(&[
                    "P1", "P2", "P3", "P4", "B12", "B34", "B23", "B14", "B_SHT1",
                ]),
            },
        }
    }

    /// Parses a row-major, whitespace-separated table. Lines starting with
    /// `#` and blank lines are skipped. Labels are generic (`in0`, `out0`, ...).
    pub fn from_table_str(kind: GateKind, text: &str) -> Result<Self> {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let row = line
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<f64>()
                        .map_err(|e| Error::Parse(format!("line {}: {tok}: {e}", lineno + 1)))
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        let nrows = rows.len();
        if nrows == 0 {
            return Err(Error::Parse("empty gate matrix table".into()));
        }
        let ncols = rows[0].len();
        if let Some(bad) = rows.iter().find(|r| r.len() != ncols) {
            return Err(Error::DimensionMismatch {
                expected: ncols,
                got: bad.len(),
            });
        }
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        Ok(Self {
            kind,
            matrix: DMatrix::from_row_slice(nrows, ncols, &flat),
            input_labels: (0..ncols).map(|k| format!("in{k}")).collect(),
            output_labels: (0..nrows).map(|k| format!("out{k}")).collect(),
        })
    }

    pub fn from_table_file(kind: GateKind, path: &Path) -> Result<Self> {
        Self::from_table_str(kind, &std::fs::read_to_string(path)?)
    }

    pub fn to_table_string(&self) -> String {
        let mut out = String::new();
        for r in 0..self.matrix.nrows() {
            let row: Vec<String> = (0..self.matrix.ncols())
                .map(|c| format!("{}", self.matrix[(r, c)]))
                .collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn virtual_to_physical(&self, v_virtual: &[f64]) -> Result<Vec<f64>> {
        if v_virtual.len() != self.matrix.ncols() {
            return Err(Error::DimensionMismatch {
                expected: self.matrix.ncols(),
                got: v_virtual.len(),
            });
        }
        let v = DVector::from_column_slice(v_virtual);
        Ok((&self.matrix * v).iter().copied().collect())
    }
}

/// Convenience wrapper over the device-default matrices.
pub fn virtual_to_physical(kind: GateKind, v_virtual: &[f64]) -> Result<Vec<f64>> {
    VirtualGateMatrix::default_for(kind).virtual_to_physical(v_virtual)
}

/// `J34/12 = (J0x/2)·exp(±κ(δVx − δVx0))`, `J14/23 = (J0y/2)·exp(±κ(δVy − δVy0))`.
///
/// A positive `δVx` raises `J34` and lowers `J12`; a positive `δVy` raises
/// `J14` and lowers `J23`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExchangeVoltageModel {
    pub j0x: f64,
    pub j0y: f64,
    pub kappa: f64,
    /// `(δVx0, δVy0)`: voltages where the pairs are balanced.
    pub reference: [f64; 2],
}

impl Default for ExchangeVoltageModel {
    fn default() -> Self {
        Self {
            j0x: 50.0,
            j0y: 50.0,
            kappa: DEFAULT_KAPPA,
            reference: [0.0, 0.0],
        }
    }
}

impl ExchangeVoltageModel {
    pub fn new(j0x: f64, j0y: f64, kappa: f64) -> Result<Self> {
        let m = Self {
            j0x,
            j0y,
            kappa,
            reference: [0.0, 0.0],
        };
        m.validate()?;
        Ok(m)
    }

    pub fn with_reference(mut self, dvx0: f64, dvy0: f64) -> Self {
        self.reference = [dvx0, dvy0];
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0) {
            return Err(Error::Domain(format!("kappa = {} must be > 0", self.kappa)));
        }
        if !(self.j0x >= 0.0 && self.j0y >= 0.0) {
            return Err(Error::Domain("J0 must be >= 0".into()));
        }
        Ok(())
    }

    pub fn exchange_from_voltages(&self, dvx: f64, dvy: f64) -> Result<ExchangeConfig> {
        self.validate()?;
        let ax = self.kappa * (dvx - self.reference[0]);
        let ay = self.kappa * (dvy - self.reference[1]);
        let worst = ax.abs().max(ay.abs());
        if worst > MODEL_GUARD {
            return Err(Error::OutOfModel(worst));
        }
        ExchangeConfig::new(
            self.j0x / 2.0 * (-ax).exp(),
            self.j0x / 2.0 * ax.exp(),
            self.j0y / 2.0 * (-ay).exp(),
            self.j0y / 2.0 * ay.exp(),
        )
    }
}

/// Virtual barrier deltas `(vB12, vB34, vB23, vB14)` for a symmetric
/// horizontal pulse of `dvx_prime`.
pub fn apply_compensation(dvx_prime: f64) -> [f64; 4] {
    apply_compensation_with(dvx_prime, COMPENSATION_FACTOR)
}

pub fn apply_compensation_with(dvx_prime: f64, factor: f64) -> [f64; 4] {
    [
        dvx_prime,
        dvx_prime,
        -factor * dvx_prime,
        -factor * dvx_prime,
    ]
}

/// Virtual barrier point where the four couplings are roughly equal,
/// ordered `(vB12, vB34, vB23, vB14)`.
pub const BALANCED_BARRIERS: [f64; 4] = [16.0, 0.0, -10.5, 9.5];

/// Virtual barriers `(vB12, vB34, vB23, vB14)` for a symmetric sweep offset.
pub fn operating_point(dvx_prime: f64) -> [f64; 4] {
    let d = apply_compensation(dvx_prime);
    std::array::from_fn(|k| BALANCED_BARRIERS[k] + d[k])
}

/// Couplings along the symmetric sweep of the horizontal barriers.
///
/// Each coupling follows its own barrier, `J_b = J_b⁰·exp(−κ·u_b)`, where
/// `u_b` is the effective barrier shift. The horizontal pulse leaks onto the
/// vertical barriers with weight `residual_crosstalk`; the compensation pulse
/// removes that leak when both factors agree, keeping `Jy` flat. `jy_slope`
/// (MHz/mV) adds a phenomenological linear drift of `Jy` on top.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymmetricSweepModel {
    pub j0x: f64,
    pub j0y: f64,
    pub kappa: f64,
    pub compensation: f64,
    pub residual_crosstalk: f64,
    pub jy_slope: f64,
}

impl Default for SymmetricSweepModel {
    fn default() -> Self {
        Self {
            j0x: 50.0,
            j0y: 50.0,
            kappa: DEFAULT_KAPPA,
            compensation: COMPENSATION_FACTOR,
            residual_crosstalk: COMPENSATION_FACTOR,
            jy_slope: 0.0,
        }
    }
}

impl SymmetricSweepModel {
    pub fn exchange_at(&self, dvx_prime: f64) -> Result<ExchangeConfig> {
        let d = apply_compensation_with(dvx_prime, self.compensation);
        let ux = d[0];
        let uy = d[2] + self.residual_crosstalk * dvx_prime;
        let worst = (self.kappa * ux).abs().max((self.kappa * uy).abs());
        if worst > MODEL_GUARD {
            return Err(Error::OutOfModel(worst));
        }
        let jx = self.j0x * (-self.kappa * ux).exp();
        let jy = (self.j0y * (-self.kappa * uy).exp() + self.jy_slope * dvx_prime).max(0.0);
        ExchangeConfig::balanced(jx, jy)
    }
}

/// Offset between the assumed and the true balance point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationUncertainty {
    pub dvx0: f64,
    pub dvy0: f64,
    /// Precision of the ellipse-center estimate, mV.
    pub sigma_center: f64,
}

impl Default for CalibrationUncertainty {
    fn default() -> Self {
        Self::symmetric(2.0)
    }
}

impl CalibrationUncertainty {
    /// Worst case of a `±sigma` center estimate in both directions.
    pub fn symmetric(sigma: f64) -> Self {
        Self {
            dvx0: sigma,
            dvy0: sigma,
            sigma_center: sigma,
        }
    }
}

/// Overestimate of `(Jx, Jy)` caused by working at an offset `(ΔVx, ΔVy)`
/// from the true balance point.
pub fn propagate_calibration_error(
    model: &ExchangeVoltageModel,
    u: &CalibrationUncertainty,
) -> Result<(f64, f64)> {
    if !(model.j0x > 0.0 && model.j0y > 0.0) {
        return Err(Error::Domain("J0x and J0y must be > 0".into()));
    }
    if !(u.sigma_center > 0.0) {
        return Err(Error::Domain("sigma_center must be > 0".into()));
    }
    let (jx, jy, k2) = (model.j0x, model.j0y, model.kappa * model.kappa);
    let (ax, ay) = (u.dvx0 * u.dvx0, u.dvy0 * u.dvy0);
    let sigma_jy = 2.0 * jx * jx / jy * k2 * ax + jy * jy / jx * k2 * ay;
    let sigma_jx = 2.0 * jy * jy / jx * k2 * ay + jx * jx / jy * k2 * ax;
    Ok((sigma_jx, sigma_jy))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn barrier_column_one() {
        let p = virtual_to_physical(GateKind::Barrier, &[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(p.len(), 9);
        assert_eq!(p[0], -0.564);
        assert_eq!(p[4], 1.0);
    }

    #[test]
    fn plunger_column_one() {
        let p = virtual_to_physical(GateKind::Plunger, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(p[1], -0.26);
        let m = VirtualGateMatrix::default_for(GateKind::Plunger).matrix;
        for k in 0..6 {
            assert_eq!(m[(k, k)], 1.0);
        }
    }

    #[test]
    fn zero_and_length_mismatch() {
        let p = virtual_to_physical(GateKind::Barrier, &[0.0; 4]).unwrap();
        assert!(p.iter().all(|&x| x == 0.0));
        assert!(matches!(
            virtual_to_physical(GateKind::Barrier, &[0.0; 6]),
            Err(Error::DimensionMismatch { expected: 4, got: 6 })
        ));
    }

    #[test]
    fn table_round_trip() {
        let m = VirtualGateMatrix::default_for(GateKind::Barrier);
        let text = format!("# barrier\n\n{}", m.to_table_string());
        let back = VirtualGateMatrix::from_table_str(GateKind::Barrier, &text).unwrap();
        assert_eq!(back.matrix, m.matrix);
        assert!(VirtualGateMatrix::from_table_str(GateKind::Barrier, "1 2\n3").is_err());
        assert!(VirtualGateMatrix::from_table_str(GateKind::Barrier, "1 x").is_err());
    }

    #[test]
    fn balance_point() {
        let m = ExchangeVoltageModel::new(40.0, 60.0, DEFAULT_KAPPA).unwrap();
        let j = m.exchange_from_voltages(0.0, 0.0).unwrap();
        assert_eq!((j.j12, j.j34, j.j23, j.j14), (20.0, 20.0, 30.0, 30.0));
    }

    #[test]
    fn example_value_and_linearization() {
        let m = ExchangeVoltageModel::default();
        let j = m.exchange_from_voltages(10.0, 0.0).unwrap();
        assert!((j.j34 - 25.0 * 0.59f64.exp()).abs() < 1e-12);
        assert!((j.j34 - 45.10).abs() < 0.01);
        let dv = 0.01;
        let j = m.exchange_from_voltages(dv, 0.0).unwrap();
        let lin = -m.j0x * m.kappa * dv;
        assert!((j.delta_x() - lin).abs() < 1e-6 * lin.abs());
    }

    #[test]
    fn guard_rejects_extrapolation() {
        let m = ExchangeVoltageModel::default();
        assert!(m.exchange_from_voltages(50.0, 0.0).is_ok());
        assert!(matches!(
            m.exchange_from_voltages(51.0, 0.0),
            Err(Error::OutOfModel(_))
        ));
    }

    #[test]
    fn offset_reference_moves_balance() {
        let m = ExchangeVoltageModel::default().with_reference(3.0, -2.0);
        let j = m.exchange_from_voltages(3.0, -2.0).unwrap();
        assert!(j.delta_x().abs() < 1e-12 && j.delta_y().abs() < 1e-12);
    }

    #[test]
    fn compensation_examples() {
        assert_eq!(apply_compensation(0.0), [0.0, -0.0, -0.0, -0.0]);
        let d = apply_compensation(20.0);
        assert_eq!(d[0], 20.0);
        assert_eq!(d[1], 20.0);
        assert!((d[2] + 3.6).abs() < 1e-12 && (d[3] + 3.6).abs() < 1e-12);
        let d = apply_compensation(-20.0);
        assert!((d[2] - 3.6).abs() < 1e-12);
    }

    #[test]
    fn operating_points_match_device_table() {
        let close = |a: [f64; 4], b: [f64; 4]| a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-9);
        // (vB12, vB34, vB23, vB14)
        assert!(close(operating_point(20.0), [36.0, 20.0, -14.1, 5.9]));
        assert!(close(operating_point(-20.0), [-4.0, -20.0, -6.9, 13.1]));
        assert!(close(operating_point(26.0), [42.0, 26.0, -15.18, 4.82]));
    }

    #[test]
    fn sweep_keeps_jy_flat_and_jx_monotone() {
        let m = SymmetricSweepModel::default();
        let mut last = f64::INFINITY;
        for k in 0..=46 {
            let v = -20.0 + k as f64;
            let j = m.exchange_at(v).unwrap();
            assert!((j.jy() - 50.0).abs() < 1e-9);
            assert!(j.jx() < last);
            last = j.jx();
        }
        let drift = SymmetricSweepModel {
            jy_slope: 0.2,
            ..Default::default()
        };
        let a = drift.exchange_at(-20.0).unwrap().jy();
        let b = drift.exchange_at(26.0).unwrap().jy();
        assert!((b - a - 0.2 * 46.0).abs() < 1e-9);
    }

    #[test]
    fn eq_s20_example() {
        let m = ExchangeVoltageModel::default();
        let (sx, sy) = propagate_calibration_error(&m, &CalibrationUncertainty::symmetric(2.0)).unwrap();
        let expect = 3.0 * 50.0 * DEFAULT_KAPPA * DEFAULT_KAPPA * 4.0;
        assert!((sy - expect).abs() < 1e-12);
        assert!((sx - expect).abs() < 1e-12);
        assert!((sy - 2.0886).abs() < 1e-3);
        let (_, s4) = propagate_calibration_error(&m, &CalibrationUncertainty::symmetric(4.0)).unwrap();
        assert!((s4 / sy - 4.0).abs() < 1e-12);
        let zero = CalibrationUncertainty {
            dvx0: 0.0,
            dvy0: 0.0,
            sigma_center: 2.0,
        };
        assert_eq!(propagate_calibration_error(&m, &zero).unwrap(), (0.0, 0.0));
        let bad = ExchangeVoltageModel {
            j0x: 0.0,
            ..Default::default()
        };
        assert!(propagate_calibration_error(&bad, &zero).is_err());
    }
}
