// SPDX-License-Identifier: Apache-2.0

//! Named experiment scripts that regenerate figure data, the calibration
//! loop and ad-hoc sequence simulation.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::analysis::{self, CalibrationMap, FitResult};
use crate::config::{linear_grid, Config, SequenceFile};
use crate::control::{
    propagate_calibration_error, CalibrationUncertainty, ExchangeVoltageModel,
    SymmetricSweepModel, COMPENSATION_FACTOR, DEFAULT_KAPPA,
};
use crate::dynamics::{
    self, run_sequence_observe, NoiseModel, PulseSegment, PulseSequence, RampMode, RampProfile,
};
use crate::error::{Error, Result};
use crate::hamiltonians::ExchangeConfig;
use crate::measurement::{
    apply_readout_channel, measure_pair_probabilities, sample_shots, ReadoutConfig,
    ReadoutDirection,
};
use crate::spin::{self, BasisLabel, Pair, PairLabel, PairState, SpinState};

pub const FIGURES: [&str; 13] = [
    "fig3c", "fig3d", "fig3e", "fig4b", "fig4cd", "fig4ef", "fig5ab", "fig5c", "fig5ef", "figS4",
    "figS5", "figS6", "figS9",
];

/// Outcome probabilities `[SS, ST, TS, TT]` for the horizontal and the
/// vertical readout.
pub type BothReadouts = [[f64; 4]; 2];

/// Column label of outcome `k` for `direction`, e.g. `P_S34T12`.
pub fn outcome_label(direction: ReadoutDirection, k: usize) -> String {
    let (a, b) = direction.pairs();
    let name = |p: Pair| match p {
        Pair::Q12 => "12",
        Pair::Q34 => "34",
        Pair::Q23 => "23",
        Pair::Q14 => "14",
    };
    let st = |singlet: bool| if singlet { "S" } else { "T" };
    format!(
        "P_{}{}{}{}",
        st(k < 2),
        name(a),
        st(k % 2 == 0),
        name(b)
    )
}

/// Parameter lookup with per-figure overrides: `name.key` wins over `key`.
/// Every resolved value is recorded for the sidecar.
pub struct Params<'a> {
    cfg: &'a Config,
    prefix: String,
    used: BTreeMap<String, Value>,
}

impl<'a> Params<'a> {
    pub fn new(cfg: &'a Config, prefix: &str) -> Self {
        Self {
            cfg,
            prefix: prefix.to_string(),
            used: BTreeMap::new(),
        }
    }

    fn lookup<T>(&self, key: &str, get: impl Fn(&str) -> Result<Option<T>>) -> Result<Option<T>> {
        if let Some(v) = get(&format!("{}.{key}", self.prefix))? {
            return Ok(Some(v));
        }
        get(key)
    }

    pub fn f64(&mut self, key: &str, default: f64) -> Result<f64> {
        let v = self.lookup(key, |k| self.cfg.f64_opt(k))?.unwrap_or(default);
        self.used.insert(key.to_string(), json!(v));
        Ok(v)
    }

    pub fn usize(&mut self, key: &str, default: usize) -> Result<usize> {
        let v = self
            .lookup(key, |k| self.cfg.u64_opt(k))?
            .map_or(default, |x| x as usize);
        self.used.insert(key.to_string(), json!(v));
        Ok(v)
    }

    pub fn bool(&mut self, key: &str, default: bool) -> Result<bool> {
        let v = self.lookup(key, |k| self.cfg.bool_opt(k))?.unwrap_or(default);
        self.used.insert(key.to_string(), json!(v));
        Ok(v)
    }

    pub fn grid(&mut self, stem: &str, unit: &str, defaults: [f64; 3]) -> Result<Vec<f64>> {
        let a = self.f64(&format!("{stem}_start_{unit}"), defaults[0])?;
        let b = self.f64(&format!("{stem}_stop_{unit}"), defaults[1])?;
        let s = self.f64(&format!("{stem}_step_{unit}"), defaults[2])?;
        linear_grid(a, b, s)
    }

    pub fn sweep_model(&mut self) -> Result<SymmetricSweepModel> {
        let drift = self.bool("drift.enabled", false)?;
        let slope_default = if drift { 10.0 / 46.0 } else { 0.0 };
        Ok(SymmetricSweepModel {
            j0x: self.f64("model.j0x", 50.0)?,
            j0y: self.f64("model.j0y", 50.0)?,
            kappa: self.f64("model.kappa", DEFAULT_KAPPA)?,
            compensation: self.f64("model.compensation", COMPENSATION_FACTOR)?,
            residual_crosstalk: self.f64("model.residual_crosstalk", COMPENSATION_FACTOR)?,
            jy_slope: self.f64("drift.jy_slope", slope_default)?,
        })
    }

    /// Quasi-static noise, `None` when `noise.t_phi_ns` is 0.
    pub fn noise(&mut self, key: &str, t_phi_default: f64, seed: u64) -> Result<Option<NoiseModel>> {
        let t_phi = self.f64(key, t_phi_default)?;
        let n = self.usize("noise.samples", 200)?;
        if t_phi <= 0.0 {
            return Ok(None);
        }
        Ok(Some(NoiseModel::from_t_phi(t_phi, n, seed)?))
    }

    pub fn readout(&mut self) -> Result<Readout> {
        Ok(Readout {
            n_shots: self.usize("readout.n_shots", 0)?,
            f_s: self.f64("readout.f_s", 1.0)?,
            f_t: self.f64("readout.f_t", 1.0)?,
        })
    }

    pub fn into_used(self) -> BTreeMap<String, Value> {
        self.used
    }
}

/// Readout stage applied to ideal probabilities.
#[derive(Clone, Copy, Debug)]
pub struct Readout {
    pub n_shots: usize,
    pub f_s: f64,
    pub f_t: f64,
}

impl Readout {
    pub fn ideal() -> Self {
        Self {
            n_shots: 0,
            f_s: 1.0,
            f_t: 1.0,
        }
    }

    /// Measured outcome probabilities for one point; `stream` selects an
    /// independent shot stream.
    pub fn apply(&self, probs: &[f64; 4], direction: ReadoutDirection, seed: u64, stream: u64) -> Result<[f64; 4]> {
        if self.n_shots == 0 && self.f_s == 1.0 && self.f_t == 1.0 {
            return Ok(*probs);
        }
        let cfg = ReadoutConfig {
            direction,
            n_shots: self.n_shots.max(1),
            seed: mix_seed(seed, stream),
            ..ReadoutConfig::default()
        }
        .with_fidelity(self.f_s, self.f_t);
        cfg.validate()?;
        if self.n_shots == 0 {
            Ok(apply_readout_channel(probs, &cfg))
        } else {
            Ok(sample_shots(probs, &cfg)?.probabilities())
        }
    }
}

fn mix_seed(seed: u64, stream: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Ensemble-averaged readout probabilities along the dwell grid.
pub fn observe_readouts(seq: &PulseSequence, noise: Option<&NoiseModel>) -> Result<Vec<BothReadouts>> {
    let rows = run_sequence_observe(seq, noise, |s| -> Result<BothReadouts> {
        Ok([
            measure_pair_probabilities(s, ReadoutDirection::Horizontal)?,
            measure_pair_probabilities(s, ReadoutDirection::Vertical)?,
        ])
    })?;
    let n = rows.len() as f64;
    let len = seq.dwell_ns.len();
    let mut out = vec![[[0.0; 4]; 2]; len];
    for row in rows {
        for (k, r) in row.into_iter().enumerate() {
            let r = r?;
            for d in 0..2 {
                for o in 0..4 {
                    out[k][d][o] += r[d][o] / n;
                }
            }
        }
    }
    Ok(out)
}

/// Which readout column of [`BothReadouts`] a trace follows.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Observable {
    pub direction: ReadoutDirection,
    pub outcome: usize,
}

impl Observable {
    pub const P_S12S34: Self = Self {
        direction: ReadoutDirection::Horizontal,
        outcome: 0,
    };
    pub const P_S23S14: Self = Self {
        direction: ReadoutDirection::Vertical,
        outcome: 0,
    };
    pub const P_S34T12: Self = Self {
        direction: ReadoutDirection::Horizontal,
        outcome: 1,
    };
    pub const P_S12T34: Self = Self {
        direction: ReadoutDirection::Horizontal,
        outcome: 2,
    };
    pub const P_S23T14: Self = Self {
        direction: ReadoutDirection::Vertical,
        outcome: 1,
    };

    pub fn label(self) -> String {
        outcome_label(self.direction, self.outcome)
    }

    fn index(self) -> usize {
        match self.direction {
            ReadoutDirection::Horizontal => 0,
            ReadoutDirection::Vertical => 1,
        }
    }
}

/// One observable along the dwell grid, after the readout stage.
pub fn trace(
    seq: &PulseSequence,
    noise: Option<&NoiseModel>,
    obs: Observable,
    readout: &Readout,
    seed: u64,
    stream: u64,
) -> Result<Vec<f64>> {
    let r = observe_readouts(seq, noise)?;
    r.iter()
        .enumerate()
        .map(|(k, p)| {
            let m = readout.apply(&p[obs.index()], obs.direction, seed, stream.wrapping_mul(1 << 20) + k as u64)?;
            Ok(m[obs.outcome])
        })
        .collect()
}

/// `|S12 T⁻34⟩` in the three-level subspace.
pub fn init_t34_s12() -> SpinState {
    SpinState::basis_state(BasisLabel::TripletMinus3, 0).expect("basis state 0 exists")
}

/// `|T⁻23 S14⟩` in the three-level subspace.
pub fn init_t23_s14() -> Result<SpinState> {
    spin::build_pair_product_state(
        PairState::new(Pair::Q23, PairLabel::TMinus),
        PairState::new(Pair::Q14, PairLabel::S),
    )?
    .project_onto(BasisLabel::TripletMinus3)
}

/// Diabatic set to `j`, then dwell.
pub fn set_and_dwell(init: SpinState, j: ExchangeConfig, dwell: &[f64]) -> PulseSequence {
    PulseSequence::new(init, vec![PulseSegment::set(j)], dwell.to_vec())
}

/// Adiabatic preparation: start with the vertical pairs at `off_ratio` of
/// their target, ramp the couplings for `t_ramp` ns to `target` along a
/// smootherstep profile, then dwell.
pub fn adiabatic_sequence(target: ExchangeConfig, off_ratio: f64, t_ramp: f64, dwell: &[f64]) -> PulseSequence {
    let mut seq = PulseSequence::new(
        spin::singlet_x(),
        vec![PulseSegment::ramp(target, t_ramp)],
        dwell.to_vec(),
    );
    seq.start = ExchangeConfig {
        j23: target.j23 * off_ratio,
        j14: target.j14 * off_ratio,
        ..target
    };
    seq.ramp_mode = RampMode::LinearJ;
    seq.ramp_profile = RampProfile::Smootherstep;
    seq
}

/// Exchange pulse on `J23` alone for `t_j` ns from `|S_x⟩`, then `target`.
pub fn j23_pulse_sequence(j23: f64, t_j: f64, target: ExchangeConfig, dwell: &[f64]) -> PulseSequence {
    let pulse = ExchangeConfig {
        j12: 0.0,
        j34: 0.0,
        j23,
        j14: 0.0,
    };
    let mut seq = PulseSequence::new(
        spin::singlet_x(),
        vec![
            PulseSegment {
                duration_ns: t_j,
                ..PulseSegment::set(pulse)
            },
            PulseSegment::set(target),
        ],
        dwell.to_vec(),
    );
    seq.start = ExchangeConfig {
        j23: 0.0,
        j14: 0.0,
        ..target
    };
    seq
}

/// Fit that tolerates failure (reported as `None`).
pub fn try_fit(t: &[f64], p: &[f64]) -> Option<FitResult> {
    analysis::fit_damped_cosine(t, p).ok()
}

/// Half of the peak-to-peak excursion.
pub fn half_range(p: &[f64]) -> f64 {
    let max = p.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = p.iter().cloned().fold(f64::INFINITY, f64::min);
    0.5 * (max - min)
}

pub fn mean(p: &[f64]) -> f64 {
    p.iter().sum::<f64>() / p.len() as f64
}

/// One CSV table.
#[derive(Clone, Debug, PartialEq)]
pub struct Panel {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Panel {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Data products of one figure command.
#[derive(Clone, Debug)]
pub struct FigureOutput {
    pub name: String,
    pub seed: u64,
    pub panels: Vec<Panel>,
    pub parameters: BTreeMap<String, Value>,
    pub summary: BTreeMap<String, Value>,
}

impl FigureOutput {
    pub fn panel(&self, name: &str) -> Option<&Panel> {
        self.panels.iter().find(|p| p.name == name)
    }

    /// Writes one CSV per panel and a JSON sidecar; returns the paths.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut paths = Vec::new();
        for p in &self.panels {
            let path = dir.join(format!("{}.csv", p.name));
            p.write_csv(&path)?;
            paths.push(path);
        }
        let sidecar = json!({
            "figure": self.name,
            "seed": self.seed,
            "parameters": self.parameters,
            "summary": self.summary,
            "panels": self.panels.iter().map(|p| json!({
                "file": format!("{}.csv", p.name),
                "columns": p.header,
            })).collect::<Vec<_>>(),
        });
        let path = dir.join(format!("{}.json", self.name));
        fs::write(&path, serde_json::to_string_pretty(&sidecar)? + "\n")?;
        paths.push(path);
        Ok(paths)
    }
}

fn fit_json(fit: &Option<FitResult>) -> Value {
    match fit {
        Some(f) => json!({
            "A": f.a, "f_MHz": f.f, "phi_rad": f.phi, "T_phi_ns": f.t_phi, "A0": f.a0,
            "sigma_f_MHz": f.sigma_f(), "sigma_A": f.sigma(0), "sigma_T_phi_ns": f.sigma(3),
            "residual_rms": f.residual_rms,
        }),
        None => Value::Null,
    }
}

fn nan_or<T>(x: Option<T>, f: impl Fn(T) -> f64) -> f64 {
    x.map_or(f64::NAN, f)
}

/// Runs a named figure script without writing files.
pub fn compute_figure(name: &str, cfg: &Config, seed: u64) -> Result<FigureOutput> {
    let mut p = Params::new(cfg, name);
    let mut summary = BTreeMap::new();
    let panels = match name {
        "fig3c" | "fig3d" => fig3cd(name, &mut p, &mut summary, seed)?,
        "fig3e" => fig3e(&mut p, &mut summary, seed)?,
        "fig4b" => fig4b(&mut p, &mut summary, seed)?,
        "fig4cd" => fig4cd(&mut p, seed)?.0,
        "fig4ef" => fig4ef(&mut p, &mut summary, seed)?,
        "fig5ab" => fig5ab(&mut p, &mut summary, seed)?,
        "fig5c" => fig5c(&mut p, &mut summary, seed)?,
        "fig5ef" => fig5ef(&mut p, &mut summary, seed)?,
        "figS4" => fig_ellipse(name, &mut p, &mut summary, seed, 20.0, 180.0)?,
        "figS5" => fig_ellipse(name, &mut p, &mut summary, seed, 0.0, 105.0)?,
        "figS6" => fig_ellipse(name, &mut p, &mut summary, seed, -20.0, 60.0)?,
        "figS9" => fig_s9(&mut p, &mut summary, seed)?,
        other => return Err(Error::UnknownFigure(other.to_string())),
    };
    Ok(FigureOutput {
        name: name.to_string(),
        seed,
        panels,
        parameters: p.into_used(),
        summary,
    })
}

/// Runs a named figure script and writes its files into `out`.
pub fn cmd_figure(name: &str, cfg: &Config, seed: u64, out: &Path) -> Result<Vec<PathBuf>> {
    compute_figure(name, cfg, seed)?.write(out)
}

/// Chevron of `obs` over `(v, t)`: one trace per control value.
fn chevron<F>(
    values: &[f64],
    obs: Observable,
    noise: Option<&NoiseModel>,
    readout: &Readout,
    seed: u64,
    make: F,
) -> Result<Vec<Vec<f64>>>
where
    F: Fn(f64) -> Result<PulseSequence> + Sync,
{
    values
        .par_iter()
        .enumerate()
        .map(|(i, &v)| trace(&make(v)?, noise, obs, readout, seed, i as u64))
        .collect()
}

fn long_panel(name: &str, x_label: &str, obs_label: &str, xs: &[f64], t: &[f64], traces: &[Vec<f64>]) -> Panel {
    let mut panel = Panel::new(name, &[x_label, "t_ns", obs_label]);
    for (x, tr) in xs.iter().zip(traces) {
        for (tk, pk) in t.iter().zip(tr) {
            panel.rows.push(vec![*x, *tk, *pk]);
        }
    }
    panel
}

fn fig3cd(name: &str, p: &mut Params, summary: &mut BTreeMap<String, Value>, seed: u64) -> Result<Vec<Panel>> {
    let sweep = p.sweep_model()?;
    let dvp = p.f64("dvp_mV", 20.0)?;
    let j = sweep.exchange_at(dvp)?;
    let model = ExchangeVoltageModel::new(j.jx(), j.jy(), sweep.kappa)?;
    let dv = p.grid("dv", "mV", [-20.0, 20.0, 1.0])?;
    let t = p.grid("t", "ns", [0.0, 200.0, 2.0])?;
    let noise = p.noise("noise.t_phi_ns", 0.0, seed)?;
    let readout = p.readout()?;
    let along_x = name == "fig3c";
    let obs = Observable::P_S34T12;
    let traces = chevron(&dv, obs, noise.as_ref(), &readout, seed, |v| {
        let cfg = if along_x {
            model.exchange_from_voltages(v, 0.0)?
        } else {
            model.exchange_from_voltages(0.0, v)?
        };
        Ok(set_and_dwell(init_t34_s12(), cfg, &t))
    })?;
    let x_label = if along_x { "dVx_mV" } else { "dVy_mV" };
    let mut freq = Panel::new(
        &format!("{name}_frequency"),
        &[x_label, "f_fit_MHz", "sigma_f_MHz", "f_exact_MHz"],
    );
    let fits: Vec<Option<FitResult>> = traces.par_iter().map(|tr| try_fit(&t, tr)).collect();
    let mut sweep_fits = Vec::new();
    for ((v, fit), _) in dv.iter().zip(&fits).zip(&traces) {
        let cfg = if along_x {
            model.exchange_from_voltages(*v, 0.0)?
        } else {
            model.exchange_from_voltages(0.0, *v)?
        };
        let exact = dynamics::f_st_exact(&cfg).unwrap_or(f64::NAN);
        freq.rows.push(vec![
            *v,
            nan_or(fit.as_ref(), |f| f.f),
            nan_or(fit.as_ref(), |f| f.sigma_f()),
            exact,
        ]);
        if let Some(f) = fit {
            sweep_fits.push((*v, f.clone()));
        }
    }
    let min = analysis::find_frequency_minimum(&sweep_fits);
    summary.insert("jx_MHz".into(), json!(j.jx()));
    summary.insert("jy_MHz".into(), json!(j.jy()));
    summary.insert(
        "frequency_minimum".into(),
        match min {
            Ok(m) => json!({"dv_star_mV": m.dv_star, "f_min_MHz": m.f_min, "curvature": m.curvature, "jy_estimate_MHz": 2.0 * m.f_min}),
            Err(e) => json!({"error": e.to_string()}),
        },
    );
    Ok(vec![long_panel(name, x_label, &obs.label(), &dv, &t, &traces), freq])
}

/// Traces for the symmetric sweep from the two three-level initial states.
fn symmetric_sweep_traces(
    sweep: &SymmetricSweepModel,
    dvp: &[f64],
    t: &[f64],
    noise: Option<&NoiseModel>,
    readout: &Readout,
    seed: u64,
) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let left = chevron(dvp, Observable::P_S23T14, noise, readout, seed, |v| {
        Ok(set_and_dwell(init_t23_s14()?, sweep.exchange_at(v)?, t))
    })?;
    let right = chevron(dvp, Observable::P_S34T12, noise, readout, seed ^ 1, |v| {
        Ok(set_and_dwell(init_t34_s12(), sweep.exchange_at(v)?, t))
    })?;
    Ok((left, right))
}

/// `(δV′, Jx_fit, σJx, Jy_fit, σJy, Jx_model, Jy_model)` from sweep traces.
pub fn exchange_table(
    sweep: &SymmetricSweepModel,
    dvp: &[f64],
    t: &[f64],
    left: &[Vec<f64>],
    right: &[Vec<f64>],
) -> Result<Panel> {
    let mut table = Panel::new(
        "table",
        &["dVp_mV", "Jx_fit_MHz", "sigma_Jx_MHz", "Jy_fit_MHz", "sigma_Jy_MHz", "Jx_model_MHz", "Jy_model_MHz"],
    );
    let fits: Vec<(Option<FitResult>, Option<FitResult>)> = left
        .par_iter()
        .zip(right)
        .map(|(l, r)| (try_fit(t, l), try_fit(t, r)))
        .collect();
    for (v, (fl, fr)) in dvp.iter().zip(fits) {
        let j = sweep.exchange_at(*v)?;
        table.rows.push(vec![
            *v,
            nan_or(fl.as_ref(), |f| 2.0 * f.f),
            nan_or(fl.as_ref(), |f| 2.0 * f.sigma_f()),
            nan_or(fr.as_ref(), |f| 2.0 * f.f),
            nan_or(fr.as_ref(), |f| 2.0 * f.sigma_f()),
            j.jx(),
            j.jy(),
        ]);
    }
    Ok(table)
}

fn fig3e(p: &mut Params, summary: &mut BTreeMap<String, Value>, seed: u64) -> Result<Vec<Panel>> {
    let sweep = p.sweep_model()?;
    let dvp = p.grid("dvp", "mV", [-20.0, 26.0, 2.0])?;
    let t = p.grid("t", "ns", [0.0, 400.0, 2.0])?;
    let noise = p.noise("noise.t_phi_ns", 0.0, seed)?;
    let readout = p.readout()?;
    let (left, right) = symmetric_sweep_traces(&sweep, &dvp, &t, noise.as_ref(), &readout, seed)?;
    let mut table = exchange_table(&sweep, &dvp, &t, &left, &right)?;
    table.name = "fig3f".into();
    let jx = table.column("Jx_fit_MHz").unwrap_or_default();
    if let (Some(a), Some(b)) = (jx.first(), jx.last()) {
        summary.insert("jx_fit_at_start_MHz".into(), json!(a));
        summary.insert("jx_fit_at_end_MHz".into(), json!(b));
    }
    Ok(vec![
        long_panel("fig3e_left", "dVp_mV", &Observable::P_S23T14.label(), &dvp, &t, &left),
        long_panel("fig3e_right", "dVp_mV", &Observable::P_S34T12.label(), &dvp, &t, &right),
        table,
    ])
}

fn fig4b(p: &mut Params, summary: &mut BTreeMap<String, Value>, seed: u64) -> Result<Vec<Panel>> {
    let jij = p.f64("j_ij_MHz", 25.0)?;
    let t = p.grid("t", "ns", [0.0, 300.0, 2.0])?;
    let n = p.usize("noise.samples", 1000)?;
    let tphi = [p.f64("t_phi_h_ns", 144.0)?, p.f64("t_phi_v_ns", 130.0)?];
    let readout = p.readout()?;
    let j = ExchangeConfig::new(jij, jij, jij, jij)?;
    let seq = set_and_dwell(spin::singlet_y(), j, &t);
    let obs = [Observable::P_S12S34, Observable::P_S23S14];
    let traces: Vec<Vec<f64>> = (0..2)
        .into_par_iter()
        .map(|k| {
            let noise = NoiseModel::from_t_phi(tphi[k], n, mix_seed(seed, k as u64))?;
            trace(&seq, Some(&noise), obs[k], &readout, seed, k as u64)
        })
        .collect::<Result<_>>()?;
    let mut panel = Panel::new("fig4b", &["t_ns", "P_S12S34", "P_S23S14"]);
    for k in 0..t.len() {
        panel.rows.push(vec![t[k], traces[0][k], traces[1][k]]);
    }
    summary.insert("fit_P_S12S34".into(), fit_json(&try_fit(&t, &traces[0])));
    summary.insert("fit_P_S23S14".into(), fit_json(&try_fit(&t, &traces[1])));
    summary.insert("f_ss_MHz".into(), json!(dynamics::f_ss(j.jx(), j.jy())?));
    Ok(vec![panel])
}

type SweepTraces = (Vec<f64>, Vec<f64>, Vec<Vec<f64>>, Vec<Vec<f64>>, SymmetricSweepModel);

fn fig4cd_traces(p: &mut Params, seed: u64) -> Result<SweepTraces> {
    let sweep = p.sweep_model()?;
    let dvp = p.grid("dvp", "mV", [-20.0, 26.0, 2.0])?;
    let t = p.grid("t", "ns", [0.0, 300.0, 1.0])?;
    let noise = p.noise("noise.t_phi_ns", 130.0, seed)?;
    let readout = p.readout()?;
    let c = chevron(&dvp, Observable::P_S12S34, noise.as_ref(), &readout, seed, |v| {
        Ok(set_and_dwell(spin::singlet_x(), sweep.exchange_at(v)?, &t))
    })?;
    let d = chevron(&dvp, Observable::P_S23S14, noise.as_ref(), &readout, seed ^ 1, |v| {
        Ok(set_and_dwell(spin::singlet_x(), sweep.exchange_at(v)?, &t))
    })?;
    Ok((dvp, t, c, d, sweep))
}

fn fig4cd(p: &mut Params, seed: u64) -> Result<(Vec<Panel>, SweepTraces)> {
    let data = fig4cd_traces(p, seed)?;
    let (dvp, t, c, d, _) = &data;
    Ok((
        vec![
            long_panel("fig4c", "dVp_mV", "P_S12S34", dvp, t, c),
            long_panel("fig4d", "dVp_mV", "P_S23S14", dvp, t, d),
        ],
        data,
    ))
}

fn fig4ef(p: &mut Params, summary: &mut BTreeMap<String, Value>, seed: u64) -> Result<Vec<Panel>> {
    let (dvp, t, c, d, sweep) = fig4cd_traces(p, seed)?;
    let fits: Vec<(Option<FitResult>, Option<FitResult>)> = c
        .par_iter()
        .zip(&d)
        .map(|(a, b)| (try_fit(&t, a), try_fit(&t, b)))
        .collect();
    let mut e = Panel::new(
        "fig4e",
        &["dVp_mV", "Jx_MHz", "Jy_MHz", "f_c_MHz", "sigma_f_c_MHz", "f_d_MHz", "sigma_f_d_MHz", "f_theory_MHz"],
    );
    let mut f = Panel::new(
        "fig4f",
        &["dVp_mV", "V_c", "sigma_V_c", "V_d", "sigma_V_d", "V_x_theory", "V_y_theory"],
    );
    let mut worst = 0.0f64;
    for (v, (fc, fd)) in dvp.iter().zip(&fits) {
        let j = sweep.exchange_at(*v)?;
        let theory = dynamics::f_ss(j.jx(), j.jy())?;
        let (vx, vy) = dynamics::visibilities(j.jx(), j.jy())?;
        for fit in [fc, fd].into_iter().flatten() {
            worst = worst.max((fit.f / theory - 1.0).abs());
        }
        e.rows.push(vec![
            *v,
            j.jx(),
            j.jy(),
            nan_or(fc.as_ref(), |x| x.f),
            nan_or(fc.as_ref(), |x| x.sigma_f()),
            nan_or(fd.as_ref(), |x| x.f),
            nan_or(fd.as_ref(), |x| x.sigma_f()),
            theory,
        ]);
        f.rows.push(vec![
            *v,
            nan_or(fc.as_ref(), |x| 2.0 * x.a),
            nan_or(fc.as_ref(), |x| 2.0 * x.sigma(0)),
            nan_or(fd.as_ref(), |x| 2.0 * x.a),
            nan_or(fd.as_ref(), |x| 2.0 * x.sigma(0)),
            vx,
            vy,
        ]);
    }
    summary.insert("max_relative_frequency_error".into(), json!(worst));
    Ok(vec![e, f])
}

fn fig5a_traces(p: &mut Params, seed: u64) -> Result<(Vec<f64>, Vec<f64>, Vec<Vec<f64>>)> {
    let jij = p.f64("j_ij_MHz", 25.0)?;
    let off = p.f64("off_ratio", 0.0)?;
    let ramps = p.grid("t_ramp", "ns", [0.0, 300.0, 10.0])?;
    let t = p.grid("t", "ns", [0.0, 200.0, 1.0])?;
    let noise = p.noise("noise.t_phi_ns", 0.0, seed)?;
    let readout = p.readout()?;
    let target = ExchangeConfig::new(jij, jij, jij, jij)?;
    let traces = chevron(&ramps, Observable::P_S12S34, noise.as_ref(), &readout, seed, |tr| {
        Ok(adiabatic_sequence(target, off, tr, &t))
    })?;
    Ok((ramps, t, traces))
}

fn fig5b_traces(p: &mut Params, seed: u64) -> Result<(Vec<f64>, Vec<f64>, Vec<Vec<f64>>, Vec<Vec<f64>>, SymmetricSweepModel)> {
    let sweep = p.sweep_model()?;
    let off = p.f64("off_ratio", 0.0)?;
    let t_ramp = p.f64("t_ramp_ns", 160.0)?;
    let dvp = p.grid("dvp", "mV", [-20.0, 26.0, 2.0])?;
    let t = p.grid("t", "ns", [0.0, 200.0, 1.0])?;
    let noise = p.noise("noise.t_phi_ns", 0.0, seed)?;
    let readout = p.readout()?;
    let h = chevron(&dvp, Observable::P_S12S34, noise.as_ref(), &readout, seed, |v| {
        Ok(adiabatic_sequence(sweep.exchange_at(v)?, off, t_ramp, &t))
    })?;
    let v = chevron(&dvp, Observable::P_S23S14, noise.as_ref(), &readout, seed ^ 1, |v| {
        Ok(adiabatic_sequence(sweep.exchange_at(v)?, off, t_ramp, &t))
    })?;
    Ok((dvp, t, h, v, sweep))
}

fn fig5ab(p: &mut Params, summary: &mut BTreeMap<String, Value>, seed: u64) -> Result<Vec<Panel>> {
    let (ramps, t, a) = fig5a_traces(p, seed)?;
    let mut amp = Panel::new("fig5a_amplitude", &["t_ramp_ns", "residual_amplitude", "mean_P_S12S34"]);
    for (tr, trace) in ramps.iter().zip(&a) {
        amp.rows.push(vec![*tr, half_range(trace), mean(trace)]);
    }
    let beyond: Vec<f64> = amp
        .rows
        .iter()
        .filter(|r| r[0] >= 140.0)
        .map(|r| r[1])
        .collect();
    summary.insert(
        "max_residual_amplitude_beyond_140ns".into(),
        json!(beyond.iter().cloned().fold(f64::NAN, f64::max)),
    );
    let (dvp, tb, b, _, _) = fig5b_traces(p, seed)?;
    Ok(vec![
        long_panel("fig5a", "t_ramp_ns", "P_S12S34", &ramps, &t, &a),
        amp,
        long_panel("fig5b", "dVp_mV", "P_S12S34", &dvp, &tb, &b),
    ])
}

fn fig5c(p: &mut Params, summary: &mut BTreeMap<String, Value>, seed: u64) -> Result<Vec<Panel>> {
    let (dvp, _, h, v, sweep) = fig5b_traces(p, seed)?;
    let mut panel = Panel::new(
        "fig5c",
        &["dVp_mV", "Jx_MHz", "Jy_MHz", "P_S12S34_sim", "P_S23S14_sim", "P_S12S34_theory", "P_S23S14_theory"],
    );
    let mut worst = 0.0f64;
    for ((x, th), tv) in dvp.iter().zip(&h).zip(&v) {
        let j = sweep.exchange_at(*x)?;
        let (px, py) = dynamics::ground_state_probabilities(j.jx(), j.jy())?;
        let (mh, mv) = (mean(th), mean(tv));
        worst = worst.max((mh - px).abs()).max((mv - py).abs());
        panel.rows.push(vec![*x, j.jx(), j.jy(), mh, mv, px, py]);
    }
    summary.insert("max_abs_deviation_from_ground_state".into(), json!(worst));
    Ok(vec![panel])
}

fn fig5ef(p: &mut Params, summary: &mut BTreeMap<String, Value>, seed: u64) -> Result<Vec<Panel>> {
    let jij = p.f64("j_ij_MHz", 25.0)?;
    let j23 = p.f64("j23_pulse_MHz", 20.0)?;
    let tj = p.grid("t_j", "ns", [0.0, 60.0, 1.0])?;
    let t = p.grid("t", "ns", [0.0, 200.0, 1.0])?;
    let cut = p.f64("t_j_cut_ns", 25.0)?;
    let noise = p.noise("noise.t_phi_ns", 0.0, seed)?;
    let readout = p.readout()?;
    let target = ExchangeConfig::new(jij, jij, jij, jij)?;
    let make = |x: f64| Ok(j23_pulse_sequence(j23, x, target, &t));
    let e = chevron(&tj, Observable::P_S12S34, noise.as_ref(), &readout, seed, make)?;
    let f = chevron(&tj, Observable::P_S23S14, noise.as_ref(), &readout, seed ^ 1, make)?;
    let seq = j23_pulse_sequence(j23, cut, target, &t);
    let gh = [
        trace(&seq, noise.as_ref(), Observable::P_S12S34, &readout, seed, 1 << 40)?,
        trace(&seq, noise.as_ref(), Observable::P_S23S14, &readout, seed, (1 << 40) + 1)?,
    ];
    let mut lin = Panel::new("fig5gh", &["t_ns", "P_S12S34", "P_S23S14"]);
    for k in 0..t.len() {
        lin.rows.push(vec![t[k], gh[0][k], gh[1][k]]);
    }
    summary.insert(
        "linecut".into(),
        json!({
            "t_j_ns": cut,
            "visibility_P_S12S34": 2.0 * half_range(&gh[0]),
            "visibility_P_S23S14": 2.0 * half_range(&gh[1]),
            "mean_P_S12S34": mean(&gh[0]),
            "mean_P_S23S14": mean(&gh[1]),
        }),
    );
    Ok(vec![
        long_panel("fig5e", "t_J_ns", "P_S12S34", &tj, &t, &e),
        long_panel("fig5f", "t_J_ns", "P_S23S14", &tj, &t, &f),
        lin,
    ])
}

/// Probability map of `obs` over `(δVx, δVy)` at fixed dwell time.
pub fn voltage_map(
    model: &ExchangeVoltageModel,
    init: &SpinState,
    obs: Observable,
    dvx: &[f64],
    dvy: &[f64],
    t_d: f64,
    noise: Option<&NoiseModel>,
    readout: &Readout,
    seed: u64,
) -> Result<CalibrationMap> {
    let values: Vec<Vec<f64>> = dvy
        .par_iter()
        .enumerate()
        .map(|(iy, &y)| {
            dvx.iter()
                .enumerate()
                .map(|(ix, &x)| {
                    let seq = set_and_dwell(init.clone(), model.exchange_from_voltages(x, y)?, &[t_d]);
                    Ok(trace(&seq, noise, obs, readout, seed, (iy * dvx.len() + ix) as u64)?[0])
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    CalibrationMap::new(dvx.to_vec(), dvy.to_vec(), values)
}

fn map_panel(name: &str, label: &str, map: &CalibrationMap) -> Panel {
    let mut panel = Panel::new(name, &["dVx_mV", "dVy_mV", label]);
    for (iy, y) in map.dvy.iter().enumerate() {
        for (ix, x) in map.dvx.iter().enumerate() {
            panel.rows.push(vec![*x, *y, map.values[iy][ix]]);
        }
    }
    panel
}

fn center_json(map: &CalibrationMap) -> Value {
    match analysis::find_ellipse_center(map) {
        Ok(c) => json!({"x_mV": c.x, "y_mV": c.y, "sigma_x_mV": c.sigma_x, "sigma_y_mV": c.sigma_y, "score": c.score}),
        Err(e) => json!({"error": e.to_string()}),
    }
}

fn fig_ellipse(
    name: &str,
    p: &mut Params,
    summary: &mut BTreeMap<String, Value>,
    seed: u64,
    dvp_default: f64,
    t_d_default: f64,
) -> Result<Vec<Panel>> {
    let sweep = p.sweep_model()?;
    let dvp = p.f64("dvp_mV", dvp_default)?;
    let t_d = p.f64("t_d_ns", t_d_default)?;
    let grid = p.grid("map", "mV", [-30.0, 30.0, 1.0])?;
    let dv = p.grid("dv", "mV", [-30.0, 30.0, 2.0])?;
    let t = p.grid("t", "ns", [0.0, 300.0, 2.0])?;
    let noise = p.noise("noise.t_phi_ns", 0.0, seed)?;
    let readout = p.readout()?;
    let j = sweep.exchange_at(dvp)?;
    let model = ExchangeVoltageModel::new(j.jx(), j.jy(), sweep.kappa)?;
    let t23 = init_t23_s14()?;
    let t34 = init_t34_s12();
    let (ha, hb) = (Observable::P_S34T12, Observable::P_S23T14);
    let map_a = voltage_map(&model, &t34, ha, &grid, &grid, t_d, noise.as_ref(), &readout, seed)?;
    let map_b = voltage_map(&model, &t23, hb, &grid, &grid, t_d, noise.as_ref(), &readout, seed ^ 1)?;
    let mut panels = vec![
        map_panel(&format!("{name}a"), &ha.label(), &map_a),
        map_panel(&format!("{name}b"), &hb.label(), &map_b),
    ];
    let cuts = [
        ("c", true, ha, &t34),
        ("d", true, hb, &t23),
        ("e", false, ha, &t34),
        ("f", false, hb, &t23),
    ];
    for (k, (suffix, along_x, obs, init)) in cuts.into_iter().enumerate() {
        let traces = chevron(&dv, obs, noise.as_ref(), &readout, seed ^ (k as u64 + 2), |v| {
            let cfg = if along_x {
                model.exchange_from_voltages(v, 0.0)?
            } else {
                model.exchange_from_voltages(0.0, v)?
            };
            Ok(set_and_dwell(init.clone(), cfg, &t))
        })?;
        let x_label = if along_x { "dVx_mV" } else { "dVy_mV" };
        panels.push(long_panel(&format!("{name}{suffix}"), x_label, &obs.label(), &dv, &t, &traces));
    }
    summary.insert("jx_MHz".into(), json!(j.jx()));
    summary.insert("jy_MHz".into(), json!(j.jy()));
    summary.insert("center_a".into(), center_json(&map_a));
    summary.insert("center_b".into(), center_json(&map_b));
    Ok(panels)
}

fn fig_s9(p: &mut Params, summary: &mut BTreeMap<String, Value>, seed: u64) -> Result<Vec<Panel>> {
    let sweep = p.sweep_model()?;
    let dvp = p.f64("dvp_mV", 26.0)?;
    let t_d = p.f64("t_d_ns", 113.0)?;
    let grid = p.grid("map", "mV", [-30.0, 30.0, 1.0])?;
    let noise = p.noise("noise.t_phi_ns", 0.0, seed)?;
    let readout = p.readout()?;
    let j = sweep.exchange_at(dvp)?;
    let model = ExchangeVoltageModel::new(j.jx(), j.jy(), sweep.kappa)?;
    let obs = Observable::P_S12T34;
    let map = voltage_map(&model, &init_t34_s12(), obs, &grid, &grid, t_d, noise.as_ref(), &readout, seed)?;
    summary.insert("jx_MHz".into(), json!(j.jx()));
    summary.insert("jy_MHz".into(), json!(j.jy()));
    summary.insert("center".into(), center_json(&map));
    Ok(vec![map_panel("figS9", &obs.label(), &map)])
}

/// Result of the closed calibration loop.
#[derive(Clone, Debug, Serialize)]
pub struct CalibrationReport {
    pub iterations: usize,
    pub center_mv: [f64; 2],
    pub center_sigma_mv: [f64; 2],
    pub true_reference_mv: [f64; 2],
    pub j0x_estimate_mhz: f64,
    pub j0y_estimate_mhz: f64,
    pub j0x_true_mhz: f64,
    pub j0y_true_mhz: f64,
    /// Exchange uncertainty for the configured center precision.
    pub sigma_jx_mhz: f64,
    pub sigma_jy_mhz: f64,
    /// Error made by operating at nominal zero instead of the true center:
    /// prediction and exact-gap value.
    pub offset_jy_error_predicted_mhz: f64,
    pub offset_jy_error_exact_mhz: f64,
    pub sweep: Vec<[f64; 7]>,
}

struct Device {
    model: ExchangeVoltageModel,
    t: Vec<f64>,
    noise: Option<NoiseModel>,
    readout: Readout,
    seed: u64,
    counter: std::sync::atomic::AtomicU64,
}

impl Device {
    fn stream(&self) -> u64 {
        self.counter.fetch_add(1 << 24, std::sync::atomic::Ordering::Relaxed)
    }

    /// Fitted oscillation frequency of `obs` at `(x, y)`.
    fn frequency(&self, x: f64, y: f64, init: &SpinState, obs: Observable, stream: u64) -> Result<FitResult> {
        let seq = set_and_dwell(init.clone(), self.model.exchange_from_voltages(x, y)?, &self.t);
        let tr = trace(&seq, self.noise.as_ref(), obs, &self.readout, self.seed, stream)?;
        analysis::fit_damped_cosine(&self.t, &tr)
    }

    fn sweep_minimum(&self, along_x: bool, center: [f64; 2], offsets: &[f64]) -> Result<analysis::FrequencyMinimum> {
        let base = self.stream();
        let init = init_t34_s12();
        let pts: Vec<(f64, FitResult)> = offsets
            .par_iter()
            .enumerate()
            .filter_map(|(i, &o)| {
                let (x, y) = if along_x {
                    (center[0] + o, center[1])
                } else {
                    (center[0], center[1] + o)
                };
                let v = if along_x { x } else { y };
                self.frequency(x, y, &init, Observable::P_S34T12, base + i as u64)
                    .ok()
                    .map(|f| (v, f))
            })
            .collect();
        analysis::find_frequency_minimum(&pts)
    }
}

/// Ellipse-center plus frequency-minimum calibration against a simulated
/// device with a hidden balance point.
pub fn cmd_calibrate(cfg: &Config, seed: u64) -> Result<(CalibrationReport, BTreeMap<String, Value>)> {
    let mut p = Params::new(cfg, "calibrate");
    let truth = ExchangeVoltageModel::new(
        p.f64("device.j0x", 50.0)?,
        p.f64("device.j0y", 50.0)?,
        p.f64("device.kappa", DEFAULT_KAPPA)?,
    )?
    .with_reference(p.f64("device.dvx0", 0.0)?, p.f64("device.dvy0", 0.0)?);
    let t_d = p.f64("t_d_ns", 105.0)?;
    let map_offsets = p.grid("map", "mV", [-20.0, 20.0, 1.0])?;
    let sweep_offsets = p.grid("sweep", "mV", [-10.0, 10.0, 1.0])?;
    let t = p.grid("t", "ns", [0.0, 300.0, 2.0])?;
    let max_iter = p.usize("max_iter", 8)?;
    let tol = p.f64("tol_mV", 0.2)?;
    let sigma_center = p.f64("sigma_center_mv", 2.0)?;
    let noise = p.noise("noise.t_phi_ns", 0.0, seed)?;
    let readout = p.readout()?;
    let dvp = p.grid("dvp", "mV", [-20.0, 26.0, 2.0])?;
    let mut sweep_model = p.sweep_model()?;

    let device = Device {
        model: truth,
        t,
        noise,
        readout,
        seed,
        counter: std::sync::atomic::AtomicU64::new(0),
    };
    let init = init_t34_s12();
    let mut center = [0.0, 0.0];
    let mut sigma = [f64::NAN, f64::NAN];
    let mut done = None;
    for it in 0..max_iter {
        let xs: Vec<f64> = map_offsets.iter().map(|o| center[0] + o).collect();
        let ys: Vec<f64> = map_offsets.iter().map(|o| center[1] + o).collect();
        let map = voltage_map(
            &device.model,
            &init,
            Observable::P_S34T12,
            &xs,
            &ys,
            t_d,
            device.noise.as_ref(),
            &device.readout,
            mix_seed(seed, device.stream()),
        )?;
        let e = analysis::find_ellipse_center(&map)?;
        sigma = [e.sigma_x, e.sigma_y];
        let mx = device.sweep_minimum(true, [e.x, e.y], &sweep_offsets)?;
        let my = device.sweep_minimum(false, [mx.dv_star, e.y], &sweep_offsets)?;
        let next = [mx.dv_star, my.dv_star];
        let moved = ((next[0] - center[0]).powi(2) + (next[1] - center[1]).powi(2)).sqrt();
        center = next;
        if moved < tol {
            done = Some(it + 1);
            break;
        }
    }
    let iterations = done.ok_or(Error::CalibrationDiverged(max_iter))?;

    let s = device.stream();
    let fy = device.frequency(center[0], center[1], &init_t34_s12(), Observable::P_S34T12, s)?;
    let fx = device.frequency(center[0], center[1], &init_t23_s14()?, Observable::P_S23T14, s + 1)?;
    let (j0x, j0y) = (2.0 * fx.f, 2.0 * fy.f);
    let est = ExchangeVoltageModel::new(j0x, j0y, truth.kappa)?;
    let (sjx, sjy) = propagate_calibration_error(&est, &CalibrationUncertainty::symmetric(sigma_center))?;
    let off = [truth.reference[0], truth.reference[1]];
    let predicted = if off[0] == 0.0 && off[1] == 0.0 {
        0.0
    } else {
        propagate_calibration_error(
            &truth,
            &CalibrationUncertainty {
                dvx0: off[0],
                dvy0: off[1],
                sigma_center: off[0].abs().max(off[1].abs()),
            },
        )?
        .1
    };
    let at_nominal = truth.exchange_from_voltages(0.0, 0.0)?;
    let exact = 2.0 * dynamics::f_st_exact(&at_nominal)? - at_nominal.jy();

    sweep_model.j0x = j0x;
    sweep_model.j0y = j0y;
    let (left, right) = symmetric_sweep_traces(&sweep_model, &dvp, &device.t, device.noise.as_ref(), &device.readout, seed)?;
    let table = exchange_table(&sweep_model, &dvp, &device.t, &left, &right)?;
    let sweep = table
        .rows
        .iter()
        .map(|r| std::array::from_fn(|k| r[k]))
        .collect();

    Ok((
        CalibrationReport {
            iterations,
            center_mv: center,
            center_sigma_mv: sigma,
            true_reference_mv: off,
            j0x_estimate_mhz: j0x,
            j0y_estimate_mhz: j0y,
            j0x_true_mhz: truth.j0x,
            j0y_true_mhz: truth.j0y,
            sigma_jx_mhz: sjx,
            sigma_jy_mhz: sjy,
            offset_jy_error_predicted_mhz: predicted,
            offset_jy_error_exact_mhz: exact,
            sweep,
        },
        p.into_used(),
    ))
}

/// Runs the calibration and writes `calibrate.json` and `calibrate_sweep.csv`.
pub fn write_calibration(cfg: &Config, seed: u64, out: &Path) -> Result<(CalibrationReport, Vec<PathBuf>)> {
    let (report, params) = cmd_calibrate(cfg, seed)?;
    fs::create_dir_all(out)?;
    let mut panel = Panel::new(
        "calibrate_sweep",
        &["dVp_mV", "Jx_fit_MHz", "sigma_Jx_MHz", "Jy_fit_MHz", "sigma_Jy_MHz", "Jx_model_MHz", "Jy_model_MHz"],
    );
    panel.rows = report.sweep.iter().map(|r| r.to_vec()).collect();
    let csv_path = out.join("calibrate_sweep.csv");
    panel.write_csv(&csv_path)?;
    let json_path = out.join("calibrate.json");
    let doc = json!({"seed": seed, "parameters": params, "report": report});
    fs::write(&json_path, serde_json::to_string_pretty(&doc)? + "\n")?;
    Ok((report, vec![csv_path, json_path]))
}

/// Simulates a sequence file and writes both readout directions per dwell
/// time to `out`.
pub fn cmd_simulate(path: &Path, seed: u64, out: &Path) -> Result<PathBuf> {
    let file = SequenceFile::from_file(path)?;
    let seq = file.sequence()?;
    let noise = file.noise(seed)?;
    let probs = observe_readouts(&seq, noise.as_ref())?;
    let mut header = vec!["t_ns".to_string()];
    for dir in [ReadoutDirection::Horizontal, ReadoutDirection::Vertical] {
        for k in 0..4 {
            header.push(outcome_label(dir, k));
        }
    }
    let mut panel = Panel {
        name: "simulate".into(),
        header,
        rows: Vec::new(),
    };
    for (k, (t, pr)) in seq.dwell_ns.iter().zip(&probs).enumerate() {
        let mut row = vec![*t];
        for (d, dir) in [ReadoutDirection::Horizontal, ReadoutDirection::Vertical].into_iter().enumerate() {
            let m = match &file.readout {
                Some(spec) => {
                    let cfg = spec.config(dir, mix_seed(seed, (k * 2 + d) as u64))?;
                    if spec.n_shots == 0 {
                        apply_readout_channel(&pr[d], &cfg)
                    } else {
                        sample_shots(&pr[d], &cfg)?.probabilities()
                    }
                }
                None => pr[d],
            };
            row.extend(m);
        }
        panel.rows.push(row);
    }
    let target = if out.extension().is_some_and(|e| e == "csv") {
        if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent)?;
        }
        out.to_path_buf()
    } else {
        fs::create_dir_all(out)?;
        out.join("simulate.csv")
    };
    panel.write_csv(&target)?;
    Ok(target)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn outcome_labels() {
        assert_eq!(outcome_label(ReadoutDirection::Horizontal, 1), "P_S34T12");
        assert_eq!(outcome_label(ReadoutDirection::Vertical, 0), "P_S23S14");
        assert_eq!(outcome_label(ReadoutDirection::Horizontal, 2), "P_T34S12");
        assert_eq!(Observable::P_S12T34.label(), "P_T34S12");
    }

    #[test]
    fn t23_s14_lies_in_three_level_space() {
        let s = init_t23_s14().unwrap();
        assert!((s.norm() - 1.0).abs() < 1e-12);
        let p = measure_pair_probabilities(&s, ReadoutDirection::Vertical).unwrap();
        assert!((p[2] - 1.0).abs() < 1e-12, "{p:?}");
    }

    #[test]
    fn unknown_figure() {
        let cfg = Config::default();
        assert!(matches!(compute_figure("fig9z", &cfg, 0), Err(Error::UnknownFigure(_))));
    }

    #[test]
    fn fig3c_minimum_at_balance() {
        let mut cfg = Config::default();
        cfg.set("dv_step_mV", 2.0);
        let out = compute_figure("fig3c", &cfg, 0).unwrap();
        let m = &out.summary["frequency_minimum"];
        let dv = m["dv_star_mV"].as_f64().unwrap();
        assert!(dv.abs() < 0.1, "{m}");
        let jy = out.summary["jy_MHz"].as_f64().unwrap();
        assert!((m["jy_estimate_MHz"].as_f64().unwrap() / jy - 1.0).abs() < 0.01, "{m}");
    }

    #[test]
    fn readout_is_deterministic_per_stream() {
        let r = Readout {
            n_shots: 100,
            f_s: 0.95,
            f_t: 0.9,
        };
        let probs = [0.4, 0.1, 0.2, 0.3];
        let a = r.apply(&probs, ReadoutDirection::Horizontal, 5, 3).unwrap();
        let b = r.apply(&probs, ReadoutDirection::Horizontal, 5, 3).unwrap();
        let c = r.apply(&probs, ReadoutDirection::Horizontal, 5, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
