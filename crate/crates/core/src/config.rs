// SPDX-License-Identifier: Apache-2.0

//! Flat dotted-key configuration and the pulse-sequence file format.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::{NoiseMode, NoiseModel, PulseSegment, PulseSequence, RampMode, RampProfile};
use crate::error::{Error, Result};
use crate::hamiltonians::{ExchangeConfig, ZeemanConfig};
use crate::measurement::{ReadoutConfig, ReadoutDirection};
use crate::spin::{self, BasisLabel, PairState, SpinState};

/// Key-value document. Nested TOML tables are flattened to dotted keys, so
/// `[noise]\nt_phi_ns = 130` and `noise.t_phi_ns = 130` are equivalent.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Config {
    values: BTreeMap<String, toml::Value>,
}

fn flatten(prefix: &str, table: toml::Table, out: &mut BTreeMap<String, toml::Value>) {
    for (k, v) in table {
        let key = if prefix.is_empty() {
            k
        } else {
            format!("{prefix}.{k}")
        };
        match v {
            toml::Value::Table(t) => flatten(&key, t, out),
            other => {
                out.insert(key, other);
            }
        }
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let table: toml::Table = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let mut values = BTreeMap::new();
        flatten("", table, &mut values);
        Ok(Self { values })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn set(&mut self, key: &str, value: impl Into<toml::Value>) {
        self.values.insert(key.to_string(), value.into());
    }

    pub fn get(&self, key: &str) -> Option<&toml::Value> {
        self.values.get(key)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.values.keys().map(String::as_str)
    }

    pub fn f64_opt(&self, key: &str) -> Result<Option<f64>> {
        match self.values.get(key) {
            None => Ok(None),
            Some(toml::Value::Float(x)) => Ok(Some(*x)),
            Some(toml::Value::Integer(x)) => Ok(Some(*x as f64)),
            Some(v) => Err(Error::Parse(format!("{key}: expected a number, got {v}"))),
        }
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        Ok(self.f64_opt(key)?.unwrap_or(default))
    }

    pub fn u64_opt(&self, key: &str) -> Result<Option<u64>> {
        match self.values.get(key) {
            None => Ok(None),
            Some(toml::Value::Integer(x)) if *x >= 0 => Ok(Some(*x as u64)),
            Some(v) => Err(Error::Parse(format!(
                "{key}: expected a non-negative integer, got {v}"
            ))),
        }
    }

    pub fn bool_opt(&self, key: &str) -> Result<Option<bool>> {
        match self.values.get(key) {
            None => Ok(None),
            Some(toml::Value::Boolean(b)) => Ok(Some(*b)),
            Some(v) => Err(Error::Parse(format!("{key}: expected a boolean, got {v}"))),
        }
    }

    pub fn str_opt(&self, key: &str) -> Result<Option<&str>> {
        match self.values.get(key) {
            None => Ok(None),
            Some(toml::Value::String(s)) => Ok(Some(s)),
            Some(v) => Err(Error::Parse(format!("{key}: expected a string, got {v}"))),
        }
    }
}

/// Initial state of a simulated sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitSpec {
    SingletX {
        #[serde(default)]
        full: bool,
    },
    SingletY {
        #[serde(default)]
        full: bool,
    },
    SWave {
        #[serde(default)]
        full: bool,
    },
    DWave {
        #[serde(default)]
        full: bool,
    },
    /// Two disjoint pair states, optionally projected onto a subspace.
    PairProduct {
        first: PairState,
        second: PairState,
        #[serde(default)]
        basis: Option<BasisLabel>,
    },
    BasisState {
        basis: BasisLabel,
        index: usize,
    },
}

impl InitSpec {
    pub fn build(&self) -> Result<SpinState> {
        let embed = |s: SpinState, full: bool| if full { s.to_full() } else { s };
        match self {
            InitSpec::SingletX { full } => Ok(embed(spin::singlet_x(), *full)),
            InitSpec::SingletY { full } => Ok(embed(spin::singlet_y(), *full)),
            InitSpec::SWave { full } => Ok(embed(spin::s_wave(), *full)),
            InitSpec::DWave { full } => Ok(embed(spin::d_wave(), *full)),
            InitSpec::PairProduct {
                first,
                second,
                basis,
            } => {
                let s = spin::build_pair_product_state(*first, *second)?;
                match basis {
                    None | Some(BasisLabel::Full16) => Ok(s),
                    Some(b) => {
                        let leak = s.leakage(*b);
                        if leak > 1e-12 {
                            return Err(Error::Domain(format!(
                                "initial state leaks {leak:.3e} out of {b:?}"
                            )));
                        }
                        s.project_onto(*b)
                    }
                }
            }
            InitSpec::BasisState { basis, index } => SpinState::basis_state(*basis, *index),
        }
    }
}

/// Dwell grid, either explicit or as `start..=stop` in `step` increments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DwellSpec {
    #[serde(default)]
    pub times_ns: Option<Vec<f64>>,
    #[serde(default)]
    pub start_ns: f64,
    #[serde(default)]
    pub stop_ns: Option<f64>,
    #[serde(default)]
    pub step_ns: Option<f64>,
}

/// Inclusive uniform grid `start, start + step, …, ≤ stop`.
pub fn linear_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(stop >= start) || !start.is_finite() || !stop.is_finite() {
        return Err(Error::Domain(format!(
            "bad grid start={start} stop={stop} step={step}"
        )));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..n).map(|k| start + k as f64 * step).collect())
}

impl DwellSpec {
    pub fn times(&self) -> Result<Vec<f64>> {
        if let Some(t) = &self.times_ns {
            return Ok(t.clone());
        }
        match (self.stop_ns, self.step_ns) {
            (Some(stop), Some(step)) => linear_grid(self.start_ns, stop, step),
            _ => Err(Error::Parse(
                "dwell needs times_ns or both stop_ns and step_ns".into(),
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    #[serde(default)]
    pub t_phi_ns: Option<f64>,
    #[serde(default)]
    pub sigma_f: Option<f64>,
    #[serde(default = "default_samples")]
    pub n_samples: usize,
    #[serde(default)]
    pub mode: NoiseMode,
}

fn default_samples() -> usize {
    200
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReadoutSpec {
    pub n_shots: usize,
    #[serde(default = "one")]
    pub f_s: f64,
    #[serde(default = "one")]
    pub f_t: f64,
}

fn one() -> f64 {
    1.0
}

impl ReadoutSpec {
    pub fn config(&self, direction: ReadoutDirection, seed: u64) -> Result<ReadoutConfig> {
        let cfg = ReadoutConfig {
            direction,
            n_shots: self.n_shots,
            seed,
            ..ReadoutConfig::default()
        }
        .with_fidelity(self.f_s, self.f_t);
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Ad-hoc pulse sequence read from a TOML file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceFile {
    pub init: InitSpec,
    #[serde(default)]
    pub start: Option<ExchangeConfig>,
    #[serde(default)]
    pub ramp_mode: RampMode,
    #[serde(default)]
    pub ramp_profile: RampProfile,
    #[serde(default, rename = "segment")]
    pub segments: Vec<PulseSegment>,
    pub dwell: DwellSpec,
    #[serde(default)]
    pub zeeman: Option<ZeemanConfig>,
    #[serde(default)]
    pub noise: Option<NoiseSpec>,
    #[serde(default)]
    pub readout: Option<ReadoutSpec>,
}

impl SequenceFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn sequence(&self) -> Result<PulseSequence> {
        let mut seq = PulseSequence::new(self.init.build()?, self.segments.clone(), self.dwell.times()?);
        if let Some(start) = self.start {
            seq.start = start;
        }
        seq.ramp_mode = self.ramp_mode;
        seq.ramp_profile = self.ramp_profile;
        seq.zeeman = self.zeeman;
        if seq.zeeman.is_some() && seq.init.basis() != BasisLabel::Full16 {
            return Err(Error::Domain("Zeeman terms need a Full16 initial state".into()));
        }
        seq.validate()?;
        Ok(seq)
    }

    pub fn noise(&self, seed: u64) -> Result<Option<NoiseModel>> {
        let Some(spec) = &self.noise else {
            return Ok(None);
        };
        let sigma_f = match (spec.sigma_f, spec.t_phi_ns) {
            (Some(s), None) => s,
            (None, Some(t)) => crate::dynamics::sigma_f_for_t_phi(t)?,
            (None, None) => 0.0,
            (Some(_), Some(_)) => {
                return Err(Error::Parse("give either noise.sigma_f or noise.t_phi_ns".into()))
            }
        };
        let mut m = NoiseModel::new(sigma_f, spec.n_samples, seed)?;
        m.mode = spec.mode;
        Ok(Some(m))
    }
}
