// SPDX-License-Identifier: Apache-2.0

//! Damped-cosine fitting, spectral peak finding, frequency-minimum location
//! and ellipse-center calibration.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector, Matrix5, Vector5};
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const TWO_PI_MILLI: f64 = 2.0 * PI * 1e-3;

/// `A·cos(2πft + φ)·exp(−(t/Tφ)²) + A0`, `t` in ns and `f` in MHz.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub a: f64,
    pub f: f64,
    pub phi: f64,
    pub t_phi: f64,
    pub a0: f64,
    /// Covariance of `(A, f, φ, Tφ, A0)`.
    pub covariance: [[f64; 5]; 5],
    pub residual_rms: f64,
    pub iterations: usize,
}

impl FitResult {
    pub fn eval(&self, t: f64) -> f64 {
        let env = if self.t_phi.is_finite() {
            (-(t / self.t_phi).powi(2)).exp()
        } else {
            1.0
        };
        self.a * (TWO_PI_MILLI * self.f * t + self.phi).cos() * env + self.a0
    }

    pub fn sigma(&self, k: usize) -> f64 {
        self.covariance[k][k].max(0.0).sqrt()
    }

    pub fn sigma_f(&self) -> f64 {
        self.sigma(1)
    }

    /// Flat `key = value` record.
    pub fn to_key_value(&self) -> String {
        let names = ["A", "f_MHz", "phi_rad", "T_phi_ns", "A0"];
        let values = [self.a, self.f, self.phi, self.t_phi, self.a0];
        let mut out = String::new();
        for (n, v) in names.iter().zip(values) {
            out.push_str(&format!("{n} = {v}\n"));
        }
        for (k, n) in names.iter().enumerate() {
            out.push_str(&format!("sigma_{n} = {}\n", self.sigma(k)));
        }
        out.push_str(&format!("residual_rms = {}\n", self.residual_rms));
        out.push_str(&format!("iterations = {}\n", self.iterations));
        for r in 0..5 {
            for c in 0..5 {
                out.push_str(&format!("cov_{r}{c} = {}\n", self.covariance[r][c]));
            }
        }
        out
    }

    pub fn from_key_value(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("missing '=' in '{line}'")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|e| Error::Parse(format!("{}: {e}", k.trim())))?;
            map.insert(k.trim().to_string(), v);
        }
        let get = |k: &str| {
            map.get(k)
                .copied()
                .ok_or_else(|| Error::Parse(format!("missing key {k}")))
        };
        let mut covariance = [[0.0; 5]; 5];
        for (r, row) in covariance.iter_mut().enumerate() {
            for (c, x) in row.iter_mut().enumerate() {
                *x = get(&format!("cov_{r}{c}"))?;
            }
        }
        Ok(Self {
            a: get("A")?,
            f: get("f_MHz")?,
            phi: get("phi_rad")?,
            t_phi: get("T_phi_ns")?,
            a0: get("A0")?,
            covariance,
            residual_rms: get("residual_rms")?,
            iterations: get("iterations")? as usize,
        })
    }
}

fn check_trace(t: &[f64], p: &[f64]) -> Result<()> {
    if t.len() != p.len() {
        return Err(Error::DimensionMismatch {
            expected: t.len(),
            got: p.len(),
        });
    }
    if t.iter().chain(p).any(|x| !x.is_finite()) {
        return Err(Error::Domain("non-finite sample".into()));
    }
    Ok(())
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn uniform_step(t: &[f64]) -> Option<f64> {
    let n = t.len();
    if n < 2 {
        return None;
    }
    let dt = (t[n - 1] - t[0]) / (n - 1) as f64;
    if dt <= 0.0 {
        return None;
    }
    let ok = t
        .iter()
        .enumerate()
        .all(|(k, &x)| (x - t[0] - k as f64 * dt).abs() <= 1e-6 * dt);
    ok.then_some(dt)
}

fn hann(n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![1.0; n];
    }
    (0..n)
        .map(|k| 0.5 - 0.5 * (2.0 * PI * k as f64 / (n - 1) as f64).cos())
        .collect()
}

/// Windowed, mean-removed spectral power at `f` MHz (direct sum).
fn power_at(t: &[f64], y: &[f64], w: &[f64], f: f64) -> f64 {
    let (mut re, mut im) = (0.0, 0.0);
    for k in 0..t.len() {
        let ph = TWO_PI_MILLI * f * t[k];
        re += w[k] * y[k] * ph.cos();
        im -= w[k] * y[k] * ph.sin();
    }
    re * re + im * im
}

/// One-sided power spectrum of a uniformly sampled trace, zero-padded by
/// `pad` (mean removed, Hann window). Returns `(freqs_MHz, power)`.
pub fn power_spectrum(t: &[f64], p: &[f64], pad: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    check_trace(t, p)?;
    let dt = uniform_step(t).ok_or_else(|| {
        Error::InsufficientData("spectrum needs a uniform time grid with >= 2 points".into())
    })?;
    let n = t.len();
    let m = (n * pad.max(1)).next_power_of_two();
    let mu = mean(p);
    let w = hann(n);
    let mut buf: Vec<Complex<f64>> = (0..m)
        .map(|k| {
            if k < n {
                Complex::new((p[k] - mu) * w[k], 0.0)
            } else {
                Complex::new(0.0, 0.0)
            }
        })
        .collect();
    FftPlanner::new().plan_fft_forward(m).process(&mut buf);
    let df = 1e3 / (dt * m as f64);
    let half = m / 2 + 1;
    Ok((
        (0..half).map(|k| k as f64 * df).collect(),
        buf[..half].iter().map(|c| c.norm_sqr()).collect(),
    ))
}

/// A refined spectral peak.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralPeak {
    pub f: f64,
    pub power: f64,
}

fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// The `n` strongest local maxima of the spectrum above DC, refined to
/// sub-bin precision and sorted by decreasing power.
pub fn spectral_peaks(t: &[f64], p: &[f64], n: usize) -> Result<Vec<SpectralPeak>> {
    let (freqs, power) = power_spectrum(t, p, 8)?;
    let df = freqs[1] - freqs[0];
    let mut idx: Vec<usize> = (1..power.len() - 1)
        .filter(|&k| power[k] > power[k - 1] && power[k] >= power[k + 1])
        .collect();
    idx.sort_by(|&a, &b| power[b].total_cmp(&power[a]));
    idx.truncate(n);
    let mu = mean(p);
    let y: Vec<f64> = p.iter().map(|v| v - mu).collect();
    let w = hann(t.len());
    let span = t[t.len() - 1] - t[0];
    let tol = 1e-6 / span * 1e3;
    Ok(idx
        .into_iter()
        .map(|k| {
            let f = golden_max(|f| power_at(t, &y, &w, f), freqs[k] - df, freqs[k] + df, tol);
            SpectralPeak {
                f,
                power: power_at(t, &y, &w, f),
            }
        })
        .collect())
}

/// Dominant oscillation frequency; fails when the strongest peak is not at
/// least ten times the median spectral power.
pub fn dominant_frequency(t: &[f64], p: &[f64]) -> Result<f64> {
    let (_, power) = power_spectrum(t, p, 8)?;
    let mut sorted = power[1..].to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    let peaks = spectral_peaks(t, p, 1)?;
    let peak = peaks.first().ok_or(Error::NoOscillation)?;
    if !(peak.power > 10.0 * median) || peak.power == 0.0 {
        return Err(Error::NoOscillation);
    }
    Ok(peak.f)
}

/// Internal parameters `[a, b, f, v, c]` with
/// `m(t) = exp(−v t²)(a cos ωt + b sin ωt) + c`, `v = 1/Tφ²`.
fn model_and_jacobian(x: &Vector5<f64>, t: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
    let n = t.len();
    let mut m = DVector::zeros(n);
    let mut j = DMatrix::zeros(n, 5);
    for k in 0..n {
        let tk = t[k];
        let w = TWO_PI_MILLI * x[2] * tk;
        let (s, c) = w.sin_cos();
        let e = (-x[3] * tk * tk).exp();
        let osc = x[0] * c + x[1] * s;
        m[k] = e * osc + x[4];
        j[(k, 0)] = e * c;
        j[(k, 1)] = e * s;
        j[(k, 2)] = e * (-x[0] * s + x[1] * c) * TWO_PI_MILLI * tk;
        j[(k, 3)] = -tk * tk * e * osc;
        j[(k, 4)] = 1.0;
    }
    (m, j)
}

/// Linear least squares for `(a, b, c)` at fixed `(f, v)`; returns the
/// coefficients and the residual sum of squares.
fn linear_solve(t: &[f64], p: &[f64], f: f64, v: f64) -> Option<([f64; 3], f64)> {
    let n = t.len();
    let basis = DMatrix::from_fn(n, 3, |k, col| {
        let e = (-v * t[k] * t[k]).exp();
        let w = TWO_PI_MILLI * f * t[k];
        match col {
            0 => e * w.cos(),
            1 => e * w.sin(),
            _ => 1.0,
        }
    });
    let y = DVector::from_column_slice(p);
    let ata = basis.transpose() * &basis;
    let aty = basis.transpose() * &y;
    let sol = ata.cholesky()?.solve(&aty);
    let rss = (&basis * &sol - y).norm_squared();
    Some(([sol[0], sol[1], sol[2]], rss))
}

fn wrap_phase(phi: f64) -> f64 {
    let mut p = phi % (2.0 * PI);
    if p <= -PI {
        p += 2.0 * PI;
    } else if p > PI {
        p -= 2.0 * PI;
    }
    p
}

/// Fits `A·cos(2πft+φ)·exp(−(t/Tφ)²) + A0` by Levenberg-Marquardt, seeded
/// from the dominant spectral peak and a scan over the decay rate.
pub fn fit_damped_cosine(t: &[f64], p: &[f64]) -> Result<FitResult> {
    check_trace(t, p)?;
    if t.len() < 10 {
        return Err(Error::InsufficientData(format!(
            "{} points, need at least 10",
            t.len()
        )));
    }
    let f0 = dominant_frequency(t, p)?;
    let t_min = t.iter().cloned().fold(f64::INFINITY, f64::min);
    let t_max = t.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = t_max - t_min;
    if f0 * span * 1e-3 < 1.5 {
        return Err(Error::InsufficientData(format!(
            "trace spans {:.2} periods, need 1.5",
            f0 * span * 1e-3
        )));
    }

    // decay-rate scan with the linear parameters solved exactly
    let mut best: Option<(Vector5<f64>, f64)> = None;
    let tt = t_max.abs().max(t_min.abs());
    let mut grid = vec![0.0];
    grid.extend((0..48).map(|k| (0.05 / tt).powi(2) * (10f64).powf(k as f64 * 5.0 / 47.0)));
    for v in grid {
        if let Some((ab, rss)) = linear_solve(t, p, f0, v) {
            if best.as_ref().is_none_or(|b| rss < b.1) {
                best = Some((Vector5::new(ab[0], ab[1], f0, v, ab[2]), rss));
            }
        }
    }
    let (mut x, _) = best.ok_or(Error::NoOscillation)?;

    let y = DVector::from_column_slice(p);
    let cost = |x: &Vector5<f64>| {
        let (m, _) = model_and_jacobian(x, t);
        (m - &y).norm_squared()
    };
    let mut c = cost(&x);
    let mut lambda = 1e-3;
    let mut iterations = 0;
    for it in 0..500 {
        iterations = it + 1;
        let (m, jac) = model_and_jacobian(&x, t);
        let r = &y - m;
        let jtj: Matrix5<f64> = (jac.transpose() * &jac).fixed_view::<5, 5>(0, 0).into();
        let g: Vector5<f64> = (jac.transpose() * &r).fixed_rows::<5>(0).into();
        let mut g_proj = g;
        if x[3] <= 0.0 && g[3] < 0.0 {
            g_proj[3] = 0.0;
        }
        if g_proj.amax() < 1e-10 {
            break;
        }
        let mut improved = false;
        for _ in 0..60 {
            let mut a = jtj;
            for k in 0..5 {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
            }
            let Some(chol) = a.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let step = chol.solve(&g);
            let mut trial = x + step;
            trial[3] = trial[3].max(0.0);
            let ct = cost(&trial);
            if ct < c {
                let rel = (c - ct) / c.max(1e-300);
                let small_step = (trial - x).amax() <= 1e-15 * x.amax().max(1.0);
                x = trial;
                c = ct;
                lambda = (lambda / 3.0).max(1e-12);
                improved = true;
                if rel < 1e-16 || small_step {
                    lambda = f64::NAN;
                }
                break;
            }
            lambda *= 4.0;
            if lambda > 1e16 {
                break;
            }
        }
        if !improved || lambda.is_nan() {
            break;
        }
    }

    let n = t.len();
    let (m, jac) = model_and_jacobian(&x, t);
    let rss = (m - &y).norm_squared();
    let s2 = if n > 5 { rss / (n - 5) as f64 } else { 0.0 };
    let jtj = jac.transpose() * &jac;
    let cov_int = jtj
        .clone()
        .try_inverse()
        .or_else(|| jtj.pseudo_inverse(1e-14).ok())
        .unwrap_or_else(|| DMatrix::from_element(5, 5, f64::NAN))
        * s2;

    let (a, b, f, v, c0) = (x[0], x[1], x[2], x[3], x[4]);
    let amp = (a * a + b * b).sqrt();
    let phi = wrap_phase((-b).atan2(a));
    let t_phi = if v > 0.0 { 1.0 / v.sqrt() } else { f64::INFINITY };
    // Jacobian of (A, f, φ, Tφ, A0) with respect to (a, b, f, v, c)
    let mut d = DMatrix::zeros(5, 5);
    if amp > 0.0 {
        d[(0, 0)] = a / amp;
        d[(0, 1)] = b / amp;
        d[(2, 0)] = b / (amp * amp);
        d[(2, 1)] = -a / (amp * amp);
    }
    d[(1, 2)] = 1.0;
    d[(3, 3)] = if v > 0.0 { -0.5 * v.powf(-1.5) } else { f64::INFINITY };
    d[(4, 4)] = 1.0;
    let cov = &d * cov_int * d.transpose();
    let mut covariance = [[0.0; 5]; 5];
    for r in 0..5 {
        for col in 0..5 {
            covariance[r][col] = cov[(r, col)];
        }
    }
    Ok(FitResult {
        a: amp,
        f: f.abs(),
        phi: if f < 0.0 { -phi } else { phi },
        t_phi,
        a0: c0,
        covariance,
        residual_rms: (rss / n as f64).sqrt(),
        iterations,
    })
}

/// Vertex of a local quadratic fit to a frequency sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyMinimum {
    pub dv_star: f64,
    pub f_min: f64,
    /// `c` in `f = f_min + c·(δV − δV*)²`, MHz/mV².
    pub curvature: f64,
}

/// Weighted quadratic through `points` (`(x, y, weight)`), as `(c0, c1, c2)`.
/// Weighted least-squares `y = c0 + c1·u + c2·u²` with `u = x − x0`.
fn quadratic_fit(points: &[(f64, f64, f64)], x0: f64) -> Option<[f64; 3]> {
    let mut ata = nalgebra::Matrix3::<f64>::zeros();
    let mut aty = nalgebra::Vector3::<f64>::zeros();
    for &(x, y, w) in points {
        let u = x - x0;
        let row = nalgebra::Vector3::new(1.0, u, u * u);
        ata += w * row * row.transpose();
        aty += w * y * row;
    }
    let sol = ata.lu().solve(&aty)?;
    Some([sol[0], sol[1], sol[2]])
}

/// Relative floor on `σ_f`, so that near-exact fits do not dominate the
/// weights by many orders of magnitude.
const SIGMA_F_FLOOR: f64 = 1e-6;

/// Locates the minimum of `f(δV)` from `(δV, f, σ_f)` samples; a zero or
/// non-finite `σ_f` gives unit weight.
pub fn find_frequency_minimum_values(points: &[(f64, f64, f64)]) -> Result<FrequencyMinimum> {
    if points.len() < 5 {
        return Err(Error::InsufficientData(format!(
            "{} sweep points, need at least 5",
            points.len()
        )));
    }
    let mut pts: Vec<(f64, f64, f64)> = points
        .iter()
        .map(|&(x, y, s)| {
            let w = if s.is_finite() && s > 0.0 {
                1.0 / (s * s + (SIGMA_F_FLOOR * y).powi(2))
            } else {
                1.0
            };
            (x, y, w)
        })
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let imin = (0..pts.len())
        .min_by(|&a, &b| pts[a].1.total_cmp(&pts[b].1))
        .unwrap();
    if imin == 0 || imin == pts.len() - 1 {
        return Err(Error::Bracket);
    }
    let lo_x = pts[0].0;
    let hi_x = pts[pts.len() - 1].0;
    let mut center = pts[imin].0;
    let mut coef = [0.0; 3];
    let mut vertex = center;
    for _ in 0..4 {
        let mut near: Vec<(f64, f64, f64)> = pts.clone();
        near.sort_by(|a, b| (a.0 - center).abs().total_cmp(&(b.0 - center).abs()));
        near.truncate(5);
        coef = quadratic_fit(&near, center).ok_or(Error::Bracket)?;
        if !(coef[2] > 0.0) {
            return Err(Error::Bracket);
        }
        vertex = center - coef[1] / (2.0 * coef[2]);
        if !(vertex > lo_x && vertex < hi_x) {
            return Err(Error::Bracket);
        }
        let step = (vertex - center).abs();
        center = vertex;
        if step < 1e-12 {
            break;
        }
    }
    Ok(FrequencyMinimum {
        dv_star: vertex,
        f_min: coef[0] - coef[1] * coef[1] / (4.0 * coef[2]),
        curvature: coef[2],
    })
}

/// Same as [`find_frequency_minimum_values`], weighting by the fit errors.
pub fn find_frequency_minimum(sweep: &[(f64, FitResult)]) -> Result<FrequencyMinimum> {
    let pts: Vec<(f64, f64, f64)> = sweep.iter().map(|(x, r)| (*x, r.f, r.sigma_f())).collect();
    find_frequency_minimum_values(&pts)
}

/// Probability field on a rectangular, uniformly spaced voltage lattice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationMap {
    pub dvx: Vec<f64>,
    pub dvy: Vec<f64>,
    /// `values[iy][ix]`.
    pub values: Vec<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EllipseCenter {
    pub x: f64,
    pub y: f64,
    pub sigma_x: f64,
    pub sigma_y: f64,
    /// Point-reflection correlation at the optimum.
    pub score: f64,
}

impl CalibrationMap {
    pub fn new(dvx: Vec<f64>, dvy: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        let m = Self { dvx, dvy, values };
        m.validate()?;
        Ok(m)
    }

    pub fn from_fn<F: Fn(f64, f64) -> f64>(dvx: Vec<f64>, dvy: Vec<f64>, f: F) -> Result<Self> {
        let values = dvy
            .iter()
            .map(|&y| dvx.iter().map(|&x| f(x, y)).collect())
            .collect();
        Self::new(dvx, dvy, values)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dvx.len() < 3 || self.dvy.len() < 3 {
            return Err(Error::InsufficientData("map needs at least 3x3 points".into()));
        }
        if self.values.len() != self.dvy.len() {
            return Err(Error::DimensionMismatch {
                expected: self.dvy.len(),
                got: self.values.len(),
            });
        }
        if let Some(row) = self.values.iter().find(|r| r.len() != self.dvx.len()) {
            return Err(Error::DimensionMismatch {
                expected: self.dvx.len(),
                got: row.len(),
            });
        }
        if uniform_step(&self.dvx).is_none() || uniform_step(&self.dvy).is_none() {
            return Err(Error::Domain("map axes must be increasing and uniform".into()));
        }
        Ok(())
    }

    fn sample(&self, x: f64, y: f64) -> Option<f64> {
        let (nx, ny) = (self.dvx.len(), self.dvy.len());
        let dx = (self.dvx[nx - 1] - self.dvx[0]) / (nx - 1) as f64;
        let dy = (self.dvy[ny - 1] - self.dvy[0]) / (ny - 1) as f64;
        let fx = (x - self.dvx[0]) / dx;
        let fy = (y - self.dvy[0]) / dy;
        let eps = 1e-9;
        if fx < -eps || fy < -eps || fx > (nx - 1) as f64 + eps || fy > (ny - 1) as f64 + eps {
            return None;
        }
        let ix = (fx.floor() as usize).min(nx - 2);
        let iy = (fy.floor() as usize).min(ny - 2);
        let (ux, uy) = ((fx - ix as f64).clamp(0.0, 1.0), (fy - iy as f64).clamp(0.0, 1.0));
        let v = &self.values;
        Some(
            v[iy][ix] * (1.0 - ux) * (1.0 - uy)
                + v[iy][ix + 1] * ux * (1.0 - uy)
                + v[iy + 1][ix] * (1.0 - ux) * uy
                + v[iy + 1][ix + 1] * ux * uy,
        )
    }

    /// Pearson correlation between the map and its point reflection through
    /// `(cx, cy)`, over the overlap. `None` when the overlap is too small.
    pub fn reflection_score(&self, cx: f64, cy: f64) -> Option<f64> {
        let mut a = Vec::new();
        let mut b = Vec::new();
        for (iy, &y) in self.dvy.iter().enumerate() {
            for (ix, &x) in self.dvx.iter().enumerate() {
                if let Some(r) = self.sample(2.0 * cx - x, 2.0 * cy - y) {
                    a.push(self.values[iy][ix]);
                    b.push(r);
                }
            }
        }
        let total = self.dvx.len() * self.dvy.len();
        if a.len() * 4 < total {
            return None;
        }
        let (ma, mb) = (mean(&a), mean(&b));
        let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
        for k in 0..a.len() {
            let (da, db) = (a[k] - ma, b[k] - mb);
            sab += da * db;
            saa += da * da;
            sbb += db * db;
        }
        if saa <= 0.0 || sbb <= 0.0 {
            return None;
        }
        Some(sab / (saa * sbb).sqrt())
    }

    pub fn translated(&self, sx: f64, sy: f64) -> Self {
        Self {
            dvx: self.dvx.iter().map(|x| x + sx).collect(),
            dvy: self.dvy.iter().map(|y| y + sy).collect(),
            values: self.values.clone(),
        }
    }

    /// Map rotated by 180° about the origin.
    pub fn rotated_180(&self) -> Self {
        Self {
            dvx: self.dvx.iter().rev().map(|x| -x).collect(),
            dvy: self.dvy.iter().rev().map(|y| -y).collect(),
            values: self
                .values
                .iter()
                .rev()
                .map(|r| r.iter().rev().copied().collect())
                .collect(),
        }
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["dVx_mV", "dVy_mV", "probability"])?;
        for (iy, &y) in self.dvy.iter().enumerate() {
            for (ix, &x) in self.dvx.iter().enumerate() {
                w.serialize((x, y, self.values[iy][ix]))?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let mut rows: Vec<(f64, f64, f64)> = Vec::new();
        for rec in rdr.deserialize() {
            rows.push(rec?);
        }
        let mut xs: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let mut ys: Vec<f64> = rows.iter().map(|r| r.1).collect();
        for v in [&mut xs, &mut ys] {
            v.sort_by(f64::total_cmp);
            v.dedup();
        }
        let mut values = vec![vec![f64::NAN; xs.len()]; ys.len()];
        for (x, y, p) in rows {
            let ix = xs.iter().position(|&v| v == x).unwrap();
            let iy = ys.iter().position(|&v| v == y).unwrap();
            values[iy][ix] = p;
        }
        if values.iter().flatten().any(|v| v.is_nan()) {
            return Err(Error::Parse("map is not a complete rectangular grid".into()));
        }
        Self::new(xs, ys, values)
    }
}

/// Center of two-fold point symmetry of the map, from the maximum of the
/// reflection correlation. The uncertainty along each axis is the distance
/// at which the correlation falls to half its peak value.
pub fn find_ellipse_center(map: &CalibrationMap) -> Result<EllipseCenter> {
    map.validate()?;
    let (nx, ny) = (map.dvx.len(), map.dvy.len());
    let (x0, x1) = (map.dvx[0], map.dvx[nx - 1]);
    let (y0, y1) = (map.dvy[0], map.dvy[ny - 1]);
    let hx = (x1 - x0) / (nx - 1) as f64;
    let hy = (y1 - y0) / (ny - 1) as f64;
    let score = |x: f64, y: f64| map.reflection_score(x, y).unwrap_or(f64::NEG_INFINITY);

    // coarse search over the central half of the map, half-pixel steps
    let (mut bx, mut by, mut bs) = (0.5 * (x0 + x1), 0.5 * (y0 + y1), f64::NEG_INFINITY);
    let steps_x = ((x1 - x0) / hx).round() as i64;
    let steps_y = ((y1 - y0) / hy).round() as i64;
    for iy in steps_y / 2..=(3 * steps_y) / 2 {
        let y = y0 + 0.5 * iy as f64 * hy;
        for ix in steps_x / 2..=(3 * steps_x) / 2 {
            let x = x0 + 0.5 * ix as f64 * hx;
            let s = score(x, y);
            if s > bs {
                (bx, by, bs) = (x, y, s);
            }
        }
    }
    if !bs.is_finite() {
        return Err(Error::NoSymmetry);
    }
    // pattern refinement
    let (mut sx, mut sy) = (0.25 * hx, 0.25 * hy);
    while sx > 1e-4 * hx {
        let mut moved = false;
        for (dx, dy) in [(sx, 0.0), (-sx, 0.0), (0.0, sy), (0.0, -sy)] {
            let s = score(bx + dx, by + dy);
            if s > bs {
                (bx, by, bs) = (bx + dx, by + dy, s);
                moved = true;
            }
        }
        if !moved {
            sx *= 0.5;
            sy *= 0.5;
        }
    }
    if bs < 0.5 {
        return Err(Error::NoSymmetry);
    }
    let half_width = |dir: (f64, f64), limit: f64, step: f64| {
        let mut d = step;
        while d <= limit {
            if score(bx + dir.0 * d, by + dir.1 * d) <= 0.5 * bs {
                return d;
            }
            d += step;
        }
        limit
    };
    let wx = 0.5
        * (half_width((1.0, 0.0), 0.5 * (x1 - x0), 0.05 * hx)
            + half_width((-1.0, 0.0), 0.5 * (x1 - x0), 0.05 * hx));
    let wy = 0.5
        * (half_width((0.0, 1.0), 0.5 * (y1 - y0), 0.05 * hy)
            + half_width((0.0, -1.0), 0.5 * (y1 - y0), 0.05 * hy));
    Ok(EllipseCenter {
        x: bx,
        y: by,
        sigma_x: wx,
        sigma_y: wy,
        score: bs,
    })
}

/// Reads a `(t_ns, probability)` CSV with a header row.
pub fn read_trace_csv<R: Read>(reader: R) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut t = Vec::new();
    let mut p = Vec::new();
    for rec in rdr.deserialize() {
        let (a, b): (f64, f64) = rec?;
        t.push(a);
        p.push(b);
    }
    Ok((t, p))
}

pub fn write_trace_csv<W: Write>(writer: W, t: &[f64], p: &[f64]) -> Result<()> {
    check_trace(t, p)?;
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["t_ns", "probability"])?;
    for (a, b) in t.iter().zip(p) {
        w.serialize((a, b))?;
    }
    w.flush()?;
    Ok(())
}
