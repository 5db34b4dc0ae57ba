//! Periodic torus discretisation of ℝⁿ (n = 1, 2), discrete Fourier
//! transforms and the exact per-mode multipliers of the linear flows.
//!
//! Index `k ∈ {−N/2, …, N/2−1}` along each axis has frequency `ξ_k = πk/L`.
//! The forward transform carries the `1/Nⁿ` factor, so mode zero is the
//! spatial mean and `∫ f dx = (2L)ⁿ · f̂₀`.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Width of the window around `λ = 1/4` where the Taylor form of the
/// propagator replaces the trigonometric/hyperbolic one.
pub const SERIES_HALF_WIDTH: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Spatial dimension, 1 or 2.
    pub n: usize,
    /// Half-width `L` of the torus `[−L, L]ⁿ`.
    #[serde(rename = "L")]
    pub half_width: f64,
    /// Points per axis, a power of two.
    #[serde(rename = "N")]
    pub points: usize,
}

/// Build a grid after validating `n ∈ {1,2}`, `L > 0` and `N` a power of two ≥ 16.
pub fn make_grid(n: usize, half_width: f64, points: usize) -> Result<GridSpec> {
    if n != 1 && n != 2 {
        return Err(Error::Grid(format!("dimension must be 1 or 2, got {n}")));
    }
    if !(half_width > 0.0) || !half_width.is_finite() {
        return Err(Error::Grid(format!("half-width must be positive, got {half_width}")));
    }
    if !points.is_power_of_two() {
        return Err(Error::Grid(format!("N must be a power of two, got {points}")));
    }
    if points < 16 {
        return Err(Error::Grid(format!("N must be at least 16, got {points}")));
    }
    Ok(GridSpec { n, half_width, points })
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        make_grid(self.n, self.half_width, self.points).map(|_| ())
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_width / self.points as f64
    }

    /// Total number of nodes `Nⁿ`.
    pub fn len(&self) -> usize {
        self.points.pow(self.n as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Torus volume `(2L)ⁿ`.
    pub fn volume(&self) -> f64 {
        (2.0 * self.half_width).powi(self.n as i32)
    }

    pub fn cell_volume(&self) -> f64 {
        self.dx().powi(self.n as i32)
    }

    /// Nodes along one axis, `x_j = −L + 2L·j/N`.
    pub fn axis_nodes(&self) -> Vec<f64> {
        let dx = self.dx();
        (0..self.points)
            .map(|j| -self.half_width + dx * j as f64)
            .collect()
    }

    /// Signed mode number for storage index `i` along one axis.
    pub fn mode_number(&self, i: usize) -> i64 {
        let n = self.points as i64;
        let i = i as i64;
        if i < n / 2 {
            i
        } else {
            i - n
        }
    }

    /// Frequencies `ξ = πk/L` along one axis in storage order.
    pub fn axis_frequencies(&self) -> Vec<f64> {
        let scale = std::f64::consts::PI / self.half_width;
        (0..self.points)
            .map(|i| scale * self.mode_number(i) as f64)
            .collect()
    }

    /// `|ξ|²` for every mode, row-major.
    pub fn lambdas(&self) -> Vec<f64> {
        let xi = self.axis_frequencies();
        match self.n {
            1 => xi.iter().map(|x| x * x).collect(),
            _ => {
                let mut out = Vec::with_capacity(self.len());
                for a in &xi {
                    for b in &xi {
                        out.push(a * a + b * b);
                    }
                }
                out
            }
        }
    }

    /// Euclidean distance from the origin for every node, row-major.
    pub fn radii(&self) -> Vec<f64> {
        let x = self.axis_nodes();
        match self.n {
            1 => x.iter().map(|v| v.abs()).collect(),
            _ => {
                let mut out = Vec::with_capacity(self.len());
                for a in &x {
                    for b in &x {
                        out.push((a * a + b * b).sqrt());
                    }
                }
                out
            }
        }
    }

    /// Sup-norm distance from the origin; used for the boundary band.
    pub fn box_radii(&self) -> Vec<f64> {
        let x = self.axis_nodes();
        match self.n {
            1 => x.iter().map(|v| v.abs()).collect(),
            _ => {
                let mut out = Vec::with_capacity(self.len());
                for a in &x {
                    for b in &x {
                        out.push(a.abs().max(b.abs()));
                    }
                }
                out
            }
        }
    }

    /// 2/3-rule mask: `false` for modes with `|k| > N/3` along any axis.
    pub fn dealias_mask(&self) -> Vec<bool> {
        let cutoff = self.points as i64 / 3;
        let keep: Vec<bool> = (0..self.points)
            .map(|i| self.mode_number(i).abs() <= cutoff)
            .collect();
        match self.n {
            1 => keep,
            _ => {
                let mut out = Vec::with_capacity(self.len());
                for a in &keep {
                    for b in &keep {
                        out.push(*a && *b);
                    }
                }
                out
            }
        }
    }

    /// Dealiasing weights for the forcing spectrum: zero where the 2/3-rule
    /// mask drops a mode, and `exp(−36 (|k|/k_c)^36)` per axis below the
    /// cutoff `k_c = N/3`. The roll-off keeps the truncation from spreading
    /// sinc ringing across the torus.
    pub fn dealias_filter(&self) -> Vec<f64> {
        let cutoff = (self.points / 3) as f64;
        let axis: Vec<f64> = (0..self.points)
            .map(|i| {
                let k = self.mode_number(i).abs() as f64;
                if k > cutoff {
                    0.0
                } else {
                    (-36.0 * (k / cutoff).powi(36)).exp()
                }
            })
            .collect();
        match self.n {
            1 => axis,
            _ => axis.iter().flat_map(|a| axis.iter().map(move |b| a * b)).collect(),
        }
    }

    /// Periodic trapezoid rule.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        f.iter().sum::<f64>() * self.cell_volume()
    }
}

/// Forward/inverse transforms for one grid. Plans are immutable and the
/// struct can be shared across threads.
#[derive(Clone)]
pub struct Spectral {
    grid: GridSpec,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    lambdas: Arc<Vec<f64>>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("grid", &self.grid).finish()
    }
}

impl Spectral {
    pub fn new(grid: GridSpec) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(grid.points);
        let inverse = planner.plan_fft_inverse(grid.points);
        Spectral {
            grid,
            forward,
            inverse,
            lambdas: Arc::new(grid.lambdas()),
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    fn transform(&self, buf: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.grid.points;
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        if self.grid.n == 1 {
            plan.process_with_scratch(buf, &mut scratch);
            return;
        }
        // rows are contiguous
        plan.process_with_scratch(buf, &mut scratch);
        let mut column = vec![Complex64::new(0.0, 0.0); n];
        for c in 0..n {
            for r in 0..n {
                column[r] = buf[r * n + c];
            }
            plan.process_with_scratch(&mut column, &mut scratch);
            for r in 0..n {
                buf[r * n + c] = column[r];
            }
        }
    }

    /// Real samples to spectrum, normalised by `1/Nⁿ`.
    pub fn forward(&self, field: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = field.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.transform(&mut buf, &self.forward);
        let scale = 1.0 / self.grid.len() as f64;
        for c in &mut buf {
            *c *= scale;
        }
        buf
    }

    /// Spectrum to complex samples (imaginary part should be rounding noise).
    pub fn inverse_complex(&self, spectrum: &[Complex64]) -> Vec<Complex64> {
        let mut buf = spectrum.to_vec();
        self.transform(&mut buf, &self.inverse);
        buf
    }

    /// Spectrum to real samples, discarding the imaginary part.
    pub fn inverse(&self, spectrum: &[Complex64]) -> Vec<f64> {
        self.inverse_complex(spectrum).into_iter().map(|c| c.re).collect()
    }

    /// `‖f‖_{L²}` from the spectrum (Parseval).
    pub fn l2_norm(&self, spectrum: &[Complex64]) -> f64 {
        (self.grid.volume() * spectrum.iter().map(|c| c.norm_sqr()).sum::<f64>()).sqrt()
    }

    /// `‖∇f‖_{L²}` from the spectrum.
    pub fn grad_l2_norm(&self, spectrum: &[Complex64]) -> f64 {
        let s: f64 = spectrum
            .iter()
            .zip(self.lambdas.iter())
            .map(|(c, l)| l * c.norm_sqr())
            .sum();
        (self.grid.volume() * s).sqrt()
    }

    /// `∫ f dx` read off mode zero.
    pub fn mass(&self, spectrum: &[Complex64]) -> f64 {
        spectrum[0].re * self.grid.volume()
    }

    /// Physical-space samples of the Laplacian.
    pub fn laplacian(&self, spectrum: &[Complex64]) -> Vec<f64> {
        let s: Vec<Complex64> = spectrum
            .iter()
            .zip(self.lambdas.iter())
            .map(|(c, l)| -*c * *l)
            .collect();
        self.inverse(&s)
    }
}

/// Entries of the 2×2 flow map of `w'' + w' + λw = 0` acting on `(ŵ, ŵ_t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Propagator {
    pub e11: f64,
    pub e12: f64,
    pub e21: f64,
    pub e22: f64,
}

impl Propagator {
    pub fn identity() -> Self {
        Propagator { e11: 1.0, e12: 0.0, e21: 0.0, e22: 1.0 }
    }

    pub fn det(&self) -> f64 {
        self.e11 * self.e22 - self.e12 * self.e21
    }

    /// Matrix product `self · other`.
    pub fn compose(&self, other: &Propagator) -> Propagator {
        Propagator {
            e11: self.e11 * other.e11 + self.e12 * other.e21,
            e12: self.e11 * other.e12 + self.e12 * other.e22,
            e21: self.e21 * other.e11 + self.e22 * other.e21,
            e22: self.e21 * other.e12 + self.e22 * other.e22,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.e11.abs().max(self.e12.abs()).max(self.e21.abs()).max(self.e22.abs())
    }
}

/// `e^{−t/2}·cos(tω)` and `e^{−t/2}·sin(tω)/ω` (or their hyperbolic
/// counterparts), evaluated without overflow for large `t`.
fn damped_cos_sin(t: f64, lambda: f64) -> (f64, f64) {
    let d = lambda - 0.25;
    let decay = (-0.5 * t).exp();
    if d.abs() <= SERIES_HALF_WIDTH && (t * t * d.abs() <= 1e-2 || d == 0.0) {
        let x = t * t * d;
        let c = 1.0 - x / 2.0 + x * x / 24.0;
        let s = t * (1.0 - x / 6.0 + x * x / 120.0);
        return (decay * c, decay * s);
    }
    if d > 0.0 {
        let omega = d.sqrt();
        let (sin, cos) = (t * omega).sin_cos();
        (decay * cos, decay * sin / omega)
    } else {
        // e^{-t/2} cosh(tν) = (e^{-ta} + e^{-tb})/2 with a = 1/2 − ν, b = 1/2 + ν
        let nu = (-d).sqrt();
        let b = 0.5 + nu;
        let a = lambda / b;
        let ea = (-t * a).exp();
        let diff = -(-2.0 * t * nu).exp_m1();
        let c = ea * (1.0 - 0.5 * diff);
        let s = ea * diff / (2.0 * nu);
        (c, s)
    }
}

/// Exact flow map `E(t, λ)` of the damped wave mode equation.
pub fn damped_wave_propagator(t: f64, lambda: f64) -> Propagator {
    let (c, s) = damped_cos_sin(t, lambda);
    Propagator {
        e11: c + 0.5 * s,
        e12: s,
        e21: -lambda * s,
        e22: c - 0.5 * s,
    }
}

/// `−expm1(−h x)/x`, continuous at `x = 0`.
fn phi1(h: f64, x: f64) -> f64 {
    if x == 0.0 {
        h
    } else {
        -(-h * x).exp_m1() / x
    }
}

/// `∫₀ʰ E12(s, λ) ds`: weight of a frozen forcing in the position update.
pub fn duhamel_weight(h: f64, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return h + (-h).exp_m1();
    }
    let d = lambda - 0.25;
    if d < -SERIES_HALF_WIDTH {
        // (1 − E11)/λ = (φ(a) − φ(b))/(b − a) avoids cancellation as λ → 0
        let nu = (-d).sqrt();
        let b = 0.5 + nu;
        let a = lambda / b;
        (phi1(h, a) - phi1(h, b)) / (2.0 * nu)
    } else {
        (1.0 - damped_wave_propagator(h, lambda).e11) / lambda
    }
}

/// Position and velocity weights of a frozen forcing over one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DuhamelWeights {
    pub pos: f64,
    pub vel: f64,
}

pub fn duhamel_weights(h: f64, lambda: f64) -> DuhamelWeights {
    DuhamelWeights {
        pos: duhamel_weight(h, lambda),
        vel: damped_wave_propagator(h, lambda).e12,
    }
}

/// Heat semigroup multiplier `e^{−tλ}`.
pub fn heat_multiplier(t: f64, lambda: f64) -> f64 {
    (-t * lambda).exp()
}

/// `∫₀ʰ e^{−sλ} ds = (1 − e^{−hλ})/λ`, equal to `h` at `λ = 0`.
pub fn heat_duhamel_weight(h: f64, lambda: f64) -> f64 {
    phi1(h, lambda)
}
