//! Time stepping: exact linear propagation per Fourier mode plus a
//! second-order exponential midpoint step for the nonlinear coupling.
//!
//! For the damped wave model a step of size `h` reads, per mode,
//!
//! ```text
//! (û, û_t)(t+h) = E(h)·(û, û_t)(t) + (W_pos(h), W_vel(h))·F̂(t + h/2)
//! ```
//!
//! with `W_pos = ∫₀ʰ E12`, `W_vel = E12(h)` and `F = (|v|^p, |u|^q)` evaluated
//! at a midpoint predictor. The heat model uses `e^{−hλ}` and
//! `(1 − e^{−hλ})/λ` in the same roles.

use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;

use crate::grid::{
    damped_wave_propagator, duhamel_weight, heat_duhamel_weight, heat_multiplier, Spectral,
};
use crate::problem::{apply_power, InitialData, ModelKind, ProblemSpec};

/// Spectra of the evolving fields: `[u, u_t, v, v_t]` for the damped wave
/// model, `[u, v]` for the heat model.
#[derive(Debug, Clone, PartialEq)]
pub struct EvolState {
    pub t: f64,
    pub fields: Vec<Vec<Complex64>>,
}

impl EvolState {
    pub fn zeros(model: ModelKind, len: usize) -> Self {
        let count = match model {
            ModelKind::DampedWave => 4,
            ModelKind::ReactionDiffusion => 2,
        };
        EvolState { t: 0.0, fields: vec![vec![Complex64::new(0.0, 0.0); len]; count] }
    }

    pub fn is_finite(&self) -> bool {
        self.fields
            .iter()
            .all(|f| f.iter().all(|c| c.re.is_finite() && c.im.is_finite()))
    }

    /// Spectral ℓ² norm over all fields.
    pub fn norm(&self) -> f64 {
        self.fields
            .iter()
            .flat_map(|f| f.iter())
            .map(|c| c.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Spectral ℓ² distance over all fields.
    pub fn distance(&self, other: &EvolState) -> f64 {
        self.fields
            .iter()
            .zip(&other.fields)
            .flat_map(|(a, b)| a.iter().zip(b.iter()))
            .map(|(x, y)| (x - y).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }
}

/// Physical samples of the two positions and the dealiased spectra of the
/// nonlinear terms evaluated from them.
#[derive(Debug, Clone)]
pub struct Forcing {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    /// Spectrum of `|v|^p` (drives `u`).
    pub fu: Vec<Complex64>,
    /// Spectrum of `|u|^q` (drives `v`).
    pub fv: Vec<Complex64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepError {
    /// A field became NaN or infinite; blow-up is suspected.
    NonFinite,
}

#[derive(Debug)]
enum Tables {
    Wave {
        e11: Vec<f64>,
        e12: Vec<f64>,
        e21: Vec<f64>,
        e22: Vec<f64>,
        w_pos: Vec<f64>,
        half_e11: Vec<f64>,
        half_e12: Vec<f64>,
    },
    Heat {
        decay: Vec<f64>,
        weight: Vec<f64>,
        half_decay: Vec<f64>,
        half_weight: Vec<f64>,
    },
}

const CACHE_LIMIT: usize = 64;

/// Owns the transforms and a cache of multiplier tables keyed by step size.
#[derive(Debug)]
pub struct Stepper {
    model: ModelKind,
    p: f64,
    q: f64,
    nonlinear: bool,
    spectral: Spectral,
    filter: Vec<f64>,
    cache: HashMap<u64, Arc<Tables>>,
}

impl Stepper {
    pub fn new(problem: &ProblemSpec, spectral: Spectral) -> Self {
        let filter = spectral.grid().dealias_filter();
        Stepper {
            model: problem.model,
            p: problem.p,
            q: problem.q,
            nonlinear: true,
            spectral,
            filter,
            cache: HashMap::new(),
        }
    }

    /// Switch the nonlinear coupling off (linear flow only).
    pub fn linear_only(mut self) -> Self {
        self.nonlinear = false;
        self
    }

    pub fn model(&self) -> ModelKind {
        self.model
    }

    pub fn spectral(&self) -> &Spectral {
        &self.spectral
    }

    /// Indices of `u` and `v` inside `EvolState::fields`.
    pub fn position_indices(&self) -> (usize, usize) {
        match self.model {
            ModelKind::DampedWave => (0, 2),
            ModelKind::ReactionDiffusion => (0, 1),
        }
    }

    /// Spectra of `ε·(u0, u1, v0, v1)` at `t = 0`.
    pub fn initial_state(&self, data: &InitialData, eps: f64) -> EvolState {
        let scaled = |f: &[f64]| -> Vec<Complex64> {
            let s: Vec<f64> = f.iter().map(|x| eps * x).collect();
            self.spectral.forward(&s)
        };
        let fields = match self.model {
            ModelKind::DampedWave => {
                vec![scaled(&data.u0), scaled(&data.u1), scaled(&data.v0), scaled(&data.v1)]
            }
            ModelKind::ReactionDiffusion => vec![scaled(&data.u0), scaled(&data.v0)],
        };
        EvolState { t: 0.0, fields }
    }

    fn tables(&mut self, h: f64) -> Arc<Tables> {
        if let Some(t) = self.cache.get(&h.to_bits()) {
            return t.clone();
        }
        if self.cache.len() >= CACHE_LIMIT {
            self.cache.clear();
        }
        let lambdas = self.spectral.lambdas();
        let tables = match self.model {
            ModelKind::DampedWave => {
                let full: Vec<_> = lambdas.iter().map(|&l| damped_wave_propagator(h, l)).collect();
                let half: Vec<_> =
                    lambdas.iter().map(|&l| damped_wave_propagator(0.5 * h, l)).collect();
                Tables::Wave {
                    e11: full.iter().map(|e| e.e11).collect(),
                    e12: full.iter().map(|e| e.e12).collect(),
                    e21: full.iter().map(|e| e.e21).collect(),
                    e22: full.iter().map(|e| e.e22).collect(),
                    w_pos: lambdas.iter().map(|&l| duhamel_weight(h, l)).collect(),
                    half_e11: half.iter().map(|e| e.e11).collect(),
                    half_e12: half.iter().map(|e| e.e12).collect(),
                }
            }
            ModelKind::ReactionDiffusion => Tables::Heat {
                decay: lambdas.iter().map(|&l| heat_multiplier(h, l)).collect(),
                weight: lambdas.iter().map(|&l| heat_duhamel_weight(h, l)).collect(),
                half_decay: lambdas.iter().map(|&l| heat_multiplier(0.5 * h, l)).collect(),
                half_weight: lambdas.iter().map(|&l| heat_duhamel_weight(0.5 * h, l)).collect(),
            },
        };
        let tables = Arc::new(tables);
        self.cache.insert(h.to_bits(), tables.clone());
        tables
    }

    /// Exact linear flow over `h`.
    pub fn linear_step(&mut self, state: &EvolState, h: f64) -> EvolState {
        let tables = self.tables(h);
        let mut out = state.clone();
        out.t = state.t + h;
        match &*tables {
            Tables::Wave { e11, e12, e21, e22, .. } => {
                for (pos, vel) in [(0usize, 1usize), (2, 3)] {
                    let (w, wt) = (&state.fields[pos], &state.fields[vel]);
                    for k in 0..w.len() {
                        out.fields[pos][k] = w[k] * e11[k] + wt[k] * e12[k];
                        out.fields[vel][k] = w[k] * e21[k] + wt[k] * e22[k];
                    }
                }
            }
            Tables::Heat { decay, .. } => {
                for (o, s) in out.fields.iter_mut().zip(&state.fields) {
                    for ((o, s), d) in o.iter_mut().zip(s).zip(decay) {
                        *o = s * d;
                    }
                }
            }
        }
        out
    }

    /// Physical samples of `u` and `v`.
    pub fn positions(&self, state: &EvolState) -> (Vec<f64>, Vec<f64>) {
        let (iu, iv) = self.position_indices();
        (self.spectral.inverse(&state.fields[iu]), self.spectral.inverse(&state.fields[iv]))
    }

    /// Physical positions of a state and, when the coupling is on, the
    /// dealiased spectra of `|v|^p` and `|u|^q`.
    pub fn forcing(&self, state: &EvolState) -> Forcing {
        let (iu, iv) = self.position_indices();
        let u = self.spectral.inverse(&state.fields[iu]);
        let v = self.spectral.inverse(&state.fields[iv]);
        let len = u.len();
        if !self.nonlinear {
            let zero = vec![Complex64::new(0.0, 0.0); len];
            return Forcing { u, v, fu: zero.clone(), fv: zero };
        }
        let mut pv = v.clone();
        apply_power(&mut pv, self.p);
        let mut qu = u.clone();
        apply_power(&mut qu, self.q);
        let mut fu = self.spectral.forward(&pv);
        let mut fv = self.spectral.forward(&qu);
        for (k, w) in self.filter.iter().enumerate() {
            fu[k] *= w;
            fv[k] *= w;
        }
        Forcing { u, v, fu, fv }
    }

    /// One exponential midpoint step.
    pub fn duhamel_step(&mut self, state: &EvolState, h: f64) -> Result<EvolState, StepError> {
        self.duhamel_step_from(state, h, None)
    }

    /// As [`Stepper::duhamel_step`], reusing the forcing at `state` when the
    /// caller already has it (only the heat predictor needs it).
    pub fn duhamel_step_from(
        &mut self,
        state: &EvolState,
        h: f64,
        start: Option<&Forcing>,
    ) -> Result<EvolState, StepError> {
        let tables = self.tables(h);
        let mut out = self.linear_step(state, h);
        if !self.nonlinear {
            return Ok(out);
        }
        match &*tables {
            Tables::Wave { w_pos, e12, half_e11, half_e12, .. } => {
                // positions at t + h/2 under the linear flow; F depends on positions only
                let mut predictor = state.clone();
                for (pos, vel) in [(0usize, 1usize), (2, 3)] {
                    for k in 0..half_e11.len() {
                        predictor.fields[pos][k] = state.fields[pos][k] * half_e11[k]
                            + state.fields[vel][k] * half_e12[k];
                    }
                }
                let mid = self.forcing(&predictor);
                for (pos, vel, f) in [(0usize, 1usize, &mid.fu), (2, 3, &mid.fv)] {
                    for k in 0..f.len() {
                        out.fields[pos][k] += f[k] * w_pos[k];
                        out.fields[vel][k] += f[k] * e12[k];
                    }
                }
            }
            Tables::Heat { weight, half_decay, half_weight, .. } => {
                // exponential Euler predictor to t + h/2
                let owned;
                let start = match start {
                    Some(f) => f,
                    None => {
                        owned = self.forcing(state);
                        &owned
                    }
                };
                let mut predictor = state.clone();
                for (i, f) in [(0usize, &start.fu), (1, &start.fv)] {
                    for k in 0..f.len() {
                        predictor.fields[i][k] =
                            state.fields[i][k] * half_decay[k] + f[k] * half_weight[k];
                    }
                }
                let mid = self.forcing(&predictor);
                for (i, f) in [(0usize, &mid.fu), (1, &mid.fv)] {
                    for k in 0..f.len() {
                        out.fields[i][k] += f[k] * weight[k];
                    }
                }
            }
        }
        if out.is_finite() {
            Ok(out)
        } else {
            Err(StepError::NonFinite)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::problem::{build_initial_data, InitialDataSpec};

    fn problem(model: ModelKind, data: InitialDataSpec, p: f64, q: f64, eps: f64) -> ProblemSpec {
        ProblemSpec { model, n: 1, p, q, eps, data }
    }

    fn setup(pr: &ProblemSpec, l: f64, n: usize) -> (Stepper, EvolState) {
        let grid = make_grid(pr.n, l, n).unwrap();
        let data = build_initial_data(pr, &grid).unwrap();
        let st = Stepper::new(pr, Spectral::new(grid));
        let s0 = st.initial_state(&data, pr.eps);
        (st, s0)
    }

    /// Classical RK4 for `w'' + w' + λw = 0`.
    fn rk4_mode(lambda: f64, y0: [f64; 2], t: f64, steps: usize) -> [f64; 2] {
        let f = |y: [f64; 2]| [y[1], -lambda * y[0] - y[1]];
        let h = t / steps as f64;
        let mut y = y0;
        for _ in 0..steps {
            let k1 = f(y);
            let k2 = f([y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]]);
            let k3 = f([y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]]);
            let k4 = f([y[0] + h * k3[0], y[1] + h * k3[1]]);
            for i in 0..2 {
                y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        y
    }

    #[test]
    fn constant_field_is_stationary() {
        let pr = problem(ModelKind::DampedWave, InitialDataSpec::constant(1.0, 0.0, 0.0, 0.0), 3.0, 3.0, 1.0);
        let (mut st, s0) = setup(&pr, 10.0, 32);
        for h in [0.1, 1.0, 17.0] {
            let s = st.linear_step(&s0, h);
            assert!(s.distance(&s0) < 1e-14);
        }
    }

    #[test]
    fn single_mode_matches_ode() {
        // L = π gives ξ = k, so mode k = 1 has λ = 1
        let grid = make_grid(1, std::f64::consts::PI, 16).unwrap();
        let pr = problem(ModelKind::DampedWave, InitialDataSpec::constant(0.0, 0.0, 0.0, 0.0), 3.0, 3.0, 1.0);
        let mut st = Stepper::new(&pr, Spectral::new(grid));
        let x = grid.axis_nodes();
        let cosx: Vec<f64> = x.iter().map(|x| x.cos()).collect();
        let mut s0 = EvolState::zeros(ModelKind::DampedWave, 16);
        s0.fields[0] = st.spectral().forward(&cosx);
        let s1 = st.linear_step(&s0, 1.0);
        let u = st.spectral().inverse(&s1.fields[0]);
        let ut = st.spectral().inverse(&s1.fields[1]);
        let oracle = rk4_mode(1.0, [1.0, 0.0], 1.0, 20_000);
        for j in 0..16 {
            assert!((u[j] - oracle[0] * cosx[j]).abs() < 1e-10);
            assert!((ut[j] - oracle[1] * cosx[j]).abs() < 1e-10);
        }
    }

    #[test]
    fn heat_gaussian_spreads_like_closed_form() {
        let pr = problem(
            ModelKind::ReactionDiffusion,
            InitialDataSpec::gaussian(1.0, 0.0, 1.0, 0.0, 2.0),
            3.0,
            3.0,
            1.0,
        );
        let (mut st, s0) = setup(&pr, 40.0, 512);
        let x = st.spectral().grid().axis_nodes();
        for t in [0.25, 0.5, 1.0] {
            let s = st.linear_step(&s0, t);
            let u = st.spectral().inverse(&s.fields[0]);
            for (j, xj) in x.iter().enumerate() {
                // e^{tΔ} e^{−x²/4} = (1+t)^{−1/2} e^{−x²/(4(1+t))}
                let exact = (-(xj * xj) / (4.0 * (1.0 + t))).exp() / (1.0 + t).sqrt();
                assert!((u[j] - exact).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn zero_data_stays_zero() {
        for model in [ModelKind::DampedWave, ModelKind::ReactionDiffusion] {
            let pr = problem(model, InitialDataSpec::bump(0.0, 0.0, 0.0, 0.0, 2.0), 3.0, 3.0, 1.0);
            let (mut st, s0) = setup(&pr, 10.0, 64);
            let s = st.duhamel_step(&s0, 0.3).unwrap();
            assert_eq!(s.norm(), 0.0);
        }
    }

    #[test]
    fn linear_consistency_with_coupling_off() {
        for model in [ModelKind::DampedWave, ModelKind::ReactionDiffusion] {
            let pr = problem(model, InitialDataSpec::gaussian(1.0, 0.5, 0.7, 0.0, 2.0), 3.0, 3.0, 1.0);
            let grid = make_grid(1, 20.0, 128).unwrap();
            let data = build_initial_data(&pr, &grid).unwrap();
            let mut st = Stepper::new(&pr, Spectral::new(grid)).linear_only();
            let s0 = st.initial_state(&data, 1.0);
            let a = st.duhamel_step(&s0, 0.2).unwrap();
            let b = st.linear_step(&s0, 0.2);
            assert!(a.distance(&b) <= 1e-14 * b.norm());
        }
    }

    #[test]
    fn fields_stay_real() {
        let pr = problem(ModelKind::DampedWave, InitialDataSpec::gaussian(1.0, 0.3, 0.8, 0.0, 1.5), 7.0 / 3.0, 9.0, 1.0);
        let grid = make_grid(2, 10.0, 32).unwrap();
        let pr = ProblemSpec { n: 2, ..pr };
        let data = build_initial_data(&pr, &grid).unwrap();
        let mut st = Stepper::new(&pr, Spectral::new(grid));
        let mut s = st.initial_state(&data, 1.0);
        for _ in 0..5 {
            s = st.duhamel_step(&s, 0.05).unwrap();
        }
        for f in &s.fields {
            let z = st.spectral().inverse_complex(f);
            let re = z.iter().map(|c| c.re.abs()).fold(0.0, f64::max);
            let im = z.iter().map(|c| c.im.abs()).fold(0.0, f64::max);
            assert!(im <= 1e-10 * re.max(1e-300), "{im} vs {re}");
        }
    }

    #[test]
    fn heat_stays_nonnegative() {
        let pr = problem(
            ModelKind::ReactionDiffusion,
            InitialDataSpec::bump(1.0, 0.0, 0.5, 0.0, 3.0),
            3.0,
            3.0,
            1.0,
        );
        let (mut st, mut s) = setup(&pr, 20.0, 512);
        let mut floor = [0.0f64; 2];
        for _ in 0..20 {
            s = st.duhamel_step(&s, 0.05).unwrap();
            for (f, floor) in s.fields.iter().zip(floor.iter_mut()) {
                let x = st.spectral().inverse(f);
                let min = x.iter().cloned().fold(f64::MAX, f64::min);
                assert!(min >= *floor - 1e-10, "{min}");
                *floor = floor.min(min);
            }
        }
    }
}
