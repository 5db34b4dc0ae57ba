//! Run driver: adaptive stepping to blow-up or to a horizon, with norm
//! tracking, boundary-mass monitoring and trajectory snapshots.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridSpec, Spectral};
use crate::problem::{build_initial_data, DataShape, ModelKind, ProblemSpec};
use crate::propagate::{EvolState, Forcing, Stepper};
use crate::stats::least_squares;

/// Fraction of total `L¹` mass allowed in the boundary band.
pub const BOUNDARY_MASS_LIMIT: f64 = 1e-6;
/// Boundary monitoring stops once the sup-norm exceeds this multiple of its
/// initial value. Past that point transform round-off of the forcing,
/// which grows like a power of the amplitude, dominates the far field, and
/// the remaining time to the threshold is short compared to transport.
pub const BOUNDARY_WATCH_GROWTH: f64 = 10.0;
/// Steps below this size end the run as a stiffness collapse.
pub const MIN_STEP: f64 = 1e-12;

fn default_a_max() -> f64 {
    1e8
}
fn default_dt0() -> f64 {
    0.1
}
fn default_rel_tol() -> f64 {
    1e-6
}
fn default_snapshot_every() -> usize {
    10
}
fn default_boundary_band() -> f64 {
    0.1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub t_max: f64,
    /// Blow-up threshold as a multiple of the initial sup-norm.
    #[serde(rename = "A_max", default = "default_a_max")]
    pub a_max: f64,
    /// Initial and maximal step.
    #[serde(default = "default_dt0")]
    pub dt0: f64,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    /// Keep a snapshot every this many accepted steps.
    #[serde(default = "default_snapshot_every")]
    pub snapshot_every: usize,
    /// Outer shell, as a fraction of `L`, treated as boundary.
    #[serde(default = "default_boundary_band")]
    pub boundary_band: f64,
}

impl RunConfig {
    pub fn new(t_max: f64) -> Self {
        RunConfig {
            t_max,
            a_max: default_a_max(),
            dt0: default_dt0(),
            rel_tol: default_rel_tol(),
            snapshot_every: default_snapshot_every(),
            boundary_band: default_boundary_band(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("t_max", self.t_max),
            ("A_max", self.a_max),
            ("dt0", self.dt0),
            ("rel_tol", self.rel_tol),
            ("boundary_band", self.boundary_band),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.snapshot_every == 0 {
            return Err(Error::Config("snapshot_every must be positive".into()));
        }
        if self.boundary_band >= 0.5 {
            return Err(Error::Config(format!(
                "boundary_band must be below 0.5, got {}",
                self.boundary_band
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    BlewUp,
    Survived,
    InconclusiveBoundary,
    InconclusiveResolution,
}

impl RunStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            RunStatus::BlewUp => "blew_up",
            RunStatus::Survived => "survived",
            RunStatus::InconclusiveBoundary => "inconclusive_boundary",
            RunStatus::InconclusiveResolution => "inconclusive_resolution",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "blew_up" => Some(RunStatus::BlewUp),
            "survived" => Some(RunStatus::Survived),
            "inconclusive_boundary" => Some(RunStatus::InconclusiveBoundary),
            "inconclusive_resolution" => Some(RunStatus::InconclusiveResolution),
            _ => None,
        }
    }

    pub fn is_inconclusive(&self) -> bool {
        matches!(self, RunStatus::InconclusiveBoundary | RunStatus::InconclusiveResolution)
    }
}

/// Loss exponents `(γ, α)` of the weighted norm of the component with the
/// smaller power: `γ = |q − p|/(pq − 1)` and `α = n(min−1)/(2·max)`.
/// Both vanish for `p = q`.
pub fn decay_loss_exponents(p: f64, q: f64, n: usize) -> (f64, f64) {
    if p == q {
        return (0.0, 0.0);
    }
    let (lo, hi) = if p < q { (p, q) } else { (q, p) };
    let gamma = (hi - lo) / (p * q - 1.0);
    let alpha = n as f64 * (lo - 1.0) / (2.0 * hi);
    (gamma, alpha)
}

/// `(1+t)^{n/4}‖w‖₂ + (1+t)^{n/4+1/2}‖∇w‖₂`.
pub fn decay_functional(t: f64, n: usize, l2: f64, grad: f64) -> f64 {
    let a = n as f64 / 4.0;
    (1.0 + t).powf(a) * l2 + (1.0 + t).powf(a + 0.5) * grad
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NormHistory {
    pub n: usize,
    pub gamma: f64,
    pub alpha: f64,
    pub t: Vec<f64>,
    pub sup_u: Vec<f64>,
    pub sup_v: Vec<f64>,
    pub l2_u: Vec<f64>,
    pub l2_v: Vec<f64>,
    pub grad_u: Vec<f64>,
    pub grad_v: Vec<f64>,
    pub m_u: Vec<f64>,
    pub m_v: Vec<f64>,
    /// `(1+t)^{−γ}(log(e+t))^{α}` times the decay functional of the
    /// component carrying the loss (`u` when `p ≤ q`).
    pub weighted_u: Vec<f64>,
    /// Unweighted decay functional of the other component.
    pub weighted_v: Vec<f64>,
    pub boundary_mass: Vec<f64>,
}

impl NormHistory {
    pub fn new(n: usize, p: f64, q: f64) -> Self {
        let (gamma, alpha) = decay_loss_exponents(p, q, n);
        NormHistory { n, gamma, alpha, ..Default::default() }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Sup over time of the weighted norm pair (finite for every record).
    pub fn weighted_sup(&self) -> (f64, f64) {
        let m = |v: &[f64]| v.iter().cloned().fold(0.0, f64::max);
        (m(&self.weighted_u), m(&self.weighted_v))
    }

    pub fn boundary_mass_max(&self) -> f64 {
        self.boundary_mass.iter().cloned().fold(0.0, f64::max)
    }

    #[allow(clippy::too_many_arguments)]
    fn push(&mut self, t: f64, spectral: &Spectral, state: &EvolState, iu: usize, iv: usize,
            u: &[f64], v: &[f64], boundary: f64, swap: bool) {
        let sup = |f: &[f64]| f.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        let l2u = spectral.l2_norm(&state.fields[iu]);
        let l2v = spectral.l2_norm(&state.fields[iv]);
        let gu = spectral.grad_l2_norm(&state.fields[iu]);
        let gv = spectral.grad_l2_norm(&state.fields[iv]);
        let mu = decay_functional(t, self.n, l2u, gu);
        let mv = decay_functional(t, self.n, l2v, gv);
        let loss = (1.0 + t).powf(-self.gamma) * (std::f64::consts::E + t).ln().powf(self.alpha);
        self.t.push(t);
        self.sup_u.push(sup(u));
        self.sup_v.push(sup(v));
        self.l2_u.push(l2u);
        self.l2_v.push(l2v);
        self.grad_u.push(gu);
        self.grad_v.push(gv);
        self.m_u.push(mu);
        self.m_v.push(mv);
        if swap {
            self.weighted_u.push(mu);
            self.weighted_v.push(loss * mv);
        } else {
            self.weighted_u.push(loss * mu);
            self.weighted_v.push(mv);
        }
        self.boundary_mass.push(boundary);
    }
}

/// One stored time slice: physical samples of every evolved field.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub t: f64,
    pub fields: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryHeader {
    pub problem: ProblemSpec,
    pub grid: GridSpec,
    pub config: RunConfig,
    pub fields: Vec<String>,
    /// Set when the coupling was switched off for the run.
    #[serde(default)]
    pub linear: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub header: TrajectoryHeader,
    pub frames: Vec<Frame>,
}

pub fn field_names(model: ModelKind) -> Vec<String> {
    let names: &[&str] = match model {
        ModelKind::DampedWave => &["u", "u_t", "v", "v_t"],
        ModelKind::ReactionDiffusion => &["u", "v"],
    };
    names.iter().map(|s| s.to_string()).collect()
}

impl Trajectory {
    pub fn new(problem: ProblemSpec, grid: GridSpec, config: RunConfig) -> Self {
        let fields = field_names(problem.model);
        let header = TrajectoryHeader { problem, grid, config, fields, linear: false };
        Trajectory { header, frames: Vec::new() }
    }

    /// Indices of `u` and `v` inside each frame.
    pub fn position_indices(&self) -> (usize, usize) {
        match self.header.problem.model {
            ModelKind::DampedWave => (0, 2),
            ModelKind::ReactionDiffusion => (0, 1),
        }
    }

    pub fn t_covered(&self) -> f64 {
        self.frames.last().map_or(0.0, |f| f.t)
    }

    pub fn validate(&self) -> Result<()> {
        let len = self.header.grid.len();
        let nf = self.header.fields.len();
        if self.frames.is_empty() {
            return Err(Error::Trajectory("no frames".into()));
        }
        for (i, f) in self.frames.iter().enumerate() {
            if f.fields.len() != nf || f.fields.iter().any(|x| x.len() != len) {
                return Err(Error::Trajectory(format!("frame {i} has the wrong shape")));
            }
            if i > 0 && !(f.t > self.frames[i - 1].t) {
                return Err(Error::Trajectory(format!("frame {i} does not advance in time")));
            }
        }
        if self.frames[0].t != 0.0 {
            return Err(Error::Trajectory("first frame is not at t = 0".into()));
        }
        Ok(())
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        serde_json::to_writer(&mut w, &self.header)?;
        w.write_all(b"\n")?;
        for f in &self.frames {
            w.write_all(&f.t.to_le_bytes())?;
            for field in &f.fields {
                for x in field {
                    w.write_all(&x.to_le_bytes())?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write(BufWriter::new(File::create(path)?))
    }

    pub fn read<R: Read>(r: R) -> Result<Self> {
        let mut r = BufReader::new(r);
        let mut line = String::new();
        r.read_line(&mut line)?;
        let header: TrajectoryHeader = serde_json::from_str(line.trim_end())
            .map_err(|e| Error::Trajectory(format!("bad header: {e}")))?;
        header.grid.validate()?;
        let len = header.grid.len();
        let nf = header.fields.len();
        let frame_bytes = 8 * (1 + nf * len);
        let mut body = Vec::new();
        r.read_to_end(&mut body)?;
        if body.len() % frame_bytes != 0 {
            return Err(Error::Trajectory(format!(
                "body of {} bytes is not a whole number of {frame_bytes}-byte frames",
                body.len()
            )));
        }
        let mut frames = Vec::with_capacity(body.len() / frame_bytes);
        for chunk in body.chunks_exact(frame_bytes) {
            let mut values = chunk
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk")));
            let t = values.next().expect("frame time");
            let fields = (0..nf).map(|_| values.by_ref().take(len).collect()).collect();
            frames.push(Frame { t, fields });
        }
        Ok(Trajectory { header, frames })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read(File::open(path)?)
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub status: RunStatus,
    /// Threshold-crossing time (blew_up only).
    pub t_num: Option<f64>,
    /// Ended by step-size collapse or non-finite values instead of a clean
    /// threshold crossing.
    pub resolution_limited: bool,
    pub t_final: f64,
    pub dt_final: f64,
    pub steps_accepted: usize,
    pub steps_rejected: usize,
    pub initial_sup: f64,
    pub history: NormHistory,
    pub trajectory: Trajectory,
}

/// Serializable digest of a [`RunResult`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub status: RunStatus,
    pub t_num: Option<f64>,
    pub resolution_limited: bool,
    pub t_final: f64,
    pub dt_final: f64,
    pub steps_accepted: usize,
    pub steps_rejected: usize,
    pub initial_sup: f64,
    pub boundary_mass_max: f64,
    pub weighted_sup_u: f64,
    pub weighted_sup_v: f64,
    pub gamma: f64,
    pub alpha: f64,
}

impl RunResult {
    pub fn summary(&self) -> RunSummary {
        let (wu, wv) = self.history.weighted_sup();
        RunSummary {
            status: self.status,
            t_num: self.t_num,
            resolution_limited: self.resolution_limited,
            t_final: self.t_final,
            dt_final: self.dt_final,
            steps_accepted: self.steps_accepted,
            steps_rejected: self.steps_rejected,
            initial_sup: self.initial_sup,
            boundary_mass_max: self.history.boundary_mass_max(),
            weighted_sup_u: wu,
            weighted_sup_v: wv,
            gamma: self.history.gamma,
            alpha: self.history.alpha,
        }
    }
}

/// Mask of grid points in the outer `band·L` shell (sup-norm distance).
pub fn boundary_mask(grid: &GridSpec, band: f64) -> Vec<bool> {
    let cut = (1.0 - band) * grid.half_width;
    grid.box_radii().iter().map(|&r| r >= cut).collect()
}

/// Share of the `L¹` mass of `|u| + |v|` in the masked shell.
pub fn boundary_fraction(u: &[f64], v: &[f64], mask: &[bool]) -> f64 {
    let mut inner = 0.0;
    let mut band = 0.0;
    for ((a, b), m) in u.iter().zip(v).zip(mask) {
        let w = a.abs() + b.abs();
        if *m {
            band += w;
        } else {
            inner += w;
        }
    }
    let total = inner + band;
    if total > 0.0 {
        band / total
    } else {
        0.0
    }
}

fn sup_abs(f: &[f64]) -> f64 {
    f.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

fn frame_of(stepper: &Stepper, state: &EvolState) -> Frame {
    let sp = stepper.spectral();
    Frame { t: state.t, fields: state.fields.iter().map(|f| sp.inverse(f)).collect() }
}

/// Physical positions plus, for the heat model, the forcing reused by the
/// next step's predictor.
struct Diagnostics {
    u: Vec<f64>,
    v: Vec<f64>,
    forcing: Option<Forcing>,
}

fn diagnostics(stepper: &Stepper, state: &EvolState) -> Diagnostics {
    match stepper.model() {
        ModelKind::DampedWave => {
            let (u, v) = stepper.positions(state);
            Diagnostics { u, v, forcing: None }
        }
        ModelKind::ReactionDiffusion => {
            let f = stepper.forcing(state);
            Diagnostics { u: f.u.clone(), v: f.v.clone(), forcing: Some(f) }
        }
    }
}

/// One `h` step and two `h/2` steps from `state`; `None` if any of them
/// produced non-finite values.
fn step_pair(
    stepper: &mut Stepper,
    state: &EvolState,
    h: f64,
    start: Option<&Forcing>,
) -> Option<(EvolState, EvolState)> {
    let full = stepper.duhamel_step_from(state, h, start).ok()?;
    let half = stepper.duhamel_step_from(state, 0.5 * h, start).ok()?;
    let two = stepper.duhamel_step(&half, 0.5 * h).ok()?;
    Some((full, two))
}

pub fn run(problem: &ProblemSpec, grid: &GridSpec, config: &RunConfig) -> Result<RunResult> {
    run_with(problem, grid, config, true)
}

/// Same driver with the coupling switched off.
pub fn run_linear(problem: &ProblemSpec, grid: &GridSpec, config: &RunConfig) -> Result<RunResult> {
    run_with(problem, grid, config, false)
}

fn run_with(
    problem: &ProblemSpec,
    grid: &GridSpec,
    config: &RunConfig,
    nonlinear: bool,
) -> Result<RunResult> {
    config.validate()?;
    grid.validate()?;
    let data = build_initial_data(problem, grid)?;
    let spectral = Spectral::new(*grid);
    let mut stepper = Stepper::new(problem, spectral.clone());
    if !nonlinear {
        stepper = stepper.linear_only();
    }
    let (iu, iv) = stepper.position_indices();
    let swap = problem.p > problem.q;
    let check_boundary = problem.data.shape != DataShape::Constant;
    let mask = boundary_mask(grid, config.boundary_band);

    let mut state = stepper.initial_state(&data, problem.eps);
    let mut diag = diagnostics(&stepper, &state);
    let velocity_sup = |st: &EvolState| match problem.model {
        ModelKind::DampedWave => sup_abs(&spectral.inverse(&st.fields[1]))
            .max(sup_abs(&spectral.inverse(&st.fields[3]))),
        ModelKind::ReactionDiffusion => 0.0,
    };
    let mut initial_sup = sup_abs(&diag.u).max(sup_abs(&diag.v));
    if initial_sup == 0.0 {
        initial_sup = velocity_sup(&state);
    }
    if initial_sup == 0.0 {
        initial_sup = 1.0;
    }
    let threshold = config.a_max * initial_sup;

    let mut history = NormHistory::new(problem.n, problem.p, problem.q);
    let mut trajectory = Trajectory::new(*problem, *grid, *config);
    trajectory.header.linear = !nonlinear;
    let frac0 = if check_boundary { boundary_fraction(&diag.u, &diag.v, &mask) } else { 0.0 };
    history.push(0.0, &spectral, &state, iu, iv, &diag.u, &diag.v, frac0, swap);
    trajectory.frames.push(frame_of(&stepper, &state));

    let mut result = RunResult {
        status: RunStatus::Survived,
        t_num: None,
        resolution_limited: false,
        t_final: 0.0,
        dt_final: config.dt0,
        steps_accepted: 0,
        steps_rejected: 0,
        initial_sup,
        history: NormHistory::default(),
        trajectory: Trajectory::new(*problem, *grid, *config),
    };
    if frac0 > BOUNDARY_MASS_LIMIT {
        result.status = RunStatus::InconclusiveBoundary;
        result.history = history;
        result.trajectory = trajectory;
        return Ok(result);
    }

    let mut h = config.dt0;
    let mut last_sup = sup_abs(&diag.u).max(sup_abs(&diag.v));
    let mut last_saved = 0usize;
    let status;
    loop {
        if state.t >= config.t_max {
            status = RunStatus::Survived;
            break;
        }
        let remaining = config.t_max - state.t;
        let clamped = h >= remaining;
        let h_try = if clamped { remaining } else { h };
        let pair = step_pair(&mut stepper, &state, h_try, diag.forcing.as_ref());
        let accepted = pair.and_then(|(full, two)| {
            let scale = two.norm().max(f64::MIN_POSITIVE);
            let disc = full.distance(&two) / scale;
            (disc <= config.rel_tol).then_some((two, disc))
        });
        let Some((mut next, disc)) = accepted else {
            result.steps_rejected += 1;
            h = 0.5 * h_try;
            if h < MIN_STEP {
                status = RunStatus::BlewUp;
                result.t_num = Some(state.t);
                result.resolution_limited = true;
                break;
            }
            continue;
        };
        if clamped {
            next.t = config.t_max;
        }
        result.steps_accepted += 1;
        result.dt_final = h_try;
        if !clamped {
            h = if disc < config.rel_tol / 32.0 { (2.0 * h_try).min(config.dt0) } else { h_try };
        }

        let next_diag = diagnostics(&stepper, &next);
        let sup = sup_abs(&next_diag.u).max(sup_abs(&next_diag.v));
        if sup >= threshold {
            // crossing time by linear interpolation in log amplitude
            let (l0, l1, lt) = (last_sup.ln(), sup.ln(), threshold.ln());
            let w = if l1 > l0 { ((lt - l0) / (l1 - l0)).clamp(0.0, 1.0) } else { 1.0 };
            result.t_num = Some(state.t + w * (next.t - state.t));
            if last_saved != result.steps_accepted - 1 {
                trajectory.frames.push(frame_of(&stepper, &state));
            }
            status = RunStatus::BlewUp;
            break;
        }
        let watching = check_boundary && sup < BOUNDARY_WATCH_GROWTH * initial_sup;
        let frac =
            if watching { boundary_fraction(&next_diag.u, &next_diag.v, &mask) } else { 0.0 };
        history.push(next.t, &spectral, &next, iu, iv, &next_diag.u, &next_diag.v, frac, swap);
        state = next;
        diag = next_diag;
        last_sup = sup;
        if result.steps_accepted.is_multiple_of(config.snapshot_every) {
            trajectory.frames.push(frame_of(&stepper, &state));
            last_saved = result.steps_accepted;
        }
        if frac > BOUNDARY_MASS_LIMIT {
            status = RunStatus::InconclusiveBoundary;
            break;
        }
    }
    if status != RunStatus::BlewUp && last_saved != result.steps_accepted {
        trajectory.frames.push(frame_of(&stepper, &state));
    }
    result.status = status;
    result.t_final = state.t;
    result.history = history;
    result.trajectory = trajectory;
    Ok(result)
}

/// Norms of the linear flow (coupling off) sampled at the given times, each
/// computed by exact propagation from `t = 0`.
pub fn linear_history(problem: &ProblemSpec, grid: &GridSpec, times: &[f64]) -> Result<NormHistory> {
    grid.validate()?;
    let data = build_initial_data(problem, grid)?;
    let spectral = Spectral::new(*grid);
    let mut stepper = Stepper::new(problem, spectral.clone()).linear_only();
    let (iu, iv) = stepper.position_indices();
    let s0 = stepper.initial_state(&data, problem.eps);
    let mask = boundary_mask(grid, 0.1);
    let mut history = NormHistory::new(problem.n, problem.p, problem.q);
    for &t in times {
        if !(t >= 0.0) {
            return Err(Error::Decay(format!("sample time must be nonnegative, got {t}")));
        }
        let s = if t == 0.0 { s0.clone() } else { stepper.linear_step(&s0, t) };
        let (u, v) = stepper.positions(&s);
        let frac = boundary_fraction(&u, &v, &mask);
        history.push(t, &spectral, &s, iu, iv, &u, &v, frac, problem.p > problem.q);
    }
    Ok(history)
}

/// Least-squares slopes of `log‖u‖₂` and `log‖∇u‖₂` against `log(1+t)` over
/// the records with `t` in `window`.
pub fn matsumura_fit(history: &NormHistory, window: (f64, f64)) -> Result<(f64, f64)> {
    let (a, b) = window;
    if !(a < b) {
        return Err(Error::Decay(format!("empty window [{a}, {b}]")));
    }
    let (first, last) = match (history.t.first(), history.t.last()) {
        (Some(f), Some(l)) => (*f, *l),
        _ => return Err(Error::Decay("empty history".into())),
    };
    if a < first || b > last {
        return Err(Error::Decay(format!(
            "window [{a}, {b}] is outside the run [{first}, {last}]"
        )));
    }
    let mut x = Vec::new();
    let mut y0 = Vec::new();
    let mut y1 = Vec::new();
    for (i, &t) in history.t.iter().enumerate() {
        if t >= a && t <= b {
            x.push((1.0 + t).ln());
            y0.push(history.l2_u[i].ln());
            y1.push(history.grad_u[i].ln());
        }
    }
    if x.len() < 2 {
        return Err(Error::Decay("fewer than two samples in the window".into()));
    }
    Ok((least_squares(&x, &y0)?.slope, least_squares(&x, &y1)?.slope))
}

/// `‖f‖_{L^r} / (‖f‖₂^{1−β}‖∇f‖₂^{β})` with `β = n(1/2 − 1/r)`; pass
/// `f64::INFINITY` for the sup norm.
pub fn gn_check(field: &[f64], spectral: &Spectral, r: f64) -> Result<f64> {
    let grid = spectral.grid();
    if field.len() != grid.len() {
        return Err(Error::Decay("field does not match the grid".into()));
    }
    if !(r >= 2.0) {
        return Err(Error::Decay(format!("exponent must be at least 2, got {r}")));
    }
    let beta = grid.n as f64 * (0.5 - if r.is_infinite() { 0.0 } else { 1.0 / r });
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::Decay(format!("interpolation index {beta} outside [0, 1]")));
    }
    let dv = grid.cell_volume();
    let l2 = (field.iter().map(|x| x * x).sum::<f64>() * dv).sqrt();
    if l2 == 0.0 {
        return Err(Error::Decay("zero field".into()));
    }
    let lr = if r.is_infinite() {
        sup_abs(field)
    } else if r == 2.0 {
        l2
    } else {
        (field.iter().map(|x| x.abs().powf(r)).sum::<f64>() * dv).powf(1.0 / r)
    };
    let grad = spectral.grad_l2_norm(&spectral.forward(field));
    Ok(lr / (l2.powf(1.0 - beta) * grad.powf(beta)))
}
