//! Test-function machinery on stored trajectories: the cutoff η, the
//! space-time test function ψ_R, the functionals y and Y, checks of the
//! inequalities that the lifespan upper bound consumes, and the weak-form
//! residual of a trajectory.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::problem::{build_initial_data, ModelKind};
use crate::run::Trajectory;

const LOG2_OVER_4: f64 = std::f64::consts::LN_2 / 4.0;
/// Relative slack for monotonicity of the y functionals.
pub const MONOTONE_TOLERANCE: f64 = 1e-9;
/// Allowed max/min spread of the ψ-operator constant over the R grid.
pub const C_PSI_SPREAD_LIMIT: f64 = 10.0;

fn bridge(x: f64) -> (f64, f64, f64) {
    if x <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let h = (-1.0 / x).exp();
    if h == 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let x2 = x * x;
    (h, h / x2, h * (1.0 / (x2 * x2) - 2.0 / (x2 * x)))
}

/// `η(s)`, `η'(s)`, `η''(s)`.
pub fn eta_derivatives(s: f64) -> (f64, f64, f64) {
    if s <= 0.5 {
        return (1.0, 0.0, 0.0);
    }
    if s >= 1.0 {
        return (0.0, 0.0, 0.0);
    }
    let (ha, ha1, ha2) = bridge(1.0 - s);
    let (hb, hb1, hb2) = bridge(s - 0.5);
    let (a, a1, a2) = (ha, -ha1, ha2);
    let (b, b1, b2) = (hb, hb1, hb2);
    let d = a + b;
    let d1 = a1 + b1;
    let num = a1 * b - a * b1;
    let num1 = a2 * b - a * b2;
    (a / d, num / (d * d), (num1 * d - 2.0 * num * d1) / (d * d * d))
}

pub fn eta(s: f64) -> f64 {
    eta_derivatives(s).0
}

pub fn eta_star(s: f64) -> f64 {
    if s < 0.5 {
        0.0
    } else {
        eta(s)
    }
}

/// Smallest admissible cutoff power, `max{2/(p−1), 2/(q−1)}`.
pub fn mu_default(p: f64, q: f64) -> f64 {
    (2.0 / (p - 1.0)).max(2.0 / (q - 1.0))
}

fn scaled(t: f64, rad: f64, r: f64) -> f64 {
    let r4 = r.powi(4);
    (t * t + rad.powi(4)) / r4
}

/// `ψ_R(t,x) = η((t²+|x|⁴)/R⁴)^{μ+2}`; `rad = |x|`.
pub fn psi(t: f64, rad: f64, r: f64, mu: f64) -> f64 {
    eta(scaled(t, rad, r)).powf(mu + 2.0)
}

pub fn psi_star(t: f64, rad: f64, r: f64, mu: f64) -> f64 {
    eta_star(scaled(t, rad, r)).powf(mu + 2.0)
}

/// Value and derivatives of a radial space-time test function at one point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TestValues {
    pub value: f64,
    pub dt: f64,
    pub dtt: f64,
    pub lap: f64,
}

/// A smooth radial test function with compact support in `[0, T) × {|x| < ρ}`.
pub trait TestFunction {
    /// Spatial support radius.
    fn radius(&self) -> f64;
    /// First time at which the function and its derivatives vanish.
    fn end_time(&self) -> f64;
    fn eval(&self, t: f64, rad: f64, n: usize) -> TestValues;
}

/// The cutoff `ψ_R` with closed-form derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Psi {
    pub r: f64,
    pub mu: f64,
}

impl Psi {
    pub fn new(r: f64, mu: f64) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::Audit(format!("cutoff radius must be positive, got {r}")));
        }
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::Audit(format!("cutoff power must be positive, got {mu}")));
        }
        Ok(Psi { r, mu })
    }

    /// `∂_t²ψ − Δψ − ∂_tψ`.
    pub fn wave_operator(&self, t: f64, rad: f64, n: usize) -> f64 {
        let d = self.eval(t, rad, n);
        d.dtt - d.lap - d.dt
    }
}

impl TestFunction for Psi {
    fn radius(&self) -> f64 {
        self.r
    }

    fn end_time(&self) -> f64 {
        self.r * self.r
    }

    fn eval(&self, t: f64, rad: f64, n: usize) -> TestValues {
        let s = scaled(t, rad, self.r);
        if s >= 1.0 {
            return TestValues::default();
        }
        let (e, e1, e2) = eta_derivatives(s);
        let m = self.mu;
        let r4 = self.r.powi(4);
        let r8 = r4 * r4;
        let value = e.powf(m + 2.0);
        if s <= 0.5 {
            return TestValues { value, ..TestValues::default() };
        }
        let first = (m + 2.0) * e.powf(m + 1.0) * e1;
        let second = (m + 2.0) * (m + 1.0) * e.powf(m) * e1 * e1 + (m + 2.0) * e.powf(m + 1.0) * e2;
        let dt = first * 2.0 * t / r4;
        let dtt = first * 2.0 / r4 + second * 4.0 * t * t / r8;
        let rad2 = rad * rad;
        let lap = first * 4.0 * (n as f64 + 2.0) * rad2 / r4 + second * 16.0 * rad2 * rad2 * rad2 / r8;
        TestValues { value, dt, dtt, lap }
    }
}

/// Cutoff power, support radii of the data and the R grid of the audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutoffSpec {
    pub mu: f64,
    pub r0: f64,
    pub r1: f64,
    pub r_grid: Vec<f64>,
}

impl CutoffSpec {
    /// `R₀ = (2·max{r₀⁴, r₁⁴})^{1/4}`.
    pub fn base_radius(r0: f64, r1: f64) -> f64 {
        (2.0 * r0.powi(4).max(r1.powi(4))).powf(0.25)
    }

    /// Geometric grid of `points` radii on `[R₀, min(4R₀, √t_covered)]`,
    /// the upper end pulled back by one part in 10⁶ so that it stays below
    /// the covered time.
    pub fn new(mu: f64, r0: f64, r1: f64, t_covered: f64, points: usize) -> Result<Self> {
        if !(r0 >= 0.0 && r1 >= 0.0 && r0.max(r1) > 0.0) {
            return Err(Error::Audit("data support radii must be nonnegative, one positive".into()));
        }
        if points < 2 {
            return Err(Error::Audit("R grid needs at least two points".into()));
        }
        let base = Self::base_radius(r0, r1);
        let top = (4.0 * base).min(t_covered.sqrt() * (1.0 - 1e-6));
        if !(top > base) {
            return Err(Error::Audit(format!(
                "trajectory covers t ≤ {t_covered}, too short for R₀ = {base}"
            )));
        }
        let ratio = (top / base).powf(1.0 / (points - 1) as f64);
        let r_grid = (0..points).map(|i| base * ratio.powi(i as i32)).collect();
        Ok(CutoffSpec { mu, r0, r1, r_grid })
    }

    /// Default cutoff for a trajectory: minimal μ, data support radii from
    /// the stored problem and 16 radii.
    pub fn for_trajectory(traj: &Trajectory) -> Result<Self> {
        let pr = &traj.header.problem;
        let data = build_initial_data(pr, &traj.header.grid)?;
        let (r0, r1) = match (data.r0, data.r1) {
            (Some(a), Some(b)) if a.max(b) > 0.0 => (a, b),
            // vanishing data: fall back to the recipe's radius
            (Some(_), Some(_)) => (pr.data.radius, pr.data.radius),
            _ => return Err(Error::Audit("initial data have no finite support radius".into())),
        };
        Self::new(mu_default(pr.p, pr.q), r0, r1, traj.t_covered(), 16)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0) {
            return Err(Error::Audit(format!("cutoff power must be positive, got {}", self.mu)));
        }
        if self.r_grid.len() < 2 || self.r_grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Audit("R grid must be increasing with at least two points".into()));
        }
        if !(self.r_grid[0] > 0.0) {
            return Err(Error::Audit("R grid must be positive".into()));
        }
        Ok(())
    }
}

/// Values of the y and Y functionals on the R grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Functionals {
    pub r_grid: Vec<f64>,
    /// `∫∫|v|^p η*(s_R)^{pμ}`.
    pub y_p: Vec<f64>,
    /// `∫∫|u|^q η*(s_R)^{qμ}`.
    pub y_q: Vec<f64>,
    /// `∫₀^R y_p(r) dr/r`.
    pub big_y_p: Vec<f64>,
    pub big_y_q: Vec<f64>,
    /// `∫∫|v|^p η(s_R)^{pμ}`, the integral with the full cutoff.
    pub z_p: Vec<f64>,
    pub z_q: Vec<f64>,
    /// Ratios of consecutive auxiliary radii used for the r integral.
    pub aux_ratio: f64,
}

/// Sub-steps of the auxiliary radius grid per R-grid interval.
const AUX_REFINE: usize = 8;
/// The r integral starts at `R₀ / AUX_FLOOR` with a power-law head.
const AUX_FLOOR: f64 = 64.0;

fn trapezoid_weights(times: &[f64]) -> Vec<f64> {
    let k = times.len();
    let mut w = vec![0.0; k];
    for i in 0..k.saturating_sub(1) {
        let h = 0.5 * (times[i + 1] - times[i]);
        w[i] += h;
        w[i + 1] += h;
    }
    w
}

struct Samples {
    /// indices of grid points inside the largest radius
    rad4: Vec<f64>,
    times: Vec<f64>,
    tw: Vec<f64>,
    /// per frame, |u|^q and |v|^p at the kept points
    uq: Vec<Vec<f64>>,
    vp: Vec<Vec<f64>>,
    dv: f64,
}

fn collect(traj: &Trajectory, r_max: f64) -> Result<Samples> {
    traj.validate()?;
    if traj.frames.len() < 2 {
        return Err(Error::Audit("trajectory needs at least two frames".into()));
    }
    let grid = traj.header.grid;
    let pr = traj.header.problem;
    let (iu, iv) = traj.position_indices();
    let radii = grid.radii();
    let keep: Vec<usize> = (0..radii.len()).filter(|&i| radii[i] <= r_max).collect();
    let rad4 = keep.iter().map(|&i| radii[i].powi(4)).collect();
    let times: Vec<f64> = traj.frames.iter().map(|f| f.t).collect();
    let tw = trapezoid_weights(&times);
    let mut uq = Vec::with_capacity(times.len());
    let mut vp = Vec::with_capacity(times.len());
    for f in &traj.frames {
        uq.push(keep.iter().map(|&i| f.fields[iu][i].abs().powf(pr.q)).collect());
        vp.push(keep.iter().map(|&i| f.fields[iv][i].abs().powf(pr.p)).collect());
    }
    Ok(Samples { rad4, times, tw, uq, vp, dv: grid.cell_volume() })
}

/// Space-time integrals of `|u|^q w(s_r)^{qμ}` and `|v|^p w(s_r)^{pμ}` for one
/// radius, with `w` the starred or full cutoff.
fn weighted_integrals(sm: &Samples, r: f64, mu: f64, p: f64, q: f64, starred: bool) -> (f64, f64) {
    let r4 = r.powi(4);
    let r2 = r * r;
    let (mut ip, mut iq) = (0.0, 0.0);
    for (k, &t) in sm.times.iter().enumerate() {
        if t >= r2 {
            break;
        }
        let (mut sp, mut sq) = (0.0, 0.0);
        for (j, &x4) in sm.rad4.iter().enumerate() {
            let s = (t * t + x4) / r4;
            if s >= 1.0 {
                continue;
            }
            let e = if starred { eta_star(s) } else { eta(s) };
            if e == 0.0 {
                continue;
            }
            sq += sm.uq[k][j] * e.powf(q * mu);
            sp += sm.vp[k][j] * e.powf(p * mu);
        }
        ip += sm.tw[k] * sp;
        iq += sm.tw[k] * sq;
    }
    (ip * sm.dv, iq * sm.dv)
}

/// The y and Y functionals of a trajectory on the cutoff's R grid.
///
/// `Y(R)` is integrated in `log r` on a grid refined between R-grid nodes and
/// extended geometrically down to `R₀/64`; below that the integrand behaves
/// like `r^{n+2}` and contributes `y(r_min)/(n+2)`.
pub fn functionals(traj: &Trajectory, cutoff: &CutoffSpec) -> Result<Functionals> {
    cutoff.validate()?;
    let pr = traj.header.problem;
    let r_grid = &cutoff.r_grid;
    let r_max = *r_grid.last().unwrap();
    if r_max * r_max > traj.t_covered() {
        return Err(Error::Audit(format!(
            "R = {r_max} needs t ≤ {}, trajectory covers {}",
            r_max * r_max,
            traj.t_covered()
        )));
    }
    let grid: GridSpec = traj.header.grid;
    if r_max >= grid.half_width {
        return Err(Error::Audit(format!("R = {r_max} exceeds the torus half-width")));
    }
    let sm = collect(traj, r_max)?;

    // auxiliary radii: geometric below R₀, refined between R-grid nodes above
    let base = r_grid[0];
    let first_ratio = (r_grid[1] / r_grid[0]).powf(1.0 / AUX_REFINE as f64);
    let below = (AUX_FLOOR.ln() / first_ratio.ln()).ceil() as usize;
    let below_ratio = AUX_FLOOR.powf(1.0 / below as f64);
    let mut aux: Vec<f64> = (0..below).map(|i| base / below_ratio.powi((below - i) as i32)).collect();
    let mut node_of = Vec::with_capacity(r_grid.len());
    for (i, &r) in r_grid.iter().enumerate() {
        if i > 0 {
            let ratio = (r / r_grid[i - 1]).powf(1.0 / AUX_REFINE as f64);
            for j in 1..AUX_REFINE {
                aux.push(r_grid[i - 1] * ratio.powi(j as i32));
            }
        }
        node_of.push(aux.len());
        aux.push(r);
    }

    let mu = cutoff.mu;
    let vals: Vec<(f64, f64)> =
        aux.iter().map(|&r| weighted_integrals(&sm, r, mu, pr.p, pr.q, true)).collect();
    let head = 1.0 / (pr.n as f64 + 2.0);
    let mut cum_p = vec![vals[0].0 * head];
    let mut cum_q = vec![vals[0].1 * head];
    for i in 1..aux.len() {
        let dl = (aux[i] / aux[i - 1]).ln();
        cum_p.push(cum_p[i - 1] + 0.5 * dl * (vals[i].0 + vals[i - 1].0));
        cum_q.push(cum_q[i - 1] + 0.5 * dl * (vals[i].1 + vals[i - 1].1));
    }
    let mut out = Functionals {
        r_grid: r_grid.clone(),
        y_p: Vec::new(),
        y_q: Vec::new(),
        big_y_p: Vec::new(),
        big_y_q: Vec::new(),
        z_p: Vec::new(),
        z_q: Vec::new(),
        aux_ratio: first_ratio,
    };
    for (&node, &r) in node_of.iter().zip(r_grid) {
        out.y_p.push(vals[node].0);
        out.y_q.push(vals[node].1);
        out.big_y_p.push(cum_p[node]);
        out.big_y_q.push(cum_q[node]);
        let (zp, zq) = weighted_integrals(&sm, r, mu, pr.p, pr.q, false);
        out.z_p.push(zp);
        out.z_q.push(zq);
    }
    Ok(out)
}

/// `Y(R) ≤ bound·w(R)` at each radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub holds: bool,
    /// `bound·w(R) − Y(R)`, positive where the inequality holds.
    pub margins: Vec<f64>,
    /// `Y(R) / w(R)`; the inequality asks for at most `log 2 / 4`.
    pub ratios: Vec<f64>,
}

fn bound_check(big: &[f64], w: &[f64]) -> BoundCheck {
    let margins: Vec<f64> = big.iter().zip(w).map(|(y, z)| LOG2_OVER_4 * z - y).collect();
    let scale = big.iter().chain(w).fold(0.0f64, |m, v| m.max(v.abs()));
    let holds = margins.iter().all(|m| *m >= -MONOTONE_TOLERANCE * scale);
    let ratios = big.iter().zip(w).map(|(y, z)| if *z > 0.0 { y / z } else { 0.0 }).collect();
    BoundCheck { holds, margins, ratios }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneCheck {
    pub holds: bool,
    /// Smallest `y(R_{i+1}) − y(R_i)`.
    pub min_increment: f64,
}

fn monotone_check(y: &[f64]) -> MonotoneCheck {
    let scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let min_increment = y.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let min_increment = if min_increment.is_finite() { min_increment } else { 0.0 };
    MonotoneCheck { holds: min_increment >= -MONOTONE_TOLERANCE * scale, min_increment }
}

/// Best constants in the coupled differential inequalities for `Y_p`, `Y_q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameCheck {
    /// `min_R Y_p'(R) / (R^{n+1−np}(Y_q(R) + ε I[v₀,v₁])^p)`; infinite when
    /// every denominator vanishes.
    pub c1: f64,
    /// `min_R Y_q'(R) / (R^{n+1−nq}(Y_p(R) + ε I[u₀,u₁])^q)`.
    pub c2: f64,
    pub delta: f64,
    pub holds: bool,
    /// Per-R margin of the first inequality with `C₁ = c1`, `δ = delta`.
    pub margins_p: Vec<f64>,
    pub margins_q: Vec<f64>,
}

fn derivative(r: &[f64], y: &[f64]) -> Vec<f64> {
    let k = r.len();
    (0..k)
        .map(|i| {
            let (a, b) = if i == 0 {
                (0, 1)
            } else if i == k - 1 {
                (k - 2, k - 1)
            } else {
                (i - 1, i + 1)
            };
            (y[b] - y[a]) / (r[b] - r[a])
        })
        .collect()
}

fn frame_check(f: &Functionals, n: usize, p: f64, q: f64, eps: f64, mass_u: f64, mass_v: f64) -> FrameCheck {
    let nf = n as f64;
    let dp = derivative(&f.r_grid, &f.big_y_p);
    let dq = derivative(&f.r_grid, &f.big_y_q);
    let phi1 = |r: f64| r.powf(nf + 1.0 - nf * p);
    let phi2 = |r: f64| r.powf(nf + 1.0 - nf * q);
    let rhs_p: Vec<f64> =
        f.r_grid.iter().zip(&f.big_y_q).map(|(&r, y)| phi1(r) * (y + eps * mass_v).max(0.0).powf(p)).collect();
    let rhs_q: Vec<f64> =
        f.r_grid.iter().zip(&f.big_y_p).map(|(&r, y)| phi2(r) * (y + eps * mass_u).max(0.0).powf(q)).collect();
    let best = |d: &[f64], rhs: &[f64]| {
        d.iter().zip(rhs).map(|(a, b)| if *b > 0.0 { a / b } else { f64::INFINITY }).fold(f64::INFINITY, f64::min)
    };
    let c1 = best(&dp, &rhs_p);
    let c2 = best(&dq, &rhs_q);
    let r0 = f.r_grid[0];
    let admissible = (p + 1.0) * f.big_y_p[0] * dq[0] / (c1 * phi1(r0) * f.big_y_q[0].powf(p + 1.0));
    let delta = if admissible.is_finite() && admissible > 0.0 { admissible.min(1.0) } else { 1.0 };
    // an infinite constant means every right-hand side vanished
    let margin = |d: &[f64], rhs: &[f64], c: f64| -> Vec<f64> {
        let c = if c.is_finite() { c } else { 0.0 };
        d.iter().zip(rhs).map(|(a, b)| a - c * delta * b).collect()
    };
    let margins_p = margin(&dp, &rhs_p, c1);
    let margins_q = margin(&dq, &rhs_q, c2);
    let scale = dp.iter().chain(&dq).fold(0.0f64, |m, v| m.max(v.abs()));
    let holds = c1 > 0.0
        && c2 > 0.0
        && margins_p.iter().chain(&margins_q).all(|m| *m >= -MONOTONE_TOLERANCE * scale);
    FrameCheck { c1, c2, delta, holds, margins_p, margins_q }
}

/// `max R²|∂_t²ψ − Δψ − ∂_tψ| / η*(s)^μ` over a 201×201 grid in the scaled
/// variables `t/R² ∈ [0,1]`, `|x|/R ∈ [0,1]`.
pub fn c_psi(r: f64, mu: f64, n: usize) -> f64 {
    let psi = Psi { r, mu };
    let m = 200;
    let mut best = 0.0f64;
    for i in 0..=m {
        let t = r * r * i as f64 / m as f64;
        for j in 0..=m {
            let rad = r * j as f64 / m as f64;
            let s = scaled(t, rad, r);
            let w = eta_star(s).powf(mu);
            if w == 0.0 {
                continue;
            }
            best = best.max(r * r * psi.wave_operator(t, rad, n).abs() / w);
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpsiCheck {
    pub values: Vec<f64>,
    /// max / min over the R grid.
    pub spread: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub mu: f64,
    pub functionals: Functionals,
    /// `Y_q(R) ≤ (log 2/4) y_q(R)`.
    pub log_bound_q: BoundCheck,
    pub log_bound_p: BoundCheck,
    /// `Y_q(R) ≤ (log 2/4) ∫∫|u|^q η(s_R)^{qμ}`, the bound with the full cutoff.
    pub full_cutoff_bound_q: BoundCheck,
    pub full_cutoff_bound_p: BoundCheck,
    pub monotone_q: MonotoneCheck,
    pub monotone_p: MonotoneCheck,
    pub c_psi: CpsiCheck,
    pub frames: FrameCheck,
}

impl AuditReport {
    /// Every recorded check passed.
    pub fn all_hold(&self) -> bool {
        self.log_bound_q.holds
            && self.log_bound_p.holds
            && self.monotone_q.holds
            && self.monotone_p.holds
            && self.c_psi.holds
            && self.frames.holds
    }
}

/// Compute the functionals and evaluate every inequality on them.
pub fn audit_inequalities(traj: &Trajectory, cutoff: &CutoffSpec) -> Result<AuditReport> {
    let f = functionals(traj, cutoff)?;
    let pr = traj.header.problem;
    let data = build_initial_data(&pr, &traj.header.grid)?;
    let values: Vec<f64> = f.r_grid.iter().map(|&r| c_psi(r, cutoff.mu, pr.n)).collect();
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(0.0f64, f64::max);
    let spread = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    let c_psi = CpsiCheck { holds: spread <= C_PSI_SPREAD_LIMIT, values, spread };
    Ok(AuditReport {
        mu: cutoff.mu,
        log_bound_q: bound_check(&f.big_y_q, &f.y_q),
        log_bound_p: bound_check(&f.big_y_p, &f.y_p),
        full_cutoff_bound_q: bound_check(&f.big_y_q, &f.z_q),
        full_cutoff_bound_p: bound_check(&f.big_y_p, &f.z_p),
        monotone_q: monotone_check(&f.y_q),
        monotone_p: monotone_check(&f.y_p),
        c_psi,
        frames: frame_check(&f, pr.n, pr.p, pr.q, pr.eps, data.mass_u, data.mass_v),
        functionals: f,
    })
}

/// Both sides of the weak-form identities for `u` and `v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeakResidual {
    pub lhs_u: f64,
    pub rhs_u: f64,
    pub residual_u: f64,
    pub lhs_v: f64,
    pub rhs_v: f64,
    pub residual_v: f64,
    /// Larger of the two residuals.
    pub residual: f64,
}

fn relative(l: f64, r: f64) -> f64 {
    (l - r).abs() / (l.abs() + r.abs() + 1.0)
}

/// Weak-form identities tested against `test`, by the trapezoid rule on the
/// grid and on the stored frame times.
///
/// Damped wave: `∫∫(Ψ_tt − ΔΨ − Ψ_t)u = ∫∫Ψ|v|^p + ∫Ψ(0)(u(0)+u_t(0)) − Ψ_t(0)u(0)`.
/// Heat: `∫∫(−Ψ_t − ΔΨ)u = ∫∫Ψ|v|^p + ∫Ψ(0)u(0)`. The `v` identities swap
/// the roles with exponent `q`. Trajectories of linear runs drop the source.
pub fn weak_residual<T: TestFunction>(traj: &Trajectory, test: &T) -> Result<WeakResidual> {
    traj.validate()?;
    let grid = traj.header.grid;
    let pr = traj.header.problem;
    let band = traj.header.config.boundary_band;
    let inner = (1.0 - band) * grid.half_width;
    if test.radius() >= inner {
        return Err(Error::Audit(format!(
            "test function radius {} reaches the boundary band (|x| ≥ {inner})",
            test.radius()
        )));
    }
    if test.end_time() >= traj.t_covered() {
        return Err(Error::Audit(format!(
            "test function lives until t = {}, trajectory covers {}",
            test.end_time(),
            traj.t_covered()
        )));
    }
    if traj.frames.len() < 2 {
        return Err(Error::Audit("trajectory needs at least two frames".into()));
    }
    let radii = grid.radii();
    let keep: Vec<usize> = (0..radii.len()).filter(|&i| radii[i] < test.radius()).collect();
    let (iu, iv) = traj.position_indices();
    let times: Vec<f64> = traj.frames.iter().map(|f| f.t).collect();
    let tw = trapezoid_weights(&times);
    let dv = grid.cell_volume();
    let source = !traj.header.linear;
    let wave = pr.model == ModelKind::DampedWave;

    let (mut lu, mut ru, mut lv, mut rv) = (0.0, 0.0, 0.0, 0.0);
    for (k, f) in traj.frames.iter().enumerate() {
        if f.t >= test.end_time() {
            break;
        }
        let (mut a, mut b, mut c, mut d) = (0.0, 0.0, 0.0, 0.0);
        for &i in &keep {
            let tv = test.eval(f.t, radii[i], pr.n);
            let op = if wave { tv.dtt - tv.lap - tv.dt } else { -tv.dt - tv.lap };
            let (u, v) = (f.fields[iu][i], f.fields[iv][i]);
            a += op * u;
            c += op * v;
            if source {
                b += tv.value * v.abs().powf(pr.p);
                d += tv.value * u.abs().powf(pr.q);
            }
        }
        lu += tw[k] * a;
        ru += tw[k] * b;
        lv += tw[k] * c;
        rv += tw[k] * d;
    }
    let f0 = &traj.frames[0];
    let (mut du, mut dvv) = (0.0, 0.0);
    for &i in &keep {
        let tv = test.eval(0.0, radii[i], pr.n);
        if wave {
            du += tv.value * (f0.fields[0][i] + f0.fields[1][i]) - tv.dt * f0.fields[0][i];
            dvv += tv.value * (f0.fields[2][i] + f0.fields[3][i]) - tv.dt * f0.fields[2][i];
        } else {
            du += tv.value * f0.fields[0][i];
            dvv += tv.value * f0.fields[1][i];
        }
    }
    let (lhs_u, rhs_u) = (lu * dv, (ru + du) * dv);
    let (lhs_v, rhs_v) = (lv * dv, (rv + dvv) * dv);
    let residual_u = relative(lhs_u, rhs_u);
    let residual_v = relative(lhs_v, rhs_v);
    Ok(WeakResidual {
        lhs_u,
        rhs_u,
        residual_u,
        lhs_v,
        rhs_v,
        residual_v,
        residual: residual_u.max(residual_v),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eta_shape() {
        assert_eq!(eta(0.3), 1.0);
        assert_eq!(eta(2.0), 0.0);
        assert_eq!(eta(1.0), 0.0);
        assert_eq!(eta(0.5), 1.0);
        let a = eta(0.6);
        assert!(a > 0.0 && a < 1.0);
        assert!(eta(0.7) < a);
        assert_eq!(eta_star(0.49), 0.0);
        assert_eq!(eta_star(0.6), a);
    }

    #[test]
    fn eta_is_strictly_decreasing_on_the_shoulder() {
        // strict where the bridge is resolved in double precision
        let mut prev = 1.0;
        for i in 1..1000 {
            let s = 0.5 + 0.5 * i as f64 / 1000.0;
            let e = eta(s);
            if (0.53..0.99).contains(&s) {
                assert!(e < prev, "s = {s}");
            } else {
                assert!(e <= prev, "s = {s}");
            }
            prev = e;
        }
    }

    #[test]
    fn eta_derivatives_match_differences() {
        let h = 1e-5;
        for i in 1..50 {
            let s = 0.5 + 0.5 * i as f64 / 50.0;
            let (_, d1, d2) = eta_derivatives(s);
            let fd1 = (eta(s + h) - eta(s - h)) / (2.0 * h);
            let fd2 = (eta(s + h) - 2.0 * eta(s) + eta(s - h)) / (h * h);
            assert!((d1 - fd1).abs() < 1e-7 * (1.0 + d1.abs()), "s = {s}: {d1} vs {fd1}");
            assert!((d2 - fd2).abs() < 1e-3 * (1.0 + d2.abs()), "s = {s}: {d2} vs {fd2}");
        }
    }

    #[test]
    fn mu_examples() {
        assert_eq!(mu_default(3.0, 3.0), 1.0);
        assert!((mu_default(7.0 / 3.0, 9.0) - 1.5).abs() < 1e-15);
        assert_eq!(mu_default(2.0, 2.0), 2.0);
    }

    #[test]
    fn psi_is_one_on_the_data_support() {
        let (r0, r1) = (3.0, 2.0);
        let base = CutoffSpec::base_radius(r0, r1);
        for r in [base, 1.5 * base, 4.0 * base] {
            for j in 0..=30 {
                let rad = r0 * j as f64 / 30.0;
                assert_eq!(psi(0.0, rad, r, 1.5), 1.0);
            }
        }
    }

    #[test]
    fn psi_derivatives_match_differences() {
        let ps = Psi { r: 3.0, mu: 1.5 };
        let h = 1e-4;
        for n in [1, 2] {
            for &(t, rad) in &[(5.0, 1.0), (2.0, 2.5), (7.0, 0.4), (6.0, 2.0)] {
                let d = ps.eval(t, rad, n);
                let v = |t: f64, x: f64, y: f64| psi(t, (x * x + y * y).sqrt(), ps.r, ps.mu);
                let fdt = (v(t + h, rad, 0.0) - v(t - h, rad, 0.0)) / (2.0 * h);
                let fdtt = (v(t + h, rad, 0.0) - 2.0 * d.value + v(t - h, rad, 0.0)) / (h * h);
                let mut lap = (v(t, rad + h, 0.0) - 2.0 * d.value + v(t, rad - h, 0.0)) / (h * h);
                if n == 2 {
                    lap += (v(t, rad, h) - 2.0 * d.value + v(t, rad, -h)) / (h * h);
                }
                assert!((d.dt - fdt).abs() < 1e-6, "{n} {t} {rad}: {} vs {fdt}", d.dt);
                assert!((d.dtt - fdtt).abs() < 1e-4, "{n} {t} {rad}: {} vs {fdtt}", d.dtt);
                assert!((d.lap - lap).abs() < 1e-4, "{n} {t} {rad}: {} vs {lap}", d.lap);
            }
        }
    }

    #[test]
    fn starred_cutoff_is_below_the_full_one() {
        for i in 0..200 {
            let s = 1.2 * i as f64 / 200.0;
            assert!(eta_star(s) <= eta(s));
            assert!((0.0..=1.0).contains(&eta(s)));
        }
    }

    #[test]
    fn c_psi_is_uniform_in_r() {
        let vals: Vec<f64> = [5.0, 10.0, 20.0].iter().map(|&r| c_psi(r, 1.0, 1)).collect();
        let hi = vals.iter().cloned().fold(0.0, f64::max);
        let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(lo > 0.0 && hi / lo < 10.0, "{vals:?}");
    }

    #[test]
    fn cutoff_grid() {
        let c = CutoffSpec::new(1.0, 2.0, 3.0, 1e6, 16).unwrap();
        let base = (2.0f64 * 81.0).powf(0.25);
        assert!((c.r_grid[0] - base).abs() < 1e-12);
        assert!((c.r_grid[15] - 4.0 * base).abs() < 1e-9);
        let short = CutoffSpec::new(1.0, 2.0, 3.0, 50.0, 16).unwrap();
        assert!(short.r_grid[15] < 50.0f64.sqrt());
        assert!(CutoffSpec::new(1.0, 2.0, 3.0, 4.0, 16).is_err());
    }
}
