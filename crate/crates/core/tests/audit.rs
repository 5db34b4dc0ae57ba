//! Audit functionals and the weak-form residual on trajectories with known
//! closed forms.

use critwave::audit::{audit_inequalities, eta, functionals, weak_residual, CutoffSpec, Psi};
use critwave::grid::make_grid;
use critwave::problem::{InitialDataSpec, ModelKind, ProblemSpec};
use critwave::run::{Frame, RunConfig, Trajectory};

const U0: f64 = 0.4;

/// Spatially constant solution of `u_t = |v|³`, `v_t = |u|³` with `u = v`.
fn separable(t: f64) -> f64 {
    (U0.powi(-2) - 2.0 * t).powf(-0.5)
}

fn heat_problem(amp: f64) -> ProblemSpec {
    ProblemSpec {
        model: ModelKind::ReactionDiffusion,
        n: 1,
        p: 3.0,
        q: 3.0,
        eps: 1.0,
        data: InitialDataSpec::constant(amp, 0.0, amp, 0.0),
    }
}

fn trajectory(amp: f64, t_end: f64, frames: usize, value: impl Fn(f64) -> f64) -> Trajectory {
    trajectory_of(heat_problem(amp), t_end, frames, value)
}

fn trajectory_of(problem: ProblemSpec, t_end: f64, frames: usize, value: impl Fn(f64) -> f64) -> Trajectory {
    let grid = make_grid(1, 2.0, 1024).unwrap();
    let mut traj = Trajectory::new(problem, grid, RunConfig::new(t_end));
    for k in 0..=frames {
        let t = t_end * k as f64 / frames as f64;
        let u = vec![value(t); grid.len()];
        traj.frames.push(Frame { t, fields: vec![u.clone(), u] });
    }
    traj
}

/// Gauss–Legendre nodes and weights on [−1, 1].
fn gauss_legendre(m: usize) -> Vec<(f64, f64)> {
    (0..m)
        .map(|i| {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=m {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-15 {
                    break;
                }
            }
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize, rule: &[(f64, f64)]) -> f64 {
    let h = (b - a) / panels as f64;
    let mut s = 0.0;
    for k in 0..panels {
        let mid = a + (k as f64 + 0.5) * h;
        for &(x, w) in rule {
            s += 0.5 * h * w * f(mid + 0.5 * h * x);
        }
    }
    s
}

/// `∫₀^{R²} f(t)³ ∫ η*((t²+x⁴)/R⁴)^{3μ} dx dt`; the starred cutoff vanishes
/// for `s < 1/2`, so the x integral runs over the annulus `s ∈ [1/2, 1)`.
fn y_oracle(r: f64, mu: f64, rule: &[(f64, f64)]) -> f64 {
    let r4 = r.powi(4);
    let inner = |t: f64| {
        let lo = (0.5 * r4 - t * t).max(0.0).powf(0.25);
        let hi = (r4 - t * t).max(0.0).powf(0.25);
        let g = |x: f64| eta((t * t + x.powi(4)) / r4).powf(3.0 * mu);
        2.0 * integrate(g, lo, hi, 8, rule)
    };
    let knee = r * r / 2f64.sqrt();
    let outer = |t: f64| separable(t).powi(3) * inner(t);
    integrate(outer, 0.0, knee, 16, rule) + integrate(outer, knee, r * r, 16, rule)
}

#[test]
fn y_functional_matches_quadrature_for_a_separable_solution() {
    let traj = trajectory(U0, 3.0, 1500, separable);
    let cutoff = CutoffSpec { mu: 1.0, r0: 0.7, r1: 0.7, r_grid: vec![1.2, 1.4, 1.6] };
    let f = functionals(&traj, &cutoff).unwrap();
    let rule = gauss_legendre(24);
    for (i, &r) in cutoff.r_grid.iter().enumerate() {
        let want = y_oracle(r, 1.0, &rule);
        assert!((f.y_q[i] - want).abs() <= 0.01 * want, "R = {r}: {} vs {want}", f.y_q[i]);
        assert_eq!(f.y_q[i], f.y_p[i]);
    }
    // Y(R) = ∫₀^R y(r) dr/r
    let last = cutoff.r_grid.len() - 1;
    let r = cutoff.r_grid[last];
    let want = integrate(|s| y_oracle(s, 1.0, &rule) / s, 0.0, r, 12, &rule);
    let got = f.big_y_q[last];
    assert!((got - want).abs() <= 0.01 * want, "Y({r}) = {got} vs {want}");
}

#[test]
fn zero_trajectory_has_vanishing_functionals() {
    let mut problem = heat_problem(0.0);
    problem.data = InitialDataSpec::bump(0.0, 0.0, 0.0, 0.0, 0.4);
    let traj = trajectory_of(problem, 3.0, 300, |_| 0.0);
    let cutoff = CutoffSpec::for_trajectory(&traj).unwrap();
    let report = audit_inequalities(&traj, &cutoff).unwrap();
    let f = &report.functionals;
    for v in [&f.y_p, &f.y_q, &f.big_y_p, &f.big_y_q, &f.z_p, &f.z_q] {
        assert!(v.iter().all(|&x| x == 0.0));
    }
    assert!(report.all_hold());
}

#[test]
fn separable_solution_satisfies_the_weak_identity() {
    let test = Psi::new(1.5, 1.0).unwrap();
    let residual = |frames| weak_residual(&trajectory(U0, 3.0, frames, separable), &test).unwrap().residual;
    let (coarse, fine) = (residual(750), residual(3000));
    assert!(fine < 1e-4, "residual {fine}");
    assert!(coarse / fine > 3.0, "{coarse} -> {fine}");
}

#[test]
fn wrong_trajectory_fails_the_weak_identity() {
    let test = Psi::new(1.5, 1.0).unwrap();
    // a profile that does not solve the system
    let w = weak_residual(&trajectory(U0, 3.0, 3000, |t| U0 + 0.01 * t), &test).unwrap();
    assert!(w.residual > 1e-2, "residual {}", w.residual);
}

#[test]
fn audit_rejects_short_or_wide_requests() {
    let traj = trajectory(U0, 1.0, 100, separable);
    let cutoff = CutoffSpec { mu: 1.0, r0: 0.5, r1: 0.5, r_grid: vec![0.8, 1.2] };
    assert!(functionals(&traj, &cutoff).is_err());
    assert!(weak_residual(&traj, &Psi::new(1.9, 1.0).unwrap()).is_err());
    assert!(CutoffSpec::new(1.0, 0.0, 0.0, 10.0, 8).is_err());
}
