use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use critwave::audit::{audit_inequalities, CutoffSpec};
use critwave::config::ConfigFile;
use critwave::criticality::{classify, predicted_law, DEFAULT_TOLERANCE};
use critwave::grid::make_grid;
use critwave::problem::{InitialDataSpec, ModelKind, ProblemSpec};
use critwave::run::{linear_history, matsumura_fit, run, Trajectory};
use critwave::sweep::{fit_scaling, run_sweep, FitLaw, SweepTable};
use critwave::Error;

/// Blow-up and lifespan experiments for weakly coupled semilinear systems.
#[derive(Parser)]
#[command(name = "critwave", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Position of (p, q, n) relative to the critical curve and the predicted lifespan law.
    Classify {
        #[arg(long)]
        p: f64,
        #[arg(long)]
        q: f64,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
        tol: f64,
    },
    /// Run one problem; writes the trajectory, norm history, summary and resolved config.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run an eps sweep over the grid ladder and write the results table.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, env = "CRITWAVE_JOBS", default_value_t = 1)]
        jobs: usize,
        /// Results file; overrides `sweep.output`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit a results table against a lifespan law.
    Fit {
        #[arg(long)]
        input: PathBuf,
        /// critical | subcritical | fixed-kappa
        #[arg(long, default_value = "fixed-kappa")]
        law: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Audit the cutoff-function inequalities on a stored trajectory.
    Audit {
        #[arg(long)]
        trajectory: PathBuf,
        #[arg(long)]
        mu: Option<f64>,
        #[arg(long, default_value_t = 16)]
        points: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Decay rates of the linear damped-wave flow for Gaussian data.
    LinearDecay {
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long, default_value_t = 50.0)]
        t_start: f64,
        #[arg(long, default_value_t = 500.0)]
        t_end: f64,
        /// Torus half-width; 400 for n = 1 and 100 for n = 2 by default.
        #[arg(long = "L")]
        half_width: Option<f64>,
        #[arg(long = "N")]
        points: Option<usize>,
    },
}

enum Failure {
    Usage(String),
    Inconclusive(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Inconclusive(e.to_string())
    }
}

fn usage(e: Error) -> Failure {
    Failure::Usage(e.to_string())
}

fn print_json<T: Serialize>(v: &T) -> Result<(), Failure> {
    let s = serde_json::to_string_pretty(v).map_err(Error::from)?;
    println!("{s}");
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<(), Failure> {
    let s = serde_json::to_string_pretty(v).map_err(Error::from)?;
    std::fs::write(path, s + "\n").map_err(Error::from)?;
    Ok(())
}

fn load_config(path: &Path) -> Result<ConfigFile, Failure> {
    ConfigFile::load(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn classify_cmd(p: f64, q: f64, n: usize, tol: f64) -> Result<(), Failure> {
    let report = classify(p, q, n, tol).map_err(usage)?;
    let law = predicted_law(p, q, n).ok();
    #[derive(Serialize)]
    struct Out<A, B> {
        report: A,
        law: B,
    }
    print_json(&Out { report, law })
}

fn simulate(config: &Path, out: &Path) -> Result<(), Failure> {
    let cfg = load_config(config)?;
    let grid = cfg.grid_spec().map_err(usage)?;
    let result = run(&cfg.problem, &grid, &cfg.run)?;
    std::fs::create_dir_all(out).map_err(Error::from)?;
    result.trajectory.save(&out.join("trajectory.bin"))?;
    write_json(&out.join("history.json"), &result.history)?;
    let summary = result.summary();
    write_json(&out.join("summary.json"), &summary)?;
    let resolved = cfg.resolved(1).map_err(usage)?.to_toml().map_err(usage)?;
    std::fs::write(out.join("config.resolved.toml"), resolved).map_err(Error::from)?;
    print_json(&summary)?;
    if summary.status.is_inconclusive() {
        return Err(Failure::Inconclusive(format!("run ended {}", summary.status.as_str())));
    }
    Ok(())
}

fn sweep(config: &Path, jobs: usize, out: Option<PathBuf>) -> Result<(), Failure> {
    let cfg = load_config(config)?;
    let mut spec = cfg.sweep_spec(jobs).map_err(usage)?;
    if out.is_some() {
        spec.output = out;
    }
    let table = run_sweep(&spec)?;
    if spec.output.is_none() {
        print!("{}", table.to_csv());
    }
    for r in &table.rows {
        let t = r.t_num.map_or("-".to_string(), |t| format!("{t:.6}"));
        eprintln!("eps={:.6} N={} {} T={t}", r.eps, r.points, r.status.as_str());
    }
    if table.boundary_flagged() {
        return Err(Failure::Inconclusive("some runs reached the boundary band".into()));
    }
    Ok(())
}

fn fit(input: &Path, law: &str, out: Option<PathBuf>) -> Result<(), Failure> {
    let law = FitLaw::parse(law)
        .ok_or_else(|| Failure::Usage(format!("unknown law {law:?}; use critical, subcritical or fixed-kappa")))?;
    let table = SweepTable::load(input)?;
    let result = fit_scaling(&table, law)?;
    if let Some(path) = out {
        result.save(&path)?;
    }
    print_json(&result)
}

fn audit(trajectory: &Path, mu: Option<f64>, points: usize, out: Option<PathBuf>) -> Result<(), Failure> {
    let traj = Trajectory::load(trajectory)?;
    let mut cutoff = CutoffSpec::for_trajectory(&traj)?;
    if let Some(mu) = mu {
        cutoff.mu = mu;
    }
    if points != cutoff.r_grid.len() {
        cutoff = CutoffSpec::new(cutoff.mu, cutoff.r0, cutoff.r1, traj.t_covered(), points)?;
    }
    let report = audit_inequalities(&traj, &cutoff)?;
    if let Some(path) = out {
        write_json(&path, &report)?;
    }
    print_json(&report)?;
    if !report.all_hold() {
        return Err(Failure::Inconclusive("some audited inequalities fail".into()));
    }
    Ok(())
}

fn linear_decay(
    n: usize,
    window: (f64, f64),
    half_width: Option<f64>,
    points: Option<usize>,
) -> Result<(), Failure> {
    let (l, np) = match n {
        1 => (half_width.unwrap_or(400.0), points.unwrap_or(2048)),
        2 => (half_width.unwrap_or(100.0), points.unwrap_or(512)),
        _ => return Err(Failure::Usage(format!("dimension must be 1 or 2, got {n}"))),
    };
    let grid = make_grid(n, l, np).map_err(usage)?;
    let problem = ProblemSpec {
        model: ModelKind::DampedWave,
        n,
        p: 3.0,
        q: 3.0,
        eps: 1.0,
        data: InitialDataSpec::gaussian(1.0, 0.0, 1.0, 0.0, 2.0),
    };
    let (a, b) = window;
    let times: Vec<f64> = (0..=64).map(|k| a * (b / a).powf(k as f64 / 64.0)).collect();
    let history = linear_history(&problem, &grid, &times)?;
    let (l2, grad) = matsumura_fit(&history, window)?;
    #[derive(Serialize)]
    struct Out {
        n: usize,
        window: (f64, f64),
        slope_l2: f64,
        slope_grad: f64,
        expected_l2: f64,
        expected_grad: f64,
        boundary_mass_max: f64,
    }
    let nf = n as f64;
    print_json(&Out {
        n,
        window,
        slope_l2: l2,
        slope_grad: grad,
        expected_l2: -nf / 4.0,
        expected_grad: -nf / 4.0 - 0.5,
        boundary_mass_max: history.boundary_mass_max(),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Classify { p, q, n, tol } => classify_cmd(p, q, n, tol),
        Command::Simulate { config, out } => simulate(&config, &out),
        Command::Sweep { config, jobs, out } => sweep(&config, jobs, out),
        Command::Fit { input, law, out } => fit(&input, &law, out),
        Command::Audit { trajectory, mu, points, out } => audit(&trajectory, mu, points, out),
        Command::LinearDecay { n, t_start, t_end, half_width, points } => {
            linear_decay(n, (t_start, t_end), half_width, points)
        }
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Inconclusive(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
    }
}
