//! ε-sweeps over a ladder of grids, lifespan regression and the results file.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::criticality::{predicted_law, LawForm};
use crate::error::{Error, Result};
use crate::grid::make_grid;
use crate::problem::{ModelKind, ProblemSpec};
use crate::run::{run, RunConfig, RunStatus};
use crate::stats::least_squares;

pub const CSV_HEADER: &str = "model,n,p,q,eps,L,N,status,T_num,boundary_mass_max,dt_final";
/// Relative change of `T_num` between ladder rungs that still counts as converged.
pub const LADDER_TOLERANCE: f64 = 0.01;
/// Allowed relative decrease of `T_num` as ε decreases.
pub const MONOTONE_SLACK: f64 = 0.05;
pub const MIN_FIT_POINTS: usize = 4;

/// One rung of the resolution ladder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rung {
    #[serde(rename = "L")]
    pub half_width: f64,
    #[serde(rename = "N")]
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    /// Template problem; its `eps` is replaced by each entry of `eps_list`.
    pub problem: ProblemSpec,
    pub eps_list: Vec<f64>,
    pub ladder: Vec<Rung>,
    pub config: RunConfig,
    pub jobs: usize,
    pub output: Option<PathBuf>,
}

/// `count` values `start·ratio^k`.
pub fn geometric_eps(start: f64, ratio: f64, count: usize) -> Vec<f64> {
    (0..count).map(|k| start * ratio.powi(k as i32)).collect()
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.eps_list.is_empty() {
            return Err(Error::Config("eps_list is empty".into()));
        }
        if self.eps_list.iter().any(|e| !(*e > 0.0) || !e.is_finite()) {
            return Err(Error::Config("eps_list entries must be positive".into()));
        }
        if self.eps_list.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::Config("eps_list must be strictly decreasing".into()));
        }
        if self.ladder.is_empty() {
            return Err(Error::Config("grid ladder is empty".into()));
        }
        if self.ladder.windows(2).any(|w| !(w[1].points > w[0].points)) {
            return Err(Error::Config("grid ladder must have increasing N".into()));
        }
        if self.jobs == 0 {
            return Err(Error::Config("jobs must be positive".into()));
        }
        for r in &self.ladder {
            make_grid(self.problem.n, r.half_width, r.points)?;
        }
        self.config.validate()?;
        self.problem.with_eps(self.eps_list[0]).validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub model: ModelKind,
    pub n: usize,
    pub p: f64,
    pub q: f64,
    pub eps: f64,
    pub half_width: f64,
    pub points: usize,
    pub status: RunStatus,
    pub t_num: Option<f64>,
    pub boundary_mass_max: f64,
    pub dt_final: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    /// Some run left the torus interior.
    pub fn boundary_flagged(&self) -> bool {
        self.rows.iter().any(|r| r.status == RunStatus::InconclusiveBoundary)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            let t = r.t_num.map_or(String::new(), |t| format!("{t:.16e}"));
            let _ = writeln!(
                s,
                "{},{},{:.16e},{:.16e},{:.16e},{:.16e},{},{},{},{:.16e},{:.16e}",
                r.model.as_str(),
                r.n,
                r.p,
                r.q,
                r.eps,
                r.half_width,
                r.points,
                r.status.as_str(),
                t,
                r.boundary_mass_max,
                r.dt_final
            );
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.split('\n').enumerate();
        match lines.next() {
            Some((_, h)) if h == CSV_HEADER => {}
            _ => return Err(Error::Parse { line: 1, message: "missing or wrong header".into() }),
        }
        let mut rows = Vec::new();
        let lines: Vec<(usize, &str)> = lines.collect();
        for (k, (i, line)) in lines.iter().enumerate() {
            let line_no = i + 1;
            if line.is_empty() {
                if k + 1 == lines.len() {
                    break;
                }
                return Err(Error::Parse { line: line_no, message: "empty line".into() });
            }
            if k + 1 == lines.len() {
                return Err(Error::Parse { line: line_no, message: "line is not terminated".into() });
            }
            rows.push(parse_row(line).map_err(|message| Error::Parse { line: line_no, message })?);
        }
        Ok(SweepTable { rows })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        Ok(std::fs::write(path, self.to_csv())?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_csv(&std::fs::read_to_string(path)?)
    }
}

fn parse_row(line: &str) -> std::result::Result<SweepRow, String> {
    let f: Vec<&str> = line.split(',').collect();
    if f.len() != 11 {
        return Err(format!("expected 11 fields, found {}", f.len()));
    }
    let float = |i: usize, name: &str| -> std::result::Result<f64, String> {
        f[i].parse::<f64>().map_err(|_| format!("bad {name} {:?}", f[i]))
    };
    let int = |i: usize, name: &str| -> std::result::Result<usize, String> {
        f[i].parse::<usize>().map_err(|_| format!("bad {name} {:?}", f[i]))
    };
    Ok(SweepRow {
        model: ModelKind::parse(f[0]).ok_or_else(|| format!("unknown model {:?}", f[0]))?,
        n: int(1, "n")?,
        p: float(2, "p")?,
        q: float(3, "q")?,
        eps: float(4, "eps")?,
        half_width: float(5, "L")?,
        points: int(6, "N")?,
        status: RunStatus::parse(f[7]).ok_or_else(|| format!("unknown status {:?}", f[7]))?,
        t_num: if f[8].is_empty() { None } else { Some(float(8, "T_num")?) },
        boundary_mass_max: float(9, "boundary_mass_max")?,
        dt_final: float(10, "dt_final")?,
    })
}

/// Flag the finer rung of every adjacent pair whose lifespans differ by more
/// than [`LADDER_TOLERANCE`]. Rows must be grouped by ε with N ascending.
pub fn mark_unconverged(rows: &mut [SweepRow]) {
    for i in 1..rows.len() {
        let (a, b) = (&rows[i - 1], &rows[i]);
        if a.eps != b.eps || a.status != RunStatus::BlewUp || b.status != RunStatus::BlewUp {
            continue;
        }
        let (ta, tb) = (a.t_num.unwrap_or(f64::NAN), b.t_num.unwrap_or(f64::NAN));
        if !((ta - tb).abs() <= LADDER_TOLERANCE * tb.abs()) {
            rows[i].status = RunStatus::InconclusiveResolution;
        }
    }
}

/// Run every (ε, rung) pair on a pool of `spec.jobs` workers, then apply the
/// ladder check and write the results file if an output path is set.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepTable> {
    spec.validate()?;
    let tasks: Vec<(f64, Rung)> =
        spec.eps_list.iter().flat_map(|&e| spec.ladder.iter().map(move |&r| (e, r))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.jobs)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let results: Vec<Result<SweepRow>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(eps, rung)| {
                let problem = spec.problem.with_eps(eps);
                let grid = make_grid(problem.n, rung.half_width, rung.points)?;
                let r = run(&problem, &grid, &spec.config)?;
                Ok(SweepRow {
                    model: problem.model,
                    n: problem.n,
                    p: problem.p,
                    q: problem.q,
                    eps,
                    half_width: rung.half_width,
                    points: rung.points,
                    status: r.status,
                    t_num: r.t_num,
                    boundary_mass_max: r.history.boundary_mass_max(),
                    dt_final: r.dt_final,
                })
            })
            .collect()
    });
    let mut rows = results.into_iter().collect::<Result<Vec<_>>>()?;
    mark_unconverged(&mut rows);
    let table = SweepTable { rows };
    if let Some(path) = &spec.output {
        table.save(path)?;
    }
    Ok(table)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitLaw {
    /// Free exponent in `T = exp(C ε^{−κ})`.
    Critical,
    /// Free exponent in `T = C ε^{−κ}`.
    Subcritical,
    /// Linearity of `log T` against `ε^{−κ}` with the predicted κ.
    FixedKappa,
}

impl FitLaw {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "critical" => Some(FitLaw::Critical),
            "subcritical" => Some(FitLaw::Subcritical),
            "fixed-kappa" => Some(FitLaw::FixedKappa),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub law: FitLaw,
    pub form: LawForm,
    pub kappa_hat: f64,
    pub c_hat: f64,
    pub r_squared: f64,
    pub residuals: Vec<f64>,
    pub kappa_predicted: Option<f64>,
    pub eps: Vec<f64>,
    pub t_num: Vec<f64>,
}

impl FitResult {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse { line: e.line(), message: e.to_string() })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        Ok(std::fs::write(path, self.to_json()?)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// `(ε, T_num)` of the resolution-converged blow-up row of each ε, ε
/// descending. Per ε the finest blown-up rung is used when the rung below it
/// also blew up (and so agreed within tolerance); a single-rung ladder uses
/// its only row.
pub fn usable_points(table: &SweepTable) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut i = 0;
    let rows = &table.rows;
    while i < rows.len() {
        let mut j = i;
        while j < rows.len() && rows[j].eps == rows[i].eps {
            j += 1;
        }
        let group = &rows[i..j];
        let pick = if group.len() == 1 {
            (group[0].status == RunStatus::BlewUp).then_some(&group[0])
        } else {
            (1..group.len())
                .rev()
                .find(|&k| group[k].status == RunStatus::BlewUp && group[k - 1].status == RunStatus::BlewUp)
                .map(|k| &group[k])
        };
        if let Some(r) = pick {
            if let Some(t) = r.t_num {
                out.push((r.eps, t));
            }
        }
        i = j;
    }
    out.sort_by(|a, b| b.0.total_cmp(&a.0));
    out
}

/// Regress measured lifespans against the requested law.
pub fn fit_scaling(table: &SweepTable, law: FitLaw) -> Result<FitResult> {
    if !table.rows.iter().any(|r| r.status == RunStatus::BlewUp) {
        return Err(Error::Fit("no blow-up data".into()));
    }
    let first = &table.rows[0];
    if table.rows.iter().any(|r| r.model != first.model || r.n != first.n || r.p != first.p || r.q != first.q) {
        return Err(Error::Fit("table mixes different problems".into()));
    }
    let predicted = predicted_law(first.p, first.q, first.n).ok();
    let pts: Vec<(f64, f64)> = usable_points(table).into_iter().filter(|&(_, t)| t > 1.0).collect();
    if pts.len() < MIN_FIT_POINTS {
        return Err(Error::Fit(format!(
            "{} usable blow-up points, need {MIN_FIT_POINTS}",
            pts.len()
        )));
    }
    for w in pts.windows(2) {
        if w[1].1 < (1.0 - MONOTONE_SLACK) * w[0].1 {
            return Err(Error::Fit(format!(
                "T_num not monotone in eps: T({}) = {} but T({}) = {}",
                w[0].0, w[0].1, w[1].0, w[1].1
            )));
        }
    }
    let eps: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let t_num: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let inv_log: Vec<f64> = eps.iter().map(|e| (1.0 / e).ln()).collect();
    let log_t: Vec<f64> = t_num.iter().map(|t| t.ln()).collect();
    let kappa_predicted = predicted.as_ref().map(|l| l.kappa);
    let (form, kappa_hat, c_hat, r_squared, residuals) = match law {
        FitLaw::Critical => {
            let loglog: Vec<f64> = log_t.iter().map(|l| l.ln()).collect();
            let f = least_squares(&inv_log, &loglog)?;
            let x: Vec<f64> = eps.iter().map(|e| e.powf(-f.slope)).collect();
            let c = least_squares(&x, &log_t)?;
            (LawForm::ExpPower, f.slope, c.slope, f.r_squared, f.residuals)
        }
        FitLaw::Subcritical => {
            let f = least_squares(&inv_log, &log_t)?;
            (LawForm::Power, f.slope, f.intercept.exp(), f.r_squared, f.residuals)
        }
        FitLaw::FixedKappa => {
            let pl = predicted.as_ref().ok_or_else(|| {
                Error::Fit(format!("no predicted law for ({}, {}, {})", first.p, first.q, first.n))
            })?;
            let x: Vec<f64> = eps.iter().map(|e| e.powf(-pl.kappa)).collect();
            match pl.form {
                LawForm::Power => {
                    let f = least_squares(&x, &t_num)?;
                    (LawForm::Power, pl.kappa, f.slope, f.r_squared, f.residuals)
                }
                _ => {
                    let f = least_squares(&x, &log_t)?;
                    (LawForm::ExpPower, pl.kappa, f.slope, f.r_squared, f.residuals)
                }
            }
        }
    };
    Ok(FitResult { law, form, kappa_hat, c_hat, r_squared, residuals, kappa_predicted, eps, t_num })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(eps: f64, points: usize, status: RunStatus, t: Option<f64>) -> SweepRow {
        SweepRow {
            model: ModelKind::DampedWave,
            n: 1,
            p: 3.0,
            q: 3.0,
            eps,
            half_width: 64.0,
            points,
            status,
            t_num: t,
            boundary_mass_max: 1e-9,
            dt_final: 0.125,
        }
    }

    fn synthetic(f: impl Fn(f64) -> f64, eps: &[f64]) -> SweepTable {
        SweepTable { rows: eps.iter().map(|&e| row(e, 256, RunStatus::BlewUp, Some(f(e)))).collect() }
    }

    #[test]
    fn exp_power_inversion() {
        let t = synthetic(|e| (5.0 * e.powi(-2)).exp(), &[1.0, 0.8, 0.6, 0.5]);
        let f = fit_scaling(&t, FitLaw::Critical).unwrap();
        assert!((f.kappa_hat - 2.0).abs() < 1e-9);
        assert!((f.c_hat - 5.0).abs() < 1e-8);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        let g = fit_scaling(&t, FitLaw::FixedKappa).unwrap();
        assert!((g.c_hat - 5.0).abs() < 1e-9);
        assert!((g.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn power_inversion_and_scale_invariance() {
        let eps = [1.0, 0.8, 0.6, 0.5, 0.4];
        let a = fit_scaling(&synthetic(|e| 3.0 * e.powi(-6), &eps), FitLaw::Subcritical).unwrap();
        assert!((a.kappa_hat - 6.0).abs() < 1e-12);
        assert!((a.c_hat - 3.0).abs() < 1e-10);
        let b = fit_scaling(&synthetic(|e| 3e4 * e.powi(-6), &eps), FitLaw::Subcritical).unwrap();
        assert!((a.kappa_hat - b.kappa_hat).abs() < 1e-12);
        assert!((b.c_hat / a.c_hat - 1e4).abs() < 1e-6);
    }

    #[test]
    fn guards() {
        let survived =
            SweepTable { rows: (0..5).map(|k| row(0.1 / (k + 1) as f64, 256, RunStatus::Survived, None)).collect() };
        let e = fit_scaling(&survived, FitLaw::Critical).unwrap_err();
        assert!(e.to_string().contains("no blow-up data"));
        let few = synthetic(|e| 10.0 / e, &[1.0, 0.8, 0.6]);
        assert!(fit_scaling(&few, FitLaw::Subcritical).is_err());
        let bumpy = synthetic(|e| if e == 0.6 { 2.0 } else { 10.0 / e }, &[1.0, 0.8, 0.6, 0.5, 0.4]);
        let e = fit_scaling(&bumpy, FitLaw::Subcritical).unwrap_err();
        assert!(e.to_string().contains("monotone"));
        // T ≤ 1 rows drop out
        let small = synthetic(|e| 0.9 / e, &[1.0, 0.95, 0.8, 0.6, 0.5]);
        assert!(fit_scaling(&small, FitLaw::Subcritical).is_err());
    }

    #[test]
    fn ladder_selection() {
        let mut rows = vec![
            row(1.0, 256, RunStatus::BlewUp, Some(10.0)),
            row(1.0, 512, RunStatus::BlewUp, Some(10.05)),
            row(0.8, 256, RunStatus::BlewUp, Some(20.0)),
            row(0.8, 512, RunStatus::BlewUp, Some(21.0)),
        ];
        mark_unconverged(&mut rows);
        assert_eq!(rows[1].status, RunStatus::BlewUp);
        assert_eq!(rows[3].status, RunStatus::InconclusiveResolution);
        let pts = usable_points(&SweepTable { rows });
        assert_eq!(pts, vec![(1.0, 10.05)]);
    }

    #[test]
    fn csv_round_trip() {
        let empty = SweepTable::default();
        assert_eq!(empty.to_csv(), format!("{CSV_HEADER}\n"));
        assert_eq!(SweepTable::from_csv(&empty.to_csv()).unwrap(), empty);
        let mut t = synthetic(|e| 1.0 / 3.0 + 7.0 / e, &[1.0, 0.85, 0.7225, 0.614125, 0.52200625]);
        t.rows[4].status = RunStatus::Survived;
        t.rows[4].t_num = None;
        let text = t.to_csv();
        assert_eq!(text.lines().count(), 6);
        assert!(!text.contains('\r'));
        assert_eq!(SweepTable::from_csv(&text).unwrap(), t);
        let cut = &text[..text.len() - 20];
        match SweepTable::from_csv(cut) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 6),
            other => panic!("expected a parse error, got {other:?}"),
        }
        let bad = text.replacen("blew_up", "exploded", 1);
        match SweepTable::from_csv(&bad) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 2);
                assert!(message.contains("exploded"));
            }
            other => panic!("expected a parse error, got {other:?}"),
        }
    }

    #[test]
    fn spec_validation() {
        use crate::problem::InitialDataSpec;
        let problem = ProblemSpec {
            model: ModelKind::DampedWave,
            n: 1,
            p: 3.0,
            q: 3.0,
            eps: 1.0,
            data: InitialDataSpec::bump(1.0, 0.0, 1.0, 0.0, 2.0),
        };
        let mut s = SweepSpec {
            problem,
            eps_list: vec![],
            ladder: vec![Rung { half_width: 32.0, points: 256 }],
            config: RunConfig::new(10.0),
            jobs: 1,
            output: None,
        };
        assert!(run_sweep(&s).is_err());
        s.eps_list = vec![1.0, 1.0];
        assert!(s.validate().is_err());
        s.eps_list = geometric_eps(1.2, 0.85, 3);
        assert!(s.validate().is_ok());
        s.ladder.push(Rung { half_width: 32.0, points: 128 });
        assert!(s.validate().is_err());
    }
}
