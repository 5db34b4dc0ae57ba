//! Position of `(p, q, n)` relative to the critical curve
//! `α_max(p,q) = n/2`, and the lifespan law predicted in each regime.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    SupercriticalGlobal,
    Critical,
    SubcriticalBlowup,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::SupercriticalGlobal => "supercritical_global",
            Regime::Critical => "critical",
            Regime::SubcriticalBlowup => "subcritical_blowup",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalityReport {
    pub p: f64,
    pub q: f64,
    pub n: usize,
    pub alpha_max: f64,
    pub fujita: f64,
    pub regime: Regime,
    pub tolerance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LawForm {
    /// `T ~ C ε^{−κ}`
    Power,
    /// `T ~ exp(C ε^{−κ})`
    ExpPower,
    /// Reserved for logarithmic corrections; never produced.
    ExpLog,
}

impl LawForm {
    pub fn as_str(&self) -> &'static str {
        match self {
            LawForm::Power => "power",
            LawForm::ExpPower => "exp_power",
            LawForm::ExpLog => "exp_log",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifespanLaw {
    pub form: LawForm,
    pub kappa: f64,
    pub description: String,
    /// Outside the range where matching lower bounds are proved
    /// (`n ∈ {1,2}`, `p, q ≥ 2`).
    pub conjectural: bool,
}

/// Fujita exponent `1 + 2/n`.
pub fn fujita(n: usize) -> f64 {
    1.0 + 2.0 / n as f64
}

fn check_exponents(p: f64, q: f64) -> Result<()> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::Exponent(format!("p must exceed 1, got {p}")));
    }
    if !(q > 1.0) || !q.is_finite() {
        return Err(Error::Exponent(format!("q must exceed 1, got {q}")));
    }
    Ok(())
}

/// `(max{p,q} + 1)/(pq − 1)`.
pub fn alpha_max(p: f64, q: f64) -> Result<f64> {
    check_exponents(p, q)?;
    Ok((p.max(q) + 1.0) / (p * q - 1.0))
}

pub fn classify(p: f64, q: f64, n: usize, tolerance: f64) -> Result<CriticalityReport> {
    let alpha = alpha_max(p, q)?;
    if n == 0 {
        return Err(Error::Exponent("dimension must be positive".into()));
    }
    if !(0.0..=1e-6).contains(&tolerance) {
        return Err(Error::Exponent(format!(
            "curve tolerance must lie in [0, 1e-6], got {tolerance}"
        )));
    }
    let half_n = n as f64 / 2.0;
    let regime = if (alpha - half_n).abs() <= tolerance {
        Regime::Critical
    } else if alpha < half_n {
        Regime::SupercriticalGlobal
    } else {
        Regime::SubcriticalBlowup
    };
    Ok(CriticalityReport {
        p,
        q,
        n,
        alpha_max: alpha,
        fujita: fujita(n),
        regime,
        tolerance,
    })
}

/// Both expressions of the critical non-symmetric exponent:
/// `pq − p_Fuj(n)` and `max{p(pq−1)/(p+1), q(pq−1)/(q+1)}`.
pub fn critical_exponent_pair(p: f64, q: f64, n: usize) -> (f64, f64) {
    let pq1 = p * q - 1.0;
    let direct = p * q - fujita(n);
    let via_max = (p * pq1 / (p + 1.0)).max(q * pq1 / (q + 1.0));
    (direct, via_max)
}

pub fn predicted_law(p: f64, q: f64, n: usize) -> Result<LifespanLaw> {
    predicted_law_with_tolerance(p, q, n, DEFAULT_TOLERANCE)
}

pub fn predicted_law_with_tolerance(
    p: f64,
    q: f64,
    n: usize,
    tolerance: f64,
) -> Result<LifespanLaw> {
    let report = classify(p, q, n, tolerance)?;
    let conjectural = !(n <= 2 && p >= 2.0 && q >= 2.0);
    match report.regime {
        Regime::SupercriticalGlobal => Err(Error::NoBlowUpLaw(format!(
            "(p, q, n) = ({p}, {q}, {n}) lies in the global-existence region"
        ))),
        Regime::Critical if p == q => Ok(LifespanLaw {
            form: LawForm::ExpPower,
            kappa: p - 1.0,
            description: format!("T ~ exp(C eps^-{})", p - 1.0),
            conjectural,
        }),
        Regime::Critical => {
            let (direct, via_max) = critical_exponent_pair(p, q, n);
            // off-curve pairs admitted by the tolerance shift the two forms by O(tol)
            let allowed = 1e-12 * direct.abs().max(1.0) + 1e3 * tolerance * direct.abs().max(1.0);
            if (direct - via_max).abs() > allowed {
                return Err(Error::Exponent(format!(
                    "critical exponents disagree: pq - p_Fuj = {direct}, max form = {via_max}"
                )));
            }
            Ok(LifespanLaw {
                form: LawForm::ExpPower,
                kappa: direct,
                description: format!("T ~ exp(C eps^-{direct})"),
                conjectural,
            })
        }
        Regime::SubcriticalBlowup => {
            let kappa = 1.0 / (report.alpha_max - n as f64 / 2.0);
            Ok(LifespanLaw {
                form: LawForm::Power,
                kappa,
                description: format!("T ~ C eps^-{kappa}"),
                conjectural,
            })
        }
    }
}

/// Lifespan law of the single equation `w_tt − Δw + w_t = |w|^p`.
pub fn single_equation_law(p: f64, n: usize) -> Result<LifespanLaw> {
    check_exponents(p, p)?;
    let pf = fujita(n);
    if (p - pf).abs() <= DEFAULT_TOLERANCE {
        return Ok(LifespanLaw {
            form: LawForm::ExpPower,
            kappa: p - 1.0,
            description: format!("T ~ exp(C eps^-{})", p - 1.0),
            conjectural: false,
        });
    }
    if p > pf {
        return Err(Error::NoBlowUpLaw(format!(
            "p = {p} exceeds the Fujita exponent {pf}: global regime"
        )));
    }
    let kappa = 2.0 * (p - 1.0) / (2.0 - n as f64 * (p - 1.0));
    Ok(LifespanLaw {
        form: LawForm::Power,
        kappa,
        description: format!("T ~ C eps^-{kappa}"),
        conjectural: false,
    })
}
