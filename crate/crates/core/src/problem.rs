//! Problem definitions: model kind, exponents, amplitude and initial-data
//! recipes, together with the hypothesis checks of the blow-up and
//! lower-bound theorems.

use serde::{Deserialize, Serialize};

use crate::criticality::{classify, CriticalityReport, Regime, DEFAULT_TOLERANCE};
use crate::error::{Error, Result};
use crate::grid::{GridSpec, Spectral};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// `u_tt − Δu + u_t = |v|^p`, `v_tt − Δv + v_t = |u|^q`
    DampedWave,
    /// `u_t − Δu = |v|^p`, `v_t − Δv = |u|^q`
    ReactionDiffusion,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::DampedWave => "damped_wave",
            ModelKind::ReactionDiffusion => "reaction_diffusion",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "damped_wave" => Some(ModelKind::DampedWave),
            "reaction_diffusion" => Some(ModelKind::ReactionDiffusion),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataShape {
    /// `a·exp(−|x|²/s²)`
    Gaussian,
    /// `a·exp(1 − 1/(1 − |x/r|²))` inside `|x| < r`, zero outside
    SmoothBump,
    /// Spatially homogeneous data; the torus is then the actual domain.
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialDataSpec {
    pub shape: DataShape,
    #[serde(default)]
    pub a_u0: f64,
    #[serde(default)]
    pub a_u1: f64,
    #[serde(default)]
    pub a_v0: f64,
    #[serde(default)]
    pub a_v1: f64,
    /// Gaussian width `s`.
    #[serde(default = "default_width")]
    pub width: f64,
    /// Bump support radius; for Gaussians, the radius treated as the
    /// effective support.
    #[serde(default = "default_radius")]
    pub radius: f64,
}

fn default_width() -> f64 {
    2.0
}

fn default_radius() -> f64 {
    2.0
}

impl InitialDataSpec {
    pub fn bump(a_u0: f64, a_u1: f64, a_v0: f64, a_v1: f64, radius: f64) -> Self {
        InitialDataSpec {
            shape: DataShape::SmoothBump,
            a_u0,
            a_u1,
            a_v0,
            a_v1,
            width: default_width(),
            radius,
        }
    }

    pub fn gaussian(a_u0: f64, a_u1: f64, a_v0: f64, a_v1: f64, width: f64) -> Self {
        InitialDataSpec {
            shape: DataShape::Gaussian,
            a_u0,
            a_u1,
            a_v0,
            a_v1,
            width,
            radius: 4.0 * width,
        }
    }

    pub fn constant(a_u0: f64, a_u1: f64, a_v0: f64, a_v1: f64) -> Self {
        InitialDataSpec {
            shape: DataShape::Constant,
            a_u0,
            a_u1,
            a_v0,
            a_v1,
            width: default_width(),
            radius: default_radius(),
        }
    }

    pub fn is_trivial(&self) -> bool {
        self.a_u0 == 0.0 && self.a_u1 == 0.0 && self.a_v0 == 0.0 && self.a_v1 == 0.0
    }

    /// Unit-amplitude profile at distance `r` from the origin.
    pub fn profile(&self, r: f64) -> f64 {
        match self.shape {
            DataShape::Gaussian => (-(r * r) / (self.width * self.width)).exp(),
            DataShape::SmoothBump => bump(r / self.radius),
            DataShape::Constant => 1.0,
        }
    }
}

/// `exp(1 − 1/(1 − y²))` for `|y| < 1`, zero otherwise; equals 1 at the origin.
pub fn bump(y: f64) -> f64 {
    let y2 = y * y;
    if y2 >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - y2)).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub model: ModelKind,
    pub n: usize,
    pub p: f64,
    pub q: f64,
    pub eps: f64,
    pub data: InitialDataSpec,
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n != 1 && self.n != 2 {
            return Err(Error::Config(format!("dimension must be 1 or 2, got {}", self.n)));
        }
        if !(self.p > 1.0) || !(self.q > 1.0) {
            return Err(Error::Exponent(format!(
                "exponents must exceed 1, got p = {}, q = {}",
                self.p, self.q
            )));
        }
        if !(self.eps > 0.0) || !self.eps.is_finite() {
            return Err(Error::Config(format!("eps must be positive, got {}", self.eps)));
        }
        let d = &self.data;
        if !(d.width > 0.0) {
            return Err(Error::InitialData(format!("width must be positive, got {}", d.width)));
        }
        if !(d.radius > 0.0) {
            return Err(Error::InitialData(format!("radius must be positive, got {}", d.radius)));
        }
        Ok(())
    }

    pub fn with_eps(&self, eps: f64) -> Self {
        ProblemSpec { eps, ..*self }
    }
}

/// Unscaled data profiles `(u0, u1, v0, v1)` sampled on a grid; the
/// evolution starts from `ε` times these.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialData {
    pub u0: Vec<f64>,
    pub u1: Vec<f64>,
    pub v0: Vec<f64>,
    pub v1: Vec<f64>,
    /// `∫(u0 + u1)` (or `∫u0` for the heat model).
    pub mass_u: f64,
    /// `∫(v0 + v1)` (or `∫v0` for the heat model).
    pub mass_v: f64,
    /// Support radius of `(u0, u1)`; `None` for homogeneous data.
    pub r0: Option<f64>,
    /// Support radius of `(v0, v1)`.
    pub r1: Option<f64>,
    /// `L¹` mass of `|u0|+|u1|+|v0|+|v1|` outside the recorded radii
    /// (nonzero only for Gaussians).
    pub tail_mass: f64,
}

pub fn build_initial_data(spec: &ProblemSpec, grid: &GridSpec) -> Result<InitialData> {
    spec.validate()?;
    if spec.n != grid.n {
        return Err(Error::Config(format!(
            "problem dimension {} does not match grid dimension {}",
            spec.n, grid.n
        )));
    }
    let d = &spec.data;
    if d.shape == DataShape::SmoothBump && d.radius >= grid.half_width / 2.0 {
        return Err(Error::InitialData(format!(
            "bump radius {} must be below L/2 = {}",
            d.radius,
            grid.half_width / 2.0
        )));
    }
    let radii = grid.radii();
    let base: Vec<f64> = radii.iter().map(|&r| d.profile(r)).collect();
    let scaled = |a: f64| -> Vec<f64> { base.iter().map(|b| a * b).collect() };
    let (u0, v0) = (scaled(d.a_u0), scaled(d.a_v0));
    let (u1, v1) = match spec.model {
        ModelKind::DampedWave => (scaled(d.a_u1), scaled(d.a_v1)),
        ModelKind::ReactionDiffusion => (vec![0.0; grid.len()], vec![0.0; grid.len()]),
    };
    let mass_u = grid.integrate(&u0) + grid.integrate(&u1);
    let mass_v = grid.integrate(&v0) + grid.integrate(&v1);

    let support = |a: f64, b: f64| -> Option<f64> {
        if d.shape == DataShape::Constant {
            None
        } else if a == 0.0 && b == 0.0 {
            Some(0.0)
        } else {
            Some(d.radius)
        }
    };
    let r0 = support(d.a_u0, d.a_u1);
    let r1 = support(d.a_v0, d.a_v1);
    let tail_mass = if d.shape == DataShape::Gaussian {
        let outside: Vec<f64> = radii
            .iter()
            .enumerate()
            .map(|(j, &r)| {
                if r > d.radius {
                    u0[j].abs() + u1[j].abs() + v0[j].abs() + v1[j].abs()
                } else {
                    0.0
                }
            })
            .collect();
        grid.integrate(&outside)
    } else {
        0.0
    };
    Ok(InitialData { u0, u1, v0, v1, mass_u, mass_v, r0, r1, tail_mass })
}

/// The norm `J = ‖u0‖_{H¹} + ‖u0‖_{L¹} + ‖u1‖_{L²} + ‖u1‖_{L¹} + (same for v)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DataNorms {
    pub j: f64,
}

pub fn data_norms(data: &InitialData, spectral: &Spectral) -> DataNorms {
    let grid = spectral.grid();
    let l1 = |f: &[f64]| grid.integrate(&f.iter().map(|x| x.abs()).collect::<Vec<_>>());
    let h1 = |f: &[f64]| {
        let fh = spectral.forward(f);
        (spectral.l2_norm(&fh).powi(2) + spectral.grad_l2_norm(&fh).powi(2)).sqrt()
    };
    let l2 = |f: &[f64]| spectral.l2_norm(&spectral.forward(f));
    let j = h1(&data.u0) + l1(&data.u0) + l2(&data.u1) + l1(&data.u1)
        + h1(&data.v0) + l1(&data.v0) + l2(&data.v1) + l1(&data.v1);
    DataNorms { j }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub criticality: CriticalityReport,
    /// Both mass integrals `I₀[u0,u1]`, `I₀[v0,v1]` positive.
    pub positive_masses: bool,
    pub trivial_data: bool,
    /// Data compactly supported (bump); Gaussians are only effectively supported.
    pub compact_support: bool,
    /// `p, q ≥ 2` as required by the lower-bound theorem for `n = 1, 2`.
    pub lower_bound_exponents: bool,
    pub upper_bound_theorem: bool,
    pub lower_bound_theorem: bool,
    pub notes: Vec<String>,
}

/// Report which hypotheses of the upper- and lower-bound theorems hold.
/// Signs of the mass integrals follow from the amplitudes because every
/// profile has positive integral.
pub fn check_hypotheses(spec: &ProblemSpec) -> Result<HypothesisReport> {
    let criticality = classify(spec.p, spec.q, spec.n, DEFAULT_TOLERANCE)?;
    let d = &spec.data;
    let (iu, iv) = match spec.model {
        ModelKind::DampedWave => (d.a_u0 + d.a_u1, d.a_v0 + d.a_v1),
        ModelKind::ReactionDiffusion => (d.a_u0, d.a_v0),
    };
    let positive_masses = iu > 0.0 && iv > 0.0;
    let trivial_data = d.is_trivial();
    let compact_support = d.shape == DataShape::SmoothBump;
    let lower_bound_exponents = spec.p >= 2.0 && spec.q >= 2.0;
    let critical = criticality.regime == Regime::Critical;
    let mut notes = Vec::new();
    if trivial_data {
        notes.push("trivial data: all amplitudes vanish".to_string());
    }
    if iu <= 0.0 {
        notes.push(format!("I0[u0,u1] is not positive (amplitude sum {iu})"));
    }
    if iv <= 0.0 {
        notes.push(format!("I0[v0,v1] is not positive (amplitude sum {iv})"));
    }
    match d.shape {
        DataShape::Gaussian => notes.push(format!(
            "gaussian data are only effectively supported in |x| <= {}",
            d.radius
        )),
        DataShape::Constant => {
            notes.push("homogeneous data: not integrable on R^n, torus problem only".to_string())
        }
        DataShape::SmoothBump => {}
    }
    if !lower_bound_exponents {
        notes.push(format!(
            "lower-bound theorem needs p, q >= 2 (p = {}, q = {})",
            spec.p, spec.q
        ));
    }
    if !critical {
        notes.push(format!("not on the critical curve: {}", criticality.regime.as_str()));
    }
    let upper_bound_theorem =
        critical && positive_masses && d.shape != DataShape::Constant && !trivial_data;
    let lower_bound_theorem =
        critical && lower_bound_exponents && d.shape != DataShape::Constant && !trivial_data;
    Ok(HypothesisReport {
        criticality,
        positive_masses,
        trivial_data,
        compact_support,
        lower_bound_exponents,
        upper_bound_theorem,
        lower_bound_theorem,
        notes,
    })
}

/// Pointwise `|w|^exponent`, with `0 ↦ 0`.
pub fn evaluate_nonlinearity(field: &[f64], exponent: f64) -> Vec<f64> {
    let mut out = field.to_vec();
    apply_power(&mut out, exponent);
    out
}

pub(crate) fn apply_power(values: &mut [f64], exponent: f64) {
    let integer = exponent.fract() == 0.0 && exponent <= 64.0;
    for w in values.iter_mut() {
        let a = w.abs();
        *w = if a == 0.0 {
            0.0
        } else if integer {
            a.powi(exponent as i32)
        } else {
            a.powf(exponent)
        };
    }
}
