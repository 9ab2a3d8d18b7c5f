//! Run configuration: a single JSON document with defaults for every field.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::cutoff::{ChiProfile, CutoffSchedule, EndTime};
use crate::error::{Error, Result};
use crate::flow::{Method, StepperConfig};
use crate::kernels::norms::NormParams;
use crate::kernels::KappaGrid;
use crate::lattice::{FrequencyVector, TruncationBox};
use crate::potential::AnalyticPotential;

/// `"golden"` or an explicit list of components.
#[derive(Debug, Clone, PartialEq)]
pub enum OmegaSpec {
    Golden,
    Explicit(Vec<f64>),
}

impl Serialize for OmegaSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            OmegaSpec::Golden => s.serialize_str("golden"),
            OmegaSpec::Explicit(v) => v.serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for OmegaSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Str(String),
            List(Vec<f64>),
        }
        match Raw::deserialize(d)? {
            Raw::Str(s) if s == "golden" => Ok(OmegaSpec::Golden),
            Raw::Str(s) => Err(serde::de::Error::custom(format!("omega must be a list or \"golden\", got {s:?}"))),
            Raw::List(v) => Ok(OmegaSpec::Explicit(v)),
        }
    }
}

/// Inline Fourier data, a path to such a document, or the token `"cosine_sum"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PotentialSpec {
    Path(PathBuf),
    Inline(serde_json::Value),
}

impl Default for PotentialSpec {
    fn default() -> Self {
        PotentialSpec::Path(PathBuf::from("cosine_sum"))
    }
}

/// `"auto"` or a fixed value.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Auto {
    #[default]
    Auto,
    Fixed(f64),
}

impl Serialize for Auto {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Auto::Auto => s.serialize_str("auto"),
            Auto::Fixed(x) => s.serialize_f64(*x),
        }
    }
}

impl<'de> Deserialize<'de> for Auto {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(x) => Ok(Auto::Fixed(x)),
            Raw::Str(s) if s == "auto" => Ok(Auto::Auto),
            Raw::Str(s) => Err(serde::de::Error::custom(format!("expected a number or \"auto\", got {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KappaGridSpec {
    pub points: usize,
    /// Half-width of the grid; `auto` is `1/eta(t_end)`.
    #[serde(default)]
    pub range: Auto,
}

impl Default for KappaGridSpec {
    fn default() -> Self {
        KappaGridSpec { points: 9, range: Auto::Auto }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub d: usize,
    pub omega: OmegaSpec,
    pub potential: PotentialSpec,
    pub lambda: f64,
    #[serde(rename = "box_Q_kernel")]
    pub box_q_kernel: usize,
    #[serde(rename = "box_Q_solver")]
    pub box_q_solver: usize,
    pub n_max: usize,
    pub alpha: f64,
    /// Norm decay rate; `auto` is half the fitted analyticity width.
    pub beta: Auto,
    /// Norm weight; `auto` is `1/(2R)`.
    pub rho: Auto,
    pub chi: ChiProfile,
    pub h: f64,
    pub t_end: EndTime,
    /// Per-kappa kernel copies; `null` runs the plain hierarchy only.
    pub kappa_grid: Option<KappaGridSpec>,
    pub method: Method,
    pub lindstedt_order: usize,
    /// Couplings of the residual-slope sweep in `compare`.
    pub lambda_sweep: Vec<f64>,
    /// `verify` passes when every residual is at most `verify_tol * |lambda|`.
    pub verify_tol: f64,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            d: 2,
            omega: OmegaSpec::Golden,
            potential: PotentialSpec::default(),
            lambda: 1e-3,
            box_q_kernel: 2,
            box_q_solver: 8,
            n_max: 3,
            alpha: 0.2,
            beta: Auto::Auto,
            rho: Auto::Auto,
            chi: ChiProfile::Quintic,
            h: 0.05,
            t_end: EndTime::Auto,
            kappa_grid: None,
            method: Method::Rk4,
            lindstedt_order: 8,
            lambda_sweep: vec![1e-4, 2e-4, 5e-4, 1e-3],
            verify_tol: 1e-3,
            seed: 0,
            output_dir: PathBuf::from("out"),
        }
    }
}

/// Everything a command needs, resolved from a [`RunConfig`].
#[derive(Debug, Clone)]
pub struct Resolved {
    pub omega: FrequencyVector,
    pub potential: AnalyticPotential,
    pub kernel_box: TruncationBox,
    pub solver_box: TruncationBox,
    pub schedule: CutoffSchedule,
    pub stepper: StepperConfig,
    /// Numeric end time (auto resolved against the kernel box).
    pub t_end: f64,
    pub kappa_grid: Option<KappaGrid>,
}

impl RunConfig {
    pub fn from_json_str(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.alpha > 0.0 && self.alpha < 0.25) {
            return bad(format!("alpha = {} must lie in (0, 1/4)", self.alpha));
        }
        if self.box_q_kernel > self.box_q_solver {
            return bad(format!("box_Q_kernel = {} exceeds box_Q_solver = {}", self.box_q_kernel, self.box_q_solver));
        }
        if self.n_max < 1 {
            return bad("n_max must be at least 1".into());
        }
        if self.d < 2 {
            return bad("d must be at least 2".into());
        }
        if !self.lambda.is_finite() {
            return bad("lambda must be finite".into());
        }
        if !(self.h > 0.0 && self.h.is_finite()) {
            return bad(format!("h = {} must be positive", self.h));
        }
        if let EndTime::Fixed(t) = self.t_end {
            if !(t >= 0.0 && t.is_finite()) {
                return bad(format!("t_end = {t} must be nonnegative"));
            }
        }
        if let OmegaSpec::Explicit(w) = &self.omega {
            if w.len() != self.d {
                return bad(format!("omega has {} components, d = {}", w.len(), self.d));
            }
        }
        for (name, v) in [("beta", self.beta), ("rho", self.rho)] {
            if let Auto::Fixed(x) = v {
                if !(x > 0.0 && x.is_finite()) {
                    return bad(format!("{name} = {x} must be positive"));
                }
            }
        }
        if !(self.verify_tol >= 0.0) {
            return bad(format!("verify_tol = {} must be nonnegative", self.verify_tol));
        }
        if self.lambda_sweep.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
            return bad("lambda_sweep entries must be positive".into());
        }
        if self.lindstedt_order < 1 {
            return bad("lindstedt_order must be at least 1".into());
        }
        Ok(())
    }

    pub fn frequency(&self) -> Result<FrequencyVector> {
        match &self.omega {
            OmegaSpec::Golden if self.d == 2 => Ok(FrequencyVector::golden()),
            OmegaSpec::Golden => Err(Error::Config("\"golden\" needs d = 2".into())),
            OmegaSpec::Explicit(w) => FrequencyVector::new(w.clone()).map_err(|e| Error::Config(e.to_string())),
        }
    }

    /// Loads the potential; relative paths resolve against `base`.
    pub fn load_potential(&self, base: Option<&Path>) -> Result<AnalyticPotential> {
        let v = match &self.potential {
            PotentialSpec::Path(p) if p.as_os_str() == "cosine_sum" => AnalyticPotential::cosine_sum(self.d),
            PotentialSpec::Path(p) => {
                let full = match base {
                    Some(b) if p.is_relative() => b.join(p),
                    _ => p.clone(),
                };
                AnalyticPotential::from_json_file(&full).map_err(|e| Error::Config(format!("{}: {e}", full.display())))?
            }
            PotentialSpec::Inline(doc) => {
                AnalyticPotential::from_json_str(&doc.to_string()).map_err(|e| Error::Config(format!("potential: {e}")))?
            }
        };
        if v.dim() != self.d {
            return Err(Error::Config(format!("potential has d = {}, config has d = {}", v.dim(), self.d)));
        }
        Ok(v)
    }

    pub fn resolve(&self, base: Option<&Path>) -> Result<Resolved> {
        self.validate()?;
        let omega = self.frequency()?;
        let potential = self.load_potential(base)?;
        let kernel_box = TruncationBox::new(self.d, self.box_q_kernel)?;
        let solver_box = TruncationBox::new(self.d, self.box_q_solver)?;
        let schedule = CutoffSchedule::new(self.alpha)?.with_end(self.t_end);
        let schedule = CutoffSchedule { chi: self.chi, ..schedule };
        let t_end = schedule.resolve_end(&omega, &kernel_box, self.h)?;
        let fit = potential.fit_decay();
        let beta = match self.beta {
            Auto::Fixed(b) => b,
            Auto::Auto => 0.5 * fit.width_b,
        };
        let rho = match self.rho {
            Auto::Fixed(r) => r,
            Auto::Auto => 0.5 / fit.radius_r.max(f64::MIN_POSITIVE),
        };
        let stepper = StepperConfig { method: self.method, h: self.h, norms: Some(NormParams { beta, rho }), ..Default::default() };
        let kappa_grid = match self.kappa_grid {
            None => None,
            Some(spec) => {
                let range = match spec.range {
                    Auto::Fixed(r) => r,
                    Auto::Auto => 1.0 / schedule.eta(t_end),
                };
                Some(KappaGrid::spanning(spec.points, range).map_err(|e| Error::Config(e.to_string()))?)
            }
        };
        Ok(Resolved { omega, potential, kernel_box, solver_box, schedule, stepper, t_end, kappa_grid })
    }
}
