//! Experiment configuration, read from TOML.
//!
//! ```toml
//! [plant]
//! kind = "surrogate"
//! noise_variance = 1.5e-7
//!
//! [task]
//! n = 2048
//!
//! [algorithm]
//! variant = "inverse_model"
//!
//! [run]
//! n_trials = 140
//! n_conv = 40
//! n_iter = 100
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::criterion::{CriterionSpec, PenaltyKind, RegularizerSpec, WeightSpec};
use crate::engine::{
    build_basis, build_reference, closed_loop_setup, inverse_model_gains, BasisLevel, IlcAlgorithm,
    MotionProfile, PlantSetup, RunConfig, SurrogateParams,
};
use crate::error::{Error, Result};
use crate::lti::{feedback_connect, FeedbackLoop, TransferFunction};
use crate::solvers::{norm_optimal_gains, SolverOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub plant: PlantConfig,
    pub task: TaskConfig,
    pub algorithm: AlgorithmConfig,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlantKind {
    Surrogate,
    Coefficients,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantConfig {
    pub kind: PlantKind,
    /// Variance of the white noise behind the trial-varying disturbance.
    pub noise_variance: f64,
    /// The learner's model is `model_gain * J_o`.
    pub model_gain: f64,
    pub surrogate: SurrogateParams,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<CoefficientPlant>,
}

impl Default for PlantConfig {
    fn default() -> Self {
        Self {
            kind: PlantKind::Surrogate,
            noise_variance: 1.5e-7,
            model_gain: 1.0,
            surrogate: SurrogateParams::default(),
            coefficients: None,
        }
    }
}

/// Plant and controller as polynomials in the unit delay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientPlant {
    pub g_num: Vec<f64>,
    pub g_den: Vec<f64>,
    #[serde(default)]
    pub g_delay: i64,
    pub c_num: Vec<f64>,
    pub c_den: Vec<f64>,
    /// Noise filter; the sensitivity when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_num: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_den: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskConfig {
    pub n: usize,
    #[serde(default = "default_rate")]
    pub sample_rate_hz: f64,
    #[serde(default)]
    pub profile: MotionProfile,
}

fn default_rate() -> f64 {
    1000.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// `Q = 1`, `L = alpha J^-1` of the model.
    InverseModel,
    /// Closed-form quadratic-criterion gains with learning gain `alpha`.
    NormOptimal,
    /// Criterion minimized every trial.
    Optimization,
    /// Reference-derivative basis with minimal coefficient l1 norm.
    Basis,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyName {
    Identity,
    Fused,
    SparseFused,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmConfig {
    pub variant: Variant,
    #[serde(default = "one")]
    pub alpha: f64,
    #[serde(default)]
    pub debias: bool,
    /// Scales of `W_e`, `W_f` and `W_df` (each `s I`).
    #[serde(default = "one")]
    pub w_error: f64,
    #[serde(default)]
    pub w_command: f64,
    #[serde(default)]
    pub w_change: f64,
    #[serde(default)]
    pub lambda: f64,
    #[serde(default = "default_penalty")]
    pub penalty: PenaltyName,
    #[serde(default = "one")]
    pub fusion_weight: f64,
    #[serde(default = "default_orders")]
    pub basis_orders: Vec<usize>,
    /// Level of the basis variant relative to the lowest reachable value.
    #[serde(default = "one")]
    pub level_multiplier: f64,
    #[serde(default)]
    pub solver: SolverOptions,
}

fn one() -> f64 {
    1.0
}

fn default_penalty() -> PenaltyName {
    PenaltyName::Identity
}

fn default_orders() -> Vec<usize> {
    vec![1, 2, 3, 4]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub n_trials: usize,
    pub seed: u64,
    pub noise: bool,
    pub n_conv: usize,
    pub n_iter: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        let r = RunConfig::default();
        Self {
            n_trials: r.n_trials,
            seed: r.seed,
            noise: r.noise,
            n_conv: r.n_conv,
            n_iter: r.n_iter,
        }
    }
}

impl From<&RunSection> for RunConfig {
    fn from(r: &RunSection) -> Self {
        RunConfig {
            n_trials: r.n_trials,
            seed: r.seed,
            noise: r.noise,
            n_conv: r.n_conv,
            n_iter: r.n_iter,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub lambdas: Vec<f64>,
    /// Adds `points` log-spaced values from `start` to `stop`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_range: Option<LogRange>,
    /// Multiply every value by the lasso `lambda_max` of the first trial.
    #[serde(default)]
    pub relative: bool,
    /// Fusion weights to combine with every value; the algorithm's own when empty.
    #[serde(default)]
    pub fusion_weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogRange {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl SweepConfig {
    pub fn values(&self) -> Vec<f64> {
        let mut v = self.lambdas.clone();
        if let Some(r) = &self.log_range {
            if r.points == 1 {
                v.push(r.start);
            } else {
                let (a, b) = (r.start.log10(), r.stop.log10());
                v.extend((0..r.points).map(|k| 10f64.powf(a + (b - a) * k as f64 / (r.points - 1) as f64)));
            }
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub plots: bool,
    /// Trials whose signals are written; first and last when empty.
    pub signal_trials: Vec<usize>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            plots: true,
            signal_trials: Vec::new(),
        }
    }
}

fn field<T>(name: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Config(msg) => Error::Config(msg),
        other => Error::Config(format!("{name}: {other}")),
    })
}

fn check(name: &str, ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Config(format!("{name}: {}", msg())))
    }
}

/// Everything needed to execute a configured experiment.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub setup: PlantSetup,
    pub closed_loop: FeedbackLoop,
    pub position: Vec<f64>,
    pub algorithm: IlcAlgorithm,
    pub run: RunConfig,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn sample_period(&self) -> f64 {
        1.0 / self.task.sample_rate_hz
    }

    /// Field-level checks that do not need the plant.
    pub fn validate(&self) -> Result<()> {
        let p = &self.plant;
        check("plant.noise_variance", p.noise_variance.is_finite() && p.noise_variance >= 0.0, || {
            format!("must be non-negative, got {}", p.noise_variance)
        })?;
        check("plant.model_gain", p.model_gain.is_finite() && p.model_gain != 0.0, || {
            format!("must be finite and nonzero, got {}", p.model_gain)
        })?;
        if p.kind == PlantKind::Coefficients {
            let c = p.coefficients.as_ref().ok_or_else(|| {
                Error::Config("plant.coefficients: required when plant.kind = \"coefficients\"".into())
            })?;
            check("plant.coefficients", c.h_num.is_some() == c.h_den.is_some(), || {
                "h_num and h_den must be given together".into()
            })?;
        }
        check("task.n", self.task.n >= 2, || format!("must be at least 2, got {}", self.task.n))?;
        check(
            "task.sample_rate_hz",
            self.task.sample_rate_hz.is_finite() && self.task.sample_rate_hz > 0.0,
            || format!("must be positive, got {}", self.task.sample_rate_hz),
        )?;
        let a = &self.algorithm;
        field("algorithm.alpha", crate::engine::check_alpha(a.alpha))?;
        for (name, v) in [
            ("algorithm.w_error", a.w_error),
            ("algorithm.w_command", a.w_command),
            ("algorithm.w_change", a.w_change),
            ("algorithm.lambda", a.lambda),
            ("algorithm.fusion_weight", a.fusion_weight),
        ] {
            check(name, v.is_finite() && v >= 0.0, || format!("must be finite and non-negative, got {v}"))?;
        }
        check("algorithm.level_multiplier", a.level_multiplier >= 1.0, || {
            format!("must be at least 1, got {}", a.level_multiplier)
        })?;
        field("algorithm.solver", a.solver.validate())?;
        field("run", RunConfig::from(&self.run).validate())?;
        if let Some(s) = &self.sweep {
            let values = s.values();
            check("sweep", !values.is_empty(), || "needs lambdas or log_range".into())?;
            check("sweep.lambdas", values.iter().all(|v| v.is_finite() && *v >= 0.0), || {
                "values must be finite and non-negative".into()
            })?;
            if let Some(r) = &s.log_range {
                check("sweep.log_range", r.start > 0.0 && r.stop > 0.0 && r.points >= 1, || {
                    "needs positive bounds and at least one point".into()
                })?;
            }
            check("sweep.fusion_weights", s.fusion_weights.iter().all(|v| v.is_finite() && *v >= 0.0), || {
                "values must be finite and non-negative".into()
            })?;
        }
        Ok(())
    }

    pub fn closed_loop(&self) -> Result<FeedbackLoop> {
        let ts = self.sample_period();
        match self.plant.kind {
            PlantKind::Surrogate => Ok(field("plant.surrogate", self.plant.surrogate.build(ts))?.closed),
            PlantKind::Coefficients => {
                let c = self.plant.coefficients.as_ref().expect("validated");
                let g = field(
                    "plant.coefficients.g",
                    TransferFunction::with_delay(c.g_num.clone(), c.g_den.clone(), c.g_delay, ts),
                )?;
                let k = field(
                    "plant.coefficients.c",
                    TransferFunction::new(c.c_num.clone(), c.c_den.clone(), ts),
                )?;
                let closed = field("plant.coefficients", feedback_connect(&g, &k))?;
                check("plant.coefficients", closed.closed_loop_stable, || {
                    "closed loop is unstable".into()
                })?;
                Ok(closed)
            }
        }
    }

    fn noise_filter(&self) -> Result<Option<TransferFunction>> {
        match (&self.plant.kind, &self.plant.coefficients) {
            (PlantKind::Coefficients, Some(c)) => match (&c.h_num, &c.h_den) {
                (Some(num), Some(den)) => Ok(Some(field(
                    "plant.coefficients.h",
                    TransferFunction::new(num.clone(), den.clone(), self.sample_period()),
                )?)),
                _ => Ok(None),
            },
            _ => Ok(None),
        }
    }

    pub fn setup(&self) -> Result<(PlantSetup, FeedbackLoop, Vec<f64>)> {
        let closed = self.closed_loop()?;
        let position = field(
            "task.profile",
            build_reference(&self.task.profile, self.task.n, self.sample_period()),
        )?;
        let setup = field(
            "plant",
            closed_loop_setup(
                &closed,
                &position,
                self.noise_filter()?,
                self.plant.noise_variance,
                self.plant.model_gain,
            ),
        )?;
        Ok((setup, closed, position))
    }

    pub fn criterion(&self, n: usize) -> Result<CriterionSpec> {
        let a = &self.algorithm;
        let kind = match a.penalty {
            PenaltyName::Identity => PenaltyKind::Identity,
            PenaltyName::Fused => PenaltyKind::Fused,
            PenaltyName::SparseFused => PenaltyKind::SparseFused {
                fusion_weight: a.fusion_weight,
            },
        };
        field(
            "algorithm",
            CriterionSpec::new(
                n,
                scalar_weight(a.w_error),
                scalar_weight(a.w_command),
                scalar_weight(a.w_change),
                RegularizerSpec::new(a.lambda, kind),
            ),
        )
    }

    pub fn algorithm(&self, setup: &PlantSetup, position: &[f64]) -> Result<IlcAlgorithm> {
        let a = &self.algorithm;
        let n = setup.len();
        Ok(match a.variant {
            Variant::InverseModel => IlcAlgorithm::Explicit {
                gains: field("algorithm", inverse_model_gains(&setup.model, n))?,
                alpha: a.alpha,
            },
            Variant::NormOptimal => IlcAlgorithm::Explicit {
                gains: field(
                    "algorithm",
                    norm_optimal_gains(
                        setup.model_lifted(),
                        &scalar_weight(a.w_error),
                        &scalar_weight(a.w_command),
                        &scalar_weight(a.w_change),
                    ),
                )?,
                alpha: a.alpha,
            },
            Variant::Optimization => IlcAlgorithm::Optimization {
                spec: self.criterion(n)?,
                debias: a.debias,
                options: a.solver.clone(),
            },
            Variant::Basis => {
                let basis = field(
                    "algorithm.basis_orders",
                    build_basis(position, &a.basis_orders, self.sample_period()),
                )?;
                IlcAlgorithm::Basis {
                    psi: basis.psi,
                    w_error: scalar_weight(a.w_error),
                    w_command: scalar_weight(a.w_command),
                    w_change: scalar_weight(a.w_change),
                    level: BasisLevel::RelativeToMinimum(a.level_multiplier),
                    options: a.solver.clone(),
                }
            }
        })
    }

    /// Plant, algorithm and run settings, with config-level errors.
    pub fn build(&self) -> Result<Experiment> {
        self.validate()?;
        let (setup, closed_loop, position) = self.setup()?;
        let algorithm = self.algorithm(&setup, &position)?;
        field("algorithm", algorithm.validate(setup.len()))?;
        Ok(Experiment {
            setup,
            closed_loop,
            position,
            algorithm,
            run: RunConfig::from(&self.run),
        })
    }
}

fn scalar_weight(s: f64) -> WeightSpec {
    if s == 0.0 {
        WeightSpec::Zero
    } else {
        WeightSpec::ScaledIdentity(s)
    }
}
