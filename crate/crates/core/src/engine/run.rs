use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::plant::PlantSetup;
use crate::criterion::{CriterionSpec, PenaltyKind, WeightSpec};
use crate::error::{check_finite, check_len, Error, Result};
use crate::lti::{lift_noncausal, TransferFunction};
use crate::solvers::{stack_blocks, ConstrainedSolver, ExplicitGains, SolverOptions, UpdateSolver};

/// Independent noise stream for trial `trial` under `seed`.
pub fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

/// How the basis variant sets its quadratic level `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BasisLevel {
    Fixed(f64),
    /// A multiple (at least one) of the lowest level reachable with the basis.
    RelativeToMinimum(f64),
}

#[derive(Debug, Clone)]
pub enum IlcAlgorithm {
    /// `f_{j+1} = Q (f_j + alpha L e_j)`.
    Explicit { gains: ExplicitGains, alpha: f64 },
    /// Minimizes the criterion every trial, optionally followed by re-estimation.
    Optimization {
        spec: CriterionSpec,
        debias: bool,
        options: SolverOptions,
    },
    /// `f = Psi theta` with minimal `|theta|_1` under a quadratic level.
    Basis {
        psi: DMatrix<f64>,
        w_error: WeightSpec,
        w_command: WeightSpec,
        w_change: WeightSpec,
        level: BasisLevel,
        options: SolverOptions,
    },
}

impl IlcAlgorithm {
    pub fn validate(&self, n: usize) -> Result<()> {
        match self {
            IlcAlgorithm::Explicit { gains, alpha } => {
                check_len("explicit gains", n, gains.size())?;
                check_alpha(*alpha)
            }
            IlcAlgorithm::Optimization { spec, options, .. } => {
                check_len("criterion", n, spec.len())?;
                options.validate()
            }
            IlcAlgorithm::Basis {
                psi,
                w_error,
                w_command,
                w_change,
                level,
                options,
            } => {
                check_len("basis rows", n, psi.nrows())?;
                if psi.ncols() == 0 {
                    return Err(Error::InvalidParameter("basis needs at least one column".into()));
                }
                w_error.validate(n)?;
                w_command.validate(n)?;
                w_change.validate(n)?;
                match level {
                    BasisLevel::Fixed(t) if !(*t >= 0.0) => {
                        return Err(Error::InvalidParameter(format!("level must be non-negative, got {t}")))
                    }
                    BasisLevel::RelativeToMinimum(m) if !(m.is_finite() && *m >= 1.0) => {
                        return Err(Error::InvalidParameter(format!("level multiplier must be >= 1, got {m}")))
                    }
                    _ => {}
                }
                options.validate()
            }
        }
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("learning gain must lie in (0, 1], got {alpha}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub n_trials: usize,
    pub seed: u64,
    pub noise: bool,
    /// Trials discarded before averaging the limit error.
    pub n_conv: usize,
    /// Trials averaged for the limit error; 0 disables averaging.
    pub n_iter: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n_trials: 40,
            seed: 0,
            noise: true,
            n_conv: 0,
            n_iter: 0,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trials == 0 {
            return Err(Error::InvalidParameter("n_trials must be at least 1".into()));
        }
        if self.n_iter > 0 && self.n_conv + self.n_iter > self.n_trials {
            return Err(Error::InvalidParameter(format!(
                "averaging window {}..{} exceeds {} trials",
                self.n_conv,
                self.n_conv + self.n_iter,
                self.n_trials
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: usize,
    pub f: Vec<f64>,
    pub e: Vec<f64>,
    pub e_norm2: f64,
    /// Exact nonzeros of `f`.
    pub f_card: usize,
    /// Exact nonzeros of the first differences of `f`.
    pub df_card: usize,
    /// Criterion value at the no-update candidate `f = f_j`.
    pub objective: f64,
    /// Whether the update computed from this trial was certified.
    pub converged: bool,
    pub wall_ms: f64,
    /// Basis coefficients, for the basis variant.
    pub theta: Option<Vec<f64>>,
    pub diagnostics: Vec<String>,
}

/// One execution: `e_j = r - J_o f_j - H n_j` with `n_j ~ N(0, lambda_e)`.
pub fn run_trial<R: Rng + ?Sized>(plant: &PlantSetup, f_j: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    run_trial_with(plant, f_j, rng, true)
}

fn run_trial_with<R: Rng + ?Sized>(plant: &PlantSetup, f_j: &[f64], rng: &mut R, noise: bool) -> Result<Vec<f64>> {
    let n = plant.len();
    check_len("command signal", n, f_j.len())?;
    let y = plant.true_system.simulate(f_j)?;
    let mut e: Vec<f64> = plant.reference.iter().zip(&y).map(|(r, y)| r - y).collect();
    if noise && plant.noise_variance > 0.0 {
        let sd = plant.noise_variance.sqrt();
        let white: Vec<f64> = (0..n).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect();
        let v = plant.noise_filter.simulate(&white)?;
        e.iter_mut().zip(&v).for_each(|(e, v)| *e -= v);
    }
    check_finite(&e, "trial error")?;
    Ok(e)
}

/// `f_{j+1} = Q (f_j + alpha L e_j)`.
pub fn explicit_update(gains: &ExplicitGains, f_j: &[f64], e_j: &[f64], alpha: f64) -> Result<Vec<f64>> {
    let n = gains.size();
    check_len("command signal", n, f_j.len())?;
    check_len("error signal", n, e_j.len())?;
    check_alpha(alpha)?;
    let step = DVector::from_column_slice(f_j) + &gains.l * DVector::from_column_slice(e_j) * alpha;
    Ok((&gains.q * step).as_slice().to_vec())
}

/// `L = J^-1` lifted with full preview, `Q = I`.
pub fn inverse_model_gains(model: &TransferFunction, n: usize) -> Result<ExplicitGains> {
    let l = lift_noncausal(&model.inverse()?, n)?;
    ExplicitGains::new(l.into_matrix(), DMatrix::identity(n, n))
}

fn count_nonzero(x: &[f64]) -> usize {
    x.iter().filter(|v| **v != 0.0).count()
}

fn count_jumps(x: &[f64]) -> usize {
    x.windows(2).filter(|w| w[1] - w[0] != 0.0).count()
}

/// Per-run state of the update law.
enum Learner {
    Explicit {
        gains: ExplicitGains,
        alpha: f64,
    },
    Optimization {
        solver: Box<UpdateSolver>,
        debias: bool,
    },
    Basis {
        psi: DMatrix<f64>,
        /// `J Psi`.
        jpsi: DMatrix<f64>,
        blocks: BasisBlocks,
        level: BasisLevel,
        solver: Box<ConstrainedSolver>,
        theta: DVector<f64>,
    },
}

struct BasisBlocks {
    we: Option<DMatrix<f64>>,
    wf: Option<DMatrix<f64>>,
    wdf: Option<DMatrix<f64>>,
}

struct Step {
    f: Vec<f64>,
    converged: bool,
    diagnostics: Vec<String>,
}

impl Learner {
    fn new(plant: &PlantSetup, algorithm: &IlcAlgorithm) -> Result<Self> {
        let n = plant.len();
        algorithm.validate(n)?;
        Ok(match algorithm {
            IlcAlgorithm::Explicit { gains, alpha } => Learner::Explicit {
                gains: gains.clone(),
                alpha: *alpha,
            },
            IlcAlgorithm::Optimization { spec, debias, options } => Learner::Optimization {
                solver: Box::new(UpdateSolver::new(spec, plant.model_lifted(), options)?),
                debias: *debias,
            },
            IlcAlgorithm::Basis {
                psi,
                w_error,
                w_command,
                w_change,
                level,
                options,
            } => {
                let dense = |w: &WeightSpec| (!w.is_zero()).then(|| w.matrix(n));
                let blocks = BasisBlocks {
                    we: dense(w_error),
                    wf: dense(w_command),
                    wdf: dense(w_change),
                };
                let mut a_blocks = Vec::new();
                let jpsi = plant.model_lifted().matrix() * psi;
                for (w, base) in [(&blocks.we, &jpsi), (&blocks.wf, psi), (&blocks.wdf, psi)] {
                    if let Some(w) = w {
                        let a = w * base;
                        let rows = a.nrows();
                        a_blocks.push((a, DVector::zeros(rows)));
                    }
                }
                if a_blocks.is_empty() {
                    return Err(Error::InvalidParameter("basis criterion has no nonzero weight".into()));
                }
                let (a, _) = stack_blocks(&a_blocks)?;
                Learner::Basis {
                    psi: psi.clone(),
                    solver: Box::new(ConstrainedSolver::new(a, &PenaltyKind::Identity, options)?),
                    jpsi,
                    blocks,
                    level: *level,
                    theta: DVector::zeros(psi.ncols()),
                }
            }
        })
    }

    /// Criterion value at `f = f_j`.
    fn objective(&self, e: &[f64], f: &[f64]) -> Result<f64> {
        Ok(match self {
            Learner::Explicit { .. } => 0.5 * e.iter().map(|v| v * v).sum::<f64>(),
            Learner::Optimization { solver, .. } => {
                let spec = solver.spec();
                let ev = DVector::from_column_slice(e);
                let fv = DVector::from_column_slice(f);
                0.5 * spec.w_error.apply(&ev).norm_squared()
                    + 0.5 * spec.w_command.apply(&fv).norm_squared()
                    + spec.penalty_value(f)
            }
            Learner::Basis { blocks, theta, .. } => {
                let ev = DVector::from_column_slice(e);
                let fv = DVector::from_column_slice(f);
                let we = blocks.we.as_ref().map_or(0.0, |w| (w * ev).norm_squared());
                let wf = blocks.wf.as_ref().map_or(0.0, |w| (w * fv).norm_squared());
                0.5 * (we + wf) + theta.lp_norm(1)
            }
        })
    }

    fn theta(&self) -> Option<Vec<f64>> {
        match self {
            Learner::Basis { theta, .. } => Some(theta.as_slice().to_vec()),
            _ => None,
        }
    }

    fn update(&mut self, e: &[f64], f: &[f64]) -> Result<Step> {
        match self {
            Learner::Explicit { gains, alpha } => Ok(Step {
                f: explicit_update(gains, f, e, *alpha)?,
                converged: true,
                diagnostics: Vec::new(),
            }),
            Learner::Optimization { solver, debias } => {
                let mut sol = solver.solve(e, f)?;
                if *debias {
                    sol = solver.debias(&sol, e, f)?;
                }
                Ok(Step {
                    f: sol.f,
                    converged: sol.converged,
                    diagnostics: sol.diagnostics,
                })
            }
            Learner::Basis {
                psi,
                jpsi,
                blocks,
                level,
                solver,
                theta,
            } => {
                let ev = DVector::from_column_slice(e);
                let f_prev = &*psi * &*theta;
                let mut b_parts = Vec::new();
                if let Some(w) = &blocks.we {
                    // predicted error e_j - J Psi (theta - theta_j)
                    b_parts.push(w * (ev + &*jpsi * &*theta));
                }
                if let Some(w) = &blocks.wf {
                    b_parts.push(DVector::zeros(w.nrows()));
                }
                if let Some(w) = &blocks.wdf {
                    b_parts.push(w * &f_prev);
                }
                let rows: usize = b_parts.iter().map(|b| b.len()).sum();
                let mut b = DVector::zeros(rows);
                let mut at = 0;
                for part in b_parts {
                    b.rows_mut(at, part.len()).copy_from(&part);
                    at += part.len();
                }
                let t = match level {
                    BasisLevel::Fixed(t) => *t,
                    BasisLevel::RelativeToMinimum(m) => *m * solver.minimum_level(&b)?,
                };
                let sol = solver.solve(&b, t)?;
                *theta = DVector::from_column_slice(&sol.f);
                Ok(Step {
                    f: (&*psi * &*theta).as_slice().to_vec(),
                    converged: sol.converged,
                    diagnostics: sol.diagnostics,
                })
            }
        }
    }
}

/// Runs the trial loop from `f_0 = 0`.
pub fn run_ilc(plant: &PlantSetup, algorithm: &IlcAlgorithm, run: &RunConfig) -> Result<Vec<TrialRecord>> {
    run.validate()?;
    let n = plant.len();
    let mut learner = Learner::new(plant, algorithm)?;
    let mut f = vec![0.0; n];
    let mut records = Vec::with_capacity(run.n_trials);
    for j in 0..run.n_trials {
        let start = Instant::now();
        let mut rng = trial_rng(run.seed, j);
        let e = run_trial_with(plant, &f, &mut rng, run.noise)?;
        let objective = learner.objective(&e, &f)?;
        let theta = learner.theta();
        let step = if j + 1 < run.n_trials {
            Some(learner.update(&e, &f)?)
        } else {
            None
        };
        let (converged, diagnostics) = step
            .as_ref()
            .map_or((true, Vec::new()), |s| (s.converged, s.diagnostics.clone()));
        let e_norm2 = e.iter().map(|v| v * v).sum::<f64>().sqrt();
        records.push(TrialRecord {
            trial: j,
            f_card: count_nonzero(&f),
            df_card: count_jumps(&f),
            f: std::mem::take(&mut f),
            e,
            e_norm2,
            objective,
            converged,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
            theta,
            diagnostics,
        });
        if let Some(step) = step {
            f = step.f;
        }
    }
    Ok(records)
}

/// Mean of `e_j` over trials `n_conv .. n_conv + n_iter`.
pub fn estimate_e_inf(records: &[TrialRecord], n_conv: usize, n_iter: usize) -> Result<Vec<f64>> {
    let errors: Vec<&[f64]> = records.iter().map(|r| r.e.as_slice()).collect();
    average_window(&errors, n_conv, n_iter)
}

/// Elementwise mean of `signals[n_conv .. n_conv + n_iter]`.
pub fn average_window<S: AsRef<[f64]>>(signals: &[S], n_conv: usize, n_iter: usize) -> Result<Vec<f64>> {
    if n_iter == 0 {
        return Err(Error::InvalidParameter("averaging window must contain at least one trial".into()));
    }
    if n_conv + n_iter > signals.len() {
        return Err(Error::InvalidParameter(format!(
            "averaging window {}..{} exceeds {} records",
            n_conv,
            n_conv + n_iter,
            signals.len()
        )));
    }
    let window = &signals[n_conv..n_conv + n_iter];
    let n = window[0].as_ref().len();
    let mut mean = vec![0.0; n];
    for e in window {
        check_len("trial error", n, e.as_ref().len())?;
        mean.iter_mut().zip(e.as_ref()).for_each(|(m, e)| *m += e);
    }
    mean.iter_mut().for_each(|m| *m /= n_iter as f64);
    Ok(mean)
}

/// `|e_j - e_inf|_2`.
pub fn trial_varying_norm(e_j: &[f64], e_inf: &[f64]) -> Result<f64> {
    check_len("limit error", e_j.len(), e_inf.len())?;
    Ok(e_j
        .iter()
        .zip(e_inf)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt())
}
