//! Config-driven runs, analyses, predictions and sweeps that write CSV files
//! and SVG plots.

mod io;
mod plots;

use std::fmt;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::analysis::{
    band_average_ratio, convergence_factor, estimate_spectrum, lifted_contraction_factor,
    limit_error_coefficients, theoretical_phi_v, Band, ConvergenceReport, SpectrumEstimate,
    StationaryNormOptimal,
};
use crate::config::{ExperimentConfig, Variant};
use crate::criterion::{PenaltyKind, WeightSpec};
use crate::engine::{average_window, run_ilc, trial_varying_norm, PlantSetup, TrialRecord};
use crate::error::Error;
use crate::lti::{lift, FrequencyDomain, FrequencyGrid, ResponseFn, TransferFunction};
use crate::solvers::{lasso_lambda_max, norm_optimal_gains};

pub use io::{
    num, read_errors, ERRORS_HEADER, PREDICTION_HEADER, SIGNALS_HEADER, SPECTRA_HEADER, SUMMARY_HEADER,
    SWEEP_HEADER, TRIALS_HEADER, TRIAL_VARYING_HEADER,
};
use plots::{line_plot, Series};

/// Why a command stopped.
#[derive(Debug, Clone, PartialEq)]
pub enum Failure {
    Config(Error),
    Runtime(Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 1,
            Failure::Runtime(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(e) => write!(f, "configuration error: {e}"),
            Failure::Runtime(e) => write!(f, "runtime failure: {e}"),
        }
    }
}

impl std::error::Error for Failure {}

pub type Outcome<T> = std::result::Result<T, Failure>;

fn config<T>(r: crate::Result<T>) -> Outcome<T> {
    r.map_err(Failure::Config)
}

fn runtime<T>(r: crate::Result<T>) -> Outcome<T> {
    r.map_err(Failure::Runtime)
}

/// Files written by a command and the warnings it produced.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Artifacts {
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

impl Artifacts {
    /// 0 when clean, 2 when the command completed with warnings.
    pub fn exit_code(&self) -> i32 {
        if self.warnings.is_empty() {
            0
        } else {
            2
        }
    }

    fn absorb(&mut self, other: Artifacts) {
        self.files.extend(other.files);
        self.warnings.extend(other.warnings);
    }
}

/// Command-line overrides of the config.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub no_plots: bool,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(seed) = self.seed {
            cfg.run.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.output.dir = out.clone();
        }
        if self.no_plots {
            cfg.output.plots = false;
        }
    }
}

fn out_dir(cfg: &ExperimentConfig) -> Outcome<PathBuf> {
    let dir = cfg.output.dir.clone();
    runtime(std::fs::create_dir_all(&dir).map_err(Error::from))?;
    Ok(dir)
}

fn plot_into(art: &mut Artifacts, path: PathBuf, title: &str, x: &str, y: &str, series: &[Series]) {
    match line_plot(&path, title, x, y, series) {
        Ok(()) => art.files.push(path),
        Err(e) => art.warnings.push(format!("{}: {e}", path.display())),
    }
}

// ---------------------------------------------------------------- prediction

/// Frequency-domain form of the configured update, when one exists.
enum LoopForm {
    Inverse { l: TransferFunction },
    NormOptimal { gains: StationaryNormOptimal, alpha: f64 },
}

fn loop_form(cfg: &ExperimentConfig, setup: &PlantSetup) -> crate::Result<LoopForm> {
    let a = &cfg.algorithm;
    match a.variant {
        Variant::InverseModel => Ok(LoopForm::Inverse {
            l: setup.model.inverse()?.scale(a.alpha),
        }),
        Variant::NormOptimal => Ok(LoopForm::NormOptimal {
            gains: StationaryNormOptimal::new(
                setup.model.clone(),
                a.w_error * a.w_error,
                a.w_command * a.w_command,
                a.w_change * a.w_change,
            )?,
            alpha: a.alpha,
        }),
        Variant::Optimization if a.lambda == 0.0 => Ok(LoopForm::NormOptimal {
            gains: StationaryNormOptimal::new(
                setup.model.clone(),
                a.w_error * a.w_error,
                a.w_command * a.w_command,
                a.w_change * a.w_change,
            )?,
            alpha: 1.0,
        }),
        Variant::Optimization | Variant::Basis => Err(Error::Unsupported(
            "l1-regularized updates have no closed-form frequency-domain representation; \
             prediction needs inverse_model, norm_optimal or lambda = 0"
                .into(),
        )),
    }
}

impl LoopForm {
    fn with<R>(&self, f: impl FnOnce(&dyn FrequencyDomain, &dyn FrequencyDomain) -> R) -> R {
        match self {
            LoopForm::Inverse { l } => f(&TransferFunction::gain(1.0, l.sample_period()), l),
            LoopForm::NormOptimal { gains, alpha } => {
                let learning = gains.learning();
                let scaled = ResponseFn(|w: f64| learning.response_at(w) * *alpha);
                f(&gains.robustness(), &scaled)
            }
        }
    }

    fn convergence(&self, j: &TransferFunction, grid: &FrequencyGrid) -> ConvergenceReport {
        self.with(|q, l| convergence_factor(q, l, j, grid))
    }

    /// `(phi_r coefficient, phi_v coefficient)` of the limit error.
    fn coefficients(&self, j: &TransferFunction, grid: &FrequencyGrid) -> crate::Result<(Vec<f64>, Vec<f64>)> {
        self.with(|q, l| limit_error_coefficients(q, l, j, grid))
            .map(|c| (c.reference, c.noise))
    }
}

/// Lifted `Q (I - L J_o)` factor for tasks small enough to decompose.
fn lifted_factor(cfg: &ExperimentConfig, setup: &PlantSetup) -> crate::Result<f64> {
    let n = setup.len();
    let a = &cfg.algorithm;
    let (l, q) = match a.variant {
        Variant::InverseModel => {
            let g = crate::engine::inverse_model_gains(&setup.model, n)?;
            (g.l * a.alpha, g.q)
        }
        _ => {
            let w = |s: f64| if s == 0.0 { WeightSpec::Zero } else { WeightSpec::ScaledIdentity(s) };
            let g = norm_optimal_gains(setup.model_lifted(), &w(a.w_error), &w(a.w_command), &w(a.w_change))?;
            let alpha = if a.variant == Variant::NormOptimal { a.alpha } else { 1.0 };
            (g.l * alpha, g.q)
        }
    };
    let jo = lift(&setup.true_system, n)?;
    lifted_contraction_factor(&q, &l, jo.matrix())
}

/// Largest task for which the lifted factor is computed.
pub const LIFTED_FACTOR_MAX_N: usize = 1024;

#[derive(Debug, Clone)]
pub struct Prediction {
    pub convergence: ConvergenceReport,
    /// Welch-bin grid used for the spectra.
    pub phi_r: SpectrumEstimate,
    pub phi_v: SpectrumEstimate,
    pub phi_e_inf: SpectrumEstimate,
}

fn prediction(cfg: &ExperimentConfig, setup: &PlantSetup) -> crate::Result<(Prediction, Vec<String>)> {
    let form = loop_form(cfg, setup)?;
    let mut warnings = Vec::new();
    let mut report = form.convergence(&setup.true_system, &FrequencyGrid::default());
    if setup.len() <= LIFTED_FACTOR_MAX_N {
        match lifted_factor(cfg, setup) {
            Ok(f) => report = report.with_lifted_factor(f),
            Err(e) => warnings.push(format!("lifted contraction factor unavailable: {e}")),
        }
    }
    let phi_r = estimate_spectrum(&[setup.reference.as_slice()], None)?;
    let phi_v = theoretical_phi_v(&setup.noise_filter, setup.noise_variance, &phi_r.grid)?;
    let phi_e_inf = match form.coefficients(&setup.true_system, &phi_r.grid) {
        Ok((cr, cv)) => SpectrumEstimate::theoretical(
            phi_r.grid.clone(),
            (0..cr.len()).map(|k| cr[k] * phi_r.power[k] + cv[k] * phi_v.power[k]).collect(),
        )?,
        Err(Error::NotContractive { factor }) => {
            warnings.push(format!("contraction factor {factor} >= 1: no limit error spectrum"));
            SpectrumEstimate::theoretical(phi_r.grid.clone(), vec![f64::INFINITY; phi_r.len()])?
        }
        Err(e) => return Err(e),
    };
    Ok((
        Prediction {
            convergence: report,
            phi_r,
            phi_v,
            phi_e_inf,
        },
        warnings,
    ))
}

fn report_rows(report: &ConvergenceReport, ts: f64) -> Vec<(String, String)> {
    let mut rows = vec![
        ("rho_hat".to_string(), num(report.rho_hat)),
        ("verdict".to_string(), report.verdict.to_string()),
        ("peak_hz".to_string(), num(report.peak_omega / (2.0 * std::f64::consts::PI * ts))),
    ];
    if let Some(f) = report.lifted_factor {
        rows.push(("lifted_factor".into(), num(f)));
    }
    rows
}

/// `predict`: contraction factor and limit error spectrum of the configured
/// update.
pub fn predict(cfg: &ExperimentConfig) -> Outcome<(Prediction, Artifacts)> {
    let (setup, _, _) = config(cfg.validate().and_then(|_| cfg.setup()))?;
    let (pred, warnings) = prediction(cfg, &setup).map_err(|e| match e {
        Error::Unsupported(_) => Failure::Config(e),
        other => Failure::Runtime(other),
    })?;
    let dir = out_dir(cfg)?;
    let ts = cfg.sample_period();
    let mut art = Artifacts {
        warnings,
        ..Default::default()
    };
    art.files.push(runtime(io::write_summary(
        dir.join("convergence.csv"),
        &report_rows(&pred.convergence, ts),
    ))?);
    let hz = pred.phi_r.freq_hz(ts);
    let mut t = runtime(io::Table::create(dir.join("prediction.csv"), &PREDICTION_HEADER))?;
    for k in 0..hz.len() {
        runtime(t.row([num(hz[k]), num(pred.phi_r.power[k]), num(pred.phi_v.power[k]), num(pred.phi_e_inf.power[k])]))?;
    }
    art.files.push(runtime(t.finish())?);
    if cfg.output.plots {
        let log = |s: &SpectrumEstimate| -> Vec<(f64, f64)> {
            hz.iter().zip(&s.power).map(|(f, p)| (f.log10(), p.log10())).collect()
        };
        plot_into(
            &mut art,
            dir.join("prediction.svg"),
            "predicted spectra",
            "log10 frequency [Hz]",
            "log10 power",
            &[
                Series::new("phi_r", log(&pred.phi_r)),
                Series::new("phi_v", log(&pred.phi_v)),
                Series::new("phi_e_inf", log(&pred.phi_e_inf)),
            ],
        );
    }
    Ok((pred, art))
}

// ------------------------------------------------------------------ analysis

#[derive(Debug, Clone)]
pub struct AnalysisReport {
    pub n_conv: usize,
    pub n_iter: usize,
    pub e_inf: Vec<f64>,
    /// `|e_j - e_inf|_2` for every trial.
    pub trial_varying: Vec<f64>,
    /// Spectrum of `e_j - e_inf` over the averaging window.
    pub measured: SpectrumEstimate,
    pub phi_v: SpectrumEstimate,
    /// Predicted trial-varying part of the limit error, when the update has a
    /// frequency-domain form.
    pub phi_e_inf: Option<SpectrumEstimate>,
    /// Band average of `measured / phi_v`.
    pub ratio: f64,
    /// Band average of `phi_e_inf / phi_v`.
    pub predicted_ratio: Option<f64>,
}

/// Trial-varying analysis of the errors `errors[j]` of a configured run.
pub fn analyze_errors(cfg: &ExperimentConfig, setup: &PlantSetup, errors: &[Vec<f64>]) -> crate::Result<AnalysisReport> {
    let (n_conv, n_iter) = (cfg.run.n_conv, cfg.run.n_iter);
    if n_iter == 0 {
        return Err(Error::Config("run.n_iter: analysis needs an averaging window".into()));
    }
    if let Some(e) = errors.iter().find(|e| e.len() != setup.len()) {
        return Err(Error::DimensionMismatch {
            context: "recorded error",
            expected: setup.len(),
            found: e.len(),
        });
    }
    let e_inf = average_window(errors, n_conv, n_iter)?;
    let trial_varying = errors
        .iter()
        .map(|e| trial_varying_norm(e, &e_inf))
        .collect::<crate::Result<Vec<_>>>()?;
    let deviations: Vec<Vec<f64>> = errors[n_conv..n_conv + n_iter]
        .iter()
        .map(|e| e.iter().zip(&e_inf).map(|(a, b)| a - b).collect())
        .collect();
    let measured = estimate_spectrum(&deviations, None)?;
    let phi_v = theoretical_phi_v(&setup.noise_filter, setup.noise_variance, &measured.grid)?;
    let ts = cfg.sample_period();
    let band = Band::default();
    let ratio = band_average_ratio(&measured, &phi_v, &band, ts).unwrap_or(f64::NAN);
    let phi_e_inf = match loop_form(cfg, setup) {
        Ok(form) => match form.coefficients(&setup.true_system, &measured.grid) {
            Ok((_, cv)) => Some(phi_v.scaled(&cv)?),
            Err(Error::NotContractive { .. }) => None,
            Err(e) => return Err(e),
        },
        Err(_) => None,
    };
    let predicted_ratio = phi_e_inf
        .as_ref()
        .and_then(|p| band_average_ratio(p, &phi_v, &band, ts).ok());
    Ok(AnalysisReport {
        n_conv,
        n_iter,
        e_inf,
        trial_varying,
        measured,
        phi_v,
        phi_e_inf,
        ratio,
        predicted_ratio,
    })
}

fn write_analysis(cfg: &ExperimentConfig, rep: &AnalysisReport, dir: &Path) -> crate::Result<Artifacts> {
    let ts = cfg.sample_period();
    let mut art = Artifacts::default();
    let mut t = io::Table::create(dir.join("trial_varying.csv"), &TRIAL_VARYING_HEADER)?;
    for (j, v) in rep.trial_varying.iter().enumerate() {
        t.row([j.to_string(), num(*v)])?;
    }
    art.files.push(t.finish()?);

    let hz = rep.measured.freq_hz(ts);
    let mut t = io::Table::create(dir.join("spectra.csv"), &SPECTRA_HEADER)?;
    for k in 0..hz.len() {
        let theory = rep.phi_e_inf.as_ref().map_or(f64::NAN, |p| p.power[k]);
        t.row([num(hz[k]), num(rep.measured.power[k]), num(rep.phi_v.power[k]), num(theory)])?;
    }
    art.files.push(t.finish()?);

    let mut t = io::Table::create(dir.join("e_inf.csv"), &["t_index", "e_inf"])?;
    for (k, v) in rep.e_inf.iter().enumerate() {
        t.row([k.to_string(), num(*v)])?;
    }
    art.files.push(t.finish()?);

    let mean_tv = rep.trial_varying[rep.n_conv..rep.n_conv + rep.n_iter].iter().sum::<f64>() / rep.n_iter as f64;
    let rows = vec![
        ("n_conv".to_string(), rep.n_conv.to_string()),
        ("n_iter".to_string(), rep.n_iter.to_string()),
        ("e_inf_norm2".to_string(), num(rep.e_inf.iter().map(|v| v * v).sum::<f64>().sqrt())),
        ("mean_trial_varying_norm".to_string(), num(mean_tv)),
        ("amplification_measured".to_string(), num(rep.ratio)),
        ("amplification_predicted".to_string(), rep.predicted_ratio.map_or("NaN".into(), num)),
    ];
    art.files.push(io::write_summary(dir.join("analysis.csv"), &rows)?);

    if cfg.output.plots {
        let log = |p: &[f64]| -> Vec<(f64, f64)> { hz.iter().zip(p).map(|(f, v)| (f.log10(), v.log10())).collect() };
        let twice: Vec<f64> = rep.phi_v.power.iter().map(|p| 2.0 * p).collect();
        let mut series = vec![
            Series::new("measured", log(&rep.measured.power)),
            Series::new("phi_v", log(&rep.phi_v.power)),
            Series::new("2 phi_v", log(&twice)),
        ];
        if let Some(p) = &rep.phi_e_inf {
            series.push(Series::new("predicted", log(&p.power)));
        }
        plot_into(
            &mut art,
            dir.join("spectra.svg"),
            "trial-varying error spectrum",
            "log10 frequency [Hz]",
            "log10 power",
            &series,
        );
        let tv: Vec<(f64, f64)> = rep.trial_varying.iter().enumerate().map(|(j, v)| (j as f64, *v)).collect();
        plot_into(
            &mut art,
            dir.join("trial_varying.svg"),
            "trial-varying error norm",
            "trial",
            "|e_j - e_inf|_2",
            &[Series::new("trial-varying", tv)],
        );
    }
    Ok(art)
}

/// `analyze`: trial-varying analysis of recorded errors.
pub fn analyze(cfg: &ExperimentConfig, records: &Path) -> Outcome<(AnalysisReport, Artifacts)> {
    let (setup, _, _) = config(cfg.validate().and_then(|_| cfg.setup()))?;
    let (_, errors) = runtime(read_errors(records))?;
    if cfg.run.n_iter == 0 || cfg.run.n_conv + cfg.run.n_iter > errors.len() {
        return Err(Failure::Config(Error::Config(format!(
            "run: averaging window {}..{} does not fit {} recorded trials",
            cfg.run.n_conv,
            cfg.run.n_conv + cfg.run.n_iter,
            errors.len()
        ))));
    }
    let rep = runtime(analyze_errors(cfg, &setup, &errors))?;
    let dir = out_dir(cfg)?;
    let art = runtime(write_analysis(cfg, &rep, &dir))?;
    Ok((rep, art))
}

// ----------------------------------------------------------------------- run

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<TrialRecord>,
    pub reference: Vec<f64>,
    pub analysis: Option<AnalysisReport>,
    pub convergence: Option<ConvergenceReport>,
}

/// `run`: executes the configured trials and writes records, signals,
/// summary, spectra and plots.
pub fn run(cfg: &ExperimentConfig) -> Outcome<(RunOutput, Artifacts)> {
    let exp = config(cfg.build())?;
    let records = runtime(run_ilc(&exp.setup, &exp.algorithm, &exp.run))?;
    let dir = out_dir(cfg)?;
    let mut art = Artifacts::default();

    let unconverged: Vec<usize> = records.iter().filter(|r| !r.converged).map(|r| r.trial).collect();
    if !unconverged.is_empty() {
        art.warnings.push(format!(
            "solver did not certify the update after {} trial(s): {:?}",
            unconverged.len(),
            unconverged
        ));
    }
    art.files.push(runtime(io::write_trials(&dir, &records))?);
    art.files.push(runtime(io::write_errors(&dir, &records))?);
    let mut selected = cfg.output.signal_trials.clone();
    if selected.is_empty() {
        selected = vec![0, records.len() - 1];
        selected.dedup();
    }
    for j in selected {
        match records.get(j) {
            Some(rec) => {
                art.files.push(runtime(io::write_signals(&dir, &exp.setup.reference, rec))?);
                if cfg.output.plots {
                    let t = |v: &[f64]| -> Vec<(f64, f64)> { v.iter().enumerate().map(|(k, x)| (k as f64, *x)).collect() };
                    plot_into(
                        &mut art,
                        dir.join(format!("signals_trial_{j}.svg")),
                        &format!("trial {j}"),
                        "sample",
                        "signal",
                        &[Series::new("e", t(&rec.e)), Series::new("f", t(&rec.f))],
                    );
                }
            }
            None => art.warnings.push(format!("output.signal_trials: trial {j} was not run")),
        }
    }

    let convergence = loop_form(cfg, &exp.setup)
        .ok()
        .map(|form| form.convergence(&exp.setup.true_system, &FrequencyGrid::default()));
    let analysis = if cfg.run.n_iter > 0 {
        let errors: Vec<Vec<f64>> = records.iter().map(|r| r.e.clone()).collect();
        let rep = runtime(analyze_errors(cfg, &exp.setup, &errors))?;
        art.absorb(runtime(write_analysis(cfg, &rep, &dir))?);
        Some(rep)
    } else {
        None
    };

    let last = records.last().unwrap();
    let diagnostics: usize = records.iter().map(|r| r.diagnostics.len()).sum();
    let mut rows = vec![
        ("trials".to_string(), records.len().to_string()),
        ("e0_norm2".to_string(), num(records[0].e_norm2)),
        ("final_e_norm2".to_string(), num(last.e_norm2)),
        ("final_f_card".to_string(), last.f_card.to_string()),
        ("final_df_card".to_string(), last.df_card.to_string()),
        ("unconverged".to_string(), unconverged.len().to_string()),
        ("diagnostics".to_string(), diagnostics.to_string()),
    ];
    if let Some(c) = &convergence {
        rows.extend(report_rows(c, cfg.sample_period()));
    }
    if let Some(a) = &analysis {
        rows.push(("amplification_measured".into(), num(a.ratio)));
    }
    art.files.push(runtime(io::write_summary(dir.join("summary.csv"), &rows))?);

    if cfg.output.plots {
        let norms: Vec<(f64, f64)> = records.iter().map(|r| (r.trial as f64, r.e_norm2.log10())).collect();
        plot_into(
            &mut art,
            dir.join("error_norm.svg"),
            "error norm per trial",
            "trial",
            "log10 |e_j|_2",
            &[Series::new("|e_j|", norms)],
        );
        let card = |f: fn(&TrialRecord) -> usize| -> Vec<(f64, f64)> {
            records.iter().map(|r| (r.trial as f64, f(r) as f64)).collect()
        };
        plot_into(
            &mut art,
            dir.join("cardinality.svg"),
            "command structure per trial",
            "trial",
            "count",
            &[
                Series::new("|f_j|_0", card(|r| r.f_card)),
                Series::new("|D f_j|_0", card(|r| r.df_card)),
            ],
        );
    }
    Ok((
        RunOutput {
            records,
            reference: exp.setup.reference.clone(),
            analysis,
            convergence,
        },
        art,
    ))
}

// --------------------------------------------------------------------- sweep

#[derive(Debug, Clone, PartialEq)]
pub struct SweepEntry {
    pub index: usize,
    pub lambda: f64,
    pub fusion_weight: f64,
    pub e0_norm2: f64,
    pub final_e_norm2: f64,
    pub final_f_card: usize,
    pub final_df_card: usize,
    pub converged_all: bool,
}

/// `sweep`: one optimization run per regularization weight (and fusion
/// weight), in parallel, each in its own subdirectory.
pub fn sweep(cfg: &ExperimentConfig) -> Outcome<(Vec<SweepEntry>, Artifacts)> {
    config(cfg.validate())?;
    let s = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| Failure::Config(Error::Config("sweep: section missing".into())))?;
    if cfg.algorithm.variant != Variant::Optimization {
        return Err(Failure::Config(Error::Config(
            "sweep: requires algorithm.variant = \"optimization\"".into(),
        )));
    }
    let mut values = s.values();
    if s.relative {
        let (setup, _, _) = config(cfg.setup())?;
        let n = setup.len();
        let we = if cfg.algorithm.w_error == 0.0 {
            WeightSpec::Zero
        } else {
            WeightSpec::ScaledIdentity(cfg.algorithm.w_error)
        };
        let lmax = runtime(lasso_lambda_max(
            setup.model_lifted(),
            &we,
            &setup.reference,
            &vec![0.0; n],
            &PenaltyKind::Identity,
        ))?;
        values.iter_mut().for_each(|v| *v *= lmax);
    }
    let weights = if s.fusion_weights.is_empty() {
        vec![cfg.algorithm.fusion_weight]
    } else {
        s.fusion_weights.clone()
    };
    let grid: Vec<(f64, f64)> = values
        .iter()
        .flat_map(|&l| weights.iter().map(move |&a| (l, a)))
        .collect();
    let dir = out_dir(cfg)?;
    let results: Vec<Outcome<(SweepEntry, Artifacts)>> = grid
        .par_iter()
        .enumerate()
        .map(|(index, &(lambda, fusion_weight))| {
            let mut c = cfg.clone();
            c.sweep = None;
            c.algorithm.lambda = lambda;
            c.algorithm.fusion_weight = fusion_weight;
            c.output.dir = dir.join(format!("sweep_{index:03}"));
            let (out, art) = run(&c)?;
            let last = out.records.last().unwrap();
            Ok((
                SweepEntry {
                    index,
                    lambda,
                    fusion_weight,
                    e0_norm2: out.records[0].e_norm2,
                    final_e_norm2: last.e_norm2,
                    final_f_card: last.f_card,
                    final_df_card: last.df_card,
                    converged_all: out.records.iter().all(|r| r.converged),
                },
                art,
            ))
        })
        .collect();
    let mut entries = Vec::with_capacity(results.len());
    let mut art = Artifacts::default();
    for r in results {
        let (entry, a) = r?;
        art.absorb(a);
        entries.push(entry);
    }
    let mut t = runtime(io::Table::create(dir.join("sweep_summary.csv"), &SWEEP_HEADER))?;
    for e in &entries {
        runtime(t.row([
            e.index.to_string(),
            num(e.lambda),
            num(e.fusion_weight),
            num(e.e0_norm2),
            num(e.final_e_norm2),
            e.final_f_card.to_string(),
            e.final_df_card.to_string(),
            e.converged_all.to_string(),
        ]))?;
    }
    art.files.push(runtime(t.finish())?);
    Ok((entries, art))
}
