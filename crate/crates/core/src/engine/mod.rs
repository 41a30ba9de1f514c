//! Trial-domain simulation: plant, references, update laws and records.

mod plant;
mod reference;
mod run;

pub use plant::{PlantSetup, SurrogateLoop, SurrogateParams};
pub use reference::{build_basis, build_reference, Basis, MotionProfile};
pub use run::{
    average_window, estimate_e_inf, explicit_update, inverse_model_gains, run_ilc, run_trial, trial_rng,
    trial_varying_norm, BasisLevel, IlcAlgorithm, RunConfig, TrialRecord,
};

pub(crate) use run::check_alpha;

use crate::error::Result;
use crate::lti::{FeedbackLoop, TransferFunction};

/// Closed-loop setup on the surrogate motion system.
///
/// The reference seen in the error channel is `S r`, the noise filter is
/// `H = S`, the true system is `J_o = S G` and the learner's model is
/// `model_gain * J_o`.
pub fn surrogate_setup(
    params: &SurrogateParams,
    profile: &MotionProfile,
    n: usize,
    sample_period: f64,
    noise_variance: f64,
    model_gain: f64,
) -> Result<(PlantSetup, SurrogateLoop)> {
    let lp = params.build(sample_period)?;
    let position = build_reference(profile, n, sample_period)?;
    let setup = closed_loop_setup(&lp.closed, &position, None, noise_variance, model_gain)?;
    Ok((setup, lp))
}

/// Setup for any stable feedback loop driven by the position profile
/// `position`. `noise_filter` defaults to the sensitivity.
pub fn closed_loop_setup(
    closed: &FeedbackLoop,
    position: &[f64],
    noise_filter: Option<TransferFunction>,
    noise_variance: f64,
    model_gain: f64,
) -> Result<PlantSetup> {
    if !(model_gain.is_finite() && model_gain != 0.0) {
        return Err(crate::Error::InvalidParameter(format!(
            "model gain must be finite and nonzero, got {model_gain}"
        )));
    }
    let reference = closed.sensitivity.simulate(position)?;
    let jo = closed.process_sensitivity.clone();
    PlantSetup::new(
        jo.clone(),
        jo.scale(model_gain),
        noise_filter.unwrap_or_else(|| closed.sensitivity.clone()),
        noise_variance,
        reference,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::criterion::{CriterionSpec, PenaltyKind, RegularizerSpec, WeightSpec};
    use crate::lti::lift;
    use crate::solvers::{ExplicitGains, SolverOptions};
    use nalgebra::DMatrix;

    const TS: f64 = 1e-3;

    fn small_setup(n: usize, variance: f64) -> PlantSetup {
        let jo = TransferFunction::with_delay(vec![0.4, 0.1], vec![1.0, -0.5], 1, TS).unwrap();
        let r: Vec<f64> = (0..n).map(|k| ((k as f64) * 0.3).sin() * (k > 0) as i32 as f64).collect();
        PlantSetup::new(jo.clone(), jo, TransferFunction::gain(1.0, TS), variance, r).unwrap()
    }

    #[test]
    fn noise_free_trial_returns_reference() {
        let p = small_setup(16, 0.0);
        let e = run_trial(&p, &[0.0; 16], &mut trial_rng(1, 0)).unwrap();
        assert_eq!(e, p.reference);
    }

    #[test]
    fn inverted_command_cancels_the_reference() {
        let p = small_setup(32, 0.0);
        let gains = inverse_model_gains(&p.model, 32).unwrap();
        let f = explicit_update(&gains, &[0.0; 32], &p.reference, 1.0).unwrap();
        let e = run_trial(&p, &f, &mut trial_rng(1, 0)).unwrap();
        assert!(e.iter().all(|v| v.abs() < 1e-12), "{e:?}");
    }

    #[test]
    fn white_noise_has_the_requested_variance() {
        let n = 100_000;
        let jo = TransferFunction::gain(1.0, TS);
        let p = PlantSetup::new(jo.clone(), jo, TransferFunction::gain(1.0, TS), 1.0, vec![0.0; n]).unwrap();
        let e = run_trial(&p, &vec![0.0; n], &mut trial_rng(7, 3)).unwrap();
        let mean = e.iter().sum::<f64>() / n as f64;
        let var = e.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((var - 1.0).abs() < 0.03, "{var}");
    }

    #[test]
    fn explicit_update_examples() {
        let n = 4;
        let q = DMatrix::from_diagonal_element(n, n, 0.5);
        let zero_l = ExplicitGains::new(DMatrix::zeros(n, n), q.clone()).unwrap();
        let f = [1.0, 2.0, 3.0, 4.0];
        let e = [1.0, -1.0, 1.0, -1.0];
        assert_eq!(explicit_update(&zero_l, &f, &e, 1.0).unwrap(), vec![0.5, 1.0, 1.5, 2.0]);
        let gains = ExplicitGains::new(DMatrix::identity(n, n) * 2.0, DMatrix::identity(n, n)).unwrap();
        let full = explicit_update(&gains, &f, &e, 1.0).unwrap();
        let half = explicit_update(&gains, &f, &e, 0.5).unwrap();
        for k in 0..n {
            assert!(((full[k] - f[k]) - 2.0 * (half[k] - f[k])).abs() < 1e-15);
        }
        assert!(explicit_update(&gains, &f, &e, 0.0).is_err());
        assert!(explicit_update(&gains, &f, &e, 1.5).is_err());
    }

    #[test]
    fn inverse_model_run_is_exact_after_one_trial() {
        let p = small_setup(64, 0.0);
        let algo = IlcAlgorithm::Explicit {
            gains: inverse_model_gains(&p.model, 64).unwrap(),
            alpha: 1.0,
        };
        let run = RunConfig {
            n_trials: 5,
            noise: false,
            ..Default::default()
        };
        let recs = run_ilc(&p, &algo, &run).unwrap();
        assert_eq!(recs.len(), 5);
        assert!(recs[0].e_norm2 > 1.0);
        assert!(recs[1..].iter().all(|r| r.e_norm2 < 1e-12 * recs[0].e_norm2));
    }

    #[test]
    fn norm_optimal_error_is_non_increasing() {
        let n = 48;
        let p = small_setup(n, 0.0);
        let spec = CriterionSpec::new(
            n,
            WeightSpec::ScaledIdentity(1.0),
            WeightSpec::Zero,
            WeightSpec::ScaledIdentity(0.3),
            RegularizerSpec::none(),
        )
        .unwrap();
        let algo = IlcAlgorithm::Optimization {
            spec,
            debias: false,
            options: SolverOptions::default(),
        };
        let run = RunConfig {
            n_trials: 15,
            noise: false,
            ..Default::default()
        };
        let recs = run_ilc(&p, &algo, &run).unwrap();
        for w in recs.windows(2) {
            assert!(w[1].e_norm2 <= w[0].e_norm2 * (1.0 + 1e-12));
        }
        assert!(recs.last().unwrap().e_norm2 < 0.1 * recs[0].e_norm2);
    }

    #[test]
    fn records_are_deterministic_for_a_seed() {
        let n = 40;
        let p = small_setup(n, 1e-4);
        let algo = IlcAlgorithm::Optimization {
            spec: CriterionSpec::lasso(n, 0.01, PenaltyKind::Identity).unwrap(),
            debias: true,
            options: SolverOptions::default(),
        };
        let run = RunConfig {
            n_trials: 6,
            seed: 42,
            ..Default::default()
        };
        let strip = |mut v: Vec<TrialRecord>| {
            v.iter_mut().for_each(|r| r.wall_ms = 0.0);
            v
        };
        let a = strip(run_ilc(&p, &algo, &run).unwrap());
        let b = strip(run_ilc(&p, &algo, &run).unwrap());
        assert_eq!(a, b);
        let c = strip(run_ilc(&p, &algo, &RunConfig { seed: 43, ..run }).unwrap());
        assert_ne!(a, c);
    }

    #[test]
    fn limit_error_and_trial_varying_norm() {
        let mk = |e: Vec<f64>| TrialRecord {
            trial: 0,
            f: vec![0.0; e.len()],
            e_norm2: 0.0,
            e,
            f_card: 0,
            df_card: 0,
            objective: 0.0,
            converged: true,
            wall_ms: 0.0,
            theta: None,
            diagnostics: vec![],
        };
        let recs: Vec<TrialRecord> = (0..5).map(|_| mk(vec![0.5, -1.0])).collect();
        assert_eq!(estimate_e_inf(&recs, 1, 4).unwrap(), vec![0.5, -1.0]);
        assert!(estimate_e_inf(&recs, 2, 4).is_err());
        assert_eq!(trial_varying_norm(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(trial_varying_norm(&[1.0, 0.0, 0.0], &[0.0; 3]).unwrap(), 1.0);
        let a = [0.3, -1.2, 2.2];
        let b = [0.1, 0.4, -0.5];
        let diff = nalgebra::DVector::from_fn(3, |i, _| a[i] - b[i]).norm();
        assert!((trial_varying_norm(&a, &b).unwrap() - diff).abs() < 1e-15);
    }

    #[test]
    fn limit_error_average_shrinks_with_window() {
        let n = 256;
        let p = small_setup(n, 1.0);
        let gains = ExplicitGains::new(DMatrix::zeros(n, n), DMatrix::identity(n, n)).unwrap();
        let algo = IlcAlgorithm::Explicit { gains, alpha: 1.0 };
        let run = RunConfig {
            n_trials: 400,
            seed: 9,
            ..Default::default()
        };
        let recs = run_ilc(&p, &algo, &run).unwrap();
        // with L = 0 the limit error is the reference itself
        let err = |w: usize| {
            let est = estimate_e_inf(&recs, 0, w).unwrap();
            trial_varying_norm(&est, &p.reference).unwrap()
        };
        let ratio = err(25) / err(400);
        assert!(ratio > 3.0 && ratio < 5.5, "{ratio}");
    }

    #[test]
    fn surrogate_setup_shapes() {
        let (setup, lp) = surrogate_setup(
            &SurrogateParams::default(),
            &MotionProfile::default(),
            512,
            TS,
            1.5e-7,
            0.7,
        )
        .unwrap();
        assert_eq!(setup.len(), 512);
        assert!(setup.noise_filter_is_monic_stable());
        let jo = lift(&lp.closed.process_sensitivity, 512).unwrap();
        assert!((setup.model_lifted().matrix() - jo.matrix() * 0.7).amax() < 1e-18);
        assert_eq!(setup.reference[0], 0.0);
    }

    #[test]
    fn basis_variant_selects_few_columns() {
        let (setup, _) = surrogate_setup(
            &SurrogateParams::default(),
            &MotionProfile::default(),
            400,
            TS,
            0.0,
            1.0,
        )
        .unwrap();
        let position = build_reference(&MotionProfile::default(), 400, TS).unwrap();
        let basis = build_basis(&position, &[1, 2, 3, 4], TS).unwrap();
        let algo = IlcAlgorithm::Basis {
            psi: basis.psi.clone(),
            w_error: WeightSpec::ScaledIdentity(1.0),
            w_command: WeightSpec::Zero,
            w_change: WeightSpec::Zero,
            level: BasisLevel::RelativeToMinimum(1.5),
            options: SolverOptions::default(),
        };
        let run = RunConfig {
            n_trials: 8,
            noise: false,
            ..Default::default()
        };
        let recs = run_ilc(&setup, &algo, &run).unwrap();
        let last = recs.last().unwrap();
        assert!(last.e_norm2 < 0.2 * recs[0].e_norm2, "{} vs {}", last.e_norm2, recs[0].e_norm2);
        let theta = last.theta.as_ref().unwrap();
        assert!(theta[1] != 0.0, "{theta:?}");
    }
}
