//! Predicted converged error spectrum of a robust inverse-model update,
//! compared with a Monte Carlo estimate.

use sparse_ilc::analysis::{convergence_factor, estimate_spectrum, limit_error_spectrum, theoretical_phi_v};
use sparse_ilc::config::ExperimentConfig;
use sparse_ilc::engine::{average_window, run_ilc};
use sparse_ilc::lti::{FrequencyGrid, TransferFunction};

fn main() -> sparse_ilc::Result<()> {
    let cfg = ExperimentConfig::from_toml(
        r#"
        [task]
        n = 1024
        [algorithm]
        variant = "inverse_model"
        alpha = 0.5
        [run]
        n_trials = 120
        seed = 9
        n_conv = 40
        n_iter = 80
        "#,
    )?;
    let exp = cfg.build()?;
    let setup = &exp.setup;
    let ts = cfg.sample_period();
    let q = TransferFunction::gain(1.0, ts);
    let l = setup.model.inverse()?.scale(0.5);

    let report = convergence_factor(&q, &l, &setup.true_system, &FrequencyGrid::default());
    println!("contraction factor {:.4} ({})", report.rho_hat, report.verdict);

    let phi_r = estimate_spectrum(&[setup.reference.as_slice()], None)?;
    let phi_v = theoretical_phi_v(&setup.noise_filter, setup.noise_variance, &phi_r.grid)?;
    let predicted = limit_error_spectrum(&q, &l, &setup.true_system, &phi_r.power, &phi_v.power, &phi_r.grid)?;

    let records = run_ilc(setup, &exp.algorithm, &exp.run)?;
    let errors: Vec<&[f64]> = records.iter().map(|r| r.e.as_slice()).collect();
    let e_inf = average_window(&errors, exp.run.n_conv, exp.run.n_iter)?;
    let varying: Vec<Vec<f64>> = errors[exp.run.n_conv..]
        .iter()
        .map(|e| e.iter().zip(&e_inf).map(|(a, b)| a - b).collect())
        .collect();
    let measured = estimate_spectrum(&varying, None)?;

    let hz = predicted.freq_hz(ts);
    println!("{:>9} {:>12} {:>12}", "Hz", "predicted", "measured");
    for k in (1..hz.len()).step_by(hz.len() / 12) {
        println!("{:>9.2} {:>12.4e} {:>12.4e}", hz[k], predicted.power[k], measured.power[k]);
    }
    Ok(())
}
