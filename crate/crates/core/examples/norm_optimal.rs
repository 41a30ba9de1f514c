//! Norm-optimal learning on the surrogate motion system, with and without an
//! input weight.

use sparse_ilc::analysis::{convergence_factor, StationaryNormOptimal};
use sparse_ilc::config::ExperimentConfig;
use sparse_ilc::engine::run_ilc;
use sparse_ilc::lti::FrequencyGrid;

fn main() -> sparse_ilc::Result<()> {
    for w_command in [0.0, 1e-9] {
        let cfg = ExperimentConfig::from_toml(&format!(
            r#"
            [task]
            n = 400
            [plant]
            model_gain = 0.8
            [algorithm]
            variant = "norm_optimal"
            w_command = {w_command:e}
            w_change = 1e-9
            [run]
            n_trials = 15
            noise = false
            "#
        ))?;
        let exp = cfg.build()?;
        let records = run_ilc(&exp.setup, &exp.algorithm, &exp.run)?;

        let gains = StationaryNormOptimal::new(exp.setup.model.clone(), 1.0, w_command * w_command, 1e-18)?;
        let report = convergence_factor(&gains.robustness(), &gains.learning(), &exp.setup.true_system, &FrequencyGrid::default());

        println!("w_command = {w_command:e}: contraction factor {:.4} ({})", report.rho_hat, report.verdict);
        for r in records.iter().step_by(2) {
            println!("  trial {:2}  |e| = {:.4e}", r.trial, r.e_norm2);
        }
    }
    Ok(())
}
