//! Feedforward from reference derivatives: the fewest basis functions that
//! reach a given error level.

use sparse_ilc::config::ExperimentConfig;
use sparse_ilc::engine::run_ilc;

fn main() -> sparse_ilc::Result<()> {
    for level in [1.0, 1.5, 4.0] {
        let cfg = ExperimentConfig::from_toml(&format!(
            r#"
            [task]
            n = 300
            [algorithm]
            variant = "basis"
            basis_orders = [1, 2, 3, 4]
            level_multiplier = {level}
            [run]
            n_trials = 6
            noise = false
            "#
        ))?;
        let exp = cfg.build()?;
        let records = run_ilc(&exp.setup, &exp.algorithm, &exp.run)?;
        let last = records.last().unwrap();
        let theta = last.theta.as_deref().unwrap_or(&[]);
        let shown: Vec<String> = theta.iter().map(|t| format!("{t:.3e}")).collect();
        println!("level x{level}: |e| = {:.4e}, theta = [{}]", last.e_norm2, shown.join(", "));
    }
    Ok(())
}
