//! Sparse and piecewise-constant updates: the combined penalty over a grid of
//! fusion weights.

use sparse_ilc::config::ExperimentConfig;
use sparse_ilc::engine::run_ilc;

fn main() -> sparse_ilc::Result<()> {
    println!("{:>7} {:>12} {:>6} {:>7}", "fusion", "|e| last", "|f|_0", "|Df|_0");
    for fusion in [0.0, 0.5, 2.0, 8.0] {
        let cfg = ExperimentConfig::from_toml(&format!(
            r#"
            [task]
            n = 300
            [algorithm]
            variant = "optimization"
            penalty = "sparse_fused"
            lambda = 2e-10
            fusion_weight = {fusion:e}
            [run]
            n_trials = 10
            noise = false
            "#
        ))?;
        let exp = cfg.build()?;
        let records = run_ilc(&exp.setup, &exp.algorithm, &exp.run)?;
        let last = records.last().unwrap();
        println!("{fusion:>7} {:>12.4e} {:>6} {:>7}", last.e_norm2, last.f_card, last.df_card);
    }
    Ok(())
}
