//! Trial-varying disturbance amplification of inverse-model learning for a
//! range of learning gains.

use sparse_ilc::analysis::noise_amplification;
use sparse_ilc::config::ExperimentConfig;
use sparse_ilc::engine::run_ilc;
use sparse_ilc::experiment::analyze_errors;

fn main() -> sparse_ilc::Result<()> {
    println!("{:>6} {:>10} {:>10}", "alpha", "measured", "theory");
    for alpha in [0.25, 0.5, 1.0] {
        let cfg = ExperimentConfig::from_toml(&format!(
            r#"
            [task]
            n = 1024
            [algorithm]
            variant = "inverse_model"
            alpha = {alpha}
            [run]
            n_trials = 80
            seed = 2
            n_conv = 30
            n_iter = 50
            "#
        ))?;
        let exp = cfg.build()?;
        let records = run_ilc(&exp.setup, &exp.algorithm, &exp.run)?;
        let errors: Vec<Vec<f64>> = records.into_iter().map(|r| r.e).collect();
        let report = analyze_errors(&cfg, &exp.setup, &errors)?;
        println!("{alpha:>6} {:>10.4} {:>10.4}", report.ratio, noise_amplification(alpha)?.exact);
    }
    Ok(())
}
