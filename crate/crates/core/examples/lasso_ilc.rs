//! Sparse feedforward updates: the lasso penalty at several weights, with and
//! without re-estimation on the selected support.

use sparse_ilc::criterion::{CriterionSpec, PenaltyKind, WeightSpec};
use sparse_ilc::engine::{run_ilc, IlcAlgorithm, RunConfig};
use sparse_ilc::config::ExperimentConfig;
use sparse_ilc::solvers::{lasso_lambda_max, SolverOptions};

fn main() -> sparse_ilc::Result<()> {
    let cfg = ExperimentConfig::from_toml("[task]\nn = 300\n[algorithm]\nvariant = \"optimization\"\n")?;
    let (setup, _, _) = cfg.setup()?;
    let n = setup.len();
    let lmax = lasso_lambda_max(
        setup.model_lifted(),
        &WeightSpec::ScaledIdentity(1.0),
        &setup.reference,
        &vec![0.0; n],
        &PenaltyKind::Identity,
    )?;
    println!("lambda_max = {lmax:.4e}");

    let run = RunConfig { n_trials: 20, seed: 4, ..RunConfig::default() };
    println!("{:>8} {:>7} {:>12} {:>6}", "lambda", "debias", "mean |e|", "|f|_0");
    for rel in [0.01, 0.1, 0.3] {
        for debias in [false, true] {
            let spec = CriterionSpec::lasso(n, rel * lmax, PenaltyKind::Identity)?;
            let alg = IlcAlgorithm::Optimization { spec, debias, options: SolverOptions::default() };
            let records = run_ilc(&setup, &alg, &run)?;
            let tail = &records[10..];
            let mean = tail.iter().map(|r| r.e_norm2).sum::<f64>() / tail.len() as f64;
            println!("{:>8} {:>7} {:>12.4e} {:>6}", format!("{rel}x"), debias, mean, records.last().unwrap().f_card);
        }
    }
    Ok(())
}
