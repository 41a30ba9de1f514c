use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sparse_ilc::config::ExperimentConfig;
use sparse_ilc::experiment::{self, Artifacts, Failure, Overrides};

#[derive(Parser)]
#[command(name = "sparse-ilc", version, about = "Sparse iterative learning control experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Overrides `run.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    no_plots: bool,
    /// Worker threads for parallel work.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured trials.
    Run { config: PathBuf },
    /// Trial-varying analysis of recorded errors (a run directory or errors.csv).
    Analyze { config: PathBuf, records: PathBuf },
    /// Contraction factor and limit error spectrum of an explicit update.
    Predict { config: PathBuf },
    /// One run per value of the sweep section.
    Sweep { config: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("warning: could not set thread count: {e}");
        }
    }
    let path = match &cli.command {
        Command::Run { config } | Command::Predict { config } | Command::Sweep { config } => config,
        Command::Analyze { config, .. } => config,
    };
    let mut cfg = match ExperimentConfig::load(path) {
        Ok(c) => c,
        Err(e) => return finish(Err(Failure::Config(e))),
    };
    Overrides {
        seed: cli.seed,
        out: cli.out.clone(),
        no_plots: cli.no_plots,
    }
    .apply(&mut cfg);

    let result = match &cli.command {
        Command::Run { .. } => experiment::run(&cfg).map(|(out, art)| {
            let last = out.records.last().expect("at least one trial");
            println!(
                "{} trials: |e_0| = {:.6e}, |e_last| = {:.6e}, |f|_0 = {}, |Df|_0 = {}",
                out.records.len(),
                out.records[0].e_norm2,
                last.e_norm2,
                last.f_card,
                last.df_card
            );
            if let Some(c) = &out.convergence {
                println!("contraction factor {:.6} ({})", c.rho_hat, c.verdict);
            }
            if let Some(a) = &out.analysis {
                println!("band-averaged amplification {:.4}", a.ratio);
            }
            art
        }),
        Command::Analyze { records, .. } => experiment::analyze(&cfg, records).map(|(rep, art)| {
            println!("band-averaged amplification {:.4}", rep.ratio);
            if let Some(p) = rep.predicted_ratio {
                println!("predicted {:.4}", p);
            }
            art
        }),
        Command::Predict { .. } => experiment::predict(&cfg).map(|(p, art)| {
            let c = &p.convergence;
            println!("contraction factor {:.6} ({})", c.rho_hat, c.verdict);
            if let Some(f) = c.lifted_factor {
                println!("lifted factor {:.6}", f);
            }
            art
        }),
        Command::Sweep { .. } => experiment::sweep(&cfg).map(|(entries, art)| {
            for e in &entries {
                println!(
                    "lambda {:.4e} fusion {:.3}: |e| {:.4e} -> {:.4e}, |f|_0 = {}, |Df|_0 = {}",
                    e.lambda, e.fusion_weight, e.e0_norm2, e.final_e_norm2, e.final_f_card, e.final_df_card
                );
            }
            art
        }),
    };
    finish(result)
}

fn finish(result: Result<Artifacts, Failure>) -> ExitCode {
    match result {
        Ok(art) => {
            for w in &art.warnings {
                eprintln!("warning: {w}");
            }
            eprintln!("wrote {} files", art.files.len());
            ExitCode::from(art.exit_code() as u8)
        }
        Err(f) => {
            eprintln!("{f}");
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
