use std::fs::File;
use std::path::{Path, PathBuf};

use crate::engine::TrialRecord;
use crate::error::{Error, Result};

pub const TRIALS_HEADER: [&str; 7] = ["trial", "e_norm2", "f_card", "df_card", "objective", "converged", "wall_ms"];
pub const SIGNALS_HEADER: [&str; 4] = ["t_index", "r", "f", "e"];
pub const SPECTRA_HEADER: [&str; 4] = ["freq_hz", "phi_measured", "phi_v_theory", "phi_e_inf_theory"];
pub const ERRORS_HEADER: [&str; 4] = ["trial", "t_index", "f", "e"];
pub const PREDICTION_HEADER: [&str; 4] = ["freq_hz", "phi_r", "phi_v_theory", "phi_e_inf_theory"];
pub const TRIAL_VARYING_HEADER: [&str; 2] = ["trial", "trial_varying_norm"];
pub const SUMMARY_HEADER: [&str; 2] = ["metric", "value"];
pub const SWEEP_HEADER: [&str; 8] = [
    "entry",
    "lambda",
    "fusion_weight",
    "e0_norm2",
    "final_e_norm2",
    "final_f_card",
    "final_df_card",
    "converged_all",
];

/// Shortest round-trip text of `v` in exponent form.
pub fn num(v: f64) -> String {
    format!("{v:e}")
}

pub(crate) struct Table {
    path: PathBuf,
    writer: csv::Writer<File>,
}

impl Table {
    pub fn create(path: PathBuf, header: &[&str]) -> Result<Self> {
        let mut writer = csv::Writer::from_path(&path)?;
        writer.write_record(header)?;
        Ok(Self { path, writer })
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<PathBuf> {
        self.writer.flush()?;
        Ok(self.path)
    }
}

pub(crate) fn write_trials(dir: &Path, records: &[TrialRecord]) -> Result<PathBuf> {
    let mut t = Table::create(dir.join("trials.csv"), &TRIALS_HEADER)?;
    for r in records {
        t.row([
            r.trial.to_string(),
            num(r.e_norm2),
            r.f_card.to_string(),
            r.df_card.to_string(),
            num(r.objective),
            r.converged.to_string(),
            format!("{:.3}", r.wall_ms),
        ])?;
    }
    t.finish()
}

pub(crate) fn write_errors(dir: &Path, records: &[TrialRecord]) -> Result<PathBuf> {
    let mut t = Table::create(dir.join("errors.csv"), &ERRORS_HEADER)?;
    for r in records {
        for (k, (f, e)) in r.f.iter().zip(&r.e).enumerate() {
            t.row([r.trial.to_string(), k.to_string(), num(*f), num(*e)])?;
        }
    }
    t.finish()
}

pub(crate) fn write_signals(dir: &Path, reference: &[f64], record: &TrialRecord) -> Result<PathBuf> {
    let path = dir.join(format!("signals_trial_{}.csv", record.trial));
    let mut t = Table::create(path, &SIGNALS_HEADER)?;
    for (k, ((r, f), e)) in reference.iter().zip(&record.f).zip(&record.e).enumerate() {
        t.row([k.to_string(), num(*r), num(*f), num(*e)])?;
    }
    t.finish()
}

pub(crate) fn write_summary(path: PathBuf, rows: &[(String, String)]) -> Result<PathBuf> {
    let mut t = Table::create(path, &SUMMARY_HEADER)?;
    for (k, v) in rows {
        t.row([k, v])?;
    }
    t.finish()
}

/// Commands and errors per trial, from an `errors.csv` file or a directory
/// holding one.
pub fn read_errors(path: &Path) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let file = if path.is_dir() { path.join("errors.csv") } else { path.to_path_buf() };
    let mut reader = csv::Reader::from_path(&file)?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    if header != ERRORS_HEADER {
        return Err(Error::InvalidParameter(format!(
            "{}: expected header {}, found {}",
            file.display(),
            ERRORS_HEADER.join(","),
            header.join(",")
        )));
    }
    let mut commands: Vec<Vec<f64>> = Vec::new();
    let mut errors: Vec<Vec<f64>> = Vec::new();
    for (line, row) in reader.records().enumerate() {
        let row = row?;
        let bad = |what: &str| Error::InvalidParameter(format!("{}: row {}: bad {what}", file.display(), line + 2));
        let trial: usize = row[0].parse().map_err(|_| bad("trial"))?;
        let t: usize = row[1].parse().map_err(|_| bad("t_index"))?;
        let f: f64 = row[2].parse().map_err(|_| bad("f"))?;
        let e: f64 = row[3].parse().map_err(|_| bad("e"))?;
        if trial == errors.len() {
            errors.push(Vec::new());
            commands.push(Vec::new());
        }
        if trial + 1 != errors.len() || t != errors[trial].len() {
            return Err(bad("ordering"));
        }
        commands[trial].push(f);
        errors[trial].push(e);
    }
    if errors.is_empty() {
        return Err(Error::InvalidParameter(format!("{}: no records", file.display())));
    }
    Ok((commands, errors))
}
