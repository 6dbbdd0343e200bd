//! Per-generation training log, `log.csv`.
//!
//! One row per evaluated ES generation. Row `iter` describes the population
//! sampled around the center after `iter` updates; `evals` counts the
//! episode rollouts spent before that generation
//! (`iter × population × episodes_per_eval`). `wallclock_ms` is the elapsed
//! time since the run started and is the only nondeterministic column.

use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const HEADER: &str = "iter,best,mean,std,evals,wallclock_ms";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub iter: usize,
    pub best: f64,
    pub mean: f64,
    pub std: f64,
    pub evals: u64,
    pub wallclock_ms: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunLog {
    pub rows: Vec<LogRow>,
}

impl RunLog {
    /// Largest `best` seen up to and including each row.
    pub fn best_so_far(&self) -> Vec<f64> {
        let mut running = f64::NEG_INFINITY;
        self.rows
            .iter()
            .map(|r| {
                running = running.max(r.best);
                running
            })
            .collect()
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(file);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<RunLog> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = csv::Reader::from_reader(file);
        let header = r.headers()?.iter().collect::<Vec<_>>().join(",");
        if header != HEADER {
            return Err(Error::InvalidConfig(format!(
                "{}: unexpected log header `{header}`",
                path.display()
            )));
        }
        let rows = r.deserialize().collect::<std::result::Result<Vec<LogRow>, _>>()?;
        Ok(RunLog { rows })
    }
}

/// The log text with the `wallclock_ms` column removed, for byte-level
/// determinism comparisons.
pub fn without_wallclock(csv_text: &str) -> String {
    csv_text
        .lines()
        .map(|line| line.rsplit_once(',').map_or(line, |(head, _)| head))
        .collect::<Vec<_>>()
        .join("\n")
}
