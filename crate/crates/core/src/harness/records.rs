//! CSV outputs.
//!
//! `curves.csv` columns, in order:
//! `seed, episode, task, steps, return, cumulative_falls, cumulative_oob,
//! cumulative_sim_time, lambda, alpha`.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use super::HarnessError;
use crate::tasks::RunRecord;

pub const CURVE_COLUMNS: [&str; 10] = [
    "seed",
    "episode",
    "task",
    "steps",
    "return",
    "cumulative_falls",
    "cumulative_oob",
    "cumulative_sim_time",
    "lambda",
    "alpha",
];

/// Writes the header even when there are no rows.
pub fn write_curves<W: Write>(out: W, records: &[RunRecord]) -> Result<(), HarnessError> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    w.write_record(CURVE_COLUMNS)?;
    for r in records {
        w.serialize((
            r.seed,
            r.episode,
            &r.task,
            r.steps,
            r.episode_return,
            r.cumulative_falls,
            r.cumulative_oob,
            r.cumulative_sim_time,
            r.lambda,
            r.alpha,
        ))?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_curves(path: &Path) -> Result<Vec<RunRecord>, HarnessError> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != CURVE_COLUMNS {
        return Err(HarnessError::Config(format!(
            "{}: unexpected columns {header:?}",
            path.display()
        )));
    }
    let mut rows = Vec::new();
    for row in r.deserialize() {
        let (seed, episode, task, steps, episode_return, falls, oob, time, lambda, alpha): (
            u64,
            u64,
            String,
            u64,
            f64,
            u64,
            u64,
            f64,
            f64,
            f64,
        ) = row?;
        rows.push(RunRecord {
            seed,
            episode,
            task,
            steps,
            episode_return,
            cumulative_falls: falls,
            cumulative_oob: oob,
            cumulative_sim_time: time,
            lambda,
            alpha,
        });
    }
    Ok(rows)
}

pub fn write_curves_file(path: &Path, records: &[RunRecord]) -> Result<(), HarnessError> {
    let file = std::fs::File::create(path).map_err(|e| HarnessError::io(path, e))?;
    write_curves(std::io::BufWriter::new(file), records)
}

/// Writes any serializable rows with a header derived from the field names.
pub fn write_table<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
