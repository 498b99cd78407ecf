//! Seeded ablation runners.

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::Serialize;

use super::{records, Checkpoint, ExperimentConfig, HarnessError};
use crate::env::{TerrainKind, Workspace};
use crate::tasks::{
    training_session, RunRecord, SafetyMode, SchedulerMode, SessionConfig, TaskSetPreset,
};

/// Applies `f` to every item on up to `workers` threads; results keep input order.
pub fn parallel_map<T, R, F>(items: Vec<T>, workers: usize, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync,
{
    let n = items.len();
    let workers = match workers {
        0 => std::thread::available_parallelism().map_or(1, |p| p.get()),
        w => w,
    }
    .clamp(1, n.max(1));
    let slots: Vec<Mutex<Option<T>>> = items.into_iter().map(|t| Mutex::new(Some(t))).collect();
    let results: Vec<Mutex<Option<R>>> = (0..n).map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= n {
                    break;
                }
                let item = slots[i]
                    .lock()
                    .unwrap()
                    .take()
                    .expect("each slot taken once");
                let r = f(item);
                *results[i].lock().unwrap() = Some(r);
            });
        }
    });
    results
        .into_iter()
        .map(|m| m.into_inner().unwrap().expect("every slot filled"))
        .collect()
}

/// Runs every session and keeps only the logs.
pub fn run_sessions(
    configs: Vec<SessionConfig>,
    workers: usize,
) -> Result<Vec<Vec<RunRecord>>, HarnessError> {
    parallel_map(configs, workers, |c| training_session(c).map(|s| s.records))
        .into_iter()
        .map(|r| r.map_err(HarnessError::from))
        .collect()
}

fn last_cumulative(records: &[RunRecord]) -> (u64, u64) {
    records
        .last()
        .map_or((0, 0), |r| (r.cumulative_falls, r.cumulative_oob))
}

/// Mean return of the episodes that start in the last fifth of a run's steps.
pub fn final_return(records: &[RunRecord]) -> f64 {
    let total: u64 = records.iter().map(|r| r.steps).sum();
    let cutoff = total - total / 5;
    let mut done = 0;
    let mut tail = Vec::new();
    for r in records {
        if done >= cutoff {
            tail.push(r.episode_return);
        }
        done += r.steps;
    }
    if tail.is_empty() {
        0.0
    } else {
        tail.iter().sum::<f64>() / tail.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Band {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

impl Band {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self {
                mean: 0.0,
                min: 0.0,
                max: 0.0,
            };
        }
        Self {
            mean: values.iter().sum::<f64>() / values.len() as f64,
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OobRow {
    pub workspace: String,
    pub mode: String,
    pub seeds: usize,
    pub mean_oob: f64,
    pub min_oob: f64,
    pub max_oob: f64,
    pub mean_falls: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OobAblation {
    pub rows: Vec<OobRow>,
    /// `(label, concatenated per-seed curves)` per workspace and mode.
    pub curves: Vec<(String, Vec<RunRecord>)>,
}

impl OobAblation {
    pub fn row(&self, workspace: Workspace, mode: &str) -> Option<&OobRow> {
        let label = workspace.label();
        self.rows
            .iter()
            .find(|r| r.workspace == label && r.mode == mode)
    }
}

pub const OOB_MODES: [&str; 2] = ["multi_task", "single_task"];

/// Two-task center scheduling against the single-task baseline on the three
/// workspace presets, flat terrain, every configured seed.
pub fn run_ablation_oob(base: &ExperimentConfig) -> Result<OobAblation, HarnessError> {
    let mut jobs = Vec::new();
    for ws in Workspace::PRESETS {
        for mode in OOB_MODES {
            for &seed in &base.experiment.seeds {
                let mut c = base.session(seed);
                c.terrain = TerrainKind::Flat;
                c.workspace = ws;
                c.task_set = TaskSetPreset::TwoTask;
                if mode == "multi_task" {
                    c.scheduler = SchedulerMode::Center;
                    c.boundary_termination = true;
                } else {
                    c.scheduler = SchedulerMode::SingleTask;
                    c.boundary_termination = false;
                }
                jobs.push(c);
            }
        }
    }
    let logs = run_sessions(jobs, base.experiment.workers)?;
    let per = base.experiment.seeds.len();
    let mut rows = Vec::new();
    let mut curves = Vec::new();
    let mut chunks = logs.chunks(per);
    for ws in Workspace::PRESETS {
        for mode in OOB_MODES {
            let runs = chunks.next().expect("one chunk per cell");
            let oob: Vec<f64> = runs.iter().map(|r| last_cumulative(r).1 as f64).collect();
            let falls: Vec<f64> = runs.iter().map(|r| last_cumulative(r).0 as f64).collect();
            let band = Band::of(&oob);
            rows.push(OobRow {
                workspace: ws.label(),
                mode: mode.to_string(),
                seeds: per,
                mean_oob: band.mean,
                min_oob: band.min,
                max_oob: band.max,
                mean_falls: Band::of(&falls).mean,
            });
            curves.push((format!("{mode}_{}", ws.label()), runs.concat()));
        }
    }
    Ok(OobAblation { rows, curves })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SafetyRow {
    pub mode: String,
    pub seeds: usize,
    pub mean_falls: f64,
    pub min_falls: f64,
    pub max_falls: f64,
    pub mean_final_return: f64,
    pub min_final_return: f64,
    pub max_final_return: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SafetyAblation {
    pub rows: Vec<SafetyRow>,
    pub curves: Vec<(String, Vec<RunRecord>)>,
    /// Final learner snapshots, one per seed, per mode.
    pub checkpoints: Vec<(String, Vec<Checkpoint>)>,
}

impl SafetyAblation {
    pub fn row(&self, mode: SafetyMode) -> Option<&SafetyRow> {
        let label = mode.label();
        self.rows.iter().find(|r| r.mode == label)
    }
}

pub const SAFETY_MODES: [SafetyMode; 4] = [
    SafetyMode::Lagrangian,
    SafetyMode::FixedWeight(0.0),
    SafetyMode::FixedWeight(1.0),
    SafetyMode::FixedWeight(100.0),
];

/// Learned constraint against fixed shaping weights, flat terrain, every seed.
pub fn run_ablation_safety(base: &ExperimentConfig) -> Result<SafetyAblation, HarnessError> {
    let mut jobs = Vec::new();
    for mode in SAFETY_MODES {
        for &seed in &base.experiment.seeds {
            let mut c = base.session(seed);
            c.terrain = TerrainKind::Flat;
            c.safety = mode;
            jobs.push(c);
        }
    }
    let results = parallel_map(jobs, base.experiment.workers, |c| {
        training_session(c).map(|s| (s.records.clone(), Checkpoint::from_session(&s)))
    });
    let mut logs = Vec::with_capacity(results.len());
    let mut snapshots = Vec::with_capacity(results.len());
    for r in results {
        let (records, ckpt) = r?;
        logs.push(records);
        snapshots.push(ckpt);
    }
    let per = base.experiment.seeds.len();
    let mut rows = Vec::new();
    let mut curves = Vec::new();
    let mut checkpoints = Vec::new();
    for ((mode, runs), ckpts) in SAFETY_MODES
        .iter()
        .zip(logs.chunks(per))
        .zip(snapshots.chunks(per))
    {
        let falls: Vec<f64> = runs.iter().map(|r| last_cumulative(r).0 as f64).collect();
        let finals: Vec<f64> = runs.iter().map(|r| final_return(r)).collect();
        let (f, r) = (Band::of(&falls), Band::of(&finals));
        rows.push(SafetyRow {
            mode: mode.label(),
            seeds: per,
            mean_falls: f.mean,
            min_falls: f.min,
            max_falls: f.max,
            mean_final_return: r.mean,
            min_final_return: r.min,
            max_final_return: r.max,
        });
        curves.push((mode.label(), runs.concat()));
        checkpoints.push((mode.label(), ckpts.to_vec()));
    }
    Ok(SafetyAblation {
        rows,
        curves,
        checkpoints,
    })
}

/// `summary.csv` plus one `curves_<label>.csv` per cell.
pub fn write_ablation<T: Serialize>(
    dir: &Path,
    rows: &[T],
    curves: &[(String, Vec<RunRecord>)],
) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    records::write_table(&dir.join("summary.csv"), rows)?;
    for (label, recs) in curves {
        records::write_curves_file(&dir.join(format!("curves_{label}.csv")), recs)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_map_keeps_order() {
        let out = parallel_map((0..20).collect(), 3, |i: u64| i * i);
        assert_eq!(out, (0..20).map(|i| i * i).collect::<Vec<_>>());
        let empty: Vec<u64> = parallel_map(Vec::<u64>::new(), 0, |i| i);
        assert!(empty.is_empty());
    }

    #[test]
    fn final_return_uses_the_tail() {
        let rec = |steps, ret| RunRecord {
            seed: 0,
            episode: 0,
            task: "forward".into(),
            steps,
            episode_return: ret,
            cumulative_falls: 0,
            cumulative_oob: 0,
            cumulative_sim_time: 0.0,
            lambda: 0.0,
            alpha: 1.0,
        };
        let records = vec![rec(40, 1.0), rec(40, 2.0), rec(10, 3.0), rec(10, 5.0)];
        // 100 steps; the tail starts at step 80.
        assert_eq!(final_return(&records), 4.0);
        assert_eq!(final_return(&[]), 0.0);
    }

    #[test]
    fn zero_budget_ablations_are_all_zero() {
        let mut base = ExperimentConfig::default();
        base.experiment.steps_per_task = 0;
        base.experiment.seeds = vec![0, 1];
        let oob = run_ablation_oob(&base).unwrap();
        assert_eq!(oob.rows.len(), 6);
        assert!(oob
            .rows
            .iter()
            .all(|r| r.mean_oob == 0.0 && r.max_oob == 0.0));
        let safety = run_ablation_safety(&base).unwrap();
        assert_eq!(safety.rows.len(), 4);
        assert!(safety.rows.iter().all(|r| r.mean_falls == 0.0));
    }
}
