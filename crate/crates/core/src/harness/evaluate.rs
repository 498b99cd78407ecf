//! Deterministic policy evaluation.

use serde::Serialize;

use super::{Checkpoint, HarnessError};
use crate::env::{
    wrap_angle, Dynamics, ResetMode, Terrain, TerrainKind, TraceRecord, Walker, Workspace,
};
use crate::tasks::{compose_controller, ComposeOptions, Controller, EpisodeFrame};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    pub episodes: usize,
    pub seed: u64,
    pub horizon: usize,
    /// `None` evaluates in an open field: walls never end an episode.
    pub workspace: Option<Workspace>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            episodes: 5,
            seed: 0,
            horizon: crate::tasks::DEFAULT_HORIZON,
            workspace: None,
        }
    }
}

/// Far larger than any distance covered in one episode.
const OPEN_FIELD: Workspace = Workspace::from_size(1.0e6, 1.0e6);

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaskStats {
    pub task: String,
    pub episodes: usize,
    pub mean_return: f64,
    pub min_return: f64,
    pub max_return: f64,
    pub mean_steps: f64,
    pub falls: u64,
    pub escapes: u64,
    /// Along the episode-start heading, meters.
    pub mean_displacement: f64,
    /// Accumulated wrapped yaw increments, radians.
    pub mean_yaw_change: f64,
}

/// Rolls out each task's deterministic policy. An episode ends at a fall,
/// on leaving the workspace, or at the horizon; every episode starts at the
/// center with a seeded random heading.
pub fn evaluate_controller(
    controller: &Controller,
    terrain: TerrainKind,
    dynamics: Dynamics,
    options: &EvalOptions,
) -> Result<Vec<TaskStats>, HarnessError> {
    let workspace = options.workspace.unwrap_or(OPEN_FIELD);
    let mut stats = Vec::with_capacity(controller.tasks.len());
    for (k, task) in controller.tasks.tasks.iter().enumerate() {
        let seed = options.seed.wrapping_mul(1_000_003).wrapping_add(k as u64);
        let mut walker = Walker::new(Terrain::of(terrain), workspace, dynamics, seed);
        let mut returns = Vec::with_capacity(options.episodes);
        let (mut steps, mut falls, mut escapes) = (0u64, 0u64, 0u64);
        let (mut displacement, mut yaw_change) = (0.0, 0.0);
        for _ in 0..options.episodes {
            walker.reset(ResetMode::AfterFall);
            let start = walker.state().pose();
            let frame = EpisodeFrame::at(start);
            let mut cursor = ComposeOptions::start(&walker, k);
            let mut ret = 0.0;
            let mut last = start;
            for _ in 0..options.horizon {
                let rec = controller.step(&mut walker, &mut cursor)?;
                ret += rec.reward;
                steps += 1;
                if rec.events.fall {
                    falls += 1;
                    break;
                }
                yaw_change += wrap_angle(rec.yaw - last.yaw);
                last = crate::env::Pose {
                    x: rec.x,
                    y: rec.y,
                    yaw: rec.yaw,
                };
                if rec.events.out_of_workspace {
                    escapes += 1;
                    break;
                }
            }
            displacement += frame.to_local([last.x - start.x, last.y - start.y])[0];
            returns.push(ret);
        }
        let n = options.episodes.max(1) as f64;
        stats.push(TaskStats {
            task: task.name.clone(),
            episodes: options.episodes,
            mean_return: returns.iter().sum::<f64>() / n,
            min_return: returns.iter().copied().fold(f64::INFINITY, f64::min),
            max_return: returns.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean_steps: steps as f64 / n,
            falls,
            escapes,
            mean_displacement: displacement / n,
            mean_yaw_change: yaw_change / n,
        });
    }
    Ok(stats)
}

pub fn evaluate_policy(
    ckpt: &Checkpoint,
    options: &EvalOptions,
) -> Result<Vec<TaskStats>, HarnessError> {
    evaluate_controller(
        &ckpt.controller()?,
        ckpt.config.terrain,
        ckpt.config.dynamics,
        options,
    )
}

/// Follows a per-step command stream from the workspace center.
pub fn evaluate_commands<'a, I>(
    ckpt: &Checkpoint,
    commands: I,
    seed: u64,
) -> Result<Vec<TraceRecord>, HarnessError>
where
    I: IntoIterator<Item = &'a str>,
{
    let controller = ckpt.controller()?;
    let mut walker = Walker::new(
        Terrain::of(ckpt.config.terrain),
        OPEN_FIELD,
        ckpt.config.dynamics,
        seed,
    );
    walker.reset(ResetMode::AfterFall);
    Ok(compose_controller(&controller, &mut walker, commands)?)
}
