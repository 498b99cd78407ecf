use super::{task_reward, EpisodeFrame, TaskError, TaskSet};
use crate::approx::GaussianPolicyHead;
use crate::env::{Action, ResetMode, StepEvents, TraceRecord, Walker, ACTION_DIM};

/// One deterministic policy per task, switchable step by step.
#[derive(Debug, Clone, PartialEq)]
pub struct Controller {
    pub tasks: TaskSet,
    pub policies: Vec<GaussianPolicyHead>,
    pub reward_scale: f64,
}

/// Rollout bookkeeping carried across [`Controller::step`] calls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComposeOptions {
    pub task: usize,
    pub frame: EpisodeFrame,
    pub t: u64,
    pub falls: u64,
}

impl ComposeOptions {
    pub fn start(walker: &Walker, task: usize) -> Self {
        Self {
            task,
            frame: EpisodeFrame::at(walker.state().pose()),
            t: 0,
            falls: 0,
        }
    }
}

impl Controller {
    pub fn new(
        tasks: TaskSet,
        policies: Vec<GaussianPolicyHead>,
        reward_scale: f64,
    ) -> Result<Self, TaskError> {
        if tasks.len() != policies.len() {
            return Err(TaskError::ControllerCount {
                expected: tasks.len(),
                got: policies.len(),
            });
        }
        Ok(Self {
            tasks,
            policies,
            reward_scale,
        })
    }

    /// Switches the active task; the reward frame restarts at the current pose.
    pub fn switch(
        &self,
        walker: &Walker,
        cursor: &mut ComposeOptions,
        name: &str,
    ) -> Result<(), TaskError> {
        let k = self.tasks.index_of(name)?;
        if k != cursor.task {
            cursor.task = k;
            cursor.frame = EpisodeFrame::at(walker.state().pose());
        }
        Ok(())
    }

    /// Executes one step of the active policy. A fall is recorded in the
    /// returned events and the walker is put back at the center.
    pub fn step(
        &self,
        walker: &mut Walker,
        cursor: &mut ComposeOptions,
    ) -> Result<TraceRecord, TaskError> {
        let obs = walker.observation();
        let mean = self.policies[cursor.task].deterministic(&obs)?;
        let mut action: Action = [0.0; ACTION_DIM];
        action.copy_from_slice(&mean);
        let [prev1, prev2] = walker.state().prev_actions;
        let out = walker.step(&action)?;
        let reward = self.reward_scale
            * task_reward(
                &cursor.frame,
                &out.pose_before,
                &out.pose_after,
                &[prev2, prev1, action],
                &self.tasks.tasks[cursor.task],
            );
        cursor.t += 1;
        let events: StepEvents = out.events;
        let record = TraceRecord {
            t: cursor.t,
            x: out.pose_after.x,
            y: out.pose_after.y,
            yaw: out.pose_after.yaw,
            roll: out.state.roll,
            pitch: out.state.pitch,
            action: action.to_vec(),
            reward,
            f_s: out.safety,
            events,
        };
        if events.fall {
            cursor.falls += 1;
            walker.reset(ResetMode::AfterFall);
            cursor.frame = EpisodeFrame::at(walker.state().pose());
        }
        Ok(record)
    }
}

/// Follows one task name per step; the trace has one record per command.
pub fn compose_controller<'a, I>(
    controller: &Controller,
    walker: &mut Walker,
    commands: I,
) -> Result<Vec<TraceRecord>, TaskError>
where
    I: IntoIterator<Item = &'a str>,
{
    let mut trace = Vec::new();
    let mut cursor: Option<ComposeOptions> = None;
    for name in commands {
        let k = controller.tasks.index_of(name)?;
        let c = cursor.get_or_insert_with(|| ComposeOptions::start(walker, k));
        controller.switch(walker, c, name)?;
        trace.push(controller.step(walker, c)?);
    }
    Ok(trace)
}
