use rand::Rng;

use crate::error::{Error, Result};

use super::{Event, RewardTerms, StepResult};

pub const GAP_HORIZON: u32 = 16;
pub const GAP_HEIGHTS: [f64; 4] = [0.2, 0.3, 0.4, 0.5];

const LENGTH: f64 = 4.0;
const EDGE: f64 = 2.0;
const LANDING: f64 = 2.2;
const STRIDE: f64 = 0.5;
const ALIVE: f64 = 0.2;
const FAIL_PENALTY: f64 = 8.0;
const GOAL_BONUS: f64 = 8.0;

/// Probability that an attempt at an obstacle of height `h` succeeds.
pub fn success_probability(height: f64) -> f64 {
    (1.3 - 2.0 * height).clamp(0.05, 0.95)
}

/// A line `[0, 4]` with an obstacle at `x = 2`. The first time the agent
/// reaches the obstacle it attempts it once: success lands at 2.2, failure
/// ends the episode.
#[derive(Debug, Clone, PartialEq)]
pub struct GapStep {
    x: f64,
    height: f64,
    fixed_height: Option<f64>,
    attempted: bool,
    t: u32,
    done: bool,
}

impl GapStep {
    pub fn new(fixed_height: Option<f64>) -> Self {
        Self {
            x: 0.0,
            height: fixed_height.unwrap_or(GAP_HEIGHTS[0]),
            fixed_height,
            attempted: false,
            t: 0,
            done: false,
        }
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    pub fn attempted(&self) -> bool {
        self.attempted
    }

    pub fn fixed_height(&self) -> Option<f64> {
        self.fixed_height
    }

    pub fn reset<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Vec<f64> {
        let height = match self.fixed_height {
            Some(h) => h,
            None => GAP_HEIGHTS[rng.random_range(0..GAP_HEIGHTS.len())],
        };
        self.reset_with_height(height)
    }

    pub fn reset_with_height(&mut self, height: f64) -> Vec<f64> {
        self.x = 0.0;
        self.height = height;
        self.attempted = false;
        self.t = 0;
        self.done = false;
        self.observation()
    }

    pub fn observation(&self) -> Vec<f64> {
        vec![self.x / LENGTH, self.height]
    }

    pub fn step_with(&mut self, action: &[f64], coin: &mut dyn FnMut(f64) -> bool) -> Result<StepResult> {
        if self.done {
            return Err(Error::Env {
                lane: 0,
                message: "step called on a finished episode".into(),
            });
        }
        if action.len() != 1 || !action[0].is_finite() {
            return Err(Error::Env {
                lane: 0,
                message: format!("invalid action {action:?}"),
            });
        }
        let action_clamped = action[0].abs() > 1.0;
        let a = action[0].clamp(-1.0, 1.0);
        let mut x = (self.x + STRIDE * a).clamp(0.0, LENGTH);
        self.t += 1;

        let mut event = None;
        let mut terminated = false;
        let (mut progress, mut alive, mut fail) = (0.0, ALIVE, 0.0);
        if !self.attempted && x >= EDGE {
            self.attempted = true;
            if coin(success_probability(self.height)) {
                x = LANDING;
                event = Some(Event::Crossed);
            } else {
                alive = 0.0;
                fail = -FAIL_PENALTY;
                event = Some(Event::Failed);
                terminated = true;
            }
        }
        if !terminated && x >= LENGTH {
            progress = GOAL_BONUS;
            event = Some(Event::Goal);
            terminated = true;
        }
        self.x = x;
        let truncated = !terminated && self.t >= GAP_HORIZON;
        if truncated && !self.attempted {
            event = Some(Event::Refused);
        }
        self.done = terminated || truncated;

        let terms = RewardTerms::new(vec![("progress", progress), ("alive", alive), ("fall", fail)]);
        Ok(StepResult {
            observation: self.observation(),
            reward: terms.total(),
            terms,
            terminated,
            truncated,
            event,
            action_clamped,
        })
    }
}
