use crate::error::{Error, Result};

use super::{Event, RewardTerms, StepResult};

pub const CLIFF_HORIZON: u32 = 40;
pub const P_FALL: f64 = 0.02;

const WIDTH: f64 = 10.0;
const HEIGHT: f64 = 4.0;
const START: (f64, f64) = (0.0, 2.0);
const HAZARD_Y: f64 = 1.0;
const STEP_COST: f64 = 0.5;
const FALL_PENALTY: f64 = 10.0;
const GOAL_BONUS: f64 = 10.0;

/// Field `[0, 10] x [0, 4]` entered at `(0, 2)`. Moving at speed 2 is
/// possible from inside the hazard strip `y < 1`; every step that ends in
/// the strip falls with probability `p_fall`.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskyCliff {
    x: f64,
    y: f64,
    t: u32,
    p_fall: f64,
    done: bool,
}

impl RiskyCliff {
    pub fn new(p_fall: f64) -> Self {
        Self {
            x: START.0,
            y: START.1,
            t: 0,
            p_fall,
            done: false,
        }
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn t(&self) -> u32 {
        self.t
    }

    pub fn p_fall(&self) -> f64 {
        self.p_fall
    }

    pub fn reset(&mut self) -> Vec<f64> {
        self.x = START.0;
        self.y = START.1;
        self.t = 0;
        self.done = false;
        self.observation()
    }

    pub fn observation(&self) -> Vec<f64> {
        vec![self.x / WIDTH, self.y / HEIGHT]
    }

    pub fn step_with(&mut self, action: &[f64], coin: &mut dyn FnMut(f64) -> bool) -> Result<StepResult> {
        if self.done {
            return Err(Error::Env {
                lane: 0,
                message: "step called on a finished episode".into(),
            });
        }
        if action.len() != 2 || action.iter().any(|a| !a.is_finite()) {
            return Err(Error::Env {
                lane: 0,
                message: format!("invalid action {action:?}"),
            });
        }
        let action_clamped = action.iter().any(|a| a.abs() > 1.0);
        let ax = action[0].clamp(-1.0, 1.0);
        let ay = action[1].clamp(-1.0, 1.0);

        let speed = if self.y < HAZARD_Y { 2.0 } else { 1.0 };
        let x = (self.x + speed * ax).clamp(0.0, WIDTH);
        let y = (self.y + speed * ay).clamp(0.0, HEIGHT);
        let dx = x - self.x;
        self.x = x;
        self.y = y;
        self.t += 1;

        // progress is measured against a commanded unit speed; the alive
        // term makes the sum dx - 0.5
        let mut progress = dx - 1.0;
        let alive = 1.0 - STEP_COST;
        let mut fall = 0.0;
        let mut event = None;
        let mut terminated = false;
        if y < HAZARD_Y && self.p_fall > 0.0 && coin(self.p_fall) {
            fall = -FALL_PENALTY;
            event = Some(Event::Fell);
            terminated = true;
        } else if x >= WIDTH {
            progress += GOAL_BONUS;
            event = Some(Event::Goal);
            terminated = true;
        }
        let truncated = !terminated && self.t >= CLIFF_HORIZON;
        self.done = terminated || truncated;

        let terms = RewardTerms::new(vec![("progress", progress), ("alive", alive), ("fall", fall)]);
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
