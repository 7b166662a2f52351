//! Trajectory windows and scene samples shared by every predictor.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ActorType {
    #[default]
    Pedestrian,
    Vehicle,
    Other,
}

impl ActorType {
    pub const ALL: [ActorType; 3] = [ActorType::Pedestrian, ActorType::Vehicle, ActorType::Other];

    /// Parses a type tag; anything unrecognised is `Other`.
    pub fn from_tag(tag: &str) -> Self {
        match tag.to_ascii_lowercase().as_str() {
            "pedestrian" | "ped" | "human" => ActorType::Pedestrian,
            "vehicle" | "car" | "truck" | "bus" => ActorType::Vehicle,
            _ => ActorType::Other,
        }
    }

    pub fn index(self) -> usize {
        match self {
            ActorType::Pedestrian => 0,
            ActorType::Vehicle => 1,
            ActorType::Other => 2,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Units {
    #[default]
    Meters,
    Pixels,
}

impl Units {
    pub fn as_str(self) -> &'static str {
        match self {
            Units::Meters => "meters",
            Units::Pixels => "pixels",
        }
    }
}

/// One actor's observed and future coordinates. `observed` holds `T_obs + 1` points
/// ending at the current time `t = 0`; `future` holds `T_pred` points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryWindow {
    pub actor_id: String,
    #[serde(default)]
    pub actor_type: ActorType,
    pub observed: Vec<Point>,
    pub future: Vec<Point>,
    pub timestep: f64,
}

impl TrajectoryWindow {
    pub fn new(actor_id: impl Into<String>, observed: Vec<Point>, future: Vec<Point>, timestep: f64) -> Self {
        Self { actor_id: actor_id.into(), actor_type: ActorType::Pedestrian, observed, future, timestep }
    }

    pub fn with_type(mut self, actor_type: ActorType) -> Self {
        self.actor_type = actor_type;
        self
    }

    pub fn t_obs(&self) -> usize {
        self.observed.len().saturating_sub(1)
    }

    pub fn t_pred(&self) -> usize {
        self.future.len()
    }

    /// Position at `t = 0`.
    pub fn current(&self) -> Point {
        *self.observed.last().expect("window has no observed points")
    }

    /// Displacements `p(t) - p(t-1)` for `t = -T_obs+1 ..= 0`.
    pub fn observed_displacements(&self) -> Vec<Point> {
        displacements(&self.observed)
    }

    /// Observed followed by future points.
    pub fn complete(&self) -> Vec<Point> {
        let mut all = self.observed.clone();
        all.extend_from_slice(&self.future);
        all
    }

    pub fn validate(&self, t_obs: usize, t_pred: usize) -> Result<()> {
        if self.observed.len() != t_obs + 1 {
            return Err(Error::Shape(format!(
                "actor {}: observed length {} != T_obs+1 = {}",
                self.actor_id,
                self.observed.len(),
                t_obs + 1
            )));
        }
        if self.future.len() != t_pred {
            return Err(Error::Shape(format!(
                "actor {}: future length {} != T_pred = {}",
                self.actor_id,
                self.future.len(),
                t_pred
            )));
        }
        self.check_finite()
    }

    pub fn check_finite(&self) -> Result<()> {
        let finite = self.observed.iter().chain(&self.future).all(|p| p[0].is_finite() && p[1].is_finite());
        if !finite {
            return Err(Error::InvalidInput(format!("actor {}: non-finite coordinate", self.actor_id)));
        }
        Ok(())
    }

    pub fn translated(&self, offset: Point) -> Self {
        let shift = |p: &Point| [p[0] + offset[0], p[1] + offset[1]];
        Self {
            observed: self.observed.iter().map(shift).collect(),
            future: self.future.iter().map(shift).collect(),
            ..self.clone()
        }
    }
}

pub fn displacements(points: &[Point]) -> Vec<Point> {
    points.windows(2).map(|w| [w[1][0] - w[0][0], w[1][1] - w[0][1]]).collect()
}

/// All co-visible actors of one time window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneSample {
    pub id: String,
    pub windows: Vec<TrajectoryWindow>,
    pub timestep: f64,
    #[serde(default)]
    pub units: Units,
}

impl SceneSample {
    pub fn new(id: impl Into<String>, windows: Vec<TrajectoryWindow>, timestep: f64, units: Units) -> Self {
        Self { id: id.into(), windows, timestep, units }
    }

    pub fn n_actors(&self) -> usize {
        self.windows.len()
    }

    pub fn t_obs(&self) -> usize {
        self.windows.first().map_or(0, TrajectoryWindow::t_obs)
    }

    pub fn t_pred(&self) -> usize {
        self.windows.first().map_or(0, TrajectoryWindow::t_pred)
    }

    /// Checks that the scene is non-empty and every window shares the same lengths
    /// and timestep.
    pub fn validate(&self) -> Result<()> {
        if self.windows.is_empty() {
            return Err(Error::InvalidInput(format!("scene {} has no actors", self.id)));
        }
        let (t_obs, t_pred) = (self.t_obs(), self.t_pred());
        for w in &self.windows {
            w.validate(t_obs, t_pred)?;
            if (w.timestep - self.timestep).abs() > 1e-9 {
                return Err(Error::InvalidInput(format!(
                    "scene {}: actor {} timestep {} differs from scene timestep {}",
                    self.id, w.actor_id, w.timestep, self.timestep
                )));
            }
        }
        Ok(())
    }

    pub fn translated(&self, offset: Point) -> Self {
        Self { windows: self.windows.iter().map(|w| w.translated(offset)).collect(), ..self.clone() }
    }

    pub fn futures(&self) -> Vec<Vec<Point>> {
        self.windows.iter().map(|w| w.future.clone()).collect()
    }
}
