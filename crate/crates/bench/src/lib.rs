//! Shared fixtures for the criterion benches under `benches/`.

use nmmp::datasets::synthesize_interacting_scenes;
use nmmp::{JointSceneSample, SceneSample, SynthOptions, SynthRule};

/// One leader/follower scene with `actors` pedestrians.
pub fn scene(actors: usize) -> SceneSample {
    synthesize_interacting_scenes(1, actors, SynthRule::LeaderFollower, 11, &SynthOptions::default()).remove(0)
}

/// One synthetic driving scene with the default 5 observed and 30 future steps.
pub fn joint_scene() -> JointSceneSample {
    nmmp::joint::synthesize_joint_scenes(1, 5, 30, 0.1, 11).remove(0)
}
