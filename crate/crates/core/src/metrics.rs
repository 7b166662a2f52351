//! Displacement errors, best-of-k selection and report aggregation.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::joint::{JointModel, JointSceneSample};
use crate::pedestrian::{sample_noise_from, PedestrianModel};
use crate::tensor::Scalar;
use crate::trajectory::{Point, SceneSample, Units};

/// Default number of samples for stochastic evaluation.
pub const DEFAULT_K: usize = 20;

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn check_len(pred: &[Point], gt: &[Point]) -> Result<()> {
    if pred.len() != gt.len() {
        return Err(Error::Shape(format!("prediction has {} steps, ground truth {}", pred.len(), gt.len())));
    }
    if pred.is_empty() {
        return Err(Error::Shape("empty trajectory".into()));
    }
    Ok(())
}

pub fn ade(pred: &[Point], gt: &[Point]) -> Result<f64> {
    check_len(pred, gt)?;
    Ok(pred.iter().zip(gt).map(|(&a, &b)| dist(a, b)).sum::<f64>() / pred.len() as f64)
}

pub fn fde(pred: &[Point], gt: &[Point]) -> Result<f64> {
    check_len(pred, gt)?;
    Ok(dist(*pred.last().unwrap(), *gt.last().unwrap()))
}

/// Mean over actors of per-actor ADE and FDE.
pub fn scene_errors(pred: &[Vec<Point>], gt: &[Vec<Point>]) -> Result<(f64, f64)> {
    if pred.len() != gt.len() || pred.is_empty() {
        return Err(Error::Shape(format!("{} predicted actors for {} ground-truth actors", pred.len(), gt.len())));
    }
    let mut sa = 0.0;
    let mut sf = 0.0;
    for (p, g) in pred.iter().zip(gt) {
        sa += ade(p, g)?;
        sf += fde(p, g)?;
    }
    let n = pred.len() as f64;
    Ok((sa / n, sf / n))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BestOfK {
    pub ade: f64,
    pub fde: f64,
    pub index: usize,
    pub k: usize,
}

/// Picks the candidate with the lowest scene ADE (first index on ties) and reports its
/// ADE and FDE.
pub fn select_best(candidates: &[Vec<Vec<Point>>], gt: &[Vec<Point>]) -> Result<BestOfK> {
    if candidates.is_empty() {
        return Err(Error::InvalidInput("best-of-k needs k >= 1".into()));
    }
    let mut best: Option<BestOfK> = None;
    for (i, c) in candidates.iter().enumerate() {
        let (a, f) = scene_errors(c, gt)?;
        if best.as_ref().is_none_or(|b| a < b.ade) {
            best = Some(BestOfK { ade: a, fde: f, index: i, k: candidates.len() });
        }
    }
    Ok(best.expect("non-empty"))
}

/// A forecaster that can draw samples from an explicit random stream.
pub trait StochasticPredictor {
    fn sample(&self, scene: &SceneSample, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<Point>>>;
}

impl<T: Scalar> StochasticPredictor for PedestrianModel<T> {
    fn sample(&self, scene: &SceneSample, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<Point>>> {
        let noise = sample_noise_from(rng, scene.n_actors(), self.config.noise_dim);
        Ok(self.generate(scene, &noise)?.predicted)
    }
}

/// Draws `k` samples from one stream seeded with `seed` (so the first `k` draws of a
/// larger `k` coincide) and keeps the best by scene ADE.
pub fn best_of_k<M: StochasticPredictor + ?Sized>(
    model: &M,
    scene: &SceneSample,
    k: usize,
    seed: u64,
) -> Result<BestOfK> {
    if k == 0 {
        return Err(Error::InvalidInput("best-of-k needs k >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut candidates = Vec::with_capacity(k);
    for _ in 0..k {
        candidates.push(model.sample(scene, &mut rng)?);
    }
    select_best(&candidates, &scene.futures())
}

pub fn normalization_ratio(baseline: f64, ours: f64) -> Result<f64> {
    if !(baseline > 0.0) {
        return Err(Error::InvalidInput(format!("baseline metric {baseline} must be positive")));
    }
    Ok((baseline - ours) / baseline)
}

/// Running ADE/FDE sums weighted per actor.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ErrorAccumulator {
    pub ade_sum: f64,
    pub fde_sum: f64,
    pub actors: usize,
    pub scenes: usize,
}

impl ErrorAccumulator {
    /// Adds one scene whose per-actor mean errors are `(ade, fde)`.
    pub fn add_scene(&mut self, ade: f64, fde: f64, n_actors: usize) {
        self.ade_sum += ade * n_actors as f64;
        self.fde_sum += fde * n_actors as f64;
        self.actors += n_actors;
        self.scenes += 1;
    }

    pub fn merge(&mut self, other: &Self) {
        self.ade_sum += other.ade_sum;
        self.fde_sum += other.fde_sum;
        self.actors += other.actors;
        self.scenes += other.scenes;
    }

    pub fn summary(&self) -> Option<(f64, f64)> {
        (self.actors > 0).then(|| (self.ade_sum / self.actors as f64, self.fde_sum / self.actors as f64))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BucketReport {
    /// Inclusive lower bound on actor count.
    pub min_actors: usize,
    /// Exclusive upper bound; `None` is unbounded.
    pub max_actors: Option<usize>,
    pub ade: Option<f64>,
    pub fde: Option<f64>,
    pub scenes: usize,
    pub actors: usize,
    pub empty: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetReport {
    pub ade: f64,
    pub fde: f64,
    pub scenes: usize,
    pub actors: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub ade: f64,
    pub fde: f64,
    pub units: Units,
    /// Samples per scene; 1 for single-sample evaluation.
    pub k: usize,
    /// `best_of_k` or `single`.
    pub mode: String,
    pub scenes: usize,
    pub samples: usize,
    #[serde(default)]
    pub sets: BTreeMap<String, SetReport>,
    #[serde(default)]
    pub buckets: Vec<BucketReport>,
}

impl MetricsReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Groups scenes by actor count into buckets `[edges[i], edges[i+1])`, the last one
/// unbounded; `errors[s]` are scene `s`'s mean `(ade, fde)`.
pub fn crowd_split_report(
    scenes: &[SceneSample],
    errors: &[(f64, f64)],
    bucket_edges: &[usize],
) -> Result<Vec<BucketReport>> {
    if scenes.len() != errors.len() {
        return Err(Error::Shape(format!("{} scenes but {} error entries", scenes.len(), errors.len())));
    }
    if bucket_edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("bucket edges must increase".into()));
    }
    Ok(bucket_edges
        .iter()
        .enumerate()
        .map(|(b, &lo)| {
            let hi = bucket_edges.get(b + 1).copied();
            let mut acc = ErrorAccumulator::default();
            for (s, &(a, f)) in scenes.iter().zip(errors) {
                let n = s.n_actors();
                if n >= lo && hi.is_none_or(|h| n < h) {
                    acc.add_scene(a, f, n);
                }
            }
            let summary = acc.summary();
            BucketReport {
                min_actors: lo,
                max_actors: hi,
                ade: summary.map(|s| s.0),
                fde: summary.map(|s| s.1),
                scenes: acc.scenes,
                actors: acc.actors,
                empty: acc.scenes == 0,
            }
        })
        .collect())
}

/// Evaluates a stochastic model over named scene sets with best-of-k (or one sample
/// when `k == 1`). Scene `i` of the whole evaluation uses seed `seed + i`.
pub fn evaluate<M: StochasticPredictor + ?Sized>(
    model: &M,
    sets: &[(String, Vec<SceneSample>)],
    k: usize,
    seed: u64,
    units: Units,
    bucket_edges: &[usize],
) -> Result<MetricsReport> {
    let mut total = ErrorAccumulator::default();
    let mut per_set = BTreeMap::new();
    let mut all_scenes = Vec::new();
    let mut all_errors = Vec::new();
    let mut idx = 0u64;
    for (name, scenes) in sets {
        let mut acc = ErrorAccumulator::default();
        for s in scenes {
            let b = best_of_k(model, s, k, seed.wrapping_add(idx))?;
            idx += 1;
            acc.add_scene(b.ade, b.fde, s.n_actors());
            all_scenes.push(s.clone());
            all_errors.push((b.ade, b.fde));
        }
        if let Some((a, f)) = acc.summary() {
            per_set.insert(name.clone(), SetReport { ade: a, fde: f, scenes: acc.scenes, actors: acc.actors });
        }
        total.merge(&acc);
    }
    let (ade, fde) = total.summary().ok_or_else(|| Error::InvalidInput("no scenes to evaluate".into()))?;
    Ok(MetricsReport {
        ade,
        fde,
        units,
        k,
        mode: if k == 1 { "single".into() } else { "best_of_k".into() },
        scenes: total.scenes,
        samples: total.actors,
        sets: per_set,
        buckets: if bucket_edges.is_empty() {
            Vec::new()
        } else {
            crowd_split_report(&all_scenes, &all_errors, bucket_edges)?
        },
    })
}

/// Deterministic joint evaluation (single hypothesis per scene).
pub fn evaluate_joint<T: Scalar>(model: &JointModel<T>, scenes: &[JointSceneSample]) -> Result<MetricsReport> {
    let mut acc = ErrorAccumulator::default();
    for s in scenes {
        let pred = model.predict_joint(s)?;
        let gt: Vec<Vec<Point>> = s.actors.iter().map(|a| a.future.clone()).collect();
        let (a, f) = scene_errors(&pred.predicted, &gt)?;
        acc.add_scene(a, f, s.n_actors());
    }
    let (ade, fde) = acc.summary().ok_or_else(|| Error::InvalidInput("no scenes to evaluate".into()))?;
    Ok(MetricsReport {
        ade,
        fde,
        units: Units::Meters,
        k: 1,
        mode: "single".into(),
        scenes: acc.scenes,
        samples: acc.actors,
        sets: BTreeMap::new(),
        buckets: Vec::new(),
    })
}
