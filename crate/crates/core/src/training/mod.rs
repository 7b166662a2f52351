//! Training loops, configuration and checkpoints.
//!
//! All training runs in `f32` on one thread. The training random stream (batch order,
//! generator noise) is a ChaCha8 stream seeded from `TrainConfig::seed` on stream 1;
//! weight initialisation uses stream 0 of the same seed. Checkpoints record the stream
//! position so a resumed run continues exactly where the saved one stopped.

pub mod checkpoint;
pub mod optim;

use std::collections::BTreeMap;
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, Var};
use crate::error::{Error, Result};
use crate::joint::{future_matrix, joint_loss_graph, JointConfig, JointModel, JointSceneSample};
use crate::nmmp::SceneGraph;
use crate::params::{Gradients, ParamId, ParamStore};
use crate::pedestrian::{
    discriminator_objective, generator_adversarial, l2_loss, sample_noise_from, trajectories_matrix, OutputBranch,
    PedestrianConfig, PedestrianModel,
};
use crate::tensor::{lit, Matrix};
use crate::trajectory::{Point, SceneSample, TrajectoryWindow};

pub use checkpoint::{Checkpoint, CheckpointMeta, OptimizerMeta};
pub use optim::{Adam, AdamSettings};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SystemKind {
    #[default]
    Pedestrian,
    Joint,
}

impl SystemKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SystemKind::Pedestrian => "pedestrian",
            SystemKind::Joint => "joint",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub system: SystemKind,
    pub seed: u64,
    pub epochs: usize,
    /// Stops after this many optimizer steps when set.
    pub max_steps: Option<u64>,
    /// Scenes per batch; 64 for pedestrian runs and 8 for joint runs when unset.
    pub batch_size: Option<usize>,
    pub lr_generator: f64,
    pub lr_discriminator: f64,
    pub lr_joint: f64,
    /// Weight of `-log D(fake)` in the generator objective; 0 gives pure L2.
    pub adv_weight: f64,
    /// Candidates for the best-of-k L2 term; 0 or 1 is plain L2.
    pub variety_k: usize,
    pub lambda: f64,
    /// Samples per scene at evaluation time.
    pub eval_k: usize,
    pub pedestrian: PedestrianConfig,
    pub joint: JointConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            system: SystemKind::Pedestrian,
            seed: 0,
            epochs: 100,
            max_steps: None,
            batch_size: None,
            lr_generator: 1e-3,
            lr_discriminator: 1e-3,
            lr_joint: 1e-3,
            adv_weight: 1.0,
            variety_k: 0,
            lambda: 0.5,
            eval_k: crate::metrics::DEFAULT_K,
            pedestrian: PedestrianConfig::default(),
            joint: JointConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::Config(format!("lambda {} outside [0, 1]", self.lambda)));
        }
        if self.seed > i64::MAX as u64 {
            return Err(Error::Config("seed must fit in a signed 64-bit integer".into()));
        }
        for (name, lr) in [
            ("lr_generator", self.lr_generator),
            ("lr_discriminator", self.lr_discriminator),
            ("lr_joint", self.lr_joint),
        ] {
            if !(lr >= 0.0 && lr.is_finite()) {
                return Err(Error::Config(format!("{name} = {lr} must be finite and non-negative")));
            }
        }
        if !(self.adv_weight >= 0.0 && self.adv_weight.is_finite()) {
            return Err(Error::Config("adv_weight must be finite and non-negative".into()));
        }
        if self.batch_size == Some(0) {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if self.eval_k == 0 {
            return Err(Error::Config("eval_k must be positive".into()));
        }
        match self.system {
            SystemKind::Pedestrian => self.pedestrian.validate(),
            SystemKind::Joint => self.joint.validate(),
        }
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size.unwrap_or(match self.system {
            SystemKind::Pedestrian => 64,
            SystemKind::Joint => 8,
        })
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// Per-epoch means of the logged losses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpochRecord {
    pub epoch: usize,
    pub steps: u64,
    pub losses: BTreeMap<String, f64>,
}

/// Training failure, with a diagnostic checkpoint when the failure happened mid-run.
#[derive(Debug)]
pub struct TrainError {
    pub error: Error,
    pub checkpoint: Option<Box<Checkpoint>>,
}

impl fmt::Display for TrainError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.error.fmt(f)
    }
}

impl std::error::Error for TrainError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

impl From<Error> for TrainError {
    fn from(error: Error) -> Self {
        Self { error, checkpoint: None }
    }
}

pub type TrainResult = std::result::Result<Checkpoint, TrainError>;

const TRAIN_STREAM: u64 = 1;

fn training_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(TRAIN_STREAM);
    rng
}

struct RunState {
    epoch: usize,
    step: u64,
    rng: ChaCha8Rng,
    history: Vec<EpochRecord>,
}

impl RunState {
    fn fresh(seed: u64) -> Self {
        Self { epoch: 0, step: 0, rng: training_rng(seed), history: Vec::new() }
    }

    fn resume(meta: &CheckpointMeta) -> Result<Self> {
        let mut rng = training_rng(meta.rng_seed);
        let pos: u128 = meta
            .rng_word_pos
            .parse()
            .map_err(|_| Error::CorruptCheckpoint(format!("bad stream position `{}`", meta.rng_word_pos)))?;
        rng.set_word_pos(pos);
        Ok(Self { epoch: meta.epoch, step: meta.step, rng, history: meta.history.clone() })
    }
}

struct Group<'a> {
    name: &'static str,
    opt: &'a Adam<f32>,
}

fn build_checkpoint(
    cfg: &TrainConfig,
    state: &RunState,
    store: &ParamStore<f32>,
    groups: &[Group<'_>],
    diverged: Option<String>,
) -> Checkpoint {
    let mut tensors: Vec<(String, Matrix<f32>)> =
        store.iter().map(|(_, name, m)| (format!("{}{name}", checkpoint::PARAM_PREFIX), m.clone())).collect();
    let mut optimizers = Vec::new();
    for g in groups {
        for (k, &id) in g.opt.ids.iter().enumerate() {
            tensors.push((format!("opt/{}/m/{}", g.name, store.name(id)), g.opt.m[k].clone()));
            tensors.push((format!("opt/{}/v/{}", g.name, store.name(id)), g.opt.v[k].clone()));
        }
        let s = &g.opt.settings;
        optimizers.push(OptimizerMeta {
            group: g.name.into(),
            t: g.opt.t,
            lr: s.lr,
            beta1: s.beta1,
            beta2: s.beta2,
            eps: s.eps,
        });
    }
    Checkpoint {
        meta: CheckpointMeta {
            system: cfg.system,
            epoch: state.epoch,
            step: state.step,
            rng_seed: cfg.seed,
            rng_word_pos: state.rng.get_word_pos().to_string(),
            diverged,
            optimizers,
            history: state.history.clone(),
            config: cfg.clone(),
        },
        tensors,
    }
}

fn restore_optimizer(opt: &mut Adam<f32>, group: &str, ckpt: &Checkpoint, store: &ParamStore<f32>) -> Result<()> {
    let meta = ckpt
        .meta
        .optimizers
        .iter()
        .find(|o| o.group == group)
        .ok_or_else(|| Error::MissingTensor(format!("optimizer group `{group}`")))?;
    opt.t = meta.t;
    for (k, &id) in opt.ids.iter().enumerate() {
        for (which, dst) in [("m", &mut opt.m[k]), ("v", &mut opt.v[k])] {
            let name = format!("opt/{group}/{which}/{}", store.name(id));
            let src = ckpt.tensor(&name).ok_or_else(|| Error::MissingTensor(name.clone()))?;
            if src.shape() != dst.shape() {
                return Err(Error::TensorShape { name, expected: dst.shape(), found: src.shape() });
            }
            *dst = src.clone();
        }
    }
    Ok(())
}

fn check_resume(cfg: &TrainConfig, ckpt: &Checkpoint, system: SystemKind) -> Result<()> {
    if ckpt.meta.system != system {
        return Err(Error::Config(format!(
            "checkpoint is a {} run, not {}",
            ckpt.meta.system.as_str(),
            system.as_str()
        )));
    }
    if ckpt.meta.rng_seed != cfg.seed {
        return Err(Error::Config(format!(
            "checkpoint seed {} differs from config seed {}",
            ckpt.meta.rng_seed, cfg.seed
        )));
    }
    Ok(())
}

fn ids_with_prefix(store: &ParamStore<f32>, prefix: &str) -> Vec<ParamId> {
    store.ids_with_prefix(prefix).collect()
}

/// Sum of squared errors per scene, `n_scenes x 1`.
fn scene_sq_errors(g: &mut Graph<f32>, pred: Var, target: &Matrix<f32>, topo: &SceneGraph) -> Var {
    let t = g.constant(target.clone());
    let d = g.sub(pred, t);
    let sq = g.square(d);
    let ones = g.constant(Matrix::filled(target.cols(), 1, 1.0));
    let per_actor = g.matmul(sq, ones);
    let mean = g.segment_mean(per_actor, &topo.node_scene(), topo.n_scenes());
    let mut counts = Matrix::zeros(topo.n_scenes(), 1);
    for s in 0..topo.n_scenes() {
        counts.set(s, 0, (topo.scene_offsets[s + 1] - topo.scene_offsets[s]) as f32);
    }
    let counts = g.constant(counts);
    g.mul(mean, counts)
}

/// Value of a loss and finiteness of its gradients, or a divergence message.
fn divergence(loss: f32, grads: &Gradients<f32>, what: &str, step: u64) -> Option<String> {
    if !loss.is_finite() {
        Some(format!("{what} loss is {loss} at step {step}"))
    } else if !grads.all_finite() {
        Some(format!("{what} gradients are not finite at step {step}"))
    } else {
        None
    }
}

#[derive(Default)]
struct LossMeans {
    sums: BTreeMap<String, f64>,
    n: usize,
}

impl LossMeans {
    fn add(&mut self, key: &str, v: f64) {
        *self.sums.entry(key.into()).or_default() += v;
    }

    fn finish(self) -> BTreeMap<String, f64> {
        let n = self.n.max(1) as f64;
        self.sums.into_iter().map(|(k, v)| (k, v / n)).collect()
    }
}

struct PedBatch<'a> {
    windows: Vec<&'a TrajectoryWindow>,
    topo: SceneGraph,
    target: Matrix<f32>,
    complete: Vec<Vec<Point>>,
}

impl<'a> PedBatch<'a> {
    fn new(scenes: &[&'a SceneSample]) -> Self {
        let windows: Vec<&TrajectoryWindow> = scenes.iter().flat_map(|s| s.windows.iter()).collect();
        let sizes: Vec<usize> = scenes.iter().map(|s| s.n_actors()).collect();
        let futures: Vec<&[Point]> = windows.iter().map(|w| w.future.as_slice()).collect();
        let target = trajectories_matrix(&futures);
        let complete = windows.iter().map(|w| w.complete()).collect();
        Self { windows, topo: SceneGraph::fully_connected(&sizes), target, complete }
    }
}

/// Adversarial training of the pedestrian forecaster.
pub fn train_adversarial(train: &[SceneSample], cfg: &TrainConfig, resume: Option<&Checkpoint>) -> TrainResult {
    train_adversarial_with(train, cfg, resume, &mut |_| {})
}

pub fn train_adversarial_with(
    train: &[SceneSample],
    cfg: &TrainConfig,
    resume: Option<&Checkpoint>,
    on_epoch: &mut dyn FnMut(&EpochRecord),
) -> TrainResult {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::InvalidInput("no training scenes".into()).into());
    }
    let pc = &cfg.pedestrian;
    let mut model = PedestrianModel::<f32>::new(pc, cfg.seed)?;
    for s in train {
        model.check_scene(s)?;
    }
    let gen_ids = ids_with_prefix(&model.store, "gen.");
    let disc_ids = ids_with_prefix(&model.store, "disc.");
    let mut opt_g = Adam::new(&model.store, gen_ids, AdamSettings::with_lr(cfg.lr_generator));
    let mut opt_d = Adam::new(&model.store, disc_ids, AdamSettings::with_lr(cfg.lr_discriminator));
    let mut state = match resume {
        Some(ck) => {
            check_resume(cfg, ck, SystemKind::Pedestrian)?;
            model.store.load_from(&ck.params())?;
            restore_optimizer(&mut opt_g, "generator", ck, &model.store)?;
            restore_optimizer(&mut opt_d, "discriminator", ck, &model.store)?;
            RunState::resume(&ck.meta)?
        }
        None => RunState::fresh(cfg.seed),
    };
    let bs = cfg.batch_size();
    let n_candidates = cfg.variety_k.max(1);
    let train_d = cfg.lr_discriminator > 0.0;
    let use_adv = cfg.adv_weight > 0.0;

    macro_rules! snapshot {
        ($diverged:expr) => {
            build_checkpoint(
                cfg,
                &state,
                &model.store,
                &[Group { name: "generator", opt: &opt_g }, Group { name: "discriminator", opt: &opt_d }],
                $diverged,
            )
        };
    }

    'epochs: while state.epoch < cfg.epochs {
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut state.rng);
        let mut means = LossMeans::default();
        let steps_before = state.step;
        for chunk in order.chunks(bs) {
            if cfg.max_steps.is_some_and(|m| state.step >= m) {
                break;
            }
            let scenes: Vec<&SceneSample> = chunk.iter().map(|&i| &train[i]).collect();
            let batch = PedBatch::new(&scenes);
            let n = batch.windows.len();
            let noises: Vec<Matrix<f32>> =
                (0..n_candidates).map(|_| sample_noise_from(&mut state.rng, n, pc.noise_dim)).collect();

            if train_d {
                let (obj, grads) = {
                    let mut g = Graph::new(&model.store);
                    let gen =
                        model.generator.forward(&mut g, &batch.windows, &batch.topo, &noises[0], OutputBranch::Final);
                    let complete: Vec<&[Point]> = batch.complete.iter().map(Vec::as_slice).collect();
                    let (rs, rl) = model.discriminator.real_inputs(&mut g, &complete);
                    let real = model.discriminator.forward(&mut g, &rs, rl, &batch.topo);
                    let (fs, fl) = model.discriminator.fake_inputs(&mut g, &batch.windows, &gen);
                    let fake = model.discriminator.forward(&mut g, &fs, fl, &batch.topo);
                    let obj = discriminator_objective(&mut g, real, fake);
                    let loss = g.scale(obj, -1.0);
                    (g.scalar(obj), g.backward(loss))
                };
                if let Some(msg) = divergence(obj, &grads, "discriminator", state.step) {
                    return Err(TrainError {
                        error: Error::Divergence(msg.clone()),
                        checkpoint: Some(Box::new(snapshot!(Some(msg)))),
                    });
                }
                opt_d.step(&mut model.store, &grads);
                means.add("l_d", obj as f64);
            }

            let (total, l2, adv, grads) = {
                let mut g = Graph::new(&model.store);
                let mut first = None;
                let l2 = if n_candidates == 1 {
                    let gen =
                        model.generator.forward(&mut g, &batch.windows, &batch.topo, &noises[0], OutputBranch::Final);
                    let l = l2_loss(&mut g, gen.predicted, &batch.target);
                    first = Some(gen);
                    l
                } else {
                    let mut per_scene = Vec::with_capacity(n_candidates);
                    for noise in &noises {
                        let gen =
                            model.generator.forward(&mut g, &batch.windows, &batch.topo, noise, OutputBranch::Final);
                        per_scene.push(scene_sq_errors(&mut g, gen.predicted, &batch.target, &batch.topo));
                        if first.is_none() {
                            first = Some(gen);
                        }
                    }
                    let n_scenes = batch.topo.n_scenes();
                    let stacked = g.concat_rows(&per_scene);
                    let values = g.value(stacked).clone();
                    let pick: Vec<usize> = (0..n_scenes)
                        .map(|s| {
                            let mut best = 0;
                            for c in 1..n_candidates {
                                if values.get(c * n_scenes + s, 0) < values.get(best * n_scenes + s, 0) {
                                    best = c;
                                }
                            }
                            best * n_scenes + s
                        })
                        .collect();
                    let chosen = g.gather_rows(stacked, &pick);
                    g.sum(chosen)
                };
                let gen = first.expect("at least one candidate");
                let (total, adv) = if use_adv {
                    let (fs, fl) = model.discriminator.fake_inputs(&mut g, &batch.windows, &gen);
                    let fake = model.discriminator.forward(&mut g, &fs, fl, &batch.topo);
                    let adv = generator_adversarial(&mut g, fake);
                    let weighted = g.scale(adv, lit(cfg.adv_weight));
                    (g.add(l2, weighted), Some(adv))
                } else {
                    (l2, None)
                };
                (g.scalar(total), g.scalar(l2), adv.map(|a| g.scalar(a)), g.backward(total))
            };
            if let Some(msg) = divergence(total, &grads, "generator", state.step) {
                return Err(TrainError {
                    error: Error::Divergence(msg.clone()),
                    checkpoint: Some(Box::new(snapshot!(Some(msg)))),
                });
            }
            opt_g.step(&mut model.store, &grads);
            means.add("l_g", l2 as f64);
            if let Some(a) = adv {
                means.add("adv", a as f64);
            }
            means.n += 1;
            state.step += 1;
        }
        let ran = state.step - steps_before;
        if ran == 0 {
            break 'epochs;
        }
        let rec = EpochRecord { epoch: state.epoch, steps: ran, losses: means.finish() };
        on_epoch(&rec);
        state.history.push(rec);
        state.epoch += 1;
    }
    Ok(snapshot!(None))
}

/// Supervised training of the joint forecaster, optionally with a discriminator.
pub fn train_joint(train: &[JointSceneSample], cfg: &TrainConfig, resume: Option<&Checkpoint>) -> TrainResult {
    train_joint_with(train, cfg, resume, &mut |_| {})
}

pub fn train_joint_with(
    train: &[JointSceneSample],
    cfg: &TrainConfig,
    resume: Option<&Checkpoint>,
    on_epoch: &mut dyn FnMut(&EpochRecord),
) -> TrainResult {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::InvalidInput("no training scenes".into()).into());
    }
    let jc = &cfg.joint;
    let mut model = JointModel::<f32>::new(jc, cfg.seed)?;
    let mut images = Vec::with_capacity(train.len());
    for s in train {
        s.validate(jc.t_obs, jc.t_pred, true)?;
        images.push(model.image(s)?);
    }
    let joint_ids = ids_with_prefix(&model.store, "joint.");
    let disc_ids = ids_with_prefix(&model.store, "disc.");
    let mut opt_j = Adam::new(&model.store, joint_ids, AdamSettings::with_lr(cfg.lr_joint));
    let mut opt_d = Adam::new(&model.store, disc_ids, AdamSettings::with_lr(cfg.lr_discriminator));
    let mut state = match resume {
        Some(ck) => {
            check_resume(cfg, ck, SystemKind::Joint)?;
            model.store.load_from(&ck.params())?;
            restore_optimizer(&mut opt_j, "joint", ck, &model.store)?;
            if jc.gan {
                restore_optimizer(&mut opt_d, "discriminator", ck, &model.store)?;
            }
            RunState::resume(&ck.meta)?
        }
        None => RunState::fresh(cfg.seed),
    };
    let bs = cfg.batch_size();
    let gan = jc.gan && model.net.discriminator.is_some();

    macro_rules! snapshot {
        ($diverged:expr) => {{
            let mut groups = vec![Group { name: "joint", opt: &opt_j }];
            if gan {
                groups.push(Group { name: "discriminator", opt: &opt_d });
            }
            build_checkpoint(cfg, &state, &model.store, &groups, $diverged)
        }};
    }

    'epochs: while state.epoch < cfg.epochs {
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut state.rng);
        let mut means = LossMeans::default();
        let steps_before = state.step;
        for chunk in order.chunks(bs) {
            if cfg.max_steps.is_some_and(|m| state.step >= m) {
                break;
            }
            let samples: Vec<&JointSceneSample> = chunk.iter().map(|&i| &train[i]).collect();
            let imgs: Vec<Matrix<f32>> = chunk.iter().map(|&i| images[i].clone()).collect();
            let target = future_matrix::<f32>(&samples);
            let windows: Vec<TrajectoryWindow> = samples.iter().flat_map(|s| s.windows()).collect();
            let wrefs: Vec<&TrajectoryWindow> = windows.iter().collect();

            if gan && cfg.lr_discriminator > 0.0 {
                let disc = model.net.discriminator.as_ref().expect("gan");
                let (obj, grads) = {
                    let mut g = Graph::new(&model.store);
                    let out = model.net.forward(&mut g, &samples, &imgs)?;
                    let complete: Vec<Vec<Point>> = wrefs.iter().map(|w| w.complete()).collect();
                    let crefs: Vec<&[Point]> = complete.iter().map(Vec::as_slice).collect();
                    let (rs, rl) = disc.real_inputs(&mut g, &crefs);
                    let real = disc.forward(&mut g, &rs, rl, &out.topo);
                    let (fs, fl) = disc.fake_inputs_from_coords(&mut g, &wrefs, out.predicted, jc.t_pred);
                    let fake = disc.forward(&mut g, &fs, fl, &out.topo);
                    let obj = discriminator_objective(&mut g, real, fake);
                    let loss = g.scale(obj, -1.0);
                    (g.scalar(obj), g.backward(loss))
                };
                if let Some(msg) = divergence(obj, &grads, "discriminator", state.step) {
                    return Err(TrainError {
                        error: Error::Divergence(msg.clone()),
                        checkpoint: Some(Box::new(snapshot!(Some(msg)))),
                    });
                }
                opt_d.step(&mut model.store, &grads);
                means.add("l_d", obj as f64);
            }

            let (total, l_ind, l_final, grads) = {
                let mut g = Graph::new(&model.store);
                let out = model.net.forward(&mut g, &samples, &imgs)?;
                let (loss, l_ind, l_final) = joint_loss_graph(&mut g, &out, &target, cfg.lambda);
                let total = if gan && cfg.adv_weight > 0.0 {
                    let disc = model.net.discriminator.as_ref().expect("gan");
                    let (fs, fl) = disc.fake_inputs_from_coords(&mut g, &wrefs, out.predicted, jc.t_pred);
                    let fake = disc.forward(&mut g, &fs, fl, &out.topo);
                    let adv = generator_adversarial(&mut g, fake);
                    let w = g.scale(adv, lit(cfg.adv_weight));
                    g.add(loss, w)
                } else {
                    loss
                };
                (g.scalar(total), g.scalar(l_ind), g.scalar(l_final), g.backward(total))
            };
            if let Some(msg) = divergence(total, &grads, "joint", state.step) {
                return Err(TrainError {
                    error: Error::Divergence(msg.clone()),
                    checkpoint: Some(Box::new(snapshot!(Some(msg)))),
                });
            }
            opt_j.step(&mut model.store, &grads);
            means.add("loss", total as f64);
            means.add("l_ind", l_ind as f64);
            means.add("l_final", l_final as f64);
            means.n += 1;
            state.step += 1;
        }
        let ran = state.step - steps_before;
        if ran == 0 {
            break 'epochs;
        }
        let rec = EpochRecord { epoch: state.epoch, steps: ran, losses: means.finish() };
        on_epoch(&rec);
        state.history.push(rec);
        state.epoch += 1;
    }
    Ok(snapshot!(None))
}

/// Rebuilds the pedestrian model stored in a checkpoint.
pub fn pedestrian_model(ckpt: &Checkpoint) -> Result<PedestrianModel<f32>> {
    load_pedestrian(&ckpt.meta.config.pedestrian, ckpt)
}

/// Builds a model from `config` and loads the checkpoint weights into it; a mismatched
/// configuration yields an error naming the first offending tensor.
pub fn load_pedestrian(config: &PedestrianConfig, ckpt: &Checkpoint) -> Result<PedestrianModel<f32>> {
    let mut m = PedestrianModel::<f32>::new(config, ckpt.meta.config.seed)?;
    m.store.load_from(&ckpt.params())?;
    Ok(m)
}

pub fn joint_model(ckpt: &Checkpoint) -> Result<JointModel<f32>> {
    let mut m = JointModel::<f32>::new(&ckpt.meta.config.joint, ckpt.meta.config.seed)?;
    m.store.load_from(&ckpt.params())?;
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{synthesize_interacting_scenes, SynthOptions, SynthRule};
    use crate::nmmp::{MlpWidths, NmmpConfig};
    use crate::nn::Activation;

    fn tiny() -> TrainConfig {
        let nmmp = NmmpConfig {
            embed_dim: 8,
            iterations: 1,
            mlp_widths: MlpWidths::uniform(8),
            lstm_hidden: 8,
            activation: Activation::Relu,
        };
        TrainConfig {
            epochs: 2,
            batch_size: Some(2),
            pedestrian: PedestrianConfig {
                t_obs: 3,
                t_pred: 4,
                nmmp: nmmp.clone(),
                noise_dim: 2,
                decoder_input_dim: 8,
                g_ind_hidden: vec![8],
                g_inter_hidden: vec![8],
                disc_nmmp: nmmp,
                disc_cls_hidden: vec![8],
                ..PedestrianConfig::default()
            },
            ..TrainConfig::default()
        }
    }

    fn data() -> Vec<SceneSample> {
        let o = SynthOptions { t_obs: 3, t_pred: 4, delay: 2, ..SynthOptions::default() };
        synthesize_interacting_scenes(5, 3, SynthRule::LeaderFollower, 3, &o)
    }

    #[test]
    fn config_toml_round_trip() {
        let c = tiny();
        assert_eq!(TrainConfig::from_toml(&c.to_toml()).unwrap(), c);
        assert!(TrainConfig::from_toml("epocs = 3").is_err());
    }

    #[test]
    fn zero_disc_lr_freezes_discriminator() {
        let cfg = TrainConfig { lr_discriminator: 0.0, ..tiny() };
        let ck = train_adversarial(&data(), &cfg, None).unwrap();
        let init = PedestrianModel::<f32>::new(&cfg.pedestrian, cfg.seed).unwrap();
        let trained = ck.params();
        for (id, name, m) in init.store.iter() {
            let _ = id;
            let t = trained.get(trained.id(name).unwrap());
            if name.starts_with("disc.") {
                assert_eq!(t, m, "{name}");
            }
        }
    }

    #[test]
    fn resume_matches_uninterrupted() {
        let cfg = tiny();
        let full = train_adversarial(&data(), &cfg, None).unwrap();
        let half = train_adversarial(&data(), &TrainConfig { epochs: 1, ..cfg.clone() }, None).unwrap();
        let half = Checkpoint::from_bytes(&half.to_bytes().unwrap()).unwrap();
        let resumed = train_adversarial(&data(), &cfg, Some(&half)).unwrap();
        assert_eq!(resumed.tensors, full.tensors);
        assert_eq!(resumed.meta.history, full.meta.history);
    }
}
