//! Adversarial pedestrian forecaster.
//!
//! The generator predicts per-step displacements from two branches. The individual
//! branch unrolls an LSTM decoder whose hidden state starts at `[h_i; z_i]` and maps each
//! hidden state to a 2-D step through `g_ind`. The interactive branch maps the
//! interacted actor embedding `v_i` through one MLP `g_inter` to all `T_pred` steps at
//! once. Coordinates accumulate from the current position. The discriminator embeds
//! complete trajectories, runs its own message passing and classifies every actor.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, Var};
use crate::error::{Error, Result};
use crate::nmmp::{
    current_positions, point_displacement_steps, Nmmp, NmmpConfig, NmmpModule, NmmpOutput, SceneGraph,
    TrajectoryEncoder,
};
use crate::nn::{Lstm, Mlp};
use crate::params::ParamStore;
use crate::tensor::{lit, Matrix, Scalar};
use crate::trajectory::{Point, SceneSample, TrajectoryWindow};

/// Probability floor inside the discriminator log terms.
pub const PROB_EPS: f64 = 1e-7;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InteractionMode {
    #[default]
    Nmmp,
    /// Scene-wise max-pool over actor embeddings, broadcast back to each actor.
    Pool,
    /// No interactive branch: a per-actor model.
    None,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DiscInteraction {
    #[default]
    Nmmp,
    Pool,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DecoderMode {
    /// Trajectory and interaction embeddings fused before a single decoder.
    Single,
    /// Individual and interactive decoders whose outputs add up.
    #[default]
    Double,
    /// Double structure trained on the final output, predictions read from the
    /// individual decoder alone.
    IndividualOnly,
}

/// Which outputs are accumulated into coordinates.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum OutputBranch {
    Final,
    Individual,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PedestrianConfig {
    pub t_obs: usize,
    pub t_pred: usize,
    pub nmmp: NmmpConfig,
    pub noise_dim: usize,
    /// Width of the embedded previous displacement fed to the decoder LSTM.
    pub decoder_input_dim: usize,
    pub g_ind_hidden: Vec<usize>,
    pub g_inter_hidden: Vec<usize>,
    pub interaction: InteractionMode,
    pub decoder_mode: DecoderMode,
    pub disc_nmmp: NmmpConfig,
    pub disc_interaction: DiscInteraction,
    pub disc_cls_hidden: Vec<usize>,
}

impl Default for PedestrianConfig {
    fn default() -> Self {
        Self {
            t_obs: 8,
            t_pred: 12,
            nmmp: NmmpConfig::default(),
            noise_dim: 8,
            decoder_input_dim: 64,
            g_ind_hidden: vec![64],
            g_inter_hidden: vec![64],
            interaction: InteractionMode::Nmmp,
            decoder_mode: DecoderMode::Double,
            disc_nmmp: NmmpConfig { iterations: 1, ..NmmpConfig::default() },
            disc_interaction: DiscInteraction::Nmmp,
            disc_cls_hidden: vec![64],
        }
    }
}

impl PedestrianConfig {
    pub fn validate(&self) -> Result<()> {
        self.nmmp.validate()?;
        self.disc_nmmp.validate()?;
        if self.t_obs == 0 || self.t_pred == 0 {
            return Err(Error::Config("t_obs and t_pred must be positive".into()));
        }
        if self.noise_dim == 0 {
            return Err(Error::Config("noise_dim must be positive".into()));
        }
        Ok(())
    }

    fn has_inter_branch(&self) -> bool {
        self.interaction != InteractionMode::None && self.decoder_mode != DecoderMode::Single
    }
}

/// Generator weights (ids into the owning [`ParamStore`]).
#[derive(Clone, Debug)]
pub struct Generator {
    pub nmmp: NmmpModule,
    pub pool_fuse: Option<Mlp>,
    pub single_fuse: Option<Mlp>,
    pub dec_input: Mlp,
    pub dec_lstm: Lstm,
    pub g_ind: Mlp,
    pub g_inter: Option<Mlp>,
    pub config: PedestrianConfig,
}

/// Differentiable generator outputs for a batch of actors.
pub struct GeneratorForward {
    /// `n x 2 T_pred` predicted coordinates.
    pub predicted: Var,
    /// Per-step accumulated displacement (`n x 2` each), `p(1) - p(0)` first.
    pub steps: Vec<Var>,
    pub individual: Vec<Var>,
    /// `n x 2 T_pred` interactive component, when the branch exists.
    pub interaction: Option<Var>,
    pub actor_embeddings: Option<Var>,
    pub interaction_embeddings: Option<Var>,
}

impl Generator {
    pub fn new<T: Scalar, R: Rng + ?Sized>(store: &mut ParamStore<T>, rng: &mut R, config: &PedestrianConfig) -> Self {
        let c = config;
        let act = c.nmmp.activation;
        let d = c.nmmp.embed_dim;
        let nmmp = NmmpModule::new(store, rng, "gen.nmmp", &c.nmmp);
        let pool_fuse = (c.interaction == InteractionMode::Pool)
            .then(|| Mlp::new(store, rng, "gen.pool_fuse", 2 * d, &c.nmmp.mlp_widths.node, d, act));
        let single_fuse =
            (c.decoder_mode == DecoderMode::Single && c.interaction != InteractionMode::None).then(|| {
                Mlp::new(
                    store,
                    rng,
                    "gen.single_fuse",
                    c.nmmp.lstm_hidden + d,
                    &c.g_inter_hidden,
                    c.nmmp.lstm_hidden,
                    act,
                )
            });
        let dec_input = Mlp::new(store, rng, "gen.dec_input", 2, &[], c.decoder_input_dim, act);
        let dec_hidden = c.nmmp.lstm_hidden + c.noise_dim;
        let dec_lstm = Lstm::new(store, rng, "gen.dec_lstm", c.decoder_input_dim, dec_hidden);
        let g_ind = Mlp::new(store, rng, "gen.g_ind", dec_hidden, &c.g_ind_hidden, 2, act);
        let g_inter =
            c.has_inter_branch().then(|| Mlp::new(store, rng, "gen.g_inter", d, &c.g_inter_hidden, 2 * c.t_pred, act));
        Self { nmmp, pool_fuse, single_fuse, dec_input, dec_lstm, g_ind, g_inter, config: config.clone() }
    }

    /// Decoder hidden width, `dim(h_i) + noise_dim`.
    pub fn decoder_hidden(&self) -> usize {
        self.dec_lstm.hidden_dim
    }

    /// Runs the generator over consecutive scene windows. `noise` is `n x noise_dim`.
    pub fn forward<T: Scalar>(
        &self,
        g: &mut Graph<T>,
        windows: &[&TrajectoryWindow],
        topo: &SceneGraph,
        noise: &Matrix<T>,
        branch: OutputBranch,
    ) -> GeneratorForward {
        let c = &self.config;
        let n = windows.len();
        let t_pred = c.t_pred;
        let steps_in = crate::nmmp::displacement_steps(windows);
        let h = self.nmmp.encoder.forward(g, &steps_in);
        let positions = g.constant(current_positions(windows));

        let (v, e) = match c.interaction {
            InteractionMode::Nmmp => {
                let (v, e) = self.nmmp.graph.forward(g, h, positions, topo);
                (Some(v), e)
            }
            InteractionMode::Pool => {
                let v0 = self.nmmp.graph.f_v[0].forward(g, h);
                let scene_of = topo.node_scene();
                let pooled = g.segment_max(v0, &scene_of, topo.n_scenes());
                let spread = g.gather_rows(pooled, &scene_of);
                let cat = g.concat_cols(&[v0, spread]);
                (Some(self.pool_fuse.as_ref().expect("pool branch").forward(g, cat)), None)
            }
            InteractionMode::None => (None, None),
        };

        let h_dec = match (&self.single_fuse, v) {
            (Some(fuse), Some(v)) => {
                let cat = g.concat_cols(&[h, v]);
                fuse.forward(g, cat)
            }
            _ => h,
        };
        let z = g.constant(noise.clone());
        let mut q = g.concat_cols(&[h_dec, z]);
        let mut cell = g.constant(Matrix::zeros(n, self.decoder_hidden()));

        let inter = match (&self.g_inter, v) {
            (Some(gi), Some(v)) => Some(gi.forward(g, v)),
            _ => None,
        };

        let mut prev = g.constant(Matrix::zeros(n, 2));
        let mut pos = positions;
        let mut coords = Vec::with_capacity(t_pred);
        let mut steps = Vec::with_capacity(t_pred);
        let mut individual = Vec::with_capacity(t_pred);
        for t in 0..t_pred {
            let x = self.dec_input.forward(g, prev);
            (q, cell) = self.dec_lstm.step(g, x, q, cell);
            let z_ind = self.g_ind.forward(g, q);
            individual.push(z_ind);
            let step = match (inter, branch) {
                (Some(inter), OutputBranch::Final) => {
                    let z_inter = g.slice_cols(inter, 2 * t, 2);
                    g.add(z_ind, z_inter)
                }
                _ => z_ind,
            };
            pos = g.add(pos, step);
            coords.push(pos);
            steps.push(step);
            prev = step;
        }
        let predicted = g.concat_cols(&coords);
        GeneratorForward {
            predicted,
            steps,
            individual,
            interaction: if branch == OutputBranch::Final { inter } else { None },
            actor_embeddings: v,
            interaction_embeddings: e,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Discriminator {
    pub encoder: TrajectoryEncoder,
    pub graph: Nmmp,
    pub pool_fuse: Option<Mlp>,
    pub cls: Mlp,
    pub mode: DiscInteraction,
}

impl Discriminator {
    pub fn new<T: Scalar, R: Rng + ?Sized>(store: &mut ParamStore<T>, rng: &mut R, config: &PedestrianConfig) -> Self {
        let c = &config.disc_nmmp;
        let d = c.embed_dim;
        let encoder =
            TrajectoryEncoder::new(store, rng, "disc", &c.mlp_widths.temp, c.embed_dim, c.lstm_hidden, c.activation);
        let graph = Nmmp::new(store, rng, "disc.nmmp", c.lstm_hidden, c);
        let pool_fuse = (config.disc_interaction == DiscInteraction::Pool)
            .then(|| Mlp::new(store, rng, "disc.pool_fuse", 2 * d, &c.mlp_widths.node, d, c.activation));
        let cls = Mlp::new(store, rng, "disc.cls", d, &config.disc_cls_hidden, 1, c.activation);
        Self { encoder, graph, pool_fuse, cls, mode: config.disc_interaction }
    }

    /// Real-probabilities (`n x 1`) from per-step displacements of complete trajectories
    /// and the last position of each trajectory.
    pub fn forward<T: Scalar>(&self, g: &mut Graph<T>, steps: &[Var], last_positions: Var, topo: &SceneGraph) -> Var {
        let h = self.encoder.forward_vars(g, steps);
        let v = match self.mode {
            DiscInteraction::Nmmp => self.graph.forward(g, h, last_positions, topo).0,
            DiscInteraction::Pool => {
                let v0 = self.graph.f_v[0].forward(g, h);
                let scene_of = topo.node_scene();
                let pooled = g.segment_max(v0, &scene_of, topo.n_scenes());
                let spread = g.gather_rows(pooled, &scene_of);
                let cat = g.concat_cols(&[v0, spread]);
                self.pool_fuse.as_ref().expect("pool branch").forward(g, cat)
            }
        };
        let logit = self.cls.forward(g, v);
        g.sigmoid(logit)
    }

    /// Discriminator input for ground-truth trajectories.
    pub fn real_inputs<T: Scalar>(&self, g: &mut Graph<T>, complete: &[&[Point]]) -> (Vec<Var>, Var) {
        let steps = point_displacement_steps::<T>(complete).into_iter().map(|m| g.constant(m)).collect();
        let last: Vec<Point> = complete.iter().map(|s| *s.last().expect("empty trajectory")).collect();
        let last = g.constant(points_matrix(&last));
        (steps, last)
    }

    /// Discriminator input for generated futures appended to observed windows.
    pub fn fake_inputs<T: Scalar>(
        &self,
        g: &mut Graph<T>,
        windows: &[&TrajectoryWindow],
        gen: &GeneratorForward,
    ) -> (Vec<Var>, Var) {
        let observed: Vec<&[Point]> = windows.iter().map(|w| w.observed.as_slice()).collect();
        let mut steps: Vec<Var> = point_displacement_steps::<T>(&observed).into_iter().map(|m| g.constant(m)).collect();
        steps.extend_from_slice(&gen.steps);
        let t_pred = gen.steps.len();
        let last = g.slice_cols(gen.predicted, 2 * (t_pred - 1), 2);
        (steps, last)
    }

    /// Discriminator input for predicted coordinates (`n x 2 T_pred`) appended to
    /// observed windows.
    pub fn fake_inputs_from_coords<T: Scalar>(
        &self,
        g: &mut Graph<T>,
        windows: &[&TrajectoryWindow],
        predicted: Var,
        t_pred: usize,
    ) -> (Vec<Var>, Var) {
        let observed: Vec<&[Point]> = windows.iter().map(|w| w.observed.as_slice()).collect();
        let mut steps: Vec<Var> = point_displacement_steps::<T>(&observed).into_iter().map(|m| g.constant(m)).collect();
        let mut prev = g.constant(current_positions(windows));
        for t in 0..t_pred {
            let cur = g.slice_cols(predicted, 2 * t, 2);
            steps.push(g.sub(cur, prev));
            prev = cur;
        }
        (steps, prev)
    }
}

/// Per-actor predicted trajectories with their two components.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionBatch {
    pub predicted: Vec<Vec<Point>>,
    pub individual_component: Vec<Vec<Point>>,
    pub interaction_component: Vec<Vec<Point>>,
    /// Seed of the noise stream, when the noise was drawn from one.
    pub noise_seed: Option<u64>,
}

impl PredictionBatch {
    pub fn n_actors(&self) -> usize {
        self.predicted.len()
    }
}

/// Generator and discriminator sharing one parameter store (`gen.*`, `disc.*`).
#[derive(Clone, Debug)]
pub struct PedestrianModel<T: Scalar> {
    pub store: ParamStore<T>,
    pub generator: Generator,
    pub discriminator: Discriminator,
    pub config: PedestrianConfig,
}

impl<T: Scalar> PedestrianModel<T> {
    pub fn new(config: &PedestrianConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let generator = Generator::new(&mut store, &mut rng, config);
        let discriminator = Discriminator::new(&mut store, &mut rng, config);
        Ok(Self { store, generator, discriminator, config: config.clone() })
    }

    pub fn check_scene(&self, scene: &SceneSample) -> Result<()> {
        scene.validate()?;
        if scene.t_obs() != self.config.t_obs || scene.t_pred() != self.config.t_pred {
            return Err(Error::Shape(format!(
                "scene {} has T_obs={} T_pred={}, model expects T_obs={} T_pred={}",
                scene.id,
                scene.t_obs(),
                scene.t_pred(),
                self.config.t_obs,
                self.config.t_pred
            )));
        }
        Ok(())
    }

    /// Default output branch for inference under the configured decoder mode.
    pub fn inference_branch(&self) -> OutputBranch {
        if self.config.decoder_mode == DecoderMode::IndividualOnly {
            OutputBranch::Individual
        } else {
            OutputBranch::Final
        }
    }

    /// Predicts one scene with explicit per-actor noise (`n x noise_dim`).
    pub fn generate(&self, scene: &SceneSample, noise: &Matrix<T>) -> Result<PredictionBatch> {
        self.check_scene(scene)?;
        let n = scene.n_actors();
        if noise.shape() != (n, self.config.noise_dim) {
            return Err(Error::Shape(format!(
                "noise is {:?}, expected ({n}, {})",
                noise.shape(),
                self.config.noise_dim
            )));
        }
        let windows: Vec<&TrajectoryWindow> = scene.windows.iter().collect();
        let topo = SceneGraph::fully_connected(&[n]);
        let mut g = Graph::new(&self.store);
        let out = self.generator.forward(&mut g, &windows, &topo, noise, self.inference_branch());
        let t_pred = self.config.t_pred;
        let to_points = |m: &Matrix<T>| -> Vec<Vec<Point>> {
            (0..m.rows())
                .map(|r| m.row(r).chunks_exact(2).map(|c| [c[0].to_f64_lossy(), c[1].to_f64_lossy()]).collect())
                .collect()
        };
        let predicted = to_points(g.value(out.predicted));
        let ind_vals: Vec<Var> = out.individual.clone();
        let ind_cat = g.concat_cols(&ind_vals);
        let individual_component = to_points(g.value(ind_cat));
        let interaction_component = match out.interaction {
            Some(v) => to_points(g.value(v)),
            None => vec![vec![[0.0, 0.0]; t_pred]; n],
        };
        Ok(PredictionBatch { predicted, individual_component, interaction_component, noise_seed: None })
    }

    /// Predicts one scene with noise drawn from a seeded stream; the seed is recorded.
    pub fn generate_seeded(&self, scene: &SceneSample, seed: u64) -> Result<PredictionBatch> {
        let noise = sample_noise(scene.n_actors(), self.config.noise_dim, seed);
        let mut batch = self.generate(scene, &noise)?;
        batch.noise_seed = Some(seed);
        Ok(batch)
    }

    /// Generator-side NMMP embeddings for one scene.
    pub fn interactions(&self, scene: &SceneSample) -> Result<NmmpOutput<T>> {
        self.check_scene(scene)?;
        self.generator.nmmp.run(&self.store, &scene.windows)
    }

    /// Per-actor real-probabilities of complete trajectories (`T_obs + 1 + T_pred` points each).
    pub fn discriminate(&self, complete: &[Vec<Point>]) -> Result<Vec<T>> {
        let first = complete.first().ok_or_else(|| Error::InvalidInput("no actors".into()))?;
        let len = self.config.t_obs + 1 + self.config.t_pred;
        for traj in complete {
            if traj.len() != first.len() {
                return Err(Error::Shape("complete trajectories differ in length".into()));
            }
            if traj.len() != len {
                return Err(Error::Shape(format!("complete trajectory has {} points, expected {len}", traj.len())));
            }
            if traj.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
                return Err(Error::InvalidInput("non-finite coordinate".into()));
            }
        }
        let seqs: Vec<&[Point]> = complete.iter().map(Vec::as_slice).collect();
        let topo = SceneGraph::fully_connected(&[complete.len()]);
        let mut g = Graph::new(&self.store);
        let (steps, last) = self.discriminator.real_inputs(&mut g, &seqs);
        let p = self.discriminator.forward(&mut g, &steps, last, &topo);
        Ok(g.value(p).data().to_vec())
    }
}

/// Standard-normal noise `n x dim` from a seeded stream.
pub fn sample_noise<T: Scalar>(n: usize, dim: usize, seed: u64) -> Matrix<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_noise_from(&mut rng, n, dim)
}

pub fn sample_noise_from<T: Scalar, R: Rng + ?Sized>(rng: &mut R, n: usize, dim: usize) -> Matrix<T> {
    let data = (0..n * dim).map(|_| lit::<T>(rng.sample::<f64, _>(StandardNormal))).collect();
    Matrix::from_vec(n, dim, data)
}

pub fn points_matrix<T: Scalar>(points: &[Point]) -> Matrix<T> {
    Matrix::from_vec(points.len(), 2, points.iter().flat_map(|p| [lit::<T>(p[0]), lit::<T>(p[1])]).collect())
}

/// Flattened `n x 2 T` matrix of trajectories.
pub fn trajectories_matrix<T: Scalar>(trajs: &[&[Point]]) -> Matrix<T> {
    let cols = trajs.first().map_or(0, |t| 2 * t.len());
    let data = trajs.iter().flat_map(|t| t.iter().flat_map(|p| [lit::<T>(p[0]), lit::<T>(p[1])])).collect();
    Matrix::from_vec(trajs.len(), cols, data)
}

/// Sum over actors of the squared L2 error over all predicted coordinates.
pub fn generator_loss(pred: &PredictionBatch, scene: &SceneSample) -> f64 {
    pred.predicted
        .iter()
        .zip(&scene.windows)
        .map(|(p, w)| p.iter().zip(&w.future).map(|(a, b)| (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sum::<f64>())
        .sum()
}

/// `Σ_i log D(real_i) + log(1 - D(fake_i))`, probabilities clamped to `[ε, 1-ε]`.
pub fn discriminator_loss(real_probs: &[f64], fake_probs: &[f64]) -> f64 {
    let clamp = |p: f64| p.clamp(PROB_EPS, 1.0 - PROB_EPS);
    real_probs.iter().map(|&p| clamp(p).ln()).sum::<f64>()
        + fake_probs.iter().map(|&p| (1.0 - clamp(p)).ln()).sum::<f64>()
}

/// Differentiable `Σ ||pred - target||²` with `target` a constant matrix of the same shape.
pub fn l2_loss<T: Scalar>(g: &mut Graph<T>, pred: Var, target: &Matrix<T>) -> Var {
    let t = g.constant(target.clone());
    let d = g.sub(pred, t);
    let sq = g.square(d);
    g.sum(sq)
}

/// Differentiable `Σ log D(real) + log(1 - D(fake))`.
pub fn discriminator_objective<T: Scalar>(g: &mut Graph<T>, real: Var, fake: Var) -> Var {
    let eps = lit(PROB_EPS);
    let lr = g.ln_clamped(real, eps);
    let one_minus = g.affine(fake, -T::one(), T::one());
    let lf = g.ln_clamped(one_minus, eps);
    let a = g.sum(lr);
    let b = g.sum(lf);
    g.add(a, b)
}

/// Generator adversarial term `-Σ log D(fake)`.
pub fn generator_adversarial<T: Scalar>(g: &mut Graph<T>, fake: Var) -> Var {
    let l = g.ln_clamped(fake, lit(PROB_EPS));
    let s = g.sum(l);
    g.scale(s, -T::one())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nmmp::MlpWidths;
    use crate::nn::Activation;

    fn small_config() -> PedestrianConfig {
        let nmmp = NmmpConfig {
            embed_dim: 6,
            iterations: 2,
            mlp_widths: MlpWidths::uniform(8),
            lstm_hidden: 5,
            activation: Activation::Tanh,
        };
        PedestrianConfig {
            t_obs: 3,
            t_pred: 4,
            nmmp: nmmp.clone(),
            noise_dim: 2,
            decoder_input_dim: 4,
            g_ind_hidden: vec![8],
            g_inter_hidden: vec![8],
            disc_nmmp: NmmpConfig { iterations: 1, ..nmmp },
            disc_cls_hidden: vec![8],
            ..PedestrianConfig::default()
        }
    }

    fn scene(n: usize) -> SceneSample {
        let windows = (0..n)
            .map(|i| {
                let f = i as f64;
                let obs = (0..4).map(|t| [f + 0.3 * t as f64, 0.5 * f - 0.2 * t as f64]).collect();
                let fut = (4..8).map(|t| [f + 0.3 * t as f64, 0.5 * f - 0.2 * t as f64]).collect();
                TrajectoryWindow::new(i.to_string(), obs, fut, 0.4)
            })
            .collect();
        SceneSample::new("s", windows, 0.4, crate::trajectory::Units::Meters)
    }

    #[test]
    fn decoder_hidden_is_h_plus_noise() {
        let m = PedestrianModel::<f64>::new(&small_config(), 0).unwrap();
        assert_eq!(m.generator.decoder_hidden(), 5 + 2);
    }

    #[test]
    fn wrong_t_pred_is_shape_error() {
        let m = PedestrianModel::<f64>::new(&small_config(), 0).unwrap();
        let mut s = scene(2);
        for w in &mut s.windows {
            w.future.pop();
        }
        let noise = sample_noise(2, 2, 1);
        assert!(matches!(m.generate(&s, &noise), Err(Error::Shape(_))));
    }

    #[test]
    fn discriminator_loss_values() {
        let l = discriminator_loss(&[0.5, 0.5], &[0.5, 0.5]);
        assert!((l - 4.0 * 0.5f64.ln()).abs() < 1e-15);
        let l = discriminator_loss(&[1.0], &[0.0]);
        assert!(l < 0.0 && l > -1e-6);
    }

    #[test]
    fn pool_and_none_modes_run() {
        for mode in [InteractionMode::Pool, InteractionMode::None] {
            let cfg = PedestrianConfig { interaction: mode, disc_interaction: DiscInteraction::Pool, ..small_config() };
            let m = PedestrianModel::<f64>::new(&cfg, 0).unwrap();
            let s = scene(3);
            let b = m.generate_seeded(&s, 5).unwrap();
            assert_eq!(b.n_actors(), 3);
            let probs = m.discriminate(&s.windows.iter().map(|w| w.complete()).collect::<Vec<_>>()).unwrap();
            assert!(probs.iter().all(|&p| p > 0.0 && p < 1.0));
        }
    }

    #[test]
    fn single_decoder_mode_has_no_inter_component() {
        let cfg = PedestrianConfig { decoder_mode: DecoderMode::Single, ..small_config() };
        let m = PedestrianModel::<f64>::new(&cfg, 0).unwrap();
        let b = m.generate_seeded(&scene(2), 3).unwrap();
        assert!(b.interaction_component.iter().flatten().all(|p| *p == [0.0, 0.0]));
    }
}
