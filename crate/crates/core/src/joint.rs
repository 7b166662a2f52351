//! Joint pedestrian/vehicle forecaster.
//!
//! Each actor's individual branch works in its own ego frame (origin at the current
//! position, heading along +x) with one encoder/decoder pair per actor type. The
//! interactive branch runs message passing over all actors in the SDV-centred frame and
//! mixes in an embedding of the rasterized scene. Predictions are
//! `T_i(Z_ind) + Z_inter`.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize};

use crate::autodiff::{Graph, Var};
use crate::error::{Error, Result};
use crate::nmmp::{NmmpConfig, NmmpModule, NmmpOutput, SceneGraph};
use crate::nn::{Activation, ConvEncoder, Mlp};
use crate::params::ParamStore;
use crate::pedestrian::{DiscInteraction, Discriminator, PedestrianConfig, PredictionBatch};
use crate::raster::{rasterize, RasterImage, RasterSpec};
use crate::tensor::{lit, Matrix, Scalar};
use crate::trajectory::{displacements, ActorType, Point, TrajectoryWindow};

fn de_actor_type<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<ActorType, D::Error> {
    let tag = String::deserialize(d)?;
    Ok(ActorType::from_tag(&tag))
}

fn default_timestep() -> f64 {
    0.1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointActor {
    pub id: String,
    #[serde(rename = "type", deserialize_with = "de_actor_type", default)]
    pub actor_type: ActorType,
    /// Heading at `t = 0`, radians in the global frame.
    pub heading: f64,
    pub observed: Vec<Point>,
    #[serde(default)]
    pub future: Vec<Point>,
}

impl JointActor {
    pub fn current(&self) -> Point {
        *self.observed.last().expect("actor has no observed points")
    }

    pub fn ego_frame(&self) -> EgoFrame {
        EgoFrame { origin: self.current(), heading: self.heading }
    }

    pub fn window(&self, timestep: f64) -> TrajectoryWindow {
        TrajectoryWindow::new(self.id.clone(), self.observed.clone(), self.future.clone(), timestep)
            .with_type(self.actor_type)
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct SdvPose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

/// One joint scene; coordinates are SDV-centred metres.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointSceneSample {
    #[serde(default)]
    pub id: String,
    pub actors: Vec<JointActor>,
    pub sdv: SdvPose,
    #[serde(default)]
    pub drivable: Vec<Vec<Point>>,
    #[serde(default = "default_timestep")]
    pub timestep: f64,
    #[serde(skip)]
    pub raster: Option<RasterImage>,
}

impl JointSceneSample {
    pub fn n_actors(&self) -> usize {
        self.actors.len()
    }

    pub fn windows(&self) -> Vec<TrajectoryWindow> {
        self.actors.iter().map(|a| a.window(self.timestep)).collect()
    }

    /// Translates everything so the SDV sits at the origin.
    pub fn centered(&self) -> Self {
        let (ox, oy) = (self.sdv.x, self.sdv.y);
        let shift = |p: &Point| [p[0] - ox, p[1] - oy];
        Self {
            actors: self
                .actors
                .iter()
                .map(|a| JointActor {
                    observed: a.observed.iter().map(shift).collect(),
                    future: a.future.iter().map(shift).collect(),
                    ..a.clone()
                })
                .collect(),
            sdv: SdvPose { x: 0.0, y: 0.0, heading: self.sdv.heading },
            drivable: self.drivable.iter().map(|poly| poly.iter().map(shift).collect()).collect(),
            raster: None,
            ..self.clone()
        }
    }

    /// Rotates the whole scene about the SDV by `theta`.
    pub fn rotated(&self, theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        let (ox, oy) = (self.sdv.x, self.sdv.y);
        let rot = |p: &Point| {
            let (dx, dy) = (p[0] - ox, p[1] - oy);
            [ox + c * dx - s * dy, oy + s * dx + c * dy]
        };
        Self {
            actors: self
                .actors
                .iter()
                .map(|a| JointActor {
                    heading: a.heading + theta,
                    observed: a.observed.iter().map(rot).collect(),
                    future: a.future.iter().map(rot).collect(),
                    ..a.clone()
                })
                .collect(),
            sdv: SdvPose { heading: self.sdv.heading + theta, ..self.sdv },
            drivable: self.drivable.iter().map(|poly| poly.iter().map(rot).collect()).collect(),
            raster: None,
            ..self.clone()
        }
    }

    pub fn validate(&self, t_obs: usize, t_pred: usize, need_future: bool) -> Result<()> {
        if self.actors.is_empty() {
            return Err(Error::InvalidInput(format!("joint scene {} has no actors", self.id)));
        }
        if self.sdv.x.abs() > 1e-9 || self.sdv.y.abs() > 1e-9 {
            return Err(Error::InvalidInput(format!("joint scene {} is not SDV-centred", self.id)));
        }
        if !self.sdv.heading.is_finite() {
            return Err(Error::InvalidInput(format!("joint scene {}: non-finite SDV heading", self.id)));
        }
        for a in &self.actors {
            if !a.heading.is_finite() {
                return Err(Error::InvalidInput(format!("actor {}: non-finite heading", a.id)));
            }
            let w = a.window(self.timestep);
            if need_future {
                w.validate(t_obs, t_pred)?;
            } else {
                TrajectoryWindow { future: vec![[0.0; 2]; t_pred], ..w }.validate(t_obs, t_pred)?;
            }
        }
        Ok(())
    }

    pub fn parse_jsonl(text: &str, origin: &Path) -> Result<Vec<Self>> {
        let mut out = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut s: Self = serde_json::from_str(line).map_err(|e| Error::Parse {
                path: origin.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })?;
            if s.id.is_empty() {
                s.id = format!("line{}", i + 1);
            }
            out.push(s);
        }
        Ok(out)
    }

    pub fn read_jsonl(path: &Path) -> Result<Vec<Self>> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut text = String::new();
        for line in BufReader::new(f).lines() {
            text.push_str(&line.map_err(|e| Error::io(path, e))?);
            text.push('\n');
        }
        Self::parse_jsonl(&text, path)
    }

    pub fn write_jsonl(samples: &[Self], path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| Error::io(path, e))?);
        for s in samples {
            serde_json::to_writer(&mut f, s)?;
            f.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        }
        f.flush().map_err(|e| Error::io(path, e))
    }
}

/// Ego frame of one actor.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct EgoFrame {
    pub origin: Point,
    pub heading: f64,
}

impl EgoFrame {
    /// Translate to the origin, then rotate by `-heading`.
    pub fn to_ego(&self, p: Point) -> Point {
        let (s, c) = self.heading.sin_cos();
        let (dx, dy) = (p[0] - self.origin[0], p[1] - self.origin[1]);
        [c * dx + s * dy, -s * dx + c * dy]
    }

    pub fn from_ego(&self, p: Point) -> Point {
        let (s, c) = self.heading.sin_cos();
        [self.origin[0] + c * p[0] - s * p[1], self.origin[1] + s * p[0] + c * p[1]]
    }

    pub fn rotation<T: Scalar>(&self) -> [T; 4] {
        let (s, c) = self.heading.sin_cos();
        [lit(c), lit(-s), lit(s), lit(c)]
    }
}

pub fn to_ego(points: &[Point], frame: &EgoFrame) -> Vec<Point> {
    points.iter().map(|&p| frame.to_ego(p)).collect()
}

pub fn from_ego(points: &[Point], frame: &EgoFrame) -> Vec<Point> {
    points.iter().map(|&p| frame.from_ego(p)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct JointConfig {
    pub t_obs: usize,
    pub t_pred: usize,
    pub nmmp: NmmpConfig,
    pub enc_hidden: Vec<usize>,
    pub latent_dim: usize,
    pub dec_hidden: Vec<usize>,
    pub scene_channels: Vec<usize>,
    pub scene_dim: usize,
    pub inter_hidden: Vec<usize>,
    pub activation: Activation,
    pub raster: RasterSpec,
    /// Adds a trajectory discriminator trained against the final predictions.
    pub gan: bool,
    pub disc_nmmp: NmmpConfig,
    pub disc_cls_hidden: Vec<usize>,
}

impl Default for JointConfig {
    fn default() -> Self {
        Self {
            t_obs: 5,
            t_pred: 30,
            nmmp: NmmpConfig::default(),
            enc_hidden: vec![64],
            latent_dim: 64,
            dec_hidden: vec![64],
            scene_channels: vec![8, 16, 32, 32],
            scene_dim: 32,
            inter_hidden: vec![64],
            activation: Activation::Relu,
            raster: RasterSpec::default(),
            gan: false,
            disc_nmmp: NmmpConfig { iterations: 1, ..NmmpConfig::default() },
            disc_cls_hidden: vec![64],
        }
    }
}

impl JointConfig {
    pub fn validate(&self) -> Result<()> {
        self.nmmp.validate()?;
        self.raster.validate()?;
        if self.t_obs == 0 || self.t_pred == 0 {
            return Err(Error::Config("t_obs and t_pred must be positive".into()));
        }
        if self.latent_dim == 0 || self.scene_dim == 0 {
            return Err(Error::Config("latent_dim and scene_dim must be positive".into()));
        }
        if self.gan {
            self.disc_nmmp.validate()?;
        }
        Ok(())
    }

    fn disc_config(&self) -> PedestrianConfig {
        PedestrianConfig {
            t_obs: self.t_obs,
            t_pred: self.t_pred,
            disc_nmmp: self.disc_nmmp.clone(),
            disc_interaction: DiscInteraction::Nmmp,
            disc_cls_hidden: self.disc_cls_hidden.clone(),
            ..PedestrianConfig::default()
        }
    }
}

#[derive(Clone, Debug)]
pub struct IndividualBranch {
    pub encoder: Mlp,
    pub decoder: Mlp,
}

impl IndividualBranch {
    fn forward<T: Scalar>(&self, g: &mut Graph<T>, x: Var) -> Var {
        let latent = self.encoder.forward(g, x);
        let latent = self.encoder.activation.apply(g, latent);
        self.decoder.forward(g, latent)
    }
}

#[derive(Clone, Debug)]
pub struct JointNet {
    /// Indexed by [`ActorType::index`].
    pub branches: Vec<IndividualBranch>,
    pub nmmp: NmmpModule,
    pub scene: ConvEncoder,
    pub inter: Mlp,
    pub discriminator: Option<Discriminator>,
}

/// Differentiable outputs for a batch of joint scenes, actors in scene order.
pub struct JointForward {
    /// Ego-frame `Z_ind`, `n x 2 T_pred`.
    pub z_ind: Var,
    /// `T_i(Z_ind)` in the global frame.
    pub individual: Var,
    pub interaction: Var,
    pub predicted: Var,
    pub topo: SceneGraph,
}

impl JointNet {
    pub fn new<T: Scalar, R: Rng + ?Sized>(store: &mut ParamStore<T>, rng: &mut R, c: &JointConfig) -> Self {
        let branches = ActorType::ALL
            .iter()
            .map(|t| {
                let name = format!("joint.ind.{}", actor_type_name(*t));
                IndividualBranch {
                    encoder: Mlp::new(
                        store,
                        rng,
                        &format!("{name}.enc"),
                        2 * c.t_obs,
                        &c.enc_hidden,
                        c.latent_dim,
                        c.activation,
                    ),
                    decoder: Mlp::new(
                        store,
                        rng,
                        &format!("{name}.dec"),
                        c.latent_dim,
                        &c.dec_hidden,
                        2 * c.t_pred,
                        c.activation,
                    ),
                }
            })
            .collect();
        let nmmp = NmmpModule::new(store, rng, "joint.nmmp", &c.nmmp);
        let scene = ConvEncoder::new(
            store,
            rng,
            "joint.scene",
            &c.scene_channels,
            c.scene_dim,
            c.raster.height,
            c.raster.width,
        );
        let inter = Mlp::new(
            store,
            rng,
            "joint.inter",
            c.nmmp.embed_dim + c.scene_dim,
            &c.inter_hidden,
            2 * c.t_pred,
            c.activation,
        );
        let discriminator = c.gan.then(|| Discriminator::new(store, rng, &c.disc_config()));
        Self { branches, nmmp, scene, inter, discriminator }
    }

    fn branch(&self, t: ActorType) -> &IndividualBranch {
        &self.branches[t.index()]
    }

    /// `Z_ind` for actors `actors`, rows in the given order.
    pub fn individual<T: Scalar>(&self, g: &mut Graph<T>, actors: &[&JointActor]) -> Var {
        let input = g.constant(ego_displacement_matrix(actors));
        let mut parts = Vec::new();
        let mut order = Vec::new();
        for t in ActorType::ALL {
            let idx: Vec<usize> = (0..actors.len()).filter(|&i| actors[i].actor_type == t).collect();
            if idx.is_empty() {
                continue;
            }
            let x = g.gather_rows(input, &idx);
            parts.push(self.branch(t).forward(g, x));
            order.extend(idx);
        }
        let stacked = g.concat_rows(&parts);
        let mut inverse = vec![0; order.len()];
        for (row, &actor) in order.iter().enumerate() {
            inverse[actor] = row;
        }
        g.gather_rows(stacked, &inverse)
    }

    pub fn scene_embedding<T: Scalar>(&self, g: &mut Graph<T>, image: &Matrix<T>) -> Result<Var> {
        let x = g.constant(image.clone());
        self.scene.forward(g, x)
    }

    /// `Z_inter` for consecutive scenes; `scene_emb` is `n_scenes x scene_dim`.
    pub fn interactive<T: Scalar>(
        &self,
        g: &mut Graph<T>,
        windows: &[&TrajectoryWindow],
        topo: &SceneGraph,
        scene_emb: Var,
    ) -> Var {
        let (_, v, _) = self.nmmp.forward_windows(g, windows, topo);
        let s = g.gather_rows(scene_emb, &topo.node_scene());
        let cat = g.concat_cols(&[v, s]);
        self.inter.forward(g, cat)
    }

    pub fn forward<T: Scalar>(
        &self,
        g: &mut Graph<T>,
        samples: &[&JointSceneSample],
        images: &[Matrix<T>],
    ) -> Result<JointForward> {
        let actors: Vec<&JointActor> = samples.iter().flat_map(|s| s.actors.iter()).collect();
        let windows: Vec<TrajectoryWindow> = samples.iter().flat_map(|s| s.windows()).collect();
        let window_refs: Vec<&TrajectoryWindow> = windows.iter().collect();
        let sizes: Vec<usize> = samples.iter().map(|s| s.n_actors()).collect();
        let topo = SceneGraph::fully_connected(&sizes);

        let z_ind = self.individual(g, &actors);
        let individual = ego_to_global(g, z_ind, &actors);

        let mut embs = Vec::with_capacity(images.len());
        for img in images {
            embs.push(self.scene_embedding(g, img)?);
        }
        let scene_emb = g.concat_rows(&embs);
        let interaction = self.interactive(g, &window_refs, &topo, scene_emb);
        let predicted = g.add(individual, interaction);
        Ok(JointForward { z_ind, individual, interaction, predicted, topo })
    }
}

fn actor_type_name(t: ActorType) -> &'static str {
    match t {
        ActorType::Pedestrian => "pedestrian",
        ActorType::Vehicle => "vehicle",
        ActorType::Other => "other",
    }
}

/// Observed displacements rotated into each actor's ego frame, `n x 2 T_obs`.
pub fn ego_displacement_matrix<T: Scalar>(actors: &[&JointActor]) -> Matrix<T> {
    let rows: Vec<Vec<T>> = actors
        .iter()
        .map(|a| {
            let f = a.ego_frame();
            let ego = to_ego(&a.observed, &f);
            displacements(&ego).iter().flat_map(|d| [lit::<T>(d[0]), lit::<T>(d[1])]).collect()
        })
        .collect();
    let cols = rows.first().map_or(0, Vec::len);
    Matrix::from_vec(rows.len(), cols, rows.into_iter().flatten().collect())
}

/// Differentiable `T_i`: rotate each row's pairs by the actor heading, then translate.
pub fn ego_to_global<T: Scalar>(g: &mut Graph<T>, z: Var, actors: &[&JointActor]) -> Var {
    let mats: Vec<[T; 4]> = actors.iter().map(|a| a.ego_frame().rotation()).collect();
    let rotated = g.pair_transform(z, &mats);
    let cols = g.shape(z).1;
    let mut offset = Matrix::zeros(actors.len(), cols);
    for (r, a) in actors.iter().enumerate() {
        let p = a.current();
        for pair in offset.row_mut(r).chunks_exact_mut(2) {
            pair[0] = lit(p[0]);
            pair[1] = lit(p[1]);
        }
    }
    let offset = g.constant(offset);
    g.add(rotated, offset)
}

fn rows_to_points<T: Scalar>(m: &Matrix<T>) -> Vec<Vec<Point>> {
    (0..m.rows())
        .map(|r| m.row(r).chunks_exact(2).map(|c| [c[0].to_f64_lossy(), c[1].to_f64_lossy()]).collect())
        .collect()
}

#[derive(Clone, Debug)]
pub struct JointModel<T: Scalar> {
    pub store: ParamStore<T>,
    pub net: JointNet,
    pub config: JointConfig,
}

impl<T: Scalar> JointModel<T> {
    pub fn new(config: &JointConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let net = JointNet::new(&mut store, &mut rng, config);
        Ok(Self { store, net, config: config.clone() })
    }

    /// The sample's own raster if present, otherwise a fresh rendering.
    pub fn image(&self, sample: &JointSceneSample) -> Result<Matrix<T>> {
        match &sample.raster {
            Some(r) => Ok(r.to_matrix()),
            None => Ok(rasterize(sample, &self.config.raster)?.to_matrix()),
        }
    }

    /// Ego-frame `Z_ind` of one actor (`T_pred` points).
    pub fn individual_forward(&self, actor: &JointActor) -> Result<Vec<Point>> {
        let w = actor.window(0.1);
        TrajectoryWindow { future: vec![[0.0; 2]; self.config.t_pred], ..w }
            .validate(self.config.t_obs, self.config.t_pred)?;
        if !actor.heading.is_finite() {
            return Err(Error::InvalidInput(format!("actor {}: non-finite heading", actor.id)));
        }
        let mut g = Graph::new(&self.store);
        let z = self.net.individual(&mut g, &[actor]);
        Ok(rows_to_points(g.value(z)).remove(0))
    }

    pub fn encode_scene(&self, raster: &RasterImage) -> Result<Vec<T>> {
        let mut g = Graph::new(&self.store);
        let s = self.net.scene_embedding(&mut g, &raster.to_matrix())?;
        Ok(g.value(s).data().to_vec())
    }

    /// Global-frame `Z_inter` per actor for one scene and a given scene embedding.
    pub fn interactive_forward(&self, sample: &JointSceneSample, scene_embedding: &[T]) -> Result<Vec<Vec<Point>>> {
        sample.validate(self.config.t_obs, self.config.t_pred, false)?;
        if scene_embedding.len() != self.config.scene_dim {
            return Err(Error::Shape(format!(
                "scene embedding has {} entries, expected {}",
                scene_embedding.len(),
                self.config.scene_dim
            )));
        }
        let windows = sample.windows();
        let refs: Vec<&TrajectoryWindow> = windows.iter().collect();
        let topo = SceneGraph::fully_connected(&[windows.len()]);
        let mut g = Graph::new(&self.store);
        let s = g.constant(Matrix::row_vector(scene_embedding.to_vec()));
        let z = self.net.interactive(&mut g, &refs, &topo, s);
        Ok(rows_to_points(g.value(z)))
    }

    /// NMMP embeddings of the interactive branch for one scene.
    pub fn interactions(&self, sample: &JointSceneSample) -> Result<NmmpOutput<T>> {
        sample.validate(self.config.t_obs, self.config.t_pred, false)?;
        self.net.nmmp.run(&self.store, &sample.windows())
    }

    /// `individual_component` holds `T_i(Z_ind)`, `interaction_component` holds `Z_inter`.
    pub fn predict_joint(&self, sample: &JointSceneSample) -> Result<PredictionBatch> {
        sample.validate(self.config.t_obs, self.config.t_pred, false)?;
        let image = self.image(sample)?;
        let mut g = Graph::new(&self.store);
        let out = self.net.forward(&mut g, &[sample], &[image])?;
        Ok(PredictionBatch {
            predicted: rows_to_points(g.value(out.predicted)),
            individual_component: rows_to_points(g.value(out.individual)),
            interaction_component: rows_to_points(g.value(out.interaction)),
            noise_seed: None,
        })
    }
}

fn squared_error(pred: &[Vec<Point>], truth: &[Vec<Point>]) -> f64 {
    pred.iter()
        .zip(truth)
        .map(|(p, t)| p.iter().zip(t).map(|(a, b)| (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sum::<f64>())
        .sum()
}

/// `λ L_ind + (1 - λ) L_final` with summed squared errors.
pub fn joint_loss(pred: &PredictionBatch, sample: &JointSceneSample, lambda: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidInput(format!("lambda {lambda} outside [0, 1]")));
    }
    let truth: Vec<Vec<Point>> = sample.actors.iter().map(|a| a.future.clone()).collect();
    let l_ind = squared_error(&pred.individual_component, &truth);
    let l_final = squared_error(&pred.predicted, &truth);
    Ok(combine_losses(l_ind, l_final, lambda))
}

pub fn combine_losses(l_ind: f64, l_final: f64, lambda: f64) -> f64 {
    lambda * l_ind + (1.0 - lambda) * l_final
}

/// Differentiable joint loss over a batch; returns `(L, L_ind, L_final)`.
pub fn joint_loss_graph<T: Scalar>(
    g: &mut Graph<T>,
    out: &JointForward,
    target: &Matrix<T>,
    lambda: f64,
) -> (Var, Var, Var) {
    let l_ind = crate::pedestrian::l2_loss(g, out.individual, target);
    let l_final = crate::pedestrian::l2_loss(g, out.predicted, target);
    let a = g.scale(l_ind, lit(lambda));
    let b = g.scale(l_final, lit(1.0 - lambda));
    (g.add(a, b), l_ind, l_final)
}

/// `n x 2 T_pred` ground-truth futures of consecutive samples.
pub fn future_matrix<T: Scalar>(samples: &[&JointSceneSample]) -> Matrix<T> {
    let futs: Vec<&[Point]> = samples.iter().flat_map(|s| s.actors.iter().map(|a| a.future.as_slice())).collect();
    crate::pedestrian::trajectories_matrix(&futs)
}

/// Synthetic road scenes: a straight two-lane road, a leading vehicle with a varying
/// speed, a follower replaying the leader's path with a fixed delay, an oncoming
/// vehicle and a pair of pedestrians walking side by side on the verge.
pub fn synthesize_joint_scenes(
    n_scenes: usize,
    t_obs: usize,
    t_pred: usize,
    timestep: f64,
    seed: u64,
) -> Vec<JointSceneSample> {
    const DELAY: usize = 8;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = t_obs + 1 + t_pred;
    let road = vec![vec![[-60.0, -4.0], [60.0, -4.0], [60.0, 4.0], [-60.0, 4.0]]];
    let mut out = Vec::with_capacity(n_scenes);
    for s in 0..n_scenes {
        // Leader path long enough for the follower's delayed replay.
        let total = len + DELAY;
        let mut speed: f64 = rng.random_range(4.0..9.0);
        let accel: f64 = rng.random_range(-2.0..2.0);
        let change_at = rng.random_range(0..total);
        let mut x: f64 = rng.random_range(-25.0..-5.0);
        let mut leader_path = Vec::with_capacity(total);
        for t in 0..total {
            leader_path.push([x, -2.0]);
            if t >= change_at {
                speed = (speed + accel * timestep).max(0.0);
            }
            x += speed * timestep;
        }
        let leader: Vec<Point> = leader_path[DELAY..].to_vec();
        let follower: Vec<Point> = leader_path[..len].to_vec();
        let onc_speed: f64 = rng.random_range(4.0..9.0);
        let onc_x0: f64 = rng.random_range(5.0..30.0);
        let oncoming: Vec<Point> = (0..len).map(|t| [onc_x0 - onc_speed * timestep * t as f64, 2.0]).collect();
        let walk: f64 = rng.random_range(0.8..1.6);
        let dir = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let px0: f64 = rng.random_range(-15.0..15.0);
        let ped = |offset: f64| -> Vec<Point> {
            (0..len).map(|t| [px0 + dir * walk * timestep * t as f64, 5.0 + offset]).collect()
        };
        let mk = |id: &str, ty: ActorType, path: Vec<Point>, heading: f64| JointActor {
            id: id.to_string(),
            actor_type: ty,
            heading,
            observed: path[..=t_obs].to_vec(),
            future: path[t_obs + 1..].to_vec(),
        };
        let ped_heading = if dir > 0.0 { 0.0 } else { std::f64::consts::PI };
        let actors = vec![
            mk("leader", ActorType::Vehicle, leader, 0.0),
            mk("follower", ActorType::Vehicle, follower, 0.0),
            mk("oncoming", ActorType::Vehicle, oncoming, std::f64::consts::PI),
            mk("ped_a", ActorType::Pedestrian, ped(0.0), ped_heading),
            mk("ped_b", ActorType::Pedestrian, ped(0.8), ped_heading),
        ];
        out.push(JointSceneSample {
            id: format!("synth{s}"),
            actors,
            sdv: SdvPose::default(),
            drivable: road.clone(),
            timestep,
            raster: None,
        });
    }
    out
}
