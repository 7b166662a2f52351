//! Neural motion message passing.
//!
//! Each actor's observed displacements are embedded by a pointwise MLP and integrated by
//! an LSTM into a trajectory embedding `h_i`. Actors become nodes of a fully-connected
//! directed graph without self-loops: node embeddings start as `f_v^0(h_i)` and edge
//! embeddings as `f_e^0([v_i; v_j; f_spatial(p_i - p_j)])`. Each of the `K` rounds then
//! runs an edge-to-node update that concatenates the degree-normalised sums of incoming
//! and outgoing edges, followed by a node-to-edge update on `[v_i; v_j]`.
//!
//! Several scenes can share one [`SceneGraph`]; edges never cross scene boundaries.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, Var};
use crate::error::{Error, Result};
use crate::nn::{Activation, Lstm, Mlp};
use crate::params::ParamStore;
use crate::tensor::{Matrix, Scalar};
use crate::trajectory::{Point, TrajectoryWindow};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MlpWidths {
    pub temp: Vec<usize>,
    pub spatial: Vec<usize>,
    pub node: Vec<usize>,
    pub edge: Vec<usize>,
}

impl Default for MlpWidths {
    fn default() -> Self {
        Self { temp: vec![64], spatial: vec![64], node: vec![64], edge: vec![64] }
    }
}

impl MlpWidths {
    pub fn uniform(width: usize) -> Self {
        Self { temp: vec![width], spatial: vec![width], node: vec![width], edge: vec![width] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NmmpConfig {
    /// Node and edge embedding width `D`.
    pub embed_dim: usize,
    /// Number of message-passing rounds `K`.
    pub iterations: usize,
    pub mlp_widths: MlpWidths,
    /// Width of the trajectory embedding `h_i`.
    pub lstm_hidden: usize,
    pub activation: Activation,
}

impl Default for NmmpConfig {
    fn default() -> Self {
        Self {
            embed_dim: 64,
            iterations: 5,
            mlp_widths: MlpWidths::default(),
            lstm_hidden: 64,
            activation: Activation::Relu,
        }
    }
}

impl NmmpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.embed_dim == 0 {
            return Err(Error::Config("embed_dim must be at least 1".into()));
        }
        if self.lstm_hidden == 0 {
            return Err(Error::Config("lstm_hidden must be at least 1".into()));
        }
        Ok(())
    }
}

/// Fully-connected directed topology over one or more scenes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SceneGraph {
    pub n_nodes: usize,
    pub src: Vec<usize>,
    pub dst: Vec<usize>,
    pub in_degree: Vec<usize>,
    pub out_degree: Vec<usize>,
    /// First node index of each scene, plus a final sentinel equal to `n_nodes`.
    pub scene_offsets: Vec<usize>,
}

impl SceneGraph {
    /// Builds the complete directed graph without self-loops inside each scene.
    /// Edges are ordered scene by scene, source-major.
    pub fn fully_connected(scene_sizes: &[usize]) -> Self {
        let n_nodes: usize = scene_sizes.iter().sum();
        let mut src = Vec::new();
        let mut dst = Vec::new();
        let mut in_degree = vec![0; n_nodes];
        let mut out_degree = vec![0; n_nodes];
        let mut scene_offsets = vec![0];
        let mut base = 0;
        for &n in scene_sizes {
            for i in base..base + n {
                for j in base..base + n {
                    if i != j {
                        src.push(i);
                        dst.push(j);
                        out_degree[i] += 1;
                        in_degree[j] += 1;
                    }
                }
            }
            base += n;
            scene_offsets.push(base);
        }
        Self { n_nodes, src, dst, in_degree, out_degree, scene_offsets }
    }

    pub fn n_edges(&self) -> usize {
        self.src.len()
    }

    pub fn n_scenes(&self) -> usize {
        self.scene_offsets.len() - 1
    }

    /// Scene index of every node.
    pub fn node_scene(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.n_nodes);
        for s in 0..self.n_scenes() {
            out.extend(std::iter::repeat_n(s, self.scene_offsets[s + 1] - self.scene_offsets[s]));
        }
        out
    }

    /// Edge index of `(i, j)`, if the edge exists.
    pub fn edge_index(&self, i: usize, j: usize) -> Option<usize> {
        (0..self.n_edges()).find(|&e| self.src[e] == i && self.dst[e] == j)
    }
}

/// Displacement encoder: pointwise MLP followed by an LSTM; the last hidden state is the
/// trajectory embedding.
#[derive(Clone, Debug)]
pub struct TrajectoryEncoder {
    pub f_temp: Mlp,
    pub lstm: Lstm,
}

impl TrajectoryEncoder {
    pub fn new<T: Scalar, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        rng: &mut R,
        prefix: &str,
        temp_hidden: &[usize],
        temp_out: usize,
        lstm_hidden: usize,
        activation: Activation,
    ) -> Self {
        let f_temp = Mlp::new(store, rng, &format!("{prefix}.f_temp"), 2, temp_hidden, temp_out, activation);
        let lstm = Lstm::new(store, rng, &format!("{prefix}.lstm"), temp_out, lstm_hidden);
        Self { f_temp, lstm }
    }

    pub fn hidden_dim(&self) -> usize {
        self.lstm.hidden_dim
    }

    /// `steps[t]` is the `n x 2` matrix of displacements at step `t`, oldest first.
    pub fn forward<T: Scalar>(&self, g: &mut Graph<T>, steps: &[Matrix<T>]) -> Var {
        let vars: Vec<Var> = steps.iter().map(|s| g.constant(s.clone())).collect();
        self.forward_vars(g, &vars)
    }

    /// Same as [`TrajectoryEncoder::forward`] with displacement steps already on the graph.
    pub fn forward_vars<T: Scalar>(&self, g: &mut Graph<T>, steps: &[Var]) -> Var {
        let n = steps.first().map_or(0, |&s| g.shape(s).0);
        let hd = self.lstm.hidden_dim;
        let mut h = g.constant(Matrix::zeros(n, hd));
        let mut c = g.constant(Matrix::zeros(n, hd));
        for &x in steps {
            let e = self.f_temp.forward(g, x);
            (h, c) = self.lstm.step(g, e, h, c);
        }
        h
    }
}

/// The message-passing graph network: `f_spatial`, and `f_v^k`, `f_e^k` for `k = 0..=K`
/// with separate weights per round.
#[derive(Clone, Debug)]
pub struct Nmmp {
    pub f_spatial: Mlp,
    pub f_v: Vec<Mlp>,
    pub f_e: Vec<Mlp>,
    pub embed_dim: usize,
}

impl Nmmp {
    pub fn new<T: Scalar, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        rng: &mut R,
        prefix: &str,
        input_dim: usize,
        config: &NmmpConfig,
    ) -> Self {
        let d = config.embed_dim;
        let w = &config.mlp_widths;
        let act = config.activation;
        let f_spatial = Mlp::new(store, rng, &format!("{prefix}.f_spatial"), 2, &w.spatial, d, act);
        let mut f_v = Vec::with_capacity(config.iterations + 1);
        let mut f_e = Vec::with_capacity(config.iterations + 1);
        for k in 0..=config.iterations {
            let (v_in, e_in) = if k == 0 { (input_dim, 3 * d) } else { (2 * d, 2 * d) };
            f_v.push(Mlp::new(store, rng, &format!("{prefix}.f_v.{k}"), v_in, &w.node, d, act));
            f_e.push(Mlp::new(store, rng, &format!("{prefix}.f_e.{k}"), e_in, &w.edge, d, act));
        }
        Self { f_spatial, f_v, f_e, embed_dim: d }
    }

    pub fn iterations(&self) -> usize {
        self.f_v.len() - 1
    }

    /// Initial node and edge embeddings. `positions` is the `n x 2` node of current
    /// coordinates.
    pub fn init<T: Scalar>(&self, g: &mut Graph<T>, h: Var, positions: Var, topo: &SceneGraph) -> (Var, Option<Var>) {
        let v0 = self.f_v[0].forward(g, h);
        if topo.n_edges() == 0 {
            return (v0, None);
        }
        let pi = g.gather_rows(positions, &topo.src);
        let pj = g.gather_rows(positions, &topo.dst);
        let rel = g.sub(pi, pj);
        let d = self.f_spatial.forward(g, rel);
        let vi = g.gather_rows(v0, &topo.src);
        let vj = g.gather_rows(v0, &topo.dst);
        let cat = g.concat_cols(&[vi, vj, d]);
        let e0 = self.f_e[0].forward(g, cat);
        (v0, Some(e0))
    }

    /// One edge-to-node then node-to-edge round producing iteration `k + 1`.
    /// Nodes without edges keep their embedding.
    pub fn round<T: Scalar>(
        &self,
        g: &mut Graph<T>,
        k: usize,
        v: Var,
        e: Option<Var>,
        topo: &SceneGraph,
    ) -> (Var, Option<Var>) {
        let Some(e) = e else { return (v, None) };
        let n = topo.n_nodes;
        let incoming = g.segment_mean(e, &topo.dst, n);
        let outgoing = g.segment_mean(e, &topo.src, n);
        let agg = g.concat_cols(&[incoming, outgoing]);
        let mut v_next = self.f_v[k + 1].forward(g, agg);
        let isolated: Vec<usize> = (0..n).filter(|&i| topo.in_degree[i] == 0).collect();
        if !isolated.is_empty() {
            let both = g.concat_rows(&[v_next, v]);
            let idx: Vec<usize> = (0..n).map(|i| if topo.in_degree[i] == 0 { n + i } else { i }).collect();
            v_next = g.gather_rows(both, &idx);
        }
        let vi = g.gather_rows(v_next, &topo.src);
        let vj = g.gather_rows(v_next, &topo.dst);
        let cat = g.concat_cols(&[vi, vj]);
        let e_next = self.f_e[k + 1].forward(g, cat);
        (v_next, Some(e_next))
    }

    /// Initialisation followed by all `K` rounds.
    pub fn forward<T: Scalar>(
        &self,
        g: &mut Graph<T>,
        h: Var,
        positions: Var,
        topo: &SceneGraph,
    ) -> (Var, Option<Var>) {
        let (mut v, mut e) = self.init(g, h, positions, topo);
        for k in 0..self.iterations() {
            (v, e) = self.round(g, k, v, e, topo);
        }
        (v, e)
    }
}

/// Encoder plus graph network, sharing one parameter store.
#[derive(Clone, Debug)]
pub struct NmmpModule {
    pub encoder: TrajectoryEncoder,
    pub graph: Nmmp,
    pub config: NmmpConfig,
}

impl NmmpModule {
    pub fn new<T: Scalar, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        rng: &mut R,
        prefix: &str,
        config: &NmmpConfig,
    ) -> Self {
        let encoder = TrajectoryEncoder::new(
            store,
            rng,
            prefix,
            &config.mlp_widths.temp,
            config.embed_dim,
            config.lstm_hidden,
            config.activation,
        );
        let graph = Nmmp::new(store, rng, prefix, config.lstm_hidden, config);
        Self { encoder, graph, config: config.clone() }
    }

    /// Embeds and runs message passing for a batch of scenes (given as consecutive
    /// windows) on the graph `g`. Returns `(h, v, e)`.
    pub fn forward_windows<T: Scalar>(
        &self,
        g: &mut Graph<T>,
        windows: &[&TrajectoryWindow],
        topo: &SceneGraph,
    ) -> (Var, Var, Option<Var>) {
        let steps = displacement_steps(windows);
        let h = self.encoder.forward(g, &steps);
        let positions = g.constant(current_positions(windows));
        let (v, e) = self.graph.forward(g, h, positions, topo);
        (h, v, e)
    }
}

/// Node and directed-edge embeddings at one message-passing iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct InteractionGraphState<T: Scalar> {
    pub node_embeddings: Matrix<T>,
    /// One row per ordered pair in `pairs`.
    pub edge_embeddings: Matrix<T>,
    pub pairs: Vec<(usize, usize)>,
    pub in_degree: Vec<usize>,
    pub out_degree: Vec<usize>,
}

impl<T: Scalar> InteractionGraphState<T> {
    pub fn n_nodes(&self) -> usize {
        self.node_embeddings.rows()
    }

    pub fn n_edges(&self) -> usize {
        self.pairs.len()
    }

    pub fn node(&self, i: usize) -> &[T] {
        self.node_embeddings.row(i)
    }

    pub fn edge(&self, i: usize, j: usize) -> Option<&[T]> {
        self.pairs.iter().position(|&p| p == (i, j)).map(|e| self.edge_embeddings.row(e))
    }

    fn topology(&self) -> SceneGraph {
        SceneGraph {
            n_nodes: self.n_nodes(),
            src: self.pairs.iter().map(|p| p.0).collect(),
            dst: self.pairs.iter().map(|p| p.1).collect(),
            in_degree: self.in_degree.clone(),
            out_degree: self.out_degree.clone(),
            scene_offsets: vec![0, self.n_nodes()],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NmmpOutput<T: Scalar> {
    /// `h_i`, one row per actor.
    pub trajectory_embeddings: Matrix<T>,
    /// `v_i = v_i^K`.
    pub actor_embeddings: Matrix<T>,
    /// `e_ij = e_ij^K`, one row per entry of `pairs`.
    pub interaction_embeddings: Matrix<T>,
    pub pairs: Vec<(usize, usize)>,
}

impl<T: Scalar> NmmpOutput<T> {
    pub fn interaction(&self, i: usize, j: usize) -> Option<&[T]> {
        self.pairs.iter().position(|&p| p == (i, j)).map(|e| self.interaction_embeddings.row(e))
    }
}

/// Self-contained NMMP with its own weights, exposing the value-level operations.
#[derive(Clone, Debug)]
pub struct NmmpModel<T: Scalar> {
    pub store: ParamStore<T>,
    pub module: NmmpModule,
}

impl<T: Scalar> NmmpModel<T> {
    pub fn new(config: &NmmpConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let module = NmmpModule::new(&mut store, &mut rng, "nmmp", config);
        Ok(Self { store, module })
    }

    pub fn config(&self) -> &NmmpConfig {
        &self.module.config
    }

    /// Trajectory embedding `h_i` of one window.
    pub fn embed_trajectory(&self, window: &TrajectoryWindow) -> Result<Vec<T>> {
        window.check_finite()?;
        if window.observed.len() < 2 {
            return Err(Error::Shape(format!(
                "actor {}: need at least 2 observed points, got {}",
                window.actor_id,
                window.observed.len()
            )));
        }
        let mut g = Graph::new(&self.store);
        let steps = displacement_steps(&[window]);
        let h = self.module.encoder.forward(&mut g, &steps);
        Ok(g.value(h).row(0).to_vec())
    }

    /// Iteration-0 graph state from windows and their trajectory embeddings.
    pub fn init_graph(&self, windows: &[TrajectoryWindow], embeddings: &[Vec<T>]) -> Result<InteractionGraphState<T>> {
        if windows.is_empty() {
            return Err(Error::InvalidInput("no actors".into()));
        }
        if windows.len() != embeddings.len() {
            return Err(Error::Shape(format!("{} windows but {} embeddings", windows.len(), embeddings.len())));
        }
        for w in windows {
            w.check_finite()?;
        }
        let hd = self.module.config.lstm_hidden;
        if let Some(bad) = embeddings.iter().find(|h| h.len() != hd) {
            return Err(Error::Shape(format!("trajectory embedding has {} entries, expected {hd}", bad.len())));
        }
        let topo = SceneGraph::fully_connected(&[windows.len()]);
        let mut g = Graph::new(&self.store);
        let h = g.constant(Matrix::from_rows(embeddings));
        let refs: Vec<&TrajectoryWindow> = windows.iter().collect();
        let positions = g.constant(current_positions(&refs));
        let (v, e) = self.module.graph.init(&mut g, h, positions, &topo);
        Ok(state_from(&g, v, e, &topo))
    }

    /// Advances `state` from iteration `k` to `k + 1`.
    pub fn message_passing_round(
        &self,
        state: &InteractionGraphState<T>,
        k: usize,
    ) -> Result<InteractionGraphState<T>> {
        if k >= self.module.graph.iterations() {
            return Err(Error::InvalidInput(format!(
                "round {k} out of range for K = {}",
                self.module.graph.iterations()
            )));
        }
        let topo = state.topology();
        let mut g = Graph::new(&self.store);
        let v = g.constant(state.node_embeddings.clone());
        let e = (state.n_edges() > 0).then(|| g.constant(state.edge_embeddings.clone()));
        let (v, e) = self.module.graph.round(&mut g, k, v, e, &topo);
        Ok(state_from(&g, v, e, &topo))
    }

    /// Full pipeline: embed, initialise and run `K` rounds.
    pub fn run_nmmp(&self, windows: &[TrajectoryWindow]) -> Result<NmmpOutput<T>> {
        self.module.run(&self.store, windows)
    }
}

impl NmmpModule {
    /// Value-level pass over one scene using weights from `store`.
    pub fn run<T: Scalar>(&self, store: &ParamStore<T>, windows: &[TrajectoryWindow]) -> Result<NmmpOutput<T>> {
        validate_windows(windows)?;
        let topo = SceneGraph::fully_connected(&[windows.len()]);
        let refs: Vec<&TrajectoryWindow> = windows.iter().collect();
        let mut g = Graph::new(store);
        let (h, v, e) = self.forward_windows(&mut g, &refs, &topo);
        let d = self.config.embed_dim;
        Ok(NmmpOutput {
            trajectory_embeddings: g.value(h).clone(),
            actor_embeddings: g.value(v).clone(),
            interaction_embeddings: e.map_or_else(|| Matrix::zeros(0, d), |e| g.value(e).clone()),
            pairs: topo.src.iter().copied().zip(topo.dst.iter().copied()).collect(),
        })
    }
}

fn state_from<T: Scalar>(g: &Graph<T>, v: Var, e: Option<Var>, topo: &SceneGraph) -> InteractionGraphState<T> {
    let d = g.shape(v).1;
    InteractionGraphState {
        node_embeddings: g.value(v).clone(),
        edge_embeddings: e.map_or_else(|| Matrix::zeros(0, d), |e| g.value(e).clone()),
        pairs: topo.src.iter().copied().zip(topo.dst.iter().copied()).collect(),
        in_degree: topo.in_degree.clone(),
        out_degree: topo.out_degree.clone(),
    }
}

/// Every window must be finite and share `T_obs` and the timestep.
pub fn validate_windows(windows: &[TrajectoryWindow]) -> Result<()> {
    let first = windows.first().ok_or_else(|| Error::InvalidInput("no actors".into()))?;
    if first.observed.len() < 2 {
        return Err(Error::Shape("need at least 2 observed points".into()));
    }
    for w in windows {
        w.check_finite()?;
        if w.observed.len() != first.observed.len() {
            return Err(Error::Shape(format!(
                "actor {} has {} observed points, actor {} has {}",
                w.actor_id,
                w.observed.len(),
                first.actor_id,
                first.observed.len()
            )));
        }
        if (w.timestep - first.timestep).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!("actor {} has a different timestep", w.actor_id)));
        }
    }
    Ok(())
}

/// Per-step `n x 2` displacement matrices over the observed part of the windows.
pub fn displacement_steps<T: Scalar>(windows: &[&TrajectoryWindow]) -> Vec<Matrix<T>> {
    point_displacement_steps(&windows.iter().map(|w| w.observed.as_slice()).collect::<Vec<_>>())
}

/// Per-step `n x 2` displacement matrices of arbitrary point sequences of equal length.
pub fn point_displacement_steps<T: Scalar>(seqs: &[&[Point]]) -> Vec<Matrix<T>> {
    let len = seqs.first().map_or(0, |s| s.len());
    (1..len)
        .map(|t| {
            let data = seqs
                .iter()
                .flat_map(|s| [T::from_f64_lossy(s[t][0] - s[t - 1][0]), T::from_f64_lossy(s[t][1] - s[t - 1][1])])
                .collect();
            Matrix::from_vec(seqs.len(), 2, data)
        })
        .collect()
}

pub fn current_positions<T: Scalar>(windows: &[&TrajectoryWindow]) -> Matrix<T> {
    let data = windows
        .iter()
        .flat_map(|w| {
            let p = w.current();
            [T::from_f64_lossy(p[0]), T::from_f64_lossy(p[1])]
        })
        .collect();
    Matrix::from_vec(windows.len(), 2, data)
}
