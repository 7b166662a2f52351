//! Trajectory file ingestion, scene windowing, leave-one-out splits, dataset manifests and
//! synthetic interacting scenes.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::joint::JointSceneSample;
use crate::trajectory::{Point, SceneSample, TrajectoryWindow, Units};

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawRecord {
    pub frame_id: i64,
    pub actor_id: i64,
    pub x: f64,
    pub y: f64,
}

/// Positions of the four used columns within a row.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct ColumnOrder {
    pub frame: usize,
    pub actor: usize,
    pub x: usize,
    pub y: usize,
}

impl Default for ColumnOrder {
    fn default() -> Self {
        Self { frame: 0, actor: 1, x: 2, y: 3 }
    }
}

impl ColumnOrder {
    /// Parses a list such as `"frame actor x y"` or `"frame,actor,y,x"`; other names
    /// (e.g. `_`) mark ignored columns.
    pub fn parse(spec: &str) -> Result<Self> {
        let names: Vec<&str> = spec.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()).collect();
        let find = |key: &str| {
            names
                .iter()
                .position(|n| n.eq_ignore_ascii_case(key))
                .ok_or_else(|| Error::Config(format!("column order `{spec}` lacks `{key}`")))
        };
        let order = Self { frame: find("frame")?, actor: find("actor")?, x: find("x")?, y: find("y")? };
        let mut seen = BTreeSet::new();
        for n in &names {
            let lower = n.to_ascii_lowercase();
            if ["frame", "actor", "x", "y"].contains(&lower.as_str()) && !seen.insert(lower) {
                return Err(Error::Config(format!("column order `{spec}` repeats `{n}`")));
            }
        }
        Ok(order)
    }

    fn width(&self) -> usize {
        self.frame.max(self.actor).max(self.x).max(self.y) + 1
    }
}

fn parse_id(tok: &str) -> Option<i64> {
    if let Ok(v) = tok.parse::<i64>() {
        return Some(v);
    }
    let f: f64 = tok.parse().ok()?;
    (f.is_finite() && f.fract() == 0.0 && f.abs() < 9.0e15).then_some(f as i64)
}

/// Parses delimiter-separated rows (tabs or spaces). Blank lines and `#` comments are
/// skipped. Records come back sorted by `(frame_id, actor_id)`.
pub fn parse_trajectory_str(text: &str, origin: &Path, order: ColumnOrder) -> Result<Vec<RawRecord>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| Error::Parse { path: origin.to_path_buf(), line: i + 1, message };
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() < order.width() {
            return Err(err(format!("expected at least {} columns, found {}", order.width(), toks.len())));
        }
        let frame_id =
            parse_id(toks[order.frame]).ok_or_else(|| err(format!("bad frame id `{}`", toks[order.frame])))?;
        let actor_id =
            parse_id(toks[order.actor]).ok_or_else(|| err(format!("bad actor id `{}`", toks[order.actor])))?;
        let coord = |tok: &str, name: &str| -> Result<f64> {
            let v: f64 = tok.parse().map_err(|_| err(format!("non-numeric {name} `{tok}`")))?;
            if !v.is_finite() {
                return Err(err(format!("non-finite {name} `{tok}`")));
            }
            Ok(v)
        };
        let x = coord(toks[order.x], "x")?;
        let y = coord(toks[order.y], "y")?;
        out.push(RawRecord { frame_id, actor_id, x, y });
    }
    out.sort_by_key(|r| (r.frame_id, r.actor_id));
    for w in out.windows(2) {
        if (w[0].frame_id, w[0].actor_id) == (w[1].frame_id, w[1].actor_id) {
            return Err(Error::DuplicateRecord {
                path: origin.to_path_buf(),
                frame: w[0].frame_id,
                actor: w[0].actor_id,
            });
        }
    }
    Ok(out)
}

pub fn parse_trajectory_file(path: &Path, order: ColumnOrder) -> Result<Vec<RawRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_trajectory_str(&text, path, order)
}

/// Smallest positive gap between distinct frame ids.
pub fn frame_spacing(records: &[RawRecord]) -> Option<i64> {
    let frames: BTreeSet<i64> = records.iter().map(|r| r.frame_id).collect();
    let frames: Vec<i64> = frames.into_iter().collect();
    frames.windows(2).map(|w| w[1] - w[0]).min()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowOptions {
    pub t_obs: usize,
    pub t_pred: usize,
    pub timestep: f64,
    /// Window start advance, in frames of the uniform grid.
    pub stride: usize,
    pub units: Units,
}

/// Slides a window of `T_obs + 1 + T_pred` grid frames. A scene holds every actor
/// present in all frames of its window; windows with no such actor are dropped.
/// Windows crossing a gap in the frame grid are skipped.
pub fn window_scenes(records: &[RawRecord], opts: &WindowOptions, id_prefix: &str) -> Vec<SceneSample> {
    let len = opts.t_obs + 1 + opts.t_pred;
    let stride = opts.stride.max(1);
    let Some(spacing) = frame_spacing(records).or(records.first().map(|_| 1)) else {
        return Vec::new();
    };
    let mut by_frame: BTreeMap<i64, BTreeMap<i64, Point>> = BTreeMap::new();
    for r in records {
        by_frame.entry(r.frame_id).or_default().insert(r.actor_id, [r.x, r.y]);
    }
    let frames: Vec<i64> = by_frame.keys().copied().collect();
    let mut out = Vec::new();
    let mut start = 0;
    while start + len <= frames.len() {
        let window = &frames[start..start + len];
        let contiguous = window.windows(2).all(|w| w[1] - w[0] == spacing);
        if contiguous {
            let first = &by_frame[&window[0]];
            let present: Vec<i64> =
                first.keys().copied().filter(|a| window.iter().all(|f| by_frame[f].contains_key(a))).collect();
            if !present.is_empty() {
                let windows = present
                    .iter()
                    .map(|a| {
                        let pts: Vec<Point> = window.iter().map(|f| by_frame[f][a]).collect();
                        TrajectoryWindow::new(
                            a.to_string(),
                            pts[..=opts.t_obs].to_vec(),
                            pts[opts.t_obs + 1..].to_vec(),
                            opts.timestep,
                        )
                    })
                    .collect();
                out.push(SceneSample::new(format!("{id_prefix}:{}", window[0]), windows, opts.timestep, opts.units));
            }
        }
        start += stride;
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Protocol {
    pub t_obs: usize,
    pub t_pred: usize,
    pub timestep: f64,
    pub units: Units,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetSplit<S = SceneSample> {
    /// Held-out set name, or `"explicit"` for manifest-defined partitions.
    pub name: String,
    pub train: Vec<S>,
    pub val: Vec<S>,
    pub test: Vec<S>,
    pub protocol: Protocol,
}

/// One split per named set: that set is the test partition, the union of the others
/// is the training partition.
pub fn leave_one_out<S: Clone>(sets: &[(String, Vec<S>)], protocol: &Protocol) -> Result<Vec<DatasetSplit<S>>> {
    if sets.len() < 2 {
        return Err(Error::Config(format!("leave-one-out needs at least 2 sets, got {}", sets.len())));
    }
    Ok((0..sets.len())
        .map(|held| DatasetSplit {
            name: sets[held].0.clone(),
            train: sets
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != held)
                .flat_map(|(_, (_, s))| s.iter().cloned())
                .collect(),
            val: Vec::new(),
            test: sets[held].1.clone(),
            protocol: protocol.clone(),
        })
        .collect())
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DataFormat {
    /// `frame actor x y` text files.
    #[default]
    Trajectory,
    /// One joint scene per JSON line.
    JointJsonl,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetEntry {
    pub name: String,
    pub files: Vec<PathBuf>,
}

/// TOML manifest listing files per named set. Relative paths resolve against the
/// manifest's directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    #[serde(default)]
    pub format: DataFormat,
    #[serde(default)]
    pub units: Units,
    pub timestep: f64,
    pub t_obs: usize,
    pub t_pred: usize,
    #[serde(default)]
    pub column_order: Option<String>,
    #[serde(default = "one")]
    pub train_stride: usize,
    /// Defaults to the window length (non-overlapping windows).
    #[serde(default)]
    pub eval_stride: Option<usize>,
    pub sets: Vec<SetEntry>,
    #[serde(skip)]
    pub root: PathBuf,
}

fn one() -> usize {
    1
}

impl DatasetManifest {
    pub fn from_toml(text: &str, root: &Path) -> Result<Self> {
        let mut m: Self = toml::from_str(text).map_err(|e| Error::Config(format!("dataset manifest: {e}")))?;
        m.root = root.to_path_buf();
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml(&text, &root)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_obs == 0 || self.t_pred == 0 {
            return Err(Error::Config("manifest t_obs and t_pred must be positive".into()));
        }
        if !(self.timestep > 0.0) {
            return Err(Error::Config("manifest timestep must be positive".into()));
        }
        if self.sets.is_empty() {
            return Err(Error::Config("manifest lists no sets".into()));
        }
        let mut names = BTreeSet::new();
        for s in &self.sets {
            if !names.insert(&s.name) {
                return Err(Error::Config(format!("manifest repeats set `{}`", s.name)));
            }
        }
        if let Some(c) = &self.column_order {
            ColumnOrder::parse(c)?;
        }
        Ok(())
    }

    pub fn protocol(&self) -> Protocol {
        Protocol { t_obs: self.t_obs, t_pred: self.t_pred, timestep: self.timestep, units: self.units }
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.root.join(p)
        }
    }

    fn window_opts(&self, stride: usize) -> WindowOptions {
        WindowOptions { t_obs: self.t_obs, t_pred: self.t_pred, timestep: self.timestep, stride, units: self.units }
    }

    fn eval_stride(&self) -> usize {
        self.eval_stride.unwrap_or(self.t_obs + 1 + self.t_pred)
    }

    fn entry(&self, name: &str) -> Option<&SetEntry> {
        self.sets.iter().find(|s| s.name == name)
    }

    /// Windowed scenes of one set.
    pub fn load_set(&self, name: &str, stride: usize) -> Result<Vec<SceneSample>> {
        if self.format != DataFormat::Trajectory {
            return Err(Error::Config("manifest format is joint_jsonl; load joint scenes instead".into()));
        }
        let entry = self.entry(name).ok_or_else(|| Error::Config(format!("manifest has no set `{name}`")))?;
        let order = self.column_order.as_deref().map(ColumnOrder::parse).transpose()?.unwrap_or_default();
        let mut scenes = Vec::new();
        for f in &entry.files {
            let path = self.resolve(f);
            let recs = parse_trajectory_file(&path, order)?;
            let stem = f.to_string_lossy();
            scenes.extend(window_scenes(&recs, &self.window_opts(stride), &format!("{name}/{stem}")));
        }
        Ok(scenes)
    }

    pub fn load_joint_set(&self, name: &str) -> Result<Vec<JointSceneSample>> {
        if self.format != DataFormat::JointJsonl {
            return Err(Error::Config("manifest format is trajectory; load pedestrian scenes instead".into()));
        }
        let entry = self.entry(name).ok_or_else(|| Error::Config(format!("manifest has no set `{name}`")))?;
        let mut out = Vec::new();
        for f in &entry.files {
            let path = self.resolve(f);
            for mut s in JointSceneSample::read_jsonl(&path)? {
                s.id = format!("{name}/{}", s.id);
                out.push(s.centered());
            }
        }
        Ok(out)
    }

    /// `split = Some(name)` holds out that set; `None` uses sets named `train`, `val`
    /// and `test` directly.
    pub fn split(&self, split: Option<&str>) -> Result<DatasetSplit> {
        let train_stride = self.train_stride;
        let eval_stride = self.eval_stride();
        match split {
            Some(held) => {
                if self.entry(held).is_none() {
                    return Err(Error::Config(format!("manifest has no set `{held}`")));
                }
                if self.sets.len() < 2 {
                    return Err(Error::Config("leave-one-out needs at least 2 sets".into()));
                }
                let mut train = Vec::new();
                for s in self.sets.iter().filter(|s| s.name != held) {
                    train.extend(self.load_set(&s.name, train_stride)?);
                }
                let test = self.load_set(held, eval_stride)?;
                Ok(DatasetSplit { name: held.into(), train, val: Vec::new(), test, protocol: self.protocol() })
            }
            None => {
                let load = |n: &str, stride| -> Result<Vec<SceneSample>> {
                    if self.entry(n).is_some() {
                        self.load_set(n, stride)
                    } else {
                        Ok(Vec::new())
                    }
                };
                if self.entry("train").is_none() && self.entry("test").is_none() {
                    return Err(Error::Config("manifest has no `train`/`test` sets; pass a split name".into()));
                }
                Ok(DatasetSplit {
                    name: "explicit".into(),
                    train: load("train", train_stride)?,
                    val: load("val", eval_stride)?,
                    test: load("test", eval_stride)?,
                    protocol: self.protocol(),
                })
            }
        }
    }

    pub fn joint_split(&self, split: Option<&str>) -> Result<DatasetSplit<JointSceneSample>> {
        let sets: Vec<(String, Vec<JointSceneSample>)> =
            self.sets.iter().map(|s| Ok((s.name.clone(), self.load_joint_set(&s.name)?))).collect::<Result<_>>()?;
        match split {
            Some(held) => leave_one_out(&sets, &self.protocol())?
                .into_iter()
                .find(|s| s.name == held)
                .ok_or_else(|| Error::Config(format!("manifest has no set `{held}`"))),
            None => {
                let get = |n: &str| sets.iter().find(|(name, _)| name == n).map(|(_, s)| s.clone()).unwrap_or_default();
                Ok(DatasetSplit {
                    name: "explicit".into(),
                    train: get("train"),
                    val: get("val"),
                    test: get("test"),
                    protocol: self.protocol(),
                })
            }
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthRule {
    /// A rigid group sharing one velocity that turns at a random time.
    ParallelGroup,
    /// Two groups walking toward each other and stepping aside when close.
    HeadOnAvoidance,
    /// A chain of actors each replaying its predecessor's path with a fixed delay.
    LeaderFollower,
}

impl std::str::FromStr for SynthRule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "parallel_group" => Ok(Self::ParallelGroup),
            "head_on_avoidance" => Ok(Self::HeadOnAvoidance),
            "leader_follower" => Ok(Self::LeaderFollower),
            _ => Err(Error::Config(format!("unknown synthetic rule `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthOptions {
    pub t_obs: usize,
    pub t_pred: usize,
    pub timestep: f64,
    /// Follower delay in steps (leader_follower).
    pub delay: usize,
    pub speed: (f64, f64),
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self { t_obs: 8, t_pred: 12, timestep: 0.4, delay: 4, speed: (1.0, 1.6) }
    }
}

/// Deterministic synthetic scenes in metres.
pub fn synthesize_interacting_scenes(
    n_scenes: usize,
    actors_per_scene: usize,
    rule: SynthRule,
    seed: u64,
    opts: &SynthOptions,
) -> Vec<SceneSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = opts.t_obs + 1 + opts.t_pred;
    let n = actors_per_scene.max(1);
    (0..n_scenes)
        .map(|s| {
            let paths = match rule {
                SynthRule::ParallelGroup => parallel_group(&mut rng, n, len, opts),
                SynthRule::HeadOnAvoidance => head_on(&mut rng, n, len, opts),
                SynthRule::LeaderFollower => leader_follower(&mut rng, n, len, opts),
            };
            let windows = paths
                .into_iter()
                .enumerate()
                .map(|(i, p)| {
                    TrajectoryWindow::new(
                        i.to_string(),
                        p[..=opts.t_obs].to_vec(),
                        p[opts.t_obs + 1..].to_vec(),
                        opts.timestep,
                    )
                })
                .collect();
            SceneSample::new(format!("synth{s}"), windows, opts.timestep, Units::Meters)
        })
        .collect()
}

fn unit(angle: f64) -> Point {
    [angle.cos(), angle.sin()]
}

/// Path of `len` points from `start`, heading `h0`, constant `speed`, turning by `turn`
/// after step `turn_at`.
fn turning_path(start: Point, h0: f64, speed: f64, turn: f64, turn_at: usize, len: usize, dt: f64) -> Vec<Point> {
    let mut p = start;
    let mut out = Vec::with_capacity(len);
    for t in 0..len {
        out.push(p);
        let h = if t >= turn_at { h0 + turn } else { h0 };
        let d = unit(h);
        p = [p[0] + speed * dt * d[0], p[1] + speed * dt * d[1]];
    }
    out
}

fn random_turn<R: Rng>(rng: &mut R) -> f64 {
    let mag = rng.random_range(std::f64::consts::FRAC_PI_6..std::f64::consts::FRAC_PI_2);
    if rng.random_bool(0.5) {
        mag
    } else {
        -mag
    }
}

fn parallel_group<R: Rng>(rng: &mut R, n: usize, len: usize, o: &SynthOptions) -> Vec<Vec<Point>> {
    let h0 = rng.random_range(0.0..std::f64::consts::TAU);
    let speed = rng.random_range(o.speed.0..o.speed.1);
    let turn = random_turn(rng);
    let turn_at = rng.random_range(0..len);
    let start = [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)];
    let common = turning_path(start, h0, speed, turn, turn_at, len, o.timestep);
    let side = unit(h0 + std::f64::consts::FRAC_PI_2);
    (0..n)
        .map(|i| {
            let off = 0.8 * i as f64;
            common.iter().map(|p| [p[0] + off * side[0], p[1] + off * side[1]]).collect()
        })
        .collect()
}

/// Leader turns during the last `delay` observed steps; actor `k` replays the leader's
/// path `k * delay` steps late.
fn leader_follower<R: Rng>(rng: &mut R, n: usize, len: usize, o: &SynthOptions) -> Vec<Vec<Point>> {
    let d = o.delay.max(1);
    let total = len + (n - 1) * d;
    let h0 = rng.random_range(0.0..std::f64::consts::TAU);
    let speed = rng.random_range(o.speed.0..o.speed.1);
    let turn = random_turn(rng);
    // Leader index of the current time is `(n-1)*d + t_obs` on its own path.
    let now = (n - 1) * d + o.t_obs;
    let turn_at = now + 1 - rng.random_range(1..=d);
    let start = [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)];
    let path = turning_path(start, h0, speed, turn, turn_at, total, o.timestep);
    (0..n).map(|k| path[(n - 1 - k) * d..(n - 1 - k) * d + len].to_vec()).collect()
}

fn head_on<R: Rng>(rng: &mut R, n: usize, len: usize, o: &SynthOptions) -> Vec<Vec<Point>> {
    const RADIUS: f64 = 3.0;
    const SIDESTEP: f64 = 0.6;
    let axis = rng.random_range(0.0..std::f64::consts::TAU);
    let fwd = unit(axis);
    let side = unit(axis + std::f64::consts::FRAC_PI_2);
    let gap = rng.random_range(8.0..14.0);
    let mut pos: Vec<Point> = Vec::with_capacity(n);
    let mut dir: Vec<f64> = Vec::with_capacity(n);
    let mut speed: Vec<f64> = Vec::with_capacity(n);
    for i in 0..n {
        let toward = if i % 2 == 0 { 1.0 } else { -1.0 };
        let along = -toward * gap / 2.0 - toward * 1.5 * (i / 2) as f64;
        let lateral = rng.random_range(-0.3..0.3);
        pos.push([along * fwd[0] + lateral * side[0], along * fwd[1] + lateral * side[1]]);
        dir.push(toward);
        speed.push(rng.random_range(o.speed.0..o.speed.1));
    }
    let mut paths = vec![Vec::with_capacity(len); n];
    for _ in 0..len {
        for i in 0..n {
            paths[i].push(pos[i]);
        }
        let snapshot = pos.clone();
        for i in 0..n {
            let mut lat = 0.0;
            for j in 0..n {
                if dir[j] == dir[i] {
                    continue;
                }
                let rel = [snapshot[j][0] - snapshot[i][0], snapshot[j][1] - snapshot[i][1]];
                let ahead = dir[i] * (rel[0] * fwd[0] + rel[1] * fwd[1]);
                let across = rel[0] * side[0] + rel[1] * side[1];
                if ahead > 0.0 && ahead < RADIUS && across.abs() < 1.0 {
                    // step to the right of one's own walking direction
                    lat -= dir[i] * SIDESTEP;
                }
            }
            let v = speed[i] * o.timestep * dir[i];
            let l = lat * o.timestep;
            pos[i] = [pos[i][0] + v * fwd[0] + l * side[0], pos[i][1] + v * fwd[1] + l * side[1]];
        }
    }
    paths
}

/// Writes scenes as a `frame actor x y` file. Scene `s` occupies frames
/// `s * len ..`, actors get globally unique ids, so re-windowing with `stride = len`
/// recovers the scenes exactly.
pub fn write_scenes_as_records(scenes: &[SceneSample], path: &Path) -> Result<()> {
    use std::io::Write;
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| Error::io(path, e))?);
    let mut actor = 0i64;
    let block = scenes.first().map_or(0, |s| s.t_obs() + 1 + s.t_pred());
    for (s, scene) in scenes.iter().enumerate() {
        for w in &scene.windows {
            for (t, p) in w.observed.iter().chain(&w.future).enumerate() {
                writeln!(f, "{}\t{}\t{:?}\t{:?}", s * block + t, actor, p[0], p[1]).map_err(|e| Error::io(path, e))?;
            }
            actor += 1;
        }
    }
    f.flush().map_err(|e| Error::io(path, e))
}

/// Stride that reproduces scenes written by [`write_scenes_as_records`].
pub fn records_block_stride(t_obs: usize, t_pred: usize) -> usize {
    t_obs + 1 + t_pred
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts(stride: usize) -> WindowOptions {
        WindowOptions { t_obs: 8, t_pred: 12, timestep: 0.4, stride, units: Units::Meters }
    }

    #[test]
    fn parse_errors_name_line() {
        let e = parse_trajectory_str("1 1 0 0\n2 1 abc 0\n", Path::new("f.txt"), ColumnOrder::default()).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }));
        assert!(e.to_string().contains("f.txt:2"));
        let e = parse_trajectory_str("1 1 0 0\n1 1 2 2\n", Path::new("f"), ColumnOrder::default()).unwrap_err();
        assert!(matches!(e, Error::DuplicateRecord { frame: 1, actor: 1, .. }));
    }

    #[test]
    fn parse_float_ids_and_order() {
        let recs =
            parse_trajectory_str("10.0\t2.0\t1.5\t2.5\n0.0\t1.0\t3\t4\n", Path::new("f"), ColumnOrder::default())
                .unwrap();
        assert_eq!(recs[0], RawRecord { frame_id: 0, actor_id: 1, x: 3.0, y: 4.0 });
        let swapped = ColumnOrder::parse("frame actor y x").unwrap();
        let recs = parse_trajectory_str("0 1 3 4\n", Path::new("f"), swapped).unwrap();
        assert_eq!((recs[0].x, recs[0].y), (4.0, 3.0));
        assert!(ColumnOrder::parse("frame actor x").is_err());
    }

    #[test]
    fn window_counts() {
        let mut recs: Vec<RawRecord> =
            (0..21).map(|f| RawRecord { frame_id: f * 10, actor_id: 1, x: f as f64, y: 0.0 }).collect();
        assert_eq!(window_scenes(&recs, &opts(21), "a").len(), 1);
        recs.retain(|r| r.frame_id != 100);
        recs.push(RawRecord { frame_id: 100, actor_id: 2, x: 0.0, y: 0.0 });
        // actor 1 misses frame 100, actor 2 is only there
        assert!(window_scenes(&recs, &opts(1), "a").is_empty());
    }

    #[test]
    fn leave_one_out_two_sets() {
        let p = Protocol { t_obs: 1, t_pred: 1, timestep: 0.4, units: Units::Meters };
        let sets = vec![("A".to_string(), vec![1]), ("B".to_string(), vec![2])];
        let splits = leave_one_out(&sets, &p).unwrap();
        assert_eq!((splits[0].train.clone(), splits[0].test.clone()), (vec![2], vec![1]));
        assert_eq!((splits[1].train.clone(), splits[1].test.clone()), (vec![1], vec![2]));
        assert!(leave_one_out(&sets[..1], &p).is_err());
    }

    #[test]
    fn leader_follower_delay_exact() {
        let o = SynthOptions::default();
        let scenes = synthesize_interacting_scenes(3, 3, SynthRule::LeaderFollower, 1, &o);
        for s in &scenes {
            let lead = s.windows[0].complete();
            for k in 1..3 {
                let fol = s.windows[k].complete();
                let d = k * o.delay;
                assert_eq!(&fol[d..], &lead[..lead.len() - d]);
            }
        }
    }

    #[test]
    fn parallel_group_distances_constant() {
        let scenes = synthesize_interacting_scenes(2, 3, SynthRule::ParallelGroup, 4, &SynthOptions::default());
        for s in &scenes {
            let a = s.windows[0].complete();
            let b = s.windows[2].complete();
            let d0 = [b[0][0] - a[0][0], b[0][1] - a[0][1]];
            for t in 0..a.len() {
                let d = [b[t][0] - a[t][0], b[t][1] - a[t][1]];
                assert!((d[0] - d0[0]).abs() < 1e-12 && (d[1] - d0[1]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn records_round_trip() {
        let o = SynthOptions::default();
        let scenes = synthesize_interacting_scenes(4, 2, SynthRule::HeadOnAvoidance, 2, &o);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.txt");
        write_scenes_as_records(&scenes, &path).unwrap();
        let recs = parse_trajectory_file(&path, ColumnOrder::default()).unwrap();
        let back = window_scenes(&recs, &opts(records_block_stride(8, 12)), "x");
        assert_eq!(back.len(), 4);
        for (a, b) in scenes.iter().zip(&back) {
            assert_eq!(a.futures(), b.futures());
        }
    }
}
