use std::fs;
use std::path::Path;

use serde_json::Value;

use nmmp::datasets::{
    records_block_stride, synthesize_interacting_scenes, write_scenes_as_records, DataFormat, SetEntry,
};
use nmmp::joint::synthesize_joint_scenes;
use nmmp::metrics::{evaluate, evaluate_joint};
use nmmp::raster::rasterize as render;
use nmmp::training::{joint_model, pedestrian_model, train_adversarial, train_joint, TrainError};
use nmmp::{
    Checkpoint, DatasetManifest, DatasetSplit, JointModel, JointSceneSample, PedestrianModel, Point, RasterSpec,
    SynthOptions, SynthRule, SystemKind, TrainConfig, TrajectoryWindow, Units,
};

use crate::svg::{self, Panel};
use crate::{
    sha256_hex, tsne, CliError, CliResult, DataArgs, ErrorKind, EvalArgs, ImageFormat, PredictArgs, RasterizeArgs,
    RunDir, RunManifest, SynthArgs, SystemArg, TrainArgs, VizEmbeddingsArgs, VizTrajectoriesArgs,
};

fn read_config(path: &Path) -> CliResult<TrainConfig> {
    let text = fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    TrainConfig::from_toml(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

fn load_checkpoint(path: &Path) -> CliResult<Checkpoint> {
    Ok(Checkpoint::load(path)?)
}

fn load_dataset(path: &Path) -> CliResult<DatasetManifest> {
    Ok(DatasetManifest::load(path)?)
}

fn check_system(ckpt: &Checkpoint, flag: Option<SystemArg>) -> CliResult<SystemKind> {
    let system = ckpt.meta.system;
    match flag.map(SystemKind::from) {
        Some(s) if s != system => Err(CliError::config(format!(
            "--system {} but the checkpoint holds a {} model",
            s.as_str(),
            system.as_str()
        ))),
        _ => Ok(system),
    }
}

/// The dataset must use the format and window lengths the model was built for.
fn check_protocol(cfg: &TrainConfig, data: &DatasetManifest) -> CliResult<()> {
    let (format, t_obs, t_pred) = match cfg.system {
        SystemKind::Pedestrian => (DataFormat::Trajectory, cfg.pedestrian.t_obs, cfg.pedestrian.t_pred),
        SystemKind::Joint => (DataFormat::JointJsonl, cfg.joint.t_obs, cfg.joint.t_pred),
    };
    if data.format != format {
        return Err(CliError::config(format!(
            "{} models need a {format:?} dataset, got {:?}",
            cfg.system.as_str(),
            data.format
        )));
    }
    if data.t_obs != t_obs || data.t_pred != t_pred {
        return Err(CliError::config(format!(
            "dataset windows are T_obs={} T_pred={}, model expects T_obs={t_obs} T_pred={t_pred}",
            data.t_obs, data.t_pred
        )));
    }
    Ok(())
}

/// Held-out scenes of a split: `test`, or `val` when there is no test partition.
fn held_out<S: Clone>(split: &DatasetSplit<S>) -> CliResult<Vec<S>> {
    Ok(named_held_out(split)?.1)
}

/// Held-out scenes with the name reported in metrics: the held-out set for
/// leave-one-out splits, otherwise `test` or `val`.
fn named_held_out<S: Clone>(split: &DatasetSplit<S>) -> CliResult<(String, Vec<S>)> {
    let (part, scenes) = if split.test.is_empty() { ("val", &split.val) } else { ("test", &split.test) };
    if scenes.is_empty() {
        return Err(CliError::data(format!("split `{}` has no evaluation scenes", split.name)));
    }
    let name = if split.name == EXPLICIT_SPLIT { part.to_string() } else { split.name.clone() };
    Ok((name, scenes.clone()))
}

const EXPLICIT_SPLIT: &str = "explicit";

enum Loaded {
    Pedestrian { model: PedestrianModel<f32>, split: DatasetSplit, units: Units },
    Joint { model: JointModel<f32>, split: DatasetSplit<JointSceneSample> },
}

fn load_model_and_data(ckpt: &Checkpoint, cfg: &TrainConfig, data: &DataArgs) -> CliResult<Loaded> {
    let manifest = load_dataset(&data.dataset)?;
    check_protocol(cfg, &manifest)?;
    Ok(match cfg.system {
        SystemKind::Pedestrian => Loaded::Pedestrian {
            model: pedestrian_model(ckpt)?,
            split: manifest.split(data.split.as_deref())?,
            units: manifest.units,
        },
        SystemKind::Joint => {
            Loaded::Joint { model: joint_model(ckpt)?, split: manifest.joint_split(data.split.as_deref())? }
        }
    })
}

fn config_hash(cfg: &TrainConfig) -> String {
    sha256_hex(cfg.to_toml().as_bytes())
}

pub fn train(a: &TrainArgs) -> CliResult<RunManifest> {
    let mut cfg = read_config(&a.config)?;
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    if let Some(k) = a.k {
        cfg.eval_k = k;
    }
    if let Some(system) = a.system {
        cfg.system = system.into();
    }
    cfg.validate()?;
    let resolved = cfg.to_toml();
    let hash = sha256_hex(resolved.as_bytes());

    let manifest = load_dataset(&a.data.dataset)?;
    check_protocol(&cfg, &manifest)?;
    let split = a.data.split.as_deref();
    let mut run = RunDir::create(&a.out)?;
    run.write("config.toml", resolved.as_bytes())?;

    let (outcome, held) = match cfg.system {
        SystemKind::Pedestrian => {
            let split = manifest.split(split)?;
            if split.train.is_empty() {
                return Err(CliError::data(format!("split `{}` has no training scenes", split.name)));
            }
            (train_adversarial(&split.train, &cfg, None), Held::Pedestrian(split, manifest.units))
        }
        SystemKind::Joint => {
            let split = manifest.joint_split(split)?;
            if split.train.is_empty() {
                return Err(CliError::data(format!("split `{}` has no training scenes", split.name)));
            }
            (train_joint(&split.train, &cfg, None), Held::Joint(split))
        }
    };

    match outcome {
        Ok(ckpt) => {
            run.write("checkpoint.nmmp", &ckpt.to_bytes()?)?;
            run.write_json("history.json", &ckpt.meta.history)?;
            let report = match held {
                Held::Pedestrian(split, units) => {
                    evaluate(&pedestrian_model(&ckpt)?, &[named_held_out(&split)?], cfg.eval_k, cfg.seed, units, &[])?
                }
                Held::Joint(split) => evaluate_joint(&joint_model(&ckpt)?, &held_out(&split)?)?,
            };
            run.write("metrics.json", (report.to_json() + "\n").as_bytes())?;
            run.finish("train", Some(&a.config), Some(hash), cfg.seed)
        }
        Err(TrainError { error, checkpoint }) => {
            let err = CliError::from(error);
            if let Some(ckpt) = checkpoint {
                let name = if err.kind == ErrorKind::Divergence { "diverged.nmmp" } else { "failed.nmmp" };
                run.write(name, &ckpt.to_bytes()?)?;
            }
            run.finish("train", Some(&a.config), Some(hash), cfg.seed)?;
            Err(err)
        }
    }
}

enum Held {
    Pedestrian(DatasetSplit, Units),
    Joint(DatasetSplit<JointSceneSample>),
}

pub fn eval(a: &EvalArgs) -> CliResult<RunManifest> {
    let ckpt = load_checkpoint(&a.checkpoint)?;
    let mut cfg = ckpt.meta.config.clone();
    cfg.system = check_system(&ckpt, a.system)?;
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    if let Some(k) = a.k {
        cfg.eval_k = k;
    }
    cfg.validate()?;
    let report = match load_model_and_data(&ckpt, &cfg, &a.data)? {
        Loaded::Pedestrian { model, split, units } => {
            evaluate(&model, &[named_held_out(&split)?], cfg.eval_k, cfg.seed, units, &a.buckets)?
        }
        Loaded::Joint { model, split } => evaluate_joint(&model, &held_out(&split)?)?,
    };
    let mut run = RunDir::create(&a.out)?;
    run.write("metrics.json", (report.to_json() + "\n").as_bytes())?;
    run.finish("eval", None, Some(config_hash(&cfg)), cfg.seed)
}

fn with_predictions(mut record: Value, key: &str, predicted: &[Vec<Point>]) -> CliResult<Value> {
    let items = record
        .get_mut(key)
        .and_then(Value::as_array_mut)
        .ok_or_else(|| CliError::data(format!("scene record has no `{key}` array")))?;
    for (item, pred) in items.iter_mut().zip(predicted) {
        if let Some(obj) = item.as_object_mut() {
            obj.insert("predicted".into(), serde_json::to_value(pred).map_err(|e| CliError::data(e.to_string()))?);
        }
    }
    Ok(record)
}

fn json_line(value: &Value, out: &mut String) {
    out.push_str(&value.to_string());
    out.push('\n');
}

pub fn predict(a: &PredictArgs) -> CliResult<RunManifest> {
    let ckpt = load_checkpoint(&a.checkpoint)?;
    let mut cfg = ckpt.meta.config.clone();
    cfg.system = check_system(&ckpt, a.system)?;
    let seed = a.seed.unwrap_or(cfg.seed);
    let mut lines = String::new();
    match load_model_and_data(&ckpt, &cfg, &a.data)? {
        Loaded::Pedestrian { model, split, .. } => {
            for (i, scene) in held_out(&split)?.iter().enumerate() {
                let pred = model.generate_seeded(scene, seed.wrapping_add(i as u64))?;
                let mut record = serde_json::to_value(scene).map_err(|e| CliError::data(e.to_string()))?;
                if let Some(obj) = record.as_object_mut() {
                    obj.insert("noise_seed".into(), pred.noise_seed.into());
                }
                json_line(&with_predictions(record, "windows", &pred.predicted)?, &mut lines);
            }
        }
        Loaded::Joint { model, split } => {
            for scene in held_out(&split)? {
                let pred = model.predict_joint(&scene)?;
                let record = serde_json::to_value(&scene).map_err(|e| CliError::data(e.to_string()))?;
                json_line(&with_predictions(record, "actors", &pred.predicted)?, &mut lines);
            }
        }
    }
    let mut run = RunDir::create(&a.out)?;
    run.write("predictions.jsonl", lines.as_bytes())?;
    run.finish("predict", None, Some(config_hash(&cfg)), seed)
}

/// Observed + future windows of each held-out scene, for plotting.
fn scene_windows(loaded: &Loaded) -> CliResult<Vec<(String, Vec<TrajectoryWindow>)>> {
    Ok(match loaded {
        Loaded::Pedestrian { split, .. } => held_out(split)?.into_iter().map(|s| (s.id.clone(), s.windows)).collect(),
        Loaded::Joint { split, .. } => held_out(split)?.into_iter().map(|s| (s.id.clone(), s.windows())).collect(),
    })
}

struct Interaction {
    scene: usize,
    from: usize,
    to: usize,
    embedding: Vec<f64>,
}

fn collect_interactions(loaded: &Loaded, max_points: usize) -> CliResult<Vec<Interaction>> {
    let outputs = match loaded {
        Loaded::Pedestrian { model, split, .. } => {
            held_out(split)?.iter().map(|s| model.interactions(s)).collect::<nmmp::Result<Vec<_>>>()?
        }
        Loaded::Joint { model, split } => {
            held_out(split)?.iter().map(|s| model.interactions(s)).collect::<nmmp::Result<Vec<_>>>()?
        }
    };
    let mut out = Vec::new();
    'scenes: for (scene, o) in outputs.iter().enumerate() {
        for (e, &(from, to)) in o.pairs.iter().enumerate() {
            if out.len() >= max_points {
                break 'scenes;
            }
            let embedding = o.interaction_embeddings.row(e).iter().map(|&v| v as f64).collect();
            out.push(Interaction { scene, from, to, embedding });
        }
    }
    Ok(out)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Anchors spread evenly over the interactions, each with its nearest neighbour in
/// embedding space, preferring neighbours from other scenes.
fn nearest_pairs(items: &[Interaction], count: usize) -> Vec<(usize, usize)> {
    let n = items.len();
    let count = count.min(n);
    let mut out = Vec::with_capacity(count);
    for c in 0..count {
        let anchor = c * n / count.max(1);
        let best = |other_scene_only: bool| {
            (0..n)
                .filter(|&j| j != anchor && (!other_scene_only || items[j].scene != items[anchor].scene))
                .map(|j| (sq_dist(&items[anchor].embedding, &items[j].embedding), j))
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
                .map(|(_, j)| j)
        };
        if let Some(j) = best(true).or_else(|| best(false)) {
            out.push((anchor, j));
        }
    }
    out
}

fn pair_panel(windows: &[TrajectoryWindow], from: usize, to: usize, title: &str) -> Panel {
    let full = |w: &TrajectoryWindow| -> Vec<Point> { w.observed.iter().chain(&w.future).copied().collect() };
    let (a, b) = (full(&windows[from]), full(&windows[to]));
    let mut p = Panel::fit(320.0, 320.0, a.iter().chain(&b).copied());
    p.title(title);
    for (traj, color, name) in [(&a, svg::BLUE, "i"), (&b, svg::ORANGE, "j")] {
        let split = windows[0].observed.len();
        p.polyline(&traj[..split], color, false);
        p.polyline(&traj[split - 1..], color, true);
        p.circle(traj[split - 1], 3.0, color);
        p.label(traj[0], name);
    }
    p
}

pub fn viz_embeddings(a: &VizEmbeddingsArgs) -> CliResult<RunManifest> {
    let ckpt = load_checkpoint(&a.checkpoint)?;
    let cfg = ckpt.meta.config.clone();
    let seed = a.seed.unwrap_or(cfg.seed);
    let loaded = load_model_and_data(&ckpt, &cfg, &a.data)?;
    let items = collect_interactions(&loaded, a.max_points)?;
    if items.len() < 2 {
        return Err(CliError::data(format!("need at least 2 interactions, the scenes provide {}", items.len())));
    }
    let coords =
        tsne::project(&items.iter().map(|i| i.embedding.clone()).collect::<Vec<_>>(), seed, a.perplexity, a.epochs)?;
    let scenes = scene_windows(&loaded)?;
    let pairs = nearest_pairs(&items, a.pairs);

    let mut csv = String::from("scene_id,from,to,x,y\n");
    for (it, c) in items.iter().zip(&coords) {
        csv.push_str(&format!("{},{},{},{:.6},{:.6}\n", scenes[it.scene].0, it.from, it.to, c[0], c[1]));
    }
    let mut scatter = Panel::fit(640.0, 640.0, coords.iter().copied());
    scatter.title("interaction embeddings (t-SNE)");
    for c in &coords {
        scatter.circle(*c, 2.5, svg::GREY);
    }
    for (n, &(x, y)) in pairs.iter().enumerate() {
        scatter.circle(coords[x], 4.0, svg::RED);
        scatter.circle(coords[y], 4.0, svg::BLUE);
        scatter.label(coords[x], &format!("{}", n + 1));
    }

    let mut run = RunDir::create(&a.out)?;
    run.write("embeddings.csv", csv.as_bytes())?;
    run.write("embeddings.svg", svg::document(&[scatter]).as_bytes())?;
    for (n, &(x, y)) in pairs.iter().enumerate() {
        let panels: Vec<Panel> = [x, y]
            .iter()
            .map(|&k| {
                let it = &items[k];
                let (id, windows) = &scenes[it.scene];
                pair_panel(windows, it.from, it.to, &format!("{id} ({} -> {})", it.from, it.to))
            })
            .collect();
        run.write(&format!("pair_{:02}.svg", n + 1), svg::document(&panels).as_bytes())?;
    }
    run.finish("viz-embeddings", None, Some(config_hash(&cfg)), seed)
}

fn predictions(loaded: &Loaded, seed: u64, limit: usize) -> CliResult<Vec<Vec<Vec<Point>>>> {
    Ok(match loaded {
        Loaded::Pedestrian { model, split, .. } => held_out(split)?
            .iter()
            .take(limit)
            .enumerate()
            .map(|(i, s)| Ok(model.generate_seeded(s, seed.wrapping_add(i as u64))?.predicted))
            .collect::<CliResult<_>>()?,
        Loaded::Joint { model, split } => held_out(split)?
            .iter()
            .take(limit)
            .map(|s| Ok(model.predict_joint(s)?.predicted))
            .collect::<CliResult<_>>()?,
    })
}

pub fn viz_trajectories(a: &VizTrajectoriesArgs) -> CliResult<RunManifest> {
    let ckpt = load_checkpoint(&a.checkpoint)?;
    let cfg = ckpt.meta.config.clone();
    let seed = a.seed.unwrap_or(cfg.seed);
    let loaded = load_model_and_data(&ckpt, &cfg, &a.data)?;
    let preds = predictions(&loaded, seed, a.limit)?;
    let baseline = match &a.baseline {
        Some(path) => {
            let b = load_checkpoint(path)?;
            if b.meta.system != cfg.system {
                return Err(CliError::config("baseline checkpoint is for a different system"));
            }
            let loaded_b = load_model_and_data(&b, &b.meta.config, &a.data)?;
            Some(predictions(&loaded_b, seed, a.limit)?)
        }
        None => None,
    };
    let scenes = scene_windows(&loaded)?;
    let mut run = RunDir::create(&a.out)?;
    for (s, ((id, windows), pred)) in scenes.iter().zip(&preds).enumerate() {
        let mut extent: Vec<Point> = windows.iter().flat_map(|w| w.observed.iter().chain(&w.future).copied()).collect();
        extent.extend(pred.iter().flatten().copied());
        if let Some(b) = &baseline {
            extent.extend(b[s].iter().flatten().copied());
        }
        let mut panel = Panel::fit(480.0, 480.0, extent);
        panel.title(id);
        for (i, w) in windows.iter().enumerate() {
            let truth: Vec<Point> = w.observed.iter().chain(&w.future).copied().collect();
            panel.polyline(&truth, svg::GREEN, false);
            panel.circle(w.current(), 3.0, svg::GREEN);
            let with_origin =
                |p: &[Point]| -> Vec<Point> { std::iter::once(w.current()).chain(p.iter().copied()).collect() };
            if let Some(b) = &baseline {
                panel.polyline(&with_origin(&b[s][i]), svg::BLUE, true);
            }
            panel.polyline(&with_origin(&pred[i]), svg::RED, true);
        }
        run.write(&format!("scene_{s:04}.svg"), svg::document(&[panel]).as_bytes())?;
    }
    run.finish("viz-trajectories", None, Some(config_hash(&cfg)), seed)
}

pub fn synth(a: &SynthArgs) -> CliResult<RunManifest> {
    let mut run = RunDir::create(&a.out)?;
    let (format, units, t_obs, t_pred, timestep, stride, files) = match a.system {
        SystemArg::Pedestrian => {
            let rule: SynthRule = a.rule.parse()?;
            let defaults = SynthOptions::default();
            let opts = SynthOptions {
                t_obs: a.t_obs.unwrap_or(defaults.t_obs),
                t_pred: a.t_pred.unwrap_or(defaults.t_pred),
                timestep: a.timestep.unwrap_or(defaults.timestep),
                ..defaults
            };
            let train = synthesize_interacting_scenes(a.train_scenes, a.actors, rule, a.seed, &opts);
            let test = synthesize_interacting_scenes(a.test_scenes, a.actors, rule, a.seed.wrapping_add(1), &opts);
            for (name, scenes) in [("train.txt", &train), ("test.txt", &test)] {
                let path = a.out.join(name);
                write_scenes_as_records(scenes, &path)?;
                let bytes = fs::read(&path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
                fs::remove_file(&path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
                run.write(name, &bytes)?;
            }
            let stride = records_block_stride(opts.t_obs, opts.t_pred);
            (
                DataFormat::Trajectory,
                Units::Meters,
                opts.t_obs,
                opts.t_pred,
                opts.timestep,
                Some(stride),
                ["train.txt", "test.txt"],
            )
        }
        SystemArg::Joint => {
            let (t_obs, t_pred, timestep) = (a.t_obs.unwrap_or(5), a.t_pred.unwrap_or(30), a.timestep.unwrap_or(0.1));
            let train = synthesize_joint_scenes(a.train_scenes, t_obs, t_pred, timestep, a.seed);
            let test = synthesize_joint_scenes(a.test_scenes, t_obs, t_pred, timestep, a.seed.wrapping_add(1));
            for (name, scenes) in [("train.jsonl", &train), ("test.jsonl", &test)] {
                let mut text = String::new();
                for s in scenes.iter() {
                    text.push_str(&serde_json::to_string(s).map_err(|e| CliError::data(e.to_string()))?);
                    text.push('\n');
                }
                run.write(name, text.as_bytes())?;
            }
            (DataFormat::JointJsonl, Units::Meters, t_obs, t_pred, timestep, None, ["train.jsonl", "test.jsonl"])
        }
    };
    let manifest = DatasetManifest {
        format,
        units,
        timestep,
        t_obs,
        t_pred,
        column_order: None,
        train_stride: stride.unwrap_or(1),
        eval_stride: stride,
        sets: ["train", "test"]
            .iter()
            .zip(files)
            .map(|(n, f)| SetEntry { name: n.to_string(), files: vec![f.into()] })
            .collect(),
        root: a.out.clone(),
    };
    run.write("dataset.toml", manifest.to_toml().as_bytes())?;
    run.finish("synth", None, None, a.seed)
}

pub fn rasterize(a: &RasterizeArgs) -> CliResult<RunManifest> {
    let spec = match &a.config {
        Some(path) => read_config(path)?.joint.raster,
        None => RasterSpec::default(),
    };
    let scenes = JointSceneSample::read_jsonl(&a.input)?;
    let mut run = RunDir::create(&a.out)?;
    for (i, scene) in scenes.iter().enumerate() {
        let image = render(&scene.centered(), &spec)?;
        if matches!(a.format, ImageFormat::Ppm | ImageFormat::Both) {
            run.write(&format!("scene_{i:04}.ppm"), &image.to_ppm())?;
        }
        if matches!(a.format, ImageFormat::Png | ImageFormat::Both) {
            run.write(&format!("scene_{i:04}.png"), &png_bytes(&image)?)?;
        }
    }
    run.finish("rasterize", a.config.as_deref(), None, 0)
}

fn png_bytes(image: &nmmp::RasterImage) -> CliResult<Vec<u8>> {
    let buf = image::RgbImage::from_raw(image.width as u32, image.height as u32, image.data.clone())
        .ok_or_else(|| CliError::data("raster buffer has the wrong size"))?;
    let mut out = std::io::Cursor::new(Vec::new());
    buf.write_to(&mut out, image::ImageFormat::Png).map_err(|e| CliError::data(e.to_string()))?;
    Ok(out.into_inner())
}
