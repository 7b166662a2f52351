mod common;

use common::{random_scene, rng, walk};
use nmmp::metrics::{ade, best_of_k, evaluate, fde, normalization_ratio, scene_errors, StochasticPredictor};
use nmmp::nn::Activation;
use nmmp::pedestrian::InteractionMode;
use nmmp::{NmmpConfig, PedestrianConfig, PedestrianModel, Point, Result, SceneSample, Units};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Ground truth plus uniform jitter drawn from the stream.
struct Jitter(f64);

impl StochasticPredictor for Jitter {
    fn sample(&self, scene: &SceneSample, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<Point>>> {
        Ok(scene
            .windows
            .iter()
            .map(|w| {
                w.future
                    .iter()
                    .map(|p| [p[0] + rng.random_range(-self.0..self.0), p[1] + rng.random_range(-self.0..self.0)])
                    .collect()
            })
            .collect())
    }
}

/// Ignores its noise entirely.
struct Fixed;

impl StochasticPredictor for Fixed {
    fn sample(&self, scene: &SceneSample, _rng: &mut ChaCha8Rng) -> Result<Vec<Vec<Point>>> {
        Ok(scene.windows.iter().map(|w| w.future.iter().map(|p| [p[0] + 0.5, p[1]]).collect()).collect())
    }
}

fn oracle_dist(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn oracle_ade(p: &[Point], g: &[Point]) -> f64 {
    let mut s = 0.0;
    for t in 0..p.len() {
        s += oracle_dist(p[t], g[t]);
    }
    s / p.len() as f64
}

fn transform(points: &[Point], theta: f64, t: Point) -> Vec<Point> {
    let (s, c) = theta.sin_cos();
    points.iter().map(|p| [c * p[0] - s * p[1] + t[0], s * p[0] + c * p[1] + t[1]]).collect()
}

#[test]
fn oracle_equivalence_on_1000_cases() {
    let mut r = rng(1000);
    for case in 0..1000u64 {
        let len = r.random_range(1..15);
        let p = walk(&mut r, len, 10.0);
        let g = walk(&mut r, len, 10.0);
        assert!((ade(&p, &g).unwrap() - oracle_ade(&p, &g)).abs() < 1e-9);
        assert!((fde(&p, &g).unwrap() - oracle_dist(p[len - 1], g[len - 1])).abs() < 1e-9);

        let n = r.random_range(1..5);
        let scene = random_scene(case, n, 2, len);
        let k = r.random_range(1..8);
        let model = Jitter(r.random_range(0.1..3.0));
        let got = best_of_k(&model, &scene, k, case).unwrap();

        let mut stream = ChaCha8Rng::seed_from_u64(case);
        let mut best: Option<(f64, f64, usize)> = None;
        for i in 0..k {
            let cand = model.sample(&scene, &mut stream).unwrap();
            let a = cand.iter().zip(&scene.windows).map(|(c, w)| oracle_ade(c, &w.future)).sum::<f64>() / n as f64;
            let f =
                cand.iter().zip(&scene.windows).map(|(c, w)| oracle_dist(c[len - 1], w.future[len - 1])).sum::<f64>()
                    / n as f64;
            if best.is_none_or(|b| a < b.0) {
                best = Some((a, f, i));
            }
        }
        let (a, f, i) = best.unwrap();
        assert_eq!(got.index, i);
        assert!((got.ade - a).abs() < 1e-9 && (got.fde - f).abs() < 1e-9);
    }
}

#[test]
fn offset_three_four() {
    let g: Vec<Point> = (0..12).map(|t| [t as f64, 0.0]).collect();
    let p: Vec<Point> = g.iter().map(|q| [q[0] + 3.0, q[1] + 4.0]).collect();
    assert_eq!((ade(&p, &g).unwrap(), fde(&p, &g).unwrap()), (5.0, 5.0));
}

proptest! {
    #[test]
    fn isometry_and_symmetry(seed in any::<u64>(), theta in -7.0f64..7.0, tx in -1e3f64..1e3, ty in -1e3f64..1e3) {
        let mut r = rng(seed);
        let p = walk(&mut r, 12, 20.0);
        let g = walk(&mut r, 12, 20.0);
        let (pt, gt) = (transform(&p, theta, [tx, ty]), transform(&g, theta, [tx, ty]));
        prop_assert!((ade(&p, &g).unwrap() - ade(&pt, &gt).unwrap()).abs() < 1e-9);
        prop_assert!((fde(&p, &g).unwrap() - fde(&pt, &gt).unwrap()).abs() < 1e-9);
        prop_assert_eq!(ade(&p, &g).unwrap(), ade(&g, &p).unwrap());
        prop_assert_eq!(fde(&p, &g).unwrap(), fde(&g, &p).unwrap());
    }

    #[test]
    fn scene_ade_bounded_by_worst_actor(seed in any::<u64>(), n in 1usize..6) {
        let mut r = rng(seed);
        let p: Vec<Vec<Point>> = (0..n).map(|_| walk(&mut r, 6, 5.0)).collect();
        let g: Vec<Vec<Point>> = (0..n).map(|_| walk(&mut r, 6, 5.0)).collect();
        let (a, f) = scene_errors(&p, &g).unwrap();
        let worst = p.iter().zip(&g).map(|(x, y)| ade(x, y).unwrap()).fold(0.0, f64::max);
        prop_assert!(a <= worst + 1e-12 && f >= 0.0);
    }
}

fn tiny_model() -> PedestrianModel<f64> {
    let net = common::nmmp_config(4, 1, 6, Activation::Tanh);
    let cfg = PedestrianConfig {
        t_obs: 3,
        t_pred: 4,
        nmmp: net.clone(),
        noise_dim: 4,
        decoder_input_dim: 4,
        g_ind_hidden: vec![6],
        g_inter_hidden: vec![6],
        interaction: InteractionMode::Nmmp,
        disc_nmmp: NmmpConfig { iterations: 1, ..net },
        disc_cls_hidden: vec![6],
        ..PedestrianConfig::default()
    };
    PedestrianModel::new(&cfg, 3).unwrap()
}

#[test]
fn best_of_k_nests_in_k() {
    let m = tiny_model();
    for s in 0..10 {
        let scene = random_scene(s, 3, 3, 4);
        let mut last = f64::INFINITY;
        for k in 1..=12 {
            let b = best_of_k(&m, &scene, k, 40 + s).unwrap();
            assert!(b.ade <= last);
            last = b.ade;
        }
    }
}

#[test]
fn single_sample_and_fixed_models() {
    let m = tiny_model();
    let scene = random_scene(4, 3, 3, 4);
    let one = best_of_k(&m, &scene, 1, 9).unwrap();
    let draw = m.sample(&scene, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
    assert_eq!((one.ade, one.fde), scene_errors(&draw, &scene.futures()).unwrap());

    let base = best_of_k(&Fixed, &scene, 1, 0).unwrap();
    for k in [2, 5, 20] {
        let b = best_of_k(&Fixed, &scene, k, 0).unwrap();
        assert_eq!((b.ade, b.fde, b.index), (base.ade, base.fde, 0));
    }
    assert!(best_of_k(&m, &scene, 0, 0).is_err());
}

#[test]
fn normalization_ratio_cases() {
    assert!((normalization_ratio(0.5, 0.4).unwrap() - 0.2).abs() < 1e-15);
    assert_eq!(normalization_ratio(0.7, 0.7).unwrap(), 0.0);
    assert_eq!(normalization_ratio(0.7, 0.0).unwrap(), 1.0);
    assert!(normalization_ratio(0.0, 0.1).is_err());
}

#[test]
fn evaluation_report_fields() {
    let scenes: Vec<SceneSample> = (0..6).map(|s| random_scene(s, 1 + s as usize % 3, 3, 4)).collect();
    let sets = vec![("a".to_string(), scenes[..3].to_vec()), ("b".to_string(), scenes[3..].to_vec())];
    let rep = evaluate(&Jitter(1.0), &sets, 4, 7, Units::Pixels, &[1]).unwrap();
    assert_eq!(rep.units, Units::Pixels);
    assert_eq!((rep.k, rep.mode.as_str(), rep.scenes), (4, "best_of_k", 6));
    assert_eq!(rep.buckets.len(), 1);
    assert!((rep.buckets[0].ade.unwrap() - rep.ade).abs() < 1e-12);
    assert!((rep.buckets[0].fde.unwrap() - rep.fde).abs() < 1e-12);
    let json: serde_json::Value = serde_json::from_str(&rep.to_json()).unwrap();
    for key in ["ade", "fde", "units", "k", "buckets"] {
        assert!(json.get(key).is_some(), "{key}");
    }
    assert_eq!(json["units"], "pixels");
    assert_eq!(evaluate(&Jitter(1.0), &sets, 4, 7, Units::Pixels, &[1]).unwrap(), rep);
}
