#![allow(dead_code)]

use nmmp::nmmp::MlpWidths;
use nmmp::nn::Activation;
use nmmp::{Matrix, NmmpConfig, Point, SceneSample, TrajectoryWindow, Units};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random walk with `len` points starting near the origin.
pub fn walk(rng: &mut impl Rng, len: usize, spread: f64) -> Vec<Point> {
    let mut p = [rng.random_range(-spread..spread), rng.random_range(-spread..spread)];
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        out.push(p);
        p = [p[0] + rng.random_range(-0.6..0.6), p[1] + rng.random_range(-0.6..0.6)];
    }
    out
}

pub fn random_windows(seed: u64, n: usize, t_obs: usize, t_pred: usize) -> Vec<TrajectoryWindow> {
    let mut r = rng(seed);
    (0..n)
        .map(|i| {
            let pts = walk(&mut r, t_obs + 1 + t_pred, 5.0);
            TrajectoryWindow::new(format!("a{i}"), pts[..=t_obs].to_vec(), pts[t_obs + 1..].to_vec(), 0.4)
        })
        .collect()
}

pub fn random_scene(seed: u64, n: usize, t_obs: usize, t_pred: usize) -> SceneSample {
    SceneSample::new(format!("s{seed}"), random_windows(seed, n, t_obs, t_pred), 0.4, Units::Meters)
}

pub fn nmmp_config(d: usize, k: usize, width: usize, activation: Activation) -> NmmpConfig {
    NmmpConfig { embed_dim: d, iterations: k, mlp_widths: MlpWidths::uniform(width), lstm_hidden: d, activation }
}

pub fn max_diff(a: &Matrix<f64>, b: &Matrix<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.max_abs_diff(b)
}

pub fn row_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
