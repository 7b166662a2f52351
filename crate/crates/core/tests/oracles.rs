//! Hand-computed oracles with frozen expected values.

mod common;

use std::path::Path;

use common::{nmmp_config, rng};
use nmmp::datasets::{leave_one_out, parse_trajectory_str, window_scenes, ColumnOrder, Protocol, WindowOptions};
use nmmp::joint::EgoFrame;
use nmmp::metrics::{ade, crowd_split_report, fde, scene_errors, select_best};
use nmmp::nmmp::MlpWidths;
use nmmp::nn::Activation;
use nmmp::pedestrian::{discriminator_loss, generator_loss};
use nmmp::{Matrix, NmmpConfig, NmmpModel, Point, PredictionBatch, RawRecord, SceneSample, TrajectoryWindow, Units};
use rand::Rng;

fn set(model: &mut NmmpModel<f64>, name: &str, rows: &[&[f64]]) {
    let id = model.store.id(name).unwrap_or_else(|| panic!("no tensor {name}"));
    *model.store.get_mut(id) = Matrix::from_rows(rows);
}

fn linear_config(d: usize, k: usize) -> NmmpConfig {
    NmmpConfig {
        embed_dim: d,
        iterations: k,
        mlp_widths: MlpWidths { temp: vec![], spatial: vec![], node: vec![], edge: vec![] },
        lstm_hidden: d,
        activation: Activation::Tanh,
    }
}

#[test]
fn lstm_matches_hand_unroll() {
    let mut m = NmmpModel::<f64>::new(&linear_config(2, 0), 0).unwrap();
    set(&mut m, "nmmp.f_temp.l0.w", &[&[1.0, 0.0], &[0.0, 1.0]]);
    set(&mut m, "nmmp.f_temp.l0.b", &[&[0.0, 0.0]]);
    set(
        &mut m,
        "nmmp.lstm.w_ih",
        &[&[0.5, -0.3, 0.2, 0.1, 0.7, -0.4, 0.3, 0.6], &[-0.2, 0.4, 0.3, -0.5, 0.1, 0.8, -0.6, 0.2]],
    );
    set(
        &mut m,
        "nmmp.lstm.w_hh",
        &[&[0.1, 0.2, -0.3, 0.4, 0.5, -0.6, 0.7, -0.8], &[-0.1, 0.3, 0.2, -0.2, 0.4, 0.1, -0.3, 0.5]],
    );
    set(&mut m, "nmmp.lstm.b", &[&[0.0, 0.1, 1.0, 1.0, -0.1, 0.2, 0.0, -0.2]]);
    // displacements (1,0), (1,0), (0,1)
    let w = TrajectoryWindow::new("a", vec![[3.0, 3.0], [4.0, 3.0], [5.0, 3.0], [5.0, 4.0]], vec![], 0.4);
    let h = m.embed_trajectory(&w).unwrap();
    let expected = [0.20321651550686676, 0.11329333137506795];
    for (a, b) in h.iter().zip(expected) {
        assert!((a - b).abs() < 1e-12, "{h:?}");
    }
}

#[test]
fn two_node_round_matches_hand_arithmetic() {
    let mut m = NmmpModel::<f64>::new(&linear_config(2, 1), 0).unwrap();
    set(&mut m, "nmmp.f_v.1.l0.w", &[&[0.5, -1.0], &[2.0, 0.25], &[-0.5, 1.5], &[1.0, 0.0]]);
    set(&mut m, "nmmp.f_v.1.l0.b", &[&[0.1, -0.2]]);
    set(&mut m, "nmmp.f_e.1.l0.w", &[&[1.0, 0.5], &[-0.25, 2.0], &[0.75, -1.0], &[0.0, 0.5]]);
    set(&mut m, "nmmp.f_e.1.l0.b", &[&[-0.3, 0.4]]);
    let windows = common::random_windows(1, 2, 4, 0);
    let h: Vec<Vec<f64>> = windows.iter().map(|w| m.embed_trajectory(w).unwrap()).collect();
    let mut state = m.init_graph(&windows, &h).unwrap();
    assert_eq!(state.pairs, vec![(0, 1), (1, 0)]);
    state.edge_embeddings = Matrix::from_rows(&[[1.0, 2.0], [-1.0, 0.5]]);
    let next = m.message_passing_round(&state, 0).unwrap();

    // v_0 = [e_10; e_01] W_v + b_v, v_1 = [e_01; e_10] W_v + b_v
    // e_01 = [v_0; v_1] W_e + b_e, e_10 = [v_1; v_0] W_e + b_e
    let close = |a: &[f64], b: [f64; 2]| (a[0] - b[0]).abs() < 1e-9 && (a[1] - b[1]).abs() < 1e-9;
    assert!(close(next.node(0), [2.1, 2.425]), "{:?}", next.node(0));
    assert!(close(next.node(1), [5.6, -2.2]), "{:?}", next.node(1));
    assert!(close(next.edge(0, 1).unwrap(), [5.39375, -0.4]), "{:?}", next.edge(0, 1));
    assert!(close(next.edge(1, 0).unwrap(), [7.425, -2.0875]), "{:?}", next.edge(1, 0));
}

#[test]
fn ego_rotation_by_hand() {
    let frame = EgoFrame { origin: [10.0, 0.0], heading: std::f64::consts::FRAC_PI_2 };
    let p = frame.to_ego([10.0, 1.0]);
    assert!((p[0] - 1.0).abs() < 1e-12 && p[1].abs() < 1e-12, "{p:?}");
    let identity = EgoFrame { origin: [0.0, 0.0], heading: 0.0 };
    assert_eq!(identity.to_ego([3.5, -2.0]), [3.5, -2.0]);
}

#[test]
fn displacement_metric_hand_cases() {
    let gt: Vec<Point> = (0..12).map(|t| [t as f64 * 0.7, -1.0 + t as f64]).collect();
    let off: Vec<Point> = gt.iter().map(|p| [p[0] + 3.0, p[1] + 4.0]).collect();
    assert_eq!(ade(&off, &gt).unwrap(), 5.0);
    assert_eq!(fde(&off, &gt).unwrap(), 5.0);
    assert_eq!(ade(&[[0.0, 0.0], [1.0, 1.0]], &[[0.0, 1.0], [2.0, 1.0]]).unwrap(), 1.0);
    assert_eq!(fde(&[[0.0, 0.0], [1.0, 1.0]], &[[0.0, 0.0], [1.0, 3.0]]).unwrap(), 2.0);
    assert!(ade(&[[0.0, 0.0]], &[[0.0, 0.0], [1.0, 1.0]]).is_err());
}

#[test]
fn fde_matches_final_point_oracle() {
    let mut r = rng(77);
    for _ in 0..200 {
        let len = r.random_range(1..20);
        let p: Vec<Point> = (0..len).map(|_| [r.random_range(-9.0..9.0), r.random_range(-9.0..9.0)]).collect();
        let g: Vec<Point> = (0..len).map(|_| [r.random_range(-9.0..9.0), r.random_range(-9.0..9.0)]).collect();
        let (a, b) = (p[len - 1], g[len - 1]);
        let oracle = ((a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1])).sqrt();
        assert!((fde(&p, &g).unwrap() - oracle).abs() < 1e-12);
    }
}

fn batch(predicted: Vec<Vec<Point>>) -> PredictionBatch {
    let zeros: Vec<Vec<Point>> = predicted.iter().map(|p| vec![[0.0, 0.0]; p.len()]).collect();
    PredictionBatch { predicted, individual_component: zeros.clone(), interaction_component: zeros, noise_seed: None }
}

#[test]
fn generator_loss_cases() {
    let gt: Vec<Point> = (0..12).map(|t| [t as f64, 2.0 * t as f64]).collect();
    let w = TrajectoryWindow::new("a", vec![[0.0, 0.0]; 9], gt.clone(), 0.4);
    let scene = SceneSample::new("s", vec![w], 0.4, Units::Meters);
    assert_eq!(generator_loss(&batch(vec![gt.clone()]), &scene), 0.0);
    let off: Vec<Point> = gt.iter().map(|p| [p[0] + 3.0, p[1] + 4.0]).collect();
    assert_eq!(generator_loss(&batch(vec![off]), &scene), 300.0);

    let mut r = rng(3);
    for _ in 0..50 {
        let n = r.random_range(1..5);
        let windows: Vec<TrajectoryWindow> = (0..n)
            .map(|i| TrajectoryWindow::new(format!("{i}"), vec![[0.0, 0.0]; 3], common::walk(&mut r, 6, 3.0), 0.4))
            .collect();
        let pred: Vec<Vec<Point>> = (0..n).map(|_| common::walk(&mut r, 6, 3.0)).collect();
        let mut oracle = 0.0;
        for (p, w) in pred.iter().zip(&windows) {
            for t in 0..6 {
                for c in 0..2 {
                    oracle += (p[t][c] - w.future[t][c]).powi(2);
                }
            }
        }
        let scene = SceneSample::new("s", windows, 0.4, Units::Meters);
        assert!((generator_loss(&batch(pred), &scene) - oracle).abs() < 1e-9);
    }
}

#[test]
fn discriminator_loss_cases() {
    let v = discriminator_loss(&[0.9, 0.8], &[0.2, 0.1]);
    assert!((v - -0.6570081339440721).abs() < 1e-12, "{v}");
    let half = discriminator_loss(&[0.5; 3], &[0.5; 3]);
    assert!((half - 6.0 * 0.5f64.ln()).abs() < 1e-12);
    let best = discriminator_loss(&[1.0, 1.0], &[0.0, 0.0]);
    assert!(best < 0.0 && best > -1e-5, "{best}");
}

fn grid_records(actors: &[(i64, std::ops::Range<i64>)]) -> Vec<RawRecord> {
    let mut out = Vec::new();
    for (a, frames) in actors {
        for f in frames.clone() {
            out.push(RawRecord { frame_id: f * 10, actor_id: *a, x: f as f64 + *a as f64 * 0.5, y: -(f as f64) });
        }
    }
    out.sort_by_key(|r| (r.frame_id, r.actor_id));
    out
}

fn window_opts(stride: usize) -> WindowOptions {
    WindowOptions { t_obs: 8, t_pred: 12, timestep: 0.4, stride, units: Units::Meters }
}

#[test]
fn window_enumeration_oracle() {
    let recs = grid_records(&[(1, 0..25), (2, 0..25)]);
    let scenes = window_scenes(&recs, &window_opts(1), "s");
    // valid starts s with s + 21 <= 25
    let starts: Vec<i64> = (0..25).filter(|s| s + 21 <= 25).collect();
    assert_eq!(scenes.len(), starts.len());
    assert_eq!(scenes.len(), 5);
    assert!(scenes.iter().all(|s| s.n_actors() == 2));

    let one = window_scenes(&grid_records(&[(7, 0..21)]), &window_opts(21), "s");
    assert_eq!(one.len(), 1);
    assert_eq!(one[0].windows[0].observed.len(), 9);
    assert_eq!(one[0].windows[0].future.len(), 12);
}

#[test]
fn actor_missing_a_frame_is_excluded() {
    let mut recs = grid_records(&[(1, 0..21), (2, 0..21)]);
    recs.retain(|r| !(r.actor_id == 2 && r.frame_id == 100));
    let scenes = window_scenes(&recs, &window_opts(21), "s");
    assert_eq!(scenes.len(), 1);
    assert_eq!(scenes[0].n_actors(), 1);
    assert_eq!(scenes[0].windows[0].actor_id, "1");
}

#[test]
fn parse_preserves_rows() {
    assert!(parse_trajectory_str("", Path::new("e.txt"), ColumnOrder::default()).unwrap().is_empty());
    let text = "10\t2\t1.25\t-3.5\n0 1 0.1 0.2\n10\t1\t7.75\t8e-3\n";
    let recs = parse_trajectory_str(text, Path::new("t.txt"), ColumnOrder::default()).unwrap();
    assert_eq!(
        recs,
        vec![
            RawRecord { frame_id: 0, actor_id: 1, x: 0.1, y: 0.2 },
            RawRecord { frame_id: 10, actor_id: 1, x: 7.75, y: 8e-3 },
            RawRecord { frame_id: 10, actor_id: 2, x: 1.25, y: -3.5 },
        ]
    );
    let err = parse_trajectory_str("0 1 0 0\n1 1 abc 0\n", Path::new("bad.txt"), ColumnOrder::default()).unwrap_err();
    assert!(err.to_string().contains('2'), "{err}");
}

#[test]
fn leave_one_out_counts() {
    let protocol = Protocol { t_obs: 8, t_pred: 12, timestep: 0.4, units: Units::Meters };
    let sets: Vec<(String, Vec<String>)> =
        (0..5).map(|s| (format!("set{s}"), (0..3 + s).map(|i| format!("set{s}/{i}")).collect())).collect();
    let splits = leave_one_out(&sets, &protocol).unwrap();
    assert_eq!(splits.len(), 5);
    let mut counts = std::collections::BTreeMap::<String, usize>::new();
    for split in &splits {
        for id in &split.train {
            *counts.entry(id.clone()).or_default() += 1;
            assert!(!split.test.contains(id));
        }
    }
    let total: usize = sets.iter().map(|s| s.1.len()).sum();
    assert_eq!(counts.len(), total);
    assert!(counts.values().all(|&c| c == 4));

    let two = leave_one_out(&sets[..2], &protocol).unwrap();
    assert_eq!((two[0].train.clone(), two[0].test.clone()), (sets[1].1.clone(), sets[0].1.clone()));
    assert_eq!((two[1].train.clone(), two[1].test.clone()), (sets[0].1.clone(), sets[1].1.clone()));
    assert!(leave_one_out(&sets[..1], &protocol).is_err());
}

fn scene_with(n: usize) -> SceneSample {
    SceneSample::new("s", common::random_windows(n as u64, n, 2, 1), 0.4, Units::Meters)
}

#[test]
fn crowd_split_matches_manual_partition() {
    let scenes: Vec<SceneSample> = [1, 2, 5, 3, 7, 1].iter().map(|&n| scene_with(n)).collect();
    let errors = [(1.0, 2.0), (2.0, 3.0), (0.5, 1.0), (4.0, 4.0), (1.5, 2.5), (3.0, 1.0)];
    let report = crowd_split_report(&scenes, &errors, &[1, 3]).unwrap();
    // bucket [1,3): scenes 0, 1, 5 with 1, 2, 1 actors; [3,inf): scenes 2, 3, 4 with 5, 3, 7
    let weighted = |idx: &[usize]| {
        let w: f64 = idx.iter().map(|&i| scenes[i].n_actors() as f64).sum();
        let a: f64 = idx.iter().map(|&i| errors[i].0 * scenes[i].n_actors() as f64).sum::<f64>() / w;
        let f: f64 = idx.iter().map(|&i| errors[i].1 * scenes[i].n_actors() as f64).sum::<f64>() / w;
        (a, f)
    };
    for (bucket, idx) in report.iter().zip([vec![0, 1, 5], vec![2, 3, 4]]) {
        let (a, f) = weighted(&idx);
        assert_eq!(bucket.scenes, 3);
        assert!((bucket.ade.unwrap() - a).abs() < 1e-12 && (bucket.fde.unwrap() - f).abs() < 1e-12);
    }
    let with_empty = crowd_split_report(&scenes, &errors, &[1, 8]).unwrap();
    assert!(with_empty[1].empty && with_empty[1].ade.is_none());
}

#[test]
fn best_of_three_brute_force() {
    let mut r = rng(5);
    for _ in 0..100 {
        let gt: Vec<Vec<Point>> = (0..3).map(|_| common::walk(&mut r, 4, 2.0)).collect();
        let cands: Vec<Vec<Vec<Point>>> =
            (0..3).map(|_| (0..3).map(|_| common::walk(&mut r, 4, 2.0)).collect()).collect();
        let chosen = select_best(&cands, &gt).unwrap();
        let errs: Vec<(f64, f64)> = cands.iter().map(|c| scene_errors(c, &gt).unwrap()).collect();
        let mut best = 0;
        for i in 1..3 {
            if errs[i].0 < errs[best].0 {
                best = i;
            }
        }
        assert_eq!(chosen.index, best);
        assert_eq!((chosen.ade, chosen.fde), errs[best]);
    }
}

#[test]
fn nmmp_config_defaults() {
    let d = NmmpConfig::default();
    assert_eq!((d.embed_dim, d.iterations, d.lstm_hidden), (64, 5, 64));
    assert!(nmmp_config(4, 0, 4, Activation::Relu).validate().is_ok());
}
