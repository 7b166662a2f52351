mod common;

use common::{rng, row_diff, walk};
use nmmp::autodiff::Graph;
use nmmp::joint::{
    combine_losses, from_ego, future_matrix, joint_loss, joint_loss_graph, to_ego, EgoFrame, JointActor, SdvPose,
};
use nmmp::nmmp::MlpWidths;
use nmmp::nn::Activation;
use nmmp::raster::rasterize;
use nmmp::{ActorType, JointConfig, JointModel, JointSceneSample, NmmpConfig, Point, RasterImage, RasterSpec};
use proptest::prelude::*;
use rand::Rng;

fn tiny() -> JointConfig {
    JointConfig {
        t_obs: 2,
        t_pred: 3,
        nmmp: NmmpConfig {
            embed_dim: 4,
            iterations: 1,
            mlp_widths: MlpWidths::uniform(6),
            lstm_hidden: 4,
            activation: Activation::Tanh,
        },
        enc_hidden: vec![6],
        latent_dim: 4,
        dec_hidden: vec![6],
        scene_channels: vec![2, 3],
        scene_dim: 3,
        inter_hidden: vec![6],
        activation: Activation::Tanh,
        raster: RasterSpec { height: 16, width: 16, resolution: 2.0, ..RasterSpec::default() },
        ..JointConfig::default()
    }
}

fn model(seed: u64) -> JointModel<f64> {
    JointModel::new(&tiny(), seed).unwrap()
}

fn actor(id: &str, t: ActorType, r: &mut impl Rng) -> JointActor {
    let pts = walk(r, 6, 8.0);
    JointActor {
        id: id.into(),
        actor_type: t,
        heading: r.random_range(-3.0..3.0),
        observed: pts[..3].to_vec(),
        future: pts[3..].to_vec(),
    }
}

fn scene(seed: u64) -> JointSceneSample {
    let mut r = rng(seed);
    let actors = vec![
        actor("v0", ActorType::Vehicle, &mut r),
        actor("p0", ActorType::Pedestrian, &mut r),
        actor("v1", ActorType::Vehicle, &mut r),
    ];
    JointSceneSample {
        id: format!("j{seed}"),
        actors,
        sdv: SdvPose { x: 0.0, y: 0.0, heading: 0.3 },
        drivable: vec![vec![[-12.0, -3.0], [12.0, -3.0], [12.0, 3.0], [-12.0, 3.0]]],
        timestep: 0.5,
        raster: None,
    }
}

fn rotate(p: Point, theta: f64) -> Point {
    let (s, c) = theta.sin_cos();
    [c * p[0] - s * p[1], s * p[0] + c * p[1]]
}

proptest! {
    #[test]
    fn ego_round_trip(ox in -1e3f64..1e3, oy in -1e3f64..1e3, heading in -10.0f64..10.0, seed in any::<u64>()) {
        let frame = EgoFrame { origin: [ox, oy], heading };
        let pts = walk(&mut rng(seed), 12, 50.0);
        let back = from_ego(&to_ego(&pts, &frame), &frame);
        for (a, b) in pts.iter().zip(&back) {
            prop_assert!((a[0] - b[0]).abs() < 1e-9 && (a[1] - b[1]).abs() < 1e-9);
        }
    }
}

#[test]
fn global_rotation_rotates_individual_output_only() {
    let m = model(1);
    let s = scene(2);
    let a = m.predict_joint(&s).unwrap();
    let mut inter_moved = false;
    for theta in [0.4, 1.3, -2.2] {
        let b = m.predict_joint(&s.rotated(theta)).unwrap();
        for (ta, tb) in a.individual_component.iter().zip(&b.individual_component) {
            for (pa, pb) in ta.iter().zip(tb) {
                let r = rotate(*pa, theta);
                assert!((r[0] - pb[0]).abs() < 1e-9 && (r[1] - pb[1]).abs() < 1e-9);
            }
        }
        let rotated_inter: Vec<f64> =
            a.interaction_component.iter().flatten().flat_map(|&p| rotate(p, theta)).collect();
        let inter: Vec<f64> = b.interaction_component.iter().flatten().flat_map(|p| *p).collect();
        inter_moved |= row_diff(&rotated_inter, &inter) > 1e-6;
    }
    assert!(inter_moved, "interactive output unexpectedly rotation-equivariant");
}

#[test]
fn type_branches_are_isolated() {
    let mut m = model(3);
    let s = scene(4);
    let before: Vec<Vec<Point>> = s.actors.iter().map(|a| m.individual_forward(a).unwrap()).collect();
    let ids: Vec<_> = m.store.ids_with_prefix("joint.ind.vehicle.").collect();
    for id in ids {
        for v in m.store.get_mut(id).data_mut() {
            *v += 0.3;
        }
    }
    let after: Vec<Vec<Point>> = s.actors.iter().map(|a| m.individual_forward(a).unwrap()).collect();
    assert_eq!(before[1], after[1]);
    assert_ne!(before[0], after[0]);
    assert_ne!(before[2], after[2]);
}

#[test]
fn pose_is_removed_and_types_differ() {
    let m = model(5);
    let base = JointActor {
        id: "a".into(),
        actor_type: ActorType::Vehicle,
        heading: 0.0,
        observed: vec![[0.0, 0.0], [1.0, 0.2], [2.0, 0.1]],
        future: vec![],
    };
    let frame = EgoFrame { origin: [7.0, -4.0], heading: 2.1 };
    let moved = JointActor { heading: 2.1, observed: from_ego(&base.observed, &frame), ..base.clone() };
    let za = m.individual_forward(&base).unwrap();
    let zb = m.individual_forward(&moved).unwrap();
    assert!(row_diff(&za.concat(), &zb.concat()) < 1e-9);
    let ped = JointActor { actor_type: ActorType::Pedestrian, ..base.clone() };
    assert!(row_diff(&za.concat(), &m.individual_forward(&ped).unwrap().concat()) > 1e-6);
}

#[test]
fn zero_motion_with_zero_decoder_is_zero() {
    let mut m = model(6);
    m.net.branches[ActorType::Pedestrian.index()].decoder.zero_output(&mut m.store);
    let still = JointActor {
        id: "s".into(),
        actor_type: ActorType::Pedestrian,
        heading: 0.7,
        observed: vec![[3.0, 3.0]; 3],
        future: vec![],
    };
    assert!(m.individual_forward(&still).unwrap().iter().all(|p| *p == [0.0, 0.0]));
}

#[test]
fn individual_branch_is_local() {
    let m = model(7);
    let s = scene(8);
    let mut changed = s.clone();
    changed.actors[2].observed[0][0] += 1.5;
    changed.actors[2].observed[1][1] -= 0.7;
    let a = m.predict_joint(&s).unwrap();
    let b = m.predict_joint(&changed).unwrap();
    assert_eq!(a.individual_component[0], b.individual_component[0]);
    assert_eq!(a.individual_component[1], b.individual_component[1]);
    assert!(row_diff(&a.interaction_component[0].concat(), &b.interaction_component[0].concat()) > 1e-9);
}

#[test]
fn scene_encoder_cases() {
    let mut m = model(9);
    let s = scene(1);
    let img = rasterize(&s, &m.config.raster).unwrap();
    assert_eq!(m.encode_scene(&img).unwrap(), m.encode_scene(&img).unwrap());
    let other = rasterize(&scene(2), &m.config.raster).unwrap();
    assert!(row_diff(&m.encode_scene(&img).unwrap(), &m.encode_scene(&other).unwrap()) > 1e-9);
    assert!(m.encode_scene(&RasterImage::filled(8, 8, [0, 0, 0])).is_err());
    m.net.scene.head.zero(&mut m.store);
    assert!(m.encode_scene(&RasterImage::filled(16, 16, [0, 0, 0])).unwrap().iter().all(|&v| v == 0.0));
}

#[test]
fn interactive_branch_cases() {
    let mut m = model(10);
    let s = scene(3);
    let emb = [0.2, -0.1, 0.5];
    let z = m.interactive_forward(&s, &emb).unwrap();
    assert_eq!(z.len(), 3);

    let perm = [2, 0, 1];
    let permuted = JointSceneSample { actors: perm.iter().map(|&i| s.actors[i].clone()).collect(), ..s.clone() };
    let zp = m.interactive_forward(&permuted, &emb).unwrap();
    for (a, &i) in perm.iter().enumerate() {
        assert!(row_diff(&zp[a].concat(), &z[i].concat()) < 1e-6);
    }

    let single = JointSceneSample { actors: vec![s.actors[1].clone()], ..s.clone() };
    assert_eq!(m.interactive_forward(&single, &emb).unwrap().len(), 1);
    assert!(m.interactive_forward(&s, &emb[..2]).is_err());

    m.net.inter.zero_output(&mut m.store);
    let out = m.predict_joint(&s).unwrap();
    assert!(out.interaction_component.iter().flatten().all(|p| *p == [0.0, 0.0]));
    assert_eq!(out.predicted, out.individual_component);
}

#[test]
fn zero_individual_output_rebases_at_current_position() {
    let mut m = model(11);
    for b in &m.net.branches {
        b.decoder.zero_output(&mut m.store);
    }
    let s = scene(5);
    let out = m.predict_joint(&s).unwrap();
    for (i, a) in s.actors.iter().enumerate() {
        let origin = a.ego_frame().from_ego([0.0, 0.0]);
        for t in 0..3 {
            let z = out.interaction_component[i][t];
            let p = out.predicted[i][t];
            assert!((p[0] - (origin[0] + z[0])).abs() < 1e-12 && (p[1] - (origin[1] + z[1])).abs() < 1e-12);
        }
    }
}

#[test]
fn golden_prediction() {
    let m = model(2024);
    let out = m.predict_joint(&scene(2024)).unwrap();
    let got: Vec<f64> = out.predicted.iter().flatten().flat_map(|p| *p).collect();
    let golden = GOLDEN;
    assert_eq!(got.len(), golden.len(), "{got:?}");
    for (a, b) in got.iter().zip(golden) {
        assert!((a - b).abs() < 1e-9, "{got:?}");
    }
}

/// Captured from the first verified build; a change here means the forward pass changed.
const GOLDEN: [f64; 18] = [
    -4.723805014596436,
    7.605647865978291,
    -4.844381176148927,
    8.471392765249,
    -5.130593759634595,
    8.183487580445622,
    -0.36475476462712997,
    3.278959251808788,
    0.006320843170169302,
    3.142822258412729,
    -0.07932296427679622,
    3.1728170522308172,
    2.155007219089135,
    -5.892772715757195,
    2.253315690674374,
    -6.61121910668456,
    2.4202884250980694,
    -6.117416528666411,
];

#[test]
fn loss_values() {
    assert_eq!(combine_losses(2.0, 4.0, 0.5), 3.0);
    let m = model(12);
    let s = scene(6);
    let mut pred = m.predict_joint(&s).unwrap();
    let truth: Vec<Vec<Point>> = s.actors.iter().map(|a| a.future.clone()).collect();
    pred.predicted = truth.clone();
    pred.individual_component = truth;
    assert_eq!(joint_loss(&pred, &s, 0.5).unwrap(), 0.0);
    assert!(joint_loss(&pred, &s, 1.5).is_err());
}

#[test]
fn lambda_one_leaves_interactive_weights_untouched() {
    let m = model(13);
    let s = scene(7);
    let image = m.image(&s).unwrap();
    let target = future_matrix::<f64>(&[&s]);
    let mut g = Graph::new(&m.store);
    let out = m.net.forward(&mut g, &[&s], &[image]).unwrap();
    let (loss, _, _) = joint_loss_graph(&mut g, &out, &target, 1.0);
    let grads = g.backward(loss);
    let mut ind = 0;
    for (id, name, _) in m.store.iter() {
        let zero = grads.get(id).is_none_or(|gr| gr.data().iter().all(|&v| v == 0.0));
        if name.starts_with("joint.ind.") {
            ind += usize::from(!zero);
        } else {
            assert!(zero, "{name} received gradient");
        }
    }
    assert!(ind > 0);
}
