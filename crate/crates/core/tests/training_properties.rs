use nmmp::datasets::synthesize_interacting_scenes;
use nmmp::joint::synthesize_joint_scenes;
use nmmp::nmmp::MlpWidths;
use nmmp::nn::Activation;
use nmmp::pedestrian::InteractionMode;
use nmmp::training::{load_pedestrian, pedestrian_model, train_adversarial, train_joint, train_joint_with};
use nmmp::{
    Checkpoint, Error, JointConfig, NmmpConfig, PedestrianConfig, RasterSpec, SceneSample, SynthOptions, SynthRule,
    SystemKind, TrainConfig,
};

fn small_nmmp(d: usize, k: usize) -> NmmpConfig {
    NmmpConfig {
        embed_dim: d,
        iterations: k,
        mlp_widths: MlpWidths::uniform(d),
        lstm_hidden: d,
        activation: Activation::Relu,
    }
}

fn ped_config(interaction: InteractionMode) -> TrainConfig {
    let nmmp = small_nmmp(8, 2);
    TrainConfig {
        epochs: 3,
        batch_size: Some(3),
        seed: 21,
        pedestrian: PedestrianConfig {
            t_obs: 3,
            t_pred: 4,
            nmmp: nmmp.clone(),
            noise_dim: 2,
            decoder_input_dim: 8,
            g_ind_hidden: vec![8],
            g_inter_hidden: vec![8],
            interaction,
            disc_nmmp: small_nmmp(8, 1),
            disc_cls_hidden: vec![8],
            ..PedestrianConfig::default()
        },
        ..TrainConfig::default()
    }
}

fn ped_data() -> Vec<SceneSample> {
    let o = SynthOptions { t_obs: 3, t_pred: 4, delay: 2, ..SynthOptions::default() };
    synthesize_interacting_scenes(7, 3, SynthRule::LeaderFollower, 8, &o)
}

#[test]
fn repeated_runs_are_bit_identical() {
    let cfg = ped_config(InteractionMode::Nmmp);
    let a = train_adversarial(&ped_data(), &cfg, None).unwrap();
    let b = train_adversarial(&ped_data(), &cfg, None).unwrap();
    assert_eq!(a.to_bytes().unwrap(), b.to_bytes().unwrap());
    assert_eq!(a.meta.history.len(), 3);
    let other = train_adversarial(&ped_data(), &TrainConfig { seed: 22, ..cfg }, None).unwrap();
    assert_ne!(a.tensors, other.tensors);
}

#[test]
fn checkpoint_bytes_round_trip() {
    let ck =
        train_adversarial(&ped_data(), &TrainConfig { epochs: 1, ..ped_config(InteractionMode::Pool) }, None).unwrap();
    let bytes = ck.to_bytes().unwrap();
    let back = Checkpoint::from_bytes(&bytes).unwrap();
    assert_eq!(back.to_bytes().unwrap(), bytes);
    assert_eq!(back.meta, ck.meta);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ck.bin");
    ck.save(&path).unwrap();
    assert_eq!(Checkpoint::load(&path).unwrap().tensors, ck.tensors);
    assert!(Checkpoint::from_bytes(&bytes[..bytes.len() / 2]).is_err());
}

#[test]
fn mismatched_config_names_the_tensor() {
    let cfg = TrainConfig { epochs: 1, ..ped_config(InteractionMode::Nmmp) };
    let ck = train_adversarial(&ped_data(), &cfg, None).unwrap();
    let wider = PedestrianConfig { g_ind_hidden: vec![9], ..cfg.pedestrian.clone() };
    match load_pedestrian(&wider, &ck) {
        Err(Error::TensorShape { name, .. }) => assert!(name.starts_with("gen.g_ind"), "{name}"),
        other => panic!("expected a shape error, got {:?}", other.err()),
    }
    let err = load_pedestrian(&wider, &ck).err().unwrap().to_string();
    assert!(err.contains("gen.g_ind"), "{err}");
}

#[test]
fn ablation_without_interaction_stays_local_after_training() {
    let cfg = ped_config(InteractionMode::None);
    let model = pedestrian_model(&train_adversarial(&ped_data(), &cfg, None).unwrap()).unwrap();
    let scene = &ped_data()[0];
    let mut moved = scene.clone();
    for p in moved.windows[2].observed.iter_mut() {
        p[0] += 3.0;
        p[1] -= 1.0;
    }
    let a = model.generate_seeded(scene, 4).unwrap();
    let b = model.generate_seeded(&moved, 4).unwrap();
    assert_eq!(a.predicted[..2], b.predicted[..2]);
    assert_ne!(a.predicted[2], b.predicted[2]);
}

#[test]
fn non_finite_loss_aborts_with_a_checkpoint() {
    let mut data = ped_data();
    for p in data[3].windows[0].future.iter_mut() {
        p[0] = 1e30;
    }
    let err = train_adversarial(&data, &ped_config(InteractionMode::Nmmp), None).unwrap_err();
    assert!(matches!(err.error, Error::Divergence(_)), "{err}");
    let ck = err.checkpoint.expect("diagnostic checkpoint");
    assert!(ck.meta.diverged.is_some());
    assert!(ck.tensors.iter().all(|(_, m)| m.data().iter().all(|v| v.is_finite())));
}

#[test]
fn invalid_configs_are_rejected() {
    assert!(
        matches!(train_adversarial(&ped_data(), &TrainConfig { lambda: 1.5, ..ped_config(InteractionMode::Nmmp) }, None), Err(e) if matches!(e.error, Error::Config(_)))
    );
    assert!(train_adversarial(&[], &ped_config(InteractionMode::Nmmp), None).is_err());
}

fn joint_config() -> TrainConfig {
    TrainConfig {
        system: SystemKind::Joint,
        epochs: 200,
        batch_size: Some(6),
        seed: 3,
        lr_joint: 2e-3,
        joint: JointConfig {
            t_obs: 3,
            t_pred: 6,
            nmmp: small_nmmp(8, 1),
            enc_hidden: vec![16],
            latent_dim: 8,
            dec_hidden: vec![16],
            scene_channels: vec![2, 4],
            scene_dim: 4,
            inter_hidden: vec![16],
            raster: RasterSpec { height: 32, width: 32, resolution: 2.0, ..RasterSpec::default() },
            ..JointConfig::default()
        },
        ..TrainConfig::default()
    }
}

#[test]
fn joint_final_loss_falls_in_most_epochs() {
    let data = synthesize_joint_scenes(6, 3, 6, 0.5, 12);
    let mut curve = Vec::new();
    train_joint_with(&data, &joint_config(), None, &mut |r| curve.push(r.losses["l_final"])).unwrap();
    assert_eq!(curve.len(), 200);
    let falls = curve.windows(2).filter(|w| w[1] < w[0]).count();
    assert!(falls * 10 >= 9 * (curve.len() - 1), "{falls} of {} epochs decreased", curve.len() - 1);
    assert!(curve[199] < curve[0]);
}

#[test]
fn joint_resume_matches_uninterrupted() {
    let data = synthesize_joint_scenes(4, 3, 6, 0.5, 2);
    let cfg = TrainConfig { epochs: 2, batch_size: Some(2), ..joint_config() };
    let full = train_joint(&data, &cfg, None).unwrap();
    let half = train_joint(&data, &TrainConfig { epochs: 1, ..cfg.clone() }, None).unwrap();
    let resumed = train_joint(&data, &cfg, Some(&half)).unwrap();
    assert_eq!(resumed.to_bytes().unwrap(), full.to_bytes().unwrap());
    assert!(train_adversarial(&ped_data(), &ped_config(InteractionMode::Nmmp), Some(&full)).is_err());
}
