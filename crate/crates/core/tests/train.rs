use proptest::prelude::*;
use trisplat_core::dataset::PosedImageDataset;
use trisplat_core::raster::RenderSettings;
use trisplat_core::scene::SATURATED_OPACITY;
use trisplat_core::synthetic::{make_synthetic_scene, perturbed_scene, SyntheticSpec};
use trisplat_core::train::{
    evaluate_psnr, exp_decay, gamma_schedule, init_from_point_cloud, stage_at, threshold_schedule, train,
    OpacityStrategy, Stage, TrainConfig, Trainer,
};
use trisplat_core::{SceneModel, Vec3};

fn small_fixture() -> (SceneModel, PosedImageDataset) {
    let spec = SyntheticSpec {
        primitives: 8,
        cameras: 8,
        width: 32,
        height: 32,
        holdout_every: 4,
        seed: 3,
        ..SyntheticSpec::default()
    };
    make_synthetic_scene(&spec).unwrap()
}

fn short_config(stage_iters: [usize; 3]) -> TrainConfig {
    TrainConfig {
        stage_iters,
        gamma_start: 5.0,
        sh_degree: 0,
        lr_vertices: 1e-3,
        lr_vertices_final: 1e-4,
        lr_sh_dc: 1e-2,
        tuning_interval: 10,
        log_interval: 10,
        test_interval: 0,
        seed: 1,
        ..TrainConfig::default()
    }
}

#[test]
fn zero_iterations_leave_the_scene_unchanged() {
    let (gt, data) = small_fixture();
    let init = perturbed_scene(&gt, 0.03, 0.5, 1.0, 2).unwrap();
    let out = train(init.clone(), &data, &short_config([0, 0, 0])).unwrap();
    assert_eq!(out.scene, init);
    assert!(out.log.is_empty());
}

#[test]
fn every_primitive_is_opaque_after_solidification() {
    let (gt, data) = small_fixture();
    let init = perturbed_scene(&gt, 0.02, 0.6, 5.0, 4).unwrap();
    for mode in [OpacityStrategy::Tuning, OpacityStrategy::Ste] {
        let cfg = TrainConfig { opacity_mode: mode, ..short_config([20, 30, 10]) };
        let mut trainer = Trainer::new(init.clone(), &data, &cfg).unwrap();
        while trainer.step_index() < 51 {
            trainer.step().unwrap();
        }
        assert!(!trainer.scene.is_empty());
        for o in trainer.scene.opacities() {
            assert!(o >= SATURATED_OPACITY - 1e-12, "{mode:?}: {o}");
        }
        let out = trainer.run(|_, _| {}).unwrap();
        assert!(out.scene.opacities().iter().all(|o| *o >= SATURATED_OPACITY - 1e-12));
        assert_eq!(out.scene.gamma(), cfg.gamma_end);
    }
}

#[test]
fn short_run_improves_held_out_psnr() {
    let (gt, data) = small_fixture();
    let init = perturbed_scene(&gt, 0.02, 0.9, 5.0, 6).unwrap();
    let cfg = short_config([60, 60, 60]);
    let before = evaluate_psnr(&init, &data.test, &RenderSettings { background: data.background, ..Default::default() });
    let out = train(init, &data, &cfg).unwrap();
    let after = evaluate_psnr(&out.scene, &data.test, &RenderSettings { background: data.background, ..Default::default() });
    assert!(after > before + 1.0, "{before} -> {after}");
    assert_eq!(out.log.last().unwrap().iter, 180);
}

#[test]
fn training_is_reproducible() {
    let (gt, data) = small_fixture();
    let init = perturbed_scene(&gt, 0.02, 0.9, 5.0, 6).unwrap();
    let cfg = short_config([10, 10, 10]);
    let a = train(init.clone(), &data, &cfg).unwrap();
    let b = train(init, &data, &cfg).unwrap();
    assert_eq!(a.scene, b.scene);
    assert_eq!(a.log, b.log);
}

#[test]
fn synthetic_dataset_is_rendered_from_its_scene() {
    let (gt, data) = small_fixture();
    let (gt2, data2) = small_fixture();
    assert_eq!(gt, gt2);
    assert_eq!(data, data2);
    assert_eq!(data.test.len(), 2);
    let settings = RenderSettings { background: data.background, ..Default::default() };
    assert!(evaluate_psnr(&gt, &data.train, &settings) >= 99.0);
}

#[test]
fn init_triangles_are_equilateral_and_centered() {
    let pts: Vec<Vec3> =
        (0..40).map(|i| Vec3::new((i as f64 * 0.37).sin(), (i as f64 * 1.3).cos(), i as f64 * 0.05)).collect();
    let colors = vec![[0.2, 0.4, 0.6]; pts.len()];
    let scene = init_from_point_cloud(&pts, &colors, 0.1, 1.0, 2, 5).unwrap();
    assert_eq!(scene.len(), pts.len());
    for (p, prim) in pts.iter().zip(&scene.primitives) {
        assert!((prim.barycenter() - p).norm() < 1e-12);
        let [a, b, c] = prim.vertices;
        let (ab, bc, ca) = ((b - a).norm(), (c - b).norm(), (a - c).norm());
        assert!((ab - bc).abs() < 1e-9 * ab && (bc - ca).abs() < 1e-9 * ab);
        assert!((prim.opacity() - 0.1).abs() < 1e-12);
        assert!(prim.base_color().iter().zip([0.2, 0.4, 0.6]).all(|(x, y)| (x - y).abs() < 1e-12));
    }
}

proptest! {
    #[test]
    fn schedules_are_monotone(n1 in 0usize..50, n2 in 1usize..50, n3 in 0usize..50, step in 0usize..200) {
        let cfg = TrainConfig { stage_iters: [n1, n2, n3], t_low_end: 0.3, t_high_end: 0.6, ..TrainConfig::default() };
        let (g0, g1) = (gamma_schedule(step, &cfg), gamma_schedule(step + 1, &cfg));
        prop_assert!(g1 >= g0 && g0 >= cfg.gamma_start && g0 <= cfg.gamma_end);
        let ((lo0, hi0), (lo1, hi1)) = (threshold_schedule(step, &cfg), threshold_schedule(step + 1, &cfg));
        prop_assert!(lo1 >= lo0 && hi1 <= hi0);
        prop_assert!(lo0 <= hi0);
        let stage = stage_at(step, &cfg);
        prop_assert_eq!(stage == Stage::Polarize, step < n1);
        prop_assert_eq!(stage == Stage::FineTune, step >= n1 + n2);
        if step >= n1 + n2 {
            prop_assert_eq!(gamma_schedule(step, &cfg), cfg.gamma_end);
        }
    }

    #[test]
    fn learning_rate_decays_between_endpoints(step in 0usize..1000, total in 1usize..1000) {
        let lr = exp_decay(step, total, 1e-3, 1e-5);
        prop_assert!((1e-5 * (1.0 - 1e-12)..=1e-3 * (1.0 + 1e-12)).contains(&lr));
        prop_assert!(exp_decay(step + 1, total, 1e-3, 1e-5) <= lr);
    }
}
