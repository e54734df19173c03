use std::path::Path;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use trisplat_core::dataset::PosedImageDataset;
use trisplat_core::gradcheck::run_gradcheck;
use trisplat_core::losses::ssim;
use trisplat_core::mesh::MeshAsset;
use trisplat_core::metrics::{chamfer_distance, psnr, ChamferReport};
use trisplat_core::raster::RenderSettings;
use trisplat_core::synthetic::{fixture_train_config, make_synthetic_scene, SyntheticSpec};
use trisplat_core::train::{init_from_point_cloud, Trainer};
use trisplat_core::{render, Camera, SceneModel, Vec3};
use trisplat_io::config::{default_config_toml, load_run_config, render_config_toml, RunSettings};
use trisplat_io::glb::{export_glb, import_mesh};
use trisplat_io::metrics_log::write_metrics_csv;
use trisplat_io::nerf::{load_nerf_synthetic, save_nerf_synthetic, LoadOptions};
use trisplat_io::png::save_png;
use trisplat_io::point_cloud::{load_point_cloud_ply, save_point_cloud_ply, PointCloud};
use trisplat_io::snapshot::{load_snapshot, save_snapshot};

use crate::{Cli, Command};

pub fn dispatch(cli: &Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::Train { config, print_defaults } => {
            if *print_defaults {
                print!("{}", default_config_toml());
                return Ok(ExitCode::SUCCESS);
            }
            let Some(config) = config else { bail!("train needs a config file (or --print-defaults)") };
            train(config, cli.seed)
        }
        Command::Render { snapshot, camera, output, all_buffers } => render_cmd(snapshot, camera, output, *all_buffers),
        Command::ExportMesh { snapshot, output } => {
            let scene = load_snapshot(snapshot)?;
            let mesh = export_glb(&scene, output)?;
            println!("wrote {} faces to {}", mesh.len(), output.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Eval { snapshot, dataset, mesh, samples, background, downscale } => {
            eval(snapshot, dataset, mesh.as_deref(), *samples, background, *downscale, cli.seed.unwrap_or(0))
        }
        Command::Gradcheck { count } => gradcheck(cli.seed.unwrap_or(0), *count),
        Command::MakeSynthetic { spec, output } => make_synthetic(spec.as_deref(), output, cli.seed),
    }
}

/// Random colored points in a cube sized from the camera rig.
fn random_point_cloud(dataset: &PosedImageDataset, count: usize, seed: u64) -> PointCloud {
    let centers: Vec<Vec3> = dataset.train.iter().map(|v| v.camera.center()).collect();
    let mean = centers.iter().sum::<Vec3>() / centers.len() as f64;
    let radius = centers.iter().map(|c| (c - mean).norm()).sum::<f64>() / centers.len() as f64;
    let half = (radius / 3.0).max(1e-3);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..count)
        .map(|_| mean + Vec3::new(rng.random_range(-half..half), rng.random_range(-half..half), rng.random_range(-half..half)))
        .collect();
    let colors = (0..count).map(|_| [rng.random(), rng.random(), rng.random()]).collect();
    PointCloud { points, colors }
}

fn train(config_path: &Path, seed: Option<u64>) -> Result<ExitCode> {
    let mut cfg = load_run_config(config_path)?;
    if let Some(s) = seed {
        cfg.train.seed = s;
    }
    let run = &cfg.run;
    let opts = LoadOptions { background: run.background, downscale: run.downscale, linearize: run.linearize };
    let dataset = load_nerf_synthetic(&run.dataset, &opts)?;
    let cloud = match &run.point_cloud {
        Some(p) => load_point_cloud_ply(p)?,
        None => random_point_cloud(&dataset, run.random_points, cfg.train.seed),
    };
    let t = &cfg.train;
    let init = init_from_point_cloud(&cloud.points, &cloud.colors, t.init_opacity, t.init_scale, t.sh_degree, t.seed)?;
    println!(
        "training {} primitives on {} views ({} held out), {} iterations",
        init.len(),
        dataset.train.len(),
        dataset.test.len(),
        t.total_iters()
    );

    std::fs::create_dir_all(&run.output).with_context(|| format!("creating {}", run.output.display()))?;
    let mut trainer = Trainer::new(init, &dataset, &cfg.train)?;
    while !trainer.is_done() {
        if let Some(row) = trainer.step()? {
            println!(
                "iter {:>6}  loss {:.5}  psnr {:6.2}  prims {:>7}  gamma {:6.2}{}",
                row.iter,
                row.loss,
                row.psnr,
                row.primitives,
                row.gamma,
                row.test_psnr.map(|p| format!("  test {p:.2}")).unwrap_or_default()
            );
        }
        let step = trainer.step_index();
        if run.snapshot_interval > 0 && step % run.snapshot_interval == 0 {
            save_snapshot(&trainer.scene, &run.output.join(format!("scene_{step:06}.snap")))?;
        }
    }
    let test_psnr = trainer.test_psnr();
    let outcome = trainer.run(|_, _| {})?;
    save_snapshot(&outcome.scene, &run.output.join("scene.snap"))?;
    write_metrics_csv(&outcome.log, &run.output.join("metrics.csv"))?;
    if let Some(p) = test_psnr {
        println!("held-out PSNR {p:.2} dB");
    }
    println!("{} primitives written to {}", outcome.scene.len(), run.output.join("scene.snap").display());
    Ok(ExitCode::SUCCESS)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CameraSpec {
    width: usize,
    height: usize,
    fov_x_deg: f64,
    eye: [f64; 3],
    target: [f64; 3],
    #[serde(default = "default_up")]
    up: [f64; 3],
    #[serde(default)]
    background: [f64; 3],
}

fn default_up() -> [f64; 3] {
    [0.0, 1.0, 0.0]
}

fn read_structured<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    } else {
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

fn render_cmd(snapshot: &Path, camera: &Path, output: &Path, all_buffers: bool) -> Result<ExitCode> {
    let scene = load_snapshot(snapshot)?;
    let spec: CameraSpec = read_structured(camera)?;
    let cam = Camera::look_at(
        Vec3::from(spec.eye),
        Vec3::from(spec.target),
        Vec3::from(spec.up),
        spec.width,
        spec.height,
        spec.fov_x_deg.to_radians(),
    )?;
    let settings = RenderSettings { background: spec.background, sh_degree: scene.sh_degree, ..Default::default() };
    let out = render(&scene, &cam, &settings);
    save_png(&out.color, output)?;
    if all_buffers {
        let stem = output.with_extension("");
        let max_depth = out.depth.data.iter().copied().fold(0.0, f64::max).max(1e-12);
        save_png(&out.depth.map(|d| d / max_depth), &stem.with_extension("depth.png"))?;
        save_png(&out.normal.map(|n| 0.5 * (n + 1.0)), &stem.with_extension("normal.png"))?;
        save_png(&out.alpha, &stem.with_extension("alpha.png"))?;
    }
    println!("rendered {}x{} to {}", spec.width, spec.height, output.display());
    Ok(ExitCode::SUCCESS)
}

#[derive(Debug, Serialize)]
struct EvalReport {
    views: usize,
    psnr: f64,
    ssim: f64,
    primitives: usize,
    chamfer: Option<ChamferReport>,
}

fn eval(
    snapshot: &Path,
    dataset_dir: &Path,
    mesh: Option<&Path>,
    samples: usize,
    background: &[f64],
    downscale: usize,
    seed: u64,
) -> Result<ExitCode> {
    let &[r, g, b] = background else { bail!("--background takes three comma-separated values") };
    let background = [r, g, b];
    let scene = load_snapshot(snapshot)?;
    let dataset = load_nerf_synthetic(dataset_dir, &LoadOptions { background, downscale, linearize: false })?;
    let views = if dataset.test.is_empty() { &dataset.train } else { &dataset.test };
    let settings = RenderSettings { background, sh_degree: scene.sh_degree, ..Default::default() };
    let (mut p_sum, mut s_sum) = (0.0, 0.0);
    for view in views {
        let color = render(&scene, &view.camera, &settings).color.clamped01();
        p_sum += psnr(&color, &view.image)?;
        s_sum += ssim(&color, &view.image)?;
    }
    let chamfer = match mesh {
        Some(path) => Some(chamfer_distance(&MeshAsset::from_scene(&scene), &import_mesh(path)?, samples, seed)?),
        None => None,
    };
    let report = EvalReport {
        views: views.len(),
        psnr: p_sum / views.len() as f64,
        ssim: s_sum / views.len() as f64,
        primitives: scene.len(),
        chamfer,
    };
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(ExitCode::SUCCESS)
}

fn gradcheck(first_seed: u64, count: u64) -> Result<ExitCode> {
    let mut worst: f64 = 0.0;
    let mut all_passed = true;
    for seed in first_seed..first_seed + count.max(1) {
        let report = run_gradcheck(seed)?;
        worst = worst.max(report.max_rel_error());
        all_passed &= report.passed();
        let detail: Vec<String> = report
            .checks
            .iter()
            .map(|c| format!("{} {:.2e} ({} failing, {} unresolved)", c.loss, c.max_rel_error, c.failures, c.unresolved))
            .collect();
        println!(
            "seed {seed}: gamma {} sh {} prims {}  {}  {}",
            report.gamma,
            report.sh_degree,
            report.primitives,
            detail.join(", "),
            if report.passed() { "ok" } else { "FAIL" }
        );
    }
    println!("max relative error: {worst:.3e}");
    Ok(if all_passed { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn make_synthetic(spec_path: Option<&Path>, output: &Path, seed: Option<u64>) -> Result<ExitCode> {
    let mut spec: SyntheticSpec = match spec_path {
        Some(p) => read_structured(p)?,
        None => SyntheticSpec::default(),
    };
    if let Some(s) = seed {
        spec.seed = s;
    }
    let (scene, dataset) = make_synthetic_scene(&spec)?;
    std::fs::create_dir_all(output).with_context(|| format!("creating {}", output.display()))?;
    save_nerf_synthetic(&dataset, output)?;
    save_snapshot(&scene, &output.join("ground_truth.snap"))?;
    export_glb(&scene, &output.join("ground_truth.glb"))?;
    save_point_cloud_ply(&noisy_barycenters(&scene, spec.seed), &output.join("points.ply"))?;

    let run = RunSettings {
        dataset: ".".into(),
        output: "output".into(),
        point_cloud: Some("points.ply".into()),
        background: spec.background,
        ..Default::default()
    };
    let train = fixture_train_config(spec.seed);
    std::fs::write(output.join("train.toml"), render_config_toml(&run, &train))
        .with_context(|| format!("writing {}", output.join("train.toml").display()))?;
    println!(
        "{} primitives, {} train / {} test views written to {}",
        scene.len(),
        dataset.train.len(),
        dataset.test.len(),
        output.display()
    );
    Ok(ExitCode::SUCCESS)
}

/// Barycenters of the ground truth, displaced a little, with face colors.
fn noisy_barycenters(scene: &SceneModel, seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let noise = 0.02 * scene.scene_extent;
    let points = scene
        .primitives
        .iter()
        .map(|p| p.barycenter() + Vec3::new(rng.random_range(-noise..noise), rng.random_range(-noise..noise), rng.random_range(-noise..noise)))
        .collect();
    let colors = scene.primitives.iter().map(|p| p.base_color().map(|c| c.clamp(0.0, 1.0))).collect();
    PointCloud { points, colors }
}

