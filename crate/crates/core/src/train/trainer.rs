use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::adam::{AdamGroup, AdamHyper};
use super::config::{OpacityStrategy, TrainConfig};
use super::schedule::{exp_decay, gamma_schedule, stage_at, threshold_schedule, Stage};
use super::{apply_opacity_tuning, solidify_opacities};
use crate::dataset::{PosedImage, PosedImageDataset};
use crate::error::Result;
use crate::losses::{
    l1_loss_with_grad, normal_loss_with_grad, opacity_regularization, opacity_regularization_grad,
    ssim_with_grad, total_loss, LossParts,
};
use crate::metrics::psnr;
use crate::raster::{render, render_backward, OpacityMode, PixelGrads, RenderSettings};
use crate::scene::{unsquash_opacity, SceneModel, SATURATED_OPACITY};
use crate::sh::num_coeffs;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricsRow {
    pub iter: usize,
    pub loss: f64,
    pub l1: f64,
    pub ssim: f64,
    pub normal: f64,
    pub opacity: f64,
    pub psnr: f64,
    pub test_psnr: Option<f64>,
    pub primitives: usize,
    pub gamma: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub scene: SceneModel,
    pub log: Vec<MetricsRow>,
}

pub struct Trainer<'a> {
    pub scene: SceneModel,
    config: TrainConfig,
    dataset: &'a PosedImageDataset,
    step: usize,
    hyper: AdamHyper,
    adam_vertices: AdamGroup,
    adam_opacity: AdamGroup,
    adam_dc: AdamGroup,
    adam_rest: AdamGroup,
    rng: ChaCha8Rng,
    order: Vec<usize>,
    cursor: usize,
    solidified: bool,
    pub log: Vec<MetricsRow>,
}

impl<'a> Trainer<'a> {
    pub fn new(scene: SceneModel, dataset: &'a PosedImageDataset, config: &TrainConfig) -> Result<Self> {
        config.validate()?;
        dataset.validate()?;
        scene.validate()?;
        let n = scene.len();
        let rest = 3 * (num_coeffs(scene.sh_degree) - 1);
        Ok(Self {
            hyper: AdamHyper { beta1: config.adam_beta1, beta2: config.adam_beta2, eps: config.adam_eps },
            adam_vertices: AdamGroup::new(n, 9),
            adam_opacity: AdamGroup::new(n, 1),
            adam_dc: AdamGroup::new(n, 3),
            adam_rest: AdamGroup::new(n, rest),
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            order: Vec::new(),
            cursor: 0,
            solidified: false,
            log: Vec::new(),
            step: 0,
            config: config.clone(),
            dataset,
            scene,
        })
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn is_done(&self) -> bool {
        self.step >= self.config.total_iters()
    }

    /// Render settings matching the current stage.
    pub fn render_settings(&self, step: usize) -> RenderSettings {
        let opacity_mode = match (stage_at(step, &self.config), self.config.opacity_mode) {
            (Stage::Solidify, OpacityStrategy::Ste) => OpacityMode::Binarized { threshold: self.config.o_thres },
            _ => OpacityMode::Squashed,
        };
        let active_sh = (step / self.config.sh_increment_every.max(1)).min(self.config.sh_degree);
        RenderSettings {
            background: self.dataset.background,
            training: true,
            sh_degree: active_sh.min(self.scene.sh_degree),
            scale_compensation: self.config.scale_compensation,
            opacity_mode,
            ..Default::default()
        }
    }

    fn prune_state(&mut self, keep: &[bool]) {
        if keep.iter().all(|k| *k) {
            return;
        }
        self.adam_vertices.retain(keep);
        self.adam_opacity.retain(keep);
        self.adam_dc.retain(keep);
        self.adam_rest.retain(keep);
    }

    /// End-of-solidification pass: afterwards every primitive is opaque.
    fn maybe_solidify(&mut self) {
        let [n1, n2, n3] = self.config.stage_iters;
        if self.solidified || self.step < n1 + n2 || n2 + n3 == 0 {
            return;
        }
        let tuning = match self.config.opacity_mode {
            OpacityStrategy::Tuning => {
                // the last scheduled thresholds; survivors between them are saturated too
                solidify_opacities(&mut self.scene, self.config.t_low_end)
            }
            OpacityStrategy::Ste => solidify_opacities(&mut self.scene, self.config.o_thres),
        };
        self.prune_state(&tuning.keep);
        self.solidified = true;
    }

    fn next_view(&mut self) -> usize {
        if self.cursor >= self.order.len() {
            self.order = (0..self.dataset.train.len()).collect();
            self.order.shuffle(&mut self.rng);
            self.cursor = 0;
        }
        self.cursor += 1;
        self.order[self.cursor - 1]
    }

    /// Runs one optimization step. Returns the log row when one was recorded.
    pub fn step(&mut self) -> Result<Option<MetricsRow>> {
        self.maybe_solidify();
        let it = self.step;
        let cfg = &self.config;
        let stage = stage_at(it, cfg);
        let [n1, _, _] = cfg.stage_iters;
        if stage == Stage::Solidify && cfg.opacity_mode == OpacityStrategy::Tuning {
            let since = it - n1;
            if since > 0 && since.is_multiple_of(cfg.tuning_interval) {
                let (lo, hi) = threshold_schedule(it, cfg);
                let tuning = apply_opacity_tuning(&mut self.scene, lo, hi);
                self.prune_state(&tuning.keep);
            }
        }
        let gamma = gamma_schedule(it, &self.config);
        self.scene.set_gamma(gamma)?;

        let view_index = self.next_view();
        let view: &PosedImage = &self.dataset.train[view_index];
        let settings = self.render_settings(it);
        let cfg = &self.config;
        let weights = cfg.weights();
        let out = render(&self.scene, &view.camera, &settings);

        let mut parts = LossParts::default();
        let mut grads = PixelGrads::zeros(view.camera.width, view.camera.height);
        let (l1, g_l1) = l1_loss_with_grad(&out.color, &view.image)?;
        parts.l1 = l1;
        for (g, d) in grads.color.data.iter_mut().zip(&g_l1.data) {
            *g += weights.lambda_l1 * d;
        }
        if weights.lambda_ssim > 0.0 {
            let (s, g_s) = ssim_with_grad(&out.color, &view.image)?;
            parts.ssim = 1.0 - s;
            for (g, d) in grads.color.data.iter_mut().zip(&g_s.data) {
                *g -= weights.lambda_ssim * d;
            }
        }
        if weights.lambda_n > 0.0 {
            let nl = normal_loss_with_grad(&out.normal, &out.depth, &out.alpha, &view.camera)?;
            parts.normal = nl.value;
            for (g, d) in grads.normal.data.iter_mut().zip(&nl.d_normal.data) {
                *g += weights.lambda_n * d;
            }
            for (g, d) in grads.depth.data.iter_mut().zip(&nl.d_depth.data) {
                *g += weights.lambda_n * d;
            }
        }
        let use_opacity_reg = stage == Stage::Polarize && weights.lambda_o > 0.0;
        let opacities = self.scene.opacities();
        let mut lambda_o = 0.0;
        if use_opacity_reg {
            parts.opacity = opacity_regularization(&opacities);
            lambda_o = weights.lambda_o;
        }
        let loss = total_loss(&parts, &crate::losses::LossWeights { lambda_o, ..weights });

        let records = out.records.as_ref().expect("training render keeps records");
        let mut pg = render_backward(&self.scene, &view.camera, &grads, records)?;
        if use_opacity_reg {
            for ((g, d), o) in pg.d_opacity_param.iter_mut().zip(opacity_regularization_grad(&opacities)).zip(&opacities) {
                *g += lambda_o * d * o * (1.0 - o);
            }
        }

        let t = (it + 1) as u64;
        let extent = self.scene.scene_extent.max(f64::MIN_POSITIVE);
        let lr_v = exp_decay(it, cfg.total_iters(), cfg.lr_vertices * extent, cfg.lr_vertices_final * extent);
        let update_opacity = stage != Stage::FineTune;
        let saturated_param = unsquash_opacity(SATURATED_OPACITY);
        let h = self.hyper;
        for (i, prim) in self.scene.primitives.iter_mut().enumerate() {
            let mut v = [0.0; 9];
            let mut g = [0.0; 9];
            for k in 0..3 {
                v[3 * k..3 * k + 3].copy_from_slice(prim.vertices[k].as_slice());
                g[3 * k..3 * k + 3].copy_from_slice(pg.d_vertices[i][k].as_slice());
            }
            self.adam_vertices.update_row(i, &mut v, &g, lr_v, t, &h);
            for k in 0..3 {
                prim.vertices[k] = crate::Vec3::new(v[3 * k], v[3 * k + 1], v[3 * k + 2]);
            }
            if update_opacity {
                let mut o = [prim.opacity_param];
                self.adam_opacity.update_row(i, &mut o, &[pg.d_opacity_param[i]], cfg.lr_opacity, t, &h);
                prim.opacity_param = o[0];
            } else {
                prim.opacity_param = saturated_param;
            }
            let mut dc = prim.sh_coeffs[0];
            self.adam_dc.update_row(i, &mut dc, &pg.d_sh[i][0], cfg.lr_sh_dc, t, &h);
            prim.sh_coeffs[0] = dc;
            if self.adam_rest.width() > 0 && settings.sh_degree > 0 {
                let mut rest: Vec<f64> = prim.sh_coeffs[1..].iter().flatten().copied().collect();
                let grest: Vec<f64> = pg.d_sh[i][1..].iter().flatten().copied().collect();
                self.adam_rest.update_row(i, &mut rest, &grest, cfg.lr_sh_rest, t, &h);
                for (c, chunk) in prim.sh_coeffs[1..].iter_mut().zip(rest.chunks_exact(3)) {
                    c.copy_from_slice(chunk);
                }
            }
        }

        self.step += 1;
        let total = cfg.total_iters();
        let row = if self.step.is_multiple_of(cfg.log_interval) || self.step == total {
            let test_psnr = (cfg.test_interval > 0 && (self.step.is_multiple_of(cfg.test_interval) || self.step == total))
                .then(|| self.test_psnr())
                .flatten();
            let row = MetricsRow {
                iter: self.step,
                loss,
                l1: parts.l1,
                ssim: parts.ssim,
                normal: parts.normal,
                opacity: parts.opacity,
                psnr: psnr(&out.color.clamped01(), &view.image)?,
                test_psnr,
                primitives: self.scene.len(),
                gamma,
            };
            self.log.push(row.clone());
            Some(row)
        } else {
            None
        };
        if self.is_done() {
            self.maybe_solidify();
        }
        Ok(row)
    }

    /// Mean PSNR over the held-out views with the current stage's settings.
    pub fn test_psnr(&self) -> Option<f64> {
        if self.dataset.test.is_empty() {
            return None;
        }
        let mut settings = self.render_settings(self.step.saturating_sub(1));
        settings.training = false;
        Some(evaluate_psnr(&self.scene, &self.dataset.test, &settings))
    }

    pub fn run(mut self, mut on_log: impl FnMut(&MetricsRow, &SceneModel)) -> Result<TrainOutcome> {
        while !self.is_done() {
            if let Some(row) = self.step()? {
                on_log(&row, &self.scene);
            }
        }
        self.maybe_solidify();
        Ok(TrainOutcome { scene: self.scene, log: self.log })
    }
}

/// Mean PSNR of `scene` rendered at each view against its image.
pub fn evaluate_psnr(scene: &SceneModel, views: &[PosedImage], settings: &RenderSettings) -> f64 {
    if views.is_empty() {
        return f64::NAN;
    }
    let total: f64 = views
        .iter()
        .map(|v| {
            let out = render(scene, &v.camera, settings);
            psnr(&out.color.clamped01(), &v.image).unwrap_or(f64::NAN)
        })
        .sum();
    total / views.len() as f64
}

/// Trains `init` on `dataset` to completion.
pub fn train(init: SceneModel, dataset: &PosedImageDataset, config: &TrainConfig) -> Result<TrainOutcome> {
    Trainer::new(init, dataset, config)?.run(|_, _| {})
}
