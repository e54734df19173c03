use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::LossWeights;
use crate::sh::MAX_SH_DEGREE;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OpacityStrategy {
    /// Periodic pruning below `T_low` and saturation above `T_high`.
    Tuning,
    /// Straight-through binarization of the opacity at `o_thres`.
    Ste,
}

/// Training hyperparameters. Every field has a default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Iterations in the polarization, solidification and fine-tune stages.
    pub stage_iters: [usize; 3],
    pub gamma_start: f64,
    pub gamma_end: f64,
    pub opacity_mode: OpacityStrategy,
    pub t_low_end: f64,
    pub t_high_end: f64,
    pub o_thres: f64,
    pub schedule_sharpness: f64,
    pub tuning_interval: usize,

    /// Vertex learning rates, multiplied by the scene extent.
    pub lr_vertices: f64,
    pub lr_vertices_final: f64,
    pub lr_opacity: f64,
    pub lr_sh_dc: f64,
    pub lr_sh_rest: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,

    pub lambda_l1: f64,
    pub lambda_ssim: f64,
    pub lambda_n: f64,
    pub lambda_o: f64,

    pub sh_degree: usize,
    /// One more SH band is enabled every this many iterations.
    pub sh_increment_every: usize,
    pub scale_compensation: bool,
    pub init_opacity: f64,
    pub init_scale: f64,
    pub seed: u64,
    pub log_interval: usize,
    /// Held-out PSNR is evaluated this often (0 disables).
    pub test_interval: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let w = LossWeights::default();
        Self {
            stage_iters: [10_000, 10_000, 10_000],
            gamma_start: 1.0,
            gamma_end: 50.0,
            opacity_mode: OpacityStrategy::Tuning,
            t_low_end: 0.5,
            t_high_end: 0.5,
            o_thres: 0.5,
            schedule_sharpness: 3.0,
            tuning_interval: 500,
            lr_vertices: 1.6e-4,
            lr_vertices_final: 1.6e-6,
            lr_opacity: 0.05,
            lr_sh_dc: 2.5e-3,
            lr_sh_rest: 1.25e-4,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-15,
            lambda_l1: w.lambda_l1,
            lambda_ssim: w.lambda_ssim,
            lambda_n: w.lambda_n,
            lambda_o: w.lambda_o,
            sh_degree: 3,
            sh_increment_every: 1000,
            scale_compensation: true,
            init_opacity: 0.1,
            init_scale: 1.0,
            seed: 0,
            log_interval: 100,
            test_interval: 0,
        }
    }
}

impl TrainConfig {
    pub fn total_iters(&self) -> usize {
        self.stage_iters.iter().sum()
    }

    pub fn weights(&self) -> LossWeights {
        LossWeights {
            lambda_l1: self.lambda_l1,
            lambda_ssim: self.lambda_ssim,
            lambda_n: self.lambda_n,
            lambda_o: self.lambda_o,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.gamma_start >= 1.0 && self.gamma_end >= self.gamma_start && self.gamma_end.is_finite()) {
            return bad(format!("need 1 <= gamma_start <= gamma_end, got {} and {}", self.gamma_start, self.gamma_end));
        }
        for (name, t) in [("t_low_end", self.t_low_end), ("t_high_end", self.t_high_end), ("o_thres", self.o_thres)] {
            if !(t > 0.0 && t < 1.0) {
                return bad(format!("{name} must lie in (0, 1), got {t}"));
            }
        }
        if self.t_low_end > self.t_high_end {
            return bad("t_low_end must not exceed t_high_end".into());
        }
        if !(self.schedule_sharpness > 0.0) {
            return bad("schedule_sharpness must be positive".into());
        }
        if self.sh_degree > MAX_SH_DEGREE {
            return bad(format!("sh_degree must be at most {MAX_SH_DEGREE}"));
        }
        if !(self.init_opacity > 0.0 && self.init_opacity < 1.0) || !(self.init_scale > 0.0) {
            return bad("init_opacity must lie in (0, 1) and init_scale must be positive".into());
        }
        let lrs = [self.lr_vertices, self.lr_vertices_final, self.lr_opacity, self.lr_sh_dc, self.lr_sh_rest];
        if lrs.iter().any(|lr| !(*lr >= 0.0 && lr.is_finite())) || !(self.lr_vertices_final > 0.0 || self.lr_vertices == 0.0) {
            return bad("learning rates must be finite and >= 0".into());
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) || !(self.adam_eps > 0.0) {
            return bad("adam betas must lie in [0, 1) and eps must be positive".into());
        }
        if self.tuning_interval == 0 || self.log_interval == 0 {
            return bad("tuning_interval and log_interval must be positive".into());
        }
        self.weights().validate()
    }
}
