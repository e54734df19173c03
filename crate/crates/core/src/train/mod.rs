//! Optimization loop: Adam, the three-stage compactness schedule, pruning
//! and point-cloud initialization.

mod adam;
mod config;
mod init;
mod schedule;
mod trainer;

pub use adam::{AdamGroup, AdamHyper};
pub use config::{OpacityStrategy, TrainConfig};
pub use init::init_from_point_cloud;
pub use schedule::{
    exp_decay, gamma_at_progress, gamma_schedule, solidify_progress, stage_at, threshold_at_progress,
    threshold_schedule, Stage,
};
pub use trainer::{evaluate_psnr, train, MetricsRow, TrainOutcome, Trainer};

use crate::scene::{unsquash_opacity, SceneModel, SATURATED_OPACITY};

/// Outcome of one pruning/saturation pass: which primitives survived.
#[derive(Clone, Debug, PartialEq)]
pub struct OpacityTuning {
    pub keep: Vec<bool>,
    pub removed: usize,
    pub saturated: usize,
}

/// Removes primitives with `O < t_low` and saturates those with `O > t_high`.
pub fn apply_opacity_tuning(scene: &mut SceneModel, t_low: f64, t_high: f64) -> OpacityTuning {
    tune(scene, |o| o < t_low, |o| o > t_high)
}

/// Removes primitives with `O < threshold` and saturates every survivor.
pub fn solidify_opacities(scene: &mut SceneModel, threshold: f64) -> OpacityTuning {
    tune(scene, |o| o < threshold, |_| true)
}

fn tune(scene: &mut SceneModel, remove: impl Fn(f64) -> bool, saturate: impl Fn(f64) -> bool) -> OpacityTuning {
    let saturated_param = unsquash_opacity(SATURATED_OPACITY);
    let keep: Vec<bool> = scene.primitives.iter().map(|p| !remove(p.opacity())).collect();
    let mut saturated = 0;
    let mut k = keep.iter();
    scene.primitives.retain(|_| *k.next().unwrap());
    for p in &mut scene.primitives {
        if saturate(p.opacity()) && p.opacity_param < saturated_param {
            p.opacity_param = saturated_param;
            saturated += 1;
        }
    }
    let removed = keep.iter().filter(|k| !**k).count();
    OpacityTuning { keep, removed, saturated }
}

/// Closed-form integral of the fragment opacity over the plane for a
/// triangle of area `area`: `S · O · 2^{1/γ} Γ(1/γ) / γ`.
pub fn opacity_integral(area: f64, opacity: f64, gamma: f64) -> f64 {
    let inv = 1.0 / gamma;
    area * opacity * (inv * std::f64::consts::LN_2 + statrs::function::gamma::ln_gamma(inv)).exp() / gamma
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::TrianglePrimitive;
    use crate::Vec3;

    fn scene_with(opacities: &[f64]) -> SceneModel {
        let prims = opacities
            .iter()
            .map(|&o| TrianglePrimitive::new([Vec3::zeros(), Vec3::x(), Vec3::y()], o, [0.5; 3], 0))
            .collect();
        SceneModel::new(prims, 1.0, 0, 1.0).unwrap()
    }

    #[test]
    fn tuning_examples() {
        let mut s = scene_with(&[0.1, 0.4, 0.6, 0.95]);
        let r = apply_opacity_tuning(&mut s, 0.3, 0.8);
        assert_eq!(r.keep, vec![false, true, true, true]);
        let o = s.opacities();
        assert!((o[0] - 0.4).abs() < 1e-12 && (o[1] - 0.6).abs() < 1e-12);
        assert!((o[2] - SATURATED_OPACITY).abs() < 1e-12);

        let mut s = scene_with(&[0.1, 0.4, 0.6, 0.95]);
        let before = s.clone();
        apply_opacity_tuning(&mut s, 0.0, 1.0);
        assert_eq!(s, before);

        let mut s = scene_with(&[0.1, 0.4, 0.6, 0.95]);
        apply_opacity_tuning(&mut s, 0.5, 0.5);
        assert_eq!(s.len(), 2);
        assert!(s.opacities().iter().all(|o| (o - SATURATED_OPACITY).abs() < 1e-12));
    }

    #[test]
    fn integral_examples() {
        assert!((opacity_integral(1.0, 1.0, 1.0) - 2.0).abs() < 1e-12);
        let want = 2f64.sqrt() * libm::tgamma(0.5) / 2.0;
        assert!((opacity_integral(1.0, 1.0, 2.0) - want).abs() < 1e-12);
        assert!((opacity_integral(1.0, 1.0, 2.0) - 1.2533).abs() < 1e-4);
    }
}
