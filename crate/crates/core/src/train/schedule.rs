//! Stage boundaries and the compactness / threshold schedules.

use super::config::TrainConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Polarize,
    Solidify,
    FineTune,
}

pub fn stage_at(step: usize, config: &TrainConfig) -> Stage {
    let [n1, n2, _] = config.stage_iters;
    if step < n1 {
        Stage::Polarize
    } else if step < n1 + n2 {
        Stage::Solidify
    } else {
        Stage::FineTune
    }
}

/// Progress through the solidification stage, in `[0, 1]`.
pub fn solidify_progress(step: usize, config: &TrainConfig) -> f64 {
    let [n1, n2, _] = config.stage_iters;
    if step < n1 {
        0.0
    } else if n2 == 0 || step >= n1 + n2 {
        1.0
    } else {
        (step - n1) as f64 / n2 as f64
    }
}

/// Geometric interpolation `exp((1 − s) ln γ0 + s ln γ1)`.
pub fn gamma_at_progress(s: f64, gamma_start: f64, gamma_end: f64) -> f64 {
    if s <= 0.0 {
        return gamma_start;
    }
    if s >= 1.0 {
        return gamma_end;
    }
    ((1.0 - s) * gamma_start.ln() + s * gamma_end.ln()).exp()
}

pub fn gamma_schedule(step: usize, config: &TrainConfig) -> f64 {
    gamma_at_progress(solidify_progress(step, config), config.gamma_start, config.gamma_end)
}

/// `(T_low, T_high)` at progress `s`, moving from `(0, 1)` to the configured end values.
pub fn threshold_at_progress(s: f64, k: f64, t_low_end: f64, t_high_end: f64) -> (f64, f64) {
    let s = s.clamp(0.0, 1.0);
    let f = ((k * s).exp() - 1.0) / (k.exp() - 1.0);
    let f = if s >= 1.0 { 1.0 } else { f };
    (t_low_end * f, 1.0 - (1.0 - t_high_end) * f)
}

pub fn threshold_schedule(step: usize, config: &TrainConfig) -> (f64, f64) {
    threshold_at_progress(
        solidify_progress(step, config),
        config.schedule_sharpness,
        config.t_low_end,
        config.t_high_end,
    )
}

/// Exponential decay from `start` at step 0 to `end` at `total`.
pub fn exp_decay(step: usize, total: usize, start: f64, end: f64) -> f64 {
    if total == 0 || start <= 0.0 || end <= 0.0 {
        return start;
    }
    let t = (step as f64 / total as f64).clamp(0.0, 1.0);
    ((1.0 - t) * start.ln() + t * end.ln()).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_examples() {
        assert_eq!(gamma_at_progress(0.0, 1.0, 50.0), 1.0);
        assert_eq!(gamma_at_progress(1.0, 1.0, 50.0), 50.0);
        assert!((gamma_at_progress(0.5, 1.0, 50.0) - 50f64.sqrt()).abs() < 1e-12);
        assert!((gamma_at_progress(0.5, 1.0, 50.0) - 7.0711).abs() < 1e-4);
    }

    #[test]
    fn gamma_is_monotone_over_steps() {
        let cfg = TrainConfig { stage_iters: [10, 40, 10], ..Default::default() };
        let mut prev = 0.0;
        for step in 0..60 {
            let g = gamma_schedule(step, &cfg);
            assert!(g >= prev);
            prev = g;
        }
        assert_eq!(gamma_schedule(0, &cfg), 1.0);
        assert_eq!(gamma_schedule(55, &cfg), 50.0);
    }

    #[test]
    fn threshold_examples() {
        assert_eq!(threshold_at_progress(0.0, 3.0, 0.5, 0.5), (0.0, 1.0));
        assert_eq!(threshold_at_progress(1.0, 3.0, 0.5, 0.5), (0.5, 0.5));
        let mut prev = -1.0;
        for i in 0..=100 {
            let (lo, hi) = threshold_at_progress(i as f64 / 100.0, 3.0, 0.5, 0.5);
            assert!((lo + hi - 1.0).abs() < 1e-15);
            assert!(lo > prev);
            prev = lo;
        }
    }

    #[test]
    fn decay_endpoints() {
        assert!((exp_decay(0, 100, 1e-2, 1e-4) - 1e-2).abs() < 1e-15);
        assert!((exp_decay(100, 100, 1e-2, 1e-4) - 1e-4).abs() < 1e-18);
        assert!((exp_decay(50, 100, 1e-2, 1e-4) - 1e-3).abs() < 1e-15);
    }
}
