//! Adam with first/second moments stored per parameter row.

#[derive(Clone, Debug, PartialEq)]
pub struct AdamGroup {
    width: usize,
    m: Vec<f64>,
    v: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamHyper {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamGroup {
    pub fn new(rows: usize, width: usize) -> Self {
        Self { width, m: vec![0.0; rows * width], v: vec![0.0; rows * width] }
    }

    pub fn rows(&self) -> usize {
        if self.width == 0 {
            0
        } else {
            self.m.len() / self.width
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Updates one row in place. `step` is the 1-based global step used for
    /// bias correction.
    #[inline]
    pub fn update_row(&mut self, row: usize, params: &mut [f64], grads: &[f64], lr: f64, step: u64, h: &AdamHyper) {
        debug_assert_eq!(params.len(), self.width);
        let bc1 = 1.0 - h.beta1.powi(step as i32);
        let bc2 = 1.0 - h.beta2.powi(step as i32);
        let base = row * self.width;
        for k in 0..self.width {
            let g = grads[k];
            let m = &mut self.m[base + k];
            let v = &mut self.v[base + k];
            *m = h.beta1 * *m + (1.0 - h.beta1) * g;
            *v = h.beta2 * *v + (1.0 - h.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            params[k] -= lr * m_hat / (v_hat.sqrt() + h.eps);
        }
    }

    /// Drops the rows whose `keep` flag is false.
    pub fn retain(&mut self, keep: &[bool]) {
        let w = self.width;
        let mut dst = 0;
        for (row, &k) in keep.iter().enumerate() {
            if k {
                if dst != row {
                    self.m.copy_within(row * w..(row + 1) * w, dst * w);
                    self.v.copy_within(row * w..(row + 1) * w, dst * w);
                }
                dst += 1;
            }
        }
        self.m.truncate(dst * w);
        self.v.truncate(dst * w);
    }

    pub fn reset_row(&mut self, row: usize) {
        let w = self.width;
        self.m[row * w..(row + 1) * w].fill(0.0);
        self.v[row * w..(row + 1) * w].fill(0.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const H: AdamHyper = AdamHyper { beta1: 0.9, beta2: 0.999, eps: 1e-15 };

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut g = AdamGroup::new(2, 3);
        let mut p = [1.0, -2.0, 3.0];
        g.update_row(1, &mut p, &[0.0; 3], 0.1, 1, &H);
        assert_eq!(p, [1.0, -2.0, 3.0]);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut g = AdamGroup::new(1, 2);
        let mut p = [0.0, 0.0];
        g.update_row(0, &mut p, &[0.3, -5.0], 0.01, 1, &H);
        assert!((p[0] + 0.01).abs() < 1e-12 && (p[1] - 0.01).abs() < 1e-12);
    }

    #[test]
    fn retain_keeps_row_state() {
        let mut g = AdamGroup::new(3, 1);
        for row in 0..3 {
            let mut p = [0.0];
            g.update_row(row, &mut p, &[row as f64 + 1.0], 0.1, 1, &H);
        }
        let before = g.m[2];
        g.retain(&[false, true, true]);
        assert_eq!(g.rows(), 2);
        assert_eq!(g.m[1], before);
    }
}
