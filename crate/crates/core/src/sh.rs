//! Real spherical harmonics up to degree 3 and the view-dependent color map.
//!
//! Colors follow the splatting convention `max(0, Σ Y_b(dir)·k_b + 0.5)`.
//! The basis is written once over a small scalar trait so the same code
//! yields values (`f64`) and direction gradients ([`Dual3`]).

use std::ops::{Add, Mul, Neg, Sub};

use crate::Vec3;

pub const SH_C0: f64 = 0.282_094_791_773_878_14;
pub const SH_C1: f64 = 0.488_602_511_902_919_9;
pub const SH_C2: [f64; 5] = [
    1.092_548_430_592_079_2,
    -1.092_548_430_592_079_2,
    0.315_391_565_252_520_05,
    -1.092_548_430_592_079_2,
    0.546_274_215_296_039_6,
];
pub const SH_C3: [f64; 7] = [
    -0.590_043_589_926_643_5,
    2.890_611_442_640_554,
    -0.457_045_799_464_465_8,
    0.373_176_332_590_115_4,
    -0.457_045_799_464_465_8,
    1.445_305_721_320_277,
    -0.590_043_589_926_643_5,
];

pub const MAX_SH_DEGREE: usize = 3;

/// Number of basis functions for a degree, `(D + 1)²`.
#[inline]
pub const fn num_coeffs(degree: usize) -> usize {
    (degree + 1) * (degree + 1)
}

pub trait ShScalar:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self>
{
    fn scale(self, k: f64) -> Self;
    fn constant(k: f64) -> Self;
}

impl ShScalar for f64 {
    #[inline]
    fn scale(self, k: f64) -> Self {
        self * k
    }
    #[inline]
    fn constant(k: f64) -> Self {
        k
    }
}

/// Value plus gradient with respect to a 3-vector.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual3 {
    pub v: f64,
    pub d: [f64; 3],
}

impl Dual3 {
    pub fn variable(v: f64, axis: usize) -> Self {
        let mut d = [0.0; 3];
        d[axis] = 1.0;
        Self { v, d }
    }
}

impl Add for Dual3 {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self { v: self.v + o.v, d: [self.d[0] + o.d[0], self.d[1] + o.d[1], self.d[2] + o.d[2]] }
    }
}

impl Sub for Dual3 {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self { v: self.v - o.v, d: [self.d[0] - o.d[0], self.d[1] - o.d[1], self.d[2] - o.d[2]] }
    }
}

impl Mul for Dual3 {
    type Output = Self;
    #[inline]
    fn mul(self, o: Self) -> Self {
        let mut d = [0.0; 3];
        for (k, dk) in d.iter_mut().enumerate() {
            *dk = self.d[k] * o.v + self.v * o.d[k];
        }
        Self { v: self.v * o.v, d }
    }
}

impl Neg for Dual3 {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self { v: -self.v, d: [-self.d[0], -self.d[1], -self.d[2]] }
    }
}

impl ShScalar for Dual3 {
    #[inline]
    fn scale(self, k: f64) -> Self {
        Self { v: self.v * k, d: [self.d[0] * k, self.d[1] * k, self.d[2] * k] }
    }
    #[inline]
    fn constant(k: f64) -> Self {
        Self { v: k, d: [0.0; 3] }
    }
}

/// Fills `out[..num_coeffs(degree)]` with the basis evaluated at a unit direction.
pub fn sh_basis<T: ShScalar>(x: T, y: T, z: T, degree: usize, out: &mut [T; 16]) {
    out[0] = T::constant(SH_C0);
    if degree == 0 {
        return;
    }
    out[1] = (-y).scale(SH_C1);
    out[2] = z.scale(SH_C1);
    out[3] = (-x).scale(SH_C1);
    if degree == 1 {
        return;
    }
    let (xx, yy, zz) = (x * x, y * y, z * z);
    let (xy, yz, xz) = (x * y, y * z, x * z);
    out[4] = xy.scale(SH_C2[0]);
    out[5] = yz.scale(SH_C2[1]);
    out[6] = (zz.scale(2.0) - xx - yy).scale(SH_C2[2]);
    out[7] = xz.scale(SH_C2[3]);
    out[8] = (xx - yy).scale(SH_C2[4]);
    if degree == 2 {
        return;
    }
    out[9] = (y * (xx.scale(3.0) - yy)).scale(SH_C3[0]);
    out[10] = (xy * z).scale(SH_C3[1]);
    out[11] = (y * (zz.scale(4.0) - xx - yy)).scale(SH_C3[2]);
    out[12] = (z * (zz.scale(2.0) - xx.scale(3.0) - yy.scale(3.0))).scale(SH_C3[3]);
    out[13] = (x * (zz.scale(4.0) - xx - yy)).scale(SH_C3[4]);
    out[14] = (z * (xx - yy)).scale(SH_C3[5]);
    out[15] = (x * (xx - yy.scale(3.0))).scale(SH_C3[6]);
}

/// Evaluates the color for a unit `dir`. `coeffs` holds one RGB triple per basis
/// function; only the first `num_coeffs(degree)` entries are used.
pub fn eval_sh_color(coeffs: &[[f64; 3]], dir: &Vec3, degree: usize) -> [f64; 3] {
    let mut basis = [0.0f64; 16];
    sh_basis(dir.x, dir.y, dir.z, degree, &mut basis);
    let mut rgb = [0.5; 3];
    for (b, c) in basis.iter().zip(coeffs).take(num_coeffs(degree)) {
        for ch in 0..3 {
            rgb[ch] += b * c[ch];
        }
    }
    rgb.map(|v| v.max(0.0))
}

/// Backward of [`eval_sh_color`]. Accumulates into `d_coeffs` and returns the
/// gradient with respect to the (unit) direction.
pub fn eval_sh_color_backward(
    coeffs: &[[f64; 3]],
    dir: &Vec3,
    degree: usize,
    d_rgb: &[f64; 3],
    d_coeffs: &mut [[f64; 3]],
) -> Vec3 {
    let n = num_coeffs(degree);
    let mut basis = [Dual3::constant(0.0); 16];
    sh_basis(
        Dual3::variable(dir.x, 0),
        Dual3::variable(dir.y, 1),
        Dual3::variable(dir.z, 2),
        degree,
        &mut basis,
    );
    // clamp at zero kills the gradient
    let mut raw = [0.5; 3];
    for (b, c) in basis.iter().zip(coeffs).take(n) {
        for ch in 0..3 {
            raw[ch] += b.v * c[ch];
        }
    }
    let g: [f64; 3] = std::array::from_fn(|ch| if raw[ch] > 0.0 { d_rgb[ch] } else { 0.0 });
    let mut d_dir = Vec3::zeros();
    for (b, (c, dc)) in basis.iter().zip(coeffs.iter().zip(d_coeffs.iter_mut())).take(n) {
        for ch in 0..3 {
            dc[ch] += b.v * g[ch];
            let w = c[ch] * g[ch];
            d_dir.x += b.d[0] * w;
            d_dir.y += b.d[1] * w;
            d_dir.z += b.d[2] * w;
        }
    }
    d_dir
}

/// DC coefficient that reproduces `rgb` under the +0.5 offset convention.
#[inline]
pub fn rgb_to_dc(rgb: [f64; 3]) -> [f64; 3] {
    rgb.map(|c| (c - 0.5) / SH_C0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_unit(seed: u64) -> Vec3 {
        // small LCG keeps these tests free of RNG plumbing
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        Vec3::new(next(), next(), next()).normalize()
    }

    #[test]
    fn dc_constant_matches_closed_form() {
        // Y00 = 1 / (2 sqrt(pi))
        let y00 = 0.5 / std::f64::consts::PI.sqrt();
        assert!((SH_C0 - y00).abs() < 1e-15);
        assert!((SH_C0 - 0.2820947918).abs() < 1e-10);
    }

    #[test]
    fn degree_zero_color() {
        let k = 0.7;
        let rgb = eval_sh_color(&[[k, -k, -5.0]], &Vec3::z(), 0);
        assert!((rgb[0] - (k * SH_C0 + 0.5)).abs() < 1e-15);
        assert!((rgb[1] - (-k * SH_C0 + 0.5)).abs() < 1e-15);
        assert_eq!(rgb[2], 0.0);
        assert_eq!(eval_sh_color(&[[0.0; 3]], &Vec3::x(), 0), [0.5; 3]);
    }

    #[test]
    fn dc_only_is_view_independent() {
        let mut coeffs = vec![[0.0; 3]; 4];
        coeffs[0] = [0.3, -0.2, 0.9];
        let a = eval_sh_color(&coeffs, &random_unit(1), 1);
        for s in 2..20 {
            let b = eval_sh_color(&coeffs, &random_unit(s), 1);
            for ch in 0..3 {
                assert!((a[ch] - b[ch]).abs() < 1e-15);
            }
        }
    }

    /// Orthonormality of the 16 basis functions checked by quadrature over the sphere.
    #[test]
    fn basis_is_orthonormal() {
        let (nt, np) = (200usize, 400usize);
        let mut gram = [[0.0f64; 16]; 16];
        for i in 0..nt {
            let theta = (i as f64 + 0.5) * std::f64::consts::PI / nt as f64;
            for j in 0..np {
                let phi = (j as f64 + 0.5) * 2.0 * std::f64::consts::PI / np as f64;
                let d = Vec3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos());
                let mut b = [0.0; 16];
                sh_basis(d.x, d.y, d.z, 3, &mut b);
                let w = theta.sin() * (std::f64::consts::PI / nt as f64)
                    * (2.0 * std::f64::consts::PI / np as f64);
                for a in 0..16 {
                    for c in 0..16 {
                        gram[a][c] += w * b[a] * b[c];
                    }
                }
            }
        }
        for a in 0..16 {
            for c in 0..16 {
                let want = if a == c { 1.0 } else { 0.0 };
                assert!((gram[a][c] - want).abs() < 1e-4, "gram[{a}][{c}] = {}", gram[a][c]);
            }
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        let coeffs: Vec<[f64; 3]> = (0..16)
            .map(|i| {
                let f = i as f64;
                [0.3 * (f * 0.7).sin(), 0.2 * (f * 1.3).cos(), -0.25 * (f * 0.4).sin() + 0.1]
            })
            .collect();
        let dir = random_unit(42);
        let d_rgb = [0.7, -1.1, 0.4];
        let loss = |c: &[[f64; 3]], d: &Vec3| {
            let rgb = eval_sh_color(c, d, 3);
            rgb[0] * d_rgb[0] + rgb[1] * d_rgb[1] + rgb[2] * d_rgb[2]
        };
        let mut d_coeffs = vec![[0.0; 3]; 16];
        let d_dir = eval_sh_color_backward(&coeffs, &dir, 3, &d_rgb, &mut d_coeffs);
        let h = 1e-6;
        for axis in 0..3 {
            let mut p = dir;
            let mut m = dir;
            p[axis] += h;
            m[axis] -= h;
            let fd = (loss(&coeffs, &p) - loss(&coeffs, &m)) / (2.0 * h);
            assert!((fd - d_dir[axis]).abs() < 1e-7, "axis {axis}: {fd} vs {}", d_dir[axis]);
        }
        for b in 0..16 {
            for ch in 0..3 {
                let mut p = coeffs.clone();
                let mut m = coeffs.clone();
                p[b][ch] += h;
                m[b][ch] -= h;
                let fd = (loss(&p, &dir) - loss(&m, &dir)) / (2.0 * h);
                assert!((fd - d_coeffs[b][ch]).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn rgb_to_dc_round_trips() {
        let rgb = [0.1, 0.55, 0.93];
        let out = eval_sh_color(&[rgb_to_dc(rgb)], &Vec3::y(), 0);
        for ch in 0..3 {
            assert!((out[ch] - rgb[ch]).abs() < 1e-14);
        }
    }
}
