//! Gaussian-window SSIM with its gradient.

use crate::error::Result;
use crate::image::Image;

pub const SSIM_RADIUS: usize = 5;
pub const SSIM_SIGMA: f64 = 1.5;
const C1: f64 = 0.01 * 0.01;
const C2: f64 = 0.03 * 0.03;

fn gaussian_window() -> [f64; 2 * SSIM_RADIUS + 1] {
    let mut w = [0.0; 2 * SSIM_RADIUS + 1];
    for (i, v) in w.iter_mut().enumerate() {
        let k = i as f64 - SSIM_RADIUS as f64;
        *v = (-k * k / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    w
}

/// Half-sample symmetric reflection: `d c b a | a b c d | d c b a`.
#[inline]
fn reflect(mut i: isize, n: usize) -> usize {
    let n = n as isize;
    loop {
        if i < 0 {
            i = -i - 1;
        } else if i >= n {
            i = 2 * n - i - 1;
        } else {
            return i as usize;
        }
    }
}

/// Separable blur of a single-channel `w × h` plane.
struct Blur {
    w: usize,
    h: usize,
    window: [f64; 2 * SSIM_RADIUS + 1],
}

impl Blur {
    fn apply(&self, src: &[f64]) -> Vec<f64> {
        let (w, h, r) = (self.w, self.h, SSIM_RADIUS as isize);
        let mut tmp = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for (k, wk) in self.window.iter().enumerate() {
                    acc += wk * src[y * w + reflect(x as isize + k as isize - r, w)];
                }
                tmp[y * w + x] = acc;
            }
        }
        let mut out = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for (k, wk) in self.window.iter().enumerate() {
                    acc += wk * tmp[reflect(y as isize + k as isize - r, h) * w + x];
                }
                out[y * w + x] = acc;
            }
        }
        out
    }

    fn adjoint(&self, grad: &[f64]) -> Vec<f64> {
        let (w, h, r) = (self.w, self.h, SSIM_RADIUS as isize);
        let mut tmp = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                let g = grad[y * w + x];
                for (k, wk) in self.window.iter().enumerate() {
                    tmp[reflect(y as isize + k as isize - r, h) * w + x] += wk * g;
                }
            }
        }
        let mut out = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                let g = tmp[y * w + x];
                for (k, wk) in self.window.iter().enumerate() {
                    out[y * w + reflect(x as isize + k as isize - r, w)] += wk * g;
                }
            }
        }
        out
    }
}

/// Mean SSIM over pixels and channels.
pub fn ssim(a: &Image, b: &Image) -> Result<f64> {
    ssim_impl(a, b, false).map(|(v, _)| v)
}

/// Mean SSIM and its gradient with respect to `a`.
pub fn ssim_with_grad(a: &Image, b: &Image) -> Result<(f64, Image)> {
    ssim_impl(a, b, true).map(|(v, g)| (v, g.expect("gradient requested")))
}

fn ssim_impl(a: &Image, b: &Image, want_grad: bool) -> Result<(f64, Option<Image>)> {
    a.check_same_shape(b)?;
    let (w, h, nc) = (a.width, a.height, a.channels);
    let n = w * h;
    if n == 0 || nc == 0 {
        return Ok((1.0, want_grad.then(|| Image::new(w, h, nc))));
    }
    let blur = Blur { w, h, window: gaussian_window() };
    let norm = 1.0 / (n * nc) as f64;
    let mut total = 0.0;
    let mut grad = want_grad.then(|| Image::new(w, h, nc));
    for c in 0..nc {
        let x = a.channel(c).data;
        let y = b.channel(c).data;
        let mx = blur.apply(&x);
        let my = blur.apply(&y);
        let exx = blur.apply(&x.iter().map(|v| v * v).collect::<Vec<_>>());
        let eyy = blur.apply(&y.iter().map(|v| v * v).collect::<Vec<_>>());
        let exy = blur.apply(&x.iter().zip(&y).map(|(p, q)| p * q).collect::<Vec<_>>());

        let mut g_mx = vec![0.0; n];
        let mut g_exx = vec![0.0; n];
        let mut g_exy = vec![0.0; n];
        for i in 0..n {
            let sxx = exx[i] - mx[i] * mx[i];
            let syy = eyy[i] - my[i] * my[i];
            let sxy = exy[i] - mx[i] * my[i];
            let a1 = 2.0 * mx[i] * my[i] + C1;
            let a2 = 2.0 * sxy + C2;
            let b1 = mx[i] * mx[i] + my[i] * my[i] + C1;
            let b2 = sxx + syy + C2;
            let s = (a1 * a2) / (b1 * b2);
            total += s;
            if want_grad {
                let d_sxx = -s / b2;
                let d_sxy = 2.0 * s / a2;
                g_exx[i] = norm * d_sxx;
                g_exy[i] = norm * d_sxy;
                g_mx[i] = norm
                    * (s * (2.0 * my[i] / a1 - 2.0 * mx[i] / b1) - 2.0 * mx[i] * d_sxx - my[i] * d_sxy);
            }
        }
        if let Some(g) = grad.as_mut() {
            let gm = blur.adjoint(&g_mx);
            let gxx = blur.adjoint(&g_exx);
            let gxy = blur.adjoint(&g_exy);
            for i in 0..n {
                g.data[i * nc + c] = gm[i] + 2.0 * x[i] * gxx[i] + y[i] * gxy[i];
            }
        }
    }
    Ok((total * norm, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reflect_repeats_edge() {
        let idx: Vec<usize> = (-3..7).map(|i| reflect(i, 4)).collect();
        assert_eq!(idx, vec![2, 1, 0, 0, 1, 2, 3, 3, 2, 1]);
        assert_eq!(reflect(-5, 2), 0);
    }

    #[test]
    fn blur_adjoint_identity() {
        let blur = Blur { w: 7, h: 5, window: gaussian_window() };
        let u: Vec<f64> = (0..35).map(|i| ((i * 37 % 11) as f64).sin()).collect();
        let v: Vec<f64> = (0..35).map(|i| ((i * 13 % 7) as f64).cos()).collect();
        let lhs: f64 = blur.apply(&u).iter().zip(&v).map(|(a, b)| a * b).sum();
        let rhs: f64 = u.iter().zip(blur.adjoint(&v)).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn window_is_normalized() {
        let w = gaussian_window();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(w[0], w[10]);
    }
}
