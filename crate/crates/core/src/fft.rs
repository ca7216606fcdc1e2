//! FFT plumbing: cached plans, the centered continuous-FT convention,
//! band-limited upsampling and interpolation, and axis-wise n-D transforms.

use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

fn planner() -> &'static Mutex<FftPlanner<f64>> {
    static PLANNER: OnceLock<Mutex<FftPlanner<f64>>> = OnceLock::new();
    PLANNER.get_or_init(|| Mutex::new(FftPlanner::new()))
}

pub fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    let mut p = planner().lock().expect("fft planner poisoned");
    if inverse {
        p.plan_fft_inverse(n)
    } else {
        p.plan_fft_forward(n)
    }
}

#[inline]
pub(crate) fn sign(k: usize) -> f64 {
    if k.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Centered DFT with continuous scaling.
///
/// Index j sits at x_j = (j - n/2) dx and index k at xi_k = (k - n/2)/L, so
/// `out[k] = dx * sum_j f[j] exp(-2 pi i x_j xi_k)`. The half-length shift is
/// carried by the (-1)^j, (-1)^k factors; (-1)^{n/2} is the leftover constant.
pub fn centered_dft(f: &[Complex64], dx: f64) -> Vec<Complex64> {
    let n = f.len();
    let mut buf: Vec<Complex64> = f.iter().enumerate().map(|(j, v)| v * sign(j)).collect();
    plan(n, false).process(&mut buf);
    let c = dx * sign(n / 2);
    for (k, v) in buf.iter_mut().enumerate() {
        *v *= c * sign(k);
    }
    buf
}

/// Inverse of [`centered_dft`]: `out[j] = dxi * sum_k F[k] exp(2 pi i x_j xi_k)`.
pub fn centered_idft(fhat: &[Complex64], dxi: f64) -> Vec<Complex64> {
    let n = fhat.len();
    let mut buf: Vec<Complex64> = fhat.iter().enumerate().map(|(k, v)| v * sign(k)).collect();
    plan(n, true).process(&mut buf);
    let c = dxi * sign(n / 2);
    for (j, v) in buf.iter_mut().enumerate() {
        *v *= c * sign(j);
    }
    buf
}

/// Exact band-limited 2x upsampling: zero-padding in frequency, with the
/// Nyquist coefficient split evenly between +n/2 and -n/2.
/// Output sample 2j equals input sample j.
pub fn upsample2(f: &[Complex64]) -> Vec<Complex64> {
    let n = f.len();
    let mut spec = f.to_vec();
    plan(n, false).process(&mut spec);
    let h = n / 2;
    let mut g = vec![Complex64::new(0.0, 0.0); 2 * n];
    g[..h].copy_from_slice(&spec[..h]);
    g[2 * n - h + 1..].copy_from_slice(&spec[h + 1..]);
    g[h] = spec[h] * 0.5;
    g[2 * n - h] = spec[h] * 0.5;
    plan(2 * n, true).process(&mut g);
    let s = 1.0 / n as f64;
    for v in g.iter_mut() {
        *v *= s;
    }
    g
}

/// Weights of the trigonometric interpolant at fractional index `s`
/// (position t = x0 + s dx). Nyquist term uses the real cosine.
pub fn interp_weights(n: usize, s: f64) -> Vec<f64> {
    let nf = n as f64;
    let cos_ny = (std::f64::consts::PI * s).cos();
    (0..n)
        .map(|j| {
            let u = 2.0 * std::f64::consts::PI * (s - j as f64) / nf;
            let half = (0.5 * u).sin();
            let d = if half.abs() < 1e-12 {
                // limit of sin((n-1)u/2)/sin(u/2) at u = 2 pi m
                let m = ((s - j as f64) / nf).round() as i64;
                (nf - 1.0) * if m.rem_euclid(2) == 0 { 1.0 } else { -1.0 }
            } else {
                (0.5 * (nf - 1.0) * u).sin() / half
            };
            (d + sign(j) * cos_ny) / nf
        })
        .collect()
}

/// Band-limited interpolation of periodic samples on a centered grid of
/// length `extent`, evaluated at `t`; zero outside the open box |t| < extent/2.
pub fn interp_eval(f: &[Complex64], extent: f64, t: f64) -> Complex64 {
    if !(t.abs() < 0.5 * extent) {
        return Complex64::new(0.0, 0.0);
    }
    let n = f.len();
    let s = (t + 0.5 * extent) / (extent / n as f64);
    interp_weights(n, s)
        .iter()
        .zip(f)
        .map(|(w, v)| v * *w)
        .sum()
}

#[derive(Clone, Copy)]
struct SyncPtr(*mut Complex64);
unsafe impl Send for SyncPtr {}
unsafe impl Sync for SyncPtr {}

/// Unnormalized FFT along one axis of a row-major tensor.
pub fn fft_axis(data: &mut [Complex64], dims: &[usize], axis: usize, inverse: bool) {
    let len = dims[axis];
    let inner: usize = dims[axis + 1..].iter().product();
    let outer: usize = dims[..axis].iter().product();
    assert_eq!(data.len(), outer * len * inner);
    let fft = plan(len, inverse);
    if inner == 1 {
        data.par_chunks_mut(len).for_each(|line| fft.process(line));
        return;
    }
    // Strided lines: gather a block of columns, transform, scatter back.
    const BLOCK: usize = 256;
    let nblocks = inner.div_ceil(BLOCK);
    let ptr = SyncPtr(data.as_mut_ptr());
    (0..outer * nblocks).into_par_iter().for_each(|task| {
        let p = ptr;
        let o = task / nblocks;
        let c0 = (task % nblocks) * BLOCK;
        let width = BLOCK.min(inner - c0);
        let base = o * len * inner;
        let mut buf = vec![Complex64::new(0.0, 0.0); width * len];
        // SAFETY: each task touches columns [c0, c0+width) of outer slab o only,
        // so the index sets of different tasks are disjoint.
        unsafe {
            for r in 0..len {
                let row = p.0.add(base + r * inner + c0);
                for c in 0..width {
                    buf[c * len + r] = *row.add(c);
                }
            }
        }
        for line in buf.chunks_mut(len) {
            fft.process(line);
        }
        unsafe {
            for r in 0..len {
                let row = p.0.add(base + r * inner + c0);
                for c in 0..width {
                    *row.add(c) = buf[c * len + r];
                }
            }
        }
    });
}

/// Unnormalized FFT over every axis.
pub fn fftn(data: &mut [Complex64], dims: &[usize], inverse: bool) {
    for axis in 0..dims.len() {
        fft_axis(data, dims, axis, inverse);
    }
}

/// Circular index of a centered lattice offset: offset o lives at o mod n.
#[inline]
pub(crate) fn wrap(i: i64, n: usize) -> usize {
    i.rem_euclid(n as i64) as usize
}
