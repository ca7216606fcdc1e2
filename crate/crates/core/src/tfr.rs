//! Time-frequency shifts, STFT and its adjoint, the cross-Wigner
//! distribution, Husimi densities and the Wigner transform of a kernel.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::{self, wrap};
use crate::grid::{sample_gaussian, GridSpec, SampledSignal};
use crate::tensor::ComplexTensor;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Lattice point z = (x, xi), stored as grid indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PhasePoint {
    pub ix: usize,
    pub ixi: usize,
}

impl PhasePoint {
    pub fn new(ix: usize, ixi: usize) -> Self {
        PhasePoint { ix, ixi }
    }

    /// Snaps real coordinates to the lattice; rejects off-lattice points.
    pub fn from_coords(grid: &GridSpec, x: f64, xi: f64) -> Result<Self> {
        let n = grid.n();
        let fx = x / grid.dx() + (n / 2) as f64;
        let fk = xi / grid.dxi() + (n / 2) as f64;
        let (rx, rk) = (fx.round(), fk.round());
        if (fx - rx).abs() > 1e-9 || (fk - rk).abs() > 1e-9 {
            return Err(Error::OffLattice(format!("({x}, {xi})")));
        }
        if rx < 0.0 || rk < 0.0 || rx >= n as f64 || rk >= n as f64 {
            return Err(Error::OffLattice(format!("({x}, {xi}) outside the grid")));
        }
        Ok(PhasePoint { ix: rx as usize, ixi: rk as usize })
    }

    pub fn coords(&self, grid: &GridSpec) -> (f64, f64) {
        (grid.x(self.ix), grid.xi(self.ixi))
    }
}

/// Complex field on the n x n phase lattice; axis 0 = x, axis 1 = xi.
#[derive(Debug, Clone, PartialEq)]
pub struct TFRepresentation {
    pub grid: GridSpec,
    pub values: Vec<Complex64>,
}

impl TFRepresentation {
    pub fn zeros(grid: GridSpec) -> Self {
        TFRepresentation { grid, values: vec![ZERO; grid.n() * grid.n()] }
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(f64, f64) -> Complex64) -> Self {
        let n = grid.n();
        let mut values = Vec::with_capacity(n * n);
        for a in 0..n {
            for b in 0..n {
                values.push(f(grid.x(a), grid.xi(b)));
            }
        }
        TFRepresentation { grid, values }
    }

    #[inline]
    pub fn at(&self, a: usize, b: usize) -> Complex64 {
        self.values[a * self.grid.n() + b]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// L2 norm with phase-space cell weights dx * dxi.
    pub fn l2_norm(&self) -> f64 {
        (self.grid.cell() * self.values.iter().map(|v| v.norm_sqr()).sum::<f64>()).sqrt()
    }

    pub fn sup_diff(&self, other: &TFRepresentation) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn to_tensor(&self) -> ComplexTensor {
        let n = self.grid.n();
        ComplexTensor { dims: vec![n, n], values: self.values.clone() }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "x,xi,re,im,abs")?;
        let n = self.grid.n();
        for a in 0..n {
            for b in 0..n {
                let v = self.at(a, b);
                writeln!(w, "{},{},{:e},{:e},{:e}", self.grid.x(a), self.grid.xi(b), v.re, v.im, v.norm())?;
            }
        }
        Ok(())
    }

    /// Band-limited interpolation at an arbitrary phase point; zero outside the box.
    pub fn interp(&self, x: f64, xi: f64) -> Complex64 {
        let g = self.grid;
        let n = g.n();
        if !(x.abs() < 0.5 * g.extent()) || !(xi.abs() < g.nyquist()) {
            return ZERO;
        }
        let wx = fft::interp_weights(n, (x - g.offset()) / g.dx());
        let wk = fft::interp_weights(n, (xi + g.nyquist()) / g.dxi());
        self.values
            .chunks(n)
            .zip(&wx)
            .map(|(row, a)| row.iter().zip(&wk).map(|(v, w)| v * *w).sum::<Complex64>() * *a)
            .sum()
    }
}

/// pi(z) f: samples exp(2 pi i xi x_j) f(x_j - x), translation as a circular shift.
pub fn tf_shift(f: &SampledSignal, z: PhasePoint) -> SampledSignal {
    let g = f.grid;
    let n = g.n();
    let xi = g.xi(z.ixi);
    let samples = (0..n)
        .map(|j| {
            let src = wrap(j as i64 - z.ix as i64 + (n / 2) as i64, n);
            let ph = 2.0 * std::f64::consts::PI * xi * g.x(j);
            f.samples[src] * Complex64::from_polar(1.0, ph)
        })
        .collect();
    SampledSignal { grid: g, samples, measure: f.measure }
}

fn stft_row(f: &SampledSignal, g: &SampledSignal, a: usize) -> Vec<Complex64> {
    let grid = f.grid;
    let n = grid.n();
    let h: Vec<Complex64> = (0..n)
        .map(|j| f.samples[j] * g.samples[wrap(j as i64 - a as i64 + (n / 2) as i64, n)].conj())
        .collect();
    fft::centered_dft(&h, grid.dx())
}

fn ensure_window(g: &SampledSignal) -> Result<()> {
    if g.samples.iter().all(|v| v.norm() == 0.0) {
        return Err(Error::ZeroWindow);
    }
    Ok(())
}

/// V_g f(x, xi) = <f, M_xi T_x g>.
pub fn stft(f: &SampledSignal, g: &SampledSignal) -> Result<TFRepresentation> {
    f.grid.ensure_same(&g.grid)?;
    ensure_window(g)?;
    let n = f.grid.n();
    let mut values = vec![ZERO; n * n];
    values.par_chunks_mut(n).enumerate().for_each(|(a, row)| row.copy_from_slice(&stft_row(f, g, a)));
    Ok(TFRepresentation { grid: f.grid, values })
}

/// Selected x-rows of the STFT, as rows[i][xi index].
pub fn stft_rows(f: &SampledSignal, g: &SampledSignal, rows: &[usize]) -> Result<Vec<Vec<Complex64>>> {
    f.grid.ensure_same(&g.grid)?;
    ensure_window(g)?;
    Ok(rows.iter().map(|&a| stft_row(f, g, a)).collect())
}

/// V_gamma^* F = sum_z F(z) pi(z) gamma dx dxi.
pub fn stft_adjoint(big_f: &TFRepresentation, gamma: &SampledSignal) -> Result<SampledSignal> {
    big_f.grid.ensure_same(&gamma.grid)?;
    let grid = gamma.grid;
    let n = grid.n();
    let dx = grid.dx();
    let out = (0..n)
        .into_par_iter()
        .map(|a| {
            let row = fft::centered_idft(&big_f.values[a * n..(a + 1) * n], grid.dxi());
            (0..n)
                .map(|j| row[j] * gamma.samples[wrap(j as i64 - a as i64 + (n / 2) as i64, n)] * dx)
                .collect::<Vec<_>>()
        })
        .reduce(|| vec![ZERO; n], |mut acc, v| {
            for (s, t) in acc.iter_mut().zip(v) {
                *s += t;
            }
            acc
        });
    Ok(SampledSignal { grid, samples: out, measure: false })
}

/// One x-row of the cross-Wigner from upsampled signals.
///
/// Lags run over |m| <= n/2 in half-sample units of the upsampled grid
/// (t = m dx), the two end lags with weight 1/2, folded mod n for the FFT.
fn wigner_row(fu: &[Complex64], gu: &[Complex64], a: usize, n: usize, dx: f64, fft: &dyn rustfft::Fft<f64>) -> Vec<Complex64> {
    let n2 = 2 * n;
    let h2 = (n / 2) as i64;
    let mut hh = vec![ZERO; n];
    for m in -h2..=h2 {
        let w = if m.abs() == h2 { 0.5 } else { 1.0 };
        let p = fu[wrap(2 * a as i64 + m, n2)] * gu[wrap(2 * a as i64 - m, n2)].conj();
        hh[wrap(m, n)] += p * w;
    }
    fft.process(&mut hh);
    (0..n).map(|b| hh[(b + n / 2) % n] * dx).collect()
}

/// W(f,g)(x, xi) = int f(x + t/2) conj g(x - t/2) exp(-2 pi i t xi) dt.
pub fn cross_wigner(f: &SampledSignal, g: &SampledSignal) -> Result<TFRepresentation> {
    f.grid.ensure_same(&g.grid)?;
    let n = f.grid.n();
    let dx = f.grid.dx();
    let fu = f.upsampled();
    let gu = g.upsampled();
    let plan = fft::plan(n, false);
    let mut values = vec![ZERO; n * n];
    values
        .par_chunks_mut(n)
        .enumerate()
        .for_each(|(a, row)| row.copy_from_slice(&wigner_row(&fu, &gu, a, n, dx, plan.as_ref())));
    Ok(TFRepresentation { grid: f.grid, values })
}

/// |V_phi g|^2 with the Gaussian window.
pub fn husimi(g: &SampledSignal) -> Result<TFRepresentation> {
    let phi = sample_gaussian(g.grid);
    let v = stft(g, &phi)?;
    Ok(TFRepresentation { grid: g.grid, values: v.values.iter().map(|c| Complex64::new(c.norm_sqr(), 0.0)).collect() })
}

/// Wg * Wphi on the periodic phase lattice.
pub fn husimi_via_convolution(g: &SampledSignal) -> Result<TFRepresentation> {
    let phi = sample_gaussian(g.grid);
    let wg = cross_wigner(g, g)?;
    let wp = cross_wigner(&phi, &phi)?;
    Ok(phase_convolve(&wg, &wp))
}

/// Circular convolution (a * b)(z) = sum_u a(u) b(z - u) dx dxi; b is read
/// as a field centered at the origin.
pub fn phase_convolve(a: &TFRepresentation, b: &TFRepresentation) -> TFRepresentation {
    let grid = a.grid;
    let n = grid.n();
    let h = n / 2;
    let mut fa = a.values.clone();
    // shift b so that the origin sits at index (0, 0)
    let mut fb = vec![ZERO; n * n];
    for i in 0..n {
        for j in 0..n {
            fb[i * n + j] = b.values[((i + h) % n) * n + (j + h) % n];
        }
    }
    let dims = [n, n];
    fft::fftn(&mut fa, &dims, false);
    fft::fftn(&mut fb, &dims, false);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y;
    }
    fft::fftn(&mut fa, &dims, true);
    let s = grid.cell() / (n * n) as f64;
    // a at index a-offset h, b centered: output offset lands back on index
    for v in fa.iter_mut() {
        *v *= s;
    }
    TFRepresentation { grid, values: fa }
}

/// Output layout of [`wigner2_slabs`].
#[derive(Clone, Copy, PartialEq, Eq)]
pub(crate) enum KernelLayout {
    /// (x, y, xi, eta)
    Raw,
    /// (x, xi, y, -eta)
    Permuted,
}

/// 2-D band-limited 2x upsampling of an n x n matrix.
fn upsample2_2d(k: &[Complex64], n: usize) -> Vec<Complex64> {
    let rows: Vec<Vec<Complex64>> = k.par_chunks(n).map(fft::upsample2).collect();
    let n2 = 2 * n;
    let mut out = vec![ZERO; n2 * n2];
    let cols: Vec<Vec<Complex64>> = (0..n2)
        .into_par_iter()
        .map(|c| fft::upsample2(&rows.iter().map(|r| r[c]).collect::<Vec<_>>()))
        .collect();
    for (c, col) in cols.iter().enumerate() {
        for (r, v) in col.iter().enumerate() {
            out[r * n2 + c] = *v;
        }
    }
    out
}

/// 2-D Wigner of an n x n kernel written into `out` (n^4) in the given layout.
pub(crate) fn wigner2_into(kt: &[Complex64], grid: &GridSpec, out: &mut [Complex64], layout: KernelLayout) {
    let n = grid.n();
    let n2 = 2 * n;
    let dx2 = grid.dx() * grid.dx();
    let u = upsample2_2d(kt, n);
    let plan = fft::plan(n, false);
    let h2 = (n / 2) as i64;
    let weight = |m: i64| if m.abs() == h2 { 0.5 } else { 1.0 };
    out.par_chunks_mut(n * n * n).enumerate().for_each(|(a1, slab)| {
        let mut hh = vec![ZERO; n * n];
        let mut tr = vec![ZERO; n * n];
        for a2 in 0..n {
            hh.iter_mut().for_each(|v| *v = ZERO);
            for m1 in -h2..=h2 {
                let w1 = weight(m1);
                let r1 = wrap(2 * a1 as i64 + m1, n2) * n2;
                let s1 = wrap(2 * a1 as i64 - m1, n2) * n2;
                let row = wrap(m1, n) * n;
                for m2 in -h2..=h2 {
                    let p = u[r1 + wrap(2 * a2 as i64 + m2, n2)] * u[s1 + wrap(2 * a2 as i64 - m2, n2)].conj();
                    hh[row + wrap(m2, n)] += p * (w1 * weight(m2));
                }
            }
            plan.process(&mut hh);
            transpose(&hh, &mut tr, n);
            plan.process(&mut tr);
            // tr is indexed [eta-freq][xi-freq]
            for b1 in 0..n {
                let f1 = (b1 + n / 2) % n;
                for b2 in 0..n {
                    let v = tr[((b2 + n / 2) % n) * n + f1] * dx2;
                    match layout {
                        KernelLayout::Raw => slab[(a2 * n + b1) * n + b2] = v,
                        KernelLayout::Permuted => slab[(b1 * n + a2) * n + (n - b2) % n] = v,
                    }
                }
            }
        }
    });
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in 0..n {
            dst[j * n + i] = src[i * n + j];
        }
    }
}

/// W k_T as a function on R^2, indexed (x, y, xi, eta).
pub fn wigner_of_kernel(kt: &ComplexTensor, grid: &GridSpec) -> Result<ComplexTensor> {
    let n = grid.n();
    if kt.dims != [n, n] {
        return Err(Error::Dimension(format!("kernel dims {:?}, grid n = {n}", kt.dims)));
    }
    crate::memory::check_kernel(n, 0)?;
    let mut out = vec![ZERO; n * n * n * n];
    wigner2_into(&kt.values, grid, &mut out, KernelLayout::Raw);
    ComplexTensor::new(vec![n, n, n, n], out)
}
