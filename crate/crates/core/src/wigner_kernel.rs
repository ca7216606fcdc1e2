//! Wigner kernels k = Tp W k_T of operators, their action on Wigner
//! distributions, Gaussian smoothing, and the checks tying the kernel to the
//! Gabor matrix.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::{self, wrap};
use crate::gabor::{LatticeSpec, SafeRegion};
use crate::grid::{sample_gaussian, GridSpec, SampledSignal};
use crate::memory;
use crate::operators::{kernel_from_columns, OperatorSpec, SymbolField, SymplecticMatrix};
use crate::tensor::ComplexTensor;
use crate::tfr::{cross_wigner, stft_rows, tf_shift, wigner2_into, KernelLayout, PhasePoint, TFRepresentation};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Fraction of the Nyquist band kept by the input-side projection.
pub const DEFAULT_BAND_FRACTION: f64 = 0.6;

/// n^4 tensor indexed (z_x, z_xi, w_x, w_xi): output variable first.
#[derive(Debug, Clone, PartialEq)]
pub struct WignerKernelTensor {
    pub grid: GridSpec,
    pub values: Vec<Complex64>,
}

impl WignerKernelTensor {
    #[inline]
    pub fn index(&self, z: PhasePoint, w: PhasePoint) -> usize {
        let n = self.grid.n();
        ((z.ix * n + z.ixi) * n + w.ix) * n + w.ixi
    }
    #[inline]
    pub fn at(&self, z: PhasePoint, w: PhasePoint) -> Complex64 {
        self.values[self.index(z, w)]
    }
    pub fn max_abs(&self) -> f64 {
        self.values.par_iter().map(|v| v.norm()).reduce(|| 0.0, f64::max)
    }
    /// L2 norm with weights (dx dxi)^2.
    pub fn l2_norm(&self) -> f64 {
        let c = self.grid.cell();
        (c * c * self.values.par_iter().map(|v| v.norm_sqr()).sum::<f64>()).sqrt()
    }
    pub fn to_tensor(&self) -> ComplexTensor {
        let n = self.grid.n();
        ComplexTensor { dims: vec![n, n, n, n], values: self.values.clone() }
    }
    pub fn from_tensor(grid: GridSpec, t: ComplexTensor) -> Result<Self> {
        let n = grid.n();
        if t.dims != [n, n, n, n] {
            return Err(Error::Dimension(format!("kernel dims {:?}, grid n = {n}", t.dims)));
        }
        Ok(WignerKernelTensor { grid, values: t.values })
    }
}

/// F(x, y, xi, eta) -> F(x, xi, y, -eta), with -eta on index (n - b) mod n.
pub fn permute(raw: &ComplexTensor) -> Result<ComplexTensor> {
    let n = raw.dims[0];
    if raw.dims != [n, n, n, n] {
        return Err(Error::Dimension(format!("expected n^4 tensor, got {:?}", raw.dims)));
    }
    let mut out = vec![ZERO; raw.values.len()];
    out.par_chunks_mut(n * n * n).enumerate().for_each(|(x, slab)| {
        for y in 0..n {
            for xi in 0..n {
                for eta in 0..n {
                    slab[(xi * n + y) * n + (n - eta) % n] = raw.values[((x * n + y) * n + xi) * n + eta];
                }
            }
        }
    });
    ComplexTensor::new(raw.dims.clone(), out)
}

/// Inverse of [`permute`].
pub fn unpermute(k: &ComplexTensor) -> Result<ComplexTensor> {
    let n = k.dims[0];
    if k.dims != [n, n, n, n] {
        return Err(Error::Dimension(format!("expected n^4 tensor, got {:?}", k.dims)));
    }
    let mut out = vec![ZERO; k.values.len()];
    out.par_chunks_mut(n * n * n).enumerate().for_each(|(x, slab)| {
        for y in 0..n {
            for xi in 0..n {
                for eta in 0..n {
                    slab[(y * n + xi) * n + eta] = k.values[((x * n + xi) * n + y) * n + (n - eta) % n];
                }
            }
        }
    });
    ComplexTensor::new(k.dims.clone(), out)
}

/// Ideal low-pass keeping |k| < fraction * n/2 (integer frequencies).
pub fn band_projector(grid: &GridSpec, fraction: f64) -> Vec<Complex64> {
    let n = grid.n();
    let cut = fraction * (n / 2) as f64;
    let mask: Vec<f64> = (0..n)
        .map(|k| {
            let f = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
            if f.abs() < cut {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    let fwd = fft::plan(n, false);
    let inv = fft::plan(n, true);
    let mut p = vec![ZERO; n * n];
    // column j is the projected unit vector e_j
    let cols: Vec<Vec<Complex64>> = (0..n)
        .map(|j| {
            let mut e = vec![ZERO; n];
            e[j] = Complex64::new(1.0, 0.0);
            fwd.process(&mut e);
            for (v, m) in e.iter_mut().zip(&mask) {
                *v *= *m / n as f64;
            }
            inv.process(&mut e);
            e
        })
        .collect();
    for (j, c) in cols.iter().enumerate() {
        for i in 0..n {
            p[i * n + j] = c[i];
        }
    }
    p
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelOptions {
    /// Input-side band projection; `None` uses the raw Schwartz kernel.
    pub band_fraction: Option<f64>,
}

impl Default for KernelOptions {
    fn default() -> Self {
        KernelOptions { band_fraction: Some(DEFAULT_BAND_FRACTION) }
    }
}

/// k = Tp W k_T of a raw kernel matrix.
pub fn kernel_from_matrix(kt: &ComplexTensor, grid: &GridSpec) -> Result<WignerKernelTensor> {
    let n = grid.n();
    if kt.dims != [n, n] {
        return Err(Error::Dimension(format!("kernel dims {:?}, grid n = {n}", kt.dims)));
    }
    memory::check_kernel(n, 0)?;
    let mut values = vec![ZERO; n * n * n * n];
    wigner2_into(&kt.values, grid, &mut values, KernelLayout::Permuted);
    Ok(WignerKernelTensor { grid: *grid, values })
}

/// Schwartz kernel used for the Wigner kernel: T P / dx, P the band projection.
///
/// A Wigner distribution occupies twice the band of its signals, so the
/// lattice resolves W k_T only for kernels living in half the band. The
/// projection acts on the input side only, leaving the action on signals
/// inside the kept band unchanged.
pub fn projected_schwartz_kernel(op: &OperatorSpec, grid: &GridSpec, opts: &KernelOptions) -> Result<ComplexTensor> {
    let n = grid.n();
    let prepared = op.prepare(grid)?;
    let inv_dx = 1.0 / grid.dx();
    let inputs: Vec<SampledSignal> = match opts.band_fraction {
        Some(frac) => {
            let p = band_projector(grid, frac);
            (0..n)
                .map(|j| {
                    let samples = (0..n).map(|i| p[i * n + j] * inv_dx).collect();
                    SampledSignal::new(*grid, samples).expect("length n")
                })
                .collect()
        }
        None => (0..n)
            .map(|j| {
                let mut e = SampledSignal::zeros(*grid);
                e.samples[j] = Complex64::new(inv_dx, 0.0);
                e
            })
            .collect(),
    };
    kernel_from_columns(&prepared, inputs, grid)
}

pub fn wigner_kernel(op: &OperatorSpec, grid: &GridSpec) -> Result<WignerKernelTensor> {
    wigner_kernel_with(op, grid, &KernelOptions::default())
}

pub fn wigner_kernel_with(op: &OperatorSpec, grid: &GridSpec, opts: &KernelOptions) -> Result<WignerKernelTensor> {
    memory::check_kernel(grid.n(), 0)?;
    let kt = projected_schwartz_kernel(op, grid, opts)?;
    kernel_from_matrix(&kt, grid)
}

/// (K F)(z) = sum_w k(z, w) F(w) dx dxi.
pub fn kernel_apply(k: &WignerKernelTensor, f: &TFRepresentation) -> Result<TFRepresentation> {
    k.grid.ensure_same(&f.grid)?;
    let n = k.grid.n();
    let m = n * n;
    let c = k.grid.cell();
    let values = k
        .values
        .par_chunks(m)
        .map(|row| row.iter().zip(&f.values).map(|(a, b)| a * b).sum::<Complex64>() * c)
        .collect();
    Ok(TFRepresentation { grid: k.grid, values })
}

/// Relative sup error between W(Tf, Tg) and K W(f, g) over the whole lattice.
pub fn verify_wigner_action(op: &OperatorSpec, f: &SampledSignal, g: &SampledSignal) -> Result<f64> {
    f.grid.ensure_same(&g.grid)?;
    let grid = f.grid;
    let prepared = op.prepare(&grid)?;
    let lhs = cross_wigner(&prepared.apply(f), &prepared.apply(g))?;
    let k = wigner_kernel(op, &grid)?;
    let rhs = kernel_apply(&k, &cross_wigner(f, g)?)?;
    Ok(lhs.sup_diff(&rhs) / lhs.max_abs())
}

/// 2-D transform of the reflected, origin-centered Wigner of a window.
fn reflected_filter(w: &TFRepresentation) -> Vec<Complex64> {
    let n = w.grid.n();
    let h = n / 2;
    let mut r = vec![ZERO; n * n];
    for i in 0..n {
        for j in 0..n {
            r[i * n + j] = w.at(wrap(h as i64 - i as i64, n), wrap(h as i64 - j as i64, n));
        }
    }
    fft::fftn(&mut r, &[n, n], false);
    r
}

/// [k * (W gamma (x) W g)](w, z) = sum_{u,v} k(u, v) W gamma(u - w) W g(v - z) (dx dxi)^2,
/// circular, computed in place by a 4-D FFT. The output pair is smoothed
/// with gamma, the input pair with g.
pub fn smooth_kernel_owned(mut k: WignerKernelTensor, g: &SampledSignal, gamma: &SampledSignal) -> Result<WignerKernelTensor> {
    k.grid.ensure_same(&g.grid)?;
    k.grid.ensure_same(&gamma.grid)?;
    g.warn_if_not_localized("smooth_kernel window g");
    gamma.warn_if_not_localized("smooth_kernel window gamma");
    let n = k.grid.n();
    let fo = reflected_filter(&cross_wigner(gamma, gamma)?);
    let fi = reflected_filter(&cross_wigner(g, g)?);
    let dims = [n, n, n, n];
    fft::fftn(&mut k.values, &dims, false);
    let m = n * n;
    let c = k.grid.cell();
    let scale = c * c / (m * m) as f64;
    k.values.par_chunks_mut(m).enumerate().for_each(|(p, block)| {
        let a = fo[p] * scale;
        for (v, b) in block.iter_mut().zip(&fi) {
            *v *= a * b;
        }
    });
    fft::fftn(&mut k.values, &dims, true);
    Ok(k)
}

pub fn smooth_kernel(k: &WignerKernelTensor, g: &SampledSignal, gamma: &SampledSignal) -> Result<WignerKernelTensor> {
    memory::check_kernel(k.grid.n(), 1)?;
    smooth_kernel_owned(k.clone(), g, gamma)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Thm34Report {
    pub op: String,
    pub n: usize,
    #[serde(rename = "L")]
    pub extent: f64,
    pub sup_error: f64,
    pub safe_region_fraction: f64,
    /// Largest |K(w,z)|^2 over the compared pairs.
    pub max_lhs: f64,
    pub pairs: usize,
}

/// Relative sup difference between |K(w,z)|^2 and the smoothed kernel at
/// lattice pairs with w, z and chi(z) inside `region`.
pub fn verify_thm34_in(
    op: &OperatorSpec,
    g: &SampledSignal,
    gamma: &SampledSignal,
    lat: &LatticeSpec,
    region: &SafeRegion,
    chi: Option<&SymplecticMatrix>,
) -> Result<Thm34Report> {
    let grid = g.grid;
    grid.ensure_same(&gamma.grid)?;
    memory::check_kernel(grid.n(), 0)?;
    let k = wigner_kernel(op, &grid)?;
    let s = smooth_kernel_owned(k, g, gamma)?;
    compare_thm34(op, &s, g, gamma, lat, region, chi)
}

pub(crate) fn compare_thm34(
    op: &OperatorSpec,
    s: &WignerKernelTensor,
    g: &SampledSignal,
    gamma: &SampledSignal,
    lat: &LatticeSpec,
    region: &SafeRegion,
    chi: Option<&SymplecticMatrix>,
) -> Result<Thm34Report> {
    let grid = g.grid;
    let prepared = op.prepare(&grid)?;
    let pts = lat.points(&grid)?;
    let safe: Vec<PhasePoint> = pts.iter().copied().filter(|p| region.contains_point(&grid, *p)).collect();
    let zs: Vec<PhasePoint> = safe
        .iter()
        .copied()
        .filter(|z| match chi {
            Some(m) => {
                let (x, xi) = z.coords(&grid);
                let c = m.apply([x, xi]);
                region.contains(c[0], c[1])
            }
            None => true,
        })
        .collect();
    if zs.is_empty() {
        return Err(Error::BadInput("no lattice points inside the safe region".into()));
    }
    let mut rows: Vec<usize> = safe.iter().map(|p| p.ix).collect();
    rows.sort_unstable();
    rows.dedup();
    let results: Vec<(f64, f64)> = zs
        .par_iter()
        .map(|z| {
            let tz = prepared.apply(&tf_shift(g, *z));
            let v = stft_rows(&tz, gamma, &rows).expect("grids match");
            let mut err: f64 = 0.0;
            let mut mx: f64 = 0.0;
            for w in &safe {
                let r = rows.binary_search(&w.ix).unwrap();
                let lhs = v[r][w.ixi].norm_sqr();
                let rhs = s.at(*w, *z);
                err = err.max((lhs - rhs.re).abs().max(rhs.im.abs()));
                mx = mx.max(lhs);
            }
            (err, mx)
        })
        .collect();
    let err = results.iter().map(|r| r.0).fold(0.0, f64::max);
    let mx = results.iter().map(|r| r.1).fold(0.0, f64::max);
    Ok(Thm34Report {
        op: op.describe(),
        n: grid.n(),
        extent: grid.extent(),
        sup_error: err / mx,
        safe_region_fraction: safe.len() as f64 / pts.len() as f64,
        max_lhs: mx,
        pairs: safe.len() * zs.len(),
    })
}

/// Theorem check on the full lattice restricted to the default Wigner-safe region.
pub fn verify_thm34(op: &OperatorSpec, g: &SampledSignal, gamma: &SampledSignal, lat: &LatticeSpec) -> Result<f64> {
    let region = SafeRegion::wigner(&g.grid);
    Ok(verify_thm34_in(op, g, gamma, lat, &region, None)?.sup_error)
}

/// sup |k1(z,w) - h(z, A w)| / max |k1| with k1 the kernel of sigma^w A-hat and
/// h that of sigma^w; h is interpolated band-limitedly in its input pair.
pub fn genmeta_kernel_check(sigma: &SymbolField, a: &SymplecticMatrix) -> Result<f64> {
    let grid = sigma.grid;
    let n = grid.n();
    memory::check_kernel(n, 1)?;
    let k1 = wigner_kernel(&OperatorSpec::GeneralizedMetaplectic(sigma.clone(), *a), &grid)?;
    let h = wigner_kernel(&OperatorSpec::Weyl(sigma.clone()), &grid)?;
    let region = SafeRegion::wigner(&grid);
    let all: Vec<PhasePoint> = (0..n).flat_map(|i| (0..n).map(move |j| PhasePoint::new(i, j))).collect();
    let safe: Vec<PhasePoint> = all.iter().copied().filter(|p| region.contains_point(&grid, *p)).collect();
    let ws: Vec<PhasePoint> = safe
        .iter()
        .copied()
        .filter(|w| {
            let (x, xi) = w.coords(&grid);
            let c = a.apply([x, xi]);
            region.contains(c[0], c[1])
        })
        .collect();
    if ws.len() * 4 < safe.len() || ws.is_empty() {
        return Err(Error::BadInput(format!(
            "A w leaves the safe region for {} of {} lattice points",
            safe.len() - ws.len(),
            safe.len()
        )));
    }
    let m = n * n;
    let parts: Vec<(f64, f64)> = ws
        .par_iter()
        .map(|w| {
            let (x, xi) = w.coords(&grid);
            let c = a.apply([x, xi]);
            let wx = fft::interp_weights(n, (c[0] - grid.offset()) / grid.dx());
            let wk = fft::interp_weights(n, (c[1] + grid.nyquist()) / grid.dxi());
            let mut err: f64 = 0.0;
            let mut mx: f64 = 0.0;
            for z in &all {
                let zi = z.ix * n + z.ixi;
                let row = &h.values[zi * m..(zi + 1) * m];
                let mut acc = ZERO;
                for i in 0..n {
                    let s: Complex64 = row[i * n..(i + 1) * n].iter().zip(&wk).map(|(v, q)| v * *q).sum();
                    acc += s * wx[i];
                }
                let v1 = k1.at(*z, *w);
                err = err.max((v1 - acc).norm());
                mx = mx.max(v1.norm());
            }
            (err, mx)
        })
        .collect();
    let err = parts.iter().map(|p| p.0).fold(0.0, f64::max);
    let mx = parts.iter().map(|p| p.1).fold(0.0, f64::max);
    Ok(err / mx)
}

/// Mass statistics of a kernel about the graph z = chi(w).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Concentration {
    /// 1 - |signed mass at distance >= radius| / |total signed mass|.
    pub signed_fraction: f64,
    /// min over inputs w of the column mass sum_z k(z,w) dz, over its max.
    pub column_uniformity: f64,
    pub distribution_like: bool,
}

/// Distribution-like kernels (deltas on the graph of chi) carry almost all
/// signed mass within `radius` of the graph and spread it uniformly along it.
/// Inputs w are restricted to the Wigner-safe region with chi(w) also safe.
pub fn concentration(k: &WignerKernelTensor, chi: &SymplecticMatrix, radius: f64) -> Concentration {
    let grid = k.grid;
    let n = grid.n();
    let region = SafeRegion::wigner(&grid);
    let ws: Vec<PhasePoint> = (0..n)
        .flat_map(|i| (0..n).map(move |j| PhasePoint::new(i, j)))
        .filter(|w| {
            let (x, xi) = w.coords(&grid);
            let c = chi.apply([x, xi]);
            region.contains(x, xi) && region.contains(c[0], c[1])
        })
        .collect();
    let c = grid.cell();
    let cols: Vec<(Complex64, Complex64)> = ws
        .par_iter()
        .map(|w| {
            let (x, xi) = w.coords(&grid);
            let cw = chi.apply([x, xi]);
            let mut near = ZERO;
            let mut far = ZERO;
            for zx in 0..n {
                for zk in 0..n {
                    let v = k.at(PhasePoint::new(zx, zk), *w);
                    let d = (grid.x(zx) - cw[0]).hypot(grid.xi(zk) - cw[1]);
                    if d < radius {
                        near += v;
                    } else {
                        far += v;
                    }
                }
            }
            (near * c, far * c)
        })
        .collect();
    let near: Complex64 = cols.iter().map(|p| p.0).sum();
    let far: Complex64 = cols.iter().map(|p| p.1).sum();
    let total = near + far;
    let signed_fraction = if total.norm() > 0.0 { 1.0 - far.norm() / total.norm() } else { 0.0 };
    let masses: Vec<f64> = cols.iter().map(|p| (p.0 + p.1).norm()).collect();
    let mx = masses.iter().copied().fold(0.0, f64::max);
    let mn = masses.iter().copied().fold(f64::INFINITY, f64::min);
    let column_uniformity = if mx > 0.0 && !masses.is_empty() { mn / mx } else { 0.0 };
    Concentration {
        signed_fraction,
        column_uniformity,
        distribution_like: signed_fraction >= 0.95 && column_uniformity >= 0.5,
    }
}

/// Smoothed kernel with the Gaussian windows g = gamma = phi.
pub fn gaussian_smoothed(k: WignerKernelTensor) -> Result<WignerKernelTensor> {
    let phi = sample_gaussian(k.grid);
    smooth_kernel_owned(k, &phi, &phi)
}
