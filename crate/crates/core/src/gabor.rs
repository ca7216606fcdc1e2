//! Gabor matrices K(w, z) = <T pi(z) g, pi(w) gamma> on phase-space lattices
//! and shell-maximum power-law fits of off-diagonal decay about a canonical map.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridSpec, SampledSignal};
use crate::memory;
use crate::operators::{OperatorSpec, SymplecticMatrix};
use crate::tfr::{stft_rows, tf_shift, PhasePoint};

/// Centered sub-lattice of the phase grid: m points per axis with the given
/// index steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub step_x: usize,
    pub step_xi: usize,
    pub m_x: usize,
    pub m_xi: usize,
}

impl LatticeSpec {
    pub fn full(grid: &GridSpec) -> Self {
        LatticeSpec { step_x: 1, step_xi: 1, m_x: grid.n(), m_xi: grid.n() }
    }

    /// Symmetric lattice with the given steps covering |x| <= x_max, |xi| <= xi_max.
    pub fn covering(grid: &GridSpec, step_x: usize, step_xi: usize, x_max: f64, xi_max: f64) -> Self {
        let half = |r: f64, h: f64, cap: usize| (((r / h) + 1e-9).floor().max(0.0) as usize).min(cap);
        let hx = half(x_max, step_x as f64 * grid.dx(), (grid.n() / 2 - 1) / step_x);
        let hk = half(xi_max, step_xi as f64 * grid.dxi(), (grid.n() / 2 - 1) / step_xi);
        LatticeSpec { step_x, step_xi, m_x: 2 * hx + 1, m_xi: 2 * hk + 1 }
    }

    pub fn count(&self) -> usize {
        self.m_x * self.m_xi
    }

    /// Lattice points, row-major over (x, xi).
    pub fn points(&self, grid: &GridSpec) -> Result<Vec<PhasePoint>> {
        let n = grid.n() as i64;
        let idx = |i: usize, m: usize, step: usize| -> Result<usize> {
            let v = n / 2 + step as i64 * (i as i64 - (m / 2) as i64);
            if v < 0 || v >= n {
                return Err(Error::BadInput(format!("lattice ({m} points, step {step}) exceeds the grid")));
            }
            Ok(v as usize)
        };
        if self.step_x == 0 || self.step_xi == 0 || self.m_x == 0 || self.m_xi == 0 {
            return Err(Error::BadInput("empty lattice".into()));
        }
        let mut out = Vec::with_capacity(self.count());
        for i in 0..self.m_x {
            let ix = idx(i, self.m_x, self.step_x)?;
            for k in 0..self.m_xi {
                out.push(PhasePoint::new(ix, idx(k, self.m_xi, self.step_xi)?));
            }
        }
        Ok(out)
    }
}

/// Box |x| <= x_max, |xi| <= xi_max where periodization does not reach.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SafeRegion {
    pub x_max: f64,
    pub xi_max: f64,
}

impl SafeRegion {
    pub fn new(x_max: f64, xi_max: f64) -> Self {
        SafeRegion { x_max: x_max.max(0.0), xi_max: xi_max.max(0.0) }
    }
    pub fn full(grid: &GridSpec) -> Self {
        Self::new(0.5 * grid.extent(), grid.nyquist())
    }
    /// Room for a unit-scale Gaussian window around each point.
    pub fn gabor(grid: &GridSpec) -> Self {
        Self::new(0.5 * grid.extent() - 2.5, grid.nyquist() - 2.5)
    }
    /// Half box minus a unit margin: where lattice Wigner sums are resolved.
    pub fn wigner(grid: &GridSpec) -> Self {
        Self::wigner_with_margin(grid, 1.0)
    }
    pub fn wigner_with_margin(grid: &GridSpec, margin: f64) -> Self {
        Self::new(0.25 * grid.extent() - margin, 0.5 * grid.nyquist() - margin)
    }
    /// Raw and smoothed Wigner kernels away from the wrap seam.
    pub fn kernel(grid: &GridSpec) -> Self {
        Self::new(0.5 * grid.extent() - 1.5, grid.nyquist() - 1.5)
    }
    #[inline]
    pub fn contains(&self, x: f64, xi: f64) -> bool {
        x.abs() <= self.x_max + 1e-9 && xi.abs() <= self.xi_max + 1e-9
    }
    pub fn contains_point(&self, grid: &GridSpec, p: PhasePoint) -> bool {
        let (x, xi) = p.coords(grid);
        self.contains(x, xi)
    }
}

/// K(w, z) over lattice pairs; index 0 = w (output), index 1 = z (input).
#[derive(Debug, Clone, PartialEq)]
pub struct GaborMatrixTensor {
    pub grid: GridSpec,
    pub lattice: LatticeSpec,
    pub points: Vec<PhasePoint>,
    pub values: Vec<Complex64>,
    /// Pairs are trusted only with both points (and chi z) inside.
    pub region: SafeRegion,
    /// Inputs z whose wave packet stays inside `region` through every stage
    /// of the operator.
    pub trusted_inputs: Vec<bool>,
}

impl GaborMatrixTensor {
    pub fn size(&self) -> usize {
        self.points.len()
    }
    #[inline]
    pub fn at(&self, w: usize, z: usize) -> Complex64 {
        self.values[w * self.points.len() + z]
    }
    pub fn coords(&self) -> Vec<[f64; 2]> {
        self.points.iter().map(|p| {
            let (x, xi) = p.coords(&self.grid);
            [x, xi]
        }).collect()
    }

    /// Tensor built from a closed form on lattice coordinates (w, z).
    pub fn synthetic(grid: GridSpec, lattice: LatticeSpec, f: impl Fn([f64; 2], [f64; 2]) -> Complex64 + Sync) -> Result<Self> {
        let points = lattice.points(&grid)?;
        let m = points.len();
        check_gabor_size(m)?;
        let c: Vec<[f64; 2]> = points.iter().map(|p| {
            let (x, xi) = p.coords(&grid);
            [x, xi]
        }).collect();
        let mut values = vec![Complex64::new(0.0, 0.0); m * m];
        values.par_chunks_mut(m).enumerate().for_each(|(w, row)| {
            for (z, v) in row.iter_mut().enumerate() {
                *v = f(c[w], c[z]);
            }
        });
        Ok(GaborMatrixTensor { grid, lattice, points, values, region: SafeRegion::full(&grid), trusted_inputs: vec![true; m] })
    }
}

fn check_gabor_size(m: usize) -> Result<()> {
    let entries = m.saturating_mul(m);
    if entries > memory::MAX_GABOR_ENTRIES {
        return Err(Error::MemoryCap { needed_mb: entries as f64 * 16.0 / 1048576.0, cap_mb: memory::cap_mb() });
    }
    memory::check_bytes(entries as f64 * 16.0)
}

/// One operator application per z, then one STFT restricted to the lattice rows.
pub fn gabor_matrix(op: &OperatorSpec, g: &SampledSignal, gamma: &SampledSignal, lat: &LatticeSpec) -> Result<GaborMatrixTensor> {
    let grid = g.grid;
    grid.ensure_same(&gamma.grid)?;
    g.warn_if_not_localized("gabor_matrix window g");
    gamma.warn_if_not_localized("gabor_matrix window gamma");
    let points = lat.points(&grid)?;
    let m = points.len();
    check_gabor_size(m)?;
    let prepared = op.prepare(&grid)?;
    let mut rows: Vec<usize> = points.iter().map(|p| p.ix).collect();
    rows.sort_unstable();
    rows.dedup();
    let row_of: Vec<usize> = points.iter().map(|p| rows.binary_search(&p.ix).unwrap()).collect();
    let cols: Vec<Vec<Complex64>> = points
        .par_iter()
        .map(|z| {
            let tz = prepared.apply(&tf_shift(g, *z));
            let v = stft_rows(&tz, gamma, &rows).expect("grids match");
            points.iter().zip(&row_of).map(|(w, &r)| v[r][w.ixi]).collect()
        })
        .collect();
    let mut values = vec![Complex64::new(0.0, 0.0); m * m];
    for (z, col) in cols.iter().enumerate() {
        for (w, v) in col.iter().enumerate() {
            values[w * m + z] = *v;
        }
    }
    let region = SafeRegion::gabor(&grid);
    let trusted_inputs = points
        .iter()
        .map(|p| {
            let (x, xi) = p.coords(&grid);
            prepared.trajectory([x, xi]).iter().all(|q| region.contains(q[0], q[1]))
        })
        .collect();
    Ok(GaborMatrixTensor { grid, lattice: *lat, points, values, region, trusted_inputs })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShellConfig {
    pub r_min: f64,
    /// Defaults to 0.4 x the lattice extent.
    pub r_max: Option<f64>,
    pub shells: usize,
    pub min_samples: usize,
    /// Shells whose maximum falls below floor x global max are dropped.
    pub floor: f64,
}

impl Default for ShellConfig {
    fn default() -> Self {
        ShellConfig { r_min: 1.0, r_max: None, shells: 10, min_samples: 8, floor: 1e-6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Shell {
    /// Distance of the maximizing pair.
    pub r: f64,
    #[serde(rename = "M")]
    pub m: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub exponent: f64,
    pub constant: f64,
    pub residual: f64,
    pub superpolynomial: bool,
    pub r_range: (f64, f64),
    pub shell_count: usize,
    pub shells: Vec<Shell>,
}

impl DecayFit {
    pub fn write_shells_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "r,M,count")?;
        for s in &self.shells {
            writeln!(w, "{},{:e},{}", s.r, s.m, s.count)?;
        }
        Ok(())
    }
}

/// Pairs (out, in) with magnitudes, restricted to `region`; the decay variable
/// is |out - chi(in)|.
pub struct PairSource<'a, F: Fn(usize, usize) -> f64 + Sync> {
    pub out_pts: &'a [[f64; 2]],
    pub in_pts: &'a [[f64; 2]],
    pub mag: F,
    pub region: SafeRegion,
    /// Optional per-input mask; inputs marked false are skipped.
    pub in_ok: Option<&'a [bool]>,
}

#[derive(Clone)]
struct ShellAcc {
    max: Vec<f64>,
    arg_r: Vec<f64>,
    count: Vec<usize>,
    global: f64,
}

impl ShellAcc {
    fn new(s: usize) -> Self {
        ShellAcc { max: vec![0.0; s], arg_r: vec![0.0; s], count: vec![0; s], global: 0.0 }
    }
    fn merge(mut self, o: ShellAcc) -> Self {
        for i in 0..self.max.len() {
            if o.max[i] > self.max[i] {
                self.max[i] = o.max[i];
                self.arg_r[i] = o.arg_r[i];
            }
            self.count[i] += o.count[i];
        }
        self.global = self.global.max(o.global);
        self
    }
}

fn span(pts: &[[f64; 2]], region: &SafeRegion) -> f64 {
    let inside: Vec<&[f64; 2]> = pts.iter().filter(|p| region.contains(p[0], p[1])).collect();
    let ext = |k: usize| {
        let lo = inside.iter().map(|p| p[k]).fold(f64::INFINITY, f64::min);
        let hi = inside.iter().map(|p| p[k]).fold(f64::NEG_INFINITY, f64::max);
        (hi - lo).max(0.0)
    };
    if inside.is_empty() {
        0.0
    } else {
        ext(0).max(ext(1))
    }
}

/// Shell-maximum log-log fit of |K| against <|out - chi(in)|>.
pub fn decay_fit_pairs<F: Fn(usize, usize) -> f64 + Sync>(
    src: &PairSource<'_, F>,
    chi: &SymplecticMatrix,
    cfg: &ShellConfig,
) -> Result<DecayFit> {
    if !(cfg.r_min >= 1.0) {
        return Err(Error::BadInput(format!("r_min must be >= 1, got {}", cfg.r_min)));
    }
    let r_max = cfg.r_max.unwrap_or(0.4 * span(src.out_pts, &src.region));
    if !(r_max > cfg.r_min) || cfg.shells < 4 {
        return Err(Error::DegenerateFit(format!("shell range [{}, {}) with {} shells", cfg.r_min, r_max, cfg.shells)));
    }
    let s = cfg.shells;
    let (l0, l1) = (cfg.r_min.ln(), r_max.ln());
    let region = src.region;
    let ins: Vec<Option<[f64; 2]>> = src
        .in_pts
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let c = chi.apply(*p);
            let ok = src.in_ok.is_none_or(|m| m[i]);
            (ok && region.contains(p[0], p[1]) && region.contains(c[0], c[1])).then_some(c)
        })
        .collect();
    let acc = (0..src.out_pts.len())
        .into_par_iter()
        .fold(
            || ShellAcc::new(s),
            |mut acc, o| {
                let p = src.out_pts[o];
                if !region.contains(p[0], p[1]) {
                    return acc;
                }
                for (i, c) in ins.iter().enumerate() {
                    let Some(c) = c else { continue };
                    let m = (src.mag)(o, i);
                    acc.global = acc.global.max(m);
                    let r = (p[0] - c[0]).hypot(p[1] - c[1]);
                    if r < cfg.r_min || r >= r_max {
                        continue;
                    }
                    let j = (((r.ln() - l0) / (l1 - l0)) * s as f64).floor() as usize;
                    let j = j.min(s - 1);
                    acc.count[j] += 1;
                    if m > acc.max[j] {
                        acc.max[j] = m;
                        acc.arg_r[j] = r;
                    }
                }
                acc
            },
        )
        .reduce(|| ShellAcc::new(s), ShellAcc::merge);
    if acc.count.iter().all(|&c| c == 0) {
        return Err(Error::DegenerateFit("all shells empty".into()));
    }
    let floor = cfg.floor * acc.global;
    let shells: Vec<Shell> = (0..s)
        .filter(|&j| acc.count[j] >= cfg.min_samples && acc.max[j] > 0.0 && acc.max[j] > floor)
        .map(|j| Shell { r: acc.arg_r[j], m: acc.max[j], count: acc.count[j] })
        .collect();
    fit_shells(shells, (cfg.r_min, r_max))
}

/// Least squares of log M on log <r>, plus the slope-drift test.
pub fn fit_shells(shells: Vec<Shell>, r_range: (f64, f64)) -> Result<DecayFit> {
    if shells.len() < 4 {
        return Err(Error::DegenerateFit(format!("{} populated shells (need 4)", shells.len())));
    }
    let xs: Vec<f64> = shells.iter().map(|s| 0.5 * (1.0 + s.r * s.r).ln()).collect();
    let ys: Vec<f64> = shells.iter().map(|s| s.m.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx <= 0.0 {
        return Err(Error::DegenerateFit("all shells at the same radius".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum::<f64>() / k).sqrt();
    Ok(DecayFit {
        exponent: -slope,
        constant: intercept.exp(),
        residual,
        superpolynomial: slope_drift(&xs, &ys),
        r_range,
        shell_count: shells.len(),
        shells,
    })
}

fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx > 0.0 { sxy / sxx } else { 0.0 }
}

/// Decay rate over the outer half of the shells exceeding the inner-half rate
/// by more than 25%.
fn slope_drift(xs: &[f64], ys: &[f64]) -> bool {
    let k = xs.len();
    let (a, b) = (k.div_ceil(2), k / 2);
    let inner = -ls_slope(&xs[..a], &ys[..a]);
    let outer = -ls_slope(&xs[b..], &ys[b..]);
    inner > 0.0 && outer > 1.25 * inner
}

/// Decay of |K(w, z)| about w = chi(z).
pub fn decay_fit(k: &GaborMatrixTensor, chi: &SymplecticMatrix, cfg: &ShellConfig) -> Result<DecayFit> {
    let c = k.coords();
    let m = k.size();
    let src = PairSource {
        out_pts: &c,
        in_pts: &c,
        mag: |w: usize, z: usize| k.values[w * m + z].norm(),
        region: k.region,
        in_ok: Some(&k.trusted_inputs),
    };
    decay_fit_pairs(&src, chi, cfg)
}

/// Smallest C with |K(w,z)| <= C <w - chi z>^{-s} over the trusted pairs.
pub fn class_constant(k: &GaborMatrixTensor, chi: &SymplecticMatrix, s: f64) -> f64 {
    let c = k.coords();
    let m = k.size();
    let region = k.region;
    (0..m)
        .into_par_iter()
        .filter(|&w| region.contains(c[w][0], c[w][1]))
        .map(|w| {
            let mut best: f64 = 0.0;
            for z in 0..m {
                let cz = chi.apply(c[z]);
                if !k.trusted_inputs[z] || !region.contains(c[z][0], c[z][1]) || !region.contains(cz[0], cz[1]) {
                    continue;
                }
                let r2 = (c[w][0] - cz[0]).powi(2) + (c[w][1] - cz[1]).powi(2);
                best = best.max(k.values[w * m + z].norm() * (1.0 + r2).powf(0.5 * s));
            }
            best
        })
        .reduce(|| 0.0, f64::max)
}

/// argmax over w of |K(w, z)| for each z, as lattice indices.
pub fn argmax_w(k: &GaborMatrixTensor) -> Vec<usize> {
    let m = k.size();
    (0..m)
        .map(|z| {
            (0..m)
                .max_by(|&a, &b| k.values[a * m + z].norm().total_cmp(&k.values[b * m + z].norm()))
                .unwrap()
        })
        .collect()
}
