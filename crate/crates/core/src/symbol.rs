//! Lattice estimates of the symbol norms S_w = M^{inf,1} and
//! S^s_w = M^{inf,inf}_{1 (x) v_s}, polynomial weights, and the weight
//! convolution bound <.>^{-N} * <.>^{-N} <= C <.>^{-N}.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::{self, sign};
use crate::grid::{make_grid, GridSpec};
use crate::memory;
use crate::operators::SymbolField;

/// v_s(z) = (1 + |z|^2)^{s/2}.
pub fn weight_vs(z: &[f64], s: f64) -> f64 {
    (1.0 + z.iter().map(|v| v * v).sum::<f64>()).powf(0.5 * s)
}

/// sup over z of |V_G sigma(z, zeta)| for every zeta on the dual lattice,
/// with G(x, xi) = 2^{1/2} exp(-2 pi (x^2 + xi^2)).
///
/// zeta = (zeta_1, zeta_2) has spacings (1/L, dx): the dual of the (x, xi) axes.
#[derive(Debug, Clone, PartialEq)]
pub struct StftSweep {
    pub grid: GridSpec,
    pub sup_by_zeta: Vec<f64>,
}

impl StftSweep {
    pub fn zeta(&self, k1: usize, k2: usize) -> [f64; 2] {
        let n = self.grid.n();
        let h = (n / 2) as f64;
        [(k1 as f64 - h) / self.grid.extent(), (k2 as f64 - h) * self.grid.dx()]
    }
    pub fn dzeta(&self) -> f64 {
        self.grid.dx() / self.grid.extent()
    }
}

pub fn stft_sweep(sigma: &SymbolField) -> Result<StftSweep> {
    let grid = sigma.grid;
    let n = grid.n();
    if n > memory::MAX_KERNEL_N {
        return Err(Error::MemoryCap { needed_mb: (n as f64).powi(4) * 16.0 / 1048576.0, cap_mb: memory::cap_mb() });
    }
    let m = n * n;
    let (lx, lxi) = (grid.extent(), n as f64 * grid.dxi());
    let wrapd = |d: f64, period: f64| d - period * (d / period).round();
    let gw = |u: f64, v: f64| 2f64.sqrt() * (-2.0 * std::f64::consts::PI * (u * u + v * v)).exp();
    let cell = grid.cell();
    let plan = fft::plan(n, false);
    let zs: Vec<(usize, usize)> = (0..n).flat_map(|a| (0..n).map(move |b| (a, b))).collect();
    let sup = zs
        .par_iter()
        .fold(
            || vec![0.0f64; m],
            |mut acc, &(za, zb)| {
                let (zx, zxi) = (grid.x(za), grid.xi(zb));
                let mut buf = vec![Complex64::new(0.0, 0.0); m];
                for a in 0..n {
                    let gx = wrapd(grid.x(a) - zx, lx);
                    for b in 0..n {
                        let g = gw(gx, wrapd(grid.xi(b) - zxi, lxi));
                        buf[a * n + b] = sigma.values[a * n + b] * (g * sign(a + b));
                    }
                }
                for row in buf.chunks_mut(n) {
                    plan.process(row);
                }
                let mut col = vec![Complex64::new(0.0, 0.0); n];
                for b in 0..n {
                    for a in 0..n {
                        col[a] = buf[a * n + b];
                    }
                    plan.process(&mut col);
                    for a in 0..n {
                        let v = col[a].norm() * cell;
                        let s = &mut acc[a * n + b];
                        if v > *s {
                            *s = v;
                        }
                    }
                }
                acc
            },
        )
        .reduce(|| vec![0.0; m], |a, b| a.iter().zip(&b).map(|(x, y)| x.max(*y)).collect());
    Ok(StftSweep { grid, sup_by_zeta: sup })
}

impl StftSweep {
    /// max over zeta of sup_z |V_G sigma| v_s(zeta).
    pub fn norm_ssw(&self, s: f64) -> f64 {
        let n = self.grid.n();
        (0..n * n).map(|i| self.sup_by_zeta[i] * weight_vs(&self.zeta(i / n, i % n), s)).fold(0.0, f64::max)
    }
    /// sum over zeta of sup_z |V_G sigma| dzeta.
    pub fn norm_sw(&self) -> f64 {
        self.sup_by_zeta.iter().sum::<f64>() * self.dzeta()
    }
}

/// Lattice estimate (from below) of the S^s_w norm.
#[allow(non_snake_case)]
pub fn norm_Ssw(sigma: &SymbolField, s: f64) -> Result<f64> {
    if !s.is_finite() || s < 0.0 {
        return Err(Error::BadInput(format!("weight order s = {s}")));
    }
    Ok(stft_sweep(sigma)?.norm_ssw(s))
}

/// Lattice estimate of the Sjostrand-class norm.
#[allow(non_snake_case)]
pub fn norm_Sw(sigma: &SymbolField) -> Result<f64> {
    Ok(stft_sweep(sigma)?.norm_sw())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormType {
    #[serde(rename = "S_w")]
    Sw,
    #[serde(rename = "S^s_w")]
    Ssw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolNormReport {
    pub norm_type: NormType,
    pub s: f64,
    /// Lattice estimate at n.
    pub value: f64,
    pub n: usize,
    pub refinement_n: usize,
    pub refinement_value: f64,
    pub stable: bool,
    pub estimate: String,
}

/// Norm at n and at 3n/2 (on the same extent, or self-dual grids when
/// `extent` is None); stable when they agree to 2%.
pub fn symbol_norm_report(
    norm: NormType,
    s: f64,
    n: usize,
    extent: Option<f64>,
    symbol: impl Fn(&GridSpec) -> Result<SymbolField>,
) -> Result<SymbolNormReport> {
    let eval = |n: usize| -> Result<f64> {
        let sw = stft_sweep(&symbol(&make_grid(n, extent.unwrap_or((n as f64).sqrt()))?)?)?;
        Ok(match norm {
            NormType::Sw => sw.norm_sw(),
            NormType::Ssw => sw.norm_ssw(s),
        })
    };
    let n2 = (3 * n / 2 + 1) & !1;
    let value = eval(n)?;
    let refinement_value = eval(n2)?;
    let scale = value.abs().max(refinement_value.abs());
    Ok(SymbolNormReport {
        norm_type: norm,
        s,
        value,
        n,
        refinement_n: n2,
        refinement_value,
        stable: scale == 0.0 || (value - refinement_value).abs() <= 0.02 * scale,
        estimate: "lattice estimate".into(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightConvolutionReport {
    #[serde(rename = "N")]
    pub order: f64,
    /// sup_z (<.>^{-N} * <.>^{-N})(z) <z>^N at the finest resolution.
    pub constant: f64,
    /// Same sup over |z| <= radius / 2 and over |z| > radius / 2.
    pub inner_sup: f64,
    pub outer_sup: f64,
    pub radius: f64,
    /// (step, constant) per resolution, coarse to fine.
    pub resolutions: Vec<(f64, f64)>,
    /// Largest relative change between successive resolutions.
    pub drift: f64,
    pub stable: bool,
    pub bounded: bool,
}

/// Quadrature of the weight convolution on a square of half-width `reach`
/// with step h, evaluated at z on a lattice of spacing `z_step` inside |z| <= radius.
fn weight_conv_sups(order: f64, h: f64, reach: f64, radius: f64, z_step: f64) -> Result<(f64, f64, f64)> {
    let ratio = z_step / h;
    if (ratio - ratio.round()).abs() > 1e-9 {
        return Err(Error::BadInput(format!("z step {z_step} is not a multiple of h = {h}")));
    }
    let zr = (radius / z_step).floor() as i64;
    let shift = ratio.round() as i64;
    let half = ((reach + radius) / h).ceil() as i64;
    let side = (2 * half + 1) as usize;
    memory::check_bytes((side * side) as f64 * 8.0)?;
    let table: Vec<f64> = (0..side * side)
        .map(|i| {
            let (a, b) = ((i / side) as i64 - half, (i % side) as i64 - half);
            (1.0 + h * h * (a * a + b * b) as f64).powf(-0.5 * order)
        })
        .collect();
    let inner = ((reach / h).ceil()) as i64;
    let zs: Vec<(i64, i64)> = (-zr..=zr).flat_map(|a| (-zr..=zr).map(move |b| (a, b))).filter(|(a, b)| a * a + b * b <= zr * zr).collect();
    let vals: Vec<(f64, f64)> = zs
        .par_iter()
        .map(|&(za, zb)| {
            let (oa, ob) = (za * shift, zb * shift);
            let mut acc = 0.0;
            for a in -inner..=inner {
                let ra = ((a + half) as usize) * side;
                let sa = ((a - oa + half) as usize) * side;
                for b in -inner..=inner {
                    acc += table[ra + (b + half) as usize] * table[sa + (b - ob + half) as usize];
                }
            }
            let z2 = z_step * z_step * (za * za + zb * zb) as f64;
            (z2.sqrt(), acc * h * h * (1.0 + z2).powf(0.5 * order))
        })
        .collect();
    let all = vals.iter().map(|v| v.1).fold(0.0, f64::max);
    let inner_sup = vals.iter().filter(|v| v.0 <= 0.5 * radius).map(|v| v.1).fold(0.0, f64::max);
    let outer_sup = vals.iter().filter(|v| v.0 > 0.5 * radius).map(|v| v.1).fold(0.0, f64::max);
    Ok((all, inner_sup, outer_sup))
}

/// Certified constant of <.>^{-N} * <.>^{-N} <= C <.>^{-N} in dimension 2,
/// at steps 1/2, 1/4, 1/8 on a square of half-width 64, z on a lattice of
/// spacing radius/16 in |z| <= radius.
pub fn weight_convolution_check(order: f64, radius: f64) -> Result<WeightConvolutionReport> {
    if !order.is_finite() || order <= 2.0 {
        return Err(Error::Hypothesis(format!("N = {order}: the weight convolution needs N > 2")));
    }
    if !(radius > 0.0) || (radius / 2.0).fract() != 0.0 {
        return Err(Error::BadInput(format!("radius {radius} must be a positive multiple of 2")));
    }
    let reach = 64.0;
    let z_step = radius / 16.0;
    let mut resolutions = Vec::new();
    let mut last = (0.0, 0.0, 0.0);
    for h in [0.5, 0.25, 0.125] {
        last = weight_conv_sups(order, h, reach, radius, z_step)?;
        resolutions.push((h, last.0));
    }
    let drift = resolutions.windows(2).map(|w| (w[1].1 - w[0].1).abs() / w[1].1).fold(0.0, f64::max);
    Ok(WeightConvolutionReport {
        order,
        constant: last.0,
        inner_sup: last.1,
        outer_sup: last.2,
        radius,
        resolutions,
        drift,
        stable: drift <= 0.02,
        bounded: last.2 <= 1.05 * last.1,
    })
}
