//! Class-membership experiments: decay of the Wigner kernel, the Gabor matrix
//! and the smoothed kernel about a linear canonical map, and the consistency
//! checks between the three.

use std::fmt::Write as _;

use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gabor::{decay_fit, decay_fit_pairs, gabor_matrix, DecayFit, GaborMatrixTensor, LatticeSpec, PairSource, SafeRegion, ShellConfig};
use crate::grid::{make_grid, sample_gaussian, GridSpec};
use crate::operators::{OperatorDesc, SymplecticMatrix};
use crate::wigner_kernel::{compare_thm34, concentration, smooth_kernel_owned, wigner_kernel, Concentration, WignerKernelTensor};

pub const INCLUSION_SLACK: f64 = 0.5;
pub const SMOOTHING_SLACK: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassConfig {
    /// Grid for the Wigner kernel (n <= 64).
    pub kernel_n: usize,
    /// None: self-dual extent sqrt(n).
    pub kernel_extent: Option<f64>,
    pub gabor_n: usize,
    pub gabor_extent: Option<f64>,
    /// Index step of the Gabor lattice on the Gabor grid.
    pub lattice_step: usize,
    pub gabor_shells: ShellConfig,
    pub kernel_shells: ShellConfig,
    pub smoothed_shells: ShellConfig,
    /// Graph distance for the mass-concentration statistic.
    pub concentration_radius: f64,
}

impl Default for ClassConfig {
    fn default() -> Self {
        let near = ShellConfig { r_max: Some(2.5), shells: 8, ..ShellConfig::default() };
        ClassConfig {
            kernel_n: 64,
            kernel_extent: None,
            gabor_n: 256,
            gabor_extent: None,
            lattice_step: 8,
            // Metaplectic factors with dilations leave a relative floor near 3e-6.
            gabor_shells: ShellConfig { floor: 1e-5, ..ShellConfig::default() },
            kernel_shells: near,
            smoothed_shells: ShellConfig { floor: 1e-5, ..near },
            concentration_radius: 2.0,
        }
    }
}

impl ClassConfig {
    pub fn kernel_grid(&self) -> Result<GridSpec> {
        make_grid(self.kernel_n, self.kernel_extent.unwrap_or((self.kernel_n as f64).sqrt()))
    }
    pub fn gabor_grid(&self) -> Result<GridSpec> {
        make_grid(self.gabor_n, self.gabor_extent.unwrap_or((self.gabor_n as f64).sqrt()))
    }
    pub fn gabor_lattice(&self, grid: &GridSpec) -> LatticeSpec {
        let r = SafeRegion::gabor(grid);
        LatticeSpec::covering(grid, self.lattice_step, self.lattice_step, r.x_max, r.xi_max)
    }
}

/// How the raw kernel decays about the graph of chi.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    Polynomial,
    Superpolynomial,
    DistributionLike,
    Unfit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InclusionStatus {
    Holds,
    /// Superpolynomial or distribution-like kernel: nothing to compare.
    Vacuous,
    /// Kernel exponent not above 2 = 2d.
    HypothesisNotMet,
    Violated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InclusionOutcome {
    pub status: InclusionStatus,
    pub ok: bool,
    pub kernel_exponent: Option<f64>,
    pub gabor_exponent: f64,
    pub gabor_superpolynomial: bool,
    /// gabor exponent - (kernel exponent / 2 - slack); absent without a
    /// kernel fit or when the Gabor decay is superpolynomial (unbounded margin).
    pub margin: Option<f64>,
}

pub fn inclusion_outcome(kind: KernelKind, kernel: Option<&DecayFit>, gabor: &DecayFit) -> InclusionOutcome {
    let kernel_exponent = kernel.map(|k| k.exponent);
    let margin = kernel_exponent.filter(|_| !gabor.superpolynomial).map(|n| gabor.exponent - (0.5 * n - INCLUSION_SLACK));
    let status = match (kind, kernel_exponent) {
        (KernelKind::Superpolynomial | KernelKind::DistributionLike, _) => InclusionStatus::Vacuous,
        (_, Some(n)) if n <= 2.0 + 1e-6 => InclusionStatus::HypothesisNotMet,
        (KernelKind::Polynomial, Some(_)) if gabor.superpolynomial => InclusionStatus::Holds,
        (KernelKind::Polynomial, Some(_)) if margin.is_some_and(|m| m >= 0.0) => InclusionStatus::Holds,
        (KernelKind::Polynomial, Some(_)) => InclusionStatus::Violated,
        _ => InclusionStatus::HypothesisNotMet,
    };
    InclusionOutcome {
        ok: status != InclusionStatus::Violated,
        status,
        kernel_exponent,
        gabor_exponent: gabor.exponent,
        gabor_superpolynomial: gabor.superpolynomial,
        margin,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothedOutcome {
    pub ok: bool,
    pub smoothed_exponent: f64,
    pub smoothed_superpolynomial: bool,
    /// Fitted Gabor exponent, an empirical order rather than a certified one.
    pub s_ref: f64,
    pub s_ref_kind: String,
    /// smoothed exponent - (2 s_ref - slack).
    pub margin: f64,
}

pub fn smoothed_outcome(smoothed: &DecayFit, gabor: &DecayFit) -> SmoothedOutcome {
    let margin = smoothed.exponent - (2.0 * gabor.exponent - SMOOTHING_SLACK);
    let ok = if gabor.superpolynomial { smoothed.superpolynomial } else { smoothed.superpolynomial || margin >= 0.0 };
    SmoothedOutcome {
        ok,
        smoothed_exponent: smoothed.exponent,
        smoothed_superpolynomial: smoothed.superpolynomial,
        s_ref: gabor.exponent,
        s_ref_kind: "empirical order".into(),
        margin,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub operator: String,
    pub chi: [[f64; 2]; 2],
    pub kernel_kind: KernelKind,
    pub concentration: Concentration,
    /// |k(z,w)| about z = chi w; absent when no shell fit is possible.
    pub kernel_fit: Option<DecayFit>,
    /// |K(w,z)| about w = chi z.
    pub gabor_fit: DecayFit,
    /// Smoothed kernel about output = chi(input).
    pub smoothed_fit: DecayFit,
    pub inclusion: InclusionOutcome,
    pub inclusion_ok: bool,
    pub smoothed: SmoothedOutcome,
    pub thm34_error: f64,
}

/// All grid points, row-major over (x, xi).
pub fn grid_points(grid: &GridSpec) -> Vec<[f64; 2]> {
    let n = grid.n();
    (0..n).flat_map(|i| (0..n).map(move |j| [grid.x(i), grid.xi(j)])).collect()
}

/// Fit of |k| over (output, input) pairs about output = chi(input).
pub fn kernel_decay_fit(k: &WignerKernelTensor, chi: &SymplecticMatrix, region: SafeRegion, cfg: &ShellConfig) -> Result<DecayFit> {
    let pts = grid_points(&k.grid);
    let m = pts.len();
    let src = PairSource { out_pts: &pts, in_pts: &pts, mag: |o: usize, i: usize| k.values[o * m + i].norm(), region, in_ok: None };
    decay_fit_pairs(&src, chi, cfg)
}

fn kernel_kind(conc: &Concentration, fit: &Result<DecayFit>) -> KernelKind {
    if conc.distribution_like {
        KernelKind::DistributionLike
    } else {
        match fit {
            Ok(f) if f.superpolynomial => KernelKind::Superpolynomial,
            Ok(_) => KernelKind::Polynomial,
            Err(_) => KernelKind::Unfit,
        }
    }
}

struct KernelSide {
    kind: KernelKind,
    conc: Concentration,
    fit: Option<DecayFit>,
}

fn kernel_side(k: &WignerKernelTensor, chi: &SymplecticMatrix, cfg: &ClassConfig) -> Result<KernelSide> {
    let conc = concentration(k, chi, cfg.concentration_radius);
    let fit = kernel_decay_fit(k, chi, SafeRegion::wigner(&k.grid), &cfg.kernel_shells);
    if let Err(e) = &fit {
        if !matches!(e, Error::DegenerateFit(_)) {
            return Err(fit.unwrap_err());
        }
    }
    Ok(KernelSide { kind: kernel_kind(&conc, &fit), conc, fit: fit.ok() })
}

fn gabor_side(op: &OperatorDesc, chi: &SymplecticMatrix, cfg: &ClassConfig) -> Result<(GaborMatrixTensor, DecayFit)> {
    let grid = cfg.gabor_grid()?;
    let t = op.build(&grid)?;
    let phi = sample_gaussian(grid);
    let k = gabor_matrix(&t, &phi, &phi, &cfg.gabor_lattice(&grid))?;
    let fit = decay_fit(&k, chi, &cfg.gabor_shells)?;
    Ok((k, fit))
}

fn check_chi(chi: &SymplecticMatrix) -> Result<()> {
    SymplecticMatrix::new(chi.m).map(|_| ())
}

pub fn classify(op: &OperatorDesc, chi: &SymplecticMatrix, cfg: &ClassConfig) -> Result<ClassReport> {
    check_chi(chi)?;
    let grid = cfg.kernel_grid()?;
    let t = op.build(&grid)?;
    let (_, gabor_fit) = gabor_side(op, chi, cfg)?;
    let k = wigner_kernel(&t, &grid)?;
    let side = kernel_side(&k, chi, cfg)?;
    let phi = sample_gaussian(grid);
    let s = smooth_kernel_owned(k, &phi, &phi)?;
    let smoothed_fit = kernel_decay_fit(&s, chi, SafeRegion::wigner(&grid), &cfg.smoothed_shells)?;
    let thm = compare_thm34(&t, &s, &phi, &phi, &LatticeSpec::full(&grid), &SafeRegion::wigner(&grid), None)?;
    let inclusion = inclusion_outcome(side.kind, side.fit.as_ref(), &gabor_fit);
    let smoothed = smoothed_outcome(&smoothed_fit, &gabor_fit);
    Ok(ClassReport {
        operator: t.describe(),
        chi: chi.m,
        kernel_kind: side.kind,
        concentration: side.conc,
        kernel_fit: side.fit,
        inclusion_ok: inclusion.ok,
        inclusion,
        gabor_fit,
        smoothed_fit,
        smoothed,
        thm34_error: thm.sup_error,
    })
}

/// Kernel and Gabor fits only.
pub fn verify_inclusion(op: &OperatorDesc, chi: &SymplecticMatrix, cfg: &ClassConfig) -> Result<InclusionOutcome> {
    check_chi(chi)?;
    let grid = cfg.kernel_grid()?;
    let k = wigner_kernel(&op.build(&grid)?, &grid)?;
    let side = kernel_side(&k, chi, cfg)?;
    drop(k);
    let (_, gabor_fit) = gabor_side(op, chi, cfg)?;
    Ok(inclusion_outcome(side.kind, side.fit.as_ref(), &gabor_fit))
}

/// Smoothed-kernel decay against twice the Gabor decay.
pub fn verify_smoothed_decay(op: &OperatorDesc, chi: &SymplecticMatrix, cfg: &ClassConfig) -> Result<SmoothedOutcome> {
    check_chi(chi)?;
    let grid = cfg.kernel_grid()?;
    let k = wigner_kernel(&op.build(&grid)?, &grid)?;
    let phi = sample_gaussian(grid);
    let s = smooth_kernel_owned(k, &phi, &phi)?;
    let smoothed_fit = kernel_decay_fit(&s, chi, SafeRegion::wigner(&grid), &cfg.smoothed_shells)?;
    drop(s);
    let (_, gabor_fit) = gabor_side(op, chi, cfg)?;
    Ok(smoothed_outcome(&smoothed_fit, &gabor_fit))
}

/// Gabor tensor with |K(w,z)| = <w - chi z>^{-N} (1 + noise u), u uniform in
/// [-1, 1], and uniformly random phases.
pub fn planted_gabor(grid: GridSpec, lat: LatticeSpec, chi: &SymplecticMatrix, order: f64, noise: f64, seed: u64) -> Result<GaborMatrixTensor> {
    let mut k = GaborMatrixTensor::synthetic(grid, lat, |w, z| {
        let d = chi.apply(z);
        let r2 = (w[0] - d[0]).powi(2) + (w[1] - d[1]).powi(2);
        Complex64::new((1.0 + r2).powf(-0.5 * order), 0.0)
    })?;
    let mut rng = StdRng::seed_from_u64(seed);
    for v in k.values.iter_mut() {
        let u: f64 = rng.gen_range(-1.0..=1.0);
        let ph: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        *v = Complex64::from_polar(v.re * (1.0 + noise * u), ph);
    }
    Ok(k)
}

/// Synthetic operator with kernel k(z,w) = <z - chi w>^{-N} on a coarse
/// 4-D lattice, and its Gabor magnitude via the Gaussian smoothing
/// |K| = sqrt(k * (W phi (x) W phi)).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedKernel {
    /// Points per phase-space axis.
    pub m: usize,
    pub spacing: f64,
    pub order: f64,
    pub chi: [[f64; 2]; 2],
}

impl PlantedKernel {
    pub fn new(order: f64, chi: &SymplecticMatrix) -> Self {
        PlantedKernel { m: 48, spacing: 0.35, order, chi: chi.m }
    }

    pub fn points(&self) -> Vec<[f64; 2]> {
        let c: Vec<f64> = (0..self.m).map(|i| (i as f64 - (self.m / 2) as f64) * self.spacing).collect();
        c.iter().flat_map(|&x| c.iter().map(move |&xi| [x, xi])).collect()
    }

    /// Pairs whose smoothing is unaffected by the lattice edge.
    pub fn region(&self) -> SafeRegion {
        let half = (self.m / 2 - 1) as f64 * self.spacing - 1.5;
        SafeRegion::new(half, half)
    }

    pub fn kernel(&self) -> Result<Vec<f64>> {
        let chi = SymplecticMatrix::new(self.chi)?;
        let p = self.points();
        let q = p.len();
        let mut k = vec![0.0; q * q];
        k.par_chunks_mut(q).enumerate().for_each(|(o, row)| {
            for (i, v) in row.iter_mut().enumerate() {
                let c = chi.apply(p[i]);
                *v = (1.0 + (p[o][0] - c[0]).powi(2) + (p[o][1] - c[1]).powi(2)).powf(-0.5 * self.order);
            }
        });
        Ok(k)
    }

    /// sum_{u,v} k(u,v) W phi(u - w) W phi(v - z) h^4, one Gaussian pass per axis.
    pub fn smoothed(&self, k: &[f64]) -> Vec<f64> {
        let m = self.m;
        let h = self.spacing;
        let reach = (2.6 / h).ceil() as i64;
        let taps: Vec<f64> = (-reach..=reach).map(|d| (-2.0 * std::f64::consts::PI * (d as f64 * h).powi(2)).exp()).collect();
        let mut cur = k.to_vec();
        for axis in 0..4 {
            let stride = m.pow(3 - axis as u32);
            let mut next = vec![0.0; cur.len()];
            next.par_chunks_mut(stride * m).zip(cur.par_chunks(stride * m)).for_each(|(out, inp)| {
                for s in 0..stride {
                    for i in 0..m {
                        let mut acc = 0.0;
                        for (t, wgt) in taps.iter().enumerate() {
                            let j = i as i64 + t as i64 - reach;
                            if j >= 0 && (j as usize) < m {
                                acc += wgt * inp[j as usize * stride + s];
                            }
                        }
                        out[i * stride + s] = acc;
                    }
                }
            });
            cur = next;
        }
        // (W phi (x) W phi)(u, v) = 2 exp(-2 pi (|u|^2 + |v|^2))
        let c = 2.0 * h.powi(4);
        cur.iter_mut().for_each(|v| *v *= c);
        cur
    }

    pub fn fits(&self, kernel_cfg: &ShellConfig, gabor_cfg: &ShellConfig) -> Result<(DecayFit, DecayFit)> {
        let chi = SymplecticMatrix::new(self.chi)?;
        let p = self.points();
        let q = p.len();
        let k = self.kernel()?;
        let s = self.smoothed(&k);
        let region = self.region();
        let kf = decay_fit_pairs(&PairSource { out_pts: &p, in_pts: &p, mag: |o: usize, i: usize| k[o * q + i], region, in_ok: None }, &chi, kernel_cfg)?;
        let gf = decay_fit_pairs(&PairSource { out_pts: &p, in_pts: &p, mag: |o: usize, i: usize| s[o * q + i].max(0.0).sqrt(), region, in_ok: None }, &chi, gabor_cfg)?;
        Ok((kf, gf))
    }

    /// Shells start at 1.5, beyond the reach of the smoothing Gaussian.
    pub fn inclusion(&self) -> Result<InclusionOutcome> {
        let cfg = ShellConfig { r_min: 1.5, ..ShellConfig::default() };
        let (kf, gf) = self.fits(&cfg, &cfg)?;
        let kind = if kf.superpolynomial { KernelKind::Superpolynomial } else { KernelKind::Polynomial };
        Ok(inclusion_outcome(kind, Some(&kf), &gf))
    }
}

fn fmt_fit(f: Option<&DecayFit>) -> String {
    match f {
        None => "-".into(),
        Some(f) if f.superpolynomial => format!("{:.2} (superpoly)", f.exponent),
        Some(f) => format!("{:.2}", f.exponent),
    }
}

/// Per-operator summary table.
pub fn render_markdown(reports: &[ClassReport]) -> String {
    let mut s = String::from("| operator | N_kernel | N_gabor | N_smoothed | inclusion margin | thm34 error |\n|---|---|---|---|---|---|\n");
    for r in reports {
        let kernel = match r.kernel_kind {
            KernelKind::DistributionLike => "distribution-like".to_string(),
            _ => fmt_fit(r.kernel_fit.as_ref()),
        };
        let margin = match (r.inclusion.status, r.inclusion.margin) {
            (InclusionStatus::Vacuous, _) => "vacuous".to_string(),
            (InclusionStatus::HypothesisNotMet, _) => "hypothesis not met".to_string(),
            (_, Some(m)) => format!("{m:.2}"),
            (InclusionStatus::Holds, None) => "unbounded (superpoly)".to_string(),
            (_, None) => "-".to_string(),
        };
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} | {} | {:.2e} |",
            r.operator,
            kernel,
            fmt_fit(Some(&r.gabor_fit)),
            fmt_fit(Some(&r.smoothed_fit)),
            margin,
            r.thm34_error
        );
    }
    s
}
