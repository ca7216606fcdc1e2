//! Operators on sampled signals: Weyl quantization, metaplectic operators,
//! type-I FIOs with quadratic phase, kernels and compositions.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft;
use crate::grid::{dft, GridSpec, SampledSignal};
use crate::tensor::ComplexTensor;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Lower bound on |b| for a quadratic phase (nondegenerate mixed Hessian).
pub const DELTA0: f64 = 1e-6;

/// 2x2 real matrix with A^T J A = J, J = [[0,1],[-1,0]].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymplecticMatrix {
    pub m: [[f64; 2]; 2],
}

fn symplectic_residual(m: &[[f64; 2]; 2]) -> f64 {
    // for 2x2 matrices A^T J A = det(A) J
    (m[0][0] * m[1][1] - m[0][1] * m[1][0] - 1.0).abs()
}

impl SymplecticMatrix {
    /// Accepts matrices symplectic to 1e-10 (to admit decimal input).
    pub fn new(m: [[f64; 2]; 2]) -> Result<Self> {
        if m.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::BadInput("non-finite matrix entry".into()));
        }
        let r = symplectic_residual(&m);
        if r > 1e-10 {
            return Err(Error::NotSymplectic(r));
        }
        Ok(SymplecticMatrix { m })
    }
    pub fn identity() -> Self {
        SymplecticMatrix { m: [[1.0, 0.0], [0.0, 1.0]] }
    }
    /// J = [[0,1],[-1,0]], the matrix of the Fourier transform.
    pub fn j() -> Self {
        SymplecticMatrix { m: [[0.0, 1.0], [-1.0, 0.0]] }
    }
    /// [[cos, sin], [-sin, cos]]; theta = pi/2 gives J.
    pub fn rotation(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        SymplecticMatrix { m: [[c, s], [-s, c]] }
    }
    /// [[1,0],[m,1]].
    pub fn shear(m: f64) -> Self {
        SymplecticMatrix { m: [[1.0, 0.0], [m, 1.0]] }
    }
    pub fn dilation(l: f64) -> Self {
        SymplecticMatrix { m: [[l, 0.0], [0.0, 1.0 / l]] }
    }
    pub fn residual(&self) -> f64 {
        symplectic_residual(&self.m)
    }
    pub fn apply(&self, z: [f64; 2]) -> [f64; 2] {
        [self.m[0][0] * z[0] + self.m[0][1] * z[1], self.m[1][0] * z[0] + self.m[1][1] * z[1]]
    }
    pub fn inverse(&self) -> Self {
        let [[a, b], [c, d]] = self.m;
        SymplecticMatrix { m: [[d, -b], [-c, a]] }
    }
    pub fn mul(&self, o: &SymplecticMatrix) -> Self {
        let a = &self.m;
        let b = &o.m;
        let mut m = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                m[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        SymplecticMatrix { m }
    }
    pub fn max_diff(&self, o: &SymplecticMatrix) -> f64 {
        let mut d: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                d = d.max((self.m[i][j] - o.m[i][j]).abs());
            }
        }
        d
    }
}

/// Phi(x, eta) = a x^2/2 + b x eta + c eta^2/2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticPhase {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl QuadraticPhase {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        if !(b.abs() >= DELTA0) || !a.is_finite() || !c.is_finite() {
            return Err(Error::Hypothesis(format!("degenerate phase: |b| = {} < {DELTA0}", b.abs())));
        }
        Ok(QuadraticPhase { a, b, c })
    }
    pub fn eval(&self, x: f64, eta: f64) -> f64 {
        0.5 * self.a * x * x + self.b * x * eta + 0.5 * self.c * eta * eta
    }
}

/// Canonical map generated by Phi: solves y = b x + c eta, xi = a x + b eta
/// for (x, xi) as a linear function of (y, eta).
pub fn chi_from_phase(p: &QuadraticPhase) -> Result<SymplecticMatrix> {
    let QuadraticPhase { a, b, c } = *p;
    if !(b.abs() >= DELTA0) {
        return Err(Error::Hypothesis(format!("|b| = {} below {DELTA0}", b.abs())));
    }
    let m = [[1.0 / b, -c / b], [a / b, (b * b - a * c) / b]];
    let scale = m.iter().flatten().fold(1.0_f64, |s, v| s.max(v.abs()));
    let r = symplectic_residual(&m);
    if r > 1e-12 * scale * scale {
        return Err(Error::NotSymplectic(r));
    }
    Ok(SymplecticMatrix { m })
}

/// Quadratic generating phase of chi, when one exists (chi_11 != 0).
pub fn phase_from_chi(chi: &SymplecticMatrix) -> Result<QuadraticPhase> {
    let [[p, q], [r, _]] = chi.m;
    if p.abs() < 1e-12 {
        return Err(Error::Inadmissible("x does not depend on y (chi_11 = 0)".into()));
    }
    let b = 1.0 / p;
    if b.abs() < DELTA0 {
        return Err(Error::Inadmissible(format!("|b| = {} below {DELTA0}", b.abs())));
    }
    let phase = QuadraticPhase { a: r / p, b, c: -q / p };
    let back = chi_from_phase(&phase)?;
    let scale = chi.m.iter().flatten().fold(1.0_f64, |s, v| s.max(v.abs()));
    if back.max_diff(chi) > 1e-10 * scale {
        return Err(Error::Inadmissible("round trip does not reproduce chi".into()));
    }
    Ok(phase)
}

/// Complex field on the n x n (x, xi) grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolField {
    pub grid: GridSpec,
    pub values: Vec<Complex64>,
}

impl SymbolField {
    pub fn from_fn(grid: GridSpec, f: impl Fn(f64, f64) -> Complex64) -> Self {
        let n = grid.n();
        let mut values = Vec::with_capacity(n * n);
        for a in 0..n {
            for b in 0..n {
                values.push(f(grid.x(a), grid.xi(b)));
            }
        }
        SymbolField { grid, values }
    }
    /// exp(-pi (x^2 + xi^2)).
    pub fn gaussian(grid: GridSpec) -> Self {
        Self::from_fn(grid, |x, xi| Complex64::new((-PI * (x * x + xi * xi)).exp(), 0.0))
    }
    pub fn constant(grid: GridSpec, c: Complex64) -> Self {
        Self::from_fn(grid, |_, _| c)
    }
    pub fn from_tensor(grid: GridSpec, t: &ComplexTensor) -> Result<Self> {
        let n = grid.n();
        if t.dims != [n, n] {
            return Err(Error::Dimension(format!("symbol dims {:?}, grid n = {n}", t.dims)));
        }
        Ok(SymbolField { grid, values: t.values.clone() })
    }
    #[inline]
    pub fn at(&self, a: usize, b: usize) -> Complex64 {
        self.values[a * self.grid.n() + b]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum OperatorSpec {
    Identity,
    /// Kernel k_T with (Tf)(x_i) = dx sum_j k_T[i,j] f(x_j).
    KernelMatrix(ComplexTensor),
    Weyl(SymbolField),
    Metaplectic(SymplecticMatrix),
    TypeIFIO(QuadraticPhase, SymbolField),
    /// sigma^w composed with the metaplectic operator of the matrix.
    GeneralizedMetaplectic(SymbolField, SymplecticMatrix),
    /// Applied right to left.
    Composition(Vec<OperatorSpec>),
}

impl OperatorSpec {
    pub fn describe(&self) -> String {
        fn mat(m: &SymplecticMatrix) -> String {
            format!("[[{:.4},{:.4}],[{:.4},{:.4}]]", m.m[0][0], m.m[0][1], m.m[1][0], m.m[1][1])
        }
        match self {
            OperatorSpec::Identity => "identity".into(),
            OperatorSpec::KernelMatrix(t) => format!("kernel{:?}", t.dims),
            OperatorSpec::Weyl(_) => "weyl".into(),
            OperatorSpec::Metaplectic(m) => format!("metaplectic{}", mat(m)),
            OperatorSpec::TypeIFIO(p, _) => format!("fio1(a={},b={},c={})", p.a, p.b, p.c),
            OperatorSpec::GeneralizedMetaplectic(_, m) => format!("genmeta{}", mat(m)),
            OperatorSpec::Composition(ops) => {
                format!("compose({})", ops.iter().map(|o| o.describe()).collect::<Vec<_>>().join(","))
            }
        }
    }

    /// Precomputes per-operator tables so that repeated application is cheap.
    pub fn prepare(&self, grid: &GridSpec) -> Result<PreparedOp> {
        Ok(match self {
            OperatorSpec::Identity => PreparedOp::Identity,
            OperatorSpec::KernelMatrix(t) => {
                let n = grid.n();
                if t.dims != [n, n] {
                    return Err(Error::Dimension(format!("kernel dims {:?}, grid n = {n}", t.dims)));
                }
                PreparedOp::Matrix(t.values.clone())
            }
            OperatorSpec::Weyl(s) => {
                s.grid.ensure_same(grid)?;
                PreparedOp::Weyl(WeylTable::new(s))
            }
            OperatorSpec::Metaplectic(m) => PreparedOp::Metaplectic(factorize(m, grid)?),
            OperatorSpec::TypeIFIO(p, s) => {
                s.grid.ensure_same(grid)?;
                PreparedOp::Fio1(fio1_table(p, s), chi_from_phase(p)?)
            }
            OperatorSpec::GeneralizedMetaplectic(s, m) => {
                s.grid.ensure_same(grid)?;
                PreparedOp::Compose(vec![PreparedOp::Weyl(WeylTable::new(s)), PreparedOp::Metaplectic(factorize(m, grid)?)])
            }
            OperatorSpec::Composition(ops) => {
                PreparedOp::Compose(ops.iter().map(|o| o.prepare(grid)).collect::<Result<_>>()?)
            }
        })
    }
}

/// Elementary factors of a metaplectic operator, in application order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Generator {
    /// multiplication by exp(pi i m x^2)
    Chirp(f64),
    /// f(x/l)/sqrt|l|
    Dilate(f64),
    Fourier,
    InverseFourier,
}

impl Generator {
    /// The linear map the generator induces on phase space.
    pub fn phase_map(&self) -> SymplecticMatrix {
        let m = match *self {
            Generator::Chirp(m) => [[1.0, 0.0], [m, 1.0]],
            Generator::Dilate(l) => [[l, 0.0], [0.0, 1.0 / l]],
            Generator::Fourier => [[0.0, 1.0], [-1.0, 0.0]],
            Generator::InverseFourier => [[0.0, -1.0], [1.0, 0.0]],
        };
        SymplecticMatrix { m }
    }
}

#[derive(Debug, Clone)]
pub struct WeylTable {
    n: usize,
    dx: f64,
    /// G[u, d] = dxi sum_k sigma_up[u, k] exp(2 pi i d beta_k / n), u < 2n.
    g: Vec<Complex64>,
}

impl WeylTable {
    pub fn new(s: &SymbolField) -> Self {
        let grid = s.grid;
        let n = grid.n();
        let n2 = 2 * n;
        // upsample each xi-column along x
        let cols: Vec<Vec<Complex64>> = (0..n)
            .into_par_iter()
            .map(|k| fft::upsample2(&(0..n).map(|a| s.at(a, k)).collect::<Vec<_>>()))
            .collect();
        let inv = fft::plan(n, true);
        let dxi = grid.dxi();
        let mut g = vec![ZERO; n2 * n];
        g.par_chunks_mut(n).enumerate().for_each(|(u, row)| {
            for k in 0..n {
                row[k] = cols[k][u];
            }
            inv.process(row);
            for (d, v) in row.iter_mut().enumerate() {
                *v *= dxi * fft::sign(d);
            }
        });
        WeylTable { n, dx: grid.dx(), g }
    }

    /// k_T[i, j] on the circle: the lag i - j is wrapped into [-n/2, n/2) and
    /// the midpoint index 2j + lag taken mod 2n; the end lag n/2 is split
    /// evenly between its two representatives.
    #[inline]
    pub fn kernel(&self, i: usize, j: usize) -> Complex64 {
        let n = self.n as i64;
        let h = n / 2;
        let d = (i as i64 - j as i64 + h).rem_euclid(n) - h;
        let at = |lag: i64| self.g[((2 * j as i64 + lag).rem_euclid(2 * n) * n + lag.rem_euclid(n)) as usize];
        if d == -h {
            (at(-h) + at(h)) * 0.5
        } else {
            at(d)
        }
    }

    pub fn apply(&self, f: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        (0..n)
            .map(|i| {
                let s: Complex64 = (0..n).map(|j| self.kernel(i, j) * f[j]).sum();
                s * self.dx
            })
            .collect()
    }
}

fn fio1_table(p: &QuadraticPhase, s: &SymbolField) -> Vec<Complex64> {
    let grid = s.grid;
    let n = grid.n();
    let dxi = grid.dxi();
    let mut t = vec![ZERO; n * n];
    for i in 0..n {
        for k in 0..n {
            let ph = 2.0 * PI * p.eval(grid.x(i), grid.xi(k));
            t[i * n + k] = Complex64::from_polar(dxi, ph) * s.at(i, k);
        }
    }
    t
}

#[derive(Debug, Clone)]
pub enum PreparedOp {
    Identity,
    Matrix(Vec<Complex64>),
    Weyl(WeylTable),
    Metaplectic(Vec<Generator>),
    /// E[i, k] = dxi exp(2 pi i Phi(x_i, xi_k)) sigma(x_i, xi_k), applied to
    /// dft(f), with the canonical map of Phi.
    Fio1(Vec<Complex64>, SymplecticMatrix),
    /// Right to left.
    Compose(Vec<PreparedOp>),
}

impl PreparedOp {
    pub fn apply(&self, f: &SampledSignal) -> SampledSignal {
        let grid = f.grid;
        let n = grid.n();
        match self {
            PreparedOp::Identity => f.clone(),
            PreparedOp::Matrix(k) => {
                let dx = grid.dx();
                let samples = (0..n)
                    .map(|i| k[i * n..(i + 1) * n].iter().zip(&f.samples).map(|(a, b)| a * b).sum::<Complex64>() * dx)
                    .collect();
                SampledSignal { grid, samples, measure: false }
            }
            PreparedOp::Weyl(t) => SampledSignal { grid, samples: t.apply(&f.samples), measure: false },
            PreparedOp::Metaplectic(gens) => gens.iter().fold(f.clone(), |acc, g| apply_generator(*g, &acc)),
            PreparedOp::Fio1(t, _) => {
                let fh = dft(f);
                let samples = (0..n)
                    .map(|i| t[i * n..(i + 1) * n].iter().zip(&fh.samples).map(|(a, b)| a * b).sum())
                    .collect();
                SampledSignal { grid, samples, measure: false }
            }
            PreparedOp::Compose(ops) => ops.iter().rev().fold(f.clone(), |acc, op| op.apply(&acc)),
        }
    }

    /// Images of the phase-space point z after each stage that moves it, the
    /// last entry being the output location. A wave packet at z is handled
    /// without aliasing only while every image stays inside the grid box.
    /// Matrix and Weyl stages are taken to leave z in place.
    pub fn trajectory(&self, z: [f64; 2]) -> Vec<[f64; 2]> {
        let mut out = vec![z];
        self.push_trajectory(&mut out);
        out
    }

    fn push_trajectory(&self, out: &mut Vec<[f64; 2]>) {
        let last = *out.last().expect("trajectory starts at z");
        match self {
            PreparedOp::Identity | PreparedOp::Matrix(_) | PreparedOp::Weyl(_) => {}
            PreparedOp::Metaplectic(gens) => {
                let mut p = last;
                for g in gens {
                    p = g.phase_map().apply(p);
                    out.push(p);
                }
            }
            PreparedOp::Fio1(_, chi) => out.push(chi.apply(last)),
            PreparedOp::Compose(ops) => ops.iter().rev().for_each(|op| op.push_trajectory(out)),
        }
    }
}

/// Tf for any operator description.
pub fn apply(op: &OperatorSpec, f: &SampledSignal) -> Result<SampledSignal> {
    Ok(op.prepare(&f.grid)?.apply(f))
}

/// (sigma^w f)(x) = int int exp(2 pi i (x - y) xi) sigma((x + y)/2, xi) f(y) dy dxi.
pub fn weyl_apply(sigma: &SymbolField, f: &SampledSignal) -> Result<SampledSignal> {
    sigma.grid.ensure_same(&f.grid)?;
    Ok(SampledSignal { grid: f.grid, samples: WeylTable::new(sigma).apply(&f.samples), measure: false })
}

/// Tf(x) = sum_k dxi exp(2 pi i Phi(x, xi_k)) sigma(x, xi_k) fhat(xi_k).
pub fn fio_type1_apply(p: &QuadraticPhase, sigma: &SymbolField, f: &SampledSignal) -> Result<SampledSignal> {
    sigma.grid.ensure_same(&f.grid)?;
    Ok(PreparedOp::Fio1(fio1_table(p, sigma), chi_from_phase(p)?).apply(f))
}

/// The metaplectic operator of A, up to a unimodular constant.
pub fn metaplectic_apply(a: &SymplecticMatrix, f: &SampledSignal) -> Result<SampledSignal> {
    Ok(PreparedOp::Metaplectic(factorize(a, &f.grid)?).apply(f))
}

/// Largest chirp rate whose samples stay below Nyquist over the whole box.
pub fn chirp_budget(grid: &GridSpec) -> f64 {
    grid.n() as f64 / (grid.extent() * grid.extent())
}

const DILATION_LIMIT: f64 = 8.0;

/// Factors with b != 0: A = S(d/b) D(b) J S(a/b); with b = 0: A = S(c/a) D(a).
fn generators(a: &SymplecticMatrix) -> Vec<Generator> {
    let [[a11, b], [c, d]] = a.m;
    if b.abs() > 1e-12 {
        vec![Generator::Chirp(a11 / b), Generator::Fourier, Generator::Dilate(b), Generator::Chirp(d / b)]
    } else {
        vec![Generator::Dilate(a11), Generator::Chirp(c / a11)]
    }
}

fn cost(gens: &[Generator], budget: f64) -> Option<f64> {
    let mut worst: f64 = 0.0;
    for g in gens {
        match *g {
            Generator::Chirp(m) => {
                if !(m.abs() <= budget * (1.0 + 1e-12)) {
                    return None;
                }
                worst = worst.max(m.abs());
            }
            Generator::Dilate(l)
                if !(l.abs() <= DILATION_LIMIT && l.abs() >= 1.0 / DILATION_LIMIT) => {
                    return None;
                }
            _ => {}
        }
    }
    Some(worst)
}

/// Chooses among A, (A J^-1) J and (A J) J^-1 the factorization with the
/// smallest chirps that fits the sampling budget.
pub fn factorize(a: &SymplecticMatrix, grid: &GridSpec) -> Result<Vec<Generator>> {
    if a.residual() > 1e-10 {
        return Err(Error::NotSymplectic(a.residual()));
    }
    let budget = chirp_budget(grid);
    let j = SymplecticMatrix::j();
    let mut candidates = vec![generators(a)];
    let mut via_j = vec![Generator::Fourier];
    via_j.extend(generators(&a.mul(&j.inverse())));
    candidates.push(via_j);
    let mut via_jinv = vec![Generator::InverseFourier];
    via_jinv.extend(generators(&a.mul(&j)));
    candidates.push(via_jinv);
    let mut best: Option<(f64, Vec<Generator>)> = None;
    for c in candidates {
        if let Some(w) = cost(&c, budget) {
            if best.as_ref().is_none_or(|(bw, _)| w < bw - 1e-12) {
                best = Some((w, c));
            }
        }
    }
    let (_, gens) = best.ok_or_else(|| {
        Error::IllConditioned(format!(
            "no factorization of {:?} with chirps within {:.4} and dilations within [1/{DILATION_LIMIT}, {DILATION_LIMIT}]",
            a.m, budget
        ))
    })?;
    Ok(gens
        .into_iter()
        .filter(|g| match *g {
            Generator::Chirp(m) => m != 0.0,
            Generator::Dilate(l) => l != 1.0,
            _ => true,
        })
        .collect())
}

fn chirp(m: f64, f: &SampledSignal) -> SampledSignal {
    let g = f.grid;
    let samples = f
        .samples
        .iter()
        .enumerate()
        .map(|(j, v)| v * Complex64::from_polar(1.0, PI * m * g.x(j) * g.x(j)))
        .collect();
    SampledSignal { grid: g, samples, measure: false }
}

fn dilate(l: f64, f: &SampledSignal) -> SampledSignal {
    let g = f.grid;
    let s = 1.0 / l.abs().sqrt();
    let samples = (0..g.n())
        .into_par_iter()
        .map(|j| fft::interp_eval(&f.samples, g.extent(), g.x(j) / l) * s)
        .collect();
    SampledSignal { grid: g, samples, measure: false }
}

/// Fourier transform as an operator on the x-grid. Off the self-dual grid the
/// dual samples sit at xi = rho x, rho = n/L^2, and are resampled.
fn fourier(f: &SampledSignal) -> SampledSignal {
    let g = f.grid;
    let h = dft(f);
    if g.is_self_dual() {
        return h;
    }
    let rho = g.n() as f64 / (g.extent() * g.extent());
    dilate(rho, &h).scale(Complex64::new(rho.sqrt(), 0.0))
}

fn parity(f: &SampledSignal) -> SampledSignal {
    let n = f.grid.n();
    SampledSignal { grid: f.grid, samples: (0..n).map(|j| f.samples[(n - j) % n]).collect(), measure: f.measure }
}

fn apply_generator(g: Generator, f: &SampledSignal) -> SampledSignal {
    match g {
        Generator::Chirp(m) => chirp(m, f),
        Generator::Dilate(l) => dilate(l, f),
        Generator::Fourier => fourier(f),
        Generator::InverseFourier => parity(&fourier(f)),
    }
}

/// k_T with (Tf)(x_i) = dx sum_j k_T[i,j] f(x_j), from the images of the
/// delta basis (columns scaled by 1/dx).
pub fn schwartz_kernel(op: &OperatorSpec, grid: &GridSpec) -> Result<ComplexTensor> {
    if let OperatorSpec::KernelMatrix(t) = op {
        return Ok(t.clone());
    }
    let prepared = op.prepare(grid)?;
    let n = grid.n();
    let inv_dx = 1.0 / grid.dx();
    let basis: Vec<SampledSignal> = (0..n)
        .map(|j| {
            let mut e = SampledSignal::zeros(*grid);
            e.samples[j] = Complex64::new(inv_dx, 0.0);
            e
        })
        .collect();
    kernel_from_columns(&prepared, basis, grid)
}

/// Matrix whose column j is T applied to `inputs[j]`.
pub(crate) fn kernel_from_columns(op: &PreparedOp, inputs: Vec<SampledSignal>, grid: &GridSpec) -> Result<ComplexTensor> {
    let n = grid.n();
    let cols: Vec<SampledSignal> = inputs.par_iter().map(|e| op.apply(e)).collect();
    let mut values = vec![ZERO; n * n];
    for (j, c) in cols.iter().enumerate() {
        for i in 0..n {
            values[i * n + j] = c.samples[i];
        }
    }
    ComplexTensor::new(vec![n, n], values)
}

/// JSON description of an operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum OperatorDesc {
    Identity,
    Kernel { file: String },
    Weyl { symbol: String },
    Metaplectic { matrix: [[f64; 2]; 2] },
    Fio1 { phase: QuadraticPhase, symbol: String },
    Genmeta { symbol: String, matrix: [[f64; 2]; 2] },
    Compose { ops: Vec<OperatorDesc> },
}

/// "gaussian", "one" or "file:<path.tfk>".
pub fn parse_symbol(desc: &str, grid: &GridSpec) -> Result<SymbolField> {
    match desc {
        "gaussian" => Ok(SymbolField::gaussian(*grid)),
        "one" => Ok(SymbolField::constant(*grid, Complex64::new(1.0, 0.0))),
        s if s.starts_with("file:") => SymbolField::from_tensor(*grid, &ComplexTensor::read_tfk1(&s[5..])?),
        other => Err(Error::BadInput(format!("unknown symbol '{other}'"))),
    }
}

impl OperatorDesc {
    pub fn from_json(s: &str) -> Result<Self> {
        match s.trim() {
            "identity" => return Ok(OperatorDesc::Identity),
            t if !t.starts_with('{') => return Err(Error::BadInput(format!("operator must be JSON or 'identity', got '{t}'"))),
            _ => {}
        }
        serde_json::from_str(s).map_err(|e| Error::BadInput(format!("operator JSON: {e}")))
    }

    pub fn build(&self, grid: &GridSpec) -> Result<OperatorSpec> {
        Ok(match self {
            OperatorDesc::Identity => OperatorSpec::Identity,
            OperatorDesc::Kernel { file } => {
                let t = ComplexTensor::read_tfk1(file)?;
                if t.dims != [grid.n(), grid.n()] {
                    return Err(Error::Dimension(format!("kernel dims {:?}, grid n = {}", t.dims, grid.n())));
                }
                OperatorSpec::KernelMatrix(t)
            }
            OperatorDesc::Weyl { symbol } => OperatorSpec::Weyl(parse_symbol(symbol, grid)?),
            OperatorDesc::Metaplectic { matrix } => OperatorSpec::Metaplectic(SymplecticMatrix::new(*matrix)?),
            OperatorDesc::Fio1 { phase, symbol } => {
                OperatorSpec::TypeIFIO(QuadraticPhase::new(phase.a, phase.b, phase.c)?, parse_symbol(symbol, grid)?)
            }
            OperatorDesc::Genmeta { symbol, matrix } => {
                OperatorSpec::GeneralizedMetaplectic(parse_symbol(symbol, grid)?, SymplecticMatrix::new(*matrix)?)
            }
            OperatorDesc::Compose { ops } => {
                OperatorSpec::Composition(ops.iter().map(|o| o.build(grid)).collect::<Result<_>>()?)
            }
        })
    }

    /// Canonical map of the operator when it has an obvious one.
    pub fn canonical_map(&self) -> Option<SymplecticMatrix> {
        match self {
            OperatorDesc::Identity | OperatorDesc::Weyl { .. } | OperatorDesc::Kernel { .. } => Some(SymplecticMatrix::identity()),
            OperatorDesc::Metaplectic { matrix } | OperatorDesc::Genmeta { matrix, .. } => SymplecticMatrix::new(*matrix).ok(),
            OperatorDesc::Fio1 { phase, .. } => chi_from_phase(phase).ok(),
            OperatorDesc::Compose { ops } => ops
                .iter()
                .map(|o| o.canonical_map())
                .try_fold(SymplecticMatrix::identity(), |acc, m| m.map(|m| acc.mul(&m))),
        }
    }
}
