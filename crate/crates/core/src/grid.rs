//! Uniform periodic grids, sampled signals, the pairing and the centered DFT.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft;

/// Uniform periodic grid on [-L/2, L/2). The dual grid has the same count,
/// spacing 1/L and is centered at 0: xi_k = (k - n/2)/L.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    n: usize,
    extent: f64,
}

impl GridSpec {
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn extent(&self) -> f64 {
        self.extent
    }
    pub fn dx(&self) -> f64 {
        self.extent / self.n as f64
    }
    pub fn dxi(&self) -> f64 {
        1.0 / self.extent
    }
    pub fn offset(&self) -> f64 {
        -0.5 * self.extent
    }
    /// Nyquist frequency n/(2L).
    pub fn nyquist(&self) -> f64 {
        self.n as f64 / (2.0 * self.extent)
    }
    /// Phase-space cell area dx * dxi = 1/n.
    pub fn cell(&self) -> f64 {
        1.0 / self.n as f64
    }
    pub fn x(&self, j: usize) -> f64 {
        (j as f64 - (self.n / 2) as f64) * self.dx()
    }
    pub fn xi(&self, k: usize) -> f64 {
        (k as f64 - (self.n / 2) as f64) * self.dxi()
    }
    pub fn xs(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.x(j)).collect()
    }
    pub fn xis(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.xi(k)).collect()
    }
    /// Grid with dx = dxi, i.e. L = sqrt(n). The DFT is then exactly the
    /// centered FFT and phase space is an isotropic lattice.
    pub fn self_dual(n: usize) -> Result<GridSpec> {
        make_grid(n, (n as f64).sqrt())
    }
    pub fn is_self_dual(&self) -> bool {
        (self.extent * self.extent - self.n as f64).abs() < 1e-9 * self.n as f64
    }
    pub fn ensure_same(&self, other: &GridSpec) -> Result<()> {
        if self != other {
            return Err(Error::GridMismatch(format!(
                "(n={}, L={}) vs (n={}, L={})",
                self.n, self.extent, other.n, other.extent
            )));
        }
        Ok(())
    }
}

pub fn make_grid(n: usize, extent: f64) -> Result<GridSpec> {
    if n < 8 || !n.is_multiple_of(2) {
        return Err(Error::InvalidGrid(format!("n must be even and >= 8, got {n}")));
    }
    if !(extent > 0.0) || !extent.is_finite() {
        return Err(Error::InvalidGrid(format!("extent must be positive, got {extent}")));
    }
    Ok(GridSpec { n, extent })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledSignal {
    pub grid: GridSpec,
    pub samples: Vec<Complex64>,
    /// Samples are point masses (a lattice measure such as the delta
    /// surrogate) rather than values of a band-limited function; half-sample
    /// values are then zero instead of interpolated.
    pub measure: bool,
}

impl SampledSignal {
    pub fn new(grid: GridSpec, samples: Vec<Complex64>) -> Result<Self> {
        if samples.len() != grid.n() {
            return Err(Error::Dimension(format!(
                "{} samples on a grid of {}",
                samples.len(),
                grid.n()
            )));
        }
        Ok(SampledSignal { grid, samples, measure: false })
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(f64) -> Complex64) -> Self {
        let samples = (0..grid.n()).map(|j| f(grid.x(j))).collect();
        SampledSignal { grid, samples, measure: false }
    }

    /// Half-sample values: band-limited interpolation for functions,
    /// zero insertion for lattice measures.
    pub fn upsampled(&self) -> Vec<Complex64> {
        if self.measure {
            let mut u = vec![Complex64::new(0.0, 0.0); 2 * self.samples.len()];
            for (j, v) in self.samples.iter().enumerate() {
                u[2 * j] = *v;
            }
            u
        } else {
            fft::upsample2(&self.samples)
        }
    }

    pub fn zeros(grid: GridSpec) -> Self {
        SampledSignal { grid, samples: vec![Complex64::new(0.0, 0.0); grid.n()], measure: false }
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Boundary samples negligible against the peak, so periodization is harmless.
    pub fn is_well_localized(&self) -> bool {
        let n = self.samples.len();
        let edge = self.samples[0].norm().max(self.samples[n - 1].norm());
        edge <= 1e-10 * self.max_abs()
    }

    /// Logs a warning when the signal is not well localized.
    pub fn warn_if_not_localized(&self, what: &str) {
        if !self.is_well_localized() {
            log::warn!("{what}: signal is not well localized; periodization error expected");
        }
    }

    pub fn l2_norm(&self) -> f64 {
        (self.grid.dx() * self.samples.iter().map(|v| v.norm_sqr()).sum::<f64>()).sqrt()
    }

    pub fn scale(&self, c: Complex64) -> Self {
        SampledSignal { grid: self.grid, samples: self.samples.iter().map(|v| v * c).collect(), measure: self.measure }
    }
}

/// phi(t) = exp(-pi t^2).
pub fn sample_gaussian(grid: GridSpec) -> SampledSignal {
    SampledSignal::from_fn(grid, |x| Complex64::new((-std::f64::consts::PI * x * x).exp(), 0.0))
}

/// Delta surrogate: 1/dx at the sample x = 0, so dx * sum = 1.
pub fn sample_delta(grid: GridSpec) -> SampledSignal {
    let mut s = SampledSignal::zeros(grid);
    s.samples[grid.n() / 2] = Complex64::new(1.0 / grid.dx(), 0.0);
    s.measure = true;
    s
}

/// <f, g> = dx * sum f conj(g), conjugate-linear in g.
pub fn inner_product(f: &SampledSignal, g: &SampledSignal) -> Result<Complex64> {
    f.grid.ensure_same(&g.grid)?;
    let s: Complex64 = f.samples.iter().zip(&g.samples).map(|(a, b)| a * b.conj()).sum();
    Ok(s * f.grid.dx())
}

/// Continuous-FT approximation on the dual grid. The result is stored on the
/// same GridSpec; its sample k is the value at xi_k.
pub fn dft(f: &SampledSignal) -> SampledSignal {
    SampledSignal { grid: f.grid, samples: fft::centered_dft(&f.samples, f.grid.dx()), measure: false }
}

pub fn idft(fhat: &SampledSignal) -> SampledSignal {
    SampledSignal { grid: fhat.grid, samples: fft::centered_idft(&fhat.samples, fhat.grid.dxi()), measure: false }
}

/// Norm of a dual-grid signal (weights dxi).
pub fn l2_norm_dual(fhat: &SampledSignal) -> f64 {
    (fhat.grid.dxi() * fhat.samples.iter().map(|v| v.norm_sqr()).sum::<f64>()).sqrt()
}

/// Seeded sum of four Gaussian atoms near the origin of the phase plane.
///
/// Atom widths scale as L / sqrt(n), which balances the time and frequency
/// tails against the box, so the signal stays localized and numerically
/// band-limited on any grid of moderate size.
pub fn sample_random(grid: GridSpec, seed: u64) -> SampledSignal {
    use rand::{Rng, SeedableRng};
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    let l = grid.extent();
    let b = grid.nyquist();
    let s0 = l / (grid.n() as f64).sqrt();
    let atoms: Vec<(f64, f64, f64, Complex64)> = (0..4)
        .map(|_| {
            let c = rng.gen_range(-l / 16.0..=l / 16.0);
            let w = rng.gen_range(-b / 16.0..=b / 16.0);
            let s = s0 * rng.gen_range(0.85..=1.15);
            let a = Complex64::new(rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0));
            (c, w, s, a)
        })
        .collect();
    SampledSignal::from_fn(grid, |x| {
        atoms
            .iter()
            .map(|&(c, w, s, a)| {
                let u = (x - c) / s;
                a * Complex64::from_polar((-std::f64::consts::PI * u * u).exp(), 2.0 * std::f64::consts::PI * w * x)
            })
            .sum()
    })
}
