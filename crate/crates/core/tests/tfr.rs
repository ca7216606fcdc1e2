use std::f64::consts::PI;

use proptest::prelude::*;
use tfk_core::grid::{inner_product, make_grid, sample_delta, sample_gaussian, sample_random, GridSpec, SampledSignal};
use tfk_core::tfr::{cross_wigner, husimi, husimi_via_convolution, stft, stft_adjoint, tf_shift, PhasePoint, TFRepresentation};
use tfk_core::{Complex64, Error};

fn gauss_at(grid: GridSpec, x0: f64, xi0: f64, s: f64) -> SampledSignal {
    SampledSignal::from_fn(grid, |x| Complex64::from_polar((-PI * ((x - x0) / s).powi(2)).exp(), 2.0 * PI * xi0 * x))
}

fn rel_l2(a: &SampledSignal, b: &SampledSignal) -> f64 {
    let d: f64 = a.samples.iter().zip(&b.samples).map(|(x, y)| (x - y).norm_sqr()).sum();
    (d * a.grid.dx()).sqrt() / b.l2_norm()
}

/// Cross-Wigner by direct summation: lags t = m dx, |m| <= n/2 with half
/// weight at the ends, half-sample values by trigonometric interpolation.
fn wigner_direct(f: &SampledSignal, g: &SampledSignal) -> Vec<Complex64> {
    let grid = f.grid;
    let n = grid.n() as i64;
    let trig = |s: &SampledSignal, t: f64| -> Complex64 {
        // periodic band-limited interpolant at fractional index t
        let h = n / 2;
        (0..n)
            .map(|j| {
                let coef: Complex64 = (-h..=h)
                    .map(|k| {
                        let w = if k.abs() == h { 0.5 } else { 1.0 };
                        Complex64::from_polar(w, 2.0 * PI * k as f64 * (t - j as f64) / n as f64)
                    })
                    .sum();
                s.samples[j as usize] * coef / n as f64
            })
            .sum()
    };
    let mut out = vec![Complex64::new(0.0, 0.0); (n * n) as usize];
    for a in 0..n {
        let lags: Vec<(f64, Complex64)> = (-n / 2..=n / 2)
            .map(|m| {
                let w = if m.abs() == n / 2 { 0.5 } else { 1.0 };
                let v = trig(f, a as f64 + m as f64 / 2.0) * trig(g, a as f64 - m as f64 / 2.0).conj();
                (m as f64 * grid.dx(), v * w)
            })
            .collect();
        for b in 0..n {
            let xi = grid.xi(b as usize);
            out[(a * n + b) as usize] = lags.iter().map(|(t, v)| v * Complex64::from_polar(grid.dx(), -2.0 * PI * t * xi)).sum();
        }
    }
    out
}

#[test]
fn stft_of_gaussian_closed_form() {
    let grid = make_grid(128, 16.0).unwrap();
    let phi = sample_gaussian(grid);
    let v = stft(&phi, &phi).unwrap();
    let h = grid.n() / 2;
    assert!((v.at(h, h) - Complex64::new(0.5f64.sqrt(), 0.0)).norm() < 1e-12);
    let want = TFRepresentation::from_fn(grid, |x, xi| Complex64::new(0.5f64.sqrt() * (-PI * (x * x + xi * xi) / 2.0).exp(), 0.0));
    let err = v.values.iter().zip(&want.values).map(|(a, b)| (a.norm() - b.re).abs()).fold(0.0, f64::max);
    assert!(err <= 1e-8, "{err:e}");
}

#[test]
fn stft_of_delta_is_window() {
    let grid = make_grid(128, 16.0).unwrap();
    let phi = sample_gaussian(grid);
    let v = stft(&sample_delta(grid), &phi).unwrap();
    let want = TFRepresentation::from_fn(grid, |x, _| Complex64::new((-PI * x * x).exp(), 0.0));
    assert!(v.sup_diff(&want) <= 1e-8);
}

#[test]
fn stft_covariance_at_lattice_pairs() {
    let grid = make_grid(128, 16.0).unwrap();
    let phi = sample_gaussian(grid);
    let n = grid.n();
    let base = stft(&phi, &phi).unwrap();
    let picks = [(70, 60, 64, 64), (64, 64, 80, 50), (50, 72, 58, 70), (66, 63, 69, 61), (75, 55, 70, 60), (60, 60, 60, 60), (64, 70, 56, 78), (72, 72, 64, 56), (58, 66, 62, 64), (68, 52, 64, 64)];
    for (zx, zxi, wx, wxi) in picks {
        let shifted = tf_shift(&phi, PhasePoint::new(zx, zxi));
        // direct sum for V_phi(pi(z) phi)(w)
        let (x, xi) = (grid.x(wx), grid.xi(wxi));
        let direct: Complex64 = (0..n)
            .map(|j| {
                let y = grid.x(j);
                let win = (-PI * (y - x).powi(2)).exp();
                shifted.samples[j] * Complex64::from_polar(win * grid.dx(), -2.0 * PI * xi * y)
            })
            .sum();
        let d = base.at(wx + n / 2 - zx, wxi + n / 2 - zxi).norm();
        assert!((direct.norm() - d).abs() < 1e-10);
        assert!((stft(&shifted, &phi).unwrap().at(wx, wxi) - direct).norm() < 1e-10);
    }
}

#[test]
fn reconstruction_with_distinct_windows() {
    let grid = make_grid(128, 16.0).unwrap();
    let f = gauss_at(grid, 0.75, -0.5, 1.2);
    let g = sample_gaussian(grid);
    let gamma = gauss_at(grid, 0.0, 0.0, 0.8);
    let c = inner_product(&gamma, &g).unwrap();
    let r = stft_adjoint(&stft(&f, &g).unwrap(), &gamma).unwrap();
    let r = r.scale(1.0 / c);
    assert!(rel_l2(&r, &f) <= 1e-8);
    let phi = sample_gaussian(grid);
    let r = stft_adjoint(&stft(&f, &phi).unwrap(), &phi).unwrap();
    assert!(rel_l2(&r.scale(Complex64::new(2f64.sqrt(), 0.0)), &f) <= 1e-8);
}

#[test]
fn wigner_of_gaussian() {
    let grid = make_grid(128, 16.0).unwrap();
    let w = cross_wigner(&sample_gaussian(grid), &sample_gaussian(grid)).unwrap();
    let h = grid.n() / 2;
    assert!((w.at(h, h).re - 2f64.sqrt()).abs() < 1e-10);
    let want = TFRepresentation::from_fn(grid, |x, xi| Complex64::new(2f64.sqrt() * (-2.0 * PI * (x * x + xi * xi)).exp(), 0.0));
    assert!(w.sup_diff(&want) < 1e-10);
}

#[test]
fn cross_wigner_of_separated_gaussians() {
    // |W(pi(z1) phi, pi(z2) phi)| = 2^{1/2} exp(-2 pi |p - (z1 + z2)/2|^2)
    let grid = make_grid(128, 16.0).unwrap();
    let (z1, z2) = ([1.0, 0.5], [-0.5, -0.25]);
    let f = gauss_at(grid, z1[0], z1[1], 1.0);
    let g = gauss_at(grid, z2[0], z2[1], 1.0);
    let w = cross_wigner(&f, &g).unwrap();
    let m = [(z1[0] + z2[0]) / 2.0, (z1[1] + z2[1]) / 2.0];
    let mut err: f64 = 0.0;
    for a in 0..grid.n() {
        for b in 0..grid.n() {
            let r2 = (grid.x(a) - m[0]).powi(2) + (grid.xi(b) - m[1]).powi(2);
            err = err.max((w.at(a, b).norm() - 2f64.sqrt() * (-2.0 * PI * r2).exp()).abs());
        }
    }
    assert!(err < 1e-8, "{err:e}");
}

#[test]
fn wigner_matches_direct_sum() {
    let grid = make_grid(32, 32f64.sqrt()).unwrap();
    let f = sample_random(grid, 5);
    let g = sample_random(grid, 6);
    let w = cross_wigner(&f, &g).unwrap();
    let d = wigner_direct(&f, &g);
    let err = w.values.iter().zip(&d).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    assert!(err < 1e-10 * w.max_abs(), "{err:e}");
    let lhs: f64 = (d.iter().map(|v| v.norm_sqr()).sum::<f64>() * grid.cell()).sqrt();
    let norm = |s: &SampledSignal| (s.samples.iter().map(|v| v.norm_sqr()).sum::<f64>() * grid.dx()).sqrt();
    let rhs = norm(&f) * norm(&g);
    assert!((lhs - rhs).abs() <= 1e-6 * rhs);
}

#[test]
fn wigner_of_delta_is_flat_line() {
    let grid = make_grid(64, 8.0).unwrap();
    let w = cross_wigner(&sample_delta(grid), &sample_delta(grid)).unwrap();
    let n = grid.n();
    let row: Vec<Complex64> = (0..n).map(|b| w.at(n / 2, b)).collect();
    let level = row[0].re;
    assert!(level > 0.0);
    assert!(row.iter().all(|v| (v - Complex64::new(level, 0.0)).norm() < 1e-10 * level));
    let off = (0..n).filter(|&a| a != n / 2).flat_map(|a| (0..n).map(move |b| (a, b))).map(|(a, b)| w.at(a, b).norm()).fold(0.0, f64::max);
    assert!(off < 1e-10 * level);
}

#[test]
fn husimi_closed_forms() {
    let grid = make_grid(64, 16.0).unwrap();
    let h = husimi(&sample_delta(grid)).unwrap();
    let want = TFRepresentation::from_fn(grid, |x, _| Complex64::new((-2.0 * PI * x * x).exp(), 0.0));
    assert!(h.sup_diff(&want) <= 1e-6);
    let hp = husimi(&sample_gaussian(grid)).unwrap();
    // Riemann sum of exp(-2 pi t^2) at dx = 1/4 is exact to about 2e-11
    assert!((hp.at(32, 32).re - 0.5).abs() < 1e-9);
    for g in [sample_delta(grid), sample_gaussian(grid)] {
        assert!(husimi(&g).unwrap().sup_diff(&husimi_via_convolution(&g).unwrap()) <= 1e-5);
    }
}

#[test]
fn off_lattice_points_rejected() {
    let grid = make_grid(32, 8.0).unwrap();
    assert!(PhasePoint::from_coords(&grid, 0.25, 0.0).is_ok());
    assert!(matches!(PhasePoint::from_coords(&grid, 0.3, 0.0), Err(Error::OffLattice(_))));
    let z = make_grid(32, 6.0).unwrap();
    assert!(matches!(cross_wigner(&sample_gaussian(grid), &sample_gaussian(z)), Err(Error::GridMismatch(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn moyal_identity(seed in any::<u64>()) {
        let grid = make_grid(64, 8.0).unwrap();
        let f = sample_random(grid, seed);
        let g = sample_random(grid, seed.wrapping_add(1));
        let w = cross_wigner(&f, &g).unwrap();
        let p = f.l2_norm() * g.l2_norm();
        prop_assert!((w.l2_norm() - p).abs() <= 1e-6 * p);
    }

    #[test]
    fn wigner_covariance(zx in 24usize..40, zxi in 24usize..40) {
        let grid = make_grid(64, 8.0).unwrap();
        let phi = sample_gaussian(grid);
        let w0 = cross_wigner(&phi, &phi).unwrap();
        let s = tf_shift(&phi, PhasePoint::new(zx, zxi));
        let w = cross_wigner(&s, &s).unwrap();
        let n = 64i64;
        let mut err: f64 = 0.0;
        for a in 0..64 {
            for b in 0..64 {
                let (sa, sb) = ((a as i64 - zx as i64 + 32).rem_euclid(n) as usize, (b as i64 - zxi as i64 + 32).rem_euclid(n) as usize);
                err = err.max((w.at(a, b) - w0.at(sa, sb)).norm());
            }
        }
        prop_assert!(err < 1e-6, "{:e}", err);
    }

    #[test]
    fn reconstruction_is_identity(seed in any::<u64>()) {
        let grid = make_grid(128, 128f64.sqrt()).unwrap();
        let f = sample_random(grid, seed);
        let phi = sample_gaussian(grid);
        let c = inner_product(&phi, &phi).unwrap();
        let r = stft_adjoint(&stft(&f, &phi).unwrap(), &phi).unwrap();
        prop_assert!(rel_l2(&r.scale(1.0 / c), &f) <= 1e-8);
    }
}
