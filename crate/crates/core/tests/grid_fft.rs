use std::f64::consts::PI;

use proptest::prelude::*;
use tfk_core::fft::{centered_dft, centered_idft, upsample2};
use tfk_core::grid::{dft, idft, inner_product, l2_norm_dual, make_grid, sample_delta, sample_gaussian, sample_random, GridSpec, SampledSignal};
use tfk_core::tensor::ComplexTensor;
use tfk_core::{Complex64, Error};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn sup(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

#[test]
fn grid_geometry() {
    let g = make_grid(128, 16.0).unwrap();
    assert_eq!(g.dx(), 0.125);
    assert_eq!(g.dxi(), 1.0 / 16.0);
    assert_eq!(g.x(64), 0.0);
    assert_eq!(g.x(0), -8.0);
    assert_eq!(g.xi(0), -4.0);
    assert!(!g.is_self_dual());
    assert!(GridSpec::self_dual(64).unwrap().is_self_dual());
}

#[test]
fn invalid_grids_rejected() {
    for (n, l) in [(0, 8.0), (1, 8.0), (33, 8.0), (32, 0.0), (32, -1.0), (32, f64::NAN)] {
        assert!(matches!(make_grid(n, l), Err(Error::InvalidGrid(_))), "n={n} L={l}");
    }
}

#[test]
fn gaussian_samples_and_norm() {
    let g = make_grid(128, 16.0).unwrap();
    let phi = sample_gaussian(g);
    let j = g.n() / 2 + 8; // x = 1
    assert!((phi.samples[j].re - 0.0432139).abs() < 1e-7);
    assert!((phi.l2_norm() - 2f64.powf(-0.25)).abs() < 1e-12);
    assert!(phi.is_well_localized());
    assert!(!sample_gaussian(make_grid(64, 4.0).unwrap()).is_well_localized());
    let ip = inner_product(&phi, &phi).unwrap();
    assert!((ip.re - 0.5f64.sqrt()).abs() < 1e-12 && ip.im.abs() < 1e-15);
}

#[test]
fn delta_pairing_is_conjugate_evaluation() {
    let g = make_grid(64, 12.0).unwrap();
    let f = SampledSignal::from_fn(g, |x| c((-PI * x * x).exp(), x + 0.3));
    let d = sample_delta(g);
    let v = inner_product(&d, &f).unwrap();
    let f0 = f.samples[g.n() / 2];
    assert!((v - f0.conj()).norm() < 1e-14);
}

#[test]
fn gaussian_is_fourier_invariant() {
    let g = make_grid(128, 16.0).unwrap();
    let phi = sample_gaussian(g);
    let h = dft(&phi);
    // the dual samples sit on xi_k; compare against exp(-pi xi^2)
    let want: Vec<Complex64> = (0..g.n()).map(|k| c((-PI * g.xi(k).powi(2)).exp(), 0.0)).collect();
    assert!(sup(&h.samples, &want) <= 1e-10);
}

#[test]
fn centered_dft_matches_direct_sum() {
    let n = 16;
    let (l, dx) = (6.0, 6.0 / 16.0);
    let f: Vec<Complex64> = (0..n).map(|j| c((j as f64 * 0.7).sin(), (j as f64 * 1.3).cos())).collect();
    let x = |j: usize| (j as f64 - (n / 2) as f64) * dx;
    let xi = |k: usize| (k as f64 - (n / 2) as f64) / l;
    let direct: Vec<Complex64> = (0..n)
        .map(|k| (0..n).map(|j| f[j] * Complex64::from_polar(dx, -2.0 * PI * x(j) * xi(k))).sum())
        .collect();
    assert!(sup(&centered_dft(&f, dx), &direct) < 1e-12);
}

#[test]
fn upsample_is_exact_for_band_limited_vectors() {
    let n = 32;
    let modes = [(3i32, c(1.0, 0.5)), (-5, c(-0.2, 1.0)), (9, c(0.4, -0.3))];
    let at = |t: f64| -> Complex64 { modes.iter().map(|(k, a)| a * Complex64::from_polar(1.0, 2.0 * PI * *k as f64 * t / n as f64)).sum() };
    let f: Vec<Complex64> = (0..n).map(|j| at(j as f64)).collect();
    let u = upsample2(&f);
    assert_eq!(u.len(), 2 * n);
    for j in 0..n {
        assert!((u[2 * j] - f[j]).norm() < 1e-12);
        assert!((u[2 * j + 1] - at(j as f64 + 0.5)).norm() < 1e-12);
    }
}

#[test]
fn random_signals_are_seeded() {
    let g = GridSpec::self_dual(64).unwrap();
    assert_eq!(sample_random(g, 3), sample_random(g, 3));
    assert_ne!(sample_random(g, 3), sample_random(g, 4));
    assert!(sample_random(make_grid(128, 128f64.sqrt()).unwrap(), 9).is_well_localized());
}

#[test]
fn tensor_format_rejects_garbage() {
    assert!(matches!(ComplexTensor::read_from(&b"XXXX\0\0\0\0"[..]), Err(Error::Format(_))));
    let t = ComplexTensor::new(vec![2, 3], vec![c(1.0, 2.0); 6]).unwrap();
    let mut buf = Vec::new();
    t.write_to(&mut buf).unwrap();
    buf.truncate(buf.len() - 3);
    assert!(ComplexTensor::read_from(&buf[..]).is_err());
    assert!(matches!(ComplexTensor::new(vec![2, 2], vec![c(0.0, 0.0); 3]), Err(Error::Dimension(_))));
}

#[test]
fn tensor_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.tfk");
    let t = ComplexTensor::new(vec![4, 2], (0..8).map(|i| c(i as f64, -(i as f64) / 3.0)).collect()).unwrap();
    t.write_tfk1(&path).unwrap();
    assert_eq!(ComplexTensor::read_tfk1(&path).unwrap(), t);
}

fn signal(n: usize) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64).prop_map(|(a, b)| c(a, b)), n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dft_round_trip(v in signal(32), l in 2.0..20.0f64) {
        let g = make_grid(32, l).unwrap();
        let f = SampledSignal::new(g, v).unwrap();
        let back = idft(&dft(&f));
        prop_assert!(sup(&back.samples, &f.samples) < 1e-12);
        let raw = centered_idft(&centered_dft(&f.samples, g.dx()), g.dxi());
        prop_assert!(sup(&raw, &f.samples) < 1e-12);
    }

    #[test]
    fn parseval(v in signal(64), l in 2.0..20.0f64) {
        let g = make_grid(64, l).unwrap();
        let f = SampledSignal::new(g, v).unwrap();
        let a = f.l2_norm();
        let b = l2_norm_dual(&dft(&f));
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1e-300));
    }

    #[test]
    fn tensor_round_trip(dims in prop::collection::vec(1usize..5, 1..4), seed in any::<u64>()) {
        let len: usize = dims.iter().product();
        let values = (0..len).map(|i| c((seed.wrapping_add(i as u64) % 1000) as f64 * 1e-3, i as f64 * -0.5)).collect();
        let t = ComplexTensor::new(dims, values).unwrap();
        let mut buf = Vec::new();
        t.write_to(&mut buf).unwrap();
        prop_assert_eq!(ComplexTensor::read_from(&buf[..]).unwrap(), t);
    }
}
