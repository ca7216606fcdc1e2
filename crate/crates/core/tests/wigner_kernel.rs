use std::f64::consts::PI;

use tfk_core::gabor::{LatticeSpec, SafeRegion};
use tfk_core::grid::{inner_product, sample_gaussian, GridSpec, SampledSignal};
use tfk_core::operators::{OperatorSpec, SymbolField, SymplecticMatrix};
use tfk_core::tensor::ComplexTensor;
use tfk_core::tfr::{cross_wigner, wigner_of_kernel, PhasePoint, TFRepresentation};
use tfk_core::wigner_kernel::{
    concentration, gaussian_smoothed, genmeta_kernel_check, kernel_apply, kernel_from_matrix, permute, unpermute, verify_thm34,
    verify_wigner_action, wigner_kernel, WignerKernelTensor,
};
use tfk_core::{Complex64, Error};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn sd(n: usize) -> GridSpec {
    GridSpec::self_dual(n).unwrap()
}

fn wave(grid: GridSpec) -> SampledSignal {
    SampledSignal::from_fn(grid, |x| Complex64::from_polar((-PI * (x - 0.3).powi(2)).exp(), 2.0 * PI * 0.4 * x))
}

fn hermite(grid: GridSpec) -> SampledSignal {
    SampledSignal::from_fn(grid, |x| c(x * (-PI * x * x).exp(), 0.0))
}

fn outer(f: &SampledSignal, g: &SampledSignal, conj: bool) -> ComplexTensor {
    let n = f.grid.n();
    let values = (0..n * n)
        .map(|i| {
            let b = g.samples[i % n];
            f.samples[i / n] * if conj { b.conj() } else { b }
        })
        .collect();
    ComplexTensor::new(vec![n, n], values).unwrap()
}

fn points(grid: &GridSpec) -> Vec<PhasePoint> {
    let n = grid.n();
    (0..n).flat_map(|i| (0..n).map(move |j| PhasePoint::new(i, j))).collect()
}

#[test]
fn permute_is_invertible() {
    let n: usize = 8;
    let t = ComplexTensor::new(vec![n; 4], (0..n.pow(4)).map(|i| c((i as f64 * 0.37).sin(), i as f64)).collect()).unwrap();
    let p = permute(&t).unwrap();
    assert_ne!(p, t);
    assert_eq!(unpermute(&p).unwrap(), t);
    assert_eq!(permute(&unpermute(&t).unwrap()).unwrap(), t);
    // (x, y, xi, eta) = (1, 2, 3, 4) lands on (x, xi, y, -eta) = (1, 3, 2, 4)
    let at = |v: &ComplexTensor, a: usize, b: usize, cc: usize, d: usize| v.values[((a * n + b) * n + cc) * n + d];
    assert_eq!(at(&p, 1, 3, 2, n - 4), at(&t, 1, 2, 3, 4));
    assert!(matches!(permute(&ComplexTensor::new(vec![2, 2], vec![c(0.0, 0.0); 4]).unwrap()), Err(Error::Dimension(_))));
}

#[test]
fn wigner_of_a_two_dimensional_gaussian() {
    // W of exp(-pi(x^2 + y^2)) is 2 exp(-2 pi(x^2 + y^2 + xi^2 + eta^2))
    let grid = sd(32);
    let n: usize = 32;
    let phi = sample_gaussian(grid);
    let w = wigner_of_kernel(&outer(&phi, &phi, false), &grid).unwrap();
    let region = SafeRegion::wigner(&grid);
    let mut err: f64 = 0.0;
    for (i, v) in w.values.iter().enumerate() {
        let (x, y, xi, eta) = (grid.x(i / n.pow(3)), grid.x(i / n.pow(2) % n), grid.xi(i / n % n), grid.xi(i % n));
        if !(region.contains(x, xi) && region.contains(y, eta)) {
            continue;
        }
        let want = 2.0 * (-2.0 * PI * (x * x + y * y + xi * xi + eta * eta)).exp();
        err = err.max((v - want).norm());
    }
    // lags are cut at |t| = L / 2 = 2.83 where the integrand is exp(-pi t^2 / 2) ~ 3.5e-6
    assert!(err <= 1e-5, "{err:e}");
}

#[test]
fn wigner_of_kernel_is_isometric_and_separable() {
    let grid = sd(32);
    let n: usize = 32;
    let (f, g) = (wave(grid), hermite(grid));
    let kt = outer(&f, &g, false);
    let w = wigner_of_kernel(&kt, &grid).unwrap();
    let cell = grid.cell();
    let norm_w = (cell * cell * w.values.iter().map(|v| v.norm_sqr()).sum::<f64>()).sqrt();
    let norm_k2 = grid.dx() * grid.dx() * kt.values.iter().map(|v| v.norm_sqr()).sum::<f64>();
    assert!((norm_w - norm_k2).abs() <= 1e-8 * norm_k2, "{norm_w} {norm_k2}");

    let (wf, wg) = (cross_wigner(&f, &f).unwrap(), cross_wigner(&g, &g).unwrap());
    let mut err: f64 = 0.0;
    for (i, v) in w.values.iter().enumerate() {
        let (x, y, xi, eta) = (i / n.pow(3), i / n.pow(2) % n, i / n % n, i % n);
        err = err.max((v - wf.at(x, xi) * wg.at(y, eta)).norm());
    }
    assert!(err <= 1e-10, "{err:e}");

    let k = kernel_from_matrix(&kt, &grid).unwrap();
    assert_eq!(k.to_tensor(), permute(&w).unwrap());
    assert!(matches!(kernel_from_matrix(&kt, &sd(16)), Err(Error::Dimension(_))));
}

#[test]
fn rank_one_kernel_acts_by_projection() {
    // T h = f <h, g> has Schwartz kernel f(x) conj g(y), so
    // K W h = |<h, g>|^2 W f
    let grid = sd(32);
    let (f, g) = (wave(grid), hermite(grid));
    let h = SampledSignal::from_fn(grid, |x| c(0.6, 0.8) * (-PI * (x + 0.4).powi(2)).exp());
    let k = kernel_from_matrix(&outer(&f, &g, true), &grid).unwrap();
    let got = kernel_apply(&k, &cross_wigner(&h, &h).unwrap()).unwrap();
    let s = inner_product(&h, &g).unwrap().norm_sqr();
    let wf = cross_wigner(&f, &f).unwrap();
    let want = TFRepresentation { grid, values: wf.values.iter().map(|v| v * s).collect() };
    assert!(got.sup_diff(&want) <= 1e-8 * want.max_abs(), "{:e}", got.sup_diff(&want) / want.max_abs());
}

#[test]
fn identity_kernel_reproduces_wigner_distributions() {
    let grid = sd(32);
    let k = wigner_kernel(&OperatorSpec::Identity, &grid).unwrap();
    let region = SafeRegion::wigner(&grid);
    for f in [sample_gaussian(grid), wave(grid)] {
        let wf = cross_wigner(&f, &f).unwrap();
        let kw = kernel_apply(&k, &wf).unwrap();
        let err = points(&grid)
            .iter()
            .filter(|p| region.contains_point(&grid, **p))
            .map(|p| (kw.at(p.ix, p.ixi) - wf.at(p.ix, p.ixi)).norm())
            .fold(0.0, f64::max);
        assert!(err <= 1e-3 * wf.max_abs(), "{err:e}");
    }
}

#[test]
fn kernels_intertwine_wigner_distributions() {
    let grid = sd(32);
    let (f, g) = (sample_gaussian(grid), hermite(grid));
    let ops = [
        (OperatorSpec::Identity, 1e-3),
        (OperatorSpec::Metaplectic(SymplecticMatrix::j()), 1e-3),
        (OperatorSpec::Metaplectic(SymplecticMatrix::rotation(0.5)), 1e-3),
        (OperatorSpec::Metaplectic(SymplecticMatrix::shear(0.5)), 1e-3),
        (OperatorSpec::Weyl(SymbolField::gaussian(grid)), 1e-2),
    ];
    for (op, tol) in ops {
        let e = verify_wigner_action(&op, &f, &g).unwrap();
        assert!(e <= tol, "{}: {e:e}", op.describe());
    }
}

#[test]
fn smoothed_identity_kernel_is_a_gaussian() {
    let grid = sd(32);
    let s = gaussian_smoothed(wigner_kernel(&OperatorSpec::Identity, &grid).unwrap()).unwrap();
    let region = SafeRegion::wigner(&grid);
    let safe: Vec<PhasePoint> = points(&grid).into_iter().filter(|p| region.contains_point(&grid, *p)).collect();
    let mut err: f64 = 0.0;
    for z in &safe {
        for w in &safe {
            let (a, b) = (z.coords(&grid), w.coords(&grid));
            let want = 0.5 * (-PI * ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2))).exp();
            err = err.max((s.at(*z, *w) - want).norm());
        }
    }
    assert!(err <= 1e-3, "{err:e}");
}

#[test]
fn smoothed_kernel_matches_gabor_matrix() {
    let grid = sd(32);
    let phi = sample_gaussian(grid);
    let lat = LatticeSpec::full(&grid);
    for (op, tol) in [
        (OperatorSpec::Identity, 1e-4),
        (OperatorSpec::Metaplectic(SymplecticMatrix::j()), 1e-4),
        (OperatorSpec::Weyl(SymbolField::gaussian(grid)), 1e-3),
    ] {
        let e = verify_thm34(&op, &phi, &phi, &lat).unwrap();
        assert!(e <= tol, "{}: {e:e}", op.describe());
    }
}

#[test]
fn metaplectic_kernels_concentrate_on_the_graph() {
    let grid = sd(32);
    for a in [SymplecticMatrix::identity(), SymplecticMatrix::j()] {
        let k = wigner_kernel(&OperatorSpec::Metaplectic(a), &grid).unwrap();
        let cc = concentration(&k, &a, 2.0);
        assert!(cc.distribution_like, "{cc:?}");
    }
    // the Weyl kernel of a Gaussian symbol is a smooth function whose mass
    // is not uniform along the diagonal
    let k = wigner_kernel(&OperatorSpec::Weyl(SymbolField::gaussian(grid)), &grid).unwrap();
    assert!(!concentration(&k, &SymplecticMatrix::identity(), 2.0).distribution_like);
}

#[test]
fn generalized_metaplectic_kernel_is_a_moved_weyl_kernel() {
    let grid = sd(32);
    let s = SymbolField::gaussian(grid);
    assert!(genmeta_kernel_check(&s, &SymplecticMatrix::identity()).unwrap() <= 1e-8);
    assert!(genmeta_kernel_check(&s, &SymplecticMatrix::shear(0.5)).unwrap() <= 1e-2);
    // with sigma = 1 the operator is metaplectic
    let one = SymbolField::constant(grid, c(1.0, 0.0));
    let a = SymplecticMatrix::rotation(0.4);
    let k1 = wigner_kernel(&OperatorSpec::GeneralizedMetaplectic(one, a), &grid).unwrap();
    let k2 = wigner_kernel(&OperatorSpec::Metaplectic(a), &grid).unwrap();
    let diff = k1.values.iter().zip(&k2.values).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
    assert!(diff <= 1e-8 * k2.max_abs(), "{diff:e}");
}

#[test]
fn kernel_tensor_round_trip_and_limits() {
    let grid = sd(16);
    let k = wigner_kernel(&OperatorSpec::Metaplectic(SymplecticMatrix::rotation(0.3)), &grid).unwrap();
    let back = WignerKernelTensor::from_tensor(grid, k.to_tensor()).unwrap();
    assert_eq!(back, k);
    assert!(WignerKernelTensor::from_tensor(sd(8), k.to_tensor()).is_err());
    assert!(matches!(wigner_kernel(&OperatorSpec::Identity, &sd(128)), Err(Error::MemoryCap { .. })));
    let other = TFRepresentation::zeros(sd(8));
    assert!(kernel_apply(&k, &other).is_err());
}
