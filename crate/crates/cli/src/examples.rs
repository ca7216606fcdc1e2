use std::f64::consts::PI;

use clap::ValueEnum;
use serde_json::{json, Value};

use tfk_core::classes::{grid_points, kernel_decay_fit};
use tfk_core::gabor::{decay_fit, gabor_matrix, LatticeSpec, SafeRegion, ShellConfig};
use tfk_core::grid::{make_grid, sample_delta, sample_gaussian, GridSpec};
use tfk_core::operators::{metaplectic_apply, OperatorSpec, SymbolField, SymplecticMatrix};
use tfk_core::tfr::{cross_wigner, husimi, husimi_via_convolution, PhasePoint, TFRepresentation};
use tfk_core::wigner_kernel::{concentration, gaussian_smoothed, genmeta_kernel_check, verify_thm34, wigner_kernel};
use tfk_core::Complex64;

use crate::{CliResult, Ctx};

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum Name {
    Husimi,
    Identity,
    Metaplectic,
    Weyl,
    Genmeta,
}

struct Checks(Vec<Value>);

impl Checks {
    fn add(&mut self, name: &str, value: f64, tol: f64) {
        self.0.push(json!({ "check": name, "value": value, "tolerance": tol, "pass": value <= tol }));
    }
    fn flag(&mut self, name: &str, ok: bool) {
        self.0.push(json!({ "check": name, "value": ok, "pass": ok }));
    }
    fn pass(&self) -> bool {
        self.0.iter().all(|c| c["pass"] == json!(true))
    }
}

fn self_dual(n: usize) -> CliResult<GridSpec> {
    Ok(make_grid(n, (n as f64).sqrt())?)
}

/// sup over lattice pairs of | |K(w,z)|^2 - f(w, z) | on the Gabor-safe region.
fn gabor_closed_form(op: &OperatorSpec, grid: GridSpec, step: usize, f: impl Fn([f64; 2], [f64; 2]) -> f64) -> CliResult<f64> {
    let r = SafeRegion::gabor(&grid);
    let lat = LatticeSpec::covering(&grid, step, step, r.x_max, r.xi_max);
    let phi = sample_gaussian(grid);
    let k = gabor_matrix(op, &phi, &phi, &lat)?;
    let c = k.coords();
    let m = k.size();
    let mut err: f64 = 0.0;
    for w in 0..m {
        for z in 0..m {
            err = err.max((k.values[w * m + z].norm_sqr() - f(c[w], c[z])).abs());
        }
    }
    Ok(err)
}

fn gauss_half(w: [f64; 2], z: [f64; 2]) -> f64 {
    0.5 * (-PI * ((w[0] - z[0]).powi(2) + (w[1] - z[1]).powi(2))).exp()
}

pub fn run(name: Name, ctx: &Ctx) -> CliResult<bool> {
    let mut checks = Checks(Vec::new());
    let label = match name {
        Name::Husimi => {
            let grid = make_grid(64, 16.0)?;
            for (tag, g) in [("delta", sample_delta(grid)), ("gaussian", sample_gaussian(grid))] {
                let h = husimi(&g)?;
                let hc = husimi_via_convolution(&g)?;
                ctx.write_csv(&format!("husimi_{tag}.csv"), &h)?;
                checks.add(&format!("{tag}: |W g * W phi - |V_phi g|^2| / max"), h.sup_diff(&hc) / h.max_abs().max(hc.max_abs()), 1e-5);
                if tag == "delta" {
                    let closed = TFRepresentation::from_fn(grid, |x, _| Complex64::new((-2.0 * PI * x * x).exp(), 0.0));
                    checks.add("delta: |V_phi delta|^2 - exp(-2 pi x^2)", h.sup_diff(&closed), 1e-5);
                    checks.add("delta: W delta * W phi - exp(-2 pi x^2)", hc.sup_diff(&closed), 1e-5);
                }
            }
            "husimi"
        }
        Name::Identity => {
            let e = gabor_closed_form(&OperatorSpec::Identity, make_grid(128, 16.0)?, 4, gauss_half)?;
            checks.add("|<pi(z)phi, pi(w)phi>|^2 - exp(-pi|z-w|^2)/2 (n=128, L=16)", e, 1e-6);
            let grid = self_dual(64)?;
            let s = gaussian_smoothed(wigner_kernel(&OperatorSpec::Identity, &grid)?)?;
            let region = SafeRegion::wigner(&grid);
            let pts = grid_points(&grid);
            let m = pts.len();
            let mut err: f64 = 0.0;
            for (o, p) in pts.iter().enumerate().filter(|(_, p)| region.contains(p[0], p[1])) {
                for (i, q) in pts.iter().enumerate().filter(|(_, q)| region.contains(q[0], q[1])) {
                    err = err.max((s.values[o * m + i] - gauss_half(*p, *q)).norm());
                }
            }
            checks.add("k * Phi - exp(-pi|z-w|^2)/2 (n=64, self-dual)", err, 1e-3);
            let h = grid.n() / 2;
            let slice = TFRepresentation::from_fn(grid, |_, _| Complex64::new(0.0, 0.0));
            let mut slice = slice;
            for (o, v) in slice.values.iter_mut().enumerate() {
                *v = s.at(PhasePoint::new(o / grid.n(), o % grid.n()), PhasePoint::new(h, h));
            }
            ctx.write_csv("identity_smoothed_w0.csv", &slice)?;
            "identity"
        }
        Name::Metaplectic => {
            let j = SymplecticMatrix::j();
            let grid = self_dual(64)?;
            let k = wigner_kernel(&OperatorSpec::Metaplectic(j), &grid)?;
            let c = concentration(&k, &j, 2.0);
            checks.flag("kernel concentrated on z = J w", c.distribution_like);
            let f = sample_gaussian(grid);
            let wa = cross_wigner(&metaplectic_apply(&j, &f)?, &metaplectic_apply(&j, &f)?)?;
            let wf = cross_wigner(&f, &f)?;
            let inv = j.inverse();
            let moved = TFRepresentation::from_fn(grid, |x, xi| {
                let p = inv.apply([x, xi]);
                wf.interp(p[0], p[1])
            });
            ctx.write_csv("metaplectic_wigner.csv", &wa)?;
            checks.add("W(J f)(z) - W f(J^{-1} z), relative", wa.sup_diff(&moved) / wf.max_abs(), 1e-4);
            let gg = self_dual(256)?;
            let e = gabor_closed_form(&OperatorSpec::Metaplectic(j), gg, 8, |w, z| gauss_half(w, j.apply(z)))?;
            checks.add("|K_J(w,z)|^2 - exp(-pi|w-Jz|^2)/2", e, 1e-6);
            "metaplectic"
        }
        Name::Weyl => {
            let grid = self_dual(64)?;
            let op = OperatorSpec::Weyl(SymbolField::gaussian(grid));
            let phi = sample_gaussian(grid);
            checks.add("smoothing identity, relative", verify_thm34(&op, &phi, &phi, &LatticeSpec::full(&grid))?, 1e-3);
            let gg = self_dual(256)?;
            let r = SafeRegion::gabor(&gg);
            let pg = sample_gaussian(gg);
            let km = gabor_matrix(&OperatorSpec::Weyl(SymbolField::gaussian(gg)), &pg, &pg, &LatticeSpec::covering(&gg, 8, 8, r.x_max, r.xi_max))?;
            let fit = decay_fit(&km, &SymplecticMatrix::identity(), &ShellConfig::default())?;
            checks.flag("Gabor matrix decays superpolynomially about the diagonal", fit.superpolynomial);
            let kf = kernel_decay_fit(&wigner_kernel(&op, &grid)?, &SymplecticMatrix::identity(), SafeRegion::wigner(&grid), &ShellConfig { r_max: Some(2.5), shells: 8, ..ShellConfig::default() });
            if let Ok(kf) = kf {
                checks.0.push(json!({ "check": "kernel exponent (informational)", "value": kf.exponent, "pass": true }));
            }
            "weyl"
        }
        Name::Genmeta => {
            let grid = self_dual(32)?;
            let s = SymbolField::gaussian(grid);
            checks.add("k(z,w) - h(z, A w), A = shear", genmeta_kernel_check(&s, &SymplecticMatrix::shear(1.0))?, 1e-2);
            checks.add("k(z,w) - h(z, w), A = I", genmeta_kernel_check(&s, &SymplecticMatrix::identity())?, 1e-6);
            "genmeta"
        }
    };
    let pass = checks.pass();
    ctx.report(&format!("example_{label}"), json!({ "example": label }), json!({ "checks": checks.0, "pass": pass }), pass)
}
