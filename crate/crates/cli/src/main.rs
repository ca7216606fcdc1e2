mod examples;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use tfk_core::classes::{classify, render_markdown, ClassConfig};
use tfk_core::gabor::{decay_fit, gabor_matrix, LatticeSpec, SafeRegion, ShellConfig};
use tfk_core::grid::{make_grid, sample_delta, sample_gaussian, sample_random, GridSpec, SampledSignal};
use tfk_core::operators::{parse_symbol, OperatorDesc, SymplecticMatrix};
use tfk_core::symbol::{symbol_norm_report, weight_convolution_check, NormType};
use tfk_core::tensor::ComplexTensor;
use tfk_core::tfr::{cross_wigner, stft, TFRepresentation};
use tfk_core::wigner_kernel::{concentration, gaussian_smoothed, verify_thm34_in, verify_wigner_action, wigner_kernel};
use tfk_core::{Complex64, Error};

#[derive(Parser, Debug)]
#[command(name = "tfk", version, about = "Phase-space analysis of operators on L^2(R)")]
struct Cli {
    /// Grid size (even). Each command has its own default.
    #[arg(long, global = true)]
    n: Option<usize>,
    /// Box length L. Defaults to sqrt(n), the self-dual grid.
    #[arg(long, global = true)]
    extent: Option<f64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "tfk_out")]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for randomized signals.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// STFT V_g f of a signal.
    Stft {
        /// gaussian | delta | hermite | random | file:<path.tfk>
        #[arg(long)]
        signal: String,
        #[arg(long, default_value = "gaussian")]
        window: String,
    },
    /// Cross-Wigner distribution W(f, g); g defaults to f.
    Wigner {
        #[arg(long)]
        signal: String,
        #[arg(long)]
        signal2: Option<String>,
    },
    /// Gabor matrix on a lattice and its decay fit.
    Gabor {
        /// Operator JSON or `identity`.
        #[arg(long)]
        op: String,
        /// Lattice size MxM, or `full`.
        #[arg(long, default_value = "16x16")]
        lattice: String,
        /// Index step of the lattice (default: fill the safe region).
        #[arg(long)]
        step: Option<usize>,
        /// Canonical map [[a,b],[c,d]] (default: the operator's own).
        #[arg(long)]
        chi: Option<String>,
    },
    /// Wigner kernel k(z, w) as an n^4 tensor.
    Kernel {
        #[arg(long)]
        op: String,
        #[arg(long)]
        chi: Option<String>,
    },
    /// Wigner kernel smoothed with W phi (x) W phi.
    Smooth {
        #[arg(long)]
        op: String,
    },
    /// Smoothing identity |K|^2 = k * (W gamma (x) W g) and the Wigner action.
    Verify {
        #[arg(long)]
        op: String,
        #[arg(long, default_value = "full")]
        lattice: String,
        /// Margin of the Wigner-safe region.
        #[arg(long, default_value_t = 1.0)]
        margin: f64,
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
        #[arg(long, default_value_t = 1e-2)]
        action_tol: f64,
    },
    /// Kernel, Gabor and smoothed decay about chi, with the inclusion checks.
    Classify {
        #[arg(long)]
        op: String,
        #[arg(long)]
        chi: Option<String>,
        /// Grid for the Gabor matrix (default 256, self-dual).
        #[arg(long)]
        gabor_n: Option<usize>,
        #[arg(long)]
        lattice_step: Option<usize>,
    },
    /// Lattice estimate of a symbol norm with a 3n/2 refinement.
    SymbolNorm {
        #[arg(long, default_value = "gaussian")]
        symbol: String,
        #[arg(long, value_enum, default_value_t = NormArg::Sw)]
        norm: NormArg,
        #[arg(long, default_value_t = 0.0)]
        s: f64,
    },
    /// Constant of <.>^{-N} * <.>^{-N} <= C <.>^{-N}.
    WeightCheck {
        #[arg(long)]
        order: f64,
        #[arg(long, default_value_t = 32.0)]
        radius: f64,
    },
    /// Scripted reproduction of a closed-form example.
    Example {
        #[arg(value_enum)]
        name: examples::Name,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum NormArg {
    Sw,
    Ssw,
}

pub enum Failure {
    Core(Error),
    Usage(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Core(Error::Io(e))
    }
}

pub type CliResult<T> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t.max(1)).build_global() {
            eprintln!("tfk: cannot configure threads: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Core(e)) => {
            eprintln!("tfk: {e}");
            ExitCode::from(if e.is_resource() { 3 } else { 2 })
        }
        Err(Failure::Usage(m)) => {
            eprintln!("tfk: {m}");
            ExitCode::from(2)
        }
    }
}

pub struct Ctx {
    pub out: PathBuf,
    pub seed: u64,
}

impl Ctx {
    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    /// Writes `<name>.json` with the result fields, a status and the config
    /// hash, prints it, and returns `pass`.
    pub fn report(&self, name: &str, config: Value, result: Value, pass: bool) -> CliResult<bool> {
        let canonical = serde_json::to_string(&config).expect("json");
        let digest = Sha256::digest(canonical.as_bytes());
        let hash: String = digest.iter().take(8).map(|b| format!("{b:02x}")).collect();
        let mut obj = Map::new();
        obj.insert("command".into(), json!(name));
        obj.insert("status".into(), json!(if pass { "pass" } else { "fail" }));
        obj.insert("config_hash".into(), json!(hash));
        if let Value::Object(m) = result {
            obj.extend(m);
        } else {
            obj.insert("result".into(), result);
        }
        obj.insert("config".into(), config);
        let text = serde_json::to_string_pretty(&Value::Object(obj)).expect("json");
        fs::write(self.path(&format!("{name}.json")), format!("{text}\n"))?;
        println!("{text}");
        Ok(pass)
    }

    pub fn write_csv(&self, name: &str, f: &TFRepresentation) -> CliResult<()> {
        f.write_csv(BufWriter::new(File::create(self.path(name))?))?;
        Ok(())
    }

    pub fn write_tensor(&self, name: &str, t: &ComplexTensor) -> CliResult<()> {
        t.write_tfk1(self.path(name))?;
        Ok(())
    }
}

fn grid_for(cli: &Cli, default_n: usize) -> CliResult<GridSpec> {
    let n = cli.n.unwrap_or(default_n);
    Ok(make_grid(n, cli.extent.unwrap_or((n as f64).sqrt()))?)
}

fn parse_signal(desc: &str, grid: GridSpec, seed: u64) -> CliResult<SampledSignal> {
    Ok(match desc {
        "gaussian" => sample_gaussian(grid),
        "delta" => sample_delta(grid),
        "hermite" => SampledSignal::from_fn(grid, |x| Complex64::new(x * (-std::f64::consts::PI * x * x).exp(), 0.0)),
        "random" => sample_random(grid, seed),
        s if s.starts_with("file:") => {
            let t = ComplexTensor::read_tfk1(&s[5..])?;
            if t.dims != [grid.n()] {
                return Err(Error::Dimension(format!("signal dims {:?}, grid n = {}", t.dims, grid.n())).into());
            }
            SampledSignal::new(grid, t.values)?
        }
        other => return Err(Failure::Usage(format!("unknown signal '{other}'"))),
    })
}

fn parse_matrix(s: &str) -> CliResult<SymplecticMatrix> {
    let m: [[f64; 2]; 2] = serde_json::from_str(s).map_err(|e| Failure::Usage(format!("matrix JSON: {e}")))?;
    Ok(SymplecticMatrix::new(m)?)
}

fn chi_for(op: &OperatorDesc, chi: &Option<String>) -> CliResult<SymplecticMatrix> {
    match chi {
        Some(s) => parse_matrix(s),
        None => op.canonical_map().ok_or_else(|| Failure::Usage("operator has no canonical map; pass --chi".into())),
    }
}

fn parse_lattice(s: &str, grid: &GridSpec, step: Option<usize>) -> CliResult<LatticeSpec> {
    if s == "full" {
        return Ok(LatticeSpec::full(grid));
    }
    let (a, b) = s.split_once('x').ok_or_else(|| Failure::Usage(format!("lattice '{s}' is not MxM")))?;
    let parse = |t: &str| t.trim().parse::<usize>().map_err(|_| Failure::Usage(format!("lattice '{s}' is not MxM")));
    let (mx, mk) = (parse(a)?, parse(b)?);
    if mx == 0 || mk == 0 {
        return Err(Failure::Usage("empty lattice".into()));
    }
    let fill = |m: usize, half: f64, h: f64| {
        if m < 2 {
            1
        } else {
            ((2.0 * half / ((m - 1) as f64 * h)).floor() as usize).max(1)
        }
    };
    let r = SafeRegion::gabor(grid);
    let sx = step.unwrap_or_else(|| fill(mx, r.x_max, grid.dx()));
    let sk = step.unwrap_or_else(|| fill(mk, r.xi_max, grid.dxi()));
    Ok(LatticeSpec { step_x: sx, step_xi: sk, m_x: mx, m_xi: mk })
}

fn grid_config(grid: &GridSpec) -> Value {
    json!({ "n": grid.n(), "L": grid.extent() })
}

fn run(cli: &Cli) -> CliResult<bool> {
    fs::create_dir_all(&cli.out)?;
    let ctx = Ctx { out: cli.out.clone(), seed: cli.seed };
    match &cli.cmd {
        Command::Stft { signal, window } => {
            let grid = grid_for(cli, 128)?;
            let f = parse_signal(signal, grid, cli.seed)?;
            let g = parse_signal(window, grid, cli.seed)?;
            let v = stft(&f, &g)?;
            ctx.write_csv("stft.csv", &v)?;
            ctx.write_tensor("stft.tfk", &v.to_tensor())?;
            let config = json!({ "grid": grid_config(&grid), "signal": signal, "window": window, "seed": cli.seed });
            ctx.report("stft", config, json!({ "max_abs": v.max_abs(), "l2_norm": v.l2_norm() }), true)
        }
        Command::Wigner { signal, signal2 } => {
            let grid = grid_for(cli, 128)?;
            let f = parse_signal(signal, grid, cli.seed)?;
            let g = match signal2 {
                Some(s) => parse_signal(s, grid, cli.seed)?,
                None => f.clone(),
            };
            let w = cross_wigner(&f, &g)?;
            ctx.write_csv("wigner.csv", &w)?;
            ctx.write_tensor("wigner.tfk", &w.to_tensor())?;
            let h = grid.n() / 2;
            let config = json!({ "grid": grid_config(&grid), "signal": signal, "signal2": signal2, "seed": cli.seed });
            let origin = w.at(h, h);
            ctx.report("wigner", config, json!({ "at_origin": [origin.re, origin.im], "max_abs": w.max_abs(), "l2_norm": w.l2_norm() }), true)
        }
        Command::Gabor { op, lattice, step, chi } => {
            let grid = grid_for(cli, 256)?;
            let desc = OperatorDesc::from_json(op)?;
            let chi = chi_for(&desc, chi)?;
            let lat = parse_lattice(lattice, &grid, *step)?;
            let t = desc.build(&grid)?;
            let phi = sample_gaussian(grid);
            let k = gabor_matrix(&t, &phi, &phi, &lat)?;
            ctx.write_tensor("gabor.tfk", &ComplexTensor::new(vec![lat.m_x, lat.m_xi, lat.m_x, lat.m_xi], k.values.clone())?)?;
            let config = json!({ "grid": grid_config(&grid), "op": desc, "lattice": lat, "chi": chi.m });
            match decay_fit(&k, &chi, &ShellConfig::default()) {
                Ok(fit) => {
                    fit.write_shells_csv(BufWriter::new(File::create(ctx.path("shells.csv"))?))?;
                    ctx.report("gabor", config, json!({ "op": t.describe(), "fit": fit }), true)
                }
                Err(e @ Error::DegenerateFit(_)) => ctx.report("gabor", config, json!({ "op": t.describe(), "fit": null, "fit_error": e.to_string() }), false),
                Err(e) => Err(e.into()),
            }
        }
        Command::Kernel { op, chi } => {
            let grid = grid_for(cli, 32)?;
            let desc = OperatorDesc::from_json(op)?;
            let chi = chi_for(&desc, chi)?;
            let t = desc.build(&grid)?;
            let k = wigner_kernel(&t, &grid)?;
            let c = concentration(&k, &chi, 2.0);
            ctx.write_tensor("kernel.tfk", &k.to_tensor())?;
            let config = json!({ "grid": grid_config(&grid), "op": desc, "chi": chi.m });
            let result = json!({ "op": t.describe(), "n": grid.n(), "L": grid.extent(), "concentration": c, "max_abs": k.max_abs(), "l2_norm": k.l2_norm() });
            ctx.report("kernel", config, result, true)
        }
        Command::Smooth { op } => {
            let grid = grid_for(cli, 32)?;
            let desc = OperatorDesc::from_json(op)?;
            let t = desc.build(&grid)?;
            let s = gaussian_smoothed(wigner_kernel(&t, &grid)?)?;
            let max_im = s.values.iter().map(|v| v.im.abs()).fold(0.0, f64::max);
            let min_re = s.values.iter().map(|v| v.re).fold(f64::INFINITY, f64::min);
            ctx.write_tensor("smoothed.tfk", &s.to_tensor())?;
            let config = json!({ "grid": grid_config(&grid), "op": desc, "window": "gaussian" });
            let result = json!({ "op": t.describe(), "n": grid.n(), "L": grid.extent(), "max_abs": s.max_abs(), "max_imag": max_im, "min_real": min_re });
            ctx.report("smooth", config, result, true)
        }
        Command::Verify { op, lattice, margin, tol, action_tol } => {
            let grid = grid_for(cli, 32)?;
            let desc = OperatorDesc::from_json(op)?;
            let t = desc.build(&grid)?;
            let lat = parse_lattice(lattice, &grid, Some(1))?;
            let phi = sample_gaussian(grid);
            let region = SafeRegion::wigner_with_margin(&grid, *margin);
            let rep = verify_thm34_in(&t, &phi, &phi, &lat, &region, None)?;
            let action = verify_wigner_action(&t, &phi, &phi)?;
            let pass = rep.sup_error <= *tol && action <= *action_tol;
            let config = json!({ "grid": grid_config(&grid), "op": desc, "lattice": lat, "margin": margin, "tol": tol, "action_tol": action_tol });
            let mut result = serde_json::to_value(&rep).expect("json");
            result["thm34_error"] = json!(rep.sup_error);
            result["wigner_action_error"] = json!(action);
            ctx.report("verify", config, result, pass)
        }
        Command::Classify { op, chi, gabor_n, lattice_step } => {
            let desc = OperatorDesc::from_json(op)?;
            let chi = chi_for(&desc, chi)?;
            let mut cfg = ClassConfig::default();
            if let Some(n) = cli.n {
                cfg.kernel_n = n;
            }
            cfg.kernel_extent = cli.extent;
            if let Some(n) = gabor_n {
                cfg.gabor_n = *n;
            }
            if let Some(s) = lattice_step {
                cfg.lattice_step = *s;
            }
            let rep = classify(&desc, &chi, &cfg)?;
            fs::write(ctx.path("classify.md"), render_markdown(std::slice::from_ref(&rep)))?;
            let pass = rep.inclusion_ok && rep.smoothed.ok;
            let config = json!({ "op": desc, "chi": chi.m, "class_config": cfg });
            ctx.report("classify", config, serde_json::to_value(&rep).expect("json"), pass)
        }
        Command::SymbolNorm { symbol, norm, s } => {
            let n = cli.n.unwrap_or(32);
            let norm = match norm {
                NormArg::Sw => NormType::Sw,
                NormArg::Ssw => NormType::Ssw,
            };
            let rep = symbol_norm_report(norm, *s, n, cli.extent, |g| parse_symbol(symbol, g))?;
            let config = json!({ "n": n, "L": cli.extent, "symbol": symbol, "norm": norm, "s": s });
            let pass = rep.stable;
            ctx.report("symbol-norm", config, serde_json::to_value(&rep).expect("json"), pass)
        }
        Command::WeightCheck { order, radius } => {
            let rep = weight_convolution_check(*order, *radius)?;
            let pass = rep.stable && rep.bounded;
            ctx.report("weight-check", json!({ "N": order, "radius": radius }), serde_json::to_value(&rep).expect("json"), pass)
        }
        Command::Example { name } => examples::run(*name, &ctx),
    }
}
