//! `dsii`: batch front end for the DS-II scattering toolkit.

mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dsii_core::evolution::{asymptotic_gap, solve_ds2};
use dsii_core::expansions::{compute_coeffs, fit_expansion, recursion_check};
use dsii_core::multilinear::{build_brown_instance, criticality_check, lambda_mc, Exponent, Profile};
use dsii_core::reference::split_step;
use dsii_core::scattering::{forward_r, inverse_i, symmetry_check};
use dsii_core::verify::{verify_all, VerifyProfile};
use dsii_core::{Complex64, Error, ErrorClass, Field, Result};
use serde_json::json;

use config::{parse_count, parse_list, DataSpec, ExperimentConfig};
use output::Run;

#[derive(Parser)]
#[command(name = "dsii", version, about = "Inverse scattering experiments for defocussing DS-II")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// JSON experiment config; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long = "grid-n", global = true)]
    grid_n: Option<usize>,
    #[arg(long = "grid-L", global = true)]
    grid_l: Option<f64>,
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    verbose: bool,
}

#[derive(Subcommand)]
enum Command {
    /// q -> r = R q.
    Forward {
        #[arg(long)]
        q: Option<PathBuf>,
    },
    /// r -> q = I r.
    Inverse {
        #[arg(long)]
        r: PathBuf,
    },
    /// q -> R q -> I R q.
    Roundtrip {
        #[arg(long)]
        q: Option<PathBuf>,
    },
    /// Inverse-scattering solution at time t.
    Evolve {
        #[arg(long)]
        q0: Option<PathBuf>,
        #[arg(long)]
        t: Option<f64>,
    },
    /// Split-step solution at time t.
    Reference {
        #[arg(long)]
        q0: Option<PathBuf>,
        #[arg(long)]
        t: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
        /// Write per-step conservation telemetry as CSV.
        #[arg(long)]
        telemetry: bool,
    },
    /// Both solvers at time t, and their difference.
    Compare {
        #[arg(long)]
        q0: Option<PathBuf>,
        #[arg(long)]
        t: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
    },
    /// t |q - u|_inf at probe points for each t.
    Asymptotics {
        #[arg(long)]
        q0: Option<PathBuf>,
        #[arg(long)]
        tlist: Option<String>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Symmetries of the forward map.
    Symmetry {
        #[arg(long)]
        q: Option<PathBuf>,
    },
    /// Large-k expansion coefficients, fitted and closed form.
    Expansion {
        #[arg(long)]
        q: Option<PathBuf>,
        #[arg(long)]
        z: Option<String>,
        #[arg(long)]
        kladder: Option<String>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Exact criticality check for the Brown family.
    Criticality {
        #[arg(long)]
        n: Option<usize>,
        /// One exponent for every map, or one per map, comma separated.
        #[arg(long)]
        exponents: Option<String>,
    },
    /// Monte-Carlo estimates of the normalised form Lambda_n.
    Lambda {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        samples: Option<String>,
    },
    /// The acceptance suite.
    VerifyAll {
        /// Smaller grids, same thresholds.
        #[arg(long)]
        quick: bool,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Forward { .. } => "forward",
            Command::Inverse { .. } => "inverse",
            Command::Roundtrip { .. } => "roundtrip",
            Command::Evolve { .. } => "evolve",
            Command::Reference { .. } => "reference",
            Command::Compare { .. } => "compare",
            Command::Asymptotics { .. } => "asymptotics",
            Command::Symmetry { .. } => "symmetry",
            Command::Expansion { .. } => "expansion",
            Command::Criticality { .. } => "criticality",
            Command::Lambda { .. } => "lambda",
            Command::VerifyAll { .. } => "verify-all",
        }
    }

    /// The input file flag of this command, if any.
    fn input(&self) -> Option<&PathBuf> {
        match self {
            Command::Forward { q } | Command::Roundtrip { q } | Command::Symmetry { q } => q.as_ref(),
            Command::Expansion { q, .. } => q.as_ref(),
            Command::Evolve { q0, .. }
            | Command::Reference { q0, .. }
            | Command::Compare { q0, .. }
            | Command::Asymptotics { q0, .. } => q0.as_ref(),
            Command::Inverse { r } => Some(r),
            _ => None,
        }
    }
}

/// Config file, then flags.
fn resolve(cli: &Cli) -> Result<ExperimentConfig> {
    let g = &cli.global;
    let mut cfg = match &g.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(n) = g.grid_n {
        cfg.grid.n = n;
    }
    if let Some(l) = g.grid_l {
        cfg.grid.l = l;
    }
    if let Some(t) = g.tol {
        cfg.solver.tol = t;
    }
    if let Some(t) = g.threads {
        cfg.solver.threads = t;
    }
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if g.out.is_some() {
        cfg.out = g.out.clone();
    }
    if g.verbose {
        cfg.solver.verbose = true;
        cfg.step.verbose = true;
    }
    if let Some(p) = cli.command.input() {
        cfg.data = DataSpec::File { path: p.clone() };
    }
    let task = &mut cfg.task;
    match &cli.command {
        Command::Evolve { t, .. } => {
            if let Some(t) = t {
                task.t = *t;
            }
        }
        Command::Reference { t, dt, telemetry, .. } => {
            if let Some(t) = t {
                task.t = *t;
            }
            if let Some(dt) = dt {
                cfg.step.dt = *dt;
            }
            task.telemetry |= telemetry;
        }
        Command::Compare { t, dt, .. } => {
            if let Some(t) = t {
                task.t = *t;
            }
            if let Some(dt) = dt {
                cfg.step.dt = *dt;
            }
        }
        Command::Asymptotics { tlist: Some(s), .. } => task.tlist = parse_list(s, "tlist")?,
        Command::Expansion { z, kladder, .. } => {
            if let Some(s) = z {
                let v = parse_list(s, "z")?;
                if v.len() != 2 {
                    return Err(Error::InvalidConfig(format!("--z needs two numbers, got {s:?}")));
                }
                task.z = [v[0], v[1]];
            }
            if let Some(s) = kladder {
                task.kladder = parse_list(s, "kladder")?;
            }
        }
        Command::Criticality { n, exponents } => {
            if let Some(n) = n {
                task.n = *n;
            }
            if let Some(s) = exponents {
                task.exponents = Some(s.split(',').map(|e| e.trim().to_string()).collect());
            }
        }
        Command::Lambda { n, samples } => {
            if let Some(n) = n {
                task.n = *n;
            }
            if let Some(s) = samples {
                task.samples = parse_count(s)?;
            }
        }
        Command::VerifyAll { quick } => task.quick |= quick,
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Shortest round-trip form, always with an exponent.
fn num(v: f64) -> String {
    format!("{v:e}")
}

fn rel(a: &Field, b: &Field) -> Result<f64> {
    a.rel_l2_error(b)
}

fn run_command(cmd: &Command, cfg: &ExperimentConfig, run: &mut Run) -> Result<bool> {
    let solver = &cfg.solver;
    let task = &cfg.task;
    match cmd {
        Command::Forward { .. } => {
            let q = cfg.field()?;
            let r = forward_r(&q, solver)?;
            run.field("r.dsf", &r.field)?;
            run.json("forward.json", &r.summary(&q))?;
        }
        Command::Inverse { .. } => {
            let r = cfg.field()?;
            let q = inverse_i(&r, solver)?;
            run.field("q.dsf", &q.field)?;
            run.json("inverse.json", &q.summary(&r))?;
        }
        Command::Roundtrip { .. } => {
            let q = cfg.field()?;
            let r = forward_r(&q, solver)?;
            let back = inverse_i(&r.field, solver)?;
            run.field("r.dsf", &r.field)?;
            run.field("q_roundtrip.dsf", &back.field)?;
            run.json(
                "roundtrip.json",
                &json!({
                    "rel_l2_error": rel(&back.field, &q)?,
                    "forward": r.summary(&q),
                    "inverse": back.summary(&r.field),
                }),
            )?;
        }
        Command::Evolve { .. } => {
            let q0 = cfg.field()?;
            let q = solve_ds2(&q0, task.t, solver)?;
            run.field("q_t.dsf", &q)?;
            run.heatmap("heatmap", &q)?;
            let defect = (q.norm_l2() - q0.norm_l2()).abs() / q0.norm_l2().max(f64::MIN_POSITIVE);
            run.json("evolve.json", &json!({"t": task.t, "l2_in": q0.norm_l2(), "l2_out": q.norm_l2(), "l2_conservation_defect": defect}))?;
        }
        Command::Reference { .. } => {
            let q0 = cfg.field()?;
            let q = if task.telemetry {
                let (steps, dt) = cfg.step.steps_for(task.t);
                let one = dsii_core::reference::StepConfig { dt: dt.abs().max(f64::MIN_POSITIVE), ..cfg.step };
                let mut q = q0.clone();
                let mut rows = Vec::with_capacity(steps);
                let n0 = q0.norm_l2();
                for s in 0..steps {
                    q = split_step(&q, dt, &one)?;
                    let l2 = q.norm_l2();
                    rows.push(vec![
                        (s + 1).to_string(),
                        num((s + 1) as f64 * dt),
                        num(l2),
                        num((l2 - n0).abs() / n0.max(f64::MIN_POSITIVE)),
                        num(q.norm_sup()),
                    ]);
                }
                run.csv(None, "telemetry.csv", &["step", "t", "l2", "l2_conservation_defect", "sup"], &rows)?;
                q
            } else {
                split_step(&q0, task.t, &cfg.step)?
            };
            run.field("q_ref.dsf", &q)?;
            run.heatmap("heatmap", &q)?;
            run.json("reference.json", &json!({"t": task.t, "l2_in": q0.norm_l2(), "l2_out": q.norm_l2()}))?;
        }
        Command::Compare { .. } => {
            let q0 = cfg.field()?;
            let a = solve_ds2(&q0, task.t, solver)?;
            let b = split_step(&q0, task.t, &cfg.step)?;
            let modulus = |f: &Field| f.map(|v| Complex64::new(v.norm(), 0.0));
            let n0 = q0.norm_l2().max(f64::MIN_POSITIVE);
            run.field("q_scattering.dsf", &a)?;
            run.field("q_split_step.dsf", &b)?;
            run.json(
                "compare.json",
                &json!({
                    "t": task.t,
                    "rel_l2_diff": rel(&a, &b)?,
                    "modulus_diff": rel(&modulus(&a), &modulus(&b))?,
                    "conservation_scattering": (a.norm_l2() - q0.norm_l2()).abs() / n0,
                    "conservation_split_step": (b.norm_l2() - q0.norm_l2()).abs() / n0,
                }),
            )?;
        }
        Command::Asymptotics { csv, .. } => {
            let q0 = cfg.field()?;
            let rows = asymptotic_gap(&q0, &task.tlist, solver)?;
            let table: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    vec![num(r.t), num(r.sup_gap), num(r.t_times_gap), num(r.l2_conservation_defect)]
                })
                .collect();
            run.csv(csv.as_deref(), "asymptotics.csv", &["t", "sup_gap", "t_times_gap", "l2_conservation_defect"], &table)?;
        }
        Command::Symmetry { .. } => {
            let q = cfg.field()?;
            run.json("symmetry.json", &symmetry_check(&q, solver)?)?;
        }
        Command::Expansion { csv, .. } => {
            let q = cfg.field()?;
            let z = Complex64::new(task.z[0], task.z[1]);
            let fit = fit_expansion(&q, z, &task.kladder, solver)?;
            let cf = compute_coeffs(&q)?;
            let (row, col) = q.plane().nearest(fit.z).expect("fit point is on the grid");
            let table: Vec<Vec<String>> = fit
                .samples
                .iter()
                .map(|s| {
                    [s.k, s.nu1.re, s.nu1.im, s.nu2.re, s.nu2.im].iter().map(|v| num(*v)).collect()
                })
                .collect();
            run.csv(csv.as_deref(), "expansion.csv", &["k", "nu1_re", "nu1_im", "nu2_re", "nu2_im"], &table)?;
            run.json(
                "expansion.json",
                &json!({
                    "z": fit.z,
                    "fitted": {"nu10": fit.nu10, "nu20": fit.nu20, "nu11": fit.nu11, "nu21": fit.nu21},
                    "closed_form": {
                        "nu10": cf.nu10.at(row, col), "nu20": cf.nu20.at(row, col),
                        "nu11": cf.nu11.at(row, col), "nu21": cf.nu21.at(row, col),
                    },
                    "residual": fit.residual,
                    "condition": fit.condition,
                    "recursion": recursion_check(&q)?,
                }),
            )?;
        }
        Command::Criticality { .. } => {
            let mut inst = build_brown_instance(task.n)?;
            if let Some(list) = &task.exponents {
                let ps: Vec<Exponent> = list.iter().map(|s| s.parse()).collect::<Result<_>>()?;
                inst = match ps.len() {
                    1 => inst.with_uniform_exponent(ps[0]),
                    m if m == inst.maps.len() => dsii_core::multilinear::BLInstance { exponents: ps, ..inst },
                    m => {
                        return Err(Error::InvalidConfig(format!("{m} exponents for {} maps", inst.maps.len())));
                    }
                };
            }
            let rep = criticality_check(&inst)?;
            println!("Brown family n = {}: {} maps on C^{}", task.n, inst.maps.len(), inst.dim);
            println!("whole space: {:?} (sum of 1/p_j = {})", rep.whole_space, rep.whole_space_rhs);
            println!("subspaces classified: {}", rep.checked_count);
            for v in &rep.violations {
                println!("  {:?}: dim {} vs {} on span {:?}", v.kind, v.dim, v.rhs, v.basis);
            }
            println!("verdict: {}", rep.verdict());
            run.json(
                "criticality.json",
                &json!({"n": task.n, "instance": inst, "verdict": rep.verdict(), "report": rep}),
            )?;
        }
        Command::Lambda { .. } => {
            let profile = match &cfg.data {
                DataSpec::Gaussian { amplitude, width, center } => Profile::Gaussian {
                    amplitude: *amplitude,
                    width: *width,
                    centre: Complex64::new(center[0], center[1]),
                },
                _ => Profile::Grid(cfg.field()?),
            };
            let qs = vec![profile.clone(); 2 * task.n + 1];
            let mut counts = Vec::new();
            let mut c = 10_000usize;
            while c < task.samples {
                counts.push(c);
                c *= 10;
            }
            counts.push(task.samples);
            let mut table = Vec::new();
            for s in counts {
                let e = lambda_mc(task.n, &profile, &qs, s, cfg.seed)?;
                table.push(vec![
                    e.samples.to_string(),
                    num(e.ratio),
                    num(e.std_err),
                    num(e.tail_index),
                ]);
            }
            run.csv(None, "lambda.csv", &["samples", "ratio", "std_err", "tail_index"], &table)?;
        }
        Command::VerifyAll { .. } => {
            let profile = if task.quick { VerifyProfile::Quick } else { VerifyProfile::Full };
            let rep = verify_all(profile, cfg.seed, solver, |c| println!("{}", c.line()));
            println!("{} of {} criteria passed", rep.passed, rep.total);
            run.json("verify_report.json", &rep)?;
            return Ok(rep.all_passed());
        }
    }
    Ok(true)
}

fn exit_code(class: ErrorClass) -> u8 {
    match class {
        ErrorClass::Validation => 2,
        ErrorClass::Numerical => 3,
        ErrorClass::Budget => 4,
    }
}

fn report_error(e: &Error) -> ExitCode {
    let code = exit_code(e.class());
    let class = format!("{:?}", e.class()).to_lowercase();
    eprintln!("{}", json!({"error": {"class": class, "message": e.to_string(), "exit_code": code}}));
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match resolve(&cli) {
        Ok(c) => c,
        Err(e) => {
            if let Some(dir) = &cli.global.out {
                output::write_error(dir, &e);
            }
            return report_error(&e);
        }
    };
    // Grid sweeps size their own pools; this covers the rest.
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cfg.solver.threads).build_global() {
        return report_error(&Error::InvalidConfig(format!("thread pool: {e}")));
    }
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    let mut run = match Run::start(&out, cli.command.name(), &cfg) {
        Ok(r) => r,
        Err(e) => return report_error(&e),
    };
    match run_command(&cli.command, &cfg, &mut run) {
        Ok(all_passed) => match run.finish(None) {
            Ok(()) if all_passed => ExitCode::SUCCESS,
            Ok(()) => ExitCode::from(exit_code(ErrorClass::Numerical)),
            Err(e) => report_error(&e),
        },
        Err(e) => {
            let _ = run.finish(Some(&e));
            report_error(&e)
        }
    }
}
