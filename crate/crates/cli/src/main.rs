//! `spe`: noise generation, exponent calculators, simulation and ensemble
//! runs for the stochastic primitive equations.
//!
//! Exit codes: 0 success, 1 failed verification, 2 inadmissible parameters,
//! 3 blow-up, 4 I/O or format error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use spe_core::config::Config;
use spe_core::ensemble::{continuity_experiment, monte_carlo, CriticalSpace, Reduce, TimeStat};
use spe_core::exponents::{
    check_admissibility, check_monitor, critical_exponents, parse_rational, ParamSet, Rational,
};
use spe_core::io::{csv_table, diagnostics_csv, format_float, write_snapshot};
use spe_core::noise::{build_kraichnan, NoiseEnsemble};
use spe_core::verify::run_suite;
use spe_core::{dynamics, Error};

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(
    name = "spe",
    version,
    about = "Stochastic primitive equations toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a Kraichnan ensemble and write it as text.
    NoiseGen {
        #[arg(long, default_value_t = 3)]
        d: usize,
        /// Roughness exponent, e.g. 4/3.
        #[arg(long, default_value = "4/3")]
        alpha: String,
        #[arg(long)]
        kmax: i64,
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        /// Lift a planar ensemble to horizontal 3D fields.
        #[arg(long)]
        lift: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check (p, q, delta, gamma) against the admissible region.
    Admissibility(ParamArgs),
    /// Critical weight, nonlinearity exponent, trace index and Serrin index.
    Exponents {
        #[command(flatten)]
        params: ParamArgs,
        /// Serrin monitor triple; all three are required together.
        #[arg(long, requires_all = ["q0", "delta0"])]
        p0: Option<String>,
        #[arg(long, requires_all = ["p0", "delta0"])]
        q0: Option<String>,
        #[arg(long, requires_all = ["p0", "q0"])]
        delta0: Option<String>,
    },
    /// Run one trajectory.
    Simulate(RunArgs),
    /// Run an ensemble of trajectories with seeds seed, seed+1, ...
    Montecarlo {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        paths: Option<usize>,
        /// mean_l2, mean_X or quantiles.
        #[arg(long)]
        reduce: Option<String>,
    },
    /// Run the invariant checks.
    Verify {
        #[arg(long, default_value_t = 8)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Paired-path continuity experiment.
    Continuity(RunArgs),
}

#[derive(Args)]
struct ParamArgs {
    #[arg(long)]
    p: String,
    #[arg(long)]
    q: String,
    #[arg(long)]
    delta: String,
    #[arg(long)]
    gamma: String,
    #[arg(long, requires = "gamma1")]
    delta1: Option<String>,
    #[arg(long, requires = "delta1")]
    gamma1: Option<String>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides run.output_dir.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Extra `section.key=value` settings applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

enum Failure {
    Core(Error),
    Verification(usize),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Core(e.into())
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::BlowUp { .. } | Error::MonitorTripped { .. } => 3,
        Error::Io(_) | Error::Format(_) | Error::Disordered(_) => 4,
        _ => 2,
    }
}

fn rational(name: &str, s: &str) -> Result<Rational, Error> {
    parse_rational(s).map_err(|e| Error::Parameter(format!("--{name}: {e}")))
}

impl ParamArgs {
    fn resolve(&self) -> Result<ParamSet<Rational>, Error> {
        let mut p = ParamSet::new(
            rational("p", &self.p)?,
            rational("q", &self.q)?,
            rational("delta", &self.delta)?,
            rational("gamma", &self.gamma)?,
        );
        if let (Some(d1), Some(g1)) = (&self.delta1, &self.gamma1) {
            p.delta1 = Some(rational("delta1", d1)?);
            p.gamma1 = Some(rational("gamma1", g1)?);
        }
        Ok(p)
    }
}

impl RunArgs {
    fn resolve(&self) -> Result<(Config, PathBuf), Error> {
        let mut cfg = match &self.config {
            Some(p) => Config::load(p)?,
            None => Config::default(),
        };
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("--set expects KEY=VALUE, got '{kv}'")))?;
            cfg.set(k.trim(), v.trim())?;
        }
        if let Some(s) = self.seed {
            cfg.set("run.seed", &s.to_string())?;
        }
        if let Some(o) = &self.out {
            cfg.set("run.output_dir", &o.to_string_lossy())?;
        }
        let dir = PathBuf::from(cfg.get("run.output_dir"));
        fs::create_dir_all(&dir)?;
        fs::write(dir.join("manifest.txt"), cfg.manifest(VERSION))?;
        Ok((cfg, dir))
    }
}

fn noise_gen(
    d: usize,
    alpha: &str,
    kmax: i64,
    scale: f64,
    lift: bool,
    out: Option<&Path>,
) -> Result<(), Failure> {
    let alpha = spe_core::config::parse_real(alpha)
        .ok_or_else(|| Error::Parameter(format!("bad alpha '{alpha}'")))?;
    let mut e: NoiseEnsemble = build_kraichnan(d, alpha, kmax)?.scaled(scale);
    if lift {
        e = e.lift_horizontal()?;
    }
    let text = e.to_text();
    match out {
        Some(p) => {
            fs::write(p, &text)?;
            println!("modes = {}", e.len());
            println!("decay_slope = {}", format_float(e.decay_slope()?));
            if let Ok(s) = e.spectrum_slope() {
                println!("spectrum_slope = {}", format_float(s));
            }
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn admissibility(args: &ParamArgs) -> Result<(), Failure> {
    let params = args.resolve()?;
    let (ok, reasons) = check_admissibility(&params);
    println!("admissible = {ok}");
    for r in &reasons {
        println!("violated: {r}");
    }
    if ok {
        Ok(())
    } else {
        Err(Error::NotAdmissible(reasons).into())
    }
}

fn exponents(args: &ParamArgs, monitor: Option<(&str, &str, &str)>) -> Result<(), Failure> {
    let params = args.resolve()?;
    let monitor = match monitor {
        Some((p0, q0, d0)) => {
            let (p0, q0) = (rational("p0", p0)?, rational("q0", q0)?);
            check_monitor(p0, q0, rational("delta0", d0)?)?;
            Some((p0, q0))
        }
        None => None,
    };
    let rep = critical_exponents(&params, monitor)?;
    println!("alpha_c = {}", rep.alpha_c);
    println!("beta = {}", rep.beta);
    println!("trace_smoothness = {}", rep.trace_smoothness);
    if let Some(mu0) = rep.serrin_mu0 {
        println!("serrin_mu0 = {mu0}");
    }
    Ok(())
}

fn simulate(args: &RunArgs) -> Result<(), Failure> {
    let (cfg, dir) = args.resolve()?;
    let (config, initial) = cfg.setup()?;
    write_snapshot(&dir.join("v_initial.hpe"), &initial.v)?;
    let result = dynamics::simulate(&config, &initial);
    let (records, last, outcome) = match result {
        Ok(t) => {
            println!("serrin_integral = {}", format_float(t.serrin_integral));
            if t.serrin_tripped {
                eprintln!("warning: Serrin monitor exceeded its threshold");
            }
            (t.records, t.final_state, Ok(()))
        }
        Err(f) => (f.records, f.last_state, Err(f.error)),
    };
    fs::write(dir.join("diagnostics.csv"), diagnostics_csv(&records))?;
    write_snapshot(&dir.join("v_final.hpe"), &last.v)?;
    if let Some(th) = &last.theta {
        write_snapshot(&dir.join("theta_final.hpe"), th)?;
    }
    println!("records = {}", records.len());
    println!("t_final = {}", format_float(last.t));
    outcome.map_err(Failure::Core)
}

fn montecarlo(args: &RunArgs, paths: Option<usize>, reduce: Option<&str>) -> Result<(), Failure> {
    let (mut cfg, dir) = args.resolve()?;
    if let Some(m) = paths {
        cfg.set("montecarlo.paths", &m.to_string())?;
    }
    if let Some(r) = reduce {
        cfg.set("montecarlo.reduce", r)?;
    }
    fs::write(dir.join("manifest.txt"), cfg.manifest(VERSION))?;
    let (config, initial) = cfg.setup()?;
    let reduce = Reduce::parse(cfg.get("montecarlo.reduce"))?;
    let rep = monte_carlo(
        &config,
        &initial,
        cfg.integer("montecarlo.paths")? as usize,
        reduce,
    )?;
    let rows = rep.stats.iter().map(|s| s.values().map(Some));
    fs::write(
        dir.join("montecarlo.csv"),
        csv_table(&TimeStat::COLUMNS, rows),
    )?;
    println!("reduce = {}", reduce.name());
    println!("paths = {}", rep.paths);
    println!(
        "blow_up_fraction = {}",
        format_float(rep.blow_up_fraction())
    );
    Ok(())
}

fn continuity(args: &RunArgs) -> Result<(), Failure> {
    let (cfg, dir) = args.resolve()?;
    let (config, initial) = cfg.setup()?;
    let space: CriticalSpace = cfg.critical_space()?;
    let pert = dynamics::random_initial(
        config.grid,
        cfg.integer("init.kmax")? as usize,
        1.0,
        cfg.integer("continuity.perturbation_seed")?,
    );
    let pairs = cfg.integer("continuity.pairs")? as usize;
    let mut rows = Vec::new();
    for eps in cfg.real_list("continuity.eps")? {
        let rep = continuity_experiment(&config, &initial.v, &pert, eps, pairs, space)?;
        let q = rep.quantiles.map(|q| q.map(Some)).unwrap_or([None; 5]);
        println!(
            "eps = {}  median_sup_distance = {}  failed = {}",
            format_float(eps),
            q[2].map(format_float).unwrap_or_else(|| "nan".into()),
            rep.failed
        );
        rows.push([
            Some(eps),
            q[0],
            q[1],
            q[2],
            q[3],
            q[4],
            Some(rep.failed as f64),
        ]);
    }
    let header = ["eps", "min", "q25", "median", "q75", "max", "failed"];
    fs::write(dir.join("continuity.csv"), csv_table(&header, rows))?;
    Ok(())
}

fn verify(n: usize, seed: u64) -> Result<(), Failure> {
    let results = run_suite(n, seed)?;
    let mut failed = 0;
    for r in &results {
        let tag = if r.passed { "PASS" } else { "FAIL" };
        println!(
            "{tag} {}: {:.3e} (tolerance {:.1e})",
            r.name, r.value, r.tolerance
        );
        failed += usize::from(!r.passed);
    }
    if failed == 0 {
        Ok(())
    } else {
        Err(Failure::Verification(failed))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::NoiseGen {
            d,
            alpha,
            kmax,
            scale,
            lift,
            out,
        } => noise_gen(*d, alpha, *kmax, *scale, *lift, out.as_deref()),
        Command::Admissibility(p) => admissibility(p),
        Command::Exponents {
            params,
            p0,
            q0,
            delta0,
        } => {
            let monitor = match (p0, q0, delta0) {
                (Some(a), Some(b), Some(c)) => Some((a.as_str(), b.as_str(), c.as_str())),
                _ => None,
            };
            exponents(params, monitor)
        }
        Command::Simulate(r) => simulate(r),
        Command::Montecarlo { run, paths, reduce } => montecarlo(run, *paths, reduce.as_deref()),
        Command::Verify { n, seed } => verify(*n, *seed),
        Command::Continuity(r) => continuity(r),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
        Err(Failure::Verification(n)) => {
            eprintln!("{n} check(s) failed");
            ExitCode::from(1)
        }
    }
}
