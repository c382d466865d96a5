use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use urlab::config::RunConfig;
use urlab::pipeline::Pipeline;
use urlab::suite::run_suite;
use urlab::Error;

#[derive(Parser)]
#[command(
    name = "urlab",
    version,
    about = "alpha-numbers, Whitney regions and square functions on discrete measures"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the dataset
    Gen(Common),
    /// Build the dyadic cube tree
    Cubes(Common),
    /// Build the Whitney decomposition and its association to cubes
    Whitney(Common),
    /// Compute alpha-numbers
    Alpha(Common),
    /// Carleson functionals and square-function ratios
    Sqfn(Common),
    /// Full verification suite: report.json, summary.csv, ratios.svg
    Verify(Common),
}

#[derive(Args)]
struct Common {
    /// Run configuration (JSON, schema urlab-config/1)
    #[arg(long)]
    config: PathBuf,
    /// Override a config field, e.g. --set levels.j_max=6
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory (default: output_dir from the config)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: URLAB_THREADS, then hardware parallelism)
    #[arg(long)]
    threads: Option<usize>,
}

fn threads(flag: Option<usize>) -> Result<Option<usize>, Error> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var("URLAB_THREADS") {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::Config(format!("URLAB_THREADS={v} is not a thread count"))),
        Err(_) => Ok(None),
    }
}

fn run(name: &str, cmd: &Command, c: &Common) -> Result<bool, Error> {
    if let Some(n) = threads(c.threads)? {
        if n == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    let cfg = RunConfig::load(&c.config, &c.overrides)?;
    if let Command::Verify(_) = cmd {
        let r = run_suite(&cfg, c.out.as_deref())?;
        let out = c.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
        let k = &r.constants;
        for (label, v) in [
            ("C_main", k.c_main),
            ("C_triv", k.c_triv),
            ("C_pack", k.c_pack),
            ("C_t1", k.c_t1),
            ("C_mod", k.c_mod),
            ("C_SF", k.c_sf),
            ("C_bilat", k.c_bilat),
        ] {
            match v.value {
                Some(x) => println!("{label:8} {x:.6e}  ({} samples)", v.samples),
                None => println!("{label:8} -          ({} samples)", v.samples),
            }
        }
        for i in &r.invariants {
            println!(
                "{} {}: {}",
                if i.passed { "ok  " } else { "FAIL" },
                i.name,
                i.detail
            );
        }
        for f in &r.findings {
            println!("finding: {f}");
        }
        println!("report: {}", out.join("report.json").display());
        return Ok(r.passed);
    }
    let p = Pipeline::new(cfg, c.out.as_deref())?;
    let mu = p.measure()?;
    println!(
        "{name}: {} atoms in R^{} (n = {}), resolution {:.3e}, diameter {:.4}",
        mu.len(),
        mu.d(),
        mu.n(),
        mu.resolution(),
        mu.diameter()
    );
    if let Command::Gen(_) = cmd {
        return Ok(true);
    }
    let tree = p.cubes(&mu)?;
    for j in tree.j_min()..=tree.j_max() {
        println!("level {j}: {} cubes", tree.level(j).len());
    }
    if let Command::Cubes(_) = cmd {
        return Ok(true);
    }
    let w = p.whitney(&mu, &tree)?;
    println!(
        "whitney: {} cells ({} unassociated, {} truncated), M = {}",
        w.cells.len(),
        w.unassociated().count(),
        w.truncated.len(),
        w.engulfing
    );
    if let Command::Whitney(_) = cmd {
        return Ok(true);
    }
    let g = urlab::pipeline::Geometry {
        tree: tree.with_engulfing(w.engulfing),
        mu,
        whitney: w,
    };
    let table = p.alpha(&g)?;
    for j in g.tree.j_min()..=g.tree.j_max() {
        let a: Vec<f64> = g
            .tree
            .level(j)
            .iter()
            .filter_map(|&q| table.get(q))
            .map(|r| r.alpha)
            .collect();
        if a.is_empty() {
            continue;
        }
        let max = a.iter().cloned().fold(0.0, f64::max);
        let mean = a.iter().sum::<f64>() / a.len() as f64;
        println!(
            "alpha level {j}: {} cubes, mean {mean:.4e}, max {max:.4e}",
            a.len()
        );
    }
    if let Command::Alpha(_) = cmd {
        return Ok(true);
    }
    let f = p.functionals(&g, &table)?;
    let max = |v: &[urlab::sqfn::FunctionalReport]| v.iter().map(|r| r.ratio).fold(0.0, f64::max);
    println!(
        "carleson_t1: max {:.4e} over {} roots",
        max(&f.t1),
        f.t1.len()
    );
    println!(
        "carleson_mod: max {:.4e} over {} roots",
        max(&f.modified),
        f.modified.len()
    );
    println!(
        "sqfn: max {:.4e} over {} sign vectors",
        max(&f.sqfn),
        f.sqfn.len()
    );
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, c) = match &cli.command {
        Command::Gen(c) => ("gen", c),
        Command::Cubes(c) => ("cubes", c),
        Command::Whitney(c) => ("whitney", c),
        Command::Alpha(c) => ("alpha", c),
        Command::Sqfn(c) => ("sqfn", c),
        Command::Verify(c) => ("verify", c),
    };
    match run(name, &cli.command, c) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("urlab {name}: invariant violation (report written)");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("urlab {name}: {e}");
            if e.is_numeric() {
                ExitCode::from(3)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
