//! `steptune` — experiment driver around the steptune library. Every
//! subcommand writes one deterministic CSV (or SVG) artifact; timing goes to
//! stderr so the artifact bytes depend only on the parameters and seed.

mod config;
mod experiments;
mod plot;
mod records;

use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use steptune::ls_meta::{GridScale, GridSpec};
use steptune::quad_meta::GradMethod;

use crate::config::FileConfig;
use crate::experiments::{
    run_ls_compare, run_ls_large_sample, run_quad_meta_train, run_quad_sweep_t, LsCompareParams,
    LsLargeSampleParams, QuadMetaTrainParams, QuadSweepTParams,
};

#[derive(Parser)]
#[command(name = "steptune", about = "Learned step-size experiment harness")]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Master seed; every stream of randomness derives from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Optional key=value config file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Meta-gradient descent on the step size of a sampled quadratic task.
    QuadMetaTrain {
        #[arg(long)]
        dim: Option<usize>,
        /// Inner unroll length.
        #[arg(long)]
        t: Option<usize>,
        #[arg(long)]
        eta0: Option<f64>,
        /// Number of meta-steps.
        #[arg(long)]
        steps: Option<usize>,
        /// c in the meta step rule mu_k = c/sqrt(k).
        #[arg(long)]
        step_const: Option<f64>,
        /// Gradient method: stable | naive.
        #[arg(long)]
        method: Option<String>,
        /// Points in the reference grid argmin.
        #[arg(long)]
        grid_points: Option<usize>,
    },
    /// Grid argmin of the quadratic meta-objective across unroll lengths.
    QuadSweepT {
        #[arg(long)]
        dim: Option<usize>,
        /// Comma-separated unroll lengths.
        #[arg(long)]
        t_list: Option<String>,
        #[arg(long)]
        grid_points: Option<usize>,
    },
    /// Train-by-train vs train-by-validation with the GD inner, over sigma.
    LsCompare {
        #[command(flatten)]
        ls: LsArgs,
    },
    /// Train-by-train tuning in the large-sample regime, one configuration.
    LsLargeSample {
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        t: Option<usize>,
        /// Tasks in the tuning ensemble.
        #[arg(long)]
        m: Option<usize>,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long)]
        test_tasks: Option<usize>,
    },
    /// Same comparison with the SGD inner restricted to its feasible range.
    LsSgdCompare {
        #[command(flatten)]
        ls: LsArgs,
        /// SGD replicas averaged per task.
        #[arg(long)]
        replicas: Option<usize>,
        /// Constant in the TbV feasible-range bound.
        #[arg(long)]
        c5: Option<f64>,
    },
    /// Render a CSV artifact as an SVG line plot (first column is x).
    Plot {
        /// CSV file produced by another subcommand.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        title: Option<String>,
    },
}

#[derive(Args)]
struct LsArgs {
    #[arg(long)]
    dim: Option<usize>,
    /// Total sample budget; train-by-validation splits it in half.
    #[arg(long)]
    n: Option<usize>,
    /// Comma-separated noise levels.
    #[arg(long)]
    sigma_list: Option<String>,
    #[arg(long)]
    t: Option<usize>,
    /// Tasks in the tuning ensemble.
    #[arg(long)]
    m: Option<usize>,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long)]
    test_tasks: Option<usize>,
}

#[derive(Args)]
struct GridArgs {
    #[arg(long)]
    grid_lo: Option<f64>,
    #[arg(long)]
    grid_hi: Option<f64>,
    #[arg(long)]
    grid_points: Option<usize>,
}

impl GridArgs {
    fn resolve(&self, cfg: &FileConfig) -> Result<GridSpec> {
        let default = GridSpec::default();
        Ok(GridSpec {
            lo: cfg.resolve(self.grid_lo, "grid_lo", default.lo)?,
            hi: cfg.resolve(self.grid_hi, "grid_hi", default.hi)?,
            points: cfg.resolve(self.grid_points, "grid_points", default.points)?,
            scale: GridScale::LogLinear,
        })
    }
}

fn parse_list<T: std::str::FromStr>(raw: &str, what: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    raw.split(',')
        .map(|s| {
            s.trim()
                .parse::<T>()
                .map_err(|e| anyhow::anyhow!("bad {what} entry {s:?}: {e}"))
        })
        .collect()
}

fn resolve_ls(ls: &LsArgs, cfg: &FileConfig, seed: u64) -> Result<LsCompareParams> {
    Ok(LsCompareParams {
        dim: cfg.resolve(ls.dim, "dim", 30)?,
        n: cfg.resolve(ls.n, "n", 50)?,
        sigma_list: parse_list(
            &cfg.resolve(ls.sigma_list.clone(), "sigma_list", "0.5,1,2,4".into())?,
            "sigma_list",
        )?,
        t: cfg.resolve(ls.t, "t", 100)?,
        m: cfg.resolve(ls.m, "m", 20)?,
        grid: ls.grid.resolve(cfg)?,
        test_tasks: cfg.resolve(ls.test_tasks, "test_tasks", 10)?,
        seed,
        replicas: None,
        c5: 1.0,
    })
}

fn run(cli: &Cli) -> Result<String> {
    let cfg = FileConfig::load(cli.common.config.as_deref())?;
    let seed = cfg.resolve(cli.common.seed, "seed", 0u64)?;
    let threads = cfg.resolve(cli.common.threads, "threads", 0usize)?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .context("thread pool setup")?;

    match &cli.command {
        Command::QuadMetaTrain {
            dim,
            t,
            eta0,
            steps,
            step_const,
            method,
            grid_points,
        } => {
            let method = match cfg
                .resolve(method.clone(), "method", "stable".to_string())?
                .as_str()
            {
                "stable" => GradMethod::LogStable,
                "naive" => GradMethod::LogNaiveBackprop,
                other => bail!("unknown method {other:?} (expected stable or naive)"),
            };
            run_quad_meta_train(&QuadMetaTrainParams {
                dim: cfg.resolve(*dim, "dim", 20)?,
                t: cfg.resolve(*t, "t", 100)?,
                eta0: cfg.resolve(*eta0, "eta0", 0.0)?,
                steps: cfg.resolve(*steps, "steps", 200)?,
                step_const: cfg.resolve(*step_const, "step_const", 1e-3)?,
                method,
                grid_points: cfg.resolve(*grid_points, "grid_points", 10_000)?,
                seed,
            })
        }
        Command::QuadSweepT {
            dim,
            t_list,
            grid_points,
        } => run_quad_sweep_t(&QuadSweepTParams {
            dim: cfg.resolve(*dim, "dim", 20)?,
            t_list: parse_list(
                &cfg.resolve(t_list.clone(), "t_list", "10,30,100,300,1000".into())?,
                "t_list",
            )?,
            grid_points: cfg.resolve(*grid_points, "grid_points", 10_000)?,
            seed,
        }),
        Command::LsCompare { ls } => run_ls_compare(&resolve_ls(ls, &cfg, seed)?),
        Command::LsLargeSample {
            dim,
            n,
            sigma,
            t,
            m,
            grid,
            test_tasks,
        } => run_ls_large_sample(&LsLargeSampleParams {
            dim: cfg.resolve(*dim, "dim", 20)?,
            n: cfg.resolve(*n, "n", 2000)?,
            sigma: cfg.resolve(*sigma, "sigma", 1.0)?,
            t: cfg.resolve(*t, "t", 100)?,
            m: cfg.resolve(*m, "m", 20)?,
            grid: grid.resolve(&cfg)?,
            test_tasks: cfg.resolve(*test_tasks, "test_tasks", 10)?,
            seed,
        }),
        Command::LsSgdCompare { ls, replicas, c5 } => {
            let mut params = resolve_ls(ls, &cfg, seed)?;
            params.replicas = Some(cfg.resolve(*replicas, "replicas", 64)?);
            params.c5 = cfg.resolve(*c5, "c5", 1.0)?;
            run_ls_compare(&params)
        }
        Command::Plot { input, title } => {
            let text = std::fs::read_to_string(input)
                .with_context(|| format!("cannot read {}", input.display()))?;
            let table = records::parse_csv(&text)?;
            let title = cfg.resolve(title.clone(), "title", "steptune".to_string())?;
            plot::render_svg(&table, &title)
        }
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let start = Instant::now();
    let output = run(&cli)?;
    eprintln!("wall time: {:.3}s", start.elapsed().as_secs_f64());
    match &cli.common.out {
        Some(path) => std::fs::write(path, output)
            .with_context(|| format!("cannot write {}", path.display()))?,
        None => print!("{output}"),
    }
    Ok(())
}
