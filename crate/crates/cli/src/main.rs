//! `rtv`: instance generation, solving, rounding trials and batch simulation.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};

use rtv_core::batchsim::{self, SimConfig};
use rtv_core::colgen::{self, log_to_csv};
use rtv_core::generators::{self, RandomParams};
use rtv_core::lp::{build_lp, solve_lp, support_histogram};
use rtv_core::mip::solve_ilp;
use rtv_core::rounding::{self, Method};
use rtv_core::tripgen::generate_catalog;
use rtv_core::{exec, json, Error, Execution, FractionalSolution, Instance, Qos, TripCatalog};

#[derive(Parser)]
#[command(name = "rtv", version, about = "Request-trip-vehicle assignment toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an instance (and its catalog) into a directory.
    Gen(GenArgs),
    /// Solve an instance with the ILP, the LP relaxation or column generation.
    Solve(SolveArgs),
    /// Run rounding trials on a fractional solution.
    Round(RoundArgs),
    /// Run the batch-dispatch simulation.
    Simulate(SimulateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Gap,
    Tightness,
    Random,
}

#[derive(clap::Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    family: Family,
    /// Family parameter k (capacity of the analytic families).
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, default_value_t = 6)]
    requests: usize,
    #[arg(long, default_value_t = 3)]
    vehicles: usize,
    #[arg(long, default_value_t = 2)]
    capacity: usize,
    /// Side of the square region, km.
    #[arg(long, default_value_t = 5.0)]
    region: f64,
    /// Kilometers per second.
    #[arg(long, default_value_t = 0.01)]
    speed: f64,
    #[arg(long, default_value_t = 300.0)]
    max_wait: f64,
    #[arg(long, default_value_t = 600.0)]
    max_delay: f64,
    #[arg(long, default_value_t = generators::DEFAULT_PENALTY_MULTIPLIER)]
    penalty_multiplier: f64,
    /// Largest trip in the generated catalog of a random instance; defaults
    /// to the capacity.
    #[arg(long)]
    max_trip_size: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SolveMethod {
    Ilp,
    Lp,
    Colgen,
}

#[derive(clap::Args)]
struct InputArgs {
    /// Instance directory (instance.json, optional catalog.json) or file.
    #[arg(long = "in")]
    input: PathBuf,
    /// Catalog file; overrides the one found next to the instance.
    #[arg(long)]
    catalog: Option<PathBuf>,
    /// Solve the penalty version (one dummy vehicle per request).
    #[arg(long)]
    penalty: bool,
    /// Largest trip when the catalog has to be generated; defaults to the
    /// largest vehicle capacity.
    #[arg(long)]
    max_trip_size: Option<usize>,
}

#[derive(clap::Args)]
struct SolveArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_enum)]
    method: SolveMethod,
    /// ILP time limit in seconds.
    #[arg(long)]
    time_limit: Option<f64>,
    /// Write the LP in LP format.
    #[arg(long)]
    dump_lp: Option<PathBuf>,
    /// Column generation iteration log (CSV).
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum RoundMethod {
    Rand,
    Det,
    Indep,
}

#[derive(clap::Args)]
struct RoundArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Fractional solution file.
    #[arg(long)]
    x: PathBuf,
    #[arg(long, value_enum)]
    method: RoundMethod,
    #[arg(long, default_value_t = 100_000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads; 0 uses all cores. Results do not depend on it.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Worker threads for replications; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

/// Maps an error chain to the documented exit codes.
fn exit_code(err: &anyhow::Error) -> u8 {
    if let Some(e) = err.chain().find_map(|c| c.downcast_ref::<Error>()) {
        return match e {
            Error::Io(_) => 1,
            Error::Infeasible => 3,
            Error::Numerical(_) | Error::IterationCap(_) | Error::TimeLimit => 4,
            _ => 2,
        };
    }
    if err.chain().any(|c| c.downcast_ref::<std::io::Error>().is_some()) {
        return 1;
    }
    2
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => gen(a),
        Command::Solve(a) => solve(a),
        Command::Round(a) => round(a),
        Command::Simulate(a) => simulate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn gen(a: GenArgs) -> anyhow::Result<()> {
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let (inst, cat, x) = match a.family {
        Family::Gap => {
            let f = generators::gen_gap_family(a.k)?;
            (f.instance, f.catalog, None)
        }
        Family::Tightness => {
            let t = generators::gen_tightness_family(a.k)?;
            (t.family.instance, t.family.catalog, Some(t.x))
        }
        Family::Random => {
            let inst = generators::gen_random(&RandomParams {
                n_requests: a.requests,
                n_vehicles: a.vehicles,
                capacity: a.capacity,
                region_km: a.region,
                qos: Qos {
                    max_wait: a.max_wait,
                    max_delay: a.max_delay,
                },
                speed: a.speed,
                penalty_multiplier: a.penalty_multiplier,
                seed: a.seed,
            });
            inst.validate()?;
            let cat = generate_catalog(&inst, a.max_trip_size.unwrap_or(a.capacity.max(1)), None)?;
            (inst, cat, None)
        }
    };
    rtv_core::save_instance(&inst, a.out.join("instance.json"))?;
    cat.save(a.out.join("catalog.json"))?;
    if let Some(x) = x {
        x.save(a.out.join("x.json"))?;
    }
    println!(
        "wrote {} ({} requests, {} vehicles, {} trips)",
        a.out.display(),
        inst.n_requests(),
        inst.n_vehicles(),
        cat.trips().len()
    );
    Ok(())
}

struct Loaded {
    inst: Instance,
    /// Explicit catalog from disk, if any.
    catalog: Option<TripCatalog>,
}

fn load(input: &InputArgs) -> anyhow::Result<Loaded> {
    let (inst_path, default_cat): (PathBuf, Option<PathBuf>) = if input.input.is_dir() {
        (input.input.join("instance.json"), Some(input.input.join("catalog.json")))
    } else {
        (input.input.clone(), None)
    };
    let inst = rtv_core::load_instance(&inst_path)
        .with_context(|| format!("loading {}", inst_path.display()))?;
    let cat_path = input
        .catalog
        .clone()
        .or(default_cat.filter(|p| p.exists()));
    let catalog = match cat_path {
        Some(p) => Some(
            TripCatalog::load(&p, inst.n_requests())
                .with_context(|| format!("loading {}", p.display()))?,
        ),
        None => None,
    };
    if let Some(cat) = &catalog {
        if cat.n_vehicles() != inst.n_vehicles() {
            return Err(Error::invariant("catalog", "vehicle count differs from the instance").into());
        }
    }
    Ok(Loaded { inst, catalog })
}

fn max_trip_size(input: &InputArgs, inst: &Instance) -> usize {
    input
        .max_trip_size
        .unwrap_or_else(|| inst.vehicles.iter().map(|v| v.capacity).max().unwrap_or(1).max(1))
}

/// Instance with its catalog attached (penalty version when requested).
fn prepare(input: &InputArgs, loaded: Loaded) -> anyhow::Result<(Instance, Option<TripCatalog>)> {
    let mut inst = loaded.inst;
    inst.trips = loaded.catalog;
    if input.penalty {
        inst = batchsim::add_dummies(&inst)?;
    }
    let cat = inst.trips.clone();
    Ok((inst, cat))
}

fn full_catalog(input: &InputArgs, inst: &Instance, cat: Option<TripCatalog>) -> anyhow::Result<TripCatalog> {
    match cat {
        Some(c) => Ok(c),
        None => Ok(generate_catalog(inst, max_trip_size(input, inst), None)?),
    }
}

fn solve(a: SolveArgs) -> anyhow::Result<()> {
    let loaded = load(&a.input)?;
    let (inst, explicit) = prepare(&a.input, loaded)?;
    let started = Instant::now();
    match a.method {
        SolveMethod::Ilp | SolveMethod::Lp => {
            let cat = full_catalog(&a.input, &inst, explicit)?;
            let lp = build_lp(&cat);
            if let Some(p) = &a.dump_lp {
                std::fs::write(p, lp.to_lp_format()).with_context(|| format!("writing {}", p.display()))?;
            }
            if a.method == SolveMethod::Ilp {
                let res = solve_ilp(&lp, a.time_limit.map(Duration::from_secs_f64))?;
                let ms = started.elapsed().as_secs_f64() * 1e3;
                if let Some(out) = &a.out {
                    json::write_file(out, &res.assignment.to_file(&cat))?;
                }
                println!(
                    "method=ilp objective={} solve_ms={ms:.3} nodes={} gap={}",
                    json::round_sig(res.objective),
                    res.nodes,
                    json::round_sig(res.gap())
                );
            } else {
                let x = solve_lp(&lp)?.primal;
                let ms = started.elapsed().as_secs_f64() * 1e3;
                if let Some(out) = &a.out {
                    x.save(out)?;
                }
                let h = support_histogram(&x, 10)?;
                println!(
                    "method=lp objective={} solve_ms={ms:.3} integral_frac={} half_integral_frac={}",
                    json::round_sig(x.objective),
                    json::round_sig(h.integral_fraction),
                    json::round_sig(h.half_integral_fraction)
                );
            }
        }
        SolveMethod::Colgen => {
            let k = max_trip_size(&a.input, &inst);
            let res = colgen::solve_lp_by_colgen(&inst, k, None)?;
            let ms = started.elapsed().as_secs_f64() * 1e3;
            if let Some(p) = &a.log {
                std::fs::write(p, log_to_csv(&res.log)).with_context(|| format!("writing {}", p.display()))?;
            }
            if let Some(out) = &a.out {
                match &explicit {
                    Some(full) => remap(&res.primal, &res.catalog, full)?.save(out)?,
                    None => {
                        res.primal.save(out)?;
                        res.catalog.save(out.with_extension("catalog.json"))?;
                    }
                }
            }
            println!(
                "method=colgen objective={} solve_ms={ms:.3} iterations={} columns={}",
                json::round_sig(res.primal.objective),
                res.iterations,
                (0..res.catalog.n_vehicles()).map(|v| res.catalog.admissible(v).len()).sum::<usize>()
            );
        }
    }
    Ok(())
}

/// Re-expresses `x` over the trip ids of `to`.
fn remap(x: &FractionalSolution, from: &TripCatalog, to: &TripCatalog) -> anyhow::Result<FractionalSolution> {
    let mut out = FractionalSolution {
        objective: x.objective,
        ..Default::default()
    };
    for (&(v, t), &val) in &x.values {
        let id = to
            .trip_id(from.trip(t))
            .ok_or_else(|| Error::invariant("catalog", "generated column missing from catalog"))?;
        out.values.insert((v, id), val);
    }
    Ok(out)
}

fn round(a: RoundArgs) -> anyhow::Result<()> {
    let loaded = load(&a.input)?;
    let (inst, explicit) = prepare(&a.input, loaded)?;
    let cat = full_catalog(&a.input, &inst, explicit)?;
    let x = FractionalSolution::load(&a.x).with_context(|| format!("loading {}", a.x.display()))?;
    let method = match a.method {
        RoundMethod::Rand => Method::Dependent,
        RoundMethod::Det => Method::Deterministic,
        RoundMethod::Indep => Method::Independent,
    };
    let penalties: Option<Vec<f64>> = a
        .input
        .penalty
        .then(|| inst.requests.iter().map(|r| r.penalty).collect());
    let stats = exec::install(a.jobs, || {
        rounding::run_trials_with(
            &x,
            &cat,
            method,
            a.trials,
            a.seed,
            penalties.as_deref(),
            Execution::Parallel,
        )
    })?;
    json::write_file(&a.out, &stats)?;
    println!(
        "trials={} mean_cost={} unassigned_fraction={}",
        stats.trials,
        json::round_sig(stats.mean_cost),
        json::round_sig(stats.unassigned_fraction_mean)
    );
    Ok(())
}

fn write(path: &Path, text: &str) -> anyhow::Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn simulate(a: SimulateArgs) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(&a.config)
        .with_context(|| format!("reading {}", a.config.display()))?;
    let cfg: SimConfig = json::from_str(&text)?;
    cfg.validate()?;
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let reports = exec::install(a.jobs, || batchsim::run_simulations(&cfg, Execution::Parallel))?;
    write(&a.out.join("rounds.csv"), &batchsim::rows_to_csv(reports.iter().flat_map(|r| &r.rows)))?;
    json::write_file(&a.out.join("summary.json"), &batchsim::summarize(&cfg, &reports))?;
    if cfg.save_instances {
        for r in &reports {
            for f in &r.frozen {
                let dir = a.out.join(format!("instances/seed_{}/round_{:03}", r.seed, f.round));
                std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
                rtv_core::save_instance(&f.instance, dir.join("instance.json"))?;
                f.catalog.save(dir.join("catalog.json"))?;
            }
        }
    }
    for r in &reports {
        let parts: Vec<String> = r
            .methods
            .iter()
            .map(|(m, agg)| format!("{}={}%", m.name(), json::round_sig(agg.rejected_pct)))
            .collect();
        println!("seed={} rejected {}", r.seed, parts.join(" "));
    }
    Ok(())
}
