use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use log::{info, warn};

use mfimpulse::config::RunConfig;
use mfimpulse::model::{check_conditions, ConditionStatus};
use mfimpulse::report::{error_json, Report, ReportEnvelope, TableReport, TableRow};
use mfimpulse::simulate::{simulate_cycles, simulate_horizon};
use mfimpulse::{Error, Problem, Result, ThresholdPolicy};

#[derive(Parser)]
#[command(name = "mfimpulse", version, about = "Threshold impulse control of 1D diffusions: classical, MFG and MFC solvers")]
struct Cli {
    /// TOML run configuration.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,
    /// Override the simulation seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the root-finding tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Override the number of intervals in the equilibrium scan.
    #[arg(long, global = true)]
    grid: Option<usize>,
    /// Write the JSON report here instead of stdout.
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,
    /// Write the CSV trace here, for subcommands that have one.
    #[arg(long, global = true)]
    csv: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the standing assumptions on the model and market.
    CheckModel,
    /// CSV of x, s, m, M[a,x], xi, g, h_p over the state space.
    Tabulate {
        #[arg(long, default_value_t = 0.0)]
        price: f64,
        #[arg(long, default_value_t = 200)]
        points: usize,
    },
    /// Optimal (w, y) policy at a fixed price.
    SolveClassical {
        #[arg(long)]
        price: f64,
    },
    /// Mean-field-game equilibrium; the CSV trace holds the rate scan.
    SolveMfg,
    /// Mean-field-control optimum; the CSV holds the planner objective on a grid.
    SolveMfc {
        #[arg(long, default_value_t = 60)]
        surface_points: usize,
    },
    /// Best individual policy when the aggregate supply rate is fixed.
    BestResponse {
        #[arg(long)]
        rate: f64,
        /// Value to report the gap against.
        #[arg(long)]
        baseline: Option<f64>,
    },
    /// Monte Carlo renewal cycles, or one long trajectory with --horizon.
    Simulate {
        #[arg(long, requires = "y")]
        w: Option<f64>,
        #[arg(long, requires = "w")]
        y: Option<f64>,
        /// Defaults to the price at the policy's own supply rate.
        #[arg(long)]
        price: Option<f64>,
        #[arg(long)]
        cycles: Option<usize>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        horizon: Option<f64>,
        /// Never intervene (horizon runs only).
        #[arg(long, requires = "horizon", conflicts_with_all = ["w", "y"])]
        idle: bool,
    },
    /// Recompute a published results table (CSV on stdout).
    ReproduceTables {
        #[arg(long)]
        example: String,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("MFIMPULSE_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("{}", error_json(&e));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| Error::Config("this subcommand needs --config".into()))?;
    let mut cfg = RunConfig::load(path)?;
    apply_overrides(cli, &mut cfg)?;
    Ok(cfg)
}

fn apply_overrides(cli: &Cli, cfg: &mut RunConfig) -> Result<()> {
    if let Some(seed) = cli.seed {
        cfg.simulation.seed = seed;
    }
    if let Some(tol) = cli.tol {
        cfg.tolerances.root = tol;
    }
    if let Some(grid) = cli.grid {
        cfg.solver.mfg_grid = grid;
    }
    cfg.validate()
}

fn problem(cfg: &RunConfig) -> Result<Problem> {
    Problem::new(&cfg.diffusion()?, &cfg.market()?, cfg.solver_options())
}

fn csv_path(cli: &Cli, cfg: &RunConfig) -> Option<PathBuf> {
    cli.csv.clone().or_else(|| cfg.output.csv.clone())
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))
}

fn write_csv<R: serde::Serialize>(path: &Path, rows: impl IntoIterator<Item = R>) -> Result<()> {
    let io = |e: csv::Error| Error::Config(format!("cannot write {}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    for r in rows {
        w.serialize(r).map_err(io)?;
    }
    w.flush().map_err(|e| Error::Config(e.to_string()))
}

fn emit(cli: &Cli, cfg: Option<&RunConfig>, envelope: &ReportEnvelope) -> Result<()> {
    let text = envelope.to_json();
    match cli.output.clone().or_else(|| cfg.and_then(|c| c.output.report.clone())) {
        Some(path) => write_file(&path, &text),
        None => {
            let mut out = std::io::stdout().lock();
            writeln!(out, "{text}").map_err(|e| Error::Config(e.to_string()))
        }
    }
}

fn run(cli: &Cli) -> Result<u8> {
    let start = Instant::now();
    let (name, cfg, report, code) = match &cli.command {
        Command::CheckModel => {
            let cfg = load_config(cli)?;
            let reports = check_conditions(&cfg.diffusion()?, &cfg.market()?, &cfg.solver_options());
            let failed = reports.iter().filter(|r| r.status == ConditionStatus::Fail).count();
            for r in reports.iter().filter(|r| r.status == ConditionStatus::Indeterminate) {
                warn!("{}: indeterminate ({})", r.id, r.notes);
            }
            ("check-model", cfg, Report::Conditions(reports), if failed > 0 { 1 } else { 0 })
        }
        Command::Tabulate { price, points } => {
            let cfg = load_config(cli)?;
            tabulate(cli, &cfg, *price, *points)?;
            return Ok(0);
        }
        Command::SolveClassical { price } => {
            let cfg = load_config(cli)?;
            let sol = problem(&cfg)?.solve_classical(*price)?;
            ("solve-classical", cfg, Report::Classical(sol), 0)
        }
        Command::SolveMfg => {
            let cfg = load_config(cli)?;
            let eq = problem(&cfg)?.solve_mfg()?;
            if let Some(path) = csv_path(cli, &cfg) {
                write_csv(
                    &path,
                    eq.trace.iter().map(|m| TraceRow { z: m.z, price: m.price, w: m.policy.w, y: m.policy.y, mapped: m.mapped }),
                )?;
            }
            ("solve-mfg", cfg, Report::Equilibrium(eq), 0)
        }
        Command::SolveMfc { surface_points } => {
            let cfg = load_config(cli)?;
            let pb = problem(&cfg)?;
            let opt = pb.solve_mfc()?;
            if let Some(path) = csv_path(cli, &cfg) {
                write_csv(&path, surface(&pb, *surface_points))?;
            }
            ("solve-mfc", cfg, Report::Optimum(opt), 0)
        }
        Command::BestResponse { rate, baseline } => {
            let cfg = load_config(cli)?;
            let br = problem(&cfg)?.best_response(*rate, *baseline)?;
            ("best-response", cfg, Report::BestResponse(br), 0)
        }
        Command::Simulate { w, y, price, cycles, dt, horizon, idle } => {
            let mut cfg = load_config(cli)?;
            if let Some(c) = cycles {
                cfg.simulation.cycles = *c;
            }
            if let Some(dt) = dt {
                cfg.simulation.dt = *dt;
            }
            cfg.validate()?;
            let model = cfg.diffusion()?;
            let market = cfg.market()?;
            let policy = match (w, y) {
                (Some(w), Some(y)) => Some(ThresholdPolicy::new(*w, *y)),
                _ if *idle => None,
                _ => return Err(Error::Precondition("simulate needs --w and --y, or --idle with --horizon".into())),
            };
            let price = match (price, policy) {
                (Some(p), _) => *p,
                (None, Some(pol)) => market.price(problem(&cfg)?.supply_rate(&pol)?),
                (None, None) => 0.0,
            };
            let report = match horizon {
                Some(t) => Report::Horizon(simulate_horizon(&model, &market, policy.as_ref(), price, *t, &cfg.simulation)?),
                None => {
                    let pol = policy.expect("policy present without --horizon");
                    let est = simulate_cycles(&model, &market, &pol, price, &cfg.simulation)?;
                    if est.guard_flag {
                        warn!("guard rail hit on {} of {} steps", est.guard_hits, est.steps);
                    }
                    if let Some(path) = csv_path(cli, &cfg) {
                        write_csv(&path, est.per_cycle.iter().enumerate().map(|(i, r)| CycleRow {
                            cycle: i,
                            time: r.time,
                            running_reward: r.running_reward,
                            steps: r.steps,
                            guard_hits: r.guard_hits,
                        }))?;
                    }
                    Report::Simulation(est)
                }
            };
            ("simulate", cfg, report, 0)
        }
        Command::ReproduceTables { example } => {
            let mut cfg = RunConfig::example(example)?;
            apply_overrides(cli, &mut cfg)?;
            let table = reproduce(example, &cfg)?;
            print!("{}", table.to_csv());
            if cli.output.is_some() {
                let env = ReportEnvelope::new("reproduce-tables", Some(cfg), start.elapsed().as_secs_f64(), Report::Tables(table));
                emit(cli, None, &env)?;
            }
            return Ok(0);
        }
    };
    info!("{name} finished in {:.3}s", start.elapsed().as_secs_f64());
    let env = ReportEnvelope::new(name, Some(cfg.clone()), start.elapsed().as_secs_f64(), report);
    emit(cli, Some(&cfg), &env)?;
    Ok(code)
}

#[derive(serde::Serialize)]
struct TraceRow {
    z: f64,
    price: f64,
    w: f64,
    y: f64,
    mapped: f64,
}

#[derive(serde::Serialize)]
struct CycleRow {
    cycle: usize,
    time: f64,
    running_reward: f64,
    steps: u64,
    guard_hits: u64,
}

#[derive(serde::Serialize)]
struct SurfaceRow {
    w: f64,
    y: f64,
    supply_rate: f64,
    upsilon: f64,
}

#[derive(serde::Serialize)]
struct TabRow {
    x: f64,
    s: f64,
    m: f64,
    speed_measure: f64,
    xi: f64,
    g: f64,
    h_p: f64,
}

fn tabulate(cli: &Cli, cfg: &RunConfig, price: f64, points: usize) -> Result<()> {
    let pb = problem(cfg)?;
    let engine = pb.engine();
    let (lo, hi) = engine.window();
    let n = points.max(2);
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let x = engine.to_x(lo + (hi - lo) * i as f64 / (n - 1) as f64);
        let p = engine.at(x)?;
        rows.push(TabRow {
            x,
            s: p.scale,
            m: p.speed,
            speed_measure: p.speed_measure,
            xi: p.xi,
            g: p.g,
            h_p: engine.h(x, price)?,
        });
    }
    match csv_path(cli, cfg) {
        Some(path) => write_csv(&path, rows),
        None => {
            let mut w = csv::Writer::from_writer(std::io::stdout());
            for r in rows {
                w.serialize(r).map_err(|e| Error::Config(e.to_string()))?;
            }
            w.flush().map_err(|e| Error::Config(e.to_string()))
        }
    }
}

/// Planner objective on an even grid of the policy window; infeasible cells are skipped.
fn surface(pb: &Problem, n: usize) -> Vec<SurfaceRow> {
    let engine = pb.engine();
    let (lo, hi) = engine.window();
    let n = n.max(2);
    let xs: Vec<f64> = (0..n).map(|i| engine.to_x(lo + (hi - lo) * i as f64 / (n - 1) as f64)).collect();
    let mut rows = Vec::new();
    for (i, &w) in xs.iter().enumerate() {
        for &y in &xs[i + 1..] {
            let pol = ThresholdPolicy::new(w, y);
            if let (Ok(z), Ok(u)) = (pb.supply_rate(&pol), pb.upsilon(&pol)) {
                rows.push(SurfaceRow { w, y, supply_rate: z, upsilon: u });
            }
        }
    }
    rows
}

fn reproduce(example: &str, cfg: &RunConfig) -> Result<TableReport> {
    let pb = problem(cfg)?;
    let eq = pb.solve_mfg()?;
    let opt = pb.solve_mfc()?;
    Ok(TableReport {
        example: example.into(),
        mfg: TableRow { w: eq.policy.w, y: eq.policy.y, supply_rate: eq.z_star, price: eq.price, value: eq.value },
        mfc: TableRow { w: opt.policy.w, y: opt.policy.y, supply_rate: opt.supply_rate, price: opt.price, value: opt.value },
    })
}
