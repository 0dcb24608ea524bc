//! Command-line front end: runs simulations and verification suites over the
//! inertial game dynamics, writes trajectory CSVs and JSON reports.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use inertia_core::analysis::suites::{battery_names, run_suite, SuiteOptions};
use inertia_core::analysis::{default_launch, start_near};
use inertia_core::dynamics::{Chart, DynamicsSpec, FieldKind, PayoffSource, PhasePoint};
use inertia_core::games::{
    self, builtin_game, enumerate_pure_strict_equilibria, is_nash, is_restricted_equilibrium,
    parse_game_json, verify_potential, GameDefinition, StrategyProfile,
};
use inertia_core::geometry::{SimplexPoint, TangentVector};
use inertia_core::integrator::{integrate, write_csv, IntegratorConfig, Scheme, Termination};
use inertia_core::kernel::{classify_wellposedness, resolve as resolve_kernel, Kernel, Wellposedness};

const EXIT_CONFIG: u8 = 1;
const EXIT_FIELD: u8 = 2;
const EXIT_SUITE_FAILED: u8 = 3;

#[derive(Parser)]
#[command(
    name = "inertia",
    about = "Inertial game dynamics on simplices: simulate, classify geometries, run verification suites",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a dynamical system and write trajectory CSV / summary JSON.
    Simulate(SimulateArgs),
    /// Classify a kernel's inertial dynamics as well- or ill-posed.
    CheckWellposed {
        /// Kernel name: shahshahani, log-barrier, or power:p
        kernel: String,
    },
    /// List pure strict equilibria, test candidate profiles, verify potential.
    Equilibria(EquilibriaArgs),
    /// Run verification suite batteries and write a JSON report.
    Suite(SuiteArgs),
}

#[derive(Args, Default, Clone)]
struct SimulateArgs {
    /// JSON run-config file; command-line flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Builtin game name or path to a game definition file.
    #[arg(long)]
    game: Option<String>,
    /// Vector field: id, id-euclidean, rd, rd2.
    #[arg(long)]
    field: Option<String>,
    /// Kernel name, or comma-separated list with one kernel per player.
    #[arg(long)]
    kernel: Option<String>,
    /// Friction coefficient η ≥ 0.
    #[arg(long)]
    eta: Option<f64>,
    /// Initial position, players separated by ';': "0.75,0.25;0.5,0.5".
    #[arg(long)]
    position: Option<String>,
    /// Initial velocity in the same shape (components must sum to 0).
    #[arg(long)]
    velocity: Option<String>,
    /// Start near a vertex: "near:<a1,a2,…>:<distance>".
    #[arg(long)]
    near: Option<String>,
    /// Riemannian speed bound for sampled start velocities.
    #[arg(long)]
    speed: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Integration scheme: rk45 (adaptive) or rk4 (fixed step).
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long)]
    rel_tol: Option<f64>,
    #[arg(long)]
    abs_tol: Option<f64>,
    #[arg(long)]
    max_step: Option<f64>,
    #[arg(long)]
    min_step: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    sample_interval: Option<f64>,
    #[arg(long)]
    boundary_epsilon: Option<f64>,
    /// Integration chart: auto, simplex, or euclidean.
    #[arg(long)]
    chart: Option<String>,
    /// Renormalize the simplex constraint after each step.
    #[arg(long)]
    projection: bool,
    /// Trajectory CSV output path.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Summary JSON output path.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct EquilibriaArgs {
    /// Builtin game name or path to a game definition file.
    #[arg(long)]
    game: String,
    /// Candidate profiles to test, players separated by ';'.
    #[arg(long)]
    candidate: Vec<String>,
    /// Equilibrium tolerance.
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
}

#[derive(Args)]
struct SuiteArgs {
    /// Builtin suite name ("paper-core") or individual battery name.
    #[arg(long)]
    name: Option<String>,
    /// JSON suite config: {"batteries": [...], "seed": N, "threshold_override": x}.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Report output path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::CheckWellposed { kernel } => cmd_check_wellposed(&kernel),
        Command::Equilibria(args) => cmd_equilibria(args),
        Command::Suite(args) => cmd_suite(args),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

/// Run-config file schema; every field optional, flags take precedence.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    game: Option<String>,
    field: Option<String>,
    kernels: Option<Vec<String>>,
    friction: Option<f64>,
    position: Option<Vec<Vec<f64>>>,
    velocity: Option<Vec<Vec<f64>>>,
    near: Option<String>,
    speed: Option<f64>,
    seed: Option<u64>,
    scheme: Option<String>,
    rel_tol: Option<f64>,
    abs_tol: Option<f64>,
    max_step: Option<f64>,
    min_step: Option<f64>,
    t_end: Option<f64>,
    sample_interval: Option<f64>,
    boundary_epsilon: Option<f64>,
    chart: Option<String>,
    constraint_projection: Option<bool>,
    csv: Option<PathBuf>,
    json: Option<PathBuf>,
}

#[derive(serde::Serialize)]
struct RunSummary {
    termination: String,
    t_star: Option<f64>,
    final_time: f64,
    final_state: Vec<f64>,
    final_energy: f64,
    final_kinetic: f64,
    max_drift: f64,
    accepted_steps: usize,
    rejected_steps: usize,
}

fn cmd_simulate(args: SimulateArgs) -> Result<ExitCode> {
    let file: FileConfig = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("cannot read config {}", path.display()))?;
            serde_json::from_str(&text)
                .with_context(|| format!("cannot parse config {}", path.display()))?
        }
        None => FileConfig::default(),
    };

    let game_ref = args
        .game
        .clone()
        .or(file.game.clone())
        .unwrap_or_else(|| "zero2".to_string());
    let definition = load_game(&game_ref)?;
    let game = Arc::new(definition.game.clone());
    let players = game.players();

    let field_name = args
        .field
        .clone()
        .or(file.field.clone())
        .unwrap_or_else(|| "id".to_string());
    let field = FieldKind::from_name(&field_name).map_err(|e| anyhow!(e))?;

    let kernel_spec = args.kernel.clone().map(|k| {
        k.split(',')
            .map(|s| s.trim().to_string())
            .collect::<Vec<_>>()
    });
    let kernel_names = kernel_spec
        .or(file.kernels.clone())
        .unwrap_or_else(|| vec!["log-barrier".to_string()]);
    let kernels = resolve_kernels(&kernel_names, players)?;

    let eta = args.eta.or(file.friction).unwrap_or(0.0);
    let spec = Arc::new(
        DynamicsSpec::new(
            field,
            kernels.clone(),
            eta,
            PayoffSource::Game(game.clone()),
        )
        .map_err(|e| anyhow!(e))?,
    );

    let chart = resolve_chart(
        args.chart.as_deref().or(file.chart.as_deref()),
        field,
        &kernels,
    )?;

    let mut config = IntegratorConfig {
        chart,
        ..Default::default()
    };
    if let Some(s) = args.scheme.as_deref().or(file.scheme.as_deref()) {
        config.scheme = match s {
            "rk45" => Scheme::Rk45,
            "rk4" => Scheme::Rk4,
            other => bail!("unknown scheme '{other}' (expected rk45 or rk4)"),
        };
    }
    merge(&mut config.rel_tol, args.rel_tol.or(file.rel_tol));
    merge(&mut config.abs_tol, args.abs_tol.or(file.abs_tol));
    merge(&mut config.max_step, args.max_step.or(file.max_step));
    merge(&mut config.min_step, args.min_step.or(file.min_step));
    merge(&mut config.t_end, args.t_end.or(file.t_end));
    merge(
        &mut config.sample_interval,
        args.sample_interval.or(file.sample_interval),
    );
    merge(
        &mut config.boundary_epsilon,
        args.boundary_epsilon.or(file.boundary_epsilon),
    );
    if args.projection || file.constraint_projection.unwrap_or(false) {
        config.constraint_projection = true;
    }

    let seed = args.seed.or(file.seed).unwrap_or(0);
    let speed = args.speed.or(file.speed).unwrap_or(0.01);
    let initial = build_initial_state(
        &args,
        &file,
        game.action_counts(),
        &kernels,
        field.second_order(),
        seed,
        speed,
    )?;

    let record = integrate(&spec, &initial, &config).map_err(|e| anyhow!(e))?;

    if let Some(path) = args.csv.as_ref().or(file.csv.as_ref()) {
        let mut buf = Vec::new();
        write_csv(&record, &mut buf)?;
        atomic_write(path, &buf)?;
    }

    let last = record
        .final_sample()
        .ok_or_else(|| anyhow!("record has no samples"))?;
    let summary = RunSummary {
        termination: record.termination.kind().to_string(),
        t_star: record.termination.t_star(),
        final_time: last.t,
        final_state: last.position.clone(),
        final_energy: last.energy,
        final_kinetic: last.kinetic,
        max_drift: record.stats.max_drift,
        accepted_steps: record.stats.accepted_steps,
        rejected_steps: record.stats.rejected_steps,
    };
    let summary_text = serde_json::to_string_pretty(&summary)?;
    if let Some(path) = args.json.as_ref().or(file.json.as_ref()) {
        atomic_write(path, format!("{summary_text}\n").as_bytes())?;
    }
    println!("{summary_text}");

    Ok(match record.termination {
        Termination::FieldError(_) => ExitCode::from(EXIT_FIELD),
        _ => ExitCode::SUCCESS,
    })
}

fn merge<T: Copy>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn resolve_kernels(names: &[String], players: usize) -> Result<Vec<Arc<dyn Kernel>>> {
    let resolved: Vec<Arc<dyn Kernel>> = names
        .iter()
        .map(|n| resolve_kernel(n).map_err(|e| anyhow!(e)))
        .collect::<Result<_>>()?;
    match resolved.len() {
        1 => Ok(vec![resolved[0].clone(); players]),
        n if n == players => Ok(resolved),
        n => bail!("{n} kernels given for {players} players"),
    }
}

fn resolve_chart(
    requested: Option<&str>,
    field: FieldKind,
    kernels: &[Arc<dyn Kernel>],
) -> Result<Chart> {
    match requested.unwrap_or("auto") {
        "simplex" => Ok(Chart::Simplex),
        "euclidean" => Ok(Chart::Euclidean),
        "auto" => {
            if field == FieldKind::InertialEuclidean {
                return Ok(Chart::Euclidean);
            }
            if !field.uses_kernels() {
                return Ok(Chart::Simplex);
            }
            // Well-posed geometries integrate best in the euclidean chart;
            // for ill-posed ones the simplex chart keeps escape detection in
            // the coordinates where the band is defined.
            let mut all_wellposed = true;
            for k in kernels {
                let report = classify_wellposedness(k.as_ref()).map_err(|e| anyhow!(e))?;
                all_wellposed &= report.classification == Wellposedness::WellPosed;
            }
            Ok(if all_wellposed {
                Chart::Euclidean
            } else {
                Chart::Simplex
            })
        }
        other => bail!("unknown chart '{other}' (expected auto, simplex, or euclidean)"),
    }
}

fn parse_profile(text: &str, action_counts: &[usize]) -> Result<Vec<Vec<f64>>> {
    let blocks: Vec<Vec<f64>> = text
        .split(';')
        .map(|block| {
            block
                .split(',')
                .map(|v| v.trim().parse::<f64>().map_err(|e| anyhow!("{e}: '{v}'")))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    if blocks.len() != action_counts.len() {
        bail!(
            "profile has {} players, game has {}",
            blocks.len(),
            action_counts.len()
        );
    }
    for (k, (b, &m)) in blocks.iter().zip(action_counts).enumerate() {
        if b.len() != m {
            bail!("player {} has {} coordinates, game expects {m}", k + 1, b.len());
        }
    }
    Ok(blocks)
}

#[allow(clippy::too_many_arguments)]
fn build_initial_state(
    args: &SimulateArgs,
    file: &FileConfig,
    action_counts: &[usize],
    kernels: &[Arc<dyn Kernel>],
    second_order: bool,
    seed: u64,
    speed: f64,
) -> Result<PhasePoint> {
    if let Some(text) = args.near.as_deref().or(file.near.as_deref()) {
        let (vertex, distance) = parse_near(text, action_counts)?;
        let target = StrategyProfile::pure(action_counts, &vertex);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut start = start_near(&mut rng, &target, kernels, distance, speed);
        if !second_order {
            start.velocity = None;
        }
        return Ok(start);
    }

    let position_spec = match args.position.as_deref() {
        Some(text) => Some(parse_profile(text, action_counts)?),
        None => file.position.clone(),
    };
    let velocity_spec = match args.velocity.as_deref() {
        Some(text) => Some(parse_profile(text, action_counts)?),
        None => file.velocity.clone(),
    };

    match position_spec {
        None => {
            if velocity_spec.is_some() {
                bail!("explicit velocity needs an explicit position");
            }
            Ok(default_launch(action_counts, kernels, second_order))
        }
        Some(blocks) => {
            let points = blocks
                .into_iter()
                .map(|b| SimplexPoint::new(b).map_err(|e| anyhow!(e)))
                .collect::<Result<Vec<_>>>()?;
            let position = StrategyProfile::new(points);
            if !second_order {
                return Ok(PhasePoint::first_order(position));
            }
            let velocity = match velocity_spec {
                Some(blocks) => blocks
                    .into_iter()
                    .map(|b| TangentVector::new(b).map_err(|e| anyhow!(e)))
                    .collect::<Result<Vec<_>>>()?,
                None => position
                    .points()
                    .iter()
                    .map(|p| TangentVector::zero(p.len()))
                    .collect(),
            };
            Ok(PhasePoint::new(position, velocity))
        }
    }
}

/// Parse "near:<a1,a2,…>:<distance>" (a bare "<a1,…>:<distance>" also works).
fn parse_near(text: &str, action_counts: &[usize]) -> Result<(Vec<usize>, f64)> {
    let body = text.strip_prefix("near:").unwrap_or(text);
    let (vertex_part, dist_part) = body
        .rsplit_once(':')
        .ok_or_else(|| anyhow!("expected near:<vertex>:<distance>, got '{text}'"))?;
    let vertex: Vec<usize> = vertex_part
        .split(',')
        .map(|v| v.trim().parse::<usize>().map_err(|e| anyhow!("{e}: '{v}'")))
        .collect::<Result<_>>()?;
    if vertex.len() != action_counts.len() {
        bail!(
            "vertex lists {} actions for {} players",
            vertex.len(),
            action_counts.len()
        );
    }
    for (k, (&a, &m)) in vertex.iter().zip(action_counts).enumerate() {
        if a >= m {
            bail!("player {} action {a} out of range (game has {m})", k + 1);
        }
    }
    let distance: f64 = dist_part.trim().parse()?;
    if !(distance > 0.0 && distance < 1.0) {
        bail!("near-distance must lie in (0, 1), got {distance}");
    }
    Ok((vertex, distance))
}

fn load_game(reference: &str) -> Result<GameDefinition> {
    if let Some(def) = builtin_game(reference) {
        return Ok(def);
    }
    let path = Path::new(reference);
    if !path.exists() {
        bail!(
            "'{reference}' is neither a builtin game ({}) nor an existing file",
            games::builtin_game_names().join(", ")
        );
    }
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read game file {}", path.display()))?;
    let mut def = parse_game_json(&text).map_err(|e| anyhow!(e))?;
    def.name = reference.to_string();
    Ok(def)
}

fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let tmp = match dir {
        Some(d) => d.join(format!(
            ".{}.tmp",
            path.file_name().unwrap_or_default().to_string_lossy()
        )),
        None => PathBuf::from(format!(
            ".{}.tmp",
            path.file_name().unwrap_or_default().to_string_lossy()
        )),
    };
    fs::write(&tmp, bytes).with_context(|| format!("cannot write {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("cannot move into {}", path.display()))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// check-wellposed
// ---------------------------------------------------------------------------

fn cmd_check_wellposed(kernel_name: &str) -> Result<ExitCode> {
    let kernel = resolve_kernel(kernel_name).map_err(|e| anyhow!(e))?;
    let report = classify_wellposedness(kernel.as_ref()).map_err(|e| anyhow!(e))?;
    println!("kernel: {}", report.kernel);
    println!("classification: {}", report.classification);
    println!("note: {}", report.note);
    if report.analytic_override {
        println!("partial integrals: (skipped; analytic override)");
    } else {
        println!("partial integrals of sqrt(theta'') on [eps, 1]:");
        for p in &report.partial_integrals {
            println!("  eps={:9.1e}  value={:.12e}", p.epsilon, p.value);
        }
    }
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------------------
// equilibria
// ---------------------------------------------------------------------------

fn cmd_equilibria(args: EquilibriaArgs) -> Result<ExitCode> {
    let def = load_game(&args.game)?;
    let game = &def.game;
    println!(
        "game: {} ({} players; actions {:?})",
        def.name,
        game.players(),
        game.action_counts()
    );

    let strict = enumerate_pure_strict_equilibria(game).map_err(|e| anyhow!(e))?;
    println!("pure strict equilibria: {}", strict.len());
    for eq in &strict {
        println!("  - {eq:?}");
    }

    let cert = verify_potential(game);
    println!(
        "potential: {} (max residual {:.3e})",
        cert.is_potential, cert.max_residual
    );

    for text in &args.candidate {
        let blocks = parse_profile(text, game.action_counts())?;
        let points = blocks
            .into_iter()
            .map(|b| SimplexPoint::new(b).map_err(|e| anyhow!(e)))
            .collect::<Result<Vec<_>>>()?;
        let profile = StrategyProfile::new(points);
        let nash = is_nash(game, &profile, args.tol).map_err(|e| anyhow!(e))?;
        let restricted =
            is_restricted_equilibrium(game, &profile, args.tol).map_err(|e| anyhow!(e))?;
        println!(
            "candidate {text}: nash={} (worst violation {:.3e}), restricted={} (spread {:.3e})",
            nash.holds, nash.worst_violation, restricted.holds, restricted.worst_violation
        );
    }
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------------------
// suite
// ---------------------------------------------------------------------------

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SuiteConfig {
    batteries: Option<Vec<String>>,
    seed: Option<u64>,
    threshold_override: Option<f64>,
}

fn cmd_suite(args: SuiteArgs) -> Result<ExitCode> {
    let file: SuiteConfig = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("cannot read suite config {}", path.display()))?;
            serde_json::from_str(&text)
                .with_context(|| format!("cannot parse suite config {}", path.display()))?
        }
        None => SuiteConfig::default(),
    };

    let batteries: Vec<String> = match (&args.name, &file.batteries) {
        (Some(name), _) if name == "paper-core" => {
            battery_names().iter().map(|s| s.to_string()).collect()
        }
        (Some(name), _) => vec![name.clone()],
        (None, Some(list)) => list.clone(),
        (None, None) => battery_names().iter().map(|s| s.to_string()).collect(),
    };

    let opts = SuiteOptions {
        seed: args.seed.or(file.seed).unwrap_or(42),
        threshold_override: file.threshold_override,
    };
    let reports = run_suite(&batteries, &opts).map_err(|e| anyhow!(e))?;
    for r in &reports {
        println!(
            "[{}] {:<50} metric={:.6e} threshold={:.1e}",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.metric,
            r.threshold
        );
        if !r.details.is_empty() {
            println!("       {}", r.details);
        }
    }
    let json = serde_json::to_string_pretty(&reports)?;
    match &args.out {
        Some(path) => atomic_write(path, format!("{json}\n").as_bytes())?,
        None => {
            let mut stdout = std::io::stdout();
            writeln!(stdout, "{json}")?;
        }
    }
    let all_passed = reports.iter().all(|r| r.passed);
    Ok(if all_passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_SUITE_FAILED)
    })
}
