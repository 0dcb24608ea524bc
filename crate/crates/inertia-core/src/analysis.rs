//! Executable checks of the dynamics' claimed behavior: energy dissipation,
//! velocity decay, closed-form two-action solutions, the folk-theorem
//! battery, and ESS stability experiments. Each check compares a measured
//! quantity against a pinned threshold and reports the outcome.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dynamics::{
    stationarity_residual, Chart, DynamicsSpec, FieldKind, ObjectiveFn, PayoffSource, PhasePoint,
};
use crate::games::{
    self, ess_check, NormalFormGame, StrategyProfile, SymmetricGame, SUPPORT_EPS,
};
use crate::geometry::{riemannian_norm, SimplexPoint, TangentVector};
use crate::integrator::{integrate, IntegratorConfig, Termination, TrajectoryRecord};
use crate::kernel::{classify_wellposedness, Kernel, Wellposedness};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("need at least {need} samples, record has {got}")]
    InsufficientSamples { need: usize, got: usize },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error(transparent)]
    Field(#[from] crate::dynamics::FieldError),
    #[error(transparent)]
    Integrate(#[from] crate::integrator::IntegrateError),
    #[error(transparent)]
    Game(#[from] crate::games::GameError),
    #[error(transparent)]
    Geometry(#[from] crate::geometry::GeometryError),
    #[error(transparent)]
    Kernel(#[from] crate::kernel::KernelError),
}

/// Outcome of one check: `passed` holds exactly when `metric < threshold`.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CheckReport {
    pub name: String,
    pub passed: bool,
    pub metric: f64,
    pub threshold: f64,
    #[serde(skip)]
    pub details: String,
}

impl CheckReport {
    fn new(name: impl Into<String>, metric: f64, threshold: f64, details: String) -> Self {
        Self {
            name: name.into(),
            passed: metric < threshold,
            metric,
            threshold,
            details,
        }
    }

    fn failed_precondition(name: impl Into<String>, threshold: f64, details: String) -> Self {
        Self {
            name: name.into(),
            passed: false,
            metric: f64::INFINITY,
            threshold,
            details,
        }
    }
}

// ---------------------------------------------------------------------------
// Energy checks
// ---------------------------------------------------------------------------

/// Compare the central-difference dE/dt against −2ηK at interior samples.
///
/// For η > 0 the metric is the worst deviation relative to the peak
/// dissipation rate max|2ηK|; for η = 0 it is the worst |dE/dt| relative to
/// the energy scale 1 + |E(0)| (pure conservation). Threshold 1e−3.
pub fn check_energy_dissipation(
    record: &TrajectoryRecord,
    eta: f64,
) -> Result<CheckReport, AnalysisError> {
    if record.samples.len() < 3 {
        return Err(AnalysisError::InsufficientSamples {
            need: 3,
            got: record.samples.len(),
        });
    }
    if !record.has_potential {
        return Err(AnalysisError::Degenerate(
            "energy dissipation needs a potential-case record".into(),
        ));
    }
    let s = &record.samples;
    let mut worst = 0.0f64;
    let mut worst_t = s[0].t;
    if eta == 0.0 {
        let scale = 1.0 + s[0].energy.abs();
        for i in 1..s.len() - 1 {
            let fd = (s[i + 1].energy - s[i - 1].energy) / (s[i + 1].t - s[i - 1].t);
            let dev = fd.abs() / scale;
            if dev > worst {
                worst = dev;
                worst_t = s[i].t;
            }
        }
    } else {
        let peak = s
            .iter()
            .map(|x| 2.0 * eta * x.kinetic)
            .fold(0.0f64, f64::max)
            .max(1e-300);
        for i in 1..s.len() - 1 {
            let fd = (s[i + 1].energy - s[i - 1].energy) / (s[i + 1].t - s[i - 1].t);
            let dev = (fd + 2.0 * eta * s[i].kinetic).abs() / peak;
            if dev > worst {
                worst = dev;
                worst_t = s[i].t;
            }
        }
    }
    Ok(CheckReport::new(
        "energy-dissipation",
        worst,
        1e-3,
        format!("worst deviation at t = {worst_t:.3} (η = {eta})"),
    ))
}

/// Terminal Riemannian speed ‖ẋ(t_end)‖ = √(2K) against 1e−3, for a
/// completed η > 0 run of length ≥ 50. Also reports whether ∫K dt has
/// converged (tail over the last 10% below 1% of the total).
pub fn check_velocity_decay(record: &TrajectoryRecord) -> CheckReport {
    let name = "velocity-decay";
    let threshold = 1e-3;
    if record.eta <= 0.0 {
        return CheckReport::failed_precondition(
            name,
            threshold,
            format!("needs η > 0 (record has η = {})", record.eta),
        );
    }
    if record.termination != Termination::Completed {
        return CheckReport::failed_precondition(
            name,
            threshold,
            format!("needs a completed record, got {}", record.termination.kind()),
        );
    }
    if record.t_last() - record.t_start() < 50.0 {
        return CheckReport::failed_precondition(
            name,
            threshold,
            format!("needs t_end ≥ 50, record covers {:.2}", record.t_last()),
        );
    }
    let s = &record.samples;
    let terminal_speed = (2.0 * s.last().unwrap().kinetic).sqrt();
    // trapezoid ∫ K dt and its tail over the last 10% of the time range
    let mut total = 0.0;
    let mut tail = 0.0;
    let t_tail = record.t_start() + 0.9 * (record.t_last() - record.t_start());
    for w in s.windows(2) {
        let seg = 0.5 * (w[0].kinetic + w[1].kinetic) * (w[1].t - w[0].t);
        total += seg;
        if w[0].t >= t_tail {
            tail += seg;
        }
    }
    let tail_converged = tail < 0.01 * total.max(1e-300);
    CheckReport::new(
        name,
        terminal_speed,
        threshold,
        format!(
            "∫K dt = {total:.6e}, tail fraction {:.3e} ({})",
            tail / total.max(1e-300),
            if tail_converged { "converged" } else { "not converged" }
        ),
    )
}

// ---------------------------------------------------------------------------
// Criticality and convergence
// ---------------------------------------------------------------------------

/// Max spread of the partials over the support of x (Eq. 4.1 residual).
pub fn restricted_criticality_residual(
    partials: &[f64],
    x: &SimplexPoint,
    support_threshold: f64,
) -> f64 {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (&d, &c) in partials.iter().zip(x.coords()) {
        if c > support_threshold {
            lo = lo.min(d);
            hi = hi.max(d);
        }
    }
    if hi >= lo {
        hi - lo
    } else {
        0.0
    }
}

/// Game version: worst per-player spread of supported payoffs (the
/// restricted-equilibrium residual of Thm. 4.6.II/III).
pub fn game_criticality_residual(
    game: &NormalFormGame,
    x: &StrategyProfile,
) -> Result<f64, AnalysisError> {
    let mut worst = 0.0f64;
    for k in 0..game.players() {
        let v = games::payoff_vector(game, x, k)?;
        worst = worst.max(restricted_criticality_residual(
            &v,
            x.player(k),
            SUPPORT_EPS,
        ));
    }
    Ok(worst)
}

/// Terminal distance max_α |x_α(t_end) − x*_α| against `tol`, plus a
/// monotone-approach check over the last 20% of samples (nonincreasing
/// distance up to 1e−6 slack).
pub fn check_convergence_to_point(
    record: &TrajectoryRecord,
    x_star: &[f64],
    tol: f64,
) -> CheckReport {
    let name = "convergence-to-point";
    if record.termination != Termination::Completed {
        return CheckReport::failed_precondition(
            name,
            tol,
            format!("needs a completed record, got {}", record.termination.kind()),
        );
    }
    let dist = |pos: &[f64]| -> f64 {
        pos.iter()
            .zip(x_star)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    };
    let s = &record.samples;
    let metric = dist(&s.last().unwrap().position);
    let t_tail = record.t_start() + 0.8 * (record.t_last() - record.t_start());
    let mut monotone = true;
    let mut prev: Option<f64> = None;
    for sample in s.iter().filter(|s| s.t >= t_tail) {
        let d = dist(&sample.position);
        if let Some(p) = prev {
            if d > p + 1e-6 {
                monotone = false;
            }
        }
        prev = Some(d);
    }
    let mut report = CheckReport::new(
        name,
        metric,
        tol,
        format!("monotone tail approach: {monotone}"),
    );
    report.passed = report.passed && monotone;
    report
}

// ---------------------------------------------------------------------------
// Closed-form two-action solutions
// ---------------------------------------------------------------------------

/// Eq. 3.10: ξ(t) for the two-action (IRD) zero game in the Euclidean chart,
/// ξ = 2√x ∈ (0, 2).
pub fn eq_3_10_solution(t: f64, xi0: f64, v0: f64) -> Result<f64, AnalysisError> {
    if !(xi0 > 0.0 && xi0 < 2.0) {
        return Err(AnalysisError::Domain(format!(
            "ξ₀ = {xi0} must lie in (0, 2)"
        )));
    }
    let root = (4.0 - xi0 * xi0).sqrt();
    let omega = v0 / root;
    Ok(xi0 * (omega * t).cos() + root * (omega * t).sin())
}

/// Analytic first exit time of Eq. 3.10 from ξ ∈ (0, 2); None for v₀ = 0
/// (the solution is constant and never exits).
pub fn eq_3_10_exit_time(xi0: f64, v0: f64) -> Result<Option<f64>, AnalysisError> {
    if !(xi0 > 0.0 && xi0 < 2.0) {
        return Err(AnalysisError::Domain(format!(
            "ξ₀ = {xi0} must lie in (0, 2)"
        )));
    }
    if v0 == 0.0 {
        return Ok(None);
    }
    let root = (4.0 - xi0 * xi0).sqrt();
    let phase = (xi0 / 2.0).asin();
    let t = if v0 > 0.0 {
        (PI / 2.0 - phase) * root / v0
    } else {
        phase * root / (-v0)
    };
    Ok(Some(t))
}

/// Eq. 3.13 first integral of the two-action (ILD) zero game at η = 0:
/// C = ξ̇ √(1 − 2e^ξ + 2e^{2ξ}) / (1 − e^ξ) with ξ = log x₁, reconstructed
/// from the record's simplex-coordinate samples. Samples with |1 − e^ξ|
/// below 1e−3 are excluded (the formula degenerates at x₁ = 1/2... at
/// x₁ = 1, i.e. 1 − e^ξ → 0).
pub fn eq_3_13_invariant(record: &TrajectoryRecord) -> Result<CheckReport, AnalysisError> {
    if record.layout.players() != 1 || record.layout.action_counts() != [2] {
        return Err(AnalysisError::Degenerate(
            "Eq. 3.13 applies to single-agent two-action records".into(),
        ));
    }
    let mut cs: Vec<(f64, f64)> = Vec::new();
    for s in &record.samples {
        let u = s.position[1]; // e^ξ with ξ = log x₁
        if u <= 0.0 || (1.0 - u).abs() < 1e-3 {
            continue;
        }
        let xidot = s.velocity[1] / u;
        let c = xidot * (1.0 - 2.0 * u + 2.0 * u * u).sqrt() / (1.0 - u);
        cs.push((s.t, c));
    }
    if cs.len() < 2 {
        return Err(AnalysisError::Degenerate(
            "too few usable samples (x₁ ≈ 1 throughout?)".into(),
        ));
    }
    let c0 = cs[0].1;
    let scale = c0.abs().max(1e-12);
    let (worst_t, worst) = cs
        .iter()
        .map(|&(t, c)| (t, (c - c0).abs() / scale))
        .fold((cs[0].0, 0.0f64), |acc, (t, d)| {
            if d > acc.1 {
                (t, d)
            } else {
                acc
            }
        });
    Ok(CheckReport::new(
        "eq-3.13-first-integral",
        worst,
        1e-4,
        format!("C₀ = {c0:.9}, worst drift at t = {worst_t:.3} over {} samples", cs.len()),
    ))
}

// ---------------------------------------------------------------------------
// Scenario helpers
// ---------------------------------------------------------------------------

fn random_interior_point(rng: &mut impl Rng, m: usize, floor: f64) -> SimplexPoint {
    loop {
        let raw: Vec<f64> = (0..m).map(|_| -(rng.gen::<f64>().max(1e-12)).ln()).collect();
        let sum: f64 = raw.iter().sum();
        let coords: Vec<f64> = raw.iter().map(|v| v / sum).collect();
        if coords.iter().all(|&c| c > floor) {
            return SimplexPoint::new(coords).unwrap();
        }
    }
}

/// Interior start within `distance` (ℓ∞) of a target profile, with a random
/// tangent velocity of Riemannian norm at most `speed`.
pub fn start_near(
    rng: &mut impl Rng,
    target: &StrategyProfile,
    kernels: &[Arc<dyn Kernel>],
    distance: f64,
    speed: f64,
) -> PhasePoint {
    let scale = distance * (0.5 + 0.5 * rng.gen::<f64>());
    let mut points = Vec::with_capacity(target.players());
    for p in target.points() {
        let m = p.len();
        let q = random_interior_point(rng, m, 0.05);
        let coords: Vec<f64> = p
            .coords()
            .iter()
            .zip(q.coords())
            .map(|(&a, &b)| (1.0 - scale) * a + scale * b)
            .collect();
        points.push(SimplexPoint::new(coords).unwrap());
    }
    let position = StrategyProfile::new(points);
    let mut velocity = Vec::with_capacity(position.players());
    let mut norm2 = 0.0;
    let mut raw: Vec<TangentVector> = Vec::with_capacity(position.players());
    for (k, p) in position.points().iter().enumerate() {
        let t = TangentVector::project((0..p.len()).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let n = riemannian_norm(kernels[k].as_ref(), p, &t).unwrap();
        norm2 += n * n;
        raw.push(t);
    }
    let total = norm2.sqrt();
    let target_speed = speed * rng.gen::<f64>();
    let factor = if total > 1e-12 { target_speed / total } else { 0.0 };
    for t in raw {
        velocity.push(TangentVector::project(
            t.components().iter().map(|c| c * factor).collect(),
        ));
    }
    PhasePoint::new(position, velocity)
}

/// The canonical launch used by the CLI and the dichotomy experiments:
/// uniform position, velocity w·(e_last − e₀) per player with w such that the
/// last action's Euclidean chart coordinate moves at unit speed.
pub fn default_launch(
    action_counts: &[usize],
    kernels: &[Arc<dyn Kernel>],
    second_order: bool,
) -> PhasePoint {
    let position = StrategyProfile::uniform(action_counts);
    if !second_order {
        return PhasePoint::first_order(position);
    }
    let velocity = action_counts
        .iter()
        .enumerate()
        .map(|(k, &m)| {
            let x_last = 1.0 / m as f64;
            let w = kernels
                .get(k)
                .map(|kern| kern.inv_sqrt_d2(x_last))
                .unwrap_or(x_last);
            let mut comps = vec![0.0; m];
            comps[0] = -w;
            comps[m - 1] = w;
            TangentVector::new(comps).unwrap()
        })
        .collect();
    PhasePoint::new(position, velocity)
}

// ---------------------------------------------------------------------------
// Folk theorem battery (Thm. 4.6)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct FolkScenario {
    pub eta: f64,
    pub starts_per_equilibrium: usize,
    pub start_distance: f64,
    pub start_speed: f64,
    pub t_end: f64,
    pub convergence_tol: f64,
    pub stationarity_tol: f64,
    pub interior_probes: usize,
    pub probe_t_end: f64,
    pub criticality_tol: f64,
    pub seed: u64,
}

impl Default for FolkScenario {
    fn default() -> Self {
        Self {
            eta: 1.0,
            starts_per_equilibrium: 10,
            start_distance: 0.05,
            start_speed: 0.01,
            t_end: 200.0,
            convergence_tol: 1e-3,
            stationarity_tol: 1e-10,
            interior_probes: 3,
            probe_t_end: 300.0,
            criticality_tol: 1e-5,
            seed: 0,
        }
    }
}

fn basin_config(t_end: f64) -> IntegratorConfig {
    IntegratorConfig {
        chart: Chart::Euclidean,
        t_end,
        sample_interval: 0.5,
        ..Default::default()
    }
}

/// Run the folk-theorem battery on a game under (ID) with the given kernel:
/// (I) stationarity residuals at restricted equilibria, (II/III) restricted
/// criticality at the limits of converged interior runs, (IV) basin probes
/// around each pure strict equilibrium.
pub fn folk_theorem_suite(
    game: &Arc<NormalFormGame>,
    kernel: &Arc<dyn Kernel>,
    scenario: &FolkScenario,
) -> Result<Vec<CheckReport>, AnalysisError> {
    let classification = classify_wellposedness(kernel.as_ref())?;
    if classification.classification != Wellposedness::WellPosed {
        return Ok(vec![CheckReport::failed_precondition(
            "folk-preconditions",
            0.0,
            format!("kernel '{}' is not well-posed", kernel.name()),
        )]);
    }
    let kernels: Vec<Arc<dyn Kernel>> = vec![kernel.clone(); game.players()];
    let spec = Arc::new(DynamicsSpec::new(
        FieldKind::Inertial,
        kernels.clone(),
        scenario.eta,
        PayoffSource::Game(game.clone()),
    )?);
    let mut reports = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);

    // (I) stationarity at restricted equilibria: every pure profile, plus the
    // uniform profile when it happens to be a restricted equilibrium.
    let mut worst_stationarity = 0.0f64;
    let mut candidates: Vec<StrategyProfile> = game
        .pure_profiles()
        .map(|p| StrategyProfile::pure(game.action_counts(), &p))
        .collect();
    let uniform = StrategyProfile::uniform(game.action_counts());
    if games::is_restricted_equilibrium(game, &uniform, 1e-12)?.holds {
        candidates.push(uniform);
    }
    for candidate in &candidates {
        worst_stationarity = worst_stationarity.max(stationarity_residual(&spec, candidate)?);
    }
    reports.push(CheckReport::new(
        "folk-I-stationarity",
        worst_stationarity,
        scenario.stationarity_tol,
        format!("{} restricted-equilibrium candidates", candidates.len()),
    ));

    // (II/III) interior probes: converged runs must land on restricted
    // equilibria (supported payoffs equal within the criticality tolerance).
    let mut converged = 0usize;
    let mut worst_criticality = 0.0f64;
    for _ in 0..scenario.interior_probes {
        let position = StrategyProfile::new(
            game.action_counts()
                .iter()
                .map(|&m| random_interior_point(&mut rng, m, 0.1))
                .collect(),
        );
        let start = start_near(&mut rng, &position, &kernels, 0.0, scenario.start_speed);
        let record = integrate(&spec, &start, &basin_config(scenario.probe_t_end))?;
        if record.termination != Termination::Completed {
            continue;
        }
        let terminal_speed = (2.0 * record.samples.last().unwrap().kinetic).sqrt();
        let t_tail = record.t_start() + 0.9 * (record.t_last() - record.t_start());
        let last_pos = &record.samples.last().unwrap().position;
        let drift = record
            .samples
            .iter()
            .filter(|s| s.t >= t_tail)
            .map(|s| {
                s.position
                    .iter()
                    .zip(last_pos)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0f64, f64::max);
        if terminal_speed < 1e-6 && drift < 1e-8 {
            converged += 1;
            let profile = StrategyProfile::from_flat(game.action_counts(), last_pos)
                .unwrap_or_else(|_| StrategyProfile::uniform(game.action_counts()));
            worst_criticality =
                worst_criticality.max(game_criticality_residual(game, &profile)?);
        }
    }
    reports.push(CheckReport::new(
        "folk-II-III-limit-criticality",
        worst_criticality,
        scenario.criticality_tol,
        format!(
            "{converged}/{} interior probes converged",
            scenario.interior_probes
        ),
    ));

    // (IV) basin probes around each pure strict equilibrium.
    let strict = games::enumerate_pure_strict_equilibria(game)?;
    for eq in &strict {
        let target = StrategyProfile::pure(game.action_counts(), eq);
        let target_flat = target.flatten();
        let mut worst = 0.0f64;
        let mut all_monotone = true;
        for _ in 0..scenario.starts_per_equilibrium {
            let start = start_near(
                &mut rng,
                &target,
                &kernels,
                scenario.start_distance,
                scenario.start_speed,
            );
            let record = integrate(&spec, &start, &basin_config(scenario.t_end))?;
            let report =
                check_convergence_to_point(&record, &target_flat, scenario.convergence_tol);
            worst = worst.max(report.metric);
            all_monotone &= report.passed || report.metric >= scenario.convergence_tol;
        }
        let mut report = CheckReport::new(
            format!("folk-IV-strict-{eq:?}"),
            worst,
            scenario.convergence_tol,
            format!(
                "{} starts within {} of the vertex",
                scenario.starts_per_equilibrium, scenario.start_distance
            ),
        );
        report.passed = report.passed && all_monotone;
        reports.push(report);
    }

    Ok(reports)
}

// ---------------------------------------------------------------------------
// ESS stability experiment (Prop. 4.7)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct EssScenario {
    pub eta: f64,
    pub starts: usize,
    pub start_distance: f64,
    pub start_speed: f64,
    pub t_end: f64,
    pub convergence_tol: f64,
    pub ess_radius: f64,
    pub ess_samples: usize,
    pub seed: u64,
}

impl Default for EssScenario {
    fn default() -> Self {
        Self {
            eta: 1.0,
            starts: 10,
            start_distance: 0.05,
            start_speed: 0.01,
            t_end: 300.0,
            convergence_tol: 1e-3,
            ess_radius: 0.05,
            ess_samples: 10_000,
            seed: 0,
        }
    }
}

/// Single-population stability probe: verify x* is an ESS by sampling
/// (Eq. 4.15), then check that nearby low-speed interior trajectories of the
/// single-population inertial dynamics converge to it. The payoff matrix
/// must be doubly symmetric, possibly after removing payoff-equivalent
/// column offsets.
pub fn ess_stability_experiment(
    sym_game: &SymmetricGame,
    x_star: &SimplexPoint,
    kernel: &Arc<dyn Kernel>,
    scenario: &EssScenario,
) -> Result<CheckReport, AnalysisError> {
    let name = format!("ess-stability-{:?}", x_star.coords());
    let Some(symmetrized) = sym_game.column_symmetrized() else {
        return Ok(CheckReport::failed_precondition(
            name,
            scenario.convergence_tol,
            "payoff matrix is not doubly symmetric (even up to column offsets)".into(),
        ));
    };
    if !(scenario.eta > 0.0) {
        return Ok(CheckReport::failed_precondition(
            name,
            scenario.convergence_tol,
            "needs η > 0".into(),
        ));
    }
    let classification = classify_wellposedness(kernel.as_ref())?;
    if classification.classification != Wellposedness::WellPosed {
        return Ok(CheckReport::failed_precondition(
            name,
            scenario.convergence_tol,
            format!("kernel '{}' is not well-posed", kernel.name()),
        ));
    }
    let ess = ess_check(
        sym_game,
        x_star,
        scenario.ess_radius,
        scenario.ess_samples,
        scenario.seed,
    )?;
    if !ess.is_ess {
        return Ok(CheckReport::failed_precondition(
            name,
            scenario.convergence_tol,
            format!(
                "candidate failed the ESS sampling probe (worst margin {:.3e})",
                ess.worst_margin
            ),
        ));
    }

    // v(x) = U_sym x = ∇(½xᵀU_sym x): single-agent mode with that objective.
    let spec = Arc::new(DynamicsSpec::new(
        FieldKind::Inertial,
        vec![kernel.clone()],
        scenario.eta,
        PayoffSource::Objective(Arc::new(ObjectiveFn::symmetric_bilinear(symmetrized))),
    )?);
    let target = StrategyProfile::new(vec![x_star.clone()]);
    let target_flat = target.flatten();
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed ^ 0x9e3779b97f4a7c15);
    let mut worst = 0.0f64;
    for _ in 0..scenario.starts {
        let start = start_near(
            &mut rng,
            &target,
            std::slice::from_ref(kernel),
            scenario.start_distance,
            scenario.start_speed,
        );
        let record = integrate(&spec, &start, &basin_config(scenario.t_end))?;
        let report = check_convergence_to_point(&record, &target_flat, scenario.convergence_tol);
        worst = worst.max(report.metric);
    }
    Ok(CheckReport::new(
        name,
        worst,
        scenario.convergence_tol,
        format!(
            "ESS margin {:.3e}; {} starts within {}",
            ess.worst_margin, scenario.starts, scenario.start_distance
        ),
    ))
}

// ---------------------------------------------------------------------------
// Named suite batteries
// ---------------------------------------------------------------------------

pub mod suites {
    use super::*;
    use rayon::prelude::*;

    #[derive(Debug, Clone, Copy)]
    pub struct SuiteOptions {
        pub seed: u64,
        /// Overrides every report's threshold when set (negative controls).
        pub threshold_override: Option<f64>,
    }

    impl Default for SuiteOptions {
        fn default() -> Self {
            Self {
                seed: 42,
                threshold_override: None,
            }
        }
    }

    pub fn battery_names() -> &'static [&'static str] {
        &["energy", "velocity-decay", "closed-form", "folk-theorem", "ess"]
    }

    fn apply_override(mut reports: Vec<CheckReport>, opts: &SuiteOptions) -> Vec<CheckReport> {
        if let Some(th) = opts.threshold_override {
            for r in &mut reports {
                r.threshold = th;
                r.passed = r.metric < th;
            }
        }
        reports
    }

    fn lb() -> Arc<dyn Kernel> {
        crate::kernel::resolve("log-barrier").unwrap()
    }

    fn quadratic_objective_spec(eta: f64) -> Arc<DynamicsSpec> {
        Arc::new(
            DynamicsSpec::new(
                FieldKind::Inertial,
                vec![lb()],
                eta,
                PayoffSource::Objective(Arc::new(ObjectiveFn::quadratic_well(vec![
                    0.5, 0.3, 0.2,
                ]))),
            )
            .unwrap(),
        )
    }

    fn interior_config(t_end: f64, sample_interval: f64) -> IntegratorConfig {
        IntegratorConfig {
            chart: Chart::Euclidean,
            t_end,
            sample_interval,
            ..Default::default()
        }
    }

    /// Energy battery: η = 0 conservation and η = 1 dissipation-rate law on
    /// the 3-action quadratic objective under (ILD).
    pub fn energy_battery(opts: &SuiteOptions) -> Result<Vec<CheckReport>, AnalysisError> {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0xe4e4);
        let start = start_near(
            &mut rng,
            &StrategyProfile::new(vec![SimplexPoint::new(vec![0.4, 0.35, 0.25]).unwrap()]),
            &[lb()],
            0.0,
            0.3,
        );
        let mut reports = Vec::new();

        let record = integrate(
            &quadratic_objective_spec(0.0),
            &start,
            &interior_config(100.0, 0.1),
        )?;
        let e0 = record.samples[0].energy;
        let drift = record
            .samples
            .iter()
            .map(|s| (s.energy - e0).abs())
            .fold(0.0, f64::max)
            / (1.0 + e0.abs());
        reports.push(CheckReport::new(
            "energy-conservation-eta0",
            drift,
            1e-6,
            format!("relative drift over t ≤ 100, E(0) = {e0:.6}"),
        ));
        let mut rate = check_energy_dissipation(&record, 0.0)?;
        rate.name = "energy-rate-eta0".into();
        reports.push(rate);

        let record = integrate(
            &quadratic_objective_spec(1.0),
            &start,
            &interior_config(100.0, 0.01),
        )?;
        let mut rate = check_energy_dissipation(&record, 1.0)?;
        rate.name = "energy-rate-eta1".into();
        reports.push(rate);

        Ok(apply_override(reports, opts))
    }

    /// Velocity-decay battery (Prop. 3.2) plus interior potential-maximizer
    /// convergence (Thm. 4.4 / Prop. 4.5) on the quadratic objective.
    pub fn velocity_decay_battery(opts: &SuiteOptions) -> Result<Vec<CheckReport>, AnalysisError> {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x7de1);
        let spec = quadratic_objective_spec(1.0);
        let mut reports = Vec::new();

        let mut worst_speed = 0.0f64;
        let mut tail_notes = Vec::new();
        for _ in 0..10 {
            let position = StrategyProfile::new(vec![random_interior_point(&mut rng, 3, 0.05)]);
            let start = start_near(&mut rng, &position, &[lb()], 0.0, 0.05);
            let record = integrate(&spec, &start, &interior_config(300.0, 0.5))?;
            let report = check_velocity_decay(&record);
            worst_speed = worst_speed.max(report.metric);
            tail_notes.push(report.details);
        }
        reports.push(CheckReport::new(
            "velocity-decay-eta1",
            worst_speed,
            1e-3,
            format!("10 random interior starts; {}", tail_notes.last().unwrap()),
        ));

        let center = vec![0.5, 0.3, 0.2];
        let target = StrategyProfile::new(vec![SimplexPoint::new(center.clone()).unwrap()]);
        let mut worst_dist = 0.0f64;
        let mut worst_criticality = 0.0f64;
        for _ in 0..10 {
            let start = start_near(&mut rng, &target, &[lb()], 0.05, 0.01);
            let record = integrate(&spec, &start, &interior_config(200.0, 0.5))?;
            let report = check_convergence_to_point(&record, &center, 1e-3);
            worst_dist = worst_dist.max(report.metric);
            // Eq. 4.1 at the numeric limit: the objective's partials must be
            // equal across the support of the limit point.
            let limit = &record.samples.last().unwrap().position;
            let partials: Vec<f64> = limit.iter().zip(&center).map(|(a, b)| -2.0 * (a - b)).collect();
            let limit_point = SimplexPoint::new(limit.clone())
                .unwrap_or_else(|_| SimplexPoint::uniform(limit.len()));
            worst_criticality = worst_criticality.max(restricted_criticality_residual(
                &partials,
                &limit_point,
                SUPPORT_EPS,
            ));
        }
        reports.push(CheckReport::new(
            "potential-maximizer-convergence",
            worst_dist,
            1e-3,
            "10 low-speed starts within 0.05 of c = (0.5, 0.3, 0.2)".into(),
        ));
        reports.push(CheckReport::new(
            "restricted-criticality-at-limit",
            worst_criticality,
            1e-5,
            "objective-partial spread over the support of each numeric limit".into(),
        ));

        Ok(apply_override(reports, opts))
    }

    /// Closed-form battery: Eq. 3.10 trajectory/escape, Eq. 3.13 first
    /// integral, and the classifier-vs-simulation dichotomy.
    pub fn closed_form_battery(opts: &SuiteOptions) -> Result<Vec<CheckReport>, AnalysisError> {
        let mut reports = Vec::new();

        // Eq. 3.10: (IRD), ξ₀ = 1 (x = 0.25), v₀ = 1, η = 0.
        let shah = crate::kernel::resolve("shahshahani").unwrap();
        let spec = Arc::new(DynamicsSpec::new(
            FieldKind::Inertial,
            vec![shah.clone()],
            0.0,
            PayoffSource::Game(Arc::new(games::zero2())),
        )?);
        let (xi0, v0) = (1.0f64, 1.0f64);
        let x1 = xi0 * xi0 / 4.0;
        let xdot1 = v0 * x1.sqrt();
        let initial = PhasePoint::new(
            StrategyProfile::new(vec![SimplexPoint::new(vec![1.0 - x1, x1]).unwrap()]),
            vec![TangentVector::new(vec![-xdot1, xdot1]).unwrap()],
        );
        let config = IntegratorConfig {
            chart: Chart::Euclidean,
            t_end: 10.0,
            sample_interval: 0.01,
            ..Default::default()
        };
        let record = integrate(&spec, &initial, &config)?;
        let t_star = eq_3_10_exit_time(xi0, v0)?.unwrap();
        let mut max_err = 0.0f64;
        for s in &record.samples {
            if s.t > 0.9 * t_star {
                break;
            }
            let xi_sim = 2.0 * s.position[1].sqrt();
            max_err = max_err.max((xi_sim - eq_3_10_solution(s.t, xi0, v0)?).abs());
        }
        reports.push(CheckReport::new(
            "eq-3.10-trajectory",
            max_err,
            1e-6,
            format!("max |ξ_sim − ξ| over [0, 0.9 t*], t* = {t_star:.6}"),
        ));
        let escape_err = match record.termination.t_star() {
            Some(ts) => (ts - t_star).abs(),
            None => f64::INFINITY,
        };
        reports.push(CheckReport::new(
            "eq-3.10-escape-time",
            escape_err,
            1e-4,
            format!("termination {}", record.termination.kind()),
        ));

        // Eq. 3.13: (ILD) two-action zero game, η = 0, t ∈ [0, 100].
        let spec = Arc::new(DynamicsSpec::new(
            FieldKind::Inertial,
            vec![lb()],
            0.0,
            PayoffSource::Game(Arc::new(games::zero2())),
        )?);
        let x1 = 0.25;
        let initial = PhasePoint::new(
            StrategyProfile::new(vec![SimplexPoint::new(vec![1.0 - x1, x1]).unwrap()]),
            vec![TangentVector::new(vec![0.125, -0.125]).unwrap()],
        );
        let record = integrate(&spec, &initial, &interior_config(100.0, 0.1))?;
        reports.push(eq_3_13_invariant(&record)?);

        // Dichotomy: classifier vs two-action zero-game behavior at t = 10³.
        for kernel_name in ["shahshahani", "power:1", "log-barrier", "power:2", "power:3"] {
            let kernel = crate::kernel::resolve(kernel_name).unwrap();
            let classification = classify_wellposedness(kernel.as_ref())?.classification;
            let spec = Arc::new(DynamicsSpec::new(
                FieldKind::Inertial,
                vec![kernel.clone()],
                0.0,
                PayoffSource::Game(Arc::new(games::zero2())),
            )?);
            let initial = default_launch(&[2], std::slice::from_ref(&kernel), true);
            let config = IntegratorConfig {
                chart: Chart::Euclidean,
                t_end: 1000.0,
                sample_interval: 1.0,
                ..Default::default()
            };
            let record = integrate(&spec, &initial, &config)?;
            let escaped = matches!(record.termination, Termination::BoundaryEscape { .. });
            let agrees = match classification {
                Wellposedness::IllPosed => escaped,
                Wellposedness::WellPosed => record.termination == Termination::Completed,
            };
            reports.push(CheckReport::new(
                format!("dichotomy-{kernel_name}"),
                if agrees { 0.0 } else { 1.0 },
                0.5,
                format!(
                    "classifier {classification}, run terminated {}",
                    record.termination.kind()
                ),
            ));
        }

        Ok(apply_override(reports, opts))
    }

    /// Folk-theorem battery on Prisoner's Dilemma and 2×2 coordination under
    /// (ILD) with η = 1.
    pub fn folk_theorem_battery(opts: &SuiteOptions) -> Result<Vec<CheckReport>, AnalysisError> {
        let kernel = lb();
        let mut reports = Vec::new();
        for name in ["prisoners_dilemma", "coordination_2x2", "matching_pennies"] {
            let game = Arc::new(games::builtin_game(name).unwrap().game);
            let scenario = FolkScenario {
                seed: opts.seed ^ name.len() as u64,
                ..Default::default()
            };
            for mut report in folk_theorem_suite(&game, &kernel, &scenario)? {
                report.name = format!("{name}-{}", report.name);
                // Matching Pennies has no strict equilibria; its battery rows
                // cover parts I–III only.
                reports.push(report);
            }
        }
        Ok(apply_override(reports, opts))
    }

    /// ESS battery: Hawk–Dove mixed ESS and the partnership-game vertices.
    pub fn ess_battery(opts: &SuiteOptions) -> Result<Vec<CheckReport>, AnalysisError> {
        let kernel = lb();
        let mut reports = Vec::new();
        let scenario = EssScenario {
            seed: opts.seed ^ 0xe55,
            ..Default::default()
        };

        let hd = games::hawk_dove_matrix();
        let mixed = SimplexPoint::new(vec![0.5, 0.5]).unwrap();
        let mut report = ess_stability_experiment(&hd, &mixed, &kernel, &scenario)?;
        report.name = format!("hawk-dove-{}", report.name);
        reports.push(report);

        let partnership = SymmetricGame::new(vec![vec![10.0, 0.0], vec![0.0, 10.0]]).unwrap();
        for vertex in 0..2 {
            // Vertex targets sit on the boundary; probe from a slightly
            // interior anchor so starts remain interior.
            let anchor = SimplexPoint::new(if vertex == 0 {
                vec![0.97, 0.03]
            } else {
                vec![0.03, 0.97]
            })
            .unwrap();
            let pure = SimplexPoint::vertex(2, vertex);
            let ess = ess_check(&partnership, &pure, 0.05, 10_000, scenario.seed)?;
            let spec = Arc::new(DynamicsSpec::new(
                FieldKind::Inertial,
                vec![kernel.clone()],
                scenario.eta,
                PayoffSource::Objective(Arc::new(ObjectiveFn::symmetric_bilinear(
                    partnership.column_symmetrized().unwrap(),
                ))),
            )?);
            let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed + vertex as u64);
            let mut worst = 0.0f64;
            for _ in 0..scenario.starts {
                let start = start_near(
                    &mut rng,
                    &StrategyProfile::new(vec![anchor.clone()]),
                    std::slice::from_ref(&kernel),
                    0.02,
                    scenario.start_speed,
                );
                let record = integrate(&spec, &start, &basin_config(scenario.t_end))?;
                let report =
                    check_convergence_to_point(&record, pure.coords(), scenario.convergence_tol);
                worst = worst.max(report.metric);
            }
            let mut report = CheckReport::new(
                format!("partnership-ess-vertex-{vertex}"),
                worst,
                scenario.convergence_tol,
                format!("sampled ESS margin {:.3e}", ess.worst_margin),
            );
            report.passed = report.passed && ess.is_ess;
            reports.push(report);
        }
        Ok(apply_override(reports, opts))
    }

    pub fn run_battery(
        name: &str,
        opts: &SuiteOptions,
    ) -> Result<Vec<CheckReport>, AnalysisError> {
        match name {
            "energy" => energy_battery(opts),
            "velocity-decay" => velocity_decay_battery(opts),
            "closed-form" => closed_form_battery(opts),
            "folk-theorem" => folk_theorem_battery(opts),
            "ess" => ess_battery(opts),
            other => Err(AnalysisError::Domain(format!("unknown battery '{other}'"))),
        }
    }

    /// Run a list of batteries, scenarios in parallel, results in input
    /// order. INERTIA_THREADS caps the worker count.
    pub fn run_suite(
        names: &[String],
        opts: &SuiteOptions,
    ) -> Result<Vec<CheckReport>, AnalysisError> {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = std::env::var("INERTIA_THREADS")
            .ok()
            .and_then(|v| v.parse::<usize>().ok())
            .filter(|&n| n > 0)
        {
            builder = builder.num_threads(n);
        }
        let pool = builder
            .build()
            .map_err(|e| AnalysisError::Domain(format!("thread pool: {e}")))?;
        let results: Result<Vec<Vec<CheckReport>>, AnalysisError> = pool.install(|| {
            names
                .par_iter()
                .map(|name| run_battery(name, opts))
                .collect()
        });
        Ok(results?.into_iter().flatten().collect())
    }

    /// The full built-in suite.
    pub fn paper_core(opts: &SuiteOptions) -> Result<Vec<CheckReport>, AnalysisError> {
        let names: Vec<String> = battery_names().iter().map(|s| s.to_string()).collect();
        run_suite(&names, opts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn eq_3_10_examples() {
        assert_relative_eq!(eq_3_10_solution(0.0, 1.3, 0.7).unwrap(), 1.3);
        // ξ₀ = √2, v₀ = 1, t = (π/4)√2 → 2 (boundary)
        let t = PI / 4.0 * 2f64.sqrt();
        assert_relative_eq!(
            eq_3_10_solution(t, 2f64.sqrt(), 1.0).unwrap(),
            2.0,
            epsilon = 1e-12
        );
        // v₀ = 0: constant
        for &t in &[0.0, 1.0, 17.3] {
            assert_relative_eq!(eq_3_10_solution(t, 0.8, 0.0).unwrap(), 0.8);
        }
        assert!(eq_3_10_solution(1.0, 2.5, 1.0).is_err());
        assert_relative_eq!(
            eq_3_10_exit_time(2f64.sqrt(), 1.0).unwrap().unwrap(),
            PI / 4.0 * 2f64.sqrt(),
            epsilon = 1e-12
        );
        assert!(eq_3_10_exit_time(0.5, 0.0).unwrap().is_none());
        // negative velocity exits at ξ = 0
        let t = eq_3_10_exit_time(1.0, -1.0).unwrap().unwrap();
        assert_relative_eq!(eq_3_10_solution(t, 1.0, -1.0).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn criticality_residual_examples() {
        // vertex: singleton support → 0
        let vertex = SimplexPoint::vertex(3, 1);
        assert_eq!(
            restricted_criticality_residual(&[5.0, -1.0, 2.0], &vertex, SUPPORT_EPS),
            0.0
        );
        // constant partials → 0
        let interior = SimplexPoint::uniform(3);
        assert_eq!(
            restricted_criticality_residual(&[2.0, 2.0, 2.0], &interior, SUPPORT_EPS),
            0.0
        );
        // Φ(x) = x₀² at (1/2, 1/2): partials (1, 0) → spread 1
        let half = SimplexPoint::uniform(2);
        assert_relative_eq!(
            restricted_criticality_residual(&[1.0, 0.0], &half, SUPPORT_EPS),
            1.0
        );
    }

    fn quick_record(eta: f64, t_end: f64, interval: f64) -> TrajectoryRecord {
        let spec = Arc::new(
            DynamicsSpec::new(
                FieldKind::Inertial,
                vec![crate::kernel::resolve("log-barrier").unwrap()],
                eta,
                PayoffSource::Objective(Arc::new(ObjectiveFn::quadratic_well(vec![
                    0.5, 0.3, 0.2,
                ]))),
            )
            .unwrap(),
        );
        let initial = PhasePoint::new(
            StrategyProfile::new(vec![SimplexPoint::new(vec![0.42, 0.33, 0.25]).unwrap()]),
            vec![TangentVector::new(vec![0.04, -0.01, -0.03]).unwrap()],
        );
        let config = IntegratorConfig {
            chart: Chart::Euclidean,
            t_end,
            sample_interval: interval,
            ..Default::default()
        };
        integrate(&spec, &initial, &config).unwrap()
    }

    #[test]
    fn energy_dissipation_checks() {
        let record = quick_record(0.0, 60.0, 0.05);
        let report = check_energy_dissipation(&record, 0.0).unwrap();
        assert!(report.passed, "metric {}", report.metric);
        assert!(report.metric < 1e-6);

        let record = quick_record(1.0, 60.0, 0.01);
        let report = check_energy_dissipation(&record, 1.0).unwrap();
        assert!(report.passed, "metric {}", report.metric);

        // negative control: zero out the energy column
        let mut corrupted = record.clone();
        for s in &mut corrupted.samples {
            s.energy = 0.0;
        }
        let report = check_energy_dissipation(&corrupted, 1.0).unwrap();
        assert!(!report.passed);
    }

    #[test]
    fn energy_dissipation_needs_samples() {
        let mut record = quick_record(0.0, 60.0, 0.05);
        record.samples.truncate(2);
        assert!(matches!(
            check_energy_dissipation(&record, 0.0),
            Err(AnalysisError::InsufficientSamples { .. })
        ));
    }

    #[test]
    fn velocity_decay_checks() {
        let record = quick_record(1.0, 300.0, 0.5);
        let report = check_velocity_decay(&record);
        assert!(report.passed, "metric {}", report.metric);

        // η = 0 with leftover speed fails (conserved energy keeps K > 0)
        let spec = Arc::new(
            DynamicsSpec::new(
                FieldKind::Inertial,
                vec![crate::kernel::resolve("log-barrier").unwrap()],
                0.0,
                PayoffSource::Game(Arc::new(games::zero2())),
            )
            .unwrap(),
        );
        let initial = PhasePoint::new(
            StrategyProfile::uniform(&[2]),
            vec![TangentVector::new(vec![0.05, -0.05]).unwrap()],
        );
        let config = IntegratorConfig {
            chart: Chart::Euclidean,
            t_end: 60.0,
            sample_interval: 0.5,
            ..Default::default()
        };
        let record = integrate(&spec, &initial, &config).unwrap();
        let report = check_velocity_decay(&record);
        assert!(!report.passed);
    }

    #[test]
    fn convergence_check_examples() {
        let record = quick_record(1.0, 200.0, 0.5);
        let report = check_convergence_to_point(&record, &[0.5, 0.3, 0.2], 1e-3);
        assert!(report.passed, "metric {}", report.metric);

        let report = check_convergence_to_point(&record, &[0.2, 0.3, 0.5], 1e-3);
        assert!(!report.passed);
    }

    #[test]
    fn eq_3_13_holds_on_ild_run_and_fails_on_corruption() {
        let spec = Arc::new(
            DynamicsSpec::new(
                FieldKind::Inertial,
                vec![crate::kernel::resolve("log-barrier").unwrap()],
                0.0,
                PayoffSource::Game(Arc::new(games::zero2())),
            )
            .unwrap(),
        );
        let x1 = 0.25;
        let initial = PhasePoint::new(
            StrategyProfile::new(vec![SimplexPoint::new(vec![1.0 - x1, x1]).unwrap()]),
            vec![TangentVector::new(vec![0.125, -0.125]).unwrap()],
        );
        let config = IntegratorConfig {
            chart: Chart::Euclidean,
            t_end: 100.0,
            sample_interval: 0.1,
            ..Default::default()
        };
        let record = integrate(&spec, &initial, &config).unwrap();
        let report = eq_3_13_invariant(&record).unwrap();
        assert!(report.passed, "metric {}", report.metric);

        let mut corrupted = record.clone();
        for (i, s) in corrupted.samples.iter_mut().enumerate() {
            if i % 2 == 0 {
                s.velocity[1] *= 1.01;
            }
        }
        let report = eq_3_13_invariant(&corrupted).unwrap();
        assert!(!report.passed);
    }

    #[test]
    fn folk_suite_rejects_ill_posed_kernels() {
        let game = Arc::new(games::builtin_game("prisoners_dilemma").unwrap().game);
        let shah = crate::kernel::resolve("shahshahani").unwrap();
        let reports = folk_theorem_suite(&game, &shah, &FolkScenario::default()).unwrap();
        assert_eq!(reports.len(), 1);
        assert!(!reports[0].passed);
        assert!(reports[0].details.contains("not well-posed"));
    }

    #[test]
    fn ess_experiment_rejects_non_ess_candidates() {
        // The partnership game's mixed point is invadable, so the
        // precondition probe must fail before any simulation runs.
        let coordination = SymmetricGame::new(vec![vec![10.0, 0.0], vec![0.0, 10.0]]).unwrap();
        let mixed = SimplexPoint::new(vec![0.5, 0.5]).unwrap();
        let kernel = crate::kernel::resolve("log-barrier").unwrap();
        let report =
            ess_stability_experiment(&coordination, &mixed, &kernel, &EssScenario::default())
                .unwrap();
        assert!(!report.passed);
        assert!(report.details.contains("ESS sampling probe"));
    }

    #[test]
    fn ess_experiment_rejects_unsymmetrizable_matrices() {
        // Rock–paper–scissors is zero-sum and not column-symmetrizable.
        let rps = SymmetricGame::new(vec![
            vec![0.0, -1.0, 1.0],
            vec![1.0, 0.0, -1.0],
            vec![-1.0, 1.0, 0.0],
        ])
        .unwrap();
        let uniform = SimplexPoint::uniform(3);
        let kernel = crate::kernel::resolve("log-barrier").unwrap();
        let report =
            ess_stability_experiment(&rps, &uniform, &kernel, &EssScenario::default()).unwrap();
        assert!(!report.passed);
        assert!(report.details.contains("not doubly symmetric"));
    }

    #[test]
    fn eq_3_13_zero_velocity_gives_zero_constant() {
        let spec = Arc::new(
            DynamicsSpec::new(
                FieldKind::Inertial,
                vec![crate::kernel::resolve("log-barrier").unwrap()],
                0.0,
                PayoffSource::Game(Arc::new(games::zero2())),
            )
            .unwrap(),
        );
        let initial = PhasePoint::at_rest(StrategyProfile::new(vec![SimplexPoint::new(vec![
            0.7, 0.3,
        ])
        .unwrap()]));
        let config = IntegratorConfig {
            chart: Chart::Euclidean,
            t_end: 60.0,
            sample_interval: 0.5,
            ..Default::default()
        };
        let record = integrate(&spec, &initial, &config).unwrap();
        let report = eq_3_13_invariant(&record).unwrap();
        assert!(report.passed);
        assert!(report.details.contains("C₀ = 0.000000000"));
    }
}
