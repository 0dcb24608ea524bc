//! Right-hand sides of the inertial and replicator vector fields, plus the
//! energy functionals. Each field variant sits behind the [`PhaseField`]
//! trait over flattened phase states so the integrator and CLI can select a
//! field by name at runtime.

use std::sync::Arc;

use thiserror::Error;

use crate::games::{self, GameError, NormalFormGame, StrategyProfile};
use crate::geometry::{
    EuclideanChart, GeometryError, SimplexPoint, TangentVector, INTERIOR_EPS,
};
use crate::kernel::Kernel;

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("state touches the boundary (min coordinate {min:e} ≤ {INTERIOR_EPS:e})")]
    Boundary { min: f64 },
    #[error("friction coefficient must be nonnegative, got {0}")]
    NegativeFriction(f64),
    #[error("field '{field}' needs one kernel per player ({expected}), got {got}")]
    KernelCount {
        field: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("unknown field kind '{0}' (expected id, id-euclidean, rd, or rd2)")]
    UnknownField(String),
    #[error("field '{0}' cannot be integrated in the euclidean chart")]
    ChartUnsupported(&'static str),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("initial phase point lacks a velocity required by a second-order field")]
    MissingVelocity,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Game(#[from] GameError),
}

/// The vector-field family, addressable by name for CLI/config use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum FieldKind {
    /// (ID): heavy ball with friction under the per-player HR metrics.
    Inertial,
    /// (ID-E): the same dynamics integrated in the isometric Euclidean chart.
    InertialEuclidean,
    /// (RD): first-order replicator baseline.
    Replicator,
    /// (RD₂): second-order replicator baseline (no ½ factor, no friction).
    SecondOrderReplicator,
}

impl FieldKind {
    pub fn from_name(name: &str) -> Result<Self, FieldError> {
        match name {
            "id" => Ok(Self::Inertial),
            "id-euclidean" => Ok(Self::InertialEuclidean),
            "rd" => Ok(Self::Replicator),
            "rd2" => Ok(Self::SecondOrderReplicator),
            other => Err(FieldError::UnknownField(other.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Inertial => "id",
            Self::InertialEuclidean => "id-euclidean",
            Self::Replicator => "rd",
            Self::SecondOrderReplicator => "rd2",
        }
    }

    pub fn second_order(&self) -> bool {
        !matches!(self, Self::Replicator)
    }

    pub fn uses_kernels(&self) -> bool {
        matches!(self, Self::Inertial | Self::InertialEuclidean)
    }

    pub fn field_names() -> &'static [&'static str] {
        &["id", "id-euclidean", "rd", "rd2"]
    }
}

/// Smooth single-agent objective Φ with its gradient, both defined on an
/// open neighborhood of the simplex (standard-coordinate partials).
pub struct ObjectiveFn {
    n_actions: usize,
    phi: Box<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    grad: Box<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>,
}

impl ObjectiveFn {
    pub fn new(
        n_actions: usize,
        phi: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        grad: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            n_actions,
            phi: Box::new(phi),
            grad: Box::new(grad),
        }
    }

    /// Φ(x) = −Σ (x_α − c_α)², the concave quadratic with maximizer c.
    pub fn quadratic_well(center: Vec<f64>) -> Self {
        let c2 = center.clone();
        Self::new(
            center.len(),
            move |x| -x.iter().zip(&center).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(),
            move |x| x.iter().zip(&c2).map(|(a, b)| -2.0 * (a - b)).collect(),
        )
    }

    /// Φ(x) = ½ xᵀUx for a symmetric matrix U (the single-population
    /// potential of a doubly symmetric game; ∇Φ = Ux).
    pub fn symmetric_bilinear(matrix: Vec<Vec<f64>>) -> Self {
        let m2 = matrix.clone();
        let n = matrix.len();
        Self::new(
            n,
            move |x| {
                0.5 * matrix
                    .iter()
                    .zip(x)
                    .map(|(row, &xi)| xi * row.iter().zip(x).map(|(u, &xj)| u * xj).sum::<f64>())
                    .sum::<f64>()
            },
            move |x| {
                m2.iter()
                    .map(|row| row.iter().zip(x).map(|(u, &xj)| u * xj).sum())
                    .collect()
            },
        )
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        (self.phi)(x)
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        (self.grad)(x)
    }
}

/// Where payoff vectors come from: a finite game, or a smooth objective in
/// single-agent mode (v = ∇Φ).
pub enum PayoffSource {
    Game(Arc<NormalFormGame>),
    Objective(Arc<ObjectiveFn>),
}

impl PayoffSource {
    pub fn action_counts(&self) -> Vec<usize> {
        match self {
            Self::Game(g) => g.action_counts().to_vec(),
            Self::Objective(o) => vec![o.n_actions()],
        }
    }

    pub fn players(&self) -> usize {
        match self {
            Self::Game(g) => g.players(),
            Self::Objective(_) => 1,
        }
    }

    /// Payoff vectors v_k for every player, over raw per-player coordinates.
    fn payoff_vectors(&self, coords: &[&[f64]]) -> Vec<Vec<f64>> {
        match self {
            Self::Game(g) => (0..g.players())
                .map(|k| games::payoff_vector_at(g, coords, k))
                .collect(),
            Self::Objective(o) => vec![o.gradient(coords[0])],
        }
    }
}

enum PotentialBackend {
    /// Single-agent Φ from the objective callback.
    Objective,
    /// Multilinear extension of the verified game potential.
    GameTensor(Vec<f64>),
    /// Non-potential game: kinetic-only energy reports.
    None,
}

/// Total-energy decomposition E = K − Φ. `potential` is absent for
/// non-potential games, in which case `total()` reports the kinetic part.
#[derive(Debug, Clone, Copy)]
pub struct EnergyReport {
    pub kinetic: f64,
    pub potential: Option<f64>,
}

impl EnergyReport {
    pub fn total(&self) -> f64 {
        self.kinetic - self.potential.unwrap_or(0.0)
    }

    pub fn has_potential(&self) -> bool {
        self.potential.is_some()
    }
}

/// A phase-space state: positions per player plus (for second-order fields)
/// tangent velocities.
#[derive(Debug, Clone)]
pub struct PhasePoint {
    pub position: StrategyProfile,
    pub velocity: Option<Vec<TangentVector>>,
    pub time: f64,
}

impl PhasePoint {
    pub fn new(position: StrategyProfile, velocity: Vec<TangentVector>) -> Self {
        Self {
            position,
            velocity: Some(velocity),
            time: 0.0,
        }
    }

    pub fn first_order(position: StrategyProfile) -> Self {
        Self {
            position,
            velocity: None,
            time: 0.0,
        }
    }

    pub fn at_rest(position: StrategyProfile) -> Self {
        let velocity = position
            .points()
            .iter()
            .map(|p| TangentVector::zero(p.len()))
            .collect();
        Self {
            position,
            velocity: Some(velocity),
            time: 0.0,
        }
    }
}

/// A fully specified dynamical system: field kind, per-player kernels,
/// friction, payoff source, and the derived potential backend.
pub struct DynamicsSpec {
    field: FieldKind,
    kernels: Vec<Arc<dyn Kernel>>,
    eta: f64,
    payoffs: PayoffSource,
    potential: PotentialBackend,
}

impl DynamicsSpec {
    pub fn new(
        field: FieldKind,
        kernels: Vec<Arc<dyn Kernel>>,
        eta: f64,
        payoffs: PayoffSource,
    ) -> Result<Self, FieldError> {
        if !(eta >= 0.0) {
            return Err(FieldError::NegativeFriction(eta));
        }
        let players = payoffs.players();
        if field.uses_kernels() && kernels.len() != players {
            return Err(FieldError::KernelCount {
                field: field.name(),
                expected: players,
                got: kernels.len(),
            });
        }
        let potential = match &payoffs {
            PayoffSource::Objective(_) => PotentialBackend::Objective,
            PayoffSource::Game(g) => {
                let cert = games::verify_potential(g);
                match cert.potential_values {
                    Some(phi) => PotentialBackend::GameTensor(phi),
                    None => PotentialBackend::None,
                }
            }
        };
        Ok(Self {
            field,
            kernels,
            eta,
            payoffs,
            potential,
        })
    }

    pub fn field_kind(&self) -> FieldKind {
        self.field
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn kernels(&self) -> &[Arc<dyn Kernel>] {
        &self.kernels
    }

    pub fn payoffs(&self) -> &PayoffSource {
        &self.payoffs
    }

    pub fn action_counts(&self) -> Vec<usize> {
        self.payoffs.action_counts()
    }

    pub fn has_potential(&self) -> bool {
        !matches!(self.potential, PotentialBackend::None)
    }

    /// Φ(x) over raw coordinates, when the spec has a potential.
    pub fn potential_at(&self, coords: &[&[f64]]) -> Option<f64> {
        match (&self.potential, &self.payoffs) {
            (PotentialBackend::Objective, PayoffSource::Objective(o)) => {
                Some(o.value(coords[0]))
            }
            (PotentialBackend::GameTensor(phi), PayoffSource::Game(g)) => {
                Some(games::potential_value_at(g, phi, coords))
            }
            _ => None,
        }
    }
}

fn check_min_coord(coords: &[&[f64]]) -> Result<(), FieldError> {
    let min = coords
        .iter()
        .flat_map(|c| c.iter().copied())
        .fold(f64::INFINITY, f64::min);
    if min > INTERIOR_EPS {
        Ok(())
    } else {
        Err(FieldError::Boundary { min })
    }
}

// ---------------------------------------------------------------------------
// Field formulas
// ---------------------------------------------------------------------------

/// HR gradient of a function with partials `dvec` at x (Eq. 2.14 form):
/// (grad f)_α = (1/θ″_α)[d_α − Θ″ Σ_β d_β/θ″_β]. The result is tangent.
pub fn hr_gradient(
    kernel: &dyn Kernel,
    x: &SimplexPoint,
    dvec: &[f64],
) -> Result<TangentVector, FieldError> {
    if dvec.len() != x.len() {
        return Err(FieldError::DimensionMismatch {
            expected: x.len(),
            got: dvec.len(),
        });
    }
    check_min_coord(&[x.coords()])?;
    let inv: Vec<f64> = x.coords().iter().map(|&c| kernel.inv_d2(c)).collect();
    let harmonic = 1.0 / inv.iter().sum::<f64>();
    let weighted: f64 = inv.iter().zip(dvec).map(|(i, d)| i * d).sum();
    let grad: Vec<f64> = inv
        .iter()
        .zip(dvec)
        .map(|(i, d)| i * (d - harmonic * weighted))
        .collect();
    Ok(TangentVector::project(grad))
}

/// One player's (ID) block in simplex coordinates. Zero metric weights
/// (boundary coordinates) and zero velocities contribute exactly zero, so the
/// formula extends continuously to the boundary for stationarity probes.
fn inertial_block(
    kernel: &dyn Kernel,
    coords: &[f64],
    vel: &[f64],
    payoff: &[f64],
    eta: f64,
) -> Vec<f64> {
    let m = coords.len();
    let inv: Vec<f64> = coords.iter().map(|&c| kernel.inv_d2(c)).collect();
    let harmonic = 1.0 / inv.iter().sum::<f64>();
    let drive_mean: f64 = inv.iter().zip(payoff).map(|(i, v)| i * v).sum::<f64>() * harmonic;
    // Σ_β (Θ″/θ″_β) θ‴_β ẋ_β² = Θ″ Σ_β (θ‴_β/θ″_β) ẋ_β²
    let vel_mean: f64 = coords
        .iter()
        .zip(vel)
        .map(|(&c, &w)| {
            if w == 0.0 {
                0.0
            } else {
                kernel.d3_over_d2(c) * w * w
            }
        })
        .sum::<f64>()
        * harmonic;
    (0..m)
        .map(|a| {
            let drive = if inv[a] == 0.0 {
                0.0
            } else {
                inv[a] * (payoff[a] - drive_mean)
            };
            let own = if vel[a] == 0.0 {
                0.0
            } else {
                kernel.d3_over_d2(coords[a]) * vel[a] * vel[a]
            };
            let inertia = -0.5 * (own - if inv[a] == 0.0 { 0.0 } else { inv[a] * vel_mean });
            drive + inertia - eta * vel[a]
        })
        .collect()
}

/// The inertial game dynamics (ID) in simplex coordinates: per-player
/// accelerations ẍ_k. Positions must be interior and velocities tangent.
pub fn inertial_field_simplex(
    spec: &DynamicsSpec,
    state: &PhasePoint,
) -> Result<Vec<Vec<f64>>, FieldError> {
    let coords: Vec<&[f64]> = state.position.points().iter().map(|p| p.coords()).collect();
    check_min_coord(&coords)?;
    let velocity = state.velocity.as_ref().ok_or(FieldError::MissingVelocity)?;
    let payoffs = spec.payoffs.payoff_vectors(&coords);
    Ok((0..coords.len())
        .map(|k| {
            inertial_block(
                spec.kernels[k].as_ref(),
                coords[k],
                velocity[k].components(),
                &payoffs[k],
                spec.eta,
            )
        })
        .collect())
}

/// Residual of the stationarity condition at (x, 0): the max-abs component of
/// the boundary-extended second-order field. Exactly zero at restricted
/// equilibria (Thm. 4.6.I behavior).
pub fn stationarity_residual(
    spec: &DynamicsSpec,
    position: &StrategyProfile,
) -> Result<f64, FieldError> {
    let coords: Vec<&[f64]> = position.points().iter().map(|p| p.coords()).collect();
    let payoffs = spec.payoffs.payoff_vectors(&coords);
    let mut worst = 0.0f64;
    for k in 0..coords.len() {
        let zeros = vec![0.0; coords[k].len()];
        let block = match spec.field {
            FieldKind::Inertial | FieldKind::InertialEuclidean => inertial_block(
                spec.kernels[k].as_ref(),
                coords[k],
                &zeros,
                &payoffs[k],
                spec.eta,
            ),
            FieldKind::Replicator | FieldKind::SecondOrderReplicator => {
                replicator_block(coords[k], &payoffs[k])
            }
        };
        for v in block {
            worst = worst.max(v.abs());
        }
    }
    Ok(worst)
}

/// One player's (ID-E) block from already-inverted positions x = (φ′)⁻¹(ξ):
/// ξ̈_α = (1/√θ″_α)[v_α − Σ_β(Θ″/θ″_β)v_β] + ½(Θ″/√θ″_α)Σ_β θ‴_β/(θ″_β)² ξ̇²_β − η ξ̇_α.
fn inertial_euclidean_block_at(
    kernel: &dyn Kernel,
    coords: &[f64],
    xidot: &[f64],
    payoff: &[f64],
    eta: f64,
) -> Result<Vec<f64>, FieldError> {
    let inv: Vec<f64> = coords.iter().map(|&c| kernel.inv_d2(c)).collect();
    let harmonic = 1.0 / inv.iter().sum::<f64>();
    let drive_mean: f64 = inv.iter().zip(payoff).map(|(i, v)| i * v).sum::<f64>() * harmonic;
    // contact force: ½ Θ″ Σ_β θ‴_β/(θ″_β)² ξ̇_β²
    let contact_sum: f64 = coords
        .iter()
        .zip(xidot)
        .map(|(&c, &w)| {
            if w == 0.0 {
                0.0
            } else {
                kernel.d3_over_d2_sq(c) * w * w
            }
        })
        .sum::<f64>()
        * harmonic;
    Ok((0..coords.len())
        .map(|a| {
            let scale = kernel.inv_sqrt_d2(coords[a]);
            let drive = if scale == 0.0 {
                0.0
            } else {
                scale * (payoff[a] - drive_mean)
            };
            let contact = if scale == 0.0 { 0.0 } else { 0.5 * scale * contact_sum };
            drive + contact - eta * xidot[a]
        })
        .collect())
}

fn inertial_euclidean_block(
    kernel: &dyn Kernel,
    chart: &EuclideanChart,
    xi: &[f64],
    xidot: &[f64],
    payoff: &[f64],
    eta: f64,
) -> Result<Vec<f64>, FieldError> {
    let coords: Vec<f64> = xi
        .iter()
        .map(|&v| chart.phi_prime_inv(v).map(|c| c.max(0.0)))
        .collect::<Result<_, _>>()?;
    inertial_euclidean_block_at(kernel, &coords, xidot, payoff, eta)
}

/// (ID-E): the inertial dynamics in Euclidean coordinates. Input and output
/// are per-player ξ, ξ̇ blocks; charts are taken from the spec's kernels.
pub fn inertial_field_euclidean(
    spec: &DynamicsSpec,
    charts: &[Arc<EuclideanChart>],
    xi: &[Vec<f64>],
    xidot: &[Vec<f64>],
) -> Result<Vec<Vec<f64>>, FieldError> {
    let counts = spec.action_counts();
    if xi.len() != counts.len() || xidot.len() != counts.len() {
        return Err(FieldError::DimensionMismatch {
            expected: counts.len(),
            got: xi.len(),
        });
    }
    let mut coords_owned: Vec<Vec<f64>> = Vec::with_capacity(counts.len());
    for (k, block) in xi.iter().enumerate() {
        let chart = &charts[k];
        let coords: Vec<f64> = block
            .iter()
            .map(|&v| chart.phi_prime_inv(v).map(|c| c.max(0.0)))
            .collect::<Result<_, _>>()?;
        coords_owned.push(coords);
    }
    let coord_views: Vec<&[f64]> = coords_owned.iter().map(|c| c.as_slice()).collect();
    let payoffs = spec.payoffs.payoff_vectors(&coord_views);
    (0..counts.len())
        .map(|k| {
            inertial_euclidean_block_at(
                spec.kernels[k].as_ref(),
                &coords_owned[k],
                &xidot[k],
                &payoffs[k],
                spec.eta,
            )
        })
        .collect()
}

fn replicator_block(coords: &[f64], payoff: &[f64]) -> Vec<f64> {
    let mean: f64 = coords.iter().zip(payoff).map(|(x, v)| x * v).sum();
    coords
        .iter()
        .zip(payoff)
        .map(|(&x, &v)| x * (v - mean))
        .collect()
}

/// (RD): ẋ_kα = x_kα [v_kα − Σ_β x_kβ v_kβ]. Defined on the closed simplex.
pub fn replicator_field(
    game: &NormalFormGame,
    x: &StrategyProfile,
) -> Result<Vec<Vec<f64>>, FieldError> {
    let coords: Vec<&[f64]> = x.points().iter().map(|p| p.coords()).collect();
    Ok((0..game.players())
        .map(|k| replicator_block(coords[k], &games::payoff_vector_at(game, &coords, k)))
        .collect())
}

fn second_order_replicator_block(coords: &[f64], vel: &[f64], payoff: &[f64]) -> Vec<f64> {
    let drive = replicator_block(coords, payoff);
    let sum: f64 = coords
        .iter()
        .zip(vel)
        .map(|(&x, &w)| if w == 0.0 { 0.0 } else { w * w / x })
        .sum();
    drive
        .iter()
        .zip(coords.iter().zip(vel))
        .map(|(&d, (&x, &w))| {
            let own = if w == 0.0 { 0.0 } else { w * w / (x * x) };
            d + x * (own - sum)
        })
        .collect()
}

/// (RD₂): ẍ_kα = x_kα[v_kα − Σ x_kβ v_kβ] + x_kα[ẋ²_kα/x²_kα − Σ ẋ²_kβ/x_kβ].
pub fn second_order_replicator_field(
    game: &NormalFormGame,
    state: &PhasePoint,
) -> Result<Vec<Vec<f64>>, FieldError> {
    let coords: Vec<&[f64]> = state.position.points().iter().map(|p| p.coords()).collect();
    check_min_coord(&coords)?;
    let velocity = state.velocity.as_ref().ok_or(FieldError::MissingVelocity)?;
    Ok((0..game.players())
        .map(|k| {
            second_order_replicator_block(
                coords[k],
                velocity[k].components(),
                &games::payoff_vector_at(game, &coords, k),
            )
        })
        .collect())
}

/// Total energy E = K − Φ at a phase point, with K = ½ Σ_k Σ_α θ″_kα ẋ²_kα.
/// Non-potential games produce a kinetic-only report.
pub fn energy(spec: &DynamicsSpec, state: &PhasePoint) -> Result<EnergyReport, FieldError> {
    let coords: Vec<&[f64]> = state.position.points().iter().map(|p| p.coords()).collect();
    let kinetic = match (&state.velocity, spec.field.second_order()) {
        (Some(vel), true) if spec.field.uses_kernels() => {
            check_min_coord(&coords)?;
            let mut k2 = 0.0;
            for (k, v) in vel.iter().enumerate() {
                for (&c, &w) in coords[k].iter().zip(v.components()) {
                    let scaled = spec.kernels[k].sqrt_d2(c) * w;
                    k2 += scaled * scaled;
                }
            }
            0.5 * k2
        }
        _ => 0.0,
    };
    Ok(EnergyReport {
        kinetic,
        potential: spec.potential_at(&coords),
    })
}

// ---------------------------------------------------------------------------
// Flattened phase-field views for the integrator
// ---------------------------------------------------------------------------

/// Coordinates a trajectory is integrated in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Chart {
    Simplex,
    Euclidean,
}

/// Flattened layout of a multi-player profile.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProfileLayout {
    action_counts: Vec<usize>,
    offsets: Vec<usize>,
    total: usize,
}

impl ProfileLayout {
    pub fn new(action_counts: Vec<usize>) -> Self {
        let mut offsets = Vec::with_capacity(action_counts.len());
        let mut total = 0;
        for &m in &action_counts {
            offsets.push(total);
            total += m;
        }
        Self {
            action_counts,
            offsets,
            total,
        }
    }

    pub fn action_counts(&self) -> &[usize] {
        &self.action_counts
    }

    pub fn players(&self) -> usize {
        self.action_counts.len()
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn block<'a>(&self, flat: &'a [f64], k: usize) -> &'a [f64] {
        &flat[self.offsets[k]..self.offsets[k] + self.action_counts[k]]
    }

    pub fn blocks<'a>(&self, flat: &'a [f64]) -> Vec<&'a [f64]> {
        (0..self.players()).map(|k| self.block(flat, k)).collect()
    }

    /// Locate a flat coordinate index as (player, action).
    pub fn locate(&self, index: usize) -> (usize, usize) {
        for (k, &off) in self.offsets.iter().enumerate() {
            if index < off + self.action_counts[k] {
                return (k, index - off);
            }
        }
        unreachable!("index out of layout range")
    }
}

/// A named dynamical system over flattened phase vectors: the common trait
/// behind every field variant, consumed by the integrator.
pub trait PhaseField: Send + Sync {
    fn field_name(&self) -> &'static str;
    fn chart(&self) -> Chart;
    fn second_order(&self) -> bool;
    fn layout(&self) -> &ProfileLayout;
    fn spec(&self) -> &DynamicsSpec;

    /// Flattened state dimension.
    fn dim(&self) -> usize {
        let n = self.layout().total();
        if self.second_order() {
            2 * n
        } else {
            n
        }
    }

    fn rhs(&self, t: f64, y: &[f64], dydt: &mut [f64]) -> Result<(), FieldError>;

    fn encode(&self, p: &PhasePoint) -> Result<Vec<f64>, FieldError>;

    /// Positions and velocities in simplex coordinates (flattened); for
    /// first-order fields the velocity slot carries the instantaneous field.
    fn decode(&self, y: &[f64]) -> (Vec<f64>, Vec<f64>);

    /// Escape-event threshold per position coordinate (the first
    /// `layout().total()` state entries): the trajectory escapes when any
    /// coordinate reaches its threshold from above. `None` marks coordinates
    /// without a reachable boundary (well-posed Euclidean charts).
    fn event_thresholds(&self, boundary_eps: f64) -> Vec<Option<f64>>;

    /// Max per-player deviation of the simplex-sum constraint (plus surface
    /// residual in the Euclidean chart).
    fn constraint_residual(&self, y: &[f64]) -> f64;

    /// Renormalize the simplex-sum constraint and re-tangent velocities.
    fn project(&self, y: &mut [f64]);

    fn energy_of(&self, y: &[f64]) -> EnergyReport;
}

/// Build the named field variant for a spec. `chart` selects the integration
/// coordinates for the inertial dynamics; replicator kinds are simplex-only.
pub fn build_phase_field(
    spec: Arc<DynamicsSpec>,
    chart: Chart,
) -> Result<Box<dyn PhaseField>, FieldError> {
    let layout = ProfileLayout::new(spec.action_counts());
    match (spec.field_kind(), chart) {
        (FieldKind::Inertial, Chart::Simplex) => {
            Ok(Box::new(SimplexInertial { spec, layout }))
        }
        (FieldKind::Inertial | FieldKind::InertialEuclidean, Chart::Euclidean)
        | (FieldKind::InertialEuclidean, Chart::Simplex) => {
            let charts = spec
                .kernels()
                .iter()
                .map(|k| EuclideanChart::new(k.clone(), true).map(Arc::new))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Box::new(EuclideanInertial {
                spec,
                layout,
                charts,
            }))
        }
        (FieldKind::Replicator, Chart::Simplex) => {
            let game = match spec.payoffs() {
                PayoffSource::Game(g) => g.clone(),
                PayoffSource::Objective(_) => {
                    return Err(FieldError::ChartUnsupported("rd needs a game payoff source"))
                }
            };
            Ok(Box::new(ReplicatorPhase { spec, layout, game }))
        }
        (FieldKind::SecondOrderReplicator, Chart::Simplex) => {
            let game = match spec.payoffs() {
                PayoffSource::Game(g) => g.clone(),
                PayoffSource::Objective(_) => {
                    return Err(FieldError::ChartUnsupported("rd2 needs a game payoff source"))
                }
            };
            Ok(Box::new(SecondOrderReplicatorPhase { spec, layout, game }))
        }
        (kind, Chart::Euclidean) => Err(FieldError::ChartUnsupported(kind.name())),
    }
}

fn simplex_constraint_residual(layout: &ProfileLayout, pos: &[f64]) -> f64 {
    (0..layout.players())
        .map(|k| (layout.block(pos, k).iter().sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max)
}

fn renormalize_positions(layout: &ProfileLayout, pos: &mut [f64]) {
    for k in 0..layout.players() {
        let off = layout.offsets[k];
        let m = layout.action_counts[k];
        let sum: f64 = pos[off..off + m].iter().sum();
        if sum > 0.0 {
            for v in &mut pos[off..off + m] {
                *v /= sum;
            }
        }
    }
}

fn retangent_velocities(layout: &ProfileLayout, vel: &mut [f64]) {
    for k in 0..layout.players() {
        let off = layout.offsets[k];
        let m = layout.action_counts[k];
        let mean: f64 = vel[off..off + m].iter().sum::<f64>() / m as f64;
        for v in &mut vel[off..off + m] {
            *v -= mean;
        }
    }
}

fn encode_second_order(layout: &ProfileLayout, p: &PhasePoint) -> Result<Vec<f64>, FieldError> {
    let velocity = p.velocity.as_ref().ok_or(FieldError::MissingVelocity)?;
    if velocity.len() != layout.players() {
        return Err(FieldError::DimensionMismatch {
            expected: layout.players(),
            got: velocity.len(),
        });
    }
    let mut y = Vec::with_capacity(2 * layout.total());
    y.extend(p.position.flatten());
    for v in velocity {
        y.extend_from_slice(v.components());
    }
    Ok(y)
}

struct SimplexInertial {
    spec: Arc<DynamicsSpec>,
    layout: ProfileLayout,
}

impl PhaseField for SimplexInertial {
    fn field_name(&self) -> &'static str {
        self.spec.field_kind().name()
    }
    fn chart(&self) -> Chart {
        Chart::Simplex
    }
    fn second_order(&self) -> bool {
        true
    }
    fn layout(&self) -> &ProfileLayout {
        &self.layout
    }
    fn spec(&self) -> &DynamicsSpec {
        &self.spec
    }

    fn rhs(&self, _t: f64, y: &[f64], dydt: &mut [f64]) -> Result<(), FieldError> {
        let n = self.layout.total();
        let (pos, vel) = y.split_at(n);
        check_min_coord(&self.layout.blocks(pos))?;
        let coords = self.layout.blocks(pos);
        let payoffs = self.spec.payoffs().payoff_vectors(&coords);
        dydt[..n].copy_from_slice(vel);
        for k in 0..self.layout.players() {
            let off = self.layout.offsets[k];
            let m = self.layout.action_counts[k];
            let block = inertial_block(
                self.spec.kernels()[k].as_ref(),
                &pos[off..off + m],
                &vel[off..off + m],
                &payoffs[k],
                self.spec.eta(),
            );
            dydt[n + off..n + off + m].copy_from_slice(&block);
        }
        Ok(())
    }

    fn encode(&self, p: &PhasePoint) -> Result<Vec<f64>, FieldError> {
        encode_second_order(&self.layout, p)
    }

    fn decode(&self, y: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.layout.total();
        (y[..n].to_vec(), y[n..].to_vec())
    }

    fn event_thresholds(&self, boundary_eps: f64) -> Vec<Option<f64>> {
        vec![Some(boundary_eps); self.layout.total()]
    }

    fn constraint_residual(&self, y: &[f64]) -> f64 {
        simplex_constraint_residual(&self.layout, &y[..self.layout.total()])
    }

    fn project(&self, y: &mut [f64]) {
        let n = self.layout.total();
        let (pos, vel) = y.split_at_mut(n);
        renormalize_positions(&self.layout, pos);
        retangent_velocities(&self.layout, vel);
    }

    fn energy_of(&self, y: &[f64]) -> EnergyReport {
        let n = self.layout.total();
        let (pos, vel) = y.split_at(n);
        let coords = self.layout.blocks(pos);
        let mut k2 = 0.0;
        for k in 0..self.layout.players() {
            let kern = self.spec.kernels()[k].as_ref();
            for (&c, &w) in coords[k].iter().zip(self.layout.block(vel, k)) {
                if w != 0.0 {
                    let scaled = kern.sqrt_d2(c.max(1e-300)) * w;
                    k2 += scaled * scaled;
                }
            }
        }
        EnergyReport {
            kinetic: 0.5 * k2,
            potential: self.spec.potential_at(&coords),
        }
    }
}

struct EuclideanInertial {
    spec: Arc<DynamicsSpec>,
    layout: ProfileLayout,
    charts: Vec<Arc<EuclideanChart>>,
}

impl EuclideanInertial {
    fn positions_from_chart(&self, xi: &[f64]) -> Vec<f64> {
        let mut pos = Vec::with_capacity(self.layout.total());
        for k in 0..self.layout.players() {
            for &v in self.layout.block(xi, k) {
                // Beyond-wall states clamp to the boundary for reporting.
                let x = self.charts[k].phi_prime_inv(v).unwrap_or(0.0);
                pos.push(x.max(0.0));
            }
        }
        pos
    }
}

impl PhaseField for EuclideanInertial {
    fn field_name(&self) -> &'static str {
        self.spec.field_kind().name()
    }
    fn chart(&self) -> Chart {
        Chart::Euclidean
    }
    fn second_order(&self) -> bool {
        true
    }
    fn layout(&self) -> &ProfileLayout {
        &self.layout
    }
    fn spec(&self) -> &DynamicsSpec {
        &self.spec
    }

    fn rhs(&self, _t: f64, y: &[f64], dydt: &mut [f64]) -> Result<(), FieldError> {
        let n = self.layout.total();
        let (xi, xidot) = y.split_at(n);
        let pos = self.positions_from_chart(xi);
        let coords = self.layout.blocks(&pos);
        let payoffs = self.spec.payoffs().payoff_vectors(&coords);
        dydt[..n].copy_from_slice(xidot);
        for k in 0..self.layout.players() {
            let off = self.layout.offsets[k];
            let m = self.layout.action_counts[k];
            let block = inertial_euclidean_block(
                self.spec.kernels()[k].as_ref(),
                &self.charts[k],
                &xi[off..off + m],
                &xidot[off..off + m],
                &payoffs[k],
                self.spec.eta(),
            )?;
            dydt[n + off..n + off + m].copy_from_slice(&block);
        }
        Ok(())
    }

    fn encode(&self, p: &PhasePoint) -> Result<Vec<f64>, FieldError> {
        let velocity = p.velocity.as_ref().ok_or(FieldError::MissingVelocity)?;
        let mut xi = Vec::with_capacity(self.layout.total());
        let mut xidot = Vec::with_capacity(self.layout.total());
        for (k, point) in p.position.points().iter().enumerate() {
            let (b_xi, b_xidot) = self.charts[k].to_euclidean(point, &velocity[k])?;
            xi.extend(b_xi);
            xidot.extend(b_xidot);
        }
        xi.extend(xidot);
        Ok(xi)
    }

    fn decode(&self, y: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.layout.total();
        let (xi, xidot) = y.split_at(n);
        let pos = self.positions_from_chart(xi);
        let mut vel = Vec::with_capacity(n);
        for k in 0..self.layout.players() {
            let kern = self.spec.kernels()[k].as_ref();
            for (&x, &vd) in self.layout.block(&pos, k).iter().zip(self.layout.block(xidot, k)) {
                vel.push(kern.inv_sqrt_d2(x.max(0.0)) * vd);
            }
        }
        (pos, vel)
    }

    fn event_thresholds(&self, _boundary_eps: f64) -> Vec<Option<f64>> {
        let mut out = Vec::with_capacity(self.layout.total());
        for k in 0..self.layout.players() {
            let wall = self.charts[k].wall();
            let th = (wall != f64::NEG_INFINITY).then_some(wall);
            out.extend(std::iter::repeat(th).take(self.layout.action_counts()[k]));
        }
        out
    }

    fn constraint_residual(&self, y: &[f64]) -> f64 {
        let pos = self.positions_from_chart(&y[..self.layout.total()]);
        simplex_constraint_residual(&self.layout, &pos)
    }

    fn project(&self, y: &mut [f64]) {
        let n = self.layout.total();
        let mut pos = self.positions_from_chart(&y[..n]);
        renormalize_positions(&self.layout, &mut pos);
        for k in 0..self.layout.players() {
            let off = self.layout.offsets[k];
            for (i, &x) in self.layout.block(&pos, k).iter().enumerate() {
                if x > 0.0 {
                    if let Ok(v) = self.charts[k].phi_prime(x) {
                        y[off + i] = v;
                    }
                }
            }
        }
    }

    fn energy_of(&self, y: &[f64]) -> EnergyReport {
        let n = self.layout.total();
        let (xi, xidot) = y.split_at(n);
        let kinetic = 0.5 * xidot.iter().map(|v| v * v).sum::<f64>();
        let pos = self.positions_from_chart(xi);
        let coords = self.layout.blocks(&pos);
        EnergyReport {
            kinetic,
            potential: self.spec.potential_at(&coords),
        }
    }
}

struct ReplicatorPhase {
    spec: Arc<DynamicsSpec>,
    layout: ProfileLayout,
    game: Arc<NormalFormGame>,
}

impl PhaseField for ReplicatorPhase {
    fn field_name(&self) -> &'static str {
        "rd"
    }
    fn chart(&self) -> Chart {
        Chart::Simplex
    }
    fn second_order(&self) -> bool {
        false
    }
    fn layout(&self) -> &ProfileLayout {
        &self.layout
    }
    fn spec(&self) -> &DynamicsSpec {
        &self.spec
    }

    fn rhs(&self, _t: f64, y: &[f64], dydt: &mut [f64]) -> Result<(), FieldError> {
        let coords = self.layout.blocks(y);
        for k in 0..self.layout.players() {
            let off = self.layout.offsets[k];
            let m = self.layout.action_counts[k];
            let block = replicator_block(
                coords[k],
                &games::payoff_vector_at(&self.game, &coords, k),
            );
            dydt[off..off + m].copy_from_slice(&block);
        }
        Ok(())
    }

    fn encode(&self, p: &PhasePoint) -> Result<Vec<f64>, FieldError> {
        Ok(p.position.flatten())
    }

    fn decode(&self, y: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut field = vec![0.0; y.len()];
        // The state is first-order; report the instantaneous field as velocity.
        let _ = self.rhs(0.0, y, &mut field);
        (y.to_vec(), field)
    }

    fn event_thresholds(&self, boundary_eps: f64) -> Vec<Option<f64>> {
        vec![Some(boundary_eps); self.layout.total()]
    }

    fn constraint_residual(&self, y: &[f64]) -> f64 {
        simplex_constraint_residual(&self.layout, y)
    }

    fn project(&self, y: &mut [f64]) {
        renormalize_positions(&self.layout, y);
    }

    fn energy_of(&self, y: &[f64]) -> EnergyReport {
        let coords = self.layout.blocks(y);
        EnergyReport {
            kinetic: 0.0,
            potential: self.spec.potential_at(&coords),
        }
    }
}

struct SecondOrderReplicatorPhase {
    spec: Arc<DynamicsSpec>,
    layout: ProfileLayout,
    game: Arc<NormalFormGame>,
}

impl PhaseField for SecondOrderReplicatorPhase {
    fn field_name(&self) -> &'static str {
        "rd2"
    }
    fn chart(&self) -> Chart {
        Chart::Simplex
    }
    fn second_order(&self) -> bool {
        true
    }
    fn layout(&self) -> &ProfileLayout {
        &self.layout
    }
    fn spec(&self) -> &DynamicsSpec {
        &self.spec
    }

    fn rhs(&self, _t: f64, y: &[f64], dydt: &mut [f64]) -> Result<(), FieldError> {
        let n = self.layout.total();
        let (pos, vel) = y.split_at(n);
        check_min_coord(&self.layout.blocks(pos))?;
        let coords = self.layout.blocks(pos);
        dydt[..n].copy_from_slice(vel);
        for k in 0..self.layout.players() {
            let off = self.layout.offsets[k];
            let m = self.layout.action_counts[k];
            let block = second_order_replicator_block(
                coords[k],
                &vel[off..off + m],
                &games::payoff_vector_at(&self.game, &coords, k),
            );
            dydt[n + off..n + off + m].copy_from_slice(&block);
        }
        Ok(())
    }

    fn encode(&self, p: &PhasePoint) -> Result<Vec<f64>, FieldError> {
        encode_second_order(&self.layout, p)
    }

    fn decode(&self, y: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.layout.total();
        (y[..n].to_vec(), y[n..].to_vec())
    }

    fn event_thresholds(&self, boundary_eps: f64) -> Vec<Option<f64>> {
        vec![Some(boundary_eps); self.layout.total()]
    }

    fn constraint_residual(&self, y: &[f64]) -> f64 {
        simplex_constraint_residual(&self.layout, &y[..self.layout.total()])
    }

    fn project(&self, y: &mut [f64]) {
        let n = self.layout.total();
        let (pos, vel) = y.split_at_mut(n);
        renormalize_positions(&self.layout, pos);
        retangent_velocities(&self.layout, vel);
    }

    fn energy_of(&self, y: &[f64]) -> EnergyReport {
        // (RD₂) carries no kernel metric; report the Shahshahani-free kinetic
        // surrogate ½Σẋ² only through the potential-less convention: K = 0.
        let coords = self.layout.blocks(&y[..self.layout.total()]);
        EnergyReport {
            kinetic: 0.0,
            potential: self.spec.potential_at(&coords),
        }
    }
}
