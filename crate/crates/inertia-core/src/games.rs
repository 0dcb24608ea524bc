//! Finite normal-form games, payoff fields, and equilibrium tests.

use serde_json::Value;
use thiserror::Error;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::geometry::{GeometryError, SimplexPoint};

/// Support membership cutoff for equilibrium tests on numerical profiles.
pub const SUPPORT_EPS: f64 = 1e-9;

/// Residual below which a potential certificate is accepted.
pub const POTENTIAL_TOL: f64 = 1e-9;

const PURE_PROFILE_LIMIT: usize = 1_000_000;

#[derive(Debug, Error)]
pub enum GameError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("game must have at least one player and two actions per player")]
    DegenerateShape,
    #[error("pure-profile space exceeds the {PURE_PROFILE_LIMIT} limit")]
    SizeLimit,
    #[error("invalid game definition: {0}")]
    BadDefinition(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// An N-player finite game: per-player action counts and dense payoff
/// tensors u_k(α₁, …, α_N) stored in row-major order (player-1 index
/// slowest).
#[derive(Debug, Clone)]
pub struct NormalFormGame {
    action_counts: Vec<usize>,
    strides: Vec<usize>,
    payoffs: Vec<Vec<f64>>,
}

impl NormalFormGame {
    pub fn new(action_counts: Vec<usize>, payoffs: Vec<Vec<f64>>) -> Result<Self, GameError> {
        if action_counts.is_empty() || action_counts.iter().any(|&m| m < 2) {
            return Err(GameError::DegenerateShape);
        }
        if payoffs.len() != action_counts.len() {
            return Err(GameError::ShapeMismatch(format!(
                "{} payoff tensors for {} players",
                payoffs.len(),
                action_counts.len()
            )));
        }
        let total: usize = action_counts.iter().product();
        for (k, tensor) in payoffs.iter().enumerate() {
            if tensor.len() != total {
                return Err(GameError::ShapeMismatch(format!(
                    "player {} tensor has {} entries, expected {}",
                    k + 1,
                    tensor.len(),
                    total
                )));
            }
        }
        let strides = strides_for(&action_counts);
        Ok(Self {
            action_counts,
            strides,
            payoffs,
        })
    }

    pub fn players(&self) -> usize {
        self.action_counts.len()
    }

    pub fn action_counts(&self) -> &[usize] {
        &self.action_counts
    }

    pub fn pure_profile_count(&self) -> usize {
        self.action_counts.iter().product()
    }

    fn flat_index(&self, profile: &[usize]) -> usize {
        profile
            .iter()
            .zip(&self.strides)
            .map(|(&a, &s)| a * s)
            .sum()
    }

    /// u_k at a pure profile.
    pub fn pure_payoff(&self, k: usize, profile: &[usize]) -> f64 {
        self.payoffs[k][self.flat_index(profile)]
    }

    fn decode_profile(&self, mut flat: usize) -> Vec<usize> {
        let mut profile = vec![0; self.players()];
        for (k, &s) in self.strides.iter().enumerate() {
            profile[k] = flat / s;
            flat %= s;
        }
        profile
    }

    pub fn pure_profiles(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        (0..self.pure_profile_count()).map(|i| self.decode_profile(i))
    }
}

fn strides_for(action_counts: &[usize]) -> Vec<usize> {
    let n = action_counts.len();
    let mut strides = vec![1usize; n];
    for k in (0..n.saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * action_counts[k + 1];
    }
    strides
}

/// One mixed strategy per player.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyProfile {
    points: Vec<SimplexPoint>,
}

impl StrategyProfile {
    pub fn new(points: Vec<SimplexPoint>) -> Self {
        Self { points }
    }

    pub fn uniform(action_counts: &[usize]) -> Self {
        Self {
            points: action_counts
                .iter()
                .map(|&m| SimplexPoint::uniform(m))
                .collect(),
        }
    }

    pub fn pure(action_counts: &[usize], profile: &[usize]) -> Self {
        Self {
            points: action_counts
                .iter()
                .zip(profile)
                .map(|(&m, &a)| SimplexPoint::vertex(m, a))
                .collect(),
        }
    }

    pub fn players(&self) -> usize {
        self.points.len()
    }

    pub fn player(&self, k: usize) -> &SimplexPoint {
        &self.points[k]
    }

    pub fn points(&self) -> &[SimplexPoint] {
        &self.points
    }

    pub fn is_interior(&self) -> bool {
        self.points.iter().all(|p| p.is_interior())
    }

    /// Concatenated coordinates, player-major.
    pub fn flatten(&self) -> Vec<f64> {
        self.points
            .iter()
            .flat_map(|p| p.coords().iter().copied())
            .collect()
    }

    pub fn from_flat(action_counts: &[usize], flat: &[f64]) -> Result<Self, GameError> {
        let total: usize = action_counts.iter().sum();
        if flat.len() != total {
            return Err(GameError::ShapeMismatch(format!(
                "flat profile has {} coordinates, expected {}",
                flat.len(),
                total
            )));
        }
        let mut points = Vec::with_capacity(action_counts.len());
        let mut offset = 0;
        for &m in action_counts {
            points.push(SimplexPoint::new(flat[offset..offset + m].to_vec())?);
            offset += m;
        }
        Ok(Self { points })
    }

    fn check_shape(&self, game: &NormalFormGame) -> Result<(), GameError> {
        if self.players() != game.players() {
            return Err(GameError::ShapeMismatch(format!(
                "profile has {} players, game has {}",
                self.players(),
                game.players()
            )));
        }
        for (k, (p, &m)) in self.points.iter().zip(game.action_counts()).enumerate() {
            if p.len() != m {
                return Err(GameError::ShapeMismatch(format!(
                    "player {} has {} coordinates, game expects {}",
                    k + 1,
                    p.len(),
                    m
                )));
            }
        }
        Ok(())
    }
}

/// Weighted sum of a pure-profile tensor against all opponents' mixtures with
/// player k's action pinned: the common kernel of Eq. 1.4 and of multilinear
/// potential gradients. Operates on raw per-player coordinate slices so the
/// multilinear extension stays evaluable off the exact simplex.
fn tensor_pinned_sum(game: &NormalFormGame, tensor: &[f64], coords: &[&[f64]], k: usize) -> Vec<f64> {
    let mut out = vec![0.0; game.action_counts[k]];
    for (flat, &value) in tensor.iter().enumerate() {
        let profile = game.decode_profile(flat);
        let mut weight = 1.0;
        for (l, &alpha) in profile.iter().enumerate() {
            if l != k {
                weight *= coords[l][alpha];
            }
        }
        if weight != 0.0 {
            out[profile[k]] += value * weight;
        }
    }
    out
}

fn tensor_multilinear_value(game: &NormalFormGame, tensor: &[f64], coords: &[&[f64]]) -> f64 {
    let mut total = 0.0;
    for (flat, &value) in tensor.iter().enumerate() {
        if value == 0.0 {
            continue;
        }
        let profile = game.decode_profile(flat);
        let mut weight = 1.0;
        for (l, &alpha) in profile.iter().enumerate() {
            weight *= coords[l][alpha];
        }
        total += value * weight;
    }
    total
}

fn coord_views(x: &StrategyProfile) -> Vec<&[f64]> {
    x.points().iter().map(|p| p.coords()).collect()
}

/// Payoff vector v_k(x): the expected payoff of each pure action of player k
/// against the opponents' mixed profile.
pub fn payoff_vector(
    game: &NormalFormGame,
    x: &StrategyProfile,
    k: usize,
) -> Result<Vec<f64>, GameError> {
    x.check_shape(game)?;
    Ok(tensor_pinned_sum(game, &game.payoffs[k], &coord_views(x), k))
}

/// Payoff vector over raw per-player coordinates (multilinear extension; no
/// simplex invariant is enforced). Used by the dynamics where integration
/// states carry small constraint drift.
pub fn payoff_vector_at(game: &NormalFormGame, coords: &[&[f64]], k: usize) -> Vec<f64> {
    tensor_pinned_sum(game, &game.payoffs[k], coords, k)
}

/// Expected payoff u_k(x) = ⟨v_k(x) | x_k⟩.
pub fn expected_payoff(
    game: &NormalFormGame,
    x: &StrategyProfile,
    k: usize,
) -> Result<f64, GameError> {
    let v = payoff_vector(game, x, k)?;
    Ok(v.iter()
        .zip(x.player(k).coords())
        .map(|(a, b)| a * b)
        .sum())
}

/// u_k(x) as the full multilinear sum over pure profiles — the alternative
/// algebraic route used to cross-check `expected_payoff`.
pub fn expected_payoff_multilinear(
    game: &NormalFormGame,
    x: &StrategyProfile,
    k: usize,
) -> Result<f64, GameError> {
    x.check_shape(game)?;
    Ok(tensor_multilinear_value(game, &game.payoffs[k], &coord_views(x)))
}

/// Potential-game certificate: candidate potential over pure profiles plus
/// the worst deviation-consistency residual.
#[derive(Debug, Clone)]
pub struct PotentialCertificate {
    pub is_potential: bool,
    pub max_residual: f64,
    pub potential_values: Option<Vec<f64>>,
}

/// Check whether the game admits an exact potential. A candidate Φ is built
/// by path integration over pure profiles (switching one player at a time
/// from a base profile), then every unilateral pure deviation is required to
/// change u_k and Φ by the same amount; the certificate carries the worst
/// mismatch over all closed deviation cycles.
pub fn verify_potential(game: &NormalFormGame) -> PotentialCertificate {
    let total = game.pure_profile_count();
    let mut phi = vec![0.0; total];

    for flat in 0..total {
        let profile = game.decode_profile(flat);
        // Canonical path from the all-zeros base: flip players in order.
        let mut value = 0.0;
        let mut current = vec![0usize; game.players()];
        for k in 0..game.players() {
            let before = game.pure_payoff(k, &current);
            current[k] = profile[k];
            let after = game.pure_payoff(k, &current);
            value += after - before;
        }
        phi[flat] = value;
    }

    let mut max_residual = 0.0f64;
    for flat in 0..total {
        let profile = game.decode_profile(flat);
        for k in 0..game.players() {
            let mut deviated = profile.clone();
            for alt in 0..game.action_counts[k] {
                if alt == profile[k] {
                    continue;
                }
                deviated[k] = alt;
                let du = game.pure_payoff(k, &deviated) - game.pure_payoff(k, &profile);
                let dphi =
                    phi[game.flat_index(&deviated)] - phi[flat];
                max_residual = max_residual.max((du - dphi).abs());
            }
            deviated[k] = profile[k];
        }
    }

    let is_potential = max_residual < POTENTIAL_TOL;
    PotentialCertificate {
        is_potential,
        max_residual,
        potential_values: is_potential.then_some(phi),
    }
}

/// Multilinear extension Φ(x) of a pure-profile potential tensor.
pub fn potential_value(game: &NormalFormGame, phi: &[f64], x: &StrategyProfile) -> f64 {
    tensor_multilinear_value(game, phi, &coord_views(x))
}

/// Φ(x) over raw per-player coordinates.
pub fn potential_value_at(game: &NormalFormGame, phi: &[f64], coords: &[&[f64]]) -> f64 {
    tensor_multilinear_value(game, phi, coords)
}

/// Partial derivatives ∂Φ/∂x_kα of the multilinear extension.
pub fn potential_gradient(
    game: &NormalFormGame,
    phi: &[f64],
    x: &StrategyProfile,
    k: usize,
) -> Vec<f64> {
    tensor_pinned_sum(game, phi, &coord_views(x), k)
}

fn support(point: &SimplexPoint, threshold: f64) -> Vec<usize> {
    point
        .coords()
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > threshold)
        .map(|(i, _)| i)
        .collect()
}

/// Outcome of an equilibrium test together with the worst violation found.
#[derive(Debug, Clone, Copy)]
pub struct EquilibriumCheck {
    pub holds: bool,
    /// Largest payoff improvement available (positive = profitable deviation).
    pub worst_violation: f64,
}

/// Nash test (Eq. 4.11): every supported action of every player must match
/// the best payoff available to that player, within `tol`.
pub fn is_nash(game: &NormalFormGame, x: &StrategyProfile, tol: f64) -> Result<EquilibriumCheck, GameError> {
    x.check_shape(game)?;
    let mut worst = f64::NEG_INFINITY;
    for k in 0..game.players() {
        let v = payoff_vector(game, x, k)?;
        let supp = support(x.player(k), SUPPORT_EPS);
        for &alpha in &supp {
            for beta in 0..v.len() {
                worst = worst.max(v[beta] - v[alpha]);
            }
        }
    }
    Ok(EquilibriumCheck {
        holds: worst <= tol,
        worst_violation: worst,
    })
}

/// Restricted-equilibrium test: supported actions of each player earn equal
/// payoffs within `tol` (no comparison against unsupported actions).
pub fn is_restricted_equilibrium(
    game: &NormalFormGame,
    x: &StrategyProfile,
    tol: f64,
) -> Result<EquilibriumCheck, GameError> {
    x.check_shape(game)?;
    let mut worst = 0.0f64;
    for k in 0..game.players() {
        let v = payoff_vector(game, x, k)?;
        let supp = support(x.player(k), SUPPORT_EPS);
        let lo = supp.iter().map(|&a| v[a]).fold(f64::INFINITY, f64::min);
        let hi = supp.iter().map(|&a| v[a]).fold(f64::NEG_INFINITY, f64::max);
        worst = worst.max(hi - lo);
    }
    Ok(EquilibriumCheck {
        holds: worst <= tol,
        worst_violation: worst,
    })
}

/// Strict-equilibrium test: `x` must be a pure profile whose played actions
/// beat every alternative by more than `margin`. Only vertices can qualify.
pub fn is_strict_equilibrium(
    game: &NormalFormGame,
    x: &StrategyProfile,
    margin: f64,
) -> Result<bool, GameError> {
    x.check_shape(game)?;
    let mut profile = Vec::with_capacity(game.players());
    for p in x.points() {
        let (argmax, &max) = p
            .coords()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        if max < 1.0 - SUPPORT_EPS {
            return Ok(false);
        }
        profile.push(argmax);
    }
    Ok(pure_profile_is_strict(game, &profile, margin))
}

fn pure_profile_is_strict(game: &NormalFormGame, profile: &[usize], margin: f64) -> bool {
    let mut deviated = profile.to_vec();
    for k in 0..game.players() {
        let base = game.pure_payoff(k, profile);
        for alt in 0..game.action_counts[k] {
            if alt == profile[k] {
                continue;
            }
            deviated[k] = alt;
            let dev = game.pure_payoff(k, &deviated);
            if !(base - dev > margin) {
                return false;
            }
        }
        deviated[k] = profile[k];
    }
    true
}

/// Exhaustive scan for pure strict equilibria (margin 0).
pub fn enumerate_pure_strict_equilibria(
    game: &NormalFormGame,
) -> Result<Vec<Vec<usize>>, GameError> {
    if game.pure_profile_count() > PURE_PROFILE_LIMIT {
        return Err(GameError::SizeLimit);
    }
    Ok(game
        .pure_profiles()
        .filter(|p| pure_profile_is_strict(game, p, 0.0))
        .collect())
}

// ---------------------------------------------------------------------------
// Symmetric single-population games
// ---------------------------------------------------------------------------

/// A symmetric 2-player game described by the row player's payoff matrix
/// U_{αβ}; the `symmetric` flag records whether U = Uᵀ (doubly symmetric).
#[derive(Debug, Clone)]
pub struct SymmetricGame {
    matrix: Vec<Vec<f64>>,
    symmetric: bool,
}

impl SymmetricGame {
    pub fn new(matrix: Vec<Vec<f64>>) -> Result<Self, GameError> {
        let m = matrix.len();
        if m < 2 || matrix.iter().any(|row| row.len() != m) {
            return Err(GameError::BadDefinition(
                "symmetric game needs a square matrix of size ≥ 2".into(),
            ));
        }
        let mut symmetric = true;
        for i in 0..m {
            for j in 0..m {
                if (matrix[i][j] - matrix[j][i]).abs() > 1e-12 {
                    symmetric = false;
                }
            }
        }
        Ok(Self { matrix, symmetric })
    }

    pub fn n_actions(&self) -> usize {
        self.matrix.len()
    }

    pub fn matrix(&self) -> &[Vec<f64>] {
        &self.matrix
    }

    /// U = Uᵀ exactly (within 1e−12).
    pub fn is_doubly_symmetric(&self) -> bool {
        self.symmetric
    }

    /// Payoff field v(x) = Ux of the single-population game.
    pub fn payoff_field(&self, x: &[f64]) -> Vec<f64> {
        self.matrix
            .iter()
            .map(|row| row.iter().zip(x).map(|(u, xv)| u * xv).sum())
            .collect()
    }

    /// u(x, y) = xᵀUy.
    pub fn payoff(&self, x: &[f64], y: &[f64]) -> f64 {
        x.iter()
            .zip(self.payoff_field(y))
            .map(|(a, b)| a * b)
            .sum()
    }

    /// Remove column offsets c_β (payoff-equivalent: they shift every v_α(x)
    /// by the same amount) to reach a symmetric matrix, when possible.
    pub fn column_symmetrized(&self) -> Option<Vec<Vec<f64>>> {
        if self.symmetric {
            return Some(self.matrix.clone());
        }
        let m = self.n_actions();
        let offsets: Vec<f64> = (0..m)
            .map(|b| self.matrix[0][b] - self.matrix[b][0])
            .collect();
        let mut out = self.matrix.clone();
        for row in &mut out {
            for (j, v) in row.iter_mut().enumerate() {
                *v -= offsets[j];
            }
        }
        for i in 0..m {
            for j in 0..m {
                if (out[i][j] - out[j][i]).abs() > 1e-9 {
                    return None;
                }
            }
        }
        Some(out)
    }

    /// The induced 2-player normal-form game (player 2 sees the transposed
    /// role).
    pub fn induced_two_player(&self) -> NormalFormGame {
        let m = self.n_actions();
        let mut u1 = Vec::with_capacity(m * m);
        let mut u2 = Vec::with_capacity(m * m);
        for a in 0..m {
            for b in 0..m {
                u1.push(self.matrix[a][b]);
                u2.push(self.matrix[b][a]);
            }
        }
        NormalFormGame::new(vec![m, m], vec![u1, u2]).expect("square matrix")
    }
}

/// Result of a sampling-based ESS probe. A positive answer is evidence over
/// the sampled neighborhood, not a proof.
#[derive(Debug, Clone, Copy)]
pub struct EssReport {
    pub is_ess: bool,
    /// Whether x* passed the symmetric-Nash precondition (Eq. 4.14a).
    pub nash_precondition: bool,
    /// Largest sampled value of ⟨v(x), x − x*⟩ (negative everywhere ⇒ ESS).
    pub worst_margin: f64,
    pub samples_used: usize,
}

/// Evolutionary stability probe: checks ⟨v(x), x − x*⟩ < 0 at quasi-random
/// simplex points within the given Euclidean radius of x*.
pub fn ess_check(
    game: &SymmetricGame,
    x_star: &SimplexPoint,
    radius: f64,
    samples: usize,
    seed: u64,
) -> Result<EssReport, GameError> {
    let m = game.n_actions();
    if x_star.len() != m {
        return Err(GameError::ShapeMismatch(format!(
            "candidate has {} coordinates, game has {m} actions",
            x_star.len()
        )));
    }

    // Eq. 4.14a: v(x*) maximal on the support of x*.
    let v_star = game.payoff_field(x_star.coords());
    let supp = support(x_star, SUPPORT_EPS);
    let supported_min = supp.iter().map(|&a| v_star[a]).fold(f64::INFINITY, f64::min);
    let best = v_star.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let nash_precondition = supported_min >= best - 1e-9;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    let mut used = 0;
    let mut attempts = 0;
    while used < samples && attempts < samples * 50 {
        attempts += 1;
        // Tangent direction scaled to land inside the ball.
        let raw: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mean = raw.iter().sum::<f64>() / m as f64;
        let dir: Vec<f64> = raw.iter().map(|v| v - mean).collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < 1e-12 {
            continue;
        }
        let r = radius * rng.gen::<f64>().powf(1.0 / (m as f64 - 1.0));
        let x: Vec<f64> = x_star
            .coords()
            .iter()
            .zip(&dir)
            .map(|(&c, d)| c + d * r / norm)
            .collect();
        if x.iter().any(|&c| c < 0.0) {
            continue;
        }
        let dist = x
            .iter()
            .zip(x_star.coords())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        if dist < 1e-12 {
            continue;
        }
        let v = game.payoff_field(&x);
        let margin: f64 = v
            .iter()
            .zip(x.iter().zip(x_star.coords()))
            .map(|(vi, (xi, si))| vi * (xi - si))
            .sum();
        worst = worst.max(margin);
        used += 1;
    }

    Ok(EssReport {
        is_ess: nash_precondition && used > 0 && worst < 0.0,
        nash_precondition,
        worst_margin: worst,
        samples_used: used,
    })
}

// ---------------------------------------------------------------------------
// Named games and the JSON definition format
// ---------------------------------------------------------------------------

/// A loaded game definition: general normal form, optionally with the
/// originating symmetric matrix.
#[derive(Debug, Clone)]
pub struct GameDefinition {
    pub game: NormalFormGame,
    pub symmetric: Option<SymmetricGame>,
    pub name: String,
}

fn two_player(u1: [[f64; 2]; 2], u2: [[f64; 2]; 2]) -> NormalFormGame {
    NormalFormGame::new(
        vec![2, 2],
        vec![
            u1.iter().flatten().copied().collect(),
            u2.iter().flatten().copied().collect(),
        ],
    )
    .unwrap()
}

/// Matching Pennies: zero-sum, unique mixed equilibrium at uniform.
pub fn matching_pennies() -> NormalFormGame {
    two_player([[1.0, -1.0], [-1.0, 1.0]], [[-1.0, 1.0], [1.0, -1.0]])
}

/// Prisoner's Dilemma with (T, R, P, S) = (40, 30, 10, 0); actions (C, D).
/// The payoff gap of 10 at (D, D) makes vertex attraction resolvable at the
/// time horizons the analysis suites use.
pub fn prisoners_dilemma() -> NormalFormGame {
    two_player([[30.0, 0.0], [40.0, 10.0]], [[30.0, 40.0], [0.0, 10.0]])
}

/// Doubly symmetric 2×2 partnership/coordination game with payoff 10 on the
/// diagonal; both vertices are strict equilibria and the game is potential.
pub fn coordination_2x2() -> NormalFormGame {
    two_player([[10.0, 0.0], [0.0, 10.0]], [[10.0, 0.0], [0.0, 10.0]])
}

/// Hawk–Dove with V = 2, C = 4: U = [[(V−C)/2, V], [0, V/2]]; mixed ESS at
/// (1/2, 1/2).
pub fn hawk_dove_matrix() -> SymmetricGame {
    SymmetricGame::new(vec![vec![-1.0, 2.0], vec![0.0, 1.0]]).unwrap()
}

pub fn hawk_dove() -> NormalFormGame {
    hawk_dove_matrix().induced_two_player()
}

/// Rock–Paper–Scissors (symmetric zero-sum).
pub fn rps() -> NormalFormGame {
    SymmetricGame::new(vec![
        vec![0.0, -1.0, 1.0],
        vec![1.0, 0.0, -1.0],
        vec![-1.0, 1.0, 0.0],
    ])
    .unwrap()
    .induced_two_player()
}

/// Single-agent two-action zero game: the baseline system of the
/// well-posedness dichotomy.
pub fn zero2() -> NormalFormGame {
    NormalFormGame::new(vec![2], vec![vec![0.0, 0.0]]).unwrap()
}

pub fn builtin_game(name: &str) -> Option<GameDefinition> {
    let (game, symmetric) = match name {
        "matching_pennies" => (matching_pennies(), None),
        "prisoners_dilemma" => (prisoners_dilemma(), None),
        "coordination_2x2" => (
            coordination_2x2(),
            Some(SymmetricGame::new(vec![vec![10.0, 0.0], vec![0.0, 10.0]]).unwrap()),
        ),
        "hawk_dove" => (hawk_dove(), Some(hawk_dove_matrix())),
        "rps" => (rps(), None),
        "zero2" => (zero2(), None),
        _ => return None,
    };
    Some(GameDefinition {
        game,
        symmetric,
        name: name.to_string(),
    })
}

pub fn builtin_game_names() -> &'static [&'static str] {
    &[
        "matching_pennies",
        "prisoners_dilemma",
        "coordination_2x2",
        "hawk_dove",
        "rps",
        "zero2",
    ]
}

/// Parse the JSON game-definition format:
/// `{"players": N, "actions": [n1, …], "payoffs": {"1": nested, …}}` or
/// `{"symmetric": true, "matrix": [[…], …]}`.
pub fn parse_game_json(text: &str) -> Result<GameDefinition, GameError> {
    let value: Value =
        serde_json::from_str(text).map_err(|e| GameError::BadDefinition(e.to_string()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| GameError::BadDefinition("top level must be an object".into()))?;

    if obj.get("symmetric").and_then(Value::as_bool) == Some(true) {
        let matrix_val = obj
            .get("matrix")
            .ok_or_else(|| GameError::BadDefinition("symmetric game needs 'matrix'".into()))?;
        let matrix = parse_matrix(matrix_val)?;
        let sym = SymmetricGame::new(matrix)?;
        return Ok(GameDefinition {
            game: sym.induced_two_player(),
            symmetric: Some(sym),
            name: "symmetric".into(),
        });
    }

    let players = obj
        .get("players")
        .and_then(Value::as_u64)
        .ok_or_else(|| GameError::BadDefinition("missing integer field 'players'".into()))?
        as usize;
    let actions: Vec<usize> = obj
        .get("actions")
        .and_then(Value::as_array)
        .ok_or_else(|| GameError::BadDefinition("missing array field 'actions'".into()))?
        .iter()
        .map(|v| {
            v.as_u64()
                .map(|n| n as usize)
                .ok_or_else(|| GameError::BadDefinition("actions must be integers".into()))
        })
        .collect::<Result<_, _>>()?;
    if actions.len() != players {
        return Err(GameError::BadDefinition(format!(
            "'actions' lists {} entries for {} players",
            actions.len(),
            players
        )));
    }
    let payoff_obj = obj
        .get("payoffs")
        .and_then(Value::as_object)
        .ok_or_else(|| GameError::BadDefinition("missing object field 'payoffs'".into()))?;

    let mut payoffs = Vec::with_capacity(players);
    for k in 1..=players {
        let tensor_val = payoff_obj.get(&k.to_string()).ok_or_else(|| {
            GameError::BadDefinition(format!("missing payoff tensor for player {k}"))
        })?;
        let mut flat = Vec::new();
        flatten_tensor(tensor_val, &actions, 0, &mut flat)?;
        payoffs.push(flat);
    }
    let game = NormalFormGame::new(actions, payoffs)?;
    Ok(GameDefinition {
        game,
        symmetric: None,
        name: "file".into(),
    })
}

fn parse_matrix(value: &Value) -> Result<Vec<Vec<f64>>, GameError> {
    let rows = value
        .as_array()
        .ok_or_else(|| GameError::BadDefinition("matrix must be an array of rows".into()))?;
    rows.iter()
        .map(|row| {
            row.as_array()
                .ok_or_else(|| GameError::BadDefinition("matrix row must be an array".into()))?
                .iter()
                .map(|v| {
                    v.as_f64()
                        .ok_or_else(|| GameError::BadDefinition("matrix entry must be a number".into()))
                })
                .collect()
        })
        .collect()
}

fn flatten_tensor(
    value: &Value,
    actions: &[usize],
    depth: usize,
    out: &mut Vec<f64>,
) -> Result<(), GameError> {
    if depth == actions.len() {
        let num = value.as_f64().ok_or_else(|| {
            GameError::BadDefinition(format!("expected a number at tensor depth {depth}"))
        })?;
        out.push(num);
        return Ok(());
    }
    let arr = value.as_array().ok_or_else(|| {
        GameError::BadDefinition(format!("expected an array at tensor depth {depth}"))
    })?;
    if arr.len() != actions[depth] {
        return Err(GameError::BadDefinition(format!(
            "tensor dimension {depth} has length {}, expected {}",
            arr.len(),
            actions[depth]
        )));
    }
    for v in arr {
        flatten_tensor(v, actions, depth + 1, out)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn profile(coords: &[&[f64]]) -> StrategyProfile {
        StrategyProfile::new(
            coords
                .iter()
                .map(|c| SimplexPoint::new(c.to_vec()).unwrap())
                .collect(),
        )
    }

    #[test]
    fn payoff_vector_matching_pennies_uniform() {
        let g = matching_pennies();
        let x = StrategyProfile::uniform(g.action_counts());
        let v = payoff_vector(&g, &x, 0).unwrap();
        assert_relative_eq!(v[0], 0.0);
        assert_relative_eq!(v[1], 0.0);
    }

    #[test]
    fn payoff_vector_row_averages() {
        let g = two_player([[2.0, 0.0], [3.0, 1.0]], [[0.0, 0.0], [0.0, 0.0]]);
        let x = StrategyProfile::uniform(g.action_counts());
        let v = payoff_vector(&g, &x, 0).unwrap();
        assert_relative_eq!(v[0], 1.0);
        assert_relative_eq!(v[1], 2.0);
    }

    #[test]
    fn payoff_vector_pure_opponent_selects_column() {
        let g = two_player([[2.0, 0.0], [3.0, 1.0]], [[0.0, 0.0], [0.0, 0.0]]);
        let x = profile(&[&[0.5, 0.5], &[0.0, 1.0]]);
        let v = payoff_vector(&g, &x, 0).unwrap();
        assert_eq!(v, vec![0.0, 1.0]);
    }

    #[test]
    fn payoff_vector_two_player_reduces_to_matrix_product() {
        let g = two_player([[2.0, -1.0], [3.0, 1.5]], [[1.0, 0.0], [0.5, -2.0]]);
        let x = profile(&[&[0.3, 0.7], &[0.6, 0.4]]);
        let v = payoff_vector(&g, &x, 0).unwrap();
        // U₁ x₂
        assert_relative_eq!(v[0], 2.0 * 0.6 + (-1.0) * 0.4, max_relative = 1e-14);
        assert_relative_eq!(v[1], 3.0 * 0.6 + 1.5 * 0.4, max_relative = 1e-14);
    }

    #[test]
    fn expected_payoff_examples() {
        let g = matching_pennies();
        let x = StrategyProfile::uniform(g.action_counts());
        assert_relative_eq!(expected_payoff(&g, &x, 0).unwrap(), 0.0);

        let g = two_player([[2.0, 0.0], [3.0, 1.0]], [[0.0, 0.0], [0.0, 0.0]]);
        let x = profile(&[&[1.0, 0.0], &[0.5, 0.5]]);
        assert_relative_eq!(expected_payoff(&g, &x, 0).unwrap(), 1.0);
    }

    #[test]
    fn expected_payoff_routes_agree_on_random_games() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(19);
        for _ in 0..20 {
            let actions = vec![
                rng.gen_range(2..=3usize),
                rng.gen_range(2..=3usize),
                rng.gen_range(2..=3usize),
            ];
            let total: usize = actions.iter().product();
            let payoffs: Vec<Vec<f64>> = (0..3)
                .map(|_| (0..total).map(|_| rng.gen_range(-2.0..2.0)).collect())
                .collect();
            let g = NormalFormGame::new(actions.clone(), payoffs).unwrap();
            let points = actions
                .iter()
                .map(|&m| {
                    let raw: Vec<f64> = (0..m).map(|_| rng.gen_range(0.1..1.0)).collect();
                    let s: f64 = raw.iter().sum();
                    SimplexPoint::new(raw.iter().map(|v| v / s).collect()).unwrap()
                })
                .collect();
            let x = StrategyProfile::new(points);
            for k in 0..3 {
                let a = expected_payoff(&g, &x, k).unwrap();
                let b = expected_payoff_multilinear(&g, &x, k).unwrap();
                assert_relative_eq!(a, b, max_relative = 1e-12, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn multilinearity_in_each_player() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        let g = prisoners_dilemma();
        for _ in 0..10 {
            let mk = |rng: &mut rand_chacha::ChaCha8Rng| {
                let a: f64 = rng.gen_range(0.05..0.95);
                SimplexPoint::new(vec![a, 1.0 - a]).unwrap()
            };
            let x2 = mk(&mut rng);
            let p = mk(&mut rng);
            let q = mk(&mut rng);
            let lambda: f64 = rng.gen_range(0.0..1.0);
            let mix = SimplexPoint::new(
                p.coords()
                    .iter()
                    .zip(q.coords())
                    .map(|(a, b)| lambda * a + (1.0 - lambda) * b)
                    .collect(),
            )
            .unwrap();
            for k in 0..2 {
                let up = expected_payoff(&g, &StrategyProfile::new(vec![p.clone(), x2.clone()]), k)
                    .unwrap();
                let uq = expected_payoff(&g, &StrategyProfile::new(vec![q.clone(), x2.clone()]), k)
                    .unwrap();
                let umix =
                    expected_payoff(&g, &StrategyProfile::new(vec![mix.clone(), x2.clone()]), k)
                        .unwrap();
                assert_relative_eq!(
                    umix,
                    lambda * up + (1.0 - lambda) * uq,
                    max_relative = 1e-10,
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn coordination_is_potential_matching_pennies_is_not() {
        let cert = verify_potential(&coordination_2x2());
        assert!(cert.is_potential);
        assert!(cert.max_residual < 1e-12);
        assert!(cert.potential_values.is_some());

        let cert = verify_potential(&matching_pennies());
        assert!(!cert.is_potential);
        assert!(cert.max_residual > 0.5);
    }

    #[test]
    fn single_player_game_always_potential() {
        let g = NormalFormGame::new(vec![3], vec![vec![1.0, -2.0, 0.5]]).unwrap();
        let cert = verify_potential(&g);
        assert!(cert.is_potential);
        let phi = cert.potential_values.unwrap();
        // Φ equals u₁ up to the base-profile offset.
        assert_relative_eq!(phi[1] - phi[0], -3.0);
        assert_relative_eq!(phi[2] - phi[0], -0.5);
    }

    #[test]
    fn potential_gradient_matches_payoffs_and_finite_differences() {
        let g = coordination_2x2();
        let cert = verify_potential(&g);
        let phi = cert.potential_values.unwrap();
        let x = profile(&[&[0.3, 0.7], &[0.55, 0.45]]);
        for k in 0..2 {
            let grad = potential_gradient(&g, &phi, &x, k);
            let v = payoff_vector(&g, &x, k).unwrap();
            // Eq. 1.6 on the simplex: v_kα and ∂Φ/∂x_kα agree up to a
            // per-player constant (the potential's gauge freedom), so their
            // tangential differences must match exactly.
            let offset = v[0] - grad[0];
            for (a, b) in grad.iter().zip(&v) {
                assert_relative_eq!(a + offset, *b, max_relative = 1e-12, epsilon = 1e-12);
            }
            // finite differences of the multilinear extension, evaluated on
            // raw (off-simplex) coordinates since Φ extends to all of them
            let fd_tensor = |flat: &[f64]| {
                let mut total = 0.0;
                for (idx, &val) in phi.iter().enumerate() {
                    total += val * flat[idx / 2] * flat[2 + idx % 2];
                }
                total
            };
            let h = 1e-6;
            for alpha in 0..2 {
                let mut up = x.flatten();
                let mut dn = x.flatten();
                let off = k * 2 + alpha;
                up[off] += h;
                dn[off] -= h;
                let fd = (fd_tensor(&up) - fd_tensor(&dn)) / (2.0 * h);
                assert_relative_eq!(fd, grad[alpha], max_relative = 1e-6, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn nash_examples() {
        let mp = matching_pennies();
        let uniform = StrategyProfile::uniform(mp.action_counts());
        assert!(is_nash(&mp, &uniform, 1e-9).unwrap().holds);

        let pd = prisoners_dilemma();
        let dd = StrategyProfile::pure(pd.action_counts(), &[1, 1]);
        assert!(is_nash(&pd, &dd, 1e-9).unwrap().holds);
        let cc = StrategyProfile::pure(pd.action_counts(), &[0, 0]);
        let check = is_nash(&pd, &cc, 1e-9).unwrap();
        assert!(!check.holds);
        assert_relative_eq!(check.worst_violation, 10.0); // T − R
    }

    #[test]
    fn restricted_equilibrium_examples() {
        let pd = prisoners_dilemma();
        // every pure profile is restricted (singleton support)
        for p in pd.pure_profiles() {
            let x = StrategyProfile::pure(pd.action_counts(), &p);
            assert!(is_restricted_equilibrium(&pd, &x, 1e-9).unwrap().holds);
        }
        let mp = matching_pennies();
        let uniform = StrategyProfile::uniform(mp.action_counts());
        assert!(is_restricted_equilibrium(&mp, &uniform, 1e-9).unwrap().holds);

        // v₁ = (1, 0) at a full-support profile → not restricted
        let g = two_player([[1.0, 1.0], [0.0, 0.0]], [[0.0, 0.0], [0.0, 0.0]]);
        let x = StrategyProfile::uniform(g.action_counts());
        assert!(!is_restricted_equilibrium(&g, &x, 1e-9).unwrap().holds);
    }

    #[test]
    fn strict_equilibrium_examples() {
        let pd = prisoners_dilemma();
        let dd = StrategyProfile::pure(pd.action_counts(), &[1, 1]);
        assert!(is_strict_equilibrium(&pd, &dd, 0.0).unwrap());

        let coord = coordination_2x2();
        let aa = StrategyProfile::pure(coord.action_counts(), &[0, 0]);
        assert!(is_strict_equilibrium(&coord, &aa, 0.0).unwrap());

        let interior = StrategyProfile::uniform(coord.action_counts());
        assert!(!is_strict_equilibrium(&coord, &interior, 0.0).unwrap());
    }

    #[test]
    fn enumerate_strict_equilibria_examples() {
        assert_eq!(
            enumerate_pure_strict_equilibria(&prisoners_dilemma()).unwrap(),
            vec![vec![1, 1]]
        );
        assert_eq!(
            enumerate_pure_strict_equilibria(&coordination_2x2()).unwrap(),
            vec![vec![0, 0], vec![1, 1]]
        );
        assert!(enumerate_pure_strict_equilibria(&matching_pennies())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn enumeration_size_limit() {
        // 101³ ≈ 1.03e6 pure profiles exceeds the scan limit.
        let total = 101 * 101 * 101;
        let g = NormalFormGame::new(
            vec![101, 101, 101],
            vec![vec![0.0; total], vec![0.0; total], vec![0.0; total]],
        )
        .unwrap();
        assert!(matches!(
            enumerate_pure_strict_equilibria(&g),
            Err(GameError::SizeLimit)
        ));
    }

    #[test]
    fn strict_implies_nash_and_restricted() {
        for def in ["prisoners_dilemma", "coordination_2x2", "hawk_dove"] {
            let g = builtin_game(def).unwrap().game;
            for eq in enumerate_pure_strict_equilibria(&g).unwrap() {
                let x = StrategyProfile::pure(g.action_counts(), &eq);
                assert!(is_nash(&g, &x, 1e-12).unwrap().holds);
                assert!(is_restricted_equilibrium(&g, &x, 1e-12).unwrap().holds);
            }
        }
    }

    #[test]
    fn ess_hawk_dove_mixed() {
        let hd = hawk_dove_matrix();
        let x_star = SimplexPoint::new(vec![0.5, 0.5]).unwrap();
        let report = ess_check(&hd, &x_star, 0.05, 10_000, 42).unwrap();
        assert!(report.nash_precondition);
        assert!(report.is_ess, "worst margin {}", report.worst_margin);
        assert!(report.worst_margin < 0.0);
    }

    #[test]
    fn ess_pure_strict_symmetric() {
        // Pure strict symmetric equilibrium of the partnership game.
        let coord = SymmetricGame::new(vec![vec![10.0, 0.0], vec![0.0, 10.0]]).unwrap();
        let vertex = SimplexPoint::new(vec![1.0, 0.0]).unwrap();
        let report = ess_check(&coord, &vertex, 0.05, 10_000, 7).unwrap();
        assert!(report.is_ess);
    }

    #[test]
    fn ess_rejects_coordination_mixed() {
        let coord = SymmetricGame::new(vec![vec![10.0, 0.0], vec![0.0, 10.0]]).unwrap();
        let mixed = SimplexPoint::new(vec![0.5, 0.5]).unwrap();
        let report = ess_check(&coord, &mixed, 0.05, 10_000, 7).unwrap();
        assert!(!report.is_ess);
        assert!(report.worst_margin > 0.0);
    }

    #[test]
    fn symmetric_reduction_matches_induced_game() {
        let hd = hawk_dove_matrix();
        let g = hd.induced_two_player();
        let x = SimplexPoint::new(vec![0.35, 0.65]).unwrap();
        let prof = StrategyProfile::new(vec![x.clone(), x.clone()]);
        let v_direct = hd.payoff_field(x.coords());
        let v_game = payoff_vector(&g, &prof, 0).unwrap();
        for (a, b) in v_direct.iter().zip(&v_game) {
            assert_relative_eq!(a, b, max_relative = 1e-14);
        }
    }

    #[test]
    fn hawk_dove_column_symmetrizes() {
        let hd = hawk_dove_matrix();
        assert!(!hd.is_doubly_symmetric());
        let sym = hd.column_symmetrized().unwrap();
        assert_relative_eq!(sym[0][0], -1.0);
        assert_relative_eq!(sym[0][1], 0.0);
        assert_relative_eq!(sym[1][0], 0.0);
        assert_relative_eq!(sym[1][1], -1.0);
    }

    #[test]
    fn json_round_trip_normal_form() {
        let text = r#"{
            "players": 2,
            "actions": [2, 2],
            "payoffs": {"1": [[1, -1], [-1, 1]], "2": [[-1, 1], [1, -1]]}
        }"#;
        let def = parse_game_json(text).unwrap();
        let mp = matching_pennies();
        for p in mp.pure_profiles() {
            for k in 0..2 {
                assert_eq!(def.game.pure_payoff(k, &p), mp.pure_payoff(k, &p));
            }
        }
    }

    #[test]
    fn json_symmetric_definition() {
        let text = r#"{"symmetric": true, "matrix": [[0, 2], [1, 0]]}"#;
        let def = parse_game_json(text).unwrap();
        assert!(def.symmetric.is_some());
        assert_eq!(def.game.players(), 2);
        assert_eq!(def.game.pure_payoff(0, &[0, 1]), 2.0);
        assert_eq!(def.game.pure_payoff(1, &[0, 1]), 1.0);
    }

    #[test]
    fn json_rejects_malformed() {
        assert!(parse_game_json("not json").is_err());
        assert!(parse_game_json(r#"{"players": 2}"#).is_err());
        assert!(parse_game_json(r#"{"players": 2, "actions": [2], "payoffs": {}}"#).is_err());
        assert!(parse_game_json(
            r#"{"players": 1, "actions": [2], "payoffs": {"1": [1, 2, 3]}}"#
        )
        .is_err());
    }
}
