//! Points, tangents, and Riemannian quantities on the open simplex.
//!
//! Index conventions follow the reduced chart that eliminates coordinate 0:
//! full objects carry n+1 components indexed 0..n, reduced matrices are n×n
//! over indices 1..n.

use std::sync::Arc;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::kernel::{self, Kernel, KernelError, Wellposedness};

/// Positions with any coordinate at or below this are treated as boundary
/// for geometry evaluation; callers needing looser thresholds pass their own.
pub const INTERIOR_EPS: f64 = 1e-14;

/// Construction tolerance for the simplex-sum and tangency invariants.
pub const SUM_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("coordinates sum to {sum} (must be 1 within {SUM_TOL:e})")]
    NotOnSimplex { sum: f64 },
    #[error("negative coordinate {value} at index {index}")]
    NegativeCoordinate { index: usize, value: f64 },
    #[error("point touches the boundary (min coordinate {min:e} ≤ {INTERIOR_EPS:e})")]
    Boundary { min: f64 },
    #[error("tangent components sum to {sum} (must be 0 within {SUM_TOL:e})")]
    NotTangent { sum: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("nonpositive entry {value} at index {index}")]
    NonpositiveEntry { index: usize, value: f64 },
    #[error("point is off the chart surface: residual {residual:e} exceeds {tolerance:e}")]
    OffSurface { residual: f64, tolerance: f64 },
    #[error("kernel '{0}' has no closed-form Euclidean primitive and quadrature is disabled")]
    MissingPrimitive(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// A point of the closed simplex: n+1 nonnegative coordinates summing to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexPoint {
    coords: Vec<f64>,
}

impl SimplexPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self, GeometryError> {
        if coords.len() < 2 {
            return Err(GeometryError::DimensionMismatch {
                expected: 2,
                got: coords.len(),
            });
        }
        for (i, &c) in coords.iter().enumerate() {
            if !(c >= 0.0) {
                return Err(GeometryError::NegativeCoordinate { index: i, value: c });
            }
        }
        let sum: f64 = coords.iter().sum();
        if (sum - 1.0).abs() > SUM_TOL {
            return Err(GeometryError::NotOnSimplex { sum });
        }
        Ok(Self { coords })
    }

    /// Barycenter of the simplex over `m` actions.
    pub fn uniform(m: usize) -> Self {
        Self {
            coords: vec![1.0 / m as f64; m],
        }
    }

    /// Pure strategy on action `index`.
    pub fn vertex(m: usize, index: usize) -> Self {
        let mut coords = vec![0.0; m];
        coords[index] = 1.0;
        Self { coords }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Number of actions (n+1).
    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn min_coord(&self) -> f64 {
        self.coords.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Strictly positive everywhere.
    pub fn is_interior(&self) -> bool {
        self.min_coord() > 0.0
    }

    /// Interior with the margin required for geometry evaluation.
    pub(crate) fn check_geometry_interior(&self) -> Result<(), GeometryError> {
        let min = self.min_coord();
        if min > INTERIOR_EPS {
            Ok(())
        } else {
            Err(GeometryError::Boundary { min })
        }
    }
}

/// A vector tangent to the affine hull of the simplex: components sum to 0.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    components: Vec<f64>,
}

impl TangentVector {
    pub fn new(components: Vec<f64>) -> Result<Self, GeometryError> {
        let sum: f64 = components.iter().sum();
        let scale: f64 = components.iter().map(|c| c.abs()).sum::<f64>().max(1.0);
        if sum.abs() > SUM_TOL * scale {
            return Err(GeometryError::NotTangent { sum });
        }
        Ok(Self { components })
    }

    pub fn zero(m: usize) -> Self {
        Self {
            components: vec![0.0; m],
        }
    }

    /// Project arbitrary components onto the tangent space by removing the mean.
    pub fn project(components: Vec<f64>) -> Self {
        let mean = components.iter().sum::<f64>() / components.len() as f64;
        Self {
            components: components.iter().map(|c| c - mean).collect(),
        }
    }

    pub fn components(&self) -> &[f64] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }
}

fn check_dims(a: usize, b: usize) -> Result<(), GeometryError> {
    if a == b {
        Ok(())
    } else {
        Err(GeometryError::DimensionMismatch {
            expected: a,
            got: b,
        })
    }
}

/// Diagonal metric weights θ″(x_α), α = 0..n.
pub fn metric_weights(kernel: &dyn Kernel, x: &SimplexPoint) -> Result<Vec<f64>, GeometryError> {
    x.check_geometry_interior()?;
    Ok(x.coords().iter().map(|&c| kernel.d2(c)).collect())
}

/// The harmonic aggregate Θ″ = (Σ_β 1/θ″_β)⁻¹.
pub fn harmonic_weight(kernel: &dyn Kernel, x: &SimplexPoint) -> Result<f64, GeometryError> {
    x.check_geometry_interior()?;
    let s: f64 = x.coords().iter().map(|&c| kernel.inv_d2(c)).sum();
    Ok(1.0 / s)
}

/// Closed-form inverse of A_{μν} = q_μ δ_{μν} + q₀ for q = (q₀, …, q_n):
/// A^{μν} = δ_{μν}/q_μ − Q/(q_μ q_ν) with Q⁻¹ = Σ_{α=0}^n 1/q_α.
/// Input carries n+1 entries; the output matrix is n×n over indices 1..n.
pub fn invert_rank_one_plus_diag(q: &[f64]) -> Result<DMatrix<f64>, GeometryError> {
    if q.len() < 2 {
        return Err(GeometryError::DimensionMismatch {
            expected: 2,
            got: q.len(),
        });
    }
    for (i, &v) in q.iter().enumerate() {
        if !(v > 0.0) {
            return Err(GeometryError::NonpositiveEntry { index: i, value: v });
        }
    }
    let big_q = 1.0 / q.iter().map(|&v| 1.0 / v).sum::<f64>();
    let n = q.len() - 1;
    Ok(DMatrix::from_fn(n, n, |i, j| {
        let (qi, qj) = (q[i + 1], q[j + 1]);
        let diag = if i == j { 1.0 / qi } else { 0.0 };
        diag - big_q / (qi * qj)
    }))
}

/// Reduced metric g̃_{μν} = θ″_μ δ_{μν} + θ″₀ and its inverse (Lemma-B.1 form).
pub fn reduced_metric(
    kernel: &dyn Kernel,
    x: &SimplexPoint,
) -> Result<(DMatrix<f64>, DMatrix<f64>), GeometryError> {
    let weights = metric_weights(kernel, x)?;
    let n = weights.len() - 1;
    let forward = DMatrix::from_fn(n, n, |i, j| {
        let diag = if i == j { weights[i + 1] } else { 0.0 };
        diag + weights[0]
    });
    let inverse = invert_rank_one_plus_diag(&weights)?;
    Ok((forward, inverse))
}

/// Christoffel symbols Γ̃^κ_{μν} of the reduced metric, returned as one n×n
/// matrix (μ,ν) per upper index κ = 1..n:
///
///   Γ̃^κ_{μν} = ½ [ δ_{κμν} θ‴_κ/θ″_κ − (Θ″ θ‴_μ)/(θ″_κ θ″_μ) δ_{μν}
///                 − (θ‴₀ Θ″)/(θ″₀ θ″_κ) ]
pub fn christoffel(
    kernel: &dyn Kernel,
    x: &SimplexPoint,
) -> Result<Vec<DMatrix<f64>>, GeometryError> {
    x.check_geometry_interior()?;
    let c = x.coords();
    let n = c.len() - 1;
    let theta_h = harmonic_weight(kernel, x)?;
    let ratio: Vec<f64> = c.iter().map(|&v| kernel.d3_over_d2(v)).collect();
    let inv_d2: Vec<f64> = c.iter().map(|&v| kernel.inv_d2(v)).collect();

    let mut out = Vec::with_capacity(n);
    for kappa in 1..=n {
        let gamma = DMatrix::from_fn(n, n, |i, j| {
            let (mu, nu) = (i + 1, j + 1);
            let mut term = 0.0;
            if kappa == mu && mu == nu {
                term += ratio[kappa];
            }
            if mu == nu {
                term -= theta_h * ratio[mu] * inv_d2[kappa];
            }
            term -= ratio[0] * theta_h * inv_d2[kappa];
            0.5 * term
        });
        out.push(gamma);
    }
    Ok(out)
}

/// Riemannian scalar product ⟨w, z⟩ = Σ_α θ″(x_α) w_α z_α.
pub fn riemannian_inner(
    kernel: &dyn Kernel,
    x: &SimplexPoint,
    w: &TangentVector,
    z: &TangentVector,
) -> Result<f64, GeometryError> {
    x.check_geometry_interior()?;
    check_dims(x.len(), w.len())?;
    check_dims(x.len(), z.len())?;
    Ok(x.coords()
        .iter()
        .zip(w.components().iter().zip(z.components()))
        .map(|(&c, (&wi, &zi))| kernel.d2(c) * wi * zi)
        .sum())
}

/// Riemannian norm ‖w‖ at x.
pub fn riemannian_norm(
    kernel: &dyn Kernel,
    x: &SimplexPoint,
    w: &TangentVector,
) -> Result<f64, GeometryError> {
    riemannian_inner(kernel, x, w, w).map(f64::sqrt)
}

/// The isometric chart ξ_α = φ′(x_α) with φ″ = √θ″, mapping the open simplex
/// onto a hypersurface of the ambient space. Uses the kernel's closed form
/// when present, otherwise (if enabled) Gauss–Kronrod quadrature of √θ″ with
/// base point φ′(1) = 0 and a bisection/Newton inverse.
pub struct EuclideanChart {
    kernel: Arc<dyn Kernel>,
    wall: f64,
}

/// Surface-membership tolerance for [`EuclideanChart::from_euclidean`].
pub const SURFACE_TOL: f64 = 1e-8;

impl EuclideanChart {
    pub fn new(kernel: Arc<dyn Kernel>, allow_quadrature: bool) -> Result<Self, GeometryError> {
        let closed_form = kernel.phi_prime(0.5).is_some();
        if !closed_form && !allow_quadrature {
            return Err(GeometryError::MissingPrimitive(kernel.name().to_string()));
        }
        let wall = match kernel.phi_prime_at_zero() {
            Some(w) => w,
            None => {
                // The chart image is bounded below exactly when ∫₀¹ √θ″ converges.
                let report = kernel::classify_wellposedness(kernel.as_ref())?;
                match report.classification {
                    Wellposedness::WellPosed => f64::NEG_INFINITY,
                    Wellposedness::IllPosed => {
                        let tail = report
                            .partial_integrals
                            .last()
                            .map(|p| p.value)
                            .unwrap_or(0.0);
                        // φ′(ε) = φ′(1) − ∫_ε^1 √θ″ → −(full integral) as ε → 0
                        -tail
                    }
                }
            }
        };
        Ok(Self { kernel, wall })
    }

    pub fn kernel(&self) -> &Arc<dyn Kernel> {
        &self.kernel
    }

    /// Infimum of φ′ over (0, ∞): finite for ill-posed kernels, −∞ otherwise.
    pub fn wall(&self) -> f64 {
        self.wall
    }

    pub fn phi_prime(&self, x: f64) -> Result<f64, GeometryError> {
        if !(x > 0.0) {
            return Err(GeometryError::Kernel(KernelError::Domain(x)));
        }
        match self.kernel.phi_prime(x) {
            Some(v) => Ok(v),
            None => Ok(kernel::phi_prime_numeric(self.kernel.as_ref(), x)?),
        }
    }

    /// Monotone inverse of φ′. Closed form when the kernel has one, else
    /// bisection refined by Newton (φ″ = √θ″ > 0 guarantees monotonicity),
    /// bracketed on (1e−300, 4).
    pub fn phi_prime_inv(&self, xi: f64) -> Result<f64, GeometryError> {
        if let Some(v) = self.kernel.phi_prime_inv(xi) {
            return Ok(v);
        }
        if xi <= self.wall {
            return Ok(0.0);
        }
        let f = |x: f64| -> Result<f64, GeometryError> { Ok(self.phi_prime(x)? - xi) };
        let (mut lo, mut hi) = (1e-3f64, 4.0f64);
        if f(hi)? < 0.0 {
            return Err(GeometryError::OffSurface {
                residual: f64::INFINITY,
                tolerance: SURFACE_TOL,
            });
        }
        // Descend the lower bracket only as deep as the target requires.
        while lo > 1e-300 && f(lo)? > 0.0 {
            lo /= 1e3;
        }
        let mut x = 0.5 * (lo + hi);
        for _ in 0..200 {
            let val = f(x)?;
            if val > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let newton = x - val / self.kernel.sqrt_d2(x);
            x = if newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if (hi - lo) < 1e-15 * x.abs().max(1e-30) {
                break;
            }
        }
        Ok(x)
    }

    /// Map a phase pair to chart coordinates: ξ_α = φ′(x_α), ξ̇_α = √θ″_α ẋ_α.
    pub fn to_euclidean(
        &self,
        x: &SimplexPoint,
        xdot: &TangentVector,
    ) -> Result<(Vec<f64>, Vec<f64>), GeometryError> {
        x.check_geometry_interior()?;
        check_dims(x.len(), xdot.len())?;
        let mut xi = Vec::with_capacity(x.len());
        let mut xidot = Vec::with_capacity(x.len());
        for (&c, &v) in x.coords().iter().zip(xdot.components()) {
            xi.push(self.phi_prime(c)?);
            xidot.push(self.kernel.sqrt_d2(c) * v);
        }
        Ok((xi, xidot))
    }

    /// Residual of the surface constraint Σ (φ′)⁻¹(ξ_α) = 1.
    pub fn surface_residual(&self, xi: &[f64]) -> Result<f64, GeometryError> {
        let mut sum = 0.0;
        for &v in xi {
            sum += self.phi_prime_inv(v)?;
        }
        Ok((sum - 1.0).abs())
    }

    /// Inverse chart: x_α = (φ′)⁻¹(ξ_α), ẋ_α = ξ̇_α/√θ″_α. Errors when the
    /// surface residual exceeds [`SURFACE_TOL`]. The velocity is projected
    /// back onto the tangent space (its sum inherits the surface residual).
    pub fn from_euclidean(
        &self,
        xi: &[f64],
        xidot: &[f64],
    ) -> Result<(SimplexPoint, TangentVector), GeometryError> {
        check_dims(xi.len(), xidot.len())?;
        let mut coords = Vec::with_capacity(xi.len());
        for &v in xi {
            coords.push(self.phi_prime_inv(v)?);
        }
        let sum: f64 = coords.iter().sum();
        let residual = (sum - 1.0).abs();
        if residual > SURFACE_TOL {
            return Err(GeometryError::OffSurface {
                residual,
                tolerance: SURFACE_TOL,
            });
        }
        for c in &mut coords {
            *c /= sum;
        }
        let velocity: Vec<f64> = coords
            .iter()
            .zip(xidot)
            .map(|(&c, &vd)| self.kernel.inv_sqrt_d2(c.max(0.0)) * vd)
            .collect();
        Ok((SimplexPoint::new(coords)?, TangentVector::project(velocity)))
    }
}

/// Convenience wrapper for the chart transform operations.
pub fn to_euclidean(
    kernel: Arc<dyn Kernel>,
    x: &SimplexPoint,
    xdot: &TangentVector,
    allow_quadrature: bool,
) -> Result<(Vec<f64>, Vec<f64>), GeometryError> {
    EuclideanChart::new(kernel, allow_quadrature)?.to_euclidean(x, xdot)
}

pub fn from_euclidean(
    kernel: Arc<dyn Kernel>,
    xi: &[f64],
    xidot: &[f64],
    allow_quadrature: bool,
) -> Result<(SimplexPoint, TangentVector), GeometryError> {
    EuclideanChart::new(kernel, allow_quadrature)?.from_euclidean(xi, xidot)
}
