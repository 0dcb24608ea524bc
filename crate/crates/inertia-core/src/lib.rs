//! Inertial game dynamics on products of simplices under Hessian-Riemannian
//! geometries: kernels and derived geometry, finite games and equilibrium
//! tests, the (ID)/(IRD)/(ILD) and replicator vector fields, an adaptive
//! integrator with boundary-escape detection, and executable checks of the
//! dynamics' energy, stationarity, and convergence behavior.

pub mod analysis;
pub mod dynamics;
pub mod games;
pub mod geometry;
pub mod integrator;
pub mod kernel;

pub use dynamics::{Chart, DynamicsSpec, FieldKind, PayoffSource, PhasePoint};
pub use games::{NormalFormGame, StrategyProfile, SymmetricGame};
pub use geometry::{SimplexPoint, TangentVector};
pub use integrator::{IntegratorConfig, Scheme, Termination, TrajectoryRecord};
pub use kernel::{Kernel, Wellposedness};
