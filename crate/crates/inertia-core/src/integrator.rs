//! Numerical integration of the game dynamics: adaptive Dormand–Prince 5(4)
//! with PI step control (and a fixed-step RK4 alternative), cubic-Hermite
//! dense output, simplex-constraint monitoring, and boundary-escape event
//! detection with escape-time refinement.
//!
//! The paper the dynamics come from says nothing about numerics; every
//! solver choice here is an artifact decision and is documented as such.

use std::io::{self, Write};
use std::sync::Arc;

use thiserror::Error;

use crate::dynamics::{
    build_phase_field, Chart, DynamicsSpec, FieldError, PhaseField, PhasePoint, ProfileLayout,
};

#[derive(Debug, Error)]
pub enum IntegrateError {
    #[error("invalid integrator config: {0}")]
    BadConfig(String),
    #[error("invalid initial state: {0}")]
    BadInitialState(String),
    #[error("time {t} outside the integrated range [{lo}, {hi}]")]
    OutOfRange { t: f64, lo: f64, hi: f64 },
    #[error("record has fewer than two samples")]
    TooFewSamples,
    #[error(transparent)]
    Field(#[from] FieldError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Fixed-step classical RK4 with step `max_step`.
    Rk4,
    /// Adaptive Dormand–Prince 5(4) with PI step control.
    Rk45,
}

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct IntegratorConfig {
    pub scheme: Scheme,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub min_step: f64,
    pub t_end: f64,
    /// Sampling grid spacing; 0 records every accepted step.
    pub sample_interval: f64,
    pub boundary_epsilon: f64,
    pub chart: Chart,
    pub constraint_projection: bool,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::Rk45,
            rel_tol: 1e-9,
            abs_tol: 1e-11,
            max_step: 1.0,
            min_step: 1e-12,
            t_end: 100.0,
            sample_interval: 0.1,
            boundary_epsilon: 1e-9,
            chart: Chart::Simplex,
            constraint_projection: false,
        }
    }
}

impl IntegratorConfig {
    fn validate(&self) -> Result<(), IntegrateError> {
        if !(self.min_step > 0.0 && self.min_step <= self.max_step) {
            return Err(IntegrateError::BadConfig(format!(
                "need 0 < min_step ≤ max_step, got {} and {}",
                self.min_step, self.max_step
            )));
        }
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(IntegrateError::BadConfig("tolerances must be positive".into()));
        }
        if !(self.boundary_epsilon > 0.0) {
            return Err(IntegrateError::BadConfig(
                "boundary_epsilon must be positive".into(),
            ));
        }
        if !(self.sample_interval >= 0.0) {
            return Err(IntegrateError::BadConfig(
                "sample_interval must be nonnegative".into(),
            ));
        }
        if !self.t_end.is_finite() {
            return Err(IntegrateError::BadConfig("t_end must be finite".into()));
        }
        Ok(())
    }
}

/// Why a trajectory ended.
#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    Completed,
    BoundaryEscape {
        t_star: f64,
        player: usize,
        action: usize,
    },
    StepUnderflow,
    FieldError(String),
}

impl Termination {
    pub fn kind(&self) -> &'static str {
        match self {
            Termination::Completed => "Completed",
            Termination::BoundaryEscape { .. } => "BoundaryEscape",
            Termination::StepUnderflow => "StepUnderflow",
            Termination::FieldError(_) => "FieldError",
        }
    }

    pub fn t_star(&self) -> Option<f64> {
        match self {
            Termination::BoundaryEscape { t_star, .. } => Some(*t_star),
            _ => None,
        }
    }
}

/// One time sample: simplex-coordinate positions/velocities (flattened,
/// player-major) plus total and kinetic energy.
#[derive(Debug, Clone)]
pub struct Sample {
    pub t: f64,
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
    pub energy: f64,
    pub kinetic: f64,
}

#[derive(Debug, Clone, Copy, Default, serde::Serialize)]
pub struct IntegrationStats {
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub rhs_evaluations: usize,
    pub max_drift: f64,
}

/// A completed integration: time-ordered samples, the termination reason,
/// and step statistics.
#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub layout: ProfileLayout,
    pub field_name: String,
    pub chart: Chart,
    pub eta: f64,
    pub has_potential: bool,
    pub samples: Vec<Sample>,
    pub termination: Termination,
    pub stats: IntegrationStats,
}

impl TrajectoryRecord {
    pub fn t_start(&self) -> f64 {
        self.samples.first().map(|s| s.t).unwrap_or(0.0)
    }

    pub fn t_last(&self) -> f64 {
        self.samples.last().map(|s| s.t).unwrap_or(0.0)
    }

    pub fn final_sample(&self) -> Option<&Sample> {
        self.samples.last()
    }
}

// ---------------------------------------------------------------------------
// Dormand–Prince 5(4) tableau
// ---------------------------------------------------------------------------

const DP_C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [&[f64]; 6] = [
    &[1.0 / 5.0],
    &[3.0 / 40.0, 9.0 / 40.0],
    &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
    &[
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
    ],
    &[
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
    ],
    &[
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// 5th-order weights equal the last A row (FSAL); embedded 4th-order weights:
const DP_B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

struct StageFailure;

fn rhs_into(
    field: &dyn PhaseField,
    t: f64,
    y: &[f64],
    out: &mut [f64],
    stats: &mut IntegrationStats,
) -> Result<(), StageFailure> {
    stats.rhs_evaluations += 1;
    field.rhs(t, y, out).map_err(|_| StageFailure)
}

/// Cubic Hermite interpolation of the state over one step.
fn hermite(
    t0: f64,
    y0: &[f64],
    f0: &[f64],
    t1: f64,
    y1: &[f64],
    f1: &[f64],
    t: f64,
    out: &mut [f64],
) {
    let h = t1 - t0;
    let s = (t - t0) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    for i in 0..out.len() {
        out[i] = h00 * y0[i] + h10 * h * f0[i] + h01 * y1[i] + h11 * h * f1[i];
    }
}

/// Derivative of the Hermite interpolant.
fn hermite_deriv(
    t0: f64,
    y0: &[f64],
    f0: &[f64],
    t1: f64,
    y1: &[f64],
    f1: &[f64],
    t: f64,
    out: &mut [f64],
) {
    let h = t1 - t0;
    let s = (t - t0) / h;
    let s2 = s * s;
    let d00 = (6.0 * s2 - 6.0 * s) / h;
    let d10 = 3.0 * s2 - 4.0 * s + 1.0;
    let d01 = (-6.0 * s2 + 6.0 * s) / h;
    let d11 = 3.0 * s2 - 2.0 * s;
    for i in 0..out.len() {
        out[i] = d00 * y0[i] + d10 * f0[i] + d01 * y1[i] + d11 * f1[i];
    }
}

/// Earliest in-step time at which some monitored coordinate reaches its
/// threshold (cubic Hermite model per coordinate), or None.
fn scan_escape(
    t0: f64,
    y0: &[f64],
    f0: &[f64],
    t1: f64,
    y1: &[f64],
    f1: &[f64],
    thresholds: &[Option<f64>],
) -> Option<(f64, usize)> {
    let h = t1 - t0;
    let mut best: Option<(f64, usize)> = None;
    for (i, th) in thresholds.iter().enumerate() {
        let Some(th) = *th else { continue };
        // Hermite cubic for coordinate i in s ∈ [0,1]:
        // p(s) = h00 y0 + h10 h f0 + h01 y1 + h11 h f1, shifted by threshold.
        let (a0, af0, a1, af1) = (y0[i] - th, h * f0[i], y1[i] - th, h * f1[i]);
        if a0 <= 0.0 {
            // already at/below threshold at step start: immediate event
            return Some((t0, i));
        }
        // p(s) = c3 s³ + c2 s² + c1 s + c0
        let c0 = a0;
        let c1 = af0;
        let c2 = -3.0 * a0 + 3.0 * a1 - 2.0 * af0 - af1;
        let c3 = 2.0 * a0 - 2.0 * a1 + af0 + af1;
        let p = |s: f64| ((c3 * s + c2) * s + c1) * s + c0;
        // candidate minimum locations: endpoints and critical points
        let mut candidates = vec![1.0];
        let (qa, qb, qc) = (3.0 * c3, 2.0 * c2, c1);
        let disc = qb * qb - 4.0 * qa * qc;
        if qa.abs() < 1e-300 {
            if qb.abs() > 1e-300 {
                let s = -qc / qb;
                if s > 0.0 && s < 1.0 {
                    candidates.push(s);
                }
            }
        } else if disc >= 0.0 {
            let sq = disc.sqrt();
            for s in [(-qb - sq) / (2.0 * qa), (-qb + sq) / (2.0 * qa)] {
                if s > 0.0 && s < 1.0 {
                    candidates.push(s);
                }
            }
        }
        let (s_min, p_min) = candidates
            .iter()
            .map(|&s| (s, p(s)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        if p_min > 0.0 {
            continue;
        }
        // bisect the sign change on [0, s_min] for the earliest crossing
        let (mut lo, mut hi) = (0.0f64, s_min);
        while (hi - lo) * h.abs() > 1e-9 {
            let mid = 0.5 * (lo + hi);
            if p(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let t_cross = t0 + hi * h;
        if best.map_or(true, |(tb, _)| t_cross < tb) {
            best = Some((t_cross, i));
        }
    }
    best
}

struct Recorder<'a> {
    field: &'a dyn PhaseField,
    samples: Vec<Sample>,
    sample_interval: f64,
    next_sample_t: f64,
    max_drift: f64,
}

impl<'a> Recorder<'a> {
    fn new(field: &'a dyn PhaseField, t0: f64, y0: &[f64], interval: f64) -> Self {
        let mut rec = Self {
            field,
            samples: Vec::new(),
            sample_interval: interval,
            next_sample_t: t0 + interval,
            max_drift: 0.0,
        };
        rec.push_state(t0, y0);
        rec
    }

    fn push_state(&mut self, t: f64, y: &[f64]) {
        let (position, velocity) = self.field.decode(y);
        let e = self.field.energy_of(y);
        self.max_drift = self.max_drift.max(self.field.constraint_residual(y));
        self.samples.push(Sample {
            t,
            position,
            velocity,
            energy: e.total(),
            kinetic: e.kinetic,
        });
    }

    /// Record grid samples inside an accepted step (t0, t1], interpolating
    /// with the step's Hermite model.
    fn record_step(&mut self, t0: f64, y0: &[f64], f0: &[f64], t1: f64, y1: &[f64], f1: &[f64]) {
        if self.sample_interval == 0.0 {
            self.push_state(t1, y1);
            return;
        }
        let mut buf = vec![0.0; y0.len()];
        while self.next_sample_t <= t1 + 1e-12 * t1.abs().max(1.0) {
            let ts = self.next_sample_t;
            if (ts - t1).abs() <= 1e-12 * t1.abs().max(1.0) {
                self.push_state(t1, y1);
            } else {
                hermite(t0, y0, f0, t1, y1, f1, ts, &mut buf);
                self.push_state(ts, &buf);
            }
            self.next_sample_t += self.sample_interval;
        }
    }

    /// Ensure the trajectory ends with a sample at exactly (t, y).
    fn finalize_at(&mut self, t: f64, y: &[f64]) {
        let needs = self
            .samples
            .last()
            .map(|s| (s.t - t).abs() > 1e-12 * t.abs().max(1.0))
            .unwrap_or(true);
        if needs {
            self.push_state(t, y);
        }
    }
}

/// Integrate `spec` from `initial` according to `config`.
///
/// Escape events, step underflow, and runtime field failures are reported in
/// the record's termination, not raised; errors are reserved for invalid
/// configs and initial states.
pub fn integrate(
    spec: &Arc<DynamicsSpec>,
    initial: &PhasePoint,
    config: &IntegratorConfig,
) -> Result<TrajectoryRecord, IntegrateError> {
    config.validate()?;
    let field = build_phase_field(spec.clone(), config.chart)?;
    let t0 = initial.time;
    if !(config.t_end > t0) {
        return Err(IntegrateError::BadConfig(format!(
            "t_end = {} must exceed the initial time {}",
            config.t_end, t0
        )));
    }
    if !initial.position.is_interior() {
        return Err(IntegrateError::BadInitialState(
            "initial position must be interior".into(),
        ));
    }
    let y0 = field.encode(initial)?;
    let thresholds = field.event_thresholds(config.boundary_epsilon);
    if let Some((_, i)) = immediate_escape(&y0, &thresholds) {
        let (player, action) = field.layout().locate(i);
        return Err(IntegrateError::BadInitialState(format!(
            "initial position already within the boundary band (player {}, action {})",
            player + 1,
            action
        )));
    }

    let driver = Driver {
        field: field.as_ref(),
        config,
        thresholds,
    };
    let (samples, termination, stats) = driver.run(t0, y0);
    Ok(TrajectoryRecord {
        layout: field.layout().clone(),
        field_name: field.field_name().to_string(),
        chart: field.chart(),
        eta: spec.eta(),
        has_potential: spec.has_potential(),
        samples,
        termination,
        stats,
    })
}

fn immediate_escape(y: &[f64], thresholds: &[Option<f64>]) -> Option<(f64, usize)> {
    for (i, th) in thresholds.iter().enumerate() {
        if let Some(th) = th {
            if y[i] <= *th {
                return Some((y[i] - th, i));
            }
        }
    }
    None
}

struct Driver<'a> {
    field: &'a dyn PhaseField,
    config: &'a IntegratorConfig,
    thresholds: Vec<Option<f64>>,
}

impl<'a> Driver<'a> {
    fn run(&self, t0: f64, y0: Vec<f64>) -> (Vec<Sample>, Termination, IntegrationStats) {
        let mut stats = IntegrationStats::default();
        let mut recorder = Recorder::new(self.field, t0, &y0, self.config.sample_interval);

        let dim = y0.len();
        let mut t = t0;
        let mut y = y0;
        let mut f = vec![0.0; dim];
        if rhs_into(self.field, t, &y, &mut f, &mut stats).is_err() {
            let term = Termination::FieldError("field evaluation failed at the initial state".into());
            return (recorder.samples, term, stats);
        }

        let mut h = match self.config.scheme {
            Scheme::Rk4 => self.config.max_step,
            Scheme::Rk45 => self.initial_step(t, &y, &f, &mut stats),
        };
        let mut facold: f64 = 1e-4;
        let mut last_rejected = false;

        let mut stages = vec![vec![0.0; dim]; 7];
        let mut y_stage = vec![0.0; dim];
        let mut y_new = vec![0.0; dim];
        let mut f_new = vec![0.0; dim];
        let mut err_vec = vec![0.0; dim];

        let t_scale = self.config.t_end.abs().max(1.0);
        loop {
            if t >= self.config.t_end - 1e-14 * t_scale {
                recorder.finalize_at(t, &y);
                stats.max_drift = recorder.max_drift;
                return (recorder.samples, Termination::Completed, stats);
            }
            h = h.min(self.config.max_step).min(self.config.t_end - t);
            if h < self.config.min_step {
                // The remaining gap to t_end may be legitimately tiny.
                if self.config.t_end - t <= self.config.min_step {
                    h = self.config.t_end - t;
                } else {
                    recorder.finalize_at(t, &y);
                    stats.max_drift = recorder.max_drift;
                    return (recorder.samples, Termination::StepUnderflow, stats);
                }
            }

            let step_ok = match self.config.scheme {
                Scheme::Rk45 => self.dopri5_step(
                    t,
                    &y,
                    &f,
                    h,
                    &mut stages,
                    &mut y_stage,
                    &mut y_new,
                    &mut f_new,
                    &mut err_vec,
                    &mut stats,
                ),
                Scheme::Rk4 => self.rk4_step(
                    t,
                    &y,
                    &f,
                    h,
                    &mut stages,
                    &mut y_stage,
                    &mut y_new,
                    &mut f_new,
                    &mut stats,
                ),
            };

            match step_ok {
                StepOutcome::StageFailure => {
                    stats.rejected_steps += 1;
                    last_rejected = true;
                    h *= 0.25;
                    if h < self.config.min_step {
                        recorder.finalize_at(t, &y);
                        stats.max_drift = recorder.max_drift;
                        return (recorder.samples, Termination::StepUnderflow, stats);
                    }
                }
                StepOutcome::Rejected { err } => {
                    stats.rejected_steps += 1;
                    last_rejected = true;
                    let fac11 = err.powf(0.17);
                    h /= (fac11 / 0.9).min(10.0);
                    if h < self.config.min_step {
                        recorder.finalize_at(t, &y);
                        stats.max_drift = recorder.max_drift;
                        return (recorder.samples, Termination::StepUnderflow, stats);
                    }
                }
                StepOutcome::Accepted { err } => {
                    stats.accepted_steps += 1;
                    let t_new = t + h;

                    // escape-event scan over the step's Hermite model
                    if let Some((t_star, coord)) =
                        scan_escape(t, &y, &f, t_new, &y_new, &f_new, &self.thresholds)
                    {
                        let mut y_star = vec![0.0; dim];
                        hermite(t, &y, &f, t_new, &y_new, &f_new, t_star, &mut y_star);
                        recorder.record_partial(t, &y, &f, t_new, &y_new, &f_new, t_star);
                        recorder.finalize_at(t_star, &y_star);
                        let (player, action) = self.field.layout().locate(coord);
                        stats.max_drift = recorder.max_drift;
                        return (
                            recorder.samples,
                            Termination::BoundaryEscape {
                                t_star,
                                player,
                                action,
                            },
                            stats,
                        );
                    }

                    recorder.record_step(t, &y, &f, t_new, &y_new, &f_new);
                    t = t_new;
                    std::mem::swap(&mut y, &mut y_new);
                    std::mem::swap(&mut f, &mut f_new);

                    if self.config.constraint_projection {
                        self.field.project(&mut y);
                        if rhs_into(self.field, t, &y, &mut f, &mut stats).is_err() {
                            recorder.finalize_at(t, &y);
                            stats.max_drift = recorder.max_drift;
                            return (
                                recorder.samples,
                                Termination::FieldError(
                                    "field evaluation failed after projection".into(),
                                ),
                                stats,
                            );
                        }
                    }

                    if self.config.scheme == Scheme::Rk45 {
                        let fac11 = err.max(1e-10).powf(0.17);
                        let fac = (fac11 / facold.powf(0.04) / 0.9).clamp(0.2, 10.0);
                        let mut h_new = h / fac;
                        if last_rejected {
                            h_new = h_new.min(h);
                        }
                        facold = err.max(1e-4);
                        h = h_new;
                    }
                    last_rejected = false;
                }
            }
        }
    }

    fn initial_step(
        &self,
        t: f64,
        y: &[f64],
        f: &[f64],
        stats: &mut IntegrationStats,
    ) -> f64 {
        let sc = |i: usize| self.config.abs_tol + self.config.rel_tol * y[i].abs();
        let n = y.len() as f64;
        let d0 = (y.iter().enumerate().map(|(i, v)| (v / sc(i)).powi(2)).sum::<f64>() / n).sqrt();
        let d1 = (f.iter().enumerate().map(|(i, v)| (v / sc(i)).powi(2)).sum::<f64>() / n).sqrt();
        let h0 = if d0 < 1e-5 || d1 < 1e-5 {
            1e-6
        } else {
            0.01 * d0 / d1
        };
        let h0 = h0.min(self.config.max_step).min(self.config.t_end - t);
        // one Euler probe to bound the second derivative
        let y1: Vec<f64> = y.iter().zip(f).map(|(a, b)| a + h0 * b).collect();
        let mut f1 = vec![0.0; y.len()];
        if rhs_into(self.field, t + h0, &y1, &mut f1, stats).is_err() {
            return (h0 * 0.1).max(self.config.min_step);
        }
        let d2 = (f1
            .iter()
            .zip(f)
            .enumerate()
            .map(|(i, (a, b))| ((a - b) / sc(i)).powi(2))
            .sum::<f64>()
            / n)
            .sqrt()
            / h0;
        let max_d = d1.max(d2);
        let h1 = if max_d <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / max_d).powf(0.2)
        };
        (100.0 * h0)
            .min(h1)
            .min(self.config.max_step)
            .min(self.config.t_end - t)
            .max(self.config.min_step)
    }

    #[allow(clippy::too_many_arguments)]
    fn dopri5_step(
        &self,
        t: f64,
        y: &[f64],
        f: &[f64],
        h: f64,
        stages: &mut [Vec<f64>],
        y_stage: &mut [f64],
        y_new: &mut [f64],
        f_new: &mut [f64],
        err_vec: &mut [f64],
        stats: &mut IntegrationStats,
    ) -> StepOutcome {
        let dim = y.len();
        stages[0].copy_from_slice(f);
        for s in 1..6 {
            let a_row = DP_A[s - 1];
            for i in 0..dim {
                let mut acc = 0.0;
                for (j, aij) in a_row.iter().enumerate() {
                    acc += aij * stages[j][i];
                }
                y_stage[i] = y[i] + h * acc;
            }
            if rhs_into(self.field, t + DP_C[s - 1] * h, y_stage, &mut stages[s], stats).is_err() {
                return StepOutcome::StageFailure;
            }
        }
        // 5th-order solution (b = last A row)
        let b = DP_A[5];
        for i in 0..dim {
            let mut acc = 0.0;
            for (j, bj) in b.iter().enumerate() {
                acc += bj * stages[j][i];
            }
            y_new[i] = y[i] + h * acc;
        }
        if rhs_into(self.field, t + h, y_new, f_new, stats).is_err() {
            return StepOutcome::StageFailure;
        }
        stages[6].copy_from_slice(f_new);
        // embedded 4th-order error estimate
        for i in 0..dim {
            let mut acc4 = 0.0;
            for (j, bj) in DP_B4.iter().enumerate() {
                acc4 += bj * stages[j][i];
            }
            err_vec[i] = y_new[i] - (y[i] + h * acc4);
        }
        let mut err = 0.0;
        for i in 0..dim {
            let sc = self.config.abs_tol
                + self.config.rel_tol * y[i].abs().max(y_new[i].abs());
            let e = err_vec[i] / sc;
            err += e * e;
        }
        err = (err / dim as f64).sqrt();
        if !err.is_finite() {
            return StepOutcome::StageFailure;
        }
        if err <= 1.0 {
            StepOutcome::Accepted { err }
        } else {
            StepOutcome::Rejected { err }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn rk4_step(
        &self,
        t: f64,
        y: &[f64],
        f: &[f64],
        h: f64,
        stages: &mut [Vec<f64>],
        y_stage: &mut [f64],
        y_new: &mut [f64],
        f_new: &mut [f64],
        stats: &mut IntegrationStats,
    ) -> StepOutcome {
        let dim = y.len();
        stages[0].copy_from_slice(f);
        // k2
        for i in 0..dim {
            y_stage[i] = y[i] + 0.5 * h * stages[0][i];
        }
        if rhs_into(self.field, t + 0.5 * h, y_stage, &mut stages[1], stats).is_err() {
            return StepOutcome::StageFailure;
        }
        // k3
        for i in 0..dim {
            y_stage[i] = y[i] + 0.5 * h * stages[1][i];
        }
        if rhs_into(self.field, t + 0.5 * h, y_stage, &mut stages[2], stats).is_err() {
            return StepOutcome::StageFailure;
        }
        // k4
        for i in 0..dim {
            y_stage[i] = y[i] + h * stages[2][i];
        }
        if rhs_into(self.field, t + h, y_stage, &mut stages[3], stats).is_err() {
            return StepOutcome::StageFailure;
        }
        for i in 0..dim {
            y_new[i] = y[i]
                + h / 6.0
                    * (stages[0][i] + 2.0 * stages[1][i] + 2.0 * stages[2][i] + stages[3][i]);
        }
        if rhs_into(self.field, t + h, y_new, f_new, stats).is_err() {
            return StepOutcome::StageFailure;
        }
        StepOutcome::Accepted { err: 0.0 }
    }
}

enum StepOutcome {
    Accepted { err: f64 },
    Rejected { err: f64 },
    StageFailure,
}

impl<'a> Recorder<'a> {
    /// Record grid samples strictly before an escape time.
    fn record_partial(
        &mut self,
        t0: f64,
        y0: &[f64],
        f0: &[f64],
        t1: f64,
        y1: &[f64],
        f1: &[f64],
        t_star: f64,
    ) {
        if self.sample_interval == 0.0 {
            return;
        }
        let mut buf = vec![0.0; y0.len()];
        while self.next_sample_t < t_star {
            let ts = self.next_sample_t;
            hermite(t0, y0, f0, t1, y1, f1, ts, &mut buf);
            self.push_state(ts, &buf);
            self.next_sample_t += self.sample_interval;
        }
    }
}

/// Interpolate the record at arbitrary times inside the integrated range
/// (cubic Hermite on the stored samples; energies interpolated linearly).
pub fn sample_dense(record: &TrajectoryRecord, times: &[f64]) -> Result<Vec<Sample>, IntegrateError> {
    if record.samples.len() < 2 {
        return Err(IntegrateError::TooFewSamples);
    }
    let lo = record.t_start();
    let hi = record.t_last();
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        if t < lo - 1e-12 || t > hi + 1e-12 {
            return Err(IntegrateError::OutOfRange { t, lo, hi });
        }
        let idx = match record
            .samples
            .binary_search_by(|s| s.t.total_cmp(&t))
        {
            Ok(i) => {
                out.push(record.samples[i].clone());
                continue;
            }
            Err(i) => i.clamp(1, record.samples.len() - 1),
        };
        let (s0, s1) = (&record.samples[idx - 1], &record.samples[idx]);
        let n = s0.position.len();
        let mut position = vec![0.0; n];
        let mut velocity = vec![0.0; n];
        hermite(
            s0.t,
            &s0.position,
            &s0.velocity,
            s1.t,
            &s1.position,
            &s1.velocity,
            t,
            &mut position,
        );
        hermite_deriv(
            s0.t,
            &s0.position,
            &s0.velocity,
            s1.t,
            &s1.position,
            &s1.velocity,
            t,
            &mut velocity,
        );
        let w = (t - s0.t) / (s1.t - s0.t);
        out.push(Sample {
            t,
            position,
            velocity,
            energy: s0.energy + w * (s1.energy - s0.energy),
            kinetic: s0.kinetic + w * (s1.kinetic - s0.kinetic),
        });
    }
    Ok(out)
}

/// Write the trajectory CSV: header `t,x_<k>_<alpha>…,v_<k>_<alpha>…,E,K`,
/// one row per sample at 17 significant digits, terminated by
/// `# termination=<kind> t_star=<val|none> max_drift=<val>`.
pub fn write_csv(record: &TrajectoryRecord, out: &mut dyn Write) -> io::Result<()> {
    let mut header = String::from("t");
    for (k, &m) in record.layout.action_counts().iter().enumerate() {
        for a in 0..m {
            header.push_str(&format!(",x_{}_{}", k + 1, a));
        }
    }
    for (k, &m) in record.layout.action_counts().iter().enumerate() {
        for a in 0..m {
            header.push_str(&format!(",v_{}_{}", k + 1, a));
        }
    }
    header.push_str(",E,K");
    writeln!(out, "{header}")?;
    for s in &record.samples {
        let mut row = format!("{:.16e}", s.t);
        for v in s.position.iter().chain(s.velocity.iter()) {
            row.push_str(&format!(",{v:.16e}"));
        }
        row.push_str(&format!(",{:.16e},{:.16e}", s.energy, s.kinetic));
        writeln!(out, "{row}")?;
    }
    let t_star = match record.termination.t_star() {
        Some(v) => format!("{v:.16e}"),
        None => "none".to_string(),
    };
    writeln!(
        out,
        "# termination={} t_star={} max_drift={:.16e}",
        record.termination.kind(),
        t_star,
        record.stats.max_drift
    )
}

pub fn csv_string(record: &TrajectoryRecord) -> String {
    let mut buf = Vec::new();
    write_csv(record, &mut buf).expect("in-memory write");
    String::from_utf8(buf).expect("csv is utf-8")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{FieldKind, ObjectiveFn, PayoffSource};
    use crate::games::{zero2, StrategyProfile};
    use crate::geometry::{SimplexPoint, TangentVector};
    use crate::kernel::{LogBarrier, Shahshahani};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn shah_spec(eta: f64) -> Arc<DynamicsSpec> {
        Arc::new(
            DynamicsSpec::new(
                FieldKind::Inertial,
                vec![Arc::new(Shahshahani)],
                eta,
                PayoffSource::Game(Arc::new(zero2())),
            )
            .unwrap(),
        )
    }

    fn lb_spec(eta: f64) -> Arc<DynamicsSpec> {
        Arc::new(
            DynamicsSpec::new(
                FieldKind::Inertial,
                vec![Arc::new(LogBarrier)],
                eta,
                PayoffSource::Game(Arc::new(zero2())),
            )
            .unwrap(),
        )
    }

    /// Eq. 3.10 closed form for the two-action (IRD) zero game in the
    /// Euclidean chart, plus its first exit time from (0, 2).
    fn eq_3_10(t: f64, xi0: f64, v0: f64) -> f64 {
        let w = v0 / (4.0 - xi0 * xi0).sqrt();
        xi0 * (w * t).cos() + (4.0 - xi0 * xi0).sqrt() * (w * t).sin()
    }

    fn eq_3_10_exit(xi0: f64, v0: f64) -> f64 {
        let root = (4.0 - xi0 * xi0).sqrt();
        if v0 > 0.0 {
            (PI / 2.0 - (xi0 / 2.0).asin()) * root / v0
        } else {
            (xi0 / 2.0).asin() * root / (-v0)
        }
    }

    /// x(0) with ξ₀ in the Shahshahani chart, velocity from 1-D chart speed v₀.
    fn ird_initial(xi0: f64, v0: f64) -> PhasePoint {
        let x1 = xi0 * xi0 / 4.0;
        let xdot1 = v0 * x1.sqrt();
        PhasePoint::new(
            StrategyProfile::new(vec![SimplexPoint::new(vec![1.0 - x1, x1]).unwrap()]),
            vec![TangentVector::new(vec![-xdot1, xdot1]).unwrap()],
        )
    }

    #[test]
    fn ird_zero_game_matches_closed_form_euclidean_chart() {
        let spec = shah_spec(0.0);
        let initial = ird_initial(1.0, 1.0);
        let t_star = eq_3_10_exit(1.0, 1.0);
        let config = IntegratorConfig {
            chart: Chart::Euclidean,
            t_end: 10.0,
            sample_interval: 0.01,
            ..Default::default()
        };
        let record = integrate(&spec, &initial, &config).unwrap();
        match record.termination {
            Termination::BoundaryEscape { t_star: ts, .. } => {
                assert!(
                    (ts - t_star).abs() < 1e-4,
                    "escape at {ts}, analytic {t_star}"
                );
            }
            ref other => panic!("expected escape, got {other:?}"),
        }
        // trajectory against Eq. 3.10 over [0, 0.9 t*]
        let mut max_err = 0.0f64;
        for s in &record.samples {
            if s.t > 0.9 * t_star {
                break;
            }
            let xi_sim = 2.0 * s.position[1].sqrt();
            max_err = max_err.max((xi_sim - eq_3_10(s.t, 1.0, 1.0)).abs());
        }
        assert!(max_err < 1e-6, "max deviation {max_err}");
    }

    #[test]
    fn ird_escape_from_uniform_start() {
        // ξ₀ = √2, v₀ = 1 → t* = (π/4)√2 ≈ 1.110721
        let spec = shah_spec(0.0);
        let initial = ird_initial(2f64.sqrt(), 1.0);
        let config = IntegratorConfig {
            chart: Chart::Euclidean,
            t_end: 10.0,
            ..Default::default()
        };
        let record = integrate(&spec, &initial, &config).unwrap();
        let ts = record.termination.t_star().expect("escape");
        assert!((ts - PI / 4.0 * 2f64.sqrt()).abs() < 1e-4);
        // record invariant: final sample touches the boundary band
        let last = record.final_sample().unwrap();
        let min = last.position.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(min <= config.boundary_epsilon);
    }

    #[test]
    fn ird_escape_in_simplex_chart_too() {
        let spec = shah_spec(0.0);
        let initial = ird_initial(1.0, 1.0);
        let analytic = eq_3_10_exit(1.0, 1.0);
        let config = IntegratorConfig {
            chart: Chart::Simplex,
            t_end: 10.0,
            ..Default::default()
        };
        let record = integrate(&spec, &initial, &config).unwrap();
        let ts = record.termination.t_star().expect("escape");
        // the band at 1e−9 is hit ≈ √(ε)·2/|ξ̇| before the analytic touch
        assert!(
            (ts - analytic).abs() < 1e-4,
            "simplex-chart escape {ts} vs analytic {analytic}"
        );
    }

    #[test]
    fn escape_time_decreases_with_speed() {
        let spec = shah_spec(0.0);
        let mut previous = f64::INFINITY;
        for &v0 in &[0.5, 1.0, 2.0] {
            let initial = ird_initial(1.0, v0);
            let config = IntegratorConfig {
                chart: Chart::Euclidean,
                t_end: 20.0,
                ..Default::default()
            };
            let record = integrate(&spec, &initial, &config).unwrap();
            let ts = record.termination.t_star().expect("escape");
            let analytic = eq_3_10_exit(1.0, v0);
            assert!((ts - analytic).abs() < 1e-4);
            assert!(ts < previous);
            previous = ts;
        }
    }

    #[test]
    fn stationary_start_stays_put() {
        for spec in [shah_spec(0.0), lb_spec(0.0)] {
            let initial = PhasePoint::at_rest(StrategyProfile::uniform(&[2]));
            let config = IntegratorConfig {
                t_end: 100.0,
                sample_interval: 1.0,
                ..Default::default()
            };
            let record = integrate(&spec, &initial, &config).unwrap();
            assert_eq!(record.termination, Termination::Completed);
            for s in &record.samples {
                assert!((s.position[0] - 0.5).abs() < 1e-10);
                assert!((s.position[1] - 0.5).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn ild_zero_game_completes_long_horizon() {
        let spec = lb_spec(0.0);
        let x1: f64 = 0.25;
        let initial = PhasePoint::new(
            StrategyProfile::new(vec![SimplexPoint::new(vec![1.0 - x1, x1]).unwrap()]),
            vec![TangentVector::new(vec![0.125, -0.125]).unwrap()],
        );
        let config = IntegratorConfig {
            chart: Chart::Euclidean,
            t_end: 1000.0,
            sample_interval: 1.0,
            ..Default::default()
        };
        let record = integrate(&spec, &initial, &config).unwrap();
        assert_eq!(record.termination, Termination::Completed, "stats {:?}", record.stats);
        assert_relative_eq!(record.t_last(), 1000.0, max_relative = 1e-12);
    }

    fn quadratic_spec(eta: f64) -> Arc<DynamicsSpec> {
        Arc::new(
            DynamicsSpec::new(
                FieldKind::Inertial,
                vec![Arc::new(LogBarrier)],
                eta,
                PayoffSource::Objective(Arc::new(ObjectiveFn::quadratic_well(vec![
                    0.5, 0.3, 0.2,
                ]))),
            )
            .unwrap(),
        )
    }

    fn kicked_start() -> PhasePoint {
        PhasePoint::new(
            StrategyProfile::new(vec![SimplexPoint::new(vec![0.4, 0.35, 0.25]).unwrap()]),
            vec![TangentVector::new(vec![0.05, -0.02, -0.03]).unwrap()],
        )
    }

    #[test]
    fn energy_conserved_without_friction() {
        let spec = quadratic_spec(0.0);
        let config = IntegratorConfig {
            chart: Chart::Euclidean,
            t_end: 100.0,
            sample_interval: 0.1,
            ..Default::default()
        };
        let record = integrate(&spec, &kicked_start(), &config).unwrap();
        assert_eq!(record.termination, Termination::Completed);
        let e0 = record.samples[0].energy;
        let drift = record
            .samples
            .iter()
            .map(|s| (s.energy - e0).abs())
            .fold(0.0, f64::max)
            / (1.0 + e0.abs());
        assert!(drift < 1e-6, "relative energy drift {drift}");
    }

    #[test]
    fn energy_dissipates_with_friction() {
        let spec = quadratic_spec(1.0);
        let config = IntegratorConfig {
            chart: Chart::Euclidean,
            t_end: 50.0,
            sample_interval: 0.05,
            ..Default::default()
        };
        let record = integrate(&spec, &kicked_start(), &config).unwrap();
        for pair in record.samples.windows(2) {
            assert!(
                pair[1].energy <= pair[0].energy + 1e-8,
                "energy increased at t = {}",
                pair[1].t
            );
        }
    }

    #[test]
    fn constraint_drift_stays_small() {
        let spec = quadratic_spec(1.0);
        for chart in [Chart::Simplex, Chart::Euclidean] {
            let config = IntegratorConfig {
                chart,
                t_end: 50.0,
                ..Default::default()
            };
            let record = integrate(&spec, &kicked_start(), &config).unwrap();
            assert!(
                record.stats.max_drift < 1e-8,
                "{chart:?} drift {}",
                record.stats.max_drift
            );
        }
    }

    #[test]
    fn charts_agree_on_interior_run() {
        let spec = quadratic_spec(1.0);
        let mk = |chart| IntegratorConfig {
            chart,
            t_end: 50.0,
            sample_interval: 0.5,
            ..Default::default()
        };
        let a = integrate(&spec, &kicked_start(), &mk(Chart::Simplex)).unwrap();
        let b = integrate(&spec, &kicked_start(), &mk(Chart::Euclidean)).unwrap();
        assert_eq!(a.samples.len(), b.samples.len());
        let mut max_gap = 0.0f64;
        for (sa, sb) in a.samples.iter().zip(&b.samples) {
            for (pa, pb) in sa.position.iter().zip(&sb.position) {
                max_gap = max_gap.max((pa - pb).abs());
            }
        }
        assert!(max_gap < 1e-6, "charts diverge by {max_gap}");
    }

    #[test]
    fn rk4_halving_shows_fourth_order_convergence() {
        let spec = shah_spec(0.0);
        let initial = ird_initial(1.0, 1.0);
        let t_star = eq_3_10_exit(1.0, 1.0);
        let run_err = |h: f64| {
            let config = IntegratorConfig {
                scheme: Scheme::Rk4,
                chart: Chart::Euclidean,
                max_step: h,
                t_end: 0.9 * t_star,
                sample_interval: 0.0,
                ..Default::default()
            };
            let record = integrate(&spec, &initial, &config).unwrap();
            let s = record.final_sample().unwrap();
            let xi = 2.0 * s.position[1].sqrt();
            (xi - eq_3_10(s.t, 1.0, 1.0)).abs()
        };
        let e1 = run_err(0.05);
        let e2 = run_err(0.025);
        let ratio = e1 / e2;
        assert!(
            (12.0..=20.0).contains(&ratio),
            "convergence ratio {ratio} (errors {e1:e}, {e2:e})"
        );
    }

    #[test]
    fn dense_sampling_hits_stored_nodes_exactly() {
        let spec = quadratic_spec(1.0);
        let config = IntegratorConfig {
            t_end: 10.0,
            sample_interval: 0.25,
            ..Default::default()
        };
        let record = integrate(&spec, &kicked_start(), &config).unwrap();
        let node = record.samples[7].clone();
        let out = sample_dense(&record, &[node.t]).unwrap();
        assert_eq!(out[0].position, node.position);
        assert_eq!(out[0].velocity, node.velocity);

        // constant trajectory interpolates to itself
        let rest_spec = lb_spec(0.0);
        let rest = PhasePoint::at_rest(StrategyProfile::uniform(&[2]));
        let record = integrate(&rest_spec, &rest, &config).unwrap();
        let mid = sample_dense(&record, &[1.23456]).unwrap();
        assert_relative_eq!(mid[0].position[0], 0.5, epsilon = 1e-12);

        assert!(matches!(
            sample_dense(&record, &[11.0]),
            Err(IntegrateError::OutOfRange { .. })
        ));
    }

    #[test]
    fn dense_sampling_tracks_closed_form() {
        let spec = shah_spec(0.0);
        let initial = ird_initial(1.0, 1.0);
        let t_star = eq_3_10_exit(1.0, 1.0);
        let config = IntegratorConfig {
            chart: Chart::Euclidean,
            t_end: 10.0,
            sample_interval: 0.05,
            ..Default::default()
        };
        let record = integrate(&spec, &initial, &config).unwrap();
        let times: Vec<f64> = (0..100).map(|i| 0.9 * t_star * i as f64 / 99.0).collect();
        let dense = sample_dense(&record, &times).unwrap();
        for s in dense {
            let xi = 2.0 * s.position[1].sqrt();
            assert!((xi - eq_3_10(s.t, 1.0, 1.0)).abs() < 1e-5);
        }
    }

    #[test]
    fn csv_format_is_stable() {
        let spec = shah_spec(0.0);
        let initial = ird_initial(1.0, 1.0);
        let config = IntegratorConfig {
            chart: Chart::Euclidean,
            t_end: 10.0,
            sample_interval: 0.25,
            ..Default::default()
        };
        let record = integrate(&spec, &initial, &config).unwrap();
        let text = csv_string(&record);
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,x_1_0,x_1_1,v_1_0,v_1_1,E,K");
        let last = text.lines().last().unwrap();
        assert!(last.starts_with("# termination=BoundaryEscape t_star="));
        assert!(last.contains("max_drift="));
        // determinism
        let again = csv_string(&integrate(&spec, &initial, &config).unwrap());
        assert_eq!(text, again);
    }

    #[test]
    fn escape_universality_over_initial_conditions() {
        // Every (ξ₀, v₀ ≠ 0) escapes with t* matching Eq. 3.10's exit.
        let spec = shah_spec(0.0);
        let config = IntegratorConfig {
            chart: Chart::Euclidean,
            t_end: 100.0,
            ..Default::default()
        };
        for &xi0 in &[0.3, 0.8, 1.0, 1.4, 1.9] {
            for &v0 in &[-2.0, -0.5, 0.25, 1.0, 3.0] {
                let initial = ird_initial(xi0, v0);
                let record = integrate(&spec, &initial, &config).unwrap();
                let ts = record
                    .termination
                    .t_star()
                    .unwrap_or_else(|| panic!("no escape for ξ₀={xi0}, v₀={v0}"));
                let analytic = eq_3_10_exit(xi0, v0);
                assert!(
                    (ts - analytic).abs() < 1e-4,
                    "ξ₀={xi0}, v₀={v0}: t*={ts} vs analytic {analytic}"
                );
            }
        }
    }

    #[test]
    fn hard_boundary_without_band_reports_step_underflow() {
        // With the escape band pushed below the 1e−14 field guard, the
        // simplex-chart run cannot cross it and the step size collapses.
        let spec = shah_spec(0.0);
        let initial = ird_initial(1.0, 1.0);
        let config = IntegratorConfig {
            chart: Chart::Simplex,
            t_end: 10.0,
            boundary_epsilon: 1e-300,
            ..Default::default()
        };
        let record = integrate(&spec, &initial, &config).unwrap();
        assert_eq!(record.termination, Termination::StepUnderflow);
    }

    #[test]
    fn field_failure_at_start_is_reported_not_raised() {
        // Interior but inside the 1e−14 evaluation guard: the first RHS call
        // fails and the record carries a FieldError termination.
        let spec = shah_spec(0.0);
        let tiny = 1e-15;
        let initial = PhasePoint::at_rest(StrategyProfile::new(vec![SimplexPoint::new(vec![
            tiny,
            1.0 - tiny,
        ])
        .unwrap()]));
        let config = IntegratorConfig {
            chart: Chart::Simplex,
            boundary_epsilon: 1e-16,
            ..Default::default()
        };
        let record = integrate(&spec, &initial, &config).unwrap();
        assert!(matches!(record.termination, Termination::FieldError(_)));
    }

    #[test]
    fn rejects_bad_configs_and_states() {
        let spec = shah_spec(0.0);
        let initial = ird_initial(1.0, 1.0);
        let bad = IntegratorConfig {
            min_step: 0.0,
            ..Default::default()
        };
        assert!(matches!(
            integrate(&spec, &initial, &bad),
            Err(IntegrateError::BadConfig(_))
        ));

        let vertexish = PhasePoint::at_rest(StrategyProfile::new(vec![SimplexPoint::new(
            vec![1.0, 0.0],
        )
        .unwrap()]));
        assert!(matches!(
            integrate(&spec, &vertexish, &IntegratorConfig::default()),
            Err(IntegrateError::BadInitialState(_))
        ));
    }
}
