//! Legendre kernels and the Hessian-Riemannian geometries they generate.
//!
//! A kernel is a smooth convex function θ on (0, ∞) with θ′ → −∞ at 0,
//! θ″ > 0 and θ‴ < 0. Its second derivative supplies the diagonal metric
//! weights on the open simplex; the square root of θ″ integrates to the
//! Euclidean chart. Kernels are resolved from a string registry so CLI and
//! config files can pick the geometry at runtime.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("kernel domain error: x = {0} is not positive")]
    Domain(f64),
    #[error("unknown kernel '{0}' (expected shahshahani, log-barrier, or power:p)")]
    UnknownKernel(String),
    #[error("invalid kernel parameter in '{name}': {reason}")]
    BadParameter { name: String, reason: String },
    #[error("kernel '{name}' violates the Legendre conditions: {reason}")]
    NotLegendre { name: String, reason: String },
    #[error("well-posedness test inconclusive for '{name}': {reason}")]
    Inconclusive { name: String, reason: String },
}

/// A Legendre-type kernel θ with derivatives up to third order.
///
/// The `d3_over_*` and `inv_*` helpers exist so geometries stay evaluable
/// arbitrarily close to the boundary: for the canonical kernels the ratios
/// stay bounded (or vanish) as x → 0 even though θ″ itself overflows.
pub trait Kernel: Send + Sync {
    fn name(&self) -> &str;
    /// θ(x)
    fn theta(&self, x: f64) -> f64;
    /// θ′(x)
    fn d1(&self, x: f64) -> f64;
    /// θ″(x), the metric weight
    fn d2(&self, x: f64) -> f64;
    /// θ‴(x)
    fn d3(&self, x: f64) -> f64;

    /// 1/θ″(x); override when the closed form avoids overflow near 0.
    fn inv_d2(&self, x: f64) -> f64 {
        1.0 / self.d2(x)
    }

    /// √θ″(x)
    fn sqrt_d2(&self, x: f64) -> f64 {
        self.d2(x).sqrt()
    }

    /// 1/√θ″(x)
    fn inv_sqrt_d2(&self, x: f64) -> f64 {
        self.inv_d2(x).sqrt()
    }

    /// θ‴(x)/θ″(x)
    fn d3_over_d2(&self, x: f64) -> f64 {
        self.d3(x) / self.d2(x)
    }

    /// θ‴(x)/θ″(x)², bounded on (0, 1] for the canonical kernels
    fn d3_over_d2_sq(&self, x: f64) -> f64 {
        self.d3(x) / (self.d2(x) * self.d2(x))
    }

    /// Closed-form Euclidean primitive φ′(x) with φ″ = √θ″, when available.
    fn phi_prime(&self, _x: f64) -> Option<f64> {
        None
    }

    /// Closed-form inverse (φ′)⁻¹(ξ), when available.
    fn phi_prime_inv(&self, _xi: f64) -> Option<f64> {
        None
    }

    /// lim_{x→0⁺} φ′(x): the lower wall of the Euclidean chart image.
    /// `-∞` means the chart is unbounded below (the well-posed side of the
    /// dichotomy). `None` means no closed form is known.
    fn phi_prime_at_zero(&self) -> Option<f64> {
        None
    }

    /// Analytic well-posedness override; takes precedence over quadrature.
    fn analytic_wellposed(&self) -> Option<bool> {
        None
    }
}

/// θ(x) = x log x. Metric weights 1/x (the Shahshahani metric).
#[derive(Debug, Clone, Copy)]
pub struct Shahshahani;

impl Kernel for Shahshahani {
    fn name(&self) -> &str {
        "shahshahani"
    }
    fn theta(&self, x: f64) -> f64 {
        x * x.ln()
    }
    fn d1(&self, x: f64) -> f64 {
        x.ln() + 1.0
    }
    fn d2(&self, x: f64) -> f64 {
        1.0 / x
    }
    fn d3(&self, x: f64) -> f64 {
        -1.0 / (x * x)
    }
    fn inv_d2(&self, x: f64) -> f64 {
        x
    }
    fn sqrt_d2(&self, x: f64) -> f64 {
        1.0 / x.sqrt()
    }
    fn inv_sqrt_d2(&self, x: f64) -> f64 {
        x.sqrt()
    }
    fn d3_over_d2(&self, x: f64) -> f64 {
        -1.0 / x
    }
    fn d3_over_d2_sq(&self, _x: f64) -> f64 {
        -1.0
    }
    fn phi_prime(&self, x: f64) -> Option<f64> {
        Some(2.0 * x.sqrt())
    }
    fn phi_prime_inv(&self, xi: f64) -> Option<f64> {
        Some(xi * xi / 4.0)
    }
    fn phi_prime_at_zero(&self) -> Option<f64> {
        Some(0.0)
    }
}

/// θ(x) = −log x. Metric weights 1/x².
#[derive(Debug, Clone, Copy)]
pub struct LogBarrier;

impl Kernel for LogBarrier {
    fn name(&self) -> &str {
        "log-barrier"
    }
    fn theta(&self, x: f64) -> f64 {
        -x.ln()
    }
    fn d1(&self, x: f64) -> f64 {
        -1.0 / x
    }
    fn d2(&self, x: f64) -> f64 {
        1.0 / (x * x)
    }
    fn d3(&self, x: f64) -> f64 {
        -2.0 / (x * x * x)
    }
    fn inv_d2(&self, x: f64) -> f64 {
        x * x
    }
    fn sqrt_d2(&self, x: f64) -> f64 {
        1.0 / x
    }
    fn inv_sqrt_d2(&self, x: f64) -> f64 {
        x
    }
    fn d3_over_d2(&self, x: f64) -> f64 {
        -2.0 / x
    }
    fn d3_over_d2_sq(&self, x: f64) -> f64 {
        -2.0 * x
    }
    fn phi_prime(&self, x: f64) -> Option<f64> {
        Some(x.ln())
    }
    fn phi_prime_inv(&self, xi: f64) -> Option<f64> {
        Some(xi.exp())
    }
    fn phi_prime_at_zero(&self) -> Option<f64> {
        Some(f64::NEG_INFINITY)
    }
}

/// Kernel family with θ″(x) = x^(−p). Interpolates between the canonical
/// geometries: p = 1 matches the Shahshahani weights, p = 2 the log-barrier.
/// Satisfies the Legendre steepness condition only for p ≥ 1; smaller
/// exponents are still constructible for classifier experiments.
#[derive(Debug, Clone)]
pub struct PowerKernel {
    p: f64,
    name: String,
}

impl PowerKernel {
    pub fn new(p: f64) -> Result<Self, KernelError> {
        if !(p > 0.0) || !p.is_finite() {
            return Err(KernelError::BadParameter {
                name: format!("power:{p}"),
                reason: "exponent must be a finite positive number".into(),
            });
        }
        Ok(Self {
            p,
            name: format!("power:{p}"),
        })
    }

    pub fn exponent(&self) -> f64 {
        self.p
    }
}

impl Kernel for PowerKernel {
    fn name(&self) -> &str {
        &self.name
    }

    fn theta(&self, x: f64) -> f64 {
        let p = self.p;
        if (p - 1.0).abs() < 1e-12 {
            x * x.ln() - x
        } else if (p - 2.0).abs() < 1e-12 {
            -x.ln()
        } else {
            x.powf(2.0 - p) / ((1.0 - p) * (2.0 - p))
        }
    }

    fn d1(&self, x: f64) -> f64 {
        let p = self.p;
        if (p - 1.0).abs() < 1e-12 {
            x.ln()
        } else {
            x.powf(1.0 - p) / (1.0 - p)
        }
    }

    fn d2(&self, x: f64) -> f64 {
        x.powf(-self.p)
    }

    fn d3(&self, x: f64) -> f64 {
        -self.p * x.powf(-self.p - 1.0)
    }

    fn inv_d2(&self, x: f64) -> f64 {
        x.powf(self.p)
    }

    fn sqrt_d2(&self, x: f64) -> f64 {
        x.powf(-0.5 * self.p)
    }

    fn inv_sqrt_d2(&self, x: f64) -> f64 {
        x.powf(0.5 * self.p)
    }

    fn d3_over_d2(&self, x: f64) -> f64 {
        -self.p / x
    }

    fn d3_over_d2_sq(&self, x: f64) -> f64 {
        -self.p * x.powf(self.p - 1.0)
    }

    fn phi_prime(&self, x: f64) -> Option<f64> {
        let c = 1.0 - 0.5 * self.p;
        if c.abs() < 1e-12 {
            Some(x.ln())
        } else {
            Some(x.powf(c) / c)
        }
    }

    fn phi_prime_inv(&self, xi: f64) -> Option<f64> {
        let c = 1.0 - 0.5 * self.p;
        if c.abs() < 1e-12 {
            Some(xi.exp())
        } else {
            // φ′ is increasing with range (0,∞)·sign(c)/c; c·ξ > 0 on the image
            let t = c * xi;
            if t <= 0.0 {
                Some(0.0)
            } else {
                Some(t.powf(1.0 / c))
            }
        }
    }

    fn phi_prime_at_zero(&self) -> Option<f64> {
        if self.p < 2.0 {
            Some(0.0)
        } else {
            Some(f64::NEG_INFINITY)
        }
    }
}

/// Resolve a kernel by registry name: `shahshahani`, `log-barrier`
/// (alias `log_barrier`), or `power:p` with θ″ = x^(−p).
pub fn resolve(name: &str) -> Result<Arc<dyn Kernel>, KernelError> {
    let trimmed = name.trim();
    match trimmed {
        "shahshahani" => Ok(Arc::new(Shahshahani)),
        "log-barrier" | "log_barrier" => Ok(Arc::new(LogBarrier)),
        _ => {
            if let Some(param) = trimmed.strip_prefix("power:") {
                let p: f64 = param.parse().map_err(|_| KernelError::BadParameter {
                    name: trimmed.to_string(),
                    reason: format!("cannot parse exponent '{param}'"),
                })?;
                Ok(Arc::new(PowerKernel::new(p)?))
            } else {
                Err(KernelError::UnknownKernel(trimmed.to_string()))
            }
        }
    }
}

pub fn builtin_names() -> &'static [&'static str] {
    &["shahshahani", "log-barrier", "power:p"]
}

/// All four derivative values of θ at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelDerivatives {
    pub theta: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

pub fn kernel_eval(kernel: &dyn Kernel, x: f64) -> Result<KernelDerivatives, KernelError> {
    if !(x > 0.0) {
        return Err(KernelError::Domain(x));
    }
    Ok(KernelDerivatives {
        theta: kernel.theta(x),
        d1: kernel.d1(x),
        d2: kernel.d2(x),
        d3: kernel.d3(x),
    })
}

/// Sampled check of the Legendre conditions on a fixed geometric grid
/// x ∈ [1e−8, 1] (25 points): θ″ > 0, θ‴ < 0, θ′ decreasing toward −∞ on a
/// decreasing sample sequence, and (when a closed-form primitive exists)
/// d/dx φ′ = √θ″ to relative 1e−8. The conditions cannot be verified for
/// all x; this is the documented sampled surrogate.
pub fn validate_legendre(kernel: &dyn Kernel) -> Result<(), KernelError> {
    let grid = geometric_grid(1e-8, 1.0, 25);
    let fail = |reason: String| KernelError::NotLegendre {
        name: kernel.name().to_string(),
        reason,
    };

    for &x in &grid {
        let d2 = kernel.d2(x);
        if !(d2 > 0.0) || !d2.is_finite() {
            return Err(fail(format!("θ″({x:e}) = {d2:e} is not positive")));
        }
        let d3 = kernel.d3(x);
        if !(d3 < 0.0) {
            return Err(fail(format!("θ‴({x:e}) = {d3:e} is not negative")));
        }
    }

    // θ′ must decrease without bound along x = 10^-1, 10^-2, ...; as a
    // sampled surrogate for divergence, the deepest sample must be well
    // negative.
    let mut prev = kernel.d1(0.1);
    for k in 2..=12 {
        let x = 10f64.powi(-k);
        let cur = kernel.d1(x);
        if !(cur < prev) {
            return Err(fail(format!(
                "θ′ is not decreasing toward −∞ near 0 (θ′({x:e}) = {cur:e} ≥ {prev:e})"
            )));
        }
        prev = cur;
    }
    if prev > -1.0 {
        return Err(fail(format!(
            "θ′ does not appear to diverge to −∞ (θ′(1e−12) = {prev:e})"
        )));
    }

    if kernel.phi_prime(0.5).is_some() {
        for &x in &grid {
            let h = 1e-6 * x;
            let (lo, hi) = (
                kernel.phi_prime(x - h).unwrap(),
                kernel.phi_prime(x + h).unwrap(),
            );
            let fd = (hi - lo) / (2.0 * h);
            let expected = kernel.sqrt_d2(x);
            let rel = (fd - expected).abs() / expected.abs().max(1e-300);
            if rel > 1e-8 {
                return Err(fail(format!(
                    "dφ′/dx deviates from √θ″ at x = {x:e}: rel err {rel:e}"
                )));
            }
        }
    }

    Ok(())
}

fn geometric_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let (llo, lhi) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (llo + (lhi - llo) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

// ---------------------------------------------------------------------------
// Well-posedness classification (divergence of ∫₀¹ √θ″)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Wellposedness {
    WellPosed,
    IllPosed,
}

impl fmt::Display for Wellposedness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Wellposedness::WellPosed => write!(f, "WellPosed"),
            Wellposedness::IllPosed => write!(f, "IllPosed"),
        }
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct PartialIntegral {
    pub epsilon: f64,
    pub value: f64,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct WellposednessReport {
    pub kernel: String,
    pub classification: Wellposedness,
    /// ∫_ε^1 √θ″ for ε = 1e−2, 1e−4, …, 1e−12 (empty when the analytic
    /// override decided the classification).
    pub partial_integrals: Vec<PartialIntegral>,
    pub analytic_override: bool,
    pub note: String,
}

/// Classify the inertial dynamics generated by `kernel` as well- or
/// ill-posed. An analytic override on the kernel wins; otherwise the partial
/// integrals ∫_ε^1 √θ″ are computed by adaptive Gauss–Kronrod quadrature for
/// ε = 1e−2 … 1e−12 and the sequence is tested for convergence: outright
/// flattening (successive difference below 1e−6 of the value) or geometric
/// increment decay means a finite integral (IllPosed); non-decaying
/// increments mean divergence (WellPosed).
pub fn classify_wellposedness(kernel: &dyn Kernel) -> Result<WellposednessReport, KernelError> {
    if let Some(wp) = kernel.analytic_wellposed() {
        let classification = if wp {
            Wellposedness::WellPosed
        } else {
            Wellposedness::IllPosed
        };
        return Ok(WellposednessReport {
            kernel: kernel.name().to_string(),
            classification,
            partial_integrals: Vec::new(),
            analytic_override: true,
            note: "analytic override".into(),
        });
    }

    let epsilons: Vec<f64> = (1..=6).map(|k| 10f64.powi(-2 * k)).collect();
    let mut partials = Vec::with_capacity(epsilons.len());
    for &eps in &epsilons {
        let value = integral_sqrt_d2(kernel, eps)?;
        if !value.is_finite() {
            return Err(KernelError::Inconclusive {
                name: kernel.name().to_string(),
                reason: format!("partial integral on [{eps:e}, 1] is not finite"),
            });
        }
        partials.push(PartialIntegral {
            epsilon: eps,
            value,
        });
    }

    let values: Vec<f64> = partials.iter().map(|p| p.value).collect();
    let diffs: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    if diffs.iter().any(|&d| d < -1e-9 * values.last().unwrap().abs()) {
        return Err(KernelError::Inconclusive {
            name: kernel.name().to_string(),
            reason: "partial integrals are not monotone in ε".into(),
        });
    }

    let last = *values.last().unwrap();
    let last_diff = *diffs.last().unwrap();

    // Outright flattening per the ε-sequence.
    if last_diff < 1e-6 * last.abs() {
        return Ok(WellposednessReport {
            kernel: kernel.name().to_string(),
            classification: Wellposedness::IllPosed,
            partial_integrals: partials,
            analytic_override: false,
            note: format!("partial integrals converge (last increment {last_diff:e})"),
        });
    }

    // Increment ratio test: a geometric tail sums to a finite integral.
    let ratios: Vec<f64> = diffs
        .windows(2)
        .filter(|w| w[0] > 0.0)
        .map(|w| w[1] / w[0])
        .collect();
    if ratios.is_empty() {
        return Err(KernelError::Inconclusive {
            name: kernel.name().to_string(),
            reason: "increments vanish without stabilizing".into(),
        });
    }
    let tail_ratio = *ratios.last().unwrap();
    if !tail_ratio.is_finite() {
        return Err(KernelError::Inconclusive {
            name: kernel.name().to_string(),
            reason: format!("increment ratio {tail_ratio} is not finite"),
        });
    }

    if tail_ratio < 0.995 {
        let tail_bound = last_diff * tail_ratio / (1.0 - tail_ratio);
        Ok(WellposednessReport {
            kernel: kernel.name().to_string(),
            classification: Wellposedness::IllPosed,
            partial_integrals: partials,
            analytic_override: false,
            note: format!(
                "increments decay geometrically (ratio {tail_ratio:.6}); remaining tail ≤ {tail_bound:e}"
            ),
        })
    } else {
        Ok(WellposednessReport {
            kernel: kernel.name().to_string(),
            classification: Wellposedness::WellPosed,
            partial_integrals: partials,
            analytic_override: false,
            note: format!(
                "increments do not decay (ratio {tail_ratio:.6}); integral grows without bound"
            ),
        })
    }
}

/// ∫_ε^1 √θ″(x) dx by adaptive G7-K15 after the substitution x = e^u, which
/// turns power singularities at 0 into smooth exponentials.
pub(crate) fn integral_sqrt_d2(kernel: &dyn Kernel, eps: f64) -> Result<f64, KernelError> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(KernelError::Domain(eps));
    }
    let f = |u: f64| {
        let x = u.exp();
        kernel.sqrt_d2(x) * x
    };
    adaptive_gk(&f, eps.ln(), 0.0, 1e-12, 1e-10, 60).ok_or_else(|| KernelError::Inconclusive {
        name: kernel.name().to_string(),
        reason: format!("quadrature failed on [{eps:e}, 1]"),
    })
}

// G7-K15 nodes/weights (positive half; node 0 listed once).
const KRONROD_NODES: [f64; 8] = [
    0.0,
    0.207_784_955_007_898_5,
    0.405_845_151_377_397_2,
    0.586_087_235_467_691_1,
    0.741_531_185_599_394_4,
    0.864_864_423_359_769_1,
    0.949_107_912_342_758_5,
    0.991_455_371_120_813_0,
];
const KRONROD_WEIGHTS: [f64; 8] = [
    0.209_482_141_084_727_8,
    0.204_432_940_075_298_9,
    0.190_350_578_064_785_4,
    0.169_004_726_639_267_9,
    0.140_653_259_715_525_2,
    0.104_790_010_322_250_2,
    0.063_092_092_629_978_56,
    0.022_935_322_010_529_22,
];
const GAUSS_WEIGHTS: [f64; 4] = [
    0.417_959_183_673_469_4,
    0.381_830_050_505_118_9,
    0.279_705_391_489_276_7,
    0.129_484_966_168_869_7,
];

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = KRONROD_WEIGHTS[0] * fc;
    let mut gauss = GAUSS_WEIGHTS[0] * fc;
    for i in 1..8 {
        let dx = half * KRONROD_NODES[i];
        let fsum = f(center - dx) + f(center + dx);
        kronrod += KRONROD_WEIGHTS[i] * fsum;
        if i % 2 == 0 {
            gauss += GAUSS_WEIGHTS[i / 2] * fsum;
        }
    }
    let value = kronrod * half;
    let err = ((kronrod - gauss) * half).abs();
    (value, err)
}

fn adaptive_gk(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_depth: u32,
) -> Option<f64> {
    fn recurse(
        f: &impl Fn(f64) -> f64,
        a: f64,
        b: f64,
        tol: f64,
        depth: u32,
    ) -> Option<f64> {
        let (value, err) = gk15(f, a, b);
        if !value.is_finite() {
            return None;
        }
        if err <= tol || depth == 0 {
            if depth == 0 && err > tol.max(1e-9 * value.abs()) {
                return None;
            }
            return Some(value);
        }
        let mid = 0.5 * (a + b);
        let left = recurse(f, a, mid, 0.5 * tol, depth - 1)?;
        let right = recurse(f, mid, b, 0.5 * tol, depth - 1)?;
        Some(left + right)
    }
    let (coarse, _) = gk15(f, a, b);
    let tol = abs_tol.max(rel_tol * coarse.abs());
    recurse(f, a, b, tol, max_depth)
}

/// Numeric Euclidean primitive for kernels without a closed form:
/// φ′(x) = ∫_1^x √θ″ with base point φ′(1) = 0 (the chart is defined up to
/// an additive constant).
pub(crate) fn phi_prime_numeric(kernel: &dyn Kernel, x: f64) -> Result<f64, KernelError> {
    if !(x > 0.0) {
        return Err(KernelError::Domain(x));
    }
    if (x - 1.0).abs() < 1e-300 {
        return Ok(0.0);
    }
    let (lo, hi, sign) = if x < 1.0 { (x, 1.0, -1.0) } else { (1.0, x, 1.0) };
    let f = |u: f64| {
        let t = u.exp();
        kernel.sqrt_d2(t) * t
    };
    let val = adaptive_gk(&f, lo.ln(), hi.ln(), 1e-13, 1e-11, 60).ok_or_else(|| {
        KernelError::Inconclusive {
            name: kernel.name().to_string(),
            reason: format!("quadrature for φ′({x:e}) failed"),
        }
    })?;
    Ok(sign * val)
}
