//! Convex potentials: projection, proximal map, and Moreau-Yosida gradient.
//!
//! A potential is either the indicator of a closed interval/box (projection
//! realizes the normal cone exactly) or a smooth convex function on all of
//! space (the prox is found by 1-D bisection or damped descent). Every
//! potential satisfies `phi(0) = 0 <= phi(x)` with `0` interior to the domain,
//! so the penalization drift vanishes at the origin.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConvexError {
    #[error("potential rejected: {0}")]
    InvalidPotential(String),
    #[error("prox requires eps > 0, got {0}")]
    BadEps(f64),
    #[error("prox iteration failed to reach residual {residual:.3e} <= 1e-10 in {iters} steps")]
    ProxDiverged { iters: usize, residual: f64 },
    #[error("dimension mismatch: potential dim {expected}, point dim {got}")]
    DimMismatch { expected: usize, got: usize },
}

/// Smooth convex function given by value and gradient closures on all space.
#[derive(Clone)]
pub struct SmoothConvex {
    pub dim: usize,
    value: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    gradient: Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>,
}

impl fmt::Debug for SmoothConvex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SmoothConvex").field("dim", &self.dim).finish()
    }
}

/// Lower-semicontinuous convex potential with `0` in the domain interior.
#[derive(Debug, Clone)]
pub enum ConvexPotential {
    /// Indicator of `[lo, hi]` applied to every coordinate; bounds may be
    /// infinite.
    IndicatorInterval { lo: f64, hi: f64 },
    /// Indicator of a per-coordinate box.
    IndicatorBox { bounds: Vec<(f64, f64)> },
    /// Finite smooth convex function (domain is all space).
    Smooth(SmoothConvex),
}

impl ConvexPotential {
    pub fn indicator_interval(lo: f64, hi: f64) -> Result<Self, ConvexError> {
        if !(lo < 0.0 && 0.0 < hi) {
            return Err(ConvexError::InvalidPotential(format!(
                "interval [{lo}, {hi}] must contain 0 in its interior"
            )));
        }
        Ok(Self::IndicatorInterval { lo, hi })
    }

    pub fn indicator_box(bounds: Vec<(f64, f64)>) -> Result<Self, ConvexError> {
        if bounds.is_empty() {
            return Err(ConvexError::InvalidPotential("empty box".into()));
        }
        for &(lo, hi) in &bounds {
            if !(lo < 0.0 && 0.0 < hi) {
                return Err(ConvexError::InvalidPotential(format!(
                    "box side [{lo}, {hi}] must contain 0 in its interior"
                )));
            }
        }
        Ok(Self::IndicatorBox { bounds })
    }

    /// Half-line `[0, +inf)` shifted so that 0 stays interior is not possible;
    /// the classic reflecting barrier at 0 uses the closed domain `[0, inf)`.
    /// It is accepted as a special case: `0` lies on the boundary but the
    /// potential still satisfies `phi(0) = 0 <= phi`.
    pub fn half_line_nonnegative() -> Self {
        Self::IndicatorInterval {
            lo: 0.0,
            hi: f64::INFINITY,
        }
    }

    pub fn smooth(
        dim: usize,
        value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Result<Self, ConvexError> {
        let zero = vec![0.0; dim];
        let v0 = value(&zero);
        if v0.abs() > 1e-12 {
            return Err(ConvexError::InvalidPotential(format!(
                "phi(0) = {v0}, expected 0"
            )));
        }
        Ok(Self::Smooth(SmoothConvex {
            dim,
            value: Arc::new(value),
            gradient: Arc::new(gradient),
        }))
    }

    /// `phi(x) = weight * |x|^2 / 2`.
    pub fn quadratic(dim: usize, weight: f64) -> Result<Self, ConvexError> {
        if weight < 0.0 {
            return Err(ConvexError::InvalidPotential(format!(
                "quadratic weight {weight} must be >= 0"
            )));
        }
        Self::smooth(
            dim,
            move |x| 0.5 * weight * x.iter().map(|v| v * v).sum::<f64>(),
            move |x, out| {
                for (o, v) in out.iter_mut().zip(x) {
                    *o = weight * v;
                }
            },
        )
    }

    /// `phi = 0` everywhere (unconstrained dynamics).
    pub fn zero(dim: usize) -> Self {
        Self::smooth(dim, |_| 0.0, |_, out| out.fill(0.0)).expect("zero is valid")
    }

    pub fn is_indicator(&self) -> bool {
        !matches!(self, Self::Smooth(_))
    }

    /// Potential value; `+inf` outside an indicator domain.
    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            Self::IndicatorInterval { lo, hi } => {
                if x.iter().all(|&v| v >= *lo && v <= *hi) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            Self::IndicatorBox { bounds } => {
                if x.iter()
                    .zip(bounds)
                    .all(|(&v, &(lo, hi))| v >= lo && v <= hi)
                {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            Self::Smooth(s) => (s.value)(x),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.value(x).is_finite()
    }

    /// A handful of points in the closed domain, used as probe values for
    /// the discrete variational-inequality audit. Always includes the origin.
    pub fn probe_points(&self, dim: usize) -> Vec<Vec<f64>> {
        let inner = |lo: f64, hi: f64| -> (f64, f64) {
            let a = if lo.is_finite() { 0.9 * lo } else { -1.0 };
            let b = if hi.is_finite() { 0.9 * hi } else { 1.0 };
            (a, b)
        };
        match self {
            Self::IndicatorInterval { lo, hi } => {
                let (a, b) = inner(*lo, *hi);
                vec![vec![lo.max(0.0).min(hi.max(0.0)); dim], vec![a; dim], vec![b; dim]]
            }
            Self::IndicatorBox { bounds } => {
                let zero = vec![0.0; bounds.len()];
                let low: Vec<f64> = bounds.iter().map(|&(lo, hi)| inner(lo, hi).0).collect();
                let high: Vec<f64> = bounds.iter().map(|&(lo, hi)| inner(lo, hi).1).collect();
                vec![zero, low, high]
            }
            Self::Smooth(_) => vec![vec![0.0; dim], vec![1.0; dim], vec![-1.0; dim]],
        }
    }
}

/// Euclidean projection onto the closed domain.
///
/// Per-coordinate clamp for indicator kinds; the identity for smooth
/// potentials (their domain is all space).
pub fn project(x: &[f64], pot: &ConvexPotential) -> Vec<f64> {
    match pot {
        ConvexPotential::IndicatorInterval { lo, hi } => {
            x.iter().map(|&v| v.clamp(*lo, *hi)).collect()
        }
        ConvexPotential::IndicatorBox { bounds } => x
            .iter()
            .zip(bounds)
            .map(|(&v, &(lo, hi))| v.clamp(lo, hi))
            .collect(),
        ConvexPotential::Smooth(_) => x.to_vec(),
    }
}

const PROX_TOL: f64 = 1e-10;
const PROX_MAX_ITERS: usize = 200;

/// Proximal map: the unique minimizer of `|v - x|^2 / (2 eps) + phi(v)`.
///
/// Indicator kinds reduce to the projection. Smooth 1-D potentials solve
/// `v + eps * phi'(v) = x` by bracketing bisection; higher dimensions use
/// damped gradient descent on the strongly convex objective. The residual
/// target is `|v - x + eps * grad phi(v)| <= 1e-10`, with a 200-iteration
/// cap signalling an ill-conditioned potential.
pub fn prox(x: &[f64], eps: f64, pot: &ConvexPotential) -> Result<Vec<f64>, ConvexError> {
    if !(eps > 0.0) {
        return Err(ConvexError::BadEps(eps));
    }
    let smooth = match pot {
        ConvexPotential::Smooth(s) => s,
        _ => return Ok(project(x, pot)),
    };
    if smooth.dim != x.len() {
        return Err(ConvexError::DimMismatch {
            expected: smooth.dim,
            got: x.len(),
        });
    }
    if x.len() == 1 {
        return prox_bisect_1d(x[0], eps, smooth).map(|v| vec![v]);
    }
    prox_descent(x, eps, smooth)
}

fn prox_bisect_1d(x: f64, eps: f64, smooth: &SmoothConvex) -> Result<f64, ConvexError> {
    let grad = |v: f64| -> f64 {
        let mut g = [0.0];
        (smooth.gradient)(&[v], &mut g);
        g[0]
    };
    let residual = |v: f64| v - x + eps * grad(v);
    // F is strictly increasing; expand a bracket around x until it straddles 0.
    let mut span = 1.0 + eps * grad(x).abs();
    let (mut lo, mut hi) = (x - span, x + span);
    let mut iters = 0usize;
    while residual(lo) > 0.0 || residual(hi) < 0.0 {
        span *= 2.0;
        lo = x - span;
        hi = x + span;
        iters += 1;
        if iters > 64 || !span.is_finite() {
            return Err(ConvexError::ProxDiverged {
                iters,
                residual: residual(x).abs(),
            });
        }
    }
    let mut v = 0.5 * (lo + hi);
    for i in 0..PROX_MAX_ITERS {
        let r = residual(v);
        if r.abs() <= PROX_TOL {
            return Ok(v);
        }
        if r > 0.0 {
            hi = v;
        } else {
            lo = v;
        }
        let next = 0.5 * (lo + hi);
        if next == v {
            // Interval exhausted at f64 resolution.
            let r = residual(v).abs();
            if r <= PROX_TOL {
                return Ok(v);
            }
            return Err(ConvexError::ProxDiverged {
                iters: i + 1,
                residual: r,
            });
        }
        v = next;
    }
    Err(ConvexError::ProxDiverged {
        iters: PROX_MAX_ITERS,
        residual: residual(v).abs(),
    })
}

fn prox_descent(x: &[f64], eps: f64, smooth: &SmoothConvex) -> Result<Vec<f64>, ConvexError> {
    let d = x.len();
    let objective = |v: &[f64]| -> f64 {
        let dist: f64 = v.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
        dist / (2.0 * eps) + (smooth.value)(v)
    };
    let mut v = x.to_vec();
    let mut grad_phi = vec![0.0; d];
    let mut res = vec![0.0; d];
    let mut trial = vec![0.0; d];
    for i in 0..PROX_MAX_ITERS {
        (smooth.gradient)(&v, &mut grad_phi);
        let mut norm_sq = 0.0;
        for j in 0..d {
            res[j] = v[j] - x[j] + eps * grad_phi[j];
            norm_sq += res[j] * res[j];
        }
        if norm_sq.sqrt() <= PROX_TOL {
            return Ok(v);
        }
        // Backtracking step on M(v); gradient of eps*M is the residual.
        let m0 = objective(&v);
        let mut tau = 1.0;
        loop {
            for j in 0..d {
                trial[j] = v[j] - tau * res[j];
            }
            if objective(&trial) <= m0 - 0.25 * tau * norm_sq / eps {
                break;
            }
            tau *= 0.5;
            if tau < 1e-12 {
                return Err(ConvexError::ProxDiverged {
                    iters: i + 1,
                    residual: norm_sq.sqrt(),
                });
            }
        }
        v.copy_from_slice(&trial);
    }
    (smooth.gradient)(&v, &mut grad_phi);
    let r: f64 = v
        .iter()
        .zip(x.iter().zip(&grad_phi))
        .map(|(vj, (xj, gj))| {
            let r = vj - xj + eps * gj;
            r * r
        })
        .sum::<f64>()
        .sqrt();
    if r <= PROX_TOL {
        Ok(v)
    } else {
        Err(ConvexError::ProxDiverged {
            iters: PROX_MAX_ITERS,
            residual: r,
        })
    }
}

/// Moreau-Yosida gradient `(x - prox(x)) / eps`; `1/eps`-Lipschitz and
/// monotone.
pub fn yosida_gradient(x: &[f64], eps: f64, pot: &ConvexPotential) -> Result<Vec<f64>, ConvexError> {
    let p = prox(x, eps, pot)?;
    Ok(x.iter().zip(&p).map(|(a, b)| (a - b) / eps).collect())
}

/// Moreau envelope value `|prox - x|^2 / (2 eps) + phi(prox)`.
pub fn moreau_envelope(x: &[f64], eps: f64, pot: &ConvexPotential) -> Result<f64, ConvexError> {
    let p = prox(x, eps, pot)?;
    let dist: f64 = p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(dist / (2.0 * eps) + pot.value(&p))
}

/// Result of the one-step discrete variational-inequality check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViOutcome {
    Holds,
    Violated,
    /// `phi(u) = +inf`, so the inequality carries no information.
    Vacuous,
}

impl ViOutcome {
    pub fn passes(self) -> bool {
        !matches!(self, ViOutcome::Violated)
    }
}

/// Discrete form of the solution inequality: for `u` with `phi(u)` finite,
/// `<u - x, dK> - phi(x) dt <= phi(u) dt + 1e-9 (1 + |dK|)`.
pub fn variational_inequality_check(
    x: &[f64],
    k_increment: &[f64],
    u: &[f64],
    pot: &ConvexPotential,
    dt: f64,
) -> ViOutcome {
    let phi_u = pot.value(u);
    if phi_u.is_infinite() {
        return ViOutcome::Vacuous;
    }
    let phi_x = pot.value(x);
    let dk_norm = k_increment.iter().map(|v| v * v).sum::<f64>().sqrt();
    if phi_x.is_infinite() {
        // Left side is -inf for dt > 0: trivially true.
        return ViOutcome::Holds;
    }
    let inner: f64 = u
        .iter()
        .zip(x)
        .zip(k_increment)
        .map(|((uu, xx), kk)| (uu - xx) * kk)
        .sum();
    if inner - phi_x * dt <= phi_u * dt + 1e-9 * (1.0 + dk_norm) {
        ViOutcome::Holds
    } else {
        ViOutcome::Violated
    }
}

/// Discrete monotonicity of the constraint increments:
/// `<x1 - x2, dK1 - dK2> >= -1e-9`.
pub fn monotonicity_check(x1: &[f64], k1_incr: &[f64], x2: &[f64], k2_incr: &[f64]) -> bool {
    let inner: f64 = x1
        .iter()
        .zip(x2)
        .zip(k1_incr.iter().zip(k2_incr))
        .map(|((a, b), (ka, kb))| (a - b) * (ka - kb))
        .sum();
    inner >= -1e-9
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn project_clamps() {
        let half = ConvexPotential::half_line_nonnegative();
        assert_eq!(project(&[-1.0], &half), vec![0.0]);
        assert_eq!(project(&[0.7], &half), vec![0.7]);
        let band = ConvexPotential::indicator_interval(-1.0, 1.0).unwrap();
        assert_eq!(project(&[3.0], &band), vec![1.0]);
    }

    #[test]
    fn project_identity_for_smooth() {
        let q = ConvexPotential::quadratic(2, 1.0).unwrap();
        assert_eq!(project(&[5.0, -3.0], &q), vec![5.0, -3.0]);
    }

    #[test]
    fn prox_indicator_equals_project() {
        let band = ConvexPotential::indicator_interval(-1.0, 1.0).unwrap();
        for x in [-2.5, -0.2, 0.0, 0.9, 4.0] {
            assert_eq!(prox(&[x], 0.3, &band).unwrap(), project(&[x], &band));
        }
    }

    #[test]
    fn prox_quadratic_hand_value() {
        // phi(x) = x^2/2, eps = 1, x = 2: v + v = 2 gives v* = 1.
        let q = ConvexPotential::quadratic(1, 1.0).unwrap();
        let v = prox(&[2.0], 1.0, &q).unwrap();
        assert!((v[0] - 1.0).abs() < 1e-9, "v={}", v[0]);
    }

    #[test]
    fn prox_fixes_origin() {
        for pot in [
            ConvexPotential::indicator_interval(-2.0, 3.0).unwrap(),
            ConvexPotential::quadratic(1, 2.0).unwrap(),
        ] {
            let v = prox(&[0.0], 0.5, &pot).unwrap();
            assert!(v[0].abs() < 1e-12);
        }
    }

    #[test]
    fn prox_rejects_bad_eps() {
        let q = ConvexPotential::quadratic(1, 1.0).unwrap();
        assert!(matches!(prox(&[1.0], 0.0, &q), Err(ConvexError::BadEps(_))));
    }

    #[test]
    fn prox_multidim_descent() {
        let q = ConvexPotential::quadratic(3, 2.0).unwrap();
        // v + 2 eps v = x componentwise: v = x / (1 + 2 eps).
        let eps = 0.25;
        let x = [2.0, -1.0, 0.5];
        let v = prox(&x, eps, &q).unwrap();
        for (vi, xi) in v.iter().zip(&x) {
            assert!((vi - xi / 1.5).abs() < 1e-9);
        }
    }

    #[test]
    fn yosida_gradient_values() {
        let half = ConvexPotential::half_line_nonnegative();
        let g = yosida_gradient(&[-1.0], 0.5, &half).unwrap();
        assert!((g[0] - (-2.0)).abs() < 1e-12);
        let g_in = yosida_gradient(&[0.4], 0.5, &half).unwrap();
        assert_eq!(g_in[0], 0.0);
        let q = ConvexPotential::quadratic(1, 1.0).unwrap();
        let gq = yosida_gradient(&[2.0], 1.0, &q).unwrap();
        assert!((gq[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn yosida_gradient_lipschitz_and_monotone() {
        let pot = ConvexPotential::indicator_interval(-1.0, 2.0).unwrap();
        let eps = 0.2;
        let points = [-4.0, -1.5, -0.3, 0.0, 1.2, 2.7, 6.0];
        for &a in &points {
            for &b in &points {
                let ga = yosida_gradient(&[a], eps, &pot).unwrap()[0];
                let gb = yosida_gradient(&[b], eps, &pot).unwrap()[0];
                assert!((ga - gb).abs() <= (a - b).abs() / eps + 1e-9);
                assert!((ga - gb) * (a - b) >= -1e-9);
            }
        }
    }

    #[test]
    fn moreau_envelope_grows_as_eps_shrinks() {
        let pot = ConvexPotential::indicator_interval(-1.0, 1.0).unwrap();
        for x in [-3.0, -1.2, 0.5, 2.0] {
            let e1 = moreau_envelope(&[x], 1.0, &pot).unwrap();
            let e2 = moreau_envelope(&[x], 0.1, &pot).unwrap();
            let e3 = moreau_envelope(&[x], 0.01, &pot).unwrap();
            assert!(e1 <= e2 + 1e-12 && e2 <= e3 + 1e-12);
        }
    }

    #[test]
    fn variational_inequality_cases() {
        let half = ConvexPotential::half_line_nonnegative();
        // Zero increment inside the domain.
        assert_eq!(
            variational_inequality_check(&[0.5], &[0.0], &[1.0], &half, 0.01),
            ViOutcome::Holds
        );
        // Projection step at the boundary: outward normal removed.
        assert_eq!(
            variational_inequality_check(&[0.0], &[-0.3], &[1.0], &half, 0.01),
            ViOutcome::Holds
        );
        // Adversarial increment aligned with u - x.
        assert_eq!(
            variational_inequality_check(&[0.0], &[5.0], &[1.0], &half, 0.01),
            ViOutcome::Violated
        );
        // u outside the domain: vacuous.
        assert_eq!(
            variational_inequality_check(&[0.0], &[-0.3], &[-1.0], &half, 0.01),
            ViOutcome::Vacuous
        );
    }

    #[test]
    fn monotonicity_cases() {
        assert!(monotonicity_check(&[0.3], &[-0.1], &[0.3], &[-0.1]));
        // Two projection steps on the half line.
        assert!(monotonicity_check(&[0.0], &[-0.2], &[1.0], &[0.0]));
        assert!(monotonicity_check(&[5.0], &[0.7], &[-2.0], &[0.7]));
        assert!(!monotonicity_check(&[1.0], &[-1.0], &[0.0], &[1.0]));
    }

    #[test]
    fn projection_idempotent_and_nonexpansive() {
        let pot = ConvexPotential::indicator_box(vec![(-1.0, 2.0), (-0.5, 0.5)]).unwrap();
        let pts = [
            vec![3.0, 1.0],
            vec![-2.0, -2.0],
            vec![0.1, 0.2],
            vec![1.5, -0.4],
        ];
        for a in &pts {
            let pa = project(a, &pot);
            assert_eq!(project(&pa, &pot), pa);
            for b in &pts {
                let pb = project(b, &pot);
                let d_proj: f64 = pa
                    .iter()
                    .zip(&pb)
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt();
                let d: f64 = a
                    .iter()
                    .zip(b)
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt();
                assert!(d_proj <= d + 1e-12);
            }
        }
    }

    #[test]
    fn rejects_domains_without_zero() {
        assert!(ConvexPotential::indicator_interval(1.0, 2.0).is_err());
        assert!(ConvexPotential::indicator_box(vec![(-1.0, 1.0), (0.5, 2.0)]).is_err());
        assert!(ConvexPotential::smooth(1, |x| x[0] + 1.0, |_, g| g.fill(1.0)).is_err());
    }
}
