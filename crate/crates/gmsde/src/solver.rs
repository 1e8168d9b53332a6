//! Euler-type integration of the multi-valued inclusion, producing `(X, K)`
//! trajectories.
//!
//! Per step the explicit Euler predictor evaluates all coefficients at the
//! left endpoint,
//! `x_tilde = x_n + f(t_n,x_n) h + g(t_n,x_n) dqv_n + sigma(t_n,x_n) dB_n`,
//! and the constraint force is applied by either scheme:
//!
//! * `Projection`: `x_{n+1} = project(x_tilde)`, `dK_n = x_tilde - x_{n+1}`,
//!   the discrete Skorokhod decomposition (states stay in the closed domain
//!   exactly and the one-step variational inequality holds by construction);
//! * `Penalization(eps_yosida)`: `x_{n+1} = x_tilde - grad_eps(x_n) h` with
//!   the Moreau-Yosida gradient, requiring `h <= eps_yosida / 2` so the
//!   `1/eps`-Lipschitz drift cannot overshoot into oscillation.
//!
//! The rescaled variant multiplies drifts and the constraint force by `eps`
//! and the diffusion by `sqrt(eps)`.

use thiserror::Error;

use crate::coeffs::CoefficientTriple;
use crate::convex::{
    self, monotonicity_check, variational_inequality_check, ConvexError, ConvexPotential,
    ViOutcome,
};
use crate::gbm::{GPath, TimeGrid};
use crate::gexp::{self, GexpError, VolatilityBand};

const BLOWUP_LIMIT: f64 = 1e12;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("initial state is outside the closed domain of the potential")]
    X0OutsideDomain,
    #[error("state blow-up (|x| > 1e12 or non-finite) at step {step}")]
    BlowUp { step: usize },
    #[error("penalization step size h={h} violates h <= eps_yosida/2 = {limit}")]
    StepTooLarge { h: f64, limit: f64 },
    #[error("dimension mismatch: {0}")]
    Dims(String),
    #[error("path has {path_steps} steps but grid has {grid_steps}")]
    GridMismatch {
        path_steps: usize,
        grid_steps: usize,
    },
    #[error("averaging scale must lie in (0, 1], got {0}")]
    BadAveragingScale(f64),
    #[error(transparent)]
    Convex(#[from] ConvexError),
    #[error(transparent)]
    Gexp(#[from] GexpError),
    #[error("moment order must satisfy p >= 1, got {0}")]
    BadMomentOrder(f64),
    #[error("no solution paths supplied")]
    NoPaths,
}

/// Constraint realization used by the stepper.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scheme {
    Projection,
    Penalization { eps_yosida: f64 },
}

/// A multi-valued SDE problem: coefficients, potential, initial state, band,
/// scheme and grid.
#[derive(Debug, Clone)]
pub struct MsdeProblem {
    pub coeffs: CoefficientTriple,
    pub potential: ConvexPotential,
    pub x0: Vec<f64>,
    pub band: VolatilityBand,
    pub scheme: Scheme,
    pub grid: TimeGrid,
}

impl MsdeProblem {
    pub fn new(
        coeffs: CoefficientTriple,
        potential: ConvexPotential,
        x0: Vec<f64>,
        band: VolatilityBand,
        scheme: Scheme,
        grid: TimeGrid,
    ) -> Result<Self, SolverError> {
        if x0.len() != coeffs.state_dim {
            return Err(SolverError::Dims(format!(
                "x0 has {} entries, coefficients expect {}",
                x0.len(),
                coeffs.state_dim
            )));
        }
        if !potential.contains(&x0) {
            return Err(SolverError::X0OutsideDomain);
        }
        if let Scheme::Penalization { eps_yosida } = scheme {
            if !(eps_yosida > 0.0) {
                return Err(SolverError::Dims(format!(
                    "eps_yosida must be > 0, got {eps_yosida}"
                )));
            }
            let h = grid.step();
            if h > eps_yosida / 2.0 {
                return Err(SolverError::StepTooLarge {
                    h,
                    limit: eps_yosida / 2.0,
                });
            }
        }
        Ok(Self {
            coeffs,
            potential,
            x0,
            band,
            scheme,
            grid,
        })
    }
}

/// Discrete `(X, K)` trajectory. `x` and `k` are step-major with `state_dim`
/// entries per grid point; `k` accumulates the applied constraint increments
/// starting from zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionPath {
    pub x: Vec<f64>,
    pub k: Vec<f64>,
    /// Total variation of `K`: the sum of `|dK_n|` over steps.
    pub k_variation: f64,
    /// Largest single-step `|dK_n|`.
    pub max_step_k: f64,
    pub state_dim: usize,
}

impl SolutionPath {
    pub fn n_steps(&self) -> usize {
        self.x.len() / self.state_dim - 1
    }

    #[inline]
    pub fn state_at(&self, n: usize) -> &[f64] {
        &self.x[n * self.state_dim..(n + 1) * self.state_dim]
    }

    #[inline]
    pub fn k_at(&self, n: usize) -> &[f64] {
        &self.k[n * self.state_dim..(n + 1) * self.state_dim]
    }

    pub fn terminal(&self) -> &[f64] {
        self.state_at(self.n_steps())
    }

    /// Euclidean norm of the state at grid point `n`.
    pub fn state_norm(&self, n: usize) -> f64 {
        self.state_at(n).iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `sup_n |x_n|^{2p}` along the path.
    pub fn sup_state_power(&self, p: f64) -> f64 {
        let mut worst = 0.0f64;
        for n in 0..=self.n_steps() {
            worst = worst.max(self.state_norm(n));
        }
        worst.powf(2.0 * p)
    }
}

fn check_inputs(problem: &MsdeProblem, gpath: &GPath) -> Result<(), SolverError> {
    if gpath.noise_dim != problem.coeffs.noise_dim {
        return Err(SolverError::Dims(format!(
            "path noise dim {} vs coefficient noise dim {}",
            gpath.noise_dim, problem.coeffs.noise_dim
        )));
    }
    if gpath.n_steps() != problem.grid.n_steps {
        return Err(SolverError::GridMismatch {
            path_steps: gpath.n_steps(),
            grid_steps: problem.grid.n_steps,
        });
    }
    Ok(())
}

fn solve_scaled(
    problem: &MsdeProblem,
    gpath: &GPath,
    eps_avg: f64,
) -> Result<SolutionPath, SolverError> {
    check_inputs(problem, gpath)?;
    let d = problem.coeffs.state_dim;
    let m = problem.coeffs.noise_dim;
    let n_steps = problem.grid.n_steps;
    let h = problem.grid.step();
    let drift_scale = eps_avg;
    let diff_scale = eps_avg.sqrt();

    let mut x = vec![0.0; (n_steps + 1) * d];
    let mut k = vec![0.0; (n_steps + 1) * d];
    x[..d].copy_from_slice(&problem.x0);

    let mut f_buf = vec![0.0; d];
    let mut g_buf = vec![0.0; d];
    let mut s_buf = vec![0.0; d * m];
    let mut x_tilde = vec![0.0; d];
    let mut dk = vec![0.0; d];
    let mut k_variation = 0.0f64;
    let mut max_step_k = 0.0f64;

    for n in 0..n_steps {
        let t = problem.grid.t(n);
        let (x_cur, x_next) = {
            let (head, tail) = x.split_at_mut((n + 1) * d);
            (&head[n * d..], &mut tail[..d])
        };
        problem
            .coeffs
            .eval_all(t, x_cur, &mut f_buf, &mut g_buf, &mut s_buf);
        let db = gpath.db_at(n);
        let dqv = gpath.dqv[n];
        for i in 0..d {
            let mut diffusion = 0.0;
            let row = &s_buf[i * m..(i + 1) * m];
            for j in 0..m {
                diffusion += row[j] * db[j];
            }
            x_tilde[i] = x_cur[i]
                + drift_scale * f_buf[i] * h
                + drift_scale * g_buf[i] * dqv
                + diff_scale * diffusion;
        }
        match problem.scheme {
            Scheme::Projection => {
                let projected = convex::project(&x_tilde, &problem.potential);
                for i in 0..d {
                    dk[i] = x_tilde[i] - projected[i];
                    x_next[i] = projected[i];
                }
            }
            Scheme::Penalization { eps_yosida } => {
                let grad = convex::yosida_gradient(x_cur, eps_yosida, &problem.potential)?;
                for i in 0..d {
                    dk[i] = drift_scale * grad[i] * h;
                    x_next[i] = x_tilde[i] - dk[i];
                }
            }
        }
        let mut norm_sq = 0.0;
        let mut state_sq = 0.0;
        for i in 0..d {
            k[(n + 1) * d + i] = k[n * d + i] + dk[i];
            norm_sq += dk[i] * dk[i];
            state_sq += x_next[i] * x_next[i];
        }
        if !state_sq.is_finite() || state_sq > BLOWUP_LIMIT * BLOWUP_LIMIT {
            return Err(SolverError::BlowUp { step: n });
        }
        let dk_norm = norm_sq.sqrt();
        k_variation += dk_norm;
        max_step_k = max_step_k.max(dk_norm);
    }

    Ok(SolutionPath {
        x,
        k,
        k_variation,
        max_step_k,
        state_dim: d,
    })
}

/// Integrate the inclusion along one noise path.
pub fn solve_path(problem: &MsdeProblem, gpath: &GPath) -> Result<SolutionPath, SolverError> {
    solve_scaled(problem, gpath, 1.0)
}

/// Integrate the rescaled form: drift and quadratic-variation terms scaled by
/// `eps_avg`, diffusion by `sqrt(eps_avg)`, and the applied constraint force
/// by `eps_avg`. With `eps_avg = 1` this is exactly [`solve_path`].
pub fn solve_rescaled(
    problem: &MsdeProblem,
    gpath: &GPath,
    eps_avg: f64,
) -> Result<SolutionPath, SolverError> {
    if !(eps_avg > 0.0 && eps_avg <= 1.0) {
        return Err(SolverError::BadAveragingScale(eps_avg));
    }
    solve_scaled(problem, gpath, eps_avg)
}

/// Sublinear expectation of the pathwise supremum `sup_t |X(t)|^{2p}` from
/// per-scenario path collections.
pub fn estimate_sup_moment(paths: &[Vec<SolutionPath>], p: f64) -> Result<f64, SolverError> {
    if p < 1.0 {
        return Err(SolverError::BadMomentOrder(p));
    }
    if paths.is_empty() || paths.iter().any(|c| c.is_empty()) {
        return Err(SolverError::NoPaths);
    }
    let samples: Vec<Vec<f64>> = paths
        .iter()
        .map(|coll| coll.iter().map(|sp| sp.sup_state_power(p)).collect())
        .collect();
    Ok(gexp::sublinear_expectation(&samples)?.value)
}

/// Summary of per-step discrete variational-inequality checks along a path.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ViAudit {
    pub checked: usize,
    pub vacuous: usize,
    pub violations: usize,
}

impl ViAudit {
    pub fn passes(&self) -> bool {
        self.violations == 0
    }

    pub fn merge(&mut self, other: &ViAudit) {
        self.checked += other.checked;
        self.vacuous += other.vacuous;
        self.violations += other.violations;
    }
}

/// Run the one-step variational-inequality check at every step of a solved
/// path against each probe value `u`.
pub fn audit_variational_inequality(
    path: &SolutionPath,
    potential: &ConvexPotential,
    dt: f64,
    probes: &[Vec<f64>],
) -> ViAudit {
    let d = path.state_dim;
    let mut audit = ViAudit::default();
    let mut dk = vec![0.0; d];
    for n in 0..path.n_steps() {
        for i in 0..d {
            dk[i] = path.k[(n + 1) * d + i] - path.k[n * d + i];
        }
        let x_next = path.state_at(n + 1);
        for u in probes {
            audit.checked += 1;
            match variational_inequality_check(x_next, &dk, u, potential, dt) {
                ViOutcome::Holds => {}
                ViOutcome::Vacuous => audit.vacuous += 1,
                ViOutcome::Violated => audit.violations += 1,
            }
        }
    }
    audit
}

/// Check the discrete constraint monotonicity between two solutions that
/// share a noise path and a potential; returns the number of violating steps.
pub fn audit_pair_monotonicity(a: &SolutionPath, b: &SolutionPath) -> usize {
    assert_eq!(a.state_dim, b.state_dim);
    assert_eq!(a.n_steps(), b.n_steps());
    let d = a.state_dim;
    let mut violations = 0;
    let mut dka = vec![0.0; d];
    let mut dkb = vec![0.0; d];
    for n in 0..a.n_steps() {
        for i in 0..d {
            dka[i] = a.k[(n + 1) * d + i] - a.k[n * d + i];
            dkb[i] = b.k[(n + 1) * d + i] - b.k[n * d + i];
        }
        if !monotonicity_check(a.state_at(n + 1), &dka, b.state_at(n + 1), &dkb) {
            violations += 1;
        }
    }
    violations
}
