//! Averaging experiments: coupled original/averaged solves on shared noise,
//! convergence-rate fitting, capacity curves, and the nonlinear-Gronwall and
//! Burkholder-Davis-Gundy utilities.
//!
//! Determinism contract: path seeds derive from
//! `(base_seed, eps index, scenario, path)`, results are gathered into
//! index-ordered slots before any reduction, and reductions run sequentially
//! in that order. Repeated runs and different thread counts therefore produce
//! bit-identical reports.

use rayon::prelude::*;
use thiserror::Error;

use crate::coeffs::{self, CoeffsError, PresetParams};
use crate::convex::ConvexPotential;
use crate::gbm::{self, GbmError, TimeGrid};
use crate::gexp::{self, GexpError, ScenarioSet, SublinearEstimate, VolatilityBand};
use crate::solver::{
    self, MsdeProblem, Scheme, SolverError, SolutionPath, ViAudit,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid experiment: {0}")]
    InvalidExperiment(String),
    #[error("eps {0} is not a member of the experiment's eps_list")]
    UnknownEps(f64),
    #[error(transparent)]
    Preset(#[from] CoeffsError),
    #[error(transparent)]
    Gexp(#[from] GexpError),
    #[error(transparent)]
    Gbm(#[from] GbmError),
    #[error("solver failed on scenario {scenario}, path {path}: {source}")]
    PathFailure {
        scenario: usize,
        path: usize,
        source: SolverError,
    },
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("rate fit needs at least 3 rows with positive error, got {0}")]
    DegenerateFit(usize),
    #[error("rho_eta needs x >= 0 and 0 < eta < 1/e, got x={x}, eta={eta}")]
    BadRhoArgs { x: f64, eta: f64 },
    #[error("bihari bound needs delta > 0, T > 0 and h0 >= 0")]
    BadBihariArgs,
}

/// Full description of one averaging-convergence experiment.
#[derive(Debug, Clone)]
pub struct AveragingExperiment {
    pub preset_name: String,
    pub preset_params: PresetParams,
    pub band: VolatilityBand,
    pub potential: ConvexPotential,
    pub scheme: Scheme,
    pub x0: f64,
    /// Moment order: errors are measured in the `2p`-th moment.
    pub p: f64,
    /// Strictly decreasing averaging scales in `(0, 1]`.
    pub eps_list: Vec<f64>,
    /// Horizon scale `L` in `T(eps) = L * eps^{1/2 - alpha}`.
    pub horizon_scale: f64,
    pub alpha: f64,
    /// Horizons are clipped to `(0, t_max]` (relevant for alpha > 1/2).
    pub t_max: f64,
    pub paths_per_scenario: usize,
    pub n_constant: usize,
    pub n_switching: usize,
    pub switch_points: usize,
    pub base_seed: u64,
    pub steps_per_unit_time: usize,
    /// Capacity probes: thresholds `delta2` for the event `sup|X - Z| > delta2`.
    pub probes_delta2: Vec<f64>,
}

impl AveragingExperiment {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let fail = |msg: String| Err(HarnessError::InvalidExperiment(msg));
        if self.p < 1.0 {
            return fail(format!("p must be >= 1, got {}", self.p));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return fail(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if !(self.horizon_scale > 0.0) {
            return fail(format!(
                "horizon_scale must be > 0, got {}",
                self.horizon_scale
            ));
        }
        if !(self.t_max > 0.0) {
            return fail(format!("t_max must be > 0, got {}", self.t_max));
        }
        if self.eps_list.is_empty() {
            return fail("eps_list must not be empty".into());
        }
        if self
            .eps_list
            .iter()
            .any(|&e| !(e > 0.0 && e <= 1.0))
        {
            return fail(format!("eps_list entries must lie in (0, 1]: {:?}", self.eps_list));
        }
        if self.eps_list.windows(2).any(|w| w[0] <= w[1]) {
            return fail(format!(
                "eps_list must be strictly decreasing: {:?}",
                self.eps_list
            ));
        }
        if self.paths_per_scenario == 0 {
            return fail("paths_per_scenario must be >= 1".into());
        }
        if self.n_constant < 2 {
            return fail(format!(
                "need at least 2 constant scenarios, got {}",
                self.n_constant
            ));
        }
        if self.steps_per_unit_time == 0 {
            return fail("steps_per_unit_time must be >= 1".into());
        }
        if self.probes_delta2.iter().any(|&d| !(d > 0.0)) {
            return fail(format!(
                "capacity probes must be > 0: {:?}",
                self.probes_delta2
            ));
        }
        Ok(())
    }

    /// Horizon rule `T(eps) = L * eps^{1/2 - alpha}`, clipped to `(0, t_max]`.
    pub fn horizon(&self, eps: f64) -> f64 {
        (self.horizon_scale * eps.powf(0.5 - self.alpha)).min(self.t_max)
    }

    /// Steps scale with the horizon so discretization error is roughly
    /// eps-independent; never fewer than 64 steps.
    pub fn n_steps(&self, eps: f64) -> usize {
        ((self.steps_per_unit_time as f64 * self.horizon(eps)).ceil() as usize).max(64)
    }

    pub fn n_scenarios(&self) -> usize {
        self.n_constant + self.n_switching
    }

    fn scenario_set(&self, horizon: f64) -> Result<ScenarioSet, HarnessError> {
        Ok(gexp::make_scenario_set_for_horizon(
            &self.band,
            self.n_constant,
            self.n_switching,
            self.switch_points,
            crate::rng::hash_words(&[self.base_seed, 0x5343]),
            horizon,
        )?)
    }

    fn path_seed(&self, eps_index: usize, scenario: usize, path: usize) -> u64 {
        crate::rng::hash_words(&[
            self.base_seed,
            eps_index as u64,
            scenario as u64,
            path as u64,
        ])
    }
}

/// Per-eps outcome of a coupled original-vs-averaged run.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledStats {
    pub eps: f64,
    pub horizon: f64,
    /// Sublinear-expectation estimate of `sup_t |X_eps - Z_eps|^{2p}`.
    pub err2p: f64,
    /// Standard error of the attaining scenario's mean.
    pub stderr: f64,
    /// Capacity of `sup|X - Z| > delta2` per probe.
    pub capacity: Vec<f64>,
    /// Frequency standard error per probe (at the attaining scenario).
    pub capacity_se: Vec<f64>,
    /// Variational-inequality audit aggregated over both solutions.
    pub vi_audit: ViAudit,
    /// Steps violating the pairwise constraint monotonicity check.
    pub monotonicity_violations: usize,
}

struct PathOutcome {
    sup_pow: f64,
    sup_diff: f64,
    vi: ViAudit,
    mono_violations: usize,
}

/// Solve the original and averaged rescaled equations on one shared noise
/// path per `(scenario, path)` pair and estimate the coupled deviation.
pub fn run_coupled(exp: &AveragingExperiment, eps: f64) -> Result<CoupledStats, HarnessError> {
    exp.validate()?;
    let eps_index = exp
        .eps_list
        .iter()
        .position(|&e| e == eps)
        .ok_or(HarnessError::UnknownEps(eps))?;

    let dynamics = coeffs::preset(&exp.preset_name, &exp.preset_params)?;
    let horizon = exp.horizon(eps);
    let grid = TimeGrid::new(horizon, exp.n_steps(eps))?;
    let scenarios = exp.scenario_set(horizon)?;
    let noise_dim = dynamics.original.noise_dim;
    let x0 = vec![exp.x0; dynamics.original.state_dim];

    let original = MsdeProblem::new(
        dynamics.original,
        exp.potential.clone(),
        x0.clone(),
        exp.band,
        exp.scheme,
        grid,
    )?;
    let averaged = MsdeProblem::new(
        dynamics.averaged.lift(),
        exp.potential.clone(),
        x0,
        exp.band,
        exp.scheme,
        grid,
    )?;
    let probes_u = exp.potential.probe_points(original.coeffs.state_dim);
    let dt = grid.step();
    let n_paths = exp.paths_per_scenario;

    let jobs: Vec<(usize, usize)> = (0..scenarios.len())
        .flat_map(|s| (0..n_paths).map(move |j| (s, j)))
        .collect();
    let outcomes: Result<Vec<PathOutcome>, HarnessError> = jobs
        .par_iter()
        .map(|&(s, j)| {
            let seed = exp.path_seed(eps_index, s, j);
            let gpath = gbm::sample_path(&scenarios.controls[s], &grid, noise_dim, seed)?;
            let sol_x = solver::solve_rescaled(&original, &gpath, eps).map_err(|e| {
                HarnessError::PathFailure {
                    scenario: s,
                    path: j,
                    source: e,
                }
            })?;
            let sol_z = solver::solve_rescaled(&averaged, &gpath, eps).map_err(|e| {
                HarnessError::PathFailure {
                    scenario: s,
                    path: j,
                    source: e,
                }
            })?;
            Ok(path_outcome(
                &sol_x, &sol_z, exp.p, &exp.potential, dt, &probes_u,
            ))
        })
        .collect();
    let outcomes = outcomes?;

    // Index-ordered reduction: slot outcomes back by (scenario, path).
    let mut sup_pow = vec![Vec::with_capacity(n_paths); scenarios.len()];
    let mut sup_diff = vec![Vec::with_capacity(n_paths); scenarios.len()];
    let mut vi_audit = ViAudit::default();
    let mut mono_violations = 0usize;
    for (&(s, _), out) in jobs.iter().zip(&outcomes) {
        sup_pow[s].push(out.sup_pow);
        sup_diff[s].push(out.sup_diff);
        vi_audit.merge(&out.vi);
        mono_violations += out.mono_violations;
    }

    let est = gexp::sublinear_expectation(&sup_pow)?;
    let stderr = SublinearEstimate::argmax_stderr(&sup_pow, &est);
    let mut capacity = Vec::with_capacity(exp.probes_delta2.len());
    let mut capacity_se = Vec::with_capacity(exp.probes_delta2.len());
    for &delta in &exp.probes_delta2 {
        let indicators: Vec<Vec<f64>> = sup_diff
            .iter()
            .map(|row| {
                row.iter()
                    .map(|&v| if v > delta { 1.0 } else { 0.0 })
                    .collect()
            })
            .collect();
        let cap = gexp::capacity(&indicators)?;
        capacity.push(cap);
        capacity_se.push((cap * (1.0 - cap) / n_paths as f64).sqrt());
    }

    Ok(CoupledStats {
        eps,
        horizon,
        err2p: est.value,
        stderr,
        capacity,
        capacity_se,
        vi_audit,
        monotonicity_violations: mono_violations,
    })
}

fn path_outcome(
    sol_x: &SolutionPath,
    sol_z: &SolutionPath,
    p: f64,
    potential: &ConvexPotential,
    dt: f64,
    probes_u: &[Vec<f64>],
) -> PathOutcome {
    let n = sol_x.n_steps();
    let mut sup: f64 = 0.0;
    for k in 0..=n {
        let xs = sol_x.state_at(k);
        let zs = sol_z.state_at(k);
        let gap: f64 = xs
            .iter()
            .zip(zs)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        sup = sup.max(gap);
    }
    let mut vi = solver::audit_variational_inequality(sol_x, potential, dt, probes_u);
    vi.merge(&solver::audit_variational_inequality(
        sol_z, potential, dt, probes_u,
    ));
    PathOutcome {
        sup_pow: sup.powf(2.0 * p),
        sup_diff: sup,
        vi,
        mono_violations: solver::audit_pair_monotonicity(sol_x, sol_z),
    }
}

/// One row of a convergence report.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub eps: f64,
    pub horizon: f64,
    pub err2p: f64,
    pub stderr: f64,
    pub capacity: Vec<f64>,
    pub capacity_se: Vec<f64>,
}

/// Gate outcomes of a convergence report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PassFlags {
    /// err2p nonincreasing across the eps ladder, allowing one inversion
    /// within two combined standard errors.
    pub monotone_err2p: bool,
    /// Fitted log-log slope at least 0.5 (or exactly-zero errors throughout).
    pub slope_floor: bool,
    /// Capacity at the smallest eps at most half its value at the largest.
    pub capacity_halved: bool,
    /// Every capacity value dominated by `err2p / delta2^{2p}` within 3 SE.
    pub capacity_chebyshev: bool,
    /// No variational-inequality or pair-monotonicity violations anywhere.
    pub step_checks: bool,
}

impl PassFlags {
    pub fn all(&self) -> bool {
        self.monotone_err2p
            && self.slope_floor
            && self.capacity_halved
            && self.capacity_chebyshev
            && self.step_checks
    }
}

/// Result of a full eps-ladder experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    /// Rows sorted by descending eps.
    pub rows: Vec<ReportRow>,
    pub probes_delta2: Vec<f64>,
    pub p: f64,
    /// OLS fit of `log err2p` against `log eps`; NaN when degenerate.
    pub slope: f64,
    pub intercept: f64,
    /// `exp(intercept)`, the fitted error constant.
    pub q_raw: f64,
    pub flags: PassFlags,
}

/// Run the coupled experiment across the whole eps ladder and fit the rate.
pub fn run_experiment(exp: &AveragingExperiment) -> Result<ConvergenceReport, HarnessError> {
    exp.validate()?;
    let mut rows = Vec::with_capacity(exp.eps_list.len());
    let mut vi_total = ViAudit::default();
    let mut mono_total = 0usize;
    for &eps in &exp.eps_list {
        let stats = run_coupled(exp, eps)?;
        vi_total.merge(&stats.vi_audit);
        mono_total += stats.monotonicity_violations;
        rows.push(ReportRow {
            eps: stats.eps,
            horizon: stats.horizon,
            err2p: stats.err2p,
            stderr: stats.stderr,
            capacity: stats.capacity,
            capacity_se: stats.capacity_se,
        });
    }

    let fit_input: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.err2p > 0.0)
        .map(|r| (r.eps, r.err2p))
        .collect();
    let all_zero = rows.iter().all(|r| r.err2p == 0.0);
    let (slope, intercept) = match fit_rate(&fit_input) {
        Ok(pair) => pair,
        Err(_) => (f64::NAN, f64::NAN),
    };

    let monotone_err2p = monotone_with_one_inversion(&rows);
    let slope_floor = all_zero || slope >= 0.5;
    let capacity_halved = (0..exp.probes_delta2.len()).all(|q| {
        let first = rows.first().map(|r| r.capacity[q]).unwrap_or(0.0);
        let last = rows.last().map(|r| r.capacity[q]).unwrap_or(0.0);
        last <= 0.5 * first || (first == 0.0 && last == 0.0)
    });
    let capacity_chebyshev = rows.iter().all(|r| {
        r.capacity.iter().zip(&r.capacity_se).zip(&exp.probes_delta2).all(
            |((&cap, &se), &delta)| cap <= r.err2p / delta.powf(2.0 * exp.p) + 3.0 * se,
        )
    });
    let step_checks = vi_total.passes() && mono_total == 0;

    Ok(ConvergenceReport {
        rows,
        probes_delta2: exp.probes_delta2.clone(),
        p: exp.p,
        slope,
        intercept,
        q_raw: intercept.exp(),
        flags: PassFlags {
            monotone_err2p,
            slope_floor,
            capacity_halved,
            capacity_chebyshev,
            step_checks,
        },
    })
}

fn monotone_with_one_inversion(rows: &[ReportRow]) -> bool {
    let mut inversions = 0usize;
    for w in rows.windows(2) {
        if w[1].err2p > w[0].err2p {
            inversions += 1;
            let combined = (w[0].stderr * w[0].stderr + w[1].stderr * w[1].stderr).sqrt();
            if w[1].err2p - w[0].err2p > 2.0 * combined {
                return false;
            }
        }
    }
    inversions <= 1
}

/// Ordinary least squares of `log(err)` against `log(eps)`.
pub fn fit_rate(rows: &[(f64, f64)]) -> Result<(f64, f64), HarnessError> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|(e, v)| *e > 0.0 && *v > 0.0)
        .map(|&(e, v)| (e.ln(), v.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(HarnessError::DegenerateFit(pts.len()));
    }
    let n = pts.len() as f64;
    let mean_x = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mean_x) * (p.0 - mean_x)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    if sxx == 0.0 {
        return Err(HarnessError::DegenerateFit(pts.len()));
    }
    let slope = sxy / sxx;
    Ok((slope, mean_y - slope * mean_x))
}

/// Concave comparison function for the nonlinear Gronwall bound:
/// `x log(1/x)` below `eta`, extended linearly with the tangent slope
/// `log(1/eta) - 1` above. Requires `0 < eta < 1/e` so the extension is
/// nondecreasing.
pub fn rho_eta(x: f64, eta: f64) -> Result<f64, HarnessError> {
    if !(x >= 0.0) || !(eta > 0.0 && eta < 1.0 / std::f64::consts::E) {
        return Err(HarnessError::BadRhoArgs { x, eta });
    }
    Ok(if x == 0.0 {
        0.0
    } else if x <= eta {
        x * (1.0 / x).ln()
    } else {
        eta * (1.0 / eta).ln() + ((1.0 / eta).ln() - 1.0) * (x - eta)
    })
}

/// Functional form of the nonlinear Gronwall conclusion,
/// `h0^{exp(-delta T)} + h0`, with the lemma's unspecified constant fixed
/// to 1.
pub fn bihari_bound(h0: f64, delta: f64, t: f64, eta: f64) -> Result<f64, HarnessError> {
    if !(eta > 0.0 && eta < 1.0 / std::f64::consts::E) {
        return Err(HarnessError::BadRhoArgs { x: h0, eta });
    }
    if !(h0 >= 0.0 && delta > 0.0 && t > 0.0) {
        return Err(HarnessError::BadBihariArgs);
    }
    Ok(h0.powf((-delta * t).exp()) + h0)
}

/// Empirical Burkholder-Davis-Gundy-type comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct BdgOutcome {
    /// Sublinear expectation of `sup_n |sum eta dB|^p`.
    pub diffusion_lhs: f64,
    /// `(sum eta^2 h)^{p/2}` (deterministic integrand).
    pub diffusion_rhs: f64,
    pub diffusion_ratio: f64,
    /// Sublinear expectation of `sup_n |sum eta dqv|^p`.
    pub qv_lhs: f64,
    /// `T^{p-1} * sum |eta|^p h`.
    pub qv_rhs: f64,
    pub qv_ratio: f64,
}

/// Estimate the two maximal-inequality ratios for a deterministic integrand
/// `eta(t)` under a scenario family. The ratios are the empirical constants
/// of the diffusion and quadratic-variation maximal inequalities.
pub fn bdg_empirical_check(
    eta: impl Fn(f64) -> f64 + Sync,
    p: f64,
    scenarios: &ScenarioSet,
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
) -> Result<BdgOutcome, HarnessError> {
    if p < 1.0 || n_paths == 0 {
        return Err(HarnessError::InvalidExperiment(format!(
            "bdg check needs p >= 1 and paths >= 1, got p={p}, n_paths={n_paths}"
        )));
    }
    let n = grid.n_steps;
    let h = grid.step();
    let eta_vals: Vec<f64> = (0..n).map(|k| eta(grid.t(k))).collect();
    let diffusion_rhs = eta_vals
        .iter()
        .map(|e| e * e * h)
        .sum::<f64>()
        .powf(p / 2.0);
    let qv_rhs = grid.horizon.powf(p - 1.0)
        * eta_vals.iter().map(|e| e.abs().powf(p) * h).sum::<f64>();

    let mut sup_db = Vec::with_capacity(scenarios.len());
    let mut sup_dqv = Vec::with_capacity(scenarios.len());
    for (s, control) in scenarios.controls.iter().enumerate() {
        let mut row_db = Vec::with_capacity(n_paths);
        let mut row_dqv = Vec::with_capacity(n_paths);
        for j in 0..n_paths {
            let pseed = crate::rng::hash_words(&[seed, s as u64, j as u64]);
            let gpath = gbm::sample_path(control, grid, 1, pseed)?;
            let mut acc_db = 0.0;
            let mut acc_dqv = 0.0;
            let mut worst_db: f64 = 0.0;
            let mut worst_dqv: f64 = 0.0;
            for k in 0..n {
                acc_db += eta_vals[k] * gpath.db_at(k)[0];
                acc_dqv += eta_vals[k] * gpath.dqv[k];
                worst_db = worst_db.max(acc_db.abs());
                worst_dqv = worst_dqv.max(acc_dqv.abs());
            }
            row_db.push(worst_db.powf(p));
            row_dqv.push(worst_dqv.powf(p));
        }
        sup_db.push(row_db);
        sup_dqv.push(row_dqv);
    }
    let diffusion_lhs = gexp::sublinear_expectation(&sup_db)?.value;
    let qv_lhs = gexp::sublinear_expectation(&sup_dqv)?.value;
    let ratio = |lhs: f64, rhs: f64| {
        if rhs == 0.0 {
            if lhs == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            lhs / rhs
        }
    };
    Ok(BdgOutcome {
        diffusion_lhs,
        diffusion_rhs,
        diffusion_ratio: ratio(diffusion_lhs, diffusion_rhs),
        qv_lhs,
        qv_rhs,
        qv_ratio: ratio(qv_lhs, qv_rhs),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn small_experiment(preset: &str, gamma: f64) -> AveragingExperiment {
        AveragingExperiment {
            preset_name: preset.into(),
            preset_params: PresetParams {
                gamma,
                k_trunc: 50,
                noise_terms: 4,
                ..PresetParams::default()
            },
            band: VolatilityBand::new(1.0, 4.0).unwrap(),
            potential: ConvexPotential::indicator_interval(-5.0, 5.0).unwrap(),
            scheme: Scheme::Projection,
            x0: 1.0,
            p: 1.0,
            eps_list: vec![0.1, 0.03, 0.01],
            horizon_scale: 1.0,
            alpha: 0.25,
            t_max: 16.0,
            paths_per_scenario: 24,
            n_constant: 2,
            n_switching: 1,
            switch_points: 4,
            base_seed: 7,
            steps_per_unit_time: 128,
            probes_delta2: vec![0.1],
        }
    }

    #[test]
    fn identical_dynamics_give_exactly_zero_error() {
        let exp = small_experiment("decaying", 0.0);
        let stats = run_coupled(&exp, 0.1).unwrap();
        assert_eq!(stats.err2p, 0.0);
        assert_eq!(stats.stderr, 0.0);
        assert_eq!(stats.capacity, vec![0.0]);
        assert!(stats.vi_audit.passes());
        assert_eq!(stats.monotonicity_violations, 0);
    }

    #[test]
    fn infinite_probe_has_zero_capacity() {
        let mut exp = small_experiment("decaying", 1.0);
        exp.probes_delta2 = vec![f64::INFINITY];
        let stats = run_coupled(&exp, 0.1).unwrap();
        assert_eq!(stats.capacity, vec![0.0]);
    }

    #[test]
    fn coupled_runs_are_bitwise_deterministic() {
        let exp = small_experiment("decaying", 1.0);
        let a = run_coupled(&exp, 0.1).unwrap();
        let b = run_coupled(&exp, 0.1).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let exp = small_experiment("decaying", 1.0);
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| run_coupled(&exp, 0.1).unwrap());
        let multi = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(|| run_coupled(&exp, 0.1).unwrap());
        assert_eq!(single, multi);
    }

    #[test]
    fn unknown_eps_is_rejected() {
        let exp = small_experiment("decaying", 1.0);
        assert!(matches!(
            run_coupled(&exp, 0.07),
            Err(HarnessError::UnknownEps(_))
        ));
    }

    #[test]
    fn error_decreases_for_decaying_preset() {
        let mut exp = small_experiment("decaying", 1.0);
        exp.eps_list = vec![0.1, 0.01];
        let big = run_coupled(&exp, 0.1).unwrap();
        let small = run_coupled(&exp, 0.01).unwrap();
        assert!(
            small.err2p < big.err2p,
            "err2p did not decrease: {} -> {}",
            big.err2p,
            small.err2p
        );
    }

    #[test]
    fn fit_rate_exact_power_laws() {
        let eps = [0.1, 0.03, 0.01, 0.003];
        let exact: Vec<(f64, f64)> = eps.iter().map(|&e| (e, e)).collect();
        let (s, _) = fit_rate(&exact).unwrap();
        assert!((s - 1.0).abs() < 1e-12);

        // err = 3 * eps^{0.75}: closed-form OLS recovers both parameters.
        let scaled: Vec<(f64, f64)> = eps.iter().map(|&e| (e, 3.0 * e.powf(0.75))).collect();
        let (s, c) = fit_rate(&scaled).unwrap();
        assert!((s - 0.75).abs() < 1e-10, "slope {s}");
        assert!((c - 3.0f64.ln()).abs() < 1e-10, "intercept {c}");

        let constant: Vec<(f64, f64)> = eps.iter().map(|&e| (e, 2.0)).collect();
        let (s, _) = fit_rate(&constant).unwrap();
        assert!(s.abs() < 1e-12);
    }

    #[test]
    fn fit_rate_rejects_degenerate_input() {
        assert!(matches!(
            fit_rate(&[(0.1, 1.0), (0.01, 0.5)]),
            Err(HarnessError::DegenerateFit(2))
        ));
        assert!(matches!(
            fit_rate(&[(0.1, 0.0), (0.03, 0.0), (0.01, 0.0)]),
            Err(HarnessError::DegenerateFit(0))
        ));
    }

    #[test]
    fn rho_eta_values_and_shape() {
        assert_eq!(rho_eta(0.0, 0.1).unwrap(), 0.0);
        let v = rho_eta(0.05, 0.1).unwrap();
        assert!((v - 0.05 * 20.0f64.ln()).abs() < 1e-12);
        // Continuity at the patch point.
        let left = rho_eta(0.1, 0.1).unwrap();
        let right = rho_eta(0.1 + 1e-15, 0.1).unwrap();
        assert!((left - right).abs() < 1e-12);
        assert!(rho_eta(1.0, 0.5).is_err());
        assert!(rho_eta(-1.0, 0.1).is_err());

        // Concave and nondecreasing on sampled triples.
        let eta = 0.2;
        let xs = [0.0, 0.01, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0];
        for w in xs.windows(2) {
            assert!(rho_eta(w[0], eta).unwrap() <= rho_eta(w[1], eta).unwrap() + 1e-12);
        }
        for &a in &xs {
            for &b in &xs {
                let mid = rho_eta(0.5 * (a + b), eta).unwrap();
                let avg = 0.5 * (rho_eta(a, eta).unwrap() + rho_eta(b, eta).unwrap());
                assert!(mid >= avg - 1e-12);
            }
        }
    }

    #[test]
    fn bihari_bound_values() {
        assert_eq!(bihari_bound(0.0, 1.0, 1.0, 0.1).unwrap(), 0.0);
        assert_eq!(bihari_bound(1.0, 3.0, 2.0, 0.1).unwrap(), 2.0);
        let h0 = (-2.0f64).exp();
        let v = bihari_bound(h0, 2.0f64.ln(), 1.0, 0.1).unwrap();
        let expected = (-1.0f64).exp() + h0;
        assert!((v - expected).abs() < 1e-12);
        assert!((v - 0.50321).abs() < 1e-5);
        assert!(bihari_bound(1.0, 0.0, 1.0, 0.1).is_err());
        assert!(bihari_bound(1.0, 1.0, 1.0, 0.9).is_err());
    }

    #[test]
    fn bdg_zero_integrand() {
        let band = VolatilityBand::new(1.0, 4.0).unwrap();
        let scen = gexp::make_scenario_set(&band, 2, 0, 0, 1).unwrap();
        let grid = TimeGrid::new(1.0, 64).unwrap();
        let out = bdg_empirical_check(|_| 0.0, 2.0, &scen, &grid, 10, 5).unwrap();
        assert_eq!(out.diffusion_lhs, 0.0);
        assert_eq!(out.diffusion_rhs, 0.0);
        assert_eq!(out.diffusion_ratio, 0.0);
        assert_eq!(out.qv_lhs, 0.0);
    }

    #[test]
    fn bdg_classical_case_respects_doob() {
        // Unit integrand, p = 2, degenerate unit band: lhs is the classical
        // E[sup B_t^2] in (1, 4] by Doob; rhs = 1.
        let band = VolatilityBand::new(1.0, 1.0).unwrap();
        let scen = gexp::make_scenario_set(&band, 2, 0, 0, 1).unwrap();
        let grid = TimeGrid::new(1.0, 256).unwrap();
        let out = bdg_empirical_check(|_| 1.0, 2.0, &scen, &grid, 3000, 11).unwrap();
        assert!((out.diffusion_rhs - 1.0).abs() < 1e-12);
        assert!(
            out.diffusion_ratio > 1.0 && out.diffusion_ratio < 4.2,
            "ratio {}",
            out.diffusion_ratio
        );
        // QV variant is deterministic here: lhs = rhs = T exactly.
        assert_eq!(out.qv_lhs, out.qv_rhs);
        assert_eq!(out.qv_ratio, 1.0);
    }

    #[test]
    fn experiment_report_flags_for_decaying() {
        let mut exp = small_experiment("decaying", 1.0);
        exp.eps_list = vec![0.1, 0.03, 0.01, 0.003];
        exp.paths_per_scenario = 32;
        let report = run_experiment(&exp).unwrap();
        assert_eq!(report.rows.len(), 4);
        assert!(report.rows.windows(2).all(|w| w[0].eps > w[1].eps));
        assert!(report.flags.step_checks);
        assert!(report.flags.capacity_chebyshev);
        for row in &report.rows {
            assert!(row.err2p >= 0.0);
        }
    }

    #[test]
    fn experiment_validation_messages() {
        let mut exp = small_experiment("decaying", 1.0);
        exp.alpha = 1.5;
        let err = run_experiment(&exp).unwrap_err();
        assert!(err.to_string().contains("alpha"));

        let mut exp2 = small_experiment("decaying", 1.0);
        exp2.eps_list = vec![0.1, 0.2];
        let err2 = exp2.validate().unwrap_err();
        assert!(err2.to_string().contains("decreasing"));
    }
}
