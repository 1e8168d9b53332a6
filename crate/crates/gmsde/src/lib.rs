//! Simulation toolkit for multi-valued stochastic differential equations
//! driven by G-Brownian motion.
//!
//! The library realizes volatility uncertainty through a finite family of
//! piecewise-constant variance-rate scenarios: sublinear expectations are
//! estimated as maxima of per-scenario sample means and capacities as maxima
//! of event frequencies. On top of that sit reproducible path generation, a
//! convex-potential layer (projection, prox, Moreau-Yosida gradient), an
//! Euler projection/penalization scheme for the stochastic inclusion, and a
//! harness that couples original and time-averaged dynamics on shared noise
//! to measure convergence rates and capacity decay.
//!
//! ## Modules
//!
//! - [`gexp`] — volatility bands, scenario sets, sublinear expectation,
//!   capacity, and the moment/capacity bound check.
//! - [`gbm`] — time grids and G-Brownian paths with exact quadratic-variation
//!   accumulation under a control.
//! - [`convex`] — convex potentials with projection, prox, Moreau-Yosida
//!   gradient, and the discrete solution-inequality checks.
//! - [`coeffs`] — coefficient triples, non-Lipschitz moduli, the sine-series
//!   preset family with closed-form averages, and deviation diagnostics.
//! - [`solver`] — the Euler stepper producing `(X, K)` trajectories under
//!   projection or Yosida penalization, plus moment estimators.
//! - [`harness`] — coupled averaging experiments, rate fitting, capacity
//!   curves, and the maximal-inequality and nonlinear-Gronwall utilities.
//! - [`config`], [`report`], [`cli`] — TOML experiment configs, artifact
//!   writers, and the command entry points of the `gmsde` binary.
//!
//! ## Examples
//!
//! Each major capability has a runnable example:
//!
//! ```bash
//! cargo run -p gmsde --release --example g_expectation
//! cargo run -p gmsde --release --example g_brownian_paths
//! cargo run -p gmsde --release --example convex_potentials
//! cargo run -p gmsde --release --example reflected_path
//! cargo run -p gmsde --release --example penalization_vs_projection
//! cargo run -p gmsde --release --example averaging_convergence
//! cargo run -p gmsde --release --example sine_series_preset
//! cargo run -p gmsde --release --example inequality_toolbox
//! ```
//!
//! The thin `gmsde` binary drives full experiments from a config file:
//!
//! ```bash
//! gmsde run --config experiment.toml
//! gmsde check
//! gmsde demo-example4
//! ```

pub mod checks;
pub mod cli;
pub mod coeffs;
pub mod config;
pub mod convex;
pub mod gbm;
pub mod gexp;
pub mod harness;
pub mod report;
pub mod rng;
pub mod solver;

pub use coeffs::{
    example4_averaged, example4_triple, kappa_eval, AveragedTriple, CoefficientTriple,
    ModulusKappa,
};
pub use convex::{prox, yosida_gradient, ConvexPotential};
pub use gbm::{sample_path, GPath, TimeGrid};
pub use gexp::{
    capacity, chebyshev_check, g_function, make_scenario_set, sublinear_expectation, ScenarioSet,
    VolatilityBand, VolatilityControl,
};
pub use harness::{bihari_bound, fit_rate, rho_eta, run_coupled, AveragingExperiment};
pub use solver::{estimate_sup_moment, solve_path, solve_rescaled, MsdeProblem, Scheme};
