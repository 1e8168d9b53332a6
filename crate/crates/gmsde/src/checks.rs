//! Runtime property suites: each check exercises one family of invariants on
//! generated data and reports a pass/fail line. The expectation-axiom suite
//! is exact (no statistical tolerance): sample values are dyadic rationals
//! and scenario sizes are powers of two, so every mean is computed without
//! rounding.

use crate::coeffs::{self, PresetParams};
use crate::convex::{self, ConvexPotential};
use crate::gbm::{self, TimeGrid};
use crate::gexp::{self, VolatilityBand};
use crate::harness;
use crate::rng;
use crate::solver::{self, MsdeProblem, Scheme};

/// Outcome of one named property suite.
#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn pass(name: &'static str, detail: String) -> Self {
        Self {
            name,
            pass: true,
            detail,
        }
    }

    fn fail(name: &'static str, detail: String) -> Self {
        Self {
            name,
            pass: false,
            detail,
        }
    }
}

/// Run every suite; order matches the printed table.
pub fn run_all(seed: u64) -> Vec<CheckOutcome> {
    vec![
        expectation_axioms(seed, 100),
        qv_band_suite(seed),
        prox_yosida_suite(),
        step_inequality_suite(seed),
        chebyshev_suite(seed),
        bdg_suite(seed),
        moment_stability_suite(seed),
    ]
}

/// Dyadic sample value: integer / 2^17, bounded by 8 in magnitude. Sums of
/// up to 64 such values and divisions by power-of-two counts are exact in
/// f64.
fn dyadic(key: u64, ctr: u64) -> f64 {
    let bits = rng::mix(key ^ ctr.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let int = (bits % (1 << 21)) as i64 - (1 << 20);
    int as f64 / (1 << 17) as f64
}

fn dyadic_matrix(key: u64, tag: u64, n_scen: usize, n_samples: usize) -> Vec<Vec<f64>> {
    (0..n_scen)
        .map(|s| {
            (0..n_samples)
                .map(|j| dyadic(key, tag ^ ((s * n_samples + j) as u64)))
                .collect()
        })
        .collect()
}

/// Monotonicity, constant preservation, sub-additivity and positive
/// homogeneity of the max-of-means estimator, asserted with zero tolerance
/// on randomized dyadic sample matrices.
pub fn expectation_axioms(seed: u64, n_matrices: usize) -> CheckOutcome {
    const NAME: &str = "expectation-axioms";
    let key = rng::hash_words(&[seed, 0xA710]);
    for i in 0..n_matrices {
        let n_scen = 1 + (rng::mix(key ^ i as u64) % 5) as usize;
        let n_samples = 1usize << (3 + (rng::mix(key ^ (i as u64 + 1)) % 3)); // 8, 16, 32
        let tag = (i as u64) << 32;
        let x = dyadic_matrix(key, tag, n_scen, n_samples);
        let y = dyadic_matrix(key, tag ^ 0xFFFF, n_scen, n_samples);

        let ex = gexp::sublinear_expectation(&x).unwrap().value;
        let ey = gexp::sublinear_expectation(&y).unwrap().value;

        // Monotonicity: X >= X - |D| samplewise.
        let lower: Vec<Vec<f64>> = x
            .iter()
            .zip(&y)
            .map(|(rx, ry)| rx.iter().zip(ry).map(|(a, b)| a - b.abs()).collect())
            .collect();
        let el = gexp::sublinear_expectation(&lower).unwrap().value;
        if !(ex >= el) {
            return CheckOutcome::fail(NAME, format!("monotonicity broke on matrix {i}"));
        }

        // Constant preservation.
        let c = dyadic(key, tag ^ 0xC0);
        let constant = vec![vec![c; n_samples]; n_scen];
        if gexp::sublinear_expectation(&constant).unwrap().value != c {
            return CheckOutcome::fail(NAME, format!("constant {c} not preserved on matrix {i}"));
        }

        // Sub-additivity: max of sums <= sum of maxes, exactly in dyadics.
        let sum: Vec<Vec<f64>> = x
            .iter()
            .zip(&y)
            .map(|(rx, ry)| rx.iter().zip(ry).map(|(a, b)| a + b).collect())
            .collect();
        let es = gexp::sublinear_expectation(&sum).unwrap().value;
        if !(es <= ex + ey) {
            return CheckOutcome::fail(NAME, format!("sub-additivity broke on matrix {i}"));
        }

        // Positive homogeneity for a few exact scales.
        for lambda in [0.0, 0.5, 1.0, 2.0, 3.0] {
            let scaled: Vec<Vec<f64>> = x
                .iter()
                .map(|r| r.iter().map(|v| lambda * v).collect())
                .collect();
            let esc = gexp::sublinear_expectation(&scaled).unwrap().value;
            if esc != lambda * ex {
                return CheckOutcome::fail(
                    NAME,
                    format!("homogeneity broke at lambda={lambda} on matrix {i}"),
                );
            }
        }
    }
    CheckOutcome::pass(NAME, format!("{n_matrices} matrices, exact"))
}

/// Sampled paths across several bands stay inside the quadratic-variation
/// envelope.
pub fn qv_band_suite(seed: u64) -> CheckOutcome {
    const NAME: &str = "qv-band";
    let bands = [(1.0, 1.0), (1.0, 4.0), (0.25, 2.25)];
    let mut checked = 0usize;
    for (bi, &(lo, hi)) in bands.iter().enumerate() {
        let band = VolatilityBand::new(lo, hi).unwrap();
        let scen = match gexp::make_scenario_set(&band, 3, 2, 4, seed ^ bi as u64) {
            Ok(s) => s,
            Err(e) => return CheckOutcome::fail(NAME, e.to_string()),
        };
        let grid = TimeGrid::new(1.5, 192).unwrap();
        for (ci, control) in scen.controls.iter().enumerate() {
            for j in 0..8u64 {
                let path = match gbm::sample_path(control, &grid, 1, seed ^ (j << 8) ^ ci as u64) {
                    Ok(p) => p,
                    Err(e) => return CheckOutcome::fail(NAME, e.to_string()),
                };
                if !gbm::qv_band_check(&path, &band, &grid) {
                    return CheckOutcome::fail(
                        NAME,
                        format!("band {bi} control {ci} path {j} left the envelope"),
                    );
                }
                checked += 1;
            }
        }
    }
    CheckOutcome::pass(NAME, format!("{checked} paths inside the envelope"))
}

/// Lipschitz bound, monotonicity and envelope ordering of the Moreau-Yosida
/// gradient; idempotence and nonexpansiveness of the projection.
pub fn prox_yosida_suite() -> CheckOutcome {
    const NAME: &str = "prox-yosida";
    let potentials: Vec<(&str, ConvexPotential)> = vec![
        (
            "interval",
            ConvexPotential::indicator_interval(-1.0, 2.0).unwrap(),
        ),
        ("half-line", ConvexPotential::half_line_nonnegative()),
        ("quadratic", ConvexPotential::quadratic(1, 0.8).unwrap()),
    ];
    let points = [-6.0, -2.0, -0.5, 0.0, 0.4, 1.1, 2.5, 7.0];
    for (label, pot) in &potentials {
        for &eps in &[1.0, 0.1, 0.01] {
            for &a in &points {
                let ga = match convex::yosida_gradient(&[a], eps, pot) {
                    Ok(g) => g[0],
                    Err(e) => return CheckOutcome::fail(NAME, format!("{label}: {e}")),
                };
                for &b in &points {
                    let gb = convex::yosida_gradient(&[b], eps, pot).unwrap()[0];
                    if (ga - gb).abs() > (a - b).abs() / eps + 1e-9 {
                        return CheckOutcome::fail(
                            NAME,
                            format!("{label}: gradient not 1/eps-Lipschitz at eps={eps}"),
                        );
                    }
                    if (ga - gb) * (a - b) < -1e-9 {
                        return CheckOutcome::fail(
                            NAME,
                            format!("{label}: gradient not monotone at eps={eps}"),
                        );
                    }
                }
            }
        }
        // Envelope nondecreasing as eps shrinks.
        for &a in &points {
            let e1 = convex::moreau_envelope(&[a], 1.0, pot).unwrap();
            let e2 = convex::moreau_envelope(&[a], 0.1, pot).unwrap();
            let e3 = convex::moreau_envelope(&[a], 0.01, pot).unwrap();
            if !(e1 <= e2 + 1e-9 && e2 <= e3 + 1e-9) {
                return CheckOutcome::fail(NAME, format!("{label}: envelope ordering broke"));
            }
        }
        if pot.is_indicator() {
            for &a in &points {
                let pa = convex::project(&[a], pot);
                if convex::project(&pa, pot) != pa {
                    return CheckOutcome::fail(NAME, format!("{label}: projection not idempotent"));
                }
                for &b in &points {
                    let pb = convex::project(&[b], pot);
                    if (pa[0] - pb[0]).abs() > (a - b).abs() + 1e-12 {
                        return CheckOutcome::fail(NAME, format!("{label}: projection expansive"));
                    }
                }
            }
        }
    }
    CheckOutcome::pass(NAME, "3 potentials x 3 eps levels".into())
}

/// Per-step variational-inequality and pairwise-monotonicity audits on a
/// small coupled batch.
pub fn step_inequality_suite(seed: u64) -> CheckOutcome {
    const NAME: &str = "step-inequalities";
    let exp = harness::AveragingExperiment {
        preset_name: "decaying".into(),
        preset_params: PresetParams {
            gamma: 1.0,
            k_trunc: 100,
            noise_terms: 8,
            ..PresetParams::default()
        },
        band: VolatilityBand::new(1.0, 4.0).unwrap(),
        potential: ConvexPotential::indicator_interval(-0.5, 2.0).unwrap(),
        scheme: Scheme::Projection,
        x0: 1.0,
        p: 1.0,
        eps_list: vec![0.5, 0.1],
        horizon_scale: 1.0,
        alpha: 0.25,
        t_max: 16.0,
        paths_per_scenario: 16,
        n_constant: 2,
        n_switching: 1,
        switch_points: 4,
        base_seed: seed,
        steps_per_unit_time: 256,
        probes_delta2: vec![0.1],
    };
    let mut checked = 0usize;
    for &eps in &exp.eps_list.clone() {
        match harness::run_coupled(&exp, eps) {
            Ok(stats) => {
                if !stats.vi_audit.passes() {
                    return CheckOutcome::fail(
                        NAME,
                        format!("variational inequality violated at eps={eps}"),
                    );
                }
                if stats.monotonicity_violations > 0 {
                    return CheckOutcome::fail(NAME, format!("monotonicity violated at eps={eps}"));
                }
                checked += stats.vi_audit.checked;
            }
            Err(e) => return CheckOutcome::fail(NAME, e.to_string()),
        }
    }
    CheckOutcome::pass(NAME, format!("{checked} per-step checks, tolerance 1e-9"))
}

/// The capacity/moment bound on a suite of 20 path functionals across bands.
pub fn chebyshev_suite(seed: u64) -> CheckOutcome {
    const NAME: &str = "chebyshev";
    let bands = [(1.0, 1.0), (1.0, 4.0), (0.25, 2.25)];
    let grid = TimeGrid::new(1.0, 128).unwrap();
    let n_paths = 300usize;

    // Per-path functionals of (B, <B>).
    type PathFn = fn(&gbm::GPath) -> f64;
    let terminal: PathFn = |p| p.b_at(p.n_steps(), 0);
    let qv_total: PathFn = |p| p.qv[p.n_steps()];
    let running_max: PathFn = |p| {
        (0..=p.n_steps())
            .map(|k| p.b_at(k, 0).abs())
            .fold(0.0, f64::max)
    };
    let martingale_gap: PathFn = |p| {
        let b = p.b_at(p.n_steps(), 0);
        b * b - p.qv[p.n_steps()]
    };
    let time_average: PathFn = |p| {
        (0..=p.n_steps()).map(|k| p.b_at(k, 0)).sum::<f64>() / (p.n_steps() + 1) as f64
    };
    let functionals: [(PathFn, f64, f64); 5] = [
        (terminal, 1.0, 2.0),
        (qv_total, 2.0, 1.0),
        (running_max, 1.5, 2.0),
        (martingale_gap, 2.0, 1.0),
        (time_average, 0.5, 1.0),
    ];
    // 3 bands x 5 functionals = 15, plus 5 extra alpha/p combos on band 1.
    let extra: [(usize, f64, f64); 5] = [
        (0, 0.5, 1.0),
        (1, 2.5, 2.0),
        (2, 1.0, 1.0),
        (3, 3.0, 2.0),
        (4, 1.0, 2.0),
    ];

    let run_one = |band: &VolatilityBand,
                       func: PathFn,
                       alpha: f64,
                       p: f64,
                       tag: u64|
     -> Result<bool, String> {
        let scen = gexp::make_scenario_set(band, 3, 2, 4, seed ^ tag).map_err(|e| e.to_string())?;
        let mut samples = Vec::with_capacity(scen.len());
        for (s, control) in scen.controls.iter().enumerate() {
            let mut row = Vec::with_capacity(n_paths);
            for j in 0..n_paths {
                let pseed = rng::hash_words(&[seed, tag, s as u64, j as u64]);
                let path = gbm::sample_path(control, &grid, 1, pseed).map_err(|e| e.to_string())?;
                row.push(func(&path));
            }
            samples.push(row);
        }
        let out = gexp::chebyshev_check(&samples, alpha, p).map_err(|e| e.to_string())?;
        Ok(out.holds)
    };

    let mut count = 0usize;
    for (bi, &(lo, hi)) in bands.iter().enumerate() {
        let band = VolatilityBand::new(lo, hi).unwrap();
        for (fi, &(func, alpha, p)) in functionals.iter().enumerate() {
            count += 1;
            match run_one(&band, func, alpha, p, (bi * 8 + fi) as u64) {
                Ok(true) => {}
                Ok(false) => {
                    return CheckOutcome::fail(
                        NAME,
                        format!("functional {fi} on band {bi} broke the bound"),
                    )
                }
                Err(e) => return CheckOutcome::fail(NAME, e),
            }
        }
    }
    let band = VolatilityBand::new(1.0, 4.0).unwrap();
    for (i, &(fi, alpha, p)) in extra.iter().enumerate() {
        count += 1;
        match run_one(&band, functionals[fi].0, alpha, p, (64 + i) as u64) {
            Ok(true) => {}
            Ok(false) => {
                return CheckOutcome::fail(NAME, format!("extra combo {i} broke the bound"))
            }
            Err(e) => return CheckOutcome::fail(NAME, e),
        }
    }
    CheckOutcome::pass(NAME, format!("{count} functionals within 3 SE"))
}

/// Maximal-inequality ratios: finite in general, and inside the classical
/// Doob bound for the p=2 unit-band case; the quadratic-variation variant is
/// exact under a degenerate band.
pub fn bdg_suite(seed: u64) -> CheckOutcome {
    const NAME: &str = "bdg";
    let unit = VolatilityBand::new(1.0, 1.0).unwrap();
    let scen = gexp::make_scenario_set(&unit, 2, 0, 0, seed).unwrap();
    let grid = TimeGrid::new(1.0, 256).unwrap();
    let classical = match harness::bdg_empirical_check(|_| 1.0, 2.0, &scen, &grid, 2000, seed) {
        Ok(o) => o,
        Err(e) => return CheckOutcome::fail(NAME, e.to_string()),
    };
    if !(classical.diffusion_ratio > 1.0 && classical.diffusion_ratio < 4.2) {
        return CheckOutcome::fail(
            NAME,
            format!(
                "classical p=2 ratio {} outside (1, 4.2)",
                classical.diffusion_ratio
            ),
        );
    }
    if classical.qv_lhs != classical.qv_rhs {
        return CheckOutcome::fail(NAME, "degenerate qv variant not exact".into());
    }
    let wide = VolatilityBand::new(1.0, 4.0).unwrap();
    let scen_w = gexp::make_scenario_set(&wide, 3, 2, 4, seed).unwrap();
    let out = match harness::bdg_empirical_check(
        |t| (1.0 + t).sqrt(),
        3.0,
        &scen_w,
        &grid,
        400,
        seed ^ 1,
    ) {
        Ok(o) => o,
        Err(e) => return CheckOutcome::fail(NAME, e.to_string()),
    };
    if !(out.diffusion_ratio.is_finite() && out.qv_ratio.is_finite()) {
        return CheckOutcome::fail(NAME, "wide-band ratios not finite".into());
    }
    CheckOutcome::pass(
        NAME,
        format!(
            "classical ratio {:.3}, wide-band ratios {:.3}/{:.3}",
            classical.diffusion_ratio, out.diffusion_ratio, out.qv_ratio
        ),
    )
}

/// Halving the step changes the sup-moment estimate by less than 10%
/// (coupled refinement on shared noise).
pub fn moment_stability_suite(seed: u64) -> CheckOutcome {
    const NAME: &str = "moment-stability";
    match sup_moment_refinement_gap(seed, 200, 2, 2, 512, 1.0) {
        Ok((coarse, fine, rel)) => {
            if rel < 0.10 {
                CheckOutcome::pass(
                    NAME,
                    format!("estimates {coarse:.4} vs {fine:.4}, relative change {rel:.4}"),
                )
            } else {
                CheckOutcome::fail(NAME, format!("relative change {rel:.4} >= 0.10"))
            }
        }
        Err(e) => CheckOutcome::fail(NAME, e),
    }
}

/// Shared helper: solve the decaying preset over `[0, horizon]` at step
/// counts `n` and `2n` on coupled noise and return both sup-moment estimates
/// plus their relative gap. Used by the runtime check (small sizes) and the
/// acceptance suite (spec sizes).
pub fn sup_moment_refinement_gap(
    seed: u64,
    paths_per_scenario: usize,
    k_trunc: usize,
    noise_terms: usize,
    steps_coarse: usize,
    horizon: f64,
) -> Result<(f64, f64, f64), String> {
    let params = PresetParams {
        gamma: 1.0,
        k_trunc,
        noise_terms,
        ..PresetParams::default()
    };
    let dynamics = coeffs::preset("decaying", &params).map_err(|e| e.to_string())?;
    let band = VolatilityBand::new(1.0, 4.0).unwrap();
    let scen = gexp::make_scenario_set_for_horizon(&band, 5, 3, 4, seed ^ 0x535, horizon)
        .map_err(|e| e.to_string())?;
    let potential = ConvexPotential::indicator_interval(-5.0, 5.0).unwrap();
    let grid_fine = TimeGrid::new(horizon, 2 * steps_coarse).unwrap();
    let grid_coarse = TimeGrid::new(horizon, steps_coarse).unwrap();
    let m = dynamics.original.noise_dim;

    let problem_fine = MsdeProblem::new(
        dynamics.original.clone(),
        potential.clone(),
        vec![1.0],
        band,
        Scheme::Projection,
        grid_fine,
    )
    .map_err(|e| e.to_string())?;
    let problem_coarse = MsdeProblem::new(
        dynamics.original,
        potential,
        vec![1.0],
        band,
        Scheme::Projection,
        grid_coarse,
    )
    .map_err(|e| e.to_string())?;

    use rayon::prelude::*;
    let jobs: Vec<(usize, usize)> = (0..scen.len())
        .flat_map(|s| (0..paths_per_scenario).map(move |j| (s, j)))
        .collect();
    let stats: Result<Vec<(f64, f64)>, String> = jobs
        .par_iter()
        .map(|&(s, j)| {
            let pseed = rng::hash_words(&[seed, 0x4D53, s as u64, j as u64]);
            let fine = gbm::sample_path(&scen.controls[s], &grid_fine, m, pseed)
                .map_err(|e| e.to_string())?;
            let coarse = gbm::coarsen_path(&fine).ok_or("odd step count")?;
            let sol_f = solver::solve_path(&problem_fine, &fine).map_err(|e| e.to_string())?;
            let sol_c = solver::solve_path(&problem_coarse, &coarse).map_err(|e| e.to_string())?;
            Ok((sol_c.sup_state_power(1.0), sol_f.sup_state_power(1.0)))
        })
        .collect();
    let stats = stats?;
    let mut coarse_rows = vec![Vec::with_capacity(paths_per_scenario); scen.len()];
    let mut fine_rows = vec![Vec::with_capacity(paths_per_scenario); scen.len()];
    for (&(s, _), &(c, f)) in jobs.iter().zip(&stats) {
        coarse_rows[s].push(c);
        fine_rows[s].push(f);
    }
    let est_c = gexp::sublinear_expectation(&coarse_rows)
        .map_err(|e| e.to_string())?
        .value;
    let est_f = gexp::sublinear_expectation(&fine_rows)
        .map_err(|e| e.to_string())?
        .value;
    let rel = (est_f - est_c).abs() / est_c.max(f64::MIN_POSITIVE);
    Ok((est_c, est_f, rel))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axioms_pass_quickly() {
        let out = expectation_axioms(42, 100);
        assert!(out.pass, "{}", out.detail);
    }

    #[test]
    fn all_small_suites_pass() {
        for out in [qv_band_suite(42), prox_yosida_suite()] {
            assert!(out.pass, "{}: {}", out.name, out.detail);
        }
    }
}
