//! Volatility-uncertainty scenarios and sublinear-expectation estimators.
//!
//! The uncertainty set is approximated by a finite family of piecewise-constant
//! volatility controls inside a band `[sigma_low_sq, sigma_high_sq]`. The
//! sublinear expectation of a functional is estimated as the maximum over
//! scenarios of the per-scenario sample mean, which lower-bounds the true
//! supremum; reported values are lower estimates. The capacity of an event is
//! the maximum empirical frequency across scenarios.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;

#[derive(Debug, Error, PartialEq)]
pub enum GexpError {
    #[error("invalid volatility band: need 0 <= sigma_low_sq <= sigma_high_sq and sigma_high_sq > 0, got [{low}, {high}]")]
    InvalidBand { low: f64, high: f64 },
    #[error("invalid volatility control: {0}")]
    InvalidControl(String),
    #[error("scenario set must contain both constant endpoint controls")]
    MissingEndpoints,
    #[error("scenario set is empty")]
    EmptyScenarioSet,
    #[error("need at least 2 constant controls, got {0}")]
    TooFewConstants(usize),
    #[error("scenario {0} has no samples")]
    EmptySampleVector(usize),
    #[error("indicator sample {value} at scenario {scenario} is not 0 or 1")]
    NonBinarySample { scenario: usize, value: f64 },
    #[error("chebyshev check needs alpha > 0 and p >= 1, got alpha={alpha}, p={p}")]
    BadChebyshevParams { alpha: f64, p: f64 },
}

/// Variance-rate band `[sigma_low_sq, sigma_high_sq]` per unit time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolatilityBand {
    pub sigma_low_sq: f64,
    pub sigma_high_sq: f64,
}

impl VolatilityBand {
    pub fn new(sigma_low_sq: f64, sigma_high_sq: f64) -> Result<Self, GexpError> {
        if !(sigma_low_sq.is_finite() && sigma_high_sq.is_finite())
            || sigma_low_sq < 0.0
            || sigma_low_sq > sigma_high_sq
            || sigma_high_sq <= 0.0
        {
            return Err(GexpError::InvalidBand {
                low: sigma_low_sq,
                high: sigma_high_sq,
            });
        }
        Ok(Self {
            sigma_low_sq,
            sigma_high_sq,
        })
    }

    pub fn is_degenerate(&self) -> bool {
        self.sigma_low_sq == self.sigma_high_sq
    }

    pub fn contains(&self, variance_rate: f64) -> bool {
        variance_rate >= self.sigma_low_sq && variance_rate <= self.sigma_high_sq
    }
}

/// The generator `G(a) = (sigma_high_sq * a_plus - sigma_low_sq * a_minus) / 2`.
///
/// Positively homogeneous and monotone in `a`; total on all finite `a`.
pub fn g_function(a: f64, band: &VolatilityBand) -> f64 {
    0.5 * (band.sigma_high_sq * a.max(0.0) - band.sigma_low_sq * (-a).max(0.0))
}

/// Piecewise-constant, right-continuous variance-rate path.
///
/// The value on `[breakpoints[i], breakpoints[i+1])` is `values[i]`; the last
/// value extends to infinity, so a valid control covers any horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolatilityControl {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl VolatilityControl {
    pub fn new(
        breakpoints: Vec<f64>,
        values: Vec<f64>,
        band: &VolatilityBand,
    ) -> Result<Self, GexpError> {
        if breakpoints.is_empty() || breakpoints.len() != values.len() {
            return Err(GexpError::InvalidControl(format!(
                "{} breakpoints vs {} values",
                breakpoints.len(),
                values.len()
            )));
        }
        if breakpoints[0] != 0.0 {
            return Err(GexpError::InvalidControl(
                "breakpoints must start at 0".into(),
            ));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(GexpError::InvalidControl(
                "breakpoints must be strictly increasing".into(),
            ));
        }
        if let Some(&v) = values.iter().find(|&&v| !band.contains(v)) {
            return Err(GexpError::InvalidControl(format!(
                "value {v} outside band [{}, {}]",
                band.sigma_low_sq, band.sigma_high_sq
            )));
        }
        Ok(Self {
            breakpoints,
            values,
        })
    }

    pub fn constant(variance_rate: f64, band: &VolatilityBand) -> Result<Self, GexpError> {
        Self::new(vec![0.0], vec![variance_rate], band)
    }

    /// Variance rate at time `t >= 0` (right-continuous lookup).
    pub fn value_at(&self, t: f64) -> f64 {
        match self.breakpoints.iter().rposition(|&b| b <= t) {
            Some(i) => self.values[i],
            None => self.values[0],
        }
    }

    pub fn is_constant(&self) -> bool {
        self.values.windows(2).all(|w| w[0] == w[1])
    }

    pub fn covers(&self, horizon: f64) -> bool {
        !self.breakpoints.is_empty() && self.breakpoints[0] == 0.0 && horizon >= 0.0
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Finite scenario family standing in for the uncertainty set.
///
/// Always contains the two constant endpoint controls (which coincide when
/// the band is degenerate), since the extremal controls dominate monotone
/// functionals of the quadratic variation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSet {
    pub controls: Vec<VolatilityControl>,
    pub band: VolatilityBand,
    pub label: String,
}

impl ScenarioSet {
    pub fn new(
        controls: Vec<VolatilityControl>,
        band: VolatilityBand,
        label: impl Into<String>,
    ) -> Result<Self, GexpError> {
        if controls.is_empty() {
            return Err(GexpError::EmptyScenarioSet);
        }
        let has_low = controls
            .iter()
            .any(|c| c.is_constant() && c.values[0] == band.sigma_low_sq);
        let has_high = controls
            .iter()
            .any(|c| c.is_constant() && c.values[0] == band.sigma_high_sq);
        if !(has_low && has_high) {
            return Err(GexpError::MissingEndpoints);
        }
        Ok(Self {
            controls,
            band,
            label: label.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.controls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.controls.is_empty()
    }
}

/// Build a scenario family: `n_constant` evenly spaced constant controls over
/// the band (endpoints included) plus `n_switching` piecewise-constant
/// controls with `switch_points` uniformly spaced breakpoints over
/// `[0, horizon)`, values drawn uniformly in the band from `seed`.
pub fn make_scenario_set_for_horizon(
    band: &VolatilityBand,
    n_constant: usize,
    n_switching: usize,
    switch_points: usize,
    seed: u64,
    horizon: f64,
) -> Result<ScenarioSet, GexpError> {
    if n_constant < 2 {
        return Err(GexpError::TooFewConstants(n_constant));
    }
    let mut controls = Vec::with_capacity(n_constant + n_switching);
    let span = band.sigma_high_sq - band.sigma_low_sq;
    for i in 0..n_constant {
        let frac = i as f64 / (n_constant - 1) as f64;
        controls.push(VolatilityControl::constant(
            band.sigma_low_sq + frac * span,
            band,
        )?);
    }
    let key = rng::hash_words(&[seed, 0x5343454e53u64]); // "SCENS"
    for j in 0..n_switching {
        let pts = switch_points.max(1);
        let mut breakpoints = Vec::with_capacity(pts);
        let mut values = Vec::with_capacity(pts);
        for q in 0..pts {
            breakpoints.push(q as f64 / pts as f64 * horizon);
            let u = rng::uniform01(key, (j * pts + q) as u64);
            values.push(band.sigma_low_sq + u * span);
        }
        controls.push(VolatilityControl::new(breakpoints, values, band)?);
    }
    ScenarioSet::new(
        controls,
        *band,
        format!("grid{n_constant}+switch{n_switching}"),
    )
}

/// As [`make_scenario_set_for_horizon`] with switching breakpoints spread over
/// the unit interval.
pub fn make_scenario_set(
    band: &VolatilityBand,
    n_constant: usize,
    n_switching: usize,
    switch_points: usize,
    seed: u64,
) -> Result<ScenarioSet, GexpError> {
    make_scenario_set_for_horizon(band, n_constant, n_switching, switch_points, seed, 1.0)
}

/// Max-of-means estimate of the sublinear expectation.
#[derive(Debug, Clone, PartialEq)]
pub struct SublinearEstimate {
    /// Maximum per-scenario sample mean (a lower estimate of the supremum).
    pub value: f64,
    pub per_scenario_means: Vec<f64>,
    /// Index of the scenario attaining the maximum.
    pub argmax_scenario: usize,
}

impl SublinearEstimate {
    /// Standard error of the attaining scenario's sample mean.
    pub fn argmax_stderr(samples: &[Vec<f64>], estimate: &SublinearEstimate) -> f64 {
        let row = &samples[estimate.argmax_scenario];
        let n = row.len() as f64;
        if row.len() < 2 {
            return 0.0;
        }
        let mean = estimate.per_scenario_means[estimate.argmax_scenario];
        let var = row.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    }
}

/// Sublinear expectation of a functional from per-scenario sample vectors:
/// the maximum over scenarios of the sample mean.
pub fn sublinear_expectation(samples: &[Vec<f64>]) -> Result<SublinearEstimate, GexpError> {
    if samples.is_empty() {
        return Err(GexpError::EmptyScenarioSet);
    }
    let mut means = Vec::with_capacity(samples.len());
    for (i, row) in samples.iter().enumerate() {
        if row.is_empty() {
            return Err(GexpError::EmptySampleVector(i));
        }
        means.push(row.iter().sum::<f64>() / row.len() as f64);
    }
    let (argmax, &value) = means
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty");
    Ok(SublinearEstimate {
        value,
        per_scenario_means: means,
        argmax_scenario: argmax,
    })
}

/// Capacity of an event from per-scenario 0/1 indicator vectors: the maximum
/// empirical frequency across scenarios. Always in `[0, 1]`.
pub fn capacity(indicator_samples: &[Vec<f64>]) -> Result<f64, GexpError> {
    if indicator_samples.is_empty() {
        return Err(GexpError::EmptyScenarioSet);
    }
    let mut best = 0.0f64;
    for (i, row) in indicator_samples.iter().enumerate() {
        if row.is_empty() {
            return Err(GexpError::EmptySampleVector(i));
        }
        for &v in row {
            if v != 0.0 && v != 1.0 {
                return Err(GexpError::NonBinarySample {
                    scenario: i,
                    value: v,
                });
            }
        }
        best = best.max(row.iter().sum::<f64>() / row.len() as f64);
    }
    Ok(best)
}

/// Outcome of one Markov/Chebyshev capacity bound check.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebyshevOutcome {
    /// Capacity estimate of the event `|X| > alpha`.
    pub lhs: f64,
    /// Sublinear-expectation estimate of `|X|^p / alpha^p`.
    pub rhs: f64,
    /// `lhs <= rhs` up to 3 standard errors of the frequency estimate.
    pub holds: bool,
}

/// Check `capacity(|X| > alpha) <= E_hat(|X|^p) / alpha^p` on sample data.
///
/// The statistical tolerance is 3 standard errors of the attaining
/// scenario's frequency estimate (one-sided false-failure rate < 0.3%).
pub fn chebyshev_check(
    functional_samples: &[Vec<f64>],
    alpha: f64,
    p: f64,
) -> Result<ChebyshevOutcome, GexpError> {
    if alpha <= 0.0 || p < 1.0 {
        return Err(GexpError::BadChebyshevParams { alpha, p });
    }
    let indicators: Vec<Vec<f64>> = functional_samples
        .iter()
        .map(|row| {
            row.iter()
                .map(|&x| if x.abs() > alpha { 1.0 } else { 0.0 })
                .collect()
        })
        .collect();
    let lhs = capacity(&indicators)?;
    let moments: Vec<Vec<f64>> = functional_samples
        .iter()
        .map(|row| row.iter().map(|&x| x.abs().powf(p)).collect())
        .collect();
    let rhs = sublinear_expectation(&moments)?.value / alpha.powf(p);
    // Frequency SE at the attaining scenario.
    let freq_est = sublinear_expectation(&indicators)?;
    let n = functional_samples[freq_est.argmax_scenario].len() as f64;
    let phat = freq_est.value;
    let se = (phat * (1.0 - phat) / n).sqrt();
    Ok(ChebyshevOutcome {
        lhs,
        rhs,
        holds: lhs <= rhs + 3.0 * se,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn band(lo: f64, hi: f64) -> VolatilityBand {
        VolatilityBand::new(lo, hi).unwrap()
    }

    #[test]
    fn g_function_values() {
        let b = band(1.0, 4.0);
        assert_eq!(g_function(0.0, &b), 0.0);
        assert_eq!(g_function(1.0, &b), 2.0);
        assert_eq!(g_function(-1.0, &b), -0.5);
    }

    #[test]
    fn g_function_homogeneous_and_monotone() {
        let b = band(0.5, 3.0);
        for a in [-2.0, -0.3, 0.0, 0.7, 5.0] {
            let lambda = 3.5;
            assert!((g_function(lambda * a, &b) - lambda * g_function(a, &b)).abs() < 1e-12);
        }
        assert!(g_function(-1.0, &b) <= g_function(0.5, &b));
    }

    #[test]
    fn band_rejects_bad_input() {
        assert!(VolatilityBand::new(-1.0, 4.0).is_err());
        assert!(VolatilityBand::new(5.0, 4.0).is_err());
        assert!(VolatilityBand::new(0.0, 0.0).is_err());
        assert!(VolatilityBand::new(0.0, 1.0).is_ok());
    }

    #[test]
    fn scenario_set_endpoint_grid() {
        let b = band(1.0, 4.0);
        let s = make_scenario_set(&b, 2, 0, 0, 1).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.controls[0].values(), &[1.0]);
        assert_eq!(s.controls[1].values(), &[4.0]);

        let s3 = make_scenario_set(&b, 3, 0, 0, 1).unwrap();
        let vals: Vec<f64> = s3.controls.iter().map(|c| c.values()[0]).collect();
        assert_eq!(vals, vec![1.0, 2.5, 4.0]);
    }

    #[test]
    fn scenario_set_degenerate_band_all_identical() {
        let b = band(2.0, 2.0);
        let s = make_scenario_set(&b, 5, 3, 4, 9).unwrap();
        assert_eq!(s.len(), 8);
        for c in &s.controls {
            assert!(c.is_constant());
            assert!(c.values().iter().all(|&v| v == 2.0));
        }
    }

    #[test]
    fn scenario_set_requires_two_constants() {
        let b = band(1.0, 4.0);
        assert_eq!(
            make_scenario_set(&b, 1, 0, 0, 1).unwrap_err(),
            GexpError::TooFewConstants(1)
        );
    }

    #[test]
    fn switching_controls_stay_in_band_and_are_deterministic() {
        let b = band(1.0, 4.0);
        let s1 = make_scenario_set(&b, 2, 3, 4, 77).unwrap();
        let s2 = make_scenario_set(&b, 2, 3, 4, 77).unwrap();
        assert_eq!(s1, s2);
        for c in &s1.controls {
            assert!(c.values().iter().all(|&v| b.contains(v)));
            assert_eq!(c.breakpoints()[0], 0.0);
        }
    }

    #[test]
    fn control_lookup_is_right_continuous() {
        let b = band(1.0, 4.0);
        let c = VolatilityControl::new(vec![0.0, 0.5], vec![1.0, 4.0], &b).unwrap();
        assert_eq!(c.value_at(0.0), 1.0);
        assert_eq!(c.value_at(0.49), 1.0);
        assert_eq!(c.value_at(0.5), 4.0);
        assert_eq!(c.value_at(10.0), 4.0);
    }

    #[test]
    fn expectation_constant_preserving() {
        let s = vec![vec![2.5; 8], vec![2.5; 16]];
        let est = sublinear_expectation(&s).unwrap();
        assert_eq!(est.value, 2.5);
    }

    #[test]
    fn expectation_positive_homogeneity() {
        let s = vec![vec![1.0, -2.0, 0.5], vec![3.0, 0.0, -1.0]];
        let est = sublinear_expectation(&s).unwrap();
        let scaled: Vec<Vec<f64>> = s
            .iter()
            .map(|r| r.iter().map(|x| 2.0 * x).collect())
            .collect();
        let est2 = sublinear_expectation(&scaled).unwrap();
        assert_eq!(est2.value, 2.0 * est.value);
    }

    #[test]
    fn expectation_singleton_is_plain_mean() {
        let s = vec![vec![1.0, 2.0, 3.0, 4.0]];
        let est = sublinear_expectation(&s).unwrap();
        assert_eq!(est.value, 2.5);
        assert_eq!(est.argmax_scenario, 0);
    }

    #[test]
    fn expectation_rejects_empty() {
        assert_eq!(
            sublinear_expectation(&[]).unwrap_err(),
            GexpError::EmptyScenarioSet
        );
        assert_eq!(
            sublinear_expectation(&[vec![1.0], vec![]]).unwrap_err(),
            GexpError::EmptySampleVector(1)
        );
    }

    #[test]
    fn capacity_bounds_and_errors() {
        assert_eq!(capacity(&[vec![1.0; 5], vec![1.0; 3]]).unwrap(), 1.0);
        assert_eq!(capacity(&[vec![0.0; 5]]).unwrap(), 0.0);
        assert!(matches!(
            capacity(&[vec![0.5]]).unwrap_err(),
            GexpError::NonBinarySample { .. }
        ));
    }

    #[test]
    fn capacity_monotone_in_event_inclusion() {
        let small = vec![vec![0.0, 1.0, 0.0, 0.0], vec![0.0, 0.0, 0.0, 1.0]];
        let large = vec![vec![1.0, 1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0, 1.0]];
        assert!(capacity(&small).unwrap() <= capacity(&large).unwrap());
    }

    #[test]
    fn chebyshev_deterministic_cases() {
        // X = c with alpha above and below c.
        let c = 1.5;
        let s = vec![vec![c; 32], vec![c; 32]];
        let above = chebyshev_check(&s, 2.0, 1.0).unwrap();
        assert_eq!(above.lhs, 0.0);
        assert!((above.rhs - c / 2.0).abs() < 1e-15);
        assert!(above.holds);

        let below = chebyshev_check(&s, 1.0, 1.0).unwrap();
        assert_eq!(below.lhs, 1.0);
        assert!(below.rhs > 1.0);
        assert!(below.holds);
    }

    #[test]
    fn chebyshev_qv_style_hand_case() {
        // Deterministic per-scenario values 1 and 4 (as the unit-time
        // quadratic variation under constant controls), alpha=2, p=1.
        let s = vec![vec![1.0; 16], vec![4.0; 16]];
        let out = chebyshev_check(&s, 2.0, 1.0).unwrap();
        assert_eq!(out.lhs, 1.0);
        assert!((out.rhs - 2.0).abs() < 1e-15);
        assert!(out.holds);
    }

    #[test]
    fn chebyshev_rejects_bad_params() {
        let s = vec![vec![1.0]];
        assert!(chebyshev_check(&s, 0.0, 1.0).is_err());
        assert!(chebyshev_check(&s, 1.0, 0.5).is_err());
    }
}
