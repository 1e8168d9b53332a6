//! Discrete G-Brownian-motion paths under a volatility control.
//!
//! Each step draws standard normals from the counter-based generator keyed by
//! `(path seed, step, component)`, scales them by `sqrt(sigma_sq(t_k) * h)`,
//! and accumulates the quadratic variation deterministically as
//! `sigma_sq(t_k) * h`. The quadratic variation is therefore exactly the
//! control integral, independent of the Gaussian draws; the sum-of-squared
//! increments variant lives only in the empirical inequality checks.

use std::io::Write;

use thiserror::Error;

use crate::gexp::{VolatilityBand, VolatilityControl};
use crate::rng;

#[derive(Debug, Error, PartialEq)]
pub enum GbmError {
    #[error("invalid time grid: horizon={horizon}, n_steps={n_steps}")]
    InvalidGrid { horizon: f64, n_steps: usize },
    #[error("control does not cover the horizon {0}")]
    ControlCoverage(f64),
    #[error("noise dimension must be >= 1")]
    ZeroNoiseDim,
}

/// Uniform grid `t_k = k * horizon / n_steps` on `[0, horizon]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub horizon: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, n_steps: usize) -> Result<Self, GbmError> {
        if !(horizon > 0.0 && horizon.is_finite()) || n_steps < 1 {
            return Err(GbmError::InvalidGrid { horizon, n_steps });
        }
        Ok(Self { horizon, n_steps })
    }

    #[inline]
    pub fn step(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    #[inline]
    pub fn t(&self, k: usize) -> f64 {
        k as f64 * self.step()
    }
}

/// One realization of `(B, <B>)` on a grid under one control.
///
/// `db`/`dqv` hold the per-step increments and are the primary data; the
/// levels `b`/`qv` are their running sums, so `b[k+1] == b[k] + db[k]`
/// bit-for-bit. `b` is laid out step-major with `noise_dim` components per
/// grid point; `qv` is the single scalar quadratic variation shared by all
/// components.
#[derive(Debug, Clone, PartialEq)]
pub struct GPath {
    pub b: Vec<f64>,
    pub qv: Vec<f64>,
    pub db: Vec<f64>,
    pub dqv: Vec<f64>,
    pub noise_dim: usize,
    pub control_index: usize,
    pub path_seed: u64,
}

impl GPath {
    pub fn n_steps(&self) -> usize {
        self.dqv.len()
    }

    /// Component `j` of `B` at grid point `k`.
    #[inline]
    pub fn b_at(&self, k: usize, j: usize) -> f64 {
        self.b[k * self.noise_dim + j]
    }

    /// Increment slice `(B_{t_{k+1}} - B_{t_k})` for step `k`.
    #[inline]
    pub fn db_at(&self, k: usize) -> &[f64] {
        &self.db[k * self.noise_dim..(k + 1) * self.noise_dim]
    }
}

/// Sample one path of `(B, <B>)` under `control` on `grid`.
///
/// Deterministic for fixed `(control, grid, noise_dim, seed)`; distinct seeds
/// give independent draws. Safe to call concurrently.
pub fn sample_path(
    control: &VolatilityControl,
    grid: &TimeGrid,
    noise_dim: usize,
    seed: u64,
) -> Result<GPath, GbmError> {
    if noise_dim == 0 {
        return Err(GbmError::ZeroNoiseDim);
    }
    if !control.covers(grid.horizon) {
        return Err(GbmError::ControlCoverage(grid.horizon));
    }
    let n = grid.n_steps;
    let m = noise_dim;
    let h = grid.step();
    let key = rng::hash_words(&[seed]);
    let pairs_per_step = m.div_ceil(2) as u64;

    let mut db = vec![0.0; n * m];
    let mut dqv = vec![0.0; n];
    let mut b = vec![0.0; (n + 1) * m];
    let mut qv = vec![0.0; n + 1];

    for k in 0..n {
        let var_rate = control.value_at(grid.t(k));
        let scale = (var_rate * h).sqrt();
        let row = &mut db[k * m..(k + 1) * m];
        let base = k as u64 * pairs_per_step;
        let mut j = 0;
        while j < m {
            let (z0, z1) = rng::normal_pair(key, base + (j / 2) as u64);
            row[j] = scale * z0;
            if j + 1 < m {
                row[j + 1] = scale * z1;
            }
            j += 2;
        }
        dqv[k] = var_rate * h;
        for j in 0..m {
            b[(k + 1) * m + j] = b[k * m + j] + row[j];
        }
        qv[k + 1] = qv[k] + dqv[k];
    }

    Ok(GPath {
        b,
        qv,
        db,
        dqv,
        noise_dim: m,
        control_index: 0,
        path_seed: seed,
    })
}

/// Aggregate a path onto the grid with half as many steps by summing adjacent
/// increments. The coarse path carries the same noise, which couples solves
/// at step sizes `h` and `h/2` for low-variance refinement comparisons.
/// Returns `None` when the step count is odd.
pub fn coarsen_path(path: &GPath) -> Option<GPath> {
    let n = path.n_steps();
    if n % 2 != 0 || n == 0 {
        return None;
    }
    let m = path.noise_dim;
    let nc = n / 2;
    let mut db = vec![0.0; nc * m];
    let mut dqv = vec![0.0; nc];
    for j in 0..nc {
        dqv[j] = path.dqv[2 * j] + path.dqv[2 * j + 1];
        for c in 0..m {
            db[j * m + c] = path.db[2 * j * m + c] + path.db[(2 * j + 1) * m + c];
        }
    }
    let mut b = vec![0.0; (nc + 1) * m];
    let mut qv = vec![0.0; nc + 1];
    for j in 0..nc {
        qv[j + 1] = qv[j] + dqv[j];
        for c in 0..m {
            b[(j + 1) * m + c] = b[j * m + c] + db[j * m + c];
        }
    }
    Some(GPath {
        b,
        qv,
        db,
        dqv,
        noise_dim: m,
        control_index: path.control_index,
        path_seed: path.path_seed,
    })
}

/// True iff the path's quadratic variation respects the band envelope:
/// `qv[0] = 0`, `qv` nondecreasing, and
/// `sigma_low_sq * t_k <= qv[k] <= sigma_high_sq * t_k` within `1e-12`
/// relative tolerance.
pub fn qv_band_check(path: &GPath, band: &VolatilityBand, grid: &TimeGrid) -> bool {
    if path.qv.is_empty() || path.qv[0] != 0.0 {
        return false;
    }
    for j in 0..path.noise_dim {
        if path.b_at(0, j) != 0.0 {
            return false;
        }
    }
    let rel = 1e-12;
    for k in 0..path.qv.len() {
        let t = grid.t(k);
        let lo = band.sigma_low_sq * t;
        let hi = band.sigma_high_sq * t;
        let tol = rel * (1.0 + hi.abs());
        if path.qv[k] < lo - tol || path.qv[k] > hi + tol {
            return false;
        }
        if k > 0 && path.qv[k] < path.qv[k - 1] {
            return false;
        }
    }
    true
}

/// Dump a path as CSV with columns `t,B,QV` (first noise component).
pub fn write_path_csv<W: Write>(out: &mut W, path: &GPath, grid: &TimeGrid) -> std::io::Result<()> {
    writeln!(out, "t,B,QV")?;
    for k in 0..=path.n_steps() {
        writeln!(
            out,
            "{:.16e},{:.16e},{:.16e}",
            grid.t(k),
            path.b_at(k, 0),
            path.qv[k]
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gexp::make_scenario_set;

    fn band(lo: f64, hi: f64) -> VolatilityBand {
        VolatilityBand::new(lo, hi).unwrap()
    }

    #[test]
    fn qv_is_exact_control_integral() {
        let b = band(1.0, 4.0);
        let c = VolatilityControl::constant(4.0, &b).unwrap();
        let grid = TimeGrid::new(1.0, 256).unwrap();
        let p = sample_path(&c, &grid, 1, 7).unwrap();
        // 256 * (4/256) sums exactly in binary.
        assert_eq!(p.qv[256], 4.0);
        assert_eq!(p.qv[0], 0.0);
        assert_eq!(p.b_at(0, 0), 0.0);
    }

    #[test]
    fn same_inputs_same_path() {
        let b = band(1.0, 4.0);
        let c = VolatilityControl::new(vec![0.0, 0.5], vec![1.0, 4.0], &b).unwrap();
        let grid = TimeGrid::new(1.0, 128).unwrap();
        let p1 = sample_path(&c, &grid, 2, 42).unwrap();
        let p2 = sample_path(&c, &grid, 2, 42).unwrap();
        assert_eq!(p1, p2);
        let p3 = sample_path(&c, &grid, 2, 43).unwrap();
        assert_ne!(p1.b, p3.b);
    }

    #[test]
    fn degenerate_band_matches_classical_brownian_motion() {
        let b = band(1.0, 1.0);
        let c = VolatilityControl::constant(1.0, &b).unwrap();
        let grid = TimeGrid::new(1.0, 64).unwrap();
        let n_paths = 10_000;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for i in 0..n_paths {
            let p = sample_path(&c, &grid, 1, 1000 + i).unwrap();
            let x = p.b_at(64, 0);
            sum += x;
            sumsq += x * x;
        }
        let n = n_paths as f64;
        let mean = sum / n;
        let var = (sumsq - n * mean * mean) / (n - 1.0);
        // Var(B_1) = 1 within 3 SE, SE(var) ~ sqrt(2/(n-1)).
        let se = (2.0 / (n - 1.0)).sqrt();
        assert!(
            (var - 1.0).abs() < 3.0 * se,
            "var={var}, tolerance={}",
            3.0 * se
        );
    }

    #[test]
    fn third_absolute_moment_is_gaussian_at_small_step() {
        // E|B_h|^3 / h = sqrt(h) * E|Z|^3 with E|Z|^3 = 2*sqrt(2/pi).
        let b = band(1.0, 1.0);
        let c = VolatilityControl::constant(1.0, &b).unwrap();
        let grid = TimeGrid::new(1.0, 1024).unwrap();
        let h = grid.step();
        let n_paths = 4000u64;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for i in 0..n_paths {
            let p = sample_path(&c, &grid, 1, 50_000 + i).unwrap();
            let v = p.db_at(0)[0].abs().powi(3) / h;
            sum += v;
            sumsq += v * v;
        }
        let n = n_paths as f64;
        let mean = sum / n;
        let var = (sumsq - n * mean * mean) / (n - 1.0);
        let expected = h.sqrt() * 2.0 * (2.0 / std::f64::consts::PI).sqrt();
        let se = (var / n).sqrt();
        assert!(
            (mean - expected).abs() < 3.0 * se,
            "mean={mean}, expected={expected}"
        );
    }

    #[test]
    fn band_check_accepts_sampled_and_rejects_tampered() {
        let b = band(1.0, 4.0);
        let set = make_scenario_set(&b, 3, 2, 4, 5).unwrap();
        let grid = TimeGrid::new(2.0, 100).unwrap();
        for c in &set.controls {
            let p = sample_path(c, &grid, 1, 11).unwrap();
            assert!(qv_band_check(&p, &b, &grid));
        }
        let c = VolatilityControl::constant(4.0, &b).unwrap();
        let mut p = sample_path(&c, &grid, 1, 11).unwrap();
        p.qv[2] = p.qv[1] - 1e-3;
        assert!(!qv_band_check(&p, &b, &grid));
    }

    #[test]
    fn constant_upper_control_touches_upper_envelope() {
        let b = band(1.0, 4.0);
        let c = VolatilityControl::constant(4.0, &b).unwrap();
        let grid = TimeGrid::new(1.0, 64).unwrap();
        let p = sample_path(&c, &grid, 1, 3).unwrap();
        for k in 0..=64 {
            assert!((p.qv[k] - 4.0 * grid.t(k)).abs() <= 1e-12 * (1.0 + 4.0 * grid.t(k)));
        }
    }

    #[test]
    fn multi_component_increments_share_qv() {
        let b = band(1.0, 4.0);
        let c = VolatilityControl::constant(2.0, &b).unwrap();
        let grid = TimeGrid::new(1.0, 32).unwrap();
        let p = sample_path(&c, &grid, 3, 13).unwrap();
        assert_eq!(p.b.len(), 33 * 3);
        assert_eq!(p.qv.len(), 33);
        assert!((p.qv[32] - 2.0).abs() < 1e-12);
        // Components are distinct draws.
        assert_ne!(p.b_at(32, 0), p.b_at(32, 1));
    }

    #[test]
    fn coarsened_path_sums_adjacent_increments() {
        let b = band(1.0, 4.0);
        let c = VolatilityControl::new(vec![0.0, 0.3], vec![1.0, 3.0], &b).unwrap();
        let grid = TimeGrid::new(1.0, 64).unwrap();
        let fine = sample_path(&c, &grid, 2, 17).unwrap();
        let coarse = coarsen_path(&fine).unwrap();
        assert_eq!(coarse.n_steps(), 32);
        assert_eq!(coarse.db[0], fine.db[0] + fine.db[2]);
        // Terminal levels agree up to summation order.
        assert!((coarse.b_at(32, 0) - fine.b_at(64, 0)).abs() < 1e-12);
        assert!((coarse.qv[32] - fine.qv[64]).abs() < 1e-12);
        let coarse_grid = TimeGrid::new(1.0, 32).unwrap();
        assert!(qv_band_check(&coarse, &b, &coarse_grid));
        assert!(coarsen_path(&coarse).is_some());
        let odd = sample_path(&c, &TimeGrid::new(1.0, 7).unwrap(), 1, 3).unwrap();
        assert!(coarsen_path(&odd).is_none());
    }

    #[test]
    fn csv_dump_has_header_and_rows() {
        let b = band(1.0, 1.0);
        let c = VolatilityControl::constant(1.0, &b).unwrap();
        let grid = TimeGrid::new(1.0, 4).unwrap();
        let p = sample_path(&c, &grid, 1, 1).unwrap();
        let mut buf = Vec::new();
        write_path_csv(&mut buf, &p, &grid).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,B,QV");
        assert_eq!(lines.len(), 6);
    }
}
