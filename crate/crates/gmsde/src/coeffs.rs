//! Coefficient triples `(f, g, sigma)`, their time averages, non-Lipschitz
//! moduli, and the averaging-deviation diagnostics.
//!
//! The built-in presets are registered by name:
//!
//! * `"example4"` — the sine-series family `f = sin(s) * sum sin(kx)/k^2`,
//!   `g = sin(s) * sum sin^2(kx)/k^3`, `sigma = sin(s) * (k^{-3/2} sin(kx))_k`
//!   with closed-form averages carrying the factor `2/pi`.
//! * `"decaying"` — `(1 + gamma * exp(-s))` times an averaged triple, for
//!   which the time-averaged deviations provably vanish like `gamma / T1`.
//! * `"zero"` — all coefficients zero.
//! * `"bs_market"` — constant-coefficient geometric dynamics
//!   `b*x, beta*x, vol*x`.

use std::sync::Arc;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CoeffsError {
    #[error("modulus needs 0 < eta < 1/e and scale_c > 0, got eta={eta}, scale_c={scale_c}")]
    InvalidModulus { eta: f64, scale_c: f64 },
    #[error("modulus argument must be > 0, got {0}")]
    NonPositiveArgument(f64),
    #[error("series truncation and noise dimension must be >= 1")]
    EmptySeries,
    #[error("gamma must be >= 0, got {0}")]
    NegativeGamma(f64),
    #[error("unknown preset '{0}' (known: example4, decaying, zero, bs_market)")]
    UnknownPreset(String),
    #[error("deviation estimate needs t1 > 0 and quad_points >= 16")]
    BadDeviationParams,
    #[error("growth scan needs radius > 0 and at least 2 grid points")]
    BadScanParams,
}

type TimeCoeffFn = Arc<dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync>;
type FusedTimeFn = Arc<dyn Fn(f64, &[f64], &mut [f64], &mut [f64], &mut [f64]) + Send + Sync>;
type StateCoeffFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
type FusedStateFn = Arc<dyn Fn(&[f64], &mut [f64], &mut [f64], &mut [f64]) + Send + Sync>;

/// Time-dependent coefficient triple of a multi-valued SDE.
///
/// `f` and `g` fill `state_dim` drift entries; `sigma` fills a
/// `state_dim x noise_dim` row-major diffusion block. An optional fused
/// evaluator computes all three in one pass (the series presets share one
/// recurrence sweep).
#[derive(Clone)]
pub struct CoefficientTriple {
    pub state_dim: usize,
    pub noise_dim: usize,
    f: TimeCoeffFn,
    g: TimeCoeffFn,
    sigma: TimeCoeffFn,
    fused: Option<FusedTimeFn>,
    /// Quadratic-growth constant: `|f|^2 + |g|^2 + |sigma|^2 <= growth_l1 * (1 + |x|^2)`.
    pub growth_l1: Option<f64>,
    /// Optional time envelope of the continuity moduli; diagnostic only.
    pub lambda: Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
}

impl std::fmt::Debug for CoefficientTriple {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CoefficientTriple")
            .field("state_dim", &self.state_dim)
            .field("noise_dim", &self.noise_dim)
            .field("growth_l1", &self.growth_l1)
            .finish()
    }
}

impl CoefficientTriple {
    pub fn from_closures(
        state_dim: usize,
        noise_dim: usize,
        f: impl Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static,
        g: impl Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static,
        sigma: impl Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Self {
            state_dim,
            noise_dim,
            f: Arc::new(f),
            g: Arc::new(g),
            sigma: Arc::new(sigma),
            fused: None,
            growth_l1: None,
            lambda: None,
        }
    }

    pub fn with_growth_l1(mut self, l1: f64) -> Self {
        self.growth_l1 = Some(l1);
        self
    }

    pub fn eval_f(&self, t: f64, x: &[f64], out: &mut [f64]) {
        (self.f)(t, x, out);
    }

    pub fn eval_g(&self, t: f64, x: &[f64], out: &mut [f64]) {
        (self.g)(t, x, out);
    }

    pub fn eval_sigma(&self, t: f64, x: &[f64], out: &mut [f64]) {
        (self.sigma)(t, x, out);
    }

    /// Evaluate all three coefficient blocks at `(t, x)`.
    pub fn eval_all(
        &self,
        t: f64,
        x: &[f64],
        f_out: &mut [f64],
        g_out: &mut [f64],
        sigma_out: &mut [f64],
    ) {
        if let Some(fused) = &self.fused {
            fused(t, x, f_out, g_out, sigma_out);
        } else {
            (self.f)(t, x, f_out);
            (self.g)(t, x, g_out);
            (self.sigma)(t, x, sigma_out);
        }
    }

    pub fn f_at(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.state_dim];
        self.eval_f(t, x, &mut out);
        out
    }

    pub fn g_at(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.state_dim];
        self.eval_g(t, x, &mut out);
        out
    }

    pub fn sigma_at(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.state_dim * self.noise_dim];
        self.eval_sigma(t, x, &mut out);
        out
    }
}

/// Time-free averaged counterpart of a [`CoefficientTriple`].
#[derive(Clone)]
pub struct AveragedTriple {
    pub state_dim: usize,
    pub noise_dim: usize,
    f_bar: StateCoeffFn,
    g_bar: StateCoeffFn,
    sigma_bar: StateCoeffFn,
    fused: Option<FusedStateFn>,
    pub growth_l1: Option<f64>,
}

impl std::fmt::Debug for AveragedTriple {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AveragedTriple")
            .field("state_dim", &self.state_dim)
            .field("noise_dim", &self.noise_dim)
            .finish()
    }
}

impl AveragedTriple {
    pub fn from_closures(
        state_dim: usize,
        noise_dim: usize,
        f_bar: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
        g_bar: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
        sigma_bar: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Self {
            state_dim,
            noise_dim,
            f_bar: Arc::new(f_bar),
            g_bar: Arc::new(g_bar),
            sigma_bar: Arc::new(sigma_bar),
            fused: None,
            growth_l1: None,
        }
    }

    pub fn f_bar_at(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.state_dim];
        (self.f_bar)(x, &mut out);
        out
    }

    pub fn g_bar_at(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.state_dim];
        (self.g_bar)(x, &mut out);
        out
    }

    pub fn sigma_bar_at(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.state_dim * self.noise_dim];
        (self.sigma_bar)(x, &mut out);
        out
    }

    /// View the averaged triple as a time-dependent triple that ignores `t`.
    pub fn lift(&self) -> CoefficientTriple {
        let f = self.f_bar.clone();
        let g = self.g_bar.clone();
        let s = self.sigma_bar.clone();
        let fused = self.fused.clone().map(|fu| -> FusedTimeFn {
            Arc::new(move |_t, x, fo: &mut [f64], go: &mut [f64], so: &mut [f64]| {
                fu(x, fo, go, so)
            })
        });
        CoefficientTriple {
            state_dim: self.state_dim,
            noise_dim: self.noise_dim,
            f: Arc::new(move |_t, x, out: &mut [f64]| f(x, out)),
            g: Arc::new(move |_t, x, out: &mut [f64]| g(x, out)),
            sigma: Arc::new(move |_t, x, out: &mut [f64]| s(x, out)),
            fused,
            growth_l1: self.growth_l1,
            lambda: None,
        }
    }
}

// ---------------------------------------------------------------------------
// Non-Lipschitz moduli
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KappaVariant {
    /// `log(1/x)` patched with `log(1/eta) - 1 + eta/x` beyond `eta`.
    Kappa1Log,
    /// `log(1/x)` patched with a squared rational tail beyond `eta`.
    Kappa2LogsqPatch,
}

/// Continuity modulus `kappa(x) = scale_c * kappa_tilde(x)`; positive,
/// continuous at the patch point `eta`, bounded on `[1, inf)`, and with
/// `kappa(x)/log(1/x) -> scale_c` as `x -> 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModulusKappa {
    pub variant: KappaVariant,
    pub eta: f64,
    pub scale_c: f64,
}

impl ModulusKappa {
    pub fn new(variant: KappaVariant, eta: f64, scale_c: f64) -> Result<Self, CoeffsError> {
        if !(eta > 0.0 && eta < 1.0 / std::f64::consts::E) || !(scale_c > 0.0) {
            return Err(CoeffsError::InvalidModulus { eta, scale_c });
        }
        Ok(Self {
            variant,
            eta,
            scale_c,
        })
    }
}

/// Evaluate the modulus at `x > 0`.
pub fn kappa_eval(modulus: &ModulusKappa, x: f64) -> Result<f64, CoeffsError> {
    if !(x > 0.0) {
        return Err(CoeffsError::NonPositiveArgument(x));
    }
    let eta = modulus.eta;
    let raw = if x <= eta {
        (1.0 / x).ln()
    } else {
        match modulus.variant {
            KappaVariant::Kappa1Log => (1.0 / eta).ln() - 1.0 + eta / x,
            KappaVariant::Kappa2LogsqPatch => {
                let l = (1.0 / eta).ln();
                let a = l.sqrt() - 0.5 / l.sqrt();
                let b = 0.5 * eta / l.sqrt();
                let num = a * x + b;
                (num * num) / (x * x)
            }
        }
    };
    Ok(modulus.scale_c * raw)
}

// ---------------------------------------------------------------------------
// Sine-series family
// ---------------------------------------------------------------------------

/// Shared state for the sine-series coefficients: inverse-power tables and a
/// single recurrence sweep computing `sum sin(kx)/k^2`, `sum sin^2(kx)/k^3`,
/// and the diffusion components `k^{-3/2} sin(kx)` together.
struct SineSeries {
    k_trunc: usize,
    m: usize,
    inv_k2: Vec<f64>,
    inv_k3: Vec<f64>,
    inv_k32: Vec<f64>,
}

impl SineSeries {
    fn new(k_trunc: usize, m: usize) -> Self {
        let kmax = k_trunc.max(m);
        let mut inv_k2 = Vec::with_capacity(kmax);
        let mut inv_k3 = Vec::with_capacity(kmax);
        let mut inv_k32 = Vec::with_capacity(kmax);
        for k in 1..=kmax {
            let kf = k as f64;
            inv_k2.push(1.0 / (kf * kf));
            inv_k3.push(1.0 / (kf * kf * kf));
            inv_k32.push(kf.powf(-1.5));
        }
        Self {
            k_trunc,
            m,
            inv_k2,
            inv_k3,
            inv_k32,
        }
    }

    /// One sweep over `k = 1..max(k_trunc, m)` using the three-term sine
    /// recurrence `sin((k+1)x) = 2 cos(x) sin(kx) - sin((k-1)x)`.
    /// Returns `(sum_{k<=k_trunc} sin(kx)/k^2, sum_{k<=k_trunc} sin^2(kx)/k^3)`
    /// and fills `sigma_out[j] = (j+1)^{-3/2} sin((j+1)x)` when provided.
    fn sweep(&self, x: f64, mut sigma_out: Option<&mut [f64]>) -> (f64, f64) {
        let kmax = self.k_trunc.max(self.m);
        let two_cos = 2.0 * x.cos();
        let mut s_prev = 0.0; // sin(0 * x)
        let mut s = x.sin();
        let mut sum_f = 0.0;
        let mut sum_g = 0.0;
        for k in 1..=kmax {
            if k <= self.k_trunc {
                sum_f += s * self.inv_k2[k - 1];
                sum_g += s * s * self.inv_k3[k - 1];
            }
            if k <= self.m {
                if let Some(out) = sigma_out.as_deref_mut() {
                    out[k - 1] = s * self.inv_k32[k - 1];
                }
            }
            let next = two_cos * s - s_prev;
            s_prev = s;
            s = next;
        }
        (sum_f, sum_g)
    }

    /// Bound used for the quadratic-growth constant of the truncated family.
    fn growth_bound(&self) -> f64 {
        let s2: f64 = self.inv_k2[..self.k_trunc].iter().sum();
        let s3: f64 = self.inv_k3[..self.k_trunc].iter().sum();
        let s3m: f64 = self.inv_k3[..self.m].iter().sum();
        s2 * s2 + s3 * s3 + s3m
    }
}

/// The sine-series triple truncated at `k_trunc` (drifts) and `m`
/// (diffusion components): `f = sin(s) sum_{k<=k_trunc} sin(kx)/k^2`,
/// `g = sin(s) sum_{k<=k_trunc} sin^2(kx)/k^3`,
/// `sigma = sin(s) (k^{-3/2} sin(kx))_{k<=m}`.
///
/// The truncation tail of `f` is bounded by `sum_{k>k_trunc} k^{-2} <= 1/k_trunc`.
pub fn example4_triple(k_trunc: usize, m: usize) -> Result<CoefficientTriple, CoeffsError> {
    if k_trunc == 0 || m == 0 {
        return Err(CoeffsError::EmptySeries);
    }
    let series = Arc::new(SineSeries::new(k_trunc, m));
    let growth = series.growth_bound();
    let s_f = series.clone();
    let s_g = series.clone();
    let s_s = series.clone();
    let s_all = series.clone();
    let mut triple = CoefficientTriple::from_closures(
        1,
        m,
        move |t, x, out| {
            out[0] = t.sin() * s_f.sweep(x[0], None).0;
        },
        move |t, x, out| {
            out[0] = t.sin() * s_g.sweep(x[0], None).1;
        },
        move |t, x, out| {
            s_s.sweep(x[0], Some(out));
            let st = t.sin();
            for v in out.iter_mut() {
                *v *= st;
            }
        },
    );
    triple.fused = Some(Arc::new(move |t, x, f_out, g_out, sigma_out| {
        let (sf, sg) = s_all.sweep(x[0], Some(sigma_out));
        let st = t.sin();
        f_out[0] = st * sf;
        g_out[0] = st * sg;
        for v in sigma_out.iter_mut() {
            *v *= st;
        }
    }));
    triple.growth_l1 = Some(growth);
    triple.lambda = Some(Arc::new(|t: f64| t.sin().abs()));
    Ok(triple)
}

/// Closed-form time average of [`example4_triple`]: the same series scaled by
/// `2/pi` (the mean of `sin` over a half period).
pub fn example4_averaged(k_trunc: usize, m: usize) -> Result<AveragedTriple, CoeffsError> {
    if k_trunc == 0 || m == 0 {
        return Err(CoeffsError::EmptySeries);
    }
    let factor = 2.0 / std::f64::consts::PI;
    let series = Arc::new(SineSeries::new(k_trunc, m));
    let growth = factor * factor * series.growth_bound();
    let s_f = series.clone();
    let s_g = series.clone();
    let s_s = series.clone();
    let s_all = series.clone();
    let mut avg = AveragedTriple::from_closures(
        1,
        m,
        move |x, out| {
            out[0] = factor * s_f.sweep(x[0], None).0;
        },
        move |x, out| {
            out[0] = factor * s_g.sweep(x[0], None).1;
        },
        move |x, out| {
            s_s.sweep(x[0], Some(out));
            for v in out.iter_mut() {
                *v *= factor;
            }
        },
    );
    avg.fused = Some(Arc::new(move |x, f_out, g_out, sigma_out| {
        let (sf, sg) = s_all.sweep(x[0], Some(sigma_out));
        f_out[0] = factor * sf;
        g_out[0] = factor * sg;
        for v in sigma_out.iter_mut() {
            *v *= factor;
        }
    }));
    avg.growth_l1 = Some(growth);
    Ok(avg)
}

/// Time-dependent perturbation of an averaged triple whose deviations vanish:
/// `f(s,x) = (1 + gamma e^{-s}) f_bar(x)`, `g` likewise, and
/// `sigma(s,x) = sqrt(1 + gamma e^{-s}) sigma_bar(x)`.
///
/// The normalized deviations are bounded by `gamma (1 - e^{-T1}) / T1` times
/// the coefficient scale, hence tend to zero as `T1` grows.
pub fn decaying_perturbation_triple(
    base: &AveragedTriple,
    gamma: f64,
) -> Result<CoefficientTriple, CoeffsError> {
    if !(gamma >= 0.0) {
        return Err(CoeffsError::NegativeGamma(gamma));
    }
    let f = base.f_bar.clone();
    let g = base.g_bar.clone();
    let s = base.sigma_bar.clone();
    let fused_base = base.fused.clone();
    let growth = base.growth_l1.map(|l1| (1.0 + gamma) * (1.0 + gamma) * l1);
    let mut triple = CoefficientTriple {
        state_dim: base.state_dim,
        noise_dim: base.noise_dim,
        f: Arc::new(move |t: f64, x: &[f64], out: &mut [f64]| {
            f(x, out);
            let c = 1.0 + gamma * (-t).exp();
            for v in out.iter_mut() {
                *v *= c;
            }
        }),
        g: Arc::new(move |t: f64, x: &[f64], out: &mut [f64]| {
            g(x, out);
            let c = 1.0 + gamma * (-t).exp();
            for v in out.iter_mut() {
                *v *= c;
            }
        }),
        sigma: Arc::new(move |t: f64, x: &[f64], out: &mut [f64]| {
            s(x, out);
            let c = (1.0 + gamma * (-t).exp()).sqrt();
            for v in out.iter_mut() {
                *v *= c;
            }
        }),
        fused: None,
        growth_l1: growth,
        lambda: Some(Arc::new(move |t: f64| 1.0 + gamma * (-t).exp())),
    };
    if let Some(fb) = fused_base {
        triple.fused = Some(Arc::new(
            move |t: f64, x: &[f64], f_out: &mut [f64], g_out: &mut [f64], s_out: &mut [f64]| {
                fb(x, f_out, g_out, s_out);
                let c = 1.0 + gamma * (-t).exp();
                let cs = c.sqrt();
                for v in f_out.iter_mut() {
                    *v *= c;
                }
                for v in g_out.iter_mut() {
                    *v *= c;
                }
                for v in s_out.iter_mut() {
                    *v *= cs;
                }
            },
        ));
    }
    Ok(triple)
}

// ---------------------------------------------------------------------------
// Diagnostics
// ---------------------------------------------------------------------------

/// Normalized time-averaged deviations at a fixed state `x`:
/// `dev_f = (1/T1) int_0^T1 |f(s,x) - f_bar(x)| ds` (likewise `dev_g`), and
/// `dev_sigma_sq = (1/T1) int_0^T1 |sigma(s,x) - sigma_bar(x)|^2 ds`,
/// estimated by the composite trapezoid rule on `quad_points` panels.
pub fn averaging_deviation(
    triple: &CoefficientTriple,
    averaged: &AveragedTriple,
    x: &[f64],
    t1: f64,
    quad_points: usize,
) -> Result<(f64, f64, f64), CoeffsError> {
    if !(t1 > 0.0) || quad_points < 16 {
        return Err(CoeffsError::BadDeviationParams);
    }
    let d = triple.state_dim;
    let dm = d * triple.noise_dim;
    let f_bar = averaged.f_bar_at(x);
    let g_bar = averaged.g_bar_at(x);
    let sigma_bar = averaged.sigma_bar_at(x);
    let mut f_buf = vec![0.0; d];
    let mut g_buf = vec![0.0; d];
    let mut s_buf = vec![0.0; dm];
    let h = t1 / quad_points as f64;
    let mut acc = [0.0f64; 3];
    for i in 0..=quad_points {
        let s = i as f64 * h;
        let w = if i == 0 || i == quad_points { 0.5 } else { 1.0 };
        triple.eval_all(s, x, &mut f_buf, &mut g_buf, &mut s_buf);
        let df: f64 = f_buf
            .iter()
            .zip(&f_bar)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let dg: f64 = g_buf
            .iter()
            .zip(&g_bar)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let ds2: f64 = s_buf
            .iter()
            .zip(&sigma_bar)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        acc[0] += w * df;
        acc[1] += w * dg;
        acc[2] += w * ds2;
    }
    Ok((
        acc[0] * h / t1,
        acc[1] * h / t1,
        acc[2] * h / t1,
    ))
}

/// Smallest feasible quadratic-growth constant on a scan grid: the maximum of
/// `(|f|^2 + |g|^2 + |sigma|^2) / (1 + |x|^2)` over states along each
/// coordinate axis in `[-radius, radius]` and times in one period `[0, 2 pi]`.
pub fn growth_scan(
    triple: &CoefficientTriple,
    radius: f64,
    grid_points: usize,
    time_points: usize,
) -> Result<f64, CoeffsError> {
    if !(radius > 0.0) || grid_points < 2 || time_points < 1 {
        return Err(CoeffsError::BadScanParams);
    }
    let d = triple.state_dim;
    let mut f_buf = vec![0.0; d];
    let mut g_buf = vec![0.0; d];
    let mut s_buf = vec![0.0; d * triple.noise_dim];
    let mut worst = 0.0f64;
    let mut x = vec![0.0; d];
    for axis in 0..d {
        for i in 0..grid_points {
            x.iter_mut().for_each(|v| *v = 0.0);
            x[axis] = -radius + 2.0 * radius * i as f64 / (grid_points - 1) as f64;
            let xsq: f64 = x.iter().map(|v| v * v).sum();
            for j in 0..time_points {
                let t = if time_points == 1 {
                    0.0
                } else {
                    std::f64::consts::TAU * j as f64 / (time_points - 1) as f64
                };
                triple.eval_all(t, &x, &mut f_buf, &mut g_buf, &mut s_buf);
                let total: f64 = f_buf.iter().map(|v| v * v).sum::<f64>()
                    + g_buf.iter().map(|v| v * v).sum::<f64>()
                    + s_buf.iter().map(|v| v * v).sum::<f64>();
                worst = worst.max(total / (1.0 + xsq));
            }
        }
    }
    Ok(worst)
}

// ---------------------------------------------------------------------------
// Preset registry
// ---------------------------------------------------------------------------

/// Numeric knobs of the named presets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PresetParams {
    pub gamma: f64,
    pub k_trunc: usize,
    pub noise_terms: usize,
    pub bs_drift: f64,
    pub bs_qv_drift: f64,
    pub bs_vol: f64,
}

impl Default for PresetParams {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            k_trunc: 1000,
            noise_terms: 1000,
            bs_drift: 0.05,
            bs_qv_drift: 0.02,
            bs_vol: 0.2,
        }
    }
}

/// A named pair of original and averaged dynamics.
#[derive(Debug, Clone)]
pub struct PresetDynamics {
    pub name: String,
    pub original: CoefficientTriple,
    pub averaged: AveragedTriple,
}

/// Look up a preset by name.
pub fn preset(name: &str, params: &PresetParams) -> Result<PresetDynamics, CoeffsError> {
    match name {
        "example4" => Ok(PresetDynamics {
            name: name.into(),
            original: example4_triple(params.k_trunc, params.noise_terms)?,
            averaged: example4_averaged(params.k_trunc, params.noise_terms)?,
        }),
        "decaying" => {
            let base = example4_averaged(params.k_trunc, params.noise_terms)?;
            Ok(PresetDynamics {
                name: name.into(),
                original: decaying_perturbation_triple(&base, params.gamma)?,
                averaged: base,
            })
        }
        "zero" => {
            let zero_t = CoefficientTriple::from_closures(
                1,
                1,
                |_, _, out| out.fill(0.0),
                |_, _, out| out.fill(0.0),
                |_, _, out| out.fill(0.0),
            )
            .with_growth_l1(0.0);
            let mut zero_a = AveragedTriple::from_closures(
                1,
                1,
                |_, out| out.fill(0.0),
                |_, out| out.fill(0.0),
                |_, out| out.fill(0.0),
            );
            zero_a.growth_l1 = Some(0.0);
            Ok(PresetDynamics {
                name: name.into(),
                original: zero_t,
                averaged: zero_a,
            })
        }
        "bs_market" => {
            let (b, beta, vol) = (params.bs_drift, params.bs_qv_drift, params.bs_vol);
            let growth = b * b + beta * beta + vol * vol;
            let original = CoefficientTriple::from_closures(
                1,
                1,
                move |_, x, out| out[0] = b * x[0],
                move |_, x, out| out[0] = beta * x[0],
                move |_, x, out| out[0] = vol * x[0],
            )
            .with_growth_l1(growth);
            let mut averaged = AveragedTriple::from_closures(
                1,
                1,
                move |x, out| out[0] = b * x[0],
                move |x, out| out[0] = beta * x[0],
                move |x, out| out[0] = vol * x[0],
            );
            averaged.growth_l1 = Some(growth);
            Ok(PresetDynamics {
                name: name.into(),
                original,
                averaged,
            })
        }
        other => Err(CoeffsError::UnknownPreset(other.into())),
    }
}
