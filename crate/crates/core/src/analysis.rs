//! Numeric side of the MaxExp / Gamma / heat-diffusion connection:
//! parametrizations, grid certification of the upper bounds, gap formulas,
//! ODE residuals, and the data behind the pushforward, operator-profile and
//! detector figures.

use std::f64::consts::{E, PI};

use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::hosvd::detector_likelihood;
use crate::spectral::{pn_scalar, PnSpec};

/// A bound is considered to hold when every gap is at least `-BOUND_TOL`.
pub const BOUND_TOL: f64 = 1e-12;

/// Local minima of the gap at or below this value are reported as touch points.
pub const TOUCH_TOL: f64 = 1e-6;

/// Default grid step for λ and θ sweeps.
pub const DEFAULT_STEP: f64 = 1e-4;

/// Step of the central differences in the MaxExp ODE residual.
pub const ODE_FD_STEP: f64 = 1e-6;

const E_RATIO: f64 = E / (E - 1.0);

/// `(η/(η+1))^η`, computed without overflow.
fn ratio_pow(eta: f64) -> f64 {
    (-eta * (1.0 / eta).ln_1p()).exp()
}

fn check_eta(eta: f64) -> Result<()> {
    if !(eta >= 1.0) || !eta.is_finite() {
        return invalid(format!("η must be a finite value >= 1, got {eta}"));
    }
    Ok(())
}

/// `t(η) = (e/(e−1)) η^η / (η+1)^(η+1)`: the heat-diffusion time under which
/// MaxExp with power η upper-bounds HDP.
pub fn t_of_eta(eta: f64) -> Result<f64> {
    check_eta(eta)?;
    Ok(E_RATIO * ratio_pow(eta) / (eta + 1.0))
}

/// `α(η) = (e/(e−1)) (η/(η+1))^(η+1) = η · t(η)`.
pub fn alpha_of_eta(eta: f64) -> Result<f64> {
    check_eta(eta)?;
    Ok(E_RATIO * ratio_pow(eta) * eta / (eta + 1.0))
}

/// `y(η) = (e/(e−1)) (η/(η+1))^η`, the touch point in the `y = t/λ`
/// reparametrization.
pub fn y_of_eta(eta: f64) -> Result<f64> {
    check_eta(eta)?;
    Ok(E_RATIO * ratio_pow(eta))
}

/// Closed-form approximate inverse `0.5 √(4/(t²(e−1)²) + 1) − 0.5`.
/// Accurate for large η, loose near η = 1.
pub fn eta_of_t(t: f64) -> Result<f64> {
    check_t_range(t)?;
    let em1 = E - 1.0;
    Ok(0.5 * (4.0 / (t * t * em1 * em1) + 1.0).sqrt() - 0.5)
}

fn check_t_range(t: f64) -> Result<()> {
    let t1 = t_of_eta(1.0)?;
    if !(t > 0.0 && t <= t1) {
        return invalid(format!("t must lie in (0, t(1) = {t1}], got {t}"));
    }
    Ok(())
}

/// Exact numeric inverse of [`t_of_eta`] by bisection down to adjacent
/// floats (`t(η)` is strictly decreasing on `η ≥ 1`).
pub fn eta_of_t_exact(t: f64) -> Result<f64> {
    check_t_range(t)?;
    let mut lo = 1.0;
    let mut hi = 2.0;
    while t_of_eta(hi)? > t {
        lo = hi;
        hi *= 2.0;
    }
    // run to exhaustion: the ODE residual differences this inverse
    for _ in 0..2100 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if t_of_eta(mid)? > t {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `dη/dt` by the inverse function rule, `1 / (t(η) · ln(η/(η+1)))`.
pub fn deta_dt(eta: f64) -> Result<f64> {
    Ok(1.0 / (t_of_eta(eta)? * (-(1.0 / eta).ln_1p())))
}

/// `γ(t) = e t`.
pub fn gamma_of_t(t: f64) -> Result<f64> {
    if !(t > 0.0) || !t.is_finite() {
        return invalid(format!("t must be positive, got {t}"));
    }
    Ok(E * t)
}

/// `t(γ) = γ / e`, γ ∈ (0, 1].
pub fn t_of_gamma(gamma: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return invalid(format!("γ must lie in (0, 1], got {gamma}"));
    }
    Ok(gamma / E)
}

/// Gaps `(ε₁, ε₂)` between MaxExp and HDP at `λ = t(η)` and
/// `λ = 1/(η+1)` respectively.
pub fn bound_gaps(eta: f64) -> Result<(f64, f64)> {
    let t = t_of_eta(eta)?;
    let q = ratio_pow(eta);
    let eps1 = (E - 1.0) / E - (1.0 - t).powf(eta);
    let eps2 = 1.0 - q - (-E_RATIO * q).exp();
    Ok((eps1, eps2))
}

/// `1 − (1 − λ)^η − exp(−t/λ)`.
pub fn maxexp_hdp_gap(lambda: f64, eta: f64, t: f64) -> f64 {
    1.0 - (1.0 - lambda).powf(eta) - (-t / lambda).exp()
}

/// `λ^γ − exp(−t/λ)`.
pub fn gamma_hdp_gap(lambda: f64, gamma: f64, t: f64) -> f64 {
    lambda.powf(gamma) - (-t / lambda).exp()
}

/// Per-parameter summary inside a [`BoundReport`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    /// η for MaxExp sweeps, t for Gamma sweeps.
    pub param: f64,
    /// HDP time the operator is compared against.
    pub t: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub points: usize,
    pub min_gap: f64,
    pub min_gap_at: f64,
    pub max_gap: f64,
    pub max_gap_at: f64,
}

/// Outcome of a grid certification of an upper bound over HDP.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub grid: String,
    pub pass: bool,
    pub min_gap: f64,
    pub max_gap: f64,
    /// `(λ, gap)` of local gap minima at or below [`TOUCH_TOL`].
    pub touch_points: Vec<(f64, f64)>,
    /// `(param, λ)` of the most negative gap.
    pub worst: (f64, f64),
    pub per_param: Vec<ParamSummary>,
}

/// One row of a certification grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapSample {
    pub param: f64,
    pub lambda: f64,
    pub gap: f64,
}

fn check_step(step: f64) -> Result<()> {
    if !(step > 0.0 && step < 1.0) {
        return invalid(format!("grid step must lie in (0, 1), got {step}"));
    }
    Ok(())
}

/// `lo + k·step` for `k ≥ 1` up to `hi`, with `hi` appended, plus any
/// `extra` points inside `(lo, hi]`, sorted.
fn open_closed_grid(lo: f64, hi: f64, step: f64, extra: &[f64]) -> Vec<f64> {
    let n = ((hi - lo) / step).floor() as usize;
    let mut g: Vec<f64> = (1..=n).map(|k| lo + k as f64 * step).filter(|&l| l < hi).collect();
    g.push(hi);
    g.extend(extra.iter().copied().filter(|&x| x > lo && x <= hi));
    g.sort_by(f64::total_cmp);
    g.dedup();
    g
}

fn summarize(param: f64, t: f64, samples: &[GapSample]) -> (ParamSummary, Vec<(f64, f64)>) {
    let mut s = ParamSummary {
        param,
        t,
        lambda_min: samples.first().map_or(f64::NAN, |x| x.lambda),
        lambda_max: samples.last().map_or(f64::NAN, |x| x.lambda),
        points: samples.len(),
        min_gap: f64::INFINITY,
        min_gap_at: f64::NAN,
        max_gap: f64::NEG_INFINITY,
        max_gap_at: f64::NAN,
    };
    for x in samples {
        if x.gap < s.min_gap {
            s.min_gap = x.gap;
            s.min_gap_at = x.lambda;
        }
        if x.gap > s.max_gap {
            s.max_gap = x.gap;
            s.max_gap_at = x.lambda;
        }
    }
    let touches = samples
        .windows(3)
        .filter(|w| w[1].gap <= w[0].gap && w[1].gap <= w[2].gap && w[1].gap <= TOUCH_TOL)
        .map(|w| (w[1].lambda, w[1].gap))
        .collect();
    (s, touches)
}

fn assemble(grid: String, summaries: Vec<(ParamSummary, Vec<(f64, f64)>)>) -> BoundReport {
    let mut report = BoundReport {
        grid,
        pass: true,
        min_gap: f64::INFINITY,
        max_gap: f64::NEG_INFINITY,
        touch_points: Vec::new(),
        worst: (f64::NAN, f64::NAN),
        per_param: Vec::new(),
    };
    for (s, touches) in summaries {
        if s.min_gap < report.min_gap {
            report.min_gap = s.min_gap;
            report.worst = (s.param, s.min_gap_at);
        }
        report.max_gap = report.max_gap.max(s.max_gap);
        report.touch_points.extend(touches);
        report.per_param.push(s);
    }
    report.pass = report.min_gap >= -BOUND_TOL;
    report
}

/// Gap samples of MaxExp(η) over HDP(t(η)) on the grid `(t(η), 1]`.
///
/// `t_scale` parametrizes MaxExp from the time `t_scale · t(η)` instead
/// (`1.0` is the correct pairing); the power then becomes the exact inverse
/// `η(t_scale · t(η))`, floored at 1.
pub fn maxexp_gap_samples(eta: f64, step: f64, t_scale: f64) -> Result<(f64, Vec<GapSample>)> {
    check_step(step)?;
    let t = t_of_eta(eta)?;
    if !(t_scale > 0.0) {
        return invalid(format!("t-scale must be positive, got {t_scale}"));
    }
    let eta_used = if t_scale == 1.0 {
        eta
    } else {
        let ts = t_scale * t;
        if ts >= t_of_eta(1.0)? {
            1.0
        } else {
            eta_of_t_exact(ts)?
        }
    };
    let samples = open_closed_grid(t, 1.0, step, &[])
        .into_iter()
        .map(|lambda| GapSample {
            param: eta,
            lambda,
            gap: maxexp_hdp_gap(lambda, eta_used, t),
        })
        .collect();
    Ok((t, samples))
}

/// Certify `1 − (1 − λ)^η ≥ exp(−t(η)/λ)` on `(t(η), 1]` for each η.
pub fn verify_maxexp_bound(etas: &[f64], step: f64) -> Result<BoundReport> {
    verify_maxexp_bound_scaled(etas, step, 1.0)
}

pub fn verify_maxexp_bound_scaled(etas: &[f64], step: f64, t_scale: f64) -> Result<BoundReport> {
    if etas.is_empty() {
        return invalid("no η values to certify");
    }
    let mut summaries = Vec::with_capacity(etas.len());
    for &eta in etas {
        let (t, samples) = maxexp_gap_samples(eta, step, t_scale)?;
        summaries.push(summarize(eta, t, &samples));
    }
    Ok(assemble(
        format!("maxexp: eta in {etas:?}, lambda in (t(eta), 1] step {step}, t-scale {t_scale}"),
        summaries,
    ))
}

/// Gap samples of Gamma with `γ = e · t_scale · t` over HDP(t) on `(0, 1]`.
/// The touch point `λ = 1/e` is always included.
pub fn gamma_gap_samples(t: f64, step: f64, t_scale: f64) -> Result<Vec<GapSample>> {
    check_step(step)?;
    let gamma = gamma_of_t(t)? * t_scale;
    if !(gamma > 0.0) {
        return invalid(format!("t-scale must be positive, got {t_scale}"));
    }
    Ok(open_closed_grid(0.0, 1.0, step, &[1.0 / E])
        .into_iter()
        .map(|lambda| GapSample {
            param: t,
            lambda,
            gap: gamma_hdp_gap(lambda, gamma, t),
        })
        .collect())
}

/// Certify `λ^{e t} ≥ exp(−t/λ)` on `(0, 1]` for each t.
pub fn verify_gamma_bound(ts: &[f64], step: f64) -> Result<BoundReport> {
    verify_gamma_bound_scaled(ts, step, 1.0)
}

pub fn verify_gamma_bound_scaled(ts: &[f64], step: f64, t_scale: f64) -> Result<BoundReport> {
    if ts.is_empty() {
        return invalid("no t values to certify");
    }
    let mut summaries = Vec::with_capacity(ts.len());
    for &t in ts {
        let samples = gamma_gap_samples(t, step, t_scale)?;
        summaries.push(summarize(t, t, &samples));
    }
    Ok(assemble(
        format!("gamma: t in {ts:?}, lambda in (0, 1] step {step}, t-scale {t_scale}"),
        summaries,
    ))
}

/// Certify `min(1 − (1 − λ)^η, λ^{e t(η)}) ≥ exp(−t(η)/λ)` on `(t(η), 1]`.
pub fn verify_combined_bound(etas: &[f64], step: f64) -> Result<BoundReport> {
    check_step(step)?;
    if etas.is_empty() {
        return invalid("no η values to certify");
    }
    let mut summaries = Vec::with_capacity(etas.len());
    for &eta in etas {
        let t = t_of_eta(eta)?;
        let gamma = gamma_of_t(t)?;
        let samples: Vec<GapSample> = open_closed_grid(t, 1.0, step, &[])
            .into_iter()
            .map(|lambda| GapSample {
                param: eta,
                lambda,
                gap: (1.0 - (1.0 - lambda).powf(eta)).min(lambda.powf(gamma)) - (-t / lambda).exp(),
            })
            .collect();
        summaries.push(summarize(eta, t, &samples));
    }
    Ok(assemble(
        format!("combined: eta in {etas:?}, lambda in (t(eta), 1] step {step}"),
        summaries,
    ))
}

/// MaxExp/HDP gaps beyond the normalized range, `λ ∈ (1, λ_max]`, for an
/// integer power η (so `(1 − λ)^η` stays real). Reported, never certified.
pub fn maxexp_gap_beyond_one(eta: u32, lambda_max: f64, points: usize) -> Result<Vec<(f64, f64)>> {
    if eta == 0 || !(lambda_max > 1.0) || points == 0 {
        return invalid("need η >= 1, λ_max > 1 and at least one point");
    }
    let t = t_of_eta(eta as f64)?;
    Ok((1..=points)
        .map(|k| {
            let l = 1.0 + (lambda_max - 1.0) * k as f64 / points as f64;
            (l, 1.0 - (1.0 - l).powi(eta as i32) - (-t / l).exp())
        })
        .collect())
}

/// One point of a heat-quantity trajectory for a single eigenvalue.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OdeState {
    pub lambda: f64,
    pub t: f64,
    pub psi: f64,
}

/// `ψ(t) = 1 − (1 − λ)^{η(t)}` along a time grid, with the exact `η(t)`.
pub fn maxexp_trajectory(lambda: f64, times: &[f64]) -> Result<Vec<OdeState>> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return invalid(format!("λ must lie in (0, 1), got {lambda}"));
    }
    times
        .iter()
        .map(|&t| {
            let eta = eta_of_t_exact(t)?;
            Ok(OdeState {
                lambda,
                t,
                psi: 1.0 - (1.0 - lambda).powf(eta),
            })
        })
        .collect()
}

/// Residual of the MaxExp form of the heat equation for one covariance-side
/// eigenvalue, `|dψ/dt + log(1−λ) (dη/dt) (1 − ψ)|` with
/// `ψ(t) = 1 − (1−λ)^{η(t)}`.
///
/// `η(t)` is the exact numeric inverse of `t(η)`; both time derivatives are
/// central differences with step [`ODE_FD_STEP`].
pub fn ode_residual_maxexp(lambda: f64, t: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return invalid(format!("λ must lie in (0, 1), got {lambda}"));
    }
    let h = ODE_FD_STEP;
    check_t_range(t + h)?;
    check_t_range(t - h)?;
    let psi = |eta: f64| 1.0 - (1.0 - lambda).powf(eta);
    let (eta_m, eta_0, eta_p) = (eta_of_t_exact(t - h)?, eta_of_t_exact(t)?, eta_of_t_exact(t + h)?);
    let dpsi = (psi(eta_p) - psi(eta_m)) / (2.0 * h);
    let deta = (eta_p - eta_m) / (2.0 * h);
    Ok((dpsi + (1.0 - lambda).ln() * deta * (1.0 - psi(eta_0))).abs())
}

/// Residual of the Gamma form of the heat equation for one Laplacian
/// eigenvalue, `|dψ/dt + e log(λ) ψ|` with `ψ(t) = (1/λ)^{e t}` and the
/// analytic derivative `dψ/dt = e (1/λ)^{e t} log(1/λ)`.
pub fn ode_residual_gamma(lambda_l: f64, t: f64) -> Result<f64> {
    if !(lambda_l > 0.0) || !lambda_l.is_finite() {
        return invalid(format!("Laplacian eigenvalue must be positive, got {lambda_l}"));
    }
    if !(t > 0.0) {
        return invalid(format!("t must be positive, got {t}"));
    }
    let inv = 1.0 / lambda_l;
    let psi = inv.powf(E * t);
    let dpsi = E * psi * inv.ln();
    Ok((dpsi + E * lambda_l.ln() * psi).abs())
}

/// Fixed-width histogram on `[lo, hi]`; values equal to `hi` fall in the
/// last bin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn new(values: impl IntoIterator<Item = f64>, lo: f64, hi: f64, bins: usize) -> Result<Self> {
        if bins == 0 || !(hi > lo) {
            return invalid("histogram needs at least one bin and hi > lo");
        }
        let mut counts = vec![0u64; bins];
        let width = (hi - lo) / bins as f64;
        for v in values {
            if !(v >= lo && v <= hi) {
                return invalid(format!("value {v} outside histogram range [{lo}, {hi}]"));
            }
            let k = (((v - lo) / width).floor() as usize).min(bins - 1);
            counts[k] += 1;
        }
        Ok(Self { lo, hi, counts })
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Fraction of samples in each bin.
    pub fn mass(&self) -> Vec<f64> {
        let n = self.total().max(1) as f64;
        self.counts.iter().map(|&c| c as f64 / n).collect()
    }

    pub fn top_mass(&self) -> f64 {
        self.mass().last().copied().unwrap_or(0.0)
    }

    pub fn centers(&self) -> Vec<f64> {
        let w = (self.hi - self.lo) / self.counts.len() as f64;
        (0..self.counts.len()).map(|k| self.lo + (k as f64 + 0.5) * w).collect()
    }
}

/// Histogram on `[0, 1]` of `g(λ)` over a normalized spectrum.
pub fn pushforward_spectrum(samples: &[f64], spec: &PnSpec, bins: usize) -> Result<Histogram> {
    if samples.is_empty() {
        return invalid("no spectrum samples");
    }
    if let Some(v) = samples.iter().find(|&&v| !(v > 0.0 && v <= 1.0)) {
        return invalid(format!("spectrum sample {v} outside (0, 1]"));
    }
    let mapped = samples
        .iter()
        .map(|&l| pn_scalar(l, spec))
        .collect::<Result<Vec<_>>>()?;
    Histogram::new(mapped, 0.0, 1.0, bins)
}

/// `n` Beta(a, b) draws divided by their maximum, so they lie in `(0, 1]`.
pub fn beta_spectrum(n: usize, a: f64, b: f64, seed: u64) -> Result<Vec<f64>> {
    if n == 0 {
        return invalid("need at least one sample");
    }
    let dist = Beta::new(a, b).map_err(|e| crate::Error::InvalidInput(e.to_string()))?;
    let mut rng = crate::seeded_rng(seed);
    let mut v: Vec<f64> = (0..n).map(|_| dist.sample(&mut rng)).collect();
    let max = v.iter().copied().fold(0.0f64, f64::max);
    if !(max > 0.0) {
        return invalid("degenerate Beta sample");
    }
    v.iter_mut().for_each(|x| *x = (*x / max).max(f64::MIN_POSITIVE));
    Ok(v)
}

/// Single-detection curve for a 2-D subspace: the event rate
/// `κ sinθ cosθ` (with the default κ = 2 this is `sin 2θ`, reaching 1 at
/// θ = π/4) fed to the MaxExp detector with `η` trials.
pub fn detector_curve(thetas: &[f64], eta: f64, kappa: f64) -> Result<Vec<(f64, f64)>> {
    if !(kappa > 0.0) {
        return invalid(format!("κ must be positive, got {kappa}"));
    }
    thetas
        .iter()
        .map(|&th| {
            if !(0.0..=PI / 2.0 + 1e-15).contains(&th) {
                return invalid(format!("θ = {th} outside [0, π/2]"));
            }
            let rate = (kappa * th.sin() * th.cos()).max(0.0);
            Ok((th, detector_likelihood(rate, 1.0, eta)?))
        })
        .collect()
}

/// `n` evenly spaced points on `[lo, hi]` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|k| if k == n - 1 { hi } else { lo + (hi - lo) * k as f64 / (n - 1) as f64 })
            .collect(),
    }
}

/// A named `(x, y)` series for figure output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

/// Pointwise operator profiles over λ ∈ [−1, 1]: Gamma, MaxExp and HDP on
/// `[0, 1]` only, AsinhE and SigmE on the full range.
pub fn operator_profiles(specs: &[PnSpec], points: usize) -> Result<Vec<Series>> {
    specs
        .iter()
        .map(|spec| {
            let grid = if spec.kind().requires_psd() {
                linspace(0.0, 1.0, points)
            } else {
                linspace(-1.0, 1.0, points)
            };
            let pts = grid
                .into_iter()
                .map(|l| Ok((l, pn_scalar(l, spec)?)))
                .collect::<Result<Vec<_>>>()?;
            Ok(Series {
                name: spec.kind().name().to_string(),
                points: pts,
            })
        })
        .collect()
}

/// Minimal SVG line plot of one or more series.
pub fn svg_line_plot(title: &str, series: &[Series]) -> String {
    const W: f64 = 480.0;
    const H: f64 = 320.0;
    const PAD: f64 = 40.0;
    const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];
    let pts = series.iter().flat_map(|s| s.points.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !(x1 > x0) {
        x1 = x0 + 1.0;
    }
    if !(y1 > y0) {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"20\" font-size=\"14\" text-anchor=\"middle\">{title}</text>\n\
         <rect x=\"{PAD}\" y=\"{PAD}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#888\"/>\n\
         <text x=\"{PAD}\" y=\"{}\" font-size=\"10\">{x0:.3}</text>\n\
         <text x=\"{}\" y=\"{}\" font-size=\"10\" text-anchor=\"end\">{x1:.3}</text>\n\
         <text x=\"4\" y=\"{}\" font-size=\"10\">{y0:.3}</text>\n\
         <text x=\"4\" y=\"{}\" font-size=\"10\">{y1:.3}</text>\n",
        W / 2.0,
        W - 2.0 * PAD,
        H - 2.0 * PAD,
        H - PAD + 14.0,
        W - PAD,
        H - PAD + 14.0,
        H - PAD,
        PAD + 10.0,
    );
    for (k, s) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let path: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        out.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n\
             <text x=\"{}\" y=\"{}\" font-size=\"11\" fill=\"{color}\">{}</text>\n",
            path.join(" "),
            W - PAD - 4.0,
            PAD + 14.0 * (k as f64 + 1.0),
            s.name
        ));
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn t_of_eta_at_one() {
        // e/(e−1)/4, 50-digit reference
        assert!((t_of_eta(1.0).unwrap() - 0.395_494_176_717_331_6).abs() < 1e-15);
        assert!(t_of_eta(0.5).is_err());
    }

    #[test]
    fn t_of_eta_decreasing() {
        let mut prev = f64::INFINITY;
        let mut eta = 1.0;
        while eta <= 1e4 {
            let t = t_of_eta(eta).unwrap();
            assert!(t < prev);
            prev = t;
            eta *= 1.01;
        }
    }

    #[test]
    fn alpha_is_eta_times_t() {
        for &eta in &[1.0, 1.5, 2.0, 7.0, 100.0, 1e4] {
            let a = alpha_of_eta(eta).unwrap();
            assert!((a - eta * t_of_eta(eta).unwrap()).abs() < 1e-14 * a);
        }
    }

    #[test]
    fn exact_inverse_roundtrip() {
        for &eta in &[1.0, 1.3, 2.0, 10.0, 64.0, 1000.0] {
            let t = t_of_eta(eta).unwrap();
            let back = eta_of_t_exact(t).unwrap();
            assert!((back - eta).abs() < 1e-12 * eta, "{eta} -> {back}");
        }
        assert!(eta_of_t_exact(0.5).is_err());
        assert!(eta_of_t(0.0).is_err());
    }

    #[test]
    fn deta_dt_matches_finite_difference() {
        for &eta in &[1.5, 4.0, 20.0] {
            let t = t_of_eta(eta).unwrap();
            let h = 1e-7 * t;
            let fd = (eta_of_t_exact(t + h).unwrap() - eta_of_t_exact(t - h).unwrap()) / (2.0 * h);
            let an = deta_dt(eta).unwrap();
            assert!((fd - an).abs() < 1e-5 * an.abs(), "{fd} vs {an}");
        }
    }

    #[test]
    fn gamma_parametrization() {
        assert!((gamma_of_t(1.0 / E).unwrap() - 1.0).abs() < 1e-16);
        assert!((gamma_of_t(0.1).unwrap() - 0.271_828_182_845_904_5).abs() < 1e-15);
        for &t in &[0.01, 0.1, 0.2, 1.0 / E] {
            let back = t_of_gamma(gamma_of_t(t).unwrap()).unwrap();
            assert!((back - t).abs() <= 1e-15 * t.max(1e-300) + 1e-17);
        }
        assert!(gamma_of_t(0.0).is_err());
        assert!(t_of_gamma(1.5).is_err());
    }

    #[test]
    fn grid_includes_endpoint_and_extras() {
        let g = open_closed_grid(0.0, 1.0, 0.25, &[1.0 / E]);
        assert_eq!(g.len(), 5);
        assert_eq!(*g.last().unwrap(), 1.0);
        assert!(g.contains(&(1.0 / E)));
    }

    #[test]
    fn histogram_edges() {
        let h = Histogram::new(vec![0.0, 0.95, 1.0, 0.5], 0.0, 1.0, 10).unwrap();
        assert_eq!(h.counts[9], 2);
        assert_eq!(h.counts[0], 1);
        assert_eq!(h.counts[5], 1);
        assert!(Histogram::new(vec![1.5], 0.0, 1.0, 10).is_err());
    }

    #[test]
    fn svg_contains_series() {
        let s = Series {
            name: "demo".into(),
            points: vec![(0.0, 0.0), (1.0, 1.0)],
        };
        let svg = svg_line_plot("t", &[s]);
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("polyline"));
        assert!(svg.contains("demo"));
    }
}
