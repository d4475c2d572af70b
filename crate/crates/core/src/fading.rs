//! Quasi-static fading: gain laws, outage probabilities, the outage
//! capacity region and finite-blocklength expectation bounds.

use crate::analysis::{dispersion_v1, dispersion_v2, BoundaryPoint, Criterion, RegionBoundary, RegionMetadata};
use crate::model::{FadingSpec, ValidatedConfig};
use crate::numerics::{gauss_legendre, qfunc};
use crate::rng::{Domain, RandomStream};
use crate::{Error, Result};
use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma_lr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum User {
    #[serde(rename = "1")]
    Strong,
    #[serde(rename = "2")]
    Weak,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutageMethodKind {
    ClosedForm,
    Quadrature,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OutageMethod {
    /// Exact cdf; available for Rayleigh and deterministic gains.
    ClosedForm,
    /// Gauss–Legendre integration of the squared-gain density.
    Quadrature,
    MonteCarlo {
        samples: usize,
        seed: u64,
    },
}

impl OutageMethod {
    pub fn kind(&self) -> OutageMethodKind {
        match self {
            OutageMethod::ClosedForm => OutageMethodKind::ClosedForm,
            OutageMethod::Quadrature => OutageMethodKind::Quadrature,
            OutageMethod::MonteCarlo { .. } => OutageMethodKind::MonteCarlo,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutageReport {
    pub user: User,
    pub rate: f64,
    pub outage_prob: f64,
    pub method: OutageMethodKind,
    pub std_error: f64,
}

/// One draw of the amplitude `H >= 0`.
pub fn sample_gain(spec: &FadingSpec, rng: &mut RandomStream) -> f64 {
    match *spec {
        FadingSpec::Deterministic { gain } => gain,
        FadingSpec::Rayleigh { mean_square } => {
            let e: f64 = Exp1.sample(rng);
            (mean_square * e).sqrt()
        }
        FadingSpec::Rice { k_factor, mean_square } => {
            let los = (k_factor * mean_square / (k_factor + 1.0)).sqrt();
            let sigma = (mean_square / (2.0 * (k_factor + 1.0))).sqrt();
            let a: f64 = StandardNormal.sample(rng);
            let b: f64 = StandardNormal.sample(rng);
            ((los + sigma * a).powi(2) + (sigma * b).powi(2)).sqrt()
        }
    }
}

/// `P{H^2 <= q}`.
pub fn gain_sq_cdf(spec: &FadingSpec, q: f64) -> f64 {
    if q.is_nan() {
        return f64::NAN;
    }
    if q < 0.0 {
        return 0.0;
    }
    match *spec {
        FadingSpec::Deterministic { gain } => {
            if q >= gain * gain {
                1.0
            } else {
                0.0
            }
        }
        FadingSpec::Rayleigh { mean_square } => -(-q / mean_square).exp_m1(),
        FadingSpec::Rice { k_factor, mean_square } => rice_cdf(k_factor, mean_square, q),
    }
}

/// Noncentral chi-square (two degrees of freedom) cdf as a Poisson mixture
/// of central ones.
fn rice_cdf(k: f64, omega: f64, q: f64) -> f64 {
    if q == f64::INFINITY {
        return 1.0;
    }
    let x = q * (k + 1.0) / omega;
    if k == 0.0 {
        return -(-x).exp_m1();
    }
    let mut sum = 0.0;
    let mut ln_w = -k;
    let mut j = 0usize;
    loop {
        let term = ln_w.exp() * gamma_lr(j as f64 + 1.0, x.max(f64::MIN_POSITIVE));
        sum += term;
        j += 1;
        ln_w += k.ln() - (j as f64).ln();
        if (j as f64 > k && term < 1e-17 * sum.max(1e-300)) || j > 100_000 {
            break;
        }
        if j as f64 > k && ln_w < -745.0 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}

/// `ln I0(x)` for `x >= 0`.
fn ln_bessel_i0(x: f64) -> f64 {
    if x < 30.0 {
        let q = 0.25 * x * x;
        let (mut term, mut sum, mut k) = (1.0, 1.0, 1.0);
        while term > 1e-17 * sum {
            term *= q / (k * k);
            sum += term;
            k += 1.0;
        }
        sum.ln()
    } else {
        let r = 1.0 / (8.0 * x);
        x - 0.5 * (2.0 * std::f64::consts::PI * x).ln() + (1.0 + r + 4.5 * r * r + 37.5 * r * r * r).ln()
    }
}

/// Density of `H^2` at `x > 0`.
fn gain_sq_pdf(spec: &FadingSpec, x: f64) -> f64 {
    match *spec {
        FadingSpec::Deterministic { .. } => 0.0,
        FadingSpec::Rayleigh { mean_square } => (-x / mean_square).exp() / mean_square,
        FadingSpec::Rice { k_factor: k, mean_square: om } => {
            let s = (k + 1.0) / om;
            (s.ln() - k - s * x + ln_bessel_i0(2.0 * (k * s * x).sqrt())).exp()
        }
    }
}

/// `q` with `P{H^2 <= q} = p`.
pub fn gain_sq_quantile(spec: &FadingSpec, p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(format!("quantile level must lie in (0,1), got {p}")));
    }
    spec.validate()?;
    Ok(match *spec {
        FadingSpec::Deterministic { gain } => gain * gain,
        FadingSpec::Rayleigh { mean_square } => -mean_square * (-p).ln_1p(),
        FadingSpec::Rice { .. } => bisect_cdf(spec, p),
    })
}

fn bisect_cdf(spec: &FadingSpec, p: f64) -> f64 {
    let mut hi = 1.0;
    while gain_sq_cdf(spec, hi) < p {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if gain_sq_cdf(spec, mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `C(h^2 alpha P / beta)`.
pub fn faded_capacity_strong(cfg: &ValidatedConfig, gain_sq: f64) -> f64 {
    0.5 * (gain_sq * cfg.strong_power() / cfg.beta).ln_1p()
}

/// `C(h^2 (1-alpha) P / (h^2 alpha P + 1))`.
pub fn faded_capacity_weak(cfg: &ValidatedConfig, gain_sq: f64) -> f64 {
    0.5 * (gain_sq * cfg.weak_power() / (gain_sq * cfg.strong_power() + 1.0)).ln_1p()
}

/// Squared gain at which the user's faded capacity equals `rate`
/// (`+inf` when the rate is above the weak user's high-gain ceiling).
pub fn outage_threshold(cfg: &ValidatedConfig, user: User, rate: f64) -> Result<f64> {
    if rate.is_nan() || rate < 0.0 {
        return Err(Error::domain(format!("rate must be >= 0, got {rate}")));
    }
    let snr = (2.0 * rate).exp_m1();
    Ok(match user {
        User::Strong => cfg.beta * snr / cfg.strong_power(),
        User::Weak => {
            let den = cfg.weak_power() - cfg.strong_power() * snr;
            if den > 0.0 {
                snr / den
            } else {
                f64::INFINITY
            }
        }
    })
}

/// `P{n C_i(H_i) <= log M_i}` per unit blocklength, i.e. `P{C_i(H_i) <= rate}`.
pub fn outage_prob(
    cfg: &ValidatedConfig,
    spec: &FadingSpec,
    user: User,
    rate: f64,
    method: OutageMethod,
) -> Result<OutageReport> {
    spec.validate()?;
    let q = outage_threshold(cfg, user, rate)?;
    let report = |p: f64, se: f64| OutageReport {
        user,
        rate,
        outage_prob: p.clamp(0.0, 1.0),
        method: method.kind(),
        std_error: se,
    };
    match method {
        OutageMethod::ClosedForm => match spec {
            FadingSpec::Rice { .. } => {
                Err(Error::domain("no closed-form outage for Rice fading; use quadrature or monte_carlo"))
            }
            _ => Ok(report(gain_sq_cdf(spec, q), 0.0)),
        },
        OutageMethod::Quadrature => {
            let p = match spec {
                FadingSpec::Deterministic { .. } => gain_sq_cdf(spec, q),
                _ if q == f64::INFINITY => 1.0,
                _ if q == 0.0 => 0.0,
                _ => integrate_pdf(spec, q)?,
            };
            Ok(report(p, 0.0))
        }
        OutageMethod::MonteCarlo { samples, seed } => {
            if samples < 2 {
                return Err(Error::domain("Monte Carlo outage needs at least two samples"));
            }
            let hits = count_chunks(samples, seed, |rng| {
                let h = sample_gain(spec, rng);
                h * h <= q
            });
            let p = hits as f64 / samples as f64;
            Ok(report(p, (p * (1.0 - p) / samples as f64).sqrt()))
        }
    }
}

const CHUNK: usize = 4096;

/// Counts successes over `samples` draws; deterministic for any thread count.
fn count_chunks<F>(samples: usize, seed: u64, f: F) -> u64
where
    F: Fn(&mut RandomStream) -> bool + Sync,
{
    let chunks = samples.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = RandomStream::derive(seed, Domain::Fading, c as u64);
            let len = CHUNK.min(samples - c * CHUNK);
            (0..len).filter(|_| f(&mut rng)).count() as u64
        })
        .sum()
}

/// `int_0^q pdf(x) dx` with a composite 64-node rule on geometrically
/// refined panels toward zero, where the Rice density varies fastest.
fn integrate_pdf(spec: &FadingSpec, q: f64) -> Result<f64> {
    let (xs, ws) = gauss_legendre(64)?;
    let mut edges = vec![0.0];
    let mut e = q * 1e-12;
    while e < q {
        edges.push(e);
        e *= 4.0;
    }
    edges.push(q);
    let mut total = 0.0;
    for w in edges.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (half, mid) = (0.5 * (b - a), 0.5 * (a + b));
        total += xs.iter().zip(&ws).map(|(x, wt)| wt * gain_sq_pdf(spec, mid + half * x)).sum::<f64>() * half;
    }
    if !total.is_finite() {
        return Err(Error::Numeric("non-finite outage quadrature".into()));
    }
    Ok(total)
}

/// Largest rate with outage at most `eps`, by quantile inversion.
pub fn outage_rate(cfg: &ValidatedConfig, spec: &FadingSpec, user: User, eps: f64) -> Result<f64> {
    let q = gain_sq_quantile(spec, eps)?;
    Ok(match user {
        User::Strong => faded_capacity_strong(cfg, q),
        User::Weak => faded_capacity_weak(cfg, q),
    })
}

/// Corner `(R1*, R2*)` of the outage capacity region.
pub fn outage_region(
    cfg: &ValidatedConfig,
    spec1: &FadingSpec,
    spec2: &FadingSpec,
    eps1: f64,
    eps2: f64,
) -> Result<RegionBoundary> {
    for (name, e) in [("eps1", eps1), ("eps2", eps2)] {
        if !(e > 0.0 && e < 1.0) {
            return Err(Error::domain(format!("{name} must lie in (0,1), got {e}")));
        }
    }
    let r1 = outage_rate(cfg, spec1, User::Strong, eps1)?;
    let r2 = outage_rate(cfg, spec2, User::Weak, eps2)?;
    Ok(RegionBoundary {
        criterion: Criterion::Outage,
        points: vec![BoundaryPoint::new(r1, r2)],
        metadata: RegionMetadata {
            eps1: Some(eps1),
            eps2: Some(eps2),
            alpha: Some(cfg.alpha),
            total_power: cfg.total_power,
            beta: cfg.beta,
            zeta1: cfg.zeta1(),
            zeta2: cfg.zeta2(),
            eps: None,
        },
    })
}

/// Which gain enters the strong user's dispersion in [`theorem3_bound`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrongDispersionGain {
    /// The weak user's gain `H2`, as the bound is stated.
    #[default]
    AsPrinted,
    /// The strong user's own gain `H1`.
    Own,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FadingBoundEstimate {
    pub user: User,
    pub n: usize,
    pub log_m: f64,
    pub value: f64,
    pub std_error: f64,
    pub samples: usize,
    pub dispersion_gain: StrongDispersionGain,
    pub method: OutageMethodKind,
}

/// `E_H[Q((n C_i(H) - ln M_i) / sqrt(n V_i(H)))]` for the successive decoder.
///
/// Gains that enter the expression and are all Rayleigh or deterministic are
/// integrated by quadrature (`samples` and `seed` unused). A Rician gain
/// switches to Monte Carlo over `(H1, H2)`, with the same gain samples for
/// every `n` at a given seed.
#[allow(clippy::too_many_arguments)]
pub fn theorem3_bound(
    cfg: &ValidatedConfig,
    spec1: &FadingSpec,
    spec2: &FadingSpec,
    user: User,
    n: usize,
    log_m: f64,
    samples: usize,
    seed: u64,
    dispersion_gain: StrongDispersionGain,
) -> Result<FadingBoundEstimate> {
    if n == 0 {
        return Err(Error::domain("blocklength must be >= 1"));
    }
    if !log_m.is_finite() {
        return Err(Error::domain(format!("ln M must be finite, got {log_m}")));
    }
    spec1.validate()?;
    spec2.validate()?;
    let nf = n as f64;
    let term = |g1sq: f64, g2sq: f64| -> f64 {
        let (c, v) = match user {
            User::Strong => {
                let gv = match dispersion_gain {
                    StrongDispersionGain::AsPrinted => g2sq,
                    StrongDispersionGain::Own => g1sq,
                };
                let v = dispersion_v1(gv * cfg.strong_power(), cfg.beta, cfg.zeta1()).expect("validated");
                (faded_capacity_strong(cfg, g1sq), v)
            }
            User::Weak => {
                let v = dispersion_v2(g2sq * cfg.weak_power(), g2sq * cfg.strong_power(), 1.0, cfg.zeta2())
                    .expect("validated");
                (faded_capacity_weak(cfg, g2sq), v)
            }
        };
        let num = nf * c - log_m;
        if v > 0.0 {
            qfunc(num / (nf * v).sqrt())
        } else if num > 0.0 {
            0.0
        } else {
            1.0
        }
    };
    let deterministic = |s: &FadingSpec| matches!(s, FadingSpec::Deterministic { .. });
    if deterministic(spec1) && deterministic(spec2) {
        let mut rng = RandomStream::new(seed);
        let (g1, g2) = (sample_gain(spec1, &mut rng), sample_gain(spec2, &mut rng));
        return Ok(FadingBoundEstimate {
            user,
            n,
            log_m,
            value: term(g1 * g1, g2 * g2),
            std_error: 0.0,
            samples: 1,
            dispersion_gain,
            method: OutageMethodKind::ClosedForm,
        });
    }
    let (uses1, uses2) = match (user, dispersion_gain) {
        (User::Strong, StrongDispersionGain::AsPrinted) => (true, true),
        (User::Strong, StrongDispersionGain::Own) => (true, false),
        (User::Weak, _) => (false, true),
    };
    let is_rice = |s: &FadingSpec| matches!(s, FadingSpec::Rice { .. });
    if !(uses1 && is_rice(spec1)) && !(uses2 && is_rice(spec2)) {
        // The capacity depends on one gain only; its outage threshold is
        // where the integrand switches from near 1 to near 0.
        let knot = if log_m > 0.0 { outage_threshold(cfg, user, log_m / nf)? } else { 0.0 };
        let value = match user {
            User::Strong => {
                let inner = |g2sq: f64| expect_gain_sq(spec1, Some(knot), |g1sq| term(g1sq, g2sq));
                if uses2 {
                    expect_gain_sq(spec2, None, |g2sq| inner(g2sq).unwrap_or(f64::NAN))?
                } else {
                    inner(1.0)?
                }
            }
            User::Weak => expect_gain_sq(spec2, Some(knot), |g2sq| term(1.0, g2sq))?,
        };
        if !value.is_finite() {
            return Err(Error::Numeric("non-finite quadrature for the finite-blocklength bound".into()));
        }
        return Ok(FadingBoundEstimate {
            user,
            n,
            log_m,
            value: value.clamp(0.0, 1.0),
            std_error: 0.0,
            samples: 0,
            dispersion_gain,
            method: OutageMethodKind::Quadrature,
        });
    }
    if samples < 2 {
        return Err(Error::domain("Monte Carlo bound needs at least two samples"));
    }
    let chunks = samples.div_ceil(CHUNK);
    let sums: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = RandomStream::derive(seed, Domain::Fading, c as u64);
            let len = CHUNK.min(samples - c * CHUNK);
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..len {
                let g1 = sample_gain(spec1, &mut rng);
                let g2 = sample_gain(spec2, &mut rng);
                let t = term(g1 * g1, g2 * g2);
                s += t;
                s2 += t * t;
            }
            (s, s2)
        })
        .collect();
    let (s, s2) = sums.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let m = samples as f64;
    let mean = s / m;
    let var = ((s2 - m * mean * mean) / (m - 1.0)).max(0.0);
    Ok(FadingBoundEstimate {
        user,
        n,
        log_m,
        value: mean.clamp(0.0, 1.0),
        std_error: (var / m).sqrt(),
        samples,
        dispersion_gain,
        method: OutageMethodKind::MonteCarlo,
    })
}

/// `E[phi(H^2)]` for a deterministic or Rayleigh gain, integrating over the
/// cdf level `u` with panels graded toward the level of `knot`.
fn expect_gain_sq(spec: &FadingSpec, knot: Option<f64>, phi: impl Fn(f64) -> f64) -> Result<f64> {
    let mean_square = match *spec {
        FadingSpec::Deterministic { gain } => return Ok(phi(gain * gain)),
        FadingSpec::Rayleigh { mean_square } => mean_square,
        FadingSpec::Rice { .. } => return Err(Error::domain("no quadrature rule for a Rician gain")),
    };
    let (xs, ws) = gauss_legendre(32)?;
    let mut edges: Vec<f64> = (0..=8).map(|k| k as f64 / 8.0).collect();
    if let Some(q) = knot.filter(|q| q.is_finite() && *q > 0.0) {
        let u_star = -(-q / mean_square).exp_m1();
        for k in 0..=20 {
            let d = 0.25f64.powi(k);
            edges.push(u_star - u_star * d);
            edges.push(u_star + (1.0 - u_star) * d);
        }
        edges.push(u_star);
    }
    edges.retain(|u| (0.0..=1.0).contains(u));
    edges.sort_by(f64::total_cmp);
    edges.dedup();
    let mut total = 0.0;
    for w in edges.windows(2) {
        let (half, mid) = (0.5 * (w[1] - w[0]), 0.5 * (w[0] + w[1]));
        if half <= 0.0 {
            continue;
        }
        total +=
            half * xs.iter().zip(&ws).map(|(x, wt)| wt * phi(-mean_square * (-(mid + half * x)).ln_1p())).sum::<f64>();
    }
    Ok(total)
}

/// Draws a gain pair for one quasi-static block.
pub(crate) fn sample_gain_pair(pair: &(FadingSpec, FadingSpec), rng: &mut RandomStream) -> (f64, f64) {
    (sample_gain(&pair.0, rng), sample_gain(&pair.1, rng))
}
