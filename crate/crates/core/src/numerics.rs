//! Special functions: the Gaussian tail and its inverse, the regularized
//! incomplete beta function, and the exact tail of one coordinate of a point
//! drawn uniformly from a sphere.

use crate::{Error, Result};
use statrs::function::{beta::ln_beta, erf};

const LN_2PI: f64 = 1.837_877_066_409_345_5;
const CF_MAX_ITER: usize = 20_000;
const CF_EPS: f64 = 1e-16;
const CF_TINY: f64 = 1e-300;

/// Absolute/relative comparison tolerance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Tolerance {
    pub fn new(abs: f64, rel: f64) -> Result<Self> {
        if !(abs >= 0.0 && rel >= 0.0) || (abs == 0.0 && rel == 0.0) {
            return Err(Error::domain(format!(
                "tolerance needs abs, rel >= 0 with one positive (abs={abs}, rel={rel})"
            )));
        }
        Ok(Self { abs, rel })
    }

    pub fn abs(abs: f64) -> Self {
        Self { abs, rel: 0.0 }
    }

    /// `|actual - expected| <= abs + rel * |expected|`.
    pub fn accepts(&self, actual: f64, expected: f64) -> bool {
        (actual - expected).abs() <= self.abs + self.rel * expected.abs()
    }
}

/// Gaussian tail `Q(x) = P{N(0,1) > x}`.
pub fn qfunc(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// `ln Q(x)`, finite for every finite `x`.
pub fn ln_qfunc(x: f64) -> f64 {
    if x < 30.0 {
        return qfunc(x).ln();
    }
    // Asymptotic expansion of the Mills ratio.
    let r = 1.0 / (x * x);
    let series = 1.0 - r * (1.0 - 3.0 * r * (1.0 - 5.0 * r * (1.0 - 7.0 * r)));
    -0.5 * x * x - x.ln() - 0.5 * LN_2PI + series.ln()
}

/// Inverse Gaussian tail: the `x` with `Q(x) = p`.
pub fn qfunc_inv(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(format!("qfunc_inv needs p in (0,1), got {p}")));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    let mut x = std::f64::consts::SQRT_2 * erf::erfc_inv(2.0 * p);
    // One Newton step against qfunc tightens the round trip.
    let density = (-0.5 * x * x - 0.5 * LN_2PI).exp();
    if density > 0.0 {
        x += (qfunc(x) - p) / density;
    }
    Ok(x)
}

/// Regularized incomplete beta function `I_x(a, b)`.
pub fn reg_inc_beta(x: f64, a: f64, b: f64) -> Result<f64> {
    check_beta_args(x, a, b)?;
    Ok(ln_reg_inc_beta_unchecked(x, a, b).exp())
}

/// `ln I_x(a, b)`; accurate deep into the lower tail where `I` underflows.
pub fn ln_reg_inc_beta(x: f64, a: f64, b: f64) -> Result<f64> {
    check_beta_args(x, a, b)?;
    Ok(ln_reg_inc_beta_unchecked(x, a, b))
}

fn check_beta_args(x: f64, a: f64, b: f64) -> Result<()> {
    if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
        return Err(Error::domain(format!("incomplete beta needs a, b > 0 (a={a}, b={b})")));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::domain(format!("incomplete beta needs x in [0,1], got {x}")));
    }
    Ok(())
}

fn ln_reg_inc_beta_unchecked(x: f64, a: f64, b: f64) -> f64 {
    if x == 0.0 {
        return f64::NEG_INFINITY;
    }
    if x == 1.0 {
        return 0.0;
    }
    if x > (a + 1.0) / (a + b + 2.0) {
        let complement = ln_beta_series_term(b, a, 1.0 - x).exp();
        (-complement).ln_1p()
    } else {
        ln_beta_series_term(a, b, x)
    }
}

/// `ln( x^a (1-x)^b / (a B(a,b)) * cf(a,b,x) )`, valid below the switch point.
fn ln_beta_series_term(a: f64, b: f64, x: f64) -> f64 {
    let ln_front = a * x.ln() + b * (-x).ln_1p() - ln_beta(a, b) - a.ln();
    ln_front + beta_continued_fraction(a, b, x).ln()
}

/// Modified Lentz evaluation of the incomplete-beta continued fraction.
fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < CF_TINY {
        d = CF_TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < CF_EPS {
            break;
        }
    }
    h
}

fn check_dim(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::domain(format!("sphere dimension must be >= 2, got {n}")));
    }
    Ok(())
}

/// `P{W_1 >= c}` for `W` uniform on the unit sphere in `R^n`.
pub fn sphere_cap_tail(n: usize, c: f64) -> Result<f64> {
    check_dim(n)?;
    Ok(ln_cap_tail(n, c).exp())
}

/// `ln P{W_1 >= c}`; see [`sphere_cap_tail`].
pub fn ln_sphere_cap_tail(n: usize, c: f64) -> Result<f64> {
    check_dim(n)?;
    Ok(ln_cap_tail(n, c))
}

pub(crate) fn ln_cap_tail(n: usize, c: f64) -> f64 {
    if c.is_nan() {
        return f64::NAN;
    }
    if c >= 1.0 {
        return f64::NEG_INFINITY;
    }
    if c <= -1.0 {
        return 0.0;
    }
    let a = 0.5 * (n as f64 - 1.0);
    let x = (1.0 - c.abs()) * (1.0 + c.abs());
    let ln_half_i = ln_reg_inc_beta_unchecked(x, a, 0.5) - std::f64::consts::LN_2;
    if c >= 0.0 {
        ln_half_i
    } else {
        (-ln_half_i.exp()).ln_1p()
    }
}

/// The `c` with `ln P{W_1 >= c} = ln_p`, found by bisection.
pub fn sphere_cap_tail_inv_ln(n: usize, ln_p: f64) -> Result<f64> {
    check_dim(n)?;
    if ln_p.is_nan() || ln_p > 0.0 {
        return Err(Error::domain(format!("log-probability must be <= 0, got {ln_p}")));
    }
    Ok(cap_inv_within(n, ln_p, -1.0, 1.0))
}

/// Bisection for the inverse tail restricted to `[lo, hi]`.
pub(crate) fn cap_inv_within(n: usize, ln_p: f64, mut lo: f64, mut hi: f64) -> f64 {
    if ln_p == f64::NEG_INFINITY {
        return hi;
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if ln_cap_tail(n, mid) > ln_p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(m: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if m == 0 {
        return Err(Error::domain("Gauss-Legendre rule needs at least one node"));
    }
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    let mf = m as f64;
    for i in 0..m.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (mf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p1, mut p2) = (1.0, 0.0);
            for j in 0..m {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = ((2.0 * jf + 1.0) * z * p2 - jf * p3) / (jf + 1.0);
            }
            dp = mf * (z * p1 - p2) / (z * z - 1.0);
            let step = p1 / dp;
            z -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[m - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[m - 1 - i] = w;
    }
    Ok((nodes, weights))
}

/// Numerically stable `ln(sum(exp(xs)))`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max.is_nan() {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// `ln E[f(W_1); lo <= W_1 <= hi]` for `W` uniform on the unit sphere in
/// `R^n`, where `ln_f` returns `ln f`.
///
/// Integrates over the polar angle with a Gauss–Legendre rule of `nodes`
/// points placed on the window where the log-integrand is within 60 nats of
/// its maximum (located on a scan of `4 * nodes` points). Returns `-inf` when
/// the integrand vanishes on the whole scan.
pub fn ln_sphere_projection_integral<F>(n: usize, lo: f64, hi: f64, nodes: usize, ln_f: F) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    check_dim(n)?;
    let (lo, hi) = (lo.max(-1.0), hi.min(1.0));
    if lo >= hi {
        return Ok(f64::NEG_INFINITY);
    }
    let exponent = n as f64 - 2.0;
    let ln_integrand = |phi: f64| -> f64 {
        let w = if n == 2 { 0.0 } else { exponent * phi.sin().max(0.0).ln() };
        w + ln_f(phi.cos())
    };
    let (phi_lo, phi_hi) = (hi.acos(), lo.acos());
    let scan = 96;
    let step = (phi_hi - phi_lo) / scan as f64;
    let values: Vec<f64> = (0..=scan).map(|k| ln_integrand(phi_lo + step * k as f64)).collect();
    if values.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
        return Err(Error::Numeric("non-finite integrand on the scan grid".into()));
    }
    let peak = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if peak == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    let keep = |v: &f64| *v >= peak - 60.0;
    let first = values.iter().position(keep).unwrap_or(0);
    let last = values.iter().rposition(keep).unwrap_or(scan);
    let a = phi_lo + step * first.saturating_sub(1) as f64;
    let b = (phi_lo + step * (last + 1).min(scan) as f64).min(phi_hi);

    let (xs, ws) = gauss_legendre(nodes)?;
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    let mut terms = Vec::with_capacity(nodes);
    for (x, w) in xs.iter().zip(&ws) {
        let v = ln_integrand(mid + half * x);
        if v.is_nan() || v == f64::INFINITY {
            return Err(Error::Numeric("non-finite integrand at a quadrature node".into()));
        }
        terms.push((w * half).ln() + v);
    }
    Ok(log_sum_exp(&terms) - ln_beta(0.5, 0.5 * (n as f64 - 1.0)))
}
