//! Closed-form rate analysis: capacities, dispersions, first-order,
//! second-order (separate and joint error) regions and finite-`n` normal
//! approximations of the codebook sizes.

use crate::model::ValidatedConfig;
use crate::numerics::{qfunc, qfunc_inv};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// Number of points in default boundary grids.
pub const DEFAULT_GRID_POINTS: usize = 201;

/// `C(snr) = ln(1 + snr) / 2` nats.
pub fn capacity(snr: f64) -> Result<f64> {
    if snr.is_nan() || snr < 0.0 {
        return Err(Error::domain(format!("capacity needs snr >= 0, got {snr}")));
    }
    Ok(0.5 * snr.ln_1p())
}

fn cap(snr: f64) -> f64 {
    0.5 * snr.ln_1p()
}

/// Dispersion of the strong user's point-to-point link under mismatched
/// nearest-neighbor decoding with spherical codewords of power `p` and noise
/// of variance `beta` and fourth moment `zeta`.
pub fn dispersion_v1(p: f64, beta: f64, zeta: f64) -> Result<f64> {
    if !(p >= 0.0 && beta > 0.0 && zeta >= beta * beta * (1.0 - 1e-12)) {
        return Err(Error::domain(format!(
            "dispersion_v1 needs p >= 0, beta > 0, zeta >= beta^2 (p={p}, beta={beta}, zeta={zeta})"
        )));
    }
    let num = p * p * (zeta - beta * beta) + 4.0 * p * beta.powi(3);
    let den = 4.0 * beta * beta * (p + beta).powi(2);
    Ok(num / den)
}

/// Dispersion of a link carrying power `p` under interference of power
/// `p_bar` treated as noise, plus noise of variance `beta`, fourth moment `zeta`.
pub fn dispersion_v2(p: f64, p_bar: f64, beta: f64, zeta: f64) -> Result<f64> {
    if !(p >= 0.0 && p_bar >= 0.0 && beta > 0.0 && zeta >= beta * beta * (1.0 - 1e-12)) {
        return Err(Error::domain(format!(
            "dispersion_v2 needs p, p_bar >= 0, beta > 0, zeta >= beta^2 \
             (p={p}, p_bar={p_bar}, beta={beta}, zeta={zeta})"
        )));
    }
    let s = p_bar + beta;
    let num = p * p * (zeta - beta * beta + 4.0 * p_bar) + 4.0 * p * s.powi(3);
    let den = 4.0 * s * s * (p + s).powi(2);
    Ok(num / den)
}

/// First- and second-order constants of one power split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OperatingPoint {
    /// `C(alpha P / beta)`.
    pub c1: f64,
    /// `C((1-alpha) P / (alpha P + 1))`.
    pub c2: f64,
    pub v1: f64,
    pub v2: f64,
}

impl OperatingPoint {
    pub fn of(cfg: &ValidatedConfig) -> Self {
        let (sp, wp) = (cfg.strong_power(), cfg.weak_power());
        Self {
            c1: cap(sp / cfg.beta),
            c2: cap(wp / (sp + 1.0)),
            v1: dispersion_v1(sp, cfg.beta, cfg.zeta1()).expect("validated config"),
            v2: dispersion_v2(wp, sp, 1.0, cfg.zeta2()).expect("validated config"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePair {
    pub r1: f64,
    pub r2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecondOrderPair {
    pub l1: f64,
    pub l2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    FirstOrder,
    Sep,
    Jep,
    Outage,
}

impl Criterion {
    pub fn as_str(&self) -> &'static str {
        match self {
            Criterion::FirstOrder => "first_order",
            Criterion::Sep => "sep",
            Criterion::Jep => "jep",
            Criterion::Outage => "outage",
        }
    }
}

/// One boundary vertex. `eps1`/`eps2` carry the per-point error targets where
/// they vary along the curve (separate-error splits).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    pub x: f64,
    pub y: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub eps1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub eps2: Option<f64>,
}

impl BoundaryPoint {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y, eps1: None, eps2: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RegionMetadata {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub eps1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub eps2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub eps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub alpha: Option<f64>,
    pub total_power: f64,
    pub beta: f64,
    pub zeta1: f64,
    pub zeta2: f64,
}

impl RegionMetadata {
    fn of(cfg: &ValidatedConfig) -> Self {
        Self {
            total_power: cfg.total_power,
            beta: cfg.beta,
            zeta1: cfg.zeta1(),
            zeta2: cfg.zeta2(),
            ..Default::default()
        }
    }
}

/// Ordered boundary of a rate or second-order region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionBoundary {
    pub criterion: Criterion,
    pub points: Vec<BoundaryPoint>,
    pub metadata: RegionMetadata,
}

/// One parsed CSV row: `(criterion, eps1, eps2, x, y)`.
pub type CsvRow = (String, Option<f64>, Option<f64>, f64, f64);

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

impl RegionBoundary {
    pub const CSV_HEADER: &'static str = "criterion,eps1,eps2,x,y";

    /// CSV with header `criterion,eps1,eps2,x,y`; empty fields where an
    /// error target does not apply.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
        for p in &self.points {
            let e1 = p.eps1.or(self.metadata.eps1).or(self.metadata.eps);
            let e2 = p.eps2.or(self.metadata.eps2).or(self.metadata.eps);
            let _ =
                writeln!(out, "{},{},{},{},{}", self.criterion.as_str(), opt(e1), opt(e2), fmt_f64(p.x), fmt_f64(p.y));
        }
        out
    }

    /// Parses the CSV form back into `(criterion, eps1, eps2, x, y)` rows.
    pub fn parse_csv(text: &str) -> Result<Vec<CsvRow>> {
        let mut lines = text.lines();
        if lines.next() != Some(Self::CSV_HEADER) {
            return Err(Error::domain("missing or malformed CSV header"));
        }
        let num =
            |s: &str| -> Result<f64> { s.parse::<f64>().map_err(|e| Error::domain(format!("bad number {s:?}: {e}"))) };
        let opt = |s: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                num(s).map(Some)
            }
        };
        lines
            .filter(|l| !l.is_empty())
            .map(|l| {
                let f: Vec<&str> = l.split(',').collect();
                if f.len() != 5 {
                    return Err(Error::domain(format!("expected 5 fields in {l:?}")));
                }
                Ok((f[0].to_string(), opt(f[1])?, opt(f[2])?, num(f[3])?, num(f[4])?))
            })
            .collect()
    }

    fn check_sorted(&self) -> Result<()> {
        if self.points.windows(2).any(|w| w[0].x > w[1].x) {
            return Err(Error::Numeric("boundary points not sorted by first coordinate".into()));
        }
        Ok(())
    }
}

fn check_eps(name: &str, eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::domain(format!("{name} must lie in (0,1), got {eps}")));
    }
    Ok(())
}

/// `k / (m + 1)` for `k = 1..=m`.
pub fn default_alpha_grid(m: usize) -> Vec<f64> {
    (1..=m).map(|k| k as f64 / (m + 1) as f64).collect()
}

/// Rectangle corner `(C(alpha P/beta), C((1-alpha)P/(alpha P+1)))` for one split.
pub fn first_order_corner(cfg: &ValidatedConfig) -> RatePair {
    let op = OperatingPoint::of(cfg);
    RatePair { r1: op.c1, r2: op.c2 }
}

/// Upper-right frontier of the union over the grid of first-order rectangles,
/// closed by the single-user limits `(0, C(P))` and `(C(P/beta), 0)`.
pub fn first_order_region(cfg: &ValidatedConfig, alpha_grid: &[f64]) -> Result<RegionBoundary> {
    if alpha_grid.is_empty() {
        return Err(Error::domain("alpha grid must be nonempty"));
    }
    if alpha_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::domain("alpha grid must be strictly increasing"));
    }
    let p = cfg.total_power;
    let mut points = vec![BoundaryPoint::new(0.0, cap(p))];
    for &alpha in alpha_grid {
        let c = first_order_corner(&cfg.with_alpha(alpha)?);
        points.push(BoundaryPoint::new(c.r1, c.r2));
    }
    points.push(BoundaryPoint::new(cap(p / cfg.beta), 0.0));
    // Corners move right and down as alpha grows, so every one is Pareto-optimal.
    let region = RegionBoundary { criterion: Criterion::FirstOrder, points, metadata: RegionMetadata::of(cfg) };
    region.check_sorted()?;
    Ok(region)
}

/// Corner of the separate-error second-order region:
/// `L_i = sqrt(V_i) Q^{-1}(eps_i)`. Holds for both SIC and JNN decoding.
pub fn sep_second_order_point(cfg: &ValidatedConfig, eps1: f64, eps2: f64) -> Result<SecondOrderPair> {
    check_eps("eps1", eps1)?;
    check_eps("eps2", eps2)?;
    let op = OperatingPoint::of(cfg);
    Ok(SecondOrderPair { l1: op.v1.sqrt() * qfunc_inv(eps1)?, l2: op.v2.sqrt() * qfunc_inv(eps2)? })
}

/// `P{S <= (l1, l2)}` for `S ~ N(0, diag(V1, V2))`.
pub fn joint_success_probability(cfg: &ValidatedConfig, l: SecondOrderPair) -> f64 {
    let op = OperatingPoint::of(cfg);
    (1.0 - qfunc(l.l1 / op.v1.sqrt())) * (1.0 - qfunc(l.l2 / op.v2.sqrt()))
}

/// Minimal `l2` on the joint-error boundary at abscissa `l1`.
pub fn jep_l2_for_l1(cfg: &ValidatedConfig, eps: f64, l1: f64) -> Result<f64> {
    check_eps("eps", eps)?;
    let op = OperatingPoint::of(cfg);
    let (s1, s2) = (op.v1.sqrt(), op.v2.sqrt());
    let asymptote = s1 * qfunc_inv(eps)?;
    if l1.is_nan() || l1 < asymptote {
        return Err(Error::domain(format!(
            "l1 = {l1} lies below the joint-error asymptote {asymptote}; no finite l2 exists"
        )));
    }
    let q1 = qfunc(l1 / s1);
    // Q(l2/sqrt V2) = 1 - (1-eps)/(1-q1) = (eps - q1)/(1 - q1)
    let q2 = (eps - q1) / (1.0 - q1);
    if q2 <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(s2 * qfunc_inv(q2.min(1.0 - f64::EPSILON))?)
}

/// Joint-error boundary `{(l1, l2): (1-Q(l1/sqrt V1))(1-Q(l2/sqrt V2)) = 1-eps}`
/// sampled at the given abscissae. The dispersion matrix is diagonal, so the
/// Gaussian vector has independent components.
pub fn jep_second_order_boundary(cfg: &ValidatedConfig, eps: f64, l1_grid: &[f64]) -> Result<RegionBoundary> {
    check_eps("eps", eps)?;
    if l1_grid.is_empty() {
        return Err(Error::domain("l1 grid must be nonempty"));
    }
    let mut grid = l1_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    let points =
        grid.iter().map(|&l1| Ok(BoundaryPoint::new(l1, jep_l2_for_l1(cfg, eps, l1)?))).collect::<Result<Vec<_>>>()?;
    Ok(RegionBoundary {
        criterion: Criterion::Jep,
        points,
        metadata: RegionMetadata { eps: Some(eps), alpha: Some(cfg.alpha), ..RegionMetadata::of(cfg) },
    })
}

/// Abscissae for a joint-error boundary: log-spaced offsets above the `l1`
/// asymptote, out to where the remaining `l1` tail is `1e-10 * eps`.
pub fn jep_default_l1_grid(cfg: &ValidatedConfig, eps: f64, points: usize) -> Result<Vec<f64>> {
    check_eps("eps", eps)?;
    if points < 2 {
        return Err(Error::domain("grid needs at least two points"));
    }
    let s1 = OperatingPoint::of(cfg).v1.sqrt();
    let lo = s1 * qfunc_inv(eps)?;
    let hi = s1 * qfunc_inv(eps * 1e-10)?;
    let (d_lo, d_hi) = (1e-9 * s1, hi - lo);
    let ratio = (d_hi / d_lo).ln();
    Ok((0..points).map(|k| lo + d_lo * (ratio * k as f64 / (points - 1) as f64).exp()).collect())
}

/// Separate-error boundary for a total error budget: corners
/// `sqrt(V_i) Q^{-1}(eps_i)` over splits `eps1 + eps2 = eps_total`,
/// logistic-spaced so both ends approach the single-user asymptotes.
pub fn sep_split_boundary(cfg: &ValidatedConfig, eps_total: f64, points: usize) -> Result<RegionBoundary> {
    check_eps("eps_total", eps_total)?;
    if points < 2 {
        return Err(Error::domain("grid needs at least two points"));
    }
    let span = (1e9f64).ln();
    let mut pts = Vec::with_capacity(points);
    for k in 0..points {
        let t = span * (1.0 - 2.0 * k as f64 / (points - 1) as f64);
        let share = 1.0 / (1.0 + (-t).exp());
        let eps1 = eps_total * share;
        let eps2 = eps_total - eps1;
        let l = sep_second_order_point(cfg, eps1, eps2)?;
        pts.push(BoundaryPoint { x: l.l1, y: l.l2, eps1: Some(eps1), eps2: Some(eps2) });
    }
    let region = RegionBoundary {
        criterion: Criterion::Sep,
        points: pts,
        metadata: RegionMetadata { eps: Some(eps_total), alpha: Some(cfg.alpha), ..RegionMetadata::of(cfg) },
    };
    region.check_sorted()?;
    Ok(region)
}

/// How [`normal_approx_log_m`] picks the second-order pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApproxCriterion {
    /// Separate-error corner `(sqrt V1 Q^{-1}(eps1), sqrt V2 Q^{-1}(eps2))`.
    Sep,
    /// Joint-error boundary point for the joint budget `eps1 + eps2`, with
    /// marginal tails kept in the ratio `eps1 : eps2`.
    JepCorner,
}

/// Joint-error boundary point for joint budget `eps1 + eps2` with marginal
/// tails in ratio `eps1 : eps2`.
pub fn jep_corner(cfg: &ValidatedConfig, eps1: f64, eps2: f64) -> Result<SecondOrderPair> {
    check_eps("eps1", eps1)?;
    check_eps("eps2", eps2)?;
    let eps = eps1 + eps2;
    check_eps("eps1 + eps2", eps)?;
    let r = eps1 / eps2;
    // r q^2 - (1 + r) q + eps = 0, smaller root
    let b = 1.0 + r;
    let disc = b * b - 4.0 * r * eps;
    let q2 = 2.0 * eps / (b + disc.sqrt());
    let q1 = r * q2;
    let op = OperatingPoint::of(cfg);
    Ok(SecondOrderPair { l1: op.v1.sqrt() * qfunc_inv(q1)?, l2: op.v2.sqrt() * qfunc_inv(q2)? })
}

/// `ln M_i = n C_i - sqrt(n) L_i` (logarithmic third-order terms dropped).
pub fn normal_approx_log_m(
    cfg: &ValidatedConfig,
    n: usize,
    eps1: f64,
    eps2: f64,
    criterion: ApproxCriterion,
) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(Error::domain("blocklength must be >= 1"));
    }
    let l = match criterion {
        ApproxCriterion::Sep => sep_second_order_point(cfg, eps1, eps2)?,
        ApproxCriterion::JepCorner => jep_corner(cfg, eps1, eps2)?,
    };
    let op = OperatingPoint::of(cfg);
    let nf = n as f64;
    let log_m1 = nf * op.c1 - nf.sqrt() * l.l1;
    let log_m2 = nf * op.c2 - nf.sqrt() * l.l2;
    if log_m1 < 0.0 || log_m2 < 0.0 {
        return Err(Error::domain(format!(
            "blocklength n = {n} too small for the targets: ln M = ({log_m1}, {log_m2})"
        )));
    }
    Ok((log_m1, log_m2))
}
