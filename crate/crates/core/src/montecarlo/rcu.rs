//! Random-coding union bounds evaluated with exact sphere-cap kernels.

use super::ln_competitors;
use crate::codec::{dot, sample_sphere, DensityParams};
use crate::model::ValidatedConfig;
use crate::numerics::{ln_cap_tail, ln_sphere_projection_integral};
use crate::rng::{Domain, RandomStream};
use crate::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub const DEFAULT_QUAD_NODES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    /// Weak user, nearest-neighbor decoding.
    User2Sep,
    /// Strong user, successive decoding: stage-one plus stage-two terms.
    User1SepSic,
    /// Strong user, joint decoding.
    User1SepJnn,
    /// Joint error, successive decoding at the strong user.
    JepSic,
    /// Joint error, joint decoding at the strong user.
    JepJnn,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RcuEstimate {
    pub schema: u32,
    pub value: f64,
    pub std_error: f64,
    pub samples: usize,
    pub bound_kind: BoundKind,
    pub n: usize,
    pub log_m1: f64,
    pub log_m2: f64,
    pub seed: u64,
}

/// `P{density(U', center) >= t}` for `U'` uniform on the sphere of radius
/// `sqrt(n S)`.
pub fn g_cap(t: f64, center: &[f64], params: DensityParams, n: usize) -> Result<f64> {
    Ok(ln_g_cap(t, center, params, n)?.exp())
}

/// Natural log of [`g_cap`], accurate when the probability underflows.
pub fn ln_g_cap(t: f64, center: &[f64], params: DensityParams, n: usize) -> Result<f64> {
    if center.len() != n {
        return Err(Error::LengthMismatch { expected: n, actual: center.len() });
    }
    if n < 2 {
        return Err(Error::domain(format!("dimension must be >= 2, got {n}")));
    }
    if t.is_nan() {
        return Err(Error::domain("threshold is NaN"));
    }
    let (s, d) = (params.signal_power, params.effective_noise);
    let nf = n as f64;
    let c2 = dot(center, center);
    let base = nf * params.capacity();
    if s == 0.0 || c2 == 0.0 {
        // the density does not depend on the word
        let constant = base + c2 / (2.0 * (s + d)) - (c2 + nf * s) / (2.0 * d);
        return Ok(if constant >= t { 0.0 } else { f64::NEG_INFINITY });
    }
    if t == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    if t == f64::INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    let theta = d * (t - base) - d * c2 / (2.0 * (s + d)) + 0.5 * (c2 + nf * s);
    Ok(ln_cap_tail(n, theta / (c2.sqrt() * (nf * s).sqrt())))
}

/// `P{joint density(U' + V', y1) >= t}` for independent spherical `U'`, `V'`
/// of powers `(1-alpha) P` and `alpha P`, under parameters `(P, beta)`.
pub fn g_joint(t: f64, y1: &[f64], cfg: &ValidatedConfig, n: usize, quad_nodes: usize) -> Result<f64> {
    Ok(ln_g_joint(t, y1, cfg, n, quad_nodes)?.exp())
}

/// Natural log of [`g_joint`].
pub fn ln_g_joint(t: f64, y1: &[f64], cfg: &ValidatedConfig, n: usize, quad_nodes: usize) -> Result<f64> {
    if y1.len() != n {
        return Err(Error::LengthMismatch { expected: n, actual: y1.len() });
    }
    if t.is_nan() {
        return Err(Error::domain("threshold is NaN"));
    }
    if t == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    let p = DensityParams::new(cfg.total_power, cfg.beta)?;
    let y2 = dot(y1, y1);
    // density >= t  <=>  |y1 - U' - V'|^2 <= radius2
    let radius2 = 2.0 * cfg.beta * (n as f64 * p.capacity() + y2 / (2.0 * (cfg.total_power + cfg.beta)) - t);
    ln_joint_ball(y1, radius2, cfg, n, quad_nodes)
}

/// `ln P{|y1 - U' - V'|^2 <= radius2}`.
fn ln_joint_ball(y1: &[f64], radius2: f64, cfg: &ValidatedConfig, n: usize, nodes: usize) -> Result<f64> {
    if radius2 < 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    let nf = n as f64;
    let (su, sv) = (nf * cfg.weak_power(), nf * cfg.strong_power());
    let (y_norm, r_v, r_u) = (dot(y1, y1).sqrt(), sv.sqrt(), su.sqrt());
    let ln_f = |rho: f64| -> f64 {
        // center y1 - V' with <y1, V'> = rho |y1| r_v
        let c2 = (y_norm * y_norm + sv - 2.0 * rho * y_norm * r_v).max(0.0);
        if c2 == 0.0 {
            return if su <= radius2 { 0.0 } else { f64::NEG_INFINITY };
        }
        ln_cap_tail(n, (c2 + su - radius2) / (2.0 * c2.sqrt() * r_u))
    };
    if y_norm == 0.0 {
        return Ok(ln_f(0.0));
    }
    // The cap about y1 - V' is empty unless |y1 - V'| lies within
    // radius of r_u; restrict the projection to that band.
    let r = radius2.sqrt();
    let (c_lo, c_hi) = ((r_u - r).max(0.0), r_u + r);
    let rho_of = |c: f64| (y_norm * y_norm + sv - c * c) / (2.0 * y_norm * r_v);
    let (lo, hi) = (rho_of(c_hi).max(-1.0), rho_of(c_lo).min(1.0));
    if lo >= hi {
        return Ok(if lo > 1.0 || hi < -1.0 { f64::NEG_INFINITY } else { ln_f(lo.clamp(-1.0, 1.0)) }.min(0.0));
    }
    let v = ln_sphere_projection_integral(n, lo, hi, nodes, ln_f)?;
    if v.is_nan() || v > 1e-9 {
        return Err(Error::Numeric(format!("joint tail quadrature returned ln P = {v}")));
    }
    Ok(v.min(0.0))
}

/// `exp(ln_count + ln_p)` with `0 * anything = 0`.
fn scaled(ln_count: f64, ln_p: f64) -> f64 {
    if ln_count == f64::NEG_INFINITY || ln_p == f64::NEG_INFINITY {
        0.0
    } else {
        (ln_count + ln_p).exp()
    }
}

/// `ln P{<center, W'> > <center, word>}` for `W'` uniform on the sphere
/// through `word`.
fn ln_beats(center: &[f64], word: &[f64], radius: f64) -> f64 {
    let norm = dot(center, center).sqrt();
    if norm == 0.0 {
        return f64::NEG_INFINITY;
    }
    ln_cap_tail(center.len(), dot(center, word) / (norm * radius))
}

/// Monte Carlo average over `(U, V, Z1, Z2)` of the chosen bound's
/// per-sample expression, with the pairwise probabilities in closed form.
pub fn rcu_bound(
    cfg: &ValidatedConfig,
    n: usize,
    log_m1: f64,
    log_m2: f64,
    kind: BoundKind,
    samples: usize,
    seed: u64,
) -> Result<RcuEstimate> {
    if n < 2 {
        return Err(Error::domain(format!("blocklength must be >= 2, got {n}")));
    }
    if samples < 2 {
        return Err(Error::domain("need at least two outer samples"));
    }
    super::codebook_size(log_m1)?;
    super::codebook_size(log_m2)?;
    let (l1, l2) = (ln_competitors(log_m1), ln_competitors(log_m2));
    let nf = n as f64;
    let (r_u, r_v) = ((nf * cfg.weak_power()).sqrt(), (nf * cfg.strong_power()).sqrt());

    let one = |i: usize| -> Result<f64> {
        let mut rng = RandomStream::derive(seed, Domain::Rcu, i as u64);
        let mut z1 = vec![0.0; n];
        let mut z2 = vec![0.0; n];
        cfg.noise1.fill(&mut z1, &mut rng);
        cfg.noise2.fill(&mut z2, &mut rng);
        let mut u = vec![0.0; n];
        let mut v = vec![0.0; n];
        sample_sphere(&mut u, r_u, &mut rng);
        sample_sphere(&mut v, r_v, &mut rng);
        let y1: Vec<f64> = (0..n).map(|k| u[k] + v[k] + z1[k]).collect();
        let y2: Vec<f64> = (0..n).map(|k| u[k] + v[k] + z2[k]).collect();
        let minus = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x - y).collect() };

        let weak = || scaled(l2, ln_beats(&y2, &u, r_u));
        let stage1 = || scaled(l2, ln_beats(&y1, &u, r_u));
        let stage2 = || scaled(l1, ln_beats(&minus(&y1, &u), &v, r_v));
        let own_given_v = || scaled(l2, ln_beats(&minus(&y1, &v), &u, r_u));
        let cross = |acc: f64| -> Result<f64> {
            if acc >= 1.0 || l1 == f64::NEG_INFINITY || l2 == f64::NEG_INFINITY {
                return Ok(0.0);
            }
            let ln_g12 = ln_joint_ball(&y1, dot(&z1, &z1), cfg, n, DEFAULT_QUAD_NODES)?;
            Ok(scaled(l1 + l2, ln_g12))
        };
        let value = match kind {
            BoundKind::User2Sep => weak(),
            BoundKind::User1SepSic => stage1().min(1.0) + stage2().min(1.0),
            BoundKind::User1SepJnn => {
                let acc = stage2() + own_given_v();
                acc + cross(acc)?
            }
            BoundKind::JepSic => stage2() + stage1() + weak(),
            BoundKind::JepJnn => {
                let acc = stage2() + own_given_v() + weak();
                acc + cross(acc)?
            }
        };
        Ok(value.min(1.0))
    };

    let values: Vec<f64> = (0..samples).into_par_iter().map(one).collect::<Result<_>>()?;
    let m = samples as f64;
    let mean = values.iter().sum::<f64>() / m;
    let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0);
    Ok(RcuEstimate {
        schema: 1,
        value: mean.clamp(0.0, 1.0),
        std_error: (var / m).sqrt(),
        samples,
        bound_kind: kind,
        n,
        log_m1,
        log_m2,
        seed,
    })
}
