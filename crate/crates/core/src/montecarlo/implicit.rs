//! Simulation without materialized codebooks.
//!
//! Given the transmitted words and the channel outputs, a competing codeword
//! matters only if it falls in one of a few spherical caps (the sets of
//! words a decoder would prefer to the transmitted one). The `M - 1`
//! competitors of a codebook are replaced by a Poisson process with the same
//! intensity, so the points inside a union of caps can be generated cap by
//! cap: each cap receives a Poisson number of uniform points and a point is
//! kept only by the first cap that contains it.
//!
//! The joint decoder also errs when some pair of wrong words `(V', U')` beats
//! the transmitted pair. Given the `U'` process, the wrong `V'` words that do
//! so for a fixed `U'` form a cap whose mass depends on `<Y1, U'>` alone. The
//! total intensity is the sum of those masses: exact for the `U'` words with
//! the largest `<Y1, U'>` (sampled explicitly), replaced by its expectation
//! for the remaining bulk, and the event is drawn as the first point of a
//! Poisson process with that intensity, independently of the stage-two cap.

use super::{ln_competitors, Channel, Counts, Decoder, SimulationRequest};
use crate::codec::{dot, sample_sphere};
use crate::model::ValidatedConfig;
use crate::numerics::{cap_inv_within, ln_cap_tail, ln_sphere_projection_integral, log_sum_exp};
use crate::rng::{Domain, RandomStream};
use crate::{Error, Result};
use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;

/// Points materialized per cap; beyond this the cap is certainly occupied
/// and only its overlap with later caps is truncated.
const MAX_POINTS_PER_CAP: u64 = 256;
/// Expected number of explicitly sampled high-correlation `U'` words.
const TOP_TARGET: f64 = 32.0;
const BULK_NODES: usize = 48;

struct Cap {
    dir: Vec<f64>,
    cos: f64,
    ln_mass: f64,
}

impl Cap {
    /// Words `w` of norm `radius` with `<center, w> > <center, word>`.
    fn beating(center: &[f64], word: &[f64], radius: f64) -> Self {
        let norm = dot(center, center).sqrt();
        if norm == 0.0 {
            return Self { dir: center.to_vec(), cos: 1.0, ln_mass: f64::NEG_INFINITY };
        }
        Self::with_cos(center, norm, dot(center, word) / (norm * radius))
    }

    fn with_cos(center: &[f64], norm: f64, cos: f64) -> Self {
        let n = center.len();
        Self { dir: center.iter().map(|c| c / norm).collect(), cos, ln_mass: ln_cap_tail(n, cos) }
    }

    fn contains(&self, x: &[f64], radius: f64) -> bool {
        dot(&self.dir, x) > self.cos * radius
    }

    fn sample(&self, radius: f64, rng: &mut RandomStream, out: &mut [f64]) {
        let n = out.len();
        let u: f64 = 1.0 - rng.random::<f64>();
        let s = cap_inv_within(n, self.ln_mass + u.ln(), self.cos.max(-1.0), 1.0);
        loop {
            for o in out.iter_mut() {
                *o = StandardNormal.sample(rng);
            }
            let along = dot(out, &self.dir);
            out.iter_mut().zip(&self.dir).for_each(|(o, d)| *o -= along * d);
            let norm = dot(out, out).sqrt();
            if norm > 0.0 {
                let perp = (1.0 - s * s).max(0.0).sqrt() / norm;
                out.iter_mut().zip(&self.dir).for_each(|(o, d)| *o = radius * (s * d + perp * *o));
                return;
            }
        }
    }
}

fn poisson(ln_mu: f64, rng: &mut RandomStream) -> u64 {
    if ln_mu == f64::NEG_INFINITY {
        return 0;
    }
    let mu = ln_mu.exp();
    if mu > 1e12 {
        return u64::MAX;
    }
    if mu < 10.0 {
        // inversion; exact for tiny means
        let u: f64 = rng.random();
        let (mut k, mut p) = (0u64, (-mu).exp());
        let mut cdf = p;
        while u >= cdf && p > 0.0 {
            k += 1;
            p *= mu / k as f64;
            cdf += p;
        }
        return k;
    }
    Poisson::new(mu).expect("finite positive mean").sample(rng) as u64
}

struct ProcessPoint {
    mask: u32,
    /// Inner product with the reference vector (the strong user's output).
    ref_dot: f64,
}

/// Points of a Poisson process of intensity `exp(ln_lambda)` (relative to
/// the uniform law on the sphere) restricted to the union of `caps`.
fn sample_process(
    caps: &[Cap],
    ln_lambda: f64,
    radius: f64,
    reference: &[f64],
    rng: &mut RandomStream,
) -> Vec<ProcessPoint> {
    let mut points = Vec::new();
    let mut x = vec![0.0; reference.len()];
    for (k, cap) in caps.iter().enumerate() {
        let count = poisson(ln_lambda + cap.ln_mass, rng);
        for _ in 0..count.min(MAX_POINTS_PER_CAP) {
            cap.sample(radius, rng, &mut x);
            if caps[..k].iter().any(|c| c.contains(&x, radius)) {
                continue;
            }
            let mask = caps
                .iter()
                .enumerate()
                .filter(|(j, c)| *j == k || c.contains(&x, radius))
                .fold(0u32, |m, (j, _)| m | (1 << j));
            points.push(ProcessPoint { mask, ref_dot: dot(&x, reference) });
        }
    }
    points
}

struct Setup<'a> {
    ch: Channel<'a>,
    decoder: Decoder,
    r_u: f64,
    r_v: f64,
    ln_lam_u: f64,
    ln_lam_v: f64,
    /// Correlation above which `U'` words are sampled for the cross-pair event.
    top_cos: f64,
}

pub(super) fn simulate(cfg: &ValidatedConfig, req: &SimulationRequest) -> Result<Counts> {
    let n = req.n;
    let ln_lam_u = ln_competitors(req.log_m2);
    let ln_target = TOP_TARGET.ln() - ln_lam_u;
    let top_cos = if ln_target >= 0.0 { -1.0 } else { cap_inv_within(n, ln_target, -1.0, 1.0) };
    let setup = Setup {
        ch: Channel { cfg, n, fading: req.fading, noise_scale: req.noise_scale },
        decoder: req.decoder,
        r_u: (n as f64 * cfg.weak_power()).sqrt(),
        r_v: (n as f64 * cfg.strong_power()).sqrt(),
        ln_lam_u,
        ln_lam_v: ln_competitors(req.log_m1),
        top_cos,
    };
    let chunk = req.batch as u64;
    let chunks = req.trials.div_ceil(chunk);
    let per_chunk: Vec<Counts> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut counts = Counts::default();
            for t in c * chunk..((c + 1) * chunk).min(req.trials) {
                let mut rng = RandomStream::derive(req.seed, Domain::Trial, t);
                let (e1, e2) = trial(&setup, &mut rng)?;
                counts.record(e1, e2);
            }
            Ok(counts)
        })
        .collect::<Result<_>>()?;
    Ok(per_chunk.into_iter().fold(Counts::default(), Counts::merge))
}

fn trial(s: &Setup, rng: &mut RandomStream) -> Result<(bool, bool)> {
    let n = s.ch.n;
    let ((h1, h2), z1, z2) = s.ch.draw(rng);
    let mut u = vec![0.0; n];
    let mut v = vec![0.0; n];
    sample_sphere(&mut u, s.r_u, rng);
    sample_sphere(&mut v, s.r_v, rng);
    let y1: Vec<f64> = (0..n).map(|i| h1 * (u[i] + v[i]) + z1[i]).collect();
    let y2: Vec<f64> = (0..n).map(|i| h2 * (u[i] + v[i]) + z2[i]).collect();

    let mut caps = vec![Cap::beating(&y2, &u, s.r_u)];
    match s.decoder {
        Decoder::Sic => caps.push(Cap::beating(&y1, &u, s.r_u)),
        Decoder::Jnn => {
            let c: Vec<f64> = y1.iter().zip(&v).map(|(y, v)| y - h1 * v).collect();
            caps.push(Cap::beating(&c, &u, s.r_u));
            caps.push(Cap::with_cos(&y1, dot(&y1, &y1).sqrt(), s.top_cos));
        }
    }
    let points = sample_process(&caps, s.ln_lam_u, s.r_u, &y1, rng);
    let occupied = |bit: u32| points.iter().any(|p| p.mask & (1 << bit) != 0);
    let err2 = occupied(0);

    let c: Vec<f64> = y1.iter().zip(&u).map(|(y, u)| y - h1 * u).collect();
    let stage2 = Cap::beating(&c, &v, s.r_v);
    let v_err = poisson(s.ln_lam_v + stage2.ln_mass, rng) > 0;
    let mut err1 = occupied(1) || v_err;
    if s.decoder == Decoder::Jnn && !err1 && s.ln_lam_v > f64::NEG_INFINITY {
        let top: Vec<&ProcessPoint> = points.iter().filter(|p| p.mask & 4 != 0).collect();
        err1 = cross_pair_event(s, &y1, &u, &v, h1, &top, rng)?;
    }
    Ok((err1, err2))
}

/// Draws whether some pair of wrong words beats the transmitted pair.
fn cross_pair_event(
    s: &Setup,
    y1: &[f64],
    u: &[f64],
    v: &[f64],
    h1: f64,
    top: &[&ProcessPoint],
    rng: &mut RandomStream,
) -> Result<bool> {
    let n = y1.len();
    let y_norm2 = dot(y1, y1);
    let kappa = dot(y1, u) + dot(y1, v) - h1 * dot(u, v);
    // ln P{V' beats (V, U) jointly with U'} as a function of <Y1, U'>
    let ln_f = |yu: f64| -> f64 {
        let c2 = (y_norm2 + h1 * h1 * s.r_u * s.r_u - 2.0 * h1 * yu).max(f64::MIN_POSITIVE);
        ln_cap_tail(n, (kappa - yu) / (c2.sqrt() * s.r_v))
    };
    let mut terms: Vec<f64> = top.iter().map(|p| ln_f(p.ref_dot)).collect();
    if s.top_cos > -1.0 && s.ln_lam_u > f64::NEG_INFINITY {
        let scale = y_norm2.sqrt() * s.r_u;
        let bulk = ln_sphere_projection_integral(n, -1.0, s.top_cos, BULK_NODES, |rho| ln_f(rho * scale))?;
        terms.push(s.ln_lam_u + bulk);
    }
    let ln_rate = s.ln_lam_v + log_sum_exp(&terms);
    if ln_rate.is_nan() {
        return Err(Error::Numeric("non-finite cross-pair intensity".into()));
    }
    let p = -(-ln_rate.exp()).exp_m1();
    Ok(rng.random::<f64>() < p)
}
