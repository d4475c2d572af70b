//! Ensemble error-probability estimation: direct simulation of the coding
//! scheme and numerical evaluation of random-coding union bounds.

mod explicit;
mod implicit;
mod rcu;

pub use rcu::{g_cap, g_joint, ln_g_cap, ln_g_joint, rcu_bound, BoundKind, RcuEstimate, DEFAULT_QUAD_NODES};

use crate::fingerprint::fingerprint;
use crate::model::{FadingSpec, ValidatedConfig};
use crate::numerics::qfunc_inv;
use crate::rng::RandomStream;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Largest blocklength accepted by the simulators.
pub const MAX_BLOCKLENGTH: usize = 1024;
/// Largest `M1 * M2` decoded with materialized codebooks.
pub const MAX_EXPLICIT_PAIRS: u64 = 1 << 20;
/// Default number of trials per codebook draw.
pub const DEFAULT_BATCH: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decoder {
    Sic,
    Jnn,
}

/// How competing codewords are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    /// Explicit within the size guard; beyond it, implicit for the successive
    /// decoder and a size-limit error for the joint decoder.
    #[default]
    Auto,
    /// Materialized codebooks, redrawn every `batch` trials.
    Explicit,
    /// Only competitors that can beat the transmitted pair are sampled, as a
    /// Poisson process of intensity `M - 1` restricted to the decision caps.
    /// Exact in law for nearest-neighbor and successive decoding up to the
    /// Poisson approximation of the binomial competitor counts; the joint
    /// decoder's cross-pair event is drawn from its conditional intensity.
    Implicit,
}

/// Everything `run_simulation` needs besides the channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationRequest {
    pub n: usize,
    pub log_m1: f64,
    pub log_m2: f64,
    pub decoder: Decoder,
    pub trials: u64,
    pub seed: u64,
    pub batch: usize,
    #[serde(default)]
    pub engine: Engine,
    /// Gain laws `(H1, H2)`; `None` for the unfaded channel.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fading: Option<(FadingSpec, FadingSpec)>,
    /// Multiplies every noise sample.
    #[serde(default = "one")]
    pub noise_scale: f64,
}

fn one() -> f64 {
    1.0
}

impl SimulationRequest {
    pub fn new(n: usize, log_m1: f64, log_m2: f64, decoder: Decoder, trials: u64, seed: u64) -> Self {
        Self {
            n,
            log_m1,
            log_m2,
            decoder,
            trials,
            seed,
            batch: DEFAULT_BATCH,
            engine: Engine::Auto,
            fading: None,
            noise_scale: 1.0,
        }
    }
}

/// Rate estimate with its Wilson interval.
///
/// `std_error` is the larger of the binomial value and, when trials share
/// codebooks in batches, the between-batch value; the interval is binomial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub count: u64,
    pub estimate: f64,
    pub std_error: f64,
    pub ci95: (f64, f64),
}

impl RateEstimate {
    fn new(count: u64, trials: u64, clusters: Option<&Clusters>, event: usize) -> Result<Self> {
        let p = count as f64 / trials as f64;
        let t = trials as f64;
        let mut se = (p * (1.0 - p) / t).sqrt();
        if let Some(c) = clusters.filter(|c| c.batches >= 2) {
            let b = c.batches as f64;
            let ss = (c.cc[event] - 2.0 * p * c.ct[event] + p * p * c.tt).max(0.0);
            se = se.max((ss * b / (b - 1.0)).sqrt() / t);
        }
        Ok(Self { count, estimate: p, std_error: se, ci95: confidence_interval(count, trials, 0.95)? })
    }
}

/// Per-batch moment sums for the between-batch variance.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct Clusters {
    batches: u64,
    cc: [f64; 3],
    ct: [f64; 3],
    tt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub schema: u32,
    pub trials: u64,
    /// `W1_hat != W1` or the strong user's estimate of `W2` is wrong.
    pub err1: RateEstimate,
    /// `W2_hat != W2` at the weak user.
    pub err2: RateEstimate,
    /// Union of the two.
    pub err_joint: RateEstimate,
    pub seed: u64,
    pub config_fingerprint: String,
    pub decoder: Decoder,
    pub engine: Engine,
    pub n: usize,
    pub log_m1: f64,
    pub log_m2: f64,
    pub batch: usize,
}

/// Counts of the three error events.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct Counts {
    pub e1: u64,
    pub e2: u64,
    pub ej: u64,
    pub trials: u64,
    /// Present when trials were grouped around shared codebooks.
    pub clusters: Option<Clusters>,
}

impl Counts {
    pub fn record(&mut self, e1: bool, e2: bool) {
        self.e1 += e1 as u64;
        self.e2 += e2 as u64;
        self.ej += (e1 || e2) as u64;
        self.trials += 1;
    }

    /// Marks these counts as one batch of correlated trials.
    pub fn as_batch(mut self) -> Self {
        let t = self.trials as f64;
        let c = [self.e1 as f64, self.e2 as f64, self.ej as f64];
        self.clusters = Some(Clusters { batches: 1, cc: c.map(|x| x * x), ct: c.map(|x| x * t), tt: t * t });
        self
    }

    pub fn merge(self, o: Counts) -> Counts {
        let clusters = match (self.clusters, o.clusters) {
            (Some(a), Some(b)) => Some(Clusters {
                batches: a.batches + b.batches,
                cc: [0, 1, 2].map(|i| a.cc[i] + b.cc[i]),
                ct: [0, 1, 2].map(|i| a.ct[i] + b.ct[i]),
                tt: a.tt + b.tt,
            }),
            (a, b) => a.or(b),
        };
        Counts { e1: self.e1 + o.e1, e2: self.e2 + o.e2, ej: self.ej + o.ej, trials: self.trials + o.trials, clusters }
    }
}

/// Codebook size `round(exp(log_m))`, required to be at least one.
pub fn codebook_size(log_m: f64) -> Result<f64> {
    let m = log_m.exp().round();
    if m.is_nan() || m < 1.0 {
        return Err(Error::domain(format!("ln M = {log_m} gives a codebook with no words")));
    }
    Ok(m)
}

/// `ln(M - 1)` for `M = round(exp(log_m))`; `-inf` when `M = 1`.
pub(crate) fn ln_competitors(log_m: f64) -> f64 {
    if log_m < 30.0 {
        (log_m.exp().round() - 1.0).ln()
    } else {
        log_m + (-(-log_m).exp()).ln_1p()
    }
}

/// Fingerprint of everything that determines a simulation's output.
pub fn simulation_fingerprint(cfg: &ValidatedConfig, req: &SimulationRequest) -> Result<String> {
    fingerprint(&serde_json::json!({ "channel": cfg, "request": req }))
}

/// Whether materialized codebooks fit the size guard.
pub fn fits_explicit(log_m1: f64, log_m2: f64) -> bool {
    log_m1 + log_m2 <= (MAX_EXPLICIT_PAIRS as f64).ln() + 1e-9
        && codebook_size(log_m1).unwrap_or(f64::INFINITY) * codebook_size(log_m2).unwrap_or(f64::INFINITY)
            <= MAX_EXPLICIT_PAIRS as f64
}

/// Simulates `trials` transmissions and counts the error events.
///
/// Deterministic in `(cfg, req)`; the number of threads of the ambient rayon
/// pool does not affect the result.
pub fn run_simulation(cfg: &ValidatedConfig, req: &SimulationRequest) -> Result<SimReport> {
    let n = req.n;
    if !(2..=MAX_BLOCKLENGTH).contains(&n) {
        if n > MAX_BLOCKLENGTH {
            return Err(Error::SizeLimit(format!("blocklength {n} exceeds {MAX_BLOCKLENGTH}")));
        }
        return Err(Error::domain(format!("blocklength must be >= 2, got {n}")));
    }
    if req.trials == 0 {
        return Err(Error::domain("trials must be >= 1"));
    }
    if req.batch == 0 {
        return Err(Error::domain("batch must be >= 1"));
    }
    if !(req.noise_scale >= 0.0 && req.noise_scale.is_finite()) {
        return Err(Error::domain(format!("noise scale must be finite and >= 0, got {}", req.noise_scale)));
    }
    codebook_size(req.log_m1)?;
    codebook_size(req.log_m2)?;
    if let Some((a, b)) = &req.fading {
        a.validate()?;
        b.validate()?;
    }
    let explicit_ok = fits_explicit(req.log_m1, req.log_m2);
    let engine = match (req.engine, explicit_ok, req.decoder) {
        (Engine::Auto, true, _) => Engine::Explicit,
        (Engine::Auto, false, Decoder::Sic) => Engine::Implicit,
        (Engine::Auto, false, Decoder::Jnn) | (Engine::Explicit, false, _) => {
            return Err(Error::SizeLimit(format!(
                "M1*M2 = exp({:.3}) exceeds the explicit-decoding guard of 2^20 pairs; \
                 use the rcu command for bounds, or request the implicit engine",
                req.log_m1 + req.log_m2
            )))
        }
        (e, _, _) => e,
    };
    let counts = match engine {
        Engine::Explicit => explicit::simulate(cfg, req)?,
        _ => implicit::simulate(cfg, req)?,
    };
    debug_assert!(counts.ej >= counts.e1.max(counts.e2) && counts.ej <= counts.e1 + counts.e2);
    Ok(SimReport {
        schema: 1,
        trials: req.trials,
        err1: RateEstimate::new(counts.e1, req.trials, counts.clusters.as_ref(), 0)?,
        err2: RateEstimate::new(counts.e2, req.trials, counts.clusters.as_ref(), 1)?,
        err_joint: RateEstimate::new(counts.ej, req.trials, counts.clusters.as_ref(), 2)?,
        seed: req.seed,
        config_fingerprint: simulation_fingerprint(cfg, req)?,
        decoder: req.decoder,
        engine,
        n,
        log_m1: req.log_m1,
        log_m2: req.log_m2,
        batch: req.batch,
    })
}

/// Wilson score interval for `successes` out of `trials`.
pub fn confidence_interval(successes: u64, trials: u64, level: f64) -> Result<(f64, f64)> {
    if trials == 0 || successes > trials {
        return Err(Error::domain(format!("need 0 <= successes <= trials and trials >= 1 (got {successes}/{trials})")));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::domain(format!("confidence level must lie in (0,1), got {level}")));
    }
    let z = qfunc_inv(0.5 * (1.0 - level))?;
    let t = trials as f64;
    let p = successes as f64 / t;
    let z2 = z * z;
    let denom = 1.0 + z2 / t;
    let center = (p + z2 / (2.0 * t)) / denom;
    let half = z * (p * (1.0 - p) / t + z2 / (4.0 * t * t)).sqrt() / denom;
    let lo = if successes == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if successes == trials { 1.0 } else { (center + half).min(1.0) };
    Ok((lo, hi))
}

/// Noise, gains and transmitted words for one trial.
pub(crate) struct Channel<'a> {
    pub cfg: &'a ValidatedConfig,
    pub n: usize,
    pub fading: Option<(FadingSpec, FadingSpec)>,
    pub noise_scale: f64,
}

impl Channel<'_> {
    /// Gains, then `(Z1, Z2)`, drawn in a fixed order from the trial stream.
    pub fn draw(&self, rng: &mut RandomStream) -> ((f64, f64), Vec<f64>, Vec<f64>) {
        let gains = match &self.fading {
            Some(pair) => crate::fading::sample_gain_pair(pair, rng),
            None => (1.0, 1.0),
        };
        let mut z1 = vec![0.0; self.n];
        let mut z2 = vec![0.0; self.n];
        self.cfg.noise1.fill(&mut z1, rng);
        self.cfg.noise2.fill(&mut z2, rng);
        if self.noise_scale != 1.0 {
            z1.iter_mut().chain(z2.iter_mut()).for_each(|z| *z *= self.noise_scale);
        }
        (gains, z1, z2)
    }
}
