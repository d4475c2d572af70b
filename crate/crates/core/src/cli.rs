//! Command-line front end: `bcdisp region|simulate|rcu|fading`.
//!
//! Configuration is a strict JSON document; every violation is reported with
//! its JSON pointer. Exit codes: 0 success, 1 I/O failure, 2 configuration
//! error, 3 numerical failure, 4 size guard exceeded.

use crate::analysis::{
    default_alpha_grid, first_order_region, fmt_f64, jep_default_l1_grid, jep_second_order_boundary,
    normal_approx_log_m, sep_second_order_point, sep_split_boundary, ApproxCriterion, BoundaryPoint, OperatingPoint,
    RegionBoundary,
};
use crate::fading::{outage_prob, outage_region, theorem3_bound, OutageMethod, StrongDispersionGain, User};
use crate::fingerprint::fingerprint;
use crate::model::{ChannelConfig, FadingSpec, NoiseFamily, NoiseSpec, ValidatedConfig};
use crate::montecarlo::{rcu_bound, run_simulation, BoundKind, Decoder, Engine, SimulationRequest, DEFAULT_BATCH};
use crate::Error;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Map, Value};
use std::path::{Path, PathBuf};

#[derive(Debug, Parser)]
#[command(
    name = "bcdisp",
    version,
    about = "Finite-blocklength rate regions and ensemble simulation for the two-user degraded broadcast channel"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rate-region boundary as CSV (first-order, separate, joint or outage).
    Region(CommonArgs),
    /// Ensemble error rates by direct simulation.
    Simulate(CommonArgs),
    /// Random-coding union bound.
    Rcu(CommonArgs),
    /// Outage region and finite-blocklength bounds under quasi-static fading.
    Fading(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (overrides `output_dir` in the config).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Seed (overrides `seed` in the config).
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Failure of a command, carrying its exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error("{0}")]
    Size(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Size(_) => 4,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidConfig(v) => CliError::Config(v),
            Error::Numeric(m) => CliError::Numeric(m),
            Error::SizeLimit(m) => CliError::Size(m),
            Error::Io(e) => CliError::Io(e.to_string()),
            other => CliError::Config(vec![other.to_string()]),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Region criteria accepted by the `region` command.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionCriterion {
    First,
    Sep,
    Jep,
    Outage,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionSection {
    pub criterion: RegionCriterion,
    pub eps1: Option<f64>,
    pub eps2: Option<f64>,
    pub eps: Option<f64>,
    pub points: usize,
}

/// Codebook sizes, given directly or through the normal approximation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Rates {
    LogM { log_m1: f64, log_m2: f64 },
    Target { eps1: f64, eps2: f64, criterion: ApproxCriterion },
}

impl Rates {
    pub fn resolve(&self, cfg: &ValidatedConfig, n: usize) -> crate::Result<(f64, f64)> {
        match *self {
            Rates::LogM { log_m1, log_m2 } => Ok((log_m1, log_m2)),
            Rates::Target { eps1, eps2, criterion } => normal_approx_log_m(cfg, n, eps1, eps2, criterion),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulateSection {
    pub n: usize,
    pub rates: Rates,
    pub decoder: Decoder,
    pub trials: u64,
    pub batch: usize,
    pub engine: Engine,
    pub noise_scale: f64,
    pub with_fading: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RcuSection {
    pub n: usize,
    pub rates: Rates,
    pub bound_kind: BoundKind,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FadingSection {
    pub h1: FadingSpec,
    pub h2: FadingSpec,
    pub eps1: Option<f64>,
    pub eps2: Option<f64>,
    pub blocklengths: Vec<usize>,
    pub samples: usize,
    pub strong_dispersion_gain: StrongDispersionGain,
}

/// A fully validated configuration document.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub channel: ValidatedConfig,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub output_dir: Option<PathBuf>,
    pub region: Option<RegionSection>,
    pub simulate: Option<SimulateSection>,
    pub rcu: Option<RcuSection>,
    pub fading: Option<FadingSection>,
}

/// Collects schema violations keyed by JSON pointer.
#[derive(Default)]
struct Checker {
    errors: Vec<String>,
}

type Obj = Map<String, Value>;

impl Checker {
    fn fail(&mut self, path: &str, msg: impl std::fmt::Display) {
        self.errors.push(format!("{path}: {msg}"));
    }

    fn object<'a>(&mut self, v: &'a Value, path: &str, allowed: &[&str]) -> Option<&'a Obj> {
        let Some(o) = v.as_object() else {
            self.fail(path, "expected an object");
            return None;
        };
        for k in o.keys() {
            if !allowed.contains(&k.as_str()) {
                self.fail(&format!("{path}/{k}"), "unknown field");
            }
        }
        Some(o)
    }

    fn number(&mut self, o: &Obj, path: &str, key: &str, required: bool) -> Option<f64> {
        let p = format!("{path}/{key}");
        match o.get(key) {
            None => {
                if required {
                    self.fail(&p, "required");
                }
                None
            }
            Some(v) => match v.as_f64() {
                Some(x) if x.is_finite() => Some(x),
                _ => {
                    self.fail(&p, format!("expected a finite number, got {v}"));
                    None
                }
            },
        }
    }

    fn checked(
        &mut self,
        o: &Obj,
        path: &str,
        key: &str,
        required: bool,
        ok: impl Fn(f64) -> bool,
        what: &str,
    ) -> Option<f64> {
        let x = self.number(o, path, key, required)?;
        if ok(x) {
            Some(x)
        } else {
            self.fail(&format!("{path}/{key}"), format!("{what}, got {x}"));
            None
        }
    }

    fn probability(&mut self, o: &Obj, path: &str, key: &str, required: bool) -> Option<f64> {
        self.checked(o, path, key, required, |x| x > 0.0 && x < 1.0, "must lie in the open interval (0,1)")
    }

    fn integer(&mut self, o: &Obj, path: &str, key: &str, required: bool, min: u64) -> Option<u64> {
        let p = format!("{path}/{key}");
        match o.get(key) {
            None => {
                if required {
                    self.fail(&p, "required");
                }
                None
            }
            Some(v) => match v.as_u64() {
                Some(x) if x >= min => Some(x),
                _ => {
                    self.fail(&p, format!("expected an integer >= {min}, got {v}"));
                    None
                }
            },
        }
    }

    fn choice<T: Copy>(&mut self, o: &Obj, path: &str, key: &str, options: &[(&str, T)]) -> Option<T> {
        let p = format!("{path}/{key}");
        let v = o.get(key)?;
        let found = v.as_str().and_then(|s| options.iter().find(|(name, _)| *name == s));
        match found {
            Some((_, t)) => Some(*t),
            None => {
                let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
                self.fail(&p, format!("expected one of {names:?}, got {v}"));
                None
            }
        }
    }
}

const NOISE_FAMILIES: [(&str, NoiseFamily); 4] = [
    ("gaussian", NoiseFamily::Gaussian),
    ("laplace", NoiseFamily::Laplace),
    ("uniform", NoiseFamily::Uniform),
    ("scaled_rademacher_mixture", NoiseFamily::ScaledRademacherMixture),
];

const DECODERS: [(&str, Decoder); 2] = [("sic", Decoder::Sic), ("jnn", Decoder::Jnn)];

const ENGINES: [(&str, Engine); 3] =
    [("auto", Engine::Auto), ("explicit", Engine::Explicit), ("implicit", Engine::Implicit)];

const BOUND_KINDS: [(&str, BoundKind); 5] = [
    ("user2_sep", BoundKind::User2Sep),
    ("user1_sep_sic", BoundKind::User1SepSic),
    ("user1_sep_jnn", BoundKind::User1SepJnn),
    ("jep_sic", BoundKind::JepSic),
    ("jep_jnn", BoundKind::JepJnn),
];

fn parse_noise(c: &mut Checker, v: Option<&Value>, path: &str, variance_default: f64) -> Option<NoiseSpec> {
    let Some(v) = v else {
        return NoiseSpec::gaussian(variance_default).ok();
    };
    let o = c.object(v, path, &["family", "variance", "moment4", "moment6"])?;
    let family = if o.contains_key("family") {
        c.choice(o, path, "family", &NOISE_FAMILIES)?
    } else {
        c.fail(&format!("{path}/family"), "required");
        return None;
    };
    let variance = c.checked(o, path, "variance", false, |x| x > 0.0, "must be > 0").unwrap_or(variance_default);
    let m4 = c.number(o, path, "moment4", family == NoiseFamily::ScaledRademacherMixture);
    let m6 = c.number(o, path, "moment6", false);
    let given_m4 = if family == NoiseFamily::ScaledRademacherMixture { m4 } else { None };
    match NoiseSpec::with_family(family, variance, given_m4) {
        Ok(spec) => {
            let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b.abs().max(1e-300);
            if let Some(m4) = m4 {
                if !close(m4, spec.moment4) {
                    c.fail(&format!("{path}/moment4"), format!("{m4} differs from the family value {}", spec.moment4));
                }
            }
            if let Some(m6) = m6 {
                if !close(m6, spec.moment6) {
                    c.fail(&format!("{path}/moment6"), format!("{m6} differs from the family value {}", spec.moment6));
                }
            }
            Some(spec)
        }
        Err(e) => {
            c.fail(path, e);
            None
        }
    }
}

fn parse_channel(c: &mut Checker, v: Option<&Value>) -> Option<ValidatedConfig> {
    let path = "/channel";
    let Some(v) = v else {
        c.fail(path, "required");
        return None;
    };
    let o = c.object(v, path, &["total_power", "alpha", "beta", "noise1", "noise2"])?;
    let before = c.errors.len();
    let p = c.checked(o, path, "total_power", true, |x| x > 0.0, "must be > 0");
    let alpha = c.probability(o, path, "alpha", true);
    let beta = c.probability(o, path, "beta", true);
    let noise1 = parse_noise(c, o.get("noise1"), "/channel/noise1", beta.unwrap_or(0.5));
    let noise2 = parse_noise(c, o.get("noise2"), "/channel/noise2", 1.0);
    if let (Some(beta), Some(n1)) = (beta, noise1) {
        if (n1.variance - beta).abs() > 1e-12 {
            c.fail("/channel/noise1/variance", format!("must equal beta = {beta}, got {}", n1.variance));
        }
    }
    if let Some(n2) = noise2 {
        if (n2.variance - 1.0).abs() > 1e-12 {
            c.fail("/channel/noise2/variance", format!("must equal 1, got {}", n2.variance));
        }
    }
    if c.errors.len() > before {
        return None;
    }
    let cfg = ChannelConfig { total_power: p?, alpha: alpha?, beta: beta?, noise1: noise1?, noise2: noise2? };
    match cfg.validate() {
        Ok(v) => Some(v),
        Err(Error::InvalidConfig(list)) => {
            list.into_iter().for_each(|m| c.fail(path, m));
            None
        }
        Err(e) => {
            c.fail(path, e);
            None
        }
    }
}

fn parse_fading_spec(c: &mut Checker, v: Option<&Value>, path: &str) -> Option<FadingSpec> {
    let Some(v) = v else {
        c.fail(path, "required");
        return None;
    };
    let family = v.get("family").and_then(Value::as_str);
    let spec = match family {
        Some("rayleigh") => {
            let o = c.object(v, path, &["family", "mean_square"])?;
            let ms = c.checked(o, path, "mean_square", false, |x| x > 0.0, "must be > 0").unwrap_or(1.0);
            FadingSpec::Rayleigh { mean_square: ms }
        }
        Some("rice") => {
            let o = c.object(v, path, &["family", "k_factor", "mean_square"])?;
            let k = c.checked(o, path, "k_factor", true, |x| x >= 0.0, "must be >= 0");
            let ms = c.checked(o, path, "mean_square", false, |x| x > 0.0, "must be > 0").unwrap_or(1.0);
            FadingSpec::Rice { k_factor: k?, mean_square: ms }
        }
        Some("deterministic") => {
            let o = c.object(v, path, &["family", "gain"])?;
            let g = c.checked(o, path, "gain", true, |x| x > 0.0, "must be > 0");
            FadingSpec::Deterministic { gain: g? }
        }
        _ => {
            c.fail(
                &format!("{path}/family"),
                format!(
                    "expected one of [\"rayleigh\", \"rice\", \"deterministic\"], got {}",
                    v.get("family").unwrap_or(&Value::Null)
                ),
            );
            return None;
        }
    };
    Some(spec)
}

fn parse_rates(c: &mut Checker, o: &Obj, path: &str) -> Option<Rates> {
    let has_direct = o.contains_key("log_m1") || o.contains_key("log_m2");
    match (has_direct, o.get("target")) {
        (true, Some(_)) => {
            c.fail(path, "give either log_m1/log_m2 or target, not both");
            None
        }
        (true, None) => {
            let ok = |x: f64| x > -std::f64::consts::LN_2;
            let l1 = c.checked(o, path, "log_m1", true, ok, "must give a codebook of at least one word");
            let l2 = c.checked(o, path, "log_m2", true, ok, "must give a codebook of at least one word");
            Some(Rates::LogM { log_m1: l1?, log_m2: l2? })
        }
        (false, Some(t)) => {
            let tp = format!("{path}/target");
            let to = c.object(t, &tp, &["eps1", "eps2", "criterion"])?;
            let e1 = c.probability(to, &tp, "eps1", true);
            let e2 = c.probability(to, &tp, "eps2", true);
            let crit = c
                .choice(
                    to,
                    &tp,
                    "criterion",
                    &[("sep", ApproxCriterion::Sep), ("jep_corner", ApproxCriterion::JepCorner)],
                )
                .unwrap_or(ApproxCriterion::Sep);
            Some(Rates::Target { eps1: e1?, eps2: e2?, criterion: crit })
        }
        (false, None) => {
            c.fail(path, "codebook sizes required: log_m1 and log_m2, or target");
            None
        }
    }
}

fn parse_region(c: &mut Checker, v: &Value) -> Option<RegionSection> {
    let path = "/region";
    let o = c.object(v, path, &["criterion", "eps1", "eps2", "eps", "points"])?;
    let criterion = if o.contains_key("criterion") {
        c.choice(
            o,
            path,
            "criterion",
            &[
                ("first", RegionCriterion::First),
                ("sep", RegionCriterion::Sep),
                ("jep", RegionCriterion::Jep),
                ("outage", RegionCriterion::Outage),
            ],
        )
    } else {
        c.fail("/region/criterion", "required");
        None
    };
    let eps1 = c.probability(o, path, "eps1", false);
    let eps2 = c.probability(o, path, "eps2", false);
    let eps = c.probability(o, path, "eps", false);
    let points = c.integer(o, path, "points", false, 2).unwrap_or(crate::analysis::DEFAULT_GRID_POINTS as u64);
    let criterion = criterion?;
    let need = |c: &mut Checker, key: &str, val: Option<f64>| {
        if val.is_none() && o.get(key).is_none() {
            c.fail(&format!("{path}/{key}"), format!("required for criterion {criterion:?}").to_lowercase());
        }
    };
    match criterion {
        RegionCriterion::Sep | RegionCriterion::Outage => {
            need(c, "eps1", eps1);
            need(c, "eps2", eps2);
        }
        RegionCriterion::Jep => need(c, "eps", eps),
        RegionCriterion::First => {}
    }
    Some(RegionSection { criterion, eps1, eps2, eps, points: points as usize })
}

fn parse_simulate(c: &mut Checker, v: &Value) -> Option<SimulateSection> {
    let path = "/simulate";
    let o = c.object(
        v,
        path,
        &["n", "log_m1", "log_m2", "target", "decoder", "trials", "batch", "engine", "noise_scale", "with_fading"],
    )?;
    let n = c.integer(o, path, "n", true, 2);
    let rates = parse_rates(c, o, path);
    let decoder = if o.contains_key("decoder") { c.choice(o, path, "decoder", &DECODERS) } else { Some(Decoder::Sic) };
    let trials = c.integer(o, path, "trials", true, 1);
    let batch = c.integer(o, path, "batch", false, 1).unwrap_or(DEFAULT_BATCH as u64);
    let engine = if o.contains_key("engine") { c.choice(o, path, "engine", &ENGINES) } else { Some(Engine::Auto) };
    let noise_scale = c.checked(o, path, "noise_scale", false, |x| x >= 0.0, "must be >= 0").unwrap_or(1.0);
    let with_fading = match o.get("with_fading") {
        None => false,
        Some(Value::Bool(b)) => *b,
        Some(other) => {
            c.fail("/simulate/with_fading", format!("expected a boolean, got {other}"));
            false
        }
    };
    Some(SimulateSection {
        n: n? as usize,
        rates: rates?,
        decoder: decoder?,
        trials: trials?,
        batch: batch as usize,
        engine: engine?,
        noise_scale,
        with_fading,
    })
}

fn parse_rcu(c: &mut Checker, v: &Value) -> Option<RcuSection> {
    let path = "/rcu";
    let o = c.object(v, path, &["n", "log_m1", "log_m2", "target", "bound_kind", "samples"])?;
    let n = c.integer(o, path, "n", true, 2);
    let rates = parse_rates(c, o, path);
    let kind = if o.contains_key("bound_kind") {
        c.choice(o, path, "bound_kind", &BOUND_KINDS)
    } else {
        c.fail("/rcu/bound_kind", "required");
        None
    };
    let samples = c.integer(o, path, "samples", true, 2);
    Some(RcuSection { n: n? as usize, rates: rates?, bound_kind: kind?, samples: samples? as usize })
}

fn parse_fading(c: &mut Checker, v: &Value) -> Option<FadingSection> {
    let path = "/fading";
    let o = c.object(v, path, &["h1", "h2", "eps1", "eps2", "blocklengths", "samples", "strong_dispersion_gain"])?;
    let h1 = parse_fading_spec(c, o.get("h1"), "/fading/h1");
    let h2 = parse_fading_spec(c, o.get("h2"), "/fading/h2");
    let eps1 = c.probability(o, path, "eps1", false);
    let eps2 = c.probability(o, path, "eps2", false);
    let blocklengths = match o.get("blocklengths") {
        None => Some(vec![100, 400, 1600]),
        Some(Value::Array(a)) if !a.is_empty() => {
            let ns: Vec<Option<usize>> = a.iter().map(|x| x.as_u64().filter(|&n| n >= 1).map(|n| n as usize)).collect();
            if ns.iter().all(Option::is_some) {
                Some(ns.into_iter().flatten().collect())
            } else {
                c.fail("/fading/blocklengths", "expected positive integers");
                None
            }
        }
        Some(other) => {
            c.fail("/fading/blocklengths", format!("expected a nonempty array, got {other}"));
            None
        }
    };
    let samples = c.integer(o, path, "samples", false, 2).unwrap_or(200_000);
    let gain = if o.contains_key("strong_dispersion_gain") {
        c.choice(
            o,
            path,
            "strong_dispersion_gain",
            &[("as_printed", StrongDispersionGain::AsPrinted), ("own", StrongDispersionGain::Own)],
        )
    } else {
        Some(StrongDispersionGain::AsPrinted)
    };
    Some(FadingSection {
        h1: h1?,
        h2: h2?,
        eps1,
        eps2,
        blocklengths: blocklengths?,
        samples: samples as usize,
        strong_dispersion_gain: gain?,
    })
}

/// Validates a configuration document, reporting every violation.
pub fn parse_config_value(doc: &Value) -> CliResult<ExperimentConfig> {
    let mut c = Checker::default();
    let Some(root) =
        c.object(doc, "", &["channel", "seed", "workers", "output_dir", "region", "simulate", "rcu", "fading"])
    else {
        return Err(CliError::Config(c.errors));
    };
    let channel = parse_channel(&mut c, root.get("channel"));
    let seed = c.integer(root, "", "seed", false, 0);
    let workers = c.integer(root, "", "workers", false, 1).map(|w| w as usize);
    let output_dir = match root.get("output_dir") {
        None => None,
        Some(Value::String(s)) => Some(PathBuf::from(s)),
        Some(other) => {
            c.fail("/output_dir", format!("expected a string, got {other}"));
            None
        }
    };
    let region = root.get("region").and_then(|v| parse_region(&mut c, v));
    let simulate = root.get("simulate").and_then(|v| parse_simulate(&mut c, v));
    let rcu = root.get("rcu").and_then(|v| parse_rcu(&mut c, v));
    let fading = root.get("fading").and_then(|v| parse_fading(&mut c, v));
    if !c.errors.is_empty() {
        return Err(CliError::Config(c.errors));
    }
    Ok(ExperimentConfig {
        channel: channel.expect("no errors recorded"),
        seed,
        workers,
        output_dir,
        region,
        simulate,
        rcu,
        fading,
    })
}

/// Reads and validates a configuration file.
pub fn parse_config(path: &Path) -> CliResult<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(vec![format!("cannot read {}: {e}", path.display())]))?;
    let doc: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(vec![format!("{}: invalid JSON: {e}", path.display())]))?;
    parse_config_value(&doc)
}

/// Writes `bytes` to `dir/name` through a temporary file and a rename.
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> CliResult<PathBuf> {
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", dir.join(name).display()));
    std::fs::create_dir_all(dir).map_err(io)?;
    let target = dir.join(name);
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    std::fs::write(&tmp, bytes).map_err(io)?;
    std::fs::rename(&tmp, &target).map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        io(e)
    })?;
    Ok(target)
}

/// Pretty JSON with a `report_fingerprint` over everything else.
fn sealed_json(mut value: Value) -> CliResult<Vec<u8>> {
    let fp = fingerprint(&value)?;
    if let Value::Object(m) = &mut value {
        m.insert("report_fingerprint".into(), Value::String(fp));
    }
    let mut out = serde_json::to_vec_pretty(&value).map_err(Error::from)?;
    out.push(b'\n');
    Ok(out)
}

struct Context {
    cfg: ExperimentConfig,
    out: PathBuf,
    seed: Option<u64>,
}

impl Context {
    fn seed(&self) -> CliResult<u64> {
        self.seed.ok_or_else(|| {
            CliError::Config(vec!["/seed: randomized commands need an explicit seed (config or --seed)".into()])
        })
    }

    fn section_fingerprint<T: Serialize>(&self, name: &str, section: &T) -> CliResult<String> {
        Ok(fingerprint(&json!({ "channel": self.cfg.channel, name: section, "seed": self.seed }))?)
    }
}

fn missing(section: &str) -> CliError {
    CliError::Config(vec![format!("/{section}: required by this command")])
}

fn cmd_region(ctx: &Context) -> CliResult<String> {
    let sec = ctx.cfg.region.as_ref().ok_or_else(|| missing("region"))?;
    let cfg = &ctx.cfg.channel;
    let (boundary, summary) = match sec.criterion {
        RegionCriterion::First => {
            let b = first_order_region(cfg, &default_alpha_grid(sec.points))?;
            let op = OperatingPoint::of(cfg);
            let s = format!(
                "first-order frontier: {} points; endpoints (0, {}) and ({}, 0); corner at alpha = {}: ({}, {})",
                b.points.len(),
                fmt_f64(b.points[0].y),
                fmt_f64(b.points[b.points.len() - 1].x),
                cfg.alpha,
                fmt_f64(op.c1),
                fmt_f64(op.c2)
            );
            (b, s)
        }
        RegionCriterion::Sep => {
            let (e1, e2) = (sec.eps1.unwrap(), sec.eps2.unwrap());
            if e1 + e2 >= 1.0 {
                return Err(CliError::Config(vec![format!("/region: eps1 + eps2 must be < 1, got {}", e1 + e2)]));
            }
            let corner = sep_second_order_point(cfg, e1, e2)?;
            let mut b = sep_split_boundary(cfg, e1 + e2, sec.points)?;
            b.points.push(BoundaryPoint { x: corner.l1, y: corner.l2, eps1: Some(e1), eps2: Some(e2) });
            b.points.sort_by(|a, b| a.x.total_cmp(&b.x));
            let s = format!(
                "separate-error corner (eps1 = {e1}, eps2 = {e2}): L1 = {}, L2 = {}; splits of eps1 + eps2 = {}: {} points",
                fmt_f64(corner.l1),
                fmt_f64(corner.l2),
                e1 + e2,
                b.points.len()
            );
            (b, s)
        }
        RegionCriterion::Jep => {
            let eps = sec.eps.unwrap();
            let grid = jep_default_l1_grid(cfg, eps, sec.points)?;
            let b = jep_second_order_boundary(cfg, eps, &grid)?;
            let op = OperatingPoint::of(cfg);
            let q = crate::numerics::qfunc_inv(eps)?;
            let s = format!(
                "joint-error boundary (eps = {eps}): asymptotes L1 -> {}, L2 -> {}; {} points",
                fmt_f64(op.v1.sqrt() * q),
                fmt_f64(op.v2.sqrt() * q),
                b.points.len()
            );
            (b, s)
        }
        RegionCriterion::Outage => {
            let f = ctx.cfg.fading.as_ref().ok_or_else(|| missing("fading"))?;
            let b = outage_region(cfg, &f.h1, &f.h2, sec.eps1.unwrap(), sec.eps2.unwrap())?;
            let s = format!("outage corner: R1 = {}, R2 = {}", fmt_f64(b.points[0].x), fmt_f64(b.points[0].y));
            (b, s)
        }
    };
    check_finite_boundary(&boundary)?;
    let fp = ctx.section_fingerprint("region", sec)?;
    write_region(ctx, &format!("region_{}", boundary.criterion.as_str()), &boundary, &fp, &summary)?;
    Ok(summary)
}

fn check_finite_boundary(b: &RegionBoundary) -> CliResult<()> {
    if b.points.iter().any(|p| p.x.is_nan() || p.y.is_nan()) {
        return Err(CliError::Numeric("boundary contains NaN".into()));
    }
    Ok(())
}

fn write_region(ctx: &Context, stem: &str, b: &RegionBoundary, fp: &str, summary: &str) -> CliResult<()> {
    let json = sealed_json(json!({
        "schema": 1,
        "config_fingerprint": fp,
        "csv": format!("{stem}.csv"),
        "summary": summary,
        "boundary": b,
    }))?;
    // Render both before writing either, so a failure leaves nothing behind.
    let csv = b.to_csv();
    write_atomic(&ctx.out, &format!("{stem}.csv"), csv.as_bytes())?;
    write_atomic(&ctx.out, &format!("{stem}.json"), &json)?;
    Ok(())
}

/// The serialized (config) spelling of a unit enum variant.
fn label<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(Value::String(s)) => s,
        _ => "?".into(),
    }
}

fn cmd_simulate(ctx: &Context) -> CliResult<String> {
    let sec = ctx.cfg.simulate.as_ref().ok_or_else(|| missing("simulate"))?;
    let cfg = &ctx.cfg.channel;
    let (l1, l2) = sec.rates.resolve(cfg, sec.n)?;
    let fading = if sec.with_fading {
        let f = ctx.cfg.fading.as_ref().ok_or_else(|| missing("fading"))?;
        Some((f.h1, f.h2))
    } else {
        None
    };
    let req = SimulationRequest {
        n: sec.n,
        log_m1: l1,
        log_m2: l2,
        decoder: sec.decoder,
        trials: sec.trials,
        seed: ctx.seed()?,
        batch: sec.batch,
        engine: sec.engine,
        fading,
        noise_scale: sec.noise_scale,
    };
    let report = run_simulation(cfg, &req)?;
    let json = sealed_json(serde_json::to_value(&report).map_err(Error::from)?)?;
    write_atomic(&ctx.out, "simulate.json", &json)?;
    let line = |name: &str, r: &crate::montecarlo::RateEstimate| {
        format!("{name} = {:.6} (95% CI [{:.6}, {:.6}], {} errors)", r.estimate, r.ci95.0, r.ci95.1, r.count)
    };
    Ok(format!(
        "{} trials, n = {}, ln M1 = {:.4}, ln M2 = {:.4}, decoder {}, engine {}\n{}\n{}\n{}",
        report.trials,
        report.n,
        l1,
        l2,
        label(&report.decoder),
        label(&report.engine),
        line("P_e1", &report.err1),
        line("P_e2", &report.err2),
        line("P_eJ", &report.err_joint)
    ))
}

fn cmd_rcu(ctx: &Context) -> CliResult<String> {
    let sec = ctx.cfg.rcu.as_ref().ok_or_else(|| missing("rcu"))?;
    let cfg = &ctx.cfg.channel;
    let (l1, l2) = sec.rates.resolve(cfg, sec.n)?;
    let est = rcu_bound(cfg, sec.n, l1, l2, sec.bound_kind, sec.samples, ctx.seed()?)?;
    let fp = ctx.section_fingerprint("rcu", sec)?;
    let mut v = serde_json::to_value(est).map_err(Error::from)?;
    v["config_fingerprint"] = Value::String(fp);
    write_atomic(&ctx.out, "rcu.json", &sealed_json(v)?)?;
    Ok(format!(
        "{} bound at n = {}, ln M1 = {:.4}, ln M2 = {:.4}: {:.6} +/- {:.6} ({} samples)",
        label(&est.bound_kind),
        est.n,
        l1,
        l2,
        est.value,
        est.std_error,
        est.samples
    ))
}

fn cmd_fading(ctx: &Context) -> CliResult<String> {
    let sec = ctx.cfg.fading.as_ref().ok_or_else(|| missing("fading"))?;
    let mut errs = Vec::new();
    if sec.eps1.is_none() {
        errs.push("/fading/eps1: required by the fading command".to_string());
    }
    if sec.eps2.is_none() {
        errs.push("/fading/eps2: required by the fading command".to_string());
    }
    if !errs.is_empty() {
        return Err(CliError::Config(errs));
    }
    let (eps1, eps2) = (sec.eps1.unwrap(), sec.eps2.unwrap());
    let cfg = &ctx.cfg.channel;
    let seed = ctx.seed()?;
    let region = outage_region(cfg, &sec.h1, &sec.h2, eps1, eps2)?;
    let corner = region.points[0];
    let mut users = Vec::new();
    for (user, spec, rate) in [(User::Strong, &sec.h1, corner.x), (User::Weak, &sec.h2, corner.y)] {
        let method = match spec {
            FadingSpec::Rice { .. } => OutageMethod::Quadrature,
            _ => OutageMethod::ClosedForm,
        };
        let outage = outage_prob(cfg, spec, user, rate, method)?;
        let bounds = sec
            .blocklengths
            .iter()
            .map(|&n| {
                theorem3_bound(
                    cfg,
                    &sec.h1,
                    &sec.h2,
                    user,
                    n,
                    n as f64 * rate,
                    sec.samples,
                    seed,
                    sec.strong_dispersion_gain,
                )
            })
            .collect::<crate::Result<Vec<_>>>()?;
        users.push(json!({ "outage": outage, "finite_blocklength": bounds }));
    }
    let fp = ctx.section_fingerprint("fading", sec)?;
    let json = sealed_json(json!({
        "schema": 1,
        "config_fingerprint": fp,
        "csv": "fading_outage.csv",
        "strong_dispersion_gain": sec.strong_dispersion_gain,
        "corner": { "r1": corner.x, "r2": corner.y },
        "users": users,
    }))?;
    write_atomic(&ctx.out, "fading_outage.csv", region.to_csv().as_bytes())?;
    write_atomic(&ctx.out, "fading.json", &json)?;
    Ok(format!("outage corner (eps1 = {eps1}, eps2 = {eps2}): R1 = {}, R2 = {}", fmt_f64(corner.x), fmt_f64(corner.y)))
}

/// Runs one parsed invocation, returning the summary printed on success.
pub fn execute(cli: &Cli) -> CliResult<String> {
    let (args, which) = match &cli.command {
        Command::Region(a) => (a, 0),
        Command::Simulate(a) => (a, 1),
        Command::Rcu(a) => (a, 2),
        Command::Fading(a) => (a, 3),
    };
    let cfg = parse_config(&args.config)?;
    let out = args.out.clone().or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("."));
    let workers = match args.workers.or(cfg.workers) {
        Some(0) => return Err(CliError::Config(vec!["--workers must be >= 1".into()])),
        Some(k) => k,
        None => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
    };
    let seed = args.seed.or(cfg.seed);
    let ctx = Context { cfg, out, seed };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Io(format!("cannot start worker pool: {e}")))?;
    pool.install(|| match which {
        0 => cmd_region(&ctx),
        1 => cmd_simulate(&ctx),
        2 => cmd_rcu(&ctx),
        _ => cmd_fading(&ctx),
    })
}

/// Parses arguments, runs, prints, and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("bcdisp: {e}");
            if let CliError::Size(_) = e {
                eprintln!("hint: the rcu command evaluates bounds without materializing codebooks");
            }
            e.exit_code()
        }
    }
}
