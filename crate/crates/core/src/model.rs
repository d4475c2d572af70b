//! Problem instance: total power, power split, noise laws and fading laws.

use crate::rng::RandomStream;
use crate::{Error, Result};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::ops::Deref;

const VARIANCE_TOL: f64 = 1e-12;
const MOMENT_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseFamily {
    Gaussian,
    Laplace,
    Uniform,
    /// Equiprobable atoms at `±c` with weight `w`, uniform on `[-a, a]`
    /// otherwise. Matches any `(variance, fourth moment)` pair with
    /// `moment4 >= variance^2`.
    ScaledRademacherMixture,
}

/// An additive noise law together with its second, fourth and sixth moments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub family: NoiseFamily,
    pub variance: f64,
    pub moment4: f64,
    pub moment6: f64,
}

/// Mixture weights solved from `(variance, moment4)`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct MixtureShape {
    atom_weight: f64,
    atom: f64,
    half_width: f64,
}

impl MixtureShape {
    fn solve(variance: f64, moment4: f64) -> Result<Self> {
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(Error::domain(format!("noise variance must be positive, got {variance}")));
        }
        let kurtosis = moment4 / (variance * variance);
        if !(kurtosis.is_finite() && kurtosis >= 1.0 - 1e-12) {
            return Err(Error::domain(format!(
                "mixture needs moment4 >= variance^2 (moment4={moment4}, variance={variance})"
            )));
        }
        let kurtosis = kurtosis.max(1.0);
        let sigma = variance.sqrt();
        Ok(if kurtosis <= 1.8 {
            // Atoms at ±sigma blended with a unit-variance-matched uniform.
            MixtureShape { atom_weight: (1.8 - kurtosis) / 0.8, atom: sigma, half_width: 3f64.sqrt() * sigma }
        } else {
            // Point mass at zero blended with a wider uniform.
            let atom_weight = 1.0 - 9.0 / (5.0 * kurtosis);
            MixtureShape { atom_weight, atom: 0.0, half_width: (5.0 * kurtosis * variance / 3.0).sqrt() }
        })
    }

    fn moment(&self, k: i32) -> f64 {
        let w = self.atom_weight;
        w * self.atom.powi(k) + (1.0 - w) * self.half_width.powi(k) / (k as f64 + 1.0)
    }
}

impl NoiseSpec {
    pub fn gaussian(variance: f64) -> Result<Self> {
        Self::with_family(NoiseFamily::Gaussian, variance, None)
    }

    pub fn laplace(variance: f64) -> Result<Self> {
        Self::with_family(NoiseFamily::Laplace, variance, None)
    }

    pub fn uniform(variance: f64) -> Result<Self> {
        Self::with_family(NoiseFamily::Uniform, variance, None)
    }

    pub fn mixture(variance: f64, moment4: f64) -> Result<Self> {
        Self::with_family(NoiseFamily::ScaledRademacherMixture, variance, Some(moment4))
    }

    /// Builds a spec with analytic moments. `moment4` is required for the
    /// mixture family and, for the others, must agree with the family.
    pub fn with_family(family: NoiseFamily, variance: f64, moment4: Option<f64>) -> Result<Self> {
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(Error::domain(format!("noise variance must be positive, got {variance}")));
        }
        let target4 = match (family, moment4) {
            (NoiseFamily::ScaledRademacherMixture, Some(m4)) => m4,
            (NoiseFamily::ScaledRademacherMixture, None) => {
                return Err(Error::domain("mixture family needs moment4"));
            }
            (_, _) => f64::NAN,
        };
        let mut spec = NoiseSpec { family, variance, moment4: target4, moment6: f64::NAN };
        let (_, m4, m6) = noise_moments(&spec)?;
        if let Some(given) = moment4 {
            if (given - m4).abs() > MOMENT_REL_TOL * m4 {
                return Err(Error::domain(format!("moment4 {given} does not match the {family:?} value {m4}")));
            }
        }
        spec.moment4 = m4;
        spec.moment6 = m6;
        Ok(spec)
    }

    /// Fourth moment normalized by `variance^2`.
    pub fn kurtosis(&self) -> f64 {
        self.moment4 / (self.variance * self.variance)
    }

    /// Fills `out` with i.i.d. draws.
    pub fn fill(&self, out: &mut [f64], rng: &mut RandomStream) {
        let sigma = self.variance.sqrt();
        match self.family {
            NoiseFamily::Gaussian => {
                for x in out.iter_mut() {
                    let z: f64 = rng.sample(StandardNormal);
                    *x = sigma * z;
                }
            }
            NoiseFamily::Laplace => {
                let b = sigma / std::f64::consts::SQRT_2;
                for x in out.iter_mut() {
                    let u: f64 = rng.random::<f64>() - 0.5;
                    // 1 - 2|u| lies in (0, 1]
                    *x = -b * u.signum() * (1.0 - 2.0 * u.abs()).ln();
                }
            }
            NoiseFamily::Uniform => {
                let a = 3f64.sqrt() * sigma;
                for x in out.iter_mut() {
                    *x = rng.random_range(-a..a);
                }
            }
            NoiseFamily::ScaledRademacherMixture => {
                let shape = MixtureShape::solve(self.variance, self.moment4).expect("validated mixture spec");
                for x in out.iter_mut() {
                    *x = if rng.random::<f64>() < shape.atom_weight {
                        if rng.random::<bool>() {
                            shape.atom
                        } else {
                            -shape.atom
                        }
                    } else {
                        rng.random_range(-shape.half_width..shape.half_width)
                    };
                }
            }
        }
    }
}

/// Analytic `(E[Z^2], E[Z^4], E[Z^6])` for the family at `spec.variance`.
pub fn noise_moments(spec: &NoiseSpec) -> Result<(f64, f64, f64)> {
    let v = spec.variance;
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::domain(format!("noise variance must be positive, got {v}")));
    }
    Ok(match spec.family {
        NoiseFamily::Gaussian => (v, 3.0 * v * v, 15.0 * v * v * v),
        NoiseFamily::Laplace => (v, 6.0 * v * v, 90.0 * v * v * v),
        NoiseFamily::Uniform => (v, 1.8 * v * v, 27.0 / 7.0 * v * v * v),
        NoiseFamily::ScaledRademacherMixture => {
            let shape = MixtureShape::solve(v, spec.moment4)?;
            (shape.moment(2), shape.moment(4), shape.moment(6))
        }
    })
}

/// `n` i.i.d. draws from the noise law.
pub fn sample_noise(spec: &NoiseSpec, n: usize, rng: &mut RandomStream) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::domain("noise sample length must be >= 1"));
    }
    let mut out = vec![0.0; n];
    spec.fill(&mut out, rng);
    Ok(out)
}

/// Law of a quasi-static fading amplitude `H >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum FadingSpec {
    /// `H^2` exponential with mean `mean_square`.
    Rayleigh { mean_square: f64 },
    /// Line-of-sight to scatter power ratio `k_factor`, `E[H^2] = mean_square`.
    Rice { k_factor: f64, mean_square: f64 },
    /// Constant gain.
    Deterministic { gain: f64 },
}

impl FadingSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            FadingSpec::Rayleigh { mean_square } => mean_square > 0.0 && mean_square.is_finite(),
            FadingSpec::Rice { k_factor, mean_square } => {
                k_factor >= 0.0 && k_factor.is_finite() && mean_square > 0.0 && mean_square.is_finite()
            }
            FadingSpec::Deterministic { gain } => gain > 0.0 && gain.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::domain(format!("invalid fading parameters: {self:?}")))
        }
    }
}

/// Channel instance: `Y1 = X + Z1`, `Y2 = X + Z2` with `E[Z1^2] = beta < 1 = E[Z2^2]`
/// and superposition power split `alpha` (strong user) / `1 - alpha` (weak user).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    pub total_power: f64,
    pub alpha: f64,
    pub beta: f64,
    pub noise1: NoiseSpec,
    pub noise2: NoiseSpec,
}

impl ChannelConfig {
    /// Gaussian noise on both links.
    pub fn gaussian(total_power: f64, alpha: f64, beta: f64) -> Result<Self> {
        Ok(Self { total_power, alpha, beta, noise1: NoiseSpec::gaussian(beta)?, noise2: NoiseSpec::gaussian(1.0)? })
    }

    /// Mixture noise with prescribed fourth moments on both links.
    pub fn with_fourth_moments(total_power: f64, alpha: f64, beta: f64, zeta1: f64, zeta2: f64) -> Result<Self> {
        Ok(Self {
            total_power,
            alpha,
            beta,
            noise1: NoiseSpec::mixture(beta, zeta1)?,
            noise2: NoiseSpec::mixture(1.0, zeta2)?,
        })
    }

    pub fn validate(self) -> Result<ValidatedConfig> {
        validate_config(self)
    }
}

/// A [`ChannelConfig`] whose invariants have been checked.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ValidatedConfig(ChannelConfig);

impl Deref for ValidatedConfig {
    type Target = ChannelConfig;
    fn deref(&self) -> &ChannelConfig {
        &self.0
    }
}

impl ValidatedConfig {
    pub fn into_inner(self) -> ChannelConfig {
        self.0
    }
    pub fn alpha_bar(&self) -> f64 {
        1.0 - self.alpha
    }
    /// Per-symbol power of the strong user's layer, `alpha P`.
    pub fn strong_power(&self) -> f64 {
        self.alpha * self.total_power
    }
    /// Per-symbol power of the weak user's layer, `(1 - alpha) P`.
    pub fn weak_power(&self) -> f64 {
        self.alpha_bar() * self.total_power
    }
    pub fn zeta1(&self) -> f64 {
        self.noise1.moment4
    }
    pub fn zeta2(&self) -> f64 {
        self.noise2.moment4
    }
    /// The same instance with a different power split.
    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        validate_config(ChannelConfig { alpha, ..self.0 })
    }
}

/// Checks every instance invariant, reporting all violations at once.
pub fn validate_config(cfg: ChannelConfig) -> Result<ValidatedConfig> {
    let mut problems = Vec::new();
    if !(cfg.total_power > 0.0 && cfg.total_power.is_finite()) {
        problems.push(format!("total_power must be > 0, got {}", cfg.total_power));
    }
    if !(cfg.alpha > 0.0 && cfg.alpha < 1.0) {
        problems.push(format!("alpha must lie in (0,1), got {}", cfg.alpha));
    }
    if !(cfg.beta > 0.0 && cfg.beta < 1.0) {
        problems.push(format!("beta must lie in (0,1), got {}", cfg.beta));
    }
    if (cfg.noise1.variance - cfg.beta).abs() > VARIANCE_TOL {
        problems.push(format!("noise1.variance {} must equal beta {}", cfg.noise1.variance, cfg.beta));
    }
    if (cfg.noise2.variance - 1.0).abs() > VARIANCE_TOL {
        problems.push(format!("noise2.variance {} must equal 1", cfg.noise2.variance));
    }
    for (name, spec) in [("noise1", &cfg.noise1), ("noise2", &cfg.noise2)] {
        check_noise(name, spec, &mut problems);
    }
    if problems.is_empty() {
        Ok(ValidatedConfig(cfg))
    } else {
        Err(Error::InvalidConfig(problems))
    }
}

fn check_noise(name: &str, spec: &NoiseSpec, problems: &mut Vec<String>) {
    let v = spec.variance;
    if !(spec.moment4.is_finite() && spec.moment6.is_finite()) {
        problems.push(format!("{name}: moments must be finite"));
        return;
    }
    if spec.moment4 < v * v * (1.0 - MOMENT_REL_TOL) {
        problems.push(format!("{name}.moment4 {} must be >= variance^2 {}", spec.moment4, v * v));
    }
    match noise_moments(spec) {
        Ok((_, m4, m6)) => {
            if (spec.moment4 - m4).abs() > MOMENT_REL_TOL * m4 {
                problems.push(format!("{name}.moment4 {} != {:?} value {m4}", spec.moment4, spec.family));
            }
            if (spec.moment6 - m6).abs() > MOMENT_REL_TOL * m6 {
                problems.push(format!("{name}.moment6 {} != {:?} value {m6}", spec.moment6, spec.family));
            }
        }
        Err(e) => problems.push(format!("{name}: {e}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Composite Simpson quadrature of `x^k * density` on `[-l, l]`.
    fn integrate_moment(density: impl Fn(f64) -> f64, half_range: f64, k: i32) -> f64 {
        let steps = 200_000;
        let h = 2.0 * half_range / steps as f64;
        let f = |x: f64| x.powi(k) * density(x);
        let mut acc = f(-half_range) + f(half_range);
        for i in 1..steps {
            let x = -half_range + i as f64 * h;
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
        }
        acc * h / 3.0
    }

    #[test]
    fn reference_configuration_accepted() {
        let cfg = ChannelConfig::with_fourth_moments(5.0, 0.3, 0.6, 0.3888, 3.0).unwrap();
        let v = validate_config(cfg).unwrap();
        assert!((v.zeta1() - 0.3888).abs() < 1e-15);
        assert!((v.zeta2() - 3.0).abs() < 1e-15);
        assert!(ChannelConfig::gaussian(5.0, 0.3, 0.6).unwrap().validate().is_ok());
    }

    #[test]
    fn beta_one_rejected() {
        let cfg = ChannelConfig {
            beta: 1.0,
            noise1: NoiseSpec::gaussian(1.0).unwrap(),
            ..ChannelConfig::gaussian(5.0, 0.3, 0.6).unwrap()
        };
        let err = validate_config(cfg).unwrap_err();
        assert!(err.to_string().contains("beta"));
    }

    #[test]
    fn variance_mismatch_rejected() {
        let cfg = ChannelConfig {
            noise1: NoiseSpec::gaussian(0.5).unwrap(),
            ..ChannelConfig::gaussian(5.0, 0.3, 0.6).unwrap()
        };
        assert!(matches!(validate_config(cfg), Err(Error::InvalidConfig(v)) if v.len() == 1));
    }

    #[test]
    fn all_violations_reported() {
        let cfg = ChannelConfig { total_power: -1.0, alpha: 1.5, ..ChannelConfig::gaussian(5.0, 0.3, 0.6).unwrap() };
        match validate_config(cfg) {
            Err(Error::InvalidConfig(v)) => assert_eq!(v.len(), 2, "{v:?}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn tampered_moment_rejected() {
        let mut cfg = ChannelConfig::gaussian(5.0, 0.3, 0.6).unwrap();
        cfg.noise2.moment4 = 2.0;
        assert!(validate_config(cfg).is_err());
    }

    #[test]
    fn moments_match_quadrature() {
        let s2: f64 = 0.6;
        let sigma = s2.sqrt();
        let gauss = |x: f64| (-x * x / (2.0 * s2)).exp() / (2.0 * std::f64::consts::PI * s2).sqrt();
        let b = sigma / std::f64::consts::SQRT_2;
        let laplace = |x: f64| (-x.abs() / b).exp() / (2.0 * b);
        let a = 3f64.sqrt() * sigma;
        let uniform = |x: f64| if x.abs() <= a { 0.5 / a } else { 0.0 };

        let g = noise_moments(&NoiseSpec::gaussian(s2).unwrap()).unwrap();
        let l = noise_moments(&NoiseSpec::laplace(s2).unwrap()).unwrap();
        for (k, (gm, lm)) in [(2, (g.0, l.0)), (4, (g.1, l.1)), (6, (g.2, l.2))] {
            let gq = integrate_moment(gauss, 14.0 * sigma, k);
            let lq = integrate_moment(laplace, 60.0 * b, k);
            assert!((gm - gq).abs() < 1e-9 * gm, "gaussian k={k}: {gm} vs {gq}");
            assert!((lm - lq).abs() < 1e-7 * lm, "laplace k={k}: {lm} vs {lq}");
        }
        let u = noise_moments(&NoiseSpec::uniform(s2).unwrap()).unwrap();
        // Simpson is exact for polynomials on the support.
        let uq = |k| {
            let steps = 2000;
            let h = 2.0 * a / steps as f64;
            let f = |x: f64| x.powi(k) * uniform(0.0);
            let mut acc = f(-a) + f(a);
            for i in 1..steps {
                acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(-a + i as f64 * h);
            }
            acc * h / 3.0
        };
        assert!((u.0 - uq(2)).abs() < 1e-12);
        assert!((u.1 - uq(4)).abs() < 1e-12);
        // degree six exceeds Simpson's exactness
        assert!((u.2 - uq(6)).abs() < 1e-10 * u.2);
        assert!((u.1 - a.powi(4) / 5.0).abs() < 1e-12);
    }

    #[test]
    fn moment_inequalities_on_grid() {
        for k in 1..=20 {
            let v = 0.05 * k as f64;
            let specs = [
                NoiseSpec::gaussian(v).unwrap(),
                NoiseSpec::laplace(v).unwrap(),
                NoiseSpec::uniform(v).unwrap(),
                NoiseSpec::mixture(v, 1.08 * v * v).unwrap(),
                NoiseSpec::mixture(v, 4.0 * v * v).unwrap(),
            ];
            for s in specs {
                let (m2, m4, m6) = noise_moments(&s).unwrap();
                assert!(m4 >= m2 * m2 * (1.0 - 1e-12), "{s:?}");
                assert!(m6 >= m4 * m2 * (1.0 - 1e-12), "{s:?}");
            }
        }
    }

    #[test]
    fn gaussian_specialization_gives_three_beta_squared() {
        let beta = 0.6;
        let (_, z, _) = noise_moments(&NoiseSpec::gaussian(beta).unwrap()).unwrap();
        assert!((z - 3.0 * beta * beta).abs() < 1e-15);
    }

    #[test]
    fn mixture_hits_requested_moments() {
        for kurt in [1.0, 1.08, 1.5, 1.8, 2.5, 9.0] {
            let s = NoiseSpec::mixture(0.6, kurt * 0.36).unwrap();
            let (m2, m4, _) = noise_moments(&s).unwrap();
            assert!((m2 - 0.6).abs() < 1e-14);
            assert!((m4 - kurt * 0.36).abs() < 1e-13);
        }
        assert!(NoiseSpec::mixture(0.6, 0.3).is_err());
    }

    #[test]
    fn sample_variance_converges() {
        let mut rng = RandomStream::new(11);
        let spec = NoiseSpec::gaussian(0.6).unwrap();
        let z = sample_noise(&spec, 1_000_000, &mut rng).unwrap();
        let var = z.iter().map(|x| x * x).sum::<f64>() / z.len() as f64;
        assert!((var - 0.6).abs() < 0.01, "{var}");
    }

    #[test]
    fn sampled_fourth_moment_matches_each_family() {
        let specs = [
            NoiseSpec::laplace(0.6).unwrap(),
            NoiseSpec::uniform(0.6).unwrap(),
            NoiseSpec::mixture(0.6, 0.3888).unwrap(),
            NoiseSpec::mixture(1.0, 5.0).unwrap(),
        ];
        for (i, spec) in specs.iter().enumerate() {
            let mut rng = RandomStream::new(100 + i as u64);
            let z = sample_noise(spec, 400_000, &mut rng).unwrap();
            let n = z.len() as f64;
            let m2 = z.iter().map(|x| x * x).sum::<f64>() / n;
            let m4 = z.iter().map(|x| x.powi(4)).sum::<f64>() / n;
            // Standard error of the fourth-moment estimate.
            let m8 = z.iter().map(|x| x.powi(8)).sum::<f64>() / n;
            let se4 = ((m8 - m4 * m4) / n).sqrt();
            assert!((m2 - spec.variance).abs() < 0.01 * spec.variance + 0.005, "{spec:?}: m2={m2}");
            assert!((m4 - spec.moment4).abs() < 5.0 * se4, "{spec:?}: m4={m4}");
        }
    }

    #[test]
    fn zero_length_sample_rejected() {
        let mut rng = RandomStream::new(1);
        assert!(sample_noise(&NoiseSpec::gaussian(1.0).unwrap(), 0, &mut rng).is_err());
    }

    #[test]
    fn sampling_is_deterministic() {
        let spec = NoiseSpec::laplace(1.0).unwrap();
        let a = sample_noise(&spec, 64, &mut RandomStream::new(5)).unwrap();
        let b = sample_noise(&spec, 64, &mut RandomStream::new(5)).unwrap();
        assert_eq!(a, b);
    }
}
