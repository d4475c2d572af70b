//! Spherical codebooks, superposition encoding, mismatched information
//! densities and the nearest-neighbor family of decoders.

use crate::rng::RandomStream;
use crate::{Error, Result};
use rand_distr::{Distribution, StandardNormal};

/// `M` codewords of length `n`, each on the sphere of radius `sqrt(n * power)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    words: Vec<f64>,
    m: usize,
    n: usize,
    per_word_power: f64,
}

impl Codebook {
    /// Wraps explicit rows; every row must have squared norm `n * power`
    /// within `1e-9` relative.
    pub fn from_rows(rows: Vec<Vec<f64>>, per_word_power: f64) -> Result<Self> {
        let m = rows.len();
        if m == 0 {
            return Err(Error::domain("codebook needs at least one word"));
        }
        let n = rows[0].len();
        let target = n as f64 * per_word_power;
        let mut words = Vec::with_capacity(m * n);
        for (i, r) in rows.into_iter().enumerate() {
            if r.len() != n {
                return Err(Error::LengthMismatch { expected: n, actual: r.len() });
            }
            let norm2 = dot(&r, &r);
            if (norm2 - target).abs() > 1e-9 * target {
                return Err(Error::domain(format!("row {i} has squared norm {norm2}, expected {target}")));
            }
            words.extend(r);
        }
        Ok(Self { words, m, n, per_word_power })
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    pub fn blocklength(&self) -> usize {
        self.n
    }

    pub fn per_word_power(&self) -> f64 {
        self.per_word_power
    }

    pub fn word(&self, i: usize) -> Result<&[f64]> {
        if i >= self.m {
            return Err(Error::IndexOutOfRange { index: i, size: self.m });
        }
        Ok(self.row(i))
    }

    pub(crate) fn row(&self, i: usize) -> &[f64] {
        &self.words[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.words.chunks_exact(self.n)
    }
}

/// Signal power `S` and effective noise `D` of a mismatched Gaussian density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityParams {
    pub signal_power: f64,
    pub effective_noise: f64,
}

impl DensityParams {
    pub fn new(signal_power: f64, effective_noise: f64) -> Result<Self> {
        if !(signal_power >= 0.0 && effective_noise > 0.0) {
            return Err(Error::domain(format!(
                "density needs S >= 0 and D > 0 (S={signal_power}, D={effective_noise})"
            )));
        }
        Ok(Self { signal_power, effective_noise })
    }

    /// `C(S / D)` in nats.
    pub fn capacity(&self) -> f64 {
        0.5 * (self.signal_power / self.effective_noise).ln_1p()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Overwrites `out` with a uniform point on the sphere of the given radius.
pub fn sample_sphere(out: &mut [f64], radius: f64, rng: &mut RandomStream) {
    loop {
        for x in out.iter_mut() {
            *x = StandardNormal.sample(rng);
        }
        let norm = dot(out, out).sqrt();
        if norm > 0.0 {
            let s = radius / norm;
            out.iter_mut().for_each(|x| *x *= s);
            return;
        }
    }
}

/// `m` i.i.d. codewords uniform on the sphere of radius `sqrt(n * power)`.
pub fn gen_spherical_codebook(m: usize, n: usize, power: f64, rng: &mut RandomStream) -> Result<Codebook> {
    if n < 2 {
        return Err(Error::domain(format!("codeword length must be >= 2, got {n}")));
    }
    if m < 1 {
        return Err(Error::domain("codebook needs at least one word"));
    }
    if !(power > 0.0 && power.is_finite()) {
        return Err(Error::domain(format!("codeword power must be positive, got {power}")));
    }
    let radius = (n as f64 * power).sqrt();
    let mut words = vec![0.0; m * n];
    for row in words.chunks_exact_mut(n) {
        sample_sphere(row, radius, rng);
    }
    Ok(Codebook { words, m, n, per_word_power: power })
}

/// Superposition codeword `V(w1) + U(w2)`.
pub fn encode(w1: usize, w2: usize, cb_v: &Codebook, cb_u: &Codebook) -> Result<Vec<f64>> {
    if cb_v.n != cb_u.n {
        return Err(Error::LengthMismatch { expected: cb_v.n, actual: cb_u.n });
    }
    let v = cb_v.word(w1)?;
    let u = cb_u.word(w2)?;
    Ok(v.iter().zip(u).map(|(a, b)| a + b).collect())
}

/// `n C(S/D) + |y|^2 / (2(S+D)) - |y-u|^2 / (2D)`.
pub fn mismatched_density(u: &[f64], y: &[f64], params: DensityParams) -> Result<f64> {
    if u.len() != y.len() {
        return Err(Error::LengthMismatch { expected: y.len(), actual: u.len() });
    }
    let (s, d) = (params.signal_power, params.effective_noise);
    let n = y.len() as f64;
    Ok(n * params.capacity() + dot(y, y) / (2.0 * (s + d)) - dist2(y, u) / (2.0 * d))
}

fn check_gain(gain: f64) -> Result<()> {
    if !(gain > 0.0 && gain.is_finite()) {
        return Err(Error::domain(format!("gain must be positive, got {gain}")));
    }
    Ok(())
}

fn check_len(y: &[f64], cb: &Codebook) -> Result<()> {
    if cb.is_empty() {
        return Err(Error::domain("empty codebook"));
    }
    if y.len() != cb.n {
        return Err(Error::LengthMismatch { expected: cb.n, actual: y.len() });
    }
    Ok(())
}

/// `argmin_w |y - gain * cb(w)|^2`, lowest index on ties.
fn nearest(y: &[f64], cb: &Codebook, gain: f64) -> usize {
    let mut best = (0, f64::INFINITY);
    for (i, row) in cb.rows().enumerate() {
        let d: f64 = y.iter().zip(row).map(|(a, b)| (a - gain * b).powi(2)).sum();
        if d < best.1 {
            best = (i, d);
        }
    }
    best.0
}

/// Weak user's decoder: nearest neighbor over the cloud-center codebook,
/// treating the strong user's signal as noise.
pub fn nn_decode_user2(y2: &[f64], cb_u: &Codebook, gain: f64) -> Result<usize> {
    check_gain(gain)?;
    check_len(y2, cb_u)?;
    Ok(nearest(y2, cb_u, gain))
}

/// Strong user's successive decoder. Returns `(w1, w2)`.
pub fn sic_decode_user1(y1: &[f64], cb_u: &Codebook, cb_v: &Codebook, gain: f64) -> Result<(usize, usize)> {
    check_gain(gain)?;
    check_len(y1, cb_u)?;
    check_len(y1, cb_v)?;
    let w2 = nearest(y1, cb_u, gain);
    let u = cb_u.row(w2);
    let residual: Vec<f64> = y1.iter().zip(u).map(|(y, u)| y - gain * u).collect();
    Ok((nearest(&residual, cb_v, gain), w2))
}

/// Strong user's joint decoder: literal scan of all `M1 * M2` pairs,
/// lexicographically smallest `(w1, w2)` on ties.
pub fn jnn_decode_user1(y1: &[f64], cb_u: &Codebook, cb_v: &Codebook, gain: f64) -> Result<(usize, usize)> {
    check_gain(gain)?;
    check_len(y1, cb_u)?;
    check_len(y1, cb_v)?;
    let mut best = ((0, 0), f64::INFINITY);
    for (i, v) in cb_v.rows().enumerate() {
        for (j, u) in cb_u.rows().enumerate() {
            let d: f64 = y1.iter().zip(v.iter().zip(u)).map(|(y, (v, u))| (y - gain * (u + v)).powi(2)).sum();
            if d < best.1 {
                best = ((i, j), d);
            }
        }
    }
    Ok(best.0)
}

/// Joint decoder with the cross inner products `<U(j), V(i)>` precomputed,
/// so each decode costs `O((M1 + M2) n + M1 M2)` instead of `O(M1 M2 n)`.
#[derive(Debug, Clone)]
pub struct JointDecoder<'a> {
    cb_u: &'a Codebook,
    cb_v: &'a Codebook,
    /// Row-major `M1 x M2`.
    cross: Vec<f64>,
}

impl<'a> JointDecoder<'a> {
    pub fn new(cb_u: &'a Codebook, cb_v: &'a Codebook) -> Result<Self> {
        if cb_u.n != cb_v.n {
            return Err(Error::LengthMismatch { expected: cb_u.n, actual: cb_v.n });
        }
        let mut cross = Vec::with_capacity(cb_v.m * cb_u.m);
        for v in cb_v.rows() {
            cross.extend(cb_u.rows().map(|u| dot(u, v)));
        }
        Ok(Self { cb_u, cb_v, cross })
    }

    /// Same output as [`jnn_decode_user1`] up to floating-point ties.
    pub fn decode(&self, y1: &[f64], gain: f64) -> Result<(usize, usize)> {
        check_gain(gain)?;
        check_len(y1, self.cb_u)?;
        // |y - g(u+v)|^2 = const - 2g<y,u> - 2g<y,v> + 2g^2<u,v>
        let yu: Vec<f64> = self.cb_u.rows().map(|u| dot(y1, u)).collect();
        let m2 = self.cb_u.m;
        let mut best = ((0, 0), f64::INFINITY);
        for (i, v) in self.cb_v.rows().enumerate() {
            let yv = dot(y1, v);
            let cross = &self.cross[i * m2..(i + 1) * m2];
            for j in 0..m2 {
                let metric = gain * cross[j] - yu[j] - yv;
                if metric < best.1 {
                    best = ((i, j), metric);
                }
            }
        }
        Ok(best.0)
    }
}
