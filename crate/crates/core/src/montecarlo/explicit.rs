//! Simulation with materialized codebooks.

use super::{codebook_size, Channel, Counts, Decoder, SimulationRequest};
use crate::codec::{gen_spherical_codebook, nn_decode_user2, sic_decode_user1, JointDecoder};
use crate::model::ValidatedConfig;
use crate::rng::{Domain, RandomStream};
use crate::Result;
use rayon::prelude::*;

/// Fresh codebooks every `batch` trials; the transmitted pair is `(0, 0)`,
/// which loses nothing because codewords are exchangeable.
pub(super) fn simulate(cfg: &ValidatedConfig, req: &SimulationRequest) -> Result<Counts> {
    let m1 = codebook_size(req.log_m1)? as usize;
    let m2 = codebook_size(req.log_m2)? as usize;
    let batches = req.trials.div_ceil(req.batch as u64);
    let channel = Channel { cfg, n: req.n, fading: req.fading, noise_scale: req.noise_scale };
    let per_batch: Vec<Counts> =
        (0..batches).into_par_iter().map(|b| run_batch(&channel, req, m1, m2, b)).collect::<Result<_>>()?;
    Ok(per_batch.into_iter().fold(Counts::default(), Counts::merge))
}

fn run_batch(ch: &Channel, req: &SimulationRequest, m1: usize, m2: usize, b: u64) -> Result<Counts> {
    let n = req.n;
    let mut cb_rng = RandomStream::derive(req.seed, Domain::Codebook, b);
    let cb_u = gen_spherical_codebook(m2, n, ch.cfg.weak_power(), &mut cb_rng)?;
    let cb_v = gen_spherical_codebook(m1, n, ch.cfg.strong_power(), &mut cb_rng)?;
    let joint = match req.decoder {
        Decoder::Jnn => Some(JointDecoder::new(&cb_u, &cb_v)?),
        Decoder::Sic => None,
    };
    let x: Vec<f64> = cb_u.row(0).iter().zip(cb_v.row(0)).map(|(u, v)| u + v).collect();
    let first = b * req.batch as u64;
    let last = (first + req.batch as u64).min(req.trials);
    let mut counts = Counts::default();
    let mut y1 = vec![0.0; n];
    let mut y2 = vec![0.0; n];
    for t in first..last {
        let mut rng = RandomStream::derive(req.seed, Domain::Trial, t);
        let ((h1, h2), z1, z2) = ch.draw(&mut rng);
        for i in 0..n {
            y1[i] = h1 * x[i] + z1[i];
            y2[i] = h2 * x[i] + z2[i];
        }
        let w2 = nn_decode_user2(&y2, &cb_u, h2)?;
        let (w1, w2_at_1) = match &joint {
            Some(j) => j.decode(&y1, h1)?,
            None => sic_decode_user1(&y1, &cb_u, &cb_v, h1)?,
        };
        counts.record(w1 != 0 || w2_at_1 != 0, w2 != 0);
    }
    Ok(counts.as_batch())
}
