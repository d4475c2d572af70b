//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Tolerances are fixed in the code below.

use bcdisp::analysis::{
    capacity, dispersion_v1, dispersion_v2, jep_default_l1_grid, jep_l2_for_l1, joint_success_probability,
    normal_approx_log_m, sep_second_order_point, ApproxCriterion, CsvRow, OperatingPoint, RegionBoundary,
};
use bcdisp::codec::{
    gen_spherical_codebook, jnn_decode_user1, mismatched_density, nn_decode_user2, sample_sphere, sic_decode_user1,
    DensityParams,
};
use bcdisp::fading::{outage_prob, outage_region, theorem3_bound, OutageMethod, StrongDispersionGain, User};
use bcdisp::model::{ChannelConfig, FadingSpec, ValidatedConfig};
use bcdisp::montecarlo::{
    g_cap, g_joint, rcu_bound, run_simulation, BoundKind, Decoder, Engine, SimReport, SimulationRequest,
    DEFAULT_QUAD_NODES,
};
use bcdisp::numerics::{qfunc_inv, sphere_cap_tail};
use bcdisp::rng::{Domain, RandomStream};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde_json::{json, Value};
use std::time::Instant;

type Outcome = (bool, String);
type Criterion = (&'static str, fn() -> Outcome);

fn cfg(p: f64, a: f64, b: f64) -> ValidatedConfig {
    ChannelConfig::gaussian(p, a, b).unwrap().validate().unwrap()
}

fn reference_channel() -> ValidatedConfig {
    cfg(5.0, 0.3, 0.6)
}

fn normals(n: usize, scale: f64, rng: &mut RandomStream) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut *rng);
            scale * z
        })
        .collect()
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn argmax(len: usize, f: impl Fn(usize) -> f64) -> usize {
    (1..len).fold(0, |best, i| if f(i) > f(best) { i } else { best })
}

fn dispersion_values() -> Outcome {
    let v1 = dispersion_v1(1.5, 0.6, 0.3888).unwrap();
    let v2 = dispersion_v2(3.5, 1.5, 1.0, 3.0).unwrap();
    let ok = (v1 - 0.21428571).abs() <= 1e-8 && (v2 - 0.35194444).abs() <= 1e-8;
    (ok, format!("V1 = {v1:.10}, V2 = {v2:.10} (tol 1e-8)"))
}

fn gaussian_specialization() -> Outcome {
    let mut worst: f64 = 0.0;
    for i in 0..10 {
        for j in 0..10 {
            let p = 0.1 * 1.6f64.powi(i);
            let beta = 0.05 + 0.1 * j as f64;
            let v = dispersion_v1(p, beta, 3.0 * beta * beta).unwrap();
            worst = worst.max((v - p * (p + 2.0 * beta) / (2.0 * (p + beta).powi(2))).abs());
        }
    }
    (worst <= 1e-12, format!("max deviation {worst:.2e} over 100 points (tol 1e-12)"))
}

fn capacity_chain() -> Outcome {
    let mut rng = RandomStream::derive(1, Domain::Oracle, 3);
    let (mut worst, mut ordered) = (0.0f64, true);
    for _ in 0..1000 {
        let p = 10f64.powf(rng.random_range(-2.0..2.0));
        let a: f64 = rng.random_range(0.01..0.99);
        let b: f64 = rng.random_range(0.01..0.99);
        let ab = 1.0 - a;
        let c = |x: f64| capacity(x).unwrap();
        worst = worst.max((c(p / b) - c(a * p / b) - c(ab * p / (a * p + b))).abs());
        ordered &= c(ab * p / b) > c(ab * p / (a * p + b)) && c(ab * p / (a * p + b)) > c(ab * p / (a * p + 1.0));
    }
    (worst <= 1e-12 && ordered, format!("chain residual {worst:.2e} (tol 1e-12); strict ordering held: {ordered}"))
}

fn density_chain() -> Outcome {
    let mut rng = RandomStream::derive(2, Domain::Oracle, 4);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let n = rng.random_range(1..=64);
        let p = 10f64.powf(rng.random_range(-1.0..1.5));
        let a: f64 = rng.random_range(0.05..0.95);
        let b: f64 = rng.random_range(0.05..0.95);
        let v = normals(n, (a * p).sqrt(), &mut rng);
        let u = normals(n, ((1.0 - a) * p).sqrt(), &mut rng);
        let y = add(&add(&u, &v), &normals(n, b.sqrt() * 1.3, &mut rng));
        let d = |w: &[f64], y: &[f64], s: f64, dd: f64| {
            mismatched_density(w, y, DensityParams::new(s, dd).unwrap()).unwrap()
        };
        let lhs = d(&u, &y, (1.0 - a) * p, a * p + b) + d(&v, &sub(&y, &u), a * p, b);
        let rhs = d(&add(&u, &v), &y, p, b);
        worst = worst.max((lhs - rhs).abs() / rhs.abs().max(1.0));
    }
    (worst <= 1e-9, format!("max scaled residual {worst:.2e} over 10^4 tuples (tol 1e-9)"))
}

fn decoder_equivalence() -> Outcome {
    let c = reference_channel();
    let (n, m) = (16, 64);
    let (ap, abp, beta) = (c.strong_power(), c.weak_power(), c.beta);
    let mut mismatches = 0;
    for inst in 0..10_000u64 {
        let mut rng = RandomStream::derive(3, Domain::Oracle, inst);
        let cb_v = gen_spherical_codebook(m, n, ap, &mut rng).unwrap();
        let cb_u = gen_spherical_codebook(m, n, abp, &mut rng).unwrap();
        let x = add(cb_u.word(0).unwrap(), cb_v.word(0).unwrap());
        let y1 = add(&x, &normals(n, beta.sqrt() * 1.5, &mut rng));
        let y2 = add(&x, &normals(n, 1.5, &mut rng));
        let u = |w: usize| cb_u.word(w).unwrap();
        let v = |w: usize| cb_v.word(w).unwrap();
        let d = |w: &[f64], y: &[f64], s: f64, dd: f64| {
            mismatched_density(w, y, DensityParams::new(s, dd).unwrap()).unwrap()
        };

        let nn = argmax(m, |w| d(u(w), &y2, abp, ap + 1.0));
        let s1 = argmax(m, |w| d(u(w), &y1, abp, ap + beta));
        let rest = sub(&y1, u(s1));
        let s2 = argmax(m, |w| d(v(w), &rest, ap, beta));
        let k = argmax(m * m, |k| d(&add(v(k / m), u(k % m)), &y1, c.total_power, beta));
        mismatches += usize::from(nn_decode_user2(&y2, &cb_u, 1.0).unwrap() != nn);
        mismatches += usize::from(sic_decode_user1(&y1, &cb_u, &cb_v, 1.0).unwrap() != (s2, s1));
        mismatches += usize::from(jnn_decode_user1(&y1, &cb_u, &cb_v, 1.0).unwrap() != (k / m, k % m));
    }
    (mismatches == 0, format!("{mismatches} index mismatches over 10^4 instances (NN, SIC, JNN)"))
}

fn sphere_cap() -> Outcome {
    let grid: Vec<f64> = (0..9).map(|k| -0.8 + 0.2 * k as f64).collect();
    let mut worst_z: f64 = 0.0;
    for n in [3usize, 8, 32] {
        let mut rng = RandomStream::derive(4, Domain::Oracle, n as u64);
        let m = 1_000_000;
        let mut hits = [0u64; 9];
        let mut x = vec![0.0; n];
        for _ in 0..m {
            sample_sphere(&mut x, 1.0, &mut rng);
            for (h, c) in hits.iter_mut().zip(&grid) {
                *h += u64::from(x[0] > *c);
            }
        }
        for (h, c) in hits.iter().zip(&grid) {
            let p = sphere_cap_tail(n, *c).unwrap();
            let se = (p * (1.0 - p) / m as f64).sqrt();
            worst_z = worst_z.max((*h as f64 / m as f64 - p).abs() / se);
        }
    }
    let law = (0..=200)
        .map(|k| {
            let c = -1.0 + 0.01 * k as f64;
            (sphere_cap_tail(3, c).unwrap() - (1.0 - c) / 2.0).abs()
        })
        .fold(0.0f64, f64::max);
    (
        worst_z <= 4.0 && law <= 1e-10,
        format!("worst |z| = {worst_z:.2} (limit 4); n = 3 law residual {law:.1e} (tol 1e-10)"),
    )
}

fn g_terms() -> Outcome {
    let c = reference_channel();
    let n = 8;
    let nf = n as f64;
    let mut rng = RandomStream::derive(5, Domain::Oracle, 0);
    let mut worst_z: f64 = 0.0;
    let m = 200_000;
    let (mut lo, mut hi) = (1.0f64, 0.0f64);
    for case in 0..3 {
        let y = add(
            &add(&normals(n, c.weak_power().sqrt(), &mut rng), &normals(n, c.strong_power().sqrt(), &mut rng)),
            &normals(n, c.beta.sqrt(), &mut rng),
        );
        // single-codebook term
        let params = DensityParams::new(c.weak_power(), c.strong_power() + c.beta).unwrap();
        let t = [-4.0, -2.0, 0.0][case];
        let analytic = g_cap(t, &y, params, n).unwrap();
        let mut w = vec![0.0; n];
        let hits = (0..m)
            .filter(|_| {
                sample_sphere(&mut w, (nf * c.weak_power()).sqrt(), &mut rng);
                mismatched_density(&w, &y, params).unwrap() >= t
            })
            .count();
        let se = (analytic * (1.0 - analytic) / m as f64).sqrt().max(1e-12);
        (lo, hi) = (lo.min(analytic), hi.max(analytic));
        worst_z = worst_z.max((hits as f64 / m as f64 - analytic).abs() / se);
        // joint term
        let pj = DensityParams::new(c.total_power, c.beta).unwrap();
        let tj = [-12.0, -8.0, -5.0][case];
        let analytic = g_joint(tj, &y, &c, n, DEFAULT_QUAD_NODES).unwrap();
        let (mut wu, mut wv) = (vec![0.0; n], vec![0.0; n]);
        let hits = (0..m)
            .filter(|_| {
                sample_sphere(&mut wu, (nf * c.weak_power()).sqrt(), &mut rng);
                sample_sphere(&mut wv, (nf * c.strong_power()).sqrt(), &mut rng);
                mismatched_density(&add(&wu, &wv), &y, pj).unwrap() >= tj
            })
            .count();
        let se = (analytic * (1.0 - analytic) / m as f64).sqrt().max(1e-12);
        (lo, hi) = (lo.min(analytic), hi.max(analytic));
        worst_z = worst_z.max((hits as f64 / m as f64 - analytic).abs() / se);
    }
    let n = 64;
    let nf = n as f64;
    let (mut worst_gap, mut worst_ln, mut largest) = (0.0f64, 0.0f64, 0.0f64);
    for k in 0..4 {
        let (mut u, mut v) = (vec![0.0; n], vec![0.0; n]);
        sample_sphere(&mut u, (nf * c.weak_power()).sqrt(), &mut rng);
        sample_sphere(&mut v, (nf * c.strong_power()).sqrt(), &mut rng);
        let y = add(&add(&u, &v), &normals(n, c.beta.sqrt(), &mut rng));
        for t in [-400.0, -300.0, -250.0, -200.0, -150.0, -100.0, -50.0] {
            let t = t + 5.0 * k as f64;
            let a = g_joint(t, &y, &c, n, DEFAULT_QUAD_NODES).unwrap();
            let b = g_joint(t, &y, &c, n, 2 * DEFAULT_QUAD_NODES).unwrap();
            largest = largest.max(a);
            worst_gap = worst_gap.max((a - b).abs());
            if a > 0.0 {
                worst_ln = worst_ln.max((a.ln() - b.ln()).abs());
            }
        }
    }
    (
        worst_z <= 4.0 && worst_gap <= 1e-8 && worst_ln <= 1e-8,
        format!(
            "worst |z| vs Monte Carlo = {worst_z:.2} (limit 4, g in [{lo:.3}, {hi:.3}]); node doubling at n = 64 changes g by {worst_gap:.1e} \
             and ln g by {worst_ln:.1e} (tol 1e-8; largest g {largest:.3})"
        ),
    )
}

fn normal_approx_consistency() -> Outcome {
    let c = reference_channel();
    let n = 128;
    let (l1, l2) = normal_approx_log_m(&c, n, 0.1, 0.1, ApproxCriterion::Sep).unwrap();
    let r = run_simulation(&c, &SimulationRequest::new(n, l1, l2, Decoder::Sic, 100_000, 8)).unwrap();
    let p = r.err2.estimate;
    (
        (0.05..=0.20).contains(&p),
        format!(
            "P_e2 = {p:.5} +/- {:.5} (95% CI [{:.5}, {:.5}]) at ln M2 = {l2:.4}; required [0.05, 0.20]",
            r.err2.std_error, r.err2.ci95.0, r.err2.ci95.1
        ),
    )
}

fn sic_vs_jnn() -> Outcome {
    let c = reference_channel();
    let n = 128;
    let (l1, l2) = normal_approx_log_m(&c, n, 0.1, 0.1, ApproxCriterion::Sep).unwrap();
    let mut req = SimulationRequest::new(n, l1, l2, Decoder::Sic, 20_000, 9);
    let sic = run_simulation(&c, &req).unwrap();
    req.decoder = Decoder::Jnn;
    req.engine = Engine::Implicit;
    let jnn = run_simulation(&c, &req).unwrap();
    let gap = (sic.err1.estimate - jnn.err1.estimate).abs();
    let limit = 0.02 + 3.0 * sic.err1.std_error.hypot(jnn.err1.std_error);
    (
        gap <= limit,
        format!("P_e1 SIC {:.5}, JNN {:.5}; gap {gap:.5} <= {limit:.5}", sic.err1.estimate, jnn.err1.estimate),
    )
}

fn rcu_dominance() -> Outcome {
    let configs = [
        (0.5, 0.4, 0.8, 64.0, 64.0),
        (0.3, 0.5, 0.9, 32.0, 16.0),
        (1.0, 0.3, 0.7, 256.0, 256.0),
        (0.6, 0.5, 0.5, 256.0, 64.0),
        (0.4, 0.2, 0.9, 16.0, 128.0),
    ];
    let n = 64;
    let mut worst_slack = f64::INFINITY;
    let mut lines = Vec::new();
    for (i, &(p, a, b, m1, m2)) in configs.iter().enumerate() {
        let c = cfg(p, a, b);
        let (l1, l2) = (f64::ln(m1), f64::ln(m2));
        let sim = |d| -> SimReport {
            let mut req = SimulationRequest::new(n, l1, l2, d, 6_000, 100 + i as u64);
            req.engine = Engine::Explicit;
            run_simulation(&c, &req).unwrap()
        };
        let (sic, jnn) = (sim(Decoder::Sic), sim(Decoder::Jnn));
        for (kind, est) in [
            (BoundKind::User2Sep, &sic.err2),
            (BoundKind::User1SepSic, &sic.err1),
            (BoundKind::User1SepJnn, &jnn.err1),
            (BoundKind::JepSic, &sic.err_joint),
            (BoundKind::JepJnn, &jnn.err_joint),
        ] {
            let bound = rcu_bound(&c, n, l1, l2, kind, 6_000, 200 + i as u64).unwrap();
            let slack = bound.value - (est.estimate - 3.0 * bound.std_error.hypot(est.std_error));
            worst_slack = worst_slack.min(slack);
            if i == 0 {
                lines.push(format!("{kind:?} {:.4} vs {:.4}", bound.value, est.estimate));
            }
        }
    }
    (worst_slack >= 0.0, format!("smallest margin {worst_slack:.5} over 25 pairs; first config: {}", lines.join(", ")))
}

fn region_csv(cmd_dir: &std::path::Path, region: Value) -> Vec<CsvRow> {
    let doc = json!({"channel": {"total_power": 5.0, "alpha": 0.3, "beta": 0.6}, "region": region});
    let path = cmd_dir.join("config.json");
    std::fs::write(&path, doc.to_string()).unwrap();
    let code = bcdisp::cli::main_with_args([
        "bcdisp",
        "region",
        "--config",
        path.to_str().unwrap(),
        "--out",
        cmd_dir.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let crit = region["criterion"].as_str().unwrap();
    RegionBoundary::parse_csv(&std::fs::read_to_string(cmd_dir.join(format!("region_{crit}.csv"))).unwrap()).unwrap()
}

fn jep_sep_geometry() -> Outcome {
    let c = reference_channel();
    let op = OperatingPoint::of(&c);
    let dir = tempfile::tempdir().unwrap();
    let (mut ok, mut worst_asym, mut worst_csv) = (true, 0.0f64, 0.0f64);
    for eps in [0.1, 0.2, 0.3] {
        for share in [0.5, 0.2, 0.8] {
            let corner = sep_second_order_point(&c, share * eps, (1.0 - share) * eps).unwrap();
            ok &= joint_success_probability(&c, corner) >= 1.0 - eps;
        }
        let q = qfunc_inv(eps).unwrap();
        let (a1, a2) = (op.v1.sqrt() * q, op.v2.sqrt() * q);
        let far = jep_l2_for_l1(&c, eps, 1e3 * op.v1.sqrt()).unwrap();
        let near = jep_default_l1_grid(&c, eps, 201).unwrap()[0];
        worst_asym = worst_asym.max((far - a2).abs()).max((near - a1).abs());
        let sep = region_csv(dir.path(), json!({"criterion": "sep", "eps1": eps / 2.0, "eps2": eps / 2.0}));
        let jep = region_csv(dir.path(), json!({"criterion": "jep", "eps": eps}));
        let min = |rows: &[CsvRow], f: fn(&CsvRow) -> f64| rows.iter().map(f).fold(f64::INFINITY, f64::min);
        worst_csv = worst_csv
            .max((min(&sep, |r| r.3) - min(&jep, |r| r.3)).abs())
            .max((min(&sep, |r| r.4) - min(&jep, |r| r.4)).abs());
    }
    (
        ok && worst_asym <= 1e-9 && worst_csv <= 1e-6,
        format!("product constraint held: {ok}; asymptote error {worst_asym:.1e} (tol 1e-9); CSV endpoint gap {worst_csv:.1e} (tol 1e-6)"),
    )
}

fn fading() -> Outcome {
    let c = reference_channel();
    let ray = FadingSpec::Rayleigh { mean_square: 1.0 };
    let mut worst_z: f64 = 0.0;
    for (user, rate) in [(User::Strong, 0.05), (User::Strong, 0.2), (User::Weak, 0.1), (User::Weak, 0.25)] {
        let exact = outage_prob(&c, &ray, user, rate, OutageMethod::ClosedForm).unwrap();
        let mc = outage_prob(&c, &ray, user, rate, OutageMethod::MonteCarlo { samples: 1_000_000, seed: 12 }).unwrap();
        worst_z = worst_z.max((exact.outage_prob - mc.outage_prob).abs() / mc.std_error);
    }
    let corner = outage_region(&c, &ray, &ray, 0.1, 0.1).unwrap().points[0];
    let bisect = |user: User| {
        let (mut lo, mut hi) = (0.0, 5.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if outage_prob(&c, &ray, user, mid, OutageMethod::ClosedForm).unwrap().outage_prob <= 0.1 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    };
    let corner_err = (corner.x - bisect(User::Strong)).abs().max((corner.y - bisect(User::Weak)).abs());
    let mut monotone = true;
    let mut gaps_txt = Vec::new();
    for (user, rate) in [(User::Strong, corner.x), (User::Weak, corner.y)] {
        let out = outage_prob(&c, &ray, user, rate, OutageMethod::ClosedForm).unwrap().outage_prob;
        let gaps: Vec<f64> = [100usize, 400, 1600]
            .iter()
            .map(|&n| {
                let b = theorem3_bound(
                    &c,
                    &ray,
                    &ray,
                    user,
                    n,
                    n as f64 * rate,
                    1_000_000,
                    13,
                    StrongDispersionGain::AsPrinted,
                )
                .unwrap();
                (b.value - out).abs()
            })
            .collect();
        monotone &= gaps.windows(2).all(|w| w[1] < w[0]);
        gaps_txt.push(format!("{user:?} {:.2e}/{:.2e}/{:.2e}", gaps[0], gaps[1], gaps[2]));
    }
    (
        worst_z <= 3.0 && corner_err <= 1e-8 && monotone,
        format!(
            "closed form vs sampling worst |z| = {worst_z:.2} (limit 3); corner vs bisection {corner_err:.1e} (tol 1e-8); gaps {}",
            gaps_txt.join(", ")
        ),
    )
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut prints = Vec::new();
    for (name, sim) in [
        ("explicit", json!({"n": 16, "log_m1": 5.0, "log_m2": 4.0, "trials": 5000, "decoder": "jnn", "batch": 64})),
        ("implicit", json!({"n": 128, "target": {"eps1": 0.1, "eps2": 0.1}, "trials": 5000, "decoder": "sic"})),
    ] {
        let doc = json!({"channel": {"total_power": 5.0, "alpha": 0.3, "beta": 0.6}, "seed": 2024, "simulate": sim});
        let path = dir.path().join(format!("{name}.json"));
        std::fs::write(&path, doc.to_string()).unwrap();
        let fps: Vec<String> = ["1", "4", "8"]
            .iter()
            .map(|w| {
                let out = dir.path().join(format!("{name}-{w}"));
                let args = [
                    "bcdisp",
                    "simulate",
                    "--config",
                    path.to_str().unwrap(),
                    "--out",
                    out.to_str().unwrap(),
                    "--workers",
                    w,
                ];
                assert_eq!(bcdisp::cli::main_with_args(args), 0);
                let v: Value =
                    serde_json::from_str(&std::fs::read_to_string(out.join("simulate.json")).unwrap()).unwrap();
                v["report_fingerprint"].as_str().unwrap().to_string()
            })
            .collect();
        prints.push((name, fps));
    }
    let ok = prints.iter().all(|(_, f)| f.iter().all(|x| x == &f[0]));
    let txt: Vec<String> = prints.iter().map(|(n, f)| format!("{n} {}", &f[0][..16])).collect();
    (ok, format!("report fingerprints identical across workers 1/4/8: {ok} ({})", txt.join(", ")))
}

fn main() {
    let criteria: [Criterion; 13] = [
        ("dispersion values", dispersion_values),
        ("gaussian specialization of V1", gaussian_specialization),
        ("capacity chain rule and degradedness", capacity_chain),
        ("density chain rule", density_chain),
        ("decoder/density equivalence", decoder_equivalence),
        ("sphere-cap analytics", sphere_cap),
        ("g-term oracles", g_terms),
        ("normal-approximation consistency", normal_approx_consistency),
        ("SIC vs JNN", sic_vs_jnn),
        ("RCU dominance", rcu_dominance),
        ("JEP/SEP geometry", jep_sep_geometry),
        ("fading", fading),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (ok, detail) = f();
        failed += usize::from(!ok);
        println!(
            "{} {:>2} {name}: {detail} [{:.1} s]",
            if ok { "PASS" } else { "FAIL" },
            i + 1,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
