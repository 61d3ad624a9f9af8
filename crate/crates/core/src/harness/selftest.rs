//! Randomized invariant checks runnable from a release binary.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::detectors::{flops_estimate, hard_decision, jed_admm, jed_admm_observed, jed_am, project_box, AdmmConfig, FlopsAlgorithm};
use crate::linalg::ComplexMat;
use crate::model::{make_constellation, LinkScenario};
use crate::seeding::derive_seed;
use crate::unfolded::{infer_complex, realify, ParamMode, RealKind, UnfoldedParams, ZUpdate};

use super::{run_ber_sweep, with_threads, Algorithm, ExperimentConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub cases: usize,
    /// First failing case, if any.
    pub failure: Option<String>,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.failure.is_none()
    }
}

type Check = fn(&mut ChaCha8Rng) -> Result<(), String>;

fn random_complex(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> ComplexMat {
    ComplexMat::from_fn(rows, cols, |_, _| {
        Complex64::new(rng.random_range(-scale..scale), rng.random_range(-scale..scale))
    })
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn projection(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let (r, c) = (rng.random_range(1..8), rng.random_range(1..16));
    let radius = rng.random_range(0.1..4.0);
    let a = random_complex(rng, r, c, 5.0);
    let b = random_complex(rng, r, c, 5.0);
    let pa = project_box(&a, radius).map_err(|e| e.to_string())?;
    let pb = project_box(&b, radius).map_err(|e| e.to_string())?;
    ensure(project_box(&pa, radius).ok() == Some(pa.clone()), || "projection is not idempotent".into())?;
    let (d, d0) = (pa.sub(&pb).unwrap().frob_norm(), a.sub(&b).unwrap().frob_norm());
    ensure(d <= d0 + 1e-12, || format!("projection expanded a distance: {d} > {d0}"))
}

fn decision(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let beta = [4, 16, 64][rng.random_range(0..3)];
    let cons = make_constellation(beta).map_err(|e| e.to_string())?;
    let (r, c) = (rng.random_range(1..8), rng.random_range(1..16));
    let a = random_complex(rng, r, c, 2.0 * cons.box_radius());
    let s = hard_decision(&a, &cons);
    ensure(s.as_slice().iter().all(|z| cons.contains(*z)), || format!("decision left the {beta}-QAM alphabet"))?;
    ensure(hard_decision(&s, &cons) == s, || format!("{beta}-QAM decision is not idempotent"))
}

fn admm_iterates(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let (n, k, td) = (rng.random_range(1..7), rng.random_range(1..7), rng.random_range(1..13));
    let scenario = LinkScenario::iid(n, k, td);
    let cons = scenario.constellation().map_err(|e| e.to_string())?;
    let snr = rng.random_range(-5.0..25.0);
    let r = scenario.realize(snr, rng).map_err(|e| e.to_string())?;
    let ratio = scenario.noise_ratio(snr).map_err(|e| e.to_string())?;
    let cfg = AdmmConfig {
        rho: rng.random_range(0.05..8.0) * ratio,
        noise_ratio: ratio,
        iterations: rng.random_range(1..8),
        box_radius: cons.box_radius(),
    };
    let mut sum = ComplexMat::zeros(k, td);
    let mut first = None;
    let outcome = jed_admm_observed(&r.y, &r.x_t, &cfg, &cons, |s| {
        let rad = cfg.box_radius;
        if first.is_none() && s.z_d.as_slice().iter().any(|z| z.re.abs() > rad || z.im.abs() > rad) {
            first = Some(format!("Z left the box at iteration {}", s.iteration));
        }
        if let Ok(d) = s.x_d.sub(&s.z_d) {
            let _ = sum.axpy(Complex64::new(1.0, 0.0), &d);
        }
        if first.is_none() && s.lambda.max_abs_diff(&sum) > 1e-9 * (1.0 + sum.frob_norm()) {
            first = Some(format!("dual is not the running sum of X - Z at iteration {}", s.iteration));
        }
    });
    match (outcome, first) {
        (Ok(_), Some(m)) => Err(m),
        _ => Ok(()),
    }
}

fn real_recast(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let (n, k, t) = (rng.random_range(1..9), rng.random_range(1..9), rng.random_range(1..9));
    let h = random_complex(rng, n, k, 2.0);
    let x = random_complex(rng, k, t, 2.0);
    let lhs = realify(&h.matmul(&x).unwrap(), RealKind::Signal);
    let rhs = realify(&h, RealKind::Channel).matmul(&realify(&x, RealKind::Signal)).unwrap();
    let d = lhs.max_abs_diff(&rhs);
    ensure(d <= 1e-12 * (1.0 + lhs.frob_norm()), || format!("recast of H X differs by {d:e}"))
}

fn noiseless(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let k = rng.random_range(1..9);
    let n = k + rng.random_range(0..5);
    let l = rng.random_range(1..10);
    let scenario = LinkScenario::iid(n, k, 32);
    let cons = scenario.constellation().map_err(|e| e.to_string())?;
    let r = scenario.realize_with_noise(0.0, rng).map_err(|e| e.to_string())?;
    let am = jed_am(&r.y, &r.x_t, 0.0, l, &cons).map_err(|e| e.to_string())?;
    let cfg = AdmmConfig {
        rho: 1e-9,
        noise_ratio: 0.0,
        iterations: l,
        box_radius: cons.box_radius(),
    };
    let admm = jed_admm(&r.y, &r.x_t, &cfg, &cons).map_err(|e| e.to_string())?;
    ensure(am.x_hat == r.x_d, || format!("JED-AM erred on a noiseless {n}x{k} link, L={l}"))?;
    ensure(admm.x_hat == r.x_d, || format!("JED-ADMM erred on a noiseless {n}x{k} link, L={l}"))
}

fn unfolded_matches_admm(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let n = rng.random_range(2..9);
    let scenario = LinkScenario::iid(n, n, 16);
    let cons = scenario.constellation().map_err(|e| e.to_string())?;
    let snr = rng.random_range(0.0..25.0);
    let l = rng.random_range(1..8);
    let r = scenario.realize(snr, rng).map_err(|e| e.to_string())?;
    let ratio = scenario.noise_ratio(snr).map_err(|e| e.to_string())?;
    let rho = rng.random_range(0.25..4.0) * ratio;
    let cfg = AdmmConfig {
        rho,
        noise_ratio: ratio,
        iterations: l,
        box_radius: cons.box_radius(),
    };
    let reference = jed_admm(&r.y, &r.x_t, &cfg, &cons).map_err(|e| e.to_string())?;
    let mode = if rng.random_bool(0.5) { ParamMode::Shared } else { ParamMode::Unshared };
    let params = UnfoldedParams::admm_equivalent(mode, l, rho, ratio);
    let (x, _) = infer_complex(&r.y, &r.x_t, &params, ZUpdate::Project { radius: cons.box_radius() }, &cons)
        .map_err(|e| e.to_string())?;
    ensure(x == reference.x_hat, || format!("unfolded decisions differ from JED-ADMM ({n}x{n}, L={l})"))
}

fn flops_figures(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let admm = flops_estimate(FlopsAlgorithm::JedAdmm, 16, 16, 16, 512, 1).per_iteration_flops;
    let am = flops_estimate(FlopsAlgorithm::JedAm, 16, 16, 16, 512, 1).per_iteration_flops;
    ensure((admm, am) == (561_152, 430_080), || format!("per-iteration FLOPS {admm}/{am}"))?;
    let (n, k, td, l) = (rng.random_range(1..64), rng.random_range(1..64), rng.random_range(1..600), rng.random_range(1..60));
    let a = flops_estimate(FlopsAlgorithm::JedAdmm, n, k, k, td, l);
    ensure(a.total_flops == a.init_flops + l * a.per_iteration_flops, || "total is not init + L per-iteration".into())
}

fn thread_invariance(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let alg = [Algorithm::JedAm, Algorithm::JedAdmm, Algorithm::Mmse][rng.random_range(0..3)];
    let mut c = ExperimentConfig::new("selftest", LinkScenario::iid(3, 2, 8), alg, 3, vec![0.0, 10.0]);
    c.seed = rng.random();
    c.trials = rng.random_range(1..6);
    let one = with_threads(Some(1), || run_ber_sweep(&c)).map_err(|e| e.to_string())?.map_err(|e| e.to_string())?;
    let many = with_threads(Some(3), || run_ber_sweep(&c)).map_err(|e| e.to_string())?.map_err(|e| e.to_string())?;
    ensure(one == many, || format!("{alg} sweep depends on the worker count (seed {})", c.seed))
}

const CHECKS: [(&str, Check); 8] = [
    ("box projection is idempotent and nonexpansive", projection),
    ("hard decision is idempotent and closed", decision),
    ("ADMM auxiliary stays in the box, dual sums X - Z", admm_iterates),
    ("real recast preserves products", real_recast),
    ("noiseless links decode exactly", noiseless),
    ("unfolded network with projection equals JED-ADMM", unfolded_matches_admm),
    ("FLOPS model", flops_figures),
    ("sweeps do not depend on the worker count", thread_invariance),
];

/// Runs every check on `cases` random instances derived from `seed`.
pub fn run_selftest(seed: u64, cases: usize) -> Vec<CheckResult> {
    CHECKS
        .iter()
        .enumerate()
        .map(|(i, (name, check))| {
            let failure = (0..cases).find_map(|c| {
                let case_seed = derive_seed(seed, 100 + i as u64, c as u64);
                let mut rng = ChaCha8Rng::seed_from_u64(case_seed);
                check(&mut rng).err().map(|e| format!("case {c} (seed {case_seed}): {e}"))
            });
            CheckResult { name, cases, failure }
        })
        .collect()
}
