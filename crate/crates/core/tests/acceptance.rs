//! Acceptance criteria. Runs as a plain binary and prints one line per
//! criterion:
//!
//! ```text
//! cargo test -p jed-core --test acceptance            # all ten
//! cargo test -p jed-core --test acceptance -- 1 3 9   # a subset
//! ```
//!
//! Exits non-zero when any selected criterion fails.

use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use jed_core::detectors::{
    flops_estimate, hard_decision, jed_admm, jed_admm_observed, jed_am, project_box, AdmmConfig, FlopsAlgorithm,
    PUBLISHED_PER_ITERATION_N16_K16,
};
use jed_core::harness::{
    preset, run_ber_sweep, with_threads, Algorithm, BerPoint, ExperimentConfig, Penalty, SweepResult, TrainingSpec,
    UnfoldedSource,
};
use jed_core::model::make_constellation;
use jed_core::unfolded::{grad_params, infer_complex, loss, realify, u_admm_forward, RealKind, ZUpdate};
use jed_core::{ComplexMat, LinkScenario, ParamMode, UnfoldedParams};
use num_complex::Complex64;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 20_240_601;
const SIGMAS: f64 = 3.0;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn fmt_point(p: &BerPoint) -> String {
    format!("{:.3e} (se {:.1e}, failed {})", p.ber, p.stderr, p.trials_failed)
}

/// Upper end of `a`'s interval lies strictly below the lower end of `b`'s.
fn separated(a: &BerPoint, b: &BerPoint) -> bool {
    a.interval(SIGMAS).1 < b.interval(SIGMAS).0
}

fn sweep_one(mut c: ExperimentConfig, snr_db: f64) -> BerPoint {
    c.snr_grid_db = vec![snr_db];
    c.seed = SEED;
    let r: SweepResult = run_ber_sweep(&c).unwrap_or_else(|e| panic!("{}: {e}", c.series_label()));
    r.points.into_iter().next().expect("one point")
}

fn find(name: &str, pred: impl Fn(&ExperimentConfig) -> bool) -> ExperimentConfig {
    preset(name)
        .unwrap()
        .into_iter()
        .find(|c| pred(c))
        .unwrap_or_else(|| panic!("no matching configuration in {name}"))
}

fn dims(c: &ExperimentConfig) -> (usize, usize) {
    (c.scenario.channel.n_rx, c.scenario.channel.n_tx)
}

fn random_complex(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> ComplexMat {
    ComplexMat::from_fn(rows, cols, |_, _| {
        Complex64::new(rng.random_range(-scale..scale), rng.random_range(-scale..scale))
    })
}

// Complexity model, checked against a literal transcription of the counting
// rules and the worked N = K = 16 figures.
fn criterion_flops() -> Outcome {
    // term-by-term transcription of the cost table, built from matrix products
    fn oracle(admm: bool, n: u64, k: u64, tt: u64, td: u64, l: u64) -> u64 {
        let product = |m: u64, inner: u64, p: u64| m * inner * p;
        let inverse = |m: u64| m * m * m;
        let init = product(n, k, tt) + product(k, tt, k) + product(k, n, k) + inverse(k);
        let gram_terms = 3 * product(k, n, k) + product(k, 2 * td + 2 * tt, k) + 2 * inverse(k);
        let data_terms = if admm { product(n, k, 2 * td + 2 * tt) } else { product(n, k, td + 2 * tt) };
        init + l * (gram_terms + data_terms)
    }
    let mut mismatches = Vec::new();
    let mut cases = 0;
    for n in [1u64, 4, 16, 17, 64] {
        for k in [1u64, 3, 16, 80] {
            for tt in [k, k + 5] {
                for td in [1u64, 32, 512] {
                    for l in [0u64, 1, 10, 50] {
                        for admm in [false, true] {
                            cases += 1;
                            let algo = if admm { FlopsAlgorithm::JedAdmm } else { FlopsAlgorithm::JedAm };
                            let got = flops_estimate(algo, n, k, tt, td, l).total_flops;
                            let want = oracle(admm, n, k, tt, td, l);
                            if got != want {
                                mismatches.push(format!("{algo:?} n={n} k={k} tt={tt} td={td} l={l}: {got} != {want}"));
                            }
                        }
                    }
                }
            }
        }
    }
    let admm = flops_estimate(FlopsAlgorithm::JedAdmm, 16, 16, 16, 512, 1);
    let am = flops_estimate(FlopsAlgorithm::JedAm, 16, 16, 16, 512, 1);
    let (pub_admm, pub_am) = PUBLISHED_PER_ITERATION_N16_K16;
    let k3 = 16u64.pow(3);
    let budget_am = flops_estimate(FlopsAlgorithm::JedAm, 16, 16, 16, 512, 50).total_flops;
    let budget_admm = flops_estimate(FlopsAlgorithm::JedAdmm, 16, 16, 16, 512, 10).total_flops;
    let reduction = 1.0 - budget_admm as f64 / budget_am as f64;
    let ok = mismatches.is_empty()
        && admm.per_iteration_flops == 561_152
        && am.per_iteration_flops == 430_080
        && admm.per_iteration_flops - pub_admm == k3
        && am.per_iteration_flops - pub_am == k3
        && reduction >= 0.70;
    check(
        ok,
        format!(
            "{cases} cases, {} mismatches{}; per-iteration ADMM {} AM {} (published {pub_admm}/{pub_am}, gap K^3 = {k3}); \
             ADMM L=10 vs AM L=50 saves {:.2}%",
            mismatches.len(),
            mismatches.first().map(|m| format!(" (first: {m})")).unwrap_or_default(),
            admm.per_iteration_flops,
            am.per_iteration_flops,
            100.0 * reduction
        ),
    )
}

// Unfolded network with a projection update and ADMM-equivalent scalars
// reproduces JED-ADMM decisions.
fn criterion_reduction() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let cons = make_constellation(4).unwrap();
    let mut differing = 0;
    let mut worst = 0.0f64;
    let instances = 100;
    for i in 0..instances {
        let n = if i % 2 == 0 { 4 } else { 8 };
        let scenario = LinkScenario::iid(n, n, 32);
        let snr = rng.random_range(0.0..25.0);
        let layers = rng.random_range(1..=10);
        let scale = rng.random_range(0.25..4.0);
        let mode = if rng.random_bool(0.5) { ParamMode::Shared } else { ParamMode::Unshared };
        let r = scenario.realize(snr, &mut rng).unwrap();
        let ratio = scenario.noise_ratio(snr).unwrap();
        let rho = scale * ratio;
        let cfg = AdmmConfig {
            rho,
            noise_ratio: ratio,
            iterations: layers,
            box_radius: cons.box_radius(),
        };
        let reference = jed_admm(&r.y, &r.x_t, &cfg, &cons).unwrap();
        let params = UnfoldedParams::admm_equivalent(mode, layers, rho, ratio);
        let (x_hat, h_hat) = infer_complex(
            &r.y,
            &r.x_t,
            &params,
            ZUpdate::Project { radius: cons.box_radius() },
            &cons,
        )
        .unwrap();
        if x_hat != reference.x_hat {
            differing += 1;
        }
        worst = worst.max(h_hat.max_abs_diff(&reference.h_hat));
    }
    check(
        differing == 0,
        format!("{differing}/{instances} instances with differing decisions; max channel deviation {worst:.1e}"),
    )
}

// Reverse-mode gradients against central finite differences.
fn criterion_gradients() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 3);
    let scenario = LinkScenario::iid(4, 4, 16);
    let mut checked = 0;
    let mut failures = Vec::new();
    let mut worst_rel = 0.0f64;
    for i in 0..20 {
        let mode = if i < 10 { ParamMode::Shared } else { ParamMode::Unshared };
        let snr = rng.random_range(5.0..20.0);
        let r = scenario.realize(snr, &mut rng).unwrap();
        let ratio = scenario.noise_ratio(snr).unwrap();
        let mut params = UnfoldedParams::admm_like(mode, 2, ratio);
        let mut v = params.to_trainable();
        for x in v.iter_mut() {
            *x += rng.random_range(-0.3..0.3) * x.abs().max(0.1);
        }
        params.set_trainable(&v).unwrap();

        let y = realify(&r.y, RealKind::Signal);
        let x_t = realify(&r.x_t, RealKind::Signal);
        let x_d = realify(&r.x_d, RealKind::Signal);
        let (_, grad) = grad_params(&y, &x_t, &x_d, &params).unwrap();
        let f = |v: &[f64]| {
            let mut p = params.clone();
            p.set_trainable(v).unwrap();
            loss(&x_d, &u_admm_forward(&y, &x_t, &p).unwrap().x).unwrap()
        };
        for j in 0..v.len() {
            let h = 1e-5 * v[j].abs().max(1.0);
            let mut up = v.clone();
            up[j] += h;
            let mut down = v.clone();
            down[j] -= h;
            let fd = (f(&up) - f(&down)) / (2.0 * h);
            let err = (grad[j] - fd).abs();
            let scale = grad[j].abs().max(fd.abs());
            checked += 1;
            if scale > 0.0 {
                worst_rel = worst_rel.max(err / scale);
            }
            if err > 1e-6 && err > 1e-3 * scale {
                failures.push(format!("instance {i} param {j}: analytic {:.6e} vs fd {fd:.6e}", grad[j]));
            }
        }
    }
    check(
        failures.is_empty(),
        format!(
            "{checked} partials on 20 instances, {} outside tolerance, worst relative error {worst_rel:.1e}{}",
            failures.len(),
            failures.first().map(|m| format!(" (first: {m})")).unwrap_or_default()
        ),
    )
}

// Noiseless links are detected without error. The penalty follows the
// noise-ratio rule, which vanishes here; the solver needs a positive value,
// so a negligible one stands in for the limit.
fn criterion_noiseless() -> Outcome {
    const RHO: f64 = 1e-9;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 4);
    let cons = make_constellation(4).unwrap();
    let radius = cons.box_radius();
    let mut runs = 0;
    let mut failures = Vec::new();
    for (n, k) in [(4, 4), (8, 4), (16, 16), (32, 16)] {
        let scenario = LinkScenario::iid(n, k, 64);
        for l in [1, 5, 20] {
            for _ in 0..5 {
                let r = scenario.realize_with_noise(0.0, &mut rng).unwrap();
                let am = jed_am(&r.y, &r.x_t, 0.0, l, &cons).unwrap().x_hat;
                let cfg = AdmmConfig {
                    rho: RHO,
                    noise_ratio: 0.0,
                    iterations: l,
                    box_radius: radius,
                };
                let admm = jed_admm(&r.y, &r.x_t, &cfg, &cons).unwrap().x_hat;
                let params = UnfoldedParams::admm_equivalent(ParamMode::Shared, l, RHO, 0.0);
                let (unf, _) = infer_complex(&r.y, &r.x_t, &params, ZUpdate::Project { radius }, &cons).unwrap();
                for (name, x) in [("am", &am), ("admm", &admm), ("u-admm", &unf)] {
                    runs += 1;
                    if *x != r.x_d {
                        failures.push(format!("{name} {n}x{k} L={l}"));
                    }
                }
            }
        }
    }
    check(
        failures.is_empty(),
        format!(
            "{runs} detector runs, {} with symbol errors{}",
            failures.len(),
            failures.first().map(|m| format!(" (first: {m})")).unwrap_or_default()
        ),
    )
}

// Exp 1: 32x32, 20 dB, L = 20, penalty r against 4r.
fn criterion_penalty() -> Outcome {
    let pick = |scale: f64| {
        find("exp1", |c| dims(c) == (32, 32) && c.iterations == 20 && c.penalty == Penalty::NoiseRatio(scale))
    };
    let low = sweep_one(pick(1.0), 20.0);
    let high = sweep_one(pick(4.0), 20.0);
    let in_range = (7e-4..=6e-3).contains(&low.ber);
    let ordered = separated(&low, &high);
    check(
        in_range && ordered,
        format!(
            "rho=r {} rho=4r {}; rho=r inside [7e-4, 6e-3]: {in_range}; rho=r below rho=4r at 3 se: {ordered}",
            fmt_point(&low),
            fmt_point(&high)
        ),
    )
}

// Exp 2: 16x16, 20 dB, ADMM L = 10 beats AM L = 50 at a fraction of the cost.
fn criterion_budget() -> Outcome {
    let admm_cfg = find("exp2", |c| dims(c) == (16, 16) && c.algorithm == Algorithm::JedAdmm && c.iterations == 10);
    let am_cfg = find("exp2", |c| dims(c) == (16, 16) && c.algorithm == Algorithm::JedAm && c.iterations == 50);
    let admm = sweep_one(admm_cfg, 20.0);
    let am = sweep_one(am_cfg, 20.0);
    let reduction = 1.0 - admm.flops.total_flops as f64 / am.flops.total_flops as f64;
    let ordered = separated(&admm, &am);
    check(
        ordered && reduction >= 0.70,
        format!(
            "ADMM L=10 {} vs AM L=50 {}; separated at 3 se: {ordered}; FLOPS {} vs {} ({:.2}% fewer)",
            fmt_point(&admm),
            fmt_point(&am),
            admm.flops.total_flops,
            am.flops.total_flops,
            100.0 * reduction
        ),
    )
}

// Exp 7: overloaded 64x80 at 24 dB, ADMM at least 5x better than AM.
fn criterion_overloaded() -> Outcome {
    let pick = |alg| find("exp7", |c| dims(c) == (64, 80) && c.algorithm == alg);
    let admm = sweep_one(pick(Algorithm::JedAdmm), 24.0);
    let am = sweep_one(pick(Algorithm::JedAm), 24.0);
    let ratio = am.ber / admm.ber;
    check(
        admm.ber * 5.0 <= am.ber,
        format!("ADMM L=20 {} vs AM L=20 {}; ratio {ratio:.1}", fmt_point(&admm), fmt_point(&am)),
    )
}

// Trained shared JED-U-ADMM (L = 10) against JED-ADMM (L = 20), 16x16 at 16 dB.
fn criterion_unfolded() -> Outcome {
    let mut unf = ExperimentConfig::new("accept", LinkScenario::iid(16, 16, 512), Algorithm::JedUAdmm, 10, vec![16.0]);
    unf.unfolded = UnfoldedSource::Train(TrainingSpec::new(ParamMode::Shared, 16.0));
    let admm = ExperimentConfig::new("accept", LinkScenario::iid(16, 16, 512), Algorithm::JedAdmm, 20, vec![16.0]);
    let u = sweep_one(unf, 16.0);
    let a = sweep_one(admm, 16.0);
    let ok = u.interval(SIGMAS).0 <= a.interval(SIGMAS).1;
    check(
        ok,
        format!("U-ADMM L=10 {} vs ADMM L=20 {}; within 3 se or better: {ok}", fmt_point(&u), fmt_point(&a)),
    )
}

fn runner() -> TestRunner {
    let config = Config {
        cases: 1000,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn seeded_matrix() -> impl Strategy<Value = (usize, usize, u64, f64)> {
    (1usize..9, 1usize..17, any::<u64>(), 0.1f64..10.0)
}

// Invariants, 1000 generated cases each.
fn criterion_invariants() -> Outcome {
    let mut passed = Vec::new();
    let mut run = |name: &str, result: Result<(), String>| -> Result<(), String> {
        result.map_err(|e| format!("{name}: {e}"))?;
        passed.push(name.to_string());
        Ok(())
    };

    let outcome = (|| -> Result<(), String> {
        run(
            "projection idempotent and nonexpansive",
            runner()
                .run(&(seeded_matrix(), 0.1f64..4.0), |((r, c, seed, scale), radius)| {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let a = random_complex(&mut rng, r, c, scale);
                    let b = random_complex(&mut rng, r, c, scale);
                    let pa = project_box(&a, radius).unwrap();
                    let pb = project_box(&b, radius).unwrap();
                    prop_assert_eq!(project_box(&pa, radius).unwrap(), pa.clone());
                    prop_assert!(pa.sub(&pb).unwrap().frob_norm() <= a.sub(&b).unwrap().frob_norm() + 1e-12);
                    Ok(())
                })
                .map_err(|e| e.to_string()),
        )?;
        run(
            "hard decision idempotent and closed",
            runner()
                .run(&(seeded_matrix(), prop::sample::select(vec![4u32, 16, 64])), |((r, c, seed, scale), beta)| {
                    let cons = make_constellation(beta).unwrap();
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let a = random_complex(&mut rng, r, c, scale * cons.box_radius());
                    let s = hard_decision(&a, &cons);
                    prop_assert!(s.as_slice().iter().all(|z| cons.contains(*z)));
                    prop_assert_eq!(hard_decision(&s, &cons), s);
                    Ok(())
                })
                .map_err(|e| e.to_string()),
        )?;
        let admm_case = (1usize..7, 1usize..7, 1usize..13, 1usize..8, any::<u64>(), -5.0f64..25.0, 0.05f64..8.0);
        run(
            "auxiliary iterate stays in the box and dual accumulates X - Z",
            runner()
                .run(&admm_case, |(n, k, td, iterations, seed, snr, scale)| {
                    let scenario = LinkScenario::iid(n, k, td);
                    let cons = scenario.constellation().unwrap();
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let r = scenario.realize(snr, &mut rng).unwrap();
                    let ratio = scenario.noise_ratio(snr).unwrap();
                    let cfg = AdmmConfig {
                        rho: scale * ratio,
                        noise_ratio: ratio,
                        iterations,
                        box_radius: cons.box_radius(),
                    };
                    let mut sum = ComplexMat::zeros(k, td);
                    let mut violations = Vec::new();
                    let run = jed_admm_observed(&r.y, &r.x_t, &cfg, &cons, |s| {
                        let rad = cfg.box_radius;
                        if s.z_d.as_slice().iter().any(|z| z.re.abs() > rad || z.im.abs() > rad) {
                            violations.push(format!("Z outside box at iteration {}", s.iteration));
                        }
                        sum.axpy(Complex64::new(1.0, 0.0), &s.x_d.sub(&s.z_d).unwrap()).unwrap();
                        if s.lambda.max_abs_diff(&sum) > 1e-9 * (1.0 + sum.frob_norm()) {
                            violations.push(format!("dual differs from accumulated residual at iteration {}", s.iteration));
                        }
                    });
                    if run.is_ok() {
                        prop_assert!(violations.is_empty(), "{:?}", violations);
                    }
                    Ok(())
                })
                .map_err(|e| e.to_string()),
        )?;
        run(
            "real recast is a homomorphism",
            runner()
                .run(&(1usize..9, 1usize..9, 1usize..9, any::<u64>()), |(n, k, t, seed)| {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let h = random_complex(&mut rng, n, k, 2.0);
                    let x = random_complex(&mut rng, k, t, 2.0);
                    let lhs = realify(&h.matmul(&x).unwrap(), RealKind::Signal);
                    let rhs = realify(&h, RealKind::Channel).matmul(&realify(&x, RealKind::Signal)).unwrap();
                    prop_assert!(lhs.max_abs_diff(&rhs) <= 1e-12 * (1.0 + lhs.frob_norm()));
                    Ok(())
                })
                .map_err(|e| e.to_string()),
        )?;
        let algorithms = prop::sample::select(vec![Algorithm::JedAm, Algorithm::JedAdmm, Algorithm::Mmse]);
        run(
            "sweep independent of worker count",
            runner()
                .run(&(algorithms, any::<u64>(), 1usize..6), |(alg, seed, trials)| {
                    let mut c = ExperimentConfig::new("det", LinkScenario::iid(3, 2, 8), alg, 3, vec![0.0, 10.0]);
                    c.seed = seed;
                    c.trials = trials;
                    let one = with_threads(Some(1), || run_ber_sweep(&c)).unwrap().unwrap();
                    let four = with_threads(Some(4), || run_ber_sweep(&c)).unwrap().unwrap();
                    prop_assert_eq!(
                        one.points.iter().map(|p| (p.bit_errors, p.bits_total, p.trials_failed)).collect::<Vec<_>>(),
                        four.points.iter().map(|p| (p.bit_errors, p.bits_total, p.trials_failed)).collect::<Vec<_>>()
                    );
                    Ok(())
                })
                .map_err(|e| e.to_string()),
        )?;
        Ok(())
    })();
    match outcome {
        Ok(()) => Ok(format!("{} properties x 1000 cases: {}", passed.len(), passed.join("; "))),
        Err(e) => Err(format!("after {} passing properties, {e}", passed.len())),
    }
}

// Single-antenna Rayleigh link with perfect-CSI ZF against the closed form.
// One symbol per block, so every bit sees its own fade.
fn criterion_closed_form() -> Outcome {
    let mut c = ExperimentConfig::new("rayleigh", LinkScenario::iid(1, 1, 1), Algorithm::Zf, 1, vec![0.0, 5.0, 10.0]);
    c.trials = 400_000;
    c.seed = SEED;
    let r = run_ber_sweep(&c).unwrap();
    let es = make_constellation(4).unwrap().energy_per_symbol();
    let mut lines = Vec::new();
    let mut ok = true;
    for p in &r.points {
        let sigma_v_sq = es / 10f64.powf(p.snr_db / 10.0);
        let gamma = (es / 2.0) / sigma_v_sq * c.scenario.channel.sigma_h_sq;
        let theory = 0.5 * (1.0 - (gamma / (1.0 + gamma)).sqrt());
        let z = (p.ber - theory) / p.stderr;
        ok &= z.abs() <= SIGMAS && p.trials_failed == 0;
        lines.push(format!("{} dB {:.4e} vs {theory:.4e} ({z:+.2} se)", p.snr_db, p.ber));
    }
    check(ok, lines.join("; "))
}

const CRITERIA: [Criterion; 10] = [
    ("flops model", criterion_flops),
    ("unfolded reduces to JED-ADMM", criterion_reduction),
    ("gradients match finite differences", criterion_gradients),
    ("noiseless exactness", criterion_noiseless),
    ("penalty ordering 32x32", criterion_penalty),
    ("ADMM L=10 beats AM L=50", criterion_budget),
    ("overloaded 64x80", criterion_overloaded),
    ("trained unfolded vs ADMM", criterion_unfolded),
    ("invariants", criterion_invariants),
    ("Rayleigh ZF closed form", criterion_closed_form),
];

fn main() -> ExitCode {
    let selected: Vec<usize> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .filter_map(|a| a.parse().ok())
        .collect();
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    let mut ran = 0;
    for (i, (name, f)) in CRITERIA.iter().enumerate() {
        let id = i + 1;
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("criterion {id:>2} {name}: PASS [{secs:.1}s] {d}"),
            Err(d) => {
                failed += 1;
                println!("criterion {id:>2} {name}: FAIL [{secs:.1}s] {d}");
            }
        }
    }
    println!("acceptance: {} of {ran} criteria passed", ran - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
