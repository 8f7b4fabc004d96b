//! Acceptance gate: each test pins one end-to-end behavioral guarantee of
//! the solver stack at a fixed tolerance and prints a single
//! `ACCEPTANCE <n> <name>: PASS|FAIL (...)` line with the measured values
//! before asserting. Run with
//!   cargo test -p skaczmarz --test acceptance -- --nocapture
//! to see the lines for passing criteria too (the harness only shows
//! captured output of failing tests).
//!
//! The tests serialize on a shared lock so each criterion's runtime limit
//! is measured without contention from its neighbours.

use std::sync::{Mutex, MutexGuard};
use std::time::Instant;

use skaczmarz::numerics::{dot, norm2};
use skaczmarz::precond::{
    build_sketched_preconditioner, coherence, condition_number, exact_preconditioner, kappa_f,
};
use skaczmarz::problems::{
    add_noise, default_n_rays, gen_parallel_tomo, gen_rff_problem, gen_random_conditioned,
    GeneratedProblem, DEFAULT_N_ANGLES, PROBLEM_STREAM,
};
use skaczmarz::sampling::{MatrixRowSource, RngStream, RowSamplerKind};
use skaczmarz::solver::{
    fine_tuned_solve, kaczmarz_solve, kaczmarz_step, preconditioned_kaczmarz_solve,
    theoretical_bound, ConvergenceProbe, SolveConfig, SKETCH_STREAM,
};
use skaczmarz::DenseMatrix;

static GATE: Mutex<()> = Mutex::new(());

fn gate() -> MutexGuard<'static, ()> {
    // A criterion that fails poisons the lock; the rest still run.
    GATE.lock().unwrap_or_else(|e| e.into_inner())
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    assert!(!v.is_empty());
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn conditioned(m: usize, n: usize, cond: f64, seed: u64) -> GeneratedProblem {
    let mut rng = RngStream::new(seed, PROBLEM_STREAM);
    gen_random_conditioned(m, n, cond, &mut rng).unwrap()
}

fn cfg_iters(max_iters: u64, eval_every: usize, sampler: RowSamplerKind, seed: u64) -> SolveConfig {
    SolveConfig {
        sampler,
        max_iters: Some(max_iters),
        time_budget_seconds: None,
        target_rel_error: None,
        eval_every,
        seed,
    }
}

/// Small random matrices with varied shapes for the coherence checks; every
/// third one gets a spiked row so the roster covers the high-coherence end.
fn coherence_roster() -> Vec<(String, DenseMatrix)> {
    (0..50u64)
        .map(|s| {
            let mut rng = RngStream::new(s, 11);
            let m = 12 + (s as usize * 13) % 108;
            let n = 2 + (s as usize * 5) % 9;
            let mut a = DenseMatrix::from_fn(m, n, |_, _| rng.standard_normal());
            if s % 3 == 2 {
                for v in a.row_mut(0) {
                    *v *= 50.0;
                }
            }
            (format!("gauss_{m}x{n}_s{s}"), a)
        })
        .collect()
}

// 1. The optimal right preconditioner from the full QR factorization makes
//    the transformed system perfectly conditioned: k = 1 and the scaled
//    condition number equals sqrt(n).
#[test]
fn acceptance_01_exact_preconditioner_optimality() {
    let _g = gate();
    let t = Instant::now();
    let (m, n, cond) = (500, 25, 1e4);
    let mut worst_k = 0.0f64;
    let mut worst_kf = 0.0f64;
    for seed in 0..20u64 {
        let p = conditioned(m, n, cond, seed);
        let pstar = exact_preconditioner(&p.a).unwrap();
        let ap = p.a.matmul(&pstar).unwrap();
        let k = condition_number(&ap).unwrap();
        let kf = kappa_f(&ap).unwrap();
        worst_k = worst_k.max((k - 1.0).abs());
        worst_kf = worst_kf.max((kf - 5.0).abs() / 5.0);
    }
    let el = t.elapsed().as_secs_f64();
    let pass = worst_k <= 1e-8 && worst_kf <= 1e-6 && el < 10.0;
    println!(
        "ACCEPTANCE 1 exact preconditioner optimality: {} \
         (20 systems {m}x{n} cond {cond:.0e}: max |k(AP)-1| = {worst_k:.3e}, \
         max rel dev of kappa_F(AP) from 5 = {worst_kf:.3e}, {el:.1}s)",
        verdict(pass)
    );
    assert!(worst_k <= 1e-8, "k(A P*) deviates from 1 by {worst_k:.3e}");
    assert!(
        worst_kf <= 1e-6,
        "kappa_F(A P*) deviates from 5 by {worst_kf:.3e} relative"
    );
    assert!(el < 10.0, "runtime {el:.1}s exceeds 10s");
}

// 2. A sketch that keeps every row reproduces the exact preconditioner.
#[test]
fn acceptance_02_full_sketch_matches_exact_preconditioner() {
    let _g = gate();
    let t = Instant::now();
    let p = conditioned(500, 25, 1e4, 0);
    let src = MatrixRowSource::new(&p.a, &p.b).unwrap();
    let gamma = p.a.rows() as f64 / p.a.cols() as f64;
    let mut rng = RngStream::new(0, SKETCH_STREAM);
    let pre = build_sketched_preconditioner(&src, gamma, &mut rng).unwrap();
    let exact = exact_preconditioner(&p.a).unwrap();
    let max_diff = pre
        .matrix()
        .as_slice()
        .iter()
        .zip(exact.as_slice())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    let el = t.elapsed().as_secs_f64();
    let pass = pre.r == p.a.rows() && !pre.used_pseudoinverse && max_diff <= 1e-10 && el < 5.0;
    println!(
        "ACCEPTANCE 2 full-sketch equivalence: {} \
         (r = {} of m = {}, max entrywise diff = {max_diff:.3e}, {el:.1}s)",
        verdict(pass),
        pre.r,
        p.a.rows()
    );
    assert_eq!(pre.r, p.a.rows(), "full sketch must keep every row");
    assert!(!pre.used_pseudoinverse);
    assert!(
        max_diff <= 1e-10,
        "full-sketch preconditioner differs from exact by {max_diff:.3e}"
    );
    assert!(el < 5.0, "runtime {el:.1}s exceeds 5s");
}

// 3. The expected squared error under squared-norm sampling contracts at
//    least as fast as (1 - kappa_F^-2)^k, up to 10% sampling slack in the
//    empirical mean over 200 runs.
#[test]
fn acceptance_03_expected_error_contraction_rate() {
    let _g = gate();
    let t = Instant::now();
    let p = conditioned(400, 20, 50.0, 0);
    let src = MatrixRowSource::new(&p.a, &p.b).unwrap();
    let xs = p.x_star.as_ref().unwrap();
    let xs_norm = norm2(xs.as_slice());
    let kf = kappa_f(&p.a).unwrap();
    let probe = ConvergenceProbe::with_x_star(xs.as_slice());

    const SEEDS: u64 = 200;
    const STRIDE: u64 = 400;
    const STEPS: usize = 10;
    let mut mean_sq = [0.0f64; STEPS + 1];
    for seed in 0..SEEDS {
        let cfg = cfg_iters(
            STRIDE * STEPS as u64,
            STRIDE as usize,
            RowSamplerKind::SquaredNorm,
            seed,
        );
        let r = kaczmarz_solve(&src, &cfg, &probe).unwrap();
        assert_eq!(r.trace.len(), STEPS + 1);
        for rec in &r.trace {
            let e = rec.rel_error.unwrap() * xs_norm;
            mean_sq[(rec.iter / STRIDE) as usize] += e * e / SEEDS as f64;
        }
    }
    let mut worst_ratio = 0.0f64;
    let mut report = String::new();
    for (i, &mean) in mean_sq.iter().enumerate() {
        let k = i as u64 * STRIDE;
        let bound = theoretical_bound(kf, k, xs_norm * xs_norm);
        worst_ratio = worst_ratio.max(mean / bound);
        if i % 5 == 0 {
            report.push_str(&format!(" k={k}: {:.3}", mean / bound));
        }
    }
    let el = t.elapsed().as_secs_f64();
    let pass = worst_ratio <= 1.1 && el < 60.0;
    println!(
        "ACCEPTANCE 3 expected contraction rate: {} \
         (kappa_F = {kf:.2}, worst mean/bound ratio = {worst_ratio:.4} across k = 0..4000,\
         {report}, {el:.1}s)",
        verdict(pass)
    );
    assert!(
        worst_ratio <= 1.1,
        "empirical mean squared error exceeds 1.1x the rate bound (ratio {worst_ratio:.4})"
    );
    assert!(el < 60.0, "runtime {el:.1}s exceeds 60s");
}

// 4. The scaled condition number never exceeds sqrt(n) times the spectral
//    one, on every matrix the suite generates.
#[test]
fn acceptance_04_scaled_condition_number_bound() {
    let _g = gate();
    let t = Instant::now();
    let mut mats: Vec<(String, DenseMatrix)> = Vec::new();
    for seed in 0..20u64 {
        mats.push((format!("cond1e4_s{seed}"), conditioned(500, 25, 1e4, seed).a));
    }
    mats.push(("cond50_s0".into(), conditioned(400, 20, 50.0, 0).a));
    for seed in 0..10u64 {
        mats.push((
            format!("cond1e5_s{seed}"),
            conditioned(2000, 50, 1e5, seed).a,
        ));
    }
    for d in [3usize, 5, 10, 20] {
        for seed in 0..10u64 {
            let mut rng = RngStream::new(seed, PROBLEM_STREAM);
            let p = gen_rff_problem(2000, d, 1.0, &mut rng).unwrap();
            mats.push((format!("rff_d{d}_s{seed}"), p.a));
        }
    }
    mats.push((
        "tomo_q16".into(),
        gen_parallel_tomo(16, DEFAULT_N_ANGLES, default_n_rays(16)).unwrap().a,
    ));
    mats.extend(coherence_roster());

    let mut worst = f64::NEG_INFINITY;
    let mut worst_label = String::new();
    for (label, a) in &mats {
        let kf = kappa_f(a).unwrap();
        let k = condition_number(a).unwrap();
        let margin = kf - ((a.cols() as f64).sqrt() * k + 1e-9);
        if margin > worst {
            worst = margin;
            worst_label = label.clone();
        }
    }
    let el = t.elapsed().as_secs_f64();
    let pass = worst <= 0.0;
    println!(
        "ACCEPTANCE 4 scaled condition number bound: {} \
         ({} matrices, worst kappa_F - (sqrt(n) k + 1e-9) = {worst:.3e} on {worst_label}, {el:.1}s)",
        verdict(pass),
        mats.len()
    );
    assert!(
        worst <= 0.0,
        "kappa_F exceeds sqrt(n) * k + 1e-9 on {worst_label} by {worst:.3e}"
    );
}

// 5. Oversampling ladder on an ill-conditioned dense system under uniform
//    sampling at a fixed iteration budget: gamma 3 beats gamma 2 beats
//    plain, with gamma 3 sub-1e-8 while plain is still above 1e-3.
#[test]
fn acceptance_05_oversampling_ladder_on_illconditioned_system() {
    let _g = gate();
    let t = Instant::now();
    let (m, n, cond) = (2000, 50, 1e5);
    let iters = 40 * m as u64;
    let (mut plain, mut g1, mut g2, mut g3) = (vec![], vec![], vec![], vec![]);
    for seed in 0..10u64 {
        let p = conditioned(m, n, cond, seed);
        let src = MatrixRowSource::new(&p.a, &p.b).unwrap();
        let xs = p.x_star.as_ref().unwrap();
        let probe = ConvergenceProbe::with_x_star(xs.as_slice());
        let cfg = cfg_iters(iters, iters as usize, RowSamplerKind::Uniform, seed);
        plain.push(
            kaczmarz_solve(&src, &cfg, &probe)
                .unwrap()
                .final_rel_error
                .unwrap(),
        );
        for (g, sink) in [(1.0, &mut g1), (2.0, &mut g2), (3.0, &mut g3)] {
            let (r, _) = preconditioned_kaczmarz_solve(&src, g, &cfg, &probe).unwrap();
            sink.push(r.final_rel_error.unwrap());
        }
    }
    let (mp, m1, m2, m3) = (median(plain), median(g1), median(g2), median(g3));
    let el = t.elapsed().as_secs_f64();
    let ladder = m3 < m2 && m2 < mp;
    let levels = m3 <= 1e-8 && mp >= 1e-3;
    let pass = ladder && levels && el < 120.0;
    println!(
        "ACCEPTANCE 5 oversampling ladder at 40m uniform steps: {} \
         (medians over 10 seeds: plain = {mp:.3e}, g1 = {m1:.3e}, g2 = {m2:.3e}, g3 = {m3:.3e}; \
         g3<g2: {}, g2<plain: {}, g3<=1e-8: {}, plain>=1e-3: {}; {el:.1}s)",
        verdict(pass),
        m3 < m2,
        m2 < mp,
        m3 <= 1e-8,
        mp >= 1e-3
    );
    assert!(
        m3 < m2,
        "median gamma-3 error {m3:.3e} is not below gamma-2's {m2:.3e}: both runs sit on the \
         rounding floor of the recovered iterate at this budget, and the floor does not order by \
         oversampling"
    );
    assert!(m2 < mp, "median gamma-2 error {m2:.3e} not below plain {mp:.3e}");
    assert!(m3 <= 1e-8, "median gamma-3 error {m3:.3e} above 1e-8");
    assert!(mp >= 1e-3, "median plain error {mp:.3e} below 1e-3");
    assert!(el < 120.0, "runtime {el:.1}s exceeds 120s");
}

// 6. Noise floors: the preconditioned steady state scales with the noise
//    level, sits below plain at sigma = 1e-4, and within 2x of plain at
//    sigma = 1e-1.
#[test]
fn acceptance_06_noise_floor_scaling() {
    let _g = gate();
    let t = Instant::now();
    let (m, n, cond) = (2000, 50, 1e5);
    let iters = 40 * m as u64;
    let sigmas = [1e-4, 1e-3, 1e-2, 1e-1];
    let mut plain_med = Vec::new();
    let mut g3_med = Vec::new();
    for &sigma in &sigmas {
        let (mut plain, mut g3) = (vec![], vec![]);
        for seed in 0..10u64 {
            let mut rng = RngStream::new(seed, PROBLEM_STREAM);
            let p = gen_random_conditioned(m, n, cond, &mut rng).unwrap();
            let p = add_noise(p, sigma, &mut rng).unwrap();
            let src = MatrixRowSource::new(&p.a, &p.b).unwrap();
            let xs = p.x_star.as_ref().unwrap();
            let probe = ConvergenceProbe::with_x_star(xs.as_slice());
            let cfg = cfg_iters(iters, iters as usize, RowSamplerKind::Uniform, seed);
            plain.push(
                kaczmarz_solve(&src, &cfg, &probe)
                    .unwrap()
                    .final_rel_error
                    .unwrap(),
            );
            let (r, _) = preconditioned_kaczmarz_solve(&src, 3.0, &cfg, &probe).unwrap();
            g3.push(r.final_rel_error.unwrap());
        }
        plain_med.push(median(plain));
        g3_med.push(median(g3));
    }
    let monotone = g3_med.windows(2).all(|w| w[0] < w[1]);
    let beats_at_low = g3_med[0] < plain_med[0];
    let ratio_at_high = g3_med[3].max(plain_med[3]) / g3_med[3].min(plain_med[3]);
    let el = t.elapsed().as_secs_f64();
    let pass = monotone && beats_at_low && ratio_at_high < 2.0 && el < 180.0;
    println!(
        "ACCEPTANCE 6 noise floor scaling: {} \
         (sigma = 1e-4..1e-1: g3 medians = [{:.3e}, {:.3e}, {:.3e}, {:.3e}], \
         plain medians = [{:.3e}, {:.3e}, {:.3e}, {:.3e}]; monotone in sigma: {monotone}, \
         g3 beats plain at 1e-4: {beats_at_low}, ratio at 1e-1 = {ratio_at_high:.2}; {el:.1}s)",
        verdict(pass),
        g3_med[0],
        g3_med[1],
        g3_med[2],
        g3_med[3],
        plain_med[0],
        plain_med[1],
        plain_med[2],
        plain_med[3]
    );
    assert!(
        monotone,
        "gamma-3 steady state is not monotone in sigma: {g3_med:?}"
    );
    assert!(
        beats_at_low,
        "at sigma = 1e-4 the preconditioned floor {:.3e} does not beat plain's {:.3e}: the \
         transformed system's least-squares displacement scales like kappa(A) times the noise, \
         which at cond 1e5 puts the floor far above an unconverged plain run",
        g3_med[0],
        plain_med[0]
    );
    assert!(
        ratio_at_high < 2.0,
        "at sigma = 1e-1 the floors differ by {ratio_at_high:.1}x, not < 2x \
         (g3 {:.3e} vs plain {:.3e})",
        g3_med[3],
        plain_med[3]
    );
    assert!(el < 180.0, "runtime {el:.1}s exceeds 180s");
}

// 7. Tomography: plain wins the early phase, the gamma-2 preconditioner wins
//    by 60m iterations, and the gamma-1 sketch exercises the pseudoinverse
//    fallback without failing.
#[test]
fn acceptance_07_tomography_crossing_and_fallback() {
    let _g = gate();
    let t = Instant::now();
    let q = 16;
    let p = gen_parallel_tomo(q, DEFAULT_N_ANGLES, default_n_rays(q)).unwrap();
    let m = p.a.rows();
    let src = MatrixRowSource::new(&p.a, &p.b).unwrap();
    let xs = p.x_star.as_ref().unwrap();
    let probe = ConvergenceProbe::with_x_star(xs.as_slice());
    let iters = 60 * m as u64;
    let (mut plain_early, mut g2_early) = (vec![], vec![]);
    let (mut plain_final, mut g2_final) = (vec![], vec![]);
    let mut pinv_seeds = 0;
    for seed in 0..5u64 {
        let cfg = cfg_iters(iters, m, RowSamplerKind::SquaredNorm, seed);
        let r = kaczmarz_solve(&src, &cfg, &probe).unwrap();
        plain_early.push(r.trace[1].rel_error.unwrap());
        plain_final.push(r.final_rel_error.unwrap());
        let (r, _) = preconditioned_kaczmarz_solve(&src, 2.0, &cfg, &probe).unwrap();
        g2_early.push(r.trace[1].rel_error.unwrap());
        g2_final.push(r.final_rel_error.unwrap());
        let mut rng = RngStream::new(seed, SKETCH_STREAM);
        let pre = build_sketched_preconditioner(&src, 1.0, &mut rng).unwrap();
        if pre.used_pseudoinverse {
            pinv_seeds += 1;
        }
    }
    // The fallback path must also survive a full solve.
    let cfg = cfg_iters(2 * m as u64, m, RowSamplerKind::SquaredNorm, 0);
    let g1 = preconditioned_kaczmarz_solve(&src, 1.0, &cfg, &probe);
    let g1_ok = g1.is_ok();
    let g1_final = g1
        .as_ref()
        .ok()
        .and_then(|(r, _)| r.final_rel_error)
        .unwrap_or(f64::NAN);

    let (pe, ge) = (median(plain_early), median(g2_early));
    let (pf, gf) = (median(plain_final), median(g2_final));
    let el = t.elapsed().as_secs_f64();
    let pass = pe < ge && gf < pf && pinv_seeds >= 1 && g1_ok && el < 300.0;
    println!(
        "ACCEPTANCE 7 tomography crossing and fallback: {} \
         (medians over 5 seeds at k=m: plain = {pe:.3e} vs g2 = {ge:.3e}; at k=60m: \
         plain = {pf:.3e} vs g2 = {gf:.3e}; pseudoinverse fallback on {pinv_seeds}/5 gamma-1 \
         sketches, gamma-1 solve ok: {g1_ok} (final {g1_final:.3e}); {el:.1}s)",
        verdict(pass)
    );
    assert!(
        pe < ge,
        "plain should lead at k=m: plain {pe:.3e} vs g2 {ge:.3e}"
    );
    assert!(
        gf < pf,
        "g2 should lead at k=60m: g2 {gf:.3e} vs plain {pf:.3e}"
    );
    assert!(pinv_seeds >= 1, "gamma-1 sketch never hit the fallback");
    assert!(g1_ok, "gamma-1 solve failed: {:?}", g1.err());
    assert!(el < 300.0, "runtime {el:.1}s exceeds 300s");
}

// 8. Fine-tuning with the switch at 25% of the budget matches the better of
//    plain and preconditioned-from-start within 10% at the same wall time.
//
//    At this budget every strategy that wins has already saturated at its
//    rounding floor, so a single 5-seed comparison is decided by where the
//    wall clock happens to cut each run (observed spread of the ratio is
//    about +-20% across identical repetitions, wider than the 10% slack).
//    The protocol and tolerance stay as stated; the measurement repeats 13
//    times and takes the median repetition to suppress that timing jitter.
#[test]
fn acceptance_08_fine_tuning_matches_best_single_strategy() {
    let _g = gate();
    let t = Instant::now();
    let q = 16;
    let p = gen_parallel_tomo(q, DEFAULT_N_ANGLES, default_n_rays(q)).unwrap();
    let m = p.a.rows();
    let src = MatrixRowSource::new(&p.a, &p.b).unwrap();
    let xs = p.x_star.as_ref().unwrap();
    let probe = ConvergenceProbe::with_x_star(xs.as_slice());
    let total = 0.5;
    let tau = 0.25 * total;
    const REPS: usize = 13;
    let mut rep_ratios = Vec::new();
    let mut switched = 0;
    let mut last_ft = 0.0;
    let mut last_min = 0.0;
    for _rep in 0..REPS {
        let (mut fts, mut mins) = (vec![], vec![]);
        for seed in 0..5u64 {
            let cfg = SolveConfig {
                sampler: RowSamplerKind::SquaredNorm,
                max_iters: None,
                time_budget_seconds: Some(total),
                target_rel_error: None,
                eval_every: 4 * m,
                seed,
            };
            let plain = kaczmarz_solve(&src, &cfg, &probe)
                .unwrap()
                .final_rel_error
                .unwrap();
            let (r, _) = preconditioned_kaczmarz_solve(&src, 2.0, &cfg, &probe).unwrap();
            let pre = r.final_rel_error.unwrap();
            let (r, sw) = fine_tuned_solve(&src, 2.0, tau, &cfg, &probe).unwrap();
            if sw.is_some() {
                switched += 1;
            }
            fts.push(r.final_rel_error.unwrap());
            mins.push(plain.min(pre));
        }
        last_ft = median(fts);
        last_min = median(mins);
        rep_ratios.push(last_ft / last_min);
    }
    let lo = rep_ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = rep_ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let ratio = median(rep_ratios);
    let el = t.elapsed().as_secs_f64();
    let pass = switched == 5 * REPS && ratio <= 1.1 && el < 300.0;
    println!(
        "ACCEPTANCE 8 fine-tuning matches best strategy: {} \
         (budget {total}s, switch at {tau}s, 5 seeds x {REPS} repetitions: median ratio \
         fine-tuned/best-of-two = {ratio:.3} (rep spread {lo:.3}..{hi:.3}, last rep \
         ft = {last_ft:.3e} vs min = {last_min:.3e}); switched on {switched}/{}; {el:.1}s)",
        verdict(pass),
        5 * REPS
    );
    assert_eq!(switched, 5 * REPS, "every run should pass its switch point");
    assert!(
        ratio <= 1.1,
        "median fine-tuned error exceeds 1.1x the best single strategy (ratio {ratio:.3})"
    );
    assert!(el < 300.0, "runtime {el:.1}s exceeds 300s");
}

// 9. Random-feature regression: the least-squares floor drops as the feature
//    count grows, and on the d = 5 system the gamma-2 run drives the
//    residual to 1e-6 within a budget where plain has not.
#[test]
fn acceptance_09_rff_residual_floors() {
    let _g = gate();
    let t = Instant::now();
    let ds = [3usize, 5, 10, 20];
    let mut floors = Vec::new();
    for &d in &ds {
        let mut f = Vec::new();
        for seed in 0..10u64 {
            let mut rng = RngStream::new(seed, PROBLEM_STREAM);
            let p = gen_rff_problem(2000, d, 1.0, &mut rng).unwrap();
            f.push(p.metadata["lsq_rel_residual"].parse::<f64>().unwrap());
        }
        floors.push(median(f));
    }
    let decreasing = floors.windows(2).all(|w| w[0] > w[1]);

    let mut rng = RngStream::new(0, PROBLEM_STREAM);
    let p = gen_rff_problem(2000, 5, 1.0, &mut rng).unwrap();
    let src = MatrixRowSource::new(&p.a, &p.b).unwrap();
    let b_norm = p.b.norm2();
    let resid = |x: &[f64]| {
        let ax = p.a.matvec(x).unwrap();
        ax.as_slice()
            .iter()
            .zip(p.b.as_slice())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
            / b_norm
    };
    let probe = ConvergenceProbe::none().residual_fn(resid);
    let cfg = cfg_iters(200_000, 20_000, RowSamplerKind::SquaredNorm, 0);
    let reached = |r: &skaczmarz::SolveResult| {
        r.trace
            .iter()
            .any(|rec| rec.residual.is_some_and(|v| v <= 1e-6))
    };
    let rp = kaczmarz_solve(&src, &cfg, &probe).unwrap();
    let (rg, _) = preconditioned_kaczmarz_solve(&src, 2.0, &cfg, &probe).unwrap();
    let plain_reached = reached(&rp);
    let g2_reached = reached(&rg);
    let plain_final = rp.trace.last().unwrap().residual.unwrap();
    let g2_final = rg.trace.last().unwrap().residual.unwrap();

    let el = t.elapsed().as_secs_f64();
    let pass = decreasing && g2_reached && !plain_reached && el < 120.0;
    println!(
        "ACCEPTANCE 9 rff residual floors: {} \
         (lsq floor medians d=3,5,10,20: [{:.3e}, {:.3e}, {:.3e}, {:.3e}], decreasing: \
         {decreasing}; d=5 run to 200k iters: g2 reached 1e-6: {g2_reached} (final {g2_final:.3e}), \
         plain reached: {plain_reached} (final {plain_final:.3e}); {el:.1}s)",
        verdict(pass),
        floors[0],
        floors[1],
        floors[2],
        floors[3]
    );
    assert!(
        decreasing,
        "least-squares floors do not strictly decrease with d: {floors:?}"
    );
    assert!(
        g2_reached,
        "gamma-2 never reached rel-residual 1e-6 (final {g2_final:.3e}): the d = 5 system's own \
         least-squares floor is {:.3e}, three decades above the target, so no row-action solver \
         can cross it",
        floors[1]
    );
    assert!(
        !plain_reached,
        "plain unexpectedly reached 1e-6 (final {plain_final:.3e})"
    );
    assert!(el < 120.0, "runtime {el:.1}s exceeds 120s");
}

// 10. Step-level invariants over ten thousand random projections apiece:
//     the updated iterate lands on the row's hyperplane, and on consistent
//     systems the distance to the solution never grows.
#[test]
fn acceptance_10_step_invariants() {
    let _g = gate();
    let t = Instant::now();

    let mut rng = RngStream::new(42, 7);
    let mut worst_member = 0.0f64;
    for _ in 0..10_000 {
        let n = 2 + rng.uniform_index(38);
        let row: Vec<f64> = (0..n).map(|_| rng.standard_normal()).collect();
        let rhs = rng.standard_normal();
        let mut x: Vec<f64> = (0..n).map(|_| rng.standard_normal()).collect();
        kaczmarz_step(&mut x, &row, rhs).unwrap();
        let resid = (dot(&row, &x) - rhs).abs();
        let scale = 1.0 + norm2(&row) * norm2(&x) + rhs.abs();
        worst_member = worst_member.max(resid / scale);
    }

    let systems = [
        (60, 8, 10.0),
        (100, 10, 100.0),
        (200, 16, 1000.0),
        (80, 12, 1e4),
        (50, 6, 2.0),
    ];
    // Non-increase holds down to the rounding floor of the iterate: allow
    // 1e-12 relative slack per step plus 1e-14 absolute jitter in relative
    // error units (a few dozen ulps of x*, where distances stop being
    // meaningful).
    let mut worst_excess = f64::NEG_INFINITY;
    let mut worst_at = String::new();
    let mut steps_checked = 0u64;
    for (i, &(m, n, cond)) in systems.iter().enumerate() {
        let p = conditioned(m, n, cond, i as u64);
        let src = MatrixRowSource::new(&p.a, &p.b).unwrap();
        let xs = p.x_star.as_ref().unwrap();
        let probe = ConvergenceProbe::with_x_star(xs.as_slice());
        let cfg = cfg_iters(2000, 1, RowSamplerKind::SquaredNorm, i as u64);
        let r = kaczmarz_solve(&src, &cfg, &probe).unwrap();
        for w in r.trace.windows(2) {
            let (prev, next) = (w[0].rel_error.unwrap(), w[1].rel_error.unwrap());
            let excess = next - (prev * (1.0 + 1e-12) + 1e-14);
            if excess > worst_excess {
                worst_excess = excess;
                worst_at = format!("{prev:.2e} -> {next:.2e} on {m}x{n} cond {cond:.0e}");
            }
            steps_checked += 1;
        }
    }

    let el = t.elapsed().as_secs_f64();
    let pass = worst_member <= 1e-12 && worst_excess <= 0.0 && el < 10.0;
    println!(
        "ACCEPTANCE 10 step invariants: {} \
         (10000 projections: worst scaled hyperplane residual = {worst_member:.3e}; \
         {steps_checked} consecutive steps: worst envelope excess = {worst_excess:.3e} \
         ({worst_at}); {el:.1}s)",
        verdict(pass)
    );
    assert!(
        worst_member <= 1e-12,
        "hyperplane residual {worst_member:.3e} above 1e-12"
    );
    assert!(
        worst_excess <= 0.0,
        "distance to x* grew past the rounding envelope: {worst_at}"
    );
    assert!(steps_checked >= 10_000);
    assert!(el < 10.0, "runtime {el:.1}s exceeds 10s");
}

// 11. Coherence stays between n/m and 1 on varied random matrices and the
//     tomography system.
#[test]
fn acceptance_11_coherence_bounds() {
    let _g = gate();
    let t = Instant::now();
    let mut worst_low = f64::INFINITY;
    let mut worst_high = f64::NEG_INFINITY;
    let mut checked = 0;
    let mut check = |label: &str, a: &DenseMatrix| {
        let mu = coherence(a).unwrap();
        let lo = a.cols() as f64 / a.rows() as f64;
        worst_low = worst_low.min(mu - lo);
        worst_high = worst_high.max(mu - 1.0);
        checked += 1;
        assert!(
            mu >= lo - 1e-12 && mu <= 1.0 + 1e-12,
            "coherence {mu} outside [{lo}, 1] on {label}"
        );
        mu
    };
    for (label, a) in coherence_roster() {
        check(&label, &a);
    }
    let p = gen_parallel_tomo(16, DEFAULT_N_ANGLES, default_n_rays(16)).unwrap();
    let tomo_mu = check("tomo_q16", &p.a);
    let tomo_lo = p.a.cols() as f64 / p.a.rows() as f64;

    let el = t.elapsed().as_secs_f64();
    let pass = worst_low >= -1e-12 && worst_high <= 1e-12 && el < 10.0;
    println!(
        "ACCEPTANCE 11 coherence bounds: {} \
         ({checked} matrices: min mu - n/m = {worst_low:.3e}, max mu - 1 = {worst_high:.3e}; \
         tomography mu = {tomo_mu:.4} in [{tomo_lo:.4}, 1]; {el:.1}s)",
        verdict(pass)
    );
    assert!(el < 10.0, "runtime {el:.1}s exceeds 10s");
}
