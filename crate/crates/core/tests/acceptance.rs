//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any failed. Tolerances and limits are fixed here.

mod common;

use std::time::{Duration, Instant};

use common::*;
use nalgebra::DMatrix;
use secrecy_core::io::{run_batch, BatchSpec};
use secrecy_core::kkt_newton::{assemble, newton_solve, newton_step};
use secrecy_core::rng::NormalSource;
use secrecy_core::*;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn run(id: usize, name: &str, limit: Duration, check: impl FnOnce() -> Verdict) -> bool {
    let start = Instant::now();
    let v = match std::panic::catch_unwind(std::panic::AssertUnwindSafe(check)) {
        Ok(v) => v,
        Err(e) => {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            verdict(false, format!("panicked: {}", msg.chars().take(300).collect::<String>()))
        }
    };
    let elapsed = start.elapsed();
    let in_time = elapsed <= limit;
    let pass = v.pass && in_time;
    let timing = if in_time { String::new() } else { format!(" [over time limit {limit:?}]") };
    println!(
        "criterion {id:>2} {:<4} {name}: {} ({elapsed:.2?}){timing}",
        if pass { "PASS" } else { "FAIL" },
        v.detail
    );
    pass
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn c1_eigenvalues() -> Verdict {
    let ch = example_channel();
    let start = Instant::now();
    let class = classify_degraded(&ch);
    let took = start.elapsed();
    let (e0, e1) = (class.eigenvalues[0], class.eigenvalues[1]);
    let ok = (e0 - 0.395).abs() <= 5e-3 && (e1 + 3.293).abs() <= 5e-3 && took < Duration::from_millis(1);
    verdict(ok, format!("eig(W1-W2) = {{{e0:.4}, {e1:.4}}} in {took:.2?}"))
}

fn c2_newton_speed() -> Verdict {
    let ch = example_channel();
    let cfg = SolverConfig { alpha: 0.3, beta: 0.5, eps_newton: 1e-10, ..SolverConfig::default() };
    let obj = BarrierObjective::new(&ch, 1e3, 10.0).unwrap();
    let (_, report) = newton_solve(&obj, initial_point(&ch, 10.0).unwrap(), &cfg).unwrap();
    let ok = report.converged && report.iterations <= 25;
    verdict(ok, format!("{} steps to residual {:.2e} (limit 25)", report.iterations, report.final_residual_norm))
}

fn c3_monotone_residual() -> Verdict {
    let cfg = SolverConfig::default();
    let mut g = NormalSource::new(3);
    let (mut steps, mut violations, mut failures) = (0usize, 0usize, 0usize);
    for _ in 0..100 {
        let ch = random_channel(&mut g, 2, 2, 2);
        let mut state = initial_point(&ch, 10.0).unwrap();
        for t in cfg.schedule().stages(4) {
            let obj = BarrierObjective::new(&ch, t, 10.0).unwrap();
            let Ok((next, report)) = newton_solve(&obj, state.clone(), &cfg) else {
                failures += 1;
                break;
            };
            for (k, s) in report.step_sizes.iter().enumerate() {
                steps += 1;
                let (r0, r1) = (report.residual_history[k], report.residual_history[k + 1]);
                if r1 > (1.0 - cfg.alpha * s) * r0 {
                    violations += 1;
                }
            }
            if !report.converged {
                failures += 1;
                break;
            }
            state = next;
        }
    }
    verdict(
        violations == 0 && failures == 0,
        format!("{steps} accepted steps, {violations} violations, {failures} failed solves"),
    )
}

fn c4_derivatives() -> Verdict {
    let mut g = NormalSource::new(4);
    let mut channels = vec![example_channel()];
    for (m, n1, n2) in [(2, 2, 2), (3, 2, 1), (1, 3, 2), (4, 3, 3), (3, 1, 4)] {
        channels.push(random_channel(&mut g, m, n1, n2));
    }
    let (mut eg, mut eh) = (0.0f64, 0.0f64);
    for ch in &channels {
        let (a, b) = check_channel(ch, &mut g);
        eg = eg.max(a);
        eh = eh.max(b);
    }
    verdict(eg <= 1e-5 && eh <= 1e-4, format!("max rel err gradient {eg:.2e} (≤1e-5), Hessian {eh:.2e} (≤1e-4)"))
}

fn c5_definiteness() -> Verdict {
    let mut g = NormalSource::new(5);
    let (mut bad_xx, mut bad_yy, mut bad_kkt) = (0, 0, 0);
    let mut channels = vec![example_channel()];
    for k in 0..9 {
        channels.push(random_channel(&mut g, 1 + k % 4, 1 + k % 3, 1 + (k + 1) % 3));
    }
    for i in 0..200 {
        let ch = &channels[i % channels.len()];
        let t = 10f64.powf(g.uniform() * 5.0);
        let power = 0.1 + 20.0 * g.uniform();
        let norm = 0.95 * g.uniform();
        let obj = BarrierObjective::new(ch, t, power).unwrap();
        let r = random_r(&mut g, ch.m(), power);
        let k21 = random_k21(&mut g, ch.n1(), ch.n2(), norm);
        let d = obj.derivatives(&r, &noise(&k21)).unwrap();
        if d.hess_xx.clone().symmetric_eigen().eigenvalues.max() >= 0.0 {
            bad_xx += 1;
        }
        if d.hess_yy.clone().symmetric_eigen().eigenvalues.min() <= 0.0 {
            bad_yy += 1;
        }
        let state = SaddleState::new(&r, &k21, 0.0);
        if assemble(&obj, &state).and_then(|sys| newton_step(&sys)).is_err() {
            bad_kkt += 1;
        }
    }
    verdict(
        bad_xx + bad_yy + bad_kkt == 0,
        format!("200 points: {bad_xx} hess_xx not ≺ 0, {bad_yy} hess_yy not ≻ 0, {bad_kkt} KKT failures"),
    )
}

fn scalar_channel() -> ChannelPair {
    ChannelPair::new(DMatrix::from_element(1, 1, 2.0), DMatrix::from_element(1, 1, 1.0)).unwrap()
}

fn c6_scalar() -> Verdict {
    let oracle = scalar_grid(4.0, 1.0, 1.0, 100_001);
    let ch = scalar_channel();
    let cfg = SolverConfig::default();
    let auto = solve(&ch, 1.0, SolveMode::Auto, &cfg).unwrap();
    let mm = solve_minimax(&ch, 1.0, &cfg).unwrap();
    let err = (auto.capacity_upper - oracle).abs().max((mm.capacity_upper - oracle).abs());
    verdict(
        err <= 1e-4,
        format!("Cs = {:.6} (auto), {:.6} (minimax), grid {oracle:.6}, max err {err:.1e} (≤1e-4)", auto.capacity_upper, mm.capacity_upper),
    )
}

fn miso_channel() -> ChannelPair {
    ChannelPair::new(DMatrix::from_row_slice(1, 2, &[1.2, 0.4]), DMatrix::from_row_slice(1, 2, &[0.3, 0.9])).unwrap()
}

fn c7_miso() -> Verdict {
    let ch = miso_channel();
    let oracle = beamforming_oracle(&ch, 10.0, 1_000_000);
    let sol = solve_minimax(&ch, 10.0, &SolverConfig::default()).unwrap();
    let err = (sol.capacity_upper - oracle).abs();
    verdict(err <= 1e-5, format!("Cs = {:.8}, beamforming grid {oracle:.8}, err {err:.1e} (≤1e-5)", sol.capacity_upper))
}

fn c8_degraded() -> Verdict {
    let cfg = SolverConfig::default();
    let mut g = NormalSource::new(8);
    let mut worst = 0.0f64;
    for k in 0..10 {
        let ch = degraded_channel(&mut g, 2 + k % 2, 1 + k % 3);
        let power = 1.0 + 9.0 * g.uniform();
        let d = solve_degraded(&ch, power, &cfg).unwrap();
        let mm = solve_minimax(&ch, power, &cfg).unwrap();
        worst = worst.max((d.capacity_upper - mm.capacity_upper).abs());
    }
    // no eavesdropper: H2 = 0, every water-filling mode active
    let h1 = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, -0.2, 0.8]);
    let ch = ChannelPair::new(h1, DMatrix::zeros(1, 2)).unwrap();
    let gains = ch.w1().eigenvalues();
    let wf = water_filling(&gains, 10.0);
    let sol = solve(&ch, 10.0, SolveMode::Auto, &cfg).unwrap();
    let wf_err = (sol.capacity_upper - wf).abs();
    verdict(
        worst <= 1e-5 && wf_err <= 1e-6 && water_filling_modes(&gains, 10.0) == 2,
        format!("degraded vs minimax max diff {worst:.1e} (≤1e-5); water-filling err {wf_err:.1e} (≤1e-6)"),
    )
}

fn c9_gap_bound() -> Verdict {
    let cfg = SolverConfig::default();
    let mut cases: Vec<(String, ChannelPair, f64, f64)> = vec![
        ("scalar".into(), scalar_channel(), 1.0, scalar_grid(4.0, 1.0, 1.0, 100_001)),
        ("miso".into(), miso_channel(), 10.0, beamforming_oracle(&miso_channel(), 10.0, 1_000_000)),
        // one positive eigenvalue of W1 − W2, so rank one is optimal
        ("example".into(), example_channel(), 10.0, beamforming_oracle(&example_channel(), 10.0, 1_000_000)),
    ];
    let h1 = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, -0.2, 0.8]);
    let wf_ch = ChannelPair::new(h1, DMatrix::zeros(1, 2)).unwrap();
    let wf = water_filling(&wf_ch.w1().eigenvalues(), 10.0);
    cases.push(("water-filling".into(), wf_ch, 10.0, wf));
    let mut violations = Vec::new();
    let mut worst_ratio = 0.0f64;
    for (name, ch, power, oracle) in &cases {
        let sol = solve_minimax(ch, *power, &cfg).unwrap();
        let bound = gap_bound(ch.m(), ch.n1(), ch.n2(), sol.t_final);
        let err = (sol.capacity_upper - oracle).abs();
        worst_ratio = worst_ratio.max(err / bound);
        if err > bound {
            violations.push(name.clone());
        }
    }
    verdict(
        violations.is_empty(),
        format!("{} instances, worst |f − Cs| / bound = {worst_ratio:.2e}, violations {violations:?}", cases.len()),
    )
}

fn c10_saddle() -> Verdict {
    let cfg = SolverConfig::default();
    let mut g = NormalSource::new(10);
    let channels = vec![example_channel(), random_channel(&mut g, 3, 2, 2), random_channel(&mut g, 2, 3, 1)];
    let mut worst = f64::NEG_INFINITY;
    let start = Instant::now();
    for ch in &channels {
        let power = 10.0;
        let sol = solve_minimax(ch, power, &cfg).unwrap();
        let k_star = noise(&sol.k21_star);
        let f_star = minimax_objective(ch, &sol.r_star, &k_star).unwrap();
        for _ in 0..100 {
            let eps = g.uniform();
            let r_rand = random_r(&mut g, ch.m(), power);
            let r = SymMat::new(sol.r_star.as_matrix() * (1.0 - eps) + r_rand.as_matrix() * eps).unwrap();
            worst = worst.max(minimax_objective(ch, &r, &k_star).unwrap() - f_star);

            let norm = 0.99 * g.uniform();
            let k_rand = random_k21(&mut g, ch.n1(), ch.n2(), norm);
            let k21 = &sol.k21_star * (1.0 - eps) + k_rand * eps;
            worst = worst.max(f_star - minimax_objective(ch, &sol.r_star, &noise(&k21)).unwrap());
        }
    }
    let per_channel = start.elapsed() / channels.len() as u32;
    verdict(
        worst <= 1e-6 && per_channel < secs(10),
        format!("{} channels × 200 perturbations, max signed violation {worst:.2e} (≤1e-6)", channels.len()),
    )
}

fn c11_batch() -> Verdict {
    let config = SolverConfig { t0: 100.0, mu: 10.0, t_max: 1e5, eps_newton: 1e-10, ..SolverConfig::default() };
    let spec = BatchSpec { m: 4, n1: 3, n2: 3, count: 100, seed: 11, power: 10.0, mode: SolveMode::Minimax, config };
    let jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
    let summary = run_batch(&spec, jobs).unwrap();
    let within = summary.within(60);
    verdict(
        within >= 90,
        format!(
            "{within}/100 within 60 steps; median {:?}, min {:?}, max {:?}, failures {}",
            summary.median_steps, summary.min_steps, summary.max_steps, summary.failures
        ),
    )
}

fn c12_dual() -> Verdict {
    let ch = example_channel();
    let cfg = SolverConfig::default();
    let mut worst = 0.0f64;
    let mut monotone = true;
    let mut detail = Vec::new();
    // 10 is the stated instance; 7.3 is not a bisection midpoint of the bracket
    for power in [10.0, 7.3] {
        let cs = solve(&ch, power, SolveMode::Auto, &cfg).unwrap().capacity_upper;
        let dual = solve_dual(&ch, &DualTarget::new(cs).unwrap(), &cfg).unwrap();
        worst = worst.max((dual.power - power).abs() / power);
        let mut ev = dual.evaluations.clone();
        ev.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        monotone &= ev.windows(2).all(|w| w[1].1 >= w[0].1);
        detail.push(format!("P={power}: Rs={cs:.8} → P*={:.8} ({} solves)", dual.power, dual.evaluations.len()));
    }
    verdict(worst <= 1e-3 && monotone, format!("{}; max rel err {worst:.1e} (≤1e-3)", detail.join(", ")))
}

fn c13_per_antenna() -> Verdict {
    let cfg = SolverConfig::default();
    let cases = [([2.0, 0.5], [1.0, 1.0], [2.0, 3.0]), ([1.5, 1.2], [0.5, 0.9], [1.0, 4.0])];
    let mut worst = 0.0f64;
    let mut cap_ok = true;
    for (a, b, caps) in cases {
        let ch = ChannelPair::new(
            DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&a)),
            DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&b)),
        )
        .unwrap();
        let oracle = parallel_grid(a, b, caps, 500);
        let budget = PerAntennaBudget::new(caps.to_vec(), None).unwrap();
        let sol = solve_per_antenna(&ch, &budget, &cfg).unwrap();
        worst = worst.max((sol.capacity_upper - oracle).abs());
        cap_ok &= (0..2).all(|i| sol.r_star.as_matrix()[(i, i)] <= caps[i] + 1e-12);
    }
    verdict(worst <= 1e-4 && cap_ok, format!("max |Cs − grid| {worst:.1e} (≤1e-4), caps respected: {cap_ok}"))
}

fn c14_upper_bound() -> Verdict {
    let mut g = NormalSource::new(14);
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    for i in 0..1000 {
        let (m, n1, n2) = (1 + i % 4, 1 + (i / 4) % 3, 1 + (i / 12) % 3);
        let ch = random_channel(&mut g, m, n1, n2);
        let (power, norm) = (0.1 + 20.0 * g.uniform(), 0.99 * g.uniform());
        let r = random_r(&mut g, m, power);
        let k = noise(&random_k21(&mut g, n1, n2, norm));
        let gap = secrecy_rate(&ch, &r) - minimax_objective(&ch, &r, &k).unwrap();
        worst = worst.max(gap);
        if gap > 1e-10 {
            violations += 1;
        }
    }
    verdict(violations == 0, format!("1000 pairs, {violations} violations, max C(R) − f(R,K) = {worst:.2e}"))
}

fn main() {
    let results = [
        run(1, "difference-channel eigenvalues", Duration::from_millis(1), c1_eigenvalues),
        run(2, "Newton convergence speed", secs(1), c2_newton_speed),
        run(3, "monotone residual", secs(30), c3_monotone_residual),
        run(4, "derivative correctness", secs(10), c4_derivatives),
        run(5, "definiteness", secs(60), c5_definiteness),
        run(6, "scalar oracle", secs(1), c6_scalar),
        run(7, "MISO beamforming oracle", secs(30), c7_miso),
        run(8, "degraded cross-check", secs(60), c8_degraded),
        run(9, "gap-bound validity", secs(60), c9_gap_bound),
        run(10, "saddle property", secs(30), c10_saddle),
        run(11, "batch step counts", secs(300), c11_batch),
        run(12, "dual self-consistency", secs(30), c12_dual),
        run(13, "per-antenna mode", secs(60), c13_per_antenna),
        run(14, "upper-bound property", secs(60), c14_upper_bound),
    ];
    let passed = results.iter().filter(|p| **p).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
