//! Acceptance suite: each test checks one numbered criterion end to end at
//! its stated tolerance and prints a `criterion N: PASS ...` line with the
//! measured quantities. Budgets on wall-clock time are asserted as well.

use std::time::Instant;

use hytraj::distance::{distance_closed, OracleSpec};
use hytraj::domain::{
    check_inter_jump_time, dwell_margin, DwellKind, DwellTimeSpec, HybridTimeDomain,
};
use hytraj::lyapunov::{
    check_flow_lmis, check_jump_conditions, lyapunov_equation_residual, transition_allowed,
    MonitorOptions, Region, TransitionTrigger,
};
use hytraj::models::{bouncing_ball, dissipative_oscillator, Scenario};
use hytraj::sim::{simulate, Termination};
use hytraj::system::zero_input;
use hytraj::tracking::{closed_loop_simulate, feedback_with_reference, ClosedLoopRun};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn run_closed_loop(scenario: &Scenario) -> ClosedLoopRun {
    let ctrl = scenario.controller().expect("controller builds");
    let ev = scenario.distance_evaluator().expect("evaluator builds");
    closed_loop_simulate(
        &scenario.system,
        &scenario.design,
        &ctrl,
        &ev,
        &scenario.y0,
        scenario.t0,
        scenario.horizon,
        &scenario.sim,
        &MonitorOptions::default(),
    )
    .expect("closed loop runs")
}

/// Uniform pair in the flow-set window `x1 in [0, r], |x2| <= r`.
fn sample_state(rng: &mut ChaCha8Rng, radius: f64) -> DVector<f64> {
    DVector::from_vec(vec![
        rng.gen_range(0.0..radius),
        rng.gen_range(-radius..radius),
    ])
}

#[test]
fn criterion_01_lyapunov_equation() {
    let scenario = bouncing_ball();
    let acl = &scenario.system.a + &scenario.system.b * &scenario.gains.c0;
    let start = Instant::now();
    let residual = lyapunov_equation_residual(&acl, &scenario.design.p0, &DMatrix::identity(2, 2));
    let elapsed = start.elapsed();
    let pass = residual <= 1e-10;
    println!(
        "criterion 01: {} residual {residual:.3e} (<= 1e-10), runtime {elapsed:?} (< 1 ms)",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass);
    assert!(elapsed.as_secs_f64() < 1e-3);
}

#[test]
fn criterion_02_matrix_condition_feasibility() {
    let start = Instant::now();
    let ball = bouncing_ball();
    assert_eq!(ball.design.lambda_c, -0.25);
    assert_eq!(ball.design.lambda_d, 0.0);
    let bj = check_jump_conditions(&ball.system, &ball.design, 1e-9);
    let bf = check_flow_lmis(&ball.system, &ball.design, &ball.gains, 1e-9).unwrap();

    let osc = dissipative_oscillator();
    assert_eq!(osc.design.lambda_c, 0.0);
    let oj = check_jump_conditions(&osc.system, &osc.design, 1e-9);
    let of = check_flow_lmis(&osc.system, &osc.design, &osc.gains, 1e-9).unwrap();
    let elapsed = start.elapsed();

    let ball_ok = bj.eig_margins.iter().all(|&m| m <= 1e-9)
        && bf.eig_margins[..2].iter().all(|&m| m <= 1e-9);
    let osc_equality = oj.eig_margins.iter().all(|&m| m.abs() <= 1e-12);
    let osc_ok = of.eig_margins.iter().all(|&m| m <= 1e-9);
    let pass = ball_ok && osc_equality && osc_ok;
    println!(
        "criterion 02: {} ball jump {:?} flow {:?}; oscillator jump {:?} flow {:?}, runtime {elapsed:?} (< 10 ms)",
        if pass { "PASS" } else { "FAIL" },
        bj.eig_margins,
        bf.eig_margins,
        oj.eig_margins,
        of.eig_margins
    );
    assert!(pass);
    assert!(elapsed.as_secs_f64() < 1e-2);
}

#[test]
fn criterion_03_distance_oracle_equivalence() {
    let start = Instant::now();
    let mut worst_oracle = 0.0f64;
    let mut worst_closed = 0.0f64;
    for scenario in [bouncing_ball(), dissipative_oscillator()] {
        let ev = scenario.distance_evaluator().unwrap();
        let spec = OracleSpec::default();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..1000 {
            let x = sample_state(&mut rng, 8.0);
            let y = sample_state(&mut rng, 8.0);
            let d = ev.distance(&x, &y).unwrap();
            let o = ev.oracle(&x, &y, &spec).unwrap();
            worst_oracle = worst_oracle.max((d - o).abs());
            let c = distance_closed(&x, &y, scenario.eps, scenario.r);
            worst_closed = worst_closed.max((d - c).abs());
        }
    }
    let elapsed = start.elapsed();
    let pass = worst_oracle <= 1e-6 && worst_closed <= 1e-10;
    println!(
        "criterion 03: {} |closed - oracle| max {worst_oracle:.3e} (<= 1e-6), \
         |generic - closed-form| max {worst_closed:.3e} (<= 1e-10), runtime {elapsed:?} (< 10 s)",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass);
    assert!(elapsed.as_secs_f64() < 10.0);
}

#[test]
fn criterion_04_distance_property_suite() {
    let start = Instant::now();
    let n = 10_000usize;
    let mut symmetry_violations = 0usize;
    let mut lipschitz_violations = 0usize;
    let mut zero_set_violations = 0usize;
    let mut domination_violations = 0usize;
    let mut remark4_violations = 0usize;
    let mut remark4_checked = 0usize;

    for scenario in [bouncing_ball(), dissipative_oscillator()] {
        let ev = scenario.distance_evaluator().unwrap();
        let sys = scenario.truncated_system();
        let mut rng = ChaCha8Rng::seed_from_u64(7);

        for _ in 0..n {
            let x = sample_state(&mut rng, 8.0);
            let y = sample_state(&mut rng, 8.0);
            let d_xy = ev.distance(&x, &y).unwrap();
            if d_xy != ev.distance(&y, &x).unwrap() {
                symmetry_violations += 1;
            }
            // The flow set is convex, so the pair midpoint is feasible and
            // the diagonal branch caps the distance by the Euclidean one.
            if d_xy > (&x - &y).norm() / 2.0f64.sqrt() + 1e-12 {
                domination_violations += 1;
            }
            let xp = sample_state(&mut rng, 8.0);
            let d_xpy = ev.distance(&xp, &y).unwrap();
            if (d_xy - d_xpy).abs() > (&x - &xp).norm() + 1e-12 {
                lipschitz_violations += 1;
            }
        }

        // Zero set: on-branch points evaluate to ~0 and belong to A;
        // off-branch perturbations of size 1e-4 do neither.
        for _ in 0..n / 2 {
            let v: f64 = rng.gen_range(scenario.r..6.0);
            let z = DVector::from_vec(vec![0.0, -v]);
            let gz = sys.jump_image(&z);
            let on = [(z.clone(), gz.clone()), (gz.clone(), z.clone())];
            for (x, y) in on {
                let d = ev.distance(&x, &y).unwrap();
                let member = ev.in_a(&x, &y, 1e-6);
                if !(d <= 1e-8 && member) {
                    zero_set_violations += 1;
                }
            }
            let off = DVector::from_vec(vec![1e-4, 0.0]);
            let d = ev.distance(&(&gz + &off), &z).unwrap();
            if d <= 1e-8 || ev.in_a(&(&gz + &off), &z, 1e-6) {
                zero_set_violations += 1;
            }
        }

        // Remark 4: d(x, y) < eps away from D u G(D) bounds the Euclidean gap.
        let eps = 0.05;
        for _ in 0..n {
            let x = sample_state(&mut rng, 8.0);
            let noise = DVector::from_vec(vec![
                rng.gen_range(-0.05..0.05),
                rng.gen_range(-0.05..0.05f64),
            ]);
            let y: DVector<f64> = &x + noise;
            if y[0] < 0.0 {
                continue;
            }
            let clearance = ev
                .distance_to_jump_sets(&x)
                .into_iter()
                .fold(f64::INFINITY, f64::min);
            let d = ev.distance(&x, &y).unwrap();
            if clearance > eps && d < eps {
                remark4_checked += 1;
                if (&x - &y).norm() > 2.0f64.sqrt() * eps + 1e-12 {
                    remark4_violations += 1;
                }
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = symmetry_violations == 0
        && lipschitz_violations == 0
        && zero_set_violations == 0
        && domination_violations == 0
        && remark4_violations == 0
        && remark4_checked > 1000;
    println!(
        "criterion 04: {} violations: symmetry {symmetry_violations}, lipschitz {lipschitz_violations}, \
         zero-set {zero_set_violations}, euclidean-domination {domination_violations}, \
         remark-4 {remark4_violations} ({remark4_checked} applicable), runtime {elapsed:?} (< 30 s)",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass);
    assert!(elapsed.as_secs_f64() < 30.0);
}

#[test]
fn criterion_05_peaking_reproduction() {
    let start = Instant::now();
    let scenario = bouncing_ball();
    let run = run_closed_loop(&scenario);
    assert_eq!(run.arc.termination, Termination::HorizonReached);

    // (a) local Euclidean peaks of amplitude >= 1 after t = 3 s.
    let eu = run.arc.euclidean_profile();
    let mut peaks = 0usize;
    for w in eu.windows(3) {
        if w[1].0 > 3.0 && w[1].2 > w[0].2 && w[1].2 >= w[2].2 && w[1].2 >= 1.0 {
            peaks += 1;
        }
    }

    // (b) distance over the final 10 % of the horizon vs its initial value.
    let d0 = run.distance.first().unwrap().d;
    let t_tail = scenario.t0 + 0.9 * scenario.horizon;
    let d_tail = run
        .distance
        .iter()
        .filter(|p| p.t >= t_tail)
        .map(|p| p.d)
        .fold(0.0, f64::max);

    // (c) strictly decreasing jump-time mismatches over the last 3 pairs.
    let (tx, ty) = run.arc.component_jump_times();
    let pairs = tx.len().min(ty.len());
    let mismatches: Vec<f64> = (0..pairs).map(|k| (tx[k] - ty[k]).abs()).collect();
    let last3 = &mismatches[mismatches.len() - 3..];
    let decreasing = last3.windows(2).all(|w| w[1] < w[0]);

    let elapsed = start.elapsed();
    let pass = peaks >= 3 && d_tail <= 0.05 * d0 && decreasing;
    println!(
        "criterion 05: {} peaks {peaks} (>= 3), d tail/initial {:.4} (<= 0.05), \
         last mismatches {last3:?} strictly decreasing: {decreasing}, runtime {elapsed:?} (< 5 s)",
        if pass { "PASS" } else { "FAIL" },
        d_tail / d0
    );
    assert!(pass);
    assert!(elapsed.as_secs_f64() < 5.0);
}

#[test]
fn criterion_06_lyapunov_decay_monitoring() {
    let start = Instant::now();
    let scenario = bouncing_ball();
    let run = run_closed_loop(&scenario);

    let jump_violations = run.monitor.jump_violations();
    let flow_violations = run.monitor.flow_violations.len();
    let v0 = run.monitor.series.first().unwrap().v;
    let mut envelope_ok = true;
    for s in &run.monitor.series {
        let bound = v0 * (scenario.design.lambda_c * (s.t - scenario.t0)).exp() * 1.05;
        if s.v > bound {
            envelope_ok = false;
            break;
        }
    }
    let elapsed = start.elapsed();
    let pass = jump_violations == 0 && flow_violations == 0 && envelope_ok;
    println!(
        "criterion 06: {} jump violations {jump_violations}, flow violations {flow_violations}, \
         global envelope ok {envelope_ok}, runtime {elapsed:?} (< 5 s)",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass);
    assert!(elapsed.as_secs_f64() < 5.0);
}

#[test]
fn criterion_07_oscillator_behaviour() {
    let start = Instant::now();
    let scenario = dissipative_oscillator();

    // (a) open-loop divergence of neighbouring starts.
    let u_ff = scenario.u_ff;
    let u = move |t: f64, _x: &DVector<f64>| u_ff.eval(t);
    let horizon = 40.0;
    let a = simulate(&scenario.system, &scenario.x_d0, 0.0, horizon, &u, &scenario.sim).unwrap();
    let b = simulate(
        &scenario.system,
        scenario.alt_y0.as_ref().unwrap(),
        0.0,
        horizon,
        &u,
        &scenario.sim,
    )
    .unwrap();
    let ea = a.intervals.last().unwrap().samples.last().unwrap();
    let eb = b.intervals.last().unwrap().samples.last().unwrap();
    let init_err = (&scenario.x_d0 - scenario.alt_y0.as_ref().unwrap()).norm();
    let final_err = (&ea.x - &eb.x).norm();

    // (b) closed loop from (100, 0) over a horizon with >= 5 reference jumps.
    let run = run_closed_loop(&scenario);
    let (tx, _) = run.arc.component_jump_times();
    let d0 = run.distance.first().unwrap().d;
    let d_final = run.distance.last().unwrap().d;

    // (c) the feedback vanishes identically in S0 (zero gains there).
    let ctrl = scenario.controller().unwrap();
    let mut s0_checked = 0usize;
    let mut s0_nonzero = 0usize;
    for iv in &run.arc.intervals {
        for s in iv.samples.iter().step_by(50) {
            let (u_fb, region) = feedback_with_reference(
                &scenario.system,
                &scenario.design,
                &ctrl,
                s.t,
                &s.x,
                &s.y,
            )
            .unwrap();
            if region == Region::S0 {
                s0_checked += 1;
                if u_fb != 0.0 {
                    s0_nonzero += 1;
                }
            }
        }
    }

    let elapsed = start.elapsed();
    let pass = final_err > init_err
        && tx.len() >= 5
        && d_final <= 0.10 * d0
        && s0_checked > 100
        && s0_nonzero == 0;
    println!(
        "criterion 07: {} open-loop error {init_err:.2} -> {final_err:.2} (diverges), \
         reference jumps {} (>= 5), d final/initial {:.4} (<= 0.10), \
         S0 feedback nonzero {s0_nonzero}/{s0_checked}, runtime {elapsed:?} (< 10 s)",
        if pass { "PASS" } else { "FAIL" },
        tx.len(),
        d_final / d0
    );
    assert!(pass);
    assert!(elapsed.as_secs_f64() < 10.0);
}

#[test]
fn criterion_08_event_location_accuracy() {
    let start = Instant::now();
    let scenario = bouncing_ball();
    let arc = simulate(
        &scenario.system,
        &scenario.x_d0,
        0.0,
        11.0,
        &zero_input,
        &scenario.sim,
    )
    .unwrap();
    let period = 20.0 / 9.81;
    let mut worst = 0.0f64;
    assert!(arc.jumps.len() >= 5);
    for (k, jr) in arc.jumps.iter().take(5).enumerate() {
        worst = worst.max((jr.t - period * (k + 1) as f64).abs());
    }
    let elapsed = start.elapsed();
    let pass = worst <= 1e-9;
    println!(
        "criterion 08: {} worst |dt| over first 5 impacts {worst:.3e} (<= 1e-9), runtime {elapsed:?} (< 1 s)",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass);
    assert!(elapsed.as_secs_f64() < 1.0);
}

/// Brute-force dwell check: dense hybrid-time grid per interval, all ordered
/// pairs. Independent of the endpoint-sweep implementation.
fn brute_force_dwell(domain: &HybridTimeDomain, spec: &DwellTimeSpec) -> (bool, f64) {
    let mut pts: Vec<(f64, usize)> = Vec::new();
    for iv in domain.intervals() {
        let steps = 7;
        for i in 0..=steps {
            let t = iv.t_start + (iv.t_end - iv.t_start) * i as f64 / steps as f64;
            pts.push((t, iv.j));
        }
    }
    let mut worst = f64::INFINITY;
    for &(t, j) in &pts {
        for &(tt, jj) in &pts {
            if tt + (jj as f64) < t + j as f64 {
                continue;
            }
            worst = worst.min(dwell_margin(spec, t, j, tt, jj));
        }
    }
    (worst >= 0.0, worst)
}

#[test]
fn criterion_09_dwell_checker_vs_brute_force() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut disagreements = 0usize;
    for _ in 0..100 {
        let jumps = rng.gen_range(0..=8usize);
        let mut times: Vec<f64> = (0..jumps).map(|_| rng.gen_range(0.0..10.0f64)).collect();
        times.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if jumps >= 2 && rng.gen_bool(0.3) {
            // Exercise simultaneous jumps.
            times[1] = times[0];
        }
        let t_end = 10.0 + rng.gen_range(0.0..5.0);
        let domain = HybridTimeDomain::from_jump_times(0.0, &times, t_end).unwrap();
        let kind = if rng.gen_bool(0.5) {
            DwellKind::MinimalAverage
        } else {
            DwellKind::MaximalAverage
        };
        let spec = DwellTimeSpec::new(
            rng.gen_range(0.2..4.0),
            rng.gen_range(0.5..3.0),
            kind,
        )
        .unwrap();
        let fast = check_inter_jump_time(&domain, &spec).unwrap();
        let (bf_holds, bf_margin) = brute_force_dwell(&domain, &spec);
        if fast.holds != bf_holds || (fast.margin - bf_margin).abs() > 1e-12 {
            disagreements += 1;
        }
    }
    let elapsed = start.elapsed();
    let pass = disagreements == 0;
    println!(
        "criterion 09: {} disagreements {disagreements}/100, runtime {elapsed:?} (< 1 s)",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass);
    assert!(elapsed.as_secs_f64() < 1.0);
}

#[test]
fn criterion_10_region_transition_soundness() {
    let start = Instant::now();
    let mut bad = 0usize;
    let mut jump_transitions = 0usize;
    for scenario in [bouncing_ball(), dissipative_oscillator()] {
        let run = run_closed_loop(&scenario);
        let v_l = scenario.sublevel().unwrap().v_l;
        bad += run.monitor.invalid_transitions_below(v_l).len();
        // Observed along both runs: every jump-induced transition follows the
        // arrow set even above v_L; count them for the report line.
        jump_transitions += run
            .monitor
            .transitions
            .iter()
            .filter(|tr| {
                tr.trigger != TransitionTrigger::Flow
                    && transition_allowed(tr.trigger, tr.from, tr.to)
            })
            .count();
    }
    let elapsed = start.elapsed();
    let pass = bad == 0;
    println!(
        "criterion 10: {} invalid transitions below v_L: {bad} (== 0); \
         {jump_transitions} jump transitions observed in the arrow set, runtime {elapsed:?} (< 5 s)",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass);
    assert!(elapsed.as_secs_f64() < 5.0);
}
