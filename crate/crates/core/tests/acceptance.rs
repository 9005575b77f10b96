//! Acceptance campaign. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails. Criterion numbers given as arguments
//! restrict the run (`cargo test --test acceptance -- 1 5`).

use std::process::ExitCode;
use std::time::Instant;

use ctqo_core::ansatz::{
    emg_beta, emg_pstqa, gaussian_closed_form, maxcut_coefficients, maxcut_gaussian_hp, EmgModel,
    EmgParams, GaussianModel,
};
use ctqo_core::dynamics::{evolve, uniform_grid, Channel, Drive, EvolveOptions, Method, Schedule};
use ctqo_core::linalg::haar_unitary;
use ctqo_core::operators::{plus_state, DriverSpec, HamiltonianSpec};
use ctqo_core::problems::{gen_binomial_graph, maxcut_problem, sk_problem, IsingProblem};
use ctqo_core::protocols::{
    below_mean_ensemble, biased_cycle_family, bqa_run, cyclic_unitary, entropy_accounting,
    msqw_run, passivity_ramp, random_initial_string, rqa_run, stage_comparison, transition_matrix,
    uniform_below_mean, warmstart_ctqw, CycleDrive, DenseUnitary, PassiveInitial, ProtocolConfig,
    WarmStartInitial,
};
use ctqo_core::pstqa::{
    path_independence_check, pstqa_entropy, pstqa_solve, timescale_invariance_check, ExactBackend,
    PstqaOptions,
};
use ctqo_core::rng::{self, derive_seed};
use ctqo_core::statmech::{cyclic_work, gibbs_hp_sweep, gibbs_weights};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn maxcut(n: usize, seed: u64) -> IsingProblem {
    maxcut_problem(&gen_binomial_graph(n, 2.0 / 3.0, seed).unwrap()).unwrap()
}

fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(f64::total_cmp);
    let m = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[m]
    } else {
        0.5 * (xs[m - 1] + xs[m])
    }
}

fn frac(hits: usize, total: usize) -> f64 {
    hits as f64 / total as f64
}

/// Final <H_p> from PSTQA and from the Schrodinger equation for one linear
/// anneal started in |+>. PSTQA is `None` when the thermal model breaks down.
fn anneal_pair(p: &IsingProblem, a: (f64, f64), b: (f64, f64), tf: f64) -> (Option<f64>, f64) {
    let h = HamiltonianSpec::transverse(1.0, 1.0, p);
    let drive = Drive::linear(a, b, tf).unwrap();
    let psi = plus_state(p.n);
    let exact = evolve(&h, &drive, &psi, &[tf], &EvolveOptions::default()).unwrap();
    let e0 = h.with_coeffs(a.0, b.0).expectation(&psi).unwrap();
    let thermal = pstqa_solve(
        &ExactBackend::new(h),
        &drive,
        e0,
        &[tf],
        &PstqaOptions::default(),
    );
    (thermal.ok().map(|t| t.hp[0]), exact.hp[0])
}

fn anneal_campaign(
    criterion: u64,
    count: usize,
    build: impl Fn(u64) -> IsingProblem,
    a: (f64, f64),
    b: (f64, f64),
) -> (Vec<f64>, usize, usize) {
    let mut errors = Vec::new();
    let (mut below, mut broken) = (0, 0);
    for i in 0..count {
        let p = build(derive_seed(criterion, i as u64));
        match anneal_pair(&p, a, b, 12.0) {
            (Some(th), sch) => {
                errors.push((th - sch).abs() / sch.abs());
                if th <= sch {
                    below += 1;
                }
            }
            (None, _) => {
                broken += 1;
                errors.push(f64::INFINITY);
            }
        }
    }
    (errors, below, broken)
}

fn criterion_1() -> Outcome {
    let count = 30;
    let (mut errors, below, broken) =
        anneal_campaign(1, count, |s| maxcut(10, s), (1.3, 0.3), (0.3, 1.3));
    let med = median(&mut errors);
    let share = frac(below, count);
    outcome(
        med <= 0.05 && share >= 0.9,
        format!(
            "median relative error {med:.4} (<= 0.05), PSTQA <= Schrodinger on {below}/{count} ({share:.2} >= 0.90), thermal breakdowns {broken}"
        ),
    )
}

fn criterion_2() -> Outcome {
    let count = 30;
    let (mut errors, below, broken) = anneal_campaign(
        2,
        count,
        |s| sk_problem(10, s).unwrap(),
        (1.1, 0.1),
        (0.1, 1.1),
    );
    let med = median(&mut errors);
    outcome(
        med <= 0.05,
        format!(
            "median relative error {med:.4} (<= 0.05), PSTQA <= Schrodinger on {below}/{count}, thermal breakdowns {broken}"
        ),
    )
}

fn criterion_3() -> Outcome {
    let count = 50;
    let stairs = Schedule::staircase(Channel::Gamma, &[0.2, 0.4, 0.6, 0.8, 1.0], 10.0).unwrap();
    let mut ok = 0;
    for i in 0..count {
        let p = maxcut(10, derive_seed(3, i));
        let run = msqw_run(&p, DriverSpec::transverse_field(10), &stairs, 0.2, 201).unwrap();
        if run.is_monotone_within(3.0) {
            ok += 1;
        }
    }
    let share = frac(ok, count as usize);
    outcome(
        share >= 0.95,
        format!("monotone within 3 sigma on {ok}/{count} ({share:.2} >= 0.95)"),
    )
}

fn criterion_4() -> Outcome {
    let count = 50;
    let mut ok = 0;
    let mut worst = f64::NEG_INFINITY;
    for i in 0..count {
        let p = maxcut(10, derive_seed(4, i));
        let c = stage_comparison(
            &p,
            DriverSpec::transverse_field(10),
            [0.3, 0.7, 1.2],
            10.0,
            20.0,
            401,
        )
        .unwrap();
        if c.three_not_worse() {
            ok += 1;
        }
        worst = worst.max(c.difference - c.tolerance);
    }
    let share = frac(ok, count as usize);
    outcome(
        share >= 0.9,
        format!(
            "three-stage energy <= two-stage within tolerance on {ok}/{count} ({share:.2} >= 0.90), worst excess {worst:.3e}"
        ),
    )
}

fn criterion_5() -> Outcome {
    let mut parts = Vec::new();
    let mut pass = true;

    // (a) Gibbs states under Haar cycles.
    let mut worst_w = f64::NEG_INFINITY;
    for i in 0..4u64 {
        let p = if i % 2 == 0 {
            maxcut(6, derive_seed(50, i))
        } else {
            sk_problem(6, derive_seed(50, i)).unwrap()
        };
        let mut r = rng::stream(derive_seed(51, i));
        for beta in [0.2, 1.0, 3.0] {
            let pops = gibbs_weights(&p.energies, beta);
            for _ in 0..100 {
                let u = haar_unitary(p.dim(), &mut r);
                worst_w = worst_w.max(cyclic_work(&p.energies, &pops, &u).unwrap());
            }
        }
    }
    pass &= worst_w <= 1e-10;
    parts.push(format!("(a) max W {worst_w:.2e} <= 1e-10"));

    // (b) Transition matrices of the cyclic drive and of Haar unitaries.
    let mut worst_p = 0.0f64;
    for i in 0..3u64 {
        let p = maxcut(8, derive_seed(52, i));
        let u = cyclic_unitary(
            &p,
            DriverSpec::transverse_field(8),
            None,
            &CycleDrive::default().schedule().unwrap(),
        )
        .unwrap()
        .with_tolerances(1e-11, 1e-13)
        .dense()
        .unwrap();
        worst_p = worst_p.max(transition_matrix(&u).unwrap().stochasticity_error());
        let h = DenseUnitary {
            dim: 256,
            data: haar_unitary(256, &mut rng::stream(derive_seed(53, i))),
        };
        worst_p = worst_p.max(transition_matrix(&h).unwrap().stochasticity_error());
    }
    pass &= worst_p <= 1e-9;
    parts.push(format!("(b) stochasticity error {worst_p:.2e} <= 1e-9"));

    // (c), (d) Ten-qubit thermal trajectories.
    let p = maxcut(10, derive_seed(54, 0));
    let h = HamiltonianSpec::transverse(1.0, 1.0, &p);
    let backend = ExactBackend::new(h);
    let e0 = h
        .with_coeffs(1.3, 0.3)
        .expectation(&plus_state(10))
        .unwrap();
    let opts = PstqaOptions::default();
    let linear = Drive::linear((1.3, 0.7), (0.3, 1.3), 12.0).unwrap();
    match pstqa_solve(&backend, &linear, e0, &uniform_grid(0.0, 12.0, 25), &opts) {
        Ok(traj) => {
            let (sd, drift) = pstqa_entropy(&traj);
            let rel = drift / sd[0].abs();
            pass &= rel <= 1e-6;
            parts.push(format!("(c) S_d drift {rel:.2e} |S_d(0)| <= 1e-6"));
        }
        Err(e) => {
            pass = false;
            parts.push(format!("(c) failed: {e}"));
        }
    }
    match timescale_invariance_check(&backend, &linear, e0, &[1.0, 0.7, 1.9], 9, &opts) {
        Ok(w) => {
            pass &= w <= 1e-6;
            parts.push(format!("t_f rescaling {w:.2e} <= 1e-6"));
        }
        Err(e) => {
            pass = false;
            parts.push(format!("t_f rescaling failed: {e}"));
        }
    }
    // Second path raises B before lowering A.
    let corner = Drive::new(vec![
        Schedule::tabulated(Channel::A, vec![(0.0, 1.3), (6.0, 1.3), (12.0, 0.7)]).unwrap(),
        Schedule::tabulated(Channel::B, vec![(0.0, 0.3), (6.0, 1.3), (12.0, 1.3)]).unwrap(),
    ])
    .unwrap();
    match path_independence_check(&backend, (&linear, &corner), e0, &opts) {
        Ok(d) => {
            pass &= d.relative <= 1e-4;
            parts.push(format!("(d) path discrepancy {:.2e} <= 1e-4", d.relative));
        }
        Err(e) => {
            pass = false;
            parts.push(format!("(d) failed: {e}"));
        }
    }

    // (e) Entropy ledger of biased cycles over the below-mean ensemble.
    let p = maxcut(6, derive_seed(55, 0));
    let cfg = ProtocolConfig::default();
    let dist = uniform_below_mean(&p);
    let ledger = entropy_accounting(
        &dist,
        biased_cycle_family(&p, DriverSpec::transverse_field(6), &cfg, 2.0),
    )
    .unwrap();
    let gap = (ledger.sd_c - ledger.s0).abs();
    pass &= gap <= 1e-12;
    parts.push(format!("(e) |sd_C - S0| {gap:.2e} <= 1e-12"));

    outcome(pass, parts.join("; "))
}

fn criterion_6() -> Outcome {
    let count = 50;
    let (mut ok, mut worst) = (0, f64::INFINITY);
    for i in 0..count {
        for p in [
            maxcut(10, derive_seed(6, i)),
            sk_problem(10, derive_seed(60, i)).unwrap(),
        ] {
            let ens = WarmStartInitial::Ensemble(below_mean_ensemble(&p));
            let r = warmstart_ctqw(&p, DriverSpec::transverse_field(10), 0.5, &ens, &[]).unwrap();
            if r.hp_time_avg >= r.hp_initial {
                ok += 1;
            }
            worst = worst.min(r.hp_time_avg - r.hp_initial);
        }
    }
    let total = 2 * count as usize;
    outcome(
        ok == total,
        format!("diagonal-ensemble <H_p> >= initial on {ok}/{total}, smallest rise {worst:.3e}"),
    )
}

fn criterion_7() -> Outcome {
    let count = 20;
    let ramp = Schedule::staircase(Channel::Gamma, &[0.3, 0.6, 0.9, 1.2], 3.0).unwrap();
    let grid = uniform_grid(0.0, 12.0, 121);
    let (mut ok, mut total) = (0, 0);
    for i in 0..count {
        let p = maxcut(8, derive_seed(7, i));
        for init in [
            PassiveInitial::Ground,
            PassiveInitial::Gibbs(0.5),
            PassiveInitial::Gibbs(2.0),
        ] {
            let run =
                passivity_ramp(&p, DriverSpec::transverse_field(8), &ramp, init, &grid).unwrap();
            total += 1;
            if run.initial_passive && run.within(3.0) {
                ok += 1;
            }
        }
    }
    outcome(
        ok == total,
        format!("<H_p(t)> <= <H_p(t0)> + 3 sigma at all times on {ok}/{total} runs"),
    )
}

fn criterion_8() -> Outcome {
    let count = 20;
    let gammas: Vec<f64> = (0..50).map(|k| 3.0 * k as f64 / 49.0).collect();
    let (mut ok, mut total) = (0, 0);
    let mut worst = f64::NEG_INFINITY;
    for i in 0..count {
        let p = maxcut(8, derive_seed(8, i));
        for beta in [0.1, 1.0, 5.0] {
            let s = gibbs_hp_sweep(&p, &DriverSpec::transverse_field(8), beta, &gammas).unwrap();
            let rise =
                s.hp.windows(2)
                    .map(|w| w[1] - w[0])
                    .fold(f64::NEG_INFINITY, f64::max);
            worst = worst.max(rise);
            total += 1;
            if rise <= 1e-9 {
                ok += 1;
            }
        }
    }
    outcome(
        ok == total,
        format!("non-increasing to 1e-9 on {ok}/{total} sweeps, largest step {worst:.2e}"),
    )
}

fn criterion_9() -> Outcome {
    let count = 50;
    // Drive amplitude fixed from a pilot sweep on separate instances.
    let cfg = ProtocolConfig {
        k_max: 100,
        k: 10,
        drive: CycleDrive {
            amplitude: 2.0,
            ..CycleDrive::default()
        },
        ..ProtocolConfig::default()
    };
    let (mut rqa_hits, mut bqa_hits) = (0, 0);
    let (mut heated, mut shots) = (0, 0);
    for i in 0..count {
        let seed = derive_seed(9, i);
        let p = maxcut(10, seed);
        let driver = DriverSpec::transverse_field(10);
        let start = random_initial_string(&p, &mut rng::stream(seed)).unwrap();
        let mut delta = vec![0.0; p.dim()];
        delta[start] = 1.0;
        let run_cfg = ProtocolConfig { seed, ..cfg };
        let rqa = rqa_run(&p, driver, &run_cfg, &delta).unwrap();
        let bqa = bqa_run(&p, driver, &run_cfg, start).unwrap();
        rqa_hits += usize::from(rqa.found_ground);
        bqa_hits += usize::from(bqa.found_ground);
        let (h, s) = rqa.heating_count();
        heated += h;
        shots += s;
    }
    let share = frac(heated, shots);
    outcome(
        bqa_hits > rqa_hits && share >= 0.9,
        format!(
            "ground hits BQA {bqa_hits} vs RQA {rqa_hits} of {count}; RQA heating on {heated}/{shots} shots ({share:.3} >= 0.90)"
        ),
    )
}

fn criterion_10() -> Outcome {
    let mut parts = Vec::new();
    let mut pass = true;

    let (n, k2) = (10, 30.0);
    let drive = Drive::linear((1.3, 0.3), (0.3, 1.3), 12.0).unwrap();
    let model = GaussianModel::new(maxcut_coefficients(n, k2, 0.0), n);
    let e0 = -1.3 * n as f64;
    let grid = uniform_grid(0.0, 12.0, 13);
    let integrated = pstqa_solve(&model, &drive, e0, &grid, &PstqaOptions::default()).unwrap();
    let closed = gaussian_closed_form(&model, &drive, e0, &grid).unwrap();
    let formula = maxcut_gaussian_hp(n, k2, 1.3, 0.3, 0.3, 1.3);
    let last = grid.len() - 1;
    let gap = (integrated.hp[last] - formula)
        .abs()
        .max((closed.hp[last] - formula).abs());
    pass &= gap <= 1e-6;
    parts.push(format!(
        "Gaussian formula vs synthetic-spectrum PSTQA {gap:.2e} <= 1e-6"
    ));

    let mut worst = 0.0f64;
    let mut r = rng::stream(derive_seed(10, 0));
    use rand::Rng;
    for _ in 0..2000 {
        let sigma2: f64 = r.random_range(0.1..50.0);
        let delta = r.random_range(-0.95..0.95) * sigma2.sqrt();
        let p = EmgParams {
            mu: r.random_range(-5.0..5.0),
            sigma2,
            delta,
        };
        let beta: f64 = r.random_range(1e-3..5.0);
        if 1.0 + beta * delta <= 0.05 || p.energy(beta) >= p.mu {
            continue;
        }
        let back = emg_beta(&p, p.energy(beta)).unwrap();
        worst = worst.max((back - beta).abs() / beta.max(1.0));
    }
    pass &= worst <= 1e-9;
    parts.push(format!("EMG beta round trip {worst:.2e} <= 1e-9"));

    let c = maxcut_coefficients(n, 25.0, 0.0);
    let opts = PstqaOptions::default();
    let g = pstqa_solve(&GaussianModel::new(c, n), &drive, -13.0, &grid, &opts).unwrap();
    let e = pstqa_solve(&EmgModel::new(c, n), &drive, -13.0, &grid, &opts).unwrap();
    let red =
        g.hp.iter()
            .zip(&e.hp)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
    pass &= red <= 1e-6;
    parts.push(format!("EMG -> Gaussian at kappa3 = 0 {red:.2e} <= 1e-6"));

    let clock = Instant::now();
    let p = maxcut(13, derive_seed(10, 1));
    let driver = DriverSpec::transverse_field(13);
    let psi = plus_state(13);
    let h = HamiltonianSpec::transverse(1.0, 1.0, &p);
    let exact = evolve(
        &h,
        &drive,
        &psi,
        &[12.0],
        &EvolveOptions {
            method: Method::Integrator,
            ..EvolveOptions::default()
        },
    )
    .unwrap();
    let e0 = h.with_coeffs(1.3, 0.3).expectation(&psi).unwrap();
    let secs;
    match emg_pstqa(&p, &driver, &drive, e0, &[12.0], &opts) {
        Ok(t) => {
            secs = clock.elapsed().as_secs_f64();
            let rel = (t.hp[0] - exact.hp[0]).abs() / exact.hp[0].abs();
            parts.push(format!(
                "13-qubit EMG {:.4} vs Schrodinger {:.4} (relative error {rel:.3}) in {secs:.0} s < 600 s",
                t.hp[0], exact.hp[0]
            ));
        }
        Err(err) => {
            secs = clock.elapsed().as_secs_f64();
            pass = false;
            parts.push(format!("13-qubit EMG run failed: {err}"));
        }
    }
    pass &= secs < 600.0;

    outcome(pass, parts.join("; "))
}

fn main() -> ExitCode {
    let criteria: [(u32, fn() -> Outcome); 10] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
    ];
    let wanted: Vec<u32> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut failed = 0;
    for (k, run) in criteria {
        if !wanted.is_empty() && !wanted.contains(&k) {
            continue;
        }
        let clock = Instant::now();
        let o = run();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!(
            "{verdict} criterion {k}: {} [{:.1} s]",
            o.detail,
            clock.elapsed().as_secs_f64()
        );
        failed += usize::from(!o.pass);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
