use ctqo_core::dynamics::{
    cyclic_quench_work, evolve, stage_stats, uniform_grid, window_stats, Channel, Drive,
    EvolveOptions, Method, Schedule,
};
use ctqo_core::operators::{basis_state, plus_state, z_expectation, HamiltonianSpec};
use ctqo_core::problems::{gen_binomial_graph, maxcut_problem, sk_problem, IsingProblem};
use ctqo_core::C64;
use proptest::prelude::*;

fn staircase_drive(gammas: &[f64], stage: f64) -> Drive {
    Drive::new(vec![
        Schedule::constant(Channel::A, 1.0, stage * gammas.len() as f64).unwrap(),
        Schedule::staircase(Channel::Gamma, gammas, stage).unwrap(),
    ])
    .unwrap()
}

fn opts(method: Method) -> EvolveOptions {
    EvolveOptions {
        method,
        ..EvolveOptions::default()
    }
}

#[test]
fn rabi_oscillation_single_qubit() {
    let p = IsingProblem::from_terms(1, vec![], vec![(0, 1.0)]).unwrap();
    let h = HamiltonianSpec::transverse(1.0, 0.0, &p);
    let drive = Drive::new(vec![
        Schedule::constant(Channel::A, 1.0, 5.0).unwrap(),
        Schedule::constant(Channel::B, 0.0, 5.0).unwrap(),
    ])
    .unwrap();
    let grid = uniform_grid(0.0, 5.0, 41);
    let store = EvolveOptions {
        store_states: true,
        ..opts(Method::Integrator)
    };
    for o in [
        store,
        EvolveOptions {
            method: Method::Exact,
            ..store
        },
    ] {
        let traj = evolve(&h, &drive, &basis_state(1, 0), &grid, &o).unwrap();
        for (t, psi) in grid.iter().zip(traj.states.as_ref().unwrap()) {
            assert!((z_expectation(psi, 0) - (2.0 * t).cos()).abs() < 1e-9);
        }
    }
}

#[test]
fn tilted_rabi_closed_form() {
    let p = IsingProblem::from_terms(1, vec![], vec![(0, 0.6)]).unwrap();
    let (e0, e1) = (p.energies[0], p.energies[1]);
    let (a, b) = (0.8, 1.5);
    let h = HamiltonianSpec::transverse(a, b, &p);
    let c = b * (e0 - e1) / 2.0;
    let r = (a * a + c * c).sqrt();
    let drive = Drive::new(vec![
        Schedule::constant(Channel::A, a, 7.0).unwrap(),
        Schedule::constant(Channel::B, b, 7.0).unwrap(),
    ])
    .unwrap();
    let grid = uniform_grid(0.0, 7.0, 57);
    for m in [Method::Exact, Method::Integrator] {
        let traj = evolve(&h, &drive, &basis_state(1, 0), &grid, &opts(m)).unwrap();
        for (t, hp) in grid.iter().zip(&traj.hp) {
            let flip = (a / r).powi(2) * (r * t).sin().powi(2);
            let want = e0 * (1.0 - flip) + e1 * flip;
            assert!((hp - want).abs() < 1e-9, "{m:?} t={t}");
        }
    }
}

#[test]
fn driver_only_evolution_is_stationary() {
    let p = sk_problem(6, 1).unwrap();
    let h = HamiltonianSpec::transverse(1.0, 0.0, &p);
    let drive = Drive::new(vec![
        Schedule::constant(Channel::A, 1.0, 4.0).unwrap(),
        Schedule::constant(Channel::B, 0.0, 4.0).unwrap(),
    ])
    .unwrap();
    let traj = evolve(
        &h,
        &drive,
        &plus_state(6),
        &uniform_grid(0.0, 4.0, 9),
        &opts(Method::Auto),
    )
    .unwrap();
    for hp in &traj.hp {
        assert!((hp - p.mean()).abs() < 1e-10);
    }
}

#[test]
fn exact_segments_match_integrator() {
    let p = maxcut_problem(&gen_binomial_graph(8, 2.0 / 3.0, 3).unwrap()).unwrap();
    let h = HamiltonianSpec::transverse(1.0, 1.0, &p);
    let drive = staircase_drive(&[0.2, 0.5, 0.9, 1.4], 2.5);
    let grid = uniform_grid(0.0, 10.0, 81);
    let x = evolve(&h, &drive, &plus_state(8), &grid, &opts(Method::Exact)).unwrap();
    let y = evolve(&h, &drive, &plus_state(8), &grid, &opts(Method::Integrator)).unwrap();
    for (a, b) in x.hp.iter().zip(&y.hp) {
        assert!((a - b).abs() < 1e-7);
    }
    for n in x.norm.iter().chain(&y.norm) {
        assert!((n - 1.0).abs() < 1e-10);
    }
}

#[test]
fn energy_conserved_within_segments() {
    let p = sk_problem(8, 12).unwrap();
    let h = HamiltonianSpec::transverse(1.0, 1.0, &p);
    let stage = 3.0;
    let drive = staircase_drive(&[0.3, 0.7, 1.2], stage);
    let grid = uniform_grid(0.0, 9.0, 91);
    for m in [Method::Exact, Method::Integrator] {
        let traj = evolve(&h, &drive, &plus_state(8), &grid, &opts(m)).unwrap();
        for k in 0..3 {
            let (t0, t1) = (k as f64 * stage, (k + 1) as f64 * stage);
            // Sample times strictly inside the open segment see the segment
            // Hamiltonian; the left endpoint still belongs to the previous one.
            let e: Vec<f64> = traj
                .times
                .iter()
                .zip(&traj.energy)
                .filter(|(t, _)| **t > t0 && **t <= t1)
                .map(|(_, e)| *e)
                .collect();
            let scale = e[0].abs().max(1.0);
            for x in &e {
                assert!((x - e[0]).abs() < 1e-9 * scale, "{m:?} stage {k}");
            }
        }
    }
}

#[test]
fn quench_energy_bookkeeping() {
    let p = maxcut_problem(&gen_binomial_graph(7, 0.7, 4).unwrap()).unwrap();
    let gammas = [0.3, 0.8, 1.1];
    let stage = 2.0;
    let drive = staircase_drive(&gammas, stage);
    let h = HamiltonianSpec::transverse(1.0, 1.0, &p);
    let o = EvolveOptions {
        store_states: true,
        ..opts(Method::Exact)
    };
    let traj = evolve(&h, &drive, &plus_state(7), &[2.0, 4.0], &o).unwrap();
    for (k, psi) in traj.states.as_ref().unwrap().iter().enumerate() {
        let before = h.with_coeffs(1.0, gammas[k]).expectation(psi).unwrap();
        let after = h.with_coeffs(1.0, gammas[k + 1]).expectation(psi).unwrap();
        let hp = traj.hp[k];
        // Sampled energy at the jump is the pre-quench value.
        assert!((traj.energy[k] - before).abs() < 1e-12 * before.abs().max(1.0));
        let jump = (gammas[k + 1] - gammas[k]) * hp;
        assert!((after - before - jump).abs() < 1e-12 * before.abs().max(1.0));
    }
}

#[test]
fn stage_statistics_trivial_cases() {
    let times = uniform_grid(0.0, 1.0, 11);
    let s = window_stats(&times, &[2.5; 11], 0.0, 1.0).unwrap();
    assert_eq!((s.mean, s.std), (2.5, 0.0));
    assert!(window_stats(&times, &[0.0; 11], 2.0, 3.0).is_err());

    // Ground state of the first stage Hamiltonian gives a flat stage.
    let p = sk_problem(6, 2).unwrap();
    let h = HamiltonianSpec::transverse(1.0, 0.4, &p);
    let eig = h.eig().unwrap();
    let g: Vec<C64> = ctqo_core::linalg::col(&eig.vectors, 0)
        .iter()
        .map(|&x| C64::new(x, 0.0))
        .collect();
    let point = h.with_coeffs(0.0, 1.0).expectation(&g).unwrap();
    let drive = staircase_drive(&[0.4, 0.9], 3.0);
    let traj = evolve(
        &h,
        &drive,
        &g,
        &uniform_grid(0.0, 6.0, 61),
        &opts(Method::Exact),
    )
    .unwrap();
    let st = stage_stats(&traj, (0.0, 3.0), 0.6).unwrap();
    assert!((st.mean - point).abs() < 1e-10 && st.std < 1e-10);
}

#[test]
fn quench_cycle_trivial_work() {
    // With A = 0 every basis state is stationary under both stages.
    let p = sk_problem(5, 7).unwrap();
    let h = HamiltonianSpec::transverse(0.0, 1.0, &p);
    let w = cyclic_quench_work(&h, 0.5, 1.5, 1.0, 3.0, &basis_state(5, 9)).unwrap();
    assert!(w.abs() < 1e-12);
    let h = HamiltonianSpec::transverse(1.0, 1.0, &p);
    let w = cyclic_quench_work(&h, 0.7, 0.7, 1.0, 3.0, &plus_state(5)).unwrap();
    assert_eq!(w, 0.0);
    assert!(cyclic_quench_work(&h, 0.7, 0.5, 1.0, 3.0, &plus_state(5)).is_err());
}

#[test]
fn quench_cycle_work_campaign() {
    // Planck-type check: W = dgamma (hp(t2) - hp(t1)) stays below the stage
    // fluctuation scale on nearly every instance.
    let (g1, g2, t1, t2) = (0.4, 1.0, 10.0, 20.0);
    let mut ok = 0;
    let count = 20;
    for seed in 0..count {
        let p = maxcut_problem(&gen_binomial_graph(9, 2.0 / 3.0, 500 + seed).unwrap()).unwrap();
        let h = HamiltonianSpec::transverse(1.0, 1.0, &p);
        let w = cyclic_quench_work(&h, g1, g2, t1, t2, &plus_state(9)).unwrap();
        let drive = staircase_drive(&[g1, g2], 10.0);
        let grid = uniform_grid(0.0, t2, 401);
        let traj = evolve(&h, &drive, &plus_state(9), &grid, &opts(Method::Exact)).unwrap();
        let s1 = stage_stats(&traj, (0.0, t1), 2.0).unwrap();
        let s2 = stage_stats(&traj, (t1, t2), 2.0).unwrap();
        if w <= (g2 - g1) * 3.0 * s1.std.max(s2.std) {
            ok += 1;
        }
    }
    assert!(ok as f64 >= 0.95 * count as f64, "{ok}/{count}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn norm_preserved_on_random_staircases(
        seed in 0u64..1000,
        steps in prop::collection::vec(0.0f64..0.8, 1..5),
        stage in 0.3f64..2.0,
    ) {
        let p = sk_problem(5, seed).unwrap();
        let mut g = 0.1;
        let gammas: Vec<f64> = steps.iter().map(|s| { g += s; g }).collect();
        let drive = staircase_drive(&gammas, stage);
        let h = HamiltonianSpec::transverse(1.0, 1.0, &p);
        let grid = uniform_grid(0.0, drive.t_final, 17);
        for m in [Method::Exact, Method::Integrator] {
            let traj = evolve(&h, &drive, &plus_state(5), &grid, &opts(m)).unwrap();
            for n in &traj.norm {
                prop_assert!((n - 1.0).abs() < 1e-10);
            }
        }
    }
}
