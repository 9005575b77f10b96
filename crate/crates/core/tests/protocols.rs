use ctqo_core::dynamics::{evolve, uniform_grid, Channel, Drive, EvolveOptions, Schedule};
use ctqo_core::linalg::{self, haar_unitary};
use ctqo_core::operators::{basis_state, DriverSpec, HamiltonianSpec};
use ctqo_core::problems::{gen_binomial_graph, maxcut_problem, sk_problem, IsingProblem};
use ctqo_core::protocols::{
    below_mean_ensemble, bqa_run, cyclic_unitary, default_alpha0, entropy_accounting, msqw_run,
    passivity_ramp, rqa_ensemble, rqa_run, stage_comparison, transition_matrix, uniform_below_mean,
    warmstart_ctqw, CycleDrive, DenseUnitary, PassiveInitial, ProtocolConfig, ProtocolMode,
    WarmStartInitial,
};
use ctqo_core::statmech::{diagonal_entropy, gibbs_weights};
use ctqo_core::{rng, Error, C64};
use proptest::prelude::*;

fn graph_problem(n: usize, seed: u64) -> IsingProblem {
    maxcut_problem(&gen_binomial_graph(n, 2.0 / 3.0, seed).unwrap()).unwrap()
}

fn tf(p: &IsingProblem) -> DriverSpec {
    DriverSpec::transverse_field(p.n)
}

fn tight_unitary(p: &IsingProblem) -> DenseUnitary {
    cyclic_unitary(p, tf(p), None, &CycleDrive::default().schedule().unwrap())
        .unwrap()
        .with_tolerances(1e-11, 1e-13)
        .dense()
        .unwrap()
}

#[test]
fn zero_amplitude_cycle_is_a_phase() {
    let p = graph_problem(5, 1);
    let drive = CycleDrive {
        amplitude: 0.0,
        ..CycleDrive::default()
    };
    let u = cyclic_unitary(&p, tf(&p), None, &drive.schedule().unwrap())
        .unwrap()
        .dense()
        .unwrap();
    let tm = transition_matrix(&u).unwrap();
    for j in 0..tm.dim {
        for s in 0..tm.dim {
            assert_eq!(tm.get(j, s), if j == s { 1.0 } else { 0.0 });
        }
    }
}

#[test]
fn non_cyclic_drive_rejected() {
    let p = graph_problem(4, 2);
    let open = Schedule::linear(Channel::G, 1.0, 0.0, 5.0).unwrap();
    assert!(matches!(
        cyclic_unitary(&p, tf(&p), None, &open),
        Err(Error::NonCyclic { .. })
    ));
}

#[test]
fn cycle_unitary_and_transition_matrix() {
    let p = graph_problem(5, 3);
    let u = tight_unitary(&p);
    assert!(u.unitarity_error() < 1e-9, "{}", u.unitarity_error());
    let tm = transition_matrix(&u).unwrap();
    assert!(tm.stochasticity_error() < 1e-9);
    // Real Hamiltonians and a pulse symmetric about its centre give U^T = U.
    assert!(tm.symmetry_error() < 1e-9);
    for j in 0..tm.dim {
        for s in 0..tm.dim {
            assert!((tm.get(j, s) - u.get(j, s).norm_sqr()).abs() < 1e-15);
        }
    }
}

#[test]
fn passive_inputs_cannot_cool() {
    for seed in 0..3 {
        let p = graph_problem(6, 10 + seed);
        let tm = transition_matrix(&tight_unitary(&p)).unwrap();
        for beta in [0.0, 0.3, 1.0, 4.0] {
            let w = gibbs_weights(&p.energies, beta);
            assert!(tm.mean_shift(&p.energies, &w) >= -1e-9);
            let g = p.ground_states(1e-9)[0];
            assert!(tm.probability_change(&w, g) <= 1e-12);
        }
    }
}

#[test]
fn ensemble_series_properties() {
    let p = graph_problem(6, 4);
    let tm = transition_matrix(&tight_unitary(&p)).unwrap();
    let p0 = uniform_below_mean(&p);
    let series = rqa_ensemble(&tm, &p.energies, &p0, 20, None).unwrap();
    // The series ends early only once the selected ensemble is at the ground.
    let (last, body) = series.split_last().unwrap();
    for st in body {
        assert!(st.psuc > 0.0 && st.psuc <= 1.0);
        assert!(st.hp_selected < st.hp_in);
    }
    assert!(last.psuc > 0.0 || (last.hp_in - p.ground_state_energy()).abs() < 1e-12);
    // Independent first stage: sum over strictly descending pairs.
    let mut psuc = 0.0;
    for j in 0..tm.dim {
        for s in 0..tm.dim {
            if p.energies[j] < p.energies[s] {
                psuc += tm.get(j, s) * p0[s];
            }
        }
    }
    assert!((series[0].psuc - psuc).abs() < 1e-12);
    let id = transition_matrix(&DenseUnitary::identity(tm.dim)).unwrap();
    let flat = rqa_ensemble(&id, &p.energies, &p0, 20, None).unwrap();
    assert_eq!(flat.len(), 1);
    assert_eq!(flat[0].psuc, 0.0);
}

#[test]
fn entropy_ledger_cases() {
    let p = graph_problem(6, 5);
    let dist = uniform_below_mean(&p);
    let s0 = diagonal_entropy(&dist).unwrap();
    let d = dist.len();

    let id = entropy_accounting(&dist, |z| Ok(basis_state(6, z))).unwrap();
    assert!((id.sd_q - s0).abs() < 1e-12 && (id.sd_c - s0).abs() < 1e-12);

    let g = p.ground_states(1e-9)[0];
    let oracle = entropy_accounting(&dist, |_| Ok(basis_state(6, g))).unwrap();
    assert!(oracle.sd_q.abs() < 1e-12);
    assert!((oracle.sd_c - s0).abs() < 1e-12);

    let mut r = rng::stream(9);
    let u = haar_unitary(d, &mut r);
    let random = entropy_accounting(&dist, |z| Ok(u[z * d..(z + 1) * d].to_vec())).unwrap();
    assert!((random.sd_c - s0).abs() < 1e-12);
    assert!(random.sd_joint >= s0 - 1e-12);
    assert!(random.sd_joint >= random.sd_q - 1e-12);
}

#[test]
fn alpha0_is_the_spectral_width() {
    let p = graph_problem(9, 6);
    assert!((default_alpha0(&p) - p.kappa2.sqrt()).abs() < 1e-12);
    let k36 = maxcut_problem(&ctqo_core::problems::Graph::complete(9).unwrap()).unwrap();
    assert_eq!(k36.kappa2, 36.0);
    assert!((default_alpha0(&k36) - 6.0).abs() < 1e-12);
}

#[test]
fn reverse_annealing_trivial_runs() {
    let p = graph_problem(5, 7);
    let cfg = ProtocolConfig {
        drive: CycleDrive {
            amplitude: 0.0,
            ..CycleDrive::default()
        },
        ..ProtocolConfig::default()
    };
    let log = rqa_run(&p, tf(&p), &cfg, &uniform_below_mean(&p)).unwrap();
    assert_eq!(log.shots_used(), cfg.k);
    assert!(log.shots.iter().all(|s| !s.accepted && s.output == s.input));

    let g = p.ground_states(1e-9)[0];
    let mut at_ground = vec![0.0; p.dim()];
    at_ground[g] = 1.0;
    let log = rqa_run(&p, tf(&p), &ProtocolConfig::default(), &at_ground).unwrap();
    assert_eq!(log.shots_used(), 10);
    assert!(log.shots.iter().all(|s| !s.accepted));
    assert!(log.found_ground && log.approx_ratio == 1.0);
}

#[test]
fn sampled_shots_follow_the_transition_matrix() {
    // From a ground state nothing is ever accepted, so every shot samples the
    // same column of P.
    let p = graph_problem(4, 8);
    let g = p.ground_states(1e-9)[0];
    let mut at_ground = vec![0.0; p.dim()];
    at_ground[g] = 1.0;
    let shots = 10_000;
    let cfg = ProtocolConfig {
        k_max: shots,
        k: shots,
        seed: 3,
        mode: ProtocolMode::Dense,
        ..ProtocolConfig::default()
    };
    let log = rqa_run(&p, tf(&p), &cfg, &at_ground).unwrap();
    assert_eq!(log.shots_used(), shots);
    let u = cyclic_unitary(&p, tf(&p), None, &cfg.drive.schedule().unwrap())
        .unwrap()
        .with_tolerances(cfg.rtol, cfg.atol)
        .dense()
        .unwrap();
    let tm = transition_matrix(&u).unwrap();
    let mut counts = vec![0usize; p.dim()];
    for s in &log.shots {
        counts[s.output] += 1;
    }
    let (mut chi2, mut df) = (0.0, 0usize);
    let (mut lumped_obs, mut lumped_exp) = (0.0, 0.0);
    for j in 0..p.dim() {
        let expected = tm.get(j, g) * shots as f64;
        if expected >= 5.0 {
            chi2 += (counts[j] as f64 - expected).powi(2) / expected;
            df += 1;
        } else {
            lumped_obs += counts[j] as f64;
            lumped_exp += expected;
        }
    }
    if lumped_exp >= 5.0 {
        chi2 += (lumped_obs - lumped_exp).powi(2) / lumped_exp;
        df += 1;
    }
    let df = (df - 1) as f64;
    assert!(
        chi2 < df + 5.0 * (2.0 * df).sqrt(),
        "chi2 {chi2} on {df} dof"
    );
}

#[test]
fn biased_annealing_from_the_ground_state() {
    let p = graph_problem(4, 9);
    let g = p.ground_states(1e-9)[0];
    let cfg = ProtocolConfig::default();
    let log = bqa_run(&p, tf(&p), &cfg, g).unwrap();
    assert_eq!(log.shots_used(), cfg.k);
    let a0 = default_alpha0(&p);
    for (i, s) in log.shots.iter().enumerate() {
        assert!(!s.accepted);
        assert!((s.alpha - a0 * (1.0 - i as f64 / cfg.k as f64)).abs() < 1e-12);
    }
    assert_eq!(log.final_alpha, 0.0);

    let above = (0..p.dim()).find(|&z| p.energies[z] >= p.mean()).unwrap();
    assert!(bqa_run(&p, tf(&p), &cfg, above).is_err());
}

#[test]
fn warm_start_cases() {
    let p = sk_problem(7, 2).unwrap();
    let z = (0..p.dim()).find(|&z| p.energies[z] < p.mean()).unwrap();
    let zero = warmstart_ctqw(&p, tf(&p), 0.0, &WarmStartInitial::String(z), &[]).unwrap();
    assert_eq!(zero.hp_time_avg, zero.hp_initial);

    let grid = uniform_grid(0.0, 20.0, 41);
    let single = warmstart_ctqw(&p, tf(&p), 0.5, &WarmStartInitial::String(z), &grid).unwrap();
    assert!(single.conservation_residual < 1e-9);
    assert!(single.trajectory_residual.unwrap() < 1e-9);
    let total: f64 = single.distribution.iter().map(|x| x.1).sum();
    assert!((total - 1.0).abs() < 1e-10);

    for seed in 0..5 {
        for prob in [
            graph_problem(8, 20 + seed),
            sk_problem(8, 20 + seed).unwrap(),
        ] {
            let ens = WarmStartInitial::Ensemble(below_mean_ensemble(&prob));
            let r = warmstart_ctqw(&prob, tf(&prob), 0.5, &ens, &[]).unwrap();
            assert!(r.precondition);
            assert!(r.conservation_residual < 1e-9);
            assert!(r.heated(0.0), "{} < {}", r.hp_time_avg, r.hp_initial);
        }
    }
}

#[test]
fn two_and_three_stage_identity() {
    for seed in 0..4 {
        let p = graph_problem(8, 30 + seed);
        let (g2, g3) = (0.7, 1.5);
        let c = stage_comparison(&p, tf(&p), [0.3, g2, g3], 8.0, 16.0, 200).unwrap();
        let predicted = (g3 - g2) * (c.hp_t2 - c.hp_t1);
        assert!((c.difference - predicted).abs() < 1e-10 * c.energy_two.abs().max(1.0));
        assert_eq!(c.three_not_worse(), c.difference <= c.tolerance);
    }
}

#[test]
fn single_stage_walk_tracks_the_diagonal_ensemble() {
    let p = graph_problem(8, 40);
    let stairs = Schedule::staircase(Channel::Gamma, &[0.8], 60.0).unwrap();
    let run = msqw_run(&p, tf(&p), &stairs, 0.2, 1201).unwrap();
    let st = &run.stages[0];
    assert!(st.dephasing_gap().abs() <= 3.0 * st.stats.std + 1e-9);
    assert!(st.eth.is_some());
}

#[test]
fn passivity_ramp_matches_pure_state_mixture() {
    let p = sk_problem(5, 3).unwrap();
    let ramp = Schedule::staircase(Channel::Gamma, &[0.2, 0.6, 1.1], 2.0).unwrap();
    let grid = uniform_grid(0.0, 6.0, 25);
    let beta = 0.7;
    let run = passivity_ramp(&p, tf(&p), &ramp, PassiveInitial::Gibbs(beta), &grid).unwrap();
    assert!(run.initial_passive);

    let h0 = HamiltonianSpec::transverse(1.0, 0.2, &p);
    let eig = h0.eig().unwrap();
    let w = gibbs_weights(&eig.values, beta);
    let drive = Drive::new(vec![ramp.clone()]).unwrap();
    let template = HamiltonianSpec::transverse(1.0, 1.0, &p);
    let mut mix = vec![0.0; grid.len()];
    for (k, wk) in w.iter().enumerate() {
        let v: Vec<C64> = linalg::col(&eig.vectors, k)
            .iter()
            .map(|&x| C64::new(x, 0.0))
            .collect();
        let traj = evolve(&template, &drive, &v, &grid, &EvolveOptions::default()).unwrap();
        for (m, hp) in mix.iter_mut().zip(&traj.hp) {
            *m += wk * hp;
        }
    }
    for (a, b) in run.hp.iter().zip(&mix) {
        assert!((a - b).abs() < 1e-9);
    }
    assert!((run.hp0 - mix[0]).abs() < 1e-9);
}

#[test]
fn passivity_ramp_ground_state_bound() {
    for seed in 0..3 {
        let p = graph_problem(7, 50 + seed);
        let ramp = Schedule::staircase(Channel::Gamma, &[0.3, 0.6, 0.9, 1.2], 3.0).unwrap();
        let grid = uniform_grid(0.0, 12.0, 121);
        let run = passivity_ramp(&p, tf(&p), &ramp, PassiveInitial::Ground, &grid).unwrap();
        assert!(run.initial_passive);
        assert!(
            run.within(3.0),
            "excess {} sigma {}",
            run.max_excess,
            run.sigma
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn haar_cycles_are_doubly_stochastic(seed in any::<u64>(), n in 1usize..6) {
        let d = 1 << n;
        let u = DenseUnitary { dim: d, data: haar_unitary(d, &mut rng::stream(seed)) };
        prop_assert!(u.unitarity_error() < 1e-12);
        let tm = transition_matrix(&u).unwrap();
        prop_assert!(tm.stochasticity_error() < 1e-12);
        let p = sk_problem(n, seed).unwrap();
        let w = gibbs_weights(&p.energies, 1.0);
        prop_assert!(tm.mean_shift(&p.energies, &w) >= -1e-12);
    }

    #[test]
    fn entropy_ledger_record_register_is_exact(seed in any::<u64>(), n in 1usize..7) {
        let d = 1 << n;
        let mut r = rng::stream(seed);
        let u = haar_unitary(d, &mut r);
        let raw: Vec<f64> = (0..d).map(|k| ((k as f64 + 1.0) * (seed % 97) as f64).sin().abs()).collect();
        let total: f64 = raw.iter().sum();
        prop_assume!(total > 0.0);
        let p: Vec<f64> = raw.iter().map(|x| x / total).collect();
        let l = entropy_accounting(&p, |z| Ok(u[z * d..(z + 1) * d].to_vec())).unwrap();
        prop_assert!((l.sd_c - l.s0).abs() < 1e-12);
        prop_assert!(l.sd_joint + 1e-12 >= l.s0);
    }
}
