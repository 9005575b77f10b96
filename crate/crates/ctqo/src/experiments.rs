//! One runner per experiment. Instances run on the rayon pool; each returns
//! its own rows and the tables are stitched back together in instance order.

use rayon::prelude::*;

use ctqo_core::ansatz::{emg_pstqa, gaussian_pstqa};
use ctqo_core::dynamics::{evolve, uniform_grid, Channel, Drive, EvolveOptions, Schedule};
use ctqo_core::operators::{plus_state, DriverSpec, HamiltonianSpec};
use ctqo_core::problems::{gen_binomial_graph, maxcut_problem, sk_problem, IsingProblem};
use ctqo_core::protocols::{
    below_mean_ensemble, bqa_run, cyclic_unitary, entropy_accounting, msqw_run,
    random_initial_string, rqa_run, transition_matrix, uniform_below_mean, warmstart_ctqw,
    AlphaDirection, BiasKind, CycleDrive, ProtocolConfig, ProtocolMode, ShotLog, WarmStartInitial,
};
use ctqo_core::pstqa::{
    path_independence_check, pstqa_entropy, pstqa_solve, timescale_invariance_check, ExactBackend,
    PstqaIntegrator, PstqaOptions, PstqaTrajectory,
};
use ctqo_core::rng::{self, derive_seed};
use ctqo_core::statmech::{cyclic_work, gibbs_hp_sweep, gibbs_weights};
use ctqo_core::{linalg, Error};

use crate::config::{
    Bias, CampaignConfig, Direction, Experiment, Family, Integrator, Mode, Model, ProblemSpec,
    ProtocolInitial, ProtocolSpec, Tolerances, WarmInitial,
};
use crate::error::CliError;
use crate::table::{flag, int, num, opt, Table};

/// Stream purposes below the instance seed.
const PURPOSE_START: u64 = 4;
const PURPOSE_SHOTS: u64 = 5;
const PURPOSE_HAAR: u64 = 6;

pub fn instance_seeds(problem: &ProblemSpec) -> Vec<u64> {
    (0..problem.count as u64)
        .map(|i| derive_seed(problem.seed, i))
        .collect()
}

pub fn build_problem(spec: &ProblemSpec, seed: u64) -> ctqo_core::Result<IsingProblem> {
    match spec.family {
        Family::Maxcut => maxcut_problem(&gen_binomial_graph(spec.n, spec.edge_probability, seed)?),
        Family::Sk => sk_problem(spec.n, seed),
    }
}

fn evolve_options(t: &Tolerances) -> EvolveOptions {
    let d = EvolveOptions::default();
    EvolveOptions {
        rtol: t.rtol.unwrap_or(d.rtol),
        atol: t.atol.unwrap_or(d.atol),
        ..d
    }
}

fn pstqa_options(t: &Tolerances, integrator: Option<Integrator>) -> PstqaOptions {
    let d = PstqaOptions::default();
    PstqaOptions {
        rtol: t.pstqa_rtol.unwrap_or(d.rtol),
        atol: t.pstqa_atol.unwrap_or(d.atol),
        integrator: integrator.map(|i| match i {
            Integrator::Collocation => PstqaIntegrator::Collocation,
            Integrator::Dp5 => PstqaIntegrator::Dp5,
        }),
        ..d
    }
}

fn driver(p: &IsingProblem) -> DriverSpec {
    DriverSpec::transverse_field(p.n)
}

/// Runs `f` on every instance in parallel and concatenates the tables each
/// call returns, in instance order.
fn per_instance<F>(cfg: &CampaignConfig, f: F) -> Result<Vec<Table>, CliError>
where
    F: Fn(usize, u64, &IsingProblem) -> ctqo_core::Result<Vec<Table>> + Sync,
{
    let seeds = instance_seeds(&cfg.problem);
    let parts: Vec<Vec<Table>> = seeds
        .par_iter()
        .enumerate()
        .map(|(i, &seed)| {
            let p = build_problem(&cfg.problem, seed).map_err(|e| CliError::from_core(i, e))?;
            f(i, seed, &p).map_err(|e| CliError::from_core(i, e))
        })
        .collect::<Result<_, _>>()?;
    let mut out: Vec<Table> = Vec::new();
    for part in parts {
        if out.is_empty() {
            out = part;
        } else {
            for (acc, t) in out.iter_mut().zip(part) {
                acc.extend(t);
            }
        }
    }
    Ok(out)
}

pub fn run(cfg: &CampaignConfig) -> Result<Vec<Table>, CliError> {
    match cfg.experiment {
        Experiment::Msqw => msqw(cfg),
        Experiment::Pstqa => pstqa(cfg),
        Experiment::Ansatz => ansatz(cfg),
        Experiment::Warmstart => warmstart(cfg),
        Experiment::Rqa | Experiment::Bqa => protocol(cfg),
        Experiment::GibbsSweep => gibbs(cfg),
        Experiment::Properties => properties(cfg),
    }
}

fn msqw(cfg: &CampaignConfig) -> Result<Vec<Table>, CliError> {
    let m = cfg.msqw.as_ref().expect("validated");
    let stairs = Schedule::staircase(Channel::Gamma, &m.gammas, m.stage_time)
        .map_err(|e| CliError::from_core(0, e))?;
    per_instance(cfg, |i, seed, p| {
        let run = msqw_run(p, driver(p), &stairs, m.burn_in, m.samples_per_stage)?;
        let mut inst = Table::new(
            "instances",
            &["instance", "seed", "n", "ground_energy", "hp_initial"],
        );
        inst.push(vec![
            int(i as u64),
            int(seed),
            int(p.n as u64),
            num(p.ground_state_energy()),
            num(p.mean()),
        ]);
        let mut traj = Table::new(
            "trajectory",
            &["instance", "t", "gamma", "hp", "hd", "energy"],
        );
        let tr = &run.trajectory;
        for k in 0..tr.times.len() {
            traj.push(vec![
                int(i as u64),
                num(tr.times[k]),
                num(stairs.value(tr.times[k])),
                num(tr.hp[k]),
                num(tr.hd[k]),
                num(tr.energy[k]),
            ]);
        }
        let mut stages = Table::new(
            "stages",
            &[
                "instance",
                "stage",
                "start",
                "end",
                "gamma",
                "hp_mean",
                "hp_std",
                "hp_diagonal",
                "hp_eth",
                "eth_beta",
                "sd_diagonal",
            ],
        );
        for (k, s) in run.stages.iter().enumerate() {
            stages.push(vec![
                int(i as u64),
                int(k as u64),
                num(s.start),
                num(s.end),
                num(s.gamma),
                num(s.stats.mean),
                num(s.stats.std),
                num(s.diagonal),
                opt(s.eth),
                opt(s.eth_beta),
                num(s.sd),
            ]);
        }
        Ok(vec![inst, traj, stages])
    })
}

fn tabulated_drive(points: &[[f64; 3]]) -> ctqo_core::Result<Drive> {
    let a = points.iter().map(|p| (p[0], p[1])).collect();
    let b = points.iter().map(|p| (p[0], p[2])).collect();
    Drive::new(vec![
        Schedule::tabulated(Channel::A, a)?,
        Schedule::tabulated(Channel::B, b)?,
    ])
}

/// Failures that end a thermal trajectory without invalidating the campaign.
fn thermal_failure(e: &Error) -> Option<f64> {
    match e {
        Error::ThermalBreakdown { t, .. } | Error::Integrator { t, .. } => Some(*t),
        Error::NegativeTemperature { .. } | Error::BelowGroundState { .. } => Some(0.0),
        Error::Ansatz(_) => Some(f64::NAN),
        _ => None,
    }
}

fn pstqa(cfg: &CampaignConfig) -> Result<Vec<Table>, CliError> {
    let s = cfg.pstqa.as_ref().expect("validated");
    let popts = pstqa_options(&cfg.tolerances, s.integrator);
    let eopts = EvolveOptions {
        entropy: true,
        ..evolve_options(&cfg.tolerances)
    };
    per_instance(cfg, |i, seed, p| {
        let h = HamiltonianSpec::transverse(1.0, 1.0, p);
        let drive = Drive::linear((s.a[0], s.a[1]), (s.b[0], s.b[1]), s.t_final)?;
        let grid = uniform_grid(0.0, s.t_final, s.samples);
        let psi = plus_state(p.n);
        let e0 = h.with_coeffs(s.a[0], s.b[0]).expectation(&psi)?;
        let backend = ExactBackend::new(h);
        let (thermal, stop) = match pstqa_solve(&backend, &drive, e0, &grid, &popts) {
            Ok(t) => (Some(t), None),
            Err(e) => match thermal_failure(&e) {
                Some(t) => {
                    log::warn!("instance {i}: {e}");
                    (None, Some(t))
                }
                None => return Err(e),
            },
        };
        let exact = if s.schrodinger {
            Some(evolve(&h, &drive, &psi, &grid, &eopts)?)
        } else {
            None
        };

        let mut inst = Table::new(
            "instances",
            &[
                "instance",
                "seed",
                "n",
                "ground_energy",
                "status",
                "breakdown_t",
            ],
        );
        inst.push(vec![
            int(i as u64),
            int(seed),
            int(p.n as u64),
            num(p.ground_state_energy()),
            if thermal.is_some() { "ok" } else { "breakdown" }.into(),
            opt(stop),
        ]);
        let mut traj = Table::new(
            "trajectory",
            &[
                "instance",
                "t",
                "s",
                "a",
                "b",
                "hp",
                "hd",
                "energy",
                "beta",
                "sd",
                "hp_schrodinger",
                "hd_schrodinger",
                "sd_schrodinger",
            ],
        );
        for (k, &t) in grid.iter().enumerate() {
            let (a, b) = drive.coeffs(t);
            let th = |f: fn(&PstqaTrajectory) -> &[f64]| thermal.as_ref().map(|x| f(x)[k]);
            let ex = exact.as_ref();
            traj.push(vec![
                int(i as u64),
                num(t),
                num(t / s.t_final),
                num(a),
                num(b),
                opt(th(|x| &x.hp[..])),
                opt(th(|x| &x.hd[..])),
                opt(th(|x| &x.energy[..])),
                opt(th(|x| &x.beta[..])),
                opt(th(|x| &x.sd[..])),
                opt(ex.map(|x| x.hp[k])),
                opt(ex.map(|x| x.hd[k])),
                opt(ex.and_then(|x| x.sd.as_ref().map(|sd| sd[k]))),
            ]);
        }
        let mut tables = vec![inst, traj];
        if let Some(path) = &s.second_path {
            let mut paths = Table::new(
                "paths",
                &["instance", "hp_difference", "energy_difference", "relative"],
            );
            let second = tabulated_drive(path)?;
            let row = match path_independence_check(&backend, (&drive, &second), e0, &popts) {
                Ok(d) => vec![num(d.hp), num(d.energy), num(d.relative)],
                Err(e) if thermal_failure(&e).is_some() => vec![opt(None), opt(None), opt(None)],
                Err(e) => return Err(e),
            };
            paths.push([vec![int(i as u64)], row].concat());
            tables.push(paths);
        }
        Ok(tables)
    })
}

fn ansatz(cfg: &CampaignConfig) -> Result<Vec<Table>, CliError> {
    let s = cfg.ansatz.as_ref().expect("validated");
    let popts = pstqa_options(&cfg.tolerances, None);
    let eopts = evolve_options(&cfg.tolerances);
    per_instance(cfg, |i, seed, p| {
        let h = HamiltonianSpec::transverse(1.0, 1.0, p);
        let d = driver(p);
        let drive = Drive::linear((s.a[0], s.a[1]), (s.b[0], s.b[1]), s.t_final)?;
        let grid = uniform_grid(0.0, s.t_final, s.samples);
        let psi = plus_state(p.n);
        let e0 = h.with_coeffs(s.a[0], s.b[0]).expectation(&psi)?;
        let exact = evolve(&h, &drive, &psi, &grid, &eopts)?;
        let mut results = Vec::new();
        for model in [Model::Gaussian, Model::Emg] {
            if !s.models.contains(&model) {
                results.push((None, "off"));
                continue;
            }
            let solved = match model {
                Model::Gaussian => gaussian_pstqa(p, &d, &drive, e0, &grid, &popts),
                Model::Emg => emg_pstqa(p, &d, &drive, e0, &grid, &popts),
            };
            match solved {
                Ok(t) => results.push((Some(t), "ok")),
                Err(e) if thermal_failure(&e).is_some() => {
                    log::warn!("instance {i}: {model:?} model: {e}");
                    results.push((None, "breakdown"));
                }
                Err(e) => return Err(e),
            }
        }
        let mut inst = Table::new(
            "instances",
            &[
                "instance",
                "seed",
                "n",
                "ground_energy",
                "kappa2",
                "kappa3",
                "status_gaussian",
                "status_emg",
            ],
        );
        inst.push(vec![
            int(i as u64),
            int(seed),
            int(p.n as u64),
            num(p.ground_state_energy()),
            num(p.kappa2),
            opt(p.kappa3),
            results[0].1.into(),
            results[1].1.into(),
        ]);
        let mut traj = Table::new(
            "trajectory",
            &[
                "instance",
                "t",
                "a",
                "b",
                "hp_schrodinger",
                "hp_gaussian",
                "beta_gaussian",
                "hp_emg",
                "beta_emg",
            ],
        );
        for (k, &t) in grid.iter().enumerate() {
            let (a, b) = drive.coeffs(t);
            let mut row = vec![int(i as u64), num(t), num(a), num(b), num(exact.hp[k])];
            for (r, _) in &results {
                row.push(opt(r.as_ref().map(|x| x.hp[k])));
                row.push(opt(r.as_ref().map(|x| x.beta[k])));
            }
            traj.push(row);
        }
        Ok(vec![inst, traj])
    })
}

fn warmstart(cfg: &CampaignConfig) -> Result<Vec<Table>, CliError> {
    let w = cfg.warmstart.as_ref().expect("validated");
    let grid = if w.samples > 0 {
        uniform_grid(0.0, w.t_final, w.samples)
    } else {
        Vec::new()
    };
    per_instance(cfg, |i, seed, p| {
        let (init, start) = match w.initial {
            WarmInitial::RandomString => {
                let z = random_initial_string(p, &mut rng::substream(seed, PURPOSE_START))?;
                (WarmStartInitial::String(z), z as i128)
            }
            WarmInitial::Ensemble => (WarmStartInitial::Ensemble(below_mean_ensemble(p)), -1),
        };
        let mut res = Table::new(
            "results",
            &[
                "instance",
                "seed",
                "g",
                "initial_string",
                "hp_initial",
                "hp_time_avg",
                "hd_initial",
                "hd_time_avg",
                "conservation_residual",
                "precondition",
            ],
        );
        let mut traj = Table::new("trajectory", &["instance", "g", "t", "hp", "hd"]);
        let mut dist = Table::new("distribution", &["instance", "g", "energy", "probability"]);
        for &g in &w.g {
            let r = warmstart_ctqw(p, driver(p), g, &init, &grid)?;
            res.push(vec![
                int(i as u64),
                int(seed),
                num(g),
                int(start),
                num(r.hp_initial),
                num(r.hp_time_avg),
                num(r.hd_initial),
                num(r.hd_time_avg),
                num(r.conservation_residual),
                flag(r.precondition),
            ]);
            if let Some(tr) = &r.trajectory {
                for k in 0..tr.times.len() {
                    traj.push(vec![
                        int(i as u64),
                        num(g),
                        num(tr.times[k]),
                        num(tr.hp[k]),
                        num(tr.hd[k]),
                    ]);
                }
            }
            for &(e, q) in &r.distribution {
                dist.push(vec![int(i as u64), num(g), num(e), num(q)]);
            }
        }
        Ok(vec![res, traj, dist])
    })
}

pub fn protocol_config(spec: &ProtocolSpec, tol: &Tolerances, seed: u64) -> ProtocolConfig {
    let d = ProtocolConfig::default();
    ProtocolConfig {
        k_max: spec.k_max,
        k: spec.k,
        alpha0: spec.alpha0,
        alpha_step: spec.alpha_step,
        alpha_direction: match spec.alpha_direction {
            Direction::Decrease => AlphaDirection::Decrease,
            Direction::Increase => AlphaDirection::Increase,
        },
        reset_alpha_on_accept: spec.reset_alpha_on_accept,
        bias: match spec.bias {
            Bias::Local => BiasKind::Local,
            Bias::Projector => BiasKind::Projector,
        },
        drive: CycleDrive {
            amplitude: spec.drive.amplitude,
            t_cycle: spec.drive.t_cycle,
            centre: spec.drive.centre,
            width: spec.drive.width,
            exponent: spec.drive.exponent,
        },
        seed,
        mode: match spec.mode {
            Mode::Sampled => ProtocolMode::Sampled,
            Mode::Dense => ProtocolMode::Dense,
        },
        psuc_cutoff: spec.psuc_cutoff,
        rtol: tol.rtol.unwrap_or(d.rtol),
        atol: tol.atol.unwrap_or(d.atol),
    }
}

fn shot_tables(i: usize, seed: u64, log: &ShotLog) -> (Table, Table, Table) {
    let mut shots = Table::new(
        "shots",
        &[
            "instance",
            "shot",
            "input",
            "output",
            "hp_in",
            "hp_out",
            "alpha",
            "accepted",
            "work",
            "hp_mean_out",
        ],
    );
    for s in &log.shots {
        shots.push(vec![
            int(i as u64),
            int(s.shot_index as u64),
            int(s.input as u64),
            int(s.output as u64),
            num(s.hp_in),
            num(s.hp_out),
            num(s.alpha),
            flag(s.accepted),
            num(s.work),
            num(s.hp_mean_out),
        ]);
    }
    let mut inst = Table::new(
        "instances",
        &[
            "instance",
            "seed",
            "initial",
            "hp_initial",
            "best",
            "best_hp",
            "ground_energy",
            "found_ground",
            "approx_ratio",
            "shots_used",
            "final_alpha",
        ],
    );
    let hp0 = log.shots.first().map_or(log.best_hp, |s| s.hp_in);
    inst.push(vec![
        int(i as u64),
        int(seed),
        int(log.initial as u64),
        num(hp0),
        int(log.best as u64),
        num(log.best_hp),
        num(log.ground_energy),
        flag(log.found_ground),
        num(log.approx_ratio),
        int(log.shots_used() as u64),
        num(log.final_alpha),
    ]);
    let mut ens = Table::new(
        "ensemble",
        &[
            "instance",
            "stage",
            "psuc",
            "inverse_psuc",
            "hp_in",
            "hp_cycled",
            "hp_selected",
            "sd_in_bits",
            "sd_cycled_bits",
            "sd_selected_bits",
        ],
    );
    for st in log.ensemble.iter().flatten() {
        ens.push(vec![
            int(i as u64),
            int(st.stage as u64),
            num(st.psuc),
            num(1.0 / st.psuc),
            num(st.hp_in),
            num(st.hp_cycled),
            num(st.hp_selected),
            num(st.sd_in_bits),
            num(st.sd_cycled_bits),
            num(st.sd_selected_bits),
        ]);
    }
    (shots, inst, ens)
}

fn protocol(cfg: &CampaignConfig) -> Result<Vec<Table>, CliError> {
    let spec = cfg.protocol.as_ref().expect("validated");
    let biased = cfg.experiment == Experiment::Bqa;
    let mut tables = per_instance(cfg, |i, seed, p| {
        let pc = protocol_config(spec, &cfg.tolerances, derive_seed(seed, PURPOSE_SHOTS));
        // Both protocols draw the same start for a given instance seed.
        let start = random_initial_string(p, &mut rng::substream(seed, PURPOSE_START))?;
        let log = if biased {
            bqa_run(p, driver(p), &pc, start)?
        } else {
            let initial = match spec.initial {
                ProtocolInitial::RandomString => {
                    let mut d = vec![0.0; p.dim()];
                    d[start] = 1.0;
                    d
                }
                ProtocolInitial::UniformBelowMean => uniform_below_mean(p),
            };
            rqa_run(p, driver(p), &pc, &initial)?
        };
        let (shots, inst, ens) = shot_tables(i, seed, &log);
        let mut out = vec![inst, shots];
        if spec.mode == Mode::Dense {
            out.push(ens);
        }
        Ok(out)
    })?;
    let schedule = CycleDrive {
        amplitude: spec.drive.amplitude,
        t_cycle: spec.drive.t_cycle,
        centre: spec.drive.centre,
        width: spec.drive.width,
        exponent: spec.drive.exponent,
    }
    .schedule()
    .map_err(|e| CliError::from_core(0, e))?;
    let mut drive = Table::new("drive", &["t", "g"]);
    for t in uniform_grid(0.0, spec.drive.t_cycle, spec.drive_samples) {
        drive.push(vec![num(t), num(schedule.value(t))]);
    }
    tables.push(drive);
    Ok(tables)
}

fn gibbs(cfg: &CampaignConfig) -> Result<Vec<Table>, CliError> {
    let g = cfg.gibbs_sweep.as_ref().expect("validated");
    let gammas = uniform_grid(g.gamma_min, g.gamma_max, g.points);
    per_instance(cfg, |i, _seed, p| {
        let mut sweep = Table::new(
            "sweep",
            &[
                "instance",
                "beta",
                "gamma",
                "hp",
                "free_energy",
                "d2_free_energy",
            ],
        );
        for &beta in &g.betas {
            let s = gibbs_hp_sweep(p, &driver(p), beta, &gammas)?;
            for k in 0..gammas.len() {
                let d2 = if k == 0 || k + 1 == gammas.len() {
                    None
                } else {
                    s.d2_free_energy.get(k - 1).copied()
                };
                sweep.push(vec![
                    int(i as u64),
                    num(beta),
                    num(gammas[k]),
                    num(s.hp[k]),
                    opt(s.free_energy.get(k).copied()),
                    opt(d2),
                ]);
            }
        }
        Ok(vec![sweep])
    })
}

struct Check {
    suite: &'static str,
    value: f64,
    tolerance: f64,
}

fn properties(cfg: &CampaignConfig) -> Result<Vec<Table>, CliError> {
    let spec = cfg.properties.as_ref().expect("validated");
    per_instance(cfg, |i, seed, p| {
        let mut checks = Vec::new();
        let d = driver(p);

        let mut r = rng::substream(seed, PURPOSE_HAAR);
        let mut worst = f64::NEG_INFINITY;
        for &beta in &spec.betas {
            let pops = gibbs_weights(&p.energies, beta);
            for _ in 0..spec.haar_unitaries {
                let u = linalg::haar_unitary(p.dim(), &mut r);
                worst = worst.max(cyclic_work(&p.energies, &pops, &u)?);
            }
        }
        checks.push(Check {
            suite: "gibbs_passivity_haar",
            value: worst,
            tolerance: 1e-10,
        });

        let cycle = cyclic_unitary(p, d, None, &CycleDrive::default().schedule()?)?
            .with_tolerances(1e-11, 1e-13);
        let dense = cycle.dense()?;
        let tm = transition_matrix(&dense)?;
        checks.push(Check {
            suite: "cycle_unitarity",
            value: dense.unitarity_error(),
            tolerance: 1e-9,
        });
        checks.push(Check {
            suite: "double_stochasticity",
            value: tm.stochasticity_error(),
            tolerance: 1e-9,
        });
        let mut shift = f64::INFINITY;
        for &beta in &spec.betas {
            shift = shift.min(tm.mean_shift(&p.energies, &gibbs_weights(&p.energies, beta)));
        }
        checks.push(Check {
            suite: "gibbs_passivity_cycle",
            value: -shift,
            tolerance: 1e-9,
        });

        let dist = uniform_below_mean(p);
        let ledger = entropy_accounting(&dist, |z| Ok(dense.column(z).to_vec()))?;
        checks.push(Check {
            suite: "entropy_ledger_record",
            value: (ledger.sd_c - ledger.s0).abs(),
            tolerance: 1e-12,
        });
        checks.push(Check {
            suite: "entropy_ledger_joint",
            value: ledger.s0 - ledger.sd_joint,
            tolerance: 1e-12,
        });

        let ws = warmstart_ctqw(
            p,
            d,
            0.5,
            &WarmStartInitial::Ensemble(below_mean_ensemble(p)),
            &[],
        )?;
        checks.push(Check {
            suite: "warmstart_no_go",
            value: ws.hp_initial - ws.hp_time_avg,
            tolerance: 0.0,
        });

        let gammas = uniform_grid(0.0, 3.0, 30);
        let sweep = gibbs_hp_sweep(p, &d, 1.0, &gammas)?;
        checks.push(Check {
            suite: "gibbs_sweep_monotone",
            value: sweep
                .hp
                .windows(2)
                .map(|w| w[1] - w[0])
                .fold(f64::NEG_INFINITY, f64::max),
            tolerance: 1e-9,
        });

        let h = HamiltonianSpec::transverse(1.0, 1.0, p);
        let backend = ExactBackend::new(h);
        let drive = Drive::linear((1.3, 0.7), (0.3, 1.3), 6.0)?;
        let popts = pstqa_options(&cfg.tolerances, None);
        let e0 = h.with_coeffs(1.3, 0.3).expectation(&plus_state(p.n))?;
        let (drift, scale) =
            match pstqa_solve(&backend, &drive, e0, &uniform_grid(0.0, 6.0, 13), &popts) {
                Ok(t) => {
                    let (sd, drift) = pstqa_entropy(&t);
                    let scale = timescale_invariance_check(
                        &backend,
                        &drive,
                        e0,
                        &[1.0, 0.7, 1.9],
                        9,
                        &popts,
                    )
                    .unwrap_or(f64::NAN);
                    (drift / sd[0].abs(), scale)
                }
                Err(e) if thermal_failure(&e).is_some() => (f64::NAN, f64::NAN),
                Err(e) => return Err(e),
            };
        checks.push(Check {
            suite: "pstqa_entropy_drift",
            value: drift,
            tolerance: 1e-6,
        });
        checks.push(Check {
            suite: "pstqa_timescale",
            value: scale,
            tolerance: 1e-6,
        });

        let mut t = Table::new(
            "checks",
            &["instance", "suite", "value", "tolerance", "pass"],
        );
        for c in checks {
            t.push(vec![
                int(i as u64),
                c.suite.into(),
                num(c.value),
                num(c.tolerance),
                flag(c.value <= c.tolerance),
            ]);
        }
        Ok(vec![t])
    })
}
