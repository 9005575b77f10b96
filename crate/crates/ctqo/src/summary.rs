//! Campaign summaries, computed only from the written tables so that
//! `verify` can rebuild them from disk.

use std::collections::BTreeMap;

use serde_json::{json, Map, Value};

use crate::config::Experiment;
use crate::error::CliError;
use crate::table::{num, Table};

/// Width of the fluctuation band, in standard deviations, for the staircase
/// monotonicity count.
pub const MSQW_NSIGMA: f64 = 3.0;
/// A warm start counts as heated unless it ends this far below its start.
pub const WARMSTART_TOL: f64 = 1e-9;

fn find<'a>(tables: &'a [Table], name: &str) -> Result<&'a Table, CliError> {
    tables
        .iter()
        .find(|t| t.name == name)
        .ok_or_else(|| CliError::Data(format!("missing table `{name}`")))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.retain(|x| !x.is_nan());
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn max(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(f64::NAN, f64::max)
}

pub fn summarize(experiment: Experiment, tables: &[Table]) -> Result<Value, CliError> {
    let mut s = Map::new();
    s.insert("experiment".into(), json!(experiment.name()));
    match experiment {
        Experiment::Msqw => msqw(tables, &mut s)?,
        Experiment::Pstqa => pstqa(tables, &mut s)?,
        Experiment::Ansatz => ansatz(tables, &mut s)?,
        Experiment::Warmstart => warmstart(tables, &mut s)?,
        Experiment::Rqa | Experiment::Bqa => protocol(tables, &mut s)?,
        Experiment::GibbsSweep => gibbs(tables, &mut s)?,
        Experiment::Properties => properties(tables, &mut s)?,
    }
    Ok(Value::Object(s))
}

fn msqw(tables: &[Table], s: &mut Map<String, Value>) -> Result<(), CliError> {
    let st = find(tables, "stages")?;
    let mean_hp = st.numbers("hp_mean")?;
    let std_hp = st.numbers("hp_std")?;
    let diag = st.numbers("hp_diagonal")?;
    let groups = st.groups("instance")?;
    let mut monotone = 0;
    for (_, rows) in &groups {
        let ok = rows.windows(2).all(|w| {
            let band = MSQW_NSIGMA * std_hp[w[0]].max(std_hp[w[1]]);
            mean_hp[w[1]] <= mean_hp[w[0]] + band
        });
        monotone += ok as usize;
    }
    let gaps: Vec<f64> = mean_hp
        .iter()
        .zip(&diag)
        .map(|(m, d)| (m - d).abs())
        .collect();
    s.insert("instances".into(), json!(groups.len()));
    s.insert("monotone_instances".into(), json!(monotone));
    s.insert("band_nsigma".into(), json!(num(MSQW_NSIGMA)));
    s.insert("max_dephasing_gap".into(), json!(num(max(gaps))));
    Ok(())
}

fn pstqa(tables: &[Table], s: &mut Map<String, Value>) -> Result<(), CliError> {
    let inst = find(tables, "instances")?;
    let status = inst.strings("status")?;
    let ok = status.iter().filter(|x| **x == "ok").count();
    let tr = find(tables, "trajectory")?;
    let hp = tr.numbers("hp")?;
    let hp_s = tr.numbers("hp_schrodinger")?;
    let sd = tr.numbers("sd")?;
    let mut final_err = Vec::new();
    let mut drift: f64 = f64::NAN;
    for (_, rows) in tr.groups("instance")? {
        let last = *rows.last().expect("non-empty group");
        let (x, y) = (hp[last], hp_s[last]);
        if !x.is_nan() && !y.is_nan() {
            final_err.push((x - y).abs() / y.abs());
        }
        let s0 = sd[rows[0]];
        if !s0.is_nan() {
            drift = drift.max(max(rows.iter().map(|&r| (sd[r] - s0).abs() / s0.abs())));
        }
    }
    s.insert("instances".into(), json!(status.len()));
    s.insert("converged".into(), json!(ok));
    s.insert("breakdowns".into(), json!(status.len() - ok));
    s.insert(
        "median_final_relative_error".into(),
        json!(num(median(final_err.clone()))),
    );
    s.insert(
        "max_final_relative_error".into(),
        json!(num(max(final_err))),
    );
    s.insert("max_relative_entropy_drift".into(), json!(num(drift)));
    if let Some(paths) = tables.iter().find(|t| t.name == "paths") {
        s.insert(
            "max_path_relative".into(),
            json!(num(max(paths.numbers("relative")?))),
        );
    }
    Ok(())
}

fn ansatz(tables: &[Table], s: &mut Map<String, Value>) -> Result<(), CliError> {
    let inst = find(tables, "instances")?;
    let tr = find(tables, "trajectory")?;
    let exact = tr.numbers("hp_schrodinger")?;
    let groups = tr.groups("instance")?;
    s.insert("instances".into(), json!(inst.rows.len()));
    for model in ["gaussian", "emg"] {
        let status = inst.strings(&format!("status_{model}"))?;
        let hp = tr.numbers(&format!("hp_{model}"))?;
        let mut errs = Vec::new();
        for (_, rows) in &groups {
            let last = *rows.last().expect("non-empty group");
            if !hp[last].is_nan() {
                errs.push((hp[last] - exact[last]).abs() / exact[last].abs());
            }
        }
        s.insert(
            model.into(),
            json!({
                "converged": status.iter().filter(|x| **x == "ok").count(),
                "breakdowns": status.iter().filter(|x| **x == "breakdown").count(),
                "median_final_relative_error": num(median(errs.clone())),
                "max_final_relative_error": num(max(errs)),
            }),
        );
    }
    Ok(())
}

fn warmstart(tables: &[Table], s: &mut Map<String, Value>) -> Result<(), CliError> {
    let r = find(tables, "results")?;
    let g = r.strings("g")?;
    let h0 = r.numbers("hp_initial")?;
    let h1 = r.numbers("hp_time_avg")?;
    let res = r.numbers("conservation_residual")?;
    let mut by_g: BTreeMap<String, (usize, usize, Vec<f64>)> = BTreeMap::new();
    for k in 0..g.len() {
        let e = by_g.entry(g[k].to_string()).or_default();
        e.0 += 1;
        e.1 += (h1[k] >= h0[k] - WARMSTART_TOL) as usize;
        e.2.push(h1[k] - h0[k]);
    }
    let mut per = Vec::new();
    for (g, (runs, heated, rise)) in by_g {
        per.push(json!({
            "g": g,
            "runs": runs,
            "heated": heated,
            "mean_rise": num(mean(&rise)),
            "min_rise": num(rise.iter().copied().fold(f64::NAN, f64::min)),
        }));
    }
    s.insert("runs".into(), json!(g.len()));
    s.insert("by_g".into(), Value::Array(per));
    s.insert("max_conservation_residual".into(), json!(num(max(res))));
    Ok(())
}

fn protocol(tables: &[Table], s: &mut Map<String, Value>) -> Result<(), CliError> {
    let inst = find(tables, "instances")?;
    let found = inst.numbers("found_ground")?;
    let ratio = inst.numbers("approx_ratio")?;
    let used = inst.numbers("shots_used")?;
    let shots = find(tables, "shots")?;
    let hp_in = shots.numbers("hp_in")?;
    let hp_out = shots.numbers("hp_mean_out")?;
    let heated = hp_in.iter().zip(&hp_out).filter(|(i, o)| o > i).count();
    s.insert("instances".into(), json!(found.len()));
    s.insert(
        "found_ground".into(),
        json!(found.iter().filter(|&&f| f == 1.0).count()),
    );
    s.insert("mean_approx_ratio".into(), json!(num(mean(&ratio))));
    s.insert("median_shots_used".into(), json!(num(median(used))));
    s.insert("shots".into(), json!(hp_in.len()));
    s.insert("heated_shots".into(), json!(heated));
    if let Some(ens) = tables.iter().find(|t| t.name == "ensemble") {
        let inv = ens.numbers("inverse_psuc")?;
        let mut cost = Vec::new();
        for (_, rows) in ens.groups("instance")? {
            // A stage with nothing below it (the ground state) costs nothing.
            cost.push(
                rows.iter()
                    .map(|&r| inv[r])
                    .filter(|x| x.is_finite())
                    .sum::<f64>(),
            );
        }
        s.insert("median_expected_shots".into(), json!(num(median(cost))));
    }
    Ok(())
}

fn gibbs(tables: &[Table], s: &mut Map<String, Value>) -> Result<(), CliError> {
    let t = find(tables, "sweep")?;
    let inst = t.strings("instance")?;
    let beta = t.strings("beta")?;
    let hp = t.numbers("hp")?;
    let d2 = t.numbers("d2_free_energy")?;
    // Consecutive rows of one (instance, beta) pair form one sweep.
    let mut sweeps: Vec<(String, Vec<usize>)> = Vec::new();
    for k in 0..hp.len() {
        let key = format!("{}/{}", inst[k], beta[k]);
        match sweeps.last_mut() {
            Some((last, rows)) if *last == key => rows.push(k),
            _ => sweeps.push((key, vec![k])),
        }
    }
    let mut by_beta: BTreeMap<String, (usize, usize, f64)> = BTreeMap::new();
    for (key, rows) in &sweeps {
        let b = key.split_once('/').expect("key").1.to_string();
        let rise = max(rows.windows(2).map(|w| hp[w[1]] - hp[w[0]]));
        let e = by_beta.entry(b).or_insert((0, 0, f64::NAN));
        e.0 += 1;
        e.1 += (rise <= 1e-9) as usize;
        e.2 = e.2.max(rise);
    }
    let per: Vec<Value> = by_beta
        .into_iter()
        .map(|(b, (n, m, r))| json!({"beta": b, "sweeps": n, "monotone": m, "max_rise": num(r)}))
        .collect();
    s.insert("sweeps".into(), json!(sweeps.len()));
    s.insert("by_beta".into(), Value::Array(per));
    s.insert("max_d2_free_energy".into(), json!(num(max(d2))));
    Ok(())
}

fn properties(tables: &[Table], s: &mut Map<String, Value>) -> Result<(), CliError> {
    let t = find(tables, "checks")?;
    let suite = t.strings("suite")?;
    let value = t.numbers("value")?;
    let pass = t.strings("pass")?;
    let mut by: BTreeMap<&str, (usize, usize, f64)> = BTreeMap::new();
    for k in 0..suite.len() {
        let e = by.entry(suite[k]).or_insert((0, 0, f64::NAN));
        e.0 += 1;
        e.1 += (pass[k] == "1") as usize;
        e.2 = e.2.max(value[k]);
    }
    let all = by.values().all(|(n, p, _)| n == p);
    let mut per = Map::new();
    for (k, (n, p, w)) in by {
        per.insert(k.into(), json!({"checks": n, "passed": p, "worst": num(w)}));
    }
    s.insert("suites".into(), Value::Object(per));
    s.insert("all_pass".into(), json!(all));
    Ok(())
}

/// Field-by-field differences between two summaries, as dotted paths.
pub fn diff(expected: &Value, actual: &Value, path: &str, out: &mut Vec<String>) {
    match (expected, actual) {
        (Value::Object(a), Value::Object(b)) => {
            for k in a.keys().chain(b.keys().filter(|k| !a.contains_key(*k))) {
                let p = if path.is_empty() {
                    k.clone()
                } else {
                    format!("{path}.{k}")
                };
                match (a.get(k), b.get(k)) {
                    (Some(x), Some(y)) => diff(x, y, &p, out),
                    (Some(_), None) => out.push(format!("summary field `{p}` missing on disk")),
                    _ => out.push(format!("summary field `{p}` unexpected on disk")),
                }
            }
        }
        (Value::Array(a), Value::Array(b)) if a.len() == b.len() => {
            for (i, (x, y)) in a.iter().zip(b).enumerate() {
                diff(x, y, &format!("{path}[{i}]"), out);
            }
        }
        _ if expected == actual => {}
        _ => out.push(format!(
            "summary field `{path}`: recomputed {expected}, recorded {actual}"
        )),
    }
}
