use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ctqo::campaign::{self, Manifest};
use ctqo::{CampaignConfig, CliError, Experiment};

fn ctqo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ctqo"))
        .args(args)
        .output()
        .expect("spawn ctqo")
}

fn shipped_configs() -> Vec<PathBuf> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut v: Vec<PathBuf> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    v.sort();
    v
}

/// Small, fast variant of each experiment.
fn tiny(e: Experiment) -> CampaignConfig {
    let mut c = CampaignConfig::example(e);
    c.problem.n = 4;
    c.problem.count = 2;
    if let Some(m) = c.msqw.as_mut() {
        m.stage_time = 3.0;
        m.samples_per_stage = 21;
    }
    if let Some(p) = c.pstqa.as_mut() {
        p.t_final = 3.0;
        p.samples = 11;
        p.second_path = Some(vec![[0.0, 1.3, 0.3], [1.5, 1.3, 1.3], [3.0, 0.3, 1.3]]);
    }
    if let Some(a) = c.ansatz.as_mut() {
        a.t_final = 3.0;
        a.samples = 11;
    }
    if let Some(w) = c.warmstart.as_mut() {
        w.g = vec![0.5, 1.0];
        w.samples = 11;
        w.t_final = 4.0;
    }
    if let Some(p) = c.protocol.as_mut() {
        p.k_max = 20;
        p.k = 4;
        p.drive_samples = 11;
    }
    if let Some(g) = c.gibbs_sweep.as_mut() {
        g.points = 8;
    }
    if let Some(p) = c.properties.as_mut() {
        p.haar_unitaries = 5;
    }
    c
}

fn write_config(dir: &Path, cfg: &CampaignConfig) -> PathBuf {
    let path = dir.join(format!("{}.toml", cfg.experiment.name()));
    fs::write(&path, cfg.to_toml()).unwrap();
    path
}

fn read_dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().into_string().unwrap(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    v.sort();
    v
}

#[test]
fn shipped_configs_validate() {
    let configs = shipped_configs();
    assert!(configs.len() >= 10);
    let mut seen = std::collections::BTreeSet::new();
    for p in configs {
        let cfg = CampaignConfig::load(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        seen.insert(cfg.experiment.name());
    }
    for e in Experiment::ALL {
        assert!(
            seen.contains(e.name()),
            "no shipped config for {}",
            e.name()
        );
    }
}

#[test]
fn every_experiment_runs_and_verifies() {
    let tmp = tempfile::tempdir().unwrap();
    for e in Experiment::ALL {
        let cfg = tiny(e);
        let out = tmp.path().join(e.name());
        let m =
            campaign::run(&cfg, &out, Some(1)).unwrap_or_else(|err| panic!("{}: {err}", e.name()));
        assert_eq!(m.instance_seeds.len(), 2);
        assert!(m.files.iter().any(|f| f.name == "summary.json"));
        campaign::verify(&out).unwrap_or_else(|err| panic!("{}: {err}", e.name()));
    }
}

#[test]
fn properties_all_pass_on_small_instances() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("props");
    campaign::run(&tiny(Experiment::Properties), &out, None).unwrap();
    let summary: serde_json::Value =
        serde_json::from_slice(&fs::read(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["all_pass"], serde_json::json!(true), "{summary:#}");
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &tiny(Experiment::Warmstart));
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for (out, jobs) in [(&a, "1"), (&b, "3")] {
        let o = ctqo(&[
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--jobs",
            jobs,
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(read_dir_bytes(&a), read_dir_bytes(&b));
}

#[test]
fn seed_override_changes_instances_and_is_recorded() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &tiny(Experiment::GibbsSweep));
    let out = tmp.path().join("o");
    let o = ctqo(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--seed",
        "99",
    ]);
    assert!(o.status.success());
    let m: Manifest =
        serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m.seed, 99);
    assert_eq!(m.instance_seeds[1], ctqo_core::rng::derive_seed(99, 1));
    assert!(
        ctqo(&["verify", out.join("manifest.json").to_str().unwrap()])
            .status
            .success()
    );
}

#[test]
fn verify_names_a_corrupted_row() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    campaign::run(&tiny(Experiment::GibbsSweep), &out, None).unwrap();
    assert!(ctqo(&["verify", out.to_str().unwrap()]).status.success());

    let path = out.join("sweep.csv");
    let text = fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    let mut cells: Vec<String> = lines[3].split(',').map(str::to_string).collect();
    cells[3] = "123.5".into();
    lines[3] = cells.join(",");
    fs::write(&path, lines.join("\n") + "\n").unwrap();

    let o = ctqo(&["verify", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(6));
    let report: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(report["error"], "verify");
    let list: Vec<String> = serde_json::from_value(report["mismatches"].clone()).unwrap();
    assert!(
        list.iter().any(|m| m.starts_with("sweep.csv: sha256")),
        "{list:?}"
    );
    assert!(list.iter().any(|m| m.contains("summary field")), "{list:?}");
}

#[test]
fn verify_flags_an_edited_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    campaign::run(&tiny(Experiment::Properties), &out, None).unwrap();
    let path = out.join("summary.json");
    let text = fs::read_to_string(&path).unwrap();
    fs::write(
        &path,
        text.replace("\"all_pass\": true", "\"all_pass\": false"),
    )
    .unwrap();
    match campaign::verify(&out) {
        Err(CliError::Verify(list)) => {
            assert!(list.iter().any(|m| m.contains("`all_pass`")), "{list:?}")
        }
        other => panic!("expected a verification failure, got {other:?}"),
    }
}

#[test]
fn unknown_key_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny(Experiment::GibbsSweep)
        .to_toml()
        .replace("points = ", "pionts = ");
    let path = tmp.path().join("typo.toml");
    fs::write(&path, cfg).unwrap();
    let o = ctqo(&[
        "run",
        "--config",
        path.to_str().unwrap(),
        "--out",
        tmp.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let report: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(report["error"], "config");
    assert!(!tmp.path().join("o").exists());
}

#[test]
fn oversized_problem_hits_the_size_cap() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = tiny(Experiment::Warmstart);
    cfg.problem.n = ctqo_core::MAX_QUBITS + 1;
    let path = tmp.path().join("big.toml");
    fs::write(&path, cfg.to_toml()).unwrap();
    let o = ctqo(&[
        "run",
        "--config",
        path.to_str().unwrap(),
        "--out",
        tmp.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn output_directory_can_come_from_the_config() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = tiny(Experiment::GibbsSweep);
    cfg.output = Some(tmp.path().join("from_config"));
    let path = write_config(tmp.path(), &cfg);
    let o = ctqo(&["run", "--config", path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let written = fs::read_to_string(tmp.path().join("from_config/config.toml")).unwrap();
    assert!(!written.contains("output"));

    let o = ctqo(&[
        "run",
        "--config",
        tmp.path().join("missing.toml").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(5));
}

#[test]
fn mode_flags_only_apply_to_protocols() {
    let tmp = tempfile::tempdir().unwrap();
    let path = write_config(tmp.path(), &tiny(Experiment::GibbsSweep));
    let out = tmp.path().join("o");
    let o = ctqo(&[
        "run",
        "--config",
        path.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--dense",
    ]);
    assert_eq!(o.status.code(), Some(2));

    let path = write_config(tmp.path(), &tiny(Experiment::Rqa));
    let o = ctqo(&[
        "run",
        "--config",
        path.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--dense",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("ensemble.csv").exists());
}

#[test]
fn schema_and_listing() {
    let o = ctqo(&["list-experiments"]);
    let text = String::from_utf8(o.stdout).unwrap();
    for e in Experiment::ALL {
        assert!(text.contains(e.name()));
    }
    for e in Experiment::ALL {
        let o = ctqo(&["print-schema", e.name()]);
        assert!(o.status.success());
        let cfg = CampaignConfig::from_toml(&String::from_utf8(o.stdout).unwrap()).unwrap();
        assert_eq!(cfg, CampaignConfig::example(e));
    }
    assert_eq!(ctqo(&["print-schema", "nope"]).status.code(), Some(2));
}
