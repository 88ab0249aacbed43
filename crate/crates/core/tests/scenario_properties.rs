use std::fs;
use std::process::Command;

use netadapt::scenario::bench::{timing_benchmark, BenchSpec};
use netadapt::scenario::{parse_config, parse_record, run_scenario, Mode, RunOptions, ScenarioConfig};

fn run_to(cfg: &ScenarioConfig, dir: &std::path::Path) -> (Vec<u8>, Vec<u8>) {
    let opts = RunOptions {
        out_dir: Some(dir.to_path_buf()),
        ..Default::default()
    };
    run_scenario(cfg, &opts).unwrap();
    (
        fs::read(dir.join("trajectory.csv")).unwrap(),
        fs::read(dir.join("states.csv")).unwrap(),
    )
}

#[test]
fn identical_config_and_seed_give_identical_csv() {
    for mode in [Mode::Continuous, Mode::Discrete] {
        for topology in ["star", "cyclic", "path"] {
            let mut cfg = ScenarioConfig::reference(mode, topology, 4).unwrap();
            cfg.disturbance_enabled = true;
            let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
            assert_eq!(run_to(&cfg, a.path()), run_to(&cfg, b.path()), "{mode} {topology}");
            cfg.seed += 1;
            let c = tempfile::tempdir().unwrap();
            assert_ne!(run_to(&cfg, c.path()).0, run_to(&ScenarioConfig { seed: cfg.seed - 1, ..cfg.clone() }, a.path()).0);
        }
    }
}

#[test]
fn csv_headers_follow_the_log_contract() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ScenarioConfig::reference(Mode::Continuous, "star", 3).unwrap();
    let (traj, _) = run_to(&cfg, dir.path());
    let text = String::from_utf8(traj).unwrap();
    assert_eq!(text.lines().next().unwrap(), "t,err_total,err_1,err_2,err_3,phi_frob,psi_frob,lyapunov");
    assert_eq!(text.lines().count(), 1 + cfg.samples);
    let second = text.lines().nth(1).unwrap();
    assert!(second.split(',').all(|f| f.contains('e')));

    let cfg = ScenarioConfig::reference(Mode::Discrete, "path", 2).unwrap();
    let (traj, _) = run_to(&cfg, dir.path());
    let text = String::from_utf8(traj).unwrap();
    assert_eq!(text.lines().next().unwrap(), "k,err_total,err_1,err_2,xi_frob,V_k,recon_residual");
    assert_eq!(text.lines().count(), 2 + cfg.steps);
}

#[test]
fn emitted_record_reparses_and_matches_report() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ScenarioConfig::reference(Mode::Discrete, "cyclic", 4).unwrap();
    cfg.disturbance_enabled = true;
    let out = run_scenario(
        &cfg,
        &RunOptions {
            out_dir: Some(dir.path().into()),
            ..Default::default()
        },
    )
    .unwrap();
    let record = parse_record(&fs::read_to_string(dir.path().join("report.kv")).unwrap()).unwrap();
    assert_eq!(record, out.report.record());
    assert_eq!(record.iss_pass, Some(record.tail_sup.unwrap() <= record.iss_bound.unwrap()));
    assert_eq!(record.trajectory_csv.as_deref(), Some(dir.path().join("trajectory.csv").to_str().unwrap()));
    assert!(fs::read_to_string(dir.path().join("report.txt")).unwrap().contains("trajectory.csv"));
}

/// Every validation rule of the scenario document, each paired with the key
/// its error must name.
#[test]
fn config_rejection_is_total() {
    let cases: &[(&str, &str)] = &[
        ("", "mode"),
        ("mode=discrete topology=star", "m"),
        ("mode=hybrid topology=star m=4", "mode"),
        ("mode=discrete topology=ring m=4", "topology"),
        ("mode=discrete topology=star m=0", "m"),
        ("mode=discrete topology=star m=four", "m"),
        ("mode=discrete topology=star m=4 n=0", "n"),
        ("mode=discrete topology=star m=4 p=0", "p"),
        ("mode=discrete topology=star m=4 seed=-1", "seed"),
        ("mode=discrete topology=star m=4 bogus=1", "bogus"),
        ("mode=discrete topology=star m=4 m=5", "m"),
        ("mode=discrete topology=star m=4 novalue", "novalue"),
        ("mode=discrete topology=star m=4 =3", "=3"),
        ("mode=discrete topology=star m=4 run.horizon=30", "run.horizon"),
        ("mode=discrete topology=star m=4 observer.weighting=identity", "observer.weighting"),
        ("mode=continuous topology=star m=4 run.steps=30", "run.steps"),
        ("mode=continuous topology=star m=4 observer.floor=0.1", "observer.floor"),
        ("mode=discrete topology=star m=4 graph.edges=1<-2:1", "graph.edges"),
        ("mode=discrete topology=custom m=2 graph.edges=1<-2:1", "graph.source"),
        ("mode=discrete topology=custom m=2 graph.edges=1-2:1 graph.source=1:1", "graph.edges"),
        ("mode=discrete topology=custom m=2 graph.source=1", "graph.source"),
        ("mode=discrete topology=star m=4 graph.normalize=maybe", "graph.normalize"),
        ("mode=discrete topology=star m=4 n=3", "source.matrix"),
        ("mode=discrete topology=star m=4 n=3 source.matrix=1,0,0;0,1,0;0,0,1", "source.input_matrix"),
        ("mode=discrete topology=star m=4 source.matrix=1,2,3", "source.matrix"),
        ("mode=discrete topology=star m=4 source.matrix=1,2;3", "source.matrix"),
        ("mode=discrete topology=star m=4 source.input_matrix=1,2", "source.input_matrix"),
        ("mode=discrete topology=star m=4 source.perturbation=-0.1", "source.perturbation"),
        ("mode=discrete topology=star m=4 source.input_perturbation=nan", "source.input_perturbation"),
        ("mode=discrete topology=star m=4 source.input=0;0", "source.input"),
        ("mode=discrete topology=star m=4 source.input=tan:1:1:1", "source.input"),
        ("mode=discrete topology=star m=4 source.disturbance=0", "source.disturbance"),
        ("mode=discrete topology=star m=4 source.disturbance_enabled=2", "source.disturbance_enabled"),
        ("mode=discrete topology=star m=4 source.disturbance_bound=0.01", "source.disturbance_bound"),
        ("mode=discrete topology=star m=4 source.x0=1,2,3", "source.x0"),
        ("mode=continuous topology=star m=4 observer.block=1,0;0,-1", "observer.block"),
        ("mode=discrete topology=star m=4 observer.block=1.1,0;0,0.5", "observer.block"),
        ("mode=discrete topology=star m=4 observer.block=0.5", "observer.block"),
        ("mode=discrete topology=star m=4 observer.block.5=0.5,0;0,0.5", "observer.block.5"),
        ("mode=discrete topology=star m=4 observer.block.2=2,0;0,0.5", "observer.block.2"),
        ("mode=discrete topology=star m=4 observer.gain=2.5", "observer.gain"),
        ("mode=discrete topology=star m=4 observer.gain=0", "observer.gain"),
        ("mode=continuous topology=star m=4 observer.gain=-1", "observer.gain"),
        ("mode=continuous topology=star m=4 observer.gain_psi=0", "observer.gain_psi"),
        ("mode=discrete topology=star m=4 observer.floor=0", "observer.floor"),
        ("mode=discrete topology=star m=4 observer.init_range=-1", "observer.init_range"),
        ("mode=continuous topology=star m=4 observer.weighting=dense", "observer.weighting"),
        ("mode=continuous topology=star m=4 run.horizon=0", "run.horizon"),
        ("mode=continuous topology=star m=4 run.rtol=0", "run.rtol"),
        ("mode=continuous topology=star m=4 run.atol=-1e-8", "run.atol"),
        ("mode=continuous topology=star m=4 run.samples=1", "run.samples"),
        ("mode=continuous topology=star m=4 run.tail_from=31", "run.tail_from"),
        ("mode=discrete topology=star m=4 run.steps=0", "run.steps"),
        ("mode=discrete topology=star m=4 run.reconstruct=sometimes", "run.reconstruct"),
        ("mode=discrete topology=star m=4 certificate.enabled=perhaps", "certificate.enabled"),
        ("mode=discrete topology=star m=4 certificate.q_scale=0", "certificate.q_scale"),
        ("mode=discrete topology=star m=4 certificate.epsilon_search=x", "certificate.epsilon_search"),
    ];
    for (doc, key) in cases {
        let err = parse_config(doc).expect_err(doc);
        assert!(err.to_string().contains(key), "'{doc}' gave '{err}', expected mention of '{key}'");
    }
}

#[test]
fn benchmark_runs_single_node() {
    for mode in [Mode::Continuous, Mode::Discrete] {
        let rows = timing_benchmark(&BenchSpec::new(mode, &["star", "cyclic", "path"], &[1])).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(rows.iter().all(|r| r.m == 1 && r.seconds.is_finite()));
    }
}

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_netadapt"))
}

#[test]
fn cli_run_writes_outputs_and_respects_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("s.cfg");
    let from_cfg = dir.path().join("from_cfg");
    let from_env = dir.path().join("from_env");
    let from_flag = dir.path().join("from_flag");
    fs::write(&cfg, format!("mode=discrete\ntopology=star\nm=3\nrun.out_dir={}\n", from_cfg.display())).unwrap();

    let status = cli().args(["run", "--config"]).arg(&cfg).env_remove("NETADAPT_OUT_DIR").output().unwrap().status;
    assert!(status.success());
    assert!(from_cfg.join("report.kv").exists());

    let status = cli().args(["run", "--config"]).arg(&cfg).env("NETADAPT_OUT_DIR", &from_env).output().unwrap().status;
    assert!(status.success());
    assert!(from_env.join("trajectory.csv").exists());

    let out = cli()
        .args(["run", "--seed", "9", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&from_flag)
        .env("NETADAPT_OUT_DIR", &from_env)
        .output()
        .unwrap();
    assert!(out.status.success());
    let record = parse_record(&fs::read_to_string(from_flag.join("report.kv")).unwrap()).unwrap();
    assert_eq!(record.seed, 9);
}

#[test]
fn cli_failures_name_the_stage() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.cfg");
    fs::write(&bad, "mode=discrete topology=star m=4 observer.gain=2.5\n").unwrap();
    let out = cli().args(["run", "--config"]).arg(&bad).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("config stage failed"));

    let unstable = dir.path().join("unstable.cfg");
    fs::write(
        &unstable,
        "mode=continuous topology=custom m=2 graph.edges=1<-2:0.5,2<-1:0.5 graph.source=1:0.5,2:0.5\n\
         observer.block=-1,0;0,-1 source.matrix=-10,0;0,-10 source.perturbation=0 run.horizon=0.5\n",
    )
    .unwrap();
    let out = cli().args(["run", "--config"]).arg(&unstable).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("operator stage failed"));
    let out = cli().args(["run", "--force-unstable", "--config"]).arg(&unstable).output().unwrap();
    assert!(out.status.success());

    let out = cli().args(["analyze", "--config"]).arg(&unstable).output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("operator stable      false"));
}

#[test]
fn cli_topologies_and_bench() {
    let out = cli().args(["topologies", "--m", "4"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("cyclic (m=4)") && text.contains("0.400"));

    let dir = tempfile::tempdir().unwrap();
    let out = cli()
        .args(["bench", "--sizes", "2,4", "--repeats", "1", "--threads", "2", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    let csv = fs::read_to_string(dir.path().join("bench.csv")).unwrap();
    assert_eq!(csv.lines().count(), 7);
    assert!(csv.starts_with("topology,m,seconds\nstar,2,"));
}
