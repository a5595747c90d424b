use std::path::Path;
use std::process::{Command, Output};

fn snls(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_snls"))
        .args(args)
        .env("SNLS_THREADS", "2")
        .output()
        .unwrap()
}

fn out_dir(dir: &Path) -> String {
    format!("output_dir={}", dir.display())
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const FAST: [&str; 4] = ["--set", "model.N=8", "--set", "policy.master_J=7"];

#[test]
fn simulate_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let o = snls(&[&["simulate", "--set", &out_dir(dir.path())][..], &FAST].concat());
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["observables.csv", "states_final.json", "manifest.json"] {
        assert!(dir.path().join(f).exists(), "{f} missing");
    }
    let csv = std::fs::read_to_string(dir.path().join("observables.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("t,mass,hamiltonian,f,h1_sq,h2_sq"));
}

#[test]
fn simulate_is_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = snls(&[&["simulate", "--set", &out_dir(d.path())][..], &FAST].concat());
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for f in ["observables.csv", "states_final.json"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert_eq!(x, y, "{f} differs");
    }
}

#[test]
fn zero_epsilon_needs_no_noise() {
    let dir = tempfile::tempdir().unwrap();
    let o = snls(
        &[&["simulate", "--set", "model.epsilon=0", "--set", "seed=1", "--set", &out_dir(dir.path())][..], &FAST]
            .concat(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let first = std::fs::read(dir.path().join("states_final.json")).unwrap();
    let o = snls(
        &[&["simulate", "--set", "model.epsilon=0", "--set", "seed=99", "--set", &out_dir(dir.path())][..], &FAST]
            .concat(),
    );
    assert!(o.status.success());
    assert_eq!(std::fs::read(dir.path().join("states_final.json")).unwrap(), first);
}

#[test]
fn manifest_replays_to_the_same_state() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let o = snls(&[&["simulate", "--set", "seed=7", "--set", &out_dir(a.path())][..], &FAST].concat());
    assert!(o.status.success());
    let manifest = a.path().join("manifest.json");
    let o = snls(&[
        "simulate",
        "--config",
        manifest.to_str().unwrap(),
        "--set",
        &out_dir(b.path()),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        std::fs::read(a.path().join("states_final.json")).unwrap(),
        std::fs::read(b.path().join("states_final.json")).unwrap()
    );
}

#[test]
fn single_step_run_gives_two_csv_rows() {
    let dir = tempfile::tempdir().unwrap();
    let o = snls(&[
        "simulate",
        "--set",
        "model.epsilon=0",
        "--set",
        "model.N=4",
        "--set",
        "model.u0=\"e1\"",
        "--set",
        "policy.delta=0.5",
        "--set",
        "policy.master_J=1",
        "--set",
        "model.T=0.001",
        "--set",
        &out_dir(dir.path()),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("observables.csv")).unwrap();
    // header, t = 0 and one or two accepted steps
    assert!((3..=4).contains(&csv.lines().count()), "{csv}");
    let last = csv.lines().last().unwrap();
    assert!(last.starts_with("1.0000000000000000e-3,"), "{last}");
}

#[test]
fn bad_config_key_exits_2_and_names_it() {
    let o = snls(&["simulate", "--set", "policy.gamma=0.9"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("policy.gamma"));
    let o = snls(&["simulate", "--set", "model.bogus=1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("model.bogus"));
}

#[test]
fn unknown_subcommand_exits_2() {
    let o = snls(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("Usage"));
}

#[test]
fn order_time_needs_four_levels() {
    let o = snls(&["order-time", "--set", "experiment.levels=[0.5,0.25,0.125]"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("need >= 4 levels"));
}

#[test]
fn noise_check_passes() {
    let o = snls(&["noise-check"]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("PASS"));
}

#[test]
fn order_time_writes_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = snls(&[
        "order-time",
        "--set",
        "model.N=8",
        "--set",
        "noise.K_W=8",
        "--set",
        "experiment.n_ref=16",
        "--set",
        "experiment.n_samples=4",
        "--set",
        "policy.master_J=7",
        "--set",
        "experiment.levels=[0.25,0.125,0.0625,0.03125]",
        "--set",
        &out_dir(dir.path()),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("errors.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("summary.json")).unwrap()).unwrap();
    assert!(summary["slope"].as_f64().is_some());
}

#[test]
fn ldp_mass_and_skeleton_run() {
    let dir = tempfile::tempdir().unwrap();
    let o = snls(&[
        &[
            "ldp-mass",
            "--set",
            "experiment.n_samples=100",
            "--set",
            "experiment.epsilons=[0.4,0.1]",
            "--set",
            &out_dir(dir.path()),
        ][..],
        &FAST,
    ]
    .concat());
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("ldp.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("epsilon,n,hits,p_hat,ci_lo,ci_hi,neg_eps_log_p"));
    assert_eq!(csv.lines().count(), 3);

    let o = snls(&[
        &[
            "skeleton",
            "--set",
            r#"experiment.control={"modes":[1],"breakpoints":[0.0,0.5],"values":[[1.0]]}"#,
            "--set",
            &out_dir(dir.path()),
        ][..],
        &FAST,
    ]
    .concat());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("rate cost 2.500000e-1"));
}

#[test]
fn invariant_failure_exits_1_with_dump() {
    // huge focusing data overflows within a few floor-sized steps
    let dir = tempfile::tempdir().unwrap();
    let o = snls(&[
        "simulate",
        "--set",
        "model.lambda=1",
        "--set",
        "model.N=8",
        "--set",
        r#"model.u0={"custom":[[1e8,0]]}"#,
        "--set",
        "policy.master_J=4",
        "--set",
        &out_dir(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stderr(&o).contains("failure_dump.json"));
    assert!(dir.path().join("failure_dump.json").exists());
}
