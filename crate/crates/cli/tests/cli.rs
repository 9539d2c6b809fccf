use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const FAST_SUITE: &str = r#"
[potential]
family = "poly_bump"
m = 4
c = 1.0
a = 1.0

[estimates]
decay_kappas = [20.0, 40.0, 80.0]
decay_etas = [0.0, 1.0]
b_samples = 10
j_kappas = [20.0, 40.0]
i_kappas = [20.0, 60.0]
level_kappas = [30.0, 100.0]
reflection_cases = 4
t2_kappas = [10.0, 100.0, 1000.0]
appendix_pairs = 2
appendix_kappas = [50.0, 100.0]
seeds = 8

[estimates.t2]
radial_nodes = 6
angular_nodes = 6
"#;

const SCATTER: &str = r#"
seed = 5

[potential]
family = "sum_of_bumps"
bumps = [ { m = 4, c = 1.0, a = 0.5, center = [0.2, 0.0, 0.0] },
          { m = 4, c = -0.6, a = 0.4, center = [-0.3, 0.1, 0.0] } ]

[grid]
n = 14

[forward]
k = 1.5
alpha = [0.0, 1.0, 1.0]
observations = 6

[backscatter]
beta_count = 3
k_list = [0.5, 1.0]
"#;

fn bslab(args: &[&str], cache: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bslab"))
        .args(args)
        .env("BSL_CACHE_DIR", cache)
        .output()
        .expect("binary runs")
}

fn run_in(dir: &Path, command: &str, config: &str, out: &str) -> Output {
    let cfg = dir.join(format!("{out}.toml"));
    fs::write(&cfg, config).unwrap();
    let out = dir.join(out);
    bslab(
        &[command, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()],
        &dir.join("cache"),
    )
}

#[test]
fn estimates_suite_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), "estimates", FAST_SUITE, "est");
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("est/estimates.json")).unwrap()).unwrap();
    let reports = json["reports"].as_array().unwrap();
    assert_eq!(reports.len(), 9);
    for r in reports {
        let name = r["name"].as_str().unwrap();
        assert!(dir.path().join(format!("est/{name}.csv")).exists(), "{name}");
        assert_eq!(r["passed"], serde_json::Value::Bool(true), "{name}");
    }
}

#[test]
fn malformed_file_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), "forward", "[potential]\nfamily = \"poly_bump\"\nm = = 4\n", "bad");
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 3, column"), "{err}");
}

#[test]
fn invalid_value_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[potential]\nfamily = \"poly_bump\"\nm = 4\nc = 1.0\na = -1.0\n";
    let o = run_in(dir.path(), "forward", cfg, "neg");
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line"));
}

#[test]
fn missing_config_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = bslab(&["radon", "--out", dir.path().to_str().unwrap()], &dir.path().join("c"));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn identical_pair_coincides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"
[q1]
family = "poly_bump"
m = 4
c = 1.0
a = 1.0

[q2]
family = "poly_bump"
m = 4
c = 1.0
a = 1.0

[probe]
beta_count = 2
k_list = [1.0, 2.0]
grid_n = 12
"#;
    let o = run_in(dir.path(), "probe", cfg, "probe");
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("probe/verdict.json")).unwrap()).unwrap();
    assert_eq!(v["verdict"]["conclusion"], "DataCoincideWithinTol");
    let csv = fs::read_to_string(dir.path().join("probe/level_set.csv")).unwrap();
    assert_eq!(csv.trim(), "kappa,eta_star,sup_value,margin");
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    for cmd in ["forward", "backscatter", "radon"] {
        let a = run_in(dir.path(), cmd, SCATTER, &format!("{cmd}_a"));
        assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
        fs::remove_dir_all(dir.path().join("cache")).ok();
        let b = run_in(dir.path(), cmd, SCATTER, &format!("{cmd}_b"));
        assert_eq!(b.status.code(), Some(0));
        for entry in fs::read_dir(dir.path().join(format!("{cmd}_a"))).unwrap() {
            let name = entry.unwrap().file_name();
            let x = fs::read(dir.path().join(format!("{cmd}_a")).join(&name)).unwrap();
            let y = fs::read(dir.path().join(format!("{cmd}_b")).join(&name)).unwrap();
            assert!(x == y, "{cmd}: {name:?} differs");
        }
    }
}

#[test]
fn warm_cache_matches_cold_run() {
    let dir = tempfile::tempdir().unwrap();
    let cold = run_in(dir.path(), "backscatter", SCATTER, "cold");
    assert_eq!(cold.status.code(), Some(0));
    let cached = fs::read_dir(dir.path().join("cache")).unwrap().count();
    assert!(cached > 0);
    let warm = run_in(dir.path(), "backscatter", SCATTER, "warm");
    assert_eq!(warm.status.code(), Some(0));
    for name in ["backscatter.json", "backscatter.csv"] {
        assert_eq!(
            fs::read(dir.path().join("cold").join(name)).unwrap(),
            fs::read(dir.path().join("warm").join(name)).unwrap(),
            "{name}"
        );
    }
    let cleared = bslab(&["cache-clear"], &dir.path().join("cache"));
    assert_eq!(cleared.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&cleared.stdout).contains(&format!("removed {cached}")));
}

#[test]
fn seed_flag_overrides_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("s.toml");
    fs::write(&cfg, SCATTER).unwrap();
    let out = dir.path().join("s");
    let o = bslab(
        &["radon", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", "11", "--threads", "1"],
        &dir.path().join("cache"),
    );
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("radon.json")).unwrap()).unwrap();
    assert_eq!(v["seed"], 11);
}
