use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nanocarrier"))
}

fn run_ok(args: &[&str], cwd: &Path) -> String {
    let out = bin().args(args).current_dir(cwd).output().unwrap();
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn run_err(args: &[&str], cwd: &Path) -> Output {
    let out = bin().args(args).current_dir(cwd).output().unwrap();
    assert!(!out.status.success(), "{args:?} unexpectedly succeeded");
    out
}

/// Every file of a bundle, sorted by name.
fn bundle(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p: PathBuf| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

const SMALL_TUMOUR: &str = "[tumour]\nlattice_dims = [20, 20, 20]\ntarget_cell_count = 150\nvp_max_count = 30\n";
/// A short run on a six-cell chain.
const SHORT_EA: &str = "[scenario]\nfile = \"pool.txt\"\n[evolve]\ngenerations = 4\npopulation = 6\n";
const POOL: &str = "p V C C C C C C\n";

#[test]
fn grow_is_reproducible_and_reports_counts() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "t.toml", SMALL_TUMOUR);
    let a = run_ok(&["grow", "--config", "t.toml", "--seed", "5", "--out", "a"], tmp.path());
    run_ok(&["grow", "--config", "t.toml", "--seed", "5", "--out", "b"], tmp.path());
    assert!(a.contains("CSC fraction"));
    assert_eq!(bundle(&tmp.path().join("a")), bundle(&tmp.path().join("b")));
    let snap = fs::read_to_string(tmp.path().join("a/snapshot.txt")).unwrap();
    assert!(snap.starts_with("step="));
}

#[test]
fn single_cell_target() {
    let tmp = TempDir::new().unwrap();
    run_ok(&["grow", "--target", "1", "--seed", "0", "--out", "g"], tmp.path());
    let counts = fs::read_to_string(tmp.path().join("g/type_counts.csv")).unwrap();
    assert!(counts.contains("CC,1\n") && counts.contains("CSC,0\n"));
}

#[test]
fn missing_seed_is_drawn_and_printed() {
    let tmp = TempDir::new().unwrap();
    let out = run_ok(&["sample", "--worst-case", "hetero", "--out", "s"], tmp.path());
    let seed: u64 = out.lines().next().unwrap().strip_prefix("seed ").unwrap().parse().unwrap();
    let echo = fs::read_to_string(tmp.path().join("s/config.toml")).unwrap();
    assert!(echo.contains(&format!("master_seed = {seed}")));
    let scen = fs::read_to_string(tmp.path().join("s/scenarios.txt")).unwrap();
    assert_eq!(scen.split_whitespace().filter(|t| *t == "S").count(), 2);
}

/// A vessel at the origin with cells 1..=20 voxels along x: p95 is the
/// 19th smallest distance (nearest rank), 190 μm, hence 19 cells.
#[test]
fn auto_depth_follows_nearest_rank() {
    let tmp = TempDir::new().unwrap();
    let mut snap = String::from("step=0 dims=30,3,3\n0,VP,0,1,1,0\n");
    for i in 1..=20 {
        snap.push_str(&format!("{i},CC,{i},1,1,0\n"));
    }
    write(tmp.path(), "snap.txt", &snap);
    let out = run_ok(&["sample", "--snapshot", "snap.txt", "--n", "3", "--seed", "1", "--out", "s"], tmp.path());
    assert!(out.contains("p95 190 um, depth 19 cells"), "{out}");
    let scen = fs::read_to_string(tmp.path().join("s/scenarios.txt")).unwrap();
    assert_eq!(scen.lines().count(), 3);
    assert!(scen.lines().all(|l| l.split_whitespace().count() == 1 + 20));

    run_ok(&["sample", "--snapshot", "snap.txt", "--n", "0", "--seed", "1", "--out", "e"], tmp.path());
    assert_eq!(fs::read_to_string(tmp.path().join("e/scenarios.txt")).unwrap(), "");
}

#[test]
fn malformed_snapshot_names_the_line() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "bad.txt", "step=0 dims=3,3,3\n0,VP,0,0,0,0\n1,XX,1,1,1,0\n");
    let out = run_err(&["sample", "--snapshot", "bad.txt", "--seed", "0"], tmp.path());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn simulate_reference_design_kills_the_worst_case() {
    let tmp = TempDir::new().unwrap();
    let out = run_ok(&["simulate", "--worst-case", "homo", "--seed", "9", "--out", "r"], tmp.path());
    assert!(out.contains("CC killed 22/22"), "{out}");
    assert!(!out.contains("warning"));
}

#[test]
fn simulate_warns_on_toxic_dose_and_zero_dose_kills_nothing() {
    let tmp = TempDir::new().unwrap();
    let out = run_ok(
        &["simulate", "--design", "1e-6,1e5,1e6,1e4", "--seed", "1", "--out", "t"],
        tmp.path(),
    );
    assert!(out.contains("warning: NP1 dose"), "{out}");
    let out = run_ok(&["simulate", "--design", "1e-6,7e5,0,5000", "--seed", "1", "--out", "z"], tmp.path());
    assert!(out.contains("CC killed 0/22"), "{out}");
}

#[test]
fn trajectory_files_written_on_request() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "c.toml", "[tissue]\nfast_forward = false\ntrajectory_interval = 3600.0\n");
    write(tmp.path(), "s.txt", "a V C C E\n");
    run_ok(
        &["simulate", "--config", "c.toml", "--scenarios", "s.txt", "--design", "1e-6,7e5,6e4,5000", "--trajectory", "--seed", "2", "--out", "t"],
        tmp.path(),
    );
    let csv = fs::read_to_string(tmp.path().join("t/trajectory_a_0.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "t,compartment,species,np_f,r,c,np_i,alive");
    // 49 samples (0..=48 h) of 4 compartments
    assert_eq!(csv.lines().count(), 1 + 49 * 4);
}

#[test]
fn optimize_bundle_is_byte_identical_across_reruns_and_jobs() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "c.toml", SHORT_EA);
    write(tmp.path(), "pool.txt", POOL);
    run_ok(&["optimize", "--config", "c.toml", "--seed", "3", "--jobs", "1", "--out", "a"], tmp.path());
    run_ok(&["optimize", "--config", "c.toml", "--seed", "3", "--jobs", "3", "--out", "b"], tmp.path());
    let a = bundle(&tmp.path().join("a"));
    assert_eq!(a, bundle(&tmp.path().join("b")));
    let names: Vec<_> = a.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(names, ["best.toml", "config.toml", "run_log.csv", "scenarios.txt", "summary.csv"]);

    // rerun from the echoed configuration alone
    run_ok(&["optimize", "--config", "a/config.toml", "--out", "c"], tmp.path());
    assert_eq!(a, bundle(&tmp.path().join("c")));

    let best = fs::read_to_string(tmp.path().join("a/best.toml")).unwrap();
    for key in ["genes", "dose_mg_per_kg", "radius_nm", "dissociation_constant_nm", "lethal_threshold"] {
        assert!(best.contains(key), "missing {key}");
    }
}

#[test]
fn one_generation_gives_the_initial_population() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "c.toml", "[evolve]\ngenerations = 1\n");
    run_ok(&["optimize", "--mock", "--config", "c.toml", "--seed", "0", "--out", "o"], tmp.path());
    let log = fs::read_to_string(tmp.path().join("o/run_log.csv")).unwrap();
    assert_eq!(log.lines().count(), 1 + 20);
    assert_eq!(fs::read_to_string(tmp.path().join("o/summary.csv")).unwrap().lines().count(), 2);
}

#[test]
fn mock_smoke_run_approaches_the_target() {
    let tmp = TempDir::new().unwrap();
    let out = run_ok(&["optimize", "--mock", "--seed", "0", "--out", "m"], tmp.path());
    let last = out.lines().rfind(|l| l.starts_with("generation ")).unwrap();
    let best: f64 = last.split_whitespace().nth(3).unwrap().parse().unwrap();
    // minus squared distance in normalised coordinates
    assert!(best > -0.01, "{last}");
}

#[test]
fn evaluate_solution_matches_its_training_fitness() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "c.toml", SHORT_EA);
    write(tmp.path(), "pool.txt", POOL);
    run_ok(&["optimize", "--config", "c.toml", "--seed", "4", "--out", "o"], tmp.path());
    let best = fs::read_to_string(tmp.path().join("o/best.toml")).unwrap();
    let out = run_ok(
        &["evaluate", "--solution", "o/best.toml", "--scenarios", "o/scenarios.txt", "--seeds", "3", "--seed", "1", "--out", "e"],
        tmp.path(),
    );
    assert!(out.contains("1 scenarios x 3 seeds"), "{out}");
    let summary = fs::read_to_string(tmp.path().join("e/evaluation_summary.csv")).unwrap();
    let row: Vec<f64> = summary.lines().nth(1).unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    let trained: f64 = best
        .lines()
        .find_map(|l| l.strip_prefix("cc_fraction = "))
        .unwrap()
        .parse()
        .unwrap();
    // replicate noise on a six-cell chain
    assert!((row[2] - trained).abs() <= 0.1, "evaluated {} vs trained {trained}", row[2]);
}

#[test]
fn evaluate_empty_scenario_file_gives_empty_csv() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "none.txt", "");
    run_ok(
        &["evaluate", "--design", "1e-6,7e5,6e4,5000", "--scenarios", "none.txt", "--seed", "0", "--out", "e"],
        tmp.path(),
    );
    assert_eq!(
        fs::read_to_string(tmp.path().join("e/evaluation.csv")).unwrap(),
        "scenario,replicate,seed,cc_frac,csc_frac\n"
    );
}

#[test]
fn bad_inputs_are_rejected() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "bad.toml", "[evolve]\nmutation_prob = 2.0\n");
    run_err(&["optimize", "--config", "bad.toml", "--seed", "0"], tmp.path());
    run_err(&["simulate", "--design", "1,2,3", "--seed", "0"], tmp.path());
    run_err(&["evaluate", "--seed", "0"], tmp.path());
    run_err(&["optimize", "--jobs", "0", "--seed", "0"], tmp.path());
}
