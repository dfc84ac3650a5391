//! End-to-end checks of the `dynsbm` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dynsbm_core::markov::chain_from_stationary;
use dynsbm_core::tsbm::{read_labels, read_snapshots};

fn dynsbm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dynsbm")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const SMALL: &str = r#"
[model]
n = 200
t = 10
intra = { density = 0.1, p11 = 0.6 }
inter = { density = 0.05, p11 = 0.3 }

[algorithm]
names = ["online-known"]
init = "random"
update_order = "asynchronous"

[run]
trials = 1
seed = 17
"#;

/// Variance of the number of ones in `t` steps of a stationary chain.
fn stationary_count_variance(pi: f64, p11: f64, p01: f64, t: usize) -> f64 {
    let lambda = p11 - p01;
    let mut corr = 1.0;
    for k in 1..t {
        corr += 2.0 * (1.0 - k as f64 / t as f64) * lambda.powi(k as i32);
    }
    t as f64 * pi * (1.0 - pi) * corr
}

#[test]
fn generate_round_trips_and_matches_density() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.toml", SMALL);
    let file = dir.path().join("x.tsbm");
    stdout(&dynsbm(&["generate", "--config", p(&cfg), "--out", p(&file)]));
    let (array, embedded) = read_snapshots(&file).unwrap();
    let truth = read_labels(&dir.path().join("x.tsbm.labels")).unwrap();
    assert_eq!(embedded.as_ref(), Some(&truth));
    assert_eq!((array.n(), array.t()), (200, 10));

    let text = std::fs::read_to_string(&file).unwrap();
    let comments = text.lines().filter(|l| l.starts_with('#')).count();
    assert_eq!(text.lines().count(), 2 + array.count_nonzero() + comments);

    let intra = chain_from_stationary(0.1, 0.6).unwrap();
    let inter = chain_from_stationary(0.05, 0.3).unwrap();
    let (mut mean, mut var) = (0.0, 0.0);
    for (i, j, _) in array.pairs() {
        let c = if truth.get(i) == truth.get(j) { intra } else { inter };
        mean += 10.0 * c.mu1;
        var += stationary_count_variance(c.mu1, c.p11, c.p01, 10);
    }
    let observed = array.count_nonzero() as f64;
    assert!((observed - mean).abs() <= 3.0 * var.sqrt(), "{observed} vs {mean} ± {}", 3.0 * var.sqrt());
}

#[test]
fn divergence_report_for_identical_chains_is_zero() {
    let out = dynsbm(&["divergence", "--n", "500", "--t", "10", "--mu1", "0.1", "--p11", "0.5", "--nu1", "0.1", "--q11", "0.5", "--json"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["exact"], 0.0);
    assert_eq!(v["j"], 0.0);
    assert_eq!(v["sparse_approximation"]["value"], 0.0);
    assert!(v["t_star"]["exact"].is_null());
    assert!(v["lower_bound"]["appendix"].is_number());
    assert!(v["lower_bound"]["main_text"].is_number());
}

#[test]
fn divergence_crosses_the_critical_level_between_12_and_13_snapshots() {
    let level = 2.0 * 500f64.ln() / 500.0;
    let exact_at = |t: &str| -> f64 {
        let args = [
            "divergence",
            "--n",
            "500",
            "--t",
            t,
            "--unit",
            "log-n-over-n",
            "--mu1",
            "1.5",
            "--p11",
            "0.7",
            "--nu1",
            "1.5",
            "--q11",
            "0.3",
            "--json",
        ];
        let v: serde_json::Value = serde_json::from_str(&stdout(&dynsbm(&args))).unwrap();
        v["exact"].as_f64().unwrap()
    };
    // Bhattacharyya distance (half the Rényi-1/2 divergence) against 2 log N / N
    assert!(exact_at("13") / 2.0 >= level);
    assert!(exact_at("12") / 2.0 < level);
    let text = stdout(&dynsbm(&[
        "divergence",
        "--n",
        "500",
        "--t",
        "13",
        "--unit",
        "log-n-over-n",
        "--mu1",
        "1.5",
        "--p11",
        "0.7",
        "--nu1",
        "1.5",
        "--q11",
        "0.3",
    ]));
    assert!(text.contains("lower bound (I^2)") && text.contains("lower bound (I^3/2)"));
}

fn threshold_cells(args: &[&str]) -> Vec<(f64, f64, Option<usize>)> {
    stdout(&dynsbm(args))
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[1].parse().unwrap(), f[2].parse().ok())
        })
        .collect()
}

#[test]
fn threshold_reproduces_the_three_curve_configurations() {
    for (mu1, expected) in [("1.5", 13), ("2.5", 14), ("4.0", 11)] {
        let cells = threshold_cells(&[
            "threshold",
            "--n",
            "500",
            "--mu1",
            mu1,
            "--nu1",
            "1.5",
            "--unit",
            "log-n-over-n",
            "--scale",
            "bhattacharyya",
            "--p11",
            "0.7",
            "--q11",
            "0.3",
        ]);
        assert_eq!(cells, vec![(0.7, 0.3, Some(expected))]);
    }
}

#[test]
fn threshold_grid_is_infinite_on_the_diagonal_and_monotone_along_rays() {
    let cells = threshold_cells(&[
        "threshold",
        "--n",
        "500",
        "--mu1",
        "1.5",
        "--nu1",
        "1.5",
        "--unit",
        "log-n-over-n",
        "--grid-min",
        "0.1",
        "--grid-max",
        "0.9",
        "--grid-step",
        "0.1",
    ]);
    assert_eq!(cells.len(), 81);
    let at = |p: f64, q: f64| cells.iter().find(|c| (c.0 - p).abs() < 1e-9 && (c.1 - q).abs() < 1e-9).unwrap().2;
    for c in &cells {
        assert_eq!(c.2.is_none(), (c.0 - c.1).abs() < 1e-9, "{c:?}");
    }
    let as_num = |t: Option<usize>| t.unwrap_or(usize::MAX);
    for &q in &[0.2, 0.5, 0.8] {
        let mut up: Vec<f64> = (1..10).map(|i| i as f64 / 10.0).filter(|&p| p > q + 1e-9).collect();
        let mut down: Vec<f64> = (1..10).map(|i| i as f64 / 10.0).filter(|&p| p < q - 1e-9).collect();
        down.reverse();
        for ray in [&mut up, &mut down] {
            for w in ray.windows(2) {
                assert!(as_num(at(w[1], q)) <= as_num(at(w[0], q)), "q11 {q}: {} -> {}", w[0], w[1]);
            }
        }
    }
    let csv = stdout(&dynsbm(&[
        "threshold",
        "--n",
        "500",
        "--mu1",
        "1.5",
        "--nu1",
        "1.5",
        "--unit",
        "log-n-over-n",
        "--p11",
        "0.5",
        "--q11",
        "0.5",
    ]));
    assert!(csv.lines().nth(1).unwrap().ends_with("inf,inf"));
}

#[test]
fn recover_prints_accuracy_with_four_decimals_and_writes_labels() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.toml", SMALL);
    let file = dir.path().join("x.tsbm");
    stdout(&dynsbm(&["generate", "--config", p(&cfg), "--out", p(&file)]));
    let labels = dir.path().join("est.labels");
    let out = stdout(&dynsbm(&[
        "recover",
        "--input",
        p(&file),
        "--algorithm",
        "alg2",
        "--mu1",
        "0.1",
        "--p11",
        "0.6",
        "--nu1",
        "0.05",
        "--q11",
        "0.3",
        "--out",
        p(&labels),
    ]));
    let line = out.lines().find(|l| l.starts_with("accuracy ")).unwrap();
    let value = line.trim_start_matches("accuracy ");
    assert_eq!(value.split('.').nth(1).unwrap().len(), 4, "{line}");
    assert_eq!(read_labels(&labels).unwrap().n(), 200);
}

#[test]
fn missing_kernel_parameters_are_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.toml", SMALL);
    let file = dir.path().join("x.tsbm");
    stdout(&dynsbm(&["generate", "--config", p(&cfg), "--out", p(&file)]));
    for alg in ["alg1", "alg2", "likelihood", "online-known"] {
        let out = dynsbm(&["recover", "--input", p(&file), "--algorithm", alg, "--mu1", "0.1"]);
        assert_eq!(out.status.code(), Some(2), "{alg}");
    }
    assert_eq!(dynsbm(&["recover", "--input", p(&file), "--algorithm", "alg5"]).status.code(), Some(0));
    assert_eq!(dynsbm(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(dynsbm(&["replicate-figure", "--figure", "9"]).status.code(), Some(2));
}

#[test]
fn runtime_failures_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "bad.toml", &SMALL.replace("trials = 1", "trials = 0"));
    assert_eq!(dynsbm(&["experiment", "--config", p(&bad)]).status.code(), Some(1));
    let missing = dir.path().join("missing.tsbm");
    assert_eq!(dynsbm(&["recover", "--input", p(&missing), "--algorithm", "alg5"]).status.code(), Some(1));
}

#[test]
fn best_friends_recovers_the_static_intra_instance() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "static.toml",
        r#"
[model]
n = 200
t = 20
intra = { density = 1.0, p11 = 1.0, p01 = 1.0 }
inter = { density = 0.3, p11 = 0.3, p01 = 0.3 }

[algorithm]
names = ["best-friends"]

[run]
seed = 4
"#,
    );
    let file = dir.path().join("static.tsbm");
    stdout(&dynsbm(&["generate", "--config", p(&cfg), "--out", p(&file)]));
    let out = stdout(&dynsbm(&["recover", "--input", p(&file), "--algorithm", "alg5"]));
    assert!(out.contains("accuracy 1.0000") && out.contains("ham_star 0"), "{out}");
}

#[test]
fn experiment_output_is_byte_identical_for_a_fixed_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "small.toml",
        &SMALL.replace("names = [\"online-known\"]", "names = [\"online-known\", \"best-friends\"]"),
    );
    let run = |name: &str, threads: &str| -> (String, String) {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_dynsbm"))
            .args(["experiment", "--config", p(&cfg), "--trials", "4", "--deterministic", "--out", p(&out)])
            .env("RAYON_NUM_THREADS", threads)
            .status()
            .unwrap();
        assert!(status.success());
        (std::fs::read_to_string(&out).unwrap(), std::fs::read_to_string(out.with_extension("summary.csv")).unwrap())
    };
    let a = run("a.csv", "1");
    let b = run("b.csv", "3");
    assert_eq!(a, b);
    assert!(a.0.contains("trial,t,algorithm,accuracy,ham_star,seconds"));
    assert!(a.0.lines().any(|l| l == "# trials = 4"));
    assert!(!a.0.contains("generated_at_unix"));
    // 4 trials x (10 online points + 1 final point)
    assert_eq!(a.0.lines().filter(|l| !l.starts_with('#')).count(), 1 + 4 * 11);
    let timed = dir.path().join("timed.csv");
    stdout(&dynsbm(&["experiment", "--config", p(&cfg), "--out", p(&timed)]));
    assert!(std::fs::read_to_string(&timed).unwrap().contains("# generated_at_unix"));
}

#[test]
fn single_trial_experiment_matches_recover_on_the_generated_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.toml", SMALL);
    let csv = dir.path().join("e.csv");
    stdout(&dynsbm(&["experiment", "--config", p(&cfg), "--deterministic", "--out", p(&csv)]));
    let last = std::fs::read_to_string(&csv).unwrap().lines().last().unwrap().to_string();
    let fields: Vec<&str> = last.split(',').collect();
    assert_eq!((fields[0], fields[1], fields[2]), ("0", "10", "online-known"));
    let file = dir.path().join("x.tsbm");
    stdout(&dynsbm(&["generate", "--config", p(&cfg), "--out", p(&file)]));
    let out = stdout(&dynsbm(&[
        "recover",
        "--input",
        p(&file),
        "--algorithm",
        "online-known",
        "--init",
        "random",
        "--update-order",
        "asynchronous",
        "--seed",
        "17",
        "--mu1",
        "0.1",
        "--p11",
        "0.6",
        "--nu1",
        "0.05",
        "--q11",
        "0.3",
    ]));
    let accuracy: f64 = fields[3].parse().unwrap();
    assert!(out.contains(&format!("accuracy {accuracy:.4}")), "{out} vs {last}");
    assert!(out.contains(&format!("ham_star {}", fields[4])), "{out} vs {last}");
}

#[test]
fn figure_bundles_have_the_documented_structure() {
    let dir = tempfile::tempdir().unwrap();
    let out = stdout(&dynsbm(&["replicate-figure", "--figure", "2", "--deterministic", "--out", p(dir.path())]));
    assert_eq!(out.lines().count(), 3);
    for panel in ["a", "b", "c"] {
        let text = std::fs::read_to_string(dir.path().join(format!("figure2{panel}.csv"))).unwrap();
        let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(rows[0], "p11,q11,t_star,log10_t_star");
        assert_eq!(rows.len(), 1 + 19 * 19);
    }
    stdout(&dynsbm(&["replicate-figure", "--figure", "4", "--trials", "1", "--deterministic", "--out", p(dir.path())]));
    for panel in ["a", "b", "c"] {
        let text = std::fs::read_to_string(dir.path().join(format!("figure4{panel}.csv"))).unwrap();
        let curves: std::collections::BTreeSet<&str> =
            text.lines().filter(|l| !l.starts_with('#')).skip(1).map(|l| l.split(',').next().unwrap()).collect();
        assert_eq!(curves.into_iter().collect::<Vec<_>>(), vec!["random-init", "spectral-init"]);
        assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 1 + 2 * 20);
    }
}
