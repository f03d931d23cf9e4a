use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;
use trendwarp::cli::{read_panel, read_table};
use trendwarp::synthgen::{generate, Scenario, ScenarioSpec};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_trendwarp"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn trendwarp")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn simulate(dir: &Path, extra: &[&str]) -> PathBuf {
    let mut args = vec!["simulate", "--out", p(dir)];
    args.extend_from_slice(extra);
    let o = run(&args);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    dir.join("panel.csv")
}

fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

fn file_names(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    names
}

#[test]
fn simulate_then_decompose_recovers_trend_and_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    let panel = simulate(&tmp.path().join("sim"), &["--scenario", "fig1"]);
    let fit_a = tmp.path().join("a");
    let fit_b = tmp.path().join("b");
    for dir in [&fit_a, &fit_b] {
        let o = run(&["decompose", p(&panel), "--l", "4", "--out", p(dir)]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let h = read_table(&fit_a.join("h_hat.csv")).unwrap();
    let truth = read_table(&tmp.path().join("sim/truth_h.csv")).unwrap();
    let err = rel_l2(h.column("h_hat").unwrap(), truth.column("h").unwrap());
    assert!(err <= 0.15, "relative trend error {err}");

    for name in ["h_hat.csv", "g_hat.csv", "warpings.csv", "cost_trace.csv", "summary.json"] {
        let a = fs::read(fit_a.join(name)).unwrap();
        let b = fs::read(fit_b.join(name)).unwrap();
        assert!(a == b, "{name} differs between identical runs");
    }
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(fit_a.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["family"], "legendre");
    assert_eq!(summary["l"], 4);
    assert!(summary["sigma_hat"].as_f64().unwrap() >= 0.0);
    assert!(summary["final_cost"].as_f64().is_some());
}

#[test]
fn simulate_is_reproducible_and_round_trips() {
    let tmp = TempDir::new().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let args = ["--scenario", "subspace_selection", "--n", "5", "--m", "60", "--seed", "11"];
    simulate(&a, &args);
    simulate(&b, &args);
    for name in file_names(&a) {
        assert!(fs::read(a.join(&name)).unwrap() == fs::read(b.join(&name)).unwrap(), "{name}");
    }

    let spec = ScenarioSpec::new(Scenario::SubspaceSelection).with_n(5).with_m(60).with_seed(11);
    let truth = generate(&spec).unwrap();
    let panel = read_panel(&a.join("panel.csv")).unwrap();
    assert_eq!(panel.names, ["f1", "f2", "f3", "f4", "f5"]);
    for (read, gen) in panel.observations.iter().zip(&truth.observations) {
        for (x, y) in read.values().iter().zip(gen.values()) {
            assert!((x - y).abs() <= 1e-11 * y.abs().max(1.0), "{x} vs {y}");
        }
    }
    let h = read_table(&a.join("truth_h.csv")).unwrap();
    for (x, y) in h.column("h").unwrap().iter().zip(truth.truth.h.values()) {
        assert!((x - y).abs() <= 5e-12 * y.abs().max(1e-300), "{x} vs {y}");
    }
}

#[test]
fn one_observation_is_an_input_error() {
    let tmp = TempDir::new().unwrap();
    let path = tmp.path().join("one.csv");
    fs::write(&path, "t,a\n0,1\n0.5,2\n1,3\n").unwrap();
    let o = run(&["decompose", p(&path), "--out", p(&tmp.path().join("out"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("need at least 2 observations"), "{}", stderr(&o));
}

#[test]
fn malformed_csv_reports_the_line() {
    let tmp = TempDir::new().unwrap();
    let path = tmp.path().join("bad.csv");
    fs::write(&path, "a,b\n1,2\n3,4\n5,oops\n7,8\n").unwrap();
    let o = run(&["decompose", p(&path), "--out", p(&tmp.path().join("out"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 4"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_with_one() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(run(&["decompose"]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["simulate", "--scenario", "nope"]).status.code(), Some(1));
    assert_eq!(run(&["decompose", "x.csv", "--l", "3", "--l-range", "1..4"]).status.code(), Some(1));
    let cfg = tmp.path().join("run.cfg");
    fs::write(&cfg, "basis = sine\ncolour = blue\n").unwrap();
    let o = run(&["simulate", "--config", p(&cfg), "--out", p(&tmp.path().join("o"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("colour"));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn rank_deficient_basis_is_a_numerical_failure() {
    let tmp = TempDir::new().unwrap();
    let path = tmp.path().join("tiny.csv");
    fs::write(&path, "a,b\n1,2\n2,1\n3,0\n1,1\n").unwrap();
    let o = run(&["decompose", p(&path), "--l", "12", "--out", p(&tmp.path().join("out"))]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("run.cfg");
    let out = tmp.path().join("sim");
    fs::write(
        &cfg,
        format!("# demo\nscenario = noise_perturbation\nn = 4\nm = 50\nsigma = 0.3\nout = {}\n", p(&out)),
    )
    .unwrap();
    let o = run(&["simulate", "--config", p(&cfg), "--n", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(s["scenario"], "noise_perturbation");
    assert_eq!(s["n"], 3);
    assert_eq!(s["m"], 50);
    assert_eq!(s["sigma"], 0.3);
}

#[test]
fn select_with_a_single_level_picks_it() {
    let tmp = TempDir::new().unwrap();
    let panel = simulate(&tmp.path().join("sim"), &["--scenario", "subspace_selection", "--n", "8", "--m", "80"]);
    let out = tmp.path().join("sel");
    let o = run(&["select", p(&panel), "--l-range", "3..3", "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("selected l = 3"));
    let s: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(s["selected_l"], 3);
    assert!(out.join("l3/h_hat.csv").exists());
}

#[test]
fn separation_model_refuses_to_select() {
    let tmp = TempDir::new().unwrap();
    let panel = simulate(&tmp.path().join("sim"), &["--scenario", "subspace_selection"]);
    let out = tmp.path().join("sel");
    let o = run(&["select", p(&panel), "--model", "separation", "--l-range", "1..10", "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("not selecting"), "{}", stdout(&o));
    let t = read_table(&out.join("selection.csv")).unwrap();
    let costs = t.column("neg_log_likelihood").unwrap();
    assert_eq!(costs.len(), 10);
    for c in costs {
        assert!((c - costs[0]).abs() <= 1e-10, "{costs:?}");
    }
    let s: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert!(s["selected_l"].is_null());
}

#[test]
fn align_recovers_the_generating_warping() {
    let tmp = TempDir::new().unwrap();
    let sim = tmp.path().join("sim");
    simulate(&sim, &["--scenario", "fig1", "--sigma", "0"]);
    let panel = read_table(&sim.join("panel.csv")).unwrap();
    let h = read_table(&sim.join("truth_h.csv")).unwrap();
    let g = read_table(&sim.join("truth_g.csv")).unwrap();
    let warps = read_table(&sim.join("truth_warpings.csv")).unwrap();
    let t = panel.column("t").unwrap();
    let f1 = panel.column("f1").unwrap();
    let mut text = String::from("t,q,r\n");
    for k in 0..t.len() {
        let q = f1[k] - h.column("h").unwrap()[k];
        text += &format!("{},{},{}\n", t[k], q, g.column("g").unwrap()[k]);
    }
    let pair = tmp.path().join("pair.csv");
    fs::write(&pair, text).unwrap();
    let out = tmp.path().join("al");
    let o = run(&["align", p(&pair), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let w = read_table(&out.join("warping.csv")).unwrap();
    let sup = w
        .column("gamma")
        .unwrap()
        .iter()
        .zip(warps.column("f1").unwrap())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(sup <= 0.02, "sup distance {sup}");
    let s: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert!(s["cost"].as_f64().unwrap() <= s["identity_cost"].as_f64().unwrap());
}

#[test]
fn fluctuation_of_constant_rates_is_zero() {
    let tmp = TempDir::new().unwrap();
    let rates = tmp.path().join("rates.csv");
    fs::write(&rates, "date,rate\n2020-01-01,6.9\n2020-01-02,6.9\n2020-01-03,6.9\n").unwrap();
    let out = tmp.path().join("fl");
    let o = run(&["fluctuation", p(&rates), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(out.join("fluctuation.csv")).unwrap();
    assert_eq!(text, "date,tau\n2020-01-02,0\n2020-01-03,0\n");

    fs::write(&rates, "rate\n100\n101\n").unwrap();
    assert_eq!(run(&["fluctuation", p(&rates), "--out", p(&out)]).status.code(), Some(0));
    assert_eq!(fs::read_to_string(out.join("fluctuation.csv")).unwrap(), "tau\n1\n");

    fs::write(&rates, "rate\n100\n-1\n").unwrap();
    assert_eq!(run(&["fluctuation", p(&rates), "--out", p(&out)]).status.code(), Some(2));
}

#[test]
fn bootstrap_with_two_replicates_warns() {
    let tmp = TempDir::new().unwrap();
    let panel = simulate(&tmp.path().join("sim"), &["--scenario", "fig1", "--n", "8", "--m", "80"]);
    let out = tmp.path().join("bs");
    let o = run(&["bootstrap", p(&panel), "--replicates", "2", "--max-iter", "5", "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stderr(&o).contains("warning"), "{}", stderr(&o));
    let tests = fs::read_to_string(out.join("tests.csv")).unwrap();
    assert!(tests.starts_with("test,statistic,se_b,p_value\nnull,"), "{tests}");
    let reps = read_table(&out.join("replicates.csv")).unwrap();
    assert_eq!(reps.rows(), 2);
}

#[test]
fn lower_alpha_gives_wider_bands() {
    let tmp = TempDir::new().unwrap();
    let panel = simulate(&tmp.path().join("sim"), &["--scenario", "fig1", "--n", "8", "--m", "80"]);
    let mut bands = Vec::new();
    for alpha in ["0.05", "0.01"] {
        let out = tmp.path().join(format!("bs{alpha}"));
        let o = run(&[
            "bootstrap", p(&panel), "--replicates", "8", "--max-iter", "5", "--alpha", alpha, "--seed", "4",
            "--out", p(&out),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        bands.push(read_table(&out.join("band_h.csv")).unwrap());
    }
    let (narrow, wide) = (&bands[0], &bands[1]);
    for k in 0..narrow.rows() {
        assert!(wide.column("low").unwrap()[k] <= narrow.column("low").unwrap()[k]);
        assert!(wide.column("high").unwrap()[k] >= narrow.column("high").unwrap()[k]);
    }
}

/// Six curves of 72 monthly samples, standing in for a price panel.
fn electricity_like(path: &Path) {
    let mut text = String::from("month");
    for y in 0..6 {
        text += &format!(",year{}", 2001 + y);
    }
    text.push('\n');
    for k in 0..72 {
        let t = k as f64 / 71.0;
        text += &format!("{}", k + 1);
        for y in 0..6 {
            let shift = 0.03 * (y as f64 - 2.5);
            let s = (t + shift * (1.0 - t) * t * 4.0).clamp(0.0, 1.0);
            let v = 8.0 + 0.4 * y as f64 + 2.0 * t + 1.5 * (2.0 * std::f64::consts::PI * 6.0 * s).cos()
                + 0.05 * ((k * 7 + y * 13) % 11) as f64;
            text += &format!(",{v}");
        }
        text.push('\n');
    }
    fs::write(path, text).unwrap();
}

#[test]
fn electricity_shaped_panel_produces_the_full_artifact_set() {
    let tmp = TempDir::new().unwrap();
    let real = tmp.path().join("prices.csv");
    electricity_like(&real);
    let synth = simulate(&tmp.path().join("sim"), &["--scenario", "fig1", "--n", "6", "--m", "72"]);

    let mut sets = Vec::new();
    for (name, panel) in [("real", &real), ("synth", &synth)] {
        let dec = tmp.path().join(format!("{name}_dec"));
        let o = run(&["decompose", p(panel), "--basis", "fourier", "--l", "3", "--plots", "--out", p(&dec)]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let sel = tmp.path().join(format!("{name}_sel"));
        let o = run(&["select", p(panel), "--l-range", "1..3", "--max-iter", "4", "--plots", "--out", p(&sel)]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let bs = tmp.path().join(format!("{name}_bs"));
        let o = run(&[
            "bootstrap", p(panel), "--l", "2", "--replicates", "3", "--max-iter", "4", "--plots", "--out", p(&bs),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        sets.push((file_names(&dec), file_names(&sel), file_names(&bs)));
    }
    assert_eq!(sets[0], sets[1]);
    let dec = &sets[0].0;
    for f in [
        "h_hat.csv", "g_hat.csv", "warpings.csv", "cost_trace.csv", "summary.json", "observations.svg", "h_hat.svg",
        "g_hat.svg", "warpings.svg", "cost_trace.svg",
    ] {
        assert!(dec.contains(&f.to_string()), "missing {f}");
    }
    let s: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("real_dec/summary.json")).unwrap()).unwrap();
    assert_eq!(s["time_column"], "month");
    assert_eq!(s["time_range"], serde_json::json!([1.0, 72.0]));
    assert_eq!(s["n"], 6);
    assert_eq!(s["m"], 72);
}
