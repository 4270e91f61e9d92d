use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use flatgp_cli::{parse_dataset, write_dataset, Dataset, DatasetOptions};
use flatgp_core::Design;
use nalgebra::DVector;
use serde_json::Value;

const XS: [f64; 8] = [0.03, 0.17, 0.29, 0.41, 0.55, 0.68, 0.79, 0.94];
const NOISE: [f64; 8] = [0.05, -0.12, 0.08, 0.02, -0.07, 0.11, -0.03, 0.06];

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_flatgp"))
}

fn write_data(dir: &Path) -> PathBuf {
    let path = dir.join("data.csv");
    let mut s = String::from("x,y\n");
    for (x, e) in XS.iter().zip(NOISE) {
        let y = 0.1 * (2.0 * std::f64::consts::PI * x).sin() + x + 0.1 * e;
        s.push_str(&format!("{x},{y}\n"));
    }
    fs::write(&path, s).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn summary(prefix: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(prefix.with_extension("json")).unwrap()).unwrap()
}

fn csv_rows(prefix: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(prefix.with_extension("csv")).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# config: {"));
    let header = lines.next().unwrap().split(',').map(str::to_string).collect();
    let rows = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
    (header, rows)
}

fn col(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap()
}

fn num(s: &str) -> f64 {
    s.parse().unwrap()
}

#[test]
fn dof_grid_is_400_rows_and_monotone_in_gamma() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path());
    let out = dir.path().join("grid");
    let o = run(&[
        "dof-grid",
        "--data",
        data.to_str().unwrap(),
        "--eps-grid",
        "10:0.1:20",
        "--gamma-grid",
        "1e-3:1e3:20",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(matches!(o.status.code(), Some(0) | Some(2)), "{o:?}");
    let (h, rows) = csv_rows(&out);
    assert_eq!(rows.len(), 400);
    let (ie, id, is) = (col(&h, "eps"), col(&h, "dof"), col(&h, "status"));
    for column in rows.chunks(20) {
        let eps = &column[0][ie];
        assert!(column.iter().all(|r| &r[ie] == eps));
        let dofs: Vec<f64> = column.iter().filter(|r| r[is] == "ok").map(|r| num(&r[id])).collect();
        assert!(dofs.windows(2).all(|w| w[1] >= w[0]), "{dofs:?}");
    }
    let s = summary(&out);
    assert_eq!(s["seed"], 0);
    assert_eq!(s["config"]["command"], "dof-grid");
}

#[test]
fn pred_curve_endpoints() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path());
    let q = dir.path().join("q.csv");
    fs::write(&q, format!("x\n{}\n{}\n", XS[2], XS[5])).unwrap();
    let out = dir.path().join("curve");
    let o = run(&[
        "pred-curve",
        "--data",
        data.to_str().unwrap(),
        "--query",
        q.to_str().unwrap(),
        "--eps",
        "3",
        "--sigma2",
        "0.01",
        "--gamma-grid",
        "1e-12:1e8:21",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let (h, rows) = csv_rows(&out);
    let (a, b) = (col(&h, "at_a"), col(&h, "at_b"));
    let first = &rows[0];
    assert!(num(&first[a]).abs() < 1e-6 && num(&first[b]).abs() < 1e-6);
    let data = parse_dataset(&data, &DatasetOptions::default()).unwrap();
    let last = rows.last().unwrap();
    assert!((num(&last[a]) - data.y[2]).abs() < 1e-6);
    assert!((num(&last[b]) - data.y[5]).abs() < 1e-6);
}

#[test]
fn converge_exponential_passes() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path());
    let out = dir.path().join("conv");
    let o = run(&[
        "converge",
        "--data",
        data.to_str().unwrap(),
        "--kernel",
        "exponential",
        "--p",
        "1",
        "--eps-grid",
        "0.2:0.05:3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(&out);
    assert!(s["metrics"]["slope"].as_f64().unwrap() >= 0.8, "{s}");
    assert_eq!(s["metrics"]["pass"], true);
    assert_eq!(s["status"], "ok");
    let (_, rows) = csv_rows(&out);
    assert_eq!(rows.len(), 3);
}

#[test]
fn usage_and_parse_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "x,y\n1,2\n3,oops\n").unwrap();
    let o = run(&["fit", "--data", bad.to_str().unwrap(), "--eps", "1", "--gamma", "1"]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("non_numeric") && err.contains("row 3"), "{err}");

    let o = run(&["fit", "--data", "/nonexistent.csv", "--eps", "1", "--gamma", "1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing_file"));

    assert_eq!(run(&["not-a-command"]).status.code(), Some(1));
    let data = write_data(dir.path());
    let o = run(&["dof-grid", "--data", data.to_str().unwrap(), "--eps-grid", "1:0.1:3"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn numerical_failures_exit_two_with_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path());
    let out = dir.path().join("nug");
    let o = run(&[
        "nugget-compare",
        "--data",
        data.to_str().unwrap(),
        "--eps",
        "0.05",
        "--nugget",
        "1e-6",
        "--gamma-grid",
        "1:1e16:17",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let s = summary(&out);
    assert_eq!(s["status"], "partial");
    assert!(s["errors"].as_array().unwrap().iter().all(|e| e["code"] == "ill_conditioned"));
    let (h, rows) = csv_rows(&out);
    assert_eq!(rows.len(), 17);
    let (sn, sp) = (col(&h, "status_nugget"), col(&h, "status_plain"));
    assert!(rows.iter().all(|r| r[sn] == "ok"));
    assert_eq!(rows.last().unwrap()[sp], "ill_conditioned");
    let d = col(&h, "dof_nugget");
    let tail: Vec<f64> = rows[12..].iter().map(|r| num(&r[d])).collect();
    assert!(tail.windows(2).all(|w| (w[1] - w[0]).abs() < 1e-3), "{tail:?}");

    let o = run(&[
        "fit",
        "--data",
        data.to_str().unwrap(),
        "--eps",
        "0.01",
        "--gamma",
        "1",
        "--sigma2",
        "0",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let s = summary(&out);
    assert_eq!(s["status"], "failed");
    assert_eq!(s["errors"][0]["code"], "ill_conditioned");
}

#[test]
fn outputs_are_reproducible_and_thread_independent() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path());
    let args = |out: &Path| {
        vec![
            "criteria-grid".to_string(),
            "--data".into(),
            data.to_str().unwrap().into(),
            "--eps-grid".into(),
            "2:0.2:6".into(),
            "--gamma-grid".into(),
            "1e-2:1e4:7".into(),
            "--seed".into(),
            "17".into(),
            "--out".into(),
            out.to_str().unwrap().into(),
        ]
    };
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let oa = bin().args(args(&a)).env("FLATGP_THREADS", "1").output().unwrap();
    let ob = bin().args(args(&b)).env("FLATGP_THREADS", "4").output().unwrap();
    assert_eq!(oa.status.code(), ob.status.code());
    let strip = |p: &Path| {
        let s = fs::read_to_string(p.with_extension("csv")).unwrap();
        s.lines().skip(1).collect::<Vec<_>>().join("\n")
    };
    assert_eq!(strip(&a), strip(&b));
    assert_eq!(summary(&a)["seed"], 17);

    let o = bin().args(args(&a)).env("FLATGP_THREADS", "zero").output().unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn equiv_check_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path());
    let go = |out: &Path, model: &str| {
        run(&[
            "equiv-check",
            "--data",
            data.to_str().unwrap(),
            "--kernel",
            "exponential",
            "--p",
            "1",
            "--model",
            model,
            "--seed",
            "5",
            "--out",
            out.to_str().unwrap(),
        ])
    };
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(go(&a, "phs:1").status.code(), Some(0));
    assert_eq!(go(&b, "phs:1").status.code(), Some(0));
    let (sa, sb) = (summary(&a), summary(&b));
    assert_eq!(sa["metrics"]["equivalent"], true, "{sa}");
    assert_eq!(sa["metrics"], sb["metrics"]);
    assert_eq!(go(&a, "phs:2").status.code(), Some(0));
    assert_eq!(summary(&a)["metrics"]["equivalent"], false);
}

#[test]
fn other_commands_run() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path());
    let d = data.to_str().unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["fit", "--data", d, "--eps", "1", "--gamma", "2"],
        vec!["fit", "--data", d, "--model", "phs:2", "--gamma", "0.5"],
        vec!["predict", "--data", d, "--kernel", "matern", "--nu", "2.5", "--eps", "1", "--gamma", "1"],
        vec!["predict", "--data", d, "--eps", "1", "--gamma", "1", "--nugget", "1e-6"],
        vec!["isofreedom", "--data", d, "--eps-grid", "1:0.05:8", "--dof", "1.5,2.5"],
        vec!["matched", "--data", d, "--eps", "0.3", "--dof", "2.5"],
        vec!["matched", "--data", d, "--kernel", "matern", "--eps", "2", "--gamma", "1"],
    ];
    for (k, args) in cases.iter().enumerate() {
        let out = dir.path().join(format!("o{k}"));
        let mut a = args.clone();
        a.extend(["--out", out.to_str().unwrap()]);
        let o = run(&a);
        assert_eq!(o.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        assert_eq!(summary(&out)["status"], "ok");
        let (h, rows) = csv_rows(&out);
        assert!(!rows.is_empty());
        assert!(rows.iter().all(|r| r.len() == h.len()));
    }
    let iso = summary(&dir.path().join("o4"));
    for c in iso["metrics"]["curves"].as_array().unwrap() {
        let s = c["slope"].as_f64().unwrap();
        assert!((s - s.round()).abs() < 0.15, "{s}");
    }
    let stdout = run(&["fit", "--data", d, "--eps", "1", "--gamma", "1", "--format", "csv"]);
    let text = String::from_utf8(stdout.stdout).unwrap();
    assert!(text.starts_with("# config: ") && text.lines().nth(1).unwrap().starts_with("x_x,y,fitted"));
}

#[test]
fn dataset_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let vals: Vec<f64> = (0..30).map(|i| ((i as f64) * 0.7368).sin() * 10f64.powi(i % 7 - 3)).collect();
    let ds = Dataset {
        x: Design::new(vals[..20].to_vec(), 10, 2).unwrap(),
        y: DVector::from_column_slice(&vals[20..]),
        feature_names: vec!["a".into(), "b".into()],
        target_name: "t".into(),
    };
    let p = dir.path().join("rt.csv");
    write_dataset(&p, &ds).unwrap();
    let back = parse_dataset(&p, &DatasetOptions::default()).unwrap();
    assert_eq!(back.feature_names, ds.feature_names);
    for i in 0..10 {
        for (u, v) in back.x.point(i).iter().zip(ds.x.point(i)) {
            assert_eq!(u.to_bits(), v.to_bits());
        }
        assert_eq!(back.y[i].to_bits(), ds.y[i].to_bits());
    }
}
