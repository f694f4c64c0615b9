use std::f64::consts::{FRAC_PI_3, PI};
use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;
use sphsec::geometry::{cap_boundary_area, cap_volume};
use sphsec::verify::cap;

fn sphsec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sphsec")).args(args).output().expect("run sphsec")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn temp_file(name: &str, contents: &str) -> PathBuf {
    let p = std::env::temp_dir().join(format!("sphsec-cli-{}-{name}", std::process::id()));
    std::fs::write(&p, contents).unwrap();
    p
}

fn csv_rows(text: &str) -> Vec<Vec<f64>> {
    text.lines().skip(1).map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect()
}

fn json_lines(text: &str) -> Vec<Value> {
    text.lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

const OCTANT: &str = "# positive octant of S^2\n1 0 0\n0 1 0\n0 0 1\ninterior: 1 1 1\n";

#[test]
fn cap_delta_starts_at_zero_and_integrates_to_one() {
    let o = sphsec(&["cap-delta", "--dim", "3", "--radius", "1.0471975512"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.lines().next(), Some("t,f_delta,F_delta"));
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 512);
    assert_eq!(rows[0], vec![0.0, 0.0, 0.0]);
    let last = rows.last().unwrap();
    assert!((last[0] - 2.0944).abs() < 1e-4);
    assert!((last[2] - 1.0).abs() <= 1e-6, "F end {}", last[2]);
}

#[test]
fn closed_form_flag_matches_quadrature_rows() {
    let a = csv_rows(&stdout(&sphsec(&["cap-delta", "--dim", "4", "--radius", "0.8"])));
    let b = csv_rows(&stdout(&sphsec(&["cap-delta", "--dim", "4", "--radius", "0.8", "--closed-form"])));
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x[0], y[0]);
        assert!((x[1] - y[1]).abs() <= 1e-9, "t={}: {} vs {}", x[0], x[1], y[1]);
        assert_eq!(x[2], y[2]);
    }
}

#[test]
fn sigma_table_round_trips_through_transform() {
    // A fine σ table: for d = 3 the CDF has a square-root end, so linear
    // interpolation error falls like h^{3/2}.
    for (d, r) in [(3usize, "1.0471975512"), (4, "0.8")] {
        let sigma = sphsec(&["cap-sigma", "--dim", &d.to_string(), "--radius", r, "--grid", "20001"]);
        let path = temp_file(&format!("sigma-{d}.csv"), &stdout(&sigma));
        let c = cap(d, r.parse().unwrap()).unwrap();
        let (vol, bnd) = (cap_volume(&c).to_string(), cap_boundary_area(&c).to_string());
        let dim = d.to_string();
        let t = sphsec(&[
            "transform", "--sigma-cdf", path.to_str().unwrap(), "--volume", &vol, "--boundary", &bnd, "--dim", &dim,
        ]);
        assert!(t.status.success(), "{}", String::from_utf8_lossy(&t.stderr));
        let direct = csv_rows(&stdout(&sphsec(&["cap-delta", "--dim", &dim, "--radius", r])));
        let round = csv_rows(&stdout(&t));
        assert_eq!(direct.len(), round.len());
        for (x, y) in direct.iter().zip(&round) {
            assert_eq!(x[0], y[0]);
            assert!((x[1] - y[1]).abs() <= 1e-6, "d={d} t={}: {} vs {}", x[0], x[1], y[1]);
            assert!((x[2] - y[2]).abs() <= 1e-6);
        }
        std::fs::remove_file(path).unwrap();
    }
}

#[test]
fn transform_rejects_bad_tables_with_exit_3() {
    let empty = temp_file("empty.csv", "s,F_sigma\n");
    let o = sphsec(&["transform", "--sigma-cdf", empty.to_str().unwrap(), "--volume", "1", "--boundary", "1", "--dim", "3"]);
    assert_eq!(o.status.code(), Some(3));

    let bad = temp_file("bad.csv", "s,F_sigma\n0,0\n0.5,0.6\n1.0,0.4\n1.5,1\n");
    let o = sphsec(&["transform", "--sigma-cdf", bad.to_str().unwrap(), "--volume", "1", "--boundary", "1", "--dim", "3"]);
    assert_eq!(o.status.code(), Some(3));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("row 2"), "{err}");

    let missing = std::env::temp_dir().join("sphsec-cli-does-not-exist.csv");
    let o = sphsec(&["transform", "--sigma-cdf", missing.to_str().unwrap(), "--volume", "1", "--boundary", "1", "--dim", "3"]);
    assert_eq!(o.status.code(), Some(3));
    std::fs::remove_file(empty).unwrap();
    std::fs::remove_file(bad).unwrap();
}

#[test]
fn point_mass_sigma_gives_decreasing_bracket() {
    // σ ≡ 0.5: the bracket f / sin t drops linearly until 0.5, then stays flat.
    let table = temp_file("step.csv", "s,F_sigma\n0,0\n0.5,1\n");
    let o = sphsec(&[
        "transform", "--sigma-cdf", table.to_str().unwrap(), "--volume", "1", "--boundary", "1", "--dim", "3", "--interp",
        "step", "--grid", "101",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&stdout(&o));
    let bracket: Vec<f64> = rows.iter().skip(1).map(|r| r[1] / r[0].sin()).collect();
    for w in bracket.windows(2) {
        assert!(w[1] <= w[0] + 1e-12, "{w:?}");
    }
    std::fs::remove_file(table).unwrap();
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(sphsec(&["cap-delta", "--dim", "3", "--radius", "1.6"]).status.code(), Some(2));
    assert_eq!(sphsec(&["cap-delta", "--radius", "0.5"]).status.code(), Some(2));
    assert_eq!(sphsec(&["verify", "--suite", "everything"]).status.code(), Some(2));
    assert_eq!(sphsec(&["mc", "--what", "sigma", "--body", "halfspaces"]).status.code(), Some(2));
}

#[test]
fn mc_sigma_hit_rate_matches_cap_crofton() {
    let o = sphsec(&["mc", "--what", "sigma", "--body", "cap", "--dim", "3", "--radius", "1.0471975512", "--n", "100000", "--seed", "7"]);
    assert!(o.status.success());
    let v: Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    let (rate, se) = (v["hit_rate"].as_f64().unwrap(), v["hit_rate_se"].as_f64().unwrap());
    assert!((rate - 0.8660254).abs() <= 3.0 * se, "{rate} ± {se}");
    assert_eq!(v["n"], 100000);
    let counts: u64 = v["histogram"]["counts"].as_array().unwrap().iter().map(|c| c.as_u64().unwrap()).sum();
    assert_eq!(counts, 100000);
}

#[test]
fn mc_delta_stays_within_diameter() {
    let o = sphsec(&["mc", "--what", "delta", "--body", "cap", "--dim", "3", "--radius", "1.0471975512", "--n", "50000", "--seed", "7"]);
    let v: Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert!(v["max"].as_f64().unwrap() <= 2.0 * 1.0471975512);
    let raw = sphsec(&["mc", "--what", "delta", "--body", "cap", "--dim", "3", "--radius", "1.0471975512", "--n", "5000", "--format", "raw"]);
    let text = stdout(&raw);
    assert_eq!(text.lines().count(), 5001);
    assert!(text.lines().skip(1).all(|l| (0.0..=2.0 * 1.0471975512).contains(&l.parse::<f64>().unwrap())));
}

#[test]
fn mc_on_halfspace_body_file() {
    let body = temp_file("octant-mc.txt", OCTANT);
    let o = sphsec(&["mc", "--what", "sigma", "--body", "halfspaces", "--body-file", body.to_str().unwrap(), "--n", "50000"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    let (rate, se) = (v["hit_rate"].as_f64().unwrap(), v["hit_rate_se"].as_f64().unwrap());
    assert!((rate - 0.75).abs() <= 3.0 * se);
    assert!(v["max"].as_f64().unwrap() <= PI / 2.0 + 1e-12);

    let bad = temp_file("no-interior.txt", "1 0 0\n0 1 0\n0 0 1\n");
    let o = sphsec(&["mc", "--what", "sigma", "--body", "halfspaces", "--body-file", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    std::fs::remove_file(body).unwrap();
    std::fs::remove_file(bad).unwrap();
}

#[test]
fn tiny_cap_is_an_efficiency_error() {
    let o = sphsec(&["mc", "--what", "sigma", "--body", "cap", "--dim", "8", "--radius", "0.001", "--n", "1000"]);
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn default_suite_passes() {
    let o = sphsec(&["verify", "--suite", "default", "--seed", "1", "--n", "100000"]);
    let reports = json_lines(&stdout(&o));
    for r in &reports {
        assert_eq!(r["pass"], true, "{r}");
        assert_eq!(r["ms"], Value::Null);
    }
    assert_eq!(reports.len(), 14);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn crofton_suite_on_octant_file() {
    let body = temp_file("octant-verify.txt", OCTANT);
    let o = sphsec(&["verify", "--suite", "crofton", "--body-file", body.to_str().unwrap(), "--n", "50000"]);
    let reports = json_lines(&stdout(&o));
    let hit = reports.iter().find(|r| r["name"] == "crofton_hit").unwrap();
    assert_eq!(hit["stats"]["expected"], 0.75);
    assert_eq!(o.status.code(), Some(0));
    std::fs::remove_file(body).unwrap();
}

#[test]
fn bp_suite_lhs_is_pi_squared() {
    let o = sphsec(&["verify", "--suite", "bp", "--dim", "3", "--n", "50000"]);
    let reports = json_lines(&stdout(&o));
    assert_eq!(reports.len(), 1);
    assert!((reports[0]["stats"]["lhs"].as_f64().unwrap() - PI * PI).abs() < 1e-12);
    assert!((reports[0]["params"]["r"].as_f64().unwrap() - FRAC_PI_3).abs() < 1e-15);
}

#[test]
fn timing_flag_fills_ms() {
    let o = sphsec(&["verify", "--suite", "crofton", "--n", "5000", "--timing"]);
    assert!(json_lines(&stdout(&o)).iter().all(|r| r["ms"].is_u64()));
}

#[test]
fn worker_count_does_not_change_samples() {
    let args = |w: &'static str| {
        vec!["mc", "--what", "delta", "--body", "cap", "--dim", "4", "--radius", "0.8", "--n", "30000", "--seed", "5", "--format", "raw", "--workers", w]
    };
    assert_eq!(sphsec(&args("1")).stdout, sphsec(&args("4")).stdout);
}
