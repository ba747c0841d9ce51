use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;
use settle_core::io::serialize_scenario;
use settle_core::optimizer::optimize_at;
use settle_core::presets::Preset;

fn settle(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_settle"))
        .args(args)
        .env_remove("MEDIATE_PRESET_DIR")
        .output()
        .expect("run settle")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// `key: value` lines of a summary.
fn field<'a>(text: &'a str, key: &str) -> &'a str {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}: ")))
        .unwrap_or_else(|| panic!("no `{key}` in\n{text}"))
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("settle-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn solve_fig2_at_phase_out() {
    let o = settle(&["solve", "fig2_red", "--time", "1.5708"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert_eq!(field(&out, "z[alternative_units]"), "100.00 81.82");
    assert_eq!(field(&out, "z[reimbursement]"), "27272.73");
    assert_eq!(field(&out, "regime"), "units_preferred");
    assert_eq!(field(&out, "near_insolvent"), "false");
    assert_eq!(field(&out, "t"), "1.5708");
}

#[test]
fn solve_fig5_with_flag() {
    let o = settle(&["solve", "--scenario", "fig5", "--time", "1.5708"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert_eq!(field(&out, "z[alternative_units]"), "100.00 70.00");
    assert_eq!(field(&out, "z[reimbursement]"), "32000.00");
    assert_eq!(field(&out, "regime"), "reimbursement_preferred");
}

#[test]
fn solve_json_is_full_precision() {
    let o = settle(&["solve", "fig2_red", "--time", "0.3", "--json"]);
    assert!(o.status.success());
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let lib = optimize_at(&Preset::Fig2Red.scenario(), 0.3).unwrap();
    assert_eq!(v, serde_json::to_value(lib).unwrap());
    assert_eq!(v["status"], "infeasible_demand_relaxed");
}

#[test]
fn solve_reads_files() {
    let path = tmp("fig5.toml");
    std::fs::write(&path, Preset::Fig5.text()).unwrap();
    let o = settle(&["solve", path.to_str().unwrap(), "--time", "2"]);
    assert!(o.status.success());
    assert_eq!(field(&stdout(&o), "z[reimbursement]"), "32000.00");
}

#[test]
fn input_errors_exit_one() {
    let o = settle(&["solve", "missing.toml", "--time", "1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.toml"));

    let bad = tmp("bad.toml");
    std::fs::write(
        &bad,
        Preset::Fig2Red
            .text()
            .replace("value_per_unit = 0.8", "value_per_unit = 1.2"),
    )
    .unwrap();
    let o = settle(&["solve", bad.to_str().unwrap(), "--time", "1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("money_value_fraction"));

    let o = settle(&["solve", "fig2_red"]);
    assert_eq!(o.status.code(), Some(1));
    let o = settle(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(1));
    let o = settle(&["solve", "fig2_red", "--time", "-1"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn regime_tie_exits_two() {
    let mut doc = Preset::Fig2Red.document();
    let d = |u: f64| 1.0 / (1.0 + 0.2 * u);
    doc.scenario.performances[1].value_per_unit = d(1.5) / d(1.1);
    let path = tmp("tie.toml");
    std::fs::write(&path, serialize_scenario(&doc)).unwrap();
    let o = settle(&["solve", path.to_str().unwrap(), "--time", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("regime tie"));
}

#[test]
fn help_exits_zero() {
    assert!(settle(&["--help"]).status.success());
    assert!(settle(&["simulate", "--help"]).status.success());
}

#[test]
fn simulate_summary_and_exports() {
    let csv = tmp("trace.csv");
    let o = settle(&["simulate", "fig2_red", "--out", csv.to_str().unwrap()]);
    assert!(o.status.success());
    let out = stdout(&o);
    let t_star: f64 = field(&out, "t_star").parse().unwrap();
    let units: f64 = field(&out, "units").parse().unwrap();
    assert!((t_star - 1.16).abs() <= 0.02);
    assert!((units - 182.0).abs() <= 1.0);
    assert_eq!(field(&out, "settlement"), "crossing");
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("t,g_1_1,g_1_2,g_2_1,N_min,S,R,G,gompertz\n"));
    assert_eq!(text.lines().count(), 1 + 400 + 1);

    let json = tmp("trace.json");
    let o = settle(&[
        "simulate",
        "fig2_red",
        "--steps",
        "50",
        "--out",
        json.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(v["points"].as_array().unwrap().len(), 50);

    // same run twice, same bytes
    let again = settle(&[
        "simulate",
        "fig2_red",
        "--steps",
        "50",
        "--out",
        json.to_str().unwrap(),
    ]);
    assert_eq!(again.stdout, o.stdout);
}

#[test]
fn simulate_two_steps_still_refines() {
    let o = settle(&["simulate", "fig2_red", "--steps", "2"]);
    assert!(o.status.success());
    let t_star: f64 = field(&stdout(&o), "t_star").parse().unwrap();
    assert!((t_star - 1.16).abs() <= 0.05);
}

#[test]
fn simulate_without_settlement() {
    let mut doc = Preset::Fig2Red.document();
    doc.scenario.gompertz.b = 0.01;
    let path = tmp("slow.toml");
    std::fs::write(&path, serialize_scenario(&doc)).unwrap();
    let o = settle(&["simulate", path.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("no settlement"));
}

#[test]
fn simulate_rejects_one_step() {
    let o = settle(&["simulate", "fig2_red", "--steps", "1"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn replicate_all_figures() {
    for fig in ["fig2", "fig3", "fig4", "fig5"] {
        let o = settle(&["replicate", fig]);
        let out = stdout(&o);
        assert!(o.status.success(), "{fig}:\n{out}");
        assert!(!out.contains("FAIL"));
        assert!(out.ends_with(&format!("{fig}: pass\n")));
    }
    let out = stdout(&settle(&["replicate", "fig5"]));
    let info: Vec<&str> = out.lines().filter(|l| l.starts_with("INFO")).collect();
    assert_eq!(info.len(), 2);
    assert!(info.iter().all(|l| l.contains("148405.0000")));
    assert!(info[0].contains("141839.7"));
    assert_eq!(settle(&["replicate", "fig9"]).status.code(), Some(1));
}

#[test]
fn preset_dir_overrides_bundled_presets() {
    let dir = tmp("presets");
    std::fs::create_dir_all(&dir).unwrap();
    let slower = Preset::Fig2Red
        .text()
        .replace("gompertz_b = 20.0", "gompertz_b = 1.0");
    assert_ne!(slower, Preset::Fig2Red.text());
    std::fs::write(dir.join("fig2_red.toml"), slower).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_settle"))
        .args(["simulate", "fig2_red"])
        .env("MEDIATE_PRESET_DIR", &dir)
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(stdout(&o).contains("no settlement"), "override was ignored");
    assert!(field(&stdout(&settle(&["simulate", "fig2_red"])), "t_star").starts_with("1.16"));
}

#[test]
fn compare_reports() {
    let o = settle(&["compare", "fig4"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert_eq!(field(&out, "decision"), "stay_with_supplier");
    assert_eq!(field(&out, "threshold"), "140625.00");
    assert_eq!(field(&out, "evaluated_at"), "settlement");

    let offer = tmp("offer.toml");
    std::fs::write(
        &offer,
        "alternate_value = 1000000.0\nexpected_damages = 0.0\ndamages_delay = 0.0\n\
         litigation_risk = 0.0\nalternate_failure_risk = 1.0\ntermination_cost = 0.0\n",
    )
    .unwrap();
    let o = settle(&[
        "compare",
        "fig2_red",
        "--alternate",
        offer.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert_eq!(field(&out, "decision"), "prefer_alternate");
    assert_eq!(field(&out, "flip_time"), "none");

    let o = settle(&["compare", "fig2_red"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn serve_on_busy_port_exits_one() {
    let busy = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let port = busy.local_addr().unwrap().port().to_string();
    let o = settle(&["serve", "--port", &port]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("cannot bind"));
}

/// Minimal HTTP/1.1 exchange; returns status code and body.
fn http(port: u16, method: &str, path: &str, body: &str) -> (u16, String) {
    use std::io::{Read, Write};
    let mut s = std::net::TcpStream::connect(("127.0.0.1", port)).unwrap();
    write!(
        s,
        "{method} {path} HTTP/1.1\r\nhost: localhost\r\ncontent-type: application/json\r\n\
         content-length: {}\r\nconnection: close\r\n\r\n{body}",
        body.len()
    )
    .unwrap();
    let mut raw = String::new();
    s.read_to_string(&mut raw).unwrap();
    let status = raw[9..12].parse().unwrap();
    let (head, body) = raw.split_once("\r\n\r\n").unwrap();
    assert!(head.to_ascii_lowercase().contains("content-length"));
    (status, body.to_string())
}

#[test]
fn serve_answers_like_solve() {
    use std::io::{BufRead, BufReader};
    let mut child = Command::new(env!("CARGO_BIN_EXE_settle"))
        .args(["serve", "--port", "0"])
        .stderr(std::process::Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stderr.take().unwrap())
        .read_line(&mut line)
        .unwrap();
    let port: u16 = line.trim().rsplit(':').next().unwrap().parse().unwrap();

    let (status, body) = http(port, "GET", "/v1/presets", "");
    assert_eq!(status, 200);
    assert_eq!(body, r#"["fig2_red","fig3","fig4","fig5"]"#);

    let (status, body) = http(
        port,
        "POST",
        "/v1/optimize",
        r#"{"preset":"fig2_red","t":1.5707963267948966}"#,
    );
    assert_eq!(status, 200);
    let api: Value = serde_json::from_str(&body).unwrap();
    let cli = settle(&[
        "solve",
        "fig2_red",
        "--time",
        "1.5707963267948966",
        "--json",
    ]);
    assert_eq!(api, serde_json::from_slice::<Value>(&cli.stdout).unwrap());
    child.kill().unwrap();
    child.wait().unwrap();
}
