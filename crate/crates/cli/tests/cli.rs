mod common;

use std::path::Path;
use std::process::{Command, Output};

use plcnet_core::serialize_trace;

fn plcnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_plcnet"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write_trace(dir: &Path, name: &str, d: &plcnet_core::Deployment) -> String {
    let p = dir.join(name);
    std::fs::write(&p, serialize_trace(d)).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn generated_trace_is_analyzable() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("d.plctm");
    let p = path.to_str().unwrap();
    let o = plcnet(&[
        "generate",
        "--nodes",
        "4",
        "--profile",
        "complementary",
        "--seed",
        "7",
        "--out",
        p,
    ]);
    let summary = stdout(&o);
    assert!(summary.contains("profile complementary"));
    assert!(summary.contains("seed 7"));

    let csv = stdout(&plcnet(&["analyze", "--trace", p]));
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "link_tx,link_rx,phy_rate_slot1,phy_rate_slot2,phy_rate_slot3,phy_rate_slot4,phy_rate_slot5,\
         mean_phy_rate_bps,expected_throughput_bps,asymmetry,asymmetry_norm"
    );
    assert_eq!(lines.count(), 12);
}

#[test]
fn analyze_all_ten_and_symmetric_traces() {
    let tmp = tempfile::tempdir().unwrap();
    let p = write_trace(tmp.path(), "ten.plctm", &common::all_ten());
    let csv = stdout(&plcnet(&["analyze", "--trace", &p]));
    let row = csv.lines().nth(1).unwrap();
    assert_eq!(
        row,
        "N1,N2,151884058,151884058,151884058,151884058,151884058,151884058,91130435,0.000000,0.000000"
    );

    let sym = tmp.path().join("sym.plctm");
    let s = sym.to_str().unwrap();
    stdout(&plcnet(&[
        "generate",
        "--nodes",
        "3",
        "--profile",
        "uniform",
        "--out",
        s,
    ]));
    let csv = stdout(&plcnet(&["analyze", "--trace", s]));
    for row in csv.lines().skip(1) {
        assert!(row.ends_with(",0.000000,0.000000"), "{row}");
    }
}

#[test]
fn exit_codes() {
    assert_eq!(plcnet(&["generate", "--nodes", "1"]).status.code(), Some(1));
    assert_eq!(
        plcnet(&["generate", "--profile", "fractal"]).status.code(),
        Some(1)
    );
    assert_eq!(plcnet(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(plcnet(&["simulate", "--bogus"]).status.code(), Some(1));
    assert_eq!(
        plcnet(&["simulate", "--duration-us", "0"]).status.code(),
        Some(1)
    );
    assert_eq!(
        plcnet(&["simulate", "--flows", "N1-N2"]).status.code(),
        Some(1)
    );
    assert_eq!(
        plcnet(&["simulate", "--flows", "N1:N9"]).status.code(),
        Some(1)
    );
    assert_eq!(plcnet(&["sweep", "--beta", ","]).status.code(), Some(1));

    let missing = plcnet(&["analyze", "--trace", "/nonexistent/x.plctm"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(!missing.stderr.is_empty());

    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.plctm");
    std::fs::write(&bad, "plctm 2\n").unwrap();
    assert_eq!(
        plcnet(&["analyze", "--trace", bad.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );

    assert_eq!(plcnet(&["--help"]).status.code(), Some(0));
}

#[test]
fn simulate_writes_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let o = out.to_str().unwrap();
    stdout(&plcnet(&[
        "simulate",
        "--nodes",
        "4",
        "--seed",
        "2",
        "--ss",
        "on",
        "--duration-us",
        "400000",
        "--events",
        "--out",
        o,
    ]));
    let metrics = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert!(metrics.starts_with("metric,value\naggregate_throughput,"));
    let gain: f64 = metrics
        .lines()
        .find_map(|l| l.strip_prefix("aggregate_gain_pct,"))
        .unwrap()
        .parse()
        .unwrap();
    assert!(gain > 0.0);
    let gains = std::fs::read_to_string(out.join("gains.csv")).unwrap();
    assert!(gains.starts_with("link_tx,link_rx,base,ss,gain_pct\n"));
    let events = std::fs::read_to_string(out.join("events.csv")).unwrap();
    assert!(events
        .starts_with("time_us,event,node,link_tx,link_rx,role,stage,bc,dc,spectrum_fraction\n"));
    assert!(events.contains(",ss_engage,"));

    // off writes no comparison
    let off = tmp.path().join("off");
    stdout(&plcnet(&[
        "simulate",
        "--nodes",
        "4",
        "--seed",
        "2",
        "--ss",
        "off",
        "--duration-us",
        "400000",
        "--out",
        off.to_str().unwrap(),
    ]));
    assert!(!off.join("gains.csv").exists());
    assert!(!off.join("events.csv").exists());
}

#[test]
fn sweep_matches_simulate_and_keeps_input_order() {
    let common_args = ["--nodes", "4", "--seed", "5", "--duration-us", "300000"];
    let mut args = vec!["sweep", "--beta", "4,2,4"];
    args.extend(common_args);
    let csv = stdout(&plcnet(&args));
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "beta,aggregate_gain_pct,jfi_delta,fsse_delta");
    assert_eq!(rows.len(), 4);
    assert!(rows[1].starts_with("4,") && rows[2].starts_with("2,"));
    assert_eq!(rows[1], rows[3]);

    let mut args = vec!["simulate", "--ss", "on", "--beta", "2"];
    args.extend(common_args);
    let sim = stdout(&plcnet(&args));
    let field = |name: &str| -> String {
        sim.lines()
            .find_map(|l| l.strip_prefix(&format!("{name},")))
            .unwrap()
            .to_string()
    };
    let cols: Vec<&str> = rows[2].split(',').collect();
    assert_eq!(cols[1], field("aggregate_gain_pct"));
    assert_eq!(cols[2], field("jfi_delta"));
    assert_eq!(cols[3], field("fsse_delta"));
}

#[test]
fn route_command() {
    let tmp = tempfile::tempdir().unwrap();
    let p = write_trace(tmp.path(), "wd.plctm", &common::weak_direct());
    let csv = stdout(&plcnet(&[
        "route", "--trace", &p, "--src", "A", "--dst", "C",
    ]));
    assert_eq!(
        csv,
        "src,dst,hops,path,estimate_bps\nA,C,2,A>B>C,45565217\n"
    );

    let strong = write_trace(tmp.path(), "ten.plctm", &common::all_ten());
    let csv = stdout(&plcnet(&[
        "route", "--trace", &strong, "--src", "N1", "--dst", "N2",
    ]));
    assert!(csv.ends_with("N1,N2,1,N1>N2,91130435\n"));

    assert_eq!(
        plcnet(&["route", "--trace", &p, "--src", "A", "--dst", "A"])
            .status
            .code(),
        Some(1)
    );
    let cut = plcnet(&[
        "route",
        "--trace",
        &p,
        "--src",
        "A",
        "--dst",
        "C",
        "--min-rate",
        "1e9",
    ]);
    assert_eq!(cut.status.code(), Some(3));
}

#[test]
fn config_file_supplies_defaults() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.cfg");
    std::fs::write(
        &cfg,
        "# small run\nnodes = 3\nprofile = uniform\nseed = 9\n",
    )
    .unwrap();
    let c = cfg.to_str().unwrap();
    let from_file = stdout(&plcnet(&["generate", "--config", c]));
    let explicit = stdout(&plcnet(&[
        "generate",
        "--nodes",
        "3",
        "--profile",
        "uniform",
        "--seed",
        "9",
    ]));
    assert_eq!(from_file, explicit);

    // flags override the file
    let o = plcnet(&["generate", "--config", c, "--nodes", "5"]);
    assert!(stdout(&o).contains("nodes N1 N2 N3 N4 N5"));

    std::fs::write(&cfg, "nodes: 3\n").unwrap();
    assert_eq!(plcnet(&["generate", "--config", c]).status.code(), Some(2));
}
