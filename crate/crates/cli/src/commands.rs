use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use plcnet_core::mac::{events_to_csv, SimError};
use plcnet_core::metrics::{
    compare_runs, fairness_report, link_throughputs, GainReport, MetricsError,
};
use plcnet_core::routing::{best_route, build_graph, RouteError};
use plcnet_core::tonemap::{asymmetry, expected_throughput, mean_phy_rate, phy_rate};
use plcnet_core::{
    build_decision_table, generate_deployment, parse_trace, run_simulation, serialize_trace,
    Deployment, DirectedLink, GeneratorProfile, MacParams, PhyParams, ProfileKind, SimInput,
    SimReportRaw, SsDecisionTable, SsPolicy,
};
use rayon::prelude::*;

use crate::config::Config;
use crate::{
    AnalyzeArgs, CliError, GenerateArgs, GeneratorArgs, RouteArgs, ScenarioArgs, SimulateArgs,
    SourceArgs, SweepArgs,
};

fn usage(e: impl ToString) -> CliError {
    CliError::Usage(e.to_string())
}

struct GeneratorSpec {
    nodes: usize,
    profile: GeneratorProfile,
    slots: usize,
}

fn resolve_generator(a: &GeneratorArgs, cfg: &Config) -> Result<GeneratorSpec, CliError> {
    let kind: ProfileKind = cfg
        .pick_or(a.profile.clone(), "profile", "complementary".to_string())?
        .parse()
        .map_err(usage)?;
    let seed = cfg.pick_or(a.seed, "seed", 0)?;
    let defaults = GeneratorProfile::new(kind, seed);
    Ok(GeneratorSpec {
        nodes: cfg.pick_or(a.nodes, "nodes", 4)?,
        profile: GeneratorProfile {
            base_quality: cfg.pick_or(a.base_quality, "base_quality", defaults.base_quality)?,
            notch_count: cfg.pick_or(a.notch_count, "notch_count", defaults.notch_count)?,
            notch_width: cfg.pick_or(a.notch_width, "notch_width", defaults.notch_width)?,
            asymmetry_noise: cfg.pick_or(
                a.asymmetry_noise,
                "asymmetry_noise",
                defaults.asymmetry_noise,
            )?,
            ..defaults
        },
        slots: cfg.pick_or(a.slots, "slots", plcnet_core::tonemap::DEFAULT_SLOTS)?,
    })
}

fn generate_from(spec: &GeneratorSpec) -> Result<Deployment, CliError> {
    generate_deployment(spec.nodes, &spec.profile, spec.slots).map_err(usage)
}

/// The deployment and the seed used for simulation.
fn load_deployment(a: &SourceArgs, cfg: &Config) -> Result<(Deployment, u64), CliError> {
    let trace: Option<PathBuf> = cfg.pick(a.trace.clone(), "trace")?;
    match trace {
        Some(path) => {
            let text = fs::read_to_string(&path)
                .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            let d = parse_trace(&text)
                .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            Ok((d, cfg.pick_or(a.generator.seed, "seed", 0)?))
        }
        None => {
            let spec = resolve_generator(&a.generator, cfg)?;
            Ok((generate_from(&spec)?, spec.profile.seed))
        }
    }
}

fn write_file(path: &Path, content: &str) -> Result<(), CliError> {
    fs::write(path, content).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

/// Writes to `out`, or to stdout when no path is given.
fn emit(out: Option<&Path>, content: &str) -> Result<(), CliError> {
    match out {
        Some(path) => write_file(path, content),
        None => std::io::stdout()
            .write_all(content.as_bytes())
            .map_err(|e| CliError::Runtime(format!("stdout: {e}"))),
    }
}

pub fn generate(a: &GenerateArgs, cfg: &Config) -> Result<(), CliError> {
    let spec = resolve_generator(&a.generator, cfg)?;
    let d = generate_from(&spec)?;
    let out: Option<PathBuf> = cfg.pick(a.out.clone(), "out")?;
    emit(out.as_deref(), &serialize_trace(&d))?;

    let mut summary = format!(
        "nodes {}\nslots {}\nlinks {}\n",
        d.nodes().join(" "),
        d.slot_count(),
        d.links().len()
    );
    for (k, v) in d.metadata() {
        let _ = writeln!(summary, "{k} {v}");
    }
    if out.is_some() {
        print!("{summary}");
    } else {
        eprint!("{summary}");
    }
    Ok(())
}

pub fn analyze(a: &AnalyzeArgs, cfg: &Config) -> Result<(), CliError> {
    let (d, _) = load_deployment(&a.source, cfg)?;
    let phy = PhyParams::default();
    let mut csv = String::from("link_tx,link_rx");
    for k in 1..=d.slot_count() {
        let _ = write!(csv, ",phy_rate_slot{k}");
    }
    csv.push_str(",mean_phy_rate_bps,expected_throughput_bps,asymmetry,asymmetry_norm\n");
    for (link, tm) in d.links() {
        let _ = write!(csv, "{},{}", link.tx, link.rx);
        for k in 0..d.slot_count() {
            let rate = phy_rate(tm, k, &phy).expect("slot within deployment");
            let _ = write!(csv, ",{rate:.0}");
        }
        let back = d
            .tonemap(&link.reversed())
            .expect("deployments hold both directions");
        let asym = asymmetry(tm, back).expect("equal slot counts");
        let _ = writeln!(
            csv,
            ",{:.0},{:.0},{asym:.6},{:.6}",
            mean_phy_rate(tm, &phy),
            expected_throughput(tm, &phy),
            asym / f64::from(plcnet_core::tonemap::MAX_SLOT_BITS)
        );
    }
    let out: Option<PathBuf> = cfg.pick(a.out.clone(), "out")?;
    emit(out.as_deref(), &csv)
}

fn parse_flows(spec: &str, d: &Deployment) -> Result<Vec<DirectedLink>, CliError> {
    if spec.trim() == "all" {
        return Ok(d.links().keys().cloned().collect());
    }
    spec.split(',')
        .map(|f| {
            let (tx, rx) = f
                .trim()
                .split_once(':')
                .ok_or_else(|| usage(format!("flow {f:?} is not tx:rx")))?;
            DirectedLink::new(tx.trim(), rx.trim())
                .ok_or_else(|| usage(format!("flow {f:?} has equal endpoints")))
        })
        .collect()
}

struct Scenario {
    mac: MacParams,
    flows: Vec<DirectedLink>,
    duration_us: u64,
    top_m: usize,
    max_share_fraction: f64,
}

fn resolve_scenario(a: &ScenarioArgs, cfg: &Config, d: &Deployment) -> Result<Scenario, CliError> {
    let duration_us = cfg.pick_or(a.duration_us, "duration_us", 1_000_000)?;
    if duration_us == 0 {
        return Err(usage("duration_us must be positive"));
    }
    let reeval: Option<u64> = cfg.pick(a.reeval_period_us, "reeval_period_us")?;
    if reeval == Some(0) {
        return Err(usage("reeval_period_us must be positive"));
    }
    let flows = parse_flows(
        &cfg.pick_or(a.flows.clone(), "flows", "all".to_string())?,
        d,
    )?;
    let defaults = SsPolicy::default();
    Ok(Scenario {
        mac: MacParams {
            reeval_period_us: reeval.map(|p| p as f64),
            ..MacParams::default()
        },
        flows,
        duration_us,
        top_m: cfg.pick_or(a.top_m, "top_m", defaults.top_m)?,
        max_share_fraction: cfg.pick_or(
            a.max_share_fraction,
            "max_share_fraction",
            defaults.max_share_fraction,
        )?,
    })
}

impl Scenario {
    fn policy(&self, beta: u8) -> Result<SsPolicy, CliError> {
        let p = SsPolicy {
            beta,
            top_m: self.top_m,
            max_share_fraction: self.max_share_fraction,
        };
        p.validate().map_err(usage)?;
        Ok(p)
    }

    fn run(
        &self,
        d: &Deployment,
        table: Option<&SsDecisionTable>,
        seed: u64,
        record_events: bool,
    ) -> Result<SimReportRaw, CliError> {
        run_simulation(SimInput {
            deployment: d,
            table,
            mac: &self.mac,
            flows: &self.flows,
            duration_us: self.duration_us as f64,
            seed,
            record_events,
        })
        .map_err(sim_error)
    }
}

fn sim_error(e: SimError) -> CliError {
    match e {
        SimError::SlotMismatch { .. } | SimError::UnknownLink(_) => {
            CliError::Runtime(e.to_string())
        }
        _ => usage(e),
    }
}

fn metrics_error(e: MetricsError) -> CliError {
    CliError::Runtime(e.to_string())
}

fn links_csv(r: &SimReportRaw, mac: &MacParams) -> String {
    let mut out = String::from(
        "link_tx,link_rx,success_count,collision_count,secondary_success_count,aborted_count,throughput\n",
    );
    let thr = link_throughputs(r, mac);
    for (link, t) in &r.links {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{:.6}",
            link.tx,
            link.rx,
            t.success_count,
            t.collision_count,
            t.secondary_success_count,
            t.aborted_count,
            thr[link]
        );
    }
    out
}

fn metrics_csv(
    r: &SimReportRaw,
    mac: &MacParams,
    gains: Option<&GainReport>,
) -> Result<String, CliError> {
    let f = fairness_report(r, mac).map_err(metrics_error)?;
    let mut out = String::from("metric,value\n");
    for (name, v) in [
        ("aggregate_throughput", f.aggregate_throughput),
        ("jfi", f.jfi),
        ("fsse", f.fsse),
        ("busy_time_us", r.busy_time_us),
        ("idle_time_us", r.idle_time_us),
    ] {
        let _ = writeln!(out, "{name},{v:.6}");
    }
    let _ = writeln!(out, "ss_engagements,{}", r.ss_engagements);
    for (node, v) in &f.per_node_throughput {
        let _ = writeln!(out, "node_throughput_{node},{v:.6}");
    }
    if let Some(g) = gains {
        out.extend(g.metrics_csv().lines().skip(1).map(|l| format!("{l}\n")));
    }
    Ok(out)
}

fn parse_ss(v: &str) -> Result<bool, CliError> {
    match v {
        "on" => Ok(true),
        "off" => Ok(false),
        other => Err(usage(format!("--ss must be on or off, got {other:?}"))),
    }
}

pub fn simulate(a: &SimulateArgs, cfg: &Config) -> Result<(), CliError> {
    let (d, seed) = load_deployment(&a.source, cfg)?;
    let sc = resolve_scenario(&a.scenario, cfg, &d)?;
    let ss = parse_ss(&cfg.pick_or(a.ss.clone(), "ss", "off".to_string())?)?;
    let beta = cfg.pick_or(a.beta, "beta", SsPolicy::default().beta)?;
    let out: Option<PathBuf> = cfg.pick(a.out.clone(), "out")?;
    if a.events && out.is_none() {
        return Err(usage("--events needs --out"));
    }

    let table = if ss {
        Some(build_decision_table(&d, &sc.policy(beta)?).map_err(usage)?)
    } else {
        None
    };
    let report = sc.run(&d, table.as_ref(), seed, a.events)?;
    let gains = match &table {
        Some(_) => {
            let base = sc.run(&d, None, seed, false)?;
            Some(compare_runs(&base, &report, &sc.mac).map_err(metrics_error)?)
        }
        None => None,
    };

    let links = links_csv(&report, &sc.mac);
    let metrics = metrics_csv(&report, &sc.mac, gains.as_ref())?;
    match out {
        Some(dir) => {
            fs::create_dir_all(&dir)
                .map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))?;
            write_file(&dir.join("links.csv"), &links)?;
            write_file(&dir.join("metrics.csv"), &metrics)?;
            if let Some(g) = &gains {
                write_file(&dir.join("gains.csv"), &g.links_csv())?;
            }
            if let Some(ev) = &report.events {
                write_file(&dir.join("events.csv"), &events_to_csv(ev))?;
            }
            Ok(())
        }
        None => {
            let mut all = links + "\n" + &metrics;
            if let Some(g) = &gains {
                all += "\n";
                all += &g.links_csv();
            }
            emit(None, &all)
        }
    }
}

fn parse_betas(v: &str) -> Result<Vec<u8>, CliError> {
    let betas: Vec<u8> = v
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|e| usage(format!("beta {s:?}: {e}")))
        })
        .collect::<Result<_, _>>()?;
    if betas.is_empty() {
        return Err(usage("beta list is empty"));
    }
    Ok(betas)
}

pub fn sweep(a: &SweepArgs, cfg: &Config) -> Result<(), CliError> {
    let (d, seed) = load_deployment(&a.source, cfg)?;
    let sc = resolve_scenario(&a.scenario, cfg, &d)?;
    let betas = parse_betas(&cfg.pick_or(a.beta.clone(), "beta", "2,4,6,8".to_string())?)?;
    let policies: Vec<SsPolicy> = betas
        .iter()
        .map(|&b| sc.policy(b))
        .collect::<Result<_, _>>()?;

    let base = sc.run(&d, None, seed, false)?;
    let rows: Vec<Result<String, CliError>> = policies
        .par_iter()
        .map(|p| {
            let table = build_decision_table(&d, p).map_err(usage)?;
            let ss = sc.run(&d, Some(&table), seed, false)?;
            let g = compare_runs(&base, &ss, &sc.mac).map_err(metrics_error)?;
            Ok(format!(
                "{},{:.6},{:.6},{:.6}\n",
                p.beta,
                g.aggregate_gain_pct,
                g.jfi_delta(),
                g.fsse_delta()
            ))
        })
        .collect();
    let mut csv = String::from("beta,aggregate_gain_pct,jfi_delta,fsse_delta\n");
    for r in rows {
        csv += &r?;
    }
    let out: Option<PathBuf> = cfg.pick(a.out.clone(), "out")?;
    emit(out.as_deref(), &csv)
}

pub fn route(a: &RouteArgs, cfg: &Config) -> Result<(), CliError> {
    let (d, _) = load_deployment(&a.source, cfg)?;
    let src: String = cfg
        .pick(a.src.clone(), "src")?
        .ok_or_else(|| usage("--src is required"))?;
    let dst: String = cfg
        .pick(a.dst.clone(), "dst")?
        .ok_or_else(|| usage("--dst is required"))?;
    let min_rate = cfg.pick_or(a.min_rate, "min_rate", 0.0)?;
    let g = build_graph(&d, &PhyParams::default(), min_rate);
    let r = best_route(&g, &src, &dst).map_err(|e| match e {
        RouteError::Unreachable { .. } => CliError::Runtime(e.to_string()),
        _ => usage(e),
    })?;
    let out: Option<PathBuf> = cfg.pick(a.out.clone(), "out")?;
    emit(out.as_deref(), &r.to_csv())
}
