use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use qew::localdeco::{schedule, validate_schedule, MeasurementSchedule, TurnColor};
use qew::postproc::{
    entanglement_report_with, BoundReport, CorrelationTable, OptimizerMode, OptimizerUsed,
    ReportOptions,
};
use qew::railsim::run_experiment;

use crate::artifacts::{load_state, sha256_hex, with_provenance, Provenance, StateArtifact, StateSpec};
use crate::{read_file, write_file, CliError, Result};

fn opt_write(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => write_file(p, text),
        None => Ok(()),
    }
}

/// Builds a state and returns its JSON, writing it to `out` when given.
pub fn cmd_state(d: usize, spec: &StateSpec, out: Option<&Path>) -> Result<String> {
    let state = StateArtifact::build(d, spec)?;
    let mut prov = Provenance::new("state");
    prov.detail = Some(spec.label());
    if let StateSpec::Random { seed, .. } = spec {
        prov.seed = Some(*seed);
    }
    if let StateSpec::File(path) = spec {
        prov.inputs.insert("state".into(), sha256_hex(read_file(path)?.as_bytes()));
    }
    let json = state.to_json(&prov)?;
    opt_write(out, &json)?;
    Ok(json)
}

#[derive(Debug, Clone)]
pub struct ScheduleOutput {
    pub schedule: MeasurementSchedule,
    pub json: String,
    /// One line per turn followed by the turn count.
    pub listing: String,
}

pub fn cmd_schedule(d: usize, out: Option<&Path>) -> Result<ScheduleOutput> {
    let sched = schedule(d)?;
    let report = validate_schedule(&sched);
    if !report.is_valid() {
        return Err(qew::Error::Numerical(format!("generated schedule is invalid: {report}")).into());
    }
    let json = with_provenance(&sched.to_json()?, &Provenance::new("schedule"))?;
    opt_write(out, &json)?;

    let width = sched.turns.len().to_string().len();
    let mut listing = String::new();
    for (k, turn) in sched.turns.iter().enumerate() {
        let color = match turn.color {
            TurnColor::Red => "red",
            TurnColor::Blue => "blue",
            TurnColor::Green => "green",
            TurnColor::Mixed => "mixed",
        };
        let obs: Vec<String> = turn.observables.iter().map(|o| o.to_string()).collect();
        writeln!(listing, "turn {:>width$}  {color:<5}  {}", k + 1, obs.join(" ")).unwrap();
    }
    writeln!(listing, "{} turns", sched.turns.len()).unwrap();
    Ok(ScheduleOutput { schedule: sched, json, listing })
}

#[derive(Debug, Clone)]
pub struct SimulateOutput {
    pub table: CorrelationTable,
    pub json: String,
}

/// One row per entry: `observable,i,j,value` with 1-based channels.
pub fn table_csv(t: &CorrelationTable) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["observable", "i", "j", "value"])?;
    for (a, v) in &t.p {
        w.write_record(["p", &(a + 1).to_string(), "", &v.to_string()])?;
    }
    for (name, map) in [("x", &t.x), ("y", &t.y)] {
        for ((a, b), v) in map {
            w.write_record([name, &(a + 1).to_string(), &(b + 1).to_string(), &v.to_string()])?;
        }
    }
    let bytes = w.into_inner().map_err(|e| qew::Error::Numerical(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| qew::Error::Numerical(e.to_string()).into())
}

pub fn cmd_simulate(
    state_path: &Path,
    schedule_path: &Path,
    shots_per_turn: u64,
    seed: u64,
    out: Option<&Path>,
    csv_out: Option<&Path>,
) -> Result<SimulateOutput> {
    let state = load_state(state_path)?;
    let sched_text = read_file(schedule_path)?;
    let sched = MeasurementSchedule::from_json(&sched_text)
        .map_err(|e| CliError::Usage(format!("{}: {e}", schedule_path.display())))?;
    if state.d() != sched.d {
        return Err(CliError::Usage(format!(
            "dimension mismatch: state has d = {} but schedule has d = {}",
            state.d(),
            sched.d
        )));
    }
    let ensemble = state.to_ensemble()?;
    let table = run_experiment(&ensemble, &sched, shots_per_turn, seed)?;

    let mut prov = Provenance::new("simulate");
    prov.seed = Some(seed);
    prov.shots_per_turn = Some(shots_per_turn);
    prov.inputs.insert("state".into(), sha256_hex(read_file(state_path)?.as_bytes()));
    prov.inputs.insert("schedule".into(), sha256_hex(sched_text.as_bytes()));
    let json = with_provenance(&table.to_json()?, &prov)?;
    opt_write(out, &json)?;
    if let Some(p) = csv_out {
        write_file(p, &table_csv(&table)?)?;
    }
    Ok(SimulateOutput { table, json })
}

#[derive(Debug, Clone)]
pub struct BoundOutput {
    pub report: BoundReport,
    pub json: String,
    pub console: String,
}

fn console_summary(r: &BoundReport) -> String {
    let mut s = String::new();
    writeln!(s, "d = {}", r.d).unwrap();
    writeln!(s, "f = {:.6}", r.f).unwrap();
    writeln!(s, "g = {:.6}", r.g).unwrap();
    writeln!(s, "f* = {:.6}  xi = {}", r.f_star, r.xi_f).unwrap();
    writeln!(s, "g* = {:.6}  xi = {}", r.g_star, r.xi_g).unwrap();
    writeln!(s, "bound_wer = {:.6} ebit", r.bound_wer).unwrap();
    writeln!(s, "bound_iso = {:.6} ebit", r.bound_iso).unwrap();
    writeln!(s, "bound_final = {:.6} ebit", r.bound_final).unwrap();
    match r.optimizer {
        OptimizerUsed::Exact => writeln!(s, "optimizer: exact").unwrap(),
        OptimizerUsed::Heuristic => {
            writeln!(s, "optimizer: heuristic (lower bound may be loose)").unwrap()
        }
    }
    for w in r.warnings.iter().filter(|w| !w.starts_with("heuristic")) {
        writeln!(s, "warning: {w}").unwrap();
    }
    s
}

pub fn cmd_bound(table_path: &Path, opts: &ReportOptions, out: Option<&Path>) -> Result<BoundOutput> {
    let text = read_file(table_path)?;
    let table = CorrelationTable::from_json(&text)
        .map_err(|e| CliError::Usage(format!("{}: {e}", table_path.display())))?;
    let report = entanglement_report_with(&table, opts)?;

    let mut prov = Provenance::new("bound");
    prov.seed = Some(opts.seed);
    prov.inputs.insert("table".into(), sha256_hex(text.as_bytes()));
    prov.detail = Some(
        match opts.mode {
            OptimizerMode::Exact => "mode=exact",
            OptimizerMode::Heuristic => "mode=heuristic",
            OptimizerMode::Auto => "mode=auto",
        }
        .into(),
    );
    let json = with_provenance(&report.to_json()?, &prov)?;
    opt_write(out, &json)?;
    let console = console_summary(&report);
    Ok(BoundOutput { report, json, console })
}

/// Everything needed to run state → schedule → simulate → bound.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub d: usize,
    pub state: StateSpec,
    pub shots_per_turn: u64,
    pub seed: u64,
    pub mode: OptimizerMode,
    pub out_dir: PathBuf,
    pub csv: bool,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub report: BoundReport,
    /// Artifact role → written path.
    pub artifacts: BTreeMap<String, PathBuf>,
    pub summary: String,
}

pub fn cmd_pipeline(cfg: &PipelineConfig) -> Result<PipelineOutput> {
    let path = |name: &str| cfg.out_dir.join(name);
    let mut artifacts = BTreeMap::new();

    cmd_state(cfg.d, &cfg.state, Some(&path("state.json")))?;
    artifacts.insert("state".to_string(), path("state.json"));
    cmd_schedule(cfg.d, Some(&path("schedule.json")))?;
    artifacts.insert("schedule".to_string(), path("schedule.json"));

    let csv_path = cfg.csv.then(|| path("table.csv"));
    cmd_simulate(
        &path("state.json"),
        &path("schedule.json"),
        cfg.shots_per_turn,
        cfg.seed,
        Some(&path("table.json")),
        csv_path.as_deref(),
    )?;
    artifacts.insert("table".to_string(), path("table.json"));
    if let Some(p) = csv_path {
        artifacts.insert("csv".to_string(), p);
    }

    let opts = ReportOptions { mode: cfg.mode, seed: cfg.seed, ..Default::default() };
    let bound = cmd_bound(&path("table.json"), &opts, Some(&path("report.json")))?;
    artifacts.insert("report".to_string(), path("report.json"));

    let optimizer = match bound.report.optimizer {
        OptimizerUsed::Exact => "exact",
        OptimizerUsed::Heuristic => "heuristic",
    };
    let summary = format!(
        "bound_final = {:.6} ebit ({}, d={}, shots={}, seed={}, optimizer {optimizer})",
        bound.report.bound_final,
        cfg.state.label(),
        cfg.d,
        cfg.shots_per_turn,
        cfg.seed
    );
    Ok(PipelineOutput { report: bound.report, artifacts, summary })
}
