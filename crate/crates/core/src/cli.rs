//! The `qtypic` command line: argument parsing, report assembly and output.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{invalid, Error, Result};
use crate::graph::{build_graph, PartitionSchedule, TrajectoryGraph};
use crate::num::Num;
use crate::scenario_file::ScenarioFile;
use crate::scenarios::{
    build_beamsplitter_fig1, build_unruh, nonadditivity_demo, obstacle_variant, Arm, UnruhModel,
    UnruhVariant, ABSORBED, CLICK, LOWER, UPPER,
};
use crate::stat::{bound_sweep, tail_report, ExperimentSpec, SweepRow as StatRow, TailReport};
use crate::structure::{QuantumStructure, SSet};
use crate::twin::{correspondence_audit, identity_pairing, AuditReport, StochasticProcessSpec};
use crate::typicality::{
    check_threshold, exclusion_measure, mutual_typicality, TypicalityReport, DEFAULT_THRESHOLD,
};
use crate::wavepacket::{self, SweepConfig};

pub const TOOL: &str = "qtypic";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
/// Directory used for reports when `--out` is absent.
pub const OUT_DIR_ENV: &str = "QTYPIC_OUT_DIR";

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_RESOURCE: i32 = 3;
pub const EXIT_AUDIT: i32 = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

impl Format {
    fn extension(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Args)]
pub struct Thresholds {
    /// Occupation at or below which a trajectory-graph node is excluded.
    #[arg(long, global = true, default_value_t = 1e-9)]
    pub epsilon_exclude: f64,
    /// Mutual typicality at or below which two graph nodes are linked.
    #[arg(long, global = true, default_value_t = DEFAULT_THRESHOLD)]
    pub tau_link: f64,
    /// Cutoff for the mutually-typical verdict.
    #[arg(long, global = true, default_value_t = DEFAULT_THRESHOLD)]
    pub threshold: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            epsilon_exclude: 1e-9,
            tau_link: DEFAULT_THRESHOLD,
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, ValueEnum)]
pub enum ArmArg {
    #[value(name = "U1", alias = "u1")]
    U1,
    #[value(name = "D1", alias = "d1")]
    D1,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Builtin {
    Unruh,
    Fig1,
}

#[derive(Clone, Debug, PartialEq, Serialize, Subcommand)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioCommand {
    /// Three-pass interferometer with optional counter or obstacle.
    Unruh {
        /// Put a photon counter into the D arm between the second and third pass.
        #[arg(long)]
        detector_d2: bool,
        /// Block one arm after the first splitter.
        #[arg(long, value_enum, conflicts_with = "detector_d2")]
        obstacle: Option<ArmArg>,
        /// Emit the scenario file instead of the analysis report.
        #[arg(long)]
        export: bool,
    },
    /// Single splitter with pinholes and detectors.
    Fig1 {
        #[arg(long)]
        export: bool,
    },
    /// The Unruh nonadditivity witness.
    Nonadditivity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Subcommand)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Analyze a built-in scenario.
    Scenario {
        #[command(subcommand)]
        which: ScenarioCommand,
    },
    /// Mutual typicality of two s-sets of a scenario file.
    Typicality {
        #[arg(long)]
        scenario: PathBuf,
        /// First s-set as `T:CELL,CELL`.
        #[arg(long)]
        s1: String,
        /// Second s-set as `T:CELL,CELL`.
        #[arg(long)]
        s2: String,
    },
    /// Trajectory graph of a scenario file.
    Graph {
        #[arg(long)]
        scenario: PathBuf,
        /// Slices as `T:NAME=CELL+CELL|NAME;T:...`; one region per cell at
        /// every time after the first by default.
        #[arg(long)]
        slices: Option<String>,
    },
    /// Exact tail mass of the atypical set against `1/(εN)`.
    StatBound {
        #[arg(long, default_value_t = 2)]
        n: usize,
        /// Outcome probabilities; the last entry may be omitted.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        p: Vec<f64>,
        #[arg(long = "N", default_value_t = 16)]
        repetitions: usize,
        #[arg(long, default_value_t = 0.125)]
        eps: f64,
        /// Sweep n ∈ {2,3}, N ∈ 1..=16 and the standard cutoffs with random p.
        #[arg(long)]
        sweep: bool,
        /// Random probability vectors per n in a sweep.
        #[arg(long, default_value_t = 20)]
        random_draws: usize,
    },
    /// Counter-propagating Gaussian packets on a periodic grid.
    Wavepacket {
        /// Run the separations 4σ, 6σ, 8σ and 10σ.
        #[arg(long)]
        separation_sweep: bool,
        /// Initial separation in units of σ without a sweep.
        #[arg(long, default_value_t = 8.0)]
        separation: f64,
        #[arg(long, default_value_t = 4096)]
        n_points: usize,
        #[arg(long, default_value_t = 200.0)]
        length: f64,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, default_value_t = 2.0)]
        momentum: f64,
        #[arg(long, default_value_t = 5.0)]
        dt: f64,
        #[arg(long, default_value_t = wavepacket::SUPPORT_CUTOFF)]
        support_cutoff: f64,
        /// Write `|ψ(x)|²` snapshots as CSV files into this directory.
        #[arg(long)]
        #[serde(skip)]
        snapshot_dir: Option<PathBuf>,
    },
    /// Quantum ↔ stochastic correspondence audit.
    Audit {
        #[arg(long, conflicts_with = "builtin", required_unless_present = "builtin")]
        scenario: Option<PathBuf>,
        #[arg(long, value_enum)]
        builtin: Option<Builtin>,
    },
}

impl Command {
    pub fn name(&self) -> String {
        match self {
            Command::Scenario { which } => match which {
                ScenarioCommand::Unruh { .. } => "scenario unruh".into(),
                ScenarioCommand::Fig1 { .. } => "scenario fig1".into(),
                ScenarioCommand::Nonadditivity => "scenario nonadditivity".into(),
            },
            Command::Typicality { .. } => "typicality".into(),
            Command::Graph { .. } => "graph".into(),
            Command::StatBound { .. } => "stat-bound".into(),
            Command::Wavepacket { .. } => "wavepacket".into(),
            Command::Audit { .. } => "audit".into(),
        }
    }

    fn scenario_path(&self) -> Option<&Path> {
        match self {
            Command::Typicality { scenario, .. } | Command::Graph { scenario, .. } => {
                Some(scenario)
            }
            Command::Audit { scenario, .. } => scenario.as_deref(),
            _ => None,
        }
    }

    fn default_format(&self) -> Format {
        match self {
            Command::StatBound { .. } | Command::Wavepacket { .. } => Format::Csv,
            _ => Format::Json,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = TOOL, version, about = "Quantum typicality analyses and reports")]
struct Cli {
    /// Output format; stat-bound and wavepacket default to csv, the rest to json.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Output file; stdout unless this or the output-directory variable is set.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for randomized sweeps.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    thresholds: Thresholds,
    #[command(subcommand)]
    command: Command,
}

/// A fully parsed invocation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub scenario_path: Option<PathBuf>,
    pub thresholds: Thresholds,
    pub format: Format,
    #[serde(skip)]
    pub out: Option<PathBuf>,
    pub seed: u64,
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        RunConfig {
            scenario_path: command.scenario_path().map(Path::to_path_buf),
            format: command.default_format(),
            command,
            thresholds: Thresholds::default(),
            out: None,
            seed: 0,
        }
    }

    pub fn try_from_args<I, T>(args: I) -> std::result::Result<Self, clap::Error>
    where
        I: IntoIterator<Item = T>,
        T: Into<OsString> + Clone,
    {
        let cli = Cli::try_parse_from(args)?;
        Ok(RunConfig {
            scenario_path: cli.command.scenario_path().map(Path::to_path_buf),
            format: cli.format.unwrap_or_else(|| cli.command.default_format()),
            command: cli.command,
            thresholds: cli.thresholds,
            out: cli.out,
            seed: cli.seed,
        })
    }

    pub fn validate(&self) -> Result<()> {
        check_threshold("epsilon-exclude", self.thresholds.epsilon_exclude)?;
        check_threshold("tau-link", self.thresholds.tau_link)?;
        check_threshold("threshold", self.thresholds.threshold)?;
        Ok(())
    }
}

/// Report text plus the verdict of any embedded audit.
#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub body: String,
    pub audit_failed: bool,
}

/// Result payload before formatting.
struct Outcome {
    json: Value,
    csv: String,
    audit_failed: bool,
    /// Emitted verbatim instead of inside the report envelope.
    raw: bool,
}

impl Outcome {
    fn new(json: Value, csv: String) -> Self {
        Outcome {
            json,
            csv,
            audit_failed: false,
            raw: false,
        }
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

fn csv_block(header: &str, rows: impl IntoIterator<Item = String>) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for row in rows {
        out.push_str(&row);
        out.push('\n');
    }
    out
}

fn occupation_rows(q: &QuantumStructure) -> Result<(Value, String)> {
    let mut json = Vec::new();
    let mut rows = Vec::new();
    for t in 0..=q.final_time() {
        for cell in q.cell_labels() {
            let p = q.occupation(&SSet::new(t, [cell]))?;
            json.push(json!({ "time": t, "cell": cell, "occupation": p }));
            rows.push(format!("{t},{cell},{}", Num(p)));
        }
    }
    Ok((Value::Array(json), csv_block("time,cell,occupation", rows)))
}

fn graph_value(g: &TrajectoryGraph) -> Value {
    let links: Vec<Value> = g
        .links
        .iter()
        .map(|l| json!([g.nodes[l.a].label, g.nodes[l.b].label, l.m_big]))
        .collect();
    json!({
        "paths": g.path_labels(),
        "excluded": g.excluded_labels(),
        "links": links,
        "nodes": g.nodes,
    })
}

fn unruh_report(model: &UnruhModel, th: &Thresholds) -> Result<Outcome> {
    let q = &model.structure;
    let (occupations, csv) = occupation_rows(q)?;
    let graph = build_graph(
        q,
        &model.partition_schedule(),
        th.epsilon_exclude,
        th.tau_link,
    )?;
    let mut which_way = json!({
        "U1_D3": mutual_typicality(q, &model.upper(1), &model.lower(3), th.threshold)?,
        "D1_U3": mutual_typicality(q, &model.lower(1), &model.upper(3), th.threshold)?,
        "exclusion_U2": exclusion_measure(q, &model.upper(2))?,
    });
    match model.variant {
        UnruhVariant::DetectorD2 => {
            which_way["exclusion_no_click_3"] = json!(exclusion_measure(
                q,
                &SSet::new(model.times[3], [UPPER, LOWER])
            )?);
            which_way["click_occupation_3"] =
                json!(q.occupation(&SSet::new(model.times[3], [CLICK]))?);
        }
        UnruhVariant::Obstacle(_) => {
            which_way["absorbed_3"] = json!(q.occupation(&SSet::new(model.times[3], [ABSORBED]))?);
        }
        UnruhVariant::Plain => {}
    }
    let variant = match model.variant {
        UnruhVariant::Plain => "plain".to_owned(),
        UnruhVariant::DetectorD2 => "detector_d2".to_owned(),
        UnruhVariant::Obstacle(arm) => format!("obstacle_{arm:?}"),
    };
    let json = json!({
        "scenario": "unruh",
        "variant": variant,
        "convention": model.convention,
        "dim": q.dim(),
        "cells": q.cells(),
        "occupations": occupations,
        "sign_table": model.sign_table()?,
        "which_way": which_way,
        "graph": graph_value(&graph),
    });
    Ok(Outcome::new(json, csv))
}

fn fig1_report(th: &Thresholds) -> Result<Outcome> {
    let q = build_beamsplitter_fig1();
    let (occupations, csv) = occupation_rows(&q)?;
    let mut pairs = Vec::new();
    for pinhole in ["A", "B"] {
        for detector in ["A", "B"] {
            let r = mutual_typicality(
                &q,
                &SSet::new(1, [pinhole]),
                &SSet::new(2, [detector]),
                th.threshold,
            )?;
            pairs.push(json!({ "pinhole": pinhole, "detector": detector, "report": r }));
        }
    }
    let graph = build_graph(
        &q,
        &PartitionSchedule::per_cell(&q, &[1, 2]),
        th.epsilon_exclude,
        th.tau_link,
    )?;
    let json = json!({
        "scenario": "fig1",
        "dim": q.dim(),
        "cells": q.cells(),
        "occupations": occupations,
        "pinhole_detector": pairs,
        "exclusion_pinhole_A": exclusion_measure(&q, &SSet::new(1, ["A"]))?,
        "exclusion_pinhole_B": exclusion_measure(&q, &SSet::new(1, ["B"]))?,
        "graph": graph_value(&graph),
    });
    Ok(Outcome::new(json, csv))
}

fn nonadditivity_report() -> Result<Outcome> {
    let model = build_unruh(false);
    let q = &model.structure;
    let w = nonadditivity_demo();
    let chain = StochasticProcessSpec::matched_to(q)?;
    let (u1, d1, u2) = (model.upper(1), model.lower(1), model.upper(2));
    let both = SSet::new(1, [UPPER, LOWER]);
    let chain_whole = chain.cylinder_measure(&[both, u2.clone()])?;
    let chain_parts =
        chain.cylinder_measure(&[u1, u2.clone()])? + chain.cylinder_measure(&[d1, u2])?;
    let json = json!({
        "quantum": {
            "combined": w.combined,
            "first": w.first,
            "second": w.second,
            "termwise_sum": w.first + w.second,
            "interference": w.interference(),
        },
        "stochastic_twin": {
            "combined": chain_whole,
            "termwise_sum": chain_parts,
        },
    });
    let csv = csv_block(
        "quantity,value",
        [
            format!("quantum_combined,{}", Num(w.combined)),
            format!("quantum_termwise_sum,{}", Num(w.first + w.second)),
            format!("twin_combined,{}", Num(chain_whole)),
            format!("twin_termwise_sum,{}", Num(chain_parts)),
        ],
    );
    Ok(Outcome::new(json, csv))
}

fn export(name: &str, q: &QuantumStructure) -> Result<Outcome> {
    let chain = StochasticProcessSpec::matched_to(q)?;
    let file = ScenarioFile::from_structure(Some(name), q).with_stochastic(&chain);
    let text = file.to_json();
    Ok(Outcome {
        json: serde_json::from_str(&text)?,
        csv: String::new(),
        audit_failed: false,
        raw: true,
    })
}

fn typicality_csv(s1: &SSet, s2: &SSet, r: &TypicalityReport) -> String {
    csv_block(
        "s1,s2,m_big,m_small,norm1_sq,norm2_sq,threshold,verdict",
        [format!(
            "{s1},{s2},{},{},{},{},{},{:?}",
            Num(r.m_big),
            Num(r.m_small),
            Num(r.norm1_sq),
            Num(r.norm2_sq),
            Num(r.threshold),
            r.verdict
        )],
    )
}

fn stat_probs(n: usize, p: &[f64]) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    if p.is_empty() {
        return Ok(vec![1.0 / n as f64; n]);
    }
    match p.len() {
        len if len == n => Ok(p.to_vec()),
        len if len + 1 == n => {
            let mut full = p.to_vec();
            full.push(1.0 - p.iter().sum::<f64>());
            Ok(full)
        }
        len => Err(invalid(format!("--p has {len} entries for n = {n}"))),
    }
}

fn audit_outcome(
    q: &QuantumStructure,
    chain: &StochasticProcessSpec,
    th: &Thresholds,
) -> Result<Outcome> {
    let report: AuditReport = correspondence_audit(q, chain, &identity_pairing(q), th.threshold)?;
    let c7 = &report.finite_dimensional;
    let csv = csv_block(
        "check,passed,value",
        [
            format!(
                "c3_single_set,{},{}",
                report.single_set.passed,
                Num(report.single_set.max_deviation)
            ),
            format!(
                "c5_typicality,{},{}",
                report.typicality.passed,
                report.typicality.disagreements.len()
            ),
            format!(
                "c7_interference,{},{}",
                c7.interference_detected,
                Num(c7.max_discrepancy)
            ),
        ],
    );
    Ok(Outcome {
        audit_failed: !report.passed,
        ..Outcome::new(to_value(&report), csv)
    })
}

fn wavepacket_outcome(config: &SweepConfig, snapshot_dir: Option<&Path>) -> Result<Outcome> {
    let rows = wavepacket::separation_sweep(config)?;
    if let Some(dir) = snapshot_dir {
        fs::create_dir_all(dir)?;
        let grid = wavepacket::Grid::new(config.n_points, config.length)?;
        for row in &rows {
            let setup = wavepacket::counter_propagating(
                grid,
                row.separation_sigma * config.sigma,
                config.sigma,
                config.momentum,
            )?;
            let later = wavepacket::free_evolve(&setup.psi, config.dt);
            for (tag, state) in [("t1", &setup.psi), ("t2", &later)] {
                let body = csv_block(
                    "x,density",
                    state
                        .density()
                        .into_iter()
                        .map(|(x, p)| format!("{},{}", Num(x), Num(p))),
                );
                fs::write(
                    dir.join(format!(
                        "density_sep{}_{tag}.csv",
                        Num(row.separation_sigma)
                    )),
                    body,
                )?;
            }
        }
    }
    let csv = csv_block(
        "separation_sigma,m_same_branch,m_other_branch,packet_overlap,wrap_warning",
        rows.iter().map(|r| {
            format!(
                "{},{},{},{},{}",
                Num(r.separation_sigma),
                Num(r.same_branch.m_big),
                Num(r.other_branch.m_big),
                Num(r.packet_overlap),
                r.wrap_warning
            )
        }),
    );
    Ok(Outcome::new(json!({ "sweep": config, "rows": rows }), csv))
}

fn compute(config: &RunConfig) -> Result<Outcome> {
    let th = &config.thresholds;
    match &config.command {
        Command::Scenario { which } => match which {
            ScenarioCommand::Unruh {
                detector_d2,
                obstacle,
                export: exporting,
            } => {
                let model = match obstacle {
                    Some(ArmArg::U1) => obstacle_variant(Arm::U1),
                    Some(ArmArg::D1) => obstacle_variant(Arm::D1),
                    None => build_unruh(*detector_d2),
                };
                if *exporting {
                    export("unruh", &model.structure)
                } else {
                    unruh_report(&model, th)
                }
            }
            ScenarioCommand::Fig1 { export: exporting } => {
                if *exporting {
                    export("fig1", &build_beamsplitter_fig1())
                } else {
                    fig1_report(th)
                }
            }
            ScenarioCommand::Nonadditivity => nonadditivity_report(),
        },
        Command::Typicality { scenario, s1, s2 } => {
            let q = ScenarioFile::load(scenario)?.structure()?;
            let (s1, s2) = (SSet::parse(s1)?, SSet::parse(s2)?);
            let r = mutual_typicality(&q, &s1, &s2, th.threshold)?;
            let csv = typicality_csv(&s1, &s2, &r);
            Ok(Outcome::new(
                json!({
                    "s1": s1.to_string(),
                    "s2": s2.to_string(),
                    "report": r,
                    "inequality_chain_holds": r.check_inequality_chain(),
                }),
                csv,
            ))
        }
        Command::Graph { scenario, slices } => {
            let q = ScenarioFile::load(scenario)?.structure()?;
            let schedule = match slices {
                Some(text) => PartitionSchedule::parse(text)?,
                None => {
                    let times: Vec<usize> = (1.min(q.final_time())..=q.final_time()).collect();
                    PartitionSchedule::per_cell(&q, &times)
                }
            };
            let g = build_graph(&q, &schedule, th.epsilon_exclude, th.tau_link)?;
            Ok(Outcome::new(graph_value(&g), g.to_edge_csv()))
        }
        Command::StatBound {
            n,
            p,
            repetitions,
            eps,
            sweep,
            random_draws,
        } => {
            if *sweep {
                let rows: Vec<StatRow> = bound_sweep(&[2, 3], 16, *random_draws, config.seed)?;
                let csv = csv_block(StatRow::CSV_HEADER, rows.iter().map(StatRow::csv_row));
                let all_hold = rows.iter().all(|r| r.report.holds);
                Ok(Outcome::new(
                    json!({ "all_hold": all_hold, "rows": rows }),
                    csv,
                ))
            } else {
                let spec = ExperimentSpec::new(stat_probs(*n, p)?, *repetitions, *eps)?;
                let r: TailReport = tail_report(&spec)?;
                let csv = csv_block(TailReport::CSV_HEADER, [r.csv_row()]);
                Ok(Outcome::new(
                    json!({ "probs": spec.probs, "report": r }),
                    csv,
                ))
            }
        }
        Command::Wavepacket {
            separation_sweep,
            separation,
            n_points,
            length,
            sigma,
            momentum,
            dt,
            support_cutoff,
            snapshot_dir,
        } => {
            let defaults = SweepConfig::default();
            let config = SweepConfig {
                n_points: *n_points,
                length: *length,
                sigma: *sigma,
                momentum: *momentum,
                dt: *dt,
                separations: if *separation_sweep {
                    defaults.separations
                } else {
                    vec![*separation]
                },
                support_cutoff: *support_cutoff,
                threshold: th.threshold,
            };
            wavepacket_outcome(&config, snapshot_dir.as_deref())
        }
        Command::Audit { scenario, builtin } => {
            let (q, chain) = match (scenario, builtin) {
                (Some(path), _) => {
                    let file = ScenarioFile::load(path)?;
                    let q = file.structure()?;
                    let chain = match file.stochastic()? {
                        Some(c) => c,
                        None => StochasticProcessSpec::matched_to(&q)?,
                    };
                    (q, chain)
                }
                (None, Some(Builtin::Unruh)) => {
                    let q = build_unruh(false).structure;
                    let chain = StochasticProcessSpec::matched_to(&q)?;
                    (q, chain)
                }
                (None, Some(Builtin::Fig1)) => {
                    let q = build_beamsplitter_fig1();
                    let chain = StochasticProcessSpec::matched_to(&q)?;
                    (q, chain)
                }
                (None, None) => return Err(invalid("audit needs --scenario or --builtin")),
            };
            audit_outcome(&q, &chain, th)
        }
    }
}

/// Computes the report text for `config` without touching the filesystem
/// (apart from wave-packet snapshots when requested).
pub fn render(config: &RunConfig) -> Result<Report> {
    config.validate()?;
    let outcome = compute(config)?;
    let body = if outcome.raw {
        let mut text = serde_json::to_string_pretty(&outcome.json)?;
        text.push('\n');
        text
    } else {
        match config.format {
            Format::Json => {
                let envelope = json!({
                    "tool": TOOL,
                    "version": VERSION,
                    "command": config.command.name(),
                    "config": config,
                    "thresholds": config.thresholds,
                    "result": outcome.json,
                });
                let mut text = serde_json::to_string_pretty(&envelope)?;
                text.push('\n');
                text
            }
            Format::Csv => {
                let mut text = String::new();
                let _ = writeln!(
                    text,
                    "# tool={TOOL} version={VERSION} command={}",
                    config.command.name()
                );
                let _ = writeln!(
                    text,
                    "# epsilon_exclude={} tau_link={} threshold={} seed={}",
                    Num(config.thresholds.epsilon_exclude),
                    Num(config.thresholds.tau_link),
                    Num(config.thresholds.threshold),
                    config.seed
                );
                let _ = writeln!(text, "# config={}", serde_json::to_string(config)?);
                text.push_str(&outcome.csv);
                text
            }
        }
    };
    Ok(Report {
        body,
        audit_failed: outcome.audit_failed,
    })
}

/// Where the report goes: `--out`, else a file named after the command in
/// the output-directory variable, else stdout (`None`).
pub fn destination(config: &RunConfig) -> Option<PathBuf> {
    if let Some(out) = &config.out {
        return Some(out.clone());
    }
    let dir = std::env::var_os(OUT_DIR_ENV).filter(|d| !d.is_empty())?;
    let stem = config.command.name().replace(' ', "-");
    Some(PathBuf::from(dir).join(format!("{stem}.{}", config.format.extension())))
}

/// Renders and writes the report, returning the process exit code.
pub fn run(config: &RunConfig) -> Result<i32> {
    let report = render(config)?;
    match destination(config) {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent)?;
            }
            fs::write(&path, &report.body)?;
        }
        None => print!("{}", report.body),
    }
    if report.audit_failed {
        eprintln!("{TOOL}: correspondence audit failed; see report for witnesses");
        return Ok(EXIT_AUDIT);
    }
    Ok(EXIT_OK)
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io(_) => EXIT_IO,
        Error::Resource(_) => EXIT_RESOURCE,
        Error::Range { .. }
        | Error::UnknownCell(_)
        | Error::Validation(_)
        | Error::Parse { .. } => EXIT_INPUT,
    }
}

/// Entry point shared by the binary and the tests.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let config = match RunConfig::try_from_args(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match run(&config) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("{TOOL}: {err}");
            exit_code(&err)
        }
    }
}
