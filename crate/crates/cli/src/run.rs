use std::fs::File;
use std::path::{Path, PathBuf};

use airdroplab_core::abm::{monte_carlo, ChainStats, MonteCarloSummary, Stat};
use airdroplab_core::metrics::{
    compute_ratio_series, read_events, window_stats, EventMarker, MetricsError, MetricsSeries,
    RatioSeries, WindowStats,
};
use airdroplab_core::policy::{
    optimize_policy, sweep, verify_theorem_fixed, verify_theorem_proportional, PolicyError,
    PolicyOptimum, SweepRow, VerificationReport,
};
use airdroplab_core::{ChainId, Engine, EngineError, EngineOutcome, PopulationMode, SimError};
use serde_json::{json, Value};
use thiserror::Error;

use crate::output::{self, fmt_num, Artifacts, Table};
use crate::scenario::{CommandKind, MetricsBlock, ScenarioError, ScenarioFile};

pub const RESULTS_CSV: &str = "results.csv";
pub const SUMMARY_JSON: &str = "summary.json";
pub const WINDOWS_CSV: &str = "windows.csv";

/// Columns of `results.csv` for solve, simulate (single run) and sweep
/// (prefixed by `value`).
pub const OUTCOME_COLUMNS: [&str; 13] = [
    "chain",
    "x_ineligible",
    "x_eligible",
    "honest_users",
    "honest_eligible",
    "farmer_mass",
    "userbase",
    "fees",
    "honest_eligibility",
    "farmer_eligibility",
    "gross_revenue",
    "net_revenue",
    "flags",
];

pub const MONTE_CARLO_COLUMNS: [&str; 4] = ["chain", "aggregate", "mean", "stderr"];

pub const VERIFY_COLUMNS: [&str; 9] = [
    "scenario",
    "case",
    "resist_rho",
    "net_revenue",
    "expected_rho",
    "observed_rho",
    "margin",
    "tie",
    "passed",
];

pub const OPTIMIZE_COLUMNS: [&str; 10] = [
    "point",
    "fee_p",
    "eligibility_cost_c",
    "fixed_reward_f",
    "proportional_budget_B",
    "issuance_cost_k",
    "resist_rho",
    "net_revenue",
    "excluded",
    "best",
];

pub const RATIO_COLUMNS: [&str; 2] = ["date", "ratio"];

pub const WINDOW_COLUMNS: [&str; 8] = [
    "event_date",
    "label",
    "pre_mean",
    "post_mean",
    "delta",
    "pre_count",
    "post_count",
    "sustained",
];

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("{path}: {source}")]
    Metrics { path: PathBuf, source: MetricsError },
    #[error("cannot read {path}: {source}")]
    Input {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot write outputs to {path}: {source}")]
    Output {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Ok,
    /// Outputs were written but carry blocking flags or failed checks.
    Flagged,
}

impl RunStatus {
    fn as_str(self) -> &'static str {
        match self {
            RunStatus::Ok => "ok",
            RunStatus::Flagged => "flagged",
        }
    }
}

#[derive(Debug)]
pub struct RunReport {
    pub command: CommandKind,
    pub status: RunStatus,
    pub flags: Vec<String>,
    pub headline: String,
    pub files: Vec<PathBuf>,
}

struct Computed {
    status: RunStatus,
    flags: Vec<String>,
    headline: String,
    result: Value,
    artifacts: Artifacts,
}

fn bool_cell(b: bool) -> String {
    b.to_string()
}

fn chain_label(i: usize) -> String {
    (i + 1).to_string()
}

fn outcome_flags(outcome: &EngineOutcome) -> Vec<String> {
    let s = outcome.summary();
    let mut flags: Vec<String> = s.validity.iter().map(|f| f.as_str().to_string()).collect();
    if !s.converged {
        flags.push("NOT_CONVERGED".into());
    }
    flags
}

fn outcome_rows(outcome: &EngineOutcome) -> Vec<Vec<String>> {
    let flags = outcome_flags(outcome).join("|");
    let summary = outcome.summary();
    (0..2)
        .map(|i| {
            let (biases, revenue) = match outcome {
                EngineOutcome::ClosedForm(o) => {
                    let c = &o.chains[i];
                    ([fmt_num(c.x_ineligible), fmt_num(c.x_eligible)], c.revenue)
                }
                EngineOutcome::Abm(o) => (Default::default(), o.chains[i].revenue),
                EngineOutcome::Discrete(o) => (Default::default(), o.chains[i].revenue),
            };
            let c = &summary.chains[i];
            let [x_ineligible, x_eligible] = biases;
            vec![
                chain_label(i),
                x_ineligible,
                x_eligible,
                fmt_num(c.honest_users),
                fmt_num(c.honest_eligible),
                fmt_num(c.farmer_mass),
                fmt_num(c.userbase),
                fmt_num(revenue.fees),
                fmt_num(revenue.honest_eligibility),
                fmt_num(revenue.farmer_eligibility),
                fmt_num(c.gross_revenue),
                fmt_num(c.net_revenue),
                flags.clone(),
            ]
        })
        .collect()
}

fn net_headline(outcome: &EngineOutcome) -> String {
    let s = outcome.summary();
    format!(
        "net revenue chain1 {} chain2 {}",
        fmt_num(s.chains[0].net_revenue),
        fmt_num(s.chains[1].net_revenue)
    )
}

fn single_outcome(outcome: EngineOutcome) -> Computed {
    let flags = outcome_flags(&outcome);
    let summary = outcome.summary();
    let status = if summary.validity.is_blocking() || !summary.converged {
        RunStatus::Flagged
    } else {
        RunStatus::Ok
    };
    let mut table = Table::new(&OUTCOME_COLUMNS);
    for row in outcome_rows(&outcome) {
        table.row(row);
    }
    let mut artifacts = Artifacts::default();
    artifacts.add(RESULTS_CSV, table.finish());
    Computed {
        status,
        flags,
        headline: net_headline(&outcome),
        result: output::json(&outcome),
        artifacts,
    }
}

fn stat_rows(table: &mut Table, chain: usize, s: &ChainStats) {
    let rows: [(&str, Stat); 6] = [
        ("honest_users", s.honest_users),
        ("honest_eligible", s.honest_eligible),
        ("farmer_mass", s.farmer_accounts),
        ("userbase", s.userbase),
        ("gross_revenue", s.gross_revenue),
        ("net_revenue", s.net_revenue),
    ];
    for (name, stat) in rows {
        table.row([
            chain_label(chain),
            name.to_string(),
            fmt_num(stat.mean),
            fmt_num(stat.stderr),
        ]);
    }
}

fn replicated(summary: MonteCarloSummary) -> Computed {
    let mut table = Table::new(&MONTE_CARLO_COLUMNS);
    for (i, c) in summary.chains.iter().enumerate() {
        stat_rows(&mut table, i, c);
    }
    let mut artifacts = Artifacts::default();
    artifacts.add(RESULTS_CSV, table.finish());
    let all_converged = summary.converged_runs == summary.replications;
    Computed {
        status: if all_converged {
            RunStatus::Ok
        } else {
            RunStatus::Flagged
        },
        flags: if all_converged {
            vec![]
        } else {
            vec!["NOT_CONVERGED".into()]
        },
        headline: format!(
            "{} replications, {} converged; mean net revenue chain1 {} chain2 {}",
            summary.replications,
            summary.converged_runs,
            fmt_num(summary.chains[0].net_revenue.mean),
            fmt_num(summary.chains[1].net_revenue.mean)
        ),
        result: output::json(&summary),
        artifacts,
    }
}

fn swept(rows: Vec<SweepRow>, axis: String) -> Computed {
    let mut header = vec!["value"];
    header.extend(OUTCOME_COLUMNS);
    let mut table = Table::new(&header);
    let mut flagged_points = 0;
    for r in &rows {
        if !outcome_flags(&r.outcome).is_empty() {
            flagged_points += 1;
        }
        for row in outcome_rows(&r.outcome) {
            let mut cells = vec![fmt_num(r.value)];
            cells.extend(row);
            table.row(cells);
        }
    }
    let mut artifacts = Artifacts::default();
    artifacts.add(RESULTS_CSV, table.finish());
    let points: Vec<Value> = rows
        .iter()
        .map(|r| json!({ "value": output::json(&r.value), "outcome": output::json(&r.outcome) }))
        .collect();
    Computed {
        status: RunStatus::Ok,
        flags: vec![],
        headline: format!(
            "{} points along {axis}, {flagged_points} with flags",
            rows.len()
        ),
        result: json!({ "axis": axis, "points": points }),
        artifacts,
    }
}

fn verified(report: VerificationReport) -> Computed {
    let mut table = Table::new(&VERIFY_COLUMNS);
    for c in &report.checks {
        let case = output::json(&c.case);
        let case = case.as_str().unwrap_or_default().to_string();
        for (rho, net) in c.resist.iter().zip(&c.net_revenue) {
            table.row([
                c.index.to_string(),
                case.clone(),
                fmt_num(*rho),
                fmt_num(*net),
                fmt_num(c.expected_rho),
                fmt_num(c.observed_rho),
                fmt_num(c.margin),
                bool_cell(c.tie),
                bool_cell(c.passed),
            ]);
        }
    }
    let mut artifacts = Artifacts::default();
    artifacts.add(RESULTS_CSV, table.finish());
    let result = json!({
        "theorem": output::json(&report.theorem),
        "scenarios_tested": report.scenarios_tested,
        "vacuous": report.vacuous,
        "ties": report.ties,
        "passed": report.passed,
        "violations": output::json(&report.violations),
    });
    Computed {
        status: if report.passed {
            RunStatus::Ok
        } else {
            RunStatus::Flagged
        },
        flags: if report.passed {
            vec![]
        } else {
            vec!["VERIFICATION_VIOLATIONS".into()]
        },
        headline: format!(
            "{} scenarios, {} vacuous, {} ties, {} violations",
            report.scenarios_tested,
            report.vacuous,
            report.ties,
            report.violations.len()
        ),
        result,
        artifacts,
    }
}

fn optimized(opt: PolicyOptimum) -> Computed {
    let mut table = Table::new(&OPTIMIZE_COLUMNS);
    let best_index = opt
        .points
        .iter()
        .position(|p| p.params == opt.best && p.net_revenue.is_some());
    for (i, p) in opt.points.iter().enumerate() {
        let q = &p.params;
        table.row([
            i.to_string(),
            fmt_num(q.fee),
            fmt_num(q.eligibility_cost),
            fmt_num(q.fixed_reward),
            fmt_num(q.budget),
            fmt_num(q.issuance_cost),
            fmt_num(q.resist),
            p.net_revenue.map(fmt_num).unwrap_or_default(),
            p.excluded.clone().unwrap_or_default(),
            bool_cell(Some(i) == best_index),
        ]);
    }
    let mut artifacts = Artifacts::default();
    artifacts.add(RESULTS_CSV, table.finish());
    let levers: Vec<Value> = opt
        .points
        .get(best_index.unwrap_or(0))
        .map(|p| {
            p.levers
                .iter()
                .map(|(l, v)| json!([output::json(l), output::json(v)]))
                .collect()
        })
        .unwrap_or_default();
    let result = json!({
        "target": opt.target.number(),
        "best": output::json(&opt.best),
        "best_levers": levers,
        "net_revenue": output::json(&opt.net_revenue),
        "evaluated": opt.evaluated,
        "excluded": opt.excluded,
        "outcome": output::json(&opt.outcome),
    });
    Computed {
        status: RunStatus::Ok,
        flags: vec![],
        headline: format!(
            "best net revenue {} on {} ({} of {} points excluded)",
            fmt_num(opt.net_revenue),
            opt.target,
            opt.excluded,
            opt.evaluated
        ),
        result,
        artifacts,
    }
}

fn open(path: &Path) -> Result<File, RunError> {
    File::open(path).map_err(|source| RunError::Input {
        path: path.to_path_buf(),
        source,
    })
}

fn metrics(scenario: &ScenarioFile, block: &MetricsBlock) -> Result<Computed, RunError> {
    let series_path = scenario.resolve(&block.series);
    let series =
        MetricsSeries::from_reader(open(&series_path)?).map_err(|source| RunError::Metrics {
            path: series_path.clone(),
            source,
        })?;
    let ratio: RatioSeries = compute_ratio_series(
        &series,
        &block.numerator_chain,
        &block.denominator_chain,
        &block.metric,
        block.percent,
    )
    .map_err(|source| RunError::Metrics {
        path: series_path.clone(),
        source,
    })?;
    let events: Vec<EventMarker> = match &block.events {
        Some(p) => {
            let path = scenario.resolve(p);
            read_events(open(&path)?).map_err(|source| RunError::Metrics { path, source })?
        }
        None => vec![],
    };
    let windows: Vec<(EventMarker, WindowStats)> = events
        .into_iter()
        .map(|e| {
            window_stats(&ratio.points, e.date, block.pre_days, block.post_days)
                .map(|w| (e, w))
                .map_err(|source| RunError::Metrics {
                    path: series_path.clone(),
                    source,
                })
        })
        .collect::<Result<_, _>>()?;

    let mut table = Table::new(&RATIO_COLUMNS);
    for p in &ratio.points {
        table.row([p.date.to_string(), fmt_num(p.ratio)]);
    }
    let mut artifacts = Artifacts::default();
    artifacts.add(RESULTS_CSV, table.finish());
    if !windows.is_empty() {
        let mut table = Table::new(&WINDOW_COLUMNS);
        for (e, w) in &windows {
            table.row([
                e.date.to_string(),
                e.label.clone(),
                fmt_num(w.pre_mean),
                fmt_num(w.post_mean),
                fmt_num(w.delta),
                w.pre_count.to_string(),
                w.post_count.to_string(),
                bool_cell(w.sustained),
            ]);
        }
        artifacts.add(WINDOWS_CSV, table.finish());
    }
    let window_json: Vec<Value> = windows
        .iter()
        .map(|(e, w)| json!({ "label": e.label, "stats": output::json(w) }))
        .collect();
    Ok(Computed {
        status: RunStatus::Ok,
        flags: vec![],
        headline: format!(
            "{} ratio points, {} skipped, {} events",
            ratio.points.len(),
            ratio.skipped_rows,
            window_json.len()
        ),
        result: json!({
            "points": ratio.points.len(),
            "skipped_rows": ratio.skipped_rows,
            "unmatched_dates": ratio.unmatched_dates,
            "windows": window_json,
        }),
        artifacts,
    })
}

fn compute(scenario: &ScenarioFile, command: CommandKind) -> Result<Computed, RunError> {
    Ok(match command {
        CommandKind::Solve => {
            let m = scenario.market()?;
            single_outcome(scenario.engine().evaluate(m.market, m.chain1, m.chain2)?)
        }
        CommandKind::Simulate => {
            let m = scenario.market()?;
            let sim = scenario.sim;
            if sim.population_mode == PopulationMode::Random && sim.replications > 1 {
                replicated(monte_carlo(m.market, m.chain1, m.chain2, &sim)?)
            } else {
                single_outcome(Engine::Abm(sim).evaluate(m.market, m.chain1, m.chain2)?)
            }
        }
        CommandKind::Sweep => {
            let m = scenario.market()?;
            let spec = scenario.sweep.as_ref().expect("command implies block");
            let rows = sweep(m.market, m.chain1, m.chain2, spec, &scenario.sim)?;
            swept(rows, spec.axis.to_string())
        }
        CommandKind::VerifyFixed => {
            let v = scenario
                .verify_fixed
                .as_ref()
                .expect("command implies block");
            verified(verify_theorem_fixed(v.count, v.seed)?)
        }
        CommandKind::VerifyProportional => {
            let v = scenario
                .verify_proportional
                .as_ref()
                .expect("command implies block");
            verified(verify_theorem_proportional(v.count, v.seed)?)
        }
        CommandKind::Optimize => {
            let m = scenario.market()?;
            let o = scenario.optimize.as_ref().expect("command implies block");
            let (base, opponent) = match o.target {
                ChainId::One => (m.chain1, m.chain2),
                ChainId::Two => (m.chain2, m.chain1),
            };
            optimized(optimize_policy(
                m.market,
                o.target,
                base,
                opponent,
                &o.grid(),
                &scenario.engine(),
            )?)
        }
        CommandKind::Metrics => {
            let block = scenario.metrics.as_ref().expect("command implies block");
            metrics(scenario, block)?
        }
    })
}

/// Run the scenario's command and write `results.csv` and `summary.json`
/// (plus `windows.csv` for metrics with events) into `out_dir`. Nothing is
/// written when the command fails.
pub fn run(scenario: &ScenarioFile, out_dir: &Path) -> Result<RunReport, RunError> {
    let command = scenario.command()?;
    let Computed {
        status,
        flags,
        headline,
        result,
        mut artifacts,
    } = compute(scenario, command)?;
    let summary = json!({
        "version": env!("CARGO_PKG_VERSION"),
        "command": command.name(),
        "status": status.as_str(),
        "flags": flags,
        "scenario": output::json(scenario),
        "result": result,
    });
    artifacts.add_json(SUMMARY_JSON, &summary);
    let files = artifacts
        .write(out_dir)
        .map_err(|source| RunError::Output {
            path: out_dir.to_path_buf(),
            source,
        })?;
    Ok(RunReport {
        command,
        status,
        flags,
        headline,
        files,
    })
}
