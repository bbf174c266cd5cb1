//! Batch execution of scenarios with per-scenario trajectory files and a
//! merged metrics report.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::hybrid::ClampEvent;
use crate::metrics::{reports_to_csv, Metrics, Report, ReportRow};
use crate::scenario::{ConfigError, Scenario};
use crate::sim::{run_closed_loop, SimError, Trajectory};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trajectory: Trajectory,
    pub position: Metrics,
    pub angle: Metrics,
    pub velocity: Metrics,
    pub clamp_events: Vec<ClampEvent>,
}

#[derive(Debug)]
pub struct ScenarioOutcome {
    pub scenario: Scenario,
    pub result: Result<RunOutput, RunError>,
}

/// Builds the controller, simulates and computes metrics for one scenario.
pub fn run_scenario(scenario: &Scenario) -> Result<RunOutput, RunError> {
    let mut controller = scenario.build_controller()?;
    let trajectory = run_closed_loop(
        &scenario.effective_plant(),
        &mut controller,
        &scenario.sim_config(),
    )?;
    let cfg = scenario.metrics_config();
    Ok(RunOutput {
        position: Metrics::of_position(&trajectory, &cfg),
        angle: Metrics::of_angle(&trajectory, &cfg),
        velocity: Metrics::of_velocity(&trajectory, &cfg),
        clamp_events: controller.clamp_events().to_vec(),
        trajectory,
    })
}

/// Runs all scenarios in parallel; results keep the input order.
pub fn run_all(scenarios: &[Scenario]) -> Vec<ScenarioOutcome> {
    scenarios
        .par_iter()
        .map(|s| ScenarioOutcome {
            scenario: s.clone(),
            result: run_scenario(s),
        })
        .collect()
}

/// One report per study, in order of first appearance; faulted runs are
/// left out.
pub fn build_reports(outcomes: &[ScenarioOutcome]) -> Vec<Report> {
    let mut studies: Vec<&str> = Vec::new();
    for o in outcomes {
        if !studies.contains(&o.scenario.study.as_str()) {
            studies.push(&o.scenario.study);
        }
    }
    studies
        .into_iter()
        .map(|study| {
            let rows = outcomes
                .iter()
                .filter(|o| o.scenario.study == study)
                .filter_map(|o| {
                    o.result.as_ref().ok().map(|r| ReportRow {
                        controller: o.scenario.controller.family().to_string(),
                        metrics: r.position,
                    })
                })
                .collect();
            Report::from_rows(study, rows)
        })
        .collect()
}

/// Plain-text report of all studies followed by any faults.
pub fn render_text(outcomes: &[ScenarioOutcome], reports: &[Report]) -> String {
    let mut out = String::new();
    for r in reports.iter().filter(|r| !r.is_empty()) {
        out.push_str(&r.to_text());
        out.push('\n');
    }
    let faults: Vec<String> = outcomes
        .iter()
        .filter_map(|o| {
            o.result
                .as_ref()
                .err()
                .map(|e| format!("  {}: {e}", o.scenario.name))
        })
        .collect();
    if !faults.is_empty() {
        out.push_str("faults:\n");
        for f in faults {
            out.push_str(&f);
            out.push('\n');
        }
    }
    out
}

#[derive(Debug)]
pub struct MatrixSummary {
    pub outcomes: Vec<ScenarioOutcome>,
    pub reports: Vec<Report>,
    pub written: Vec<PathBuf>,
    pub io_errors: Vec<String>,
}

impl MatrixSummary {
    pub fn faulted(&self) -> usize {
        self.outcomes.iter().filter(|o| o.result.is_err()).count()
    }
}

/// Checks that scenario names are unique (they name the output files).
pub fn check_unique_names(scenarios: &[Scenario]) -> Result<(), ConfigError> {
    for (i, s) in scenarios.iter().enumerate() {
        if scenarios[..i].iter().any(|o| o.name == s.name) {
            return Err(ConfigError {
                path: "name".into(),
                message: format!("duplicate scenario name `{}`", s.name),
            });
        }
    }
    Ok(())
}

/// Simulates every scenario, writes `<name>.csv` for each (the partial log for
/// a faulted run), then `report.txt` and `report.csv`. I/O failures are
/// collected per file and do not stop the remaining writes.
pub fn run_matrix(scenarios: &[Scenario], out_dir: &Path) -> Result<MatrixSummary, ConfigError> {
    check_unique_names(scenarios)?;
    let outcomes = run_all(scenarios);
    let reports = build_reports(&outcomes);
    let mut written = Vec::new();
    let mut io_errors = Vec::new();
    if let Err(e) = fs::create_dir_all(out_dir) {
        io_errors.push(format!("{}: {e}", out_dir.display()));
    }

    let mut write = |path: PathBuf, bytes: &[u8]| match fs::write(&path, bytes) {
        Ok(()) => written.push(path),
        Err(e) => io_errors.push(format!("{}: {e}", path.display())),
    };
    for o in &outcomes {
        let traj = match &o.result {
            Ok(r) => Some(&r.trajectory),
            Err(RunError::Sim(SimError::Fault { partial, .. })) => Some(partial.as_ref()),
            Err(_) => None,
        };
        if let Some(t) = traj {
            write(
                out_dir.join(format!("{}.csv", o.scenario.name)),
                t.to_csv_string().as_bytes(),
            );
        }
    }
    write(
        out_dir.join("report.txt"),
        render_text(&outcomes, &reports).as_bytes(),
    );
    write(
        out_dir.join("report.csv"),
        reports_to_csv(&reports).as_bytes(),
    );

    Ok(MatrixSummary {
        outcomes,
        reports,
        written,
        io_errors,
    })
}
