//! Step-response indices and comparison reports.

use std::fmt::Write as _;

use crate::sim::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsConfig {
    /// Settling band as a fraction of `|reference|`, or an absolute band when
    /// the reference is zero.
    pub band_fraction: f64,
    /// Fraction of the run averaged for the steady-state error.
    pub tail_fraction: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            band_fraction: 0.02,
            tail_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    /// `None` when the signal leaves the band at the end of the record.
    pub settling_time_s: Option<f64>,
    pub overshoot_pct: f64,
    pub steady_state_error: f64,
    pub settled: bool,
}

impl Metrics {
    pub fn compute(times: &[f64], signal: &[f64], reference: f64, cfg: &MetricsConfig) -> Self {
        let settling_time_s = settling_time(times, signal, reference, cfg.band_fraction);
        Self {
            settling_time_s,
            overshoot_pct: overshoot_pct(signal, reference),
            steady_state_error: steady_state_error(signal, reference, cfg.tail_fraction),
            settled: settling_time_s.is_some(),
        }
    }

    /// Cart position metrics of a trajectory against its final reference.
    pub fn of_position(traj: &Trajectory, cfg: &MetricsConfig) -> Self {
        Self::compute(&traj.times_s, &traj.x(), traj.final_reference(), cfg)
    }

    /// Pendulum angle regulation metrics (reference 0).
    pub fn of_angle(traj: &Trajectory, cfg: &MetricsConfig) -> Self {
        Self::compute(&traj.times_s, &traj.theta(), 0.0, cfg)
    }

    /// Cart velocity metrics (reference 0).
    pub fn of_velocity(traj: &Trajectory, cfg: &MetricsConfig) -> Self {
        Self::compute(&traj.times_s, &traj.x_dot(), 0.0, cfg)
    }

    pub fn settling_label(&self) -> String {
        match self.settling_time_s {
            Some(t) => format!("{t:.4}"),
            None => "not-settled".into(),
        }
    }
}

fn band(reference: f64, band_fraction: f64) -> f64 {
    if reference == 0.0 {
        band_fraction
    } else {
        band_fraction * reference.abs()
    }
}

/// Start time of the final run of samples inside the band, or `None` if the
/// last sample is outside it.
pub fn settling_time(
    times: &[f64],
    signal: &[f64],
    reference: f64,
    band_fraction: f64,
) -> Option<f64> {
    let tol = band(reference, band_fraction);
    let inside = |v: &f64| (v - reference).abs() <= tol;
    if !signal.last().is_some_and(inside) {
        return None;
    }
    let first_of_final_run = signal.iter().rposition(|v| !inside(v)).map_or(0, |k| k + 1);
    Some(times[first_of_final_run])
}

/// Percent overshoot past a nonzero reference, or for a zero reference the
/// peak excursion beyond the initial one relative to the initial excursion.
pub fn overshoot_pct(signal: &[f64], reference: f64) -> f64 {
    if signal.is_empty() {
        return 0.0;
    }
    if reference == 0.0 {
        let y0 = signal[0].abs();
        if y0 == 0.0 {
            return 0.0;
        }
        let peak = signal.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        return ((peak - y0) / y0 * 100.0).max(0.0);
    }
    // Peak in the direction of the reference.
    let s = reference.signum();
    let peak = signal.iter().fold(f64::NEG_INFINITY, |m, v| m.max(s * v));
    ((peak - reference.abs()) / reference.abs() * 100.0).max(0.0)
}

/// `reference − mean(last tail_fraction of samples)`.
pub fn steady_state_error(signal: &[f64], reference: f64, tail_fraction: f64) -> f64 {
    if signal.is_empty() {
        return 0.0;
    }
    let n = ((signal.len() as f64 * tail_fraction) as usize).clamp(1, signal.len());
    let tail = &signal[signal.len() - n..];
    reference - tail.iter().sum::<f64>() / n as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub controller: String,
    pub metrics: Metrics,
}

/// Per-controller metrics of one scenario plus ratio lines.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Report {
    pub scenario: String,
    pub rows: Vec<ReportRow>,
    pub ratios: Vec<String>,
}

/// `"54%"`-style percentage of `a` relative to `b`.
pub fn ratio_pct(a: f64, b: f64) -> String {
    format!("{:.0}%", a / b * 100.0)
}

/// Builds a report from labelled trajectories using cart position metrics.
pub fn summarize(
    trajectories: &[(&str, &Trajectory)],
    scenario: &str,
    cfg: &MetricsConfig,
) -> Report {
    let rows = trajectories
        .iter()
        .map(|(label, traj)| ReportRow {
            controller: label.to_string(),
            metrics: Metrics::of_position(traj, cfg),
        })
        .collect();
    Report::from_rows(scenario, rows)
}

impl Report {
    pub fn from_rows(scenario: &str, rows: Vec<ReportRow>) -> Self {
        let settling = |name: &str| {
            rows.iter()
                .find(|r| r.controller == name)
                .and_then(|r| r.metrics.settling_time_s)
        };
        let mut ratios = Vec::new();
        if let Some(h) = settling("hybrid") {
            for other in ["pid", "lqr"] {
                if let Some(o) = settling(other) {
                    ratios.push(format!(
                        "hybrid settling time takes {} of {}'s",
                        ratio_pct(h, o),
                        other.to_uppercase()
                    ));
                }
            }
        }
        Self {
            scenario: scenario.to_string(),
            rows,
            ratios,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if self.rows.is_empty() {
            return out;
        }
        let _ = writeln!(out, "scenario: {}", self.scenario);
        let _ = writeln!(
            out,
            "  {:<12} {:>12} {:>14} {:>14}",
            "controller", "settling_s", "overshoot_pct", "sse"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "  {:<12} {:>12} {:>14.4} {:>14.6}",
                r.controller,
                r.metrics.settling_label(),
                r.metrics.overshoot_pct,
                r.metrics.steady_state_error
            );
        }
        for line in &self.ratios {
            let _ = writeln!(out, "  {line}");
        }
        out
    }

    /// Rows without header: `controller,scenario,settling_s,overshoot_pct,sse`.
    pub fn csv_rows(&self) -> Vec<[String; 5]> {
        self.rows
            .iter()
            .map(|r| {
                [
                    r.controller.clone(),
                    self.scenario.clone(),
                    r.metrics
                        .settling_time_s
                        .map_or_else(|| "not-settled".to_string(), |t| t.to_string()),
                    r.metrics.overshoot_pct.to_string(),
                    r.metrics.steady_state_error.to_string(),
                ]
            })
            .collect()
    }
}

pub const REPORT_CSV_HEADER: [&str; 5] = [
    "controller",
    "scenario",
    "settling_s",
    "overshoot_pct",
    "sse",
];

/// Concatenated CSV of several reports.
pub fn reports_to_csv(reports: &[Report]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(REPORT_CSV_HEADER).expect("in-memory write");
    for rep in reports {
        for row in rep.csv_rows() {
            w.write_record(&row).expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii")
}
