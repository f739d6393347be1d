//! CSV, trace and chart output for run and comparison reports.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use crate::chart::{format_value, GroupedBarChart, Series};
use crate::metrics::{ComparisonReport, MetricStats, ReplicationReport};

pub const JOBS_HEADER: [&str; 18] = [
    "job_id",
    "device_id",
    "class",
    "policy",
    "replication",
    "created_ms",
    "home_server",
    "served_by",
    "redirected",
    "arrived_ms",
    "service_start_ms",
    "completed_ms",
    "response_ms",
    "service_ms",
    "queuing_ms",
    "propagation_ms",
    "processing_ms",
    "response_time_ms",
];

pub const SERVERS_HEADER: [&str; 6] = [
    "replication",
    "server_id",
    "energy_j",
    "avg_power_w",
    "peak_utilization",
    "jobs_served",
];

pub const REPLICATIONS_HEADER: [&str; 8] = [
    "policy",
    "replication",
    "seed",
    "mean_processing_ms",
    "mean_response_ms",
    "fleet_avg_power_w",
    "n_completed",
    "n_unfinished",
];

pub const SUMMARY_HEADER: [&str; 13] = [
    "policy",
    "replications",
    "base_seed",
    "mean_processing_ms",
    "sd_processing_ms",
    "mean_response_ms",
    "sd_response_ms",
    "fleet_avg_power_w",
    "sd_fleet_avg_power_w",
    "n_created",
    "n_completed",
    "n_unfinished",
    "n_infeasible",
];

pub const TIME_CHART_FILE: &str = "processing_response_time.svg";
pub const POWER_CHART_FILE: &str = "average_power.svg";

fn opt(v: Option<f64>) -> String {
    v.map(format_value).unwrap_or_default()
}

fn csv_err(e: csv::Error) -> io::Error {
    io::Error::other(e)
}

fn write_rows(
    path: &Path,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> io::Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()
}

pub fn write_jobs(path: &Path, reports: &[&ReplicationReport]) -> io::Result<()> {
    let rows = reports.iter().flat_map(|rep| {
        rep.runs.iter().flat_map(move |run| {
            let replication = run.summary.replication;
            run.records.iter().filter(|r| r.created).map(move |r| {
                vec![
                    r.job.id.to_string(),
                    r.job.device.to_string(),
                    r.job.class.name.to_string(),
                    rep.policy.to_string(),
                    replication.to_string(),
                    format_value(r.job.created_ms),
                    r.home_server.to_string(),
                    r.served_by.map(|s| s.to_string()).unwrap_or_default(),
                    r.redirected.to_string(),
                    opt(r.arrived_ms),
                    opt(r.service_start_ms),
                    opt(r.completed_ms),
                    opt(r.response_ms),
                    opt(r.service_ms()),
                    opt(r.queuing_ms()),
                    format_value(r.propagation_ms),
                    opt(r.processing_ms()),
                    opt(r.response_time_ms()),
                ]
            })
        })
    });
    write_rows(path, &JOBS_HEADER, rows)
}

pub fn write_servers(path: &Path, report: &ReplicationReport) -> io::Result<()> {
    let rows = report.summaries().flat_map(|s| {
        s.servers.iter().map(move |row| {
            vec![
                s.replication.to_string(),
                row.server_id.to_string(),
                format_value(row.energy_j),
                format_value(row.avg_power_w),
                format_value(row.peak_utilization),
                row.jobs_served.to_string(),
            ]
        })
    });
    write_rows(path, &SERVERS_HEADER, rows)
}

pub fn write_replications(path: &Path, reports: &[&ReplicationReport]) -> io::Result<()> {
    let rows = reports.iter().flat_map(|rep| {
        rep.summaries().map(|s| {
            vec![
                s.policy.to_string(),
                s.replication.to_string(),
                s.seed.to_string(),
                opt(s.mean_processing_ms),
                opt(s.mean_response_ms),
                format_value(s.fleet_avg_power_w),
                s.n_completed.to_string(),
                s.n_unfinished.to_string(),
            ]
        })
    });
    write_rows(path, &REPLICATIONS_HEADER, rows)
}

fn stats_cells(m: &MetricStats) -> [String; 2] {
    [opt(m.mean), opt(m.sd)]
}

pub fn write_summary(path: &Path, reports: &[&ReplicationReport]) -> io::Result<()> {
    let rows = reports.iter().map(|rep| {
        let total = |f: fn(&crate::metrics::RunSummary) -> usize| -> String {
            rep.summaries().map(f).sum::<usize>().to_string()
        };
        let mut row = vec![
            rep.policy.to_string(),
            rep.runs.len().to_string(),
            rep.base_seed.to_string(),
        ];
        row.extend(stats_cells(&rep.processing));
        row.extend(stats_cells(&rep.response));
        row.extend(stats_cells(&rep.power));
        row.extend([
            total(|s| s.n_created),
            total(|s| s.n_completed),
            total(|s| s.n_unfinished),
            total(|s| s.n_infeasible),
        ]);
        row
    });
    write_rows(path, &SUMMARY_HEADER, rows)
}

pub fn write_trace(path: &Path, lines: &[String]) -> io::Result<()> {
    let mut text = lines.join("\n");
    if !text.is_empty() {
        text.push('\n');
    }
    fs::write(path, text)
}

/// Writes jobs.csv, servers.csv, replications.csv and summary.csv, plus one
/// trace file per replication when traces were kept.
pub fn write_run_dir(dir: &Path, report: &ReplicationReport) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let file = |name: &str| dir.join(name);
    write_jobs(&file("jobs.csv"), &[report])?;
    write_servers(&file("servers.csv"), report)?;
    write_replications(&file("replications.csv"), &[report])?;
    write_summary(&file("summary.csv"), &[report])?;
    written.extend(["jobs.csv", "servers.csv", "replications.csv", "summary.csv"].map(file));
    for run in &report.runs {
        if let Some(trace) = &run.trace {
            let path = file(&format!("trace_{}.tsv", run.summary.replication));
            write_trace(&path, trace)?;
            written.push(path);
        }
    }
    Ok(written)
}

pub fn time_chart(cmp: &ComparisonReport) -> GroupedBarChart {
    GroupedBarChart {
        title: "Processing and response time".into(),
        y_label: "mean time (ms)".into(),
        groups: vec!["processing time".into(), "response time".into()],
        series: cmp
            .reports()
            .iter()
            .map(|r| Series {
                name: r.policy.to_string(),
                values: vec![r.processing.mean, r.response.mean],
            })
            .collect(),
    }
}

pub fn power_chart(cmp: &ComparisonReport) -> GroupedBarChart {
    GroupedBarChart {
        title: "Average power consumption".into(),
        y_label: "fleet average power (W)".into(),
        groups: vec!["average power".into()],
        series: cmp
            .reports()
            .iter()
            .map(|r| Series {
                name: r.policy.to_string(),
                values: vec![r.power.mean],
            })
            .collect(),
    }
}

/// Per-policy run directories, a two-row summary.csv, comparison.csv with
/// the deltas and, optionally, the two charts.
pub fn write_comparison(
    dir: &Path,
    cmp: &ComparisonReport,
    charts: bool,
) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for rep in cmp.reports() {
        written.extend(write_run_dir(&dir.join(rep.policy.as_str()), rep)?);
    }
    let summary = dir.join("summary.csv");
    write_summary(&summary, &cmp.reports())?;
    written.push(summary);

    let comparison = dir.join("comparison.csv");
    write_rows(
        &comparison,
        &["metric", "cooperative", "non_cooperative", "delta", "sign"],
        cmp.deltas().iter().map(|d| {
            vec![
                d.name.to_string(),
                opt(d.cooperative),
                opt(d.non_cooperative),
                opt(d.delta()),
                d.sign().map(|s| s.to_string()).unwrap_or_default(),
            ]
        }),
    )?;
    written.push(comparison);

    if charts {
        for (name, chart) in [
            (TIME_CHART_FILE, time_chart(cmp)),
            (POWER_CHART_FILE, power_chart(cmp)),
        ] {
            let path = dir.join(name);
            fs::write(&path, chart.render())?;
            written.push(path);
        }
    }
    Ok(written)
}

/// Plain-text side-by-side table for the terminal.
pub fn comparison_table(cmp: &ComparisonReport) -> String {
    let cell = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.3}"));
    let mut out = format!(
        "{:<22} {:>16} {:>16} {:>14}\n",
        "metric", "cooperative", "non-cooperative", "delta"
    );
    for d in cmp.deltas() {
        out.push_str(&format!(
            "{:<22} {:>16} {:>16} {:>14}\n",
            d.name,
            cell(d.cooperative),
            cell(d.non_cooperative),
            cell(d.delta())
        ));
    }
    out.push_str(&format!(
        "replications: {} per policy, base seed {}\n",
        cmp.cooperative.runs.len(),
        cmp.cooperative.base_seed
    ));
    out
}
