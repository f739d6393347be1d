//! Per-job lifecycle records, run summaries and replication aggregates for
//! processing time, response time and average power.

use std::collections::HashMap;

use rayon::prelude::*;
use thiserror::Error;

use crate::fog::{FogServer, JobId, ServerId};
use crate::policy::PolicyKind;
use crate::power::{average_power, fleet_average_power};
use crate::sim::{run_once, Experiment, RunOptions, RunOutput, SimError};
use crate::workload::Job;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Created,
    Arrived,
    ServiceStart,
    Completed,
    Response,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LifecycleEvent {
    pub job: JobId,
    pub stage: Stage,
    pub at_ms: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("job {0} is not registered")]
    UnknownJob(JobId),
    #[error("job {job}: {stage:?} recorded before {missing:?}")]
    OutOfOrderLifecycle {
        job: JobId,
        stage: Stage,
        missing: Stage,
    },
    #[error("job {job}: {stage:?} already recorded")]
    AlreadyRecorded { job: JobId, stage: Stage },
    #[error("job {job}: {stage:?} at {at_ms} ms precedes the previous stage at {previous_ms} ms")]
    TimeRegression {
        job: JobId,
        stage: Stage,
        at_ms: f64,
        previous_ms: f64,
    },
}

/// Lifecycle of one job. `arrived_ms` is the arrival at the server that
/// ends up serving it.
#[derive(Debug, Clone, PartialEq)]
pub struct JobRecord {
    pub job: Job,
    pub home_server: ServerId,
    pub served_by: Option<ServerId>,
    pub redirected: bool,
    pub infeasible: bool,
    pub created: bool,
    pub arrived_ms: Option<f64>,
    pub service_start_ms: Option<f64>,
    pub completed_ms: Option<f64>,
    pub response_ms: Option<f64>,
    /// Every link traversal: device to home, any redirect hop, and the
    /// return leg once it is scheduled.
    pub propagation_ms: f64,
}

impl JobRecord {
    pub fn new(job: Job, home_server: ServerId) -> Self {
        JobRecord {
            job,
            home_server,
            served_by: None,
            redirected: false,
            infeasible: false,
            created: false,
            arrived_ms: None,
            service_start_ms: None,
            completed_ms: None,
            response_ms: None,
            propagation_ms: 0.0,
        }
    }

    pub fn is_completed(&self) -> bool {
        self.response_ms.is_some()
    }

    pub fn service_ms(&self) -> Option<f64> {
        Some(self.completed_ms? - self.service_start_ms?)
    }

    pub fn queuing_ms(&self) -> Option<f64> {
        Some(self.service_start_ms? - self.arrived_ms?)
    }

    /// Completion minus arrival at the serving server, queue wait included.
    pub fn processing_ms(&self) -> Option<f64> {
        Some(self.completed_ms? - self.arrived_ms?)
    }

    pub fn response_time_ms(&self) -> Option<f64> {
        Some(self.response_ms? - self.job.created_ms)
    }

    fn slot(&mut self, stage: Stage) -> Option<&mut Option<f64>> {
        match stage {
            Stage::Created => None,
            Stage::Arrived => Some(&mut self.arrived_ms),
            Stage::ServiceStart => Some(&mut self.service_start_ms),
            Stage::Completed => Some(&mut self.completed_ms),
            Stage::Response => Some(&mut self.response_ms),
        }
    }

    fn stage_time(&self, stage: Stage) -> Option<f64> {
        match stage {
            Stage::Created => self.created.then_some(self.job.created_ms),
            Stage::Arrived => self.arrived_ms,
            Stage::ServiceStart => self.service_start_ms,
            Stage::Completed => self.completed_ms,
            Stage::Response => self.response_ms,
        }
    }

    /// Timestamps that are set must be non-decreasing in lifecycle order.
    pub fn timestamps_monotone(&self) -> bool {
        let stamps: Vec<f64> = [
            Stage::Created,
            Stage::Arrived,
            Stage::ServiceStart,
            Stage::Completed,
            Stage::Response,
        ]
        .into_iter()
        .filter_map(|s| self.stage_time(s))
        .collect();
        stamps.windows(2).all(|w| w[0] <= w[1])
    }
}

const ORDER: [Stage; 5] = [
    Stage::Created,
    Stage::Arrived,
    Stage::ServiceStart,
    Stage::Completed,
    Stage::Response,
];

#[derive(Debug, Clone, Default)]
pub struct JobStore {
    records: Vec<JobRecord>,
    index: HashMap<JobId, usize>,
}

impl JobStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, job: Job, home: ServerId) {
        self.index.insert(job.id, self.records.len());
        self.records.push(JobRecord::new(job, home));
    }

    pub fn records(&self) -> &[JobRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<JobRecord> {
        self.records
    }

    pub fn get(&self, job: JobId) -> Result<&JobRecord, MetricsError> {
        self.index
            .get(&job)
            .map(|&i| &self.records[i])
            .ok_or(MetricsError::UnknownJob(job))
    }

    pub fn get_mut(&mut self, job: JobId) -> Result<&mut JobRecord, MetricsError> {
        match self.index.get(&job) {
            Some(&i) => Ok(&mut self.records[i]),
            None => Err(MetricsError::UnknownJob(job)),
        }
    }

    /// Writes one lifecycle timestamp. Each stage is written once and only
    /// after the stage before it.
    pub fn record(&mut self, event: LifecycleEvent) -> Result<(), MetricsError> {
        let LifecycleEvent { job, stage, at_ms } = event;
        let rec = self.get_mut(job)?;
        if rec.stage_time(stage).is_some() {
            return Err(MetricsError::AlreadyRecorded { job, stage });
        }
        let pos = ORDER.iter().position(|s| *s == stage).expect("known stage");
        if pos > 0 {
            let before = ORDER[pos - 1];
            let previous_ms = rec
                .stage_time(before)
                .ok_or(MetricsError::OutOfOrderLifecycle {
                    job,
                    stage,
                    missing: before,
                })?;
            if at_ms < previous_ms {
                return Err(MetricsError::TimeRegression {
                    job,
                    stage,
                    at_ms,
                    previous_ms,
                });
            }
        }
        match rec.slot(stage) {
            Some(slot) => *slot = Some(at_ms),
            None => rec.created = true,
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServerRow {
    pub server_id: ServerId,
    pub energy_j: f64,
    pub avg_power_w: f64,
    pub peak_utilization: f64,
    pub jobs_served: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub policy: PolicyKind,
    pub replication: usize,
    pub seed: u64,
    pub n_created: usize,
    pub n_completed: usize,
    pub n_unfinished: usize,
    pub n_infeasible: usize,
    /// `None` when no job completed.
    pub mean_processing_ms: Option<f64>,
    pub mean_response_ms: Option<f64>,
    pub fleet_avg_power_w: f64,
    /// Set when the run completed no job at all.
    pub empty_run: bool,
    pub servers: Vec<ServerRow>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Means over completed jobs only. `servers` must have their energy
/// accounts closed at `horizon_ms`.
pub fn summarize(
    store: &JobStore,
    servers: &[FogServer],
    horizon_ms: f64,
    policy: PolicyKind,
    seed: u64,
    replication: usize,
) -> RunSummary {
    let records = store.records();
    let created = records.iter().filter(|r| r.created).count();
    let infeasible = records.iter().filter(|r| r.created && r.infeasible).count();
    let completed: Vec<&JobRecord> = records.iter().filter(|r| r.is_completed()).collect();
    let mean_processing_ms = mean(completed.iter().filter_map(|r| r.processing_ms()));
    let mean_response_ms = mean(completed.iter().filter_map(|r| r.response_time_ms()));
    RunSummary {
        policy,
        replication,
        seed,
        n_created: created,
        n_completed: completed.len(),
        n_unfinished: created - completed.len() - infeasible,
        n_infeasible: infeasible,
        mean_processing_ms,
        mean_response_ms,
        fleet_avg_power_w: fleet_average_power(servers, horizon_ms),
        empty_run: completed.is_empty(),
        servers: servers
            .iter()
            .map(|s| ServerRow {
                server_id: s.id,
                energy_j: s.energy.energy_j,
                avg_power_w: average_power(&s.energy, horizon_ms),
                peak_utilization: s.peak_utilization(),
                jobs_served: s.jobs_served(),
            })
            .collect(),
    }
}

/// Mean and sample standard deviation over the replications that produced
/// a value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricStats {
    pub mean: Option<f64>,
    pub sd: Option<f64>,
    pub n: usize,
}

impl MetricStats {
    pub fn from_values(values: &[f64]) -> Self {
        let n = values.len();
        let mean = mean(values.iter().copied());
        let sd = match (mean, n) {
            (Some(m), n) if n >= 2 => {
                Some((values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt())
            }
            _ => None,
        };
        MetricStats { mean, sd, n }
    }
}

#[derive(Debug, Clone)]
pub struct ReplicationReport {
    pub policy: PolicyKind,
    pub base_seed: u64,
    pub runs: Vec<RunOutput>,
    pub processing: MetricStats,
    pub response: MetricStats,
    pub power: MetricStats,
}

impl ReplicationReport {
    pub fn from_runs(policy: PolicyKind, base_seed: u64, runs: Vec<RunOutput>) -> Self {
        let collect = |f: fn(&RunSummary) -> Option<f64>| -> Vec<f64> {
            runs.iter().filter_map(|r| f(&r.summary)).collect()
        };
        ReplicationReport {
            policy,
            base_seed,
            processing: MetricStats::from_values(&collect(|s| s.mean_processing_ms)),
            response: MetricStats::from_values(&collect(|s| s.mean_response_ms)),
            power: MetricStats::from_values(&collect(|s| Some(s.fleet_avg_power_w))),
            runs,
        }
    }

    pub fn summaries(&self) -> impl Iterator<Item = &RunSummary> {
        self.runs.iter().map(|r| &r.summary)
    }
}

/// Runs `n` independent replications with seeds `base_seed + i`. The result
/// is ordered by replication index whatever order the runs finish in.
pub fn replicate(
    experiment: &Experiment,
    policy: PolicyKind,
    n: usize,
    base_seed: u64,
    options: RunOptions,
) -> Result<ReplicationReport, SimError> {
    let runs = (0..n)
        .into_par_iter()
        .map(|i| {
            run_once(
                experiment,
                policy,
                base_seed.wrapping_add(i as u64),
                i,
                options,
            )
            .map_err(|e| SimError::Replication {
                index: i,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ReplicationReport::from_runs(policy, base_seed, runs))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricDelta {
    pub name: &'static str,
    pub cooperative: Option<f64>,
    pub non_cooperative: Option<f64>,
}

impl MetricDelta {
    /// Cooperative minus non-cooperative.
    pub fn delta(&self) -> Option<f64> {
        Some(self.cooperative? - self.non_cooperative?)
    }

    pub fn sign(&self) -> Option<i8> {
        self.delta().map(|d| {
            if d < 0.0 {
                -1
            } else if d > 0.0 {
                1
            } else {
                0
            }
        })
    }
}

#[derive(Debug, Clone)]
pub struct ComparisonReport {
    pub cooperative: ReplicationReport,
    pub non_cooperative: ReplicationReport,
}

impl ComparisonReport {
    pub fn deltas(&self) -> [MetricDelta; 3] {
        let (c, n) = (&self.cooperative, &self.non_cooperative);
        [
            MetricDelta {
                name: "mean_processing_ms",
                cooperative: c.processing.mean,
                non_cooperative: n.processing.mean,
            },
            MetricDelta {
                name: "mean_response_ms",
                cooperative: c.response.mean,
                non_cooperative: n.response.mean,
            },
            MetricDelta {
                name: "fleet_avg_power_w",
                cooperative: c.power.mean,
                non_cooperative: n.power.mean,
            },
        ]
    }

    pub fn reports(&self) -> [&ReplicationReport; 2] {
        [&self.cooperative, &self.non_cooperative]
    }
}

/// Paired experiment: both policies see the same seeds, hence the same
/// placements and job streams.
pub fn compare(
    experiment: &Experiment,
    n: usize,
    base_seed: u64,
    options: RunOptions,
) -> Result<ComparisonReport, SimError> {
    Ok(ComparisonReport {
        cooperative: replicate(experiment, PolicyKind::Cooperative, n, base_seed, options)?,
        non_cooperative: replicate(
            experiment,
            PolicyKind::NonCooperative,
            n,
            base_seed,
            options,
        )?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fog::{DeviceId, Location};
    use crate::power::PowerParams;
    use crate::workload::{ClassName, JobClass};

    fn job(id: u64, created_ms: f64) -> Job {
        Job {
            id: JobId(id),
            device: DeviceId(3),
            class: JobClass {
                name: ClassName::Thick,
                length_mi: 500.0,
                required_mips: 1000.0,
                payload_bytes: 0,
            },
            created_ms,
        }
    }

    fn ev(job: u64, stage: Stage, at_ms: f64) -> LifecycleEvent {
        LifecycleEvent {
            job: JobId(job),
            stage,
            at_ms,
        }
    }

    fn full_lifecycle(store: &mut JobStore, id: u64, times: [f64; 4], back_ms: f64) {
        store.record(ev(id, Stage::Created, 0.0)).unwrap();
        for (stage, t) in ORDER[1..].iter().zip(times) {
            store.record(ev(id, *stage, t)).unwrap();
        }
        store.get_mut(JobId(id)).unwrap().propagation_ms = back_ms;
    }

    #[test]
    fn complete_lifecycle() {
        let mut store = JobStore::new();
        store.register(job(2, 0.0), ServerId(1));
        full_lifecycle(&mut store, 2, [1.5, 501.5, 1001.5, 1003.0], 3.0);
        let r = store.get(JobId(2)).unwrap();
        assert!(r.is_completed() && r.timestamps_monotone());
        assert_eq!(r.processing_ms(), Some(1000.0));
        assert_eq!(r.response_time_ms(), Some(1003.0));
        assert_eq!(r.queuing_ms(), Some(500.0));
        assert_eq!(r.service_ms(), Some(500.0));
    }

    #[test]
    fn completion_without_start_is_rejected() {
        let mut store = JobStore::new();
        store.register(job(1, 0.0), ServerId(1));
        store.record(ev(1, Stage::Created, 0.0)).unwrap();
        store.record(ev(1, Stage::Arrived, 1.0)).unwrap();
        assert_eq!(
            store.record(ev(1, Stage::Completed, 5.0)),
            Err(MetricsError::OutOfOrderLifecycle {
                job: JobId(1),
                stage: Stage::Completed,
                missing: Stage::ServiceStart
            })
        );
        assert!(matches!(
            store.record(ev(1, Stage::Arrived, 2.0)),
            Err(MetricsError::AlreadyRecorded { .. })
        ));
        assert!(matches!(
            store.record(ev(1, Stage::ServiceStart, 0.5)),
            Err(MetricsError::TimeRegression { .. })
        ));
        assert_eq!(
            store.record(ev(9, Stage::Created, 0.0)),
            Err(MetricsError::UnknownJob(JobId(9)))
        );
    }

    fn idle_fleet(horizon: f64) -> Vec<FogServer> {
        let p = PowerParams::default();
        let mut s = FogServer::new(ServerId(1), Location::default(), 1000.0, p);
        s.energy.on_utilization_change(&p, horizon, 0.0).unwrap();
        vec![s]
    }

    #[test]
    fn summary_means_over_completed() {
        let mut store = JobStore::new();
        store.register(job(1, 0.0), ServerId(1));
        store.register(job(2, 0.0), ServerId(1));
        store.register(job(3, 0.0), ServerId(1));
        full_lifecycle(&mut store, 1, [1.5, 1.5, 501.5, 503.0], 3.0);
        full_lifecycle(&mut store, 2, [1.5, 501.5, 1001.5, 1003.0], 3.0);
        store.record(ev(3, Stage::Created, 0.0)).unwrap();
        let s = summarize(
            &store,
            &idle_fleet(2000.0),
            2000.0,
            PolicyKind::NonCooperative,
            7,
            0,
        );
        assert_eq!(s.mean_processing_ms, Some(750.0));
        assert_eq!(s.mean_response_ms, Some(753.0));
        assert_eq!(
            (s.n_created, s.n_completed, s.n_unfinished, s.n_infeasible),
            (3, 2, 1, 0)
        );
        assert!(!s.empty_run);
        assert!((s.fleet_avg_power_w - 100.0).abs() < 1e-9);
    }

    #[test]
    fn empty_run_is_flagged() {
        let store = JobStore::new();
        let s = summarize(
            &store,
            &idle_fleet(1000.0),
            1000.0,
            PolicyKind::Cooperative,
            0,
            0,
        );
        assert!(s.empty_run);
        assert_eq!(s.mean_processing_ms, None);
        assert_eq!(s.mean_response_ms, None);
        assert_eq!(s.n_created, 0);
    }

    #[test]
    fn stats_mean_and_sample_sd() {
        let s = MetricStats::from_values(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]);
        assert_eq!(s.mean, Some(5.0));
        assert!((s.sd.unwrap() - (32.0f64 / 7.0).sqrt()).abs() < 1e-12);
        let one = MetricStats::from_values(&[3.5]);
        assert_eq!((one.mean, one.sd), (Some(3.5), None));
        assert_eq!(MetricStats::from_values(&[]).mean, None);
    }

    #[test]
    fn delta_signs() {
        let d = MetricDelta {
            name: "x",
            cooperative: Some(1.0),
            non_cooperative: Some(3.0),
        };
        assert_eq!((d.delta(), d.sign()), (Some(-2.0), Some(-1)));
        let none = MetricDelta {
            name: "x",
            cooperative: None,
            non_cooperative: Some(3.0),
        };
        assert_eq!(none.sign(), None);
    }
}
