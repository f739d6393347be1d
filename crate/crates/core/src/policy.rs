//! Controller decision logic for arriving jobs and queue dispatch on release.
//!
//! The controller sees an exact snapshot of every fog server. Locally served
//! and queued jobs follow pre-installed rules with no extra latency; a
//! redirect costs `decision_latency_ms` plus the inter-server hop and books
//! the target the moment it is decided, so a job is redirected at most once.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::fog::{
    distance, propagation_delay, FogError, FogServer, JobId, LinkParams, Location, ServerId,
};
use crate::workload::Job;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PolicyKind {
    Cooperative,
    NonCooperative,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 2] = [PolicyKind::Cooperative, PolicyKind::NonCooperative];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::Cooperative => "cooperative",
            PolicyKind::NonCooperative => "non-cooperative",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cooperative" => Ok(PolicyKind::Cooperative),
            "non-cooperative" => Ok(PolicyKind::NonCooperative),
            other => Err(format!(
                "unknown policy `{other}` (cooperative|non-cooperative)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServerSnapshot {
    pub id: ServerId,
    pub location: Location,
    pub capacity_mips: f64,
    pub reserved_mips: f64,
    pub queue_len: usize,
}

impl ServerSnapshot {
    pub fn of(server: &FogServer) -> Self {
        ServerSnapshot {
            id: server.id,
            location: server.location,
            capacity_mips: server.capacity_mips,
            reserved_mips: server.reserved_mips(),
            queue_len: server.queue_len(),
        }
    }

    pub fn free_mips(&self) -> f64 {
        self.capacity_mips - self.reserved_mips
    }

    /// Same admission test as [`FogServer::reserve`].
    pub fn fits(&self, required_mips: f64) -> bool {
        self.reserved_mips + required_mips <= self.capacity_mips
    }
}

/// The controller's global view at decision time.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerView {
    pub servers: Vec<ServerSnapshot>,
    pub decision_latency_ms: f64,
    /// Present only when cloud fallback is switched on.
    pub cloud: Option<ServerSnapshot>,
}

impl ControllerView {
    pub fn capture(
        servers: &[FogServer],
        cloud: Option<&FogServer>,
        decision_latency_ms: f64,
    ) -> Self {
        ControllerView {
            servers: servers.iter().map(ServerSnapshot::of).collect(),
            decision_latency_ms,
            cloud: cloud.map(ServerSnapshot::of),
        }
    }

    pub fn server(&self, id: ServerId) -> Option<&ServerSnapshot> {
        self.servers.iter().find(|s| s.id == id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyAction {
    ServeNow(ServerId),
    Enqueue(ServerId),
    Redirect { from: ServerId, to: ServerId },
}

#[derive(Debug, Error, PartialEq)]
pub enum PolicyError {
    #[error("job {job} needs {required_mips} MIPS but the largest server offers {max_capacity}")]
    UnservableJob {
        job: JobId,
        required_mips: f64,
        max_capacity: f64,
    },
    #[error("server {0} is not part of the controller view")]
    UnknownServer(ServerId),
    #[error("redirect booking failed: {0}")]
    Booking(#[from] FogError),
    #[error("redirect target {server} cannot hold job {job}")]
    TargetFull { server: ServerId, job: JobId },
}

pub fn decide_arrival(
    view: &ControllerView,
    job: &Job,
    home: ServerId,
    kind: PolicyKind,
) -> Result<PolicyAction, PolicyError> {
    let required = job.class.required_mips;
    let max_capacity = view
        .servers
        .iter()
        .map(|s| s.capacity_mips)
        .fold(0.0, f64::max);
    if required > max_capacity {
        return Err(PolicyError::UnservableJob {
            job: job.id,
            required_mips: required,
            max_capacity,
        });
    }
    let home_view = view.server(home).ok_or(PolicyError::UnknownServer(home))?;
    if home_view.fits(required) {
        return Ok(PolicyAction::ServeNow(home));
    }
    match kind {
        PolicyKind::NonCooperative => Ok(PolicyAction::Enqueue(home)),
        PolicyKind::Cooperative => {
            let target = select_target(view, job, home).or_else(|| {
                view.cloud
                    .as_ref()
                    .filter(|c| c.fits(required))
                    .map(|c| c.id)
            });
            Ok(match target {
                Some(to) => PolicyAction::Redirect { from: home, to },
                None => PolicyAction::Enqueue(home),
            })
        }
    }
}

/// Nearest other fog server (to `home`) that can start the job right away;
/// lowest id wins ties.
pub fn select_target(view: &ControllerView, job: &Job, home: ServerId) -> Option<ServerId> {
    let origin = view.server(home)?.location;
    view.servers
        .iter()
        .filter(|s| s.id != home && s.fits(job.class.required_mips))
        .map(|s| (distance(origin, s.location), s.id))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .map(|(_, id)| id)
}

/// Timing of a committed redirect.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RedirectPlan {
    pub to: ServerId,
    /// When the job leaves the home server.
    pub dispatch_at: f64,
    /// When it reaches the target; service starts then.
    pub arrival_at: f64,
    pub hop_propagation_ms: f64,
}

/// Books the job on `target` at decision time `now_ms` and works out when it
/// gets there.
pub fn commit_redirect(
    target: &mut FogServer,
    job: &Job,
    from: Location,
    now_ms: f64,
    decision_latency_ms: f64,
    link: &LinkParams,
) -> Result<RedirectPlan, PolicyError> {
    if !target.reserve(job.id, job.class.required_mips)? {
        return Err(PolicyError::TargetFull {
            server: target.id,
            job: job.id,
        });
    }
    let hop = propagation_delay(from, target.location, link);
    let dispatch_at = now_ms + decision_latency_ms;
    Ok(RedirectPlan {
        to: target.id,
        dispatch_at,
        arrival_at: dispatch_at + hop,
        hop_propagation_ms: hop,
    })
}

/// Strict FIFO: starts queued jobs from the head while the head fits, and
/// stops at the first one that does not. Started jobs hold a reservation on
/// return.
pub fn dispatch_queue(server: &mut FogServer) -> Result<Vec<JobId>, FogError> {
    let mut started = Vec::new();
    while let Some(head) = server.queue_head().copied() {
        if !server.reserve(head.job, head.required_mips)? {
            break;
        }
        server.pop_queue_head();
        started.push(head.job);
    }
    Ok(started)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fog::{DeviceId, QueuedJob};
    use crate::power::PowerParams;
    use crate::workload::{ClassName, JobClass};

    fn job(id: u64, mips: f64) -> Job {
        Job {
            id: JobId(id),
            device: DeviceId(99),
            class: JobClass {
                name: ClassName::Thick,
                length_mi: 500.0,
                required_mips: mips,
                payload_bytes: 0,
            },
            created_ms: 0.0,
        }
    }

    fn snap(id: u32, y: f64, reserved: f64) -> ServerSnapshot {
        ServerSnapshot {
            id: ServerId(id),
            location: Location::new(0.0, y),
            capacity_mips: 1000.0,
            reserved_mips: reserved,
            queue_len: 0,
        }
    }

    fn view(servers: Vec<ServerSnapshot>) -> ControllerView {
        ControllerView {
            servers,
            decision_latency_ms: 1.0,
            cloud: None,
        }
    }

    #[test]
    fn free_home_serves_now_under_both() {
        let v = view(vec![snap(1, 0.0, 0.0), snap(2, 10.0, 0.0)]);
        for kind in PolicyKind::ALL {
            assert_eq!(
                decide_arrival(&v, &job(1, 500.0), ServerId(1), kind),
                Ok(PolicyAction::ServeNow(ServerId(1)))
            );
        }
    }

    #[test]
    fn saturated_home_enqueues_non_cooperative() {
        let v = view(vec![snap(1, 0.0, 1000.0), snap(2, 10.0, 0.0)]);
        assert_eq!(
            decide_arrival(&v, &job(1, 500.0), ServerId(1), PolicyKind::NonCooperative),
            Ok(PolicyAction::Enqueue(ServerId(1)))
        );
    }

    #[test]
    fn saturated_home_redirects_cooperative() {
        let v = view(vec![snap(1, 0.0, 1000.0), snap(2, 10.0, 0.0)]);
        assert_eq!(
            decide_arrival(&v, &job(1, 500.0), ServerId(1), PolicyKind::Cooperative),
            Ok(PolicyAction::Redirect {
                from: ServerId(1),
                to: ServerId(2)
            })
        );
    }

    #[test]
    fn cooperative_without_target_enqueues() {
        let v = view(vec![snap(1, 0.0, 1000.0), snap(2, 10.0, 600.0)]);
        assert_eq!(
            decide_arrival(&v, &job(1, 500.0), ServerId(1), PolicyKind::Cooperative),
            Ok(PolicyAction::Enqueue(ServerId(1)))
        );
    }

    #[test]
    fn cloud_fallback_takes_overflow() {
        let mut v = view(vec![snap(1, 0.0, 1000.0), snap(2, 10.0, 600.0)]);
        v.cloud = Some(ServerSnapshot {
            capacity_mips: 1e6,
            ..snap(50, -500.0, 0.0)
        });
        assert_eq!(
            decide_arrival(&v, &job(1, 500.0), ServerId(1), PolicyKind::Cooperative),
            Ok(PolicyAction::Redirect {
                from: ServerId(1),
                to: ServerId(50)
            })
        );
        assert_eq!(
            decide_arrival(&v, &job(1, 500.0), ServerId(1), PolicyKind::NonCooperative),
            Ok(PolicyAction::Enqueue(ServerId(1)))
        );
    }

    #[test]
    fn oversized_job_is_unservable() {
        let v = view(vec![snap(1, 0.0, 0.0)]);
        assert!(matches!(
            decide_arrival(&v, &job(1, 1500.0), ServerId(1), PolicyKind::Cooperative),
            Err(PolicyError::UnservableJob { .. })
        ));
    }

    #[test]
    fn target_selection() {
        let v = view(vec![
            snap(1, 0.0, 1000.0),
            snap(3, 20.0, 0.0),
            snap(2, 10.0, 0.0),
        ]);
        assert_eq!(
            select_target(&v, &job(1, 500.0), ServerId(1)),
            Some(ServerId(2))
        );

        let full = view(vec![
            snap(1, 0.0, 1000.0),
            snap(2, 10.0, 600.0),
            snap(3, 20.0, 501.0),
        ]);
        assert_eq!(select_target(&full, &job(1, 500.0), ServerId(1)), None);

        let tied = view(vec![
            snap(1, 0.0, 1000.0),
            snap(3, -10.0, 0.0),
            snap(2, 10.0, 0.0),
        ]);
        assert_eq!(
            select_target(&tied, &job(1, 500.0), ServerId(1)),
            Some(ServerId(2))
        );
    }

    fn fog(id: u32, y: f64) -> FogServer {
        FogServer::new(
            ServerId(id),
            Location::new(0.0, y),
            1000.0,
            PowerParams::default(),
        )
    }

    #[test]
    fn redirect_books_target_and_times_arrival() {
        let mut target = fog(2, 10.0);
        let plan = commit_redirect(
            &mut target,
            &job(2, 1000.0),
            Location::new(0.0, 0.0),
            1.5,
            1.0,
            &LinkParams::default(),
        )
        .unwrap();
        assert_eq!(plan.hop_propagation_ms, 10.5);
        assert_eq!(plan.dispatch_at, 2.5);
        assert_eq!(plan.arrival_at, 13.0);
        assert_eq!(target.reserved_mips(), 1000.0);
    }

    #[test]
    fn redirect_between_colocated_servers() {
        let mut target = fog(2, 0.0);
        let plan = commit_redirect(
            &mut target,
            &job(2, 100.0),
            Location::new(0.0, 0.0),
            40.0,
            0.0,
            &LinkParams::default(),
        )
        .unwrap();
        assert_eq!(plan.arrival_at, 40.5);
    }

    #[test]
    fn queue_dispatch() {
        let mut s = fog(1, 0.0);
        s.reserve(JobId(1), 1000.0).unwrap();
        s.enqueue(QueuedJob {
            job: JobId(2),
            required_mips: 1000.0,
        });
        assert!(dispatch_queue(&mut s).unwrap().is_empty());
        s.release(JobId(1)).unwrap();
        assert_eq!(dispatch_queue(&mut s).unwrap(), vec![JobId(2)]);
        assert_eq!(s.reserved_mips(), 1000.0);
        assert_eq!(s.queue_len(), 0);
    }

    #[test]
    fn queue_head_blocks() {
        let mut s = fog(1, 0.0);
        s.reserve(JobId(1), 500.0).unwrap();
        for (id, mips) in [(2, 800.0), (3, 100.0)] {
            s.enqueue(QueuedJob {
                job: JobId(id),
                required_mips: mips,
            });
        }
        assert!(dispatch_queue(&mut s).unwrap().is_empty());
        assert_eq!(s.queue_len(), 2);
    }

    #[test]
    fn empty_queue_dispatches_nothing() {
        assert!(dispatch_queue(&mut fog(1, 0.0)).unwrap().is_empty());
    }

    #[test]
    fn policy_names_round_trip() {
        for kind in PolicyKind::ALL {
            assert_eq!(kind.as_str().parse::<PolicyKind>(), Ok(kind));
        }
        assert!("greedy".parse::<PolicyKind>().is_err());
    }
}
