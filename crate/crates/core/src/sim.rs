//! One simulation run: builds the deployment for a seed, replays the job
//! stream through the controller and collects records and energy.

use std::collections::{BTreeSet, HashMap};

use thiserror::Error;

use crate::engine::{EngineError, Event, EventKind, Payload, RunError, SimTime, Timeline};
use crate::fog::{
    propagation_delay, AnchorNode, CloudTier, DeviceId, FogError, FogServer, IoTDevice, JobId,
    LinkParams, Location, QueuedJob, ServerId, Topology,
};
use crate::metrics::{
    summarize, JobRecord, JobStore, LifecycleEvent, MetricsError, RunSummary, Stage,
};
use crate::policy::{
    commit_redirect, decide_arrival, dispatch_queue, ControllerView, PolicyAction, PolicyError,
    PolicyKind, RedirectPlan,
};
use crate::power::{power_utilization, EnergyAccount, PowerError, PowerParams};
use crate::workload::{generate, place_randomly, Job, Region, Scenario, WorkloadSpec};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Fog(#[from] FogError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Power(#[from] PowerError),
    #[error("job {job} names device {device}, which is not in the topology")]
    UnknownDevice { job: JobId, device: DeviceId },
    #[error("duplicate job id {0}")]
    DuplicateJob(JobId),
    #[error("unknown job {0}")]
    UnknownJob(JobId),
    #[error("unknown server {0}")]
    UnknownServer(ServerId),
    #[error("event carries no {0} id")]
    MissingPayload(&'static str),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("{source}")]
    Event {
        event: Event,
        #[source]
        source: Box<SimError>,
    },
    #[error("replication {index}: {source}")]
    Replication {
        index: usize,
        #[source]
        source: Box<SimError>,
    },
}

impl From<RunError<SimError>> for SimError {
    fn from(e: RunError<SimError>) -> Self {
        SimError::Event {
            event: e.event,
            source: Box::new(e.source),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServerSpec {
    pub id: ServerId,
    pub location: Location,
    pub capacity_mips: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceSpec {
    pub id: DeviceId,
    pub location: Location,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpec {
    pub scenario: Scenario,
    pub n_servers: usize,
    pub n_devices: usize,
    pub region: Region,
    pub capacity_mips: f64,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        GeneratorSpec {
            scenario: Scenario::Uniform,
            n_servers: 4,
            n_devices: 20,
            region: Region::default(),
            capacity_mips: 1000.0,
        }
    }
}

impl GeneratorSpec {
    /// Ids the generator hands out: servers `1..=n`, then devices.
    pub fn device_ids(&self) -> Vec<DeviceId> {
        let first = self.n_servers as u32 + 1;
        (0..self.n_devices as u32)
            .map(|i| DeviceId(first + i))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TopologySource {
    Explicit {
        servers: Vec<ServerSpec>,
        devices: Vec<DeviceSpec>,
    },
    Generated(GeneratorSpec),
}

impl TopologySource {
    pub fn device_ids(&self) -> Vec<DeviceId> {
        match self {
            TopologySource::Explicit { devices, .. } => devices.iter().map(|d| d.id).collect(),
            TopologySource::Generated(g) => g.device_ids(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum WorkloadSource {
    /// Regenerated per replication with the replication seed.
    Synthetic(WorkloadSpec),
    /// A fixed stream, identical in every replication.
    Fixed(Vec<Job>),
}

/// Everything needed to run a replication except the policy and the seed.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub topology: TopologySource,
    pub workload: WorkloadSource,
    pub link: LinkParams,
    pub power: PowerParams,
    pub decision_latency_ms: f64,
    /// Cloud capacity in MIPS when cooperative overflow to the cloud is on.
    pub cloud_fallback_mips: Option<f64>,
    pub cloud_location: Option<Location>,
    pub proxy_location: Option<Location>,
    pub horizon_ms: f64,
}

impl Experiment {
    pub fn new(topology: TopologySource, workload: WorkloadSource, horizon_ms: f64) -> Self {
        Experiment {
            topology,
            workload,
            link: LinkParams::default(),
            power: PowerParams::default(),
            decision_latency_ms: 1.0,
            cloud_fallback_mips: None,
            cloud_location: None,
            proxy_location: None,
            horizon_ms,
        }
    }

    /// Builds the deployment for `seed` with devices already homed.
    pub fn build_topology(&self, seed: u64) -> Result<Topology, SimError> {
        let (servers, devices, extent) = match &self.topology {
            TopologySource::Explicit { servers, devices } => {
                let s: Vec<FogServer> = servers
                    .iter()
                    .map(|s| FogServer::new(s.id, s.location, s.capacity_mips, self.power))
                    .collect();
                let d: Vec<IoTDevice> = devices
                    .iter()
                    .map(|d| IoTDevice::new(d.id, d.location))
                    .collect();
                let (w, h) = s
                    .iter()
                    .map(|s| s.location)
                    .chain(d.iter().map(|d| d.location))
                    .fold((0.0f64, 0.0f64), |(w, h), l| {
                        (w.max(l.x.abs()), h.max(l.y.abs()))
                    });
                (
                    s,
                    d,
                    Region {
                        width: w,
                        height: h,
                    },
                )
            }
            TopologySource::Generated(g) => {
                let placed = place_randomly(g.scenario, g.n_servers, g.n_devices, g.region, seed);
                let s = placed
                    .servers
                    .iter()
                    .enumerate()
                    .map(|(i, l)| {
                        FogServer::new(ServerId(i as u32 + 1), *l, g.capacity_mips, self.power)
                    })
                    .collect();
                let d = g
                    .device_ids()
                    .into_iter()
                    .zip(&placed.devices)
                    .map(|(id, l)| IoTDevice::new(id, *l))
                    .collect();
                (s, d, g.region)
            }
        };
        let next_id = servers
            .iter()
            .map(|s: &FogServer| s.id.0)
            .chain(devices.iter().map(|d: &IoTDevice| d.id.0))
            .max()
            .unwrap_or(0)
            + 1;
        let cloud_tier = CloudTier {
            cloud: AnchorNode {
                id: next_id,
                location: self.cloud_location.unwrap_or(Location::new(
                    extent.width / 2.0,
                    -5.0 * extent.height.max(1.0),
                )),
            },
            proxy: AnchorNode {
                id: next_id + 1,
                location: self.proxy_location.unwrap_or(Location::new(
                    extent.width / 2.0,
                    -0.5 * extent.height.max(1.0),
                )),
            },
        };
        Ok(Topology::new(servers, devices, cloud_tier, self.link)?)
    }

    pub fn jobs_for(&self, seed: u64) -> Vec<Job> {
        match &self.workload {
            WorkloadSource::Synthetic(spec) => {
                let spec = WorkloadSpec { seed, ..*spec };
                generate(&spec, &self.topology.device_ids())
            }
            WorkloadSource::Fixed(jobs) => jobs.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Keep one trace line per processed event.
    pub trace: bool,
    /// Check reservation, energy and lifecycle invariants after every event.
    pub audit: bool,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub summary: RunSummary,
    pub records: Vec<JobRecord>,
    pub servers: Vec<FogServer>,
    pub trace: Option<Vec<String>>,
    pub events_processed: u64,
}

/// Runs the experiment once under `policy` with `seed`.
pub fn run_once(
    experiment: &Experiment,
    policy: PolicyKind,
    seed: u64,
    replication: usize,
    options: RunOptions,
) -> Result<RunOutput, SimError> {
    let topology = experiment.build_topology(seed)?;
    let jobs = experiment.jobs_for(seed);
    run_jobs(
        experiment,
        topology,
        jobs,
        policy,
        seed,
        replication,
        options,
    )
}

/// Runs a prepared topology and job stream.
pub fn run_jobs(
    experiment: &Experiment,
    mut topology: Topology,
    jobs: Vec<Job>,
    policy: PolicyKind,
    seed: u64,
    replication: usize,
    options: RunOptions,
) -> Result<RunOutput, SimError> {
    let horizon = SimTime::new(experiment.horizon_ms)?;
    for s in &mut topology.servers {
        s.energy = if options.audit {
            EnergyAccount::recording()
        } else {
            EnergyAccount::default()
        };
    }
    let cloud = experiment.cloud_fallback_mips.map(|mips| {
        let anchor = topology.cloud_tier.cloud;
        FogServer::new(ServerId(anchor.id), anchor.location, mips, experiment.power)
    });

    let mut world = World::new(experiment, topology, cloud, policy, options)?;
    let mut timeline = Timeline::new();
    for job in &jobs {
        if job.created_ms <= horizon.ms() {
            world.admit(*job)?;
            timeline.schedule(
                job.created_ms,
                EventKind::JobCreated,
                Payload::job(job.id.0),
            )?;
        }
    }
    timeline.schedule(horizon.ms(), EventKind::SimulationEnd, Payload::NONE)?;

    let processed = timeline.run(horizon, |tl, ev| world.handle(tl, ev))?;
    world.finish(horizon.ms())?;

    let World {
        topology,
        store,
        trace,
        ..
    } = world;
    let summary = summarize(
        &store,
        &topology.servers,
        horizon.ms(),
        policy,
        seed,
        replication,
    );
    if options.audit {
        audit_summary(&summary, store.records())?;
    }
    Ok(RunOutput {
        summary,
        records: store.into_records(),
        servers: topology.servers,
        trace,
        events_processed: processed,
    })
}

fn audit_summary(summary: &RunSummary, records: &[JobRecord]) -> Result<(), SimError> {
    if summary.n_created != summary.n_completed + summary.n_unfinished + summary.n_infeasible {
        return Err(SimError::Invariant("job accounting identity broken".into()));
    }
    for r in records.iter().filter(|r| r.is_completed()) {
        let (resp, proc, svc) = (
            r.response_time_ms().unwrap_or_default(),
            r.processing_ms().unwrap_or_default(),
            r.service_ms().unwrap_or_default(),
        );
        if !(resp >= proc && proc >= svc && svc > 0.0) {
            return Err(SimError::Invariant(format!(
                "job {}: response {resp} / processing {proc} / service {svc} out of order",
                r.job.id
            )));
        }
    }
    Ok(())
}

struct JobState {
    job: Job,
    device_location: Location,
    /// Server booked by a redirect, and the committed timing.
    redirect: Option<RedirectPlan>,
}

struct World<'a> {
    experiment: &'a Experiment,
    policy: PolicyKind,
    options: RunOptions,
    topology: Topology,
    cloud: Option<FogServer>,
    server_index: HashMap<ServerId, usize>,
    jobs: Vec<JobState>,
    job_index: HashMap<JobId, usize>,
    store: JobStore,
    trace: Option<Vec<String>>,
}

impl<'a> World<'a> {
    fn new(
        experiment: &'a Experiment,
        topology: Topology,
        cloud: Option<FogServer>,
        policy: PolicyKind,
        options: RunOptions,
    ) -> Result<Self, SimError> {
        let server_index = topology
            .servers
            .iter()
            .enumerate()
            .map(|(i, s)| (s.id, i))
            .collect();
        Ok(World {
            experiment,
            policy,
            options,
            topology,
            cloud,
            server_index,
            jobs: Vec::new(),
            job_index: HashMap::new(),
            store: JobStore::new(),
            trace: options.trace.then(Vec::new),
        })
    }

    fn admit(&mut self, job: Job) -> Result<(), SimError> {
        let device = self
            .topology
            .device_index(job.device)
            .map(|i| &self.topology.devices[i])
            .ok_or(SimError::UnknownDevice {
                job: job.id,
                device: job.device,
            })?;
        let home = device
            .home_server
            .expect("devices are homed at construction");
        let device_location = device.location;
        if self.job_index.insert(job.id, self.jobs.len()).is_some() {
            return Err(SimError::DuplicateJob(job.id));
        }
        self.jobs.push(JobState {
            job,
            device_location,
            redirect: None,
        });
        self.store.register(job, home);
        Ok(())
    }

    fn job(&self, payload: &Payload) -> Result<usize, SimError> {
        let id = JobId(payload.job.ok_or(SimError::MissingPayload("job"))?);
        self.job_index
            .get(&id)
            .copied()
            .ok_or(SimError::UnknownJob(id))
    }

    fn server_id(payload: &Payload) -> Result<ServerId, SimError> {
        Ok(ServerId(
            payload.server.ok_or(SimError::MissingPayload("server"))?,
        ))
    }

    fn server(&self, id: ServerId) -> Result<&FogServer, SimError> {
        if let Some(&i) = self.server_index.get(&id) {
            return Ok(&self.topology.servers[i]);
        }
        self.cloud
            .as_ref()
            .filter(|c| c.id == id)
            .ok_or(SimError::UnknownServer(id))
    }

    fn server_mut(&mut self, id: ServerId) -> Result<&mut FogServer, SimError> {
        if let Some(&i) = self.server_index.get(&id) {
            return Ok(&mut self.topology.servers[i]);
        }
        self.cloud
            .as_mut()
            .filter(|c| c.id == id)
            .ok_or(SimError::UnknownServer(id))
    }

    /// Re-integrates energy on `id` after a reservation or queue change.
    /// The cloud is not part of the metered fleet.
    fn touch(&mut self, id: ServerId, now: f64) -> Result<(), SimError> {
        if let Some(&i) = self.server_index.get(&id) {
            let server = &mut self.topology.servers[i];
            let u = power_utilization(server);
            let params = server.power;
            server.energy.on_utilization_change(&params, now, u)?;
            server.note_utilization(u);
        }
        Ok(())
    }

    fn record(&mut self, job: JobId, stage: Stage, at_ms: f64) -> Result<(), SimError> {
        Ok(self.store.record(LifecycleEvent { job, stage, at_ms })?)
    }

    fn handle(&mut self, tl: &mut Timeline, ev: &Event) -> Result<(), SimError> {
        if let Some(trace) = self.trace.as_mut() {
            trace.push(ev.trace_line());
        }
        let now = tl.now().ms();
        match ev.kind {
            EventKind::JobCreated => self.on_created(tl, ev, now)?,
            EventKind::JobArrivedAtServer => self.on_arrival(tl, ev, now)?,
            EventKind::RedirectDispatched => {
                let j = self.job(&ev.payload)?;
                let plan = self.jobs[j].redirect.ok_or_else(|| {
                    SimError::Invariant("dispatch without a redirect plan".into())
                })?;
                tl.schedule(
                    plan.arrival_at,
                    EventKind::JobArrivedAtServer,
                    Payload::job_at(self.jobs[j].job.id.0, plan.to.0),
                )?;
            }
            EventKind::ServiceStart => self.on_service_start(tl, ev, now)?,
            EventKind::ServiceCompletion => self.on_completion(tl, ev, now)?,
            EventKind::ResponseDelivered => {
                let j = self.job(&ev.payload)?;
                self.record(self.jobs[j].job.id, Stage::Response, now)?;
            }
            EventKind::SimulationEnd => {}
        }
        if self.options.audit {
            self.audit()?;
        }
        Ok(())
    }

    fn on_created(&mut self, tl: &mut Timeline, ev: &Event, now: f64) -> Result<(), SimError> {
        let j = self.job(&ev.payload)?;
        let id = self.jobs[j].job.id;
        self.record(id, Stage::Created, now)?;
        let home = self.store.get(id)?.home_server;
        let delay = propagation_delay(
            self.jobs[j].device_location,
            self.server(home)?.location,
            &self.topology.link,
        );
        self.store.get_mut(id)?.propagation_ms += delay;
        tl.schedule_in(
            delay,
            EventKind::JobArrivedAtServer,
            Payload::job_at(id.0, home.0),
        )?;
        Ok(())
    }

    fn on_arrival(&mut self, tl: &mut Timeline, ev: &Event, now: f64) -> Result<(), SimError> {
        let j = self.job(&ev.payload)?;
        let at = Self::server_id(&ev.payload)?;
        let job = self.jobs[j].job;

        if self.jobs[j].redirect.is_some_and(|p| p.to == at) {
            // Booked when the redirect was decided.
            self.record(job.id, Stage::Arrived, now)?;
            tl.schedule(
                now,
                EventKind::ServiceStart,
                Payload::job_at(job.id.0, at.0),
            )?;
            return Ok(());
        }

        let view = ControllerView::capture(
            &self.topology.servers,
            self.cloud.as_ref(),
            self.experiment.decision_latency_ms,
        );
        let action = match decide_arrival(&view, &job, at, self.policy) {
            Ok(action) => action,
            Err(PolicyError::UnservableJob { .. }) => {
                self.store.get_mut(job.id)?.infeasible = true;
                return Ok(());
            }
            Err(e) => return Err(e.into()),
        };
        match action {
            PolicyAction::ServeNow(s) => {
                if !self
                    .server_mut(s)?
                    .reserve(job.id, job.class.required_mips)?
                {
                    return Err(SimError::Invariant(format!(
                        "server {s} refused job {} after the controller admitted it",
                        job.id
                    )));
                }
                self.record(job.id, Stage::Arrived, now)?;
                tl.schedule(now, EventKind::ServiceStart, Payload::job_at(job.id.0, s.0))?;
            }
            PolicyAction::Enqueue(s) => {
                self.server_mut(s)?.enqueue(QueuedJob {
                    job: job.id,
                    required_mips: job.class.required_mips,
                });
                self.record(job.id, Stage::Arrived, now)?;
                self.touch(s, now)?;
            }
            PolicyAction::Redirect { from, to } => {
                let from_location = self.server(from)?.location;
                let latency = self.experiment.decision_latency_ms;
                let link = self.topology.link;
                let plan = commit_redirect(
                    self.server_mut(to)?,
                    &job,
                    from_location,
                    now,
                    latency,
                    &link,
                )?;
                self.touch(to, now)?;
                self.jobs[j].redirect = Some(plan);
                let rec = self.store.get_mut(job.id)?;
                rec.redirected = true;
                rec.propagation_ms += plan.hop_propagation_ms;
                tl.schedule(
                    plan.dispatch_at,
                    EventKind::RedirectDispatched,
                    Payload::job_at(job.id.0, to.0),
                )?;
            }
        }
        Ok(())
    }

    fn on_service_start(
        &mut self,
        tl: &mut Timeline,
        ev: &Event,
        now: f64,
    ) -> Result<(), SimError> {
        let j = self.job(&ev.payload)?;
        let s = Self::server_id(&ev.payload)?;
        let job = self.jobs[j].job;
        self.server_mut(s)?.begin_service(job.id)?;
        self.touch(s, now)?;
        self.record(job.id, Stage::ServiceStart, now)?;
        self.store.get_mut(job.id)?.served_by = Some(s);
        tl.schedule_in(
            job.class.service_ms(),
            EventKind::ServiceCompletion,
            Payload::job_at(job.id.0, s.0),
        )?;
        Ok(())
    }

    fn on_completion(&mut self, tl: &mut Timeline, ev: &Event, now: f64) -> Result<(), SimError> {
        let j = self.job(&ev.payload)?;
        let s = Self::server_id(&ev.payload)?;
        let job = self.jobs[j].job;
        self.server_mut(s)?.release(job.id)?;
        self.record(job.id, Stage::Completed, now)?;

        let back = propagation_delay(
            self.server(s)?.location,
            self.jobs[j].device_location,
            &self.topology.link,
        );
        self.store.get_mut(job.id)?.propagation_ms += back;
        tl.schedule_in(
            back,
            EventKind::ResponseDelivered,
            Payload::job_at(job.id.0, s.0),
        )?;

        for started in dispatch_queue(self.server_mut(s)?)? {
            tl.schedule(
                now,
                EventKind::ServiceStart,
                Payload::job_at(started.0, s.0),
            )?;
        }
        self.touch(s, now)?;
        Ok(())
    }

    fn audit(&self) -> Result<(), SimError> {
        for s in self.topology.servers.iter().chain(self.cloud.as_ref()) {
            s.check_conservation().map_err(SimError::Invariant)?;
        }
        Ok(())
    }

    /// Closes every energy account at the horizon.
    fn finish(&mut self, horizon_ms: f64) -> Result<(), SimError> {
        let ids: Vec<ServerId> = self.topology.servers.iter().map(|s| s.id).collect();
        for id in ids {
            self.touch(id, horizon_ms)?;
        }
        if self.options.audit {
            for s in &self.topology.servers {
                let replay = s
                    .energy
                    .replay_energy(&s.power)
                    .unwrap_or(s.energy.energy_j);
                let tol = 1e-9 * s.energy.energy_j.abs().max(1.0);
                if (replay - s.energy.energy_j).abs() > tol {
                    return Err(SimError::Invariant(format!(
                        "server {}: energy {} differs from interval replay {}",
                        s.id, s.energy.energy_j, replay
                    )));
                }
            }
            for r in self.store.records() {
                if !r.timestamps_monotone() {
                    return Err(SimError::Invariant(format!(
                        "job {} has non-monotone timestamps",
                        r.job.id
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Devices that a topology source declares, for CSV workload validation.
pub fn declared_devices(source: &TopologySource) -> BTreeSet<DeviceId> {
    source.device_ids().into_iter().collect()
}
