//! Layered deployment model: cloud and proxy anchors, fog servers with MIPS
//! reservation ledgers and FIFO wait queues, and IoT devices homed on the
//! nearest server.

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::power::{EnergyAccount, PowerParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ServerId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DeviceId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct JobId(pub u64);

impl fmt::Display for ServerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for DeviceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for JobId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A point in the abstract 2-D placement plane.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Location {
    pub x: f64,
    pub y: f64,
}

impl Location {
    pub const fn new(x: f64, y: f64) -> Self {
        Location { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Euclidean distance.
pub fn distance(a: Location, b: Location) -> f64 {
    (a.x - b.x).hypot(a.y - b.y)
}

/// Affine link-delay model: `base_delay_ms + per_unit_delay_ms * distance`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkParams {
    pub base_delay_ms: f64,
    pub per_unit_delay_ms: f64,
}

impl Default for LinkParams {
    fn default() -> Self {
        LinkParams {
            base_delay_ms: 0.5,
            per_unit_delay_ms: 1.0,
        }
    }
}

pub fn propagation_delay(a: Location, b: Location, link: &LinkParams) -> f64 {
    link.base_delay_ms + link.per_unit_delay_ms * distance(a, b)
}

#[derive(Debug, Error, PartialEq)]
pub enum FogError {
    #[error("job {job} already holds a reservation on server {server}")]
    AlreadyReserved { server: ServerId, job: JobId },
    #[error("job {job} holds no reservation on server {server}")]
    NoSuchReservation { server: ServerId, job: JobId },
    #[error("reservation request must be positive, got {0}")]
    NonPositiveRequest(f64),
    #[error("invalid topology: {0}")]
    InvalidTopology(String),
}

/// A queued job and the MIPS it will need once dispatched.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueuedJob {
    pub job: JobId,
    pub required_mips: f64,
}

#[derive(Debug, Clone)]
pub struct FogServer {
    pub id: ServerId,
    pub location: Location,
    pub capacity_mips: f64,
    pub power: PowerParams,
    pub energy: EnergyAccount,
    reserved_mips: f64,
    executing_mips: f64,
    ledger: BTreeMap<JobId, f64>,
    executing: BTreeSet<JobId>,
    wait_queue: VecDeque<QueuedJob>,
    jobs_served: u64,
    peak_utilization: f64,
}

impl FogServer {
    pub fn new(id: ServerId, location: Location, capacity_mips: f64, power: PowerParams) -> Self {
        FogServer {
            id,
            location,
            capacity_mips,
            power,
            energy: EnergyAccount::default(),
            reserved_mips: 0.0,
            executing_mips: 0.0,
            ledger: BTreeMap::new(),
            executing: BTreeSet::new(),
            wait_queue: VecDeque::new(),
            jobs_served: 0,
            peak_utilization: 0.0,
        }
    }

    pub fn reserved_mips(&self) -> f64 {
        self.reserved_mips
    }

    /// MIPS of reserved jobs that have actually started service.
    pub fn executing_mips(&self) -> f64 {
        self.executing_mips
    }

    pub fn free_mips(&self) -> f64 {
        self.capacity_mips - self.reserved_mips
    }

    pub fn queue_len(&self) -> usize {
        self.wait_queue.len()
    }

    pub fn queue(&self) -> impl Iterator<Item = &QueuedJob> {
        self.wait_queue.iter()
    }

    pub fn ledger(&self) -> &BTreeMap<JobId, f64> {
        &self.ledger
    }

    pub fn jobs_served(&self) -> u64 {
        self.jobs_served
    }

    pub fn peak_utilization(&self) -> f64 {
        self.peak_utilization
    }

    /// Books `mips` for `job`. Returns `Ok(false)` without touching state if
    /// the request does not fit.
    pub fn reserve(&mut self, job: JobId, mips: f64) -> Result<bool, FogError> {
        if mips.is_nan() || mips <= 0.0 {
            return Err(FogError::NonPositiveRequest(mips));
        }
        if self.ledger.contains_key(&job) {
            return Err(FogError::AlreadyReserved {
                server: self.id,
                job,
            });
        }
        if self.reserved_mips + mips > self.capacity_mips {
            return Ok(false);
        }
        self.ledger.insert(job, mips);
        self.recompute();
        // Summation order can differ from the pre-check by an ulp.
        if self.reserved_mips > self.capacity_mips {
            self.ledger.remove(&job);
            self.recompute();
            return Ok(false);
        }
        Ok(true)
    }

    /// Drops the reservation of `job` and returns the amount freed.
    pub fn release(&mut self, job: JobId) -> Result<f64, FogError> {
        let freed = self
            .ledger
            .remove(&job)
            .ok_or(FogError::NoSuchReservation {
                server: self.id,
                job,
            })?;
        if self.executing.remove(&job) {
            self.jobs_served += 1;
        }
        self.recompute();
        Ok(freed)
    }

    /// Marks a reserved job as in service.
    pub fn begin_service(&mut self, job: JobId) -> Result<(), FogError> {
        if !self.ledger.contains_key(&job) {
            return Err(FogError::NoSuchReservation {
                server: self.id,
                job,
            });
        }
        self.executing.insert(job);
        self.recompute();
        Ok(())
    }

    pub fn enqueue(&mut self, job: QueuedJob) {
        self.wait_queue.push_back(job);
    }

    pub fn queue_head(&self) -> Option<&QueuedJob> {
        self.wait_queue.front()
    }

    pub fn pop_queue_head(&mut self) -> Option<QueuedJob> {
        self.wait_queue.pop_front()
    }

    /// Reservation share of capacity, with `overhead_per_queued` MIPS charged
    /// for every waiting job, clamped to `[0, 1]`.
    pub fn utilization(&self, overhead_per_queued: f64) -> f64 {
        let load = self.reserved_mips + overhead_per_queued * self.wait_queue.len() as f64;
        (load / self.capacity_mips).clamp(0.0, 1.0)
    }

    pub(crate) fn note_utilization(&mut self, u: f64) {
        if u > self.peak_utilization {
            self.peak_utilization = u;
        }
    }

    // Sums are taken over the ledger so that releasing every job returns the
    // counters to exactly zero.
    fn recompute(&mut self) {
        self.reserved_mips = self.ledger.values().sum();
        self.executing_mips = self.executing.iter().map(|j| self.ledger[j]).sum();
    }

    /// Checks the ledger against the cached counters and capacity.
    pub fn check_conservation(&self) -> Result<(), String> {
        let ledger_sum: f64 = self.ledger.values().sum();
        if ledger_sum != self.reserved_mips {
            return Err(format!(
                "server {}: reserved {} != ledger sum {}",
                self.id, self.reserved_mips, ledger_sum
            ));
        }
        if self.reserved_mips < 0.0 || self.reserved_mips > self.capacity_mips {
            return Err(format!(
                "server {}: reserved {} outside [0, {}]",
                self.id, self.reserved_mips, self.capacity_mips
            ));
        }
        if self.executing_mips > self.reserved_mips {
            return Err(format!(
                "server {}: executing {} exceeds reserved {}",
                self.id, self.executing_mips, self.reserved_mips
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct IoTDevice {
    pub id: DeviceId,
    pub location: Location,
    /// Assigned by [`Topology::associate_devices`].
    pub home_server: Option<ServerId>,
}

impl IoTDevice {
    pub fn new(id: DeviceId, location: Location) -> Self {
        IoTDevice {
            id,
            location,
            home_server: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnchorNode {
    pub id: u32,
    pub location: Location,
}

/// Cloud data center and proxy. Latency anchors only; the cloud can also
/// take overflow when the controller's cloud fallback is switched on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CloudTier {
    pub cloud: AnchorNode,
    pub proxy: AnchorNode,
}

#[derive(Debug, Clone)]
pub struct Topology {
    pub servers: Vec<FogServer>,
    pub devices: Vec<IoTDevice>,
    pub cloud_tier: CloudTier,
    pub link: LinkParams,
}

impl Topology {
    /// Validates the invariants and homes every device.
    pub fn new(
        servers: Vec<FogServer>,
        devices: Vec<IoTDevice>,
        cloud_tier: CloudTier,
        link: LinkParams,
    ) -> Result<Self, FogError> {
        let mut topo = Topology {
            servers,
            devices,
            cloud_tier,
            link,
        };
        topo.validate()?;
        topo.associate_devices();
        Ok(topo)
    }

    fn validate(&self) -> Result<(), FogError> {
        let bad = |msg: String| Err(FogError::InvalidTopology(msg));
        if self.servers.is_empty() {
            return bad("at least one fog server is required".into());
        }
        if self.devices.is_empty() {
            return bad("at least one IoT device is required".into());
        }
        if !(self.link.base_delay_ms >= 0.0 && self.link.per_unit_delay_ms >= 0.0) {
            return bad("link delays must be non-negative".into());
        }
        let mut ids = HashSet::new();
        let all = self
            .servers
            .iter()
            .map(|s| (s.id.0, s.location))
            .chain(self.devices.iter().map(|d| (d.id.0, d.location)))
            .chain([
                (self.cloud_tier.cloud.id, self.cloud_tier.cloud.location),
                (self.cloud_tier.proxy.id, self.cloud_tier.proxy.location),
            ]);
        for (id, loc) in all {
            if !ids.insert(id) {
                return bad(format!("duplicate node id {id}"));
            }
            if !loc.is_finite() {
                return bad(format!("node {id} has a non-finite location"));
            }
        }
        for s in &self.servers {
            if !(s.capacity_mips > 0.0 && s.capacity_mips.is_finite()) {
                return bad(format!("server {} needs a positive capacity", s.id));
            }
        }
        Ok(())
    }

    /// Homes every device on its nearest server, lowest id on ties, and
    /// returns the mapping.
    pub fn associate_devices(&mut self) -> BTreeMap<DeviceId, ServerId> {
        let mut mapping = BTreeMap::new();
        for device in &mut self.devices {
            let home = nearest_server(&self.servers, device.location);
            device.home_server = Some(home);
            mapping.insert(device.id, home);
        }
        mapping
    }

    pub fn server_index(&self, id: ServerId) -> Option<usize> {
        self.servers.iter().position(|s| s.id == id)
    }

    pub fn device_index(&self, id: DeviceId) -> Option<usize> {
        self.devices.iter().position(|d| d.id == id)
    }

    pub fn max_capacity(&self) -> f64 {
        self.servers
            .iter()
            .map(|s| s.capacity_mips)
            .fold(0.0, f64::max)
    }
}

fn nearest_server(servers: &[FogServer], at: Location) -> ServerId {
    servers
        .iter()
        .map(|s| (distance(at, s.location), s.id))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .map(|(_, id)| id)
        .expect("topology has at least one server")
}
