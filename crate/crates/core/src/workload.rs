//! Job classes, seeded synthetic arrivals, random placement and CSV ingestion.

use std::collections::{BTreeSet, HashSet};
use std::f64::consts::TAU;
use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use thiserror::Error;

use crate::fog::{DeviceId, JobId, Location};

/// Header of the workload CSV.
pub const CSV_HEADER: [&str; 7] = [
    "job_id",
    "device_id",
    "created_ms",
    "class",
    "length_mi",
    "required_mips",
    "payload_bytes",
];

// The placement stream sits above every possible device id.
const PLACEMENT_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ClassName {
    Thick,
    Thin,
}

impl fmt::Display for ClassName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClassName::Thick => "thick",
            ClassName::Thin => "thin",
        })
    }
}

impl FromStr for ClassName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "thick" => Ok(ClassName::Thick),
            "thin" => Ok(ClassName::Thin),
            other => Err(format!("unknown job class `{other}` (thick|thin)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JobClass {
    pub name: ClassName,
    pub length_mi: f64,
    pub required_mips: f64,
    pub payload_bytes: u64,
}

impl JobClass {
    pub const fn default_thick() -> Self {
        JobClass {
            name: ClassName::Thick,
            length_mi: 2000.0,
            required_mips: 500.0,
            payload_bytes: 2_000_000,
        }
    }

    pub const fn default_thin() -> Self {
        JobClass {
            name: ClassName::Thin,
            length_mi: 100.0,
            required_mips: 100.0,
            payload_bytes: 10_000,
        }
    }

    /// Service time at the reserved rate, in ms.
    pub fn service_ms(&self) -> f64 {
        self.length_mi / self.required_mips * 1000.0
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.length_mi > 0.0 && self.length_mi.is_finite()) {
            return Err(format!(
                "length_mi must be positive, got {}",
                self.length_mi
            ));
        }
        if !(self.required_mips > 0.0 && self.required_mips.is_finite()) {
            return Err(format!(
                "required_mips must be positive, got {}",
                self.required_mips
            ));
        }
        Ok(())
    }
}

/// One IoT request.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Job {
    pub id: JobId,
    pub device: DeviceId,
    pub class: JobClass,
    pub created_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorkloadSpec {
    /// Poisson arrival rate per device, jobs per second.
    pub rate_per_s: f64,
    pub p_thick: f64,
    /// Jobs are created in `[0, horizon_ms)`.
    pub horizon_ms: f64,
    pub seed: u64,
    pub thick: JobClass,
    pub thin: JobClass,
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        WorkloadSpec {
            rate_per_s: 0.1,
            p_thick: 0.3,
            horizon_ms: 600_000.0,
            seed: 0,
            thick: JobClass::default_thick(),
            thin: JobClass::default_thin(),
        }
    }
}

impl WorkloadSpec {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.rate_per_s >= 0.0 && self.rate_per_s.is_finite()) {
            return Err(format!(
                "rate must be non-negative, got {}",
                self.rate_per_s
            ));
        }
        if !(0.0..=1.0).contains(&self.p_thick) {
            return Err(format!("p_thick must be in [0, 1], got {}", self.p_thick));
        }
        if !(self.horizon_ms >= 0.0 && self.horizon_ms.is_finite()) {
            return Err(format!(
                "horizon must be non-negative, got {}",
                self.horizon_ms
            ));
        }
        self.thick.validate()?;
        self.thin.validate()
    }
}

/// Independent generator for one device's arrivals.
pub fn device_stream(seed: u64, device: DeviceId) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(device.0 as u64);
    rng
}

/// Poisson arrivals per device, merged and ordered by
/// `(created_ms, device, per-device index)`. Job ids are assigned in that
/// order starting at 0.
pub fn generate(spec: &WorkloadSpec, devices: &[DeviceId]) -> Vec<Job> {
    let mut drafts: Vec<(f64, DeviceId, usize, JobClass)> = Vec::new();
    if spec.rate_per_s > 0.0 {
        let gap = Exp::new(spec.rate_per_s / 1000.0).expect("positive rate");
        for &device in devices {
            let mut rng = device_stream(spec.seed, device);
            let mut t = 0.0;
            let mut index = 0;
            loop {
                t += gap.sample(&mut rng);
                if t >= spec.horizon_ms {
                    break;
                }
                let class = if rng.random::<f64>() < spec.p_thick {
                    spec.thick
                } else {
                    spec.thin
                };
                drafts.push((t, device, index, class));
                index += 1;
            }
        }
    }
    drafts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    drafts
        .into_iter()
        .enumerate()
        .map(|(i, (created_ms, device, _, class))| Job {
            id: JobId(i as u64),
            device,
            class,
            created_ms,
        })
        .collect()
}

/// Axis-aligned placement rectangle `[0, width] x [0, height]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub width: f64,
    pub height: f64,
}

impl Default for Region {
    fn default() -> Self {
        Region {
            width: 100.0,
            height: 100.0,
        }
    }
}

impl Region {
    fn sample(&self, rng: &mut impl Rng) -> Location {
        Location::new(
            rng.random::<f64>() * self.width,
            rng.random::<f64>() * self.height,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scenario {
    Uniform,
    /// `hot_fraction` of the devices sit uniformly inside a disc of
    /// `hot_radius` around the first server.
    Hotspot {
        hot_fraction: f64,
        hot_radius: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Placement {
    pub servers: Vec<Location>,
    pub devices: Vec<Location>,
}

pub fn place_randomly(
    scenario: Scenario,
    n_servers: usize,
    n_devices: usize,
    region: Region,
    seed: u64,
) -> Placement {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(PLACEMENT_STREAM);
    let servers: Vec<Location> = (0..n_servers).map(|_| region.sample(&mut rng)).collect();
    let n_hot = match scenario {
        Scenario::Uniform => 0,
        Scenario::Hotspot { hot_fraction, .. } => {
            ((hot_fraction * n_devices as f64).round() as usize).min(n_devices)
        }
    };
    let devices = (0..n_devices)
        .map(|i| match scenario {
            Scenario::Hotspot { hot_radius, .. } if i < n_hot => {
                let centre = servers[0];
                let r = hot_radius * rng.random::<f64>().sqrt();
                let theta = TAU * rng.random::<f64>();
                Location::new(centre.x + r * theta.cos(), centre.y + r * theta.sin())
            }
            _ => region.sample(&mut rng),
        })
        .collect();
    Placement { servers, devices }
}

#[derive(Debug, Error)]
pub enum WorkloadError {
    #[error("cannot read workload file: {0}")]
    Io(#[from] std::io::Error),
    #[error("workload header must be `{}`, found `{found}`", CSV_HEADER.join(","))]
    BadHeader { found: String },
    #[error("line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("line {line}: device {device} is not declared in the topology")]
    UnknownDevice { line: u64, device: DeviceId },
}

/// Jobs read from a workload file together with the devices they name.
#[derive(Debug, Clone, PartialEq)]
pub struct IngestedWorkload {
    pub jobs: Vec<Job>,
    pub devices: BTreeSet<DeviceId>,
}

pub fn ingest_csv(
    path: &Path,
    known_devices: Option<&BTreeSet<DeviceId>>,
) -> Result<IngestedWorkload, WorkloadError> {
    let file = std::fs::File::open(path)?;
    parse_csv(file, known_devices)
}

/// Parses workload rows; rows are sorted by `(created_ms, device_id)` with
/// file order breaking the remaining ties.
pub fn parse_csv<R: Read>(
    reader: R,
    known_devices: Option<&BTreeSet<DeviceId>>,
) -> Result<IngestedWorkload, WorkloadError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers().map_err(|e| WorkloadError::MalformedRow {
        line: 1,
        reason: e.to_string(),
    })?;
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(WorkloadError::BadHeader {
            found: header.iter().collect::<Vec<_>>().join(","),
        });
    }

    let mut rows = Vec::new();
    let mut seen_ids = HashSet::new();
    let mut devices = BTreeSet::new();
    for (index, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| WorkloadError::MalformedRow {
            line: e.position().map_or(index as u64 + 2, |p| p.line()),
            reason: e.to_string(),
        })?;
        let line = record.position().map_or(index as u64 + 2, |p| p.line());
        let bad = |reason: String| WorkloadError::MalformedRow { line, reason };
        let field = |i: usize| record.get(i).unwrap_or_default();
        let num = |i: usize| -> Result<f64, WorkloadError> {
            let v: f64 = field(i)
                .parse()
                .map_err(|_| bad(format!("{} `{}` is not a number", CSV_HEADER[i], field(i))))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(bad(format!("{} must be finite", CSV_HEADER[i])))
            }
        };

        let id: u64 = field(0)
            .parse()
            .map_err(|_| bad(format!("job_id `{}` is not an unsigned integer", field(0))))?;
        let device: u32 = field(1).parse().map_err(|_| {
            bad(format!(
                "device_id `{}` is not an unsigned integer",
                field(1)
            ))
        })?;
        let created_ms = num(2)?;
        if created_ms < 0.0 {
            return Err(bad(format!(
                "created_ms must be non-negative, got {created_ms}"
            )));
        }
        let name: ClassName = field(3).parse().map_err(bad)?;
        let class = JobClass {
            name,
            length_mi: num(4)?,
            required_mips: num(5)?,
            payload_bytes: field(6).parse().map_err(|_| {
                bad(format!(
                    "payload_bytes `{}` is not an unsigned integer",
                    field(6)
                ))
            })?,
        };
        class.validate().map_err(bad)?;
        if !seen_ids.insert(id) {
            return Err(bad(format!("duplicate job_id {id}")));
        }
        let device = DeviceId(device);
        if let Some(known) = known_devices {
            if !known.contains(&device) {
                return Err(WorkloadError::UnknownDevice { line, device });
            }
        }
        devices.insert(device);
        rows.push((
            index,
            Job {
                id: JobId(id),
                device,
                class,
                created_ms,
            },
        ));
    }
    rows.sort_by(|(ia, a), (ib, b)| {
        a.created_ms
            .total_cmp(&b.created_ms)
            .then(a.device.cmp(&b.device))
            .then(ia.cmp(ib))
    });
    Ok(IngestedWorkload {
        jobs: rows.into_iter().map(|(_, j)| j).collect(),
        devices,
    })
}
