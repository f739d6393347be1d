#![allow(dead_code)]

use std::path::PathBuf;

use fogsim::config::{self, ExperimentConfig};
use fogsim::fog::{DeviceId, JobId, LinkParams, Location, ServerId};
use fogsim::sim::{DeviceSpec, Experiment, ServerSpec, TopologySource, WorkloadSource};
use fogsim::workload::{ClassName, Job, JobClass};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

pub fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

pub fn preset(name: &str) -> ExperimentConfig {
    let path = configs_dir().join(name);
    config::validate(&path).unwrap_or_else(|issues| {
        panic!("{}: {issues:?}", path.display());
    })
}

pub fn job(id: u64, device: u32, created_ms: f64, length_mi: f64, required_mips: f64) -> Job {
    Job {
        id: JobId(id),
        device: DeviceId(device),
        class: JobClass {
            name: ClassName::Thin,
            length_mi,
            required_mips,
            payload_bytes: 10_000,
        },
        created_ms,
    }
}

/// F1 at the origin, F2 ten units north, one device one unit from F1 and
/// two whole-server jobs created together.
pub fn s1() -> Experiment {
    let topology = TopologySource::Explicit {
        servers: vec![
            ServerSpec {
                id: ServerId(1),
                location: Location::new(0.0, 0.0),
                capacity_mips: 1000.0,
            },
            ServerSpec {
                id: ServerId(2),
                location: Location::new(0.0, 10.0),
                capacity_mips: 1000.0,
            },
        ],
        devices: vec![DeviceSpec {
            id: DeviceId(3),
            location: Location::new(0.0, 1.0),
        }],
    };
    let jobs = vec![job(1, 3, 0.0, 500.0, 1000.0), job(2, 3, 0.0, 500.0, 1000.0)];
    Experiment::new(topology, WorkloadSource::Fixed(jobs), 5_000.0)
}

/// One 1000-MIPS server, one co-located device, zero link delay. Every job
/// needs the whole server, so it behaves as a single FIFO server.
pub fn mm1(lambda_per_s: f64, mu_per_s: f64, n_jobs: usize, seed: u64) -> Experiment {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gaps = Exp::new(lambda_per_s / 1000.0).unwrap();
    let lengths = Exp::new(1.0 / (1000.0 / mu_per_s)).unwrap();
    let mut t = 0.0;
    let jobs: Vec<Job> = (0..n_jobs as u64)
        .map(|i| {
            t += gaps.sample(&mut rng);
            // 1000 MIPS required, so length in MI equals service time in ms
            let length_mi: f64 = lengths.sample(&mut rng);
            job(i, 2, t, length_mi.max(1e-9), 1000.0)
        })
        .collect();
    let horizon = t * 2.0 + 1e6;
    let topology = TopologySource::Explicit {
        servers: vec![ServerSpec {
            id: ServerId(1),
            location: Location::new(0.0, 0.0),
            capacity_mips: 1000.0,
        }],
        devices: vec![DeviceSpec {
            id: DeviceId(2),
            location: Location::new(0.0, 0.0),
        }],
    };
    let mut exp = Experiment::new(topology, WorkloadSource::Fixed(jobs), horizon);
    exp.link = LinkParams {
        base_delay_ms: 0.0,
        per_unit_delay_ms: 0.0,
    };
    exp
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}
