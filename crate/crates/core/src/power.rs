//! Utilization-driven server power and piecewise-constant energy accounting.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::fog::FogServer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PowerCurve {
    #[default]
    Linear,
    Quadratic,
}

impl FromStr for PowerCurve {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "linear" => Ok(PowerCurve::Linear),
            "quadratic" => Ok(PowerCurve::Quadratic),
            other => Err(format!("unknown power curve `{other}` (linear|quadratic)")),
        }
    }
}

impl fmt::Display for PowerCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PowerCurve::Linear => "linear",
            PowerCurve::Quadratic => "quadratic",
        })
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum PowerError {
    #[error("power parameters need max_w >= idle_w >= 0 (idle {idle_w}, max {max_w})")]
    InvalidParams { idle_w: f64, max_w: f64 },
    #[error("queue overhead must be non-negative, got {0}")]
    NegativeOverhead(f64),
    #[error("energy update at {at} ms precedes last change at {last} ms")]
    TimeRegression { at: f64, last: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerParams {
    pub idle_w: f64,
    pub max_w: f64,
    pub curve: PowerCurve,
    /// MIPS charged to power accounting for each waiting job. Never slows
    /// service down.
    pub queue_overhead_mips_per_job: f64,
}

impl Default for PowerParams {
    fn default() -> Self {
        PowerParams {
            idle_w: 100.0,
            max_w: 250.0,
            curve: PowerCurve::Linear,
            queue_overhead_mips_per_job: 0.0,
        }
    }
}

impl PowerParams {
    pub fn new(
        idle_w: f64,
        max_w: f64,
        curve: PowerCurve,
        queue_overhead_mips_per_job: f64,
    ) -> Result<Self, PowerError> {
        let params = PowerParams {
            idle_w,
            max_w,
            curve,
            queue_overhead_mips_per_job,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), PowerError> {
        if !(self.idle_w >= 0.0 && self.max_w >= self.idle_w && self.max_w.is_finite()) {
            return Err(PowerError::InvalidParams {
                idle_w: self.idle_w,
                max_w: self.max_w,
            });
        }
        if self.queue_overhead_mips_per_job.is_nan() || self.queue_overhead_mips_per_job < 0.0 {
            return Err(PowerError::NegativeOverhead(
                self.queue_overhead_mips_per_job,
            ));
        }
        Ok(())
    }
}

/// Watts drawn at utilization `u`.
pub fn instantaneous_power(params: &PowerParams, u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    let shape = match params.curve {
        PowerCurve::Linear => u,
        PowerCurve::Quadratic => u * u,
    };
    params.idle_w + (params.max_w - params.idle_w) * shape
}

/// Utilization that drives power: MIPS in service plus the per-queued-job
/// overhead, over capacity, capped at 1. Bookings made for jobs still in
/// transit do not draw power.
pub fn power_utilization(server: &FogServer) -> f64 {
    let overhead = server.power.queue_overhead_mips_per_job * server.queue_len() as f64;
    ((server.executing_mips() + overhead) / server.capacity_mips).clamp(0.0, 1.0)
}

/// One constant-utilization stretch of an energy account.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerInterval {
    pub start_ms: f64,
    pub end_ms: f64,
    pub utilization: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EnergyAccount {
    pub energy_j: f64,
    pub last_change_at: f64,
    pub last_utilization: f64,
    intervals: Option<Vec<PowerInterval>>,
}

impl EnergyAccount {
    /// An account that also keeps every closed interval for auditing.
    pub fn recording() -> Self {
        EnergyAccount {
            intervals: Some(Vec::new()),
            ..Default::default()
        }
    }

    pub fn intervals(&self) -> Option<&[PowerInterval]> {
        self.intervals.as_deref()
    }

    /// Closes the interval that ends at `t_ms` and opens a new one at `new_u`.
    pub fn on_utilization_change(
        &mut self,
        params: &PowerParams,
        t_ms: f64,
        new_u: f64,
    ) -> Result<(), PowerError> {
        if t_ms < self.last_change_at {
            return Err(PowerError::TimeRegression {
                at: t_ms,
                last: self.last_change_at,
            });
        }
        let dt = t_ms - self.last_change_at;
        if dt > 0.0 {
            self.energy_j += instantaneous_power(params, self.last_utilization) * dt / 1000.0;
            if let Some(iv) = self.intervals.as_mut() {
                iv.push(PowerInterval {
                    start_ms: self.last_change_at,
                    end_ms: t_ms,
                    utilization: self.last_utilization,
                });
            }
        }
        self.last_change_at = t_ms;
        self.last_utilization = new_u;
        Ok(())
    }

    /// Energy recomputed from the recorded intervals, if recording.
    pub fn replay_energy(&self, params: &PowerParams) -> Option<f64> {
        self.intervals.as_ref().map(|iv| {
            iv.iter()
                .map(|i| {
                    instantaneous_power(params, i.utilization) * (i.end_ms - i.start_ms) / 1000.0
                })
                .sum()
        })
    }
}

/// Mean power over `[0, horizon_ms]`.
pub fn average_power(account: &EnergyAccount, horizon_ms: f64) -> f64 {
    account.energy_j / (horizon_ms / 1000.0)
}

/// Arithmetic mean of per-server average power.
pub fn fleet_average_power(servers: &[FogServer], horizon_ms: f64) -> f64 {
    if servers.is_empty() {
        return 0.0;
    }
    servers
        .iter()
        .map(|s| average_power(&s.energy, horizon_ms))
        .sum::<f64>()
        / servers.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fog::{JobId, Location, QueuedJob, ServerId};
    use proptest::prelude::*;

    fn params(curve: PowerCurve) -> PowerParams {
        PowerParams::new(100.0, 200.0, curve, 0.0).unwrap()
    }

    #[test]
    fn curve_boundaries_and_midpoint() {
        for curve in [PowerCurve::Linear, PowerCurve::Quadratic] {
            assert_eq!(instantaneous_power(&params(curve), 0.0), 100.0);
            assert_eq!(instantaneous_power(&params(curve), 1.0), 200.0);
        }
        assert_eq!(instantaneous_power(&params(PowerCurve::Linear), 0.5), 150.0);
        assert_eq!(
            instantaneous_power(&params(PowerCurve::Quadratic), 0.5),
            125.0
        );
    }

    #[test]
    fn params_validation() {
        assert!(PowerParams::new(200.0, 100.0, PowerCurve::Linear, 0.0).is_err());
        assert!(PowerParams::new(-1.0, 100.0, PowerCurve::Linear, 0.0).is_err());
        assert!(PowerParams::new(0.0, 100.0, PowerCurve::Linear, -2.0).is_err());
    }

    fn loaded_server(executing: f64, queued: usize, overhead: f64) -> FogServer {
        let power = PowerParams::new(100.0, 200.0, PowerCurve::Linear, overhead).unwrap();
        let mut s = FogServer::new(ServerId(1), Location::default(), 1000.0, power);
        s.reserve(JobId(0), executing).unwrap();
        s.begin_service(JobId(0)).unwrap();
        for j in 0..queued {
            s.enqueue(QueuedJob {
                job: JobId(10 + j as u64),
                required_mips: 500.0,
            });
        }
        s
    }

    #[test]
    fn power_utilization_examples() {
        assert_eq!(power_utilization(&loaded_server(500.0, 0, 0.0)), 0.5);
        assert_eq!(power_utilization(&loaded_server(1000.0, 3, 50.0)), 1.0);
        assert_eq!(power_utilization(&loaded_server(800.0, 2, 50.0)), 0.9);
    }

    #[test]
    fn booked_but_idle_draws_nothing() {
        let mut s = FogServer::new(
            ServerId(1),
            Location::default(),
            1000.0,
            params(PowerCurve::Linear),
        );
        s.reserve(JobId(1), 500.0).unwrap();
        assert_eq!(power_utilization(&s), 0.0);
    }

    #[test]
    fn integration_examples() {
        let p = params(PowerCurve::Linear);
        let mut acc = EnergyAccount::default();
        acc.on_utilization_change(&p, 0.0, 0.5).unwrap();
        acc.on_utilization_change(&p, 1000.0, 0.5).unwrap();
        assert_eq!(acc.energy_j, 150.0);
        acc.on_utilization_change(&p, 1000.0, 0.0).unwrap();
        assert_eq!(acc.energy_j, 150.0);
        assert_eq!(
            acc.on_utilization_change(&p, 10.0, 0.0),
            Err(PowerError::TimeRegression {
                at: 10.0,
                last: 1000.0
            })
        );

        let mut idle = EnergyAccount::default();
        idle.on_utilization_change(&p, 10_000.0, 0.0).unwrap();
        assert_eq!(idle.energy_j, 1000.0);
    }

    #[test]
    fn average_power_examples() {
        let p = params(PowerCurve::Linear);
        let acc = EnergyAccount {
            energy_j: 150.0,
            ..Default::default()
        };
        assert_eq!(average_power(&acc, 1000.0), 150.0);

        let mut idle = EnergyAccount::default();
        idle.on_utilization_change(&p, 3700.0, 0.0).unwrap();
        assert!((average_power(&idle, 3700.0) - 100.0).abs() < 1e-9);

        let mut two_phase = EnergyAccount::default();
        two_phase.on_utilization_change(&p, 0.0, 0.5).unwrap();
        two_phase.on_utilization_change(&p, 1000.0, 0.0).unwrap();
        two_phase.on_utilization_change(&p, 2000.0, 0.0).unwrap();
        assert_eq!(average_power(&two_phase, 2000.0), 125.0);
    }

    #[test]
    fn fleet_average_examples() {
        let p = params(PowerCurve::Linear);
        let mut a = FogServer::new(ServerId(1), Location::default(), 1000.0, p);
        let mut b = FogServer::new(ServerId(2), Location::default(), 1000.0, p);
        a.energy.energy_j = 100.0;
        b.energy.energy_j = 150.0;
        assert_eq!(fleet_average_power(&[a.clone(), b], 1000.0), 125.0);
        assert_eq!(fleet_average_power(&[a], 1000.0), 100.0);

        let fleet: Vec<_> = (1..=3)
            .map(|i| {
                let mut s = FogServer::new(ServerId(i), Location::default(), 1000.0, p);
                s.energy.on_utilization_change(&p, 5000.0, 0.0).unwrap();
                s
            })
            .collect();
        assert!((fleet_average_power(&fleet, 5000.0) - 100.0).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn power_monotone_in_u(a in 0.0..=1.0f64, b in 0.0..=1.0f64, quad in any::<bool>()) {
            let p = params(if quad { PowerCurve::Quadratic } else { PowerCurve::Linear });
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(instantaneous_power(&p, lo) <= instantaneous_power(&p, hi));
        }

        #[test]
        fn energy_matches_interval_replay(steps in prop::collection::vec((0.0..500.0f64, 0.0..=1.0f64), 1..60), quad in any::<bool>()) {
            let p = params(if quad { PowerCurve::Quadratic } else { PowerCurve::Linear });
            let mut acc = EnergyAccount::recording();
            let mut t = 0.0;
            let mut prev = 0.0;
            for (dt, u) in steps {
                t += dt;
                acc.on_utilization_change(&p, t, u).unwrap();
                prop_assert!(acc.energy_j >= prev);
                prev = acc.energy_j;
            }
            let replay = acc.replay_energy(&p).unwrap();
            prop_assert!((replay - acc.energy_j).abs() <= 1e-9 * acc.energy_j.max(1.0));
        }
    }
}
