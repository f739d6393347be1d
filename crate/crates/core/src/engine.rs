//! Discrete-event core: a virtual millisecond clock and a timeline of
//! pending events popped in `(fire_at, seq)` order.
//!
//! Events are never cancelled. A handler that finds an event no longer
//! relevant simply ignores it.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;

use thiserror::Error;

/// A point on the simulated clock, in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct SimTime(f64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0.0);

    /// Rejects NaN, infinities and negative values.
    pub fn new(ms: f64) -> Result<Self, EngineError> {
        if !ms.is_finite() {
            return Err(EngineError::InvalidTime(ms));
        }
        if ms < 0.0 {
            return Err(EngineError::InvalidTime(ms));
        }
        Ok(SimTime(ms))
    }

    pub fn ms(self) -> f64 {
        self.0
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EventKind {
    JobCreated,
    JobArrivedAtServer,
    ServiceStart,
    ServiceCompletion,
    RedirectDispatched,
    ResponseDelivered,
    SimulationEnd,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::JobCreated => "JobCreated",
            EventKind::JobArrivedAtServer => "JobArrivedAtServer",
            EventKind::ServiceStart => "ServiceStart",
            EventKind::ServiceCompletion => "ServiceCompletion",
            EventKind::RedirectDispatched => "RedirectDispatched",
            EventKind::ResponseDelivered => "ResponseDelivered",
            EventKind::SimulationEnd => "SimulationEnd",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Identifiers a handler needs to act on an event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Payload {
    pub job: Option<u64>,
    pub server: Option<u32>,
}

impl Payload {
    pub const NONE: Payload = Payload {
        job: None,
        server: None,
    };

    pub fn job(job: u64) -> Self {
        Payload {
            job: Some(job),
            server: None,
        }
    }

    pub fn job_at(job: u64, server: u32) -> Self {
        Payload {
            job: Some(job),
            server: Some(server),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub fire_at: SimTime,
    pub seq: u64,
    pub kind: EventKind,
    pub payload: Payload,
}

impl Event {
    /// One tab-separated trace line: `fire_at, seq, kind, job, server`.
    /// Missing ids are written as `-`.
    pub fn trace_line(&self) -> String {
        let job = self
            .payload
            .job
            .map_or_else(|| "-".to_string(), |j| j.to_string());
        let server = self
            .payload
            .server
            .map_or_else(|| "-".to_string(), |s| s.to_string());
        format!(
            "{}\t{}\t{}\t{}\t{}",
            self.fire_at, self.seq, self.kind, job, server
        )
    }
}

/// Returned by [`Timeline::schedule`]; unique within one timeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventHandle {
    pub seq: u64,
    pub fire_at: SimTime,
}

#[derive(Debug, Error, PartialEq)]
pub enum EngineError {
    #[error("invalid simulation time {0}")]
    InvalidTime(f64),
    #[error("cannot schedule at {at} ms, clock is already at {clock} ms")]
    SchedulingInPast { at: f64, clock: f64 },
}

/// Failure raised by an event handler, with the event that caused it.
#[derive(Debug, Error)]
#[error("handler failed on {} at {} ms (seq {}): {source}", event.kind, event.fire_at, event.seq)]
pub struct RunError<E: std::error::Error + 'static> {
    pub event: Event,
    #[source]
    pub source: E,
}

#[derive(Debug)]
struct Pending(Event);

impl PartialEq for Pending {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Pending {}

impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Pending {
    // BinaryHeap is a max-heap, so the comparison is reversed.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .0
            .fire_at
            .0
            .total_cmp(&self.0.fire_at.0)
            .then_with(|| other.0.seq.cmp(&self.0.seq))
    }
}

#[derive(Debug, Default)]
pub struct Timeline {
    pending: BinaryHeap<Pending>,
    clock: SimTime,
    next_seq: u64,
}

impl Timeline {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn now(&self) -> SimTime {
        self.clock
    }

    pub fn pending_len(&self) -> usize {
        self.pending.len()
    }

    /// Earliest pending event, if any.
    pub fn peek(&self) -> Option<&Event> {
        self.pending.peek().map(|p| &p.0)
    }

    pub fn schedule(
        &mut self,
        at_ms: f64,
        kind: EventKind,
        payload: Payload,
    ) -> Result<EventHandle, EngineError> {
        if !at_ms.is_finite() {
            return Err(EngineError::InvalidTime(at_ms));
        }
        if at_ms < self.clock.0 {
            return Err(EngineError::SchedulingInPast {
                at: at_ms,
                clock: self.clock.0,
            });
        }
        let fire_at = SimTime(at_ms);
        let seq = self.next_seq;
        self.next_seq += 1;
        self.pending.push(Pending(Event {
            fire_at,
            seq,
            kind,
            payload,
        }));
        Ok(EventHandle { seq, fire_at })
    }

    /// Schedules `delay_ms` after the current clock.
    pub fn schedule_in(
        &mut self,
        delay_ms: f64,
        kind: EventKind,
        payload: Payload,
    ) -> Result<EventHandle, EngineError> {
        self.schedule(self.clock.0 + delay_ms, kind, payload)
    }

    /// Processes every event with `fire_at <= until` and leaves the clock at
    /// `until`. The handler may schedule further events; those that fall
    /// inside the window are processed in the same call.
    pub fn run<F, E>(&mut self, until: SimTime, mut handler: F) -> Result<u64, RunError<E>>
    where
        F: FnMut(&mut Timeline, &Event) -> Result<(), E>,
        E: std::error::Error + 'static,
    {
        let mut processed = 0;
        while let Some(next) = self.pending.peek() {
            if next.0.fire_at.0 > until.0 {
                break;
            }
            let Pending(event) = self.pending.pop().expect("peeked");
            self.clock = event.fire_at;
            handler(self, &event).map_err(|source| RunError { event, source })?;
            processed += 1;
        }
        if until.0 > self.clock.0 {
            self.clock = until;
        }
        Ok(processed)
    }
}
