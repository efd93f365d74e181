use std::collections::BTreeMap;

use thiserror::Error;

use super::time::SimTime;

/// Handle to a scheduled event, usable for cancellation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EventHandle {
    at: SimTime,
    seq: u64,
}

impl EventHandle {
    pub fn fire_at(&self) -> SimTime {
        self.at
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ScheduleError {
    #[error("event at {at} is in the past (clock is {now})")]
    InPast { at: SimTime, now: SimTime },
}

/// Time-ordered event queue with a virtual clock.
///
/// Events are totally ordered by `(fire_at, insertion sequence)`, so events
/// scheduled for the same instant pop in the order they were scheduled.
#[derive(Debug)]
pub struct EventQueue<E> {
    now: SimTime,
    next_seq: u64,
    pending: BTreeMap<(SimTime, u64), E>,
    processed: u64,
}

impl<E> Default for EventQueue<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> EventQueue<E> {
    pub fn new() -> Self {
        Self { now: SimTime::ZERO, next_seq: 0, pending: BTreeMap::new(), processed: 0 }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    /// Number of events popped so far.
    pub fn processed(&self) -> u64 {
        self.processed
    }

    pub fn len(&self) -> usize {
        self.pending.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pending.is_empty()
    }

    pub fn schedule(&mut self, at: SimTime, event: E) -> Result<EventHandle, ScheduleError> {
        if at < self.now {
            return Err(ScheduleError::InPast { at, now: self.now });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.pending.insert((at, seq), event);
        Ok(EventHandle { at, seq })
    }

    pub fn schedule_in(&mut self, delay: SimTime, event: E) -> EventHandle {
        let at = self.now + delay;
        self.schedule(at, event).expect("relative schedule is never in the past")
    }

    /// Cancels a pending event, returning it. Cancelling an event that
    /// already fired is a no-op.
    pub fn cancel(&mut self, handle: EventHandle) -> Option<E> {
        self.pending.remove(&(handle.at, handle.seq))
    }

    pub fn peek_time(&self) -> Option<SimTime> {
        self.pending.keys().next().map(|(t, _)| *t)
    }

    /// Pops the next event if it fires at or before `end`, advancing the clock.
    pub fn pop_until(&mut self, end: SimTime) -> Option<(SimTime, E)> {
        let (&(at, _), _) = self.pending.first_key_value()?;
        if at > end {
            return None;
        }
        let ((at, _), event) = self.pending.pop_first()?;
        debug_assert!(at >= self.now);
        self.now = at;
        self.processed += 1;
        Some((at, event))
    }

    /// Moves the clock forward without processing anything.
    pub fn advance_to(&mut self, t: SimTime) {
        if t > self.now {
            self.now = t;
        }
    }

    /// Drives the queue with `handler` until no event remains at or before
    /// `end`. Returns the final clock, which is `end` unless the clock already
    /// passed it.
    pub fn run_until<F>(&mut self, end: SimTime, mut handler: F) -> SimTime
    where
        F: FnMut(&mut Self, SimTime, E),
    {
        while let Some((at, ev)) = self.pop_until(end) {
            handler(self, at, ev);
        }
        self.advance_to(end);
        self.now
    }
}
