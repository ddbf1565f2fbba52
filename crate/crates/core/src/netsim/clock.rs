//! Deterministic virtual clock with a pending-event queue.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::SimTime;

/// An event popped from the queue together with its scheduling metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Scheduled<E> {
    pub time: SimTime,
    pub seq: u64,
    pub event: E,
}

struct Entry<E>(Scheduled<E>);

impl<E> PartialEq for Entry<E> {
    fn eq(&self, other: &Self) -> bool {
        self.0.time == other.0.time && self.0.seq == other.0.seq
    }
}

impl<E> Eq for Entry<E> {}

impl<E> PartialOrd for Entry<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

// Reversed: BinaryHeap is a max-heap, we want earliest (time, seq) first.
impl<E> Ord for Entry<E> {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .0
            .time
            .cmp(&self.0.time)
            .then_with(|| other.0.seq.cmp(&self.0.seq))
    }
}

/// Virtual time never decreases. Events with equal time pop in scheduling
/// order.
pub struct VirtualClock<E> {
    now: SimTime,
    next_seq: u64,
    queue: BinaryHeap<Entry<E>>,
}

impl<E> Default for VirtualClock<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> VirtualClock<E> {
    pub fn new() -> Self {
        Self {
            now: SimTime::ZERO,
            next_seq: 0,
            queue: BinaryHeap::new(),
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    pub fn is_idle(&self) -> bool {
        self.queue.is_empty()
    }

    pub fn peek_time(&self) -> Option<SimTime> {
        self.queue.peek().map(|e| e.0.time)
    }

    /// Schedules `event` at absolute time `at`. Times in the past are
    /// rejected.
    pub fn schedule_at(&mut self, at: SimTime, event: E) -> Result<u64, SimTime> {
        if at < self.now {
            return Err(self.now);
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.push(Entry(Scheduled {
            time: at,
            seq,
            event,
        }));
        Ok(seq)
    }

    pub fn schedule_in(&mut self, delay: SimTime, event: E) -> u64 {
        let at = self.now + delay;
        self.schedule_at(at, event)
            .expect("now + delay is never in the past")
    }

    /// Pops the earliest event. The clock moves to the event time unless a
    /// subscriber already advanced past it, in which case the event is
    /// handled late at the current time.
    pub fn pop(&mut self) -> Option<Scheduled<E>> {
        let Entry(item) = self.queue.pop()?;
        if item.time > self.now {
            self.now = item.time;
        }
        Some(item)
    }

    /// Moves the clock forward to `t` (busy time). Moving backwards is a no-op
    /// and returns false.
    pub fn advance_to(&mut self, t: SimTime) -> bool {
        if t < self.now {
            return false;
        }
        self.now = t;
        true
    }
}
