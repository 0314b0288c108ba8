use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::EngineError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    ClientArrivalTick,
    JobArrival { job: u32 },
    NetworkRxComplete { machine: u32, job: u32 },
    StageBatchComplete { instance: u32, invocation: u32 },
    ThreadWakeup { instance: u32 },
    DvfsChange { instance: u32, level: u32 },
    PmDecisionTick,
}

impl EventKind {
    pub fn code(&self) -> u8 {
        match self {
            EventKind::ClientArrivalTick => 0,
            EventKind::JobArrival { .. } => 1,
            EventKind::NetworkRxComplete { .. } => 2,
            EventKind::StageBatchComplete { .. } => 3,
            EventKind::ThreadWakeup { .. } => 4,
            EventKind::DvfsChange { .. } => 5,
            EventKind::PmDecisionTick => 6,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            EventKind::ClientArrivalTick => "client_arrival_tick",
            EventKind::JobArrival { .. } => "job_arrival",
            EventKind::NetworkRxComplete { .. } => "network_rx_complete",
            EventKind::StageBatchComplete { .. } => "stage_batch_complete",
            EventKind::ThreadWakeup { .. } => "thread_wakeup",
            EventKind::DvfsChange { .. } => "dvfs_change",
            EventKind::PmDecisionTick => "pm_decision_tick",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub timestamp_us: f64,
    pub sequence: u64,
    pub kind: EventKind,
}

// BinaryHeap is a max-heap; invert so the earliest (timestamp, sequence) wins.
struct Entry(Event);

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Entry {}
impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .0
            .timestamp_us
            .total_cmp(&self.0.timestamp_us)
            .then(other.0.sequence.cmp(&self.0.sequence))
    }
}

/// Time-ordered event queue with a monotone clock. Ties pop in scheduling order.
#[derive(Default)]
pub struct EventQueue {
    heap: BinaryHeap<Entry>,
    next_seq: u64,
    clock_us: f64,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn clock_us(&self) -> f64 {
        self.clock_us
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn peek_time(&self) -> Option<f64> {
        self.heap.peek().map(|e| e.0.timestamp_us)
    }

    pub fn schedule(&mut self, at_us: f64, kind: EventKind) -> Result<u64, EngineError> {
        if !(at_us >= self.clock_us) {
            return Err(EngineError::Causality {
                at_us,
                clock_us: self.clock_us,
            });
        }
        let sequence = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Entry(Event {
            timestamp_us: at_us,
            sequence,
            kind,
        }));
        Ok(sequence)
    }

    /// Removes the earliest event and advances the clock to it.
    pub fn pop(&mut self) -> Option<Event> {
        let Entry(ev) = self.heap.pop()?;
        assert!(ev.timestamp_us >= self.clock_us, "clock moved backwards");
        self.clock_us = ev.timestamp_us;
        Some(ev)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pops_in_time_then_sequence_order() {
        let mut q = EventQueue::new();
        q.schedule(5.0, EventKind::PmDecisionTick).unwrap();
        q.schedule(1.0, EventKind::ThreadWakeup { instance: 0 }).unwrap();
        q.schedule(1.0, EventKind::ThreadWakeup { instance: 1 }).unwrap();
        q.schedule(0.0, EventKind::ClientArrivalTick).unwrap();
        let order: Vec<_> = std::iter::from_fn(|| q.pop()).map(|e| e.kind).collect();
        assert_eq!(
            order,
            vec![
                EventKind::ClientArrivalTick,
                EventKind::ThreadWakeup { instance: 0 },
                EventKind::ThreadWakeup { instance: 1 },
                EventKind::PmDecisionTick,
            ]
        );
    }

    #[test]
    fn scheduling_at_clock_precedes_later_events() {
        let mut q = EventQueue::new();
        q.schedule(10.0, EventKind::PmDecisionTick).unwrap();
        q.schedule(3.0, EventKind::ClientArrivalTick).unwrap();
        q.pop().unwrap();
        q.schedule(3.0, EventKind::ThreadWakeup { instance: 2 }).unwrap();
        assert_eq!(q.pop().unwrap().kind, EventKind::ThreadWakeup { instance: 2 });
    }

    #[test]
    fn past_event_is_causality_error() {
        let mut q = EventQueue::new();
        q.schedule(4.0, EventKind::ClientArrivalTick).unwrap();
        q.pop();
        assert!(matches!(
            q.schedule(3.0, EventKind::ClientArrivalTick),
            Err(EngineError::Causality { .. })
        ));
        assert!(matches!(
            q.schedule(f64::NAN, EventKind::ClientArrivalTick),
            Err(EngineError::Causality { .. })
        ));
    }
}
