//! Total order over simulation events: (tick, kind priority, insertion sequence).

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use crate::promises::PromiseWire;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Event {
    Warn {
        from: usize,
        to: usize,
        seq: u64,
    },
    Req {
        from: usize,
        to: usize,
    },
    PromiseArrival {
        from: usize,
        to: usize,
        seq: u64,
        wire: PromiseWire,
    },
    Ack {
        from: usize,
        to: usize,
        seq: u64,
    },
    Replan {
        agent: usize,
    },
    Respond {
        agent: usize,
    },
    SelfRequest {
        agent: usize,
        generation: u64,
    },
    ScheduledSend {
        from: usize,
        to: usize,
        generation: u64,
    },
    ReqRetry {
        from: usize,
        to: usize,
        generation: u64,
    },
    Tick,
}

impl Event {
    /// Same-tick ordering: signals, then payloads, then agent reactions, then the tick itself.
    pub fn priority(&self) -> u8 {
        match self {
            Event::Warn { .. } => 0,
            Event::Req { .. } => 1,
            Event::PromiseArrival { .. } | Event::Ack { .. } => 2,
            Event::Replan { .. } => 3,
            Event::Respond { .. } => 4,
            Event::SelfRequest { .. } => 5,
            Event::ScheduledSend { .. } => 6,
            Event::ReqRetry { .. } => 7,
            Event::Tick => 8,
        }
    }
}

#[derive(Debug)]
struct Entry {
    key: (u64, u8, u64),
    event: Event,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.key == other.key
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
        self.key.cmp(&other.key)
    }
}

#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Reverse<Entry>>,
    next_seq: u64,
}

impl EventQueue {
    pub fn push(&mut self, tick: u64, event: Event) {
        let key = (tick, event.priority(), self.next_seq);
        self.next_seq += 1;
        self.heap.push(Reverse(Entry { key, event }));
    }

    pub fn pop(&mut self) -> Option<(u64, Event)> {
        self.heap.pop().map(|Reverse(e)| (e.key.0, e.event))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orders_by_tick_priority_then_insertion() {
        let mut q = EventQueue::default();
        q.push(2, Event::Tick);
        q.push(1, Event::Tick);
        q.push(1, Event::Replan { agent: 0 });
        q.push(
            1,
            Event::Warn {
                from: 0,
                to: 1,
                seq: 0,
            },
        );
        q.push(1, Event::Replan { agent: 1 });
        let order: Vec<_> = std::iter::from_fn(|| q.pop()).collect();
        assert_eq!(
            order,
            vec![
                (
                    1,
                    Event::Warn {
                        from: 0,
                        to: 1,
                        seq: 0
                    }
                ),
                (1, Event::Replan { agent: 0 }),
                (1, Event::Replan { agent: 1 }),
                (1, Event::Tick),
                (2, Event::Tick),
            ]
        );
    }
}
