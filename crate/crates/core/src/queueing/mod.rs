//! Stage queue disciplines.
//!
//! * `single`: one FIFO.
//! * `epoll`: one FIFO per connection; a dequeue returns the first N jobs of
//!   every active connection.
//! * `socket`: one FIFO per connection; a dequeue returns the first N jobs of
//!   a single ready connection, picked round-robin.

use std::collections::{HashMap, VecDeque};

use thiserror::Error;

use crate::config::QueueType;

/// Connection identity as seen by the receiving instance.
pub type ConnId = u64;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum QueueError {
    #[error("dequeue from an empty queue")]
    EmptyQueue,
    #[error("{0:?} queue needs a connection id")]
    MissingConnection(QueueType),
    #[error("connection {0} is receive-blocked; job parked")]
    BlockedConnection(ConnId),
    #[error("connection {conn} is not blocked by token {token}")]
    WrongUnblocker { conn: ConnId, token: u64 },
}

#[derive(Debug, Clone)]
struct ConnQueues<T> {
    subqueues: HashMap<ConnId, VecDeque<T>>,
    /// Non-empty connections in activation order.
    active: VecDeque<ConnId>,
    len: usize,
}

impl<T> ConnQueues<T> {
    fn new() -> Self {
        ConnQueues {
            subqueues: HashMap::new(),
            active: VecDeque::new(),
            len: 0,
        }
    }

    fn push(&mut self, conn: ConnId, job: T) {
        let q = self.subqueues.entry(conn).or_default();
        if q.is_empty() {
            self.active.push_back(conn);
        }
        q.push_back(job);
        self.len += 1;
    }

    fn take_from(&mut self, conn: ConnId, bound: u32, out: &mut Vec<T>) {
        let q = self.subqueues.get_mut(&conn).expect("active connection has a subqueue");
        let n = q.len().min(bound as usize);
        out.extend(q.drain(..n));
        self.len -= n;
    }

    fn is_conn_empty(&self, conn: ConnId) -> bool {
        self.subqueues.get(&conn).is_none_or(|q| q.is_empty())
    }
}

#[derive(Debug, Clone)]
pub struct SingleQueue<T> {
    fifo: VecDeque<T>,
    bound: Option<u32>,
}

#[derive(Debug, Clone)]
pub struct EpollQueue<T> {
    conns: ConnQueues<T>,
    bound: u32,
}

#[derive(Debug, Clone)]
pub struct SocketQueue<T> {
    conns: ConnQueues<T>,
    bound: u32,
}

#[derive(Debug, Clone)]
pub enum StageQueue<T> {
    Single(SingleQueue<T>),
    Epoll(EpollQueue<T>),
    Socket(SocketQueue<T>),
}

impl<T> StageQueue<T> {
    /// `bound` is the per-connection batch size N (per dequeue for `single`).
    /// Epoll and socket queues without a bound take everything available.
    pub fn new(queue_type: QueueType, bound: Option<u32>) -> Self {
        match queue_type {
            QueueType::Single => StageQueue::Single(SingleQueue {
                fifo: VecDeque::new(),
                bound,
            }),
            QueueType::Epoll => StageQueue::Epoll(EpollQueue {
                conns: ConnQueues::new(),
                bound: bound.unwrap_or(u32::MAX),
            }),
            QueueType::Socket => StageQueue::Socket(SocketQueue {
                conns: ConnQueues::new(),
                bound: bound.unwrap_or(u32::MAX),
            }),
        }
    }

    pub fn queue_type(&self) -> QueueType {
        match self {
            StageQueue::Single(_) => QueueType::Single,
            StageQueue::Epoll(_) => QueueType::Epoll,
            StageQueue::Socket(_) => QueueType::Socket,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            StageQueue::Single(q) => q.fifo.len(),
            StageQueue::Epoll(q) => q.conns.len,
            StageQueue::Socket(q) => q.conns.len,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of connections with queued jobs (1 for a non-empty single queue).
    pub fn active_connections(&self) -> usize {
        match self {
            StageQueue::Single(q) => usize::from(!q.fifo.is_empty()),
            StageQueue::Epoll(q) => q.conns.active.len(),
            StageQueue::Socket(q) => q.conns.active.len(),
        }
    }

    pub fn enqueue(&mut self, job: T, conn: Option<ConnId>) -> Result<(), QueueError> {
        match self {
            StageQueue::Single(q) => q.fifo.push_back(job),
            StageQueue::Epoll(q) => q
                .conns
                .push(conn.ok_or(QueueError::MissingConnection(QueueType::Epoll))?, job),
            StageQueue::Socket(q) => q
                .conns
                .push(conn.ok_or(QueueError::MissingConnection(QueueType::Socket))?, job),
        }
        Ok(())
    }

    pub fn dequeue_batch(&mut self) -> Result<Vec<T>, QueueError> {
        let mut out = Vec::new();
        self.dequeue_batch_into(&mut out)?;
        Ok(out)
    }

    /// Appends one invocation's batch to `out`.
    pub fn dequeue_batch_into(&mut self, out: &mut Vec<T>) -> Result<(), QueueError> {
        if self.is_empty() {
            return Err(QueueError::EmptyQueue);
        }
        match self {
            StageQueue::Single(q) => {
                let n = q.bound.map_or(1, |b| b as usize).min(q.fifo.len());
                out.extend(q.fifo.drain(..n));
            }
            StageQueue::Epoll(q) => {
                let active = std::mem::take(&mut q.conns.active);
                for conn in active {
                    q.conns.take_from(conn, q.bound, out);
                    if !q.conns.is_conn_empty(conn) {
                        q.conns.active.push_back(conn);
                    }
                }
            }
            StageQueue::Socket(q) => {
                let conn = q
                    .conns
                    .active
                    .pop_front()
                    .expect("non-empty queue has an active connection");
                q.conns.take_from(conn, q.bound, out);
                if !q.conns.is_conn_empty(conn) {
                    q.conns.active.push_back(conn);
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct GateSlot<T> {
    blocked_by: Option<u64>,
    parked: VecDeque<T>,
}

/// Receive-side blocking per connection. Jobs arriving on a blocked
/// connection park in arrival order and are released on unblock.
#[derive(Debug, Clone)]
pub struct ConnectionGate<T> {
    slots: HashMap<ConnId, GateSlot<T>>,
}

impl<T> Default for ConnectionGate<T> {
    fn default() -> Self {
        ConnectionGate { slots: HashMap::new() }
    }
}

impl<T> ConnectionGate<T> {
    pub fn is_blocked(&self, conn: ConnId) -> bool {
        self.slots.get(&conn).is_some_and(|s| s.blocked_by.is_some())
    }

    /// Passes the job through, or parks it and reports `BlockedConnection`.
    pub fn offer(&mut self, conn: ConnId, job: T) -> Result<T, QueueError> {
        match self.slots.get_mut(&conn) {
            Some(slot) if slot.blocked_by.is_some() => {
                slot.parked.push_back(job);
                Err(QueueError::BlockedConnection(conn))
            }
            _ => Ok(job),
        }
    }

    /// Blocks `conn` on behalf of `token` (the blocking request's reference).
    pub fn block(&mut self, conn: ConnId, token: u64) {
        let slot = self.slots.entry(conn).or_insert_with(|| GateSlot {
            blocked_by: None,
            parked: VecDeque::new(),
        });
        slot.blocked_by = Some(token);
    }

    pub fn unblock(&mut self, conn: ConnId, token: u64) -> Result<(), QueueError> {
        match self.slots.get_mut(&conn) {
            Some(slot) if slot.blocked_by == Some(token) => {
                slot.blocked_by = None;
                Ok(())
            }
            _ => Err(QueueError::WrongUnblocker { conn, token }),
        }
    }

    /// Next parked job, only while the connection is open.
    pub fn pop_parked(&mut self, conn: ConnId) -> Option<T> {
        let slot = self.slots.get_mut(&conn)?;
        if slot.blocked_by.is_some() {
            return None;
        }
        let job = slot.parked.pop_front();
        if slot.parked.is_empty() {
            self.slots.remove(&conn);
        }
        job
    }

    pub fn parked_len(&self) -> usize {
        self.slots.values().map(|s| s.parked.len()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_is_fifo() {
        let mut q = StageQueue::new(QueueType::Single, None);
        q.enqueue('a', None).unwrap();
        q.enqueue('b', None).unwrap();
        assert_eq!(q.dequeue_batch().unwrap(), vec!['a']);
        assert_eq!(q.dequeue_batch().unwrap(), vec!['b']);
        assert_eq!(q.dequeue_batch(), Err(QueueError::EmptyQueue));
    }

    #[test]
    fn epoll_takes_first_n_of_every_active_connection() {
        let mut q = StageQueue::new(QueueType::Epoll, Some(2));
        for j in ['a', 'b', 'c'] {
            q.enqueue(j, Some(1)).unwrap();
        }
        q.enqueue('d', Some(2)).unwrap();
        assert_eq!(q.active_connections(), 2);
        let mut batch = q.dequeue_batch().unwrap();
        batch.sort();
        assert_eq!(batch, vec!['a', 'b', 'd']);
        assert_eq!(q.dequeue_batch().unwrap(), vec!['c']);
        assert!(q.is_empty());
    }

    #[test]
    fn socket_takes_one_connection_round_robin() {
        let mut q = StageQueue::new(QueueType::Socket, Some(2));
        for j in ['a', 'b', 'c'] {
            q.enqueue(j, Some(1)).unwrap();
        }
        q.enqueue('d', Some(2)).unwrap();
        assert_eq!(q.dequeue_batch().unwrap(), vec!['a', 'b']);
        assert_eq!(q.dequeue_batch().unwrap(), vec!['d']);
        assert_eq!(q.dequeue_batch().unwrap(), vec!['c']);
    }

    #[test]
    fn connection_queues_require_ids() {
        let mut q = StageQueue::new(QueueType::Epoll, Some(1));
        assert_eq!(q.enqueue(1, None), Err(QueueError::MissingConnection(QueueType::Epoll)));
    }

    #[test]
    fn blocked_connection_parks_then_releases() {
        let mut gate = ConnectionGate::default();
        assert_eq!(gate.offer(7, 'a'), Ok('a'));
        gate.block(7, 100);
        assert_eq!(gate.offer(7, 'b'), Err(QueueError::BlockedConnection(7)));
        assert_eq!(gate.offer(8, 'x'), Ok('x'));
        assert_eq!(gate.pop_parked(7), None);
        assert_eq!(
            gate.unblock(7, 99),
            Err(QueueError::WrongUnblocker { conn: 7, token: 99 })
        );
        gate.unblock(7, 100).unwrap();
        assert_eq!(gate.pop_parked(7), Some('b'));
        assert_eq!(gate.parked_len(), 0);
    }
}
