use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::identity::{Envelope, HostUid};

pub const DEFAULT_QUEUE_CAPACITY: usize = 1024;
pub const DEFAULT_HEARTBEAT_INTERVAL_MS: u64 = 15_000;
pub const DEFAULT_LIVENESS_THRESHOLD: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeartbeatConfig {
    pub interval_ms: u64,
    pub liveness_threshold: u32,
}

impl Default for HeartbeatConfig {
    fn default() -> Self {
        Self {
            interval_ms: DEFAULT_HEARTBEAT_INTERVAL_MS,
            liveness_threshold: DEFAULT_LIVENESS_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkStatus {
    Connected,
    Disconnected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LivenessTransition {
    pub host: HostUid,
    pub peer: HostUid,
    pub status: LinkStatus,
    pub at: u64,
}

/// One host's view of its link to a neighbouring host.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkState {
    pub peer: HostUid,
    pub status: LinkStatus,
    pub last_heartbeat_at: u64,
    pub missed_heartbeats: u32,
    pub next_ping_at: u64,
}

impl LinkState {
    pub fn new(peer: HostUid, now: u64, cfg: &HeartbeatConfig) -> Self {
        Self {
            peer,
            status: LinkStatus::Connected,
            last_heartbeat_at: now,
            missed_heartbeats: 0,
            next_ping_at: now + cfg.interval_ms,
        }
    }

    pub fn is_connected(&self) -> bool {
        self.status == LinkStatus::Connected
    }

    /// Account for one heartbeat interval ending at `now`. `answered` is
    /// whether the PING sent for that interval drew a PONG. Returns the new
    /// status if this interval changed it.
    pub fn record_heartbeat(
        &mut self,
        now: u64,
        answered: bool,
        cfg: &HeartbeatConfig,
    ) -> Option<LinkStatus> {
        self.next_ping_at = now + cfg.interval_ms;
        if answered {
            self.missed_heartbeats = 0;
            self.last_heartbeat_at = now;
            if self.status == LinkStatus::Disconnected {
                self.status = LinkStatus::Connected;
                return Some(LinkStatus::Connected);
            }
            return None;
        }
        self.missed_heartbeats = self.missed_heartbeats.saturating_add(1);
        if self.missed_heartbeats >= cfg.liveness_threshold && self.status == LinkStatus::Connected {
            self.status = LinkStatus::Disconnected;
            return Some(LinkStatus::Disconnected);
        }
        None
    }

    pub fn mark_reconnected(&mut self, now: u64) -> bool {
        self.missed_heartbeats = 0;
        self.last_heartbeat_at = now;
        let changed = self.status == LinkStatus::Disconnected;
        self.status = LinkStatus::Connected;
        changed
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("offline queue full ({capacity} envelopes)")]
pub struct QueueFull {
    pub capacity: usize,
}

/// Bounded FIFO of envelopes waiting for a link to come back.
#[derive(Debug, Clone)]
pub struct OfflineQueue {
    items: VecDeque<Envelope>,
    capacity: usize,
}

impl Default for OfflineQueue {
    fn default() -> Self {
        Self::new(DEFAULT_QUEUE_CAPACITY)
    }
}

impl OfflineQueue {
    pub fn new(capacity: usize) -> Self {
        Self {
            items: VecDeque::new(),
            capacity,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// New envelopes are refused at capacity; nothing already queued is dropped.
    pub fn push(&mut self, env: Envelope) -> Result<(), QueueFull> {
        if self.items.len() >= self.capacity {
            return Err(QueueFull {
                capacity: self.capacity,
            });
        }
        self.items.push_back(env);
        Ok(())
    }

    pub fn pop_front(&mut self) -> Option<Envelope> {
        self.items.pop_front()
    }

    /// Put an envelope whose transmission failed back at the head.
    pub fn restore_front(&mut self, env: Envelope) {
        self.items.push_front(env);
    }

    pub fn iter(&self) -> impl Iterator<Item = &Envelope> {
        self.items.iter()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClockMode {
    Simulated,
    Wall,
}

/// Monotone logical milliseconds.
#[derive(Debug, Clone)]
pub struct Clock {
    now: u64,
    mode: ClockMode,
}

impl Clock {
    pub fn simulated(start: u64) -> Self {
        Self {
            now: start,
            mode: ClockMode::Simulated,
        }
    }

    pub fn wall() -> Self {
        let mut c = Self {
            now: 0,
            mode: ClockMode::Wall,
        };
        c.now();
        c
    }

    pub fn mode(&self) -> ClockMode {
        self.mode
    }

    pub fn now(&mut self) -> u64 {
        if self.mode == ClockMode::Wall {
            let wall = std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_millis() as u64)
                .unwrap_or(0);
            self.now = self.now.max(wall);
        }
        self.now
    }

    pub fn peek(&self) -> u64 {
        self.now
    }

    /// Only meaningful for simulated clocks; wall clocks ignore it.
    pub fn advance(&mut self, ms: u64) -> u64 {
        if self.mode == ClockMode::Simulated {
            self.now = self.now.saturating_add(ms);
        }
        self.now()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Hand-simulated tick table, threshold 3:
    ///
    /// | tick | pong | missed | status       | transition |
    /// |------|------|--------|--------------|------------|
    /// | 1    | no   | 1      | connected    | -          |
    /// | 2    | no   | 2      | connected    | -          |
    /// | 3    | no   | 3      | disconnected | yes        |
    /// | 4    | no   | 4      | disconnected | -          |
    /// | 5    | yes  | 0      | connected    | yes        |
    #[test]
    fn silent_peer_tick_table() {
        let cfg = HeartbeatConfig::default();
        let mut s = LinkState::new(HostUid(1), 0, &cfg);
        let answers = [false, false, false, false, true];
        let expected = [
            (1, None),
            (2, None),
            (3, Some(LinkStatus::Disconnected)),
            (4, None),
            (0, Some(LinkStatus::Connected)),
        ];
        for (i, (&ans, &(missed, tr))) in answers.iter().zip(expected.iter()).enumerate() {
            let now = (i as u64 + 1) * cfg.interval_ms;
            assert_eq!(s.record_heartbeat(now, ans, &cfg), tr, "tick {}", i + 1);
            assert_eq!(s.missed_heartbeats, missed, "tick {}", i + 1);
        }
    }

    #[test]
    fn two_misses_then_answer_is_quiet() {
        let cfg = HeartbeatConfig::default();
        let mut s = LinkState::new(HostUid(1), 0, &cfg);
        for (i, ans) in [false, false, true, true].into_iter().enumerate() {
            assert_eq!(s.record_heartbeat(i as u64, ans, &cfg), None);
        }
        assert!(s.is_connected());
    }

    #[test]
    fn queue_refuses_at_capacity() {
        use crate::bytes::{EnvelopeId, FixedBytes};
        use crate::identity::{sign_envelope, EnvelopeDraft, Intent, KeyMaterial, Payload};
        let keys = KeyMaterial::from_seed(&[0; 32]);
        let mk = |i: u8| {
            sign_envelope(
                EnvelopeDraft {
                    envelope_id: EnvelopeId(FixedBytes([i; 16])),
                    sender: "00000001:00000001".parse().unwrap(),
                    recipient: "00000002:00000001".parse().unwrap(),
                    intent: Intent::CHAT,
                    session_id: None,
                    correlation_id: None,
                    policy_ref: None,
                    sent_at: 0,
                    payload: Payload::empty(),
                },
                &keys,
            )
            .unwrap()
        };
        let mut q = OfflineQueue::new(2);
        q.push(mk(1)).unwrap();
        q.push(mk(2)).unwrap();
        assert_eq!(q.push(mk(3)), Err(QueueFull { capacity: 2 }));
        assert_eq!(q.pop_front().unwrap().envelope_id.0 .0[0], 1);
        assert_eq!(q.len(), 1);
    }

    #[test]
    fn simulated_clock_is_monotone() {
        let mut c = Clock::simulated(10);
        assert_eq!(c.advance(5), 15);
        assert_eq!(c.now(), 15);
        let mut w = Clock::wall();
        let a = w.now();
        assert!(w.now() >= a);
    }
}
