//! Link faults, heartbeats and offline-queue flushing.

use super::messages::NetEvent;
use super::{Hop, NetError, Network};
use crate::bytes::EnvelopeId;
use crate::identity::{sign_envelope, EntityAddress, EnvelopeDraft, HostUid, Intent, Payload};
use crate::transport::{frame_decode, frame_encode, LinkStatus, LivenessTransition};

impl Network {
    fn link_mut(&mut self, a: HostUid, b: HostUid) -> Result<&mut super::Link, NetError> {
        self.links.get_mut(&(a, b)).ok_or(NetError::UnknownLink(a, b))
    }

    /// Take the wire down in both directions.
    pub fn cut_link(&mut self, a: HostUid, b: HostUid) -> Result<(), NetError> {
        self.link_mut(a, b)?.wire.cut();
        self.link_mut(b, a)?.wire.cut();
        Ok(())
    }

    /// Bring the wire back up. Liveness recovers on the next answered
    /// heartbeat, or immediately via `flush_on_reconnect`.
    pub fn restore_link(&mut self, a: HostUid, b: HostUid) -> Result<(), NetError> {
        self.link_mut(a, b)?.wire.restore();
        self.link_mut(b, a)?.wire.restore();
        Ok(())
    }

    /// The a -> b wire drops by itself after `frames` more frames.
    pub fn fail_after(&mut self, a: HostUid, b: HostUid, frames: u32) -> Result<(), NetError> {
        self.link_mut(a, b)?.wire.fail_after(frames);
        Ok(())
    }

    pub fn queue_len(&self, a: HostUid, b: HostUid) -> usize {
        self.links.get(&(a, b)).map_or(0, |l| l.queue.len())
    }

    pub fn queued(&self, a: HostUid, b: HostUid) -> Vec<EnvelopeId> {
        self.links
            .get(&(a, b))
            .map(|l| l.queue.iter().map(|e| e.envelope_id).collect())
            .unwrap_or_default()
    }

    pub fn link_status(&self, a: HostUid, b: HostUid) -> Option<LinkStatus> {
        self.links.get(&(a, b)).map(|l| l.state.status)
    }

    fn record_transition(&mut self, host: HostUid, peer: HostUid, status: LinkStatus) {
        let t = LivenessTransition {
            host,
            peer,
            status,
            at: self.now(),
        };
        self.liveness.push(t);
        self.emit(NetEvent::Liveness(t));
    }

    /// Mark a -> b connected and drain its queue in order. A failure part
    /// way leaves the rest queued, still in order. Processes the flushed
    /// mail before returning the count sent.
    pub fn flush_on_reconnect(&mut self, a: HostUid, b: HostUid) -> Result<usize, NetError> {
        let now = self.now();
        if self.link_mut(a, b)?.state.mark_reconnected(now) {
            self.record_transition(a, b, LinkStatus::Connected);
        }
        let n = self.drain(a, b);
        self.run_until_idle()?;
        Ok(n)
    }

    fn drain(&mut self, a: HostUid, b: HostUid) -> usize {
        let link = self.links.get_mut(&(a, b)).expect("caller checked the link");
        let mut sent = 0;
        while let Some(env) = link.queue.pop_front() {
            let frame = frame_encode(&env).expect("queued envelopes encode");
            match link.wire.transmit(&frame) {
                Ok(bytes) => {
                    let env = frame_decode(&bytes).expect("wire carries frames intact");
                    self.hops.push_back(Hop { env, at: b, origin: a });
                    sent += 1;
                }
                Err(_) => {
                    link.queue.restore_front(env);
                    break;
                }
            }
        }
        if sent > 0 {
            self.emit(NetEvent::Flushed {
                from: a,
                to: b,
                count: sent,
            });
        }
        sent
    }

    /// Move logical time forward by `ms`, running every heartbeat that falls
    /// due on the way, then process whatever that released.
    pub fn advance(&mut self, ms: u64) -> Result<Vec<LivenessTransition>, NetError> {
        let target = self.now().saturating_add(ms);
        let before = self.liveness.len();
        loop {
            let due = self
                .links
                .values()
                .map(|l| l.state.next_ping_at)
                .filter(|t| *t <= target)
                .min();
            let Some(t) = due else { break };
            let now = self.now();
            self.clock.advance(t - now);
            let keys: Vec<_> = self
                .links
                .iter()
                .filter(|(_, l)| l.state.next_ping_at == t)
                .map(|(k, _)| *k)
                .collect();
            for (a, b) in keys {
                self.heartbeat(a, b);
            }
        }
        let now = self.now();
        self.clock.advance(target - now);
        self.run_until_idle()?;
        Ok(self.liveness[before..].to_vec())
    }

    fn heartbeat_frame(&mut self, from: HostUid, to: HostUid, intent: Intent) -> Vec<u8> {
        let draft = EnvelopeDraft {
            envelope_id: EnvelopeId::random(&mut self.rng),
            sender: EntityAddress::host_entity(from),
            recipient: EntityAddress::host_entity(to),
            intent,
            session_id: None,
            correlation_id: None,
            policy_ref: None,
            sent_at: self.now(),
            payload: Payload::empty(),
        };
        let keys = self.tree.host(&from).expect("linked hosts exist").keys();
        let env = sign_envelope(draft, keys).expect("heartbeats sign");
        frame_encode(&env).expect("heartbeats encode")
    }

    /// One PING over a -> b and its PONG over b -> a.
    fn heartbeat(&mut self, a: HostUid, b: HostUid) {
        let ping = self.heartbeat_frame(a, b, Intent::PING);
        let pong = self.heartbeat_frame(b, a, Intent::PONG);
        let answered = self.links.get_mut(&(a, b)).expect("due link").wire.transmit(&ping).is_ok()
            && self.links.get_mut(&(b, a)).expect("reverse link").wire.transmit(&pong).is_ok();
        let now = self.now();
        let cfg = self.config.heartbeat;
        let link = self.links.get_mut(&(a, b)).expect("due link");
        let change = link.state.record_heartbeat(now, answered, &cfg);
        let backlog = answered && !link.queue.is_empty();
        if let Some(status) = change {
            self.record_transition(a, b, status);
        }
        if backlog {
            self.drain(a, b);
        }
    }
}
