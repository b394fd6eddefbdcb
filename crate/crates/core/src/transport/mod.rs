//! Concrete bindings for host-to-host links: frame codec, link liveness,
//! bounded offline queues, a simulated wire and a byte-stream binding.

pub mod frame;
mod link;
pub mod sim;
pub mod stream;

pub use frame::{
    frame_decode, frame_encode, FrameDecoder, FrameError, MAX_FRAME_BYTES,
};
pub use link::{
    Clock, ClockMode, HeartbeatConfig, LinkState, LinkStatus, LivenessTransition, OfflineQueue,
    QueueFull, DEFAULT_HEARTBEAT_INTERVAL_MS, DEFAULT_LIVENESS_THRESHOLD, DEFAULT_QUEUE_CAPACITY,
};
pub use sim::{LinkDown, SimWire};
