//! In-process simulated wire between two hosts with scripted faults.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("simulated link is down")]
pub struct LinkDown;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimWire {
    down: bool,
    /// Remaining successful transmissions before the wire drops by itself.
    fail_after: Option<u32>,
    pub frames_carried: u64,
}

impl SimWire {
    pub fn is_up(&self) -> bool {
        !self.down
    }

    pub fn cut(&mut self) {
        self.down = true;
        self.fail_after = None;
    }

    pub fn restore(&mut self) {
        self.down = false;
    }

    pub fn fail_after(&mut self, frames: u32) {
        self.fail_after = Some(frames);
    }

    /// Carry one frame across, or report the wire as down.
    pub fn transmit(&mut self, frame: &[u8]) -> Result<Vec<u8>, LinkDown> {
        if self.down {
            return Err(LinkDown);
        }
        if let Some(left) = self.fail_after.as_mut() {
            if *left == 0 {
                self.cut();
                return Err(LinkDown);
            }
            *left -= 1;
        }
        self.frames_carried += 1;
        Ok(frame.to_vec())
    }
}
