//! What happens to mail after the pipeline admits it: human inboxes, agent
//! adapters, tool bridges and programmatic callbacks.

pub mod adapter;
pub mod tools;

pub use adapter::{
    agent_execute, render_args, stub_tokens, AdapterConfig, AgentOutcome, EchoProvider, FlagMap,
    OutputFormat, Provider, ProviderOutput, ProviderRegistry, ScriptedProvider, ScriptedReply,
    TaskRequest, TrustLevel,
};
pub use tools::{
    call_in_process, call_over_stream, serve_stream, BridgeError, RpcError, RpcRequest,
    RpcResponse, SharedToolServer, StubToolServer, ToolCallRequest, ToolCallResult, ToolOutcome,
    DEFAULT_TOOL_TIMEOUT_MS,
};

use serde::{Deserialize, Serialize};

use crate::bytes::HexBytes;
use crate::identity::Envelope;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToolTransport {
    InProcess,
    /// Length-prefixed JSON-RPC over a byte stream.
    Stream,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolEndpoint {
    pub server: String,
    pub transport: ToolTransport,
    #[serde(default = "default_timeout")]
    pub timeout_ms: u64,
}

fn default_timeout() -> u64 {
    DEFAULT_TOOL_TIMEOUT_MS
}

impl ToolEndpoint {
    pub fn in_process(server: impl Into<String>) -> Self {
        Self {
            server: server.into(),
            transport: ToolTransport::InProcess,
            timeout_ms: DEFAULT_TOOL_TIMEOUT_MS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "handler", content = "config", rename_all = "snake_case")]
pub enum HandlerBinding {
    HumanInbox,
    AgentAdapter(AdapterConfig),
    ToolBridge(ToolEndpoint),
    /// Name of a callback registered with the runtime.
    Callback(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MailboxEntry {
    pub seq: u64,
    pub received_at: u64,
    pub envelope: Envelope,
    /// Decrypted payload.
    pub plaintext: HexBytes,
}

/// Store-and-forward record of every envelope handed to an entity's handler.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mailbox {
    entries: Vec<MailboxEntry>,
}

impl Mailbox {
    pub fn push(&mut self, envelope: Envelope, plaintext: Vec<u8>, now: u64) {
        let seq = self.entries.len() as u64;
        self.entries.push(MailboxEntry {
            seq,
            received_at: now,
            envelope,
            plaintext: HexBytes(plaintext),
        });
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[MailboxEntry] {
        &self.entries
    }

    /// Non-destructive read of everything received at or after `since`.
    pub fn read_since(&self, since: u64) -> Vec<MailboxEntry> {
        self.entries
            .iter()
            .filter(|e| e.received_at >= since)
            .cloned()
            .collect()
    }
}
