//! JSON-RPC 2.0 `tools/call` bridge and a deterministic stub tool server.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::transport::frame::{read_body, write_body, FrameError};

pub const PARSE_ERROR: i64 = -32700;
pub const INVALID_REQUEST: i64 = -32600;
pub const METHOD_NOT_FOUND: i64 = -32601;
pub const INVALID_PARAMS: i64 = -32602;
pub const DEFAULT_TOOL_TIMEOUT_MS: u64 = 30_000;

#[derive(Debug, thiserror::Error)]
pub enum BridgeError {
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error("bad JSON-RPC message: {0}")]
    Json(#[from] serde_json::Error),
    #[error("stream closed before all replies arrived")]
    Closed,
    #[error("no reply for call {0}")]
    Uncorrelated(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RpcRequest {
    pub jsonrpc: String,
    pub method: String,
    #[serde(default)]
    pub params: Value,
    pub id: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RpcError {
    pub code: i64,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RpcResponse {
    pub jsonrpc: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<RpcError>,
    pub id: Value,
}

impl RpcResponse {
    fn ok(id: Value, result: Value) -> Self {
        Self {
            jsonrpc: "2.0".into(),
            result: Some(result),
            error: None,
            id,
        }
    }

    fn err(id: Value, code: i64, message: impl Into<String>) -> Self {
        Self {
            jsonrpc: "2.0".into(),
            result: None,
            error: Some(RpcError {
                code,
                message: message.into(),
                data: None,
            }),
            id,
        }
    }
}

/// Body of an INVOKE envelope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolCallRequest {
    pub name: String,
    #[serde(default)]
    pub arguments: Value,
    pub call_id: String,
}

impl ToolCallRequest {
    pub fn to_rpc(&self) -> RpcRequest {
        RpcRequest {
            jsonrpc: "2.0".into(),
            method: "tools/call".into(),
            params: json!({ "name": self.name, "arguments": self.arguments }),
            id: Value::String(self.call_id.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolCallResult {
    pub call_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub content: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<RpcError>,
}

impl ToolCallResult {
    pub fn from_rpc(resp: RpcResponse) -> Self {
        Self {
            call_id: match resp.id {
                Value::String(s) => s,
                other => other.to_string(),
            },
            content: resp.result,
            error: resp.error,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StubTool {
    Add,
    Search,
    Sleep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServerLogEntry {
    pub id: Value,
    pub method: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool: Option<String>,
}

/// Deterministic tool server. Each tool declares a logical latency so the
/// bridge can enforce timeouts without real waiting.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StubToolServer {
    pub tools: BTreeMap<String, (StubTool, u64)>,
    pub corpus: Vec<String>,
    pub log: Vec<ServerLogEntry>,
}

impl StubToolServer {
    /// `add` (5 ms), `search` over a small code corpus (40 ms) and `sleep`
    /// (45 s, always past the default timeout).
    pub fn standard() -> Self {
        let mut s = Self::default();
        s.tools.insert("add".into(), (StubTool::Add, 5));
        s.tools.insert("search".into(), (StubTool::Search, 40));
        s.tools.insert("sleep".into(), (StubTool::Sleep, 45_000));
        s.corpus = [
            "src/router.rs: fn route(dest)",
            "src/ledger.rs: fn freeze(buyer, amount)",
            "src/deploy.rs: fn rollout(build)",
            "src/search.rs: fn index(corpus)",
        ]
        .map(String::from)
        .to_vec();
        s
    }

    pub fn latency_of(&self, name: &str) -> Option<u64> {
        self.tools.get(name).map(|(_, l)| *l)
    }

    /// Handle one request; returns the response and the logical latency.
    pub fn handle(&mut self, req: &RpcRequest) -> (RpcResponse, u64) {
        let id = req.id.clone();
        let tool = req.params.get("name").and_then(Value::as_str).map(str::to_owned);
        self.log.push(ServerLogEntry {
            id: id.clone(),
            method: req.method.clone(),
            tool: tool.clone(),
        });
        if req.jsonrpc != "2.0" {
            return (RpcResponse::err(id, INVALID_REQUEST, "jsonrpc must be \"2.0\""), 0);
        }
        if req.method != "tools/call" {
            return (RpcResponse::err(id, METHOD_NOT_FOUND, format!("method {} not found", req.method)), 0);
        }
        let Some(name) = tool else {
            return (RpcResponse::err(id, INVALID_PARAMS, "params.name missing"), 0);
        };
        let Some(&(kind, latency)) = self.tools.get(&name) else {
            return (RpcResponse::err(id, METHOD_NOT_FOUND, format!("tool {name} not found")), 0);
        };
        let args = req.params.get("arguments").cloned().unwrap_or(Value::Null);
        let result = match kind {
            StubTool::Add => {
                match (args.get("a").and_then(Value::as_i64), args.get("b").and_then(Value::as_i64)) {
                    (Some(a), Some(b)) => Ok(json!(a + b)),
                    _ => Err("add needs integer a and b"),
                }
            }
            StubTool::Search => match args.get("query").and_then(Value::as_str) {
                Some(q) => Ok(json!(self
                    .corpus
                    .iter()
                    .filter(|line| line.contains(q))
                    .collect::<Vec<_>>())),
                None => Err("search needs a query string"),
            },
            StubTool::Sleep => Ok(json!("done")),
        };
        match result {
            Ok(v) => (RpcResponse::ok(id, v), latency),
            Err(m) => (RpcResponse::err(id, INVALID_PARAMS, m), 0),
        }
    }

    /// Parse and handle raw request bytes, as a stream server would.
    pub fn handle_bytes(&mut self, body: &[u8]) -> (RpcResponse, u64) {
        match serde_json::from_slice::<RpcRequest>(body) {
            Ok(req) => self.handle(&req),
            Err(e) => {
                let code = if serde_json::from_slice::<Value>(body).is_ok() {
                    INVALID_REQUEST
                } else {
                    PARSE_ERROR
                };
                (RpcResponse::err(Value::Null, code, e.to_string()), 0)
            }
        }
    }
}

pub type SharedToolServer = Arc<Mutex<StubToolServer>>;

#[derive(Debug, Clone, PartialEq)]
pub enum ToolOutcome {
    Result(ToolCallResult),
    Timeout { call_id: String, latency_ms: u64 },
}

/// In-process binding: concurrent calls complete in latency order and are
/// correlated back to their requests by id.
pub fn call_in_process(
    server: &SharedToolServer,
    calls: &[ToolCallRequest],
    timeout_ms: u64,
) -> Vec<ToolOutcome> {
    let mut srv = server.lock().expect("tool server lock");
    let mut done: Vec<(u64, usize, ToolOutcome)> = calls
        .iter()
        .enumerate()
        .map(|(i, call)| {
            let (resp, latency) = srv.handle(&call.to_rpc());
            let outcome = if latency > timeout_ms {
                ToolOutcome::Timeout {
                    call_id: call.call_id.clone(),
                    latency_ms: latency,
                }
            } else {
                ToolOutcome::Result(ToolCallResult::from_rpc(resp))
            };
            (latency, i, outcome)
        })
        .collect();
    done.sort_by_key(|(latency, i, _)| (*latency, *i));
    done.into_iter().map(|(_, _, o)| o).collect()
}

/// Serve length-prefixed JSON-RPC requests until the peer closes the stream.
pub fn serve_stream<S: Read + Write>(server: SharedToolServer, mut stream: S) -> Result<u64, BridgeError> {
    let mut served = 0;
    while let Some(body) = read_body(&mut stream)? {
        let (resp, _) = server.lock().expect("tool server lock").handle_bytes(&body);
        let out = serde_json::to_vec(&resp)?;
        write_body(&mut stream, &out)?;
        served += 1;
    }
    Ok(served)
}

/// Stream binding: pipelines every request before reading replies, then
/// matches replies to calls by id.
pub fn call_over_stream<S: Read + Write>(
    stream: &mut S,
    calls: &[ToolCallRequest],
) -> Result<Vec<ToolCallResult>, BridgeError> {
    for c in calls {
        let body = serde_json::to_vec(&c.to_rpc())?;
        write_body(stream, &body)?;
    }
    let mut by_id = BTreeMap::new();
    for _ in calls {
        let body = read_body(stream)?.ok_or(BridgeError::Closed)?;
        let resp: RpcResponse = serde_json::from_slice(&body)?;
        let r = ToolCallResult::from_rpc(resp);
        by_id.insert(r.call_id.clone(), r);
    }
    calls
        .iter()
        .map(|c| {
            by_id
                .remove(&c.call_id)
                .ok_or_else(|| BridgeError::Uncorrelated(c.call_id.clone()))
        })
        .collect()
}
