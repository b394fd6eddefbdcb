//! Declarative agent-provider adapters and deterministic provider stubs.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bytes::{sha256, SessionId};
use crate::checkpoint::{SessionError, SessionStore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrustLevel {
    Low,
    Medium,
    High,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Text,
    Json,
}

macro_rules! word_enum {
    ($t:ty { $($v:ident => $s:literal),* }) => {
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $(Self::$v => $s),* })
            }
        }
        impl FromStr for $t {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                match s {
                    $($s => Ok(Self::$v),)*
                    other => Err(format!("unknown value {other:?}")),
                }
            }
        }
    };
}

word_enum!(TrustLevel { Low => "low", Medium => "medium", High => "high" });
word_enum!(OutputFormat { Text => "text", Json => "json" });

/// Provider-specific argument templates for the four semantic fields; `{}`
/// marks where the value goes. Templates split on whitespace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlagMap {
    pub trust_level: String,
    pub output_format: String,
    pub budget: String,
    pub allowed_tools: String,
}

impl Default for FlagMap {
    fn default() -> Self {
        Self {
            trust_level: "--trust {}".into(),
            output_format: "--output {}".into(),
            budget: "--max-tokens {}".into(),
            allowed_tools: "--allowed-tools {}".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdapterConfig {
    pub provider: String,
    pub trust_level: TrustLevel,
    pub output_format: OutputFormat,
    /// Session whose budget absorbs the tokens this agent consumes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<SessionId>,
    #[serde(default)]
    pub allowed_tools: Vec<String>,
    #[serde(default)]
    pub flag_map: FlagMap,
}

impl AdapterConfig {
    pub fn new(provider: impl Into<String>) -> Self {
        Self {
            provider: provider.into(),
            trust_level: TrustLevel::Medium,
            output_format: OutputFormat::Text,
            budget: None,
            allowed_tools: Vec::new(),
            flag_map: FlagMap::default(),
        }
    }
}

fn expand(template: &str, value: &str, out: &mut Vec<String>) {
    out.extend(template.split_whitespace().map(|w| w.replace("{}", value)));
}

/// Render the semantic fields through the flag map into an argument vector.
/// `remaining_tokens` fills the budget template when a budget is bound.
pub fn render_args(config: &AdapterConfig, remaining_tokens: Option<u64>) -> Vec<String> {
    let mut args = Vec::new();
    let fm = &config.flag_map;
    expand(&fm.trust_level, &config.trust_level.to_string(), &mut args);
    expand(&fm.output_format, &config.output_format.to_string(), &mut args);
    if let Some(t) = remaining_tokens {
        expand(&fm.budget, &t.to_string(), &mut args);
    }
    if !config.allowed_tools.is_empty() {
        expand(&fm.allowed_tools, &config.allowed_tools.join(","), &mut args);
    }
    args
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProviderOutput {
    pub output: Vec<u8>,
    pub tokens: u64,
    pub exit_status: i32,
    #[serde(default)]
    pub stderr: String,
}

/// Argument vector and input bytes in; output, token count and exit status out.
pub trait Provider {
    fn run(&mut self, args: &[String], input: &[u8]) -> ProviderOutput;
}

/// One token per four input bytes, rounded up.
pub fn stub_tokens(input: &[u8]) -> u64 {
    (input.len() as u64).div_ceil(4)
}

/// Body of a TASK envelope.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskRequest {
    pub task: String,
}

/// Replies with the task text.
#[derive(Debug, Default)]
pub struct EchoProvider {
    pub calls: Vec<Vec<String>>,
}

impl Provider for EchoProvider {
    fn run(&mut self, args: &[String], input: &[u8]) -> ProviderOutput {
        self.calls.push(args.to_vec());
        let output = match serde_json::from_slice::<TaskRequest>(input) {
            Ok(t) => t.task.into_bytes(),
            Err(_) => input.to_vec(),
        };
        ProviderOutput {
            output,
            tokens: stub_tokens(input),
            exit_status: 0,
            stderr: String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptedReply {
    pub output: String,
    #[serde(default)]
    pub exit_status: i32,
    #[serde(default)]
    pub stderr: String,
}

/// Plays back a fixed transcript; fails once it runs out.
#[derive(Debug, Default)]
pub struct ScriptedProvider {
    pub script: VecDeque<ScriptedReply>,
}

impl ScriptedProvider {
    pub fn new(replies: impl IntoIterator<Item = ScriptedReply>) -> Self {
        Self {
            script: replies.into_iter().collect(),
        }
    }
}

impl Provider for ScriptedProvider {
    fn run(&mut self, _args: &[String], input: &[u8]) -> ProviderOutput {
        match self.script.pop_front() {
            Some(r) => ProviderOutput {
                output: r.output.into_bytes(),
                tokens: stub_tokens(input),
                exit_status: r.exit_status,
                stderr: r.stderr,
            },
            None => ProviderOutput {
                output: Vec::new(),
                tokens: 0,
                exit_status: 1,
                stderr: "transcript exhausted".into(),
            },
        }
    }
}

#[derive(Default)]
pub struct ProviderRegistry {
    providers: BTreeMap<String, Box<dyn Provider>>,
}

impl ProviderRegistry {
    pub fn with_echo() -> Self {
        let mut r = Self::default();
        r.register("echo", Box::new(EchoProvider::default()));
        r
    }

    pub fn register(&mut self, name: impl Into<String>, p: Box<dyn Provider>) {
        self.providers.insert(name.into(), p);
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut (dyn Provider + 'static)> {
        self.providers.get_mut(name).map(|b| b.as_mut())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AgentOutcome {
    Reply { output: Vec<u8>, tokens: u64 },
    Failure { code: String, message: String },
}

/// Run one task through the configured provider and charge its tokens.
/// Failures leave the budget untouched.
pub fn agent_execute(
    config: &AdapterConfig,
    task_payload: &[u8],
    providers: &mut ProviderRegistry,
    sessions: &mut SessionStore,
) -> AgentOutcome {
    let Some(provider) = providers.get_mut(&config.provider) else {
        return AgentOutcome::Failure {
            code: "NO_PROVIDER".into(),
            message: format!("provider {:?} is not registered", config.provider),
        };
    };
    let remaining = config
        .budget
        .and_then(|id| sessions.get(&id))
        .and_then(|s| s.budget)
        .map(|b| b.token_ceiling - b.tokens_used);
    let args = render_args(config, remaining);
    let out = provider.run(&args, task_payload);
    if out.exit_status != 0 {
        return AgentOutcome::Failure {
            code: "PROVIDER_FAILED".into(),
            message: format!(
                "exit status {}, stderr sha256 {}",
                out.exit_status,
                sha256(out.stderr.as_bytes())
            ),
        };
    }
    if let Some(id) = config.budget {
        match sessions.charge_tokens(&id, out.tokens) {
            Ok(()) | Err(SessionError::NoBudget(_)) => {}
            Err(e) => {
                return AgentOutcome::Failure {
                    code: "TOKEN_BUDGET_EXCEEDED".into(),
                    message: e.to_string(),
                }
            }
        }
    }
    AgentOutcome::Reply {
        output: out.output,
        tokens: out.tokens,
    }
}
