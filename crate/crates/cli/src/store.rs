//! Persistent CLI state: the seed plus every executed step as JSON lines.
//! Each invocation replays the log into a fresh network, so state on disk
//! is just the command history; decision logs, events and contract chains
//! are exported next to it after every mutation.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use fp_core::canonical::{canonical_encode, canonical_string};
use fp_core::checkpoint::export_jsonl;
use fp_core::scenario::{ai_company::DEFAULT_SEED, Scenario, Step, StepOutput};

use crate::CliError;

const SEED_FILE: &str = "state.json";
const LOG_FILE: &str = "commands.jsonl";

pub struct Store {
    dir: Option<PathBuf>,
    pub sc: Scenario,
    pub steps: Vec<Step>,
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::new("IO", format!("{}: {e}", path.display()))
}

impl Store {
    pub fn open(dir: Option<&Path>, seed: Option<u64>) -> Result<Store, CliError> {
        let Some(dir) = dir else {
            return Ok(Store {
                dir: None,
                sc: Scenario::new(seed.unwrap_or(DEFAULT_SEED)),
                steps: Vec::new(),
            });
        };
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        let seed_path = dir.join(SEED_FILE);
        let stored = match fs::read(&seed_path) {
            Ok(bytes) => {
                let v: serde_json::Value = serde_json::from_slice(&bytes)
                    .map_err(|e| CliError::new("BAD_STATE", format!("{}: {e}", seed_path.display())))?;
                v.get("seed").and_then(|s| s.as_u64())
            }
            Err(_) => None,
        };
        let seed = match (stored, seed) {
            (Some(s), Some(flag)) if s != flag => {
                return Err(CliError::new(
                    "SEED_MISMATCH",
                    format!("state was created with seed {s}, not {flag}"),
                ))
            }
            (Some(s), _) => s,
            (None, flag) => {
                let s = flag.unwrap_or(DEFAULT_SEED);
                let body = canonical_string(&serde_json::json!({ "seed": s })).expect("plain json");
                fs::write(&seed_path, body).map_err(|e| io_err(&seed_path, e))?;
                s
            }
        };
        let mut sc = Scenario::new(seed);
        let mut steps = Vec::new();
        let log = dir.join(LOG_FILE);
        if let Ok(text) = fs::read_to_string(&log) {
            for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
                let step: Step = serde_json::from_str(line)
                    .map_err(|e| CliError::new("BAD_STATE", format!("{}:{}: {e}", log.display(), i + 1)))?;
                sc.apply(&step)
                    .map_err(|e| CliError::new("REPLAY", format!("{}:{}: {e}", log.display(), i + 1)))?;
                steps.push(step);
            }
        }
        Ok(Store {
            dir: Some(dir.to_owned()),
            sc,
            steps,
        })
    }

    /// Run one step and, if it succeeds, record it and refresh the exports.
    pub fn exec(&mut self, step: Step) -> Result<StepOutput, CliError> {
        let out = self.sc.apply(&step)?;
        if let Some(dir) = &self.dir {
            let log = dir.join(LOG_FILE);
            let mut f = fs::OpenOptions::new()
                .create(true)
                .append(true)
                .open(&log)
                .map_err(|e| io_err(&log, e))?;
            let mut line = canonical_encode(&step).expect("steps encode");
            line.push(b'\n');
            f.write_all(&line).map_err(|e| io_err(&log, e))?;
            self.export(dir)?;
        }
        self.steps.push(step);
        Ok(out)
    }

    fn export(&self, dir: &Path) -> Result<(), CliError> {
        let net = &self.sc.net;
        let write = |name: PathBuf, bytes: Vec<u8>| fs::write(&name, bytes).map_err(|e| io_err(&name, e));
        write(dir.join("decisions.jsonl"), export_jsonl(net.decisions()))?;
        write(dir.join("events.jsonl"), export_jsonl(net.events()))?;
        write(dir.join("activities.jsonl"), export_jsonl(net.activities()))?;
        for r in net.trade().contracts() {
            let id = r.contract.contract_id;
            let chains = dir.join("chains");
            fs::create_dir_all(&chains).map_err(|e| io_err(&chains, e))?;
            write(chains.join(format!("{id}.json")), canonical_encode(&r.chain).expect("chains encode"))?;
            if let Some(receipt) = &r.receipt {
                let receipts = dir.join("receipts");
                fs::create_dir_all(&receipts).map_err(|e| io_err(&receipts, e))?;
                write(receipts.join(format!("{id}.json")), canonical_encode(receipt).expect("receipts encode"))?;
            }
        }
        Ok(())
    }

    /// The host named by the first `host-init`, for commands that omit one.
    pub fn first_host(&self) -> Option<String> {
        self.steps.iter().find_map(|s| match s {
            Step::AddHost { name, .. } => Some(name.clone()),
            _ => None,
        })
    }
}
