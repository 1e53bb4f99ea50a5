use std::io::ErrorKind;
use std::path::{Path, PathBuf};

use super::{parse_response, AgentBackend, AgentError, AgentRequest, AgentResponse};

/// Replays responses from a directory of `role.stage.scenario.json` files.
#[derive(Debug, Clone)]
pub struct ScriptedBackend {
    dir: PathBuf,
}

impl ScriptedBackend {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Fixture file name for a request.
    pub fn key(req: &AgentRequest) -> String {
        format!("{}.{}.{}.json", req.role, req.stage_index, req.scenario)
    }
}

impl AgentBackend for ScriptedBackend {
    fn call(&self, req: &AgentRequest) -> Result<AgentResponse, AgentError> {
        let key = Self::key(req);
        let path = self.dir.join(&key);
        let raw = match std::fs::read_to_string(&path) {
            Ok(raw) => raw,
            Err(e) if e.kind() == ErrorKind::NotFound => return Err(AgentError::ScenarioMiss { key }),
            Err(e) => {
                return Err(AgentError::BackendUnavailable {
                    attempts: 1,
                    message: format!("{}: {e}", path.display()),
                })
            }
        };
        parse_response(&raw, req.role)
    }
}
