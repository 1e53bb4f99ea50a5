use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{parse_response, AgentBackend, AgentError, AgentRequest, AgentResponse};

fn default_timeout() -> u64 {
    60
}

fn default_retries() -> u32 {
    3
}

fn default_backoff() -> u64 {
    500
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    pub endpoint: String,
    /// Name of the environment variable holding the bearer token.
    #[serde(default)]
    pub token_env: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    /// Retries after the first attempt, for transient failures only.
    #[serde(default = "default_retries")]
    pub retries: u32,
    /// First backoff delay; each retry doubles it.
    #[serde(default = "default_backoff")]
    pub backoff_ms: u64,
}

impl ServiceConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            token_env: None,
            timeout_secs: default_timeout(),
            retries: default_retries(),
            backoff_ms: default_backoff(),
        }
    }
}

/// Posts `{role, stage_index, scenario, contract, inputs}` to an HTTP endpoint
/// and expects a role-tagged response body.
pub struct ServiceBackend {
    config: ServiceConfig,
    token: Option<String>,
    agent: ureq::Agent,
}

enum Attempt {
    Done(Result<AgentResponse, AgentError>),
    Transient(String),
}

impl ServiceBackend {
    /// Reads the token from the environment now, so a missing variable fails early.
    pub fn new(config: ServiceConfig) -> Result<Self, AgentError> {
        let token = match &config.token_env {
            Some(var) => Some(std::env::var(var).map_err(|_| {
                AgentError::Config(format!("environment variable `{var}` is not set"))
            })?),
            None => None,
        };
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self { config, token, agent })
    }

    fn attempt(&self, req: &AgentRequest) -> Attempt {
        let mut call = self.agent.post(&self.config.endpoint).header("Accept", "application/json");
        if let Some(token) = &self.token {
            call = call.header("Authorization", format!("Bearer {token}"));
        }
        let body = crate::canonical::to_canonical_string(req).expect("agent request serializes");
        let mut resp = match call.header("Content-Type", "application/json").send(body) {
            Ok(resp) => resp,
            Err(e) => return Attempt::Transient(e.to_string()),
        };
        let status = resp.status().as_u16();
        let body = resp.body_mut().read_to_string();
        if status == 429 || status >= 500 {
            return Attempt::Transient(format!("HTTP {status}"));
        }
        let body = match body {
            Ok(body) => body,
            Err(e) => return Attempt::Transient(e.to_string()),
        };
        if !(200..300).contains(&status) {
            return Attempt::Done(Err(AgentError::BackendUnavailable {
                attempts: 1,
                message: format!("HTTP {status}: {}", body.chars().take(200).collect::<String>()),
            }));
        }
        Attempt::Done(parse_response(&body, req.role))
    }
}

impl AgentBackend for ServiceBackend {
    fn call(&self, req: &AgentRequest) -> Result<AgentResponse, AgentError> {
        let mut delay = Duration::from_millis(self.config.backoff_ms);
        let mut attempts = 0;
        loop {
            attempts += 1;
            match self.attempt(req) {
                Attempt::Done(Err(AgentError::BackendUnavailable { message, .. })) => {
                    return Err(AgentError::BackendUnavailable { attempts, message })
                }
                Attempt::Done(result) => return result,
                Attempt::Transient(message) if attempts > self.config.retries => {
                    return Err(AgentError::BackendUnavailable { attempts, message })
                }
                Attempt::Transient(message) => {
                    tracing::warn!(attempt = attempts, %message, "transient backend failure; retrying");
                    std::thread::sleep(delay);
                    delay *= 2;
                }
            }
        }
    }
}
