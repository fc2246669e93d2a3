use std::io;
use std::time::Duration;

use super::wire::{decode_response, encode_request, path_for, ErrorBody};
use super::{GuidanceBackend, GuidanceError, GuidanceRequest, GuidanceResponse};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(120);

/// Largest response body accepted (a 1024x1024 float grid is about 17 MB).
const MAX_BODY: u64 = 256 << 20;

/// HTTP client for a guidance service.
#[derive(Debug, Clone)]
pub struct RemoteBackend {
    base_url: String,
    agent: ureq::Agent,
}

fn map_io(e: io::Error) -> GuidanceError {
    match e.kind() {
        io::ErrorKind::ConnectionRefused | io::ErrorKind::ConnectionReset | io::ErrorKind::NotConnected => {
            GuidanceError::Unreachable(e.to_string())
        }
        io::ErrorKind::TimedOut | io::ErrorKind::WouldBlock => GuidanceError::Timeout(e.to_string()),
        _ => GuidanceError::Transport(e.to_string()),
    }
}

fn map_error(e: ureq::Error) -> GuidanceError {
    match e {
        ureq::Error::Timeout(t) => GuidanceError::Timeout(t.to_string()),
        ureq::Error::Io(io) => map_io(io),
        ureq::Error::ConnectionFailed | ureq::Error::HostNotFound => GuidanceError::Unreachable(e.to_string()),
        other => GuidanceError::Transport(other.to_string()),
    }
}

impl RemoteBackend {
    pub fn new(base_url: &str) -> Self {
        Self::with_timeout(base_url, DEFAULT_TIMEOUT)
    }

    pub fn with_timeout(base_url: &str, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            base_url: base_url.trim_end_matches('/').to_string(),
            agent,
        }
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    /// `GET /v1/health`; any 2xx counts as healthy.
    pub fn health(&self) -> Result<(), GuidanceError> {
        let url = format!("{}{}", self.base_url, super::wire::HEALTH_PATH);
        let resp = self.agent.get(&url).call().map_err(map_error)?;
        let status = resp.status().as_u16();
        if (200..300).contains(&status) {
            Ok(())
        } else {
            Err(GuidanceError::Server {
                status,
                code: "unhealthy".into(),
                message: format!("health check returned {status}"),
            })
        }
    }
}

impl GuidanceBackend for RemoteBackend {
    fn call(&self, request: &GuidanceRequest) -> Result<GuidanceResponse, GuidanceError> {
        let body = serde_json::to_string(&encode_request(request)?)
            .map_err(|e| GuidanceError::InvalidRequest(e.to_string()))?;
        let url = format!("{}{}", self.base_url, path_for(request.mode));
        let mut resp = self
            .agent
            .post(&url)
            .header("Content-Type", "application/json")
            .send(body.as_bytes())
            .map_err(map_error)?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .with_config()
            .limit(MAX_BODY)
            .read_to_string()
            .map_err(map_error)?;
        if !(200..300).contains(&status) {
            return Err(match serde_json::from_str::<ErrorBody>(&text) {
                Ok(err) => GuidanceError::Server {
                    status,
                    code: err.code,
                    message: err.message,
                },
                Err(_) => GuidanceError::Server {
                    status,
                    code: "unknown".into(),
                    message: text.chars().take(200).collect(),
                },
            });
        }
        decode_response(request.mode, &text)
    }
}
