use std::time::Duration;

use ureq::Agent;

use super::gateway::{GatewayResult, SmsGateway};
use crate::error::{Error, Result};
use crate::registry::Phone;

/// Form-encoded HTTP provider: fields `1` (number), `2` (message), `3`
/// (api key) and optional `passwd`; the body is an integer status code.
pub struct HttpGateway {
    url: String,
    api_key: String,
    password: Option<String>,
    agent: Agent,
}

impl HttpGateway {
    pub fn new(url: impl Into<String>, api_key: impl Into<String>, password: Option<String>, timeout: Duration) -> Self {
        let agent: Agent = Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        HttpGateway {
            url: url.into(),
            api_key: api_key.into(),
            password,
            agent,
        }
    }

    /// Reads `SMS_GATEWAY_URL`, `SMS_GATEWAY_KEY` and optionally
    /// `SMS_GATEWAY_PASSWORD`.
    pub fn from_env() -> Result<Self> {
        let url = std::env::var("SMS_GATEWAY_URL").map_err(|_| Error::GatewayUnconfigured)?;
        let key = std::env::var("SMS_GATEWAY_KEY").map_err(|_| Error::GatewayUnconfigured)?;
        if url.trim().is_empty() {
            return Err(Error::GatewayUnconfigured);
        }
        Ok(Self::new(
            url,
            key,
            std::env::var("SMS_GATEWAY_PASSWORD").ok(),
            Duration::from_secs(10),
        ))
    }
}

/// Maps a provider status body onto an outcome.
pub fn interpret_status(body: &str) -> GatewayResult {
    match body.trim().parse::<i64>() {
        Ok(0) => GatewayResult::accepted("0"),
        Ok(1) => GatewayResult::rejected("invalid number"),
        Ok(2) => GatewayResult::rejected("bad credentials"),
        Ok(code) => GatewayResult::transient(format!("provider status {code}")),
        Err(_) => GatewayResult::transient(format!("unrecognised response {:?}", body.trim())),
    }
}

impl SmsGateway for HttpGateway {
    fn send(&self, phone: &Phone, text: &str, key: &str) -> GatewayResult {
        let mut form = vec![("1", phone.as_str()), ("2", text), ("3", self.api_key.as_str())];
        if let Some(p) = &self.password {
            form.push(("passwd", p.as_str()));
        }
        let resp = self
            .agent
            .post(&self.url)
            .header("Idempotency-Key", key)
            .send_form(form);
        match resp {
            Err(e) => GatewayResult::transient(e.to_string()),
            Ok(mut r) if r.status().is_success() => match r.body_mut().read_to_string() {
                Ok(body) => {
                    let mut res = interpret_status(&body);
                    if res.provider_ref.is_some() {
                        res.provider_ref = Some(key.to_string());
                    }
                    res
                }
                Err(e) => GatewayResult::transient(e.to_string()),
            },
            Ok(r) => GatewayResult::transient(format!("HTTP {}", r.status())),
        }
    }
}
