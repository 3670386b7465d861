//! Process configuration: flags with environment fallbacks.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context};
use barangay_core::geo::fixture::synthetic_zones;
use barangay_core::geo::ZoneMap;
use barangay_core::notify::{HttpGateway, SmsGateway};
use barangay_core::{System, SystemConfig};
use clap::Args;

#[derive(Debug, Clone, Args)]
pub struct StoreArgs {
    /// Directory holding the event log.
    #[arg(long, env = "DATA_DIR", default_value = "./data")]
    pub data_dir: PathBuf,

    /// JSON file with the seven zone polygons; a built-in demo layout is
    /// used when absent.
    #[arg(long, env = "ZONES_FILE")]
    pub zones_file: Option<PathBuf>,

    /// Name printed on certificates.
    #[arg(long, env = "BARANGAY_NAME")]
    pub barangay_name: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct GatewayArgs {
    #[arg(long, env = "SMS_GATEWAY_URL")]
    pub sms_gateway_url: Option<String>,

    #[arg(long, env = "SMS_GATEWAY_KEY", hide_env_values = true)]
    pub sms_gateway_key: Option<String>,

    #[arg(long, env = "SMS_GATEWAY_PASSWORD", hide_env_values = true)]
    pub sms_gateway_password: Option<String>,

    /// Per-request timeout in seconds.
    #[arg(long, env = "SMS_GATEWAY_TIMEOUT", default_value_t = 10)]
    pub sms_gateway_timeout: u64,
}

#[derive(Debug, Clone, Args)]
pub struct ServeArgs {
    #[arg(long, env = "BIND_ADDR", default_value = "127.0.0.1:8080")]
    pub bind_addr: String,

    /// Session lifetime in minutes.
    #[arg(long, env = "SESSION_TTL_MINUTES", default_value_t = 480)]
    pub session_ttl_minutes: i64,

    /// Creates this secretary account on first start if no account exists.
    #[arg(long, env = "BARANGAY_ADMIN_USER")]
    pub admin_user: Option<String>,

    #[arg(long, env = "BARANGAY_ADMIN_PASSWORD", hide_env_values = true)]
    pub admin_password: Option<String>,

    #[command(flatten)]
    pub gateway: GatewayArgs,
}

impl ServeArgs {
    pub fn bind(&self) -> anyhow::Result<SocketAddr> {
        self.bind_addr
            .parse()
            .with_context(|| format!("CONFIG_INVALID: BIND_ADDR {:?} is not host:port", self.bind_addr))
    }
}

impl StoreArgs {
    pub fn zones(&self) -> anyhow::Result<ZoneMap> {
        match &self.zones_file {
            Some(path) => {
                let bytes = std::fs::read(path).with_context(|| format!("CONFIG_INVALID: reading {}", path.display()))?;
                ZoneMap::from_json(&bytes).with_context(|| format!("CONFIG_INVALID: zones in {}", path.display()))
            }
            None => {
                tracing::warn!("ZONES_FILE not set; using the built-in demo zone layout");
                Ok(synthetic_zones())
            }
        }
    }

    pub fn open(&self, gateway: Option<Arc<dyn SmsGateway>>) -> anyhow::Result<System> {
        let mut cfg = SystemConfig::new(self.zones()?).data_dir(&self.data_dir);
        if let Some(name) = &self.barangay_name {
            cfg = cfg.barangay_name(name.clone());
        }
        if let Some(g) = gateway {
            cfg = cfg.gateway(g);
        }
        System::open(cfg).with_context(|| format!("opening store in {}", self.data_dir.display()))
    }
}

impl GatewayArgs {
    /// `None` when no gateway is configured; SMS dispatch then reports
    /// GATEWAY_UNCONFIGURED.
    pub fn gateway(&self) -> anyhow::Result<Option<Arc<dyn SmsGateway>>> {
        match (&self.sms_gateway_url, &self.sms_gateway_key) {
            (None, _) => Ok(None),
            (Some(url), Some(key)) => {
                if !(url.starts_with("http://") || url.starts_with("https://")) {
                    bail!("CONFIG_INVALID: SMS_GATEWAY_URL must be an http(s) URL");
                }
                Ok(Some(Arc::new(HttpGateway::new(
                    url.clone(),
                    key.clone(),
                    self.sms_gateway_password.clone(),
                    Duration::from_secs(self.sms_gateway_timeout.max(1)),
                ))))
            }
            (Some(_), None) => bail!("CONFIG_INVALID: SMS_GATEWAY_URL is set but SMS_GATEWAY_KEY is not"),
        }
    }
}
