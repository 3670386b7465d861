//! In-process server, HTTP client and fake SMS provider shared by the
//! integration tests.

#![allow(dead_code)]

use std::sync::Arc;

use axum::extract::State;
use axum::http::HeaderMap;
use axum::routing::post;
use axum::{Form, Router};
use barangay_core::geo::fixture::synthetic_zones;
use barangay_core::{System, SystemConfig};
use barangay_server::sessions::SessionStore;
use barangay_server::{bootstrap_admin, serve, AppState};
use parking_lot::Mutex;
use serde_json::Value;
use tokio::net::TcpListener;
use tokio::sync::oneshot;
use ureq::http::{Method, Request};
use ureq::Agent;

pub const ADMIN: &str = "admin";
pub const ADMIN_PASSWORD: &str = "correct horse";

pub struct TestServer {
    pub base: String,
    pub sys: Arc<System>,
    pub sessions: Arc<SessionStore>,
    pub rt: tokio::runtime::Runtime,
    stop: Option<oneshot::Sender<()>>,
    _dir: Option<tempfile::TempDir>,
}

impl TestServer {
    /// Server over an on-disk store in a fresh temporary directory.
    pub fn start() -> Self {
        Self::start_with(chrono::Duration::hours(8), |c| c)
    }

    pub fn start_with(ttl: chrono::Duration, tweak: impl FnOnce(SystemConfig) -> SystemConfig) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tweak(SystemConfig::new(synthetic_zones()).data_dir(dir.path()));
        let sys = Arc::new(System::open(cfg).unwrap());
        bootstrap_admin(&sys, Some(ADMIN), Some(ADMIN_PASSWORD)).unwrap();
        let sessions = Arc::new(SessionStore::new(ttl));
        let rt = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(4)
            .enable_all()
            .build()
            .unwrap();
        let listener = rt.block_on(TcpListener::bind("127.0.0.1:0")).unwrap();
        let base = format!("http://{}/api", listener.local_addr().unwrap());
        let (tx, rx) = oneshot::channel::<()>();
        let state = AppState::new(sys.clone(), sessions.clone());
        rt.spawn(async move {
            serve(listener, state, async {
                let _ = rx.await;
            })
            .await
            .unwrap();
        });
        TestServer {
            base,
            sys,
            sessions,
            rt,
            stop: Some(tx),
            _dir: Some(dir),
        }
    }

    pub fn client(&self) -> Client {
        Client::new(&self.base)
    }

    /// Client signed in as the bootstrap secretary.
    pub fn admin(&self) -> Client {
        let mut c = self.client();
        c.sign_in(ADMIN, ADMIN_PASSWORD);
        c
    }

    /// Creates an account with `role` and returns a client signed in as it.
    pub fn user(&self, username: &str, role: &str) -> Client {
        let admin = self.admin();
        let r = admin.post(
            "/accounts",
            &serde_json::json!({"username": username, "password": "password123", "role": role}),
        );
        assert_eq!(r.status, 201, "{:?}", r.json);
        let mut c = self.client();
        c.sign_in(username, "password123");
        c
    }
}

impl Drop for TestServer {
    fn drop(&mut self) {
        if let Some(tx) = self.stop.take() {
            let _ = tx.send(());
        }
    }
}

#[derive(Debug)]
pub struct Reply {
    pub status: u16,
    pub headers: Vec<(String, String)>,
    pub text: String,
    pub json: Value,
}

impl Reply {
    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }

    /// Error code of a non-2xx reply.
    pub fn code(&self) -> &str {
        self.json["code"].as_str().unwrap_or("")
    }
}

pub struct Client {
    pub base: String,
    pub token: Option<String>,
    agent: Agent,
}

impl Client {
    pub fn new(base: &str) -> Self {
        let agent: Agent = Agent::config_builder().http_status_as_error(false).build().into();
        Client {
            base: base.to_string(),
            token: None,
            agent,
        }
    }

    pub fn sign_in(&mut self, username: &str, password: &str) -> Reply {
        let r = self.post("/sessions", &serde_json::json!({"username": username, "password": password}));
        if r.status == 201 {
            self.token = Some(r.json["token"].as_str().unwrap().to_string());
        }
        r
    }

    pub fn send(&self, method: Method, path: &str, content_type: &str, body: Vec<u8>) -> Reply {
        self.try_send(method, path, content_type, body).expect("server reachable")
    }

    /// Like [`Client::send`] but `None` when the connection fails.
    pub fn try_send(&self, method: Method, path: &str, content_type: &str, body: Vec<u8>) -> Option<Reply> {
        let mut req = Request::builder().method(method).uri(format!("{}{path}", self.base));
        if let Some(t) = &self.token {
            req = req.header("Authorization", format!("Bearer {t}"));
        }
        if !content_type.is_empty() {
            req = req.header("Content-Type", content_type);
        }
        let mut res = self.agent.run(req.body(body).unwrap()).ok()?;
        let status = res.status().as_u16();
        let headers = res
            .headers()
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_str().unwrap_or("").to_string()))
            .collect();
        let text = res.body_mut().read_to_string().unwrap_or_default();
        let json = serde_json::from_str(&text).unwrap_or(Value::Null);
        Some(Reply {
            status,
            headers,
            text,
            json,
        })
    }

    pub fn get(&self, path: &str) -> Reply {
        self.send(Method::GET, path, "", Vec::new())
    }

    pub fn delete(&self, path: &str) -> Reply {
        self.send(Method::DELETE, path, "", Vec::new())
    }

    pub fn post(&self, path: &str, body: &Value) -> Reply {
        self.send(Method::POST, path, "application/json", serde_json::to_vec(body).unwrap())
    }

    pub fn patch(&self, path: &str, body: &Value) -> Reply {
        self.send(Method::PATCH, path, "application/json", serde_json::to_vec(body).unwrap())
    }

    pub fn post_raw(&self, path: &str, content_type: &str, body: &[u8]) -> Reply {
        self.send(Method::POST, path, content_type, body.to_vec())
    }
}

/// One form submission received by [`FakeProvider`].
#[derive(Debug, Clone)]
pub struct Submission {
    pub number: String,
    pub message: String,
    pub api_key: String,
    pub idempotency_key: String,
}

/// Form-posting SMS provider that answers from a script, then `0`.
#[derive(Clone, Default)]
pub struct FakeProvider {
    pub received: Arc<Mutex<Vec<Submission>>>,
    pub script: Arc<Mutex<Vec<&'static str>>>,
}

async fn provider_send(
    State(p): State<FakeProvider>,
    headers: HeaderMap,
    Form(form): Form<std::collections::HashMap<String, String>>,
) -> String {
    p.received.lock().push(Submission {
        number: form.get("1").cloned().unwrap_or_default(),
        message: form.get("2").cloned().unwrap_or_default(),
        api_key: form.get("3").cloned().unwrap_or_default(),
        idempotency_key: headers
            .get("Idempotency-Key")
            .and_then(|v| v.to_str().ok())
            .unwrap_or("")
            .to_string(),
    });
    let mut script = p.script.lock();
    if script.is_empty() {
        "0".to_string()
    } else {
        script.remove(0).to_string()
    }
}

impl FakeProvider {
    /// Serves the provider on `rt` and returns its URL.
    pub fn start(&self, rt: &tokio::runtime::Runtime) -> String {
        let listener = rt.block_on(TcpListener::bind("127.0.0.1:0")).unwrap();
        let url = format!("http://{}/send", listener.local_addr().unwrap());
        let app = Router::new().route("/send", post(provider_send)).with_state(self.clone());
        rt.spawn(async move { axum::serve(listener, app).await.unwrap() });
        url
    }
}

pub fn resident_json(last: &str, first: &str, zone: u32, phone: Option<&str>) -> Value {
    serde_json::json!({
        "last_name": last,
        "first_name": first,
        "birthdate": "1990-03-15",
        "gender": "male",
        "occupation": "driver",
        "residency_status": "migrant",
        "zone_id": zone,
        "address": "12 Rizal St.",
        "mobile_number": phone,
    })
}
