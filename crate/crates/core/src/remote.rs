//! Blocking JSON-over-HTTP client shared by the remote embedder and the remote
//! generator: bearer auth, bounded concurrency and retry with backoff.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde_json::Value;

use crate::error::{Error, Result};

pub(crate) const API_KEY_VAR: &str = "KGSMILE_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub initial_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            initial_backoff: Duration::from_millis(250),
        }
    }
}

struct Gate {
    in_flight: Mutex<usize>,
    freed: Condvar,
    cap: usize,
}

impl Gate {
    fn acquire(&self) -> GateGuard<'_> {
        let mut n = self.in_flight.lock().expect("gate mutex poisoned");
        while *n >= self.cap {
            n = self.freed.wait(n).expect("gate mutex poisoned");
        }
        *n += 1;
        GateGuard(self)
    }
}

struct GateGuard<'a>(&'a Gate);

impl Drop for GateGuard<'_> {
    fn drop(&mut self) {
        *self.0.in_flight.lock().expect("gate mutex poisoned") -= 1;
        self.0.freed.notify_one();
    }
}

pub(crate) struct JsonClient {
    agent: ureq::Agent,
    endpoint: String,
    api_key: Option<String>,
    retry: RetryPolicy,
    gate: Gate,
    next_id: AtomicU64,
}

impl std::fmt::Debug for JsonClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("JsonClient")
            .field("endpoint", &self.endpoint)
            .field("retry", &self.retry)
            .finish_non_exhaustive()
    }
}

impl JsonClient {
    pub(crate) fn new(endpoint: &str, timeout: Duration, max_in_flight: usize, retry: RetryPolicy) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            agent,
            endpoint: endpoint.to_owned(),
            api_key: std::env::var(API_KEY_VAR).ok().filter(|k| !k.is_empty()),
            retry,
            gate: Gate {
                in_flight: Mutex::new(0),
                freed: Condvar::new(),
                cap: max_in_flight.max(1),
            },
            next_id: AtomicU64::new(1),
        }
    }

    /// POSTs `body`, retrying transport errors, 429 and 5xx responses.
    pub(crate) fn post(&self, body: &Value) -> Result<Value> {
        let _slot = self.gate.acquire();
        let id = self.next_id.fetch_add(1, Ordering::Relaxed);
        let mut backoff = self.retry.initial_backoff;
        let mut attempt = 1;
        loop {
            match self.post_once(body, id) {
                Err(e) if e.is_retryable() && attempt < self.retry.max_attempts => {
                    log::warn!("request {id} attempt {attempt} failed: {e}; retrying");
                    std::thread::sleep(backoff);
                    backoff *= 2;
                    attempt += 1;
                }
                other => return other,
            }
        }
    }

    fn post_once(&self, body: &Value, id: u64) -> Result<Value> {
        let mut request = self
            .agent
            .post(&self.endpoint)
            .header("X-Request-Id", id.to_string());
        if let Some(key) = &self.api_key {
            request = request.header("Authorization", format!("Bearer {key}"));
        }
        let mut response = request.send_json(body).map_err(|e| Error::Remote {
            message: format!("request {id}: {e}"),
            retryable: true,
        })?;
        let status = response.status().as_u16();
        if !(200..300).contains(&status) {
            return Err(Error::Remote {
                message: format!("request {id}: HTTP {status}"),
                retryable: status == 429 || status >= 500,
            });
        }
        response.body_mut().read_json::<Value>().map_err(|e| Error::Remote {
            message: format!("request {id}: malformed response body: {e}"),
            retryable: false,
        })
    }
}
