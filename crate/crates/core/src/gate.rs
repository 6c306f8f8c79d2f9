//! Keyed minimum-interval gates shared by fetchers and search clients.

use std::collections::HashMap;
use std::sync::Arc;
use std::time::Duration;

use tokio::sync::Mutex;
use tokio::time::{sleep_until, Instant};

/// Grants at most one pass per `interval` for each key. Callers reserve a
/// slot under the lock and sleep outside it, so waiters queue in FIFO order.
#[derive(Debug, Clone)]
pub struct RateGate {
    interval: Duration,
    next: Arc<Mutex<HashMap<String, Instant>>>,
}

impl RateGate {
    pub fn new(interval: Duration) -> Self {
        Self {
            interval,
            next: Arc::new(Mutex::new(HashMap::new())),
        }
    }

    /// Gate admitting `qps` passes per second overall.
    pub fn per_second(qps: f64) -> Self {
        let interval = if qps > 0.0 && qps.is_finite() {
            Duration::from_secs_f64(1.0 / qps)
        } else {
            Duration::ZERO
        };
        Self::new(interval)
    }

    pub fn interval(&self) -> Duration {
        self.interval
    }

    /// Waits until `key` may proceed and returns the granted instant.
    pub async fn wait(&self, key: &str) -> Instant {
        if self.interval.is_zero() {
            return Instant::now();
        }
        let slot = {
            let mut next = self.next.lock().await;
            let now = Instant::now();
            let slot = next.get(key).map_or(now, |&t| t.max(now));
            next.insert(key.to_string(), slot + self.interval);
            slot
        };
        sleep_until(slot).await;
        slot
    }
}
