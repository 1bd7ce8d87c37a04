use std::sync::Mutex;
use std::time::{Duration, Instant};

use chrono::{DateTime, Utc};

/// Time source used for politeness delays, retry backoff and timestamps.
pub trait Clock: Send + Sync {
    /// Monotonic time since an arbitrary origin.
    fn now(&self) -> Duration;
    fn sleep(&self, duration: Duration);
    fn utc_now(&self) -> DateTime<Utc>;
}

#[derive(Debug)]
pub struct SystemClock {
    origin: Instant,
}

impl SystemClock {
    pub fn new() -> Self {
        Self {
            origin: Instant::now(),
        }
    }
}

impl Default for SystemClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for SystemClock {
    fn now(&self) -> Duration {
        self.origin.elapsed()
    }

    fn sleep(&self, duration: Duration) {
        std::thread::sleep(duration)
    }

    fn utc_now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

#[derive(Debug, Default)]
struct ManualState {
    elapsed: Duration,
    sleeps: Vec<Duration>,
}

/// A clock that only moves when someone sleeps on it. Sleeps return
/// immediately and are recorded.
///
/// With `frozen_wall` the UTC timestamp stays at the start instant no matter
/// how much virtual time passes, which keeps artifacts byte-stable when
/// several workers sleep in nondeterministic order.
#[derive(Debug)]
pub struct ManualClock {
    start: DateTime<Utc>,
    frozen_wall: bool,
    state: Mutex<ManualState>,
}

impl ManualClock {
    pub fn new(start: DateTime<Utc>) -> Self {
        Self {
            start,
            frozen_wall: false,
            state: Mutex::new(ManualState::default()),
        }
    }

    pub fn frozen_wall(start: DateTime<Utc>) -> Self {
        Self {
            frozen_wall: true,
            ..Self::new(start)
        }
    }

    pub fn advance(&self, by: Duration) {
        self.state.lock().unwrap().elapsed += by;
    }

    pub fn sleeps(&self) -> Vec<Duration> {
        self.state.lock().unwrap().sleeps.clone()
    }
}

impl Clock for ManualClock {
    fn now(&self) -> Duration {
        self.state.lock().unwrap().elapsed
    }

    fn sleep(&self, duration: Duration) {
        let mut state = self.state.lock().unwrap();
        state.elapsed += duration;
        state.sleeps.push(duration);
    }

    fn utc_now(&self) -> DateTime<Utc> {
        if self.frozen_wall {
            return self.start;
        }
        let elapsed = self.state.lock().unwrap().elapsed;
        self.start + chrono::Duration::from_std(elapsed).unwrap_or(chrono::Duration::zero())
    }
}
