//! Time sources. All time-dependent behavior in this crate flows through
//! [`Clock`] so that tests run in virtual time.

use std::sync::Mutex;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

/// Abstract source of monotonic time plus a sleep capability.
///
/// `now` is monotone non-decreasing and measured from an arbitrary epoch
/// fixed at clock construction. `unix_now` exists only for values that must
/// survive the process (token expiries persisted to disk).
pub trait Clock: Send + Sync {
    /// Monotonic time elapsed since the clock's epoch.
    fn now(&self) -> Duration;

    /// Block until `wait` has elapsed on this clock.
    fn sleep(&self, wait: Duration);

    /// Wall-clock seconds since the Unix epoch.
    fn unix_now(&self) -> u64;
}

/// Real clock backed by [`Instant`] and [`std::thread::sleep`].
#[derive(Debug)]
pub struct SystemClock {
    origin: Instant,
}

impl SystemClock {
    pub fn new() -> Self {
        SystemClock {
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

    fn sleep(&self, wait: Duration) {
        std::thread::sleep(wait);
    }

    fn unix_now(&self) -> u64 {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0)
    }
}

/// Virtual clock for tests: `sleep` advances time instantly and every sleep
/// is recorded so tests can assert on the waits a component performed.
#[derive(Debug)]
pub struct ScriptedClock {
    state: Mutex<ScriptedState>,
    unix_base: u64,
}

#[derive(Debug)]
struct ScriptedState {
    now: Duration,
    sleeps: Vec<Duration>,
}

impl ScriptedClock {
    pub fn new() -> Self {
        Self::with_unix_base(1_000_000)
    }

    /// A scripted clock whose `unix_now` starts at `unix_base`.
    pub fn with_unix_base(unix_base: u64) -> Self {
        ScriptedClock {
            state: Mutex::new(ScriptedState {
                now: Duration::ZERO,
                sleeps: Vec::new(),
            }),
            unix_base,
        }
    }

    /// Advance virtual time without recording a sleep.
    pub fn advance(&self, by: Duration) {
        self.state.lock().unwrap().now += by;
    }

    /// Every duration passed to `sleep` so far, in order.
    pub fn sleeps(&self) -> Vec<Duration> {
        self.state.lock().unwrap().sleeps.clone()
    }
}

impl Default for ScriptedClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for ScriptedClock {
    fn now(&self) -> Duration {
        self.state.lock().unwrap().now
    }

    fn sleep(&self, wait: Duration) {
        let mut state = self.state.lock().unwrap();
        state.now += wait;
        state.sleeps.push(wait);
    }

    fn unix_now(&self) -> u64 {
        self.unix_base + self.state.lock().unwrap().now.as_secs()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scripted_clock_advances_on_sleep() {
        let clock = ScriptedClock::new();
        assert_eq!(clock.now(), Duration::ZERO);
        clock.sleep(Duration::from_secs(10));
        clock.advance(Duration::from_secs(5));
        assert_eq!(clock.now(), Duration::from_secs(15));
        assert_eq!(clock.sleeps(), vec![Duration::from_secs(10)]);
    }

    #[test]
    fn scripted_unix_time_tracks_virtual_time() {
        let clock = ScriptedClock::with_unix_base(500);
        clock.advance(Duration::from_secs(30));
        assert_eq!(clock.unix_now(), 530);
    }

    #[test]
    fn system_clock_is_monotone() {
        let clock = SystemClock::new();
        let a = clock.now();
        let b = clock.now();
        assert!(b >= a);
    }
}
