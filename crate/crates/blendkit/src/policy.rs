//! Run-time enforcement of server policies: the sliding hourly budget and
//! too-many-calls snooze-then-probe recovery.
//!
//! Time is monotonic seconds from the injected [`Clock`]. The budget
//! window is the half-open interval `(now - 3600, now]`: a request
//! admitted at time `t` stops counting once `t + 3600 <= now`.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use thiserror::Error;

use crate::clock::Clock;
use crate::description::PolicySpec;
use crate::transport::{TransportError, TransportResponse};

const WINDOW: Duration = Duration::from_secs(3600);

/// Why a request must wait.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WaitReason {
    HourlyBudget,
    Snoozing,
}

impl fmt::Display for WaitReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WaitReason::HourlyBudget => "hourly_budget",
            WaitReason::Snoozing => "snoozing",
        })
    }
}

/// Verdict of an admission check. `Wait.seconds` is always positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Admission {
    Proceed,
    Wait { seconds: Duration, reason: WaitReason },
}

/// Per-server admission bookkeeping: timestamps of admitted requests
/// within the window, plus the active snooze if any.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicyState {
    server_name: String,
    admitted: Vec<Duration>,
    snooze_until: Option<Duration>,
}

impl PolicyState {
    pub fn new(server_name: &str) -> PolicyState {
        PolicyState {
            server_name: server_name.to_owned(),
            admitted: Vec::new(),
            snooze_until: None,
        }
    }

    pub fn server_name(&self) -> &str {
        &self.server_name
    }

    /// Admitted timestamps still inside the window as of the last call.
    pub fn admitted_timestamps(&self) -> &[Duration] {
        &self.admitted
    }

    fn prune(&mut self, now: Duration) {
        self.admitted.retain(|ts| *ts + WINDOW > now);
        if matches!(self.snooze_until, Some(until) if until <= now) {
            self.snooze_until = None;
        }
    }

    /// Decide whether a request may go out at `now`. Does not record the
    /// request; repeated calls without [`record_request`] give the same
    /// answer.
    ///
    /// [`record_request`]: PolicyState::record_request
    pub fn admit(&mut self, policy: &PolicySpec, now: Duration) -> Admission {
        self.prune(now);
        if let Some(until) = self.snooze_until {
            return Admission::Wait {
                seconds: until - now,
                reason: WaitReason::Snoozing,
            };
        }
        if let Some(limit) = policy.requests_per_hour {
            if self.admitted.len() >= limit as usize {
                let oldest = self.admitted[0];
                return Admission::Wait {
                    seconds: oldest + WINDOW - now,
                    reason: WaitReason::HourlyBudget,
                };
            }
        }
        Admission::Proceed
    }

    /// Record a request that [`admit`](PolicyState::admit) let through at
    /// this same `now`.
    pub fn record_request(&mut self, now: Duration) {
        self.admitted.push(now);
    }

    /// Record the response's status: the configured too-many-calls code
    /// starts a snooze, anything else clears it.
    pub fn record_response(&mut self, policy: &PolicySpec, status: u16, now: Duration) {
        match policy.too_many_calls_response_code {
            Some(code) if status == code => {
                let waiting = policy.too_many_calls_waiting_seconds.unwrap_or(0);
                self.snooze_until = Some(now + Duration::from_secs(waiting));
            }
            _ => self.snooze_until = None,
        }
    }
}

/// Shared, internally synchronized policy state for one server. All
/// sessions targeting that server go through the same gate.
pub struct PolicyGate {
    state: Mutex<PolicyState>,
}

impl PolicyGate {
    pub fn new(server_name: &str) -> PolicyGate {
        PolicyGate {
            state: Mutex::new(PolicyState::new(server_name)),
        }
    }

    /// Admit and, on Proceed, record the request as one atomic step.
    pub fn admit_and_record(&self, policy: &PolicySpec, now: Duration) -> Admission {
        let mut state = self.state.lock().expect("policy state");
        let admission = state.admit(policy, now);
        if admission == Admission::Proceed {
            state.record_request(now);
        }
        admission
    }

    pub fn record_response(&self, policy: &PolicySpec, status: u16, now: Duration) {
        self.state
            .lock()
            .expect("policy state")
            .record_response(policy, status, now);
    }

    pub fn snapshot(&self) -> PolicyState {
        self.state.lock().expect("policy state").clone()
    }
}

/// Catalog-scoped registry handing out one gate per server name.
#[derive(Default)]
pub struct PolicyRegistry {
    gates: Mutex<HashMap<String, Arc<PolicyGate>>>,
}

impl PolicyRegistry {
    pub fn new() -> PolicyRegistry {
        PolicyRegistry::default()
    }

    pub fn gate(&self, server_name: &str) -> Arc<PolicyGate> {
        let mut gates = self.gates.lock().expect("policy registry");
        Arc::clone(
            gates
                .entry(server_name.to_owned())
                .or_insert_with(|| Arc::new(PolicyGate::new(server_name))),
        )
    }
}

/// The policied request loop gave up or could not talk to the server.
#[derive(Debug, Error)]
pub enum AwaitError {
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("gave up on {server:?} after {probes} too-many-calls responses")]
    Exhausted { server: String, probes: u32 },
}

/// Block (on the injected clock) until the gate admits a request, and
/// record it. Used for requests that need admission but no probe loop,
/// like authentication calls to a policied server.
pub fn await_admission(gate: &PolicyGate, policy: &PolicySpec, clock: &dyn Clock) {
    let server = gate.snapshot().server_name().to_owned();
    loop {
        match gate.admit_and_record(policy, clock.now()) {
            Admission::Proceed => return,
            Admission::Wait { seconds, reason } => {
                log::info!(
                    "snooze server={server} reason={reason} wait_seconds={}",
                    seconds.as_secs()
                );
                clock.sleep(seconds);
            }
        }
    }
}

/// Send a request under the policy: wait out admission delays, record
/// every physical attempt, and on a too-many-calls response snooze and
/// probe again, up to `max_probes` consecutive limited responses.
pub fn await_and_retry<F>(
    gate: &PolicyGate,
    policy: &PolicySpec,
    clock: &dyn Clock,
    max_probes: u32,
    mut attempt: F,
) -> Result<TransportResponse, AwaitError>
where
    F: FnMut() -> Result<TransportResponse, TransportError>,
{
    let server = gate.snapshot().server_name().to_owned();
    let mut probes = 0u32;
    loop {
        await_admission(gate, policy, clock);
        let response = attempt()?;
        gate.record_response(policy, response.status, clock.now());
        let limited =
            matches!(policy.too_many_calls_response_code, Some(code) if response.status == code);
        if !limited {
            return Ok(response);
        }
        probes += 1;
        if probes >= max_probes {
            return Err(AwaitError::Exhausted { server, probes });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::ScriptedClock;

    fn secs(n: u64) -> Duration {
        Duration::from_secs(n)
    }

    fn budget(limit: u32) -> PolicySpec {
        PolicySpec {
            requests_per_hour: Some(limit),
            ..PolicySpec::default()
        }
    }

    fn snoozing_policy(code: u16, waiting: u64) -> PolicySpec {
        PolicySpec {
            requests_per_hour: None,
            too_many_calls_response_code: Some(code),
            too_many_calls_waiting_seconds: Some(waiting),
        }
    }

    fn ok_response(status: u16) -> TransportResponse {
        TransportResponse {
            status,
            headers: Vec::new(),
            body: Vec::new(),
        }
    }

    #[test]
    fn empty_state_proceeds() {
        let mut state = PolicyState::new("s");
        assert_eq!(state.admit(&budget(1), secs(0)), Admission::Proceed);
    }

    #[test]
    fn exhausted_budget_waits_until_the_oldest_expires() {
        let mut state = PolicyState::new("s");
        for t in [0, 1, 2] {
            assert_eq!(state.admit(&budget(3), secs(t)), Admission::Proceed);
            state.record_request(secs(t));
        }
        assert_eq!(
            state.admit(&budget(3), secs(10)),
            Admission::Wait {
                seconds: secs(3590),
                reason: WaitReason::HourlyBudget
            }
        );
    }

    #[test]
    fn no_limit_always_proceeds() {
        let mut state = PolicyState::new("s");
        for t in 0..100 {
            assert_eq!(state.admit(&PolicySpec::default(), secs(t)), Admission::Proceed);
            state.record_request(secs(t));
        }
    }

    #[test]
    fn window_expiry_frees_the_budget() {
        let mut state = PolicyState::new("s");
        state.record_request(secs(0));
        assert_eq!(state.admit(&budget(1), secs(3601)), Admission::Proceed);
    }

    #[test]
    fn active_snooze_wins_over_everything() {
        let mut state = PolicyState::new("s");
        state.record_response(&snoozing_policy(420, 60), 420, secs(0));
        assert_eq!(
            state.admit(&snoozing_policy(420, 60), secs(0)),
            Admission::Wait {
                seconds: secs(60),
                reason: WaitReason::Snoozing
            }
        );
    }

    #[test]
    fn non_limited_status_clears_the_snooze() {
        let policy = snoozing_policy(420, 60);
        let mut state = PolicyState::new("s");
        state.record_response(&policy, 420, secs(0));
        state.record_response(&policy, 200, secs(1));
        assert_eq!(state.admit(&policy, secs(1)), Admission::Proceed);
    }

    #[test]
    fn detection_disabled_means_no_snooze() {
        let mut state = PolicyState::new("s");
        state.record_response(&PolicySpec::default(), 429, secs(0));
        assert_eq!(state.admit(&PolicySpec::default(), secs(0)), Admission::Proceed);
    }

    #[test]
    fn admit_without_record_is_observationally_read_only() {
        let mut state = PolicyState::new("s");
        state.record_request(secs(0));
        let first = state.admit(&budget(1), secs(5));
        for _ in 0..10 {
            assert_eq!(state.admit(&budget(1), secs(5)), first);
        }
    }

    #[test]
    fn gate_admits_and_records_atomically() {
        let gate = PolicyGate::new("s");
        assert_eq!(gate.admit_and_record(&budget(1), secs(0)), Admission::Proceed);
        assert!(matches!(
            gate.admit_and_record(&budget(1), secs(1)),
            Admission::Wait { .. }
        ));
    }

    #[test]
    fn registry_shares_one_gate_per_server() {
        let registry = PolicyRegistry::new();
        let a = registry.gate("s");
        let b = registry.gate("s");
        assert!(Arc::ptr_eq(&a, &b));
        let other = registry.gate("t");
        assert!(!Arc::ptr_eq(&a, &other));
    }

    #[test]
    fn retry_sleeps_through_two_limited_responses() {
        let clock = ScriptedClock::new();
        let gate = PolicyGate::new("s");
        let policy = snoozing_policy(420, 10);
        let script = [420, 420, 200];
        let mut calls = 0;
        let response = await_and_retry(&gate, &policy, &clock, 3, || {
            let status = script[calls];
            calls += 1;
            Ok(ok_response(status))
        })
        .unwrap();
        assert_eq!(response.status, 200);
        assert_eq!(calls, 3);
        assert_eq!(clock.sleeps(), vec![secs(10), secs(10)]);
    }

    #[test]
    fn clean_response_needs_no_sleep() {
        let clock = ScriptedClock::new();
        let gate = PolicyGate::new("s");
        let mut calls = 0;
        let response = await_and_retry(&gate, &snoozing_policy(420, 10), &clock, 3, || {
            calls += 1;
            Ok(ok_response(200))
        })
        .unwrap();
        assert_eq!((response.status, calls), (200, 1));
        assert!(clock.sleeps().is_empty());
    }

    #[test]
    fn permanent_limiting_exhausts_after_max_probes() {
        let clock = ScriptedClock::new();
        let gate = PolicyGate::new("s");
        let mut calls = 0;
        let err = await_and_retry(&gate, &snoozing_policy(420, 10), &clock, 3, || {
            calls += 1;
            Ok(ok_response(420))
        })
        .unwrap_err();
        assert!(matches!(err, AwaitError::Exhausted { probes: 3, .. }));
        assert_eq!(calls, 3);
    }

    #[test]
    fn transport_errors_pass_straight_through() {
        let clock = ScriptedClock::new();
        let gate = PolicyGate::new("s");
        let mut calls = 0;
        let err = await_and_retry(&gate, &PolicySpec::default(), &clock, 3, || {
            calls += 1;
            Err(TransportError {
                message: "connection refused".to_owned(),
            })
        })
        .unwrap_err();
        assert!(matches!(err, AwaitError::Transport(_)));
        assert_eq!(calls, 1);
    }

    #[test]
    fn budget_wait_resumes_after_the_window_frees_up() {
        let clock = ScriptedClock::new();
        let gate = PolicyGate::new("s");
        let policy = budget(1);
        assert_eq!(
            await_and_retry(&gate, &policy, &clock, 3, || Ok(ok_response(200)))
                .unwrap()
                .status,
            200
        );
        let response = await_and_retry(&gate, &policy, &clock, 3, || Ok(ok_response(200))).unwrap();
        assert_eq!(response.status, 200);
        assert_eq!(clock.sleeps(), vec![secs(3600)]);
        assert_eq!(clock.now(), secs(3600));
    }
}
