//! Exhaustive check of the warning/block rules against a replay model.

use smsguard_core::guard::{FailureOutcome, GuardError, GuardState, Msisdn};
use smsguard_core::time::{SimTime, HOUR};

const GRID: [u64; 5] = [0, HOUR, 47 * HOUR, 49 * HOUR, 96 * HOUR];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Expect {
    Warned(u8),
    Blocked,
    AlreadyBlocked,
}

/// Replays failures keeping the timestamps of the live entry. An entry dies
/// once more than 48 h separate the probe from the entry's first failure.
fn oracle(times: &[u64]) -> Vec<Expect> {
    let mut live: Vec<u64> = Vec::new();
    let mut blocked = false;
    let mut out = Vec::new();
    for &t in times {
        if blocked {
            out.push(Expect::AlreadyBlocked);
            continue;
        }
        if live.first().is_some_and(|&first| t - first > 172_800) {
            live.clear();
        }
        live.push(t);
        if live.len() == 3 {
            blocked = true;
            live.clear();
            out.push(Expect::Blocked);
        } else {
            out.push(Expect::Warned(live.len() as u8));
        }
    }
    out
}

fn run(times: &[u64]) -> Vec<Expect> {
    let number = Msisdn::parse("+919000000009").unwrap();
    let mut guard = GuardState::new();
    times
        .iter()
        .map(|&t| match guard.record_failure(&number, SimTime(t)) {
            Ok(FailureOutcome::Warned(n)) => Expect::Warned(n),
            Ok(FailureOutcome::Blocked) => Expect::Blocked,
            Err(GuardError::AlreadyBlocked(_)) => Expect::AlreadyBlocked,
        })
        .collect()
}

/// Every non-decreasing sequence of length 1..=5 over the grid.
fn sequences() -> Vec<Vec<u64>> {
    fn extend(prefix: &mut Vec<u64>, from: usize, out: &mut Vec<Vec<u64>>) {
        if !prefix.is_empty() {
            out.push(prefix.clone());
        }
        if prefix.len() == 5 {
            return;
        }
        for (i, &t) in GRID.iter().enumerate().skip(from) {
            prefix.push(t);
            extend(prefix, i, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    extend(&mut Vec::new(), 0, &mut out);
    out
}

#[test]
fn matches_replay_model_on_grid() {
    let all = sequences();
    // C(5+k-1, k) for k = 1..=5
    assert_eq!(all.len(), 5 + 15 + 35 + 70 + 126);
    for times in &all {
        assert_eq!(run(times), oracle(times), "times {times:?}");
    }
}

#[test]
fn third_failure_inside_window_blocks() {
    for times in sequences() {
        if times.len() >= 3 && times[2] - times[0] <= 48 * HOUR {
            assert_eq!(run(&times)[2], Expect::Blocked, "times {times:?}");
        }
    }
}

#[test]
fn blocked_numbers_never_return_to_warnings() {
    let number = Msisdn::parse("+919000000009").unwrap();
    for times in sequences() {
        let mut guard = GuardState::new();
        let mut seen_block = false;
        for &t in &times {
            let _ = guard.record_failure(&number, SimTime(t));
            let _ = guard.sender_status(&number, SimTime(t));
            seen_block |= guard.is_blocked(&number);
            if seen_block {
                assert!(guard.is_blocked(&number));
                assert!(guard.warning(&number).is_none());
            }
        }
    }
}

#[test]
fn status_and_failure_share_a_purge_view() {
    let number = Msisdn::parse("+919000000009").unwrap();
    for times in sequences() {
        for &probe in &GRID {
            let (mut a, mut b) = (GuardState::new(), GuardState::new());
            for &t in &times {
                let _ = a.record_failure(&number, SimTime(t));
                let _ = b.record_failure(&number, SimTime(t));
            }
            if times.last().is_some_and(|&last| probe < last) {
                continue;
            }
            a.sender_status(&number, SimTime(probe));
            b.purge_expired(SimTime(probe));
            assert_eq!(a, b);
        }
    }
}
