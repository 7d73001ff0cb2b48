//! Sender validation and authentication-failure accounting.
//!
//! A number that fails authentication is put on the warning list. The entry
//! lives for 48 hours from its first failure; a third failure while it lives
//! moves the number to the permanent block list.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use core::cmp::Ordering;
use core::fmt;
use core::hash::{Hash, Hasher};

use thiserror::Error;

use crate::time::{SimTime, HOUR};

pub const WARNING_LIFETIME_SECS: u64 = 48 * HOUR;
pub const FAILURES_BEFORE_BLOCK: u8 = 3;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{0:?} is not a subscriber number")]
pub struct NotMsisdn(pub String);

/// A subscriber number: optional `+` then 7 to 15 digits.
///
/// Equality, ordering and hashing ignore the `+`; the original spelling is
/// kept for display.
#[derive(Debug, Clone)]
pub struct Msisdn(String);

impl Msisdn {
    pub fn parse(raw: &str) -> Result<Msisdn, NotMsisdn> {
        let digits = raw.strip_prefix('+').unwrap_or(raw);
        if (7..=15).contains(&digits.len()) && digits.bytes().all(|b| b.is_ascii_digit()) {
            Ok(Msisdn(String::from(raw)))
        } else {
            Err(NotMsisdn(String::from(raw)))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn digits(&self) -> &str {
        self.0.strip_prefix('+').unwrap_or(&self.0)
    }
}

impl PartialEq for Msisdn {
    fn eq(&self, other: &Self) -> bool {
        self.digits() == other.digits()
    }
}

impl Eq for Msisdn {}

impl PartialOrd for Msisdn {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Msisdn {
    fn cmp(&self, other: &Self) -> Ordering {
        self.digits().cmp(other.digits())
    }
}

impl Hash for Msisdn {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.digits().hash(state);
    }
}

impl fmt::Display for Msisdn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl core::str::FromStr for Msisdn {
    type Err = NotMsisdn;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Msisdn::parse(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SenderCheck {
    Valid(Msisdn),
    NotMsisdn,
    SelfRequest,
}

pub fn validate_sender(sender: &str, self_number: &Msisdn) -> SenderCheck {
    match Msisdn::parse(sender) {
        Err(_) => SenderCheck::NotMsisdn,
        Ok(number) if &number == self_number => SenderCheck::SelfRequest,
        Ok(number) => SenderCheck::Valid(number),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SenderStatus {
    Allowed,
    Blocked,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureOutcome {
    Warned(u8),
    Blocked,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GuardError {
    #[error("{0} is already blocked")]
    AlreadyBlocked(Msisdn),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WarningEntry {
    pub number: Msisdn,
    pub fail_count: u8,
    pub first_fail_at: SimTime,
}

impl WarningEntry {
    fn expired(&self, now: SimTime) -> bool {
        now.saturating_since(self.first_fail_at) > WARNING_LIFETIME_SECS
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GuardState {
    warnings: BTreeMap<Msisdn, WarningEntry>,
    blocked: BTreeSet<Msisdn>,
}

impl GuardState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Rebuilds a state from stored parts, keeping the warning/block disjointness.
    pub fn from_parts(
        warnings: impl IntoIterator<Item = WarningEntry>,
        blocked: impl IntoIterator<Item = Msisdn>,
    ) -> Self {
        let blocked: BTreeSet<Msisdn> = blocked.into_iter().collect();
        let warnings = warnings
            .into_iter()
            .filter(|w| {
                !blocked.contains(&w.number) && (1..FAILURES_BEFORE_BLOCK).contains(&w.fail_count)
            })
            .map(|w| (w.number.clone(), w))
            .collect();
        GuardState { warnings, blocked }
    }

    pub fn warnings(&self) -> impl Iterator<Item = &WarningEntry> {
        self.warnings.values()
    }

    pub fn warning(&self, number: &Msisdn) -> Option<&WarningEntry> {
        self.warnings.get(number)
    }

    pub fn blocked(&self) -> impl Iterator<Item = &Msisdn> {
        self.blocked.iter()
    }

    pub fn is_blocked(&self, number: &Msisdn) -> bool {
        self.blocked.contains(number)
    }

    pub fn purge_expired(&mut self, now: SimTime) {
        self.warnings.retain(|_, entry| !entry.expired(now));
    }

    pub fn sender_status(&mut self, number: &Msisdn, now: SimTime) -> SenderStatus {
        self.purge_expired(now);
        if self.blocked.contains(number) {
            SenderStatus::Blocked
        } else {
            SenderStatus::Allowed
        }
    }

    pub fn record_failure(
        &mut self,
        number: &Msisdn,
        now: SimTime,
    ) -> Result<FailureOutcome, GuardError> {
        if self.blocked.contains(number) {
            return Err(GuardError::AlreadyBlocked(number.clone()));
        }
        self.purge_expired(now);
        let Some(entry) = self.warnings.get_mut(number) else {
            self.warnings.insert(
                number.clone(),
                WarningEntry {
                    number: number.clone(),
                    fail_count: 1,
                    first_fail_at: now,
                },
            );
            return Ok(FailureOutcome::Warned(1));
        };
        if entry.fail_count + 1 < FAILURES_BEFORE_BLOCK {
            entry.fail_count += 1;
            Ok(FailureOutcome::Warned(entry.fail_count))
        } else {
            self.warnings.remove(number);
            self.blocked.insert(number.clone());
            Ok(FailureOutcome::Blocked)
        }
    }

    pub fn block_now(&mut self, number: &Msisdn) {
        self.warnings.remove(number);
        self.blocked.insert(number.clone());
    }

    pub fn clear_blocked(&mut self) {
        self.blocked.clear();
    }
}
