//! Simulated time. Seconds since 2012-01-01T00:00:00Z.

use alloc::string::String;
use core::fmt;
use core::ops::{Add, Sub};

use chrono::{NaiveDate, NaiveDateTime, TimeDelta};

pub const MINUTE: u64 = 60;
pub const HOUR: u64 = 60 * MINUTE;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SimTime(pub u64);

fn epoch() -> NaiveDateTime {
    NaiveDate::from_ymd_opt(2012, 1, 1)
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .expect("valid epoch")
}

impl SimTime {
    pub const EPOCH: SimTime = SimTime(0);

    pub fn seconds(self) -> u64 {
        self.0
    }

    pub fn saturating_since(self, earlier: SimTime) -> u64 {
        self.0.saturating_sub(earlier.0)
    }

    /// ISO-8601 UTC rendering, e.g. `2012-01-01T00:10:00Z`.
    pub fn iso(self) -> String {
        let secs = i64::try_from(self.0).unwrap_or(i64::MAX);
        let at = TimeDelta::try_seconds(secs)
            .and_then(|d| epoch().checked_add_signed(d))
            .unwrap_or(NaiveDateTime::MAX);
        alloc::format!("{}", at.format("%Y-%m-%dT%H:%M:%SZ"))
    }
}

impl Add<u64> for SimTime {
    type Output = SimTime;
    fn add(self, rhs: u64) -> SimTime {
        SimTime(self.0.saturating_add(rhs))
    }
}

impl Sub for SimTime {
    type Output = u64;
    fn sub(self, rhs: SimTime) -> u64 {
        self.saturating_since(rhs)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.iso())
    }
}
