//! Scenario file grammar.
//!
//! One directive per line, blank lines and `#` comments ignored:
//!
//! ```text
//! seed <int>
//! device <name> <msisdn> activation=<WORD> pin=<digits> login=<digits> [sim=<id>]
//! client <name> <msisdn> target=<devname> channel=plain|encrypted
//! handset <name> <msisdn>
//! contact <devname> "<name>" <msisdn> <email>
//! locate <devname> <lat> <lon>
//! file <devname> <name>
//! boot <devname> | shutdown <devname>
//! simswap <devname> <simid> <msisdn>
//! unlock <devname> <pin>
//! clearblocked <devname>
//! sms <from> <to> "<body>"
//! call <from> <to>
//! advance <N>(s|m|h)
//! delay <N>(s|m|h)
//! loss <permille>
//! expect sms <from> <to> "<body-with-*>"
//! assert <devname> <check>
//! ```

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use smsguard_core::protocol::{Channel, SharedSecret};
use smsguard_core::Msisdn;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct ScenarioError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Check {
    Locked,
    Unlocked,
    WifiOn,
    WifiOff,
    Silent,
    NotSilent,
    Flight,
    NotFlight,
    GpsOn,
    GpsOff,
    Blocked(String),
    NotBlocked(String),
    Warned(String, u8),
    Contacts(usize),
    Inbox(usize),
    CallLog(usize),
    Files(usize),
    Session(Option<String>),
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Check::Locked => f.write_str("locked"),
            Check::Unlocked => f.write_str("unlocked"),
            Check::WifiOn => f.write_str("wifi-on"),
            Check::WifiOff => f.write_str("wifi-off"),
            Check::Silent => f.write_str("silent"),
            Check::NotSilent => f.write_str("not-silent"),
            Check::Flight => f.write_str("flight"),
            Check::NotFlight => f.write_str("not-flight"),
            Check::GpsOn => f.write_str("gps-on"),
            Check::GpsOff => f.write_str("gps-off"),
            Check::Blocked(n) => write!(f, "blocked={n}"),
            Check::NotBlocked(n) => write!(f, "unblocked={n}"),
            Check::Warned(n, c) => write!(f, "warned={n}:{c}"),
            Check::Contacts(c) => write!(f, "contacts={c}"),
            Check::Inbox(c) => write!(f, "inbox={c}"),
            Check::CallLog(c) => write!(f, "calls={c}"),
            Check::Files(c) => write!(f, "files={c}"),
            Check::Session(None) => f.write_str("session=none"),
            Check::Session(Some(p)) => write!(f, "session={p}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Directive {
    Seed(u64),
    Device {
        name: String,
        msisdn: Msisdn,
        secret: SharedSecret,
        login: String,
        sim: Option<String>,
    },
    Client {
        name: String,
        msisdn: Msisdn,
        target: String,
        channel: Channel,
    },
    Handset {
        name: String,
        msisdn: Msisdn,
    },
    Contact {
        device: String,
        name: String,
        mobile: Msisdn,
        email: String,
    },
    Locate {
        device: String,
        lat: f64,
        lon: f64,
    },
    File {
        device: String,
        name: String,
    },
    Boot(String),
    Shutdown(String),
    SimSwap {
        device: String,
        sim: String,
        msisdn: Msisdn,
    },
    Unlock {
        device: String,
        pin: String,
    },
    ClearBlocked(String),
    Sms {
        from: String,
        to: String,
        body: String,
    },
    Call {
        from: String,
        to: String,
    },
    Advance(u64),
    Delay(u64),
    Loss(u16),
    ExpectSms {
        from: String,
        to: String,
        pattern: String,
    },
    Assert {
        device: String,
        check: Check,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Line {
    pub number: usize,
    pub directive: Directive,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Scenario {
    pub lines: Vec<Line>,
}

impl Scenario {
    pub fn seed(&self) -> Option<u64> {
        self.lines.iter().rev().find_map(|l| match l.directive {
            Directive::Seed(s) => Some(s),
            _ => None,
        })
    }
}

pub fn parse_duration(token: &str) -> Option<u64> {
    let unit = match token.chars().last()? {
        's' => 1,
        'm' => 60,
        'h' => 3600,
        _ => return None,
    };
    let digits = &token[..token.len() - 1];
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse::<u64>().ok()?.checked_mul(unit)
}

struct Cursor<'a> {
    rest: &'a str,
}

impl<'a> Cursor<'a> {
    fn word(&mut self) -> Option<&'a str> {
        let trimmed = self.rest.trim_start();
        if trimmed.is_empty() {
            return None;
        }
        let end = trimmed.find(char::is_whitespace).unwrap_or(trimmed.len());
        let (w, rest) = trimmed.split_at(end);
        self.rest = rest;
        Some(w)
    }

    /// A `"..."` token ending at a quote followed by whitespace or end of line.
    fn quoted(&mut self) -> Option<&'a str> {
        let trimmed = self.rest.trim_start();
        let inner = trimmed.strip_prefix('"')?;
        let mut search = 0;
        loop {
            let at = search + inner[search..].find('"')?;
            let after = &inner[at + 1..];
            if after.is_empty() || after.starts_with(char::is_whitespace) {
                self.rest = after;
                return Some(&inner[..at]);
            }
            search = at + 1;
        }
    }

    /// The remainder of the line as one `"..."` token, verbatim inside.
    fn quoted_tail(&mut self) -> Option<&'a str> {
        let trimmed = self.rest.trim();
        let inner = trimmed.strip_prefix('"')?.strip_suffix('"')?;
        self.rest = "";
        Some(inner)
    }

    fn done(&self) -> bool {
        self.rest.trim().is_empty()
    }
}

fn keyed<'a>(token: Option<&'a str>, key: &str) -> Result<&'a str, String> {
    token
        .and_then(|t| t.strip_prefix(key)?.strip_prefix('='))
        .ok_or_else(|| format!("expected {key}=<value>"))
}

fn msisdn(token: Option<&str>) -> Result<Msisdn, String> {
    let t = token.ok_or("expected a phone number")?;
    Msisdn::parse(t).map_err(|e| e.to_string())
}

fn name(token: Option<&str>, what: &str) -> Result<String, String> {
    token
        .map(str::to_string)
        .ok_or_else(|| format!("expected {what}"))
}

fn parse_check(token: &str) -> Result<Check, String> {
    let count = |v: &str| v.parse::<usize>().map_err(|_| format!("bad count {v:?}"));
    Ok(match token.split_once('=') {
        None => match token {
            "locked" => Check::Locked,
            "unlocked" => Check::Unlocked,
            "wifi-on" => Check::WifiOn,
            "wifi-off" => Check::WifiOff,
            "silent" => Check::Silent,
            "not-silent" => Check::NotSilent,
            "flight" => Check::Flight,
            "not-flight" => Check::NotFlight,
            "gps-on" => Check::GpsOn,
            "gps-off" => Check::GpsOff,
            other => return Err(format!("unknown check {other:?}")),
        },
        Some(("blocked", v)) => Check::Blocked(v.to_string()),
        Some(("unblocked", v)) => Check::NotBlocked(v.to_string()),
        Some(("warned", v)) => {
            let (who, n) = v
                .split_once(':')
                .ok_or("expected warned=<number>:<count>")?;
            Check::Warned(
                who.to_string(),
                n.parse().map_err(|_| format!("bad count {n:?}"))?,
            )
        }
        Some(("contacts", v)) => Check::Contacts(count(v)?),
        Some(("inbox", v)) => Check::Inbox(count(v)?),
        Some(("calls", v)) => Check::CallLog(count(v)?),
        Some(("files", v)) => Check::Files(count(v)?),
        Some(("session", "none")) => Check::Session(None),
        Some(("session", v)) => Check::Session(Some(v.to_string())),
        Some((k, _)) => return Err(format!("unknown check {k:?}")),
    })
}

pub fn parse_directive(text: &str) -> Result<Option<Directive>, String> {
    let trimmed = text.trim();
    if trimmed.is_empty() || trimmed.starts_with('#') {
        return Ok(None);
    }
    let mut c = Cursor { rest: trimmed };
    let keyword = c.word().unwrap_or_default();
    let directive = match keyword {
        "seed" => Directive::Seed(
            c.word()
                .and_then(|w| w.parse().ok())
                .ok_or("expected an integer seed")?,
        ),
        "device" => {
            let name = name(c.word(), "a device name")?;
            let msisdn = msisdn(c.word())?;
            let activation = keyed(c.word(), "activation")?;
            let pin = keyed(c.word(), "pin")?;
            let login = keyed(c.word(), "login")?.to_string();
            let sim = match c.word() {
                Some(t) => Some(keyed(Some(t), "sim")?.to_string()),
                None => None,
            };
            let secret = SharedSecret::new(activation, pin).map_err(|e| e.to_string())?;
            if !(4..=8).contains(&login.len()) || !login.bytes().all(|b| b.is_ascii_digit()) {
                return Err("login must be 4-8 digits".into());
            }
            Directive::Device {
                name,
                msisdn,
                secret,
                login,
                sim,
            }
        }
        "client" => {
            let name = name(c.word(), "a client name")?;
            let msisdn = msisdn(c.word())?;
            let target = keyed(c.word(), "target")?.to_string();
            let channel = Channel::parse(keyed(c.word(), "channel")?)
                .ok_or("channel must be plain or encrypted")?;
            Directive::Client {
                name,
                msisdn,
                target,
                channel,
            }
        }
        "handset" => Directive::Handset {
            name: name(c.word(), "a handset name")?,
            msisdn: msisdn(c.word())?,
        },
        "contact" => {
            let device = name(c.word(), "a device name")?;
            let contact = c.quoted().ok_or("expected a quoted contact name")?;
            if contact.is_empty() {
                return Err("contact name is empty".into());
            }
            Directive::Contact {
                device,
                name: contact.to_string(),
                mobile: msisdn(c.word())?,
                email: name(c.word(), "an email address")?,
            }
        }
        "locate" => {
            let device = name(c.word(), "a device name")?;
            let coord = |t: Option<&str>| {
                t.and_then(|t| t.parse::<f64>().ok())
                    .filter(|v| v.is_finite())
                    .ok_or("expected a coordinate")
            };
            Directive::Locate {
                device,
                lat: coord(c.word())?,
                lon: coord(c.word())?,
            }
        }
        "file" => Directive::File {
            device: name(c.word(), "a device name")?,
            name: name(c.word(), "a file name")?,
        },
        "boot" => Directive::Boot(name(c.word(), "a device name")?),
        "shutdown" => Directive::Shutdown(name(c.word(), "a device name")?),
        "simswap" => Directive::SimSwap {
            device: name(c.word(), "a device name")?,
            sim: name(c.word(), "a SIM id")?,
            msisdn: msisdn(c.word())?,
        },
        "unlock" => Directive::Unlock {
            device: name(c.word(), "a device name")?,
            pin: name(c.word(), "a pin")?,
        },
        "clearblocked" => Directive::ClearBlocked(name(c.word(), "a device name")?),
        "sms" => Directive::Sms {
            from: name(c.word(), "a sender")?,
            to: name(c.word(), "a recipient")?,
            body: c.quoted_tail().ok_or("expected a quoted body")?.to_string(),
        },
        "call" => Directive::Call {
            from: name(c.word(), "a caller")?,
            to: name(c.word(), "a callee")?,
        },
        "advance" => Directive::Advance(
            c.word()
                .and_then(parse_duration)
                .ok_or("expected a duration like 10s, 5m or 2h")?,
        ),
        "delay" => Directive::Delay(
            c.word()
                .and_then(parse_duration)
                .ok_or("expected a duration like 1s")?,
        ),
        "loss" => Directive::Loss(
            c.word()
                .and_then(|w| w.parse().ok())
                .filter(|p| *p <= 1000)
                .ok_or("expected a loss rate in thousandths (0-1000)")?,
        ),
        "expect" => {
            if c.word() != Some("sms") {
                return Err("only `expect sms` is supported".into());
            }
            Directive::ExpectSms {
                from: name(c.word(), "a sender")?,
                to: name(c.word(), "a recipient")?,
                pattern: c
                    .quoted_tail()
                    .ok_or("expected a quoted body pattern")?
                    .to_string(),
            }
        }
        "assert" => Directive::Assert {
            device: name(c.word(), "a device name")?,
            check: parse_check(c.word().ok_or("expected a check")?)?,
        },
        other => return Err(format!("unknown directive {other:?}")),
    };
    if !c.done() {
        return Err(format!("unexpected trailing text {:?}", c.rest.trim()));
    }
    Ok(Some(directive))
}

/// Parses every line and checks that names are declared before use.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let mut lines = Vec::new();
    let mut devices = BTreeSet::new();
    let mut names = BTreeSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let number = idx + 1;
        let fail = |message: String| ScenarioError {
            line: number,
            message,
        };
        let Some(directive) = parse_directive(raw).map_err(fail)? else {
            continue;
        };
        let device_ref = match &directive {
            Directive::Contact { device, .. }
            | Directive::Locate { device, .. }
            | Directive::File { device, .. }
            | Directive::Boot(device)
            | Directive::Shutdown(device)
            | Directive::SimSwap { device, .. }
            | Directive::Unlock { device, .. }
            | Directive::ClearBlocked(device)
            | Directive::Assert { device, .. } => Some(device.clone()),
            Directive::Client { target, .. } => Some(target.clone()),
            _ => None,
        };
        if let Some(device) = device_ref {
            if !devices.contains(&device) {
                return Err(fail(format!("{device:?} is not a declared device")));
            }
        }
        match &directive {
            Directive::Device { name, .. }
            | Directive::Client { name, .. }
            | Directive::Handset { name, .. } => {
                if !names.insert(name.clone()) {
                    return Err(fail(format!("{name:?} is declared twice")));
                }
                if matches!(directive, Directive::Device { .. }) {
                    devices.insert(name.clone());
                }
            }
            _ => {}
        }
        lines.push(Line { number, directive });
    }
    Ok(Scenario { lines })
}

/// `*` matches any run of characters; everything else is literal.
pub fn glob_match(pattern: &str, text: &str) -> bool {
    let parts: Vec<&str> = pattern.split('*').collect();
    if parts.len() == 1 {
        return pattern == text;
    }
    let (first, last) = (parts[0], parts[parts.len() - 1]);
    if !text.starts_with(first) || text.len() < first.len() + last.len() || !text.ends_with(last) {
        return false;
    }
    let mut rest = &text[first.len()..text.len() - last.len()];
    for part in &parts[1..parts.len() - 1] {
        match rest.find(part) {
            Some(at) => rest = &rest[at + part.len()..],
            None => return false,
        }
    }
    true
}
