//! Line-oriented `key=value` codec for [`DeviceState`].
//!
//! Keys are sorted lexicographically, one record per line. List stores are
//! written as `<store>.<index>.<field>` plus a `<store>.count` record.
//! Optional values are written as an empty value when absent. Values escape
//! `\` as `\\`, newline as `\n` and carriage return as `\r`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use thiserror::Error;

use super::{CallRecord, Contact, DeviceState, Session, Settings};
use crate::agent::SmsMessage;
use crate::guard::{GuardState, Msisdn, WarningEntry};
use crate::protocol::{Channel, SharedSecret};
use crate::time::SimTime;

pub const FORMAT_TAG: &str = "smsguard-device-1";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {reason}")]
pub struct ParseError {
    pub line: usize,
    pub reason: String,
}

fn escape(value: &str) -> String {
    let mut out = String::with_capacity(value.len());
    for c in value.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

fn unescape(value: &str) -> Option<String> {
    let mut out = String::with_capacity(value.len());
    let mut chars = value.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next()? {
            '\\' => out.push('\\'),
            'n' => out.push('\n'),
            'r' => out.push('\r'),
            _ => return None,
        }
    }
    Some(out)
}

struct Writer(BTreeMap<String, String>);

impl Writer {
    fn put(&mut self, key: impl Into<String>, value: impl fmt::Display) {
        self.0.insert(key.into(), value.to_string());
    }

    fn put_opt<T: fmt::Display>(&mut self, key: &str, value: Option<T>) {
        match value {
            Some(v) => self.put(key, v),
            None => self.put(key, ""),
        }
    }

    fn list<T>(&mut self, store: &str, items: &[T], mut each: impl FnMut(&mut Self, &str, &T)) {
        self.put(format!("{store}.count"), items.len());
        for (i, item) in items.iter().enumerate() {
            each(self, &format!("{store}.{i}"), item);
        }
    }
}

pub fn save(d: &DeviceState) -> String {
    let mut w = Writer(BTreeMap::new());
    w.put("format", FORMAT_TAG);
    w.put("msisdn", &d.msisdn);
    w.put("sim_id", &d.sim_id);
    w.put("last_boot_sim", &d.last_boot_sim);
    w.put("booted", d.booted);
    w.put("locked", d.locked);
    w.put("profile_silent", d.profile_silent);
    w.put("wifi_on", d.wifi_on);
    w.put("gps_tracking", d.gps_tracking);
    w.put("flight_mode", d.flight_mode);
    w.put_opt(
        "location",
        d.location.map(|(lat, lon)| format!("{lat:?},{lon:?}")),
    );

    w.list("contacts", &d.contacts, |w, p, c| {
        w.put(format!("{p}.name"), &c.name);
        w.put(format!("{p}.mobile"), &c.mobile);
        w.put(format!("{p}.email"), &c.email);
    });
    w.list("inbox", &d.inbox, |w, p, m| {
        w.put(format!("{p}.sender"), &m.sender);
        w.put(format!("{p}.recipient"), &m.recipient);
        w.put(format!("{p}.body"), &m.body);
        w.put(format!("{p}.at"), m.at.0);
    });
    w.list("call_log", &d.call_log, |w, p, c| {
        w.put(format!("{p}.caller"), &c.caller);
        w.put(format!("{p}.at"), c.at.0);
    });
    w.list("user_files", &d.user_files, |w, p, f| w.put(p, f));

    let s = &d.settings;
    w.put("settings.activation_command", s.secret.activation_command());
    w.put("settings.activation_pin", s.secret.activation_pin());
    w.put("settings.login_pin", &s.login_pin);
    w.put("settings.call_alert", s.call_alert);
    w.put("settings.sms_divert", s.sms_divert);
    w.put_opt("settings.auto_reply", s.auto_reply.as_ref());
    w.put_opt("settings.trusted_remote", s.trusted_remote.as_ref());
    w.put_opt("settings.session.peer", s.session.as_ref().map(|x| &x.peer));
    w.put_opt(
        "settings.session.channel",
        s.session.as_ref().map(|x| x.channel),
    );
    w.put_opt(
        "settings.session.since",
        s.session.as_ref().map(|x| x.since.0),
    );

    let warnings: Vec<&WarningEntry> = d.guard.warnings().collect();
    w.list("guard.warnings", &warnings, |w, p, e| {
        w.put(format!("{p}.number"), &e.number);
        w.put(format!("{p}.fail_count"), e.fail_count);
        w.put(format!("{p}.first_fail_at"), e.first_fail_at.0);
    });
    let blocked: Vec<&Msisdn> = d.guard.blocked().collect();
    w.list("guard.blocked", &blocked, |w, p, n| w.put(p, n));

    let mut out = String::new();
    for (key, value) in &w.0 {
        out.push_str(key);
        out.push('=');
        out.push_str(&escape(value));
        out.push('\n');
    }
    out
}

struct Reader {
    records: BTreeMap<String, (usize, String)>,
    eof_line: usize,
}

impl Reader {
    fn parse(text: &str) -> Result<Self, ParseError> {
        let mut records = BTreeMap::new();
        let mut last = 0;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            last = line;
            if raw.is_empty() {
                continue;
            }
            let (key, value) = raw.split_once('=').ok_or_else(|| ParseError {
                line,
                reason: "expected key=value".into(),
            })?;
            let value = unescape(value).ok_or_else(|| ParseError {
                line,
                reason: "invalid escape sequence".into(),
            })?;
            if records.insert(key.to_string(), (line, value)).is_some() {
                return Err(ParseError {
                    line,
                    reason: format!("duplicate key {key}"),
                });
            }
        }
        Ok(Reader {
            records,
            eof_line: last + 1,
        })
    }

    fn raw(&mut self, key: &str) -> Result<(usize, String), ParseError> {
        self.records.remove(key).ok_or_else(|| ParseError {
            line: self.eof_line,
            reason: format!("missing key {key}"),
        })
    }

    fn text(&mut self, key: &str) -> Result<String, ParseError> {
        self.raw(key).map(|(_, v)| v)
    }

    fn get<T>(
        &mut self,
        key: &str,
        parse: impl FnOnce(&str) -> Option<T>,
    ) -> Result<T, ParseError> {
        let (line, value) = self.raw(key)?;
        parse(&value).ok_or_else(|| ParseError {
            line,
            reason: format!("invalid value for {key}: {value:?}"),
        })
    }

    fn opt<T>(
        &mut self,
        key: &str,
        parse: impl FnOnce(&str) -> Option<T>,
    ) -> Result<Option<T>, ParseError> {
        self.get(key, |v| {
            if v.is_empty() {
                Some(None)
            } else {
                parse(v).map(Some)
            }
        })
    }

    fn flag(&mut self, key: &str) -> Result<bool, ParseError> {
        self.get(key, |v| match v {
            "true" => Some(true),
            "false" => Some(false),
            _ => None,
        })
    }

    fn num<T: FromStr>(&mut self, key: &str) -> Result<T, ParseError> {
        self.get(key, |v| v.parse().ok())
    }

    fn time(&mut self, key: &str) -> Result<SimTime, ParseError> {
        self.num(key).map(SimTime)
    }

    fn msisdn(&mut self, key: &str) -> Result<Msisdn, ParseError> {
        self.get(key, |v| Msisdn::parse(v).ok())
    }

    fn list<T>(
        &mut self,
        store: &str,
        mut each: impl FnMut(&mut Self, &str) -> Result<T, ParseError>,
    ) -> Result<Vec<T>, ParseError> {
        let count: usize = self.num(&format!("{store}.count"))?;
        (0..count)
            .map(|i| each(self, &format!("{store}.{i}")))
            .collect()
    }

    fn finish(self) -> Result<(), ParseError> {
        match self.records.iter().min_by_key(|(_, (line, _))| *line) {
            Some((key, (line, _))) => Err(ParseError {
                line: *line,
                reason: format!("unexpected key {key}"),
            }),
            None => Ok(()),
        }
    }
}

fn parse_location(v: &str) -> Option<(f64, f64)> {
    let (lat, lon) = v.split_once(',')?;
    let (lat, lon): (f64, f64) = (lat.parse().ok()?, lon.parse().ok()?);
    (lat.is_finite() && lon.is_finite()).then_some((lat, lon))
}

pub fn load(text: &str) -> Result<DeviceState, ParseError> {
    let mut r = Reader::parse(text)?;
    r.get("format", |v| (v == FORMAT_TAG).then_some(()))?;

    let secret = {
        let (line, word) = r.raw("settings.activation_command")?;
        let pin = r.text("settings.activation_pin")?;
        SharedSecret::new(word, pin).map_err(|e| ParseError {
            line,
            reason: e.to_string(),
        })?
    };
    let (pin_line, login_pin) = r.raw("settings.login_pin")?;
    let mut settings = Settings::new(secret, login_pin).map_err(|e| ParseError {
        line: pin_line,
        reason: e.to_string(),
    })?;
    settings.call_alert = r.flag("settings.call_alert")?;
    settings.sms_divert = r.flag("settings.sms_divert")?;
    settings.auto_reply = r.opt("settings.auto_reply", |v| Some(v.to_string()))?;
    settings.trusted_remote = r.opt("settings.trusted_remote", |v| Msisdn::parse(v).ok())?;
    let peer = r.opt("settings.session.peer", |v| Msisdn::parse(v).ok())?;
    let channel = r.opt("settings.session.channel", Channel::parse)?;
    let since = r.opt("settings.session.since", |v| v.parse().ok().map(SimTime))?;
    settings.session = match (peer, channel, since) {
        (Some(peer), Some(channel), Some(since)) => Some(Session {
            peer,
            channel,
            since,
        }),
        (None, None, None) => None,
        _ => {
            return Err(ParseError {
                line: r.eof_line,
                reason: "incomplete session record".into(),
            })
        }
    };

    let warnings = r.list("guard.warnings", |r, p| {
        Ok(WarningEntry {
            number: r.msisdn(&format!("{p}.number"))?,
            fail_count: r.get(&format!("{p}.fail_count"), |v| {
                v.parse().ok().filter(|n| (1..=2).contains(n))
            })?,
            first_fail_at: r.time(&format!("{p}.first_fail_at"))?,
        })
    })?;
    let blocked = r.list("guard.blocked", |r, p| r.msisdn(p))?;

    let msisdn = r.msisdn("msisdn")?;
    let sim_id = r.text("sim_id")?;
    let mut d = DeviceState::new(msisdn, sim_id, settings);
    d.guard = GuardState::from_parts(warnings, blocked);
    d.last_boot_sim = r.text("last_boot_sim")?;
    d.booted = r.flag("booted")?;
    d.locked = r.flag("locked")?;
    d.profile_silent = r.flag("profile_silent")?;
    d.wifi_on = r.flag("wifi_on")?;
    d.gps_tracking = r.flag("gps_tracking")?;
    d.flight_mode = r.flag("flight_mode")?;
    d.location = r.opt("location", parse_location)?;

    d.contacts = r.list("contacts", |r, p| {
        Ok(Contact {
            name: r.get(&format!("{p}.name"), |v| {
                (!v.is_empty()).then(|| v.to_string())
            })?,
            mobile: r.msisdn(&format!("{p}.mobile"))?,
            email: r.text(&format!("{p}.email"))?,
        })
    })?;
    d.inbox = r.list("inbox", |r, p| {
        let sender = r.text(&format!("{p}.sender"))?;
        let recipient = r.msisdn(&format!("{p}.recipient"))?;
        let (line, body) = r.raw(&format!("{p}.body"))?;
        let at = r.time(&format!("{p}.at"))?;
        SmsMessage::new(sender, recipient, body, at).map_err(|e| ParseError {
            line,
            reason: e.to_string(),
        })
    })?;
    d.call_log = r.list("call_log", |r, p| {
        Ok(CallRecord {
            caller: r.msisdn(&format!("{p}.caller"))?,
            at: r.time(&format!("{p}.at"))?,
        })
    })?;
    d.user_files = r.list("user_files", |r, p| r.text(p))?;

    r.finish()?;
    Ok(d)
}
