//! The device-side handlers: request listener, call handler, boot handler
//! and the periodic location reporter.
//!
//! Handlers mutate the [`DeviceState`] they own and return [`Effect`]s; they
//! never talk to the network themselves.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::command::{parse_command, Command};
use crate::device::{DeviceError, DeviceState, Feature};
use crate::guard::{validate_sender, FailureOutcome, Msisdn, SenderCheck, SenderStatus};
use crate::protocol::{
    decode_frame_with, derive_key, encode_reply, is_printable, Channel, Cipher, DecodedFrame,
    ShiftCipher, ENCRYPTED_PREFIX,
};
use crate::time::SimTime;

pub const MAX_BODY_CHARS: usize = 160;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("SMS body is {0} characters, the limit is 160")]
pub struct BodyTooLong(pub usize);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SmsMessage {
    /// Raw sender as presented by the carrier; may be an alphanumeric ID.
    pub sender: String,
    pub recipient: Msisdn,
    pub body: String,
    pub at: SimTime,
}

impl SmsMessage {
    pub fn new(
        sender: impl Into<String>,
        recipient: Msisdn,
        body: impl Into<String>,
        at: SimTime,
    ) -> Result<Self, BodyTooLong> {
        let body = body.into();
        let len = body.chars().count();
        if len > MAX_BODY_CHARS {
            return Err(BodyTooLong(len));
        }
        Ok(SmsMessage {
            sender: sender.into(),
            recipient,
            body,
            at,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Effect {
    SendSms { to: Msisdn, body: String },
    Log(String),
}

impl Effect {
    fn log(text: impl Into<String>) -> Effect {
        Effect::Log(text.into())
    }
}

fn digits(mut n: usize) -> usize {
    let mut d = 1;
    while n >= 10 {
        n /= 10;
        d += 1;
    }
    d
}

/// Splits a logical reply into parts of at most `budget` characters. Replies
/// that fit are returned unchanged; longer ones become `[i/n] `-prefixed parts.
pub fn split_reply(text: &str, budget: usize) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    if chars.len() <= budget {
        return vec![String::from(text)];
    }
    let mut parts = 2;
    let capacity = loop {
        let capacity = budget - (4 + 2 * digits(parts));
        let needed = chars.len().div_ceil(capacity);
        if digits(needed) <= digits(parts) {
            parts = needed;
            break capacity;
        }
        parts = needed;
    };
    chars
        .chunks(capacity)
        .enumerate()
        .map(|(i, chunk)| {
            let mut part = format!("[{}/{}] ", i + 1, parts);
            part.extend(chunk);
            part
        })
        .collect()
}

/// Strips a `[i/n] ` prefix, returning `(i, n, rest)`.
pub fn parse_part(body: &str) -> Option<(usize, usize, &str)> {
    let rest = body.strip_prefix('[')?;
    let (head, rest) = rest.split_once("] ")?;
    let (i, n) = head.split_once('/')?;
    let (i, n): (usize, usize) = (i.parse().ok()?, n.parse().ok()?);
    (i >= 1 && i <= n && n >= 2).then_some((i, n, rest))
}

pub fn format_location(location: Option<(f64, f64)>, now: SimTime) -> String {
    match location {
        Some((lat, lon)) => format!("LOC {lat:?},{lon:?} {}", now.iso()),
        None => String::from("LOC UNKNOWN"),
    }
}

/// The server component running on the protected device.
#[derive(Debug, Clone)]
pub struct Agent<C = ShiftCipher> {
    pub device: DeviceState,
    cipher: C,
}

impl Agent<ShiftCipher> {
    pub fn new(device: DeviceState) -> Self {
        Agent::with_cipher(device, ShiftCipher)
    }
}

impl<C: Cipher> Agent<C> {
    pub fn with_cipher(device: DeviceState, cipher: C) -> Self {
        Agent { device, cipher }
    }

    pub fn into_device(self) -> DeviceState {
        self.device
    }

    fn activation(&self) -> &str {
        self.device.settings.secret.activation_command()
    }

    /// Sends `text` to `to` on `channel`, splitting it to fit one SMS per part.
    fn send(&self, to: &Msisdn, text: &str, channel: Channel, out: &mut Vec<Effect>) {
        let budget = match channel {
            Channel::Plain => MAX_BODY_CHARS,
            Channel::Encrypted => MAX_BODY_CHARS - ENCRYPTED_PREFIX.len(),
        };
        let text: String = match channel {
            Channel::Plain => String::from(text),
            Channel::Encrypted => text
                .chars()
                .map(|c| if is_printable(c) { c } else { '?' })
                .collect(),
        };
        let key = derive_key(&self.device.settings.secret);
        for part in split_reply(&text, budget) {
            match encode_reply(&self.cipher, &part, channel, &key) {
                Ok(body) => out.push(Effect::SendSms {
                    to: to.clone(),
                    body,
                }),
                Err(e) => out.push(Effect::log(format!("SEND-FAILED {to} {e}"))),
            }
        }
    }

    /// Sends to `to`, using the session channel when `to` is the session peer.
    fn notify(&self, to: &Msisdn, text: &str, out: &mut Vec<Effect>) {
        let channel = match self.device.session() {
            Some(s) if &s.peer == to => s.channel,
            _ => Channel::Plain,
        };
        self.send(to, text, channel, out);
    }

    fn notify_peer(&self, text: &str, out: &mut Vec<Effect>) {
        if let Some(session) = self.device.session() {
            let peer = session.peer.clone();
            self.send(&peer, text, session.channel, out);
        }
    }

    pub fn handle_sms(&mut self, msg: &SmsMessage, now: SimTime) -> Vec<Effect> {
        let mut out = Vec::new();
        let is_ordinary =
            crate::protocol::classify_frame(&msg.body) == crate::protocol::FrameKind::Ordinary;

        let sender = match validate_sender(&msg.sender, &self.device.msisdn) {
            SenderCheck::Valid(sender) => sender,
            rejected => {
                if is_ordinary {
                    self.device.inbox.push(msg.clone());
                } else {
                    let why = if rejected == SenderCheck::SelfRequest {
                        "SELF-REQUEST"
                    } else {
                        "NOT-MSISDN"
                    };
                    out.push(Effect::log(format!("REJECTED {} {why}", msg.sender)));
                }
                return out;
            }
        };

        if self.device.guard.sender_status(&sender, now) == SenderStatus::Blocked {
            out.push(Effect::log(format!("DROPPED-BLOCKED {sender}")));
            return out;
        }

        let key = derive_key(&self.device.settings.secret);
        match decode_frame_with(&self.cipher, &msg.body, &key) {
            DecodedFrame::Ordinary => {
                self.device.inbox.push(msg.clone());
                self.on_ordinary(&sender, &msg.body, &mut out);
            }
            DecodedFrame::Command { text, channel } => {
                let peer = self.device.session().map(|s| s.peer.clone());
                match peer {
                    None => self.authenticate(&sender, &text, channel, now, &mut out),
                    Some(peer) if peer == sender => self.on_peer_command(&text, now, &mut out),
                    Some(_) => {
                        self.device.guard.block_now(&sender);
                        self.notify_peer(&format!("INTRUDER {sender} BLOCKED"), &mut out);
                    }
                }
            }
        }
        out
    }

    fn on_ordinary(&self, sender: &Msisdn, body: &str, out: &mut Vec<Effect>) {
        let Some(session) = self.device.session() else {
            return;
        };
        if &session.peer == sender {
            return;
        }
        let settings = &self.device.settings;
        if settings.sms_divert {
            self.notify_peer(&format!("SMS-FROM {sender}: {body}"), out);
        }
        if let Some(reply) = &settings.auto_reply {
            self.send(sender, reply, Channel::Plain, out);
        }
    }

    fn authenticate(
        &mut self,
        sender: &Msisdn,
        text: &str,
        channel: Channel,
        now: SimTime,
        out: &mut Vec<Effect>,
    ) {
        let authenticated = matches!(
            parse_command(text, self.activation()),
            Ok(Command::Connect(pin)) if pin == self.device.settings.secret.activation_pin()
        );
        if authenticated {
            self.device
                .settings
                .open_session(sender.clone(), channel, now);
            if let Err(e) = self.device.lock() {
                out.push(Effect::log(format!("LOCK-FAILED {e}")));
            }
            out.push(Effect::log(format!("SESSION-OPEN {sender} {channel}")));
            self.send(
                sender,
                &format!("CONNECTED {}", self.device.msisdn),
                channel,
                out,
            );
            return;
        }
        match self.device.guard.record_failure(sender, now) {
            Ok(FailureOutcome::Warned(n)) => {
                out.push(Effect::log(format!("AUTH-FAIL {sender} WARNED {n}")))
            }
            Ok(FailureOutcome::Blocked) => {
                out.push(Effect::log(format!("AUTH-FAIL {sender} BLOCKED")))
            }
            Err(e) => out.push(Effect::log(format!("AUTH-FAIL {e}"))),
        }
    }

    fn on_peer_command(&mut self, text: &str, now: SimTime, out: &mut Vec<Effect>) {
        match parse_command(text, self.activation()) {
            Ok(Command::Connect(pin)) if pin == self.device.settings.secret.activation_pin() => {
                self.notify_peer(&format!("CONNECTED {}", self.device.msisdn), out);
            }
            Ok(Command::Connect(_)) | Err(_) => self.notify_peer("ERR UNKNOWN-COMMAND", out),
            Ok(cmd) => out.extend(self.execute(&cmd, now)),
        }
    }

    /// Runs one command from the session peer and returns the replies.
    pub fn execute(&mut self, cmd: &Command, now: SimTime) -> Vec<Effect> {
        let mut out = Vec::new();
        let Some(session) = self.device.session().cloned() else {
            out.push(Effect::log("EXEC-WITHOUT-SESSION"));
            return out;
        };
        let canonical = cmd.render(self.activation());
        let ok = format!("OK {canonical}");
        let d = &mut self.device;
        let toggle = match cmd {
            Command::SilentOn => Some((Feature::Silent, true)),
            Command::SilentOff => Some((Feature::Silent, false)),
            Command::GpsOn => Some((Feature::Gps, true)),
            Command::GpsOff => Some((Feature::Gps, false)),
            Command::WifiOn => Some((Feature::Wifi, true)),
            Command::WifiOff => Some((Feature::Wifi, false)),
            Command::FlightOn => Some((Feature::Flight, true)),
            _ => None,
        };
        if let Some((feature, on)) = toggle {
            if let Err(e) = d.apply_toggle(feature, on) {
                out.push(Effect::log(format!("EXEC-FAILED {canonical} {e}")));
                return out;
            }
        }
        match cmd {
            Command::Connect(_) => {
                self.notify_peer(&format!("CONNECTED {}", self.device.msisdn), &mut out)
            }
            Command::SilentOn
            | Command::SilentOff
            | Command::GpsOff
            | Command::WifiOn
            | Command::WifiOff
            | Command::FlightOn => self.notify_peer(&ok, &mut out),
            Command::GpsOn => {
                self.notify_peer(&ok, &mut out);
                self.notify_peer(&format_location(self.device.location, now), &mut out);
            }
            Command::CallAlertOn | Command::CallAlertOff => {
                d.settings.call_alert = *cmd == Command::CallAlertOn;
                self.notify_peer(&ok, &mut out);
            }
            Command::SmsDivertOn | Command::SmsDivertOff => {
                d.settings.sms_divert = *cmd == Command::SmsDivertOn;
                self.notify_peer(&ok, &mut out);
            }
            Command::AutoReplyOn(message) => {
                d.settings.auto_reply = Some(message.clone());
                self.notify_peer(&ok, &mut out);
            }
            Command::AutoReplyOff => {
                d.settings.auto_reply = None;
                self.notify_peer(&ok, &mut out);
            }
            Command::ContactLookup(query) => match self.device.search_contacts(query) {
                Ok(hits) if !hits.is_empty() => {
                    for c in hits {
                        self.notify_peer(
                            &format!("CONTACT {} {} {}", c.name, c.mobile, c.email),
                            &mut out,
                        );
                    }
                }
                _ => self.notify_peer(&format!("CONTACT NOT-FOUND {query}"), &mut out),
            },
            Command::Wipeout => match d.wipeout() {
                Ok(()) => self.notify_peer(&ok, &mut out),
                Err(e) => out.push(Effect::log(format!("EXEC-FAILED {canonical} {e}"))),
            },
            Command::SignOff => {
                d.settings.session = None;
                d.locked = false;
                out.push(Effect::log(format!("SESSION-CLOSED {}", session.peer)));
                self.send(&session.peer, "SIGNED-OFF", session.channel, &mut out);
            }
        }
        out
    }

    pub fn handle_call(&mut self, caller: &Msisdn, now: SimTime) -> Vec<Effect> {
        let mut out = Vec::new();
        self.device.call_log.push(crate::device::CallRecord {
            caller: caller.clone(),
            at: now,
        });
        if self.device.settings.call_alert && self.device.session().is_some() {
            self.notify_peer(&format!("CALL-ALERT {caller} {}", now.iso()), &mut out);
        }
        out
    }

    pub fn handle_boot(&mut self, _now: SimTime) -> Result<Vec<Effect>, DeviceError> {
        if self.device.booted {
            return Err(DeviceError::AlreadyBooted);
        }
        let mut out = Vec::new();
        let d = &mut self.device;
        d.booted = true;
        if d.session().is_some() {
            d.lock()?;
        }
        out.push(Effect::log(if d.locked {
            "BOOTED LOCKED"
        } else {
            "BOOTED"
        }));
        if d.sim_id != d.last_boot_sim {
            let alert = format!(
                "SIM-CHANGED old={} new={} number={}",
                d.last_boot_sim, d.sim_id, d.msisdn
            );
            match d.settings.trusted_remote.clone() {
                Some(remote) => self.notify(&remote, &alert, &mut out),
                None => out.push(Effect::Log(alert)),
            }
        }
        self.device.last_boot_sim = self.device.sim_id.clone();
        Ok(out)
    }

    pub fn gps_tick(&mut self, now: SimTime) -> Vec<Effect> {
        let mut out = Vec::new();
        if self.device.booted && self.device.gps_tracking && self.device.session().is_some() {
            self.notify_peer(&format_location(self.device.location, now), &mut out);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::{Contact, Settings};
    use crate::protocol::{decode_reply, encode_frame, SharedSecret};
    use alloc::string::ToString;

    const DEV: &str = "+919000000001";
    const PEER: &str = "+919000000002";
    const STRANGER: &str = "+919000000003";

    fn n(s: &str) -> Msisdn {
        Msisdn::parse(s).unwrap()
    }

    fn agent() -> Agent {
        let secret = SharedSecret::new("MYDOB", "1989").unwrap();
        let mut d = DeviceState::new(n(DEV), "SIM-A", Settings::new(secret, "4321").unwrap());
        d.booted = true;
        Agent::new(d)
    }

    fn sms(agent: &mut Agent, from: &str, body: &str, at: u64) -> Vec<Effect> {
        let msg = SmsMessage::new(from, n(DEV), body, SimTime(at)).unwrap();
        agent.handle_sms(&msg, SimTime(at))
    }

    fn sent(fx: &[Effect]) -> Vec<(String, String)> {
        fx.iter()
            .filter_map(|e| match e {
                Effect::SendSms { to, body } => Some((to.to_string(), body.clone())),
                Effect::Log(_) => None,
            })
            .collect()
    }

    fn pair(to: &str, body: &str) -> (String, String) {
        (to.to_string(), body.to_string())
    }

    fn connected() -> Agent {
        let mut a = agent();
        sms(&mut a, PEER, "$MYDOB 1989", 0);
        a
    }

    #[test]
    fn connect_locks_and_confirms() {
        let mut a = agent();
        let fx = sms(&mut a, PEER, "$MYDOB 1989", 5);
        assert_eq!(sent(&fx), vec![pair(PEER, "CONNECTED +919000000001")]);
        assert!(a.device.locked);
        let s = a.device.session().unwrap();
        assert_eq!(
            (s.peer.as_str(), s.channel, s.since),
            (PEER, Channel::Plain, SimTime(5))
        );
        assert_eq!(a.device.settings.trusted_remote, Some(n(PEER)));
    }

    #[test]
    fn peer_commands() {
        let mut a = connected();
        let fx = sms(&mut a, PEER, "$WIFI-ON", 1);
        assert!(a.device.wifi_on);
        assert_eq!(sent(&fx), vec![pair(PEER, "OK $WIFI-ON")]);
        assert_eq!(
            sent(&sms(&mut a, PEER, "$FOO", 2)),
            vec![pair(PEER, "ERR UNKNOWN-COMMAND")]
        );
        assert_eq!(
            sent(&sms(&mut a, PEER, "$MYDOB 1989", 3)),
            vec![pair(PEER, "CONNECTED +919000000001")]
        );
        assert!(a.device.guard.warning(&n(PEER)).is_none());
    }

    #[test]
    fn intruder_is_blocked() {
        let mut a = connected();
        let fx = sms(&mut a, STRANGER, "$SILENT-ON", 1);
        assert_eq!(
            sent(&fx),
            vec![pair(PEER, "INTRUDER +919000000003 BLOCKED")]
        );
        assert!(!a.device.profile_silent);
        assert!(a.device.guard.is_blocked(&n(STRANGER)));
        assert!(sent(&sms(&mut a, STRANGER, "$SILENT-ON", 2)).is_empty());
    }

    #[test]
    fn divert_and_auto_reply() {
        let mut a = connected();
        sms(&mut a, PEER, "$SMSDIVERT-ON", 1);
        sms(&mut a, PEER, "$SMS-REPLY busy", 2);
        let fx = sms(&mut a, STRANGER, "hi", 3);
        assert_eq!(
            sent(&fx),
            vec![
                pair(PEER, "SMS-FROM +919000000003: hi"),
                pair(STRANGER, "busy")
            ]
        );
        assert_eq!(a.device.inbox.len(), 1);
    }

    #[test]
    fn three_wrong_pins_block_silently() {
        let mut a = agent();
        for t in [0, 10, 20] {
            assert!(sent(&sms(&mut a, STRANGER, "$MYDOB 0000", t)).is_empty());
        }
        assert!(a.device.guard.is_blocked(&n(STRANGER)));
        assert!(a.device.session().is_none());
    }

    #[test]
    fn website_sender_dropped() {
        let mut a = agent();
        let fx = sms(&mut a, "AD-WAY2SMS", "$MYDOB 1989", 0);
        assert!(sent(&fx).is_empty());
        assert!(a.device.session().is_none());
        assert_eq!(a.device.guard.warnings().count(), 0);
        assert!(a.device.inbox.is_empty());
        sms(&mut a, "AD-WAY2SMS", "50% off", 1);
        assert_eq!(a.device.inbox.len(), 1);
    }

    #[test]
    fn contact_replies() {
        let mut a = connected();
        a.device.contacts.push(Contact {
            name: "Senthilraja".into(),
            mobile: n("+919111111111"),
            email: "r@x.com".into(),
        });
        let fx = sms(&mut a, PEER, "$CONTACT raja", 1);
        assert_eq!(
            sent(&fx),
            vec![pair(PEER, "CONTACT Senthilraja +919111111111 r@x.com")]
        );
        let fx = sms(&mut a, PEER, "$CONTACT zz", 2);
        assert_eq!(sent(&fx), vec![pair(PEER, "CONTACT NOT-FOUND zz")]);
    }

    #[test]
    fn sign_off_unlocks() {
        let mut a = connected();
        let fx = sms(&mut a, PEER, "$SIGNOFF", 1);
        assert_eq!(sent(&fx), vec![pair(PEER, "SIGNED-OFF")]);
        assert!(a.device.session().is_none());
        assert!(!a.device.locked);
    }

    #[test]
    fn gps_reports() {
        let mut a = connected();
        a.device.location = Some((12.0, 79.8));
        let fx = sms(&mut a, PEER, "$GPS-ON", 1);
        assert_eq!(
            sent(&fx),
            vec![
                pair(PEER, "OK $GPS-ON"),
                pair(PEER, "LOC 12.0,79.8 2012-01-01T00:00:01Z")
            ]
        );
        assert_eq!(
            sent(&a.gps_tick(SimTime(600))),
            vec![pair(PEER, "LOC 12.0,79.8 2012-01-01T00:10:00Z")]
        );
        sms(&mut a, PEER, "$GPS-OFF", 601);
        assert!(a.gps_tick(SimTime(1200)).is_empty());

        let mut idle = agent();
        idle.device.gps_tracking = true;
        assert!(idle.gps_tick(SimTime(600)).is_empty());
    }

    #[test]
    fn call_alerts() {
        let mut a = connected();
        assert!(sent(&a.handle_call(&n(STRANGER), SimTime(600))).is_empty());
        sms(&mut a, PEER, "$CALLALERT-ON", 1);
        let fx = a.handle_call(&n(STRANGER), SimTime(600));
        assert_eq!(
            sent(&fx),
            vec![pair(PEER, "CALL-ALERT +919000000003 2012-01-01T00:10:00Z")]
        );
        assert_eq!(a.device.call_log.len(), 2);

        let mut idle = agent();
        idle.device.settings.call_alert = true;
        assert!(idle.handle_call(&n(STRANGER), SimTime(5)).is_empty());
        assert_eq!(idle.device.call_log.len(), 1);
    }

    #[test]
    fn boot_relocks_and_reports_sim_change() {
        let mut a = connected();
        a.device.shutdown().unwrap();
        a.device.locked = false;
        a.device.swap_sim("SIM-B", n("+919000000099")).unwrap();
        let fx = a.handle_boot(SimTime(10)).unwrap();
        assert!(a.device.locked);
        assert_eq!(
            sent(&fx),
            vec![pair(
                PEER,
                "SIM-CHANGED old=SIM-A new=SIM-B number=+919000000099"
            )]
        );
        assert_eq!(a.device.last_boot_sim, "SIM-B");
        assert_eq!(a.handle_boot(SimTime(11)), Err(DeviceError::AlreadyBooted));

        let mut quiet = agent();
        quiet.device.booted = false;
        assert!(sent(&quiet.handle_boot(SimTime(0)).unwrap()).is_empty());
        assert!(!quiet.device.locked);
    }

    #[test]
    fn encrypted_session_replies_are_encrypted() {
        let mut a = agent();
        let secret = SharedSecret::new("MYDOB", "1989").unwrap();
        let key = derive_key(&secret);
        let body = encode_frame("$MYDOB 1989", Channel::Encrypted, Some(&key)).unwrap();
        let fx = sms(&mut a, PEER, &body, 0);
        let (_, reply) = &sent(&fx)[0];
        assert!(reply.starts_with("$$"));
        assert_eq!(
            decode_reply(&ShiftCipher, reply, &key).unwrap(),
            "CONNECTED +919000000001"
        );
        assert_eq!(a.device.session().unwrap().channel, Channel::Encrypted);
    }

    #[test]
    fn long_replies_are_split() {
        let mut a = connected();
        sms(&mut a, PEER, "$SMSDIVERT-ON", 1);
        let long: String = "x".repeat(160);
        let fx = sms(&mut a, STRANGER, &long, 2);
        let parts = sent(&fx);
        assert_eq!(parts.len(), 2);
        assert!(parts
            .iter()
            .all(|(_, b)| b.chars().count() <= MAX_BODY_CHARS));
        assert!(parts[0].1.starts_with("[1/2] SMS-FROM"));
        let joined: String = parts
            .iter()
            .map(|(_, b)| parse_part(b).unwrap().2)
            .collect();
        assert_eq!(joined, format!("SMS-FROM {STRANGER}: {long}"));
    }

    #[test]
    fn split_boundaries() {
        let exact: String = "a".repeat(160);
        assert_eq!(split_reply(&exact, 160), vec![exact.clone()]);
        let big: String = "b".repeat(5000);
        let parts = split_reply(&big, 158);
        assert!(parts.iter().all(|p| p.chars().count() <= 158));
        assert!(parts[0].starts_with(&format!("[1/{}] ", parts.len())));
    }
}
