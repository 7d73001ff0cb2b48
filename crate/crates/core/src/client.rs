//! The remote smartphone that controls a protected device.
//!
//! After the device confirms a connection the client draws a temporary
//! 4-digit PIN and locks its own interface until that PIN is entered.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand_core::RngCore;
use thiserror::Error;

use crate::agent::{parse_part, Effect, SmsMessage};
use crate::command::Command;
use crate::device::Unlock;
use crate::guard::Msisdn;
use crate::protocol::{
    decode_reply, derive_key, encode_frame, Channel, CipherKey, ProtocolError, SharedSecret,
    ShiftCipher,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClientError {
    #[error("cannot connect to own number")]
    SelfTarget,
    #[error("no active connection")]
    NotConnected,
    #[error("client interface is locked")]
    UiLocked,
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClientPhase {
    AwaitingConfirmation,
    Active,
    Ended,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClientState {
    pub own: Msisdn,
    pub server: Msisdn,
    pub secret: SharedSecret,
    pub channel: Channel,
    pub phase: ClientPhase,
    pub temp_pin: Option<String>,
    pub ui_locked: bool,
    pub missed_calls: Vec<(String, String)>,
    pub inbox_mirror: Vec<(String, String)>,
    pub contact_results: Vec<String>,
    pub location_reports: Vec<String>,
    /// SIM-change and intrusion notices.
    pub alerts: Vec<String>,
    parts: BTreeMap<usize, String>,
    parts_total: usize,
}

pub fn begin_connection(
    own: &Msisdn,
    server: Msisdn,
    secret: SharedSecret,
    channel: Channel,
) -> Result<(ClientState, Effect), ClientError> {
    if &server == own {
        return Err(ClientError::SelfTarget);
    }
    let key = derive_key(&secret);
    let body = encode_frame(&secret.connect_text(), channel, Some(&key))?;
    let state = ClientState {
        own: own.clone(),
        server: server.clone(),
        secret,
        channel,
        phase: ClientPhase::AwaitingConfirmation,
        temp_pin: None,
        ui_locked: false,
        missed_calls: Vec::new(),
        inbox_mirror: Vec::new(),
        contact_results: Vec::new(),
        location_reports: Vec::new(),
        alerts: Vec::new(),
        parts: BTreeMap::new(),
        parts_total: 0,
    };
    Ok((state, Effect::SendSms { to: server, body }))
}

impl ClientState {
    fn key(&self) -> CipherKey {
        derive_key(&self.secret)
    }

    pub fn handle_inbound<R: RngCore + ?Sized>(
        &mut self,
        msg: &SmsMessage,
        rng: &mut R,
    ) -> Vec<Effect> {
        let Some(text) = decode_reply(&ShiftCipher, &msg.body, &self.key()) else {
            return vec![Effect::Log(format!("UNDECODABLE {}", msg.sender))];
        };
        let from_server = msg.sender == self.server.as_str()
            || Msisdn::parse(&msg.sender).is_ok_and(|s| s == self.server);
        if text.starts_with("SIM-CHANGED ") {
            return self.on_sim_changed(&msg.sender, &text);
        }
        if !from_server {
            return vec![Effect::Log(format!("IGNORED {}", msg.sender))];
        }
        let text = match parse_part(&text) {
            Some((i, n, rest)) => match self.reassemble(i, n, rest) {
                Some(full) => full,
                None => return Vec::new(),
            },
            None => text,
        };
        self.interpret(&text, rng)
    }

    fn reassemble(&mut self, index: usize, total: usize, rest: &str) -> Option<String> {
        if total != self.parts_total {
            self.parts.clear();
            self.parts_total = total;
        }
        self.parts.insert(index, String::from(rest));
        if self.parts.len() < total {
            return None;
        }
        let full = self.parts.values().map(String::as_str).collect();
        self.parts.clear();
        self.parts_total = 0;
        Some(full)
    }

    fn on_sim_changed(&mut self, sender: &str, text: &str) -> Vec<Effect> {
        let new_number = text
            .split(' ')
            .find_map(|field| field.strip_prefix("number="))
            .and_then(|n| Msisdn::parse(n).ok());
        // The alert is sent from the device's new number.
        if let Some(number) = new_number.filter(|n| Msisdn::parse(sender).is_ok_and(|s| &s == n)) {
            self.server = number;
        }
        self.alerts.push(String::from(text));
        vec![Effect::Log(format!("ALERT {text}"))]
    }

    fn interpret<R: RngCore + ?Sized>(&mut self, text: &str, rng: &mut R) -> Vec<Effect> {
        if self.phase == ClientPhase::AwaitingConfirmation {
            if text.starts_with("CONNECTED ") {
                let pin = format!("{:04}", rng.next_u32() % 10_000);
                self.temp_pin = Some(pin.clone());
                self.ui_locked = true;
                self.phase = ClientPhase::Active;
                return vec![Effect::Log(format!("TEMP-PIN {pin}"))];
            }
            return vec![Effect::Log(format!("IGNORED-UNCONFIRMED {text}"))];
        }
        if let Some(rest) = text.strip_prefix("CALL-ALERT ") {
            let (number, at) = rest.split_once(' ').unwrap_or((rest, ""));
            self.missed_calls
                .push((String::from(number), String::from(at)));
        } else if let Some(rest) = text.strip_prefix("SMS-FROM ") {
            let (sender, body) = rest.split_once(": ").unwrap_or((rest, ""));
            self.inbox_mirror
                .push((String::from(sender), String::from(body)));
        } else if let Some(rest) = text.strip_prefix("CONTACT ") {
            self.contact_results.push(String::from(rest));
        } else if let Some(rest) = text.strip_prefix("LOC ") {
            self.location_reports.push(String::from(rest));
        } else if text == "SIGNED-OFF" {
            self.phase = ClientPhase::Ended;
        } else if text.starts_with("INTRUDER ") {
            self.alerts.push(String::from(text));
            return vec![Effect::Log(format!("ALERT {text}"))];
        } else if !(text.starts_with("OK ")
            || text.starts_with("ERR ")
            || text.starts_with("CONNECTED "))
        {
            return vec![Effect::Log(format!("UNRECOGNIZED {text}"))];
        }
        Vec::new()
    }

    fn ready(&self) -> Result<(), ClientError> {
        if self.phase != ClientPhase::Active {
            return Err(ClientError::NotConnected);
        }
        if self.ui_locked {
            return Err(ClientError::UiLocked);
        }
        Ok(())
    }

    pub fn request(&self, cmd: &Command) -> Result<Effect, ClientError> {
        self.request_text(&cmd.render(self.secret.activation_command()))
    }

    /// Sends arbitrary `$`-prefixed text on the session channel.
    pub fn request_text(&self, command_text: &str) -> Result<Effect, ClientError> {
        self.ready()?;
        let body = encode_frame(command_text, self.channel, Some(&self.key()))?;
        Ok(Effect::SendSms {
            to: self.server.clone(),
            body,
        })
    }

    pub fn unlock_ui(&mut self, pin: &str) -> Result<Unlock, ClientError> {
        if self.phase != ClientPhase::Active {
            return Err(ClientError::NotConnected);
        }
        if self.temp_pin.as_deref() == Some(pin) {
            self.ui_locked = false;
            Ok(Unlock::Unlocked)
        } else {
            Ok(Unlock::WrongPin)
        }
    }
}
