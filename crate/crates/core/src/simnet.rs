//! Deterministic SMS/call network.
//!
//! Events are processed in `(due_at, seq)` order where `seq` counts
//! submissions, so simultaneous events are delivered first in, first out.
//! Effects returned by endpoints are fed back into the queue.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::agent::{Agent, Effect, SmsMessage};
use crate::client::{begin_connection, ClientPhase, ClientState};
use crate::command::{parse_command, Command};
use crate::device::{DeviceError, Unlock};
use crate::guard::Msisdn;
use crate::protocol::{Channel, SharedSecret};
use crate::time::SimTime;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetError {
    #[error("{0} is already registered")]
    DuplicateNumber(Msisdn),
    #[error("no endpoint with id {0}")]
    NoSuchEndpoint(usize),
    #[error("endpoint {0} is not a device")]
    NotADevice(usize),
    #[error("endpoint {0} is not a client")]
    NotAClient(usize),
    #[error(transparent)]
    Device(#[from] DeviceError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NetworkConfig {
    /// Seconds between submission and delivery.
    pub delivery_delay: u64,
    /// Probability, in thousandths, that a message is lost in transit.
    pub loss_permille: u16,
    pub gps_interval: u64,
    /// Simulated client users type the displayed temporary PIN right away.
    pub auto_unlock_clients: bool,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            delivery_delay: 1,
            loss_permille: 0,
            gps_interval: 600,
            auto_unlock_clients: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EntryKind {
    Sms {
        from: String,
        to: String,
        body: String,
    },
    Call {
        from: String,
        to: String,
    },
    Log(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TranscriptEntry {
    pub at: SimTime,
    pub kind: EntryKind,
}

impl fmt::Display for TranscriptEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let at = self.at.iso();
        match &self.kind {
            EntryKind::Sms { from, to, body } => write!(f, "{at} SMS {from}->{to} \"{body}\""),
            EntryKind::Call { from, to } => write!(f, "{at} CALL {from}->{to}"),
            EntryKind::Log(text) => write!(f, "{at} LOG {text}"),
        }
    }
}

/// A smartphone running the client component.
#[derive(Debug, Clone)]
pub struct ClientEndpoint {
    pub own: Msisdn,
    pub target: Msisdn,
    pub activation_command: String,
    pub channel: Channel,
    pub state: Option<ClientState>,
}

/// A plain phone: whatever is typed is sent verbatim.
#[derive(Debug, Clone)]
pub struct Handset {
    pub number: Msisdn,
    pub received: Vec<SmsMessage>,
}

#[derive(Debug, Clone)]
pub enum Endpoint {
    Device(Agent),
    Client(ClientEndpoint),
    Handset(Handset),
}

impl Endpoint {
    pub fn number(&self) -> &Msisdn {
        match self {
            Endpoint::Device(a) => &a.device.msisdn,
            Endpoint::Client(c) => &c.own,
            Endpoint::Handset(h) => &h.number,
        }
    }
}

pub type EndpointId = usize;

#[derive(Debug, Clone)]
enum Event {
    DeliverSms(SmsMessage),
    DeliverCall { caller: Msisdn, callee: Msisdn },
    GpsTick(EndpointId),
}

#[derive(Debug, Clone)]
pub struct Network {
    now: SimTime,
    seq: u64,
    queue: BTreeMap<(SimTime, u64), Event>,
    endpoints: Vec<Endpoint>,
    numbers: BTreeMap<Msisdn, EndpointId>,
    transcript: Vec<TranscriptEntry>,
    rng: ChaCha8Rng,
    config: NetworkConfig,
}

impl Network {
    pub fn new(config: NetworkConfig, seed: u64) -> Self {
        Network {
            now: SimTime::EPOCH,
            seq: 0,
            queue: BTreeMap::new(),
            endpoints: Vec::new(),
            numbers: BTreeMap::new(),
            transcript: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            config,
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    /// Restarts the random stream used for loss and temporary PINs.
    pub fn reseed(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn config_mut(&mut self) -> &mut NetworkConfig {
        &mut self.config
    }

    pub fn transcript(&self) -> &[TranscriptEntry] {
        &self.transcript
    }

    pub fn endpoints(&self) -> impl Iterator<Item = (EndpointId, &Endpoint)> {
        self.endpoints.iter().enumerate()
    }

    pub fn endpoint(&self, id: EndpointId) -> Result<&Endpoint, NetError> {
        self.endpoints.get(id).ok_or(NetError::NoSuchEndpoint(id))
    }

    pub fn lookup(&self, number: &Msisdn) -> Option<EndpointId> {
        self.numbers.get(number).copied()
    }

    pub fn agent(&self, id: EndpointId) -> Result<&Agent, NetError> {
        match self.endpoint(id)? {
            Endpoint::Device(a) => Ok(a),
            _ => Err(NetError::NotADevice(id)),
        }
    }

    pub fn agent_mut(&mut self, id: EndpointId) -> Result<&mut Agent, NetError> {
        match self.endpoints.get_mut(id) {
            Some(Endpoint::Device(a)) => Ok(a),
            Some(_) => Err(NetError::NotADevice(id)),
            None => Err(NetError::NoSuchEndpoint(id)),
        }
    }

    pub fn client(&self, id: EndpointId) -> Result<&ClientEndpoint, NetError> {
        match self.endpoint(id)? {
            Endpoint::Client(c) => Ok(c),
            _ => Err(NetError::NotAClient(id)),
        }
    }

    fn schedule(&mut self, due: SimTime, event: Event) {
        self.queue.insert((due, self.seq), event);
        self.seq += 1;
    }

    fn log(&mut self, text: String) {
        self.transcript.push(TranscriptEntry {
            at: self.now,
            kind: EntryKind::Log(text),
        });
    }

    fn register(&mut self, endpoint: Endpoint) -> Result<EndpointId, NetError> {
        let number = endpoint.number().clone();
        if self.numbers.contains_key(&number) {
            return Err(NetError::DuplicateNumber(number));
        }
        let id = self.endpoints.len();
        let is_device = matches!(endpoint, Endpoint::Device(_));
        self.endpoints.push(endpoint);
        self.numbers.insert(number, id);
        if is_device {
            let due = self.now + self.config.gps_interval;
            self.schedule(due, Event::GpsTick(id));
        }
        Ok(id)
    }

    pub fn register_device(&mut self, agent: Agent) -> Result<EndpointId, NetError> {
        self.register(Endpoint::Device(agent))
    }

    pub fn register_client(
        &mut self,
        own: Msisdn,
        target: Msisdn,
        activation_command: impl Into<String>,
        channel: Channel,
    ) -> Result<EndpointId, NetError> {
        self.register(Endpoint::Client(ClientEndpoint {
            own,
            target,
            activation_command: activation_command.into(),
            channel,
            state: None,
        }))
    }

    pub fn register_handset(&mut self, number: Msisdn) -> Result<EndpointId, NetError> {
        self.register(Endpoint::Handset(Handset {
            number,
            received: Vec::new(),
        }))
    }

    /// Hands a message to the carrier. Unknown or oversized destinations are
    /// only discovered (and logged) at delivery time.
    pub fn submit_sms(&mut self, from: &str, to: &Msisdn, body: &str) {
        match SmsMessage::new(from, to.clone(), body, self.now) {
            Ok(msg) => {
                let due = self.now + self.config.delivery_delay;
                self.schedule(due, Event::DeliverSms(msg));
            }
            Err(e) => self.log(format!("REJECTED-LENGTH {from}->{to} {e}")),
        }
    }

    pub fn submit_call(&mut self, from: &Msisdn, to: &Msisdn) {
        let due = self.now + self.config.delivery_delay;
        self.schedule(
            due,
            Event::DeliverCall {
                caller: from.clone(),
                callee: to.clone(),
            },
        );
    }

    /// Text typed into a client: a connect command starts a connection,
    /// other `$` text goes out as a request on the client's channel and
    /// anything else is sent as an ordinary SMS.
    pub fn client_send(&mut self, id: EndpointId, text: &str) -> Result<(), NetError> {
        let ep = self.client(id)?.clone();
        let own = ep.own.clone();
        if !text.starts_with('$') {
            self.submit_sms(own.as_str(), &ep.target, text);
            return Ok(());
        }
        let active = ep.state.as_ref().filter(|s| s.phase == ClientPhase::Active);
        let parsed = parse_command(text, &ep.activation_command);
        let outcome = match (active, parsed) {
            (Some(state), Ok(cmd)) => state.request(&cmd).map(|e| (e, None)),
            (Some(state), Err(_)) => state.request_text(text).map(|e| (e, None)),
            (None, Ok(Command::Connect(pin))) => {
                let server = ep
                    .state
                    .as_ref()
                    .map_or(ep.target.clone(), |s| s.server.clone());
                match SharedSecret::new(ep.activation_command.clone(), pin) {
                    Ok(secret) => begin_connection(&own, server, secret, ep.channel)
                        .map(|(s, e)| (e, Some(s))),
                    Err(e) => Err(e.into()),
                }
            }
            (None, _) => Err(crate::client::ClientError::NotConnected),
        };
        match outcome {
            Ok((effect, new_state)) => {
                if let Some(state) = new_state {
                    if let Some(Endpoint::Client(c)) = self.endpoints.get_mut(id) {
                        c.state = Some(state);
                    }
                }
                self.apply_effects(id, alloc::vec![effect]);
            }
            Err(e) => self.log(format!("{own} CLIENT-ERROR {e}")),
        }
        Ok(())
    }

    pub fn boot(&mut self, id: EndpointId) -> Result<(), NetError> {
        let now = self.now;
        let effects = self.agent_mut(id)?.handle_boot(now)?;
        self.apply_effects(id, effects);
        Ok(())
    }

    pub fn shutdown(&mut self, id: EndpointId) -> Result<(), NetError> {
        self.agent_mut(id)?.device.shutdown()?;
        let number = self.agent(id)?.device.msisdn.clone();
        self.log(format!("{number} SHUTDOWN"));
        Ok(())
    }

    pub fn sim_swap(
        &mut self,
        id: EndpointId,
        sim_id: &str,
        new_number: Msisdn,
    ) -> Result<(), NetError> {
        if self.lookup(&new_number).is_some_and(|other| other != id) {
            return Err(NetError::DuplicateNumber(new_number));
        }
        let agent = self.agent_mut(id)?;
        let old = agent.device.msisdn.clone();
        agent.device.swap_sim(sim_id, new_number.clone())?;
        self.numbers.remove(&old);
        self.numbers.insert(new_number.clone(), id);
        self.log(format!("{old} SIM-SWAP {sim_id} {new_number}"));
        Ok(())
    }

    pub fn unlock(&mut self, id: EndpointId, pin: &str) -> Result<Unlock, NetError> {
        let agent = self.agent_mut(id)?;
        let outcome = agent.device.unlock(pin)?;
        let number = agent.device.msisdn.clone();
        match outcome {
            Unlock::Unlocked => self.log(format!("{number} UNLOCKED")),
            Unlock::WrongPin => self.log(format!("{number} UNLOCK-WRONG-PIN")),
        }
        Ok(outcome)
    }

    pub fn clear_blocked(&mut self, id: EndpointId) -> Result<(), NetError> {
        let agent = self.agent_mut(id)?;
        agent.device.guard.clear_blocked();
        let number = agent.device.msisdn.clone();
        self.log(format!("{number} BLOCKLIST-CLEARED"));
        Ok(())
    }

    fn apply_effects(&mut self, id: EndpointId, effects: Vec<Effect>) {
        let from = self.endpoints[id].number().clone();
        for effect in effects {
            match effect {
                Effect::SendSms { to, body } => self.submit_sms(from.as_str(), &to, &body),
                Effect::Log(text) => self.log(format!("{from} {text}")),
            }
        }
    }

    fn lost(&mut self) -> bool {
        self.config.loss_permille > 0
            && self.rng.next_u32() % 1000 < u32::from(self.config.loss_permille)
    }

    fn deliver_sms(&mut self, msg: SmsMessage) {
        let route = format!("{}->{}", msg.sender, msg.recipient);
        let Some(id) = self.lookup(&msg.recipient) else {
            self.log(format!("NO-SUCH-NUMBER {route}"));
            return;
        };
        if self.lost() {
            self.log(format!("LOST {route}"));
            return;
        }
        if let Endpoint::Device(agent) = &self.endpoints[id] {
            if !agent.device.booted {
                self.log(format!("UNDELIVERED-OFF {route}"));
                return;
            }
            if agent.device.flight_mode {
                self.log(format!("UNDELIVERED-FLIGHT {route}"));
                return;
            }
        }
        self.transcript.push(TranscriptEntry {
            at: self.now,
            kind: EntryKind::Sms {
                from: msg.sender.clone(),
                to: String::from(msg.recipient.as_str()),
                body: msg.body.clone(),
            },
        });
        let now = self.now;
        let auto_unlock = self.config.auto_unlock_clients;
        let mut effects = Vec::new();
        match &mut self.endpoints[id] {
            Endpoint::Device(agent) => effects = agent.handle_sms(&msg, now),
            Endpoint::Client(c) => match c.state.as_mut() {
                Some(state) => {
                    effects = state.handle_inbound(&msg, &mut self.rng);
                    if auto_unlock && state.phase == ClientPhase::Active && state.ui_locked {
                        let pin = state.temp_pin.clone().unwrap_or_default();
                        if state.unlock_ui(&pin) == Ok(Unlock::Unlocked) {
                            effects.push(Effect::Log(String::from("UI-UNLOCKED")));
                        }
                    }
                }
                None => effects.push(Effect::Log(format!("IGNORED {}", msg.sender))),
            },
            Endpoint::Handset(h) => h.received.push(msg),
        }
        self.apply_effects(id, effects);
    }

    fn deliver_call(&mut self, caller: Msisdn, callee: Msisdn) {
        let route = format!("{caller}->{callee}");
        let Some(id) = self.lookup(&callee) else {
            self.log(format!("NO-SUCH-NUMBER {route}"));
            return;
        };
        if let Endpoint::Device(agent) = &self.endpoints[id] {
            if !agent.device.booted {
                self.log(format!("UNDELIVERED-OFF {route}"));
                return;
            }
            if agent.device.flight_mode {
                self.log(format!("UNDELIVERED-FLIGHT {route}"));
                return;
            }
        }
        self.transcript.push(TranscriptEntry {
            at: self.now,
            kind: EntryKind::Call {
                from: String::from(caller.as_str()),
                to: String::from(callee.as_str()),
            },
        });
        let now = self.now;
        if let Endpoint::Device(agent) = &mut self.endpoints[id] {
            let effects = agent.handle_call(&caller, now);
            self.apply_effects(id, effects);
        }
    }

    fn gps_tick(&mut self, id: EndpointId) {
        let now = self.now;
        if let Endpoint::Device(agent) = &mut self.endpoints[id] {
            if agent.device.is_reachable() {
                let effects = agent.gps_tick(now);
                self.apply_effects(id, effects);
            }
        }
        let due = now + self.config.gps_interval;
        self.schedule(due, Event::GpsTick(id));
    }

    /// Runs every event due within `duration` seconds, including events
    /// caused by them, then moves the clock to the end of the window.
    pub fn advance(&mut self, duration: u64) -> Vec<TranscriptEntry> {
        let end = self.now + duration;
        let start = self.transcript.len();
        while let Some(entry) = self.queue.first_entry() {
            let (due, _) = *entry.key();
            if due > end {
                break;
            }
            let event = entry.remove();
            self.now = due;
            match event {
                Event::DeliverSms(msg) => self.deliver_sms(msg),
                Event::DeliverCall { caller, callee } => self.deliver_call(caller, callee),
                Event::GpsTick(id) => self.gps_tick(id),
            }
        }
        self.now = end;
        self.transcript[start..].to_vec()
    }
}
