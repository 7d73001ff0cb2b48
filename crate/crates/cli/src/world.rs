//! Executes scenario directives against a simulated network.

use std::collections::BTreeMap;
use std::path::PathBuf;

use thiserror::Error;

use smsguard_core::device::{Contact, DeviceState, Settings};
use smsguard_core::simnet::{EndpointId, EntryKind, NetworkConfig};
use smsguard_core::{Agent, Msisdn, Network};

use crate::scenario::{glob_match, Check, Directive, Scenario};
use crate::store::{self, StoreError};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("expect failed: {0}")]
    Expect(String),
    #[error("assert failed: {0}")]
    Assert(String),
    #[error("{0}")]
    Runtime(String),
    #[error(transparent)]
    Store(#[from] StoreError),
}

impl From<smsguard_core::simnet::NetError> for RunError {
    fn from(e: smsguard_core::simnet::NetError) -> Self {
        RunError::Runtime(e.to_string())
    }
}

pub struct World {
    pub net: Network,
    names: BTreeMap<String, EndpointId>,
    seed_fixed: bool,
    cursor: usize,
    printed: usize,
    state_dir: Option<PathBuf>,
}

/// Everything a scenario run produced.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunReport {
    pub transcript: Vec<String>,
    pub failures: Vec<String>,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

pub const DEFAULT_SEED: u64 = 0;

impl World {
    /// A fixed `seed` overrides any `seed` directive.
    pub fn new(seed: Option<u64>, state_dir: Option<PathBuf>) -> Self {
        World {
            net: Network::new(NetworkConfig::default(), seed.unwrap_or(DEFAULT_SEED)),
            names: BTreeMap::new(),
            seed_fixed: seed.is_some(),
            cursor: 0,
            printed: 0,
            state_dir,
        }
    }

    pub fn id(&self, party: &str) -> Option<EndpointId> {
        self.names
            .get(party)
            .copied()
            .or_else(|| Msisdn::parse(party).ok().and_then(|n| self.net.lookup(&n)))
    }

    /// A declared name becomes that endpoint's current number; anything else is literal.
    pub fn resolve(&self, party: &str) -> String {
        match self.names.get(party) {
            Some(&id) => self
                .net
                .endpoint(id)
                .map(|e| e.number().to_string())
                .unwrap_or_default(),
            None => party.to_string(),
        }
    }

    fn number(&self, party: &str) -> Result<Msisdn, RunError> {
        Msisdn::parse(&self.resolve(party)).map_err(|_| {
            RunError::Runtime(format!("{party:?} is not a known name or phone number"))
        })
    }

    pub fn device_id(&self, party: &str) -> Result<EndpointId, RunError> {
        self.id(party)
            .filter(|&id| self.net.agent(id).is_ok())
            .ok_or_else(|| RunError::Runtime(format!("{party:?} is not a device")))
    }

    pub fn device(&self, party: &str) -> Result<&DeviceState, RunError> {
        Ok(&self.net.agent(self.device_id(party)?)?.device)
    }

    fn device_mut(&mut self, party: &str) -> Result<&mut DeviceState, RunError> {
        let id = self.device_id(party)?;
        Ok(&mut self.net.agent_mut(id)?.device)
    }

    /// Transcript lines not yet returned by a previous call.
    pub fn drain_new(&mut self) -> Vec<String> {
        let fresh = self.net.transcript()[self.printed..]
            .iter()
            .map(|e| e.to_string())
            .collect();
        self.printed = self.net.transcript().len();
        fresh
    }

    pub fn register_handset(&mut self, name: &str, number: Msisdn) -> Result<EndpointId, RunError> {
        let id = self.net.register_handset(number)?;
        self.names.insert(name.to_string(), id);
        Ok(id)
    }

    pub fn execute(&mut self, directive: &Directive) -> Result<(), RunError> {
        match directive {
            Directive::Seed(seed) => {
                if !self.seed_fixed {
                    self.net.reseed(*seed);
                }
            }
            Directive::Device {
                name,
                msisdn,
                secret,
                login,
                sim,
            } => {
                let stored = match &self.state_dir {
                    Some(dir) => store::load_device(dir, msisdn)?,
                    None => None,
                };
                let device = match stored {
                    Some(device) => device,
                    None => {
                        let settings = Settings::new(secret.clone(), login.clone())
                            .map_err(|e| RunError::Runtime(e.to_string()))?;
                        let sim = sim
                            .clone()
                            .unwrap_or_else(|| format!("SIM-{}", msisdn.digits()));
                        DeviceState::new(msisdn.clone(), sim, settings)
                    }
                };
                let id = self.net.register_device(Agent::new(device))?;
                self.names.insert(name.clone(), id);
            }
            Directive::Client {
                name,
                msisdn,
                target,
                channel,
            } => {
                let device = self.device(target)?;
                let (number, activation) = (
                    device.msisdn.clone(),
                    device.settings.secret.activation_command().to_string(),
                );
                let id = self
                    .net
                    .register_client(msisdn.clone(), number, activation, *channel)?;
                self.names.insert(name.clone(), id);
            }
            Directive::Handset { name, msisdn } => {
                self.register_handset(name, msisdn.clone())?;
            }
            Directive::Contact {
                device,
                name,
                mobile,
                email,
            } => {
                self.device_mut(device)?.contacts.push(Contact {
                    name: name.clone(),
                    mobile: mobile.clone(),
                    email: email.clone(),
                });
            }
            Directive::Locate { device, lat, lon } => {
                self.device_mut(device)?.location = Some((*lat, *lon))
            }
            Directive::File { device, name } => {
                self.device_mut(device)?.user_files.push(name.clone())
            }
            Directive::Boot(device) => {
                let id = self.device_id(device)?;
                self.net.boot(id)?;
            }
            Directive::Shutdown(device) => {
                let id = self.device_id(device)?;
                self.net.shutdown(id)?;
            }
            Directive::SimSwap {
                device,
                sim,
                msisdn,
            } => {
                let id = self.device_id(device)?;
                self.net.sim_swap(id, sim, msisdn.clone())?;
            }
            Directive::Unlock { device, pin } => {
                let id = self.device_id(device)?;
                self.net.unlock(id, pin)?;
            }
            Directive::ClearBlocked(device) => {
                let id = self.device_id(device)?;
                self.net.clear_blocked(id)?;
            }
            Directive::Sms { from, to, body } => {
                let to = self.number(to)?;
                match self.id(from).filter(|&id| self.net.client(id).is_ok()) {
                    Some(client) => {
                        if self.net.client(client)?.target != to {
                            return Err(RunError::Runtime(format!(
                                "client {from} can only message its target"
                            )));
                        }
                        self.net.client_send(client, body)?;
                    }
                    None => {
                        let sender = self.resolve(from);
                        self.net.submit_sms(&sender, &to, body);
                    }
                }
            }
            Directive::Call { from, to } => {
                let (from, to) = (self.number(from)?, self.number(to)?);
                self.net.submit_call(&from, &to);
            }
            Directive::Advance(secs) => {
                self.net.advance(*secs);
            }
            Directive::Delay(secs) => self.net.config_mut().delivery_delay = *secs,
            Directive::Loss(permille) => self.net.config_mut().loss_permille = *permille,
            Directive::ExpectSms { from, to, pattern } => self.expect(from, to, pattern)?,
            Directive::Assert { device, check } => self.check(device, check)?,
        }
        Ok(())
    }

    fn party_matches(&self, wanted: &str, actual: &str) -> bool {
        if wanted == "*" {
            return true;
        }
        let wanted = self.resolve(wanted);
        match (Msisdn::parse(&wanted), Msisdn::parse(actual)) {
            (Ok(a), Ok(b)) => a == b,
            _ => wanted == actual,
        }
    }

    fn expect(&mut self, from: &str, to: &str, pattern: &str) -> Result<(), RunError> {
        let transcript = self.net.transcript();
        let hit = transcript[self.cursor..]
            .iter()
            .position(|entry| match &entry.kind {
                EntryKind::Sms {
                    from: f,
                    to: t,
                    body,
                } => {
                    self.party_matches(from, f)
                        && self.party_matches(to, t)
                        && glob_match(pattern, body)
                }
                _ => false,
            });
        match hit {
            Some(offset) => {
                self.cursor += offset + 1;
                Ok(())
            }
            None => Err(RunError::Expect(format!(
                "no SMS {}->{} matching \"{pattern}\" after transcript entry {}",
                self.resolve(from),
                self.resolve(to),
                self.cursor
            ))),
        }
    }

    fn check(&self, device: &str, check: &Check) -> Result<(), RunError> {
        let d = self.device(device)?;
        let count = |what: &str, actual: usize, wanted: usize| {
            (actual == wanted)
                .then_some(())
                .ok_or_else(|| format!("{what} is {actual}"))
        };
        let flag = |what: &str, actual: bool, wanted: bool| {
            (actual == wanted)
                .then_some(())
                .ok_or_else(|| format!("{what} is {actual}"))
        };
        let outcome = match check {
            Check::Locked => flag("locked", d.locked, true),
            Check::Unlocked => flag("locked", d.locked, false),
            Check::WifiOn => flag("wifi", d.wifi_on, true),
            Check::WifiOff => flag("wifi", d.wifi_on, false),
            Check::Silent => flag("silent", d.profile_silent, true),
            Check::NotSilent => flag("silent", d.profile_silent, false),
            Check::Flight => flag("flight", d.flight_mode, true),
            Check::NotFlight => flag("flight", d.flight_mode, false),
            Check::GpsOn => flag("gps", d.gps_tracking, true),
            Check::GpsOff => flag("gps", d.gps_tracking, false),
            Check::Blocked(who) => flag("blocked", d.guard.is_blocked(&self.number(who)?), true),
            Check::NotBlocked(who) => {
                flag("blocked", d.guard.is_blocked(&self.number(who)?), false)
            }
            Check::Warned(who, n) => {
                let fails = d
                    .guard
                    .warning(&self.number(who)?)
                    .map_or(0, |w| w.fail_count);
                count("fail count", usize::from(fails), usize::from(*n))
            }
            Check::Contacts(n) => count("contacts", d.contacts.len(), *n),
            Check::Inbox(n) => count("inbox", d.inbox.len(), *n),
            Check::CallLog(n) => count("call log", d.call_log.len(), *n),
            Check::Files(n) => count("files", d.user_files.len(), *n),
            Check::Session(None) => match d.session() {
                None => Ok(()),
                Some(s) => Err(format!("session is open with {}", s.peer)),
            },
            Check::Session(Some(who)) => {
                let who = self.number(who)?;
                match d.session() {
                    Some(s) if s.peer == who => Ok(()),
                    Some(s) => Err(format!("session is open with {}", s.peer)),
                    None => Err("no session is open".to_string()),
                }
            }
        };
        outcome.map_err(|why| RunError::Assert(format!("{device} {check}: {why}")))
    }

    pub fn save_state(&self) -> Result<(), RunError> {
        let Some(dir) = &self.state_dir else {
            return Ok(());
        };
        for (id, _) in self.net.endpoints() {
            if let Ok(agent) = self.net.agent(id) {
                store::save_device(dir, &agent.device)?;
            }
        }
        Ok(())
    }

    /// Runs every line, collecting failures instead of stopping at the first.
    pub fn run(&mut self, scenario: &Scenario) -> RunReport {
        let mut report = RunReport::default();
        for line in &scenario.lines {
            if let Err(e) = self.execute(&line.directive) {
                report.failures.push(format!("line {}: {e}", line.number));
            }
            report.transcript.extend(self.drain_new());
        }
        if let Err(e) = self.save_state() {
            report.failures.push(e.to_string());
        }
        report
    }
}

/// Parses and runs `text` with no state directory.
pub fn run_text(
    text: &str,
    seed: Option<u64>,
) -> Result<RunReport, crate::scenario::ScenarioError> {
    let scenario = crate::scenario::parse_scenario(text)?;
    let mut world = World::new(seed, None);
    Ok(world.run(&scenario))
}
