//! The protected handset.

mod persist;

pub use persist::{load, save, ParseError, FORMAT_TAG};

use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use crate::agent::SmsMessage;
use crate::guard::{GuardState, Msisdn};
use crate::protocol::{is_pin, Channel, SharedSecret};
use crate::time::SimTime;

/// Maximum number of contacts returned by one lookup.
pub const CONTACT_RESULT_CAP: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DeviceError {
    #[error("device is powered off")]
    NotBooted,
    #[error("device is already booted")]
    AlreadyBooted,
    #[error("SIM can only be changed while the device is powered off")]
    DeviceBooted,
    #[error("device is not locked")]
    NotLocked,
    #[error("contact query is empty")]
    EmptyQuery,
    #[error("flight mode can only be left by unlocking the device")]
    FlightOffUnsupported,
    #[error("invalid login pin: expected 4-8 digits")]
    InvalidLoginPin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Feature {
    Silent,
    Wifi,
    Gps,
    Flight,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unlock {
    Unlocked,
    WrongPin,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Session {
    pub peer: Msisdn,
    pub channel: Channel,
    pub since: SimTime,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Settings {
    pub secret: SharedSecret,
    login_pin: String,
    pub call_alert: bool,
    pub sms_divert: bool,
    pub auto_reply: Option<String>,
    pub session: Option<Session>,
    pub trusted_remote: Option<Msisdn>,
}

impl Settings {
    pub fn new(secret: SharedSecret, login_pin: impl Into<String>) -> Result<Self, DeviceError> {
        let login_pin = login_pin.into();
        if !is_pin(&login_pin, 4, 8) {
            return Err(DeviceError::InvalidLoginPin);
        }
        Ok(Settings {
            secret,
            login_pin,
            call_alert: false,
            sms_divert: false,
            auto_reply: None,
            session: None,
            trusted_remote: None,
        })
    }

    pub fn login_pin(&self) -> &str {
        &self.login_pin
    }

    /// Starts a session with `peer`; the peer also becomes the trusted remote.
    pub fn open_session(&mut self, peer: Msisdn, channel: Channel, since: SimTime) {
        self.trusted_remote = Some(peer.clone());
        self.session = Some(Session {
            peer,
            channel,
            since,
        });
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Contact {
    pub name: String,
    pub mobile: Msisdn,
    pub email: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallRecord {
    pub caller: Msisdn,
    pub at: SimTime,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceState {
    pub msisdn: Msisdn,
    pub sim_id: String,
    pub booted: bool,
    pub locked: bool,
    pub profile_silent: bool,
    pub wifi_on: bool,
    pub gps_tracking: bool,
    pub flight_mode: bool,
    pub location: Option<(f64, f64)>,
    pub contacts: Vec<Contact>,
    pub inbox: Vec<SmsMessage>,
    pub call_log: Vec<CallRecord>,
    pub user_files: Vec<String>,
    pub settings: Settings,
    pub guard: GuardState,
    pub last_boot_sim: String,
}

impl DeviceState {
    /// A powered-off handset whose last boot saw `sim_id`.
    pub fn new(msisdn: Msisdn, sim_id: impl Into<String>, settings: Settings) -> Self {
        let sim_id = sim_id.into();
        DeviceState {
            msisdn,
            last_boot_sim: sim_id.clone(),
            sim_id,
            booted: false,
            locked: false,
            profile_silent: false,
            wifi_on: false,
            gps_tracking: false,
            flight_mode: false,
            location: None,
            contacts: Vec::new(),
            inbox: Vec::new(),
            call_log: Vec::new(),
            user_files: Vec::new(),
            settings,
            guard: GuardState::new(),
        }
    }

    fn ensure_booted(&self) -> Result<(), DeviceError> {
        if self.booted {
            Ok(())
        } else {
            Err(DeviceError::NotBooted)
        }
    }

    pub fn session(&self) -> Option<&Session> {
        self.settings.session.as_ref()
    }

    /// Whether the radio accepts inbound SMS and calls.
    pub fn is_reachable(&self) -> bool {
        self.booted && !self.flight_mode
    }

    pub fn apply_toggle(&mut self, feature: Feature, on: bool) -> Result<(), DeviceError> {
        self.ensure_booted()?;
        match feature {
            Feature::Silent => self.profile_silent = on,
            Feature::Wifi => self.wifi_on = on,
            Feature::Gps => self.gps_tracking = on,
            Feature::Flight if on => self.flight_mode = true,
            Feature::Flight => return Err(DeviceError::FlightOffUnsupported),
        }
        Ok(())
    }

    pub fn lock(&mut self) -> Result<(), DeviceError> {
        self.ensure_booted()?;
        self.locked = true;
        Ok(())
    }

    /// Local unlock by the owner. Ends any remote session and leaves flight mode.
    pub fn unlock(&mut self, pin: &str) -> Result<Unlock, DeviceError> {
        if !self.locked {
            return Err(DeviceError::NotLocked);
        }
        if pin != self.settings.login_pin {
            return Ok(Unlock::WrongPin);
        }
        self.locked = false;
        self.settings.session = None;
        self.flight_mode = false;
        Ok(Unlock::Unlocked)
    }

    /// Erases user data. Settings, guard lists, session and toggles survive
    /// because the application lives on internal storage.
    pub fn wipeout(&mut self) -> Result<(), DeviceError> {
        self.ensure_booted()?;
        self.contacts.clear();
        self.inbox.clear();
        self.call_log.clear();
        self.user_files.clear();
        Ok(())
    }

    pub fn search_contacts(&self, query: &str) -> Result<Vec<Contact>, DeviceError> {
        if query.trim().is_empty() {
            return Err(DeviceError::EmptyQuery);
        }
        let needle = query.to_lowercase();
        Ok(self
            .contacts
            .iter()
            .filter(|c| c.name.to_lowercase().contains(&needle))
            .take(CONTACT_RESULT_CAP)
            .cloned()
            .collect())
    }

    pub fn swap_sim(
        &mut self,
        new_sim: impl Into<String>,
        new_msisdn: Msisdn,
    ) -> Result<(), DeviceError> {
        if self.booted {
            return Err(DeviceError::DeviceBooted);
        }
        self.sim_id = new_sim.into();
        self.msisdn = new_msisdn;
        Ok(())
    }

    pub fn shutdown(&mut self) -> Result<(), DeviceError> {
        self.ensure_booted()?;
        self.booted = false;
        Ok(())
    }
}
