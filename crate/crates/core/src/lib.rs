//! Remote access and theft protection for a phone, driven entirely by SMS.
//!
//! The crate is `no_std` (it needs `alloc`) and free of IO. It contains:
//!
//! * [`protocol`]: `$$`/`$` frame classification and the keyed-shift cipher
//! * [`command`]: the command vocabulary and its canonical text
//! * [`guard`]: sender validation, the 48 hour warning list and the block list
//! * [`device`]: the simulated handset and its `key=value` state codec
//! * [`agent`]: request, call, boot and GPS handlers producing [`agent::Effect`]s
//! * [`client`]: the remote controlling smartphone
//! * [`simnet`]: a deterministic discrete-event SMS/call network
#![no_std]

extern crate alloc;

pub mod agent;
pub mod client;
pub mod command;
pub mod device;
pub mod guard;
pub mod protocol;
pub mod simnet;
pub mod time;

pub use agent::{Agent, Effect, SmsMessage};
pub use client::{ClientPhase, ClientState};
pub use command::Command;
pub use device::{Contact, DeviceState};
pub use guard::{GuardState, Msisdn};
pub use protocol::{Channel, CipherKey, FrameKind, SharedSecret};
pub use simnet::{Network, TranscriptEntry};
pub use time::SimTime;
