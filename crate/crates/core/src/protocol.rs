//! Frame classification and the channel cipher.
//!
//! A command SMS is either encrypted (`$$` followed by ciphertext of the
//! command without its leading `$`) or plain (`$` followed by the command).
//! Anything else is an ordinary message.

use alloc::string::String;
use core::fmt;

use thiserror::Error;

/// Lowest and highest printable codepoints handled by the cipher.
const PRINTABLE_LOW: u32 = 32;
const PRINTABLE_HIGH: u32 = 126;
const ALPHABET_LEN: u32 = PRINTABLE_HIGH - PRINTABLE_LOW + 1;

pub const ENCRYPTED_PREFIX: &str = "$$";
pub const COMMAND_PREFIX: char = '$';

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("character {found:?} at position {position} is outside the printable range")]
    NonPrintableInput { position: usize, found: char },
    #[error("encrypted channel requires a key")]
    MissingKey,
    #[error("command text must begin with `$`")]
    MalformedCommandText,
    #[error("invalid activation command {0:?}: expected 1-16 uppercase letters")]
    InvalidActivationCommand(String),
    #[error("invalid activation pin {0:?}: expected 4-8 digits")]
    InvalidActivationPin(String),
    #[error("invalid cipher key")]
    InvalidKey,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameKind {
    EncryptedCommand,
    PlainCommand,
    Ordinary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Channel {
    Encrypted,
    Plain,
}

impl Channel {
    pub fn as_str(self) -> &'static str {
        match self {
            Channel::Encrypted => "encrypted",
            Channel::Plain => "plain",
        }
    }

    pub fn parse(s: &str) -> Option<Channel> {
        match s {
            "encrypted" => Some(Channel::Encrypted),
            "plain" => Some(Channel::Plain),
            _ => None,
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Words that may not serve as an activation command because they collide
/// with an argument-taking keyword (`$CONTACT 1234` would be ambiguous).
const RESERVED_ACTIVATION: &[&str] = &["CONTACT"];

pub(crate) fn is_pin(s: &str, min: usize, max: usize) -> bool {
    (min..=max).contains(&s.len()) && s.bytes().all(|b| b.is_ascii_digit())
}

/// The activation command and activation PIN shared by device and owner.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SharedSecret {
    activation_command: String,
    activation_pin: String,
}

impl SharedSecret {
    pub fn new(
        activation_command: impl Into<String>,
        activation_pin: impl Into<String>,
    ) -> Result<Self, ProtocolError> {
        let activation_command = activation_command.into();
        let activation_pin = activation_pin.into();
        let word_ok = (1..=16).contains(&activation_command.len())
            && activation_command.bytes().all(|b| b.is_ascii_uppercase())
            && !RESERVED_ACTIVATION.contains(&activation_command.as_str());
        if !word_ok {
            return Err(ProtocolError::InvalidActivationCommand(activation_command));
        }
        if !is_pin(&activation_pin, 4, 8) {
            return Err(ProtocolError::InvalidActivationPin(activation_pin));
        }
        Ok(SharedSecret {
            activation_command,
            activation_pin,
        })
    }

    pub fn activation_command(&self) -> &str {
        &self.activation_command
    }

    pub fn activation_pin(&self) -> &str {
        &self.activation_pin
    }

    /// The connect command text, `$<COMMAND> <PIN>`.
    pub fn connect_text(&self) -> String {
        alloc::format!("${} {}", self.activation_command, self.activation_pin)
    }
}

/// A non-empty key of printable characters.
#[derive(Clone, PartialEq, Eq)]
pub struct CipherKey(String);

impl CipherKey {
    pub fn new(key: impl Into<String>) -> Result<Self, ProtocolError> {
        let key = key.into();
        if key.is_empty() || !key.chars().all(is_printable) {
            return Err(ProtocolError::InvalidKey);
        }
        Ok(CipherKey(key))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for CipherKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("CipherKey(..)")
    }
}

pub fn derive_key(secret: &SharedSecret) -> CipherKey {
    let mut key =
        String::with_capacity(secret.activation_command.len() + secret.activation_pin.len());
    key.push_str(&secret.activation_command);
    key.push_str(&secret.activation_pin);
    CipherKey(key)
}

pub fn is_printable(c: char) -> bool {
    (PRINTABLE_LOW..=PRINTABLE_HIGH).contains(&(c as u32))
}

/// A reversible text transform applied to the payload of `$$` frames.
pub trait Cipher {
    fn encrypt(&self, plain: &str, key: &CipherKey) -> Result<String, ProtocolError>;
    fn decrypt(&self, cipher: &str, key: &CipherKey) -> Result<String, ProtocolError>;
}

/// Position-keyed shift over the 95 printable ASCII characters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ShiftCipher;

impl ShiftCipher {
    fn apply(text: &str, key: &CipherKey, forward: bool) -> Result<String, ProtocolError> {
        let key = key.0.as_bytes();
        let mut out = String::with_capacity(text.len());
        for (position, c) in text.chars().enumerate() {
            if !is_printable(c) {
                return Err(ProtocolError::NonPrintableInput { position, found: c });
            }
            let value = c as u32 - PRINTABLE_LOW;
            let shift = u32::from(key[position % key.len()]) - PRINTABLE_LOW;
            let shifted = if forward {
                (value + shift) % ALPHABET_LEN
            } else {
                (value + ALPHABET_LEN - shift) % ALPHABET_LEN
            };
            out.push(char::from_u32(shifted + PRINTABLE_LOW).expect("printable"));
        }
        Ok(out)
    }
}

impl Cipher for ShiftCipher {
    fn encrypt(&self, plain: &str, key: &CipherKey) -> Result<String, ProtocolError> {
        ShiftCipher::apply(plain, key, true)
    }

    fn decrypt(&self, cipher: &str, key: &CipherKey) -> Result<String, ProtocolError> {
        ShiftCipher::apply(cipher, key, false)
    }
}

pub fn encrypt_text(plain: &str, key: &CipherKey) -> Result<String, ProtocolError> {
    ShiftCipher.encrypt(plain, key)
}

pub fn decrypt_text(cipher: &str, key: &CipherKey) -> Result<String, ProtocolError> {
    ShiftCipher.decrypt(cipher, key)
}

pub fn classify_frame(body: &str) -> FrameKind {
    if body.starts_with(ENCRYPTED_PREFIX) {
        FrameKind::EncryptedCommand
    } else if body.starts_with(COMMAND_PREFIX) {
        FrameKind::PlainCommand
    } else {
        FrameKind::Ordinary
    }
}

pub fn encode_frame(
    command_text: &str,
    channel: Channel,
    key: Option<&CipherKey>,
) -> Result<String, ProtocolError> {
    encode_frame_with(&ShiftCipher, command_text, channel, key)
}

pub fn encode_frame_with<C: Cipher + ?Sized>(
    cipher: &C,
    command_text: &str,
    channel: Channel,
    key: Option<&CipherKey>,
) -> Result<String, ProtocolError> {
    let payload = command_text
        .strip_prefix(COMMAND_PREFIX)
        .ok_or(ProtocolError::MalformedCommandText)?;
    match channel {
        Channel::Plain => Ok(String::from(command_text)),
        Channel::Encrypted => {
            let key = key.ok_or(ProtocolError::MissingKey)?;
            let mut body = String::from(ENCRYPTED_PREFIX);
            body.push_str(&cipher.encrypt(payload, key)?);
            Ok(body)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DecodedFrame {
    Command { text: String, channel: Channel },
    Ordinary,
}

pub fn decode_frame(body: &str, key: &CipherKey) -> DecodedFrame {
    decode_frame_with(&ShiftCipher, body, key)
}

/// A `$$` payload that does not decrypt yields the bare text `$`, which no
/// command matches.
pub fn decode_frame_with<C: Cipher + ?Sized>(
    cipher: &C,
    body: &str,
    key: &CipherKey,
) -> DecodedFrame {
    match classify_frame(body) {
        FrameKind::EncryptedCommand => {
            let mut text = String::from("$");
            if let Ok(plain) = cipher.decrypt(&body[ENCRYPTED_PREFIX.len()..], key) {
                text.push_str(&plain);
            }
            DecodedFrame::Command {
                text,
                channel: Channel::Encrypted,
            }
        }
        FrameKind::PlainCommand => DecodedFrame::Command {
            text: String::from(body),
            channel: Channel::Plain,
        },
        FrameKind::Ordinary => DecodedFrame::Ordinary,
    }
}

/// Encodes an outbound reply for a peer on `channel`. Unlike command frames,
/// replies carry no leading `$` of their own.
pub fn encode_reply<C: Cipher + ?Sized>(
    cipher: &C,
    reply: &str,
    channel: Channel,
    key: &CipherKey,
) -> Result<String, ProtocolError> {
    match channel {
        Channel::Plain => Ok(String::from(reply)),
        Channel::Encrypted => {
            let mut body = String::from(ENCRYPTED_PREFIX);
            body.push_str(&cipher.encrypt(reply, key)?);
            Ok(body)
        }
    }
}

/// Inverse of [`encode_reply`]: `$$` bodies are decrypted, others returned as is.
pub fn decode_reply<C: Cipher + ?Sized>(cipher: &C, body: &str, key: &CipherKey) -> Option<String> {
    match body.strip_prefix(ENCRYPTED_PREFIX) {
        Some(payload) => cipher.decrypt(payload, key).ok(),
        None => Some(String::from(body)),
    }
}
