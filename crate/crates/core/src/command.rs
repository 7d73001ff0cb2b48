//! The remote command vocabulary.
//!
//! Keywords are uppercase and matched exactly. Argument-taking forms use a
//! single space before the argument, which is trimmed at both ends.

use alloc::format;
use alloc::string::String;

use thiserror::Error;

use crate::protocol::is_pin;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Command {
    Connect(String),
    SilentOn,
    SilentOff,
    GpsOn,
    GpsOff,
    WifiOn,
    WifiOff,
    CallAlertOn,
    CallAlertOff,
    SmsDivertOn,
    SmsDivertOff,
    AutoReplyOn(String),
    AutoReplyOff,
    ContactLookup(String),
    Wipeout,
    FlightOn,
    SignOff,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown command {0:?}")]
pub struct UnknownCommand(pub String);

const FIXED: &[(&str, Command)] = &[
    ("$SILENT-ON", Command::SilentOn),
    ("$SILENT-OFF", Command::SilentOff),
    ("$GPS-ON", Command::GpsOn),
    ("$GPS-OFF", Command::GpsOff),
    ("$WIFI-ON", Command::WifiOn),
    ("$WIFI-OFF", Command::WifiOff),
    ("$CALLALERT-ON", Command::CallAlertOn),
    ("$CALLALERT-OFF", Command::CallAlertOff),
    ("$SMSDIVERT-ON", Command::SmsDivertOn),
    ("$SMSDIVERT-OFF", Command::SmsDivertOff),
    ("$SMS-REPLY OFF", Command::AutoReplyOff),
    ("$WIPEOUT", Command::Wipeout),
    ("$FLIGHT-ON", Command::FlightOn),
    ("$SIGNOFF", Command::SignOff),
];

const AUTO_REPLY: &str = "$SMS-REPLY ";
const CONTACT: &str = "$CONTACT ";

fn argument<'a>(text: &'a str, keyword: &str) -> Option<&'a str> {
    let arg = text.strip_prefix(keyword)?.trim();
    (!arg.is_empty()).then_some(arg)
}

pub fn parse_command(
    command_text: &str,
    activation_command: &str,
) -> Result<Command, UnknownCommand> {
    let unknown = || UnknownCommand(String::from(command_text));

    if let Some((_, cmd)) = FIXED.iter().find(|(kw, _)| *kw == command_text) {
        return Ok(cmd.clone());
    }
    if let Some(msg) = argument(command_text, AUTO_REPLY) {
        return Ok(if msg == "OFF" {
            Command::AutoReplyOff
        } else {
            Command::AutoReplyOn(String::from(msg))
        });
    }
    if let Some(query) = argument(command_text, CONTACT) {
        return Ok(Command::ContactLookup(String::from(query)));
    }
    if !activation_command.is_empty() {
        let connect = command_text
            .strip_prefix('$')
            .and_then(|rest| rest.strip_prefix(activation_command))
            .and_then(|rest| rest.strip_prefix(' '))
            .map(str::trim);
        if let Some(pin) = connect {
            return if is_pin(pin, 4, 8) {
                Ok(Command::Connect(String::from(pin)))
            } else {
                Err(unknown())
            };
        }
    }
    Err(unknown())
}

impl Command {
    /// Canonical wire text. `parse_command(&c.render(a), a) == Ok(c)` for every
    /// command whose arguments are trimmed and non-empty, except
    /// `AutoReplyOn("OFF")`, which has no textual form.
    pub fn render(&self, activation_command: &str) -> String {
        match self {
            Command::Connect(pin) => format!("${activation_command} {pin}"),
            Command::AutoReplyOn(msg) => format!("{AUTO_REPLY}{msg}"),
            Command::ContactLookup(query) => format!("{CONTACT}{query}"),
            fixed => {
                let (text, _) = FIXED
                    .iter()
                    .find(|(_, c)| c == fixed)
                    .expect("every argument-free command has a keyword");
                String::from(*text)
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Command::Connect(_) => "Connect",
            Command::SilentOn => "SilentOn",
            Command::SilentOff => "SilentOff",
            Command::GpsOn => "GpsOn",
            Command::GpsOff => "GpsOff",
            Command::WifiOn => "WifiOn",
            Command::WifiOff => "WifiOff",
            Command::CallAlertOn => "CallAlertOn",
            Command::CallAlertOff => "CallAlertOff",
            Command::SmsDivertOn => "SmsDivertOn",
            Command::SmsDivertOff => "SmsDivertOff",
            Command::AutoReplyOn(_) => "AutoReplyOn",
            Command::AutoReplyOff => "AutoReplyOff",
            Command::ContactLookup(_) => "ContactLookup",
            Command::Wipeout => "Wipeout",
            Command::FlightOn => "FlightOn",
            Command::SignOff => "SignOff",
        }
    }
}

pub fn render_command(command: &Command, activation_command: &str) -> String {
    command.render(activation_command)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Command, UnknownCommand> {
        parse_command(text, "MYDOB")
    }

    #[test]
    fn examples() {
        assert_eq!(parse("$SILENT-ON"), Ok(Command::SilentOn));
        assert_eq!(parse("$MYDOB 1989"), Ok(Command::Connect("1989".into())));
        assert_eq!(parse("$SMS-REPLY OFF"), Ok(Command::AutoReplyOff));
        assert_eq!(
            parse("$SMS-REPLY In a meeting"),
            Ok(Command::AutoReplyOn("In a meeting".into()))
        );
        assert_eq!(
            parse("$CONTACT raja"),
            Ok(Command::ContactLookup("raja".into()))
        );
        assert!(parse("$FOO").is_err());
    }

    #[test]
    fn case_and_spacing() {
        assert!(parse("$silent-on").is_err());
        assert!(parse("$SILENT-ON ").is_err());
        assert!(parse("$CONTACT").is_err());
        assert!(parse("$CONTACT    ").is_err());
        assert!(parse("$SMS-REPLY").is_err());
        assert_eq!(
            parse("$CONTACT  raja  "),
            Ok(Command::ContactLookup("raja".into()))
        );
        assert_eq!(parse("$SMS-REPLY  OFF "), Ok(Command::AutoReplyOff));
        assert!(parse("$FLIGHT-OFF").is_err());
        assert!(parse("SILENT-ON").is_err());
    }

    #[test]
    fn connect_pin_shape() {
        assert!(parse("$MYDOB 198").is_err());
        assert!(parse("$MYDOB 19a9").is_err());
        assert!(parse("$MYDOB").is_err());
        assert!(parse("$MYDOBX 1989").is_err());
        assert_eq!(
            parse("$MYDOB 12345678"),
            Ok(Command::Connect("12345678".into()))
        );
        assert!(parse("$MYDOB 123456789").is_err());
        assert!(parse_command("$MYDOB 1989", "OTHER").is_err());
    }

    #[test]
    fn renders() {
        assert_eq!(Command::Wipeout.render("MYDOB"), "$WIPEOUT");
        assert_eq!(
            Command::Connect("1989".into()).render("MYDOB"),
            "$MYDOB 1989"
        );
        assert_eq!(
            Command::AutoReplyOn("ok".into()).render("MYDOB"),
            "$SMS-REPLY ok"
        );
        assert_eq!(
            parse("$SMS-REPLY ok"),
            Ok(Command::AutoReplyOn("ok".into()))
        );
    }
}
