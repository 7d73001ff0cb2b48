//! Every command against every session state and sender class, compared with
//! a hand-written expectation table.

use smsguard_core::agent::{Agent, Effect, SmsMessage};
use smsguard_core::device::{Contact, DeviceState, Settings};
use smsguard_core::guard::Msisdn;
use smsguard_core::protocol::{
    decode_reply, derive_key, encode_frame, Channel, SharedSecret, ShiftCipher,
};
use smsguard_core::time::SimTime;

const DEV: &str = "+919000000001";
const PEER: &str = "+919000000002";
const STRANGER: &str = "+919000000003";
const BLOCKED: &str = "+919000000004";
const INVALID: &str = "AD-WAY2SMS";
const NOW: u64 = 3_600;

/// The 16 table commands plus the connect command, written out literally.
const COMMANDS: [&str; 17] = [
    "$MYDOB 1989",
    "$SILENT-ON",
    "$SILENT-OFF",
    "$GPS-ON",
    "$GPS-OFF",
    "$WIFI-ON",
    "$WIFI-OFF",
    "$CALLALERT-ON",
    "$CALLALERT-OFF",
    "$SMSDIVERT-ON",
    "$SMSDIVERT-OFF",
    "$SMS-REPLY busy",
    "$SMS-REPLY OFF",
    "$CONTACT raja",
    "$WIPEOUT",
    "$FLIGHT-ON",
    "$SIGNOFF",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SenderClass {
    Peer,
    Stranger,
    Blocked,
    Invalid,
}

impl SenderClass {
    fn raw(self) -> &'static str {
        match self {
            SenderClass::Peer => PEER,
            SenderClass::Stranger => STRANGER,
            SenderClass::Blocked => BLOCKED,
            SenderClass::Invalid => INVALID,
        }
    }
}

fn n(s: &str) -> Msisdn {
    Msisdn::parse(s).unwrap()
}

fn initial(session: Option<Channel>) -> DeviceState {
    let secret = SharedSecret::new("MYDOB", "1989").unwrap();
    let mut d = DeviceState::new(n(DEV), "SIM-A", Settings::new(secret, "4321").unwrap());
    d.booted = true;
    d.wifi_on = true;
    d.profile_silent = true;
    d.location = Some((12.0, 79.8));
    d.settings.auto_reply = Some("away".into());
    d.settings.call_alert = true;
    d.contacts.push(Contact {
        name: "Senthilraja".into(),
        mobile: n("+919111111111"),
        email: "r@x.com".into(),
    });
    d.user_files.push("photo.jpg".into());
    d.guard.block_now(&n(BLOCKED));
    if let Some(channel) = session {
        d.settings.open_session(n(PEER), channel, SimTime(0));
        d.locked = true;
    }
    d
}

/// Expected state and plain-text replies, derived without running the agent.
fn expected(
    session: Option<Channel>,
    class: SenderClass,
    cmd: &str,
) -> (DeviceState, Vec<(String, String)>) {
    let mut d = initial(session);
    let mut replies = Vec::new();
    let sender = class.raw();
    match (session, class) {
        (_, SenderClass::Invalid) | (_, SenderClass::Blocked) => {}
        (None, _) => {
            if cmd == "$MYDOB 1989" {
                d.settings
                    .open_session(n(sender), Channel::Plain, SimTime(NOW));
                d.locked = true;
                replies.push((sender.to_string(), format!("CONNECTED {DEV}")));
            } else {
                d.guard.record_failure(&n(sender), SimTime(NOW)).unwrap();
            }
        }
        (Some(_), SenderClass::Stranger) => {
            d.guard.block_now(&n(STRANGER));
            replies.push((PEER.to_string(), format!("INTRUDER {STRANGER} BLOCKED")));
        }
        (Some(_), SenderClass::Peer) => {
            let ok =
                |r: &mut Vec<(String, String)>| r.push((PEER.to_string(), format!("OK {cmd}")));
            match cmd {
                "$MYDOB 1989" => replies.push((PEER.to_string(), format!("CONNECTED {DEV}"))),
                "$SILENT-ON" => {
                    d.profile_silent = true;
                    ok(&mut replies)
                }
                "$SILENT-OFF" => {
                    d.profile_silent = false;
                    ok(&mut replies)
                }
                "$GPS-ON" => {
                    d.gps_tracking = true;
                    ok(&mut replies);
                    replies.push((
                        PEER.to_string(),
                        "LOC 12.0,79.8 2012-01-01T01:00:00Z".to_string(),
                    ));
                }
                "$GPS-OFF" => {
                    d.gps_tracking = false;
                    ok(&mut replies)
                }
                "$WIFI-ON" => {
                    d.wifi_on = true;
                    ok(&mut replies)
                }
                "$WIFI-OFF" => {
                    d.wifi_on = false;
                    ok(&mut replies)
                }
                "$CALLALERT-ON" => {
                    d.settings.call_alert = true;
                    ok(&mut replies)
                }
                "$CALLALERT-OFF" => {
                    d.settings.call_alert = false;
                    ok(&mut replies)
                }
                "$SMSDIVERT-ON" => {
                    d.settings.sms_divert = true;
                    ok(&mut replies)
                }
                "$SMSDIVERT-OFF" => {
                    d.settings.sms_divert = false;
                    ok(&mut replies)
                }
                "$SMS-REPLY busy" => {
                    d.settings.auto_reply = Some("busy".into());
                    ok(&mut replies)
                }
                "$SMS-REPLY OFF" => {
                    d.settings.auto_reply = None;
                    ok(&mut replies)
                }
                "$CONTACT raja" => replies.push((
                    PEER.to_string(),
                    "CONTACT Senthilraja +919111111111 r@x.com".to_string(),
                )),
                "$WIPEOUT" => {
                    d.contacts.clear();
                    d.user_files.clear();
                    ok(&mut replies)
                }
                "$FLIGHT-ON" => {
                    d.flight_mode = true;
                    ok(&mut replies)
                }
                "$SIGNOFF" => {
                    d.settings.session = None;
                    d.locked = false;
                    replies.push((PEER.to_string(), "SIGNED-OFF".to_string()));
                }
                other => panic!("no expectation for {other}"),
            }
        }
    }
    (d, replies)
}

fn run(
    session: Option<Channel>,
    class: SenderClass,
    cmd: &str,
) -> (DeviceState, Vec<(String, String)>) {
    let mut agent = Agent::new(initial(session));
    let key = derive_key(&agent.device.settings.secret);
    // Strangers and idle senders speak plain; the peer speaks its session channel.
    let channel = match (session, class) {
        (Some(ch), SenderClass::Peer) => ch,
        _ => Channel::Plain,
    };
    let body = encode_frame(cmd, channel, Some(&key)).unwrap();
    let msg = SmsMessage::new(class.raw(), n(DEV), body, SimTime(NOW)).unwrap();
    let effects = agent.handle_sms(&msg, SimTime(NOW));
    let replies = effects
        .into_iter()
        .filter_map(|e| match e {
            Effect::SendSms { to, body } => {
                if session == Some(Channel::Encrypted) && to == n(PEER) {
                    assert!(
                        body.starts_with("$$"),
                        "encrypted session reply in clear: {body}"
                    );
                }
                Some((
                    to.to_string(),
                    decode_reply(&ShiftCipher, &body, &key).unwrap(),
                ))
            }
            Effect::Log(_) => None,
        })
        .collect();
    (agent.into_device(), replies)
}

#[test]
fn agent_matches_decision_table() {
    let classes = [
        SenderClass::Peer,
        SenderClass::Stranger,
        SenderClass::Blocked,
        SenderClass::Invalid,
    ];
    let sessions = [None, Some(Channel::Plain), Some(Channel::Encrypted)];
    let mut cases = 0;
    for session in sessions {
        for class in classes {
            for cmd in COMMANDS {
                let (want_state, want_replies) = expected(session, class, cmd);
                let (got_state, got_replies) = run(session, class, cmd);
                assert_eq!(got_replies, want_replies, "{session:?} {class:?} {cmd}");
                assert_eq!(got_state, want_state, "{session:?} {class:?} {cmd}");
                cases += 1;
            }
        }
    }
    assert_eq!(cases, 17 * 4 * 3);
}

#[test]
fn idle_device_never_replies_except_to_connect() {
    for class in [
        SenderClass::Peer,
        SenderClass::Stranger,
        SenderClass::Blocked,
        SenderClass::Invalid,
    ] {
        for cmd in COMMANDS {
            let (state, replies) = run(None, class, cmd);
            let connected =
                cmd == "$MYDOB 1989" && matches!(class, SenderClass::Peer | SenderClass::Stranger);
            assert_eq!(!replies.is_empty(), connected, "{class:?} {cmd}");
            assert_eq!(state.session().is_some(), connected);
            assert_eq!(state.contacts.len(), 1);
            assert!(!state.flight_mode);
        }
    }
}
