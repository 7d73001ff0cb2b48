//! Line-oriented console attached to one phone number.

use std::io::{self, BufRead, Write};

use smsguard_core::Msisdn;

use crate::scenario::{parse_directive, parse_duration, Directive};
use crate::world::World;

pub const HELP: &str = "\
commands:
  send <to> <body>              SMS from the attached number
  call <to>                     call from the attached number
  advance <N>(s|m|h)            run the network forward
  show <device> state|inbox|blocked
  help | quit
any scenario directive is also accepted";

fn show(world: &World, device: &str, what: &str, out: &mut impl Write) -> io::Result<()> {
    let d = match world.device(device) {
        Ok(d) => d,
        Err(e) => return writeln!(out, "error: {e}"),
    };
    match what {
        "state" => {
            let session = d.session().map_or_else(
                || "none".to_string(),
                |s| format!("{} {}", s.peer, s.channel),
            );
            writeln!(out, "number   {}", d.msisdn)?;
            writeln!(out, "sim      {}", d.sim_id)?;
            writeln!(out, "booted   {}", d.booted)?;
            writeln!(out, "locked   {}", d.locked)?;
            writeln!(out, "silent   {}", d.profile_silent)?;
            writeln!(out, "wifi     {}", d.wifi_on)?;
            writeln!(out, "gps      {}", d.gps_tracking)?;
            writeln!(out, "flight   {}", d.flight_mode)?;
            writeln!(out, "session  {session}")?;
            writeln!(
                out,
                "stores   contacts={} inbox={} calls={} files={}",
                d.contacts.len(),
                d.inbox.len(),
                d.call_log.len(),
                d.user_files.len()
            )
        }
        "inbox" => {
            if d.inbox.is_empty() {
                return writeln!(out, "(empty)");
            }
            for m in &d.inbox {
                writeln!(out, "{} {}: {}", m.at, m.sender, m.body)?;
            }
            Ok(())
        }
        "blocked" => {
            let mut any = false;
            for n in d.guard.blocked() {
                writeln!(out, "{n}")?;
                any = true;
            }
            for w in d.guard.warnings() {
                writeln!(
                    out,
                    "{} warned {} since {}",
                    w.number, w.fail_count, w.first_fail_at
                )?;
                any = true;
            }
            if !any {
                writeln!(out, "(none)")?;
            }
            Ok(())
        }
        other => writeln!(
            out,
            "error: cannot show {other:?}; use state, inbox or blocked"
        ),
    }
}

fn rest_after(line: &str, words: usize) -> &str {
    let mut rest = line.trim_start();
    for _ in 0..words {
        let end = rest.find(char::is_whitespace).unwrap_or(rest.len());
        rest = rest[end..].trim_start();
    }
    rest.trim_end()
}

/// Reads commands until `quit` or end of input. Transcript lines produced
/// by each command are echoed as they appear.
pub fn run(
    world: &mut World,
    attach: &Msisdn,
    input: impl BufRead,
    out: &mut impl Write,
    prompt: bool,
) -> io::Result<()> {
    let me = attach.to_string();
    for line in world.drain_new() {
        writeln!(out, "{line}")?;
    }
    if prompt {
        write!(out, "> ")?;
        out.flush()?;
    }
    for line in input.lines() {
        let line = line?;
        let mut words = line.split_whitespace();
        let directive = match (words.next(), words.next()) {
            (None, _) => None,
            (Some("quit" | "exit"), _) => break,
            (Some("help"), _) => {
                writeln!(out, "{HELP}")?;
                None
            }
            (Some("send"), Some(to)) => {
                let body = rest_after(&line, 2);
                let body = body
                    .strip_prefix('"')
                    .and_then(|b| b.strip_suffix('"'))
                    .unwrap_or(body);
                Some(Directive::Sms {
                    from: me.clone(),
                    to: to.to_string(),
                    body: body.to_string(),
                })
            }
            (Some("call"), Some(to)) if words.next().is_none() => Some(Directive::Call {
                from: me.clone(),
                to: to.to_string(),
            }),
            (Some("advance"), Some(d)) if parse_duration(d).is_some() && words.next().is_none() => {
                parse_duration(d).map(Directive::Advance)
            }
            (Some("show"), Some(device)) => {
                match (words.next(), words.next()) {
                    (Some(what), None) => show(world, device, what, out)?,
                    _ => writeln!(out, "usage: show <device> state|inbox|blocked")?,
                }
                None
            }
            _ => match parse_directive(&line) {
                Ok(d) => d,
                Err(e) => {
                    writeln!(out, "error: {e}\n{HELP}")?;
                    None
                }
            },
        };
        if let Some(directive) = directive {
            if let Err(e) = world.execute(&directive) {
                writeln!(out, "error: {e}")?;
            }
        }
        for line in world.drain_new() {
            writeln!(out, "{line}")?;
        }
        if prompt {
            write!(out, "> ")?;
            out.flush()?;
        }
    }
    Ok(())
}
