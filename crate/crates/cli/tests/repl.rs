use std::io::Cursor;

use smsguard::scenario::{parse_scenario, Directive};
use smsguard::{repl, World};
use smsguard_core::Msisdn;

const SETUP: &str = "\
seed 3
device A +919000000001 activation=MYDOB pin=1989 login=4321
contact A \"Mani\" +919222222222 mani@example.com
locate A 12.0 79.8
boot A
";

fn console(setup: &str, attach: &str, input: &str) -> (World, String) {
    let mut world = World::new(None, None);
    let report = world.run(&parse_scenario(setup).unwrap());
    assert!(report.passed(), "{:?}", report.failures);
    let attach = Msisdn::parse(attach).unwrap();
    if world.id(attach.as_str()).is_none() {
        world
            .register_handset(attach.as_str(), attach.clone())
            .unwrap();
    }
    let mut out = Vec::new();
    let mut echoed = report.transcript.join("\n");
    repl::run(
        &mut world,
        &attach,
        Cursor::new(input.to_string()),
        &mut out,
        false,
    )
    .unwrap();
    if !echoed.is_empty() {
        echoed.push('\n');
    }
    echoed.push_str(&String::from_utf8(out).unwrap());
    (world, echoed)
}

fn transcript(world: &World) -> Vec<String> {
    world
        .net
        .transcript()
        .iter()
        .map(|e| e.to_string())
        .collect()
}

#[test]
fn typed_session_matches_scripted_run() {
    let typed =
        "send +919000000001 $MYDOB 1989\nadvance 5s\nsend +919000000001 $GPS-ON\nadvance 11m\n\
                 send +919000000001 $CONTACT man\nadvance 5s\ncall +919000000001\nadvance 5s\n\
                 send +919000000001 $SIGNOFF\nadvance 5s\n";
    let script = format!(
        "{SETUP}handset me +919000000002\n\
         sms me A \"$MYDOB 1989\"\nadvance 5s\nsms me A \"$GPS-ON\"\nadvance 11m\n\
         sms me A \"$CONTACT man\"\nadvance 5s\ncall me A\nadvance 5s\nsms me A \"$SIGNOFF\"\nadvance 5s\n"
    );
    let (repl_world, _) = console(SETUP, "+919000000002", typed);
    let mut scripted = World::new(None, None);
    let report = scripted.run(&parse_scenario(&script).unwrap());
    assert!(report.passed());
    assert_eq!(transcript(&repl_world), transcript(&scripted));
    assert_eq!(report.transcript, transcript(&scripted));
    assert!(report
        .transcript
        .iter()
        .any(|l| l.contains("\"LOC 12.0,79.8 2012-01-01T00:")));
}

#[test]
fn directives_typed_at_the_prompt_work() {
    let (world, out) = console(SETUP, "+919000000002", "file A a.txt\nassert A files=1\n");
    assert_eq!(
        world.device("A").unwrap().user_files,
        vec!["a.txt".to_string()]
    );
    assert!(!out.contains("error"), "{out}");
    let (_, out) = console(SETUP, "+919000000002", "assert A files=3\n");
    assert!(out.contains("error: assert failed"), "{out}");
}

#[test]
fn show_views() {
    let input = "send +919000000001 hello there\nadvance 2s\nshow A inbox\nshow A state\nshow A blocked\nshow A bogus\nshow Z state\n";
    let (_, out) = console(SETUP, "+919000000002", input);
    assert!(
        out.contains("2012-01-01T00:00:00Z +919000000002: hello there"),
        "{out}"
    );
    assert!(out.contains("booted   true"), "{out}");
    assert!(out.contains("session  none"), "{out}");
    assert!(out.contains("(none)"), "{out}");
    assert!(out.contains("cannot show"), "{out}");
    assert!(out.contains("is not a device"), "{out}");
}

#[test]
fn attached_client_goes_through_client_logic() {
    let setup = format!("{SETUP}client P +919000000002 target=A channel=encrypted\n");
    let (world, out) = console(
        &setup,
        "+919000000002",
        "send +919000000001 $MYDOB 1989\nadvance 5s\n",
    );
    assert!(
        out.contains("SMS +919000000002->+919000000001 \"$$"),
        "{out}"
    );
    assert!(
        out.contains("SESSION-OPEN +919000000002 encrypted"),
        "{out}"
    );
    let id = world.id("P").unwrap();
    assert!(world.net.client(id).unwrap().state.is_some());
}

#[test]
fn unknown_lines_print_help_and_continue() {
    let (_, out) = console(SETUP, "+919000000002", "dance\nsend\nadvance 5s\n");
    assert_eq!(out.matches("commands:").count(), 2, "{out}");
    let parsed = parse_scenario("advance 5s\n").unwrap();
    assert_eq!(parsed.lines[0].directive, Directive::Advance(5));
}
