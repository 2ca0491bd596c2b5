use super::*;
use crate::bundled;

fn first_message(d: &Diagnostics) -> &str {
    &d.first().message
}

#[test]
fn bundled_theories_round_trip() {
    for (name, text) in [
        ("move.bat", bundled::MOVE_BAT),
        ("move_corrected.bat", bundled::MOVE_CORRECTED_BAT),
        ("move_literal.bat", bundled::MOVE_LITERAL_BAT),
        ("goto.bat", bundled::GOTO_BAT),
    ] {
        let bat = parse_bat(text, name).unwrap();
        let printed = print_bat(&bat);
        let again = parse_bat(&printed, name).unwrap_or_else(|d| panic!("{name}: {d}\n{printed}"));
        assert_eq!(bat, again, "{name}");
        assert_eq!(printed, print_bat(&again), "{name}");
    }
}

#[test]
fn bundled_programs_round_trip() {
    let ll = bundled::move_bat();
    let hl = bundled::goto_bat();
    for (name, text, bat) in [
        ("wall.prog", bundled::WALL_PROG, &ll),
        ("first_loop.prog", bundled::FIRST_LOOP_PROG, &ll),
        ("goto.prog", bundled::GOTO_PROG, &hl),
    ] {
        let p = parse_program(text, bat, name).unwrap();
        let printed = print_program(&p);
        let again = parse_program(&printed, bat, name).unwrap_or_else(|d| panic!("{name}: {d}\n{printed}"));
        assert_eq!(p, again, "{name}");
    }
}

#[test]
fn bundled_mapping_and_script_round_trip() {
    let ll = bundled::move_bat();
    let hl = bundled::goto_bat();
    let m = bundled::mapping(&hl, &ll);
    let printed = print_mapping(&m);
    assert_eq!(parse_mapping(&printed, &hl, &ll, "m.map").unwrap(), m, "{printed}");
    let script = bundled::z_l_script();
    assert_eq!(script.len(), 17);
    assert_eq!(parse_nature(&print_nature(&script), "z").unwrap(), script);
}

#[test]
fn every_bundled_file_is_listed() {
    assert_eq!(bundled::FILES.len(), 9);
}

#[test]
fn unknown_sort_is_reported_with_position() {
    let text = "sort Dist = int[0..3]\nfluent Loc : Bogus\n";
    let d = parse_bat(text, "bad.bat").unwrap_err();
    assert_eq!(first_message(&d), "unknown sort Bogus");
    let first = d.first();
    assert_eq!((first.span.line, first.span.column), (2, 14));
    assert!(d.to_string().starts_with("bad.bat:2:14: error: unknown sort Bogus"));
}

#[test]
fn nested_belief_is_rejected() {
    let bat = bundled::move_bat();
    let d = parse_formula("know(know(Loc = 3))", &bat, "f").unwrap_err();
    assert_eq!(first_message(&d), "nested epistemic operator");
    assert!(d.first().hint.is_some());
    let d = parse_program("while bel(know(Loc = 3)) >= 1/2 { sonar(); }", &bat, "p").unwrap_err();
    assert_eq!(first_message(&d), "nested epistemic operator");
}

#[test]
fn mixed_guard_is_rejected() {
    let bat = bundled::move_bat();
    let d = parse_program("if Loc = 3 and know(Loc = 3) { sonar(); }", &bat, "p").unwrap_err();
    assert_eq!(first_message(&d), "guard mixes objective conditions with belief operators");
}

#[test]
fn unknown_action_and_arity() {
    let bat = bundled::move_bat();
    let d = parse_program("jump(1);", &bat, "p").unwrap_err();
    assert!(first_message(&d).contains("unknown action jump"), "{d}");
    let d = parse_program("move(1, 2);", &bat, "p").unwrap_err();
    assert!(first_message(&d).starts_with("arity mismatch"), "{d}");
}

#[test]
fn unmapped_fluent_is_reported() {
    let ll = bundled::move_bat();
    let hl = bundled::goto_bat();
    let text = "action goto(l) -> { sonar(); }\n";
    let d = parse_mapping(text, &hl, &ll, "m.map").unwrap_err();
    assert_eq!(first_message(&d), "unmapped fluent At");
}

#[test]
fn high_level_symbol_in_template_is_rejected() {
    let ll = bundled::move_bat();
    let hl = bundled::goto_bat();
    let text = "fluent At(l) -> At = l\naction goto(l) -> { sonar(); }\n";
    let d = parse_mapping(text, &hl, &ll, "m.map").unwrap_err();
    assert_eq!(first_message(&d), "high-level symbol in low-level template");
}

#[test]
fn case_must_cover_sort() {
    let ll = bundled::move_bat();
    let hl = bundled::goto_bat();
    let text = "fluent At(l) -> case l { near: Loc <= 2; }\naction goto(l) -> { sonar(); }\n";
    let d = parse_mapping(text, &hl, &ll, "m.map").unwrap_err();
    assert_eq!(first_message(&d), "case for At does not cover far");
}

#[test]
fn load_reports_bad_likelihood_at_declaration() {
    let text = "sort S = int[0..2]\nfluent F : S\n\naction a(hidden y: S)\n  likelihood: 1/2\n\ninitial actual F = 0\ninitial belief weight 1 : F = 0\n";
    let d = load_bat(text, "l.bat").unwrap_err();
    let first = d.first();
    assert!(first.message.contains("sum to 3/2"), "{d}");
    assert_eq!(first.span.line, 4);
}

#[test]
fn syntax_error_names_expected_token() {
    let bat = bundled::move_bat();
    let d = parse_program("while know(Loc = 3) sonar();", &bat, "p").unwrap_err();
    assert!(first_message(&d).contains("expected"), "{d}");
}

#[test]
fn render_shows_caret() {
    let text = "sort Dist = int[0..3]\nfluent Loc : Bogus\n";
    let d = parse_bat(text, "bad.bat").unwrap_err();
    let r = d.render(text, false);
    assert!(r.contains("fluent Loc : Bogus"), "{r}");
    assert!(r.contains("^^^^^"), "{r}");
}
