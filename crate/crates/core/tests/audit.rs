use noesis::bundled;
use noesis::syntax::{parse_formula, parse_program};
use noesis::verifier::{audit, AuditChecks, ExploreOptions, ViolationKind};

#[test]
fn threshold_guard_exits_loop_without_knowledge() {
    // Weakening the first loop's guard from knowledge to a belief threshold
    // lets the robot leave the loop while it is still too far away.
    let bat = bundled::move_bat();
    let program = parse_program(
        "sonar(); while not (bel(Loc <= 2) >= 1/2) { move(-1); sonar(); }",
        &bat,
        "mutant",
    )
    .unwrap();
    let checks = AuditChecks {
        loop_exit: vec![(0, parse_formula("Loc <= 2", &bat, "c").unwrap())],
        completion: None,
    };
    let opts = ExploreOptions { max_actions: 6, ..ExploreOptions::default() };
    let r = audit(&bat, &program, &checks, &opts).unwrap();
    assert!(r.complete);
    assert!(!r.passed());
    assert!(r.violations.iter().any(|v| v.kind == ViolationKind::LoopExit(0)), "{r}");
}

#[test]
fn knowledge_guard_passes_the_same_check() {
    let bat = bundled::move_bat();
    let program = bundled::first_loop_program(&bat);
    let checks = AuditChecks::derived(&program);
    assert_eq!(checks.loop_exit.len(), 1);
    let opts = ExploreOptions { max_actions: 8, ..ExploreOptions::default() };
    let r = audit(&bat, &program, &checks, &opts).unwrap();
    assert!(r.complete && r.passed(), "{r}");
}

#[test]
fn blind_sensor_keeps_knowledge_accurate() {
    // A sonar whose reading ignores Loc never teaches the robot anything, so
    // the first loop never exits and its exit check cannot be violated.
    let text = bundled::MOVE_BAT.replace(
        "    (z = Loc) -> 4/5\n    (abs(z - Loc) = 1) -> 1/10\n    else 0",
        "    (z = 0) -> 1\n    else 0",
    );
    assert_ne!(text, bundled::MOVE_BAT);
    let bat = noesis::syntax::load_bat(&text, "blind.bat").unwrap().0;
    let program = bundled::first_loop_program(&bat);
    let checks = AuditChecks::derived(&program);
    let opts = ExploreOptions { max_actions: 8, ..ExploreOptions::default() };
    let r = audit(&bat, &program, &checks, &opts).unwrap();
    assert!(r.complete && r.passed(), "{r}");
}
