use noesis::bundled;
use noesis::rational::{one, ratio, zero};
use noesis::syntax::{parse_formula, parse_program, print_formula, print_program};
use noesis::verifier::{explore, ExploreOptions};
use noesis::{BeliefState, Rational, Value, World};
use proptest::prelude::*;

fn world(loc: i64) -> World {
    World::new(vec![Value::Int(loc)])
}

fn objective() -> impl Strategy<Value = String> {
    let atom = (prop_oneof![Just("="), Just("!="), Just("<"), Just("<="), Just(">"), Just(">=")], -5i64..=20)
        .prop_map(|(op, k)| format!("Loc {op} {k}"));
    atom.prop_recursive(3, 16, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|f| format!("not ({f})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a}) and ({b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a}) or ({b})")),
            inner.prop_map(|f| format!("exists x:Dist (x = Loc and ({f}))")),
        ]
    })
}

fn guard() -> impl Strategy<Value = String> {
    prop_oneof![
        objective(),
        objective().prop_map(|f| format!("know({f})")),
        (objective(), 0i64..=4).prop_map(|(f, n)| format!("bel({f}) >= {n}/4")),
    ]
}

fn program() -> impl Strategy<Value = String> {
    let step = prop_oneof![Just("move(1);".to_string()), Just("move(-1);".to_string()), Just("sonar();".to_string())];
    step.prop_recursive(3, 12, 3, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 1..3).prop_map(|v| v.join(" ")),
            (guard(), inner.clone(), inner.clone()).prop_map(|(g, a, b)| format!("if {g} {{ {a} }} else {{ {b} }}")),
            (guard(), inner).prop_map(|(g, a)| format!("while {g} {{ {a} }}")),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn normalization_sums_to_one(raw in prop::collection::vec((-5i64..=20, 0i64..=9, 1i64..=9), 1..12)) {
        prop_assume!(raw.iter().any(|(_, n, _)| *n > 0));
        let b = BeliefState::normalize(raw.iter().map(|(l, n, d)| (world(*l), ratio(*n, *d)))).unwrap();
        prop_assert_eq!(b.total(), one());
        prop_assert!(b.entries().iter().all(|(_, p)| *p > zero()));
        // Weights stay proportional to the merged raw mass.
        let mass = |l: i64| raw.iter().filter(|(x, _, _)| *x == l).fold(zero(), |s, (_, n, d)| s + ratio(*n, *d));
        let total = raw.iter().fold(zero(), |s, (_, n, d)| s + ratio(*n, *d));
        for (w, p) in b.entries() {
            let Some(Value::Int(l)) = w.get(0) else { unreachable!() };
            prop_assert_eq!(p.clone(), mass(*l) / &total);
        }
    }

    #[test]
    fn formulas_survive_print_and_parse(text in guard()) {
        let bat = bundled::move_bat();
        let f = parse_formula(&text, &bat, "f").unwrap();
        let printed = print_formula(&f);
        let again = parse_formula(&printed, &bat, "f").unwrap();
        prop_assert_eq!(f, again, "{}", printed);
    }

    #[test]
    fn programs_survive_print_and_parse(text in program()) {
        let bat = bundled::move_bat();
        let p = parse_program(&text, &bat, "p").unwrap();
        let printed = print_program(&p);
        let again = parse_program(&printed, &bat, "p").unwrap();
        prop_assert_eq!(p, again, "{}", printed);
    }

    #[test]
    fn exploration_accounts_for_all_mass(text in program(), bound in 0usize..=4) {
        let bat = bundled::move_bat();
        let p = parse_program(&text, &bat, "p").unwrap();
        let opts = ExploreOptions { max_actions: bound, ..ExploreOptions::default() };
        let s = explore(&bat, &p, &[], &opts).unwrap();
        prop_assert!(s.complete);
        let total: Rational = &s.completed + &s.failed + &s.running;
        prop_assert_eq!(total, one(), "{}", text);
    }
}
