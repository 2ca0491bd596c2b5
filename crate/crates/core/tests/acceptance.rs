//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails. All probabilities are compared exactly.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use noesis::abstraction::{check_refinement, RefinementOptions};
use noesis::action::GroundAction;
use noesis::belief::BeliefState;
use noesis::bundled;
use noesis::engine::{replay, EngineOptions, Machine, NatureOracle};
use noesis::logic::{Env, Value};
use noesis::rational::{format_ratio, ratio, Rational};
use noesis::syntax::{
    parse_bat, parse_formula, parse_mapping, parse_nature, parse_program, print_bat, print_mapping, print_nature,
    print_program,
};
use noesis::trace::Status;
use noesis::verifier::{audit, explore, AuditChecks, ExploreOptions};
use num_traits::{One, Zero};

type Dist = BTreeMap<i64, Rational>;

/// Hand-written model of the wall robot, independent of the action-theory
/// machinery: move offsets and sonar readings with their likelihoods.
mod oracle {
    use super::*;

    pub fn move_outcomes(x: i64) -> Vec<(i64, Rational)> {
        vec![(x - 1, ratio(1, 5)), (x, ratio(3, 5)), (x + 1, ratio(1, 5))]
    }

    pub fn sonar_likelihood(z: i64, loc: i64) -> Rational {
        match (z - loc).abs() {
            0 => ratio(4, 5),
            1 => ratio(1, 10),
            _ => Rational::zero(),
        }
    }

    pub fn sonar_readings(loc: i64) -> Vec<(i64, Rational)> {
        vec![(loc - 1, ratio(1, 10)), (loc, ratio(4, 5)), (loc + 1, ratio(1, 10))]
    }

    pub fn normalize(d: Dist) -> Dist {
        let total: Rational = d.values().fold(Rational::zero(), |a, b| a + b);
        d.into_iter()
            .filter(|(_, p)| !p.is_zero())
            .map(|(l, p)| (l, p / &total))
            .collect()
    }

    /// Bayes filter step for `move(x, _)`: the offset is hidden.
    pub fn after_move(b: &Dist, x: i64) -> Dist {
        let mut out = Dist::new();
        for (l, p) in b {
            for (y, q) in move_outcomes(x) {
                *out.entry(l + y).or_insert_with(Rational::zero) += p * &q;
            }
        }
        normalize(out)
    }

    /// Bayes filter step for `sonar(z)`.
    pub fn after_sonar(b: &Dist, z: i64) -> Dist {
        normalize(b.iter().map(|(l, p)| (*l, p * sonar_likelihood(z, *l))).collect())
    }

    #[derive(Clone, Copy, Debug)]
    pub enum Act {
        Move(i64),
        Sonar(i64),
    }

    /// Posterior over Loc by enumerating every hidden-offset sequence from
    /// the initial world, weighting each joint history by its likelihood
    /// given the observations, and conditioning.
    pub fn joint_posterior(initial: i64, acts: &[Act]) -> Dist {
        let mut histories: Vec<(i64, Rational)> = vec![(initial, Rational::one())];
        for a in acts {
            let mut next = Vec::new();
            for (l, w) in &histories {
                match *a {
                    Act::Move(x) => {
                        for (y, q) in move_outcomes(x) {
                            next.push((l + y, w * &q));
                        }
                    }
                    Act::Sonar(z) => next.push((*l, w * sonar_likelihood(z, *l))),
                }
            }
            histories = next;
        }
        let mut d = Dist::new();
        for (l, w) in histories {
            *d.entry(l).or_insert_with(Rational::zero) += w;
        }
        normalize(d)
    }

    /// P(the first-loop program completes within `max` actions), by direct
    /// recursion over sonar readings and move offsets.
    pub fn first_loop_completion(max: usize) -> Rational {
        fn at_guard(b: &Dist, actual: i64, steps: usize, max: usize) -> Rational {
            if b.keys().all(|l| *l <= 2) {
                return Rational::one();
            }
            if steps + 2 > max {
                // Needs move and sonar; completion within bound needs both.
                return Rational::zero();
            }
            let mut total = Rational::zero();
            for (y, p) in move_outcomes(-1) {
                let loc = actual + y;
                let b1 = after_move(b, -1);
                for (z, q) in sonar_readings(loc) {
                    let b2 = after_sonar(&b1, z);
                    total += &p * &q * at_guard(&b2, loc, steps + 2, max);
                }
            }
            total
        }
        let b0: Dist = [(3, Rational::one())].into_iter().collect();
        if max == 0 {
            return Rational::zero();
        }
        let mut total = Rational::zero();
        for (z, q) in sonar_readings(3) {
            total += &q * at_guard(&after_sonar(&b0, z), 3, 1, max);
        }
        total
    }
}

fn as_dist(b: &BeliefState) -> Dist {
    b.entries()
        .iter()
        .map(|(w, p)| (w.get(0).and_then(Value::as_int).expect("integer Loc"), p.clone()))
        .collect()
}

fn show(d: &Dist) -> String {
    let parts: Vec<String> = d.iter().map(|(l, p)| format!("{l}: {}", format_ratio(p))).collect();
    format!("{{{}}}", parts.join(", "))
}

fn to_oracle(a: &GroundAction) -> oracle::Act {
    let ints: Vec<i64> = a.args.iter().map(|v| v.as_int().expect("integer argument")).collect();
    match &*a.name {
        "move" => oracle::Act::Move(ints[0]),
        _ => oracle::Act::Sonar(ints[0]),
    }
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(start: Instant, limit: Duration, what: &str) -> Result<(), String> {
    let t = start.elapsed();
    check(t < limit, || format!("{what} took {t:?}, limit {limit:?}"))
}

fn golden_trace() -> Result<String, String> {
    let start = Instant::now();
    let bat = bundled::move_bat();
    let program = bundled::wall_program(&bat);
    let trace = replay(&bat, &program, bundled::z_l_script(), EngineOptions::default());
    let text = trace.to_text();
    let actions = trace.actions();
    let first_up = actions.iter().position(|a| a.args.first() == Some(&Value::Int(1)) && &*a.name == "move");
    let first_loop_moves = actions[..first_up.unwrap_or(actions.len())]
        .iter()
        .filter(|a| &*a.name == "move")
        .count();
    let exit_after = first_up.and_then(|i| i.checked_sub(1)).map(|i| actions[i].to_string());
    within(start, Duration::from_secs(1), "replay")?;
    check(text == bundled::Z_L_TEXT.trim_end(), || {
        format!("trace differs:\n  got      {text}\n  expected {}", bundled::Z_L_TEXT.trim_end())
    })?;
    check(first_loop_moves == 3, || format!("first loop moved {first_loop_moves} times"))?;
    check(exit_after.as_deref() == Some("sonar(1)"), || format!("first loop exited after {exit_after:?}"))?;
    check(trace.status == Status::Completed, || {
        format!(
            "17 actions reproduced exactly, but the run does not complete: {:?}",
            trace.status
        )
    })?;
    Ok("replay reproduces the 17-action trace and completes".into())
}

fn belief_checkpoint() -> Result<String, String> {
    let bat = bundled::move_bat();
    let prefix = [
        GroundAction::new("sonar", vec![Value::Int(3)]),
        GroundAction::new("move", vec![Value::Int(-1), Value::Int(0)]),
        GroundAction::new("sonar", vec![Value::Int(3)]),
        GroundAction::new("move", vec![Value::Int(-1), Value::Int(-1)]),
        GroundAction::new("sonar", vec![Value::Int(2)]),
    ];
    let mut b = BeliefState::initial(&bat).map_err(|e| e.to_string())?;
    let mut o: Dist = [(3, Rational::one())].into_iter().collect();
    for a in &prefix {
        let obs = bat.observation_of(a).map_err(|e| e.to_string())?;
        b = b.update(&obs, &bat).map_err(|e| e.to_string())?;
        o = match to_oracle(a) {
            oracle::Act::Move(x) => oracle::after_move(&o, x),
            oracle::Act::Sonar(z) => oracle::after_sonar(&o, z),
        };
    }
    let expected: Dist = [(1, ratio(17, 241)), (2, ratio(216, 241)), (3, ratio(8, 241))].into_iter().collect();
    check(o == expected, || format!("oracle gives {}", show(&o)))?;
    check(as_dist(&b) == expected, || format!("belief is {}", show(&as_dist(&b))))?;
    let bel3 = parse_formula("Loc = 3", &bat, "q").map_err(|d| d.to_string())?;
    let d3 = b.degree_of_belief(&bel3, &mut Env::new()).map_err(|e| e.to_string())?;
    check(d3 == ratio(8, 241), || format!("Bel(Loc = 3) = {}", format_ratio(&d3)))?;
    let know = parse_formula("know(Loc <= 2)", &bat, "q").map_err(|d| d.to_string())?;
    let k = noesis::logic::eval_epistemic(&know, &b, &mut Env::new()).map_err(|e| e.to_string())?;
    check(!k, || "Know(Loc <= 2) holds".into())?;
    Ok(format!("belief {} matches the Bayes-filter oracle", show(&expected)))
}

fn filter_vs_joint() -> Result<String, String> {
    let bat = bundled::move_bat();
    let script = bundled::z_l_script();
    let program = bundled::wall_program(&bat);
    let trace = replay(&bat, &program, script, EngineOptions::default());
    let actions: Vec<GroundAction> = trace.actions().into_iter().cloned().collect();
    check(actions.len() == 17, || format!("replay produced {} actions", actions.len()))?;
    let mut b = BeliefState::initial(&bat).map_err(|e| e.to_string())?;
    let mut acts = Vec::new();
    for (k, a) in actions.iter().enumerate() {
        let obs = bat.observation_of(a).map_err(|e| e.to_string())?;
        b = b.update(&obs, &bat).map_err(|e| e.to_string())?;
        acts.push(to_oracle(a));
        let joint = oracle::joint_posterior(3, &acts);
        check(as_dist(&b) == joint, || {
            format!("after {} actions: filter {} vs joint {}", k + 1, show(&as_dist(&b)), show(&joint))
        })?;
    }
    Ok("filter equals joint enumeration on all 17 prefixes".into())
}

fn verifier_checkpoint() -> Result<String, String> {
    let bat = bundled::move_bat();
    let program = bundled::first_loop_program(&bat);
    let expected = ratio(6, 25);
    let o = oracle::first_loop_completion(3);
    check(o == expected, || format!("oracle gives {}", format_ratio(&o)))?;
    let start = Instant::now();
    let opts = ExploreOptions {
        max_actions: 3,
        ..ExploreOptions::default()
    };
    let s = explore(&bat, &program, &[], &opts).map_err(|e| e.to_string())?;
    within(start, Duration::from_secs(1), "depth-3 exploration")?;
    check(s.completed == expected, || format!("P(completed) = {}", format_ratio(&s.completed)))?;
    check(&s.completed + &s.failed + &s.running == Rational::one(), || "masses do not sum to 1".into())?;
    for depth in [5, 7] {
        let o = oracle::first_loop_completion(depth);
        let s = explore(&bat, &program, &[], &ExploreOptions { max_actions: depth, ..opts.clone() })
            .map_err(|e| e.to_string())?;
        check(s.completed == o, || {
            format!("depth {depth}: {} vs oracle {}", format_ratio(&s.completed), format_ratio(&o))
        })?;
    }
    Ok(format!("P(completed within 3) = {} in {:?}", format_ratio(&s.completed), start.elapsed()))
}

fn high_level_uniqueness() -> Result<String, String> {
    let bat = bundled::goto_bat();
    let program = bundled::goto_program(&bat);
    let s = explore(&bat, &program, &[], &ExploreOptions::default()).map_err(|e| e.to_string())?;
    check(s.completed_paths == 1, || format!("{} branches", s.completed_paths))?;
    check(s.completed == Rational::one(), || format!("P(completed) = {}", format_ratio(&s.completed)))?;
    let branch = &s.completed_branches[0];
    check(branch.probability == Rational::one(), || "branch probability is not 1".into())?;
    check(branch.path() == bundled::Z_H_TEXT.trim_end(), || format!("branch {}", branch.path()))?;
    Ok(format!("single branch {}", branch.path()))
}

fn knowledge_accuracy() -> Result<String, String> {
    let bat = bundled::move_bat();
    let program = bundled::wall_program(&bat);
    let checks = AuditChecks::derived(&program);
    let loc_le_2 = parse_formula("exists x:Dist (Loc(x) and x <= 2)", &bat, "c").map_err(|d| d.to_string())?;
    let loc_gt_5 = parse_formula("exists x:Dist (Loc(x) and x > 5)", &bat, "c").map_err(|d| d.to_string())?;
    check(checks.loop_exit.first() == Some(&(0, loc_le_2)), || "first-loop exit check missing".into())?;
    check(checks.completion.as_ref() == Some(&loc_gt_5), || "completion check missing".into())?;
    let start = Instant::now();
    let opts = ExploreOptions {
        max_actions: 14,
        memo: true,
        ..ExploreOptions::default()
    };
    let r = audit(&bat, &program, &checks, &opts).map_err(|e| e.to_string())?;
    within(start, Duration::from_secs(60), "depth-14 audit")?;
    check(r.complete, || "audit ran out of node budget".into())?;
    check(r.passed(), || format!("{r}"))?;
    Ok(format!("depth-14 audit: 0 violations, {} nodes, {:?}", r.nodes, start.elapsed()))
}

fn refinement() -> Result<String, String> {
    let hl = bundled::goto_bat();
    let faithful = bundled::move_bat();
    let corrected = bundled::move_corrected_bat();
    let opts = RefinementOptions::default();
    check(opts.depth == 30 && opts.epsilon == ratio(1, 100), || "unexpected defaults".into())?;
    let m = bundled::mapping(&hl, &faithful);
    let r = check_refinement(&hl, &faithful, &m, &opts).map_err(|e| e.to_string())?;
    let near = r.initial.iter().find(|a| a.atom == "At = near");
    check(!r.initial_ok() && near.map(|a| !a.known) == Some(true), || {
        format!("faithful bundle should fail initial correspondence:\n{r}")
    })?;
    let start = Instant::now();
    let m = bundled::mapping(&hl, &corrected);
    let r = check_refinement(&hl, &corrected, &m, &opts).map_err(|e| e.to_string())?;
    check(r.passed(), || format!("corrected bundle:\n{r}"))?;
    let labels: Vec<String> = r.steps.iter().map(|s| s.label()).collect();
    check(labels.iter().any(|l| l == "goto(far) · goto(near)"), || format!("steps checked: {labels:?}"))?;
    let check_time = start.elapsed();

    let hl_program = bundled::goto_program(&hl);
    let m = bundled::mapping(&hl, &faithful);
    let ll_program = m.translate(&hl, &hl_program).map_err(|e| e.to_string())?;
    let goal = parse_formula("know(exists x:Dist (Loc = x and x > 5))", &faithful, "g").map_err(|d| d.to_string())?;
    let machine = Machine::new(&faithful, EngineOptions::default());
    for seed in 0..100u64 {
        let (trace, config) = machine.run(&ll_program, &mut NatureOracle::seeded(seed));
        check(trace.status == Status::Completed, || format!("seed {seed}: {:?}", trace.status))?;
        let config = config.ok_or("no final configuration")?;
        let ok = noesis::logic::eval_epistemic(&goal, &config.belief, &mut Env::new()).map_err(|e| e.to_string())?;
        check(ok, || format!("seed {seed} ends without knowing Loc > 5"))?;
    }
    Ok(format!(
        "faithful bundle fails initial correspondence; corrected passes ({} steps, {check_time:?}); 100 seeds know Loc > 5",
        r.steps.len()
    ))
}

fn round_trip_and_determinism() -> Result<String, String> {
    let ll = bundled::move_bat();
    let hl = bundled::goto_bat();
    for (name, text) in bundled::FILES {
        let ok = if name.ends_with(".bat") {
            let b = parse_bat(text, name).map_err(|d| d.to_string())?;
            parse_bat(&print_bat(&b), name).map_err(|d| d.to_string())? == b
        } else if name.ends_with(".prog") {
            let bat = if *name == "goto.prog" { &hl } else { &ll };
            let p = parse_program(text, bat, name).map_err(|d| d.to_string())?;
            parse_program(&print_program(&p), bat, name).map_err(|d| d.to_string())? == p
        } else if name.ends_with(".map") {
            let m = parse_mapping(text, &hl, &ll, name).map_err(|d| d.to_string())?;
            parse_mapping(&print_mapping(&m), &hl, &ll, name).map_err(|d| d.to_string())? == m
        } else {
            let v = parse_nature(text, name).map_err(|d| d.to_string())?;
            parse_nature(&print_nature(&v), name).map_err(|d| d.to_string())? == v
        };
        check(ok, || format!("{name} does not round-trip"))?;
    }
    let program = bundled::wall_program(&ll);
    let options = EngineOptions {
        snapshots: true,
        ..EngineOptions::default()
    };
    let machine = Machine::new(&ll, options);
    for seed in [0u64, 7, 42] {
        let a = machine.run(&program, &mut NatureOracle::seeded(seed)).0.to_json();
        let b = machine.run(&program, &mut NatureOracle::seeded(seed)).0.to_json();
        check(a.as_bytes() == b.as_bytes(), || format!("seed {seed} runs differ"))?;
    }
    Ok(format!("{} bundled files round-trip; seeded runs byte-identical", bundled::FILES.len()))
}

type Criterion = (&'static str, fn() -> Result<String, String>);

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("golden trace z_l", golden_trace),
        ("belief checkpoint", belief_checkpoint),
        ("filter vs joint oracle", filter_vs_joint),
        ("exhaustive verifier checkpoint", verifier_checkpoint),
        ("high-level uniqueness", high_level_uniqueness),
        ("knowledge accuracy audit", knowledge_accuracy),
        ("refinement checking", refinement),
        ("round-trip and determinism", round_trip_and_determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("criterion {} ({name}): PASS - {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {} ({name}): FAIL - {why}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
