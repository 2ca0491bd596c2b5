//! Weighted possible-worlds belief states and the exact Bayesian update after
//! an observed action.

use std::collections::BTreeMap;
use std::fmt;
use std::hash::Hash;

use num_traits::{One, Zero};
use serde::de::{MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::action::{ActionError, Bat, Observation};
use crate::logic::{eval_objective, CmpOp, Env, Epistemic, EvalError, Formula, Symbol, Value, World};
use crate::rational::{format_ratio, parse_ratio, Rational};

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum BeliefError {
    #[error("inconsistent observation {0}: impossible in every believed world")]
    InconsistentObservation(String),
    #[error("cannot normalize a belief with total mass 0")]
    ZeroMass,
    #[error("negative weight {0}")]
    NegativeWeight(String),
    #[error(transparent)]
    Action(#[from] ActionError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// A normalized, canonically ordered, finite distribution over worlds.
///
/// Invariants: weights are positive and sum to exactly one; worlds are unique
/// and sorted.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BeliefState {
    entries: Vec<(World, Rational)>,
}

impl BeliefState {
    /// Merges duplicates, drops zero weights, divides by the total.
    pub fn normalize(raw: impl IntoIterator<Item = (World, Rational)>) -> Result<BeliefState, BeliefError> {
        let mut acc: BTreeMap<World, Rational> = BTreeMap::new();
        for (w, p) in raw {
            if p < Rational::zero() {
                return Err(BeliefError::NegativeWeight(format_ratio(&p)));
            }
            if p.is_zero() {
                continue;
            }
            *acc.entry(w).or_insert_with(Rational::zero) += p;
        }
        let total: Rational = acc.values().fold(Rational::zero(), |s, p| s + p);
        if total.is_zero() {
            return Err(BeliefError::ZeroMass);
        }
        let entries = if total.is_one() {
            acc.into_iter().collect()
        } else {
            acc.into_iter().map(|(w, p)| (w, p / &total)).collect()
        };
        Ok(BeliefState { entries })
    }

    pub fn certain(w: World) -> BeliefState {
        BeliefState {
            entries: vec![(w, Rational::one())],
        }
    }

    pub fn initial(bat: &Bat) -> Result<BeliefState, BeliefError> {
        BeliefState::normalize(bat.initial_worlds()?)
    }

    pub fn entries(&self) -> &[(World, Rational)] {
        &self.entries
    }

    pub fn support(&self) -> impl Iterator<Item = &World> {
        self.entries.iter().map(|(w, _)| w)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn weight(&self, w: &World) -> Rational {
        match self.entries.binary_search_by(|(x, _)| x.cmp(w)) {
            Ok(i) => self.entries[i].1.clone(),
            Err(_) => Rational::zero(),
        }
    }

    pub fn total(&self) -> Rational {
        self.entries.iter().fold(Rational::zero(), |s, (_, p)| s + p)
    }

    /// Total weight of worlds satisfying the objective formula.
    pub fn degree_of_belief(&self, f: &Formula, env: &mut Env) -> Result<Rational, EvalError> {
        let mut sum = Rational::zero();
        for (w, p) in &self.entries {
            if eval_objective(f, w, env)? {
                sum += p;
            }
        }
        Ok(sum)
    }

    /// Successor belief after observing `obs`: every believed world is
    /// progressed through every indistinguishable ground action that is
    /// possible there, weighted by its likelihood, then renormalized.
    pub fn update(&self, obs: &Observation, bat: &Bat) -> Result<BeliefState, BeliefError> {
        let candidates = bat.candidates(obs)?;
        let mut raw = Vec::with_capacity(self.entries.len() * candidates.len());
        for (w, p) in &self.entries {
            for a in &candidates {
                if !bat.poss(w, a)? {
                    continue;
                }
                let l = bat.likelihood(w, a)?;
                if l.is_zero() {
                    continue;
                }
                raw.push((bat.progress(w, a)?, p * l));
            }
        }
        BeliefState::normalize(raw).map_err(|e| match e {
            BeliefError::ZeroMass => BeliefError::InconsistentObservation(obs.to_string()),
            e => e,
        })
    }

    pub fn snapshot(&self, bat: &Bat) -> Vec<WeightedWorld> {
        self.entries
            .iter()
            .map(|(w, p)| WeightedWorld {
                world: WorldMap::of(bat, w),
                weight: format_ratio(p),
            })
            .collect()
    }

    pub fn display(&self, bat: &Bat) -> String {
        let parts: Vec<String> = self
            .entries
            .iter()
            .map(|(w, p)| format!("{}: {}", bat.show_world(w), format_ratio(p)))
            .collect();
        format!("[{}]", parts.join(", "))
    }
}

pub fn degree_of_belief(f: &Formula, b: &BeliefState, env: &mut Env) -> Result<Rational, EvalError> {
    b.degree_of_belief(f, env)
}

impl Epistemic for BeliefState {
    fn believes(&self, body: &Formula, env: &mut Env, op: CmpOp, bound: &Rational) -> Result<bool, EvalError> {
        let d = self.degree_of_belief(body, env)?;
        Ok(op.holds(d.cmp(bound)))
    }
}

/// A belief reduced to its support. Sufficient for every query whose bound is
/// 0 or 1 (in particular `Know`), because the support of an updated belief
/// depends only on the support of the prior.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SupportBelief {
    worlds: Vec<World>,
}

impl SupportBelief {
    pub fn new(mut worlds: Vec<World>) -> Result<SupportBelief, BeliefError> {
        worlds.sort();
        worlds.dedup();
        if worlds.is_empty() {
            return Err(BeliefError::ZeroMass);
        }
        Ok(SupportBelief { worlds })
    }

    pub fn of(b: &BeliefState) -> SupportBelief {
        SupportBelief {
            worlds: b.support().cloned().collect(),
        }
    }

    pub fn worlds(&self) -> &[World] {
        &self.worlds
    }
}

impl Epistemic for SupportBelief {
    fn believes(&self, body: &Formula, env: &mut Env, op: CmpOp, bound: &Rational) -> Result<bool, EvalError> {
        let mut any = false;
        let mut all = true;
        for w in &self.worlds {
            if eval_objective(body, w, env)? {
                any = true;
            } else {
                all = false;
            }
        }
        let zero = Rational::zero();
        let one = Rational::one();
        if *bound < zero || *bound > one {
            // Every degree lies in [0, 1].
            return Ok(op.holds(if *bound < zero {
                std::cmp::Ordering::Greater
            } else {
                std::cmp::Ordering::Less
            }));
        }
        // The degree is 0 when nothing holds, 1 when everything holds, and
        // strictly between otherwise.
        let ord_vs_zero = if any { std::cmp::Ordering::Greater } else { std::cmp::Ordering::Equal };
        let ord_vs_one = if all { std::cmp::Ordering::Equal } else { std::cmp::Ordering::Less };
        if bound.is_zero() {
            Ok(op.holds(ord_vs_zero))
        } else if bound.is_one() {
            Ok(op.holds(ord_vs_one))
        } else {
            Err(EvalError::WeightDependent)
        }
    }
}

/// Common interface of the two belief representations used by the engine
/// and the verifier.
pub trait BeliefModel: Epistemic + Clone + Eq + Ord + Hash + fmt::Debug + Send + Sync {
    fn initial(bat: &Bat) -> Result<Self, BeliefError>;
    fn update(&self, obs: &Observation, bat: &Bat) -> Result<Self, BeliefError>;
    fn contains(&self, w: &World) -> bool;
    fn worlds(&self) -> Vec<&World>;
    /// Exact normalization check (always true for supports).
    fn is_normalized(&self) -> bool;
}

impl BeliefModel for BeliefState {
    fn initial(bat: &Bat) -> Result<Self, BeliefError> {
        BeliefState::initial(bat)
    }

    fn update(&self, obs: &Observation, bat: &Bat) -> Result<Self, BeliefError> {
        BeliefState::update(self, obs, bat)
    }

    fn contains(&self, w: &World) -> bool {
        self.entries.binary_search_by(|(x, _)| x.cmp(w)).is_ok()
    }

    fn worlds(&self) -> Vec<&World> {
        self.support().collect()
    }

    fn is_normalized(&self) -> bool {
        self.total().is_one() && self.entries.iter().all(|(_, p)| *p > Rational::zero())
    }
}

impl BeliefModel for SupportBelief {
    fn initial(bat: &Bat) -> Result<Self, BeliefError> {
        Ok(SupportBelief::of(&BeliefState::initial(bat)?))
    }

    fn update(&self, obs: &Observation, bat: &Bat) -> Result<Self, BeliefError> {
        let candidates = bat.candidates(obs)?;
        let mut out = Vec::new();
        for w in &self.worlds {
            for a in &candidates {
                if bat.poss(w, a)? && !bat.likelihood(w, a)?.is_zero() {
                    out.push(bat.progress(w, a)?);
                }
            }
        }
        SupportBelief::new(out).map_err(|e| match e {
            BeliefError::ZeroMass => BeliefError::InconsistentObservation(obs.to_string()),
            e => e,
        })
    }

    fn contains(&self, w: &World) -> bool {
        self.worlds.binary_search(w).is_ok()
    }

    fn worlds(&self) -> Vec<&World> {
        self.worlds.iter().collect()
    }

    fn is_normalized(&self) -> bool {
        !self.worlds.is_empty()
    }
}

/// A world serialized as an ordered fluent → value map.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WorldMap(pub Vec<(Symbol, Value)>);

impl WorldMap {
    pub fn of(bat: &Bat, w: &World) -> WorldMap {
        WorldMap(
            bat.fluents
                .iter()
                .zip(w.values())
                .map(|(f, v)| (f.name.clone(), v.clone()))
                .collect(),
        )
    }

    pub fn to_world(&self, bat: &Bat) -> Result<World, ActionError> {
        let mut assignments = Vec::with_capacity(self.0.len());
        for (name, v) in &self.0 {
            let f = bat
                .fluent(name)
                .ok_or_else(|| ActionError::Initial(format!("unknown fluent {name}")))?;
            assignments.push((f, v.clone()));
        }
        bat.world_from(&assignments)
    }
}

impl Serialize for WorldMap {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.0.len()))?;
        for (k, v) in &self.0 {
            map.serialize_entry(&**k, v)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for WorldMap {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = WorldMap;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a map from fluent names to values")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<WorldMap, A::Error> {
                let mut out = Vec::new();
                while let Some((k, v)) = map.next_entry::<String, Value>()? {
                    out.push((Symbol::from(k), v));
                }
                Ok(WorldMap(out))
            }
        }
        d.deserialize_map(V)
    }
}

/// One entry of a belief snapshot: `{"world": {...}, "weight": "p/q"}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightedWorld {
    pub world: WorldMap,
    pub weight: String,
}

impl WeightedWorld {
    pub fn parse_weight(&self) -> Option<Rational> {
        parse_ratio(&self.weight)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::GroundAction;
    use crate::bundled;
    use crate::rational::ratio;

    fn w(loc: i64) -> World {
        World::new(vec![Value::Int(loc)])
    }

    fn belief(pairs: &[(i64, Rational)]) -> BeliefState {
        BeliefState::normalize(pairs.iter().map(|(l, p)| (w(*l), p.clone()))).unwrap()
    }

    fn obs(bat: &Bat, name: &str, args: &[i64]) -> Observation {
        bat.observation_of(&GroundAction::new(name, args.iter().map(|&a| Value::Int(a)).collect()))
            .unwrap()
    }

    #[test]
    fn normalize_examples() {
        let b = BeliefState::normalize(vec![(w(2), ratio(3, 50)), (w(3), ratio(8, 50))]).unwrap();
        assert_eq!(b, belief(&[(2, ratio(3, 11)), (3, ratio(8, 11))]));
        assert_eq!(b.weight(&w(2)), ratio(3, 11));
        let b = BeliefState::normalize(vec![(w(3), ratio(7, 1))]).unwrap();
        assert_eq!(b, BeliefState::certain(w(3)));
        let b = BeliefState::normalize(vec![(w(2), ratio(1, 2)), (w(2), ratio(1, 2))]).unwrap();
        assert_eq!(b, BeliefState::certain(w(2)));
        assert_eq!(BeliefState::normalize(vec![(w(2), ratio(0, 1))]), Err(BeliefError::ZeroMass));
        assert!(BeliefState::normalize(vec![(w(2), ratio(-1, 2))]).is_err());
    }

    #[test]
    fn canonical_order_is_input_order_independent() {
        let a = BeliefState::normalize(vec![(w(3), ratio(1, 3)), (w(1), ratio(2, 3))]).unwrap();
        let b = BeliefState::normalize(vec![(w(1), ratio(2, 3)), (w(3), ratio(1, 3))]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn move_then_sonar() {
        let bat = bundled::move_bat();
        let b = BeliefState::certain(w(3));
        let b = b.update(&obs(&bat, "move", &[-1, 0]), &bat).unwrap();
        assert_eq!(b, belief(&[(1, ratio(1, 5)), (2, ratio(3, 5)), (3, ratio(1, 5))]));
        let b = b.update(&obs(&bat, "sonar", &[3]), &bat).unwrap();
        assert_eq!(b, belief(&[(2, ratio(3, 11)), (3, ratio(8, 11))]));
    }

    #[test]
    fn pure_sensing_keeps_certainty() {
        let bat = bundled::move_bat();
        let b = BeliefState::certain(w(3)).update(&obs(&bat, "sonar", &[3]), &bat).unwrap();
        assert_eq!(b, BeliefState::certain(w(3)));
    }

    #[test]
    fn impossible_reading_is_inconsistent() {
        let bat = bundled::move_bat();
        let err = BeliefState::certain(w(3)).update(&obs(&bat, "sonar", &[9]), &bat).unwrap_err();
        assert!(matches!(err, BeliefError::InconsistentObservation(_)));
    }

    #[test]
    fn degrees_and_know() {
        let b = belief(&[(1, ratio(17, 241)), (2, ratio(216, 241)), (3, ratio(8, 241))]);
        let bat = bundled::move_bat();
        let loc = bat.fluent("Loc").unwrap();
        let eq = |v| Formula::cmp(CmpOp::Eq, crate::logic::Term::Fluent(loc.clone()), crate::logic::Term::int(v));
        assert_eq!(b.degree_of_belief(&eq(2), &mut Env::new()).unwrap(), ratio(216, 241));
        assert_eq!(b.degree_of_belief(&eq(3), &mut Env::new()).unwrap(), ratio(8, 241));
        assert!(b.degree_of_belief(&Formula::True, &mut Env::new()).unwrap().is_one());
        let know3 = Formula::know(eq(3));
        assert!(!crate::logic::eval_epistemic(&know3, &b, &mut Env::new()).unwrap());
        assert!(crate::logic::eval_epistemic(&know3, &BeliefState::certain(w(3)), &mut Env::new()).unwrap());
    }

    #[test]
    fn support_answers_zero_one_queries_only() {
        let s = SupportBelief::new(vec![w(1), w(2)]).unwrap();
        let bat = bundled::move_bat();
        let loc = bat.fluent("Loc").unwrap();
        let le2 = Formula::cmp(CmpOp::Le, crate::logic::Term::Fluent(loc.clone()), crate::logic::Term::int(2));
        let eq1 = Formula::cmp(CmpOp::Eq, crate::logic::Term::Fluent(loc), crate::logic::Term::int(1));
        let one = Rational::one();
        let zero = Rational::zero();
        assert!(s.believes(&le2, &mut Env::new(), CmpOp::Eq, &one).unwrap());
        assert!(!s.believes(&eq1, &mut Env::new(), CmpOp::Eq, &one).unwrap());
        assert!(s.believes(&eq1, &mut Env::new(), CmpOp::Gt, &zero).unwrap());
        assert!(s.believes(&eq1, &mut Env::new(), CmpOp::Lt, &one).unwrap());
        assert_eq!(
            s.believes(&eq1, &mut Env::new(), CmpOp::Ge, &ratio(1, 2)),
            Err(EvalError::WeightDependent)
        );
    }

    #[test]
    fn support_update_matches_exact_support() {
        let bat = bundled::move_bat();
        let b = belief(&[(1, ratio(17, 241)), (2, ratio(216, 241)), (3, ratio(8, 241))]);
        for o in [obs(&bat, "move", &[-1, 0]), obs(&bat, "sonar", &[1]), obs(&bat, "move", &[1, 0])] {
            let exact = b.update(&o, &bat).unwrap();
            let supp = SupportBelief::of(&b).update(&o, &bat).unwrap();
            assert_eq!(SupportBelief::of(&exact), supp);
        }
    }
}
