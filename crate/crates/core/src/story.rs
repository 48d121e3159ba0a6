//! Stories: validated branches of a probability tree, plus the temporal and
//! structural predicates the causation definitions quantify over.

use std::collections::BTreeSet;
use std::ops::ControlFlow;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::kernel::{Atom, AtomSet, CpTheory, LawId, Literal, Outcome, Rational};
use crate::semantics::{applicable_positions, walk_leaves, Budget, NodeState, Schedule};

/// One law application with its chosen outcome.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Step {
    pub law: LawId,
    pub outcome: Outcome,
}

/// A complete branch of some probability tree of its theory.
#[derive(Clone, Debug)]
pub struct Story {
    theory: Arc<CpTheory>,
    steps: Vec<Step>,
    states: Vec<NodeState>,
    probability: Rational,
}

impl PartialEq for Story {
    fn eq(&self, other: &Self) -> bool {
        self.steps == other.steps && self.theory == other.theory
    }
}

impl Eq for Story {}

/// Replays `steps` from the root, checking that each law is applicable when
/// applied, that no law is applied twice, and that the last state is a leaf.
pub fn validate(theory: Arc<CpTheory>, steps: Vec<Step>) -> Result<Story> {
    let mut states = vec![NodeState::root(&theory)];
    let mut probability = Rational::one();
    for (i, step) in steps.iter().enumerate() {
        let n = i + 1;
        let pos = theory
            .position(step.law)
            .ok_or_else(|| Error::UnknownLaw(step.law.to_string()))?;
        let law = &theory.laws()[pos];
        let state = states.last().expect("root present");
        if state.is_applied(&theory, step.law) {
            return Err(Error::Story(format!("step {n}: law {} is applied twice", step.law)));
        }
        if !applicable_positions(&theory, state).contains(&pos) {
            return Err(Error::Story(format!("step {n}: law {} is not applicable", step.law)));
        }
        let p = law
            .outcome_probability(step.outcome)
            .filter(Rational::is_positive)
            .ok_or_else(|| Error::Story(format!("step {n}: law {} has no outcome {}", step.law, step.outcome)))?;
        probability = probability * p;
        let next = state.apply(&theory, pos, step.outcome);
        states.push(next);
    }
    let last = states.last().expect("root present");
    let pending = applicable_positions(&theory, last);
    if let Some(&pos) = pending.first() {
        return Err(Error::Story(format!(
            "story ends early: law {} is still applicable",
            theory.laws()[pos].id
        )));
    }
    Ok(Story {
        theory,
        steps,
        states,
        probability,
    })
}

impl Story {
    pub fn theory(&self) -> &Arc<CpTheory> {
        &self.theory
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    /// Product of the probabilities of the chosen outcomes.
    pub fn probability(&self) -> &Rational {
        &self.probability
    }

    /// True atoms at the leaf.
    pub fn leaf(&self) -> &AtomSet {
        self.states.last().expect("root present").true_atoms()
    }

    pub fn leaf_atoms(&self) -> BTreeSet<Atom> {
        self.leaf().to_atoms(&self.theory)
    }

    /// Ids of the applied laws.
    pub fn laws(&self) -> BTreeSet<LawId> {
        self.steps.iter().map(|s| s.law).collect()
    }

    pub fn outcome_of(&self, law: LawId) -> Option<Outcome> {
        self.steps.iter().find(|s| s.law == law).map(|s| s.outcome)
    }

    /// Zero-based step index of the application of `law`.
    pub fn index_of(&self, law: LawId) -> Option<usize> {
        self.steps.iter().position(|s| s.law == law)
    }

    /// State after the first `k` steps; `k = 0` is the root.
    pub fn prefix_state(&self, k: usize) -> &NodeState {
        &self.states[k]
    }

    /// Whether `literal` holds at the leaf. Atoms outside the vocabulary are
    /// false.
    pub fn holds(&self, literal: &Literal) -> bool {
        let present = self
            .theory
            .atom_index(&literal.atom)
            .is_some_and(|i| self.leaf().contains(i));
        present == literal.positive
    }

    fn require_step(&self, law: LawId) -> Result<usize> {
        self.index_of(law)
            .ok_or_else(|| Error::Context(format!("law {law} is not applied in the story")))
    }
}

/// A story together with a candidate cause and effect, both holding at the
/// leaf. A negative effect is an extension of the usual setting.
#[derive(Clone, Debug)]
pub struct Context {
    story: Story,
    cause: Literal,
    effect: Literal,
    budget: Budget,
}

impl Context {
    pub fn new(story: Story, cause: Literal, effect: Literal) -> Result<Self> {
        for (role, lit) in [("cause", &cause), ("effect", &effect)] {
            story.theory.require_atom(&lit.atom)?;
            if !story.holds(lit) {
                return Err(Error::Context(format!(
                    "{role} {lit} does not hold at the end of the story"
                )));
            }
        }
        Ok(Context {
            story,
            cause,
            effect,
            budget: Budget::DEFAULT,
        })
    }

    pub fn with_budget(mut self, budget: Budget) -> Self {
        self.budget = budget;
        self
    }

    pub fn story(&self) -> &Story {
        &self.story
    }

    pub fn theory(&self) -> &Arc<CpTheory> {
        &self.story.theory
    }

    pub fn cause(&self) -> &Literal {
        &self.cause
    }

    pub fn effect(&self) -> &Literal {
        &self.effect
    }

    pub fn budget(&self) -> Budget {
        self.budget
    }

    /// True when the effect is a negative literal.
    pub fn is_extension(&self) -> bool {
        !self.effect.positive
    }

    /// Whether both cause and effect hold in `leaf`.
    pub(crate) fn ce_hold(&self, leaf: &AtomSet) -> bool {
        let theory = self.theory();
        [&self.cause, &self.effect].iter().all(|l| {
            let i = theory.atom_index(&l.atom).expect("validated");
            leaf.contains(i) == l.positive
        })
    }
}

/// Number of steps after which `effect` holds for good: for a positive
/// literal, the 1-based step that made the atom true; for a negative one, the
/// first prefix after which the atom can no longer become true.
pub fn effect_position(story: &Story, effect: &Literal) -> Result<usize> {
    if !story.holds(effect) {
        return Err(Error::Context(format!(
            "{effect} does not hold at the end of the story"
        )));
    }
    let idx = story.theory.require_atom(&effect.atom)?;
    let position = if effect.positive {
        story.states.iter().position(|s| s.true_atoms().contains(idx))
    } else {
        story.states.iter().position(|s| s.impossible_atoms().contains(idx))
    };
    Ok(position.expect("the leaf settles every atom"))
}

/// Whether `law` was applied no later than the step at which `effect`
/// occurred.
pub fn applied_before(story: &Story, law: LawId, effect: &Literal) -> Result<bool> {
    let at = effect_position(story, effect)?;
    Ok(story.index_of(law).is_some_and(|i| i < at))
}

/// Whether the atom chosen by `law` was already true when the law was applied.
pub fn effect_pretrue(story: &Story, law: LawId) -> Result<bool> {
    let i = story.require_step(law)?;
    let step = story.steps[i];
    let pos = story.theory.position(law).expect("validated");
    Ok(match step.outcome {
        Outcome::Disjunct(k) => story.states[i]
            .true_atoms()
            .contains(story.theory.compiled()[pos].head[k]),
        Outcome::Nothing => false,
    })
}

/// Whether some branch that agrees with `story` up to the occurrence of
/// `effect` applies `law` afterwards.
pub fn could_have_applied(story: &Story, law: LawId, effect: &Literal, budget: Budget) -> Result<bool> {
    if applied_before(story, law, effect)? {
        return Err(Error::Context(format!(
            "law {law} was already applied when {effect} occurred"
        )));
    }
    if story.index_of(law).is_some() {
        return Ok(true);
    }
    let theory = &story.theory;
    if theory.law(law).is_none() {
        return Err(Error::UnknownLaw(law.to_string()));
    }
    let start = story.prefix_state(effect_position(story, effect)?);
    let mut found = false;
    walk_leaves(theory, start, &Schedule::Canonical, budget, |_, leaf, _| {
        if leaf.is_applied(theory, law) {
            found = true;
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    })?;
    Ok(found)
}

/// Outcomes of `law` other than the one chosen in `story`.
pub fn sibling_outcomes(story: &Story, law: LawId) -> Result<Vec<Outcome>> {
    let i = story.require_step(law)?;
    let chosen = story.steps[i].outcome;
    let rule = story.theory.law(law).expect("validated");
    Ok(rule
        .outcomes()
        .into_iter()
        .map(|(o, _)| o)
        .filter(|&o| o != chosen)
        .collect())
}

/// Visits every leaf of the subtree rooted at the sibling node reached by
/// applying `law` with `outcome` right after the story prefix preceding it.
pub(crate) fn walk_sibling<F>(story: &Story, law: LawId, outcome: Outcome, budget: Budget, mut visit: F) -> Result<()>
where
    F: FnMut(&NodeState) -> ControlFlow<()>,
{
    let i = story.require_step(law)?;
    let theory = &story.theory;
    let pos = theory.position(law).expect("validated");
    let node = story.states[i].apply(theory, pos, outcome);
    walk_leaves(theory, &node, &Schedule::Canonical, budget, |_, leaf, _| visit(leaf))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse_literal, parse_story, parse_theory};

    const SUZY: &str =
        "Throws(Suzy) <- .\nThrows(Billy) <- .\nBreaks:0.9 <- Throws(Suzy).\nBreaks:0.8 <- Throws(Billy).\n";
    const ASSASSIN: &str = "Assassin:0.5 <- .\nMurderer:0.5 <- .\nBackup:0.5 <- ~Assassin.\nDies <- Assassin.\nDies <- Backup.\nDies <- Murderer.\n";

    fn lit(s: &str) -> Literal {
        parse_literal(s).unwrap()
    }

    fn suzy() -> Story {
        parse_story("1:1 2:1 3:1 4:1", Arc::new(parse_theory(SUZY).unwrap())).unwrap()
    }

    fn assassin() -> Story {
        parse_story("1:1 2:1 4:1 6:1", Arc::new(parse_theory(ASSASSIN).unwrap())).unwrap()
    }

    #[test]
    fn validation() {
        let s = suzy();
        assert_eq!(s.leaf_atoms().len(), 3);
        assert_eq!(s.probability(), &Rational::new(18, 25));
        let a = assassin();
        assert_eq!(
            a.leaf_atoms(),
            ["Assassin", "Murderer", "Dies"].into_iter().map(Atom::named).collect()
        );
        let t = Arc::new(parse_theory(SUZY).unwrap());
        let err = parse_story("1:1 2:1 3:1", t.clone()).unwrap_err();
        assert!(err.to_string().contains("law 4 is still applicable"), "{err}");
        let err = parse_story("3:1", t.clone()).unwrap_err();
        assert!(err.to_string().contains("not applicable"), "{err}");
        let at = Arc::new(parse_theory(ASSASSIN).unwrap());
        assert!(parse_story("1:1 3:1", at).is_err());
        let det = Arc::new(parse_theory("A <- .").unwrap());
        assert!(parse_story("1:none", det).is_err());
    }

    #[test]
    fn effect_positions() {
        assert_eq!(effect_position(&suzy(), &lit("Breaks")).unwrap(), 3);
        assert_eq!(effect_position(&assassin(), &lit("Dies")).unwrap(), 3);
        assert_eq!(effect_position(&suzy(), &lit("Throws(Suzy)")).unwrap(), 1);
        assert!(effect_position(&assassin(), &lit("Backup")).is_err());
        // Backup is impossible as soon as Assassin is true
        assert_eq!(effect_position(&assassin(), &lit("~Backup")).unwrap(), 1);
    }

    #[test]
    fn temporal_predicates() {
        let s = suzy();
        let breaks = lit("Breaks");
        assert!(!applied_before(&s, 4, &breaks).unwrap());
        assert!(applied_before(&s, 3, &breaks).unwrap());
        assert!(effect_pretrue(&s, 4).unwrap());
        assert!(!effect_pretrue(&s, 3).unwrap());
        assert!(!effect_pretrue(&s, 1).unwrap());
        assert!(could_have_applied(&s, 4, &breaks, Budget::DEFAULT).unwrap());
        assert!(could_have_applied(&s, 3, &breaks, Budget::DEFAULT).is_err());

        let a = assassin();
        let dies = lit("Dies");
        assert!(!could_have_applied(&a, 3, &dies, Budget::DEFAULT).unwrap());
        assert!(!could_have_applied(&a, 5, &dies, Budget::DEFAULT).unwrap());
        assert!(could_have_applied(&a, 6, &dies, Budget::DEFAULT).unwrap());
        assert!(effect_pretrue(&a, 6).unwrap());
    }

    #[test]
    fn siblings() {
        let s = suzy();
        assert_eq!(sibling_outcomes(&s, 3).unwrap(), vec![Outcome::Nothing]);
        assert!(sibling_outcomes(&s, 1).unwrap().is_empty());
        assert_eq!(sibling_outcomes(&assassin(), 1).unwrap(), vec![Outcome::Nothing]);
        assert!(sibling_outcomes(&assassin(), 3).is_err());
    }

    #[test]
    fn contexts() {
        let a = assassin();
        assert!(Context::new(a.clone(), lit("Assassin"), lit("Dies")).is_ok());
        assert!(Context::new(a.clone(), lit("~Backup"), lit("Dies")).is_ok());
        assert!(Context::new(a.clone(), lit("Backup"), lit("Dies")).is_err());
        assert!(matches!(
            Context::new(a.clone(), lit("Ghost"), lit("Dies")),
            Err(Error::UnknownAtom(_))
        ));
        let ctx = Context::new(a, lit("Assassin"), lit("~Backup")).unwrap();
        assert!(ctx.is_extension());
    }
}
