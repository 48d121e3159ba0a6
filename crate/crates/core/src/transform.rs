//! Theory surgery: determinization against a story, interventions and law
//! removal. Law ids are preserved by every operation.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::kernel::{Atom, CpLaw, CpTheory, Disjunct, LawId, Literal, Outcome, Rational};
use crate::semantics::{marginal, Budget};
use crate::story::Story;

/// Replaces the head of each law in `pinned` by its pinned outcome with
/// probability 1, or by the empty head when the outcome is `Nothing`.
pub fn determinize_with(theory: &CpTheory, pinned: &BTreeMap<LawId, Outcome>) -> Result<CpTheory> {
    for id in pinned.keys() {
        if theory.law(*id).is_none() {
            return Err(Error::UnknownLaw(id.to_string()));
        }
    }
    let laws = theory
        .laws()
        .iter()
        .map(|law| match pinned.get(&law.id) {
            None => Ok(law.clone()),
            Some(&outcome) => {
                let head = match outcome {
                    Outcome::Nothing => Vec::new(),
                    Outcome::Disjunct(k) => {
                        let d = law
                            .head
                            .get(k)
                            .ok_or_else(|| Error::theory(Some(law.id), format!("law has no disjunct {outcome}")))?;
                        vec![Disjunct {
                            atom: d.atom.clone(),
                            prob: Rational::one(),
                        }]
                    }
                };
                Ok(CpLaw { head, ..law.clone() })
            }
        })
        .collect::<Result<Vec<_>>>()?;
    theory.derive(laws)
}

/// Pins the laws in `subset` to the outcomes they received in `story`.
pub fn determinize(theory: &CpTheory, story: &Story, subset: &BTreeSet<LawId>) -> Result<CpTheory> {
    let pinned = subset
        .iter()
        .map(|&id| {
            story
                .outcome_of(id)
                .map(|o| (id, o))
                .ok_or_else(|| Error::Context(format!("law {id} is not applied in the story")))
        })
        .collect::<Result<BTreeMap<_, _>>>()?;
    determinize_with(theory, &pinned)
}

/// The story-determinized theory: every applied law pinned.
pub fn determinize_all(story: &Story) -> Result<CpTheory> {
    determinize(story.theory(), story, &story.laws())
}

/// do(¬atom): deletes `atom` from every head.
pub fn intervene_negative(theory: &CpTheory, atom: &Atom) -> Result<CpTheory> {
    theory.require_atom(atom)?;
    let laws = theory
        .laws()
        .iter()
        .map(|law| CpLaw {
            head: law.head.iter().filter(|d| &d.atom != atom).cloned().collect(),
            ..law.clone()
        })
        .collect();
    theory.derive(laws)
}

/// do(atom): appends the vacuous law `atom <- .` with a fresh id.
pub fn intervene_positive(theory: &CpTheory, atom: &Atom) -> Result<CpTheory> {
    let mut laws = theory.laws().to_vec();
    laws.push(CpLaw::new(
        theory.next_id(),
        vec![Disjunct {
            atom: atom.clone(),
            prob: Rational::one(),
        }],
        Vec::new(),
    ));
    theory.derive(laws)
}

/// do(literal): the negative intervention for `~A`, the positive one for `A`.
pub fn intervene(theory: &CpTheory, literal: &Literal) -> Result<CpTheory> {
    if literal.positive {
        intervene_positive(theory, &literal.atom)
    } else {
        intervene_negative(theory, &literal.atom)
    }
}

/// Deletes the given laws; the others keep their ids.
pub fn remove_laws(theory: &CpTheory, subset: &BTreeSet<LawId>) -> Result<CpTheory> {
    if let Some(id) = subset.iter().find(|&&id| theory.law(id).is_none()) {
        return Err(Error::UnknownLaw(id.to_string()));
    }
    let laws = theory
        .laws()
        .iter()
        .filter(|l| !subset.contains(&l.id))
        .cloned()
        .collect();
    theory.derive(laws)
}

/// Replaces the probability of disjunct `index` (0-based) in the law labelled
/// `label`. Without an index the law must have a single disjunct.
pub fn set_probability(theory: &CpTheory, label: &str, index: Option<usize>, value: Rational) -> Result<CpTheory> {
    let target = theory
        .law_by_label(label)
        .ok_or_else(|| Error::UnknownLaw(label.to_string()))?;
    let k = match index {
        Some(k) if k < target.head.len() => k,
        Some(k) => {
            return Err(Error::theory(
                Some(target.id),
                format!("head has no disjunct {}", k + 1),
            ))
        }
        None if target.head.len() == 1 => 0,
        None => {
            return Err(Error::theory(
                Some(target.id),
                format!("head has {} disjuncts; name one as `{label}.k`", target.head.len()),
            ))
        }
    };
    let laws = theory
        .laws()
        .iter()
        .map(|law| {
            let mut law = law.clone();
            if law.id == target.id {
                law.head[k].prob = value.clone();
            }
            law
        })
        .collect();
    theory.derive(laws)
}

/// Probability of `query` in `story`'s determinized theory after the
/// intervention `action`.
pub fn counterfactual(story: &Story, action: &Literal, query: &[Literal], budget: Budget) -> Result<Rational> {
    let pinned = determinize_all(story)?;
    marginal(&intervene(&pinned, action)?, query, budget)
}

/// Probability that the effect is avoided when the cause is undone: for a
/// positive cause `C` the intervention is do(¬C), for a negative one do(C);
/// the query is the negation of `effect`.
pub fn avoidance(theory: &CpTheory, cause: &Literal, effect: &Literal, budget: Budget) -> Result<Rational> {
    let intervened = intervene(theory, &cause.negated())?;
    marginal(&intervened, &[effect.negated()], budget)
}
