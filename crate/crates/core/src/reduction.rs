//! (C,E)-reductions of a story and the brute-force notions built on them:
//! necessary laws, simple stories, Hall's reduction-based definition and the
//! sibling criterion for necessity.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::ControlFlow;

use crate::error::{Error, Result};
use crate::kernel::{LawId, Outcome, Rational};
use crate::semantics::{enumerate_branches, Schedule};
use crate::story::{self, Context, Step, Story};
use crate::transform::{avoidance, determinize_all, determinize_with};

/// Branches whose leaf lies inside the base leaf and in which both cause and
/// effect hold. The base story is always the first member.
#[derive(Clone, Debug)]
pub struct ReductionSet {
    members: Vec<Story>,
}

impl ReductionSet {
    pub fn base(&self) -> &Story {
        &self.members[0]
    }

    pub fn members(&self) -> &[Story] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Whether `candidate` reduces `base`: its leaf is a subset of the base leaf.
pub fn is_reduction(candidate: &Story, base: &Story) -> Result<bool> {
    if candidate.theory() != base.theory() {
        return Err(Error::Context("stories belong to different theories".into()));
    }
    Ok(candidate.leaf().is_subset(base.leaf()))
}

fn selection(story: &Story) -> BTreeSet<Step> {
    story.steps().iter().copied().collect()
}

fn qualifies(ctx: &Context, leaf: &crate::kernel::AtomSet) -> bool {
    ctx.ce_hold(leaf) && leaf.is_subset(ctx.story().leaf())
}

/// All (C,E)-reductions. Branches are enumerated in the canonical tree; a
/// branch making the same choices as the base story is represented by the
/// base itself.
pub fn ce_reductions(ctx: &Context) -> Result<ReductionSet> {
    let base = ctx.story().clone();
    let own = selection(&base);
    let mut members = vec![base];
    for d in enumerate_branches(ctx.theory(), &Schedule::Canonical, ctx.budget())? {
        if qualifies(ctx, d.leaf()) && selection(&d) != own {
            members.push(d);
        }
    }
    Ok(ReductionSet { members })
}

/// Laws applied with one and the same outcome in every member.
pub fn necessary_in(set: &ReductionSet) -> BTreeMap<LawId, Outcome> {
    let mut nec: BTreeMap<LawId, Outcome> = set.base().steps().iter().map(|s| (s.law, s.outcome)).collect();
    for d in &set.members()[1..] {
        nec.retain(|&law, &mut outcome| d.outcome_of(law) == Some(outcome));
    }
    nec
}

pub fn necessary_laws(ctx: &Context) -> Result<BTreeMap<LawId, Outcome>> {
    Ok(necessary_in(&ce_reductions(ctx)?))
}

/// Whether some branch through a sibling of the node at which `law` is
/// applied in `d` is a (C,E)-reduction of the context's story.
fn reduction_through_sibling(ctx: &Context, d: &Story, law: LawId) -> Result<bool> {
    let mut found = false;
    for outcome in story::sibling_outcomes(d, law)? {
        story::walk_sibling(d, law, outcome, ctx.budget(), |leaf| {
            if qualifies(ctx, leaf.true_atoms()) {
                found = true;
                ControlFlow::Break(())
            } else {
                ControlFlow::Continue(())
            }
        })?;
        if found {
            break;
        }
    }
    Ok(found)
}

/// Simplicity: every law applied in the story has at most two alternatives
/// (the implicit empty disjunct included), and every non-necessary
/// non-deterministic choice in a member can be swapped for its sibling while
/// staying inside the reduction set.
pub fn is_simple(ctx: &Context) -> Result<bool> {
    let theory = ctx.theory();
    let narrow = ctx
        .story()
        .steps()
        .iter()
        .all(|s| theory.law(s.law).expect("validated").alternatives() <= 2);
    if !narrow {
        return Ok(false);
    }
    let set = ce_reductions(ctx)?;
    let nec = necessary_in(&set);
    for d in set.members() {
        for step in d.steps() {
            let law = theory.law(step.law).expect("validated");
            if law.is_deterministic() || nec.contains_key(&step.law) {
                continue;
            }
            if !reduction_through_sibling(ctx, d, step.law)? {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Outcome of the reduction-based definition: the cause counts when undoing
/// it avoids the effect with positive probability in the determinized theory
/// of some reduction.
#[derive(Clone, Debug)]
pub struct Def5Verdict {
    pub holds: bool,
    /// Largest avoidance probability over all reductions.
    pub best: Rational,
    /// A reduction attaining `best`.
    pub witness: Story,
}

pub fn hall_def5(ctx: &Context) -> Result<Def5Verdict> {
    let set = ce_reductions(ctx)?;
    let mut best: Option<(Rational, &Story)> = None;
    for d in set.members() {
        let p = avoidance(&determinize_all(d)?, ctx.cause(), ctx.effect(), ctx.budget())?;
        if best.as_ref().is_none_or(|(b, _)| p > *b) {
            best = Some((p, d));
        }
    }
    let (best, witness) = best.expect("the base story is a member");
    Ok(Def5Verdict {
        holds: best.is_positive(),
        best,
        witness: witness.clone(),
    })
}

/// Sibling criterion: no (C,E)-reduction passes through a sibling of the
/// node at which `law` is applied in the story. Vacuously true for laws
/// without siblings.
pub fn sibling_necessary(ctx: &Context, law: LawId) -> Result<bool> {
    Ok(!reduction_through_sibling(ctx, ctx.story(), law)?)
}

/// Avoidance probability in the theory with only the necessary laws pinned.
pub fn nec_score(ctx: &Context) -> Result<Rational> {
    let pinned = determinize_with(ctx.theory(), &necessary_laws(ctx)?)?;
    avoidance(&pinned, ctx.cause(), ctx.effect(), ctx.budget())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::Literal;
    use crate::parser::{parse_literal, parse_story, parse_theory};
    use std::sync::Arc;

    const SUZY: &str =
        "Throws(Suzy) <- .\nThrows(Billy) <- .\nBreaks:0.9 <- Throws(Suzy).\nBreaks:0.8 <- Throws(Billy).\n";

    fn assassin(p: &str, q: &str, r: &str) -> String {
        format!("Assassin:{p} <- .\nMurderer:{q} <- .\nBackup:{r} <- ~Assassin.\nDies <- Assassin.\nDies <- Backup.\nDies <- Murderer.\n")
    }

    fn lit(s: &str) -> Literal {
        parse_literal(s).unwrap()
    }

    fn ctx(theory: &str, story: &str, c: &str, e: &str) -> Context {
        let t = Arc::new(parse_theory(theory).unwrap());
        Context::new(parse_story(story, t).unwrap(), lit(c), lit(e)).unwrap()
    }

    fn suzy() -> Context {
        ctx(SUZY, "1:1 2:1 3:1 4:1", "Throws(Suzy)", "Breaks")
    }

    fn assassin_ctx() -> Context {
        ctx(&assassin("1/2", "1/3", "1/5"), "1:1 2:1 4:1 6:1", "Assassin", "Dies")
    }

    #[test]
    fn reduction_relation() {
        let t = Arc::new(parse_theory(SUZY).unwrap());
        let base = parse_story("1:1 2:1 3:1 4:1", t.clone()).unwrap();
        let other = parse_story("1:1 2:1 3:none 4:1", t.clone()).unwrap();
        let none = parse_story("1:1 2:1 3:none 4:none", t).unwrap();
        assert!(is_reduction(&other, &base).unwrap());
        assert!(is_reduction(&base, &base).unwrap());
        assert!(is_reduction(&none, &base).unwrap());
        assert!(!is_reduction(&base, &none).unwrap());
    }

    #[test]
    fn suzy_reductions() {
        let c = suzy();
        let set = ce_reductions(&c).unwrap();
        assert_eq!(set.len(), 3);
        assert_eq!(set.base(), c.story());
        let nec = necessary_laws(&c).unwrap();
        assert_eq!(nec.keys().copied().collect::<Vec<_>>(), vec![1, 2]);
        // swapping Billy's hit in the member where Suzy missed loses the effect
        assert!(!is_simple(&c).unwrap());
        let def5 = hall_def5(&c).unwrap();
        assert!(def5.holds);
        assert!(def5.best.is_one());
        assert_eq!(def5.witness.outcome_of(4), Some(Outcome::Nothing));
        assert!(!sibling_necessary(&c, 3).unwrap());
        assert!(sibling_necessary(&c, 1).unwrap());
    }

    #[test]
    fn assassin_reductions() {
        let c = assassin_ctx();
        let set = ce_reductions(&c).unwrap();
        assert_eq!(set.len(), 2);
        assert!(set
            .members()
            .iter()
            .all(|d| d.outcome_of(1) == Some(Outcome::Disjunct(0))));
        let nec = necessary_laws(&c).unwrap();
        assert_eq!(nec.keys().copied().collect::<Vec<_>>(), vec![1, 4]);
        assert!(sibling_necessary(&c, 1).unwrap());
        assert!(!sibling_necessary(&c, 2).unwrap());
        let def5 = hall_def5(&c).unwrap();
        assert!(def5.holds);
        // the member in which Murderer stays idle leaves only Backup: 1 - r
        assert_eq!(def5.best, Rational::new(4, 5));
        assert_eq!(nec_score(&c).unwrap(), Rational::new(4, 5) * Rational::new(2, 3));
    }

    #[test]
    fn simplicity() {
        let det = ctx("C <- .\nM <- C.\nE <- M.\n", "1:1 2:1 3:1", "C", "E");
        assert!(is_simple(&det).unwrap());
        assert_eq!(ce_reductions(&det).unwrap().len(), 1);
        assert_eq!(necessary_laws(&det).unwrap().len(), 3);
        // C causes A and B, either of which suffices for E
        let two_paths = "C <- .\nA:1/2 <- C.\nB:1/2 <- C.\nE <- A.\nE <- B.\n";
        let c = ctx(two_paths, "1:1 2:1 3:1 4:1 5:1", "C", "E");
        assert!(!is_simple(&c).unwrap());
        let wide = ctx("X:1/3 | Y:1/3 <- .\nE <- X.\n", "1:1 2:1", "X", "E");
        assert!(!is_simple(&wide).unwrap());
    }

    #[test]
    fn no_avoiding_reduction() {
        let c = ctx("C <- .\nE <- .\n", "1:1 2:1", "C", "E");
        let def5 = hall_def5(&c).unwrap();
        assert!(!def5.holds);
        assert!(def5.best.is_zero());
    }
}
