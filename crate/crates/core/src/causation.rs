//! The parametrized counterfactual definition of actual causation and its six
//! instantiations.
//!
//! A definition chooses a set of intrinsic laws, which are pinned to their
//! actual outcomes, and a set of irrelevant laws, which are deleted. The
//! score is the probability that undoing the cause avoids the effect in the
//! resulting theory.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::kernel::{CpTheory, LawId, Outcome, Rational};
use crate::reduction::{self, Def5Verdict};
use crate::story::{self, Context};
use crate::transform::{avoidance, determinize_with, remove_laws};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DefinitionName {
    Dependence,
    Hall07,
    Bv12,
    Bv07,
    Production,
    Production07,
}

impl DefinitionName {
    pub fn as_str(self) -> &'static str {
        match self {
            DefinitionName::Dependence => "dependence",
            DefinitionName::Hall07 => "hall07",
            DefinitionName::Bv12 => "bv12",
            DefinitionName::Bv07 => "bv07",
            DefinitionName::Production => "production",
            DefinitionName::Production07 => "production07",
        }
    }
}

impl fmt::Display for DefinitionName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DefinitionName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DefinitionSpec::by_name(s)
            .map(|spec| spec.name)
            .ok_or_else(|| Error::Context(format!("unknown definition `{s}`")))
    }
}

/// Which laws are pinned to their actual outcome.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IntrinsicRule {
    /// Every law applied in the story.
    AppliedLaws,
    /// The necessary laws.
    Necessary,
}

/// Which laws are deleted.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IrrelevantRule {
    None,
    /// Not applied by the time the effect occurred, yet still applicable in
    /// some continuation from that point.
    Preempted,
    /// Not applied by the time the effect occurred, or applied when its
    /// chosen atom was already true.
    Unproductive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DefinitionSpec {
    pub name: DefinitionName,
    pub intrinsic: IntrinsicRule,
    pub irrelevant: IrrelevantRule,
}

impl DefinitionSpec {
    /// Row by row: irrelevance rule first, intrinsic rule second.
    pub const ALL: [DefinitionSpec; 6] = [
        DefinitionSpec::new(
            DefinitionName::Dependence,
            IntrinsicRule::AppliedLaws,
            IrrelevantRule::None,
        ),
        DefinitionSpec::new(DefinitionName::Hall07, IntrinsicRule::Necessary, IrrelevantRule::None),
        DefinitionSpec::new(
            DefinitionName::Bv12,
            IntrinsicRule::AppliedLaws,
            IrrelevantRule::Preempted,
        ),
        DefinitionSpec::new(
            DefinitionName::Bv07,
            IntrinsicRule::Necessary,
            IrrelevantRule::Preempted,
        ),
        DefinitionSpec::new(
            DefinitionName::Production,
            IntrinsicRule::AppliedLaws,
            IrrelevantRule::Unproductive,
        ),
        DefinitionSpec::new(
            DefinitionName::Production07,
            IntrinsicRule::Necessary,
            IrrelevantRule::Unproductive,
        ),
    ];

    const fn new(name: DefinitionName, intrinsic: IntrinsicRule, irrelevant: IrrelevantRule) -> Self {
        DefinitionSpec {
            name,
            intrinsic,
            irrelevant,
        }
    }

    pub fn by_name(name: &str) -> Option<DefinitionSpec> {
        Self::ALL.into_iter().find(|s| s.name.as_str() == name)
    }

    pub fn get(name: DefinitionName) -> DefinitionSpec {
        Self::by_name(name.as_str()).expect("every name has a spec")
    }
}

/// Treatment of laws that are both intrinsic and irrelevant.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Overlap {
    /// Such laws are deleted.
    #[default]
    IrrelevantWins,
    /// Such laws are kept, pinned.
    IntrinsicWins,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Options {
    pub overlap: Overlap,
}

/// Intrinsic set together with how it was obtained.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Intrinsic {
    pub laws: BTreeMap<LawId, Outcome>,
    /// Simplicity of the story, for the necessary-laws rule.
    pub simple: Option<bool>,
}

#[derive(Clone, Debug)]
pub struct CausalVerdict {
    pub definition: DefinitionName,
    pub score: Rational,
    pub is_cause: bool,
    pub modified_theory: CpTheory,
    pub intrinsic: BTreeMap<LawId, Outcome>,
    pub irrelevant: BTreeSet<LawId>,
    /// Simplicity of the story, for definitions using necessary laws.
    pub simple: Option<bool>,
    /// Reduction-based verdict, reported for necessary-law definitions on
    /// stories that are not simple.
    pub def5: Option<Def5Verdict>,
    /// Set when the effect is a negative literal.
    pub extension: bool,
}

/// On simple stories a non-deterministic law is necessary exactly when no
/// reduction passes through a sibling of its node; deterministic laws have
/// no siblings and are kept. Other stories use the full enumeration.
pub fn intrinsic_set(rule: IntrinsicRule, ctx: &Context) -> Result<Intrinsic> {
    let story = ctx.story();
    match rule {
        IntrinsicRule::AppliedLaws => Ok(Intrinsic {
            laws: story.steps().iter().map(|s| (s.law, s.outcome)).collect(),
            simple: None,
        }),
        IntrinsicRule::Necessary => {
            if reduction::is_simple(ctx)? {
                let mut laws = BTreeMap::new();
                for step in story.steps() {
                    let law = ctx.theory().law(step.law).expect("validated");
                    if law.is_deterministic() || reduction::sibling_necessary(ctx, step.law)? {
                        laws.insert(step.law, step.outcome);
                    }
                }
                Ok(Intrinsic {
                    laws,
                    simple: Some(true),
                })
            } else {
                Ok(Intrinsic {
                    laws: reduction::necessary_laws(ctx)?,
                    simple: Some(false),
                })
            }
        }
    }
}

pub fn irrelevant_set(rule: IrrelevantRule, ctx: &Context) -> Result<BTreeSet<LawId>> {
    let story = ctx.story();
    let mut out = BTreeSet::new();
    if rule == IrrelevantRule::None {
        return Ok(out);
    }
    for law in ctx.theory().laws() {
        let early = story::applied_before(story, law.id, ctx.effect())?;
        let irrelevant = match rule {
            IrrelevantRule::None => false,
            IrrelevantRule::Preempted => {
                !early && story::could_have_applied(story, law.id, ctx.effect(), ctx.budget())?
            }
            IrrelevantRule::Unproductive => !early || story::effect_pretrue(story, law.id)?,
        };
        if irrelevant {
            out.insert(law.id);
        }
    }
    Ok(out)
}

/// Deletes the irrelevant laws and pins the intrinsic ones; everything else
/// is kept verbatim.
pub fn modified_theory(
    theory: &CpTheory,
    intrinsic: &BTreeMap<LawId, Outcome>,
    irrelevant: &BTreeSet<LawId>,
    overlap: Overlap,
) -> Result<CpTheory> {
    let (pinned, removed): (BTreeMap<_, _>, BTreeSet<_>) = match overlap {
        Overlap::IrrelevantWins => (
            intrinsic
                .iter()
                .filter(|(id, _)| !irrelevant.contains(id))
                .map(|(&id, &o)| (id, o))
                .collect(),
            irrelevant.clone(),
        ),
        Overlap::IntrinsicWins => (
            intrinsic.clone(),
            irrelevant
                .iter()
                .filter(|id| !intrinsic.contains_key(id))
                .copied()
                .collect(),
        ),
    };
    remove_laws(&determinize_with(theory, &pinned)?, &removed)
}

pub fn causal_score(spec: DefinitionSpec, ctx: &Context, options: Options) -> Result<CausalVerdict> {
    let intrinsic = intrinsic_set(spec.intrinsic, ctx)?;
    let irrelevant = irrelevant_set(spec.irrelevant, ctx)?;
    let modified = modified_theory(ctx.theory(), &intrinsic.laws, &irrelevant, options.overlap)?;
    let score = avoidance(&modified, ctx.cause(), ctx.effect(), ctx.budget())?;
    let def5 = match intrinsic.simple {
        Some(false) => Some(reduction::hall_def5(ctx)?),
        _ => None,
    };
    Ok(CausalVerdict {
        definition: spec.name,
        is_cause: score.is_positive(),
        score,
        modified_theory: modified,
        intrinsic: intrinsic.laws,
        irrelevant,
        simple: intrinsic.simple,
        def5,
        extension: ctx.is_extension(),
    })
}

/// One verdict per definition, in [`DefinitionSpec::ALL`] order.
pub fn compare_all(ctx: &Context, options: Options) -> Result<Vec<CausalVerdict>> {
    DefinitionSpec::ALL
        .into_iter()
        .map(|spec| causal_score(spec, ctx, options))
        .collect()
}
