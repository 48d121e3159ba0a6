//! Randomized cross-checks between independent computations: diagram-level
//! tests against their CP-logic counterparts, reduction-based notions against
//! the sibling criterion, and schedule independence of the semantics.

use std::collections::BTreeSet;
use std::fmt;

use crate::causation::{causal_score, DefinitionName, DefinitionSpec, Options};
use crate::corpus::{self, TheoryShape};
use crate::error::Result;
use crate::kernel::{Atom, Literal};
use crate::neuron::{self, Assignment, NeuronDiagram};
use crate::reduction::{hall_def5, is_simple, nec_score, necessary_laws, sibling_necessary};
use crate::semantics::{distribution, enumerate_branches, Budget, Schedule};
use crate::story::Context;

/// Outcome of one check over a corpus.
#[derive(Clone, Debug, Default)]
pub struct CheckReport {
    pub name: &'static str,
    /// Number of cases examined.
    pub cases: usize,
    /// Cases skipped because the budget ran out.
    pub skipped: usize,
    pub discrepancies: Vec<String>,
}

impl CheckReport {
    fn new(name: &'static str) -> Self {
        CheckReport {
            name,
            ..Default::default()
        }
    }

    pub fn passed(&self) -> bool {
        self.discrepancies.is_empty()
    }

    fn record(&mut self, outcome: Result<Option<String>>) -> Result<()> {
        match outcome {
            Ok(found) => {
                self.cases += 1;
                self.discrepancies.extend(found);
                Ok(())
            }
            Err(e) if e.is_resource_limit() => {
                self.skipped += 1;
                Ok(())
            }
            Err(e) => Err(e),
        }
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed() { "ok" } else { "FAIL" };
        write!(f, "{:<18} {verdict:<4} cases={}", self.name, self.cases)?;
        if self.skipped > 0 {
            write!(f, " skipped={}", self.skipped)?;
        }
        if !self.passed() {
            write!(f, " discrepancies={}", self.discrepancies.len())?;
        }
        Ok(())
    }
}

/// Corpus sizes for [`run_battery`].
#[derive(Clone, Copy, Debug)]
pub struct BatteryConfig {
    pub seed: u64,
    pub theories: usize,
    pub diagrams: usize,
    pub shape: TheoryShape,
    pub max_nodes: usize,
    pub budget: Budget,
}

impl Default for BatteryConfig {
    fn default() -> Self {
        BatteryConfig {
            seed: 0,
            theories: 200,
            diagrams: 200,
            shape: TheoryShape::default(),
            max_nodes: 6,
            budget: Budget(200_000),
        }
    }
}

fn fired_pairs(diagram: &NeuronDiagram) -> Vec<(String, String)> {
    let fired = diagram.fired();
    let mut pairs = Vec::new();
    for c in &fired {
        for e in &fired {
            if c != e {
                pairs.push((c.clone(), e.clone()));
            }
        }
    }
    pairs
}

fn diagram_context(diagram: &NeuronDiagram, c: &str, e: &str, budget: Budget) -> Result<Context> {
    let (_, story) = neuron::translate(diagram)?;
    Ok(Context::new(story, Literal::pos(Atom::named(c)), Literal::pos(Atom::named(e)))?.with_budget(budget))
}

fn describe(diagram: &NeuronDiagram) -> String {
    diagram.to_json().split_whitespace().collect()
}

/// The diagram-level reduction test agrees with the reduction-based
/// definition on the translated theory.
pub fn check_hall_translation(diagrams: &[NeuronDiagram], budget: Budget) -> Result<CheckReport> {
    let mut report = CheckReport::new("hall-translation");
    for d in diagrams {
        for (c, e) in fired_pairs(d) {
            report.record((|| {
                let lhs = neuron::hall_cause_diagram(d, &c, &e)?;
                let rhs = hall_def5(&diagram_context(d, &c, &e, budget)?)?.holds;
                Ok((lhs != rhs).then(|| format!("{c}->{e}: diagram {lhs}, theory {rhs} in {}", describe(d))))
            })())?;
        }
    }
    Ok(report)
}

/// The reduction-based definition implies a positive score when only the
/// necessary laws are pinned; on simple stories the two coincide.
pub fn check_def5_vs_nec(contexts: &[Context]) -> Result<CheckReport> {
    let mut report = CheckReport::new("def5-vs-nec");
    for ctx in contexts {
        report.record((|| {
            let def5 = hall_def5(ctx)?.holds;
            let nec = nec_score(ctx)?.is_positive();
            let simple = is_simple(ctx)?;
            let bad = (def5 && !nec) || (simple && def5 != nec);
            Ok(bad.then(|| {
                format!(
                    "def5 {def5}, nec score positive {nec}, simple {simple} in {}",
                    show(ctx)
                )
            }))
        })())?;
    }
    Ok(report)
}

/// On simple stories the sibling criterion picks out exactly the
/// non-deterministic laws that are necessary. Only simple stories count as
/// cases.
pub fn check_sibling_criterion(contexts: &[Context]) -> Result<CheckReport> {
    let mut report = CheckReport::new("sibling-criterion");
    for ctx in contexts {
        match is_simple(ctx) {
            Ok(true) => {}
            Ok(false) => continue,
            Err(e) if e.is_resource_limit() => {
                report.skipped += 1;
                continue;
            }
            Err(e) => return Err(e),
        }
        report.record((|| {
            let nec = necessary_laws(ctx)?;
            for step in ctx.story().steps() {
                let law = ctx.theory().law(step.law).expect("validated");
                if law.is_deterministic() {
                    continue;
                }
                let sib = sibling_necessary(ctx, step.law)?;
                if sib != nec.contains_key(&step.law) {
                    return Ok(Some(format!(
                        "law {}: sibling {sib}, necessary {} in {}",
                        step.law,
                        !sib,
                        show(ctx)
                    )));
                }
            }
            Ok(None)
        })())?;
    }
    Ok(report)
}

/// A path of firing stimulatory links exists exactly when the production
/// score is positive.
pub fn check_producer_path(diagrams: &[NeuronDiagram], budget: Budget) -> Result<CheckReport> {
    let mut report = CheckReport::new("producer-path");
    let spec = DefinitionSpec::get(DefinitionName::Production);
    for d in diagrams {
        for (c, e) in fired_pairs(d) {
            report.record((|| {
                let path = neuron::producer_path(d, &c, &e)?;
                let score = causal_score(spec, &diagram_context(d, &c, &e, budget)?, Options::default())?.score;
                Ok((path != score.is_positive())
                    .then(|| format!("{c}->{e}: path {path}, production {score} in {}", describe(d))))
            })())?;
        }
    }
    Ok(report)
}

/// Canonical, reversed and shuffled schedules yield the same distribution.
pub fn check_order_invariance(contexts: &[Context], seed: u64) -> Result<CheckReport> {
    let mut report = CheckReport::new("order-invariance");
    let mut rng = corpus::rng(seed);
    for ctx in contexts {
        let theory = ctx.theory();
        let shuffled = Schedule::shuffled(theory, &mut rng);
        report.record((|| {
            let base = distribution(theory, &Schedule::Canonical, ctx.budget())?;
            for schedule in [Schedule::reverse_ids(theory), shuffled.clone()] {
                if distribution(theory, &schedule, ctx.budget())? != base {
                    return Ok(Some(format!(
                        "{schedule:?} differs for\n{}",
                        crate::parser::format_theory(theory)
                    )));
                }
            }
            Ok(None)
        })())?;
    }
    Ok(report)
}

/// The translated story ends in the actual firing pattern, and the leaves of
/// the translated theory are exactly the patterns reachable from exogenous
/// assignments.
pub fn check_leaf_correspondence(diagrams: &[NeuronDiagram], budget: Budget) -> Result<CheckReport> {
    let mut report = CheckReport::new("leaf-correspondence");
    for d in diagrams {
        report.record((|| {
            let (theory, story) = neuron::translate(d)?;
            if !neuron::leaf_matches(d, &story) {
                return Ok(Some(format!(
                    "story leaf differs from firing pattern in {}",
                    describe(d)
                )));
            }
            let exo: Vec<String> = d.ids().filter(|id| d.is_exogenous(id)).map(String::from).collect();
            let mut patterns = BTreeSet::new();
            for mask in 0u64..(1 << exo.len()) {
                let assignment: Assignment = exo
                    .iter()
                    .enumerate()
                    .map(|(k, id)| (id.clone(), mask & (1 << k) != 0))
                    .collect();
                let values = neuron::evaluate_diagram(d, &assignment);
                patterns.insert(
                    values
                        .into_iter()
                        .filter(|&(_, v)| v)
                        .map(|(id, _)| Atom::named(&id))
                        .collect::<BTreeSet<_>>(),
                );
            }
            let leaves: BTreeSet<BTreeSet<Atom>> = enumerate_branches(&theory, &Schedule::Canonical, budget)?
                .iter()
                .map(|s| s.leaf_atoms())
                .collect();
            Ok((leaves != patterns).then(|| format!("leaf sets differ in {}", describe(d))))
        })())?;
    }
    Ok(report)
}

fn show(ctx: &Context) -> String {
    format!(
        "{}story: {}\ncause {} effect {}",
        crate::parser::format_theory(ctx.theory()),
        crate::parser::format_story(ctx.story()),
        ctx.cause(),
        ctx.effect()
    )
}

/// Builds the corpora from `config` and runs every check.
pub fn run_battery(config: &BatteryConfig) -> Result<Vec<CheckReport>> {
    let contexts: Vec<Context> = corpus::theory_corpus(config.seed, config.theories, config.shape)
        .into_iter()
        .map(|c| c.with_budget(config.budget))
        .collect();
    let diagrams = corpus::diagram_corpus(config.seed, config.diagrams, config.max_nodes);
    Ok(vec![
        check_hall_translation(&diagrams, config.budget)?,
        check_def5_vs_nec(&contexts)?,
        check_sibling_criterion(&contexts)?,
        check_producer_path(&diagrams, config.budget)?,
        check_order_invariance(&contexts, config.seed)?,
        check_leaf_correspondence(&diagrams, config.budget)?,
    ])
}
