//! Execution of CP-theories: applicability under well-founded impossibility,
//! probability-tree construction, branch enumeration and exact marginals.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::ops::ControlFlow;
use std::sync::Arc;

use fixedbitset::FixedBitSet;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::kernel::{Atom, AtomSet, CpTheory, LawId, Literal, Outcome, Rational};
use crate::story::{self, Step, Story};

/// Upper bound on the number of tree nodes a single computation may visit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Budget(pub usize);

impl Budget {
    pub const DEFAULT: Budget = Budget(1_000_000);
}

impl Default for Budget {
    fn default() -> Self {
        Budget::DEFAULT
    }
}

/// State of the domain at one node of a probability tree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeState {
    true_atoms: AtomSet,
    applied: FixedBitSet,
    impossible: AtomSet,
}

impl NodeState {
    /// All atoms at their default value, no law applied.
    pub fn root(theory: &CpTheory) -> Self {
        let mut state = NodeState {
            true_atoms: AtomSet::empty(theory.atoms().len()),
            applied: FixedBitSet::with_capacity(theory.len()),
            impossible: AtomSet::default(),
        };
        state.refresh(theory);
        state
    }

    fn refresh(&mut self, theory: &CpTheory) {
        let possible = possible_atoms(theory, self);
        let mut impossible = AtomSet::empty(theory.atoms().len());
        for i in (0..theory.atoms().len()).filter(|&i| !possible.contains(i)) {
            impossible.insert(i);
        }
        self.impossible = impossible;
    }

    pub fn true_atoms(&self) -> &AtomSet {
        &self.true_atoms
    }

    pub fn impossible_atoms(&self) -> &AtomSet {
        &self.impossible
    }

    pub fn is_applied(&self, theory: &CpTheory, id: LawId) -> bool {
        theory.position(id).is_some_and(|p| self.applied.contains(p))
    }

    pub fn applied_laws(&self, theory: &CpTheory) -> BTreeSet<LawId> {
        self.applied.ones().map(|p| theory.laws()[p].id).collect()
    }

    /// The child state after applying the law at `position` with `outcome`.
    /// Applicability is the caller's responsibility.
    pub(crate) fn apply(&self, theory: &CpTheory, position: usize, outcome: Outcome) -> NodeState {
        let mut next = self.clone();
        next.applied.insert(position);
        if let Outcome::Disjunct(i) = outcome {
            next.true_atoms.insert(theory.compiled()[position].head[i]);
        }
        next.refresh(theory);
        next
    }
}

/// Atoms that can still become true below `state`: the least set containing
/// the true atoms and closed under every unapplied law whose positive body
/// lies in the set and none of whose negated atoms is already true.
///
/// Exact for stratified theories: at a state with no applicable law the
/// result equals the true atoms.
pub fn possible_atoms(theory: &CpTheory, state: &NodeState) -> AtomSet {
    let mut set = state.true_atoms.clone();
    loop {
        let mut changed = false;
        for (pos, law) in theory.compiled().iter().enumerate() {
            if state.applied.contains(pos) || law.head.is_empty() {
                continue;
            }
            if law.pos.iter().all(|&a| set.contains(a)) && !law.neg.iter().any(|&a| state.true_atoms.contains(a)) {
                for &h in &law.head {
                    if !set.contains(h) {
                        set.insert(h);
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            return set;
        }
    }
}

pub(crate) fn applicable_positions(theory: &CpTheory, state: &NodeState) -> Vec<usize> {
    theory
        .compiled()
        .iter()
        .enumerate()
        .filter(|(pos, law)| {
            !state.applied.contains(*pos)
                && !law.head.is_empty()
                && law.pos.iter().all(|&a| state.true_atoms.contains(a))
                && law.neg.iter().all(|&a| state.impossible.contains(a))
        })
        .map(|(pos, _)| pos)
        .collect()
}

/// Ids of the laws that may be applied at `state`.
pub fn applicable_laws(theory: &CpTheory, state: &NodeState) -> BTreeSet<LawId> {
    applicable_positions(theory, state)
        .into_iter()
        .map(|p| theory.laws()[p].id)
        .collect()
}

/// Rule picking which applicable law a tree node expands.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub enum Schedule {
    /// Lowest law id first.
    #[default]
    Canonical,
    /// Earliest law in the list first; unlisted laws come last by id.
    Priority(Vec<LawId>),
}

impl Schedule {
    pub fn reverse_ids(theory: &CpTheory) -> Schedule {
        Schedule::Priority(theory.laws().iter().rev().map(|l| l.id).collect())
    }

    pub fn shuffled<R: Rng + ?Sized>(theory: &CpTheory, rng: &mut R) -> Schedule {
        let mut ids: Vec<LawId> = theory.laws().iter().map(|l| l.id).collect();
        ids.shuffle(rng);
        Schedule::Priority(ids)
    }

    fn ranks(&self) -> Option<HashMap<LawId, usize>> {
        match self {
            Schedule::Canonical => None,
            Schedule::Priority(order) => Some(order.iter().enumerate().map(|(i, &id)| (id, i)).collect()),
        }
    }
}

struct Chooser(Option<HashMap<LawId, usize>>);

impl Chooser {
    fn new(schedule: &Schedule) -> Self {
        Chooser(schedule.ranks())
    }

    fn choose(&self, theory: &CpTheory, applicable: &[usize]) -> usize {
        match &self.0 {
            None => applicable[0],
            Some(ranks) => *applicable
                .iter()
                .min_by_key(|&&p| {
                    let id = theory.laws()[p].id;
                    (ranks.get(&id).copied().unwrap_or(usize::MAX), id)
                })
                .expect("nonempty"),
        }
    }
}

struct Walker<'a, F> {
    theory: &'a CpTheory,
    chooser: Chooser,
    budget: Budget,
    visited: usize,
    steps: Vec<Step>,
    visit: F,
}

impl<F> Walker<'_, F>
where
    F: FnMut(&[Step], &NodeState, &Rational) -> ControlFlow<()>,
{
    fn go(&mut self, state: &NodeState, prob: &Rational) -> Result<ControlFlow<()>> {
        self.visited += 1;
        if self.visited > self.budget.0 {
            return Err(Error::BudgetExceeded(self.budget.0));
        }
        let applicable = applicable_positions(self.theory, state);
        if applicable.is_empty() {
            return Ok((self.visit)(&self.steps, state, prob));
        }
        let pos = self.chooser.choose(self.theory, &applicable);
        let law = &self.theory.laws()[pos];
        for (outcome, p) in law.outcomes() {
            let child = state.apply(self.theory, pos, outcome);
            self.steps.push(Step { law: law.id, outcome });
            let flow = self.go(&child, &(prob * &p))?;
            self.steps.pop();
            if flow.is_break() {
                return Ok(flow);
            }
        }
        Ok(ControlFlow::Continue(()))
    }
}

/// Depth-first traversal of every leaf below `start`. The visitor receives
/// the steps taken from `start`, the leaf state and the probability of the
/// path from `start`; returning `Break` stops the traversal.
pub fn walk_leaves<F>(theory: &CpTheory, start: &NodeState, schedule: &Schedule, budget: Budget, visit: F) -> Result<()>
where
    F: FnMut(&[Step], &NodeState, &Rational) -> ControlFlow<()>,
{
    let mut walker = Walker {
        theory,
        chooser: Chooser::new(schedule),
        budget,
        visited: 0,
        steps: Vec::new(),
        visit,
    };
    walker.go(start, &Rational::one()).map(|_| ())
}

// ---------------------------------------------------------------------------
// Trees
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct TreeEdge {
    pub law: LawId,
    pub outcome: Outcome,
    pub probability: Rational,
    pub child: usize,
}

#[derive(Clone, Debug)]
pub struct TreeNode {
    pub state: NodeState,
    pub edges: Vec<TreeEdge>,
}

/// Fully expanded probability tree; node 0 is the root.
#[derive(Clone, Debug)]
pub struct ProbabilityTree {
    nodes: Vec<TreeNode>,
}

impl ProbabilityTree {
    pub fn root(&self) -> &TreeNode {
        &self.nodes[0]
    }

    pub fn node(&self, i: usize) -> &TreeNode {
        &self.nodes[i]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn leaves(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len()).filter(|&i| self.nodes[i].edges.is_empty())
    }

    /// Indented text rendering with one line per edge.
    pub fn render(&self, theory: &CpTheory) -> String {
        let mut out = String::new();
        let show = |s: &AtomSet| {
            let atoms: Vec<String> = s.to_atoms(theory).iter().map(ToString::to_string).collect();
            format!("{{{}}}", atoms.join(", "))
        };
        let _ = writeln!(out, "{}", show(self.root().state.true_atoms()));
        fn emit(
            tree: &ProbabilityTree,
            theory: &CpTheory,
            i: usize,
            depth: usize,
            out: &mut String,
            show: &dyn Fn(&AtomSet) -> String,
        ) {
            for edge in &tree.nodes[i].edges {
                let law = theory.law(edge.law).expect("edge law exists");
                let effect = law
                    .outcome_atom(edge.outcome)
                    .map_or_else(|| "nothing".to_string(), ToString::to_string);
                let child = &tree.nodes[edge.child];
                let marker = if child.edges.is_empty() { "  *" } else { "" };
                let _ = writeln!(
                    out,
                    "{}law {} -> {} [{}] {}{}",
                    "  ".repeat(depth),
                    edge.law,
                    effect,
                    edge.probability,
                    show(child.state.true_atoms()),
                    marker
                );
                emit(tree, theory, edge.child, depth + 1, out, show);
            }
        }
        emit(self, theory, 0, 1, &mut out, &show);
        out
    }
}

/// Builds the whole tree, expanding at each node the law picked by `schedule`
/// into one child per outcome of positive probability.
pub fn build_tree(theory: &CpTheory, schedule: &Schedule, budget: Budget) -> Result<ProbabilityTree> {
    let chooser = Chooser::new(schedule);
    let mut nodes = vec![TreeNode {
        state: NodeState::root(theory),
        edges: Vec::new(),
    }];
    let mut frontier = vec![0usize];
    while let Some(i) = frontier.pop() {
        let applicable = applicable_positions(theory, &nodes[i].state);
        if applicable.is_empty() {
            continue;
        }
        let pos = chooser.choose(theory, &applicable);
        let law = &theory.laws()[pos];
        let mut edges = Vec::new();
        for (outcome, p) in law.outcomes() {
            if nodes.len() >= budget.0 {
                return Err(Error::BudgetExceeded(budget.0));
            }
            let state = nodes[i].state.apply(theory, pos, outcome);
            nodes.push(TreeNode {
                state,
                edges: Vec::new(),
            });
            let child = nodes.len() - 1;
            edges.push(TreeEdge {
                law: law.id,
                outcome,
                probability: p,
                child,
            });
            frontier.push(child);
        }
        nodes[i].edges = edges;
    }
    Ok(ProbabilityTree { nodes })
}

// ---------------------------------------------------------------------------
// Distributions and marginals
// ---------------------------------------------------------------------------

/// Probability of each leaf atom set, aggregated over equal sets.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Distribution(pub BTreeMap<BTreeSet<Atom>, Rational>);

impl Distribution {
    pub fn total(&self) -> Rational {
        self.0.values().sum()
    }

    pub fn probability(&self, query: &[Literal]) -> Rational {
        self.0
            .iter()
            .filter(|(leaf, _)| query.iter().all(|l| leaf.contains(&l.atom) == l.positive))
            .map(|(_, p)| p)
            .sum()
    }
}

pub fn distribution(theory: &CpTheory, schedule: &Schedule, budget: Budget) -> Result<Distribution> {
    let mut raw: BTreeMap<Vec<usize>, Rational> = BTreeMap::new();
    walk_leaves(theory, &NodeState::root(theory), schedule, budget, |_, leaf, p| {
        let key: Vec<usize> = leaf.true_atoms().iter().collect();
        let slot = raw.entry(key).or_insert_with(Rational::zero);
        *slot = &*slot + p;
        ControlFlow::Continue(())
    })?;
    Ok(Distribution(
        raw.into_iter()
            .map(|(k, p)| (k.into_iter().map(|i| theory.atoms()[i].clone()).collect(), p))
            .collect(),
    ))
}

/// Probability that the conjunction `query` holds at the end of the process.
pub fn marginal(theory: &CpTheory, query: &[Literal], budget: Budget) -> Result<Rational> {
    let compiled: Vec<(usize, bool)> = query
        .iter()
        .map(|l| theory.require_atom(&l.atom).map(|i| (i, l.positive)))
        .collect::<Result<_>>()?;
    let mut total = Rational::zero();
    walk_leaves(
        theory,
        &NodeState::root(theory),
        &Schedule::Canonical,
        budget,
        |_, leaf, p| {
            if compiled.iter().all(|&(i, pos)| leaf.true_atoms().contains(i) == pos) {
                total = &total + p;
            }
            ControlFlow::Continue(())
        },
    )?;
    Ok(total)
}

/// Every root-to-leaf branch under `schedule`, as validated stories.
pub fn enumerate_branches(theory: &Arc<CpTheory>, schedule: &Schedule, budget: Budget) -> Result<Vec<Story>> {
    let mut raw = Vec::new();
    walk_leaves(theory, &NodeState::root(theory), schedule, budget, |steps, _, _| {
        raw.push(steps.to_vec());
        ControlFlow::Continue(())
    })?;
    raw.into_iter()
        .map(|steps| story::validate(theory.clone(), steps))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_theory;

    const SUZY: &str =
        "Throws(Suzy) <- .\nThrows(Billy) <- .\nBreaks:0.9 <- Throws(Suzy).\nBreaks:0.8 <- Throws(Billy).\n";
    const ASSASSIN: &str = "Assassin:1/2 <- .\nMurderer:1/2 <- .\nBackup:1/2 <- ~Assassin.\nDies <- Assassin.\nDies <- Backup.\nDies <- Murderer.\n";

    fn lit(s: &str) -> Literal {
        crate::parser::parse_literal(s).unwrap()
    }

    #[test]
    fn suzy_billy_marginals() {
        let t = parse_theory(SUZY).unwrap();
        assert_eq!(
            marginal(&t, &[lit("Breaks")], Budget::DEFAULT).unwrap(),
            Rational::new(49, 50)
        );
        assert_eq!(
            marginal(&t, &[lit("~Breaks")], Budget::DEFAULT).unwrap(),
            Rational::new(1, 50)
        );
        assert_eq!(marginal(&t, &[], Budget::DEFAULT).unwrap(), Rational::one());
        assert!(matches!(
            marginal(&t, &[lit("Nope")], Budget::DEFAULT),
            Err(Error::UnknownAtom(_))
        ));
    }

    #[test]
    fn root_applicability() {
        let t = parse_theory(ASSASSIN).unwrap();
        let root = NodeState::root(&t);
        assert_eq!(applicable_laws(&t, &root), [1, 2].into_iter().collect());
        assert_eq!(possible_atoms(&t, &root).len(), 4);
        let s = parse_theory(SUZY).unwrap();
        let root = NodeState::root(&s);
        assert_eq!(possible_atoms(&s, &root).len(), 3);
        let after = root
            .apply(&s, 0, Outcome::Disjunct(0))
            .apply(&s, 1, Outcome::Disjunct(0));
        assert_eq!(applicable_laws(&s, &after), [3, 4].into_iter().collect());
    }

    #[test]
    fn backup_impossible_once_assassin_acts() {
        let t = parse_theory(ASSASSIN).unwrap();
        let state = NodeState::root(&t).apply(&t, 0, Outcome::Disjunct(0));
        let backup = t.atom_index(&Atom::named("Backup")).unwrap();
        assert!(!possible_atoms(&t, &state).contains(backup));
        assert!(state.impossible_atoms().contains(backup));
        // once Assassin fails, Backup becomes applicable
        let failed = NodeState::root(&t).apply(&t, 0, Outcome::Nothing);
        assert!(applicable_laws(&t, &failed).contains(&3));
    }

    #[test]
    fn saturated_state_has_no_applicable_law() {
        let t = parse_theory(SUZY).unwrap();
        let mut state = NodeState::root(&t);
        for pos in 0..4 {
            state = state.apply(&t, pos, Outcome::Disjunct(0));
        }
        assert!(applicable_laws(&t, &state).is_empty());
        assert_eq!(&possible_atoms(&t, &state), state.true_atoms());
    }

    #[test]
    fn tree_shapes() {
        let t = parse_theory(SUZY).unwrap();
        let tree = build_tree(&t, &Schedule::Canonical, Budget::DEFAULT).unwrap();
        assert_eq!(tree.leaves().count(), 4);
        assert_eq!(tree.len(), 9);
        let empty = CpTheory::empty();
        let tree = build_tree(&empty, &Schedule::Canonical, Budget::DEFAULT).unwrap();
        assert_eq!(tree.len(), 1);
        let a = parse_theory(ASSASSIN).unwrap();
        let d = distribution(&a, &Schedule::Canonical, Budget::DEFAULT).unwrap();
        assert_eq!(d.total(), Rational::one());
        assert!(matches!(
            build_tree(&a, &Schedule::Canonical, Budget(5)),
            Err(Error::BudgetExceeded(5))
        ));
    }

    #[test]
    fn render_marks_leaves() {
        let t = parse_theory(SUZY).unwrap();
        let tree = build_tree(&t, &Schedule::Canonical, Budget::DEFAULT).unwrap();
        let text = tree.render(&t);
        assert_eq!(text.lines().count(), 9);
        assert_eq!(text.matches('*').count(), 4);
        assert!(text.contains("law 3 -> Breaks [9/10]"), "{text}");
        assert!(text.contains("law 3 -> nothing [1/10]"), "{text}");
    }

    #[test]
    fn branch_counts() {
        let t = Arc::new(parse_theory(SUZY).unwrap());
        let b = enumerate_branches(&t, &Schedule::Canonical, Budget::DEFAULT).unwrap();
        assert_eq!(b.len(), 4);
        let total: Rational = b.iter().map(|s| s.probability().clone()).sum();
        assert_eq!(total, Rational::one());
        let det = Arc::new(parse_theory("A <- .\nB <- A.\n").unwrap());
        assert_eq!(
            enumerate_branches(&det, &Schedule::Canonical, Budget::DEFAULT)
                .unwrap()
                .len(),
            1
        );
        let a = Arc::new(parse_theory(ASSASSIN).unwrap());
        assert_eq!(
            enumerate_branches(&a, &Schedule::Canonical, Budget::DEFAULT)
                .unwrap()
                .len(),
            6
        );
    }

    #[test]
    fn schedules_agree_on_assassin() {
        let a = parse_theory(ASSASSIN).unwrap();
        let canon = distribution(&a, &Schedule::Canonical, Budget::DEFAULT).unwrap();
        let rev = distribution(&a, &Schedule::reverse_ids(&a), Budget::DEFAULT).unwrap();
        assert_eq!(canon, rev);
    }
}
