//! Naive reference interpreter used as a test oracle. It works on atom names,
//! recomputes everything from scratch at every node and shares no execution
//! code with the library.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use cpcausal::{CpTheory, Rational};

/// A law reduced to names: head alternatives and the body split by sign.
#[derive(Clone, Debug)]
pub struct RawLaw {
    pub id: u32,
    pub head: Vec<(String, Rational)>,
    pub pos: Vec<String>,
    pub neg: Vec<String>,
}

pub fn raw(theory: &CpTheory) -> Vec<RawLaw> {
    theory
        .laws()
        .iter()
        .map(|l| RawLaw {
            id: l.id,
            head: l.head.iter().map(|d| (d.atom.to_string(), d.prob.clone())).collect(),
            pos: l
                .body
                .iter()
                .filter(|b| b.positive)
                .map(|b| b.atom.to_string())
                .collect(),
            neg: l
                .body
                .iter()
                .filter(|b| !b.positive)
                .map(|b| b.atom.to_string())
                .collect(),
        })
        .collect()
}

pub type World = BTreeSet<String>;
pub type Dist = BTreeMap<World, Rational>;

fn possible(laws: &[RawLaw], truth: &World, applied: &BTreeSet<u32>) -> World {
    let mut p = truth.clone();
    loop {
        let before = p.len();
        for l in laws {
            if applied.contains(&l.id) || l.head.is_empty() {
                continue;
            }
            if l.pos.iter().all(|a| p.contains(a)) && l.neg.iter().all(|a| !truth.contains(a)) {
                for (a, _) in &l.head {
                    p.insert(a.clone());
                }
            }
        }
        if p.len() == before {
            return p;
        }
    }
}

fn explore(laws: &[RawLaw], truth: World, applied: BTreeSet<u32>, weight: Rational, pick_last: bool, out: &mut Dist) {
    let poss = possible(laws, &truth, &applied);
    let mut ready = laws.iter().filter(|l| {
        !applied.contains(&l.id)
            && !l.head.is_empty()
            && l.pos.iter().all(|a| truth.contains(a))
            && l.neg.iter().all(|a| !poss.contains(a))
    });
    let next = if pick_last { ready.next_back() } else { ready.next() };
    let Some(law) = next else {
        let entry = out.entry(truth).or_insert_with(Rational::zero);
        *entry = entry.clone() + weight;
        return;
    };
    let mut applied = applied;
    applied.insert(law.id);
    let mut rest = Rational::one();
    for (atom, p) in &law.head {
        rest = rest - p.clone();
        if p.is_zero() {
            continue;
        }
        let mut t = truth.clone();
        t.insert(atom.clone());
        explore(laws, t, applied.clone(), weight.clone() * p.clone(), pick_last, out);
    }
    if rest.is_positive() {
        explore(laws, truth, applied, weight * rest, pick_last, out);
    }
}

/// Distribution over final worlds; `pick_last` selects the highest-id
/// applicable law at every node instead of the lowest.
pub fn distribution(laws: &[RawLaw], pick_last: bool) -> Dist {
    let mut out = Dist::new();
    explore(
        laws,
        World::new(),
        BTreeSet::new(),
        Rational::one(),
        pick_last,
        &mut out,
    );
    out
}

/// Probability of a conjunction of `(atom, positive)` literals.
pub fn marginal(laws: &[RawLaw], query: &[(&str, bool)]) -> Rational {
    distribution(laws, false)
        .into_iter()
        .filter(|(w, _)| query.iter().all(|&(a, pos)| w.contains(a) == pos))
        .fold(Rational::zero(), |acc, (_, p)| acc + p)
}

/// Pins the listed laws to the named outcome (`None` empties the head).
pub fn pin(laws: &[RawLaw], choices: &BTreeMap<u32, Option<String>>) -> Vec<RawLaw> {
    laws.iter()
        .map(|l| match choices.get(&l.id) {
            Some(Some(a)) => RawLaw {
                head: vec![(a.clone(), Rational::one())],
                ..l.clone()
            },
            Some(None) => RawLaw {
                head: Vec::new(),
                ..l.clone()
            },
            None => l.clone(),
        })
        .collect()
}

/// do(¬atom).
pub fn block(laws: &[RawLaw], atom: &str) -> Vec<RawLaw> {
    laws.iter()
        .map(|l| RawLaw {
            head: l.head.iter().filter(|(a, _)| a != atom).cloned().collect(),
            ..l.clone()
        })
        .collect()
}

/// do(atom).
pub fn force(laws: &[RawLaw], atom: &str) -> Vec<RawLaw> {
    let mut out = laws.to_vec();
    out.push(RawLaw {
        id: laws.iter().map(|l| l.id).max().unwrap_or(0) + 1,
        head: vec![(atom.to_string(), Rational::one())],
        pos: Vec::new(),
        neg: Vec::new(),
    });
    out
}

pub fn without(laws: &[RawLaw], ids: &[u32]) -> Vec<RawLaw> {
    laws.iter().filter(|l| !ids.contains(&l.id)).cloned().collect()
}

/// Converts a library distribution to name-keyed worlds.
pub fn named(dist: &cpcausal::semantics::Distribution) -> Dist {
    dist.0
        .iter()
        .map(|(w, p)| (w.iter().map(ToString::to_string).collect(), p.clone()))
        .collect()
}

/// One branch: the applied laws with their chosen atom, and the final world.
pub type Branch = (Vec<(u32, Option<String>)>, World);

fn ready<'a>(laws: &'a [RawLaw], truth: &World, applied: &BTreeSet<u32>) -> Vec<&'a RawLaw> {
    let poss = possible(laws, truth, applied);
    laws.iter()
        .filter(|l| {
            !applied.contains(&l.id)
                && !l.head.is_empty()
                && l.pos.iter().all(|a| truth.contains(a))
                && l.neg.iter().all(|a| !poss.contains(a))
        })
        .collect()
}

fn walk(
    laws: &[RawLaw],
    truth: World,
    applied: BTreeSet<u32>,
    steps: Vec<(u32, Option<String>)>,
    out: &mut Vec<Branch>,
) {
    let Some(law) = ready(laws, &truth, &applied).into_iter().next() else {
        out.push((steps, truth));
        return;
    };
    let mut applied = applied;
    applied.insert(law.id);
    let mut rest = Rational::one();
    for (atom, p) in &law.head {
        rest = rest - p.clone();
        if p.is_zero() {
            continue;
        }
        let mut t = truth.clone();
        t.insert(atom.clone());
        let mut s = steps.clone();
        s.push((law.id, Some(atom.clone())));
        walk(laws, t, applied.clone(), s, out);
    }
    if rest.is_positive() {
        let mut s = steps;
        s.push((law.id, None));
        walk(laws, truth, applied, s, out);
    }
}

/// Every branch of the lowest-id-first tree.
pub fn branches(laws: &[RawLaw]) -> Vec<Branch> {
    let mut out = Vec::new();
    walk(laws, World::new(), BTreeSet::new(), Vec::new(), &mut out);
    out
}

/// Branches continuing from the given node.
pub fn continuations(laws: &[RawLaw], truth: &World, applied: &BTreeSet<u32>) -> Vec<Branch> {
    let mut out = Vec::new();
    walk(laws, truth.clone(), applied.clone(), Vec::new(), &mut out);
    out
}
