//! Seeded random generators for small stratified theories, stories, contexts
//! and neuron diagrams.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::kernel::{Atom, CpLaw, CpTheory, Disjunct, Literal, Outcome, Rational};
use crate::neuron::{Assignment, NeuronDiagram, NodeKind, NodeSpec};
use crate::semantics::{applicable_positions, NodeState};
use crate::story::{self, Context, Step, Story};

/// Size limits for generated theories.
#[derive(Clone, Copy, Debug)]
pub struct TheoryShape {
    pub max_atoms: usize,
    pub max_laws: usize,
}

impl Default for TheoryShape {
    fn default() -> Self {
        TheoryShape {
            max_atoms: 5,
            max_laws: 6,
        }
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

const PROBS: [(i64, i64); 5] = [(1, 4), (1, 3), (1, 2), (2, 3), (3, 4)];

fn prob<R: Rng + ?Sized>(rng: &mut R) -> Rational {
    let (n, d) = PROBS[rng.gen_range(0..PROBS.len())];
    Rational::new(n, d)
}

/// A random stratified theory in which every head has at most two
/// alternatives, counting the implicit empty disjunct.
pub fn random_theory<R: Rng + ?Sized>(rng: &mut R, shape: TheoryShape) -> CpTheory {
    let n = rng.gen_range(1..=shape.max_atoms);
    let atoms: Vec<Atom> = (0..n)
        .map(|i| Atom::named(&((b'A' + i as u8) as char).to_string()))
        .collect();
    let level: Vec<u8> = (0..n).map(|_| rng.gen_range(0..3)).collect();
    let m = rng.gen_range(1..=shape.max_laws);
    let mut laws = Vec::with_capacity(m);
    for id in 1..=m as u32 {
        let first = rng.gen_range(0..n);
        let head = match rng.gen_range(0..3) {
            0 => vec![(first, Rational::one())],
            1 => vec![(first, prob(rng))],
            _ => {
                let second = rng.gen_range(0..n);
                if second == first {
                    vec![(first, Rational::one())]
                } else {
                    let p = prob(rng);
                    vec![(first, p.clone()), (second, Rational::one() - p)]
                }
            }
        };
        let floor = head.iter().map(|&(a, _)| level[a]).min().expect("nonempty head");
        let mut body = Vec::new();
        for (i, atom) in atoms.iter().enumerate() {
            if level[i] < floor && rng.gen_bool(0.25) {
                body.push(Literal::neg(atom.clone()));
            } else if level[i] <= floor && rng.gen_bool(0.3) {
                body.push(Literal::pos(atom.clone()));
            }
        }
        let head = head
            .into_iter()
            .map(|(a, prob)| Disjunct {
                atom: atoms[a].clone(),
                prob,
            })
            .collect();
        laws.push(CpLaw::new(id, head, body));
    }
    CpTheory::new(laws).expect("generated theories are stratified")
}

/// A random complete branch: at every node a uniformly chosen applicable law
/// with a uniformly chosen outcome of positive probability.
pub fn random_story<R: Rng + ?Sized>(rng: &mut R, theory: &Arc<CpTheory>) -> Story {
    let mut state = NodeState::root(theory);
    let mut steps = Vec::new();
    loop {
        let applicable = applicable_positions(theory, &state);
        let Some(&pos) = applicable.choose(rng) else { break };
        let law = &theory.laws()[pos];
        let outcomes: Vec<Outcome> = law.outcomes().into_iter().map(|(o, _)| o).collect();
        let outcome = *outcomes.choose(rng).expect("applicable laws have outcomes");
        steps.push(Step { law: law.id, outcome });
        state = state.apply(theory, pos, outcome);
    }
    story::validate(theory.clone(), steps).expect("random walks yield valid stories")
}

/// A random context with distinct positive cause and effect, both drawn from
/// the leaf. `None` when the leaf has fewer than two atoms.
pub fn random_context<R: Rng + ?Sized>(rng: &mut R, theory: &Arc<CpTheory>) -> Option<Context> {
    let story = random_story(rng, theory);
    let leaf: Vec<Atom> = story.leaf_atoms().into_iter().collect();
    let mut pair = leaf.choose_multiple(rng, 2).cloned();
    let (cause, effect) = (pair.next()?, pair.next()?);
    Context::new(story, Literal::pos(cause), Literal::pos(effect)).ok()
}

/// `count` contexts over independently generated theories.
pub fn theory_corpus(seed: u64, count: usize, shape: TheoryShape) -> Vec<Context> {
    let mut rng = rng(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let theory = Arc::new(random_theory(&mut rng, shape));
        if let Some(ctx) = random_context(&mut rng, &theory) {
            out.push(ctx);
        }
    }
    out
}

/// A random acyclic diagram with up to `max_nodes` neurons, declared in a
/// shuffled order, with a random actual exogenous assignment.
pub fn random_diagram<R: Rng + ?Sized>(rng: &mut R, max_nodes: usize) -> NeuronDiagram {
    let n = rng.gen_range(1..=max_nodes);
    let ids: Vec<String> = (0..n).map(|i| format!("N{i}")).collect();
    let mut specs = Vec::with_capacity(n);
    for i in 0..n {
        if i == 0 || rng.gen_bool(0.35) {
            let p = [Rational::new(1, 3), Rational::new(1, 2), Rational::new(2, 3)][rng.gen_range(0..3)].clone();
            specs.push(NodeSpec {
                id: ids[i].clone(),
                kind: NodeKind::Exo,
                p: Some(p.to_string()),
                stim: Vec::new(),
                inhib: Vec::new(),
                fires: rng.gen_bool(0.6),
            });
            continue;
        }
        let mut earlier: Vec<usize> = (0..i).collect();
        earlier.shuffle(rng);
        let stim_count = rng.gen_range(1..=earlier.len().min(3));
        let stim: Vec<usize> = earlier[..stim_count].to_vec();
        let inhib: Vec<usize> = earlier[stim_count..]
            .iter()
            .copied()
            .filter(|_| rng.gen_bool(0.25))
            .take(2)
            .collect();
        specs.push(NodeSpec {
            id: ids[i].clone(),
            kind: NodeKind::Endo,
            p: None,
            stim: stim.iter().map(|&s| ids[s].clone()).collect(),
            inhib: inhib.iter().map(|&s| ids[s].clone()).collect(),
            fires: false,
        });
    }
    let exo: Assignment = specs
        .iter()
        .filter(|s| s.kind == NodeKind::Exo)
        .map(|s| (s.id.clone(), s.fires))
        .collect();
    let values = evaluate_in_order(&specs, &exo);
    for s in &mut specs {
        s.fires = values[&s.id];
    }
    specs.shuffle(rng);
    NeuronDiagram::new(specs).expect("generated diagrams are valid")
}

/// Firing rule applied to specs listed parents-first.
fn evaluate_in_order(specs: &[NodeSpec], exo: &Assignment) -> Assignment {
    let mut values = Assignment::new();
    for s in specs {
        let v = match s.kind {
            NodeKind::Exo => exo[&s.id],
            NodeKind::Endo => s.stim.iter().any(|p| values[p]) && !s.inhib.iter().any(|p| values[p]),
        };
        values.insert(s.id.clone(), v);
    }
    values
}

pub fn diagram_corpus(seed: u64, count: usize, max_nodes: usize) -> Vec<NeuronDiagram> {
    let mut rng = rng(seed);
    (0..count).map(|_| random_diagram(&mut rng, max_nodes)).collect()
}
