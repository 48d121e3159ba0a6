//! Neuron diagrams: acyclic networks of binary neurons with stimulatory and
//! inhibitory links, their translation into CP-logic, and two diagram-level
//! notions of causation.
//!
//! A neuron fires iff at least one stimulatory parent fires and no
//! inhibitory parent fires.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{is_identifier, Atom, CpLaw, CpTheory, Disjunct, Literal, Outcome, Rational};
use crate::semantics::{applicable_positions, NodeState};
use crate::story::{self, Step, Story};

/// Truth value of every neuron, keyed by id.
pub type Assignment = BTreeMap<String, bool>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Exo,
    Endo,
}

/// One neuron as written in a diagram file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub id: String,
    pub kind: NodeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub stim: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub inhib: Vec<String>,
    pub fires: bool,
}

#[derive(Serialize, Deserialize)]
struct DiagramFile {
    nodes: Vec<NodeSpec>,
}

#[derive(Clone, Debug)]
struct Node {
    id: String,
    prob: Option<Rational>,
    stim: Vec<usize>,
    inhib: Vec<usize>,
    fires: bool,
}

/// A validated diagram with its actual firing record.
#[derive(Clone, Debug)]
pub struct NeuronDiagram {
    specs: Vec<NodeSpec>,
    nodes: Vec<Node>,
    index: HashMap<String, usize>,
    topo: Vec<usize>,
}

impl NeuronDiagram {
    pub fn new(specs: Vec<NodeSpec>) -> Result<Self> {
        let mut index = HashMap::new();
        for (i, s) in specs.iter().enumerate() {
            if !is_identifier(&s.id) {
                return Err(Error::Diagram(format!("node id `{}` is not an identifier", s.id)));
            }
            if index.insert(s.id.clone(), i).is_some() {
                return Err(Error::Diagram(format!("duplicate node `{}`", s.id)));
            }
        }
        let resolve = |names: &[String], owner: &str| -> Result<Vec<usize>> {
            let mut out = Vec::new();
            for n in names {
                let i = *index
                    .get(n)
                    .ok_or_else(|| Error::Diagram(format!("node `{owner}` links from unknown node `{n}`")))?;
                if out.contains(&i) {
                    return Err(Error::Diagram(format!("node `{owner}` lists `{n}` twice")));
                }
                out.push(i);
            }
            Ok(out)
        };
        let mut nodes = Vec::with_capacity(specs.len());
        for s in &specs {
            let stim = resolve(&s.stim, &s.id)?;
            let inhib = resolve(&s.inhib, &s.id)?;
            if let Some(&dup) = stim.iter().find(|i| inhib.contains(i)) {
                return Err(Error::Diagram(format!(
                    "`{}` is both a stimulatory and an inhibitory parent of `{}`",
                    specs[dup].id, s.id
                )));
            }
            let prob = match s.kind {
                NodeKind::Exo => {
                    if !stim.is_empty() || !inhib.is_empty() {
                        return Err(Error::Diagram(format!("exogenous node `{}` has parents", s.id)));
                    }
                    let p = match &s.p {
                        Some(text) => Rational::from_decimal(text)?,
                        None => Rational::new(1, 2),
                    };
                    if !p.is_positive() || p >= Rational::one() {
                        return Err(Error::Diagram(format!(
                            "probability of `{}` must lie strictly between 0 and 1",
                            s.id
                        )));
                    }
                    Some(p)
                }
                NodeKind::Endo => {
                    if s.p.is_some() {
                        return Err(Error::Diagram(format!(
                            "endogenous node `{}` carries a probability",
                            s.id
                        )));
                    }
                    if stim.is_empty() {
                        return Err(Error::Diagram(format!(
                            "endogenous node `{}` has no stimulatory parent",
                            s.id
                        )));
                    }
                    None
                }
            };
            nodes.push(Node {
                id: s.id.clone(),
                prob,
                stim,
                inhib,
                fires: s.fires,
            });
        }
        let topo = topological_order(&nodes)?;
        let diagram = NeuronDiagram {
            specs,
            nodes,
            index,
            topo,
        };
        let exo = diagram.actual_exogenous();
        let expected = diagram.evaluate(&exo, None);
        for node in &diagram.nodes {
            if expected[&node.id] != node.fires {
                return Err(Error::Diagram(format!(
                    "recorded state of `{}` contradicts the firing rule",
                    node.id
                )));
            }
        }
        Ok(diagram)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: DiagramFile = serde_json::from_str(text).map_err(|e| Error::Diagram(e.to_string()))?;
        Self::new(file.nodes)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&DiagramFile {
            nodes: self.specs.clone(),
        })
        .expect("diagram serializes")
    }

    pub fn specs(&self) -> &[NodeSpec] {
        &self.specs
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.nodes.iter().map(|n| n.id.as_str())
    }

    pub fn is_exogenous(&self, id: &str) -> bool {
        self.index.get(id).is_some_and(|&i| self.nodes[i].prob.is_some())
    }

    /// The recorded firing state.
    pub fn actual(&self) -> Assignment {
        self.nodes.iter().map(|n| (n.id.clone(), n.fires)).collect()
    }

    pub fn fired(&self) -> BTreeSet<String> {
        self.nodes.iter().filter(|n| n.fires).map(|n| n.id.clone()).collect()
    }

    fn actual_exogenous(&self) -> Assignment {
        self.nodes
            .iter()
            .filter(|n| n.prob.is_some())
            .map(|n| (n.id.clone(), n.fires))
            .collect()
    }

    fn require_fired(&self, id: &str) -> Result<usize> {
        let i = *self
            .index
            .get(id)
            .ok_or_else(|| Error::Diagram(format!("unknown node `{id}`")))?;
        if !self.nodes[i].fires {
            return Err(Error::Diagram(format!("`{id}` does not fire")));
        }
        Ok(i)
    }

    /// Propagates exogenous values through the firing rule, holding `forced_off`
    /// at rest regardless of its parents.
    fn evaluate(&self, exo: &Assignment, forced_off: Option<usize>) -> Assignment {
        let mut value = vec![false; self.nodes.len()];
        for &i in &self.topo {
            let node = &self.nodes[i];
            value[i] = if Some(i) == forced_off {
                false
            } else if node.prob.is_some() {
                exo.get(&node.id).copied().unwrap_or(false)
            } else {
                node.stim.iter().any(|&s| value[s]) && !node.inhib.iter().any(|&h| value[h])
            };
        }
        self.nodes.iter().map(|n| n.id.clone()).zip(value).collect()
    }
}

fn topological_order(nodes: &[Node]) -> Result<Vec<usize>> {
    let mut indegree: Vec<usize> = nodes.iter().map(|n| n.stim.len() + n.inhib.len()).collect();
    let mut children = vec![Vec::new(); nodes.len()];
    for (i, n) in nodes.iter().enumerate() {
        for &p in n.stim.iter().chain(&n.inhib) {
            children[p].push(i);
        }
    }
    let mut ready: BTreeSet<usize> = (0..nodes.len()).filter(|&i| indegree[i] == 0).collect();
    let mut order = Vec::with_capacity(nodes.len());
    while let Some(i) = ready.pop_first() {
        order.push(i);
        for &c in &children[i] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                ready.insert(c);
            }
        }
    }
    if order.len() != nodes.len() {
        return Err(Error::Diagram("links form a cycle".into()));
    }
    Ok(order)
}

/// State of every neuron given the exogenous values in `exo`; missing
/// exogenous entries are at rest.
pub fn evaluate_diagram(diagram: &NeuronDiagram, exo: &Assignment) -> Assignment {
    diagram.evaluate(exo, None)
}

fn nonempty_subsets(n: usize) -> Vec<Vec<usize>> {
    let mut subsets: Vec<Vec<usize>> = (1u32..(1 << n))
        .map(|mask| (0..n).filter(|&i| mask & (1 << i) != 0).collect())
        .collect();
    subsets.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    subsets
}

/// Translates the diagram into a CP-theory and the story of its actual firing.
///
/// Exogenous neurons become `(V:p) <- .`, in declaration order. Each
/// endogenous neuron with stimulatory parents S and inhibitors I becomes one
/// deterministic law per nonempty subset of S, with the negated inhibitors
/// appended to the body; subsets are listed by size, then in parent order.
///
/// The story applies the exogenous laws first. Endogenous neurons then fire
/// in topological order, each through the law whose subset is exactly its set
/// of firing stimulatory parents. The remaining applicable laws follow,
/// lowest id first.
pub fn translate(diagram: &NeuronDiagram) -> Result<(Arc<CpTheory>, Story)> {
    let atom = |i: usize| Atom::named(&diagram.nodes[i].id);
    let mut laws = Vec::new();
    let mut producer: HashMap<usize, u32> = HashMap::new();
    let mut next_id = 1u32;
    for (i, node) in diagram.nodes.iter().enumerate() {
        if let Some(p) = &node.prob {
            laws.push(CpLaw::new(
                next_id,
                vec![Disjunct {
                    atom: atom(i),
                    prob: p.clone(),
                }],
                Vec::new(),
            ));
            next_id += 1;
        }
    }
    for (i, node) in diagram.nodes.iter().enumerate() {
        if node.prob.is_some() {
            continue;
        }
        let fired: Vec<usize> = node.stim.iter().copied().filter(|&s| diagram.nodes[s].fires).collect();
        for subset in nonempty_subsets(node.stim.len()) {
            let parents: Vec<usize> = subset.iter().map(|&k| node.stim[k]).collect();
            let mut body: Vec<Literal> = parents.iter().map(|&s| Literal::pos(atom(s))).collect();
            body.extend(node.inhib.iter().map(|&h| Literal::neg(atom(h))));
            if node.fires && parents == fired {
                producer.insert(i, next_id);
            }
            laws.push(CpLaw::new(
                next_id,
                vec![Disjunct {
                    atom: atom(i),
                    prob: Rational::one(),
                }],
                body,
            ));
            next_id += 1;
        }
    }
    let vocabulary = diagram.nodes.iter().map(|n| Atom::named(&n.id)).collect();
    let theory = Arc::new(CpTheory::with_vocabulary(laws, vocabulary)?);

    let mut steps = Vec::new();
    let mut id = 1u32;
    for node in &diagram.nodes {
        if node.prob.is_some() {
            let outcome = if node.fires {
                Outcome::Disjunct(0)
            } else {
                Outcome::Nothing
            };
            steps.push(Step { law: id, outcome });
            id += 1;
        }
    }
    for &i in &diagram.topo {
        if let Some(&law) = producer.get(&i) {
            steps.push(Step {
                law,
                outcome: Outcome::Disjunct(0),
            });
        }
    }
    let mut state = NodeState::root(&theory);
    for s in &steps {
        let pos = theory.position(s.law).expect("law exists");
        state = state.apply(&theory, pos, s.outcome);
    }
    while let Some(&pos) = applicable_positions(&theory, &state).first() {
        steps.push(Step {
            law: theory.laws()[pos].id,
            outcome: Outcome::Disjunct(0),
        });
        state = state.apply(&theory, pos, Outcome::Disjunct(0));
    }
    let story = story::validate(theory.clone(), steps)?;
    Ok((theory, story))
}

/// Whether the leaf of `story` is exactly the set of firing neurons.
pub fn leaf_matches(diagram: &NeuronDiagram, story: &Story) -> bool {
    let fired: BTreeSet<Atom> = diagram.fired().iter().map(|id| Atom::named(id)).collect();
    story.leaf_atoms() == fired
}

/// Assignments obtained by returning some firing exogenous neurons to rest,
/// kept when no neuron fires that did not actually fire.
pub fn diagram_reductions(diagram: &NeuronDiagram) -> Vec<Assignment> {
    let actual = diagram.actual();
    let on: Vec<&str> = diagram
        .nodes
        .iter()
        .filter(|n| n.prob.is_some() && n.fires)
        .map(|n| n.id.as_str())
        .collect();
    let mut out = BTreeSet::new();
    for mask in 0u64..(1 << on.len()) {
        let mut exo = diagram.actual_exogenous();
        for (k, id) in on.iter().enumerate() {
            if mask & (1 << k) != 0 {
                exo.insert(id.to_string(), false);
            }
        }
        let values = diagram.evaluate(&exo, None);
        if values.iter().all(|(id, &v)| !v || actual[id]) {
            out.insert(values);
        }
    }
    out.into_iter().collect()
}

/// Hall's reduction test: some reduction in which both neurons fire makes
/// `e` rest once `c` is held at rest.
pub fn hall_cause_diagram(diagram: &NeuronDiagram, c: &str, e: &str) -> Result<bool> {
    let ci = diagram.require_fired(c)?;
    diagram.require_fired(e)?;
    Ok(diagram_reductions(diagram)
        .into_iter()
        .filter(|r| r[c] && r[e])
        .any(|r| {
            let exo: Assignment = r.into_iter().filter(|(id, _)| diagram.is_exogenous(id)).collect();
            !diagram.evaluate(&exo, Some(ci))[e]
        }))
}

/// Whether a path of firing neurons along stimulatory links leads from `c`
/// to `e`.
pub fn producer_path(diagram: &NeuronDiagram, c: &str, e: &str) -> Result<bool> {
    let ci = diagram.require_fired(c)?;
    let ei = diagram.require_fired(e)?;
    let mut seen = vec![false; diagram.nodes.len()];
    let mut queue = VecDeque::from([ci]);
    seen[ci] = true;
    while let Some(i) = queue.pop_front() {
        if i == ei {
            return Ok(true);
        }
        for (j, node) in diagram.nodes.iter().enumerate() {
            if !seen[j] && node.fires && node.stim.contains(&i) {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    Ok(false)
}

fn exo(id: &str, p: &Rational, fires: bool) -> NodeSpec {
    NodeSpec {
        id: id.into(),
        kind: NodeKind::Exo,
        p: Some(p.to_string()),
        stim: Vec::new(),
        inhib: Vec::new(),
        fires,
    }
}

fn endo(id: &str, stim: &[&str], inhib: &[&str], fires: bool) -> NodeSpec {
    NodeSpec {
        id: id.into(),
        kind: NodeKind::Endo,
        p: None,
        stim: stim.iter().map(|s| s.to_string()).collect(),
        inhib: inhib.iter().map(|s| s.to_string()).collect(),
        fires,
    }
}

/// Early preemption: A and C fire, C stops B and fires E through D.
pub fn diagram_a(p: &Rational, q: &Rational) -> NeuronDiagram {
    preemption(p, q, true)
}

/// The same structure with A at rest.
pub fn diagram_b(p: &Rational, q: &Rational) -> NeuronDiagram {
    preemption(p, q, false)
}

fn preemption(p: &Rational, q: &Rational, a_fires: bool) -> NeuronDiagram {
    NeuronDiagram::new(vec![
        exo("A", p, a_fires),
        exo("C", q, true),
        endo("B", &["A"], &["C"], false),
        endo("D", &["C"], &[], true),
        endo("E", &["B", "D"], &[], true),
    ])
    .expect("built-in diagram is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{format_story, format_theory};

    fn half() -> Rational {
        Rational::new(1, 2)
    }

    fn assign(pairs: &[(&str, bool)]) -> Assignment {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn evaluation() {
        let a = diagram_a(&half(), &half());
        let v = evaluate_diagram(&a, &assign(&[("A", true), ("C", true)]));
        assert_eq!(
            v,
            assign(&[("A", true), ("B", false), ("C", true), ("D", true), ("E", true)])
        );
        let b = diagram_b(&half(), &half());
        let v = evaluate_diagram(&b, &assign(&[("A", false), ("C", true)]));
        assert!(!v["B"] && v["D"] && v["E"]);
        let v = evaluate_diagram(&a, &assign(&[]));
        assert!(v.values().all(|&x| !x));
    }

    #[test]
    fn translation_of_preemption() {
        let (t, s) = translate(&diagram_a(&half(), &half())).unwrap();
        assert_eq!(
            format_theory(&t),
            "A:0.5 <- .\nC:0.5 <- .\nB <- A, ~C.\nD <- C.\nE <- B.\nE <- D.\nE <- B, D.\n"
        );
        assert_eq!(format_story(&s), "1:1 2:1 4:1 6:1");
        let (tb, sb) = translate(&diagram_b(&half(), &half())).unwrap();
        assert_eq!(tb, t);
        assert_eq!(format_story(&sb), "1:none 2:1 4:1 6:1");
        assert!(leaf_matches(&diagram_b(&half(), &half()), &sb));
    }

    #[test]
    fn overdetermination_fires_through_the_joint_law() {
        let d = NeuronDiagram::new(vec![
            exo("A", &half(), true),
            exo("C", &half(), true),
            endo("E", &["A", "C"], &[], true),
        ])
        .unwrap();
        let (_, s) = translate(&d).unwrap();
        assert_eq!(format_story(&s), "1:1 2:1 5:1 3:1 4:1");
    }

    #[test]
    fn single_node() {
        let d = NeuronDiagram::new(vec![exo("X", &half(), true)]).unwrap();
        let (t, s) = translate(&d).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(s.steps().len(), 1);
    }

    #[test]
    fn reductions_and_causes() {
        let a = diagram_a(&half(), &half());
        let reds = diagram_reductions(&a);
        assert!(reds.contains(&assign(&[
            ("A", false),
            ("B", false),
            ("C", true),
            ("D", true),
            ("E", true)
        ])));
        assert!(reds.contains(&a.actual()));
        assert!(hall_cause_diagram(&a, "C", "E").unwrap());
        assert!(!hall_cause_diagram(&a, "A", "E").unwrap());
        assert!(!producer_path(&a, "A", "E").unwrap());
        assert!(hall_cause_diagram(&a, "B", "E").is_err());
        assert!(producer_path(&a, "C", "E").unwrap());
        assert!(producer_path(&a, "E", "E").unwrap());
        assert!(!producer_path(&a, "D", "C").unwrap());
        let b = diagram_b(&half(), &half());
        assert!(diagram_reductions(&b).iter().all(|r| !r["A"]));
        let chain = NeuronDiagram::new(vec![exo("X", &half(), true), endo("Y", &["X"], &[], true)]).unwrap();
        assert!(hall_cause_diagram(&chain, "X", "Y").unwrap());
    }

    #[test]
    fn overdetermining_neurons_are_causes() {
        // the reduction with C at rest exposes A's own route to E
        let d = NeuronDiagram::new(vec![
            exo("A", &half(), true),
            exo("C", &half(), true),
            endo("B", &["A"], &[], true),
            endo("D", &["C"], &[], true),
            endo("E", &["B", "D"], &[], true),
        ])
        .unwrap();
        assert!(hall_cause_diagram(&d, "A", "E").unwrap());
        assert!(hall_cause_diagram(&d, "C", "E").unwrap());
        assert!(producer_path(&d, "A", "E").unwrap());
    }

    #[test]
    fn json_round_trip_and_validation() {
        let a = diagram_a(&half(), &Rational::new(1, 3));
        let again = NeuronDiagram::from_json(&a.to_json()).unwrap();
        assert_eq!(again.specs(), a.specs());
        let defaulted = NeuronDiagram::from_json(r#"{"nodes":[{"id":"A","kind":"exo","fires":true}]}"#).unwrap();
        assert_eq!(translate(&defaulted).unwrap().0.laws()[0].head[0].prob, half());
        let bad = [
            r#"{"nodes":[{"id":"A","kind":"exo","p":"1","fires":true}]}"#,
            r#"{"nodes":[{"id":"A","kind":"endo","fires":false}]}"#,
            r#"{"nodes":[{"id":"A","kind":"exo","fires":true},{"id":"B","kind":"endo","stim":["A"],"fires":false}]}"#,
            r#"{"nodes":[{"id":"B","kind":"endo","stim":["C"],"fires":false},{"id":"C","kind":"endo","stim":["B"],"fires":false}]}"#,
            r#"{"nodes":[{"id":"A","kind":"exo","fires":true},{"id":"A","kind":"exo","fires":true}]}"#,
            r#"{"nodes":[{"id":"A","kind":"neither","fires":true}]}"#,
        ];
        for text in bad {
            assert!(
                matches!(NeuronDiagram::from_json(text), Err(Error::Diagram(_))),
                "{text}"
            );
        }
    }
}
