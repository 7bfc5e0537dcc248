//! Checks a placement against the integer program's constraint families.
//!
//! The `x`, `y` and `o` variables are rebuilt from the instance sequence
//! (route `begin -> p_1 -> ... -> p_n -> end`, order values counting down
//! from `beta - 1`), then every family is evaluated literally over the full
//! node set of the instance graph.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::graph::{InstanceGraph, NodeRef};
use super::{PlacementOutcome, DEADLINE_TOLERANCE_MS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ConstraintFamily {
    /// In-degree equals out-degree on every function instance.
    FlowConservation,
    /// The begin node has one more outgoing than incoming arc.
    SourceFlow,
    /// The end node has one more incoming than outgoing arc.
    SinkFlow,
    /// Exactly one selected instance per function.
    OneInstancePerFunction,
    /// A selected instance has an outgoing arc and vice versa.
    SelectedOnPath,
    /// At most one incoming arc per node.
    InDegree,
    /// At most one outgoing arc per node.
    OutDegree,
    /// `o <= beta * x`.
    OrderBound,
    /// Order values drop by one across every instance.
    OrderPropagation,
    /// Order values start at `beta - 1` on the begin node.
    SourceOrder,
    /// Consecutive functions are visited in chain order.
    ChainOrder,
    /// Completion time within the deadline.
    Deadline,
    NoSelfLoop,
    /// Binary `x`, `y` and `0 <= o <= beta`.
    Domains,
    /// Selected arcs exist in the instance graph.
    ArcSupport,
}

impl fmt::Display for ConstraintFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintVerdict {
    pub family: ConstraintFamily,
    pub passed: bool,
    pub detail: String,
}

/// Realized values of the decision variables for one placement.
#[derive(Debug, Clone, PartialEq)]
pub struct IlpAssignment {
    pub beta: i64,
    pub x: BTreeSet<(NodeRef, NodeRef)>,
    pub y: BTreeSet<usize>,
    pub o: BTreeMap<(NodeRef, NodeRef), i64>,
    /// Placement entries that are not nodes of the graph.
    pub unknown: Vec<String>,
}

impl IlpAssignment {
    pub fn from_outcome(graph: &InstanceGraph, outcome: &PlacementOutcome) -> Self {
        let beta = graph.functions().len() as i64 + 2;
        let mut route = vec![NodeRef::Begin];
        let mut unknown = Vec::new();
        for inst in &outcome.placement {
            match graph.find(inst) {
                Some(n) => route.push(NodeRef::Instance(n)),
                None => unknown.push(inst.to_string()),
            }
        }
        route.push(NodeRef::End);
        let mut x = BTreeSet::new();
        let mut o = BTreeMap::new();
        for (k, w) in route.windows(2).enumerate() {
            x.insert((w[0], w[1]));
            o.insert((w[0], w[1]), beta - 1 - k as i64);
        }
        let y = route
            .iter()
            .filter_map(|n| match n {
                NodeRef::Instance(i) => Some(*i),
                _ => None,
            })
            .collect();
        Self { beta, x, y, o, unknown }
    }

    fn x(&self, a: NodeRef, b: NodeRef) -> i64 {
        i64::from(self.x.contains(&(a, b)))
    }

    fn y(&self, i: usize) -> i64 {
        i64::from(self.y.contains(&i))
    }

    fn x_out(&self, n: NodeRef) -> i64 {
        self.x.iter().filter(|(a, _)| *a == n).count() as i64
    }

    fn x_in(&self, n: NodeRef) -> i64 {
        self.x.iter().filter(|(_, b)| *b == n).count() as i64
    }

    fn o_out_plus_x(&self, n: NodeRef) -> i64 {
        self.o.iter().filter(|((a, _), _)| *a == n).map(|(_, v)| v).sum::<i64>() + self.x_out(n)
    }

    /// Incoming order values, excluding arcs leaving the end node.
    fn o_in(&self, n: NodeRef) -> i64 {
        self.o
            .iter()
            .filter(|((a, b), _)| *b == n && *a != NodeRef::End)
            .map(|(_, v)| v)
            .sum()
    }

    /// Incoming arcs, excluding arcs leaving the end node.
    fn x_in_not_end(&self, n: NodeRef) -> i64 {
        self.x.iter().filter(|(a, b)| *b == n && *a != NodeRef::End).count() as i64
    }
}

struct Check {
    family: ConstraintFamily,
    failures: Vec<String>,
}

impl Check {
    fn new(family: ConstraintFamily) -> Self {
        Self {
            family,
            failures: Vec::new(),
        }
    }

    fn require(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.failures.push(what());
        }
    }

    fn verdict(self) -> ConstraintVerdict {
        ConstraintVerdict {
            family: self.family,
            passed: self.failures.is_empty(),
            detail: if self.failures.is_empty() {
                "ok".into()
            } else {
                self.failures.join("; ")
            },
        }
    }
}

/// One verdict per constraint family, in declaration order.
pub fn validate_placement(graph: &InstanceGraph, outcome: &PlacementOutcome) -> Vec<ConstraintVerdict> {
    use ConstraintFamily::*;

    let asg = IlpAssignment::from_outcome(graph, outcome);
    let beta = asg.beta;
    let instances: Vec<NodeRef> = (0..graph.nodes().len()).map(NodeRef::Instance).collect();
    let all: Vec<NodeRef> = std::iter::once(NodeRef::Begin)
        .chain(instances.iter().copied())
        .chain(std::iter::once(NodeRef::End))
        .collect();
    let name = |n: NodeRef| match n {
        NodeRef::Begin => "begin".to_string(),
        NodeRef::End => "end".to_string(),
        NodeRef::Instance(i) => graph.nodes()[i].instance.to_string(),
    };

    let mut out = Vec::new();

    let mut c = Check::new(FlowConservation);
    for &n in &instances {
        c.require(asg.x_in(n) == asg.x_out(n), || format!("{}: in != out", name(n)));
    }
    out.push(c.verdict());

    let mut c = Check::new(SourceFlow);
    c.require(asg.x_in(NodeRef::Begin) + 1 == asg.x_out(NodeRef::Begin), || "begin".into());
    out.push(c.verdict());

    let mut c = Check::new(SinkFlow);
    c.require(asg.x_in(NodeRef::End) == asg.x_out(NodeRef::End) + 1, || "end".into());
    out.push(c.verdict());

    let mut c = Check::new(OneInstancePerFunction);
    for (pos, f) in graph.functions().iter().enumerate() {
        let selected: i64 = graph.layer(pos).iter().map(|&i| asg.y(i)).sum();
        c.require(selected == 1, || format!("{f}: {selected} instances selected"));
    }
    for u in &asg.unknown {
        c.failures.push(format!("{u} is not an instance of the graph"));
    }
    out.push(c.verdict());

    let mut c = Check::new(SelectedOnPath);
    for (i, &n) in instances.iter().enumerate() {
        c.require(asg.x_out(n) - asg.y(i) == 0, || name(n));
    }
    out.push(c.verdict());

    let mut c = Check::new(InDegree);
    for &n in &all {
        c.require(asg.x_in(n) <= 1, || name(n));
    }
    out.push(c.verdict());

    let mut c = Check::new(OutDegree);
    for &n in &all {
        c.require(asg.x_out(n) <= 1, || name(n));
    }
    out.push(c.verdict());

    let mut c = Check::new(OrderBound);
    for (&(a, b), &v) in &asg.o {
        c.require(v <= beta * asg.x(a, b), || format!("{} -> {}", name(a), name(b)));
    }
    out.push(c.verdict());

    let mut c = Check::new(OrderPropagation);
    for &n in &instances {
        let incoming: i64 = asg.o.iter().filter(|((_, b), _)| *b == n).map(|(_, v)| v).sum();
        c.require(incoming == asg.o_out_plus_x(n), || name(n));
    }
    out.push(c.verdict());

    let mut c = Check::new(SourceOrder);
    let incoming: i64 = asg.o.iter().filter(|((_, b), _)| *b == NodeRef::Begin).map(|(_, v)| v).sum();
    c.require(incoming + beta == asg.o_out_plus_x(NodeRef::Begin), || "begin".into());
    out.push(c.verdict());

    let mut c = Check::new(ChainOrder);
    for pos in 1..graph.functions().len() {
        for &phi in graph.layer(pos - 1) {
            for &psi in graph.layer(pos) {
                if phi == psi {
                    continue;
                }
                let (p, q) = (NodeRef::Instance(phi), NodeRef::Instance(psi));
                let lhs = asg.o_in(p) - asg.x(p, q) - beta * asg.y(phi) + beta;
                let rhs = asg.o_in(q) - beta * asg.y(psi) + beta * asg.x_in_not_end(q);
                c.require(lhs >= rhs, || format!("{} before {}: {lhs} < {rhs}", name(p), name(q)));
            }
        }
    }
    out.push(c.verdict());

    let mut support = Check::new(ArcSupport);
    let mut latency = 0.0;
    for &(a, b) in &asg.x {
        match graph.arc(a, b) {
            Some(arc) => latency += arc.latency_ms,
            None => support.failures.push(format!("{} -> {}", name(a), name(b))),
        }
    }
    for &i in &asg.y {
        match graph.nodes()[i].cost {
            Some(cost) => latency += cost.latency_ms,
            None => support.failures.push(format!("{} has no capacity", name(NodeRef::Instance(i)))),
        }
    }
    let mut c = Check::new(Deadline);
    if support.failures.is_empty() {
        c.require(latency <= outcome.deadline_ms + DEADLINE_TOLERANCE_MS, || {
            format!("{latency:.6} ms > {} ms", outcome.deadline_ms)
        });
    } else {
        c.failures.push("latency undefined on unsupported arcs or nodes".into());
    }
    out.push(c.verdict());

    let mut c = Check::new(NoSelfLoop);
    for &(a, b) in &asg.x {
        c.require(a != b, || name(a));
    }
    out.push(c.verdict());

    let mut c = Check::new(Domains);
    for (&(a, b), &v) in &asg.o {
        c.require((0..=beta).contains(&v), || format!("o({} -> {}) = {v}", name(a), name(b)));
    }
    out.push(c.verdict());

    out.push(support.verdict());
    out
}
