//! Cycle and chain enumeration.

use serde::Serialize;

use crate::model::{AgentId, ExchangeId, Instance, VertexId, VertexKind};
use crate::weight::Weight;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ExchangeKind {
    Cycle,
    Chain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Owner {
    Internal(AgentId),
    Shared,
}

/// A cycle or an internal chain of the compatibility graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Exchange {
    pub id: ExchangeId,
    pub kind: ExchangeKind,
    /// Cycles start at their minimum vertex; chains start at their ndd.
    pub vertices: Vec<VertexId>,
    pub owner: Owner,
    pub weight: Weight,
    /// Nonzero-or-touching agent values, sorted by agent.
    pub agent_weights: Vec<(AgentId, Weight)>,
}

impl Exchange {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn is_shared(&self) -> bool {
        self.owner == Owner::Shared
    }

    pub fn is_internal_to(&self, a: AgentId) -> bool {
        self.owner == Owner::Internal(a)
    }

    /// Value of this exchange to agent `a` (zero when `a` is not involved).
    pub fn agent_weight(&self, a: AgentId) -> Weight {
        self.agent_weights
            .iter()
            .find(|(b, _)| *b == a)
            .map(|(_, w)| *w)
            .unwrap_or(Weight::ZERO)
    }

    /// Whether any vertex of `a` takes part.
    pub fn touches_agent(&self, a: AgentId) -> bool {
        self.agent_weights.iter().any(|(b, _)| *b == a)
    }

    pub fn contains(&self, v: VertexId) -> bool {
        self.vertices.contains(&v)
    }
}

fn build_exchange(inst: &Instance, kind: ExchangeKind, vertices: Vec<VertexId>) -> Exchange {
    let mut weight = Weight::ZERO;
    let mut agent_weights: Vec<(AgentId, Weight)> = Vec::new();
    for &v in &vertices {
        let rec = inst.vertex(v);
        let contributes = rec.kind == VertexKind::Pair;
        if contributes {
            weight += rec.social_weight;
        }
        let add = if contributes { rec.agent_weight } else { Weight::ZERO };
        match agent_weights.iter_mut().find(|(a, _)| *a == rec.agent) {
            Some((_, w)) => *w += add,
            None => agent_weights.push((rec.agent, add)),
        }
    }
    agent_weights.sort_by_key(|(a, _)| *a);
    let owner = if agent_weights.len() == 1 {
        Owner::Internal(agent_weights[0].0)
    } else {
        Owner::Shared
    };
    Exchange {
        id: ExchangeId(usize::MAX),
        kind,
        vertices,
        owner,
        weight,
        agent_weights,
    }
}

/// Enumerates every cycle of at most `K` pairs and every internal chain of
/// `1..=L` arcs starting at an ndd.
///
/// The result is sorted lexicographically by vertex sequence and ids are the
/// positions in that order, so repeated calls give identical ids.
pub fn enumerate_exchanges(inst: &Instance) -> Vec<Exchange> {
    let mut out = Vec::new();
    let n = inst.num_vertices();
    let k = inst.max_cycle_len();
    let mut on_path = vec![false; n];

    if k >= 2 {
        for start in 0..n {
            let s = VertexId(start);
            if inst.vertex(s).kind != VertexKind::Pair {
                continue;
            }
            let mut path = vec![s];
            on_path[start] = true;
            cycles_from(inst, s, k, &mut path, &mut on_path, &mut out);
            on_path[start] = false;
        }
    }

    let l = inst.max_chain_len();
    if l >= 1 {
        for v in inst.vertices() {
            if v.kind != VertexKind::Ndd {
                continue;
            }
            let mut path = vec![v.id];
            on_path[v.id.0] = true;
            chains_from(inst, v.agent, l, &mut path, &mut on_path, &mut out);
            on_path[v.id.0] = false;
        }
    }

    out.sort_by(|a, b| a.vertices.cmp(&b.vertices));
    for (i, e) in out.iter_mut().enumerate() {
        e.id = ExchangeId(i);
    }
    out
}

fn cycles_from(
    inst: &Instance,
    start: VertexId,
    k: usize,
    path: &mut Vec<VertexId>,
    on_path: &mut [bool],
    out: &mut Vec<Exchange>,
) {
    let last = *path.last().expect("path is never empty");
    for &next in inst.successors(last) {
        if next == start {
            if path.len() >= 2 {
                out.push(build_exchange(inst, ExchangeKind::Cycle, path.clone()));
            }
            continue;
        }
        // Only larger ids after the start, so each cycle is found once, rotated to its minimum.
        if next < start || on_path[next.0] || path.len() >= k {
            continue;
        }
        if inst.vertex(next).kind != VertexKind::Pair {
            continue;
        }
        on_path[next.0] = true;
        path.push(next);
        cycles_from(inst, start, k, path, on_path, out);
        path.pop();
        on_path[next.0] = false;
    }
}

fn chains_from(
    inst: &Instance,
    agent: AgentId,
    l: usize,
    path: &mut Vec<VertexId>,
    on_path: &mut [bool],
    out: &mut Vec<Exchange>,
) {
    let last = *path.last().expect("path is never empty");
    for &next in inst.successors(last) {
        let rec = inst.vertex(next);
        if on_path[next.0] || rec.agent != agent || rec.kind != VertexKind::Pair {
            continue;
        }
        on_path[next.0] = true;
        path.push(next);
        out.push(build_exchange(inst, ExchangeKind::Chain, path.clone()));
        if path.len() <= l {
            chains_from(inst, agent, l, path, on_path, out);
        }
        path.pop();
        on_path[next.0] = false;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn single_agent_chain_pool_enumeration() {
        let inst = fixtures::single_agent_chain_pool();
        let ex = enumerate_exchanges(&inst);
        let seqs: Vec<Vec<String>> = ex
            .iter()
            .map(|e| e.vertices.iter().map(|&v| inst.label(v)).collect())
            .collect();
        let expect: Vec<Vec<&str>> = vec![
            vec!["1", "2"],
            vec!["1", "2", "3"],
            vec!["1", "2", "4"],
            vec!["1", "2", "6"],
            vec!["3", "5"],
            vec!["4", "5"],
            vec!["5", "6"],
        ];
        assert_eq!(seqs, expect);
        assert_eq!(ex[0].kind, ExchangeKind::Chain);
        assert_eq!(ex[4].kind, ExchangeKind::Cycle);
        // ndd carries no weight
        assert_eq!(ex[2].weight, Weight::from_int(2));
    }

    #[test]
    fn no_arcs_no_exchanges() {
        let mut b = crate::model::InstanceBuilder::new(3, 2);
        let a = b.agent("a");
        b.pair(a);
        b.ndd(a);
        assert!(enumerate_exchanges(&b.build().unwrap()).is_empty());
    }

    #[test]
    fn owner_classification() {
        let inst = fixtures::red_blue_pool();
        let ex = enumerate_exchanges(&inst);
        assert_eq!(ex.len(), 3);
        let shared: Vec<_> = ex.iter().filter(|e| e.is_shared()).collect();
        assert_eq!(shared.len(), 1);
        let red = inst.agent_by_name("red").unwrap();
        assert_eq!(shared[0].agent_weight(red), Weight::ONE);
    }

    #[test]
    fn chain_cap_counts_arcs() {
        let mut b = crate::model::InstanceBuilder::new(3, 1);
        let a = b.agent("a");
        let d = b.ndd(a);
        let p = b.pair(a);
        let q = b.pair(a);
        b.arc(d, p).arc(p, q);
        let inst = b.build().unwrap();
        let ex = enumerate_exchanges(&inst);
        assert_eq!(ex.len(), 1);
        assert_eq!(ex[0].vertices, vec![d, p]);
    }
}
