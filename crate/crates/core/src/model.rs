//! Agent-partitioned compatibility graphs.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::weight::Weight;

/// Upper limit on the cycle and chain caps accepted by validation.
pub const MAX_LENGTH_CAP: usize = 8;

macro_rules! index_newtype {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub usize);

        impl $name {
            pub fn index(self) -> usize {
                self.0
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }
    };
}

index_newtype!(
    /// Dense vertex index `0..n`.
    VertexId
);
index_newtype!(
    /// Index into the instance's agent list.
    AgentId
);
index_newtype!(
    /// Position of an exchange in the canonical enumeration.
    ExchangeId
);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VertexKind {
    Pair,
    Ndd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum WeightMode {
    #[default]
    Unit,
    Scored,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VertexRecord {
    pub id: VertexId,
    pub agent: AgentId,
    pub kind: VertexKind,
    /// Contribution to the social value of an exchange covering this vertex.
    pub social_weight: Weight,
    /// Contribution to the owning agent's value.
    pub agent_weight: Weight,
}

/// Unvalidated instance description, filled by hand, by generators or from a file.
#[derive(Debug, Clone, Default)]
pub struct RawInstance {
    pub agents: Vec<String>,
    pub vertices: Vec<RawVertex>,
    pub arcs: Vec<(usize, usize)>,
    pub max_cycle_len: usize,
    pub max_chain_len: usize,
    pub weight_mode: WeightMode,
    pub labels: Option<Vec<String>>,
}

#[derive(Debug, Clone)]
pub struct RawVertex {
    pub agent: usize,
    pub kind: VertexKind,
    /// `None` means the unit-mode default (1 for pairs, 0 for ndds).
    pub social_weight: Option<Weight>,
    pub agent_weight: Option<Weight>,
}

/// Machine-readable code of a single invariant breach.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationCode {
    SelfLoop,
    DuplicateArc,
    DanglingArc,
    ArcIntoNdd,
    UnknownAgent,
    DuplicateAgent,
    DuplicateVertex,
    MissingVertex,
    BadKind,
    BadWeight,
    CycleCapOutOfRange,
    ChainCapOutOfRange,
    BadLabels,
}

impl ViolationCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationCode::SelfLoop => "self_loop",
            ViolationCode::DuplicateArc => "duplicate_arc",
            ViolationCode::DanglingArc => "dangling_arc",
            ViolationCode::ArcIntoNdd => "arc_into_ndd",
            ViolationCode::UnknownAgent => "unknown_agent",
            ViolationCode::DuplicateAgent => "duplicate_agent",
            ViolationCode::DuplicateVertex => "duplicate_vertex",
            ViolationCode::MissingVertex => "missing_vertex",
            ViolationCode::BadKind => "bad_kind",
            ViolationCode::BadWeight => "bad_weight",
            ViolationCode::CycleCapOutOfRange => "cycle_cap_out_of_range",
            ViolationCode::ChainCapOutOfRange => "chain_cap_out_of_range",
            ViolationCode::BadLabels => "bad_labels",
        }
    }
}

impl fmt::Display for ViolationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub code: ViolationCode,
    pub detail: String,
}

impl Violation {
    pub(crate) fn new(code: ViolationCode, detail: impl Into<String>) -> Self {
        Violation {
            code,
            detail: detail.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code, self.detail)
    }
}

/// A validated compatibility graph. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    agents: Vec<String>,
    vertices: Vec<VertexRecord>,
    arcs: BTreeSet<(VertexId, VertexId)>,
    successors: Vec<Vec<VertexId>>,
    agent_vertices: Vec<Vec<VertexId>>,
    max_cycle_len: usize,
    max_chain_len: usize,
    weight_mode: WeightMode,
    labels: Option<Vec<String>>,
}

impl Instance {
    pub fn agents(&self) -> &[String] {
        &self.agents
    }

    pub fn agent_ids(&self) -> impl Iterator<Item = AgentId> + '_ {
        (0..self.agents.len()).map(AgentId)
    }

    pub fn agent_name(&self, a: AgentId) -> &str {
        &self.agents[a.0]
    }

    pub fn agent_by_name(&self, name: &str) -> Option<AgentId> {
        self.agents.iter().position(|n| n == name).map(AgentId)
    }

    pub fn num_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn vertices(&self) -> &[VertexRecord] {
        &self.vertices
    }

    pub fn vertex(&self, v: VertexId) -> &VertexRecord {
        &self.vertices[v.0]
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn arcs(&self) -> &BTreeSet<(VertexId, VertexId)> {
        &self.arcs
    }

    pub fn num_arcs(&self) -> usize {
        self.arcs.len()
    }

    pub fn has_arc(&self, u: VertexId, v: VertexId) -> bool {
        self.arcs.contains(&(u, v))
    }

    pub fn successors(&self, v: VertexId) -> &[VertexId] {
        &self.successors[v.0]
    }

    /// Vertices owned by `a`, ascending.
    pub fn agent_vertices(&self, a: AgentId) -> &[VertexId] {
        &self.agent_vertices[a.0]
    }

    pub fn max_cycle_len(&self) -> usize {
        self.max_cycle_len
    }

    pub fn max_chain_len(&self) -> usize {
        self.max_chain_len
    }

    pub fn weight_mode(&self) -> WeightMode {
        self.weight_mode
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// Label of `v`, falling back to its numeric id.
    pub fn label(&self, v: VertexId) -> String {
        match &self.labels {
            Some(l) => l[v.0].clone(),
            None => v.0.to_string(),
        }
    }

    /// Looks a vertex up by label.
    pub fn vertex_by_label(&self, label: &str) -> Option<VertexId> {
        self.labels
            .as_ref()?
            .iter()
            .position(|l| l == label)
            .map(VertexId)
    }

    /// Converts back into the editable description.
    pub fn to_raw(&self) -> RawInstance {
        let scored = self.weight_mode == WeightMode::Scored;
        RawInstance {
            agents: self.agents.clone(),
            vertices: self
                .vertices
                .iter()
                .map(|v| RawVertex {
                    agent: v.agent.0,
                    kind: v.kind,
                    social_weight: scored.then_some(v.social_weight),
                    agent_weight: scored.then_some(v.agent_weight),
                })
                .collect(),
            arcs: self.arcs.iter().map(|&(u, v)| (u.0, v.0)).collect(),
            max_cycle_len: self.max_cycle_len,
            max_chain_len: self.max_chain_len,
            weight_mode: self.weight_mode,
            labels: self.labels.clone(),
        }
    }
}

/// Error returned when a [`RawInstance`] breaks one or more invariants.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid instance: {}", .violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
pub struct InstanceError {
    pub violations: Vec<Violation>,
}

impl InstanceError {
    pub fn codes(&self) -> Vec<ViolationCode> {
        self.violations.iter().map(|v| v.code).collect()
    }
}

/// Checks every invariant and returns the normalized instance or all violations found.
pub fn validate_instance(raw: RawInstance) -> Result<Instance, InstanceError> {
    let mut violations = Vec::new();
    let n = raw.vertices.len();

    if raw.max_cycle_len == 0 || raw.max_cycle_len > MAX_LENGTH_CAP {
        violations.push(Violation::new(
            ViolationCode::CycleCapOutOfRange,
            format!("K = {} not in 1..={MAX_LENGTH_CAP}", raw.max_cycle_len),
        ));
    }
    if raw.max_chain_len > MAX_LENGTH_CAP {
        violations.push(Violation::new(
            ViolationCode::ChainCapOutOfRange,
            format!("L = {} exceeds {MAX_LENGTH_CAP}", raw.max_chain_len),
        ));
    }

    let mut seen_agents = BTreeSet::new();
    for name in &raw.agents {
        if !seen_agents.insert(name.as_str()) {
            violations.push(Violation::new(
                ViolationCode::DuplicateAgent,
                format!("agent `{name}` listed twice"),
            ));
        }
    }

    let mut vertices = Vec::with_capacity(n);
    for (i, rv) in raw.vertices.iter().enumerate() {
        if rv.agent >= raw.agents.len() {
            violations.push(Violation::new(
                ViolationCode::UnknownAgent,
                format!("vertex {i} refers to agent #{}", rv.agent),
            ));
        }
        let (social, agent) = match raw.weight_mode {
            WeightMode::Unit => {
                let unit = match rv.kind {
                    VertexKind::Pair => Weight::ONE,
                    VertexKind::Ndd => Weight::ZERO,
                };
                for w in [rv.social_weight, rv.agent_weight].into_iter().flatten() {
                    if w != unit {
                        violations.push(Violation::new(
                            ViolationCode::BadWeight,
                            format!("vertex {i} has weight {w} in unit mode"),
                        ));
                    }
                }
                (unit, unit)
            }
            WeightMode::Scored => {
                let default = match rv.kind {
                    VertexKind::Pair => Weight::ONE,
                    VertexKind::Ndd => Weight::ZERO,
                };
                let s = rv.social_weight.unwrap_or(default);
                let a = rv.agent_weight.unwrap_or(default);
                if s.is_negative() || a.is_negative() {
                    violations.push(Violation::new(
                        ViolationCode::BadWeight,
                        format!("vertex {i} has a negative weight"),
                    ));
                }
                if rv.kind == VertexKind::Ndd && (!s.is_zero() || !a.is_zero()) {
                    violations.push(Violation::new(
                        ViolationCode::BadWeight,
                        format!("ndd vertex {i} must carry zero weight"),
                    ));
                }
                (s, a)
            }
        };
        vertices.push(VertexRecord {
            id: VertexId(i),
            agent: AgentId(rv.agent),
            kind: rv.kind,
            social_weight: social,
            agent_weight: agent,
        });
    }

    let mut arcs = BTreeSet::new();
    for &(u, v) in &raw.arcs {
        if u >= n || v >= n {
            violations.push(Violation::new(
                ViolationCode::DanglingArc,
                format!("arc ({u}, {v}) references a missing vertex"),
            ));
            continue;
        }
        if u == v {
            violations.push(Violation::new(
                ViolationCode::SelfLoop,
                format!("arc ({u}, {v}) is a self-loop"),
            ));
            continue;
        }
        if raw.vertices[v].kind == VertexKind::Ndd {
            violations.push(Violation::new(
                ViolationCode::ArcIntoNdd,
                format!("arc ({u}, {v}) ends in a non-directed donor"),
            ));
        }
        if !arcs.insert((VertexId(u), VertexId(v))) {
            violations.push(Violation::new(
                ViolationCode::DuplicateArc,
                format!("arc ({u}, {v}) listed twice"),
            ));
        }
    }

    if let Some(labels) = &raw.labels {
        if labels.len() != n {
            violations.push(Violation::new(
                ViolationCode::BadLabels,
                format!("{} labels for {n} vertices", labels.len()),
            ));
        } else {
            let mut seen = BTreeMap::new();
            for (i, l) in labels.iter().enumerate() {
                if let Some(prev) = seen.insert(l.as_str(), i) {
                    violations.push(Violation::new(
                        ViolationCode::BadLabels,
                        format!("label `{l}` used by vertices {prev} and {i}"),
                    ));
                }
            }
        }
    }

    if !violations.is_empty() {
        return Err(InstanceError { violations });
    }

    let mut successors = vec![Vec::new(); n];
    for &(u, v) in &arcs {
        successors[u.0].push(v);
    }
    let mut agent_vertices = vec![Vec::new(); raw.agents.len()];
    for v in &vertices {
        agent_vertices[v.agent.0].push(v.id);
    }

    Ok(Instance {
        agents: raw.agents,
        vertices,
        arcs,
        successors,
        agent_vertices,
        max_cycle_len: raw.max_cycle_len,
        max_chain_len: raw.max_chain_len,
        weight_mode: raw.weight_mode,
        labels: raw.labels,
    })
}

/// Incremental construction of unit- or score-weighted instances.
#[derive(Debug, Clone)]
pub struct InstanceBuilder {
    raw: RawInstance,
    label_index: BTreeMap<String, usize>,
}

impl InstanceBuilder {
    pub fn new(max_cycle_len: usize, max_chain_len: usize) -> Self {
        InstanceBuilder {
            raw: RawInstance {
                max_cycle_len,
                max_chain_len,
                ..RawInstance::default()
            },
            label_index: BTreeMap::new(),
        }
    }

    pub fn weight_mode(mut self, mode: WeightMode) -> Self {
        self.raw.weight_mode = mode;
        self
    }

    pub fn agent(&mut self, name: impl Into<String>) -> AgentId {
        self.raw.agents.push(name.into());
        AgentId(self.raw.agents.len() - 1)
    }

    fn push(&mut self, agent: AgentId, kind: VertexKind, label: Option<String>) -> VertexId {
        let id = self.raw.vertices.len();
        self.raw.vertices.push(RawVertex {
            agent: agent.0,
            kind,
            social_weight: None,
            agent_weight: None,
        });
        if let Some(l) = label {
            let labels = self
                .raw
                .labels
                .get_or_insert_with(|| (0..id).map(|i| i.to_string()).collect());
            self.label_index.insert(l.clone(), id);
            labels.push(l);
        } else if let Some(labels) = self.raw.labels.as_mut() {
            labels.push(id.to_string());
        }
        VertexId(id)
    }

    pub fn pair(&mut self, agent: AgentId) -> VertexId {
        self.push(agent, VertexKind::Pair, None)
    }

    pub fn ndd(&mut self, agent: AgentId) -> VertexId {
        self.push(agent, VertexKind::Ndd, None)
    }

    pub fn labeled_pair(&mut self, agent: AgentId, label: impl Into<String>) -> VertexId {
        self.push(agent, VertexKind::Pair, Some(label.into()))
    }

    pub fn labeled_ndd(&mut self, agent: AgentId, label: impl Into<String>) -> VertexId {
        self.push(agent, VertexKind::Ndd, Some(label.into()))
    }

    /// Sets scored-mode weights for a vertex.
    pub fn weights(&mut self, v: VertexId, social: Weight, agent: Weight) -> &mut Self {
        let rv = &mut self.raw.vertices[v.0];
        rv.social_weight = Some(social);
        rv.agent_weight = Some(agent);
        self
    }

    pub fn arc(&mut self, u: VertexId, v: VertexId) -> &mut Self {
        self.raw.arcs.push((u.0, v.0));
        self
    }

    /// Adds an arc between two labeled vertices. Panics on unknown labels.
    pub fn arc_by_label(&mut self, u: &str, v: &str) -> &mut Self {
        let (u, v) = (self.label_index[u], self.label_index[v]);
        self.raw.arcs.push((u, v));
        self
    }

    pub fn vertex(&self, label: &str) -> Option<VertexId> {
        self.label_index.get(label).copied().map(VertexId)
    }

    pub fn into_raw(self) -> RawInstance {
        self.raw
    }

    pub fn build(self) -> Result<Instance, InstanceError> {
        validate_instance(self.raw)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw_pairs(n: usize, arcs: &[(usize, usize)]) -> RawInstance {
        RawInstance {
            agents: vec!["a".into()],
            vertices: (0..n)
                .map(|_| RawVertex {
                    agent: 0,
                    kind: VertexKind::Pair,
                    social_weight: None,
                    agent_weight: None,
                })
                .collect(),
            arcs: arcs.to_vec(),
            max_cycle_len: 3,
            max_chain_len: 0,
            ..RawInstance::default()
        }
    }

    #[test]
    fn empty_instance_is_valid() {
        let inst = validate_instance(RawInstance {
            max_cycle_len: 3,
            ..RawInstance::default()
        })
        .unwrap();
        assert_eq!(inst.num_vertices(), 0);
        assert_eq!(inst.num_arcs(), 0);
    }

    #[test]
    fn self_loop_rejected() {
        let err = validate_instance(raw_pairs(1, &[(0, 0)])).unwrap_err();
        assert_eq!(err.codes(), vec![ViolationCode::SelfLoop]);
    }

    #[test]
    fn each_breach_has_its_own_code() {
        let mut raw = raw_pairs(2, &[(0, 1), (0, 1), (0, 5)]);
        raw.max_cycle_len = 0;
        raw.max_chain_len = 99;
        raw.vertices[1].agent = 7;
        let codes = validate_instance(raw).unwrap_err().codes();
        for c in [
            ViolationCode::DuplicateArc,
            ViolationCode::DanglingArc,
            ViolationCode::CycleCapOutOfRange,
            ViolationCode::ChainCapOutOfRange,
            ViolationCode::UnknownAgent,
        ] {
            assert!(codes.contains(&c), "missing {c}");
        }
    }

    #[test]
    fn unit_mode_weights_enforced() {
        let mut raw = raw_pairs(1, &[]);
        raw.vertices[0].social_weight = Some(Weight::from_int(2));
        let codes = validate_instance(raw).unwrap_err().codes();
        assert_eq!(codes, vec![ViolationCode::BadWeight]);
    }

    #[test]
    fn arc_into_ndd_rejected() {
        let mut b = InstanceBuilder::new(3, 2);
        let a = b.agent("a");
        let p = b.pair(a);
        let d = b.ndd(a);
        b.arc(p, d);
        assert_eq!(b.build().unwrap_err().codes(), vec![ViolationCode::ArcIntoNdd]);
    }

    #[test]
    fn builder_labels() {
        let mut b = InstanceBuilder::new(3, 0);
        let a = b.agent("a");
        b.labeled_pair(a, "p");
        b.labeled_pair(a, "q");
        b.arc_by_label("p", "q").arc_by_label("q", "p");
        let inst = b.build().unwrap();
        assert_eq!(inst.vertex_by_label("q"), Some(VertexId(1)));
        assert_eq!(inst.successors(VertexId(0)), &[VertexId(1)]);
        assert_eq!(inst.agent_vertices(AgentId(0)).len(), 2);
    }
}
