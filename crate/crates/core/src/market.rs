//! An instance together with its exchange enumeration, optionally restricted
//! to a revealed vertex subset.

use std::collections::BTreeSet;
use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exchange::{enumerate_exchanges, Exchange};
use crate::model::{AgentId, ExchangeId, Instance, VertexId};
use crate::par::Execution;
use crate::weight::Weight;

/// A vertex-disjoint set of exchanges together with its values.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Solution {
    pub exchanges: BTreeSet<ExchangeId>,
    pub covered: BTreeSet<VertexId>,
    pub value: Weight,
    /// Indexed by agent id.
    pub agent_values: Vec<Weight>,
}

impl Solution {
    pub fn empty(num_agents: usize) -> Self {
        Solution {
            exchanges: BTreeSet::new(),
            covered: BTreeSet::new(),
            value: Weight::ZERO,
            agent_values: vec![Weight::ZERO; num_agents],
        }
    }

    pub fn agent_value(&self, a: AgentId) -> Weight {
        self.agent_values[a.0]
    }

    pub fn contains(&self, e: ExchangeId) -> bool {
        self.exchanges.contains(&e)
    }

    pub fn len(&self) -> usize {
        self.exchanges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exchanges.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct Market {
    instance: Arc<Instance>,
    exchanges: Arc<Vec<Exchange>>,
    scope: Arc<Vec<bool>>,
    deadline: Option<Instant>,
    execution: Execution,
}

impl Market {
    pub fn new(instance: Instance) -> Self {
        Self::from_arc(Arc::new(instance))
    }

    pub fn from_arc(instance: Arc<Instance>) -> Self {
        let exchanges = Arc::new(enumerate_exchanges(&instance));
        let scope = Arc::new(vec![true; instance.num_vertices()]);
        Market {
            instance,
            exchanges,
            scope,
            deadline: None,
            execution: Execution::default(),
        }
    }

    pub fn with_deadline(mut self, deadline: Option<Instant>) -> Self {
        self.deadline = deadline;
        self
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    pub fn deadline(&self) -> Option<Instant> {
        self.deadline
    }

    pub fn execution(&self) -> Execution {
        self.execution
    }

    pub fn instance(&self) -> &Instance {
        &self.instance
    }

    /// All exchanges of the full instance; ids index this slice.
    pub fn exchanges(&self) -> &[Exchange] {
        &self.exchanges
    }

    pub fn exchange(&self, id: ExchangeId) -> &Exchange {
        &self.exchanges[id.0]
    }

    /// Finds an exchange by its canonical vertex sequence.
    pub fn find(&self, vertices: &[VertexId]) -> Option<ExchangeId> {
        self.exchanges
            .binary_search_by(|e| e.vertices.as_slice().cmp(vertices))
            .ok()
            .map(ExchangeId)
    }

    /// Finds an exchange by the labels of its canonical vertex sequence.
    pub fn find_labeled(&self, labels: &[&str]) -> Option<ExchangeId> {
        let seq: Option<Vec<VertexId>> = labels
            .iter()
            .map(|l| self.instance.vertex_by_label(l))
            .collect();
        self.find(&seq?)
    }

    pub fn in_scope(&self, v: VertexId) -> bool {
        self.scope[v.0]
    }

    pub fn exchange_in_scope(&self, e: &Exchange) -> bool {
        e.vertices.iter().all(|&v| self.scope[v.0])
    }

    /// Exchange ids lying entirely inside the scope.
    pub fn scoped_exchanges(&self) -> impl Iterator<Item = &Exchange> + '_ {
        self.exchanges.iter().filter(|e| self.exchange_in_scope(e))
    }

    /// Vertices of `a` inside the scope.
    pub fn agent_scope(&self, a: AgentId) -> BTreeSet<VertexId> {
        self.instance
            .agent_vertices(a)
            .iter()
            .copied()
            .filter(|&v| self.scope[v.0])
            .collect()
    }

    /// Market on the induced subgraph `G[scope ∩ vertices]`. Ids are preserved.
    pub fn restrict(&self, vertices: &BTreeSet<VertexId>) -> Market {
        let mut scope = vec![false; self.scope.len()];
        for &v in vertices {
            if v.0 < scope.len() && self.scope[v.0] {
                scope[v.0] = true;
            }
        }
        Market {
            instance: Arc::clone(&self.instance),
            exchanges: Arc::clone(&self.exchanges),
            scope: Arc::new(scope),
            deadline: self.deadline,
            execution: self.execution,
        }
    }

    pub fn is_full_scope(&self) -> bool {
        self.scope.iter().all(|&b| b)
    }

    /// Values a set of exchange ids; rejects overlapping sets.
    pub fn evaluate<I>(&self, ids: I) -> Result<Solution>
    where
        I: IntoIterator<Item = ExchangeId>,
    {
        let mut sol = Solution::empty(self.instance.num_agents());
        let ids: BTreeSet<ExchangeId> = ids.into_iter().collect();
        for &id in &ids {
            let e = self.exchanges.get(id.0).ok_or(Error::UnknownExchange(id))?;
            for &v in &e.vertices {
                if !sol.covered.insert(v) {
                    return Err(Error::Overlap { vertex: v });
                }
            }
            sol.value += e.weight;
            for &(a, w) in &e.agent_weights {
                sol.agent_values[a.0] += w;
            }
        }
        sol.exchanges = ids;
        Ok(sol)
    }

    /// Social value of the internal exchanges of each agent, summed (the t₁ tiebreak value).
    pub fn internal_value(&self, sol: &Solution) -> Weight {
        sol.exchanges
            .iter()
            .map(|&id| self.exchange(id))
            .filter(|e| !e.is_shared())
            .map(|e| e.agent_weights.iter().map(|(_, w)| *w).sum::<Weight>())
            .sum()
    }

    /// Labels of every exchange in `sol`, for reports.
    pub fn describe(&self, sol: &Solution) -> Vec<Vec<String>> {
        sol.exchanges
            .iter()
            .map(|&id| {
                self.exchange(id)
                    .vertices
                    .iter()
                    .map(|&v| self.instance.label(v))
                    .collect()
            })
            .collect()
    }
}
