//! Mechanisms: the social optimum, MaxInt and the maximum rejection-proof solution.

mod maxint;
mod rejection;
mod rowgen;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::engine::{solve_exact, PackingProblem};
use crate::error::{Error, Result};
use crate::market::{Market, Solution};
use crate::model::{AgentId, VertexId};
use crate::weight::Weight;

pub use maxint::solve_maxint;
pub use rejection::{
    is_rejection_proof, rejection_witnesses, separate_violations, RejectionWitness,
};
pub use rowgen::{
    solve_maxrp, ConstraintOrigin, IterationRecord, MasterSolve, MaxRpOptions, RowGenReport,
    RowGenerator, SeedConstraints, SubsetRejectionConstraint, Tiebreak,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mechanism {
    Social,
    MaxInt,
    MaxRp,
}

impl Mechanism {
    pub fn as_str(self) -> &'static str {
        match self {
            Mechanism::Social => "social",
            Mechanism::MaxInt => "maxint",
            Mechanism::MaxRp => "maxrp",
        }
    }
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mechanism {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "social" => Ok(Mechanism::Social),
            "maxint" => Ok(Mechanism::MaxInt),
            "maxrp" => Ok(Mechanism::MaxRp),
            other => Err(format!("unknown mechanism `{other}`")),
        }
    }
}

/// Outcome of running one mechanism.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub mechanism: Mechanism,
    pub value: Weight,
    pub agent_values: Vec<Weight>,
    #[serde(with = "duration_secs")]
    pub total_time: Duration,
    pub node_count: u64,
    pub rowgen: Option<RowGenReport>,
}

pub(crate) mod duration_secs {
    use serde::Serializer;
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }
}

/// Runs `mechanism` with default options (tiebreak on, no seeded constraints for MaxRP).
pub fn run_mechanism(market: &Market, mechanism: Mechanism) -> Result<(Solution, RunReport)> {
    match mechanism {
        Mechanism::Social => {
            let start = std::time::Instant::now();
            let (sol, nodes) = social_optimum_with_nodes(market)?;
            let report = RunReport {
                mechanism,
                value: sol.value,
                agent_values: sol.agent_values.clone(),
                total_time: start.elapsed(),
                node_count: nodes,
                rowgen: None,
            };
            Ok((sol, report))
        }
        Mechanism::MaxInt => solve_maxint(market),
        Mechanism::MaxRp => {
            let start = std::time::Instant::now();
            let (sol, rg) = solve_maxrp(market, &MaxRpOptions::default())?;
            let report = RunReport {
                mechanism,
                value: sol.value,
                agent_values: sol.agent_values.clone(),
                total_time: start.elapsed(),
                node_count: rg.node_count,
                rowgen: Some(rg),
            };
            Ok((sol, report))
        }
    }
}

/// Packing problem over the market's scoped exchanges with social objective.
pub(crate) fn social_problem(market: &Market) -> PackingProblem<'_> {
    PackingProblem::new(market.exchanges())
        .with_objective(|e| e.weight)
        .forbid_where(|e| !market.exchange_in_scope(e))
        .with_deadline(market.deadline())
}

fn social_optimum_with_nodes(market: &Market) -> Result<(Solution, u64)> {
    let r = solve_exact(&social_problem(market))?;
    Ok((market.evaluate(r.assignment)?, r.node_count))
}

/// Maximum social value solution over all vertex-disjoint exchange sets in scope.
pub fn solve_social_optimum(market: &Market) -> Result<Solution> {
    social_optimum_with_nodes(market).map(|(s, _)| s)
}

/// Maximum agent value of `agent` using only exchanges inside `subset`
/// (restricted to the agent's own vertices in scope).
pub fn beta(market: &Market, agent: AgentId, subset: &BTreeSet<VertexId>) -> Result<Weight> {
    internal_optimum(market, agent, subset).map(|s| s.agent_value(agent))
}

/// Deterministic internal optimum of `agent` on `G[subset ∩ Vᵃ]`.
pub fn internal_optimum(
    market: &Market,
    agent: AgentId,
    subset: &BTreeSet<VertexId>,
) -> Result<Solution> {
    let inst = market.instance();
    if subset.iter().any(|v| v.0 >= inst.num_vertices()) {
        return Err(Error::InvalidProblem("subset references a missing vertex".into()));
    }
    let p = PackingProblem::new(market.exchanges())
        .with_objective(|e| e.agent_weight(agent))
        .forbid_where(|e| {
            !e.is_internal_to(agent)
                || !market.exchange_in_scope(e)
                || !e.vertices.iter().all(|v| subset.contains(v))
        })
        .with_deadline(market.deadline());
    let r = solve_exact(&p)?;
    market.evaluate(r.assignment)
}

/// `β(Vᵃ)` over the agent's full scoped pool.
pub fn beta_full(market: &Market, agent: AgentId) -> Result<Weight> {
    beta(market, agent, &market.agent_scope(agent))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn labels(m: &Market, ls: &[&str]) -> BTreeSet<VertexId> {
        ls.iter()
            .map(|l| m.instance().vertex_by_label(l).unwrap())
            .collect()
    }

    #[test]
    fn social_optimum_examples() {
        let m = Market::new(fixtures::red_blue_pool());
        let s = solve_social_optimum(&m).unwrap();
        assert_eq!(s.value, Weight::from_int(6));
        let expect: BTreeSet<_> = [
            m.find_labeled(&["a", "1", "2"]).unwrap(),
            m.find_labeled(&["c", "3", "4"]).unwrap(),
        ]
        .into();
        assert_eq!(s.exchanges, expect);

        let m1 = Market::new(fixtures::single_agent_chain_pool());
        assert_eq!(solve_social_optimum(&m1).unwrap().value, Weight::from_int(4));

        let mut b = crate::model::InstanceBuilder::new(3, 0);
        let a = b.agent("a");
        b.pair(a);
        b.pair(a);
        let empty = Market::new(b.build().unwrap());
        let s = solve_social_optimum(&empty).unwrap();
        assert!(s.is_empty());
        assert_eq!(s.value, Weight::ZERO);
    }

    #[test]
    fn beta_examples() {
        let m = Market::new(fixtures::red_blue_pool());
        let red = m.instance().agent_by_name("red").unwrap();
        let blue = m.instance().agent_by_name("blue").unwrap();
        assert_eq!(beta(&m, red, &labels(&m, &["b", "c"])).unwrap(), Weight::from_int(2));
        assert_eq!(beta(&m, red, &BTreeSet::new()).unwrap(), Weight::ZERO);
        assert_eq!(beta(&m, blue, &labels(&m, &["3", "4"])).unwrap(), Weight::ZERO);
        assert_eq!(beta_full(&m, blue).unwrap(), Weight::from_int(3));
    }

    #[test]
    fn mechanism_names_round_trip() {
        for m in [Mechanism::Social, Mechanism::MaxInt, Mechanism::MaxRp] {
            assert_eq!(m.as_str().parse::<Mechanism>().unwrap(), m);
        }
        assert!("best".parse::<Mechanism>().is_err());
    }
}
