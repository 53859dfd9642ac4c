use std::time::Instant;

use super::{beta_full, social_problem, Mechanism, RunReport};
use crate::engine::{solve_exact, InternalEqConstraint};
use crate::error::{Error, Result};
use crate::market::{Market, Solution};
use crate::model::AgentId;
use crate::par;

/// Maximum social value subject to every agent receiving exactly its
/// internal optimum `β(Vᵃ)` from internal exchanges.
pub fn solve_maxint(market: &Market) -> Result<(Solution, RunReport)> {
    let start = Instant::now();
    let agents: Vec<AgentId> = market.instance().agent_ids().collect();
    let betas = par::map(market.execution(), &agents, |&a| beta_full(market, a));
    let mut p = social_problem(market);
    for (a, b) in agents.into_iter().zip(betas) {
        p.internal_eq.push(InternalEqConstraint { agent: a, rhs: b? });
    }
    let r = solve_exact(&p)?;
    if !r.is_optimal() {
        return Err(Error::Internal("internal-optimum equalities are infeasible".into()));
    }
    let sol = market.evaluate(r.assignment)?;
    let report = RunReport {
        mechanism: Mechanism::MaxInt,
        value: sol.value,
        agent_values: sol.agent_values.clone(),
        total_time: start.elapsed(),
        node_count: r.node_count,
        rowgen: None,
    };
    Ok((sol, report))
}
