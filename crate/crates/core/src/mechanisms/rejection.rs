//! Rejection-proofness certification and separation of subset rejection constraints.

use std::collections::BTreeSet;

use serde::Serialize;

use super::beta;
use super::rowgen::{ConstraintOrigin, SubsetRejectionConstraint};
use crate::error::{Error, Result};
use crate::market::{Market, Solution};
use crate::model::{AgentId, VertexId};
use crate::par;
use crate::strategies::{solve_rkep, RejectionStrategy};
use crate::weight::Weight;

/// An agent that strictly prefers rejecting a proposal, with its best response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RejectionWitness {
    pub agent: AgentId,
    /// `wᵃ(X)` of the proposal.
    pub proposed_value: Weight,
    /// Value of the best response.
    pub response_value: Weight,
    pub strategy: RejectionStrategy,
    /// Agent vertices covered by response exchanges that are not in the proposal.
    pub subset: BTreeSet<VertexId>,
}

/// Best responses of every agent that would reject `x`, in agent order.
pub fn rejection_witnesses(market: &Market, x: &Solution) -> Result<Vec<RejectionWitness>> {
    let agents: Vec<AgentId> = market.instance().agent_ids().collect();
    let responses = par::map(market.execution(), &agents, |&a| solve_rkep(market, x, a));
    let mut out = Vec::new();
    for (a, r) in agents.into_iter().zip(responses) {
        let (value, strategy) = r?;
        let proposed = x.agent_value(a);
        if value > proposed {
            let subset = strategy
                .internal_selected
                .iter()
                .filter(|id| !x.contains(**id))
                .flat_map(|&id| market.exchange(id).vertices.iter().copied())
                .collect();
            out.push(RejectionWitness {
                agent: a,
                proposed_value: proposed,
                response_value: value,
                strategy,
                subset,
            });
        }
    }
    Ok(out)
}

/// Whether no agent strictly gains by rejecting `x`; otherwise the first rejecting agent's witness.
pub fn is_rejection_proof(
    market: &Market,
    x: &Solution,
) -> Result<(bool, Option<RejectionWitness>)> {
    let first = rejection_witnesses(market, x)?.into_iter().next();
    Ok((first.is_none(), first))
}

/// One violated subset rejection constraint per rejecting agent, built from
/// its best response. Empty iff `x` is rejection-proof.
pub fn separate_violations(market: &Market, x: &Solution) -> Result<Vec<SubsetRejectionConstraint>> {
    let witnesses = rejection_witnesses(market, x)?;
    let rhs = par::map(market.execution(), &witnesses, |w| {
        beta(market, w.agent, &w.subset)
    });
    let mut cuts = Vec::with_capacity(witnesses.len());
    for (w, rhs) in witnesses.into_iter().zip(rhs) {
        let rhs = rhs?;
        let cheap: Weight = w
            .strategy
            .internal_selected
            .iter()
            .filter(|id| !x.contains(**id))
            .map(|&id| market.exchange(id).agent_weight(w.agent))
            .sum();
        if rhs < cheap {
            return Err(Error::Internal(format!(
                "beta {rhs} below the response's own value {cheap}"
            )));
        }
        let cut = SubsetRejectionConstraint {
            agent: w.agent,
            subset: w.subset,
            rhs,
            origin: ConstraintOrigin::Separated,
        };
        if cut.subset.is_empty() || cut.is_satisfied_by(market, x) {
            return Err(Error::Internal(format!(
                "separated constraint for agent {} is not violated",
                w.agent
            )));
        }
        cuts.push(cut);
    }
    Ok(cuts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn fig3() -> (Market, AgentId, AgentId) {
        let m = Market::new(fixtures::red_blue_pool());
        let red = m.instance().agent_by_name("red").unwrap();
        let blue = m.instance().agent_by_name("blue").unwrap();
        (m, red, blue)
    }

    fn set(m: &Market, ls: &[&str]) -> BTreeSet<VertexId> {
        ls.iter().map(|l| m.instance().vertex_by_label(l).unwrap()).collect()
    }

    #[test]
    fn social_optimum_is_rejected_by_red() {
        let (m, red, _) = fig3();
        let x = m
            .evaluate([
                m.find_labeled(&["a", "1", "2"]).unwrap(),
                m.find_labeled(&["c", "3", "4"]).unwrap(),
            ])
            .unwrap();
        let (ok, w) = is_rejection_proof(&m, &x).unwrap();
        assert!(!ok);
        let w = w.unwrap();
        assert_eq!(w.agent, red);
        assert_eq!(w.response_value, Weight::from_int(2));
        assert_eq!(w.proposed_value, Weight::ONE);
        let bc = m.find_labeled(&["b", "c"]).unwrap();
        assert_eq!(w.strategy.internal_selected, BTreeSet::from([bc]));
        assert!(w.strategy.kept_shared.is_empty());

        let cuts = separate_violations(&m, &x).unwrap();
        assert_eq!(cuts.len(), 1);
        assert_eq!(cuts[0].agent, red);
        assert_eq!(cuts[0].subset, set(&m, &["b", "c"]));
        assert_eq!(cuts[0].rhs, Weight::from_int(2));
    }

    #[test]
    fn internal_optima_are_rejection_proof() {
        let (m, _, _) = fig3();
        let x = m
            .evaluate([
                m.find_labeled(&["a", "1", "2"]).unwrap(),
                m.find_labeled(&["b", "c"]).unwrap(),
            ])
            .unwrap();
        assert_eq!(is_rejection_proof(&m, &x).unwrap(), (true, None));
        assert!(separate_violations(&m, &x).unwrap().is_empty());
    }

    #[test]
    fn empty_proposal_cuts_both_agents() {
        let (m, red, blue) = fig3();
        let cuts = separate_violations(&m, &Solution::empty(2)).unwrap();
        assert_eq!(cuts.len(), 2);
        assert_eq!((cuts[0].agent, cuts[0].rhs), (red, Weight::from_int(2)));
        assert_eq!((cuts[1].agent, cuts[1].rhs), (blue, Weight::from_int(3)));
        assert_eq!(cuts[1].subset, set(&m, &["a", "1", "2"]));
    }

    #[test]
    fn single_agent_optimum_is_rejection_proof() {
        let m = Market::new(fixtures::single_agent_chain_pool());
        let x = crate::mechanisms::solve_social_optimum(&m).unwrap();
        assert!(is_rejection_proof(&m, &x).unwrap().0);
    }
}
