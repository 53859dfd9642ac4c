//! Agent-side behaviour: best responses to a proposal, greedy withholding and
//! the two games built on them.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::engine::{solve_exact, PackingProblem};
use crate::error::{Error, Result};
use crate::market::{Market, Solution};
use crate::mechanisms::{internal_optimum, run_mechanism, Mechanism};
use crate::model::{AgentId, ExchangeId, VertexId};
use crate::par;
use crate::weight::Weight;

/// An agent's answer to a proposal: the shared exchanges it keeps and the
/// internal exchanges it runs itself.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RejectionStrategy {
    pub agent: AgentId,
    pub kept_shared: BTreeSet<ExchangeId>,
    pub internal_selected: BTreeSet<ExchangeId>,
}

impl RejectionStrategy {
    pub fn exchanges(&self) -> impl Iterator<Item = ExchangeId> + '_ {
        self.kept_shared.iter().chain(&self.internal_selected).copied()
    }

    /// Accepting `x` as proposed.
    pub fn accept(market: &Market, x: &Solution, agent: AgentId) -> Self {
        let mut s = RejectionStrategy {
            agent,
            kept_shared: BTreeSet::new(),
            internal_selected: BTreeSet::new(),
        };
        for &id in &x.exchanges {
            let e = market.exchange(id);
            if e.is_internal_to(agent) {
                s.internal_selected.insert(id);
            } else if e.is_shared() && e.touches_agent(agent) {
                s.kept_shared.insert(id);
            }
        }
        s
    }
}

/// Best response of `agent` to the proposal `x`.
///
/// The agent may use any of its own internal exchanges and any shared exchange
/// of `x` touching it; other shared exchanges are unavailable. When the best
/// response is worth exactly `wᵃ(x)` the agent accepts and the returned
/// strategy is `x` itself.
pub fn solve_rkep(market: &Market, x: &Solution, agent: AgentId) -> Result<(Weight, RejectionStrategy)> {
    if agent.0 >= market.instance().num_agents() {
        return Err(Error::InvalidProblem(format!("unknown agent {agent}")));
    }
    let p = PackingProblem::new(market.exchanges())
        .with_objective(|e| e.agent_weight(agent))
        .forbid_where(|e| {
            !market.exchange_in_scope(e)
                || !e.touches_agent(agent)
                || (e.is_shared() && !x.contains(e.id))
                || (!e.is_shared() && !e.is_internal_to(agent))
        })
        .with_deadline(market.deadline());
    let r = solve_exact(&p)?;
    let current = x.agent_value(agent);
    if r.objective_value < current {
        return Err(Error::Internal(format!(
            "best response of agent {agent} is below accepting"
        )));
    }
    if r.objective_value == current {
        return Ok((current, RejectionStrategy::accept(market, x, agent)));
    }
    let (kept_shared, internal_selected) = r
        .assignment
        .iter()
        .partition(|&&id| market.exchange(id).is_shared());
    Ok((
        r.objective_value,
        RejectionStrategy {
            agent,
            kept_shared,
            internal_selected,
        },
    ))
}

/// Vertices covered by the agent's deterministic internal optimum.
pub fn greedy_withholding(market: &Market, agent: AgentId) -> Result<BTreeSet<VertexId>> {
    Ok(internal_optimum(market, agent, &market.agent_scope(agent))?.covered)
}

/// Vertices each agent hides from the mechanism.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct WithholdingProfile {
    pub withheld: BTreeMap<AgentId, BTreeSet<VertexId>>,
}

impl WithholdingProfile {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Greedy withholding by every agent in `agents`.
    pub fn greedy<I>(market: &Market, agents: I) -> Result<Self>
    where
        I: IntoIterator<Item = AgentId>,
    {
        let mut withheld = BTreeMap::new();
        for a in agents {
            withheld.insert(a, greedy_withholding(market, a)?);
        }
        Ok(WithholdingProfile { withheld })
    }

    pub fn all_greedy(market: &Market) -> Result<Self> {
        Self::greedy(market, market.instance().agent_ids())
    }

    pub fn withheld_by(&self, a: AgentId) -> Option<&BTreeSet<VertexId>> {
        self.withheld.get(&a)
    }

    fn validate(&self, market: &Market) -> Result<()> {
        let inst = market.instance();
        for (a, w) in &self.withheld {
            if a.0 >= inst.num_agents() {
                return Err(Error::InvalidProblem(format!("unknown agent {a}")));
            }
            if w.iter().any(|v| v.0 >= inst.num_vertices() || inst.vertex(*v).agent != *a) {
                return Err(Error::InvalidProblem(format!(
                    "agent {a} withholds a vertex it does not own"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GameOutcome {
    pub final_solution: Solution,
    /// Indexed by agent id.
    pub per_agent_value: Vec<Weight>,
    /// Agent values under full cooperation.
    pub baseline_value: Vec<Weight>,
}

impl GameOutcome {
    pub fn total_value(&self) -> Weight {
        self.final_solution.value
    }
}

/// Withholding game: the mechanism sees only revealed vertices, then every
/// agent runs its internal optimum on withheld plus revealed-but-unmatched vertices.
pub fn play_withholding_game(
    market: &Market,
    profile: &WithholdingProfile,
    mechanism: Mechanism,
) -> Result<GameOutcome> {
    let baseline = run_mechanism(market, mechanism)?.0;
    play_withholding_game_against(market, profile, mechanism, &baseline)
}

/// [`play_withholding_game`] with a precomputed full-cooperation solution.
pub fn play_withholding_game_against(
    market: &Market,
    profile: &WithholdingProfile,
    mechanism: Mechanism,
    baseline: &Solution,
) -> Result<GameOutcome> {
    profile.validate(market)?;
    let inst = market.instance();
    let hidden: BTreeSet<VertexId> = profile.withheld.values().flatten().copied().collect();
    let revealed: BTreeSet<VertexId> = (0..inst.num_vertices())
        .map(VertexId)
        .filter(|v| market.in_scope(*v) && !hidden.contains(v))
        .collect();
    let x = if hidden.is_empty() {
        baseline.clone()
    } else {
        run_mechanism(&market.restrict(&revealed), mechanism)?.0
    };

    let agents: Vec<AgentId> = inst.agent_ids().collect();
    let patches = par::map(market.execution(), &agents, |&a| {
        let pool: BTreeSet<VertexId> = market
            .agent_scope(a)
            .into_iter()
            .filter(|v| !x.covered.contains(v))
            .collect();
        internal_optimum(market, a, &pool)
    });
    let mut ids = x.exchanges.clone();
    for p in patches {
        ids.extend(p?.exchanges);
    }
    let final_solution = market.evaluate(ids)?;
    Ok(GameOutcome {
        per_agent_value: final_solution.agent_values.clone(),
        baseline_value: baseline.agent_values.clone(),
        final_solution,
    })
}

/// Rejection game: the mechanism proposes on the full graph; responders play
/// their best response and all other agents accept.
pub fn play_rejection_game(
    market: &Market,
    mechanism: Mechanism,
    responders: &BTreeSet<AgentId>,
) -> Result<GameOutcome> {
    let proposal = run_mechanism(market, mechanism)?.0;
    respond_to_proposal(market, &proposal, responders)
}

/// Outcome of the rejection game for a given proposal.
///
/// A shared exchange survives iff every agent it touches keeps it; each
/// agent's internal selections are added.
pub fn respond_to_proposal(
    market: &Market,
    proposal: &Solution,
    responders: &BTreeSet<AgentId>,
) -> Result<GameOutcome> {
    let inst = market.instance();
    if let Some(a) = responders.iter().find(|a| a.0 >= inst.num_agents()) {
        return Err(Error::InvalidProblem(format!("unknown agent {a}")));
    }
    let agents: Vec<AgentId> = inst.agent_ids().collect();
    let strategies = par::map(market.execution(), &agents, |&a| {
        if responders.contains(&a) {
            solve_rkep(market, proposal, a).map(|(_, s)| s)
        } else {
            Ok(RejectionStrategy::accept(market, proposal, a))
        }
    });
    let strategies: Vec<RejectionStrategy> = strategies.into_iter().collect::<Result<_>>()?;

    let mut ids = BTreeSet::new();
    for &id in &proposal.exchanges {
        let e = market.exchange(id);
        if e.is_shared()
            && e.agent_weights
                .iter()
                .all(|(a, _)| strategies[a.0].kept_shared.contains(&id))
        {
            ids.insert(id);
        }
    }
    for s in &strategies {
        ids.extend(s.internal_selected.iter().copied());
    }
    let final_solution = market.evaluate(ids)?;
    Ok(GameOutcome {
        per_agent_value: final_solution.agent_values.clone(),
        baseline_value: proposal.agent_values.clone(),
        final_solution,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn labels(m: &Market, ls: &[&str]) -> BTreeSet<VertexId> {
        ls.iter().map(|l| m.instance().vertex_by_label(l).unwrap()).collect()
    }

    fn fig3_social(m: &Market) -> Solution {
        m.evaluate([
            m.find_labeled(&["a", "1", "2"]).unwrap(),
            m.find_labeled(&["c", "3", "4"]).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn rkep_red_blue_pool() {
        let m = Market::new(fixtures::red_blue_pool());
        let red = m.instance().agent_by_name("red").unwrap();
        let blue = m.instance().agent_by_name("blue").unwrap();
        let x = fig3_social(&m);

        let (v, s) = solve_rkep(&m, &x, red).unwrap();
        assert_eq!(v, Weight::from_int(2));
        assert_eq!(s.internal_selected, BTreeSet::from([m.find_labeled(&["b", "c"]).unwrap()]));
        assert!(s.kept_shared.is_empty());

        let (v, s) = solve_rkep(&m, &x, blue).unwrap();
        assert_eq!(v, Weight::from_int(5));
        assert_eq!(s, RejectionStrategy::accept(&m, &x, blue));

        let empty = Solution::empty(2);
        assert_eq!(solve_rkep(&m, &empty, blue).unwrap().0, Weight::from_int(3));
    }

    #[test]
    fn greedy_withholding_sets() {
        let m = Market::new(fixtures::withholding_example(true));
        let a = m.instance().agent_by_name("A").unwrap();
        let b = m.instance().agent_by_name("B").unwrap();
        assert_eq!(greedy_withholding(&m, a).unwrap(), labels(&m, &["1", "2"]));
        assert!(greedy_withholding(&m, b).unwrap().is_empty());

        let m3 = Market::new(fixtures::red_blue_pool());
        let red = m3.instance().agent_by_name("red").unwrap();
        assert_eq!(greedy_withholding(&m3, red).unwrap(), labels(&m3, &["b", "c"]));
    }

    #[test]
    fn withholding_pays_off_against_the_shared_pick() {
        let m = Market::new(fixtures::withholding_example(true));
        let a = m.instance().agent_by_name("A").unwrap();
        let base = crate::mechanisms::solve_social_optimum(&m).unwrap();
        assert_eq!(base.exchanges, BTreeSet::from([m.find_labeled(&["3", "2"]).unwrap()]));

        let profile = WithholdingProfile::greedy(&m, [a]).unwrap();
        let out = play_withholding_game(&m, &profile, Mechanism::Social).unwrap();
        assert_eq!(out.per_agent_value[a.0], Weight::from_int(2));
        assert_eq!(out.baseline_value[a.0], Weight::ONE);
    }

    #[test]
    fn withholding_edge_profiles() {
        let m = Market::new(fixtures::red_blue_pool());
        let empty = play_withholding_game(&m, &WithholdingProfile::empty(), Mechanism::Social).unwrap();
        assert_eq!(empty.final_solution, fig3_social(&m));

        let mut everything = WithholdingProfile::empty();
        for a in m.instance().agent_ids() {
            everything.withheld.insert(a, m.agent_scope(a));
        }
        let out = play_withholding_game(&m, &everything, Mechanism::Social).unwrap();
        assert_eq!(out.per_agent_value, vec![Weight::from_int(2), Weight::from_int(3)]);
    }

    #[test]
    fn rejection_game_red_blue_pool() {
        let m = Market::new(fixtures::red_blue_pool());
        let red = m.instance().agent_by_name("red").unwrap();
        let out = play_rejection_game(&m, Mechanism::Social, &BTreeSet::from([red])).unwrap();
        assert_eq!(out.per_agent_value, vec![Weight::from_int(2), Weight::from_int(3)]);
        assert_eq!(out.total_value(), Weight::from_int(5));

        let none = play_rejection_game(&m, Mechanism::Social, &BTreeSet::new()).unwrap();
        assert_eq!(none.final_solution, fig3_social(&m));

        let all: BTreeSet<_> = m.instance().agent_ids().collect();
        let proposal = crate::mechanisms::run_mechanism(&m, Mechanism::MaxRp).unwrap().0;
        let rp = play_rejection_game(&m, Mechanism::MaxRp, &all).unwrap();
        assert_eq!(rp.final_solution, proposal);
    }

    #[test]
    fn foreign_withholding_rejected() {
        let m = Market::new(fixtures::red_blue_pool());
        let red = m.instance().agent_by_name("red").unwrap();
        let mut p = WithholdingProfile::empty();
        p.withheld.insert(red, labels(&m, &["a"]));
        assert!(play_withholding_game(&m, &p, Mechanism::Social).is_err());
    }
}
