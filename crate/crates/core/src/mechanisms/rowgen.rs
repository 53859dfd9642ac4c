//! Row generation for the maximum rejection-proof solution.
//!
//! The master problem is the plain packing program plus the subset rejection
//! constraints found so far. Each round the master optimum is handed to every
//! agent; each agent that would reject contributes one violated constraint
//! built from its best response. The loop stops once nobody rejects.

use std::collections::BTreeSet;
use std::str::FromStr;
use std::time::{Duration, Instant};

use num_integer::Integer;
use serde::{Deserialize, Serialize};

use super::duration_secs;
use super::rejection::{is_rejection_proof, separate_violations};
use super::{beta_full, social_problem};
use crate::engine::{solve_exact, CoverageConstraint, LinearRow, PackingProblem, Sense};
use crate::error::{Error, Result};
use crate::exchange::Exchange;
use crate::market::{Market, Solution};
use crate::model::{AgentId, VertexId, VertexKind};
use crate::par;
use crate::weight::Weight;

/// How ties among social optima of the master are broken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tiebreak {
    /// Plain social objective.
    Off,
    /// Maximize social value, fix it, then maximize internal value.
    #[serde(alias = "on")]
    Lexicographic,
    /// Single solve of `Z·w + t₁` with `Z` large enough to never trade social value.
    Weighted,
}

impl Tiebreak {
    pub fn is_on(self) -> bool {
        self != Tiebreak::Off
    }
}

impl FromStr for Tiebreak {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "off" => Ok(Tiebreak::Off),
            "on" | "lexicographic" => Ok(Tiebreak::Lexicographic),
            "weighted" => Ok(Tiebreak::Weighted),
            other => Err(format!("unknown tiebreak `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SeedConstraints {
    #[default]
    None,
    /// One constraint `(a, Vᵃ, β(Vᵃ))` per agent before the first master solve.
    FullPool,
}

impl FromStr for SeedConstraints {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "none" => Ok(SeedConstraints::None),
            "full-pool" | "full_pool" => Ok(SeedConstraints::FullPool),
            other => Err(format!("unknown seed constraint set `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaxRpOptions {
    pub tiebreak: Tiebreak,
    pub seed: SeedConstraints,
    /// Give up with [`Error::TimeLimit`] after this many master solves.
    pub max_iterations: Option<usize>,
}

impl Default for MaxRpOptions {
    fn default() -> Self {
        MaxRpOptions {
            tiebreak: Tiebreak::Lexicographic,
            seed: SeedConstraints::None,
            max_iterations: None,
        }
    }
}

impl MaxRpOptions {
    pub fn with_tiebreak(mut self, tiebreak: Tiebreak) -> Self {
        self.tiebreak = tiebreak;
        self
    }

    pub fn with_seed(mut self, seed: SeedConstraints) -> Self {
        self.seed = seed;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintOrigin {
    Separated,
    Seeded,
}

/// `Σ_{e : V(e) ∩ U ≠ ∅} wᵃ_e x_e ≥ β(U)` for `U ⊆ Vᵃ`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SubsetRejectionConstraint {
    pub agent: AgentId,
    pub subset: BTreeSet<VertexId>,
    pub rhs: Weight,
    pub origin: ConstraintOrigin,
}

impl SubsetRejectionConstraint {
    /// Canonical duplicate-detection key.
    pub fn key(&self) -> (AgentId, Vec<VertexId>) {
        (self.agent, self.subset.iter().copied().collect())
    }

    pub fn to_coverage(&self) -> CoverageConstraint {
        CoverageConstraint {
            agent: self.agent,
            touching: self.subset.clone(),
            rhs: self.rhs,
        }
    }

    /// Left-hand side evaluated on `x`.
    pub fn lhs(&self, market: &Market, x: &Solution) -> Weight {
        x.exchanges
            .iter()
            .map(|&id| market.exchange(id))
            .filter(|e| e.vertices.iter().any(|v| self.subset.contains(v)))
            .map(|e| e.agent_weight(self.agent))
            .sum()
    }

    pub fn is_satisfied_by(&self, market: &Market, x: &Solution) -> bool {
        self.lhs(market, x) >= self.rhs
    }
}

/// Master values observed in one round.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IterationRecord {
    pub value: Weight,
    pub internal_value: Weight,
    pub cuts: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RowGenReport {
    /// Number of master solves.
    pub iterations: usize,
    /// Separated constraints (seeded ones are counted in `seeded`).
    pub constraints_added: usize,
    pub seeded: usize,
    #[serde(with = "duration_secs")]
    pub master_time: Duration,
    #[serde(with = "duration_secs")]
    pub separation_time: Duration,
    pub final_value: Weight,
    pub tiebreak_used: bool,
    pub tiebreak: Tiebreak,
    pub rejection_proof_certified: bool,
    pub node_count: u64,
    pub history: Vec<IterationRecord>,
}

/// One master solve.
#[derive(Debug, Clone)]
pub struct MasterSolve {
    pub solution: Solution,
    pub node_count: u64,
}

/// The cut pool and master problem of one row-generation run.
#[derive(Debug, Clone)]
pub struct RowGenerator<'m> {
    market: &'m Market,
    pool: Vec<SubsetRejectionConstraint>,
    keys: BTreeSet<(AgentId, Vec<VertexId>)>,
}

impl<'m> RowGenerator<'m> {
    pub fn new(market: &'m Market) -> Self {
        RowGenerator {
            market,
            pool: Vec::new(),
            keys: BTreeSet::new(),
        }
    }

    pub fn constraints(&self) -> &[SubsetRejectionConstraint] {
        &self.pool
    }

    /// Adds `c` unless an identical key is present; returns whether it was new.
    pub fn add(&mut self, c: SubsetRejectionConstraint) -> bool {
        if self.keys.insert(c.key()) {
            self.pool.push(c);
            true
        } else {
            false
        }
    }

    /// Adds `(a, Vᵃ, β(Vᵃ))` for every agent with a nonempty scoped pool; returns the count.
    pub fn seed_full_pool(&mut self) -> Result<usize> {
        let m = self.market;
        let agents: Vec<AgentId> = m.instance().agent_ids().collect();
        let betas = par::map(m.execution(), &agents, |&a| beta_full(m, a));
        let mut added = 0;
        for (a, b) in agents.into_iter().zip(betas) {
            let subset = m.agent_scope(a);
            if subset.is_empty() {
                continue;
            }
            let c = SubsetRejectionConstraint {
                agent: a,
                subset,
                rhs: b?,
                origin: ConstraintOrigin::Seeded,
            };
            if self.add(c) {
                added += 1;
            }
        }
        Ok(added)
    }

    fn base_problem(&self) -> PackingProblem<'m> {
        let mut p = social_problem(self.market);
        p.coverage = self.pool.iter().map(|c| c.to_coverage()).collect();
        p
    }

    /// Solves the master over the current pool.
    pub fn master(&self, tiebreak: Tiebreak) -> Result<MasterSolve> {
        let m = self.market;
        let mut p = self.base_problem();
        let mut nodes = 0;
        match tiebreak {
            Tiebreak::Off => {}
            Tiebreak::Weighted => {
                let z = weighted_z(m);
                p.objective = m
                    .exchanges()
                    .iter()
                    .map(|e| z * e.weight + internal_coefficient(e))
                    .collect();
            }
            Tiebreak::Lexicographic => {
                let first = solve_exact(&p)?;
                if !first.is_optimal() {
                    return Err(infeasible_master());
                }
                nodes += first.node_count;
                let coeffs = m
                    .exchanges()
                    .iter()
                    .filter(|e| !p.forbidden.contains(&e.id) && !e.weight.is_zero())
                    .map(|e| (e.id, e.weight))
                    .collect();
                p.rows.push(LinearRow {
                    coeffs,
                    sense: Sense::Eq,
                    rhs: first.objective_value,
                });
                p.objective = m.exchanges().iter().map(internal_coefficient).collect();
            }
        }
        let r = solve_exact(&p)?;
        if !r.is_optimal() {
            return Err(infeasible_master());
        }
        nodes += r.node_count;
        Ok(MasterSolve {
            solution: m.evaluate(r.assignment)?,
            node_count: nodes,
        })
    }

    /// Runs master/separation rounds until the master optimum is rejection-proof.
    pub fn run(mut self, opts: &MaxRpOptions) -> Result<(Solution, RowGenReport)> {
        let m = self.market;
        let mut master_time = Duration::ZERO;
        let mut separation_time = Duration::ZERO;
        let seeded = match opts.seed {
            SeedConstraints::None => 0,
            SeedConstraints::FullPool => {
                let t = Instant::now();
                let n = self.seed_full_pool()?;
                separation_time += t.elapsed();
                n
            }
        };
        let mut history = Vec::new();
        let mut constraints_added = 0;
        let mut node_count = 0;
        loop {
            if opts.max_iterations.is_some_and(|cap| history.len() >= cap) {
                return Err(Error::TimeLimit);
            }
            let t = Instant::now();
            let master = self.master(opts.tiebreak)?;
            master_time += t.elapsed();
            node_count += master.node_count;
            let x = master.solution;

            let t = Instant::now();
            let cuts = separate_violations(m, &x)?;
            separation_time += t.elapsed();
            history.push(IterationRecord {
                value: x.value,
                internal_value: m.internal_value(&x),
                cuts: cuts.len(),
            });
            if cuts.is_empty() {
                let t = Instant::now();
                let (certified, _) = is_rejection_proof(m, &x)?;
                separation_time += t.elapsed();
                let report = RowGenReport {
                    iterations: history.len(),
                    constraints_added,
                    seeded,
                    master_time,
                    separation_time,
                    final_value: x.value,
                    tiebreak_used: opts.tiebreak.is_on(),
                    tiebreak: opts.tiebreak,
                    rejection_proof_certified: certified,
                    node_count,
                    history,
                };
                return Ok((x, report));
            }
            for c in cuts {
                let agent = c.agent;
                if !self.add(c) {
                    return Err(Error::Internal(format!(
                        "separation re-derived an existing constraint for agent {agent}"
                    )));
                }
                constraints_added += 1;
            }
        }
    }
}

fn infeasible_master() -> Error {
    Error::Internal("master problem became infeasible".into())
}

/// `t₁` coefficient: the owner's value for internal exchanges, zero for shared ones.
fn internal_coefficient(e: &Exchange) -> Weight {
    if e.is_shared() {
        Weight::ZERO
    } else {
        e.agent_weights.iter().map(|(_, w)| *w).sum()
    }
}

/// `Z = D·(1 + Σ pair agent weights)` where `D` is the common denominator of
/// the social weights, so one unit of social-value granularity outweighs any `t₁`.
fn weighted_z(market: &Market) -> Weight {
    let inst = market.instance();
    let mut denom: i64 = 1;
    let mut total = Weight::ONE;
    for v in inst.vertices() {
        denom = denom.lcm(&v.social_weight.denom());
        if v.kind == VertexKind::Pair {
            total += v.agent_weight;
        }
    }
    Weight::from_int(denom) * total
}

/// Maximum-value rejection-proof solution by row generation.
pub fn solve_maxrp(market: &Market, opts: &MaxRpOptions) -> Result<(Solution, RowGenReport)> {
    RowGenerator::new(market).run(opts)
}
