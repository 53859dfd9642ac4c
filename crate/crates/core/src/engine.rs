//! Exact branch-and-bound for binary exchange-packing programs.
//!
//! Variables are exchanges, packing rows are implicit (each vertex covered at
//! most once) and side constraints are linear rows with nonnegative
//! coefficients. All arithmetic is done on integers after scaling every
//! rational by the common denominator, so `>=` comparisons are exact.
//!
//! Search branches on a free vertex: either one of the exchanges still
//! available at that vertex is selected, or the vertex is left uncovered.
//! The vertex with the fewest available exchanges is chosen (lowest id on
//! ties) and exchanges are tried by decreasing objective per vertex, then by
//! id. Two admissible bounds are combined: one spreads each exchange's
//! coefficient evenly over its vertices and takes, per free vertex, the best
//! share still available; the other charges each exchange to its most
//! contested vertex and takes the best coefficient charged there. The smaller
//! one is used, both for the objective and for row headroom. Nodes that
//! survive these checks are bounded by the LP relaxation of the residual
//! problem; the float optimum is rounded down with a small tolerance before
//! it is compared against the exact incumbent.
//! Only strictly better solutions replace the incumbent, so the returned
//! assignment is the first optimum met in this fixed order.

use std::collections::BTreeSet;
use std::time::Instant;

use microlp::{ComparisonOp, OptimizationDirection, Problem, Variable};
use num_integer::Integer;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exchange::Exchange;
use crate::model::{AgentId, ExchangeId, VertexId};
use crate::weight::Weight;

/// `Σ_{e : V(e) ∩ U ≠ ∅} wᵃ_e x_e ≥ rhs`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CoverageConstraint {
    pub agent: AgentId,
    pub touching: BTreeSet<VertexId>,
    pub rhs: Weight,
}

/// `Σ_{e internal to a} wᵃ_e x_e = rhs`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InternalEqConstraint {
    pub agent: AgentId,
    pub rhs: Weight,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Sense {
    Ge,
    Eq,
    Le,
}

/// A generic row `Σ coeff_e x_e (sense) rhs`; coefficients must be nonnegative.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LinearRow {
    pub coeffs: Vec<(ExchangeId, Weight)>,
    pub sense: Sense,
    pub rhs: Weight,
}

#[derive(Debug, Clone)]
pub struct PackingProblem<'a> {
    /// Exchange `i` must carry id `i`.
    pub exchanges: &'a [Exchange],
    /// One coefficient per exchange.
    pub objective: Vec<Weight>,
    pub forbidden: BTreeSet<ExchangeId>,
    pub coverage: Vec<CoverageConstraint>,
    pub internal_eq: Vec<InternalEqConstraint>,
    pub rows: Vec<LinearRow>,
    pub deadline: Option<Instant>,
}

impl<'a> PackingProblem<'a> {
    /// Problem with a zero objective and no side constraints.
    pub fn new(exchanges: &'a [Exchange]) -> Self {
        PackingProblem {
            exchanges,
            objective: vec![Weight::ZERO; exchanges.len()],
            forbidden: BTreeSet::new(),
            coverage: Vec::new(),
            internal_eq: Vec::new(),
            rows: Vec::new(),
            deadline: None,
        }
    }

    pub fn with_objective(mut self, f: impl Fn(&Exchange) -> Weight) -> Self {
        self.objective = self.exchanges.iter().map(f).collect();
        self
    }

    pub fn forbid_where(mut self, f: impl Fn(&Exchange) -> bool) -> Self {
        self.forbidden
            .extend(self.exchanges.iter().filter(|e| f(e)).map(|e| e.id));
        self
    }

    pub fn with_deadline(mut self, deadline: Option<Instant>) -> Self {
        self.deadline = deadline;
        self
    }

    /// Whether `assignment` satisfies packing, forbidden and all side rows.
    pub fn is_feasible(&self, assignment: &BTreeSet<ExchangeId>) -> bool {
        let mut used = BTreeSet::new();
        for id in assignment {
            if self.forbidden.contains(id) {
                return false;
            }
            let Some(e) = self.exchanges.get(id.0) else {
                return false;
            };
            if !e.vertices.iter().all(|v| used.insert(*v)) {
                return false;
            }
        }
        self.lowered_rows().iter().all(|row| {
            let lhs: Weight = row
                .coeffs
                .iter()
                .filter(|(e, _)| assignment.contains(e))
                .map(|(_, w)| *w)
                .sum();
            match row.sense {
                Sense::Ge => lhs >= row.rhs,
                Sense::Eq => lhs == row.rhs,
                Sense::Le => lhs <= row.rhs,
            }
        })
    }

    pub fn objective_of(&self, assignment: &BTreeSet<ExchangeId>) -> Weight {
        assignment.iter().map(|e| self.objective[e.0]).sum()
    }

    /// All side constraints as generic rows.
    pub fn lowered_rows(&self) -> Vec<LinearRow> {
        let mut rows = Vec::new();
        for c in &self.coverage {
            let coeffs = self
                .exchanges
                .iter()
                .filter(|e| e.vertices.iter().any(|v| c.touching.contains(v)))
                .map(|e| (e.id, e.agent_weight(c.agent)))
                .filter(|(_, w)| !w.is_zero())
                .collect();
            rows.push(LinearRow {
                coeffs,
                sense: Sense::Ge,
                rhs: c.rhs,
            });
        }
        for c in &self.internal_eq {
            let coeffs = self
                .exchanges
                .iter()
                .filter(|e| e.is_internal_to(c.agent))
                .map(|e| (e.id, e.agent_weight(c.agent)))
                .filter(|(_, w)| !w.is_zero())
                .collect();
            rows.push(LinearRow {
                coeffs,
                sense: Sense::Eq,
                rhs: c.rhs,
            });
        }
        rows.extend(self.rows.iter().cloned());
        rows
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub assignment: BTreeSet<ExchangeId>,
    pub objective_value: Weight,
    pub node_count: u64,
}

impl SolveResult {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

/// Smaller residual problems are left to the combinatorial bounds.
const LP_MIN_EXCHANGES: usize = 6;
const LP_TOLERANCE: f64 = 1e-7;

const FREE: u8 = 0;
const USED: u8 = 1;
const DEAD: u8 = 2;

struct CompiledRow {
    sense: Sense,
    rhs: i128,
    /// (exchange, coefficient, coefficient per vertex scaled by `share_scale`)
    entries: Vec<(u32, i128, i128)>,
}

struct Compiled {
    /// Compact exchange index → original id.
    ids: Vec<ExchangeId>,
    verts: Vec<Vec<u32>>,
    obj: Vec<i128>,
    obj_share: Vec<i128>,
    /// Per compact vertex, exchanges in branching order.
    vert_ex: Vec<Vec<u32>>,
    /// Per exchange, (row, coefficient).
    ex_rows: Vec<Vec<(u32, i128)>>,
    rows: Vec<CompiledRow>,
    share_scale: i128,
    num_verts: usize,
}

fn compile(p: &PackingProblem<'_>) -> Result<Compiled> {
    let m = p.exchanges.len();
    if p.objective.len() != m {
        return Err(Error::InvalidProblem(format!(
            "{} objective coefficients for {m} exchanges",
            p.objective.len()
        )));
    }
    for (i, e) in p.exchanges.iter().enumerate() {
        if e.id.0 != i {
            return Err(Error::InvalidProblem(format!(
                "exchange at position {i} carries id {}",
                e.id
            )));
        }
    }
    if let Some(bad) = p.forbidden.iter().find(|e| e.0 >= m) {
        return Err(Error::UnknownExchange(*bad));
    }
    let rows = p.lowered_rows();
    for row in &rows {
        for (e, w) in &row.coeffs {
            if e.0 >= m {
                return Err(Error::UnknownExchange(*e));
            }
            if w.is_negative() {
                return Err(Error::InvalidProblem("negative row coefficient".into()));
            }
        }
    }
    if p.objective.iter().any(|w| w.is_negative()) {
        return Err(Error::InvalidProblem("negative objective coefficient".into()));
    }

    // Common denominator for exact integer arithmetic.
    let mut denom: i128 = 1;
    let mut absorb = |w: &Weight| -> Result<()> {
        denom = denom.lcm(&(w.denom() as i128));
        if denom > (1i128 << 62) {
            return Err(Error::InvalidProblem("denominators too large".into()));
        }
        Ok(())
    };
    for w in &p.objective {
        absorb(w)?;
    }
    for row in &rows {
        absorb(&row.rhs)?;
        for (_, w) in &row.coeffs {
            absorb(w)?;
        }
    }
    let scale = |w: Weight| -> i128 { w.numer() as i128 * (denom / w.denom() as i128) };

    let mut useful = vec![false; m];
    for (i, w) in p.objective.iter().enumerate() {
        useful[i] |= !w.is_zero();
    }
    for row in &rows {
        for (e, w) in &row.coeffs {
            useful[e.0] |= !w.is_zero();
        }
    }
    for e in &p.forbidden {
        useful[e.0] = false;
    }

    let mut compact = vec![u32::MAX; m];
    let mut ids = Vec::new();
    for i in 0..m {
        if useful[i] {
            compact[i] = ids.len() as u32;
            ids.push(ExchangeId(i));
        }
    }

    let mut vertex_ids: Vec<usize> = ids
        .iter()
        .flat_map(|e| p.exchanges[e.0].vertices.iter().map(|v| v.0))
        .collect();
    vertex_ids.sort_unstable();
    vertex_ids.dedup();
    let vmap = |v: VertexId| vertex_ids.binary_search(&v.0).expect("vertex indexed") as u32;

    let verts: Vec<Vec<u32>> = ids
        .iter()
        .map(|e| p.exchanges[e.0].vertices.iter().map(|&v| vmap(v)).collect())
        .collect();
    let share_scale: i128 = verts.iter().fold(1i128, |acc, vs| acc.lcm(&(vs.len() as i128)));

    let obj: Vec<i128> = ids.iter().map(|e| scale(p.objective[e.0])).collect();
    let obj_share: Vec<i128> = obj
        .iter()
        .zip(&verts)
        .map(|(o, vs)| o * (share_scale / vs.len() as i128))
        .collect();

    let mut ex_rows = vec![Vec::new(); ids.len()];
    let mut crows = Vec::with_capacity(rows.len());
    for (r, row) in rows.iter().enumerate() {
        let mut entries = Vec::new();
        for &(e, w) in &row.coeffs {
            let c = compact[e.0];
            if c == u32::MAX || w.is_zero() {
                continue;
            }
            let coef = scale(w);
            let share = coef * (share_scale / verts[c as usize].len() as i128);
            entries.push((c, coef, share));
            ex_rows[c as usize].push((r as u32, coef));
        }
        crows.push(CompiledRow {
            sense: row.sense,
            rhs: scale(row.rhs),
            entries,
        });
    }

    let mut vert_ex = vec![Vec::new(); vertex_ids.len()];
    for (c, vs) in verts.iter().enumerate() {
        for &v in vs {
            vert_ex[v as usize].push(c as u32);
        }
    }
    for list in &mut vert_ex {
        list.sort_by(|&a, &b| {
            obj_share[b as usize]
                .cmp(&obj_share[a as usize])
                .then(a.cmp(&b))
        });
    }

    Ok(Compiled {
        ids,
        verts,
        obj,
        obj_share,
        vert_ex,
        ex_rows,
        rows: crows,
        share_scale,
        num_verts: vertex_ids.len(),
    })
}

struct Search<'c> {
    c: &'c Compiled,
    deadline: Option<Instant>,
    vstate: Vec<u8>,
    chosen: Vec<u32>,
    obj: i128,
    row_val: Vec<i128>,
    best: Option<(i128, Vec<u32>)>,
    nodes: u64,
    timed_out: bool,
    avail: Vec<bool>,
    count: Vec<u32>,
    share: Vec<i128>,
    touched: Vec<u32>,
    clique: Vec<i128>,
    clique_touched: Vec<u32>,
}

impl<'c> Search<'c> {
    fn new(c: &'c Compiled, deadline: Option<Instant>) -> Self {
        Search {
            c,
            deadline,
            vstate: vec![FREE; c.num_verts],
            chosen: Vec::new(),
            obj: 0,
            row_val: vec![0; c.rows.len()],
            best: None,
            nodes: 0,
            timed_out: false,
            avail: vec![false; c.ids.len()],
            count: vec![0; c.num_verts],
            share: vec![0; c.num_verts],
            touched: Vec::new(),
            clique: vec![0; c.num_verts],
            clique_touched: Vec::new(),
        }
    }

    fn select(&mut self, e: u32) {
        for &v in &self.c.verts[e as usize] {
            self.vstate[v as usize] = USED;
        }
        self.obj += self.c.obj[e as usize];
        for &(r, coef) in &self.c.ex_rows[e as usize] {
            self.row_val[r as usize] += coef;
        }
        self.chosen.push(e);
    }

    fn unselect(&mut self, e: u32) {
        for &v in &self.c.verts[e as usize] {
            self.vstate[v as usize] = FREE;
        }
        self.obj -= self.c.obj[e as usize];
        for &(r, coef) in &self.c.ex_rows[e as usize] {
            self.row_val[r as usize] -= coef;
        }
        self.chosen.pop();
    }

    /// Vertex of `e` with the most available exchanges (lowest on ties).
    fn anchor(&self, e: usize) -> u32 {
        let mut best = self.c.verts[e][0];
        for &v in &self.c.verts[e][1..] {
            if self.count[v as usize] > self.count[best as usize] {
                best = v;
            }
        }
        best
    }

    fn charge(&mut self, e: usize, w: i128) {
        let v = self.anchor(e) as usize;
        if self.clique[v] == 0 && w > 0 {
            self.clique_touched.push(v as u32);
        }
        if w > self.clique[v] {
            self.clique[v] = w;
        }
    }

    fn drain_clique(&mut self) -> i128 {
        let mut total = 0;
        for &v in &self.clique_touched {
            total += self.clique[v as usize];
            self.clique[v as usize] = 0;
        }
        self.clique_touched.clear();
        total
    }

    /// Upper bound on the additional row value from currently available exchanges,
    /// in units of `1 / share_scale`.
    fn row_headroom(&mut self, r: usize) -> i128 {
        let c = self.c;
        for &(e, coef, share) in &c.rows[r].entries {
            if !self.avail[e as usize] {
                continue;
            }
            self.charge(e as usize, coef);
            for &v in &c.verts[e as usize] {
                let slot = &mut self.share[v as usize];
                if *slot == 0 {
                    self.touched.push(v);
                }
                if share > *slot {
                    *slot = share;
                }
            }
        }
        let mut total = 0;
        for &v in &self.touched {
            total += self.share[v as usize];
            self.share[v as usize] = 0;
        }
        self.touched.clear();
        total.min(self.drain_clique() * c.share_scale)
    }

    fn dfs(&mut self) {
        if self.timed_out {
            return;
        }
        self.nodes += 1;
        if self.nodes.is_multiple_of(1024) {
            if let Some(d) = self.deadline {
                if Instant::now() >= d {
                    self.timed_out = true;
                    return;
                }
            }
        }
        let c = self.c;
        let scale = c.share_scale;

        for (e, vs) in c.verts.iter().enumerate() {
            self.avail[e] = vs.iter().all(|&v| self.vstate[v as usize] == FREE);
        }
        self.count.iter_mut().for_each(|x| *x = 0);
        let mut obj_bound = 0i128;
        for (e, vs) in c.verts.iter().enumerate() {
            if !self.avail[e] {
                continue;
            }
            for &v in vs {
                self.count[v as usize] += 1;
                let slot = &mut self.share[v as usize];
                if c.obj_share[e] > *slot {
                    *slot = c.obj_share[e];
                }
            }
        }
        for s in self.share.iter_mut() {
            obj_bound += *s;
            *s = 0;
        }
        for e in 0..c.verts.len() {
            if self.avail[e] {
                self.charge(e, c.obj[e]);
            }
        }
        obj_bound = obj_bound.min(self.drain_clique() * scale);
        if let Some((best, _)) = &self.best {
            if self.obj * scale + obj_bound <= *best * scale {
                return;
            }
        }

        for r in 0..c.rows.len() {
            let row = &c.rows[r];
            let val = self.row_val[r];
            if matches!(row.sense, Sense::Eq | Sense::Le) && val > row.rhs {
                return;
            }
            if matches!(row.sense, Sense::Ge | Sense::Eq) && val < row.rhs {
                let head = self.row_headroom(r);
                if val * scale + head < row.rhs * scale {
                    return;
                }
            }
        }

        if !self.lp_allows() {
            return;
        }

        // (available exchanges, vertex): fewest first, lowest id on ties
        let mut branch: Option<(u32, usize)> = None;
        for (v, &n) in self.count.iter().enumerate() {
            if n > 0 && branch.is_none_or(|(bn, _)| n < bn) {
                branch = Some((n, v));
            }
        }

        let Some((_, v)) = branch else {
            self.leaf();
            return;
        };

        let cands: Vec<u32> = c.vert_ex[v]
            .iter()
            .copied()
            .filter(|&e| self.avail[e as usize])
            .collect();
        for e in cands {
            self.select(e);
            self.dfs();
            self.unselect(e);
            if self.timed_out {
                return;
            }
        }
        self.vstate[v] = DEAD;
        self.dfs();
        self.vstate[v] = FREE;
    }

    /// LP relaxation test for the current node; `false` means prune.
    fn lp_allows(&mut self) -> bool {
        let c = self.c;
        let live: Vec<usize> = (0..c.verts.len()).filter(|&e| self.avail[e]).collect();
        if live.len() < LP_MIN_EXCHANGES {
            return true;
        }
        let mut lp = Problem::new(OptimizationDirection::Maximize);
        let mut var = vec![None; c.verts.len()];
        for &e in &live {
            var[e] = Some(lp.add_var(c.obj[e] as f64, (0.0, 1.0)));
        }
        let mut at_vertex: Vec<Vec<(Variable, f64)>> = vec![Vec::new(); c.num_verts];
        for &e in &live {
            for &v in &c.verts[e] {
                at_vertex[v as usize].push((var[e].expect("live"), 1.0));
            }
        }
        for terms in at_vertex.into_iter().filter(|t| t.len() > 1) {
            lp.add_constraint(terms.as_slice(), ComparisonOp::Le, 1.0);
        }
        for (r, row) in c.rows.iter().enumerate() {
            let rest = (row.rhs - self.row_val[r]) as f64;
            let terms: Vec<(Variable, f64)> = row
                .entries
                .iter()
                .filter_map(|&(e, coef, _)| var[e as usize].map(|x| (x, coef as f64)))
                .collect();
            match row.sense {
                Sense::Ge if rest <= 0.0 => {}
                Sense::Ge => lp.add_constraint(terms.as_slice(), ComparisonOp::Ge, rest),
                Sense::Eq => lp.add_constraint(terms.as_slice(), ComparisonOp::Eq, rest),
                Sense::Le => lp.add_constraint(terms.as_slice(), ComparisonOp::Le, rest),
            }
        }
        match lp.solve() {
            Err(microlp::Error::Infeasible) => false,
            Ok(out) => match (out.solution(), &self.best) {
                (Some(sol), Some((best, _))) => {
                    let bound = sol.objective();
                    let slack = LP_TOLERANCE * bound.abs().max(1.0);
                    self.obj + (bound + slack).floor() as i128 > *best
                }
                _ => true,
            },
            Err(_) => true,
        }
    }

    fn leaf(&mut self) {
        for (r, row) in self.c.rows.iter().enumerate() {
            let val = self.row_val[r];
            let ok = match row.sense {
                Sense::Ge => val >= row.rhs,
                Sense::Eq => val == row.rhs,
                Sense::Le => val <= row.rhs,
            };
            if !ok {
                return;
            }
        }
        if self.best.as_ref().is_none_or(|(b, _)| self.obj > *b) {
            self.best = Some((self.obj, self.chosen.clone()));
        }
    }
}

/// Solves the packing problem to proven optimality.
///
/// Returns [`Error::TimeLimit`] when the deadline passes first.
pub fn solve_exact(p: &PackingProblem<'_>) -> Result<SolveResult> {
    let c = compile(p)?;
    let mut search = Search::new(&c, p.deadline);
    search.dfs();
    if search.timed_out {
        return Err(Error::TimeLimit);
    }
    let nodes = search.nodes;
    Ok(match search.best {
        Some((_, chosen)) => {
            let assignment: BTreeSet<ExchangeId> =
                chosen.iter().map(|&e| c.ids[e as usize]).collect();
            let objective_value = p.objective_of(&assignment);
            SolveResult {
                status: SolveStatus::Optimal,
                assignment,
                objective_value,
                node_count: nodes,
            }
        }
        None => SolveResult {
            status: SolveStatus::Infeasible,
            assignment: BTreeSet::new(),
            objective_value: Weight::ZERO,
            node_count: nodes,
        },
    })
}
