//! Adversarial (2,2)-SAT formulas and their two-agent kidney exchange encoding.
//!
//! Each variable occurs exactly twice positively and twice negatively. The
//! encoding has a green and a blue agent, `K = 3`, `L = 0` and unit weights;
//! a rejection-proof solution covering at least `t = 9|X| + 9|Y| + 5|C| + 3`
//! vertices exists iff some setting of `X` leaves the formula unsatisfiable
//! for every setting of `Y`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::market::{Market, Solution};
use crate::model::{Instance, InstanceBuilder, VertexId};
use crate::weight::Weight;

/// Limit on `|X| + |Y|` for the exhaustive ∃∀ check.
pub const BRUTE_VAR_CAP: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Literal {
    pub var: String,
    pub negated: bool,
}

impl Literal {
    pub fn pos(var: &str) -> Self {
        Literal {
            var: var.to_string(),
            negated: false,
        }
    }

    pub fn neg(var: &str) -> Self {
        Literal {
            var: var.to_string(),
            negated: true,
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negated {
            write!(f, "-{}", self.var)
        } else {
            f.write_str(&self.var)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TwoTwoSatFormula {
    pub x_vars: Vec<String>,
    pub y_vars: Vec<String>,
    pub clauses: Vec<Vec<Literal>>,
}

impl TwoTwoSatFormula {
    /// Checks names and the two-positive/two-negative occurrence pattern.
    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for v in self.x_vars.iter().chain(&self.y_vars) {
            if v.is_empty() || v == "0" || !v.chars().all(|c| c.is_ascii_alphanumeric()) {
                return Err(Error::Formula(format!("bad variable name `{v}`")));
            }
            if !seen.insert(v.as_str()) {
                return Err(Error::Formula(format!("variable `{v}` declared twice")));
            }
        }
        let mut counts: BTreeMap<&str, [usize; 2]> = seen.iter().map(|v| (*v, [0, 0])).collect();
        for (i, c) in self.clauses.iter().enumerate() {
            if c.is_empty() {
                return Err(Error::Formula(format!("clause {} is empty", i + 1)));
            }
            for lit in c {
                let slot = counts
                    .get_mut(lit.var.as_str())
                    .ok_or_else(|| Error::Formula(format!("undeclared variable `{}`", lit.var)))?;
                slot[lit.negated as usize] += 1;
            }
        }
        for (v, [p, n]) in counts {
            if p != 2 || n != 2 {
                return Err(Error::Formula(format!(
                    "variable `{v}` occurs {p} times positively and {n} times negatively; need 2 and 2"
                )));
            }
        }
        Ok(())
    }

    /// Whether `assignment` (true variables) satisfies every clause.
    pub fn is_satisfied(&self, true_vars: &BTreeSet<&str>) -> bool {
        self.clauses.iter().all(|c| {
            c.iter()
                .any(|l| true_vars.contains(l.var.as_str()) != l.negated)
        })
    }

    /// Clause index (0-based) of the `i`-th (0 or 1) occurrence of `lit`, in clause-list order.
    fn occurrence(&self, var: &str, negated: bool, i: usize) -> usize {
        self.clauses
            .iter()
            .enumerate()
            .flat_map(|(ci, c)| c.iter().map(move |l| (ci, l)))
            .filter(|(_, l)| l.var == var && l.negated == negated)
            .nth(i)
            .map(|(ci, _)| ci)
            .expect("validated formula")
    }

    /// DIMACS-like text: `x:` and `y:` declaration lines, then one clause per
/// line with `-` for negation and an optional `0` terminator.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (tag, vars) in [("x:", &self.x_vars), ("y:", &self.y_vars)] {
            s.push_str(tag);
            for v in vars {
                s.push(' ');
                s.push_str(v);
            }
            s.push('\n');
        }
        for c in &self.clauses {
            let lits: Vec<String> = c.iter().map(|l| l.to_string()).collect();
            s.push_str(&lits.join(" "));
            s.push_str(" 0\n");
        }
        s
    }
}

impl FromStr for TwoTwoSatFormula {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut f = TwoTwoSatFormula {
            x_vars: Vec::new(),
            y_vars: Vec::new(),
            clauses: Vec::new(),
        };
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            let mut toks = line.split_whitespace();
            match toks.next() {
                None | Some("c") | Some("%") => continue,
                Some(t) if t.starts_with('#') => continue,
                Some("x:") => f.x_vars.extend(toks.map(str::to_string)),
                Some("y:") => f.y_vars.extend(toks.map(str::to_string)),
                Some(_) => {
                    let mut clause = Vec::new();
                    for tok in line.split_whitespace() {
                        if tok == "0" {
                            break;
                        }
                        let lit = match tok.strip_prefix('-') {
                            Some(v) => Literal::neg(v),
                            None => Literal::pos(tok),
                        };
                        if lit.var.is_empty() {
                            return Err(Error::Formula(format!("line {}: bad literal `{tok}`", n + 1)));
                        }
                        clause.push(lit);
                    }
                    f.clauses.push(clause);
                }
            }
        }
        f.validate()?;
        Ok(f)
    }
}

/// `∃θ_X ∀θ_Y`: the formula is unsatisfied.
pub fn adversarial_sat_brute(formula: &TwoTwoSatFormula) -> Result<bool> {
    let nx = formula.x_vars.len();
    let ny = formula.y_vars.len();
    if nx + ny > BRUTE_VAR_CAP {
        return Err(Error::CapExceeded {
            count: nx + ny,
            cap: BRUTE_VAR_CAP,
        });
    }
    for xb in 0u32..(1 << nx) {
        let mut refuted = true;
        for yb in 0u32..(1 << ny) {
            let mut t = BTreeSet::new();
            for (i, v) in formula.x_vars.iter().enumerate() {
                if xb >> i & 1 == 1 {
                    t.insert(v.as_str());
                }
            }
            for (i, v) in formula.y_vars.iter().enumerate() {
                if yb >> i & 1 == 1 {
                    t.insert(v.as_str());
                }
            }
            if formula.is_satisfied(&t) {
                refuted = false;
                break;
            }
        }
        if refuted {
            return Ok(true);
        }
    }
    Ok(false)
}

/// The encoded instance and its decision threshold.
#[derive(Debug, Clone)]
pub struct SatReduction {
    pub instance: Instance,
    pub target: Weight,
    pub formula: TwoTwoSatFormula,
}

pub fn var_label(z: &str, sense: char, i: usize) -> String {
    format!("{z}_{sense}_{i}")
}

pub fn gamma_label(z: &str, sense: char, i: usize) -> String {
    format!("gamma_{z}_{sense}_{i}")
}

pub fn delta_label(clause: usize) -> String {
    format!("delta_c{clause}")
}

/// Builds the encoding. Clause labels are 1-based (`delta_c1`, `c1_g1`, `c1_b1`, ...).
pub fn build_sat_reduction(formula: &TwoTwoSatFormula) -> Result<SatReduction> {
    formula.validate()?;
    let mut b = InstanceBuilder::new(3, 0);
    let green = b.agent("green");
    let blue = b.agent("blue");

    let gadget = |b: &mut InstanceBuilder, z: &str, core: crate::model::AgentId| {
        b.labeled_pair(core, format!("{z}0"));
        for s in ['t', 'f'] {
            for i in 1..=2 {
                b.labeled_pair(core, var_label(z, s, i));
            }
        }
        for s in ['t', 'f'] {
            for i in 1..=2 {
                b.labeled_pair(blue, gamma_label(z, s, i));
            }
        }
        for i in 1..=2 {
            b.labeled_pair(blue, format!("alpha_{z}_{i}"));
        }
        for s in ['t', 'f'] {
            let (z0, z1, z2) = (format!("{z}0"), var_label(z, s, 1), var_label(z, s, 2));
            b.arc_by_label(&z0, &z1).arc_by_label(&z1, &z2).arc_by_label(&z2, &z0);
            for i in 1..=2 {
                let (zi, a, g) = (var_label(z, s, i), format!("alpha_{z}_{i}"), gamma_label(z, s, i));
                b.arc_by_label(&zi, &a).arc_by_label(&a, &g).arc_by_label(&g, &zi);
            }
        }
    };
    for z in &formula.x_vars {
        gadget(&mut b, z, green);
    }
    for z in &formula.y_vars {
        gadget(&mut b, z, blue);
    }
    for c in 1..=formula.clauses.len() {
        let g: Vec<String> = (1..=3).map(|i| format!("c{c}_g{i}")).collect();
        let bl: Vec<String> = (1..=4).map(|i| format!("c{c}_b{i}")).collect();
        for l in &g {
            b.labeled_pair(green, l.clone());
        }
        b.labeled_pair(blue, delta_label(c));
        for l in &bl {
            b.labeled_pair(blue, l.clone());
        }
        let d = delta_label(c);
        b.arc_by_label(&g[0], &g[1]).arc_by_label(&g[1], &g[2]).arc_by_label(&g[2], &g[0]);
        b.arc_by_label(&d, &g[0]).arc_by_label(&g[0], &d);
        b.arc_by_label(&g[1], &bl[0]).arc_by_label(&bl[0], &bl[1]).arc_by_label(&bl[1], &g[1]);
        b.arc_by_label(&g[2], &bl[2]).arc_by_label(&bl[2], &bl[3]).arc_by_label(&bl[3], &g[2]);
    }
    for z in formula.x_vars.iter().chain(&formula.y_vars) {
        for negated in [false, true] {
            let sense = if negated { 'f' } else { 't' };
            for i in 1..=2 {
                let c = formula.occurrence(z, negated, i - 1) + 1;
                let (g, d) = (gamma_label(z, sense, i), delta_label(c));
                b.arc_by_label(&g, &d).arc_by_label(&d, &g);
            }
        }
    }
    let instance = b.build()?;
    let t = 9 * formula.x_vars.len() + 9 * formula.y_vars.len() + 5 * formula.clauses.len() + 3;
    Ok(SatReduction {
        instance,
        target: Weight::from_int(t as i64),
        formula: formula.clone(),
    })
}

impl SatReduction {
    /// Truth value encoded by a variable gadget's packing, if consistent.
    pub fn gadget_setting(&self, market: &Market, sol: &Solution, z: &str) -> Option<bool> {
        let find = |ls: [String; 3]| {
            let refs: Vec<&str> = ls.iter().map(String::as_str).collect();
            canonical_find(market, &refs)
        };
        for (value, s, other) in [(true, 't', 'f'), (false, 'f', 't')] {
            let tri = find([format!("{z}0"), var_label(z, s, 1), var_label(z, s, 2)]);
            let side: Vec<_> = (1..=2)
                .map(|i| find([var_label(z, other, i), format!("alpha_{z}_{i}"), gamma_label(z, other, i)]))
                .collect();
            let all = std::iter::once(tri).chain(side);
            if all.into_iter().all(|id| id.is_some_and(|id| sol.contains(id))) {
                return Some(value);
            }
        }
        None
    }

    /// Whether clause `c` (1-based) is packed as the green triangle (`Some(true)`),
    /// as the three-exchange unsatisfied packing (`Some(false)`), or otherwise.
    pub fn clause_packing(&self, market: &Market, sol: &Solution, c: usize) -> Option<bool> {
        let g: Vec<String> = (1..=3).map(|i| format!("c{c}_g{i}")).collect();
        let b: Vec<String> = (1..=4).map(|i| format!("c{c}_b{i}")).collect();
        let d = delta_label(c);
        let tri = canonical_find(market, &[&g[0], &g[1], &g[2]])?;
        let unsat = [
            canonical_find(market, &[&d, &g[0]])?,
            canonical_find(market, &[&g[1], &b[0], &b[1]])?,
            canonical_find(market, &[&g[2], &b[2], &b[3]])?,
        ];
        let green: BTreeSet<VertexId> = g
            .iter()
            .map(|l| market.instance().vertex_by_label(l).expect("gadget label"))
            .collect();
        let touching: BTreeSet<_> = sol
            .exchanges
            .iter()
            .copied()
            .filter(|&id| market.exchange(id).vertices.iter().any(|v| green.contains(v)))
            .collect();
        if touching == BTreeSet::from([tri]) {
            Some(true)
        } else if touching == BTreeSet::from(unsat) {
            Some(false)
        } else {
            None
        }
    }
}

/// Finds the exchange through the labeled vertices in any rotation.
fn canonical_find(market: &Market, labels: &[&str]) -> Option<crate::model::ExchangeId> {
    let ids: Option<Vec<VertexId>> = labels
        .iter()
        .map(|l| market.instance().vertex_by_label(l))
        .collect();
    let mut ids = ids?;
    let k = ids
        .iter()
        .enumerate()
        .min_by_key(|(_, v)| **v)
        .map(|(i, _)| i)
        .unwrap_or(0);
    ids.rotate_left(k);
    market.find(&ids)
}

/// Random valid formula: every variable's four literal occurrences are
/// shuffled and cut into clauses of two or three literals.
pub fn random_two_two_formula(nx: usize, ny: usize, seed: u64) -> TwoTwoSatFormula {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x_vars: Vec<String> = (1..=nx).map(|i| format!("x{i}")).collect();
    let y_vars: Vec<String> = (1..=ny).map(|i| format!("y{i}")).collect();
    let mut occ = Vec::new();
    for v in x_vars.iter().chain(&y_vars) {
        occ.extend([Literal::pos(v), Literal::pos(v), Literal::neg(v), Literal::neg(v)]);
    }
    occ.shuffle(&mut rng);
    let mut clauses: Vec<Vec<Literal>> = Vec::new();
    let mut rest = occ.as_slice();
    while !rest.is_empty() {
        let size = if rest.len() == 1 {
            1
        } else {
            rng.random_range(2..=3).min(rest.len())
        };
        let (head, tail) = rest.split_at(size);
        if size == 1 && !clauses.is_empty() {
            let k = rng.random_range(0..clauses.len());
            clauses[k].extend_from_slice(head);
        } else {
            clauses.push(head.to_vec());
        }
        rest = tail;
    }
    TwoTwoSatFormula {
        x_vars,
        y_vars,
        clauses,
    }
}

/// The satisfiable-for-every-x example: `{(x∨y), (x∨¬y), (¬x∨y), (¬x∨¬y)}`.
pub fn yes_formula() -> TwoTwoSatFormula {
    two_var_formula([(false, false), (false, true), (true, false), (true, true)])
}

/// `{(x∨¬y), (x∨¬y), (¬x∨y), (¬x∨y)}`.
pub fn no_formula() -> TwoTwoSatFormula {
    two_var_formula([(false, true), (false, true), (true, false), (true, false)])
}

fn two_var_formula(signs: [(bool, bool); 4]) -> TwoTwoSatFormula {
    let lit = |v: &str, neg: bool| if neg { Literal::neg(v) } else { Literal::pos(v) };
    TwoTwoSatFormula {
        x_vars: vec!["x".into()],
        y_vars: vec!["y".into()],
        clauses: signs
            .iter()
            .map(|&(nx, ny)| vec![lit("x", nx), lit("y", ny)])
            .collect(),
    }
}
