//! Exhaustive reference computations for small instances.
//!
//! Nothing here uses the branch-and-bound engine: packings are enumerated
//! with vertex bitmasks, so these functions can cross-check the solvers.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::market::{Market, Solution};
use crate::model::{AgentId, ExchangeId, VertexId, VertexKind};
use crate::weight::Weight;

/// Default limit on the number of scoped exchanges.
pub const DEFAULT_CAP: usize = 20;

const MAX_VERTICES: usize = 64;

#[derive(Clone)]
struct Item {
    id: ExchangeId,
    mask: u64,
    weight: Weight,
}

struct Ctx<'a> {
    market: &'a Market,
    items: Vec<Item>,
    /// Per agent: every packing of its internal exchanges as (mask, value).
    internal: Vec<Vec<(u64, Weight)>>,
}

fn mask_of(vs: &[VertexId]) -> u64 {
    vs.iter().fold(0, |m, v| m | 1 << v.0)
}

fn check_size(market: &Market, cap: usize) -> Result<()> {
    let count = market.scoped_exchanges().count();
    if count > cap {
        return Err(Error::CapExceeded { count, cap });
    }
    if market.instance().num_vertices() > MAX_VERTICES {
        return Err(Error::CapExceeded {
            count: market.instance().num_vertices(),
            cap: MAX_VERTICES,
        });
    }
    Ok(())
}

/// Calls `f(mask, value, chosen)` for every packing of `items` (including the empty one).
fn for_each_packing<F>(items: &[(u64, Weight)], f: &mut F)
where
    F: FnMut(u64, Weight, &[usize]),
{
    fn go<F: FnMut(u64, Weight, &[usize])>(
        items: &[(u64, Weight)],
        start: usize,
        mask: u64,
        value: Weight,
        chosen: &mut Vec<usize>,
        f: &mut F,
    ) {
        f(mask, value, chosen);
        for i in start..items.len() {
            let (m, w) = items[i];
            if mask & m == 0 {
                chosen.push(i);
                go(items, i + 1, mask | m, value + w, chosen, f);
                chosen.pop();
            }
        }
    }
    go(items, 0, 0, Weight::ZERO, &mut Vec::new(), f);
}

impl<'a> Ctx<'a> {
    fn new(market: &'a Market) -> Self {
        let inst = market.instance();
        let items: Vec<Item> = market
            .scoped_exchanges()
            .map(|e| Item {
                id: e.id,
                mask: mask_of(&e.vertices),
                weight: e.weight,
            })
            .collect();
        let internal = inst
            .agent_ids()
            .map(|a| {
                let own: Vec<(u64, Weight)> = market
                    .scoped_exchanges()
                    .filter(|e| e.is_internal_to(a))
                    .map(|e| (mask_of(&e.vertices), e.agent_weight(a)))
                    .collect();
                let mut out = Vec::new();
                for_each_packing(&own, &mut |m, w, _| out.push((m, w)));
                out
            })
            .collect();
        Ctx {
            market,
            items,
            internal,
        }
    }

    fn rkep(&self, x: &Solution, a: AgentId) -> Weight {
        let kept: Vec<(u64, Weight)> = x
            .exchanges
            .iter()
            .map(|&id| self.market.exchange(id))
            .filter(|e| e.is_shared() && e.touches_agent(a))
            .map(|e| (mask_of(&e.vertices), e.agent_weight(a)))
            .collect();
        self.internal[a.0]
            .iter()
            .map(|&(m, w)| {
                w + kept
                    .iter()
                    .filter(|(km, _)| km & m == 0)
                    .map(|(_, kw)| *kw)
                    .sum::<Weight>()
            })
            .max()
            .unwrap_or(Weight::ZERO)
    }

    fn is_rejection_proof(&self, x: &Solution) -> bool {
        self.market
            .instance()
            .agent_ids()
            .all(|a| self.rkep(x, a) <= x.agent_value(a))
    }
}

/// Best-response value of `agent` to `x`, by enumerating its internal packings.
pub fn brute_rkep(market: &Market, x: &Solution, agent: AgentId, cap: usize) -> Result<Weight> {
    check_size(market, cap)?;
    Ok(Ctx::new(market).rkep(x, agent))
}

/// `β(U)`: best internal packing of `agent` inside `subset`.
pub fn brute_beta(market: &Market, agent: AgentId, subset: &BTreeSet<VertexId>) -> Result<Weight> {
    if market.instance().num_vertices() > MAX_VERTICES {
        return Err(Error::CapExceeded {
            count: market.instance().num_vertices(),
            cap: MAX_VERTICES,
        });
    }
    let allowed = subset.iter().fold(0u64, |m, v| m | 1 << v.0);
    let own: Vec<(u64, Weight)> = market
        .scoped_exchanges()
        .filter(|e| e.is_internal_to(agent))
        .map(|e| (mask_of(&e.vertices), e.agent_weight(agent)))
        .filter(|(m, _)| m & !allowed == 0)
        .collect();
    let mut best = Weight::ZERO;
    for_each_packing(&own, &mut |_, w, _| best = best.max(w));
    Ok(best)
}

/// Rejection-proofness by definition: no agent's best response beats its proposed value.
pub fn brute_is_rejection_proof(market: &Market, x: &Solution, cap: usize) -> Result<bool> {
    check_size(market, cap)?;
    Ok(Ctx::new(market).is_rejection_proof(x))
}

/// Checks every subset rejection constraint of every agent (all `2^|Vᵃ|` subsets).
pub fn all_subset_constraints_hold(market: &Market, x: &Solution) -> Result<bool> {
    for a in market.instance().agent_ids() {
        let own: Vec<VertexId> = market.agent_scope(a).into_iter().collect();
        if own.len() > 20 {
            return Err(Error::CapExceeded {
                count: own.len(),
                cap: 20,
            });
        }
        for bits in 0u32..(1 << own.len()) {
            let subset: BTreeSet<VertexId> = own
                .iter()
                .enumerate()
                .filter(|(i, _)| bits >> i & 1 == 1)
                .map(|(_, v)| *v)
                .collect();
            let lhs: Weight = x
                .exchanges
                .iter()
                .map(|&id| market.exchange(id))
                .filter(|e| e.vertices.iter().any(|v| subset.contains(v)))
                .map(|e| e.agent_weight(a))
                .sum();
            if lhs < brute_beta(market, a, &subset)? {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Maximum social value over all packings (no rejection constraint).
pub fn brute_social_optimum(market: &Market, cap: usize) -> Result<Weight> {
    check_size(market, cap)?;
    let ctx = Ctx::new(market);
    let items: Vec<(u64, Weight)> = ctx.items.iter().map(|i| (i.mask, i.weight)).collect();
    let mut best = Weight::ZERO;
    for_each_packing(&items, &mut |_, w, _| best = best.max(w));
    Ok(best)
}

/// Maximum-value rejection-proof solution by exhaustive search.
///
/// Candidate values are visited in decreasing order; for each value every
/// packing attaining it is tested against the definition, so the first hit is
/// optimal.
pub fn brute_force_max_rejection_proof(market: &Market, cap: usize) -> Result<(Weight, Solution)> {
    check_size(market, cap)?;
    let ctx = Ctx::new(market);
    let items: Vec<(u64, Weight)> = ctx.items.iter().map(|i| (i.mask, i.weight)).collect();

    // Pair vertices' social weights bound what the unused vertices can still add.
    let inst = market.instance();
    let vertex_gain: Vec<Weight> = inst
        .vertices()
        .iter()
        .map(|v| {
            if v.kind == VertexKind::Pair && market.in_scope(v.id) {
                v.social_weight
            } else {
                Weight::ZERO
            }
        })
        .collect();

    let mut values = BTreeSet::new();
    for_each_packing(&items, &mut |_, w, _| {
        values.insert(w);
    });

    for &target in values.iter().rev() {
        let mut found: Option<Vec<usize>> = None;
        search_value(&ctx, &items, &vertex_gain, target, &mut found);
        if let Some(chosen) = found {
            let sol = market.evaluate(chosen.iter().map(|&i| ctx.items[i].id))?;
            return Ok((target, sol));
        }
    }
    Err(Error::Internal("the empty solution is always rejection-proof".into()))
}

fn search_value(
    ctx: &Ctx<'_>,
    items: &[(u64, Weight)],
    vertex_gain: &[Weight],
    target: Weight,
    found: &mut Option<Vec<usize>>,
) {
    #[allow(clippy::too_many_arguments)]
    fn go(
        ctx: &Ctx<'_>,
        items: &[(u64, Weight)],
        gain: &[Weight],
        target: Weight,
        start: usize,
        mask: u64,
        value: Weight,
        chosen: &mut Vec<usize>,
        found: &mut Option<Vec<usize>>,
    ) {
        if found.is_some() {
            return;
        }
        if value == target {
            let sol = ctx
                .market
                .evaluate(chosen.iter().map(|&i| ctx.items[i].id))
                .expect("packing is disjoint");
            if ctx.is_rejection_proof(&sol) {
                *found = Some(chosen.clone());
                return;
            }
        }
        let headroom: Weight = (0..gain.len())
            .filter(|v| mask >> v & 1 == 0)
            .map(|v| gain[v])
            .sum();
        if value + headroom < target {
            return;
        }
        for i in start..items.len() {
            let (m, w) = items[i];
            if mask & m == 0 && value + w <= target {
                chosen.push(i);
                go(ctx, items, gain, target, i + 1, mask | m, value + w, chosen, found);
                chosen.pop();
                if found.is_some() {
                    return;
                }
            }
        }
    }
    go(ctx, items, vertex_gain, target, 0, 0, Weight::ZERO, &mut Vec::new(), found);
}

/// Number of shared exchanges in `x`.
pub fn shared_count(market: &Market, x: &Solution) -> usize {
    x.exchanges
        .iter()
        .filter(|&&id| market.exchange(id).is_shared())
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn red_blue_pool_oracle() {
        let m = Market::new(fixtures::red_blue_pool());
        let (v, sol) = brute_force_max_rejection_proof(&m, DEFAULT_CAP).unwrap();
        assert_eq!(v, Weight::from_int(5));
        assert!(sol.contains(m.find_labeled(&["b", "c"]).unwrap()));
        assert_eq!(brute_social_optimum(&m, DEFAULT_CAP).unwrap(), Weight::from_int(6));
        assert!(all_subset_constraints_hold(&m, &sol).unwrap());
    }

    #[test]
    fn trivial_oracles() {
        let mut b = crate::model::InstanceBuilder::new(3, 0);
        let a = b.agent("a");
        b.pair(a);
        let m = Market::new(b.build().unwrap());
        assert_eq!(brute_force_max_rejection_proof(&m, DEFAULT_CAP).unwrap().0, Weight::ZERO);

        let one = Market::new(fixtures::single_agent_chain_pool());
        assert_eq!(
            brute_force_max_rejection_proof(&one, DEFAULT_CAP).unwrap().0,
            brute_social_optimum(&one, DEFAULT_CAP).unwrap()
        );
    }

    #[test]
    fn cap_is_enforced() {
        let m = Market::new(fixtures::single_agent_chain_pool());
        assert!(matches!(
            brute_force_max_rejection_proof(&m, 3),
            Err(Error::CapExceeded { count: 7, cap: 3 })
        ));
    }

    #[test]
    fn rkep_and_beta() {
        let m = Market::new(fixtures::red_blue_pool());
        let red = m.instance().agent_by_name("red").unwrap();
        let x = m
            .evaluate([
                m.find_labeled(&["a", "1", "2"]).unwrap(),
                m.find_labeled(&["c", "3", "4"]).unwrap(),
            ])
            .unwrap();
        assert_eq!(brute_rkep(&m, &x, red, DEFAULT_CAP).unwrap(), Weight::from_int(2));
        assert!(!brute_is_rejection_proof(&m, &x, DEFAULT_CAP).unwrap());
        assert!(!all_subset_constraints_hold(&m, &x).unwrap());
        assert_eq!(shared_count(&m, &x), 1);
        let all = m.agent_scope(red);
        assert_eq!(brute_beta(&m, red, &all).unwrap(), Weight::from_int(2));
    }
}
