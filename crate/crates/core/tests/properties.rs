//! Invariants of the mechanisms and strategy games on random small markets.

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rpkep::generate::generate_density;
use rpkep::mechanisms::*;
use rpkep::oracle::*;
use rpkep::strategies::*;
use rpkep::{AgentId, Market, Solution, Weight};

const CAP: usize = 100_000;

fn market(agents: usize, sizes: u64, p: f64, chain: bool, seed: u64) -> Market {
    let pools: Vec<usize> = (0..agents).map(|i| 2 + ((sizes >> (2 * i)) % 3) as usize).collect();
    let l = usize::from(chain);
    Market::new(generate_density(&pools, p, l, 3, l, seed))
}

fn arb_market() -> impl Strategy<Value = Market> {
    (2usize..=3, any::<u64>(), 0.15f64..0.65, any::<bool>(), any::<u64>())
        .prop_map(|(a, s, p, c, seed)| market(a, s, p, c, seed))
}

/// A random maximal packing: exchanges in shuffled order, kept when disjoint.
fn random_packing(m: &Market, seed: u64) -> Solution {
    let mut ids: Vec<_> = m.exchanges().iter().map(|e| e.id).collect();
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut used = BTreeSet::new();
    let mut chosen = Vec::new();
    for id in ids {
        let e = m.exchange(id);
        if e.vertices.iter().all(|v| !used.contains(v)) {
            used.extend(e.vertices.iter().copied());
            chosen.push(id);
        }
        if seed.is_multiple_of(3) && chosen.len() >= 2 {
            break;
        }
    }
    m.evaluate(chosen).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 96, ..ProptestConfig::default() })]

    #[test]
    fn sandwich_and_withholding_bound(m in arb_market()) {
        let social = solve_social_optimum(&m).unwrap();
        let (rp, _) = solve_maxrp(&m, &MaxRpOptions::default()).unwrap();
        let (mi, _) = solve_maxint(&m).unwrap();
        prop_assert!(mi.value <= rp.value);
        prop_assert!(rp.value <= social.value);
        let all = WithholdingProfile::all_greedy(&m).unwrap();
        let g = play_withholding_game(&m, &all, Mechanism::Social).unwrap();
        prop_assert!(g.total_value() <= mi.value);
    }

    #[test]
    fn maxint_is_rejection_proof(m in arb_market()) {
        let (mi, _) = solve_maxint(&m).unwrap();
        prop_assert!(is_rejection_proof(&m, &mi).unwrap().0);
        prop_assert!(brute_is_rejection_proof(&m, &mi, CAP).unwrap());
    }

    #[test]
    fn maxrp_matches_oracle(m in arb_market()) {
        let (rp, rep) = solve_maxrp(&m, &MaxRpOptions::default()).unwrap();
        prop_assert!(rep.rejection_proof_certified);
        prop_assert!(all_subset_constraints_hold(&m, &rp).unwrap());
        let (v, _) = brute_force_max_rejection_proof(&m, CAP).unwrap();
        prop_assert_eq!(v, rp.value);
    }

    /// Subset constraints hold exactly when no agent can profitably reject.
    #[test]
    fn subset_constraints_characterize_rejection_proofness(m in arb_market(), seed in any::<u64>()) {
        let x = random_packing(&m, seed);
        let by_definition = brute_is_rejection_proof(&m, &x, CAP).unwrap();
        prop_assert_eq!(all_subset_constraints_hold(&m, &x).unwrap(), by_definition);
        prop_assert_eq!(is_rejection_proof(&m, &x).unwrap().0, by_definition);
        prop_assert_eq!(separate_violations(&m, &x).unwrap().is_empty(), by_definition);
    }

    #[test]
    fn best_response_never_loses(m in arb_market(), seed in any::<u64>()) {
        let x = random_packing(&m, seed);
        for a in m.instance().agent_ids() {
            let (v, strategy) = solve_rkep(&m, &x, a).unwrap();
            prop_assert!(v >= x.agent_value(a));
            prop_assert_eq!(v, brute_rkep(&m, &x, a, CAP).unwrap());
            prop_assert!(strategy.kept_shared.iter().all(|e| x.contains(*e)));
        }
    }

    #[test]
    fn lone_responder_is_risk_free(m in arb_market(), seed in any::<u64>()) {
        let x = random_packing(&m, seed);
        for a in m.instance().agent_ids() {
            let g = respond_to_proposal(&m, &x, &BTreeSet::from([a])).unwrap();
            prop_assert!(g.per_agent_value[a.0] >= x.agent_value(a));
        }
    }

    #[test]
    fn rejection_proof_proposals_survive_everyone(m in arb_market()) {
        let everyone: BTreeSet<AgentId> = m.instance().agent_ids().collect();
        for mech in [Mechanism::MaxRp, Mechanism::MaxInt] {
            let (x, _) = run_mechanism(&m, mech).unwrap();
            let g = play_rejection_game(&m, mech, &everyone).unwrap();
            prop_assert_eq!(&g.final_solution.exchanges, &x.exchanges);
        }
    }

    #[test]
    fn withholding_extremes(m in arb_market()) {
        let (x, _) = run_mechanism(&m, Mechanism::Social).unwrap();
        let g = play_withholding_game(&m, &WithholdingProfile::empty(), Mechanism::Social).unwrap();
        prop_assert_eq!(&g.final_solution.exchanges, &x.exchanges);

        let withheld: BTreeMap<_, _> = m
            .instance()
            .agent_ids()
            .map(|a| (a, m.agent_scope(a)))
            .collect();
        let everything = WithholdingProfile { withheld };
        let g = play_withholding_game(&m, &everything, Mechanism::MaxRp).unwrap();
        for a in m.instance().agent_ids() {
            prop_assert_eq!(g.per_agent_value[a.0], beta_full(&m, a).unwrap());
        }
    }

    /// The tiebreak never changes the social value of a master, and
    /// separation always returns fresh, violated cuts.
    #[test]
    fn row_generation_rounds_are_sound(m in arb_market()) {
        let mut g = RowGenerator::new(&m);
        for _ in 0..50 {
            let off = g.master(Tiebreak::Off).unwrap().solution;
            let lex = g.master(Tiebreak::Lexicographic).unwrap().solution;
            let weighted = g.master(Tiebreak::Weighted).unwrap().solution;
            prop_assert_eq!(off.value, lex.value);
            prop_assert_eq!(off.value, weighted.value);
            prop_assert_eq!(m.internal_value(&lex), m.internal_value(&weighted));
            prop_assert!(m.internal_value(&off) <= m.internal_value(&lex));
            let cuts = separate_violations(&m, &lex).unwrap();
            if cuts.is_empty() {
                return Ok(());
            }
            for c in cuts {
                prop_assert!(!c.is_satisfied_by(&m, &lex));
                prop_assert!(g.add(c));
            }
        }
        prop_assert!(false, "row generation did not converge in 50 rounds");
    }

    #[test]
    fn seeding_does_not_change_the_value(m in arb_market()) {
        let plain = solve_maxrp(&m, &MaxRpOptions::default()).unwrap().0;
        let seeded = solve_maxrp(&m, &MaxRpOptions::default().with_seed(SeedConstraints::FullPool)).unwrap().0;
        let off = solve_maxrp(&m, &MaxRpOptions::default().with_tiebreak(Tiebreak::Off)).unwrap().0;
        prop_assert_eq!(plain.value, seeded.value);
        prop_assert_eq!(plain.value, off.value);
    }
}

#[test]
fn greedy_withholding_covers_an_internal_optimum() {
    for seed in 0..40 {
        let m = market(3, seed * 7, 0.4, seed % 2 == 0, seed);
        for a in m.instance().agent_ids() {
            let w = greedy_withholding(&m, a).unwrap();
            assert!(w.is_subset(&m.agent_scope(a)));
            let inside = internal_optimum(&m, a, &w).unwrap();
            assert_eq!(inside.agent_value(a), beta_full(&m, a).unwrap());
        }
    }
}

#[test]
fn solvers_are_deterministic() {
    for seed in 0..20 {
        let m = market(3, seed, 0.5, true, seed);
        let a = solve_maxrp(&m, &MaxRpOptions::default()).unwrap().0;
        let b = solve_maxrp(&m, &MaxRpOptions::default()).unwrap().0;
        assert_eq!(a, b);
        let seq = Market::new(m.instance().clone()).with_execution(rpkep::Execution::Sequential);
        let c = solve_maxrp(&seq, &MaxRpOptions::default()).unwrap().0;
        assert_eq!(a.exchanges, c.exchanges);
        assert!(a.value >= Weight::ZERO);
    }
}
