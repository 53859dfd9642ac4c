//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use rpkep::experiment::{run_experiment, ExperimentSpec, Metric};
use rpkep::fixtures;
use rpkep::generate::{generate_density, generate_saidman_like, SaidmanConfig};
use rpkep::mechanisms::*;
use rpkep::oracle::{all_subset_constraints_hold, brute_force_max_rejection_proof};
use rpkep::reduction::*;
use rpkep::strategies::{play_withholding_game, solve_rkep, WithholdingProfile};
use rpkep::{Market, Weight};

type Outcome = Result<String, String>;

/// The oracle is exhaustive; instances here stay far below this many exchanges.
const ORACLE_CAP: usize = 100_000;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    };
}

/// 2–3 agents with 3–5 pairs, p ∈ {0.2, 0.4, 0.6}, K = 3, L ∈ {0, 1}.
fn density_instances() -> Vec<Market> {
    (0..300u64)
        .map(|seed| {
            let agents = 2 + (seed % 2) as usize;
            let pools: Vec<usize> = (0..agents)
                .map(|i| 3 + ((seed / 2 + i as u64) % 3) as usize)
                .collect();
            let p = [0.2, 0.4, 0.6][(seed / 6 % 3) as usize];
            let l = (seed / 18 % 2) as usize;
            Market::new(generate_density(&pools, p, l, 3, l, seed))
        })
        .collect()
}

fn saidman_instances(sizes: &[usize], seeds: std::ops::Range<u64>) -> Vec<Market> {
    let cfg = SaidmanConfig::default().with_pool_sizes(sizes.to_vec());
    seeds
        .map(|s| Market::new(generate_saidman_like(&cfg, s).expect("default config is valid")))
        .collect()
}

fn oracle_equivalence(density: &[Market]) -> Outcome {
    let mut small = 0;
    for (seed, m) in density.iter().enumerate() {
        let (sol, rep) = solve_maxrp(m, &MaxRpOptions::default()).map_err(|e| e.to_string())?;
        let (v, _) = brute_force_max_rejection_proof(m, ORACLE_CAP).map_err(|e| e.to_string())?;
        ensure!(v == sol.value, "seed {seed}: maxrp {} vs oracle {v}", sol.value);
        ensure!(rep.rejection_proof_certified, "seed {seed}: not certified");
        if m.instance().num_vertices() <= 10 {
            small += 1;
            ensure!(
                all_subset_constraints_hold(m, &sol).map_err(|e| e.to_string())?,
                "seed {seed}: a subset constraint fails"
            );
        }
    }
    Ok(format!("{} instances agree; all-subsets check on {small}", density.len()))
}

fn maxint_rejection_proof(density: &[Market], saidman: &[Market]) -> Outcome {
    for (i, m) in density.iter().chain(saidman).enumerate() {
        let (x, _) = solve_maxint(m).map_err(|e| e.to_string())?;
        let (ok, witness) = is_rejection_proof(m, &x).map_err(|e| e.to_string())?;
        ensure!(ok, "instance {i}: {witness:?}");
    }
    Ok(format!("{} instances", density.len() + saidman.len()))
}

fn sandwich(markets: &[&Market]) -> Outcome {
    for (i, m) in markets.iter().enumerate() {
        let social = solve_social_optimum(m).map_err(|e| e.to_string())?.value;
        let rp = solve_maxrp(m, &MaxRpOptions::default()).map_err(|e| e.to_string())?.0.value;
        let mi = solve_maxint(m).map_err(|e| e.to_string())?.0.value;
        ensure!(mi <= rp && rp <= social, "instance {i}: {mi} / {rp} / {social}");
        let all = WithholdingProfile::all_greedy(m).map_err(|e| e.to_string())?;
        let w = play_withholding_game(m, &all, Mechanism::Social)
            .map_err(|e| e.to_string())?
            .total_value();
        ensure!(w <= mi, "instance {i}: withholding {w} above maxint {mi}");
    }
    Ok(format!("{} instances", markets.len()))
}

fn red_blue_pool() -> Outcome {
    let start = Instant::now();
    let m = Market::new(fixtures::red_blue_pool());
    let n = |l: &[&str]| m.find_labeled(l).ok_or(format!("missing exchange {l:?}"));
    let social = solve_social_optimum(&m).map_err(|e| e.to_string())?;
    let rp = solve_maxrp(&m, &MaxRpOptions::default()).map_err(|e| e.to_string())?.0;
    let mi = solve_maxint(&m).map_err(|e| e.to_string())?.0;
    ensure!(social.value == Weight::from_int(6), "social {}", social.value);
    ensure!(rp.value == Weight::from_int(5), "maxrp {}", rp.value);
    ensure!(mi.value == Weight::from_int(5), "maxint {}", mi.value);

    let x = m
        .evaluate([n(&["a", "1", "2"])?, n(&["c", "3", "4"])?])
        .map_err(|e| e.to_string())?;
    let red = m.instance().agent_by_name("red").ok_or("no red agent")?;
    let (ok, witness) = is_rejection_proof(&m, &x).map_err(|e| e.to_string())?;
    ensure!(!ok, "X accepted");
    let w = witness.ok_or("no witness")?;
    ensure!(w.agent == red, "witness agent {}", w.agent);
    ensure!(
        w.strategy.internal_selected == BTreeSet::from([n(&["b", "c"])?])
            && w.strategy.kept_shared.is_empty(),
        "witness strategy {:?}",
        w.strategy
    );
    let (v, _) = solve_rkep(&m, &x, red).map_err(|e| e.to_string())?;
    ensure!(v == Weight::from_int(2), "red best response {v}");

    let cuts = separate_violations(&m, &x).map_err(|e| e.to_string())?;
    let label = |c: &SubsetRejectionConstraint| {
        c.subset.iter().map(|&v| m.instance().label(v)).collect::<BTreeSet<_>>()
    };
    ensure!(cuts.len() == 1, "{} cuts", cuts.len());
    let c = &cuts[0];
    ensure!(
        c.agent == red
            && label(c) == BTreeSet::from(["b".to_string(), "c".to_string()])
            && c.rhs == Weight::from_int(2),
        "cut {c:?}"
    );
    let elapsed = start.elapsed().as_secs_f64();
    ensure!(elapsed < 1.0, "took {elapsed:.2}s");
    Ok(format!("exact; {elapsed:.3}s"))
}

fn reduction() -> Outcome {
    let mut cases = vec![(yes_formula(), Some(true)), (no_formula(), Some(false))];
    for seed in 0..24u64 {
        let n = 1 + (seed % 2) as usize;
        cases.push((random_two_two_formula(n, n, seed), None));
    }
    let (mut yes, mut no) = (0, 0);
    for (i, (f, expected)) in cases.iter().enumerate() {
        let brute = adversarial_sat_brute(f).map_err(|e| e.to_string())?;
        if let Some(e) = expected {
            ensure!(brute == *e, "case {i}: brute says {brute}");
        }
        let r = build_sat_reduction(f).map_err(|e| e.to_string())?;
        if i < 2 {
            ensure!(r.target == Weight::from_int(41), "t = {}", r.target);
        }
        let m = Market::new(r.instance.clone());
        let (sol, _) = solve_maxrp(&m, &MaxRpOptions::default()).map_err(|e| e.to_string())?;
        let decided = sol.value >= r.target;
        ensure!(
            decided == brute,
            "case {i}: value {} vs t {} but brute says {brute}\n{}",
            sol.value,
            r.target,
            f.to_text()
        );
        if brute {
            yes += 1;
        } else {
            no += 1;
        }
    }
    Ok(format!("{} formulas decided correctly ({yes} YES, {no} NO)", cases.len()))
}

fn saidman_spec(metrics: &[Metric], seeds: std::ops::Range<u64>) -> ExperimentSpec {
    let spec = serde_json::json!({
        "label": "saidman 10x2",
        "instance_source": {"saidman": {"pool_sizes": [10, 10]}},
        "metrics": metrics,
        "seeds": seeds.collect::<Vec<_>>(),
    });
    ExperimentSpec::from_json(&spec.to_string(), None).expect("spec is valid")
}

fn pool_trend() -> Outcome {
    let spec = saidman_spec(
        &[Metric::MaxrpRatio, Metric::MaxintRatio, Metric::AllWithholdRatio],
        0..50,
    );
    let report = run_experiment(&spec).map_err(|e| e.to_string())?;
    let row = &report.rows[0];
    ensure!(row.instances_solved == 50, "{} solved", row.instances_solved);
    let get = |m| row.metrics.get(&m).copied().ok_or(format!("no {m:?}"));
    let (rp, mi, aw) = (
        get(Metric::MaxrpRatio)?,
        get(Metric::MaxintRatio)?,
        get(Metric::AllWithholdRatio)?,
    );
    ensure!(rp >= 0.95, "mean maxrp_ratio {rp:.4}");
    ensure!(rp >= mi && mi >= aw, "ordering {rp:.4} / {mi:.4} / {aw:.4}");
    Ok(format!("maxrp {rp:.4} ≥ maxint {mi:.4} ≥ all-withhold {aw:.4}"))
}

fn tiebreak_ablation() -> Outcome {
    let (mut on, mut off) = (0, 0);
    for (i, m) in saidman_instances(&[15, 15], 1000..1030).iter().enumerate() {
        let (a, ra) = solve_maxrp(m, &MaxRpOptions::default()).map_err(|e| e.to_string())?;
        let (b, rb) = solve_maxrp(m, &MaxRpOptions::default().with_tiebreak(Tiebreak::Off))
            .map_err(|e| e.to_string())?;
        ensure!(a.value == b.value, "instance {i}: {} vs {}", a.value, b.value);
        on += ra.iterations;
        off += rb.iterations;
    }
    ensure!(on <= off, "tiebreak on {on} iterations, off {off}");
    Ok(format!("30 instances (15x2): {on} iterations on vs {off} off, equal values"))
}

fn determinism() -> Outcome {
    let spec = saidman_spec(&Metric::ALL, 0..20);
    let a = run_experiment(&spec).map_err(|e| e.to_string())?;
    let b = run_experiment(&spec).map_err(|e| e.to_string())?;
    let (ca, cb) = (a.to_csv().map_err(|e| e.to_string())?, b.to_csv().map_err(|e| e.to_string())?);
    ensure!(ca == cb, "CSV differs:\n{ca}\n{cb}");
    ensure!(a.to_json() == b.to_json(), "JSON report differs");
    Ok(format!("{} bytes identical", ca.len()))
}

fn run(n: usize, name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let result = catch_unwind(AssertUnwindSafe(f))
        .unwrap_or_else(|p| Err(format!("panicked: {:?}", p.downcast_ref::<String>())));
    let secs = start.elapsed().as_secs_f64();
    match &result {
        Ok(msg) => println!("PASS {n} {name}: {msg} [{secs:.1}s]"),
        Err(msg) => println!("FAIL {n} {name}: {msg} [{secs:.1}s]"),
    }
    result.is_ok()
}

fn main() -> ExitCode {
    let density = density_instances();
    let saidman = saidman_instances(&[10, 10], 0..50);
    let all: Vec<&Market> = density.iter().chain(&saidman).collect();

    let results = [
        run(1, "oracle equivalence", || oracle_equivalence(&density)),
        run(2, "maxint is rejection-proof", || maxint_rejection_proof(&density, &saidman)),
        run(3, "sandwich", || sandwich(&all)),
        run(4, "red-blue counterexample", red_blue_pool),
        run(5, "sat reduction", reduction),
        run(6, "saidman 10x2 trend", pool_trend),
        run(7, "tiebreak ablation", tiebreak_ablation),
        run(8, "determinism", determinism),
    ];
    let passed = results.iter().filter(|&&ok| ok).count();
    println!("{passed}/{} criteria passed", results.len());
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
