use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use rpkep::experiment::{run_experiment, ExperimentSpec};
use rpkep::generate::{generate_density, generate_saidman_like, SaidmanConfig};
use rpkep::io::{read_instance, write_atomic, write_instance};
use rpkep::mechanisms::{
    is_rejection_proof, run_mechanism, solve_maxint, solve_maxrp, Mechanism, MaxRpOptions,
    RunReport, SeedConstraints, Tiebreak,
};
use rpkep::oracle::{
    all_subset_constraints_hold, brute_force_max_rejection_proof, brute_social_optimum,
};
use rpkep::reduction::{adversarial_sat_brute, build_sat_reduction, TwoTwoSatFormula};
use rpkep::strategies::{play_rejection_game, play_withholding_game, WithholdingProfile};
use rpkep::{AgentId, Instance, Market, Solution};

#[derive(Parser)]
#[command(name = "rpkep", version, about = "Rejection-proof kidney exchange mechanisms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write generated instance files.
    Generate(GenerateArgs),
    /// Run one mechanism and print the solution with its report.
    Solve(SolveArgs),
    /// Play the withholding or rejection game.
    Simulate(SimulateArgs),
    /// Run a batch described by a spec file and write CSV/JSON reports.
    Experiment(ExperimentArgs),
    /// Build the instance encoding a (2,2)-SAT formula.
    Reduce(ReduceArgs),
    /// Cross-check the solvers against exhaustive enumeration.
    Oracle(OracleArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Generator {
    Density,
    Saidman,
}

#[derive(clap::Args)]
struct GenerateArgs {
    #[arg(long, value_enum, default_value = "density")]
    generator: Generator,
    /// Pairs per agent, e.g. `10,10`.
    #[arg(long, value_delimiter = ',', required = true)]
    pools: Vec<usize>,
    #[arg(long, default_value_t = 0.3)]
    arc_prob: f64,
    #[arg(long, default_value_t = 0)]
    ndds: usize,
    #[arg(long, default_value_t = 3)]
    max_cycle: usize,
    #[arg(long, default_value_t = 0)]
    max_chain: usize,
    /// Saidman generator config (JSON); the shipped default otherwise.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of instances, using seeds `seed, seed+1, ...`.
    #[arg(long, default_value_t = 1)]
    count: u64,
    /// Output file, or directory when `count > 1`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum TiebreakArg {
    On,
    Off,
    Weighted,
}

impl From<TiebreakArg> for Tiebreak {
    fn from(t: TiebreakArg) -> Self {
        match t {
            TiebreakArg::On => Tiebreak::Lexicographic,
            TiebreakArg::Off => Tiebreak::Off,
            TiebreakArg::Weighted => Tiebreak::Weighted,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SeedArg {
    None,
    FullPool,
}

#[derive(Clone, Copy, ValueEnum)]
enum MechanismArg {
    Social,
    Maxint,
    Maxrp,
}

impl From<MechanismArg> for Mechanism {
    fn from(m: MechanismArg) -> Self {
        match m {
            MechanismArg::Social => Mechanism::Social,
            MechanismArg::Maxint => Mechanism::MaxInt,
            MechanismArg::Maxrp => Mechanism::MaxRp,
        }
    }
}

#[derive(clap::Args)]
struct SolveArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, value_enum)]
    mechanism: MechanismArg,
    #[arg(long, value_enum, default_value = "on")]
    tiebreak: TiebreakArg,
    #[arg(long, value_enum, default_value = "none")]
    seed_constraints: SeedArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum Game {
    Withhold,
    Reject,
}

#[derive(Clone, Copy, ValueEnum)]
enum Strategy {
    Greedy,
    Rkep,
}

#[derive(clap::Args)]
struct SimulateArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, value_enum)]
    game: Game,
    /// `greedy` withholding or `rkep` best response; must match the game.
    #[arg(long, value_enum)]
    strategy: Option<Strategy>,
    /// Agent names that deviate; every agent when omitted.
    #[arg(long, value_delimiter = ',')]
    responders: Option<Vec<String>>,
    #[arg(long, value_enum, default_value = "social")]
    mechanism: MechanismArg,
}

#[derive(clap::Args)]
struct ExperimentArgs {
    #[arg(long)]
    spec: PathBuf,
    /// CSV destination; printed to stdout when omitted.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// JSON report with per-instance and per-agent details.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(clap::Args)]
struct ReduceArgs {
    #[arg(long)]
    formula: PathBuf,
    /// Write the built instance here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Solve MaxRP on the built instance and report the decision.
    #[arg(long)]
    decide: bool,
    /// Also answer the formula by exhaustive search.
    #[arg(long)]
    brute: bool,
}

#[derive(clap::Args)]
struct OracleArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Largest number of exchanges the enumeration accepts.
    #[arg(long, default_value_t = rpkep::oracle::DEFAULT_CAP)]
    cap: usize,
}

/// Failure detected by the CLI itself rather than the library.
#[derive(Debug, thiserror::Error)]
#[error("{message}")]
struct UsageError {
    code: &'static str,
    message: String,
}

fn usage(code: &'static str, message: impl Into<String>) -> anyhow::Error {
    UsageError {
        code,
        message: message.into(),
    }
    .into()
}

fn error_code(err: &anyhow::Error) -> &'static str {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<rpkep::Error>() {
            return e.code();
        }
        if let Some(e) = cause.downcast_ref::<UsageError>() {
            return e.code;
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return "io";
        }
    }
    "error"
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let report = json!({"error": "usage", "message": e.to_string().trim_end()});
            eprintln!("{report}");
            return ExitCode::from(2);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let report = json!({"error": error_code(&e), "message": format!("{e:#}")});
            eprintln!("{report}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Generate(a) => generate(a),
        Command::Solve(a) => solve(a),
        Command::Simulate(a) => simulate(a),
        Command::Experiment(a) => experiment(a),
        Command::Reduce(a) => reduce(a),
        Command::Oracle(a) => oracle(a),
    }
}

fn print_json(v: &Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("json value serializes"));
}

fn load(path: &Path) -> Result<Market> {
    let inst = read_instance(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(Market::new(inst).with_deadline(time_limit_deadline()))
}

/// Honour `RPKEP_TIME_LIMIT_S` for single runs too.
fn time_limit_deadline() -> Option<std::time::Instant> {
    let secs: f64 = std::env::var(rpkep::experiment::TIME_LIMIT_ENV)
        .ok()?
        .trim()
        .parse()
        .ok()?;
    (secs.is_finite() && secs > 0.0)
        .then(|| std::time::Instant::now() + std::time::Duration::from_secs_f64(secs))
}

fn named_values(inst: &Instance, values: &[rpkep::Weight]) -> Value {
    inst.agent_ids()
        .map(|a| (inst.agent_name(a).to_string(), json!(values[a.0])))
        .collect::<serde_json::Map<_, _>>()
        .into()
}

fn solution_json(m: &Market, sol: &Solution) -> Value {
    json!({
        "value": sol.value,
        "agent_values": named_values(m.instance(), &sol.agent_values),
        "exchanges": m.describe(sol),
    })
}

fn generate(a: GenerateArgs) -> Result<()> {
    if a.count == 0 {
        bail!(usage("bad_count", "--count must be at least 1"));
    }
    let config = match (&a.generator, &a.config) {
        (Generator::Saidman, Some(p)) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Some(SaidmanConfig::from_json(&text)?)
        }
        (Generator::Saidman, None) => Some(SaidmanConfig::default()),
        (Generator::Density, Some(_)) => {
            bail!(usage("bad_flag", "--config only applies to the saidman generator"))
        }
        (Generator::Density, None) => None,
    };
    if a.count > 1 {
        std::fs::create_dir_all(&a.out)?;
    }
    let mut written = Vec::new();
    for seed in a.seed..a.seed + a.count {
        let inst = match &config {
            Some(c) => generate_saidman_like(&c.clone().with_pool_sizes(a.pools.clone()), seed)?,
            None => generate_density(&a.pools, a.arc_prob, a.ndds, a.max_cycle, a.max_chain, seed),
        };
        let path = if a.count > 1 {
            a.out.join(format!("seed-{seed}.json"))
        } else {
            a.out.clone()
        };
        write_instance(&inst, &path)?;
        written.push(json!({"seed": seed, "path": path, "vertices": inst.num_vertices()}));
    }
    print_json(&json!({ "written": written }));
    Ok(())
}

fn solve(a: SolveArgs) -> Result<()> {
    let m = load(&a.instance)?;
    let mechanism = Mechanism::from(a.mechanism);
    let (sol, report): (Solution, RunReport) = match mechanism {
        Mechanism::MaxRp => {
            let opts = MaxRpOptions::default()
                .with_tiebreak(a.tiebreak.into())
                .with_seed(match a.seed_constraints {
                    SeedArg::None => SeedConstraints::None,
                    SeedArg::FullPool => SeedConstraints::FullPool,
                });
            let start = std::time::Instant::now();
            let (sol, rep) = solve_maxrp(&m, &opts)?;
            let report = RunReport {
                mechanism,
                value: sol.value,
                agent_values: sol.agent_values.clone(),
                total_time: start.elapsed(),
                node_count: rep.node_count,
                rowgen: Some(rep),
            };
            (sol, report)
        }
        Mechanism::MaxInt => solve_maxint(&m)?,
        Mechanism::Social => run_mechanism(&m, mechanism)?,
    };
    let (certified, witness) = is_rejection_proof(&m, &sol)?;
    let mut out = solution_json(&m, &sol);
    out["mechanism"] = json!(mechanism);
    out["rejection_proof_certified"] = json!(certified);
    out["witness"] = json!(witness);
    out["report"] = serde_json::to_value(&report)?;
    print_json(&out);
    Ok(())
}

fn agents_by_name(inst: &Instance, names: &Option<Vec<String>>) -> Result<BTreeSet<AgentId>> {
    match names {
        None => Ok(inst.agent_ids().collect()),
        Some(names) => names
            .iter()
            .map(|n| {
                inst.agent_by_name(n)
                    .ok_or_else(|| usage("unknown_agent", format!("no agent named {n:?}")))
            })
            .collect(),
    }
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let m = load(&a.instance)?;
    let inst = m.instance();
    let responders = agents_by_name(inst, &a.responders)?;
    let mechanism = Mechanism::from(a.mechanism);
    let outcome = match (a.game, a.strategy) {
        (Game::Withhold, None | Some(Strategy::Greedy)) => {
            let profile = WithholdingProfile::greedy(&m, responders.iter().copied())?;
            play_withholding_game(&m, &profile, mechanism)?
        }
        (Game::Reject, None | Some(Strategy::Rkep)) => play_rejection_game(&m, mechanism, &responders)?,
        (Game::Withhold, Some(Strategy::Rkep)) | (Game::Reject, Some(Strategy::Greedy)) => {
            bail!(usage(
                "bad_strategy",
                "withhold pairs with --strategy greedy, reject with --strategy rkep"
            ))
        }
    };
    let mut out = solution_json(&m, &outcome.final_solution);
    out["mechanism"] = json!(mechanism);
    out["responders"] = json!(responders.iter().map(|&r| inst.agent_name(r)).collect::<Vec<_>>());
    out["per_agent_value"] = named_values(inst, &outcome.per_agent_value);
    out["baseline_value"] = named_values(inst, &outcome.baseline_value);
    print_json(&out);
    Ok(())
}

fn experiment(a: ExperimentArgs) -> Result<()> {
    let spec = ExperimentSpec::from_path(&a.spec)
        .with_context(|| format!("loading spec {}", a.spec.display()))?;
    let report = run_experiment(&spec)?;
    let csv = report.to_csv()?;
    match &a.csv {
        Some(p) => write_atomic(p, csv.as_bytes())?,
        None => print!("{csv}"),
    }
    if let Some(p) = &a.json {
        write_atomic(p, report.to_json().as_bytes())?;
    }
    Ok(())
}

fn reduce(a: ReduceArgs) -> Result<()> {
    let text = std::fs::read_to_string(&a.formula)
        .with_context(|| format!("reading {}", a.formula.display()))?;
    let formula: TwoTwoSatFormula = text.parse()?;
    let red = build_sat_reduction(&formula)?;
    if let Some(p) = &a.out {
        write_instance(&red.instance, p)?;
    }
    let m = Market::new(red.instance.clone()).with_deadline(time_limit_deadline());
    let mut out = json!({
        "t": red.target,
        "vertices": red.instance.num_vertices(),
        "exchanges": m.exchanges().len(),
        "clauses": formula.clauses.len(),
    });
    if a.decide {
        let (sol, rep) = solve_maxrp(&m, &MaxRpOptions::default())?;
        let yes = sol.value >= red.target;
        out["value"] = json!(sol.value);
        out["decision"] = json!(if yes { "YES" } else { "NO" });
        out["iterations"] = json!(rep.iterations);
    }
    if a.brute {
        out["brute_force"] = json!(if adversarial_sat_brute(&formula)? { "YES" } else { "NO" });
    }
    print_json(&out);
    Ok(())
}

fn oracle(a: OracleArgs) -> Result<()> {
    let m = load(&a.instance)?;
    let social_brute = brute_social_optimum(&m, a.cap)?;
    let (rp_brute, _) = brute_force_max_rejection_proof(&m, a.cap)?;
    let (sol, _) = solve_maxrp(&m, &MaxRpOptions::default())?;
    let social = run_mechanism(&m, Mechanism::Social)?.0;
    let all_subsets = all_subset_constraints_hold(&m, &sol).ok();
    let agree = rp_brute == sol.value && social_brute == social.value;
    print_json(&json!({
        "social_brute_force": social_brute,
        "social_engine": social.value,
        "maxrp_brute_force": rp_brute,
        "maxrp_engine": sol.value,
        "all_subset_constraints_hold": all_subsets,
        "agree": agree,
    }));
    if !agree {
        bail!(usage("oracle_mismatch", "engine and enumeration disagree"));
    }
    Ok(())
}
