//! Batch experiments: run mechanisms and strategy games over a set of
//! instances and aggregate the ratios into report rows.
//!
//! Every instance runs its pipeline sequentially; instances are spread over
//! threads and collected back in input order, so reports only depend on the
//! spec. Wall-clock columns are the exception and are left empty unless
//! `record_timings` is set.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generate::{generate_density, generate_saidman_like, SaidmanConfig};
use crate::io::read_instance;
use crate::market::Market;
use crate::mechanisms::{run_mechanism, solve_maxint, solve_maxrp, Mechanism, MaxRpOptions};
use crate::mechanisms::{SeedConstraints, Tiebreak};
use crate::model::{AgentId, Instance};
use crate::par::{self, Execution};
use crate::strategies::{play_withholding_game_against, respond_to_proposal, WithholdingProfile};
use crate::weight::Weight;

/// Per-instance time limit when neither the spec nor the environment sets one.
pub const DEFAULT_TIME_LIMIT_S: f64 = 600.0;
pub const TIME_LIMIT_ENV: &str = "RPKEP_TIME_LIMIT_S";

/// Column order of the CSV report.
pub const CSV_COLUMNS: [&str; 13] = [
    "instance_set",
    "WA",
    "RA",
    "WT",
    "RT",
    "maxrp_ratio",
    "maxint_ratio",
    "all_withhold_ratio",
    "iterations",
    "constraints_added",
    "total_time_s",
    "master_time_s",
    "instances_solved",
];

const TIE_BREAK_NOTE: &str = "baselines use the engine's deterministic optimum; \
ratios depend on that tie-break when the optimum is not unique";

const AGENT_DRAW_SALT: u64 = 0x5eed_a9e7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Metric {
    WA,
    RA,
    WT,
    RT,
    #[serde(rename = "maxrp_ratio")]
    MaxrpRatio,
    #[serde(rename = "maxint_ratio")]
    MaxintRatio,
    #[serde(rename = "all_withhold_ratio")]
    AllWithholdRatio,
    #[serde(rename = "WA_under_mechanism")]
    WaUnderMechanism,
}

impl Metric {
    pub const ALL: [Metric; 8] = [
        Metric::WA,
        Metric::RA,
        Metric::WT,
        Metric::RT,
        Metric::MaxrpRatio,
        Metric::MaxintRatio,
        Metric::AllWithholdRatio,
        Metric::WaUnderMechanism,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::WA => "WA",
            Metric::RA => "RA",
            Metric::WT => "WT",
            Metric::RT => "RT",
            Metric::MaxrpRatio => "maxrp_ratio",
            Metric::MaxintRatio => "maxint_ratio",
            Metric::AllWithholdRatio => "all_withhold_ratio",
            Metric::WaUnderMechanism => "WA_under_mechanism",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityParams {
    pub pool_sizes: Vec<usize>,
    pub arc_prob: f64,
    #[serde(default)]
    pub ndds_per_agent: usize,
    #[serde(default = "default_k")]
    pub max_cycle_len: usize,
    #[serde(default)]
    pub max_chain_len: usize,
}

fn default_k() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SaidmanParams {
    pub pool_sizes: Vec<usize>,
    /// Full generator config; the shipped default when absent.
    #[serde(default)]
    pub config: Option<SaidmanConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InstanceSource {
    /// Instance files; relative paths are resolved against the spec's directory.
    Files(Vec<PathBuf>),
    Density(DensityParams),
    Saidman(SaidmanParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default)]
    pub label: Option<String>,
    #[serde(default)]
    pub instance_source: Option<InstanceSource>,
    #[serde(default = "one")]
    pub replications: usize,
    #[serde(default = "all_mechanisms")]
    pub mechanisms: Vec<Mechanism>,
    #[serde(default)]
    pub metrics: Vec<Metric>,
    #[serde(default = "zero_seed")]
    pub seeds: Vec<u64>,
    /// Worker threads; 0 uses every core.
    #[serde(default)]
    pub parallelism: usize,
    #[serde(default)]
    pub record_timings: bool,
    #[serde(default)]
    pub time_limit_s: Option<f64>,
    #[serde(default = "default_tiebreak")]
    pub tiebreak: Tiebreak,
    #[serde(default = "default_seeding")]
    pub seed_constraints: SeedConstraints,
}

fn one() -> usize {
    1
}

fn all_mechanisms() -> Vec<Mechanism> {
    vec![Mechanism::Social, Mechanism::MaxInt, Mechanism::MaxRp]
}

fn zero_seed() -> Vec<u64> {
    vec![0]
}

fn default_tiebreak() -> Tiebreak {
    Tiebreak::Lexicographic
}

fn default_seeding() -> SeedConstraints {
    SeedConstraints::None
}

fn spec_error(code: &'static str, message: impl Into<String>) -> Error {
    Error::Spec {
        code,
        message: message.into(),
    }
}

impl ExperimentSpec {
    /// Parses and validates a spec; `base` anchors relative instance paths.
    pub fn from_json(text: &str, base: Option<&Path>) -> Result<Self> {
        let mut spec: ExperimentSpec = serde_json::from_str(text)
            .map_err(|e| spec_error("invalid_spec", e.to_string()))?;
        spec.validate()?;
        if let (Some(base), Some(InstanceSource::Files(files))) = (base, &mut spec.instance_source) {
            for f in files.iter_mut() {
                if f.is_relative() {
                    *f = base.join(&*f);
                }
            }
        }
        Ok(spec)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text, path.parent())
    }

    pub fn validate(&self) -> Result<()> {
        if self.metrics.is_empty() {
            return Err(spec_error("empty_metrics", "at least one metric is required"));
        }
        if self.replications == 0 {
            return Err(spec_error("bad_replications", "replications must be at least 1"));
        }
        if self.seeds.is_empty() {
            return Err(spec_error("empty_seeds", "at least one seed is required"));
        }
        if let Some(t) = self.time_limit_s {
            if !(t.is_finite() && t > 0.0) {
                return Err(spec_error("bad_time_limit", "time_limit_s must be positive"));
            }
        }
        match &self.instance_source {
            None => Err(spec_error("missing_source", "instance_source is required")),
            Some(InstanceSource::Files(f)) if f.is_empty() => {
                Err(spec_error("missing_source", "no instance files listed"))
            }
            Some(InstanceSource::Density(d)) if !(0.0..=1.0).contains(&d.arc_prob) => {
                Err(spec_error("bad_generator", "arc_prob must lie in [0, 1]"))
            }
            Some(InstanceSource::Saidman(s)) => match &s.config {
                Some(c) => c.validate(),
                None => Ok(()),
            },
            Some(_) => Ok(()),
        }
    }

    /// Label of the report row.
    pub fn instance_set(&self) -> String {
        if let Some(l) = &self.label {
            return l.clone();
        }
        let shape = |sizes: &[usize]| match sizes.first() {
            Some(&n) if sizes.iter().all(|&s| s == n) => format!("{n}x{}", sizes.len()),
            _ => sizes.iter().map(usize::to_string).collect::<Vec<_>>().join("+"),
        };
        match &self.instance_source {
            Some(InstanceSource::Density(d)) => format!("density {}", shape(&d.pool_sizes)),
            Some(InstanceSource::Saidman(s)) => format!("saidman {}", shape(&s.pool_sizes)),
            Some(InstanceSource::Files(f)) => format!("files ({})", f.len()),
            None => String::new(),
        }
    }

    /// Limit per instance: the environment overrides the spec, which overrides the default.
    pub fn time_limit(&self) -> Duration {
        let from_env = std::env::var(TIME_LIMIT_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<f64>().ok())
            .filter(|t| t.is_finite() && *t > 0.0);
        Duration::from_secs_f64(from_env.or(self.time_limit_s).unwrap_or(DEFAULT_TIME_LIMIT_S))
    }

    fn wants(&self, m: Metric) -> bool {
        self.metrics.contains(&m)
    }

    fn maxrp_options(&self) -> MaxRpOptions {
        MaxRpOptions::default()
            .with_tiebreak(self.tiebreak)
            .with_seed(self.seed_constraints)
    }

    /// The (id, seed) list of instances this spec describes.
    pub fn jobs(&self) -> Vec<Job> {
        match &self.instance_source {
            Some(InstanceSource::Files(files)) => files
                .iter()
                .enumerate()
                .map(|(i, f)| Job {
                    id: f.display().to_string(),
                    seed: instance_seed(self.seeds[0], i as u64),
                    file: Some(f.clone()),
                })
                .collect(),
            Some(_) => self
                .seeds
                .iter()
                .flat_map(|&s| {
                    (0..self.replications as u64).map(move |r| Job {
                        id: format!("seed={s}/rep={r}"),
                        seed: instance_seed(s, r),
                        file: None,
                    })
                })
                .collect(),
            None => Vec::new(),
        }
    }

    pub fn build_instance(&self, job: &Job) -> Result<Instance> {
        match (&self.instance_source, &job.file) {
            (_, Some(path)) => read_instance(path),
            (Some(InstanceSource::Density(d)), None) => Ok(generate_density(
                &d.pool_sizes,
                d.arc_prob,
                d.ndds_per_agent,
                d.max_cycle_len,
                d.max_chain_len,
                job.seed,
            )),
            (Some(InstanceSource::Saidman(s)), None) => {
                let config = s.config.clone().unwrap_or_default();
                generate_saidman_like(&config.with_pool_sizes(s.pool_sizes.clone()), job.seed)
            }
            _ => Err(spec_error("missing_source", "instance_source is required")),
        }
    }
}

/// Replication 0 reuses the seed itself so single runs match `generate --seed`.
fn instance_seed(seed: u64, replication: u64) -> u64 {
    seed.wrapping_add(replication.wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Job {
    pub id: String,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgentBreakdown {
    pub agent: String,
    pub cooperative_value: Weight,
    pub withhold_value: Option<Weight>,
    pub reject_value: Option<Weight>,
    pub wa: Option<f64>,
    pub ra: Option<f64>,
}

/// Everything measured on one instance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstanceOutcome {
    pub id: String,
    pub seed: u64,
    pub solved: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    pub num_vertices: usize,
    pub num_exchanges: usize,
    /// The agent whose unilateral deviation is scored.
    pub drawn_agent: Option<String>,
    pub mechanism_values: BTreeMap<Mechanism, Weight>,
    pub ratios: BTreeMap<Metric, f64>,
    /// Metrics skipped because their baseline was zero.
    pub zero_baseline: Vec<Metric>,
    pub wa_under_mechanism: BTreeMap<Mechanism, f64>,
    pub ra_under_mechanism: BTreeMap<Mechanism, f64>,
    pub per_agent: Vec<AgentBreakdown>,
    pub iterations: Option<usize>,
    pub constraints_added: Option<usize>,
    pub total_time_s: f64,
    pub master_time_s: Option<f64>,
}

impl InstanceOutcome {
    fn failed(job: &Job, failure: String, elapsed: Duration) -> Self {
        InstanceOutcome {
            id: job.id.clone(),
            seed: job.seed,
            solved: false,
            failure: Some(failure),
            num_vertices: 0,
            num_exchanges: 0,
            drawn_agent: None,
            mechanism_values: BTreeMap::new(),
            ratios: BTreeMap::new(),
            zero_baseline: Vec::new(),
            wa_under_mechanism: BTreeMap::new(),
            ra_under_mechanism: BTreeMap::new(),
            per_agent: Vec::new(),
            iterations: None,
            constraints_added: None,
            total_time_s: elapsed.as_secs_f64(),
            master_time_s: None,
        }
    }
}

/// Aggregated row; metric means cover solved instances with a nonzero baseline.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub instance_set: String,
    pub metrics: BTreeMap<Metric, f64>,
    pub wa_under_mechanism: BTreeMap<Mechanism, f64>,
    pub ra_under_mechanism: BTreeMap<Mechanism, f64>,
    /// Per metric, solved instances left out because the baseline was zero.
    pub excluded: BTreeMap<Metric, usize>,
    pub iterations: Option<f64>,
    pub constraints_added: Option<f64>,
    pub total_time_s: Option<f64>,
    pub master_time_s: Option<f64>,
    pub instances_solved: usize,
    pub instances_total: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub spec: ExperimentSpec,
    pub tie_break_policy: &'static str,
    pub time_limit_s: f64,
    pub rows: Vec<ReportRow>,
    pub instances: Vec<InstanceOutcome>,
}

/// Runs every instance of the spec and aggregates one report row.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    let limit = spec.time_limit();
    let jobs = spec.jobs();
    let outcomes = par::with_threads(Execution::Parallel, spec.parallelism, || {
        par::map(Execution::Parallel, &jobs, |job| run_job(spec, job, limit))
    });
    let instances: Vec<InstanceOutcome> = outcomes.into_iter().collect::<Result<_>>()?;
    let row = compute_metrics(&spec.instance_set(), &instances, spec);
    Ok(ExperimentReport {
        spec: spec.clone(),
        tie_break_policy: TIE_BREAK_NOTE,
        time_limit_s: limit.as_secs_f64(),
        rows: vec![row],
        instances,
    })
}

/// Time limits and engine failures mark the instance unsolved; broken
/// invariants abort the batch.
fn run_job(spec: &ExperimentSpec, job: &Job, limit: Duration) -> Result<InstanceOutcome> {
    let start = Instant::now();
    let inst = match spec.build_instance(job) {
        Ok(i) => i,
        Err(e) => return Ok(InstanceOutcome::failed(job, e.code().to_string(), start.elapsed())),
    };
    let market = Market::new(inst)
        .with_execution(Execution::Sequential)
        .with_deadline(Some(start + limit));
    match evaluate_instance(spec, job, &market) {
        Ok(mut out) => {
            out.total_time_s = start.elapsed().as_secs_f64();
            Ok(out)
        }
        Err(e @ Error::Internal(_)) => Err(e),
        Err(e) => Ok(InstanceOutcome::failed(job, e.code().to_string(), start.elapsed())),
    }
}

fn ratio(num: Weight, den: Weight) -> Option<f64> {
    num.fraction_of(den)
}

fn evaluate_instance(spec: &ExperimentSpec, job: &Job, market: &Market) -> Result<InstanceOutcome> {
    let inst = market.instance();
    let agents: Vec<AgentId> = inst.agent_ids().collect();
    let drawn = (!agents.is_empty()).then(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(job.seed ^ AGENT_DRAW_SALT);
        agents[rng.random_range(0..agents.len())]
    });

    let mut mechanisms: BTreeSet<Mechanism> = spec.mechanisms.iter().copied().collect();
    mechanisms.insert(Mechanism::Social);
    if spec.wants(Metric::MaxrpRatio) {
        mechanisms.insert(Mechanism::MaxRp);
    }
    if spec.wants(Metric::MaxintRatio) {
        mechanisms.insert(Mechanism::MaxInt);
    }

    let mut out = InstanceOutcome::failed(job, String::new(), Duration::ZERO);
    out.solved = true;
    out.failure = None;
    out.num_vertices = inst.num_vertices();
    out.num_exchanges = market.exchanges().len();
    out.drawn_agent = drawn.map(|a| inst.agent_name(a).to_string());

    let mut picks = BTreeMap::new();
    for &mech in &mechanisms {
        let sol = match mech {
            Mechanism::MaxRp => {
                let (sol, rep) = solve_maxrp(market, &spec.maxrp_options())?;
                out.iterations = Some(rep.iterations);
                out.constraints_added = Some(rep.constraints_added);
                out.master_time_s = Some(rep.master_time.as_secs_f64());
                sol
            }
            Mechanism::MaxInt => solve_maxint(market)?.0,
            Mechanism::Social => run_mechanism(market, Mechanism::Social)?.0,
        };
        out.mechanism_values.insert(mech, sol.value);
        picks.insert(mech, sol);
    }
    let social = picks[&Mechanism::Social].clone();

    let record = |out: &mut InstanceOutcome, m: Metric, r: Option<f64>| match r {
        Some(r) => {
            out.ratios.insert(m, r);
        }
        None => out.zero_baseline.push(m),
    };

    let mut rp = None;
    let mut ip = None;
    if let Some(v) = out.mechanism_values.get(&Mechanism::MaxRp) {
        rp = ratio(*v, social.value);
        if spec.wants(Metric::MaxrpRatio) {
            record(&mut out, Metric::MaxrpRatio, rp);
        }
    }
    if let Some(v) = out.mechanism_values.get(&Mechanism::MaxInt) {
        ip = ratio(*v, social.value);
        if spec.wants(Metric::MaxintRatio) {
            record(&mut out, Metric::MaxintRatio, ip);
        }
    }
    check_sandwich(&out, rp, ip)?;

    if spec.wants(Metric::WT) || spec.wants(Metric::AllWithholdRatio) {
        let all = WithholdingProfile::all_greedy(market)?;
        let g = play_withholding_game_against(market, &all, Mechanism::Social, &social)?;
        let r = ratio(g.total_value(), social.value);
        for m in [Metric::WT, Metric::AllWithholdRatio] {
            if spec.wants(m) {
                record(&mut out, m, r);
            }
        }
    }
    if spec.wants(Metric::RT) {
        let everyone: BTreeSet<AgentId> = agents.iter().copied().collect();
        let g = respond_to_proposal(market, &social, &everyone)?;
        record(&mut out, Metric::RT, ratio(g.total_value(), social.value));
    }

    if spec.wants(Metric::WA) || spec.wants(Metric::RA) {
        for &a in &agents {
            let base = social.agent_value(a);
            let withhold_value = if spec.wants(Metric::WA) {
                let profile = WithholdingProfile::greedy(market, [a])?;
                let g = play_withholding_game_against(market, &profile, Mechanism::Social, &social)?;
                Some(g.per_agent_value[a.0])
            } else {
                None
            };
            let reject_value = if spec.wants(Metric::RA) {
                let g = respond_to_proposal(market, &social, &BTreeSet::from([a]))?;
                Some(g.per_agent_value[a.0])
            } else {
                None
            };
            out.per_agent.push(AgentBreakdown {
                agent: inst.agent_name(a).to_string(),
                cooperative_value: base,
                withhold_value,
                reject_value,
                wa: withhold_value.and_then(|v| ratio(v, base)),
                ra: reject_value.and_then(|v| ratio(v, base)),
            });
        }
        if let Some(a) = drawn {
            let row = &out.per_agent[a.0];
            let (wa, ra) = (row.wa, row.ra);
            if spec.wants(Metric::WA) {
                record(&mut out, Metric::WA, wa);
            }
            if spec.wants(Metric::RA) {
                record(&mut out, Metric::RA, ra);
            }
        }
    }

    if spec.wants(Metric::WaUnderMechanism) {
        if let Some(a) = drawn {
            for &mech in &spec.mechanisms {
                let base = &picks[&mech];
                let profile = WithholdingProfile::greedy(market, [a])?;
                let g = play_withholding_game_against(market, &profile, mech, base)?;
                if let Some(r) = ratio(g.per_agent_value[a.0], base.agent_value(a)) {
                    out.wa_under_mechanism.insert(mech, r);
                }
                let g = respond_to_proposal(market, base, &BTreeSet::from([a]))?;
                if let Some(r) = ratio(g.per_agent_value[a.0], base.agent_value(a)) {
                    if mech != Mechanism::Social && r != 1.0 {
                        return Err(Error::Internal(format!(
                            "agent {} gains by rejecting a {mech} proposal",
                            inst.agent_name(a)
                        )));
                    }
                    out.ra_under_mechanism.insert(mech, r);
                }
            }
        }
    }
    Ok(out)
}

/// `maxint ≤ maxrp ≤ social`, surfaced per instance.
fn check_sandwich(out: &InstanceOutcome, rp: Option<f64>, ip: Option<f64>) -> Result<()> {
    let v = &out.mechanism_values;
    let social = v[&Mechanism::Social];
    let ok = v.get(&Mechanism::MaxRp).is_none_or(|&r| r <= social)
        && v.get(&Mechanism::MaxInt).is_none_or(|&i| i <= social)
        && match (v.get(&Mechanism::MaxInt), v.get(&Mechanism::MaxRp)) {
            (Some(i), Some(r)) => i <= r,
            _ => true,
        };
    if ok {
        return Ok(());
    }
    Err(Error::Internal(format!(
        "sandwich violated on {}: maxint {ip:?}, maxrp {rp:?} of social {social}",
        out.id
    )))
}

fn mean(xs: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (sum, n) = xs.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Aggregates instance outcomes into a report row.
///
/// Means run over solved instances in input order; a zero baseline drops the
/// instance from that metric's mean and is counted in `excluded`.
pub fn compute_metrics(label: &str, outcomes: &[InstanceOutcome], spec: &ExperimentSpec) -> ReportRow {
    let solved: Vec<&InstanceOutcome> = outcomes.iter().filter(|o| o.solved).collect();
    let mut metrics = BTreeMap::new();
    let mut excluded = BTreeMap::new();
    for &m in spec.metrics.iter().filter(|&&m| m != Metric::WaUnderMechanism) {
        if let Some(x) = mean(solved.iter().filter_map(|o| o.ratios.get(&m).copied())) {
            metrics.insert(m, x);
        }
        excluded.insert(m, solved.iter().filter(|o| o.zero_baseline.contains(&m)).count());
    }
    let by_mechanism = |pick: fn(&InstanceOutcome) -> &BTreeMap<Mechanism, f64>| {
        spec.mechanisms
            .iter()
            .filter_map(|&mech| {
                mean(solved.iter().filter_map(|o| pick(o).get(&mech).copied())).map(|x| (mech, x))
            })
            .collect::<BTreeMap<_, _>>()
    };
    let wa_under_mechanism = by_mechanism(|o| &o.wa_under_mechanism);
    let ra_under_mechanism = by_mechanism(|o| &o.ra_under_mechanism);
    let timed = |x: Option<f64>| x.filter(|_| spec.record_timings);
    ReportRow {
        instance_set: label.to_string(),
        metrics,
        wa_under_mechanism,
        ra_under_mechanism,
        excluded,
        iterations: mean(solved.iter().filter_map(|o| o.iterations.map(|i| i as f64))),
        constraints_added: mean(solved.iter().filter_map(|o| o.constraints_added.map(|i| i as f64))),
        total_time_s: timed(mean(solved.iter().map(|o| o.total_time_s))),
        master_time_s: timed(mean(solved.iter().filter_map(|o| o.master_time_s))),
        instances_solved: solved.len(),
        instances_total: outcomes.len(),
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.6}")).unwrap_or_default()
}

impl ExperimentReport {
    /// CSV with the fixed column order; missing values are empty fields.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_COLUMNS)?;
        for row in &self.rows {
            let m = |k: Metric| fmt_opt(row.metrics.get(&k).copied());
            w.write_record([
                row.instance_set.clone(),
                m(Metric::WA),
                m(Metric::RA),
                m(Metric::WT),
                m(Metric::RT),
                m(Metric::MaxrpRatio),
                m(Metric::MaxintRatio),
                m(Metric::AllWithholdRatio),
                fmt_opt(row.iterations),
                fmt_opt(row.constraints_added),
                fmt_opt(row.total_time_s),
                fmt_opt(row.master_time_s),
                row.instances_solved.to_string(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Pretty JSON; per-instance timings are zeroed unless the spec records them.
    pub fn to_json(&self) -> String {
        let mut copy = self.clone();
        if !self.spec.record_timings {
            for o in &mut copy.instances {
                o.total_time_s = 0.0;
                o.master_time_s = o.master_time_s.map(|_| 0.0);
            }
        }
        serde_json::to_string_pretty(&copy).expect("report serializes") + "\n"
    }
}
