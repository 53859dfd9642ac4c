//! Seeded random instance generators.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Instance, InstanceBuilder, VertexId};

const PROB_TOLERANCE: f64 = 1e-9;
const MAX_PAIR_ATTEMPTS: usize = 10_000;

/// Shipped defaults for [`SaidmanConfig`].
pub const DEFAULT_SAIDMAN_CONFIG: &str = include_str!("../data/saidman_default.json");

/// Every ordered pair→pair and ndd→pair arc is drawn independently with probability `p`.
///
/// Vertices are numbered agent by agent, pairs before ndds. Agents are named `a0`, `a1`, ...
pub fn generate_density(
    pool_sizes: &[usize],
    p: f64,
    ndds_per_agent: usize,
    max_cycle_len: usize,
    max_chain_len: usize,
    seed: u64,
) -> Instance {
    let p = p.clamp(0.0, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = InstanceBuilder::new(max_cycle_len, max_chain_len);
    let mut pairs = Vec::new();
    let mut donors = Vec::new();
    for (i, &size) in pool_sizes.iter().enumerate() {
        let agent = b.agent(format!("a{i}"));
        for _ in 0..size {
            let v = b.pair(agent);
            pairs.push(v);
            donors.push(v);
        }
        for _ in 0..ndds_per_agent {
            donors.push(b.ndd(agent));
        }
    }
    donors.sort();
    for &u in &donors {
        for &v in &pairs {
            if u != v && rng.random::<f64>() < p {
                b.arc(u, v);
            }
        }
    }
    b.build().expect("generated instance is valid")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BloodType {
    O,
    A,
    B,
    AB,
}

impl BloodType {
    /// ABO compatibility of a donor of type `self` with a recipient of type `recipient`.
    pub fn can_donate_to(self, recipient: BloodType) -> bool {
        use BloodType::*;
        matches!(
            (self, recipient),
            (O, _) | (A, A) | (A, AB) | (B, B) | (B, AB) | (AB, AB)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PraTier {
    pub prob: f64,
    pub pra: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SaidmanConfig {
    /// Recipient blood-type distribution; also used for donors unless overridden.
    pub blood_type_freqs: BTreeMap<BloodType, f64>,
    #[serde(default)]
    pub donor_blood_type_freqs: Option<BTreeMap<BloodType, f64>>,
    pub pra_tiers: Vec<PraTier>,
    /// Redraw a pair until donor and recipient are incompatible.
    #[serde(default)]
    pub incompatible_pairs_only: bool,
    #[serde(default)]
    pub pool_sizes: Vec<usize>,
    #[serde(default)]
    pub ndds_per_agent: usize,
    #[serde(default = "default_cycle_len")]
    pub max_cycle_len: usize,
    #[serde(default)]
    pub max_chain_len: usize,
}

fn default_cycle_len() -> usize {
    3
}

impl Default for SaidmanConfig {
    fn default() -> Self {
        serde_json::from_str(DEFAULT_SAIDMAN_CONFIG).expect("shipped config parses")
    }
}

impl SaidmanConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn with_pool_sizes(mut self, sizes: Vec<usize>) -> Self {
        self.pool_sizes = sizes;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_distribution("blood_type_freqs", self.blood_type_freqs.values().copied())?;
        if let Some(d) = &self.donor_blood_type_freqs {
            check_distribution("donor_blood_type_freqs", d.values().copied())?;
        }
        check_distribution("pra_tiers", self.pra_tiers.iter().map(|t| t.prob))?;
        if self.pra_tiers.iter().any(|t| !(0.0..=1.0).contains(&t.pra)) {
            return Err(Error::Config("pra must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

fn check_distribution(name: &str, probs: impl Iterator<Item = f64>) -> Result<()> {
    let mut sum = 0.0;
    for p in probs {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Config(format!("{name}: probability {p} outside [0, 1]")));
        }
        sum += p;
    }
    if (sum - 1.0).abs() > PROB_TOLERANCE {
        return Err(Error::Config(format!("{name}: probabilities sum to {sum}, not 1")));
    }
    Ok(())
}

fn draw<T: Copy>(rng: &mut impl Rng, items: &[(T, f64)]) -> T {
    let mut u: f64 = rng.random();
    for &(t, p) in items {
        if u < p {
            return t;
        }
        u -= p;
    }
    items.last().expect("nonempty distribution").0
}

/// (vertex, donor type, recipient type and PRA if a pair)
type Person = (VertexId, BloodType, Option<(BloodType, f64)>);

/// Saidman-style pool: blood types and recipient PRA drawn from `config`;
/// arc (u, v) exists iff u's donor is ABO-compatible with v's recipient and a
/// uniform draw exceeds v's PRA.
pub fn generate_saidman_like(config: &SaidmanConfig, seed: u64) -> Result<Instance> {
    config.validate()?;
    let patient_bt: Vec<(BloodType, f64)> =
        config.blood_type_freqs.iter().map(|(k, v)| (*k, *v)).collect();
    let donor_bt: Vec<(BloodType, f64)> = config
        .donor_blood_type_freqs
        .as_ref()
        .unwrap_or(&config.blood_type_freqs)
        .iter()
        .map(|(k, v)| (*k, *v))
        .collect();
    let tiers: Vec<(f64, f64)> = config.pra_tiers.iter().map(|t| (t.pra, t.prob)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = InstanceBuilder::new(config.max_cycle_len, config.max_chain_len);
    let mut people: Vec<Person> = Vec::new();

    for (i, &size) in config.pool_sizes.iter().enumerate() {
        let agent = b.agent(format!("a{i}"));
        for _ in 0..size {
            let mut attempts = 0;
            let (donor, patient, pra) = loop {
                attempts += 1;
                let patient = draw(&mut rng, &patient_bt);
                let donor = draw(&mut rng, &donor_bt);
                let pra = draw(&mut rng, &tiers);
                let positive_crossmatch = rng.random::<f64>() < pra;
                let incompatible = !donor.can_donate_to(patient) || positive_crossmatch;
                if !config.incompatible_pairs_only || incompatible {
                    break (donor, patient, pra);
                }
                if attempts >= MAX_PAIR_ATTEMPTS {
                    return Err(Error::Config(
                        "could not draw an incompatible pair; relax incompatible_pairs_only".into(),
                    ));
                }
            };
            let v = b.pair(agent);
            people.push((v, donor, Some((patient, pra))));
        }
        for _ in 0..config.ndds_per_agent {
            let donor = draw(&mut rng, &donor_bt);
            let v = b.ndd(agent);
            people.push((v, donor, None));
        }
    }
    people.sort_by_key(|p| p.0);

    for &(u, donor, _) in &people {
        for &(v, _, recipient) in &people {
            let Some((patient, pra)) = recipient else {
                continue;
            };
            if u == v || !donor.can_donate_to(patient) {
                continue;
            }
            if rng.random::<f64>() >= pra {
                b.arc(u, v);
            }
        }
    }
    Ok(b.build()?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn density_extremes() {
        assert_eq!(generate_density(&[2, 2], 0.0, 0, 3, 0, 1).num_arcs(), 0);
        let full = generate_density(&[2, 2], 1.0, 0, 3, 0, 1);
        assert_eq!(full.num_vertices(), 4);
        assert_eq!(full.num_arcs(), 12);
    }

    #[test]
    fn density_is_deterministic() {
        let a = generate_density(&[4, 3], 0.5, 1, 3, 1, 42);
        let b = generate_density(&[4, 3], 0.5, 1, 3, 1, 42);
        assert_eq!(a, b);
        assert_ne!(a, generate_density(&[4, 3], 0.5, 1, 3, 1, 43));
    }

    #[test]
    fn density_arc_counts_within_three_sigma() {
        // 8 pairs, no ndds: 56 ordered pairs, p = 0.3.
        let trials: f64 = 56.0;
        let p = 0.3;
        let sigma = (trials * p * (1.0 - p)).sqrt();
        for seed in 0..100 {
            let arcs = generate_density(&[4, 4], p, 0, 3, 0, seed).num_arcs() as f64;
            assert!((arcs - trials * p).abs() <= 3.0 * sigma, "seed {seed}: {arcs} arcs");
        }
    }

    fn single_type(pra: f64) -> SaidmanConfig {
        SaidmanConfig {
            blood_type_freqs: [(BloodType::O, 1.0)].into(),
            donor_blood_type_freqs: None,
            pra_tiers: vec![PraTier { prob: 1.0, pra }],
            incompatible_pairs_only: false,
            pool_sizes: vec![3, 2],
            ndds_per_agent: 0,
            max_cycle_len: 3,
            max_chain_len: 0,
        }
    }

    #[test]
    fn saidman_everyone_compatible() {
        let inst = generate_saidman_like(&single_type(0.0), 5).unwrap();
        assert_eq!(inst.num_arcs(), 5 * 4);
    }

    #[test]
    fn saidman_fully_sensitized() {
        let inst = generate_saidman_like(&single_type(1.0), 5).unwrap();
        assert_eq!(inst.num_arcs(), 0);
    }

    #[test]
    fn saidman_rejects_bad_distribution() {
        let mut cfg = single_type(0.0);
        cfg.pra_tiers[0].prob = 0.9;
        assert!(matches!(generate_saidman_like(&cfg, 1), Err(Error::Config(_))));
    }

    #[test]
    fn saidman_default_golden() {
        let cfg = SaidmanConfig::default();
        let a = generate_saidman_like(&cfg, 7).unwrap();
        let b = generate_saidman_like(&cfg, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.num_vertices(), 20);
        assert_eq!(a.num_arcs(), SAIDMAN_GOLDEN_ARCS);
    }

    const SAIDMAN_GOLDEN_ARCS: usize = 54;

    #[test]
    fn abo_rules() {
        use BloodType::*;
        assert!(O.can_donate_to(AB));
        assert!(!A.can_donate_to(B));
        assert!(AB.can_donate_to(AB));
        assert!(!AB.can_donate_to(O));
    }
}
