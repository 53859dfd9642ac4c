//! Versioned JSON instance files.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{validate_instance, Instance, RawInstance, RawVertex, VertexKind, WeightMode};
use crate::weight::Weight;

pub const SCHEMA_VERSION: &str = "1.0";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentEntry {
    pub id: String,
    #[serde(default)]
    pub pairs: Vec<usize>,
    #[serde(default)]
    pub ndds: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VertexWeights {
    pub social: Weight,
    pub agent: Weight,
}

/// On-disk form of an [`Instance`]. Field order is the canonical write order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub schema_version: String,
    #[serde(rename = "K")]
    pub max_cycle_len: usize,
    #[serde(rename = "L")]
    pub max_chain_len: usize,
    pub weight_mode: WeightMode,
    pub agents: Vec<AgentEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vertex_weights: Option<BTreeMap<usize, VertexWeights>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    pub arcs: Vec<(usize, usize)>,
}

fn schema(code: &'static str, pointer: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Schema {
        code,
        pointer: pointer.into(),
        message: message.into(),
    }
}

impl InstanceFile {
    pub fn from_instance(inst: &Instance) -> Self {
        let mut agents: Vec<AgentEntry> = inst
            .agents()
            .iter()
            .map(|name| AgentEntry {
                id: name.clone(),
                pairs: Vec::new(),
                ndds: Vec::new(),
            })
            .collect();
        let mut weights = BTreeMap::new();
        for v in inst.vertices() {
            let entry = &mut agents[v.agent.0];
            match v.kind {
                VertexKind::Pair => entry.pairs.push(v.id.0),
                VertexKind::Ndd => entry.ndds.push(v.id.0),
            }
            weights.insert(
                v.id.0,
                VertexWeights {
                    social: v.social_weight,
                    agent: v.agent_weight,
                },
            );
        }
        InstanceFile {
            schema_version: SCHEMA_VERSION.to_string(),
            max_cycle_len: inst.max_cycle_len(),
            max_chain_len: inst.max_chain_len(),
            weight_mode: inst.weight_mode(),
            agents,
            vertex_weights: (inst.weight_mode() == WeightMode::Scored).then_some(weights),
            labels: inst.labels().map(|l| l.to_vec()),
            arcs: inst.arcs().iter().map(|&(u, v)| (u.0, v.0)).collect(),
        }
    }

    /// Structural checks that can name a JSON location, then full validation.
    pub fn to_instance(&self) -> Result<Instance> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(schema(
                "unsupported_version",
                "/schema_version",
                format!("expected {SCHEMA_VERSION}, found {}", self.schema_version),
            ));
        }
        let mut owner: BTreeMap<usize, (usize, VertexKind)> = BTreeMap::new();
        for (ai, a) in self.agents.iter().enumerate() {
            let lists = [("pairs", &a.pairs, VertexKind::Pair), ("ndds", &a.ndds, VertexKind::Ndd)];
            for (field, list, kind) in lists {
                for (k, &v) in list.iter().enumerate() {
                    if owner.insert(v, (ai, kind)).is_some() {
                        return Err(schema(
                            "duplicate_vertex",
                            format!("/agents/{ai}/{field}/{k}"),
                            format!("vertex {v} is listed more than once"),
                        ));
                    }
                }
            }
        }
        let n = owner.len();
        if let Some((&v, _)) = owner.iter().next_back().filter(|(&v, _)| v >= n) {
            return Err(schema(
                "missing_vertex",
                "/agents",
                format!("vertex ids must be dense 0..{n}; found {v}"),
            ));
        }
        let mut seen = BTreeSet::new();
        for (k, &(u, v)) in self.arcs.iter().enumerate() {
            let ptr = format!("/arcs/{k}");
            if u >= n || v >= n {
                return Err(schema("dangling_arc", ptr, format!("arc ({u}, {v}) names a missing vertex")));
            }
            if u == v {
                return Err(schema("self_loop", ptr, format!("self-loop on {u}")));
            }
            if !seen.insert((u, v)) {
                return Err(schema("duplicate_arc", ptr, format!("arc ({u}, {v}) repeated")));
            }
        }
        if let Some(w) = &self.vertex_weights {
            if self.weight_mode != WeightMode::Scored {
                return Err(schema(
                    "bad_weight",
                    "/vertex_weights",
                    "vertex weights require weight_mode \"scored\"",
                ));
            }
            if let Some(&v) = w.keys().find(|&&v| v >= n) {
                return Err(schema("bad_weight", format!("/vertex_weights/{v}"), "unknown vertex"));
            }
        }

        let weights = self.vertex_weights.as_ref();
        let vertices = owner
            .values()
            .enumerate()
            .map(|(v, &(agent, kind))| {
                let w = weights.and_then(|w| w.get(&v));
                RawVertex {
                    agent,
                    kind,
                    social_weight: w.map(|w| w.social),
                    agent_weight: w.map(|w| w.agent),
                }
            })
            .collect();
        let raw = RawInstance {
            agents: self.agents.iter().map(|a| a.id.clone()).collect(),
            vertices,
            arcs: self.arcs.clone(),
            max_cycle_len: self.max_cycle_len,
            max_chain_len: self.max_chain_len,
            weight_mode: self.weight_mode,
            labels: self.labels.clone(),
        };
        Ok(validate_instance(raw)?)
    }
}

fn pointer_of(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        out.push('/');
        match seg {
            Segment::Seq { index } => out.push_str(&index.to_string()),
            Segment::Map { key } => out.push_str(&key.replace('~', "~0").replace('/', "~1")),
            Segment::Enum { variant } => out.push_str(variant),
            Segment::Unknown => out.push('?'),
        }
    }
    out
}

/// Parses and validates instance JSON.
pub fn parse_instance(text: &str) -> Result<Instance> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let file: InstanceFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let pointer = pointer_of(e.path());
        let inner = e.into_inner();
        let msg = inner.to_string();
        let code = if msg.starts_with("unknown field") {
            "unknown_field"
        } else if msg.starts_with("missing field") {
            "missing_field"
        } else if inner.is_syntax() || inner.is_eof() {
            "invalid_json"
        } else {
            "schema"
        };
        schema(code, pointer, msg)
    })?;
    file.to_instance()
}

/// Canonical pretty JSON with a trailing newline.
pub fn render_instance(inst: &Instance) -> String {
    let mut s = serde_json::to_string_pretty(&InstanceFile::from_instance(inst))
        .expect("instance files always serialize");
    s.push('\n');
    s
}

pub fn read_instance(path: impl AsRef<Path>) -> Result<Instance> {
    parse_instance(&fs::read_to_string(path)?)
}

pub fn write_instance(inst: &Instance, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), render_instance(inst).as_bytes())
}

/// Writes to a sibling temporary file, then renames over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| std::io::Error::new(std::io::ErrorKind::InvalidInput, "path has no file name"))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, bytes)?;
    if let Err(e) = fs::rename(&tmp, path) {
        let _ = fs::remove_file(&tmp);
        return Err(e.into());
    }
    Ok(())
}
