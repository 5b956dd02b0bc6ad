//! JSON instance files: base complex, leaves, heights, ε, and optional coefficients,
//! fiber model and partition. Rationals are "p/q" strings.

use crate::fiber::FiberModel;
use crate::flat::{CoefficientSystem, FlatError};
use crate::gen::Generated;
use crate::linalg::Mat;
use crate::morse::{Leaf, LeafSystem, MorseError};
use crate::rational::{fmt_q, serde_q, Q};
use crate::simplex::{BaseComplex, Simplex, SimplexError};
use crate::smoothing::PartitionSpec;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::BTreeMap;
use std::path::Path;
use thiserror::Error;

pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("cannot read {path}: {err}")]
    Io { path: String, err: std::io::Error },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("complex: {0}")]
    Simplex(#[from] SimplexError),
    #[error("leaves: {0}")]
    Morse(#[from] MorseError),
    #[error("coefficients: {0}")]
    Flat(#[from] FlatError),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LeafJson {
    pub id: String,
    pub index: u32,
    pub rank: usize,
}

/// Block-wise matrices: simplex key ↦ {"α←β": rank_α × rank_β entries}.
pub type CoefficientsJson = BTreeMap<String, BTreeMap<String, Vec<Vec<Value>>>>;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InstanceFile {
    #[serde(default = "default_version")]
    pub version: u32,
    pub complex: Vec<Vec<u32>>,
    pub leaves: Vec<LeafJson>,
    pub heights: BTreeMap<String, BTreeMap<String, Value>>,
    #[serde(with = "serde_q")]
    pub epsilon: Q,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<CoefficientsJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fiber_model: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partition: Option<Value>,
}

fn default_version() -> u32 {
    VERSION
}

#[derive(Clone, Debug)]
pub struct Instance {
    pub file: InstanceFile,
    pub complex: BaseComplex,
    pub leaves: LeafSystem,
    pub coeffs: CoefficientSystem,
}

fn parse_rational(v: &Value) -> Result<Q, InstanceError> {
    serde_q::from_value(v).map_err(InstanceError::Parse)
}

fn parse_matrix(rows: &[Vec<Value>], r: usize, c: usize, what: &str) -> Result<Mat, InstanceError> {
    if rows.len() != r || rows.iter().any(|row| row.len() != c) {
        return Err(InstanceError::Parse(format!("{what}: expected a {r}×{c} matrix")));
    }
    let mut m = Mat::zeros(r, c);
    for (i, row) in rows.iter().enumerate() {
        for (j, x) in row.iter().enumerate() {
            m.set(i, j, parse_rational(x)?);
        }
    }
    Ok(m)
}

fn matrix_json(m: &Mat) -> Vec<Vec<Value>> {
    (0..m.rows).map(|i| (0..m.cols).map(|j| Value::String(fmt_q(m.get(i, j)))).collect()).collect()
}

fn split_block(key: &str) -> Option<(&str, &str)> {
    key.split_once('←').or_else(|| key.split_once("<-")).map(|(a, b)| (a.trim(), b.trim()))
}

impl Instance {
    pub fn load(path: &Path) -> Result<Instance, InstanceError> {
        let text = std::fs::read_to_string(path).map_err(|err| InstanceError::Io { path: path.display().to_string(), err })?;
        Instance::from_str(&text)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn from_str(text: &str) -> Result<Instance, InstanceError> {
        let file: InstanceFile = serde_json::from_str(text).map_err(|e| InstanceError::Parse(e.to_string()))?;
        Instance::from_file(file)
    }

    pub fn from_file(file: InstanceFile) -> Result<Instance, InstanceError> {
        if file.version != VERSION {
            return Err(InstanceError::Parse(format!("unsupported version {}", file.version)));
        }
        let complex = BaseComplex::build(&file.complex)?;
        let mut leaves = Vec::new();
        let mut heights = Vec::new();
        for l in &file.leaves {
            leaves.push(Leaf { id: l.id.clone(), index: l.index, rank: l.rank });
            let hs = file.heights.get(&l.id).ok_or_else(|| InstanceError::Parse(format!("no heights for leaf {:?}", l.id)))?;
            let mut m = BTreeMap::new();
            for (v, h) in hs {
                let v: u32 = v.parse().map_err(|_| InstanceError::Parse(format!("bad vertex {v:?}")))?;
                m.insert(v, parse_rational(h)?);
            }
            heights.push(m);
        }
        let leaves = LeafSystem::new(leaves, heights, file.epsilon.clone())?;
        leaves.check_heights(&complex)?;
        let mut coeffs = CoefficientSystem::default();
        if let Some(cj) = &file.coefficients {
            let n = leaves.dim();
            for (key, blocks) in cj {
                let s = Simplex::parse_key(key).map_err(InstanceError::Parse)?;
                if !complex.contains(&s) {
                    return Err(SimplexError::SimplexNotInComplex(s).into());
                }
                let mut m = Mat::zeros(n, n);
                for (bk, rows) in blocks {
                    let (a, b) = split_block(bk).ok_or_else(|| InstanceError::Parse(format!("bad block key {bk:?}")))?;
                    let (ia, ib) = (leaves.leaf_index(a)?, leaves.leaf_index(b)?);
                    let (ra, rb) = (leaves.block(ia), leaves.block(ib));
                    let blk = parse_matrix(rows, ra.len(), rb.len(), &format!("{key} {bk}"))?;
                    for (i, r) in ra.clone().enumerate() {
                        for (j, c) in rb.clone().enumerate() {
                            m.set(r, c, blk.get(i, j).clone());
                        }
                    }
                }
                coeffs.set(s, m);
            }
        }
        Ok(Instance { file, complex, leaves, coeffs })
    }

    pub fn from_generated(g: &Generated) -> Instance {
        let l = &g.leaves;
        let file = InstanceFile {
            version: VERSION,
            complex: g.maximal.clone(),
            leaves: l.leaves.iter().map(|x| LeafJson { id: x.id.clone(), index: x.index, rank: x.rank }).collect(),
            heights: (0..l.n_leaves())
                .map(|a| {
                    (l.leaves[a].id.clone(), l.heights_of(a).iter().map(|(v, h)| (v.to_string(), Value::String(fmt_q(h)))).collect())
                })
                .collect(),
            epsilon: l.epsilon.clone(),
            coefficients: None,
            fiber_model: None,
            partition: None,
        };
        let mut inst = Instance { file, complex: g.complex.clone(), leaves: g.leaves.clone(), coeffs: g.coeffs.clone() };
        inst.sync_coefficients();
        inst
    }

    /// Writes the current coefficient system back into the file form, nonzero blocks only.
    pub fn sync_coefficients(&mut self) {
        let l = &self.leaves;
        let mut out = CoefficientsJson::new();
        for (s, m) in &self.coeffs.coeffs {
            let mut blocks = BTreeMap::new();
            for a in 0..l.n_leaves() {
                for b in 0..l.n_leaves() {
                    let (ra, rb): (Vec<usize>, Vec<usize>) = (l.block(a).collect(), l.block(b).collect());
                    let blk = m.submatrix(&ra, &rb);
                    if !blk.is_zero() {
                        blocks.insert(format!("{}←{}", l.leaves[a].id, l.leaves[b].id), matrix_json(&blk));
                    }
                }
            }
            out.insert(s.key(), blocks);
        }
        self.file.coefficients = Some(out);
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.file).unwrap()
    }

    /// The declared fiber model: {"kind": "cochain"} or an explicit one.
    pub fn fiber_model(&self) -> Result<Option<FiberModel>, InstanceError> {
        let Some(v) = &self.file.fiber_model else { return Ok(None) };
        match v.get("kind").and_then(Value::as_str) {
            Some("cochain") => Ok(Some(FiberModel::cochain_model(&self.complex, &self.leaves, &self.coeffs)?)),
            Some("explicit") => parse_explicit_model(v, self.leaves.dim()).map(Some),
            other => Err(InstanceError::Parse(format!("unknown fiber_model kind {other:?}"))),
        }
    }

    pub fn partition(&self) -> Result<PartitionSpec, InstanceError> {
        match &self.file.partition {
            None => Ok(PartitionSpec::Profile(crate::smoothing::Profile::Smoothstep)),
            Some(v) => PartitionSpec::from_json(v).map_err(InstanceError::Parse),
        }
    }
}

/// {"kind": "explicit", "degrees": [..], "d": [[..]], "integration": {key: [[..]]}, "tags"?: [..], "labels"?: [..]}
fn parse_explicit_model(v: &Value, dim_v: usize) -> Result<FiberModel, InstanceError> {
    let p = |s: &str| InstanceError::Parse(format!("fiber_model: {s}"));
    let degrees: Vec<i64> = serde_json::from_value(v.get("degrees").cloned().ok_or_else(|| p("missing degrees"))?)
        .map_err(|e| p(&e.to_string()))?;
    let n = degrees.len();
    let rows = |x: &Value| -> Result<Vec<Vec<Value>>, InstanceError> { serde_json::from_value(x.clone()).map_err(|e| p(&e.to_string())) };
    let d = match v.get("d") {
        Some(x) => parse_matrix(&rows(x)?, n, n, "fiber_model d")?,
        None => Mat::zeros(n, n),
    };
    let mut integ = BTreeMap::new();
    if let Some(obj) = v.get("integration").and_then(Value::as_object) {
        for (key, m) in obj {
            let s = Simplex::parse_key(key).map_err(InstanceError::Parse)?;
            integ.insert(s, parse_matrix(&rows(m)?, dim_v, n, &format!("integration {key}"))?);
        }
    }
    let tags = match v.get("tags") {
        Some(Value::Array(a)) => Some(a.iter().map(parse_rational).collect::<Result<Vec<_>, _>>()?),
        _ => None,
    };
    let labels = match v.get("labels") {
        Some(x) => serde_json::from_value(x.clone()).map_err(|e| p(&e.to_string()))?,
        None => (0..n).map(|i| format!("w{i}")).collect(),
    };
    Ok(FiberModel { degrees, d, integ, tags, labels })
}
