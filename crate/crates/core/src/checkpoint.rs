//! JSON checkpoints of trained weights.
//!
//! Floats are emitted with 17 significant digits rather than the shortest
//! round-trip form.

use serde::ser::SerializeSeq;
use serde::{Deserialize, Serialize, Serializer};
use serde_json::value::RawValue;

use crate::error::{Error, Result};
use crate::io::format_f64;
use crate::polykernel::{NetworkShape, WeightSet};

fn raw(x: f64) -> Result<Box<RawValue>, serde_json::Error> {
    RawValue::from_string(format_f64(x))
}

fn ser_f64<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    raw(*x).map_err(serde::ser::Error::custom)?.serialize(s)
}

fn ser_vec<S: Serializer>(xs: &[f64], s: S) -> Result<S::Ok, S::Error> {
    let mut seq = s.serialize_seq(Some(xs.len()))?;
    for &x in xs {
        seq.serialize_element(&raw(x).map_err(serde::ser::Error::custom)?)?;
    }
    seq.end()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub seed: u64,
    #[serde(serialize_with = "ser_f64")]
    pub dropout_rate: f64,
    #[serde(serialize_with = "ser_f64")]
    pub h: f64,
    pub created_by_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub shape: NetworkShape,
    #[serde(serialize_with = "ser_vec")]
    pub w1: Vec<f64>,
    #[serde(serialize_with = "ser_vec")]
    pub b1: Vec<f64>,
    #[serde(serialize_with = "ser_vec")]
    pub w2: Vec<f64>,
    #[serde(serialize_with = "ser_vec")]
    pub b2: Vec<f64>,
    pub metadata: CheckpointMeta,
}

impl Checkpoint {
    pub fn new(weights: &WeightSet, seed: u64, dropout_rate: f64, h: f64) -> Self {
        Self {
            shape: weights.shape(),
            w1: weights.w1.clone(),
            b1: weights.b1.clone(),
            w2: weights.w2.clone(),
            b2: weights.b2.clone(),
            metadata: CheckpointMeta {
                seed,
                dropout_rate,
                h,
                created_by_version: env!("CARGO_PKG_VERSION").to_owned(),
            },
        }
    }

    /// Validates array lengths against the declared shape.
    pub fn weights(&self) -> Result<WeightSet> {
        WeightSet::from_parts(
            self.shape,
            self.w1.clone(),
            self.b1.clone(),
            self.w2.clone(),
            self.b2.clone(),
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(Error::from)
    }
}
