//! JSON documents. Complex numbers are `[re, im]` pairs and matrices are
//! arrays of rows.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{kraus_to_choi, ChoiState, KrausChannel};
use crate::decompose::DecompositionResult;
use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, Tolerances};
use crate::qutrit::{qutrit_reference_choi, QutritRefParams};

pub type JsonMatrix = Vec<Vec<[f64; 2]>>;

pub fn matrix_to_json(m: &ComplexMatrix) -> JsonMatrix {
    (0..m.nrows())
        .map(|r| {
            (0..m.ncols())
                .map(|c| [m[(r, c)].re, m[(r, c)].im])
                .collect()
        })
        .collect()
}

pub fn matrix_from_json(rows: &JsonMatrix) -> Result<ComplexMatrix> {
    let nr = rows.len();
    let nc = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != nc) {
        return Err(Error::Json("ragged matrix rows".into()));
    }
    if rows.iter().flatten().flatten().any(|x| !x.is_finite()) {
        return Err(Error::Json("non-finite matrix entry".into()));
    }
    Ok(ComplexMatrix::from_fn(nr, nc, |r, c| {
        Complex64::new(rows[r][c][0], rows[r][c][1])
    }))
}

/// `#[serde(with = ...)]` adapter for [`ComplexMatrix`].
pub mod matrix_serde {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(
        m: &ComplexMatrix,
        s: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        matrix_to_json(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<ComplexMatrix, D::Error> {
        let rows = JsonMatrix::deserialize(d)?;
        matrix_from_json(&rows).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KrausDoc {
    dim: usize,
    kraus: Vec<JsonMatrix>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChoiDoc {
    dim: usize,
    matrix: JsonMatrix,
}

pub fn kraus_to_json(ch: &KrausChannel) -> Result<String> {
    Ok(serde_json::to_string_pretty(&KrausDoc {
        dim: ch.dim(),
        kraus: ch.ops().iter().map(matrix_to_json).collect(),
    })?)
}

pub fn choi_to_json(c: &ChoiState) -> Result<String> {
    Ok(serde_json::to_string_pretty(&ChoiDoc {
        dim: c.dim(),
        matrix: matrix_to_json(c.matrix()),
    })?)
}

/// A channel read from either document format.
#[derive(Debug, Clone, PartialEq)]
pub enum ChannelInput {
    Kraus(KrausChannel),
    Choi(ChoiState),
}

impl ChannelInput {
    pub fn dim(&self) -> usize {
        match self {
            Self::Kraus(k) => k.dim(),
            Self::Choi(c) => c.dim(),
        }
    }

    pub fn choi(&self) -> ChoiState {
        match self {
            Self::Kraus(k) => kraus_to_choi(k),
            Self::Choi(c) => c.clone(),
        }
    }
}

/// Parses a Kraus or Choi document and validates it at `tol`.
pub fn parse_channel(text: &str, tol: Tolerances) -> Result<ChannelInput> {
    let v: serde_json::Value = serde_json::from_str(text)?;
    if v.get("kraus").is_some() {
        let doc: KrausDoc = serde_json::from_value(v)?;
        let ops = doc
            .kraus
            .iter()
            .map(matrix_from_json)
            .collect::<Result<Vec<_>>>()?;
        let ch = KrausChannel::with_tolerance(ops, tol.structural)?;
        if ch.dim() != doc.dim {
            return Err(Error::DimensionMismatch {
                expected: doc.dim,
                actual: ch.dim(),
            });
        }
        Ok(ChannelInput::Kraus(ch))
    } else if v.get("matrix").is_some() {
        let doc: ChoiDoc = serde_json::from_value(v)?;
        Ok(ChannelInput::Choi(ChoiState::with_tolerance(
            doc.dim,
            matrix_from_json(&doc.matrix)?,
            tol,
        )?))
    } else {
        Err(Error::Json("expected a `kraus` or `matrix` field".into()))
    }
}

/// A mixture given by closed-form qutrit components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceMixture {
    pub dim: usize,
    pub probabilities: Vec<f64>,
    pub qutrit_reference: Vec<QutritRefParams>,
}

impl ReferenceMixture {
    pub fn table() -> Self {
        Self {
            dim: 3,
            probabilities: crate::qutrit::TABLE_PROBABILITIES.to_vec(),
            qutrit_reference: crate::qutrit::TABLE.to_vec(),
        }
    }

    pub fn component_chois(&self) -> Result<Vec<ChoiState>> {
        if self.dim != 3 {
            return Err(Error::DimensionMismatch {
                expected: 3,
                actual: self.dim,
            });
        }
        if self.probabilities.len() != self.qutrit_reference.len() {
            return Err(Error::InvalidProbabilities(format!(
                "{} probabilities for {} components",
                self.probabilities.len(),
                self.qutrit_reference.len()
            )));
        }
        crate::channel::validate_probabilities(&self.probabilities, 1e-9)?;
        self.qutrit_reference
            .iter()
            .map(qutrit_reference_choi)
            .collect()
    }
}

/// Either kind of decomposition document.
#[derive(Debug, Clone, PartialEq)]
pub enum MixtureDoc {
    Ansatz(Box<DecompositionResult>),
    Reference(ReferenceMixture),
}

impl MixtureDoc {
    pub fn dim(&self) -> usize {
        match self {
            Self::Ansatz(r) => r.params.dim,
            Self::Reference(r) => r.dim,
        }
    }
}

pub fn parse_decomposition(text: &str) -> Result<DecompositionResult> {
    let r: DecompositionResult = serde_json::from_str(text)?;
    r.params.validate()?;
    Ok(r)
}

pub fn parse_mixture(text: &str) -> Result<MixtureDoc> {
    let v: serde_json::Value = serde_json::from_str(text)?;
    if v.get("qutrit_reference").is_some() {
        let m: ReferenceMixture = serde_json::from_value(v)?;
        m.component_chois()?;
        Ok(MixtureDoc::Reference(m))
    } else {
        Ok(MixtureDoc::Ansatz(Box::new(parse_decomposition(text)?)))
    }
}
