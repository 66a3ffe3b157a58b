//! JSON encodings.
//!
//! Matrices are row-major nested arrays of `[re, im]` pairs. Every `decode_*`
//! function accepts untrusted text and reports problems as [`Error::Decode`]
//! or a validation error; none of them panic.

use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::fock::{self, FermionOperator, FockBasis};
use crate::linalg::{self, CMatrix};
use crate::maps::{DomainSpec, KrausSet};
use crate::models::ModelSpec;

type Rows = Vec<Vec<[f64; 2]>>;

pub fn matrix_to_rows(m: &CMatrix) -> Rows {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

pub fn matrix_from_rows(rows: &Rows) -> Result<CMatrix> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != ncols) {
        return Err(Error::Decode(format!(
            "row {i} has {} entries, expected {ncols}",
            r.len()
        )));
    }
    if rows.iter().flatten().flatten().any(|x| !x.is_finite()) {
        return Err(Error::Decode("matrix entries must be finite".into()));
    }
    Ok(CMatrix::from_fn(nrows, ncols, |i, j| {
        let [re, im] = rows[i][j];
        linalg::c(re, im)
    }))
}

/// `serde(with = ...)` adapter for [`CMatrix`].
pub mod matrix_serde {
    use super::*;

    pub fn serialize<S: Serializer>(m: &CMatrix, s: S) -> std::result::Result<S::Ok, S::Error> {
        matrix_to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<CMatrix, D::Error> {
        let rows = Rows::deserialize(d)?;
        matrix_from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

pub fn encode_matrix(m: &CMatrix) -> String {
    serde_json::to_string(&matrix_to_rows(m)).expect("finite floats serialize")
}

pub fn decode_matrix(text: &str) -> Result<CMatrix> {
    let rows: Rows = serde_json::from_str(text)?;
    matrix_from_rows(&rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisJson {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "L_plus_1")]
    pub l_plus_1: usize,
    pub states: Vec<Vec<usize>>,
}

impl From<&FockBasis> for BasisJson {
    fn from(b: &FockBasis) -> Self {
        BasisJson {
            n: b.num_particles(),
            l_plus_1: b.num_modes(),
            states: b.states().to_vec(),
        }
    }
}

pub fn encode_basis(b: &FockBasis) -> String {
    serde_json::to_string(&BasisJson::from(b)).expect("basis serializes")
}

/// Parses a basis listing and checks it is exactly the canonical enumeration.
pub fn decode_basis(text: &str) -> Result<FockBasis> {
    let raw: BasisJson = serde_json::from_str(text)?;
    if raw.n > raw.l_plus_1 {
        return Err(Error::TooManyParticles {
            particles: raw.n,
            modes: raw.l_plus_1,
        });
    }
    let expected_dim = fock::binomial(raw.l_plus_1, raw.n);
    if expected_dim != Some(raw.states.len()) {
        return Err(Error::Decode(format!(
            "listing has {} states, F_{}^{} has {}",
            raw.states.len(),
            raw.n,
            raw.l_plus_1,
            expected_dim.map_or("too many".to_string(), |d| d.to_string())
        )));
    }
    let basis = fock::enumerate_basis(raw.n, raw.l_plus_1)?;
    if basis.states() != raw.states.as_slice() {
        return Err(Error::Decode(
            "states are not the lexicographic listing of strictly increasing tuples".into(),
        ));
    }
    Ok(basis)
}

pub fn encode_domain_spec(spec: &DomainSpec) -> String {
    serde_json::to_string(spec).expect("domain spec serializes")
}

pub fn decode_domain_spec(text: &str) -> Result<DomainSpec> {
    let spec: DomainSpec = serde_json::from_str(text)?;
    spec.validate()?;
    Ok(spec)
}

pub fn encode_model_spec(spec: &ModelSpec) -> String {
    serde_json::to_string(spec).expect("model spec serializes")
}

pub fn decode_model_spec(text: &str) -> Result<ModelSpec> {
    let spec: ModelSpec = serde_json::from_str(text)?;
    spec.validate()?;
    Ok(spec)
}

#[derive(Serialize, Deserialize)]
struct KrausSetJson {
    domain_spec: DomainSpec,
    time: Option<f64>,
    operators: Vec<Rows>,
}

pub fn kraus_set_to_value(ks: &KrausSet) -> serde_json::Value {
    let raw = KrausSetJson {
        domain_spec: ks.domain().clone(),
        time: ks.time(),
        operators: ks.matrices().map(matrix_to_rows).collect(),
    };
    serde_json::to_value(raw).expect("kraus set serializes")
}

pub fn encode_kraus_set(ks: &KrausSet) -> String {
    kraus_set_to_value(ks).to_string()
}

pub fn decode_kraus_set(text: &str) -> Result<KrausSet> {
    let raw: KrausSetJson = serde_json::from_str(text)?;
    raw.domain_spec.validate()?;
    if raw.time.is_some_and(|t| !t.is_finite()) {
        return Err(Error::Decode("time must be finite".into()));
    }
    let f1 = Arc::new(FockBasis::single_particle(raw.domain_spec.num_modes)?);
    let operators = raw
        .operators
        .iter()
        .map(|rows| FermionOperator::new(f1.clone(), f1.clone(), matrix_from_rows(rows)?))
        .collect::<Result<Vec<_>>>()?;
    KrausSet::new(operators, raw.domain_spec, raw.time)
}
