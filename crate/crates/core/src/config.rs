//! Run configuration: structured JSON with explicit coefficient arrays (no
//! embedded expressions), validated into the module-level types before any
//! dispatch.
//!
//! Polynomials are serialized lowest degree first, entries as integers
//! 0..p-1 for ell0 = 1 or arrays of length ell0 otherwise; here the packed
//! integer index form is accepted for extension fields.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{FieldSpec, Fq, FqElem};
use crate::laurent::Laurent;
use crate::matrix::PolyMatrix;
use crate::poly::Poly;
use crate::quadpair::QuadricPair;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub field: FieldSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partition: Option<PartitionConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair: Option<PairConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expsum: Option<ExpSumConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lfunc: Option<LfuncConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<CountConfig>,
    /// work budget in elementary operations for refusal decisions
    #[serde(default = "default_budget")]
    pub budget: f64,
}

fn default_budget() -> f64 {
    5e8
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            field: FieldSpec::default(),
            partition: None,
            pair: None,
            expsum: None,
            lfunc: None,
            count: None,
            budget: default_budget(),
        }
    }
}

impl Default for FieldSpec {
    fn default() -> Self {
        FieldSpec::new(3, 1)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PartitionConfig {
    pub q_param: i64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairConfig {
    /// row-major symmetric matrices; entries are coefficient arrays
    pub m1: Vec<Vec<Vec<u32>>>,
    pub m2: Vec<Vec<Vec<u32>>>,
    #[serde(default)]
    pub modulus: Option<Vec<u32>>,
    #[serde(default)]
    pub b: Option<Vec<Vec<u32>>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExpSumConfig {
    /// line data d, c1, c2 (coefficient arrays)
    #[serde(default)]
    pub d: Option<Vec<u32>>,
    pub c1: Vec<u32>,
    pub c2: Vec<u32>,
    pub r: Vec<u32>,
    pub v: Vec<Vec<u32>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LfuncConfig {
    /// conductor exponent at infinity
    pub n_exp: usize,
    /// finite modulus y (coefficient array)
    pub y: Vec<u32>,
    /// generator exponents of the characters (as produced by the census);
    /// when absent the first nontrivial character of each group is used
    #[serde(default)]
    pub eta_exps: Option<Vec<u32>>,
    #[serde(default)]
    pub etap_exps: Option<Vec<u32>>,
    #[serde(default)]
    pub degree_cap: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CountConfig {
    /// deg P (P = t^{deg})
    pub deg_p: usize,
    #[serde(default)]
    pub l_param: Option<i64>,
    /// x0 coordinates: coefficient windows from t^{-1} downward
    #[serde(default)]
    pub x0: Option<Vec<Vec<u32>>>,
    #[serde(default)]
    pub q_param: Option<i64>,
}

pub fn poly_from_config(coeffs: &[u32], fq: &Fq) -> Result<Poly> {
    let mut out = Vec::with_capacity(coeffs.len());
    for &c in coeffs {
        if c >= fq.q {
            return Err(Error::invalid(format!("coefficient {c} out of range for q = {}", fq.q)));
        }
        out.push(c as FqElem);
    }
    Ok(Poly::from_coeffs(out))
}

pub fn matrix_from_config(rows: &[Vec<Vec<u32>>], fq: &Fq) -> Result<PolyMatrix> {
    let n = rows.len();
    let mut out = PolyMatrix::zeros(n, n);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != n {
            return Err(Error::invalid("matrix must be square"));
        }
        for (j, entry) in row.iter().enumerate() {
            out[(i, j)] = poly_from_config(entry, fq)?;
        }
    }
    Ok(out)
}

impl PairConfig {
    pub fn build(&self, fq: &Fq) -> Result<QuadricPair> {
        let m1 = matrix_from_config(&self.m1, fq)?;
        let m2 = matrix_from_config(&self.m2, fq)?;
        let n = m1.rows;
        let modulus = match &self.modulus {
            Some(m) => poly_from_config(m, fq)?,
            None => Poly::one(),
        };
        let b = match &self.b {
            Some(rows) => rows
                .iter()
                .map(|r| poly_from_config(r, fq))
                .collect::<Result<Vec<_>>>()?,
            None => vec![Poly::zero(); n],
        };
        QuadricPair::new(m1, m2, modulus, b, fq)
    }
}

impl CountConfig {
    pub fn build(&self, pair: QuadricPair, fq: &Fq) -> Result<crate::circle::CountJob> {
        let n = pair.n;
        let l_param = self.l_param.unwrap_or(2);
        let x0 = match &self.x0 {
            Some(rows) => rows
                .iter()
                .map(|w| {
                    let window: Vec<FqElem> = w.iter().map(|&c| c as FqElem).collect();
                    let prec = window.len() as i64 + l_param + 8;
                    Laurent::from_window(-1, prec, window)
                })
                .collect(),
            None => vec![Laurent::zero(); n],
        };
        let mut job =
            crate::circle::CountJob::new(pair, Poly::t_pow(self.deg_p), x0, l_param, fq)?;
        if let Some(q) = self.q_param {
            // both integer realizations of the Q window are accepted
            let canonical = job.q_param;
            if q != canonical && q != canonical + 1 && q + 1 != canonical {
                return Err(Error::invalid(format!(
                    "q_param {q} is not an admissible realization (canonical {canonical})"
                )));
            }
            job.q_param = q;
        }
        Ok(job)
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig> {
        serde_json::from_str(text).map_err(|e| Error::invalid(format!("config parse: {e}")))
    }

    pub fn build_field(&self) -> Result<Fq> {
        self.field.build()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_build() {
        let text = r#"{
            "field": {"p": 3, "ell0": 1},
            "partition": {"q_param": 2},
            "pair": {
                "m1": [[[1],[0]],[[0],[1]]],
                "m2": [[[0],[1]],[[1],[0]]]
            }
        }"#;
        let cfg = RunConfig::parse(text).unwrap();
        let fq = cfg.build_field().unwrap();
        assert_eq!(fq.q, 3);
        let pair = cfg.pair.as_ref().unwrap().build(&fq).unwrap();
        assert_eq!(pair.n, 2);
    }

    #[test]
    fn even_q_rejected_with_hypothesis_message() {
        let text = r#"{"field": {"p": 2, "ell0": 2}}"#;
        let cfg = RunConfig::parse(text).unwrap();
        let err = cfg.build_field().unwrap_err();
        assert!(format!("{err}").contains("odd"));
    }

    #[test]
    fn coefficient_range_checked() {
        let fq = FieldSpec::new(3, 1).build().unwrap();
        assert!(poly_from_config(&[5], &fq).is_err());
    }
}
