//! Lifted spectrahedral representations: a set in x-space described as the
//! projection of {(x, u) : pencils(x, u) >= 0, affine rows = 0}.
//!
//! Serialized form is JSON with symmetric matrices packed as lower
//! triangles; `format_version` gates reader compatibility.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::symmat::SymMat;

pub const FORMAT_VERSION: u32 = 1;

/// A0 + sum_i x_i * AX_i + sum_j u_j * BU_j, constrained PSD.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearPencil {
    pub size: usize,
    pub a0: SymMat,
    pub ax: Vec<SymMat>,
    pub bu: Vec<SymMat>,
}

impl LinearPencil {
    pub fn eval(&self, x: &[f64], u: &[f64]) -> SymMat {
        debug_assert_eq!(x.len(), self.ax.len());
        debug_assert_eq!(u.len(), self.bu.len());
        let mut m = self.a0.clone();
        for (xi, a) in x.iter().zip(&self.ax) {
            m.axpy(*xi, a);
        }
        for (uj, b) in u.iter().zip(&self.bu) {
            m.axpy(*uj, b);
        }
        m
    }

    fn validate(&self, n: usize, num_lifted: usize) -> Result<()> {
        if self.ax.len() != n || self.bu.len() != num_lifted {
            return Err(Error::DimensionMismatch(format!(
                "pencil has {} x slots and {} lifted slots, expected {n} and {num_lifted}",
                self.ax.len(),
                self.bu.len()
            )));
        }
        for m in std::iter::once(&self.a0).chain(&self.ax).chain(&self.bu) {
            if m.dim() != self.size {
                return Err(Error::DimensionMismatch(format!(
                    "pencil coefficient dim {} != declared size {}",
                    m.dim(),
                    self.size
                )));
            }
        }
        Ok(())
    }
}

/// x_coeffs . x + u_coeffs . u + constant = 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineRow {
    pub x_coeffs: Vec<f64>,
    pub u_coeffs: Vec<f64>,
    pub constant: f64,
}

impl AffineRow {
    pub fn eval(&self, x: &[f64], u: &[f64]) -> f64 {
        let sx: f64 = self.x_coeffs.iter().zip(x).map(|(a, b)| a * b).sum();
        let su: f64 = self.u_coeffs.iter().zip(u).map(|(a, b)| a * b).sum();
        sx + su + self.constant
    }
}

/// Provenance and construction parameters carried alongside a
/// representation. `timestamp` is excluded from content hashing so that
/// reruns with identical inputs emit byte-identical content elsewhere.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RepMetadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub construction: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_hash: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<u64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub unbounded_warning: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiftedRepresentation {
    pub format_version: u32,
    /// Ambient (projected) dimension.
    pub n: usize,
    /// Number of auxiliary lifted coordinates.
    pub num_lifted: usize,
    pub pencils: Vec<LinearPencil>,
    pub equalities: Vec<AffineRow>,
    #[serde(default)]
    pub metadata: RepMetadata,
}

impl LiftedRepresentation {
    pub fn new(n: usize, num_lifted: usize) -> Self {
        LiftedRepresentation {
            format_version: FORMAT_VERSION,
            n,
            num_lifted,
            pencils: Vec::new(),
            equalities: Vec::new(),
            metadata: RepMetadata::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::FormatVersion {
                found: self.format_version,
                supported: FORMAT_VERSION,
            });
        }
        for p in &self.pencils {
            p.validate(self.n, self.num_lifted)?;
        }
        for r in &self.equalities {
            if r.x_coeffs.len() != self.n || r.u_coeffs.len() != self.num_lifted {
                return Err(Error::DimensionMismatch(format!(
                    "equality row has {}/{} coefficients, expected {}/{}",
                    r.x_coeffs.len(),
                    r.u_coeffs.len(),
                    self.n,
                    self.num_lifted
                )));
            }
        }
        if self.pencils.is_empty() && self.equalities.is_empty() {
            return Err(Error::InvalidInput(
                "representation with no pencils and no equalities".into(),
            ));
        }
        Ok(())
    }

    /// Direct (non-projected) feasibility of a full point (x, u).
    pub fn full_point_feasible(&self, x: &[f64], u: &[f64], tol: f64) -> bool {
        self.pencils
            .iter()
            .all(|p| p.eval(x, u).min_eigenvalue() >= -tol)
            && self.equalities.iter().all(|r| r.eval(x, u).abs() <= tol)
    }

    /// Smallest pencil eigenvalue over all blocks at a full point.
    pub fn min_pencil_eigenvalue(&self, x: &[f64], u: &[f64]) -> f64 {
        self.pencils
            .iter()
            .map(|p| p.eval(x, u).min_eigenvalue())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        self.validate()?;
        let mut out = serde_json::to_string_pretty(self)?;
        out.push('\n');
        fs::write(path, out)?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let rep: LiftedRepresentation = serde_json::from_str(&text)?;
        rep.validate()?;
        Ok(rep)
    }

    /// Serialized content with the timestamp cleared; input to hashing.
    pub fn hashable_content(&self) -> String {
        let mut clone = self.clone();
        clone.metadata.timestamp = None;
        serde_json::to_string(&clone).expect("representation serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::set::{ball_pencil, BallConstraint};

    fn disk_rep() -> LiftedRepresentation {
        let ball = BallConstraint::new(vec![0.0, 0.0], 1.0).unwrap();
        let mut rep = LiftedRepresentation::new(2, 0);
        rep.pencils.push(ball_pencil(&ball));
        rep
    }

    #[test]
    fn validate_catches_dimension_mismatch() {
        let mut rep = disk_rep();
        assert!(rep.validate().is_ok());
        rep.pencils[0].ax.pop();
        assert!(rep.validate().is_err());
    }

    #[test]
    fn full_point_feasibility_matches_set_membership() {
        let rep = disk_rep();
        assert!(rep.full_point_feasible(&[0.3, 0.4], &[], 1e-12));
        assert!(rep.full_point_feasible(&[0.6, 0.8], &[], 1e-9));
        assert!(!rep.full_point_feasible(&[0.9, 0.9], &[], 1e-9));
    }

    #[test]
    fn json_round_trip_preserves_everything() {
        let dir = std::env::temp_dir().join("sdprep-rep-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("disk.rep.json");
        let mut rep = disk_rep();
        rep.metadata.construction = Some("ball".into());
        rep.metadata.order = Some(1);
        rep.metadata.timestamp = Some(1_700_000_000);
        rep.write_json(&path).unwrap();
        let back = LiftedRepresentation::read_json(&path).unwrap();
        assert_eq!(back, rep);
        // Writing the same content twice is byte identical.
        let first = std::fs::read(&path).unwrap();
        rep.write_json(&path).unwrap();
        assert_eq!(first, std::fs::read(&path).unwrap());
    }

    #[test]
    fn hashable_content_ignores_timestamp() {
        let mut a = disk_rep();
        let mut b = disk_rep();
        a.metadata.timestamp = Some(1);
        b.metadata.timestamp = Some(999);
        assert_eq!(a.hashable_content(), b.hashable_content());
    }

    #[test]
    fn future_format_version_is_rejected() {
        let mut rep = disk_rep();
        rep.format_version = 99;
        match rep.validate() {
            Err(Error::FormatVersion { found, .. }) => assert_eq!(found, 99),
            other => panic!("expected FormatVersion error, got {other:?}"),
        }
    }
}
