//! Channel files, CSV number formatting and run manifests.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use secrecy_core::linalg::{ComplexMatrix, C64};
use secrecy_core::secrecy::{Eavesdropper, SecrecyProblem};

/// `%.12g`: 12 significant digits, trailing zeros dropped, exponent form
/// outside `[1e-5, 1e12)`.
pub fn fmt12(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim(format!("{x:.decimals$}"))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim(mantissa.to_string()), exp.abs())
    }
}

fn trim(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum MatrixJson {
    Rows(Vec<Vec<[f64; 2]>>),
    Flat(Vec<[f64; 2]>),
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum NoiseJson {
    One(f64),
    PerAntenna(Vec<f64>),
}

/// Channel input file. Matrices are arrays of rows of `[re, im]`, or flat
/// row-major arrays of `[re, im]` (then `N` gives the row count unless a
/// single-antenna eavesdropper fixes it).
#[derive(Debug, Deserialize)]
pub struct ChannelFile {
    #[serde(rename = "Hs")]
    hs: MatrixJson,
    eavesdroppers: Vec<MatrixJson>,
    sigma2: Vec<NoiseJson>,
    #[serde(rename = "P")]
    pub power: f64,
    #[serde(rename = "N", default)]
    n: Option<usize>,
    /// IT limits for `solve-pa`.
    #[serde(default)]
    pub gamma: Option<Vec<f64>>,
}

fn to_matrix(m: &MatrixJson, rows: Option<usize>, what: &str) -> Result<ComplexMatrix> {
    match m {
        MatrixJson::Rows(r) => {
            let cols = r.first().map_or(0, Vec::len);
            if r.iter().any(|row| row.len() != cols) {
                bail!("{what}: ragged rows");
            }
            let data = r.iter().flatten().map(|[re, im]| C64::new(*re, *im)).collect();
            Ok(ComplexMatrix::from_row_major(r.len(), cols, data)?)
        }
        MatrixJson::Flat(v) => {
            let rows = rows.ok_or_else(|| anyhow!("{what}: flat matrix needs \"N\""))?;
            if rows == 0 || v.len() % rows != 0 {
                bail!("{what}: {} entries do not fill {rows} rows", v.len());
            }
            let data = v.iter().map(|[re, im]| C64::new(*re, *im)).collect();
            Ok(ComplexMatrix::from_row_major(rows, v.len() / rows, data)?)
        }
    }
}

impl ChannelFile {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    fn rows(&self) -> Option<usize> {
        if let MatrixJson::Rows(r) = &self.hs {
            return Some(r.len());
        }
        if self.n.is_some() {
            return self.n;
        }
        self.eavesdroppers
            .iter()
            .zip(&self.sigma2)
            .find_map(|(e, s)| match (e, s) {
                (MatrixJson::Flat(v), NoiseJson::One(_)) => Some(v.len()),
                (MatrixJson::Rows(r), _) => Some(r.len()),
                _ => None,
            })
    }

    pub fn hs(&self) -> Result<ComplexMatrix> {
        to_matrix(&self.hs, self.rows(), "Hs")
    }

    pub fn problem(&self) -> Result<SecrecyProblem> {
        if self.eavesdroppers.len() != self.sigma2.len() {
            bail!(
                "{} noise entries for {} eavesdroppers",
                self.sigma2.len(),
                self.eavesdroppers.len()
            );
        }
        let rows = self.rows();
        let hs = self.hs()?;
        let eav = self
            .eavesdroppers
            .iter()
            .zip(&self.sigma2)
            .enumerate()
            .map(|(i, (e, s))| {
                let h = to_matrix(e, rows, &format!("eavesdropper {i}"))?;
                Ok(match s {
                    NoiseJson::One(s) => {
                        if h.cols() != 1 {
                            bail!("eavesdropper {i}: one noise variance for {} antennas", h.cols());
                        }
                        Eavesdropper::Single {
                            h: h.col(0),
                            sigma2: *s,
                        }
                    }
                    NoiseJson::PerAntenna(s) => Eavesdropper::Multi { h, sigma2: s.clone() },
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SecrecyProblem::new(hs, eav, self.power)?)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// `<out>.manifest.json`.
pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OutputDigest {
    pub path: String,
    pub sha256: String,
}

pub fn write_with_manifest<M: Serialize>(out: &Path, body: &[u8], manifest: &M) -> Result<()> {
    std::fs::write(out, body).with_context(|| format!("writing {}", out.display()))?;
    let mut value = serde_json::to_value(manifest)?;
    if let Some(obj) = value.as_object_mut() {
        obj.insert(
            "output".into(),
            serde_json::to_value(OutputDigest {
                path: out.display().to_string(),
                sha256: sha256_hex(body),
            })?,
        );
    }
    let path = manifest_path(out);
    std::fs::write(&path, serde_json::to_string_pretty(&value)? + "\n")
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn code_version() -> String {
    format!("secrecy-bench {}", env!("CARGO_PKG_VERSION"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_digits() {
        assert_eq!(fmt12(1.0), "1");
        assert_eq!(fmt12(0.1), "0.1");
        assert_eq!(fmt12(2f64.ln()), "0.69314718056");
        assert_eq!(fmt12(-123456.7890123456), "-123456.789012");
        assert_eq!(fmt12(1.5e-7), "1.5e-07");
        assert_eq!(fmt12(9.9999999999996), "10");
        assert_eq!(fmt12(6.02214076e23), "6.02214076e+23");
        assert_eq!(fmt12(1e12), "1e+12");
    }

    #[test]
    fn nested_and_flat_files() {
        let nested = r#"{"Hs": [[[1,0],[0,0]],[[0,0],[1,0]]], "eavesdroppers": [[[0.5,0],[0,0.5]]],
                         "sigma2": [1.0], "P": 2.0}"#;
        let f: ChannelFile = serde_json::from_str(nested).unwrap();
        let p = f.problem().unwrap();
        assert_eq!(p.tx_antennas(), 2);
        assert_eq!(p.hs().cols(), 2);
        let flat = r#"{"Hs": [[1,0],[0,0],[0,0],[1,0]], "eavesdroppers": [[[0.5,0],[0,0.5]]],
                       "sigma2": [1.0], "P": 2.0}"#;
        let g: ChannelFile = serde_json::from_str(flat).unwrap();
        assert_eq!(g.problem().unwrap(), p);
        let multi = r#"{"Hs": [[1,0],[0,0],[0,0],[1,0]], "N": 2,
                        "eavesdroppers": [[[1,0],[0,0],[0,0],[1,0]]], "sigma2": [[1.0, 2.0]], "P": 1.0}"#;
        let h: ChannelFile = serde_json::from_str(multi).unwrap();
        assert!(!h.problem().unwrap().is_single_antenna());
    }
}
