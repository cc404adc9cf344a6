//! JSON network documents.
//!
//! ```json
//! {
//!   "n": 2,
//!   "d": [19, 19],
//!   "A_re": [[...], [...]], "A_im": [[...], [...]],
//!   "B_re": [[...], [...]], "B_im": [[...], [...]],
//!   "u_re": [...], "u_im": [...],
//!   "delays": [[{"const": 1}, {"base": 2, "amp": 1, "phase": 0, "kind": "cos"}], ...],
//!   "activations": [{"fR": {"sigma": "bipolar", "c1": 2, "c2": 1}, "fI": ..., "gR": ..., "gI": ...}],
//!   "cases": [{"label": "case1", "re": [-4, -5], "im": [3, -1]}]
//! }
//! ```
//!
//! `cases` is optional and lists constant initial histories.

use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    ActivationSpec, ComplexActivation, ComplexMatrix, Component, Delay, DelaySpec, NetworkSpec,
    NodeActivation, Sigma, Wave,
};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComponentFile {
    pub sigma: String,
    pub c1: f64,
    pub c2: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NodeActivationFile {
    #[serde(rename = "fR")]
    pub f_re: ComponentFile,
    #[serde(rename = "fI")]
    pub f_im: ComponentFile,
    #[serde(rename = "gR")]
    pub g_re: ComponentFile,
    #[serde(rename = "gI")]
    pub g_im: ComponentFile,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DelayFile {
    Const {
        #[serde(rename = "const")]
        value: f64,
    },
    Periodic {
        base: f64,
        amp: f64,
        #[serde(default)]
        phase: f64,
        kind: Wave,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CaseFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    pub n: usize,
    pub d: Vec<f64>,
    #[serde(rename = "A_re")]
    pub a_re: Vec<Vec<f64>>,
    #[serde(rename = "A_im")]
    pub a_im: Vec<Vec<f64>>,
    #[serde(rename = "B_re")]
    pub b_re: Vec<Vec<f64>>,
    #[serde(rename = "B_im")]
    pub b_im: Vec<Vec<f64>>,
    pub u_re: Vec<f64>,
    pub u_im: Vec<f64>,
    pub delays: Vec<Vec<DelayFile>>,
    pub activations: Vec<NodeActivationFile>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cases: Vec<CaseFile>,
}

/// Constant initial history `z(t) = z0` on `[-τ̄_max, 0]`.
#[derive(Clone, Debug, PartialEq)]
pub struct InitialCase {
    pub label: String,
    pub z0: Vec<Complex64>,
}

#[derive(Clone, Debug)]
pub struct NetworkDocument {
    pub network: NetworkSpec,
    pub cases: Vec<InitialCase>,
}

fn square(name: &str, n: usize, rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(Error::Dimension(format!(
            "field `{name}` must be a {n}x{n} array"
        )));
    }
    Ok(DMatrix::from_fn(n, n, |j, k| rows[j][k]))
}

fn vector(name: &str, n: usize, v: &[f64]) -> Result<()> {
    if v.len() != n {
        return Err(Error::Dimension(format!(
            "field `{name}` has {} entries, expected {n}",
            v.len()
        )));
    }
    Ok(())
}

fn component(c: &ComponentFile) -> Result<Component> {
    Ok(Component::new(Sigma::parse(&c.sigma)?, c.c1, c.c2))
}

fn component_file(c: &Component) -> ComponentFile {
    ComponentFile {
        sigma: c.sigma.name().to_string(),
        c1: c.c1,
        c2: c.c2,
    }
}

impl NetworkFile {
    pub fn into_document(self) -> Result<NetworkDocument> {
        let n = self.n;
        vector("d", n, &self.d)?;
        vector("u_re", n, &self.u_re)?;
        vector("u_im", n, &self.u_im)?;
        let a = ComplexMatrix::new(
            square("A_re", n, &self.a_re)?,
            square("A_im", n, &self.a_im)?,
        )?;
        let b = ComplexMatrix::new(
            square("B_re", n, &self.b_re)?,
            square("B_im", n, &self.b_im)?,
        )?;
        if self.delays.len() != n || self.delays.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension(format!(
                "field `delays` must be a {n}x{n} array"
            )));
        }
        let delays = self
            .delays
            .iter()
            .flatten()
            .map(|d| match *d {
                DelayFile::Const { value } => Delay::Const(value),
                DelayFile::Periodic {
                    base,
                    amp,
                    phase,
                    kind,
                } => Delay::Periodic {
                    base,
                    amp,
                    phase,
                    wave: kind,
                },
            })
            .collect();
        let delays = DelaySpec::new(n, delays)?;
        if self.activations.len() != n {
            return Err(Error::Dimension(format!(
                "field `activations` has {} entries, expected {n}",
                self.activations.len()
            )));
        }
        let nodes = self
            .activations
            .iter()
            .map(|a| {
                Ok(NodeActivation {
                    f: ComplexActivation {
                        re: component(&a.f_re)?,
                        im: component(&a.f_im)?,
                    },
                    g: ComplexActivation {
                        re: component(&a.g_re)?,
                        im: component(&a.g_im)?,
                    },
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let u = self
            .u_re
            .iter()
            .zip(&self.u_im)
            .map(|(&r, &i)| Complex64::new(r, i))
            .collect();
        let network = NetworkSpec::new(self.d, a, b, u, delays, ActivationSpec::new(nodes)?)?;
        let cases = self
            .cases
            .iter()
            .enumerate()
            .map(|(idx, c)| {
                vector("cases.re", n, &c.re)?;
                vector("cases.im", n, &c.im)?;
                Ok(InitialCase {
                    label: c
                        .label
                        .clone()
                        .unwrap_or_else(|| format!("case{}", idx + 1)),
                    z0: c
                        .re
                        .iter()
                        .zip(&c.im)
                        .map(|(&r, &i)| Complex64::new(r, i))
                        .collect(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(NetworkDocument { network, cases })
    }

    pub fn from_network(net: &NetworkSpec, cases: &[InitialCase]) -> Self {
        let n = net.n();
        let rows = |m: &DMatrix<f64>| {
            (0..n)
                .map(|j| (0..n).map(|k| m[(j, k)]).collect())
                .collect()
        };
        NetworkFile {
            n,
            d: net.d.clone(),
            a_re: rows(net.a.re()),
            a_im: rows(net.a.im()),
            b_re: rows(net.b.re()),
            b_im: rows(net.b.im()),
            u_re: net.u.iter().map(|z| z.re).collect(),
            u_im: net.u.iter().map(|z| z.im).collect(),
            delays: (0..n)
                .map(|j| {
                    (0..n)
                        .map(|k| match *net.delays.get(j, k) {
                            Delay::Const(value) => DelayFile::Const { value },
                            Delay::Periodic {
                                base,
                                amp,
                                phase,
                                wave,
                            } => DelayFile::Periodic {
                                base,
                                amp,
                                phase,
                                kind: wave,
                            },
                        })
                        .collect()
                })
                .collect(),
            activations: net
                .activations
                .nodes
                .iter()
                .map(|a| NodeActivationFile {
                    f_re: component_file(&a.f.re),
                    f_im: component_file(&a.f.im),
                    g_re: component_file(&a.g.re),
                    g_im: component_file(&a.g.im),
                })
                .collect(),
            cases: cases
                .iter()
                .map(|c| CaseFile {
                    label: Some(c.label.clone()),
                    re: c.z0.iter().map(|z| z.re).collect(),
                    im: c.z0.iter().map(|z| z.im).collect(),
                })
                .collect(),
        }
    }
}

pub fn parse_network(text: &str) -> Result<NetworkDocument> {
    let file: NetworkFile = serde_json::from_str(text)?;
    file.into_document()
}

pub fn load_network(path: &Path) -> Result<NetworkDocument> {
    parse_network(&std::fs::read_to_string(path)?)
}

/// Matrix as headerless CSV, one row per line.
pub fn write_matrix_csv<W: std::io::Write>(mut w: W, m: &DMatrix<f64>) -> Result<()> {
    for r in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|c| m[(r, c)].to_string()).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn network_to_json(net: &NetworkSpec, cases: &[InitialCase]) -> Result<String> {
    Ok(serde_json::to_string_pretty(&NetworkFile::from_network(
        net, cases,
    ))?)
}
