use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use cvstab::analyze::{
    estimate_equilibrium, estimate_rate, l1_series, l2_series, m_series, MonotoneSeries,
    MonotoneTolerance,
};
use cvstab::certify::{certify_families, Certificate, CertifyOptions};
use cvstab::criteria::CriterionFamily;
use cvstab::decompose::RealSystem;
use cvstab::io::InitialCase;
use cvstab::sim::{simulate, History};
use serde::Serialize;

/// ξ and ε used for one diagnostic series.
#[derive(Clone, Debug, Serialize)]
pub struct SeriesSummary {
    pub family: CriterionFamily,
    pub epsilon: f64,
    pub nonincreasing: bool,
    pub max_rise: f64,
    pub first_violation: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CaseReport {
    pub run: String,
    pub label: String,
    pub csv: Option<String>,
    pub diverged: Option<String>,
    /// Block layout `(z1R..znR, z1I..znI)`.
    pub final_state: Option<Vec<f64>>,
    pub equilibrium: Option<Vec<f64>>,
    pub settled: bool,
    pub max_deviation: Option<f64>,
    pub residual: Option<f64>,
    pub rate: Option<f64>,
    pub rate_error: Option<String>,
    pub diagnostics: Vec<SeriesSummary>,
}

impl CaseReport {
    pub fn ok(&self) -> bool {
        self.diverged.is_none() && self.settled
    }
}

/// Rate certificates used for the appended `M`, `L1`, `L2` columns (feasible ones only).
pub fn diagnostic_certificates(
    sys: &RealSystem,
    opts: &CertifyOptions,
) -> Result<Vec<Certificate>> {
    let fams = [
        CriterionFamily::InfNormT1T2,
        CriterionFamily::OneNormT7T8,
        CriterionFamily::TwoNormT13T14,
    ];
    let mut certs: Vec<Certificate> = certify_families(sys, &fams, opts)?
        .into_iter()
        .filter(|c| c.feasible)
        .collect();
    certs.sort_by_key(|c| c.family);
    Ok(certs)
}

pub struct CaseSpec<'a> {
    pub sys: &'a RealSystem,
    pub case: &'a InitialCase,
    pub file_stem: String,
    pub h: f64,
    pub t_end: f64,
    pub stride: usize,
    pub certs: &'a [Certificate],
}

pub fn run_case(spec: &CaseSpec<'_>, out: Option<&Path>) -> Result<CaseReport> {
    let mut report = CaseReport {
        run: spec.file_stem.clone(),
        label: spec.case.label.clone(),
        csv: None,
        diverged: None,
        final_state: None,
        equilibrium: None,
        settled: false,
        max_deviation: None,
        residual: None,
        rate: None,
        rate_error: None,
        diagnostics: Vec::new(),
    };
    let traj = match simulate(
        spec.sys,
        &History::from_complex(&spec.case.z0),
        spec.t_end,
        spec.h,
    ) {
        Ok(t) => t,
        Err(e @ cvstab::Error::Divergence { .. }) => {
            report.diverged = Some(e.to_string());
            return Ok(report);
        }
        Err(e) => return Err(e.into()),
    };
    report.final_state = Some(traj.final_state().to_vec());
    let eq = estimate_equilibrium(&traj, spec.sys.network())?;
    report.settled = eq.settled;
    report.max_deviation = Some(eq.max_deviation);
    report.residual = Some(eq.residual);
    report.equilibrium = Some(eq.best().to_vec());

    let xi_rate = spec
        .certs
        .iter()
        .find(|c| c.family == CriterionFamily::InfNormT1T2)
        .map(|c| c.xi.clone())
        .unwrap_or_else(|| vec![1.0; spec.sys.dim()]);
    match estimate_rate(&traj, &eq, &xi_rate) {
        Ok(r) => report.rate = Some(r.rate),
        Err(e) => report.rate_error = Some(e.to_string()),
    }

    let tol = MonotoneTolerance::default();
    let mut columns: Vec<(&str, MonotoneSeries)> = Vec::new();
    for c in spec.certs {
        let (name, series) = match c.family {
            CriterionFamily::InfNormT1T2 => {
                ("M", m_series(&traj, spec.sys, &c.xi, c.epsilon, tol)?)
            }
            CriterionFamily::OneNormT7T8 => {
                ("L1", l1_series(&traj, spec.sys, &c.xi, c.epsilon, tol)?)
            }
            CriterionFamily::TwoNormT13T14 => (
                "L2",
                l2_series(
                    &traj,
                    spec.sys,
                    &c.xi,
                    c.epsilon,
                    c.margins.params.as_ref(),
                    tol,
                )?,
            ),
            _ => continue,
        };
        report.diagnostics.push(SeriesSummary {
            family: c.family,
            epsilon: c.epsilon,
            nonincreasing: series.is_nonincreasing(),
            max_rise: series.max_rise,
            first_violation: series.first_violation,
        });
        columns.push((name, series));
    }

    if let Some(dir) = out {
        let name = format!("{}.csv", spec.file_stem);
        let path = dir.join(&name);
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        let extra: Vec<(&str, &[f64])> = columns
            .iter()
            .map(|(n, s)| (*n, s.values.as_slice()))
            .collect();
        let mut w = BufWriter::new(file);
        traj.write_csv_with(&mut w, spec.stride, None, &extra)?;
        w.flush()?;
        report.csv = Some(name);
    }
    Ok(report)
}
