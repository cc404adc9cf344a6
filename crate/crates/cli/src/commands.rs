use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use cvstab::certify::{certify_families, Certificate, CertifyOptions};
use cvstab::criteria::CriterionFamily;
use cvstab::decompose::{decompose, RealSystem};
use cvstab::io::{write_matrix_csv, InitialCase, NetworkDocument};
use cvstab::mmatrix::{is_m_matrix, MMatrixVerdict};
use cvstab::model::{derive_bounds, ActivationClass};
use cvstab::reference;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::runs::{diagnostic_certificates, run_case, CaseReport, CaseSpec};

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let path = dir.join(name);
    let mut w = BufWriter::new(
        File::create(&path).with_context(|| format!("creating {}", path.display()))?,
    );
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn build_system(doc: &NetworkDocument) -> Result<RealSystem> {
    let bounds = derive_bounds(&doc.network.activations)?;
    Ok(decompose(&doc.network, &bounds)?)
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|r| m.row(r).iter().copied().collect())
        .collect()
}

fn print_matrix(name: &str, m: &DMatrix<f64>) {
    println!("{name} =");
    for r in 0..m.nrows() {
        let cells: Vec<String> = m.row(r).iter().map(|v| format!("{v:10.4}")).collect();
        println!("  [{}]", cells.join(" "));
    }
}

fn fmt_eigs(v: &MMatrixVerdict) -> String {
    let parts: Vec<String> = v
        .eigenvalues
        .iter()
        .map(|(re, im)| {
            if im.abs() < 1e-12 {
                format!("{re:.4}")
            } else {
                format!("{re:.4}{im:+.4}i")
            }
        })
        .collect();
    parts.join(", ")
}

fn write_matrices(dir: &Path, sys: &RealSystem) -> Result<()> {
    let cmp = sys.comparison();
    let list: [(&str, &DMatrix<f64>); 6] = [
        ("D_bar", &cmp.d_bar),
        ("A_bar", &cmp.a_bar),
        ("F_bar", &cmp.f_bar),
        ("B_bar", &cmp.b_bar),
        ("G_bar", &cmp.g_bar),
        ("Delta_bar", &sys.sign_gap().delta_bar),
    ];
    for (name, m) in list {
        write_matrix_csv(
            BufWriter::new(File::create(dir.join(format!("{name}.csv")))?),
            m,
        )?;
    }
    write_matrix_csv(
        BufWriter::new(File::create(dir.join("C.csv"))?),
        &sys.stability_matrix(),
    )?;
    write_matrix_csv(
        BufWriter::new(File::create(dir.join("C_corrected.csv"))?),
        &sys.corrected_stability_matrix(),
    )?;
    Ok(())
}

#[derive(Serialize)]
struct CheckReport {
    n: usize,
    f_class: Vec<ActivationClass>,
    g_class: Vec<ActivationClass>,
    stability_matrix: Vec<Vec<f64>>,
    corrected_stability_matrix: Vec<Vec<f64>>,
    plain: MMatrixVerdict,
    corrected: MMatrixVerdict,
}

/// Passes when the sign-corrected matrix is a nonsingular M-matrix.
pub fn check(cfg: &RunConfig) -> Result<bool> {
    let doc = cfg.load()?;
    let sys = build_system(&doc)?;
    let cmp = sys.comparison();
    print_matrix("D_bar", &cmp.d_bar);
    print_matrix("A_bar", &cmp.a_bar);
    print_matrix("F_bar", &cmp.f_bar);
    print_matrix("B_bar", &cmp.b_bar);
    print_matrix("G_bar", &cmp.g_bar);
    print_matrix("Delta_bar", &sys.sign_gap().delta_bar);
    let c = sys.stability_matrix();
    let cc = sys.corrected_stability_matrix();
    let plain = is_m_matrix(&c)?;
    let corrected = is_m_matrix(&cc)?;
    println!();
    println!(
        "D - AF - BG:          M-matrix = {}  eigenvalues: {}",
        plain.is_m_matrix,
        fmt_eigs(&plain)
    );
    println!(
        "D - AF - BG + Delta:  M-matrix = {}  eigenvalues: {}",
        corrected.is_m_matrix,
        fmt_eigs(&corrected)
    );
    if let Some(xi) = &corrected.witness {
        println!("witness xi (corrected): {xi:?}");
    }
    let pass = corrected.is_m_matrix;
    if let Some(dir) = cfg.out_dir()? {
        write_matrices(dir, &sys)?;
        let bounds = sys.bounds();
        let report = CheckReport {
            n: sys.n(),
            f_class: bounds.f_class.clone(),
            g_class: bounds.g_class.clone(),
            stability_matrix: rows(&c),
            corrected_stability_matrix: rows(&cc),
            plain,
            corrected,
        };
        write_json(dir, "report.json", &report)?;
    }
    Ok(pass)
}

fn certify_options(cfg: &RunConfig) -> CertifyOptions {
    CertifyOptions {
        eval: cfg.eval_options(),
        refine_two_norm: cfg.refine_two_norm,
    }
}

fn print_certificates(certs: &[Certificate], skipped: &[CriterionFamily]) {
    println!(
        "{:<8} {:>8} {:>10} {:>12}  xi",
        "family", "feasible", "epsilon", "slack"
    );
    for c in certs {
        let xi: Vec<String> = c.xi.iter().map(|x| format!("{x:.4}")).collect();
        println!(
            "{:<8} {:>8} {:>10.6} {:>12.4e}  [{}]",
            c.family.name(),
            c.feasible,
            c.epsilon,
            c.slack,
            xi.join(", ")
        );
    }
    for f in skipped {
        println!("{:<8} skipped: needs H1 activations", f.name());
    }
}

#[derive(Serialize)]
struct CertifyReport<'a> {
    variant: cvstab::criteria::FormulaVariant,
    refine_two_norm: bool,
    feasible: Vec<CriterionFamily>,
    infeasible: Vec<CriterionFamily>,
    skipped: &'a [CriterionFamily],
}

/// Passes when every applicable requested family certifies.
pub fn certify(cfg: &RunConfig) -> Result<bool> {
    let doc = cfg.load()?;
    let sys = build_system(&doc)?;
    let opts = certify_options(cfg);
    let certs = certify_families(&sys, &cfg.families, &opts)?;
    let skipped: Vec<CriterionFamily> = cfg
        .families
        .iter()
        .copied()
        .filter(|f| !certs.iter().any(|c| c.family == *f))
        .collect();
    print_certificates(&certs, &skipped);
    let pass = certs.iter().all(|c| c.feasible);
    if let Some(dir) = cfg.out_dir()? {
        write_json(dir, "certificates.json", &certs)?;
        let report = CertifyReport {
            variant: opts.eval.variant,
            refine_two_norm: opts.refine_two_norm,
            feasible: certs
                .iter()
                .filter(|c| c.feasible)
                .map(|c| c.family)
                .collect(),
            infeasible: certs
                .iter()
                .filter(|c| !c.feasible)
                .map(|c| c.family)
                .collect(),
            skipped: &skipped,
        };
        write_json(dir, "report.json", &report)?;
    }
    Ok(pass)
}

fn print_cases(cases: &[CaseReport]) {
    for c in cases {
        match (&c.diverged, &c.equilibrium) {
            (Some(msg), _) => println!("{:<22} DIVERGED  {msg}", c.run),
            (None, Some(z)) => {
                let z: Vec<String> = z.iter().map(|v| format!("{v:.6}")).collect();
                let rate = c
                    .rate
                    .map(|r| format!("{r:.4}"))
                    .unwrap_or_else(|| "-".into());
                let diag: Vec<String> = c
                    .diagnostics
                    .iter()
                    .map(|d| {
                        format!(
                            "{}:{}",
                            d.family.name(),
                            if d.nonincreasing { "ok" } else { "rise" }
                        )
                    })
                    .collect();
                println!(
                    "{:<22} settled={:<5} residual={:.2e} rate={rate} eq(re..,im..)=[{}] {}",
                    c.run,
                    c.settled,
                    c.residual.unwrap_or(f64::NAN),
                    z.join(", "),
                    diag.join(" ")
                );
            }
            _ => {}
        }
    }
}

#[derive(Serialize)]
struct SimulateReport<'a> {
    h: f64,
    t_end: f64,
    stride: usize,
    state_layout: &'static str,
    certificates: &'a [Certificate],
    cases: &'a [CaseReport],
}

const LAYOUT: &str =
    "equilibrium and final_state are (z1R..znR, z1I..znI); CSV columns are interleaved per node";

/// Passes when every case settles without diverging.
pub fn simulate(cfg: &RunConfig) -> Result<bool> {
    let doc = cfg.load()?;
    let sys = build_system(&doc)?;
    let cases: Vec<InitialCase> = if cfg.cases.is_empty() {
        doc.cases.clone()
    } else {
        cfg.cases.clone()
    };
    if cases.is_empty() {
        anyhow::bail!("input has no initial cases; add a `cases` array");
    }
    let certs = diagnostic_certificates(&sys, &certify_options(cfg))?;
    let out = cfg.out_dir()?;
    let reports = cases
        .par_iter()
        .enumerate()
        .map(|(k, case)| {
            let spec = CaseSpec {
                sys: &sys,
                case,
                file_stem: format!("traj_case{}", k + 1),
                h: cfg.h,
                t_end: cfg.t_end,
                stride: cfg.stride,
                certs: &certs,
            };
            run_case(&spec, out)
        })
        .collect::<Result<Vec<_>>>()?;
    print_cases(&reports);
    if let Some(dir) = out {
        let report = SimulateReport {
            h: cfg.h,
            t_end: cfg.t_end,
            stride: cfg.stride,
            state_layout: LAYOUT,
            certificates: &certs,
            cases: &reports,
        };
        write_json(dir, "report.json", &report)?;
    }
    Ok(reports.iter().all(CaseReport::ok))
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckRow {
    pub check: String,
    pub expected: String,
    pub measured: String,
    pub pass: bool,
}

fn row(
    check: impl Into<String>,
    expected: impl Into<String>,
    measured: impl Into<String>,
    pass: bool,
) -> CheckRow {
    CheckRow {
        check: check.into(),
        expected: expected.into(),
        measured: measured.into(),
        pass,
    }
}

fn inf_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn eig_error(v: &MMatrixVerdict, want: &[f64]) -> f64 {
    let mut got = v.eigenvalues.clone();
    got.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut want = want.to_vec();
    want.sort_by(f64::total_cmp);
    if got.len() != want.len() {
        return f64::INFINITY;
    }
    got.iter()
        .zip(&want)
        .fold(0.0f64, |m, (g, w)| m.max((g.0 - w).abs()).max(g.1.abs()))
}

#[derive(Serialize)]
struct ReproduceReport<'a> {
    h: f64,
    t_end: f64,
    stride: usize,
    state_layout: &'static str,
    reference_equilibrium: [f64; 4],
    plain: &'a MMatrixVerdict,
    corrected: &'a MMatrixVerdict,
    constant_delay: &'a [CaseReport],
    varying_delay: &'a CaseReport,
    alternate_input: &'a CaseReport,
    checks: &'a [CheckRow],
}

/// Runs the bundled two-neuron experiments and compares against the reference values.
pub fn reproduce_paper(cfg: &RunConfig) -> Result<bool> {
    let out = cfg.out_dir()?;
    let opts = certify_options(cfg);
    let constant = reference::constant_delay();
    let varying = reference::varying_delay();
    let alt = reference::alt_input();
    let sys = build_system(&constant)?;
    let sys_var = build_system(&varying)?;
    let sys_alt = build_system(&alt)?;

    let plain = is_m_matrix(&sys.stability_matrix())?;
    let corrected = is_m_matrix(&sys.corrected_stability_matrix())?;
    let certs = certify_families(&sys, &cfg.families, &opts)?;
    let diag = diagnostic_certificates(&sys, &opts)?;
    let diag_var = diagnostic_certificates(&sys_var, &opts)?;
    let diag_alt = diagnostic_certificates(&sys_alt, &opts)?;

    // (system, case, file stem, certificates)
    let mut jobs: Vec<(&RealSystem, &InitialCase, String, &[Certificate])> = constant
        .cases
        .iter()
        .enumerate()
        .map(|(k, c)| (&sys, c, format!("traj_case{}", k + 1), diag.as_slice()))
        .collect();
    jobs.push((
        &sys_var,
        &varying.cases[0],
        "traj_varying_case1".into(),
        diag_var.as_slice(),
    ));
    jobs.push((
        &sys_alt,
        &alt.cases[0],
        "traj_alt_input_case1".into(),
        diag_alt.as_slice(),
    ));
    let mut runs = jobs
        .par_iter()
        .map(|(s, case, stem, certs)| {
            let spec = CaseSpec {
                sys: s,
                case,
                file_stem: stem.clone(),
                h: cfg.h,
                t_end: cfg.t_end,
                stride: cfg.stride,
                certs,
            };
            run_case(&spec, out)
        })
        .collect::<Result<Vec<_>>>()?;
    let alt_run = runs.pop().expect("alt run");
    let var_run = runs.pop().expect("varying run");
    let const_runs = runs;

    let target = reference::equilibrium_block();
    let mut checks = Vec::new();
    let e1 = eig_error(&plain, &reference::EIGENVALUES_PLAIN);
    checks.push(row(
        "eigenvalues of D-AF-BG",
        format!("{:?} ±1e-3", reference::EIGENVALUES_PLAIN),
        format!("max error {e1:.1e}"),
        e1 < 1e-3,
    ));
    let e2 = eig_error(&corrected, &reference::EIGENVALUES_CORRECTED);
    checks.push(row(
        "eigenvalues of D-AF-BG+Delta",
        format!("{:?} ±1e-3", reference::EIGENVALUES_CORRECTED),
        format!("max error {e2:.1e}"),
        e2 < 1e-3,
    ));
    checks.push(row(
        "D-AF-BG is not an M-matrix",
        "rejected",
        format!("M-matrix = {}", plain.is_m_matrix),
        !plain.is_m_matrix,
    ));
    checks.push(row(
        "D-AF-BG+Delta is an M-matrix",
        "accepted",
        format!("M-matrix = {}", corrected.is_m_matrix),
        corrected.is_m_matrix,
    ));
    for (k, r) in const_runs.iter().enumerate() {
        let d = r
            .final_state
            .as_deref()
            .map(|z| inf_dist(z, &target))
            .unwrap_or(f64::INFINITY);
        checks.push(row(
            format!("case {} equilibrium", k + 1),
            "reference point ±5e-3",
            format!("distance {d:.4}"),
            d < 5e-3,
        ));
        let res = r.residual.unwrap_or(f64::INFINITY);
        checks.push(row(
            format!("case {} fixed-point residual", k + 1),
            "< 1e-5",
            format!("{res:.1e}"),
            r.ok() && res < 1e-5,
        ));
    }
    let base = const_runs[0].equilibrium.clone().unwrap_or_default();
    let var_eq = var_run.equilibrium.clone().unwrap_or_default();
    let dv = inf_dist(&var_eq, &target);
    checks.push(row(
        "varying delays, equilibrium",
        "reference point ±5e-3",
        format!("distance {dv:.4}"),
        var_run.ok() && dv < 5e-3,
    ));
    let ds = inf_dist(&var_eq, &base);
    checks.push(row(
        "varying vs constant delays",
        "same equilibrium ±5e-3",
        format!("distance {ds:.1e}"),
        var_run.ok() && ds < 5e-3,
    ));
    let da = inf_dist(alt_run.equilibrium.as_deref().unwrap_or(&[]), &base);
    checks.push(row(
        "input u' moves the equilibrium",
        "> 0.05",
        format!("{da:.4}"),
        alt_run.ok() && da > 0.05,
    ));
    if let Some(c) = diag
        .iter()
        .find(|c| c.family == CriterionFamily::InfNormT1T2)
    {
        let min_rate = const_runs
            .iter()
            .map(|r| r.rate.unwrap_or(f64::NEG_INFINITY))
            .fold(f64::INFINITY, f64::min);
        checks.push(row(
            "fitted rate vs certified rate",
            format!(">= {:.4} - 0.05", c.epsilon),
            format!("min {min_rate:.4}"),
            min_rate >= c.epsilon - 0.05,
        ));
    }
    let all_runs: Vec<&CaseReport> = const_runs.iter().chain([&var_run]).collect();
    let monotone = all_runs
        .iter()
        .all(|r| !r.diagnostics.is_empty() && r.diagnostics.iter().all(|d| d.nonincreasing));
    let worst = all_runs
        .iter()
        .flat_map(|r| &r.diagnostics)
        .map(|d| d.max_rise)
        .fold(0.0, f64::max);
    checks.push(row(
        "M, L1, L2 nonincreasing",
        "no rise above tolerance",
        format!("largest rise {worst:.1e}"),
        monotone,
    ));

    print_certificates(&certs, &[]);
    println!();
    print_cases(&const_runs);
    print_cases(std::slice::from_ref(&var_run));
    print_cases(std::slice::from_ref(&alt_run));
    println!();
    for c in &checks {
        println!(
            "{} {:<34} expected {:<40} measured {}",
            if c.pass { "PASS" } else { "FAIL" },
            c.check,
            c.expected,
            c.measured
        );
    }

    if let Some(dir) = out {
        write_matrices(dir, &sys)?;
        write_json(dir, "certificates.json", &certs)?;
        let report = ReproduceReport {
            h: cfg.h,
            t_end: cfg.t_end,
            stride: cfg.stride,
            state_layout: LAYOUT,
            reference_equilibrium: reference::EQUILIBRIUM,
            plain: &plain,
            corrected: &corrected,
            constant_delay: &const_runs,
            varying_delay: &var_run,
            alternate_input: &alt_run,
            checks: &checks,
        };
        write_json(dir, "report.json", &report)?;
    }
    Ok(checks.iter().all(|c| c.pass))
}
