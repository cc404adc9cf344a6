use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use cvstab::criteria::{CriterionFamily, EvalOptions, FormulaVariant};
use cvstab::io::{load_network, InitialCase, NetworkDocument};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Check,
    Certify,
    Simulate,
    ReproducePaper,
}

/// Validated settings for one invocation.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub command: Command,
    pub input: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub h: f64,
    pub t_end: f64,
    pub stride: usize,
    pub families: Vec<CriterionFamily>,
    pub strict_paper_formulas: bool,
    pub refine_two_norm: bool,
    pub cases: Vec<InitialCase>,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.h.is_finite() && self.h > 0.0) {
            bail!("--h must be positive, got {}", self.h);
        }
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            bail!("--t-end must be positive, got {}", self.t_end);
        }
        if self.stride == 0 {
            bail!("--stride must be at least 1");
        }
        if self.families.is_empty() {
            bail!("--families selected nothing");
        }
        if let Some(p) = &self.input {
            if !p.is_file() {
                bail!("input file {} does not exist", p.display());
            }
        }
        Ok(())
    }

    pub fn eval_options(&self) -> EvalOptions {
        let variant = if self.strict_paper_formulas {
            FormulaVariant::Printed
        } else {
            FormulaVariant::LambdaConsistent
        };
        EvalOptions {
            variant,
            params: None,
        }
    }

    pub fn load(&self) -> Result<NetworkDocument> {
        let path = self
            .input
            .as_deref()
            .context("--input is required for this command")?;
        load_network(path).with_context(|| format!("reading {}", path.display()))
    }

    /// Output directory, created on first use.
    pub fn out_dir(&self) -> Result<Option<&Path>> {
        match &self.out {
            Some(dir) => {
                std::fs::create_dir_all(dir)
                    .with_context(|| format!("creating {}", dir.display()))?;
                Ok(Some(dir))
            }
            None => Ok(None),
        }
    }
}

/// Accepts `all`, or a comma list of `T1T2`-style names and `MMatrix`.
pub fn parse_families(list: Option<&[String]>) -> Result<Vec<CriterionFamily>> {
    let Some(list) = list else {
        return Ok(CriterionFamily::ALL.to_vec());
    };
    let mut out = Vec::new();
    for name in list.iter().map(|s| s.trim()).filter(|s| !s.is_empty()) {
        if name.eq_ignore_ascii_case("all") {
            out.extend(CriterionFamily::ALL);
            continue;
        }
        out.push(
            name.parse::<CriterionFamily>()
                .map_err(|e| anyhow::anyhow!("--families: {e}"))?,
        );
    }
    out.sort();
    out.dedup();
    Ok(out)
}
