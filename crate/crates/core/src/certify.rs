//! Certificate search: positive weights by max-slack LP at `ε = 0`, then the
//! largest rate by bisection with the weights held fixed.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::criteria::{
    eval_criterion, linearize, CriterionFamily, EvalOptions, Margins, TwoNormParams,
};
use crate::decompose::RealSystem;
use crate::error::{Error, Result};
use crate::lp::{LinearProgram, LpOutcome, Relation};
use crate::mmatrix::{SLACK_TOL, WEIGHT_FLOOR};

/// Bisection stops once the bracket is narrower than this.
pub const RATE_TOL: f64 = 1e-6;

/// Rows within this distance of the optimal slack are reported as binding.
const BINDING_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub family: CriterionFamily,
    pub feasible: bool,
    pub xi: Vec<f64>,
    pub epsilon: f64,
    /// Optimal LP objective; positive iff the weights certify.
    pub slack: f64,
    pub margins: Margins,
    /// Rows attaining the optimal slack (the obstruction when infeasible).
    pub binding_rows: Vec<usize>,
}

#[derive(Clone, Debug, Default)]
pub struct CertifyOptions {
    pub eval: EvalOptions,
    /// Coordinate search over the 2-norm parameters π, ω.
    pub refine_two_norm: bool,
}

/// Max-slack LP for a rate-free family (or `MMatrix`).
pub fn find_weights(
    family: CriterionFamily,
    sys: &RealSystem,
    opts: &EvalOptions,
) -> Result<Certificate> {
    if family.has_rate() {
        return Err(Error::Precondition(format!(
            "{family} carries a rate; search weights with {} and then call max_rate",
            family.rate_free()
        )));
    }
    let form = linearize(family, sys, 0.0, opts)?;
    let dim = sys.dim();
    let nh = form.hinges.len();
    // variables: w (dim), hinge epigraphs (nh), s; w ∈ [δ, 1], Σw ≥ 1
    let nv = dim + nh + 1;
    let s_idx = nv - 1;
    let mut obj = vec![0.0; nv];
    obj[s_idx] = 1.0;
    let mut lp = LinearProgram::maximize(obj);
    for r in 0..dim {
        let mut row = vec![0.0; nv];
        for (c, v) in row.iter_mut().take(dim).enumerate() {
            *v = form.base[(r, c)];
        }
        for (t, h) in form.hinges.iter().enumerate() {
            if h.row == r {
                row[dim + t] += h.weight;
            }
        }
        row[s_idx] = 1.0;
        lp.constrain(row, Relation::Le, 0.0);
    }
    for (t, h) in form.hinges.iter().enumerate() {
        let mut row = vec![0.0; nv];
        row[dim + t] = 1.0;
        for (v, f) in row.iter_mut().zip(&h.form) {
            *v = -f;
        }
        lp.constrain(row, Relation::Ge, 0.0);
    }
    for c in 0..dim {
        lp.bounds(c, Some(WEIGHT_FLOOR), Some(1.0));
    }
    // scale anchor; otherwise an infeasible family shrinks w to the floor
    let mut sum = vec![0.0; nv];
    sum[..dim].fill(1.0);
    lp.constrain(sum, Relation::Ge, 1.0);
    lp.free(s_idx);
    let (x, slack) = match lp.solve()? {
        LpOutcome::Optimal { x, objective } => (x, objective),
        other => {
            return Err(Error::Lp(format!(
                "max-slack problem is always feasible and bounded, got {other:?}"
            )))
        }
    };
    let xi = x[..dim].to_vec();
    let margins = eval_criterion(family, sys, &xi, 0.0, opts)?;
    let binding_rows = margins
        .values
        .iter()
        .enumerate()
        .filter(|(_, v)| **v >= -slack - BINDING_TOL * (1.0 + slack.abs()))
        .map(|(r, _)| r)
        .collect();
    let feasible = slack > SLACK_TOL && margins.satisfied();
    Ok(Certificate {
        family,
        feasible,
        xi,
        epsilon: 0.0,
        slack,
        margins,
        binding_rows,
    })
}

/// Largest `ε ∈ [0, max_j d_j]` (to [`RATE_TOL`]) with every margin `≤ 0` at fixed `xi`.
pub fn max_rate(
    family: CriterionFamily,
    sys: &RealSystem,
    xi: &[f64],
    opts: &EvalOptions,
) -> Result<f64> {
    if !family.has_rate() {
        return Err(Error::Precondition(format!(
            "{family} has no rate parameter"
        )));
    }
    let at_zero = eval_criterion(family, sys, xi, 0.0, opts)?;
    if !at_zero.values.iter().all(|v| *v < 0.0) {
        return Err(Error::Precondition(format!(
            "{family} margins are not all negative at ε = 0; run find_weights({}) first",
            family.rate_free()
        )));
    }
    let ok = |eps: f64| -> Result<bool> {
        Ok(eval_criterion(family, sys, xi, eps, opts)?
            .values
            .iter()
            .all(|v| *v <= 0.0))
    };
    let mut lo = 0.0;
    let mut hi = sys.network().d.iter().copied().fold(0.0, f64::max);
    while hi - lo >= RATE_TOL {
        let mid = 0.5 * (lo + hi);
        if ok(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Full certificate for one family: weights from the rate-free LP, then the rate.
pub fn certify(
    family: CriterionFamily,
    sys: &RealSystem,
    opts: &CertifyOptions,
) -> Result<Certificate> {
    let mut eval = opts.eval.clone();
    if opts.refine_two_norm
        && matches!(family.norm(), Some(crate::norms::NormKind::Two))
        && family != CriterionFamily::TwoNormT17T18
    {
        eval.params = Some(refine_params(family.rate_free(), sys, &eval)?);
    }
    let base = find_weights(family.rate_free(), sys, &eval)?;
    if !family.has_rate() {
        return Ok(base);
    }
    if !base.feasible {
        let margins = eval_criterion(family, sys, &base.xi, 0.0, &eval)?;
        return Ok(Certificate {
            family,
            margins,
            ..base
        });
    }
    let epsilon = max_rate(family, sys, &base.xi, &eval)?;
    let margins = eval_criterion(family, sys, &base.xi, epsilon, &eval)?;
    Ok(Certificate {
        family,
        epsilon,
        margins,
        ..base
    })
}

/// Every family applicable to the activation class, feasible ones first by
/// decreasing rate, then the rest in family order.
pub fn certify_all(sys: &RealSystem, opts: &CertifyOptions) -> Result<Vec<Certificate>> {
    certify_families(sys, &CriterionFamily::ALL, opts)
}

pub fn certify_families(
    sys: &RealSystem,
    families: &[CriterionFamily],
    opts: &CertifyOptions,
) -> Result<Vec<Certificate>> {
    let h1 = sys.bounds().f_is_h1();
    let mut out = families
        .par_iter()
        .filter(|f| h1 || !f.requires_h1())
        .map(|f| certify(*f, sys, opts))
        .collect::<Result<Vec<_>>>()?;
    out.sort_by(|a, b| {
        b.feasible
            .cmp(&a.feasible)
            .then(b.epsilon.total_cmp(&a.epsilon))
            .then(a.family.cmp(&b.family))
    });
    Ok(out)
}

/// Coordinate search on `log π`, `log ω` maximizing the LP slack of a
/// rate-free 2-norm family. Starts from the options' parameters (or ones).
pub fn refine_params(
    family: CriterionFamily,
    sys: &RealSystem,
    opts: &EvalOptions,
) -> Result<TwoNormParams> {
    let n = sys.n();
    let mut params = opts
        .params
        .clone()
        .unwrap_or_else(|| TwoNormParams::ones(n));
    let score = |p: &TwoNormParams| -> Result<f64> {
        let o = EvalOptions {
            variant: opts.variant,
            params: Some(p.clone()),
        };
        Ok(find_weights(family, sys, &o)?.slack)
    };
    let mut best = score(&params)?;
    let mut step = 1.0f64;
    while step > 1.0 / 64.0 {
        let mut improved = false;
        for which in 0..8 {
            for idx in 0..n * n {
                for dir in [1.0, -1.0] {
                    let mut trial = params.clone();
                    let arr = if which < 4 {
                        &mut trial.pi[which]
                    } else {
                        &mut trial.omega[which - 4]
                    };
                    arr[idx] *= (dir * step).exp();
                    let s = score(&trial)?;
                    if s > best + 1e-12 {
                        best = s;
                        params = trial;
                        improved = true;
                        break;
                    }
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decompose::decompose;
    use crate::model::derive_bounds;
    use crate::reference;

    fn reference_system() -> RealSystem {
        let net = reference::constant_delay().network;
        let bounds = derive_bounds(&net.activations).unwrap();
        decompose(&net, &bounds).unwrap()
    }

    #[test]
    fn reference_sign_aware_family_certifies() {
        let sys = reference_system();
        let c = find_weights(CriterionFamily::InfNormT3T4, &sys, &EvalOptions::default()).unwrap();
        assert!(c.feasible, "{c:?}");
        assert!(c.margins.values.iter().all(|v| *v < 0.0));
    }

    #[test]
    fn reference_plain_families_fail() {
        let sys = reference_system();
        for fam in [CriterionFamily::MMatrix, CriterionFamily::InfNormT5T6] {
            let c = find_weights(fam, &sys, &EvalOptions::default()).unwrap();
            assert!(!c.feasible);
            assert!(c.slack <= 0.0);
            assert!(!c.binding_rows.is_empty());
        }
    }

    #[test]
    fn rate_families_need_rate_free_search() {
        let sys = reference_system();
        assert!(matches!(
            find_weights(CriterionFamily::InfNormT1T2, &sys, &EvalOptions::default()),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(
            max_rate(
                CriterionFamily::InfNormT1T2,
                &sys,
                &[1.0; 4],
                &EvalOptions::default()
            ),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn reference_rate_is_positive_and_replays() {
        let sys = reference_system();
        let c = certify(
            CriterionFamily::InfNormT1T2,
            &sys,
            &CertifyOptions::default(),
        )
        .unwrap();
        assert!(c.feasible && c.epsilon > 0.0);
        let again =
            eval_criterion(c.family, &sys, &c.xi, c.epsilon, &EvalOptions::default()).unwrap();
        assert!(again.values.iter().all(|v| *v <= 1e-12));
        let past = eval_criterion(
            c.family,
            &sys,
            &c.xi,
            c.epsilon + 2.0 * RATE_TOL,
            &EvalOptions::default(),
        )
        .unwrap();
        assert!(past.values.iter().any(|v| *v > 0.0));
    }

    #[test]
    fn certify_all_is_sorted_and_deterministic() {
        let sys = reference_system();
        let a = certify_all(&sys, &CertifyOptions::default()).unwrap();
        let b = certify_all(&sys, &CertifyOptions::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), CriterionFamily::ALL.len());
        assert!(a
            .iter()
            .any(|c| c.family == CriterionFamily::InfNormT3T4 && c.feasible));
        assert!(a
            .iter()
            .any(|c| c.family == CriterionFamily::MMatrix && !c.feasible));
        let first_infeasible = a.iter().position(|c| !c.feasible).unwrap_or(a.len());
        assert!(a[first_infeasible..].iter().all(|c| !c.feasible));
        assert!(a[..first_infeasible]
            .windows(2)
            .all(|w| w[0].epsilon >= w[1].epsilon));
    }
}
