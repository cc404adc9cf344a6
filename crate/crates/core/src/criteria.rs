//! Stability criteria T1–T18 and the M-matrix test, evaluated row by row.
//!
//! Weights are a single `2n` vector `w = (ξ₁, …, ξₙ, φ₁, …, φₙ)`. Every family
//! returns `2n` margins: the first `n` rows come from the first expression of
//! the pair (T1, T3, …), the last `n` from the second (T2, T4, …). A family is
//! satisfied when every margin is `≤ 0` (families with a rate `ε`) or `< 0`
//! (rate-free families).
//!
//! The 2-norm expressions are implemented as printed, including places where
//! the `f`-bounds `λ` would be expected but `g`-bounds `μ` appear. The
//! [`FormulaVariant::LambdaConsistent`] variant substitutes `λ` in those
//! places.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::decompose::{pos, RealSystem};
use crate::error::{Error, Result};
use crate::model::PartialBounds;
use crate::norms::{check_weights, NormKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CriterionFamily {
    #[serde(rename = "T1T2")]
    InfNormT1T2,
    #[serde(rename = "T3T4")]
    InfNormT3T4,
    #[serde(rename = "T5T6")]
    InfNormT5T6,
    #[serde(rename = "T7T8")]
    OneNormT7T8,
    #[serde(rename = "T9T10")]
    OneNormT9T10,
    #[serde(rename = "T11T12")]
    OneNormT11T12,
    #[serde(rename = "T13T14")]
    TwoNormT13T14,
    #[serde(rename = "T15T16")]
    TwoNormT15T16,
    #[serde(rename = "T17T18")]
    TwoNormT17T18,
    #[serde(rename = "MMatrix")]
    MMatrix,
}

use CriterionFamily::*;

impl CriterionFamily {
    pub const ALL: [CriterionFamily; 10] = [
        InfNormT1T2,
        InfNormT3T4,
        InfNormT5T6,
        OneNormT7T8,
        OneNormT9T10,
        OneNormT11T12,
        TwoNormT13T14,
        TwoNormT15T16,
        TwoNormT17T18,
        MMatrix,
    ];

    pub fn name(self) -> &'static str {
        match self {
            InfNormT1T2 => "T1T2",
            InfNormT3T4 => "T3T4",
            InfNormT5T6 => "T5T6",
            OneNormT7T8 => "T7T8",
            OneNormT9T10 => "T9T10",
            OneNormT11T12 => "T11T12",
            TwoNormT13T14 => "T13T14",
            TwoNormT15T16 => "T15T16",
            TwoNormT17T18 => "T17T18",
            MMatrix => "MMatrix",
        }
    }

    /// Families that exploit the signs of the diagonal of `A` need `f ∈ H1`.
    pub fn requires_h1(self) -> bool {
        matches!(
            self,
            InfNormT1T2 | InfNormT3T4 | OneNormT7T8 | OneNormT9T10 | TwoNormT13T14 | TwoNormT15T16
        )
    }

    /// Families whose expressions carry an exponential rate `ε`.
    pub fn has_rate(self) -> bool {
        matches!(self, InfNormT1T2 | OneNormT7T8 | TwoNormT13T14)
    }

    /// The rate-free family whose expressions coincide with this one at `ε = 0`.
    pub fn rate_free(self) -> CriterionFamily {
        match self {
            InfNormT1T2 => InfNormT3T4,
            OneNormT7T8 => OneNormT9T10,
            TwoNormT13T14 => TwoNormT15T16,
            other => other,
        }
    }

    pub fn norm(self) -> Option<NormKind> {
        match self {
            InfNormT1T2 | InfNormT3T4 | InfNormT5T6 => Some(NormKind::Inf),
            OneNormT7T8 | OneNormT9T10 | OneNormT11T12 => Some(NormKind::One),
            TwoNormT13T14 | TwoNormT15T16 | TwoNormT17T18 => Some(NormKind::Two),
            MMatrix => None,
        }
    }
}

impl fmt::Display for CriterionFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CriterionFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace(['_', '-'], "");
        CriterionFamily::ALL
            .into_iter()
            .find(|f| {
                let name = f.name().to_ascii_lowercase();
                key == name
                    || key == format!("t{}", &name[1..])
                    || (name == "mmatrix" && key == "m")
            })
            .ok_or_else(|| Error::Config(format!("unknown criterion family `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormulaVariant {
    /// Expressions exactly as printed.
    #[default]
    Printed,
    /// 2-norm expressions with `λ` in the `f`-derivative positions.
    LambdaConsistent,
}

/// The free positive parameters `π1..π4`, `ω1..ω4` of the 2-norm criteria,
/// each an `n × n` row-major array.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoNormParams {
    pub n: usize,
    pub pi: [Vec<f64>; 4],
    pub omega: [Vec<f64>; 4],
}

impl TwoNormParams {
    pub fn ones(n: usize) -> Self {
        let one = vec![1.0; n * n];
        Self {
            n,
            pi: [one.clone(), one.clone(), one.clone(), one.clone()],
            omega: [one.clone(), one.clone(), one.clone(), one],
        }
    }

    #[inline]
    fn pi(&self, q: usize, j: usize, k: usize) -> f64 {
        self.pi[q - 1][j * self.n + k]
    }

    #[inline]
    fn omega(&self, q: usize, j: usize, k: usize) -> f64 {
        self.omega[q - 1][j * self.n + k]
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.n != n {
            return Err(Error::Dimension(format!(
                "2-norm parameters are for n = {}, system has n = {n}",
                self.n
            )));
        }
        for arr in self.pi.iter().chain(self.omega.iter()) {
            if arr.len() != n * n {
                return Err(Error::Dimension(
                    "2-norm parameter array has wrong length".into(),
                ));
            }
            if arr.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return Err(Error::Config("2-norm parameters must be positive".into()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EvalOptions {
    pub variant: FormulaVariant,
    /// `None` means every parameter equals 1.
    pub params: Option<TwoNormParams>,
}

/// Row values of one criterion family at given weights and rate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Margins {
    pub family: CriterionFamily,
    pub epsilon: f64,
    pub xi: Vec<f64>,
    pub values: Vec<f64>,
    pub variant: FormulaVariant,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<TwoNormParams>,
}

impl Margins {
    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `≤ 0` for rate families, `< 0` otherwise.
    pub fn satisfied(&self) -> bool {
        if self.family.has_rate() {
            self.values.iter().all(|v| *v <= 0.0)
        } else {
            self.values.iter().all(|v| *v < 0.0)
        }
    }
}

/// Borrowed view of everything the expressions read.
struct Terms<'a> {
    n: usize,
    d: &'a [f64],
    ar: &'a DMatrix<f64>,
    ai: &'a DMatrix<f64>,
    br: &'a DMatrix<f64>,
    bi: &'a DMatrix<f64>,
    lam: &'a [PartialBounds],
    mu: &'a [PartialBounds],
    tau: &'a DMatrix<f64>,
}

impl<'a> Terms<'a> {
    fn new(sys: &'a RealSystem) -> Self {
        let net = sys.network();
        Self {
            n: sys.n(),
            d: &net.d,
            ar: net.a.re(),
            ai: net.a.im(),
            br: net.b.re(),
            bi: net.b.im(),
            lam: &sys.bounds().lambda,
            mu: &sys.bounds().mu,
            tau: sys.tau_bar(),
        }
    }

    #[inline]
    fn ar(&self, j: usize, k: usize) -> f64 {
        self.ar[(j, k)].abs()
    }
    #[inline]
    fn ai(&self, j: usize, k: usize) -> f64 {
        self.ai[(j, k)].abs()
    }
    #[inline]
    fn br(&self, j: usize, k: usize) -> f64 {
        self.br[(j, k)].abs()
    }
    #[inline]
    fn bi(&self, j: usize, k: usize) -> f64 {
        self.bi[(j, k)].abs()
    }

    /// Bounds used where the printed 2-norm expressions carry `μ` in an
    /// `f`-derivative position.
    #[inline]
    fn f_slot(&self, variant: FormulaVariant, k: usize) -> &PartialBounds {
        match variant {
            FormulaVariant::Printed => &self.mu[k],
            FormulaVariant::LambdaConsistent => &self.lam[k],
        }
    }

    /// T1/T2 (ε = 0 gives T3/T4).
    fn inf_signed(&self, w: &[f64], eps: f64) -> Vec<f64> {
        let n = self.n;
        let (xi, phi) = w.split_at(n);
        let mut out = vec![0.0; 2 * n];
        for j in 0..n {
            let (lj, ar_jj, ai_jj) = (&self.lam[j], self.ar[(j, j)], self.ai[(j, j)]);
            let mut t1 = xi[j] * (-self.d[j] + eps + pos(ar_jj) * lj.rr + pos(-ai_jj) * lj.ir);
            let mut t2 = phi[j] * (-self.d[j] + eps + pos(ar_jj) * lj.ii + pos(ai_jj) * lj.ri);
            for k in 0..n {
                let (lk, mk) = (&self.lam[k], &self.mu[k]);
                if k != j {
                    t1 += xi[k] * self.ar(j, k) * lk.rr + xi[k] * self.ai(j, k) * lk.ir;
                    t2 += phi[k] * self.ar(j, k) * lk.ii + phi[k] * self.ai(j, k) * lk.ri;
                }
                t1 += phi[k] * self.ar(j, k) * lk.ri + phi[k] * self.ai(j, k) * lk.ii;
                t2 += xi[k] * self.ar(j, k) * lk.ir + xi[k] * self.ai(j, k) * lk.rr;
                let e = (eps * self.tau[(j, k)]).exp();
                t1 += (xi[k] * self.br(j, k) * mk.rr
                    + phi[k] * self.br(j, k) * mk.ri
                    + xi[k] * self.bi(j, k) * mk.ir
                    + phi[k] * self.bi(j, k) * mk.ii)
                    * e;
                t2 += (xi[k] * self.br(j, k) * mk.ir
                    + phi[k] * self.br(j, k) * mk.ii
                    + xi[k] * self.bi(j, k) * mk.rr
                    + phi[k] * self.bi(j, k) * mk.ri)
                    * e;
            }
            out[j] = t1;
            out[n + j] = t2;
        }
        out
    }

    /// T5/T6.
    fn inf_unsigned(&self, w: &[f64]) -> Vec<f64> {
        let n = self.n;
        let (xi, phi) = w.split_at(n);
        let mut out = vec![0.0; 2 * n];
        for j in 0..n {
            let mut t5 = -xi[j] * self.d[j];
            let mut t6 = -phi[j] * self.d[j];
            for k in 0..n {
                let (lk, mk) = (&self.lam[k], &self.mu[k]);
                t5 += xi[k] * self.ar(j, k) * lk.rr
                    + phi[k] * self.ar(j, k) * lk.ri
                    + xi[k] * self.ai(j, k) * lk.ir
                    + phi[k] * self.ai(j, k) * lk.ii
                    + xi[k] * self.br(j, k) * mk.rr
                    + phi[k] * self.br(j, k) * mk.ri
                    + xi[k] * self.bi(j, k) * mk.ir
                    + phi[k] * self.bi(j, k) * mk.ii;
                t6 += xi[k] * self.ar(j, k) * lk.ir
                    + phi[k] * self.ar(j, k) * lk.ii
                    + xi[k] * self.ai(j, k) * lk.rr
                    + phi[k] * self.ai(j, k) * lk.ri
                    + xi[k] * self.br(j, k) * mk.ir
                    + phi[k] * self.br(j, k) * mk.ii
                    + xi[k] * self.bi(j, k) * mk.rr
                    + phi[k] * self.bi(j, k) * mk.ri;
            }
            out[j] = t5;
            out[n + j] = t6;
        }
        out
    }

    /// Delayed column coefficients `α_{jk}` (of `|x_k|`) and `β_{jk}` (of `|y_k|`)
    /// for weights `w`.
    fn alpha_beta(&self, w: &[f64], j: usize, k: usize) -> (f64, f64) {
        let n = self.n;
        let (xi, phi) = (w[j], w[n + j]);
        let mk = &self.mu[k];
        let (br, bi) = (self.br(j, k), self.bi(j, k));
        (
            xi * (br * mk.rr + bi * mk.ir) + phi * (br * mk.ir + bi * mk.rr),
            xi * (br * mk.ri + bi * mk.ii) + phi * (br * mk.ii + bi * mk.ri),
        )
    }

    /// Arguments of the two `[·]⁺` brackets in T7 and T8 for column `c`.
    fn one_brackets(&self, w: &[f64], c: usize) -> [f64; 4] {
        let n = self.n;
        let (xi, phi) = w.split_at(n);
        let mut b7a = xi[c] * self.ar[(c, c)];
        let mut b7b = -xi[c] * self.ai[(c, c)];
        let mut b8a = phi[c] * self.ar[(c, c)];
        let mut b8b = phi[c] * self.ai[(c, c)];
        for j in 0..n {
            if j != c {
                b7a += xi[j] * self.ar(j, c);
                b7b += xi[j] * self.ai(j, c);
                b8a += phi[j] * self.ar(j, c);
                b8b += phi[j] * self.ai(j, c);
            }
            b7a += phi[j] * self.ai(j, c);
            b7b += phi[j] * self.ar(j, c);
            b8a += xi[j] * self.ai(j, c);
            b8b += xi[j] * self.ar(j, c);
        }
        [b7a, b7b, b8a, b8b]
    }

    /// T7/T8 (ε = 0 gives T9/T10), one row per column index.
    fn one_signed(&self, w: &[f64], eps: f64) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; 2 * n];
        for c in 0..n {
            let lc = &self.lam[c];
            let [b7a, b7b, b8a, b8b] = self.one_brackets(w, c);
            let mut t7 = w[c] * (-self.d[c] + eps) + pos(b7a) * lc.rr + pos(b7b) * lc.ir;
            let mut t8 = w[n + c] * (-self.d[c] + eps) + pos(b8a) * lc.ii + pos(b8b) * lc.ri;
            for j in 0..n {
                let (alpha, beta) = self.alpha_beta(w, j, c);
                let e = (eps * self.tau[(j, c)]).exp();
                t7 += alpha * e;
                t8 += beta * e;
            }
            out[c] = t7;
            out[n + c] = t8;
        }
        out
    }

    /// T11/T12.
    fn one_unsigned(&self, w: &[f64]) -> Vec<f64> {
        let n = self.n;
        let (xi, phi) = w.split_at(n);
        let mut out = vec![0.0; 2 * n];
        for c in 0..n {
            let lc = &self.lam[c];
            let (mut s_rr, mut s_ir, mut s_ii, mut s_ri) = (0.0, 0.0, 0.0, 0.0);
            let (mut delayed11, mut delayed12) = (0.0, 0.0);
            for j in 0..n {
                s_rr += xi[j] * self.ar(j, c) + phi[j] * self.ai(j, c);
                s_ir += xi[j] * self.ai(j, c) + phi[j] * self.ar(j, c);
                s_ii += phi[j] * self.ar(j, c) + xi[j] * self.ai(j, c);
                s_ri += phi[j] * self.ai(j, c) + xi[j] * self.ar(j, c);
                let (alpha, beta) = self.alpha_beta(w, j, c);
                delayed11 += alpha;
                delayed12 += beta;
            }
            out[c] = -xi[c] * self.d[c] + s_rr * lc.rr + s_ir * lc.ir + delayed11;
            out[n + c] = -phi[c] * self.d[c] + s_ii * lc.ii + s_ri * lc.ri + delayed12;
        }
        out
    }

    /// T13/T14 (ε = 0 gives T15/T16).
    fn two_signed(
        &self,
        w: &[f64],
        eps: f64,
        p: &TwoNormParams,
        variant: FormulaVariant,
    ) -> Vec<f64> {
        let n = self.n;
        let (xi, phi) = w.split_at(n);
        let mut out = vec![0.0; 2 * n];
        for j in 0..n {
            let (lj, mj, xj) = (&self.lam[j], &self.mu[j], self.f_slot(variant, j));
            let (ar_jj, ai_jj) = (self.ar[(j, j)], self.ai[(j, j)]);
            let diag14 = match variant {
                FormulaVariant::Printed => pos(ar_jj) * mj.rr + pos(ai_jj) * mj.ri,
                FormulaVariant::LambdaConsistent => pos(ar_jj) * lj.ii + pos(ai_jj) * lj.ri,
            };
            let mut t13 =
                2.0 * xi[j] * (-self.d[j] + eps + pos(ar_jj) * lj.rr + pos(-ai_jj) * lj.ir);
            let mut t14 = 2.0 * phi[j] * (-self.d[j] + eps + diag14);
            for k in 0..n {
                let (lk, mk, xk) = (&self.lam[k], &self.mu[k], self.f_slot(variant, k));
                let e2 = (2.0 * eps * self.tau[(k, j)]).exp();
                if k != j {
                    t13 += xi[j] * (self.ar(j, k) * lk.rr + self.ai(j, k) * lk.ir) * p.pi(1, j, k);
                    t13 += xi[k] * (self.ar(k, j) * lj.rr + self.ai(k, j) * lj.ir) / p.pi(1, k, j);
                    t14 +=
                        phi[j] * (self.ar(j, k) * xk.ii + self.ai(j, k) * xk.ri) * p.omega(2, j, k);
                    t14 +=
                        phi[k] * (self.ar(k, j) * xj.ii + self.ai(k, j) * xj.ri) / p.omega(2, k, j);
                }
                t13 += xi[j] * (self.ar(j, k) * lk.ri + self.ai(j, k) * lk.ii) * p.pi(2, j, k);
                t13 += xi[j] * (self.br(j, k) * mk.rr + self.bi(j, k) * mk.ir) * p.pi(3, j, k);
                t13 += xi[j] * (self.br(j, k) * mk.ri + self.bi(j, k) * mk.ii) * p.pi(4, j, k);
                t13 += phi[k] * (self.ar(k, j) * xj.ir + self.ai(k, j) * xj.rr) / p.omega(1, k, j);
                t13 += (xi[k] * (self.br(k, j) * mj.rr + self.bi(k, j) * mj.ir) / p.pi(3, k, j)
                    + phi[k] * (self.br(k, j) * mj.ir + self.bi(k, j) * mj.rr) / p.omega(3, k, j))
                    * e2;

                t14 += phi[j] * (self.ar(j, k) * xk.ir + self.ai(j, k) * xk.rr) * p.omega(1, j, k);
                t14 += phi[j] * (self.br(j, k) * mk.ir + self.bi(j, k) * mk.rr) * p.omega(3, j, k);
                t14 += phi[j] * (self.br(j, k) * mk.ii + self.bi(j, k) * mk.ri) * p.omega(4, j, k);
                t14 += xi[k] * (self.ar(k, j) * lj.ri + self.ai(k, j) * lj.ii) / p.pi(2, k, j);
                t14 += (xi[k] * (self.br(k, j) * mj.ri + self.bi(k, j) * mj.ii) / p.pi(4, k, j)
                    + phi[k] * (self.br(k, j) * mj.ii + self.bi(k, j) * mj.ri) / p.omega(4, k, j))
                    * e2;
            }
            out[j] = t13;
            out[n + j] = t14;
        }
        out
    }

    /// T17/T18.
    fn two_unsigned(&self, w: &[f64], variant: FormulaVariant) -> Vec<f64> {
        let n = self.n;
        let (xi, phi) = w.split_at(n);
        let mut out = vec![0.0; 2 * n];
        for j in 0..n {
            let (lj, mj, xj) = (&self.lam[j], &self.mu[j], self.f_slot(variant, j));
            let mut t17 = -2.0 * xi[j] * self.d[j];
            let mut t18 = -2.0 * phi[j] * self.d[j];
            for k in 0..n {
                let (lk, mk, xk) = (&self.lam[k], &self.mu[k], self.f_slot(variant, k));
                t17 += xi[j] * (self.ar(j, k) * lk.rr + self.ai(j, k) * lk.ir)
                    + xi[k] * (self.ar(k, j) * lj.rr + self.ai(k, j) * lj.ir)
                    + xi[j] * (self.ar(j, k) * lk.ri + self.ai(j, k) * lk.ii)
                    + xi[j] * (self.br(j, k) * mk.rr + self.bi(j, k) * mk.ir)
                    + xi[j] * (self.br(j, k) * mk.ri + self.bi(j, k) * mk.ii)
                    + phi[k] * (self.ar(k, j) * xj.ir + self.ai(k, j) * xj.rr)
                    + xi[k] * (self.br(k, j) * mj.rr + self.bi(k, j) * mj.ir)
                    + phi[k] * (self.br(k, j) * mj.ir + self.bi(k, j) * mj.rr);
                t18 += phi[j] * (self.ar(j, k) * xk.ir + self.ai(j, k) * xk.rr)
                    + phi[j] * (self.ar(j, k) * xk.ii + self.ai(j, k) * xk.ri)
                    + phi[k] * (self.ar(k, j) * xj.ii + self.ai(k, j) * xj.ri)
                    + phi[j] * (self.br(j, k) * mk.ir + self.bi(j, k) * mk.rr)
                    + phi[j] * (self.br(j, k) * mk.ii + self.bi(j, k) * mk.ri)
                    + xi[k] * (self.ar(k, j) * lj.ri + self.ai(k, j) * lj.ii)
                    + xi[k] * (self.br(k, j) * mj.ri + self.bi(k, j) * mj.ii)
                    + phi[k] * (self.br(k, j) * mj.ii + self.bi(k, j) * mj.ri);
            }
            out[j] = t17;
            out[n + j] = t18;
        }
        out
    }
}

fn check_request(
    family: CriterionFamily,
    sys: &RealSystem,
    w: &[f64],
    eps: f64,
    opts: &EvalOptions,
) -> Result<()> {
    if w.len() != sys.dim() {
        return Err(Error::Dimension(format!(
            "weight vector has length {}, expected {}",
            w.len(),
            sys.dim()
        )));
    }
    if family.requires_h1() && !sys.bounds().f_is_h1() {
        return Err(Error::ClassMismatch {
            family: family.name(),
        });
    }
    if !(eps.is_finite() && eps >= 0.0) {
        return Err(Error::InvalidRate(
            eps,
            "rate must be finite and nonnegative",
        ));
    }
    if !family.has_rate() && eps != 0.0 {
        return Err(Error::InvalidRate(
            eps,
            "rate-free families are evaluated at ε = 0",
        ));
    }
    if let Some(p) = &opts.params {
        p.validate(sys.n())?;
    }
    Ok(())
}

/// Row values without the positivity and class checks; `w` may be any vector.
fn raw_values(
    family: CriterionFamily,
    sys: &RealSystem,
    w: &[f64],
    eps: f64,
    opts: &EvalOptions,
) -> Vec<f64> {
    let t = Terms::new(sys);
    let ones;
    let params = match &opts.params {
        Some(p) => p,
        None => {
            ones = TwoNormParams::ones(sys.n());
            &ones
        }
    };
    match family {
        InfNormT1T2 | InfNormT3T4 => t.inf_signed(w, eps),
        InfNormT5T6 => t.inf_unsigned(w),
        OneNormT7T8 | OneNormT9T10 => t.one_signed(w, eps),
        OneNormT11T12 => t.one_unsigned(w),
        TwoNormT13T14 | TwoNormT15T16 => t.two_signed(w, eps, params, opts.variant),
        TwoNormT17T18 => t.two_unsigned(w, opts.variant),
        MMatrix => {
            let c = sys.stability_matrix();
            let v = &c * nalgebra::DVector::from_column_slice(w);
            v.iter().map(|x| -x).collect()
        }
    }
}

/// Evaluates the criterion expressions of `family` at weights `xi` and rate `eps`.
pub fn eval_criterion(
    family: CriterionFamily,
    sys: &RealSystem,
    xi: &[f64],
    eps: f64,
    opts: &EvalOptions,
) -> Result<Margins> {
    check_request(family, sys, xi, eps, opts)?;
    check_weights(xi)?;
    Ok(Margins {
        family,
        epsilon: eps,
        xi: xi.to_vec(),
        values: raw_values(family, sys, xi, eps, opts),
        variant: opts.variant,
        params: opts.params.clone(),
    })
}

/// A `[·]⁺` term: `weight · max(0, form · w)` added to `row`.
#[derive(Clone, Debug, PartialEq)]
pub struct Hinge {
    pub row: usize,
    pub weight: f64,
    pub form: Vec<f64>,
}

/// `margins(w) = base · w + Σ hinges`, exact for every family at fixed `ε`.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseLinear {
    pub base: DMatrix<f64>,
    pub hinges: Vec<Hinge>,
}

impl PiecewiseLinear {
    pub fn eval(&self, w: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = (0..self.base.nrows())
            .map(|r| {
                (0..self.base.ncols())
                    .map(|c| self.base[(r, c)] * w[c])
                    .sum()
            })
            .collect();
        for h in &self.hinges {
            let v: f64 = h.form.iter().zip(w).map(|(a, b)| a * b).sum();
            out[h.row] += h.weight * pos(v);
        }
        out
    }
}

/// Piecewise-linear form of a family at fixed `eps`, used by the weight search.
pub fn linearize(
    family: CriterionFamily,
    sys: &RealSystem,
    eps: f64,
    opts: &EvalOptions,
) -> Result<PiecewiseLinear> {
    let dim = sys.dim();
    check_request(family, sys, &vec![1.0; dim], eps, opts)?;
    match family {
        OneNormT7T8 | OneNormT9T10 => Ok(one_norm_pieces(sys, eps)),
        _ => {
            // every other family is linear and homogeneous in w
            let mut base = DMatrix::zeros(dim, dim);
            let mut unit = vec![0.0; dim];
            for c in 0..dim {
                unit[c] = 1.0;
                let col = raw_values(family, sys, &unit, eps, opts);
                unit[c] = 0.0;
                for (r, v) in col.into_iter().enumerate() {
                    base[(r, c)] = v;
                }
            }
            Ok(PiecewiseLinear {
                base,
                hinges: Vec::new(),
            })
        }
    }
}

fn one_norm_pieces(sys: &RealSystem, eps: f64) -> PiecewiseLinear {
    let t = Terms::new(sys);
    let n = t.n;
    let dim = 2 * n;
    let mut base = DMatrix::zeros(dim, dim);
    let mut hinges = Vec::with_capacity(4 * n);
    for c in 0..n {
        let lc = &t.lam[c];
        let mc = &t.mu[c];
        base[(c, c)] += -t.d[c] + eps;
        base[(n + c, n + c)] += -t.d[c] + eps;
        for j in 0..n {
            let e = (eps * t.tau[(j, c)]).exp();
            let (br, bi) = (t.br(j, c), t.bi(j, c));
            base[(c, j)] += (br * mc.rr + bi * mc.ir) * e;
            base[(c, n + j)] += (br * mc.ir + bi * mc.rr) * e;
            base[(n + c, j)] += (br * mc.ri + bi * mc.ii) * e;
            base[(n + c, n + j)] += (br * mc.ii + bi * mc.ri) * e;
        }
        let mut f7a = vec![0.0; dim];
        let mut f7b = vec![0.0; dim];
        let mut f8a = vec![0.0; dim];
        let mut f8b = vec![0.0; dim];
        f7a[c] += t.ar[(c, c)];
        f7b[c] -= t.ai[(c, c)];
        f8a[n + c] += t.ar[(c, c)];
        f8b[n + c] += t.ai[(c, c)];
        for j in 0..n {
            if j != c {
                f7a[j] += t.ar(j, c);
                f7b[j] += t.ai(j, c);
                f8a[n + j] += t.ar(j, c);
                f8b[n + j] += t.ai(j, c);
            }
            f7a[n + j] += t.ai(j, c);
            f7b[n + j] += t.ar(j, c);
            f8a[j] += t.ai(j, c);
            f8b[j] += t.ar(j, c);
        }
        hinges.push(Hinge {
            row: c,
            weight: lc.rr,
            form: f7a,
        });
        hinges.push(Hinge {
            row: c,
            weight: lc.ir,
            form: f7b,
        });
        hinges.push(Hinge {
            row: n + c,
            weight: lc.ii,
            form: f8a,
        });
        hinges.push(Hinge {
            row: n + c,
            weight: lc.ri,
            form: f8b,
        });
    }
    PiecewiseLinear { base, hinges }
}
