//! Real/imaginary decomposition of the complex network into a `2n`-dimensional
//! real delayed system, plus the nonnegative comparison matrices used by the
//! stability criteria.
//!
//! State layout everywhere is `Z = (z₁ᴿ, …, zₙᴿ, z₁ᴵ, …, zₙᴵ)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{ActivationBounds, NetworkSpec, PartialBounds};

#[inline]
pub(crate) fn pos(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// `D̄`, `Ā`, `F̄`, `B̄`, `Ḡ`, each `2n × 2n`.
#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonMatrices {
    pub d_bar: DMatrix<f64>,
    pub a_bar: DMatrix<f64>,
    pub f_bar: DMatrix<f64>,
    pub b_bar: DMatrix<f64>,
    pub g_bar: DMatrix<f64>,
}

impl ComparisonMatrices {
    /// `D̄ − ĀF̄ − B̄Ḡ`.
    pub fn stability_matrix(&self) -> DMatrix<f64> {
        &self.d_bar - &self.a_bar * &self.f_bar - &self.b_bar * &self.g_bar
    }
}

/// Sign-gap diagonals and the correction `Δ̄`.
#[derive(Clone, Debug, PartialEq)]
pub struct SignGap {
    /// `|aᴿ_jj| − {aᴿ_jj}⁺`
    pub p1: DVector<f64>,
    /// `|aᴵ_jj| − {−aᴵ_jj}⁺`
    pub p2: DVector<f64>,
    /// `|aᴵ_jj| − {aᴵ_jj}⁺`
    pub p3: DVector<f64>,
    /// `diag(P₁Fᴿᴿ + P₂Fᴵᴿ, P₁Fᴵᴵ + P₃Fᴿᴵ)`, `2n × 2n`.
    pub delta_bar: DMatrix<f64>,
}

fn check_dims(net: &NetworkSpec, bounds: &ActivationBounds) -> Result<usize> {
    let n = net.n();
    if bounds.lambda.len() != n || bounds.mu.len() != n {
        return Err(Error::Dimension(format!(
            "bounds describe {} nodes, network has {n}",
            bounds.lambda.len()
        )));
    }
    Ok(n)
}

fn block(
    n: usize,
    tl: impl Fn(usize, usize) -> f64,
    tr: impl Fn(usize, usize) -> f64,
    bl: impl Fn(usize, usize) -> f64,
    br: impl Fn(usize, usize) -> f64,
) -> DMatrix<f64> {
    DMatrix::from_fn(2 * n, 2 * n, |r, c| match (r < n, c < n) {
        (true, true) => tl(r, c),
        (true, false) => tr(r, c - n),
        (false, true) => bl(r - n, c),
        (false, false) => br(r - n, c - n),
    })
}

fn bound_block(n: usize, b: &[PartialBounds]) -> DMatrix<f64> {
    let diag = |sel: fn(&PartialBounds) -> f64| {
        move |r: usize, c: usize| if r == c { sel(&b[r]) } else { 0.0 }
    };
    block(
        n,
        diag(|p| p.rr),
        diag(|p| p.ri),
        diag(|p| p.ir),
        diag(|p| p.ii),
    )
}

fn abs_block(n: usize, re: &DMatrix<f64>, im: &DMatrix<f64>) -> DMatrix<f64> {
    block(
        n,
        |r, c| re[(r, c)].abs(),
        |r, c| im[(r, c)].abs(),
        |r, c| im[(r, c)].abs(),
        |r, c| re[(r, c)].abs(),
    )
}

pub fn comparison_matrices(
    net: &NetworkSpec,
    bounds: &ActivationBounds,
) -> Result<ComparisonMatrices> {
    let n = check_dims(net, bounds)?;
    let d_bar = DMatrix::from_fn(2 * n, 2 * n, |r, c| if r == c { net.d[r % n] } else { 0.0 });
    Ok(ComparisonMatrices {
        d_bar,
        a_bar: abs_block(n, net.a.re(), net.a.im()),
        f_bar: bound_block(n, &bounds.lambda),
        b_bar: abs_block(n, net.b.re(), net.b.im()),
        g_bar: bound_block(n, &bounds.mu),
    })
}

pub fn delta_correction(net: &NetworkSpec, bounds: &ActivationBounds) -> Result<SignGap> {
    let n = check_dims(net, bounds)?;
    let (ar, ai) = (net.a.re(), net.a.im());
    let p1 = DVector::from_fn(n, |j, _| ar[(j, j)].abs() - pos(ar[(j, j)]));
    let p2 = DVector::from_fn(n, |j, _| ai[(j, j)].abs() - pos(-ai[(j, j)]));
    let p3 = DVector::from_fn(n, |j, _| ai[(j, j)].abs() - pos(ai[(j, j)]));
    let mut delta_bar = DMatrix::zeros(2 * n, 2 * n);
    for j in 0..n {
        let l = &bounds.lambda[j];
        delta_bar[(j, j)] = p1[j] * l.rr + p2[j] * l.ir;
        delta_bar[(n + j, n + j)] = p1[j] * l.ii + p3[j] * l.ri;
    }
    Ok(SignGap {
        p1,
        p2,
        p3,
        delta_bar,
    })
}

/// The equivalent real system together with everything the criteria need.
#[derive(Clone, Debug)]
pub struct RealSystem {
    net: NetworkSpec,
    bounds: ActivationBounds,
    cmp: ComparisonMatrices,
    gap: SignGap,
    tau_edges: DMatrix<f64>,
}

pub fn decompose(net: &NetworkSpec, bounds: &ActivationBounds) -> Result<RealSystem> {
    let cmp = comparison_matrices(net, bounds)?;
    let gap = delta_correction(net, bounds)?;
    Ok(RealSystem {
        net: net.clone(),
        bounds: bounds.clone(),
        cmp,
        gap,
        tau_edges: net.delays.upper_bounds(),
    })
}

impl RealSystem {
    pub fn n(&self) -> usize {
        self.net.n()
    }

    pub fn dim(&self) -> usize {
        2 * self.net.n()
    }

    pub fn network(&self) -> &NetworkSpec {
        &self.net
    }

    pub fn bounds(&self) -> &ActivationBounds {
        &self.bounds
    }

    pub fn comparison(&self) -> &ComparisonMatrices {
        &self.cmp
    }

    pub fn sign_gap(&self) -> &SignGap {
        &self.gap
    }

    /// `n × n` matrix of per-edge delay upper bounds `τ̄_{jk}`.
    pub fn tau_bar(&self) -> &DMatrix<f64> {
        &self.tau_edges
    }

    /// `τ̄` replicated into the `2n × 2n` block layout.
    pub fn tau_bar_expanded(&self) -> DMatrix<f64> {
        let n = self.n();
        DMatrix::from_fn(2 * n, 2 * n, |r, c| self.tau_edges[(r % n, c % n)])
    }

    pub fn tau_max(&self) -> f64 {
        self.tau_edges.iter().copied().fold(0.0, f64::max)
    }

    /// `D̄ − ĀF̄ − B̄Ḡ`.
    pub fn stability_matrix(&self) -> DMatrix<f64> {
        self.cmp.stability_matrix()
    }

    /// `D̄ − ĀF̄ − B̄Ḡ + Δ̄`.
    pub fn corrected_stability_matrix(&self) -> DMatrix<f64> {
        self.cmp.stability_matrix() + &self.gap.delta_bar
    }

    /// Evaluates `Ż` for the real system; see [`NetworkSpec::real_rhs`].
    pub fn rhs(&self, z: &[f64], delayed: &[f64], out: &mut [f64]) {
        self.net.real_rhs(z, delayed, out)
    }

    /// `Ż` at a constant state (all delayed arguments equal the state).
    pub fn rhs_at_rest(&self, z: &[f64]) -> Vec<f64> {
        let n = self.n();
        let mut delayed = vec![0.0; 2 * n * n];
        for j in 0..n {
            for k in 0..n {
                delayed[2 * (j * n + k)] = z[k];
                delayed[2 * (j * n + k) + 1] = z[n + k];
            }
        }
        let mut out = vec![0.0; 2 * n];
        self.rhs(z, &delayed, &mut out);
        out
    }
}
