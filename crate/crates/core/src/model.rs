//! Complex-valued network description: connection weights, per-edge delays,
//! the activation family `σ(c₁·zᴿ + c₂·zᴵ)` and its derivative bounds.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Arguments beyond this magnitude evaluate to the asymptote.
const SATURATION: f64 = 30.0;

/// Scalar squashing function applied to a linear combination of `zᴿ`, `zᴵ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sigma {
    /// `1 / (1 + e^{-s})`, range (0, 1), slope at most 1/4.
    Logistic,
    /// `(1 - e^{-s}) / (1 + e^{-s})`, range (-1, 1), slope at most 1/2.
    Bipolar,
}

impl Sigma {
    pub fn parse(name: &str) -> Result<Self> {
        match name.trim().to_ascii_lowercase().as_str() {
            "logistic" => Ok(Sigma::Logistic),
            "bipolar" | "bipolar-logistic" | "bipolar_logistic" => Ok(Sigma::Bipolar),
            other => Err(Error::UnsupportedSigma(other.to_string())),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Sigma::Logistic => "logistic",
            Sigma::Bipolar => "bipolar",
        }
    }

    pub fn eval(self, s: f64) -> f64 {
        match self {
            Sigma::Logistic => {
                if s > SATURATION {
                    1.0
                } else if s < -SATURATION {
                    0.0
                } else if s >= 0.0 {
                    1.0 / (1.0 + (-s).exp())
                } else {
                    let e = s.exp();
                    e / (1.0 + e)
                }
            }
            Sigma::Bipolar => {
                if s > SATURATION {
                    1.0
                } else if s < -SATURATION {
                    -1.0
                } else {
                    // (1 - e^{-s}) / (1 + e^{-s}) == tanh(s / 2)
                    (0.5 * s).tanh()
                }
            }
        }
    }

    pub fn derivative(self, s: f64) -> f64 {
        match self {
            Sigma::Logistic => {
                let v = self.eval(s);
                v * (1.0 - v)
            }
            Sigma::Bipolar => {
                let v = self.eval(s);
                0.5 * (1.0 - v * v)
            }
        }
    }

    /// Supremum of the derivative over the real line.
    pub fn max_slope(self) -> f64 {
        match self {
            Sigma::Logistic => 0.25,
            Sigma::Bipolar => 0.5,
        }
    }
}

/// One real component `σ(c₁·x + c₂·y)` of a complex activation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Component {
    pub sigma: Sigma,
    pub c1: f64,
    pub c2: f64,
}

impl Component {
    pub fn new(sigma: Sigma, c1: f64, c2: f64) -> Self {
        Self { sigma, c1, c2 }
    }

    #[inline]
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.sigma.eval(self.c1 * x + self.c2 * y)
    }

    /// Exact partial derivatives `(∂/∂x, ∂/∂y)` at `(x, y)`.
    pub fn partials(&self, x: f64, y: f64) -> (f64, f64) {
        let s = self.sigma.derivative(self.c1 * x + self.c2 * y);
        (self.c1 * s, self.c2 * s)
    }

    /// Tight bounds on `|∂/∂x|` and `|∂/∂y|`.
    pub fn partial_bounds(&self) -> (f64, f64) {
        let m = self.sigma.max_slope();
        (self.c1.abs() * m, self.c2.abs() * m)
    }

    /// Both partials strictly positive everywhere.
    pub fn is_increasing(&self) -> bool {
        self.c1 > 0.0 && self.c2 > 0.0
    }
}

/// Complex activation split into real and imaginary components.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ComplexActivation {
    pub re: Component,
    pub im: Component,
}

impl ComplexActivation {
    #[inline]
    pub fn eval(&self, x: f64, y: f64) -> (f64, f64) {
        (self.re.eval(x, y), self.im.eval(x, y))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NodeActivation {
    /// Undelayed activation.
    pub f: ComplexActivation,
    /// Delayed activation.
    pub g: ComplexActivation,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Which {
    F,
    G,
}

impl Which {
    fn name(self) -> &'static str {
        match self {
            Which::F => "f",
            Which::G => "g",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ActivationSpec {
    pub nodes: Vec<NodeActivation>,
}

impl ActivationSpec {
    pub fn new(nodes: Vec<NodeActivation>) -> Result<Self> {
        for (j, node) in nodes.iter().enumerate() {
            for c in [node.f.re, node.f.im, node.g.re, node.g.im] {
                if !c.c1.is_finite() || !c.c2.is_finite() {
                    return Err(Error::InvalidNetwork(format!(
                        "activation coefficients of node {j} must be finite"
                    )));
                }
            }
        }
        Ok(Self { nodes })
    }

    /// The same activation pair on every node.
    pub fn uniform(n: usize, node: NodeActivation) -> Self {
        Self {
            nodes: vec![node; n],
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn get(&self, node: usize, which: Which) -> &ComplexActivation {
        match which {
            Which::F => &self.nodes[node].f,
            Which::G => &self.nodes[node].g,
        }
    }
}

/// Evaluates `f_node` or `g_node` at `zᴿ + i·zᴵ`, returning (real, imaginary).
pub fn eval_activation(
    spec: &ActivationSpec,
    node: usize,
    which: Which,
    zr: f64,
    zi: f64,
) -> (f64, f64) {
    spec.get(node, which).eval(zr, zi)
}

/// Upper bounds on the four partial derivatives of one complex activation,
/// named `RR = ∂ᴿ/∂zᴿ`, `RI = ∂ᴿ/∂zᴵ`, `IR = ∂ᴵ/∂zᴿ`, `II = ∂ᴵ/∂zᴵ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartialBounds {
    pub rr: f64,
    pub ri: f64,
    pub ir: f64,
    pub ii: f64,
}

impl PartialBounds {
    pub fn as_array(&self) -> [f64; 4] {
        [self.rr, self.ri, self.ir, self.ii]
    }
}

/// H1: all partials strictly positive and bounded. H2: bounded in magnitude.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ActivationClass {
    H1,
    H2,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActivationBounds {
    /// Bounds for `f_j` (λ).
    pub lambda: Vec<PartialBounds>,
    /// Bounds for `g_j` (μ).
    pub mu: Vec<PartialBounds>,
    pub f_class: Vec<ActivationClass>,
    pub g_class: Vec<ActivationClass>,
}

impl ActivationBounds {
    pub fn len(&self) -> usize {
        self.lambda.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambda.is_empty()
    }

    /// Every `f_j` is in H1.
    pub fn f_is_h1(&self) -> bool {
        self.f_class.iter().all(|c| *c == ActivationClass::H1)
    }
}

fn bounds_of(
    act: &ComplexActivation,
    node: usize,
    which: Which,
) -> Result<(PartialBounds, ActivationClass)> {
    let (rr, ri) = act.re.partial_bounds();
    let (ir, ii) = act.im.partial_bounds();
    let pb = PartialBounds { rr, ri, ir, ii };
    for (v, name) in [(rr, "RR"), (ri, "RI"), (ir, "IR"), (ii, "II")] {
        if v.is_nan() || v <= 0.0 {
            return Err(Error::DegenerateActivation {
                node,
                which: which.name(),
                component: name,
            });
        }
    }
    let class = if act.re.is_increasing() && act.im.is_increasing() {
        ActivationClass::H1
    } else {
        ActivationClass::H2
    };
    Ok((pb, class))
}

/// Derives the eight derivative bounds per node and the H1/H2 class flags.
pub fn derive_bounds(spec: &ActivationSpec) -> Result<ActivationBounds> {
    let n = spec.len();
    let mut out = ActivationBounds {
        lambda: Vec::with_capacity(n),
        mu: Vec::with_capacity(n),
        f_class: Vec::with_capacity(n),
        g_class: Vec::with_capacity(n),
    };
    for (j, node) in spec.nodes.iter().enumerate() {
        let (lb, lc) = bounds_of(&node.f, j, Which::F)?;
        let (mb, mc) = bounds_of(&node.g, j, Which::G)?;
        out.lambda.push(lb);
        out.mu.push(mb);
        out.f_class.push(lc);
        out.g_class.push(mc);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Wave {
    Sin,
    Cos,
}

/// Delay on edge `k → j`: constant, or `base + amp·wave(t + phase)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Delay {
    Const(f64),
    Periodic {
        base: f64,
        amp: f64,
        phase: f64,
        wave: Wave,
    },
}

impl Delay {
    #[inline]
    pub fn at(&self, t: f64) -> f64 {
        match *self {
            Delay::Const(tau) => tau,
            Delay::Periodic {
                base,
                amp,
                phase,
                wave,
            } => {
                let v = match wave {
                    Wave::Sin => (t + phase).sin(),
                    Wave::Cos => (t + phase).cos(),
                };
                // rounding can push base - |amp| a hair below zero
                (base + amp * v).max(0.0)
            }
        }
    }

    pub fn upper_bound(&self) -> f64 {
        match *self {
            Delay::Const(tau) => tau,
            Delay::Periodic { base, amp, .. } => base + amp.abs(),
        }
    }

    pub fn lower_bound(&self) -> f64 {
        match *self {
            Delay::Const(tau) => tau,
            Delay::Periodic { base, amp, .. } => base - amp.abs(),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Delay::Const(_))
    }

    fn validate(&self) -> std::result::Result<(), String> {
        match *self {
            Delay::Const(tau) if tau.is_finite() && tau >= 0.0 => Ok(()),
            Delay::Const(tau) => Err(format!("constant delay {tau} must be finite and >= 0")),
            Delay::Periodic {
                base, amp, phase, ..
            } => {
                if !(base.is_finite() && amp.is_finite() && phase.is_finite()) {
                    Err("periodic delay parameters must be finite".into())
                } else if base < amp.abs() {
                    Err(format!("periodic delay base {base} < |amp| {}", amp.abs()))
                } else {
                    Ok(())
                }
            }
        }
    }
}

/// Per-edge delays `τ_{jk}`: row `j` is the receiving node.
#[derive(Clone, Debug, PartialEq)]
pub struct DelaySpec {
    n: usize,
    entries: Vec<Delay>,
}

impl DelaySpec {
    pub fn new(n: usize, entries: Vec<Delay>) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::Dimension(format!(
                "delay matrix has {} entries, expected {}",
                entries.len(),
                n * n
            )));
        }
        for (idx, d) in entries.iter().enumerate() {
            d.validate().map_err(|m| {
                Error::InvalidNetwork(format!("delay ({}, {}): {m}", idx / n, idx % n))
            })?;
        }
        Ok(Self { n, entries })
    }

    pub fn constant(taus: &DMatrix<f64>) -> Result<Self> {
        let n = taus.nrows();
        if taus.ncols() != n {
            return Err(Error::Dimension("delay matrix must be square".into()));
        }
        let entries = (0..n)
            .flat_map(|j| (0..n).map(move |k| (j, k)))
            .map(|(j, k)| Delay::Const(taus[(j, k)]))
            .collect();
        Self::new(n, entries)
    }

    pub fn uniform(n: usize, tau: f64) -> Result<Self> {
        Self::new(n, vec![Delay::Const(tau); n * n])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, j: usize, k: usize) -> &Delay {
        &self.entries[j * self.n + k]
    }

    /// Matrix of upper bounds `τ̄_{jk}`.
    pub fn upper_bounds(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |j, k| self.get(j, k).upper_bound())
    }

    pub fn max_upper_bound(&self) -> f64 {
        self.entries
            .iter()
            .map(Delay::upper_bound)
            .fold(0.0, f64::max)
    }

    pub fn min_lower_bound(&self) -> f64 {
        self.entries
            .iter()
            .map(Delay::lower_bound)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn all_constant(&self) -> bool {
        self.entries.iter().all(Delay::is_constant)
    }

    /// A copy with every upper bound (and every amplitude) multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let entries = self
            .entries
            .iter()
            .map(|d| match *d {
                Delay::Const(t) => Delay::Const(t * factor),
                Delay::Periodic {
                    base,
                    amp,
                    phase,
                    wave,
                } => Delay::Periodic {
                    base: base * factor,
                    amp: amp * factor,
                    phase,
                    wave,
                },
            })
            .collect();
        Self::new(self.n, entries)
    }
}

/// Square complex matrix stored as separate real and imaginary parts.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix {
    re: DMatrix<f64>,
    im: DMatrix<f64>,
}

impl ComplexMatrix {
    pub fn new(re: DMatrix<f64>, im: DMatrix<f64>) -> Result<Self> {
        if re.shape() != im.shape() {
            return Err(Error::Dimension(format!(
                "real part {:?} and imaginary part {:?} differ in shape",
                re.shape(),
                im.shape()
            )));
        }
        if re.iter().chain(im.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidNetwork(
                "matrix entries must be finite".into(),
            ));
        }
        Ok(Self { re, im })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            re: DMatrix::zeros(n, n),
            im: DMatrix::zeros(n, n),
        }
    }

    pub fn from_complex(n: usize, entries: &[Complex64]) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::Dimension(format!(
                "expected {} entries, got {}",
                n * n,
                entries.len()
            )));
        }
        let re = DMatrix::from_fn(n, n, |j, k| entries[j * n + k].re);
        let im = DMatrix::from_fn(n, n, |j, k| entries[j * n + k].im);
        Self::new(re, im)
    }

    pub fn rows(&self) -> usize {
        self.re.nrows()
    }

    pub fn cols(&self) -> usize {
        self.re.ncols()
    }

    pub fn re(&self) -> &DMatrix<f64> {
        &self.re
    }

    pub fn im(&self) -> &DMatrix<f64> {
        &self.im
    }

    #[inline]
    pub fn get(&self, j: usize, k: usize) -> Complex64 {
        Complex64::new(self.re[(j, k)], self.im[(j, k)])
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            re: &self.re * factor,
            im: &self.im * factor,
        }
    }
}

/// Complex recurrent network with asynchronous delays:
/// `ż_j = -d_j z_j + Σ_k a_{jk} f_k(z_k(t)) + Σ_k b_{jk} g_k(z_k(t - τ_{jk}(t))) + u_j`.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkSpec {
    pub d: Vec<f64>,
    pub a: ComplexMatrix,
    pub b: ComplexMatrix,
    pub u: Vec<Complex64>,
    pub delays: DelaySpec,
    pub activations: ActivationSpec,
}

impl NetworkSpec {
    pub fn new(
        d: Vec<f64>,
        a: ComplexMatrix,
        b: ComplexMatrix,
        u: Vec<Complex64>,
        delays: DelaySpec,
        activations: ActivationSpec,
    ) -> Result<Self> {
        let n = d.len();
        if n == 0 {
            return Err(Error::InvalidNetwork(
                "network must have at least one node".into(),
            ));
        }
        if let Some((j, v)) = d
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v > 0.0))
        {
            return Err(Error::InvalidNetwork(format!(
                "decay rate d[{j}] = {v} must be positive"
            )));
        }
        for (name, m) in [("A", &a), ("B", &b)] {
            if m.rows() != n || m.cols() != n {
                return Err(Error::Dimension(format!(
                    "{name} is {}x{}, expected {n}x{n}",
                    m.rows(),
                    m.cols()
                )));
            }
        }
        if u.len() != n {
            return Err(Error::Dimension(format!(
                "u has {} entries, expected {n}",
                u.len()
            )));
        }
        if u.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::InvalidNetwork("inputs u must be finite".into()));
        }
        if delays.n() != n {
            return Err(Error::Dimension(format!(
                "delays are {0}x{0}, expected {n}x{n}",
                delays.n()
            )));
        }
        if activations.len() != n {
            return Err(Error::Dimension(format!(
                "{} activation descriptors, expected {n}",
                activations.len()
            )));
        }
        Ok(Self {
            d,
            a,
            b,
            u,
            delays,
            activations,
        })
    }

    pub fn n(&self) -> usize {
        self.d.len()
    }

    pub fn with_input(&self, u: Vec<Complex64>) -> Result<Self> {
        Self::new(
            self.d.clone(),
            self.a.clone(),
            self.b.clone(),
            u,
            self.delays.clone(),
            self.activations.clone(),
        )
    }

    pub fn with_delays(&self, delays: DelaySpec) -> Result<Self> {
        Self::new(
            self.d.clone(),
            self.a.clone(),
            self.b.clone(),
            self.u.clone(),
            delays,
            self.activations.clone(),
        )
    }

    /// Right-hand side in complex arithmetic. `delayed[j * n + k]` is `z_k(t - τ_{jk}(t))`.
    pub fn complex_rhs(&self, z: &[Complex64], delayed: &[Complex64]) -> Vec<Complex64> {
        let n = self.n();
        let act = |k: usize, which: Which, v: Complex64| {
            let (r, i) = eval_activation(&self.activations, k, which, v.re, v.im);
            Complex64::new(r, i)
        };
        (0..n)
            .map(|j| {
                let mut acc = -self.d[j] * z[j] + self.u[j];
                for k in 0..n {
                    acc += self.a.get(j, k) * act(k, Which::F, z[k]);
                    acc += self.b.get(j, k) * act(k, Which::G, delayed[j * n + k]);
                }
                acc
            })
            .collect()
    }

    /// Right-hand side of the equivalent real system, state `(zᴿ, zᴵ)`.
    ///
    /// `delayed[2 * (j * n + k)]` and `delayed[2 * (j * n + k) + 1]` hold
    /// `zᴿ_k` and `zᴵ_k` at `t − τ_{jk}(t)`.
    pub fn real_rhs(&self, z: &[f64], delayed: &[f64], out: &mut [f64]) {
        let n = self.n();
        let net = self;
        let (ar, ai, br, bi) = (net.a.re(), net.a.im(), net.b.re(), net.b.im());
        let fv: Vec<(f64, f64)> = (0..n)
            .map(|k| net.activations.nodes[k].f.eval(z[k], z[n + k]))
            .collect();
        for j in 0..n {
            let mut re = -net.d[j] * z[j] + net.u[j].re;
            let mut im = -net.d[j] * z[n + j] + net.u[j].im;
            for k in 0..n {
                let (fr, fi) = fv[k];
                re += ar[(j, k)] * fr - ai[(j, k)] * fi;
                im += ar[(j, k)] * fi + ai[(j, k)] * fr;
                let (bre, bim) = (br[(j, k)], bi[(j, k)]);
                if bre != 0.0 || bim != 0.0 {
                    let idx = 2 * (j * n + k);
                    let (gr, gi) = net.activations.nodes[k]
                        .g
                        .eval(delayed[idx], delayed[idx + 1]);
                    re += bre * gr - bim * gi;
                    im += bre * gi + bim * gr;
                }
            }
            out[j] = re;
            out[n + j] = im;
        }
    }
}
