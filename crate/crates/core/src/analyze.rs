//! Post-processing of trajectories: equilibrium, decay rate and the
//! monotone quantities used in the stability proofs.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::criteria::TwoNormParams;
use crate::decompose::RealSystem;
use crate::error::{Error, Result};
use crate::model::NetworkSpec;
use crate::norms::{check_weights, weighted_norm, NormKind};
use crate::sim::Trajectory;

/// Fraction of samples averaged for the equilibrium.
pub const TAIL_FRACTION: f64 = 0.05;
pub const SETTLE_TOL: f64 = 1e-6;
pub const RESIDUAL_TOL: f64 = 1e-5;
/// Norm band used by the log-linear rate fit.
pub const FIT_BAND: (f64, f64) = (1e-8, 1e-2);

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EquilibriumEstimate {
    /// Mean of the tail window.
    pub z: Vec<f64>,
    /// Newton-polished fixed point started from `z`, when Newton converges.
    pub polished: Option<Vec<f64>>,
    pub settled: bool,
    /// Largest ∞-norm deviation from `z` inside the tail window.
    pub max_deviation: f64,
    /// `‖F(z)‖_∞` with every delayed argument equal to `z`.
    pub residual: f64,
    pub window: (f64, f64),
}

impl EquilibriumEstimate {
    /// The best available fixed point.
    pub fn best(&self) -> &[f64] {
        self.polished.as_deref().unwrap_or(&self.z)
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn rest_rhs(net: &NetworkSpec, z: &[f64]) -> Vec<f64> {
    let n = net.n();
    let mut delayed = vec![0.0; 2 * n * n];
    for e in 0..n * n {
        delayed[2 * e] = z[e % n];
        delayed[2 * e + 1] = z[n + e % n];
    }
    let mut out = vec![0.0; 2 * n];
    net.real_rhs(z, &delayed, &mut out);
    out
}

/// Newton on `F(z) = 0` with a central-difference Jacobian.
fn polish(net: &NetworkSpec, start: &[f64]) -> Option<Vec<f64>> {
    let dim = start.len();
    let mut z = DVector::from_column_slice(start);
    for _ in 0..20 {
        let f = DVector::from_vec(rest_rhs(net, z.as_slice()));
        if inf_norm(f.as_slice()) < 1e-13 {
            break;
        }
        let mut jac = DMatrix::zeros(dim, dim);
        for c in 0..dim {
            let step = 1e-6 * (1.0 + z[c].abs());
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp[c] += step;
            zm[c] -= step;
            let fp = rest_rhs(net, zp.as_slice());
            let fm = rest_rhs(net, zm.as_slice());
            for r in 0..dim {
                jac[(r, c)] = (fp[r] - fm[r]) / (2.0 * step);
            }
        }
        let dz = jac.lu().solve(&(-f))?;
        z += dz;
    }
    let done = inf_norm(&rest_rhs(net, z.as_slice())) < 1e-10;
    let near = z.iter().zip(start).all(|(a, b)| (a - b).abs() < 1e-3);
    (done && near).then(|| z.as_slice().to_vec())
}

/// Equilibrium from the last [`TAIL_FRACTION`] of samples.
pub fn estimate_equilibrium(traj: &Trajectory, net: &NetworkSpec) -> Result<EquilibriumEstimate> {
    if traj.is_empty() {
        return Err(Error::Analysis("empty trajectory".into()));
    }
    if traj.dim != 2 * net.n() {
        return Err(Error::Dimension(
            "trajectory does not match the network".into(),
        ));
    }
    if traj.states.iter().any(|v| !v.is_finite()) {
        return Err(Error::Analysis(
            "trajectory contains non-finite values".into(),
        ));
    }
    let len = traj.len();
    let count = ((len as f64 * TAIL_FRACTION).ceil() as usize).clamp(1, len);
    let first = len - count;
    let mut z = vec![0.0; traj.dim];
    for i in first..len {
        for (acc, v) in z.iter_mut().zip(traj.state(i)) {
            *acc += v;
        }
    }
    z.iter_mut().for_each(|v| *v /= count as f64);
    let max_deviation = (first..len)
        .map(|i| {
            traj.state(i)
                .iter()
                .zip(&z)
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
        })
        .fold(0.0, f64::max);
    let residual = inf_norm(&rest_rhs(net, &z));
    Ok(EquilibriumEstimate {
        polished: polish(net, &z),
        settled: max_deviation < SETTLE_TOL && residual < RESIDUAL_TOL,
        max_deviation,
        residual,
        window: (traj.times[first], traj.t_end()),
        z,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateEstimate {
    pub equilibrium: Vec<f64>,
    /// `−slope` of `ln ‖Z − Z̄‖_{ξ,∞}`.
    pub rate: f64,
    pub window: (f64, f64),
    /// Root-mean-square residual of the log-linear fit.
    pub residual: f64,
    pub samples: usize,
}

/// Least-squares decay rate over the stretch where `‖Z − Z̄‖_{ξ,∞}` lies in [`FIT_BAND`].
pub fn estimate_rate(
    traj: &Trajectory,
    eq: &EquilibriumEstimate,
    xi: &[f64],
) -> Result<RateEstimate> {
    if !eq.settled {
        return Err(Error::Analysis(format!(
            "trajectory has not settled (deviation {:.3e}, residual {:.3e})",
            eq.max_deviation, eq.residual
        )));
    }
    check_weights(xi)?;
    if xi.len() != traj.dim {
        return Err(Error::Dimension("weights do not match the state".into()));
    }
    let zbar = eq.best();
    let dist: Vec<f64> = (0..traj.len())
        .map(|i| {
            let diff: Vec<f64> = traj.state(i).iter().zip(zbar).map(|(a, b)| a - b).collect();
            weighted_norm(&diff, xi, NormKind::Inf)
        })
        .collect();
    let (lo, hi) = FIT_BAND;
    // start after the last excursion above the band, stop at the first dip below it
    let start = dist.iter().rposition(|d| *d > hi).map_or(0, |i| i + 1);
    let stop = dist[start..]
        .iter()
        .position(|d| *d < lo)
        .map_or(dist.len(), |i| start + i);
    let idx: Vec<usize> = (start..stop).filter(|&i| dist[i] > 0.0).collect();
    if idx.len() < 10 {
        return Err(Error::Analysis(format!(
            "only {} samples with distance in [{lo:e}, {hi:e}]; extend the run",
            idx.len()
        )));
    }
    let m = idx.len() as f64;
    let tm = idx.iter().map(|&i| traj.times[i]).sum::<f64>() / m;
    let ym = idx.iter().map(|&i| dist[i].ln()).sum::<f64>() / m;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &i in &idx {
        let dt = traj.times[i] - tm;
        sxy += dt * (dist[i].ln() - ym);
        sxx += dt * dt;
    }
    let slope = sxy / sxx;
    let residual = (idx
        .iter()
        .map(|&i| {
            let r = dist[i].ln() - (ym + slope * (traj.times[i] - tm));
            r * r
        })
        .sum::<f64>()
        / m)
        .sqrt();
    Ok(RateEstimate {
        equilibrium: zbar.to_vec(),
        rate: -slope,
        window: (traj.times[idx[0]], traj.times[*idx.last().unwrap()]),
        residual,
        samples: idx.len(),
    })
}

/// A series checked for being nonincreasing.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MonotoneSeries {
    pub values: Vec<f64>,
    /// Largest rise above the running minimum.
    pub max_rise: f64,
    /// First time the series exceeds its running minimum by more than the tolerance.
    pub first_violation: Option<f64>,
}

impl MonotoneSeries {
    fn new(times: &[f64], values: Vec<f64>, tol: f64) -> Self {
        let mut run_min = f64::INFINITY;
        let mut max_rise = 0.0f64;
        let mut first_violation = None;
        for (t, v) in times.iter().zip(&values) {
            let rise = v - run_min;
            if rise > max_rise {
                max_rise = rise;
            }
            if rise > tol && first_violation.is_none() {
                first_violation = Some(*t);
            }
            run_min = run_min.min(*v);
        }
        Self {
            values,
            max_rise,
            first_violation,
        }
    }

    pub fn is_nonincreasing(&self) -> bool {
        self.first_violation.is_none()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Diagnostics {
    pub times: Vec<f64>,
    pub m: MonotoneSeries,
    pub l1: MonotoneSeries,
    pub l2: MonotoneSeries,
}

/// Tolerances for [`appendix_diagnostics`]; absolute plus relative to the initial value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MonotoneTolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Default for MonotoneTolerance {
    fn default() -> Self {
        Self {
            abs: 1e-6,
            rel: 1e-6,
        }
    }
}

fn check_inputs(traj: &Trajectory, sys: &RealSystem, xi: &[f64], eps: f64) -> Result<()> {
    if traj.dim != sys.dim() || xi.len() != sys.dim() {
        return Err(Error::Dimension(
            "trajectory, system and weights disagree in size".into(),
        ));
    }
    if traj.is_empty() {
        return Err(Error::Analysis("empty trajectory".into()));
    }
    check_weights(xi)?;
    if !(eps.is_finite() && eps >= 0.0) {
        return Err(Error::InvalidRate(
            eps,
            "rate must be finite and nonnegative",
        ));
    }
    Ok(())
}

/// `X(t) = e^{εt} Ż(t)` at every sample.
fn scaled_derivs(traj: &Trajectory, eps: f64) -> Vec<Vec<f64>> {
    (0..traj.len())
        .map(|i| {
            let s = (eps * traj.times[i]).exp();
            traj.deriv(i).iter().map(|v| s * v).collect()
        })
        .collect()
}

/// `M(t) = sup_{max(0, t−τ̄_max) ≤ s ≤ t} ‖X(s)‖_{ξ,∞}` on the sample grid.
pub fn m_series(
    traj: &Trajectory,
    sys: &RealSystem,
    xi: &[f64],
    eps: f64,
    tol: MonotoneTolerance,
) -> Result<MonotoneSeries> {
    check_inputs(traj, sys, xi, eps)?;
    let x = scaled_derivs(traj, eps);
    let norms: Vec<f64> = x
        .iter()
        .map(|v| weighted_norm(v, xi, NormKind::Inf))
        .collect();
    let tau = sys.tau_max();
    let mut window: VecDeque<usize> = VecDeque::new();
    let mut values = Vec::with_capacity(norms.len());
    for i in 0..norms.len() {
        while window.back().is_some_and(|&j| norms[j] <= norms[i]) {
            window.pop_back();
        }
        window.push_back(i);
        let t0 = traj.times[i] - tau;
        while window.front().is_some_and(|&j| traj.times[j] < t0 - 1e-12) {
            window.pop_front();
        }
        values.push(norms[window[0]]);
    }
    let scale = values.first().copied().unwrap_or(0.0);
    Ok(MonotoneSeries::new(
        &traj.times,
        values,
        tol.abs + tol.rel * scale,
    ))
}

/// Cumulative trapezoid of each column of `vals` over `times`.
fn cumulative(times: &[f64], vals: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let dim = vals.first().map_or(0, |v| v.len());
    let mut out = vec![vec![0.0; dim]];
    for i in 1..vals.len() {
        let dt = times[i] - times[i - 1];
        let prev = &out[i - 1];
        let next = (0..dim)
            .map(|c| prev[c] + 0.5 * dt * (vals[i - 1][c] + vals[i][c]))
            .collect();
        out.push(next);
    }
    out
}

/// `∫_{t−τ}^{t}` of column `c` using the cumulative table (zero before `t = 0`).
/// The partial first interval uses the interpolated integrand, so linear data integrate exactly.
fn window_integral(
    times: &[f64],
    vals: &[Vec<f64>],
    cum: &[Vec<f64>],
    h: f64,
    i: usize,
    c: usize,
    tau: f64,
) -> f64 {
    let t0 = times[i] - tau;
    if t0 <= 0.0 {
        return cum[i][c];
    }
    let pos = t0 / h;
    let k = (pos.floor() as usize).min(i);
    let frac = pos - k as f64;
    let at = if k < i && frac > 1e-12 {
        let v0 = vals[k][c];
        let v_mid = v0 + frac * (vals[k + 1][c] - v0);
        cum[k][c] + 0.5 * frac * h * (v0 + v_mid)
    } else {
        cum[k][c]
    };
    cum[i][c] - at
}

/// Which Lyapunov functional to build.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Power {
    One,
    Two,
}

fn lyapunov(
    traj: &Trajectory,
    sys: &RealSystem,
    xi: &[f64],
    eps: f64,
    params: Option<&TwoNormParams>,
    power: Power,
) -> Vec<f64> {
    let n = sys.n();
    let net = sys.network();
    let mu = &sys.bounds().mu;
    let tau_bar = sys.tau_bar();
    let ones;
    let p = match params {
        Some(p) => p,
        None => {
            ones = TwoNormParams::ones(n);
            &ones
        }
    };
    let x = scaled_derivs(traj, eps);
    let integrand: Vec<Vec<f64>> = x
        .iter()
        .map(|v| match power {
            Power::One => v.iter().map(|a| a.abs()).collect(),
            Power::Two => v.iter().map(|a| a * a).collect(),
        })
        .collect();
    let cum = cumulative(&traj.times, &integrand);
    let growth = match power {
        Power::One => 1.0,
        Power::Two => 2.0,
    };
    // coefficient pairs per edge (j, k)
    let mut coef = vec![(0.0, 0.0); n * n];
    for j in 0..n {
        for k in 0..n {
            let br = net.b.re()[(j, k)].abs();
            let bi = net.b.im()[(j, k)].abs();
            let m = &mu[k];
            let (xj, pj) = (xi[j], xi[n + j]);
            let e = (growth * eps * tau_bar[(j, k)]).exp();
            let (a, b) = match power {
                Power::One => (
                    xj * (br * m.rr + bi * m.ir) + pj * (br * m.ir + bi * m.rr),
                    xj * (br * m.ri + bi * m.ii) + pj * (br * m.ii + bi * m.ri),
                ),
                Power::Two => (
                    xj * (br * m.rr + bi * m.ir) / p.pi[2][j * n + k]
                        + pj * (br * m.ir + bi * m.rr) / p.omega[2][j * n + k],
                    xj * (br * m.ri + bi * m.ii) / p.pi[3][j * n + k]
                        + pj * (br * m.ii + bi * m.ri) / p.omega[3][j * n + k],
                ),
            };
            coef[j * n + k] = (a * e, b * e);
        }
    }
    (0..traj.len())
        .map(|i| {
            let t = traj.times[i];
            let mut l: f64 = (0..2 * n).map(|c| xi[c] * integrand[i][c]).sum();
            for j in 0..n {
                for k in 0..n {
                    let tau = net.delays.get(j, k).at(t);
                    let (a, b) = coef[j * n + k];
                    l += a * window_integral(&traj.times, &integrand, &cum, traj.h, i, k, tau);
                    l += b * window_integral(&traj.times, &integrand, &cum, traj.h, i, n + k, tau);
                }
            }
            l
        })
        .collect()
}

/// `L₁(t)`: weighted 1-norm of `X` plus the delayed integral terms.
pub fn l1_series(
    traj: &Trajectory,
    sys: &RealSystem,
    xi: &[f64],
    eps: f64,
    tol: MonotoneTolerance,
) -> Result<MonotoneSeries> {
    check_inputs(traj, sys, xi, eps)?;
    let v = lyapunov(traj, sys, xi, eps, None, Power::One);
    let scale = v.first().copied().unwrap_or(0.0);
    Ok(MonotoneSeries::new(
        &traj.times,
        v,
        tol.abs + tol.rel * scale,
    ))
}

/// `L₂(t)`: weighted squares of `X` plus the delayed integral terms.
pub fn l2_series(
    traj: &Trajectory,
    sys: &RealSystem,
    xi: &[f64],
    eps: f64,
    params: Option<&TwoNormParams>,
    tol: MonotoneTolerance,
) -> Result<MonotoneSeries> {
    check_inputs(traj, sys, xi, eps)?;
    if let Some(p) = params {
        if p.n != sys.n() {
            return Err(Error::Dimension(
                "2-norm parameters do not match the network".into(),
            ));
        }
    }
    let v = lyapunov(traj, sys, xi, eps, params, Power::Two);
    let scale = v.first().copied().unwrap_or(0.0);
    Ok(MonotoneSeries::new(
        &traj.times,
        v,
        tol.abs + tol.rel * scale,
    ))
}

/// All three series with one `(ξ, ε)`. The integral terms treat the initial
/// segment as constant (`Ż = 0` before `t = 0`).
pub fn appendix_diagnostics(
    traj: &Trajectory,
    sys: &RealSystem,
    xi: &[f64],
    eps: f64,
    params: Option<&TwoNormParams>,
    tol: MonotoneTolerance,
) -> Result<Diagnostics> {
    Ok(Diagnostics {
        times: traj.times.clone(),
        m: m_series(traj, sys, xi, eps, tol)?,
        l1: l1_series(traj, sys, xi, eps, tol)?,
        l2: l2_series(traj, sys, xi, eps, params, tol)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monotone_series_reports_first_rise() {
        let s = MonotoneSeries::new(&[0.0, 1.0, 2.0, 3.0], vec![3.0, 2.0, 2.5, 1.0], 0.1);
        assert_eq!(s.first_violation, Some(2.0));
        assert!((s.max_rise - 0.5).abs() < 1e-15);
        let ok = MonotoneSeries::new(&[0.0, 1.0], vec![1.0, 1.05], 0.1);
        assert!(ok.is_nonincreasing());
    }

    #[test]
    fn cumulative_trapezoid_of_linear_function() {
        let t = [0.0, 0.5, 1.0, 1.5];
        let v: Vec<Vec<f64>> = t.iter().map(|x| vec![*x]).collect();
        let c = cumulative(&t, &v);
        assert!((c[3][0] - 1.125).abs() < 1e-15);
        assert!(
            (window_integral(&t, &v, &c, 0.5, 3, 0, 0.75) - (1.125 - 0.5 * 0.75 * 0.75)).abs()
                < 1e-15
        );
    }
}
