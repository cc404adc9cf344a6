//! Fixed-step RK4 for delayed systems with cubic Hermite dense output.
//!
//! Delayed arguments inside the committed history are interpolated from the
//! stored `(t, Z, Ż)` triples; before `t = 0` they come from the initial
//! segment; beyond the last committed point (only possible when a delay is
//! shorter than the step) they are extrapolated linearly from that point.

use std::io::Write;

use num_complex::Complex64;

use crate::decompose::RealSystem;
use crate::error::{Error, Result};
use crate::model::NetworkSpec;
use crate::norms::{weighted_norm, NormKind};

/// Runs abort once the ∞-norm of the state exceeds this.
pub const DIVERGENCE_NORM: f64 = 1e9;

/// Step cap when some delay can vanish.
pub const MAX_STEP_VANISHING_DELAY: f64 = 1e-2;

/// A system `Ż(t) = F(t, Z(t), Z(t − τ₁(t))|_{c₁}, …)` with finitely many lags,
/// each reading a fixed subset of state components.
pub trait DelayedSystem: Sync {
    fn dim(&self) -> usize;
    fn lag_count(&self) -> usize;
    /// Components read through lag `i`; delayed values are passed lag by lag
    /// in this order.
    fn lag_components(&self, i: usize) -> &[usize];
    fn lag(&self, i: usize, t: f64) -> f64;
    fn max_lag(&self) -> f64;
    fn min_lag(&self) -> f64;
    fn rhs(&self, t: f64, z: &[f64], delayed: &[f64], out: &mut [f64]);
}

/// The network in its real form: lag `j·n + k` is edge `k → j` and reads `(zᴿ_k, zᴵ_k)`.
pub struct NetworkSystem<'a> {
    net: &'a NetworkSpec,
    comps: Vec<[usize; 2]>,
    tau_max: f64,
    tau_min: f64,
}

impl<'a> NetworkSystem<'a> {
    pub fn new(net: &'a NetworkSpec) -> Self {
        let n = net.n();
        let comps = (0..n * n).map(|e| [e % n, n + e % n]).collect();
        Self {
            net,
            comps,
            tau_max: net.delays.max_upper_bound(),
            tau_min: net.delays.min_lower_bound(),
        }
    }
}

impl DelayedSystem for NetworkSystem<'_> {
    fn dim(&self) -> usize {
        2 * self.net.n()
    }
    fn lag_count(&self) -> usize {
        self.comps.len()
    }
    fn lag_components(&self, i: usize) -> &[usize] {
        &self.comps[i]
    }
    fn lag(&self, i: usize, t: f64) -> f64 {
        let n = self.net.n();
        self.net.delays.get(i / n, i % n).at(t)
    }
    fn max_lag(&self) -> f64 {
        self.tau_max
    }
    fn min_lag(&self) -> f64 {
        self.tau_min
    }
    fn rhs(&self, _t: f64, z: &[f64], delayed: &[f64], out: &mut [f64]) {
        self.net.real_rhs(z, delayed, out)
    }
}

/// Initial segment on `[−τ̄_max, 0]`.
#[derive(Clone, Debug, PartialEq)]
pub enum History {
    Constant(Vec<f64>),
    /// Per real component, polynomial coefficients in `t`, lowest degree first.
    Polynomial(Vec<Vec<f64>>),
}

impl History {
    /// Constant complex initial value, laid out as `(zᴿ, zᴵ)`.
    pub fn from_complex(z0: &[Complex64]) -> Self {
        History::Constant(
            z0.iter()
                .map(|z| z.re)
                .chain(z0.iter().map(|z| z.im))
                .collect(),
        )
    }

    pub fn dim(&self) -> usize {
        match self {
            History::Constant(v) => v.len(),
            History::Polynomial(p) => p.len(),
        }
    }

    pub fn value(&self, comp: usize, t: f64) -> f64 {
        match self {
            History::Constant(v) => v[comp],
            History::Polynomial(p) => p[comp].iter().rev().fold(0.0, |acc, c| acc * t + c),
        }
    }

    fn state(&self, t: f64) -> Vec<f64> {
        (0..self.dim()).map(|c| self.value(c, t)).collect()
    }
}

/// Uniform-grid solution with stored derivatives.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub dim: usize,
    pub h: f64,
    pub times: Vec<f64>,
    /// Row-major, `dim` values per sample.
    pub states: Vec<f64>,
    pub derivs: Vec<f64>,
    pub delay_evals: u64,
    /// Longest delay of the simulated system.
    pub max_lag: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn deriv(&self, i: usize) -> &[f64] {
        &self.derivs[i * self.dim..(i + 1) * self.dim]
    }

    pub fn final_state(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    /// `[‖Z‖_∞, ‖Z‖_1, ‖Z‖_2]` of sample `i` with weights `xi`.
    pub fn norms(&self, i: usize, xi: &[f64]) -> [f64; 3] {
        let z = self.state(i);
        [
            weighted_norm(z, xi, NormKind::Inf),
            weighted_norm(z, xi, NormKind::One),
            weighted_norm(z, xi, NormKind::Two),
        ]
    }

    /// Writes every `stride`-th sample (and the last one) as CSV with columns
    /// `t, z1R, z1I, …, znR, znI, norm_inf, norm_1, norm_2`. Norms use `xi`,
    /// or unit weights when `None`.
    pub fn write_csv<W: Write>(&self, w: W, stride: usize, xi: Option<&[f64]>) -> Result<()> {
        self.write_csv_with(w, stride, xi, &[])
    }

    /// [`Trajectory::write_csv`] plus extra per-sample columns (one value per stored sample).
    pub fn write_csv_with<W: Write>(
        &self,
        mut w: W,
        stride: usize,
        xi: Option<&[f64]>,
        extra: &[(&str, &[f64])],
    ) -> Result<()> {
        if !self.dim.is_multiple_of(2) {
            return Err(Error::Dimension(
                "CSV export expects a (real, imaginary) state layout".into(),
            ));
        }
        if stride == 0 {
            return Err(Error::Config("stride must be positive".into()));
        }
        if let Some((name, _)) = extra.iter().find(|(_, v)| v.len() != self.len()) {
            return Err(Error::Dimension(format!(
                "column {name} does not have one value per sample"
            )));
        }
        let n = self.dim / 2;
        let ones = vec![1.0; self.dim];
        let xi = xi.unwrap_or(&ones);
        if xi.len() != self.dim {
            return Err(Error::Dimension(
                "norm weights do not match the state".into(),
            ));
        }
        let mut header = String::from("t");
        for k in 1..=n {
            header.push_str(&format!(",z{k}R,z{k}I"));
        }
        header.push_str(",norm_inf,norm_1,norm_2");
        for (name, _) in extra {
            header.push(',');
            header.push_str(name);
        }
        writeln!(w, "{header}")?;
        let last = self.len().saturating_sub(1);
        for i in (0..self.len()).filter(|i| i % stride == 0 || *i == last) {
            let z = self.state(i);
            let mut line = format!("{}", self.times[i]);
            for k in 0..n {
                line.push_str(&format!(",{},{}", z[k], z[n + k]));
            }
            let [a, b, c] = self.norms(i, xi);
            line.push_str(&format!(",{a},{b},{c}"));
            for (_, v) in extra {
                line.push_str(&format!(",{}", v[i]));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    /// State at an arbitrary `t ∈ [0, t_end]` by Hermite interpolation.
    pub fn interpolate(&self, t: f64) -> Vec<f64> {
        let store = Store {
            traj: self,
            committed: self.len() - 1,
        };
        (0..self.dim).map(|c| store.hermite(c, t)).collect()
    }
}

struct Store<'a> {
    traj: &'a Trajectory,
    committed: usize,
}

impl Store<'_> {
    fn hermite(&self, c: usize, t: f64) -> f64 {
        let tr = self.traj;
        let h = tr.h;
        let last = self.committed;
        if last == 0 {
            return tr.state(0)[c] + t * tr.deriv(0)[c];
        }
        let i = ((t / h).floor() as usize).min(last - 1);
        let s = (t - tr.times[i]) / h;
        let (z0, z1) = (tr.states[i * tr.dim + c], tr.states[(i + 1) * tr.dim + c]);
        let (d0, d1) = (tr.derivs[i * tr.dim + c], tr.derivs[(i + 1) * tr.dim + c]);
        let s2 = s * s;
        let s3 = s2 * s;
        (2.0 * s3 - 3.0 * s2 + 1.0) * z0
            + (s3 - 2.0 * s2 + s) * h * d0
            + (-2.0 * s3 + 3.0 * s2) * z1
            + (s3 - s2) * h * d1
    }
}

struct Integrator<'a, S: DelayedSystem + ?Sized> {
    sys: &'a S,
    history: &'a History,
    traj: Trajectory,
    /// Index of the last sample whose derivative is stored.
    committed: Option<usize>,
    earliest: f64,
    delayed: Vec<f64>,
}

impl<S: DelayedSystem + ?Sized> Integrator<'_, S> {
    fn lookup(&self, c: usize, t: f64) -> f64 {
        if t <= 0.0 {
            return self.history.value(c, t);
        }
        let tr = &self.traj;
        match self.committed {
            None => self.history.value(c, 0.0),
            Some(last) if t > tr.times[last] => {
                tr.states[last * tr.dim + c] + (t - tr.times[last]) * tr.derivs[last * tr.dim + c]
            }
            Some(last) => Store {
                traj: tr,
                committed: last,
            }
            .hermite(c, t),
        }
    }

    fn eval(&mut self, t: f64, z: &[f64], out: &mut [f64]) -> Result<()> {
        let mut pos = 0;
        for i in 0..self.sys.lag_count() {
            let td = t - self.sys.lag(i, t);
            if td < self.earliest {
                return Err(Error::Config(format!(
                    "delayed time {td} precedes the initial segment at t = {t}"
                )));
            }
            for &c in self.sys.lag_components(i) {
                self.delayed[pos] = self.lookup(c, td);
                pos += 1;
            }
        }
        self.traj.delay_evals += self.sys.lag_count() as u64;
        self.sys.rhs(t, z, &self.delayed, out);
        Ok(())
    }

    /// Computes and stores `Ż` at the newest sample.
    fn commit(&mut self) -> Result<Vec<f64>> {
        let i = self.traj.len() - 1;
        let t = self.traj.times[i];
        let z = self.traj.state(i).to_vec();
        let mut k = vec![0.0; self.traj.dim];
        self.eval(t, &z, &mut k)?;
        self.traj.derivs.extend_from_slice(&k);
        self.committed = Some(i);
        Ok(k)
    }
}

/// Integrates `sys` from the initial segment to `t_end` with step `h`.
pub fn simulate_system<S: DelayedSystem + ?Sized>(
    sys: &S,
    history: &History,
    t_end: f64,
    h: f64,
) -> Result<Trajectory> {
    let dim = sys.dim();
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::Config(format!(
            "step size must be positive, got {h}"
        )));
    }
    if !(t_end.is_finite() && t_end > 0.0) {
        return Err(Error::Config(format!(
            "end time must be positive, got {t_end}"
        )));
    }
    if history.dim() != dim {
        return Err(Error::Dimension(format!(
            "history has {} components, system has {dim}",
            history.dim()
        )));
    }
    if sys.min_lag() <= 0.0 && h > MAX_STEP_VANISHING_DELAY {
        return Err(Error::Config(format!(
            "a delay can vanish; step must be at most {MAX_STEP_VANISHING_DELAY}, got {h}"
        )));
    }
    let steps = (t_end / h - 1e-9).ceil().max(1.0) as usize;
    let delayed_len = (0..sys.lag_count())
        .map(|i| sys.lag_components(i).len())
        .sum();
    let mut it = Integrator {
        sys,
        history,
        traj: Trajectory {
            dim,
            h,
            times: Vec::with_capacity(steps + 1),
            states: Vec::with_capacity((steps + 1) * dim),
            derivs: Vec::with_capacity((steps + 1) * dim),
            delay_evals: 0,
            max_lag: sys.max_lag(),
        },
        committed: None,
        earliest: -sys.max_lag() - h,
        delayed: vec![0.0; delayed_len],
    };
    it.traj.times.push(0.0);
    it.traj.states.extend(history.state(0.0));

    let mut stage = vec![0.0; dim];
    let (mut k2, mut k3, mut k4) = (vec![0.0; dim], vec![0.0; dim], vec![0.0; dim]);
    for step in 0..steps {
        let t = step as f64 * h;
        let z = it.traj.state(step).to_vec();
        let k1 = it.commit()?;
        for c in 0..dim {
            stage[c] = z[c] + 0.5 * h * k1[c];
        }
        it.eval(t + 0.5 * h, &stage, &mut k2)?;
        for c in 0..dim {
            stage[c] = z[c] + 0.5 * h * k2[c];
        }
        it.eval(t + 0.5 * h, &stage, &mut k3)?;
        for c in 0..dim {
            stage[c] = z[c] + h * k3[c];
        }
        it.eval(t + h, &stage, &mut k4)?;
        let next: Vec<f64> = (0..dim)
            .map(|c| z[c] + h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]))
            .collect();
        let t_next = (step + 1) as f64 * h;
        let norm = next.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !norm.is_finite() || norm > DIVERGENCE_NORM {
            return Err(Error::Divergence { time: t_next, norm });
        }
        it.traj.times.push(t_next);
        it.traj.states.extend(next);
    }
    it.commit()?;
    Ok(it.traj)
}

/// Integrates the real form of the network.
pub fn simulate(sys: &RealSystem, history: &History, t_end: f64, h: f64) -> Result<Trajectory> {
    simulate_system(&NetworkSystem::new(sys.network()), history, t_end, h)
}

/// Integrates the network directly from its complex description; states are
/// reported as `(z₁ᴿ, …, zₙᴿ, z₁ᴵ, …, zₙᴵ)`.
pub fn simulate_complex(
    net: &NetworkSpec,
    z0: &[Complex64],
    t_end: f64,
    h: f64,
) -> Result<Trajectory> {
    if z0.len() != net.n() {
        return Err(Error::Dimension(format!(
            "initial value has {} entries, network has {}",
            z0.len(),
            net.n()
        )));
    }
    simulate_system(
        &NetworkSystem::new(net),
        &History::from_complex(z0),
        t_end,
        h,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `ż = −z(t − 1)`.
    struct PureDelay;

    impl DelayedSystem for PureDelay {
        fn dim(&self) -> usize {
            1
        }
        fn lag_count(&self) -> usize {
            1
        }
        fn lag_components(&self, _: usize) -> &[usize] {
            &[0]
        }
        fn lag(&self, _: usize, _: f64) -> f64 {
            1.0
        }
        fn max_lag(&self) -> f64 {
            1.0
        }
        fn min_lag(&self) -> f64 {
            1.0
        }
        fn rhs(&self, _: f64, _: &[f64], delayed: &[f64], out: &mut [f64]) {
            out[0] = -delayed[0];
        }
    }

    fn steps_solution(t: f64) -> f64 {
        // method of steps from z ≡ 1 on [−1, 0]
        let mut z = 1.0 - t;
        if t > 1.0 {
            z += (t - 1.0).powi(2) / 2.0;
        }
        if t > 2.0 {
            z -= (t - 2.0).powi(3) / 6.0;
        }
        z
    }

    #[test]
    fn pure_delay_matches_method_of_steps() {
        let traj = simulate_system(&PureDelay, &History::Constant(vec![1.0]), 3.0, 1e-3).unwrap();
        for i in 0..traj.len() {
            let t = traj.times[i];
            assert!(
                (traj.state(i)[0] - steps_solution(t)).abs() < 1e-6,
                "t = {t}"
            );
        }
        for t in [0.3, 1.2345, 2.71] {
            assert!((traj.interpolate(t)[0] - steps_solution(t)).abs() < 1e-6);
        }
    }

    #[test]
    fn polynomial_history_is_evaluated() {
        let h = History::Polynomial(vec![vec![1.0, 2.0, 3.0]]);
        assert_eq!(h.value(0, -1.0), 2.0);
        assert_eq!(h.value(0, 0.0), 1.0);
    }

    #[test]
    fn rejects_bad_steps() {
        let hist = History::Constant(vec![1.0]);
        assert!(matches!(
            simulate_system(&PureDelay, &hist, 1.0, 0.0),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            simulate_system(&PureDelay, &hist, -1.0, 0.1),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            simulate_system(&PureDelay, &History::Constant(vec![1.0, 2.0]), 1.0, 0.1),
            Err(Error::Dimension(_))
        ));
    }

    /// `ż = z(t − 1)`, blows up.
    struct Growth;

    impl DelayedSystem for Growth {
        fn dim(&self) -> usize {
            1
        }
        fn lag_count(&self) -> usize {
            0
        }
        fn lag_components(&self, _: usize) -> &[usize] {
            &[]
        }
        fn lag(&self, _: usize, _: f64) -> f64 {
            0.0
        }
        fn max_lag(&self) -> f64 {
            0.0
        }
        fn min_lag(&self) -> f64 {
            1.0
        }
        fn rhs(&self, _: f64, z: &[f64], _: &[f64], out: &mut [f64]) {
            out[0] = 5.0 * z[0];
        }
    }

    #[test]
    fn divergence_is_reported_with_time() {
        match simulate_system(&Growth, &History::Constant(vec![1.0]), 10.0, 1e-2) {
            Err(Error::Divergence { time, norm }) => {
                assert!(norm > DIVERGENCE_NORM);
                assert!((4.0..4.3).contains(&time), "{time}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn runs_are_bit_identical() {
        let a = simulate_system(&PureDelay, &History::Constant(vec![1.0]), 2.0, 1e-2).unwrap();
        let b = simulate_system(&PureDelay, &History::Constant(vec![1.0]), 2.0, 1e-2).unwrap();
        assert_eq!(a, b);
    }
}
