//! Small dense linear programs: two-phase tableau simplex with Bland's rule.
//!
//! Sized for the certificate searches in this crate (tens of variables).

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-11;
const FEAS_TOL: f64 = 1e-9;
const MAX_PIVOTS: usize = 200_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

/// `maximize cᵀx` subject to the constraints and per-variable bounds.
/// Variables default to `x ≥ 0` with no upper bound.
#[derive(Clone, Debug)]
pub struct LinearProgram {
    objective: Vec<f64>,
    constraints: Vec<Constraint>,
    lower: Vec<Option<f64>>,
    upper: Vec<Option<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, objective: f64 },
    Infeasible,
    Unbounded,
}

impl LinearProgram {
    pub fn maximize(objective: Vec<f64>) -> Self {
        let n = objective.len();
        Self {
            objective,
            constraints: Vec::new(),
            lower: vec![Some(0.0); n],
            upper: vec![None; n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn constrain(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) -> &mut Self {
        assert_eq!(coeffs.len(), self.num_vars(), "constraint width");
        self.constraints.push(Constraint {
            coeffs,
            relation,
            rhs,
        });
        self
    }

    pub fn bounds(&mut self, var: usize, lower: Option<f64>, upper: Option<f64>) -> &mut Self {
        self.lower[var] = lower;
        self.upper[var] = upper;
        self
    }

    pub fn free(&mut self, var: usize) -> &mut Self {
        self.bounds(var, None, None)
    }

    pub fn solve(&self) -> Result<LpOutcome> {
        for (i, (l, u)) in self.lower.iter().zip(&self.upper).enumerate() {
            if let (Some(l), Some(u)) = (l, u) {
                if l > u {
                    return Err(Error::Lp(format!(
                        "variable {i} has lower bound {l} > upper bound {u}"
                    )));
                }
            }
        }
        Standard::build(self).solve()
    }
}

/// How an original variable maps onto nonnegative standard-form columns.
#[derive(Clone, Copy, Debug)]
enum VarMap {
    /// x = offset + y[col]
    Shift { col: usize, offset: f64 },
    /// x = offset - y[col]
    Mirror { col: usize, offset: f64 },
    /// x = y[pos] - y[neg]
    Split { pos: usize, neg: usize },
}

struct Standard {
    map: Vec<VarMap>,
    ncols: usize,
    /// rows as (coeffs over standard columns, relation, rhs)
    rows: Vec<(Vec<f64>, Relation, f64)>,
    objective: Vec<f64>,
    objective_offset: f64,
}

impl Standard {
    fn build(lp: &LinearProgram) -> Self {
        let mut map = Vec::with_capacity(lp.num_vars());
        let mut ncols = 0;
        for i in 0..lp.num_vars() {
            let m = match (lp.lower[i], lp.upper[i]) {
                (Some(l), _) => VarMap::Shift {
                    col: ncols,
                    offset: l,
                },
                (None, Some(u)) => VarMap::Mirror {
                    col: ncols,
                    offset: u,
                },
                (None, None) => {
                    ncols += 1;
                    VarMap::Split {
                        pos: ncols - 1,
                        neg: ncols,
                    }
                }
            };
            ncols += 1;
            map.push(m);
        }

        // substitute x = T y + offset into a linear form
        let expand = |coeffs: &[f64]| -> (Vec<f64>, f64) {
            let mut row = vec![0.0; ncols];
            let mut constant = 0.0;
            for (i, &c) in coeffs.iter().enumerate() {
                if c == 0.0 {
                    continue;
                }
                match map[i] {
                    VarMap::Shift { col, offset } => {
                        row[col] += c;
                        constant += c * offset;
                    }
                    VarMap::Mirror { col, offset } => {
                        row[col] -= c;
                        constant += c * offset;
                    }
                    VarMap::Split { pos, neg } => {
                        row[pos] += c;
                        row[neg] -= c;
                    }
                }
            }
            (row, constant)
        };

        let mut rows = Vec::new();
        for con in &lp.constraints {
            let (row, constant) = expand(&con.coeffs);
            rows.push((row, con.relation, con.rhs - constant));
        }
        for (i, m) in map.iter().enumerate().take(lp.num_vars()) {
            if let (Some(l), Some(u)) = (lp.lower[i], lp.upper[i]) {
                if let VarMap::Shift { col, .. } = *m {
                    let mut row = vec![0.0; ncols];
                    row[col] = 1.0;
                    rows.push((row, Relation::Le, u - l));
                }
            }
        }
        let (objective, objective_offset) = expand(&lp.objective);
        Self {
            map,
            ncols,
            rows,
            objective,
            objective_offset,
        }
    }

    fn recover(&self, y: &[f64]) -> Vec<f64> {
        self.map
            .iter()
            .map(|m| match *m {
                VarMap::Shift { col, offset } => offset + y[col],
                VarMap::Mirror { col, offset } => offset - y[col],
                VarMap::Split { pos, neg } => y[pos] - y[neg],
            })
            .collect()
    }

    fn solve(&self) -> Result<LpOutcome> {
        let m = self.rows.len();
        let nstruct = self.ncols;
        // slack/surplus per inequality row, artificial per Ge/Eq row (after sign normalization)
        let mut kinds = Vec::with_capacity(m);
        for (coeffs, rel, rhs) in &self.rows {
            let flip = *rhs < 0.0;
            let rel = match (rel, flip) {
                (Relation::Le, true) => Relation::Ge,
                (Relation::Ge, true) => Relation::Le,
                (r, _) => *r,
            };
            let sign = if flip { -1.0 } else { 1.0 };
            kinds.push((
                coeffs.iter().map(|c| c * sign).collect::<Vec<_>>(),
                rel,
                rhs * sign,
            ));
        }
        let nslack = kinds.iter().filter(|(_, r, _)| *r != Relation::Eq).count();
        let nart = kinds.iter().filter(|(_, r, _)| *r != Relation::Le).count();
        let total = nstruct + nslack + nart;
        let first_art = nstruct + nslack;

        let mut t = Tableau {
            a: vec![vec![0.0; total + 1]; m],
            basis: vec![0; m],
        };
        let (mut s_idx, mut a_idx) = (nstruct, first_art);
        for (i, (coeffs, rel, rhs)) in kinds.iter().enumerate() {
            t.a[i][..nstruct].copy_from_slice(coeffs);
            t.a[i][total] = *rhs;
            match rel {
                Relation::Le => {
                    t.a[i][s_idx] = 1.0;
                    t.basis[i] = s_idx;
                    s_idx += 1;
                }
                Relation::Ge => {
                    t.a[i][s_idx] = -1.0;
                    s_idx += 1;
                    t.a[i][a_idx] = 1.0;
                    t.basis[i] = a_idx;
                    a_idx += 1;
                }
                Relation::Eq => {
                    t.a[i][a_idx] = 1.0;
                    t.basis[i] = a_idx;
                    a_idx += 1;
                }
            }
        }

        if nart > 0 {
            let mut phase1 = vec![0.0; total];
            for c in phase1.iter_mut().skip(first_art) {
                *c = -1.0;
            }
            let allowed = vec![true; total];
            if t.optimize(&phase1, &allowed)? == Step::Unbounded {
                return Err(Error::Lp("phase one reported unbounded".into()));
            }
            let infeasibility: f64 = (0..m)
                .filter(|&i| t.basis[i] >= first_art)
                .map(|i| t.a[i][total])
                .sum();
            let scale = 1.0 + kinds.iter().map(|(_, _, b)| b.abs()).fold(0.0, f64::max);
            if infeasibility > FEAS_TOL * scale {
                return Ok(LpOutcome::Infeasible);
            }
            // drive zero-level artificials out of the basis where possible
            for i in 0..m {
                if t.basis[i] >= first_art {
                    if let Some(c) = (0..first_art).find(|&c| t.a[i][c].abs() > PIVOT_TOL) {
                        t.pivot(i, c);
                    }
                }
            }
        }

        let mut obj = self.objective.clone();
        obj.resize(total, 0.0);
        let allowed: Vec<bool> = (0..total).map(|c| c < first_art).collect();
        match t.optimize(&obj, &allowed)? {
            Step::Unbounded => Ok(LpOutcome::Unbounded),
            Step::Optimal => {
                let mut y = vec![0.0; total];
                for (i, &b) in t.basis.iter().enumerate() {
                    y[b] = t.a[i][total];
                }
                let x = self.recover(&y[..nstruct]);
                let objective = self.objective_offset
                    + self
                        .objective
                        .iter()
                        .zip(&y[..nstruct])
                        .map(|(c, v)| c * v)
                        .sum::<f64>();
                Ok(LpOutcome::Optimal { x, objective })
            }
        }
    }
}

#[derive(Debug, PartialEq, Eq)]
enum Step {
    Optimal,
    Unbounded,
}

struct Tableau {
    a: Vec<Vec<f64>>,
    basis: Vec<usize>,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.a[r][c];
        for v in self.a[r].iter_mut() {
            *v /= p;
        }
        let prow = self.a[r].clone();
        for (i, row) in self.a.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&prow) {
                    *v -= f * pv;
                }
                row[c] = 0.0;
            }
        }
        self.basis[r] = c;
    }

    /// Maximizes `obj · y` from the current basic feasible solution using Bland's rule.
    fn optimize(&mut self, obj: &[f64], allowed: &[bool]) -> Result<Step> {
        let m = self.a.len();
        let total = obj.len();
        for _ in 0..MAX_PIVOTS {
            let mut is_basic = vec![false; total];
            for &b in &self.basis {
                is_basic[b] = true;
            }
            let entering = (0..total).find(|&j| {
                allowed[j] && !is_basic[j] && {
                    let reduced = obj[j]
                        - (0..m)
                            .map(|i| obj[self.basis[i]] * self.a[i][j])
                            .sum::<f64>();
                    reduced > PIVOT_TOL
                }
            });
            let Some(c) = entering else {
                return Ok(Step::Optimal);
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..m {
                let aic = self.a[i][c];
                if aic > PIVOT_TOL {
                    let ratio = self.a[i][total] / aic;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((r, best)) => {
                            if ratio < best - 1e-14
                                || (ratio <= best + 1e-14 && self.basis[i] < self.basis[r])
                            {
                                Some((i, ratio))
                            } else {
                                Some((r, best))
                            }
                        }
                    };
                }
            }
            match leave {
                None => return Ok(Step::Unbounded),
                Some((r, _)) => self.pivot(r, c),
            }
        }
        Err(Error::Lp(format!(
            "no convergence after {MAX_PIVOTS} pivots"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn optimal(outcome: LpOutcome) -> (Vec<f64>, f64) {
        match outcome {
            LpOutcome::Optimal { x, objective } => (x, objective),
            other => panic!("expected optimum, got {other:?}"),
        }
    }

    #[test]
    fn textbook_maximum() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), 36
        let mut lp = LinearProgram::maximize(vec![3.0, 5.0]);
        lp.constrain(vec![1.0, 0.0], Relation::Le, 4.0)
            .constrain(vec![0.0, 2.0], Relation::Le, 12.0)
            .constrain(vec![3.0, 2.0], Relation::Le, 18.0);
        let (x, obj) = optimal(lp.solve().unwrap());
        assert_abs_diff_eq!(x[0], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(x[1], 6.0, epsilon = 1e-12);
        assert_abs_diff_eq!(obj, 36.0, epsilon = 1e-12);
    }

    #[test]
    fn free_variable_and_ge_rows() {
        // max s with x1 >= s, x2 >= s, x1 + x2 = 1, s free -> s = 0.5
        let mut lp = LinearProgram::maximize(vec![0.0, 0.0, 1.0]);
        lp.free(2)
            .constrain(vec![1.0, 0.0, -1.0], Relation::Ge, 0.0)
            .constrain(vec![0.0, 1.0, -1.0], Relation::Ge, 0.0)
            .constrain(vec![1.0, 1.0, 0.0], Relation::Eq, 1.0);
        let (_, obj) = optimal(lp.solve().unwrap());
        assert_abs_diff_eq!(obj, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn negative_optimum_with_free_variable() {
        // max s, s <= -3 + x, 0 <= x <= 1 -> s = -2
        let mut lp = LinearProgram::maximize(vec![0.0, 1.0]);
        lp.bounds(0, Some(0.0), Some(1.0))
            .free(1)
            .constrain(vec![-1.0, 1.0], Relation::Le, -3.0);
        let (x, obj) = optimal(lp.solve().unwrap());
        assert_abs_diff_eq!(obj, -2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(x[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn detects_infeasibility() {
        let mut lp = LinearProgram::maximize(vec![1.0]);
        lp.constrain(vec![1.0], Relation::Ge, 2.0)
            .constrain(vec![1.0], Relation::Le, 1.0);
        assert_eq!(lp.solve().unwrap(), LpOutcome::Infeasible);
    }

    #[test]
    fn detects_unboundedness() {
        let mut lp = LinearProgram::maximize(vec![1.0, 0.0]);
        lp.constrain(vec![1.0, -1.0], Relation::Le, 1.0);
        assert_eq!(lp.solve().unwrap(), LpOutcome::Unbounded);
    }

    #[test]
    fn degenerate_problem_terminates() {
        // classic cycling example (Beale); Bland's rule must terminate at 0.05
        let mut lp = LinearProgram::maximize(vec![0.75, -150.0, 0.02, -6.0]);
        lp.constrain(vec![0.25, -60.0, -0.04, 9.0], Relation::Le, 0.0)
            .constrain(vec![0.5, -90.0, -0.02, 3.0], Relation::Le, 0.0)
            .constrain(vec![0.0, 0.0, 1.0, 0.0], Relation::Le, 1.0);
        let (_, obj) = optimal(lp.solve().unwrap());
        assert_abs_diff_eq!(obj, 0.05, epsilon = 1e-12);
    }

    #[test]
    fn upper_bound_without_lower() {
        // max -x with x <= 5 and x >= -2 via constraint -> x = -2
        let mut lp = LinearProgram::maximize(vec![-1.0]);
        lp.bounds(0, None, Some(5.0))
            .constrain(vec![1.0], Relation::Ge, -2.0);
        let (x, _) = optimal(lp.solve().unwrap());
        assert_abs_diff_eq!(x[0], -2.0, epsilon = 1e-12);
    }
}
