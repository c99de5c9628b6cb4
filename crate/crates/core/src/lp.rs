//! Small dense linear programs: a two-phase simplex solver with Bland's
//! rule and a brute-force vertex enumerator used as its oracle.
//!
//! Problems are stated as
//!
//! ```text
//! minimize  objective . x
//! s.t.      eq_lhs x  = eq_rhs
//!           ub_lhs x <= ub_rhs
//!           x >= 0            (when `nonneg` is set)
//! ```
//!
//! Instances here are tiny (a handful of variables), so the solver favors
//! determinism over speed: fixed tolerances, Bland anti-cycling, and a
//! uniqueness certificate obtained by probing every zero-reduced-cost
//! direction over the optimal face.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Absolute feasibility/optimality tolerance used throughout.
pub const LP_TOL: f64 = 1e-9;
/// Pivots smaller than this are treated as zero.
const PIVOT_TOL: f64 = 1e-12;
/// Separation required before two vertices count as distinct optima.
const PROBE_TOL: f64 = 1e-7;

#[derive(Debug, Error)]
pub enum LpError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),
    #[error("numerical failure: all candidate pivots below 1e-12")]
    NumericalFailure,
    #[error("too large for vertex enumeration: {vars} vars, {cons} constraints (limit 12)")]
    TooLarge { vars: usize, cons: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub objective: DVector<f64>,
    pub eq_lhs: DMatrix<f64>,
    pub eq_rhs: DVector<f64>,
    pub ub_lhs: DMatrix<f64>,
    pub ub_rhs: DVector<f64>,
    pub nonneg: bool,
}

impl LinearProgram {
    /// Start a minimization over `objective.len()` nonnegative variables.
    pub fn minimize(objective: &[f64]) -> Self {
        let n = objective.len();
        LinearProgram {
            objective: DVector::from_row_slice(objective),
            eq_lhs: DMatrix::zeros(0, n),
            eq_rhs: DVector::zeros(0),
            ub_lhs: DMatrix::zeros(0, n),
            ub_rhs: DVector::zeros(0),
            nonneg: true,
        }
    }

    /// Append an equality row `row . x = rhs`.
    pub fn eq(mut self, row: &[f64], rhs: f64) -> Self {
        assert_eq!(row.len(), self.num_vars(), "equality row length");
        self.eq_lhs = stack_row(&self.eq_lhs, row);
        self.eq_rhs = push(&self.eq_rhs, rhs);
        self
    }

    /// Append an inequality row `row . x <= rhs`.
    pub fn ub(mut self, row: &[f64], rhs: f64) -> Self {
        assert_eq!(row.len(), self.num_vars(), "inequality row length");
        self.ub_lhs = stack_row(&self.ub_lhs, row);
        self.ub_rhs = push(&self.ub_rhs, rhs);
        self
    }

    /// Drop the `x >= 0` requirement (variables become free).
    pub fn free(mut self) -> Self {
        self.nonneg = false;
        self
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        if self.eq_lhs.ncols() != n || self.ub_lhs.ncols() != n {
            return Err(LpError::DimensionMismatch(format!(
                "constraint columns ({}, {}) vs {} variables",
                self.eq_lhs.ncols(),
                self.ub_lhs.ncols(),
                n
            )));
        }
        if self.eq_lhs.nrows() != self.eq_rhs.len() || self.ub_lhs.nrows() != self.ub_rhs.len() {
            return Err(LpError::DimensionMismatch(
                "constraint rows vs right-hand sides".into(),
            ));
        }
        for (name, it) in [
            ("objective", &self.objective),
            ("eq_rhs", &self.eq_rhs),
            ("ub_rhs", &self.ub_rhs),
        ] {
            if it.iter().any(|v| !v.is_finite()) {
                return Err(LpError::NonFinite(name));
            }
        }
        if self.eq_lhs.iter().any(|v| !v.is_finite()) {
            return Err(LpError::NonFinite("eq_lhs"));
        }
        if self.ub_lhs.iter().any(|v| !v.is_finite()) {
            return Err(LpError::NonFinite("ub_lhs"));
        }
        Ok(())
    }
}

fn stack_row(m: &DMatrix<f64>, row: &[f64]) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(m.nrows() + 1, m.ncols());
    out.view_mut((0, 0), (m.nrows(), m.ncols())).copy_from(m);
    for (c, v) in row.iter().enumerate() {
        out[(m.nrows(), c)] = *v;
    }
    out
}

fn push(v: &DVector<f64>, x: f64) -> DVector<f64> {
    let mut out = DVector::zeros(v.len() + 1);
    out.rows_mut(0, v.len()).copy_from(v);
    out[v.len()] = x;
    out
}

/// Solver result. `point`/`value`/`dual_point` are meaningful only when
/// `status == Optimal`; the duals are ordered (equality rows, then
/// inequality rows).
#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub value: f64,
    pub point: DVector<f64>,
    pub is_unique: bool,
    pub dual_point: DVector<f64>,
}

impl LpSolution {
    pub fn dual_value(&self, lp: &LinearProgram) -> f64 {
        let me = lp.eq_rhs.len();
        let mut v = 0.0;
        for i in 0..me {
            v += self.dual_point[i] * lp.eq_rhs[i];
        }
        for k in 0..lp.ub_rhs.len() {
            v += self.dual_point[me + k] * lp.ub_rhs[k];
        }
        v
    }
}

/// A basic feasible point together with its objective value.
#[derive(Debug, Clone)]
pub struct Vertex {
    pub point: DVector<f64>,
    pub value: f64,
}

// ---------------------------------------------------------------------------
// Simplex
// ---------------------------------------------------------------------------

struct Tableau {
    a: DMatrix<f64>,
    b: DVector<f64>,
    basis: Vec<usize>,
}

enum PivotOutcome {
    Optimal,
    Unbounded,
    Failed,
}

impl Tableau {
    /// Run simplex iterations with Bland's rule on objective `c`,
    /// restricted to columns `0..ncols_active`.
    fn run(&mut self, c: &DVector<f64>, ncols_active: usize) -> PivotOutcome {
        let m = self.a.nrows();
        for _ in 0..20_000 {
            // Reduced costs via the simplex multipliers of the current basis.
            let y = self.multipliers(c);
            let mut entering = None;
            for j in 0..ncols_active {
                if self.basis.contains(&j) {
                    continue;
                }
                let red = c[j] - y.dot(&self.a.column(j).into_owned());
                if red < -LP_TOL {
                    entering = Some(j);
                    break; // Bland: smallest index
                }
            }
            let Some(q) = entering else {
                return PivotOutcome::Optimal;
            };
            // Direction d = B^{-1} A_q; ratio test over d > 0.
            let d = self.basis_solve(&self.a.column(q).into_owned());
            let xb = self.basic_values();
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..m {
                if d[r] > PIVOT_TOL {
                    let ratio = xb[r].max(0.0) / d[r];
                    match leave {
                        None => leave = Some((r, ratio)),
                        Some((lr, lv)) => {
                            if ratio < lv - PIVOT_TOL
                                || (ratio <= lv + PIVOT_TOL && self.basis[r] < self.basis[lr])
                            {
                                leave = Some((r, ratio));
                            }
                        }
                    }
                }
            }
            match leave {
                Some((r, _)) => self.basis[r] = q,
                None => {
                    if d.iter().any(|&v| v > 0.0) {
                        // Positive pivots exist but all are sub-threshold.
                        return PivotOutcome::Failed;
                    }
                    return PivotOutcome::Unbounded;
                }
            }
        }
        PivotOutcome::Failed
    }

    fn basis_matrix(&self) -> DMatrix<f64> {
        let m = self.a.nrows();
        let mut bm = DMatrix::zeros(m, m);
        for (k, &j) in self.basis.iter().enumerate() {
            bm.set_column(k, &self.a.column(j));
        }
        bm
    }

    fn basis_solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.basis_matrix()
            .lu()
            .solve(rhs)
            .unwrap_or_else(|| DVector::zeros(self.a.nrows()))
    }

    /// y solving B' y = c_B.
    fn multipliers(&self, c: &DVector<f64>) -> DVector<f64> {
        let cb = DVector::from_iterator(self.basis.len(), self.basis.iter().map(|&j| c[j]));
        self.basis_matrix()
            .transpose()
            .lu()
            .solve(&cb)
            .unwrap_or_else(|| DVector::zeros(self.a.nrows()))
    }

    fn basic_values(&self) -> DVector<f64> {
        self.basis_solve(&self.b)
    }
}

/// Internal standard form: columns are the structural variables (split in
/// plus/minus pairs when the program has free variables), then slacks,
/// then artificials.
struct Standard {
    tab: Tableau,
    n_struct: usize,
    n_slack: usize,
    row_sign: Vec<f64>,
    split: bool,
}

fn to_standard(lp: &LinearProgram) -> Standard {
    let n = lp.num_vars();
    let me = lp.eq_lhs.nrows();
    let mu = lp.ub_lhs.nrows();
    let m = me + mu;
    let split = !lp.nonneg;
    let n_struct = if split { 2 * n } else { n };
    let ncols = n_struct + mu + m; // structural + slack + artificial
    let mut a = DMatrix::zeros(m, ncols);
    let mut b = DVector::zeros(m);
    let mut row_sign = vec![1.0; m];

    for i in 0..m {
        let (row, rhs) = if i < me {
            (lp.eq_lhs.row(i).into_owned(), lp.eq_rhs[i])
        } else {
            (lp.ub_lhs.row(i - me).into_owned(), lp.ub_rhs[i - me])
        };
        let s = if rhs < 0.0 { -1.0 } else { 1.0 };
        row_sign[i] = s;
        for j in 0..n {
            if split {
                a[(i, 2 * j)] = s * row[j];
                a[(i, 2 * j + 1)] = -s * row[j];
            } else {
                a[(i, j)] = s * row[j];
            }
        }
        if i >= me {
            a[(i, n_struct + (i - me))] = s; // slack
        }
        a[(i, n_struct + mu + i)] = 1.0; // artificial
        b[i] = s * rhs;
    }

    Standard {
        tab: Tableau {
            a,
            b,
            basis: (0..m).map(|i| n_struct + mu + i).collect(),
        },
        n_struct,
        n_slack: mu,

        row_sign,
        split,
    }
}

impl Standard {
    fn struct_cost(&self, lp: &LinearProgram) -> DVector<f64> {
        let ncols = self.tab.a.ncols();
        let mut c = DVector::zeros(ncols);
        for j in 0..lp.num_vars() {
            if self.split {
                c[2 * j] = lp.objective[j];
                c[2 * j + 1] = -lp.objective[j];
            } else {
                c[j] = lp.objective[j];
            }
        }
        c
    }

    fn extract_point(&self, lp: &LinearProgram) -> DVector<f64> {
        let xb = self.tab.basic_values();
        let mut z = DVector::zeros(self.tab.a.ncols());
        for (r, &j) in self.tab.basis.iter().enumerate() {
            z[j] = xb[r];
        }
        let n = lp.num_vars();
        let mut x = DVector::zeros(n);
        for j in 0..n {
            x[j] = if self.split { z[2 * j] - z[2 * j + 1] } else { z[j] };
        }
        x
    }
}

fn solve_raw(lp: &LinearProgram) -> Result<(LpStatus, Standard), LpError> {
    lp.validate()?;
    let mut st = to_standard(lp);
    let m = st.tab.a.nrows();
    let ncols = st.tab.a.ncols();
    let n_real = st.n_struct + st.n_slack;

    // Phase 1: minimize the sum of artificials.
    let mut c1 = DVector::zeros(ncols);
    for j in n_real..ncols {
        c1[j] = 1.0;
    }
    match st.tab.run(&c1, ncols) {
        PivotOutcome::Optimal => {}
        PivotOutcome::Unbounded => return Err(LpError::NumericalFailure),
        PivotOutcome::Failed => return Err(LpError::NumericalFailure),
    }
    let feas_tol = LP_TOL * (1.0 + st.tab.b.amax());
    let xb = st.tab.basic_values();
    let art_sum: f64 = st
        .tab
        .basis
        .iter()
        .enumerate()
        .filter(|(_, &j)| j >= n_real)
        .map(|(r, _)| xb[r].max(0.0))
        .sum();
    if art_sum > feas_tol {
        return Ok((LpStatus::Infeasible, st));
    }

    // Drive remaining zero-level artificials out of the basis where possible.
    for r in 0..m {
        if st.tab.basis[r] >= n_real {
            let rowdir: Vec<f64> = (0..n_real)
                .map(|j| {
                    let d = st.tab.basis_solve(&st.tab.a.column(j).into_owned());
                    d[r]
                })
                .collect();
            if let Some(j) = (0..n_real)
                .find(|&j| !st.tab.basis.contains(&j) && rowdir[j].abs() > PIVOT_TOL)
            {
                st.tab.basis[r] = j;
            }
            // A fully dependent row stays on its artificial at level zero;
            // it is harmless for the pivoting below.
        }
    }

    // Phase 2 over real columns only.
    let c2 = st.struct_cost(lp);
    match st.tab.run(&c2, n_real) {
        PivotOutcome::Optimal => Ok((LpStatus::Optimal, st)),
        PivotOutcome::Unbounded => Ok((LpStatus::Unbounded, st)),
        PivotOutcome::Failed => Err(LpError::NumericalFailure),
    }
}

/// Solve the program, returning a basic optimal point, a dual vector and a
/// uniqueness certificate.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    let (status, st) = solve_raw(lp)?;
    if status != LpStatus::Optimal {
        return Ok(LpSolution {
            status,
            value: match status {
                LpStatus::Infeasible => f64::INFINITY,
                _ => f64::NEG_INFINITY,
            },
            point: DVector::zeros(lp.num_vars()),
            is_unique: false,
            dual_point: DVector::zeros(lp.eq_rhs.len() + lp.ub_rhs.len()),
        });
    }

    let point = st.extract_point(lp);
    let value = lp.objective.dot(&point);

    // Duals: multipliers of the signed rows, mapped back to original signs.
    let c2 = st.struct_cost(lp);
    let y = st.tab.multipliers(&c2);
    let m = lp.eq_rhs.len() + lp.ub_rhs.len();
    let mut dual = DVector::zeros(m);
    for i in 0..m {
        dual[i] = st.row_sign[i] * y[i];
    }

    // Zero-reduced-cost nonbasic structural columns are the candidate
    // directions for alternative optima.
    let mut candidate_vars: Vec<usize> = Vec::new();
    for j in 0..st.n_struct {
        if st.tab.basis.contains(&j) {
            continue;
        }
        let red = c2[j] - y.dot(&st.tab.a.column(j).into_owned());
        if red.abs() <= LP_TOL {
            let orig = if st.split { j / 2 } else { j };
            if !candidate_vars.contains(&orig) {
                candidate_vars.push(orig);
            }
        }
    }
    let mut is_unique = true;
    for &j in &candidate_vars {
        if probe_direction(lp, value, j, &point)? {
            is_unique = false;
            break;
        }
    }

    Ok(LpSolution {
        status,
        value,
        point,
        is_unique,
        dual_point: dual,
    })
}

/// Re-solve over the optimal face, pushing variable `j` as far as it goes
/// in each direction. Returns true when an alternative optimum exists.
fn probe_direction(
    lp: &LinearProgram,
    value: f64,
    j: usize,
    point: &DVector<f64>,
) -> Result<bool, LpError> {
    for sign in [-1.0, 1.0] {
        let mut obj = vec![0.0; lp.num_vars()];
        obj[j] = sign;
        let mut face = LinearProgram {
            objective: DVector::from_row_slice(&obj),
            eq_lhs: lp.eq_lhs.clone(),
            eq_rhs: lp.eq_rhs.clone(),
            ub_lhs: lp.ub_lhs.clone(),
            ub_rhs: lp.ub_rhs.clone(),
            nonneg: lp.nonneg,
        };
        let crow: Vec<f64> = lp.objective.iter().copied().collect();
        face = face.eq(&crow, value);
        let (status, st) = solve_raw(&face)?;
        match status {
            LpStatus::Unbounded => return Ok(true),
            LpStatus::Optimal => {
                let p = st.extract_point(&face);
                if (p[j] - point[j]).abs() > PROBE_TOL {
                    return Ok(true);
                }
            }
            LpStatus::Infeasible => {}
        }
    }
    Ok(false)
}

// ---------------------------------------------------------------------------
// Vertex enumeration
// ---------------------------------------------------------------------------

/// Enumerate every basic feasible point of the program, sorted
/// lexicographically. Brute force over active-constraint subsets; intended
/// as an oracle for tiny instances only.
pub fn enumerate_vertices(lp: &LinearProgram) -> Result<Vec<Vertex>, LpError> {
    lp.validate()?;
    let n = lp.num_vars();
    let cons = lp.eq_lhs.nrows() + lp.ub_lhs.nrows();
    if n > 12 || cons > 12 {
        return Err(LpError::TooLarge { vars: n, cons });
    }

    // Candidate active rows: equalities, inequalities, sign bounds.
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    for i in 0..lp.eq_lhs.nrows() {
        rows.push((lp.eq_lhs.row(i).iter().copied().collect(), lp.eq_rhs[i]));
    }
    for i in 0..lp.ub_lhs.nrows() {
        rows.push((lp.ub_lhs.row(i).iter().copied().collect(), lp.ub_rhs[i]));
    }
    if lp.nonneg {
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            rows.push((e, 0.0));
        }
    }
    if rows.len() < n {
        return Ok(Vec::new());
    }

    let mut found: Vec<DVector<f64>> = Vec::new();
    let mut idx: Vec<usize> = (0..n).collect();
    loop {
        // Solve the n x n active system for this subset.
        let mut a = DMatrix::zeros(n, n);
        let mut b = DVector::zeros(n);
        for (r, &k) in idx.iter().enumerate() {
            for c in 0..n {
                a[(r, c)] = rows[k].0[c];
            }
            b[r] = rows[k].1;
        }
        if let Some(x) = a.lu().solve(&b) {
            if x.iter().all(|v| v.is_finite()) && feasible(lp, &x) {
                let dup = found.iter().any(|p| (p - &x).amax() <= LP_TOL);
                if !dup {
                    found.push(x);
                }
            }
        }
        if !next_combination(&mut idx, rows.len()) {
            break;
        }
    }

    found.sort_by(lex_cmp);
    Ok(found
        .into_iter()
        .map(|point| {
            let value = lp.objective.dot(&point);
            Vertex { point, value }
        })
        .collect())
}

fn feasible(lp: &LinearProgram, x: &DVector<f64>) -> bool {
    let scale = 1.0 + x.amax();
    let tol = LP_TOL * scale;
    for i in 0..lp.eq_lhs.nrows() {
        if (lp.eq_lhs.row(i).transpose().dot(x) - lp.eq_rhs[i]).abs() > tol {
            return false;
        }
    }
    for i in 0..lp.ub_lhs.nrows() {
        if lp.ub_lhs.row(i).transpose().dot(x) - lp.ub_rhs[i] > tol {
            return false;
        }
    }
    if lp.nonneg && x.iter().any(|&v| v < -tol) {
        return false;
    }
    true
}

fn lex_cmp(a: &DVector<f64>, b: &DVector<f64>) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        if (x - y).abs() > LP_TOL {
            return x.partial_cmp(y).unwrap();
        }
    }
    std::cmp::Ordering::Equal
}

fn next_combination(idx: &mut [usize], m: usize) -> bool {
    let k = idx.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if idx[i] < m - (k - i) {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    fn n1_allocation_lp() -> LinearProgram {
        // minimize rho  s.t.  x = 1, x <= rho, (x, rho) >= 0
        LinearProgram::minimize(&[0.0, 1.0])
            .eq(&[1.0, 0.0], 1.0)
            .ub(&[1.0, -1.0], 0.0)
    }

    #[test]
    fn n1_instance_solves_to_one_one() {
        let sol = solve_lp(&n1_allocation_lp()).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.value - 1.0).abs() < LP_TOL);
        assert!((sol.point[0] - 1.0).abs() < LP_TOL);
        assert!((sol.point[1] - 1.0).abs() < LP_TOL);
        assert!(sol.is_unique);
    }

    #[test]
    fn infeasible_detected() {
        let lp = LinearProgram::minimize(&[0.0]).eq(&[1.0], -1.0);
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Infeasible);
    }

    #[test]
    fn simplex_on_one_constraint() {
        // minimize q1 + 2 q2  s.t. q1 + q2 = 3, q >= 0
        let lp = LinearProgram::minimize(&[1.0, 2.0]).eq(&[1.0, 1.0], 3.0);
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.value - 3.0).abs() < LP_TOL);
        assert!((sol.point[0] - 3.0).abs() < LP_TOL);
        assert!(sol.point[1].abs() < LP_TOL);
        assert!(sol.is_unique);
    }

    #[test]
    fn vertices_of_simplex_segment() {
        let lp = LinearProgram::minimize(&[1.0, 2.0]).eq(&[1.0, 1.0], 3.0);
        let vs = enumerate_vertices(&lp).unwrap();
        assert_eq!(vs.len(), 2);
        // lexicographic order: (0,3) before (3,0)
        assert!((vs[0].point[0]).abs() < LP_TOL && (vs[0].point[1] - 3.0).abs() < LP_TOL);
        assert!((vs[1].point[0] - 3.0).abs() < LP_TOL && (vs[1].point[1]).abs() < LP_TOL);
    }

    #[test]
    fn vertices_of_empty_set() {
        let lp = LinearProgram::minimize(&[0.0]).eq(&[1.0], -1.0);
        assert!(enumerate_vertices(&lp).unwrap().is_empty());
    }

    #[test]
    fn vertices_of_n1_instance() {
        let vs = enumerate_vertices(&n1_allocation_lp()).unwrap();
        assert_eq!(vs.len(), 1);
        assert!((vs[0].point[0] - 1.0).abs() < LP_TOL);
        assert!((vs[0].point[1] - 1.0).abs() < LP_TOL);
    }

    #[test]
    fn non_unique_optimum_flagged() {
        // minimize q1 + q2 s.t. q1 + q2 = 2: every feasible point optimal.
        let lp = LinearProgram::minimize(&[1.0, 1.0]).eq(&[1.0, 1.0], 2.0);
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.value - 2.0).abs() < LP_TOL);
        assert!(!sol.is_unique);
    }

    #[test]
    fn unbounded_detected() {
        let lp = LinearProgram::minimize(&[-1.0]).ub(&[-1.0], 0.0);
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Unbounded);
    }

    #[test]
    fn weak_duality_and_strong_duality_at_optimum() {
        let lp = LinearProgram::minimize(&[1.0, 2.0, 0.5])
            .eq(&[1.0, 1.0, 1.0], 4.0)
            .ub(&[1.0, 0.0, -1.0], 1.0)
            .ub(&[0.0, 1.0, 1.0], 3.5);
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        let dv = sol.dual_value(&lp);
        assert!(sol.value >= dv - LP_TOL);
        assert!((sol.value - dv).abs() < 1e-7, "strong duality: {} vs {}", sol.value, dv);
    }

    #[test]
    fn too_large_rejected() {
        let lp = LinearProgram::minimize(&[0.0; 13]);
        assert!(matches!(
            enumerate_vertices(&lp),
            Err(LpError::TooLarge { .. })
        ));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let lp = LinearProgram {
            objective: DVector::from_row_slice(&[1.0, 2.0]),
            eq_lhs: DMatrix::zeros(1, 3),
            eq_rhs: DVector::zeros(1),
            ub_lhs: DMatrix::zeros(0, 2),
            ub_rhs: DVector::zeros(0),
            nonneg: true,
        };
        assert!(matches!(solve_lp(&lp), Err(LpError::DimensionMismatch(_))));
    }

    #[test]
    fn free_variable_vertex() {
        // {x = 1, x <= rho} over (x, rho) with (x, rho) >= 0: single vertex (1,1).
        let sol = solve_lp(
            &LinearProgram::minimize(&[0.0, 1.0])
                .eq(&[1.0, 0.0], 1.0)
                .ub(&[1.0, -1.0], 0.0),
        )
        .unwrap();
        assert!((sol.point[1] - 1.0).abs() < LP_TOL);
    }

    // Deterministic pseudo-random feasible instances: solver value must
    // match the vertex-enumeration minimum, and the uniqueness flag must
    // match the count of minimizing vertices.
    #[test]
    fn solver_matches_vertex_enumeration_on_random_instances() {
        let mut state = 0x9E3779B97F4A7C15u64;
        let mut rnd = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 4.0 - 2.0
        };
        let mut checked = 0;
        for _case in 0..300 {
            let n = 2 + (rnd().abs() * 1.99) as usize; // 2..=3
            let me = (rnd().abs() * 1.49) as usize; // 0..=1
            let mu = 1 + (rnd().abs() * 1.99) as usize; // 1..=2
            let x0: Vec<f64> = (0..n).map(|_| rnd().abs()).collect();
            let mut lp = LinearProgram::minimize(&(0..n).map(|_| rnd()).collect::<Vec<_>>());
            for _ in 0..me {
                let row: Vec<f64> = (0..n).map(|_| rnd()).collect();
                let rhs = row.iter().zip(&x0).map(|(a, b)| a * b).sum::<f64>();
                lp = lp.eq(&row, rhs);
            }
            for _ in 0..mu {
                let row: Vec<f64> = (0..n).map(|_| rnd()).collect();
                let rhs = row.iter().zip(&x0).map(|(a, b)| a * b).sum::<f64>() + rnd().abs();
                lp = lp.ub(&row, rhs);
            }
            let sol = solve_lp(&lp).unwrap();
            let vs = enumerate_vertices(&lp).unwrap();
            if sol.status != LpStatus::Optimal {
                continue;
            }
            let best = vs
                .iter()
                .map(|v| v.value)
                .fold(f64::INFINITY, f64::min);
            assert!(
                (sol.value - best).abs() <= 1e-7 * (1.0 + best.abs()),
                "value {} vs vertex best {}",
                sol.value,
                best
            );
            // Uniqueness versus count of attaining vertices, skipping
            // near-degenerate ties the flag cannot be expected to resolve.
            let attaining = vs
                .iter()
                .filter(|v| (v.value - best).abs() <= LP_TOL * (1.0 + best.abs()))
                .count();
            let nearly = vs
                .iter()
                .filter(|v| (v.value - best).abs() <= 1e-6 * (1.0 + best.abs()))
                .count();
            if nearly == attaining {
                assert_eq!(sol.is_unique, attaining == 1, "uniqueness flag");
            }
            checked += 1;
        }
        assert!(checked > 100, "too few optimal cases exercised: {checked}");
    }

    #[test]
    fn weak_duality_on_random_instances() {
        let mut state = 42u64;
        let mut rnd = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 4.0 - 2.0
        };
        for _ in 0..200 {
            let n = 2;
            let x0: Vec<f64> = (0..n).map(|_| rnd().abs()).collect();
            let row: Vec<f64> = (0..n).map(|_| rnd()).collect();
            let rhs = row.iter().zip(&x0).map(|(a, b)| a * b).sum::<f64>();
            let urow: Vec<f64> = (0..n).map(|_| rnd()).collect();
            let urhs = urow.iter().zip(&x0).map(|(a, b)| a * b).sum::<f64>() + rnd().abs();
            let lp = LinearProgram::minimize(&[rnd(), rnd()])
                .eq(&row, rhs)
                .ub(&urow, urhs);
            let sol = solve_lp(&lp).unwrap();
            if sol.status == LpStatus::Optimal {
                assert!(sol.value >= sol.dual_value(&lp) - 1e-7);
            }
        }
    }
}
