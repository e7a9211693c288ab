//! Revised simplex working on the dual of the plane-fitting programs.
//!
//! The primal programs have few variables (the plane entries plus the gap
//! objective) and very many inequality rows (two per sample point per
//! output). The dual therefore has a small basis (one row per primal
//! variable) and many columns, which is the shape a revised simplex with a
//! dense basis inverse handles well.

/// Primal problem in the normalized form `min c'z  s.t.  G z <= h`, `z` free.
/// Columns of the dual equal rows of `G`, stored sparsely.
pub struct Problem {
    pub num_vars: usize,
    /// Sparse rows of G: (variable index, coefficient), plus rhs h.
    pub rows: Vec<(Vec<(u32, f64)>, f64)>,
    /// Objective coefficients c.
    pub objective: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub z: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SimplexError {
    /// The dual is infeasible: the primal is unbounded (or empty).
    PrimalUnbounded,
    /// The dual is unbounded: the primal is infeasible.
    PrimalInfeasible,
    Numerical(&'static str),
}

const REDUCED_COST_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 128;
const STALL_LIMIT: usize = 400;

pub fn solve(problem: &Problem) -> Result<Solution, SimplexError> {
    let n = problem.num_vars; // dual equality rows
    let m = problem.rows.len(); // dual structural columns
    if n == 0 {
        return Ok(Solution { z: Vec::new(), objective: 0.0, iterations: 0 });
    }

    // Dual: min h'y  s.t.  G'y = -c, y >= 0. Flip equality rows so the rhs
    // is nonnegative, then run two-phase revised simplex with artificials.
    let mut flip = vec![1.0f64; n];
    let mut b = vec![0.0f64; n];
    for i in 0..n {
        b[i] = -problem.objective[i];
        if b[i] < 0.0 {
            flip[i] = -1.0;
            b[i] = -b[i];
        }
    }

    let mut state = State {
        n,
        m,
        problem,
        flip,
        b,
        basis: (0..n).map(|i| m + i).collect(),
        in_basis: vec![false; m],
        binv: identity(n),
        xb: Vec::new(),
        iterations: 0,
    };
    state.xb = state.b.clone();

    // Phase I: drive artificials to zero.
    let phase1_costs = Costs::PhaseOne;
    state.run(&phase1_costs)?;
    let infeasibility: f64 = state
        .basis
        .iter()
        .zip(&state.xb)
        .filter(|(&c, _)| c >= m)
        .map(|(_, &x)| x)
        .sum();
    if infeasibility > 1e-7 {
        return Err(SimplexError::PrimalUnbounded);
    }

    // Phase II over the real costs.
    let phase2_costs = Costs::PhaseTwo;
    state.run(&phase2_costs)?;

    // Primal solution from the simplex multipliers.
    let pi = state.multipliers(&phase2_costs);
    let z: Vec<f64> = (0..n).map(|i| pi[i] * state.flip[i]).collect();
    let objective = z.iter().zip(&problem.objective).map(|(a, b)| a * b).sum();
    Ok(Solution { z, objective, iterations: state.iterations })
}

enum Costs {
    PhaseOne,
    PhaseTwo,
}

impl Costs {
    fn of(&self, state: &State, col: usize) -> f64 {
        match self {
            Costs::PhaseOne => {
                if col >= state.m {
                    1.0
                } else {
                    0.0
                }
            }
            Costs::PhaseTwo => {
                if col >= state.m {
                    0.0
                } else {
                    state.problem.rows[col].1
                }
            }
        }
    }
}

struct State<'a> {
    n: usize,
    m: usize,
    problem: &'a Problem,
    flip: Vec<f64>,
    b: Vec<f64>,
    basis: Vec<usize>,
    in_basis: Vec<bool>,
    binv: Vec<f64>, // row-major n x n
    xb: Vec<f64>,
    iterations: usize,
}

fn identity(n: usize) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        m[i * n + i] = 1.0;
    }
    m
}

impl<'a> State<'a> {
    /// Sparse dual column (= primal row) in the flipped row space.
    fn column(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.problem.rows[j].0.iter().map(move |&(i, a)| (i as usize, a * self.flip[i as usize]))
    }

    fn multipliers(&self, costs: &Costs) -> Vec<f64> {
        let n = self.n;
        let mut pi = vec![0.0; n];
        for (row, &col) in self.basis.iter().enumerate() {
            let c = costs.of(self, col);
            if c != 0.0 {
                for i in 0..n {
                    pi[i] += c * self.binv[row * n + i];
                }
            }
        }
        pi
    }

    fn reduced_cost(&self, j: usize, pi: &[f64], costs: &Costs) -> f64 {
        let mut r = costs.of(self, j);
        for (i, a) in self.column(j) {
            r -= pi[i] * a;
        }
        r
    }

    fn objective_value(&self, costs: &Costs) -> f64 {
        self.basis
            .iter()
            .zip(&self.xb)
            .map(|(&col, &x)| costs.of(self, col) * x)
            .sum()
    }

    fn run(&mut self, costs: &Costs) -> Result<(), SimplexError> {
        let n = self.n;
        let mut bland = false;
        let mut stall = 0usize;
        let mut last_obj = self.objective_value(costs);
        let max_iterations = 20_000 + 40 * (self.m + n);

        loop {
            self.iterations += 1;
            if self.iterations > max_iterations {
                return Err(SimplexError::Numerical("iteration limit exceeded"));
            }
            let pi = self.multipliers(costs);

            // Pricing over the structural columns; artificials never re-enter.
            let mut entering: Option<(usize, f64)> = None;
            for j in 0..self.m {
                if self.in_basis[j] {
                    continue;
                }
                let r = self.reduced_cost(j, &pi, costs);
                if r < -REDUCED_COST_TOL {
                    if bland {
                        entering = Some((j, r));
                        break;
                    }
                    match entering {
                        Some((_, best)) if best <= r => {}
                        _ => entering = Some((j, r)),
                    }
                }
            }
            let Some((enter, _)) = entering else {
                return Ok(()); // phase optimal
            };

            // Direction through the basis inverse.
            let mut w = vec![0.0f64; n];
            for (i, a) in self.column(enter) {
                for (row, wr) in w.iter_mut().enumerate() {
                    *wr += self.binv[row * n + i] * a;
                }
            }

            // Ratio test; on ties prefer kicking artificials out.
            let mut leave: Option<(usize, f64)> = None;
            for row in 0..n {
                if w[row] > PIVOT_TOL {
                    let ratio = self.xb[row] / w[row];
                    let better = match leave {
                        None => true,
                        Some((lrow, lratio)) => {
                            ratio < lratio - 1e-12
                                || (ratio < lratio + 1e-12
                                    && self.basis[row] >= self.m
                                    && self.basis[lrow] < self.m)
                        }
                    };
                    if better {
                        leave = Some((row, ratio));
                    }
                }
            }
            let Some((leave_row, _)) = leave else {
                return Err(SimplexError::PrimalInfeasible); // dual unbounded
            };

            self.pivot(enter, leave_row, &w);

            if self.iterations % REFACTOR_EVERY == 0 {
                self.refactorize()?;
            }

            let obj = self.objective_value(costs);
            if obj < last_obj - 1e-12 {
                last_obj = obj;
                stall = 0;
            } else {
                stall += 1;
                if stall > STALL_LIMIT {
                    bland = true;
                }
            }
        }
    }

    fn pivot(&mut self, enter: usize, leave_row: usize, w: &[f64]) {
        let n = self.n;
        let pivot = w[leave_row];
        let leaving_col = self.basis[leave_row];
        if leaving_col < self.m {
            self.in_basis[leaving_col] = false;
        }
        self.basis[leave_row] = enter;
        self.in_basis[enter] = true;

        let inv_p = 1.0 / pivot;
        for k in 0..n {
            self.binv[leave_row * n + k] *= inv_p;
        }
        let t = self.xb[leave_row] * inv_p;
        self.xb[leave_row] = t;
        for row in 0..n {
            if row != leave_row {
                let factor = w[row];
                if factor != 0.0 {
                    for k in 0..n {
                        self.binv[row * n + k] -= factor * self.binv[leave_row * n + k];
                    }
                    self.xb[row] -= factor * t;
                    if self.xb[row] < 0.0 && self.xb[row] > -1e-11 {
                        self.xb[row] = 0.0;
                    }
                }
            }
        }
    }

    /// Rebuild the basis inverse from scratch (Gauss-Jordan with partial
    /// pivoting) to shed accumulated round-off.
    fn refactorize(&mut self) -> Result<(), SimplexError> {
        let n = self.n;
        // Assemble the basis matrix column by column.
        let mut mat = vec![0.0f64; n * n]; // row-major
        for (col_pos, &col_id) in self.basis.iter().enumerate() {
            if col_id >= self.m {
                mat[(col_id - self.m) * n + col_pos] = 1.0;
            } else {
                for (i, a) in self.column(col_id) {
                    mat[i * n + col_pos] = a;
                }
            }
        }
        let mut inv = identity(n);
        for col in 0..n {
            // Partial pivot.
            let mut best = col;
            for row in col + 1..n {
                if mat[row * n + col].abs() > mat[best * n + col].abs() {
                    best = row;
                }
            }
            if mat[best * n + col].abs() < 1e-12 {
                return Err(SimplexError::Numerical("singular basis"));
            }
            if best != col {
                for k in 0..n {
                    mat.swap(col * n + k, best * n + k);
                    inv.swap(col * n + k, best * n + k);
                }
            }
            let inv_p = 1.0 / mat[col * n + col];
            for k in 0..n {
                mat[col * n + k] *= inv_p;
                inv[col * n + k] *= inv_p;
            }
            for row in 0..n {
                if row != col {
                    let f = mat[row * n + col];
                    if f != 0.0 {
                        for k in 0..n {
                            mat[row * n + k] -= f * mat[col * n + k];
                            inv[row * n + k] -= f * inv[col * n + k];
                        }
                    }
                }
            }
        }
        // Permuted Gauss-Jordan leaves inv as B^-1 up to the row swaps applied
        // symmetrically to both matrices, so inv is exactly B^-1 here.
        self.binv = inv;
        let mut xb = vec![0.0f64; n];
        for row in 0..n {
            let mut acc = 0.0;
            for k in 0..n {
                acc += self.binv[row * n + k] * self.b[k];
            }
            xb[row] = if acc < 0.0 && acc > -1e-9 { 0.0 } else { acc };
        }
        self.xb = xb;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(entries: &[(u32, f64)], rhs: f64) -> (Vec<(u32, f64)>, f64) {
        (entries.to_vec(), rhs)
    }

    #[test]
    fn chebyshev_line_fit_of_parabola() {
        // Fit y = a x + h to x^2 on {-1, 0, 1} minimizing the max deviation t:
        // variables z = (t, a, h); rows: +-(a x + h - x^2) <= t.
        // Optimum: a = 0, h = 0.5, t = 0.5.
        let xs = [-1.0, 0.0, 1.0];
        let mut rows = Vec::new();
        for &x in &xs {
            let f = x * x;
            // a x + h - t <= f
            rows.push(row(&[(0, -1.0), (1, x), (2, 1.0)], f));
            // -a x - h - t <= -f
            rows.push(row(&[(0, -1.0), (1, -x), (2, -1.0)], -f));
        }
        rows.push(row(&[(0, -1.0)], 0.0)); // t >= 0
        let problem = Problem { num_vars: 3, rows, objective: vec![1.0, 0.0, 0.0] };
        let sol = solve(&problem).unwrap();
        assert!((sol.objective - 0.5).abs() < 1e-9, "objective {}", sol.objective);
        assert!((sol.z[0] - 0.5).abs() < 1e-9);
        assert!(sol.z[1].abs() < 1e-9);
        assert!((sol.z[2] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn unconstrained_variable_defaults_to_zero() {
        // Only t is constrained; the free variable stays at zero.
        let rows = vec![row(&[(0, -1.0)], 0.0)];
        let problem = Problem { num_vars: 2, rows, objective: vec![1.0, 0.0] };
        let sol = solve(&problem).unwrap();
        assert_eq!(sol.objective, 0.0);
        assert_eq!(sol.z[1], 0.0);
    }

    #[test]
    fn infeasible_is_detected() {
        // z <= 0 and -z <= -1
        let rows = vec![row(&[(0, 1.0)], 0.0), row(&[(0, -1.0)], -1.0)];
        let problem = Problem { num_vars: 1, rows, objective: vec![1.0] };
        assert_eq!(solve(&problem).unwrap_err(), SimplexError::PrimalInfeasible);
    }

    #[test]
    fn unbounded_is_detected() {
        // min z with only z <= 1
        let rows = vec![row(&[(0, 1.0)], 1.0)];
        let problem = Problem { num_vars: 1, rows, objective: vec![1.0] };
        assert_eq!(solve(&problem).unwrap_err(), SimplexError::PrimalUnbounded);
    }

    #[test]
    fn larger_random_instance_matches_bounds() {
        // min t s.t. |a.x_k + h - f_k| <= t over random data; the optimum is
        // at most the value at (a, h) = 0 and at least half the f-range after
        // any affine shift. Sanity-check feasibility of the returned point.
        let mut seed = 0x243f6a88u64;
        let mut next = move || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((seed >> 33) as f64 / (1u64 << 31) as f64) - 1.0
        };
        let d = 3;
        let points: Vec<(Vec<f64>, f64)> =
            (0..80).map(|_| ((0..d).map(|_| next() * 2.0).collect(), next() * 5.0)).collect();
        let mut rows = Vec::new();
        for (x, f) in &points {
            let mut up: Vec<(u32, f64)> = vec![(0, -1.0)];
            let mut dn: Vec<(u32, f64)> = vec![(0, -1.0)];
            for (i, &xi) in x.iter().enumerate() {
                up.push((1 + i as u32, xi));
                dn.push((1 + i as u32, -xi));
            }
            up.push((1 + d as u32, 1.0));
            dn.push((1 + d as u32, -1.0));
            rows.push((up, *f));
            rows.push((dn, -*f));
        }
        let mut objective = vec![0.0; d + 2];
        objective[0] = 1.0;
        let problem = Problem { num_vars: d + 2, rows, objective };
        let sol = solve(&problem).unwrap();
        let t = sol.z[0];
        for (x, f) in &points {
            let fit: f64 =
                x.iter().enumerate().map(|(i, &xi)| sol.z[1 + i] * xi).sum::<f64>() + sol.z[1 + d];
            assert!((fit - f).abs() <= t + 1e-7);
        }
        let fmax = points.iter().map(|(_, f)| *f).fold(f64::MIN, f64::max);
        let fmin = points.iter().map(|(_, f)| *f).fold(f64::MAX, f64::min);
        assert!(t <= (fmax - fmin) / 2.0 + 1e-7);
    }
}
