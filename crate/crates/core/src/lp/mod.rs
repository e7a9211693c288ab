//! Construction and solution of the bracketing-plane linear programs.
//!
//! Two program shapes exist: the one-step program with sample constraints at
//! every grid point, and the incremental program whose sample constraints
//! cover only newly added points while extension constraints anchor the new
//! planes outside the previous region's corner set.

mod simplex;

pub mod dump;

use crate::mesh::SamplePoint;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LpError {
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("LP reported infeasible; the bracketing programs are always feasible, this is a logic bug")]
    Infeasible,
    #[error("LP reported unbounded; the bracketing programs are bounded below by zero, this is a logic bug")]
    Unbounded,
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
}

/// Shape of a plane pair: `outputs` components over `dim_state` state and
/// `dim_input` input coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlaneDims {
    pub outputs: usize,
    pub dim_state: usize,
    pub dim_input: usize,
}

impl PlaneDims {
    pub fn arity_in(&self) -> usize {
        self.dim_state + self.dim_input
    }
}

/// Upper and lower affine functions bracketing the vector field, with the
/// optimal gap objective. Matrices are row-major `outputs x dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffinePlanePair {
    pub dims: PlaneDims,
    pub a_upper: Vec<f64>,
    pub b_upper: Vec<f64>,
    pub h_upper: Vec<f64>,
    pub a_lower: Vec<f64>,
    pub b_lower: Vec<f64>,
    pub h_lower: Vec<f64>,
    pub theta: f64,
}

impl AffinePlanePair {
    pub fn zeroed(dims: PlaneDims) -> Self {
        AffinePlanePair {
            dims,
            a_upper: vec![0.0; dims.outputs * dims.dim_state],
            b_upper: vec![0.0; dims.outputs * dims.dim_input],
            h_upper: vec![0.0; dims.outputs],
            a_lower: vec![0.0; dims.outputs * dims.dim_state],
            b_lower: vec![0.0; dims.outputs * dims.dim_input],
            h_lower: vec![0.0; dims.outputs],
            theta: 0.0,
        }
    }

    fn affine_at(&self, a: &[f64], b: &[f64], h: &[f64], position: &[f64]) -> Vec<f64> {
        let n = self.dims.dim_state;
        let m = self.dims.dim_input;
        assert_eq!(position.len(), n + m);
        (0..self.dims.outputs)
            .map(|i| {
                let mut acc = h[i];
                for j in 0..n {
                    acc += a[i * n + j] * position[j];
                }
                for j in 0..m {
                    acc += b[i * m + j] * position[n + j];
                }
                acc
            })
            .collect()
    }

    pub fn upper_at(&self, position: &[f64]) -> Vec<f64> {
        self.affine_at(&self.a_upper, &self.b_upper, &self.h_upper, position)
    }

    pub fn lower_at(&self, position: &[f64]) -> Vec<f64> {
        self.affine_at(&self.a_lower, &self.b_lower, &self.h_lower, position)
    }

    /// Componentwise `upper - lower` at a position.
    pub fn gap_at(&self, position: &[f64]) -> Vec<f64> {
        let up = self.upper_at(position);
        let lo = self.lower_at(position);
        up.iter().zip(lo).map(|(u, l)| u - l).collect()
    }

    /// 1-norm of the gap vector at a position.
    pub fn gap_one_norm(&self, position: &[f64]) -> f64 {
        self.gap_at(position).iter().map(|g| g.abs()).sum()
    }
}

/// Variable layout of a plane-fitting program: the gap objective first, then
/// the upper triple, then the lower triple.
#[derive(Debug, Clone, Copy)]
pub struct VarLayout {
    dims: PlaneDims,
}

impl VarLayout {
    pub fn new(dims: PlaneDims) -> Self {
        VarLayout { dims }
    }

    pub const THETA: u32 = 0;

    fn block(&self) -> usize {
        self.dims.outputs * (self.dims.dim_state + self.dims.dim_input + 1)
    }

    pub fn num_vars(&self) -> usize {
        1 + 2 * self.block()
    }

    pub fn a_upper(&self, out: usize, j: usize) -> u32 {
        (1 + out * self.dims.dim_state + j) as u32
    }

    pub fn b_upper(&self, out: usize, j: usize) -> u32 {
        (1 + self.dims.outputs * self.dims.dim_state + out * self.dims.dim_input + j) as u32
    }

    pub fn h_upper(&self, out: usize) -> u32 {
        (1 + self.dims.outputs * (self.dims.dim_state + self.dims.dim_input) + out) as u32
    }

    pub fn a_lower(&self, out: usize, j: usize) -> u32 {
        self.a_upper(out, j) + self.block() as u32
    }

    pub fn b_lower(&self, out: usize, j: usize) -> u32 {
        self.b_upper(out, j) + self.block() as u32
    }

    pub fn h_lower(&self, out: usize) -> u32 {
        self.h_upper(out) + self.block() as u32
    }

    /// Indices of all slope variables (both planes, both matrices).
    pub fn slope_vars(&self) -> Vec<u32> {
        let mut vars = Vec::new();
        for out in 0..self.dims.outputs {
            for j in 0..self.dims.dim_state {
                vars.push(self.a_upper(out, j));
                vars.push(self.a_lower(out, j));
            }
            for j in 0..self.dims.dim_input {
                vars.push(self.b_upper(out, j));
                vars.push(self.b_lower(out, j));
            }
        }
        vars
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Ge,
}

/// Provenance of a constraint row: bracketing at a sample point, extension
/// over the previous planes, or the gap bound at a vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConstraintTag {
    Sample,
    Extension,
    ErrorBound,
}

#[derive(Debug, Clone)]
pub struct ConstraintRow {
    pub coeffs: Vec<(u32, f64)>,
    pub sense: Sense,
    pub rhs: f64,
    pub tag: ConstraintTag,
}

/// The assembled program: minimize the gap variable subject to the rows.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub dims: PlaneDims,
    pub rows: Vec<ConstraintRow>,
    /// Positions referenced by the constraints; used to detect slope-degenerate
    /// programs that need canonicalization.
    positions: Vec<Vec<f64>>,
}

impl LinearProgram {
    pub fn num_vars(&self) -> usize {
        VarLayout::new(self.dims).num_vars()
    }

    pub fn row_count_by_tag(&self, tag: ConstraintTag) -> usize {
        self.rows.iter().filter(|r| r.tag == tag).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub objective: f64,
    pub iterations: usize,
    pub max_constraint_violation: f64,
}

fn check_points(points: &[SamplePoint], dims: PlaneDims) -> Result<(), LpError> {
    for p in points {
        if p.position.len() != dims.arity_in() {
            return Err(LpError::ShapeMismatch(format!(
                "position arity {} != {}",
                p.position.len(),
                dims.arity_in()
            )));
        }
        if p.value.len() != dims.outputs {
            return Err(LpError::ShapeMismatch(format!(
                "value arity {} != {}",
                p.value.len(),
                dims.outputs
            )));
        }
    }
    Ok(())
}

fn sample_rows(rows: &mut Vec<ConstraintRow>, layout: &VarLayout, point: &SamplePoint) {
    let dims = layout.dims;
    for out in 0..dims.outputs {
        let mut upper: Vec<(u32, f64)> = Vec::with_capacity(dims.arity_in() + 1);
        let mut lower: Vec<(u32, f64)> = Vec::with_capacity(dims.arity_in() + 1);
        for j in 0..dims.dim_state {
            upper.push((layout.a_upper(out, j), point.position[j]));
            lower.push((layout.a_lower(out, j), point.position[j]));
        }
        for j in 0..dims.dim_input {
            upper.push((layout.b_upper(out, j), point.position[dims.dim_state + j]));
            lower.push((layout.b_lower(out, j), point.position[dims.dim_state + j]));
        }
        upper.push((layout.h_upper(out), 1.0));
        lower.push((layout.h_lower(out), 1.0));
        rows.push(ConstraintRow {
            coeffs: upper,
            sense: Sense::Ge,
            rhs: point.value[out],
            tag: ConstraintTag::Sample,
        });
        rows.push(ConstraintRow {
            coeffs: lower,
            sense: Sense::Le,
            rhs: point.value[out],
            tag: ConstraintTag::Sample,
        });
    }
}

fn error_rows(rows: &mut Vec<ConstraintRow>, layout: &VarLayout, position: &[f64]) {
    let dims = layout.dims;
    for out in 0..dims.outputs {
        let mut coeffs: Vec<(u32, f64)> = Vec::with_capacity(2 * dims.arity_in() + 3);
        for j in 0..dims.dim_state {
            coeffs.push((layout.a_upper(out, j), position[j]));
            coeffs.push((layout.a_lower(out, j), -position[j]));
        }
        for j in 0..dims.dim_input {
            coeffs.push((layout.b_upper(out, j), position[dims.dim_state + j]));
            coeffs.push((layout.b_lower(out, j), -position[dims.dim_state + j]));
        }
        coeffs.push((layout.h_upper(out), 1.0));
        coeffs.push((layout.h_lower(out), -1.0));
        coeffs.push((VarLayout::THETA, -1.0));
        rows.push(ConstraintRow { coeffs, sense: Sense::Le, rhs: 0.0, tag: ConstraintTag::ErrorBound });
    }
}

/// One-step program: sample constraints at every grid point and the gap bound
/// at the domain corners. No extension constraints.
pub fn build_onestep_program(
    points: &[SamplePoint],
    corners: &[Vec<f64>],
    dims: PlaneDims,
) -> Result<LinearProgram, LpError> {
    if points.is_empty() {
        return Err(LpError::EmptyInput("one-step program needs sample points"));
    }
    check_points(points, dims)?;
    let layout = VarLayout::new(dims);
    let mut rows = Vec::with_capacity(2 * dims.outputs * points.len() + dims.outputs * corners.len());
    for p in points {
        sample_rows(&mut rows, &layout, p);
    }
    for c in corners {
        error_rows(&mut rows, &layout, c);
    }
    let mut positions: Vec<Vec<f64>> = points.iter().map(|p| p.position.clone()).collect();
    positions.extend(corners.iter().cloned());
    Ok(LinearProgram { dims, rows, positions })
}

/// Incremental program: sample constraints at the newly added points,
/// extension constraints against the previous planes at the previous corner
/// set, and the gap bound at the new corner set.
pub fn build_incremental_program(
    new_points: &[SamplePoint],
    prev_corners: &[Vec<f64>],
    prev_planes: &AffinePlanePair,
    new_corners: &[Vec<f64>],
    dims: PlaneDims,
) -> Result<LinearProgram, LpError> {
    if new_points.is_empty() {
        return Err(LpError::EmptyInput("an increment must add at least one grid point"));
    }
    check_points(new_points, dims)?;
    if prev_planes.dims != dims {
        return Err(LpError::ShapeMismatch("previous plane dims differ".into()));
    }
    let layout = VarLayout::new(dims);
    let mut rows = Vec::with_capacity(
        2 * dims.outputs * (new_points.len() + prev_corners.len()) + dims.outputs * new_corners.len(),
    );
    for p in new_points {
        sample_rows(&mut rows, &layout, p);
    }
    for q in prev_corners {
        if q.len() != dims.arity_in() {
            return Err(LpError::ShapeMismatch("corner arity mismatch".into()));
        }
        // Anchor against the previous planes' values at the corner.
        let prev_upper = prev_planes.upper_at(q);
        let prev_lower = prev_planes.lower_at(q);
        for out in 0..dims.outputs {
            let mut upper: Vec<(u32, f64)> = Vec::with_capacity(dims.arity_in() + 1);
            let mut lower: Vec<(u32, f64)> = Vec::with_capacity(dims.arity_in() + 1);
            for j in 0..dims.dim_state {
                upper.push((layout.a_upper(out, j), q[j]));
                lower.push((layout.a_lower(out, j), q[j]));
            }
            for j in 0..dims.dim_input {
                upper.push((layout.b_upper(out, j), q[dims.dim_state + j]));
                lower.push((layout.b_lower(out, j), q[dims.dim_state + j]));
            }
            upper.push((layout.h_upper(out), 1.0));
            lower.push((layout.h_lower(out), 1.0));
            rows.push(ConstraintRow {
                coeffs: upper,
                sense: Sense::Ge,
                rhs: prev_upper[out],
                tag: ConstraintTag::Extension,
            });
            rows.push(ConstraintRow {
                coeffs: lower,
                sense: Sense::Le,
                rhs: prev_lower[out],
                tag: ConstraintTag::Extension,
            });
        }
    }
    for c in new_corners {
        error_rows(&mut rows, &layout, c);
    }
    let mut positions: Vec<Vec<f64>> = new_points.iter().map(|p| p.position.clone()).collect();
    positions.extend(prev_corners.iter().cloned());
    positions.extend(new_corners.iter().cloned());
    Ok(LinearProgram { dims, rows, positions })
}

const FEASIBILITY_TOL: f64 = 1e-7;
const OBJECTIVE_TOL: f64 = 1e-6;

fn to_simplex(program: &LinearProgram, extra_rows: &[ConstraintRow], num_vars: usize, objective: Vec<f64>) -> simplex::Problem {
    let mut rows: Vec<(Vec<(u32, f64)>, f64)> =
        Vec::with_capacity(program.rows.len() + extra_rows.len() + 1);
    for r in program.rows.iter().chain(extra_rows) {
        match r.sense {
            Sense::Le => rows.push((r.coeffs.clone(), r.rhs)),
            Sense::Ge => rows.push((
                r.coeffs.iter().map(|&(i, a)| (i, -a)).collect(),
                -r.rhs,
            )),
        }
    }
    // The gap variable is nonnegative.
    rows.push((vec![(VarLayout::THETA, -1.0)], 0.0));
    simplex::Problem { num_vars, rows, objective }
}

fn planes_from_solution(dims: PlaneDims, z: &[f64]) -> AffinePlanePair {
    let layout = VarLayout::new(dims);
    let mut planes = AffinePlanePair::zeroed(dims);
    for out in 0..dims.outputs {
        for j in 0..dims.dim_state {
            planes.a_upper[out * dims.dim_state + j] = z[layout.a_upper(out, j) as usize];
            planes.a_lower[out * dims.dim_state + j] = z[layout.a_lower(out, j) as usize];
        }
        for j in 0..dims.dim_input {
            planes.b_upper[out * dims.dim_input + j] = z[layout.b_upper(out, j) as usize];
            planes.b_lower[out * dims.dim_input + j] = z[layout.b_lower(out, j) as usize];
        }
        planes.h_upper[out] = z[layout.h_upper(out) as usize];
        planes.h_lower[out] = z[layout.h_lower(out) as usize];
    }
    planes.theta = z[VarLayout::THETA as usize];
    planes
}

fn max_violation(program: &LinearProgram, z: &[f64]) -> f64 {
    let mut worst = 0f64;
    for r in &program.rows {
        let lhs: f64 = r.coeffs.iter().map(|&(i, a)| a * z[i as usize]).sum();
        let v = match r.sense {
            Sense::Le => lhs - r.rhs,
            Sense::Ge => r.rhs - lhs,
        };
        worst = worst.max(v);
    }
    worst
}

/// Affine rank of the constraint positions. When below the full arity the
/// slopes are not pinned down and the solution needs canonicalization.
fn affine_rank(positions: &[Vec<f64>], d: usize) -> usize {
    if positions.len() <= 1 {
        return 0;
    }
    let base = &positions[0];
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let scale = positions
        .iter()
        .flat_map(|p| p.iter().map(|v| v.abs()))
        .fold(1.0f64, f64::max);
    let tol = 1e-9 * scale;
    for p in &positions[1..] {
        let mut v: Vec<f64> = p.iter().zip(base).map(|(a, b)| a - b).collect();
        for b in &basis {
            let lead = b.iter().position(|x| x.abs() > tol).unwrap();
            let factor = v[lead] / b[lead];
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= factor * bi;
            }
        }
        if v.iter().any(|x| x.abs() > tol) {
            basis.push(v);
            if basis.len() == d {
                break;
            }
        }
    }
    basis.len()
}

fn map_simplex_err(e: simplex::SimplexError) -> LpError {
    match e {
        simplex::SimplexError::PrimalInfeasible => LpError::Infeasible,
        simplex::SimplexError::PrimalUnbounded => LpError::Unbounded,
        simplex::SimplexError::Numerical(msg) => LpError::NumericalFailure(msg.into()),
    }
}

/// Solve the program, returning the plane pair with the optimal gap. The
/// result is deterministic; when too few affinely independent positions pin
/// the slopes down, a secondary pass canonicalizes free slope entries to the
/// minimum-1-norm choice (zero for fully free entries).
pub fn solve_lp(program: &LinearProgram) -> Result<(AffinePlanePair, SolveReport), LpError> {
    let num_vars = program.num_vars();
    let mut objective = vec![0.0; num_vars];
    objective[VarLayout::THETA as usize] = 1.0;
    let problem = to_simplex(program, &[], num_vars, objective);
    let solution = simplex::solve(&problem).map_err(map_simplex_err)?;
    let mut iterations = solution.iterations;
    let theta_star = solution.objective;
    let mut z = solution.z;

    let d = program.dims.arity_in();
    if affine_rank(&program.positions, d) < d {
        if let Some(canonical) = canonicalize(program, theta_star)? {
            iterations += canonical.1;
            z = canonical.0;
            z[VarLayout::THETA as usize] = theta_star;
        }
    }

    let mut planes = planes_from_solution(program.dims, &z);
    planes.theta = theta_star;
    let violation = max_violation(program, &z);
    if violation > FEASIBILITY_TOL {
        return Err(LpError::NumericalFailure(format!(
            "solution violates constraints by {violation:.3e}"
        )));
    }
    // Tightness: the gap bound must be achieved at some vertex row
    // (or the program has no vertex rows and the optimum is zero).
    let mut achieved = f64::NEG_INFINITY;
    let mut has_error_rows = false;
    for r in &program.rows {
        if r.tag == ConstraintTag::ErrorBound {
            has_error_rows = true;
            let lhs: f64 = r
                .coeffs
                .iter()
                .filter(|&&(i, _)| i != VarLayout::THETA)
                .map(|&(i, a)| a * z[i as usize])
                .sum();
            achieved = achieved.max(lhs);
        }
    }
    if has_error_rows {
        let slack = (theta_star - achieved).abs();
        if slack > OBJECTIVE_TOL * theta_star.abs().max(1.0) {
            return Err(LpError::NumericalFailure(format!(
                "gap objective {theta_star} not achieved at any vertex (max gap {achieved})"
            )));
        }
    }
    let report = SolveReport {
        status: SolveStatus::Optimal,
        objective: theta_star,
        iterations,
        max_constraint_violation: violation,
    };
    Ok((planes, report))
}

/// Secondary pass: minimize the 1-norm of the slope entries while keeping the
/// optimal gap. Returns the canonicalized variable vector.
fn canonicalize(
    program: &LinearProgram,
    theta_star: f64,
) -> Result<Option<(Vec<f64>, usize)>, LpError> {
    let layout = VarLayout::new(program.dims);
    let base_vars = layout.num_vars();
    let slopes = layout.slope_vars();
    let num_vars = base_vars + slopes.len();
    let mut extra = Vec::with_capacity(2 * slopes.len() + 1);
    extra.push(ConstraintRow {
        coeffs: vec![(VarLayout::THETA, 1.0)],
        sense: Sense::Le,
        rhs: theta_star + 1e-9,
        tag: ConstraintTag::ErrorBound,
    });
    let mut objective = vec![0.0; num_vars];
    for (k, &s) in slopes.iter().enumerate() {
        let t = (base_vars + k) as u32;
        extra.push(ConstraintRow {
            coeffs: vec![(s, 1.0), (t, -1.0)],
            sense: Sense::Le,
            rhs: 0.0,
            tag: ConstraintTag::ErrorBound,
        });
        extra.push(ConstraintRow {
            coeffs: vec![(s, -1.0), (t, -1.0)],
            sense: Sense::Le,
            rhs: 0.0,
            tag: ConstraintTag::ErrorBound,
        });
        objective[t as usize] = 1.0;
    }
    let problem = to_simplex(program, &extra, num_vars, objective);
    match simplex::solve(&problem) {
        Ok(sol) => {
            let mut z = sol.z;
            z.truncate(base_vars);
            Ok(Some((z, sol.iterations)))
        }
        // Canonicalization is best-effort; fall back to the primary solution.
        Err(simplex::SimplexError::Numerical(_)) => Ok(None),
        Err(e) => Err(map_simplex_err(e)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sp(position: &[f64], value: f64) -> SamplePoint {
        SamplePoint { position: position.to_vec(), value: vec![value] }
    }

    fn dims_1d() -> PlaneDims {
        PlaneDims { outputs: 1, dim_state: 1, dim_input: 0 }
    }

    #[test]
    fn onestep_parabola_three_points() {
        let points = vec![sp(&[-1.0], 1.0), sp(&[0.0], 0.0), sp(&[1.0], 1.0)];
        let corners = vec![vec![-1.0], vec![1.0]];
        let program = build_onestep_program(&points, &corners, dims_1d()).unwrap();
        assert_eq!(program.row_count_by_tag(ConstraintTag::Sample), 6);
        assert_eq!(program.row_count_by_tag(ConstraintTag::ErrorBound), 2);
        assert_eq!(program.row_count_by_tag(ConstraintTag::Extension), 0);
        let (planes, report) = solve_lp(&program).unwrap();
        assert_eq!(report.status, SolveStatus::Optimal);
        assert!((planes.theta - 1.0).abs() < 1e-9, "theta = {}", planes.theta);
        // Optimal planes are horizontal: y = 1 and y = 0.
        assert!(planes.a_upper[0].abs() < 1e-9);
        assert!(planes.a_lower[0].abs() < 1e-9);
        assert!((planes.h_upper[0] - 1.0).abs() < 1e-9);
        assert!(planes.h_lower[0].abs() < 1e-9);
    }

    #[test]
    fn onestep_affine_function_zero_gap() {
        // f(x, u) = 2x - u + 3 over a small grid: both planes equal f.
        let dims = PlaneDims { outputs: 1, dim_state: 1, dim_input: 1 };
        let mut points = Vec::new();
        for &x in &[-1.0, 0.0, 1.0] {
            for &u in &[0.0, 1.0] {
                points.push(SamplePoint {
                    position: vec![x, u],
                    value: vec![2.0 * x - u + 3.0],
                });
            }
        }
        let corners = vec![vec![-1.0, 0.0], vec![-1.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]];
        let program = build_onestep_program(&points, &corners, dims).unwrap();
        let (planes, _) = solve_lp(&program).unwrap();
        assert!(planes.theta.abs() < 1e-9);
        for p in &points {
            let up = planes.upper_at(&p.position)[0];
            let lo = planes.lower_at(&p.position)[0];
            assert!((up - p.value[0]).abs() < 1e-8);
            assert!((lo - p.value[0]).abs() < 1e-8);
        }
    }

    #[test]
    fn onestep_single_point_canonicalizes_slopes() {
        let points = vec![sp(&[0.5], 2.0)];
        let corners = vec![vec![0.5]];
        let program = build_onestep_program(&points, &corners, dims_1d()).unwrap();
        let (planes, _) = solve_lp(&program).unwrap();
        assert!(planes.theta.abs() < 1e-9);
        assert!(planes.a_upper[0].abs() < 1e-9, "free slope should be zero");
        assert!(planes.a_lower[0].abs() < 1e-9);
        assert!((planes.h_upper[0] - 2.0).abs() < 1e-8);
        assert!((planes.h_lower[0] - 2.0).abs() < 1e-8);
    }

    #[test]
    fn onestep_empty_points_rejected() {
        assert!(matches!(
            build_onestep_program(&[], &[], dims_1d()),
            Err(LpError::EmptyInput(_))
        ));
    }

    #[test]
    fn incremental_parabola_second_increment() {
        // R_1 = {-1, 0}: planes collapse onto the chord f = -x.
        let first = build_onestep_program(
            &[sp(&[-1.0], 1.0), sp(&[0.0], 0.0)],
            &[vec![-1.0], vec![0.0]],
            dims_1d(),
        )
        .unwrap();
        let (planes1, _) = solve_lp(&first).unwrap();
        assert!(planes1.theta.abs() < 1e-9);
        assert!((planes1.upper_at(&[-1.0])[0] - 1.0).abs() < 1e-8);
        assert!((planes1.upper_at(&[0.0])[0]).abs() < 1e-8);

        // Add x = 1: the second increment reaches theta = 1 with y = 1, y = 0.
        let second = build_incremental_program(
            &[sp(&[1.0], 1.0)],
            &[vec![-1.0], vec![0.0]],
            &planes1,
            &[vec![-1.0], vec![1.0]],
            dims_1d(),
        )
        .unwrap();
        assert_eq!(second.row_count_by_tag(ConstraintTag::Sample), 2);
        assert_eq!(second.row_count_by_tag(ConstraintTag::Extension), 4);
        assert_eq!(second.row_count_by_tag(ConstraintTag::ErrorBound), 2);
        let (planes2, _) = solve_lp(&second).unwrap();
        assert!((planes2.theta - 1.0).abs() < 1e-9, "theta = {}", planes2.theta);
        // Planes dominate the previous pair at the previous corners.
        for q in [[-1.0], [0.0]] {
            assert!(planes2.upper_at(&q)[0] >= planes1.upper_at(&q)[0] - 1e-8);
            assert!(planes2.lower_at(&q)[0] <= planes1.lower_at(&q)[0] + 1e-8);
        }
        // And the new point forces the upper plane up where f pokes above.
        assert!(planes2.upper_at(&[1.0])[0] >= 1.0 - 1e-8);
    }

    #[test]
    fn incremental_empty_new_points_rejected() {
        let planes = AffinePlanePair::zeroed(dims_1d());
        assert!(matches!(
            build_incremental_program(&[], &[], &planes, &[], dims_1d()),
            Err(LpError::EmptyInput(_))
        ));
    }

    #[test]
    fn scaling_function_values_scales_theta() {
        let alphas = [2.0, 0.5, 10.0];
        let xs: Vec<f64> = (0..9).map(|k| -1.0 + 0.25 * k as f64).collect();
        let base_theta = {
            let points: Vec<SamplePoint> = xs.iter().map(|&x| sp(&[x], (3.0 * x).sin())).collect();
            let program =
                build_onestep_program(&points, &[vec![-1.0], vec![1.0]], dims_1d()).unwrap();
            solve_lp(&program).unwrap().0.theta
        };
        for alpha in alphas {
            let points: Vec<SamplePoint> =
                xs.iter().map(|&x| sp(&[x], alpha * (3.0 * x).sin())).collect();
            let program =
                build_onestep_program(&points, &[vec![-1.0], vec![1.0]], dims_1d()).unwrap();
            let theta = solve_lp(&program).unwrap().0.theta;
            assert!(
                (theta - alpha * base_theta).abs() < 1e-7 * alpha.max(1.0),
                "alpha {alpha}: {theta} vs {}",
                alpha * base_theta
            );
        }
    }

    #[test]
    fn randomized_instances_stay_solvable() {
        // LP (4) is always feasible and bounded; the solver must never
        // report otherwise on well-formed inputs.
        let mut seed = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((seed >> 33) as f64 / (1u64 << 31) as f64) - 1.0
        };
        for case in 0..30 {
            let d = 1 + case % 2;
            let dims = PlaneDims { outputs: 1, dim_state: d, dim_input: 0 };
            let count = 5 + case % 13;
            let points: Vec<SamplePoint> = (0..count)
                .map(|_| SamplePoint {
                    position: (0..d).map(|_| next() * 3.0).collect(),
                    value: vec![next() * 10.0],
                })
                .collect();
            let corners: Vec<Vec<f64>> =
                points.iter().take(4).map(|p| p.position.clone()).collect();
            let program = build_onestep_program(&points, &corners, dims).unwrap();
            let result = solve_lp(&program);
            let (planes, report) = result.expect("always feasible and bounded");
            assert!(planes.theta >= -1e-12);
            assert!(report.max_constraint_violation <= 1e-7);
        }
    }
}
