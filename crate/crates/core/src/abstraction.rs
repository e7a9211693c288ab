//! The incremental abstraction driver: increment planning, the expand/solve
//! loop, interpolation-error inflation, and the serialized artifact format.

use crate::funcs::{evaluate, FuncError, FunctionSpec, SmoothnessClass, SmoothnessInfo};
use crate::lp::{
    build_incremental_program, build_onestep_program, solve_lp, AffinePlanePair, LpError,
    PlaneDims, SolveReport,
};
use crate::mesh::{
    expand_region, initial_region, interpolation_radius, mesh_diameter, point_of_index,
    region_corners, BoxRegion, DomainBox, GridIndex, MeshError, SamplePoint, UniformMesh,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AbstractionError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("budget {budget} too small; need at least {needed} points per increment")]
    BudgetTooSmall { budget: usize, needed: usize },
    #[error("memory cap {cap} below the {needed} active points the method requires")]
    MemoryBudgetExceeded { needed: usize, cap: usize },
    #[error(transparent)]
    Func(#[from] FuncError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("malformed abstraction file: {0}")]
    BadFile(String),
}

/// Where the first operating region is placed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartRegion {
    LeftCorner,
    Center,
    Explicit(BoxRegion),
}

/// How a scalar-output field's gap is reported: as-is, or replicated across
/// the state dimension (the 1-norm of a gap repeated d times).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputMode {
    Scalar,
    Replicated,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AbstractionConfig {
    /// Maximum active sample points per increment (new points plus carried
    /// corners).
    pub budget: usize,
    /// Permutation of dimensions controlling slab growth; identity if absent.
    pub expansion_order: Option<Vec<usize>>,
    pub start_region: StartRegion,
    /// Extra grid points folded into the first increment's sample set.
    pub warm_start_points: Vec<GridIndex>,
    pub smoothness: Option<SmoothnessInfo>,
    pub output_mode: OutputMode,
    /// Emulated hard cap on simultaneously active points, independent of the
    /// budget. One-step runs fail when the full grid exceeds it.
    pub memory_cap: Option<usize>,
}

impl AbstractionConfig {
    pub fn new(budget: usize) -> Self {
        AbstractionConfig {
            budget,
            expansion_order: None,
            start_region: StartRegion::LeftCorner,
            warm_start_points: Vec::new(),
            smoothness: None,
            output_mode: OutputMode::Scalar,
            memory_cap: None,
        }
    }
}

/// Record of one increment: the region reached, the solved planes and gap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncrementLog {
    pub k: usize,
    pub region: BoxRegion,
    pub sample_count: usize,
    pub theta_k: f64,
    pub planes: AffinePlanePair,
    pub solve: SolveReport,
    pub peak_active_points: usize,
    /// Set when even the minimal slab exceeded the budget this increment.
    pub overflow: bool,
}

/// The finished abstraction: inflated planes, the inflation margin, the number
/// of increments, and the running maximum gap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalAbstraction {
    /// Post-inflation planes: offsets already shifted by sigma.
    pub planes: AffinePlanePair,
    pub sigma: f64,
    pub kappa: usize,
    pub overall_theta: f64,
    pub log: Vec<IncrementLog>,
}

impl FinalAbstraction {
    /// The gap reported when a scalar output stands for `n` identical
    /// components.
    pub fn theta_replicated(&self, n: usize) -> f64 {
        self.overall_theta * n as f64
    }
}

fn div_ceil(a: usize, b: usize) -> usize {
    a / b + usize::from(a % b != 0)
}

/// Predict the number of increments needed to sweep `s_max` points with the
/// given per-increment budget and carried corner count, plus the theoretical
/// bounds on that number.
pub fn plan_increments(
    s_max: usize,
    budget: usize,
    carried: usize,
    d: usize,
) -> Result<(usize, (usize, usize)), AbstractionError> {
    if budget >= s_max {
        return Ok((1, (1, 1)));
    }
    let needed = (1usize << d) + d + 1;
    if budget < needed {
        return Err(AbstractionError::BudgetTooSmall { budget, needed });
    }
    if budget <= carried {
        return Err(AbstractionError::BudgetTooSmall { budget, needed: carried + 1 });
    }
    let kappa = div_ceil(s_max - budget, budget - carried) + 1;
    let lower = div_ceil(s_max - budget, budget - (d + 1)) + 1;
    let upper = s_max - budget + 1;
    Ok((kappa, (lower, upper)))
}

fn plane_dims(spec: &FunctionSpec) -> PlaneDims {
    PlaneDims {
        outputs: spec.arity_out(),
        dim_state: spec.dim_state(),
        dim_input: spec.dim_input(),
    }
}

fn eval_indices<I>(
    mesh: &UniformMesh,
    spec: &FunctionSpec,
    indices: I,
) -> Result<Vec<SamplePoint>, AbstractionError>
where
    I: IntoIterator<Item = GridIndex>,
{
    indices
        .into_iter()
        .map(|idx| {
            let position = point_of_index(mesh, &idx)?;
            let value = evaluate(spec, &position)?;
            Ok(SamplePoint { position, value })
        })
        .collect()
}

fn corner_positions(
    mesh: &UniformMesh,
    region: &BoxRegion,
) -> Result<Vec<Vec<f64>>, AbstractionError> {
    region_corners(mesh, region)?
        .iter()
        .map(|idx| point_of_index(mesh, idx).map_err(AbstractionError::from))
        .collect()
}

/// Widen the planes by the interpolation error margin of the matching
/// smoothness case, returning the margin used.
pub fn inflate_abstraction(
    planes: &AffinePlanePair,
    mesh: &UniformMesh,
    class: SmoothnessClass,
    constant: f64,
) -> (AffinePlanePair, f64) {
    assert!(constant > 0.0, "smoothness constant must be positive");
    let delta_s = interpolation_radius(mesh.dim(), mesh_diameter(mesh));
    let sigma = match class {
        SmoothnessClass::C0 => 2.0 * constant * delta_s,
        SmoothnessClass::Lipschitz | SmoothnessClass::C1 => constant * delta_s,
        SmoothnessClass::C2 => 0.5 * constant * delta_s * delta_s,
    };
    let mut inflated = planes.clone();
    for h in &mut inflated.h_upper {
        *h += sigma;
    }
    for h in &mut inflated.h_lower {
        *h -= sigma;
    }
    (inflated, sigma)
}

fn maybe_inflate(
    planes: &AffinePlanePair,
    mesh: &UniformMesh,
    smoothness: Option<&SmoothnessInfo>,
) -> (AffinePlanePair, f64) {
    match smoothness {
        Some(info) => inflate_abstraction(planes, mesh, info.class, info.constant),
        None => (planes.clone(), 0.0),
    }
}

/// Maximum 1-norm plane gap over the given positions.
pub fn abstraction_error(planes: &AffinePlanePair, corners: &[Vec<f64>]) -> f64 {
    assert!(!corners.is_empty(), "need at least one position");
    corners
        .iter()
        .map(|c| planes.gap_one_norm(c))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Single-LP baseline over every grid point at once.
pub fn run_onestep(
    mesh: &UniformMesh,
    spec: &FunctionSpec,
    smoothness: Option<&SmoothnessInfo>,
    memory_cap: Option<usize>,
) -> Result<FinalAbstraction, AbstractionError> {
    if spec.arity_in() != mesh.dim() {
        return Err(AbstractionError::InvalidConfig(format!(
            "function arity {} does not match mesh dimension {}",
            spec.arity_in(),
            mesh.dim()
        )));
    }
    let s_max = mesh.s_max();
    if let Some(cap) = memory_cap {
        if cap < s_max {
            return Err(AbstractionError::MemoryBudgetExceeded { needed: s_max, cap });
        }
    }
    let dims = plane_dims(spec);
    let full = mesh.full_region();
    let points = eval_indices(mesh, spec, mesh.iter_indices())?;
    let corners = corner_positions(mesh, &full)?;
    let program = build_onestep_program(&points, &corners, dims)?;
    let (planes, solve) = solve_lp(&program)?;
    let theta = planes.theta;
    let log = vec![IncrementLog {
        k: 1,
        region: full,
        sample_count: s_max,
        theta_k: theta,
        planes: planes.clone(),
        solve,
        peak_active_points: s_max,
        overflow: false,
    }];
    let (inflated, sigma) = maybe_inflate(&planes, mesh, smoothness);
    Ok(FinalAbstraction { planes: inflated, sigma, kappa: 1, overall_theta: theta, log })
}

/// The memory-bounded procedure: solve over a starting region, then
/// repeatedly expand the region by budgeted slabs, re-solving with extension
/// constraints against the previous planes until the region covers the mesh.
pub fn run_incremental(
    mesh: &UniformMesh,
    spec: &FunctionSpec,
    config: &AbstractionConfig,
) -> Result<FinalAbstraction, AbstractionError> {
    if spec.arity_in() != mesh.dim() {
        return Err(AbstractionError::InvalidConfig(format!(
            "function arity {} does not match mesh dimension {}",
            spec.arity_in(),
            mesh.dim()
        )));
    }
    let d = mesh.dim();
    let budget = config.budget;
    if budget < 2 {
        return Err(AbstractionError::BudgetTooSmall { budget, needed: 2 });
    }
    if let Some(cap) = config.memory_cap {
        if cap < budget {
            return Err(AbstractionError::InvalidConfig(format!(
                "memory cap {cap} below the per-increment budget {budget}"
            )));
        }
    }
    let order: Vec<usize> = match &config.expansion_order {
        Some(o) => {
            let mut seen = vec![false; d];
            if o.len() != d || o.iter().any(|&i| i >= d || std::mem::replace(&mut seen[i], true)) {
                return Err(AbstractionError::InvalidConfig(
                    "expansion_order must be a permutation of the dimensions".into(),
                ));
            }
            o.clone()
        }
        None => (0..d).collect(),
    };
    for w in &config.warm_start_points {
        mesh.check_index(w)?;
    }
    let dims = plane_dims(spec);

    let mut region = match &config.start_region {
        StartRegion::LeftCorner => initial_region(mesh, GridIndex(vec![0; d]), budget, &order)?,
        StartRegion::Center => {
            let seed = GridIndex(mesh.points_per_dim().iter().map(|&n| n / 2).collect());
            initial_region(mesh, seed, budget, &order)?
        }
        StartRegion::Explicit(r) => {
            mesh.check_index(&r.lo)?;
            mesh.check_index(&r.hi)?;
            if r.point_count() > budget {
                return Err(AbstractionError::InvalidConfig(format!(
                    "explicit start region holds {} points, over the budget {budget}",
                    r.point_count()
                )));
            }
            r.clone()
        }
    };

    // First increment: plain bracketing over the region plus warm starts.
    let warm_outside: Vec<GridIndex> = config
        .warm_start_points
        .iter()
        .filter(|w| !region.contains(w))
        .cloned()
        .collect();
    let mut points = eval_indices(mesh, spec, region.iter_indices())?;
    points.extend(eval_indices(mesh, spec, warm_outside.iter().cloned())?);
    let mut corners = corner_positions(mesh, &region)?;
    // Warm-start points outside the region extend the hull the gap is
    // measured over, so they take gap rows too.
    for w in &warm_outside {
        corners.push(point_of_index(mesh, w)?);
    }
    let sample_count = points.len();
    let program = build_onestep_program(&points, &corners, dims)?;
    let (mut planes, solve) = solve_lp(&program)?;
    let mut overall_theta = planes.theta;
    let mut log = vec![IncrementLog {
        k: 1,
        region: region.clone(),
        sample_count,
        theta_k: planes.theta,
        planes: planes.clone(),
        solve,
        peak_active_points: sample_count,
        overflow: sample_count > budget,
    }];

    while region != mesh.full_region() {
        let expansion = expand_region(mesh, &region, budget, &order)?;
        let new_points = eval_indices(mesh, spec, expansion.new_points.iter().cloned())?;
        let prev_corners = corner_positions(mesh, &region)?;
        let new_corners = corner_positions(mesh, &expansion.region)?;
        let program =
            build_incremental_program(&new_points, &prev_corners, &planes, &new_corners, dims)?;
        let (next_planes, solve) = solve_lp(&program)?;
        let active = new_points.len() + prev_corners.len();
        overall_theta = overall_theta.max(next_planes.theta);
        log.push(IncrementLog {
            k: log.len() + 1,
            region: expansion.region.clone(),
            sample_count: active,
            theta_k: next_planes.theta,
            planes: next_planes.clone(),
            solve,
            peak_active_points: active,
            overflow: expansion.overflow,
        });
        planes = next_planes;
        region = expansion.region;
    }

    let kappa = log.len();
    let (mut inflated, sigma) = maybe_inflate(&planes, mesh, config.smoothness.as_ref());
    // The published pair carries the overall gap, the max across increments.
    inflated.theta = overall_theta;
    Ok(FinalAbstraction { planes: inflated, sigma, kappa, overall_theta, log })
}

/// On-disk form of a finished abstraction, bundled with the domain it covers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbstractionFile {
    pub n: usize,
    pub m: usize,
    pub outputs: usize,
    pub domain: DomainBox,
    pub a_upper: MatrixDoc,
    pub b_upper: MatrixDoc,
    pub h_upper: Vec<f64>,
    pub a_lower: MatrixDoc,
    pub b_lower: MatrixDoc,
    pub h_lower: Vec<f64>,
    pub sigma: f64,
    pub kappa: usize,
    pub theta: f64,
    pub per_increment: Vec<IncrementLog>,
}

/// Row-major matrix with an explicit shape header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixDoc {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl MatrixDoc {
    fn new(rows: usize, cols: usize, data: &[f64]) -> Self {
        assert_eq!(data.len(), rows * cols);
        MatrixDoc { rows, cols, data: data.to_vec() }
    }
}

/// Serialize as a UTF-8 JSON document. Numbers survive a round trip exactly.
pub fn save_abstraction(abstraction: &FinalAbstraction, domain: &DomainBox) -> String {
    let p = &abstraction.planes;
    let dims = p.dims;
    let doc = AbstractionFile {
        n: dims.dim_state,
        m: dims.dim_input,
        outputs: dims.outputs,
        domain: domain.clone(),
        a_upper: MatrixDoc::new(dims.outputs, dims.dim_state, &p.a_upper),
        b_upper: MatrixDoc::new(dims.outputs, dims.dim_input, &p.b_upper),
        h_upper: p.h_upper.clone(),
        a_lower: MatrixDoc::new(dims.outputs, dims.dim_state, &p.a_lower),
        b_lower: MatrixDoc::new(dims.outputs, dims.dim_input, &p.b_lower),
        h_lower: p.h_lower.clone(),
        sigma: abstraction.sigma,
        kappa: abstraction.kappa,
        theta: abstraction.overall_theta,
        per_increment: abstraction.log.clone(),
    };
    let mut text = serde_json::to_string_pretty(&doc).expect("abstraction serializes");
    text.push('\n');
    text
}

pub fn load_abstraction(text: &str) -> Result<(FinalAbstraction, DomainBox), AbstractionError> {
    let doc: AbstractionFile =
        serde_json::from_str(text).map_err(|e| AbstractionError::BadFile(e.to_string()))?;
    let dims = PlaneDims { outputs: doc.outputs, dim_state: doc.n, dim_input: doc.m };
    for (mat, rows, cols) in [
        (&doc.a_upper, doc.outputs, doc.n),
        (&doc.b_upper, doc.outputs, doc.m),
        (&doc.a_lower, doc.outputs, doc.n),
        (&doc.b_lower, doc.outputs, doc.m),
    ] {
        if mat.rows != rows || mat.cols != cols || mat.data.len() != rows * cols {
            return Err(AbstractionError::BadFile("matrix shape header mismatch".into()));
        }
    }
    if doc.h_upper.len() != doc.outputs || doc.h_lower.len() != doc.outputs {
        return Err(AbstractionError::BadFile("offset vector length mismatch".into()));
    }
    let planes = AffinePlanePair {
        dims,
        a_upper: doc.a_upper.data,
        b_upper: doc.b_upper.data,
        h_upper: doc.h_upper,
        a_lower: doc.a_lower.data,
        b_lower: doc.b_lower.data,
        h_lower: doc.h_lower,
        theta: doc.theta,
    };
    Ok((
        FinalAbstraction {
            planes,
            sigma: doc.sigma,
            kappa: doc.kappa,
            overall_theta: doc.theta,
            log: doc.per_increment,
        },
        doc.domain,
    ))
}
