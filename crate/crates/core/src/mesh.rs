//! Uniform meshes over box domains, grid indexing and box-shaped operating regions.
//!
//! The operating region of an increment is an axis-aligned box of grid
//! indices grown slab-by-slab; its convex-hull vertices are the box corners,
//! which keeps vertex enumeration cheap in high dimensions.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("invalid domain: lower bound {lower} is not below upper bound {upper} in dimension {dim}")]
    InvalidDomain { dim: usize, lower: f64, upper: f64 },
    #[error("too few points in dimension {dim}: {count} (need at least 2)")]
    TooFewPoints { dim: usize, count: usize },
    #[error("index out of range in dimension {dim}: {index} >= {count}")]
    IndexOutOfRange { dim: usize, index: usize, count: usize },
    #[error("region does not fit inside the mesh")]
    RegionOutOfMesh,
    #[error("region already covers the full mesh")]
    AlreadyFull,
    #[error("expansion budget {budget} leaves no room for new points (carried corners: {carried})")]
    BudgetTooSmall { budget: usize, carried: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// The bounded state-input box: `dim_state` state dimensions followed by
/// `dim_input` input dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
    dim_state: usize,
    dim_input: usize,
}

impl DomainBox {
    pub fn new(
        lower: Vec<f64>,
        upper: Vec<f64>,
        dim_state: usize,
        dim_input: usize,
    ) -> Result<Self, MeshError> {
        let d = dim_state + dim_input;
        assert!(dim_state >= 1, "at least one state dimension required");
        if lower.len() != d {
            return Err(MeshError::DimensionMismatch { expected: d, got: lower.len() });
        }
        if upper.len() != d {
            return Err(MeshError::DimensionMismatch { expected: d, got: upper.len() });
        }
        for i in 0..d {
            if !(lower[i] < upper[i]) {
                return Err(MeshError::InvalidDomain { dim: i, lower: lower[i], upper: upper[i] });
            }
        }
        Ok(DomainBox { lower, upper, dim_state, dim_input })
    }

    /// Same bounds in every dimension, no inputs.
    pub fn cube(lower: f64, upper: f64, dim_state: usize) -> Result<Self, MeshError> {
        Self::new(vec![lower; dim_state], vec![upper; dim_state], dim_state, 0)
    }

    pub fn dim(&self) -> usize {
        self.dim_state + self.dim_input
    }

    pub fn dim_state(&self) -> usize {
        self.dim_state
    }

    pub fn dim_input(&self) -> usize {
        self.dim_input
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, position: &[f64], slack: f64) -> bool {
        position.len() == self.dim()
            && position.iter().enumerate().all(|(i, &p)| {
                p >= self.lower[i] - slack && p <= self.upper[i] + slack
            })
    }
}

/// Integer coordinates of a grid point, one per dimension.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridIndex(pub Vec<usize>);

impl GridIndex {
    pub fn coords(&self) -> &[usize] {
        &self.0
    }
}

/// Uniformly gridded domain box. Enumeration is lexicographic with
/// dimension 0 slowest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformMesh {
    domain: DomainBox,
    points_per_dim: Vec<usize>,
    spacing: Vec<f64>,
    s_max: usize,
}

pub fn build_mesh(domain: DomainBox, points_per_dim: Vec<usize>) -> Result<UniformMesh, MeshError> {
    let d = domain.dim();
    if points_per_dim.len() != d {
        return Err(MeshError::DimensionMismatch { expected: d, got: points_per_dim.len() });
    }
    for (i, &c) in points_per_dim.iter().enumerate() {
        if c < 2 {
            return Err(MeshError::TooFewPoints { dim: i, count: c });
        }
    }
    let spacing: Vec<f64> = (0..d)
        .map(|i| (domain.upper[i] - domain.lower[i]) / (points_per_dim[i] - 1) as f64)
        .collect();
    let s_max = points_per_dim.iter().product();
    Ok(UniformMesh { domain, points_per_dim, spacing, s_max })
}

impl UniformMesh {
    pub fn domain(&self) -> &DomainBox {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn points_per_dim(&self) -> &[usize] {
        &self.points_per_dim
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn s_max(&self) -> usize {
        self.s_max
    }

    pub fn full_region(&self) -> BoxRegion {
        BoxRegion {
            lo: GridIndex(vec![0; self.dim()]),
            hi: GridIndex(self.points_per_dim.iter().map(|&c| c - 1).collect()),
        }
    }

    pub fn check_index(&self, idx: &GridIndex) -> Result<(), MeshError> {
        if idx.0.len() != self.dim() {
            return Err(MeshError::DimensionMismatch { expected: self.dim(), got: idx.0.len() });
        }
        for (i, (&c, &n)) in idx.0.iter().zip(&self.points_per_dim).enumerate() {
            if c >= n {
                return Err(MeshError::IndexOutOfRange { dim: i, index: c, count: n });
            }
        }
        Ok(())
    }

    /// Iterate all grid points in lexicographic order (dimension 0 slowest).
    pub fn iter_indices(&self) -> RegionIter {
        region_iter(&self.full_region())
    }
}

pub fn point_of_index(mesh: &UniformMesh, idx: &GridIndex) -> Result<Vec<f64>, MeshError> {
    mesh.check_index(idx)?;
    Ok(idx
        .0
        .iter()
        .enumerate()
        .map(|(i, &c)| mesh.domain.lower[i] + c as f64 * mesh.spacing[i])
        .collect())
}

/// Euclidean diagonal of one mesh cell.
pub fn mesh_diameter(mesh: &UniformMesh) -> f64 {
    mesh.spacing.iter().map(|h| h * h).sum::<f64>().sqrt()
}

/// Bound on the distance from any domain point to the nearest grid point,
/// `sqrt(d / (2(d+1))) * delta`.
pub fn interpolation_radius(d: usize, delta: f64) -> f64 {
    assert!(d >= 1 && delta > 0.0);
    (d as f64 / (2.0 * (d as f64 + 1.0))).sqrt() * delta
}

/// Axis-aligned box of grid indices, bounds inclusive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoxRegion {
    pub lo: GridIndex,
    pub hi: GridIndex,
}

impl BoxRegion {
    pub fn new(lo: GridIndex, hi: GridIndex) -> Self {
        assert_eq!(lo.0.len(), hi.0.len());
        assert!(lo.0.iter().zip(&hi.0).all(|(l, h)| l <= h), "region lo must not exceed hi");
        BoxRegion { lo, hi }
    }

    pub fn dim(&self) -> usize {
        self.lo.0.len()
    }

    /// Number of grid points inside the box.
    pub fn point_count(&self) -> usize {
        self.lo.0.iter().zip(&self.hi.0).map(|(l, h)| h - l + 1).product()
    }

    pub fn contains(&self, idx: &GridIndex) -> bool {
        idx.0.len() == self.dim()
            && idx.0.iter().enumerate().all(|(i, &c)| self.lo.0[i] <= c && c <= self.hi.0[i])
    }

    /// Number of corners of the box: 2^a with a the non-collapsed dimensions.
    pub fn corner_count(&self) -> usize {
        1usize << self.lo.0.iter().zip(&self.hi.0).filter(|(l, h)| l < h).count()
    }

    pub fn iter_indices(&self) -> RegionIter {
        region_iter(self)
    }
}

/// Corners of the box region: 2^a indices, collapsed dimensions contributing
/// a single coordinate.
pub fn region_corners(mesh: &UniformMesh, region: &BoxRegion) -> Result<Vec<GridIndex>, MeshError> {
    mesh.check_index(&region.lo)?;
    mesh.check_index(&region.hi)
        .map_err(|_| MeshError::RegionOutOfMesh)?;
    let varying: Vec<usize> = (0..region.dim())
        .filter(|&i| region.lo.0[i] < region.hi.0[i])
        .collect();
    let mut corners = Vec::with_capacity(1 << varying.len());
    for mask in 0..(1usize << varying.len()) {
        let mut coords = region.lo.0.clone();
        for (bit, &dimidx) in varying.iter().enumerate() {
            if mask & (1 << bit) != 0 {
                coords[dimidx] = region.hi.0[dimidx];
            }
        }
        corners.push(GridIndex(coords));
    }
    Ok(corners)
}

/// Lexicographic iterator over the indices of a box region (dimension 0 slowest).
pub struct RegionIter {
    lo: Vec<usize>,
    hi: Vec<usize>,
    next: Option<Vec<usize>>,
}

fn region_iter(region: &BoxRegion) -> RegionIter {
    RegionIter {
        lo: region.lo.0.clone(),
        hi: region.hi.0.clone(),
        next: Some(region.lo.0.clone()),
    }
}

impl Iterator for RegionIter {
    type Item = GridIndex;

    fn next(&mut self) -> Option<GridIndex> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        let mut dim = succ.len();
        loop {
            if dim == 0 {
                break; // exhausted
            }
            dim -= 1;
            if succ[dim] < self.hi[dim] {
                succ[dim] += 1;
                self.next = Some(succ);
                break;
            }
            succ[dim] = self.lo[dim];
        }
        Some(GridIndex(current))
    }
}

/// A grid point together with the vector field value at its position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePoint {
    pub position: Vec<f64>,
    pub value: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Lo,
    Hi,
}

/// Result of one region expansion step.
#[derive(Debug, Clone)]
pub struct Expansion {
    pub region: BoxRegion,
    pub new_points: Vec<GridIndex>,
    /// Set when even the minimal legal expansion (one slab) exceeded the budget.
    pub overflow: bool,
}

/// Grow the region by whole slabs along the dimensions in `order`, keeping
/// `|new points| + |corners of old region| <= budget` when feasible. If not
/// even one slab fits, the smallest legal expansion is taken and `overflow`
/// is set.
pub fn expand_region(
    mesh: &UniformMesh,
    region: &BoxRegion,
    budget: usize,
    order: &[usize],
) -> Result<Expansion, MeshError> {
    let d = mesh.dim();
    if region.dim() != d || order.len() != d {
        return Err(MeshError::DimensionMismatch { expected: d, got: region.dim().min(order.len()) });
    }
    mesh.check_index(&region.lo)?;
    mesh.check_index(&region.hi).map_err(|_| MeshError::RegionOutOfMesh)?;
    if *region == mesh.full_region() {
        return Err(MeshError::AlreadyFull);
    }
    let carried = region.corner_count();
    if budget == 0 {
        return Err(MeshError::BudgetTooSmall { budget, carried });
    }

    let mut lo = region.lo.0.clone();
    let mut hi = region.hi.0.clone();
    let mut new_points: Vec<GridIndex> = Vec::new();
    let mut used = carried;
    let mut overflow = false;

    'dims: for &dim in order {
        // Alternate sides, high first, skipping exhausted sides.
        let mut prefer = Side::Hi;
        loop {
            let room_hi = hi[dim] + 1 < mesh.points_per_dim[dim];
            let room_lo = lo[dim] > 0;
            if !room_hi && !room_lo {
                continue 'dims;
            }
            let side = match (prefer, room_hi, room_lo) {
                (Side::Hi, true, _) => Side::Hi,
                (Side::Hi, false, true) => Side::Lo,
                (Side::Lo, _, true) => Side::Lo,
                (Side::Lo, true, false) => Side::Hi,
                _ => unreachable!(),
            };
            // Slab = full cross-section of the current box in every other dim.
            let slab_size: usize = (0..d)
                .map(|i| if i == dim { 1 } else { hi[i] - lo[i] + 1 })
                .product();
            if used + slab_size > budget {
                if new_points.is_empty() {
                    overflow = true; // take the minimal slab anyway
                } else {
                    break 'dims;
                }
            }
            let slab_coord = match side {
                Side::Hi => hi[dim] + 1,
                Side::Lo => lo[dim] - 1,
            };
            let mut slab_lo = lo.clone();
            let mut slab_hi = hi.clone();
            slab_lo[dim] = slab_coord;
            slab_hi[dim] = slab_coord;
            let slab = BoxRegion::new(GridIndex(slab_lo), GridIndex(slab_hi));
            new_points.extend(slab.iter_indices());
            match side {
                Side::Hi => hi[dim] = slab_coord,
                Side::Lo => lo[dim] = slab_coord,
            }
            used += slab_size;
            if overflow {
                break 'dims;
            }
            prefer = match side {
                Side::Hi => Side::Lo,
                Side::Lo => Side::Hi,
            };
        }
    }

    let expanded = BoxRegion::new(GridIndex(lo), GridIndex(hi));
    debug_assert!(expanded.point_count() > region.point_count());
    Ok(Expansion { region: expanded, new_points, overflow })
}

/// Grow an initial region from a seed cell until the point budget is filled.
/// Used for the first increment, where there are no carried corners.
pub fn initial_region(
    mesh: &UniformMesh,
    seed: GridIndex,
    budget: usize,
    order: &[usize],
) -> Result<BoxRegion, MeshError> {
    mesh.check_index(&seed)?;
    assert!(budget >= 1);
    let mut region = BoxRegion::new(seed.clone(), seed);
    loop {
        if region.point_count() >= budget || region == mesh.full_region() {
            return Ok(region);
        }
        // Budget here counts region points only; offset by the corner count
        // that expand_region charges for the carried set.
        let remaining = budget - region.point_count() + region.corner_count();
        let exp = expand_region(mesh, &region, remaining, order)?;
        if exp.overflow {
            return Ok(region);
        }
        region = exp.region;
    }
}
