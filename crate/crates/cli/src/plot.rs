//! CSV export of an abstraction along a 1- or 2-dimensional grid slice, with
//! optional per-increment plane overlays.

use affabs::abstraction::FinalAbstraction;
use affabs::funcs::evaluate;
use affabs::mesh::{point_of_index, GridIndex, UniformMesh};
use affabs::FunctionSpec;
use std::collections::BTreeMap;
use std::fmt::Write;

/// Fixed 17-significant-digit formatting so identical runs emit identical
/// bytes.
fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// Walk the grid over the unsliced dimensions and tabulate f against the
/// final planes, plus the planes of each requested increment (1-based).
pub fn emit_plot_data(
    abstraction: &FinalAbstraction,
    spec: &FunctionSpec,
    mesh: &UniformMesh,
    slice: &BTreeMap<usize, f64>,
    increments: &[usize],
) -> Result<String, String> {
    let d = mesh.dim();
    let free: Vec<usize> = (0..d).filter(|i| !slice.contains_key(i)).collect();
    if free.is_empty() || free.len() > 2 {
        return Err(format!(
            "slice must leave 1 or 2 free dimensions, got {} of {d}",
            free.len()
        ));
    }
    // Fixed dimensions snap to exact grid coordinates.
    let mut fixed_index = vec![0usize; d];
    for (&dim, &value) in slice {
        if dim >= d {
            return Err(format!("slice dimension {dim} out of range for a {d}-dimensional mesh"));
        }
        let lower = mesh.domain().lower()[dim];
        let spacing = mesh.spacing()[dim];
        let idx = ((value - lower) / spacing).round() as isize;
        if idx < 0 || idx as usize >= mesh.points_per_dim()[dim] {
            return Err(format!("slice value {value} outside the grid in dimension {dim}"));
        }
        let snapped = lower + idx as f64 * spacing;
        if (snapped - value).abs() > 1e-9 * spacing.max(1.0) {
            return Err(format!(
                "slice value {value} in dimension {dim} is not a grid coordinate (nearest {snapped})"
            ));
        }
        fixed_index[dim] = idx as usize;
    }
    for &k in increments {
        if k == 0 || k > abstraction.log.len() {
            return Err(format!(
                "increment {k} out of range; the run recorded {}",
                abstraction.log.len()
            ));
        }
    }

    let outputs = spec.arity_out();
    let mut csv = String::new();
    for &dim in &free {
        write!(csv, "x{dim},").unwrap();
    }
    for out in 0..outputs {
        write!(csv, "f{out},upper{out},lower{out},").unwrap();
    }
    for &k in increments {
        for out in 0..outputs {
            write!(csv, "upper{out}_k{k},lower{out}_k{k},").unwrap();
        }
    }
    csv.pop();
    csv.push('\n');

    let mut cursor = vec![0usize; free.len()];
    loop {
        let mut index = fixed_index.clone();
        for (slot, &dim) in free.iter().enumerate() {
            index[dim] = cursor[slot];
        }
        let position =
            point_of_index(mesh, &GridIndex(index)).map_err(|e| e.to_string())?;
        let f = evaluate(spec, &position).map_err(|e| e.to_string())?;
        let upper = abstraction.planes.upper_at(&position);
        let lower = abstraction.planes.lower_at(&position);
        let mut row: Vec<String> = free.iter().map(|&dim| num(position[dim])).collect();
        for out in 0..outputs {
            row.push(num(f[out]));
            row.push(num(upper[out]));
            row.push(num(lower[out]));
        }
        for &k in increments {
            let planes = &abstraction.log[k - 1].planes;
            let up = planes.upper_at(&position);
            let lo = planes.lower_at(&position);
            for out in 0..outputs {
                row.push(num(up[out]));
                row.push(num(lo[out]));
            }
        }
        csv.push_str(&row.join(","));
        csv.push('\n');

        // Advance over the free dimensions, last one fastest.
        let mut slot = free.len();
        loop {
            if slot == 0 {
                return Ok(csv);
            }
            slot -= 1;
            cursor[slot] += 1;
            if cursor[slot] < mesh.points_per_dim()[free[slot]] {
                break;
            }
            cursor[slot] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use affabs::abstraction::run_onestep;
    use affabs::funcs::parse_function_spec;
    use affabs::mesh::{build_mesh, DomainBox};

    #[test]
    fn one_dimensional_slice_tabulates_all_points() {
        let spec = parse_function_spec("f0 = x0^2").unwrap();
        let mesh = build_mesh(DomainBox::cube(-1.0, 1.0, 1).unwrap(), vec![5]).unwrap();
        let result = run_onestep(&mesh, &spec, None, None).unwrap();
        let csv = emit_plot_data(&result, &spec, &mesh, &BTreeMap::new(), &[1]).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 6);
        assert_eq!(lines[0], "x0,f0,upper0,lower0,upper0_k1,lower0_k1");
        // Affine columns match f for an affine function; here check format.
        assert!(lines[1].split(',').count() == 6);
        assert!(lines[1].contains('e'), "scientific notation expected");
    }

    #[test]
    fn slice_on_2d_mesh_fixes_one_dimension() {
        let spec = parse_function_spec("f0 = x0 + x1").unwrap();
        let mesh = build_mesh(DomainBox::cube(0.0, 1.0, 2).unwrap(), vec![3, 3]).unwrap();
        let result = run_onestep(&mesh, &spec, None, None).unwrap();
        let slice: BTreeMap<usize, f64> = [(1, 0.5)].into();
        let csv = emit_plot_data(&result, &spec, &mesh, &slice, &[]).unwrap();
        assert_eq!(csv.lines().count(), 4);
        // Affine f: the planes coincide with the function along the slice.
        for line in csv.lines().skip(1) {
            let cells: Vec<f64> =
                line.split(',').map(|c| c.parse().unwrap()).collect();
            assert!((cells[1] - cells[2]).abs() < 1e-9);
            assert!((cells[1] - cells[3]).abs() < 1e-9);
        }
    }

    #[test]
    fn bad_slices_are_rejected() {
        let spec = parse_function_spec("f0 = x0 + x1 + x2").unwrap();
        let mesh = build_mesh(DomainBox::cube(0.0, 1.0, 3).unwrap(), vec![3, 3, 3]).unwrap();
        let result = run_onestep(&mesh, &spec, None, None).unwrap();
        // All dims free: too many.
        assert!(emit_plot_data(&result, &spec, &mesh, &BTreeMap::new(), &[]).is_err());
        // Off-grid slice value.
        let slice: BTreeMap<usize, f64> = [(1, 0.3), (2, 0.0)].into();
        assert!(emit_plot_data(&result, &spec, &mesh, &slice, &[]).is_err());
        // Unknown increment.
        let slice: BTreeMap<usize, f64> = [(1, 0.5), (2, 0.0)].into();
        assert!(emit_plot_data(&result, &spec, &mesh, &slice, &[9]).is_err());
    }
}
