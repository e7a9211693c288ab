//! Plain-text dump of an assembled program in fixed MPS format, for
//! inspection or replay with external solvers.

use super::{ConstraintTag, LinearProgram, Sense, VarLayout};
use std::fmt::Write;

fn var_name(layout: &VarLayout, idx: u32) -> String {
    let dims = layout.dims;
    if idx == VarLayout::THETA {
        return "THETA".to_string();
    }
    let block = dims.outputs * (dims.dim_state + dims.dim_input + 1);
    let mut k = (idx - 1) as usize;
    let (side, lo) = if k < block { ("U", false) } else { ("L", true) };
    if lo {
        k -= block;
    }
    let na = dims.outputs * dims.dim_state;
    let nb = dims.outputs * dims.dim_input;
    if k < na {
        format!("A{side}_{}_{}", k / dims.dim_state, k % dims.dim_state)
    } else if k < na + nb {
        let k = k - na;
        format!("B{side}_{}_{}", k / dims.dim_input, k % dims.dim_input)
    } else {
        format!("H{side}_{}", k - na - nb)
    }
}

/// Render the program as an MPS document. All variables are free; the
/// objective is the bare gap variable.
pub fn write_mps(program: &LinearProgram, name: &str) -> String {
    let layout = VarLayout::new(program.dims);
    let num_vars = layout.num_vars();
    let mut out = String::new();
    writeln!(out, "NAME          {name}").unwrap();
    writeln!(out, "ROWS").unwrap();
    writeln!(out, " N  COST").unwrap();
    let row_name = |i: usize, tag: ConstraintTag| {
        let prefix = match tag {
            ConstraintTag::Sample => "S",
            ConstraintTag::Extension => "X",
            ConstraintTag::ErrorBound => "E",
        };
        format!("{prefix}{i:07}")
    };
    for (i, r) in program.rows.iter().enumerate() {
        let sense = match r.sense {
            Sense::Le => 'L',
            Sense::Ge => 'G',
        };
        writeln!(out, " {sense}  {}", row_name(i, r.tag)).unwrap();
    }
    // COLUMNS wants entries grouped by variable.
    let mut by_var: Vec<Vec<(String, f64)>> = vec![Vec::new(); num_vars];
    by_var[VarLayout::THETA as usize].push(("COST".to_string(), 1.0));
    for (i, r) in program.rows.iter().enumerate() {
        for &(v, a) in &r.coeffs {
            by_var[v as usize].push((row_name(i, r.tag), a));
        }
    }
    writeln!(out, "COLUMNS").unwrap();
    for v in 0..num_vars {
        let vn = var_name(&layout, v as u32);
        for (rn, a) in &by_var[v] {
            writeln!(out, "    {vn:<10}{rn:<10}{a:.17e}").unwrap();
        }
    }
    writeln!(out, "RHS").unwrap();
    for (i, r) in program.rows.iter().enumerate() {
        if r.rhs != 0.0 {
            writeln!(out, "    RHS       {:<10}{:.17e}", row_name(i, r.tag), r.rhs).unwrap();
        }
    }
    writeln!(out, "BOUNDS").unwrap();
    for v in 0..num_vars {
        writeln!(out, " FR BND       {}", var_name(&layout, v as u32)).unwrap();
    }
    writeln!(out, "ENDATA").unwrap();
    out
}

#[cfg(test)]
mod tests {
    use super::super::{build_onestep_program, PlaneDims};
    use super::*;
    use crate::mesh::SamplePoint;

    #[test]
    fn mps_has_all_sections_and_rows() {
        let points = vec![
            SamplePoint { position: vec![0.0], value: vec![1.0] },
            SamplePoint { position: vec![1.0], value: vec![2.0] },
        ];
        let dims = PlaneDims { outputs: 1, dim_state: 1, dim_input: 0 };
        let program = build_onestep_program(&points, &[vec![0.0], vec![1.0]], dims).unwrap();
        let text = write_mps(&program, "TINY");
        for section in ["NAME", "ROWS", "COLUMNS", "RHS", "BOUNDS", "ENDATA"] {
            assert!(text.contains(section), "missing {section}");
        }
        assert!(text.contains("THETA"));
        assert!(text.contains("AU_0_0"));
        assert!(text.contains("HL_0"));
        // 4 sample + 2 vertex rows
        assert_eq!(text.matches("\n L  ").count() + text.matches("\n G  ").count(), 6);
    }
}
