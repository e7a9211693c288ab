//! Builtin vector fields: the Rastrigin test function and the swarm
//! rendezvous dynamics.

use crate::mesh::DomainBox;

/// Scalar Rastrigin value over a d-dimensional state.
pub fn rastrigin(x: &[f64]) -> f64 {
    let d = x.len() as f64;
    let tau = 2.0 * std::f64::consts::PI;
    10.0 * d + x.iter().map(|&v| v * v - 10.0 * (tau * v).cos()).sum::<f64>()
}

/// The paper-standard Rastrigin domain [-5.1, 5.1]^d.
pub fn rastrigin_domain(d: usize) -> DomainBox {
    DomainBox::cube(-5.1, 5.1, d).expect("valid domain")
}

const EPS_NORM: f64 = 1e-12;

/// Signed smallest rotation angle from v1 to v2; zero when either vector is
/// (near) zero or the rotation direction is ambiguous.
pub fn rotation_angle(v1: [f64; 2], v2: [f64; 2]) -> f64 {
    let n1 = (v1[0] * v1[0] + v1[1] * v1[1]).sqrt();
    let n2 = (v2[0] * v2[0] + v2[1] * v2[1]).sqrt();
    if n1 < EPS_NORM || n2 < EPS_NORM {
        return 0.0;
    }
    let cross_z = v1[0] * v2[1] - v1[1] * v2[0];
    let sign = if cross_z > 0.0 {
        1.0
    } else if cross_z < 0.0 {
        -1.0
    } else {
        0.0
    };
    let cosine = ((v1[0] * v2[0] + v1[1] * v2[1]) / (n1 * n2)).clamp(-1.0, 1.0);
    sign * cosine.acos()
}

/// Rendezvous dynamics for `agents` unicycle robots with all-to-all
/// neighborhoods. State layout: (x_i, y_i, theta_i) per agent, concatenated.
/// Output layout mirrors the state.
pub fn swarm_rendezvous(agents: usize, state: &[f64]) -> Vec<f64> {
    assert_eq!(state.len(), 3 * agents);
    let pos = |i: usize| [state[3 * i], state[3 * i + 1]];
    let heading = |i: usize| state[3 * i + 2];
    let mut out = Vec::with_capacity(3 * agents);
    for i in 0..agents {
        let p_i = pos(i);
        // Mean offset towards the other agents.
        let mut drift = [0.0, 0.0];
        for j in 0..agents {
            if j != i {
                drift[0] += pos(j)[0] - p_i[0];
                drift[1] += pos(j)[1] - p_i[1];
            }
        }
        let neighbors = (agents - 1) as f64;
        drift[0] /= neighbors;
        drift[1] /= neighbors;
        let th = heading(i);
        let bearing = [th.cos(), th.sin()];
        let v = bearing[0] * drift[0] + bearing[1] * drift[1];
        let w = rotation_angle(bearing, drift);
        out.push(v * th.cos());
        out.push(v * th.sin());
        out.push(w);
    }
    out
}

/// State bounds used for the swarm benchmark; supports 3 or 5 agents.
pub fn swarm_domain(agents: usize) -> DomainBox {
    let x_bounds = [(-5.0, 5.0), (-5.0, 5.0), (-7.0, 7.0), (-7.0, 7.0), (-7.0, 7.0)];
    let y_bounds = [(0.0, 0.4), (0.5, 0.9), (1.0, 5.0), (0.0, 0.876), (0.0, 1.67)];
    assert!(agents == 3 || agents == 5, "swarm domain defined for 3 or 5 agents");
    let mut lower = Vec::with_capacity(3 * agents);
    let mut upper = Vec::with_capacity(3 * agents);
    for i in 0..agents {
        lower.push(x_bounds[i].0);
        upper.push(x_bounds[i].1);
        lower.push(y_bounds[i].0);
        upper.push(y_bounds[i].1);
        lower.push(-0.02);
        upper.push(0.02);
    }
    DomainBox::new(lower, upper, 3 * agents, 0).expect("valid domain")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rastrigin_zero_at_origin() {
        assert_eq!(rastrigin(&[0.0]), 0.0);
        assert_eq!(rastrigin(&[0.0, 0.0]), 0.0);
    }

    #[test]
    fn rastrigin_corner_2d() {
        // 20 + 2*(5.1^2 - 10 cos(10.2 pi))
        let v = rastrigin(&[5.1, 5.1]);
        let term = 5.1f64.powi(2) - 10.0 * (2.0 * std::f64::consts::PI * 5.1).cos();
        assert!((v - (20.0 + 2.0 * term)).abs() < 1e-10);
        assert!((v - 55.8396).abs() < 1e-3);
    }

    #[test]
    fn rastrigin_midpoint_1d() {
        let v = rastrigin(&[2.55]);
        let expected = 10.0 + 2.55f64.powi(2)
            - 10.0 * (2.0 * std::f64::consts::PI * 2.55).cos();
        assert!((v - expected).abs() < 1e-12);
        assert!((v - 26.0127).abs() < 1e-3);
    }

    #[test]
    fn rastrigin_nonnegative_dense() {
        for k in 0..=1000 {
            let x = -5.1 + 10.2 * k as f64 / 1000.0;
            let v = rastrigin(&[x, -x]);
            assert!(v >= -1e-9, "rastrigin({x}) = {v}");
            if x != 0.0 {
                assert!(v > 0.0);
            }
        }
    }

    #[test]
    fn swarm_rendezvous_fixed_point() {
        // Both robots at the same position: zero drift, zero dynamics.
        let state = [1.0, 2.0, 0.3, 1.0, 2.0, -0.4];
        let out = swarm_rendezvous(2, &state);
        for v in out {
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn swarm_two_agents_hand_values() {
        // p1=(0,0) th1=0, p2=(1,0): drift1=(1,0), bearing1=(1,0), v=1.
        let state = [0.0, 0.0, 0.0, 1.0, 0.0, 0.0];
        let out = swarm_rendezvous(2, &state);
        assert!((out[0] - 1.0).abs() < 1e-12); // f1^x
        assert!(out[1].abs() < 1e-12); // f1^y
        assert!(out[2].abs() < 1e-12); // f1^theta: phi((1,0),(1,0)) = 0
    }

    #[test]
    fn swarm_translation_invariance() {
        let state = [0.3, -0.2, 0.5, 1.7, 0.9, -1.1, -0.4, 2.2, 0.8];
        let out = swarm_rendezvous(3, &state);
        let mut shifted = state;
        for i in 0..3 {
            shifted[3 * i] += 10.0;
            shifted[3 * i + 1] -= 3.0;
        }
        let out_shifted = swarm_rendezvous(3, &shifted);
        for (a, b) in out.iter().zip(&out_shifted) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn rotation_angle_antisymmetric() {
        let pairs = [
            ([1.0, 0.0], [0.0, 1.0]),
            ([1.0, 0.5], [-0.3, 0.7]),
            ([0.2, -0.9], [1.4, 0.1]),
        ];
        for (a, b) in pairs {
            assert!((rotation_angle(a, b) + rotation_angle(b, a)).abs() < 1e-12);
        }
        // Singular cases resolve to zero.
        assert_eq!(rotation_angle([0.0, 0.0], [1.0, 0.0]), 0.0);
        assert_eq!(rotation_angle([1.0, 0.0], [-2.0, 0.0]), 0.0);
    }

    #[test]
    fn swarm_domain_shapes() {
        let d3 = swarm_domain(3);
        assert_eq!(d3.dim(), 9);
        assert_eq!(d3.lower()[0], -5.0);
        assert_eq!(d3.upper()[4], 0.9);
        let d5 = swarm_domain(5);
        assert_eq!(d5.dim(), 15);
    }
}
