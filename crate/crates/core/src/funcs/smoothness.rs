//! Sampling-based estimation of smoothness constants.
//!
//! The estimates are finite-difference maxima over random samples scaled by a
//! safety factor; they are not sound bounds and every consumer must carry the
//! `Estimated` provenance flag through to reports.

use super::{evaluate, FuncError, FunctionSpec, SmoothnessClass};
use crate::mesh::DomainBox;
use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const SAFETY_FACTOR: f64 = 1.2;

/// Estimate the smoothness constant of the matching Lemma case: the maximum
/// Jacobian 2-norm for C0/Lipschitz/C1, the maximum Hessian 2-norm for C2.
/// Returns an `Estimated`-provenance value; `samples` must be at least 1000.
pub fn estimate_smoothness_bound(
    spec: &FunctionSpec,
    domain: &DomainBox,
    class: SmoothnessClass,
    samples: usize,
    seed: u64,
) -> Result<f64, FuncError> {
    assert!(samples >= 1000, "need at least 1000 samples");
    assert_eq!(domain.dim(), spec.arity_in());
    let d = domain.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spans: Vec<f64> = (0..d).map(|i| domain.upper()[i] - domain.lower()[i]).collect();
    let steps: Vec<f64> = spans.iter().map(|s| 1e-5 * s).collect();
    let dists: Vec<Uniform<f64>> = (0..d)
        .map(|i| {
            // Keep the difference stencil inside the domain.
            Uniform::new_inclusive(domain.lower()[i] + steps[i], domain.upper()[i] - steps[i])
        })
        .collect();

    let mut worst = 0f64;
    let mut point = vec![0.0; d];
    for _ in 0..samples {
        for i in 0..d {
            point[i] = dists[i].sample(&mut rng);
        }
        let norm = match class {
            SmoothnessClass::C0 | SmoothnessClass::Lipschitz | SmoothnessClass::C1 => {
                jacobian_norm(spec, &point, &steps)?
            }
            SmoothnessClass::C2 => hessian_norm(spec, &point, &spans)?,
        };
        worst = worst.max(norm);
    }
    Ok(SAFETY_FACTOR * worst)
}

fn jacobian_norm(spec: &FunctionSpec, point: &[f64], steps: &[f64]) -> Result<f64, FuncError> {
    let d = point.len();
    let p = spec.arity_out();
    // Rows of the Jacobian via central differences.
    let mut jac = vec![vec![0.0; d]; p];
    let mut shifted = point.to_vec();
    for i in 0..d {
        shifted[i] = point[i] + steps[i];
        let hi = evaluate(spec, &shifted)?;
        shifted[i] = point[i] - steps[i];
        let lo = evaluate(spec, &shifted)?;
        shifted[i] = point[i];
        for (k, row) in jac.iter_mut().enumerate() {
            row[i] = (hi[k] - lo[k]) / (2.0 * steps[i]);
        }
    }
    Ok(spectral_norm(&jac))
}

fn hessian_norm(spec: &FunctionSpec, point: &[f64], spans: &[f64]) -> Result<f64, FuncError> {
    let d = point.len();
    let p = spec.arity_out();
    let steps: Vec<f64> = spans.iter().map(|s| 1e-4 * s).collect();
    let center = evaluate(spec, point)?;
    let mut worst = 0f64;
    for out in 0..p {
        let mut hess = vec![vec![0.0; d]; d];
        let mut shifted = point.to_vec();
        for i in 0..d {
            for j in i..d {
                let val = if i == j {
                    shifted[i] = point[i] + steps[i];
                    let hi = evaluate(spec, &shifted)?[out];
                    shifted[i] = point[i] - steps[i];
                    let lo = evaluate(spec, &shifted)?[out];
                    shifted[i] = point[i];
                    (hi - 2.0 * center[out] + lo) / (steps[i] * steps[i])
                } else {
                    shifted[i] = point[i] + steps[i];
                    shifted[j] = point[j] + steps[j];
                    let pp = evaluate(spec, &shifted)?[out];
                    shifted[j] = point[j] - steps[j];
                    let pm = evaluate(spec, &shifted)?[out];
                    shifted[i] = point[i] - steps[i];
                    let mm = evaluate(spec, &shifted)?[out];
                    shifted[j] = point[j] + steps[j];
                    let mp = evaluate(spec, &shifted)?[out];
                    shifted[i] = point[i];
                    shifted[j] = point[j];
                    (pp - pm - mp + mm) / (4.0 * steps[i] * steps[j])
                };
                hess[i][j] = val;
                hess[j][i] = val;
            }
        }
        worst = worst.max(spectral_norm(&hess));
    }
    Ok(worst)
}

/// Largest singular value via power iteration on M^T M.
pub(crate) fn spectral_norm(rows: &[Vec<f64>]) -> f64 {
    let p = rows.len();
    if p == 0 {
        return 0.0;
    }
    let d = rows[0].len();
    if d == 0 {
        return 0.0;
    }
    let mut v: Vec<f64> = (0..d).map(|i| 1.0 + (i as f64) * 0.01).collect();
    let mut sigma = 0.0;
    for _ in 0..200 {
        // w = M v, v' = M^T w
        let w: Vec<f64> = rows.iter().map(|r| r.iter().zip(&v).map(|(a, b)| a * b).sum()).collect();
        let mut next = vec![0.0; d];
        for (r, &wi) in rows.iter().zip(&w) {
            for (n, &a) in next.iter_mut().zip(r) {
                *n += a * wi;
            }
        }
        let norm = next.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-300 {
            return 0.0;
        }
        for n in &mut next {
            *n /= norm;
        }
        sigma = norm.sqrt();
        v = next;
    }
    sigma
}
