//! Exact optimal transport between uniform empirical measures on the line.

use super::GapError;

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    v
}

/// Optimal transport cost under `(u - v)^2` between the uniform measures on
/// `src` and `tgt`.
///
/// Squared distance is convex on the line, so the monotone (north-west
/// corner) coupling of the sorted values is optimal. Masses are tracked as
/// integers: each source atom carries `N_t` units and each target atom
/// `N_s`, so every transfer is exact and the total is divided by
/// `N_s * N_t` once at the end.
pub fn ot1d_cost(src: &[f64], tgt: &[f64]) -> Result<f64, GapError> {
    if src.is_empty() || tgt.is_empty() {
        return Err(GapError::EmptyInput);
    }
    let (ns, nt) = (src.len(), tgt.len());
    let (u, v) = (sorted(src), sorted(tgt));

    if ns == nt {
        let total: f64 = u.iter().zip(&v).map(|(a, b)| (a - b) * (a - b)).sum();
        return Ok(total / ns as f64);
    }

    let (src_mass, tgt_mass) = (nt as u128, ns as u128);
    let (mut i, mut j) = (0usize, 0usize);
    let (mut left_i, mut left_j) = (src_mass, tgt_mass);
    let mut total = 0.0f64;
    while i < ns && j < nt {
        let moved = left_i.min(left_j);
        let d = u[i] - v[j];
        total += moved as f64 * d * d;
        left_i -= moved;
        left_j -= moved;
        if left_i == 0 {
            i += 1;
            left_i = src_mass;
        }
        if left_j == 0 {
            j += 1;
            left_j = tgt_mass;
        }
    }
    Ok(total / (ns as f64 * nt as f64))
}
