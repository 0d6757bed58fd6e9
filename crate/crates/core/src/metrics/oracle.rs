//! Brute-force reference for the 1-D transport cost.
//!
//! Expands both inputs to `lcm(N_s, N_t)` equal-mass atoms and tries every
//! perfect matching. Exponential; intended for checking [`ot1d_cost`]
//! on tiny inputs only.
//!
//! [`ot1d_cost`]: super::ot1d_cost

use super::GapError;

pub const MAX_ATOMS: usize = 8;

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn expand(values: &[f64], copies: usize) -> Vec<f64> {
    values
        .iter()
        .flat_map(|&v| std::iter::repeat_n(v, copies))
        .collect()
}

/// Minimum mean squared difference over all matchings of the expanded atoms.
pub fn wd1d_bruteforce(src: &[f64], tgt: &[f64]) -> Result<f64, GapError> {
    if src.is_empty() || tgt.is_empty() {
        return Err(GapError::EmptyInput);
    }
    let atoms = src.len() / gcd(src.len(), tgt.len()) * tgt.len();
    if atoms > MAX_ATOMS {
        return Err(GapError::TooLarge { atoms, max: MAX_ATOMS });
    }
    let a = expand(src, atoms / src.len());
    let mut b = expand(tgt, atoms / tgt.len());

    let cost = |b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
    let mut best = cost(&b);

    // Heap's algorithm over the target atoms.
    let mut c = vec![0usize; atoms];
    let mut i = 1;
    while i < atoms {
        if c[i] < i {
            if i % 2 == 0 {
                b.swap(0, i);
            } else {
                b.swap(c[i], i);
            }
            best = best.min(cost(&b));
            c[i] += 1;
            i = 1;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    Ok(best / atoms as f64)
}
