use crate::scalar::Scalar;
use crate::{Error, Result};

pub const MAX_BRUTE_FORCE_FEATURES: usize = 15;

/// Shapley values by enumerating every coalition. The value of a coalition
/// is the model averaged over background rows with off-coalition features
/// taken from the background row.
pub fn brute_force_shapley<T, F>(
    margin_fn: F,
    row: &[Option<T>],
    background: &[Vec<Option<T>>],
    n_features: usize,
) -> Result<Vec<T>>
where
    T: Scalar,
    F: Fn(&[Option<T>]) -> T,
{
    if n_features > MAX_BRUTE_FORCE_FEATURES {
        return Err(Error::domain(format!(
            "brute force limited to {MAX_BRUTE_FORCE_FEATURES} features, got {n_features}"
        )));
    }
    if background.is_empty() {
        return Err(Error::domain("brute force needs at least one background row"));
    }
    if row.len() != n_features || background.iter().any(|b| b.len() != n_features) {
        return Err(Error::domain("row width does not match n_features"));
    }

    let n_sets = 1usize << n_features;
    let mut hybrid = vec![None; n_features];
    let value: Vec<f64> = (0..n_sets)
        .map(|mask| {
            let total: f64 = background
                .iter()
                .map(|b| {
                    for j in 0..n_features {
                        hybrid[j] = if mask >> j & 1 == 1 { row[j] } else { b[j] };
                    }
                    margin_fn(&hybrid).as_f64()
                })
                .sum();
            total / background.len() as f64
        })
        .collect();

    let mut fact = vec![1.0f64; n_features + 1];
    for i in 1..=n_features {
        fact[i] = fact[i - 1] * i as f64;
    }
    let weight = |s: usize| fact[s] * fact[n_features - s - 1] / fact[n_features];

    Ok((0..n_features)
        .map(|j| {
            let bit = 1usize << j;
            let phi: f64 = (0..n_sets)
                .filter(|m| m & bit == 0)
                .map(|m| weight(m.count_ones() as usize) * (value[m | bit] - value[m]))
                .sum();
            T::of(phi)
        })
        .collect())
}
