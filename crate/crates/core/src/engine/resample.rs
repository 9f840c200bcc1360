use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};

/// `n` multinomial draws from normalised or unnormalised weights, returned
/// sorted so copies of a parent sit next to each other.
pub fn multinomial_indices<R: Rng + ?Sized>(
    weights: &[f64],
    n: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let dist = WeightedIndex::new(weights).map_err(|e| match e {
        rand::distr::weighted::Error::InsufficientNonZero => Error::ZeroWeights,
        other => Error::InvalidWeights(other.to_string()),
    })?;
    let mut idx: Vec<usize> = (0..n).map(|_| dist.sample(rng)).collect();
    idx.sort_unstable();
    Ok(idx)
}

/// Copy each of `survivors` `n / s` times and hand the remainder to a random
/// subset of them.
pub fn replicate_indices<R: Rng + ?Sized>(
    survivors: &[usize],
    n: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let s = survivors.len();
    if s == 0 {
        return Err(Error::DegeneratePopulation("no survivors to replicate".into()));
    }
    let base = n / s;
    let mut counts = vec![base; s];
    for i in index::sample(rng, s, n - base * s) {
        counts[i] += 1;
    }
    let mut out = Vec::with_capacity(n);
    for (&idx, &c) in survivors.iter().zip(&counts) {
        out.extend(std::iter::repeat_n(idx, c));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};

    #[test]
    fn multinomial_frequencies() {
        let mut rng = stream(9, 0, Purpose::Resample, 0);
        let w = [0.1, 0.2, 0.7];
        let idx = multinomial_indices(&w, 100_000, &mut rng).unwrap();
        for (k, &p) in w.iter().enumerate() {
            let f = idx.iter().filter(|&&i| i == k).count() as f64 / 1e5;
            assert!((f - p).abs() < 0.01);
        }
        assert!(matches!(multinomial_indices(&[0.0, 0.0], 3, &mut rng), Err(Error::ZeroWeights)));
    }

    #[test]
    fn replication_is_balanced() {
        let mut rng = stream(9, 0, Purpose::Resample, 1);
        let idx = replicate_indices(&[4, 7, 9], 10, &mut rng).unwrap();
        assert_eq!(idx.len(), 10);
        for s in [4, 7, 9] {
            let c = idx.iter().filter(|&&i| i == s).count();
            assert!(c == 3 || c == 4);
        }
        let idx = replicate_indices(&[1, 2], 8, &mut rng).unwrap();
        assert_eq!(idx, vec![1, 1, 1, 1, 2, 2, 2, 2]);
    }
}
