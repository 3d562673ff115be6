//! Nucleus (top-p) and top-k sampling.

use rand::Rng;

use super::ScoringModel;
use crate::error::{Error, Result};

/// Tokens kept by top-p then top-k filtering, with renormalised probabilities.
///
/// Tokens are ranked by probability descending, ties by id ascending. The
/// nucleus is the shortest prefix whose mass reaches `top_p` (the whole
/// ranking if rounding keeps it short). `top_k = 0` disables the k cut.
pub fn nucleus_candidates(dist: &[f64], top_p: f64, top_k: usize) -> Result<Vec<(u32, f64)>> {
    if !(top_p > 0.0 && top_p <= 1.0) {
        return Err(Error::InvalidArgument(format!("top_p must lie in (0, 1], got {top_p}")));
    }
    if dist.is_empty() {
        return Err(Error::EmptyInput("distribution"));
    }
    if dist.iter().any(|p| !(*p >= 0.0 && p.is_finite())) {
        return Err(Error::InvalidArgument("distribution has negative or non-finite entries".into()));
    }
    let mut ranked: Vec<(u32, f64)> = dist.iter().enumerate().map(|(i, &p)| (i as u32, p)).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

    let mut cumulative = 0.0;
    let mut keep = ranked.len();
    for (i, &(_, p)) in ranked.iter().enumerate() {
        cumulative += p;
        if cumulative >= top_p {
            keep = i + 1;
            break;
        }
    }
    if top_k > 0 {
        keep = keep.min(top_k);
    }
    ranked.truncate(keep);

    let total: f64 = ranked.iter().map(|c| c.1).sum();
    if total <= 0.0 {
        return Err(Error::InvalidArgument("distribution has no probability mass".into()));
    }
    for c in &mut ranked {
        c.1 /= total;
    }
    Ok(ranked)
}

/// Draws one token from the filtered next-token distribution.
pub fn sample_from<M, R>(model: &M, context: &[u32], top_p: f64, top_k: usize, rng: &mut R) -> Result<u32>
where
    M: ScoringModel + ?Sized,
    R: Rng + ?Sized,
{
    let candidates = nucleus_candidates(&model.distribution(context)?, top_p, top_k)?;
    let u: f64 = rng.gen();
    let mut cumulative = 0.0;
    for &(id, p) in &candidates {
        cumulative += p;
        if u < cumulative {
            return Ok(id);
        }
    }
    // Rounding left `u` past the final boundary.
    let last = candidates.iter().rev().find(|c| c.1 > 0.0).unwrap_or(&candidates[0]);
    Ok(last.0)
}

/// [`sample_from`] with a fresh generator seeded from `seed`.
pub fn sample_next<M>(model: &M, context: &[u32], top_p: f64, top_k: usize, seed: u64) -> Result<u32>
where
    M: ScoringModel + ?Sized,
{
    sample_from(model, context, top_p, top_k, &mut crate::rng::seeded(seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Fixed(Vec<f64>);

    impl ScoringModel for Fixed {
        fn vocab_size(&self) -> usize {
            self.0.len()
        }
        fn max_context(&self) -> Option<usize> {
            Some(0)
        }
        fn distribution(&self, _: &[u32]) -> Result<Vec<f64>> {
            Ok(self.0.clone())
        }
    }

    #[test]
    fn top_k_one_is_greedy() {
        let m = Fixed(vec![0.2, 0.5, 0.3]);
        for seed in 0..50 {
            assert_eq!(sample_next(&m, &[], 1.0, 1, seed).unwrap(), 1);
        }
    }

    #[test]
    fn peaked_nucleus_has_one_member() {
        let m = Fixed(vec![0.05, 0.9, 0.05]);
        assert_eq!(nucleus_candidates(&m.0, 0.85, 0).unwrap(), vec![(1, 1.0)]);
        for seed in 0..200 {
            assert_eq!(sample_next(&m, &[], 0.85, 0, seed).unwrap(), 1);
        }
    }

    #[test]
    fn nucleus_ties_rank_by_id() {
        let c = nucleus_candidates(&[0.25, 0.25, 0.25, 0.25], 0.5, 0).unwrap();
        assert_eq!(c, vec![(0, 0.5), (1, 0.5)]);
    }

    #[test]
    fn full_sampling_matches_distribution() {
        let dist = vec![0.1, 0.4, 0.05, 0.25, 0.2];
        let m = Fixed(dist.clone());
        let mut rng = crate::rng::seeded(99);
        let n = 100_000;
        let mut freq = [0usize; 5];
        for _ in 0..n {
            freq[sample_from(&m, &[], 1.0, 0, &mut rng).unwrap() as usize] += 1;
        }
        for (f, p) in freq.iter().zip(&dist) {
            assert!((*f as f64 / n as f64 - p).abs() < 0.01);
        }
    }

    #[test]
    fn same_seed_same_token() {
        let m = Fixed(vec![0.3, 0.3, 0.4]);
        assert_eq!(sample_next(&m, &[], 0.9, 0, 5).unwrap(), sample_next(&m, &[], 0.9, 0, 5).unwrap());
    }

    #[test]
    fn rejects_bad_top_p() {
        assert!(nucleus_candidates(&[1.0], 0.0, 0).is_err());
        assert!(nucleus_candidates(&[1.0], 1.5, 0).is_err());
    }
}
