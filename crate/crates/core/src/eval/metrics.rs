use crate::{Error, Result};

/// Upper cap of [`si_sdr`], reached by exact reconstructions.
pub const SI_SDR_CAP_DB: f64 = 100.0;
/// Lower clamp of [`si_sdr`], reached by estimates orthogonal to the reference.
pub const SI_SDR_FLOOR_DB: f64 = -100.0;
/// Residual energy floor relative to the target energy.
const REL_EPS: f64 = 1e-14;

/// Scale-invariant signal-to-distortion ratio in dB.
///
/// `α = ⟨est, ref⟩ / ‖ref‖²`, value `10 log10(‖α ref‖² / ‖α ref − est‖²)`,
/// clamped to `[-100, 100]`. The residual is floored at `1e-14 ‖α ref‖²`,
/// which keeps the value exactly invariant to scaling `est`.
pub fn si_sdr(est: &[f64], reference: &[f64]) -> Result<f64> {
    if est.len() != reference.len() {
        return Err(Error::Length {
            expected: reference.len(),
            actual: est.len(),
        });
    }
    let rr: f64 = reference.iter().map(|r| r * r).sum();
    if rr == 0.0 {
        return Err(Error::UndefinedReference("reference is all zero".into()));
    }
    let er: f64 = est.iter().zip(reference).map(|(e, r)| e * r).sum();
    let alpha = er / rr;
    let target = alpha * alpha * rr;
    let noise: f64 = est
        .iter()
        .zip(reference)
        .map(|(e, r)| {
            let d = alpha * r - e;
            d * d
        })
        .sum();
    if !(target.is_finite() && noise.is_finite()) {
        return Err(Error::invalid("non-finite signal energy"));
    }
    if target == 0.0 {
        return Ok(SI_SDR_FLOOR_DB);
    }
    let db = 10.0 * (target / (noise + REL_EPS * target)).log10();
    Ok(db.clamp(SI_SDR_FLOOR_DB, SI_SDR_CAP_DB))
}

/// All permutations of `0..n` in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                rec(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::with_capacity(n), &mut vec![false; n], &mut out);
    out
}

/// Median of a non-empty slice (mean of the middle pair for even lengths).
pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Quantile with linear interpolation between order statistics (the
/// "type 7" rule): position `q (n − 1)` in the sorted sample.
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let h = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(v.len() - 1);
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

/// An estimate-to-reference assignment with its scores.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// `perm[i]` is the reference matched to estimate `i`.
    pub perm: Vec<usize>,
    /// SI-SDR per reference, in reference order.
    pub scores: Vec<f64>,
}

impl Assignment {
    /// `"2-0-1"` style rendering of the permutation.
    pub fn perm_string(&self) -> String {
        self.perm.iter().map(|p| p.to_string()).collect::<Vec<_>>().join("-")
    }
}

/// Pick the assignment from a square score matrix `scores[est][ref]`:
/// highest median, then highest mean, then the lexicographically first
/// permutation.
pub fn best_permutation_scores(scores: &[Vec<f64>]) -> Result<Assignment> {
    let n = scores.len();
    if n == 0 || scores.iter().any(|r| r.len() != n) {
        return Err(Error::shape(format!("score matrix must be square and non-empty, got {n} rows")));
    }
    let mut best: Option<(f64, f64, Assignment)> = None;
    for perm in permutations(n) {
        let mut by_ref = vec![0.0; n];
        for (i, &j) in perm.iter().enumerate() {
            by_ref[j] = scores[i][j];
        }
        let (md, mn) = (median(&by_ref), mean(&by_ref));
        let better = match &best {
            None => true,
            Some((bm, bn, _)) => md > *bm || (md == *bm && mn > *bn),
        };
        if better {
            best = Some((md, mn, Assignment { perm, scores: by_ref }));
        }
    }
    Ok(best.expect("at least one permutation").2)
}

/// Match estimated mono tracks to reference tracks by exhaustive search.
pub fn best_permutation(est: &[&[f64]], refs: &[&[f64]]) -> Result<Assignment> {
    if est.len() != refs.len() {
        return Err(Error::shape(format!(
            "{} estimates for {} references",
            est.len(),
            refs.len()
        )));
    }
    if est.is_empty() {
        return Err(Error::shape("no objects to match"));
    }
    let scores = est
        .iter()
        .map(|e| refs.iter().map(|r| si_sdr(e, r)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    best_permutation_scores(&scores)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn signal(seed: u64, n: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn exact_and_scaled_copies_hit_the_cap() {
        let r = signal(1, 1000);
        assert_eq!(si_sdr(&r, &r).unwrap(), SI_SDR_CAP_DB);
        let s: Vec<f64> = r.iter().map(|x| 3.7 * x).collect();
        assert_eq!(si_sdr(&s, &r).unwrap(), SI_SDR_CAP_DB);
    }

    #[test]
    fn orthogonal_noise_at_one_tenth_is_twenty_db() {
        let r = signal(2, 4096);
        let mut n = signal(3, 4096);
        let k = n.iter().zip(&r).map(|(a, b)| a * b).sum::<f64>() / r.iter().map(|x| x * x).sum::<f64>();
        n.iter_mut().zip(&r).for_each(|(a, b)| *a -= k * b);
        let scale = (r.iter().map(|x| x * x).sum::<f64>() / n.iter().map(|x| x * x).sum::<f64>()).sqrt() / 10.0;
        let est: Vec<f64> = r.iter().zip(&n).map(|(a, b)| a + scale * b).collect();
        assert!((si_sdr(&est, &r).unwrap() - 20.0).abs() < 1e-6);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(si_sdr(&[1.0, 2.0], &[0.0, 0.0]), Err(Error::UndefinedReference(_))));
        assert!(matches!(si_sdr(&[1.0], &[1.0, 2.0]), Err(Error::Length { .. })));
        assert_eq!(si_sdr(&[0.0, 0.0], &[1.0, 2.0]).unwrap(), SI_SDR_FLOOR_DB);
        assert_eq!(si_sdr(&[2.0, -1.0], &[1.0, 2.0]).unwrap(), SI_SDR_FLOOR_DB);
    }

    #[test]
    fn permutations_are_lexicographic() {
        assert_eq!(permutations(1), vec![vec![0]]);
        assert_eq!(
            permutations(3),
            vec![vec![0, 1, 2], vec![0, 2, 1], vec![1, 0, 2], vec![1, 2, 0], vec![2, 0, 1], vec![2, 1, 0]]
        );
    }

    #[test]
    fn quantiles_follow_linear_interpolation() {
        let xs = [7.0, 1.0, 3.0, 5.0];
        assert_eq!(quantile(&xs, 0.0), 1.0);
        assert_eq!(quantile(&xs, 1.0), 7.0);
        assert_eq!(quantile(&xs, 0.5), 4.0);
        assert!((quantile(&xs, 0.25) - 2.5).abs() < 1e-12);
        assert_eq!(median(&xs), 4.0);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
    }

    #[test]
    fn single_object_is_identity() {
        let a = best_permutation_scores(&[vec![-3.0]]).unwrap();
        assert_eq!(a.perm, vec![0]);
        assert_eq!(a.scores, vec![-3.0]);
    }

    #[test]
    fn shuffled_copies_recover_the_shuffle() {
        let refs: Vec<Vec<f64>> = (0..3).map(|s| signal(10 + s, 2000)).collect();
        for pi in permutations(3) {
            let est: Vec<&[f64]> = pi.iter().map(|&j| refs[j].as_slice()).collect();
            let r: Vec<&[f64]> = refs.iter().map(Vec::as_slice).collect();
            let a = best_permutation(&est, &r).unwrap();
            assert_eq!(a.perm, pi);
            assert!(a.scores.iter().all(|s| *s == SI_SDR_CAP_DB));
        }
    }

    #[test]
    fn ties_prefer_mean_then_lexicographic_order() {
        // Identity and (1,0,2) share the median 5; (1,0,2) has the larger mean.
        let s = vec![vec![5.0, 8.0, 0.0], vec![5.0, 5.0, 0.0], vec![0.0, 0.0, 0.0]];
        assert_eq!(best_permutation_scores(&s).unwrap().perm, vec![1, 0, 2]);
        let flat = vec![vec![1.0; 3]; 3];
        assert_eq!(best_permutation_scores(&flat).unwrap().perm, vec![0, 1, 2]);
    }

    #[test]
    fn count_mismatch_is_an_error() {
        let a = [0.0, 1.0];
        assert!(best_permutation(&[&a, &a], &[&a]).is_err());
        assert!(best_permutation_scores(&[vec![1.0, 2.0]]).is_err());
    }

    proptest! {
        #[test]
        fn scale_invariance(seed in 0u64..1000, a in 1e-3f64..1e3) {
            let r = signal(seed, 512);
            let e: Vec<f64> = r.iter().zip(signal(seed + 7, 512)).map(|(x, n)| x + 0.3 * n).collect();
            let scaled: Vec<f64> = e.iter().map(|x| a * x).collect();
            prop_assert!((si_sdr(&e, &r).unwrap() - si_sdr(&scaled, &r).unwrap()).abs() < 1e-9);
        }

        #[test]
        fn chosen_permutation_has_the_best_median(m in proptest::collection::vec(-30.0f64..60.0, 9)) {
            let s: Vec<Vec<f64>> = m.chunks(3).map(<[f64]>::to_vec).collect();
            let best = best_permutation_scores(&s).unwrap();
            for p in permutations(3) {
                let v: Vec<f64> = (0..3).map(|i| s[i][p[i]]).collect();
                prop_assert!(median(&best.scores) >= median(&v));
            }
            let mut seen = best.perm.clone();
            seen.sort();
            prop_assert_eq!(seen, vec![0, 1, 2]);
        }
    }
}
