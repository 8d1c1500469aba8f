//! Counting and sampling of index-set configurations.
//!
//! `B_m` is the set of `m`-tuples of distinct index sets whose word product is
//! `±I`, i.e. whose supports XOR to zero. `B_m*` drops the distinctness
//! requirement. Closed forms exist for `m = 3` and for `B_4*`; everything else
//! goes through exhaustive enumeration.

use rand::Rng;

use crate::clifford::IndexSet;
use crate::error::{Error, Result};
use crate::hamiltonian::enumerate_index_set;
use crate::parallel::{map_indexed, AUTO_WIDTH};

/// Guard on `|I|^m` for exhaustive tuple enumeration.
pub const BRUTE_FORCE_CAP: u128 = 10_000_000;

/// `C(n, k)` exactly, `None` on overflow. `C(n, k) = 0` for `k > n`.
pub fn binomial(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k as u128 {
        // c·(n-i) is divisible by i+1 because c·(n-i)/(i+1) = C(n, i+1)
        c = c.checked_mul(n as u128 - i)? / (i + 1);
    }
    Some(c)
}

fn binom(n: usize, k: usize) -> Result<u128> {
    binomial(n as u64, k as u64)
        .ok_or_else(|| Error::Resource(format!("C({n}, {k}) overflows 128 bits")))
}

/// `|B_3| = C(n,q) C(q,q/2) C(n-q,q/2)` for even `q` and `n ≥ 3q/2`, else 0.
pub fn count_b3_exact(n: usize, q: usize) -> Result<u128> {
    if q % 2 == 1 || 2 * n < 3 * q {
        return Ok(0);
    }
    let a = binom(n, q)?;
    let b = binom(q, q / 2)?;
    let c = binom(n - q, q / 2)?;
    a.checked_mul(b)
        .and_then(|x| x.checked_mul(c))
        .ok_or_else(|| Error::Resource(format!("|B_3| overflows at n = {n}, q = {q}")))
}

/// `|B_4*| = Σ_{k=0}^{min(q, n-q)} C(n,2k) C(2k,k)² C(n-2k,q-k)²`.
pub fn count_b4_exact(n: usize, q: usize) -> Result<u128> {
    if q > n {
        return Ok(0);
    }
    let overflow = || Error::Resource(format!("|B_4*| overflows at n = {n}, q = {q}"));
    let mut total: u128 = 0;
    for k in 0..=q.min(n - q) {
        let outer = binom(n, 2 * k)?;
        let mid = binom(2 * k, k)?;
        let inner = binom(n - 2 * k, q - k)?;
        let term = outer
            .checked_mul(mid.checked_mul(mid).ok_or_else(overflow)?)
            .and_then(|x| x.checked_mul(inner.checked_mul(inner)?))
            .ok_or_else(overflow)?;
        total = total.checked_add(term).ok_or_else(overflow)?;
    }
    Ok(total)
}

fn brute_force_guard(len: usize, m: usize) -> Result<()> {
    let work = (len as u128).checked_pow(m as u32);
    match work {
        Some(w) if w <= BRUTE_FORCE_CAP => Ok(()),
        _ => Err(Error::Resource(format!(
            "|I|^m = {len}^{m} exceeds the enumeration cap {BRUTE_FORCE_CAP}"
        ))),
    }
}

/// Exhaustive count of `m`-tuples in `I^m` whose word product is `±I`.
pub fn count_bm_bruteforce(n: usize, q: usize, m: usize, distinct: bool) -> Result<u128> {
    count_bm_bruteforce_with_width(n, q, m, distinct, AUTO_WIDTH)
}

pub fn count_bm_bruteforce_with_width(
    n: usize,
    q: usize,
    m: usize,
    distinct: bool,
    width: usize,
) -> Result<u128> {
    let sets = enumerate_index_set(n, q)?;
    brute_force_guard(sets.len(), m)?;
    if m == 0 {
        return Ok(1);
    }
    let masks: Vec<u64> = sets.iter().map(IndexSet::bits).collect();
    let per_first = map_indexed(masks.len(), width, |first| {
        let mut chosen = vec![0usize; m];
        chosen[0] = first;
        count_tail(&masks, &mut chosen, 1, masks[first], distinct)
    });
    Ok(per_first.into_iter().sum())
}

fn count_tail(masks: &[u64], chosen: &mut [usize], depth: usize, acc: u64, distinct: bool) -> u128 {
    if depth == chosen.len() {
        return u128::from(acc == 0);
    }
    let mut total = 0;
    for (i, &mask) in masks.iter().enumerate() {
        if distinct && chosen[..depth].contains(&i) {
            continue;
        }
        chosen[depth] = i;
        total += count_tail(masks, chosen, depth + 1, acc ^ mask, distinct);
    }
    total
}

/// `|B_m| · √n / |I|^{m-1}`, with `|B_m|` counted exhaustively.
pub fn bm_bound_ratio(n: usize, q: usize, m: usize) -> Result<f64> {
    if m == 0 {
        return Err(Error::Argument("m must be positive".into()));
    }
    let count = count_bm_bruteforce(n, q, m, true)?;
    let len = binom(n, q)? as f64;
    Ok(count as f64 * (n as f64).sqrt() / len.powi(m as i32 - 1))
}

/// Exact pmf of `|R ∩ R'|` for independent uniform `q`-subsets of `{1..n}`:
/// `P(k) = C(q,k) C(n-q,q-k) / C(n,q)`, indexed `k = 0..=q`.
pub fn hypergeometric_pmf(n: usize, q: usize) -> Result<Vec<f64>> {
    if q > n {
        return Err(Error::Argument(format!("q = {q} exceeds n = {n}")));
    }
    let exact = (|| {
        let total = binomial(n as u64, q as u64)?;
        (0..=q)
            .map(|k| {
                let ways = binomial(q as u64, k as u64)?
                    .checked_mul(binomial((n - q) as u64, (q - k) as u64)?)?;
                Some(ways as f64 / total as f64)
            })
            .collect::<Option<Vec<f64>>>()
    })();
    if let Some(p) = exact {
        return Ok(p);
    }
    // Otherwise normalize the term ratios
    // P(k+1)/P(k) = (q-k)² / ((k+1)(n-2q+k+1)), accumulated in log space.
    let lo = (2 * q).saturating_sub(n);
    let mut logs = vec![f64::NEG_INFINITY; q + 1];
    logs[lo] = 0.0;
    for k in lo..q {
        let num = ((q - k) as f64).powi(2);
        let den = (k + 1) as f64 * (n + k + 1 - 2 * q) as f64;
        logs[k + 1] = logs[k] + (num / den).ln();
    }
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|w| w / total).collect())
}

/// `e^{-a} a^k / k!` for `k = 0..len`.
pub fn poisson_pmf(a: f64, len: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(len);
    let mut p = (-a).exp();
    for k in 0..len {
        out.push(p);
        p *= a / (k + 1) as f64;
    }
    out
}

/// Total-variation distance `½ Σ |p_k - r_k|`, padding the shorter pmf with zeros.
pub fn total_variation(p: &[f64], r: &[f64]) -> f64 {
    let len = p.len().max(r.len());
    let at = |v: &[f64], i: usize| v.get(i).copied().unwrap_or(0.0);
    0.5 * (0..len).map(|i| (at(p, i) - at(r, i)).abs()).sum::<f64>()
}

/// Total-variation distance from a pmf on `0..p.len()` to Poisson(`a`),
/// counting the Poisson mass beyond the support of `p`.
pub fn total_variation_to_poisson(p: &[f64], a: f64) -> f64 {
    let pois = poisson_pmf(a, p.len());
    let tail = (1.0 - pois.iter().sum::<f64>()).max(0.0);
    total_variation(p, &pois) + 0.5 * tail
}

/// A uniform `q`-subset of `{1..n}` (ascending) by sequential selection:
/// element `x` is kept with probability `needed / remaining`. Needs no big
/// integers, so any `n` is fine.
pub fn random_subset<R: Rng + ?Sized>(n: usize, q: usize, rng: &mut R) -> Result<Vec<usize>> {
    if q > n {
        return Err(Error::Argument(format!("q = {q} exceeds n = {n}")));
    }
    let mut out = Vec::with_capacity(q);
    for x in 0..n {
        let needed = q - out.len();
        if needed == 0 {
            break;
        }
        if rng.random_range(0..n - x) < needed {
            out.push(x + 1);
        }
    }
    Ok(out)
}

/// The `rank`-th `q`-subset of `{1..n}` in lexicographic order.
pub fn unrank_subset(n: usize, q: usize, mut rank: u128) -> Result<Vec<usize>> {
    let overflow = || Error::Resource(format!("unranking C({n}, {q}) overflows"));
    if rank >= binom(n, q)? {
        return Err(Error::Argument(format!("rank {rank} out of range")));
    }
    let mut out = Vec::with_capacity(q);
    if q == 0 {
        return Ok(out);
    }
    let mut left = q;
    // c = C(n - x - 1, left - 1): subsets that take x next
    let mut c = binom(n - 1, q - 1)?;
    for x in 0..n {
        let m = (n - x - 1) as u128;
        if rank < c {
            out.push(x + 1);
            left -= 1;
            if left == 0 || m == 0 {
                break;
            }
            // C(m-1, left-1) = C(m, left) · left / m with the new `left`
            c = c.checked_mul(left as u128).ok_or_else(overflow)? / m;
        } else {
            rank -= c;
            if m == 0 {
                break;
            }
            // C(m-1, left-1) = C(m, left-1) · (m - left + 1) / m
            c = c.checked_mul(m + 1 - left as u128).ok_or_else(overflow)? / m;
        }
    }
    Ok(out)
}

fn sorted_overlap(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut hits) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                hits += 1;
                i += 1;
                j += 1;
            }
        }
    }
    hits
}

/// Empirical pmf of `|R ∩ R'|` over `trials` independent uniform pairs,
/// indexed `0..=q`.
pub fn intersection_histogram<R: Rng + ?Sized>(
    n: usize,
    q: usize,
    trials: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if 2 * q > n {
        return Err(Error::Argument(format!("need q ≤ n/2, got n = {n}, q = {q}")));
    }
    if trials == 0 {
        return Err(Error::Argument("need at least one trial".into()));
    }
    let mut counts = vec![0usize; q + 1];
    for _ in 0..trials {
        let r = random_subset(n, q, rng)?;
        let s = random_subset(n, q, rng)?;
        counts[sorted_overlap(&r, &s)] += 1;
    }
    Ok(counts.into_iter().map(|c| c as f64 / trials as f64).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::coupling_stream;
    use proptest::prelude::*;
    use statrs::distribution::{Discrete, Hypergeometric, Poisson};

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(4, 2), Some(6));
        assert_eq!(binomial(20, 4), Some(4845));
        assert_eq!(binomial(3, 5), Some(0));
        assert_eq!(binomial(64, 32), Some(1_832_624_140_942_590_534));
        assert_eq!(binomial(400, 20), Some(2_788_360_983_670_896_737_872_851_072_994_080));
        assert!(binomial(1000, 500).is_none());
    }

    #[test]
    fn b3_examples() {
        assert_eq!(count_b3_exact(4, 2).unwrap(), 24);
        assert_eq!(count_b3_exact(5, 3).unwrap(), 0);
        assert_eq!(count_b3_exact(5, 4).unwrap(), 0);
        assert_eq!(count_bm_bruteforce(4, 2, 3, true).unwrap(), 24);
    }

    #[test]
    fn b4_examples() {
        assert_eq!(count_b4_exact(4, 2).unwrap(), 168);
        assert_eq!(count_bm_bruteforce(4, 2, 4, false).unwrap(), 168);
        for n in (2..=12).step_by(2) {
            assert_eq!(count_b4_exact(n, n).unwrap(), 1);
        }
    }

    #[test]
    fn b2_is_empty() {
        for n in 2..=10 {
            for q in 1..=n {
                assert_eq!(count_bm_bruteforce(n, q, 2, true).unwrap(), 0);
                assert_eq!(count_bm_bruteforce(n, q, 1, true).unwrap(), 0);
                assert_eq!(bm_bound_ratio(n, q, 2).unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn guard_and_odd_q() {
        assert!(matches!(
            count_bm_bruteforce(20, 4, 3, true),
            Err(Error::Resource(_))
        ));
        assert_eq!(bm_bound_ratio(9, 3, 3).unwrap(), 0.0);
    }

    #[test]
    fn brute_force_is_width_independent() {
        let a = count_bm_bruteforce_with_width(8, 2, 4, true, 1).unwrap();
        let b = count_bm_bruteforce_with_width(8, 2, 4, true, 4).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn b4_symmetry_under_complement() {
        for n in 2..=30 {
            for q in 0..=n {
                assert_eq!(count_b4_exact(n, q).unwrap(), count_b4_exact(n, n - q).unwrap());
            }
        }
    }

    #[test]
    fn hypergeometric_against_statrs() {
        for (n, q) in [(10, 3), (40, 7), (400, 20), (3000, 40)] {
            let ours = hypergeometric_pmf(n, q).unwrap();
            let law = Hypergeometric::new(n as u64, q as u64, q as u64).unwrap();
            for (k, p) in ours.iter().enumerate() {
                let r = law.pmf(k as u64);
                assert!((p - r).abs() <= 1e-10 * r.max(1e-300) + 1e-15, "({n},{q},{k}) {p} vs {r}");
            }
            assert!((ours.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let p = hypergeometric_pmf(12, 3).unwrap();
        let zero = binomial(9, 3).unwrap() as f64 / binomial(12, 3).unwrap() as f64;
        assert!((p[0] - zero).abs() < 1e-15);
    }

    #[test]
    fn poisson_against_statrs() {
        let ours = poisson_pmf(1.7, 15);
        let law = Poisson::new(1.7).unwrap();
        for (k, p) in ours.iter().enumerate() {
            assert!((p - law.pmf(k as u64)).abs() < 1e-15);
        }
    }

    #[test]
    fn poisson_limit_at_unit_rate() {
        let h = hypergeometric_pmf(400, 20).unwrap();
        let tv = total_variation_to_poisson(&h, 1.0);
        assert!(tv < 0.05, "tv = {tv}");
    }

    #[test]
    fn unranking_enumerates_lexicographically() {
        let sets = enumerate_index_set(9, 4).unwrap();
        for (rank, s) in sets.iter().enumerate() {
            let u = unrank_subset(9, 4, rank as u128).unwrap();
            assert_eq!(u, s.iter().collect::<Vec<_>>());
        }
        assert!(unrank_subset(9, 4, 126).is_err());
        assert_eq!(unrank_subset(5, 0, 0).unwrap(), Vec::<usize>::new());
    }

    #[test]
    fn small_histogram_support() {
        let h = intersection_histogram(4, 2, 2000, &mut coupling_stream(0, 0)).unwrap();
        assert_eq!(h.len(), 3);
        assert!((h.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(intersection_histogram(4, 3, 10, &mut coupling_stream(0, 0)).is_err());
    }

    #[test]
    fn random_subsets_are_uniform() {
        // all C(5, 2) = 10 subsets, 100 000 draws: each count is about 10 000 ± 95
        let mut counts = std::collections::BTreeMap::new();
        let mut rng = coupling_stream(12, 0);
        for _ in 0..100_000 {
            *counts.entry(random_subset(5, 2, &mut rng).unwrap()).or_insert(0) += 1;
        }
        assert_eq!(counts.len(), 10);
        assert!(counts.values().all(|&c: &i32| (c - 10_000).abs() < 500), "{counts:?}");
    }

    #[test]
    fn histogram_converges_to_hypergeometric() {
        let (n, q, trials) = (30, 6, 20_000);
        let h = intersection_histogram(n, q, trials, &mut coupling_stream(4, 2)).unwrap();
        let exact = hypergeometric_pmf(n, q).unwrap();
        let tv = total_variation(&h, &exact);
        assert!(tv < 3.0 * ((q + 1) as f64 / trials as f64).sqrt(), "tv = {tv}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn exact_counts_match_brute_force(n in 2usize..=9, q in 1usize..=9) {
            prop_assume!(q <= n);
            let len = binomial(n as u64, q as u64).unwrap();
            if len.pow(3) <= BRUTE_FORCE_CAP {
                prop_assert_eq!(count_b3_exact(n, q).unwrap(), count_bm_bruteforce(n, q, 3, true).unwrap());
            }
            if len.pow(4) <= BRUTE_FORCE_CAP {
                prop_assert_eq!(count_b4_exact(n, q).unwrap(), count_bm_bruteforce(n, q, 4, false).unwrap());
            }
        }

        #[test]
        fn random_subsets_are_valid(n in 1usize..300, frac in 0.0f64..1.0, seed in any::<u64>()) {
            let q = ((n as f64) * frac) as usize;
            let s = random_subset(n, q, &mut coupling_stream(seed, 0)).unwrap();
            prop_assert_eq!(s.len(), q);
            prop_assert!(s.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(s.iter().all(|&p| (1..=n).contains(&p)));
        }
    }
}
