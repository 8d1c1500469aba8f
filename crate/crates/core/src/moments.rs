//! Pair partitions, crossing numbers and the moment family `m_k^a`.
//!
//! `m_k^a = Σ_π e^{-2aκ(π)}` over pair partitions `π` of `{1..k}`; it runs from
//! the Gaussian moments `(k-1)!!` at `a = 0` to the Catalan numbers at `a = ∞`.
//! The production route sums the crossing-number distribution, which is built by
//! a dynamic program over open arcs. Explicit enumeration stays available as an
//! oracle.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectrum::Polynomial;

/// Largest order accepted by the visitor and the crossing distribution.
pub const MAX_PARTITION_ORDER: usize = 20;

/// Largest order for which [`pair_partitions`] materializes the whole list
/// (`15!! = 2 027 025` partitions at `k = 16`).
pub const MAX_MATERIALIZED_ORDER: usize = 16;

/// A perfect matching of `{1..k}`, blocks sorted by their smaller element.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct PairPartition {
    // 0-based, each block stored as (smaller, larger)
    blocks: Vec<(u8, u8)>,
}

impl PairPartition {
    /// Builds a partition from 1-based blocks in any order.
    pub fn from_blocks(k: usize, blocks: &[(usize, usize)]) -> Result<Self> {
        if k % 2 == 1 || blocks.len() * 2 != k {
            return Err(Error::Argument(format!(
                "{} blocks cannot pair up {{1..{k}}}",
                blocks.len()
            )));
        }
        if k > u8::MAX as usize {
            return Err(Error::Argument(format!("order {k} too large")));
        }
        let mut seen = vec![false; k];
        let mut out = Vec::with_capacity(blocks.len());
        for &(a, b) in blocks {
            for p in [a, b] {
                if p == 0 || p > k {
                    return Err(Error::Argument(format!("position {p} outside 1..={k}")));
                }
                if std::mem::replace(&mut seen[p - 1], true) {
                    return Err(Error::Argument(format!("position {p} used twice")));
                }
            }
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            out.push(((lo - 1) as u8, (hi - 1) as u8));
        }
        out.sort_unstable();
        Ok(Self { blocks: out })
    }

    fn from_partner(partner: &[u8]) -> Self {
        let blocks = partner
            .iter()
            .enumerate()
            .filter(|&(i, &p)| (i as u8) < p)
            .map(|(i, &p)| (i as u8, p))
            .collect();
        Self { blocks }
    }

    pub fn k(&self) -> usize {
        2 * self.blocks.len()
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// Blocks as 1-based `(smaller, larger)` pairs.
    pub fn blocks(&self) -> Vec<(usize, usize)> {
        self.blocks
            .iter()
            .map(|&(a, b)| (a as usize + 1, b as usize + 1))
            .collect()
    }

    /// For every position `1..=k` (stored 0-based) the index of its block.
    pub fn block_labels(&self) -> Vec<usize> {
        let mut labels = vec![0; self.k()];
        for (r, &(a, b)) in self.blocks.iter().enumerate() {
            labels[a as usize] = r;
            labels[b as usize] = r;
        }
        labels
    }

    /// All block pairs `(r, s)`, `r < s`, whose endpoints interleave.
    pub fn crossings(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (r, &(_, b)) in self.blocks.iter().enumerate() {
            for (s, &(c, d)) in self.blocks.iter().enumerate().skip(r + 1) {
                // blocks are sorted by opener, so the first opens before c
                if c < b && b < d {
                    out.push((r, s));
                }
            }
        }
        out
    }
}

impl fmt::Debug for PairPartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (a, b) in self.blocks() {
            write!(f, "{{{a},{b}}}")?;
        }
        Ok(())
    }
}

/// Number of interleaving block pairs `a < b < c < d`, `{a,c}` and `{b,d}` blocks.
pub fn crossing_number(p: &PairPartition) -> usize {
    p.crossings().len()
}

fn check_order(k: usize, cap: usize) -> Result<()> {
    if k > cap {
        return Err(Error::Resource(format!(
            "pair partitions of order {k} exceed the cap {cap}"
        )));
    }
    Ok(())
}

/// Calls `visit` once for every pair partition of `{1..k}` (none for odd `k`).
pub fn for_each_pair_partition<F: FnMut(&PairPartition)>(k: usize, mut visit: F) -> Result<()> {
    check_order(k, MAX_PARTITION_ORDER)?;
    if k % 2 == 1 {
        return Ok(());
    }
    const FREE: u8 = u8::MAX;
    let mut partner = vec![FREE; k];

    fn recurse<F: FnMut(&PairPartition)>(partner: &mut [u8], visit: &mut F) {
        let Some(first) = partner.iter().position(|&p| p == FREE) else {
            visit(&PairPartition::from_partner(partner));
            return;
        };
        for second in first + 1..partner.len() {
            if partner[second] != FREE {
                continue;
            }
            partner[first] = second as u8;
            partner[second] = first as u8;
            recurse(partner, visit);
            partner[first] = FREE;
            partner[second] = FREE;
        }
    }

    recurse(&mut partner, &mut visit);
    Ok(())
}

/// Every pair partition of `{1..k}`; empty for odd `k`.
pub fn pair_partitions(k: usize) -> Result<Vec<PairPartition>> {
    check_order(k, MAX_MATERIALIZED_ORDER)?;
    let mut out = Vec::with_capacity(if k % 2 == 0 { double_factorial(k.saturating_sub(1)) as usize } else { 0 });
    for_each_pair_partition(k, |p| out.push(p.clone()))?;
    Ok(out)
}

/// `counts[c]` = number of pair partitions of `{1..k}` with exactly `c` crossings.
///
/// Scans positions left to right keeping `j` open arcs. Closing the arc that is
/// `r`-th most recently opened crosses the `r - 1` arcs opened after it, which
/// are still open and will close later.
pub fn crossing_distribution(k: usize) -> Result<Vec<u64>> {
    check_order(k, MAX_PARTITION_ORDER)?;
    if k % 2 == 1 {
        return Ok(Vec::new());
    }
    let half = k / 2;
    let max_cross = half * half.saturating_sub(1) / 2;
    // state[j][c]: ways to reach j open arcs with c crossings so far
    let mut state = vec![vec![0u64; max_cross + 1]; half + 1];
    state[0][0] = 1;
    for pos in 0..k {
        let mut next = vec![vec![0u64; max_cross + 1]; half + 1];
        for j in 0..=half {
            for c in 0..=max_cross {
                let w = state[j][c];
                if w == 0 {
                    continue;
                }
                // only open while enough positions remain to close everything
                if j < half && j < k - pos - 1 {
                    next[j + 1][c] += w;
                }
                for extra in 0..j {
                    next[j - 1][c + extra] += w;
                }
            }
        }
        state = next;
    }
    Ok(state.swap_remove(0))
}

/// `(m)!! = m (m-2) ⋯`, with `(-1)!! = 0!! = 1`.
pub fn double_factorial(m: usize) -> u64 {
    (1..=m).rev().step_by(2).map(|x| x as u64).product()
}

/// `C_m = (2m)! / (m! (m+1)!)`.
pub fn catalan(m: usize) -> u64 {
    // C_{i+1} = C_i · 2(2i+1)/(i+2)
    let mut c = 1u64;
    for i in 0..m as u64 {
        c = c * 2 * (2 * i + 1) / (i + 2);
    }
    c
}

/// The parameter `a ∈ [0, ∞]` of the moment family.
#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DecayRate {
    Finite(f64),
    #[serde(with = "infinite_literal")]
    Infinite,
}

mod infinite_literal {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str("inf")
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<(), D::Error> {
        let s = String::deserialize(d)?;
        if s == "inf" {
            Ok(())
        } else {
            Err(serde::de::Error::custom(format!("expected \"inf\", got {s:?}")))
        }
    }
}

impl DecayRate {
    /// Validates a finite rate; `+∞` maps to [`DecayRate::Infinite`].
    pub fn new(a: f64) -> Result<Self> {
        if a.is_nan() || a < 0.0 {
            return Err(Error::Argument(format!("decay rate must be in [0, ∞], got {a}")));
        }
        Ok(if a.is_infinite() {
            DecayRate::Infinite
        } else {
            DecayRate::Finite(a)
        })
    }

    /// The finite-size proxy `a = q²/n`.
    pub fn from_sizes(n: usize, q: usize) -> Result<Self> {
        Self::new((q * q) as f64 / n as f64)
    }

    fn validate(self) -> Result<Self> {
        match self {
            DecayRate::Finite(a) => Self::new(a),
            DecayRate::Infinite => Ok(self),
        }
    }

    /// `e^{-2a}`, equal to 0 at `a = ∞`.
    pub fn crossing_weight(self) -> f64 {
        match self {
            DecayRate::Finite(a) => (-2.0 * a).exp(),
            DecayRate::Infinite => 0.0,
        }
    }
}

impl fmt::Display for DecayRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DecayRate::Finite(a) => write!(f, "{a}"),
            DecayRate::Infinite => write!(f, "inf"),
        }
    }
}

impl FromStr for DecayRate {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if matches!(t, "inf" | "infinity" | "∞") {
            return Ok(DecayRate::Infinite);
        }
        let a: f64 = t
            .parse()
            .map_err(|_| Error::Argument(format!("cannot parse decay rate {s:?}")))?;
        Self::new(a)
    }
}

/// `m_k^a`: zero for odd `k`, otherwise the crossing-weighted pair-partition count.
pub fn m_k_a(k: usize, a: DecayRate) -> Result<f64> {
    let a = a.validate()?;
    if k % 2 == 1 {
        return Ok(0.0);
    }
    match a {
        DecayRate::Finite(0.0) => {
            check_order(k, MAX_PARTITION_ORDER)?;
            Ok(double_factorial(k.saturating_sub(1)) as f64)
        }
        DecayRate::Infinite => {
            check_order(k, MAX_PARTITION_ORDER)?;
            Ok(catalan(k / 2) as f64)
        }
        DecayRate::Finite(_) => {
            let w = a.crossing_weight();
            let dist = crossing_distribution(k)?;
            // Horner in the crossing weight
            Ok(dist.iter().rev().fold(0.0, |acc, &c| acc * w + c as f64))
        }
    }
}

/// `m_k^a` by explicit enumeration with per-partition crossing counts.
pub fn m_k_a_enumerated(k: usize, a: DecayRate) -> Result<f64> {
    let a = a.validate()?;
    let mut total = 0.0;
    for_each_pair_partition(k, |p| {
        let kappa = crossing_number(p);
        total += match a {
            DecayRate::Infinite => {
                if kappa == 0 {
                    1.0
                } else {
                    0.0
                }
            }
            DecayRate::Finite(x) => (-2.0 * x * kappa as f64).exp(),
        };
    })?;
    Ok(total)
}

/// One row of a moment table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentValue {
    pub k: usize,
    pub a: DecayRate,
    pub value: f64,
}

/// `m_k^a` for `k = 0..=k_max` and every listed rate, `k` varying fastest.
pub fn moment_table(k_max: usize, rates: &[DecayRate]) -> Result<Vec<MomentValue>> {
    let mut rows = Vec::with_capacity((k_max + 1) * rates.len());
    for &a in rates {
        for k in 0..=k_max {
            rows.push(MomentValue {
                k,
                a,
                value: m_k_a(k, a)?,
            });
        }
    }
    Ok(rows)
}

/// `⟨x f'/2, ρ∞⟩ = Σ_k a_k (k/2) m_k^a`.
pub fn limit_mean_functional(f: &Polynomial, a: DecayRate) -> Result<f64> {
    let mut s = 0.0;
    for (k, &c) in f.coefficients().iter().enumerate() {
        if c != 0.0 && k % 2 == 0 && k > 0 {
            s += c * (k as f64 / 2.0) * m_k_a(k, a)?;
        }
    }
    Ok(s)
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma >= 1.0) || !gamma.is_finite() {
        return Err(Error::Argument(format!(
            "fourth moment must be finite and at least 1, got {gamma}"
        )));
    }
    Ok(())
}

/// Limiting variance `⟨x f'/2, ρ∞⟩² (γ - 1)` of the scaled fluctuation.
pub fn limit_variance(f: &Polynomial, a: DecayRate, gamma: f64) -> Result<f64> {
    check_gamma(gamma)?;
    let mean = limit_mean_functional(f, a)?;
    Ok(mean * mean * (gamma - 1.0))
}

/// Limiting scaled covariance of `L⁻¹Tr H^k` and `L⁻¹Tr H^{k'}`.
pub fn covariance_limit(k: usize, k_prime: usize, a: DecayRate, gamma: f64) -> Result<f64> {
    if k == 0 || k_prime == 0 {
        return Err(Error::Argument(format!(
            "moment orders must be positive, got ({k}, {k_prime})"
        )));
    }
    check_gamma(gamma)?;
    if (k + k_prime) % 2 == 1 {
        return Ok(0.0);
    }
    let left = m_k_a(k, a)? * k as f64 / 2.0;
    let right = m_k_a(k_prime, a)? * k_prime as f64 / 2.0;
    Ok(left * right * (gamma - 1.0))
}
