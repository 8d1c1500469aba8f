//! Coupling ensembles and dense SYK Hamiltonians.
//!
//! `H = i^{⌊q/2⌋} |I|^{-1/2} Σ_R J_R Ψ_R` where `R` runs over the `q`-subsets of
//! `{1..n}` in lexicographic order and the `J_R` are i.i.d. with mean 0 and
//! variance 1.

use std::io::{self, Read, Write};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::clifford::{
    dense_word, merge_sign_is_negative, DenseOperator, IndexSet, MajoranaWord, PauliString, Phase,
    MAX_SYMBOLIC_N,
};
use crate::error::{Error, Result};
use crate::setcomb::binomial;

/// Largest `n` accepted by [`assemble_dense`] (`L = 2048`).
pub const ASSEMBLY_CAP: usize = 22;

/// Largest `|I|` that [`enumerate_index_set`] will materialize.
pub const MAX_INDEX_SET_LEN: u128 = 50_000_000;

/// Guard on the enumeration work of the exact moment oracles.
pub const ORACLE_WORK_CAP: f64 = 1e7;

const MOMENT_TOL: f64 = 1e-12;

/// Law of a single coupling `J_R`. Every variant has mean 0 and variance 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CouplingDistribution {
    Gaussian,
    Rademacher,
    /// Uniform on `[-√3, √3]`.
    UniformScaled,
    /// Finitely many atoms `(value, probability)`.
    Custom { atoms: Vec<(f64, f64)> },
}

impl CouplingDistribution {
    pub fn validate(&self) -> Result<()> {
        let CouplingDistribution::Custom { atoms } = self else {
            return Ok(());
        };
        if atoms.is_empty() {
            return Err(Error::Argument("custom law needs at least one atom".into()));
        }
        if atoms
            .iter()
            .any(|&(v, p)| !v.is_finite() || !p.is_finite() || p < 0.0)
        {
            return Err(Error::Argument("custom atoms must be finite with p ≥ 0".into()));
        }
        let mass: f64 = atoms.iter().map(|a| a.1).sum();
        let mean: f64 = atoms.iter().map(|&(v, p)| v * p).sum();
        let var: f64 = atoms.iter().map(|&(v, p)| v * v * p).sum();
        if (mass - 1.0).abs() > MOMENT_TOL
            || mean.abs() > MOMENT_TOL
            || (var - 1.0).abs() > MOMENT_TOL
        {
            return Err(Error::Argument(format!(
                "custom law must have mass 1, mean 0, variance 1; got {mass}, {mean}, {var}"
            )));
        }
        Ok(())
    }

    /// `E J^j`.
    pub fn moment(&self, j: u32) -> f64 {
        match self {
            CouplingDistribution::Custom { atoms } => {
                atoms.iter().map(|&(v, p)| p * v.powi(j as i32)).sum()
            }
            _ if j % 2 == 1 => 0.0,
            CouplingDistribution::Gaussian => {
                crate::moments::double_factorial(j.saturating_sub(1) as usize) as f64
            }
            CouplingDistribution::Rademacher => 1.0,
            CouplingDistribution::UniformScaled => 3f64.powi(j as i32 / 2) / (j + 1) as f64,
        }
    }

    /// The fourth moment `γ = E J⁴`.
    pub fn gamma(&self) -> f64 {
        match self {
            CouplingDistribution::Gaussian => 3.0,
            CouplingDistribution::Rademacher => 1.0,
            CouplingDistribution::UniformScaled => 9.0 / 5.0,
            CouplingDistribution::Custom { .. } => self.moment(4),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            CouplingDistribution::Gaussian => "gaussian",
            CouplingDistribution::Rademacher => "rademacher",
            CouplingDistribution::UniformScaled => "uniform_scaled",
            CouplingDistribution::Custom { .. } => "custom",
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            CouplingDistribution::Gaussian => StandardNormal.sample(rng),
            CouplingDistribution::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            CouplingDistribution::UniformScaled => {
                let h = 3f64.sqrt();
                Uniform::new_inclusive(-h, h)
                    .expect("finite bounds")
                    .sample(rng)
            }
            CouplingDistribution::Custom { atoms } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for &(v, p) in atoms {
                    acc += p;
                    if u < acc {
                        return v;
                    }
                }
                // roundoff in the cumulative mass
                atoms.iter().rev().find(|a| a.1 > 0.0).map_or(0.0, |a| a.0)
            }
        }
    }
}

/// Independent random stream for sample `sample_id` under a master seed.
pub fn coupling_stream(seed: u64, sample_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(sample_id);
    rng
}

fn check_sizes(n: usize, q: usize) -> Result<()> {
    if n == 0 || n > MAX_SYMBOLIC_N {
        return Err(Error::Argument(format!(
            "n must lie in 1..={MAX_SYMBOLIC_N}, got {n}"
        )));
    }
    if q == 0 || q > n {
        return Err(Error::Argument(format!("q must lie in 1..={n}, got {q}")));
    }
    Ok(())
}

/// `|I| = C(n, q)` as an exact integer.
pub fn index_set_len(n: usize, q: usize) -> Result<u128> {
    check_sizes(n, q)?;
    binomial(n as u64, q as u64)
        .ok_or_else(|| Error::Resource(format!("C({n}, {q}) overflows")))
}

/// All `q`-subsets of `{1..n}` in lexicographic order of their sorted tuples.
pub fn enumerate_index_set(n: usize, q: usize) -> Result<Vec<IndexSet>> {
    let len = index_set_len(n, q)?;
    if len > MAX_INDEX_SET_LEN {
        return Err(Error::Resource(format!(
            "|I| = {len} exceeds the enumeration cap {MAX_INDEX_SET_LEN}"
        )));
    }
    let mut out = Vec::with_capacity(len as usize);
    // 0-based tuple, advanced like an odometer from the right
    let mut tuple: Vec<usize> = (0..q).collect();
    loop {
        let bits = tuple.iter().fold(0u64, |b, &p| b | (1u64 << p));
        out.push(IndexSet::from_bits_unchecked(n, bits));
        let Some(i) = (0..q).rev().find(|&i| tuple[i] < n - q + i) else {
            break;
        };
        tuple[i] += 1;
        for j in i + 1..q {
            tuple[j] = tuple[j - 1] + 1;
        }
    }
    Ok(out)
}

/// Couplings `J_R` for every `R ∈ I`, in the order of [`enumerate_index_set`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingSample {
    pub n: usize,
    pub q: usize,
    pub values: Vec<f64>,
    pub dist: CouplingDistribution,
}

const DUMP_MAGIC: &[u8; 4] = b"SYKJ";
const DUMP_VERSION: u32 = 1;

impl CouplingSample {
    pub fn new(n: usize, q: usize, values: Vec<f64>, dist: CouplingDistribution) -> Result<Self> {
        let len = index_set_len(n, q)?;
        if values.len() as u128 != len {
            return Err(Error::Dimension(format!(
                "{} couplings supplied for |I| = {len}",
                values.len()
            )));
        }
        Ok(Self { n, q, values, dist })
    }

    pub fn index_sets(&self) -> Result<Vec<IndexSet>> {
        enumerate_index_set(self.n, self.q)
    }

    /// `|I|⁻¹ Σ J_R²`, which equals `L⁻¹ Tr H²`.
    pub fn mean_square(&self) -> f64 {
        self.values.iter().map(|j| j * j).sum::<f64>() / self.values.len() as f64
    }

    /// CSV rows `index,set,coupling`, the set written as space-separated positions.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "index,set,coupling")?;
        for (i, (r, j)) in self.index_sets()?.iter().zip(&self.values).enumerate() {
            let set: Vec<String> = r.iter().map(|p| p.to_string()).collect();
            writeln!(w, "{i},{},{j:.16e}", set.join(" "))?;
        }
        Ok(())
    }

    /// Little-endian dump: magic, version, `n`, `q`, count, then the values.
    /// The law itself is not recorded.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(DUMP_MAGIC)?;
        w.write_all(&DUMP_VERSION.to_le_bytes())?;
        w.write_all(&(self.n as u32).to_le_bytes())?;
        w.write_all(&(self.q as u32).to_le_bytes())?;
        w.write_all(&(self.values.len() as u64).to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R, dist: CouplingDistribution) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != DUMP_MAGIC {
            return Err(Error::Validation("not a coupling dump".into()));
        }
        let mut b4 = [0u8; 4];
        let mut read_u32 = |r: &mut R| -> io::Result<u32> {
            r.read_exact(&mut b4)?;
            Ok(u32::from_le_bytes(b4))
        };
        let version = read_u32(&mut r)?;
        if version != DUMP_VERSION {
            return Err(Error::Validation(format!("unsupported dump version {version}")));
        }
        let n = read_u32(&mut r)? as usize;
        let q = read_u32(&mut r)? as usize;
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8)?;
        let count = u64::from_le_bytes(b8);
        if count as u128 != index_set_len(n, q)? {
            return Err(Error::Validation(format!(
                "dump holds {count} values for n = {n}, q = {q}"
            )));
        }
        let mut values = Vec::with_capacity(count as usize);
        for _ in 0..count {
            r.read_exact(&mut b8)?;
            values.push(f64::from_le_bytes(b8));
        }
        Self::new(n, q, values, dist)
    }
}

/// Draws one coupling per index set, in enumeration order.
pub fn sample_couplings<R: Rng + ?Sized>(
    dist: &CouplingDistribution,
    n: usize,
    q: usize,
    rng: &mut R,
) -> Result<CouplingSample> {
    dist.validate()?;
    let len = index_set_len(n, q)?;
    if len > MAX_INDEX_SET_LEN {
        return Err(Error::Resource(format!(
            "|I| = {len} exceeds the enumeration cap {MAX_INDEX_SET_LEN}"
        )));
    }
    let values = (0..len).map(|_| dist.draw(rng)).collect();
    Ok(CouplingSample {
        n,
        q,
        values,
        dist: dist.clone(),
    })
}

/// Where a matrix came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: Option<u64>,
    pub sample_id: Option<u64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HamiltonianMatrix {
    pub entries: DMatrix<Complex64>,
    pub n: usize,
    pub q: usize,
    pub dist: CouplingDistribution,
    pub provenance: Provenance,
}

impl HamiltonianMatrix {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn hermitian_defect(&self) -> f64 {
        DenseOperator {
            entries: self.entries.clone(),
        }
        .hermitian_defect()
    }

    /// Checks Hermiticity (relative 1e-12) and tracelessness (1e-10·L).
    pub fn validate(&self) -> Result<()> {
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        let defect = self.hermitian_defect();
        if defect > 1e-12 * scale {
            return Err(Error::Validation(format!(
                "assembled matrix is not Hermitian: defect {defect:e} at scale {scale:e}"
            )));
        }
        let tr = self.entries.trace().norm();
        if tr > 1e-10 * self.dim() as f64 {
            return Err(Error::Validation(format!("assembled matrix has trace {tr:e}")));
        }
        Ok(())
    }
}

/// `i^{⌊q/2⌋}`, the prefactor that makes `H` Hermitian.
pub fn hermitian_prefactor(q: usize) -> Phase {
    Phase::I.pow((q / 2) as u32)
}

fn check_assembly(n: usize, cap: usize) -> Result<()> {
    if n > cap {
        return Err(Error::Resource(format!(
            "dense assembly at n = {n} exceeds the cap {cap}"
        )));
    }
    if n % 2 == 1 {
        return Err(Error::Argument(format!(
            "the matrix realization needs even n, got {n}"
        )));
    }
    Ok(())
}

/// Dense `H` assembled from Pauli-string images of the words, `O(|I|·L)`.
pub fn assemble_dense(sample: &CouplingSample) -> Result<HamiltonianMatrix> {
    check_assembly(sample.n, ASSEMBLY_CAP)?;
    let (n, q) = (sample.n, sample.q);
    let sets = sample.index_sets()?;
    let dim = 1usize << (n / 2);
    let prefactor = hermitian_prefactor(q);
    let scale = 1.0 / (sets.len() as f64).sqrt();
    let mut entries = DMatrix::<Complex64>::zeros(dim, dim);
    for (r, &j) in sets.iter().zip(&sample.values) {
        if j == 0.0 {
            continue;
        }
        let word = MajoranaWord::new(*r, prefactor);
        let p = PauliString::from_word(&word)?;
        let amp = j * scale;
        for col in 0..dim {
            let (row, phase) = p.column_entry(col);
            entries[(row, col)] += phase.to_complex() * amp;
        }
    }
    let h = HamiltonianMatrix {
        entries,
        n,
        q,
        dist: sample.dist.clone(),
        provenance: Provenance::default(),
    };
    h.validate()?;
    Ok(h)
}

/// Dense `H` built as a sum of explicit Kronecker-product words. Oracle for
/// [`assemble_dense`]; limited to the dense oracle cap.
pub fn assemble_by_kronecker(sample: &CouplingSample) -> Result<DMatrix<Complex64>> {
    let sets = sample.index_sets()?;
    let dim = 1usize << (sample.n / 2);
    let c = hermitian_prefactor(sample.q).to_complex() / (sets.len() as f64).sqrt();
    let mut acc = DMatrix::<Complex64>::zeros(dim, dim);
    for (r, &j) in sets.iter().zip(&sample.values) {
        let w = dense_word(&MajoranaWord::from(*r))?;
        acc += w.entries * (c * j);
    }
    Ok(acc)
}

/// Sum over all `K`-tuples of index sets, grouped by their equality pattern.
///
/// A tuple whose positions coincide according to a set partition `P` of
/// `{1..K}` has coupling expectation `Π_{blocks} E J^{|b|}`, which vanishes when
/// any block is a singleton. For each surviving pattern the distinct sets are
/// assigned injectively and `eval` is called with the per-position masks.
/// `eval` returns an exact phase or `None` for a zero contribution. The result is
/// `Σ_P weight(P) · Σ_{assignments} eval`.
pub(crate) fn coupling_pattern_sum<F>(
    sets: &[IndexSet],
    dist: &CouplingDistribution,
    positions: usize,
    eval: F,
) -> Result<Complex64>
where
    F: Fn(&[u64]) -> Option<Phase>,
{
    let n_sets = sets.len() as f64;
    let work = n_sets.powi((positions / 2) as i32);
    if work > ORACLE_WORK_CAP {
        return Err(Error::Resource(format!(
            "exact enumeration needs about {work:.3e} assignments, cap is {ORACLE_WORK_CAP:e}"
        )));
    }
    let masks: Vec<u64> = sets.iter().map(|s| s.bits()).collect();
    let mut total = Complex64::new(0.0, 0.0);
    let mut labels = vec![0usize; positions];
    for_each_pattern(&mut labels, 0, 0, &mut |labels, blocks| {
        let mut sizes = vec![0u32; blocks];
        for &b in labels.iter() {
            sizes[b] += 1;
        }
        let weight: f64 = sizes.iter().map(|&s| dist.moment(s)).product();
        if weight == 0.0 {
            return;
        }
        // exact phase tallies: counts of 1, i, -1, -i
        let mut tally = [0i64; 4];
        let mut chosen = vec![usize::MAX; blocks];
        let mut word = vec![0u64; labels.len()];
        assign(&masks, labels, &mut chosen, 0, &mut word, &eval, &mut tally);
        let re = (tally[0] - tally[2]) as f64;
        let im = (tally[1] - tally[3]) as f64;
        total += Complex64::new(re, im) * weight;
    });
    Ok(total)
}

// restricted growth strings with every block of size ≥ 2
fn for_each_pattern<G: FnMut(&[usize], usize)>(
    labels: &mut [usize],
    pos: usize,
    blocks: usize,
    visit: &mut G,
) {
    let k = labels.len();
    if pos == k {
        let mut sizes = vec![0usize; blocks];
        for &b in labels.iter() {
            sizes[b] += 1;
        }
        if sizes.iter().all(|&s| s >= 2) {
            visit(labels, blocks);
        }
        return;
    }
    // singleton blocks so far must still be fillable by the remaining positions
    let mut sizes = vec![0usize; blocks];
    for &b in &labels[..pos] {
        sizes[b] += 1;
    }
    let singles = sizes.iter().filter(|&&s| s == 1).count();
    if singles > k - pos {
        return;
    }
    for b in 0..=blocks {
        labels[pos] = b;
        let next_blocks = if b == blocks { blocks + 1 } else { blocks };
        for_each_pattern(labels, pos + 1, next_blocks, visit);
    }
}

fn assign<F: Fn(&[u64]) -> Option<Phase>>(
    masks: &[u64],
    labels: &[usize],
    chosen: &mut [usize],
    block: usize,
    word: &mut [u64],
    eval: &F,
    tally: &mut [i64; 4],
) {
    if block == chosen.len() {
        for (w, &b) in word.iter_mut().zip(labels) {
            *w = masks[chosen[b]];
        }
        if let Some(p) = eval(word) {
            tally[p.exponent() as usize] += 1;
        }
        return;
    }
    for idx in 0..masks.len() {
        if chosen[..block].contains(&idx) {
            continue;
        }
        chosen[block] = idx;
        assign(masks, labels, chosen, block + 1, word, eval, tally);
    }
    chosen[block] = usize::MAX;
}

/// Exact normalized trace phase of a product of masks, `None` if it vanishes.
#[inline]
pub(crate) fn mask_product_trace(words: &[u64]) -> Option<Phase> {
    let mut acc = 0u64;
    let mut negative = false;
    for &w in words {
        negative ^= merge_sign_is_negative(acc, w);
        acc ^= w;
    }
    (acc == 0).then_some(Phase::sign(negative))
}

/// `E[L⁻¹ Tr H^k]` at finite `(n, q)` with no sampling error.
pub fn exact_moment_expectation(
    n: usize,
    q: usize,
    k: usize,
    dist: &CouplingDistribution,
) -> Result<f64> {
    dist.validate()?;
    let sets = enumerate_index_set(n, q)?;
    if k == 0 {
        return Ok(1.0);
    }
    let c = hermitian_prefactor(q).pow(k as u32);
    let sum = coupling_pattern_sum(&sets, dist, k, |w| mask_product_trace(w).map(|p| p * c))?;
    let value = sum / (sets.len() as f64).powf(k as f64 / 2.0);
    real_part(value)
}

pub(crate) fn real_part(z: Complex64) -> Result<f64> {
    if z.im.abs() > 1e-9 * z.re.abs().max(1.0) {
        return Err(Error::Validation(format!(
            "expected a real expectation, got {z}"
        )));
    }
    Ok(z.re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::eigenvalues;
    use proptest::prelude::*;

    fn set(n: usize, p: &[usize]) -> IndexSet {
        IndexSet::new(n, p.iter().copied()).unwrap()
    }

    #[test]
    fn enumeration_examples() {
        let e = enumerate_index_set(4, 2).unwrap();
        assert_eq!(e.len(), 6);
        assert_eq!(e[0], set(4, &[1, 2]));
        assert_eq!(e[5], set(4, &[3, 4]));
        assert_eq!(
            e,
            [[1, 2], [1, 3], [1, 4], [2, 3], [2, 4], [3, 4]]
                .iter()
                .map(|p| set(4, p))
                .collect::<Vec<_>>()
        );
        assert_eq!(enumerate_index_set(4, 4).unwrap(), vec![set(4, &[1, 2, 3, 4])]);
        assert_eq!(enumerate_index_set(20, 4).unwrap().len(), 4845);
        assert!(matches!(enumerate_index_set(4, 5), Err(Error::Argument(_))));
        assert!(matches!(enumerate_index_set(64, 32), Err(Error::Resource(_))));
    }

    #[test]
    fn enumeration_is_sorted_and_distinct() {
        let e = enumerate_index_set(12, 5).unwrap();
        let tuples: Vec<Vec<usize>> = e.iter().map(|s| s.iter().collect()).collect();
        assert!(tuples.windows(2).all(|w| w[0] < w[1]));
        assert!(e.iter().all(|s| s.len() == 5));
        assert_eq!(tuples.len(), 792);
    }

    #[test]
    fn law_moments() {
        let g = CouplingDistribution::Gaussian;
        assert_eq!(
            (0..9).map(|j| g.moment(j)).collect::<Vec<_>>(),
            vec![1.0, 0.0, 1.0, 0.0, 3.0, 0.0, 15.0, 0.0, 105.0]
        );
        let u = CouplingDistribution::UniformScaled;
        assert!((u.moment(2) - 1.0).abs() < 1e-15);
        assert!((u.moment(4) - 1.8).abs() < 1e-15);
        assert_eq!(CouplingDistribution::Rademacher.moment(6), 1.0);
        for d in [g, u, CouplingDistribution::Rademacher] {
            assert!((d.gamma() - d.moment(4)).abs() < 1e-15);
        }
        let c = CouplingDistribution::Custom {
            atoms: vec![(-2.0, 0.125), (0.0, 0.75), (2.0, 0.125)],
        };
        c.validate().unwrap();
        assert_eq!(c.gamma(), 4.0);
        let bad = CouplingDistribution::Custom {
            atoms: vec![(1.0, 1.0)],
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn rademacher_values_are_signs() {
        let mut rng = coupling_stream(1, 0);
        let s = sample_couplings(&CouplingDistribution::Rademacher, 10, 3, &mut rng).unwrap();
        assert!(s.values.iter().all(|&v| v == 1.0 || v == -1.0));
        assert_eq!(s.mean_square(), 1.0);
    }

    #[test]
    fn gaussian_law_of_large_numbers() {
        let mut rng = coupling_stream(2024, 3);
        let g = CouplingDistribution::Gaussian;
        let m = 100_000;
        let draws: Vec<f64> = (0..m).map(|_| g.draw(&mut rng)).collect();
        let mean = draws.iter().sum::<f64>() / m as f64;
        let var = draws.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (m - 1) as f64;
        assert!(mean.abs() <= 4.0 / (m as f64).sqrt());
        assert!((var - 1.0).abs() <= 0.05);
    }

    #[test]
    fn uniform_and_custom_draws_stay_in_support() {
        let mut rng = coupling_stream(5, 5);
        let u = CouplingDistribution::UniformScaled;
        assert!((0..10_000).all(|_| u.draw(&mut rng).abs() <= 3f64.sqrt()));
        let c = CouplingDistribution::Custom {
            atoms: vec![(-2.0, 0.125), (0.0, 0.75), (2.0, 0.125)],
        };
        assert!((0..10_000).all(|_| [-2.0, 0.0, 2.0].contains(&c.draw(&mut rng))));
    }

    #[test]
    fn streams_replay_bitwise() {
        let g = CouplingDistribution::Gaussian;
        let a = sample_couplings(&g, 12, 4, &mut coupling_stream(9, 17)).unwrap();
        let b = sample_couplings(&g, 12, 4, &mut coupling_stream(9, 17)).unwrap();
        let c = sample_couplings(&g, 12, 4, &mut coupling_stream(9, 18)).unwrap();
        assert_eq!(
            a.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn zero_couplings_give_zero_matrix() {
        let s = CouplingSample::new(6, 2, vec![0.0; 15], CouplingDistribution::Gaussian).unwrap();
        let h = assemble_dense(&s).unwrap();
        assert!(h.entries.iter().all(|z| *z == Complex64::new(0.0, 0.0)));
    }

    #[test]
    fn single_coupling_spectrum() {
        let mut values = vec![0.0; 6];
        values[0] = 1.0;
        let s = CouplingSample::new(4, 2, values, CouplingDistribution::Gaussian).unwrap();
        let h = assemble_dense(&s).unwrap();
        let ev = eigenvalues(&h).unwrap().eigenvalues;
        let x = 1.0 / 6f64.sqrt();
        let expect = [-x, -x, x, x];
        for (a, b) in ev.iter().zip(expect) {
            assert!((a - b).abs() < 1e-14, "{ev:?}");
        }
    }

    #[test]
    fn assembly_caps_and_parity() {
        let s = CouplingSample::new(24, 1, vec![0.0; 24], CouplingDistribution::Gaussian).unwrap();
        assert!(matches!(assemble_dense(&s), Err(Error::Resource(_))));
        let s = CouplingSample::new(5, 2, vec![0.0; 10], CouplingDistribution::Gaussian).unwrap();
        assert!(matches!(assemble_dense(&s), Err(Error::Argument(_))));
        assert!(CouplingSample::new(5, 2, vec![0.0; 9], CouplingDistribution::Gaussian).is_err());
    }

    #[test]
    fn second_moment_identity_per_sample() {
        let g = CouplingDistribution::Gaussian;
        for id in 0..5 {
            let s = sample_couplings(&g, 8, 2, &mut coupling_stream(77, id)).unwrap();
            let h = assemble_dense(&s).unwrap();
            let tr2 = (&h.entries * &h.entries).trace() / h.dim() as f64;
            assert!((tr2.re - s.mean_square()).abs() < 1e-12);
            assert!(tr2.im.abs() < 1e-12);
        }
    }

    #[test]
    fn odd_q_is_hermitian() {
        for q in [1, 3, 5] {
            let s = sample_couplings(&CouplingDistribution::Gaussian, 10, q, &mut coupling_stream(3, q as u64)).unwrap();
            let h = assemble_dense(&s).unwrap();
            assert!(h.hermitian_defect() <= 1e-14);
        }
    }

    #[test]
    fn dump_round_trip() {
        let g = CouplingDistribution::Gaussian;
        let s = sample_couplings(&g, 8, 3, &mut coupling_stream(1, 1)).unwrap();
        let mut buf = Vec::new();
        s.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), 4 + 4 + 4 + 4 + 8 + 8 * 56);
        let back = CouplingSample::read_binary(&buf[..], g).unwrap();
        assert_eq!(back, s);
        let mut csv = Vec::new();
        s.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert_eq!(text.lines().count(), 57);
        assert!(text.lines().nth(1).unwrap().starts_with("0,1 2 3,"));
        assert!(CouplingSample::read_binary(&b"XXXX"[..], CouplingDistribution::Gaussian).is_err());
    }

    #[test]
    fn exact_moments_small_cases() {
        for (n, q) in [(4, 2), (6, 3), (8, 2), (8, 4), (10, 5)] {
            for d in [
                CouplingDistribution::Gaussian,
                CouplingDistribution::Rademacher,
                CouplingDistribution::UniformScaled,
            ] {
                assert_eq!(exact_moment_expectation(n, q, 2, &d).unwrap(), 1.0);
                assert_eq!(exact_moment_expectation(n, q, 3, &d).unwrap(), 0.0);
                assert_eq!(exact_moment_expectation(n, q, 0, &d).unwrap(), 1.0);
            }
        }
        assert!(matches!(
            exact_moment_expectation(20, 4, 6, &CouplingDistribution::Gaussian),
            Err(Error::Resource(_))
        ));
    }

    // Independent route for E[L⁻¹Tr H⁴]: the naive sum over all ordered
    // 4-tuples with Gaussian Wick weights, evaluated with dense matrices.
    #[test]
    fn fourth_moment_matches_naive_tuple_sum() {
        let (n, q) = (6, 2);
        let sets = enumerate_index_set(n, q).unwrap();
        let words: Vec<DMatrix<Complex64>> = sets
            .iter()
            .map(|r| dense_word(&MajoranaWord::from(*r)).unwrap().entries)
            .collect();
        let g = CouplingDistribution::Gaussian;
        let m = sets.len();
        let mut total = Complex64::new(0.0, 0.0);
        for a in 0..m {
            for b in 0..m {
                for c in 0..m {
                    for d in 0..m {
                        let mut counts = std::collections::HashMap::new();
                        for i in [a, b, c, d] {
                            *counts.entry(i).or_insert(0u32) += 1;
                        }
                        let w: f64 = counts.values().map(|&e| g.moment(e)).product();
                        if w == 0.0 {
                            continue;
                        }
                        let prod = &words[a] * &words[b] * &words[c] * &words[d];
                        total += prod.trace() / 8.0 * w;
                    }
                }
            }
        }
        let c4 = hermitian_prefactor(q).pow(4).to_complex();
        let naive = (total * c4 / (m * m) as f64).re;
        let exact = exact_moment_expectation(n, q, 4, &g).unwrap();
        assert!((naive - exact).abs() < 1e-12, "{naive} vs {exact}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn fast_assembly_matches_kronecker_sum(seed in any::<u64>(), nh in 1usize..=4, qs in 0usize..8) {
            let n = 2 * nh;
            let q = 1 + qs % n;
            let s = sample_couplings(&CouplingDistribution::Gaussian, n, q, &mut coupling_stream(seed, 0)).unwrap();
            let fast = assemble_dense(&s).unwrap().entries;
            let slow = assemble_by_kronecker(&s).unwrap();
            let err = (&fast - &slow).iter().map(|z| z.norm()).fold(0.0, f64::max);
            prop_assert!(err <= 1e-13);
        }

        #[test]
        fn assembly_is_linear(seed in any::<u64>(), alpha in -3.0f64..3.0) {
            let g = CouplingDistribution::Gaussian;
            let a = sample_couplings(&g, 8, 3, &mut coupling_stream(seed, 0)).unwrap();
            let b = sample_couplings(&g, 8, 3, &mut coupling_stream(seed, 1)).unwrap();
            let mix: Vec<f64> = a.values.iter().zip(&b.values).map(|(x, y)| x + alpha * y).collect();
            let c = CouplingSample::new(8, 3, mix, g).unwrap();
            let lhs = assemble_dense(&c).unwrap().entries;
            let rhs = assemble_dense(&a).unwrap().entries + assemble_dense(&b).unwrap().entries * Complex64::new(alpha, 0.0);
            let err = (&lhs - &rhs).iter().map(|z| z.norm()).fold(0.0, f64::max);
            prop_assert!(err <= 1e-12);
        }
    }
}
