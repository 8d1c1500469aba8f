//! Majorana operator words.
//!
//! A word `Ψ_A = ψ_{i_1} ψ_{i_2} ⋯ ψ_{i_m}` (with `i_1 < ⋯ < i_m`) is stored as a
//! 64-bit support mask together with a phase from the fourth roots of unity.
//! Products reduce to the symmetric difference of the supports; the sign is the
//! parity of the transpositions needed to merge the two sorted index lists.
//!
//! Two matrix realizations back the symbolic algebra:
//!
//! * [`PauliString`] is the Jordan-Wigner image of a word as `i^e X^x Z^z`
//!   over `n/2` qubits. It gives matrix elements in O(1) and is what the
//!   Hamiltonian assembler uses.
//! * [`DenseOperator`] is the explicit `L × L` matrix built from Kronecker
//!   products. It is only used as an independent oracle for small `n`.

use std::fmt;
use std::ops::Mul;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::moments::PairPartition;

/// Largest ambient Majorana count supported by the bitmask representation.
pub const MAX_SYMBOLIC_N: usize = 64;

/// Default cap on `n` for the Kronecker-product oracle (`L = 256`).
pub const DENSE_ORACLE_CAP: usize = 16;

/// A subset of `{1, …, n}` stored as a bitmask; position `i` lives in bit `i - 1`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IndexSet {
    bits: u64,
    n: u8,
}

fn check_ambient(n: usize) -> Result<()> {
    if n == 0 || n > MAX_SYMBOLIC_N {
        return Err(Error::Argument(format!(
            "ambient Majorana count must lie in 1..={MAX_SYMBOLIC_N}, got {n}"
        )));
    }
    Ok(())
}

fn ambient_mask(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

impl IndexSet {
    pub fn empty(n: usize) -> Result<Self> {
        check_ambient(n)?;
        Ok(Self { bits: 0, n: n as u8 })
    }

    /// Builds a set from 1-based positions. Repeated positions are rejected.
    pub fn new<I: IntoIterator<Item = usize>>(n: usize, positions: I) -> Result<Self> {
        check_ambient(n)?;
        let mut bits = 0u64;
        for p in positions {
            if p == 0 || p > n {
                return Err(Error::Argument(format!("position {p} outside 1..={n}")));
            }
            let bit = 1u64 << (p - 1);
            if bits & bit != 0 {
                return Err(Error::Argument(format!("position {p} repeated")));
            }
            bits |= bit;
        }
        Ok(Self { bits, n: n as u8 })
    }

    pub fn from_bits(n: usize, bits: u64) -> Result<Self> {
        check_ambient(n)?;
        if bits & !ambient_mask(n) != 0 {
            return Err(Error::Argument(format!(
                "mask {bits:#x} has bits outside 1..={n}"
            )));
        }
        Ok(Self { bits, n: n as u8 })
    }

    /// Crate-internal constructor for masks already known to be in range.
    pub(crate) fn from_bits_unchecked(n: usize, bits: u64) -> Self {
        debug_assert!(bits & !ambient_mask(n) == 0);
        Self { bits, n: n as u8 }
    }

    #[inline]
    pub fn bits(&self) -> u64 {
        self.bits
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n as usize
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.bits.count_ones() as usize
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.bits == 0
    }

    pub fn contains(&self, position: usize) -> bool {
        position >= 1 && position <= self.n() && self.bits & (1u64 << (position - 1)) != 0
    }

    /// Positions in ascending order, 1-based.
    pub fn iter(&self) -> impl Iterator<Item = usize> {
        let mut rest = self.bits;
        std::iter::from_fn(move || {
            if rest == 0 {
                None
            } else {
                let tz = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(tz + 1)
            }
        })
    }

    pub fn symmetric_difference(&self, other: &Self) -> Self {
        Self {
            bits: self.bits ^ other.bits,
            n: self.n,
        }
    }

    pub fn intersection_len(&self, other: &Self) -> usize {
        (self.bits & other.bits).count_ones() as usize
    }
}

impl fmt::Debug for IndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, p) in self.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{p}")?;
        }
        write!(f, "}}/{}", self.n)
    }
}

/// A fourth root of unity `i^k`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum Phase {
    One,
    I,
    MinusOne,
    MinusI,
}

impl Phase {
    pub fn from_exponent(k: u32) -> Self {
        match k % 4 {
            0 => Phase::One,
            1 => Phase::I,
            2 => Phase::MinusOne,
            _ => Phase::MinusI,
        }
    }

    /// The exponent `k ∈ {0,1,2,3}` with `self = i^k`.
    pub fn exponent(self) -> u32 {
        match self {
            Phase::One => 0,
            Phase::I => 1,
            Phase::MinusOne => 2,
            Phase::MinusI => 3,
        }
    }

    pub fn sign(negative: bool) -> Self {
        if negative {
            Phase::MinusOne
        } else {
            Phase::One
        }
    }

    pub fn conj(self) -> Self {
        Phase::from_exponent(4 - self.exponent())
    }

    pub fn pow(self, k: u32) -> Self {
        Phase::from_exponent(self.exponent() * (k % 4))
    }

    pub fn to_complex(self) -> Complex64 {
        match self {
            Phase::One => Complex64::new(1.0, 0.0),
            Phase::I => Complex64::new(0.0, 1.0),
            Phase::MinusOne => Complex64::new(-1.0, 0.0),
            Phase::MinusI => Complex64::new(0.0, -1.0),
        }
    }

    /// `Some(±1)` for real phases.
    pub fn as_real_sign(self) -> Option<i32> {
        match self {
            Phase::One => Some(1),
            Phase::MinusOne => Some(-1),
            _ => None,
        }
    }
}

impl Mul for Phase {
    type Output = Phase;
    // exponents of i add under multiplication
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn mul(self, rhs: Phase) -> Phase {
        Phase::from_exponent(self.exponent() + rhs.exponent())
    }
}

/// A canonical Majorana monomial `phase · Ψ_support`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct MajoranaWord {
    pub support: IndexSet,
    pub phase: Phase,
}

impl MajoranaWord {
    pub fn new(support: IndexSet, phase: Phase) -> Self {
        Self { support, phase }
    }

    pub fn identity(n: usize) -> Result<Self> {
        Ok(Self::new(IndexSet::empty(n)?, Phase::One))
    }

    pub fn n(&self) -> usize {
        self.support.n()
    }
}

impl From<IndexSet> for MajoranaWord {
    fn from(support: IndexSet) -> Self {
        Self::new(support, Phase::One)
    }
}

/// Parity of the number of transpositions needed to sort the concatenation
/// of the ascending lists `lhs` and `rhs`: the count of pairs `(a, b)` with
/// `a ∈ lhs`, `b ∈ rhs`, `a > b`.
#[inline]
pub(crate) fn merge_sign_is_negative(lhs: u64, rhs: u64) -> bool {
    let mut parity = 0u32;
    let mut rest = rhs;
    while rest != 0 {
        let b = rest.trailing_zeros();
        rest &= rest - 1;
        // elements of lhs strictly above b
        let above = if b >= 63 { 0 } else { lhs >> (b + 1) };
        parity ^= above.count_ones() & 1;
    }
    parity == 1
}

/// Product of two words: `Ψ_A Ψ_B = ± Ψ_{A△B}`.
pub fn word_product(lhs: &MajoranaWord, rhs: &MajoranaWord) -> Result<MajoranaWord> {
    if lhs.n() != rhs.n() {
        return Err(Error::Dimension(format!(
            "word over n = {} multiplied with word over n = {}",
            lhs.n(),
            rhs.n()
        )));
    }
    let sign = Phase::sign(merge_sign_is_negative(lhs.support.bits, rhs.support.bits));
    Ok(MajoranaWord {
        support: lhs.support.symmetric_difference(&rhs.support),
        phase: lhs.phase * rhs.phase * sign,
    })
}

/// `L⁻¹ Tr` of a word, exactly: the phase for the identity word, `None` otherwise.
pub fn trace_phase(w: &MajoranaWord) -> Option<Phase> {
    if w.support.is_empty() {
        Some(w.phase)
    } else {
        None
    }
}

/// `L⁻¹ Tr w`.
pub fn normalized_trace(w: &MajoranaWord) -> Complex64 {
    trace_phase(w).map_or(Complex64::new(0.0, 0.0), Phase::to_complex)
}

/// Exact `L⁻¹ Tr Ψ_{A_1} ⋯ Ψ_{A_k}`: `None` when the trace vanishes.
///
/// The empty product is the identity, so `[]` yields `Some(Phase::One)`.
pub fn product_trace_phase(words: &[IndexSet]) -> Result<Option<Phase>> {
    let Some(first) = words.first() else {
        return Ok(Some(Phase::One));
    };
    let n = first.n();
    let mut acc = 0u64;
    let mut negative = false;
    for w in words {
        if w.n() != n {
            return Err(Error::Dimension(format!(
                "index set over n = {} in a product over n = {n}",
                w.n()
            )));
        }
        negative ^= merge_sign_is_negative(acc, w.bits);
        acc ^= w.bits;
    }
    Ok(if acc == 0 {
        Some(Phase::sign(negative))
    } else {
        None
    })
}

/// `L⁻¹ Tr Ψ_{A_1} ⋯ Ψ_{A_k}` as a complex number in `{0, ±1, ±i}`.
pub fn product_trace(words: &[IndexSet]) -> Result<Complex64> {
    Ok(product_trace_phase(words)?.map_or(Complex64::new(0.0, 0.0), Phase::to_complex))
}

/// The word sequence `R_{π(1)}, …, R_{π(k)}` for a pair partition `π` whose
/// blocks are labelled by `assignment`.
pub fn pi_ordered_sequence(pi: &PairPartition, assignment: &[IndexSet]) -> Result<Vec<IndexSet>> {
    if assignment.len() != pi.num_blocks() {
        return Err(Error::Dimension(format!(
            "{} index sets assigned to {} blocks",
            assignment.len(),
            pi.num_blocks()
        )));
    }
    Ok(pi.block_labels().iter().map(|&b| assignment[b]).collect())
}

/// Closed-form trace sign of a paired word sequence:
/// `(-1)^{Σ |R_r ∩ R_s|}` over the crossing block pairs `{r, s}` of `π`.
///
/// For even `q` this equals `i^{qk/2} · L⁻¹ Tr Ψ_{R_{π(1)}} ⋯ Ψ_{R_{π(k)}}`.
pub fn pi_sign_identity(pi: &PairPartition, assignment: &[IndexSet], q: usize) -> Result<i32> {
    if q % 2 == 1 {
        return Err(Error::Unsupported(format!(
            "the crossing sign rule needs even q, got q = {q}"
        )));
    }
    if assignment.len() != pi.num_blocks() {
        return Err(Error::Dimension(format!(
            "{} index sets assigned to {} blocks",
            assignment.len(),
            pi.num_blocks()
        )));
    }
    if let Some(bad) = assignment.iter().find(|r| r.len() != q) {
        return Err(Error::Argument(format!(
            "index set {bad:?} does not have cardinality q = {q}"
        )));
    }
    let exponent: usize = pi
        .crossings()
        .into_iter()
        .map(|(r, s)| assignment[r].intersection_len(&assignment[s]))
        .sum();
    Ok(if exponent % 2 == 0 { 1 } else { -1 })
}

/// A Jordan-Wigner Pauli string `i^e · X^x Z^z` on `n/2` qubits.
///
/// Qubit `k` (0-based, leftmost Kronecker factor first) acts on bit
/// `n/2 - 1 - k` of a computational basis index, so basis indices read as
/// big-endian bit strings, matching [`dense_majorana`].
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct PauliString {
    pub x: u64,
    pub z: u64,
    pub phase: Phase,
    qubits: u8,
}

impl PauliString {
    pub fn identity(qubits: usize) -> Self {
        Self {
            x: 0,
            z: 0,
            phase: Phase::One,
            qubits: qubits as u8,
        }
    }

    pub fn qubits(&self) -> usize {
        self.qubits as usize
    }

    /// Image of `ψ_j` (1-based) for even `n`:
    /// `ψ_{2k-1} = Z^{⊗(k-1)} ⊗ X ⊗ I⋯`, `ψ_{2k} = Z^{⊗(k-1)} ⊗ Y ⊗ I⋯`.
    pub fn majorana(j: usize, n: usize) -> Result<Self> {
        if n % 2 == 1 {
            return Err(Error::Argument(format!("n must be even, got {n}")));
        }
        check_ambient(n)?;
        if j == 0 || j > n {
            return Err(Error::Argument(format!("Majorana index {j} outside 1..={n}")));
        }
        let m = n / 2;
        let k = (j - 1) / 2; // qubit carrying X or Y
        let bit = |qubit: usize| 1u64 << (m - 1 - qubit);
        let z_string: u64 = (0..k).map(bit).fold(0, |a, b| a | b);
        let (x, z, phase) = if j % 2 == 1 {
            (bit(k), z_string, Phase::One)
        } else {
            // Y = i X Z
            (bit(k), z_string | bit(k), Phase::I)
        };
        Ok(Self {
            x,
            z,
            phase,
            qubits: m as u8,
        })
    }

    /// Jordan-Wigner image of a whole word, folded in ascending index order.
    pub fn from_word(w: &MajoranaWord) -> Result<Self> {
        let n = w.n();
        let mut acc = Self::identity(n / 2);
        for j in w.support.iter() {
            acc = acc * Self::majorana(j, n)?;
        }
        acc.phase = acc.phase * w.phase;
        Ok(acc)
    }

    /// The single nonzero entry in column `col`: `(row, value)`.
    #[inline]
    pub fn column_entry(&self, col: usize) -> (usize, Phase) {
        let negative = (self.z & col as u64).count_ones() & 1 == 1;
        (col ^ self.x as usize, self.phase * Phase::sign(negative))
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let dim = 1usize << self.qubits();
        let mut m = DMatrix::zeros(dim, dim);
        for col in 0..dim {
            let (row, v) = self.column_entry(col);
            m[(row, col)] = v.to_complex();
        }
        m
    }
}

impl Mul for PauliString {
    type Output = PauliString;

    // (X^a Z^b)(X^c Z^d) = (-1)^{|b ∧ c|} X^{a⊕c} Z^{b⊕d}
    fn mul(self, rhs: PauliString) -> PauliString {
        let swap = (self.z & rhs.x).count_ones() & 1 == 1;
        PauliString {
            x: self.x ^ rhs.x,
            z: self.z ^ rhs.z,
            phase: self.phase * rhs.phase * Phase::sign(swap),
            qubits: self.qubits,
        }
    }
}

/// An explicit `L × L` complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseOperator {
    pub entries: DMatrix<Complex64>,
}

impl DenseOperator {
    pub fn identity(dim: usize) -> Self {
        Self {
            entries: DMatrix::identity(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn normalized_trace(&self) -> Complex64 {
        self.entries.trace() / self.dim() as f64
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self {
            entries: &self.entries * c,
        }
    }

    /// Largest entrywise deviation from Hermiticity.
    pub fn hermitian_defect(&self) -> f64 {
        let adj = self.entries.adjoint();
        (&self.entries - adj)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }
}

impl Mul for &DenseOperator {
    type Output = DenseOperator;
    fn mul(self, rhs: &DenseOperator) -> DenseOperator {
        DenseOperator {
            entries: &self.entries * &rhs.entries,
        }
    }
}

fn pauli_x() -> DMatrix<Complex64> {
    let o = Complex64::new(0.0, 0.0);
    let l = Complex64::new(1.0, 0.0);
    DMatrix::from_row_slice(2, 2, &[o, l, l, o])
}

fn pauli_y() -> DMatrix<Complex64> {
    let o = Complex64::new(0.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    DMatrix::from_row_slice(2, 2, &[o, -i, i, o])
}

fn pauli_z() -> DMatrix<Complex64> {
    let o = Complex64::new(0.0, 0.0);
    let l = Complex64::new(1.0, 0.0);
    DMatrix::from_row_slice(2, 2, &[l, o, o, -l])
}

/// Explicit Jordan-Wigner matrix of `ψ_j` built from Kronecker products.
pub fn dense_majorana(j: usize, n: usize) -> Result<DenseOperator> {
    dense_majorana_capped(j, n, DENSE_ORACLE_CAP)
}

pub fn dense_majorana_capped(j: usize, n: usize, cap: usize) -> Result<DenseOperator> {
    if n > cap {
        return Err(Error::Resource(format!(
            "dense realization requested at n = {n}, cap is {cap}"
        )));
    }
    if n == 0 || n % 2 == 1 {
        return Err(Error::Argument(format!("n must be even and positive, got {n}")));
    }
    if j == 0 || j > n {
        return Err(Error::Argument(format!("Majorana index {j} outside 1..={n}")));
    }
    let k = (j - 1) / 2;
    let mut m = DMatrix::<Complex64>::identity(1, 1);
    for qubit in 0..n / 2 {
        let factor = if qubit < k {
            pauli_z()
        } else if qubit == k {
            if j % 2 == 1 {
                pauli_x()
            } else {
                pauli_y()
            }
        } else {
            DMatrix::identity(2, 2)
        };
        m = m.kronecker(&factor);
    }
    Ok(DenseOperator { entries: m })
}

/// Dense matrix of a word as an ordered product of [`dense_majorana`] factors.
pub fn dense_word(w: &MajoranaWord) -> Result<DenseOperator> {
    let n = w.n();
    let dim = 1usize << (n / 2);
    let mut acc = DenseOperator::identity(dim);
    for j in w.support.iter() {
        acc = &acc * &dense_majorana(j, n)?;
    }
    Ok(acc.scale(w.phase.to_complex()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set(n: usize, p: &[usize]) -> IndexSet {
        IndexSet::new(n, p.iter().copied()).unwrap()
    }

    fn word(n: usize, p: &[usize]) -> MajoranaWord {
        MajoranaWord::from(set(n, p))
    }

    #[test]
    fn product_examples() {
        let e = MajoranaWord::identity(4).unwrap();
        let a = word(4, &[1, 2]);
        assert_eq!(word_product(&e, &a).unwrap(), a);

        let b = word(4, &[2, 3]);
        let ab = word_product(&a, &b).unwrap();
        assert_eq!(ab.support, set(4, &[1, 3]));
        assert_eq!(ab.phase, Phase::One);

        let aa = word_product(&a, &a).unwrap();
        assert!(aa.support.is_empty());
        assert_eq!(aa.phase, Phase::MinusOne);
    }

    #[test]
    fn mismatched_ambient_is_dimension_error() {
        let a = word(4, &[1]);
        let b = word(6, &[1]);
        assert!(matches!(word_product(&a, &b), Err(Error::Dimension(_))));
        assert!(matches!(
            product_trace(&[set(4, &[1]), set(6, &[1])]),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn index_set_validation() {
        assert!(IndexSet::new(4, [5]).is_err());
        assert!(IndexSet::new(4, [0]).is_err());
        assert!(IndexSet::new(4, [2, 2]).is_err());
        assert!(IndexSet::from_bits(3, 0b1000).is_err());
        assert!(IndexSet::empty(65).is_err());
        let s = set(64, &[1, 64]);
        assert_eq!(s.iter().collect::<Vec<_>>(), vec![1, 64]);
        assert_eq!(s.len(), 2);
    }

    #[test]
    fn trace_examples() {
        assert_eq!(normalized_trace(&MajoranaWord::identity(4).unwrap()), Phase::One.to_complex());
        assert_eq!(normalized_trace(&word(4, &[1, 2])).norm(), 0.0);
        let a = word(4, &[1, 2]);
        let aa = word_product(&a, &a).unwrap();
        assert_eq!(normalized_trace(&aa), Complex64::new(-1.0, 0.0));
        // dense oracle at n = 4
        let d = dense_word(&a).unwrap();
        assert_eq!((&d * &d).normalized_trace(), Complex64::new(-1.0, 0.0));
    }

    #[test]
    fn product_trace_examples() {
        let a = set(4, &[1, 2]);
        assert_eq!(product_trace(&[a, a]).unwrap(), Complex64::new(-1.0, 0.0));
        assert_eq!(product_trace(&[a, set(4, &[3, 4])]).unwrap().norm(), 0.0);
        assert_eq!(product_trace(&[]).unwrap(), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn pi_sign_examples() {
        let nc = PairPartition::from_blocks(4, &[(1, 2), (3, 4)]).unwrap();
        let r1 = set(6, &[1, 2]);
        let r2 = set(6, &[2, 3]);
        assert_eq!(pi_sign_identity(&nc, &[r1, r2], 2).unwrap(), 1);
        let cr = PairPartition::from_blocks(4, &[(1, 3), (2, 4)]).unwrap();
        assert_eq!(pi_sign_identity(&cr, &[r1, r2], 2).unwrap(), -1);
        assert!(matches!(
            pi_sign_identity(&cr, &[set(6, &[1, 2, 3]), set(6, &[2, 3, 4])], 3),
            Err(Error::Unsupported(_))
        ));
        assert!(pi_sign_identity(&cr, &[r1], 2).is_err());
    }

    #[test]
    fn pi_sign_matches_symbolic_trace_for_random_q2() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let pi = PairPartition::from_blocks(4, &[(1, 3), (2, 4)]).unwrap();
        let n = 8;
        let mut agree = 0;
        for _ in 0..100 {
            let mut draw = || loop {
                let a = rng.random_range(1..=n);
                let b = rng.random_range(1..=n);
                if a != b {
                    break set(n, &[a, b]);
                }
            };
            let assignment = [draw(), draw()];
            let seq = pi_ordered_sequence(&pi, &assignment).unwrap();
            let tr = product_trace(&seq).unwrap();
            let lhs = Phase::I.pow(2 * 4 / 2).to_complex() * tr;
            let rhs = pi_sign_identity(&pi, &assignment, 2).unwrap() as f64;
            if (lhs - Complex64::new(rhs, 0.0)).norm() == 0.0 {
                agree += 1;
            }
        }
        assert_eq!(agree, 100);
    }

    #[test]
    fn dense_pauli_pair_at_n2() {
        let p1 = dense_majorana(1, 2).unwrap();
        let p2 = dense_majorana(2, 2).unwrap();
        let id = DenseOperator::identity(2);
        for p in [&p1, &p2] {
            assert_eq!(p.hermitian_defect(), 0.0);
            assert_eq!(p * p, id);
        }
        let anti = &(&p1 * &p2).entries + &(&p2 * &p1).entries;
        assert!(anti.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn dense_anticommutation_at_n8() {
        let n = 8;
        let psi: Vec<_> = (1..=n).map(|j| dense_majorana(j, n).unwrap()).collect();
        let dim = 1 << (n / 2);
        for i in 0..n {
            assert_eq!(psi[i].hermitian_defect(), 0.0);
            for j in 0..n {
                let anti = &(&psi[i] * &psi[j]).entries + &(&psi[j] * &psi[i]).entries;
                let expect = if i == j {
                    DMatrix::<Complex64>::identity(dim, dim) * Complex64::new(2.0, 0.0)
                } else {
                    DMatrix::zeros(dim, dim)
                };
                assert_eq!(anti, expect, "pair ({}, {})", i + 1, j + 1);
            }
        }
    }

    #[test]
    fn dense_cap_is_a_resource_error() {
        assert!(matches!(dense_majorana(1, 18), Err(Error::Resource(_))));
        assert!(matches!(dense_majorana(3, 2), Err(Error::Argument(_))));
        assert!(dense_majorana_capped(1, 18, 18).is_ok());
    }

    #[test]
    fn pauli_strings_match_kronecker_products() {
        for n in [2usize, 4, 6, 8] {
            for j in 1..=n {
                let p = PauliString::majorana(j, n).unwrap();
                assert_eq!(p.to_dense(), dense_majorana(j, n).unwrap().entries);
            }
        }
    }

    fn arb_word(n: usize) -> impl Strategy<Value = MajoranaWord> {
        let mask = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
        (any::<u64>(), 0u32..4).prop_map(move |(b, e)| {
            MajoranaWord::new(
                IndexSet::from_bits(n, b & mask).unwrap(),
                Phase::from_exponent(e),
            )
        })
    }

    proptest! {
        #[test]
        fn support_is_symmetric_difference_and_commutation_sign(a in arb_word(40), b in arb_word(40)) {
            let ab = word_product(&a, &b).unwrap();
            let ba = word_product(&b, &a).unwrap();
            prop_assert_eq!(ab.support, a.support.symmetric_difference(&b.support));
            prop_assert_eq!(ab.support, ba.support);
            let swaps = a.support.len() * b.support.len() - a.support.intersection_len(&b.support);
            let ratio = ab.phase * ba.phase.conj();
            prop_assert_eq!(ratio, Phase::sign(swaps % 2 == 1));
        }

        #[test]
        fn product_is_associative(a in arb_word(64), b in arb_word(64), c in arb_word(64)) {
            let left = word_product(&word_product(&a, &b).unwrap(), &c).unwrap();
            let right = word_product(&a, &word_product(&b, &c).unwrap()).unwrap();
            prop_assert_eq!(left, right);
        }

        #[test]
        fn trace_vanishes_iff_support_nonempty(a in arb_word(20)) {
            let t = normalized_trace(&a);
            prop_assert_eq!(t.norm() == 0.0, !a.support.is_empty());
            prop_assert!(t.norm() <= 1.0);
        }

        #[test]
        fn dense_realization_matches_word_algebra(a in arb_word(8), b in arb_word(8)) {
            let ab = word_product(&a, &b).unwrap();
            let lhs = &dense_word(&a).unwrap() * &dense_word(&b).unwrap();
            prop_assert_eq!(lhs, dense_word(&ab).unwrap());
        }

        #[test]
        fn product_trace_matches_dense_trace(
            seq in proptest::collection::vec(arb_word(10), 0..6)
        ) {
            let sets: Vec<IndexSet> = seq.iter().map(|w| w.support).collect();
            let symbolic = product_trace(&sets).unwrap();
            let mut acc = DenseOperator::identity(1 << 5);
            for s in &sets {
                acc = &acc * &dense_word(&MajoranaWord::from(*s)).unwrap();
            }
            prop_assert!((acc.normalized_trace() - symbolic).norm() <= 1e-12);
        }

        #[test]
        fn pauli_image_of_words_matches_dense(a in arb_word(8)) {
            let p = PauliString::from_word(&a).unwrap();
            prop_assert_eq!(p.to_dense(), dense_word(&a).unwrap().entries);
        }

        #[test]
        fn pi_sign_agrees_with_trace_for_even_q(
            blocks in 1usize..5,
            seed in any::<u64>(),
            q in prop_oneof![Just(2usize), Just(4usize)],
        ) {
            use rand::{seq::IndexedRandom, SeedableRng};
            let n = 12;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let k = 2 * blocks;
            let all = crate::moments::pair_partitions(k).unwrap();
            let pi = all.choose(&mut rng).unwrap();
            let positions: Vec<usize> = (1..=n).collect();
            let assignment: Vec<IndexSet> = (0..blocks)
                .map(|_| {
                    let pick: Vec<usize> = positions.choose_multiple(&mut rng, q).copied().collect();
                    IndexSet::new(n, pick).unwrap()
                })
                .collect();
            let seq = pi_ordered_sequence(pi, &assignment).unwrap();
            let tr = product_trace(&seq).unwrap();
            let lhs = Phase::I.pow((q * k / 2) as u32).to_complex() * tr;
            let rhs = pi_sign_identity(pi, &assignment, q).unwrap() as f64;
            prop_assert_eq!(lhs, Complex64::new(rhs, 0.0));
        }
    }
}
