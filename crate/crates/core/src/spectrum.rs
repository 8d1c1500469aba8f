//! Dense Hermitian diagonalization and linear eigenvalue statistics.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{HamiltonianMatrix, Provenance};

/// Relative Hermiticity tolerance accepted by the eigensolver.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Real polynomial `Σ a_k x^k`, coefficients in increasing degree.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    coefficients: Vec<f64>,
}

impl Polynomial {
    pub fn new(coefficients: Vec<f64>) -> Self {
        Self { coefficients }
    }

    pub fn monomial(k: usize) -> Self {
        let mut c = vec![0.0; k + 1];
        c[k] = 1.0;
        Self::new(c)
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// Index of the last nonzero coefficient; 0 for the zero polynomial.
    pub fn degree(&self) -> usize {
        self.coefficients.iter().rposition(|&c| c != 0.0).unwrap_or(0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coefficients.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }
}

/// A function sampled on a uniform grid, linearly interpolated between nodes
/// and held constant beyond the first and last node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tabulated {
    pub start: f64,
    pub step: f64,
    pub values: Vec<f64>,
    /// Declared Lipschitz constant, checked against the node slopes.
    #[serde(default)]
    pub lipschitz: Option<f64>,
}

impl Tabulated {
    pub fn new(start: f64, step: f64, values: Vec<f64>, lipschitz: Option<f64>) -> Result<Self> {
        let t = Self {
            start,
            step,
            values,
            lipschitz,
        };
        t.validate()?;
        Ok(t)
    }

    /// Samples `f` on `count` equally spaced nodes spanning `[lo, hi]`.
    pub fn from_fn<F: Fn(f64) -> f64>(
        lo: f64,
        hi: f64,
        count: usize,
        f: F,
        lipschitz: Option<f64>,
    ) -> Result<Self> {
        if count < 2 || !(hi > lo) {
            return Err(Error::Argument(format!(
                "need at least two nodes on a nonempty interval, got {count} on [{lo}, {hi}]"
            )));
        }
        let step = (hi - lo) / (count - 1) as f64;
        let values = (0..count).map(|i| f(lo + i as f64 * step)).collect();
        Self::new(lo, step, values, lipschitz)
    }

    /// `min(|x|, clip)`, Lipschitz constant 1.
    pub fn clipped_abs(clip: f64, count: usize) -> Result<Self> {
        Self::from_fn(-clip, clip, count, |x| x.abs().min(clip), Some(1.0))
    }

    /// `clamp(x, -clip, clip)`, Lipschitz constant 1.
    pub fn clipped_linear(clip: f64, count: usize) -> Result<Self> {
        Self::from_fn(-clip, clip, count, |x| x.clamp(-clip, clip), Some(1.0))
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::Argument("tabulated function has no nodes".into()));
        }
        if !(self.step > 0.0) || !self.step.is_finite() || !self.start.is_finite() {
            return Err(Error::Argument(format!(
                "grid needs finite start and positive step, got ({}, {})",
                self.start, self.step
            )));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument("tabulated values must be finite".into()));
        }
        if let Some(l) = self.lipschitz {
            if !(l >= 0.0) || !l.is_finite() {
                return Err(Error::Argument(format!("Lipschitz constant {l} is not finite")));
            }
            let slope = self.max_slope();
            if slope > l * (1.0 + 1e-9) + 1e-12 {
                return Err(Error::Validation(format!(
                    "declared Lipschitz constant {l} is below the node slope {slope}"
                )));
            }
        }
        Ok(())
    }

    /// Largest `|Δv| / step` between neighbouring nodes.
    pub fn max_slope(&self) -> f64 {
        self.values
            .windows(2)
            .map(|w| (w[1] - w[0]).abs() / self.step)
            .fold(0.0, f64::max)
    }

    pub fn end(&self) -> f64 {
        self.start + (self.values.len() - 1) as f64 * self.step
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn node(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    pub fn eval(&self, x: f64) -> f64 {
        let last = self.values.len() - 1;
        let t = (x - self.start) / self.step;
        if !(t > 0.0) {
            return self.values[0];
        }
        if t >= last as f64 {
            return self.values[last];
        }
        let i = t.floor() as usize;
        let frac = t - i as f64;
        self.values[i] + frac * (self.values[i + 1] - self.values[i])
    }
}

/// A test function for linear statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFunction {
    Polynomial(Polynomial),
    Tabulated(Tabulated),
}

impl TestFunction {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            TestFunction::Polynomial(p) => p.eval(x),
            TestFunction::Tabulated(t) => t.eval(x),
        }
    }

    /// Global Lipschitz constant when one is known.
    pub fn lipschitz(&self) -> Option<f64> {
        match self {
            TestFunction::Polynomial(p) if p.degree() <= 1 => {
                Some(p.coefficients().get(1).copied().unwrap_or(0.0).abs())
            }
            TestFunction::Polynomial(_) => None,
            TestFunction::Tabulated(t) => t.lipschitz,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            TestFunction::Polynomial(p) if p.coefficients().iter().any(|c| !c.is_finite()) => {
                Err(Error::Argument("polynomial coefficients must be finite".into()))
            }
            TestFunction::Polynomial(_) => Ok(()),
            TestFunction::Tabulated(t) => t.validate(),
        }
    }
}

/// Sorted spectrum of one matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralSample {
    pub eigenvalues: Vec<f64>,
    pub n: usize,
    pub q: usize,
    pub provenance: Provenance,
}

impl SpectralSample {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }
}

fn check_hermitian(m: &DMatrix<Complex64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension(format!(
            "matrix is {}×{}, not square",
            m.nrows(),
            m.ncols()
        )));
    }
    let mut scale = 0.0f64;
    let mut defect = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..=j {
            let a = m[(i, j)];
            scale = scale.max(a.norm());
            defect = defect.max((a - m[(j, i)].conj()).norm());
        }
    }
    if defect > HERMITIAN_TOL * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::Validation(format!(
            "matrix is not Hermitian: defect {defect:e} at scale {scale:e}"
        )));
    }
    Ok(())
}

/// Indices whose basis vectors have even (`parity = 0`) or odd popcount.
fn parity_sector(dim: usize, parity: u32) -> Vec<usize> {
    (0..dim).filter(|i| i.count_ones() % 2 == parity).collect()
}

/// True when no entry couples even- and odd-popcount basis vectors.
fn preserves_parity(m: &DMatrix<Complex64>) -> bool {
    let dim = m.nrows();
    (0..dim).all(|j| {
        (0..dim).all(|i| (i ^ j).count_ones() % 2 == 0 || m[(i, j)] == Complex64::new(0.0, 0.0))
    })
}

fn sector_block(m: &DMatrix<Complex64>, idx: &[usize]) -> DMatrix<Complex64> {
    DMatrix::from_fn(idx.len(), idx.len(), |i, j| m[(idx[i], idx[j])])
}

/// Sorted eigenvalues of a Hermitian matrix.
///
/// Matrices that never couple the two popcount-parity sectors (every even-`q`
/// Hamiltonian) are diagonalized one sector at a time.
pub fn hermitian_eigenvalues(m: &DMatrix<Complex64>) -> Result<Vec<f64>> {
    check_hermitian(m)?;
    let dim = m.nrows();
    let mut ev: Vec<f64> = if dim >= 4 && preserves_parity(m) {
        let mut out = Vec::with_capacity(dim);
        for parity in [0, 1] {
            let block = sector_block(m, &parity_sector(dim, parity));
            out.extend(block.symmetric_eigenvalues().iter().copied());
        }
        out
    } else {
        m.symmetric_eigenvalues().iter().copied().collect()
    };
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

/// Spectrum of an assembled Hamiltonian.
pub fn eigenvalues(h: &HamiltonianMatrix) -> Result<SpectralSample> {
    Ok(SpectralSample {
        eigenvalues: hermitian_eigenvalues(&h.entries)?,
        n: h.n,
        q: h.q,
        provenance: h.provenance,
    })
}

/// Full eigendecomposition `H = V Λ V*` with eigenvalues sorted ascending and
/// eigenvector columns in matching order.
pub fn eigenpairs(h: &HamiltonianMatrix) -> Result<(SpectralSample, DMatrix<Complex64>)> {
    check_hermitian(&h.entries)?;
    let eig = SymmetricEigen::new(h.entries.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(h.dim(), h.dim(), |i, j| eig.eigenvectors[(i, order[j])]);
    let sample = SpectralSample {
        eigenvalues: values,
        n: h.n,
        q: h.q,
        provenance: h.provenance,
    };
    Ok((sample, vectors))
}

/// `L_n(f) = L⁻¹ Σ_j f(λ_j)`.
pub fn linear_statistic(s: &SpectralSample, f: &TestFunction) -> f64 {
    s.eigenvalues.iter().map(|&x| f.eval(x)).sum::<f64>() / s.len() as f64
}

/// `L⁻¹ Σ_j λ_j^k`.
pub fn empirical_moment(s: &SpectralSample, k: usize) -> f64 {
    if k == 0 {
        return 1.0;
    }
    s.eigenvalues.iter().map(|&x| x.powi(k as i32)).sum::<f64>() / s.len() as f64
}
