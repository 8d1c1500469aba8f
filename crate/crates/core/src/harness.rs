//! Monte Carlo ensembles of SYK spectra and the checks run on them.
//!
//! Each sample draws its couplings from its own random stream
//! `(seed, sample_id)`, so a run is a pure function of its configuration no
//! matter how samples are scheduled across workers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{
    assemble_dense, coupling_pattern_sum, coupling_stream, enumerate_index_set,
    hermitian_prefactor, index_set_len, mask_product_trace, real_part, sample_couplings,
    CouplingDistribution, Provenance, ASSEMBLY_CAP,
};
use crate::moments::{limit_variance, DecayRate};
use crate::parallel::map_indexed;
use crate::spectrum::{eigenvalues, empirical_moment, linear_statistic, Polynomial, Tabulated, TestFunction};
use crate::stats::{
    batch_means, covariance, excess_kurtosis, jarque_bera, mean, normality_test, skewness,
    variance, BatchEstimate, KsOutcome, DEFAULT_BATCHES,
};

/// Highest moment order recorded per sample.
pub const MAX_RECORDED_MOMENT: usize = 8;

/// The artifact's constant in the Lipschitz concentration audit.
pub const LIPSCHITZ_AUDIT_CONSTANT: f64 = 8.0;

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

fn default_nodes() -> usize {
    2001
}

/// Test functions as they appear in a configuration file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionSpec {
    Polynomial {
        coefficients: Vec<f64>,
    },
    Tabulated {
        start: f64,
        step: f64,
        values: Vec<f64>,
        #[serde(default)]
        lipschitz: Option<f64>,
    },
    /// `min(|x|, clip)`.
    ClippedAbs {
        clip: f64,
        #[serde(default = "default_nodes")]
        nodes: usize,
    },
    /// `clamp(x, -clip, clip)`.
    ClippedLinear {
        clip: f64,
        #[serde(default = "default_nodes")]
        nodes: usize,
    },
}

impl FunctionSpec {
    pub fn monomial(k: usize) -> Self {
        FunctionSpec::Polynomial {
            coefficients: Polynomial::monomial(k).coefficients().to_vec(),
        }
    }

    pub fn resolve(&self) -> Result<TestFunction> {
        let f = match self {
            FunctionSpec::Polynomial { coefficients } => {
                TestFunction::Polynomial(Polynomial::new(coefficients.clone()))
            }
            FunctionSpec::Tabulated {
                start,
                step,
                values,
                lipschitz,
            } => TestFunction::Tabulated(Tabulated::new(*start, *step, values.clone(), *lipschitz)?),
            FunctionSpec::ClippedAbs { clip, nodes } => {
                TestFunction::Tabulated(Tabulated::clipped_abs(*clip, *nodes)?)
            }
            FunctionSpec::ClippedLinear { clip, nodes } => {
                TestFunction::Tabulated(Tabulated::clipped_linear(*clip, *nodes)?)
            }
        };
        f.validate()?;
        Ok(f)
    }
}

fn default_schema_version() -> u32 {
    CONFIG_SCHEMA_VERSION
}

/// A declarative Monte Carlo experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    pub n: usize,
    pub q: usize,
    pub dist: CouplingDistribution,
    pub f: FunctionSpec,
    pub samples: usize,
    pub seed: u64,
    /// Record `L⁻¹Tr H^k` for `k = 2..=8` alongside each statistic.
    #[serde(default)]
    pub record_moments: bool,
    #[serde(default)]
    pub dump_eigenvalues: bool,
    /// Worker count; 0 uses every core. Never affects results.
    #[serde(default)]
    pub parallel_width: usize,
}

impl ExperimentConfig {
    pub fn new(
        n: usize,
        q: usize,
        dist: CouplingDistribution,
        f: FunctionSpec,
        samples: usize,
        seed: u64,
    ) -> Self {
        Self {
            schema_version: CONFIG_SCHEMA_VERSION,
            n,
            q,
            dist,
            f,
            samples,
            seed,
            record_moments: false,
            dump_eigenvalues: false,
            parallel_width: 0,
        }
    }

    pub fn validate(&self) -> Result<TestFunction> {
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(Error::Argument(format!(
                "config schema version {} is not {CONFIG_SCHEMA_VERSION}",
                self.schema_version
            )));
        }
        if self.samples < 2 {
            return Err(Error::Argument(format!("need at least 2 samples, got {}", self.samples)));
        }
        if self.n == 0 || self.n % 2 == 1 {
            return Err(Error::Argument(format!("n must be even and positive, got {}", self.n)));
        }
        if self.q == 0 || self.q > self.n {
            return Err(Error::Argument(format!("q must lie in 1..={}, got {}", self.n, self.q)));
        }
        if self.n > ASSEMBLY_CAP {
            return Err(Error::Resource(format!(
                "n = {} exceeds the dense cap {ASSEMBLY_CAP}",
                self.n
            )));
        }
        self.dist.validate()?;
        self.f.resolve()
    }

    /// `|I| = C(n, q)`, the fluctuation scale.
    pub fn index_set_len(&self) -> Result<f64> {
        Ok(index_set_len(self.n, self.q)? as f64)
    }
}

/// Per-sample output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleRow {
    pub sample_id: u64,
    /// `L_n(f)`.
    pub value: f64,
    /// `L⁻¹Tr H^k` for `k = 2..=8` when recorded.
    pub moments: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub samples: usize,
    pub mean: f64,
    pub variance: f64,
    /// `C(n, q) · variance`.
    pub scaled_variance: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub jarque_bera: f64,
    /// Variance of the reference normal for the KS statistic: the limit law's
    /// when it is known, the scaled sample variance otherwise.
    pub reference_variance: f64,
    pub ks_statistic: f64,
    pub ks_p_value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: ExperimentConfig,
    pub rows: Vec<SampleRow>,
    pub summary: RunSummary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eigenvalues: Option<Vec<Vec<f64>>>,
}

impl RunRecord {
    pub fn values(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.value).collect()
    }

    /// Column of `L⁻¹Tr H^k` across samples, `k ∈ 1..=8`.
    pub fn moment_column(&self, k: usize) -> Result<Vec<f64>> {
        if !(1..=MAX_RECORDED_MOMENT).contains(&k) {
            return Err(Error::Argument(format!(
                "moment order {k} outside 1..={MAX_RECORDED_MOMENT}"
            )));
        }
        if k == 1 {
            // every word is traceless, so L⁻¹Tr H = 0 identically
            return Ok(vec![0.0; self.rows.len()]);
        }
        self.rows
            .iter()
            .map(|r| {
                r.moments
                    .as_ref()
                    .map(|m| m[k - 2])
                    .ok_or_else(|| Error::Argument("run did not record moments".into()))
            })
            .collect()
    }

    /// Recomputes the summary from the rows and compares to 1e-12 relative.
    pub fn audit(&self) -> Result<()> {
        let fresh = summarize(&self.config, &self.rows)?;
        let pairs = [
            ("mean", self.summary.mean, fresh.mean),
            ("variance", self.summary.variance, fresh.variance),
            ("scaled_variance", self.summary.scaled_variance, fresh.scaled_variance),
            ("skewness", self.summary.skewness, fresh.skewness),
            ("excess_kurtosis", self.summary.excess_kurtosis, fresh.excess_kurtosis),
            ("jarque_bera", self.summary.jarque_bera, fresh.jarque_bera),
            ("reference_variance", self.summary.reference_variance, fresh.reference_variance),
            ("ks_statistic", self.summary.ks_statistic, fresh.ks_statistic),
            ("ks_p_value", self.summary.ks_p_value, fresh.ks_p_value),
        ];
        for (name, stored, recomputed) in pairs {
            if (stored - recomputed).abs() > 1e-12 * stored.abs().max(recomputed.abs()).max(1.0) {
                return Err(Error::Validation(format!(
                    "summary field {name} is {stored}, rows give {recomputed}"
                )));
            }
        }
        if self.summary.samples != self.rows.len() {
            return Err(Error::Validation(format!(
                "summary counts {} samples, record holds {}",
                self.summary.samples,
                self.rows.len()
            )));
        }
        Ok(())
    }
}

/// `E L_n(f)` when it is known exactly: polynomials of degree ≤ 2, for which
/// `E L⁻¹Tr H = 0` and `E L⁻¹Tr H² = 1`.
pub fn known_mean(f: &TestFunction) -> Option<f64> {
    match f {
        TestFunction::Polynomial(p) if p.degree() <= 2 => {
            let c = p.coefficients();
            Some(c.first().copied().unwrap_or(0.0) + c.get(2).copied().unwrap_or(0.0))
        }
        _ => None,
    }
}

/// Limiting variance of the scaled fluctuation when the theory supplies one.
pub fn reference_variance(cfg: &ExperimentConfig, f: &TestFunction) -> Result<Option<f64>> {
    match f {
        TestFunction::Polynomial(p) => Ok(Some(limit_variance(
            p,
            DecayRate::from_sizes(cfg.n, cfg.q)?,
            cfg.dist.gamma(),
        )?)),
        TestFunction::Tabulated(_) => Ok(None),
    }
}

fn fluctuations(cfg: &ExperimentConfig, f: &TestFunction, values: &[f64]) -> Result<Vec<f64>> {
    let centre = known_mean(f).unwrap_or_else(|| mean(values));
    let scale = cfg.index_set_len()?.sqrt();
    Ok(values.iter().map(|v| scale * (v - centre)).collect())
}

fn summarize(cfg: &ExperimentConfig, rows: &[SampleRow]) -> Result<RunSummary> {
    let f = cfg.validate()?;
    let values: Vec<f64> = rows.iter().map(|r| r.value).collect();
    let var = variance(&values);
    let scaled = cfg.index_set_len()? * var;
    let reference = reference_variance(cfg, &f)?.unwrap_or(scaled);
    let ks = normality_test(&fluctuations(cfg, &f, &values)?, reference)?;
    Ok(RunSummary {
        samples: rows.len(),
        mean: mean(&values),
        variance: var,
        scaled_variance: scaled,
        skewness: skewness(&values),
        excess_kurtosis: excess_kurtosis(&values),
        jarque_bera: jarque_bera(&values),
        reference_variance: reference,
        ks_statistic: ks.statistic,
        ks_p_value: ks.p_value,
    })
}

struct SampleOutput {
    row: SampleRow,
    eigenvalues: Option<Vec<f64>>,
}

fn run_sample(cfg: &ExperimentConfig, f: &TestFunction, sample_id: u64) -> Result<SampleOutput> {
    let mut rng = coupling_stream(cfg.seed, sample_id);
    let couplings = sample_couplings(&cfg.dist, cfg.n, cfg.q, &mut rng)?;
    let mut h = assemble_dense(&couplings)?;
    h.provenance = Provenance {
        seed: Some(cfg.seed),
        sample_id: Some(sample_id),
    };
    let spectrum = eigenvalues(&h)?;
    let moments = cfg.record_moments.then(|| {
        (2..=MAX_RECORDED_MOMENT)
            .map(|k| empirical_moment(&spectrum, k))
            .collect()
    });
    Ok(SampleOutput {
        row: SampleRow {
            sample_id,
            value: linear_statistic(&spectrum, f),
            moments,
        },
        eigenvalues: cfg.dump_eigenvalues.then(|| spectrum.eigenvalues.clone()),
    })
}

/// Draws, diagonalizes and summarizes `cfg.samples` independent Hamiltonians.
pub fn run_ensemble(cfg: &ExperimentConfig) -> Result<RunRecord> {
    let f = cfg.validate()?;
    let outputs = map_indexed(cfg.samples, cfg.parallel_width, |i| run_sample(cfg, &f, i as u64));
    let mut rows = Vec::with_capacity(cfg.samples);
    let mut spectra = cfg.dump_eigenvalues.then(|| Vec::with_capacity(cfg.samples));
    for out in outputs {
        let out = out?;
        rows.push(out.row);
        if let (Some(all), Some(ev)) = (spectra.as_mut(), out.eigenvalues) {
            all.push(ev);
        }
    }
    let summary = summarize(cfg, &rows)?;
    Ok(RunRecord {
        config: cfg.clone(),
        rows,
        summary,
        eigenvalues: spectra,
    })
}

/// `C(n,q)^{1/2} (L_n(f) - E L_n(f))` per sample, centred by the exact mean when
/// it is known and by the sample mean otherwise.
pub fn scaled_fluctuations(rec: &RunRecord) -> Result<Vec<f64>> {
    let f = rec.config.validate()?;
    fluctuations(&rec.config, &f, &rec.values())
}

/// `C(n,q) · var̂(L_n(f))` with a batch-means standard error.
pub fn scaled_variance(rec: &RunRecord) -> Result<BatchEstimate> {
    let values = rec.values();
    let scale = rec.config.index_set_len()?;
    batch_means(values.len(), DEFAULT_BATCHES, |r| scale * variance(&values[r]))
}

/// `C(n,q) · cov̂(L⁻¹Tr H^k, L⁻¹Tr H^{k'})` with a batch-means standard error.
pub fn empirical_covariance(rec: &RunRecord, k: usize, k_prime: usize) -> Result<BatchEstimate> {
    let x = rec.moment_column(k)?;
    let y = rec.moment_column(k_prime)?;
    let scale = rec.config.index_set_len()?;
    batch_means(x.len(), DEFAULT_BATCHES, |r| scale * covariance(&x[r.clone()], &y[r]))
}

/// KS test of the scaled fluctuations against `N(0, reference_variance)`.
pub fn clt_normality(rec: &RunRecord, reference_variance: f64) -> Result<KsOutcome> {
    normality_test(&scaled_fluctuations(rec)?, reference_variance)
}

/// `2^k k! k²`, the explicit Gaussian variance constant.
pub fn gaussian_variance_constant(k: usize) -> f64 {
    let fact: f64 = (1..=k).map(|i| i as f64).product();
    2f64.powi(k as i32) * fact * (k * k) as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceAudit {
    pub k: usize,
    pub constant: f64,
    /// `C(n,q)·var̂ / constant` with its standard error.
    pub ratio: BatchEstimate,
}

impl VarianceAudit {
    pub fn passes(&self) -> bool {
        self.ratio.value <= 1.0 + 3.0 * self.ratio.se
    }
}

/// Ratio of the scaled variance of `L⁻¹Tr H^k` to `2^k k! k²`, from a Gaussian
/// run that recorded moments.
pub fn variance_bound_audit_from(rec: &RunRecord, k: usize) -> Result<VarianceAudit> {
    if rec.config.dist != CouplingDistribution::Gaussian {
        return Err(Error::Unsupported(
            "the explicit variance constant is stated for Gaussian couplings".into(),
        ));
    }
    let constant = gaussian_variance_constant(k);
    let col = rec.moment_column(k)?;
    let scale = rec.config.index_set_len()?;
    let est = batch_means(col.len(), DEFAULT_BATCHES, |r| scale * variance(&col[r]))?;
    Ok(VarianceAudit {
        k,
        constant,
        ratio: BatchEstimate {
            value: est.value / constant,
            se: est.se / constant,
        },
    })
}

/// Runs a Gaussian ensemble and audits the variance of `L⁻¹Tr H^k`.
pub fn variance_bound_audit(
    n: usize,
    q: usize,
    k: usize,
    dist: &CouplingDistribution,
    samples: usize,
    seed: u64,
) -> Result<VarianceAudit> {
    if *dist != CouplingDistribution::Gaussian {
        return Err(Error::Unsupported(
            "the explicit variance constant is stated for Gaussian couplings".into(),
        ));
    }
    let mut cfg = ExperimentConfig::new(n, q, dist.clone(), FunctionSpec::monomial(k.max(1)), samples, seed);
    cfg.record_moments = true;
    let rec = run_ensemble(&cfg)?;
    variance_bound_audit_from(&rec, k)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LipschitzAudit {
    pub lipschitz: f64,
    pub scaled_variance: BatchEstimate,
    /// `C · L²`.
    pub bound: f64,
    /// `(t, fraction of samples with |scaled fluctuation| ≥ t)` at `t = L, 2L, 3L`.
    pub tail: Vec<(f64, f64)>,
}

impl LipschitzAudit {
    pub fn passes(&self) -> bool {
        self.scaled_variance.value <= self.bound
    }
}

/// Concentration audit for a Lipschitz test function under Gaussian couplings.
pub fn lipschitz_concentration_audit(cfg: &ExperimentConfig) -> Result<LipschitzAudit> {
    if cfg.dist != CouplingDistribution::Gaussian {
        return Err(Error::Unsupported(
            "the concentration audit assumes Gaussian couplings".into(),
        ));
    }
    let f = cfg.validate()?;
    let lipschitz = f.lipschitz().ok_or_else(|| {
        Error::Argument("the test function declares no Lipschitz constant".into())
    })?;
    let rec = run_ensemble(cfg)?;
    let fl = scaled_fluctuations(&rec)?;
    let tail = (1..=3)
        .map(|m| {
            let t = m as f64 * lipschitz;
            let hits = fl.iter().filter(|v| v.abs() >= t).count();
            (t, hits as f64 / fl.len() as f64)
        })
        .collect();
    Ok(LipschitzAudit {
        lipschitz,
        scaled_variance: scaled_variance(&rec)?,
        bound: LIPSCHITZ_AUDIT_CONSTANT * lipschitz * lipschitz,
        tail,
    })
}

/// Exact `C(n,q) · cov(L⁻¹Tr H^k, L⁻¹Tr H^{k'})` at finite size.
///
/// `E[T_k T_{k'}]` sums over all `(k+k')`-tuples of index sets the coupling
/// product moment times the product of the two normalized traces; the tuples
/// are grouped by their equality pattern so only distinct assignments are
/// enumerated.
pub fn exact_covariance_oracle(
    n: usize,
    q: usize,
    k: usize,
    k_prime: usize,
    dist: &CouplingDistribution,
) -> Result<f64> {
    dist.validate()?;
    let sets = enumerate_index_set(n, q)?;
    let len = sets.len() as f64;
    let total = k + k_prime;
    let prefactor = hermitian_prefactor(q);
    let mixed = coupling_pattern_sum(&sets, dist, total, |w| {
        let left = mask_product_trace(&w[..k])?;
        let right = mask_product_trace(&w[k..])?;
        Some(left * right * prefactor.pow(total as u32))
    })?;
    let joint = real_part(mixed / len.powf(total as f64 / 2.0))?;
    let single = |order: usize| -> Result<f64> {
        if order == 0 {
            return Ok(1.0);
        }
        let c = prefactor.pow(order as u32);
        let s = coupling_pattern_sum(&sets, dist, order, |w| mask_product_trace(w).map(|p| p * c))?;
        real_part(s / len.powf(order as f64 / 2.0))
    };
    Ok(len * (joint - single(k)? * single(k_prime)?))
}
