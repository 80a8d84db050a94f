//! From raw per-individual count profiles to covariate-corrected,
//! quantile-normalized wavelet coefficients plus a low-count mask.
//!
//! Per coefficient the pipeline is: DWT of standardized counts, quantile
//! transform across individuals, residualize on the covariates, quantile
//! transform again. Coefficients whose supporting raw counts are too small to
//! carry information are masked instead of transformed.

use nalgebra::DMatrix;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{invalid, Error, Result};
use crate::wavelet::{dwt_into, wc_support, CoeffIndex, Signal};

/// Default low-count filter: mask a coefficient when its supporting raw
/// counts average fewer than this many reads per individual.
pub const DEFAULT_LOW_COUNT_THRESHOLD: f64 = 2.0;

/// Raw per-individual count profiles over one region, plus library sizes.
#[derive(Clone, Debug)]
pub struct SiteData {
    counts: Vec<Vec<u32>>,
    library_sizes: Vec<u64>,
}

impl SiteData {
    pub fn new(counts: Vec<Vec<u32>>, library_sizes: Vec<u64>) -> Result<Self> {
        let n = counts.len();
        if n == 0 {
            return Err(invalid("site has no individuals"));
        }
        let b = counts[0].len();
        if b < 2 || !b.is_power_of_two() {
            return Err(invalid(format!("region length {} is not 2^J", b)));
        }
        if counts.iter().any(|row| row.len() != b) {
            return Err(invalid("count rows have unequal lengths"));
        }
        if library_sizes.len() != n {
            return Err(invalid(format!(
                "{} library sizes for {} individuals",
                library_sizes.len(),
                n
            )));
        }
        if library_sizes.iter().any(|&s| s == 0) {
            return Err(invalid("zero library size"));
        }
        Ok(SiteData {
            counts,
            library_sizes,
        })
    }

    pub fn n(&self) -> usize {
        self.counts.len()
    }

    pub fn b(&self) -> usize {
        self.counts[0].len()
    }

    pub fn j(&self) -> u32 {
        self.b().trailing_zeros()
    }

    pub fn counts(&self) -> &[Vec<u32>] {
        &self.counts
    }

    pub fn library_sizes(&self) -> &[u64] {
        &self.library_sizes
    }
}

/// Per-individual covariates (e.g. expression PCs), N rows by K columns.
#[derive(Clone, Debug)]
pub struct CovariateMatrix {
    values: Vec<Vec<f64>>,
}

impl CovariateMatrix {
    pub fn new(values: Vec<Vec<f64>>) -> Result<Self> {
        let n = values.len();
        let k = values.first().map_or(0, |r| r.len());
        if values.iter().any(|r| r.len() != k) {
            return Err(invalid("covariate rows have unequal lengths"));
        }
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(invalid("non-finite covariate value"));
        }
        if k > 0 && k >= n {
            return Err(invalid(format!("{} covariates for {} individuals", k, n)));
        }
        Ok(CovariateMatrix { values })
    }

    /// K = 0 (intercept-only designs).
    pub fn empty(n: usize) -> Self {
        CovariateMatrix {
            values: vec![Vec::new(); n],
        }
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn k(&self) -> usize {
        self.values.first().map_or(0, |r| r.len())
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }
}

/// Divide one individual's counts by their library size.
pub fn standardize_counts(counts: &[u32], library_size: u64) -> Result<Vec<f64>> {
    if library_size == 0 {
        return Err(invalid("zero library size"));
    }
    let s = library_size as f64;
    Ok(counts.iter().map(|&c| c as f64 / s).collect())
}

/// Standardized count signals, one per individual.
pub fn standardize(site: &SiteData) -> Result<Vec<Signal>> {
    site.counts
        .iter()
        .zip(&site.library_sizes)
        .map(|(row, &s)| Signal::new(standardize_counts(row, s)?))
        .collect()
}

/// Average ranks (1-based; ties get the mean of their rank run).
fn average_ranks(v: &[f64]) -> Result<Vec<f64>> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(invalid("non-finite value in rank input"));
    }
    let n = v.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap());
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = avg;
        }
        i = j + 1;
    }
    Ok(ranks)
}

/// Standard-normal scores for Blom plotting positions. Ranks can be
/// half-integers (tied pairs), so the table is indexed by `2*rank - 2`.
struct BlomTable {
    scores: Vec<f64>,
}

impl BlomTable {
    fn new(n: usize) -> Self {
        let normal = Normal::new(0.0, 1.0).unwrap();
        let denom = n as f64 + 0.25;
        let scores = (0..2 * n - 1)
            .map(|k| {
                let rank = 1.0 + k as f64 / 2.0;
                normal.inverse_cdf((rank - 0.375) / denom)
            })
            .collect();
        BlomTable { scores }
    }

    fn score(&self, rank: f64) -> f64 {
        self.scores[(2.0 * rank) as usize - 2]
    }
}

fn quantile_normalize_with(v: &[f64], table: &BlomTable) -> Result<Vec<f64>> {
    if v.len() < 3 {
        return Err(invalid(format!(
            "quantile transform needs N >= 3, got {}",
            v.len()
        )));
    }
    let ranks = average_ranks(v)?;
    if ranks.iter().all(|&r| r == ranks[0]) {
        return Err(Error::DegenerateInput(
            "constant vector has no quantile transform".into(),
        ));
    }
    Ok(ranks.iter().map(|&r| table.score(r)).collect())
}

/// Map a sample vector to standard-normal quantiles via Blom plotting
/// positions `(rank - 0.375) / (N + 0.25)`, averaging ranks over ties.
pub fn quantile_normalize(v: &[f64]) -> Result<Vec<f64>> {
    if v.len() < 3 {
        return Err(invalid(format!(
            "quantile transform needs N >= 3, got {}",
            v.len()
        )));
    }
    quantile_normalize_with(v, &BlomTable::new(v.len()))
}

/// OLS residualizer for the fixed design `[1, C]`, reused across coefficients.
pub(crate) struct Residualizer {
    q: DMatrix<f64>,
}

impl Residualizer {
    pub(crate) fn new(covariates: &CovariateMatrix) -> Result<Self> {
        let n = covariates.n();
        let k = covariates.k();
        if n < k + 2 {
            return Err(invalid(format!(
                "need at least K+2 individuals (N={}, K={})",
                n, k
            )));
        }
        let mut x = DMatrix::zeros(n, k + 1);
        for i in 0..n {
            x[(i, 0)] = 1.0;
            for c in 0..k {
                x[(i, c + 1)] = covariates.values[i][c];
            }
        }
        let qr = x.qr();
        let r = qr.r();
        let max_diag = (0..k + 1)
            .map(|i| r[(i, i)].abs())
            .fold(0.0f64, f64::max);
        if (0..k + 1).any(|i| r[(i, i)].abs() < 1e-10 * max_diag.max(1.0)) {
            return Err(invalid("rank-deficient design matrix [1, C]"));
        }
        Ok(Residualizer { q: qr.q() })
    }

    /// `v - Q Q' v`, orthogonal to the intercept and every covariate column.
    pub(crate) fn residualize(&self, v: &[f64]) -> Vec<f64> {
        let n = v.len();
        let k = self.q.ncols();
        let mut proj = vec![0.0; k];
        for c in 0..k {
            let mut acc = 0.0;
            for i in 0..n {
                acc += self.q[(i, c)] * v[i];
            }
            proj[c] = acc;
        }
        let mut out = v.to_vec();
        for c in 0..k {
            let p = proj[c];
            for i in 0..n {
                out[i] -= self.q[(i, c)] * p;
            }
        }
        out
    }
}

/// Residuals of the OLS regression of `v` on `[1, C]`.
pub fn regress_out(v: &[f64], covariates: &CovariateMatrix) -> Result<Vec<f64>> {
    if v.len() != covariates.n() {
        return Err(invalid(format!(
            "vector length {} does not match {} covariate rows",
            v.len(),
            covariates.n()
        )));
    }
    Ok(Residualizer::new(covariates)?.residualize(v))
}

/// Quantile transform, residualize on covariates, quantile transform again.
///
/// This is the per-coefficient normalization applied to every unmasked
/// coefficient (and to window phenotypes in the baseline method).
pub fn coefficient_pipeline(v: &[f64], covariates: &CovariateMatrix) -> Result<Vec<f64>> {
    let table = BlomTable::new(v.len());
    let res = Residualizer::new(covariates)?;
    pipeline_with(v, &res, &table)
}

fn pipeline_with(v: &[f64], res: &Residualizer, table: &BlomTable) -> Result<Vec<f64>> {
    let first = quantile_normalize_with(v, table)?;
    let resid = res.residualize(&first);
    quantile_normalize_with(&resid, table)
}

/// Low-count mask over the flat coefficient layout: a coefficient is masked
/// when the raw counts in its support, summed over individuals, fall strictly
/// below `threshold_per_individual * N`.
pub fn low_count_mask(site: &SiteData, threshold_per_individual: f64) -> Vec<bool> {
    let b = site.b();
    let n = site.n();
    // prefix[b] over the pooled counts; the mask only needs the pooled total.
    let mut prefix = vec![0u64; b + 1];
    for i in 0..b {
        let col: u64 = site.counts.iter().map(|row| row[i] as u64).sum();
        prefix[i + 1] = prefix[i] + col;
    }
    let cutoff = threshold_per_individual * n as f64;
    (0..b)
        .map(|flat| {
            let idx = CoeffIndex::from_flat(flat);
            let (lo, hi) = wc_support(idx.scale, idx.location, b).expect("valid flat index");
            let total = prefix[hi] - prefix[lo - 1];
            (total as f64) < cutoff
        })
        .collect()
}

/// Normalized per-coefficient sample vectors for one site.
///
/// `z[flat]` is `None` exactly when `mask[flat]` is true; `raw_wc[flat]` keeps
/// the untransformed coefficients for diagnostics and effect rescaling.
#[derive(Clone, Debug)]
pub struct TransformedSite {
    j: u32,
    n: usize,
    pub z: Vec<Option<Vec<f64>>>,
    pub mask: Vec<bool>,
    pub raw_wc: Vec<Vec<f64>>,
}

impl TransformedSite {
    pub fn j(&self) -> u32 {
        self.j
    }

    pub fn b(&self) -> usize {
        1 << self.j
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Flat indices of coefficients that carry z values.
    pub fn active(&self) -> impl Iterator<Item = (usize, &[f64])> {
        self.z
            .iter()
            .enumerate()
            .filter_map(|(i, z)| z.as_deref().map(|v| (i, v)))
    }

    /// Sample standard deviation of the raw coefficients at `flat`.
    pub fn raw_wc_sd(&self, flat: usize) -> f64 {
        let v = &self.raw_wc[flat];
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    }
}

/// Options for [`prepare_site`].
#[derive(Clone, Debug)]
pub struct PrepareOptions {
    pub low_count_threshold: f64,
}

impl Default for PrepareOptions {
    fn default() -> Self {
        PrepareOptions {
            low_count_threshold: DEFAULT_LOW_COUNT_THRESHOLD,
        }
    }
}

/// Run the full normalization pipeline for one site.
pub fn prepare_site(site: &SiteData, covariates: &CovariateMatrix) -> Result<TransformedSite> {
    prepare_site_with(site, covariates, &PrepareOptions::default())
}

pub fn prepare_site_with(
    site: &SiteData,
    covariates: &CovariateMatrix,
    opts: &PrepareOptions,
) -> Result<TransformedSite> {
    let n = site.n();
    let b = site.b();
    if n < 3 {
        return Err(invalid(format!("need N >= 3 individuals, got {}", n)));
    }
    if covariates.n() != n {
        return Err(invalid(format!(
            "covariate rows ({}) do not match individuals ({})",
            covariates.n(),
            n
        )));
    }

    let signals = standardize(site)?;
    let mut coeff_buf = vec![0.0; b];
    // raw_wc[flat][individual]
    let mut raw_wc = vec![vec![0.0; n]; b];
    for (i, sig) in signals.iter().enumerate() {
        dwt_into(sig.values(), &mut coeff_buf);
        for (flat, &c) in coeff_buf.iter().enumerate() {
            raw_wc[flat][i] = c;
        }
    }

    let mut mask = low_count_mask(site, opts.low_count_threshold);
    let table = BlomTable::new(n);
    let res = Residualizer::new(covariates)?;

    let mut z: Vec<Option<Vec<f64>>> = vec![None; b];
    for flat in 0..b {
        if mask[flat] {
            continue;
        }
        match pipeline_with(&raw_wc[flat], &res, &table) {
            Ok(v) => z[flat] = Some(v),
            Err(Error::DegenerateInput(_)) => {
                let idx = CoeffIndex::from_flat(flat);
                log::warn!(
                    "masking constant coefficient (s={}, l={})",
                    idx.scale,
                    idx.location
                );
                mask[flat] = true;
            }
            Err(e) => return Err(e),
        }
    }

    Ok(TransformedSite {
        j: site.j(),
        n,
        z,
        mask,
        raw_wc,
    })
}
