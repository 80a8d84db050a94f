//! Multi-variant association testing per site: the max-statistic over
//! variants, permutation p-values with shared per-replicate permutations, and
//! q-values across sites.
//!
//! Permutations are generated sequentially from a per-site stream (derived
//! from the global seed and the site id) in fixed-size batches; only the
//! batch evaluation is parallel, so results never depend on thread count.

use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use crate::bf::{DosageContext, EffectPriorGrid, Genotype};
use crate::error::{invalid, Error, Result};
use crate::hiermodel::{em_core, EmOptions};
use crate::preprocess::TransformedSite;
use crate::seeds::derive_seed_str;
use crate::wavelet::CoeffIndex;

/// Permutations per batch between early-stop checks. Fixed so that adaptive
/// stopping is reproducible across worker counts.
const PERM_BATCH: usize = 100;

/// Scan-wide settings.
#[derive(Clone, Debug)]
pub struct ScanConfig {
    /// Base-pair radius around a site within which variants are tested.
    pub cis_window: u64,
    /// Maximum number of permutations per site.
    pub n_permutations: usize,
    pub seed: u64,
    /// Stop permuting once this many replicates reach the observed statistic.
    pub adaptive_stop_exceedances: Option<usize>,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            cis_window: 2000,
            n_permutations: 10_000,
            seed: 0,
            adaptive_stop_exceedances: Some(100),
        }
    }
}

impl ScanConfig {
    fn validate(&self) -> Result<()> {
        if self.n_permutations == 0 {
            return Err(invalid("need at least one permutation"));
        }
        if self.adaptive_stop_exceedances == Some(0) {
            return Err(invalid("adaptive stop threshold must be positive"));
        }
        Ok(())
    }
}

/// Per-variant statistic entry.
#[derive(Clone, Debug)]
pub struct VariantLambda {
    pub id: String,
    pub position: u64,
    pub log_lambda: f64,
}

/// Observed max statistic with its argmax and the full per-variant table.
#[derive(Clone, Debug)]
pub struct LambdaMax {
    pub log_lambda_max: f64,
    pub best_id: String,
    pub best_position: u64,
    pub table: Vec<VariantLambda>,
}

/// One site's scan outcome.
#[derive(Clone, Debug)]
pub struct SiteResult {
    pub site_id: String,
    pub log_lambda_max: f64,
    pub best_variant: String,
    pub best_position: u64,
    pub p_value: f64,
    pub n_perms_used: usize,
    pub per_variant: Vec<VariantLambda>,
}

/// Precomputed per-site state shared by every statistic evaluation.
struct SiteKernel {
    n: usize,
    n_groups: usize,
    /// scale-group index per active coefficient
    group_of: Vec<usize>,
    /// per active coefficient: sum and sum of squares of z
    sz: Vec<f64>,
    szz: Vec<f64>,
    /// row-major active x N matrix of z values
    z_rows: Vec<f64>,
    em: EmOptions,
}

struct EvalBuf {
    dosages: Vec<f64>,
    groups: Vec<Vec<f64>>,
}

impl SiteKernel {
    fn new(site: &TransformedSite) -> Self {
        let n = site.n();
        let n_groups = site.j() as usize + 1;
        let mut group_of = Vec::new();
        let mut sz = Vec::new();
        let mut szz = Vec::new();
        let mut z_rows = Vec::new();
        for (flat, z) in site.active() {
            group_of.push(CoeffIndex::from_flat(flat).scale as usize);
            sz.push(z.iter().sum());
            szz.push(z.iter().map(|v| v * v).sum());
            z_rows.extend_from_slice(z);
        }
        SiteKernel {
            n,
            n_groups,
            group_of,
            sz,
            szz,
            z_rows,
            // few warm-up EM sweeps suffice: the per-scale Newton polish in
            // the fitter lands on the same (unique) maximizer regardless
            em: EmOptions {
                tol: 1e-8,
                max_iter: 8,
            },
        }
    }

    fn buf(&self) -> EvalBuf {
        EvalBuf {
            dosages: vec![0.0; self.n],
            groups: vec![Vec::new(); self.n_groups],
        }
    }

    /// Log Lambda-hat for one (possibly permuted) dosage vector.
    fn eval(&self, ctx: &DosageContext, dosages: &[f64], buf: &mut EvalBuf) -> f64 {
        for g in &mut buf.groups {
            g.clear();
        }
        for (c, &group) in self.group_of.iter().enumerate() {
            let row = &self.z_rows[c * self.n..(c + 1) * self.n];
            let sgz: f64 = row.iter().zip(dosages).map(|(a, b)| a * b).sum();
            // degenerate coefficients carry no information: BF = 1
            let lbf = ctx
                .averaged_log_bf(self.sz[c], self.szz[c], sgz)
                .unwrap_or(0.0);
            buf.groups[group].push(lbf);
        }
        em_core(&buf.groups, &self.em, |_| {}).log_lambda
    }
}

/// Variants with nonzero dosage variance, with their precomputed contexts.
fn usable_variants<'a>(
    site: &TransformedSite,
    variants: &'a [Genotype],
    grid: &EffectPriorGrid,
) -> Result<Vec<(&'a Genotype, DosageContext)>> {
    let mut out = Vec::new();
    for v in variants {
        if v.n() != site.n() {
            return Err(invalid(format!(
                "variant {} has {} dosages for {} individuals",
                v.id,
                v.n(),
                site.n()
            )));
        }
        if v.is_constant() {
            log::warn!("variant {} is constant across individuals; skipped", v.id);
            continue;
        }
        out.push((v, DosageContext::new(v.dosages(), grid)?));
    }
    if out.is_empty() {
        return Err(Error::NoTestableVariant);
    }
    Ok(out)
}

fn better(candidate: &VariantLambda, best: &VariantLambda) -> bool {
    if candidate.log_lambda != best.log_lambda {
        return candidate.log_lambda > best.log_lambda;
    }
    (candidate.position, &candidate.id) < (best.position, &best.id)
}

/// Observed max statistic over the testable variants (ties resolved toward
/// the lowest position, then the lexicographically smallest id).
pub fn lambda_max(
    site: &TransformedSite,
    variants: &[Genotype],
    grid: &EffectPriorGrid,
) -> Result<LambdaMax> {
    let usable = usable_variants(site, variants, grid)?;
    let kernel = SiteKernel::new(site);
    let mut buf = kernel.buf();
    let mut table = Vec::with_capacity(usable.len());
    for (v, ctx) in &usable {
        let ll = kernel.eval(ctx, v.dosages(), &mut buf);
        table.push(VariantLambda {
            id: v.id.clone(),
            position: v.position,
            log_lambda: ll,
        });
    }
    let mut best = table[0].clone();
    for cand in &table[1..] {
        if better(cand, &best) {
            best = cand.clone();
        }
    }
    Ok(LambdaMax {
        log_lambda_max: best.log_lambda,
        best_id: best.id,
        best_position: best.position,
        table,
    })
}

/// Permutation p-value for the max statistic. Every variant within a
/// replicate sees the same permutation of individuals.
pub fn permutation_pvalue(
    site_id: &str,
    site: &TransformedSite,
    variants: &[Genotype],
    config: &ScanConfig,
    grid: &EffectPriorGrid,
) -> Result<SiteResult> {
    config.validate()?;
    let usable = usable_variants(site, variants, grid)?;
    let kernel = SiteKernel::new(site);
    let observed = lambda_max(site, variants, grid)?;

    let (exceed, used) = count_exceedances(
        derive_seed_str(config.seed, site_id),
        site.n(),
        config.n_permutations,
        config.adaptive_stop_exceedances,
        observed.log_lambda_max,
        || kernel.buf(),
        |p, buf| {
            let mut max = f64::NEG_INFINITY;
            for (v, ctx) in &usable {
                let d = v.dosages();
                buf.dosages.clear();
                buf.dosages.extend(p.iter().map(|&i| d[i as usize]));
                let dosages = std::mem::take(&mut buf.dosages);
                let ll = kernel.eval(ctx, &dosages, buf);
                buf.dosages = dosages;
                if ll > max {
                    max = ll;
                }
            }
            max
        },
    );

    Ok(SiteResult {
        site_id: site_id.to_string(),
        log_lambda_max: observed.log_lambda_max,
        best_variant: observed.best_id,
        best_position: observed.best_position,
        p_value: (exceed + 1) as f64 / (used + 1) as f64,
        n_perms_used: used,
        per_variant: observed.table,
    })
}

/// Shared permutation engine: draws permutations sequentially from the seeded
/// stream in fixed-size batches, evaluates each batch in parallel, and stops
/// early once `adaptive` exceedances have accumulated. Returns (exceedances,
/// permutations used). Both the wavelet scan and the window baseline run on
/// this engine, so a given (seed, site id) sees identical permutations under
/// either method.
pub(crate) fn count_exceedances<B: Send>(
    site_seed: u64,
    n: usize,
    m: usize,
    adaptive: Option<usize>,
    observed: f64,
    make_buf: impl Fn() -> B + Sync,
    eval: impl Fn(&[u32], &mut B) -> f64 + Sync,
) -> (usize, usize) {
    let mut rng = ChaCha12Rng::seed_from_u64(site_seed);
    let mut exceed = 0usize;
    let mut used = 0usize;
    let mut perm: Vec<u32> = Vec::with_capacity(n);
    while used < m {
        let batch = PERM_BATCH.min(m - used);
        let perms: Vec<Vec<u32>> = (0..batch)
            .map(|_| {
                perm.clear();
                perm.extend(0..n as u32);
                perm.shuffle(&mut rng);
                perm.clone()
            })
            .collect();
        exceed += perms
            .par_iter()
            .map_init(&make_buf, |buf, p| usize::from(eval(p, buf) >= observed))
            .sum::<usize>();
        used += batch;
        if let Some(stop) = adaptive {
            if exceed >= stop {
                break;
            }
        }
    }
    (exceed, used)
}

fn validate_pvalues(p_values: &[f64]) -> Result<()> {
    if p_values.is_empty() {
        return Err(invalid("no p-values"));
    }
    if p_values.iter().any(|p| !(*p > 0.0 && *p <= 1.0)) {
        return Err(invalid("p-values must lie in (0, 1]"));
    }
    Ok(())
}

fn qvalues_with_pi0(p_values: &[f64], pi0: f64) -> Vec<f64> {
    let n = p_values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| p_values[a].partial_cmp(&p_values[b]).unwrap());
    let mut q = vec![0.0; n];
    let mut running = f64::INFINITY;
    for rank in (1..=n).rev() {
        let i = order[rank - 1];
        let raw = pi0 * p_values[i] * n as f64 / rank as f64;
        running = running.min(raw.min(1.0));
        q[i] = running;
    }
    q
}

/// Storey q-values with the null proportion estimated at lambda = 0.5.
pub fn estimate_fdr(p_values: &[f64]) -> Result<Vec<f64>> {
    validate_pvalues(p_values)?;
    let n = p_values.len() as f64;
    let above = p_values.iter().filter(|&&p| p > 0.5).count() as f64;
    let pi0 = (above / (0.5 * n)).min(1.0);
    Ok(qvalues_with_pi0(p_values, pi0))
}

/// Benjamini-Hochberg adjusted p-values (Storey with pi0 fixed at 1).
pub fn estimate_fdr_bh(p_values: &[f64]) -> Result<Vec<f64>> {
    validate_pvalues(p_values)?;
    Ok(qvalues_with_pi0(p_values, 1.0))
}
