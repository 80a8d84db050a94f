//! Limiting Bayes factors for single-coefficient association.
//!
//! The model is a normal linear regression of one coefficient's sample vector
//! on genotype dosage, with conjugate priors in the vague limit (flat
//! intercept prior, inverse-gamma shape/rate going to zero). In that limit
//! the Bayes factor reduces to
//!
//! ```text
//! BF = (1 + sigma_b^2 * Sgg)^(-1/2) * (M0 / M1)^(N/2)
//! ```
//!
//! where `Sgg` is the centered sum of squares of the dosages, `M0` the null
//! residual sum of squares and `M1` its counterpart under the ridge implied by
//! the effect prior. Everything is computed in log space; the `(M0/M1)^(N/2)`
//! power is the overflow risk.

use crate::error::{invalid, Error, Result};
use crate::preprocess::TransformedSite;

/// Genotype dosages in `[0, 2]` for one variant.
#[derive(Clone, Debug)]
pub struct Genotype {
    pub id: String,
    pub position: u64,
    dosages: Vec<f64>,
}

impl Genotype {
    pub fn new(id: impl Into<String>, position: u64, dosages: Vec<f64>) -> Result<Self> {
        if dosages.iter().any(|d| !d.is_finite() || *d < 0.0 || *d > 2.0) {
            return Err(invalid("dosages must be finite and in [0, 2]"));
        }
        Ok(Genotype {
            id: id.into(),
            position,
            dosages,
        })
    }

    pub fn n(&self) -> usize {
        self.dosages.len()
    }

    pub fn dosages(&self) -> &[f64] {
        &self.dosages
    }

    pub fn is_constant(&self) -> bool {
        self.dosages.windows(2).all(|w| w[0] == w[1])
    }
}

/// Discrete grid of effect-size prior standard deviations.
#[derive(Clone, Debug)]
pub struct EffectPriorGrid {
    sigma_betas: Vec<f64>,
}

impl EffectPriorGrid {
    pub fn new(sigma_betas: Vec<f64>) -> Result<Self> {
        if sigma_betas.is_empty() {
            return Err(invalid("effect prior grid is empty"));
        }
        if sigma_betas.iter().any(|s| !s.is_finite() || *s <= 0.0) {
            return Err(invalid("effect prior grid values must be positive"));
        }
        Ok(EffectPriorGrid { sigma_betas })
    }

    pub fn values(&self) -> &[f64] {
        &self.sigma_betas
    }

    pub fn len(&self) -> usize {
        self.sigma_betas.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

impl Default for EffectPriorGrid {
    fn default() -> Self {
        EffectPriorGrid {
            sigma_betas: vec![0.05, 0.1, 0.2, 0.4],
        }
    }
}

pub(crate) struct SigmaPre {
    /// sgg + 1/sigma_beta^2
    pub t: f64,
    /// det of the posterior precision: n*t - sg^2
    pub det_inv: f64,
    /// -0.5 * ln(1 + sigma_beta^2 * Sgg)
    pub log_prefactor: f64,
}

/// Per-dosage-vector quantities that do not depend on the phenotype and are
/// invariant under permutation of individuals, so a permutation scan computes
/// them once per variant.
pub(crate) struct DosageContext {
    pub n: f64,
    pub sg: f64,
    pub constant: bool,
    pub grid: Vec<SigmaPre>,
}

impl DosageContext {
    pub(crate) fn new(dosages: &[f64], grid: &EffectPriorGrid) -> Result<Self> {
        let n = dosages.len();
        if n < 3 {
            return Err(invalid(format!("need N >= 3 individuals, got {}", n)));
        }
        let nf = n as f64;
        let sg: f64 = dosages.iter().sum();
        let sgg: f64 = dosages.iter().map(|g| g * g).sum();
        let sgg_centered = (sgg - sg * sg / nf).max(0.0);
        let constant = dosages.windows(2).all(|w| w[0] == w[1]);
        let grid = grid
            .values()
            .iter()
            .map(|&s| {
                let inv_s2 = 1.0 / (s * s);
                SigmaPre {
                    t: sgg + inv_s2,
                    det_inv: nf * (sgg + inv_s2) - sg * sg,
                    log_prefactor: -0.5 * (s * s * sgg_centered).ln_1p(),
                }
            })
            .collect();
        Ok(DosageContext {
            n: nf,
            sg,
            constant,
            grid,
        })
    }

    /// Average the per-sigma Bayes factors over the grid (uniform prior), in
    /// log space, given the phenotype sums for one coefficient.
    pub(crate) fn averaged_log_bf(&self, sz: f64, szz: f64, sgz: f64) -> Result<f64> {
        // Constant dosage: the effect is unidentifiable and the null and
        // alternative marginal likelihoods cancel symbolically. Return the
        // exact answer rather than the round-off of the general formula.
        if self.constant {
            return Ok(0.0);
        }
        let m0 = szz - sz * sz / self.n;
        if m0 <= 0.0 {
            return Err(Error::NumericalDegeneracy("null RSS not positive".into()));
        }
        let log_m0 = m0.ln();
        // streaming log-sum-exp over the grid
        let mut max = f64::NEG_INFINITY;
        let mut sum = 0.0;
        for pre in &self.grid {
            let quad = (sz * sz * pre.t - 2.0 * sz * sgz * self.sg + self.n * sgz * sgz)
                / pre.det_inv;
            let m1 = szz - quad;
            if m1 <= 0.0 {
                return Err(Error::NumericalDegeneracy(
                    "alternative RSS not positive".into(),
                ));
            }
            let lbf = pre.log_prefactor + 0.5 * self.n * (log_m0 - m1.ln());
            if lbf > max {
                sum = sum * (max - lbf).exp() + 1.0;
                max = lbf;
            } else {
                sum += (lbf - max).exp();
            }
        }
        Ok(max + sum.ln() - (self.grid.len() as f64).ln())
    }
}

fn phenotype_sums(z: &[f64], dosages: &[f64]) -> Result<(f64, f64, f64)> {
    if z.len() != dosages.len() {
        return Err(invalid(format!(
            "phenotype length {} does not match {} dosages",
            z.len(),
            dosages.len()
        )));
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(invalid("non-finite phenotype value"));
    }
    let sz: f64 = z.iter().sum();
    let szz: f64 = z.iter().map(|v| v * v).sum();
    let sgz: f64 = z.iter().zip(dosages).map(|(a, b)| a * b).sum();
    Ok((sz, szz, sgz))
}

/// Log Bayes factor for one coefficient at a single prior scale.
pub fn single_log_bf(z: &[f64], dosages: &[f64], sigma_beta: f64) -> Result<f64> {
    let grid = EffectPriorGrid::new(vec![sigma_beta])?;
    let ctx = DosageContext::new(dosages, &grid)?;
    let (sz, szz, sgz) = phenotype_sums(z, dosages)?;
    ctx.averaged_log_bf(sz, szz, sgz)
}

/// Bayes factor for one coefficient at a single prior scale.
pub fn single_bf(z: &[f64], g: &Genotype, sigma_beta: f64) -> Result<f64> {
    Ok(single_log_bf(z, g.dosages(), sigma_beta)?.exp())
}

/// Log of the grid-averaged Bayes factor (uniform prior over the grid).
pub fn averaged_log_bf(z: &[f64], dosages: &[f64], grid: &EffectPriorGrid) -> Result<f64> {
    let ctx = DosageContext::new(dosages, grid)?;
    let (sz, szz, sgz) = phenotype_sums(z, dosages)?;
    ctx.averaged_log_bf(sz, szz, sgz)
}

/// Grid-averaged Bayes factor.
pub fn averaged_bf(z: &[f64], g: &Genotype, grid: &EffectPriorGrid) -> Result<f64> {
    Ok(averaged_log_bf(z, g.dosages(), grid)?.exp())
}

/// Per-coefficient log Bayes factors for a whole site, flat layout.
///
/// Masked coefficients carry `log BF = 0` (BF = 1: no information).
#[derive(Clone, Debug)]
pub struct SiteBfs {
    j: u32,
    pub log_bf: Vec<f64>,
}

impl SiteBfs {
    pub fn new(j: u32, log_bf: Vec<f64>) -> Result<Self> {
        if log_bf.len() != 1 << j {
            return Err(invalid(format!(
                "{} coefficients for J={}",
                log_bf.len(),
                j
            )));
        }
        Ok(SiteBfs { j, log_bf })
    }

    pub fn j(&self) -> u32 {
        self.j
    }

    /// Log BFs grouped as one vector per scale 0..=J.
    pub fn by_scale(&self) -> Vec<Vec<f64>> {
        group_by_scale(self.j, &self.log_bf)
    }
}

/// Split a flat coefficient vector into per-scale groups (scales 0..=J).
pub fn group_by_scale(j: u32, flat: &[f64]) -> Vec<Vec<f64>> {
    debug_assert_eq!(flat.len(), 1 << j);
    let mut out = Vec::with_capacity(j as usize + 1);
    out.push(vec![flat[0]]);
    out.push(vec![flat[1]]);
    for s in 2..=j {
        let start = 1usize << (s - 1);
        out.push(flat[start..2 * start].to_vec());
    }
    out
}

/// Grid-averaged log BFs for every coefficient of a prepared site.
///
/// Numerical degeneracy on one coefficient downgrades it to BF = 1 with a
/// warning; genuinely invalid inputs still fail.
pub fn site_bfs(site: &TransformedSite, g: &Genotype, grid: &EffectPriorGrid) -> Result<SiteBfs> {
    if g.n() != site.n() {
        return Err(invalid(format!(
            "{} dosages for {} individuals",
            g.n(),
            site.n()
        )));
    }
    let ctx = DosageContext::new(g.dosages(), grid)?;
    let mut log_bf = vec![0.0; site.b()];
    for (flat, z) in site.active() {
        let (sz, szz, sgz) = phenotype_sums(z, g.dosages())?;
        match ctx.averaged_log_bf(sz, szz, sgz) {
            Ok(v) => log_bf[flat] = v,
            Err(Error::NumericalDegeneracy(msg)) => {
                log::warn!(
                    "coefficient {}: {} for variant {}; using BF = 1",
                    flat,
                    msg,
                    g.id
                );
            }
            Err(e) => return Err(e),
        }
    }
    SiteBfs::new(site.j(), log_bf)
}
