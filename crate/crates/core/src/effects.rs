//! Posterior effect-size estimation.
//!
//! Per coefficient the effect posterior is a spike at zero (weight `1 - phi`)
//! plus a grid mixture of three-parameter t distributions, one per prior
//! scale, weighted by that scale's Bayes factor. Mapping the per-coefficient
//! means and variances through the transpose of the DWT matrix gives the
//! pointwise posterior mean and variance of the per-base effect.

use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StudentT};

use crate::bf::{EffectPriorGrid, Genotype};
use crate::error::{invalid, Result};
use crate::hiermodel::ScaleMixtureFit;
use crate::preprocess::TransformedSite;
use crate::wavelet::{idwt_into, wc_support, CoeffIndex, DwtMatrix};

/// Three-parameter t posterior of a slab effect: location `a`, squared scale
/// `b`, degrees of freedom `nu` (= N).
#[derive(Clone, Copy, Debug)]
pub struct SlabPosterior {
    pub a: f64,
    pub b: f64,
    pub nu: f64,
}

impl SlabPosterior {
    pub fn mean(&self) -> f64 {
        self.a
    }

    /// Defined for nu > 2.
    pub fn variance(&self) -> f64 {
        self.b * self.nu / (self.nu - 2.0)
    }
}

/// One grid component of the slab mixture.
#[derive(Clone, Copy, Debug)]
pub struct SlabComponent {
    pub weight: f64,
    pub slab: SlabPosterior,
}

/// Effect posterior for one coefficient.
#[derive(Clone, Debug)]
pub struct CoeffPosterior {
    /// Probability the coefficient carries an effect; 0 for masked ones.
    pub phi: f64,
    pub components: Vec<SlabComponent>,
    pub mean_beta: f64,
    pub var_beta: f64,
}

impl CoeffPosterior {
    fn null() -> Self {
        CoeffPosterior {
            phi: 0.0,
            components: Vec::new(),
            mean_beta: 0.0,
            var_beta: 0.0,
        }
    }
}

/// Slab posterior of the effect on one coefficient at one prior scale.
pub fn slab_posterior(z: &[f64], dosages: &[f64], sigma_beta: f64) -> Result<SlabPosterior> {
    let n = z.len();
    if n <= 2 {
        return Err(invalid(format!(
            "effect posterior needs N > 2 individuals, got {}",
            n
        )));
    }
    if n != dosages.len() {
        return Err(invalid(format!(
            "phenotype length {} does not match {} dosages",
            n,
            dosages.len()
        )));
    }
    if !(sigma_beta.is_finite() && sigma_beta > 0.0) {
        return Err(invalid("sigma_beta must be positive"));
    }
    let nf = n as f64;
    let sz: f64 = z.iter().sum();
    let szz: f64 = z.iter().map(|v| v * v).sum();
    let m0 = szz - sz * sz / nf;
    if dosages.windows(2).all(|w| w[0] == w[1]) {
        // no identifiable direction: the location is exactly zero and the
        // scale collapses to the prior around the null fit
        return Ok(SlabPosterior {
            a: 0.0,
            b: sigma_beta * sigma_beta * m0 / nf,
            nu: nf,
        });
    }
    let sg: f64 = dosages.iter().sum();
    let sgg: f64 = dosages.iter().map(|g| g * g).sum();
    let sgz: f64 = z.iter().zip(dosages).map(|(a, b)| a * b).sum();
    let t = sgg + 1.0 / (sigma_beta * sigma_beta);
    let det_inv = nf * t - sg * sg;
    let quad = (sz * sz * t - 2.0 * sz * sgz * sg + nf * sgz * sgz) / det_inv;
    let m1 = szz - quad;
    Ok(SlabPosterior {
        a: (nf * sgz - sg * sz) / det_inv,
        b: m1 / det_inv,
        nu: nf,
    })
}

/// Normalize log weights to a probability vector.
fn normalize_log_weights(logs: &[f64]) -> Vec<f64> {
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let unnorm: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = unnorm.iter().sum();
    unnorm.into_iter().map(|w| w / total).collect()
}

/// Per-coefficient effect posteriors for a fitted site.
///
/// `fit` must come from `site_bfs` + `em_fit` on this same site and genotype;
/// inclusion weights are taken from it, with masked coefficients forced to
/// `phi = 0` so they contribute no effect.
pub fn mixture_posterior(
    site: &TransformedSite,
    g: &Genotype,
    fit: &ScaleMixtureFit,
    grid: &EffectPriorGrid,
) -> Result<Vec<CoeffPosterior>> {
    let b = site.b();
    if g.n() != site.n() {
        return Err(invalid(format!(
            "{} dosages for {} individuals",
            g.n(),
            site.n()
        )));
    }
    let phi_flat = fit.phi_flat();
    if phi_flat.len() != b {
        return Err(invalid(format!(
            "fit has {} coefficients, site has {}",
            phi_flat.len(),
            b
        )));
    }
    let mut out = vec![CoeffPosterior::null(); b];
    for (flat, z) in site.active() {
        let phi = phi_flat[flat];
        let mut log_w = Vec::with_capacity(grid.len());
        let mut slabs = Vec::with_capacity(grid.len());
        for &sigma in grid.values() {
            log_w.push(crate::bf::single_log_bf(z, g.dosages(), sigma)?);
            slabs.push(slab_posterior(z, g.dosages(), sigma)?);
        }
        let weights = normalize_log_weights(&log_w);
        let mean: f64 = weights
            .iter()
            .zip(&slabs)
            .map(|(w, s)| w * s.mean())
            .sum::<f64>()
            * phi;
        let second_moment: f64 = weights
            .iter()
            .zip(&slabs)
            .map(|(w, s)| w * (s.variance() + s.a * s.a))
            .sum();
        out[flat] = CoeffPosterior {
            phi,
            components: weights
                .iter()
                .zip(&slabs)
                .map(|(&weight, &slab)| SlabComponent { weight, slab })
                .collect(),
            mean_beta: mean,
            var_beta: phi * second_moment - mean * mean,
        };
    }
    Ok(out)
}

/// Pointwise posterior mean and variance of the per-base effect, from the
/// per-coefficient posteriors and the transform matrix.
pub fn effect_in_data_space(
    coeffs: &[CoeffPosterior],
    w: &DwtMatrix,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let b = w.b();
    if coeffs.len() != b {
        return Err(invalid(format!(
            "{} coefficient posteriors for B={}",
            coeffs.len(),
            b
        )));
    }
    let mut mean = vec![0.0; b];
    let mut var = vec![0.0; b];
    for (flat, post) in coeffs.iter().enumerate() {
        if post.mean_beta == 0.0 && post.var_beta == 0.0 {
            continue;
        }
        let idx = CoeffIndex::from_flat(flat);
        let (lo, hi) = wc_support(idx.scale, idx.location, b)?;
        let mag = w.magnitude(idx.scale);
        let mag2 = mag * mag;
        if idx.scale == 0 {
            for base in lo - 1..hi {
                mean[base] += mag * post.mean_beta;
                var[base] += mag2 * post.var_beta;
            }
        } else {
            let mid = lo + (hi - lo) / 2;
            for base in lo - 1..mid {
                mean[base] += mag * post.mean_beta;
                var[base] += mag2 * post.var_beta;
            }
            for base in mid..hi {
                mean[base] -= mag * post.mean_beta;
                var[base] += mag2 * post.var_beta;
            }
        }
    }
    Ok((mean, var))
}

/// Draw per-base effect curves from the posterior: spike-or-slab per
/// coefficient, grid component by weight, then the inverse transform.
pub fn sample_effect(
    coeffs: &[CoeffPosterior],
    n_samples: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let b = coeffs.len();
    if b < 2 || !b.is_power_of_two() {
        return Err(invalid(format!("{} coefficients is not 2^J", b)));
    }
    let active: Vec<(usize, &CoeffPosterior)> = coeffs
        .iter()
        .enumerate()
        .filter(|(_, c)| c.phi > 0.0)
        .collect();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut beta = vec![0.0; b];
    let mut signal = vec![0.0; b];
    let mut out = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        beta.fill(0.0);
        for (flat, post) in &active {
            if rng.random::<f64>() >= post.phi {
                continue;
            }
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut chosen = post.components[post.components.len() - 1];
            for comp in &post.components {
                acc += comp.weight;
                if u < acc {
                    chosen = *comp;
                    break;
                }
            }
            let t = StudentT::new(chosen.slab.nu).unwrap().sample(&mut rng);
            beta[*flat] = chosen.slab.a + chosen.slab.b.sqrt() * t;
        }
        idwt_into(&beta, &mut signal);
        out.push(signal.clone());
    }
    Ok(out)
}

/// Everything the effects output needs, bundled.
#[derive(Clone, Debug)]
pub struct EffectPosterior {
    pub coeffs: Vec<CoeffPosterior>,
    pub mean_alpha: Vec<f64>,
    pub var_alpha: Vec<f64>,
}

/// Options for [`effect_posterior`].
#[derive(Clone, Debug, Default)]
pub struct EffectOptions {
    /// Rescale each coefficient's effect by the pre-transform standard
    /// deviation of its raw coefficients before mapping to base space.
    /// Approximate: the association model lives on the normalized scale.
    pub rescale_by_raw_sd: bool,
}

/// Fit-to-profile convenience: mixture posterior plus its data-space image.
pub fn effect_posterior(
    site: &TransformedSite,
    g: &Genotype,
    fit: &ScaleMixtureFit,
    grid: &EffectPriorGrid,
    opts: &EffectOptions,
) -> Result<EffectPosterior> {
    let mut coeffs = mixture_posterior(site, g, fit, grid)?;
    if opts.rescale_by_raw_sd {
        for (flat, post) in coeffs.iter_mut().enumerate() {
            if post.phi > 0.0 {
                let sd = site.raw_wc_sd(flat);
                post.mean_beta *= sd;
                post.var_beta *= sd * sd;
            }
        }
    }
    let w = crate::wavelet::dwt_matrix(site.j())?;
    let (mean_alpha, var_alpha) = effect_in_data_space(&coeffs, &w)?;
    Ok(EffectPosterior {
        coeffs,
        mean_alpha,
        var_alpha,
    })
}
