//! Fixed-window comparison method: per-window linear regression of summed
//! standardized counts on dosage, min-p across windows and variants, and the
//! same permutation calibration as the wavelet scan.

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::bf::Genotype;
use crate::error::{invalid, Error, Result};
use crate::preprocess::{coefficient_pipeline, standardize, CovariateMatrix, SiteData};
use crate::scan::{count_exceedances, ScanConfig, SiteResult, VariantLambda};
use crate::seeds::derive_seed_str;

/// How to cut a region into windows.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WindowMode {
    /// Ten windows over 1024 bases: nine of 100 bp and a final 124 bp one.
    NonOverlap,
    /// The ten non-overlapping windows plus nine copies shifted 50 bp right.
    Shifted,
    /// `window`-wide windows every `step` bases, for any region length.
    Generic { window: usize, step: usize },
}

/// Base intervals (1-based, inclusive) within the region.
#[derive(Clone, Debug)]
pub struct WindowPartition {
    pub windows: Vec<(usize, usize)>,
}

pub fn make_windows(b: usize, mode: WindowMode) -> Result<WindowPartition> {
    match mode {
        WindowMode::NonOverlap => {
            if b != 1024 {
                return Err(invalid(format!("non-overlap windows expect B=1024, got {}", b)));
            }
            let mut windows: Vec<(usize, usize)> =
                (0..9).map(|k| (100 * k + 1, 100 * (k + 1))).collect();
            windows.push((901, 1024));
            Ok(WindowPartition { windows })
        }
        WindowMode::Shifted => {
            let mut part = make_windows(b, WindowMode::NonOverlap)?;
            for k in 0..9 {
                part.windows.push((100 * k + 51, 100 * k + 150));
            }
            Ok(part)
        }
        WindowMode::Generic { window, step } => {
            if window == 0 || step == 0 || window > b {
                return Err(invalid("window and step must be positive, window <= B"));
            }
            let mut windows = Vec::new();
            let mut start = 1;
            while start + window - 1 <= b {
                windows.push((start, start + window - 1));
                start += step;
            }
            if windows.is_empty() {
                return Err(invalid("no windows fit the region"));
            }
            Ok(WindowPartition { windows })
        }
    }
}

/// Two-sided t-test p-value for the OLS slope of `y` on `x` (N-2 df).
pub fn slope_test_pvalue(y: &[f64], x: &[f64]) -> Result<f64> {
    let n = y.len();
    if n < 3 || x.len() != n {
        return Err(invalid("slope test needs matched vectors with N >= 3"));
    }
    if x.windows(2).all(|w| w[0] == w[1]) {
        return Err(invalid("slope is undefined for a constant regressor"));
    }
    let nf = n as f64;
    let xbar = x.iter().sum::<f64>() / nf;
    let ybar = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - xbar).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - xbar) * (b - ybar)).sum();
    let syy: f64 = y.iter().map(|v| (v - ybar).powi(2)).sum();
    let rss = syy - sxy * sxy / sxx;
    if rss <= 0.0 {
        return Ok(0.0);
    }
    let t = (sxy / sxx) / ((rss / (nf - 2.0)) / sxx).sqrt();
    let dist = StudentsT::new(0.0, 1.0, nf - 2.0).unwrap();
    Ok(2.0 * (1.0 - dist.cdf(t.abs())))
}

/// Normalized window phenotype: per-individual sum of standardized counts in
/// the window, then the same quantile/residual/quantile pipeline used for
/// wavelet coefficients. `None` when the phenotype is constant.
fn window_phenotype(
    signals: &[Vec<f64>],
    covariates: &CovariateMatrix,
    window: (usize, usize),
) -> Result<Option<Vec<f64>>> {
    let sums: Vec<f64> = signals
        .iter()
        .map(|d| d[window.0 - 1..window.1].iter().sum())
        .collect();
    match coefficient_pipeline(&sums, covariates) {
        Ok(z) => Ok(Some(z)),
        Err(Error::DegenerateInput(_)) => {
            log::warn!("constant phenotype in window {:?}; p = 1", window);
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

/// Association p-value of one window with one variant.
pub fn window_pvalue(
    site: &SiteData,
    covariates: &CovariateMatrix,
    g: &Genotype,
    window: (usize, usize),
) -> Result<f64> {
    validate_window(site, window)?;
    if g.n() != site.n() {
        return Err(invalid("dosage count does not match individuals"));
    }
    if g.is_constant() {
        return Err(invalid(format!("variant {} is constant", g.id)));
    }
    let signals: Vec<Vec<f64>> = standardize(site)?
        .into_iter()
        .map(|s| s.into_values())
        .collect();
    match window_phenotype(&signals, covariates, window)? {
        Some(z) => slope_test_pvalue(&z, g.dosages()),
        None => Ok(1.0),
    }
}

fn validate_window(site: &SiteData, window: (usize, usize)) -> Result<()> {
    if window.0 == 0 || window.1 < window.0 || window.1 > site.b() {
        return Err(invalid(format!(
            "window {:?} outside region of length {}",
            window,
            site.b()
        )));
    }
    Ok(())
}

/// Per-window phenotype sums precomputed for the permutation loop. Because
/// the t distribution's df is shared, minimizing p is maximizing |t|, so the
/// engine works on squared t statistics and converts once at the end.
struct WindowKernel {
    z: Vec<Vec<f64>>, // non-degenerate windows only
    n: usize,
}

impl WindowKernel {
    /// t^2 of the best window for this (already permuted) dosage vector.
    fn eval(&self, dosages: &[f64], xbar: f64, sxx: f64) -> f64 {
        let nf = self.n as f64;
        let mut best = 0.0f64;
        for z in &self.z {
            // z has mean ~0 by construction; compute the centered moments anyway
            let zbar = z.iter().sum::<f64>() / nf;
            let szz: f64 = z.iter().map(|v| (v - zbar).powi(2)).sum();
            let sxz: f64 = z.iter().zip(dosages).map(|(a, b)| (a - zbar) * (b - xbar)).sum();
            let rss = szz - sxz * sxz / sxx;
            let t2 = if rss <= 0.0 {
                f64::INFINITY
            } else {
                sxz * sxz * (nf - 2.0) / (sxx * rss)
            };
            if t2 > best {
                best = t2;
            }
        }
        best
    }
}

fn t2_to_p(t2: f64, df: f64) -> f64 {
    if t2.is_infinite() {
        return 0.0;
    }
    let dist = StudentsT::new(0.0, 1.0, df).unwrap();
    2.0 * (1.0 - dist.cdf(t2.sqrt()))
}

/// Window-based site scan: statistic min p over (windows x variants),
/// calibrated by the same shared-permutation procedure as the wavelet scan.
///
/// In the returned [`SiteResult`], `log_lambda_max` holds `-ln(min p)` so
/// that larger remains more extreme.
pub fn min_p_scan(
    site_id: &str,
    site: &SiteData,
    covariates: &CovariateMatrix,
    variants: &[Genotype],
    partition: &WindowPartition,
    config: &ScanConfig,
) -> Result<SiteResult> {
    let n = site.n();
    if n < covariates.k() + 3 {
        return Err(invalid(format!(
            "need N >= K+3 individuals (N={}, K={})",
            n,
            covariates.k()
        )));
    }
    for w in &partition.windows {
        validate_window(site, *w)?;
    }
    let mut usable: Vec<&Genotype> = Vec::new();
    for v in variants {
        if v.n() != n {
            return Err(invalid(format!(
                "variant {} has {} dosages for {} individuals",
                v.id,
                v.n(),
                n
            )));
        }
        if v.is_constant() {
            log::warn!("variant {} is constant across individuals; skipped", v.id);
        } else {
            usable.push(v);
        }
    }
    if usable.is_empty() {
        return Err(Error::NoTestableVariant);
    }

    let signals: Vec<Vec<f64>> = standardize(site)?
        .into_iter()
        .map(|s| s.into_values())
        .collect();
    let mut z = Vec::new();
    for w in &partition.windows {
        if let Some(zw) = window_phenotype(&signals, covariates, *w)? {
            z.push(zw);
        }
    }
    let kernel = WindowKernel { z, n };
    let df = n as f64 - 2.0;

    // permutation-invariant dosage moments
    let moments: Vec<(f64, f64)> = usable
        .iter()
        .map(|v| {
            let xbar = v.dosages().iter().sum::<f64>() / n as f64;
            let sxx = v.dosages().iter().map(|g| (g - xbar).powi(2)).sum();
            (xbar, sxx)
        })
        .collect();

    // observed per-variant best t^2 and the overall argmax
    let mut table = Vec::with_capacity(usable.len());
    let mut best: Option<VariantLambda> = None;
    let mut observed_t2 = 0.0f64;
    for (v, &(xbar, sxx)) in usable.iter().zip(&moments) {
        let t2 = kernel.eval(v.dosages(), xbar, sxx);
        let p = t2_to_p(t2, df);
        let entry = VariantLambda {
            id: v.id.clone(),
            position: v.position,
            log_lambda: -p.max(1e-300).ln(),
        };
        match &best {
            Some(b)
                if !(entry.log_lambda > b.log_lambda
                    || (entry.log_lambda == b.log_lambda
                        && (entry.position, &entry.id) < (b.position, &b.id))) => {}
            _ => best = Some(entry.clone()),
        }
        observed_t2 = observed_t2.max(t2);
        table.push(entry);
    }
    let best = best.expect("nonempty table");

    let (exceed, used) = count_exceedances(
        derive_seed_str(config.seed, site_id),
        n,
        config.n_permutations,
        config.adaptive_stop_exceedances,
        observed_t2,
        || vec![0.0f64; n],
        |perm, buf| {
            let mut max = 0.0f64;
            for (v, &(xbar, sxx)) in usable.iter().zip(&moments) {
                let d = v.dosages();
                buf.clear();
                buf.extend(perm.iter().map(|&i| d[i as usize]));
                let t2 = kernel.eval(buf, xbar, sxx);
                if t2 > max {
                    max = t2;
                }
            }
            max
        },
    );

    let observed_min_p = t2_to_p(observed_t2, df);
    Ok(SiteResult {
        site_id: site_id.to_string(),
        log_lambda_max: -observed_min_p.max(1e-300).ln(),
        best_variant: best.id,
        best_position: best.position,
        p_value: (exceed + 1) as f64 / (used + 1) as f64,
        n_perms_used: used,
        per_variant: table,
    })
}
