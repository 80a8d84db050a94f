//! The scan command: fan sites out to the worker pool, test each against its
//! cis variants, attach q-values, and write results in manifest order.

use anyhow::Result;
use rayon::prelude::*;
use wavescan::baseline::{make_windows, min_p_scan, WindowMode};
use wavescan::bf::EffectPriorGrid;
use wavescan::preprocess::prepare_site;
use wavescan::scan::{estimate_fdr, permutation_pvalue, ScanConfig, SiteResult};
use wavescan::Error;

use crate::errors::{fail, from_core};
use crate::formats::{write_results, ResultRow, SiteSpec};
use crate::inputs::Inputs;
use crate::{Method, ScanArgs};

pub fn scan_config(args: &ScanArgs) -> ScanConfig {
    ScanConfig {
        cis_window: args.cis_window,
        n_permutations: args.permutations,
        seed: args.seed,
        adaptive_stop_exceedances: (args.adaptive_stop > 0).then_some(args.adaptive_stop),
    }
}

fn site_row(
    inputs: &Inputs,
    spec: &SiteSpec,
    method: Method,
    config: &ScanConfig,
    grid: &EffectPriorGrid,
) -> Result<ResultRow> {
    let variants = inputs.cis_variants(spec, config.cis_window);
    let empty_row = |n_variants| ResultRow {
        site_id: spec.site_id.clone(),
        n_variants_tested: n_variants,
        best_variant: None,
        log_lambda_max: None,
        p_value: None,
        q_value: None,
        n_perms: 0,
    };
    if variants.is_empty() {
        log::warn!("site {}: no variants within the cis window", spec.site_id);
        return Ok(empty_row(0));
    }
    let site = inputs.load_site(spec)?;
    let result: std::result::Result<SiteResult, Error> = match method {
        Method::Wavelet => prepare_site(&site, &inputs.covariates).and_then(|t| {
            permutation_pvalue(&spec.site_id, &t, &variants, config, grid)
        }),
        Method::Window | Method::WindowShifted => {
            let mode = if method == Method::Window {
                WindowMode::NonOverlap
            } else {
                WindowMode::Shifted
            };
            make_windows(site.b(), mode).and_then(|part| {
                min_p_scan(
                    &spec.site_id,
                    &site,
                    &inputs.covariates,
                    &variants,
                    &part,
                    config,
                )
            })
        }
    };
    match result {
        Ok(r) => Ok(ResultRow {
            site_id: spec.site_id.clone(),
            n_variants_tested: r.per_variant.len(),
            best_variant: Some(r.best_variant),
            log_lambda_max: Some(r.log_lambda_max),
            p_value: Some(r.p_value),
            q_value: None,
            n_perms: r.n_perms_used,
        }),
        Err(Error::NoTestableVariant) => {
            log::warn!("site {}: every cis variant is constant", spec.site_id);
            Ok(empty_row(0))
        }
        Err(e) => Err(from_core(e)),
    }
}

pub fn run(args: &ScanArgs, method: Method) -> Result<()> {
    let inputs = Inputs::load(
        &args.manifest,
        &args.genotypes,
        &args.libsizes,
        args.pc_file.as_deref(),
    )?;
    let config = scan_config(args);
    let grid = EffectPriorGrid::default();

    let mut rows: Vec<ResultRow> = inputs
        .sites
        .par_iter()
        .map(|spec| site_row(&inputs, spec, method, &config, &grid))
        .collect::<Result<Vec<_>>>()?;

    // q-values over the sites that produced a p-value, in row order
    let tested: Vec<usize> = rows
        .iter()
        .enumerate()
        .filter(|(_, r)| r.p_value.is_some())
        .map(|(i, _)| i)
        .collect();
    if !tested.is_empty() {
        let p: Vec<f64> = tested.iter().map(|&i| rows[i].p_value.unwrap()).collect();
        let q = estimate_fdr(&p).map_err(from_core)?;
        for (&i, qi) in tested.iter().zip(q) {
            rows[i].q_value = Some(qi);
        }
    } else {
        return Err(fail("no-testable-variant", "no site produced a p-value"));
    }

    write_results(&args.out, &rows)
}
