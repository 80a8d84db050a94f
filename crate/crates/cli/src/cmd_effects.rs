//! The effects command: per-base posterior effect profile for one site and
//! one variant (the strongest-associated one unless named).

use anyhow::Result;
use wavescan::bf::{site_bfs, EffectPriorGrid, Genotype};
use wavescan::effects::{effect_posterior, EffectOptions};
use wavescan::hiermodel::{em_fit, EmOptions};
use wavescan::preprocess::prepare_site;
use wavescan::scan::lambda_max;

use crate::errors::{fail, from_core};
use crate::formats::write_effects;
use crate::inputs::Inputs;
use crate::EffectsArgs;

pub fn run(args: &EffectsArgs) -> Result<()> {
    let inputs = Inputs::load(
        &args.manifest,
        &args.genotypes,
        &args.libsizes,
        args.pc_file.as_deref(),
    )?;
    let spec = inputs
        .sites
        .iter()
        .find(|s| s.site_id == args.site)
        .ok_or_else(|| fail("unknown-id", format!("site {} not in manifest", args.site)))?;
    let site = inputs.load_site(spec)?;
    let variants = inputs.cis_variants(spec, args.cis_window);
    if variants.is_empty() {
        return Err(fail(
            "no-testable-variant",
            format!("site {}: no variants within the cis window", spec.site_id),
        ));
    }
    let transformed = prepare_site(&site, &inputs.covariates).map_err(from_core)?;
    let grid = EffectPriorGrid::default();

    let chosen: Genotype = match &args.variant {
        Some(id) => variants
            .iter()
            .find(|v| &v.id == id)
            .cloned()
            .ok_or_else(|| {
                if inputs.genotypes.iter().any(|(_, g)| &g.id == id) {
                    fail(
                        "invalid-input",
                        format!("variant {} is outside the cis window of {}", id, spec.site_id),
                    )
                } else {
                    fail("unknown-id", format!("variant {} not in the genotype file", id))
                }
            })?,
        None => {
            let lm = lambda_max(&transformed, &variants, &grid).map_err(from_core)?;
            variants
                .iter()
                .find(|v| v.id == lm.best_id)
                .cloned()
                .expect("best variant comes from the list")
        }
    };
    if chosen.is_constant() {
        return Err(fail(
            "no-testable-variant",
            format!("variant {} is constant across individuals", chosen.id),
        ));
    }

    let bfs = site_bfs(&transformed, &chosen, &grid).map_err(from_core)?;
    let fit = em_fit(&bfs.by_scale(), &EmOptions::default()).map_err(from_core)?;
    let post = effect_posterior(
        &transformed,
        &chosen,
        &fit,
        &grid,
        &EffectOptions {
            rescale_by_raw_sd: args.raw_scale,
        },
    )
    .map_err(from_core)?;
    write_effects(&args.out, &post.mean_alpha, &post.var_alpha)
}
