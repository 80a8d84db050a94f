//! The simulate command: write a complete scan-ready bundle with known truth.

use std::fs;

use anyhow::Result;
use serde::Deserialize;
use wavescan::seeds::derive_seed_index;
use wavescan::simulate::{simulate_site, Scenario, ScenarioKind};

use crate::errors::{fail, from_core, io_err};
use crate::formats::write_tsv;
use crate::{Kind, SimulateArgs};

/// Optional TOML description of the scenario. Fields mirror the flags.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    kind: Option<String>,
    sites: Option<usize>,
    individuals: Option<usize>,
    region_length: Option<usize>,
    maf: Option<f64>,
    depth: Option<f64>,
    multiplier: Option<f64>,
    regions: Option<Vec<[usize; 2]>>,
}

fn kind_from_str(s: &str) -> Result<ScenarioKind> {
    match s {
        "null" => Ok(ScenarioKind::Null),
        "narrow_strong" => Ok(ScenarioKind::NarrowStrong),
        "broad_modest" => Ok(ScenarioKind::BroadModest),
        "opposite_pair" => Ok(ScenarioKind::OppositePair),
        other => Err(fail("parse-error", format!("unknown scenario kind {:?}", other))),
    }
}

fn kind_to_core(k: Kind) -> ScenarioKind {
    match k {
        Kind::Null => ScenarioKind::Null,
        Kind::NarrowStrong => ScenarioKind::NarrowStrong,
        Kind::BroadModest => ScenarioKind::BroadModest,
        Kind::OppositePair => ScenarioKind::OppositePair,
    }
}

fn parse_region(s: &str) -> Result<(usize, usize)> {
    let (lo, hi) = s
        .split_once('-')
        .ok_or_else(|| fail("parse-error", format!("region {:?} is not start-end", s)))?;
    let lo = lo
        .parse()
        .map_err(|e| fail("parse-error", format!("region start: {}", e)))?;
    let hi = hi
        .parse()
        .map_err(|e| fail("parse-error", format!("region end: {}", e)))?;
    Ok((lo, hi))
}

fn resolve_scenario(args: &SimulateArgs) -> Result<(Scenario, usize)> {
    let file: ScenarioFile = match &args.scenario_file {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| io_err(p, e))?;
            toml::from_str(&text)
                .map_err(|e| fail("parse-error", format!("{}: {}", p.display(), e)))?
        }
        None => ScenarioFile::default(),
    };

    let kind = match (args.kind, &file.kind) {
        (Some(k), _) => kind_to_core(k),
        (None, Some(s)) => kind_from_str(s)?,
        (None, None) => ScenarioKind::Null,
    };
    let mut sc = Scenario::new(kind, args.seed);
    if let Some(n) = args.individuals.or(file.individuals) {
        sc.n = n;
    }
    if let Some(b) = args.region_length.or(file.region_length) {
        sc.b = b;
    }
    if let Some(m) = args.maf.or(file.maf) {
        sc.maf = m;
    }
    if let Some(d) = args.depth.or(file.depth) {
        sc.depth = d;
    }
    if let Some(m) = args.multiplier.or(file.multiplier) {
        sc.effect_multiplier = m;
    }
    if !args.regions.is_empty() {
        sc.effect_regions = args
            .regions
            .iter()
            .map(|r| parse_region(r))
            .collect::<Result<Vec<_>>>()?;
    } else if let Some(rs) = &file.regions {
        sc.effect_regions = rs.iter().map(|r| (r[0], r[1])).collect();
    } else if sc.b != 1024 {
        // archetype defaults are laid out for 1024-base regions; scale them
        // to the requested length
        let scale = sc.b as f64 / 1024.0;
        sc.effect_regions = sc
            .effect_regions
            .iter()
            .map(|&(lo, hi)| {
                let lo = ((lo as f64 * scale).round() as usize).max(1);
                let hi = ((hi as f64 * scale).round() as usize).clamp(lo, sc.b);
                (lo, hi)
            })
            .collect();
    }
    let n_sites = args.sites.or(file.sites).unwrap_or(1);
    if n_sites == 0 {
        return Err(fail("invalid-input", "need at least one site"));
    }
    Ok((sc, n_sites))
}

pub fn run(args: &SimulateArgs) -> Result<()> {
    let (base, n_sites) = resolve_scenario(args)?;
    let out = &args.out_dir;
    let sites_dir = out.join("sites");
    fs::create_dir_all(&sites_dir).map_err(|e| io_err(&sites_dir, e))?;

    // sites spaced far enough apart that cis windows never overlap
    let spacing = 10 * base.b as u64 + 4000;

    let mut manifest = Vec::with_capacity(n_sites);
    let mut genotypes = Vec::with_capacity(n_sites);
    let mut truth = Vec::with_capacity(n_sites);
    for i in 0..n_sites {
        let mut sc = base.clone();
        sc.seed = derive_seed_index(args.seed, i as u64);
        let sim = simulate_site(&sc).map_err(from_core)?;
        let site_id = format!("sim_{:05}", i);
        let start = 1 + i as u64 * spacing;
        let end = start + sc.b as u64 - 1;
        manifest.push(format!("{}\tsim\t{}\t{}", site_id, start, end));

        let variant_id = format!("v_{}", site_id);
        let pos = start + sc.b as u64 / 2;
        let dosages: Vec<String> = sim
            .genotype
            .dosages()
            .iter()
            .map(|d| format!("{}", d))
            .collect();
        genotypes.push(format!("{}\tsim\t{}\t{}", variant_id, pos, dosages.join("\t")));

        let regions: Vec<String> = sc
            .effect_regions
            .iter()
            .map(|(lo, hi)| format!("{}-{}", lo, hi))
            .collect();
        truth.push(format!(
            "{}\t{}\t{:?}\t{}\t{}\t{}\t{}",
            site_id,
            variant_id,
            sc.kind,
            sc.effect_multiplier,
            regions.join(";"),
            sc.maf,
            sc.seed
        ));

        let rows: Vec<String> = sim
            .site
            .counts()
            .iter()
            .map(|row| {
                row.iter()
                    .map(|c| c.to_string())
                    .collect::<Vec<_>>()
                    .join("\t")
            })
            .collect();
        let path = sites_dir.join(format!("{}.tsv", site_id));
        write_tsv(&path, "#counts: one row per individual, one column per base", &rows)?;
    }

    write_tsv(
        &out.join("manifest.tsv"),
        "#site_id\tchromosome\tstart\tend",
        &manifest,
    )?;
    write_tsv(
        &out.join("genotypes.tsv"),
        "#variant_id\tchromosome\tposition\tdosages",
        &genotypes,
    )?;
    let libs: Vec<String> = (0..base.n).map(|j| format!("ind_{:04}\t1", j)).collect();
    write_tsv(&out.join("libsizes.tsv"), "#individual_id\ttotal_reads", &libs)?;
    write_tsv(
        &out.join("truth.tsv"),
        "#site_id\tvariant_id\tkind\tmultiplier\tregions\tmaf\tsite_seed",
        &truth,
    )?;
    Ok(())
}
