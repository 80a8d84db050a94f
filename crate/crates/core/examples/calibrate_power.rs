//! Scratch harness for tuning simulation scenario defaults: prints rejection
//! rates of the three methods on each archetype.

use std::time::Instant;
use wavescan::baseline::{make_windows, min_p_scan, WindowMode};
use wavescan::bf::EffectPriorGrid;
use wavescan::preprocess::{prepare_site, CovariateMatrix};
use wavescan::scan::{permutation_pvalue, ScanConfig};
use wavescan::seeds::derive_seed_index;
use wavescan::simulate::{simulate_site, Scenario, ScenarioKind};

fn power(kind: ScenarioKind, mult: f64, regions: Option<Vec<(usize, usize)>>, depth: f64, reps: u64, master: u64) {
    let grid = EffectPriorGrid::default();
    let config = ScanConfig {
        n_permutations: 199,
        seed: 7,
        adaptive_stop_exceedances: Some(100),
        ..ScanConfig::default()
    };
    let covs = CovariateMatrix::empty(70);
    let nonov = make_windows(1024, WindowMode::NonOverlap).unwrap();
    let shifted = make_windows(1024, WindowMode::Shifted).unwrap();
    let t0 = Instant::now();
    let (mut rw, mut rn, mut rs) = (0, 0, 0);
    for r in 0..reps {
        let mut sc = Scenario::new(kind, derive_seed_index(master, r));
        sc.effect_multiplier = mult;
        sc.depth = depth;
        if let Some(rg) = &regions {
            sc.effect_regions = rg.clone();
        }
        let sim = simulate_site(&sc).unwrap();
        let site_id = format!("cal_{}", r);
        let t = prepare_site(&sim.site, &covs).unwrap();
        let variants = [sim.genotype.clone()];
        let w = permutation_pvalue(&site_id, &t, &variants, &config, &grid).unwrap();
        let n = min_p_scan(&site_id, &sim.site, &covs, &variants, &nonov, &config).unwrap();
        let s = min_p_scan(&site_id, &sim.site, &covs, &variants, &shifted, &config).unwrap();
        rw += usize::from(w.p_value <= 0.01);
        rn += usize::from(n.p_value <= 0.01);
        rs += usize::from(s.p_value <= 0.01);
    }
    println!(
        "{:?} mult={} depth={} regions={:?}: wavelet {}/{}  window {}/{}  shifted {}/{}  ({:?})",
        kind, mult, depth, regions, rw, reps, rn, reps, rs, reps, t0.elapsed()
    );
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let which = args.get(1).map(|s| s.as_str()).unwrap_or("all");
    let reps: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(30);
    if which == "narrow" || which == "all" {
        power(ScenarioKind::NarrowStrong, 3.0, Some(vec![(145, 154)]), 2000.0, reps, 11);
        power(ScenarioKind::NarrowStrong, 3.0, Some(vec![(150, 159)]), 2000.0, reps, 11);
    }
    if which == "broad" || which == "all" {
        power(ScenarioKind::BroadModest, 1.3, None, 20.0, reps, 12);
        power(ScenarioKind::BroadModest, 1.3, None, 25.0, reps, 12);
    }
    if which == "opposite" || which == "all" {
        power(ScenarioKind::OppositePair, 1.25, Some(vec![(481, 512), (577, 608)]), 100.0, reps, 13);
        power(ScenarioKind::OppositePair, 1.33, Some(vec![(481, 512), (577, 608)]), 100.0, reps, 13);
        power(ScenarioKind::OppositePair, 1.40, Some(vec![(481, 512), (577, 608)]), 100.0, reps, 13);
    }
}
