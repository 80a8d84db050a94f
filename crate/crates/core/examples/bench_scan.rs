use std::time::Instant;
use wavescan::bf::EffectPriorGrid;
use wavescan::preprocess::{prepare_site, CovariateMatrix};
use wavescan::scan::{permutation_pvalue, ScanConfig};
use wavescan::simulate::{simulate_site, Scenario, ScenarioKind};

fn main() {
    let t0 = Instant::now();
    let sim = simulate_site(&Scenario::new(ScenarioKind::Null, 1)).unwrap();
    println!("simulate: {:?}", t0.elapsed());
    let t0 = Instant::now();
    let t = prepare_site(&sim.site, &CovariateMatrix::empty(70)).unwrap();
    let active = t.active().count();
    println!("prepare: {:?} (active {}/{})", t0.elapsed(), active, t.b());
    let config = ScanConfig { n_permutations: 200, seed: 3, adaptive_stop_exceedances: None, ..ScanConfig::default() };
    let t0 = Instant::now();
    let r = permutation_pvalue("s0", &t, &[sim.genotype.clone()], &config, &EffectPriorGrid::default()).unwrap();
    println!("perm 200: {:?}  p={} loglam={}", t0.elapsed(), r.p_value, r.log_lambda_max);
    // effect site
    let sim = simulate_site(&Scenario::new(ScenarioKind::NarrowStrong, 2)).unwrap();
    let t = prepare_site(&sim.site, &CovariateMatrix::empty(70)).unwrap();
    let t0 = Instant::now();
    let r = permutation_pvalue("s1", &t, &[sim.genotype.clone()], &config, &EffectPriorGrid::default()).unwrap();
    println!("narrow perm 200: {:?}  p={} loglam={}", t0.elapsed(), r.p_value, r.log_lambda_max);
}
