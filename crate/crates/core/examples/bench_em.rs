use std::time::Instant;
use wavescan::bf::{site_bfs, EffectPriorGrid};
use wavescan::hiermodel::{em_fit, EmOptions};
use wavescan::preprocess::{prepare_site, CovariateMatrix};
use wavescan::simulate::{simulate_site, Scenario, ScenarioKind};

fn main() {
    let sim = simulate_site(&Scenario::new(ScenarioKind::Null, 1)).unwrap();
    let t = prepare_site(&sim.site, &CovariateMatrix::empty(70)).unwrap();
    let bfs = site_bfs(&t, &sim.genotype, &EffectPriorGrid::default()).unwrap();
    let groups = bfs.by_scale();
    let t0 = Instant::now();
    let mut iters = 0;
    for _ in 0..100 {
        let fit = em_fit(&groups, &EmOptions::default()).unwrap();
        iters = fit.iterations;
    }
    println!("em_fit x100: {:?}, iterations per fit: {}", t0.elapsed(), iters);
}
