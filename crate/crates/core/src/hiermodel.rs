//! Per-scale mixture model over Bayes factors: maximum-likelihood mixture
//! proportions via EM and the likelihood-ratio statistic.
//!
//! The likelihood factorizes over scales, and coefficients with BF = 1
//! contribute a factor of exactly 1 for every mixture proportion, so the
//! fit runs on the BF != 1 coefficients of each scale. EM iterations stop on
//! the log-likelihood tolerance; a damped Newton step then polishes each
//! per-scale proportion (the per-scale log-likelihood is strictly concave),
//! which pins boundary optima at exactly 0 or 1.

use crate::error::{invalid, Result};

/// EM stopping rule.
#[derive(Clone, Debug)]
pub struct EmOptions {
    /// Stop when the total log-likelihood gain falls below this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for EmOptions {
    fn default() -> Self {
        EmOptions {
            tol: 1e-8,
            max_iter: 5000,
        }
    }
}

/// Result of fitting the per-scale mixture proportions.
#[derive(Clone, Debug)]
pub struct ScaleMixtureFit {
    /// One proportion per scale group (scale 0 included).
    pub pi_hat: Vec<f64>,
    /// log Lambda-hat, always >= 0.
    pub log_lambda_hat: f64,
    /// Posterior inclusion weight per (scale, location) at pi_hat.
    pub phi: Vec<Vec<f64>>,
    /// The input log Bayes factors, grouped by scale.
    pub log_bfs: Vec<Vec<f64>>,
    pub iterations: usize,
    pub converged: bool,
}

impl ScaleMixtureFit {
    /// Inclusion weights in the flat coefficient layout (groups concatenated).
    pub fn phi_flat(&self) -> Vec<f64> {
        self.phi.iter().flatten().copied().collect()
    }
}

/// ln(pi * BF + 1 - pi) from a log BF, stable for extreme values.
fn log_mix(log_bf: f64, pi: f64) -> f64 {
    if log_bf > 0.0 {
        log_bf + (pi + (1.0 - pi) * (-log_bf).exp()).ln()
    } else {
        (pi * log_bf.exp_m1()).ln_1p()
    }
}

/// pi * BF / (pi * BF + 1 - pi) from a log BF.
fn inclusion_weight(log_bf: f64, pi: f64) -> f64 {
    if log_bf >= 0.0 {
        pi / (pi + (1.0 - pi) * (-log_bf).exp())
    } else {
        let t = pi * log_bf.exp();
        t / (t + 1.0 - pi)
    }
}

/// Log likelihood ratio at mixture proportions `pi` (one entry per group).
pub fn log_lr(pi: &[f64], log_bfs: &[Vec<f64>]) -> Result<f64> {
    if pi.len() != log_bfs.len() {
        return Err(invalid(format!(
            "{} proportions for {} scale groups",
            pi.len(),
            log_bfs.len()
        )));
    }
    if pi.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(invalid("mixture proportion outside [0, 1]"));
    }
    let mut total = 0.0;
    for (p, group) in pi.iter().zip(log_bfs) {
        if group.iter().any(|b| !b.is_finite()) {
            return Err(invalid("non-finite log Bayes factor"));
        }
        total += group.iter().map(|&b| log_mix(b, *p)).sum::<f64>();
    }
    Ok(total)
}

/// Per-scale log-likelihood over cached `r = BF - 1` values of the active
/// (BF != 1) coefficients: sum of ln(1 + pi * r).
fn scale_ll_r(active_r: &[f64], pi: f64) -> f64 {
    active_r.iter().map(|&r| (pi * r).ln_1p()).sum()
}

/// Damped Newton refinement of the per-scale MLE; `active_r` must be
/// nonempty. The objective is strictly concave, so boundary decisions are
/// exact sign checks of the derivative.
fn polish_scale(active_r: &[f64], start: f64) -> f64 {
    let deriv = |pi: f64| -> f64 { active_r.iter().map(|&r| r / (pi * r + 1.0)).sum() };
    if deriv(0.0) <= 0.0 {
        return 0.0;
    }
    if deriv(1.0) >= 0.0 {
        return 1.0;
    }
    let mut x = start.clamp(1e-12, 1.0 - 1e-12);
    let mut fx = scale_ll_r(active_r, x);
    for _ in 0..60 {
        let d: f64 = deriv(x);
        let d2: f64 = -active_r
            .iter()
            .map(|&r| (r / (x * r + 1.0)).powi(2))
            .sum::<f64>();
        let mut step = -d / d2;
        let mut x_new = (x + step).clamp(0.0, 1.0);
        let mut f_new = scale_ll_r(active_r, x_new);
        let mut halvings = 0;
        while f_new < fx - 1e-15 && halvings < 40 {
            step *= 0.5;
            x_new = (x + step).clamp(0.0, 1.0);
            f_new = scale_ll_r(active_r, x_new);
            halvings += 1;
        }
        if (x_new - x).abs() < 1e-13 {
            x = x_new;
            break;
        }
        x = x_new;
        fx = f_new;
    }
    x
}

pub(crate) struct EmCore {
    pub pi: Vec<f64>,
    pub log_lambda: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Lockstep EM over the active coefficients of each group, observing the
/// total log-likelihood once per iteration, then Newton-polishing each scale.
pub(crate) fn em_core(
    log_bfs: &[Vec<f64>],
    opts: &EmOptions,
    mut observer: impl FnMut(f64),
) -> EmCore {
    let n_groups = log_bfs.len();
    // cache r = BF - 1 for the active coefficients, grouped contiguously;
    // log BFs above 700 saturate expm1, so cap them (the scale is pinned at
    // pi = 1 either way)
    let mut r_flat: Vec<f64> = Vec::new();
    let mut offsets = Vec::with_capacity(n_groups + 1);
    offsets.push(0usize);
    for g in log_bfs {
        r_flat.extend(
            g.iter()
                .filter(|&&b| b != 0.0)
                .map(|&b| b.min(700.0).exp_m1()),
        );
        offsets.push(r_flat.len());
    }
    let active = |s: usize| &r_flat[offsets[s]..offsets[s + 1]];

    let mut pi = vec![0.5; n_groups];
    let mut frozen: Vec<bool> = (0..n_groups).map(|s| active(s).is_empty()).collect();
    let mut ll: Vec<f64> = (0..n_groups).map(|s| scale_ll_r(active(s), pi[s])).collect();
    let mut total: f64 = ll.iter().sum();
    let freeze_tol = opts.tol / n_groups as f64;

    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        iterations += 1;
        for s in 0..n_groups {
            if frozen[s] {
                continue;
            }
            let a = active(s);
            let p = pi[s];
            // E-step weight per coefficient is pi (1 + r) / (1 + pi r)
            let phi_sum: f64 = a.iter().map(|&r| p * (1.0 + r) / (1.0 + p * r)).sum();
            pi[s] = phi_sum / a.len() as f64;
            let new_ll = scale_ll_r(a, pi[s]);
            if (new_ll - ll[s]).abs() < freeze_tol {
                frozen[s] = true;
            }
            ll[s] = new_ll;
        }
        let new_total: f64 = ll.iter().sum();
        observer(new_total);
        if new_total - total < opts.tol {
            total = new_total;
            converged = true;
            break;
        }
        total = new_total;
    }

    for s in 0..n_groups {
        if !active(s).is_empty() {
            pi[s] = polish_scale(active(s), pi[s]);
            ll[s] = scale_ll_r(active(s), pi[s]);
        }
    }
    let polished: f64 = ll.iter().sum();
    if polished != total {
        observer(polished);
    }
    // pi = 0 everywhere is feasible with log LR exactly 0, so the maximum
    // cannot be negative; clamp round-off from the sum.
    EmCore {
        pi,
        log_lambda: polished.max(0.0),
        iterations,
        converged,
    }
}

/// Fit mixture proportions by EM. `log_bfs` holds the log Bayes factors of
/// every coefficient, grouped by scale; masked coefficients enter as 0.
pub fn em_fit(log_bfs: &[Vec<f64>], opts: &EmOptions) -> Result<ScaleMixtureFit> {
    em_fit_observed(log_bfs, opts, |_| {})
}

/// [`em_fit`] with a per-iteration observer of the total log-likelihood.
pub fn em_fit_observed(
    log_bfs: &[Vec<f64>],
    opts: &EmOptions,
    observer: impl FnMut(f64),
) -> Result<ScaleMixtureFit> {
    if log_bfs.iter().all(|g| g.is_empty()) {
        return Err(invalid("no scale group has coefficients"));
    }
    if log_bfs.iter().flatten().any(|b| !b.is_finite()) {
        return Err(invalid("non-finite log Bayes factor"));
    }
    let core = em_core(log_bfs, opts, observer);
    let phi = log_bfs
        .iter()
        .zip(&core.pi)
        .map(|(group, &p)| group.iter().map(|&b| inclusion_weight(b, p)).collect())
        .collect();
    Ok(ScaleMixtureFit {
        pi_hat: core.pi,
        log_lambda_hat: core.log_lambda,
        phi,
        log_bfs: log_bfs.to_vec(),
        iterations: core.iterations,
        converged: core.converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha12Rng;
    use wavescan_testkit::search::golden_section_max;

    fn groups_from(bfs: &[&[f64]]) -> Vec<Vec<f64>> {
        bfs.iter()
            .map(|g| g.iter().map(|b| b.ln()).collect())
            .collect()
    }

    #[test]
    fn log_lr_examples() {
        let groups = groups_from(&[&[2.0], &[0.5, 3.0]]);
        assert_eq!(log_lr(&[0.0, 0.0], &groups).unwrap(), 0.0);

        let ones = groups_from(&[&[1.0, 1.0], &[1.0]]);
        for pi in [[0.0, 1.0], [0.3, 0.7], [1.0, 0.5]] {
            assert_eq!(log_lr(&pi, &ones).unwrap(), 0.0);
        }

        let single = groups_from(&[&[3.0]]);
        assert_abs_diff_eq!(log_lr(&[1.0], &single).unwrap(), 3.0f64.ln(), epsilon = 1e-12);

        assert!(log_lr(&[1.5], &single).is_err());
        assert!(log_lr(&[0.5, 0.5], &single).is_err());
    }

    #[test]
    fn flat_likelihood_keeps_initial_pi() {
        let groups = groups_from(&[&[1.0, 1.0], &[1.0]]);
        let fit = em_fit(&groups, &EmOptions::default()).unwrap();
        assert_eq!(fit.log_lambda_hat, 0.0);
        assert_eq!(fit.pi_hat, vec![0.5, 0.5]);
        assert!(fit.converged);
        // phi at BF = 1 is pi itself
        assert_eq!(fit.phi, vec![vec![0.5, 0.5], vec![0.5]]);
    }

    #[test]
    fn single_coefficient_scale_saturates() {
        let groups = groups_from(&[&[3.0]]);
        let fit = em_fit(&groups, &EmOptions::default()).unwrap();
        assert_abs_diff_eq!(fit.pi_hat[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.log_lambda_hat, 3.0f64.ln(), epsilon = 1e-10);
    }

    #[test]
    fn two_coefficient_fixture() {
        let groups = groups_from(&[&[4.0, 0.25]]);
        let fit = em_fit(&groups, &EmOptions::default()).unwrap();
        assert_eq!(fit.pi_hat[0], 0.5);
        assert_abs_diff_eq!(fit.log_lambda_hat.exp(), 1.5625, epsilon = 1e-12);
    }

    fn random_groups(seed: u64, spread: f64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let n_scales = rng.random_range(1usize..5);
        (0..n_scales)
            .map(|_| {
                let n = rng.random_range(1usize..12);
                (0..n).map(|_| rng.random_range(-spread..spread)).collect()
            })
            .collect()
    }

    #[test]
    fn em_is_monotone() {
        for seed in 0..100 {
            let groups = random_groups(seed, 3.0);
            let mut prev = f64::NEG_INFINITY;
            em_fit_observed(&groups, &EmOptions::default(), |ll| {
                assert!(
                    ll >= prev - 1e-12,
                    "log-likelihood decreased: {} -> {}",
                    prev,
                    ll
                );
                prev = ll;
            })
            .unwrap();
        }
    }

    #[test]
    fn fixed_point_matches_golden_section() {
        for seed in 0..50 {
            let groups = random_groups(seed + 1000, 4.0);
            let fit = em_fit(&groups, &EmOptions::default()).unwrap();
            for (s, group) in groups.iter().enumerate() {
                let (gs_pi, _) = golden_section_max(
                    |p| group.iter().map(|&b| log_mix(b, p)).sum::<f64>(),
                    0.0,
                    1.0,
                    1e-10,
                );
                assert!(
                    (fit.pi_hat[s] - gs_pi).abs() < 1e-6,
                    "seed {} scale {}: em {} vs gs {}",
                    seed,
                    s,
                    fit.pi_hat[s],
                    gs_pi
                );
            }
        }
    }

    #[test]
    fn removing_unit_bfs_changes_nothing() {
        for seed in 0..20 {
            let mut groups = random_groups(seed + 77, 2.0);
            let fit_clean = em_fit(&groups, &EmOptions::default()).unwrap();
            // splice BF = 1 entries into every group
            for g in &mut groups {
                g.push(0.0);
                g.insert(0, 0.0);
            }
            let fit_padded = em_fit(&groups, &EmOptions::default()).unwrap();
            assert_eq!(fit_clean.log_lambda_hat, fit_padded.log_lambda_hat);
            assert_eq!(fit_clean.pi_hat, fit_padded.pi_hat);
        }
    }

    #[test]
    fn lambda_zero_iff_no_excess_evidence() {
        // all BFs <= 1 (some strictly): the maximum sits at pi = 0
        let groups = groups_from(&[&[0.5, 1.0, 0.9], &[0.99]]);
        let fit = em_fit(&groups, &EmOptions::default()).unwrap();
        assert_eq!(fit.log_lambda_hat, 0.0);
        assert_eq!(fit.pi_hat[0], 0.0);

        // a scale whose mean BF exceeds 1 forces positive evidence
        let groups = groups_from(&[&[0.5, 2.0]]);
        let fit = em_fit(&groups, &EmOptions::default()).unwrap();
        assert!(fit.log_lambda_hat > 0.0);
    }

    #[test]
    fn lambda_nonnegative_on_random_inputs() {
        for seed in 0..200 {
            let groups = random_groups(seed + 5000, 6.0);
            let fit = em_fit(&groups, &EmOptions::default()).unwrap();
            assert!(fit.log_lambda_hat >= 0.0);
            for p in &fit.pi_hat {
                assert!((0.0..=1.0).contains(p));
            }
        }
    }

    #[test]
    fn rejects_empty_and_nan() {
        assert!(em_fit(&[], &EmOptions::default()).is_err());
        assert!(em_fit(&[vec![]], &EmOptions::default()).is_err());
        assert!(em_fit(&[vec![f64::NAN]], &EmOptions::default()).is_err());
    }
}
