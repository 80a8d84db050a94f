//! Textbook OLS slope test via explicit design-matrix algebra.

use nalgebra::DMatrix;
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Two-sided p-value for the slope of `y` on `x`, computed through the full
/// normal-equations route: beta = (X'X)^-1 X'y, se from the (2,2) entry of
/// (X'X)^-1 * sigma_hat^2, then a t(n-2) tail probability.
pub fn slope_t_test_p(y: &[f64], x: &[f64]) -> f64 {
    let n = y.len();
    assert_eq!(n, x.len());
    assert!(n >= 3);
    let design = DMatrix::from_fn(n, 2, |i, c| if c == 0 { 1.0 } else { x[i] });
    let yv = DMatrix::from_fn(n, 1, |i, _| y[i]);
    let xtx = design.transpose() * &design;
    let xtx_inv = xtx.try_inverse().expect("non-singular design");
    let beta = &xtx_inv * design.transpose() * &yv;
    let resid = &yv - &design * &beta;
    let rss: f64 = resid.iter().map(|r| r * r).sum();
    let sigma2 = rss / (n as f64 - 2.0);
    let se = (sigma2 * xtx_inv[(1, 1)]).sqrt();
    let t = beta[(1, 0)] / se;
    let dist = StudentsT::new(0.0, 1.0, n as f64 - 2.0).unwrap();
    2.0 * (1.0 - dist.cdf(t.abs()))
}
