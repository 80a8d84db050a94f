//! Brute-force Bayes factor oracle: nested Simpson quadrature of the conjugate
//! normal-regression model over (mu, beta, sigma^2) at small-but-proper prior
//! parameters. No conjugate shortcut is taken for the integral itself; closed
//! forms are used only to center and scale the quadrature grids.

use statrs::function::gamma::ln_gamma;

/// Proper-prior parameters approximating the vague limit.
pub struct BfQuadratureOracle {
    /// inverse-gamma shape and rate for sigma^2
    pub kappa: f64,
    /// prior variance multiplier for the intercept
    pub sigma_mu_sq: f64,
}

impl Default for BfQuadratureOracle {
    fn default() -> Self {
        BfQuadratureOracle {
            kappa: 1e-6,
            sigma_mu_sq: 1e6,
        }
    }
}

struct Sums {
    n: f64,
    sz: f64,
    szz: f64,
    sg: f64,
    sgg: f64,
    sgz: f64,
}

impl Sums {
    fn new(z: &[f64], g: &[f64]) -> Self {
        assert_eq!(z.len(), g.len());
        Sums {
            n: z.len() as f64,
            sz: z.iter().sum(),
            szz: z.iter().map(|v| v * v).sum(),
            sg: g.iter().sum(),
            sgg: g.iter().map(|v| v * v).sum(),
            sgz: z.iter().zip(g).map(|(a, b)| a * b).sum(),
        }
    }

    fn rss(&self, mu: f64, beta: f64) -> f64 {
        self.szz - 2.0 * mu * self.sz - 2.0 * beta * self.sgz
            + 2.0 * mu * beta * self.sg
            + mu * mu * self.n
            + beta * beta * self.sgg
    }
}

/// Composite Simpson weights on [a, b] with n points (n odd, >= 3).
fn simpson_weights(a: f64, b: f64, n: usize) -> (Vec<f64>, f64) {
    assert!(n >= 3 && n % 2 == 1);
    let h = (b - a) / (n - 1) as f64;
    let mut w = vec![0.0; n];
    w[0] = h / 3.0;
    w[n - 1] = h / 3.0;
    for (i, wi) in w.iter_mut().enumerate().take(n - 1).skip(1) {
        *wi = if i % 2 == 1 { 4.0 * h / 3.0 } else { 2.0 * h / 3.0 };
    }
    (w, h)
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

const LN_2PI: f64 = 1.8378770664093453;

impl BfQuadratureOracle {
    /// log BF = log p(z | H1) - log p(z | H0), both by quadrature, refining
    /// the grids until two consecutive resolutions agree.
    pub fn log_bf(&self, z: &[f64], g: &[f64], sigma_beta: f64) -> f64 {
        let sums = Sums::new(z, g);
        let mut prev = f64::NAN;
        let mut result = f64::NAN;
        for level in 0..3 {
            let mult = 1usize << level;
            let h1 = self.log_marginal_h1(&sums, sigma_beta, mult);
            let h0 = self.log_marginal_h0(&sums, mult);
            result = h1 - h0;
            if (result - prev).abs() < 3e-5 {
                break;
            }
            prev = result;
        }
        result
    }

    fn log_prior_sigma(&self, u: f64) -> f64 {
        // inverse-gamma density in sigma^2 = e^u, including the e^u Jacobian
        self.kappa * self.kappa.ln() - ln_gamma(self.kappa) - (self.kappa + 1.0) * u
            - self.kappa * (-u).exp()
            + u
    }

    fn u_grid(&self, sums: &Sums, mult: usize) -> (Vec<f64>, Vec<f64>) {
        let u0 = (sums.szz / sums.n).max(1e-300).ln();
        let n = 160 * mult + 1;
        let (w, h) = simpson_weights(u0 - 14.0, u0 + 9.0, n);
        let grid = (0..n).map(|i| u0 - 14.0 + h * i as f64).collect();
        (grid, w)
    }

    fn log_marginal_h1(&self, sums: &Sums, sigma_beta: f64, mult: usize) -> f64 {
        let sb2 = sigma_beta * sigma_beta;
        let (us, wu) = self.u_grid(sums, mult);
        let n_inner = 120 * mult + 1;
        let mut slice_terms = Vec::with_capacity(us.len());
        let mut buf = vec![0.0f64; n_inner * n_inner];
        for (&u, &wui) in us.iter().zip(&wu) {
            let s2 = u.exp();
            let sigma = s2.sqrt();
            // ridge mode and scales, used only to place the inner grids
            let a11 = sums.n + 1.0 / self.sigma_mu_sq;
            let a22 = sums.sgg + 1.0 / sb2;
            let det = a11 * a22 - sums.sg * sums.sg;
            let mu_c = (a22 * sums.sz - sums.sg * sums.sgz) / det;
            let beta_c = (a11 * sums.sgz - sums.sg * sums.sz) / det;
            let sd_mu = sigma * (a22 / det).sqrt();
            let sd_beta = sigma * (a11 / det).sqrt();

            let (wm, hm) = simpson_weights(mu_c - 10.0 * sd_mu, mu_c + 10.0 * sd_mu, n_inner);
            let (wb, hb) = simpson_weights(
                beta_c - 10.0 * sd_beta,
                beta_c + 10.0 * sd_beta,
                n_inner,
            );
            let base = -0.5 * sums.n * (LN_2PI + u)
                - 0.5 * (LN_2PI + self.sigma_mu_sq.ln() + u)
                - 0.5 * (LN_2PI + sb2.ln() + u)
                + self.log_prior_sigma(u);
            for ib in 0..n_inner {
                let beta = beta_c - 10.0 * sd_beta + hb * ib as f64;
                let lp_beta = -beta * beta / (2.0 * sb2 * s2) + wb[ib].ln();
                for im in 0..n_inner {
                    let mu = mu_c - 10.0 * sd_mu + hm * im as f64;
                    let rss = sums.rss(mu, beta);
                    buf[ib * n_inner + im] = base + lp_beta + wm[im].ln()
                        - rss / (2.0 * s2)
                        - mu * mu / (2.0 * self.sigma_mu_sq * s2);
                }
            }
            slice_terms.push(log_sum_exp(&buf) + wui.ln());
        }
        log_sum_exp(&slice_terms)
    }

    fn log_marginal_h0(&self, sums: &Sums, mult: usize) -> f64 {
        let (us, wu) = self.u_grid(sums, mult);
        let n_inner = 240 * mult + 1;
        let mut slice_terms = Vec::with_capacity(us.len());
        let mut buf = vec![0.0f64; n_inner];
        for (&u, &wui) in us.iter().zip(&wu) {
            let s2 = u.exp();
            let sigma = s2.sqrt();
            let a11 = sums.n + 1.0 / self.sigma_mu_sq;
            let mu_c = sums.sz / a11;
            let sd_mu = sigma / a11.sqrt();
            let (wm, hm) = simpson_weights(mu_c - 10.0 * sd_mu, mu_c + 10.0 * sd_mu, n_inner);
            let base = -0.5 * sums.n * (LN_2PI + u)
                - 0.5 * (LN_2PI + self.sigma_mu_sq.ln() + u)
                + self.log_prior_sigma(u);
            for im in 0..n_inner {
                let mu = mu_c - 10.0 * sd_mu + hm * im as f64;
                let rss = sums.rss(mu, 0.0);
                buf[im] = base + wm[im].ln()
                    - rss / (2.0 * s2)
                    - mu * mu / (2.0 * self.sigma_mu_sq * s2);
            }
            slice_terms.push(log_sum_exp(&buf) + wui.ln());
        }
        log_sum_exp(&slice_terms)
    }
}
