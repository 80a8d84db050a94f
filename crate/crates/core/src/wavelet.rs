//! Orthonormal Haar discrete wavelet transform.
//!
//! Coefficients are indexed by `(scale, location)`: scale 0 holds the single
//! scaling coefficient (proportional to the signal sum), scale 1 contrasts the
//! two halves of the region, and scale `s >= 2` holds `2^(s-1)` coefficients
//! contrasting adjacent blocks of length `2^(J-s)`. The flat layout is
//! `[s0, s1, s2(x2), s3(x4), ...]`.

use crate::error::{invalid, Result};

const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Index of a single wavelet coefficient. Locations are 1-based.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub struct CoeffIndex {
    pub scale: u32,
    pub location: usize,
}

impl CoeffIndex {
    pub fn new(scale: u32, location: usize) -> Self {
        CoeffIndex { scale, location }
    }

    /// Number of coefficients at `scale` (independent of J for valid scales).
    pub fn count_at_scale(scale: u32) -> usize {
        if scale <= 1 {
            1
        } else {
            1 << (scale - 1)
        }
    }

    /// Position in the flat coefficient layout.
    pub fn flat(&self) -> usize {
        if self.scale == 0 {
            0
        } else {
            (1 << (self.scale - 1)) + self.location - 1
        }
    }

    /// Inverse of [`CoeffIndex::flat`].
    pub fn from_flat(idx: usize) -> Self {
        match idx {
            0 => CoeffIndex::new(0, 1),
            1 => CoeffIndex::new(1, 1),
            _ => {
                let scale = usize::BITS - idx.leading_zeros();
                let location = idx - (1 << (scale - 1)) + 1;
                CoeffIndex::new(scale, location)
            }
        }
    }

    fn validate(&self, j: u32) -> Result<()> {
        if self.scale > j {
            return Err(invalid(format!(
                "scale {} out of range for J={}",
                self.scale, j
            )));
        }
        let n = Self::count_at_scale(self.scale);
        if self.location == 0 || self.location > n {
            return Err(invalid(format!(
                "location {} out of range at scale {} (valid: 1..={})",
                self.location, self.scale, n
            )));
        }
        Ok(())
    }
}

/// A per-base signal over a region of length `B = 2^J`, `J >= 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct Signal {
    values: Vec<f64>,
}

impl Signal {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let b = values.len();
        if b < 2 || !b.is_power_of_two() {
            return Err(invalid(format!(
                "signal length {} is not 2^J with J >= 1",
                b
            )));
        }
        Ok(Signal { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of detail scales J (so `len() == 2^J`).
    pub fn levels(&self) -> u32 {
        self.values.len().trailing_zeros()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Haar coefficients of a length-`2^J` signal, stored flat.
#[derive(Clone, Debug, PartialEq)]
pub struct WaveletCoeffs {
    j: u32,
    values: Vec<f64>,
}

impl WaveletCoeffs {
    /// Build from the flat layout; the length fixes J.
    pub fn from_flat(values: Vec<f64>) -> Result<Self> {
        let b = values.len();
        if b < 2 || !b.is_power_of_two() {
            return Err(invalid(format!(
                "coefficient count {} is not 2^J with J >= 1",
                b
            )));
        }
        Ok(WaveletCoeffs {
            j: b.trailing_zeros(),
            values,
        })
    }

    pub fn zeros(j: u32) -> Self {
        WaveletCoeffs {
            j,
            values: vec![0.0; 1 << j],
        }
    }

    pub fn j(&self) -> u32 {
        self.j
    }

    /// Region length B.
    pub fn b(&self) -> usize {
        1 << self.j
    }

    pub fn flat(&self) -> &[f64] {
        &self.values
    }

    pub fn flat_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn coeff(&self, idx: CoeffIndex) -> Result<f64> {
        idx.validate(self.j)?;
        Ok(self.values[idx.flat()])
    }

    /// The zeroth-scale (scaling) coefficient.
    pub fn zeroth(&self) -> f64 {
        self.values[0]
    }
}

/// Forward transform: `coeffs = W * signal`.
pub fn dwt(signal: &Signal) -> WaveletCoeffs {
    let mut out = vec![0.0; signal.len()];
    dwt_into(signal.values(), &mut out);
    WaveletCoeffs {
        j: signal.levels(),
        values: out,
    }
}

/// Inverse transform: `signal = W' * coeffs`.
pub fn idwt(coeffs: &WaveletCoeffs) -> Signal {
    let mut out = vec![0.0; coeffs.b()];
    idwt_into(coeffs.flat(), &mut out);
    Signal { values: out }
}

/// Fast O(B) pyramid, writing the flat coefficient layout into `out`.
///
/// `signal.len()` must be a power of two >= 2 and `out` the same length.
pub(crate) fn dwt_into(signal: &[f64], out: &mut [f64]) {
    let b = signal.len();
    debug_assert!(b >= 2 && b.is_power_of_two());
    debug_assert_eq!(out.len(), b);
    // Approximations are refined in place in the low half of `out`; each pass
    // writes its details into the block owned by the scale it produces.
    let mut approx = signal.to_vec();
    let mut len = b;
    while len > 1 {
        let half = len / 2;
        for k in 0..half {
            let x = approx[2 * k];
            let y = approx[2 * k + 1];
            out[half + k] = (x - y) / SQRT_2;
            approx[k] = (x + y) / SQRT_2;
        }
        len = half;
    }
    out[0] = approx[0];
}

/// Inverse pyramid for the flat coefficient layout.
pub(crate) fn idwt_into(coeffs: &[f64], out: &mut [f64]) {
    let b = coeffs.len();
    debug_assert!(b >= 2 && b.is_power_of_two());
    debug_assert_eq!(out.len(), b);
    out[0] = coeffs[0];
    let mut len = 1;
    let mut buf = vec![0.0; b];
    while len < b {
        for k in (0..len).rev() {
            let a = out[k];
            let d = coeffs[len + k];
            buf[2 * k] = (a + d) / SQRT_2;
            buf[2 * k + 1] = (a - d) / SQRT_2;
        }
        out[..2 * len].copy_from_slice(&buf[..2 * len]);
        len *= 2;
    }
}

/// The contiguous 1-based base interval on which coefficient `(s, l)` has
/// nonzero weight, for a region of length `b_len`.
pub fn wc_support(scale: u32, location: usize, b_len: usize) -> Result<(usize, usize)> {
    if b_len < 2 || !b_len.is_power_of_two() {
        return Err(invalid(format!("region length {} is not 2^J", b_len)));
    }
    let j = b_len.trailing_zeros();
    CoeffIndex::new(scale, location).validate(j)?;
    if scale <= 1 {
        return Ok((1, b_len));
    }
    let width = 1usize << (j - scale + 1);
    Ok(((location - 1) * width + 1, location * width))
}

/// The explicit orthonormal DWT matrix, represented structurally (each row is
/// a signed constant on a dyadic interval), so large J costs nothing to hold.
#[derive(Clone, Debug)]
pub struct DwtMatrix {
    j: u32,
}

/// Build the `B x B` transform matrix for a region of length `2^j`.
pub fn dwt_matrix(j: u32) -> Result<DwtMatrix> {
    if !(1..=20).contains(&j) {
        return Err(invalid(format!("J={} out of supported range 1..=20", j)));
    }
    Ok(DwtMatrix { j })
}

impl DwtMatrix {
    pub fn j(&self) -> u32 {
        self.j
    }

    pub fn b(&self) -> usize {
        1 << self.j
    }

    /// Row magnitude for `scale` (all nonzero entries share it).
    pub fn magnitude(&self, scale: u32) -> f64 {
        if scale == 0 {
            0.5f64.powi(self.j as i32).sqrt()
        } else {
            0.5f64.powi((self.j - scale + 1) as i32).sqrt()
        }
    }

    /// Entry of row `(scale, location)` at 1-based base `base`.
    pub fn entry(&self, scale: u32, location: usize, base: usize) -> Result<f64> {
        let (lo, hi) = wc_support(scale, location, self.b())?;
        if base == 0 || base > self.b() {
            return Err(invalid(format!("base {} out of range", base)));
        }
        if base < lo || base > hi {
            return Ok(0.0);
        }
        let mag = self.magnitude(scale);
        if scale == 0 {
            return Ok(mag);
        }
        let mid = lo + (hi - lo) / 2;
        Ok(if base <= mid { mag } else { -mag })
    }

    /// Write row `flat_idx` of W into `buf` (length B).
    pub fn fill_row(&self, flat_idx: usize, buf: &mut [f64]) {
        let idx = CoeffIndex::from_flat(flat_idx);
        let (lo, hi) = wc_support(idx.scale, idx.location, self.b()).expect("valid flat index");
        buf.fill(0.0);
        let mag = self.magnitude(idx.scale);
        if idx.scale == 0 {
            buf[lo - 1..hi].fill(mag);
        } else {
            let mid = lo + (hi - lo) / 2;
            buf[lo - 1..mid].fill(mag);
            buf[mid..hi].fill(-mag);
        }
    }

    /// `W * x` computed from the row structure, O(B log B).
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        let b = self.b();
        if x.len() != b {
            return Err(invalid(format!(
                "vector length {} does not match B={}",
                x.len(),
                b
            )));
        }
        // prefix[i] = sum of x[0..i]
        let mut prefix = vec![0.0; b + 1];
        for (i, v) in x.iter().enumerate() {
            prefix[i + 1] = prefix[i] + v;
        }
        let mut out = vec![0.0; b];
        for flat in 0..b {
            let idx = CoeffIndex::from_flat(flat);
            let (lo, hi) = wc_support(idx.scale, idx.location, b)?;
            let mag = self.magnitude(idx.scale);
            out[flat] = if idx.scale == 0 {
                mag * (prefix[hi] - prefix[lo - 1])
            } else {
                let mid = lo + (hi - lo) / 2;
                mag * ((prefix[mid] - prefix[lo - 1]) - (prefix[hi] - prefix[mid]))
            };
        }
        Ok(out)
    }

    /// Dense copy, rows in flat order. Refused above J=12 (256 MB).
    pub fn to_dense(&self) -> Result<Vec<Vec<f64>>> {
        if self.j > 12 {
            return Err(invalid(format!("dense matrix for J={} too large", self.j)));
        }
        let b = self.b();
        let mut rows = vec![vec![0.0; b]; b];
        for (flat, row) in rows.iter_mut().enumerate() {
            self.fill_row(flat, row);
        }
        Ok(rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha12Rng;

    fn dwt_vec(x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        dwt_into(x, &mut out);
        out
    }

    #[test]
    fn constant_signal_has_only_zeroth() {
        let c = dwt(&Signal::new(vec![1.0; 4]).unwrap());
        assert_abs_diff_eq!(c.zeroth(), 2.0, epsilon = 1e-12);
        for &v in &c.flat()[1..] {
            assert_abs_diff_eq!(v, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn unit_impulse_matches_explicit_matrix() {
        // [1,0,0,0]: s0 = 0.5, s1 = 0.5, s2 = (1/sqrt2, 0)
        let c = dwt_vec(&[1.0, 0.0, 0.0, 0.0]);
        assert_abs_diff_eq!(c[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(c[1], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(c[2], 1.0 / SQRT_2, epsilon = 1e-12);
        assert_abs_diff_eq!(c[3], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn idwt_of_zeroth_only_is_constant() {
        let mut c = WaveletCoeffs::zeros(2);
        c.flat_mut()[0] = 2.0;
        let s = idwt(&c);
        for &v in s.values() {
            assert_abs_diff_eq!(v, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn idwt_zero_is_zero() {
        let s = idwt(&WaveletCoeffs::zeros(3));
        assert!(s.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn idwt_unit_coeff_reads_matrix_row() {
        let mut c = WaveletCoeffs::zeros(2);
        let flat = CoeffIndex::new(2, 2).flat();
        c.flat_mut()[flat] = 1.0;
        let s = idwt(&c);
        let expect = [0.0, 0.0, 1.0 / SQRT_2, -1.0 / SQRT_2];
        for (a, e) in s.values().iter().zip(expect) {
            assert_abs_diff_eq!(*a, e, epsilon = 1e-12);
        }
    }

    #[test]
    fn explicit_matrix_small_cases() {
        let w = dwt_matrix(1).unwrap();
        let r = 1.0 / SQRT_2;
        assert_abs_diff_eq!(w.entry(0, 1, 1).unwrap(), r, epsilon = 1e-15);
        assert_abs_diff_eq!(w.entry(0, 1, 2).unwrap(), r, epsilon = 1e-15);
        assert_abs_diff_eq!(w.entry(1, 1, 1).unwrap(), r, epsilon = 1e-15);
        assert_abs_diff_eq!(w.entry(1, 1, 2).unwrap(), -r, epsilon = 1e-15);

        let w = dwt_matrix(2).unwrap();
        let mut row = vec![0.0; 4];
        w.fill_row(CoeffIndex::new(1, 1).flat(), &mut row);
        assert_eq!(row, vec![0.5, 0.5, -0.5, -0.5]);
    }

    #[test]
    fn support_examples() {
        assert_eq!(wc_support(0, 1, 1024).unwrap(), (1, 1024));
        assert_eq!(wc_support(1, 1, 1024).unwrap(), (1, 1024));
        assert_eq!(wc_support(2, 2, 8).unwrap(), (5, 8));
        assert!(wc_support(2, 3, 8).is_err());
        assert!(wc_support(4, 1, 8).is_err());
        assert!(wc_support(1, 1, 3).is_err());
    }

    #[test]
    fn rejects_bad_lengths_and_range() {
        assert!(Signal::new(vec![1.0, 2.0, 3.0]).is_err());
        assert!(Signal::new(vec![1.0]).is_err());
        assert!(WaveletCoeffs::from_flat(vec![0.0; 6]).is_err());
        assert!(dwt_matrix(0).is_err());
        assert!(dwt_matrix(21).is_err());
        assert!(dwt_matrix(20).is_ok());
    }

    #[test]
    fn roundtrip_random_signals() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for j in 2..=10 {
            let b = 1usize << j;
            let x: Vec<f64> = (0..b).map(|_| rng.random_range(-3.0..3.0)).collect();
            let mut c = vec![0.0; b];
            let mut back = vec![0.0; b];
            dwt_into(&x, &mut c);
            idwt_into(&c, &mut back);
            for (a, e) in back.iter().zip(&x) {
                assert_abs_diff_eq!(*a, *e, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn fast_transform_matches_matrix() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        for j in 1..=8 {
            let b = 1usize << j;
            let x: Vec<f64> = (0..b).map(|_| rng.random_range(-1.0..1.0)).collect();
            let fast = dwt_vec(&x);
            let via_matrix = dwt_matrix(j).unwrap().matvec(&x).unwrap();
            for (a, e) in fast.iter().zip(&via_matrix) {
                assert_abs_diff_eq!(*a, *e, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn orthonormal_rows_small_j() {
        for j in 1..=6 {
            let rows = dwt_matrix(j).unwrap().to_dense().unwrap();
            let b = rows.len();
            for r in 0..b {
                for c in r..b {
                    let dot: f64 = rows[r].iter().zip(&rows[c]).map(|(a, b)| a * b).sum();
                    let expect = if r == c { 1.0 } else { 0.0 };
                    assert_abs_diff_eq!(dot, expect, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn flat_index_roundtrip() {
        for idx in 0..1024 {
            let ci = CoeffIndex::from_flat(idx);
            assert_eq!(ci.flat(), idx);
        }
        assert_eq!(CoeffIndex::from_flat(0), CoeffIndex::new(0, 1));
        assert_eq!(CoeffIndex::from_flat(1), CoeffIndex::new(1, 1));
        assert_eq!(CoeffIndex::from_flat(2), CoeffIndex::new(2, 1));
        assert_eq!(CoeffIndex::from_flat(5), CoeffIndex::new(3, 2));
    }

    proptest::proptest! {
        #[test]
        fn energy_and_linearity(seed in 0u64..500) {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let j = rng.random_range(1u32..=9);
            let b = 1usize << j;
            let x: Vec<f64> = (0..b).map(|_| rng.random_range(-5.0..5.0)).collect();
            let y: Vec<f64> = (0..b).map(|_| rng.random_range(-5.0..5.0)).collect();
            let (a, bb) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));

            let cx = dwt_vec(&x);
            let cy = dwt_vec(&y);
            let nx: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            let ncx: f64 = cx.iter().map(|v| v * v).sum::<f64>().sqrt();
            proptest::prop_assert!((nx - ncx).abs() <= 1e-10 * nx.max(1.0));

            let combo: Vec<f64> = x.iter().zip(&y).map(|(xi, yi)| a * xi + bb * yi).collect();
            let c_combo = dwt_vec(&combo);
            for i in 0..b {
                let lin = a * cx[i] + bb * cy[i];
                proptest::prop_assert!((c_combo[i] - lin).abs() <= 1e-10);
            }
        }
    }
}
