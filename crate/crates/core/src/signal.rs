//! Finitely supported real functions on the integers and their convolution.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Largest admissible convolution output length.
pub const MAX_SUPPORT: usize = 1 << 30;

/// A function `Z -> R` stored as a dense window `values[k] = f(offset + k)`;
/// zero outside the window.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Signal {
    offset: i64,
    values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvolutionMethod {
    Direct,
    Fast,
}

impl Signal {
    pub fn new(offset: i64, values: Vec<f64>) -> Self {
        Signal { offset, values }
    }

    pub fn zero() -> Self {
        Signal::default()
    }

    /// `delta_n`
    pub fn delta(n: i64) -> Self {
        Signal::new(n, vec![1.0])
    }

    /// Builds a signal from `(position, value)` pairs; repeated positions add up.
    pub fn from_pairs(pairs: &[(i64, f64)]) -> Self {
        if pairs.is_empty() {
            return Signal::zero();
        }
        let lo = pairs.iter().map(|p| p.0).min().unwrap();
        let hi = pairs.iter().map(|p| p.0).max().unwrap();
        let mut values = vec![0.0; (hi - lo + 1) as usize];
        for &(x, v) in pairs {
            values[(x - lo) as usize] += v;
        }
        Signal::new(lo, values)
    }

    pub fn offset(&self) -> i64 {
        self.offset
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// One past the last stored index.
    pub fn end(&self) -> i64 {
        self.offset + self.values.len() as i64
    }

    pub fn get(&self, x: i64) -> f64 {
        if x < self.offset {
            return 0.0;
        }
        self.values.get((x - self.offset) as usize).copied().unwrap_or(0.0)
    }

    /// Nonzero entries in increasing position.
    pub fn iter_nonzero(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(move |(k, v)| (self.offset + k as i64, *v))
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Drops leading and trailing zeros.
    pub fn trimmed(mut self) -> Self {
        let Some(first) = self.values.iter().position(|v| *v != 0.0) else {
            return Signal::zero();
        };
        let last = self.values.iter().rposition(|v| *v != 0.0).unwrap();
        self.values.truncate(last + 1);
        self.values.drain(..first);
        self.offset += first as i64;
        self
    }

    /// `x -> f(-x)`
    pub fn reversed(&self) -> Self {
        let mut values = self.values.clone();
        values.reverse();
        Signal::new(-(self.end() - 1), values)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Signal::new(self.offset, self.values.iter().map(|v| v * factor).collect())
    }

    /// Pointwise map over the stored window.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Signal::new(self.offset, self.values.iter().map(|v| f(*v)).collect())
    }

    /// Pointwise sum.
    pub fn add(&self, other: &Signal) -> Self {
        self.combine(other, |a, b| a + b)
    }

    /// Pointwise combination over the union of both windows.
    pub fn combine(&self, other: &Signal, op: impl Fn(f64, f64) -> f64) -> Self {
        if self.is_empty() && other.is_empty() {
            return Signal::zero();
        }
        let lo = match (self.is_empty(), other.is_empty()) {
            (true, _) => other.offset,
            (_, true) => self.offset,
            _ => self.offset.min(other.offset),
        };
        let hi = self.end().max(other.end());
        let values = (lo..hi).map(|x| op(self.get(x), other.get(x))).collect();
        Signal::new(lo, values)
    }
}

/// Exact discrete convolution `(a * b)(x) = sum_y a(y) b(x - y)`.
pub fn convolve(a: &Signal, b: &Signal, method: ConvolutionMethod) -> Result<Signal> {
    if a.is_empty() || b.is_empty() {
        return Ok(Signal::zero());
    }
    let len = a.len() + b.len() - 1;
    if len > MAX_SUPPORT {
        return Err(Error::SizeOverflow {
            len,
            limit: MAX_SUPPORT,
        });
    }
    let offset = a.offset + b.offset;
    let values = match method {
        ConvolutionMethod::Direct => {
            let mut out = vec![0.0; len];
            let b_nz: Vec<(usize, f64)> = b
                .values
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(k, v)| (k, *v))
                .collect();
            for (i, &av) in a.values.iter().enumerate() {
                if av == 0.0 {
                    continue;
                }
                for &(j, bv) in &b_nz {
                    out[i + j] += av * bv;
                }
            }
            out
        }
        ConvolutionMethod::Fast => fft_convolve(&a.values, &b.values, len),
    };
    Ok(Signal::new(offset, values))
}

fn plan(size: usize) -> (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>) {
    let mut planner = FftPlanner::new();
    (planner.plan_fft_forward(size), planner.plan_fft_inverse(size))
}

fn fft_convolve(a: &[f64], b: &[f64], len: usize) -> Vec<f64> {
    let size = len.next_power_of_two();
    let (fwd, inv) = plan(size);
    // pack both real inputs into one complex transform: z = a + i b
    let mut z = vec![Complex64::new(0.0, 0.0); size];
    for (k, v) in a.iter().enumerate() {
        z[k].re = *v;
    }
    for (k, v) in b.iter().enumerate() {
        z[k].im = *v;
    }
    fwd.process(&mut z);
    // A(k) = (Z(k) + conj Z(-k)) / 2, B(k) = (Z(k) - conj Z(-k)) / 2i, AB = (Z(k)^2 - conj Z(-k)^2) / 4i
    let mut prod = vec![Complex64::new(0.0, 0.0); size];
    for k in 0..size {
        let zk = z[k];
        let zm = z[(size - k) % size].conj();
        prod[k] = (zk * zk - zm * zm) / Complex64::new(0.0, 4.0);
    }
    inv.process(&mut prod);
    let scale = 1.0 / size as f64;
    prod[..len].iter().map(|c| c.re * scale).collect()
}

/// Autocorrelation `sum_k v[k] v[k - lag]` for `lag` in `0..max_lag`, from
/// one transform of `|V|^2`.
pub fn autocorrelation_lags(values: &[f64], max_lag: usize) -> Vec<f64> {
    let n = values.len();
    if n == 0 {
        return vec![0.0; max_lag];
    }
    let size = (2 * n - 1).next_power_of_two();
    let (fwd, inv) = plan(size);
    let mut z = vec![Complex64::new(0.0, 0.0); size];
    for (k, v) in values.iter().enumerate() {
        z[k].re = *v;
    }
    fwd.process(&mut z);
    for c in z.iter_mut() {
        *c = Complex64::new(c.norm_sqr(), 0.0);
    }
    inv.process(&mut z);
    let scale = 1.0 / size as f64;
    (0..max_lag)
        .map(|lag| if lag < n { z[lag].re * scale } else { 0.0 })
        .collect()
}

/// Autocorrelations of two equal-length real sequences for lags
/// `0..max_lag`, packed into a single complex transform `z = a + i b`.
pub fn autocorrelation_pair(a: &[f64], b: &[f64], max_lag: usize) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    if n == 0 {
        return (vec![0.0; max_lag], vec![0.0; max_lag]);
    }
    let size = (2 * n - 1).next_power_of_two();
    let (fwd, inv) = plan(size);
    let mut z: Vec<Complex64> = (0..size)
        .map(|k| {
            if k < n {
                Complex64::new(a[k], b[k])
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    fwd.process(&mut z);
    // |A(k)|^2 + i |B(k)|^2 with A, B recovered from Z(k) and conj Z(-k)
    let spectra: Vec<Complex64> = (0..size)
        .map(|k| {
            let zk = z[k];
            let zm = z[(size - k) % size].conj();
            let a_hat = (zk + zm) * 0.5;
            let b_hat = (zk - zm) * Complex64::new(0.0, -0.5);
            Complex64::new(a_hat.norm_sqr(), b_hat.norm_sqr())
        })
        .collect();
    z = spectra;
    inv.process(&mut z);
    let scale = 1.0 / size as f64;
    let pick = |f: fn(&Complex64) -> f64| -> Vec<f64> {
        (0..max_lag)
            .map(|lag| if lag < n { f(&z[lag]) * scale } else { 0.0 })
            .collect()
    };
    (pick(|c| c.re), pick(|c| c.im))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn delta_is_identity() {
        let f = Signal::new(-3, vec![1.0, 2.0, 0.5]);
        for m in [ConvolutionMethod::Direct, ConvolutionMethod::Fast] {
            let out = convolve(&Signal::delta(0), &f, m).unwrap();
            for x in -5..5 {
                assert!((out.get(x) - f.get(x)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn deltas_add_positions() {
        let out = convolve(&Signal::delta(3), &Signal::delta(5), ConvolutionMethod::Direct).unwrap();
        assert_eq!(out.trimmed(), Signal::delta(8));
        let out = convolve(&Signal::delta(3), &Signal::delta(5), ConvolutionMethod::Fast).unwrap();
        assert!((out.get(8) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fast_matches_direct_on_sparse_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let mk = |rng: &mut ChaCha8Rng| {
                let pairs: Vec<(i64, f64)> = (0..100)
                    .map(|_| (rng.gen_range(-5000..5000), rng.gen_range(-1.0..1.0)))
                    .collect();
                Signal::from_pairs(&pairs)
            };
            let a = mk(&mut rng);
            let b = mk(&mut rng);
            let d = convolve(&a, &b, ConvolutionMethod::Direct).unwrap();
            let f = convolve(&a, &b, ConvolutionMethod::Fast).unwrap();
            assert_eq!(d.offset(), f.offset());
            let err = d
                .values()
                .iter()
                .zip(f.values())
                .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
            assert!(err < 1e-9, "max deviation {err}");
        }
    }

    #[test]
    fn reversal_and_trim() {
        let f = Signal::new(2, vec![0.0, 1.0, 2.0, 0.0]);
        let t = f.clone().trimmed();
        assert_eq!(t.offset(), 3);
        assert_eq!(t.values(), &[1.0, 2.0]);
        let r = t.reversed();
        assert_eq!(r.get(-3), 1.0);
        assert_eq!(r.get(-4), 2.0);
        assert_eq!(Signal::new(0, vec![0.0; 4]).trimmed(), Signal::zero());
    }

    #[test]
    fn paired_autocorrelation_separates() {
        let a = [1.0, 0.0, 2.0, 3.0, 0.5];
        let b = [0.3, -1.0, 0.0, 2.0, 1.5];
        let (ra, rb) = autocorrelation_pair(&a, &b, 6);
        let la = autocorrelation_lags(&a, 6);
        let lb = autocorrelation_lags(&b, 6);
        for k in 0..6 {
            assert!((ra[k] - la[k]).abs() < 1e-12 && (rb[k] - lb[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn autocorrelation_lags_match_direct() {
        let v = [1.0, 0.0, 2.0, 3.0, 0.5];
        let lags = autocorrelation_lags(&v, 7);
        for (lag, got) in lags.iter().enumerate() {
            let want: f64 = (lag..v.len()).map(|k| v[k] * v[k - lag]).sum();
            assert!((got - want).abs() < 1e-12);
        }
    }
}
