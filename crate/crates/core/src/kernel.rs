//! Smoothed averaging kernels `K_{h,N}` along `N_h`, their autocorrelation
//! `K * K~`, the slowly varying main term `G_N`, and the scale-by-scale
//! report of how the autocorrelation splits into a mass at the origin,
//! `G_N`, and the error `E_N = K * K~ - G_N`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::growth::InverseFunction;
use crate::seqset::SequenceSet;
use crate::signal::{autocorrelation_lags, autocorrelation_pair, Signal};
use crate::stats::linear_fit;

/// Lag steps used when measuring the Lipschitz constant of `G_N`.
pub const LIPSCHITZ_STEPS: [usize; 4] = [1, 2, 4, 8];

fn bump(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

/// Smooth step from 0 (at `u <= 0`) to 1 (at `u >= 1`).
fn smooth_step(u: f64) -> f64 {
    let a = bump(u);
    let b = bump(1.0 - u);
    a / (a + b)
}

/// The cutoff `eta`: zero on `(-inf, 1/2]`, rising on `(1/2, 1)`, one on
/// `[1, 2]`, falling on `(2, 4)`, zero on `[4, inf)`; `C^inf` everywhere.
pub fn eta(t: f64) -> f64 {
    if t <= 0.5 || t >= 4.0 {
        0.0
    } else if t < 1.0 {
        smooth_step(2.0 * t - 1.0)
    } else if t <= 2.0 {
        1.0
    } else {
        smooth_step((4.0 - t) / 2.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    /// Divide by `|N_h cap [1, N]|`.
    CountExact,
    /// Divide by `phi(N)`.
    PhiApprox,
}

/// `K_{h,N}(x) = (1/norm) sum_{n in N_h} delta_n(x) eta(n/N)`.
#[derive(Debug, Clone)]
pub struct Kernel {
    scale: i64,
    normalization: Normalization,
    norm: f64,
    signal: Signal,
}

impl Kernel {
    pub fn scale(&self) -> i64 {
        self.scale
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn signal(&self) -> &Signal {
        &self.signal
    }

    pub fn mass(&self) -> f64 {
        self.signal.sum()
    }
}

/// Integers `n` with `eta(n/N) != 0`, i.e. `N/2 < n < 4N`, as `(first, len)`.
fn eta_window(n: i64) -> (i64, usize) {
    let first = n / 2 + 1;
    (first, (4 * n - first) as usize)
}

pub fn build_kernel(
    set: &SequenceSet,
    phi: &InverseFunction,
    n: i64,
    normalization: Normalization,
) -> Result<Kernel> {
    if n < 1 || 4 * n > set.n_max() {
        return Err(Error::Range {
            what: "4N",
            value: 4 * n,
            lo: 4,
            hi: set.n_max(),
        });
    }
    let norm = match normalization {
        Normalization::CountExact => {
            let count = set.count(n)?;
            if count == 0 {
                return Err(Error::Degenerate(format!("N_h has no elements in [1, {n}]")));
            }
            count as f64
        }
        Normalization::PhiApprox => phi.invert(n as f64)?,
    };
    let (first, len) = eta_window(n);
    let mut values = vec![0.0; len];
    for &e in set.window(first - 1, 4 * n - 1) {
        values[(e - first) as usize] = eta(e as f64 / n as f64) / norm;
    }
    Ok(Kernel {
        scale: n,
        normalization,
        norm,
        signal: Signal::new(first, values),
    })
}

/// `K * K~` on `[-(L-1), L-1]`; exactly even by construction.
pub fn autocorrelation(kernel: &Kernel) -> Signal {
    let len = kernel.signal.len();
    let lags = autocorrelation_lags(kernel.signal.values(), len);
    mirror(&lags)
}

fn mirror(lags: &[f64]) -> Signal {
    let len = lags.len();
    if len == 0 {
        return Signal::zero();
    }
    let mut values = Vec::with_capacity(2 * len - 1);
    values.extend(lags.iter().rev());
    values.extend(&lags[1..]);
    Signal::new(-(len as i64 - 1), values)
}

/// `phi'(n) eta(n/N)` over the cutoff window, with its first index.
fn weighted_derivative(phi: &InverseFunction, n: i64) -> Result<(i64, Vec<f64>)> {
    let (first, len) = eta_window(n);
    let start = first.max(phi.y0().ceil() as i64);
    let skip = (start - first) as usize;
    let xs = phi.invert_consecutive(start, len.saturating_sub(skip))?;
    let g = phi.source();
    let mut w = vec![0.0; len];
    for (k, x) in xs.into_iter().enumerate() {
        let m = start + k as i64;
        w[k + skip] = eta(m as f64 / n as f64) / g.eval(x, 1)?;
    }
    Ok((first, w))
}

/// `G_N(x) = phi(N)^-2 sum_n phi'(n) phi'(n+|x|) eta(n/N) eta((n+|x|)/N)` by
/// direct summation.
pub fn compute_gn(phi: &InverseFunction, n: i64, x: i64) -> Result<f64> {
    let x = x.abs();
    let (first, len) = eta_window(n);
    let last = first + len as i64 - 1;
    if x > last - first {
        return Ok(0.0);
    }
    let phi_n = phi.invert(n as f64)?;
    let lo = first.max(phi.y0().ceil() as i64);
    let mut sum = 0.0;
    for m in lo..=last - x {
        let a = eta(m as f64 / n as f64) * phi.deriv(m as f64, 1)?;
        let b = eta((m + x) as f64 / n as f64) * phi.deriv((m + x) as f64, 1)?;
        sum += a * b;
    }
    Ok(sum / (phi_n * phi_n))
}

/// `K * K~` and `G_N` at all nonnegative lags of one scale.
#[derive(Debug, Clone)]
pub struct ScaleCorrelation {
    pub scale: i64,
    pub phi_n: f64,
    /// `(K * K~)(x)` for `x = 0, 1, ...`
    pub acf: Vec<f64>,
    /// `G_N(x)` for `x = 0, 1, ...`
    pub gn: Vec<f64>,
    pub mass: f64,
}

impl ScaleCorrelation {
    pub fn compute(kernel: &Kernel, phi: &InverseFunction) -> Result<Self> {
        let n = kernel.scale;
        let (first, w) = weighted_derivative(phi, n)?;
        debug_assert_eq!(first, kernel.signal.offset());
        let len = w.len();
        let (acf, mut gn) = autocorrelation_pair(kernel.signal.values(), &w, len);
        let mass = acf[0] + 2.0 * acf[1..].iter().sum::<f64>();
        let phi_n = phi.invert(n as f64)?;
        let inv = 1.0 / (phi_n * phi_n);
        gn.iter_mut().for_each(|v| *v *= inv);
        Ok(ScaleCorrelation {
            scale: n,
            phi_n,
            acf,
            gn,
            mass,
        })
    }

    /// Largest lag in the small-`x` regime `0 < |x| <= phi(N)`.
    pub fn small_lag_limit(&self) -> usize {
        (self.phi_n.floor() as usize).min(self.acf.len().saturating_sub(1))
    }

    pub fn error_at(&self, lag: usize) -> f64 {
        self.acf[lag] - self.gn[lag]
    }

    pub fn report(&self) -> DecompositionReport {
        let n = self.scale as f64;
        let cut = self.small_lag_limit();
        let small_x_bound = self.acf[1..=cut].iter().fold(0.0f64, |m, v| m.max(n * v.abs()));
        let tail = cut + 1..self.acf.len();
        let (gn_sup, en_sup) = self.acf[tail.clone()]
            .par_iter()
            .zip(&self.gn[tail.clone()])
            .map(|(a, g)| (n * g.abs(), (a - g).abs()))
            .reduce(|| (0.0, 0.0), |x, y| (x.0.max(y.0), x.1.max(y.1)));
        let gn_lipschitz = LIPSCHITZ_STEPS
            .iter()
            .map(|&h| {
                self.gn[tail.clone()]
                    .par_windows(h + 1)
                    .map(|w| n * n * (w[h] - w[0]).abs() / h as f64)
                    .reduce(|| 0.0, f64::max)
            })
            .fold(0.0, f64::max);
        DecompositionReport {
            scale: self.scale,
            small_x_bound,
            gn_sup,
            en_sup,
            gn_lipschitz,
            mass: self.mass,
            at_zero: self.acf[0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecompositionReport {
    pub scale: i64,
    /// `max_{0<|x|<=phi(N)} N |K*K~(x)|`
    pub small_x_bound: f64,
    /// `max_{|x|>phi(N)} N |G_N(x)|`
    pub gn_sup: f64,
    /// `max_{|x|>phi(N)} |K*K~(x) - G_N(x)|`
    pub en_sup: f64,
    /// `max N^2 |G_N(x+h) - G_N(x)| / |h|` over `|x|, |x+h| > phi(N)`
    pub gn_lipschitz: f64,
    /// `sum_x K*K~(x)`
    pub mass: f64,
    /// `K*K~(0)`
    pub at_zero: f64,
}

pub fn decomposition_report(kernel: &Kernel, phi: &InverseFunction) -> Result<DecompositionReport> {
    Ok(ScaleCorrelation::compute(kernel, phi)?.report())
}

/// Reports for the dyadic scales `2^k`, `k` in `ks`, built on one sequence set.
pub fn decomposition_sweep(
    set: &SequenceSet,
    phi: &InverseFunction,
    ks: impl IntoIterator<Item = u32>,
) -> Result<Vec<DecompositionReport>> {
    ks.into_iter()
        .map(|k| {
            let kernel = build_kernel(set, phi, 1 << k, Normalization::PhiApprox)?;
            decomposition_report(&kernel, phi)
        })
        .collect()
}

/// Decay exponent `chi` from `en_sup ~ N^{-1-chi}`: minus the least-squares
/// slope of `log2 en_sup` against `log2 N`, minus one.
pub fn estimate_chi(reports: &[DecompositionReport]) -> Result<f64> {
    let mut scales: Vec<i64> = reports.iter().map(|r| r.scale).collect();
    scales.sort_unstable();
    scales.dedup();
    if scales.len() < 4 {
        return Err(Error::InsufficientData {
            needed: 4,
            got: scales.len(),
        });
    }
    let xs: Vec<f64> = reports.iter().map(|r| (r.scale as f64).log2()).collect();
    let ys: Vec<f64> = reports.iter().map(|r| r.en_sup.log2()).collect();
    let (slope, _) = linear_fit(&xs, &ys)?;
    Ok(-slope - 1.0)
}
