//! The dyadic maximal operator along `N_h`, weak-(1,1) profiles, and the
//! kernel-family hypotheses of the abstract Calderón-Zygmund framework.

use rayon::prelude::*;

use crate::cz::{refine_bad_part, CzDecomposition, RefinedBadPart, Scalar};
use crate::error::{Error, Result};
use crate::growth::InverseFunction;
use crate::kernel::{build_kernel, Kernel, Normalization, ScaleCorrelation};
use crate::seqset::SequenceSet;
use crate::signal::{convolve, ConvolutionMethod, Signal};
use crate::stats;

/// Inputs with at most this many nonzero samples convolve directly.
const DIRECT_NNZ: usize = 32;

/// Kernels `K_{h,2^n}` for `n_lo <= n <= n_hi` and the support data
/// `d_n = |N_h ∩ (2^{n-1}, 4 2^n]|`, `D_n = 4 2^n`.
#[derive(Debug, Clone)]
pub struct ScaleFamily {
    n_lo: u32,
    n_hi: u32,
    kernels: Vec<Kernel>,
    d: Vec<u64>,
    d_big: Vec<u64>,
}

impl ScaleFamily {
    pub fn new(
        set: &SequenceSet,
        phi: &InverseFunction,
        n_lo: u32,
        n_hi: u32,
        normalization: Normalization,
    ) -> Result<Self> {
        if n_lo > n_hi || n_lo == 0 || n_hi > 38 {
            return Err(Error::Range {
                what: "dyadic scale",
                value: n_hi as i64,
                lo: 1,
                hi: 38,
            });
        }
        let kernels = (n_lo..=n_hi)
            .map(|n| build_kernel(set, phi, 1i64 << n, normalization))
            .collect::<Result<Vec<_>>>()?;
        let mut d = Vec::new();
        let mut d_big = Vec::new();
        for n in n_lo..=n_hi {
            let big = 4u64 << n;
            d.push((set.count(big as i64)? - set.count(1i64 << (n - 1))?) as u64);
            d_big.push(big);
        }
        Ok(ScaleFamily {
            n_lo,
            n_hi,
            kernels,
            d,
            d_big,
        })
    }

    pub fn n_lo(&self) -> u32 {
        self.n_lo
    }

    pub fn n_hi(&self) -> u32 {
        self.n_hi
    }

    pub fn scales(&self) -> impl Iterator<Item = u32> {
        self.n_lo..=self.n_hi
    }

    pub fn kernels(&self) -> &[Kernel] {
        &self.kernels
    }

    pub fn kernel(&self, n: u32) -> Option<&Kernel> {
        self.kernels.get(n.checked_sub(self.n_lo)? as usize)
    }

    pub fn d(&self) -> &[u64] {
        &self.d
    }

    pub fn d_big(&self) -> &[u64] {
        &self.d_big
    }

    /// `(d_n, D_n)` at scale `n`.
    pub fn support_data(&self, n: u32) -> Option<(u64, u64)> {
        let k = n.checked_sub(self.n_lo)? as usize;
        Some((*self.d.get(k)?, self.d_big[k]))
    }

    pub fn d_max(&self) -> u64 {
        *self.d_big.last().unwrap()
    }

    /// `max_n log d_n / log D_n`
    pub fn eps0(&self) -> f64 {
        self.d
            .iter()
            .zip(&self.d_big)
            .map(|(&d, &big)| (d.max(1) as f64).ln() / (big as f64).ln())
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest `M` with `M d_n <= d_{n+1}` and `M D_n <= D_{n+1}` for all `n`.
    pub fn growth_ratio(&self) -> f64 {
        let mut m = f64::INFINITY;
        for k in 1..self.d.len() {
            m = m
                .min(self.d[k] as f64 / self.d[k - 1] as f64)
                .min(self.d_big[k] as f64 / self.d_big[k - 1] as f64);
        }
        m
    }

    /// `max_n sum K_n`
    pub fn max_mass(&self) -> f64 {
        self.kernels.iter().map(Kernel::mass).fold(0.0, f64::max)
    }
}

/// `M_h f(x) = max_n |K_n * f(x)|` over the family's scales.
pub fn maximal_function(family: &ScaleFamily, f: &Signal) -> Result<Signal> {
    let f = f.clone().trimmed();
    if f.is_empty() {
        return Ok(Signal::zero());
    }
    let method = if f.iter_nonzero().count() <= DIRECT_NNZ {
        ConvolutionMethod::Direct
    } else {
        ConvolutionMethod::Fast
    };
    let per_scale = family
        .kernels
        .par_iter()
        .map(|k| convolve(k.signal(), &f, method).map(|s| s.map(f64::abs)))
        .collect::<Result<Vec<_>>>()?;
    Ok(per_scale
        .iter()
        .fold(Signal::zero(), |acc, s| acc.combine(s, f64::max))
        .trimmed())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeakTypePoint {
    pub lambda: f64,
    pub superlevel_count: usize,
    pub ratio: f64,
}

/// `lambda |{M_h f > lambda}| / ||f||_1` at each `lambda`.
pub fn weak_type_profile(
    family: &ScaleFamily,
    f: &Signal,
    lambdas: &[f64],
) -> Result<Vec<WeakTypePoint>> {
    let norm = f.l1_norm();
    if norm == 0.0 {
        return Err(Error::Degenerate("f vanishes identically".into()));
    }
    if let Some(&bad) = lambdas.iter().find(|l| !(**l > 0.0)) {
        return Err(Error::Precondition(format!("lambda = {bad} must be positive")));
    }
    let mf = maximal_function(family, f)?;
    Ok(profile_of(&mf, norm, lambdas))
}

/// Profile of an already computed `M_h f`.
pub fn profile_of(mf: &Signal, f_norm: f64, lambdas: &[f64]) -> Vec<WeakTypePoint> {
    let mut sorted: Vec<f64> = mf.values().iter().copied().filter(|v| *v > 0.0).collect();
    sorted.sort_by(f64::total_cmp);
    lambdas
        .par_iter()
        .map(|&lambda| {
            let count = sorted.len() - sorted.partition_point(|v| *v <= lambda);
            WeakTypePoint {
                lambda,
                superlevel_count: count,
                ratio: lambda * count as f64 / f_norm,
            }
        })
        .collect()
}

/// 64 log-spaced heights over `[||f||_1 / (4 D_max), 2 ||f||_inf]`.
pub fn lambda_grid(family: &ScaleFamily, f: &Signal) -> Vec<f64> {
    let lo = f.l1_norm() / (4.0 * family.d_max() as f64);
    let hi = 2.0 * f.sup_norm();
    crate::growth::log_grid(lo, hi, 64)
}

/// Largest ratio of a profile.
pub fn profile_sup(profile: &[WeakTypePoint]) -> f64 {
    profile.iter().map(|p| p.ratio).fold(0.0, f64::max)
}

/// Refinement at family scale `n`, with threshold `lambda d_n`.
pub fn refine_at_scale<T: Scalar>(
    cz: &CzDecomposition<T>,
    s: u32,
    n: u32,
    family: &ScaleFamily,
) -> Result<RefinedBadPart<T>> {
    let (d, big) = family.support_data(n).ok_or(Error::Range {
        what: "family scale",
        value: n as i64,
        lo: family.n_lo as i64,
        hi: family.n_hi as i64,
    })?;
    refine_bad_part(cz, s, n, d, big)
}

/// Per-scale quantities of the kernel-family hypotheses, with `F_n` equal to
/// `K_n * K~_n` on `|x| <= phi(2^n)` and to the smooth model beyond.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FamilyScaleRow {
    pub n: u32,
    pub d: u64,
    pub d_big: u64,
    pub phi_n: f64,
    /// `F_n(0)`
    pub f_zero: f64,
    /// `F_n(0) d_n`
    pub f_zero_times_d: f64,
    /// `sup |K*K~ - F_n|`
    pub residual_sup: f64,
    /// `D_n sup_{x != 0} |F_n(x)|`
    pub f_sup_ratio: f64,
    /// `D_n^2 sup |F_n(x+y) - F_n(x)| / |y|` for `|x|, |x+y| > phi(2^n)`
    pub lipschitz_ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FamilyReport {
    pub rows: Vec<FamilyScaleRow>,
    pub eps0: f64,
    pub growth_ratio: f64,
    /// From the fit `log residual_sup = -(1 + eps1) log D_n + c`.
    pub eps1: f64,
    /// `max_n log phi(2^n) / log d_n`, the exponent above which the
    /// Lipschitz ratio is taken.
    pub eps2: f64,
}

impl FamilyReport {
    pub fn f_zero_spread(&self) -> f64 {
        stats::spread(&self.rows.iter().map(|r| r.f_zero_times_d).collect::<Vec<_>>())
    }

    pub fn f_sup_spread(&self) -> f64 {
        stats::spread(&self.rows.iter().map(|r| r.f_sup_ratio).collect::<Vec<_>>())
    }

    pub fn lipschitz_spread(&self) -> f64 {
        stats::spread(&self.rows.iter().map(|r| r.lipschitz_ratio).collect::<Vec<_>>())
    }
}

pub fn verify_family_hypotheses(family: &ScaleFamily, phi: &InverseFunction) -> Result<FamilyReport> {
    let mut rows = Vec::new();
    for (k, kernel) in family.kernels.iter().enumerate() {
        let corr = ScaleCorrelation::compute(kernel, phi)?;
        // the smooth model is normalised by phi(N)^2; rescale to the kernel's own norm
        let rescale = (corr.phi_n / kernel.norm()).powi(2);
        let cut = corr.small_lag_limit();
        let model = |lag: usize| corr.gn[lag] * rescale;
        let big = family.d_big[k] as f64;
        let mut residual_sup = 0.0f64;
        let mut f_sup = corr.acf[1..=cut].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for lag in cut + 1..corr.acf.len() {
            residual_sup = residual_sup.max((corr.acf[lag] - model(lag)).abs());
            f_sup = f_sup.max(model(lag).abs());
        }
        let mut lipschitz = 0.0f64;
        for &h in &crate::kernel::LIPSCHITZ_STEPS {
            for lag in cut + 1..corr.gn.len().saturating_sub(h) {
                lipschitz = lipschitz.max((model(lag + h) - model(lag)).abs() / h as f64);
            }
        }
        rows.push(FamilyScaleRow {
            n: family.n_lo + k as u32,
            d: family.d[k],
            d_big: family.d_big[k],
            phi_n: corr.phi_n,
            f_zero: corr.acf[0],
            f_zero_times_d: corr.acf[0] * family.d[k] as f64,
            residual_sup,
            f_sup_ratio: big * f_sup,
            lipschitz_ratio: big * big * lipschitz,
        });
    }
    let eps1 = if rows.len() >= 2 {
        let xs: Vec<f64> = rows.iter().map(|r| (r.d_big as f64).ln()).collect();
        let ys: Vec<f64> = rows.iter().map(|r| r.residual_sup.ln()).collect();
        -stats::linear_fit(&xs, &ys)?.0 - 1.0
    } else {
        f64::NAN
    };
    let eps2 = rows
        .iter()
        .map(|r| r.phi_n.ln() / (r.d as f64).ln())
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(FamilyReport {
        rows,
        eps0: family.eps0(),
        growth_ratio: family.growth_ratio(),
        eps1,
        eps2,
    })
}
