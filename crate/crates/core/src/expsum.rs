//! Exponential sums along `phi` evaluated exactly and compared with their
//! Van der Corput type bounds, the sawtooth Fourier truncation, and
//! summation by parts.
//!
//! All bounds take `sigma = 1` (the `c > 1` case) and natural logarithms.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::growth::InverseFunction;
use crate::kernel::eta;
use crate::stats::CompensatedSum;

/// Chunk length for parallel summation; partial sums are combined in order.
const SUM_CHUNK: usize = 1 << 16;

/// `Phi(t) = {t} - 1/2`
pub fn sawtooth(t: f64) -> f64 {
    t - t.floor() - 0.5
}

/// `||t||`, the distance to the nearest integer.
pub fn dist_to_int(t: f64) -> f64 {
    (t - t.round_ties_even()).abs()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SawtoothTruncation {
    pub m: u32,
    /// `sum_{0<|k|<=M} e(-k t) / (2 pi i k)`
    pub value: Complex64,
    /// `min{1, 1 / (M ||t||)}`
    pub residual_bound: f64,
}

pub fn sawtooth_truncation(t: f64, m: u32) -> SawtoothTruncation {
    let frac = t - t.floor();
    let mut re = CompensatedSum::default();
    let mut im = CompensatedSum::default();
    for k in 1..=m as i64 {
        for k in [k, -k] {
            // e(-k t) / (2 pi i k) = -i e(-k t) / (2 pi k)
            let angle = -std::f64::consts::TAU * reduce(k as f64 * frac);
            let (s, c) = angle.sin_cos();
            let scale = 1.0 / (std::f64::consts::TAU * k as f64);
            re.add(s * scale);
            im.add(-c * scale);
        }
    }
    SawtoothTruncation {
        m,
        value: Complex64::new(re.value(), im.value()),
        residual_bound: residual_bound(t, m),
    }
}

pub fn residual_bound(t: f64, m: u32) -> f64 {
    let d = dist_to_int(t);
    if d == 0.0 {
        1.0
    } else {
        (1.0 / (m as f64 * d)).min(1.0)
    }
}

/// Coefficient bound `min{log(M+1)/M, 1/|k|, M/k^2}` for the expansion of
/// `min{1, 1/(M ||t||)}`.
pub fn coefficient_bound(k: i64, m: u32) -> f64 {
    let m = m as f64;
    let k = k.unsigned_abs() as f64;
    let first = (m + 1.0).ln() / m;
    if k == 0.0 {
        return first;
    }
    first.min(1.0 / k).min(m / (k * k))
}

fn reduce(t: f64) -> f64 {
    t - t.floor()
}

/// Summation by parts: for `u` indexed `a+1..=b` (so `b = a + u.len()`),
/// returns `U(b) g(b) - sum_{n=a+1}^{b-1} U(n) (g(n+1) - g(n))` with
/// `U(n) = sum_{a<k<=n} u(k)`.
pub fn abel_sum(u: &[Complex64], a: i64, g: impl Fn(i64) -> f64) -> Complex64 {
    let b = a + u.len() as i64;
    let mut partial = Complex64::new(0.0, 0.0);
    let mut correction = Complex64::new(0.0, 0.0);
    for (k, uk) in u.iter().enumerate() {
        let n = a + 1 + k as i64;
        partial += uk;
        if n < b {
            correction += partial * (g(n + 1) - g(n));
        }
    }
    partial * g(b) - correction
}

/// Parameters of one exponential-sum evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpSumParams {
    pub n: i64,
    pub x: i64,
    pub alpha: f64,
    pub l: i64,
    pub m1: i64,
    /// Second frequency, two-phase sums only.
    pub m2: Option<i64>,
    pub p: i64,
    pub q: i64,
    pub kappa: f64,
    /// Upper end `N'` of the summation; `None` means `N_{2,x}`.
    pub n_prime: Option<f64>,
}

impl ExpSumParams {
    pub fn single(n: i64, m: i64) -> Self {
        ExpSumParams {
            n,
            x: 0,
            alpha: 0.0,
            l: 1,
            m1: m,
            m2: None,
            p: 0,
            q: 0,
            kappa: 0.0,
            n_prime: None,
        }
    }

    pub fn two(n: i64, x: i64, m1: i64, m2: i64, kappa: f64) -> Self {
        ExpSumParams {
            x,
            m2: Some(m2),
            kappa,
            ..ExpSumParams::single(n, m1)
        }
    }

    /// `N_{1,x} = max{N/2, N/2 - x}`
    pub fn lower(&self) -> f64 {
        let half = self.n as f64 / 2.0;
        half.max(half - self.x as f64)
    }

    /// `N_{2,x} = min{4N, 4N - x}`
    pub fn upper(&self) -> f64 {
        let four = 4.0 * self.n as f64;
        four.min(four - self.x as f64)
    }

    /// Integer summation range `(N_{1,x}, N']` as `first..=last`.
    fn range(&self) -> Result<(i64, i64)> {
        let (lo, hi) = (self.lower(), self.upper());
        if lo >= hi {
            return Err(Error::EmptyRange { lo, hi });
        }
        let top = self.n_prime.unwrap_or(hi);
        if !(top > lo && top <= hi) {
            return Err(Error::Precondition(format!("N' = {top} not in ({lo}, {hi}]")));
        }
        Ok((lo.floor() as i64 + 1, top.floor() as i64))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpSumResult {
    pub actual: Complex64,
    pub actual_abs: f64,
    pub bound: f64,
    pub ratio: f64,
    pub terms: usize,
    pub params: ExpSumParams,
}

impl ExpSumResult {
    fn new(actual: Complex64, bound: f64, terms: usize, params: ExpSumParams) -> Self {
        let actual_abs = actual.norm();
        ExpSumResult {
            actual,
            actual_abs,
            bound,
            ratio: actual_abs / bound,
            terms,
            params,
        }
    }
}

/// `phi` tabulated at consecutive integers.
#[derive(Debug, Clone)]
pub struct PhiTable {
    start: i64,
    values: Vec<f64>,
}

impl PhiTable {
    pub fn new(phi: &InverseFunction, first: i64, last: i64) -> Result<Self> {
        let start = first.max(phi.y0().ceil() as i64);
        if first < start {
            return Err(Error::Domain {
                x: first as f64,
                start: phi.y0(),
            });
        }
        let len = (last - start + 1).max(0) as usize;
        Ok(PhiTable {
            start,
            values: phi.invert_consecutive(start, len)?,
        })
    }

    pub fn get(&self, n: i64) -> f64 {
        self.values[(n - self.start) as usize]
    }

    fn covers(&self, first: i64, last: i64) -> bool {
        first >= self.start && last < self.start + self.values.len() as i64
    }
}

/// Ordered, chunked sum of `weight(n) e(phase(n))` over `first..=last`,
/// with the phase supplied modulo 1.
fn oscillatory_sum(
    first: i64,
    last: i64,
    phase: impl Fn(i64) -> f64 + Sync,
    weight: impl Fn(i64) -> f64 + Sync,
) -> Complex64 {
    if last < first {
        return Complex64::new(0.0, 0.0);
    }
    let len = (last - first + 1) as usize;
    let partials: Vec<(CompensatedSum, CompensatedSum)> = (0..len.div_ceil(SUM_CHUNK))
        .into_par_iter()
        .map(|c| {
            let (mut re, mut im) = (CompensatedSum::default(), CompensatedSum::default());
            let lo = first + (c * SUM_CHUNK) as i64;
            let hi = (lo + SUM_CHUNK as i64 - 1).min(last);
            for n in lo..=hi {
                let w = weight(n);
                if w == 0.0 {
                    continue;
                }
                let (s, co) = (std::f64::consts::TAU * reduce(phase(n))).sin_cos();
                re.add(w * co);
                im.add(w * s);
            }
            (re, im)
        })
        .collect();
    let (mut re, mut im) = (CompensatedSum::default(), CompensatedSum::default());
    for (r, i) in partials {
        re.add(r.value());
        im.add(i.value());
    }
    Complex64::new(re.value(), im.value())
}

/// `alpha l n mod 1`
fn linear_phase(alpha: f64, l: i64, n: i64) -> f64 {
    reduce(reduce(alpha * l as f64) * n as f64)
}

/// `|m|^{1/2} N phi(N)^{-1/2}`
pub fn single_phase_bound(phi_n: f64, n: i64, m: i64) -> f64 {
    (m.unsigned_abs() as f64).sqrt() * n as f64 / phi_n.sqrt()
}

/// `m^{2/3} N^{4/3} phi(N)^{-(1+kappa)/3}`
pub fn two_phase_bound(phi_n: f64, n: i64, m: i64, kappa: f64) -> f64 {
    (m.unsigned_abs() as f64).powf(2.0 / 3.0) * (n as f64).powf(4.0 / 3.0)
        * phi_n.powf(-(1.0 + kappa) / 3.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseMode {
    Single,
    Two,
}

fn check_frequencies(params: &ExpSumParams, mode: PhaseMode) -> Result<()> {
    if params.m1 == 0 || (mode == PhaseMode::Two && params.m2.unwrap_or(0) == 0) {
        return Err(Error::Precondition("frequencies must be nonzero".into()));
    }
    if !(0..=1).contains(&params.p) || !(0..=1).contains(&params.q) {
        return Err(Error::Precondition("p and q must be 0 or 1".into()));
    }
    if params.n < 1 {
        return Err(Error::Precondition(format!("N = {} < 1", params.n)));
    }
    Ok(())
}

/// Table covering every `phi` argument the sum touches.
fn table_for(
    phi: &InverseFunction,
    params: &ExpSumParams,
    mode: PhaseMode,
    table: Option<&PhiTable>,
) -> Result<PhiTable> {
    let (first, last) = params.range()?;
    let (lo, hi) = match mode {
        PhaseMode::Single => {
            let shift = params.p * params.x + params.q;
            (first + shift, last + shift)
        }
        PhaseMode::Two => (first.min(first + params.x), last.max(last + params.x)),
    };
    match table {
        Some(t) if t.covers(lo, hi) => Ok(t.clone()),
        _ => PhiTable::new(phi, lo, hi),
    }
}

fn weighted_sum(
    phi: &InverseFunction,
    params: &ExpSumParams,
    mode: PhaseMode,
    table: Option<&PhiTable>,
    weight: &(dyn Fn(i64) -> f64 + Sync),
) -> Result<(Complex64, usize, f64)> {
    check_frequencies(params, mode)?;
    let phi_n = phi.invert(params.n as f64)?;
    if mode == PhaseMode::Two {
        let need = phi_n.powf(params.kappa);
        if (params.x as f64) < need {
            return Err(Error::Precondition(format!(
                "x = {} < phi(N)^kappa = {need}",
                params.x
            )));
        }
    }
    let (first, last) = params.range()?;
    let tab = table_for(phi, params, mode, table)?;
    let (alpha, l, m1, x) = (params.alpha, params.l, params.m1 as f64, params.x);
    let sum = match mode {
        PhaseMode::Single => {
            let shift = params.p * x + params.q;
            oscillatory_sum(
                first,
                last,
                |n| linear_phase(alpha, l, n) + reduce(m1 * tab.get(n + shift)),
                weight,
            )
        }
        PhaseMode::Two => {
            let m2 = params.m2.unwrap() as f64;
            oscillatory_sum(
                first,
                last,
                |n| {
                    linear_phase(alpha, l, n) + reduce(m1 * tab.get(n)) + reduce(m2 * tab.get(n + x))
                },
                weight,
            )
        }
    };
    Ok((sum, (last - first + 1).max(0) as usize, phi_n))
}

fn bound_for(params: &ExpSumParams, mode: PhaseMode, phi_n: f64) -> f64 {
    match mode {
        PhaseMode::Single => single_phase_bound(phi_n, params.n, params.m1),
        PhaseMode::Two => {
            let m = params.m1.abs().max(params.m2.unwrap_or(0).abs());
            two_phase_bound(phi_n, params.n, m, params.kappa)
        }
    }
}

/// `sum_{N_{1,x} < n <= N'} e(alpha l n + m phi(n + p x + q))` against
/// `|m|^{1/2} N phi(N)^{-1/2}`.
pub fn single_phase_sum(phi: &InverseFunction, params: &ExpSumParams) -> Result<ExpSumResult> {
    single_phase_sum_with(phi, params, None)
}

/// As [`single_phase_sum`], reusing a precomputed table of `phi` values.
pub fn single_phase_sum_with(
    phi: &InverseFunction,
    params: &ExpSumParams,
    table: Option<&PhiTable>,
) -> Result<ExpSumResult> {
    let (sum, terms, phi_n) = weighted_sum(phi, params, PhaseMode::Single, table, &|_| 1.0)?;
    Ok(ExpSumResult::new(sum, bound_for(params, PhaseMode::Single, phi_n), terms, *params))
}

/// `sum e(alpha l n + m1 phi(n) + m2 phi(n + x))` against
/// `m^{2/3} N^{4/3} phi(N)^{-(1+kappa)/3}`; requires `x >= phi(N)^kappa`.
pub fn two_phase_sum(phi: &InverseFunction, params: &ExpSumParams) -> Result<ExpSumResult> {
    two_phase_sum_with(phi, params, None)
}

pub fn two_phase_sum_with(
    phi: &InverseFunction,
    params: &ExpSumParams,
    table: Option<&PhiTable>,
) -> Result<ExpSumResult> {
    let (sum, terms, phi_n) = weighted_sum(phi, params, PhaseMode::Two, table, &|_| 1.0)?;
    Ok(ExpSumResult::new(sum, bound_for(params, PhaseMode::Two, phi_n), terms, *params))
}

/// Sum twisted by an arithmetic weight `F`; the bound is the unweighted one
/// times `sup |F| + N sup |F(n+1) - F(n)|` over `(N_{1,x}, N_{2,x}]`.
pub fn weighted_sum_bound_check(
    phi: &InverseFunction,
    params: &ExpSumParams,
    weight: &(dyn Fn(i64) -> f64 + Sync),
    mode: PhaseMode,
) -> Result<ExpSumResult> {
    let (sum, terms, phi_n) = weighted_sum(phi, params, mode, None, weight)?;
    let factor = weight_factor(params, weight)?;
    Ok(ExpSumResult::new(sum, bound_for(params, mode, phi_n) * factor, terms, *params))
}

/// `sup |F| + N sup |F(n+1) - F(n)|` over the full range `(N_{1,x}, N_{2,x}]`.
pub fn weight_factor(params: &ExpSumParams, weight: &dyn Fn(i64) -> f64) -> Result<f64> {
    let full = ExpSumParams {
        n_prime: None,
        ..*params
    };
    let (first, last) = full.range()?;
    let mut sup = 0.0f64;
    let mut sup_diff = 0.0f64;
    for n in first..=last {
        let f = weight(n);
        sup = sup.max(f.abs());
        sup_diff = sup_diff.max((weight(n + 1) - f).abs());
    }
    Ok(sup + params.n as f64 * sup_diff)
}

/// `sum_n min{1, 1/(M ||phi(n + p x + q)||)} eta(n/N) eta((n+x)/N)` and the
/// bound `N log M / M + N M^{1/2} log M phi(N)^{-1/2}`.
pub fn min_norm_sum(
    phi: &InverseFunction,
    n: i64,
    x: i64,
    m: u32,
    p: i64,
    q: i64,
) -> Result<(f64, f64)> {
    if m < 2 {
        return Err(Error::Precondition(format!("M = {m} < 2")));
    }
    let nf = n as f64;
    // both cutoffs nonzero: N/2 < n < 4N and N/2 < n + x < 4N
    let first = (n / 2 + 1).max(n / 2 + 1 - x);
    let last = (4 * n - 1).min(4 * n - 1 - x);
    if last < first {
        return Ok((0.0, min_norm_bound(phi.invert(nf)?, n, m)));
    }
    let shift = p * x + q;
    let tab = PhiTable::new(phi, first + shift, last + shift)?;
    let mf = m as f64;
    let mut acc = CompensatedSum::default();
    for k in first..=last {
        let w = eta(k as f64 / nf) * eta((k + x) as f64 / nf);
        if w == 0.0 {
            continue;
        }
        let d = dist_to_int(tab.get(k + shift));
        let term = if d == 0.0 { 1.0 } else { (1.0 / (mf * d)).min(1.0) };
        acc.add(term * w);
    }
    Ok((acc.value(), min_norm_bound(phi.invert(nf)?, n, m)))
}

pub fn min_norm_bound(phi_n: f64, n: i64, m: u32) -> f64 {
    let (nf, mf) = (n as f64, m as f64);
    nf * mf.ln() / mf + nf * mf.sqrt() * mf.ln() / phi_n.sqrt()
}

/// Frequency `alpha` in `[0, 1)` that puts an integer value of the phase
/// derivative at `t = 2N`, the midpoint of the summation window. Since the
/// bounds hold uniformly in `alpha`, this is the natural worst-case probe.
pub fn stationary_alpha(phi: &InverseFunction, params: &ExpSumParams, mode: PhaseMode) -> Result<f64> {
    let t = 2.0 * params.n as f64;
    let slope = match mode {
        PhaseMode::Single => {
            params.m1 as f64 * phi.deriv(t + (params.p * params.x + params.q) as f64, 1)?
        }
        PhaseMode::Two => {
            params.m1 as f64 * phi.deriv(t, 1)?
                + params.m2.unwrap_or(0) as f64 * phi.deriv(t + params.x as f64, 1)?
        }
    };
    Ok(reduce(-slope / params.l as f64))
}

/// Which estimate a ratio sweep exercises.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimate {
    /// Single phase, `|m|^{1/2} N phi(N)^{-1/2}`.
    SinglePhase,
    /// Two phases with `x = ceil(phi(N)^kappa)`.
    TwoPhase,
    /// Distance-to-integer sum with `M = ceil(N^{1/2})`.
    MinNorm,
}

/// Actual-versus-bound ratios at `N = 2^k`. Oscillatory sweeps use
/// [`stationary_alpha`] and `m1 = m2 = m`.
pub fn ratio_sweep(
    phi: &InverseFunction,
    estimate: Estimate,
    m: i64,
    kappa: f64,
    ks: impl IntoIterator<Item = u32>,
) -> Result<Vec<ExpSumResult>> {
    ks.into_iter()
        .map(|k| {
            let n = 1i64 << k;
            match estimate {
                Estimate::SinglePhase => {
                    let mut params = ExpSumParams::single(n, m);
                    params.alpha = stationary_alpha(phi, &params, PhaseMode::Single)?;
                    single_phase_sum(phi, &params)
                }
                Estimate::TwoPhase => {
                    let x = phi.invert(n as f64)?.powf(kappa).ceil() as i64;
                    let mut params = ExpSumParams::two(n, x, m, m, kappa);
                    params.alpha = stationary_alpha(phi, &params, PhaseMode::Two)?;
                    two_phase_sum(phi, &params)
                }
                Estimate::MinNorm => {
                    let big_m = ((n as f64).sqrt().ceil() as u32).max(2);
                    let (actual, bound) = min_norm_sum(phi, n, 0, big_m, 0, 0)?;
                    let params = ExpSumParams {
                        kappa,
                        ..ExpSumParams::single(n, m)
                    };
                    Ok(ExpSumResult::new(
                        Complex64::new(actual, 0.0),
                        bound,
                        (7 * n / 2) as usize,
                        params,
                    ))
                }
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::growth::GrowthFunction;

    #[test]
    fn sawtooth_values() {
        assert_eq!(sawtooth(0.25), -0.25);
        assert_eq!(sawtooth(3.0), -0.5);
        assert_eq!(sawtooth(-0.25), 0.25);
    }

    #[test]
    fn truncation_symmetry_and_saturation() {
        for m in [1, 7, 100] {
            let tr = sawtooth_truncation(0.5, m);
            assert!(tr.value.norm() < 1e-12);
        }
        assert_eq!(residual_bound(1.0 / 200.0, 100), 1.0);
        assert!((residual_bound(0.3, 1000) - 1.0 / 300.0).abs() < 1e-15);
        let tr = sawtooth_truncation(0.3, 1000);
        assert!((sawtooth(0.3) - tr.value.re).abs() <= tr.residual_bound);
        assert!(tr.value.im.abs() < 1e-12);
    }

    #[test]
    fn coefficient_bound_regimes() {
        let m = 100;
        assert_eq!(coefficient_bound(0, m), (101f64).ln() / 100.0);
        assert_eq!(coefficient_bound(10, m), (101f64).ln() / 100.0);
        assert_eq!(coefficient_bound(50, m), 1.0 / 50.0);
        assert_eq!(coefficient_bound(1000, m), 100.0 / 1e6);
    }

    #[test]
    fn abel_sum_small() {
        let u = vec![Complex64::new(1.0, 0.0); 3];
        let s = abel_sum(&u, 0, |n| n as f64);
        assert!((s - Complex64::new(6.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn identity_phase_collapses() {
        let phi = InverseFunction::new(GrowthFunction::identity());
        let mut params = ExpSumParams::single(64, 1);
        params.n_prime = Some(256.0);
        let r = single_phase_sum(&phi, &params).unwrap();
        // n in (32, 256]
        assert_eq!(r.terms, 224);
        assert!((r.actual - Complex64::new(224.0, 0.0)).norm() < 1e-9);

        let n = 64;
        let params = ExpSumParams::two(n, 64, 1, -1, 1.0);
        let r = two_phase_sum(&phi, &params).unwrap();
        assert!((r.actual_abs - r.terms as f64).abs() < 1e-9);
    }

    #[test]
    fn preconditions() {
        let phi = InverseFunction::new(GrowthFunction::identity());
        assert!(single_phase_sum(&phi, &ExpSumParams::single(64, 0)).is_err());
        let mut p = ExpSumParams::single(64, 1);
        p.x = 4 * 64;
        assert!(matches!(single_phase_sum(&phi, &p), Err(Error::EmptyRange { .. })));
        let p = ExpSumParams::two(64, 10, 1, 1, 1.0);
        assert!(matches!(two_phase_sum(&phi, &p), Err(Error::Precondition(_))));
        let mut p = ExpSumParams::single(64, 1);
        p.n_prime = Some(10.0);
        assert!(single_phase_sum(&phi, &p).is_err());
    }

    #[test]
    fn bound_scaling() {
        let b1 = single_phase_bound(100.0, 1000, 1);
        assert!((single_phase_bound(100.0, 1000, 4) / b1 - 2.0).abs() < 1e-15);
        let t1 = two_phase_bound(100.0, 1000, 1, 1.0);
        let t0 = two_phase_bound(100.0, 1000, 1, 0.0);
        assert!((t0 / t1 - 100f64.powf(1.0 / 3.0)).abs() < 1e-12);
        assert!((two_phase_bound(100.0, 1000, 8, 1.0) / t1 - 4.0).abs() < 1e-12);
    }

    #[test]
    fn min_norm_identity_saturates() {
        let phi = InverseFunction::new(GrowthFunction::identity());
        let n = 64;
        let (actual, _) = min_norm_sum(&phi, n, 0, 10, 0, 0).unwrap();
        let direct: f64 = (1..4 * n).map(|k| eta(k as f64 / 64.0).powi(2)).sum();
        assert!((actual - direct).abs() < 1e-12);
    }
}
