//! The integer set `N_h = { floor(h(m)) : m >= x0 }` up to a bound, with two
//! independent membership routes (forward enumeration and the inverse-floor
//! criterion) plus counting and the `phi'`-weighted exponential sum.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::{Pow, ToPrimitive};

use crate::error::{Error, Result};
use crate::growth::{GrowthFunction, InverseFunction, Variant};
use crate::stats::CompensatedSum;

/// Largest supported `n_max`.
pub const N_MAX_LIMIT: i64 = 1 << 40;

/// Membership bitmaps are kept only up to this bound; above it membership
/// falls back to binary search.
const BITMAP_LIMIT: i64 = 1 << 32;

/// Lower end of the window used to calibrate `p_min`.
const P_MIN_FLOOR: i64 = 16;

/// Upper end of the calibration window.
const P_MIN_WINDOW: i64 = 1 << 16;

/// Relative error budget for one double-precision evaluation of `h`.
const EVAL_REL_ERR: f64 = 16.0 * f64::EPSILON;

/// Tolerance escalation applied once when an inverse floor is ambiguous.
const ESCALATION: f64 = 1e3;

/// `c` and `C_h` as small rationals when `h` is an exact rational power, so
/// that `h(m) >= p` can be decided in integer arithmetic.
fn rational_power(g: &GrowthFunction) -> Option<((i64, i64), (i64, i64))> {
    if g.variant() != Variant::PurePower {
        return None;
    }
    let as_ratio = |v: f64, max_den: i64| -> Option<(i64, i64)> {
        (1..=max_den).find_map(|q| {
            let p = (v * q as f64).round();
            (p.abs() < 1e6 && p / q as f64 == v).then_some((p as i64, q))
        })
    };
    Some((as_ratio(g.exponent(), 64)?, as_ratio(g.scale(), 64)?))
}

/// Decides `h(m) >= p`. Uses the double-precision value when it is far from
/// `p`; near-ties are resolved exactly for rational powers and reported as
/// ambiguous otherwise.
pub fn h_at_least(g: &GrowthFunction, m: i64, p: i64) -> Result<bool> {
    let v = g.eval(m as f64, 0)?;
    let err = EVAL_REL_ERR * v.abs().max(1.0);
    let diff = v - p as f64;
    if diff > err {
        return Ok(true);
    }
    if diff < -err {
        return Ok(false);
    }
    // (r/s) m^(a/b) >= p  <=>  r^b m^a >= s^b p^b, all quantities positive
    let ((a, b), (r, s)) = rational_power(g).ok_or(Error::Ambiguous { p, value: v })?;
    if a <= 0 || m <= 0 || p <= 0 {
        return Err(Error::Ambiguous { p, value: v });
    }
    let (a, b) = (a as u32, b as u32);
    let lhs = BigInt::from(r).pow(b) * BigInt::from(m).pow(a);
    let rhs = BigInt::from(s).pow(b) * BigInt::from(p).pow(b);
    Ok(lhs >= rhs)
}

/// `floor(h(m))` with near-integer values decided by [`h_at_least`].
pub fn floor_h(g: &GrowthFunction, m: i64) -> Result<i64> {
    let v = g.eval(m as f64, 0)?;
    if !(v < (i64::MAX / 4) as f64) {
        return Err(Error::Overflow { m, value: v });
    }
    let fl = v.floor();
    let err = EVAL_REL_ERR * v.abs().max(1.0);
    let k = fl as i64;
    if v - fl <= err {
        return Ok(if h_at_least(g, m, k)? { k } else { k - 1 });
    }
    if fl + 1.0 - v <= err && h_at_least(g, m, k + 1)? {
        return Ok(k + 1);
    }
    Ok(k)
}

/// `ceil(phi(p)) = -floor(-phi(p))`, never guessed: an inverse value within
/// `10 tol |phi|` of an integer triggers one tolerance escalation and then an
/// exact forward comparison.
pub fn ceil_phi(phi: &InverseFunction, p: i64) -> Result<i64> {
    let g = phi.source();
    let v = phi.invert(p as f64)?;
    let nearest = v.round();
    if (v - nearest).abs() > 10.0 * phi.tol() * v.abs() || nearest < g.x0() {
        return Ok(v.ceil() as i64);
    }
    let fine = phi.tightened(ESCALATION);
    let v2 = fine.invert(p as f64)?;
    if (v2 - nearest).abs() > 10.0 * fine.tol() * v2.abs() {
        return Ok(v2.ceil() as i64);
    }
    // phi(p) <= nearest  <=>  p <= h(nearest)
    let m = nearest as i64;
    Ok(if h_at_least(g, m, p)? { m } else { m + 1 })
}

/// Membership through the inverse: `p` is in `N_h` iff
/// `floor(-phi(p)) - floor(-phi(p + 1)) = 1` (valid for `p` large enough).
pub fn contains_via_inverse(phi: &InverseFunction, p: i64) -> Result<bool> {
    let start = phi.y0().ceil() as i64;
    if p < start {
        return Err(Error::Range {
            what: "p",
            value: p,
            lo: start,
            hi: i64::MAX,
        });
    }
    Ok(ceil_phi(phi, p + 1)? - ceil_phi(phi, p)? == 1)
}

/// Sorted elements of `N_h` in `[1, n_max]`.
#[derive(Debug, Clone)]
pub struct SequenceSet {
    growth: GrowthFunction,
    n_max: i64,
    elements: Vec<i64>,
    bitmap: Option<Vec<u64>>,
    p_min: i64,
}

impl SequenceSet {
    /// Enumerates `floor(h(m))` for integers `m >= ceil(x0)` until the value
    /// exceeds `n_max`, then calibrates `p_min`.
    pub fn generate(growth: &GrowthFunction, n_max: i64) -> Result<Self> {
        let y0 = growth.eval(growth.x0(), 0)?;
        if !(n_max as f64 >= y0.floor()) || !(1..=N_MAX_LIMIT).contains(&n_max) {
            return Err(Error::Range {
                what: "n_max",
                value: n_max,
                lo: y0.floor() as i64,
                hi: N_MAX_LIMIT,
            });
        }
        let mut elements = Vec::with_capacity(estimate_len(growth, n_max));
        let mut m = growth.x0().ceil() as i64;
        loop {
            let v = floor_h(growth, m)?;
            if v > n_max {
                break;
            }
            if v >= 1 && elements.last() != Some(&v) {
                elements.push(v);
            }
            m += 1;
        }
        let bitmap = (n_max <= BITMAP_LIMIT).then(|| {
            let mut bits = vec![0u64; (n_max as usize >> 6) + 1];
            for &e in &elements {
                bits[e as usize >> 6] |= 1 << (e & 63);
            }
            bits
        });
        let mut set = SequenceSet {
            growth: *growth,
            n_max,
            elements,
            bitmap,
            p_min: 0,
        };
        set.p_min = set.calibrate_p_min(&InverseFunction::new(*growth))?;
        Ok(set)
    }

    /// Smallest `p >= 16` after which both membership routes agree on the
    /// calibration window `[p, min(n_max, 2^16)]`.
    fn calibrate_p_min(&self, phi: &InverseFunction) -> Result<i64> {
        let lo = P_MIN_FLOOR.max(phi.y0().ceil() as i64);
        let hi = (self.n_max - 1).min(P_MIN_WINDOW);
        let mut p_min = lo;
        for p in lo..=hi {
            if contains_via_inverse(phi, p)? != self.contains(p) {
                p_min = p + 1;
            }
        }
        Ok(p_min)
    }

    pub fn growth(&self) -> &GrowthFunction {
        &self.growth
    }

    pub fn n_max(&self) -> i64 {
        self.n_max
    }

    pub fn elements(&self) -> &[i64] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Threshold above which the inverse-floor membership test is trusted.
    pub fn p_min(&self) -> i64 {
        self.p_min
    }

    pub fn contains(&self, p: i64) -> bool {
        if p < 1 || p > self.n_max {
            return false;
        }
        match &self.bitmap {
            Some(bits) => bits[p as usize >> 6] >> (p & 63) & 1 == 1,
            None => self.elements.binary_search(&p).is_ok(),
        }
    }

    /// `|N_h cap [1, n]|`
    pub fn count(&self, n: i64) -> Result<usize> {
        if n < 1 || n > self.n_max {
            return Err(Error::Range {
                what: "N",
                value: n,
                lo: 1,
                hi: self.n_max,
            });
        }
        Ok(self.count_upto(n))
    }

    /// `|N_h cap [1, n]|` without range checks (clamped).
    pub(crate) fn count_upto(&self, n: i64) -> usize {
        self.elements.partition_point(|&e| e <= n)
    }

    /// Elements in the half-open window `(lo, hi]`.
    pub fn window(&self, lo: i64, hi: i64) -> &[i64] {
        let a = self.elements.partition_point(|&e| e <= lo);
        let b = self.elements.partition_point(|&e| e <= hi);
        &self.elements[a..b.max(a)]
    }

    /// Rows `(N, count, phi(N), count / phi(N))`.
    pub fn counting_table(&self, phi: &InverseFunction, ns: &[i64]) -> Result<Vec<CountRow>> {
        ns.iter()
            .map(|&n| {
                let count = self.count(n)?;
                let phi_n = phi.invert(n as f64)?;
                Ok(CountRow {
                    n,
                    count,
                    phi_n,
                    ratio: count as f64 / phi_n,
                })
            })
            .collect()
    }

    /// `S_w = sum_{n in N_h cap [1, N]} e(alpha n) / phi'(n)` together with the
    /// residual `|S_w - sum_{n=1}^N e(alpha n)|`. Elements below `h(x0)` lie
    /// outside the domain of `phi` and are skipped.
    pub fn weighted_exp_sum(
        &self,
        phi: &InverseFunction,
        alpha: f64,
        n: i64,
    ) -> Result<(Complex64, f64)> {
        self.count(n)?;
        let g = phi.source();
        let (mut re, mut im) = (CompensatedSum::default(), CompensatedSum::default());
        for &e in self.window(0, n) {
            if (e as f64) < phi.y0() {
                continue;
            }
            // 1 / phi'(e) = h'(phi(e))
            let w = g.eval(phi.invert(e as f64)?, 1)?;
            let (s, c) = turn(alpha, e).sin_cos();
            re.add(w * c);
            im.add(w * s);
        }
        let weighted = Complex64::new(re.value(), im.value());
        let full = exp_sum_plain(alpha, n);
        Ok((weighted, (weighted - full).norm()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CountRow {
    pub n: i64,
    pub count: usize,
    pub phi_n: f64,
    pub ratio: f64,
}

/// `2 pi {alpha n}` with the fractional part taken before scaling.
pub(crate) fn turn(alpha: f64, n: i64) -> f64 {
    let t = alpha * n as f64;
    std::f64::consts::TAU * (t - t.floor())
}

/// `sum_{n=1}^N e(alpha n)` by direct compensated summation.
pub fn exp_sum_plain(alpha: f64, n: i64) -> Complex64 {
    let (mut re, mut im) = (CompensatedSum::default(), CompensatedSum::default());
    for k in 1..=n {
        let (s, c) = turn(alpha, k).sin_cos();
        re.add(c);
        im.add(s);
    }
    Complex64::new(re.value(), im.value())
}

fn estimate_len(g: &GrowthFunction, n_max: i64) -> usize {
    let est = (n_max as f64 / g.scale()).powf(g.gamma());
    (est * 1.1).min(n_max as f64).to_usize().unwrap_or(0)
}
