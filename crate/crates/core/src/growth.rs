//! Growth functions `h(x) = C_h x^c l(x)` with a slowly varying factor `l`,
//! their derivatives, the logarithmic-derivative corrections `vartheta_i`,
//! and the numeric inverse `phi` together with its corrections `theta_i`.
//!
//! Every derivative used here is computed in closed form from a third-order
//! jet of `F(t) = log l(e^t)`, so no finite differences enter the evaluators.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Smallest admissible recursion denominator.
const SINGULAR_EPS: f64 = 1e-8;

/// Number of log-spaced points used when validating a growth function.
const VALIDATION_POINTS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Variant {
    /// `x^c`
    PurePower,
    /// `x^c log^A x`
    PowerLog { a: f64 },
    /// `x^c exp(A log^B x)`, `B` in (0, 1)
    PowerExpLog { a: f64, b: f64 },
    /// `x^c l_m(x)` with `l_1 = log` and `l_{m+1} = log l_m`
    PowerIterLog { m: u32 },
}

impl Variant {
    fn keyword(&self) -> &'static str {
        match self {
            Variant::PurePower => "pure",
            Variant::PowerLog { .. } => "powerlog",
            Variant::PowerExpLog { .. } => "powerexplog",
            Variant::PowerIterLog { .. } => "poweriterlog",
        }
    }

    /// Default domain start for this variant.
    pub fn default_x0(&self) -> f64 {
        match *self {
            Variant::PurePower => 1.0,
            Variant::PowerLog { a } => 3f64.max((a.abs() + 1.0).exp()),
            Variant::PowerExpLog { .. } => 3.0,
            Variant::PowerIterLog { m } => {
                // l_m(exp^m(1)) = 1
                let mut x = 1.0f64;
                for _ in 0..m {
                    x = x.exp();
                }
                x.max(3.0)
            }
        }
    }
}

/// Third-order jet `(F, F', F'', F''')` of a function of `t`.
#[derive(Debug, Clone, Copy)]
struct Jet {
    v: f64,
    d1: f64,
    d2: f64,
    d3: f64,
}

impl Jet {
    const ZERO: Jet = Jet {
        v: 0.0,
        d1: 0.0,
        d2: 0.0,
        d3: 0.0,
    };

    fn variable(t: f64) -> Jet {
        Jet {
            v: t,
            d1: 1.0,
            d2: 0.0,
            d3: 0.0,
        }
    }

    fn ln(self) -> Jet {
        let g = self.v;
        Jet {
            v: g.ln(),
            d1: self.d1 / g,
            d2: self.d2 / g - self.d1 * self.d1 / (g * g),
            d3: self.d3 / g - 3.0 * self.d1 * self.d2 / (g * g)
                + 2.0 * self.d1.powi(3) / g.powi(3),
        }
    }

    fn scale(self, a: f64) -> Jet {
        Jet {
            v: a * self.v,
            d1: a * self.d1,
            d2: a * self.d2,
            d3: a * self.d3,
        }
    }

    fn powf_var(t: f64, b: f64) -> Jet {
        Jet {
            v: t.powf(b),
            d1: b * t.powf(b - 1.0),
            d2: b * (b - 1.0) * t.powf(b - 2.0),
            d3: b * (b - 1.0) * (b - 2.0) * t.powf(b - 3.0),
        }
    }
}

/// A member of the growth family: `h(x) = C_h x^c l(x)` on `[x0, inf)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthFunction {
    variant: Variant,
    c: f64,
    scale: f64,
    x0: f64,
}

impl GrowthFunction {
    /// Builds and validates a growth function. `x0 = None` selects the
    /// variant default.
    pub fn new(variant: Variant, c: f64, scale: f64, x0: Option<f64>) -> Result<Self> {
        if !(1.0..2.0).contains(&c) {
            return Err(Error::InvalidGrowth(format!("exponent c = {c} not in [1, 2)")));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidGrowth(format!("constant C_h = {scale} must be positive")));
        }
        match variant {
            Variant::PurePower if c == 1.0 => {
                return Err(Error::InvalidGrowth(
                    "pure power with c = 1 has vanishing vartheta".into(),
                ));
            }
            Variant::PowerLog { a } if !a.is_finite() => {
                return Err(Error::InvalidGrowth(format!("log exponent A = {a}")));
            }
            Variant::PowerExpLog { a, b } if !(a.is_finite() && b > 0.0 && b < 1.0) => {
                return Err(Error::InvalidGrowth(format!("need B in (0, 1), got A = {a}, B = {b}")));
            }
            Variant::PowerIterLog { m } if !(1..=3).contains(&m) => {
                return Err(Error::InvalidGrowth(format!("iteration depth m = {m} not in 1..=3")));
            }
            _ => {}
        }
        let x0 = x0.unwrap_or_else(|| variant.default_x0());
        if !(x0 >= 1.0 && x0.is_finite()) {
            return Err(Error::InvalidGrowth(format!("x0 = {x0} must be >= 1")));
        }
        let g = GrowthFunction {
            variant,
            c,
            scale,
            x0,
        };
        g.validate()?;
        Ok(g)
    }

    /// The identity map `h(x) = x`. It is not a member of the family (its
    /// correction term vanishes at `c = 1`) but serves as the degenerate
    /// reference case where `N_h` is every positive integer.
    pub fn identity() -> Self {
        GrowthFunction {
            variant: Variant::PurePower,
            c: 1.0,
            scale: 1.0,
            x0: 1.0,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.variant == Variant::PurePower && self.c == 1.0 && self.scale == 1.0
    }

    fn validate(&self) -> Result<()> {
        let h0 = self.value(self.x0);
        if !(h0 >= 1.0) {
            return Err(Error::InvalidGrowth(format!("h(x0) = {h0} < 1 at x0 = {}", self.x0)));
        }
        let lo = self.x0.ln();
        let step = 20.0 * std::f64::consts::LN_2 / (VALIDATION_POINTS - 1) as f64;
        for k in 0..VALIDATION_POINTS {
            let x = if k == 0 { self.x0 } else { (lo + step * k as f64).exp() };
            let d1 = self.eval(x, 1)?;
            let d2 = self.eval(x, 2)?;
            if !(d1 > 0.0 && d2 > 0.0 && d1.is_finite() && d2.is_finite()) {
                return Err(Error::InvalidGrowth(format!(
                    "h'({x}) = {d1}, h''({x}) = {d2}; both must be positive"
                )));
            }
            for i in 1..=3 {
                let v = self.vartheta(x, i).map_err(|e| Error::InvalidGrowth(e.to_string()))?;
                if !v.is_finite() {
                    return Err(Error::InvalidGrowth(format!("vartheta_{i}({x}) is not finite")));
                }
            }
            if self.c == 1.0 && !(self.vartheta(x, 1)? > 0.0) {
                return Err(Error::InvalidGrowth(format!(
                    "c = 1 requires a positive vartheta; vartheta({x}) <= 0"
                )));
            }
        }
        Ok(())
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn exponent(&self) -> f64 {
        self.c
    }

    pub fn gamma(&self) -> f64 {
        1.0 / self.c
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    /// The slowly varying factor `l(x)`.
    pub fn slow_factor(&self, x: f64) -> f64 {
        match self.variant {
            Variant::PurePower => 1.0,
            Variant::PowerLog { a } => x.ln().powf(a),
            Variant::PowerExpLog { a, b } => (a * x.ln().powf(b)).exp(),
            Variant::PowerIterLog { m } => {
                let mut l = x.ln();
                for _ in 1..m {
                    l = l.ln();
                }
                l
            }
        }
    }

    /// `h(x)` without the domain check.
    pub(crate) fn value(&self, x: f64) -> f64 {
        if self.is_identity() {
            return x;
        }
        self.scale * x.powf(self.c) * self.slow_factor(x)
    }

    /// Jet of `F(t) = log l(e^t)` at `t = log x`.
    fn log_factor_jet(&self, x: f64) -> Jet {
        let t = x.ln();
        match self.variant {
            Variant::PurePower => Jet::ZERO,
            Variant::PowerLog { a } => Jet::variable(t).ln().scale(a),
            Variant::PowerExpLog { a, b } => Jet::powf_var(t, b).scale(a),
            Variant::PowerIterLog { m } => {
                let mut j = Jet::variable(t);
                for _ in 0..m {
                    j = j.ln();
                }
                j
            }
        }
    }

    fn check_domain(&self, x: f64) -> Result<()> {
        if x >= self.x0 && x.is_finite() {
            Ok(())
        } else {
            Err(Error::Domain { x, start: self.x0 })
        }
    }

    /// `h^{(order)}(x)` for `order` in `0..=3`.
    pub fn eval(&self, x: f64, order: u32) -> Result<f64> {
        self.check_domain(x)?;
        let h = self.value(x);
        if order == 0 {
            return Ok(h);
        }
        // w = log h; derivatives from the jet of F in t = log x
        let f = self.log_factor_jet(x);
        let c = self.c;
        let w1 = (c + f.d1) / x;
        let w2 = (-c + f.d2 - f.d1) / (x * x);
        let w3 = (2.0 * c + f.d3 - 3.0 * f.d2 + 2.0 * f.d1) / (x * x * x);
        match order {
            1 => Ok(h * w1),
            2 => Ok(h * (w2 + w1 * w1)),
            3 => Ok(h * (w3 + 3.0 * w1 * w2 + w1 * w1 * w1)),
            _ => Err(Error::Precondition(format!("derivative order {order} > 3"))),
        }
    }

    /// `(vartheta, vartheta', vartheta'')` at `x`.
    pub fn vartheta_derivs(&self, x: f64) -> Result<(f64, f64, f64)> {
        self.check_domain(x)?;
        let f = self.log_factor_jet(x);
        Ok((f.d1, f.d2 / x, (f.d3 - f.d2) / (x * x)))
    }

    /// `vartheta_i(x)`, `i` in `1..=3`.
    pub fn vartheta(&self, x: f64, i: u32) -> Result<f64> {
        let (v, v1, v2) = self.vartheta_derivs(x)?;
        if i == 1 {
            return Ok(v);
        }
        let c = self.c;
        let den1 = c + v;
        if den1.abs() < SINGULAR_EPS {
            return Err(Error::Singularity { x, value: den1 });
        }
        let v2nd = v + x * v1 / den1;
        if i == 2 {
            return Ok(v2nd);
        }
        if i != 3 {
            return Err(Error::Precondition(format!("vartheta index {i} not in 1..=3")));
        }
        let den2 = c - 1.0 + v2nd;
        if den2.abs() < SINGULAR_EPS {
            return Err(Error::Singularity { x, value: den2 });
        }
        let v2nd_prime = v1 + ((v1 + x * v2) * den1 - x * v1 * v1) / (den1 * den1);
        Ok(v2nd + x * v2nd_prime / den2)
    }

    /// `alpha_i = c - i + 1`.
    pub fn alpha(&self, i: u32) -> f64 {
        self.c - i as f64 + 1.0
    }
}

impl fmt::Display for GrowthFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_identity() {
            return write!(f, "identity");
        }
        write!(f, "{}:{}:{}", self.variant.keyword(), self.c, self.scale)?;
        match self.variant {
            Variant::PurePower => {}
            Variant::PowerLog { a } => write!(f, ":{a}")?,
            Variant::PowerExpLog { a, b } => write!(f, ":{a}:{b}")?,
            Variant::PowerIterLog { m } => write!(f, ":{m}")?,
        }
        if self.x0 != self.variant.default_x0() {
            write!(f, "@{}", self.x0)?;
        }
        Ok(())
    }
}

/// Parses `variant:c:C_h[:A[:B|:m]][@x0]` or the keyword `identity`.
///
/// | variant        | fields            |
/// |----------------|-------------------|
/// | `pure`         | `c:C_h`           |
/// | `powerlog`     | `c:C_h:A`         |
/// | `powerexplog`  | `c:C_h:A:B`       |
/// | `poweriterlog` | `c:C_h:m`         |
pub fn parse_growth_spec(text: &str) -> Result<GrowthFunction> {
    let text = text.trim();
    if text == "identity" {
        return Ok(GrowthFunction::identity());
    }
    let (body, x0) = match text.split_once('@') {
        Some((body, x0)) => {
            let pos = body.len() + 1;
            let x0 = x0.parse::<f64>().map_err(|e| Error::Parse {
                pos,
                msg: format!("bad x0 '{x0}': {e}"),
            })?;
            (body, Some(x0))
        }
        None => (text, None),
    };

    let mut fields = Vec::new();
    let mut pos = 0;
    for field in body.split(':') {
        fields.push((pos, field));
        pos += field.len() + 1;
    }
    let num = |idx: usize, name: &str| -> Result<f64> {
        let (pos, s) = fields.get(idx).copied().ok_or_else(|| Error::Parse {
            pos: body.len(),
            msg: format!("missing field {name}"),
        })?;
        s.parse::<f64>().map_err(|e| Error::Parse {
            pos,
            msg: format!("bad {name} '{s}': {e}"),
        })
    };
    let (_, keyword) = fields[0];
    let (variant, arity) = match keyword {
        "pure" => (Variant::PurePower, 3),
        "powerlog" => (Variant::PowerLog { a: num(3, "A")? }, 4),
        "powerexplog" => (
            Variant::PowerExpLog {
                a: num(3, "A")?,
                b: num(4, "B")?,
            },
            5,
        ),
        "poweriterlog" => {
            let (pos, s) = fields.get(3).copied().ok_or_else(|| Error::Parse {
                pos: body.len(),
                msg: "missing field m".into(),
            })?;
            let m = s.parse::<u32>().map_err(|e| Error::Parse {
                pos,
                msg: format!("bad m '{s}': {e}"),
            })?;
            (Variant::PowerIterLog { m }, 4)
        }
        other => {
            return Err(Error::Parse {
                pos: 0,
                msg: format!("unknown variant '{other}'"),
            })
        }
    };
    if fields.len() != arity {
        let pos = fields.get(arity).map_or(body.len(), |f| f.0);
        return Err(Error::Parse {
            pos,
            msg: format!("'{keyword}' takes {} fields, got {}", arity - 1, fields.len() - 1),
        });
    }
    let c = num(1, "c")?;
    let scale = num(2, "C_h")?;
    GrowthFunction::new(variant, c, scale, x0)
}

impl FromStr for GrowthFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_growth_spec(s)
    }
}

/// Numeric inverse `phi` of a growth function on `[h(x0), inf)`.
#[derive(Debug, Clone, Copy)]
pub struct InverseFunction {
    source: GrowthFunction,
    gamma: f64,
    y0: f64,
    tol: f64,
    max_iter: u32,
}

impl InverseFunction {
    pub fn new(source: GrowthFunction) -> Self {
        Self::with_tolerance(source, 1e-12, 100)
    }

    pub fn with_tolerance(source: GrowthFunction, tol: f64, max_iter: u32) -> Self {
        InverseFunction {
            gamma: source.gamma(),
            y0: source.value(source.x0),
            source,
            tol,
            max_iter,
        }
    }

    pub fn source(&self) -> &GrowthFunction {
        &self.source
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn y0(&self) -> f64 {
        self.y0
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    /// Same inverse with the tolerance tightened by `factor`.
    pub fn tightened(&self, factor: f64) -> Self {
        InverseFunction {
            tol: self.tol / factor,
            ..*self
        }
    }

    /// Solves `h(x) = y`. Safeguarded Newton inside a bisection bracket,
    /// seeded at `(y / C_h)^gamma`.
    pub fn invert(&self, y: f64) -> Result<f64> {
        let h = &self.source;
        if !(y >= self.y0) || !y.is_finite() {
            return Err(Error::Domain { x: y, start: self.y0 });
        }
        if h.is_identity() {
            return Ok(y);
        }
        if y == self.y0 {
            return Ok(h.x0);
        }
        let seed = (y / h.scale).powf(self.gamma).max(h.x0);

        let mut lo = (seed / 2.0).max(h.x0);
        if h.value(lo) > y {
            lo = h.x0;
        }
        let mut hi = (2.0 * seed).max(h.x0);
        while h.value(hi) < y {
            lo = hi;
            hi *= 2.0;
            if !hi.is_finite() {
                return Err(Error::Convergence { y, lo, hi });
            }
        }

        let mut x = seed.clamp(lo, hi);
        for _ in 0..self.max_iter {
            let r = h.value(x) - y;
            if r.abs() <= self.tol * y {
                return Ok(x);
            }
            if r > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let d = h.eval(x, 1)?;
            let newton = x - r / d;
            let next = if newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if next == x || hi - lo <= 4.0 * f64::EPSILON * hi {
                // bracket exhausted at double precision
                let best = if (h.value(lo) - y).abs() < (h.value(hi) - y).abs() { lo } else { hi };
                return Ok(best);
            }
            x = next;
        }
        Err(Error::Convergence { y, lo, hi })
    }

    /// `phi` at the consecutive integers `start, start + 1, ...`. Each
    /// fixed-size chunk is seeded by a full inversion and continued with
    /// tangent-seeded Newton steps, so results do not depend on the number
    /// of worker threads.
    pub fn invert_consecutive(&self, start: i64, len: usize) -> Result<Vec<f64>> {
        const CHUNK: usize = 4096;
        let chunks: Vec<Result<Vec<f64>>> = (0..len.div_ceil(CHUNK))
            .into_par_iter()
            .map(|c| {
                let lo = c * CHUNK;
                let hi = (lo + CHUNK).min(len);
                let mut out = Vec::with_capacity(hi - lo);
                let mut x = self.invert((start + lo as i64) as f64)?;
                out.push(x);
                for k in lo + 1..hi {
                    let y = (start + k as i64) as f64;
                    x = self.newton_from(x, y)?;
                    out.push(x);
                }
                Ok(out)
            })
            .collect();
        let mut all = Vec::with_capacity(len);
        for chunk in chunks {
            all.extend(chunk?);
        }
        Ok(all)
    }

    /// Newton iteration for `h(x) = y` started from a point `prev <= phi(y)`.
    fn newton_from(&self, prev: f64, y: f64) -> Result<f64> {
        let h = &self.source;
        if h.is_identity() {
            return Ok(y);
        }
        let mut x = prev;
        for _ in 0..8 {
            let r = h.value(x) - y;
            if r.abs() <= self.tol * y {
                return Ok(x);
            }
            let step = r / h.eval(x, 1)?;
            let next = (x - step).max(h.x0);
            if next == x {
                return Ok(x);
            }
            x = next;
        }
        self.invert(y)
    }

    /// `phi'(y)` (order 1) or `phi''(y)` (order 2).
    pub fn deriv(&self, y: f64, order: u32) -> Result<f64> {
        let x = self.invert(y)?;
        let d1 = self.source.eval(x, 1)?;
        match order {
            1 => Ok(1.0 / d1),
            2 => {
                let d2 = self.source.eval(x, 2)?;
                Ok(-d2 / (d1 * d1 * d1))
            }
            _ => Err(Error::Precondition(format!("phi derivative order {order} not in 1..=2"))),
        }
    }

    /// `theta_i(y)`, `i` in `1..=3`.
    pub fn theta(&self, y: f64, i: u32) -> Result<f64> {
        let x = self.invert(y)?;
        self.theta_at(x, i)
    }

    /// `theta_i` evaluated at the point `y = h(x)`.
    pub fn theta_at(&self, x: f64, i: u32) -> Result<f64> {
        let c = self.source.c;
        let (v, v1, v2) = self.source.vartheta_derivs(x)?;
        let s = c + v;
        if s.abs() < SINGULAR_EPS {
            return Err(Error::Singularity { x, value: s });
        }
        let theta1 = -v / (c * s);
        if i == 1 {
            return Ok(theta1);
        }
        let theta2 = theta1 - v1 * x / (s * s);
        if i == 2 {
            return Ok(theta2);
        }
        if i != 3 {
            return Err(Error::Precondition(format!("theta index {i} not in 1..=3")));
        }
        let den_a = s * s - s * s * s - v1 * x * s;
        let den_b = s * s * s - s.powi(4) - v1 * x * s * s;
        if den_a.abs() < SINGULAR_EPS * s * s || den_b.abs() < SINGULAR_EPS * s.powi(3) {
            return Err(Error::Singularity { x, value: den_a });
        }
        Ok(theta2 - (v2 * x * x + 2.0 * v1 * x) / den_a + 2.0 * v1 * v1 * x * x / den_b)
    }

    /// `beta_i = gamma - i + 1`.
    pub fn beta(&self, i: u32) -> f64 {
        self.gamma - i as f64 + 1.0
    }

    /// `sigma(y) = vartheta(phi(y))`, only meaningful for `c = 1`.
    pub fn sigma(&self, y: f64) -> Result<f64> {
        let x = self.invert(y)?;
        self.source.vartheta(x, 1)
    }

    /// `tau(y)` such that `y phi''(y) = phi'(y) sigma(y) tau(y)` when `c = 1`.
    pub fn tau(&self, y: f64) -> Result<f64> {
        let x = self.invert(y)?;
        let (v, v1, _) = self.source.vartheta_derivs(x)?;
        if v.abs() < SINGULAR_EPS {
            return Err(Error::Singularity { x, value: v });
        }
        Ok(-(1.0 / (1.0 + v) + v1 * x / (v * (1.0 + v) * (1.0 + v))))
    }
}

/// Tabulated correction functions along an `x` grid. `theta_i`, `sigma` and
/// `tau` are evaluated at the image points `y = h(x)`.
#[derive(Debug, Clone, Default)]
pub struct AuxFunctionReport {
    pub grid: Vec<f64>,
    pub vartheta_values: [Vec<f64>; 3],
    pub theta_values: [Vec<f64>; 3],
    /// `c = 1` only.
    pub sigma_values: Vec<f64>,
    /// `c = 1` only.
    pub tau_values: Vec<f64>,
    /// `vartheta_2 / vartheta`, `c = 1` only.
    pub rho_values: Vec<f64>,
}

impl AuxFunctionReport {
    pub fn compute(phi: &InverseFunction, grid: &[f64]) -> Result<Self> {
        let g = phi.source();
        let mut report = AuxFunctionReport {
            grid: grid.to_vec(),
            ..Default::default()
        };
        for &x in grid {
            for i in 0..3 {
                report.vartheta_values[i].push(g.vartheta(x, i as u32 + 1)?);
                report.theta_values[i].push(phi.theta_at(x, i as u32 + 1)?);
            }
            if g.exponent() == 1.0 {
                let y = g.eval(x, 0)?;
                report.sigma_values.push(phi.sigma(y)?);
                report.tau_values.push(phi.tau(y)?);
                report.rho_values.push(g.vartheta(x, 2)? / g.vartheta(x, 1)?);
            }
        }
        Ok(report)
    }
}

/// `count` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(count >= 2 && lo > 0.0 && hi > lo);
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|k| match k {
            0 => lo,
            k if k == count - 1 => hi,
            k => (a + (b - a) * k as f64 / (count - 1) as f64).exp(),
        })
        .collect()
}
