//! Ergodic averages along `N_h` on finite permutation systems.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::growth::InverseFunction;
use crate::seqset::SequenceSet;
use crate::stats::CompensatedSum;

/// A permutation of `{0, .., m-1}` with its cycle decomposition.
#[derive(Debug, Clone)]
pub struct FiniteSystem {
    map: Vec<usize>,
    tag: String,
    cycles: Vec<Vec<usize>>,
    /// `(cycle, position)` of each state.
    place: Vec<(usize, usize)>,
}

impl FiniteSystem {
    pub fn new(map: Vec<usize>, tag: impl Into<String>) -> Result<Self> {
        let m = map.len();
        if m == 0 {
            return Err(Error::Precondition("empty state space".into()));
        }
        let mut seen = vec![false; m];
        for &y in &map {
            if y >= m || std::mem::replace(&mut seen[y], true) {
                return Err(Error::Precondition("map is not a bijection".into()));
            }
        }
        let mut place = vec![(usize::MAX, 0); m];
        let mut cycles = Vec::new();
        for start in 0..m {
            if place[start].0 != usize::MAX {
                continue;
            }
            let id = cycles.len();
            let mut cycle = Vec::new();
            let mut x = start;
            loop {
                place[x] = (id, cycle.len());
                cycle.push(x);
                x = map[x];
                if x == start {
                    break;
                }
            }
            cycles.push(cycle);
        }
        Ok(FiniteSystem {
            map,
            tag: tag.into(),
            cycles,
            place,
        })
    }

    /// `x -> x + step mod m`
    pub fn cyclic_shift(m: usize, step: usize) -> Result<Self> {
        let map = (0..m).map(|x| (x + step) % m.max(1)).collect();
        Self::new(map, format!("shift:{m}:{step}"))
    }

    pub fn identity(m: usize) -> Result<Self> {
        Self::new((0..m).collect(), format!("identity:{m}"))
    }

    pub fn random_permutation(m: usize, seed: u64) -> Result<Self> {
        let mut map: Vec<usize> = (0..m).collect();
        map.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        Self::new(map, format!("random:{m}:{seed}"))
    }

    pub fn size(&self) -> usize {
        self.map.len()
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    pub fn map(&self) -> &[usize] {
        &self.map
    }

    pub fn cycle_count(&self) -> usize {
        self.cycles.len()
    }

    /// `T^n x` for any integer `n`.
    pub fn iterate(&self, x: usize, n: i64) -> usize {
        let (c, p) = self.place[x];
        let cycle = &self.cycles[c];
        let len = cycle.len() as i64;
        cycle[(p as i64 + n).rem_euclid(len) as usize]
    }

    /// `sum_x f(T x)` and `sum_x f(x)`.
    pub fn pushforward_sums(&self, f: &[f64]) -> (f64, f64) {
        let mut moved = CompensatedSum::default();
        let mut plain = CompensatedSum::default();
        for x in 0..self.size() {
            moved.add(f[self.map[x]]);
            plain.add(f[x]);
        }
        (moved.value(), plain.value())
    }

    fn check_observable(&self, f: &[f64], x: usize) -> Result<()> {
        if f.len() != self.size() {
            return Err(Error::Precondition(format!(
                "observable has {} values for {} states",
                f.len(),
                self.size()
            )));
        }
        if x >= self.size() {
            return Err(Error::Range {
                what: "state",
                value: x as i64,
                lo: 0,
                hi: self.size() as i64 - 1,
            });
        }
        Ok(())
    }
}

/// Indicator of state `k` on `m` states.
pub fn indicator(m: usize, k: usize) -> Vec<f64> {
    let mut f = vec![0.0; m];
    if k < m {
        f[k] = 1.0;
    }
    f
}

fn elements_upto(s: &SequenceSet, n: i64) -> Result<&[i64]> {
    if s.count(n)? == 0 {
        return Err(Error::Degenerate(format!("N_h has no elements in [1, {n}]")));
    }
    Ok(s.window(0, n))
}

/// `A_{h,N} f(x) = |N_h ∩ [1,N]|^{-1} sum_{n in N_h ∩ [1,N]} f(T^n x)`
pub fn ergodic_average(sys: &FiniteSystem, s: &SequenceSet, f: &[f64], x: usize, n: i64) -> Result<f64> {
    sys.check_observable(f, x)?;
    let elements = elements_upto(s, n)?;
    let mut acc = CompensatedSum::default();
    for &e in elements {
        acc.add(f[sys.iterate(x, e)]);
    }
    Ok(acc.value() / elements.len() as f64)
}

/// `1 / phi'(e)` for each element `e <= n` at or above `y0`, in order;
/// elements below `y0` get weight 0.
pub fn inverse_derivative_weights(s: &SequenceSet, phi: &InverseFunction, n: i64) -> Result<Vec<f64>> {
    let g = phi.source();
    let y0 = phi.y0();
    elements_upto(s, n)?
        .par_iter()
        .map(|&e| {
            if (e as f64) < y0 {
                Ok(0.0)
            } else {
                g.eval(phi.invert(e as f64)?, 1)
            }
        })
        .collect()
}

/// `A^1_{h,N} f(x) = N^{-1} sum_{n in N_h ∩ [1,N]} phi'(n)^{-1} f(T^n x)`
pub fn weighted_average(
    sys: &FiniteSystem,
    s: &SequenceSet,
    phi: &InverseFunction,
    f: &[f64],
    x: usize,
    n: i64,
) -> Result<f64> {
    sys.check_observable(f, x)?;
    let weights = inverse_derivative_weights(s, phi, n)?;
    let mut acc = CompensatedSum::default();
    for (&e, w) in s.window(0, n).iter().zip(weights) {
        acc.add(w * f[sys.iterate(x, e)]);
    }
    Ok(acc.value() / n as f64)
}

/// `N -> A^1_{h,N} f(x)` for every `N <= n_max`, by prefix sums.
#[derive(Debug, Clone)]
pub struct WeightedAverages {
    elements: Vec<i64>,
    prefix: Vec<f64>,
}

impl WeightedAverages {
    pub fn new(
        sys: &FiniteSystem,
        s: &SequenceSet,
        phi: &InverseFunction,
        f: &[f64],
        x: usize,
        n_max: i64,
    ) -> Result<Self> {
        sys.check_observable(f, x)?;
        let weights = inverse_derivative_weights(s, phi, n_max)?;
        let elements = s.window(0, n_max).to_vec();
        let mut acc = CompensatedSum::default();
        let prefix = elements
            .iter()
            .zip(weights)
            .map(|(&e, w)| {
                acc.add(w * f[sys.iterate(x, e)]);
                acc.value()
            })
            .collect();
        Ok(WeightedAverages { elements, prefix })
    }

    pub fn at(&self, n: i64) -> f64 {
        let k = self.elements.partition_point(|&e| e <= n);
        if k == 0 {
            0.0
        } else {
            self.prefix[k - 1] / n as f64
        }
    }
}

/// `Z_eps ∩ (lo, hi]` with `Z_eps = {floor((1+eps)^k) : k >= 0}`.
pub fn lacunary_points(eps: f64, lo: i64, hi: i64) -> Vec<i64> {
    let mut out = Vec::new();
    let mut k = 0i32;
    loop {
        let v = (1.0 + eps).powi(k).floor() as i64;
        if v > hi {
            break;
        }
        if v > lo && out.last() != Some(&v) {
            out.push(v);
        }
        k += 1;
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct OscillationReport {
    /// `max_{N in Z_eps ∩ (N_j, N_{j+1}]} |A^1_N - A^1_{N_j}|` per window.
    pub windows: Vec<f64>,
    pub sum: f64,
}

impl OscillationReport {
    /// `sum / J`
    pub fn mean(&self) -> f64 {
        self.sum / self.windows.len() as f64
    }
}

/// Pointwise oscillation sum at `x` over consecutive breakpoint windows.
/// A weaker proxy than the `L^2` oscillation norm over the whole space.
pub fn oscillation_diagnostic(
    sys: &FiniteSystem,
    s: &SequenceSet,
    phi: &InverseFunction,
    f: &[f64],
    x: usize,
    eps: f64,
    breakpoints: &[i64],
) -> Result<OscillationReport> {
    if !(eps > 0.0) {
        return Err(Error::Precondition(format!("eps = {eps} must be positive")));
    }
    if breakpoints.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: breakpoints.len(),
        });
    }
    if breakpoints[0] < 1 {
        return Err(Error::Precondition("breakpoints must be positive".into()));
    }
    if let Some(w) = breakpoints.windows(2).find(|w| 2 * w[0] >= w[1]) {
        return Err(Error::Precondition(format!(
            "breakpoints {} and {} violate 2 N_j < N_(j+1)",
            w[0], w[1]
        )));
    }
    let top = *breakpoints.last().unwrap();
    let averages = WeightedAverages::new(sys, s, phi, f, x, top)?;
    let windows: Vec<f64> = breakpoints
        .windows(2)
        .map(|w| {
            let base = averages.at(w[0]);
            lacunary_points(eps, w[0], w[1])
                .into_iter()
                .map(|n| (averages.at(n) - base).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    let sum = windows.iter().sum();
    Ok(OscillationReport { windows, sum })
}
