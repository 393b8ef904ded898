//! Calderón–Zygmund decomposition on the dyadic grid of `Z` and the
//! three-way refinement of the bad part at one scale.
//!
//! Everything is generic over [`Scalar`], implemented for `f64` and for
//! exact rationals. Cubes are `Q_{s,j} = [j 2^s, (j+1) 2^s)`.

use std::collections::BTreeMap;
use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
pub use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::signal::Signal;

/// Tolerance applied to invariant checks on the floating-point path.
pub const FLOAT_TOL: f64 = 1e-12;

pub trait Scalar:
    Clone
    + Debug
    + PartialOrd
    + Zero
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    const EXACT: bool;
    fn from_i64(v: i64) -> Self;
    fn abs_val(&self) -> Self;
    fn to_f64(&self) -> f64;

    /// `a <= b`, with relative slack `FLOAT_TOL * scale` on inexact types.
    fn le_within(a: &Self, b: &Self, scale: f64) -> bool {
        if Self::EXACT {
            a <= b
        } else {
            a.to_f64() <= b.to_f64() + FLOAT_TOL * scale.max(1.0)
        }
    }

    fn eq_within(a: &Self, b: &Self, scale: f64) -> bool {
        Self::le_within(a, b, scale) && Self::le_within(b, a, scale)
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;
    fn from_i64(v: i64) -> Self {
        v as f64
    }
    fn abs_val(&self) -> Self {
        self.abs()
    }
    fn to_f64(&self) -> f64 {
        *self
    }
}

impl Scalar for BigRational {
    const EXACT: bool = true;
    fn from_i64(v: i64) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }
    fn abs_val(&self) -> Self {
        self.abs()
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}

/// A finitely supported function on `Z` stored densely from `offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct Samples<T> {
    pub offset: i64,
    pub values: Vec<T>,
}

impl<T: Scalar> Samples<T> {
    pub fn new(offset: i64, values: Vec<T>) -> Self {
        Samples { offset, values }
    }

    pub fn get(&self, x: i64) -> T {
        let k = x - self.offset;
        if k < 0 || k >= self.values.len() as i64 {
            T::zero()
        } else {
            self.values[k as usize].clone()
        }
    }

    pub fn end(&self) -> i64 {
        self.offset + self.values.len() as i64
    }

    pub fn l1_norm(&self) -> T {
        self.values.iter().fold(T::zero(), |acc, v| acc + v.abs_val())
    }

    pub fn sup_norm(&self) -> T {
        self.values.iter().fold(T::zero(), |acc, v| {
            let a = v.abs_val();
            if a > acc {
                a
            } else {
                acc
            }
        })
    }

    /// Smallest and largest `x` with a nonzero value.
    pub fn support(&self) -> Option<(i64, i64)> {
        let first = self.values.iter().position(|v| !v.is_zero())?;
        let last = self.values.iter().rposition(|v| !v.is_zero())?;
        Some((self.offset + first as i64, self.offset + last as i64))
    }

    fn sum_over(&self, lo: i64, hi: i64) -> T {
        let a = (lo - self.offset).clamp(0, self.values.len() as i64) as usize;
        let b = (hi - self.offset).clamp(0, self.values.len() as i64) as usize;
        self.values[a..b].iter().fold(T::zero(), |acc, v| acc + v.clone())
    }

    fn slice(&self, lo: i64, hi: i64) -> Vec<T> {
        (lo..hi).map(|x| self.get(x)).collect()
    }
}

impl Samples<f64> {
    pub fn to_signal(&self) -> Signal {
        Signal::new(self.offset, self.values.clone())
    }
}

impl From<&Signal> for Samples<f64> {
    fn from(s: &Signal) -> Self {
        Samples::new(s.offset(), s.values().to_vec())
    }
}

/// Half-open cube `[j 2^s, (j+1) 2^s)`.
pub fn cube_bounds(s: u32, j: i64) -> (i64, i64) {
    let side = 1i64 << s;
    (j * side, (j + 1) * side)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Atom<T> {
    pub s: u32,
    pub j: i64,
    /// `f` restricted to the cube, indexed from the cube's left edge.
    pub values: Vec<T>,
}

impl<T: Scalar> Atom<T> {
    pub fn bounds(&self) -> (i64, i64) {
        cube_bounds(self.s, self.j)
    }

    pub fn samples(&self) -> Samples<T> {
        Samples::new(self.bounds().0, self.values.clone())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CzDecomposition<T> {
    pub lambda: T,
    pub good: Samples<T>,
    /// Selected cubes in increasing position; maximal, hence disjoint.
    pub atoms: Vec<Atom<T>>,
    /// Scale of the root cubes.
    pub root_scale: u32,
}

/// Stopping-time decomposition of a nonnegative `f` at height `lambda`.
/// Atoms carry no cancellation: `b_{s,j} = f 1_Q` and `g` vanishes on the
/// selected cubes.
pub fn cz_decompose<T: Scalar>(f: &Samples<T>, lambda: &T) -> Result<CzDecomposition<T>> {
    if *lambda <= T::zero() {
        return Err(Error::Precondition(format!("lambda = {lambda:?} must be positive")));
    }
    if f.values.iter().any(|v| *v < T::zero()) {
        return Err(Error::Precondition("f must be nonnegative".into()));
    }
    let total = f.l1_norm();
    let Some((lo, hi)) = f.support() else {
        return Err(Error::Degenerate("f vanishes identically".into()));
    };
    // smallest S with lambda 2^S >= ||f||_1: every root cube has average <= lambda
    let mut root_scale = 0u32;
    while lambda.clone() * T::from_i64(1i64 << root_scale) < total {
        root_scale += 1;
        if root_scale > 62 {
            return Err(Error::Overflow {
                m: root_scale as i64,
                value: total.to_f64(),
            });
        }
    }
    let mut atoms = Vec::new();
    let first = lo.div_euclid(1i64 << root_scale);
    let last = hi.div_euclid(1i64 << root_scale);
    for j in first..=last {
        descend(f, lambda, root_scale, j, &mut atoms);
    }
    let mut good = f.clone();
    for atom in &atoms {
        let (a, b) = atom.bounds();
        for x in a.max(good.offset)..b.min(good.end()) {
            good.values[(x - good.offset) as usize] = T::zero();
        }
    }
    Ok(CzDecomposition {
        lambda: lambda.clone(),
        good,
        atoms,
        root_scale,
    })
}

/// Visit the children of a cube whose average is at most `lambda`.
fn descend<T: Scalar>(f: &Samples<T>, lambda: &T, s: u32, j: i64, atoms: &mut Vec<Atom<T>>) {
    if s == 0 {
        return;
    }
    for child in [2 * j, 2 * j + 1] {
        let (a, b) = cube_bounds(s - 1, child);
        let mass = f.sum_over(a, b);
        if mass.is_zero() {
            continue;
        }
        if mass > lambda.clone() * T::from_i64(1i64 << (s - 1)) {
            atoms.push(Atom {
                s: s - 1,
                j: child,
                values: f.slice(a, b),
            });
        } else {
            descend(f, lambda, s - 1, child, atoms);
        }
    }
}

impl<T: Scalar> CzDecomposition<T> {
    /// The index set `B` of selected `(s, j)`.
    pub fn index_set(&self) -> Vec<(u32, i64)> {
        self.atoms.iter().map(|a| (a.s, a.j)).collect()
    }

    /// Scales carrying at least one atom.
    pub fn scales(&self) -> Vec<u32> {
        let mut s: Vec<u32> = self.atoms.iter().map(|a| a.s).collect();
        s.sort_unstable();
        s.dedup();
        s
    }

    pub fn atoms_at(&self, s: u32) -> impl Iterator<Item = &Atom<T>> {
        self.atoms.iter().filter(move |a| a.s == s)
    }

    pub fn total_measure(&self) -> i64 {
        self.atoms.iter().map(|a| 1i64 << a.s).sum()
    }

    /// Evaluates the five decomposition invariants against the input `f`.
    pub fn check(&self, f: &Samples<T>) -> CzInvariants {
        let scale = f.sup_norm().to_f64().max(self.lambda.to_f64());
        let two_lambda = T::from_i64(2) * self.lambda.clone();

        let mut atom_at: BTreeMap<i64, T> = BTreeMap::new();
        let mut disjoint = true;
        let mut atom_l1 = true;
        let mut sorted = self.atoms.iter().map(|a| a.bounds()).collect::<Vec<_>>();
        sorted.sort_unstable();
        for w in sorted.windows(2) {
            disjoint &= w[0].1 <= w[1].0;
        }
        for atom in &self.atoms {
            let (a, _) = atom.bounds();
            for (k, v) in atom.values.iter().enumerate() {
                let e = atom_at.entry(a + k as i64).or_insert_with(T::zero);
                *e = e.clone() + v.clone();
            }
            let l1 = atom.values.iter().fold(T::zero(), |acc, v| acc + v.abs_val());
            atom_l1 &= T::le_within(&l1, &(two_lambda.clone() * T::from_i64(1i64 << atom.s)), scale * (1u64 << atom.s) as f64);
        }

        let lo = f.offset.min(self.good.offset);
        let hi = f.end().max(self.good.end());
        let mut reconstruction = true;
        for x in lo..hi {
            let total = self.good.get(x) + atom_at.get(&x).cloned().unwrap_or_else(T::zero);
            reconstruction &= T::eq_within(&total, &f.get(x), scale);
        }
        for (&x, _) in atom_at.range(..lo).chain(atom_at.range(hi..)) {
            reconstruction &= T::eq_within(&atom_at[&x], &T::zero(), scale);
        }

        let good_bounded = T::le_within(&self.good.sup_norm(), &two_lambda, scale);
        let measure = T::from_i64(self.total_measure()) * self.lambda.clone();
        let measure_bounded = T::le_within(&measure, &(T::from_i64(4) * f.l1_norm()), scale);
        CzInvariants {
            reconstruction,
            disjoint,
            good_bounded,
            atom_l1_bounded: atom_l1,
            measure_bounded,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CzInvariants {
    /// `g + sum b_{s,j} = f`
    pub reconstruction: bool,
    pub disjoint: bool,
    /// `||g||_inf <= 2 lambda`
    pub good_bounded: bool,
    /// `||b_{s,j}||_1 <= 2 lambda 2^s`
    pub atom_l1_bounded: bool,
    /// `sum |Q| <= 4 ||f||_1 / lambda`
    pub measure_bounded: bool,
}

impl CzInvariants {
    pub fn all(&self) -> bool {
        self.reconstruction
            && self.disjoint
            && self.good_bounded
            && self.atom_l1_bounded
            && self.measure_bounded
    }
}

/// One selected cube of scale `s` after the split `b_s = b_cut + B + g_part`.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinedCube<T> {
    pub j: i64,
    pub b: Vec<T>,
    pub b_cut: Vec<T>,
    pub big_b: Vec<T>,
    /// Cube mean of `h = b - b_cut`; `g_part` equals it on the cube.
    pub mean: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefinedBadPart<T> {
    pub n: u32,
    pub s: u32,
    pub threshold: T,
    /// `s(n) = min{s : 2^s >= D_n}`
    pub s_of_n: u32,
    pub cubes: Vec<RefinedCube<T>>,
}

/// `s(n) = min{s : 2^s >= D_n}`
pub fn s_of(d_big: u64) -> u32 {
    d_big.next_power_of_two().trailing_zeros()
}

/// Splits the scale-`s` bad part at threshold `lambda d_n`. The pair
/// `(d_n, D_n)` comes from the kernel family at index `n`.
pub fn refine_bad_part<T: Scalar>(
    cz: &CzDecomposition<T>,
    s: u32,
    n: u32,
    d_n: u64,
    d_big: u64,
) -> Result<RefinedBadPart<T>> {
    let threshold = cz.lambda.clone() * T::from_i64(d_n as i64);
    let side = T::from_i64(1i64 << s);
    let cubes: Vec<RefinedCube<T>> = cz
        .atoms_at(s)
        .map(|atom| {
            let b_cut: Vec<T> = atom
                .values
                .iter()
                .map(|v| if v.abs_val() > threshold { v.clone() } else { T::zero() })
                .collect();
            let h: Vec<T> = atom.values.iter().zip(&b_cut).map(|(v, c)| v.clone() - c.clone()).collect();
            let mean = h.iter().fold(T::zero(), |acc, v| acc + v.clone()) / side.clone();
            let big_b = h.into_iter().map(|v| v - mean.clone()).collect();
            RefinedCube {
                j: atom.j,
                b: atom.values.clone(),
                b_cut,
                big_b,
                mean,
            }
        })
        .collect();
    if cubes.is_empty() {
        return Err(Error::Precondition(format!("no atom at scale {s}")));
    }
    Ok(RefinedBadPart {
        n,
        s,
        threshold,
        s_of_n: s_of(d_big),
        cubes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RefinementInvariants {
    /// `b_cut + B + g_part = b_s`
    pub telescoping: bool,
    /// `b_cut = b_s [|b_s| > lambda d_n]`
    pub cut_exact: bool,
    /// `sum_Q B = 0` on every cube
    pub mean_zero: bool,
    /// `|mean of h| <= 2 lambda` on every cube
    pub mean_bounded: bool,
}

impl RefinementInvariants {
    pub fn all(&self) -> bool {
        self.telescoping && self.cut_exact && self.mean_zero && self.mean_bounded
    }
}

impl<T: Scalar> RefinedBadPart<T> {
    pub fn check(&self, lambda: &T) -> RefinementInvariants {
        let two_lambda = T::from_i64(2) * lambda.clone();
        let mut inv = RefinementInvariants {
            telescoping: true,
            cut_exact: true,
            mean_zero: true,
            mean_bounded: true,
        };
        for cube in &self.cubes {
            let scale = cube.b.iter().fold(0.0f64, |m, v| m.max(v.to_f64().abs()));
            let mut sum_b = T::zero();
            for k in 0..cube.b.len() {
                let total = cube.b_cut[k].clone() + cube.big_b[k].clone() + cube.mean.clone();
                inv.telescoping &= T::eq_within(&total, &cube.b[k], scale);
                let expect = if cube.b[k].abs_val() > self.threshold {
                    cube.b[k].clone()
                } else {
                    T::zero()
                };
                inv.cut_exact &= cube.b_cut[k] == expect;
                sum_b = sum_b + cube.big_b[k].clone();
            }
            inv.mean_zero &= T::eq_within(&sum_b, &T::zero(), scale * cube.b.len() as f64);
            inv.mean_bounded &= T::le_within(&cube.mean.abs_val(), &two_lambda, scale);
        }
        inv
    }

    fn assemble(&self, part: impl Fn(&RefinedCube<T>, usize) -> T) -> Samples<T> {
        let Some(first) = self.cubes.first() else {
            return Samples::new(0, Vec::new());
        };
        let lo = cube_bounds(self.s, first.j).0;
        let hi = cube_bounds(self.s, self.cubes.last().unwrap().j).1;
        let mut values = vec![T::zero(); (hi - lo) as usize];
        for cube in &self.cubes {
            let a = (cube_bounds(self.s, cube.j).0 - lo) as usize;
            for k in 0..cube.b.len() {
                values[a + k] = part(cube, k);
            }
        }
        Samples::new(lo, values)
    }

    /// `b_s` as one function on the hull of the selected cubes.
    pub fn b_s(&self) -> Samples<T> {
        self.assemble(|c, k| c.b[k].clone())
    }

    pub fn b_cut(&self) -> Samples<T> {
        self.assemble(|c, k| c.b_cut[k].clone())
    }

    pub fn big_b(&self) -> Samples<T> {
        self.assemble(|c, k| c.big_b[k].clone())
    }

    pub fn g_part(&self) -> Samples<T> {
        self.assemble(|c, _| c.mean.clone())
    }
}

/// Exact value of an integer, `a/b`, or plain decimal literal such as `-0.125`.
pub fn parse_rational(text: &str) -> Option<BigRational> {
    let text = text.trim();
    if let Some((a, b)) = text.split_once('/') {
        let num: BigInt = a.trim().parse().ok()?;
        let den: BigInt = b.trim().parse().ok()?;
        if den.is_zero() {
            return None;
        }
        return Some(BigRational::new(num, den));
    }
    let (neg, body) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text.strip_prefix('+').unwrap_or(text)),
    };
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    if (int.is_empty() && frac.is_empty())
        || !int.bytes().chain(frac.bytes()).all(|b| b.is_ascii_digit())
    {
        return None;
    }
    let digits: BigInt = format!("{int}{frac}").parse().ok()?;
    let den = num_traits::pow(BigInt::from(10), frac.len());
    let v = BigRational::new(digits, den);
    Some(if neg { -v } else { v })
}

/// Integer samples promoted to exact rationals.
pub fn rational_samples(offset: i64, numerators: &[i64], denominator: i64) -> Samples<BigRational> {
    let den = BigInt::from(denominator);
    Samples::new(
        offset,
        numerators
            .iter()
            .map(|&v| BigRational::new(BigInt::from(v), den.clone()))
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(v: i64) -> BigRational {
        BigRational::from_integer(v.into())
    }

    #[test]
    fn flat_input_has_no_atoms() {
        let f = Samples::new(0, vec![1.0; 16]);
        let cz = cz_decompose(&f, &2.0).unwrap();
        assert!(cz.atoms.is_empty());
        assert_eq!(cz.good, f);
        assert!(cz.check(&f).all());
    }

    #[test]
    fn single_spike_by_hand() {
        // ||f||_1 = 8, lambda = 1: root scale 3, root [0, 8) has average 1.
        // Children [0,4) avg 2 > 1 is selected.
        let f = rational_samples(0, &[8], 1);
        let cz = cz_decompose(&f, &r(1)).unwrap();
        assert_eq!(cz.root_scale, 3);
        assert_eq!(cz.index_set(), vec![(2, 0)]);
        assert_eq!(cz.atoms[0].values, vec![r(8), r(0), r(0), r(0)]);
        assert!(cz.good.values.iter().all(|v| v.is_zero()));
        assert!(cz.check(&f).all());
        assert!(cz.total_measure() <= 32);
    }

    #[test]
    fn negative_cubes() {
        let f = rational_samples(-13, &[5, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 9], 2);
        let cz = cz_decompose(&f, &BigRational::new(1.into(), 3.into())).unwrap();
        assert!(!cz.atoms.is_empty());
        assert!(cz.atoms.iter().any(|a| a.j < 0));
        assert!(cz.check(&f).all());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(cz_decompose(&Samples::new(0, vec![1.0, -1.0]), &1.0).is_err());
        assert!(cz_decompose(&Samples::new(0, vec![0.0; 4]), &1.0).is_err());
        assert!(cz_decompose(&Samples::new(0, vec![1.0]), &0.0).is_err());
    }

    #[test]
    fn refinement_below_threshold_keeps_everything() {
        let f = rational_samples(0, &[3, 1, 0, 0, 0, 0, 0, 0], 1);
        let cz = cz_decompose(&f, &r(1)).unwrap();
        let s = cz.scales()[0];
        let refined = refine_bad_part(&cz, s, 0, 100, 128).unwrap();
        assert!(refined.b_cut().values.iter().all(|v| v.is_zero()));
        assert_eq!(refined.s_of_n, 7);
        assert!(refined.check(&cz.lambda).all());
        assert!(refine_bad_part(&cz, 30, 0, 1, 1).is_err());
    }

    #[test]
    fn refinement_single_spike() {
        // spike of height 2 lambda d_n with lambda = 1, d_n = 3
        let f = rational_samples(0, &[6, 1, 0, 0], 1);
        let cz = cz_decompose(&f, &r(1)).unwrap();
        let s = cz.atoms[0].s;
        let refined = refine_bad_part(&cz, s, 0, 3, 4).unwrap();
        let cube = &refined.cubes[0];
        assert_eq!(cube.b_cut[0], r(6));
        assert!(cube.b_cut[1..].iter().all(|v| v.is_zero()));
        let sum = cube.big_b.iter().fold(r(0), |a, v| a + v.clone());
        assert!(sum.is_zero());
        assert!(refined.check(&cz.lambda).all());
    }

    #[test]
    fn float_path_within_tolerance() {
        let f = Samples::new(5, vec![0.3, 0.0, 7.1, 0.0, 0.0, 2.2, 0.0, 0.1]);
        let cz = cz_decompose(&f, &0.7).unwrap();
        assert!(cz.check(&f).all());
        for s in cz.scales() {
            let refined = refine_bad_part(&cz, s, 1, 2, 8).unwrap();
            assert!(refined.check(&cz.lambda).all());
        }
    }

    #[test]
    fn rational_literals() {
        assert_eq!(parse_rational("3"), Some(r(3)));
        assert_eq!(parse_rational("-0.125"), Some(BigRational::new((-1).into(), 8.into())));
        assert_eq!(parse_rational("6/4"), Some(BigRational::new(3.into(), 2.into())));
        assert_eq!(parse_rational(".5"), Some(BigRational::new(1.into(), 2.into())));
        assert_eq!(parse_rational("1e3"), None);
        assert_eq!(parse_rational("1/0"), None);
        assert_eq!(parse_rational("."), None);
    }

    #[test]
    fn s_of_n() {
        assert_eq!(s_of(1), 0);
        assert_eq!(s_of(4096), 12);
        assert_eq!(s_of(4097), 13);
    }
}
