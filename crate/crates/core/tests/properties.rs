use std::sync::OnceLock;

use proptest::prelude::*;
use roughmax::cz::{cz_decompose, rational_samples, refine_bad_part, s_of, Samples};
use roughmax::ergodic::{ergodic_average, weighted_average, FiniteSystem};
use roughmax::expsum::{abel_sum, single_phase_sum, ExpSumParams};
use roughmax::kernel::{autocorrelation, build_kernel, Normalization};
use roughmax::maximal::{maximal_function, ScaleFamily};
use roughmax::seqset::contains_via_inverse;
use roughmax::signal::{convolve, ConvolutionMethod};
use roughmax::{parse_growth_spec, Complex64, GrowthFunction, InverseFunction, SequenceSet, Signal, Variant};

fn variant() -> impl Strategy<Value = Variant> {
    prop_oneof![
        Just(Variant::PurePower),
        (-2.0f64..2.0).prop_map(|a| Variant::PowerLog { a }),
        (-1.0f64..1.0, 0.1f64..0.9).prop_map(|(a, b)| Variant::PowerExpLog { a, b }),
        (1u32..=3).prop_map(|m| Variant::PowerIterLog { m }),
    ]
}

fn growth() -> impl Strategy<Value = GrowthFunction> {
    (variant(), 1.01f64..1.3, 0.5f64..2.0)
        .prop_filter_map("outside the family", |(v, c, s)| GrowthFunction::new(v, c, s, None).ok())
}

struct Fixture {
    phi: InverseFunction,
    set: SequenceSet,
    family: ScaleFamily,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let g: GrowthFunction = "pure:1.05:1.0".parse().unwrap();
        let phi = InverseFunction::new(g);
        let set = SequenceSet::generate(&g, 1 << 14).unwrap();
        let family = ScaleFamily::new(&set, &phi, 4, 8, Normalization::CountExact).unwrap();
        Fixture { phi, set, family }
    })
}

fn signal(max_len: usize) -> impl Strategy<Value = Signal> {
    (-50i64..50, prop::collection::vec(-4.0f64..4.0, 1..max_len)).prop_map(|(o, v)| Signal::new(o, v))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn inverse_round_trip(g in growth(), t in 0.0f64..1.0) {
        let phi = InverseFunction::new(g);
        let y = phi.y0() * (1e9 / phi.y0()).powf(t);
        let x = phi.invert(y).unwrap();
        prop_assert!((g.eval(x, 0).unwrap() - y).abs() <= 1e-11 * y);
    }

    #[test]
    fn derivative_recursion(g in growth(), t in 0.0f64..1.0) {
        let x = g.x0() * 1.5 * (1e8f64).powf(t);
        for i in 1..=3 {
            let lhs = x * g.eval(x, i).unwrap();
            let rhs = g.eval(x, i - 1).unwrap() * (g.alpha(i) + g.vartheta(x, i).unwrap());
            prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs(), "i = {i}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn inverse_second_derivative(g in growth(), t in 0.0f64..1.0) {
        let phi = InverseFunction::new(g);
        let y = phi.y0() * 2.0 * (1e8f64).powf(t);
        let x = phi.invert(y).unwrap();
        let lhs = y * y * phi.deriv(y, 2).unwrap();
        let rhs = x * (phi.gamma() + phi.theta_at(x, 1).unwrap()) * (phi.gamma() - 1.0 + phi.theta_at(x, 2).unwrap());
        prop_assert!((lhs - rhs).abs() <= 1e-9 * lhs.abs());
    }

    #[test]
    fn spec_round_trip(g in growth()) {
        let back = parse_growth_spec(&g.to_string()).unwrap();
        prop_assert_eq!(back, g);
    }

    #[test]
    fn membership_routes_agree(p in 1i64..(1 << 14)) {
        let fx = fixture();
        prop_assert_eq!(fx.set.contains(p), contains_via_inverse(&fx.phi, p).unwrap());
    }

    #[test]
    fn abel_summation(
        parts in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..200),
        a in -100i64..100,
        w in 0.001f64..0.1,
    ) {
        let u: Vec<Complex64> = parts.iter().map(|&(r, i)| Complex64::new(r, i)).collect();
        let g = |n: i64| (w * n as f64).cos();
        let direct: Complex64 = u.iter().enumerate().map(|(k, uk)| uk * g(a + 1 + k as i64)).sum();
        prop_assert!((abel_sum(&u, a, g) - direct).norm() <= 1e-12 * (1.0 + u.len() as f64));
    }

    #[test]
    fn exp_sum_conjugation(k in 8u32..14, m in 1i64..5, alpha in 0.0f64..1.0) {
        let phi = &fixture().phi;
        let mut p = ExpSumParams::single(1 << k, m);
        p.alpha = alpha;
        let s = single_phase_sum(phi, &p).unwrap();
        p.alpha = -alpha;
        p.m1 = -m;
        let t = single_phase_sum(phi, &p).unwrap();
        prop_assert!((s.actual - t.actual.conj()).norm() <= 1e-9 * s.terms as f64);
        prop_assert!(s.actual_abs <= s.terms as f64 + 1.0);
    }

    #[test]
    fn fast_matches_direct(a in signal(300), b in signal(300)) {
        let d = convolve(&a, &b, ConvolutionMethod::Direct).unwrap();
        let f = convolve(&a, &b, ConvolutionMethod::Fast).unwrap();
        prop_assert_eq!(d.offset(), f.offset());
        prop_assert_eq!(d.len(), f.len());
        let scale = a.l1_norm() * b.sup_norm() + 1.0;
        for (x, y) in d.values().iter().zip(f.values()) {
            prop_assert!((x - y).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn autocorrelation_even_with_squared_mass(n in 8i64..1024) {
        let fx = fixture();
        let k = build_kernel(&fx.set, &fx.phi, n, Normalization::PhiApprox).unwrap();
        let c = autocorrelation(&k);
        let len = k.signal().len() as i64;
        prop_assert_eq!(c.offset(), -(len - 1));
        for x in 1..len {
            prop_assert_eq!(c.get(x), c.get(-x));
        }
        let mass = k.mass();
        prop_assert!((c.sum() - mass * mass).abs() <= 1e-10 * mass * mass);
    }

    #[test]
    fn maximal_homogeneous_and_sublinear(
        a in signal(40),
        b in signal(40),
        e in -3i32..4,
    ) {
        let family = &fixture().family;
        let ma = maximal_function(family, &a).unwrap();
        let mb = maximal_function(family, &b).unwrap();
        let t = 2f64.powi(e);
        let mt = maximal_function(family, &a.scaled(t)).unwrap();
        let tol = 1e-12 * (a.l1_norm() + b.l1_norm() + 1.0);
        for x in ma.offset()..ma.end() {
            prop_assert!((mt.get(x) - t * ma.get(x)).abs() <= t * tol);
        }
        let sum = maximal_function(family, &a.add(&b)).unwrap();
        for x in sum.offset()..sum.end() {
            prop_assert!(sum.get(x) <= ma.get(x) + mb.get(x) + tol);
        }
    }

    #[test]
    fn cz_invariants_exact(
        offset in -64i64..64,
        nums in prop::collection::vec(0i64..50, 1..120),
        den in 1i64..8,
        lambda in 1i64..20,
    ) {
        let f = rational_samples(offset, &nums, den);
        let lambda = roughmax::cz::BigRational::from_integer(lambda.into());
        let cz = cz_decompose(&f, &lambda).unwrap();
        let inv = cz.check(&f);
        prop_assert!(inv.all(), "{inv:?}");
        for s in cz.scales() {
            for (n, d_n) in [(0u32, 1u64), (1, 3), (2, 7)] {
                let d_big = 1u64 << s;
                prop_assume!(s_of(d_big) == s);
                let r = refine_bad_part(&cz, s, n, d_n, d_big).unwrap();
                let rinv = r.check(&lambda);
                prop_assert!(rinv.all(), "s = {s}, n = {n}: {rinv:?}");
            }
        }
    }

    #[test]
    fn cz_invariants_float(values in prop::collection::vec(0.0f64..10.0, 1..200), lambda in 0.1f64..5.0) {
        let f = Samples::new(0, values);
        let cz = cz_decompose(&f, &lambda).unwrap();
        prop_assert!(cz.check(&f).all());
    }

    #[test]
    fn ergodic_measure_and_linearity(
        m in 2usize..64,
        seed in any::<u64>(),
        f in prop::collection::vec(-5i32..5, 64),
        g in prop::collection::vec(-5i32..5, 64),
        x in 0usize..64,
        n in 16i64..4096,
    ) {
        let fx = fixture();
        let sys = FiniteSystem::random_permutation(m, seed).unwrap();
        let f: Vec<f64> = f[..m].iter().map(|&v| v as f64).collect();
        let g: Vec<f64> = g[..m].iter().map(|&v| v as f64).collect();
        let (moved, plain) = sys.pushforward_sums(&f);
        prop_assert_eq!(moved, plain);

        let x = x % m;
        let af = ergodic_average(&sys, &fx.set, &f, x, n).unwrap();
        let ag = ergodic_average(&sys, &fx.set, &g, x, n).unwrap();
        let fg: Vec<f64> = f.iter().zip(&g).map(|(a, b)| 2.0 * a - b).collect();
        let afg = ergodic_average(&sys, &fx.set, &fg, x, n).unwrap();
        prop_assert!((afg - (2.0 * af - ag)).abs() <= 1e-12 * 15.0);

        let sup = f.iter().fold(0.0f64, |s, v| s.max(v.abs()));
        prop_assert!(af.abs() <= sup + 1e-12);
        let w = weighted_average(&sys, &fx.set, &fx.phi, &f, x, n).unwrap();
        prop_assert!(w.is_finite());
    }
}
