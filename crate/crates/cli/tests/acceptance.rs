//! Acceptance suite: one PASS/FAIL line per criterion, tolerances pinned.
//! Runs without the libtest harness so the lines always reach stdout.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use roughmax::cz::{self, rational_samples, BigRational};
use roughmax::ergodic::{self, FiniteSystem};
use roughmax::expsum::{self, Estimate};
use roughmax::growth::log_grid;
use roughmax::kernel::{self, Normalization};
use roughmax::maximal::{self, ScaleFamily};
use roughmax::Complex64;
use roughmax::seqset::contains_via_inverse;
use roughmax::stats;
use roughmax::{GrowthFunction, InverseFunction, SequenceSet, Signal};

type Check = Result<(bool, String), Box<dyn std::error::Error>>;

const ROUND_TRIP_TOL: f64 = 1e-10;
const IDENTITY_TOL: f64 = 1e-8;
const COUNT_BAND: (f64, f64) = (0.98, 1.02);
const SPREAD_LIMIT: f64 = 4.0;
const EN_SLOPE_LIMIT: f64 = -1.05;
const RATIO_FACTOR: f64 = 2.0;
const ABEL_TOL: f64 = 1e-12;
const WEAK_GROWTH: f64 = 1.25;
const ERGODIC_TOL: f64 = 0.05;

fn growth(spec: &str) -> GrowthFunction {
    spec.parse().unwrap_or_else(|e| panic!("{spec}: {e}"))
}

fn families(c: f64) -> [String; 3] {
    [
        format!("powerlog:{c}:1.0:1.0"),
        format!("powerexplog:{c}:1.0:1.0:0.5"),
        format!("poweriterlog:{c}:1.0:2"),
    ]
}

fn grid_for(phi: &InverseFunction) -> Vec<f64> {
    log_grid(phi.y0(), (1u64 << 30) as f64, 1000)
}

fn inversion_round_trip() -> Check {
    let t = Instant::now();
    let mut worst = 0.0f64;
    for c in [1.02, 1.05, 1.2] {
        for spec in families(c) {
            let g = growth(&spec);
            let phi = InverseFunction::new(g);
            for y in grid_for(&phi) {
                let x = phi.invert(y)?;
                worst = worst.max((g.eval(x, 0)? - y).abs() / y);
            }
        }
    }
    let secs = t.elapsed().as_secs_f64();
    Ok((
        worst <= ROUND_TRIP_TOL && secs < 1.0,
        format!("max |h(phi(y))-y|/y = {worst:.2e} (tol {ROUND_TRIP_TOL:e}), runtime {secs:.3} s (< 1 s)"),
    ))
}

fn identity_suite() -> Check {
    let mut rec = 0.0f64;
    let mut second = 0.0f64;
    for c in [1.02, 1.05, 1.2] {
        for spec in families(c) {
            let g = growth(&spec);
            let phi = InverseFunction::new(g);
            let gamma = phi.gamma();
            for y in grid_for(&phi) {
                let x = phi.invert(y)?;
                for i in 1..=3 {
                    let lhs = x * g.eval(x, i)?;
                    let rhs = g.eval(x, i - 1)? * (g.alpha(i) + g.vartheta(x, i)?);
                    rec = rec.max((lhs - rhs).abs() / lhs.abs());
                }
                let lhs = y * y * phi.deriv(y, 2)?;
                let rhs = phi.invert(y)?
                    * (gamma + phi.theta_at(x, 1)?)
                    * (gamma - 1.0 + phi.theta_at(x, 2)?);
                second = second.max((lhs - rhs).abs() / lhs.abs());
            }
        }
    }
    Ok((
        rec <= IDENTITY_TOL && second <= IDENTITY_TOL,
        format!(
            "derivative recursion max rel {rec:.2e}, second-derivative identity for phi max rel {second:.2e} (tol {IDENTITY_TOL:e})"
        ),
    ))
}

fn membership_equivalence() -> Check {
    let t = Instant::now();
    let mut summary = Vec::new();
    let mut ok = true;
    for spec in ["pure:1.5:1.0", "pure:1.05:1.0"] {
        let g = growth(spec);
        let phi = InverseFunction::new(g);
        let set = SequenceSet::generate(&g, 1_000_000)?;
        let mut mismatches = 0usize;
        let mut tested = 0usize;
        for p in set.p_min()..=1_000_000 {
            tested += 1;
            if set.contains(p) != contains_via_inverse(&phi, p)? {
                mismatches += 1;
            }
        }
        ok &= mismatches == 0;
        summary.push(format!("{spec}: {mismatches}/{tested} mismatches from p_min {}", set.p_min()));
    }
    let secs = t.elapsed().as_secs_f64();
    Ok((ok && secs < 10.0, format!("{}; runtime {secs:.2} s (< 10 s)", summary.join(", "))))
}

fn counting() -> Check {
    let t = Instant::now();
    let n = 1i64 << 20;
    let mut ok = true;
    let mut parts = Vec::new();
    for c in [1.02, 1.05] {
        let g = growth(&format!("pure:{c}:1.0"));
        let phi = InverseFunction::new(g);
        let set = SequenceSet::generate(&g, n)?;
        let ratio = set.count(n)? as f64 / phi.invert(n as f64)?;
        ok &= (COUNT_BAND.0..=COUNT_BAND.1).contains(&ratio);
        parts.push(format!("c={c}: {ratio:.6}"));
    }
    let secs = t.elapsed().as_secs_f64();
    Ok((
        ok && secs < 30.0,
        format!(
            "count/phi(N) at N=2^20: {} (band [{}, {}]); runtime {secs:.2} s (< 30 s)",
            parts.join(", "),
            COUNT_BAND.0,
            COUNT_BAND.1
        ),
    ))
}

struct Decomposition {
    reports: Vec<kernel::DecompositionReport>,
    elapsed: Duration,
}

fn decomposition_sweep() -> Result<Decomposition, Box<dyn std::error::Error>> {
    let t = Instant::now();
    let g = growth("pure:1.02:1.0");
    let phi = InverseFunction::new(g);
    let set = SequenceSet::generate(&g, 1 << 22)?;
    let reports = kernel::decomposition_sweep(&set, &phi, 12..=20)?;
    Ok(Decomposition {
        reports,
        elapsed: t.elapsed(),
    })
}

fn small_lag_bound(d: &Decomposition) -> Check {
    let vals: Vec<f64> = d.reports.iter().map(|r| r.small_x_bound).collect();
    let spread = stats::spread(&vals);
    let secs = d.elapsed.as_secs_f64();
    Ok((
        spread <= SPREAD_LIMIT && secs < 600.0,
        format!(
            "N|K*K~| over 0<|x|<=phi(N), N=2^12..2^20: range [{:.3}, {:.3}], max/min {spread:.3} (<= {SPREAD_LIMIT}); runtime {secs:.1} s (< 600 s)",
            stats::min(&vals),
            stats::max(&vals)
        ),
    ))
}

fn error_decay(d: &Decomposition) -> Check {
    let xs: Vec<f64> = d.reports.iter().map(|r| (r.scale as f64).log2()).collect();
    let ys: Vec<f64> = d.reports.iter().map(|r| r.en_sup.log2()).collect();
    let (slope, _) = stats::linear_fit(&xs, &ys)?;
    let lip: Vec<f64> = d.reports.iter().map(|r| r.gn_lipschitz).collect();
    let spread = stats::spread(&lip);
    Ok((
        slope <= EN_SLOPE_LIMIT && spread <= SPREAD_LIMIT,
        format!(
            "log2 en_sup slope {slope:.3} (<= {EN_SLOPE_LIMIT}, chi = {:.3}); N^2 Lipschitz of G_N max/min {spread:.3} (<= {SPREAD_LIMIT})",
            -slope - 1.0
        ),
    ))
}

fn exponential_sums() -> Check {
    let g = growth("pure:1.05:1.0");
    let phi = InverseFunction::new(g);
    let mut ok = true;
    let mut parts = Vec::new();
    for (estimate, label) in [(Estimate::SinglePhase, "single"), (Estimate::TwoPhase, "two")] {
        for m in [1, 2, 4] {
            let sweep = expsum::ratio_sweep(&phi, estimate, m, 1.0, 12..=20)?;
            let ratios: Vec<f64> = sweep.iter().map(|r| r.ratio).collect();
            let rel = stats::max(&ratios) / stats::median(&ratios);
            ok &= rel <= RATIO_FACTOR;
            parts.push(format!("{label} m={m}: {rel:.3}"));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0007);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let len = rng.gen_range(2..=200usize);
        let a = rng.gen_range(-500i64..500);
        let u: Vec<Complex64> = (0..len)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let gv: Vec<f64> = (0..=len).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let gf = |n: i64| gv[(n - a - 1) as usize];
        let direct: Complex64 = u.iter().enumerate().map(|(k, v)| v * gf(a + 1 + k as i64)).sum();
        let abel = expsum::abel_sum(&u, a, gf);
        let scale: f64 = u.iter().enumerate().map(|(k, v)| v.norm() * gf(a + 1 + k as i64).abs()).sum();
        worst = worst.max((abel - direct).norm() / scale);
    }
    ok &= worst <= ABEL_TOL;
    Ok((
        ok,
        format!(
            "max/median ratio per sweep (<= {RATIO_FACTOR}): {}; Abel summation max rel err {worst:.2e} over 1000 cases (tol {ABEL_TOL:e})",
            parts.join(", ")
        ),
    ))
}

fn sawtooth_truncation() -> Check {
    let mut ok = true;
    let mut parts = Vec::new();
    for m in [100u32, 1000] {
        let mut worst = 0.0f64;
        let mut imag = 0.0f64;
        for k in 0..10_000 {
            // 10^4 points in (-2, 3), none an integer
            let t = -2.0 + 5.0 * (k as f64 + 0.5) / 10_000.0;
            let tr = expsum::sawtooth_truncation(t, m);
            let err = (expsum::sawtooth(t) - tr.value.re).abs();
            worst = worst.max(err / tr.residual_bound);
            imag = imag.max(tr.value.im.abs());
        }
        ok &= worst <= 1.0 && imag <= 1e-12;
        parts.push(format!("M={m}: max err/bound {worst:.3}, max |Im| {imag:.1e}"));
    }
    Ok((ok, format!("{} (constant 1, Im tol 1e-12)", parts.join("; "))))
}

fn cz_invariants() -> Check {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0009);
    let mut failures = 0usize;
    let mut refinements = 0usize;
    for _ in 0..64 {
        let len = rng.gen_range(1..=300usize);
        let offset = rng.gen_range(-200i64..200);
        let nums: Vec<i64> = (0..len)
            .map(|_| if rng.gen_bool(0.3) { rng.gen_range(1..200) } else { 0 })
            .collect();
        if nums.iter().all(|&v| v == 0) {
            continue;
        }
        let f = rational_samples(offset, &nums, rng.gen_range(1..=12));
        let lambda = BigRational::new(rng.gen_range(1..=60i64).into(), rng.gen_range(1..=12i64).into());
        let decomposition = cz::cz_decompose(&f, &lambda)?;
        if !decomposition.check(&f).all() {
            failures += 1;
        }
        for s in decomposition.scales() {
            let d_n = rng.gen_range(1..=40u64);
            let refined = cz::refine_bad_part(&decomposition, s, 0, d_n, 4 * d_n)?;
            refinements += 1;
            if !refined.check(&lambda).all() {
                failures += 1;
            }
        }
    }
    let secs = t.elapsed().as_secs_f64();
    Ok((
        failures == 0 && secs < 60.0,
        format!(
            "64 rational cases, {refinements} refinements: {failures} invariant failures (exact); runtime {secs:.2} s (< 60 s)"
        ),
    ))
}

fn weak_type_trend() -> Check {
    let t = Instant::now();
    let g = growth("pure:1.02:1.0");
    let phi = InverseFunction::new(g);
    let set = SequenceSet::generate(&g, 4 << 18)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_000a);
    let mut corpus = vec![Signal::delta(0)];
    for _ in 0..8 {
        let pairs: Vec<(i64, f64)> = (0..256)
            .map(|_| (rng.gen_range(0..1i64 << 16), rng.gen_range(1.0..2.0)))
            .collect();
        corpus.push(Signal::from_pairs(&pairs));
    }
    let mut sups = Vec::new();
    for n_hi in [14, 18] {
        let family = ScaleFamily::new(&set, &phi, 8, n_hi, Normalization::CountExact)?;
        let mut row = Vec::new();
        for f in &corpus {
            let profile = maximal::weak_type_profile(&family, f, &maximal::lambda_grid(&family, f))?;
            row.push(maximal::profile_sup(&profile));
        }
        sups.push(row);
    }
    let growth_worst = sups[1]
        .iter()
        .zip(&sups[0])
        .map(|(b, a)| b / a)
        .fold(0.0, f64::max);
    let secs = t.elapsed().as_secs_f64();
    Ok((
        growth_worst <= WEAK_GROWTH && secs < 900.0,
        format!(
            "sup ratio at n_hi=14: delta {:.3}, corpus max {:.3}; n_hi=18: delta {:.3}, corpus max {:.3}; worst growth x{growth_worst:.3} (<= {WEAK_GROWTH}); runtime {secs:.1} s (< 900 s)",
            sups[0][0],
            stats::max(&sups[0]),
            sups[1][0],
            stats::max(&sups[1])
        ),
    ))
}

fn family_hypotheses() -> Check {
    let g = growth("pure:1.02:1.0");
    let phi = InverseFunction::new(g);
    let set = SequenceSet::generate(&g, 4 << 20)?;
    let family = ScaleFamily::new(&set, &phi, 12, 20, Normalization::PhiApprox)?;
    let report = maximal::verify_family_hypotheses(&family, &phi)?;
    let spread = report.f_zero_spread();
    Ok((
        spread <= SPREAD_LIMIT && report.eps1 > 0.0,
        format!(
            "F_n(0) d_n max/min {spread:.4} (<= {SPREAD_LIMIT}); fitted eps1 {:.3} (> 0); eps0 {:.3}, M {:.3}",
            report.eps1, report.eps0, report.growth_ratio
        ),
    ))
}

fn ergodic_convergence() -> Check {
    let g = growth("pure:1.02:1.0");
    let phi = InverseFunction::new(g);
    let set = SequenceSet::generate(&g, 1 << 20)?;
    let sys = FiniteSystem::cyclic_shift(97, 5)?;
    let f = ergodic::indicator(97, 0);
    let avg = ergodic::ergodic_average(&sys, &set, &f, 0, 1 << 20)?;
    let dev = (avg - 1.0 / 97.0).abs();
    let bp = |j: u32| (0..=j).map(|k| 4i64.pow(k)).collect::<Vec<_>>();
    let j4 = ergodic::oscillation_diagnostic(&sys, &set, &phi, &f, 0, 0.1, &bp(4))?.mean();
    let j8 = ergodic::oscillation_diagnostic(&sys, &set, &phi, &f, 0, 0.1, &bp(8))?.mean();
    Ok((
        dev < ERGODIC_TOL && j8 <= j4,
        format!(
            "|A f - 1/97| at N=2^20 = {dev:.2e} (< {ERGODIC_TOL}); pointwise oscillation sum/J: J=4 {j4:.5}, J=8 {j8:.5} (nonincreasing)"
        ),
    ))
}

fn run_cli(args: &[&str], out: &Path, workers: usize) -> Result<Vec<u8>, Box<dyn std::error::Error>> {
    let status = Command::new(env!("CARGO_BIN_EXE_roughmax"))
        .args(args)
        .arg("--workers")
        .arg(workers.to_string())
        .arg("--out")
        .arg(out)
        .status()?;
    if !status.success() {
        return Err(format!("roughmax {args:?} exited with {status}").into());
    }
    Ok(std::fs::read(out)?)
}

fn cli_determinism() -> Check {
    let dir = tempfile::tempdir()?;
    let input = dir.path().join("f.csv");
    std::fs::write(&input, "x,value\n-3,5/2\n0,8\n7,1\n40,3\n")?;
    let input = input.to_str().unwrap().to_string();
    let commands: Vec<Vec<&str>> = vec![
        vec!["--h", "powerlog:1.02:1.0:1.0", "growth-table", "--count", "32"],
        vec!["--h", "pure:1.05:1.0", "seqset", "--nmax", "100000"],
        vec!["--h", "pure:1.02:1.0", "kernel-decomp", "--kmin", "8", "--kmax", "12"],
        vec!["--h", "pure:1.05:1.0", "expsum", "--estimate", "single-phase", "--sweep", "8..12", "--params", "m=2"],
        vec!["--h", "pure:1.05:1.0", "expsum", "--estimate", "two-phase", "--sweep", "8..12"],
        vec!["--h", "pure:1.05:1.0", "expsum", "--estimate", "min-norm", "--sweep", "8..12"],
        vec!["--h", "pure:1.02:1.0", "weaktype", "--nlo", "6", "--nhi", "12", "--corpus", "random:64"],
        vec!["--h", "pure:1.02:1.0", "--format", "json", "weaktype", "--nlo", "6", "--nhi", "10"],
        vec!["cz", "--input", &input, "--lambda", "1/3"],
        vec!["--h", "pure:1.02:1.0", "ergodic", "--sweep", "8..14", "--windows", "5"],
        vec!["--h", "pure:1.02:1.0", "verify-family", "--nlo", "8", "--nhi", "12"],
    ];
    let mut differing = Vec::new();
    for (k, args) in commands.iter().enumerate() {
        let mut args = args.clone();
        args.extend(["--seed", "11"]);
        let runs = [1usize, 1, 2, 4]
            .iter()
            .enumerate()
            .map(|(r, &w)| run_cli(&args, &dir.path().join(format!("out_{k}_{r}")), w))
            .collect::<Result<Vec<_>, _>>()?;
        if runs.iter().any(|r| *r != runs[0]) {
            differing.push(args.join(" "));
        }
    }
    Ok((
        differing.is_empty(),
        format!(
            "{} commands x 4 runs (workers 1,1,2,4): {} with differing bytes{}",
            commands.len(),
            differing.len(),
            if differing.is_empty() {
                String::new()
            } else {
                format!(" [{}]", differing.join("; "))
            }
        ),
    ))
}

fn main() {
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let decomposition = std::cell::OnceCell::new();
    let shared = || -> &Result<Decomposition, String> {
        decomposition.get_or_init(|| decomposition_sweep().map_err(|e| e.to_string()))
    };
    let with_sweep = |f: fn(&Decomposition) -> Check| -> Check {
        match shared() {
            Ok(d) => f(d),
            Err(e) => Err(e.clone().into()),
        }
    };
    type Criterion<'a> = (u32, &'a str, Box<dyn Fn() -> Check + 'a>);
    let criteria: Vec<Criterion> = vec![
        (1, "inversion round-trip", Box::new(inversion_round_trip)),
        (2, "derivative identities", Box::new(identity_suite)),
        (3, "membership equivalence", Box::new(membership_equivalence)),
        (4, "counting asymptotic", Box::new(counting)),
        (5, "autocorrelation small-lag bound", Box::new(move || with_sweep(small_lag_bound))),
        (6, "autocorrelation error decay", Box::new(move || with_sweep(error_decay))),
        (7, "exponential-sum ratios", Box::new(exponential_sums)),
        (8, "sawtooth truncation", Box::new(sawtooth_truncation)),
        (9, "CZ invariants", Box::new(cz_invariants)),
        (10, "weak-type trend", Box::new(weak_type_trend)),
        (11, "kernel-family hypotheses", Box::new(family_hypotheses)),
        (12, "ergodic convergence", Box::new(ergodic_convergence)),
        (13, "CLI determinism", Box::new(cli_determinism)),
    ];
    let mut failed = 0;
    let mut ran = 0;
    for (id, name, check) in &criteria {
        if let Some(f) = &filter {
            if !name.contains(f.as_str()) && id.to_string() != *f {
                continue;
            }
        }
        ran += 1;
        let t = Instant::now();
        let (pass, detail) = match check() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "{} [{id:02}] {name}: {detail} ({:.1} s)",
            if pass { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} of {ran} criteria passed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
