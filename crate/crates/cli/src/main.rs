//! `roughmax` command-line driver.

mod output;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use roughmax::cz::{self, BigRational, Samples, Scalar};
use roughmax::ergodic::{self, FiniteSystem};
use roughmax::expsum;
use roughmax::kernel::{self, Normalization};
use roughmax::maximal::{self, ScaleFamily};
use roughmax::{GrowthFunction, InverseFunction, SequenceSet, Signal};

use output::{emit, Cell, Format, Table};

#[derive(Debug, Parser, Serialize)]
#[command(name = "roughmax", version, about = "Rough maximal functions along Piatetski-Shapiro type sequences")]
struct Cli {
    /// Growth function, `variant:c:C_h[:A[:B|:m]][@x0]` or `identity`.
    #[arg(long = "h", global = true)]
    h: Option<String>,

    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Worker threads; 0 picks the machine default. Does not affect output.
    #[arg(long, global = true, default_value_t = 0)]
    #[serde(skip)]
    workers: usize,

    #[arg(long, global = true)]
    #[serde(skip)]
    out: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Command {
    /// Inversion accuracy and the auxiliary functions on a log grid.
    GrowthTable(GrowthTableArgs),
    /// Counting table of N_h, optionally emitting its elements.
    Seqset(SeqsetArgs),
    /// Autocorrelation decomposition over dyadic scales.
    KernelDecomp(KernelDecompArgs),
    /// Exponential sums against their bounds over dyadic scales.
    Expsum(ExpsumArgs),
    /// Weak-type profile of the maximal function.
    Weaktype(WeaktypeArgs),
    /// Calderon-Zygmund decomposition of a function read from CSV.
    Cz(CzArgs),
    /// Ergodic averages on a finite permutation system.
    Ergodic(ErgodicArgs),
    /// Kernel-family hypotheses over dyadic scales.
    VerifyFamily(VerifyFamilyArgs),
}

#[derive(Debug, Args, Serialize)]
struct GrowthTableArgs {
    /// Smallest y; defaults to h(x0).
    #[arg(long)]
    ymin: Option<f64>,
    #[arg(long, default_value_t = 1073741824.0)]
    ymax: f64,
    #[arg(long, default_value_t = 64)]
    count: usize,
}

#[derive(Debug, Args, Serialize)]
struct SeqsetArgs {
    #[arg(long)]
    nmax: i64,
    /// Write the elements, one per line, to this file.
    #[arg(long)]
    #[serde(skip)]
    emit: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Norm {
    Count,
    Phi,
}

impl From<Norm> for Normalization {
    fn from(n: Norm) -> Self {
        match n {
            Norm::Count => Normalization::CountExact,
            Norm::Phi => Normalization::PhiApprox,
        }
    }
}

#[derive(Debug, Args, Serialize)]
struct KernelDecompArgs {
    #[arg(long, default_value_t = 12)]
    kmin: u32,
    #[arg(long, default_value_t = 20)]
    kmax: u32,
    #[arg(long, value_enum, default_value_t = Norm::Phi)]
    norm: Norm,
}

/// Inclusive `lo..hi`.
#[derive(Debug, Clone, Copy, Serialize)]
struct Sweep {
    lo: u32,
    hi: u32,
}

impl FromStr for Sweep {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (a, b) = s.split_once("..").ok_or("expected kmin..kmax")?;
        let lo: u32 = a.trim().parse().map_err(|e| format!("{e}"))?;
        let hi: u32 = b.trim().parse().map_err(|e| format!("{e}"))?;
        if lo > hi || hi > 40 {
            return Err(format!("bad sweep {lo}..{hi}"));
        }
        Ok(Sweep { lo, hi })
    }
}

impl Sweep {
    fn ks(&self) -> impl Iterator<Item = u32> {
        self.lo..=self.hi
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum EstimateArg {
    SinglePhase,
    TwoPhase,
    MinNorm,
}

/// `key=value` pairs separated by commas.
#[derive(Debug, Clone, Serialize, Default)]
struct ExpsumRecord {
    m: Option<i64>,
    m2: Option<i64>,
    kappa: Option<f64>,
    /// Fixed frequency; absent means the stationary choice.
    alpha: Option<f64>,
    l: Option<i64>,
    p: Option<i64>,
    q: Option<i64>,
    x: Option<i64>,
    big_m: Option<u32>,
}

impl FromStr for ExpsumRecord {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let mut r = ExpsumRecord::default();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part.split_once('=').ok_or(format!("expected key=value in {part:?}"))?;
            let bad = |e: &dyn fmt::Display| format!("{k}: {e}");
            match k.trim() {
                "m" | "m1" => r.m = Some(v.parse().map_err(|e| bad(&e))?),
                "m2" => r.m2 = Some(v.parse().map_err(|e| bad(&e))?),
                "kappa" => r.kappa = Some(v.parse().map_err(|e| bad(&e))?),
                "alpha" if v == "stationary" => r.alpha = None,
                "alpha" => r.alpha = Some(v.parse().map_err(|e| bad(&e))?),
                "l" => r.l = Some(v.parse().map_err(|e| bad(&e))?),
                "p" => r.p = Some(v.parse().map_err(|e| bad(&e))?),
                "q" => r.q = Some(v.parse().map_err(|e| bad(&e))?),
                "x" => r.x = Some(v.parse().map_err(|e| bad(&e))?),
                "M" => r.big_m = Some(v.parse().map_err(|e| bad(&e))?),
                other => return Err(format!("unknown parameter {other:?}")),
            }
        }
        Ok(r)
    }
}

#[derive(Debug, Args, Serialize)]
struct ExpsumArgs {
    #[arg(long, value_enum)]
    estimate: EstimateArg,
    #[arg(long, default_value = "12..20")]
    sweep: Sweep,
    /// e.g. `m=2,kappa=1,alpha=stationary,p=0,q=0,M=64`
    #[arg(long, default_value = "")]
    params: ExpsumRecord,
}

#[derive(Debug, Clone, Copy, Serialize)]
enum Corpus {
    Delta,
    Random { k: usize, seed: Option<u64>, span: i64 },
}

impl FromStr for Corpus {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            ["delta"] => Ok(Corpus::Delta),
            ["random", rest @ ..] if !rest.is_empty() && rest.len() <= 3 => {
                let k = rest[0].parse().map_err(|e| format!("K: {e}"))?;
                let seed = rest.get(1).map(|v| v.parse().map_err(|e| format!("seed: {e}"))).transpose()?;
                let span = match rest.get(2) {
                    Some(v) => v.parse().map_err(|e| format!("span: {e}"))?,
                    None => 1 << 16,
                };
                if k == 0 || span < 1 {
                    return Err("K and span must be positive".into());
                }
                Ok(Corpus::Random { k, seed, span })
            }
            _ => Err("expected delta or random:K[:seed[:span]]".into()),
        }
    }
}

#[derive(Debug, Args, Serialize)]
struct WeaktypeArgs {
    #[arg(long, default_value_t = 8)]
    nlo: u32,
    #[arg(long, default_value_t = 18)]
    nhi: u32,
    #[arg(long, default_value = "delta")]
    corpus: Corpus,
    #[arg(long, value_enum, default_value_t = Norm::Count)]
    norm: Norm,
}

#[derive(Debug, Args, Serialize)]
struct CzArgs {
    /// CSV of `x,value` rows; `#` lines and a non-numeric header are skipped.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    lambda: String,
    /// Directory receiving `good.csv` and one `atom_s{s}_j{j}.csv` per atom.
    #[arg(long)]
    #[serde(skip)]
    emit_atoms: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Serialize)]
enum SystemSpec {
    Shift { m: usize, step: usize },
    Identity { m: usize },
    Random { m: usize, seed: u64 },
}

impl FromStr for SystemSpec {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |v: &str| v.parse::<usize>().map_err(|e| format!("{v}: {e}"));
        match parts.as_slice() {
            ["shift", m, step] => Ok(SystemSpec::Shift {
                m: num(m)?,
                step: num(step)?,
            }),
            ["identity", m] => Ok(SystemSpec::Identity { m: num(m)? }),
            ["random", m, seed] => Ok(SystemSpec::Random {
                m: num(m)?,
                seed: seed.parse().map_err(|e| format!("{seed}: {e}"))?,
            }),
            _ => Err("expected shift:m:step, identity:m or random:m:seed".into()),
        }
    }
}

impl SystemSpec {
    fn build(self) -> roughmax::Result<FiniteSystem> {
        match self {
            SystemSpec::Shift { m, step } => FiniteSystem::cyclic_shift(m, step),
            SystemSpec::Identity { m } => FiniteSystem::identity(m),
            SystemSpec::Random { m, seed } => FiniteSystem::random_permutation(m, seed),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
enum Observable {
    Indicator(usize),
    Constant(f64),
}

impl FromStr for Observable {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.split_once(':') {
            Some(("indicator", k)) => Ok(Observable::Indicator(k.parse().map_err(|e| format!("{e}"))?)),
            Some(("const", c)) => Ok(Observable::Constant(c.parse().map_err(|e| format!("{e}"))?)),
            _ => Err("expected indicator:k or const:c".into()),
        }
    }
}

impl Observable {
    fn values(self, m: usize) -> Vec<f64> {
        match self {
            Observable::Indicator(k) => ergodic::indicator(m, k),
            Observable::Constant(c) => vec![c; m],
        }
    }
}

#[derive(Debug, Args, Serialize)]
struct ErgodicArgs {
    #[arg(long, default_value = "shift:97:5")]
    system: SystemSpec,
    #[arg(long, default_value = "indicator:0")]
    f: Observable,
    #[arg(long, default_value_t = 0)]
    x: usize,
    #[arg(long, default_value = "10..20")]
    sweep: Sweep,
    /// Oscillation windows J with breakpoints 4^j; 0 skips the diagnostic.
    #[arg(long, default_value_t = 0)]
    windows: u32,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
}

#[derive(Debug, Args, Serialize)]
struct VerifyFamilyArgs {
    #[arg(long, default_value_t = 12)]
    nlo: u32,
    #[arg(long, default_value_t = 20)]
    nhi: u32,
    #[arg(long, value_enum, default_value_t = Norm::Phi)]
    norm: Norm,
}

/// Failure carrying its exit status.
#[derive(Debug)]
struct Failure {
    code: u8,
    error: anyhow::Error,
}

fn classify(error: anyhow::Error) -> Failure {
    let numeric = error
        .chain()
        .any(|e| e.downcast_ref::<roughmax::Error>().is_some_and(roughmax::Error::is_numeric));
    Failure {
        code: if numeric { 3 } else { 2 },
        error,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: &Cli) -> std::result::Result<(), Failure> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.workers)
        .build()
        .map_err(|e| classify(anyhow!(e)))?;
    let (name, table) = pool.install(|| dispatch(cli)).map_err(classify)?;
    let config = serde_json::to_value(cli).map_err(|e| classify(e.into()))?;
    let text = table.render(cli.format, name, &config);
    emit(&text, cli.out.as_deref()).map_err(classify)
}

fn growth(cli: &Cli) -> Result<GrowthFunction> {
    let spec = cli.h.as_deref().ok_or_else(|| anyhow!("--h is required for this command"))?;
    Ok(roughmax::parse_growth_spec(spec)?)
}

fn dispatch(cli: &Cli) -> Result<(&'static str, Table)> {
    Ok(match &cli.command {
        Command::GrowthTable(a) => ("growth-table", growth_table(growth(cli)?, a)?),
        Command::Seqset(a) => ("seqset", seqset(cli, growth(cli)?, a)?),
        Command::KernelDecomp(a) => ("kernel-decomp", kernel_decomp(growth(cli)?, a)?),
        Command::Expsum(a) => ("expsum", expsum_sweep(growth(cli)?, a)?),
        Command::Weaktype(a) => ("weaktype", weaktype(cli, growth(cli)?, a)?),
        Command::Cz(a) => ("cz", cz_command(cli, a)?),
        Command::Ergodic(a) => ("ergodic", ergodic_sweep(growth(cli)?, a)?),
        Command::VerifyFamily(a) => ("verify-family", verify_family(growth(cli)?, a)?),
    })
}

fn growth_table(g: GrowthFunction, a: &GrowthTableArgs) -> Result<Table> {
    let phi = InverseFunction::new(g);
    let lo = a.ymin.unwrap_or(phi.y0());
    if a.count < 2 || a.ymax.partial_cmp(&lo) != Some(std::cmp::Ordering::Greater) {
        bail!(roughmax::Error::Precondition(format!(
            "need count >= 2 and ymax > {lo}"
        )));
    }
    let unit = g.exponent() == 1.0;
    let mut cols = vec![
        "y", "phi", "roundtrip_err", "phi1", "phi2", "vartheta1", "vartheta2", "vartheta3", "theta1",
        "theta2", "theta3",
    ];
    if unit {
        cols.extend(["sigma", "tau"]);
    }
    let mut table = Table::new(&cols);
    for y in roughmax::growth::log_grid(lo, a.ymax, a.count) {
        let x = phi.invert(y)?;
        let mut row: Vec<Cell> = vec![
            y.into(),
            x.into(),
            ((g.eval(x, 0)? - y).abs() / y).into(),
            phi.deriv(y, 1)?.into(),
            phi.deriv(y, 2)?.into(),
        ];
        for i in 1..=3 {
            row.push(g.vartheta(x, i)?.into());
        }
        for i in 1..=3 {
            row.push(phi.theta_at(x, i)?.into());
        }
        if unit {
            row.push(phi.sigma(y)?.into());
            row.push(phi.tau(y)?.into());
        }
        table.push(row);
    }
    table.note("growth", g.to_string());
    Ok(table)
}

fn dyadic_points(nmax: i64) -> Vec<i64> {
    let mut ns: Vec<i64> = (0..63).map(|k| 1i64 << k).take_while(|&n| n <= nmax).collect();
    if ns.last() != Some(&nmax) {
        ns.push(nmax);
    }
    ns
}

fn seqset(cli: &Cli, g: GrowthFunction, a: &SeqsetArgs) -> Result<Table> {
    let phi = InverseFunction::new(g);
    let set = SequenceSet::generate(&g, a.nmax)?;
    let ns: Vec<i64> = dyadic_points(a.nmax).into_iter().filter(|&n| n as f64 >= phi.y0()).collect();
    let mut table = Table::new(&["N", "count", "phi_N", "ratio"]);
    for row in set.counting_table(&phi, &ns)? {
        table.push(vec![row.n.into(), row.count.into(), row.phi_n.into(), row.ratio.into()]);
    }
    table.note("elements", set.len());
    table.note("p_min", set.p_min());
    if let Some(path) = &a.emit {
        let mut list = Table::new(&["p"]);
        for &p in set.elements() {
            list.push(vec![p.into()]);
        }
        let config = serde_json::to_value(cli)?;
        emit(&list.render(cli.format, "seqset", &config), Some(path))?;
    }
    Ok(table)
}

fn kernel_decomp(g: GrowthFunction, a: &KernelDecompArgs) -> Result<Table> {
    check_scales(a.kmin, a.kmax)?;
    let phi = InverseFunction::new(g);
    let set = SequenceSet::generate(&g, 4i64 << a.kmax)?;
    let mut table = Table::new(&["k", "N", "small_x_bound", "gn_sup", "en_sup", "gn_lipschitz", "mass"]);
    let mut reports = Vec::new();
    for k in a.kmin..=a.kmax {
        let kern = kernel::build_kernel(&set, &phi, 1i64 << k, a.norm.into())?;
        let r = kernel::decomposition_report(&kern, &phi)?;
        table.push(vec![
            k.into(),
            r.scale.into(),
            r.small_x_bound.into(),
            r.gn_sup.into(),
            r.en_sup.into(),
            r.gn_lipschitz.into(),
            r.mass.into(),
        ]);
        reports.push(r);
    }
    if reports.len() >= 4 {
        table.note("chi", kernel::estimate_chi(&reports)?);
    }
    Ok(table)
}

fn check_scales(lo: u32, hi: u32) -> Result<()> {
    if lo == 0 || lo > hi || hi > 36 {
        bail!(roughmax::Error::Range {
            what: "dyadic scale",
            value: hi as i64,
            lo: 1,
            hi: 36,
        });
    }
    Ok(())
}

fn expsum_sweep(g: GrowthFunction, a: &ExpsumArgs) -> Result<Table> {
    let phi = InverseFunction::new(g);
    let r = &a.params;
    let m = r.m.unwrap_or(1);
    let kappa = r.kappa.unwrap_or(1.0);
    let mut table = Table::new(&["k", "N", "actual_abs", "bound", "ratio"]);
    let mut ratios = Vec::new();
    for k in a.sweep.ks() {
        let n = 1i64 << k;
        let result = match a.estimate {
            EstimateArg::MinNorm => {
                let big_m = r.big_m.unwrap_or(((n as f64).sqrt().ceil() as u32).max(2));
                let (actual, bound) = expsum::min_norm_sum(
                    &phi,
                    n,
                    r.x.unwrap_or(0),
                    big_m,
                    r.p.unwrap_or(0),
                    r.q.unwrap_or(0),
                )?;
                (actual, bound)
            }
            EstimateArg::SinglePhase | EstimateArg::TwoPhase => {
                let single = matches!(a.estimate, EstimateArg::SinglePhase);
                let mode = if single {
                    expsum::PhaseMode::Single
                } else {
                    expsum::PhaseMode::Two
                };
                let mut params = if single {
                    expsum::ExpSumParams::single(n, m)
                } else {
                    let x = match r.x {
                        Some(x) => x,
                        None => phi.invert(n as f64)?.powf(kappa).ceil() as i64,
                    };
                    expsum::ExpSumParams::two(n, x, m, r.m2.unwrap_or(m), kappa)
                };
                if single {
                    params.x = r.x.unwrap_or(0);
                }
                params.l = r.l.unwrap_or(1);
                params.p = r.p.unwrap_or(0);
                params.q = r.q.unwrap_or(0);
                params.alpha = match r.alpha {
                    Some(v) => v,
                    None => expsum::stationary_alpha(&phi, &params, mode)?,
                };
                let res = if single {
                    expsum::single_phase_sum(&phi, &params)?
                } else {
                    expsum::two_phase_sum(&phi, &params)?
                };
                (res.actual_abs, res.bound)
            }
        };
        let ratio = result.0 / result.1;
        ratios.push(ratio);
        table.push(vec![k.into(), n.into(), result.0.into(), result.1.into(), ratio.into()]);
    }
    table.note("max_over_median", roughmax::stats::max(&ratios) / roughmax::stats::median(&ratios));
    Ok(table)
}

fn random_corpus(k: usize, seed: u64, span: i64) -> Signal {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let pairs: Vec<(i64, f64)> = (0..k)
        .map(|_| (rng.gen_range(0..span), rng.gen_range(1.0..2.0)))
        .collect();
    Signal::from_pairs(&pairs)
}

fn weaktype(cli: &Cli, g: GrowthFunction, a: &WeaktypeArgs) -> Result<Table> {
    check_scales(a.nlo, a.nhi)?;
    let phi = InverseFunction::new(g);
    let set = SequenceSet::generate(&g, 4i64 << a.nhi)?;
    let family = ScaleFamily::new(&set, &phi, a.nlo, a.nhi, a.norm.into())?;
    let f = match a.corpus {
        Corpus::Delta => Signal::delta(0),
        Corpus::Random { k, seed, span } => random_corpus(k, seed.unwrap_or(cli.seed), span),
    };
    let lambdas = maximal::lambda_grid(&family, &f);
    let profile = maximal::weak_type_profile(&family, &f, &lambdas)?;
    let mut table = Table::new(&["lambda", "superlevel_count", "ratio"]);
    for p in &profile {
        table.push(vec![p.lambda.into(), p.superlevel_count.into(), p.ratio.into()]);
    }
    table.note("sup_ratio", maximal::profile_sup(&profile));
    table.note("f_l1", f.l1_norm());
    Ok(table)
}

enum CzInput {
    Exact(Samples<BigRational>, BigRational),
    Float(Samples<f64>, f64),
}

fn read_cz_input(path: &Path, lambda: &str) -> Result<CzInput> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut rows: Vec<(i64, String)> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (x, v) = line
            .split_once(',')
            .ok_or_else(|| roughmax::Error::Parse {
                pos: lineno + 1,
                msg: "expected x,value".into(),
            })?;
        match x.trim().parse::<i64>() {
            Ok(x) => rows.push((x, v.trim().to_string())),
            Err(_) if rows.is_empty() => continue,
            Err(e) => bail!(roughmax::Error::Parse {
                pos: lineno + 1,
                msg: e.to_string(),
            }),
        }
    }
    if rows.is_empty() {
        bail!(roughmax::Error::Degenerate("input has no rows".into()));
    }
    let lo = rows.iter().map(|r| r.0).min().unwrap();
    let hi = rows.iter().map(|r| r.0).max().unwrap();
    let len = usize::try_from(hi - lo + 1).ok().filter(|&l| l <= 1 << 26).ok_or(
        roughmax::Error::SizeOverflow {
            len: (hi - lo + 1) as usize,
            limit: 1 << 26,
        },
    )?;
    let exact: Option<Vec<(i64, BigRational)>> = rows
        .iter()
        .map(|(x, v)| cz::parse_rational(v).map(|r| (*x, r)))
        .collect();
    match (exact, cz::parse_rational(lambda)) {
        (Some(vals), Some(l)) => {
            let mut values = vec![BigRational::from_i64(0); len];
            for (x, v) in vals {
                values[(x - lo) as usize] = values[(x - lo) as usize].clone() + v;
            }
            Ok(CzInput::Exact(Samples::new(lo, values), l))
        }
        _ => {
            let mut values = vec![0.0; len];
            for (x, v) in &rows {
                let v: f64 = v.parse().map_err(|e: std::num::ParseFloatError| roughmax::Error::Parse {
                    pos: 0,
                    msg: format!("{v}: {e}"),
                })?;
                values[(x - lo) as usize] += v;
            }
            let l: f64 = lambda.parse().map_err(|e: std::num::ParseFloatError| roughmax::Error::Parse {
                pos: 0,
                msg: format!("lambda: {e}"),
            })?;
            Ok(CzInput::Float(Samples::new(lo, values), l))
        }
    }
}

fn cz_command(cli: &Cli, a: &CzArgs) -> Result<Table> {
    match read_cz_input(&a.input, &a.lambda)? {
        CzInput::Exact(f, l) => cz_table(cli, a, &f, &l, |v| Cell::Text(v.to_string())),
        CzInput::Float(f, l) => cz_table(cli, a, &f, &l, |v| Cell::Float(*v)),
    }
}

fn cz_table<T: Scalar>(
    cli: &Cli,
    a: &CzArgs,
    f: &Samples<T>,
    lambda: &T,
    cell: impl Fn(&T) -> Cell,
) -> Result<Table> {
    let cz = cz::cz_decompose(f, lambda)?;
    let inv = cz.check(f);
    let mut table = Table::new(&["s", "j", "start", "end", "l1", "mean"]);
    for atom in &cz.atoms {
        let (lo, hi) = atom.bounds();
        let l1 = atom.values.iter().fold(T::zero(), |acc, v| acc + v.abs_val());
        let mean = l1.clone() / T::from_i64(hi - lo);
        table.push(vec![atom.s.into(), atom.j.into(), lo.into(), hi.into(), cell(&l1), cell(&mean)]);
    }
    table.note("exact", T::EXACT);
    table.note("root_scale", cz.root_scale);
    table.note("total_measure", cz.total_measure());
    table.note("reconstruction", inv.reconstruction);
    table.note("disjoint", inv.disjoint);
    table.note("good_bounded", inv.good_bounded);
    table.note("atom_l1_bounded", inv.atom_l1_bounded);
    table.note("measure_bounded", inv.measure_bounded);
    if let Some(dir) = &a.emit_atoms {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let config = serde_json::to_value(cli)?;
        let write = |name: String, s: &Samples<T>| -> Result<()> {
            let mut t = Table::new(&["x", "value"]);
            for (k, v) in s.values.iter().enumerate() {
                if !v.is_zero() {
                    t.push(vec![(s.offset + k as i64).into(), cell(v)]);
                }
            }
            emit(&t.render(cli.format, "cz", &config), Some(&dir.join(name)))
        };
        write("good.csv".into(), &cz.good)?;
        for atom in &cz.atoms {
            write(format!("atom_s{}_j{}.csv", atom.s, atom.j), &atom.samples())?;
        }
    }
    Ok(table)
}

fn ergodic_sweep(g: GrowthFunction, a: &ErgodicArgs) -> Result<Table> {
    check_scales(a.sweep.lo, a.sweep.hi)?;
    let phi = InverseFunction::new(g);
    let sys = a.system.build()?;
    let f = a.f.values(sys.size());
    let mean = f.iter().sum::<f64>() / f.len() as f64;
    let top = (1i64 << a.sweep.hi).max(if a.windows > 0 { 1i64 << (2 * a.windows) } else { 0 });
    let set = SequenceSet::generate(&g, top)?;
    let averages = ergodic::WeightedAverages::new(&sys, &set, &phi, &f, a.x, top)?;
    let mut table = Table::new(&["k", "N", "count", "average", "weighted_average", "deviation"]);
    for k in a.sweep.ks() {
        let n = 1i64 << k;
        let avg = ergodic::ergodic_average(&sys, &set, &f, a.x, n)?;
        table.push(vec![
            k.into(),
            n.into(),
            set.count(n)?.into(),
            avg.into(),
            averages.at(n).into(),
            (avg - mean).abs().into(),
        ]);
    }
    table.note("system", sys.tag().to_string());
    table.note("space_mean", mean);
    if a.windows > 0 {
        let breakpoints: Vec<i64> = (0..=a.windows).map(|j| 1i64 << (2 * j)).collect();
        let rep = ergodic::oscillation_diagnostic(&sys, &set, &phi, &f, a.x, a.eps, &breakpoints)?;
        table.note("pointwise_oscillation_sum", rep.sum);
        table.note("pointwise_oscillation_mean", rep.mean());
    }
    Ok(table)
}

fn verify_family(g: GrowthFunction, a: &VerifyFamilyArgs) -> Result<Table> {
    check_scales(a.nlo, a.nhi)?;
    let phi = InverseFunction::new(g);
    let set = SequenceSet::generate(&g, 4i64 << a.nhi)?;
    let family = ScaleFamily::new(&set, &phi, a.nlo, a.nhi, a.norm.into())?;
    let report = maximal::verify_family_hypotheses(&family, &phi)?;
    let mut table = Table::new(&[
        "n",
        "d",
        "D",
        "phi_n",
        "f_zero",
        "f_zero_times_d",
        "residual_sup",
        "f_sup_ratio",
        "lipschitz_ratio",
    ]);
    for r in &report.rows {
        table.push(vec![
            r.n.into(),
            r.d.into(),
            r.d_big.into(),
            r.phi_n.into(),
            r.f_zero.into(),
            r.f_zero_times_d.into(),
            r.residual_sup.into(),
            r.f_sup_ratio.into(),
            r.lipschitz_ratio.into(),
        ]);
    }
    table.note("eps0", report.eps0);
    table.note("growth_ratio", report.growth_ratio);
    table.note("eps1", report.eps1);
    table.note("eps2", report.eps2);
    table.note("f_zero_spread", report.f_zero_spread());
    table.note("lipschitz_spread", report.lipschitz_spread());
    Ok(table)
}
