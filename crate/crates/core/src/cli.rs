//! `tefield` command-line front end.
//!
//! Exit codes: 0 when every check passes, 1 when a check fails, 2 on usage,
//! parse or I/O errors. `--config FILE` reads a TOML table whose keys are
//! flag names (top level or under a `[subcommand]` table); its values take
//! precedence over the command line.

use std::ffi::OsString;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::canonical::{
    canonical_delta_trace, check_kolmogorov_consistency, BlockBoundary, BoundaryGenerator,
    ConstantBoundary, DiagnoseOptions, FddModel, PeriodicBoundary, Schedule,
};
use crate::energy::{
    check_cocycle, check_field_consistency, check_onepoint_consistency, AssembledField,
    DependencyRadius, OnePointEnergyModel, TransitionEnergyFamily,
};
use crate::error::{Error, Result};
use crate::lattice::{
    check_budget, enumerate_configurations, Alphabet, BoundaryCondition, Configuration, Metric,
    Site, Symbol, Tail, Window,
};
use crate::models::{load_model, ModelSpec};
use crate::potential::{
    check_hamiltonian_consistency, check_onepoint_hamiltonian_consistency, FiniteRangePotential,
};
use crate::report::ConsistencyReport;
use crate::sampler::{run_chain_with, ChainOptions, Scan};
use crate::specification::{
    check_dobrushin_consistency, check_dobrushin_ratio_consistency, check_kernel_consistency,
    gibbs_distribution, onepoint_kernel, reconstruct_spec, EnergyKernels, ReconstructOptions,
    ReconstructedSpecification, SpecificationFamily,
};
use crate::uniqueness::{coefficient, UniquenessMethod};

#[derive(Parser, Debug)]
#[command(name = "tefield", version, about = "Transition energy fields on lattices")]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run the consistency battery on a model.
    Verify(VerifyArgs),
    /// Rebuild finite-volume distributions from one-point kernels.
    Reconstruct(ReconstructArgs),
    /// Dobrushin-type uniqueness coefficient.
    Uniqueness(UniquenessArgs),
    /// Increasing-volume log-ratio trace of a finite-dimensional model.
    Canonical(CanonicalArgs),
    /// Heat-bath sampling on a box with a constant boundary.
    Sample(SampleArgs),
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Model file (TOML or JSON).
    #[arg(long)]
    pub model: PathBuf,
    /// Output directory (or file, for `sample`); stdout if omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// TOML file whose keys override flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    /// Side length of the box used for the multi-site checks.
    #[arg(long, default_value_t = 2)]
    pub size: u32,
    /// Largest number of boundary configurations enumerated per check before
    /// switching to random probes.
    #[arg(long, default_value_t = 4096)]
    pub budget: u64,
    #[arg(long, default_value_t = 64)]
    pub probes: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct ReconstructArgs {
    #[command(flatten)]
    pub common: Common,
    /// Box shape such as `2x1`, anchored at the origin.
    #[arg(long, default_value = "2")]
    pub shape: String,
    /// Constant boundary symbol; the first symbol if omitted.
    #[arg(long)]
    pub boundary: Option<String>,
    /// Visiting order, a comma-separated permutation of site indices.
    #[arg(long)]
    pub order: Option<String>,
    /// Reconstruct under every visiting order and report the spread.
    #[arg(long)]
    pub all_orders: bool,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum MethodArg {
    Dobrushin,
    Delta,
}

#[derive(Args, Debug)]
pub struct UniquenessArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum, default_value_t = MethodArg::Dobrushin)]
    pub method: MethodArg,
    /// Truncation radius; the model's dependency radius if omitted.
    #[arg(long)]
    pub radius: Option<u32>,
    #[arg(long, default_value_t = crate::lattice::DEFAULT_ENUMERATION_BUDGET)]
    pub budget: u64,
}

#[derive(Args, Debug)]
pub struct CanonicalArgs {
    #[command(flatten)]
    pub common: Common,
    /// Site `t`, comma-separated coordinates.
    #[arg(long, default_value = "0")]
    pub site: String,
    /// The pair `x,u` of symbol labels.
    #[arg(long, default_value = "1,0")]
    pub pair: String,
    /// `const:SYM`, `period:K` or `blocks:BASE`.
    #[arg(long, default_value = "const:0")]
    pub boundary: String,
    /// `ball:A..B[:STEP]`, `ball:r1,r2,...`, `segment:A..B[:STEP]` or
    /// `segment:n1,n2,...`.
    #[arg(long, default_value = "ball:1..20")]
    pub schedule: String,
    #[arg(long, value_enum, default_value_t = MetricArg::Linf)]
    pub metric: MetricArg,
    #[arg(long, default_value_t = 5)]
    pub stability_window: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 50.0)]
    pub blowup: f64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum MetricArg {
    Linf,
    L1,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ScanArg {
    Systematic,
    Random,
}

#[derive(Args, Debug)]
pub struct SampleArgs {
    #[command(flatten)]
    pub common: Common,
    /// Side length of the sampled box.
    #[arg(long, default_value_t = 4)]
    pub size: u32,
    /// Constant boundary symbol; the first symbol if omitted.
    #[arg(long)]
    pub boundary: Option<String>,
    #[arg(long, default_value_t = 1000)]
    pub sweeps: u64,
    #[arg(long, default_value_t = 0)]
    pub burn_in: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = ScanArg::Systematic)]
    pub scan: ScanArg,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Verify(_) => "verify",
            Command::Reconstruct(_) => "reconstruct",
            Command::Uniqueness(_) => "uniqueness",
            Command::Canonical(_) => "canonical",
            Command::Sample(_) => "sample",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Verify(a) => &a.common,
            Command::Reconstruct(a) => &a.common,
            Command::Uniqueness(a) => &a.common,
            Command::Canonical(a) => &a.common,
            Command::Sample(a) => &a.common,
        }
    }
}

/// Outcome of a subcommand that ran to completion.
enum Outcome {
    Pass,
    Fail,
}

/// Parses `args` (including the program name), runs the subcommand and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let cli = match &cli.command.common().config {
        None => cli,
        Some(path) => {
            let extra = match config_args(path, cli.command.name()) {
                Ok(x) => x,
                Err(e) => {
                    eprintln!("error: {e}");
                    return 2;
                }
            };
            match Cli::try_parse_from(argv.iter().cloned().chain(extra)) {
                Ok(c) => c,
                Err(e) => {
                    let _ = e.print();
                    return 2;
                }
            }
        }
    };
    configure_threads();
    let result = match &cli.command {
        Command::Verify(a) => cmd_verify(a),
        Command::Reconstruct(a) => cmd_reconstruct(a),
        Command::Uniqueness(a) => cmd_uniqueness(a),
        Command::Canonical(a) => cmd_canonical(a),
        Command::Sample(a) => cmd_sample(a),
    };
    match result {
        Ok(Outcome::Pass) => 0,
        Ok(Outcome::Fail) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::InconsistentField { .. } | Error::CocycleViolation(_) => 1,
                _ => 2,
            }
        }
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var("TEFIELD_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|n| *n > 0)
    {
        // A second initialization in the same process is harmless to ignore.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

/// Turns `key = value` pairs of a config file into trailing `--key value`
/// arguments.
fn config_args(path: &Path, subcommand: &str) -> Result<Vec<OsString>> {
    let text = fs::read_to_string(path)?;
    let table: toml::Table = toml::from_str(&text).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        message: e.to_string().trim_end().to_string(),
    })?;
    let mut out = Vec::new();
    let mut push = |key: &str, value: &toml::Value| -> Result<()> {
        let flag = format!("--{}", key.replace('_', "-"));
        match value {
            toml::Value::Boolean(true) => out.push(flag.into()),
            toml::Value::Boolean(false) => {}
            toml::Value::String(s) => {
                out.push(flag.into());
                out.push(s.into());
            }
            toml::Value::Integer(i) => {
                out.push(flag.into());
                out.push(i.to_string().into());
            }
            toml::Value::Float(f) => {
                out.push(flag.into());
                out.push(f.to_string().into());
            }
            toml::Value::Array(items) => {
                let parts: Vec<String> = items
                    .iter()
                    .map(|v| match v {
                        toml::Value::String(s) => s.clone(),
                        other => other.to_string(),
                    })
                    .collect();
                out.push(flag.into());
                out.push(parts.join(",").into());
            }
            _ => {
                return Err(Error::validation(
                    key.to_string(),
                    "config values must be scalars or arrays",
                ))
            }
        }
        Ok(())
    };
    for (key, value) in &table {
        if !value.is_table() && key != "config" {
            push(key, value)?;
        }
    }
    if let Some(toml::Value::Table(sub)) = table.get(subcommand) {
        for (key, value) in sub {
            push(key, value)?;
        }
    }
    Ok(out)
}

fn write_json<T: Serialize>(out: Option<&Path>, file: &str, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            fs::write(dir.join(file), text)?;
        }
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn require_energy(spec: &ModelSpec) -> Result<&dyn OnePointEnergyModel> {
    spec.energy_model().ok_or_else(|| {
        Error::validation("kind", "this subcommand needs a lattice model, not an fdd model")
    })
}

fn parse_site(text: &str, dimension: usize) -> Result<Site> {
    let coords = text
        .split(',')
        .map(|c| c.trim().parse::<i64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|_| Error::validation("site", format!("expected integers, got {text:?}")))?;
    if coords.len() != dimension {
        return Err(Error::DimensionMismatch {
            expected: dimension,
            actual: coords.len(),
        });
    }
    Ok(Site::new(&coords))
}

/// `2x1` style box anchored at the origin; a single number is used for
/// every axis.
fn parse_shape(text: &str, dimension: usize) -> Result<Window> {
    let sides = text
        .split('x')
        .map(|c| c.trim().parse::<i64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|_| Error::validation("shape", format!("expected e.g. 2x1, got {text:?}")))?;
    let sides = if sides.len() == 1 { vec![sides[0]; dimension] } else { sides };
    if sides.len() != dimension {
        return Err(Error::DimensionMismatch {
            expected: dimension,
            actual: sides.len(),
        });
    }
    if sides.iter().any(|s| *s < 1) {
        return Err(Error::validation("shape", "sides must be positive"));
    }
    let hi: Vec<i64> = sides.iter().map(|s| s - 1).collect();
    Window::cuboid(&vec![0; dimension], &hi)
}

fn parse_symbol(alphabet: &Alphabet, label: Option<&str>) -> Result<Symbol> {
    match label {
        Some(l) => alphabet.symbol(l),
        None => Ok(0),
    }
}

fn parse_generator(text: &str, t: &Site, alphabet: &Alphabet) -> Result<Box<dyn BoundaryGenerator>> {
    let (kind, arg) = text
        .split_once(':')
        .ok_or_else(|| Error::validation("boundary", format!("expected KIND:ARG, got {text:?}")))?;
    let positive = |name: &str| -> Result<u64> {
        arg.parse::<u64>()
            .ok()
            .filter(|v| *v >= 1)
            .ok_or_else(|| Error::validation("boundary", format!("{name} must be a positive integer")))
    };
    Ok(match kind {
        "const" => Box::new(ConstantBoundary(alphabet.symbol(arg)?)),
        "period" => Box::new(PeriodicBoundary {
            period: positive("period")? as i64,
        }),
        "blocks" => Box::new(BlockBoundary {
            center: t.clone(),
            base: positive("base")?,
        }),
        other => {
            return Err(Error::validation(
                "boundary",
                format!("unknown generator {other:?}"),
            ))
        }
    })
}

/// `A..B[:STEP]` or a comma-separated list.
fn parse_range(text: &str) -> Result<Vec<i64>> {
    let bad = || Error::validation("schedule", format!("cannot read {text:?}"));
    if let Some((a, rest)) = text.split_once("..") {
        let (b, step) = match rest.split_once(':') {
            Some((b, s)) => (b, s.parse::<i64>().map_err(|_| bad())?),
            None => (rest, 1),
        };
        let a: i64 = a.parse().map_err(|_| bad())?;
        let b: i64 = b.parse().map_err(|_| bad())?;
        if step < 1 || b < a {
            return Err(bad());
        }
        Ok((a..=b).step_by(step as usize).collect())
    } else {
        text.split(',')
            .map(|v| v.trim().parse::<i64>().map_err(|_| bad()))
            .collect()
    }
}

fn parse_schedule(text: &str, metric: Metric) -> Result<Schedule> {
    let (kind, arg) = text
        .split_once(':')
        .ok_or_else(|| Error::validation("schedule", format!("expected KIND:RANGE, got {text:?}")))?;
    let values = parse_range(arg)?;
    match kind {
        "ball" => {
            if values.iter().any(|v| *v < 0) {
                return Err(Error::validation("schedule", "radii must be nonnegative"));
            }
            Ok(Schedule::Balls {
                radii: values.into_iter().map(|v| v as u64).collect(),
                metric,
            })
        }
        "segment" => Ok(Schedule::InitialSegments { lengths: values }),
        other => Err(Error::validation(
            "schedule",
            format!("unknown schedule {other:?}"),
        )),
    }
}

/// Boundaries to test: every configuration of `annulus` if there are at
/// most `budget`, otherwise `probes` seeded random ones.
fn boundary_configs(
    annulus: &Window,
    alphabet: &Alphabet,
    budget: u64,
    probes: usize,
    seed: u64,
) -> Result<(Vec<Configuration>, bool)> {
    use rand::{Rng, SeedableRng};
    match check_budget(annulus.len(), alphabet.size(), budget) {
        Ok(_) => Ok((enumerate_configurations(annulus, alphabet)?.collect(), false)),
        Err(Error::BudgetExceeded { .. }) => {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let k = alphabet.size() as Symbol;
            let out = (0..probes)
                .map(|_| Configuration::from_fn(annulus.clone(), |_| rng.gen_range(0..k)))
                .collect();
            Ok((out, true))
        }
        Err(e) => Err(e),
    }
}

/// Outcome of one named check in the `verify` battery.
#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub worst_violation: f64,
    pub tolerance: f64,
    pub cases: usize,
    /// True if boundaries were probed at random instead of enumerated.
    pub sampled: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<std::collections::BTreeMap<String, String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

struct Battery {
    tol: f64,
    checks: Vec<CheckResult>,
}

impl Battery {
    /// Runs one check over several cases and records the merged report. An
    /// `InconsistentField` or `CocycleViolation` error counts as a failure.
    fn run(
        &mut self,
        name: &str,
        sampled: bool,
        cases: impl IntoIterator<Item = Result<ConsistencyReport>>,
    ) -> Result<()> {
        let mut merged = ConsistencyReport::vacuous(self.tol);
        let mut n = 0;
        for r in cases {
            n += 1;
            match r {
                Ok(r) => merged = merged.merge(r),
                Err(e @ (Error::InconsistentField { .. } | Error::CocycleViolation(_))) => {
                    self.checks.push(CheckResult {
                        name: name.into(),
                        passed: false,
                        worst_violation: f64::INFINITY,
                        tolerance: self.tol,
                        cases: n,
                        sampled,
                        witness: None,
                        error: Some(e.to_string()),
                    });
                    return Ok(());
                }
                Err(e) => return Err(e),
            }
        }
        self.checks.push(CheckResult {
            name: name.into(),
            passed: merged.passed,
            worst_violation: merged.worst_violation,
            tolerance: merged.tolerance,
            cases: n,
            sampled,
            witness: merged.witness,
            error: None,
        });
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub model: String,
    pub passed: bool,
    pub checks: Vec<CheckResult>,
}

#[derive(Clone, Copy, Debug)]
pub struct VerifyOptions {
    pub tol: f64,
    /// Side length of the box used for the multi-site checks.
    pub size: u32,
    pub budget: u64,
    pub probes: usize,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            tol: 1e-9,
            size: 2,
            budget: 4096,
            probes: 64,
            seed: 0,
        }
    }
}

/// Runs the consistency battery behind `tefield verify`.
pub fn verify_model(spec: &ModelSpec, options: &VerifyOptions) -> Result<VerifyReport> {
    if options.tol.is_nan() || options.tol <= 0.0 {
        return Err(Error::validation("tol", "must be positive"));
    }
    let mut battery = Battery {
        tol: options.tol,
        checks: Vec::new(),
    };
    match (spec.energy_model(), spec.fdd()) {
        (Some(m), _) => verify_energy(&mut battery, m, spec.potential(), options)?,
        (None, Some(f)) => verify_fdd(&mut battery, f)?,
        (None, None) => unreachable!("every model kind builds one of the two"),
    }
    Ok(VerifyReport {
        model: spec.kind.as_str().to_string(),
        passed: battery.checks.iter().all(|c| c.passed),
        checks: battery.checks,
    })
}

fn cmd_verify(a: &VerifyArgs) -> Result<Outcome> {
    let spec = load_model(&a.common.model)?;
    let options = VerifyOptions {
        tol: a.tol,
        size: a.size,
        budget: a.budget,
        probes: a.probes,
        seed: a.seed,
    };
    let report = verify_model(&spec, &options)?;
    for c in &report.checks {
        eprintln!(
            "{} {} worst={:.3e} cases={}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.worst_violation,
            c.cases
        );
    }
    write_json(a.common.out.as_deref(), "verify.json", &report)?;
    Ok(if report.passed { Outcome::Pass } else { Outcome::Fail })
}

fn tail_for(m: &dyn OnePointEnergyModel) -> Tail {
    match m.dependency_radius() {
        DependencyRadius::Finite(_) => Tail::Free,
        DependencyRadius::Unbounded => Tail::Fixed(0),
    }
}

fn reach(m: &dyn OnePointEnergyModel) -> u64 {
    match m.dependency_radius() {
        DependencyRadius::Finite(r) => u64::from(r.max(1)),
        DependencyRadius::Unbounded => 2,
    }
}

/// Sites whose values the kernels at sites of `sites` may read.
fn joint_annulus(m: &dyn OnePointEnergyModel, sites: &Window) -> Window {
    let mut all = Vec::new();
    for t in sites.sites() {
        match m.dependency_window(t) {
            Some(w) => all.extend(w.sites().iter().filter(|s| !sites.contains(s)).cloned()),
            None => all.extend(
                Window::singleton(t.clone())
                    .neighbourhood(reach(m), Metric::Chebyshev)
                    .sites()
                    .iter()
                    .filter(|s| !sites.contains(s))
                    .cloned(),
            ),
        }
    }
    all.sort();
    all.dedup();
    Window::new(sites.dimension(), all).expect("deduplicated")
}

fn verify_energy(
    battery: &mut Battery,
    m: &dyn OnePointEnergyModel,
    potential: Option<&FiniteRangePotential>,
    a: &VerifyOptions,
) -> Result<()> {
    let alphabet = m.alphabet().clone();
    let tail = tail_for(m);
    let d = m.dimension();

    // Pairwise checks: every reference site against every site within twice
    // the dependency reach.
    let mut pairs = Vec::new();
    for t in m.reference_sites() {
        for s in Window::punctured_ball(&t, 2 * reach(m), Metric::Chebyshev).sites() {
            pairs.push((t.clone(), s.clone()));
        }
    }
    let mut pair_cases = Vec::new();
    let mut sampled = false;
    for (i, (t, s)) in pairs.iter().enumerate() {
        let both = Window::new(d, [t.clone(), s.clone()])?;
        let annulus = joint_annulus(m, &both);
        let (configs, sm) =
            boundary_configs(&annulus, &alphabet, a.budget, a.probes, a.seed ^ i as u64)?;
        sampled |= sm;
        for c in configs {
            pair_cases.push((t.clone(), s.clone(), BoundaryCondition::new(both.clone(), c, tail)?));
        }
    }
    battery.run(
        "onepoint_consistency",
        sampled,
        pair_cases
            .iter()
            .map(|(t, s, b)| check_onepoint_consistency(m, t, s, b, a.tol)),
    )?;
    let kernels = EnergyKernels(m);
    battery.run(
        "kernel_consistency",
        sampled,
        pair_cases
            .iter()
            .map(|(t, s, b)| check_kernel_consistency(&kernels, t, s, b, a.tol)),
    )?;
    if let Some(phi) = potential {
        battery.run(
            "onepoint_hamiltonian_consistency",
            sampled,
            pair_cases
                .iter()
                .map(|(t, s, b)| check_onepoint_hamiltonian_consistency(phi, t, s, b, a.tol)),
        )?;
    }

    // Multi-site checks on a box split into two halves, in both orders.
    let w = parse_shape(&a.size.to_string(), d)?;
    let half = w.len() / 2;
    let first = Window::new(d, w.sites()[..half].to_vec())?;
    let second = Window::new(d, w.sites()[half..].to_vec())?;
    let annulus = joint_annulus(m, &w);
    let (configs, sampled) = boundary_configs(&annulus, &alphabet, a.budget.min(256), a.probes.min(16), a.seed)?;
    let boundaries: Vec<BoundaryCondition> = configs
        .into_iter()
        .map(|c| BoundaryCondition::new(w.clone(), c, tail))
        .collect::<Result<_>>()?;
    let splits: Vec<(&Window, &Window)> = if first.is_empty() {
        vec![]
    } else {
        vec![(&first, &second), (&second, &first)]
    };

    let field = AssembledField(m);
    battery.run(
        "cocycle",
        sampled,
        boundaries
            .iter()
            .map(|b| check_cocycle(&field.table(&w, b)?, a.tol)),
    )?;
    let mut conditional = Vec::new();
    let mut additive = Vec::new();
    for b in &boundaries {
        for (v, i) in &splits {
            let r = check_field_consistency(&field, v, i, b, a.tol)?;
            conditional.push(Ok(r.conditional));
            additive.push(Ok(r.additive));
        }
    }
    battery.run("field_consistency_conditional", sampled, conditional)?;
    battery.run("field_consistency_additive", sampled, additive)?;

    let q = ReconstructedSpecification {
        model: m,
        options: ReconstructOptions {
            precheck: false,
            ..ReconstructOptions::default()
        },
    };
    let mut dcc = Vec::new();
    let mut ratio = Vec::new();
    for b in &boundaries {
        for (_, i) in &splits {
            dcc.push(check_dobrushin_consistency(&q, &w, i, b, a.tol));
            ratio.push(check_dobrushin_ratio_consistency(&q, &w, i, b, a.tol));
        }
    }
    battery.run("dobrushin_consistency", sampled, dcc)?;
    battery.run("dobrushin_ratio_consistency", sampled, ratio)?;

    if let Some(phi) = potential {
        let mut ham = Vec::new();
        let mut gibbs = Vec::new();
        for b in &boundaries {
            for (v, i) in &splits {
                ham.push(check_hamiltonian_consistency(phi, v, i, b, a.tol));
            }
            gibbs.push(gibbs_residual(m, phi, &w, b, a.tol));
        }
        battery.run("hamiltonian_consistency", sampled, ham)?;
        battery.run("reconstruction_vs_hamiltonian", sampled, gibbs)?;
    }
    Ok(())
}

fn gibbs_residual(
    m: &dyn OnePointEnergyModel,
    phi: &FiniteRangePotential,
    w: &Window,
    b: &BoundaryCondition,
    tol: f64,
) -> Result<ConsistencyReport> {
    let rebuilt = reconstruct_spec(m, w, b, &ReconstructOptions::default())?;
    let direct = phi.distribution(w, b)?;
    let tv = rebuilt.total_variation(&direct)?;
    Ok(ConsistencyReport {
        passed: tv <= tol,
        worst_violation: tv,
        tolerance: tol,
        witness: None,
    })
}

fn verify_fdd(battery: &mut Battery, f: &dyn FddModel) -> Result<()> {
    // Sites start at 1 so one-sided models are covered too.
    let windows: Vec<Window> = (1..=3).map(|n| Window::interval(1, n)).collect();
    let tol = battery.tol;
    battery.run(
        "kolmogorov_consistency",
        false,
        windows
            .iter()
            .map(|w| check_kolmogorov_consistency(f, w, tol)),
    )
}

#[derive(Serialize)]
struct ReconstructReport {
    window: Vec<Vec<i64>>,
    boundary: String,
    reference: &'static str,
    residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    kernel_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    order_spread: Option<f64>,
    passed: bool,
    table: crate::specification::ProbabilityTableJson,
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

fn cmd_reconstruct(a: &ReconstructArgs) -> Result<Outcome> {
    let spec = load_model(&a.common.model)?;
    let m = require_energy(&spec)?;
    let w = parse_shape(&a.shape, m.dimension())?;
    let sym = parse_symbol(m.alphabet(), a.boundary.as_deref())?;
    let b = BoundaryCondition::constant(w.clone(), sym);
    let order = match &a.order {
        None => None,
        Some(text) => Some(
            text.split(',')
                .map(|v| v.trim().parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| Error::validation("order", format!("cannot read {text:?}")))?,
        ),
    };
    let options = ReconstructOptions {
        order,
        tol: a.tol,
        ..ReconstructOptions::default()
    };
    let table = reconstruct_spec(m, &w, &b, &options)?;

    let (reference, direct) = match spec.potential() {
        Some(phi) => ("hamiltonian", phi.distribution(&w, &b)?),
        None => {
            let delta = AssembledField(m).table(&w, &b)?;
            (
                "assembled_energy",
                gibbs_distribution(&delta, &Configuration::constant(w.clone(), 0))?,
            )
        }
    };
    let residual = table.total_variation(&direct)?;
    let kernel_residual = if w.len() == 1 {
        let k = onepoint_kernel(m, &w.sites()[0], &b)?;
        Some(
            table
                .probs()
                .iter()
                .zip(&k.probs)
                .map(|(p, q)| (p - q).abs())
                .fold(0.0, f64::max),
        )
    } else {
        None
    };
    let order_spread = if a.all_orders {
        if w.len() > 7 {
            return Err(Error::validation("all-orders", "at most 7 sites"));
        }
        let mut spread = 0.0f64;
        for p in permutations(w.len()) {
            let o = ReconstructOptions {
                order: Some(p),
                precheck: false,
                ..ReconstructOptions::default()
            };
            let other = reconstruct_spec(m, &w, &b, &o)?;
            for (x, y) in other.probs().iter().zip(table.probs()) {
                spread = spread.max((x - y).abs());
            }
        }
        Some(spread)
    } else {
        None
    };
    let passed = residual <= a.tol
        && kernel_residual.is_none_or(|r| r <= a.tol)
        && order_spread.is_none_or(|r| r <= a.tol);
    write_json(
        a.common.out.as_deref(),
        "reconstruct.json",
        &ReconstructReport {
            window: w.to_coordinate_lists(),
            boundary: m.alphabet().label(sym).to_string(),
            reference,
            residual,
            kernel_residual,
            order_spread,
            passed,
            table: table.to_json(),
        },
    )?;
    Ok(if passed { Outcome::Pass } else { Outcome::Fail })
}

fn cmd_uniqueness(a: &UniquenessArgs) -> Result<Outcome> {
    let spec = load_model(&a.common.model)?;
    let m = require_energy(&spec)?;
    let radius = a.radius.unwrap_or(match m.dependency_radius() {
        DependencyRadius::Finite(r) => r,
        DependencyRadius::Unbounded => 2,
    });
    let method = match a.method {
        MethodArg::Dobrushin => UniquenessMethod::Dobrushin,
        MethodArg::Delta => UniquenessMethod::Delta,
    };
    let report = coefficient(m, radius, method, a.budget)?;
    write_json(a.common.out.as_deref(), "uniqueness.json", &report)?;
    Ok(Outcome::Pass)
}

#[derive(Serialize)]
struct CanonicalReport<'a> {
    model: &'a str,
    site: Vec<i64>,
    pair: [&'a str; 2],
    boundary: &'a str,
    schedule: &'a str,
    final_value: Option<f64>,
    verdict: crate::canonical::Verdict,
}

fn cmd_canonical(a: &CanonicalArgs) -> Result<Outcome> {
    let spec = load_model(&a.common.model)?;
    let f = spec.fdd().ok_or_else(|| {
        Error::validation("kind", "canonical traces need an fdd model")
    })?;
    let t = parse_site(&a.site, spec.dimension)?;
    let (xs, us) = a
        .pair
        .split_once(',')
        .ok_or_else(|| Error::validation("pair", "expected x,u"))?;
    let x = f.alphabet().symbol(xs.trim())?;
    let u = f.alphabet().symbol(us.trim())?;
    let generator = parse_generator(&a.boundary, &t, f.alphabet())?;
    let metric = match a.metric {
        MetricArg::Linf => Metric::Chebyshev,
        MetricArg::L1 => Metric::Manhattan,
    };
    let schedule = parse_schedule(&a.schedule, metric)?;
    let options = DiagnoseOptions {
        stability_window: a.stability_window,
        tol: a.tol,
        blowup: a.blowup,
    };
    let trace = canonical_delta_trace(f, &t, x, u, generator.as_ref(), &schedule, &options)?;
    let mut csv = String::from("n,size,value\n");
    for (n, (size, v)) in trace.sizes.iter().zip(&trace.values).enumerate() {
        csv.push_str(&format!("{},{},{}\n", n + 1, size, v));
    }
    let report = CanonicalReport {
        model: f.name(),
        site: t.coords().to_vec(),
        pair: [f.alphabet().label(x), f.alphabet().label(u)],
        boundary: &a.boundary,
        schedule: &a.schedule,
        final_value: trace.values.last().copied(),
        verdict: trace.verdict.clone(),
    };
    match a.common.out.as_deref() {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            fs::write(dir.join("trace.csv"), csv)?;
        }
        None => std::io::stdout().write_all(csv.as_bytes())?,
    }
    write_json(a.common.out.as_deref(), "verdict.json", &report)?;
    Ok(Outcome::Pass)
}

fn cmd_sample(a: &SampleArgs) -> Result<Outcome> {
    let spec = load_model(&a.common.model)?;
    let m = require_energy(&spec)?;
    let w = parse_shape(&a.size.to_string(), m.dimension())?;
    let sym = parse_symbol(m.alphabet(), a.boundary.as_deref())?;
    let b = BoundaryCondition::constant(w.clone(), sym);
    let scan = match a.scan {
        ScanArg::Systematic => Scan::Systematic,
        ScanArg::Random => Scan::Random,
    };
    let stats = run_chain_with(m, &w, &b, a.sweeps, a.burn_in, a.seed, ChainOptions { scan })?;
    match a.common.out.as_deref() {
        None => write_json(None, "", &stats)?,
        Some(path) => {
            let (stats_path, csv_path) = sample_paths(path);
            if let Some(parent) = stats_path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent)?;
            }
            let mut text = serde_json::to_string_pretty(&stats)?;
            text.push('\n');
            fs::write(&stats_path, text)?;
            fs::write(&csv_path, stats.magnetization_csv())?;
        }
    }
    Ok(Outcome::Pass)
}

/// A path ending in `.json` names the stats file, with the trace written
/// beside it as `<stem>.magnetization.csv`; anything else is a directory.
fn sample_paths(out: &Path) -> (PathBuf, PathBuf) {
    let is_file = out
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"))
        && !out.is_dir();
    if is_file {
        let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        (out.to_path_buf(), out.with_file_name(format!("{stem}.magnetization.csv")))
    } else {
        (out.join("stats.json"), out.join("magnetization.csv"))
    }
}
