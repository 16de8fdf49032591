//! Command-line experiments. Every output embeds the configuration that
//! produced it: a `"config"` key in JSON, a leading `# config:` line in CSV
//! and a bracket comment before Newick trees.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::coders::{sphere_comb_from_contour, tree_from_contour, ContourFunction};
use crate::error::{bail, Result};
use crate::intensity::{solve_w, BirthRate, IntensityModel, Lifetime, PopulationModel, WModelSpec};
use crate::mutation::{clades, clonal_set, scatter_mutations, MutationMeasure};
use crate::samplers::{
    padic_comb, reduce_population_tree, replicate, sample_cpp, sample_splitting_tree, KingmanSampler, RandomSource,
};
use crate::spectrum::{normalized_spectrum, KingmanSample, SpectrumQuery, TailModel};
use crate::{comb_to_tree, Comb, Error};

/// Splitting trees are resampled at most this many times to get a survivor.
const SPLITTING_RETRIES: usize = 10_000;
const DEFAULT_W_STEPS: usize = 10_000;

#[derive(Debug, Parser)]
#[command(name = "ultracomb", version, about = "Combs, coalescent point processes and allele spectra")]
pub struct Cli {
    /// Worker threads for replicate loops (results do not depend on it).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: ExperimentConfig,
}

/// One experiment; serialized verbatim into the output header.
#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(tag = "subcommand", rename_all = "kebab-case")]
pub enum ExperimentConfig {
    /// Sample combs.
    Sample(SampleArgs),
    /// Scatter neutral mutations on a comb.
    Mutate(MutateArgs),
    /// Sample or population allele frequency spectra.
    Spectrum(SpectrumArgs),
    /// Solve for W(t) and the CPP intensity tail 1/W.
    SolveW(SolveWArgs),
    /// Convert a jumping contour to a Newick tree or a sphere comb.
    Treecode(TreecodeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SampleModel {
    Kingman,
    CppBrownian,
    CppCriticalBd,
    #[value(name = "cpp-from-W")]
    #[serde(rename = "cpp-from-W")]
    CppFromW,
    Padic,
    Splitting,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Json,
    Csv,
    Newick,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SampleArgs {
    #[arg(long, value_enum)]
    pub model: SampleModel,
    /// CPP height or splitting-tree horizon.
    #[arg(long = "T")]
    #[serde(rename = "T", skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    /// Teeth below this height are dropped.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    /// Number of Kingman teeth.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth: Option<u32>,
    /// Brownian intensity constant, ν̄(x) = c/x (default 1/2, the law of
    /// excursion depths).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    /// Birth rate.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    /// Death rate (exponential lifetimes).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lifetime: Option<Lifetime>,
    /// Population model file (JSON) for cpp-from-W and splitting.
    #[arg(long = "model-spec")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model_spec: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    pub reps: usize,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MutateArgs {
    /// Comb JSON, either bare or as written by `sample`.
    #[arg(long)]
    pub comb: PathBuf,
    /// Which comb of a multi-comb file.
    #[arg(long, default_value_t = 0)]
    pub index: usize,
    /// Mutation rate per unit depth.
    #[arg(long)]
    pub theta: f64,
    #[arg(long)]
    pub include_origin: bool,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpectrumMode {
    Sample,
    Population,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpectrumModel {
    Kingman,
    CriticalBd,
    Brownian,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SpectrumArgs {
    #[arg(long, value_enum)]
    pub mode: SpectrumMode,
    #[arg(long, value_enum, default_value = "kingman")]
    pub model: SpectrumModel,
    /// Ewens parameter in sample mode, mutation rate per unit depth in
    /// population mode.
    #[arg(long)]
    pub theta: f64,
    /// Sample size.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[arg(long = "T")]
    #[serde(rename = "T", skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    /// Thresholds q (population mode).
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub q: Vec<f64>,
    /// Count alleles of size exactly q instead of at least q (critical-bd).
    #[arg(long)]
    pub exact: bool,
    #[arg(long)]
    pub reps: usize,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum WModel {
    Yule,
    BirthDeath,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SolveWArgs {
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<WModel>,
    /// Model file; replaces --model and the rate flags.
    #[arg(long = "model-spec", conflicts_with = "model")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model_spec: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lifetime: Option<Lifetime>,
    #[arg(long = "T")]
    #[serde(rename = "T", skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TreecodeArgs {
    /// Contour JSON: [{"time", "before", "after"}, ...].
    #[arg(long)]
    pub contour: PathBuf,
    #[arg(long, value_enum, default_value = "newick")]
    pub format: Format,
    /// Sphere level for comb output.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub level: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

/// Process exit code for an error: 2 for invalid input, 3 for numerical or
/// resource failures, 4 for I/O.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Domain(_) | Error::Validation(_) | Error::Json(_) => 2,
        Error::Numeric(_) | Error::Resource(_) => 3,
        Error::Io(_) => 4,
    }
}

/// Parses arguments, runs the experiment and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            eprintln!("error: validation error: --jobs must be positive");
            return 2;
        }
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    match run(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn run(cfg: &ExperimentConfig) -> Result<()> {
    let header = serde_json::to_value(cfg)?;
    match cfg {
        ExperimentConfig::Sample(a) => run_sample(a, header),
        ExperimentConfig::Mutate(a) => run_mutate(a, header),
        ExperimentConfig::Spectrum(a) => run_spectrum(a, header),
        ExperimentConfig::SolveW(a) => run_solve_w(a, header),
        ExperimentConfig::Treecode(a) => run_treecode(a, header),
    }
}

fn require_seed(seed: Option<u64>) -> Result<u64> {
    match seed {
        Some(s) => Ok(s),
        None => bail!(Validation, "--seed is required for stochastic runs"),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn emit_json(out: Option<&Path>, header: Value, key: &str, payload: Value) -> Result<()> {
    let mut obj = serde_json::Map::new();
    obj.insert("config".into(), header);
    obj.insert(key.into(), payload);
    let mut text = serde_json::to_string_pretty(&Value::Object(obj))?;
    text.push('\n');
    emit(out, &text)
}

fn csv_header(header: &Value) -> String {
    format!("# config: {header}\n")
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Reads a bare comb, `{"comb": ...}` or `{"combs": [...]}`.
pub fn load_comb(path: &Path, index: usize) -> Result<Comb> {
    let v: Value = read_json(path)?;
    let raw = if let Some(list) = v.get("combs") {
        match list.get(index) {
            Some(c) => c.clone(),
            None => bail!(Validation, "comb index {index} out of range in {}", path.display()),
        }
    } else if let Some(c) = v.get("comb") {
        c.clone()
    } else {
        v
    };
    Ok(serde_json::from_value(raw)?)
}

fn population_model(b: Option<f64>, d: Option<f64>, lifetime: Option<Lifetime>) -> Result<PopulationModel> {
    let b = b.unwrap_or(1.0);
    let lifetime = match (d, lifetime) {
        (Some(_), Some(_)) => bail!(Validation, "give either --d or --lifetime, not both"),
        (Some(d), None) if d > 0.0 => Lifetime::Exponential(d),
        (Some(0.0), None) | (None, None) => Lifetime::Immortal,
        (Some(d), None) => bail!(Domain, "death rate must be nonnegative, got {d}"),
        (None, Some(l)) => l,
    };
    Ok(PopulationModel { birth_rate: BirthRate::Constant(b), lifetime })
}

fn model_and_horizon(a: &SampleArgs) -> Result<(PopulationModel, f64, usize)> {
    if let Some(path) = &a.model_spec {
        let spec: WModelSpec = read_json(path)?;
        let t = a.horizon.unwrap_or(spec.horizon);
        return Ok((spec.model, t, a.steps.unwrap_or(spec.steps)));
    }
    let Some(t) = a.horizon else { bail!(Validation, "--T is required for the {:?} model", a.model) };
    Ok((population_model(a.b, a.d, a.lifetime)?, t, a.steps.unwrap_or(DEFAULT_W_STEPS)))
}

fn sample_one(a: &SampleArgs, nu: Option<&IntensityModel>, pop: Option<&PopulationModel>, rng: &mut RandomSource) -> Result<Comb> {
    match a.model {
        SampleModel::Kingman => {
            let n = a.n.unwrap_or(1);
            Ok(KingmanSampler::new(n)?.sample(rng))
        }
        SampleModel::CppBrownian | SampleModel::CppCriticalBd | SampleModel::CppFromW => {
            let nu = nu.expect("intensity prepared");
            let t = a.horizon.expect("checked");
            Ok(sample_cpp(nu, t, a.eps.unwrap_or(0.0), rng)?.comb)
        }
        SampleModel::Splitting => {
            let (pop, t) = (pop.expect("model prepared"), a.horizon.expect("checked"));
            reduce_population_tree(&sample_splitting_tree(pop, t, SPLITTING_RETRIES, rng)?)
        }
        SampleModel::Padic => unreachable!("deterministic"),
    }
}

fn run_sample(a: &SampleArgs, mut header: Value) -> Result<()> {
    if a.reps == 0 {
        bail!(Validation, "--reps must be positive");
    }
    if a.format == Format::Csv {
        bail!(Validation, "sample writes json or newick");
    }
    let combs: Vec<Comb> = if a.model == SampleModel::Padic {
        let (Some(p), Some(depth)) = (a.p, a.depth) else {
            bail!(Validation, "padic needs --p and --depth");
        };
        vec![padic_comb(p, depth)?; a.reps]
    } else {
        let seed = require_seed(a.seed)?;
        let mut nu = None;
        let mut pop = None;
        match a.model {
            SampleModel::CppBrownian => nu = Some(IntensityModel::brownian(a.c.unwrap_or(0.5))?),
            SampleModel::CppCriticalBd => nu = Some(IntensityModel::critical_birth_death(a.b.unwrap_or(1.0))?),
            SampleModel::CppFromW => {
                let (m, t, steps) = model_and_horizon(a)?;
                nu = Some(IntensityModel::FromW(solve_w(&m, t, steps)?));
                header["T"] = json!(t);
            }
            SampleModel::Splitting => {
                let (m, t, _) = model_and_horizon(a)?;
                pop = Some(m);
                header["T"] = json!(t);
            }
            _ => {}
        }
        let horizon = header.get("T").and_then(Value::as_f64);
        let args = SampleArgs { horizon, ..a.clone() };
        if matches!(a.model, SampleModel::CppBrownian | SampleModel::CppCriticalBd) && horizon.is_none() {
            bail!(Validation, "--T is required for the CPP models");
        }
        replicate(seed, a.reps, |rng| sample_one(&args, nu.as_ref(), pop.as_ref(), rng))
            .into_iter()
            .collect::<Result<_>>()?
    };
    match a.format {
        Format::Newick => {
            let mut text = format!("[config: {header}]\n");
            for c in &combs {
                text.push_str(&comb_to_tree(c).to_newick());
                text.push('\n');
            }
            emit(a.out.as_deref(), &text)
        }
        _ => emit_json(a.out.as_deref(), header, "combs", serde_json::to_value(&combs)?),
    }
}

fn run_mutate(a: &MutateArgs, header: Value) -> Result<()> {
    let seed = require_seed(a.seed)?;
    let c = load_comb(&a.comb, a.index)?;
    if !(a.theta >= 0.0 && a.theta.is_finite()) {
        bail!(Domain, "θ must be nonnegative, got {}", a.theta);
    }
    let ms = scatter_mutations(&c, &MutationMeasure::uniform(a.theta), a.include_origin, &mut RandomSource::new(seed))?;
    let cl: Vec<Value> = clades(&c, &ms)
        .iter()
        .map(|k| json!({"mutation": k.mutation, "start": k.start, "end": k.end}))
        .collect();
    let payload = json!({
        "mutations": ms,
        "clades": cl,
        "clonal_set": clonal_set(&c, &ms).intervals,
    });
    let mut obj = serde_json::Map::new();
    obj.insert("config".into(), header);
    if let Value::Object(m) = payload {
        obj.extend(m);
    }
    let mut text = serde_json::to_string_pretty(&Value::Object(obj))?;
    text.push('\n');
    emit(a.out.as_deref(), &text)
}

fn run_spectrum(a: &SpectrumArgs, header: Value) -> Result<()> {
    let seed = require_seed(a.seed)?;
    let mut text = csv_header(&header);
    match a.mode {
        SpectrumMode::Sample => {
            if a.model != SpectrumModel::Kingman {
                bail!(Validation, "sample mode supports the kingman model only");
            }
            let Some(n) = a.n else { bail!(Validation, "--n is required in sample mode") };
            if a.reps == 0 {
                bail!(Validation, "--reps must be positive");
            }
            let ks = KingmanSample::new(n, a.theta)?;
            let totals = replicate(seed, a.reps, |rng| ks.spectrum(rng))
                .into_iter()
                .fold(vec![0usize; n], |mut acc, s| {
                    for (k, slot) in acc.iter_mut().enumerate() {
                        *slot += s.count(k + 1);
                    }
                    acc
                });
            text.push_str("k,count,mean\n");
            for (k, &t) in totals.iter().enumerate() {
                text.push_str(&format!("{},{},{}\n", k + 1, t, t as f64 / a.reps as f64));
            }
        }
        SpectrumMode::Population => {
            let model = match a.model {
                SpectrumModel::CriticalBd => TailModel::CriticalBirthDeath,
                SpectrumModel::Brownian => TailModel::Brownian { eps: a.eps.unwrap_or(1e-3) },
                SpectrumModel::Kingman => bail!(Validation, "population mode supports critical-bd and brownian"),
            };
            if a.exact && a.model != SpectrumModel::CriticalBd {
                bail!(Validation, "--exact applies to the critical-bd counting model");
            }
            let queries: Vec<SpectrumQuery> = a
                .q
                .iter()
                .map(|&q| {
                    if a.exact {
                        if q < 1.0 || q.fract() != 0.0 {
                            bail!(Validation, "exact sizes must be positive integers, got {q}");
                        }
                        Ok(SpectrumQuery::Exactly(q as usize))
                    } else {
                        Ok(SpectrumQuery::Tail(q))
                    }
                })
                .collect::<Result<_>>()?;
            let t = a.horizon.unwrap_or(50.0);
            let est = normalized_spectrum(model, a.theta, t, &queries, a.reps, seed)?;
            text.push_str("q,estimate,stderr,target\n");
            for e in est {
                text.push_str(&format!("{},{},{},{}\n", e.q, e.estimate, e.stderr, e.target));
            }
        }
    }
    emit(a.out.as_deref(), &text)
}

fn run_solve_w(a: &SolveWArgs, header: Value) -> Result<()> {
    let (m, t, steps) = if let Some(path) = &a.model_spec {
        let spec: WModelSpec = read_json(path)?;
        (spec.model, a.horizon.unwrap_or(spec.horizon), a.steps.unwrap_or(spec.steps))
    } else {
        let Some(t) = a.horizon else { bail!(Validation, "--T is required") };
        let m = match a.model {
            Some(WModel::Yule) => {
                if a.d.is_some() || a.lifetime.is_some() {
                    bail!(Validation, "the yule model takes only --b");
                }
                PopulationModel::yule(a.b.unwrap_or(1.0))
            }
            Some(WModel::BirthDeath) => population_model(a.b, a.d, a.lifetime)?,
            None => bail!(Validation, "give --model or --model-spec"),
        };
        (m, t, a.steps.unwrap_or(DEFAULT_W_STEPS))
    };
    let grid = solve_w(&m, t, steps)?;
    let mut buf = csv_header(&header).into_bytes();
    grid.write_csv(&mut buf)?;
    emit(a.out.as_deref(), &String::from_utf8(buf).expect("utf-8 CSV"))
}

fn run_treecode(a: &TreecodeArgs, header: Value) -> Result<()> {
    let h: ContourFunction = read_json(&a.contour)?;
    match a.format {
        Format::Newick => {
            let text = format!("[config: {header}]\n{}\n", tree_from_contour(&h).tree().to_newick());
            emit(a.out.as_deref(), &text)
        }
        Format::Json => {
            let Some(level) = a.level else { bail!(Validation, "comb output needs --level") };
            let c = sphere_comb_from_contour(&h, level)?;
            emit_json(a.out.as_deref(), header, "combs", serde_json::to_value([c])?)
        }
        Format::Csv => bail!(Validation, "treecode writes newick or json"),
    }
}
