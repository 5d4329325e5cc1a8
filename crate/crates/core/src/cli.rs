//! Command line runner. Every command prints (or writes to `--out`) a JSON
//! envelope `{"config_hash", "results", "runtime_ms"}`; `--format csv` emits
//! the command's series instead. Errors go to stderr as JSON with the exit
//! code of [`Error::exit_code`].

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::katok_map::{build_katok_map, finite_lyapunov, frequency_check, pesin_block_check, KatokMap};
use crate::saturation::{self, ApproxConfig, Assembly, Catalog, LevelSpec, PoolConfig, Schedule, SegmentPool};
use crate::sft::{self, MarkovMeasure, TransitionMatrix};
use crate::shadowing::{linear_shadow, newton_shadow, random_pseudo_orbit, shadowing_constant, NEWTON_TOL};
use crate::toral::{self, golden_partition, Itinerary, MarkovPartition, PartitionData, ToralAutomorphism, ValidationConfig};
use crate::weakstar::{build_test_family, MeasureHandle, Space, DEFAULT_IMAX};

#[derive(Debug, Parser)]
#[command(name = "ergolab", version, about = "Seeded experiments on SFTs, toral codings, shadowing, saturated sets and the Katok map")]
pub struct Cli {
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (results do not depend on it).
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, alias = "emit", global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Units for entropies and entropy bounds.
    #[arg(long, global = true, value_enum, default_value_t = Units::Nats)]
    pub units: Units,
    /// Report runtime_ms as 0 so reruns are byte-identical.
    #[arg(long, global = true)]
    pub no_timing: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    Nats,
    Bits,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand, Serialize)]
pub enum Command {
    /// Perron data, Parry measure and entropy of a transition matrix.
    #[command(subcommand)]
    Sft(SftCmd),
    /// Markov partitions and symbolic coding of toral automorphisms.
    #[command(subcommand)]
    Toral(ToralCmd),
    /// Shadow random pseudo-orbits of a toral automorphism.
    Shadow(ShadowArgs),
    /// Saturated-set constructions on a subshift of finite type.
    #[command(subcommand)]
    Saturate(SaturateCmd),
    /// The slowed-down automorphism near its fixed point.
    #[command(subcommand)]
    Katokmap(KatokCmd),
}

#[derive(Debug, Args, Serialize)]
pub struct MatrixSource {
    /// JSON file with {"size", "rows"}.
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    /// Full shift on this many symbols.
    #[arg(long, conflicts_with = "matrix")]
    pub full: Option<usize>,
}

#[derive(Debug, Subcommand, Serialize)]
pub enum SftCmd {
    #[command(alias = "eigendata")]
    Eigen(MatrixSource),
    Parry(MatrixSource),
    /// Entropy rate of a Markov measure (the Parry measure by default).
    Entropy {
        #[command(flatten)]
        src: MatrixSource,
        /// Row-stochastic matrix as JSON rows.
        #[arg(long)]
        rows: Option<String>,
    },
    Mixing(MatrixSource),
}

#[derive(Debug, Args, Serialize)]
pub struct PartitionSource {
    /// Partition JSON; the shipped golden-mean partition when omitted.
    #[arg(long)]
    pub partition: Option<PathBuf>,
}

#[derive(Debug, Subcommand, Serialize)]
pub enum ToralCmd {
    #[command(name = "validate-partition", alias = "validate")]
    ValidatePartition {
        /// Partition JSON; the shipped golden-mean partition when omitted.
        file: Option<PathBuf>,
    },
    Encode {
        #[command(flatten)]
        src: PartitionSource,
        #[arg(long, num_args = 2, allow_negative_numbers = true)]
        point: Vec<f64>,
        #[arg(long, default_value_t = 20)]
        window: i64,
    },
    Decode {
        #[command(flatten)]
        src: PartitionSource,
        /// Comma-separated symbols.
        #[arg(long)]
        word: String,
        /// Index of the time-0 symbol.
        #[arg(long, default_value_t = 0)]
        zero: usize,
    },
    /// decode then encode random admissible words.
    Roundtrip {
        #[command(flatten)]
        src: PartitionSource,
        #[arg(long, default_value_t = 1000)]
        count: usize,
        #[arg(long, default_value_t = 20)]
        window: usize,
    },
}

#[derive(Debug, Args, Serialize)]
pub struct ShadowArgs {
    /// Integer matrix entries a b c d.
    #[arg(long, num_args = 4, default_values_t = [2, 1, 1, 1], allow_negative_numbers = true)]
    pub matrix: Vec<i64>,
    #[arg(long, default_value_t = 200)]
    pub length: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub delta: f64,
    #[arg(long, default_value_t = 1)]
    pub count: usize,
}

#[derive(Debug, Subcommand, Serialize)]
pub enum SaturateCmd {
    /// Rational approximations and the quasi-orbit schedule.
    Schedule {
        #[arg(long)]
        config: PathBuf,
    },
    /// Schedule, pools, assembly, decode, tracking and certificate.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Also write the assembled word (comma-separated) here.
        #[arg(long)]
        word_out: Option<PathBuf>,
    },
    /// Pools and symbolic assembly only.
    Assemble {
        #[arg(long)]
        config: PathBuf,
        /// Also write the assembled word (comma-separated) here.
        #[arg(long)]
        word_out: Option<PathBuf>,
    },
    /// Tracking checkpoints of a given word against a schedule.
    Track {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        schedule: PathBuf,
        #[arg(long)]
        word: PathBuf,
    },
    /// Entropy lower bounds for a schedule.
    Certificate {
        #[arg(long)]
        schedule: PathBuf,
        /// Comma-separated entropies of the catalog measures.
        #[arg(long)]
        entropies: String,
    },
    /// Bowen-ball cover estimate for a Parry or given Markov measure.
    #[command(alias = "katok-entropy-estimate")]
    KatokEntropy {
        #[command(flatten)]
        src: MatrixSource,
        /// Row-stochastic matrix as JSON rows; Parry measure when omitted.
        #[arg(long)]
        rows: Option<String>,
        #[arg(long, default_value_t = 12)]
        n: usize,
        #[arg(long, default_value_t = 1.0)]
        eps: f64,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
    },
}

#[derive(Debug, Args, Serialize)]
pub struct MapParams {
    /// JSON {"matrix", "r0", "r1", "alpha"}; cat map with r0 = 0.05, r1 = 0.15, α = 1/2 when omitted.
    #[arg(long)]
    pub map: Option<PathBuf>,
    /// Use the unperturbed automorphism instead.
    #[arg(long)]
    pub linear: bool,
}

#[derive(Debug, Subcommand, Serialize)]
pub enum KatokCmd {
    Orbit {
        #[command(flatten)]
        params: MapParams,
        #[arg(long, num_args = 2)]
        x: Vec<f64>,
        #[arg(long = "T", default_value_t = 100)]
        steps: usize,
    },
    Lyapunov {
        #[command(flatten)]
        params: MapParams,
        #[arg(long, num_args = 2)]
        x: Vec<f64>,
        #[arg(long = "T", default_value_t = 100)]
        steps: usize,
    },
    /// Block index of given or random points.
    PesinCheck {
        #[command(flatten)]
        params: MapParams,
        #[arg(long, num_args = 2)]
        x: Option<Vec<f64>>,
        /// Number of random points when --x is absent.
        #[arg(long, default_value_t = 10)]
        points: usize,
        #[arg(long = "T", default_value_t = 20)]
        window: usize,
        #[arg(long)]
        beta1: Option<f64>,
        #[arg(long)]
        beta2: Option<f64>,
        #[arg(long, default_value_t = 0.01)]
        eps: f64,
        #[arg(long, default_value_t = 40)]
        margin: usize,
    },
    /// Γ_N(i, γ) membership of Parry-typical golden-mean itineraries.
    Frequency {
        #[arg(long, default_value_t = 1)]
        region: usize,
        #[arg(long, default_value_t = 0.05)]
        gamma: f64,
        #[arg(long, default_value_t = 50)]
        max_n: u64,
        #[arg(long, default_value_t = 10_000)]
        window: usize,
        #[arg(long, default_value_t = 10)]
        count: usize,
    },
}

/// Parameters for `saturate schedule|run|track`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SaturationConfig {
    pub matrix: TransitionMatrix,
    /// Candidate ergodic measures: "parry" or row-stochastic rows.
    pub measures: Vec<MeasureSpec>,
    /// Weights of the target μ on the candidates.
    pub target: Vec<f64>,
    pub depth: u64,
    #[serde(default = "one")]
    pub first_level: u64,
    pub segment_len: Vec<u64>,
    /// Approximation distance to reach at every level instead of 1/k.
    #[serde(default)]
    pub goal: Option<f64>,
    #[serde(default = "default_max_den")]
    pub max_den: i64,
    #[serde(default = "default_pool")]
    pub pool_size: usize,
    #[serde(default = "default_imax")]
    pub imax: usize,
    /// s(m_a, m_b); the minimal feasible uniform length when omitted.
    #[serde(default)]
    pub bridges: Option<Vec<Vec<u64>>>,
}

fn one() -> u64 {
    1
}
fn default_max_den() -> i64 {
    16
}
fn default_pool() -> usize {
    32
}
fn default_imax() -> usize {
    DEFAULT_IMAX
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MeasureSpec {
    Named(String),
    Rows(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MapConfig {
    matrix: [[i64; 2]; 2],
    r0: f64,
    r1: f64,
    alpha: f64,
}

/// Output of one command: the JSON results and, optionally, a CSV series.
struct Outcome {
    results: Value,
    csv: Option<String>,
}

struct Ctx {
    seed: u64,
    inputs: BTreeMap<String, String>,
}

impl Ctx {
    fn read(&mut self, p: &PathBuf) -> Result<String> {
        let s = std::fs::read_to_string(p).map_err(|e| Error::Invalid(format!("{}: {e}", p.display())))?;
        self.inputs.insert(p.display().to_string(), hex::encode(Sha256::digest(s.as_bytes())));
        Ok(s)
    }

    fn json<T: for<'de> Deserialize<'de>>(&mut self, p: &PathBuf) -> Result<T> {
        let s = self.read(p)?;
        serde_json::from_str(&s).map_err(|e| Error::Invalid(format!("{}: {e}", p.display())))
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable")
}

fn matrix_from(ctx: &mut Ctx, src: &MatrixSource) -> Result<TransitionMatrix> {
    match (&src.matrix, src.full) {
        (Some(p), _) => ctx.json(p),
        (None, Some(l)) if l >= 1 => Ok(TransitionMatrix::full_shift(l)),
        (None, Some(_)) => Err(Error::BadMatrix),
        (None, None) => Ok(TransitionMatrix::golden_mean()),
    }
}

fn partition_from(ctx: &mut Ctx, src: &PartitionSource) -> Result<MarkovPartition> {
    match &src.partition {
        Some(p) => {
            let data: PartitionData = ctx.json(p)?;
            toral::load_partition(&data, &ValidationConfig { seed: ctx.seed, ..ValidationConfig::default() })
        }
        None => Ok(golden_partition()),
    }
}

fn run_sft(ctx: &mut Ctx, cmd: &SftCmd) -> Result<Outcome> {
    let results = match cmd {
        SftCmd::Eigen(src) => {
            let b = matrix_from(ctx, src)?;
            to_value(&sft::perron_eigendata(&b)?)
        }
        SftCmd::Parry(src) => {
            let b = matrix_from(ctx, src)?;
            let pd = sft::perron_eigendata(&b)?;
            let m = sft::parry_measure(&b)?;
            json!({
                "lambda": pd.lambda,
                "log_lambda": pd.lambda.ln(),
                "p": m.p,
                "P": m.transition,
                "entropy": sft::markov_entropy(&m),
                "stationarity_defect": sft::stationarity_defect(&m),
            })
        }
        SftCmd::Entropy { src, rows } => {
            let b = matrix_from(ctx, src)?;
            let m = measure_from_rows(&b, rows.as_deref())?;
            json!({ "entropy": sft::markov_entropy(&m), "log_lambda": sft::perron_eigendata(&b)?.lambda.ln() })
        }
        SftCmd::Mixing(src) => {
            let b = matrix_from(ctx, src)?;
            let r = sft::validate_transition_matrix(&b);
            let l0 = sft::max_connecting_length(&b).ok();
            json!({ "report": r.as_ref().ok().map(to_value), "error": r.err().map(|e| e.to_string()), "max_connecting_length": l0 })
        }
    };
    Ok(Outcome { results, csv: None })
}

fn measure_from_rows(b: &TransitionMatrix, rows: Option<&str>) -> Result<MarkovMeasure> {
    match rows {
        Some(r) => {
            let rows: Vec<Vec<f64>> = serde_json::from_str(r).map_err(|e| Error::Invalid(e.to_string()))?;
            saturation::markov_from_rows(rows, b)
        }
        None => sft::parry_measure(b),
    }
}

fn parse_word(s: &str) -> Result<Vec<usize>> {
    s.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<usize>().map_err(|_| Error::Invalid(format!("bad symbol {t:?}"))))
        .collect()
}

fn run_toral(ctx: &mut Ctx, cmd: &ToralCmd) -> Result<Outcome> {
    match cmd {
        ToralCmd::ValidatePartition { file } => {
            let p = partition_from(ctx, &PartitionSource { partition: file.clone() })?;
            Ok(Outcome {
                results: json!({
                    "size": p.size(),
                    "transitions": p.transitions,
                    "s_max": p.s_max(),
                    "u_max": p.u_max(),
                    "lambda_u": p.map.lambda_u,
                    "warnings": p.warnings,
                }),
                csv: None,
            })
        }
        ToralCmd::Encode { src, point, window } => {
            let p = partition_from(ctx, src)?;
            let w = toral::encode(&p, [point[0], point[1]], -window, *window, toral::DEFAULT_MARGIN)?;
            Ok(Outcome { results: to_value(&w), csv: None })
        }
        ToralCmd::Decode { src, word, zero } => {
            let p = partition_from(ctx, src)?;
            let w = parse_word(word)?;
            if *zero >= w.len() {
                return Err(Error::Invalid("time-0 index outside the word".into()));
            }
            Ok(Outcome { results: to_value(&toral::decode(&p, &Itinerary::new(w, *zero))?), csv: None })
        }
        ToralCmd::Roundtrip { src, count, window } => {
            let p = partition_from(ctx, src)?;
            let r = roundtrip(&p, *count, *window, ctx.seed)?;
            Ok(Outcome { results: to_value(&r), csv: None })
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RoundtripReport {
    pub count: usize,
    pub window: usize,
    pub skipped_boundary: usize,
    pub mismatches: usize,
    pub max_error_bound: f64,
    pub bound_limit: f64,
    /// max over words of d(f(decode w), decode σw) minus the sum of both bounds.
    pub max_equivariance_excess: f64,
}

/// Parry-random admissible words of length 2·window+1: decode, re-encode and
/// compare; words whose decoded orbit comes within the margin of a rectangle
/// boundary are skipped and counted.
pub fn roundtrip(p: &MarkovPartition, count: usize, window: usize, seed: u64) -> Result<RoundtripReport> {
    use rayon::prelude::*;
    let m = sft::parry_measure(&p.transitions)?;
    let w = window as i64;
    let lam = p.map.expansion();
    let bound_limit = p.u_max() * lam.powi(-(window as i32));
    let res: Vec<Result<Option<(bool, f64, f64)>>> = (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i);
            // one extra symbol so σw has the same window
            let sym = sft::sample_itinerary_rng(&m, 2 * window + 2, &mut rng);
            let it = Itinerary::new(sym[..2 * window + 1].to_vec(), window);
            let d = toral::decode(p, &it)?;
            let back = match toral::encode(p, d.point, -w, w, toral::DEFAULT_MARGIN) {
                Ok(b) => b,
                Err(Error::BoundaryAmbiguity(_)) => return Ok(None),
                Err(e) => return Err(e),
            };
            let shifted = Itinerary::new(sym[1..].to_vec(), window);
            let d1 = toral::decode(p, &shifted)?;
            let fx = p.map.step(d.point);
            let excess = toral::torus_dist(fx, d1.point) - (lam * d.error_bound * 2.0 + d1.error_bound * 2.0);
            Ok(Some((back == it, d.error_bound, excess)))
        })
        .collect();
    let mut rep = RoundtripReport { count, window, skipped_boundary: 0, mismatches: 0, max_error_bound: 0.0, bound_limit, max_equivariance_excess: f64::NEG_INFINITY };
    for r in res {
        match r? {
            None => rep.skipped_boundary += 1,
            Some((ok, eb, ex)) => {
                rep.mismatches += usize::from(!ok);
                rep.max_error_bound = rep.max_error_bound.max(eb);
                rep.max_equivariance_excess = rep.max_equivariance_excess.max(ex);
            }
        }
    }
    Ok(rep)
}

fn run_shadow(ctx: &mut Ctx, a: &ShadowArgs) -> Result<Outcome> {
    let t = ToralAutomorphism::new([[a.matrix[0], a.matrix[1]], [a.matrix[2], a.matrix[3]]])?;
    let c = shadowing_constant(&t);
    let mut rows = Vec::with_capacity(a.count);
    let mut csv = String::from("instance,delta,linear_tracking,newton_tracking,agreement,ratio\n");
    for i in 0..a.count {
        let po = random_pseudo_orbit(&t, a.length, a.delta, ctx.seed.wrapping_add(i as u64))?;
        let lin = linear_shadow(&t, &po)?;
        let newt = newton_shadow(&t, &po, NEWTON_TOL, 50)?;
        let agree = lin.points.iter().zip(&newt.points).map(|(x, y)| toral::torus_dist(*x, *y)).fold(0.0, f64::max);
        let ratio = if po.delta > 0.0 { lin.tracking / po.delta } else { 0.0 };
        csv.push_str(&format!("{i},{:e},{:e},{:e},{:e},{}\n", po.delta, lin.tracking, newt.tracking, agree, ratio));
        rows.push(json!({
            "delta": po.delta,
            "linear_tracking": lin.tracking,
            "newton_tracking": newt.tracking,
            "newton_iterations": newt.iterations,
            "agreement": agree,
            "ratio": ratio,
        }));
    }
    Ok(Outcome { results: json!({ "constant": c, "instances": rows }), csv: Some(csv) })
}

struct Problem {
    catalog: Catalog,
    fam: crate::weakstar::TestFamily,
    mu: MeasureHandle,
    levels: Vec<LevelSpec>,
    approx: Vec<saturation::ApproxReport>,
}

fn measure_from_spec(spec: &MeasureSpec, b: &TransitionMatrix) -> Result<MarkovMeasure> {
    match spec {
        MeasureSpec::Named(n) if n == "parry" => sft::parry_measure(b),
        MeasureSpec::Named(n) => Err(Error::Invalid(format!("unknown measure {n:?}"))),
        MeasureSpec::Rows(r) => saturation::markov_from_rows(r.clone(), b),
    }
}

fn problem(cfg: &SaturationConfig) -> Result<Problem> {
    let b = &cfg.matrix;
    let measures: Vec<MarkovMeasure> = cfg.measures.iter().map(|s| measure_from_spec(s, b)).collect::<Result<_>>()?;
    let catalog = match &cfg.bridges {
        Some(s) => Catalog::new(b.clone(), measures.clone(), s.clone())?,
        None => Catalog::with_default_bridges(b.clone(), measures.clone())?,
    };
    if cfg.target.len() != measures.len() {
        return Err(Error::Invalid("one target weight per measure".into()));
    }
    let parts: Vec<(f64, MeasureHandle)> = cfg.target.iter().zip(&measures).filter(|(w, _)| **w > 0.0).map(|(w, m)| (*w, MeasureHandle::Markov(m.clone()))).collect();
    let mu = MeasureHandle::combination(parts)?;
    let fam = build_test_family(Space::Shift(b.clone()), cfg.imax)?;
    if cfg.segment_len.len() != cfg.depth as usize || cfg.depth == 0 {
        return Err(Error::Invalid("segment_len needs one entry per level".into()));
    }
    let mut levels = Vec::new();
    let mut approx = Vec::new();
    for (q, &n) in cfg.segment_len.iter().enumerate() {
        let k = cfg.first_level + q as u64;
        let (l, r) = saturation::rational_approximation(&mu, k, &catalog, &fam, &ApproxConfig { max_den: cfg.max_den, segment_len: n, entropies: None, goal: cfg.goal })?;
        levels.push(l);
        approx.push(r);
    }
    Ok(Problem { catalog, fam, mu, levels, approx })
}

fn level_targets(p: &Problem) -> Vec<MeasureHandle> {
    p.levels
        .iter()
        .map(|l| {
            let parts = l.components.iter().zip(&l.weights).map(|(&c, a)| (*a.numer() as f64 / *a.denom() as f64, MeasureHandle::Markov(p.catalog.measures[c].clone()))).collect();
            MeasureHandle::Combination(parts)
        })
        .collect()
}

fn entropies(p: &Problem) -> Vec<f64> {
    p.catalog.measures.iter().map(sft::markov_entropy).collect()
}

fn run_saturate(ctx: &mut Ctx, cmd: &SaturateCmd) -> Result<Outcome> {
    match cmd {
        SaturateCmd::Schedule { config } => {
            let cfg: SaturationConfig = ctx.json(config)?;
            let p = problem(&cfg)?;
            let s = saturation::build_schedule(&p.levels, &p.catalog)?;
            Ok(Outcome { results: json!({ "approximations": p.approx, "schedule": s }), csv: None })
        }
        SaturateCmd::Run { config, word_out } => {
            let cfg: SaturationConfig = ctx.json(config)?;
            let r = saturation_run(&cfg, ctx.seed)?;
            if let Some(path) = word_out {
                let text: Vec<String> = r.word.iter().map(|s| s.to_string()).collect();
                std::fs::write(path, text.join(",")).map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))?;
            }
            Ok(Outcome {
                results: json!({
                    "approximations": r.approximations,
                    "schedule": r.schedule,
                    "pool_acceptance": r.pool_acceptance,
                    "word_len": r.word.len(),
                    "shadow": r.shadow,
                    "geometric": r.geometric,
                    "tracking": { "all_pass": r.tracking.all_pass, "min_margin": r.tracking.min_margin, "checkpoints": r.tracking.checkpoints.len() },
                    "certificate": r.certificate,
                }),
                csv: Some(r.tracking.to_csv()),
            })
        }
        SaturateCmd::Assemble { config, word_out } => {
            let cfg: SaturationConfig = ctx.json(config)?;
            let (p, s, pools, a) = assemble(&cfg, ctx.seed)?;
            let text: Vec<String> = a.word.iter().map(|s| s.to_string()).collect();
            if let Some(path) = word_out {
                std::fs::write(path, text.join(",")).map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))?;
            }
            let mut csv = String::from("k,i,j,t,position\n");
            for (q, i, j, t, pos) in s.segment_starts() {
                csv.push_str(&format!("{},{i},{j},{t},{pos}\n", s.levels[q].k));
            }
            let acc: Vec<Vec<f64>> = pools.iter().map(|r| r.iter().map(|p| p.acceptance).collect()).collect();
            Ok(Outcome {
                results: json!({
                    "total_len": s.total_len,
                    "segments": a.segment_starts.len(),
                    "admissible": p.catalog.matrix.is_admissible(&a.word),
                    "pool_acceptance": acc,
                    "word_sha256": hex::encode(Sha256::digest(text.join(",").as_bytes())),
                }),
                csv: Some(csv),
            })
        }
        SaturateCmd::Track { config, schedule, word } => {
            let cfg: SaturationConfig = ctx.json(config)?;
            let s: Schedule = ctx.json(schedule)?;
            s.check_invariants()?;
            let w = parse_word(&ctx.read(word)?)?;
            let p = problem(&cfg)?;
            let r = saturation::verify_tracking(&w, &s, &level_targets(&p), &p.mu, &p.fam)?;
            Ok(Outcome { csv: Some(r.to_csv()), results: to_value(&r) })
        }
        SaturateCmd::Certificate { schedule, entropies } => {
            let s: Schedule = ctx.json(schedule)?;
            s.check_invariants()?;
            let h: Vec<f64> = entropies.split(',').map(|t| t.trim().parse::<f64>().map_err(|_| Error::Invalid(format!("bad entropy {t:?}")))).collect::<Result<_>>()?;
            Ok(Outcome { results: to_value(&saturation::entropy_lower_certificate(&s, &h)?), csv: None })
        }
        SaturateCmd::KatokEntropy { src, rows, n, eps, delta, samples } => {
            let b = matrix_from(ctx, src)?;
            let m = measure_from_rows(&b, rows.as_deref())?;
            let e = saturation::katok_entropy_shift(&m, *n, *eps, *delta, *samples, ctx.seed)?;
            Ok(Outcome { results: json!({ "estimate": e, "entropy": sft::markov_entropy(&m) }), csv: None })
        }
    }
}

#[derive(Debug, Clone)]
pub struct SaturationRun {
    pub approximations: Vec<saturation::ApproxReport>,
    pub schedule: Schedule,
    pub pool_acceptance: Vec<Vec<f64>>,
    pub word: Vec<usize>,
    /// Decoded point of the word when it lives on the shipped partition's shift.
    pub shadow: Option<toral::Decoded>,
    pub geometric: Option<GeometricReport>,
    pub tracking: saturation::TrackingReport,
    pub certificate: Vec<saturation::CertificateLevel>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GeometricReport {
    /// Largest jump of the decoded pseudo-orbit.
    pub delta: f64,
    pub newton_iterations: usize,
    pub residual: f64,
    /// max_n d(z_n, x_n) for the Newton shadow z.
    pub tracking: f64,
    pub constant: f64,
    /// d(z_0, symbolic shadow point).
    pub start_gap: f64,
}

const PAST: usize = 20;

/// Newton shadow of the segment-wise decoded pseudo-orbit, compared with the
/// symbolic shadow point.
fn geometric_check(word: &[usize], segment_starts: &[u64], symbolic: &toral::Decoded) -> Result<GeometricReport> {
    let p = golden_partition();
    let po = saturation::geometric_pseudo_orbit(&p, word, &[0; PAST], segment_starts, PAST)?;
    let z = newton_shadow(&p.map, &po, NEWTON_TOL, 50)?;
    Ok(GeometricReport {
        delta: po.delta,
        newton_iterations: z.iterations,
        residual: z.residual,
        tracking: z.tracking,
        constant: shadowing_constant(&p.map),
        start_gap: toral::torus_dist(z.points[0], symbolic.point),
    })
}

fn assemble(cfg: &SaturationConfig, seed: u64) -> Result<(Problem, Schedule, Vec<Vec<SegmentPool>>, Assembly)> {
    let p = problem(cfg)?;
    let s = saturation::build_schedule(&p.levels, &p.catalog)?;
    let b = &p.catalog.matrix;
    let anchor = saturation::default_anchor(b);
    let mut pools: Vec<Vec<SegmentPool>> = Vec::new();
    for (q, l) in s.levels.iter().enumerate() {
        let mut row = Vec::new();
        for (j, &c) in l.components.iter().enumerate() {
            let pc = PoolConfig { pool_size: cfg.pool_size, seed: seed ^ ((q as u64) << 32 | j as u64), anchor, floor: saturation::DEFAULT_ACCEPTANCE_FLOOR };
            row.push(saturation::build_segment_pool(&p.catalog.measures[c], l.lengths[j], l.k, &p.fam, &pc)?);
        }
        pools.push(row);
    }
    let a = saturation::assemble_symbolic(&s, &pools, b, seed)?;
    Ok((p, s, pools, a))
}

/// Approximation, schedule, pools, assembly, decode, tracking and certificate.
pub fn saturation_run(cfg: &SaturationConfig, seed: u64) -> Result<SaturationRun> {
    let (p, s, pools, a) = assemble(cfg, seed)?;
    let b = &p.catalog.matrix;
    let tracking = saturation::verify_tracking(&a.word, &s, &level_targets(&p), &p.mu, &p.fam)?;
    let certificate = saturation::entropy_lower_certificate(&s, &entropies(&p))?;
    let shadow = shadow_point(b, &a.word)?;
    let geometric = match &shadow {
        Some(d) => Some(geometric_check(&a.word, &a.segment_starts, d)?),
        None => None,
    };
    Ok(SaturationRun {
        geometric,
        approximations: p.approx,
        pool_acceptance: pools.iter().map(|r| r.iter().map(|p| p.acceptance).collect()).collect(),
        schedule: s,
        word: a.word,
        shadow,
        tracking,
        certificate,
    })
}

/// The point coded by a golden-mean word under the shipped partition, when
/// the word lives on that shift. Any symbol may follow 0 there, so the
/// past is taken to be 0^20.
fn shadow_point(b: &TransitionMatrix, word: &[usize]) -> Result<Option<toral::Decoded>> {
    let p = golden_partition();
    if *b != p.transitions {
        return Ok(None);
    }
    let mut w = vec![0; PAST];
    w.extend_from_slice(word);
    Ok(Some(toral::decode(&p, &Itinerary::new(w, PAST))?))
}

fn map_from(ctx: &mut Ctx, params: &MapParams) -> Result<KatokMap> {
    match &params.map {
        Some(p) => {
            let c: MapConfig = ctx.json(p)?;
            build_katok_map(ToralAutomorphism::new(c.matrix)?, c.r0, c.r1, c.alpha)
        }
        None => Ok(KatokMap::default()),
    }
}

fn run_katok(ctx: &mut Ctx, cmd: &KatokCmd) -> Result<Outcome> {
    match cmd {
        KatokCmd::Orbit { params, x, steps } => {
            let m = map_from(ctx, params)?;
            let mut y = [x[0], x[1]];
            let mut csv = String::from("t,x,y,in_disk,chi_plus_running\n");
            let mut log_sum = 0.0;
            let mut v = m.base.e_u;
            let mut pts = Vec::with_capacity(*steps + 1);
            for t in 0..=*steps {
                let chi = if t == 0 { 0.0 } else { log_sum / t as f64 };
                let in_disk = if params.linear { false } else { m.in_disk(y) };
                csv.push_str(&format!("{t},{},{},{},{}\n", y[0], y[1], in_disk, chi));
                pts.push(y);
                if t < *steps {
                    let d = if params.linear { m.base.derivative() } else { m.dstep(y)? };
                    let w = [d[0][0] * v[0] + d[0][1] * v[1], d[1][0] * v[0] + d[1][1] * v[1]];
                    let nrm = w[0].hypot(w[1]);
                    log_sum += nrm.ln();
                    v = [w[0] / nrm, w[1] / nrm];
                    y = if params.linear { m.base.step(y) } else { m.step(y)? };
                }
            }
            Ok(Outcome { results: json!({ "points": pts, "chi_plus": log_sum / (*steps).max(1) as f64 }), csv: Some(csv) })
        }
        KatokCmd::Lyapunov { params, x, steps } => {
            let m = map_from(ctx, params)?;
            let r = if params.linear { finite_lyapunov(&m.base, [x[0], x[1]], *steps)? } else { finite_lyapunov(&m, [x[0], x[1]], *steps)? };
            Ok(Outcome { results: to_value(&r), csv: None })
        }
        KatokCmd::PesinCheck { params, x, points, window, beta1, beta2, eps, margin } => {
            let m = map_from(ctx, params)?;
            let lam = m.log_lambda;
            let (b1, b2) = (beta1.unwrap_or(lam), beta2.unwrap_or(lam));
            let xs: Vec<[f64; 2]> = match x {
                Some(x) => vec![[x[0], x[1]]],
                None => {
                    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
                    (0..*points).map(|_| [rng.gen(), rng.gen()]).collect()
                }
            };
            let mut csv = String::from("x,y,k,binding,t,n\n");
            let mut reports = Vec::new();
            for p in xs {
                let r = if params.linear { pesin_block_check(&m.base, p, *window, b1, b2, *eps, *margin)? } else { pesin_block_check(&m, p, *window, b1, b2, *eps, *margin)? };
                csv.push_str(&format!("{},{},{},{},{},{}\n", p[0], p[1], r.k, r.binding.0, r.binding.1, r.binding.2));
                reports.push(json!({ "x": p, "report": r }));
            }
            Ok(Outcome { results: json!({ "beta1": b1, "beta2": b2, "points": reports }), csv: Some(csv) })
        }
        KatokCmd::Frequency { region, gamma, max_n, window, count } => {
            let b = TransitionMatrix::golden_mean();
            let m = sft::parry_measure(&b)?;
            if *region >= b.size() {
                return Err(Error::SymbolOutOfRange { symbol: *region, size: b.size() });
            }
            let pi = m.p[*region];
            let mut csv = String::from("sample,min_n\n");
            let mut mins = Vec::new();
            for i in 0..*count {
                let w = sft::sample_itinerary(&m, 2 * window + 1, ctx.seed.wrapping_add(i as u64));
                let flags: Vec<bool> = w.iter().map(|&s| s == *region).collect();
                let t0 = -(*window as i64);
                let min_n = minimal_frequency_n(&flags, t0, *max_n, *gamma, pi)?;
                csv.push_str(&format!("{i},{}\n", min_n.map_or("none".to_string(), |n| n.to_string())));
                mins.push(min_n);
            }
            Ok(Outcome { results: json!({ "p_i": pi, "gamma": gamma, "min_n": mins }), csv: Some(csv) })
        }
    }
}

/// Smallest N ≤ max_n with the window in Γ_N(i, γ) (membership is monotone in N).
pub fn minimal_frequency_n(flags: &[bool], t0: i64, max_n: u64, gamma: f64, p_i: f64) -> Result<Option<u64>> {
    if !frequency_check(flags, t0, max_n, gamma, p_i)? {
        return Ok(None);
    }
    let (mut lo, mut hi) = (0u64, max_n);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if frequency_check(flags, t0, mid, gamma, p_i)? {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(Some(lo))
}

fn dispatch(ctx: &mut Ctx, cmd: &Command) -> Result<Outcome> {
    match cmd {
        Command::Sft(c) => run_sft(ctx, c),
        Command::Toral(c) => run_toral(ctx, c),
        Command::Shadow(a) => run_shadow(ctx, a),
        Command::Saturate(c) => run_saturate(ctx, c),
        Command::Katokmap(c) => run_katok(ctx, c),
    }
}

/// Result keys holding entropies or entropy bounds (in nats internally).
const ENTROPY_KEYS: [&str; 6] = ["entropy", "log_lambda", "estimate", "lower", "bound", "raw_bound"];

fn to_bits(v: &mut Value) {
    match v {
        Value::Object(m) => {
            for (k, x) in m.iter_mut() {
                match x {
                    Value::Number(n) if ENTROPY_KEYS.contains(&k.as_str()) => {
                        *x = json!(n.as_f64().unwrap_or(0.0) / std::f64::consts::LN_2);
                    }
                    _ => to_bits(x),
                }
            }
        }
        Value::Array(a) => a.iter_mut().for_each(to_bits),
        _ => {}
    }
}

fn error_kind(e: &Error) -> String {
    let d = format!("{e:?}");
    d.split(|c: char| !c.is_alphanumeric()).next().unwrap_or("Error").to_string()
}

/// Runs a parsed command line; returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let start = Instant::now();
    let mut ctx = Ctx { seed: cli.seed, inputs: BTreeMap::new() };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads.max(1)).build() {
        Ok(p) => p,
        Err(e) => return report_error(&Error::Invalid(e.to_string())),
    };
    let outcome = pool.install(|| dispatch(&mut ctx, &cli.command));
    let mut out = match outcome {
        Ok(o) => o,
        Err(e) => return report_error(&e),
    };
    if cli.units == Units::Bits {
        to_bits(&mut out.results);
    }
    let config = json!({ "command": to_value(&cli.command), "seed": cli.seed, "units": cli.units, "inputs": ctx.inputs });
    let hash = hex::encode(Sha256::digest(config.to_string().as_bytes()));
    let runtime = if cli.no_timing { 0 } else { start.elapsed().as_millis() as u64 };
    let text = match cli.format {
        Format::Json => {
            let env = json!({ "config_hash": hash, "results": out.results, "runtime_ms": runtime });
            serde_json::to_string_pretty(&env).expect("serializable") + "\n"
        }
        Format::Csv => match out.csv {
            Some(c) => c,
            None => return report_error(&Error::Invalid("this command has no CSV series".into())),
        },
    };
    match &cli.out {
        Some(p) => {
            if let Err(e) = std::fs::write(p, text) {
                return report_error(&Error::Invalid(format!("{}: {e}", p.display())));
            }
        }
        None => print!("{text}"),
    }
    0
}

fn report_error(e: &Error) -> i32 {
    let code = e.exit_code();
    eprintln!("{}", json!({ "error": { "kind": error_kind(e), "message": e.to_string() }, "exit_code": code }));
    code
}

pub fn main_entry() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    run(&cli)
}
