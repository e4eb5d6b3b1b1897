//! Subcommand definitions and their implementations.
//!
//! Each command writes machine-readable output to the given writer and
//! returns the process exit code; diagnostics are the caller's business.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::Rng;
use serde::Serialize;
use ylg_core::attention::{
    attention_backward, masked_attention, multihead_attention, AttentionWeights,
};
use ylg_core::grid::{apply_esa_to_factorization, esa_enumeration, row_major, GridEnumeration};
use ylg_core::ifg::InformationFlowGraph;
use ylg_core::inversion::{invert, seeded_rng, InversionConfig, SaliencyMap};
use ylg_core::patterns::{default_stride, expand_nonsquare};
use ylg_core::{AttentionMask, Matrix64, PatternKind};

use crate::error::{exit, CliError, CliResult};
use crate::maskfile::{parse_dims, MaskFile};
use crate::report::StatsReport;
use crate::toy::LinearToy;
use crate::viz;

pub const MAX_TOKENS: usize = 256;
pub const MAX_EMBED_DIM: usize = 64;
pub const MAX_LATENT_DIM: usize = 64;

#[derive(Debug, Parser)]
#[command(
    name = "ylg",
    version,
    about = "Two-dimensional local sparse attention toolkit"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a pattern factorization and write it as a mask file.
    Gen(GenArgs),
    /// Print structural statistics; exit 1 without full information.
    Check(CheckArgs),
    /// Render a mask file as PBM bitmaps, a DOT graph or an adjacency list.
    Viz(VizArgs),
    /// Run masked multi-head attention on random inputs with a gradient check.
    Attend(AttendArgs),
    /// Invert a random linear generator and trace the loss.
    InvertDemo(InvertDemoArgs),
    /// Print the rank table of a grid enumeration.
    Enumerate(EnumerateArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// fixed, ltr, rtl, strided or strided-full.
    pub pattern: String,
    /// Token count.
    pub n: usize,
    /// Block size; defaults to ⌈√n⌉.
    pub stride: Option<usize>,
    /// Re-index the steps along the ESA walk of an HxW grid (H·W = n).
    #[arg(long, value_name = "HxW")]
    pub esa: Option<String>,
    /// Replicate the final step to this many query rows.
    #[arg(long, value_name = "QUERIES")]
    pub expand: Option<usize>,
    /// Output path; standard output when omitted.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    pub input: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VizFormat {
    Pbm,
    Dot,
    Adj,
}

#[derive(Debug, Args)]
pub struct VizArgs {
    pub input: PathBuf,
    /// For PBM, `<stem>-step<i>.pbm` is written next to this path per step.
    pub output: PathBuf,
    #[arg(long, value_enum, default_value_t = VizFormat::Pbm)]
    pub format: VizFormat,
}

#[derive(Debug, Args)]
pub struct AttendArgs {
    pub input: PathBuf,
    #[arg(long, env = "YLG_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Expected key token count; must match the file.
    #[arg(long)]
    pub tokens: Option<usize>,
    #[arg(long, default_value_t = 8)]
    pub embed_dim: usize,
    #[arg(long, default_value_t = 2)]
    pub heads: usize,
}

#[derive(Debug, Args)]
pub struct InvertDemoArgs {
    #[arg(long, default_value_t = 8)]
    pub dim: usize,
    #[arg(long, env = "YLG_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1500)]
    pub steps: usize,
    #[arg(long, default_value_t = 0.05)]
    pub lr: f64,
    /// Write the CSV trace here and a JSON summary to standard output.
    /// Without it the trace goes to standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EnumerationChoice {
    Esa,
    RowMajor,
}

#[derive(Debug, Args)]
pub struct EnumerateArgs {
    #[arg(value_name = "HxW")]
    pub grid: String,
    #[arg(long, value_enum, default_value_t = EnumerationChoice::Esa)]
    pub kind: EnumerationChoice,
}

pub fn run(command: &Command, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<u8> {
    match command {
        Command::Gen(a) => cmd_gen(a, out),
        Command::Check(a) => cmd_check(&a.input, out),
        Command::Viz(a) => cmd_viz(a),
        Command::Attend(a) => cmd_attend(a, out),
        Command::InvertDemo(a) => cmd_invert_demo(a, out, err),
        Command::Enumerate(a) => cmd_enumerate(a, out),
    }
}

fn dims_arg(text: &str) -> CliResult<(usize, usize)> {
    parse_dims(text).ok_or_else(|| CliError::Invalid(format!("expected HxW, got '{text}'")))
}

pub fn read_mask_file(path: &Path) -> CliResult<MaskFile> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    MaskFile::parse(&text).map_err(|source| CliError::MaskFile {
        path: path.to_path_buf(),
        source,
    })
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn write_json(out: &mut dyn Write, value: &impl Serialize) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Invalid(e.to_string()))?;
    writeln!(out, "{text}")?;
    Ok(())
}

pub fn build_mask_file(args: &GenArgs) -> CliResult<MaskFile> {
    let kind: PatternKind = args.pattern.parse()?;
    if kind == PatternKind::Custom {
        return Err(CliError::Invalid(
            "custom patterns cannot be generated".into(),
        ));
    }
    let stride = args.stride.unwrap_or_else(|| default_stride(args.n));
    let mut f = kind.build(args.n, stride)?;
    if let Some(grid) = &args.esa {
        let (h, w) = dims_arg(grid)?;
        if h * w != args.n {
            return Err(CliError::Invalid(format!(
                "grid {h}x{w} does not hold {} tokens",
                args.n
            )));
        }
        f = apply_esa_to_factorization(&f, &esa_enumeration(h, w)?)?;
    }
    if let Some(queries) = args.expand {
        f = expand_nonsquare(&f, queries)?;
    }
    Ok(MaskFile::from_factorization(&f))
}

pub fn cmd_gen(args: &GenArgs, out: &mut dyn Write) -> CliResult<u8> {
    let text = build_mask_file(args)?.render();
    match &args.out {
        Some(path) => write_file(path, &text)?,
        None => out.write_all(text.as_bytes())?,
    }
    Ok(exit::OK)
}

pub fn cmd_check(input: &Path, out: &mut dyn Write) -> CliResult<u8> {
    let f = read_mask_file(input)?
        .to_factorization()
        .map_err(|source| CliError::MaskFile {
            path: input.to_path_buf(),
            source,
        })?;
    let report = StatsReport::of(&f)?;
    write_json(out, &report)?;
    Ok(if report.full_information {
        exit::OK
    } else {
        exit::VERDICT_FALSE
    })
}

pub fn cmd_viz(args: &VizArgs) -> CliResult<u8> {
    let file = read_mask_file(&args.input)?;
    match args.format {
        VizFormat::Pbm => {
            for (i, step) in file.steps.iter().enumerate() {
                write_file(&viz::step_path(&args.output, i), &viz::pbm(step))?;
            }
        }
        VizFormat::Dot => {
            let g = InformationFlowGraph::from_masks(&file.steps)?;
            write_file(&args.output, &viz::dot(&g))?;
        }
        VizFormat::Adj => {
            let g = InformationFlowGraph::from_masks(&file.steps)?;
            write_file(&args.output, &viz::adjacency(&g))?;
        }
    }
    Ok(exit::OK)
}

#[derive(Debug, Serialize)]
struct AttendReport {
    tokens: usize,
    queries: usize,
    embed_dim: usize,
    heads: usize,
    steps: usize,
    seed: u64,
    checksum: f64,
    max_row_sum_deviation: f64,
    gradient_samples: usize,
    gradient_max_rel_error: f64,
}

const FD_EPSILON: f64 = 1e-5;
const FD_SAMPLES_PER_TENSOR: usize = 6;

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-5)
}

/// Probes entries of every input and weight of one head against central
/// differences of `Σ output ⊙ upstream`; returns (samples, max relative error).
fn gradient_check(
    x: &Matrix64,
    y: &Matrix64,
    w: &AttentionWeights<f64>,
    mask: &AttentionMask,
    rng: &mut impl Rng,
) -> CliResult<(usize, f64)> {
    let upstream = Matrix64::random(x.rows(), w.value_width(), 1.0, rng);
    let grads = attention_backward(x, y, w, mask, &upstream)?;
    let objective = |x: &Matrix64, y: &Matrix64, w: &AttentionWeights<f64>| -> CliResult<f64> {
        let o = masked_attention(x, y, w, mask)?.output;
        Ok(o.as_slice()
            .iter()
            .zip(upstream.as_slice())
            .map(|(a, b)| a * b)
            .sum())
    };
    let mut samples = 0;
    let mut worst = 0.0f64;
    for tensor in 0..5 {
        let analytic = match tensor {
            0 => &grads.x,
            1 => &grads.y,
            2 => &grads.w_q,
            3 => &grads.w_k,
            _ => &grads.w_v,
        };
        let len = analytic.as_slice().len();
        for _ in 0..FD_SAMPLES_PER_TENSOR.min(len) {
            let idx = rng.random_range(0..len);
            let probe = |delta: f64| -> CliResult<f64> {
                let (mut x, mut y, mut w) = (x.clone(), y.clone(), w.clone());
                let target = match tensor {
                    0 => &mut x,
                    1 => &mut y,
                    2 => &mut w.w_q,
                    3 => &mut w.w_k,
                    _ => &mut w.w_v,
                };
                target.as_mut_slice()[idx] += delta;
                objective(&x, &y, &w)
            };
            let numeric = (probe(FD_EPSILON)? - probe(-FD_EPSILON)?) / (2.0 * FD_EPSILON);
            worst = worst.max(rel_err(analytic.as_slice()[idx], numeric));
            samples += 1;
        }
    }
    Ok((samples, worst))
}

pub fn cmd_attend(args: &AttendArgs, out: &mut dyn Write) -> CliResult<u8> {
    let file = read_mask_file(&args.input)?;
    if file.n_key > MAX_TOKENS || file.n_query > MAX_TOKENS {
        return Err(CliError::Invalid(format!(
            "attend handles at most {MAX_TOKENS} tokens"
        )));
    }
    if let Some(tokens) = args.tokens {
        if tokens != file.n_key {
            return Err(CliError::Invalid(format!(
                "--tokens {tokens} does not match the file's {} keys",
                file.n_key
            )));
        }
    }
    if args.embed_dim == 0 || args.embed_dim > MAX_EMBED_DIM {
        return Err(CliError::Invalid(format!(
            "--embed-dim must be in 1..={MAX_EMBED_DIM}"
        )));
    }
    if args.heads == 0 || args.heads > 8 {
        return Err(CliError::Invalid("--heads must be in 1..=8".into()));
    }
    let e = args.embed_dim;
    let mut rng = seeded_rng(args.seed);
    let mut hidden = Matrix64::random(file.n_key, e, 1.0, &mut rng);
    let last = file.steps.len() - 1;
    let mut max_dev = 0.0f64;
    let mut samples = 0;
    let mut worst = 0.0f64;
    for (i, mask) in file.steps.iter().enumerate() {
        let queries = if i == last && file.n_query != file.n_key {
            Matrix64::random(file.n_query, hidden.cols(), 1.0, &mut rng)
        } else {
            hidden.clone()
        };
        let width = hidden.cols();
        let scale = 1.0 / (width as f64).sqrt();
        let heads: Vec<(AttentionWeights<f64>, AttentionMask)> = (0..args.heads)
            .map(|_| {
                (
                    AttentionWeights::random(width, width, e, e, scale, &mut rng),
                    mask.clone(),
                )
            })
            .collect();
        let result = multihead_attention(&queries, &hidden, &heads)?;
        for head in &result.heads {
            for r in 0..head.attention_map.rows() {
                let sum: f64 = head.attention_map.row(r).iter().sum();
                max_dev = max_dev.max((sum - 1.0).abs());
            }
        }
        for (w, m) in &heads {
            let (n, err) = gradient_check(&queries, &hidden, w, m, &mut rng)?;
            samples += n;
            worst = worst.max(err);
        }
        hidden = result.output;
    }
    write_json(
        out,
        &AttendReport {
            tokens: file.n_key,
            queries: file.n_query,
            embed_dim: e,
            heads: args.heads,
            steps: file.steps.len(),
            seed: args.seed,
            checksum: hidden.as_slice().iter().sum(),
            max_row_sum_deviation: max_dev,
            gradient_samples: samples,
            gradient_max_rel_error: worst,
        },
    )?;
    Ok(exit::OK)
}

#[derive(Debug, Serialize)]
struct InvertSummary {
    dim: usize,
    seed: u64,
    steps: usize,
    best_loss: f64,
    initial_error: f64,
    final_error: f64,
}

pub fn cmd_invert_demo(
    args: &InvertDemoArgs,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> CliResult<u8> {
    if args.dim == 0 || args.dim > MAX_LATENT_DIM {
        return Err(CliError::Invalid(format!(
            "--dim must be in 1..={MAX_LATENT_DIM}"
        )));
    }
    let toy = LinearToy::new(args.dim, args.seed)?;
    let config = InversionConfig {
        learning_rate: args.lr,
        max_steps: args.steps,
        seed: args.seed,
        ..InversionConfig::default()
    };
    let result = invert(
        &toy.generator,
        &toy.embed,
        &toy.target,
        &[SaliencyMap::uniform(1, 1)?],
        &config,
    )?;
    let mut csv = String::from("step,loss,best_loss\n");
    for (step, (loss, best)) in result
        .loss_trace
        .iter()
        .zip(&result.best_loss_trace)
        .enumerate()
    {
        csv.push_str(&format!("{step},{loss:e},{best:e}\n"));
    }
    let summary = InvertSummary {
        dim: args.dim,
        seed: args.seed,
        steps: result.steps,
        best_loss: result.best_loss(),
        initial_error: toy.distance(&result.initial_latent),
        final_error: toy.distance(&result.latent),
    };
    match &args.out {
        Some(path) => {
            write_file(path, &csv)?;
            write_json(out, &summary)?;
        }
        None => {
            out.write_all(csv.as_bytes())?;
            writeln!(err, "final error {}", summary.final_error)?;
        }
    }
    Ok(exit::OK)
}

#[derive(Debug, Serialize)]
struct RankTable {
    kind: &'static str,
    height: usize,
    width: usize,
    ranks: Vec<Vec<usize>>,
}

pub fn cmd_enumerate(args: &EnumerateArgs, out: &mut dyn Write) -> CliResult<u8> {
    let (h, w) = dims_arg(&args.grid)?;
    let (kind, e): (&'static str, GridEnumeration) = match args.kind {
        EnumerationChoice::Esa => ("esa", esa_enumeration(h, w)?),
        EnumerationChoice::RowMajor => ("row-major", row_major(h, w)?),
    };
    write_json(
        out,
        &RankTable {
            kind,
            height: h,
            width: w,
            ranks: e.rank_table(),
        },
    )?;
    Ok(exit::OK)
}
