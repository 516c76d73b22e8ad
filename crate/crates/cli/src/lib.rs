//! Command-line front end: single distances, JSONL batches, LUT dumps and
//! equality cost tables.

use std::io::{BufRead, Write};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use leuvenshtein::backend::NoiseParams;
use leuvenshtein::equality::{eq_cost, eq_lut, EqScale, EqTechnique};
use leuvenshtein::kernel::{build_min_lut, BandMode, KernelConfig, KeyEncoding};
use leuvenshtein::pipeline::equality_pbs_per_cell;
use leuvenshtein::preprocess::pbs_per_entry;
use leuvenshtein::{
    build_eq_table, decrypt_score, distance_preprocessed, encrypt_string, encrypted_distance,
    AlphabetSpec, Backend, Parallelism, SimBackend,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(
    name = "leuven",
    version,
    about = "Encrypted edit distance on a simulated TFHE backend"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Distance between two strings.
    Compute(ComputeArgs),
    /// One report per JSONL line `{"a": ..., "b": ...}`.
    Batch(BatchArgs),
    /// Dump one of the built-in lookup tables.
    Table {
        #[arg(value_enum)]
        which: TableName,
    },
    /// PBS cost per equality test for character widths 1..=max-bits, as CSV.
    Eqcost {
        #[arg(long, default_value_t = 16, value_parser = clap::value_parser!(u32).range(1..=31))]
        max_bits: u32,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Exact,
    Skip,
    Approx,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KeyEncodingArg {
    Original,
    Negated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TableName {
    MinlutOriginal,
    MinlutNegated,
    Eqlut,
    Eqlut9,
}

/// Options shared by `compute` and `batch`.
#[derive(Debug, Clone, Args)]
pub struct RunOptions {
    #[arg(long, value_enum, default_value_t = ModeArg::Exact)]
    pub mode: ModeArg,
    /// Accuracy threshold for `--mode approx`.
    #[arg(long)]
    pub ell: Option<usize>,
    /// ascii7, lower26, dna4 or custom:<file>.
    #[arg(long, default_value = "ascii7")]
    pub encoding: String,
    /// Largest key variance, in fresh-bootstrap units, before a refresh.
    #[arg(long, env = "LEUVEN_BUDGET", default_value_t = NoiseParams::PRODUCTION.max_variance_budget)]
    pub budget: u64,
    #[arg(long, value_enum, default_value_t = KeyEncodingArg::Negated)]
    pub key_encoding: KeyEncodingArg,
    /// Treat `b` as plaintext and read equalities from a prebuilt table.
    #[arg(long)]
    pub preprocess: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ComputeArgs {
    #[arg(long)]
    pub a: String,
    #[arg(long)]
    pub b: String,
    #[command(flatten)]
    pub options: RunOptions,
    /// Print the report as JSON.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Args)]
pub struct BatchArgs {
    /// JSONL input file, or `-` for standard input.
    pub input: String,
    #[command(flatten)]
    pub options: RunOptions,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub threads: u64,
    /// Include wall-clock time in every report; the output is then no longer reproducible.
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] leuvenshtein::Error),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(leuvenshtein::Error::BandTooNarrow { .. }) => 3,
            CliError::Core(_) | CliError::Usage(_) => 2,
            CliError::Io(_) => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub distance: i64,
    pub mode: String,
    pub half_width: usize,
    pub visited_cells: u64,
    pub pbs_total: u64,
    pub pbs_equality: u64,
    pub pbs_kernel: u64,
    pub refresh_count: u64,
    pub max_key_variance: u64,
    pub preprocessing_pbs: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub wall_time: Option<f64>,
}

impl RunReport {
    pub fn to_table(&self) -> String {
        let mut rows = vec![
            ("distance", self.distance.to_string()),
            ("mode", self.mode.clone()),
            ("half_width", self.half_width.to_string()),
            ("visited_cells", self.visited_cells.to_string()),
            ("pbs_total", self.pbs_total.to_string()),
            ("pbs_equality", self.pbs_equality.to_string()),
            ("pbs_kernel", self.pbs_kernel.to_string()),
            ("refresh_count", self.refresh_count.to_string()),
            ("max_key_variance", self.max_key_variance.to_string()),
            ("preprocessing_pbs", self.preprocessing_pbs.to_string()),
        ];
        if let Some(t) = self.wall_time {
            rows.push(("wall_time", format!("{t:.6}s")));
        }
        rows.iter().map(|(k, v)| format!("{k:<18}{v}\n")).collect()
    }
}

/// Fully validated run settings.
#[derive(Debug, Clone)]
pub struct Settings {
    pub mode: BandMode,
    pub spec: AlphabetSpec,
    pub params: NoiseParams,
    pub kernel: KernelConfig,
    pub preprocess: bool,
}

impl Settings {
    pub fn from_options(o: &RunOptions) -> Result<Self, CliError> {
        let mode = match (o.mode, o.ell) {
            (ModeArg::Exact, None) => BandMode::Exact,
            (ModeArg::Skip, None) => BandMode::Skip,
            (ModeArg::Approx, Some(ell)) => BandMode::Approx(ell),
            (ModeArg::Approx, None) => {
                return Err(CliError::Usage("--mode approx needs --ell".into()))
            }
            (_, Some(_)) => {
                return Err(CliError::Usage(
                    "--ell only applies to --mode approx".into(),
                ))
            }
        };
        let spec = match o.encoding.strip_prefix("custom:") {
            Some(path) => {
                AlphabetSpec::parse(&std::fs::read_to_string(path).map_err(|e| {
                    CliError::Usage(format!("cannot read alphabet file {path}: {e}"))
                })?)?
            }
            None => AlphabetSpec::by_name(&o.encoding)?,
        };
        let encoding = match o.key_encoding {
            KeyEncodingArg::Original => KeyEncoding::Original,
            KeyEncodingArg::Negated => KeyEncoding::Negated,
        };
        Ok(Self {
            mode,
            spec,
            params: NoiseParams::new(o.budget)?,
            kernel: KernelConfig {
                encoding,
                ..KernelConfig::default()
            },
            preprocess: o.preprocess,
        })
    }
}

/// Runs one pair on its own backend, so counters belong to this pair alone.
pub fn run_pair(a: &str, b: &str, s: &Settings) -> Result<RunReport, CliError> {
    let start = Instant::now();
    let be = SimBackend::new(s.params);
    let xa = encrypt_string(a, &s.spec, &be)?;
    let (run, preprocessing_pbs, per_cell) = if s.preprocess {
        // validate the plaintext before paying for the table
        for c in b.chars() {
            s.spec.code(c)?;
        }
        let table = build_eq_table(&be, &xa, &s.spec, None, s.kernel.parallelism)?;
        let built = be.stats().pbs_count;
        debug_assert_eq!(built, (pbs_per_entry(&s.spec) * table.entry_count()) as u64);
        (
            distance_preprocessed(&be, &table, b, s.mode, &s.kernel)?,
            built,
            0,
        )
    } else {
        let xb = encrypt_string(b, &s.spec, &be)?;
        let run = encrypted_distance(&be, &xa, &xb, s.mode, &s.kernel)?;
        (run, 0, equality_pbs_per_cell(&s.spec))
    };
    let stats = be.stats();
    let report = RunReport {
        distance: decrypt_score(&be, &run.score),
        mode: s.mode.name().to_string(),
        half_width: run.band.half_width,
        visited_cells: run.visited_cells,
        pbs_total: stats.pbs_count,
        pbs_equality: per_cell * run.visited_cells,
        pbs_kernel: run.kernel_pbs,
        refresh_count: stats.refresh_count,
        max_key_variance: run.max_key_variance,
        preprocessing_pbs,
        wall_time: Some(start.elapsed().as_secs_f64()),
    };
    if report.pbs_total
        != report.pbs_equality + report.pbs_kernel + report.refresh_count + report.preprocessing_pbs
    {
        return Err(CliError::Usage(format!(
            "PBS accounting mismatch: {report:?}"
        )));
    }
    Ok(report)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BatchLine {
    a: String,
    b: String,
}

#[derive(Debug, Serialize)]
struct BatchError {
    line: usize,
    error: String,
}

fn batch_line(line_no: usize, text: &str, s: &Settings, timing: bool) -> String {
    let result = serde_json::from_str::<BatchLine>(text)
        .map_err(|e| CliError::Usage(format!("malformed line: {e}")))
        .and_then(|p| run_pair(&p.a, &p.b, s));
    let json = match result {
        Ok(mut report) => {
            if !timing {
                report.wall_time = None;
            }
            serde_json::to_string(&report)
        }
        Err(e) => serde_json::to_string(&BatchError {
            line: line_no,
            error: e.to_string(),
        }),
    };
    json.expect("reports serialize")
}

/// Processes a JSONL batch. Output order follows input order; blank lines
/// are skipped and keep their line numbers for error reports.
pub fn run_batch(
    input: &str,
    options: &RunOptions,
    threads: usize,
    timing: bool,
) -> Result<Vec<String>, CliError> {
    let mut s = Settings::from_options(options)?;
    // pairs run concurrently, so each pair's own grid stays on one thread
    s.kernel.parallelism = Parallelism::Sequential;
    let lines: Vec<(usize, &str)> = input
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
        .collect();
    let work = |&(no, text): &(usize, &str)| batch_line(no, text, &s, timing);
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))?;
        Ok(pool.install(|| lines.par_iter().map(work).collect()))
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        Ok(lines.iter().map(work).collect())
    }
}

pub fn table_dump(which: TableName) -> Result<String, CliError> {
    Ok(match which {
        TableName::MinlutOriginal => build_min_lut(KeyEncoding::Original)?.lut().dump(),
        TableName::MinlutNegated => build_min_lut(KeyEncoding::Negated)?.lut().dump(),
        TableName::Eqlut => eq_lut(EqScale::One).dump(),
        TableName::Eqlut9 => eq_lut(EqScale::Nine).dump(),
    })
}

pub fn eqcost_csv(max_bits: u32) -> String {
    let mut out = String::from("bits,standard,ours,combined\n");
    for b in 1..=max_bits {
        out.push_str(&format!(
            "{b},{},{},{}\n",
            eq_cost(EqTechnique::Standard2Bit, b),
            eq_cost(EqTechnique::Ours4Bit, b),
            eq_cost(EqTechnique::Combined, b)
        ));
    }
    out
}

/// Runs a parsed command, writing its output to `out`.
pub fn execute(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Compute(args) => {
            let settings = Settings::from_options(&args.options)?;
            let report = run_pair(&args.a, &args.b, &settings)?;
            if args.json {
                writeln!(
                    out,
                    "{}",
                    serde_json::to_string(&report).expect("reports serialize")
                )?;
            } else {
                write!(out, "{}", report.to_table())?;
            }
        }
        Command::Batch(args) => {
            let input = if args.input == "-" {
                let mut s = String::new();
                for line in std::io::stdin().lock().lines() {
                    s.push_str(&line?);
                    s.push('\n');
                }
                s
            } else {
                std::fs::read_to_string(&args.input)?
            };
            for line in run_batch(&input, &args.options, args.threads as usize, args.timing)? {
                writeln!(out, "{line}")?;
            }
        }
        Command::Table { which } => write!(out, "{}", table_dump(which)?)?,
        Command::Eqcost { max_bits } => write!(out, "{}", eqcost_csv(max_bits))?,
    }
    Ok(())
}
