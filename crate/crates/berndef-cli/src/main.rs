//! Batch operator surface for the deficiency engine: decode sequences,
//! run full audits (optionally windowed over a stream), dump the arcsine
//! count partition, and drive the brute-force verification sweeps.
//!
//! Contract: machine-readable output (JSON, ledger, CSV, dump) goes to
//! standard output or `--out`; diagnostics go to standard error; identical
//! inputs and configuration produce byte-identical output. Exit code 0
//! means every check passed or was skipped, 1 means a verification FAIL,
//! 2 means the run itself could not proceed (usage, config, input, or
//! resource error).

use berndef::bits::BitString;
use berndef::codes::ProviderRegistry;
use berndef::deficiency::{decomposition_audit, DeficiencyReport, EngineConfig, GridSpec};
use berndef::error::{Error, Result};
use berndef::exact;
use berndef::oracle::{self, SweepMode, SweepSpec};
use berndef::partition::{build_partition, cell_width_ratio, max_anchor_index, Partition};
use berndef::rtest::{RandomnessTest, TestKind, TestRegistry};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use std::collections::BTreeMap;
use std::io::Read as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Whole-sequence audits above this length are refused: the exact grid
/// pass is quadratic-ish in n and an operator almost always wants
/// `--window` instead.
const ANALYZE_N_CAP: u64 = 10_000;
/// Above this length `partition` prints the header only (plus any
/// `--cell-of` query); the full dump would be thousands of lines.
const LAZY_PARTITION_THRESHOLD: u64 = 1_000_000;
const PARTITION_N_CAP: u64 = 1_000_000_000;
/// `audit` = `analyze` with this window when none is given.
const DEFAULT_WINDOW: (usize, usize) = (256, 128);

#[derive(Parser)]
#[command(
    name = "berndef",
    version,
    about = "Randomness-deficiency estimation for finite binary sequences under Bernoulli models"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    #[command(flatten)]
    global: GlobalOpts,
}

#[derive(Args, Clone)]
struct GlobalOpts {
    /// Code-length provider: fixed-index, kt, markov-kt, elias, or a
    /// configured compressor:<name>
    #[arg(long, global = true, value_name = "NAME")]
    code: Option<String>,

    /// Comma-separated test names for verification sweeps (default: all
    /// registered tests)
    #[arg(long, global = true, value_name = "NAMES")]
    tests: Option<String>,

    /// Parameter grid: arcsine | uniform:N | list:p1,p2,... (rationals;
    /// must include 0 and 1)
    #[arg(long, global = true, value_name = "SPEC")]
    grid: Option<String>,

    /// Fractional bits for dyadic grid and estimator values (min 64)
    #[arg(long, global = true, value_name = "BITS")]
    precision_bits: Option<u32>,

    /// Machine-readable JSON output (JSON Lines for multi-report runs)
    #[arg(long, global = true)]
    json: bool,

    /// Seed for sampled verification draws (mandatory with --sampled)
    #[arg(long, global = true, value_name = "SEED")]
    seed: Option<u64>,

    /// KEY=VALUE config file mirroring these flags; flags override it
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Sandwich slack parameter (positive rational)
    #[arg(long, global = true, value_name = "RATIO")]
    epsilon: Option<String>,

    /// Deficiency threshold in bits; adds a `flagged` verdict per report
    #[arg(long, global = true, value_name = "BITS")]
    threshold: Option<f64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Decode sequences and emit full decomposition-audit reports
    Analyze(AnalyzeArgs),
    /// Analyze a stream in sliding windows (defaults to 256:128)
    Audit(AnalyzeArgs),
    /// Dump the arcsine count partition for a length
    Partition(PartitionArgs),
    /// Run brute-force verification sweeps and emit the check ledger
    Verify(VerifyArgs),
}

#[derive(Args)]
#[command(group(clap::ArgGroup::new("input").required(true).args(["bits", "hex", "file"])))]
struct AnalyzeArgs {
    /// Inline sequence as ASCII 0/1
    #[arg(long, value_name = "STRING")]
    bits: Option<String>,

    /// Inline sequence as hex digits (each byte yields 8 bits, MSB first)
    #[arg(long, value_name = "STRING")]
    hex: Option<String>,

    /// Input path, or - for standard input
    #[arg(long, value_name = "PATH")]
    file: Option<PathBuf>,

    /// Input encoding for --file
    #[arg(long, value_enum, default_value_t = InputFormat::Ascii01)]
    format: InputFormat,

    /// Sliding window as LENGTH:STRIDE; the tail is covered by a final
    /// end-anchored window
    #[arg(long, value_name = "L:S")]
    window: Option<String>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum InputFormat {
    /// ASCII '0'/'1' characters; whitespace ignored
    Ascii01,
    /// Hex digits; whitespace ignored
    Hex,
    /// Every input byte yields 8 bits, most significant first
    RawBytesMsbFirst,
}

#[derive(Args)]
struct PartitionArgs {
    /// Sequence length
    n: u64,

    /// Print only the cell containing this count
    #[arg(long, value_name = "K")]
    cell_of: Option<u64>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Enumerate the full outcome space (n <= 14)
    #[arg(long, conflicts_with = "sampled")]
    exhaustive: bool,

    /// Draw this many seeded sequences per length instead of enumerating
    #[arg(long, value_name = "COUNT")]
    sampled: Option<u64>,

    /// Lengths to sweep: a single N or an inclusive range A..B
    #[arg(long, value_name = "RANGE", default_value = "1..8")]
    n: String,

    /// Emit the per-length residual aggregates as CSV instead of the
    /// validity ledger
    #[arg(long)]
    residuals: bool,

    /// Also register a deliberately invalid constant-level-2 test so the
    /// FAIL path and the nonzero exit code can be exercised end to end
    #[arg(long)]
    probe_invalid: bool,

    /// Write output to this file instead of standard output
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let resolved = Resolved::build(&cli.global)?;
    match cli.cmd {
        Cmd::Analyze(args) => cmd_analyze(&args, &resolved, false),
        Cmd::Audit(args) => cmd_analyze(&args, &resolved, true),
        Cmd::Partition(args) => cmd_partition(&args, &resolved),
        Cmd::Verify(args) => cmd_verify(&args, &resolved),
    }
}

/// Flags merged over the config file merged over the defaults.
struct Resolved {
    engine: EngineConfig,
    providers: ProviderRegistry,
    tests: TestRegistry,
    json: bool,
    seed: Option<u64>,
    threshold: Option<f64>,
}

impl Resolved {
    fn build(global: &GlobalOpts) -> Result<Self> {
        let file = match &global.config {
            Some(path) => ConfigFile::load(path)?,
            None => ConfigFile::default(),
        };

        let mut providers = ProviderRegistry::default();
        for (name, argv) in &file.compressors {
            providers.insert_command_backend(name, argv.clone())?;
        }

        let mut engine = EngineConfig::default();
        if let Some(name) = global.code.as_ref().or(file.values.get("code")) {
            engine.code = providers.get(name)?.clone();
        }
        if let Some(spec) = global.grid.as_ref().or(file.values.get("grid")) {
            engine.grid = parse_grid(spec)?;
        }
        if let Some(bits) = global
            .precision_bits
            .map(Ok)
            .or_else(|| file.values.get("precision-bits").map(|v| parse_u32(v, "precision-bits")))
            .transpose()?
        {
            engine.precision_bits = bits;
        }
        if let Some(eps) = global.epsilon.as_ref().or(file.values.get("epsilon")) {
            engine.epsilon = exact::parse_ratio(eps)?;
        }
        engine.validate()?;

        let mut tests = TestRegistry::default();
        if let Some(list) = global.tests.as_ref().or(file.values.get("tests")) {
            let defaults = TestRegistry::default();
            let mut picked = TestRegistry::empty();
            for name in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                picked.register(defaults.get(name)?.clone())?;
            }
            tests = picked;
        }

        let json = global.json
            || matches!(file.values.get("json").map(String::as_str), Some("true") | Some("1"));
        let seed = global
            .seed
            .map(Ok)
            .or_else(|| file.values.get("seed").map(|v| parse_u64(v, "seed")))
            .transpose()?;
        let threshold = global
            .threshold
            .map(Ok)
            .or_else(|| file.values.get("threshold").map(|v| parse_f64(v, "threshold")))
            .transpose()?;

        Ok(Resolved { engine, providers, tests, json, seed, threshold })
    }
}

#[derive(Default)]
struct ConfigFile {
    values: BTreeMap<String, String>,
    compressors: Vec<(String, Vec<String>)>,
}

const CONFIG_KEYS: &[&str] =
    &["code", "tests", "grid", "precision-bits", "json", "seed", "epsilon", "threshold"];

impl ConfigFile {
    fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        let mut out = ConfigFile::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::config(format!("{}:{}: expected KEY=VALUE", path.display(), lineno + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            if let Some(name) = key.strip_prefix("compressor.") {
                let argv: Vec<String> = value.split_whitespace().map(String::from).collect();
                out.compressors.push((name.to_string(), argv));
            } else if CONFIG_KEYS.contains(&key) {
                out.values.insert(key.to_string(), value.to_string());
            } else {
                return Err(Error::config(format!(
                    "{}:{}: unknown key {key:?} (known: {}, compressor.<name>)",
                    path.display(),
                    lineno + 1,
                    CONFIG_KEYS.join(", ")
                )));
            }
        }
        Ok(out)
    }
}

fn parse_u32(v: &str, key: &str) -> Result<u32> {
    v.parse().map_err(|_| Error::config(format!("{key}: not a number: {v:?}")))
}

fn parse_u64(v: &str, key: &str) -> Result<u64> {
    v.parse().map_err(|_| Error::config(format!("{key}: not a number: {v:?}")))
}

fn parse_f64(v: &str, key: &str) -> Result<f64> {
    v.parse().map_err(|_| Error::config(format!("{key}: not a number: {v:?}")))
}

fn parse_grid(spec: &str) -> Result<GridSpec> {
    if spec == "arcsine" {
        return Ok(GridSpec::Arcsine);
    }
    if let Some(steps) = spec.strip_prefix("uniform:") {
        return Ok(GridSpec::Uniform { steps: parse_u64(steps, "grid steps")? });
    }
    if let Some(list) = spec.strip_prefix("list:") {
        let points = list
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(exact::parse_ratio)
            .collect::<Result<Vec<_>>>()?;
        return Ok(GridSpec::Explicit(points));
    }
    Err(Error::config(format!(
        "unknown grid {spec:?} (want arcsine, uniform:N, or list:p1,p2,...)"
    )))
}

// ---------------------------------------------------------------- analyze

fn decode_ascii01(bytes: &[u8]) -> Result<BitString> {
    let mut bits = Vec::with_capacity(bytes.len());
    for (off, &b) in bytes.iter().enumerate() {
        match b {
            b'0' => bits.push(0),
            b'1' => bits.push(1),
            b if b.is_ascii_whitespace() => {}
            _ => {
                return Err(Error::input(format!(
                    "invalid character {:?} at byte offset {off} (want '0', '1', or whitespace)",
                    b as char
                )))
            }
        }
    }
    BitString::from_bits(bits)
}

fn decode_hex(bytes: &[u8]) -> Result<BitString> {
    let mut nibbles = Vec::with_capacity(bytes.len());
    for (off, &b) in bytes.iter().enumerate() {
        match b {
            b'0'..=b'9' => nibbles.push(b - b'0'),
            b'a'..=b'f' => nibbles.push(b - b'a' + 10),
            b'A'..=b'F' => nibbles.push(b - b'A' + 10),
            b if b.is_ascii_whitespace() => {}
            _ => {
                return Err(Error::input(format!(
                    "invalid hex digit {:?} at byte offset {off}",
                    b as char
                )))
            }
        }
    }
    if nibbles.len() % 2 != 0 {
        return Err(Error::input(format!(
            "odd number of hex digits ({}); bytes need two each",
            nibbles.len()
        )));
    }
    let bytes: Vec<u8> = nibbles.chunks(2).map(|pair| (pair[0] << 4) | pair[1]).collect();
    Ok(BitString::from_bytes_msb(&bytes))
}

fn read_source(args: &AnalyzeArgs) -> Result<Vec<u8>> {
    if let Some(s) = &args.bits {
        return Ok(s.clone().into_bytes());
    }
    if let Some(s) = &args.hex {
        return Ok(s.clone().into_bytes());
    }
    let path = args.file.as_ref().expect("clap group guarantees one source");
    if path.as_os_str() == "-" {
        let mut buf = Vec::new();
        std::io::stdin()
            .read_to_end(&mut buf)
            .map_err(|e| Error::input(format!("cannot read standard input: {e}")))?;
        Ok(buf)
    } else {
        std::fs::read(path)
            .map_err(|e| Error::input(format!("cannot read {}: {e}", path.display())))
    }
}

fn decode_input(args: &AnalyzeArgs) -> Result<BitString> {
    let raw = read_source(args)?;
    let format = if args.bits.is_some() {
        InputFormat::Ascii01
    } else if args.hex.is_some() {
        InputFormat::Hex
    } else {
        args.format
    };
    match format {
        InputFormat::Ascii01 => decode_ascii01(&raw),
        InputFormat::Hex => decode_hex(&raw),
        InputFormat::RawBytesMsbFirst => Ok(BitString::from_bytes_msb(&raw)),
    }
}

fn parse_window(spec: &str) -> Result<(usize, usize)> {
    let (l, s) = spec
        .split_once(':')
        .ok_or_else(|| Error::input(format!("window {spec:?}: want LENGTH:STRIDE")))?;
    let l: usize = l.parse().map_err(|_| Error::input(format!("window length {l:?}")))?;
    let s: usize = s.parse().map_err(|_| Error::input(format!("window stride {s:?}")))?;
    if l == 0 || s == 0 {
        return Err(Error::input("window length and stride must be >= 1"));
    }
    Ok((l, s))
}

/// Strided full-length windows plus one end-anchored window covering any
/// leftover tail: ⌈(len−L)/S⌉ + 1 windows in total.
fn window_starts(len: usize, l: usize, s: usize) -> Vec<usize> {
    let mut starts = Vec::new();
    let mut pos = 0;
    while pos + l <= len {
        starts.push(pos);
        pos += s;
    }
    let last = len - l;
    if starts.last() != Some(&last) {
        starts.push(last);
    }
    starts
}

#[derive(Serialize)]
struct WindowMeta {
    start: u64,
    len: u64,
    stride: u64,
}

/// One output record: the engine report plus CLI-level annotations.
#[derive(Serialize)]
struct CliReport<'a> {
    #[serde(flatten)]
    report: &'a DeficiencyReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    window: Option<WindowMeta>,
    #[serde(skip_serializing_if = "Option::is_none")]
    flagged: Option<bool>,
}

fn flag_verdict(report: &DeficiencyReport, threshold: Option<f64>) -> Option<bool> {
    threshold.map(|t| report.d_bern_grid.to_f64() >= t)
}

fn opt_f64(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{v:.6}"),
        None => "-".into(),
    }
}

fn render_text(report: &DeficiencyReport, window: &Option<WindowMeta>, flagged: Option<bool>) -> String {
    let mut out = String::new();
    let x = if report.x.len() <= 64 {
        report.x.clone()
    } else {
        format!("{}... ({} bits)", &report.x[..64], report.x.len())
    };
    out.push_str(&format!("sequence n={} k={} x={x}\n", report.n, report.k));
    if let Some(w) = window {
        out.push_str(&format!("window start={} len={} stride={}\n", w.start, w.len, w.stride));
    }
    out.push_str(&format!("  d_bern_grid          {}\n", report.d_bern_grid));
    out.push_str(&format!("  d_bern_at_estimate   {}\n", report.d_bern_at_estimate));
    out.push_str(&format!("  d_exch               {:.6}\n", report.d_exch));
    out.push_str(&format!("  d_bin_grid           {}\n", report.d_bin_grid));
    out.push_str(&format!(
        "  d_bin_partition      cell={:.6} count={:.6}\n",
        report.d_bin_partition_cell, report.d_bin_partition_count
    ));
    out.push_str(&format!("  residual_thm1        {}\n", opt_f64(report.residual_thm1)));
    out.push_str(&format!("  residual_basis       {}\n", opt_f64(report.residual_basis)));
    out.push_str(&format!("  residual_estimator   {}\n", opt_f64(report.residual_estimator)));
    out.push_str(&format!(
        "  p_star               {:.6}\n  p_hat                {:.6} (a_hat={:.6} half_steps={})\n",
        report.p_star, report.p_hat, report.a_hat, report.half_steps
    ));
    out.push_str(&format!(
        "  sandwich             lower={} upper={}\n",
        opt_f64(report.corollary_lower_slack),
        opt_f64(report.corollary_upper_slack)
    ));
    if let Some(f) = flagged {
        out.push_str(&format!("  flagged              {f}\n"));
    }
    out
}

fn cmd_analyze(args: &AnalyzeArgs, resolved: &Resolved, audit_mode: bool) -> Result<ExitCode> {
    let x = decode_input(args)?;
    if x.is_empty() {
        return Err(Error::input("decoded sequence is empty"));
    }

    let window = match (&args.window, audit_mode) {
        (Some(spec), _) => Some(parse_window(spec)?),
        (None, true) => {
            // audit default, shrunk to the input when the stream is short
            let l = DEFAULT_WINDOW.0.min(x.len());
            let s = DEFAULT_WINDOW.1.min(l);
            Some((l, s))
        }
        (None, false) => None,
    };

    let mut jobs: Vec<(Option<WindowMeta>, BitString)> = Vec::new();
    match window {
        None => {
            if x.len() as u64 > ANALYZE_N_CAP {
                return Err(Error::resource(format!(
                    "whole-sequence audit capped at n <= {ANALYZE_N_CAP} (got {}); use --window",
                    x.len()
                )));
            }
            jobs.push((None, x));
        }
        Some((l, s)) => {
            if l > x.len() {
                return Err(Error::input(format!(
                    "window length {l} exceeds decoded length {}",
                    x.len()
                )));
            }
            for start in window_starts(x.len(), l, s) {
                let meta =
                    WindowMeta { start: start as u64, len: l as u64, stride: s as u64 };
                jobs.push((Some(meta), x.window(start, l)?));
            }
        }
    }

    let mut stdout = String::new();
    for (meta, seq) in &jobs {
        let report = decomposition_audit(seq, &resolved.engine)?;
        let flagged = flag_verdict(&report, resolved.threshold);
        if resolved.json {
            let record = CliReport { report: &report, window: meta_clone(meta), flagged };
            stdout.push_str(&serde_json::to_string(&record).expect("report serializes"));
            stdout.push('\n');
        } else {
            stdout.push_str(&render_text(&report, meta, flagged));
        }
    }
    print!("{stdout}");
    Ok(ExitCode::SUCCESS)
}

fn meta_clone(meta: &Option<WindowMeta>) -> Option<WindowMeta> {
    meta.as_ref().map(|w| WindowMeta { start: w.start, len: w.len, stride: w.stride })
}

// --------------------------------------------------------------- partition

fn cell_ratio_str(partition: &Partition, lo: u64, hi: u64) -> String {
    // ratio undefined at the endpoint singletons; interior cells use their
    // midpoint count
    let n = partition.n;
    if lo == 0 || hi >= n {
        return "-".into();
    }
    match cell_width_ratio(partition, (lo + hi) / 2) {
        Ok(r) => format!("{r:.6}"),
        Err(_) => "-".into(),
    }
}

fn cmd_partition(args: &PartitionArgs, resolved: &Resolved) -> Result<ExitCode> {
    let n = args.n;
    if n == 0 {
        return Err(Error::input("partition needs n >= 1"));
    }
    if n > PARTITION_N_CAP {
        return Err(Error::input(format!("partition capped at n <= {PARTITION_N_CAP}")));
    }
    let partition = build_partition(n)?;
    let lazy = n > LAZY_PARTITION_THRESHOLD && args.cell_of.is_none();

    if resolved.json {
        let mut cells = Vec::new();
        let dump: Box<dyn Iterator<Item = &berndef::partition::Cell>> = match args.cell_of {
            Some(k) => {
                let cell = partition.cell_of(k)?;
                cells.push(cell);
                Box::new(cells.iter())
            }
            None if n > LAZY_PARTITION_THRESHOLD => Box::new(std::iter::empty()),
            None => Box::new(partition.cells().iter()),
        };
        let cell_objs: Vec<serde_json::Value> = dump
            .map(|c| {
                serde_json::json!({
                    "s_index": c.s_index,
                    "lo": c.lo,
                    "hi": c.hi,
                    "width": c.len(),
                    "width_ratio": cell_ratio_str(&partition, c.lo, c.hi),
                })
            })
            .collect();
        let obj = serde_json::json!({
            "n": n,
            "num_cells": partition.num_cells(),
            "max_anchor_index": max_anchor_index(n),
            "lazy": lazy,
            "cells": cell_objs,
        });
        println!("{}", serde_json::to_string(&obj).expect("dump serializes"));
        return Ok(ExitCode::SUCCESS);
    }

    println!(
        "partition n={} num_cells={} max_anchor_index={}",
        n,
        partition.num_cells(),
        max_anchor_index(n)
    );
    if let Some(k) = args.cell_of {
        let c = partition.cell_of(k)?;
        println!(
            "{} {} {} {} {}",
            c.s_index,
            c.lo,
            c.hi,
            c.len(),
            cell_ratio_str(&partition, c.lo, c.hi)
        );
    } else if !lazy {
        for c in partition.cells() {
            println!(
                "{} {} {} {} {}",
                c.s_index,
                c.lo,
                c.hi,
                c.len(),
                cell_ratio_str(&partition, c.lo, c.hi)
            );
        }
    }
    Ok(ExitCode::SUCCESS)
}

// ------------------------------------------------------------------ verify

fn parse_n_range(spec: &str) -> Result<Vec<u64>> {
    let parse_one = |s: &str| -> Result<u64> {
        s.trim().parse().map_err(|_| Error::input(format!("bad length {s:?} in --n")))
    };
    if let Some((a, b)) = spec.split_once("..") {
        let (a, b) = (parse_one(a)?, parse_one(b)?);
        if a == 0 || a > b {
            return Err(Error::input(format!("bad range {spec:?}: want 1 <= A <= B")));
        }
        Ok((a..=b).collect())
    } else {
        Ok(vec![parse_one(spec)?])
    }
}

fn emit(out: &Option<PathBuf>, content: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, content)
            .map_err(|e| Error::input(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn cmd_verify(args: &VerifyArgs, resolved: &Resolved) -> Result<ExitCode> {
    let n_range = parse_n_range(&args.n)?;
    let mode = match (args.exhaustive, args.sampled) {
        (true, None) => SweepMode::Exhaustive,
        (false, Some(count)) => {
            let seed = resolved.seed.ok_or_else(|| {
                Error::config("sampled mode needs --seed (the draws are recorded by seed)")
            })?;
            SweepMode::Sampled { count, seed }
        }
        (false, None) => {
            return Err(Error::config("choose a mode: --exhaustive or --sampled COUNT"))
        }
        (true, Some(_)) => unreachable!("clap conflicts_with"),
    };
    let spec = SweepSpec { n_range, p_grid: oracle::default_p_grid(), mode };

    if args.residuals {
        let rows = oracle::run_residual_sweep(&spec, &resolved.engine)?;
        let content = if resolved.json {
            let objs: Vec<serde_json::Value> = rows
                .iter()
                .map(|r| {
                    serde_json::json!({
                        "n": r.n,
                        "samples": r.samples,
                        "max_abs_residual_thm1": r.max_abs_residual_thm1,
                        "mean_abs_residual_thm1": r.mean_abs_residual_thm1,
                        "max_abs_residual_basis": r.max_abs_residual_basis,
                        "max_estimator_gap": r.max_estimator_gap,
                        "p_grid_size": r.p_grid_size,
                    })
                })
                .collect();
            format!("{}\n", serde_json::to_string(&objs).expect("rows serialize"))
        } else {
            oracle::residual_csv(&rows)
        };
        emit(&args.out, &content)?;
        return Ok(ExitCode::SUCCESS);
    }

    let ledger = if args.probe_invalid {
        // an honestly invalid test (constant level 2 has E 2^T = 4 > 1),
        // registered so operators can watch the FAIL path really fire
        let mut probed = resolved.tests.clone();
        probed.register(RandomnessTest::new("invalid-probe", TestKind::Constant(2)))?;
        oracle::run_validity_sweep(&spec, &probed, &resolved.providers)?
    } else {
        oracle::run_validity_sweep(&spec, &resolved.tests, &resolved.providers)?
    };
    let content = if resolved.json {
        let obj = serde_json::json!({
            "header": ledger.header,
            "checks": ledger.checks.iter().map(|c| c.to_string()).collect::<Vec<_>>(),
            "ok": !ledger.any_fail(),
        });
        format!("{}\n", serde_json::to_string(&obj).expect("ledger serializes"))
    } else {
        ledger.render()
    };
    emit(&args.out, &content)?;
    Ok(if ledger.any_fail() { ExitCode::from(1) } else { ExitCode::SUCCESS })
}
