use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand};
use lzae::bench::{run_bench, BenchReport, MIN_REPETITIONS};
use lzae::corpus::{Corpus, CorpusKind};
use lzae::frame::FrameFlags;
use lzae::pipeline::{default_workers, run_pack, run_unpack, PipelineConfig, StageStats, DEFAULT_CHUNK_SIZE};
use lzae::{selftest, Error, Stage};

/// Compress-then-encrypt packer: LZ4 blocks sealed with AES-128 in counter mode.
#[derive(Parser)]
#[command(name = "lzae", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compress and encrypt a file or standard input.
    Pack(StreamArgs),
    /// Decrypt and decompress a frame.
    Unpack(StreamArgs),
    /// Measure ratio and pack/unpack throughput on generated corpora.
    Bench(BenchArgs),
    /// Run the built-in known-answer and round-trip checks.
    Selftest,
}

#[derive(Args)]
#[command(group(ArgGroup::new("key").required(true).args(["key_hex", "key_file", "key_env"])))]
struct StreamArgs {
    /// Input file; standard input when omitted or "-".
    input: Option<PathBuf>,
    /// Output file; standard output when omitted or "-".
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Key as 32 hex characters.
    #[arg(long, value_name = "HEX")]
    key_hex: Option<String>,
    /// File holding the key as 32 hex characters.
    #[arg(long, value_name = "PATH")]
    key_file: Option<PathBuf>,
    /// Environment variable holding the key as 32 hex characters.
    #[arg(long, value_name = "NAME")]
    key_env: Option<String>,
    #[command(flatten)]
    tuning: Tuning,
    /// Omit per-block checksums (pack only).
    #[arg(long)]
    no_block_checksums: bool,
    /// Omit the whole-stream checksum (pack only).
    #[arg(long)]
    no_content_checksum: bool,
    /// Print stage statistics to standard error.
    #[arg(long)]
    stats: bool,
    /// Write per-block stage timestamps as JSON lines to this file.
    #[arg(long, value_name = "PATH")]
    events: Option<PathBuf>,
}

#[derive(Args)]
struct Tuning {
    /// Plaintext bytes per block, e.g. 4MiB or 65536.
    #[arg(long, value_parser = parse_bytes)]
    chunk_size: Option<usize>,
    /// Cipher worker threads.
    #[arg(long)]
    workers: Option<usize>,
    /// Blocks queued between the sequential stage and the workers.
    #[arg(long)]
    queue_cap: Option<usize>,
}

#[derive(Args)]
struct BenchArgs {
    /// Corpus kinds: zeros, uniform_random, markov_text.
    #[arg(long, value_delimiter = ',', default_value = "zeros,markov_text,uniform_random")]
    corpus: Vec<String>,
    /// Corpus size, e.g. 64MiB.
    #[arg(long, value_parser = parse_bytes, default_value = "16MiB")]
    size: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Worker counts, one row each; defaults to 1 and the machine's default.
    #[arg(long, value_delimiter = ',')]
    workers: Vec<usize>,
    #[arg(long, value_parser = parse_bytes)]
    chunk_size: Option<usize>,
    #[arg(long, default_value_t = MIN_REPETITIONS)]
    reps: usize,
    /// Write the table here instead of standard output.
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Also write one JSON record per row to this file.
    #[arg(long, value_name = "PATH")]
    json: Option<PathBuf>,
}

fn parse_bytes(s: &str) -> Result<usize, String> {
    let n = parse_size::parse_size(s).map_err(|e| e.to_string())?;
    usize::try_from(n).map_err(|_| format!("{s} does not fit in memory"))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Pack(args) => stream(args, Mode::Pack),
        Command::Unpack(args) => stream(args, Mode::Unpack),
        Command::Bench(args) => bench(args),
        Command::Selftest => return selftest_cmd(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("lzae: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Mode {
    Pack,
    Unpack,
}

fn read_key(args: &StreamArgs) -> Result<[u8; 16], Error> {
    let (text, source) = if let Some(h) = &args.key_hex {
        (h.clone(), "--key-hex".to_string())
    } else if let Some(path) = &args.key_file {
        let bytes = std::fs::read(path).map_err(|e| Error::Config(format!("cannot read key file {}: {e}", path.display())))?;
        (
            String::from_utf8_lossy(&bytes).into_owned(),
            format!("key file {}", path.display()),
        )
    } else if let Some(name) = &args.key_env {
        let v = std::env::var(name).map_err(|_| Error::Config(format!("environment variable {name} is not set")))?;
        (v, format!("environment variable {name}"))
    } else {
        unreachable!("clap requires one key source");
    };
    let text = text.trim();
    let key = hex::decode(text).map_err(|e| {
        Error::Config(format!(
            "{source}: key must be 16 bytes written as 32 hex characters ({e}; got {} characters)",
            text.len()
        ))
    })?;
    let len = key.len();
    key.try_into().map_err(|_| Error::KeyLength(len))
}

fn config(t: &Tuning) -> PipelineConfig {
    let mut cfg = PipelineConfig::default().with_chunk_size(t.chunk_size.unwrap_or(DEFAULT_CHUNK_SIZE));
    if let Some(w) = t.workers {
        cfg = cfg.with_workers(w);
    }
    if let Some(q) = t.queue_cap {
        cfg = cfg.with_queue_capacity(q);
    }
    cfg
}

fn is_stdio(p: &Option<PathBuf>) -> bool {
    p.as_deref().is_none_or(|p| p == Path::new("-"))
}

fn open_input(path: &Option<PathBuf>) -> Result<Box<dyn Read + Send>, Error> {
    if is_stdio(path) {
        return Ok(Box::new(io::stdin()));
    }
    let path = path.as_ref().unwrap();
    let f = File::open(path).map_err(|e| io_error(Stage::Read, path, e))?;
    Ok(Box::new(BufReader::with_capacity(1 << 20, f)))
}

fn io_error(stage: Stage, path: &Path, e: io::Error) -> Error {
    Error::Io {
        stage,
        source: io::Error::new(e.kind(), format!("{}: {e}", path.display())),
    }
}

fn stream(args: StreamArgs, mode: Mode) -> Result<(), Error> {
    let key = read_key(&args)?;
    let mut cfg = config(&args.tuning);
    cfg.flags = FrameFlags {
        block_checksums: !args.no_block_checksums,
        content_checksum: !args.no_content_checksum,
    };
    cfg.record_events = args.events.is_some();
    let input = open_input(&args.input)?;

    let stats = if is_stdio(&args.out) {
        let mut sink = BufWriter::with_capacity(1 << 20, io::stdout().lock());
        run(mode, input, &key, &cfg, &mut sink)?
    } else {
        let path = args.out.as_ref().unwrap();
        let file = File::create(path).map_err(|e| io_error(Stage::Write, path, e))?;
        let mut sink = BufWriter::with_capacity(1 << 20, file);
        match run(mode, input, &key, &cfg, &mut sink).and_then(|s| {
            sink.flush().map_err(|e| io_error(Stage::Write, path, e))?;
            Ok(s)
        }) {
            Ok(s) => s,
            Err(e) => {
                // Never leave a partial or wrongly decrypted file behind.
                drop(sink);
                let _ = std::fs::remove_file(path);
                return Err(e);
            }
        }
    };

    if args.stats {
        eprintln!("{}", stats.summary());
    }
    if let Some(path) = &args.events {
        let mut lines = String::new();
        for e in &stats.events {
            lines.push_str(&e.to_json_line(stats.direction));
            lines.push('\n');
        }
        std::fs::write(path, lines).map_err(|e| io_error(Stage::Write, path, e))?;
    }
    Ok(())
}

fn run(
    mode: Mode,
    input: Box<dyn Read + Send>,
    key: &[u8],
    cfg: &PipelineConfig,
    sink: &mut impl Write,
) -> Result<StageStats, Error> {
    let stats = match mode {
        Mode::Pack => run_pack(input, key, cfg, &mut *sink)?,
        Mode::Unpack => run_unpack(input, key, cfg, &mut *sink)?,
    };
    sink.flush().map_err(|e| Error::Io {
        stage: Stage::Write,
        source: e,
    })?;
    Ok(stats)
}

fn bench(args: BenchArgs) -> Result<(), Error> {
    let kinds = args
        .corpus
        .iter()
        .map(|k| k.parse::<CorpusKind>())
        .collect::<Result<Vec<_>, _>>()?;
    let workers = if args.workers.is_empty() {
        let mut w = vec![1, default_workers()];
        w.dedup();
        w
    } else {
        args.workers
    };
    let chunk = args.chunk_size.unwrap_or(DEFAULT_CHUNK_SIZE);
    let mut rows = Vec::new();
    for kind in kinds {
        let corpus = Corpus::new(kind, args.size, args.seed);
        for &w in &workers {
            let cfg = PipelineConfig::default().with_chunk_size(chunk).with_workers(w);
            rows.push(run_bench(&corpus, &cfg, args.reps)?);
        }
    }
    let report = BenchReport::new(rows);
    let write = |path: &Path, text: String| std::fs::write(path, text).map_err(|e| io_error(Stage::Write, path, e));
    match &args.out {
        Some(path) => write(path, report.to_table())?,
        None => print!("{}", report.to_table()),
    }
    if let Some(path) = &args.json {
        write(path, report.to_json_lines())?;
    }
    Ok(())
}

fn selftest_cmd() -> ExitCode {
    let mut out = io::stdout().lock();
    match selftest::run_all(&mut out) {
        Ok(()) => {
            let _ = writeln!(out, "selftest passed");
            ExitCode::SUCCESS
        }
        Err(failure) => {
            let _ = out.flush();
            eprintln!("lzae: {failure}");
            ExitCode::from(2)
        }
    }
}
