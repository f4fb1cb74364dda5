use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use seqblock::chain::{build_chain, Boundary, ChainOptions};
use seqblock::dl::{baseline_plain_dl, KPrior, Partition, PriorConfig, Units};
use seqblock::edges::{ingest_edge_stream, parse_edge_tsv, EdgeStream};
use seqblock::generate::{generate_sequence, Constraints};
use seqblock::inference::{fit_chain, order_scan, ChainState, FitConfig, FitResult, WaitConfig};
use seqblock::predict::{holdout_bound, temporal_holdout_bound, SplitSpec};
use seqblock::report::{order_table_tsv, partition_tsv, temporal_partition_tsv, DatasetDigest, ReportConfig, RunReport};
use seqblock::sequence::{annotate_epochs, parse_epochs, parse_records, parse_waits, tokenize_records, write_sequence};
use seqblock::sequence::{SeparatorPolicy, Sequence};
use seqblock::temporal::{joint_fit, TemporalConfig};
use seqblock::waits::WaitMode;
use seqblock::{Error, Result};

/// Community structure in Markov chains and temporal networks by minimum
/// description length.
#[derive(Parser)]
#[command(name = "seqblock", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a token sequence.
    Fit(FitArgs),
    /// Fit a temporal network given as an edge TSV.
    Temporal(TemporalArgs),
    /// Held-out predictive bound on a contiguous split.
    Predict(PredictArgs),
    /// Sample a sequence with the block counts of a fit.
    Generate(GenerateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum KPriorArg {
    Uniform,
    Hyperprior,
}

#[derive(Clone, Copy, ValueEnum)]
enum UnitsArg {
    Nats,
    Bits,
}

#[derive(Clone, Copy, ValueEnum)]
enum WaitModeArg {
    PerMemory,
    PerGroup,
}

#[derive(Clone, Copy, ValueEnum)]
enum SeparatorArg {
    /// Insert separators only when the file has more than one record.
    Auto,
    Insert,
    None,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum SimultaneousArg {
    /// Keep the file order.
    Input,
    /// Sort each run of simultaneous tokens by name.
    Alphabetical,
}

#[derive(Clone, Copy, ValueEnum)]
enum BoundaryArg {
    Prefix,
    Cyclic,
}

#[derive(Args, Clone)]
struct Common {
    /// Base seed; restarts derive their own seeds from it.
    #[arg(long, env = "SEQBLOCK_SEED", default_value_t = 42)]
    seed: u64,
    /// Independent searches; the best is kept.
    #[arg(long, default_value_t = 4)]
    restarts: usize,
    #[arg(long, value_enum, default_value_t = KPriorArg::Hyperprior)]
    k_prior: KPriorArg,
    /// Units of the reported total and tables.
    #[arg(long, value_enum, default_value_t = UnitsArg::Nats)]
    units: UnitsArg,
    /// Share one partition between tokens and memories (order 1 only).
    #[arg(long)]
    unified: bool,
    /// Write the JSON report here instead of stdout.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Write the `item<TAB>group` partition dump here.
    #[arg(long)]
    partition: Option<PathBuf>,
    /// Re-read the written report and recompute its total from the data.
    #[arg(long)]
    verify: bool,
    /// Record per-phase wall-clock timings in the report.
    #[arg(long)]
    profile: bool,
}

#[derive(Args, Clone)]
struct SeqInput {
    /// Sequence file: one record per line, whitespace-separated tokens.
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = SeparatorArg::Auto)]
    separator: SeparatorArg,
    /// Truncate memories at separator tokens.
    #[arg(long)]
    reset_at_separator: bool,
    #[arg(long, value_enum, default_value_t = BoundaryArg::Prefix)]
    boundary: BoundaryArg,
    /// Epoch label per token; tokens become (token, epoch) pairs.
    #[arg(long)]
    epochs: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    data: SeqInput,
    #[command(flatten)]
    common: Common,
    /// Chain order.
    #[arg(long, default_value_t = 1, conflicts_with = "order_scan")]
    order: usize,
    /// Fit every order in `a..b` and keep the shortest description.
    #[arg(long, value_parser = parse_range)]
    order_scan: Option<(usize, usize)>,
    /// Waiting times, one per transition.
    #[arg(long)]
    waits: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = WaitModeArg::PerMemory, requires = "waits")]
    wait_mode: WaitModeArg,
    /// Model log-waits above a floor instead of raw waits.
    #[arg(long, requires = "waits")]
    bursty: bool,
    /// Order of tokens sharing a timestamp (zero waits).
    #[arg(long, value_enum, default_value_t = SimultaneousArg::Input, requires = "waits")]
    simultaneous: SimultaneousArg,
    /// Evaluate a fixed partition with this many groups instead of searching
    /// (only 1 is supported).
    #[arg(long)]
    groups: Option<usize>,
    /// Write the order table as TSV (with --order-scan).
    #[arg(long)]
    table: Option<PathBuf>,
}

#[derive(Args)]
struct TemporalArgs {
    /// Edge TSV: `source<TAB>target[<TAB>time]`.
    input: PathBuf,
    #[command(flatten)]
    common: Common,
    /// Order of the label chain; 0 fits the static model.
    #[arg(long, default_value_t = 1)]
    order: usize,
    #[arg(long)]
    directed: bool,
}

#[derive(Args)]
struct PredictArgs {
    /// A sequence file, or an edge TSV with --temporal.
    input: PathBuf,
    #[command(flatten)]
    common: Common,
    /// Fraction of events used for training.
    #[arg(long, default_value_t = 0.5)]
    split: f64,
    #[arg(long, default_value_t = 1)]
    order: usize,
    /// Treat the input as an edge stream.
    #[arg(long)]
    temporal: bool,
    #[arg(long, requires = "temporal")]
    directed: bool,
    #[arg(long, value_enum, default_value_t = SeparatorArg::Auto)]
    separator: SeparatorArg,
}

#[derive(Args)]
struct GenerateArgs {
    /// Constraint file (JSON) written by --save-constraints or by hand.
    #[arg(long, conflicts_with_all = ["report", "input"])]
    constraints: Option<PathBuf>,
    /// A fit report whose partition supplies the block counts.
    #[arg(long, requires = "input")]
    report: Option<PathBuf>,
    /// The sequence the report was fitted on.
    #[arg(long, requires = "report")]
    input: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = SeparatorArg::Auto)]
    separator: SeparatorArg,
    /// Also write the constraints used as JSON.
    #[arg(long)]
    save_constraints: Option<PathBuf>,
    #[arg(long, env = "SEQBLOCK_SEED", default_value_t = 42)]
    seed: u64,
    /// Restarts allowed when the sampler reaches a dead end.
    #[arg(long, default_value_t = 1000)]
    max_attempts: usize,
    /// Output sequence file; stdout when absent.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

fn parse_range(s: &str) -> std::result::Result<(usize, usize), String> {
    let (a, b) = s.split_once("..").ok_or("expected a..b")?;
    let a: usize = a.trim().parse().map_err(|e| format!("{e}"))?;
    let b: usize = b.trim().parse().map_err(|e| format!("{e}"))?;
    if a == 0 || b < a {
        return Err(format!("invalid order range {a}..{b}"));
    }
    Ok((a, b))
}

/// Phase timings collected with --profile.
struct Profile {
    on: bool,
    last: Instant,
    phases: BTreeMap<String, f64>,
}

impl Profile {
    fn new(on: bool) -> Self {
        Profile {
            on,
            last: Instant::now(),
            phases: BTreeMap::new(),
        }
    }

    fn mark(&mut self, phase: &str) {
        let now = Instant::now();
        *self.phases.entry(phase.to_string()).or_insert(0.0) += (now - self.last).as_secs_f64();
        self.last = now;
    }

    fn finish(self) -> Option<BTreeMap<String, f64>> {
        self.on.then_some(self.phases)
    }
}

impl Common {
    fn units(&self) -> Units {
        match self.units {
            UnitsArg::Nats => Units::Nats,
            UnitsArg::Bits => Units::Bits,
        }
    }

    fn fit_config(&self, order: usize) -> FitConfig {
        FitConfig {
            seed: self.seed,
            restarts: self.restarts,
            unified: self.unified,
            order,
            prior: PriorConfig {
                k_prior: match self.k_prior {
                    KPriorArg::Uniform => KPrior::Uniform,
                    KPriorArg::Hyperprior => KPrior::Hyperprior,
                },
            },
            ..FitConfig::default()
        }
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Input(format!("{}: {e}", path.display())))
}

fn write_or_print(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => Ok(std::fs::write(p, text)?),
        None => {
            let mut out = std::io::stdout().lock();
            let res = out
                .write_all(text.as_bytes())
                .and_then(|_| if text.ends_with('\n') { Ok(()) } else { out.write_all(b"\n") })
                .and_then(|_| out.flush());
            match res {
                // a closed pipe (`| head`) is not an error
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
                r => Ok(r?),
            }
        }
    }
}

fn read_sequence(path: &Path, sep: SeparatorArg) -> Result<Sequence> {
    let text = read(path)?;
    let records = parse_records(&text);
    let policy = match sep {
        SeparatorArg::Insert => SeparatorPolicy::InsertSeparator,
        SeparatorArg::None => SeparatorPolicy::None,
        SeparatorArg::Auto if records.len() > 1 => SeparatorPolicy::InsertSeparator,
        SeparatorArg::Auto => SeparatorPolicy::None,
    };
    tokenize_records(&records, policy)
}

fn read_stream(path: &Path, directed: bool) -> Result<EdgeStream> {
    ingest_edge_stream(&parse_edge_tsv(&read(path)?)?, directed)
}

impl SeqInput {
    fn load(&self) -> Result<Sequence> {
        let seq = read_sequence(&self.input, self.separator)?;
        match &self.epochs {
            Some(p) => annotate_epochs(&seq, &parse_epochs(&read(p)?)),
            None => Ok(seq),
        }
    }

    fn chain_options(&self) -> ChainOptions {
        ChainOptions {
            boundary: match self.boundary {
                BoundaryArg::Prefix => Boundary::ConditionOnPrefix,
                BoundaryArg::Cyclic => Boundary::Cyclic,
            },
            reset_at_separator: self.reset_at_separator,
            prefix: 0,
        }
    }
}

fn emit(report: &mut RunReport, common: &Common, started: Instant, profile: Profile) -> Result<RunReport> {
    report.profile = profile.finish();
    report.wall_seconds = started.elapsed().as_secs_f64();
    let json = report.to_json()?;
    write_or_print(common.out.as_deref(), &json)?;
    // what was written must read back and re-verify
    RunReport::from_json(&json)
}

fn run_fit(args: FitArgs, command: Vec<String>) -> Result<()> {
    let started = Instant::now();
    let mut prof = Profile::new(args.common.profile);
    let c = &args.common;
    let order = args.order_scan.map_or(args.order, |(_, hi)| hi);
    if c.unified && (order != 1 || args.order_scan.is_some_and(|(lo, _)| lo != 1)) {
        return Err(Error::Usage("--unified requires order 1".into()));
    }
    if args.groups.is_some_and(|g| g != 1) {
        return Err(Error::Usage("--groups supports only 1".into()));
    }
    if args.groups.is_some() && args.order_scan.is_some() {
        return Err(Error::Usage("--groups cannot be combined with --order-scan".into()));
    }
    let mut seq = args.data.load()?;
    let wait = match &args.waits {
        Some(p) => {
            seq = seq.with_waits(parse_waits(&read(p)?)?)?;
            if args.simultaneous == SimultaneousArg::Alphabetical {
                seq.sort_simultaneous();
            }
            Some(WaitConfig {
                mode: match args.wait_mode {
                    WaitModeArg::PerMemory => WaitMode::PerMemory,
                    WaitModeArg::PerGroup => WaitMode::PerGroup,
                },
                bursty: args.bursty,
                ..WaitConfig::default()
            })
        }
        None => None,
    };
    prof.mark("read");
    let mut cfg = c.fit_config(args.order);
    cfg.chain = args.data.chain_options();
    if let Some((_, hi)) = args.order_scan {
        // the scan conditions every order on the same prefix; record it for --verify
        cfg.chain.prefix = hi;
    }
    let fit = match (args.order_scan, args.groups) {
        (Some((lo, hi)), _) => order_scan(&seq, lo..=hi, &cfg, wait.as_ref())?,
        (None, groups) => {
            let chain = build_chain(&seq, cfg.order, cfg.chain)?;
            let stats = match &wait {
                Some(w) => Some((w.stats(&chain, &seq)?, w.mode)),
                None => None,
            };
            let waits = stats.as_ref().map(|(s, m)| (s, *m));
            prof.mark("count_build");
            match groups {
                Some(_) => fixed_fit(&chain, &cfg, waits)?,
                None => fit_chain(&chain, waits, &cfg)?,
            }
        }
    };
    prof.mark("search");
    let chain = build_chain(&seq, fit.order, cfg.chain)?;
    if let Some(p) = &args.common.partition {
        std::fs::write(p, partition_tsv(&chain, &fit.partition, &seq.alphabet))?;
    }
    if let (Some(p), Some(rows)) = (&args.table, &fit.order_table) {
        std::fs::write(p, order_table_tsv(rows, c.units()))?;
    }
    let config = ReportConfig {
        fit: cfg,
        waits: wait,
        split: None,
        order_range: args.order_scan,
    };
    let mut report = RunReport::from_fit(command, config, DatasetDigest::of_chain(&seq, &chain), c.units(), &fit);
    prof.mark("report");
    let back = emit(&mut report, c, started, prof)?;
    if c.verify {
        back.verify_sequence(&seq)?;
    }
    Ok(())
}

/// Evaluates the single-group partition without searching.
fn fixed_fit(
    chain: &seqblock::chain::ChainCounts,
    cfg: &FitConfig,
    waits: Option<(&seqblock::waits::WaitStats, WaitMode)>,
) -> Result<FitResult> {
    let part = Partition::trivial(chain, cfg.unified)?;
    let st = ChainState::new(chain, &part, cfg.prior, waits)?;
    let breakdown = st.breakdown()?;
    Ok(FitResult {
        order: chain.order(),
        num_token_groups: part.num_token_groups(),
        num_memory_groups: part.num_memory_groups(),
        partition: part,
        breakdown,
        accept_rate: 0.0,
        baseline: baseline_plain_dl(chain),
        order_table: None,
        seed: cfg.seed,
        restarts: 0,
        trace: vec![breakdown.total],
    })
}

fn run_temporal(args: TemporalArgs, command: Vec<String>) -> Result<()> {
    let started = Instant::now();
    let mut prof = Profile::new(args.common.profile);
    let c = &args.common;
    if c.unified && args.order != 1 {
        return Err(Error::Usage("--unified requires order 1".into()));
    }
    let stream = read_stream(&args.input, args.directed)?;
    prof.mark("read");
    let cfg = TemporalConfig {
        order: args.order,
        fit: c.fit_config(args.order.max(1)),
        ..TemporalConfig::default()
    };
    let fit = joint_fit(&stream, &cfg)?;
    prof.mark("search");
    if let Some(p) = &c.partition {
        std::fs::write(p, temporal_partition_tsv(&stream, &fit))?;
    }
    let config = ReportConfig {
        fit: cfg.fit,
        waits: None,
        split: None,
        order_range: None,
    };
    let mut report = RunReport::from_temporal(command, config, DatasetDigest::of_stream(&stream), c.units(), &fit);
    prof.mark("report");
    let back = emit(&mut report, c, started, prof)?;
    if c.verify {
        back.verify_stream(&stream)?;
    }
    Ok(())
}

fn run_predict(args: PredictArgs, command: Vec<String>) -> Result<()> {
    let started = Instant::now();
    let mut prof = Profile::new(args.common.profile);
    let c = &args.common;
    if c.unified && args.order != 1 {
        return Err(Error::Usage("--unified requires order 1".into()));
    }
    let split = SplitSpec::new(args.split).map_err(|e| Error::Usage(e.to_string()))?;
    let (holdout, dataset, fit) = if args.temporal {
        let stream = read_stream(&args.input, args.directed)?;
        prof.mark("read");
        let cfg = TemporalConfig {
            order: args.order,
            fit: c.fit_config(args.order.max(1)),
            ..TemporalConfig::default()
        };
        let h = temporal_holdout_bound(&stream, split, &cfg)?;
        (h, DatasetDigest::of_stream(&stream), cfg.fit)
    } else {
        if args.order == 0 {
            return Err(Error::Usage("sequence chains need order >= 1".into()));
        }
        let seq = read_sequence(&args.input, args.separator)?;
        prof.mark("read");
        let cfg = c.fit_config(args.order);
        let h = holdout_bound(&seq, split, &cfg)?;
        let chain = build_chain(&seq, args.order, cfg.chain)?;
        (h, DatasetDigest::of_chain(&seq, &chain), cfg)
    };
    prof.mark("fit");
    let config = ReportConfig {
        fit,
        waits: None,
        split: Some(split),
        order_range: None,
    };
    let mut report = RunReport::from_holdout(command, config, dataset, c.units(), args.order, holdout);
    emit(&mut report, c, started, prof)?;
    Ok(())
}

fn run_generate(args: GenerateArgs) -> Result<()> {
    let constraints: Constraints = match (&args.constraints, &args.report, &args.input) {
        (Some(p), _, _) => {
            let mut c: Constraints = serde_json::from_str(&read(p)?)?;
            c.alphabet.reindex();
            c
        }
        (None, Some(r), Some(i)) => {
            let report = RunReport::from_json(&read(r)?)?;
            if report.subcommand != "fit" {
                return Err(Error::Input("generation needs a report of a sequence fit".into()));
            }
            let part = report
                .partition
                .as_ref()
                .ok_or_else(|| Error::Input("the report holds no partition".into()))?;
            let seq = read_sequence(i, args.separator)?;
            let chain = build_chain(&seq, report.order, report.config.fit.chain)?;
            Constraints::from_fit(&chain, part, &seq.alphabet)?
        }
        _ => return Err(Error::Usage("give --constraints, or --report with --input".into())),
    };
    if let Some(p) = &args.save_constraints {
        std::fs::write(p, serde_json::to_string_pretty(&constraints)?)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let seq = generate_sequence(&constraints, args.max_attempts, &mut rng)?;
    write_or_print(args.out.as_deref(), &write_sequence(&seq))
}

fn main() -> ExitCode {
    let command: Vec<String> = std::env::args().collect();
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Fit(a) => run_fit(a, command),
        Command::Temporal(a) => run_temporal(a, command),
        Command::Predict(a) => run_predict(a, command),
        Command::Generate(a) => run_generate(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("seqblock: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
