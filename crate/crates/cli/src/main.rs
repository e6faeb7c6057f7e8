//! `lexalign`: seed-dictionary induction, embedding alignment, retrieval
//! evaluation and synthetic fixtures from the command line.
//!
//! Exit codes: 0 ok, 1 other failure, 2 missing input, 3 empty or
//! degenerate anchors, 4 evaluation impossible.

use std::collections::{HashMap, HashSet};
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lexalign::alignment::{
    align_least_squares, align_procrustes, align_rcsls, build_anchors, refine, RcslsConfig, RefineConfig, Refresh,
};
use lexalign::dictionary::read_word_list;
use lexalign::eval::{distribution_grid, write_reports_csv, AlignedPair, Direction, RankBuckets};
use lexalign::induction::{compute_stats, split_train_test, CooccurrenceTable, ParallelCorpus, Vocabulary};
use lexalign::synth::{SynthConfig, SyntheticFixture};
use lexalign::{BilingualDictionary, Criterion, EmbeddingSpace, Error, LinearMap, Method};

#[derive(Parser)]
#[command(name = "lexalign", version, about = "Supervised cross-lingual word-embedding alignment")]
struct Cli {
    /// Worker threads for retrieval and neighbor search (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a seed dictionary from a parallel corpus.
    Induce(InduceArgs),
    /// Fit a linear map from a source space to a target space.
    Align(AlignArgs),
    /// Score a map by word-translation retrieval.
    Evaluate(EvaluateArgs),
    /// Write a synthetic rotated-embedding fixture.
    Synth(SynthArgs),
    /// Split a dictionary into frequent-word train and random test parts.
    Split(SplitArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum InduceMethod {
    Condprob,
    Ppmi,
}

#[derive(Args)]
struct InduceArgs {
    #[arg(long, value_enum, default_value = "condprob")]
    method: InduceMethod,
    /// Source side, one segment per line.
    #[arg(long, requires = "tgt_corpus", conflicts_with = "tsv")]
    src_corpus: Option<PathBuf>,
    /// Target side, line-aligned with the source side.
    #[arg(long, requires = "src_corpus")]
    tgt_corpus: Option<PathBuf>,
    /// Single file with `source<TAB>target` segment pairs.
    #[arg(long, required_unless_present = "src_corpus")]
    tsv: Option<PathBuf>,
    #[arg(long)]
    src_stopwords: Option<PathBuf>,
    #[arg(long)]
    tgt_stopwords: Option<PathBuf>,
    /// Minimum PPMI score (ppmi only).
    #[arg(long, default_value_t = 0.0)]
    threshold: f64,
    /// Minimum number of segment pairs a word pair must share.
    #[arg(long, default_value_t = 2)]
    min_joint: u64,
    /// Translations kept per source word (condprob only).
    #[arg(long, default_value_t = 1)]
    top_k: usize,
    #[arg(long)]
    out: PathBuf,
    /// Statistics CSV (default: `stats.csv` next to `--out`).
    #[arg(long)]
    stats: Option<PathBuf>,
    /// Source vectors, for the lookup-precision statistics.
    #[arg(long)]
    src_vec: Option<PathBuf>,
    /// Target vectors, for the lookup-precision statistics.
    #[arg(long)]
    tgt_vec: Option<PathBuf>,
    /// Rows read from each vector file.
    #[arg(long, default_value_t = 200_000)]
    top_n: usize,
    #[arg(long, default_value = "src")]
    src_lang: String,
    #[arg(long, default_value = "tgt")]
    tgt_lang: String,
    /// Append the association score as a third column.
    #[arg(long)]
    with_scores: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AlignMethod {
    Lstsq,
    Procrustes,
    Rcsls,
}

#[derive(Clone, Copy, ValueEnum)]
enum CriterionArg {
    Nn,
    Csls,
}

impl From<CriterionArg> for Criterion {
    fn from(c: CriterionArg) -> Self {
        match c {
            CriterionArg::Nn => Criterion::Nn,
            CriterionArg::Csls => Criterion::Csls,
        }
    }
}

#[derive(Args)]
struct AlignArgs {
    #[arg(long, value_enum, default_value = "procrustes")]
    method: AlignMethod,
    #[arg(long)]
    src: PathBuf,
    #[arg(long)]
    tgt: PathBuf,
    /// Training dictionary.
    #[arg(long)]
    dict: PathBuf,
    /// Output matrix; provenance goes to `<out>.provenance`.
    #[arg(long)]
    out: PathBuf,
    /// Run mutual-NN refinement after the fit.
    #[arg(long)]
    refine: bool,
    /// Project RCSLS iterates onto the unit spectral-norm ball.
    #[arg(long)]
    spectral: bool,
    /// Center vectors before unit normalization.
    #[arg(long)]
    center: bool,
    /// Rows read from each vector file; they also form the RCSLS pools.
    #[arg(long, default_value_t = 200_000)]
    top_n: usize,
    /// RCSLS learning-rate grid.
    #[arg(long, value_delimiter = ',', default_value = "1,10,25,50")]
    lr: Vec<f64>,
    /// RCSLS epoch grid.
    #[arg(long, value_delimiter = ',', default_value = "10,20")]
    epochs: Vec<usize>,
    /// Neighborhood size of the RCSLS loss.
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// RCSLS minibatch size (default: full batch).
    #[arg(long)]
    batch_size: Option<usize>,
    /// Refresh RCSLS neighborhoods every N minibatch steps instead of once
    /// per epoch.
    #[arg(long)]
    refresh_steps: Option<usize>,
    #[arg(long, default_value_t = 5)]
    refine_iterations: usize,
    #[arg(long, default_value_t = 10_000)]
    refine_top_n: usize,
    #[arg(long, value_enum, default_value = "csls")]
    refine_criterion: CriterionArg,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum CriterionChoice {
    Nn,
    Csls,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum DirectionChoice {
    Forward,
    Backward,
    Both,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    matrix: PathBuf,
    #[arg(long)]
    src: PathBuf,
    #[arg(long)]
    tgt: PathBuf,
    /// Test dictionary.
    #[arg(long)]
    dict: PathBuf,
    #[arg(long, value_enum, default_value = "both")]
    criterion: CriterionChoice,
    #[arg(long, value_enum, default_value = "both")]
    direction: DirectionChoice,
    /// Rows read from each vector file (the retrieval pools).
    #[arg(long, default_value_t = 200_000)]
    top_n: usize,
    #[arg(long)]
    center: bool,
    /// CSLS neighborhood size.
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Inclusive upper bounds of the rank buckets.
    #[arg(long, value_delimiter = ',', default_value = "1,5,10")]
    buckets: Vec<usize>,
    /// Receives `report.csv` and `distribution.csv`.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 50)]
    d: usize,
    /// Per-component Gaussian noise on the targets.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 500)]
    train: usize,
    #[arg(long, default_value_t = 200)]
    test: usize,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long)]
    dict: PathBuf,
    /// Source words by decreasing frequency: the first token of each line
    /// counts, so a `.vec` file works as is.
    #[arg(long)]
    ranking: Option<PathBuf>,
    #[arg(long, default_value_t = 5000)]
    train: usize,
    #[arg(long, default_value_t = 1500)]
    test: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    train_out: PathBuf,
    #[arg(long)]
    test_out: PathBuf,
}

enum Failure {
    Missing(PathBuf),
    Anchors(String),
    Evaluation(String),
    Other(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Other(_) => 1,
            Failure::Missing(_) => 2,
            Failure::Anchors(_) => 3,
            Failure::Evaluation(_) => 4,
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Missing(p) => format!("input not found: {}", p.display()),
            Failure::Anchors(m) | Failure::Evaluation(m) | Failure::Other(m) => m.clone(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::NoAnchors { .. } => Failure::Anchors(e.to_string()),
            Error::NoQueries => Failure::Evaluation(e.to_string()),
            _ => Failure::Other(e.to_string()),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn context(path: &Path) -> impl Fn(Error) -> Failure + '_ {
    move |e| match e {
        Error::NoAnchors { .. } | Error::NoQueries => e.into(),
        _ => Failure::Other(format!("{}: {e}", path.display())),
    }
}

fn require(paths: &[&Path]) -> CliResult<()> {
    match paths.iter().find(|p| !p.is_file()) {
        Some(p) => Err(Failure::Missing(p.to_path_buf())),
        None => Ok(()),
    }
}

fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Failure::Missing(path.to_path_buf()),
        _ => Failure::Other(format!("{}: {e}", path.display())),
    })
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Failure::Other(format!("{}: {e}", dir.display())))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::Other(format!("{}: {e}", path.display())))
}

fn lang_of(path: &Path) -> String {
    path.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned())
}

fn load_space(path: &Path, top_n: usize) -> CliResult<EmbeddingSpace> {
    let (space, report) = EmbeddingSpace::read_vec(open(path)?, Some(top_n)).map_err(context(path))?;
    if report.duplicates > 0 {
        log::warn!("{}: {} duplicate words skipped", path.display(), report.duplicates);
    }
    log::info!("{}: {} x {}", path.display(), space.len(), space.dim());
    Ok(space.with_lang(lang_of(path)))
}

fn load_normalized(path: &Path, top_n: usize, center: bool) -> CliResult<EmbeddingSpace> {
    load_space(path, top_n)?.normalize(center).map_err(context(path))
}

fn load_dict(path: &Path) -> CliResult<BilingualDictionary> {
    BilingualDictionary::read(open(path)?).map_err(context(path))
}

fn load_words(path: Option<&PathBuf>) -> CliResult<HashSet<String>> {
    match path {
        Some(p) => read_word_list(open(p)?).map_err(context(p)),
        None => Ok(HashSet::new()),
    }
}

fn provenance_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".provenance");
    PathBuf::from(s)
}

fn induce(a: &InduceArgs) -> CliResult<()> {
    let mut inputs: Vec<&Path> = [&a.src_corpus, &a.tgt_corpus, &a.tsv, &a.src_stopwords, &a.tgt_stopwords, &a.src_vec, &a.tgt_vec]
        .into_iter()
        .flatten()
        .map(PathBuf::as_path)
        .collect();
    inputs.dedup();
    require(&inputs)?;

    let corpus = match (&a.src_corpus, &a.tgt_corpus, &a.tsv) {
        (Some(s), Some(t), _) => ParallelCorpus::read_parallel(open(s)?, open(t)?).map_err(context(s))?,
        (_, _, Some(p)) => ParallelCorpus::read_tsv(open(p)?).map_err(context(p))?,
        _ => return Err(Failure::Other("give --src-corpus and --tgt-corpus, or --tsv".into())),
    };
    let src_stop = load_words(a.src_stopwords.as_ref())?;
    let tgt_stop = load_words(a.tgt_stopwords.as_ref())?;
    let table = CooccurrenceTable::count(&corpus, &src_stop, &tgt_stop);
    log::info!("{} segment pairs counted", table.n_pairs());
    let dict = match a.method {
        InduceMethod::Condprob => table.induce_condprob(a.min_joint, a.top_k)?,
        InduceMethod::Ppmi => table.induce_ppmi(a.threshold, a.min_joint)?,
    };
    dict.write(create(&a.out)?, a.with_scores)?;

    let src_vec = a.src_vec.as_deref().map(|p| load_space(p, a.top_n)).transpose()?;
    let tgt_vec = a.tgt_vec.as_deref().map(|p| load_space(p, a.top_n)).transpose()?;
    let stats = compute_stats(
        &dict,
        src_vec.as_ref().map(|s| s as &dyn Vocabulary),
        tgt_vec.as_ref().map(|s| s as &dyn Vocabulary),
        &src_stop,
        &tgt_stop,
    );
    let stats_path = a.stats.clone().unwrap_or_else(|| a.out.with_file_name("stats.csv"));
    stats.write_csv(create(&stats_path)?, &a.src_lang, &a.tgt_lang)?;
    println!("{} entries written to {}", dict.len(), a.out.display());
    Ok(())
}

fn align(a: &AlignArgs) -> CliResult<()> {
    require(&[&a.src, &a.tgt, &a.dict])?;
    let src = load_normalized(&a.src, a.top_n, a.center)?;
    let tgt = load_normalized(&a.tgt, a.top_n, a.center)?;
    let dict = load_dict(&a.dict)?;
    if dict.is_empty() {
        return Err(Failure::Anchors(format!("{}: dictionary is empty", a.dict.display())));
    }
    let anchors = build_anchors(&dict, &src, &tgt)?;
    log::info!("{} anchors ({} entries out of vocabulary)", anchors.len(), anchors.skipped);

    let mut map = match a.method {
        AlignMethod::Lstsq => align_least_squares(&anchors)?,
        AlignMethod::Procrustes => align_procrustes(&anchors)?,
        AlignMethod::Rcsls => {
            let cfg = RcslsConfig {
                k_neighbors: a.k,
                learning_rates: a.lr.clone(),
                epochs: a.epochs.clone(),
                batch_size: a.batch_size,
                spectral: a.spectral,
                refresh: a.refresh_steps.map_or(Refresh::EveryEpoch, Refresh::EverySteps),
                seed: a.seed,
            };
            let init = align_procrustes(&anchors)?;
            let out = align_rcsls(&anchors, &src, &tgt, &cfg, &init)?;
            for r in &out.runs {
                log::info!(
                    "lr={} epochs={} train P@1={:.2}{}",
                    r.learning_rate,
                    r.epochs,
                    r.train_p1,
                    if r.diverged { " (diverged)" } else { "" }
                );
            }
            out.map
                .with_param("grid_lr", join(&a.lr))
                .with_param("grid_epochs", join(&a.epochs))
                .with_param("refresh", a.refresh_steps.map_or("epoch".into(), |n| format!("{n} steps")))
        }
    };
    if a.refine {
        let cfg = RefineConfig {
            iterations: a.refine_iterations,
            top_n: a.refine_top_n,
            criterion: a.refine_criterion.into(),
            k_neighbors: a.k,
        };
        let out = refine(&map, &src, &tgt, &cfg)?;
        if out.empty_dictionary {
            log::warn!("refinement stopped on an empty induced dictionary");
        }
        map = out.map;
    }
    map.set_param("center", a.center);
    map.set_param("top_n", a.top_n);
    map.set_param("anchors", anchors.len());
    map.set_param("anchors_skipped", anchors.skipped);
    map.set_param("seed", a.seed);
    map.write_matrix(create(&a.out)?)?;
    map.write_provenance(create(&provenance_path(&a.out))?)?;
    println!(
        "{} map ({} anchors) written to {}",
        map.method(),
        anchors.len(),
        a.out.display()
    );
    Ok(())
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn evaluate(a: &EvaluateArgs) -> CliResult<()> {
    require(&[&a.matrix, &a.src, &a.tgt, &a.dict])?;
    let buckets = RankBuckets::new(a.buckets.clone())?;
    let map = LinearMap::read_matrix(open(&a.matrix)?).map_err(context(&a.matrix))?;
    let src = load_normalized(&a.src, a.top_n, a.center)?;
    let tgt = load_normalized(&a.tgt, a.top_n, a.center)?;
    let test = load_dict(&a.dict)?;
    let pair = AlignedPair::new(&map, &src, &tgt)?;

    let criteria: &[Criterion] = match a.criterion {
        CriterionChoice::Nn => &[Criterion::Nn],
        CriterionChoice::Csls => &[Criterion::Csls],
        CriterionChoice::Both => &[Criterion::Nn, Criterion::Csls],
    };
    let directions: &[Direction] = match a.direction {
        DirectionChoice::Forward => &[Direction::Forward],
        DirectionChoice::Backward => &[Direction::Backward],
        DirectionChoice::Both => &[Direction::Forward, Direction::Backward],
    };
    let mut reports = Vec::new();
    for &direction in directions {
        for &criterion in criteria {
            let (_, report) = pair
                .evaluate(&test, criterion, direction, a.k, &buckets)
                .map_err(|e| match e {
                    Error::NoQueries => Failure::Evaluation(format!(
                        "{}: no test entry has both words in vocabulary",
                        a.dict.display()
                    )),
                    e => e.into(),
                })?;
            reports.push(report);
        }
    }
    fs::create_dir_all(&a.out_dir).map_err(|e| Failure::Other(format!("{}: {e}", a.out_dir.display())))?;
    write_reports_csv(&reports, create(&a.out_dir.join("report.csv"))?)?;
    let refs: Vec<_> = reports.iter().collect();
    distribution_grid(&refs)?.write_csv(create(&a.out_dir.join("distribution.csv"))?)?;
    let stdout = std::io::stdout();
    write_reports_csv(&reports, stdout.lock())?;
    Ok(())
}

fn synth(a: &SynthArgs) -> CliResult<()> {
    let fx = SyntheticFixture::generate(&SynthConfig {
        n: a.n,
        d: a.d,
        noise: a.noise,
        seed: a.seed,
        n_train: a.train,
        n_test: a.test,
    })?;
    let dir = &a.out_dir;
    fx.source.write_vec(create(&dir.join("src.vec"))?)?;
    fx.target.write_vec(create(&dir.join("tgt.vec"))?)?;
    fx.train.write(create(&dir.join("train.tsv"))?, false)?;
    fx.test.write(create(&dir.join("test.tsv"))?, false)?;
    LinearMap::new(fx.rotation, Method::External)?.write_matrix(create(&dir.join("rotation.txt"))?)?;
    println!("fixture written to {}", dir.display());
    Ok(())
}

fn split(a: &SplitArgs) -> CliResult<()> {
    let mut inputs = vec![a.dict.as_path()];
    inputs.extend(a.ranking.as_deref());
    require(&inputs)?;
    let dict = load_dict(&a.dict)?;
    let mut rank = HashMap::new();
    if let Some(p) = &a.ranking {
        for line in open(p)?.lines() {
            let line = line.map_err(|e| Failure::Other(format!("{}: {e}", p.display())))?;
            if let Some(w) = line.split_whitespace().next() {
                let next = rank.len();
                rank.entry(w.to_string()).or_insert(next);
            }
        }
    }
    let (train, test) = split_train_test(&dict, &rank, a.train, a.test, a.seed)?;
    train.write(create(&a.train_out)?, false)?;
    test.write(create(&a.test_out)?, false)?;
    println!(
        "train: {} entries, test: {} entries",
        train.len(),
        test.len()
    );
    Ok(())
}

fn main() -> ExitCode {
    // usage errors exit 1; 2 is reserved for missing inputs
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    env_logger::Builder::new()
        .filter_level(if cli.verbose { log::LevelFilter::Info } else { log::LevelFilter::Warn })
        .parse_default_env()
        .init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot set up {n} threads: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match &cli.command {
        Command::Induce(a) => induce(a),
        Command::Align(a) => align(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Synth(a) => synth(a),
        Command::Split(a) => split(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
