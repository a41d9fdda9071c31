use std::collections::BTreeSet;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use embstab_core::error::{Error, Result};
use embstab_core::preprocess::{save_frequencies, DEFAULT_MIN_COUNT};
use embstab_core::space::load_word_list;
use embstab_core::sweep::DEFAULT_K;
use embstab_core::{
    agreement_curve, average_spaces, best_method_share, build_snn_graph, clustering_agreement, corpus_preprocess,
    emit_table, frequency_buckets, intersect_vocab, load_frequencies, multi_space_stability, open_space, run_sweep,
    save_space, snnd_cluster, top_k_all, top_k_all_cached, weat_stability, AgreementCurve, Clustering, CsvTable,
    EmbeddingSpace, MultiSpaceMode, NeighborTable, PairTable, SnndParams, SpaceFormat, Stopwords, SweepPairTable,
    SweepSpec, WeatQuery, WeatResult,
};

#[derive(Parser)]
#[command(name = "embstab", version, about = "Nearest-neighbor stability of word embedding spaces")]
struct Cli {
    /// Worker threads for neighbor search (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Embedding file layout; detected from the first line when omitted.
    #[arg(long, global = true, value_parser = parse_format)]
    format: Option<SpaceFormat>,

    #[command(subcommand)]
    command: Command,
}

fn parse_format(s: &str) -> std::result::Result<SpaceFormat, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Args, Clone)]
struct Common {
    /// Neighbors per word.
    #[arg(long, default_value_t = DEFAULT_K)]
    k: usize,

    /// Restrict the compared vocabulary to the words in this file.
    #[arg(long)]
    vocab: Option<PathBuf>,

    /// Directory for reusable neighbor-list caches.
    #[arg(long)]
    cache_dir: Option<PathBuf>,

    /// Output CSV (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Clean a corpus for embedding training.
    Preprocess {
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Stopword list (default: bundled English list).
        #[arg(long)]
        stopwords: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_MIN_COUNT)]
        min_count: u64,
        /// Also write `word<TAB>count` frequencies here.
        #[arg(long)]
        freqs: Option<PathBuf>,
    },
    /// Per-word and aggregate stability over two or more spaces.
    Stability {
        #[arg(required = true, num_args = 2..)]
        spaces: Vec<PathBuf>,
        #[command(flatten)]
        common: Common,
        /// Also write the aggregate of every compared pair.
        #[arg(long)]
        pairs_out: Option<PathBuf>,
    },
    /// Aggregate stability along one training parameter.
    Sweep {
        config: PathBuf,
        /// Overrides `output` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        pairs_out: Option<PathBuf>,
    },
    /// Stability summary per frequency quintile.
    Buckets {
        #[arg(required = true, num_args = 2..)]
        spaces: Vec<PathBuf>,
        /// `word<TAB>count` file, as written by `preprocess --freqs`.
        #[arg(long)]
        freqs: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Share of words for which each method is the most stable.
    BestMethod {
        /// `NAME=space1,space2[,...]`; repeat once per method.
        #[arg(long = "method", required = true, value_parser = parse_method)]
        methods: Vec<(String, Vec<PathBuf>)>,
        #[command(flatten)]
        common: Common,
    },
    /// Shared-nearest-neighbor density clustering of one space.
    Cluster {
        space: PathBuf,
        #[arg(long, default_value_t = 20)]
        knn_size: usize,
        #[arg(long, default_value_t = 6)]
        delta_sim: usize,
        #[arg(long, default_value_t = 10)]
        delta_degree: usize,
        /// Use strict `>` comparisons against both thresholds.
        #[arg(long)]
        strict: bool,
        #[arg(long)]
        vocab: Option<PathBuf>,
        #[arg(long)]
        cache_dir: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fraction of the first clustering's co-clustered pairs kept by all others.
    Agreement {
        #[arg(required = true, num_args = 2..)]
        clusterings: Vec<PathBuf>,
        /// Emit agreement for every prefix of the list.
        #[arg(long)]
        curve: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// WEAT effect sizes of each query in each space.
    Weat {
        #[arg(required = true)]
        spaces: Vec<PathBuf>,
        #[arg(long = "wordlist", required = true)]
        wordlists: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Element-wise mean of several spaces over their shared vocabulary.
    Average {
        #[arg(required = true, num_args = 2..)]
        spaces: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_method(s: &str) -> std::result::Result<(String, Vec<PathBuf>), String> {
    let (name, paths) = s.split_once('=').ok_or("expected NAME=path,path")?;
    let paths: Vec<PathBuf> = paths.split(',').filter(|p| !p.is_empty()).map(PathBuf::from).collect();
    if name.is_empty() || paths.len() < 2 {
        return Err("expected NAME=path,path with at least two spaces".into());
    }
    Ok((name.to_string(), paths))
}

fn write_output<T: CsvTable + ?Sized>(table: &T, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => emit_table(table, p),
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            table
                .write_csv(&mut lock)
                .and_then(|_| lock.flush())
                .map_err(|e| Error::io("<stdout>", e))
        }
    }
}

fn load_all(paths: &[PathBuf], format: Option<SpaceFormat>) -> Result<Vec<EmbeddingSpace>> {
    paths.iter().map(|p| open_space(p, format)).collect()
}

fn shared_vocab(spaces: &[&EmbeddingSpace], restrict: Option<&Path>) -> Result<Vec<String>> {
    let mut vocab = if spaces.len() == 1 {
        let mut v = spaces[0].vocabulary().to_vec();
        v.sort_unstable();
        v
    } else {
        intersect_vocab(spaces)?
    };
    if let Some(p) = restrict {
        let keep: BTreeSet<String> = load_word_list(p)?.into_iter().collect();
        vocab.retain(|w| keep.contains(w));
        if vocab.is_empty() {
            return Err(Error::EmptyIntersection);
        }
    }
    Ok(vocab)
}

fn cache_name(path: &Path, index: usize) -> String {
    let stem = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    format!("{index:03}-{stem}.knn")
}

fn tables(spaces: &[&EmbeddingSpace], paths: &[PathBuf], vocab: &[String], k: usize, cache_dir: Option<&Path>) -> Result<Vec<NeighborTable>> {
    spaces
        .iter()
        .zip(paths)
        .enumerate()
        .map(|(i, (s, p))| match cache_dir {
            Some(dir) => {
                std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
                top_k_all_cached(s, vocab, k, dir.join(cache_name(p, i)))
            }
            None => top_k_all(s, vocab, k),
        })
        .collect()
}

fn run(cli: Cli) -> Result<()> {
    let format = cli.format;
    match cli.command {
        Command::Preprocess {
            input,
            out,
            stopwords,
            min_count,
            freqs,
        } => {
            let sw = match stopwords {
                Some(p) => Stopwords::load(p)?,
                None => Stopwords::english(),
            };
            let (stats, frequencies) = corpus_preprocess(&input, &sw, min_count, &out)?;
            if let Some(f) = freqs {
                save_frequencies(&frequencies, f)?;
            }
            eprintln!(
                "vocab_size={} token_count={} dropped_rare_words={} dropped_stopwords={}",
                stats.vocab_size, stats.token_count, stats.dropped_rare_words, stats.dropped_stopwords
            );
        }
        Command::Stability {
            spaces,
            common,
            pairs_out,
        } => {
            let loaded = load_all(&spaces, format)?;
            let refs: Vec<&EmbeddingSpace> = loaded.iter().collect();
            let vocab = shared_vocab(&refs, common.vocab.as_deref())?;
            let ts = tables(&refs, &spaces, &vocab, common.k, common.cache_dir.as_deref())?;
            let trefs: Vec<&NeighborTable> = ts.iter().collect();
            let report = multi_space_stability(&trefs, MultiSpaceMode::AllPairs)?;
            write_output(&report, common.out.as_deref())?;
            if let Some(p) = pairs_out {
                emit_table(&PairTable(&report), p)?;
            }
        }
        Command::Sweep { config, out, pairs_out } => {
            let mut spec = SweepSpec::load(&config)?;
            if format.is_some() {
                spec.format = format;
            }
            if out.is_some() {
                spec.output_path = out;
            }
            let table = run_sweep(&spec)?;
            write_output(&table, spec.output_path.as_deref())?;
            if let Some(p) = pairs_out {
                emit_table(&SweepPairTable(&table), p)?;
            }
        }
        Command::Buckets { spaces, freqs, common } => {
            let loaded = load_all(&spaces, format)?;
            let refs: Vec<&EmbeddingSpace> = loaded.iter().collect();
            let vocab = shared_vocab(&refs, common.vocab.as_deref())?;
            let ts = tables(&refs, &spaces, &vocab, common.k, common.cache_dir.as_deref())?;
            let trefs: Vec<&NeighborTable> = ts.iter().collect();
            let report = multi_space_stability(&trefs, MultiSpaceMode::AllPairs)?;
            let freqs = load_frequencies(freqs)?;
            write_output(&frequency_buckets(&freqs, &report)?, common.out.as_deref())?;
        }
        Command::BestMethod { methods, common } => {
            let mut names = BTreeSet::new();
            for (name, _) in &methods {
                if !names.insert(name.as_str()) {
                    return Err(Error::Invalid(format!("method `{name}` given twice")));
                }
            }
            let loaded: Vec<Vec<EmbeddingSpace>> =
                methods.iter().map(|(_, paths)| load_all(paths, format)).collect::<Result<_>>()?;
            // Every method is scored on the same words.
            let all: Vec<&EmbeddingSpace> = loaded.iter().flatten().collect();
            let vocab = shared_vocab(&all, common.vocab.as_deref())?;
            let mut reports = Vec::new();
            for ((name, paths), spaces) in methods.iter().zip(&loaded) {
                let refs: Vec<&EmbeddingSpace> = spaces.iter().collect();
                let dir = common.cache_dir.as_ref().map(|d| d.join(name));
                let ts = tables(&refs, paths, &vocab, common.k, dir.as_deref())?;
                let trefs: Vec<&NeighborTable> = ts.iter().collect();
                reports.push((name.clone(), multi_space_stability(&trefs, MultiSpaceMode::AllPairs)?));
            }
            let borrowed: Vec<(String, &_)> = reports.iter().map(|(n, r)| (n.clone(), r)).collect();
            write_output(&best_method_share(&borrowed)?, common.out.as_deref())?;
        }
        Command::Cluster {
            space,
            knn_size,
            delta_sim,
            delta_degree,
            strict,
            vocab,
            cache_dir,
            out,
        } => {
            let mut params = SnndParams::new(knn_size, delta_sim, delta_degree)?;
            params.strict = strict;
            let s = open_space(&space, format)?;
            let words = shared_vocab(&[&s], vocab.as_deref())?;
            let t = tables(&[&s], std::slice::from_ref(&space), &words, knn_size, cache_dir.as_deref())?;
            let graph = build_snn_graph(&t[0], &params)?;
            write_output(&snnd_cluster(&graph, &params), out.as_deref())?;
        }
        Command::Agreement { clusterings, curve, out } => {
            let loaded: Vec<Clustering> = clusterings.iter().map(Clustering::load_csv).collect::<Result<_>>()?;
            let refs: Vec<&Clustering> = loaded.iter().collect();
            if curve {
                write_output(&AgreementCurve(agreement_curve(&refs)?), out.as_deref())?;
            } else {
                let value = clustering_agreement(&refs)?;
                match out {
                    Some(p) => std::fs::write(&p, format!("agreement\n{value}\n")).map_err(|e| Error::io(&p, e))?,
                    None => println!("{value}"),
                }
            }
        }
        Command::Weat { spaces, wordlists, out } => {
            let loaded = load_all(&spaces, format)?;
            let refs: Vec<&EmbeddingSpace> = loaded.iter().collect();
            let mut rows: Vec<WeatResult> = Vec::new();
            for path in &wordlists {
                let query = WeatQuery::load(path)?;
                let summary = weat_stability(&query, &refs)?;
                eprintln!(
                    "{}: max={} min={} spread={}",
                    summary.query, summary.max, summary.min, summary.spread
                );
                rows.extend(summary.per_space);
            }
            write_output(rows.as_slice(), out.as_deref())?;
        }
        Command::Average { spaces, out } => {
            let loaded = load_all(&spaces, format)?;
            let refs: Vec<&EmbeddingSpace> = loaded.iter().collect();
            let avg = average_spaces(&refs)?;
            let dropped = &avg.metadata().meta_embedding.as_ref().map(|m| m.dropped_words.len()).unwrap_or(0);
            save_space(&avg, &out)?;
            eprintln!("words={} dim={} dropped_zero_mean={dropped}", avg.len(), avg.dim());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    // Usage mistakes are validation errors (1); clap would exit with 2.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
