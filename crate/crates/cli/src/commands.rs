use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use dpndd::evaluation::{
    confusion_matrix, disturbance_matrix, labeled_f1, unlabeled_f1, Averaging, DisturbanceOptions, EvalOptions,
};
use dpndd::lsg::{select_candidates, LsgParser, OverlapKeep, PosConstraint, Profile, ProfileConfig};
use dpndd::mold::{MoldSelection, SpanScorer};
use dpndd::presets;
use dpndd::treebank::{emit_bracket, is_punctuation, write_span_list, LabeledTree, WSJ10_LABELS};
use dpndd::utl::{estimate_priors, UtlLabeler};
use rayon::prelude::*;

use crate::input::{read_trees, Format};
use crate::resources::{config_err, require_file, ModelArgs, Recorder};

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

fn read_input(path: &Path, format: Format) -> Result<Vec<LabeledTree>> {
    require_file(path, "input")?;
    read_trees(path, format)
}

fn brackets(trees: &[LabeledTree]) -> String {
    trees.iter().map(|t| emit_bracket(t) + "\n").collect()
}

fn write_trees(trees: &[LabeledTree], out: Option<&Path>, json_out: Option<&Path>) -> Result<()> {
    write_output(out, &brackets(trees))?;
    if let Some(path) = json_out {
        write_output(Some(path), &write_span_list(trees))?;
    }
    Ok(())
}

fn labels_or(list: &[String], default: &[&str]) -> Vec<String> {
    if list.is_empty() {
        default.iter().map(|s| s.to_string()).collect()
    } else {
        list.to_vec()
    }
}

#[derive(Args, Debug)]
pub struct LsgArgs {
    /// POS constraint file (JSON); defaults to the shipped constraints.
    #[arg(long)]
    pub constraints: Option<PathBuf>,
    /// Threshold/tolerance file (JSON with "profile" and "labels"); overrides --profile.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Shipped threshold profile.
    #[arg(long, default_value = "loose")]
    pub profile: Profile,
    /// Labels to generate, in processing order (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub label_order: Vec<String>,
    /// Which span of a crossing same-label pair survives: lower or higher score.
    #[arg(long, default_value = "lower")]
    pub overlap_keep: String,
}

impl LsgArgs {
    fn constraints(&self) -> Result<Vec<PosConstraint>> {
        match &self.constraints {
            Some(path) => {
                require_file(path, "constraints")?;
                serde_json::from_str(&std::fs::read_to_string(path)?)
                    .map_err(|e| config_err(format!("invalid constraints file {}: {e}", path.display())))
            }
            None => Ok(presets::constraints()),
        }
    }

    fn parser(&self) -> Result<LsgParser> {
        let configs = match &self.config {
            Some(path) => {
                require_file(path, "config")?;
                let cfg: ProfileConfig = serde_json::from_str(&std::fs::read_to_string(path)?)
                    .map_err(|e| config_err(format!("invalid config file {}: {e}", path.display())))?;
                cfg.labels
            }
            None => presets::label_configs(self.profile),
        };
        let order = labels_or(&self.label_order, &presets::DEFAULT_LABEL_ORDER);
        let mut parser =
            LsgParser::new(order, self.constraints()?, configs).map_err(|e| config_err(e.to_string()))?;
        parser.overlap_keep = match self.overlap_keep.as_str() {
            "lower" => OverlapKeep::Lower,
            "higher" => OverlapKeep::Higher,
            other => return Err(config_err(format!("--overlap-keep must be lower or higher, not {other:?}"))),
        };
        Ok(parser)
    }
}

fn check_mold_coverage(model: &ModelArgs, labels: &[String]) -> Result<()> {
    let molds = model.load_molds()?;
    for label in labels {
        if !molds.iter().any(|m| &m.label == label) {
            return Err(config_err(format!("no mold for label {label}")));
        }
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct ParseArgs {
    /// POS-tagged sentences: bracket trees, span-list JSON lines, or `word/TAG` lines (`-` for stdin).
    pub input: PathBuf,
    #[arg(long, default_value = "auto")]
    pub format: Format,
    #[command(flatten)]
    pub lsg: LsgArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Bracket output (default stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Additional span-list JSON lines output.
    #[arg(long)]
    pub json_out: Option<PathBuf>,
}

pub fn parse(args: &ParseArgs) -> Result<()> {
    let parser = args.lsg.parser()?;
    check_mold_coverage(&args.model, parser.label_order())?;
    let inputs = read_input(&args.input, args.format)?;
    if inputs.is_empty() {
        return write_trees(&[], args.out.as_deref(), args.json_out.as_deref());
    }
    let res = args.model.load(&inputs)?;
    let scorer = res.scorer(MoldSelection::All);
    log::info!("parsing {} sentences", inputs.len());
    let trees = inputs
        .par_iter()
        .map(|t| parser.parse_tree(&t.sentence, &scorer))
        .collect::<Result<Vec<_>, _>>()?;
    log::info!("cache: {:?}", res.provider.cache().stats());
    write_trees(&trees, args.out.as_deref(), args.json_out.as_deref())
}

#[derive(Args, Debug)]
pub struct LabelArgs {
    /// Bracketed trees whose spans are to be labeled (existing labels are ignored).
    pub input: PathBuf,
    #[arg(long, default_value = "auto")]
    pub format: Format,
    /// Weight labels by POS priors estimated from --pos-data.
    #[arg(long)]
    pub pos_refine: bool,
    /// Additive smoothing for the POS priors.
    #[arg(long, default_value_t = 1.0)]
    pub smoothing: f64,
    /// Candidate labels, ties broken by this order (default NP,VP,ADJP,ADVP,PP).
    #[arg(long, value_delimiter = ',')]
    pub label_order: Vec<String>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub json_out: Option<PathBuf>,
}

pub fn label(args: &LabelArgs) -> Result<()> {
    let labels = labels_or(&args.label_order, &WSJ10_LABELS);
    check_mold_coverage(&args.model, &labels)?;
    let priors = if args.pos_refine {
        let Some(dev) = args.model.pos_data()? else {
            return Err(config_err("--pos-refine needs --pos-data (a labeled treebank for the priors)"));
        };
        if !(args.smoothing >= 0.0) {
            return Err(config_err("--smoothing must be non-negative"));
        }
        Some(estimate_priors(&dev, &labels, args.smoothing)?)
    } else {
        None
    };
    let labeler = UtlLabeler::new(labels, priors)?;
    let inputs = read_input(&args.input, args.format)?;
    if inputs.is_empty() {
        return write_trees(&[], args.out.as_deref(), args.json_out.as_deref());
    }
    let res = args.model.load(&inputs)?;
    let trees = labeler.label_treebank(&inputs, &res.scorer(MoldSelection::UtlFlagged))?;
    write_trees(&trees, args.out.as_deref(), args.json_out.as_deref())
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Predicted trees.
    pub predicted: PathBuf,
    /// Gold trees.
    pub gold: PathBuf,
    #[arg(long, default_value = "auto")]
    pub format: Format,
    /// Score single-word and whole-sentence spans too.
    #[arg(long)]
    pub keep_trivial_spans: bool,
    /// Remove punctuation (by gold POS) from both sides before scoring.
    #[arg(long)]
    pub strip_punct: bool,
    /// Count repeated spans separately.
    #[arg(long)]
    pub no_collapse: bool,
    /// Average per-sentence scores instead of pooling counts.
    #[arg(long)]
    pub sentence_average: bool,
    /// Only score spans with these labels (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub only_labels: Vec<String>,
    /// Also print the label confusion matrix (bracketings must be identical).
    #[arg(long)]
    pub confusion: bool,
    /// Row/column order for the confusion matrix.
    #[arg(long, value_delimiter = ',')]
    pub label_order: Vec<String>,
    /// Both reports as JSON.
    #[arg(long)]
    pub json_out: Option<PathBuf>,
    /// Per-label labeled scores as CSV.
    #[arg(long)]
    pub csv_out: Option<PathBuf>,
}

pub fn eval(args: &EvalArgs) -> Result<()> {
    let mut pred = read_input(&args.predicted, args.format)?;
    let mut gold = read_input(&args.gold, args.format)?;
    if !args.only_labels.is_empty() {
        for t in pred.iter_mut().chain(gold.iter_mut()) {
            t.retain_labels(|l| args.only_labels.iter().any(|k| k == l));
        }
    }
    if args.strip_punct {
        for (p, g) in pred.iter_mut().zip(&gold) {
            if p.len() == g.len() {
                // judge punctuation by the gold tags on both sides
                p.sentence.pos_tags = g.sentence.pos_tags.clone();
            }
        }
        pred = pred.iter().map(|t| t.remove_words(is_punctuation)).collect();
        gold = gold.iter().map(|t| t.remove_words(is_punctuation)).collect();
    }
    let opts = EvalOptions {
        keep_trivial_spans: args.keep_trivial_spans,
        collapse_duplicates: !args.no_collapse,
        averaging: if args.sentence_average {
            Averaging::Sentence
        } else {
            Averaging::Corpus
        },
    };
    let unlabeled = unlabeled_f1(&pred, &gold, &opts)?;
    let labeled = labeled_f1(&pred, &gold, &opts)?;
    let text = format!("{}\n{}", unlabeled.to_table().lines().next().unwrap_or(""), labeled.to_table());
    write_output(None, &text)?;
    let mut json = serde_json::json!({"unlabeled": unlabeled, "labeled": labeled});
    if let Some(p) = &args.csv_out {
        write_output(Some(p), &labeled.per_label_csv())?;
    }
    if args.confusion {
        let order = labels_or(&args.label_order, &[]);
        let cm = confusion_matrix(&pred, &gold, &order)
            .context("the confusion matrix needs identical bracketings on both sides")?;
        write_output(None, &format!("\nconfusion (rows gold, columns predicted)\n{}", cm.to_table()))?;
        json["confusion"] = serde_json::to_value(&cm)?;
    }
    if let Some(p) = &args.json_out {
        write_output(Some(p), &(serde_json::to_string_pretty(&json)? + "\n"))?;
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct DisturbArgs {
    /// Labeled corpus: bracket trees, span-list JSON lines, or CoNLL columns.
    pub corpus: PathBuf,
    #[arg(long, default_value = "auto")]
    pub format: Format,
    /// Labels of the matrix (default NP,VP,ADJP,ADVP,PP; for CoNLL input, every entity type found).
    #[arg(long, value_delimiter = ',')]
    pub labels: Vec<String>,
    /// Sampled pairs per cell.
    #[arg(long, default_value_t = 2000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Mean matrix as CSV (default stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-cell sample counts as CSV.
    #[arg(long)]
    pub counts_out: Option<PathBuf>,
    #[arg(long)]
    pub json_out: Option<PathBuf>,
}

pub fn disturb(args: &DisturbArgs) -> Result<()> {
    let corpus = read_input(&args.corpus, args.format)?;
    let labels = if !args.labels.is_empty() {
        args.labels.clone()
    } else if args.format == Format::Conll || args.corpus.extension().is_some_and(|e| e == "conll") {
        let found: BTreeSet<&String> = corpus.iter().flat_map(|t| t.spans.iter().map(|s| &s.label)).collect();
        found.into_iter().cloned().collect()
    } else {
        labels_or(&[], &WSJ10_LABELS)
    };
    if args.samples == 0 {
        return Err(config_err("--samples must be positive"));
    }
    let res = args.model.load(&corpus)?;
    let opts = DisturbanceOptions {
        sample_size: args.samples,
        metric: args.model.metric,
        seed: args.seed,
    };
    let m = disturbance_matrix(&corpus, &labels, &opts, &res.provider, &res.tokenizer, res.projection.as_ref())?;
    write_output(args.out.as_deref(), &m.to_csv())?;
    log::info!("\n{}", m.to_table());
    if let Some(p) = &args.counts_out {
        write_output(Some(p), &m.samples_csv())?;
    }
    if let Some(p) = &args.json_out {
        write_output(Some(p), &(serde_json::to_string_pretty(&m)? + "\n"))?;
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct CacheArgs {
    /// Sentences to prefetch for (same formats as `parse`).
    pub input: PathBuf,
    #[arg(long, default_value = "auto")]
    pub format: Format,
    /// POS constraint file for candidate selection.
    #[arg(long)]
    pub constraints: Option<PathBuf>,
    /// Labels to prefetch.
    #[arg(long, value_delimiter = ',')]
    pub label_order: Vec<String>,
    /// Prefetch the spans of the input trees for every label (tree labeling)
    /// instead of span-generation candidates.
    #[arg(long)]
    pub tree_spans: bool,
    /// Write the needed queries (`token ids<TAB>masked positions`, 0-based)
    /// instead of querying a model.
    #[arg(long)]
    pub queries_out: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
}

pub fn cache(args: &CacheArgs) -> Result<()> {
    let default_order = if args.tree_spans {
        labels_or(&[], &WSJ10_LABELS)
    } else {
        presets::default_label_order()
    };
    let labels = labels_or(&args.label_order, &[]);
    let labels = if labels.is_empty() { default_order } else { labels };
    check_mold_coverage(&args.model, &labels)?;
    let constraints: BTreeMap<String, PosConstraint> = match &args.constraints {
        Some(path) => {
            require_file(path, "constraints")?;
            let list: Vec<PosConstraint> = serde_json::from_str(&std::fs::read_to_string(path)?)
                .map_err(|e| config_err(format!("invalid constraints file {}: {e}", path.display())))?;
            list.into_iter().map(|c| (c.label.clone(), c)).collect()
        }
        None => presets::constraints().into_iter().map(|c| (c.label.clone(), c)).collect(),
    };
    if !args.tree_spans {
        if let Some(l) = labels.iter().find(|l| !constraints.contains_key(*l)) {
            return Err(config_err(format!("no POS constraint for label {l}")));
        }
    }
    if args.queries_out.is_none() && args.model.cache.is_none() {
        return Err(config_err("nothing to fill: pass --cache (or --queries-out)"));
    }
    let inputs = read_input(&args.input, args.format)?;
    let recorder = args.queries_out.as_ref().map(|_| Recorder::default());
    let res = args.model.load_with(&inputs, recorder.as_ref())?;
    let selection = if args.tree_spans {
        MoldSelection::UtlFlagged
    } else {
        MoldSelection::All
    };
    let scorer = res.scorer(selection);
    inputs.par_iter().try_for_each(|tree| -> Result<()> {
        for label in &labels {
            let spans = if args.tree_spans {
                tree.distinct_spans()
            } else {
                select_candidates(&tree.sentence, &constraints[label])
            };
            if !spans.is_empty() {
                scorer.score_spans(&tree.sentence, label, &spans)?;
            }
        }
        Ok(())
    })?;
    match (recorder, &args.queries_out) {
        (Some(rec), Some(path)) => {
            let mut grouped: BTreeMap<Vec<u32>, BTreeSet<usize>> = BTreeMap::new();
            for q in rec.take() {
                grouped.entry(q.tokens).or_default().insert(q.masked_index);
            }
            let mut text = String::new();
            for (tokens, positions) in &grouped {
                let ids: Vec<String> = tokens.iter().map(|t| t.to_string()).collect();
                let pos: Vec<String> = positions.iter().map(|p| p.to_string()).collect();
                text.push_str(&format!("{}\t{}\n", ids.join(" "), pos.join(",")));
            }
            write_output(Some(path), &text)?;
            log::info!(
                "{} sentences, {} queries",
                grouped.len(),
                grouped.values().map(|p| p.len()).sum::<usize>()
            );
        }
        _ => {
            let stats = res.provider.cache().stats();
            eprintln!("cache: {} entries ({} hits, {} misses)", stats.entries, stats.hits, stats.misses);
        }
    }
    Ok(())
}
