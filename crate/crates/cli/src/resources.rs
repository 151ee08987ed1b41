//! Turns command-line flags into a provider, tokenizer, molds and projection.

use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use anyhow::{Context, Result};
use clap::Args;
use dpndd::evaluation::Metric;
use dpndd::mold::{DpNddScorer, MoldRegistry, MoldSelection, RegistryOptions};
use dpndd::presets;
use dpndd::projection::{Lexicon, PosProjection};
use dpndd::provider::{
    DistributionBackend, DistributionCache, DistributionProvider, HttpBackend, MaskQuery, MockBackend, ProviderError,
    TokenDistribution,
};
use dpndd::treebank::{LabeledTree, Vocabulary, WordPieceTokenizer};

use crate::input::{read_trees, Format};

/// Bad flags or unusable configuration files; exits with status 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn config_err(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

/// Fails with a config error naming `path` when it does not exist.
pub fn require_file(path: &Path, what: &str) -> Result<()> {
    if path.as_os_str() != "-" && !path.is_file() {
        return Err(config_err(format!("{what} file not found: {}", path.display())));
    }
    Ok(())
}

#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    /// Mold file (JSON array); defaults to the shipped molds.
    #[arg(long)]
    pub molds: Option<PathBuf>,
    /// Model vocabulary (`vocab.txt`, one token per line).
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Use the deterministic mock LM over a vocabulary built from the inputs.
    #[arg(long)]
    pub mock: bool,
    /// Persistent distribution cache; alone (without --endpoint/--mock) it is replayed read-only.
    #[arg(long)]
    pub cache: Option<PathBuf>,
    /// Base URL of the inference sidecar.
    #[arg(long)]
    pub endpoint: Option<String>,
    /// Backend identifier for replaying a cache without a live backend.
    #[arg(long)]
    pub backend_id: Option<String>,
    /// `word<TAB>POS` lexicon for the POS projection.
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    /// POS-tagged treebank used for the lexicon (and for label priors in `label`).
    #[arg(long)]
    pub pos_data: Option<PathBuf>,
    /// Divergence: ndd or pos-ndd.
    #[arg(long, default_value = "pos-ndd")]
    pub metric: Metric,
}

pub struct Resources {
    pub provider: DistributionProvider,
    pub tokenizer: WordPieceTokenizer,
    pub registry: MoldRegistry,
    pub projection: Option<PosProjection>,
}

fn open_cache(path: &Path) -> Result<DistributionCache> {
    DistributionCache::open(path).with_context(|| format!("opening cache {}", path.display()))
}

impl ModelArgs {
    pub fn load_molds(&self) -> Result<Vec<dpndd::Mold>> {
        match &self.molds {
            Some(path) => {
                require_file(path, "molds")?;
                let text = std::fs::read_to_string(path)?;
                MoldRegistry::parse_molds(&text)
                    .map_err(|e| config_err(format!("invalid molds file {}: {e}", path.display())))
            }
            None => Ok(MoldRegistry::parse_molds(presets::MOLDS_JSON)?),
        }
    }

    pub fn pos_data(&self) -> Result<Option<Vec<LabeledTree>>> {
        match &self.pos_data {
            Some(path) => {
                require_file(path, "POS data")?;
                Ok(Some(read_trees(path, Format::Auto)?))
            }
            None => Ok(None),
        }
    }

    fn check_files(&self) -> Result<()> {
        for (path, what) in [(&self.vocab, "vocabulary"), (&self.lexicon, "lexicon")] {
            if let Some(p) = path {
                require_file(p, what)?;
            }
        }
        if self.mock && self.endpoint.is_some() {
            return Err(config_err("--mock and --endpoint are mutually exclusive"));
        }
        Ok(())
    }

    fn vocabulary(&self, inputs: &[LabeledTree], molds: &[dpndd::Mold]) -> Result<Vocabulary> {
        if self.mock {
            if let Some(path) = &self.vocab {
                return Ok(Vocabulary::load(path)?);
            }
            let words = molds
                .iter()
                .flat_map(|m| m.tokens.iter())
                .chain(inputs.iter().flat_map(|t| t.sentence.words.iter()));
            return Ok(Vocabulary::from_words(words));
        }
        let path = self
            .vocab
            .as_ref()
            .ok_or_else(|| config_err("--vocab is required unless --mock is given"))?;
        Ok(Vocabulary::load(path)?)
    }

    fn provider(&self, vocab_size: usize, recorder: Option<&Recorder>) -> Result<DistributionProvider> {
        if let Some(rec) = recorder {
            return Ok(DistributionProvider::from_backend(Box::new(rec.with_vocab(vocab_size))));
        }
        let provider = if self.mock {
            DistributionProvider::from_backend(Box::new(MockBackend::new(vocab_size)))
        } else if let Some(endpoint) = &self.endpoint {
            let backend = HttpBackend::connect(endpoint)?;
            if backend.vocab_size() != vocab_size {
                return Err(config_err(format!(
                    "sidecar reports {} vocabulary entries but --vocab has {vocab_size}",
                    backend.vocab_size()
                )));
            }
            DistributionProvider::from_backend(Box::new(backend))
        } else if let Some(cache) = &self.cache {
            let id = self
                .backend_id
                .clone()
                .ok_or_else(|| config_err("replaying --cache without --endpoint needs --backend-id"))?;
            return Ok(DistributionProvider::cache_only(open_cache(cache)?, id, vocab_size));
        } else {
            return Err(config_err("no model: pass --endpoint, --cache with --backend-id, or --mock"));
        };
        Ok(match &self.cache {
            Some(path) => provider.with_cache(open_cache(path)?),
            None => provider,
        })
    }

    fn projection(&self, vocab: &Vocabulary, inputs: &[LabeledTree]) -> Result<Option<PosProjection>> {
        if self.metric == Metric::Ndd {
            return Ok(None);
        }
        let mut lexicon = match &self.lexicon {
            Some(path) => Lexicon::load_tsv(path)
                .map_err(|e| config_err(format!("invalid lexicon {}: {e}", path.display())))?,
            None => Lexicon::new(),
        };
        if let Some(trees) = self.pos_data()? {
            lexicon.merge(&Lexicon::from_treebank(&trees));
        }
        if lexicon.is_empty() {
            log::warn!("no --lexicon or --pos-data; building the POS projection from the input tags");
            lexicon = Lexicon::from_treebank(inputs);
        }
        if lexicon.is_empty() {
            return Ok(None);
        }
        Ok(Some(PosProjection::build(&lexicon, vocab)?))
    }

    /// Everything needed to score spans. `inputs` seeds the mock vocabulary
    /// and, as a last resort, the POS lexicon.
    pub fn load(&self, inputs: &[LabeledTree]) -> Result<Resources> {
        self.load_with(inputs, None)
    }

    /// Like [`ModelArgs::load`], but with `recorder` standing in for the model.
    pub fn load_with(&self, inputs: &[LabeledTree], recorder: Option<&Recorder>) -> Result<Resources> {
        self.check_files()?;
        let molds = self.load_molds()?;
        let vocab = self.vocabulary(inputs, &molds)?;
        let tokenizer = WordPieceTokenizer::new(vocab.clone()).map_err(|e| config_err(e.to_string()))?;
        let registry = MoldRegistry::new(molds, &tokenizer, &RegistryOptions::default())
            .map_err(|e| config_err(format!("molds: {e}")))?;
        let projection = self.projection(&vocab, inputs)?;
        if self.metric == Metric::PosNdd && projection.is_none() {
            log::warn!("no POS information available; falling back to plain NDD");
        }
        let provider = self.provider(vocab.len(), recorder)?;
        log::info!(
            "backend {} ({} entries), {} molds, projection: {}",
            provider.backend_id(),
            provider.vocab_size(),
            registry.len(),
            projection.as_ref().map_or("none".to_string(), |p| format!("{} classes", p.num_classes()))
        );
        Ok(Resources {
            provider,
            tokenizer,
            registry,
            projection,
        })
    }
}

/// Answers every query with a uniform distribution and remembers it; used
/// to list the queries a run would make.
#[derive(Clone, Default)]
pub struct Recorder {
    vocab_size: usize,
    queries: Arc<Mutex<Vec<MaskQuery>>>,
}

impl Recorder {
    fn with_vocab(&self, vocab_size: usize) -> Self {
        Recorder {
            vocab_size,
            queries: self.queries.clone(),
        }
    }

    pub fn take(&self) -> Vec<MaskQuery> {
        std::mem::take(&mut *self.queries.lock().unwrap())
    }
}

impl DistributionBackend for Recorder {
    fn backend_id(&self) -> &str {
        "query-recorder"
    }

    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn fetch(&self, queries: &[MaskQuery]) -> Result<Vec<TokenDistribution>, ProviderError> {
        self.queries.lock().unwrap().extend_from_slice(queries);
        Ok(queries.iter().map(|_| TokenDistribution::uniform(self.vocab_size)).collect())
    }
}

impl Resources {
    pub fn scorer(&self, selection: MoldSelection) -> DpNddScorer<'_> {
        DpNddScorer {
            registry: &self.registry,
            provider: &self.provider,
            projection: self.projection.as_ref(),
            tokenizer: &self.tokenizer,
            selection,
        }
    }
}
