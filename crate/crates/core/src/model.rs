//! The full resolver: token embeddings flow through the constituent-graph
//! encoder into the span-ranking head. This module owns vocabularies,
//! document preparation/caching, corpus evaluation, and checkpoint
//! serialization.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{Config, ConfigError};
use crate::coref::{decode, CorefHead, CorefOutput};
use crate::corpus::{embed, parse_ptb, CorpusError, Document, EmbeddingProvider, HashEmbedding};
use crate::gat::Probes;
use crate::metrics::{Cluster, MetricAccumulator, MetricsReport};
use crate::parallel::{par_map, seq_map};
use crate::propagation::SyntaxEncoder;
use crate::syntax_graph::{build_graph, GraphOptions, SyntaxGraph};
use crate::tensor::{Matrix, ParamExport, ParamStore, Tape, TensorError, Var};

pub const CHECKPOINT_FORMAT: &str = "coref-ckpt-v1";

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("corpus: {0}")]
    Corpus(#[from] CorpusError),
    #[error("checkpoint: {detail}")]
    Checkpoint { detail: String },
    #[error("data: {detail}")]
    Data { detail: String },
    #[error("numeric: {0}")]
    Numeric(#[from] TensorError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Everything about a document that does not depend on parameters: merged
/// token embeddings, the compiled graph, label ids, and the genre id.
#[derive(Debug, Clone)]
pub struct PreparedDoc {
    pub doc: Document,
    pub h_w: Matrix,
    pub graph: SyntaxGraph,
    pub label_ids: Vec<usize>,
    pub genre_id: usize,
}

/// The trainable resolver with its parameter store and vocabularies.
pub struct CorefModel {
    pub config: Config,
    pub store: ParamStore,
    pub encoder: SyntaxEncoder,
    pub head: CorefHead,
    /// Constituent labels; id = position + 1, id 0 is the unknown row.
    pub label_vocab: Vec<String>,
    /// Genres; id = position + 1, id 0 is the unknown row.
    pub genre_vocab: Vec<String>,
}

/// Sorted, deduplicated constituent labels and genres of a corpus.
pub fn build_vocabs(docs: &[Document]) -> Result<(Vec<String>, Vec<String>), CorpusError> {
    let mut labels = BTreeSet::new();
    let mut genres = BTreeSet::new();
    for doc in docs {
        genres.insert(doc.genre.clone());
        for tree in &doc.trees {
            for node in &parse_ptb(tree)?.nodes {
                labels.insert(node.label.clone());
            }
        }
    }
    Ok((labels.into_iter().collect(), genres.into_iter().collect()))
}

impl CorefModel {
    /// Fresh parameters from the config's seed.
    pub fn new(
        config: Config,
        label_vocab: Vec<String>,
        genre_vocab: Vec<String>,
    ) -> Result<CorefModel, ModelError> {
        config.validate()?;
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let encoder = SyntaxEncoder::register(
            &mut store,
            "encoder",
            &config.encoder(),
            label_vocab.len(),
            &mut rng,
        );
        let head =
            CorefHead::register(&mut store, "head", &config.head(genre_vocab.len()), &mut rng);
        Ok(CorefModel { config, store, encoder, head, label_vocab, genre_vocab })
    }

    pub fn label_id(&self, label: &str) -> usize {
        self.label_vocab.binary_search_by(|l| l.as_str().cmp(label)).map_or(0, |i| i + 1)
    }

    pub fn genre_id(&self, genre: &str) -> usize {
        self.genre_vocab.binary_search_by(|g| g.as_str().cmp(genre)).map_or(0, |i| i + 1)
    }

    /// Prepare a document with the model's deterministic hash embeddings.
    pub fn prepare(&self, doc: &Document) -> Result<PreparedDoc, CorpusError> {
        let provider = HashEmbedding::new(self.config.d_token, self.config.seed);
        self.prepare_with(doc, &provider)
    }

    /// Prepare a document with an arbitrary embedding provider.
    pub fn prepare_with(
        &self,
        doc: &Document,
        provider: &dyn EmbeddingProvider,
    ) -> Result<PreparedDoc, CorpusError> {
        doc.validate("prepare")?;
        let h_w = embed(doc, &self.config.segmenter(), provider)?;
        let graph = build_graph(doc, GraphOptions { use_two_hop: !self.config.vanilla_tree })?;
        let label_ids =
            graph.constituents.iter().map(|c| self.label_id(&c.label)).collect();
        let genre_id = self.genre_id(&doc.genre);
        Ok(PreparedDoc { doc: doc.clone(), h_w, graph, label_ids, genre_id })
    }

    /// Syntax-infused token representations for a prepared document.
    pub fn encode<'t>(
        &self,
        tape: &'t Tape,
        prep: &PreparedDoc,
        probes: Option<&mut Probes>,
    ) -> Var<'t> {
        let h_w = tape.leaf(prep.h_w.clone());
        self.encoder
            .forward(tape, &self.store, h_w, &prep.graph, &prep.label_ids, probes)
            .expect("edge lists are generated to match the encoder's edge types")
    }

    /// Full forward pass: loss plus the antecedent table.
    pub fn forward<'t>(
        &self,
        tape: &'t Tape,
        prep: &PreparedDoc,
        mut probes: Option<&mut Probes>,
    ) -> CorefOutput<'t> {
        let encoded = self.encode(tape, prep, probes.as_deref_mut());
        self.head.forward(tape, &self.store, encoded, &prep.doc, prep.genre_id, probes)
    }

    /// Predicted clusters for one document.
    pub fn predict(&self, prep: &PreparedDoc) -> Vec<Cluster> {
        let tape = Tape::new();
        let out = self.forward(&tape, prep, None);
        decode(&out.table)
    }

    /// Score a whole corpus: metric report plus per-document predictions.
    /// Documents are independent, so this fans out through `par_map`.
    pub fn evaluate_corpus(&self, preps: &[PreparedDoc]) -> (MetricsReport, Vec<Vec<Cluster>>) {
        let predictions = par_map(preps, |p| self.predict(p));
        (self.accumulate(preps, &predictions), predictions)
    }

    /// Sequential twin of `evaluate_corpus`, the benchmark baseline.
    pub fn evaluate_corpus_seq(&self, preps: &[PreparedDoc]) -> (MetricsReport, Vec<Vec<Cluster>>) {
        let predictions = seq_map(preps, |p| self.predict(p));
        (self.accumulate(preps, &predictions), predictions)
    }

    fn accumulate(&self, preps: &[PreparedDoc], predictions: &[Vec<Cluster>]) -> MetricsReport {
        let mut acc = MetricAccumulator::new();
        for (prep, sys) in preps.iter().zip(predictions) {
            acc.add(&prep.doc.clusters, sys);
        }
        acc.report()
    }

    /// Serialize config, vocabularies, and every parameter to JSON.
    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        let file = CheckpointFile {
            format: CHECKPOINT_FORMAT.to_string(),
            config: self.config.clone(),
            label_vocab: self.label_vocab.clone(),
            genre_vocab: self.genre_vocab.clone(),
            params: self.store.export(),
        };
        let json = serde_json::to_string(&file)
            .map_err(|e| ModelError::Checkpoint { detail: e.to_string() })?;
        fs::write(path, json)?;
        Ok(())
    }

    /// Rebuild a model from a checkpoint, restoring every parameter.
    pub fn load(path: &Path) -> Result<CorefModel, ModelError> {
        let text = fs::read_to_string(path)?;
        let file: CheckpointFile = serde_json::from_str(&text)
            .map_err(|e| ModelError::Checkpoint { detail: e.to_string() })?;
        if file.format != CHECKPOINT_FORMAT {
            return Err(ModelError::Checkpoint {
                detail: format!("unsupported format {:?}, expected {CHECKPOINT_FORMAT:?}", file.format),
            });
        }
        let mut model = CorefModel::new(file.config, file.label_vocab, file.genre_vocab)?;
        model
            .store
            .load(&file.params)
            .map_err(|detail| ModelError::Checkpoint { detail })?;
        Ok(model)
    }
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    format: String,
    config: Config,
    label_vocab: Vec<String>,
    genre_vocab: Vec<String>,
    params: std::collections::BTreeMap<String, ParamExport>,
}
