//! Stage drivers behind the command-line tool. Each stage reads its inputs
//! from files named by a [`PipelineConfig`] and writes its outputs to files.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::{CorpusConfig, PipelineConfig};
use crate::corpus::{
    build_tag_vocabulary, encode_document, parse_interactions, raw_documents, read_citeulike_text,
    read_documents_jsonl, read_item_tags, read_tag_names, split_leave_p_in, write_documents_jsonl, Document,
    InteractionFormat, InteractionMatrix, RawDocument, TagVocabulary, WordVocabulary,
};
use crate::encoder::{export_embeddings, train_encoder, EncoderCheckpoint};
use crate::evaluation::{evaluate, top_candidates, ComparisonReport, RecallReport};
use crate::factorization::{self, FactorizationModel, FeatureSet, MetadataMode, MfCheckpoint, MfRun, MF_FORMAT};
use crate::features::{
    build_identity_features, build_tag_features, build_tfidf_features, DenseItemEmbeddings, FeatureKind, FeatureMatrix,
};
use crate::synthetic::{block_documents, planted_blocks, BlockSpec};
use crate::{rng, Error, Result};

pub const INTERACTIONS_FILE: &str = "interactions.tsv";
pub const DOCUMENTS_FILE: &str = "documents.jsonl";
pub const TAGS_FILE: &str = "tags.txt";
pub const META_FILE: &str = "meta.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub n_users: usize,
    pub n_items: usize,
    pub n_pairs: usize,
    pub n_tags: usize,
    pub density: f64,
}

impl DatasetStats {
    pub fn of(m: &InteractionMatrix, n_tags: usize) -> Self {
        DatasetStats {
            n_users: m.n_users(),
            n_items: m.n_items(),
            n_pairs: m.n_pairs(),
            n_tags,
            density: m.density(),
        }
    }

    /// e.g. "5551 users, 16980 items, 204986 pairs, density 0.22%"
    pub fn summary_line(&self) -> String {
        format!(
            "{} users, {} items, {} pairs, density {:.2}%",
            self.n_users,
            self.n_items,
            self.n_pairs,
            self.density * 100.0
        )
    }
}

/// The canonical dataset written by [`ingest`].
#[derive(Clone, Debug)]
pub struct Dataset {
    pub interactions: InteractionMatrix,
    pub documents: Vec<RawDocument>,
    pub tag_names: Vec<String>,
    pub stats: DatasetStats,
}

/// Encoder-ready documents with their vocabularies.
#[derive(Clone, Debug)]
pub struct Corpus {
    pub documents: Vec<Document>,
    pub words: WordVocabulary,
    pub tags: TagVocabulary,
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Data(e.to_string()))?;
    text.push('\n');
    write_text(path, &text)
}

fn is_jsonl(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "jsonl")
}

/// Sizes the global worker pool. Only the first call has an effect.
pub fn init_threads(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Config("--threads must be at least 1".into()));
    }
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
        log::debug!("worker pool already initialized: {e}");
    }
    Ok(())
}

/// Writes interactions, documents and tag names in canonical form.
pub fn write_dataset(
    dir: &Path,
    interactions: &InteractionMatrix,
    documents: &[RawDocument],
    tag_names: &[String],
) -> Result<DatasetStats> {
    create_dir(dir)?;
    interactions.write_tsv(&dir.join(INTERACTIONS_FILE))?;
    write_documents_jsonl(&dir.join(DOCUMENTS_FILE), documents)?;
    let mut tags = tag_names.join("\n");
    if !tags.is_empty() {
        tags.push('\n');
    }
    write_text(&dir.join(TAGS_FILE), &tags)?;
    let stats = DatasetStats::of(interactions, tag_names.len());
    write_json(&dir.join(META_FILE), &stats)?;
    Ok(stats)
}

/// Converts raw inputs (citeulike-style files, or canonical pairs + JSONL
/// documents) into the canonical dataset directory.
pub fn ingest(cfg: &PipelineConfig) -> Result<DatasetStats> {
    let p = &cfg.paths;
    let need = |key: &str, path: &Option<PathBuf>| -> Result<PathBuf> {
        let path = path
            .clone()
            .ok_or_else(|| Error::Config(format!("paths.{key} is not set")))?;
        if !path.is_file() {
            return Err(Error::Data(format!("paths.{key}: {} does not exist", path.display())));
        }
        Ok(path)
    };
    let interactions_path = need("interactions", &p.interactions)?;
    let documents_path = need("documents", &p.documents)?;
    let tag_names = read_tag_names(&need("tag_names", &p.tag_names)?)?;
    let documents = if is_jsonl(&documents_path) {
        let docs = read_documents_jsonl(&documents_path)?;
        for (k, d) in docs.iter().enumerate() {
            if d.id as usize != k {
                return Err(Error::Data(format!(
                    "{}: document {k} has id {}; ids must be 0, 1, 2, ... in order",
                    documents_path.display(),
                    d.id
                )));
            }
            if let Some(&t) = d.tags.iter().find(|&&t| t as usize >= tag_names.len()) {
                return Err(Error::Data(format!("item {k} carries unknown tag id {t}")));
            }
        }
        docs
    } else {
        let texts = read_citeulike_text(&documents_path)?;
        let item_tags = read_item_tags(&need("item_tags", &p.item_tags)?, tag_names.len())?;
        raw_documents(&texts, &item_tags)
    };
    let raw = parse_interactions(&interactions_path, p.interactions_format)?;
    let n_items = raw.n_items().max(documents.len());
    let interactions = raw.with_n_items(n_items)?;
    let mut documents = documents;
    documents.extend((documents.len()..n_items).map(|i| RawDocument {
        id: i as u32,
        title: String::new(),
        sentences: Vec::new(),
        tags: Vec::new(),
    }));
    let stats = write_dataset(&p.dataset, &interactions, &documents, &tag_names)?;
    log::info!("{}", stats.summary_line());
    Ok(stats)
}

pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let meta_path = dir.join(META_FILE);
    let meta_text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let stats: DatasetStats =
        serde_json::from_str(&meta_text).map_err(|e| Error::parse(&meta_path, 1, e.to_string()))?;
    let interactions = InteractionMatrix::read_tsv(&dir.join(INTERACTIONS_FILE), stats.n_users, stats.n_items)?;
    let documents = read_documents_jsonl(&dir.join(DOCUMENTS_FILE))?;
    let tag_names = read_tag_names(&dir.join(TAGS_FILE))?;
    if documents.len() != stats.n_items || tag_names.len() != stats.n_tags || interactions.n_pairs() != stats.n_pairs {
        return Err(Error::Data(format!(
            "{}: files disagree with {META_FILE}",
            dir.display()
        )));
    }
    Ok(Dataset {
        interactions,
        documents,
        tag_names,
        stats,
    })
}

/// Word vocabulary, top-T tag vocabulary and encoded documents.
pub fn build_corpus(dataset: &Dataset, cfg: &CorpusConfig) -> Result<Corpus> {
    let words = WordVocabulary::build(&dataset.documents, cfg.vocab_size);
    let mut documents: Vec<Document> = dataset
        .documents
        .iter()
        .map(|d| encode_document(d, &words, cfg.limits()))
        .collect();
    let tags = build_tag_vocabulary(&mut documents, &dataset.tag_names, cfg.n_tags)?;
    Ok(Corpus { documents, words, tags })
}

pub fn item_features(corpus: &Corpus, n_items: usize, kind: FeatureKind) -> Result<FeatureMatrix> {
    match kind {
        FeatureKind::Identity => build_identity_features(n_items),
        FeatureKind::Tags => build_tag_features(&corpus.documents, n_items, corpus.tags.len(), true),
        FeatureKind::Tfidf => build_tfidf_features(&corpus.documents, n_items, &corpus.words, true),
    }
}

pub fn features_path(cfg: &PipelineConfig, kind: FeatureKind) -> PathBuf {
    cfg.paths.artifacts.join(format!("features-{}.tsv", kind.as_str()))
}

/// Builds and writes the item feature matrix of `kind`.
pub fn features(cfg: &PipelineConfig, kind: FeatureKind) -> Result<PathBuf> {
    let dataset = load_dataset(&cfg.paths.dataset)?;
    let corpus = build_corpus(&dataset, &cfg.corpus)?;
    let m = item_features(&corpus, dataset.stats.n_items, kind)?;
    create_dir(&cfg.paths.artifacts)?;
    let path = features_path(cfg, kind);
    m.write_tsv(&path)?;
    log::info!(
        "{} item features, {} nonzeros -> {}",
        m.n_features,
        m.nnz(),
        path.display()
    );
    Ok(path)
}

pub fn encoder_path(cfg: &PipelineConfig) -> PathBuf {
    cfg.paths.artifacts.join("encoder.json")
}

pub fn embeddings_path(cfg: &PipelineConfig) -> PathBuf {
    cfg.paths.artifacts.join("embeddings.txt")
}

/// Trains the document encoder on the top-T tags and writes its checkpoint
/// and a per-epoch loss log next to it.
pub fn train_encoder_stage(cfg: &PipelineConfig, out: &Path) -> Result<EncoderCheckpoint> {
    cfg.validate()?;
    let dataset = load_dataset(&cfg.paths.dataset)?;
    let corpus = build_corpus(&dataset, &cfg.corpus)?;
    if corpus.tags.len() != cfg.encoder.n_tags {
        return Err(Error::Config(format!(
            "tag vocabulary has {} tags but the encoder predicts {}",
            corpus.tags.len(),
            cfg.encoder.n_tags
        )));
    }
    let (params, log) = train_encoder(&corpus.documents, corpus.words.size(), &cfg.encoder)?;
    let ckpt = EncoderCheckpoint::new(cfg.encoder.clone(), corpus.words, corpus.tags, params, log);
    if let Some(dir) = out.parent() {
        create_dir(dir)?;
    }
    ckpt.save(out)?;
    let mut lines = String::from("epoch\tmean_bce\n");
    for e in &ckpt.epoch_log {
        lines.push_str(&format!("{}\t{:.9}\n", e.epoch, e.mean_loss));
    }
    write_text(&out.with_extension("log.tsv"), &lines)?;
    Ok(ckpt)
}

/// Exports one document vector per item with a trained encoder.
pub fn embed(cfg: &PipelineConfig, encoder: &Path, out: &Path) -> Result<DenseItemEmbeddings> {
    let ckpt = EncoderCheckpoint::load(encoder)?;
    let dataset = load_dataset(&cfg.paths.dataset)?;
    let limits = crate::corpus::DocumentLimits {
        max_sentences: ckpt.config.max_sentences,
        max_words: ckpt.config.max_words,
    };
    let docs: Vec<Document> = dataset
        .documents
        .iter()
        .map(|d| encode_document(d, &ckpt.word_vocabulary, limits))
        .collect();
    let emb = export_embeddings(&docs, dataset.stats.n_items, &ckpt.params)?;
    if let Some(dir) = out.parent() {
        create_dir(dir)?;
    }
    emb.write(out)?;
    Ok(emb)
}

/// Inputs of a factorization model rebuilt from the dataset.
pub struct MfInputs {
    pub user_features: FeatureMatrix,
    pub item_features: FeatureMatrix,
    pub dense: Option<DenseItemEmbeddings>,
}

impl MfInputs {
    pub fn feature_set(&self) -> FeatureSet<'_> {
        FeatureSet::new(&self.user_features, &self.item_features, self.dense.as_ref())
    }
}

fn mf_inputs(
    dataset: &Dataset,
    corpus_cfg: &CorpusConfig,
    kind: FeatureKind,
    metadata: MetadataMode,
    embeddings: Option<&Path>,
) -> Result<MfInputs> {
    let n_items = dataset.stats.n_items;
    let item_features = match kind {
        FeatureKind::Identity => build_identity_features(n_items)?,
        _ => item_features(&build_corpus(dataset, corpus_cfg)?, n_items, kind)?,
    };
    let dense = match (metadata, embeddings) {
        (MetadataMode::None, _) => None,
        (_, None) => {
            return Err(Error::Config(format!(
                "metadata mode {metadata:?} needs mf.embeddings to name an embeddings file"
            )))
        }
        (_, Some(path)) => {
            if !path.is_file() {
                return Err(Error::Data(format!(
                    "embeddings file {} does not exist",
                    path.display()
                )));
            }
            let e = DenseItemEmbeddings::read(path)?;
            if e.n_items() != n_items {
                return Err(Error::Data(format!(
                    "{} has {} vectors but the dataset has {n_items} items",
                    path.display(),
                    e.n_items()
                )));
            }
            Some(e)
        }
    };
    Ok(MfInputs {
        user_features: build_identity_features(dataset.stats.n_users)?,
        item_features,
        dense,
    })
}

/// Trains one factorization model per configured split.
pub fn train_mf(cfg: &PipelineConfig, out: &Path) -> Result<MfCheckpoint> {
    cfg.validate()?;
    let dataset = load_dataset(&cfg.paths.dataset)?;
    let mf = &cfg.mf;
    let inputs = mf_inputs(
        &dataset,
        &cfg.corpus,
        mf.item_features,
        mf.metadata,
        mf.embeddings.as_deref(),
    )?;
    let fs = inputs.feature_set();
    let train_cfg = mf.train_config();
    let mut runs = Vec::with_capacity(cfg.split.n_splits);
    for index in 0..cfg.split.n_splits {
        let split = cfg.split.split(index);
        let interactions = split_leave_p_in(&dataset.interactions, &split)?;
        let mut model = FactorizationModel::new(
            mf.dim,
            inputs.user_features.n_features,
            inputs.item_features.n_features,
            inputs.dense.as_ref().map(|e| e.dim()),
            mf.metadata,
            &mut rng::substream(mf.seed, 1000 + index as u64),
        )?;
        let epoch_log = factorization::train(&mut model, &interactions, &fs, &train_cfg)?;
        runs.push(MfRun {
            split,
            model,
            epoch_log,
        });
    }
    let ckpt = MfCheckpoint {
        format: MF_FORMAT.into(),
        name: mf.display_name(),
        train: train_cfg,
        d: mf.dim,
        item_features: mf.item_features,
        metadata: mf.metadata,
        vocab_size: cfg.corpus.vocab_size,
        n_tags: cfg.corpus.n_tags,
        n_users: dataset.stats.n_users,
        n_items: dataset.stats.n_items,
        n_user_features: inputs.user_features.n_features,
        n_item_features: inputs.item_features.n_features,
        dense_dim: inputs.dense.as_ref().map(|e| e.dim()),
        embeddings: mf.embeddings.as_ref().map(|e| relative_to(e, out.parent())),
        runs,
    };
    if let Some(dir) = out.parent() {
        create_dir(dir)?;
    }
    ckpt.save(out)?;
    let mut lines = String::from("split\tepoch\tmean_loss\tupdates\n");
    for (i, run) in ckpt.runs.iter().enumerate() {
        for e in &run.epoch_log {
            lines.push_str(&format!("{i}\t{}\t{:.9}\t{}\n", e.epoch, e.mean_loss, e.updates));
        }
    }
    write_text(&out.with_extension("log.tsv"), &lines)?;
    Ok(ckpt)
}

/// `path` relative to `base` when it lies inside it, so checkpoints do not
/// depend on where the artifacts directory is.
fn relative_to(path: &Path, base: Option<&Path>) -> PathBuf {
    base.and_then(|b| path.strip_prefix(b).ok())
        .map(Path::to_path_buf)
        .unwrap_or_else(|| path.to_path_buf())
}

fn checkpoint_inputs(
    ckpt: &MfCheckpoint,
    ckpt_path: &Path,
    dataset: &Dataset,
    corpus: &CorpusConfig,
) -> Result<MfInputs> {
    if (ckpt.n_users, ckpt.n_items) != (dataset.stats.n_users, dataset.stats.n_items) {
        return Err(Error::Data(format!(
            "checkpoint {:?} was trained on {} users × {} items, dataset has {} × {}",
            ckpt.name, ckpt.n_users, ckpt.n_items, dataset.stats.n_users, dataset.stats.n_items
        )));
    }
    let corpus = CorpusConfig {
        vocab_size: ckpt.vocab_size,
        n_tags: ckpt.n_tags,
        ..corpus.clone()
    };
    let embeddings = ckpt.embeddings.as_ref().map(|e| match ckpt_path.parent() {
        Some(dir) if e.is_relative() => dir.join(e),
        _ => e.clone(),
    });
    mf_inputs(
        dataset,
        &corpus,
        ckpt.item_features,
        ckpt.metadata,
        embeddings.as_deref(),
    )
}

/// Recall report of a checkpoint, averaged over its splits.
pub fn evaluate_checkpoint(
    ckpt: &MfCheckpoint,
    ckpt_path: &Path,
    dataset: &Dataset,
    corpus: &CorpusConfig,
    ks: &[usize],
) -> Result<RecallReport> {
    let inputs = checkpoint_inputs(ckpt, ckpt_path, dataset, corpus)?;
    let reports = ckpt
        .runs
        .iter()
        .map(|run| {
            let interactions = split_leave_p_in(&dataset.interactions, &run.split)?;
            let bound = run.model.bind(inputs.feature_set())?;
            evaluate(&bound, &interactions, ks)
        })
        .collect::<Result<Vec<_>>>()?;
    RecallReport::average(&reports)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationOutput {
    pub comparison: ComparisonReport,
    /// Full per-model reports, present when `eval.per_user` is set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reports: Option<Vec<RecallReport>>,
}

/// Evaluates checkpoints on their own splits and writes `report.json` and
/// `report.txt` into `out_dir`.
pub fn evaluate_checkpoints(cfg: &PipelineConfig, checkpoints: &[PathBuf], out_dir: &Path) -> Result<EvaluationOutput> {
    if checkpoints.is_empty() {
        return Err(Error::Config("no checkpoints to evaluate".into()));
    }
    let dataset = load_dataset(&cfg.paths.dataset)?;
    let ckpts = checkpoints
        .iter()
        .map(|p| MfCheckpoint::load(p))
        .collect::<Result<Vec<_>>>()?;
    let splits: Vec<_> = ckpts[0].runs.iter().map(|r| r.split).collect();
    if ckpts
        .iter()
        .any(|c| c.runs.iter().map(|r| r.split).ne(splits.iter().copied()))
    {
        return Err(Error::Data(
            "checkpoints were trained on different splits and cannot be paired".into(),
        ));
    }
    let mut named = Vec::with_capacity(ckpts.len());
    for (c, path) in ckpts.iter().zip(checkpoints) {
        named.push((
            c.name.clone(),
            evaluate_checkpoint(c, path, &dataset, &cfg.corpus, &cfg.eval.ks)?,
        ));
    }
    let comparison = ComparisonReport::build(&named, cfg.eval.baseline)?;
    let output = EvaluationOutput {
        comparison,
        reports: cfg.eval.per_user.then(|| named.into_iter().map(|(_, r)| r).collect()),
    };
    create_dir(out_dir)?;
    write_json(&out_dir.join("report.json"), &output)?;
    write_text(&out_dir.join("report.txt"), &output.comparison.to_table())?;
    Ok(output)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub item: u32,
    pub score: f64,
    pub title: Option<String>,
}

/// Top-`k` unseen items for `user` under the checkpoint's first split.
pub fn recommend(cfg: &PipelineConfig, checkpoint: &Path, user: usize, k: usize) -> Result<Vec<Recommendation>> {
    let ckpt = MfCheckpoint::load(checkpoint)?;
    let dataset = load_dataset(&cfg.paths.dataset)?;
    if user >= dataset.stats.n_users {
        return Err(Error::Data(format!(
            "unknown user {user} (dataset has {} users)",
            dataset.stats.n_users
        )));
    }
    let inputs = checkpoint_inputs(&ckpt, checkpoint, &dataset, &cfg.corpus)?;
    let run = &ckpt.runs[0];
    let interactions = split_leave_p_in(&dataset.interactions, &run.split)?;
    let bound = run.model.bind(inputs.feature_set())?;
    let ranking = top_candidates(&bound, user, &interactions, k)?;
    Ok(ranking
        .ranked_items
        .iter()
        .zip(&ranking.scores)
        .map(|(&item, &score)| {
            let title = &dataset.documents[item as usize].title;
            Recommendation {
                item,
                score,
                title: (!title.is_empty()).then(|| title.clone()),
            }
        })
        .collect())
}

/// Writes a small planted-community dataset in canonical input form
/// (pairs TSV, JSONL documents, tag names) and returns a config whose
/// paths point at it, with model sizes scaled down to match.
pub fn write_toy_inputs(dir: &Path, seed: u64) -> Result<PipelineConfig> {
    create_dir(dir)?;
    let spec = BlockSpec::default();
    let interactions = planted_blocks(&spec, seed);
    let (documents, tag_names) = block_documents(&spec, seed);
    let raw = dir.join("raw");
    create_dir(&raw)?;
    let pairs_path = raw.join("pairs.tsv");
    let mut pairs = fs::File::create(&pairs_path).map_err(|e| Error::io(&pairs_path, e))?;
    for (u, i) in (0..interactions.n_users()).flat_map(|u| interactions.row(u).iter().map(move |&i| (u, i))) {
        writeln!(pairs, "{u}\t{i}").map_err(|e| Error::io(&pairs_path, e))?;
    }
    write_documents_jsonl(&raw.join(DOCUMENTS_FILE), &documents)?;
    write_text(&raw.join(TAGS_FILE), &(tag_names.join("\n") + "\n"))?;

    let mut cfg = PipelineConfig::default();
    cfg.paths.interactions = Some(pairs_path);
    cfg.paths.interactions_format = InteractionFormat::Pairs;
    cfg.paths.documents = Some(raw.join(DOCUMENTS_FILE));
    cfg.paths.tag_names = Some(raw.join(TAGS_FILE));
    cfg.paths.dataset = dir.join("dataset");
    cfg.paths.artifacts = dir.join("artifacts");
    cfg.corpus.vocab_size = 100;
    cfg.corpus.n_tags = tag_names.len();
    cfg.encoder.n_tags = tag_names.len();
    cfg.encoder.embed_dim = 8;
    cfg.encoder.hidden_dim = 4;
    cfg.encoder.attention_dim = 8;
    cfg.encoder.epochs = 30;
    cfg.encoder.learning_rate = 0.01;
    cfg.mf.dim = 8;
    cfg.mf.epochs = 10;
    cfg.eval.ks = vec![5, 10, 20];
    Ok(cfg)
}
