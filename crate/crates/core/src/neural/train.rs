use std::collections::BTreeMap;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::network::{instance_backward, LossParts, LossWeights};
use super::params::{init_params, Hyperparams, ModelParams, Weights};
use super::vocab::Vocabulary;
use super::NeuralError;
use crate::linalg::Mat;
use crate::qqt::QqtTriple;
use crate::scalar::Scalar;
use crate::text::{EmbeddingGrad, EmbeddingTable};

/// Instances per parallel work unit; fixed so the reduction order never
/// depends on the thread count.
const CHUNK: usize = 4;

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainMode {
    Joint,
    /// Tagger and translator trained as two networks.
    Separate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub mean_loss: f64,
    pub nmt_loss: f64,
    pub ner_loss: f64,
}

/// One training example in id form.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub words: Vec<String>,
    pub template: Vec<u32>,
    pub tags: Vec<usize>,
}

impl Instance {
    pub fn from_triple(t: &QqtTriple, template_vocab: &Vocabulary) -> Self {
        Self {
            words: t.question.norms().iter().map(|s| s.to_string()).collect(),
            template: t.template.iter().map(|tok| template_vocab.id(tok)).collect(),
            tags: t.tagging.iter().map(|tag| tag.id()).collect(),
        }
    }
}

/// Input and output vocabularies from the training split.
pub fn build_vocabularies(data: &[QqtTriple]) -> (Vocabulary, Vocabulary) {
    let input = Vocabulary::from_tokens(data.iter().flat_map(|t| t.question.norms()));
    let output = Vocabulary::from_tokens(data.iter().flat_map(|t| t.template.iter().map(String::as_str)));
    (input, output)
}

fn embed_words<T: Scalar>(words: &[String], table: &EmbeddingTable<T>) -> Mat<T> {
    let rows: Vec<Vec<T>> = words.iter().map(|w| table.lookup(w)).collect();
    Mat::from_rows(&rows)
}

struct Adam<T> {
    m: Weights<T>,
    v: Weights<T>,
    known: BTreeMap<String, (Vec<T>, Vec<T>)>,
    buckets: BTreeMap<u32, (Vec<T>, Vec<T>)>,
    step: i32,
    lr: f64,
}

fn adam_update<T: Scalar>(p: &mut [T], g: &[T], m: &mut [T], v: &mut [T], lr_t: T) {
    let (b1, b2, eps) = (T::of(BETA1), T::of(BETA2), T::of(ADAM_EPS));
    for k in 0..p.len() {
        if !p[k].is_finite() {
            continue;
        }
        m[k] = b1 * m[k] + (T::one() - b1) * g[k];
        v[k] = b2 * v[k] + (T::one() - b2) * g[k] * g[k];
        p[k] -= lr_t * m[k] / (v[k].sqrt() + eps);
    }
}

impl<T: Scalar> Adam<T> {
    fn new(w: &Weights<T>, lr: f64) -> Self {
        Self {
            m: w.zeros_like(),
            v: w.zeros_like(),
            known: BTreeMap::new(),
            buckets: BTreeMap::new(),
            step: 0,
            lr,
        }
    }

    fn apply(
        &mut self,
        w: &mut Weights<T>,
        g: &Weights<T>,
        table: &mut EmbeddingTable<T>,
        eg: &EmbeddingGrad<T>,
    ) {
        self.step += 1;
        let t = self.step;
        let lr_t = T::of(self.lr * (1.0 - BETA2.powi(t)).sqrt() / (1.0 - BETA1.powi(t)));
        let params = w.tensors_mut();
        let grads = g.tensors();
        let ms = self.m.tensors_mut();
        let vs = self.v.tensors_mut();
        for (((p, g), m), v) in params.into_iter().zip(grads).zip(ms).zip(vs) {
            adam_update(p.1.data_mut(), g.1.data(), m.1.data_mut(), v.1.data_mut(), lr_t);
        }
        let dim = table.dim();
        for (word, grad) in &eg.known {
            let (m, v) = self
                .known
                .entry(word.clone())
                .or_insert_with(|| (vec![T::zero(); dim], vec![T::zero(); dim]));
            let mut p = table.lookup(word);
            adam_update(&mut p, grad, m, v, lr_t);
            table.insert(word, p).expect("dimension preserved");
        }
        for (&b, grad) in &eg.buckets {
            let (m, v) = self
                .buckets
                .entry(b)
                .or_insert_with(|| (vec![T::zero(); dim], vec![T::zero(); dim]));
            let mut p = table.bucket_vector(b);
            adam_update(&mut p, grad, m, v, lr_t);
            table.set_bucket(b, p);
        }
    }
}

struct ChunkResult<T> {
    grad: Weights<T>,
    emb: EmbeddingGrad<T>,
    parts: Vec<LossParts>,
}

/// Mini-batch training of one network in place. The order is reshuffled
/// after every epoch with a PRNG seeded from `hp.seed`.
pub fn train_weights<T: Scalar>(
    instances: &[Instance],
    weights: &mut Weights<T>,
    table: &mut EmbeddingTable<T>,
    hp: &Hyperparams,
    lw: LossWeights,
) -> Result<Vec<EpochLog>, NeuralError> {
    hp.validate()?;
    if instances.is_empty() {
        return Err(NeuralError::EmptyDataset);
    }
    if instances.iter().any(|i| i.words.is_empty()) {
        return Err(NeuralError::EmptyQuestion);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
    let mut order: Vec<usize> = (0..instances.len()).collect();
    let mut adam = Adam::new(weights, hp.learning_rate);
    let mut log = Vec::with_capacity(hp.epochs);
    for epoch in 1..=hp.epochs {
        let mut totals = LossParts::default();
        for batch in order.chunks(hp.batch_size) {
            let scale = T::one() / T::of(batch.len() as f64);
            let w: &Weights<T> = weights;
            let tbl: &EmbeddingTable<T> = table;
            let results: Vec<ChunkResult<T>> = batch
                .par_chunks(CHUNK)
                .map(|chunk| {
                    let mut grad = w.zeros_like();
                    let mut emb = EmbeddingGrad::default();
                    let mut parts = Vec::with_capacity(chunk.len());
                    for &i in chunk {
                        let inst = &instances[i];
                        let x = embed_words(&inst.words, tbl);
                        let (p, dx) =
                            instance_backward(&x, &inst.template, &inst.tags, w, lw, scale, &mut grad);
                        if tbl.trainable() {
                            for (t, word) in inst.words.iter().enumerate() {
                                emb.accumulate(tbl, word, dx.row(t));
                            }
                        }
                        parts.push(p);
                    }
                    ChunkResult { grad, emb, parts }
                })
                .collect();
            let mut grad = weights.zeros_like();
            let mut emb = EmbeddingGrad::default();
            for r in &results {
                grad.add_assign(&r.grad);
                emb.merge(&r.emb);
                for p in &r.parts {
                    totals.nmt += p.nmt;
                    totals.ner += p.ner;
                }
            }
            let norm = (grad.sum_sq() + emb.sum_sq()).sqrt();
            let clip = T::of(hp.clip_norm);
            if norm > clip {
                grad.scale(clip / norm);
                emb.scale(clip / norm);
            }
            adam.apply(weights, &grad, table, &emb);
        }
        let n = instances.len() as f64;
        let (nmt, ner) = (totals.nmt / n, totals.ner / n);
        log.push(EpochLog {
            epoch,
            mean_loss: lw.nmt * nmt + lw.ner * ner,
            nmt_loss: nmt,
            ner_loss: ner,
        });
        order.shuffle(&mut rng);
    }
    Ok(log)
}

/// Builds vocabularies, initializes and trains. `Separate` trains the
/// translator with tagging weight 0 and a second network with translation
/// weight 0; the log sums the two runs epoch by epoch.
pub fn train<T: Scalar>(
    data: &[QqtTriple],
    hp: &Hyperparams,
    embeddings: EmbeddingTable<T>,
    mode: TrainMode,
) -> Result<(ModelParams<T>, Vec<EpochLog>), NeuralError> {
    if data.is_empty() {
        return Err(NeuralError::EmptyDataset);
    }
    let (input_vocab, template_vocab) = build_vocabularies(data);
    let instances: Vec<Instance> = data
        .iter()
        .map(|t| Instance::from_triple(t, &template_vocab))
        .collect();
    let mut model = init_params(hp, input_vocab, template_vocab, embeddings)?;
    match mode {
        TrainMode::Joint => {
            let lw = LossWeights::joint(hp.lambda);
            let log = train_weights(&instances, &mut model.weights, &mut model.embeddings, hp, lw)?;
            Ok((model, log))
        }
        TrainMode::Separate => {
            let mut tagger = model.weights.clone();
            let nmt = train_weights(
                &instances,
                &mut model.weights,
                &mut model.embeddings,
                hp,
                LossWeights::NMT_ONLY,
            )?;
            let ner = train_weights(
                &instances,
                &mut tagger,
                &mut model.embeddings,
                hp,
                LossWeights::NER_ONLY,
            )?;
            model.tagger = Some(tagger);
            let log = nmt
                .iter()
                .zip(&ner)
                .map(|(a, b)| EpochLog {
                    epoch: a.epoch,
                    mean_loss: a.nmt_loss + b.ner_loss,
                    nmt_loss: a.nmt_loss,
                    ner_loss: b.ner_loss,
                })
                .collect();
            Ok((model, log))
        }
    }
}

/// `epoch<TAB>mean_loss<TAB>nmt_loss<TAB>ner_loss` per line.
pub fn write_log<W: Write>(mut out: W, log: &[EpochLog]) -> std::io::Result<()> {
    for e in log {
        writeln!(
            out,
            "{}\t{:.6}\t{:.6}\t{:.6}",
            e.epoch, e.mean_loss, e.nmt_loss, e.ner_loss
        )?;
    }
    Ok(())
}
