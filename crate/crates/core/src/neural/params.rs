use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::vocab::Vocabulary;
use super::NeuralError;
use crate::linalg::Mat;
use crate::scalar::Scalar;
use crate::text::EmbeddingTable;

/// BIO tag count.
pub const TAGS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparams {
    /// Word embedding size `d`.
    pub embed_dim: usize,
    /// LSTM hidden units `h`.
    pub hidden: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub clip_norm: f64,
    /// Weight of the tagging loss.
    pub lambda: f64,
    pub seed: u64,
    pub max_decode_len: usize,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            embed_dim: 300,
            hidden: 96,
            batch_size: 64,
            epochs: 5,
            learning_rate: 1e-3,
            clip_norm: 5.0,
            lambda: 1.0,
            seed: 42,
            max_decode_len: 64,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<(), NeuralError> {
        let positive = [
            ("embed_dim", self.embed_dim),
            ("hidden", self.hidden),
            ("batch_size", self.batch_size),
            ("epochs", self.epochs),
            ("max_decode_len", self.max_decode_len),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(NeuralError::Hyperparams(format!("{name} must be positive")));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(NeuralError::Hyperparams("learning_rate must be positive".into()));
        }
        if !(self.clip_norm > 0.0 && self.clip_norm.is_finite()) {
            return Err(NeuralError::Hyperparams("clip_norm must be positive".into()));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(NeuralError::Hyperparams("lambda must be ≥ 0".into()));
        }
        Ok(())
    }
}

/// One LSTM layer. Gate blocks are laid out `[i | f | o | g]` along the
/// columns: `u` is `in × 4h`, `w` is `h × 4h`, `b` is `1 × 4h`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmWeights<T> {
    pub u: Mat<T>,
    pub w: Mat<T>,
    pub b: Mat<T>,
}

impl<T: Scalar> LstmWeights<T> {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            u: Mat::zeros(input, 4 * hidden),
            w: Mat::zeros(hidden, 4 * hidden),
            b: Mat::zeros(1, 4 * hidden),
        }
    }

    pub fn hidden(&self) -> usize {
        self.w.rows()
    }

    pub fn input(&self) -> usize {
        self.u.rows()
    }
}

/// All learnable tensors of the joint network, row-vector convention.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights<T> {
    pub enc_fwd: LstmWeights<T>,
    pub enc_bwd: LstmWeights<T>,
    /// `2h × h`, maps final encoder states to the decoder's initial state.
    pub bridge_w: Mat<T>,
    pub bridge_b: Mat<T>,
    /// Template-token embeddings, `V × d`.
    pub dec_embed: Mat<T>,
    pub dec: LstmWeights<T>,
    /// Bilinear attention, `h × 2h`.
    pub attn: Mat<T>,
    /// `[context ; state] → h̃`, `3h × h`.
    pub combine: Mat<T>,
    /// `h × V`
    pub out: Mat<T>,
    /// Tag emissions, `2h × T`.
    pub emit_w: Mat<T>,
    pub emit_b: Mat<T>,
    /// `(T+2) × (T+2)`; index `T` is START, `T+1` is END.
    pub transitions: Mat<T>,
}

pub const START: usize = TAGS;
pub const END: usize = TAGS + 1;

impl<T: Scalar> Weights<T> {
    pub fn zeros(embed_dim: usize, hidden: usize, vocab: usize) -> Self {
        let h = hidden;
        Self {
            enc_fwd: LstmWeights::zeros(embed_dim, h),
            enc_bwd: LstmWeights::zeros(embed_dim, h),
            bridge_w: Mat::zeros(2 * h, h),
            bridge_b: Mat::zeros(1, h),
            dec_embed: Mat::zeros(vocab, embed_dim),
            dec: LstmWeights::zeros(embed_dim, h),
            attn: Mat::zeros(h, 2 * h),
            combine: Mat::zeros(3 * h, h),
            out: Mat::zeros(h, vocab),
            emit_w: Mat::zeros(2 * h, TAGS),
            emit_b: Mat::zeros(1, TAGS),
            transitions: structural_transitions(),
        }
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = Self::zeros(self.enc_fwd.input(), self.enc_fwd.hidden(), self.out.cols());
        z.transitions = Mat::zeros(TAGS + 2, TAGS + 2);
        z
    }

    pub fn hidden(&self) -> usize {
        self.enc_fwd.hidden()
    }

    pub fn embed_dim(&self) -> usize {
        self.enc_fwd.input()
    }

    pub fn vocab_size(&self) -> usize {
        self.out.cols()
    }

    /// Tensors in their fixed serialization order.
    pub fn tensors(&self) -> Vec<(&'static str, &Mat<T>)> {
        vec![
            ("enc.fwd.U", &self.enc_fwd.u),
            ("enc.fwd.W", &self.enc_fwd.w),
            ("enc.fwd.b", &self.enc_fwd.b),
            ("enc.bwd.U", &self.enc_bwd.u),
            ("enc.bwd.W", &self.enc_bwd.w),
            ("enc.bwd.b", &self.enc_bwd.b),
            ("bridge.W", &self.bridge_w),
            ("bridge.b", &self.bridge_b),
            ("dec.embed", &self.dec_embed),
            ("dec.U", &self.dec.u),
            ("dec.W", &self.dec.w),
            ("dec.b", &self.dec.b),
            ("attn.W_a", &self.attn),
            ("attn.W_c", &self.combine),
            ("out.W_s", &self.out),
            ("crf.emit.W", &self.emit_w),
            ("crf.emit.b", &self.emit_b),
            ("crf.transitions", &self.transitions),
        ]
    }

    pub fn tensors_mut(&mut self) -> Vec<(&'static str, &mut Mat<T>)> {
        vec![
            ("enc.fwd.U", &mut self.enc_fwd.u),
            ("enc.fwd.W", &mut self.enc_fwd.w),
            ("enc.fwd.b", &mut self.enc_fwd.b),
            ("enc.bwd.U", &mut self.enc_bwd.u),
            ("enc.bwd.W", &mut self.enc_bwd.w),
            ("enc.bwd.b", &mut self.enc_bwd.b),
            ("bridge.W", &mut self.bridge_w),
            ("bridge.b", &mut self.bridge_b),
            ("dec.embed", &mut self.dec_embed),
            ("dec.U", &mut self.dec.u),
            ("dec.W", &mut self.dec.w),
            ("dec.b", &mut self.dec.b),
            ("attn.W_a", &mut self.attn),
            ("attn.W_c", &mut self.combine),
            ("out.W_s", &mut self.out),
            ("crf.emit.W", &mut self.emit_w),
            ("crf.emit.b", &mut self.emit_b),
            ("crf.transitions", &mut self.transitions),
        ]
    }

    pub fn add_assign(&mut self, other: &Self) {
        for ((_, a), (_, b)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.add_assign(b);
        }
    }

    pub fn scale(&mut self, k: T) {
        for (_, a) in self.tensors_mut() {
            a.scale(k);
        }
    }

    pub fn sum_sq(&self) -> T {
        self.tensors().iter().fold(T::zero(), |acc, (_, m)| acc + m.sum_sq())
    }

    /// All finite, except the structural `-inf` transition entries.
    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(name, m)| {
            if *name == "crf.transitions" {
                (0..m.rows()).all(|r| {
                    (0..m.cols()).all(|c| is_structural(r, c) || m.get(r, c).is_finite())
                })
            } else {
                m.is_finite()
            }
        })
    }

    pub fn cast<U: Scalar>(&self) -> Weights<U> {
        let conv = |m: &Mat<T>| m.map(|v| U::of(v.as_f64()));
        let lstm = |l: &LstmWeights<T>| LstmWeights {
            u: conv(&l.u),
            w: conv(&l.w),
            b: conv(&l.b),
        };
        Weights {
            enc_fwd: lstm(&self.enc_fwd),
            enc_bwd: lstm(&self.enc_bwd),
            bridge_w: conv(&self.bridge_w),
            bridge_b: conv(&self.bridge_b),
            dec_embed: conv(&self.dec_embed),
            dec: lstm(&self.dec),
            attn: conv(&self.attn),
            combine: conv(&self.combine),
            out: conv(&self.out),
            emit_w: conv(&self.emit_w),
            emit_b: conv(&self.emit_b),
            transitions: conv(&self.transitions),
        }
    }
}

/// Entries that are `-inf` by construction: transitions into START and out
/// of END.
pub fn is_structural(from: usize, to: usize) -> bool {
    to == START || from == END
}

fn structural_transitions<T: Scalar>() -> Mat<T> {
    let mut m = Mat::zeros(TAGS + 2, TAGS + 2);
    for r in 0..TAGS + 2 {
        for c in 0..TAGS + 2 {
            if is_structural(r, c) {
                m.set(r, c, T::neg_infinity());
            }
        }
    }
    m
}

fn xavier<T: Scalar>(m: &mut Mat<T>, rng: &mut ChaCha8Rng) {
    let limit = (6.0 / (m.rows() + m.cols()) as f64).sqrt();
    for v in m.data_mut() {
        *v = T::of(rng.gen_range(-limit..=limit));
    }
}

fn init_lstm<T: Scalar>(l: &mut LstmWeights<T>, rng: &mut ChaCha8Rng) {
    let h = l.hidden();
    // per-gate fan-in/fan-out, one gate block at a time
    for m in [&mut l.u, &mut l.w] {
        let limit = (6.0 / (m.rows() + h) as f64).sqrt();
        for v in m.data_mut() {
            *v = T::of(rng.gen_range(-limit..=limit));
        }
    }
    let bias = l.b.data_mut();
    for v in bias.iter_mut() {
        *v = T::zero();
    }
    for v in &mut bias[h..2 * h] {
        *v = T::one();
    }
}

/// Seeded initialization: Xavier-uniform matrices, zero biases, forget-gate
/// bias 1, zero transitions apart from the structural `-inf` entries.
pub fn init_weights<T: Scalar>(hp: &Hyperparams, vocab_size: usize) -> Weights<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
    let mut w = Weights::zeros(hp.embed_dim, hp.hidden, vocab_size);
    init_lstm(&mut w.enc_fwd, &mut rng);
    init_lstm(&mut w.enc_bwd, &mut rng);
    xavier(&mut w.bridge_w, &mut rng);
    xavier(&mut w.dec_embed, &mut rng);
    init_lstm(&mut w.dec, &mut rng);
    xavier(&mut w.attn, &mut rng);
    xavier(&mut w.combine, &mut rng);
    xavier(&mut w.out, &mut rng);
    xavier(&mut w.emit_w, &mut rng);
    w
}

/// One trained network together with everything needed to run it.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    pub hp: Hyperparams,
    /// Normalized question words seen in training.
    pub input_vocab: Vocabulary,
    pub template_vocab: Vocabulary,
    pub embeddings: EmbeddingTable<T>,
    pub weights: Weights<T>,
    /// A separately trained tagging network; when absent the joint network
    /// tags.
    pub tagger: Option<Weights<T>>,
}

/// Builds freshly initialized parameters.
pub fn init_params<T: Scalar>(
    hp: &Hyperparams,
    input_vocab: Vocabulary,
    template_vocab: Vocabulary,
    embeddings: EmbeddingTable<T>,
) -> Result<ModelParams<T>, NeuralError> {
    hp.validate()?;
    if embeddings.dim() != hp.embed_dim {
        return Err(NeuralError::Hyperparams(format!(
            "embedding table has dimension {}, hyperparameters say {}",
            embeddings.dim(),
            hp.embed_dim
        )));
    }
    let weights = init_weights(hp, template_vocab.len());
    Ok(ModelParams {
        hp: hp.clone(),
        input_vocab,
        template_vocab,
        embeddings,
        weights,
        tagger: None,
    })
}
