use super::crf::viterbi_decode;
use super::network::{decode_step, emissions, encode, DecoderState};
use super::params::ModelParams;
use super::vocab::{EOS_ID, PAD_ID, SOS_ID, UNK_ID};
use super::NeuralError;
use crate::qqt::Tag;
use crate::scalar::Scalar;
use crate::text::{embed_sequence, TokenSeq};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prediction {
    pub template: Vec<String>,
    pub tags: Vec<Tag>,
    /// Decoding hit the length limit before emitting EOS.
    pub truncated: bool,
}

/// Viterbi tags and a greedy template. PAD, SOS and UNK are never emitted.
pub fn predict<T: Scalar>(q: &TokenSeq, model: &ModelParams<T>) -> Result<Prediction, NeuralError> {
    if q.is_empty() {
        return Err(NeuralError::EmptyQuestion);
    }
    let x = embed_sequence(q, &model.embeddings);
    let enc = encode(&x, &model.weights);

    let tagger = model.tagger.as_ref().unwrap_or(&model.weights);
    let tag_h = if model.tagger.is_some() {
        encode(&x, tagger).h
    } else {
        enc.h.clone()
    };
    let tags = viterbi_decode(&emissions(&tag_h, tagger), &tagger.transitions)
        .into_iter()
        .map(|id| Tag::from_id(id).expect("tag id in range"))
        .collect();

    let mut template = Vec::new();
    let mut state = DecoderState::initial(&enc);
    let mut prev = SOS_ID;
    let mut truncated = true;
    for _ in 0..model.hp.max_decode_len {
        let step = decode_step(prev, &state, &enc.h, &model.weights);
        let mut best = EOS_ID;
        let mut best_p = T::neg_infinity();
        for (id, &p) in step.probs.iter().enumerate() {
            let id = id as u32;
            if matches!(id, PAD_ID | SOS_ID | UNK_ID) {
                continue;
            }
            if p > best_p {
                best = id;
                best_p = p;
            }
        }
        if best == EOS_ID {
            truncated = false;
            break;
        }
        template.push(model.template_vocab.token(best).to_string());
        prev = best;
        state = step.state;
    }
    Ok(Prediction {
        template,
        tags,
        truncated,
    })
}
