use super::crf::{crf_log_likelihood, crf_nll_backward};
use super::lstm::{lstm_backward, lstm_forward, LstmCache};
use super::params::Weights;
use super::vocab::{EOS_ID, SOS_ID};
use crate::linalg::{dot, Mat};
use crate::scalar::{softmax_in_place, Scalar};

/// Encoder output: `H` is `L × 2h`, row `t` = `[forward_t ; backward_t]`.
#[derive(Debug, Clone)]
pub struct Encoded<T> {
    pub h: Mat<T>,
    /// Bridge-projected initial decoder state.
    pub s0: Vec<T>,
    fwd: Vec<LstmCache<T>>,
    /// Indexed by time position, not processing order.
    bwd: Vec<LstmCache<T>>,
    bridge_in: Vec<T>,
}

pub fn encode<T: Scalar>(x: &Mat<T>, w: &Weights<T>) -> Encoded<T> {
    let (len, _) = x.shape();
    assert!(len >= 1, "encode needs at least one token");
    let hd = w.hidden();
    let zero = vec![T::zero(); hd];
    let mut fwd: Vec<LstmCache<T>> = Vec::with_capacity(len);
    for t in 0..len {
        let (s, c) = match fwd.last() {
            Some(p) => (p.s.clone(), p.c.clone()),
            None => (zero.clone(), zero.clone()),
        };
        fwd.push(lstm_forward(x.row(t), &s, &c, &w.enc_fwd));
    }
    let mut bwd_rev: Vec<LstmCache<T>> = Vec::with_capacity(len);
    for t in (0..len).rev() {
        let (s, c) = match bwd_rev.last() {
            Some(p) => (p.s.clone(), p.c.clone()),
            None => (zero.clone(), zero.clone()),
        };
        bwd_rev.push(lstm_forward(x.row(t), &s, &c, &w.enc_bwd));
    }
    bwd_rev.reverse();
    let bwd = bwd_rev;
    let mut h = Mat::zeros(len, 2 * hd);
    for t in 0..len {
        let row = h.row_mut(t);
        row[..hd].copy_from_slice(&fwd[t].s);
        row[hd..].copy_from_slice(&bwd[t].s);
    }
    let mut bridge_in = fwd[len - 1].s.clone();
    bridge_in.extend_from_slice(&bwd[0].s);
    let mut s0 = w.bridge_b.data().to_vec();
    w.bridge_w.vec_mul_acc(&bridge_in, &mut s0);
    Encoded {
        h,
        s0,
        fwd,
        bwd,
        bridge_in,
    }
}

/// Tag emission scores, `L × T`.
pub fn emissions<T: Scalar>(h: &Mat<T>, w: &Weights<T>) -> Mat<T> {
    let mut e = Mat::zeros(h.rows(), w.emit_w.cols());
    for t in 0..h.rows() {
        let row = e.row_mut(t);
        row.copy_from_slice(w.emit_b.data());
        w.emit_w.vec_mul_acc(h.row(t), row);
    }
    e
}

/// Decoder recurrent state.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderState<T> {
    pub s: Vec<T>,
    pub c: Vec<T>,
}

impl<T: Scalar> DecoderState<T> {
    pub fn initial(enc: &Encoded<T>) -> Self {
        Self {
            s: enc.s0.clone(),
            c: vec![T::zero(); enc.s0.len()],
        }
    }
}

/// Everything one decoder step computed.
#[derive(Debug, Clone)]
pub struct StepOutput<T> {
    pub probs: Vec<T>,
    pub state: DecoderState<T>,
    pub attention: Vec<T>,
    lstm: LstmCache<T>,
    query: Vec<T>,
    context: Vec<T>,
    combined: Vec<T>,
}

/// One attention decoder step from the previous token.
pub fn decode_step<T: Scalar>(
    prev: u32,
    state: &DecoderState<T>,
    h: &Mat<T>,
    w: &Weights<T>,
) -> StepOutput<T> {
    let lstm = lstm_forward(w.dec_embed.row(prev as usize), &state.s, &state.c, &w.dec);
    let query = w.attn.vec_mul(&lstm.s);
    let mut attention: Vec<T> = (0..h.rows()).map(|j| dot(&query, h.row(j))).collect();
    softmax_in_place(&mut attention);
    let mut context = vec![T::zero(); h.cols()];
    for (j, &a) in attention.iter().enumerate() {
        for (c, &v) in context.iter_mut().zip(h.row(j)) {
            *c += a * v;
        }
    }
    let mut cat = context.clone();
    cat.extend_from_slice(&lstm.s);
    let combined: Vec<T> = w.combine.vec_mul(&cat).into_iter().map(|v| v.tanh()).collect();
    let mut probs = w.out.vec_mul(&combined);
    softmax_in_place(&mut probs);
    StepOutput {
        probs,
        state: DecoderState {
            s: lstm.s.clone(),
            c: lstm.c.clone(),
        },
        attention,
        lstm,
        query,
        context,
        combined,
    }
}

/// Relative weights of the two branches; a zero weight skips the branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub nmt: f64,
    pub ner: f64,
}

impl LossWeights {
    pub fn joint(lambda: f64) -> Self {
        Self { nmt: 1.0, ner: lambda }
    }

    pub const NMT_ONLY: Self = Self { nmt: 1.0, ner: 0.0 };
    pub const NER_ONLY: Self = Self { nmt: 0.0, ner: 1.0 };
}

/// Unweighted loss parts of one instance.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossParts {
    pub nmt: f64,
    pub ner: f64,
}

/// Teacher-forced decoder targets: the template followed by EOS.
fn targets(template: &[u32]) -> impl Iterator<Item = (u32, u32)> + '_ {
    std::iter::once(SOS_ID)
        .chain(template.iter().copied())
        .zip(template.iter().copied().chain(std::iter::once(EOS_ID)))
}

/// Loss parts of one instance, forward pass only.
pub fn instance_loss<T: Scalar>(
    x: &Mat<T>,
    template: &[u32],
    tags: &[usize],
    w: &Weights<T>,
    lw: LossWeights,
) -> LossParts {
    let enc = encode(x, w);
    let mut parts = LossParts::default();
    if lw.nmt != 0.0 {
        let mut state = DecoderState::initial(&enc);
        for (prev, target) in targets(template) {
            let step = decode_step(prev, &state, &enc.h, w);
            parts.nmt -= step.probs[target as usize].ln().as_f64();
            state = step.state;
        }
    }
    if lw.ner != 0.0 {
        let e = emissions(&enc.h, w);
        parts.ner = -crf_log_likelihood(&e, tags, &w.transitions).as_f64();
    }
    parts
}

/// `nmt·CE + ner·(−log p(tags))`, averaged over the batch.
pub fn joint_loss<T: Scalar>(
    batch: &[(Mat<T>, Vec<u32>, Vec<usize>)],
    w: &Weights<T>,
    lw: LossWeights,
) -> f64 {
    let total: f64 = batch
        .iter()
        .map(|(x, y, l)| {
            let p = instance_loss(x, y, l, w, lw);
            lw.nmt * p.nmt + lw.ner * p.ner
        })
        .sum();
    total / batch.len() as f64
}

/// Forward and backward pass of one instance. Gradients are those of
/// `scale · (nmt·CE + ner·NLL)` and are accumulated into `grad`.
pub fn instance_backward<T: Scalar>(
    x: &Mat<T>,
    template: &[u32],
    tags: &[usize],
    w: &Weights<T>,
    lw: LossWeights,
    scale: T,
    grad: &mut Weights<T>,
) -> (LossParts, Mat<T>) {
    let enc = encode(x, w);
    let len = x.rows();
    let hd = w.hidden();
    let mut parts = LossParts::default();
    let mut dh = Mat::zeros(len, 2 * hd);
    let mut ds0 = vec![T::zero(); hd];

    if lw.nmt != 0.0 {
        let k = scale * T::of(lw.nmt);
        let mut state = DecoderState::initial(&enc);
        let mut steps = Vec::with_capacity(template.len() + 1);
        for (prev, target) in targets(template) {
            let step = decode_step(prev, &state, &enc.h, w);
            parts.nmt -= step.probs[target as usize].ln().as_f64();
            state = step.state.clone();
            steps.push((prev, target, step));
        }
        let mut ds_next = vec![T::zero(); hd];
        let mut dc_next = vec![T::zero(); hd];
        for (prev, target, step) in steps.iter().rev() {
            let mut dlogits: Vec<T> = step.probs.iter().map(|&p| p * k).collect();
            dlogits[*target as usize] -= k;
            grad.out.outer_acc(&step.combined, &dlogits);
            let mut dcomb = vec![T::zero(); hd];
            w.out.vec_mul_t_acc(&dlogits, &mut dcomb);
            let dpre: Vec<T> = dcomb
                .iter()
                .zip(&step.combined)
                .map(|(&d, &c)| d * (T::one() - c * c))
                .collect();
            let mut cat = step.context.clone();
            cat.extend_from_slice(&step.lstm.s);
            grad.combine.outer_acc(&cat, &dpre);
            let mut dcat = vec![T::zero(); 3 * hd];
            w.combine.vec_mul_t_acc(&dpre, &mut dcat);
            let (dctx, ds_att) = dcat.split_at(2 * hd);

            let dalpha: Vec<T> = (0..len).map(|j| dot(dctx, enc.h.row(j))).collect();
            let mean = step
                .attention
                .iter()
                .zip(&dalpha)
                .fold(T::zero(), |acc, (&a, &d)| acc + a * d);
            let mut dq = vec![T::zero(); 2 * hd];
            for j in 0..len {
                let a = step.attention[j];
                let dscore = a * (dalpha[j] - mean);
                let hrow = enc.h.row(j);
                let drow = dh.row_mut(j);
                for c in 0..2 * hd {
                    drow[c] += a * dctx[c] + dscore * step.query[c];
                    dq[c] += dscore * hrow[c];
                }
            }
            grad.attn.outer_acc(&step.lstm.s, &dq);
            let mut ds = ds_att.to_vec();
            w.attn.vec_mul_t_acc(&dq, &mut ds);
            for (a, b) in ds.iter_mut().zip(&ds_next) {
                *a += *b;
            }
            let back = lstm_backward(&step.lstm, &ds, &dc_next, &w.dec, &mut grad.dec);
            for (g, d) in grad.dec_embed.row_mut(*prev as usize).iter_mut().zip(&back.dx) {
                *g += *d;
            }
            ds_next = back.ds_prev;
            dc_next = back.dc_prev;
        }
        ds0 = ds_next;
    }

    if lw.ner != 0.0 {
        let e = emissions(&enc.h, w);
        let mut de = Mat::zeros(e.rows(), e.cols());
        let k = scale * T::of(lw.ner);
        let nll = crf_nll_backward(&e, tags, &w.transitions, k, &mut de, &mut grad.transitions);
        parts.ner = (nll / k).as_f64();
        for t in 0..len {
            grad.emit_w.outer_acc(enc.h.row(t), de.row(t));
            for (b, d) in grad.emit_b.data_mut().iter_mut().zip(de.row(t)) {
                *b += *d;
            }
            w.emit_w.vec_mul_t_acc(de.row(t), dh.row_mut(t));
        }
    }

    if lw.nmt != 0.0 {
        grad.bridge_w.outer_acc(&enc.bridge_in, &ds0);
        for (b, d) in grad.bridge_b.data_mut().iter_mut().zip(&ds0) {
            *b += *d;
        }
        let mut din = vec![T::zero(); 2 * hd];
        w.bridge_w.vec_mul_t_acc(&ds0, &mut din);
        let last = dh.row_mut(len - 1);
        for c in 0..hd {
            last[c] += din[c];
        }
        let first = dh.row_mut(0);
        for c in 0..hd {
            first[hd + c] += din[hd + c];
        }
    }

    let mut dx = Mat::zeros(len, x.cols());
    let mut ds = vec![T::zero(); hd];
    let mut dc = vec![T::zero(); hd];
    for t in (0..len).rev() {
        for (a, b) in ds.iter_mut().zip(&dh.row(t)[..hd]) {
            *a += *b;
        }
        let back = lstm_backward(&enc.fwd[t], &ds, &dc, &w.enc_fwd, &mut grad.enc_fwd);
        for (a, b) in dx.row_mut(t).iter_mut().zip(&back.dx) {
            *a += *b;
        }
        ds = back.ds_prev;
        dc = back.dc_prev;
    }
    let mut ds = vec![T::zero(); hd];
    let mut dc = vec![T::zero(); hd];
    for t in 0..len {
        for (a, b) in ds.iter_mut().zip(&dh.row(t)[hd..]) {
            *a += *b;
        }
        let back = lstm_backward(&enc.bwd[t], &ds, &dc, &w.enc_bwd, &mut grad.enc_bwd);
        for (a, b) in dx.row_mut(t).iter_mut().zip(&back.dx) {
            *a += *b;
        }
        ds = back.ds_prev;
        dc = back.dc_prev;
    }
    (parts, dx)
}

/// Gradient of [`joint_loss`] over a batch: the loss, the weight gradient
/// and one input-embedding gradient per instance.
pub fn joint_gradient<T: Scalar>(
    batch: &[(Mat<T>, Vec<u32>, Vec<usize>)],
    w: &Weights<T>,
    lw: LossWeights,
) -> (f64, Weights<T>, Vec<Mat<T>>) {
    let scale = T::one() / T::of(batch.len() as f64);
    let mut grad = w.zeros_like();
    let mut total = 0.0;
    let mut dxs = Vec::with_capacity(batch.len());
    for (x, y, l) in batch {
        let (p, dx) = instance_backward(x, y, l, w, lw, scale, &mut grad);
        total += lw.nmt * p.nmt + lw.ner * p.ner;
        dxs.push(dx);
    }
    (total / batch.len() as f64, grad, dxs)
}
