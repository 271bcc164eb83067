use crate::linalg::Mat;
use crate::scalar::{log_sum_exp, Scalar};

// Transition matrices are (K+2)×(K+2) for K tags; the last two indices
// are START and END.

fn start(k: usize) -> usize {
    k
}

fn end(k: usize) -> usize {
    k + 1
}

/// Unnormalized score of one tag path.
pub fn path_score<T: Scalar>(emissions: &Mat<T>, tags: &[usize], transitions: &Mat<T>) -> T {
    let k = emissions.cols();
    let mut prev = start(k);
    let mut total = T::zero();
    for (t, &tag) in tags.iter().enumerate() {
        total += transitions.get(prev, tag) + emissions.get(t, tag);
        prev = tag;
    }
    total + transitions.get(prev, end(k))
}

fn forward<T: Scalar>(emissions: &Mat<T>, transitions: &Mat<T>) -> Vec<Vec<T>> {
    let (len, k) = emissions.shape();
    let mut alpha: Vec<Vec<T>> = Vec::with_capacity(len);
    alpha.push(
        (0..k)
            .map(|j| transitions.get(start(k), j) + emissions.get(0, j))
            .collect(),
    );
    for t in 1..len {
        let prev = &alpha[t - 1];
        let row = (0..k)
            .map(|j| {
                let terms: Vec<T> = (0..k).map(|i| prev[i] + transitions.get(i, j)).collect();
                log_sum_exp(terms.iter().copied()) + emissions.get(t, j)
            })
            .collect();
        alpha.push(row);
    }
    alpha
}

fn backward<T: Scalar>(emissions: &Mat<T>, transitions: &Mat<T>) -> Vec<Vec<T>> {
    let (len, k) = emissions.shape();
    let mut beta = vec![vec![T::zero(); k]; len];
    beta[len - 1] = (0..k).map(|j| transitions.get(j, end(k))).collect();
    for t in (0..len - 1).rev() {
        beta[t] = (0..k)
            .map(|i| {
                let terms: Vec<T> = (0..k)
                    .map(|j| transitions.get(i, j) + emissions.get(t + 1, j) + beta[t + 1][j])
                    .collect();
                log_sum_exp(terms.iter().copied())
            })
            .collect();
    }
    beta
}

/// `log Σ_paths exp(score(path))` by the forward algorithm.
pub fn log_partition<T: Scalar>(emissions: &Mat<T>, transitions: &Mat<T>) -> T {
    let k = emissions.cols();
    let alpha = forward(emissions, transitions);
    let last = &alpha[alpha.len() - 1];
    log_sum_exp((0..k).map(|j| last[j] + transitions.get(j, end(k))).collect::<Vec<_>>())
}

/// `log p(tags | x)`; always ≤ 0.
pub fn crf_log_likelihood<T: Scalar>(emissions: &Mat<T>, tags: &[usize], transitions: &Mat<T>) -> T {
    path_score(emissions, tags, transitions) - log_partition(emissions, transitions)
}

/// Negative log-likelihood and its gradients w.r.t. emissions and
/// transitions, scaled by `weight`.
pub fn crf_nll_backward<T: Scalar>(
    emissions: &Mat<T>,
    tags: &[usize],
    transitions: &Mat<T>,
    weight: T,
    d_emissions: &mut Mat<T>,
    d_transitions: &mut Mat<T>,
) -> T {
    let (len, k) = emissions.shape();
    let alpha = forward(emissions, transitions);
    let beta = backward(emissions, transitions);
    let log_z = log_sum_exp(
        (0..k)
            .map(|j| alpha[len - 1][j] + transitions.get(j, end(k)))
            .collect::<Vec<_>>(),
    );
    for t in 0..len {
        for j in 0..k {
            let p = (alpha[t][j] + beta[t][j] - log_z).exp();
            let gold = if tags[t] == j { T::one() } else { T::zero() };
            d_emissions.row_mut(t)[j] += weight * (p - gold);
        }
    }
    for j in 0..k {
        let p0 = (alpha[0][j] + beta[0][j] - log_z).exp();
        let pl = (alpha[len - 1][j] + beta[len - 1][j] - log_z).exp();
        let s = d_transitions.get(start(k), j);
        d_transitions.set(start(k), j, s + weight * p0);
        let e = d_transitions.get(j, end(k));
        d_transitions.set(j, end(k), e + weight * pl);
    }
    for t in 1..len {
        for i in 0..k {
            for j in 0..k {
                let p = (alpha[t - 1][i] + transitions.get(i, j) + emissions.get(t, j) + beta[t][j]
                    - log_z)
                    .exp();
                let v = d_transitions.get(i, j);
                d_transitions.set(i, j, v + weight * p);
            }
        }
    }
    let mut prev = start(k);
    for &tag in tags {
        let v = d_transitions.get(prev, tag);
        d_transitions.set(prev, tag, v - weight);
        prev = tag;
    }
    let v = d_transitions.get(prev, end(k));
    d_transitions.set(prev, end(k), v - weight);
    weight * (log_z - path_score(emissions, tags, transitions))
}

/// Highest-scoring path; ties go to the lower tag id.
pub fn viterbi_decode<T: Scalar>(emissions: &Mat<T>, transitions: &Mat<T>) -> Vec<usize> {
    let (len, k) = emissions.shape();
    if len == 0 {
        return Vec::new();
    }
    let mut delta: Vec<T> = (0..k)
        .map(|j| transitions.get(start(k), j) + emissions.get(0, j))
        .collect();
    let mut back: Vec<Vec<usize>> = Vec::with_capacity(len);
    for t in 1..len {
        let mut next = vec![T::zero(); k];
        let mut ptr = vec![0; k];
        for j in 0..k {
            let mut best = 0;
            let mut best_v = delta[0] + transitions.get(0, j);
            for i in 1..k {
                let v = delta[i] + transitions.get(i, j);
                if v > best_v {
                    best = i;
                    best_v = v;
                }
            }
            next[j] = best_v + emissions.get(t, j);
            ptr[j] = best;
        }
        delta = next;
        back.push(ptr);
    }
    let mut last = 0;
    let mut last_v = delta[0] + transitions.get(0, end(k));
    for j in 1..k {
        let v = delta[j] + transitions.get(j, end(k));
        if v > last_v {
            last = j;
            last_v = v;
        }
    }
    let mut path = vec![last];
    for ptr in back.iter().rev() {
        last = ptr[last];
        path.push(last);
    }
    path.reverse();
    path
}
