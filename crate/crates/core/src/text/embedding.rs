use std::collections::BTreeMap;
use std::hash::Hasher;
use std::io::{BufRead, BufReader};
use std::path::Path;

use fnv::FnvHasher;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::tokenize::TokenSeq;
use super::TextError;
use crate::linalg::Mat;
use crate::scalar::Scalar;

pub const DEFAULT_BUCKETS: u32 = 1 << 16;
pub const MIN_NGRAM: usize = 3;
pub const MAX_NGRAM: usize = 6;

/// Word vectors with a subword-hash fallback.
///
/// Known words map to stored vectors. Any other word is the mean of the
/// vectors of its character n-grams (lengths 3..=6 over `<word>`), each
/// n-gram hashed into one of `buckets` slots. Bucket vectors are derived from
/// `(seed, bucket)` on demand, so an untouched table stores nothing for them;
/// buckets updated by training are kept in `trained_buckets`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable<T> {
    dim: usize,
    buckets: u32,
    seed: u64,
    trainable: bool,
    known: BTreeMap<String, Vec<T>>,
    trained_buckets: BTreeMap<u32, Vec<T>>,
}

impl<T: Scalar> EmbeddingTable<T> {
    pub fn new(dim: usize, seed: u64) -> Result<Self, TextError> {
        Self::with_buckets(dim, DEFAULT_BUCKETS, seed)
    }

    pub fn with_buckets(dim: usize, buckets: u32, seed: u64) -> Result<Self, TextError> {
        if dim == 0 {
            return Err(TextError::Dimension {
                expected: 1,
                found: 0,
                line: 0,
            });
        }
        if !buckets.is_power_of_two() {
            return Err(TextError::Buckets(buckets));
        }
        Ok(Self {
            dim,
            buckets,
            seed,
            trainable: false,
            known: BTreeMap::new(),
            trained_buckets: BTreeMap::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn buckets(&self) -> u32 {
        self.buckets
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn trainable(&self) -> bool {
        self.trainable
    }

    pub fn set_trainable(&mut self, on: bool) {
        self.trainable = on;
    }

    pub fn known(&self) -> &BTreeMap<String, Vec<T>> {
        &self.known
    }

    pub fn trained_buckets(&self) -> &BTreeMap<u32, Vec<T>> {
        &self.trained_buckets
    }

    pub fn insert(&mut self, word: &str, vector: Vec<T>) -> Result<(), TextError> {
        if vector.len() != self.dim {
            return Err(TextError::Dimension {
                expected: self.dim,
                found: vector.len(),
                line: 0,
            });
        }
        self.known.insert(word.to_string(), vector);
        Ok(())
    }

    pub(crate) fn set_bucket(&mut self, bucket: u32, vector: Vec<T>) {
        debug_assert_eq!(vector.len(), self.dim);
        self.trained_buckets.insert(bucket, vector);
    }

    /// Reads the `<count> <dim>` header format. Every vector must have the
    /// header's dimension, and the header must match `dim`.
    pub fn load_text(path: &Path, dim: usize, seed: u64) -> Result<Self, TextError> {
        let file = std::fs::File::open(path)?;
        Self::read_text(BufReader::new(file), dim, seed)
    }

    pub fn read_text<R: BufRead>(reader: R, dim: usize, seed: u64) -> Result<Self, TextError> {
        let mut table = Self::new(dim, seed)?;
        let mut lines = reader.lines();
        let header = lines.next().transpose()?.unwrap_or_default();
        let mut parts = header.split_whitespace();
        let bad_header = || TextError::Format {
            what: "embedding header",
            line: 1,
        };
        let _count: usize = parts.next().and_then(|v| v.parse().ok()).ok_or_else(bad_header)?;
        let file_dim: usize = parts.next().and_then(|v| v.parse().ok()).ok_or_else(bad_header)?;
        if file_dim != dim {
            return Err(TextError::Dimension {
                expected: dim,
                found: file_dim,
                line: 1,
            });
        }
        for (idx, line) in lines.enumerate() {
            let line = line?;
            let lineno = idx + 2;
            let mut fields = line.split_whitespace();
            let Some(word) = fields.next() else { continue };
            let values = fields
                .map(|v| v.parse::<f64>().map(T::of))
                .collect::<Result<Vec<T>, _>>()
                .map_err(|_| TextError::Format {
                    what: "embedding vector",
                    line: lineno,
                })?;
            if values.len() != dim {
                return Err(TextError::Dimension {
                    expected: dim,
                    found: values.len(),
                    line: lineno,
                });
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(TextError::Format {
                    what: "embedding vector",
                    line: lineno,
                });
            }
            table.known.insert(word.to_string(), values);
        }
        Ok(table)
    }

    /// Bucket ids for the n-grams of `<word>`, in n-gram order.
    pub fn ngram_buckets(&self, word: &str) -> Vec<u32> {
        let wrapped: Vec<char> = format!("<{word}>").chars().collect();
        let mut out = Vec::new();
        for n in MIN_NGRAM..=MAX_NGRAM {
            if n > wrapped.len() {
                break;
            }
            for window in wrapped.windows(n) {
                let gram: String = window.iter().collect();
                out.push(hash_bucket(&gram, self.buckets));
            }
        }
        out
    }

    pub fn bucket_vector(&self, bucket: u32) -> Vec<T> {
        if let Some(v) = self.trained_buckets.get(&bucket) {
            return v.clone();
        }
        init_bucket(self.seed, bucket, self.dim)
    }

    pub fn is_known(&self, word: &str) -> bool {
        self.known.contains_key(word)
    }

    /// Vector for one normalized word.
    pub fn lookup(&self, word: &str) -> Vec<T> {
        if let Some(v) = self.known.get(word) {
            return v.clone();
        }
        let buckets = self.ngram_buckets(word);
        let mut acc = vec![T::zero(); self.dim];
        for b in &buckets {
            for (a, v) in acc.iter_mut().zip(self.bucket_vector(*b)) {
                *a += v;
            }
        }
        let n = T::of(buckets.len() as f64);
        for a in &mut acc {
            *a /= n;
        }
        acc
    }
}

fn hash_bucket(gram: &str, buckets: u32) -> u32 {
    let mut h = FnvHasher::default();
    h.write(gram.as_bytes());
    (h.finish() & u64::from(buckets - 1)) as u32
}

fn init_bucket<T: Scalar>(seed: u64, bucket: u32, dim: usize) -> Vec<T> {
    let key = seed ^ (u64::from(bucket) + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    (0..dim).map(|_| T::of(rng.gen_range(-1.0..1.0))).collect()
}

/// One row per token, looked up by normalized form.
pub fn embed_sequence<T: Scalar>(q: &TokenSeq, table: &EmbeddingTable<T>) -> Mat<T> {
    let rows: Vec<Vec<T>> = q.tokens().iter().map(|t| table.lookup(&t.norm)).collect();
    if rows.is_empty() {
        return Mat::zeros(0, table.dim());
    }
    Mat::from_rows(&rows)
}

/// Gradient w.r.t. the rows an [`EmbeddingTable`] produced for a sequence.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmbeddingGrad<T> {
    pub known: BTreeMap<String, Vec<T>>,
    pub buckets: BTreeMap<u32, Vec<T>>,
}

impl<T: Scalar> EmbeddingGrad<T> {
    pub fn is_empty(&self) -> bool {
        self.known.is_empty() && self.buckets.is_empty()
    }

    /// Routes `d_row` (gradient of the vector for `word`) to its sources.
    pub fn accumulate(&mut self, table: &EmbeddingTable<T>, word: &str, d_row: &[T]) {
        if table.is_known(word) {
            add_into(
                self.known
                    .entry(word.to_string())
                    .or_insert_with(|| vec![T::zero(); d_row.len()]),
                d_row,
                T::one(),
            );
            return;
        }
        let buckets = table.ngram_buckets(word);
        let w = T::one() / T::of(buckets.len() as f64);
        for b in buckets {
            add_into(
                self.buckets
                    .entry(b)
                    .or_insert_with(|| vec![T::zero(); d_row.len()]),
                d_row,
                w,
            );
        }
    }

    pub fn merge(&mut self, other: &Self) {
        for (k, v) in &other.known {
            match self.known.get_mut(k) {
                Some(dst) => add_into(dst, v, T::one()),
                None => {
                    self.known.insert(k.clone(), v.clone());
                }
            }
        }
        for (k, v) in &other.buckets {
            match self.buckets.get_mut(k) {
                Some(dst) => add_into(dst, v, T::one()),
                None => {
                    self.buckets.insert(*k, v.clone());
                }
            }
        }
    }

    pub fn scale(&mut self, k: T) {
        for v in self.known.values_mut().chain(self.buckets.values_mut()) {
            for x in v {
                *x *= k;
            }
        }
    }

    pub fn sum_sq(&self) -> T {
        self.known
            .values()
            .chain(self.buckets.values())
            .flat_map(|v| v.iter())
            .fold(T::zero(), |a, &x| a + x * x)
    }
}

fn add_into<T: Scalar>(dst: &mut [T], src: &[T], w: T) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += w * s;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::tokenize::tokenize;

    #[test]
    fn known_word_is_verbatim() {
        let mut t = EmbeddingTable::<f64>::new(3, 7).unwrap();
        t.insert("lisa", vec![0.25, -1.0, 2.0]).unwrap();
        assert_eq!(t.lookup("lisa"), vec![0.25, -1.0, 2.0]);
        assert!(t.insert("x", vec![1.0]).is_err());
    }

    #[test]
    fn oov_is_deterministic_and_context_free() {
        let t = EmbeddingTable::<f64>::new(8, 42).unwrap();
        let a = t.lookup("zelbarone");
        assert_eq!(a, t.lookup("zelbarone"));
        let m1 = embed_sequence(&tokenize("the zelbarone tower"), &t);
        let m2 = embed_sequence(&tokenize("zelbarone"), &t);
        assert_eq!(m1.row(1), m2.row(0));
        let t2 = EmbeddingTable::<f64>::new(8, 42).unwrap();
        assert_eq!(t2.lookup("zelbarone"), a);
        assert_ne!(EmbeddingTable::<f64>::new(8, 43).unwrap().lookup("zelbarone"), a);
    }

    #[test]
    fn ngram_count() {
        let t = EmbeddingTable::<f64>::new(4, 0).unwrap();
        // "<ab>" has 4 chars: two 3-grams and one 4-gram
        assert_eq!(t.ngram_buckets("ab").len(), 3);
        assert_eq!(t.ngram_buckets("a").len(), 1);
        // "<lisa>": 4 + 3 + 2 + 1
        assert_eq!(t.ngram_buckets("lisa").len(), 10);
    }

    #[test]
    fn shape_and_finiteness() {
        let t = EmbeddingTable::<f64>::new(300, 1).unwrap();
        let m = embed_sequence(&tokenize("Show me all Italian movies"), &t);
        assert_eq!(m.shape(), (5, 300));
        assert!(m.is_finite());
        let t32 = EmbeddingTable::<f32>::new(16, 1).unwrap();
        assert!(embed_sequence(&tokenize("über straße"), &t32).is_finite());
    }

    #[test]
    fn text_format() {
        let txt = "2 3\nlisa 1 2 3\nmona 0.5 0.5 -0.5\n";
        let t = EmbeddingTable::<f64>::read_text(txt.as_bytes(), 3, 0).unwrap();
        assert_eq!(t.lookup("mona"), vec![0.5, 0.5, -0.5]);
        let bad = "1 3\nlisa 1 2\n";
        assert!(matches!(
            EmbeddingTable::<f64>::read_text(bad.as_bytes(), 3, 0),
            Err(TextError::Dimension { line: 2, .. })
        ));
        assert!(EmbeddingTable::<f64>::read_text(txt.as_bytes(), 4, 0).is_err());
    }

    #[test]
    fn bucket_count_must_be_power_of_two() {
        assert!(EmbeddingTable::<f64>::with_buckets(4, 1000, 0).is_err());
        assert!(EmbeddingTable::<f64>::with_buckets(4, 1024, 0).is_ok());
    }

    #[test]
    fn oov_gradient_spreads_over_buckets() {
        let t = EmbeddingTable::<f64>::with_buckets(2, 1 << 20, 0).unwrap();
        let mut g = EmbeddingGrad::default();
        g.accumulate(&t, "ab", &[3.0, 6.0]);
        let total: f64 = g.buckets.values().map(|v| v[0]).sum();
        assert!((total - 3.0).abs() < 1e-12);
    }
}
