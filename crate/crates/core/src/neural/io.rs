use std::io::{Read, Write};
use std::path::Path;

use super::params::{Hyperparams, ModelParams, Weights};
use super::vocab::Vocabulary;
use super::NeuralError;
use crate::linalg::Mat;
use crate::scalar::Scalar;
use crate::text::EmbeddingTable;

pub const MAGIC: &[u8; 8] = b"SPARQAMD";
pub const FORMAT_VERSION: u32 = 1;

struct Writer<W> {
    out: W,
}

impl<W: Write> Writer<W> {
    fn bytes(&mut self, b: &[u8]) -> std::io::Result<()> {
        self.out.write_all(b)
    }

    fn u8(&mut self, v: u8) -> std::io::Result<()> {
        self.bytes(&[v])
    }

    fn u32(&mut self, v: u32) -> std::io::Result<()> {
        self.bytes(&v.to_le_bytes())
    }

    fn u64(&mut self, v: u64) -> std::io::Result<()> {
        self.bytes(&v.to_le_bytes())
    }

    fn usize(&mut self, v: usize) -> std::io::Result<()> {
        self.u64(v as u64)
    }

    fn f64(&mut self, v: f64) -> std::io::Result<()> {
        self.bytes(&v.to_le_bytes())
    }

    fn str(&mut self, s: &str) -> std::io::Result<()> {
        self.u32(s.len() as u32)?;
        self.bytes(s.as_bytes())
    }

    fn values<T: Scalar>(&mut self, v: &[T]) -> std::io::Result<()> {
        for x in v {
            self.f64(x.as_f64())?;
        }
        Ok(())
    }

    fn vocab(&mut self, v: &Vocabulary) -> std::io::Result<()> {
        self.usize(v.len())?;
        for t in v.tokens() {
            self.str(t)?;
        }
        Ok(())
    }

    fn weights<T: Scalar>(&mut self, prefix: &str, w: &Weights<T>) -> std::io::Result<()> {
        for (name, m) in w.tensors() {
            self.str(&format!("{prefix}{name}"))?;
            self.usize(m.rows())?;
            self.usize(m.cols())?;
            self.values(m.data())?;
        }
        Ok(())
    }
}

struct Reader<R> {
    input: R,
}

fn bad(msg: impl Into<String>) -> NeuralError {
    NeuralError::Format(msg.into())
}

impl<R: Read> Reader<R> {
    fn array<const N: usize>(&mut self) -> Result<[u8; N], NeuralError> {
        let mut b = [0u8; N];
        self.input.read_exact(&mut b)?;
        Ok(b)
    }

    fn u8(&mut self) -> Result<u8, NeuralError> {
        Ok(self.array::<1>()?[0])
    }

    fn u32(&mut self) -> Result<u32, NeuralError> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn u64(&mut self) -> Result<u64, NeuralError> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    fn usize(&mut self) -> Result<usize, NeuralError> {
        usize::try_from(self.u64()?).map_err(|_| bad("size overflow"))
    }

    fn f64(&mut self) -> Result<f64, NeuralError> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    fn str(&mut self) -> Result<String, NeuralError> {
        let n = self.u32()? as usize;
        let mut b = vec![0u8; n];
        self.input.read_exact(&mut b)?;
        String::from_utf8(b).map_err(|_| bad("string is not UTF-8"))
    }

    fn values<T: Scalar>(&mut self, n: usize) -> Result<Vec<T>, NeuralError> {
        (0..n).map(|_| self.f64().map(T::of)).collect()
    }

    fn vocab(&mut self) -> Result<Vocabulary, NeuralError> {
        let n = self.usize()?;
        let tokens = (0..n).map(|_| self.str()).collect::<Result<Vec<_>, _>>()?;
        Vocabulary::from_list(tokens).ok_or_else(|| bad("vocabulary lacks reserved tokens or repeats one"))
    }

    fn weights<T: Scalar>(&mut self, prefix: &str, w: &mut Weights<T>) -> Result<(), NeuralError> {
        for (name, m) in w.tensors_mut() {
            let found = self.str()?;
            if found != format!("{prefix}{name}") {
                return Err(bad(format!("expected tensor {prefix}{name}, found {found}")));
            }
            let rows = self.usize()?;
            let cols = self.usize()?;
            if (rows, cols) != m.shape() {
                return Err(bad(format!(
                    "tensor {found} has shape {rows}×{cols}, expected {}×{}",
                    m.rows(),
                    m.cols()
                )));
            }
            *m = Mat::from_vec(rows, cols, self.values(rows * cols)?);
        }
        Ok(())
    }
}

/// Magic, version, hyperparameters, embeddings, vocabularies, tensors.
pub fn write_model<T: Scalar, W: Write>(out: W, m: &ModelParams<T>) -> Result<(), NeuralError> {
    let mut w = Writer { out };
    w.bytes(MAGIC)?;
    w.u32(FORMAT_VERSION)?;
    let hp = &m.hp;
    w.usize(hp.embed_dim)?;
    w.usize(hp.hidden)?;
    w.usize(hp.batch_size)?;
    w.usize(hp.epochs)?;
    w.f64(hp.learning_rate)?;
    w.f64(hp.clip_norm)?;
    w.f64(hp.lambda)?;
    w.u64(hp.seed)?;
    w.usize(hp.max_decode_len)?;
    w.u8(u8::from(m.tagger.is_some()))?;

    let e = &m.embeddings;
    w.usize(e.dim())?;
    w.u32(e.buckets())?;
    w.u64(e.seed())?;
    w.u8(u8::from(e.trainable()))?;
    w.usize(e.known().len())?;
    for (word, v) in e.known() {
        w.str(word)?;
        w.values(v)?;
    }
    w.usize(e.trained_buckets().len())?;
    for (b, v) in e.trained_buckets() {
        w.u32(*b)?;
        w.values(v)?;
    }

    w.vocab(&m.input_vocab)?;
    w.vocab(&m.template_vocab)?;
    w.weights("", &m.weights)?;
    if let Some(t) = &m.tagger {
        w.weights("tagger.", t)?;
    }
    w.out.flush()?;
    Ok(())
}

pub fn read_model<T: Scalar, R: Read>(input: R) -> Result<ModelParams<T>, NeuralError> {
    let mut r = Reader { input };
    if &r.array::<8>()? != MAGIC {
        return Err(bad("not a model file"));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(NeuralError::VersionMismatch {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let hp = Hyperparams {
        embed_dim: r.usize()?,
        hidden: r.usize()?,
        batch_size: r.usize()?,
        epochs: r.usize()?,
        learning_rate: r.f64()?,
        clip_norm: r.f64()?,
        lambda: r.f64()?,
        seed: r.u64()?,
        max_decode_len: r.usize()?,
    };
    hp.validate()?;
    let separate = match r.u8()? {
        0 => false,
        1 => true,
        _ => return Err(bad("unknown training mode")),
    };

    let dim = r.usize()?;
    let buckets = r.u32()?;
    let seed = r.u64()?;
    let mut embeddings = EmbeddingTable::with_buckets(dim, buckets, seed)?;
    embeddings.set_trainable(r.u8()? != 0);
    for _ in 0..r.usize()? {
        let word = r.str()?;
        let v = r.values(dim)?;
        embeddings.insert(&word, v)?;
    }
    for _ in 0..r.usize()? {
        let b = r.u32()?;
        if b >= buckets {
            return Err(bad("bucket id out of range"));
        }
        let v = r.values(dim)?;
        embeddings.set_bucket(b, v);
    }
    if dim != hp.embed_dim {
        return Err(bad("embedding dimension disagrees with hyperparameters"));
    }

    let input_vocab = r.vocab()?;
    let template_vocab = r.vocab()?;
    let mut weights = Weights::zeros(hp.embed_dim, hp.hidden, template_vocab.len());
    r.weights("", &mut weights)?;
    let tagger = if separate {
        let mut t = Weights::zeros(hp.embed_dim, hp.hidden, template_vocab.len());
        r.weights("tagger.", &mut t)?;
        Some(t)
    } else {
        None
    };
    if r.input.read(&mut [0u8; 1])? != 0 {
        return Err(bad("trailing bytes"));
    }
    Ok(ModelParams {
        hp,
        input_vocab,
        template_vocab,
        embeddings,
        weights,
        tagger,
    })
}

pub fn save_model<T: Scalar>(path: &Path, m: &ModelParams<T>) -> Result<(), NeuralError> {
    let file = std::fs::File::create(path)?;
    write_model(std::io::BufWriter::new(file), m)
}

pub fn load_model<T: Scalar>(path: &Path) -> Result<ModelParams<T>, NeuralError> {
    let file = std::fs::File::open(path)?;
    read_model(std::io::BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::params::init_params;

    fn model(separate: bool) -> ModelParams<f64> {
        let hp = Hyperparams {
            embed_dim: 4,
            hidden: 3,
            ..Default::default()
        };
        let mut table = EmbeddingTable::with_buckets(4, 64, 9).unwrap();
        table.insert("where", vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        table.set_bucket(5, vec![1.0, 2.0, 3.0, 4.0]);
        let mut m = init_params(
            &hp,
            Vocabulary::from_tokens(["where", "is"]),
            Vocabulary::from_tokens(["SELECT", "?x", "$1"]),
            table,
        )
        .unwrap();
        if separate {
            let mut t = m.weights.clone();
            t.emit_b.data_mut()[0] = 0.25;
            m.tagger = Some(t);
        }
        m
    }

    #[test]
    fn round_trip() {
        for separate in [false, true] {
            let m = model(separate);
            let mut buf = Vec::new();
            write_model(&mut buf, &m).unwrap();
            let back: ModelParams<f64> = read_model(buf.as_slice()).unwrap();
            assert_eq!(back, m);
            let mut again = Vec::new();
            write_model(&mut again, &back).unwrap();
            assert_eq!(buf, again);
        }
    }

    #[test]
    fn rejects_other_versions() {
        let mut buf = Vec::new();
        write_model(&mut buf, &model(false)).unwrap();
        buf[8] = 2;
        assert!(matches!(
            read_model::<f64, _>(buf.as_slice()),
            Err(NeuralError::VersionMismatch { found: 2, expected: 1 })
        ));
        buf[0] = b'X';
        assert!(matches!(read_model::<f64, _>(buf.as_slice()), Err(NeuralError::Format(_))));
    }

    #[test]
    fn rejects_truncation() {
        let mut buf = Vec::new();
        write_model(&mut buf, &model(false)).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(read_model::<f64, _>(buf.as_slice()).is_err());
    }
}
