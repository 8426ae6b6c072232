//! Skipgram word embeddings with negative sampling, and frozen lookups.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::PAD_TOKEN;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkipgramConfig {
    pub dim: usize,
    /// Words considered on each side of the center word.
    pub context: usize,
    pub min_freq: usize,
    pub neg_samples: usize,
    pub epochs: usize,
    pub seed: u64,
    pub start_lr: f64,
    pub end_lr: f64,
}

impl Default for SkipgramConfig {
    fn default() -> Self {
        SkipgramConfig {
            dim: 120,
            context: 20,
            min_freq: 7,
            neg_samples: 5,
            epochs: 5,
            seed: 1,
            start_lr: 0.025,
            end_lr: 0.0001,
        }
    }
}

impl SkipgramConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.context == 0 || self.min_freq == 0 || self.neg_samples == 0 {
            return Err(Error::Config(
                "skipgram dim, context, min_freq and neg_samples must be positive".into(),
            ));
        }
        if self.epochs == 0 {
            return Err(Error::Config("skipgram epochs must be positive".into()));
        }
        Ok(())
    }
}

/// Frozen token vectors. Values are stored at 32-bit precision so that the
/// text file round trip is exact.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    tokens: Vec<String>,
    vocab: HashMap<String, usize>,
    matrix: Array2<f64>,
}

impl EmbeddingTable {
    pub fn new(tokens: Vec<String>, matrix: Array2<f64>) -> Result<Self> {
        if tokens.len() != matrix.nrows() {
            return Err(Error::Shape(format!(
                "{} tokens for {} embedding rows",
                tokens.len(),
                matrix.nrows()
            )));
        }
        let mut vocab = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if t == PAD_TOKEN {
                return Err(Error::Config(
                    "the pad token cannot carry an embedding".into(),
                ));
            }
            if vocab.insert(t.clone(), i).is_some() {
                return Err(Error::Config(format!("duplicate embedding token {t:?}")));
            }
        }
        let matrix = matrix.mapv(|x| x as f32 as f64);
        Ok(EmbeddingTable {
            tokens,
            vocab,
            matrix,
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn contains(&self, token: &str) -> bool {
        self.vocab.contains_key(token)
    }

    pub fn row(&self, token: &str) -> Option<ArrayView1<'_, f64>> {
        self.vocab.get(token).map(|&i| self.matrix.row(i))
    }

    /// The stored vector, or zeros for the pad token and unknown tokens.
    pub fn lookup(&self, token: &str) -> Array1<f64> {
        match self.row(token) {
            Some(r) => r.to_owned(),
            None => Array1::zeros(self.dim()),
        }
    }

    /// Stacks lookups into a `len × dim` matrix.
    pub fn embed_sequence<S: AsRef<str>>(&self, tokens: &[S]) -> Array2<f64> {
        let mut out = Array2::zeros((tokens.len(), self.dim()));
        for (i, t) in tokens.iter().enumerate() {
            if let Some(r) = self.row(t.as_ref()) {
                out.row_mut(i).assign(&r);
            }
        }
        out
    }

    /// Short content hash identifying this exact table.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.dim() as u64).to_le_bytes());
        for (i, t) in self.tokens.iter().enumerate() {
            h.update(t.as_bytes());
            h.update([0u8]);
            for &x in self.matrix.row(i) {
                h.update((x as f32).to_le_bytes());
            }
        }
        h.finalize()[..8]
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w).map_err(|e| Error::io(path, e))
    }

    /// Spaces inside multi-word tokens are written as underscores.
    pub fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "{} {}", self.len(), self.dim())?;
        for (i, t) in self.tokens.iter().enumerate() {
            write!(w, "{}", t.replace(' ', "_"))?;
            for &x in self.matrix.row(i) {
                write!(w, " {}", x as f32)?;
            }
            writeln!(w)?;
        }
        w.flush()
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(BufReader::new(file), path)
    }

    pub fn read_from<R: BufRead>(reader: R, path: &Path) -> Result<Self> {
        let parse_err = |line: usize, message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| parse_err(1, "missing header".into()))?
            .map_err(|e| Error::io(path, e))?;
        let mut parts = header.split_whitespace();
        let (count, dim) = match (parts.next(), parts.next(), parts.next()) {
            (Some(c), Some(d), None) => (
                c.parse::<usize>()
                    .map_err(|e| parse_err(1, format!("bad count: {e}")))?,
                d.parse::<usize>()
                    .map_err(|e| parse_err(1, format!("bad dim: {e}")))?,
            ),
            _ => return Err(parse_err(1, "header must be \"count dim\"".into())),
        };
        let mut tokens = Vec::with_capacity(count);
        let mut matrix = Array2::zeros((count, dim));
        for (i, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.is_empty() {
                continue;
            }
            if tokens.len() == count {
                return Err(parse_err(i + 2, "more rows than declared".into()));
            }
            let mut fields = line.split(' ');
            let token = fields.next().unwrap_or_default().replace('_', " ");
            let row = tokens.len();
            let mut n = 0;
            for f in fields {
                if n == dim {
                    return Err(parse_err(i + 2, format!("more than {dim} values")));
                }
                let x: f32 = f
                    .parse()
                    .map_err(|e| parse_err(i + 2, format!("bad value {f:?}: {e}")))?;
                matrix[[row, n]] = x as f64;
                n += 1;
            }
            if n != dim {
                return Err(parse_err(
                    i + 2,
                    format!("expected {dim} values, found {n}"),
                ));
            }
            tokens.push(token);
        }
        if tokens.len() != count {
            return Err(parse_err(
                count + 1,
                format!("expected {count} rows, found {}", tokens.len()),
            ));
        }
        Self::new(tokens, matrix)
    }
}

/// `1 - cos(u, v)`, or 1 when either vector is zero.
pub fn cosine_distance(u: ArrayView1<'_, f64>, v: ArrayView1<'_, f64>) -> f64 {
    let uu = u.dot(&u);
    let vv = v.dot(&v);
    if uu == 0.0 || vv == 0.0 {
        return 1.0;
    }
    (1.0 - u.dot(&v) / (uu * vv).sqrt()).clamp(0.0, 2.0)
}

/// Token frequencies over all sentences, ignoring the pad token.
pub fn token_counts(sentences: &[Vec<String>]) -> HashMap<&str, usize> {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for s in sentences {
        for t in s {
            if t != PAD_TOKEN {
                *counts.entry(t.as_str()).or_default() += 1;
            }
        }
    }
    counts
}

struct NegativeSampler {
    cumulative: Vec<f64>,
}

impl NegativeSampler {
    fn new(freqs: &[usize]) -> Self {
        let mut acc = 0.0;
        let cumulative = freqs
            .iter()
            .map(|&f| {
                acc += (f as f64).powf(0.75);
                acc
            })
            .collect();
        NegativeSampler { cumulative }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> usize {
        let total = *self.cumulative.last().unwrap();
        let x = rng.gen::<f64>() * total;
        self.cumulative
            .partition_point(|&c| c <= x)
            .min(self.cumulative.len() - 1)
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Trains skipgram vectors on tokenized sentences. Context windows never
/// cross sentence boundaries.
pub fn train_skipgram(
    sentences: &[Vec<String>],
    config: &SkipgramConfig,
) -> Result<EmbeddingTable> {
    config.validate()?;
    let counts = token_counts(sentences);
    let mut vocab: Vec<(&str, usize)> = counts
        .iter()
        .filter(|(_, &c)| c >= config.min_freq)
        .map(|(&t, &c)| (t, c))
        .collect();
    if vocab.is_empty() {
        return Err(Error::EmptyVocabulary(config.min_freq));
    }
    vocab.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    let index: HashMap<&str, usize> = vocab
        .iter()
        .enumerate()
        .map(|(i, (t, _))| (*t, i))
        .collect();
    let freqs: Vec<usize> = vocab.iter().map(|(_, c)| *c).collect();

    let corpus: Vec<Vec<usize>> = sentences
        .iter()
        .map(|s| {
            s.iter()
                .filter_map(|t| index.get(t.as_str()).copied())
                .collect()
        })
        .collect();
    let total_tokens: usize = corpus.iter().map(Vec::len).sum();

    let dim = config.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut input = Array2::from_shape_fn((vocab.len(), dim), |_| {
        (rng.gen::<f64>() - 0.5) / dim as f64
    });
    let mut output = Array2::<f64>::zeros((vocab.len(), dim));
    let sampler = NegativeSampler::new(&freqs);

    let planned = (config.epochs * total_tokens).max(1) as f64;
    let mut processed = 0usize;
    let mut grad = Array1::<f64>::zeros(dim);
    for _ in 0..config.epochs {
        for sentence in &corpus {
            for (pos, &center) in sentence.iter().enumerate() {
                let progress = processed as f64 / planned;
                let lr = config.start_lr - (config.start_lr - config.end_lr) * progress;
                processed += 1;
                let lo = pos.saturating_sub(config.context);
                let hi = (pos + config.context + 1).min(sentence.len());
                for (ctx_pos, &context) in sentence.iter().enumerate().take(hi).skip(lo) {
                    if ctx_pos == pos {
                        continue;
                    }
                    grad.fill(0.0);
                    let center_row = input.row(center).to_owned();
                    for k in 0..=config.neg_samples {
                        let (target, label) = if k == 0 {
                            (context, 1.0)
                        } else {
                            let t = sampler.sample(&mut rng);
                            if t == context {
                                continue;
                            }
                            (t, 0.0)
                        };
                        let score = center_row.dot(&output.row(target));
                        let g = (label - sigmoid(score)) * lr;
                        grad.scaled_add(g, &output.row(target));
                        output.row_mut(target).scaled_add(g, &center_row);
                    }
                    input.row_mut(center).scaled_add(1.0, &grad);
                }
            }
        }
    }

    let tokens = vocab.iter().map(|(t, _)| t.to_string()).collect();
    EmbeddingTable::new(tokens, input)
}
