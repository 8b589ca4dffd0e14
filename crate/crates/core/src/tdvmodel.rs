//! The term-discrimination network: a single linear layer over word
//! embeddings followed by ReLU, `tdv_t = max(0, e_t . w + bias)`.
//!
//! ReLU keeps every TDV non-negative and lets training drive terms to exactly
//! zero, which is what makes posting-list pruning possible. The subgradient
//! at zero is taken to be zero.

use std::io::{self, BufRead, Write};

use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::embeddings::EmbeddingMatrix;

#[derive(Debug, Error)]
pub enum TdvError {
    #[error("embedding dim {emb} does not match parameter dim {params}")]
    DimMismatch { emb: usize, params: usize },
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("model file line {line}: {reason}")]
    BadModelFile { line: usize, reason: String },
}

/// Trainable parameters: the weight vector and the scalar bias.
#[derive(Debug, Clone, PartialEq)]
pub struct TdvParams {
    pub w: Vec<f64>,
    pub bias: f64,
}

impl TdvParams {
    pub fn dim(&self) -> usize {
        self.w.len()
    }
}

/// Fresh parameters: bias starts at 1 so every term begins with a nonzero
/// discrimination value, and `w` is Glorot-uniform in
/// `(-sqrt(6/(dim+1)), sqrt(6/(dim+1)))`.
///
/// Seed 0 is the identity start: `w` is all zeros, so the weighted index
/// initially equals the raw one.
pub fn init_params(dim: usize, seed: u64) -> TdvParams {
    debug_assert!(dim >= 1);
    let w = if seed == 0 {
        vec![0.0; dim]
    } else {
        let bound = (6.0 / (dim as f64 + 1.0)).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dist = Uniform::new(-bound, bound).expect("bound is positive");
        (0..dim).map(|_| dist.sample(&mut rng)).collect()
    };
    TdvParams { w, bias: 1.0 }
}

/// Computes `tdv_t = ReLU(e_t . w + bias)` for every vocabulary term.
pub fn tdv_forward(emb: &EmbeddingMatrix, params: &TdvParams) -> Result<Vec<f64>, TdvError> {
    if emb.dim() != params.dim() {
        return Err(TdvError::DimMismatch {
            emb: emb.dim(),
            params: params.dim(),
        });
    }
    Ok((0..emb.num_terms() as u32)
        .map(|t| {
            let z: f64 = emb
                .row(t)
                .iter()
                .zip(&params.w)
                .map(|(e, w)| e * w)
                .sum::<f64>()
                + params.bias;
            z.max(0.0)
        })
        .collect())
}

/// A trained model on disk: the parameters, the seed they were trained with,
/// and a snapshot of the TDV vector over the training vocabulary (so pruning
/// does not need the embeddings again).
#[derive(Debug, Clone, PartialEq)]
pub struct TdvModelFile {
    pub seed: u64,
    pub params: TdvParams,
    pub tdv: Vec<f64>,
}

const MODEL_HEADER: &str = "tdv-model v1";

/// Writes the model in a line-oriented text format:
///
/// ```text
/// tdv-model v1
/// dim <n>
/// seed <u64>
/// bias <f64>
/// w <n space-separated f64>
/// tdv <count>
/// <count lines, one f64 each>
/// ```
///
/// Floats use the shortest representation that parses back to the same bits,
/// so save/load round-trips exactly.
pub fn save_model(model: &TdvModelFile, mut w: impl Write) -> io::Result<()> {
    writeln!(w, "{MODEL_HEADER}")?;
    writeln!(w, "dim {}", model.params.dim())?;
    writeln!(w, "seed {}", model.seed)?;
    writeln!(w, "bias {}", model.params.bias)?;
    write!(w, "w")?;
    for v in &model.params.w {
        write!(w, " {v}")?;
    }
    writeln!(w)?;
    writeln!(w, "tdv {}", model.tdv.len())?;
    for v in &model.tdv {
        writeln!(w, "{v}")?;
    }
    Ok(())
}

pub fn load_model(reader: impl BufRead) -> Result<TdvModelFile, TdvError> {
    let mut lines = reader.lines().enumerate();
    let mut next = |what: &str| -> Result<(usize, String), TdvError> {
        match lines.next() {
            Some((i, line)) => Ok((i + 1, line?)),
            None => Err(TdvError::BadModelFile {
                line: 0,
                reason: format!("missing {what}"),
            }),
        }
    };
    let bad = |line: usize, reason: String| TdvError::BadModelFile { line, reason };

    let (line, header) = next("header")?;
    if header.trim() != MODEL_HEADER {
        return Err(bad(line, format!("unexpected header {header:?}")));
    }
    let (line, dim_line) = next("dim")?;
    let dim: usize = dim_line
        .strip_prefix("dim ")
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| bad(line, "expected \"dim <n>\"".into()))?;
    let (line, seed_line) = next("seed")?;
    let seed: u64 = seed_line
        .strip_prefix("seed ")
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| bad(line, "expected \"seed <n>\"".into()))?;
    let (line, bias_line) = next("bias")?;
    let bias: f64 = bias_line
        .strip_prefix("bias ")
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| bad(line, "expected \"bias <f>\"".into()))?;
    let (line, w_line) = next("w")?;
    let w_body = w_line
        .strip_prefix("w")
        .ok_or_else(|| bad(line, "expected \"w <values>\"".into()))?;
    let w: Vec<f64> = w_body
        .split_whitespace()
        .map(|s| s.parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| bad(line, format!("bad weight: {e}")))?;
    if w.len() != dim {
        return Err(bad(
            line,
            format!("expected {dim} weights, found {}", w.len()),
        ));
    }
    let (line, tdv_line) = next("tdv")?;
    let count: usize = tdv_line
        .strip_prefix("tdv ")
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| bad(line, "expected \"tdv <count>\"".into()))?;
    let mut tdv = Vec::with_capacity(count);
    for _ in 0..count {
        let (line, value) = next("tdv value")?;
        let v: f64 = value
            .trim()
            .parse()
            .map_err(|e| bad(line, format!("bad tdv value: {e}")))?;
        tdv.push(v);
    }
    Ok(TdvModelFile {
        seed,
        params: TdvParams { w, bias },
        tdv,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embeddings::{align, EmbeddingTable, OovPolicy};
    use crate::index::build_index;

    fn matrix_with(rows: &[(&str, &[f64])]) -> (crate::index::Vocabulary, EmbeddingMatrix) {
        let dim = rows[0].1.len();
        let (vocab, _) = build_index(vec![(
            "d1",
            rows.iter().map(|(t, _)| t.to_string()).collect::<Vec<_>>(),
        )])
        .unwrap();
        let mut table = EmbeddingTable::new(dim);
        for (term, v) in rows {
            table.insert(term, v.to_vec());
        }
        (vocab.clone(), align(&vocab, &table, OovPolicy::Zeros, None))
    }

    #[test]
    fn bias_starts_at_one() {
        for dim in [1, 8, 300] {
            assert_eq!(init_params(dim, 42).bias, 1.0);
            assert_eq!(init_params(dim, 0).bias, 1.0);
        }
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let a = init_params(16, 7);
        let b = init_params(16, 7);
        assert_eq!(a, b);
        let c = init_params(16, 8);
        assert_ne!(a, c);
        let bound = (6.0 / 17.0_f64).sqrt();
        assert!(a.w.iter().all(|v| v.abs() <= bound));
        assert!(a.w.iter().any(|v| *v != 0.0));
    }

    #[test]
    fn seed_zero_is_identity_start() {
        let p = init_params(8, 0);
        assert!(p.w.iter().all(|&v| v == 0.0));
        assert_eq!(p.bias, 1.0);
    }

    #[test]
    fn forward_at_identity_start_is_all_ones() {
        let (_, emb) = matrix_with(&[("a", &[0.4, -0.2]), ("b", &[-3.0, 5.0])]);
        let tdv = tdv_forward(&emb, &init_params(2, 0)).unwrap();
        assert_eq!(tdv, vec![1.0, 1.0]);
    }

    #[test]
    fn relu_clamps_negative_preactivations() {
        let (_, emb) = matrix_with(&[("a", &[1.0, 0.0]), ("b", &[-1.3, 0.0])]);
        let params = TdvParams {
            w: vec![1.0, 0.0],
            bias: 0.0,
        };
        let tdv = tdv_forward(&emb, &params).unwrap();
        assert_eq!(tdv, vec![1.0, 0.0]);
        assert!(tdv.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn zero_embedding_rows_get_relu_bias() {
        let (_, emb) = matrix_with(&[("a", &[0.0, 0.0])]);
        let params = TdvParams {
            w: vec![9.0, 9.0],
            bias: 0.75,
        };
        assert_eq!(tdv_forward(&emb, &params).unwrap(), vec![0.75]);
        let params = TdvParams {
            w: vec![9.0, 9.0],
            bias: -0.75,
        };
        assert_eq!(tdv_forward(&emb, &params).unwrap(), vec![0.0]);
    }

    #[test]
    fn dim_mismatch_is_an_error() {
        let (_, emb) = matrix_with(&[("a", &[1.0, 2.0])]);
        let params = init_params(3, 1);
        assert!(matches!(
            tdv_forward(&emb, &params),
            Err(TdvError::DimMismatch { emb: 2, params: 3 })
        ));
    }

    #[test]
    fn clamped_terms_are_flat_under_small_perturbations() {
        let (_, emb) = matrix_with(&[("a", &[0.8, -0.3]), ("b", &[-0.9, 0.1])]);
        let params = TdvParams {
            w: vec![1.0, 0.5],
            bias: 0.2,
        };
        let tdv = tdv_forward(&emb, &params).unwrap();
        // term b: z = -0.9 + 0.05 + 0.2 = -0.65 < 0
        assert_eq!(tdv[1], 0.0);
        let margin = 0.65;
        let eps = 1e-6 * margin;
        for i in 0..2 {
            for sign in [-1.0, 1.0] {
                let mut p = params.clone();
                p.w[i] += sign * eps;
                let perturbed = tdv_forward(&emb, &p).unwrap();
                assert_eq!(perturbed[1], 0.0);
            }
        }
    }

    #[test]
    fn model_file_roundtrip_is_exact() {
        let model = TdvModelFile {
            seed: 42,
            params: TdvParams {
                w: vec![0.1, -2.5e-17, std::f64::consts::PI],
                bias: 1.0000000000000002,
            },
            tdv: vec![0.0, 0.3333333333333333, 7.0],
        };
        let mut buf = Vec::new();
        save_model(&model, &mut buf).unwrap();
        let loaded = load_model(buf.as_slice()).unwrap();
        assert_eq!(model, loaded);
    }

    #[test]
    fn model_file_rejects_garbage() {
        assert!(load_model("not a model".as_bytes()).is_err());
        let truncated = "tdv-model v1\ndim 2\nseed 1\n";
        assert!(load_model(truncated.as_bytes()).is_err());
    }
}
