use std::fmt::Debug;
use std::ops::{AddAssign, MulAssign, SubAssign};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::rng::rng_for;

use super::EncoderConfig;

/// Floating-point element type of a model: `f32` for training, `f64` for
/// gradient checks.
pub trait Scalar:
    num_traits::Float + AddAssign + SubAssign + MulAssign + Default + Debug + Send + Sync + 'static
{
    fn of(x: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Scalar for f32 {
    fn of(x: f64) -> Self {
        x as f32
    }
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn of(x: f64) -> Self {
        x
    }
    fn as_f64(self) -> f64 {
        self
    }
}

pub const LAYER_TENSORS: [&str; 16] = [
    "ln1_gain", "ln1_bias", "wq", "bq", "wk", "bk", "wv", "bv", "wo", "bo", "ln2_gain", "ln2_bias", "w1", "b1", "w2",
    "b2",
];

/// One pre-norm transformer block. Matrices are `[in × out]` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerWeights<T> {
    pub ln1_gain: Vec<T>,
    pub ln1_bias: Vec<T>,
    pub wq: Vec<T>,
    pub bq: Vec<T>,
    pub wk: Vec<T>,
    pub bk: Vec<T>,
    pub wv: Vec<T>,
    pub bv: Vec<T>,
    pub wo: Vec<T>,
    pub bo: Vec<T>,
    pub ln2_gain: Vec<T>,
    pub ln2_bias: Vec<T>,
    pub w1: Vec<T>,
    pub b1: Vec<T>,
    pub w2: Vec<T>,
    pub b2: Vec<T>,
}

impl<T: Scalar> LayerWeights<T> {
    fn shapes(c: &EncoderConfig) -> [Vec<usize>; 16] {
        let (d, f) = (c.d_model, c.ff_dim);
        [
            vec![d],
            vec![d],
            vec![d, d],
            vec![d],
            vec![d, d],
            vec![d],
            vec![d, d],
            vec![d],
            vec![d, d],
            vec![d],
            vec![d],
            vec![d],
            vec![d, f],
            vec![f],
            vec![f, d],
            vec![d],
        ]
    }

    fn tensors(&self) -> [&Vec<T>; 16] {
        [
            &self.ln1_gain,
            &self.ln1_bias,
            &self.wq,
            &self.bq,
            &self.wk,
            &self.bk,
            &self.wv,
            &self.bv,
            &self.wo,
            &self.bo,
            &self.ln2_gain,
            &self.ln2_bias,
            &self.w1,
            &self.b1,
            &self.w2,
            &self.b2,
        ]
    }

    fn tensors_mut(&mut self) -> [&mut Vec<T>; 16] {
        [
            &mut self.ln1_gain,
            &mut self.ln1_bias,
            &mut self.wq,
            &mut self.bq,
            &mut self.wk,
            &mut self.bk,
            &mut self.wv,
            &mut self.bv,
            &mut self.wo,
            &mut self.bo,
            &mut self.ln2_gain,
            &mut self.ln2_bias,
            &mut self.w1,
            &mut self.b1,
            &mut self.w2,
            &mut self.b2,
        ]
    }

    fn from_tensors(mut t: Vec<Vec<T>>) -> Self {
        let mut next = || t.remove(0);
        LayerWeights {
            ln1_gain: next(),
            ln1_bias: next(),
            wq: next(),
            bq: next(),
            wk: next(),
            bk: next(),
            wv: next(),
            bv: next(),
            wo: next(),
            bo: next(),
            ln2_gain: next(),
            ln2_bias: next(),
            w1: next(),
            b1: next(),
            w2: next(),
            b2: next(),
        }
    }
}

/// Token and position embeddings, transformer blocks and the final layer
/// norm. `vocab_fingerprint` is bound the first time the weights are trained
/// with a tokenizer; fresh weights accept any vocabulary of the right size.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderWeights<T = f32> {
    pub config: EncoderConfig,
    pub vocab_fingerprint: Option<String>,
    pub token_embedding: Vec<T>,
    pub position_embedding: Vec<T>,
    pub layers: Vec<LayerWeights<T>>,
    pub final_gain: Vec<T>,
    pub final_bias: Vec<T>,
}

/// `p = softmax(W·h + bias)` with `W` stored `[classes × d_model]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierHead<T = f32> {
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

/// Named tensor with its shape, in declaration order.
pub type NamedTensor<'a, T> = (String, Vec<usize>, &'a [T]);

fn xavier(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize) -> impl FnMut() -> f64 + '_ {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    move || rng.random_range(-bound..bound)
}

fn fill<T: Scalar>(len: usize, mut draw: impl FnMut() -> f64) -> Vec<T> {
    (0..len).map(|_| T::of(draw())).collect()
}

const INIT_STREAM: u64 = 0x1417;

impl<T: Scalar> EncoderWeights<T> {
    /// Xavier-uniform matrices and embeddings, zero biases, unit gains.
    pub fn init(config: &EncoderConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let c = config;
        let (d, f, v, l) = (c.d_model, c.ff_dim, c.vocab_size, c.max_len);
        let mut rng = rng_for(seed, &[INIT_STREAM]);
        let token_embedding = fill(v * d, xavier(&mut rng, v, d));
        let position_embedding = fill(l * d, xavier(&mut rng, l, d));
        let layers = (0..c.layers)
            .map(|_| LayerWeights {
                ln1_gain: vec![T::one(); d],
                ln1_bias: vec![T::zero(); d],
                wq: fill(d * d, xavier(&mut rng, d, d)),
                bq: vec![T::zero(); d],
                wk: fill(d * d, xavier(&mut rng, d, d)),
                bk: vec![T::zero(); d],
                wv: fill(d * d, xavier(&mut rng, d, d)),
                bv: vec![T::zero(); d],
                wo: fill(d * d, xavier(&mut rng, d, d)),
                bo: vec![T::zero(); d],
                ln2_gain: vec![T::one(); d],
                ln2_bias: vec![T::zero(); d],
                w1: fill(d * f, xavier(&mut rng, d, f)),
                b1: vec![T::zero(); f],
                w2: fill(f * d, xavier(&mut rng, f, d)),
                b2: vec![T::zero(); d],
            })
            .collect();
        Ok(EncoderWeights {
            config: config.clone(),
            vocab_fingerprint: None,
            token_embedding,
            position_embedding,
            layers,
            final_gain: vec![T::one(); d],
            final_bias: vec![T::zero(); d],
        })
    }

    pub fn shapes(config: &EncoderConfig) -> Vec<(String, Vec<usize>)> {
        let d = config.d_model;
        let mut out = vec![
            ("token_embedding".to_string(), vec![config.vocab_size, d]),
            ("position_embedding".to_string(), vec![config.max_len, d]),
        ];
        for i in 0..config.layers {
            for (name, shape) in LAYER_TENSORS.iter().zip(LayerWeights::<T>::shapes(config)) {
                out.push((format!("layers.{i}.{name}"), shape));
            }
        }
        out.push(("final_gain".to_string(), vec![d]));
        out.push(("final_bias".to_string(), vec![d]));
        out
    }

    pub fn tensors(&self) -> Vec<&Vec<T>> {
        let mut out = vec![&self.token_embedding, &self.position_embedding];
        for layer in &self.layers {
            out.extend(layer.tensors());
        }
        out.push(&self.final_gain);
        out.push(&self.final_bias);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Vec<T>> {
        let mut out = vec![&mut self.token_embedding, &mut self.position_embedding];
        for layer in &mut self.layers {
            out.extend(layer.tensors_mut());
        }
        out.push(&mut self.final_gain);
        out.push(&mut self.final_bias);
        out
    }

    pub fn named_tensors(&self) -> Vec<NamedTensor<'_, T>> {
        Self::shapes(&self.config)
            .into_iter()
            .zip(self.tensors())
            .map(|((name, shape), t)| (name, shape, t.as_slice()))
            .collect()
    }

    /// Rebuild from tensors in [`EncoderWeights::shapes`] order.
    pub fn from_tensors(config: &EncoderConfig, tensors: Vec<Vec<T>>) -> Result<Self> {
        config.validate()?;
        let shapes = Self::shapes(config);
        if tensors.len() != shapes.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} encoder tensors, found {}",
                shapes.len(),
                tensors.len()
            )));
        }
        for ((name, shape), t) in shapes.iter().zip(&tensors) {
            if t.len() != shape.iter().product::<usize>() {
                return Err(Error::Checkpoint(format!("tensor {name} has {} values, expected shape {shape:?}", t.len())));
            }
        }
        let mut it = tensors.into_iter();
        let token_embedding = it.next().unwrap();
        let position_embedding = it.next().unwrap();
        let layers = (0..config.layers)
            .map(|_| LayerWeights::from_tensors(it.by_ref().take(LAYER_TENSORS.len()).collect()))
            .collect();
        Ok(EncoderWeights {
            config: config.clone(),
            vocab_fingerprint: None,
            token_embedding,
            position_embedding,
            layers,
            final_gain: it.next().unwrap(),
            final_bias: it.next().unwrap(),
        })
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.iter_mut().for_each(|x| *x = T::zero());
        }
        z
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|x| x.is_finite()))
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn cast<U: Scalar>(&self) -> EncoderWeights<U> {
        let tensors = self.tensors().into_iter().map(|t| t.iter().map(|x| U::of(x.as_f64())).collect()).collect();
        let mut out = EncoderWeights::from_tensors(&self.config, tensors).expect("shapes are preserved");
        out.vocab_fingerprint = self.vocab_fingerprint.clone();
        out
    }
}

impl<T: Scalar> ClassifierHead<T> {
    const HEAD_STREAM: u64 = 0x4EAD;

    pub fn init(config: &EncoderConfig, seed: u64) -> Self {
        let d = config.d_model;
        let mut rng = rng_for(seed, &[Self::HEAD_STREAM]);
        ClassifierHead {
            weight: fill(2 * d, xavier(&mut rng, d, 2)),
            bias: vec![T::zero(); 2],
        }
    }

    pub fn zeros(d_model: usize) -> Self {
        ClassifierHead {
            weight: vec![T::zero(); 2 * d_model],
            bias: vec![T::zero(); 2],
        }
    }

    pub fn d_model(&self) -> usize {
        self.weight.len() / 2
    }

    pub fn tensors(&self) -> Vec<&Vec<T>> {
        vec![&self.weight, &self.bias]
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Vec<T>> {
        vec![&mut self.weight, &mut self.bias]
    }

    pub fn named_tensors(&self) -> Vec<NamedTensor<'_, T>> {
        vec![
            ("head.weight".to_string(), vec![2, self.d_model()], &self.weight),
            ("head.bias".to_string(), vec![2], &self.bias),
        ]
    }

    pub fn logits(&self, h: &[T]) -> [T; 2] {
        let d = self.d_model();
        [0, 1].map(|c| super::ops::dot(&self.weight[c * d..(c + 1) * d], h) + self.bias[c])
    }

    pub fn cast<U: Scalar>(&self) -> ClassifierHead<U> {
        ClassifierHead {
            weight: self.weight.iter().map(|x| U::of(x.as_f64())).collect(),
            bias: self.bias.iter().map(|x| U::of(x.as_f64())).collect(),
        }
    }
}
