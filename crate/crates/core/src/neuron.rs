//! Polynomial transfer functions and neuron input construction.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum TransferKind {
    /// `w0 + w1 u1 + w2 u2`
    Linear,
    /// `w0 + w1 u1 + w2 u2 + w12 u1 u2`
    #[default]
    Bilinear,
}

impl TransferKind {
    /// Number of weights.
    pub fn arity(self) -> usize {
        match self {
            TransferKind::Linear => 3,
            TransferKind::Bilinear => 4,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TransferKind::Linear => "linear",
            TransferKind::Bilinear => "bilinear",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "linear" => Some(TransferKind::Linear),
            "bilinear" => Some(TransferKind::Bilinear),
            _ => None,
        }
    }
}

/// Position of a neuron: layer `r >= 1`, 1-based rank among that layer's
/// selected neurons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NeuronId {
    pub layer: usize,
    pub index: usize,
}

impl NeuronId {
    pub fn new(layer: usize, index: usize) -> Self {
        Self { layer, index }
    }
}

impl fmt::Display for NeuronId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "y_{}^{{({})}}", self.index, self.layer)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum InputRef {
    /// Column of the network's input matrix (0-based).
    Feature(usize),
    Neuron(NeuronId),
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(pub Vec<f64>);

impl WeightVector {
    pub fn zeros(kind: TransferKind) -> Self {
        WeightVector(vec![0.0; kind.arity()])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|w| w.is_finite())
    }
}

impl From<Vec<f64>> for WeightVector {
    fn from(v: Vec<f64>) -> Self {
        WeightVector(v)
    }
}

/// `(1, u1, u2[, u1 u2])`.
pub fn make_input_vector(u1: f64, u2: f64, kind: TransferKind) -> Vec<f64> {
    match kind {
        TransferKind::Linear => vec![1.0, u1, u2],
        TransferKind::Bilinear => vec![1.0, u1, u2, u1 * u2],
    }
}

/// Transfer output: dot product of input vector and weights.
pub fn eval_neuron(u: &[f64], w: &WeightVector) -> Result<f64> {
    if u.len() != w.len() {
        return Err(Error::Dimension {
            expected: w.len(),
            found: u.len(),
        });
    }
    Ok(u.iter().zip(&w.0).map(|(a, b)| a * b).sum())
}

/// Evaluates the transfer function directly on two inputs.
#[inline]
pub fn transfer(w: &[f64], u1: f64, u2: f64) -> f64 {
    let y = w[0] + w[1] * u1 + w[2] * u2;
    if w.len() > 3 {
        y + w[3] * u1 * u2
    } else {
        y
    }
}

/// All unordered pairs `(i1, i2)` with `i1 < i2 < count`, lexicographic.
pub fn enumerate_pairs(count: usize) -> Result<Vec<(usize, usize)>> {
    if count < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 sources to pair, got {count}"
        )));
    }
    Ok((0..count)
        .flat_map(|i| (i + 1..count).map(move |j| (i, j)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const EQ16_FIRST: [f64; 4] = [0.6965, 0.3916, 0.2484, -0.2312];

    #[test]
    fn input_vectors() {
        assert_eq!(make_input_vector(2.0, 3.0, TransferKind::Bilinear), vec![1.0, 2.0, 3.0, 6.0]);
        assert_eq!(make_input_vector(0.0, 0.0, TransferKind::Bilinear), vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(make_input_vector(0.3, -7.0, TransferKind::Linear), vec![1.0, 0.3, -7.0]);
    }

    #[test]
    fn evaluates_published_first_layer_rule() {
        let w = WeightVector(EQ16_FIRST.to_vec());
        let at0 = eval_neuron(&make_input_vector(0.0, 0.0, TransferKind::Bilinear), &w).unwrap();
        assert!((at0 - 0.6965).abs() < 1e-12);
        let at1 = eval_neuron(&make_input_vector(1.0, 1.0, TransferKind::Bilinear), &w).unwrap();
        assert!((at1 - 1.1053).abs() < 1e-12);
        assert_eq!(transfer(&EQ16_FIRST, 1.0, 1.0), at1);
    }

    #[test]
    fn constant_neuron() {
        let w = WeightVector(vec![0.42, 0.0, 0.0, 0.0]);
        assert_eq!(eval_neuron(&make_input_vector(5.0, -3.0, TransferKind::Bilinear), &w).unwrap(), 0.42);
    }

    #[test]
    fn length_mismatch() {
        let w = WeightVector(vec![1.0, 2.0, 3.0]);
        assert!(eval_neuron(&[1.0, 2.0, 3.0, 4.0], &w).is_err());
    }

    #[test]
    fn pair_counts() {
        assert_eq!(enumerate_pairs(5).unwrap().len(), 10);
        assert_eq!(enumerate_pairs(2).unwrap(), vec![(0, 1)]);
        assert_eq!(enumerate_pairs(4).unwrap(), vec![(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]);
        assert!(enumerate_pairs(1).is_err());
    }

    #[test]
    fn pairs_are_unique_and_off_diagonal() {
        for count in 2..=200 {
            let pairs = enumerate_pairs(count).unwrap();
            assert_eq!(pairs.len(), count * (count - 1) / 2);
            assert!(pairs.iter().all(|(a, b)| a < b));
            assert!(pairs.windows(2).all(|w| w[0] < w[1]));
        }
    }

    proptest! {
        #[test]
        fn linear_in_weights(
            u1 in -5.0f64..5.0, u2 in -5.0f64..5.0, a in -3.0f64..3.0, b in -3.0f64..3.0,
            w1 in prop::array::uniform4(-2.0f64..2.0), w2 in prop::array::uniform4(-2.0f64..2.0),
        ) {
            let u = make_input_vector(u1, u2, TransferKind::Bilinear);
            let combo = WeightVector((0..4).map(|i| a * w1[i] + b * w2[i]).collect());
            let lhs = eval_neuron(&u, &combo).unwrap();
            let rhs = a * eval_neuron(&u, &WeightVector(w1.to_vec())).unwrap()
                + b * eval_neuron(&u, &WeightVector(w2.to_vec())).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()));
        }
    }
}
