//! The trained polynomial network: evaluation, thresholded classification,
//! a versioned text format, and rendering as explicit polynomial rules.

pub(crate) mod format;
mod rules;

pub use format::{decode_name, encode_name, Document, Line, FORMAT_HEADER};
pub use rules::{feature_report, render_rules, FeatureReport, FeatureUse};

use std::collections::{HashMap, HashSet};

use crate::data::FeatureScale;
use crate::error::{Error, Result};
use crate::neuron::{transfer, InputRef, NeuronId, TransferKind, WeightVector};
use crate::signal::PcaModel;

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct Neuron {
    pub id: NeuronId,
    pub kind: TransferKind,
    pub inputs: [InputRef; 2],
    pub weights: WeightVector,
}

/// Display names of class 0 and class 1 (1 = positive / normal).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap(pub [String; 2]);

impl Default for LabelMap {
    fn default() -> Self {
        LabelMap(["0".into(), "1".into()])
    }
}

impl LabelMap {
    pub fn name(&self, class: u8) -> &str {
        &self.0[usize::from(class.min(1))]
    }
}

/// The `kind` line of a model document (`gmdh` or `fnn`).
pub fn model_kind(text: &str) -> Result<String> {
    Ok(format::Document::parse(text)?.kind)
}

/// Raw-input stage applied before the network's own feature scaling:
/// min-max scaling of raw columns, then projection onto principal axes.
#[derive(Debug, Clone, PartialEq)]
pub struct Preprocess {
    pub inputs: Vec<FeatureScale>,
    pub pca: PcaModel,
}

impl Preprocess {
    pub fn apply(&self, raw: &[f64]) -> Result<Vec<f64>> {
        let scaled = self
            .inputs
            .iter()
            .map(|s| raw.get(s.index).map(|&v| s.normalize(v)).ok_or_else(|| Error::MissingFeature(s.name.clone())))
            .collect::<Result<Vec<f64>>>()?;
        self.pca.transform_row(&scaled)
    }
}

/// Input column positions resolved against a CSV header.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Binding {
    columns: Vec<Option<usize>>,
}

impl Binding {
    /// Row in model input space; unused positions are NaN.
    pub fn gather(&self, row: &[f64]) -> Vec<f64> {
        self.columns
            .iter()
            .map(|c| c.map_or(f64::NAN, |j| row[j]))
            .collect()
    }
}

/// Which input columns a model reads, by position and name.
pub(crate) fn required_inputs<'a>(preprocess: Option<&'a Preprocess>, features: &'a [FeatureScale]) -> &'a [FeatureScale] {
    preprocess.map_or(features, |p| &p.inputs)
}

pub(crate) fn bind_inputs(required: &[FeatureScale], header: &[String]) -> Result<Binding> {
    let size = required.iter().map(|s| s.index + 1).max().unwrap_or(0);
    let mut columns = vec![None; size];
    for s in required {
        let j = header
            .iter()
            .position(|h| *h == s.name)
            .ok_or_else(|| Error::MissingFeature(s.name.clone()))?;
        columns[s.index] = Some(j);
    }
    Ok(Binding { columns })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    Feature(usize),
    Neuron(usize),
}

/// A pruned polynomial network ready for prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyNetwork {
    features: Vec<FeatureScale>,
    preprocess: Option<Preprocess>,
    neurons: Vec<Neuron>,
    output: NeuronId,
    labels: LabelMap,
    slots: Vec<[Slot; 2]>,
}

impl PolyNetwork {
    /// Validates references, reachability and weights; neurons are stored
    /// in layer-major order whatever order they arrive in.
    pub fn new(
        features: Vec<FeatureScale>,
        preprocess: Option<Preprocess>,
        mut neurons: Vec<Neuron>,
        output: NeuronId,
        labels: LabelMap,
    ) -> Result<Self> {
        neurons.sort_by_key(|n| n.id);
        if neurons.windows(2).any(|w| w[0].id == w[1].id) {
            return Err(Error::Integrity("duplicate neuron id".into()));
        }
        let feature_pos: HashMap<usize, usize> = features.iter().enumerate().map(|(k, f)| (f.index, k)).collect();
        if feature_pos.len() != features.len() {
            return Err(Error::Integrity("duplicate feature index".into()));
        }
        for f in &features {
            if !(f.max > f.min) {
                return Err(Error::Integrity(format!("feature {:?} has an empty range", f.name)));
            }
        }
        if let Some(p) = &preprocess {
            if p.inputs.len() != p.pca.m() {
                return Err(Error::Integrity("preprocess inputs do not match PCA width".into()));
            }
            if let Some(f) = features.iter().find(|f| f.index >= p.pca.q()) {
                return Err(Error::Integrity(format!("feature {:?} is beyond the PCA output", f.name)));
            }
        }
        let neuron_pos: HashMap<NeuronId, usize> = neurons.iter().enumerate().map(|(k, n)| (n.id, k)).collect();
        let mut slots = Vec::with_capacity(neurons.len());
        for n in &neurons {
            if n.weights.len() != n.kind.arity() || !n.weights.is_finite() {
                return Err(Error::Integrity(format!("neuron {} has invalid weights", n.id)));
            }
            if n.inputs[0] == n.inputs[1] {
                return Err(Error::Integrity(format!("neuron {} has two identical inputs", n.id)));
            }
            let mut s = [Slot::Feature(0); 2];
            for (k, r) in n.inputs.iter().enumerate() {
                s[k] = match *r {
                    InputRef::Feature(i) => Slot::Feature(
                        *feature_pos
                            .get(&i)
                            .ok_or_else(|| Error::Integrity(format!("neuron {} reads undeclared feature {}", n.id, i + 1)))?,
                    ),
                    InputRef::Neuron(src) => {
                        if src.layer >= n.id.layer {
                            return Err(Error::Integrity(format!("{} references {} from a later layer", n.id, src)));
                        }
                        Slot::Neuron(
                            *neuron_pos
                                .get(&src)
                                .ok_or_else(|| Error::Integrity(format!("{} references missing neuron {}", n.id, src)))?,
                        )
                    }
                };
            }
            slots.push(s);
        }
        let Some(&out_pos) = neuron_pos.get(&output) else {
            return Err(Error::Integrity(format!("output neuron {output} is not in the network")));
        };
        // Every neuron must feed the output.
        let mut seen = HashSet::new();
        let mut stack = vec![out_pos];
        while let Some(k) = stack.pop() {
            if seen.insert(k) {
                stack.extend(slots[k].iter().filter_map(|s| match s {
                    Slot::Neuron(j) => Some(*j),
                    Slot::Feature(_) => None,
                }));
            }
        }
        if seen.len() != neurons.len() {
            return Err(Error::Integrity("network contains neurons the output does not use".into()));
        }
        Ok(Self {
            features,
            preprocess,
            neurons,
            output,
            labels,
            slots,
        })
    }

    pub fn features(&self) -> &[FeatureScale] {
        &self.features
    }

    pub fn preprocess(&self) -> Option<&Preprocess> {
        self.preprocess.as_ref()
    }

    pub fn neurons(&self) -> &[Neuron] {
        &self.neurons
    }

    pub fn output(&self) -> NeuronId {
        self.output
    }

    pub fn labels(&self) -> &LabelMap {
        &self.labels
    }

    pub fn depth(&self) -> usize {
        self.output.layer
    }

    pub fn with_labels(mut self, labels: LabelMap) -> Self {
        self.labels = labels;
        self
    }

    /// Re-expresses feature column `k` as `scales[k]`: original input
    /// position, name and training range.
    pub fn with_input_scales(self, scales: &[FeatureScale], preprocess: Option<Preprocess>) -> Result<Self> {
        let lookup = |i: usize| {
            scales
                .get(i)
                .cloned()
                .ok_or_else(|| Error::Integrity(format!("feature column {i} has no scale")))
        };
        let features = self
            .features
            .iter()
            .map(|f| lookup(f.index))
            .collect::<Result<Vec<_>>>()?;
        let neurons = self
            .neurons
            .into_iter()
            .map(|mut n| {
                for r in n.inputs.iter_mut() {
                    if let InputRef::Feature(i) = r {
                        *i = lookup(*i)?.index;
                    }
                }
                Ok(n)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(features, preprocess, neurons, self.output, self.labels)
    }

    /// Input columns this model reads (raw columns when preprocessing).
    pub fn required_inputs(&self) -> &[FeatureScale] {
        required_inputs(self.preprocess.as_ref(), &self.features)
    }

    pub fn bind(&self, header: &[String]) -> Result<Binding> {
        bind_inputs(self.required_inputs(), header)
    }

    /// Output value for a raw input row indexed by input position.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        let staged;
        let z = match &self.preprocess {
            Some(p) => {
                staged = p.apply(x)?;
                &staged[..]
            }
            None => x,
        };
        let inputs = self
            .features
            .iter()
            .map(|f| match z.get(f.index) {
                Some(v) if v.is_finite() => Ok(f.normalize(*v)),
                _ => Err(Error::MissingFeature(f.name.clone())),
            })
            .collect::<Result<Vec<f64>>>()?;
        let mut values = vec![0.0; self.neurons.len()];
        for (k, n) in self.neurons.iter().enumerate() {
            let get = |s: Slot| match s {
                Slot::Feature(j) => inputs[j],
                Slot::Neuron(j) => values[j],
            };
            values[k] = transfer(n.weights.as_slice(), get(self.slots[k][0]), get(self.slots[k][1]));
        }
        let out = self.neurons.iter().position(|n| n.id == self.output).expect("validated");
        Ok(values[out])
    }

    /// 1 when the output reaches `threshold` (inclusive), else 0.
    pub fn classify(&self, x: &[f64], threshold: f64) -> Result<u8> {
        Ok(u8::from(self.predict(x)? >= threshold))
    }

    pub fn to_text(&self) -> String {
        format::write_poly(self)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        format::read_poly(text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neuron::InputRef::Feature as X;

    fn scale(index: usize, name: &str) -> FeatureScale {
        FeatureScale {
            index,
            name: name.into(),
            min: 0.0,
            max: 1.0,
        }
    }

    fn constant(c: f64) -> PolyNetwork {
        PolyNetwork::new(
            vec![scale(0, "a"), scale(1, "b")],
            None,
            vec![Neuron {
                id: NeuronId::new(1, 1),
                kind: TransferKind::Bilinear,
                inputs: [X(0), X(1)],
                weights: WeightVector(vec![c, 0.0, 0.0, 0.0]),
            }],
            NeuronId::new(1, 1),
            LabelMap::default(),
        )
        .unwrap()
    }

    #[test]
    fn constant_network() {
        let net = constant(0.2);
        assert_eq!(net.predict(&[5.0, -3.0]).unwrap(), 0.2);
        assert_eq!(net.classify(&[5.0, -3.0], DEFAULT_THRESHOLD).unwrap(), 0);
        assert_eq!(constant(0.5).classify(&[0.0, 0.0], 0.5).unwrap(), 1);
    }

    #[test]
    fn missing_feature_is_named() {
        let net = constant(0.2);
        match net.predict(&[1.0]) {
            Err(Error::MissingFeature(name)) => assert_eq!(name, "b"),
            other => panic!("{other:?}"),
        }
        match net.bind(&["a".into(), "c".into()]) {
            Err(Error::MissingFeature(name)) => assert_eq!(name, "b"),
            other => panic!("{other:?}"),
        }
        let b = net.bind(&["z".into(), "b".into(), "a".into()]).unwrap();
        assert_eq!(b.gather(&[9.0, 2.0, 1.0]), vec![1.0, 2.0]);
    }

    #[test]
    fn rejects_unreachable_and_dangling() {
        let n11 = Neuron {
            id: NeuronId::new(1, 1),
            kind: TransferKind::Bilinear,
            inputs: [X(0), X(1)],
            weights: WeightVector(vec![0.0; 4]),
        };
        let n12 = Neuron { id: NeuronId::new(1, 2), ..n11.clone() };
        let feats = vec![scale(0, "a"), scale(1, "b")];
        assert!(PolyNetwork::new(feats.clone(), None, vec![n11.clone(), n12], NeuronId::new(1, 1), LabelMap::default()).is_err());
        let dangling = Neuron {
            id: NeuronId::new(2, 1),
            inputs: [InputRef::Neuron(NeuronId::new(1, 1)), InputRef::Neuron(NeuronId::new(1, 3))],
            ..n11.clone()
        };
        assert!(matches!(
            PolyNetwork::new(feats.clone(), None, vec![n11.clone(), dangling], NeuronId::new(2, 1), LabelMap::default()),
            Err(Error::Integrity(_))
        ));
        assert!(PolyNetwork::new(feats, None, vec![n11], NeuronId::new(2, 1), LabelMap::default()).is_err());
    }

    #[test]
    fn threshold_is_monotone() {
        let net = constant(0.37);
        let mut last = 1;
        for k in 0..=100 {
            let c = net.classify(&[0.0, 0.0], k as f64 / 100.0).unwrap();
            assert!(c <= last);
            last = c;
        }
    }
}
