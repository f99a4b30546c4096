//! Layer-by-layer network growth with selection by the exterior criterion.

use std::fmt::Write as _;

use rayon::prelude::*;
use nalgebra::DMatrix;

use crate::data::{FeatureScale, LabeledDataset};
use crate::error::{Error, Result};
use crate::fit::{compute_cr, DesignPair, Fitter};
use crate::model::{LabelMap, Neuron, PolyNetwork};
use crate::neuron::{enumerate_pairs, transfer, InputRef, NeuronId, TransferKind, WeightVector};
use crate::rng::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GrowthMode {
    /// Every pair of the previous layer's selected neurons.
    #[default]
    Full,
    /// One survivor per layer, combined with each raw feature.
    Chain,
}

/// Which subset the selection criterion is evaluated on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SelectionCriterion {
    /// Examining set B (the exterior criterion).
    #[default]
    Exterior,
    /// Training set A. Only useful to demonstrate over-fitting.
    Training,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthConfig {
    /// Selection width F.
    pub width: usize,
    pub max_layers: usize,
    pub mode: GrowthMode,
    pub fitter: Fitter,
    pub transfer: TransferKind,
    pub criterion: SelectionCriterion,
    pub seed: u64,
}

impl Default for GrowthConfig {
    fn default() -> Self {
        Self {
            width: 40,
            max_layers: 10,
            mode: GrowthMode::Full,
            fitter: Fitter::default(),
            transfer: TransferKind::Bilinear,
            criterion: SelectionCriterion::Exterior,
            seed: 0,
        }
    }
}

impl GrowthConfig {
    pub fn chain() -> Self {
        Self {
            width: 1,
            mode: GrowthMode::Chain,
            ..Self::default()
        }
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        if self.max_layers == 0 {
            return Err(Error::InvalidArgument("max_layers must be at least 1".into()));
        }
        if self.width == 0 {
            return Err(Error::InvalidArgument("selection width F must be at least 1".into()));
        }
        if self.mode == GrowthMode::Full && self.width < 2 && self.max_layers > 1 {
            return Err(Error::InvalidArgument(
                "full growth needs F >= 2 to pair neurons beyond the first layer".into(),
            ));
        }
        if let Fitter::Projection(cfg) = &self.fitter {
            cfg.validate()?;
        }
        if m < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 features, got {m}")));
        }
        let first_layer = m * (m - 1) / 2;
        if self.mode == GrowthMode::Full && self.width as f64 >= 0.4 * first_layer as f64 {
            log::warn!("F = {} is not below 0.4 * L1 = {:.1}", self.width, 0.4 * first_layer as f64);
        }
        Ok(())
    }

    fn effective_width(&self) -> usize {
        match self.mode {
            GrowthMode::Full => self.width,
            GrowthMode::Chain => 1,
        }
    }
}

/// A fitted neuron-candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub inputs: [InputRef; 2],
    pub weights: WeightVector,
    /// Criterion value; `+inf` when fitting failed.
    pub cr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerRecord {
    pub layer: usize,
    pub candidates: Vec<Candidate>,
    /// Candidate indices of the survivors, ascending criterion.
    pub selected: Vec<usize>,
    pub cr_min: f64,
}

impl LayerRecord {
    pub fn population(&self) -> usize {
        self.candidates.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GrowthStop {
    /// The newest layer did not improve on the previous minimum.
    CrRose,
    MaxLayers,
    /// Too few survivors to form another layer.
    SourcesExhausted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthTrace {
    /// Every evaluated layer, including a final rejected one.
    pub layers: Vec<LayerRecord>,
    /// Number of layers kept in the network.
    pub kept: usize,
    pub stop: GrowthStop,
}

impl GrowthTrace {
    pub fn cr_min_kept(&self) -> Vec<f64> {
        self.layers[..self.kept].iter().map(|l| l.cr_min).collect()
    }

    /// One line per layer: `r L_r CR_m selected`.
    pub fn log(&self) -> String {
        let mut out = String::from("layer,population,cr_min,selected,kept\n");
        for (i, l) in self.layers.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                l.layer,
                l.population(),
                l.cr_min,
                l.selected.len(),
                i < self.kept
            );
        }
        out
    }
}

/// Candidates for one layer: pairs of sources, or in chain mode the single
/// previous survivor against every feature.
pub fn generate_candidates(layer: usize, sources: &[InputRef], features: usize, mode: GrowthMode) -> Result<Vec<[InputRef; 2]>> {
    match mode {
        GrowthMode::Chain if layer >= 2 => {
            if sources.len() != 1 {
                return Err(Error::InvalidArgument(format!(
                    "chain growth takes exactly one previous neuron, got {}",
                    sources.len()
                )));
            }
            if features == 0 {
                return Err(Error::InvalidArgument("chain growth needs features".into()));
            }
            Ok((0..features).map(|i| [sources[0], InputRef::Feature(i)]).collect())
        }
        _ => Ok(enumerate_pairs(sources.len())?
            .into_iter()
            .map(|(a, b)| [sources[a], sources[b]])
            .collect()),
    }
}

/// Stable ascending sort by criterion; ties keep generation order.
/// Non-finite values are never selected.
pub fn select_best(crs: &[f64], width: usize) -> Result<Vec<usize>> {
    let mut order: Vec<usize> = (0..crs.len()).filter(|&i| crs[i].is_finite()).collect();
    if order.is_empty() {
        return Err(Error::InvalidArgument("no candidate has a finite criterion".into()));
    }
    order.sort_by(|&a, &b| crs[a].total_cmp(&crs[b]).then(a.cmp(&b)));
    order.truncate(width);
    Ok(order)
}

/// Column-major view of the two subsets used during growth.
#[derive(Debug, Clone)]
pub struct GrowthData {
    cols_a: Vec<Vec<f64>>,
    cols_b: Vec<Vec<f64>>,
    y_a: Vec<f64>,
    y_b: Vec<f64>,
    names: Vec<String>,
}

impl GrowthData {
    pub fn new(a: &LabeledDataset, b: &LabeledDataset) -> Result<Self> {
        if a.m() != b.m() {
            return Err(Error::Dimension { expected: a.m(), found: b.m() });
        }
        if a.n() < 2 || b.n() < 2 {
            return Err(Error::InvalidSplit("both subsets need at least 2 rows".into()));
        }
        let cols = |d: &LabeledDataset| -> Vec<Vec<f64>> {
            d.features().column_iter().map(|c| c.iter().copied().collect()).collect()
        };
        Ok(Self {
            cols_a: cols(a),
            cols_b: cols(b),
            y_a: a.targets(),
            y_b: b.targets(),
            names: a.feature_names().to_vec(),
        })
    }

    /// Real-valued targets instead of class labels.
    pub fn from_targets(x_a: &DMatrix<f64>, y_a: &[f64], x_b: &DMatrix<f64>, y_b: &[f64], names: &[String]) -> Result<Self> {
        if x_a.ncols() != x_b.ncols() || names.len() != x_a.ncols() {
            return Err(Error::Dimension {
                expected: x_a.ncols(),
                found: x_b.ncols(),
            });
        }
        if x_a.nrows() != y_a.len() || x_b.nrows() != y_b.len() {
            return Err(Error::Dimension {
                expected: x_a.nrows(),
                found: y_a.len(),
            });
        }
        if x_a.nrows() < 2 || x_b.nrows() < 2 {
            return Err(Error::InvalidSplit("both subsets need at least 2 rows".into()));
        }
        let cols = |x: &DMatrix<f64>| -> Vec<Vec<f64>> { x.column_iter().map(|c| c.iter().copied().collect()).collect() };
        Ok(Self {
            cols_a: cols(x_a),
            cols_b: cols(x_b),
            y_a: y_a.to_vec(),
            y_b: y_b.to_vec(),
            names: names.to_vec(),
        })
    }

    pub fn m(&self) -> usize {
        self.cols_a.len()
    }
}

struct LayerOutputs {
    a: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
}

/// Grows a network on training set `a`, selecting on examining set `b`.
/// Both must already be normalized.
pub fn grow(a: &LabeledDataset, b: &LabeledDataset, cfg: &GrowthConfig) -> Result<(PolyNetwork, GrowthTrace)> {
    grow_data(&GrowthData::new(a, b)?, cfg)
}

pub fn grow_data(data: &GrowthData, cfg: &GrowthConfig) -> Result<(PolyNetwork, GrowthTrace)> {
    let m = data.m();
    cfg.validate(m)?;
    let width = cfg.effective_width();

    let floor_a = rounding_floor(&data.y_a);
    let floor_b = rounding_floor(&data.y_b);
    let mut layers: Vec<LayerRecord> = Vec::new();
    let mut prev_outputs: Option<LayerOutputs> = None;
    let mut stop = GrowthStop::MaxLayers;
    let mut kept = 0;

    for layer in 1..=cfg.max_layers {
        let sources: Vec<InputRef> = match (&prev_outputs, layers.last()) {
            (Some(_), Some(prev)) => {
                let count = match cfg.mode {
                    GrowthMode::Full => prev.selected.len(),
                    GrowthMode::Chain => 1,
                };
                (1..=count).map(|i| InputRef::Neuron(NeuronId::new(layer - 1, i))).collect()
            }
            _ => (0..m).map(InputRef::Feature).collect(),
        };
        if cfg.mode == GrowthMode::Full && sources.len() < 2 {
            stop = GrowthStop::SourcesExhausted;
            break;
        }
        let specs = generate_candidates(layer, &sources, m, cfg.mode)?;

        let column = |r: InputRef, side_a: bool| -> &[f64] {
            match r {
                InputRef::Feature(i) => {
                    if side_a {
                        &data.cols_a[i]
                    } else {
                        &data.cols_b[i]
                    }
                }
                InputRef::Neuron(id) => {
                    let out = prev_outputs.as_ref().expect("neuron refs only after layer 1");
                    if side_a {
                        &out.a[id.index - 1]
                    } else {
                        &out.b[id.index - 1]
                    }
                }
            }
        };

        let candidates: Vec<Candidate> = specs
            .par_iter()
            .enumerate()
            .map(|(ci, inputs)| {
                let seed = derive_seed(cfg.seed, &[layer as u64, ci as u64]);
                let fitted = DesignPair::from_inputs(
                    cfg.transfer,
                    (column(inputs[0], true), column(inputs[1], true)),
                    &data.y_a,
                    (column(inputs[0], false), column(inputs[1], false)),
                    &data.y_b,
                )
                .and_then(|d| {
                    let f = cfg.fitter.fit(&d, seed)?;
                    let (cr, floor) = match cfg.criterion {
                        SelectionCriterion::Exterior => (f.examining_error, floor_b),
                        SelectionCriterion::Training => (compute_cr(&f.weights, &d.u_a, &d.y_a), floor_a),
                    };
                    let cr = if cr <= floor { 0.0 } else { cr };
                    Ok((f.weights, cr))
                });
                match fitted {
                    Ok((weights, cr)) if weights.is_finite() && cr.is_finite() => Candidate {
                        inputs: *inputs,
                        weights,
                        cr,
                    },
                    _ => Candidate {
                        inputs: *inputs,
                        weights: WeightVector::zeros(cfg.transfer),
                        cr: f64::INFINITY,
                    },
                }
            })
            .collect();

        let crs: Vec<f64> = candidates.iter().map(|c| c.cr).collect();
        let selected = select_best(&crs, width).map_err(|_| Error::NoFiniteCandidate { layer })?;
        let cr_min = crs[selected[0]];
        let record = LayerRecord {
            layer,
            candidates,
            selected,
            cr_min,
        };

        let improved = layers.last().is_none_or(|prev| cr_min < prev.cr_min);
        if !improved {
            layers.push(record);
            stop = GrowthStop::CrRose;
            break;
        }

        let outputs = LayerOutputs {
            a: record
                .selected
                .iter()
                .map(|&ci| neuron_output(&record.candidates[ci], &column, true))
                .collect(),
            b: record
                .selected
                .iter()
                .map(|&ci| neuron_output(&record.candidates[ci], &column, false))
                .collect(),
        };
        layers.push(record);
        kept = layer;
        prev_outputs = Some(outputs);
    }

    let network = assemble(&layers[..kept], cfg.transfer, &data.names)?;
    Ok((network, GrowthTrace { layers, kept, stop }))
}

/// Criterion values at or below this are indistinguishable from an exact
/// fit in double precision and are recorded as zero, so rounding noise
/// cannot pass for an improvement.
fn rounding_floor(y: &[f64]) -> f64 {
    let scale = y.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    let per_row = 64.0 * f64::EPSILON * scale;
    y.len() as f64 * per_row * per_row
}

fn neuron_output<'a>(c: &Candidate, column: &impl Fn(InputRef, bool) -> &'a [f64], side_a: bool) -> Vec<f64> {
    let u1 = column(c.inputs[0], side_a);
    let u2 = column(c.inputs[1], side_a);
    u1.iter().zip(u2).map(|(&p, &q)| transfer(c.weights.as_slice(), p, q)).collect()
}

/// Survivors of every kept layer, pruned to what the output depends on.
fn assemble(kept: &[LayerRecord], kind: TransferKind, names: &[String]) -> Result<PolyNetwork> {
    let mut neurons = Vec::new();
    for rec in kept {
        for (rank, &ci) in rec.selected.iter().enumerate() {
            let c = &rec.candidates[ci];
            neurons.push(Neuron {
                id: NeuronId::new(rec.layer, rank + 1),
                kind,
                inputs: c.inputs,
                weights: c.weights.clone(),
            });
        }
    }
    let output = NeuronId::new(kept.len(), 1);
    let neurons = prune(&neurons, output)?;
    let mut used: Vec<usize> = neurons
        .iter()
        .flat_map(|n| n.inputs)
        .filter_map(|r| match r {
            InputRef::Feature(i) => Some(i),
            InputRef::Neuron(_) => None,
        })
        .collect();
    used.sort_unstable();
    used.dedup();
    let features = used
        .into_iter()
        .map(|i| FeatureScale {
            index: i,
            name: names[i].clone(),
            min: 0.0,
            max: 1.0,
        })
        .collect();
    PolyNetwork::new(features, None, neurons, output, LabelMap::default())
}

/// Keeps exactly the neurons on directed paths into `output`, in
/// layer-major order.
pub fn prune(neurons: &[Neuron], output: NeuronId) -> Result<Vec<Neuron>> {
    use std::collections::{BTreeSet, HashMap};
    let by_id: HashMap<NeuronId, &Neuron> = neurons.iter().map(|n| (n.id, n)).collect();
    if !by_id.contains_key(&output) {
        return Err(Error::Integrity(format!("output neuron {output} is not in the network")));
    }
    let mut reachable = BTreeSet::new();
    let mut stack = vec![output];
    while let Some(id) = stack.pop() {
        if !reachable.insert(id) {
            continue;
        }
        let n = by_id
            .get(&id)
            .ok_or_else(|| Error::Integrity(format!("reference to missing neuron {id}")))?;
        for r in n.inputs {
            if let InputRef::Neuron(src) = r {
                if src.layer >= id.layer {
                    return Err(Error::Integrity(format!("{id} references {src} from a later layer")));
                }
                stack.push(src);
            }
        }
    }
    Ok(reachable.into_iter().map(|id| by_id[&id].clone()).collect())
}
