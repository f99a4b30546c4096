//! Self-organizing polynomial networks for binary classification.
//!
//! Networks are grown layer by layer in the GMDH tradition: every pair of
//! inputs feeds a candidate neuron with a short bilinear transfer function,
//! candidates are fitted on a training subset and ranked on a separate
//! examining subset, and growth stops once the best examining error stops
//! falling. Neuron weights are fitted either by least squares or by an
//! iterative projection rule that makes no assumption about the noise
//! distribution. The trained network reads as a short cascade of explicit
//! polynomials.
//!
//! Modules:
//! - [`data`]: datasets, CSV ingestion, min-max scaling, splitting
//! - [`signal`]: segmentation, band power, PCA
//! - [`neuron`], [`fit`], [`gmdh`]: transfer functions, weight fitting, growth
//! - [`model`]: prediction, model files, rule rendering
//! - [`baseline`]: a sigmoid feed-forward network for comparison
//! - [`synth`]: deterministic fixture generators

pub mod baseline;
pub mod data;
pub mod error;
pub mod fit;
pub mod gmdh;
pub mod hexfloat;
pub mod model;
pub mod neuron;
pub mod rng;
pub mod signal;
pub mod synth;

pub use baseline::{fnn_train, FnnModel, FnnTrainConfig};
pub use data::{load_csv, read_csv, read_table, split, CsvTable, DatasetSplit, FeatureScale, LabelColumn, LabeledDataset, Normalizer};
pub use error::{Error, Result};
pub use fit::{compute_cr, lsm_fit, projection_fit, DesignPair, FitConfig, FitStop, FitTrace, Fitter, RseForm};
pub use gmdh::{grow, GrowthConfig, GrowthMode, GrowthStop, GrowthTrace, LayerRecord, SelectionCriterion};
pub use model::{feature_report, model_kind, render_rules, LabelMap, Neuron, PolyNetwork, Preprocess};
pub use neuron::{InputRef, NeuronId, TransferKind, WeightVector};
pub use signal::{pca_fit, Band, BandSet, PcaModel, Recording};
pub use synth::{generate_poly_task, generate_recordings, NoiseKind, SynthSpec};
