//! Training and evaluation shared by the subcommands.

use polygmdh::baseline::RestartSummary;
use polygmdh::model::Binding;
use polygmdh::rng::derive_seed;
use polygmdh::{
    fnn_train, grow, model_kind, pca_fit, split, CsvTable, Error, FnnModel, FnnTrainConfig,
    GrowthConfig, GrowthTrace, LabelMap, LabeledDataset, Normalizer, PolyNetwork, Preprocess, Result,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Gmdh,
    Chain,
    Fnn,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Gmdh => "gmdh",
            Method::Chain => "chain",
            Method::Fnn => "fnn",
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainSettings {
    pub method: Method,
    /// Used by `gmdh` and `chain`; the mode is overridden by `method`.
    pub growth: GrowthConfig,
    pub fnn: FnnTrainConfig,
    /// Share of rows in the training subset A.
    pub split: f64,
    /// Cumulative variance threshold; `None` disables PCA.
    pub pca: Option<f64>,
    pub labels: LabelMap,
    pub seed: u64,
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self {
            method: Method::Gmdh,
            growth: GrowthConfig::default(),
            fnn: FnnTrainConfig::default(),
            split: 0.5,
            pca: None,
            labels: LabelMap::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrainedModel {
    Poly(PolyNetwork),
    Fnn(FnnModel),
}

impl TrainedModel {
    pub fn from_text(text: &str) -> Result<Self> {
        match model_kind(text)?.as_str() {
            "fnn" => FnnModel::from_text(text).map(Self::Fnn),
            _ => PolyNetwork::from_text(text).map(Self::Poly),
        }
    }

    pub fn to_text(&self) -> String {
        match self {
            Self::Poly(n) => n.to_text(),
            Self::Fnn(f) => f.to_text(),
        }
    }

    pub fn bind(&self, header: &[String]) -> Result<Binding> {
        match self {
            Self::Poly(n) => n.bind(header),
            Self::Fnn(f) => f.bind(header),
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        match self {
            Self::Poly(n) => n.predict(x),
            Self::Fnn(f) => f.predict(x),
        }
    }

    pub fn labels(&self) -> &LabelMap {
        match self {
            Self::Poly(n) => n.labels(),
            Self::Fnn(f) => &f.labels,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: TrainedModel,
    pub trace: Option<GrowthTrace>,
    pub restarts: Vec<RestartSummary>,
    /// Principal components kept, when PCA ran.
    pub components: Option<usize>,
    pub n_a: usize,
    pub n_b: usize,
}

impl TrainOutcome {
    /// Learning trace as CSV: the layer log for GMDH, one row per restart
    /// for the feed-forward network.
    pub fn trace_csv(&self) -> String {
        if let Some(t) = &self.trace {
            return t.log();
        }
        let mut out = String::from("restart,best_validation,final_validation,train_sse,epochs,failed\n");
        for r in &self.restarts {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.restart, r.best_validation, r.final_validation, r.train_sse, r.epochs, r.failed
            ));
        }
        out
    }
}

/// Fits scaling (and PCA) on the whole table, splits it into A and B, and
/// trains the requested model. The returned model reads raw table columns.
pub fn train(table: &CsvTable, settings: &TrainSettings) -> Result<TrainOutcome> {
    let labels = table
        .labels
        .clone()
        .ok_or_else(|| Error::MissingLabelColumn("label".into()))?;
    let raw = LabeledDataset::new(table.features.clone(), labels.clone(), table.names.clone())?;
    let norm = Normalizer::fit(&raw)?;
    let x = norm.transform_retained(raw.features())?;

    let (scales, preprocess, x) = match settings.pca {
        None => (norm.scales().to_vec(), None, x),
        Some(threshold) => {
            let pca = pca_fit(&x, threshold)?;
            let scores = pca.transform(&x)?;
            let second = Normalizer::fit_matrix(&scores, &pca.component_names())?;
            let z = second.transform_retained(&scores)?;
            let pre = Preprocess {
                inputs: norm.scales().to_vec(),
                pca,
            };
            (second.scales().to_vec(), Some(pre), z)
        }
    };
    let components = preprocess.as_ref().map(|p| p.pca.q());
    let names: Vec<String> = scales.iter().map(|s| s.name.clone()).collect();
    let data = LabeledDataset::new(x, labels, names)?;
    let parts = split(&data, settings.split, derive_seed(settings.seed, &[0x5B1]), true)?;
    let (a, b) = (data.subset(&parts.a), data.subset(&parts.b));
    log::info!("training on {} rows, examining on {}", a.n(), b.n());

    let (model, trace, restarts) = match settings.method {
        Method::Gmdh | Method::Chain => {
            let mut cfg = settings.growth.clone();
            if settings.method == Method::Chain {
                cfg.mode = polygmdh::GrowthMode::Chain;
                cfg.width = 1;
            } else {
                cfg.mode = polygmdh::GrowthMode::Full;
            }
            cfg.seed = settings.seed;
            let (net, trace) = grow(&a, &b, &cfg)?;
            log::info!("grew {} layers ({:?})", trace.kept, trace.stop);
            let net = net
                .with_input_scales(&scales, preprocess)?
                .with_labels(settings.labels.clone());
            (TrainedModel::Poly(net), Some(trace), Vec::new())
        }
        Method::Fnn => {
            let cfg = FnnTrainConfig {
                seed: settings.seed,
                ..settings.fnn.clone()
            };
            let (fnn, summaries) = fnn_train(&a, &b, &cfg)?;
            let fnn = fnn
                .with_input_scales(&scales, preprocess)?
                .with_labels(settings.labels.clone());
            (TrainedModel::Fnn(fnn), None, summaries)
        }
    };
    Ok(TrainOutcome {
        model,
        trace,
        restarts,
        components,
        n_a: parts.n_a(),
        n_b: parts.n_b(),
    })
}

/// Scores and classes for every row of a table.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub scores: Vec<f64>,
    pub classes: Vec<u8>,
    /// Misclassified rows, when the table is labeled.
    pub errors: Option<usize>,
}

impl Evaluation {
    pub fn accuracy(&self) -> Option<f64> {
        self.errors
            .map(|e| 1.0 - e as f64 / self.scores.len().max(1) as f64)
    }
}

pub fn evaluate(model: &TrainedModel, table: &CsvTable, threshold: f64) -> Result<Evaluation> {
    let binding = model.bind(&table.names)?;
    let mut scores = Vec::with_capacity(table.features.nrows());
    let mut classes = Vec::with_capacity(table.features.nrows());
    for row in table.features.row_iter() {
        let row: Vec<f64> = row.iter().copied().collect();
        let y = model.predict(&binding.gather(&row))?;
        scores.push(y);
        classes.push(u8::from(y >= threshold));
    }
    let errors = table
        .labels
        .as_ref()
        .map(|l| l.iter().zip(&classes).filter(|(a, b)| a != b).count());
    Ok(Evaluation {
        scores,
        classes,
        errors,
    })
}
