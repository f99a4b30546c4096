//! Fully connected reference network: one sigmoid hidden layer, one sigmoid
//! output, trained on the sum of squared errors by damped Gauss-Newton
//! (Levenberg-Marquardt) with restarts and early stopping.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::data::{FeatureScale, LabeledDataset};
use crate::error::{Error, Result};
use crate::model::{bind_inputs, format, required_inputs, Binding, Document, LabelMap, Preprocess};
use crate::rng::rng_for;

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Weights of an `m`-input, `h`-hidden network. Row `j` of `hidden` is
/// `(bias, w_1..w_m)`; `output` is `(bias, v_1..v_h)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FnnWeights {
    pub hidden: DMatrix<f64>,
    pub output: DVector<f64>,
}

impl FnnWeights {
    pub fn zeros(m: usize, h: usize) -> Self {
        Self {
            hidden: DMatrix::zeros(h, m + 1),
            output: DVector::zeros(h + 1),
        }
    }

    pub fn m(&self) -> usize {
        self.hidden.ncols() - 1
    }

    pub fn h(&self) -> usize {
        self.hidden.nrows()
    }

    pub fn param_count(&self) -> usize {
        self.h() * (self.m() + 1) + self.h() + 1
    }

    /// Hidden rows first (row-major), then the output unit.
    pub fn to_params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.param_count());
        for j in 0..self.h() {
            p.extend(self.hidden.row(j).iter());
        }
        p.extend(self.output.iter());
        p
    }

    pub fn from_params(m: usize, h: usize, p: &[f64]) -> Self {
        let hidden = DMatrix::from_row_slice(h, m + 1, &p[..h * (m + 1)]);
        let output = DVector::from_column_slice(&p[h * (m + 1)..]);
        Self { hidden, output }
    }

    /// Output and hidden activations for one normalized input row.
    fn forward(&self, x: &[f64], acts: &mut [f64]) -> f64 {
        let m = self.m();
        let mut z = self.output[0];
        for (j, a) in acts.iter_mut().enumerate() {
            let mut s = self.hidden[(j, 0)];
            for i in 0..m {
                s += self.hidden[(j, i + 1)] * x[i];
            }
            *a = sigmoid(s);
            z += self.output[j + 1] * *a;
        }
        sigmoid(z)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut acts = vec![0.0; self.h()];
        self.forward(x, &mut acts)
    }

    /// Derivatives of the output with respect to every parameter.
    fn jacobian_row(&self, x: &[f64], row: &mut [f64]) -> f64 {
        let (m, h) = (self.m(), self.h());
        let mut acts = vec![0.0; h];
        let y = self.forward(x, &mut acts);
        let dy = y * (1.0 - y);
        let out_base = h * (m + 1);
        row[out_base] = dy;
        for j in 0..h {
            row[out_base + 1 + j] = dy * acts[j];
            let dz = dy * self.output[j + 1] * acts[j] * (1.0 - acts[j]);
            row[j * (m + 1)] = dz;
            for i in 0..m {
                row[j * (m + 1) + 1 + i] = dz * x[i];
            }
        }
        y
    }

    pub fn sse(&self, x: &DMatrix<f64>, y: &[f64]) -> f64 {
        let mut acts = vec![0.0; self.h()];
        let mut row = vec![0.0; self.m()];
        (0..x.nrows())
            .map(|k| {
                row.iter_mut().zip(x.row(k).iter()).for_each(|(r, v)| *r = *v);
                let e = self.forward(&row, &mut acts) - y[k];
                e * e
            })
            .sum()
    }

    /// Analytic gradient of the SSE over `(x, y)`.
    pub fn sse_gradient(&self, x: &DMatrix<f64>, y: &[f64]) -> Vec<f64> {
        let (jac, r) = self.jacobian(x, y);
        (jac.tr_mul(&r) * 2.0).iter().copied().collect()
    }

    fn jacobian(&self, x: &DMatrix<f64>, y: &[f64]) -> (DMatrix<f64>, DVector<f64>) {
        let p = self.param_count();
        let n = x.nrows();
        let mut jac = DMatrix::zeros(n, p);
        let mut r = DVector::zeros(n);
        let mut buf = vec![0.0; p];
        let mut row = vec![0.0; self.m()];
        for k in 0..n {
            row.iter_mut().zip(x.row(k).iter()).for_each(|(a, v)| *a = *v);
            let out = self.jacobian_row(&row, &mut buf);
            r[k] = out - y[k];
            for (c, v) in buf.iter().enumerate() {
                jac[(k, c)] = *v;
            }
        }
        (jac, r)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FnnTrainConfig {
    pub hidden: usize,
    pub restarts: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    /// Initial damping; multiplied by `damping_factor` on a rejected step
    /// and divided by it on an accepted one.
    pub damping: f64,
    pub damping_factor: f64,
    pub max_damping: f64,
    /// Standard deviation of the Gaussian initial weights.
    pub init_scale: f64,
    pub seed: u64,
}

impl Default for FnnTrainConfig {
    fn default() -> Self {
        Self {
            hidden: 2,
            restarts: 100,
            max_epochs: 500,
            patience: 10,
            damping: 1e-3,
            damping_factor: 10.0,
            max_damping: 1e10,
            init_scale: 1.0,
            seed: 0,
        }
    }
}

impl FnnTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.restarts == 0 || self.patience == 0 || self.max_epochs == 0 {
            return Err(Error::InvalidArgument(
                "hidden, restarts, patience and max_epochs must all be at least 1".into(),
            ));
        }
        if !(self.damping > 0.0 && self.damping_factor > 1.0) {
            return Err(Error::InvalidArgument("damping must be positive with factor > 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RestartSummary {
    pub restart: usize,
    /// Best validation SSE seen (the snapshot that is kept).
    pub best_validation: f64,
    /// Validation SSE at the last epoch run.
    pub final_validation: f64,
    pub train_sse: f64,
    pub epochs: usize,
    pub failed: bool,
    /// Training SSE after every accepted step, starting from the init.
    pub train_curve: Vec<f64>,
}

/// Trained baseline, including the input scaling used at training time.
#[derive(Debug, Clone, PartialEq)]
pub struct FnnModel {
    pub inputs: Vec<FeatureScale>,
    pub preprocess: Option<Preprocess>,
    pub weights: FnnWeights,
    pub labels: LabelMap,
}

impl FnnModel {
    /// Replaces the identity input scaling with the training-time scales;
    /// column `k` becomes `scales[k]`.
    pub fn with_input_scales(mut self, scales: &[FeatureScale], preprocess: Option<Preprocess>) -> Result<Self> {
        if scales.len() != self.inputs.len() {
            return Err(Error::Dimension {
                expected: self.inputs.len(),
                found: scales.len(),
            });
        }
        self.inputs = scales.to_vec();
        self.preprocess = preprocess;
        Ok(self)
    }

    pub fn with_labels(mut self, labels: LabelMap) -> Self {
        self.labels = labels;
        self
    }

    pub fn required_inputs(&self) -> &[FeatureScale] {
        required_inputs(self.preprocess.as_ref(), &self.inputs)
    }

    pub fn bind(&self, header: &[String]) -> Result<Binding> {
        bind_inputs(self.required_inputs(), header)
    }

    /// Output in (0, 1) for a raw input row.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        let staged;
        let z = match &self.preprocess {
            Some(p) => {
                staged = p.apply(x)?;
                &staged[..]
            }
            None => x,
        };
        let scaled = self
            .inputs
            .iter()
            .map(|s| match z.get(s.index) {
                Some(v) if v.is_finite() => Ok(s.normalize(*v)),
                _ => Err(Error::MissingFeature(s.name.clone())),
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(self.weights.eval(&scaled))
    }

    pub fn classify(&self, x: &[f64], threshold: f64) -> Result<u8> {
        Ok(u8::from(self.predict(x)? >= threshold))
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        format::write_preamble(&mut out, "fnn", &self.labels, self.preprocess.as_ref());
        out.push_str(&format!("features {}\n", self.inputs.len()));
        for s in &self.inputs {
            format::write_scale(&mut out, "feature", s);
        }
        out.push_str(&format!("hidden {}\n", self.weights.h()));
        for j in 0..self.weights.h() {
            let row: Vec<f64> = self.weights.hidden.row(j).iter().copied().collect();
            format::write_hex_row(&mut out, &format!("hidden-unit {}", j + 1), &row);
        }
        format::write_hex_row(&mut out, "output-unit", self.weights.output.as_slice());
        out.push_str("end\n");
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut doc = Document::parse(text)?;
        if doc.kind != "fnn" {
            return Err(Error::Parse {
                line: 2,
                message: format!("expected an fnn model, found kind {:?}", doc.kind),
            });
        }
        let preprocess = doc.preprocess()?;
        let inputs = doc.scales("features", "feature")?;
        let m = inputs.len();
        let l = doc.expect("hidden")?;
        let h = l.count(&l.arity(1)?[0])?;
        if h == 0 {
            return Err(l.error("hidden layer must have at least one unit"));
        }
        let mut weights = FnnWeights::zeros(m, h);
        for j in 0..h {
            let l = doc.expect("hidden-unit")?;
            if l.args().len() != m + 2 || l.count(&l.args()[0])? != j + 1 {
                return Err(l.error(format!("expected hidden-unit {} with {} weights", j + 1, m + 1)));
            }
            for (i, v) in l.floats(&l.args()[1..])?.into_iter().enumerate() {
                weights.hidden[(j, i)] = v;
            }
        }
        weights.output = DVector::from_vec(doc.row("output-unit", h + 1)?);
        doc.finish()?;
        Ok(Self {
            inputs,
            preprocess,
            weights,
            labels: doc.labels,
        })
    }
}

/// Trains `cfg.restarts` networks from independent seeded starts and keeps
/// the one with the lowest validation SSE. Inputs must be normalized.
pub fn fnn_train(train: &LabeledDataset, validation: &LabeledDataset, cfg: &FnnTrainConfig) -> Result<(FnnModel, Vec<RestartSummary>)> {
    cfg.validate()?;
    if train.n() == 0 || validation.n() == 0 {
        return Err(Error::InvalidArgument("training and validation sets must be non-empty".into()));
    }
    if train.m() != validation.m() {
        return Err(Error::Dimension {
            expected: train.m(),
            found: validation.m(),
        });
    }
    let (x_t, y_t) = (train.features(), train.targets());
    let (x_v, y_v) = (validation.features(), validation.targets());
    let results: Vec<(FnnWeights, RestartSummary)> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| train_restart(x_t, &y_t, x_v, &y_v, cfg, r))
        .collect();

    let best = results
        .iter()
        .enumerate()
        .filter(|(_, (_, s))| !s.failed)
        .min_by(|a, b| a.1 .1.best_validation.total_cmp(&b.1 .1.best_validation).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i)
        .ok_or(Error::AllRestartsFailed(cfg.restarts))?;
    let weights = results[best].0.clone();
    let inputs = train
        .feature_names()
        .iter()
        .enumerate()
        .map(|(i, name)| FeatureScale {
            index: i,
            name: name.clone(),
            min: 0.0,
            max: 1.0,
        })
        .collect();
    let summaries = results.into_iter().map(|(_, s)| s).collect();
    Ok((
        FnnModel {
            inputs,
            preprocess: None,
            weights,
            labels: LabelMap::default(),
        },
        summaries,
    ))
}

/// `J'J` or, with fewer rows than parameters, `JJ'`.
fn gram_matrix(jac: &DMatrix<f64>) -> DMatrix<f64> {
    if jac.nrows() < jac.ncols() {
        jac * jac.transpose()
    } else {
        jac.tr_mul(jac)
    }
}

/// Levenberg-Marquardt step `-(J'J + uI)^-1 J'r`, solved through the
/// identity `J'(JJ' + uI)^-1 r` when `gram` is the row-space form.
fn damped_step(jac: &DMatrix<f64>, gram: &DMatrix<f64>, r: &DVector<f64>, damping: f64) -> Option<DVector<f64>> {
    let k = gram.nrows();
    let chol = (gram + DMatrix::identity(k, k) * damping).cholesky()?;
    if k < jac.ncols() {
        Some(-jac.tr_mul(&chol.solve(r)))
    } else {
        Some(-chol.solve(&jac.tr_mul(r)))
    }
}

fn train_restart(
    x_t: &DMatrix<f64>,
    y_t: &[f64],
    x_v: &DMatrix<f64>,
    y_v: &[f64],
    cfg: &FnnTrainConfig,
    restart: usize,
) -> (FnnWeights, RestartSummary) {
    let (m, h) = (x_t.ncols(), cfg.hidden);
    let mut rng = rng_for(cfg.seed, &[0xFA, restart as u64]);
    let init: Vec<f64> = (0..h * (m + 1) + h + 1)
        .map(|_| cfg.init_scale * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let mut net = FnnWeights::from_params(m, h, &init);
    let mut sse = net.sse(x_t, y_t);
    let mut val = net.sse(x_v, y_v);
    let mut summary = RestartSummary {
        restart,
        best_validation: val,
        final_validation: val,
        train_sse: sse,
        epochs: 0,
        failed: !(sse.is_finite() && val.is_finite()),
        train_curve: vec![sse],
    };
    if summary.failed {
        return (net, summary);
    }
    let mut best = net.clone();
    let mut since_best = 0;
    let mut damping = cfg.damping;

    for epoch in 1..=cfg.max_epochs {
        summary.epochs = epoch;
        let (jac, r) = net.jacobian(x_t, y_t);
        let grad = jac.tr_mul(&r);
        let gram = gram_matrix(&jac);
        let params = DVector::from_vec(net.to_params());
        let mut accepted = None;
        while damping <= cfg.max_damping {
            let step = damped_step(&jac, &gram, &r, damping);
            if let Some(step) = step {
                let cand = FnnWeights::from_params(m, h, (&params + step).as_slice());
                let cand_sse = cand.sse(x_t, y_t);
                if cand_sse.is_finite() && cand_sse < sse {
                    accepted = Some((cand, cand_sse));
                    damping = (damping / cfg.damping_factor).max(1e-15);
                    break;
                }
            }
            damping *= cfg.damping_factor;
        }
        if accepted.is_none() {
            // Damped system unusable: backtracking gradient step.
            damping = cfg.damping;
            let gnorm = grad.norm();
            if gnorm > 0.0 {
                let mut t = 1.0 / gnorm;
                for _ in 0..40 {
                    let cand = FnnWeights::from_params(m, h, (&params - &grad * t).as_slice());
                    let cand_sse = cand.sse(x_t, y_t);
                    if cand_sse.is_finite() && cand_sse < sse {
                        accepted = Some((cand, cand_sse));
                        break;
                    }
                    t *= 0.5;
                }
            }
        }
        let Some((cand, cand_sse)) = accepted else {
            break; // no descent direction left
        };
        net = cand;
        sse = cand_sse;
        summary.train_curve.push(sse);
        val = net.sse(x_v, y_v);
        if !val.is_finite() {
            summary.failed = true;
            break;
        }
        if val < summary.best_validation {
            summary.best_validation = val;
            best = net.clone();
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
    }
    summary.final_validation = val;
    summary.train_sse = sse;
    (best, summary)
}
