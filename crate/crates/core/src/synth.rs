//! Seeded fixture generators: EEG-like two-class recordings with
//! class-dependent band profiles, polynomial cascade tasks with a known
//! truth network, and single-neuron regression tasks.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::data::{FeatureScale, LabeledDataset};
use crate::error::{Error, Result};
use crate::fit::DesignPair;
use crate::model::{LabelMap, Neuron, PolyNetwork};
use crate::neuron::{transfer, InputRef, NeuronId, TransferKind, WeightVector};
use crate::rng::rng_for;
use crate::signal::{extract_features, BandSet, Recording, SpectralConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseKind {
    #[default]
    None,
    /// Additive white noise with standard deviation `scale`.
    Gaussian,
    /// Multiplicative gain `exp(scale * z)` per recording and channel.
    LogNormal,
}

impl NoiseKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Some(Self::None),
            "gaussian" => Some(Self::Gaussian),
            "lognormal" => Some(Self::LogNormal),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub channels: usize,
    pub rate: f64,
    /// Seconds per recording.
    pub duration: f64,
    pub bands: BandSet,
    /// Sinusoid amplitude per band, one profile per class.
    pub profiles: [Vec<f64>; 2],
    pub noise: NoiseKind,
    pub noise_scale: f64,
    /// Log-scale spread of per-recording amplitudes; larger values blur
    /// the class profiles into each other.
    pub overlap: f64,
    pub recordings_per_class: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    /// Nineteen channels at 128 Hz; class 0 alpha-dominant, class 1
    /// delta/theta-dominant.
    fn default() -> Self {
        Self {
            channels: 19,
            rate: 128.0,
            duration: 8.0,
            bands: BandSet::alzheimer4(),
            profiles: [vec![1.0, 1.0, 3.0, 1.0], vec![3.0, 2.0, 1.0, 1.0]],
            noise: NoiseKind::None,
            noise_scale: 0.0,
            overlap: 0.3,
            recordings_per_class: 10,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(msg.into()));
        if self.channels == 0 || self.recordings_per_class == 0 {
            return bad("channels and recordings per class must be positive");
        }
        if !(self.rate > 0.0 && self.duration > 0.0) || !(self.rate * self.duration >= 1.0) {
            return bad("rate and duration must be positive");
        }
        self.bands.validate(self.rate)?;
        for p in &self.profiles {
            if p.len() != self.bands.bands().len() {
                return Err(Error::Dimension {
                    expected: self.bands.bands().len(),
                    found: p.len(),
                });
            }
            if p.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
                return bad("amplitudes must be finite and non-negative");
            }
        }
        if !(self.noise_scale.is_finite() && self.noise_scale >= 0.0 && self.overlap.is_finite() && self.overlap >= 0.0) {
            return bad("noise scale and overlap must be finite and non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledRecording {
    pub recording: Recording,
    pub label: u8,
}

/// Class 0 recordings first, then class 1; each recording draws from its
/// own derived stream so the output does not depend on thread count.
pub fn generate_recordings(spec: &SynthSpec) -> Result<Vec<LabeledRecording>> {
    spec.validate()?;
    let total = 2 * spec.recordings_per_class;
    (0..total)
        .into_par_iter()
        .map(|k| {
            let label = u8::from(k >= spec.recordings_per_class);
            let mut rng = rng_for(spec.seed, &[0x5E6, k as u64]);
            let recording = synth_recording(spec, &spec.profiles[label as usize], &mut rng)?;
            Ok(LabeledRecording { recording, label })
        })
        .collect()
}

fn synth_recording(spec: &SynthSpec, profile: &[f64], rng: &mut ChaCha8Rng) -> Result<Recording> {
    let n = (spec.rate * spec.duration).round() as usize;
    let nyquist = spec.rate / 2.0;
    let mut channels = Vec::with_capacity(spec.channels);
    for _ in 0..spec.channels {
        let mut x = vec![0.0; n];
        for (band, &amp) in spec.bands.bands().iter().zip(profile) {
            let hi = band.hi.min(nyquist);
            let width = hi - band.lo;
            let f = band.lo + width * (0.25 + 0.5 * rng.random::<f64>());
            let phase = 2.0 * PI * rng.random::<f64>();
            let a = amp * (spec.overlap * rng.sample::<f64, _>(StandardNormal)).exp();
            for (t, v) in x.iter_mut().enumerate() {
                *v += a * (2.0 * PI * f * t as f64 / spec.rate + phase).sin();
            }
        }
        match spec.noise {
            NoiseKind::None => {}
            NoiseKind::Gaussian => {
                for v in x.iter_mut() {
                    *v += spec.noise_scale * rng.sample::<f64, _>(StandardNormal);
                }
            }
            NoiseKind::LogNormal => {
                let gain = (spec.noise_scale * rng.sample::<f64, _>(StandardNormal)).exp();
                x.iter_mut().for_each(|v| *v *= gain);
            }
        }
        channels.push(x);
    }
    let names = (1..=spec.channels).map(|c| format!("ch{c}")).collect();
    Recording::new(channels, names, spec.rate)
}

/// Band-power rows for every segment of every recording, labeled with the
/// recording's class.
pub fn recordings_dataset(
    recordings: &[LabeledRecording],
    bands: &BandSet,
    window: f64,
    hop: f64,
    cfg: &SpectralConfig,
) -> Result<LabeledDataset> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels = Vec::new();
    let mut names = Vec::new();
    for r in recordings {
        let table = extract_features(&r.recording, bands, window, hop, cfg)?;
        for i in 0..table.rows.nrows() {
            rows.push(table.rows.row(i).iter().copied().collect());
            labels.push(r.label);
        }
        names = table.names;
    }
    let m = names.len();
    let x = DMatrix::from_fn(rows.len(), m, |i, j| rows[i][j]);
    LabeledDataset::new(x, labels, names)
}

/// Writes `rec_NNNN.csv` per recording and an `index.csv` of file names
/// and labels.
pub fn write_recordings(dir: &Path, recordings: &[LabeledRecording]) -> Result<()> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| Error::Io { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let mut index = String::from("file,label\n");
    for (k, r) in recordings.iter().enumerate() {
        let name = format!("rec_{:04}.csv", k + 1);
        let path = dir.join(&name);
        let file = std::fs::File::create(&path).map_err(io(&path))?;
        r.recording.write_csv(std::io::BufWriter::new(file))?;
        index.push_str(&format!("{name},{}\n", r.label));
    }
    let path = dir.join("index.csv");
    std::fs::write(&path, index).map_err(io(&path))
}

/// Polynomial classification task with its generating network.
#[derive(Debug, Clone)]
pub struct PolyTask {
    pub data: LabeledDataset,
    /// Chain cascade over raw features whose output spans [0, 1] on the
    /// generated sample.
    pub truth: PolyNetwork,
    /// Median of the truth output; labels are `truth >= threshold`.
    pub threshold: f64,
    /// Standard deviation of Gaussian noise added to the truth output
    /// before thresholding.
    pub noise: f64,
}

impl PolyTask {
    /// Fresh rows from the same truth network and threshold.
    pub fn sample(&self, n: usize, seed: u64) -> Result<LabeledDataset> {
        let m = self.data.m();
        let mut rng = rng_for(seed, &[0x9A5]);
        let x = DMatrix::from_fn(n, m, |_, _| rng.sample::<f64, _>(StandardNormal));
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let row: Vec<f64> = x.row(i).iter().copied().collect();
            let y = self.truth.predict(&row)? + self.noise * rng.sample::<f64, _>(StandardNormal);
            labels.push(u8::from(y >= self.threshold));
        }
        LabeledDataset::new(x, labels, self.data.feature_names().to_vec())
    }
}

const MAX_DRAWS: usize = 100;
/// Bound on the cross-term coefficient of each truth neuron.
const CROSS: f64 = 0.1;

/// Draws a random chain cascade of `depth` bilinear neurons over
/// `depth + 1` distinct features out of `m`, evaluates it on `n` rows of
/// standard Gaussian inputs, and labels rows at the median of the
/// (optionally noisy) output. Hidden neurons are rescaled to zero mean and
/// unit variance on the sample so every chosen feature carries weight; the
/// last neuron is min-max scaled onto [0, 1].
pub fn generate_poly_task(depth: usize, m: usize, n: usize, noise: f64, seed: u64) -> Result<PolyTask> {
    if depth == 0 || m < depth + 1 {
        return Err(Error::InvalidArgument(format!(
            "a depth-{depth} task needs at least {} features, got {m}",
            depth + 1
        )));
    }
    if n < 4 || !(noise.is_finite() && noise >= 0.0) {
        return Err(Error::InvalidArgument("need at least 4 rows and a non-negative noise level".into()));
    }
    let mut rng = rng_for(seed, &[0x7A5C]);
    let x = DMatrix::from_fn(n, m, |_, _| rng.sample::<f64, _>(StandardNormal));
    let names: Vec<String> = (1..=m).map(|j| format!("x{j}")).collect();
    for _ in 0..MAX_DRAWS {
        if let Some(task) = draw_cascade(&x, &names, depth, noise, &mut rng)? {
            return Ok(task);
        }
    }
    Err(Error::DegenerateTask(MAX_DRAWS))
}

fn draw_cascade(x: &DMatrix<f64>, names: &[String], depth: usize, noise: f64, rng: &mut ChaCha8Rng) -> Result<Option<PolyTask>> {
    let (n, m) = (x.nrows(), x.ncols());
    let mut pool: Vec<usize> = (0..m).collect();
    let mut picked = Vec::with_capacity(depth + 1);
    for _ in 0..=depth {
        picked.push(pool.swap_remove(rng.random_range(0..pool.len())));
    }
    let col = |j: usize| -> Vec<f64> { x.column(j).iter().copied().collect() };
    let mut neurons = Vec::with_capacity(depth);
    let mut prev = col(picked[0]);
    let mut prev_ref = InputRef::Feature(picked[0]);
    for layer in 1..=depth {
        let j = picked[layer];
        let other = col(j);
        let sign = |rng: &mut ChaCha8Rng| if rng.random::<bool>() { 1.0 } else { -1.0 };
        let mut w = vec![
            rng.random_range(-0.5..0.5),
            sign(rng) * rng.random_range(0.5..1.5),
            sign(rng) * rng.random_range(0.5..1.5),
            rng.random_range(-CROSS..=CROSS),
        ];
        let out: Vec<f64> = prev.iter().zip(&other).map(|(a, b)| transfer(&w, *a, *b)).collect();
        let (shift, scale) = if layer == depth {
            let (lo, hi) = out.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(*v), h.max(*v)));
            (lo, hi - lo)
        } else {
            let mean = out.iter().sum::<f64>() / n as f64;
            let var = out.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
            (mean, var.sqrt())
        };
        if !(scale > 1e-6) || !scale.is_finite() || !shift.is_finite() {
            return Ok(None);
        }
        w[0] = (w[0] - shift) / scale;
        w[1..].iter_mut().for_each(|v| *v /= scale);
        prev = prev.iter().zip(&other).map(|(a, b)| transfer(&w, *a, *b)).collect();
        let id = NeuronId::new(layer, 1);
        neurons.push(Neuron {
            id,
            kind: TransferKind::Bilinear,
            inputs: [prev_ref, InputRef::Feature(j)],
            weights: WeightVector(w),
        });
        prev_ref = InputRef::Neuron(id);
    }
    let mut noisy: Vec<f64> = prev.iter().map(|v| v + noise * rng.sample::<f64, _>(StandardNormal)).collect();
    let latent = noisy.clone();
    noisy.sort_by(f64::total_cmp);
    let threshold = noisy[n / 2];
    if noisy[0] == noisy[n - 1] {
        return Ok(None);
    }
    let labels: Vec<u8> = latent.iter().map(|v| u8::from(*v >= threshold)).collect();
    let mut used = picked.clone();
    used.sort_unstable();
    let features = used
        .iter()
        .map(|&j| FeatureScale {
            index: j,
            name: names[j].clone(),
            min: 0.0,
            max: 1.0,
        })
        .collect();
    let truth = PolyNetwork::new(features, None, neurons, NeuronId::new(depth, 1), LabelMap::default())?;
    let data = LabeledDataset::new(x.clone(), labels, names.to_vec())?;
    Ok(Some(PolyTask {
        data,
        truth,
        threshold,
        noise,
    }))
}

/// Single-neuron regression task: standardized Gaussian inputs, targets
/// from a neuron with weights uniform on [-1, 1], plus optional Gaussian
/// noise.
#[derive(Debug, Clone)]
pub struct NeuronTask {
    pub design: DesignPair,
    pub weights: WeightVector,
}

pub fn generate_neuron_task(kind: TransferKind, n_a: usize, n_b: usize, noise: f64, seed: u64) -> Result<NeuronTask> {
    let mut rng = rng_for(seed, &[0xE0]);
    let weights = WeightVector((0..kind.arity()).map(|_| rng.random_range(-1.0..1.0)).collect());
    let mut side = |n: usize| {
        let u1: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let u2: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let y: Vec<f64> = u1
            .iter()
            .zip(&u2)
            .map(|(a, b)| {
                let clean = match kind {
                    TransferKind::Bilinear => transfer(&weights.0, *a, *b),
                    TransferKind::Linear => weights.0[0] + weights.0[1] * a + weights.0[2] * b,
                };
                clean + noise * rng.sample::<f64, _>(StandardNormal)
            })
            .collect();
        (u1, u2, y)
    };
    let (a1, a2, ya) = side(n_a);
    let (b1, b2, yb) = side(n_b);
    let design = DesignPair::from_inputs(kind, (&a1, &a2), &ya, (&b1, &b2), &yb)?;
    Ok(NeuronTask { design, weights })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(noise: NoiseKind, scale: f64) -> SynthSpec {
        SynthSpec {
            channels: 1,
            duration: 2.0,
            noise,
            noise_scale: scale,
            overlap: 0.0,
            recordings_per_class: 20,
            ..Default::default()
        }
    }

    fn skewness(v: &[f64]) -> f64 {
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let m2 = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let m3 = v.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / n;
        m3 / m2.powf(1.5)
    }

    #[test]
    fn noiseless_classes_separate_on_one_feature() {
        let spec = small(NoiseKind::None, 0.0);
        let recs = generate_recordings(&spec).unwrap();
        let d = recordings_dataset(&recs, &spec.bands, 2.0, 2.0, &SpectralConfig::default()).unwrap();
        let separable = (0..d.m()).any(|j| {
            let col: Vec<f64> = d.features().column(j).iter().copied().collect();
            col.iter().any(|&t| {
                let hits = |flip: bool| (0..d.n()).all(|i| (col[i] >= t) ^ flip == (d.labels()[i] == 1));
                hits(false) || hits(true)
            })
        });
        assert!(separable);
    }

    #[test]
    fn lognormal_noise_skews_band_power() {
        let mut spec = small(NoiseKind::LogNormal, 0.5);
        spec.recordings_per_class = 500;
        spec.duration = 1.0;
        let recs = generate_recordings(&spec).unwrap();
        let d = recordings_dataset(&recs, &spec.bands, 1.0, 1.0, &SpectralConfig::default()).unwrap();
        assert_eq!(d.n(), 1000);
        let alpha: Vec<f64> = d.features().column(2).iter().copied().collect();
        assert!(skewness(&alpha) > 0.5, "{}", skewness(&alpha));
    }

    #[test]
    fn zero_profiles_give_silence() {
        let mut spec = small(NoiseKind::None, 0.0);
        spec.profiles = [vec![0.0; 4], vec![0.0; 4]];
        for r in generate_recordings(&spec).unwrap() {
            assert!(r.recording.channels().iter().flatten().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn recordings_are_deterministic() {
        let spec = SynthSpec {
            noise: NoiseKind::Gaussian,
            noise_scale: 0.5,
            recordings_per_class: 2,
            ..Default::default()
        };
        assert_eq!(generate_recordings(&spec).unwrap(), generate_recordings(&spec).unwrap());
        let other = SynthSpec { seed: 1, ..spec.clone() };
        assert_ne!(generate_recordings(&spec).unwrap(), generate_recordings(&other).unwrap());
    }

    #[test]
    fn rejects_bad_specs() {
        let mut spec = SynthSpec::default();
        spec.profiles[0].pop();
        assert!(generate_recordings(&spec).is_err());
        let spec = SynthSpec { rate: 0.0, ..Default::default() };
        assert!(generate_recordings(&spec).is_err());
        let mut spec = SynthSpec::default();
        spec.profiles[1][0] = -1.0;
        assert!(generate_recordings(&spec).is_err());
    }

    #[test]
    fn poly_task_labels_are_balanced() {
        for seed in 0..10 {
            for n in [51, 200] {
                let t = generate_poly_task(2, 5, n, 0.0, seed).unwrap();
                let pos = t.data.positives() as isize;
                assert!((pos - (n as isize - pos)).abs() <= 1, "{pos} of {n}");
                assert_eq!(t.truth.depth(), 2);
            }
        }
    }

    #[test]
    fn poly_truth_reproduces_labels() {
        let t = generate_poly_task(3, 6, 300, 0.0, 4).unwrap();
        for i in 0..t.data.n() {
            assert_eq!(t.truth.classify(&t.data.row(i), t.threshold).unwrap(), t.data.labels()[i]);
        }
        let again = generate_poly_task(3, 6, 300, 0.0, 4).unwrap();
        assert_eq!(again.data, t.data);
        let fresh = t.sample(100, 9).unwrap();
        assert_eq!(fresh.m(), 6);
    }

    #[test]
    fn depth_one_task_is_learned_by_one_layer() {
        use crate::data::split;
        use crate::fit::Fitter;
        use crate::gmdh::{grow, GrowthConfig};
        let t = generate_poly_task(1, 5, 20_000, 0.0, 0).unwrap();
        let parts = split(&t.data, 0.5, 1, true).unwrap();
        let cfg = GrowthConfig {
            max_layers: 1,
            fitter: Fitter::Lsm,
            ..GrowthConfig::chain()
        };
        let (net, _) = grow(&t.data.subset(&parts.a), &t.data.subset(&parts.b), &cfg).unwrap();
        assert_eq!(net.depth(), 1);
        let held_out = t.sample(20_000, 1).unwrap();
        let hits = (0..held_out.n())
            .filter(|&i| net.classify(&held_out.row(i), 0.5).unwrap() == held_out.labels()[i])
            .count();
        let accuracy = hits as f64 / held_out.n() as f64;
        assert!(accuracy >= 0.99, "accuracy {accuracy}");
    }

    #[test]
    fn poly_task_arguments() {
        assert!(generate_poly_task(0, 3, 10, 0.0, 0).is_err());
        assert!(generate_poly_task(3, 3, 10, 0.0, 0).is_err());
        assert!(generate_poly_task(1, 2, 10, -1.0, 0).is_err());
    }

    #[test]
    fn neuron_task_is_realizable() {
        let t = generate_neuron_task(TransferKind::Bilinear, 30, 20, 0.0, 3).unwrap();
        assert_eq!(t.design.u_a.ncols(), 30);
        let r = t.design.u_b.tr_mul(&nalgebra::DVector::from_column_slice(&t.weights.0)) - &t.design.y_b;
        assert!(r.amax() < 1e-12);
    }
}
