use nalgebra::DMatrix;
use polygmdh::gmdh::{grow, grow_data, GrowthConfig, GrowthData, GrowthStop};
use polygmdh::neuron::transfer;
use polygmdh::synth::generate_poly_task;
use polygmdh::{split, Fitter, LabeledDataset};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const G1: [f64; 4] = [0.2, 0.9, -0.7, 0.5];
const G2: [f64; 4] = [-0.1, 1.2, 0.5, -0.4];

fn cascade(x: &[f64]) -> f64 {
    transfer(&G2, transfer(&G1, x[0], x[1]), x[2])
}

fn targets(x: &DMatrix<f64>) -> Vec<f64> {
    (0..x.nrows()).map(|i| cascade(&[x[(i, 0)], x[(i, 1)], x[(i, 2)]])).collect()
}

/// Every (x1, x2, x4) draw appears once with x3 = 0.35 and once with
/// x3 = 0.65, so x3 is exactly balanced against any function of the others.
fn paired_side(pairs: usize, rng: &mut ChaCha8Rng) -> (DMatrix<f64>, Vec<f64>) {
    let mut x = DMatrix::zeros(2 * pairs, 4);
    for k in 0..pairs {
        let (a, b, d) = (rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>());
        for (r, x3) in [(2 * k, 0.35), (2 * k + 1, 0.65)] {
            x[(r, 0)] = a;
            x[(r, 1)] = b;
            x[(r, 2)] = x3;
            x[(r, 3)] = d;
        }
    }
    let y = targets(&x);
    (x, y)
}

#[test]
fn recovers_known_cascade() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let (xa, ya) = paired_side(200, &mut rng);
    let (xb, yb) = paired_side(200, &mut rng);
    let names: Vec<String> = (1..=4).map(|j| format!("x{j}")).collect();
    let data = GrowthData::from_targets(&xa, &ya, &xb, &yb, &names).unwrap();
    let cfg = GrowthConfig {
        fitter: Fitter::Lsm,
        ..GrowthConfig::chain()
    };
    let (net, trace) = grow_data(&data, &cfg).unwrap();
    assert_eq!(net.depth(), 2);
    assert_eq!(trace.stop, GrowthStop::CrRose);
    let crs = trace.cr_min_kept();
    assert!(crs.windows(2).all(|w| w[1] < w[0]));
    let xt = DMatrix::from_fn(1000, 4, |_, _| rng.random::<f64>());
    let yt = targets(&xt);
    let mse = (0..1000)
        .map(|i| {
            let row: Vec<f64> = xt.row(i).iter().copied().collect();
            (net.predict(&row).unwrap() - yt[i]).powi(2)
        })
        .sum::<f64>()
        / 1000.0;
    assert!(mse.sqrt() < 1e-3, "rms {}", mse.sqrt());
}

#[test]
fn perfect_pair_stops_at_layer_one() {
    // Labels are XOR(x1, x2), which one bilinear neuron represents exactly;
    // the training half carries a few flipped labels that deeper layers can
    // only chase at the examining half's expense.
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let rows: Vec<Vec<f64>> = (0..200).map(|_| (0..4).map(|_| f64::from(rng.random::<bool>())).collect()).collect();
    let labels: Vec<u8> = rows.iter().map(|r| u8::from(r[0] != r[1])).collect();
    let d = LabeledDataset::from_rows(&rows, labels).unwrap();
    let s = split(&d, 0.5, 1, true).unwrap();
    let mut a = d.subset(&s.a);
    let flipped: Vec<u8> = a.labels().iter().enumerate().map(|(i, &l)| if i % 10 == 0 { 1 - l } else { l }).collect();
    a = LabeledDataset::new(a.features().clone(), flipped, a.feature_names().to_vec()).unwrap();
    let cfg = GrowthConfig {
        width: 4,
        fitter: Fitter::Lsm,
        ..Default::default()
    };
    let (net, trace) = grow(&a, &d.subset(&s.b), &cfg).unwrap();
    assert_eq!(net.depth(), 1);
    assert_eq!(trace.stop, GrowthStop::CrRose);
    assert_eq!(net.features().len(), 2);
}

#[test]
fn layer_cap() {
    let task = generate_poly_task(2, 5, 300, 0.0, 2).unwrap();
    let s = split(&task.data, 0.5, 2, true).unwrap();
    let cfg = GrowthConfig {
        max_layers: 1,
        ..Default::default()
    };
    let (net, trace) = grow(&task.data.subset(&s.a), &task.data.subset(&s.b), &cfg).unwrap();
    assert_eq!(net.depth(), 1);
    assert_eq!(trace.stop, GrowthStop::MaxLayers);
    assert_eq!(net.neurons().len(), 1);
}

#[test]
fn growth_is_thread_independent() {
    let task = generate_poly_task(2, 6, 400, 0.05, 9).unwrap();
    let s = split(&task.data, 0.5, 9, true).unwrap();
    let (a, b) = (task.data.subset(&s.a), task.data.subset(&s.b));
    let cfg = GrowthConfig {
        width: 6,
        seed: 9,
        ..Default::default()
    };
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| grow(&a, &b, &cfg).unwrap())
    };
    let (n1, t1) = run(1);
    let (n4, t4) = run(4);
    assert_eq!(n1.to_text(), n4.to_text());
    assert_eq!(t1.log(), t4.log());
}

#[test]
fn chain_network_is_a_chain() {
    let task = generate_poly_task(2, 5, 600, 0.0, 5).unwrap();
    let s = split(&task.data, 0.5, 5, true).unwrap();
    let cfg = GrowthConfig { max_layers: 3, ..GrowthConfig::chain() };
    let (net, _) = grow(&task.data.subset(&s.a), &task.data.subset(&s.b), &cfg).unwrap();
    assert_eq!(net.neurons().len(), net.depth());
    assert!(net.features().len() <= net.depth() + 1);
}
