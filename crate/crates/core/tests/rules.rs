use polygmdh::{feature_report, render_rules, PolyNetwork};

const ALZHEIMER: &str = include_str!("fixtures/alzheimer_rule.model");
const ARTIFACT: &str = include_str!("fixtures/artifact_rule.model");

fn bilinear(w: [f64; 4], a: f64, b: f64) -> f64 {
    w[0] + w[1] * a + w[2] * b + w[3] * a * b
}

/// Zero-input output of the eleven-neuron cascade, evaluated by hand.
fn artifact_at_zero() -> f64 {
    let y11: f64 = 0.9049;
    let y12 = 0.9023;
    let y13 = 0.9268;
    let y14 = 0.9323;
    let y15 = 0.9247;
    let y21 = bilinear([0.0590, 0.2810, 0.3055, 0.3670], y11, y14);
    let y22 = bilinear([0.0225, 0.4144, 0.3812, 0.1878], y12, y13);
    let y23 = bilinear([0.0609, 0.2917, 0.2738, 0.3880], y11, y15);
    let y31 = bilinear([0.0551, 0.3033, 0.3896, 0.2540], y21, y22);
    let y32 = bilinear([0.0579, 0.4058, 0.2834, 0.2549], y22, y23);
    bilinear([-0.0400, 0.6196, 0.5702, -0.1504], y31, y32)
}

fn zeros(net: &PolyNetwork) -> Vec<f64> {
    let width = net.required_inputs().iter().map(|s| s.index + 1).max().unwrap();
    vec![0.0; width]
}

#[test]
fn three_polynomial_rule_at_zero() {
    let net = PolyNetwork::from_text(ALZHEIMER).unwrap();
    let y1: f64 = 0.6965;
    let y2 = 0.3863 + 0.5648 * y1;
    let y3 = 0.1914 + 0.7763 * y2;
    assert!((y2 - 0.779683).abs() < 1e-6);
    let x = zeros(&net);
    let y = net.predict(&x).unwrap();
    assert!((y - y3).abs() < 1e-12);
    assert!((y - 0.796668).abs() < 1e-6);
    assert_eq!(net.classify(&x, 0.5).unwrap(), 1);
    assert_eq!(net.labels().name(1), "healthy");
}

#[test]
fn eleven_polynomial_rule_at_zero() {
    let net = PolyNetwork::from_text(ARTIFACT).unwrap();
    let y = net.predict(&zeros(&net)).unwrap();
    assert!((y - artifact_at_zero()).abs() < 1e-12, "{y} vs {}", artifact_at_zero());
    assert_eq!(net.depth(), 4);
}

#[test]
fn fixtures_reserialize_byte_identically() {
    for text in [ALZHEIMER, ARTIFACT] {
        let once = PolyNetwork::from_text(text).unwrap().to_text();
        let twice = PolyNetwork::from_text(&once).unwrap().to_text();
        assert_eq!(once, twice);
        assert_eq!(PolyNetwork::from_text(&once).unwrap(), PolyNetwork::from_text(text).unwrap());
    }
}

#[test]
fn rendered_rules() {
    let small = render_rules(&PolyNetwork::from_text(ALZHEIMER).unwrap());
    let lines: Vec<&str> = small.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("y_1^{(1)} = 0.6965 + 0.3916·x11"), "{}", lines[0]);
    assert!(lines[2].contains("y_1^{(2)}"));

    let big = render_rules(&PolyNetwork::from_text(ARTIFACT).unwrap());
    assert_eq!(big.lines().count(), 11);
    assert!(big.lines().last().unwrap().starts_with("y_1^{(4)} = -0.0400"));
}

#[test]
fn feature_reports() {
    let small = feature_report(&PolyNetwork::from_text(ALZHEIMER).unwrap());
    assert_eq!(small.names(), ["x11", "x69", "x73", "x76"]);
    let big = feature_report(&PolyNetwork::from_text(ARTIFACT).unwrap());
    assert_eq!(big.count(), 7);
    assert_eq!(big.names(), ["x5", "x6", "x21", "x28", "x55", "x57", "x62"]);
}

#[test]
fn dangling_output_is_rejected() {
    let broken = ALZHEIMER.replace("output 3 1", "output 4 1");
    let err = PolyNetwork::from_text(&broken).unwrap_err();
    assert!(matches!(err, polygmdh::Error::Integrity(_)), "{err}");
}

#[test]
fn missing_feature_is_named() {
    let net = PolyNetwork::from_text(ALZHEIMER).unwrap();
    let header: Vec<String> = ["x11", "x69", "x76"].iter().map(|s| s.to_string()).collect();
    match net.bind(&header) {
        Err(polygmdh::Error::MissingFeature(name)) => assert_eq!(name, "x73"),
        other => panic!("unexpected {other:?}"),
    }
}
