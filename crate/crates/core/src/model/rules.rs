use std::collections::BTreeMap;

use super::PolyNetwork;
use crate::neuron::InputRef;

fn ref_name(net: &PolyNetwork, r: InputRef) -> String {
    match r {
        InputRef::Feature(i) => net
            .features()
            .iter()
            .find(|f| f.index == i)
            .map_or_else(|| format!("x{}", i + 1), |f| f.name.clone()),
        InputRef::Neuron(id) => id.to_string(),
    }
}

fn term(out: &mut String, coef: f64, factor: &str) {
    if coef == 0.0 {
        return;
    }
    let sign = if coef < 0.0 { '-' } else { '+' };
    out.push_str(&format!(" {sign} {:.4}·{factor}", coef.abs()));
}

/// One polynomial per neuron, layer-major, coefficients to 4 decimals.
/// Zero coefficients are omitted.
pub fn render_rules(net: &PolyNetwork) -> String {
    let mut out = String::new();
    for n in net.neurons() {
        let a = ref_name(net, n.inputs[0]);
        let b = ref_name(net, n.inputs[1]);
        let w = n.weights.as_slice();
        out.push_str(&format!("{} = {:.4}", n.id, w[0]));
        term(&mut out, w[1], &a);
        term(&mut out, w[2], &b);
        if let Some(&w12) = w.get(3) {
            term(&mut out, w12, &format!("{a}·{b}"));
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureUse {
    pub index: usize,
    pub name: String,
    /// Number of neurons reading this feature.
    pub uses: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureReport {
    pub features: Vec<FeatureUse>,
}

impl FeatureReport {
    pub fn count(&self) -> usize {
        self.features.len()
    }

    pub fn names(&self) -> Vec<&str> {
        self.features.iter().map(|f| f.name.as_str()).collect()
    }
}

/// Distinct input features the output actually depends on: a reference
/// counts only when some coefficient multiplying it is non-zero.
pub fn feature_report(net: &PolyNetwork) -> FeatureReport {
    let mut uses: BTreeMap<usize, usize> = BTreeMap::new();
    for n in net.neurons() {
        let w = n.weights.as_slice();
        let cross = w.get(3).copied().unwrap_or(0.0) != 0.0;
        for (k, r) in n.inputs.iter().enumerate() {
            if let InputRef::Feature(i) = r {
                if w[1 + k] != 0.0 || cross {
                    *uses.entry(*i).or_default() += 1;
                }
            }
        }
    }
    FeatureReport {
        features: uses
            .into_iter()
            .map(|(index, uses)| FeatureUse {
                index,
                name: ref_name(net, InputRef::Feature(index)),
                uses,
            })
            .collect(),
    }
}
