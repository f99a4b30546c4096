//! Line-oriented model file format.
//!
//! ```text
//! polygmdh-model v1
//! kind gmdh
//! labels <class0> <class1>
//! preprocess <inputs> <components>          (optional)
//! raw <index> <name> <min> <max>            (one per raw input)
//! pca-mean <v>...
//! pca-axis <k> <v>...                       (one per component)
//! pca-variance <v>...
//! pca-explained <v>...
//! features <count>
//! feature <index> <name> <min> <max>
//! neurons <count>
//! neuron <layer> <index> <kind> <ref> <ref> <w0> <w1> <w2> [<w12>]
//! output <layer> <index>
//! end
//! ```
//!
//! Indices are 1-based. A `ref` is `x<index>` for an input feature or
//! `y<layer>.<index>` for a neuron. Numbers are written as hex floats for
//! exactness, with a decimal rendering after `#`; decimal numbers are
//! accepted on input. Names are percent-encoded (space, tab, `#`, `%`).

use nalgebra::{DMatrix, DVector};

use super::{LabelMap, Neuron, PolyNetwork, Preprocess};
use crate::data::FeatureScale;
use crate::error::{Error, Result};
use crate::hexfloat;
use crate::neuron::{InputRef, NeuronId, TransferKind, WeightVector};
use crate::signal::PcaModel;

pub const FORMAT_HEADER: &str = "polygmdh-model";
pub const FORMAT_VERSION: &str = "v1";

pub fn encode_name(name: &str) -> String {
    let mut out = String::with_capacity(name.len());
    for c in name.chars() {
        match c {
            '%' | '#' | ' ' | '\t' | '\n' | '\r' => out.push_str(&format!("%{:02X}", c as u32)),
            c => out.push(c),
        }
    }
    if out.is_empty() {
        out.push_str("%00");
    }
    out
}

pub fn decode_name(token: &str) -> Option<String> {
    if token == "%00" {
        return Some(String::new());
    }
    let mut out = String::with_capacity(token.len());
    let mut chars = token.chars();
    while let Some(c) = chars.next() {
        if c == '%' {
            let hex: String = chars.by_ref().take(2).collect();
            let code = u32::from_str_radix(&hex, 16).ok()?;
            out.push(char::from_u32(code)?);
        } else {
            out.push(c);
        }
    }
    Some(out)
}

fn number(v: f64) -> String {
    hexfloat::format(v)
}

fn numbers(vs: &[f64]) -> String {
    vs.iter().map(|v| number(*v)).collect::<Vec<_>>().join(" ")
}

fn decimals(vs: &[f64]) -> String {
    vs.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(" ")
}

fn write_ref(r: InputRef) -> String {
    match r {
        InputRef::Feature(i) => format!("x{}", i + 1),
        InputRef::Neuron(id) => format!("y{}.{}", id.layer, id.index),
    }
}

/// Writes the header, kind, labels and the optional preprocessing stage.
pub(crate) fn write_preamble(out: &mut String, kind: &str, labels: &LabelMap, pre: Option<&Preprocess>) {
    out.push_str(&format!("{FORMAT_HEADER} {FORMAT_VERSION}\n"));
    out.push_str(&format!("kind {kind}\n"));
    out.push_str(&format!("labels {} {}\n", encode_name(&labels.0[0]), encode_name(&labels.0[1])));
    if let Some(p) = pre {
        out.push_str(&format!("preprocess {} {}\n", p.inputs.len(), p.pca.q()));
        for s in &p.inputs {
            write_scale(out, "raw", s);
        }
        out.push_str(&format!("pca-mean {}\n", numbers(p.pca.mean.as_slice())));
        for k in 0..p.pca.q() {
            let axis: Vec<f64> = p.pca.components.column(k).iter().copied().collect();
            out.push_str(&format!("pca-axis {} {}\n", k + 1, numbers(&axis)));
        }
        out.push_str(&format!("pca-variance {}\n", numbers(&p.pca.variances)));
        out.push_str(&format!("pca-explained {}\n", numbers(&p.pca.explained)));
    }
}

pub(crate) fn write_scale(out: &mut String, keyword: &str, s: &FeatureScale) {
    out.push_str(&format!(
        "{keyword} {} {} {} {} # min={} max={}\n",
        s.index + 1,
        encode_name(&s.name),
        number(s.min),
        number(s.max),
        s.min,
        s.max
    ));
}

pub(crate) fn write_hex_row(out: &mut String, keyword: &str, values: &[f64]) {
    out.push_str(&format!("{keyword} {} # {}\n", numbers(values), decimals(values)));
}

pub(crate) fn write_poly(net: &PolyNetwork) -> String {
    let mut out = String::new();
    write_preamble(&mut out, "gmdh", net.labels(), net.preprocess());
    out.push_str(&format!("features {}\n", net.features().len()));
    for s in net.features() {
        write_scale(&mut out, "feature", s);
    }
    out.push_str(&format!("neurons {}\n", net.neurons().len()));
    for n in net.neurons() {
        out.push_str(&format!(
            "neuron {} {} {} {} {} {} # {}\n",
            n.id.layer,
            n.id.index,
            n.kind.as_str(),
            write_ref(n.inputs[0]),
            write_ref(n.inputs[1]),
            numbers(n.weights.as_slice()),
            decimals(n.weights.as_slice()),
        ));
    }
    out.push_str(&format!("output {} {}\n", net.output().layer, net.output().index));
    out.push_str("end\n");
    out
}

/// One non-blank line with comments removed.
#[derive(Debug, Clone, PartialEq)]
pub struct Line {
    pub number: usize,
    pub tokens: Vec<String>,
}

impl Line {
    pub fn error(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            line: self.number,
            message: message.into(),
        }
    }

    pub fn keyword(&self) -> &str {
        &self.tokens[0]
    }

    pub fn args(&self) -> &[String] {
        &self.tokens[1..]
    }

    pub fn arity(&self, n: usize) -> Result<&[String]> {
        if self.args().len() == n {
            Ok(self.args())
        } else {
            Err(self.error(format!("{} takes {n} values, found {}", self.keyword(), self.args().len())))
        }
    }

    pub fn float(&self, token: &str) -> Result<f64> {
        let v = if token.starts_with("0x") || token.starts_with("-0x") || token.starts_with("+0x") {
            hexfloat::parse(token)
        } else {
            token.parse::<f64>().ok()
        };
        v.filter(|v| v.is_finite())
            .ok_or_else(|| self.error(format!("malformed number {token:?}")))
    }

    pub fn floats(&self, tokens: &[String]) -> Result<Vec<f64>> {
        tokens.iter().map(|t| self.float(t)).collect()
    }

    pub fn count(&self, token: &str) -> Result<usize> {
        token
            .parse()
            .map_err(|_| self.error(format!("malformed integer {token:?}")))
    }

    pub fn name(&self, token: &str) -> Result<String> {
        decode_name(token).ok_or_else(|| self.error(format!("malformed name {token:?}")))
    }
}

/// Tokenized model file with a read cursor.
#[derive(Debug, Clone)]
pub struct Document {
    lines: Vec<Line>,
    pos: usize,
    pub kind: String,
    pub labels: LabelMap,
}

impl Document {
    /// Checks the version header and reads `kind` and `labels`.
    pub fn parse(text: &str) -> Result<Self> {
        let lines: Vec<Line> = text
            .lines()
            .enumerate()
            .filter_map(|(i, raw)| {
                let content = raw.split('#').next().unwrap_or("");
                let tokens: Vec<String> = content.split_whitespace().map(str::to_string).collect();
                (!tokens.is_empty()).then_some(Line { number: i + 1, tokens })
            })
            .collect();
        let first = lines.first().ok_or(Error::Parse {
            line: 1,
            message: "empty model file".into(),
        })?;
        if first.keyword() != FORMAT_HEADER {
            return Err(first.error(format!("expected {FORMAT_HEADER:?} header")));
        }
        match first.args() {
            [v] if v == FORMAT_VERSION => {}
            [v] => return Err(Error::Version(v.clone())),
            _ => return Err(first.error("header takes exactly one version")),
        }
        let mut doc = Document {
            lines,
            pos: 1,
            kind: String::new(),
            labels: LabelMap::default(),
        };
        let kind = doc.expect("kind")?;
        doc.kind = kind.arity(1)?[0].clone();
        let labels = doc.expect("labels")?;
        let args = labels.arity(2)?;
        doc.labels = LabelMap([labels.name(&args[0])?, labels.name(&args[1])?]);
        Ok(doc)
    }

    pub fn peek(&self) -> Option<&Line> {
        self.lines.get(self.pos)
    }

    fn last_line(&self) -> usize {
        self.lines.last().map_or(1, |l| l.number)
    }

    pub fn expect(&mut self, keyword: &str) -> Result<Line> {
        match self.lines.get(self.pos) {
            Some(l) if l.keyword() == keyword => {
                self.pos += 1;
                Ok(l.clone())
            }
            Some(l) => Err(l.error(format!("expected {keyword:?}, found {:?}", l.keyword()))),
            None => Err(Error::Parse {
                line: self.last_line(),
                message: format!("unexpected end of file, expected {keyword:?}"),
            }),
        }
    }

    /// `end` must be the final line.
    pub fn finish(&mut self) -> Result<()> {
        self.expect("end")?;
        match self.peek() {
            Some(l) => Err(l.error("content after end")),
            None => Ok(()),
        }
    }

    pub fn scale(&mut self, keyword: &str) -> Result<FeatureScale> {
        let l = self.expect(keyword)?;
        let a = l.arity(4)?;
        let index = l.count(&a[0])?;
        if index == 0 {
            return Err(l.error("indices are 1-based"));
        }
        Ok(FeatureScale {
            index: index - 1,
            name: l.name(&a[1])?,
            min: l.float(&a[2])?,
            max: l.float(&a[3])?,
        })
    }

    /// Reads `count` header then that many scale lines.
    pub fn scales(&mut self, header: &str, keyword: &str) -> Result<Vec<FeatureScale>> {
        let l = self.expect(header)?;
        let count = l.count(&l.arity(1)?[0])?;
        (0..count).map(|_| self.scale(keyword)).collect()
    }

    pub fn preprocess(&mut self) -> Result<Option<Preprocess>> {
        if self.peek().map(Line::keyword) != Some("preprocess") {
            return Ok(None);
        }
        let l = self.expect("preprocess")?;
        let a = l.arity(2)?;
        let (m, q) = (l.count(&a[0])?, l.count(&a[1])?);
        let inputs = (0..m).map(|_| self.scale("raw")).collect::<Result<Vec<_>>>()?;
        let mean = self.row("pca-mean", m)?;
        let mut components = DMatrix::zeros(m, q);
        for k in 0..q {
            let l = self.expect("pca-axis")?;
            if l.args().len() != m + 1 || l.count(&l.args()[0])? != k + 1 {
                return Err(l.error(format!("expected axis {} with {m} values", k + 1)));
            }
            let axis = l.floats(&l.args()[1..])?;
            components.set_column(k, &DVector::from_vec(axis));
        }
        let variances = self.row("pca-variance", q)?;
        let explained = self.row("pca-explained", q)?;
        Ok(Some(Preprocess {
            inputs,
            pca: PcaModel {
                mean: DVector::from_vec(mean),
                components,
                variances,
                explained,
            },
        }))
    }

    pub fn row(&mut self, keyword: &str, len: usize) -> Result<Vec<f64>> {
        let l = self.expect(keyword)?;
        l.floats(l.arity(len)?)
    }
}

fn parse_ref(line: &Line, token: &str) -> Result<InputRef> {
    let bad = || line.error(format!("malformed reference {token:?}"));
    if let Some(rest) = token.strip_prefix('x') {
        let i: usize = rest.parse().map_err(|_| bad())?;
        if i == 0 {
            return Err(bad());
        }
        Ok(InputRef::Feature(i - 1))
    } else if let Some(rest) = token.strip_prefix('y') {
        let (layer, index) = rest.split_once('.').ok_or_else(bad)?;
        let layer: usize = layer.parse().map_err(|_| bad())?;
        let index: usize = index.parse().map_err(|_| bad())?;
        if layer == 0 || index == 0 {
            return Err(bad());
        }
        Ok(InputRef::Neuron(NeuronId::new(layer, index)))
    } else {
        Err(bad())
    }
}

pub(crate) fn read_poly(text: &str) -> Result<PolyNetwork> {
    let mut doc = Document::parse(text)?;
    if doc.kind != "gmdh" {
        return Err(Error::Parse {
            line: 2,
            message: format!("expected a gmdh model, found kind {:?}", doc.kind),
        });
    }
    let preprocess = doc.preprocess()?;
    let features = doc.scales("features", "feature")?;
    let header = doc.expect("neurons")?;
    let count = header.count(&header.arity(1)?[0])?;
    let mut neurons = Vec::with_capacity(count);
    for _ in 0..count {
        let l = doc.expect("neuron")?;
        let a = l.args();
        if a.len() < 5 {
            return Err(l.error("neuron needs layer, index, kind and two references"));
        }
        let kind = TransferKind::parse(&a[2]).ok_or_else(|| l.error(format!("unknown transfer {:?}", a[2])))?;
        let weights = l.floats(&a[5..])?;
        if weights.len() != kind.arity() {
            return Err(l.error(format!("{} transfer takes {} weights, found {}", a[2], kind.arity(), weights.len())));
        }
        let (layer, index) = (l.count(&a[0])?, l.count(&a[1])?);
        if layer == 0 || index == 0 {
            return Err(l.error("indices are 1-based"));
        }
        neurons.push(Neuron {
            id: NeuronId::new(layer, index),
            kind,
            inputs: [parse_ref(&l, &a[3])?, parse_ref(&l, &a[4])?],
            weights: WeightVector(weights),
        });
    }
    let l = doc.expect("output")?;
    let a = l.arity(2)?;
    let output = NeuronId::new(l.count(&a[0])?, l.count(&a[1])?);
    doc.finish()?;
    PolyNetwork::new(features, preprocess, neurons, output, doc.labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "polygmdh-model v1
kind gmdh
labels alz healthy
features 2
feature 1 a 0 1
feature 2 b 0 2
neurons 1
neuron 1 1 bilinear x1 x2 0.5 0.25 -1 0
output 1 1
end
";

    #[test]
    fn names_round_trip() {
        for name in ["plain", "with space", "50%#tag", ""] {
            assert_eq!(decode_name(&encode_name(name)).unwrap(), name);
        }
    }

    #[test]
    fn parses_decimal_document() {
        let net = read_poly(SMALL).unwrap();
        assert_eq!(net.labels().0[1], "healthy");
        assert_eq!(net.predict(&[1.0, 2.0]).unwrap(), 0.5 + 0.25 - 1.0);
        let text = net.to_text();
        assert_eq!(read_poly(&text).unwrap().to_text(), text);
    }

    #[test]
    fn version_mismatch() {
        let text = SMALL.replace("v1", "v2");
        assert!(matches!(read_poly(&text), Err(Error::Version(v)) if v == "v2"));
    }

    #[test]
    fn malformed_number() {
        let text = SMALL.replace("0.25", "0.2.5");
        match read_poly(&text) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 8);
                assert!(message.contains("malformed number"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn dangling_output() {
        let text = SMALL.replace("output 1 1", "output 2 1");
        assert!(matches!(read_poly(&text), Err(Error::Integrity(_))));
        let text = SMALL.replace("x1 x2", "x1 x9");
        assert!(matches!(read_poly(&text), Err(Error::Integrity(_))));
    }

    #[test]
    fn structural_errors() {
        assert!(read_poly("").is_err());
        assert!(read_poly("something else\n").is_err());
        assert!(read_poly(&SMALL.replace("end\n", "")).is_err());
        assert!(read_poly(&format!("{SMALL}extra\n")).is_err());
        assert!(read_poly(&SMALL.replace("bilinear", "cubic")).is_err());
        assert!(read_poly(&SMALL.replace("kind gmdh", "kind fnn")).is_err());
    }
}
