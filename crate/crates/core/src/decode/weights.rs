use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::UnfoldedGraph;
use crate::kind::{DecoderKind, Family};

const MAGIC: &str = "mram-ecc-weights v1";

/// Learnable parameters of one decoder kind, indexed by the graph's slots.
///
/// Standard kinds carry no values. Neutral values reproduce the standard
/// decoder exactly: unit flip weights (NBF), zero offsets (NOMS), unit edge
/// and output weights (NBP).
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSet {
    kind: DecoderKind,
    iterations: usize,
    values: Vec<f64>,
}

impl WeightSet {
    pub fn neutral(kind: DecoderKind, graph: &UnfoldedGraph) -> Self {
        let fill = match kind.family() {
            Family::MinSum => 0.0,
            Family::BitFlip | Family::BeliefProp => 1.0,
        };
        WeightSet {
            kind,
            iterations: graph.iterations(),
            values: vec![fill; graph.param_count(kind)],
        }
    }

    pub fn new(kind: DecoderKind, graph: &UnfoldedGraph, values: Vec<f64>) -> Result<Self> {
        let ws = WeightSet {
            kind,
            iterations: graph.iterations(),
            values,
        };
        ws.check_against(graph)?;
        Ok(ws)
    }

    pub fn kind(&self) -> DecoderKind {
        self.kind
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub(crate) fn check_against(&self, graph: &UnfoldedGraph) -> Result<()> {
        let expect = graph.param_count(self.kind);
        if self.values.len() != expect {
            return Err(Error::param(format!(
                "{} weight set has {} values, graph expects {expect}",
                self.kind,
                self.values.len()
            )));
        }
        if self.kind.is_neural() && self.iterations != graph.iterations() {
            return Err(Error::param(format!(
                "weight set built for {} iterations, graph has {}",
                self.iterations,
                graph.iterations()
            )));
        }
        if let Some(i) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::param(format!("weight {i} is not finite")));
        }
        Ok(())
    }

    /// Per-edge weights of iteration `i` (1-based); `None` for standard kinds.
    pub(crate) fn iteration(&self, graph: &UnfoldedGraph, i: usize) -> Option<&[f64]> {
        if !self.kind.is_neural() {
            return None;
        }
        let r = graph.layout(self.kind).iteration_slots(i);
        Some(&self.values[r])
    }

    pub(crate) fn output(&self, graph: &UnfoldedGraph) -> Option<&[f64]> {
        if self.kind != DecoderKind::Nbp {
            return None;
        }
        let r = graph.layout(self.kind).output;
        Some(&self.values[r])
    }

    /// Text form: a versioned header then every value on one line. Values use
    /// the shortest representation that parses back to the same `f64`.
    pub fn to_text(&self, graph: &UnfoldedGraph) -> String {
        let code = graph.code();
        let mut s = String::new();
        let _ = writeln!(s, "{MAGIC}");
        let _ = writeln!(s, "kind {}", self.kind);
        let _ = writeln!(s, "code {}", code.name());
        let _ = writeln!(s, "iterations {}", graph.iterations());
        let _ = writeln!(s, "edges {}", code.num_edges());
        let _ = writeln!(s, "params {}", self.values.len());
        let row: Vec<String> = self.values.iter().map(|v| format!("{v:?}")).collect();
        let _ = writeln!(s, "{}", row.join(" "));
        s
    }

    pub fn save(&self, graph: &UnfoldedGraph, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_text(graph))?;
        Ok(())
    }

    /// Loads a weight file and checks its header against `graph`.
    pub fn load(graph: &UnfoldedGraph, path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        parse_weights(&text, graph)
    }
}

pub fn parse_weights(text: &str, graph: &UnfoldedGraph) -> Result<WeightSet> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let mut next = |what: &str| {
        lines
            .next()
            .ok_or_else(|| Error::parse(0, format!("missing {what}")))
    };
    let (ln, magic) = next("header")?;
    if magic.trim() != MAGIC {
        return Err(Error::parse(ln, format!("expected {MAGIC:?}")));
    }
    let mut field = |key: &str| -> Result<(usize, String)> {
        let (ln, line) = next(key)?;
        let rest = line
            .strip_prefix(key)
            .and_then(|r| r.strip_prefix(' '))
            .ok_or_else(|| Error::parse(ln, format!("expected \"{key} <value>\"")))?;
        Ok((ln, rest.trim().to_string()))
    };
    let num = |ln: usize, s: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::parse(ln, format!("bad integer {s:?}")))
    };

    let (ln, kind) = field("kind")?;
    let kind: DecoderKind = kind.parse().map_err(|_| Error::parse(ln, "bad kind"))?;
    let (ln, code) = field("code")?;
    if code != graph.code().name() {
        return Err(Error::parse(
            ln,
            format!("weights for {code:?}, graph uses {:?}", graph.code().name()),
        ));
    }
    let (ln, iters) = field("iterations")?;
    if num(ln, &iters)? != graph.iterations() {
        return Err(Error::parse(ln, "iteration count mismatch"));
    }
    let (ln, edges) = field("edges")?;
    if num(ln, &edges)? != graph.code().num_edges() {
        return Err(Error::parse(ln, "edge count mismatch"));
    }
    let (ln, params) = field("params")?;
    let params = num(ln, &params)?;
    if params != graph.param_count(kind) {
        return Err(Error::parse(ln, "parameter count mismatch"));
    }
    let values = match next("values") {
        Ok((ln, row)) => row
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| Error::parse(ln, format!("bad value {t:?}")))
            })
            .collect::<Result<Vec<_>>>()?,
        Err(_) if params == 0 => Vec::new(),
        Err(e) => return Err(e),
    };
    if values.len() != params {
        return Err(Error::parse(
            7,
            format!("{} values, header says {params}", values.len()),
        ));
    }
    WeightSet::new(kind, graph, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code::build_hamming;
    use std::sync::Arc;

    fn graph() -> UnfoldedGraph {
        UnfoldedGraph::unfold(Arc::new(build_hamming(3).unwrap()), 3).unwrap()
    }

    #[test]
    fn neutral_values() {
        let g = graph();
        assert!(WeightSet::neutral(DecoderKind::Nbf, &g)
            .values()
            .iter()
            .all(|&v| v == 1.0));
        assert!(WeightSet::neutral(DecoderKind::Noms, &g)
            .values()
            .iter()
            .all(|&v| v == 0.0));
        assert!(WeightSet::neutral(DecoderKind::Nbp, &g)
            .values()
            .iter()
            .all(|&v| v == 1.0));
        assert!(WeightSet::neutral(DecoderKind::Bp, &g).values().is_empty());
    }

    #[test]
    fn text_round_trip() {
        let g = graph();
        let mut ws = WeightSet::neutral(DecoderKind::Nbp, &g);
        for (i, v) in ws.values_mut().iter_mut().enumerate() {
            *v = 1.0 / (i as f64 + 3.0) - 0.1;
        }
        let text = ws.to_text(&g);
        let back = parse_weights(&text, &g).unwrap();
        assert_eq!(back, ws);
        assert_eq!(back.to_text(&g), text);
    }

    #[test]
    fn header_mismatch_rejected() {
        let g = graph();
        let text = WeightSet::neutral(DecoderKind::Noms, &g).to_text(&g);
        let other = UnfoldedGraph::unfold(Arc::new(build_hamming(3).unwrap()), 2).unwrap();
        assert!(matches!(
            parse_weights(&text, &other),
            Err(Error::Parse { line: 4, .. })
        ));
        let bad = text.replace("kind NOMS", "kind XYZ");
        assert!(matches!(
            parse_weights(&bad, &g),
            Err(Error::Parse { line: 2, .. })
        ));
        let short: String = text.lines().take(6).collect::<Vec<_>>().join("\n");
        assert!(parse_weights(&short, &g).is_err());
    }

    #[test]
    fn wrong_length_rejected() {
        let g = graph();
        assert!(WeightSet::new(DecoderKind::Nbf, &g, vec![1.0; 5]).is_err());
        assert!(WeightSet::new(DecoderKind::Nbf, &g, vec![f64::NAN; 36]).is_err());
    }
}
