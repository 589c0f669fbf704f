//! The unfolded trellis shared by all six decoders.
//!
//! Decoding iteration `i` (1-based) occupies hidden layers `t = 2i − 1`
//! (variable layer) and `t = 2i` (check layer). Every hidden layer spans all
//! `E` edges of the Tanner graph. Learnable parameters are laid out per kind:
//!
//! | kind          | slots                                          |
//! |---------------|------------------------------------------------|
//! | BF, MS, BP    | none                                           |
//! | NBF           | `E` per check layer (flip-score weights)       |
//! | NOMS          | `E` per check layer (offsets)                  |
//! | NBP           | `E` per variable layer, then `n` output weights|
//!
//! Layer parameter ranges are contiguous and ordered by iteration, so the
//! first `I'` iterations of a layout are a prefix of the full layout.

use std::fmt::Write as _;
use std::ops::Range;
use std::sync::Arc;

use crate::code::LinearCode;
use crate::error::{Error, Result};
use crate::kind::{DecoderKind, Family};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Variable,
    Check,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layer {
    /// 1-based hidden layer index `t`.
    pub t: usize,
    /// 1-based decoding iteration the layer belongs to.
    pub iteration: usize,
    pub kind: LayerKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnfoldedGraph {
    code: Arc<LinearCode>,
    iterations: usize,
    layers: Vec<Layer>,
}

/// Parameter-slot assignment of one decoder kind on a graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamLayout {
    pub kind: DecoderKind,
    /// One range per hidden layer, empty for layers without parameters.
    pub layers: Vec<Range<usize>>,
    /// Output-layer slots (NBP only).
    pub output: Range<usize>,
    pub total: usize,
}

impl ParamLayout {
    /// Slots of iteration `i` (1-based) for the parameterized layer of the kind.
    pub fn iteration_slots(&self, i: usize) -> Range<usize> {
        let (v, c) = (&self.layers[2 * i - 2], &self.layers[2 * i - 1]);
        if v.is_empty() {
            c.clone()
        } else {
            v.clone()
        }
    }
}

impl UnfoldedGraph {
    pub fn unfold(code: Arc<LinearCode>, iterations: usize) -> Result<Self> {
        if iterations < 1 {
            return Err(Error::param("unfolding needs at least one iteration"));
        }
        if let Some(c) = (0..code.num_checks()).find(|&c| code.check_neighbors(c).len() < 2) {
            return Err(Error::param(format!("check {c} has degree below 2")));
        }
        let layers = (1..=2 * iterations)
            .map(|t| Layer {
                t,
                iteration: t.div_ceil(2),
                kind: if t % 2 == 1 {
                    LayerKind::Variable
                } else {
                    LayerKind::Check
                },
            })
            .collect();
        Ok(UnfoldedGraph {
            code,
            iterations,
            layers,
        })
    }

    pub fn code(&self) -> &LinearCode {
        &self.code
    }

    pub fn code_arc(&self) -> &Arc<LinearCode> {
        &self.code
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Edge ids touched by hidden layer `t`: always the full enumeration.
    pub fn layer_edges(&self, t: usize) -> Range<usize> {
        assert!(t >= 1 && t <= self.layers.len(), "layer {t} out of range");
        0..self.code.num_edges()
    }

    pub fn layout(&self, kind: DecoderKind) -> ParamLayout {
        let e = self.code.num_edges();
        let mut next = 0;
        let mut layers = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let has_params = kind.is_neural()
                && match kind.family() {
                    Family::BitFlip | Family::MinSum => layer.kind == LayerKind::Check,
                    Family::BeliefProp => layer.kind == LayerKind::Variable,
                };
            if has_params {
                layers.push(next..next + e);
                next += e;
            } else {
                layers.push(next..next);
            }
        }
        let output = if kind == DecoderKind::Nbp {
            next..next + self.code.n()
        } else {
            next..next
        };
        let total = output.end;
        ParamLayout {
            kind,
            layers,
            output,
            total,
        }
    }

    pub fn param_count(&self, kind: DecoderKind) -> usize {
        self.layout(kind).total
    }

    /// The same graph cut down to its first `iterations` iterations.
    pub fn truncate(&self, iterations: usize) -> Result<Self> {
        if iterations < 1 || iterations > self.iterations {
            return Err(Error::param(format!(
                "cannot truncate {} iterations to {iterations}",
                self.iterations
            )));
        }
        Ok(UnfoldedGraph {
            code: Arc::clone(&self.code),
            iterations,
            layers: self.layers[..2 * iterations].to_vec(),
        })
    }

    /// Text listing of the layer structure and edge adjacency.
    pub fn dump(&self) -> String {
        let code = &self.code;
        let mut s = String::new();
        let _ = writeln!(
            s,
            "code {} n={} k={} C={} E={} I={}",
            code.name(),
            code.n(),
            code.k(),
            code.num_checks(),
            code.num_edges(),
            self.iterations
        );
        for layer in &self.layers {
            let tag = match layer.kind {
                LayerKind::Variable => "VN",
                LayerKind::Check => "CN",
            };
            let _ = writeln!(s, "layer {} {} iteration {}", layer.t, tag, layer.iteration);
        }
        for (id, edge) in code.edges().iter().enumerate() {
            let _ = writeln!(s, "edge {id} c{} v{}", edge.check, edge.var);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code::build_hamming;

    fn graph(iters: usize) -> UnfoldedGraph {
        UnfoldedGraph::unfold(Arc::new(build_hamming(3).unwrap()), iters).unwrap()
    }

    #[test]
    fn two_iterations_four_layers() {
        let g = graph(2);
        assert_eq!(g.layers().len(), 4);
        assert_eq!(g.layers()[0].kind, LayerKind::Variable);
        assert_eq!(g.layers()[3].kind, LayerKind::Check);
    }

    #[test]
    fn five_iterations() {
        let g = graph(5);
        assert_eq!(g.layers().len(), 10);
        for l in g.layers() {
            assert_eq!(g.layer_edges(l.t).len(), 12);
        }
    }

    #[test]
    fn zero_iterations_rejected() {
        assert!(UnfoldedGraph::unfold(Arc::new(build_hamming(3).unwrap()), 0).is_err());
    }

    #[test]
    fn slot_totals() {
        let g = graph(5);
        let (e, n, i) = (12, 7, 5);
        assert_eq!(g.param_count(DecoderKind::Nbf), e * i);
        assert_eq!(g.param_count(DecoderKind::Noms), e * i);
        assert_eq!(g.param_count(DecoderKind::Nbp), e * i + n);
        for k in [DecoderKind::Bf, DecoderKind::Ms, DecoderKind::Bp] {
            assert_eq!(g.param_count(k), 0);
        }
    }

    #[test]
    fn slot_ranges_contiguous() {
        let g = graph(4);
        for kind in DecoderKind::ALL {
            let layout = g.layout(kind);
            let mut next = 0;
            for r in layout.layers.iter().chain(std::iter::once(&layout.output)) {
                assert_eq!(r.start, next);
                next = r.end;
            }
            assert_eq!(next, layout.total);
        }
    }

    #[test]
    fn truncation_is_prefix() {
        let g = graph(5);
        let t = g.truncate(3).unwrap();
        assert_eq!(t.layers(), &g.layers()[..6]);
        for kind in DecoderKind::ALL {
            assert_eq!(t.layout(kind).layers, g.layout(kind).layers[..6].to_vec());
        }
        assert!(g.truncate(6).is_err());
    }

    #[test]
    fn deterministic() {
        assert_eq!(graph(3), graph(3));
        assert_eq!(graph(3).dump(), graph(3).dump());
    }
}
