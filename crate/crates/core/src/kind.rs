use std::fmt;
use std::str::FromStr;

use crate::error::Error;

/// The six decoders realized on the shared unfolded graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DecoderKind {
    Bf,
    Ms,
    Bp,
    Nbf,
    Noms,
    Nbp,
}

/// Message-passing engine behind a decoder kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    BitFlip,
    MinSum,
    BeliefProp,
}

impl DecoderKind {
    pub const ALL: [DecoderKind; 6] = [
        DecoderKind::Bf,
        DecoderKind::Ms,
        DecoderKind::Bp,
        DecoderKind::Nbf,
        DecoderKind::Noms,
        DecoderKind::Nbp,
    ];

    pub fn family(self) -> Family {
        match self {
            DecoderKind::Bf | DecoderKind::Nbf => Family::BitFlip,
            DecoderKind::Ms | DecoderKind::Noms => Family::MinSum,
            DecoderKind::Bp | DecoderKind::Nbp => Family::BeliefProp,
        }
    }

    pub fn is_neural(self) -> bool {
        matches!(
            self,
            DecoderKind::Nbf | DecoderKind::Noms | DecoderKind::Nbp
        )
    }

    /// Neural kind for a standard kind, identity for neural kinds.
    pub fn neural(self) -> DecoderKind {
        match self.family() {
            Family::BitFlip => DecoderKind::Nbf,
            Family::MinSum => DecoderKind::Noms,
            Family::BeliefProp => DecoderKind::Nbp,
        }
    }

    /// Standard kind for a neural kind, identity for standard kinds.
    pub fn standard(self) -> DecoderKind {
        match self.family() {
            Family::BitFlip => DecoderKind::Bf,
            Family::MinSum => DecoderKind::Ms,
            Family::BeliefProp => DecoderKind::Bp,
        }
    }

    /// Hard-input decoders consume detector bits, the rest consume LLRs.
    pub fn needs_llr(self) -> bool {
        self.family() != Family::BitFlip
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DecoderKind::Bf => "BF",
            DecoderKind::Ms => "MS",
            DecoderKind::Bp => "BP",
            DecoderKind::Nbf => "NBF",
            DecoderKind::Noms => "NOMS",
            DecoderKind::Nbp => "NBP",
        }
    }
}

impl fmt::Display for DecoderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DecoderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.to_ascii_uppercase().as_str() {
            "BF" => Ok(DecoderKind::Bf),
            "MS" => Ok(DecoderKind::Ms),
            "BP" => Ok(DecoderKind::Bp),
            "NBF" => Ok(DecoderKind::Nbf),
            "NOMS" => Ok(DecoderKind::Noms),
            "NBP" => Ok(DecoderKind::Nbp),
            _ => Err(Error::Parameter(format!("unknown decoder kind {s:?}"))),
        }
    }
}
