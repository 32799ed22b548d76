use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Loop scheduling techniques, from fully static to adaptive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TechniqueKind {
    /// Block scheduling: one chunk of `ceil(N/P)` per PE.
    Static,
    /// Self-scheduling: one iteration per request.
    Ss,
    /// Fixed-size chunking from overhead `h` and task-time deviation `sigma`.
    Fsc,
    /// Modified fixed-size chunking: fixed chunk giving as many chunks as FAC.
    Mfsc,
    /// Guided self-scheduling: `ceil(R/P)`.
    Gss,
    /// Trapezoid self-scheduling: linearly decreasing chunks.
    Tss,
    /// Practical factoring: batches of half the remaining work.
    Fac,
    /// Weighted factoring with fixed PE weights.
    Wf,
    /// Uniformly random chunk sizes between two bounds.
    Rand,
    /// Adaptive weighted factoring, weights updated between time-steps.
    Awf,
    /// AWF with weights updated after each batch.
    AwfB,
    /// AWF with weights updated after each chunk.
    AwfC,
    /// AWF-B counting scheduling overhead.
    AwfD,
    /// AWF-C counting scheduling overhead.
    AwfE,
    /// Adaptive factoring: per-PE mean and deviation learned online.
    Af,
}

impl TechniqueKind {
    pub const ALL: [TechniqueKind; 15] = [
        TechniqueKind::Static,
        TechniqueKind::Ss,
        TechniqueKind::Fsc,
        TechniqueKind::Mfsc,
        TechniqueKind::Gss,
        TechniqueKind::Tss,
        TechniqueKind::Fac,
        TechniqueKind::Wf,
        TechniqueKind::Rand,
        TechniqueKind::Awf,
        TechniqueKind::AwfB,
        TechniqueKind::AwfC,
        TechniqueKind::AwfD,
        TechniqueKind::AwfE,
        TechniqueKind::Af,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TechniqueKind::Static => "STATIC",
            TechniqueKind::Ss => "SS",
            TechniqueKind::Fsc => "FSC",
            TechniqueKind::Mfsc => "mFSC",
            TechniqueKind::Gss => "GSS",
            TechniqueKind::Tss => "TSS",
            TechniqueKind::Fac => "FAC",
            TechniqueKind::Wf => "WF",
            TechniqueKind::Rand => "RAND",
            TechniqueKind::Awf => "AWF",
            TechniqueKind::AwfB => "AWF-B",
            TechniqueKind::AwfC => "AWF-C",
            TechniqueKind::AwfD => "AWF-D",
            TechniqueKind::AwfE => "AWF-E",
            TechniqueKind::Af => "AF",
        }
    }

    /// Chunk sizes depend on measured performance.
    pub fn is_adaptive(self) -> bool {
        self.is_awf_family() || self == TechniqueKind::Af
    }

    pub fn is_awf_family(self) -> bool {
        matches!(
            self,
            TechniqueKind::Awf
                | TechniqueKind::AwfB
                | TechniqueKind::AwfC
                | TechniqueKind::AwfD
                | TechniqueKind::AwfE
        )
    }

    /// Uses the factoring batch: FAC, WF, the AWF family and AF.
    pub fn is_batched(self) -> bool {
        matches!(self, TechniqueKind::Fac | TechniqueKind::Wf | TechniqueKind::Af)
            || self.is_awf_family()
    }

    /// Scheduling overhead is folded into the per-iteration time.
    pub fn counts_sched_time(self) -> bool {
        matches!(self, TechniqueKind::AwfD | TechniqueKind::AwfE)
    }

    pub fn valid_names() -> String {
        Self::ALL.iter().map(|t| t.name()).collect::<Vec<_>>().join(", ")
    }
}

impl fmt::Display for TechniqueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown technique `{given}`; valid: {valid}")]
pub struct UnknownTechnique {
    pub given: String,
    pub valid: String,
}

impl FromStr for TechniqueKind {
    type Err = UnknownTechnique;

    /// Case-insensitive; `_` and `-` are interchangeable (`AWF_B` == `awf-b`).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_uppercase().replace('_', "-");
        TechniqueKind::ALL
            .iter()
            .copied()
            .find(|t| t.name().to_ascii_uppercase() == norm)
            .ok_or_else(|| UnknownTechnique {
                given: s.to_string(),
                valid: TechniqueKind::valid_names(),
            })
    }
}

/// Process-level choice: no dynamic load balancing, or a DLS technique.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ProcTechnique {
    /// One-shot equal split of the loop across ranks, no master involvement.
    Nodlb,
    Dls(TechniqueKind),
}

impl ProcTechnique {
    pub fn name(self) -> &'static str {
        match self {
            ProcTechnique::Nodlb => "NODLB",
            ProcTechnique::Dls(t) => t.name(),
        }
    }

    pub fn technique(self) -> Option<TechniqueKind> {
        match self {
            ProcTechnique::Nodlb => None,
            ProcTechnique::Dls(t) => Some(t),
        }
    }
}

impl From<TechniqueKind> for ProcTechnique {
    fn from(t: TechniqueKind) -> Self {
        ProcTechnique::Dls(t)
    }
}

impl fmt::Display for ProcTechnique {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProcTechnique {
    type Err = UnknownTechnique;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.trim().eq_ignore_ascii_case("NODLB") {
            return Ok(ProcTechnique::Nodlb);
        }
        s.parse::<TechniqueKind>()
            .map(ProcTechnique::Dls)
            .map_err(|mut e| {
                e.valid = format!("NODLB, {}", e.valid);
                e
            })
    }
}

macro_rules! string_serde {
    ($ty:ty) => {
        impl Serialize for $ty {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(self.name())
            }
        }

        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

string_serde!(TechniqueKind);
string_serde!(ProcTechnique);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for t in TechniqueKind::ALL {
            assert_eq!(t.name().parse::<TechniqueKind>().unwrap(), t);
            assert_eq!(t.to_string().parse::<TechniqueKind>().unwrap(), t);
        }
        assert_eq!("awf_b".parse::<TechniqueKind>().unwrap(), TechniqueKind::AwfB);
        assert_eq!("mfsc".parse::<TechniqueKind>().unwrap(), TechniqueKind::Mfsc);
    }

    #[test]
    fn unknown_lists_valid_set() {
        let err = "guided".parse::<TechniqueKind>().unwrap_err();
        assert!(err.to_string().contains("AWF-E"));
        let err = "guided".parse::<ProcTechnique>().unwrap_err();
        assert!(err.valid.starts_with("NODLB"));
    }

    #[test]
    fn proc_technique_parsing() {
        assert_eq!("nodlb".parse::<ProcTechnique>().unwrap(), ProcTechnique::Nodlb);
        assert_eq!(
            "AF".parse::<ProcTechnique>().unwrap(),
            ProcTechnique::Dls(TechniqueKind::Af)
        );
        let json = serde_json::to_string(&ProcTechnique::Dls(TechniqueKind::AwfD)).unwrap();
        assert_eq!(json, "\"AWF-D\"");
    }

    #[test]
    fn families() {
        assert!(TechniqueKind::Af.is_adaptive());
        assert!(!TechniqueKind::Af.is_awf_family());
        assert!(TechniqueKind::AwfE.counts_sched_time());
        assert!(!TechniqueKind::AwfC.counts_sched_time());
        assert!(!TechniqueKind::Gss.is_batched());
    }
}
