//! The claim-type hierarchy: stance, nesting and routing queries.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TaxonomyError {
    #[error("unknown claim type {0:?}")]
    UnknownClaim(String),
    #[error("unknown stance {0:?}")]
    UnknownStance(String),
    #[error("stance Neutral has no argument members")]
    NeutralMembers,
    #[error("invalid taxonomy: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Stance {
    Neutral,
    Support,
    Opposition,
}

impl Stance {
    pub const ALL: [Stance; 3] = [Stance::Neutral, Stance::Support, Stance::Opposition];

    pub fn name(self) -> &'static str {
        match self {
            Stance::Neutral => "Neutral",
            Stance::Support => "Support",
            Stance::Opposition => "Opposition",
        }
    }
}

impl fmt::Display for Stance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stance {
    type Err = TaxonomyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stance::ALL
            .into_iter()
            .find(|st| st.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| TaxonomyError::UnknownStance(s.to_string()))
    }
}

macro_rules! claim_types {
    ($($variant:ident => $symbol:literal,)*) => {
        /// Sentence-level claim label: `Neutral` or one of the 16 argument types.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        pub enum ClaimType {
            $($variant,)*
        }

        impl ClaimType {
            pub const ALL: [ClaimType; 17] = [$(ClaimType::$variant,)*];

            pub fn name(self) -> &'static str {
                match self {
                    $(ClaimType::$variant => stringify!($variant),)*
                }
            }

            /// Upper snake case form used for grammar start symbols.
            pub fn symbol(self) -> &'static str {
                match self {
                    $(ClaimType::$variant => $symbol,)*
                }
            }
        }
    };
}

claim_types! {
    Neutral => "NEUTRAL",
    ExplicitSupport => "EXPLICIT_SUPPORT",
    LikelySupport => "LIKELY_SUPPORT",
    ExplicitOpposition => "EXPLICIT_OPPOSITION",
    LikelyOpposition => "LIKELY_OPPOSITION",
    Burdensome => "BURDENSOME",
    LacksFlexibility => "LACKS_FLEXIBILITY",
    NotSufficientTime => "NOT_SUFFICIENT_TIME",
    ConflictingInterests => "CONFLICTING_INTERESTS",
    DisputedInformation => "DISPUTED_INFORMATION",
    LegalChallenge => "LEGAL_CHALLENGE",
    Overreach => "OVERREACH",
    RequestsClarification => "REQUESTS_CLARIFICATION",
    LacksClarity => "LACKS_CLARITY",
    SeeksExclusion => "SEEKS_EXCLUSION",
    TooBroad => "TOO_BROAD",
    TooNarrow => "TOO_NARROW",
}

impl ClaimType {
    pub fn is_argument(self) -> bool {
        self != ClaimType::Neutral
    }

    /// The 16 argument types.
    pub fn arguments() -> impl Iterator<Item = ClaimType> {
        ClaimType::ALL.into_iter().filter(|c| c.is_argument())
    }
}

impl fmt::Display for ClaimType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClaimType {
    type Err = TaxonomyError;

    /// Accepts `LegalChallenge`, `LEGAL_CHALLENGE` and case variants of both.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ClaimType::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s) || c.symbol().eq_ignore_ascii_case(s))
            .ok_or_else(|| TaxonomyError::UnknownClaim(s.to_string()))
    }
}

/// One taxonomy record, as stored in a taxonomy file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub id: ClaimType,
    pub stance: Stance,
    pub parent: Option<ClaimType>,
}

/// Validated claim hierarchy. Immutable once built.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Node>", into = "Vec<Node>")]
pub struct Taxonomy {
    nodes: BTreeMap<ClaimType, Node>,
}

impl Default for Taxonomy {
    /// Opposition holds explicit and likely opposition plus twelve specific
    /// claims, three of which are sub-claims; support holds explicit and likely
    /// support.
    fn default() -> Self {
        use ClaimType::*;
        let node = |id, stance, parent| Node { id, stance, parent };
        let mut nodes = vec![node(Neutral, Stance::Neutral, None)];
        for id in [ExplicitSupport, LikelySupport] {
            nodes.push(node(id, Stance::Support, None));
        }
        for id in [
            ExplicitOpposition,
            LikelyOpposition,
            Burdensome,
            ConflictingInterests,
            DisputedInformation,
            LegalChallenge,
            Overreach,
            RequestsClarification,
            TooBroad,
            TooNarrow,
        ] {
            nodes.push(node(id, Stance::Opposition, None));
        }
        nodes.push(node(LacksFlexibility, Stance::Opposition, Some(Burdensome)));
        nodes.push(node(NotSufficientTime, Stance::Opposition, Some(Burdensome)));
        nodes.push(node(LacksClarity, Stance::Opposition, Some(RequestsClarification)));
        nodes.push(node(SeeksExclusion, Stance::Opposition, Some(RequestsClarification)));
        Taxonomy::from_nodes(nodes).expect("built-in taxonomy is valid")
    }
}

impl TryFrom<Vec<Node>> for Taxonomy {
    type Error = TaxonomyError;

    fn try_from(nodes: Vec<Node>) -> Result<Self, Self::Error> {
        Taxonomy::from_nodes(nodes)
    }
}

impl From<Taxonomy> for Vec<Node> {
    fn from(t: Taxonomy) -> Self {
        t.nodes.into_values().collect()
    }
}

impl Taxonomy {
    pub fn from_nodes(nodes: Vec<Node>) -> Result<Self, TaxonomyError> {
        let mut map = BTreeMap::new();
        for node in nodes {
            if map.insert(node.id, node).is_some() {
                return Err(TaxonomyError::Invalid(format!("duplicate node {}", node.id)));
            }
        }
        for id in ClaimType::ALL {
            let node = map
                .get(&id)
                .ok_or_else(|| TaxonomyError::Invalid(format!("missing node {id}")))?;
            let neutral_id = id == ClaimType::Neutral;
            if neutral_id != (node.stance == Stance::Neutral) {
                return Err(TaxonomyError::Invalid(format!("{id} has stance {}", node.stance)));
            }
            if let Some(parent) = node.parent {
                let p = map[&parent];
                if p.stance != node.stance {
                    return Err(TaxonomyError::Invalid(format!("{id} and its parent {parent} differ in stance")));
                }
            }
        }
        // every parent chain must terminate
        for id in ClaimType::ALL {
            let mut cur = map[&id].parent;
            let mut steps = 0;
            while let Some(p) = cur {
                steps += 1;
                if steps > ClaimType::ALL.len() {
                    return Err(TaxonomyError::Invalid(format!("parent cycle through {id}")));
                }
                cur = map[&p].parent;
            }
        }
        Ok(Taxonomy { nodes: map })
    }

    pub fn nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values()
    }

    pub fn stance_of(&self, claim: ClaimType) -> Stance {
        self.nodes[&claim].stance
    }

    pub fn parent(&self, claim: ClaimType) -> Option<ClaimType> {
        self.nodes[&claim].parent
    }

    /// 0 for Neutral, 1 for stance-level claims, plus one per parent link.
    pub fn depth(&self, claim: ClaimType) -> usize {
        if claim == ClaimType::Neutral {
            return 0;
        }
        let mut depth = 1;
        let mut cur = self.parent(claim);
        while let Some(p) = cur {
            depth += 1;
            cur = self.parent(p);
        }
        depth
    }

    /// Argument types under a stance, in declaration order.
    pub fn members(&self, stance: Stance) -> Result<Vec<ClaimType>, TaxonomyError> {
        if stance == Stance::Neutral {
            return Err(TaxonomyError::NeutralMembers);
        }
        Ok(ClaimType::ALL
            .into_iter()
            .filter(|&c| self.stance_of(c) == stance)
            .collect())
    }

    /// Reads a JSON-lines taxonomy file (one `{id, stance, parent}` per line).
    pub fn load(path: &Path) -> Result<Self, TaxonomyError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| TaxonomyError::Invalid(format!("{}: {e}", path.display())))?;
        let mut nodes = Vec::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let node: Node = serde_json::from_str(line)
                .map_err(|e| TaxonomyError::Invalid(format!("line {}: {e}", n + 1)))?;
            nodes.push(node);
        }
        Taxonomy::from_nodes(nodes)
    }

    pub fn to_jsonl(&self) -> String {
        self.nodes
            .values()
            .map(|n| serde_json::to_string(n).expect("node serializes") + "\n")
            .collect()
    }
}

/// Per-class sentence counts.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCounts(pub BTreeMap<ClaimType, usize>);

impl LabelCounts {
    pub fn from_labels<'a>(labels: impl IntoIterator<Item = &'a ClaimType>) -> Self {
        let mut counts: BTreeMap<ClaimType, usize> = ClaimType::ALL.iter().map(|&c| (c, 0)).collect();
        for &l in labels {
            *counts.entry(l).or_default() += 1;
        }
        LabelCounts(counts)
    }

    pub fn get(&self, claim: ClaimType) -> usize {
        self.0.get(&claim).copied().unwrap_or(0)
    }

    pub fn total(&self) -> usize {
        self.0.values().sum()
    }
}

/// Class counts of the published annotated corpus, for reference.
pub const REFERENCE_COUNTS: [(ClaimType, usize); 17] = [
    (ClaimType::Neutral, 1_613_085),
    (ClaimType::ExplicitOpposition, 19_012),
    (ClaimType::LikelyOpposition, 89_396),
    (ClaimType::Burdensome, 12_001),
    (ClaimType::LacksFlexibility, 1_754),
    (ClaimType::NotSufficientTime, 3_820),
    (ClaimType::ConflictingInterests, 2_050),
    (ClaimType::DisputedInformation, 20_943),
    (ClaimType::LegalChallenge, 1_785),
    (ClaimType::Overreach, 2_982),
    (ClaimType::RequestsClarification, 5_021),
    (ClaimType::LacksClarity, 9_848),
    (ClaimType::SeeksExclusion, 4_119),
    (ClaimType::TooBroad, 478),
    (ClaimType::TooNarrow, 2_187),
    (ClaimType::ExplicitSupport, 14_647),
    (ClaimType::LikelySupport, 42_701),
];
