use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::WeakLabel;
use crate::taxonomy::{ClaimType, Taxonomy};
use super::DEFAULT_PRIORITY;

/// One step of the conflict-resolution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    /// Deeper taxonomy node wins.
    Depth,
    /// Lower priority integer wins.
    Priority,
    /// Longer matched span wins.
    SpanLength,
    /// Lower rule id wins.
    RuleId,
}

/// Picks one claim per sentence from its CKY candidates.
#[derive(Debug, Clone)]
pub struct Resolver {
    pub taxonomy: Taxonomy,
    pub priorities: BTreeMap<ClaimType, i64>,
    pub order: Vec<Criterion>,
}

impl Resolver {
    pub const DEFAULT_ORDER: [Criterion; 4] =
        [Criterion::Depth, Criterion::Priority, Criterion::SpanLength, Criterion::RuleId];

    pub fn new(taxonomy: Taxonomy, priorities: BTreeMap<ClaimType, i64>) -> Self {
        Resolver {
            taxonomy,
            priorities,
            order: Self::DEFAULT_ORDER.to_vec(),
        }
    }

    fn priority(&self, claim: ClaimType) -> i64 {
        self.priorities.get(&claim).copied().unwrap_or(DEFAULT_PRIORITY)
    }

    /// `Less` when `a` should win over `b`.
    fn compare(&self, a: &WeakLabel, b: &WeakLabel) -> Ordering {
        for c in &self.order {
            let o = match c {
                Criterion::Depth => self.taxonomy.depth(b.claim).cmp(&self.taxonomy.depth(a.claim)),
                Criterion::Priority => self.priority(a.claim).cmp(&self.priority(b.claim)),
                Criterion::SpanLength => b.span_len().cmp(&a.span_len()),
                Criterion::RuleId => a.rule_id.cmp(&b.rule_id),
            };
            if o != Ordering::Equal {
                return o;
            }
        }
        // total order so the result never depends on candidate order
        (a.claim, a.span).cmp(&(b.claim, b.span))
    }

    /// The winning candidate, if any.
    pub fn winner<'a>(&self, candidates: &'a [WeakLabel]) -> Option<&'a WeakLabel> {
        candidates.iter().min_by(|a, b| self.compare(a, b))
    }

    pub fn resolve(&self, candidates: &[WeakLabel]) -> ClaimType {
        self.winner(candidates).map_or(ClaimType::Neutral, |w| w.claim)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cand(claim: ClaimType, span: (usize, usize), rule_id: usize) -> WeakLabel {
        WeakLabel { sentence_id: 0, claim, span, rule_id }
    }

    fn resolver(pri: &[(ClaimType, i64)]) -> Resolver {
        Resolver::new(Taxonomy::default(), pri.iter().copied().collect())
    }

    #[test]
    fn empty_is_neutral() {
        assert_eq!(resolver(&[]).resolve(&[]), ClaimType::Neutral);
    }

    #[test]
    fn deeper_claim_wins() {
        let c = [cand(ClaimType::Burdensome, (0, 5), 0), cand(ClaimType::NotSufficientTime, (1, 2), 1)];
        assert_eq!(resolver(&[]).resolve(&c), ClaimType::NotSufficientTime);
    }

    #[test]
    fn lower_priority_integer_wins() {
        let c = [cand(ClaimType::Overreach, (0, 5), 0), cand(ClaimType::LegalChallenge, (1, 2), 1)];
        let r = resolver(&[(ClaimType::Overreach, 3), (ClaimType::LegalChallenge, 1)]);
        assert_eq!(r.resolve(&c), ClaimType::LegalChallenge);
    }

    #[test]
    fn span_then_rule_id() {
        let r = resolver(&[]);
        let c = [cand(ClaimType::Overreach, (0, 2), 0), cand(ClaimType::TooBroad, (0, 3), 5)];
        assert_eq!(r.resolve(&c), ClaimType::TooBroad);
        let c = [cand(ClaimType::Overreach, (0, 2), 4), cand(ClaimType::TooBroad, (3, 5), 2)];
        assert_eq!(r.resolve(&c), ClaimType::TooBroad);
    }

    #[test]
    fn order_is_configurable() {
        let mut r = resolver(&[]);
        r.order = vec![Criterion::SpanLength];
        let c = [cand(ClaimType::Burdensome, (0, 5), 0), cand(ClaimType::NotSufficientTime, (1, 2), 1)];
        assert_eq!(r.resolve(&c), ClaimType::Burdensome);
    }

    #[test]
    fn independent_of_candidate_order() {
        let r = resolver(&[]);
        let mut c = vec![cand(ClaimType::Overreach, (0, 2), 1), cand(ClaimType::TooBroad, (3, 5), 1)];
        let a = r.resolve(&c);
        c.reverse();
        assert_eq!(r.resolve(&c), a);
    }
}
