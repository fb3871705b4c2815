//! Domain data model: agents, artworks, critiques, significance scores and
//! the domain registry they live in.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

/// Time-step marker for artworks that belong to the initial seed collection.
pub const SEED_STEP: i64 = -1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Artist,
    Critic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sentiment {
    Positive,
    Negative,
}

impl Sentiment {
    /// Significance points earned by a critique with this sentiment.
    pub fn points(self) -> u32 {
        match self {
            Sentiment::Positive => 1,
            Sentiment::Negative => 0,
        }
    }
}

impl fmt::Display for Sentiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sentiment::Positive => "positive",
            Sentiment::Negative => "negative",
        })
    }
}

impl FromStr for Sentiment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "positive" | "pos" | "label_1" => Ok(Sentiment::Positive),
            "negative" | "neg" | "label_0" => Ok(Sentiment::Negative),
            other => Err(format!("unknown sentiment label {other:?}")),
        }
    }
}

/// An artist or critic. The core description is fixed at construction; the
/// additional log grows with every self-reflection.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentSpec {
    id: String,
    role: Role,
    core_description: String,
    additional_log: Vec<String>,
    summarized_additional: String,
    /// Number of leading `additional_log` entries already folded into
    /// `summarized_additional`.
    folded: usize,
}

impl AgentSpec {
    pub fn new(id: impl Into<String>, role: Role, core_description: impl Into<String>) -> Self {
        AgentSpec {
            id: id.into(),
            role,
            core_description: core_description.into(),
            additional_log: Vec::new(),
            summarized_additional: String::new(),
            folded: 0,
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn core_description(&self) -> &str {
        &self.core_description
    }

    pub fn additional_log(&self) -> &[String] {
        &self.additional_log
    }

    pub fn summarized_additional(&self) -> &str {
        &self.summarized_additional
    }

    /// Entries appended after the most recent summarization.
    pub fn unfolded_entries(&self) -> &[String] {
        &self.additional_log[self.folded..]
    }

    pub fn push_reflection(&mut self, text: impl Into<String>) {
        self.additional_log.push(text.into());
    }

    /// Replace the summary and mark every current log entry as folded into it.
    pub fn apply_summary(&mut self, summary: impl Into<String>) {
        self.summarized_additional = summary.into();
        self.folded = self.additional_log.len();
    }

    /// Character count of the additional text that would be composed into
    /// the agent's description right now.
    pub fn additional_len(&self) -> usize {
        let mut parts = Vec::new();
        if !self.summarized_additional.is_empty() {
            parts.push(self.summarized_additional.chars().count());
        }
        parts.extend(self.unfolded_entries().iter().map(|e| e.chars().count()));
        let seps = parts.len().saturating_sub(1);
        parts.iter().sum::<usize>() + seps
    }
}

/// Exact, non-negative significance total. Halving is exact, so totals
/// compare bit-for-bit across replays.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Significance(BigRational);

impl Significance {
    pub fn zero() -> Self {
        Significance(BigRational::zero())
    }

    pub fn from_points(points: u64) -> Self {
        Significance(BigRational::from_integer(BigInt::from(points)))
    }

    pub fn halved(&self) -> Self {
        Significance(&self.0 / BigRational::from_integer(BigInt::from(2)))
    }

    pub fn plus_points(&self, points: u32) -> Self {
        Significance(&self.0 + BigRational::from_integer(BigInt::from(points)))
    }

    /// `points × 2^-halvings`.
    pub fn scaled(points: u64, halvings: u64) -> Self {
        let denom = num_traits::pow(BigInt::from(2), halvings as usize);
        Significance(BigRational::new(BigInt::from(points), denom))
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn as_ratio(&self) -> &BigRational {
        &self.0
    }
}

impl std::ops::Add for Significance {
    type Output = Significance;

    fn add(self, rhs: Self) -> Self {
        Significance(self.0 + rhs.0)
    }
}

impl std::iter::Sum for Significance {
    fn sum<I: Iterator<Item = Significance>>(iter: I) -> Self {
        iter.fold(Significance::zero(), |a, b| a + b)
    }
}

impl fmt::Debug for Significance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Significance({})", self)
    }
}

impl fmt::Display for Significance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.denom().is_one() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl FromStr for Significance {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parse = |x: &str| {
            x.trim()
                .parse::<BigInt>()
                .map_err(|e| format!("bad significance {s:?}: {e}"))
        };
        let value = match s.split_once('/') {
            Some((n, d)) => {
                let d = parse(d)?;
                if d.is_zero() {
                    return Err(format!("bad significance {s:?}: zero denominator"));
                }
                BigRational::new(parse(n)?, d)
            }
            None => BigRational::from_integer(parse(s)?),
        };
        Ok(Significance(value))
    }
}

impl Serialize for Significance {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Significance {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Award {
    pub step: i64,
    pub points: u32,
}

/// Per-step point awards plus the running decayed total.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignificanceScore {
    pub awards: Vec<Award>,
    pub total: Significance,
}

impl SignificanceScore {
    pub fn empty() -> Self {
        SignificanceScore {
            awards: Vec::new(),
            total: Significance::zero(),
        }
    }

    /// A seed artwork's score: one point, treated as awarded at step 0.
    pub fn seed() -> Self {
        SignificanceScore {
            awards: vec![Award { step: 0, points: 1 }],
            total: Significance::from_points(1),
        }
    }
}

/// Number of global decay boundaries (steps `b > 0` with `b % d == 0`) in
/// the half-open interval `(after, upto]`.
pub fn decay_boundaries_between(after: i64, upto: i64, decay_interval: u32) -> u64 {
    if upto <= after || upto <= 0 {
        return 0;
    }
    let d = i64::from(decay_interval.max(1));
    let after = after.max(0);
    (upto / d - after / d) as u64
}

/// Recompute a score's total from its award history: each award is halved
/// once per decay boundary strictly after its step and at or before
/// `current_step`.
pub fn recompute_total(score: &SignificanceScore, current_step: i64, decay_interval: u32) -> Significance {
    score
        .awards
        .iter()
        .map(|a| {
            let halvings = decay_boundaries_between(a.step, current_step, decay_interval);
            Significance::scaled(u64::from(a.points), halvings)
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Critique {
    pub critic_id: String,
    pub artwork_id: String,
    pub time_step: i64,
    pub text: String,
    pub sentiment: Option<Sentiment>,
    pub propagated: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artwork {
    pub id: String,
    pub creator_id: String,
    /// `SEED_STEP` for the initial collection.
    pub time_step: i64,
    pub art_prompt: String,
    /// Path relative to the run directory, empty when there is no image.
    pub image_ref: String,
    pub critiques: Vec<Critique>,
    pub significance: SignificanceScore,
}

impl Artwork {
    pub fn is_seed(&self) -> bool {
        self.time_step == SEED_STEP
    }
}

/// Base description, ranked registry and current keyword set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainState {
    pub base_description: String,
    pub artworks: BTreeMap<String, Artwork>,
    pub keywords: Vec<String>,
    pub decay_interval: u32,
    pub last_decay_step: i64,
    /// Keywords already extracted per artwork; descriptions never change.
    pub keyword_cache: BTreeMap<String, Vec<String>>,
}

/// Lead-in placed between the domain's base text and its keyword list.
pub const KEYWORD_LEAD: &str = "Keywords associated with currently significant artworks:";

impl DomainState {
    pub fn new(base_description: impl Into<String>, decay_interval: u32) -> Self {
        DomainState {
            base_description: base_description.into(),
            artworks: BTreeMap::new(),
            keywords: Vec::new(),
            decay_interval,
            last_decay_step: 0,
            keyword_cache: BTreeMap::new(),
        }
    }

    /// The text given to templates: base description, then the keywords
    /// grouped per top artwork (`a, b, c;d, e, f;g, h, i.`).
    pub fn description(&self) -> String {
        if self.keywords.is_empty() {
            return self.base_description.clone();
        }
        let groups: Vec<String> = self.keywords.chunks(3).map(|g| g.join(", ")).collect();
        format!("{} {} {}.", self.base_description, KEYWORD_LEAD, groups.join(";"))
    }

    pub fn register(&mut self, artwork: Artwork) {
        self.artworks.insert(artwork.id.clone(), artwork);
    }

    pub fn artwork(&self, id: &str) -> Option<&Artwork> {
        self.artworks.get(id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn score(awards: &[(i64, u32)]) -> SignificanceScore {
        SignificanceScore {
            awards: awards.iter().map(|&(step, points)| Award { step, points }).collect(),
            total: Significance::zero(),
        }
    }

    // Independent re-weighting: walk every step and halve a running weight.
    fn brute_force(awards: &[(i64, u32)], current: i64, d: u32) -> f64 {
        awards
            .iter()
            .map(|&(step, points)| {
                let mut w = points as f64;
                let mut t = step.max(0) + 1;
                while t <= current {
                    if t > 0 && t % d as i64 == 0 {
                        w /= 2.0;
                    }
                    t += 1;
                }
                w
            })
            .sum()
    }

    #[test]
    fn single_halving() {
        let s = score(&[(0, 4)]);
        assert_eq!(recompute_total(&s, 2, 2), Significance::from_points(2));
    }

    #[test]
    fn no_boundary_crossed() {
        let s = score(&[(0, 1)]);
        assert_eq!(recompute_total(&s, 0, 5), Significance::from_points(1));
    }

    #[test]
    fn mixed_award_ages() {
        let awards = [(0, 2), (3, 2)];
        assert_eq!(brute_force(&awards, 4, 2), 1.5);
        assert_eq!(recompute_total(&score(&awards), 4, 2), "3/2".parse().unwrap());
    }

    #[test]
    fn boundary_count_matches_walk() {
        for d in 1..7u32 {
            for after in -1..20i64 {
                for upto in -1..25i64 {
                    let walk = ((after.max(0) + 1)..=upto.max(0))
                        .filter(|t| *t > 0 && t % d as i64 == 0)
                        .count() as u64;
                    assert_eq!(
                        decay_boundaries_between(after, upto, d),
                        walk,
                        "d={d} after={after} upto={upto}"
                    );
                }
            }
        }
    }

    #[test]
    fn significance_text_round_trip() {
        let s = Significance::scaled(3, 4);
        assert_eq!(s.to_string(), "3/16");
        assert_eq!("3/16".parse::<Significance>().unwrap(), s);
        assert_eq!("7".parse::<Significance>().unwrap(), Significance::from_points(7));
        assert!("1/0".parse::<Significance>().is_err());
    }

    #[test]
    fn domain_description_groups_keywords() {
        let mut d = DomainState::new("Base.", 5);
        assert_eq!(d.description(), "Base.");
        d.keywords = [
            "Unconventional",
            "Expressive",
            "Bold",
            "photorealism",
            "urban solitude",
            "hyperrealism",
            "Ethereal",
            "Minimalist",
            "Spiritual",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        assert_eq!(
            d.description(),
            "Base. Keywords associated with currently significant artworks: Unconventional, Expressive, Bold;photorealism, urban solitude, hyperrealism;Ethereal, Minimalist, Spiritual."
        );
    }

    #[test]
    fn additional_len_counts_separators() {
        let mut a = AgentSpec::new("a", Role::Artist, "core");
        assert_eq!(a.additional_len(), 0);
        a.push_reflection("abc");
        a.push_reflection("de");
        assert_eq!(a.additional_len(), 6);
        a.apply_summary("xy");
        assert_eq!(a.additional_len(), 2);
        assert!(a.unfolded_entries().is_empty());
        a.push_reflection("z");
        assert_eq!(a.additional_len(), 4);
    }

    proptest::proptest! {
        #[test]
        fn total_never_grows_with_time(
            awards in proptest::collection::vec((0i64..20, 0u32..4), 0..12),
            d in 1u32..8,
            t in 0i64..30,
        ) {
            let mut awards = awards;
            awards.sort();
            let s = score(&awards);
            proptest::prop_assert!(recompute_total(&s, t + 1, d) <= recompute_total(&s, t, d));
        }

        #[test]
        fn far_boundary_means_plain_sum(
            awards in proptest::collection::vec((0i64..20, 0u32..4), 0..12),
            t in 0i64..20,
        ) {
            let s = score(&awards);
            let plain: u64 = awards.iter().map(|a| a.1 as u64).sum();
            proptest::prop_assert_eq!(recompute_total(&s, t, 1000), Significance::from_points(plain));
        }

        #[test]
        fn matches_step_walk(
            awards in proptest::collection::vec((0i64..20, 0u32..4), 0..12),
            d in 1u32..8,
            t in 0i64..25,
        ) {
            let s = score(&awards);
            let exact = recompute_total(&s, t, d).to_f64();
            proptest::prop_assert_eq!(exact, brute_force(&awards, t, d));
        }
    }
}
