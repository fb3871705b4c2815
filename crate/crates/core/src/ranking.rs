//! The domain's significance registry: sentiment-gated awards, periodic
//! decay, ranking, keyword refresh and re-evaluation of past artworks.

use serde::Serialize;
use thiserror::Error;

use crate::log::LogEvent;
use crate::model::{Artwork, Award, Critique, DomainState, Sentiment, Significance};
use crate::parallel::ordered_map;
use crate::providers::{CallContext, CallRecorder, Capability, ProviderCall, ProviderError, RecordError, Reply};
use crate::templates::{render_critique_request, render_keyword_request, TemplateError, TemplateId};

/// Agent id used in call contexts for keyword extraction.
pub const DOMAIN_AGENT: &str = "domain";

#[derive(Debug, Error)]
pub enum RankingError {
    #[error("critique of {artwork} has no sentiment")]
    SentimentMissing { artwork: String },
    #[error("critique targets {critique_artwork}, not {artwork}")]
    ArtworkMismatch { artwork: String, critique_artwork: String },
    #[error("expected 3 keywords, got {found} in {raw:?}")]
    KeywordParse { raw: String, found: usize },
    #[error("keyword extraction for {artwork}: {source}")]
    Keywords {
        artwork: String,
        #[source]
        source: Box<RankingError>,
    },
    #[error("artwork {artwork}: {source}")]
    Provider {
        artwork: String,
        #[source]
        source: RecordError,
    },
    #[error(transparent)]
    Template(#[from] TemplateError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RankEntry {
    pub artwork: String,
    pub time_step: i64,
    pub total: Significance,
}

/// Registry ordered by total (descending), then most recent step, then id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RankingView {
    pub entries: Vec<RankEntry>,
}

impl RankingView {
    pub fn ids(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.artwork.as_str()).collect()
    }

    pub fn top(&self, k: usize) -> &[RankEntry] {
        &self.entries[..k.min(self.entries.len())]
    }
}

pub fn rank(domain: &DomainState) -> RankingView {
    let mut entries: Vec<RankEntry> = domain
        .artworks
        .values()
        .map(|a| RankEntry {
            artwork: a.id.clone(),
            time_step: a.time_step,
            total: a.significance.total.clone(),
        })
        .collect();
    entries.sort_by(|a, b| {
        b.total
            .cmp(&a.total)
            .then(b.time_step.cmp(&a.time_step))
            .then_with(|| a.artwork.cmp(&b.artwork))
    });
    RankingView { entries }
}

/// Record one critique's award at step `t`: 1 point if positive, 0 if not.
/// Returns the points awarded.
pub fn award_points(artwork: &mut Artwork, critique: &Critique, t: i64) -> Result<u32, RankingError> {
    if critique.artwork_id != artwork.id {
        return Err(RankingError::ArtworkMismatch {
            artwork: artwork.id.clone(),
            critique_artwork: critique.artwork_id.clone(),
        });
    }
    let sentiment = critique.sentiment.ok_or_else(|| RankingError::SentimentMissing {
        artwork: artwork.id.clone(),
    })?;
    let points = sentiment.points();
    let score = &mut artwork.significance;
    score.awards.push(Award { step: t, points });
    score.total = score.total.plus_points(points);
    Ok(points)
}

/// Halve every total when `t` is a decay boundary not yet applied.
/// Returns whether anything was halved.
pub fn apply_decay(domain: &mut DomainState, t: i64) -> bool {
    let d = i64::from(domain.decay_interval.max(1));
    if t <= 0 || t % d != 0 || t <= domain.last_decay_step {
        return false;
    }
    for artwork in domain.artworks.values_mut() {
        artwork.significance.total = artwork.significance.total.halved();
    }
    domain.last_decay_step = t;
    true
}

/// Result of [`parse_keywords`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedKeywords {
    pub keywords: Vec<String>,
    /// Entries beyond the third that were dropped.
    pub dropped: usize,
}

/// Split on commas, semicolons and newlines, trim, drop empties, keep the
/// first three.
pub fn parse_keywords(raw: &str) -> Result<ParsedKeywords, RankingError> {
    let all: Vec<String> = raw
        .split([',', ';', '\n'])
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect();
    if all.len() < 3 {
        return Err(RankingError::KeywordParse {
            raw: raw.to_string(),
            found: all.len(),
        });
    }
    let dropped = all.len() - 3;
    Ok(ParsedKeywords {
        keywords: all.into_iter().take(3).collect(),
        dropped,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeywordRefresh {
    pub top: Vec<String>,
    pub keywords: Vec<String>,
}

fn extract_keywords(recorder: &mut CallRecorder, step: i64, artwork: &Artwork) -> Result<Vec<String>, RankingError> {
    let request = render_keyword_request(&artwork.art_prompt)?;
    let wrap = |source| RankingError::Provider {
        artwork: artwork.id.clone(),
        source,
    };
    let mut last_err = None;
    for attempt in 0..2 {
        let raw = recorder
            .text(step, DOMAIN_AGENT, TemplateId::KeywordExtraction, &request, attempt)
            .map_err(wrap)?;
        match parse_keywords(&raw) {
            Ok(parsed) => {
                if parsed.dropped > 0 {
                    let message = format!(
                        "keyword extraction for {} returned {} extra entries; kept the first 3",
                        artwork.id, parsed.dropped
                    );
                    recorder.emit(&LogEvent::Warning { step, message }).map_err(wrap)?;
                }
                return Ok(parsed.keywords);
            }
            Err(e) => last_err = Some(e),
        }
    }
    Err(RankingError::Keywords {
        artwork: artwork.id.clone(),
        source: Box::new(last_err.expect("two attempts")),
    })
}

/// Replace the domain keywords with three per top-3 artwork, in rank
/// order. Keywords are extracted once per artwork and cached, since an
/// artwork's description never changes.
pub fn refresh_keywords(
    domain: &mut DomainState,
    recorder: &mut CallRecorder,
    step: i64,
) -> Result<KeywordRefresh, RankingError> {
    let top: Vec<String> = rank(domain).top(3).iter().map(|e| e.artwork.clone()).collect();
    let mut keywords = Vec::with_capacity(9);
    for id in &top {
        if !domain.keyword_cache.contains_key(id) {
            let artwork = domain.artworks.get(id).expect("ranked ids exist");
            let extracted = extract_keywords(recorder, step, artwork)?;
            domain.keyword_cache.insert(id.clone(), extracted);
        }
        keywords.extend(domain.keyword_cache[id].iter().cloned());
    }
    domain.keywords = keywords.clone();
    let wrap = |source| RankingError::Provider {
        artwork: top.join(","),
        source,
    };
    recorder
        .emit(&LogEvent::KeywordsUpdated {
            step,
            top: top.clone(),
            keywords: keywords.clone(),
        })
        .map_err(wrap)?;
    Ok(KeywordRefresh { top, keywords })
}

/// One artwork put in front of a critic: the request and, when the
/// artwork has one, its image.
#[derive(Debug, Clone)]
pub struct CritiqueJob {
    pub artwork: String,
    pub prompt: String,
    pub image: Option<Vec<u8>>,
}

impl CritiqueJob {
    pub fn new(
        recorder: &CallRecorder,
        domain_desc: &str,
        critic_desc: &str,
        artwork: &Artwork,
    ) -> Result<Self, RankingError> {
        let prompt = render_critique_request(domain_desc, critic_desc, &artwork.art_prompt)?;
        let image = if artwork.image_ref.is_empty() {
            None
        } else {
            let bytes = recorder
                .read_image(&artwork.image_ref)
                .map_err(|source| RankingError::Provider {
                    artwork: artwork.id.clone(),
                    source,
                })?;
            Some(bytes)
        };
        Ok(CritiqueJob {
            artwork: artwork.id.clone(),
            prompt,
            image,
        })
    }
}

type Judged = Result<(Reply<String>, Reply<Sentiment>), ProviderError>;

/// Critique and classify every job concurrently, then log the calls in job
/// order. Returns one sentiment-bearing critique per job.
pub fn judge(
    recorder: &mut CallRecorder,
    jobs: &[CritiqueJob],
    critic_id: &str,
    step: i64,
    propagated: bool,
    reevaluation: bool,
    max_in_flight: usize,
) -> Result<Vec<Critique>, RankingError> {
    let base = recorder.reserve(2 * jobs.len() as u64);
    let suite = recorder.suite().clone();
    let contexts = |i: usize| {
        let seq = base + 2 * i as u64;
        (
            CallContext::new(seq, step, critic_id).with_template(TemplateId::Critique),
            CallContext::new(seq + 1, step, critic_id),
        )
    };
    let results: Vec<Judged> = ordered_map(jobs, max_in_flight, |i, job| {
        let (c_ctx, s_ctx) = contexts(i);
        let critique = suite.generate_critique(&c_ctx, &job.prompt, job.image.as_deref())?;
        let sentiment = suite.classify_sentiment(&s_ctx, &critique.value)?;
        Ok((critique, sentiment))
    });
    let mut out = Vec::with_capacity(jobs.len());
    for (i, (job, result)) in jobs.iter().zip(results).enumerate() {
        let wrap = |source| RankingError::Provider {
            artwork: job.artwork.clone(),
            source,
        };
        let (critique, sentiment) = result.map_err(|e| wrap(RecordError::from(e)))?;
        let (c_ctx, s_ctx) = contexts(i);
        let text = critique.value.clone();
        recorder
            .commit(ProviderCall::from_reply(
                &c_ctx,
                Capability::Critique,
                job.prompt.clone(),
                text.clone(),
                &critique,
            ))
            .map_err(wrap)?;
        let label = recorder.commit_sentiment(&s_ctx, &text, sentiment).map_err(wrap)?;
        recorder
            .emit(&LogEvent::CritiqueRecorded {
                critic: critic_id.to_string(),
                artwork: job.artwork.clone(),
                step,
                sentiment: label,
                propagated,
                reevaluation,
                text: text.clone(),
            })
            .map_err(wrap)?;
        out.push(Critique {
            critic_id: critic_id.to_string(),
            artwork_id: job.artwork.clone(),
            time_step: step,
            text,
            sentiment: Some(label),
            propagated,
        });
    }
    Ok(out)
}

/// Award a logged critique to its registered artwork and log the new total.
pub fn award_and_log(
    domain: &mut DomainState,
    critique: Critique,
    t: i64,
    recorder: &mut CallRecorder,
) -> Result<u32, RankingError> {
    let artwork = domain
        .artworks
        .get_mut(&critique.artwork_id)
        .expect("critiques are only awarded to registered artworks");
    let points = award_points(artwork, &critique, t)?;
    let total = artwork.significance.total.clone();
    artwork.critiques.push(critique);
    recorder
        .emit(&LogEvent::SignificanceUpdated {
            artwork: artwork.id.clone(),
            step: t,
            points,
            total,
        })
        .map_err(|source| RankingError::Provider {
            artwork: artwork.id.clone(),
            source,
        })?;
    Ok(points)
}

/// Have `critic` reconsider every registered artwork not created at `t`,
/// awarding points by the same rule as creation-step critiques.
pub fn reevaluate_history(
    domain: &mut DomainState,
    critic_id: &str,
    critic_desc: &str,
    t: i64,
    recorder: &mut CallRecorder,
    max_in_flight: usize,
) -> Result<Vec<Critique>, RankingError> {
    let domain_desc = domain.description();
    let jobs = domain
        .artworks
        .values()
        .filter(|a| a.time_step != t)
        .map(|a| CritiqueJob::new(recorder, &domain_desc, critic_desc, a))
        .collect::<Result<Vec<_>, _>>()?;
    let critiques = judge(recorder, &jobs, critic_id, t, true, true, max_in_flight)?;
    for c in &critiques {
        award_and_log(domain, c.clone(), t, recorder)?;
    }
    Ok(critiques)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{recompute_total, SignificanceScore};

    fn artwork(id: &str, step: i64, points: u64) -> Artwork {
        Artwork {
            id: id.into(),
            creator_id: "x".into(),
            time_step: step,
            art_prompt: format!("prompt {id}"),
            image_ref: String::new(),
            critiques: vec![],
            significance: SignificanceScore {
                awards: vec![Award {
                    step: step.max(0),
                    points: points as u32,
                }],
                total: Significance::from_points(points),
            },
        }
    }

    fn critique(artwork: &str, sentiment: Option<Sentiment>) -> Critique {
        Critique {
            critic_id: "c".into(),
            artwork_id: artwork.into(),
            time_step: 3,
            text: "t".into(),
            sentiment,
            propagated: true,
        }
    }

    fn domain(items: &[(&str, i64, u64)]) -> DomainState {
        let mut d = DomainState::new("Base.", 5);
        for &(id, step, pts) in items {
            d.register(artwork(id, step, pts));
        }
        d
    }

    #[test]
    fn positive_award_adds_a_point() {
        let mut a = artwork("a", -1, 1);
        assert_eq!(
            award_points(&mut a, &critique("a", Some(Sentiment::Positive)), 3).unwrap(),
            1
        );
        assert_eq!(a.significance.total, Significance::from_points(2));
        assert_eq!(
            award_points(&mut a, &critique("a", Some(Sentiment::Negative)), 3).unwrap(),
            0
        );
        assert_eq!(a.significance.total, Significance::from_points(2));
        assert_eq!(a.significance.awards.len(), 3);
    }

    #[test]
    fn two_positive_critics_same_step() {
        let mut a = artwork("a", 3, 0);
        for _ in 0..2 {
            award_points(&mut a, &critique("a", Some(Sentiment::Positive)), 3).unwrap();
        }
        assert_eq!(a.significance.total, Significance::from_points(2));
    }

    #[test]
    fn award_preconditions() {
        let mut a = artwork("a", 0, 0);
        assert!(matches!(
            award_points(&mut a, &critique("a", None), 1),
            Err(RankingError::SentimentMissing { .. })
        ));
        assert!(matches!(
            award_points(&mut a, &critique("b", Some(Sentiment::Positive)), 1),
            Err(RankingError::ArtworkMismatch { .. })
        ));
    }

    #[test]
    fn decay_halves_at_boundaries_only() {
        let mut d = domain(&[("a", 0, 4), ("b", 0, 3), ("c", 0, 1)]);
        assert!(!apply_decay(&mut d, 3));
        assert!(apply_decay(&mut d, 5));
        let totals: Vec<String> = d.artworks.values().map(|a| a.significance.total.to_string()).collect();
        assert_eq!(totals, ["2", "3/2", "1/2"]);
        assert!(!apply_decay(&mut d, 5), "a boundary applies once");
        assert!(apply_decay(&mut d, 10));
        for a in d.artworks.values() {
            assert_eq!(a.significance.total, recompute_total(&a.significance, 10, 5));
        }
    }

    #[test]
    fn rank_orders_and_breaks_ties() {
        let d = domain(&[("a", 0, 3), ("b", 0, 1), ("c", 0, 2)]);
        assert_eq!(rank(&d).ids(), ["a", "c", "b"]);
        let d = domain(&[("seed", -1, 1), ("new", 4, 1)]);
        assert_eq!(rank(&d).ids(), ["new", "seed"]);
        let d = domain(&[("y", 2, 1), ("x", 2, 1)]);
        assert_eq!(rank(&d).ids(), ["x", "y"]);
        let d = domain(&[("solo", 0, 0)]);
        assert_eq!(rank(&d).entries.len(), 1);
    }

    #[test]
    fn keyword_parsing() {
        assert_eq!(
            parse_keywords("Ethereal, Minimalist, Spiritual").unwrap().keywords,
            ["Ethereal", "Minimalist", "Spiritual"]
        );
        let p = parse_keywords("a; b; c; d").unwrap();
        assert_eq!((p.keywords, p.dropped), (vec!["a".into(), "b".into(), "c".into()], 1));
        assert!(matches!(
            parse_keywords("only two, words"),
            Err(RankingError::KeywordParse { found: 2, .. })
        ));
        assert_eq!(parse_keywords("x\n\n y ,z").unwrap().keywords, ["x", "y", "z"]);
    }

    proptest::proptest! {
        #[test]
        fn rank_is_a_deterministic_permutation(
            items in proptest::collection::vec((0i64..6, 0u64..4), 1..12)
        ) {
            let named: Vec<(String, i64, u64)> =
                items.iter().enumerate().map(|(i, &(s, p))| (format!("w{i:02}"), s, p)).collect();
            let refs: Vec<(&str, i64, u64)> = named.iter().map(|(n, s, p)| (n.as_str(), *s, *p)).collect();
            let d = domain(&refs);
            let view = rank(&d);
            let mut ids: Vec<&str> = view.ids();
            proptest::prop_assert_eq!(&view, &rank(&d.clone()));
            for w in view.entries.windows(2) {
                proptest::prop_assert!(w[0].total >= w[1].total);
            }
            ids.sort();
            let mut expected: Vec<&str> = refs.iter().map(|r| r.0).collect();
            expected.sort();
            proptest::prop_assert_eq!(ids, expected);
        }
    }
}
