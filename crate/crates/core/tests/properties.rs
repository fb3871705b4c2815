use std::collections::BTreeMap;

use num_rational::BigRational;
use num_traits::{One, Zero};
use proptest::prelude::*;

use creasim::analysis::barnard::{barnard_exact, Alternative, BarnardOptions, Statistic};
use creasim::analysis::{parse_grades, similarity_matrix};
use creasim::config::MockConfig;
use creasim::model::{recompute_total, Artwork, Critique, DomainState, Sentiment, SignificanceScore};
use creasim::providers::ProviderSuite;
use creasim::ranking::{apply_decay, award_points, rank};

/// Per step: artworks created, then (artwork index, positive) critiques.
type Schedule = Vec<(usize, Vec<(usize, bool)>)>;

fn schedule() -> impl Strategy<Value = (u32, usize, Schedule)> {
    (
        1u32..7,
        0usize..4,
        prop::collection::vec(
            (0usize..3, prop::collection::vec((0usize..10, any::<bool>()), 0..8)),
            1..21,
        ),
    )
}

fn critique(id: &str, t: i64, positive: bool) -> Critique {
    Critique {
        critic_id: "c".into(),
        artwork_id: id.into(),
        time_step: t,
        text: String::new(),
        sentiment: Some(if positive {
            Sentiment::Positive
        } else {
            Sentiment::Negative
        }),
        propagated: true,
    }
}

fn artwork(id: String, t: i64, score: SignificanceScore) -> Artwork {
    Artwork {
        id,
        creator_id: String::new(),
        time_step: t,
        art_prompt: "p".into(),
        image_ref: String::new(),
        critiques: Vec::new(),
        significance: score,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn stored_totals_match_recomputation((d, seeds, steps) in schedule()) {
        let mut domain = DomainState::new("base", d);
        let mut walk: BTreeMap<String, BigRational> = BTreeMap::new();
        for s in 0..seeds {
            domain.register(artwork(format!("seed-{s}"), -1, SignificanceScore::seed()));
            walk.insert(format!("seed-{s}"), BigRational::one());
        }
        for (t, (created, awards)) in steps.iter().enumerate() {
            let t = t as i64;
            apply_decay(&mut domain, t);
            if t > 0 && t % i64::from(d) == 0 {
                for v in walk.values_mut() {
                    *v /= BigRational::from_integer(2.into());
                }
            }
            for k in 0..*created {
                let id = format!("a{t}-{k}");
                domain.register(artwork(id.clone(), t, SignificanceScore::empty()));
                walk.insert(id, BigRational::zero());
            }
            let ids: Vec<String> = domain.artworks.keys().cloned().collect();
            if ids.is_empty() { continue; }
            for &(idx, positive) in awards {
                let id = &ids[idx % ids.len()];
                let a = domain.artworks.get_mut(id).unwrap();
                award_points(a, &critique(id, t, positive), t).unwrap();
                if positive {
                    *walk.get_mut(id).unwrap() += BigRational::one();
                }
            }
            for a in domain.artworks.values() {
                prop_assert_eq!(&a.significance.total, &recompute_total(&a.significance, t, d));
                prop_assert_eq!(a.significance.total.as_ratio(), &walk[&a.id]);
                prop_assert!(!a.significance.total.is_negative());
            }
            let view = rank(&domain);
            for w in view.entries.windows(2) {
                prop_assert!(w[0].total >= w[1].total);
            }
        }
    }

    #[test]
    fn similarity_matrix_properties(prompts in prop::collection::vec("[a-z][a-z ]{0,39}", 2..8), shift in 0usize..8) {
        let suite = ProviderSuite::mock(5, &MockConfig::default());
        let m = similarity_matrix("a", &prompts, &suite, 1).unwrap();
        let n = prompts.len();
        for i in 0..n {
            prop_assert!((m.values[i][i] - 1.0).abs() < 1e-6);
            for j in 0..n {
                prop_assert_eq!(m.values[i][j], m.values[j][i]);
                prop_assert!((-1.0 - 1e-9..=1.0 + 1e-9).contains(&m.values[i][j]));
            }
        }
        // Embedding is per prompt, so concurrency and ordering do not matter.
        let parallel = similarity_matrix("a", &prompts, &suite, 4).unwrap();
        prop_assert_eq!(&parallel.values, &m.values);
        let k = shift % n;
        let mut rotated = prompts.clone();
        rotated.rotate_left(k);
        let r = similarity_matrix("a", &rotated, &suite, 3).unwrap();
        for i in 0..n {
            for j in 0..n {
                prop_assert!((r.values[i][j] - m.values[(i + k) % n][(j + k) % n]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn grades_come_from_the_text(scores in prop::collection::vec(prop::option::of(0u32..=20), 1..20), style in 0usize..3) {
        let mut text = String::from("Here is my assessment.\n\n");
        for (i, s) in scores.iter().enumerate() {
            let i = i + 1;
            match s {
                Some(v) => {
                    let v = f64::from(*v) / 2.0;
                    let line = match style {
                        0 => format!("{i}. Vivid colour work. Score: {v}/10\n"),
                        1 => format!("**Painting {i}:** Bold idea. I give it {v} out of 10.\n"),
                        _ => format!("Painting {i} - Score: {v}\n"),
                    };
                    text.push_str(&line);
                }
                None => text.push_str(&format!("{i}. This one is hard to judge.\n")),
            }
        }
        let sheet = parse_grades(&text, scores.len());
        for (i, s) in scores.iter().enumerate() {
            prop_assert_eq!(sheet.score(i + 1), s.map(|v| f64::from(v) / 2.0));
            if let Some(g) = &sheet.scores[i] {
                let quoted: f64 = text[g.span.clone()].parse().unwrap();
                prop_assert_eq!(quoted, g.value);
            }
        }
        prop_assert_eq!(sheet.absent().len(), scores.iter().filter(|s| s.is_none()).count());
    }

    #[test]
    fn barnard_refined_grid_never_lowers_p(x1 in 0u64..=25, f1 in 0u64..=25, x2 in 0u64..=25, f2 in 0u64..=25) {
        let table = [[x1, f1], [x2, f2]];
        prop_assume!(x1 + f1 > 0 && x2 + f2 > 0 && x1 + x2 > 0 && f1 + f2 > 0);
        for alternative in [Alternative::Greater, Alternative::Less, Alternative::TwoSided] {
            let p = |grid| barnard_exact(table, BarnardOptions { alternative, statistic: Statistic::Wald, grid }).unwrap().p_value;
            // 0, 1/200, ... is a subset of 0, 1/1000, ...
            let (coarse, fine) = (p(201), p(1001));
            prop_assert!((0.0..=1.0).contains(&coarse));
            prop_assert!(fine >= coarse - 1e-12);
        }
        // When the table leans towards "greater", the two-sided region contains the one-sided one.
        let one = |alternative| barnard_exact(table, BarnardOptions { alternative, ..Default::default() }).unwrap();
        let greater = one(Alternative::Greater);
        if greater.statistic >= 0.0 {
            prop_assert!(one(Alternative::TwoSided).p_value >= greater.p_value - 1e-12);
        }
    }
}
