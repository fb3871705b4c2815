//! Score extraction from a grader's free-text answer.
//!
//! The answer is split at enumeration markers (`3.`, `Painting 3:`,
//! `**3.**`, `3)` at the start of a line). Inside each section the first
//! of `x/10`, `x out of 10` or `Score: x` is the score for that index.
//! Indices outside `1..=n`, values outside [0, 10] and repeated indices are
//! ignored, so a score is only ever taken from text that states it.

use std::ops::Range;
use std::sync::LazyLock;

use regex::Regex;
use serde::Serialize;

static MARKER: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?mi)^[ \t>*#\-]*(?:(?:painting|artwork|image|piece|description)\s*(?:no\.?\s*)?#?\s*)?(\d{1,3})\s*(?:[.):\-]|\*\*)(?:[ \t*]|$)",
    )
    .expect("marker regex")
});

static SCORE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)(?:\b(\d{1,2}(?:\.\d+)?)\s*/\s*10\b)|(?:\b(\d{1,2}(?:\.\d+)?)\s+out\s+of\s+10\b)|(?:\bscore\s*(?:of|is|:|=)?\s*\**\s*(\d{1,2}(?:\.\d+)?)\b)",
    )
    .expect("score regex")
});

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grade {
    pub value: f64,
    /// Byte range of the number in the grader's text.
    pub span: Range<usize>,
}

/// One grader answer for `n` artworks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradeSheet {
    /// `scores[i]` is artwork `i + 1`.
    pub scores: Vec<Option<Grade>>,
}

/// A lowest or highest score with how many artworks received it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Extreme {
    pub value: f64,
    pub count: usize,
}

impl std::fmt::Display for Extreme {
    /// `9.0^(3)`, or `8.5` when the score occurs once.
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.count > 1 {
            write!(f, "{:.1}^({})", self.value, self.count)
        } else {
            write!(f, "{:.1}", self.value)
        }
    }
}

fn first_score(section: &str) -> Option<(f64, Range<usize>)> {
    for caps in SCORE.captures_iter(section) {
        let m = (1..=3).find_map(|g| caps.get(g)).expect("one alternative matched");
        if let Ok(v) = m.as_str().parse::<f64>() {
            if (0.0..=10.0).contains(&v) {
                return Some((v, m.range()));
            }
        }
    }
    None
}

pub fn parse_grades(text: &str, n: usize) -> GradeSheet {
    let mut scores: Vec<Option<Grade>> = vec![None; n];
    let markers: Vec<(usize, usize)> = MARKER
        .captures_iter(text)
        .filter_map(|c| {
            let whole = c.get(0).expect("match");
            let index: usize = c[1].parse().ok()?;
            Some((index, whole.start()))
        })
        .collect();
    for (k, &(index, start)) in markers.iter().enumerate() {
        if index == 0 || index > n || scores[index - 1].is_some() {
            continue;
        }
        let end = markers.get(k + 1).map_or(text.len(), |m| m.1);
        if let Some((value, span)) = first_score(&text[start..end]) {
            scores[index - 1] = Some(Grade {
                value,
                span: span.start + start..span.end + start,
            });
        }
    }
    GradeSheet { scores }
}

impl GradeSheet {
    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn score(&self, index: usize) -> Option<f64> {
        self.scores.get(index.checked_sub(1)?)?.as_ref().map(|g| g.value)
    }

    /// 1-based indices without a score.
    pub fn absent(&self) -> Vec<usize> {
        self.scores
            .iter()
            .enumerate()
            .filter(|(_, s)| s.is_none())
            .map(|(i, _)| i + 1)
            .collect()
    }

    fn extreme(&self, pick_max: bool) -> Option<Extreme> {
        let values: Vec<f64> = self.scores.iter().flatten().map(|g| g.value).collect();
        let target = values
            .iter()
            .copied()
            .reduce(|a, b| if (b > a) == pick_max { b } else { a })?;
        Some(Extreme {
            value: target,
            count: values.iter().filter(|&&v| v == target).count(),
        })
    }

    pub fn lowest(&self) -> Option<Extreme> {
        self.extreme(false)
    }

    pub fn highest(&self) -> Option<Extreme> {
        self.extreme(true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn marker_styles() {
        let text = "1. Nice. 7/10\n**Painting 2:** Score: 8.5\n3) decent, 6 out of 10\nPainting #4 - 9/10";
        let g = parse_grades(text, 4);
        assert_eq!(
            (1..=4).map(|i| g.score(i)).collect::<Vec<_>>(),
            [Some(7.0), Some(8.5), Some(6.0), Some(9.0)]
        );
    }

    #[test]
    fn spans_point_at_the_number() {
        let text = "1. Good work. Score: 9/10\n2. Not scored.";
        let g = parse_grades(text, 2);
        let grade = g.scores[0].as_ref().unwrap();
        assert_eq!(&text[grade.span.clone()], "9");
        assert_eq!(g.absent(), [2]);
    }

    #[test]
    fn decimal_scores_do_not_start_sections() {
        let text = "1. Score:\n8.5/10\n2. 6/10";
        let g = parse_grades(text, 2);
        assert_eq!(g.score(1), Some(8.5));
        assert_eq!(g.score(2), Some(6.0));
    }

    #[test]
    fn out_of_range_and_repeats_ignored() {
        let text = "1. 11/10 then 7/10\n2. 5/10\n2. 9/10\n3. 4/10";
        let g = parse_grades(text, 2);
        assert_eq!(g.score(1), Some(7.0));
        assert_eq!(g.score(2), Some(5.0));
    }

    #[test]
    fn extremes_with_multiplicity() {
        let text = "1. 4/10\n2. 9/10\n3. 9/10\n4. 6/10\n5. 9/10\n6. none";
        let g = parse_grades(text, 6);
        assert_eq!(g.lowest().unwrap().to_string(), "4.0");
        assert_eq!(g.highest().unwrap().to_string(), "9.0^(3)");
        let flat = parse_grades("1. 5/10\n2. 5/10", 2);
        assert_eq!(flat.lowest(), flat.highest());
        assert_eq!(flat.highest().unwrap().count, 2);
        assert!(parse_grades("nothing", 3).highest().is_none());
    }
}
