//! Heuristic check for art prompts that read like self-reflection rather
//! than a description of a painting. Only reports; never edits the text.

const PLANNING_MARKERS: &[&str] = &[
    "i will",
    "i'll",
    "i plan",
    "i aim",
    "i intend",
    "i want to",
    "i am going to",
    "i'm going to",
    "i hope to",
    "my next",
    "next time",
    "moving forward",
];

const DEPICTIVE_WORDS: &[&str] = &[
    "depict",
    "canvas",
    "portray",
    "foreground",
    "background",
    "brushstroke",
    "palette",
    "composition",
    "painted",
    "the painting shows",
    "the scene",
    "in the center",
    "in the centre",
    "hues",
    "colors",
    "colours",
];

/// Planning markers found in `text`, or an empty list when the text has no
/// markers or also contains depictive content.
pub fn contamination_markers(text: &str) -> Vec<String> {
    let lower = text.to_lowercase();
    let markers: Vec<String> = PLANNING_MARKERS
        .iter()
        .filter(|m| contains_phrase(&lower, m))
        .map(|m| m.to_string())
        .collect();
    if markers.is_empty() || DEPICTIVE_WORDS.iter().any(|w| lower.contains(w)) {
        return Vec::new();
    }
    markers
}

fn contains_phrase(haystack: &str, phrase: &str) -> bool {
    haystack.match_indices(phrase).any(|(i, _)| {
        let before = haystack[..i].chars().next_back();
        let after = haystack[i + phrase.len()..].chars().next();
        !before.is_some_and(char::is_alphanumeric) && !after.is_some_and(char::is_alphanumeric)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn planning_without_depiction_is_flagged() {
        let m = contamination_markers("I will practice more and I aim to improve my technique.");
        assert_eq!(m, ["i will", "i aim"]);
    }

    #[test]
    fn depictive_text_is_not_flagged() {
        assert!(contamination_markers("The canvas depicts a harbour. I will never forget it.").is_empty());
        assert!(contamination_markers("A red fox sleeps under a tree.").is_empty());
    }

    #[test]
    fn markers_need_word_boundaries() {
        assert!(contamination_markers("Sci-fi willows in mist.").is_empty());
    }
}
