//! Offline backend. Every output is a pure function of the run seed, the
//! call context and the request payload, so identical runs produce
//! identical logs and a resumed run continues exactly where it stopped.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

use super::{
    CallContext, MultimodalGenerator, ProviderError, Reply, SentenceEmbedder, SentimentClassifier, Summarizer,
    TextGenerator, TextToImage,
};
use crate::config::MockConfig;
use crate::model::{Sentiment, KEYWORD_LEAD};
use crate::templates::TemplateId;

const SUBJECTS: &[&str] = &[
    "a lighthouse keeper reading by candlelight",
    "two foxes circling a frozen pond",
    "a crowded night market under paper lanterns",
    "an empty swing in a flooded playground",
    "a giant teapot sailing across a desert",
    "a girl painting her own shadow",
    "a stack of books growing into a tree",
    "a city skyline folded like origami",
    "an old woman feeding birds made of glass",
    "a dragon curled around a school bell tower",
    "a bicycle melting into a sunset street",
    "a classroom floating among the clouds",
    "a whale swimming through a library",
    "a kite tangled in a thunderstorm",
];

const PALETTES: &[&str] = &[
    "warm ochres and deep crimson",
    "cool teal and silver grey",
    "pastel pinks and lemon yellow",
    "muted browns with a single bright blue accent",
    "high-contrast black and gold",
    "soft greens and lavender",
    "fiery orange against midnight blue",
    "washed-out sepia tones",
];

const TECHNIQUES: &[&str] = &[
    "thick impasto brushstrokes",
    "delicate watercolour washes",
    "collage of newspaper scraps",
    "loose charcoal lines",
    "pointillist dots",
    "flat geometric shapes",
    "dripping acrylic paint",
    "careful pencil hatching",
];

const MOODS: &[&str] = &[
    "a feeling of quiet wonder",
    "a restless, dreamlike energy",
    "a playful sense of humour",
    "a melancholic stillness",
    "a hopeful glow at the horizon",
    "an eerie calm",
];

const ACTIONS: &[&str] = &[
    "experiment with unfamiliar materials",
    "study how light falls on everyday objects",
    "simplify my compositions",
    "take more risks with colour",
    "sketch every day in the school garden",
    "ask my mentor to look at my early drafts",
    "visit the school library for art books",
    "focus on telling a clearer story",
    "try painting with my non-dominant hand",
];

const ASPECTS: &[&str] = &[
    "composition",
    "colour choice",
    "use of texture",
    "central subject",
    "lighting",
];

const FALLBACK_KEYWORDS: &[&str] = &["Textured", "Vivid", "Quiet", "Layered", "Dreamlike", "Urban"];

const STOPWORDS: &[&str] = &[
    "about", "above", "after", "again", "along", "among", "their", "there", "these", "those", "which", "while",
    "where", "with", "would", "could", "should", "other", "every", "under", "being", "into", "from", "that", "this",
    "painting", "canvas", "depicts", "student", "artwork",
];

/// Deterministic stand-in for every capability.
#[derive(Debug, Clone)]
pub struct MockBackend {
    seed: u64,
    config: MockConfig,
}

struct Hasher(Sha256);

impl Hasher {
    fn new(seed: u64, domain: &str) -> Self {
        let mut h = Hasher(Sha256::new());
        h.0.update(seed.to_le_bytes());
        h.part(domain.as_bytes())
    }

    fn part(mut self, bytes: &[u8]) -> Self {
        self.0.update((bytes.len() as u64).to_le_bytes());
        self.0.update(bytes);
        self
    }

    fn ctx(self, ctx: &CallContext) -> Self {
        self.part(&ctx.step.to_le_bytes()).part(ctx.agent.as_bytes())
    }

    fn finish(self) -> Draw {
        Draw {
            bytes: self.0.finalize().into(),
            cursor: 0,
        }
    }
}

/// A stream of deterministic choices drawn from one digest.
struct Draw {
    bytes: [u8; 32],
    cursor: usize,
}

impl Draw {
    fn next_u64(&mut self) -> u64 {
        if self.cursor + 8 > self.bytes.len() {
            self.bytes = Sha256::digest(self.bytes).into();
            self.cursor = 0;
        }
        let mut b = [0u8; 8];
        b.copy_from_slice(&self.bytes[self.cursor..self.cursor + 8]);
        self.cursor += 8;
        u64::from_le_bytes(b)
    }

    /// Uniform in [0, 1).
    fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    fn index(&mut self, len: usize) -> usize {
        (self.next_u64() % len as u64) as usize
    }

    fn pick<'a>(&mut self, items: &[&'a str]) -> &'a str {
        items[self.index(items.len())]
    }

    /// `k` distinct picks, in drawn order.
    fn pick_distinct<T: Clone>(&mut self, items: &[T], k: usize) -> Vec<T> {
        let mut pool: Vec<T> = items.to_vec();
        let mut out = Vec::new();
        while out.len() < k && !pool.is_empty() {
            let i = self.index(pool.len());
            out.push(pool.remove(i));
        }
        out
    }
}

fn tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric() && c != '\'')
        .filter(|w| !w.is_empty())
        .map(|w| w.to_lowercase())
        .collect()
}

fn capitalize(word: &str) -> String {
    let mut c = word.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

fn first_sentence(text: &str) -> &str {
    let text = text.trim();
    match text.find(". ") {
        Some(i) => &text[..=i],
        None => text,
    }
}

fn truncate_chars(text: &str, budget: usize) -> String {
    text.chars().take(budget).collect()
}

impl MockBackend {
    pub fn new(seed: u64, config: MockConfig) -> Self {
        MockBackend { seed, config }
    }

    /// Occurrences of lexicon entries in `text`; multi-word entries match
    /// as whole-token phrases.
    fn lexicon_hits(text: &str, lexicon: &[String]) -> usize {
        let padded = format!(" {} ", tokens(text).join(" "));
        lexicon
            .iter()
            .map(|entry| {
                let needle = format!(" {} ", tokens(entry).join(" "));
                if needle.trim().is_empty() {
                    0
                } else {
                    padded.matches(&needle).count()
                }
            })
            .sum()
    }

    /// Lexicon vote; ties go negative.
    pub fn lexicon_sentiment(&self, text: &str) -> Sentiment {
        let pos = Self::lexicon_hits(text, &self.config.positive_lexicon);
        let neg = Self::lexicon_hits(text, &self.config.negative_lexicon);
        if pos > neg {
            Sentiment::Positive
        } else {
            Sentiment::Negative
        }
    }

    fn art_prompt(&self, ctx: &CallContext, prompt: &str) -> String {
        let mut d = Hasher::new(self.seed, "art").ctx(ctx).part(prompt.as_bytes()).finish();
        let keywords = domain_keywords(prompt);
        let reflective = prompt.contains("I will") || prompt.contains("I aim");
        if reflective && d.unit() < 0.04 {
            return format!(
                "I will {} and {}. I aim to grow as an artist and I am determined to keep learning from every piece I make.",
                d.pick(ACTIONS),
                d.pick(ACTIONS)
            );
        }
        let mut text = format!(
            "The canvas depicts {}. It is painted in {} using {}, giving the scene {}.",
            d.pick(SUBJECTS),
            d.pick(PALETTES),
            d.pick(TECHNIQUES),
            d.pick(MOODS)
        );
        if keywords.len() >= 2 {
            let picked = d.pick_distinct(&keywords, 2);
            text.push_str(&format!(
                " The painting borrows from {} and {} ideas in the way the background is treated.",
                picked[0].to_lowercase(),
                picked[1].to_lowercase()
            ));
        }
        text
    }

    fn critique(&self, ctx: &CallContext, prompt: &str, image: Option<&[u8]>) -> String {
        let mut h = Hasher::new(self.seed, "critique").ctx(ctx).part(prompt.as_bytes());
        if let Some(img) = image {
            h = h.part(img);
        }
        let mut d = h.finish();
        let positive = d.unit() < self.config.positive_rate;
        let opener = if image.is_some() {
            "Looking at the painting next to the description,"
        } else {
            "Going by the description alone,"
        };
        let aspect = d.pick(ASPECTS);
        let lexicon = if positive {
            &self.config.positive_lexicon
        } else {
            &self.config.negative_lexicon
        };
        let words = d.pick_distinct(lexicon, 3);
        let word = |i: usize| words.get(i).map(String::as_str).unwrap_or("");
        if positive {
            format!(
                "{opener} the student conveyed the intention. The {aspect} reads as {} and {}, and overall the piece is {}. Keep going in this direction.",
                word(0), word(1), word(2)
            )
        } else {
            format!(
                "{opener} the student did not convey the intention. The {aspect} reads as {} and {}, and overall the piece is {}. Try a different approach next time.",
                word(0), word(1), word(2)
            )
        }
    }

    fn reflection(&self, ctx: &CallContext, prompt: &str) -> String {
        let mut d = Hasher::new(self.seed, "reflection")
            .ctx(ctx)
            .part(prompt.as_bytes())
            .finish();
        let picked = d.pick_distinct(ACTIONS, 2);
        format!(
            "I appreciate the feedback from my teacher. Next I will {} and {}, so that my next painting says more clearly what I feel.",
            picked[0], picked[1]
        )
    }

    fn keywords(&self, prompt: &str) -> String {
        let description = prompt
            .rsplit_once("Painting description:")
            .map(|(_, d)| d)
            .unwrap_or(prompt);
        let mut d = Hasher::new(self.seed, "keywords").part(description.as_bytes()).finish();
        let mut candidates: Vec<String> = Vec::new();
        for w in tokens(description) {
            if w.chars().count() >= 5 && !STOPWORDS.contains(&w.as_str()) && !candidates.contains(&w) {
                candidates.push(w);
            }
        }
        let mut picked: Vec<String> = d.pick_distinct(&candidates, 3).iter().map(|w| capitalize(w)).collect();
        for fallback in FALLBACK_KEYWORDS {
            if picked.len() == 3 {
                break;
            }
            if !picked.iter().any(|p| p == fallback) {
                picked.push(fallback.to_string());
            }
        }
        picked.join(", ")
    }

    fn grading(&self, ctx: &CallContext, prompt: &str) -> String {
        let mut d = Hasher::new(self.seed, "grading")
            .ctx(ctx)
            .part(prompt.as_bytes())
            .finish();
        let n: usize = prompt
            .strip_prefix("These are ")
            .and_then(|rest| rest.split_whitespace().next())
            .and_then(|n| n.parse().ok())
            .unwrap_or(0);
        let mut out = Vec::new();
        for i in 1..=n {
            if d.unit() < 1.0 / 15.0 {
                out.push(format!(
                    "Painting {i}: The description talks about the student's plans rather than a painting, so I cannot give it a score."
                ));
                continue;
            }
            let score = 3.0 + 0.5 * (d.unit() * 14.0).floor();
            out.push(format!(
                "Painting {i}: The {} shows some promise. Score: {score:.1}/10",
                d.pick(ASPECTS)
            ));
        }
        out.join("\n")
    }
}

/// Keywords listed in a rendered domain description, if any.
fn domain_keywords(prompt: &str) -> Vec<String> {
    let Some((_, rest)) = prompt.split_once(KEYWORD_LEAD) else {
        return Vec::new();
    };
    let list = match rest.find(". ") {
        Some(i) => &rest[..i],
        None => rest.trim_end_matches('.'),
    };
    list.split([';', ','])
        .map(|k| k.trim().to_string())
        .filter(|k| !k.is_empty())
        .collect()
}

impl TextGenerator for MockBackend {
    fn generate(&self, ctx: &CallContext, prompt: &str) -> Result<Reply<String>, ProviderError> {
        let text = match ctx.template {
            Some(TemplateId::ArtCreation) => self.art_prompt(ctx, prompt),
            Some(TemplateId::Reflection) => self.reflection(ctx, prompt),
            Some(TemplateId::KeywordExtraction) => self.keywords(prompt),
            Some(TemplateId::Grading) => self.grading(ctx, prompt),
            Some(TemplateId::Critique) => self.critique(ctx, prompt, None),
            None => format!("Noted: {}", first_sentence(prompt)),
        };
        Ok(Reply::immediate(text))
    }
}

impl MultimodalGenerator for MockBackend {
    fn generate(&self, ctx: &CallContext, prompt: &str, image: Option<&[u8]>) -> Result<Reply<String>, ProviderError> {
        let text = match ctx.template {
            Some(TemplateId::Grading) => self.grading(ctx, prompt),
            _ => self.critique(ctx, prompt, image),
        };
        Ok(Reply::immediate(text))
    }
}

impl TextToImage for MockBackend {
    /// An 8×8 RGB PNG whose pixels are a digest of the prompt.
    fn generate(&self, _ctx: &CallContext, prompt: &str) -> Result<Reply<Vec<u8>>, ProviderError> {
        let mut d = Hasher::new(self.seed, "image").part(prompt.as_bytes()).finish();
        let mut pixels = Vec::with_capacity(8 * 8 * 3);
        while pixels.len() < 8 * 8 * 3 {
            pixels.extend_from_slice(&d.next_u64().to_le_bytes());
        }
        pixels.truncate(8 * 8 * 3);
        let img = image::RgbImage::from_raw(8, 8, pixels).expect("buffer sized for 8x8");
        let mut out = std::io::Cursor::new(Vec::new());
        img.write_to(&mut out, image::ImageFormat::Png)
            .map_err(|e| ProviderError::ImageDecode(e.to_string()))?;
        Ok(Reply::immediate(out.into_inner()))
    }
}

impl SentimentClassifier for MockBackend {
    fn classify(&self, _ctx: &CallContext, text: &str) -> Result<Reply<Sentiment>, ProviderError> {
        Ok(Reply::immediate(self.lexicon_sentiment(text)))
    }
}

impl Summarizer for MockBackend {
    /// A single short entry comes back verbatim; otherwise the first
    /// sentence of each entry, joined and cut to the budget.
    fn summarize(&self, _ctx: &CallContext, texts: &[String], budget: usize) -> Result<Reply<String>, ProviderError> {
        if let [only] = texts {
            if only.chars().count() <= budget {
                return Ok(Reply::immediate(only.clone()));
            }
        }
        let joined = texts
            .iter()
            .map(|t| first_sentence(t))
            .filter(|s| !s.is_empty())
            .collect::<Vec<_>>()
            .join(" ");
        Ok(Reply::immediate(truncate_chars(&joined, budget)))
    }
}

impl SentenceEmbedder for MockBackend {
    /// Seeded random projection of character trigram counts.
    fn embed(&self, _ctx: &CallContext, text: &str) -> Result<Reply<Vec<f64>>, ProviderError> {
        let dim = self.config.embedding_dim;
        let chars: Vec<char> = format!("  {}  ", text.to_lowercase()).chars().collect();
        let mut counts: std::collections::BTreeMap<String, u32> = std::collections::BTreeMap::new();
        for w in chars.windows(3) {
            *counts.entry(w.iter().collect()).or_default() += 1;
        }
        let mut v = vec![0.0f64; dim];
        for (gram, count) in counts {
            let d = Hasher::new(self.seed, "ngram").part(gram.as_bytes()).finish();
            let mut rng = ChaCha8Rng::from_seed(d.bytes);
            for x in v.iter_mut() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *x += f64::from(count) * z;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        Ok(Reply::immediate(v))
    }
}
