//! Pairwise cosine similarity of an agent's art prompts.

use serde::Serialize;

use super::AnalysisError;
use crate::parallel::ordered_map;
use crate::providers::{CallContext, ProviderSuite};

/// Symmetric matrix of raw cosine similarities.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimilarityMatrix {
    pub agent: String,
    pub values: Vec<Vec<f64>>,
}

/// Mean and population standard deviation over the strict upper triangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimilaritySummary {
    pub pairs: usize,
    pub mean: f64,
    pub std: f64,
    pub mean_clamped: f64,
    pub std_clamped: f64,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

impl SimilarityMatrix {
    /// Cosine similarities of already-embedded prompts. Only the upper
    /// triangle is computed; the lower one is mirrored.
    pub fn from_embeddings(agent: impl Into<String>, embeddings: &[Vec<f64>]) -> Self {
        let n = embeddings.len();
        let mut values = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i..n {
                let c = cosine(&embeddings[i], &embeddings[j]);
                values[i][j] = c;
                values[j][i] = c;
            }
        }
        SimilarityMatrix {
            agent: agent.into(),
            values,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Entries clamped to [0, 1].
    pub fn clamped(&self) -> Vec<Vec<f64>> {
        self.values
            .iter()
            .map(|r| r.iter().map(|v| v.clamp(0.0, 1.0)).collect())
            .collect()
    }

    pub fn summary(&self) -> SimilaritySummary {
        let mut raw = Vec::new();
        for i in 0..self.len() {
            for j in i + 1..self.len() {
                raw.push(self.values[i][j]);
            }
        }
        let clamped: Vec<f64> = raw.iter().map(|v| v.clamp(0.0, 1.0)).collect();
        let (mean, std) = mean_std(&raw);
        let (mean_clamped, std_clamped) = mean_std(&clamped);
        SimilaritySummary {
            pairs: raw.len(),
            mean,
            std,
            mean_clamped,
            std_clamped,
        }
    }

    /// Comma-separated rows, full precision.
    pub fn to_csv(&self, clamp: bool) -> String {
        let rows = if clamp { self.clamped() } else { self.values.clone() };
        let mut out = String::new();
        for r in rows {
            let cells: Vec<String> = r.iter().map(|v| format!("{v}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

/// Embed every prompt (concurrently, at most `max_in_flight` at once) and
/// build the matrix.
pub fn similarity_matrix(
    agent: &str,
    prompts: &[String],
    suite: &ProviderSuite,
    max_in_flight: usize,
) -> Result<SimilarityMatrix, AnalysisError> {
    if prompts.len() < 2 {
        return Err(AnalysisError::TooFewPrompts {
            agent: agent.to_string(),
            found: prompts.len(),
        });
    }
    let embeddings = ordered_map(prompts, max_in_flight, |i, p| {
        suite.embed(&CallContext::new(i as u64, -1, agent), p).map(|r| r.value)
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    Ok(SimilarityMatrix::from_embeddings(agent, &embeddings))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::MockConfig;

    #[test]
    fn identical_prompts_give_all_ones() {
        let suite = ProviderSuite::mock(3, &MockConfig::default());
        let p = vec!["A quiet lake.".to_string(); 2];
        let m = similarity_matrix("a", &p, &suite, 2).unwrap();
        for r in &m.values {
            for v in r {
                assert!((v - 1.0).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn needs_two_prompts() {
        let suite = ProviderSuite::mock(3, &MockConfig::default());
        assert!(matches!(
            similarity_matrix("a", &["x".into()], &suite, 1),
            Err(AnalysisError::TooFewPrompts { found: 1, .. })
        ));
    }

    #[test]
    fn summary_uses_population_std() {
        let m = SimilarityMatrix {
            agent: "a".into(),
            values: vec![vec![1.0, 0.2, -0.4], vec![0.2, 1.0, 0.6], vec![-0.4, 0.6, 1.0]],
        };
        let s = m.summary();
        assert_eq!(s.pairs, 3);
        assert!((s.mean - 0.4 / 3.0).abs() < 1e-12);
        let var = [0.2f64, -0.4, 0.6].iter().map(|x| (x - 0.4 / 3.0).powi(2)).sum::<f64>() / 3.0;
        assert!((s.std - var.sqrt()).abs() < 1e-12);
        assert!((s.mean_clamped - 0.8 / 3.0).abs() < 1e-12);
    }
}
