//! Barnard's unconditional exact test for a 2×2 table.
//!
//! Rows are the two groups, columns are (successes, failures). The p-value
//! is the probability, maximized over a grid of the common success rate
//! `π`, of all outcome tables whose statistic is at least as extreme as the
//! observed one.

use serde::Serialize;
use thiserror::Error;

/// Slack when comparing statistics, so that tables tied with the observed
/// one are not lost to rounding.
const TIE_EPS: f64 = 1e-9;

pub const DEFAULT_GRID: usize = 1001;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Alternative {
    /// Group 1's success rate exceeds group 2's.
    Greater,
    Less,
    TwoSided,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Statistic {
    /// Unpooled variance.
    Wald,
    /// Pooled variance.
    Score,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BarnardOptions {
    pub alternative: Alternative,
    pub statistic: Statistic,
    pub grid: usize,
}

impl Default for BarnardOptions {
    fn default() -> Self {
        BarnardOptions {
            alternative: Alternative::Greater,
            statistic: Statistic::Wald,
            grid: DEFAULT_GRID,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BarnardResult {
    pub p_value: f64,
    /// Observed statistic.
    pub statistic: f64,
    /// Grid value of `π` attaining the maximum.
    pub nuisance: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BarnardError {
    #[error("degenerate table {0:?}: every row and column needs a positive total")]
    DegenerateTable([[u64; 2]; 2]),
    #[error("nuisance grid needs at least 2 points, got {0}")]
    Grid(usize),
}

/// Test statistic for `x1` of `n1` against `x2` of `n2`. A zero variance
/// gives 0 when the proportions agree and ±∞ otherwise.
pub fn statistic(kind: Statistic, x1: u64, n1: u64, x2: u64, n2: u64) -> f64 {
    let (n1f, n2f) = (n1 as f64, n2 as f64);
    let (p1, p2) = (x1 as f64 / n1f, x2 as f64 / n2f);
    let diff = p1 - p2;
    let var = match kind {
        Statistic::Wald => p1 * (1.0 - p1) / n1f + p2 * (1.0 - p2) / n2f,
        Statistic::Score => {
            let p = (x1 + x2) as f64 / (n1f + n2f);
            p * (1.0 - p) * (1.0 / n1f + 1.0 / n2f)
        }
    };
    if var <= 0.0 {
        if diff == 0.0 {
            0.0
        } else {
            diff.signum() * f64::INFINITY
        }
    } else {
        diff / var.sqrt()
    }
}

/// Everything that depends only on the group sizes and the statistic, so
/// many tables with the same margins can share it.
#[derive(Debug, Clone)]
pub struct Design {
    n1: u64,
    n2: u64,
    /// `stat[i * (n2 + 1) + j]` for outcome (i, j).
    stat: Vec<f64>,
    ln_fact: Vec<f64>,
}

impl Design {
    pub fn new(n1: u64, n2: u64, kind: Statistic) -> Self {
        let mut stat = Vec::with_capacity(((n1 + 1) * (n2 + 1)) as usize);
        for i in 0..=n1 {
            for j in 0..=n2 {
                stat.push(statistic(kind, i, n1, j, n2));
            }
        }
        let mut ln_fact = vec![0.0; (n1.max(n2) + 1) as usize];
        for k in 1..ln_fact.len() {
            ln_fact[k] = ln_fact[k - 1] + (k as f64).ln();
        }
        Design { n1, n2, stat, ln_fact }
    }

    fn extreme(&self, t: f64, observed: f64, alternative: Alternative) -> bool {
        match alternative {
            Alternative::Greater => t >= observed - TIE_EPS,
            Alternative::Less => t <= observed + TIE_EPS,
            Alternative::TwoSided => t.abs() >= observed.abs() - TIE_EPS,
        }
    }

    /// For each `i`, the maximal runs `[a, b)` of `j` that are at least as
    /// extreme as the observed table.
    fn runs(&self, observed: f64, alternative: Alternative) -> Vec<Vec<(usize, usize)>> {
        let w = (self.n2 + 1) as usize;
        (0..=self.n1 as usize)
            .map(|i| {
                let row = &self.stat[i * w..(i + 1) * w];
                let mut runs = Vec::new();
                let mut start = None;
                for (j, &t) in row.iter().enumerate() {
                    match (self.extreme(t, observed, alternative), start) {
                        (true, None) => start = Some(j),
                        (false, Some(a)) => {
                            runs.push((a, j));
                            start = None;
                        }
                        _ => {}
                    }
                }
                if let Some(a) = start {
                    runs.push((a, w));
                }
                runs
            })
            .collect()
    }

    /// Binomial(n, π) probabilities, computed in log space.
    fn pmf(&self, n: u64, pi: f64) -> Vec<f64> {
        let n_us = n as usize;
        if pi <= 0.0 || pi >= 1.0 {
            let mut v = vec![0.0; n_us + 1];
            v[if pi <= 0.0 { 0 } else { n_us }] = 1.0;
            return v;
        }
        let (lp, lq) = (pi.ln(), (1.0 - pi).ln());
        (0..=n_us)
            .map(|k| {
                let ln_c = self.ln_fact[n_us] - self.ln_fact[k] - self.ln_fact[n_us - k];
                (ln_c + k as f64 * lp + (n_us - k) as f64 * lq).exp()
            })
            .collect()
    }

    pub fn p_value(&self, x1: u64, x2: u64, alternative: Alternative, grid: usize) -> BarnardResult {
        let observed = self.stat[(x1 * (self.n2 + 1) + x2) as usize];
        let runs = self.runs(observed, alternative);
        let mut best = (f64::NEG_INFINITY, 0.0);
        let mut prefix = vec![0.0; self.n2 as usize + 2];
        for g in 0..grid {
            let pi = g as f64 / (grid - 1) as f64;
            let pmf1 = self.pmf(self.n1, pi);
            let pmf2 = self.pmf(self.n2, pi);
            for (j, p) in pmf2.iter().enumerate() {
                prefix[j + 1] = prefix[j] + p;
            }
            let mut total = 0.0;
            for (i, row) in runs.iter().enumerate() {
                if row.is_empty() || pmf1[i] == 0.0 {
                    continue;
                }
                let mass: f64 = row.iter().map(|&(a, b)| prefix[b] - prefix[a]).sum();
                total += pmf1[i] * mass;
            }
            if total > best.0 {
                best = (total, pi);
            }
        }
        BarnardResult {
            p_value: best.0.clamp(0.0, 1.0),
            statistic: observed,
            nuisance: best.1,
        }
    }
}

/// Barnard's test on `[[x1, n1 - x1], [x2, n2 - x2]]`.
pub fn barnard_exact(table: [[u64; 2]; 2], options: BarnardOptions) -> Result<BarnardResult, BarnardError> {
    let [[a, b], [c, d]] = table;
    if a + b == 0 || c + d == 0 || a + c == 0 || b + d == 0 {
        return Err(BarnardError::DegenerateTable(table));
    }
    if options.grid < 2 {
        return Err(BarnardError::Grid(options.grid));
    }
    let design = Design::new(a + b, c + d, options.statistic);
    Ok(design.p_value(a, c, options.alternative, options.grid))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_proportions_two_sided_is_one() {
        let opts = BarnardOptions {
            alternative: Alternative::TwoSided,
            ..Default::default()
        };
        let r = barnard_exact([[10, 10], [10, 10]], opts).unwrap();
        assert!((r.p_value - 1.0).abs() < 1e-12, "{}", r.p_value);
    }

    #[test]
    fn degenerate_tables_rejected() {
        let opts = BarnardOptions::default();
        assert!(barnard_exact([[0, 0], [3, 4]], opts).is_err());
        assert!(barnard_exact([[0, 5], [0, 4]], opts).is_err());
        assert!(barnard_exact([[5, 0], [4, 0]], opts).is_err());
    }

    #[test]
    fn statistic_edge_cases() {
        assert_eq!(statistic(Statistic::Wald, 0, 5, 0, 7), 0.0);
        assert_eq!(statistic(Statistic::Wald, 5, 5, 0, 7), f64::INFINITY);
        assert_eq!(statistic(Statistic::Wald, 0, 5, 7, 7), f64::NEG_INFINITY);
        assert!(statistic(Statistic::Score, 5, 5, 0, 7).is_finite());
    }

    #[test]
    fn one_sided_directions_are_mirrors() {
        let g = barnard_exact(
            [[7, 12], [8, 3]],
            BarnardOptions {
                alternative: Alternative::Greater,
                ..Default::default()
            },
        )
        .unwrap();
        let l = barnard_exact(
            [[8, 3], [7, 12]],
            BarnardOptions {
                alternative: Alternative::Less,
                ..Default::default()
            },
        )
        .unwrap();
        assert!((g.p_value - l.p_value).abs() < 1e-12);
    }

    #[test]
    fn strong_effect_is_significant() {
        let r = barnard_exact([[18, 2], [4, 16]], BarnardOptions::default()).unwrap();
        assert!(r.p_value < 1e-4);
    }
}
