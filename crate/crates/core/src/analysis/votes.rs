//! Vote aggregation per group and time-step bucket.
//!
//! Input is CSV with a header `group,time_step,votes`; repeated
//! (group, time_step) rows are summed.

use std::collections::BTreeMap;

use serde::Serialize;

use super::AnalysisError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GroupVotes {
    pub group: String,
    /// (time_step, votes), ascending by time step.
    pub buckets: Vec<(i64, u64)>,
    pub total: u64,
    /// Votes for the first `⌊k/2⌋` buckets.
    pub first_half: u64,
    pub second_half: u64,
}

impl GroupVotes {
    pub fn new(group: impl Into<String>, buckets: Vec<(i64, u64)>) -> Self {
        let mut buckets = buckets;
        buckets.sort_by_key(|b| b.0);
        let split = buckets.len() / 2;
        let first_half = buckets[..split].iter().map(|b| b.1).sum();
        let second_half = buckets[split..].iter().map(|b| b.1).sum();
        GroupVotes {
            group: group.into(),
            total: first_half + second_half,
            buckets,
            first_half,
            second_half,
        }
    }

    /// Second-half votes over all votes, as `(numerator, denominator)`.
    pub fn second_half_share(&self) -> (u64, u64) {
        (self.second_half, self.total)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VoteReport {
    pub groups: Vec<GroupVotes>,
    pub total: u64,
}

impl VoteReport {
    pub fn from_counts(counts: &BTreeMap<String, BTreeMap<i64, u64>>) -> Self {
        let groups: Vec<GroupVotes> = counts
            .iter()
            .map(|(g, b)| GroupVotes::new(g.clone(), b.iter().map(|(&s, &v)| (s, v)).collect()))
            .collect();
        let total = groups.iter().map(|g| g.total).sum();
        VoteReport { groups, total }
    }

    pub fn group(&self, name: &str) -> Option<&GroupVotes> {
        self.groups.iter().find(|g| g.group == name)
    }

    /// `[[later, earlier] for a], [[later, earlier] for b]`: the 2×2 table
    /// comparing how two groups' votes lean towards later time steps.
    pub fn later_vs_earlier(&self, a: &str, b: &str) -> Option<[[u64; 2]; 2]> {
        let (ga, gb) = (self.group(a)?, self.group(b)?);
        Some([[ga.second_half, ga.first_half], [gb.second_half, gb.first_half]])
    }
}

pub fn parse_votes_csv(text: &str) -> Result<BTreeMap<String, BTreeMap<i64, u64>>, AnalysisError> {
    let mut out: BTreeMap<String, BTreeMap<i64, u64>> = BTreeMap::new();
    let bad = |line: usize, message: String| AnalysisError::BadVotes { line, message };
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, header)) if header.split(',').map(str::trim).eq(["group", "time_step", "votes"]) => {}
        Some((i, other)) => {
            return Err(bad(
                i + 1,
                format!("expected header group,time_step,votes, got {other:?}"),
            ))
        }
        None => return Ok(out),
    }
    for (i, line) in lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let [group, step, votes] = fields[..] else {
            return Err(bad(i + 1, format!("expected 3 fields, got {}", fields.len())));
        };
        let step: i64 = step
            .parse()
            .map_err(|e| bad(i + 1, format!("time_step {step:?}: {e}")))?;
        let votes: u64 = votes.parse().map_err(|e| bad(i + 1, format!("votes {votes:?}: {e}")))?;
        *out.entry(group.to_string()).or_default().entry(step).or_default() += votes;
    }
    Ok(out)
}

pub fn vote_summary(text: &str) -> Result<VoteReport, AnalysisError> {
    Ok(VoteReport::from_counts(&parse_votes_csv(text)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn csv(groups: &[(&str, [u64; 4])]) -> String {
        let mut s = String::from("group,time_step,votes\n");
        for (g, v) in groups {
            for (step, n) in [1, 5, 10, 15].iter().zip(v) {
                s.push_str(&format!("{g},{step},{n}\n"));
            }
        }
        s
    }

    #[test]
    fn filtered_in_system_share() {
        let r = vote_summary(&csv(&[("in-system", [99, 103, 158, 120])])).unwrap();
        assert_eq!(r.group("in-system").unwrap().second_half_share(), (278, 480));
    }

    #[test]
    fn zero_counts() {
        let r = vote_summary(&csv(&[("a", [0, 0, 0, 0])])).unwrap();
        assert_eq!((r.total, r.groups[0].first_half, r.groups[0].second_half), (0, 0, 0));
    }

    #[test]
    fn bad_rows_reported_with_line() {
        assert!(matches!(
            vote_summary("group,time_step,votes\na,1\n"),
            Err(AnalysisError::BadVotes { line: 2, .. })
        ));
        assert!(matches!(
            vote_summary("g,t,v\n"),
            Err(AnalysisError::BadVotes { line: 1, .. })
        ));
        assert!(matches!(
            vote_summary("group,time_step,votes\na,1,-3\n"),
            Err(AnalysisError::BadVotes { .. })
        ));
    }

    #[test]
    fn table_orientation() {
        let r = vote_summary(&csv(&[
            ("in-system", [99, 103, 158, 120]),
            ("isolated", [119, 103, 134, 124]),
        ]))
        .unwrap();
        assert_eq!(
            r.later_vs_earlier("in-system", "isolated"),
            Some([[278, 202], [258, 222]])
        );
    }
}
