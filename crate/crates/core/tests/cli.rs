use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use serde_json::Value;

use creasim::cli::main_with;
use creasim::providers::http::{HttpReply, HttpRequest, Transport};

/// Refuses and counts every request.
#[derive(Default)]
struct Guard(AtomicUsize);

impl Transport for Guard {
    fn post(&self, request: &HttpRequest) -> Result<HttpReply, String> {
        self.0.fetch_add(1, Ordering::SeqCst);
        Err(format!("network access denied: {}", request.url))
    }
}

struct Output {
    code: i32,
    out: String,
    err: String,
}

impl Output {
    fn error(&self) -> Value {
        serde_json::from_str(self.err.lines().last().expect("error line")).expect("error line is JSON")
    }
}

fn call_with(guard: &Arc<Guard>, args: &[&str]) -> Output {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("creasim").chain(args.iter().copied()).map(String::from);
    let code = main_with(argv, guard.clone(), &mut out, &mut err);
    Output {
        code,
        out: String::from_utf8(out).unwrap(),
        err: String::from_utf8(err).unwrap(),
    }
}

fn call(args: &[&str]) -> Output {
    call_with(&Arc::new(Guard::default()), args)
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                if p.file_name().unwrap() != "analysis" {
                    stack.push(p);
                }
            } else {
                files.insert(
                    p.strip_prefix(dir).unwrap().display().to_string(),
                    std::fs::read(&p).unwrap(),
                );
            }
        }
    }
    files
}

#[test]
fn mock_run_and_analysis_stay_offline() {
    let guard = Arc::new(Guard::default());
    let tmp = tempfile::tempdir().unwrap();
    let run = tmp.path().join("run");
    let run_s = run.to_str().unwrap();

    let o = call_with(
        &guard,
        &["run", "preset:school", "--out", run_s, "--mock", "--seed", "1"],
    );
    assert_eq!(o.code, 0, "{}", o.err);
    assert!(
        o.out.starts_with("15 steps completed, 30 artworks created; top 3: "),
        "{}",
        o.out
    );

    let before = snapshot(&run);
    let o = call_with(&guard, &["analyze-similarity", run_s, "--mock"]);
    assert_eq!(o.code, 0, "{}", o.err);
    for agent in ["artist-boy", "artist-person"] {
        let csv = std::fs::read_to_string(run.join(format!("analysis/similarity/{agent}.csv"))).unwrap();
        let rows: Vec<&str> = csv.lines().collect();
        assert_eq!(rows.len(), 15);
        assert!(rows.iter().all(|r| r.split(',').count() == 15));
        assert!(run.join(format!("analysis/similarity/{agent}.png")).exists());
    }

    let o = call_with(&guard, &["grade", run_s, "--invoke", "--mock"]);
    assert_eq!(o.code, 0, "{}", o.err);
    assert!(o.out.contains("artist-boy: lowest "));
    assert_eq!(call_with(&guard, &["export", run_s]).code, 0);
    assert_eq!(snapshot(&run), before, "analysis must not modify run data");

    // Repeating the analysis gives the same files.
    let first = std::fs::read(run.join("analysis/similarity/summary.json")).unwrap();
    assert_eq!(call_with(&guard, &["analyze-similarity", run_s, "--mock"]).code, 0);
    assert_eq!(
        std::fs::read(run.join("analysis/similarity/summary.json")).unwrap(),
        first
    );

    assert_eq!(guard.0.load(Ordering::SeqCst), 0);
}

#[test]
fn missing_config_exits_not_found() {
    let o = call(&[
        "run",
        "/definitely/not/here.toml",
        "--out",
        "/tmp/unused-creasim",
        "--mock",
    ]);
    assert_eq!(o.code, 3);
    assert_eq!(o.error()["error"], "not-found");
    assert_eq!(call(&["validate", "preset:nope"]).code, 3);
}

#[test]
fn invalid_config_exits_4() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bad.toml");
    let mut c = creasim::presets::school();
    c.iterations = 0;
    std::fs::write(&path, c.to_toml()).unwrap();
    let o = call(&["validate", path.to_str().unwrap()]);
    assert_eq!(o.code, 4);
    assert_eq!(o.error()["exit"], 4);
}

#[test]
fn live_run_without_credentials_names_the_variable() {
    let tmp = tempfile::tempdir().unwrap();
    let guard = Arc::new(Guard::default());
    let tmp_s = tmp.path().join("run");
    // The school preset's remote section reads GEMINI_API_KEY first.
    if std::env::var_os("GEMINI_API_KEY").is_some() {
        return;
    }
    let o = call_with(
        &guard,
        &["run", "preset:school", "--out", tmp_s.to_str().unwrap(), "--live"],
    );
    assert_eq!(o.code, 8);
    assert_eq!(o.error()["error"], "missing-credential");
    assert!(o.error()["message"].as_str().unwrap().contains("GEMINI_API_KEY"));
    assert_eq!(guard.0.load(Ordering::SeqCst), 0);
}

#[test]
fn analysis_of_unfinished_run_is_incomplete() {
    let tmp = tempfile::tempdir().unwrap();
    let run = tmp.path().join("run");
    let run_s = run.to_str().unwrap();
    assert_eq!(
        call(&[
            "run",
            "preset:art-industry",
            "--out",
            run_s,
            "--mock",
            "--stop-after",
            "1"
        ])
        .code,
        0
    );
    let o = call(&["analyze-similarity", run_s]);
    assert_eq!(o.code, 7);
    assert_eq!(o.error()["error"], "incomplete-run");

    let o = call(&["resume", run_s]);
    assert_eq!(o.code, 0, "{}", o.err);
    assert!(o.out.starts_with("resumed after step 1"));

    // Closed now, but no grader transcript yet.
    let o = call(&["grade", run_s]);
    assert_eq!(o.code, 7);
    assert!(o.error()["message"].as_str().unwrap().contains("grader output"));

    assert_eq!(call(&["resume", tmp.path().join("nothing").to_str().unwrap()]).code, 3);
}

#[test]
fn corrupt_log_exits_6() {
    let tmp = tempfile::tempdir().unwrap();
    let run = tmp.path().join("run");
    let run_s = run.to_str().unwrap();
    assert_eq!(
        call(&[
            "run",
            "preset:art-industry",
            "--out",
            run_s,
            "--mock",
            "--stop-after",
            "0"
        ])
        .code,
        0
    );
    let log = run.join("run.jsonl");
    let text = std::fs::read_to_string(&log).unwrap();
    std::fs::write(&log, text.replacen("\"schema_version\":1", "\"schema_version\":99", 1)).unwrap();
    let o = call(&["resume", run_s]);
    assert_eq!(o.code, 6);
    assert_eq!(o.error()["error"], "schema-mismatch");
}

#[test]
fn barnard_and_votes() {
    let o = call(&["barnard", "278", "202", "258", "222"]);
    assert_eq!(o.code, 0);
    let fields: Vec<&str> = o.out.split_whitespace().collect();
    assert_eq!(fields[0], "p-value");
    let p: f64 = fields[1].parse().unwrap();
    assert!(p > 0.05 && p < 1.0);
    assert_eq!(fields[2], "statistic");

    let o = call(&["barnard", "10", "10", "10", "10", "--alternative", "two-sided"]);
    assert!(o.out.starts_with("p-value 1.000000"), "{}", o.out);

    assert_eq!(call(&["barnard", "1", "2", "x", "4"]).code, 2);
    assert_eq!(call(&["barnard", "0", "5", "0", "4"]).code, 4);

    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("votes.csv");
    let mut text = String::from("group,time_step,votes\n");
    for (g, counts) in [("in-system", [99, 103, 158, 120]), ("isolated", [119, 103, 134, 124])] {
        for (t, v) in [1, 5, 10, 15].iter().zip(counts) {
            text.push_str(&format!("{g},{t},{v}\n"));
        }
    }
    std::fs::write(&csv, text).unwrap();
    let o = call(&["votes", csv.to_str().unwrap(), "--compare", "in-system", "isolated"]);
    assert_eq!(o.code, 0, "{}", o.err);
    assert!(o.out.contains("share 278/480"));
    assert!(o.out.contains("[[278, 202], [258, 222]]"));
    assert_eq!(
        call(&["votes", csv.to_str().unwrap(), "--compare", "in-system", "nobody"]).code,
        2
    );

    std::fs::write(&csv, "group,time_step,votes\na,1,lots\n").unwrap();
    assert_eq!(call(&["votes", csv.to_str().unwrap()]).code, 4);
}

#[test]
fn help_exits_zero() {
    let o = call(&["--help"]);
    assert_eq!(o.code, 0);
    assert!(o.out.contains("analyze-similarity"));
}
