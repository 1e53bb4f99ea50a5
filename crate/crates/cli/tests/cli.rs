use std::path::{Path, PathBuf};

use msgen_cli::run_cli;

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn msgen(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run_cli(std::iter::once("msgen").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn run_scenario(scenario: &str, out: &Path, extra: &[&str]) -> (i32, String, String) {
    let scripted = fixtures().join("scripted");
    let story = fixtures().join(format!("stories/{scenario}.json"));
    let mut args = vec!["--fixtures", p(&scripted), "--fixed-clock"];
    args.extend_from_slice(extra);
    args.extend(["run", p(&story), "--out", p(out)]);
    msgen(&args)
}

#[test]
fn demo_run_writes_outputs_and_prints_score() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out, err) = run_scenario("demo", dir.path(), &[]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(out, "10.000\n");
    for name in ["manuscript.tex", "run.journal.jsonl", "score.json"] {
        assert!(dir.path().join(name).is_file(), "{name}");
    }
    let score: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("score.json")).unwrap()).unwrap();
    assert_eq!(score["aggregate"], 10.0);
    assert_eq!(score["dimensions"].as_object().unwrap().len(), 8);
}

#[test]
fn config_file_drives_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let config = fixtures().join("demo.toml");
    let story = fixtures().join("stories/demo.json");
    let (code, _, err) = msgen(&["--config", p(&config), "run", p(&story), "--out", p(dir.path())]);
    assert_eq!(code, 0, "{err}");
}

#[test]
fn validation_failures_exit_1() {
    for (scenario, needle) in [
        ("unplaced", "fig:ablation"),
        ("stuck", "MissingVisualMarker"),
        ("dupsections", "duplicated"),
        ("rogue", "fig:zzz"),
    ] {
        let dir = tempfile::tempdir().unwrap();
        let (code, out, err) = run_scenario(scenario, dir.path(), &[]);
        assert_eq!(code, 1, "{scenario}: {err}");
        assert!(out.is_empty());
        assert!(err.contains(needle), "{scenario}: {err}");
        assert!(dir.path().join("run.journal.jsonl").is_file(), "{scenario}: partial journal");
    }
}

#[test]
fn input_and_config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    assert_eq!(run_scenario("demo", dir.path(), &[]).0, 0);
    let (code, _, err) = msgen(&["--fixtures", "x", "run", p(&missing)]);
    assert_eq!(code, 2, "{err}");

    let bad_story = dir.path().join("bad.json");
    std::fs::write(&bad_story, r#"{"schema_version": 1, "id": "x"}"#).unwrap();
    let (code, _, err) = msgen(&["--fixtures", "x", "run", p(&bad_story)]);
    assert_eq!(code, 2);
    assert!(err.contains("schema"), "{err}");

    let bad_config = dir.path().join("bad.toml");
    std::fs::write(&bad_config, "max_adapt_iterations = 0\n").unwrap();
    let story = fixtures().join("stories/demo.json");
    assert_eq!(msgen(&["--config", p(&bad_config), "run", p(&story)]).0, 2);

    let token_config = dir.path().join("service.toml");
    std::fs::write(
        &token_config,
        "[backend]\nkind = \"service\"\nendpoint = \"http://127.0.0.1:9/\"\ntoken_env = \"MSGEN_CLI_TEST_UNSET_TOKEN\"\n",
    )
    .unwrap();
    let (code, _, err) = msgen(&["--config", p(&token_config), "run", p(&story)]);
    assert_eq!(code, 2, "{err}");
    assert!(err.contains("MSGEN_CLI_TEST_UNSET_TOKEN"));

    assert_eq!(msgen(&["run", p(&story)]).0, 2, "scripted backend without fixtures");

    let file_as_dir = dir.path().join("manuscript.tex");
    let (code, _, err) = run_scenario("demo", &file_as_dir, &[]);
    assert_eq!(code, 2, "unwritable output: {err}");

    assert_eq!(msgen(&["frobnicate"]).0, 2);
}

#[test]
fn backend_failures_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let story = fixtures().join("stories/demo.json");
    let empty = tempfile::tempdir().unwrap();
    let (code, _, err) = msgen(&["--fixtures", p(empty.path()), "run", p(&story), "--out", p(dir.path())]);
    assert_eq!(code, 3, "{err}");
    assert!(err.contains("architect.0.demo.json"));

    let garbage = tempfile::tempdir().unwrap();
    std::fs::write(garbage.path().join("architect.0.demo.json"), "{not json").unwrap();
    let (code, _, err) = msgen(&["--fixtures", p(garbage.path()), "run", p(&story), "--out", p(dir.path())]);
    assert_eq!(code, 3, "{err}");

    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let endpoint = format!("http://{}/agent", listener.local_addr().unwrap());
    drop(listener);
    let config = dir.path().join("service.toml");
    std::fs::write(
        &config,
        format!("[backend]\nkind = \"service\"\nendpoint = \"{endpoint}\"\nretries = 1\nbackoff_ms = 1\ntimeout_secs = 2\n"),
    )
    .unwrap();
    let (code, _, err) = msgen(&["--config", p(&config), "run", p(&story), "--out", p(dir.path())]);
    assert_eq!(code, 3, "{err}");
}

#[test]
fn validate_reports_violations() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run_scenario("demo", dir.path(), &[]).0, 0);
    let tex = dir.path().join("manuscript.tex");
    let contract = dir.path().join("manuscript.contract.json");
    assert_eq!(msgen(&["validate", p(&tex), p(&contract)]), (0, String::new(), String::new()));

    let dangling = dir.path().join("dangling.tex");
    let text = std::fs::read_to_string(&tex).unwrap();
    std::fs::write(&dangling, text.replace("\\end{document}", "See \\ref{fig:missing}.\n\\end{document}")).unwrap();
    let (code, out, _) = msgen(&["validate", p(&dangling), p(&contract)]);
    assert_eq!(code, 1);
    assert_eq!(out.lines().count(), 1, "{out}");
    let fields: Vec<&str> = out.trim_end().split('\t').collect();
    assert_eq!((fields[0], fields[2]), ("error", "ref_resolves"), "{out}");

    let broken = dir.path().join("broken.json");
    std::fs::write(&broken, "{\"version\": ").unwrap();
    assert_eq!(msgen(&["validate", p(&tex), p(&broken)]).0, 2);

    let unbalanced = dir.path().join("unbalanced.tex");
    std::fs::write(&unbalanced, text.replacen("\\end{figure}", "", 1)).unwrap();
    assert_eq!(msgen(&["validate", p(&unbalanced), p(&contract)]).0, 2);
}

#[test]
fn score_command() {
    let signals = fixtures().join("signals");
    let (code, out, _) = msgen(&["score", p(&signals.join("contract_backbones.json"))]);
    assert_eq!((code, out.as_str()), (0, "6.145\n"));
    let (code, out, _) = msgen(&[
        "score",
        p(&signals.join("direct_backbones.json")),
        "--compare",
        p(&signals.join("contract_backbones.json")),
    ]);
    assert_eq!((code, out.as_str()), (0, "3.963\n-2.182\n"));
    let (code, _, err) = msgen(&["score", p(&signals.join("empty.json"))]);
    assert_eq!(code, 2);
    assert!(err.contains("nothing to aggregate"), "{err}");

    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(signals.join("contract_backbones.json")).unwrap();
    let dup = dir.path().join("dup.json");
    std::fs::write(&dup, text.replace("writing_clarity", "structural_integrity")).unwrap();
    assert_eq!(msgen(&["score", p(&dup)]).0, 1);

    let weights = dir.path().join("weights.json");
    std::fs::write(&weights, r#"{"structural_integrity": 3, "writing_clarity": 1}"#).unwrap();
    let (code, out, _) = msgen(&["score", p(&signals.join("contract_backbones.json")), "--weights", p(&weights)]);
    // (3 * 5.962 + 6.153) / 4
    assert_eq!((code, out.as_str()), (0, "6.010\n"));
    std::fs::write(&weights, r#"{"structural_integrity": -1}"#).unwrap();
    assert_eq!(msgen(&["score", p(&signals.join("contract_backbones.json")), "--weights", p(&weights)]).0, 2);

    let out_of_range = dir.path().join("range.json");
    std::fs::write(&out_of_range, text.replace("5.962", "12.5")).unwrap();
    assert_eq!(msgen(&["score", p(&out_of_range)]).0, 2);
}

#[test]
fn journal_command() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run_scenario("demo", dir.path(), &[]).0, 0);
    let journal = dir.path().join("run.journal.jsonl");
    let (code, out, _) = msgen(&["journal", p(&journal), "--assert-monotone"]);
    assert_eq!(code, 0);
    let stages: Vec<&str> = out.lines().skip(1).map(|l| l.split_whitespace().nth(1).unwrap()).collect();
    assert!(stages.len() >= 6);
    assert_eq!(stages, ["architect", "write", "evaluate", "write", "evaluate", "refine", "evaluate", "render"]);

    let (_, out, _) = msgen(&["journal", p(&journal), "--stage", "write,render"]);
    assert_eq!(out.lines().count(), 4, "{out}");

    let corrupted = dir.path().join("corrupted.jsonl");
    let text = std::fs::read_to_string(&journal).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines[2] = "{\"seq\": 2, \"stage\": ";
    std::fs::write(&corrupted, lines.join("\n")).unwrap();
    let (code, _, err) = msgen(&["journal", p(&corrupted)]);
    assert_eq!(code, 2);
    assert!(err.contains("line 3"), "{err}");

    let rising = dir.path().join("rising.jsonl");
    let entries: Vec<String> = text
        .lines()
        .map(|l| {
            if l.contains("\"iteration\":0") && l.contains("\"stage\":\"evaluate\"") {
                l.replace("\"errors\":0", "\"errors\":2")
            } else {
                l.to_string()
            }
        })
        .collect();
    std::fs::write(&rising, entries.join("\n")).unwrap();
    let (code, _, err) = msgen(&["journal", p(&rising), "--assert-monotone"]);
    assert_eq!(code, 1, "{err}");
    assert!(err.contains("rises"), "{err}");
}

#[test]
fn corrective_journal_is_monotone() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run_scenario("corrective", dir.path(), &["--strict-sequential"]).0, 0);
    let (code, _, err) = msgen(&["journal", p(&dir.path().join("run.journal.jsonl")), "--assert-monotone"]);
    assert_eq!(code, 0, "{err}");
}

#[test]
fn init_prints_a_parseable_template() {
    let (code, out, _) = msgen(&["init"]);
    assert_eq!(code, 0);
    assert!(out.ends_with('\n'));
    let story = msgen_core::story::parse_story(out.as_bytes()).unwrap();
    assert_eq!(story.id, "my_story");
}

#[test]
fn help_goes_to_stdout() {
    let (code, out, err) = msgen(&["--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("validate") && err.is_empty());
}
