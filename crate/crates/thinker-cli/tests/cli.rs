//! End-to-end tests of the `thinker` binary: every subcommand, both failure
//! exit codes, and the file formats the commands read and write.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn thinker(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_thinker"))
        .args(args)
        .output()
        .expect("the binary was built by cargo")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

fn code(output: &Output) -> i32 {
    output.status.code().expect("the binary exits normally")
}

/// Scripted replies and a small corpus for "what is x/y/z" colour questions.
/// The engine forks the script per run, so one file serves eval datasets too.
struct Fixture {
    #[allow(dead_code)]
    dir: tempfile::TempDir,
    script: PathBuf,
    corpus: PathBuf,
}

fn decomposition(letter: &str) -> String {
    format!(
        "<answer>Step 1: lookup colour of {letter}\\nAction 1: \
         Retrieval(s=s1:thing[`{letter}'], p=p1:rel[`colour'], o=o1:colour)</answer>"
    )
}

fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("script.json");
    let corpus = dir.path().join("corpus.jsonl");
    let entries = format!(
        r#"[
  {{"match": "Question: what is x", "reply": "{x}"}},
  {{"match": "Question: what is y", "reply": "{y}"}},
  {{"match": "Question: what is z", "reply": "{z}"}},
  {{"match": "step by step", "reply": "<answer>\\boxed{{red}}</answer>",
    "token_probs": [["<answer>\\boxed{{", 0.99], ["red", 0.99], ["}}</answer>", 0.99]]}},
  {{"match": "is correct", "reply": "<answer>\\boxed{{True}}</answer>"}},
  {{"match": "analyze the relationship", "reply": "<answer>Yes</answer>"}},
  {{"match": "lookup colour of x", "reply": "<answer>\\boxed{{red}}</answer>"}},
  {{"match": "lookup colour of y", "reply": "<answer>\\boxed{{blue}}</answer>"}},
  {{"match": "lookup colour of z", "reply": "<answer>\\boxed{{wrong}}</answer>"}}
]"#,
        x = decomposition("x"),
        y = decomposition("y"),
        z = decomposition("z"),
    );
    std::fs::write(&script, entries).unwrap();
    std::fs::write(
        &corpus,
        "{\"id\": \"d1\", \"title\": \"colours\", \"text\": \"x is red, y is blue, z is green\"}\n",
    )
    .unwrap();
    Fixture { dir, script, corpus }
}

fn path_str(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn parse_prints_the_canonical_rendering() {
    let action =
        "Retrieval(s=s1:Movie[Men in Black], p=p1:DirectedBy, o=o1:Person, s.ReleaseYear=2002)";
    let output = thinker(&["parse", action]);
    assert_eq!(code(&output), 0, "{}", stderr(&output));
    assert_eq!(stdout(&output).trim(), action);

    // Layout noise normalizes away.
    let loose = "Retrieval( s = s1:Movie[Men in Black] ,p= p1:DirectedBy , o = o1:Person )";
    let output = thinker(&["parse", loose]);
    assert_eq!(code(&output), 0);
    assert_eq!(
        stdout(&output).trim(),
        "Retrieval(s=s1:Movie[Men in Black], p=p1:DirectedBy, o=o1:Person)"
    );
}

#[test]
fn parse_ast_flag_dumps_the_tree() {
    let output = thinker(&["parse", "--ast", "Output(o1, o2)"]);
    assert_eq!(code(&output), 0);
    let text = stdout(&output);
    assert!(text.starts_with("Output(o1, o2)"), "{text}");
    assert!(text.contains("Output"), "{text}");
    assert!(text.contains("o2"), "{text}");
}

#[test]
fn parse_failure_exits_one_with_a_caret() {
    let output = thinker(&["parse", "Retrieval(s=s1:film[`Mulholland Drive], p=p1)"]);
    assert_eq!(code(&output), 1);
    let err = stderr(&output);
    assert!(err.contains("parse failed"), "{err}");
    assert!(err.lines().any(|line| line.trim_end().ends_with('^')), "{err}");
}

#[test]
fn plan_prints_steps_and_dependencies() {
    let fx = fixture();
    let reply = "<answer>Step 1: lookup colour of x\\nAction 1: \
                 Retrieval(s=s1:thing[`x'], p=p1:rel[`colour'], o=o1:colour)\\n\
                 Step 2: report the colour found in #1\\nAction 2: Output(o1)</answer>";
    let script = fx.dir.path().join("plan.json");
    std::fs::write(&script, format!(r#"[{{"reply": "{reply}"}}]"#)).unwrap();

    let output = thinker(&["plan", "what is x", "--script", path_str(&script)]);
    assert_eq!(code(&output), 0, "{}", stderr(&output));
    let text = stdout(&output);
    assert!(text.contains("Step 1: lookup colour of x"), "{text}");
    assert!(
        text.contains("Action 1: Retrieval(s=s1:thing[`x'], p=p1:rel[`colour'], o=o1:colour)"),
        "{text}"
    );
    assert!(text.contains("Step 2: report the colour found in #1"), "{text}");
    assert!(text.contains("Action 2: Output(o1)"), "{text}");
    assert!(text.contains("Dependencies: #1 -> #2"), "{text}");
}

#[test]
fn plan_with_violations_exits_one() {
    let fx = fixture();
    let reply = "<answer>Step 1: use the colour from #2\\nAction 1: Output(o2)\\n\
                 Step 2: lookup colour of x\\nAction 2: \
                 Retrieval(s=s1:thing[`x'], p=p1:rel[`colour'], o=o2:colour)</answer>";
    let script = fx.dir.path().join("bad-plan.json");
    std::fs::write(&script, format!(r#"[{{"reply": "{reply}"}}]"#)).unwrap();

    let output = thinker(&["plan", "what is x", "--script", path_str(&script)]);
    assert_eq!(code(&output), 1);
    let err = stderr(&output);
    assert!(err.contains("violation:"), "{err}");
}

#[test]
fn plan_with_empty_question_is_a_usage_error() {
    let fx = fixture();
    let output = thinker(&["plan", "   ", "--script", path_str(&fx.script)]);
    assert_eq!(code(&output), 2);
    assert!(stderr(&output).contains("empty"), "{}", stderr(&output));
}

#[test]
fn run_answers_and_writes_a_trace() {
    let fx = fixture();
    let traces = fx.dir.path().join("traces");
    let output = thinker(&[
        "run",
        "what is x",
        "--script",
        path_str(&fx.script),
        "--corpus",
        path_str(&fx.corpus),
        "--max-depth",
        "1",
        "--kbd",
        "off",
        "--trace-dir",
        path_str(&traces),
    ]);
    assert_eq!(code(&output), 0, "{}", stderr(&output));
    assert_eq!(stdout(&output).trim(), "red");
    let err = stderr(&output);
    assert!(err.contains("llm_calls=3 retrievals=1 kbd_skips=0"), "{err}");

    let trace_files: Vec<PathBuf> = std::fs::read_dir(&traces)
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    assert_eq!(trace_files.len(), 1);
    let name = trace_files[0].file_name().unwrap().to_str().unwrap();
    assert!(name.starts_with("run-") && name.ends_with(".json"), "{name}");

    let trace: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&trace_files[0]).unwrap()).unwrap();
    assert_eq!(trace["question"], "what is x");
    assert_eq!(trace["final_answer"], "red");
    assert_eq!(trace["subs"][0]["via"]["depth"], 1);
    assert_eq!(trace["conversation"][0]["role"], "system");
}

#[test]
fn run_with_the_boundary_gate_skips_retrieval() {
    let fx = fixture();
    let output = thinker(&[
        "run",
        "what is x",
        "--script",
        path_str(&fx.script),
        "--corpus",
        path_str(&fx.corpus),
    ]);
    assert_eq!(code(&output), 0, "{}", stderr(&output));
    assert_eq!(stdout(&output).trim(), "red");
    let err = stderr(&output);
    assert!(err.contains("llm_calls=3 retrievals=0 kbd_skips=1"), "{err}");
}

#[test]
fn run_failure_exits_one_and_keeps_the_partial_trace() {
    let fx = fixture();
    let script = fx.dir.path().join("broken.json");
    std::fs::write(&script, r#"[{"reply": "no answer block here"}]"#).unwrap();
    let traces = fx.dir.path().join("partial");

    let output = thinker(&[
        "run",
        "what is x",
        "--script",
        path_str(&script),
        "--corpus",
        path_str(&fx.corpus),
        "--trace-dir",
        path_str(&traces),
    ]);
    assert_eq!(code(&output), 1);
    let err = stderr(&output);
    assert!(err.contains("run failed"), "{err}");
    assert!(err.contains("llm_calls=1"), "{err}");

    let trace_files: Vec<PathBuf> = std::fs::read_dir(&traces)
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    assert_eq!(trace_files.len(), 1);
    let trace: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&trace_files[0]).unwrap()).unwrap();
    assert_eq!(trace["counters"]["llm_calls"], 1);
}

#[test]
fn missing_corpus_is_a_config_error() {
    let fx = fixture();
    let output = thinker(&["run", "what is x", "--script", path_str(&fx.script)]);
    assert_eq!(code(&output), 2);
    assert!(stderr(&output).contains("corpus"), "{}", stderr(&output));
}

#[test]
fn eval_scores_a_dataset_end_to_end() {
    let fx = fixture();
    let dataset = fx.dir.path().join("data.jsonl");
    std::fs::write(
        &dataset,
        concat!(
            "{\"id\": \"x\", \"question\": \"what is x\", \"golden_answers\": [\"red\"]}\n",
            "{\"id\": \"y\", \"question\": \"what is y\", \"golden_answers\": [\"blue\"]}\n",
            "{\"id\": \"z/../z\", \"question\": \"what is z\", \"golden_answers\": [\"green\"]}\n",
        ),
    )
    .unwrap();
    let report_path = fx.dir.path().join("report.json");
    let traces = fx.dir.path().join("traces");
    let sft = fx.dir.path().join("sft.jsonl");

    let output = thinker(&[
        "eval",
        "--dataset",
        path_str(&dataset),
        "--script",
        path_str(&fx.script),
        "--corpus",
        path_str(&fx.corpus),
        "--max-depth",
        "1",
        "--kbd",
        "off",
        "--workers",
        "2",
        "--report",
        path_str(&report_path),
        "--trace-dir",
        path_str(&traces),
        "--export-sft",
        path_str(&sft),
    ]);
    assert_eq!(code(&output), 0, "{}", stderr(&output));
    assert_eq!(
        stdout(&output).trim(),
        "n=3 avg_em=0.667 avg_f1=0.667 avg_retrievals=1.000 kbd_skip_rate=0.000"
    );

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(report["n"], 3);
    assert_eq!(report["per_item"].as_array().unwrap().len(), 3);
    assert_eq!(report["per_item"][0]["id"], "x");
    assert_eq!(report["per_item"][0]["em"], 1.0);
    assert_eq!(report["per_item"][2]["em"], 0.0);

    // One trace per item, named by sanitized id.
    assert!(traces.join("x.json").is_file());
    assert!(traces.join("y.json").is_file());
    assert!(traces.join("z-..-z.json").is_file());

    let sft_lines: Vec<String> = std::fs::read_to_string(&sft)
        .unwrap()
        .lines()
        .map(str::to_owned)
        .collect();
    assert_eq!(sft_lines.len(), 3);
    let sample: serde_json::Value = serde_json::from_str(&sft_lines[0]).unwrap();
    let turns = sample["turns"].as_array().unwrap();
    assert_eq!(turns[0]["role"], "system");
    assert_eq!(turns[0]["loss"], false);
    assert!(turns.iter().any(|t| t["loss"] == true && t["role"] == "assistant"));
}

#[test]
fn eval_with_a_missing_dataset_is_a_usage_error() {
    let fx = fixture();
    let output = thinker(&[
        "eval",
        "--dataset",
        "/nonexistent/data.jsonl",
        "--script",
        path_str(&fx.script),
        "--corpus",
        path_str(&fx.corpus),
    ]);
    assert_eq!(code(&output), 2);
    assert!(stderr(&output).contains("dataset"), "{}", stderr(&output));
}

#[test]
fn export_sft_converts_saved_traces() {
    let fx = fixture();
    let traces = fx.dir.path().join("traces");
    let run = thinker(&[
        "run",
        "what is x",
        "--script",
        path_str(&fx.script),
        "--corpus",
        path_str(&fx.corpus),
        "--kbd",
        "off",
        "--trace-dir",
        path_str(&traces),
    ]);
    assert_eq!(code(&run), 0, "{}", stderr(&run));

    let out = fx.dir.path().join("samples.jsonl");
    let output = thinker(&["export-sft", path_str(&traces), "--out", path_str(&out)]);
    assert_eq!(code(&output), 0, "{}", stderr(&output));
    assert!(stdout(&output).contains("wrote 1 sample(s)"), "{}", stdout(&output));

    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(text.contains("\"loss\":true"), "{text}");
}

#[test]
fn export_sft_rejects_malformed_traces() {
    let dir = tempfile::tempdir().unwrap();
    let bogus = dir.path().join("bogus.json");
    std::fs::write(&bogus, "{\"not\": \"a trace\"}").unwrap();
    let out = dir.path().join("samples.jsonl");

    let output = thinker(&["export-sft", path_str(&bogus), "--out", path_str(&out)]);
    assert_eq!(code(&output), 2);
    assert!(stderr(&output).contains("malformed trace"), "{}", stderr(&output));

    let output = thinker(&[
        "export-sft",
        "/nonexistent/trace.json",
        "--out",
        path_str(&out),
    ]);
    assert_eq!(code(&output), 2);
}

#[test]
fn config_file_is_honored_and_flags_override_it() {
    let fx = fixture();
    let config_path = fx.dir.path().join("config.json");
    let config = format!(
        r#"{{
  "llm": {{"kind": "scripted", "script": "{script}"}},
  "retriever": {{"kind": "lexical", "corpus": "{corpus}"}},
  "solve": {{"max_depth": 1, "kbd_enabled": true}}
}}"#,
        script = path_str(&fx.script).escape_default(),
        corpus = path_str(&fx.corpus).escape_default(),
    );
    std::fs::write(&config_path, config).unwrap();

    // The file alone: gate on, so retrieval is skipped.
    let output = thinker(&["run", "what is x", "--config", path_str(&config_path)]);
    assert_eq!(code(&output), 0, "{}", stderr(&output));
    assert_eq!(stdout(&output).trim(), "red");
    assert!(stderr(&output).contains("kbd_skips=1"), "{}", stderr(&output));

    // A flag overrides the file: gate off forces the retrieval loop.
    let output = thinker(&[
        "run",
        "what is x",
        "--config",
        path_str(&config_path),
        "--kbd",
        "off",
    ]);
    assert_eq!(code(&output), 0, "{}", stderr(&output));
    assert!(stderr(&output).contains("retrievals=1"), "{}", stderr(&output));

    // Unknown keys fail fast.
    std::fs::write(&config_path, r#"{"solver": {}}"#).unwrap();
    let output = thinker(&["run", "what is x", "--config", path_str(&config_path)]);
    assert_eq!(code(&output), 2);
    assert!(stderr(&output).contains("invalid config"), "{}", stderr(&output));
}

#[test]
fn help_lists_the_real_defaults() {
    let output = thinker(&["run", "--help"]);
    assert_eq!(code(&output), 0);
    let text = stdout(&output);
    assert!(text.contains("[default: 5]"), "{text}");
    assert!(text.contains("[default: 3]"), "{text}");
    assert!(text.contains("[default: 0.95]"), "{text}");
    assert!(text.contains("[default: on]"), "{text}");

    let output = thinker(&["eval", "--help"]);
    assert!(stdout(&output).contains("[default: 1]"), "{}", stdout(&output));
}

#[test]
fn usage_errors_exit_two() {
    let output = thinker(&["no-such-command"]);
    assert_eq!(code(&output), 2);

    let output = thinker(&["run"]);
    assert_eq!(code(&output), 2);

    let fx = fixture();
    let output = thinker(&[
        "run",
        "q",
        "--script",
        path_str(&fx.script),
        "--corpus",
        path_str(&fx.corpus),
        "--kbd",
        "maybe",
    ]);
    assert_eq!(code(&output), 2);

    let output = thinker(&[
        "run",
        "q",
        "--script",
        path_str(&fx.script),
        "--endpoint",
        "http://llm",
        "--corpus",
        path_str(&fx.corpus),
    ]);
    assert_eq!(code(&output), 2);
    assert!(stderr(&output).contains("--script and --endpoint"), "{}", stderr(&output));
}
