//! End-to-end runs of the `forge` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const TOY: &str = "void top(int a[4]) {\n    for (int i = 0; i < 4; i++) {\n        a[i] = a[i] * 2;\n    }\n}\n";

fn forge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_forge"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn write_kernel(root: &Path, name: &str, content: &str) {
    let dir = root.join(name);
    fs::create_dir_all(&dir).unwrap();
    fs::write(dir.join(format!("{name}.c")), content).unwrap();
}

#[test]
fn full_dse_emits_a_dataset_and_exits_cleanly() {
    let search = tempfile::tempdir().unwrap();
    let data = tempfile::tempdir().unwrap();
    write_kernel(search.path(), "toy", TOY);
    let search_dir = search.path().to_str().unwrap().to_string();
    let data_path = data.path().to_str().unwrap().to_string();

    let run = forge(&["full-dse", "--search_dir", &search_dir, "--data_path", &data_path]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let manifest = stdout(&run);
    assert!(manifest.contains("DONE\t48"), "{manifest}");

    let source_name = search.path().file_name().unwrap().to_str().unwrap();
    let dataset = data.path().join(source_name).join("toy/designs.json");
    let text = fs::read_to_string(&dataset).unwrap();
    assert_eq!(text.matches("\"design_id\"").count(), 48);

    // The emitted dataset feeds the read-side commands.
    let pareto = forge(&["pareto", "--data_path", &data_path]);
    assert!(pareto.status.success());
    assert!(stdout(&pareto).contains("flag_mismatches=0"));

    let adrs = forge(&["adrs", "--data_path", &data_path, "--reference", &data_path]);
    assert!(adrs.status.success());
    assert!(stdout(&adrs).contains("average_adrs 0"), "{}", stdout(&adrs));

    let stats = forge(&["stats", "--data_path", &data_path]);
    assert!(stats.status.success());
    assert!(stdout(&stats).contains("designs 48"));

    let pairs = forge(&["emit-pairs", "--data_path", &data_path]);
    assert!(pairs.status.success(), "{}", String::from_utf8_lossy(&pairs.stderr));
    let jsonl = fs::read_to_string(data.path().join("finetune_pairs.jsonl")).unwrap();
    assert!(!jsonl.is_empty());
    for line in jsonl.lines() {
        let pair: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(pair["instruction"].as_str().unwrap().starts_with("optimize for"));
        assert_eq!(pair["input"].as_str().unwrap(), TOY);
    }
}

#[test]
fn analyze_reports_the_design_space() {
    let search = tempfile::tempdir().unwrap();
    write_kernel(search.path(), "toy", TOY);
    let run = forge(&["analyze", "--search_dir", search.path().to_str().unwrap()]);
    assert!(run.status.success());
    let report = stdout(&run);
    assert!(report.contains("toy\ttop=top"), "{report}");
    assert!(report.contains("designs=48"), "{report}");
}

#[test]
fn config_file_overrides_flags() {
    let search = tempfile::tempdir().unwrap();
    let flag_out = tempfile::tempdir().unwrap();
    let config_out = tempfile::tempdir().unwrap();
    write_kernel(search.path(), "toy", TOY);

    let config = search.path().join("run.conf");
    fs::write(
        &config,
        format!("# run configuration\ndata_path = {}\n", config_out.path().display()),
    )
    .unwrap();

    let run = forge(&[
        "bayes-dse",
        "--search_dir",
        search.path().to_str().unwrap(),
        "--data_path",
        flag_out.path().to_str().unwrap(),
        "--bayesian_opt_number",
        "0",
        "--config",
        config.to_str().unwrap(),
    ]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));

    let source_name = search.path().file_name().unwrap().to_str().unwrap();
    assert!(config_out.path().join(source_name).join("toy/designs.json").exists());
    assert!(!flag_out.path().join(source_name).exists());
}

#[test]
fn failed_kernels_flip_the_exit_code() {
    let search = tempfile::tempdir().unwrap();
    let data = tempfile::tempdir().unwrap();
    write_kernel(search.path(), "good", TOY);
    write_kernel(search.path(), "bad", "void top(int a[4]) {\n    for (\n}\n");

    let run = forge(&[
        "full-dse",
        "--search_dir",
        search.path().to_str().unwrap(),
        "--data_path",
        data.path().to_str().unwrap(),
    ]);
    assert!(!run.status.success());
    let manifest = fs::read_to_string(data.path().join("run_manifest.tsv")).unwrap();
    assert!(manifest.contains("bad\tFAILED"), "{manifest}");
    assert!(manifest.contains("good\tDONE\t48"), "{manifest}");
}

#[test]
fn normalize_keys_writes_a_corrected_view() {
    let search = tempfile::tempdir().unwrap();
    let data = tempfile::tempdir().unwrap();
    write_kernel(search.path(), "toy", TOY);
    let data_path = data.path().to_str().unwrap().to_string();
    let run = forge(&["full-dse", "--search_dir", search.path().to_str().unwrap(), "--data_path", &data_path]);
    assert!(run.status.success());

    let stats = forge(&["stats", "--data_path", &data_path, "--normalize-keys"]);
    assert!(stats.status.success());
    let source_name = search.path().file_name().unwrap().to_str().unwrap();
    let normalized = fs::read_to_string(
        data.path().join(source_name).join("toy/designs.normalized.json"),
    )
    .unwrap();
    assert!(normalized.contains("\"Available_LUT\""));
    assert!(!normalized.contains("\"Avialable_LUT\""));
}
