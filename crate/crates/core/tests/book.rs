use std::path::Path;

use vlpkf::config::{ConfigFile, ExperimentConfig};

fn chapter(name: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../book/src").join(name);
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn every_chapter_is_in_the_summary_and_doctested() {
    let summary = chapter("SUMMARY.md");
    let lib = include_str!("../src/lib.rs");
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../book/src");
    for entry in std::fs::read_dir(dir).unwrap() {
        let name = entry.unwrap().file_name().into_string().unwrap();
        if name == "SUMMARY.md" {
            continue;
        }
        assert!(summary.contains(&format!("({name})")), "{name} missing from SUMMARY.md");
        assert!(lib.contains(&format!("book/src/{name}")), "{name} not doctested");
    }
}

fn toml_block(text: &str) -> ExperimentConfig {
    let start = text.find("```toml\n").unwrap() + "```toml\n".len();
    let end = start + text[start..].find("```").unwrap();
    ConfigFile::parse(&text[start..end]).unwrap().into_experiment().unwrap()
}

#[test]
fn guide_config_example_is_the_default() {
    assert_eq!(toml_block(&chapter("experiments.md")), ExperimentConfig::default());
}

#[test]
fn readme_config_lists_the_defaults() {
    let readme = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../README.md")).unwrap();
    assert_eq!(toml_block(&readme), ExperimentConfig::default());
}
