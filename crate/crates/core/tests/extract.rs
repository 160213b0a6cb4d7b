//! Fixture pages with hand-traced parent scores.

use std::path::{Path, PathBuf};

use adforge_core::extract::{score_parents, AttributeLists};
use adforge_core::{extract_content, parse_html, ExtractConfig};
use serde::Deserialize;

#[derive(Deserialize)]
struct Expected {
    scores: Vec<(String, i32)>,
    title: String,
    blocks: Vec<String>,
}

fn fixtures() -> Vec<PathBuf> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/pages");
    let mut pages: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "html"))
        .collect();
    pages.sort();
    pages
}

#[test]
fn six_fixture_pages() {
    assert_eq!(fixtures().len(), 6);
}

#[test]
fn hand_traced_scores_and_content() {
    for page in fixtures() {
        let expected: Expected =
            serde_json::from_slice(&std::fs::read(page.with_extension("json")).unwrap()).unwrap();
        let root = parse_html(&std::fs::read_to_string(&page).unwrap()).unwrap();
        let scores: Vec<(String, i32)> = score_parents(&root, &AttributeLists::default())
            .into_iter()
            .map(|s| (s.selector, s.points))
            .collect();
        assert_eq!(scores, expected.scores, "{}", page.display());

        let content = extract_content(&root, &ExtractConfig::default());
        assert_eq!(content.title, expected.title, "{}", page.display());
        assert_eq!(content.blocks, expected.blocks, "{}", page.display());
    }
}
