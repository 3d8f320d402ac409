//! Prompt rendering and synonym × descriptor text composition.

use std::collections::HashSet;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Synonyms and visual descriptors for one class.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassLexicon {
    pub class_name: String,
    pub dataset_name: String,
    pub synonyms: Vec<String>,
    pub descriptors: Vec<String>,
}

impl ClassLexicon {
    /// Cleans the word lists: trims entries, drops blanks, removes
    /// case-insensitive duplicates (first occurrence wins) and makes sure the
    /// class name itself is the first synonym.
    pub fn new(
        class_name: impl Into<String>,
        dataset_name: impl Into<String>,
        synonyms: impl IntoIterator<Item = String>,
        descriptors: impl IntoIterator<Item = String>,
    ) -> Result<Self> {
        let class_name = class_name.into().trim().to_owned();
        if class_name.is_empty() {
            return Err(Error::EmptyField("class_name"));
        }
        let mut all_synonyms = vec![class_name.clone()];
        all_synonyms.extend(synonyms);
        Ok(Self {
            synonyms: dedup(all_synonyms),
            descriptors: dedup(descriptors),
            dataset_name: dataset_name.into().trim().to_owned(),
            class_name,
        })
    }
}

fn dedup(entries: impl IntoIterator<Item = String>) -> Vec<String> {
    let mut seen = HashSet::new();
    entries
        .into_iter()
        .map(|e| e.trim().to_owned())
        .filter(|e| !e.is_empty() && seen.insert(e.to_lowercase()))
        .collect()
}

/// The rendered texts of one class.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynonymousTexts {
    pub class_id: usize,
    pub texts: Vec<String>,
}

pub fn render_synonym_prompt(class_name: &str, dataset_name: &str) -> Result<String> {
    if class_name.trim().is_empty() {
        return Err(Error::EmptyField("class_name"));
    }
    if dataset_name.trim().is_empty() {
        return Err(Error::EmptyField("dataset_name"));
    }
    Ok(format!(
        "Tell me in five words or less what are some common ways of referring to {class_name} in {dataset_name}?"
    ))
}

pub fn render_descriptor_prompt(class_name: &str) -> Result<String> {
    if class_name.trim().is_empty() {
        return Err(Error::EmptyField("class_name"));
    }
    Ok(format!(
        "What are useful features for distinguishing a {class_name} in a photo?"
    ))
}

const VERBS: [&str; 3] = ["is", "has", "have"];
const ARTICLES: [&str; 3] = ["a", "an", "the"];

fn first_word(s: &str) -> &str {
    s.split_whitespace().next().unwrap_or("")
}

/// The clause that follows "which" for a descriptor.
///
/// A descriptor already led by is/has/have is spliced in as is. Otherwise
/// the connective is "is", followed by an indefinite article unless the
/// descriptor already starts with one.
fn descriptor_clause(descriptor: &str) -> String {
    let lead = first_word(descriptor).to_lowercase();
    if VERBS.contains(&lead.as_str()) {
        return descriptor.to_owned();
    }
    if ARTICLES.contains(&lead.as_str()) {
        return format!("is {descriptor}");
    }
    let article = match descriptor.chars().next().map(|c| c.to_ascii_lowercase()) {
        Some('a' | 'e' | 'i' | 'o' | 'u') => "an",
        _ => "a",
    };
    format!("is {article} {descriptor}")
}

/// Renders one synonym/descriptor pair.
pub fn render_text(synonym: &str, descriptor: Option<&str>) -> String {
    match descriptor {
        Some(d) => {
            let d = d.trim().trim_end_matches('.');
            format!("A photo of a {synonym}, which {}.", descriptor_clause(d))
        }
        None => format!("A photo of a {synonym}."),
    }
}

/// Cartesian product of synonyms and descriptors, synonym-major.
///
/// With no descriptors, every synonym yields a bare "A photo of a {synonym}."
pub fn combine(class_id: usize, lexicon: &ClassLexicon) -> Result<SynonymousTexts> {
    if lexicon.synonyms.is_empty() {
        return Err(Error::EmptyField("synonyms"));
    }
    let texts = if lexicon.descriptors.is_empty() {
        lexicon
            .synonyms
            .iter()
            .map(|s| render_text(s, None))
            .collect()
    } else {
        lexicon
            .synonyms
            .iter()
            .flat_map(|s| {
                lexicon
                    .descriptors
                    .iter()
                    .map(move |d| render_text(s, Some(d)))
            })
            .collect()
    };
    Ok(SynonymousTexts { class_id, texts })
}

/// One entry of the lexicon cache file.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LexiconEntry {
    #[serde(default)]
    pub synonyms: Vec<String>,
    #[serde(default)]
    pub descriptors: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<String>,
}

/// Lexicons in class-id order (file order of the cache document).
pub type LexiconMap = IndexMap<usize, ClassLexicon>;

/// Reads a lexicon cache: a JSON object mapping class name to
/// `{"synonyms": [...], "descriptors": [...]}`. Class ids follow document order.
pub fn load_lexicon_cache(path: impl AsRef<Path>) -> Result<LexiconMap> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let doc: IndexMap<String, LexiconEntry> =
        serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_owned(),
            source,
        })?;
    lexicons_from_entries(doc)
}

pub fn lexicons_from_entries(doc: IndexMap<String, LexiconEntry>) -> Result<LexiconMap> {
    doc.into_iter()
        .enumerate()
        .map(|(id, (name, entry))| {
            let lex = ClassLexicon::new(
                name,
                entry.dataset.unwrap_or_default(),
                entry.synonyms,
                entry.descriptors,
            )?;
            Ok((id, lex))
        })
        .collect()
}

/// Writes lexicons back in the cache format, preserving class order.
pub fn save_lexicon_cache(lexicons: &LexiconMap, path: impl AsRef<Path>) -> Result<()> {
    let doc: IndexMap<&str, LexiconEntry> = lexicons
        .values()
        .map(|l| {
            (
                l.class_name.as_str(),
                LexiconEntry {
                    synonyms: l.synonyms.clone(),
                    descriptors: l.descriptors.clone(),
                    dataset: (!l.dataset_name.is_empty()).then(|| l.dataset_name.clone()),
                },
            )
        })
        .collect();
    let mut text = serde_json::to_string_pretty(&doc).expect("lexicon serializes");
    text.push('\n');
    crate::format::write_atomic(path.as_ref(), text.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lex(syn: &[&str], desc: &[&str]) -> ClassLexicon {
        ClassLexicon {
            class_name: syn[0].into(),
            dataset_name: "flowers".into(),
            synonyms: syn.iter().map(|s| s.to_string()).collect(),
            descriptors: desc.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn synonym_prompt() {
        assert_eq!(
            render_synonym_prompt("sunflower", "flowers").unwrap(),
            "Tell me in five words or less what are some common ways of referring to sunflower in flowers?"
        );
        assert!(matches!(
            render_synonym_prompt("", "flowers"),
            Err(Error::EmptyField(_))
        ));
        assert!(render_synonym_prompt("A-10", "aircraft")
            .unwrap()
            .contains(" referring to A-10 in aircraft?"));
    }

    #[test]
    fn descriptor_prompt() {
        assert_eq!(
            render_descriptor_prompt("sunflower").unwrap(),
            "What are useful features for distinguishing a sunflower in a photo?"
        );
        assert!(matches!(
            render_descriptor_prompt(""),
            Err(Error::EmptyField(_))
        ));
        assert_eq!(
            render_descriptor_prompt("lenten rose").unwrap(),
            "What are useful features for distinguishing a lenten rose in a photo?"
        );
    }

    #[test]
    fn combine_single_pair() {
        let out = combine(0, &lex(&["sunflower"], &["large, daisy-like flower"])).unwrap();
        assert_eq!(
            out.texts,
            vec!["A photo of a sunflower, which is a large, daisy-like flower."]
        );
    }

    #[test]
    fn combine_connectives() {
        assert_eq!(
            render_text("cat", Some("has pointed ears")),
            "A photo of a cat, which has pointed ears."
        );
        assert_eq!(
            render_text("cat", Some("is usually small.")),
            "A photo of a cat, which is usually small."
        );
        assert_eq!(
            render_text("cat", Some("an orange coat")),
            "A photo of a cat, which is an orange coat."
        );
        assert_eq!(
            render_text("cat", Some("orange coat")),
            "A photo of a cat, which is an orange coat."
        );
    }

    #[test]
    fn combine_without_descriptors() {
        let out = combine(3, &lex(&["x"], &[])).unwrap();
        assert_eq!(out.class_id, 3);
        assert_eq!(out.texts, vec!["A photo of a x."]);
    }

    #[test]
    fn combine_is_synonym_major() {
        let out = combine(0, &lex(&["a1", "b2", "c3"], &["d1", "d2", "d3", "d4"])).unwrap();
        assert_eq!(out.texts.len(), 12);
        for (i, text) in out.texts.iter().enumerate() {
            let syn = ["a1", "b2", "c3"][i / 4];
            let desc = ["d1", "d2", "d3", "d4"][i % 4];
            assert_eq!(text, &format!("A photo of a {syn}, which is a {desc}."));
        }
    }

    #[test]
    fn lexicon_cleaning() {
        let l = ClassLexicon::new(
            "sunflower",
            "flowers",
            [
                "Sunflower",
                " helianthus ",
                "",
                "HELIANTHUS",
                "common sunflower",
            ]
            .map(String::from),
            ["  ", "yellow petals", "Yellow petals"].map(String::from),
        )
        .unwrap();
        assert_eq!(
            l.synonyms,
            vec!["sunflower", "helianthus", "common sunflower"]
        );
        assert_eq!(l.descriptors, vec!["yellow petals"]);
        assert!(matches!(
            ClassLexicon::new(" ", "x", Vec::new(), Vec::new()),
            Err(Error::EmptyField(_))
        ));
    }

    #[test]
    fn cache_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("lexicon.json");
        std::fs::write(
            &path,
            r#"{"sunflower": {"synonyms": ["helianthus"], "descriptors": ["large, daisy-like flower"]},
                "lenten rose": {"synonyms": [], "descriptors": []}}"#,
        )
        .unwrap();
        let map = load_lexicon_cache(&path).unwrap();
        assert_eq!(map[&0].class_name, "sunflower");
        assert_eq!(map[&0].synonyms, vec!["sunflower", "helianthus"]);
        assert_eq!(map[&1].synonyms, vec!["lenten rose"]);
        save_lexicon_cache(&map, &path).unwrap();
        assert_eq!(load_lexicon_cache(&path).unwrap(), map);
    }

    #[test]
    fn cache_rejects_unknown_fields() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        std::fs::write(&path, r#"{"a": {"synonym": []}}"#).unwrap();
        assert!(matches!(load_lexicon_cache(&path), Err(Error::Json { .. })));
    }

    proptest::proptest! {
        #[test]
        fn combine_size_and_substring(
            syns in proptest::collection::vec("[a-z]{3,8}", 1..5),
            descs in proptest::collection::vec("[a-z]{3,8}( [a-z]{2,6})?", 0..5),
        ) {
            let l = ClassLexicon::new(syns[0].clone(), "d", syns.clone(), descs.clone()).unwrap();
            let out = combine(0, &l).unwrap();
            proptest::prop_assert_eq!(out.texts.len(), l.synonyms.len() * l.descriptors.len().max(1));
            let per = l.descriptors.len().max(1);
            for (i, t) in out.texts.iter().enumerate() {
                let syn = &l.synonyms[i / per];
                let prefix = format!("A photo of a {syn}");
                proptest::prop_assert!(t.starts_with(&prefix));
            }
            proptest::prop_assert_eq!(combine(0, &l).unwrap(), out);
        }
    }
}
