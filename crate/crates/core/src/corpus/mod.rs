//! Article corpus: loading, tokenization and the hyperlink graph.
//!
//! The corpus file holds one JSON object per line with the keys, in order,
//! `id`, `title`, `first_paragraph`, `section_titles`, `links` and
//! `main_template_anchors`. Token fields of [`Article`] are derived at load
//! time with a [`TokenTrie`], so the same file can be re-tokenized with a
//! different multi-word dictionary.

mod graph;
mod text;
mod trie;

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use graph::LinkGraph;
pub use text::{
    is_stopword, normalize_title, normalize_words, preprocess, preprocess_to, tokenize, Padded,
    TextKind, CONTENT_LEN, PAD_TOKEN, STOPWORDS, TITLE_LEN,
};
pub use trie::TokenTrie;

use crate::error::{Error, Result};

/// One line of the corpus file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub id: u64,
    pub title: String,
    #[serde(default)]
    pub first_paragraph: String,
    #[serde(default)]
    pub section_titles: Vec<String>,
    #[serde(default)]
    pub links: Vec<u64>,
    #[serde(default)]
    pub main_template_anchors: Vec<String>,
}

/// A tokenized article. `outlinks` are the first-paragraph hyperlinks.
#[derive(Clone, Debug, PartialEq)]
pub struct Article {
    pub id: u64,
    pub title_raw: String,
    pub title_tokens: Vec<String>,
    pub content_tokens: Vec<String>,
    pub section_titles: Vec<Vec<String>>,
    pub outlinks: Vec<u64>,
    pub main_template_anchors: Vec<Vec<String>>,
    record: CorpusRecord,
}

impl Article {
    /// Tokenizes a record. Links are deduplicated (first occurrence wins)
    /// and self-links removed. Returns `None` when the title tokenizes to
    /// nothing.
    pub fn from_record(mut record: CorpusRecord, trie: &TokenTrie) -> Option<Article> {
        let title_tokens = tokenize(&record.title, trie);
        if title_tokens.is_empty() {
            return None;
        }
        let mut seen = HashSet::new();
        let id = record.id;
        record.links.retain(|&l| l != id && seen.insert(l));
        Some(Article {
            id,
            title_raw: record.title.clone(),
            title_tokens,
            content_tokens: tokenize(&record.first_paragraph, trie),
            section_titles: record
                .section_titles
                .iter()
                .map(|s| tokenize(s, trie))
                .filter(|s| !s.is_empty())
                .collect(),
            outlinks: record.links.clone(),
            main_template_anchors: record
                .main_template_anchors
                .iter()
                .map(|s| tokenize(s, trie))
                .filter(|s| !s.is_empty())
                .collect(),
            record,
        })
    }

    /// Convenience constructor with plain word tokenization.
    ///
    /// Panics if the title has no words.
    pub fn from_parts(
        id: u64,
        title: &str,
        first_paragraph: &str,
        section_titles: &[&str],
        links: &[u64],
        anchors: &[&str],
    ) -> Article {
        let record = CorpusRecord {
            id,
            title: title.to_owned(),
            first_paragraph: first_paragraph.to_owned(),
            section_titles: section_titles.iter().map(|s| s.to_string()).collect(),
            links: links.to_vec(),
            main_template_anchors: anchors.iter().map(|s| s.to_string()).collect(),
        };
        Article::from_record(record, &TokenTrie::new()).expect("title must contain a word")
    }

    pub fn record(&self) -> &CorpusRecord {
        &self.record
    }

    pub fn first_paragraph(&self) -> &str {
        &self.record.first_paragraph
    }

    pub fn normalized_title(&self) -> String {
        normalize_title(&self.title_raw)
    }
}

/// All articles keyed by id, plus a normalized-title index.
#[derive(Clone, Debug, Default)]
pub struct Corpus {
    articles: BTreeMap<u64, Article>,
    title_index: BTreeMap<String, u64>,
}

impl Corpus {
    pub fn from_articles(articles: impl IntoIterator<Item = Article>) -> Result<Corpus> {
        let mut corpus = Corpus::default();
        for article in articles {
            corpus.insert(article)?;
        }
        Ok(corpus)
    }

    fn insert(&mut self, article: Article) -> Result<()> {
        if self.articles.contains_key(&article.id) {
            return Err(Error::DuplicateId(article.id));
        }
        let key = article.normalized_title();
        if let Some(&first) = self.title_index.get(&key) {
            return Err(Error::DuplicateTitle {
                title: key,
                first,
                second: article.id,
            });
        }
        self.title_index.insert(key, article.id);
        self.articles.insert(article.id, article);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.articles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.articles.is_empty()
    }

    pub fn contains(&self, id: u64) -> bool {
        self.articles.contains_key(&id)
    }

    pub fn get(&self, id: u64) -> Option<&Article> {
        self.articles.get(&id)
    }

    pub fn article(&self, id: u64) -> Result<&Article> {
        self.get(id).ok_or(Error::UnknownArticle(id))
    }

    /// Articles in ascending id order.
    pub fn articles(&self) -> impl Iterator<Item = &Article> {
        self.articles.values()
    }

    pub fn ids(&self) -> impl Iterator<Item = u64> + '_ {
        self.articles.keys().copied()
    }

    pub fn id_by_title(&self, title: &str) -> Option<u64> {
        self.title_index.get(&normalize_title(title)).copied()
    }

    /// Sentences for embedding training: each article contributes its title,
    /// its section titles and its first paragraph.
    pub fn sentences(&self) -> Vec<Vec<String>> {
        let mut out = Vec::new();
        for a in self.articles() {
            out.push(a.title_tokens.clone());
            out.extend(a.section_titles.iter().cloned());
            if !a.content_tokens.is_empty() {
                out.push(a.content_tokens.clone());
            }
        }
        out
    }
}

/// Outcome of reading a corpus file.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub loaded: usize,
    /// 1-based line numbers and reasons for skipped lines.
    pub malformed: Vec<(usize, String)>,
}

pub fn load_corpus(path: &Path, trie: &TokenTrie) -> Result<(Corpus, LoadReport)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_corpus(BufReader::new(file), path, trie)
}

pub fn read_corpus<R: BufRead>(
    reader: R,
    path: &Path,
    trie: &TokenTrie,
) -> Result<(Corpus, LoadReport)> {
    let mut corpus = Corpus::default();
    let mut report = LoadReport::default();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: CorpusRecord = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(e) => {
                report.malformed.push((i + 1, e.to_string()));
                continue;
            }
        };
        let id = record.id;
        match Article::from_record(record, trie) {
            Some(article) => {
                corpus.insert(article)?;
                report.loaded += 1;
            }
            None => report
                .malformed
                .push((i + 1, format!("article {id} has an empty title"))),
        }
    }
    if !report.malformed.is_empty() {
        log::warn!(
            "{}: skipped {} malformed line(s)",
            path.display(),
            report.malformed.len()
        );
    }
    Ok((corpus, report))
}

pub fn write_corpus(corpus: &Corpus, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_records(corpus.articles().map(Article::record), &mut w).map_err(|e| Error::io(path, e))
}

pub fn write_records<'a, W: Write>(
    records: impl Iterator<Item = &'a CorpusRecord>,
    w: &mut W,
) -> std::io::Result<()> {
    for record in records {
        serde_json::to_writer(&mut *w, record)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}
