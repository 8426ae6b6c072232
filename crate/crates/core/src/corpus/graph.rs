use std::collections::BTreeMap;

use super::Corpus;
use crate::error::{Error, Result};

/// Directed hyperlink graph restricted to articles present in the corpus.
#[derive(Clone, Debug, Default)]
pub struct LinkGraph {
    out_adj: BTreeMap<u64, Vec<u64>>,
    in_adj: BTreeMap<u64, Vec<u64>>,
    n_articles: usize,
}

impl LinkGraph {
    /// Links pointing at ids missing from the corpus are dropped.
    pub fn build(corpus: &Corpus) -> Self {
        let mut out_adj: BTreeMap<u64, Vec<u64>> = BTreeMap::new();
        let mut in_adj: BTreeMap<u64, Vec<u64>> = BTreeMap::new();
        for id in corpus.ids() {
            out_adj.insert(id, Vec::new());
            in_adj.insert(id, Vec::new());
        }
        for article in corpus.articles() {
            for &target in &article.outlinks {
                if target == article.id || !corpus.contains(target) {
                    continue;
                }
                out_adj.get_mut(&article.id).unwrap().push(target);
                in_adj.get_mut(&target).unwrap().push(article.id);
            }
        }
        for list in out_adj.values_mut().chain(in_adj.values_mut()) {
            list.sort_unstable();
            list.dedup();
        }
        LinkGraph {
            out_adj,
            in_adj,
            n_articles: corpus.len(),
        }
    }

    pub fn n_articles(&self) -> usize {
        self.n_articles
    }

    pub fn contains(&self, id: u64) -> bool {
        self.out_adj.contains_key(&id)
    }

    pub fn out_links(&self, id: u64) -> Result<&[u64]> {
        self.out_adj
            .get(&id)
            .map(Vec::as_slice)
            .ok_or(Error::UnknownArticle(id))
    }

    pub fn in_links(&self, id: u64) -> Result<&[u64]> {
        self.in_adj
            .get(&id)
            .map(Vec::as_slice)
            .ok_or(Error::UnknownArticle(id))
    }

    pub fn out_degree(&self, id: u64) -> Result<usize> {
        self.out_links(id).map(<[u64]>::len)
    }

    pub fn in_degree(&self, id: u64) -> Result<usize> {
        self.in_links(id).map(<[u64]>::len)
    }

    pub fn edge_count(&self) -> usize {
        self.out_adj.values().map(Vec::len).sum()
    }
}
