//! Bulk scoring of hyperlinked article pairs in hash shards, merged into a
//! global top-k.

use std::collections::{BTreeSet, HashMap};
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{normalize_title, Corpus, LinkGraph};
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::features::{extract, FeatureScaler};
use crate::model::{predict, DocInputs, PairModel};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredPair {
    pub main_id: u64,
    pub sub_id: u64,
    pub score: f64,
}

/// Ordered pairs `(A, B)` for every first-paragraph link A→B, except self
/// links and links whose target title matches one of A's main-article
/// template anchors. Sorted and deduplicated.
pub fn extract_candidates(corpus: &Corpus) -> Vec<(u64, u64)> {
    let mut out = BTreeSet::new();
    for a in corpus.articles() {
        let anchors: BTreeSet<String> = a
            .record()
            .main_template_anchors
            .iter()
            .map(|s| normalize_title(s))
            .collect();
        for &b in &a.outlinks {
            if b == a.id {
                continue;
            }
            if let Some(target) = corpus.get(b) {
                if anchors.contains(&target.normalized_title()) {
                    continue;
                }
            }
            out.insert((a.id, b));
        }
    }
    out.into_iter().collect()
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ShardPlan {
    shards: usize,
}

impl ShardPlan {
    pub fn new(shards: usize) -> Result<Self> {
        if shards == 0 {
            return Err(Error::Config("need at least one shard".into()));
        }
        Ok(ShardPlan { shards })
    }

    pub fn shards(&self) -> usize {
        self.shards
    }

    pub fn shard_of(&self, main_id: u64, sub_id: u64) -> usize {
        (splitmix64(splitmix64(main_id) ^ sub_id) % self.shards as u64) as usize
    }

    /// Candidates keep their relative order inside each shard.
    pub fn split(&self, candidates: &[(u64, u64)]) -> Vec<Vec<(u64, u64)>> {
        let mut out = vec![Vec::new(); self.shards];
        for &(m, s) in candidates {
            out[self.shard_of(m, s)].push((m, s));
        }
        out
    }
}

/// A frozen model with everything needed to score a pair.
pub struct Scorer<'a> {
    pub model: &'a PairModel,
    pub scaler: &'a FeatureScaler,
    pub corpus: &'a Corpus,
    pub graph: &'a LinkGraph,
    pub table: &'a EmbeddingTable,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ShardResult {
    pub scored: Vec<ScoredPair>,
    /// Pairs naming an article absent from the corpus.
    pub skipped: usize,
}

/// One score per resolvable candidate, in input order.
pub fn score_shard(scorer: &Scorer<'_>, shard: &[(u64, u64)]) -> Result<ShardResult> {
    let mut docs: HashMap<u64, DocInputs> = HashMap::new();
    let mut result = ShardResult::default();
    for &(m, s) in shard {
        let (Some(main), Some(sub)) = (scorer.corpus.get(m), scorer.corpus.get(s)) else {
            result.skipped += 1;
            continue;
        };
        for a in [main, sub] {
            docs.entry(a.id)
                .or_insert_with(|| DocInputs::new(a, scorer.table, scorer.model.config()));
        }
        let features = scorer
            .scaler
            .apply(&extract(main, sub, scorer.graph, scorer.table)?);
        let (score, _) = scorer.model.score(&docs[&m], &docs[&s], &features)?;
        result.scored.push(ScoredPair {
            main_id: m,
            sub_id: s,
            score,
        });
    }
    Ok(result)
}

/// Descending score, then ascending `(main, sub)`.
pub fn rank_order(a: &ScoredPair, b: &ScoredPair) -> std::cmp::Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| (a.main_id, a.sub_id).cmp(&(b.main_id, b.sub_id)))
}

pub fn merge_topk(shards: Vec<Vec<ScoredPair>>, k: usize) -> Vec<ScoredPair> {
    let mut all: Vec<ScoredPair> = shards.into_iter().flatten().collect();
    all.sort_by(rank_order);
    all.truncate(k);
    all
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServeConfig {
    pub topk: usize,
    pub shards: usize,
    /// 1 runs the shards serially on the calling thread.
    pub threads: usize,
}

impl Default for ServeConfig {
    fn default() -> Self {
        ServeConfig {
            topk: 200_000,
            shards: 8,
            threads: 1,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServeStats {
    pub candidates: usize,
    pub shards: usize,
    pub scored: usize,
    pub skipped: usize,
    pub positives: usize,
    pub returned: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ServeOutput {
    pub top: Vec<ScoredPair>,
    pub stats: ServeStats,
}

/// Scores every candidate and keeps the `topk` most confident positive
/// predictions.
pub fn serve(
    scorer: &Scorer<'_>,
    candidates: &[(u64, u64)],
    config: &ServeConfig,
) -> Result<ServeOutput> {
    let plan = ShardPlan::new(config.shards)?;
    let shards = plan.split(candidates);
    let results: Vec<ShardResult> = if config.threads <= 1 {
        shards
            .iter()
            .map(|s| score_shard(scorer, s))
            .collect::<Result<_>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.threads)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        pool.install(|| {
            shards
                .par_iter()
                .map(|s| score_shard(scorer, s))
                .collect::<Result<_>>()
        })?
    };
    let mut stats = ServeStats {
        candidates: candidates.len(),
        shards: plan.shards(),
        ..ServeStats::default()
    };
    let mut positive = Vec::with_capacity(results.len());
    for r in results {
        stats.scored += r.scored.len();
        stats.skipped += r.skipped;
        let keep: Vec<ScoredPair> = r.scored.into_iter().filter(|p| predict(p.score)).collect();
        stats.positives += keep.len();
        positive.push(keep);
    }
    let top = merge_topk(positive, config.topk);
    stats.returned = top.len();
    log::info!(
        "scored {} of {} candidates ({} skipped), {} positive",
        stats.scored,
        stats.candidates,
        stats.skipped,
        stats.positives
    );
    Ok(ServeOutput { top, stats })
}

pub fn write_scored_to<W: Write>(pairs: &[ScoredPair], w: &mut W) -> std::io::Result<()> {
    writeln!(w, "main_id\tsub_id\tscore")?;
    for p in pairs {
        writeln!(w, "{}\t{}\t{:.9}", p.main_id, p.sub_id, p.score)?;
    }
    Ok(())
}

pub fn write_scored(pairs: &[ScoredPair], path: &Path) -> Result<()> {
    let mut w =
        std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| Error::io(path, e))?);
    write_scored_to(pairs, &mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

impl ServeStats {
    pub fn summary_line(&self) -> String {
        format!(
            "candidates={} shards={} scored={} skipped={} positives={} returned={}",
            self.candidates, self.shards, self.scored, self.skipped, self.positives, self.returned
        )
    }
}
