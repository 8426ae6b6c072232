//! Explicit symbolic and structural features of an ordered article pair.
//!
//! All overlap ratios use set semantics: duplicate tokens count once.

use std::collections::HashSet;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::corpus::{Article, LinkGraph};
use crate::embeddings::{cosine_distance, EmbeddingTable};
use crate::error::{Error, Result};

pub const N_FEATURES: usize = 9;

/// The nine features in their fixed order.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExplicitFeatures {
    /// Title token overlap over the main title's size.
    pub r_tto: f64,
    /// Best section-title overlap.
    pub r_st: f64,
    pub r_indeg: f64,
    /// Best overlap of a main-article template anchor with the sub title.
    pub r_mt: f64,
    /// Term frequency of the main title inside the sub's first paragraph.
    pub f_tf: f64,
    /// Milne-Witten distance over in-link sets.
    pub d_mw: f64,
    pub r_outdeg: f64,
    /// Mean title-token embedding distance.
    pub d_te: f64,
    /// First-paragraph token overlap.
    pub r_dt: f64,
}

impl ExplicitFeatures {
    pub const NAMES: [&'static str; N_FEATURES] = [
        "r_tto", "r_st", "r_indeg", "r_mt", "f_TF", "d_MW", "r_outdeg", "d_te", "r_dt",
    ];

    pub fn to_array(&self) -> [f64; N_FEATURES] {
        [
            self.r_tto,
            self.r_st,
            self.r_indeg,
            self.r_mt,
            self.f_tf,
            self.d_mw,
            self.r_outdeg,
            self.d_te,
            self.r_dt,
        ]
    }

    pub fn from_array(v: [f64; N_FEATURES]) -> Self {
        ExplicitFeatures {
            r_tto: v[0],
            r_st: v[1],
            r_indeg: v[2],
            r_mt: v[3],
            f_tf: v[4],
            d_mw: v[5],
            r_outdeg: v[6],
            d_te: v[7],
            r_dt: v[8],
        }
    }

    /// Checks that every bounded feature lies in [0, 1] and the degree
    /// ratios are positive and finite, i.e. the scaler has been applied.
    pub fn check_scaled(&self) -> Result<()> {
        for (i, (&name, value)) in Self::NAMES.iter().zip(self.to_array()).enumerate() {
            let ok = if i == 2 || i == 6 {
                value.is_finite() && value > 0.0
            } else {
                (0.0..=1.0).contains(&value)
            };
            if !ok {
                return Err(Error::UnscaledFeature { name, value });
            }
        }
        Ok(())
    }
}

fn token_set(tokens: &[String]) -> HashSet<&str> {
    tokens.iter().map(String::as_str).collect()
}

/// `|set(a) ∩ set(b)| / |set(a)|`; 0 when `a` is empty.
pub fn token_overlap_ratio(a: &[String], b: &[String]) -> f64 {
    let sa = token_set(a);
    if sa.is_empty() {
        log::debug!("token overlap with an empty left-hand sequence");
        return 0.0;
    }
    let sb = token_set(b);
    sa.intersection(&sb).count() as f64 / sa.len() as f64
}

pub fn section_title_overlap(main: &Article, sub: &Article) -> f64 {
    let mut best = 0.0f64;
    for sa in &main.section_titles {
        for sb in &sub.section_titles {
            best = best.max(token_overlap_ratio(sa, sb));
        }
    }
    best
}

pub fn main_template_overlap(main: &Article, sub: &Article) -> f64 {
    main.main_template_anchors
        .iter()
        .map(|anchor| token_overlap_ratio(anchor, &sub.title_tokens))
        .fold(0.0, f64::max)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    In,
    Out,
}

/// Add-one smoothed degree ratio `(deg(a) + 1) / (deg(b) + 1)`.
pub fn degree_ratio(graph: &LinkGraph, a: u64, b: u64, direction: Direction) -> Result<f64> {
    let deg = |id| match direction {
        Direction::In => graph.in_degree(id),
        Direction::Out => graph.out_degree(id),
    };
    Ok((deg(a)? + 1) as f64 / (deg(b)? + 1) as f64)
}

/// Occurrences of `title` as a contiguous run in `content`, over the content
/// length. Overlapping occurrences all count.
pub fn term_frequency(title: &[String], content: &[String]) -> f64 {
    if title.is_empty() || content.len() < title.len() {
        return 0.0;
    }
    let hits = content.windows(title.len()).filter(|w| *w == title).count();
    hits as f64 / content.len().max(1) as f64
}

/// Normalized Google Distance over in-link sets, clamped to [0, 1]. Pairs
/// without shared in-links get the maximal distance 1.
pub fn milne_witten(graph: &LinkGraph, a: u64, b: u64) -> Result<f64> {
    let in_a = graph.in_links(a)?;
    let in_b = graph.in_links(b)?;
    let small = in_a.len().min(in_b.len());
    let large = in_a.len().max(in_b.len());
    if small == 0 {
        return Ok(1.0);
    }
    let shared = sorted_intersection_len(in_a, in_b);
    if shared == 0 {
        return Ok(1.0);
    }
    let n = graph.n_articles().max(2) as f64;
    let num = (large as f64).ln() - (shared as f64).ln();
    let den = n.ln() - (small as f64).ln();
    if den <= 0.0 {
        return Ok(if num <= 0.0 { 0.0 } else { 1.0 });
    }
    Ok((num / den).clamp(0.0, 1.0))
}

fn sorted_intersection_len(a: &[u64], b: &[u64]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// Mean cosine distance over all cross pairs of in-vocabulary title tokens;
/// 1 when no such pair exists.
pub fn title_embedding_distance(table: &EmbeddingTable, t_i: &[String], t_j: &[String]) -> f64 {
    let mut total = 0.0;
    let mut pairs = 0usize;
    for a in t_i {
        let Some(va) = table.row(a) else { continue };
        for b in t_j {
            let Some(vb) = table.row(b) else { continue };
            total += cosine_distance(va, vb);
            pairs += 1;
        }
    }
    if pairs == 0 {
        1.0
    } else {
        total / pairs as f64
    }
}

/// `|set(c_i) ∩ set(c_j)| / max(|set(c_i)|, 1)`.
pub fn content_overlap(c_i: &[String], c_j: &[String]) -> f64 {
    let si = token_set(c_i);
    let sj = token_set(c_j);
    si.intersection(&sj).count() as f64 / si.len().max(1) as f64
}

/// Raw features of `(main, sub)`; `f_tf` and `d_te` still need scaling.
pub fn extract(
    main: &Article,
    sub: &Article,
    graph: &LinkGraph,
    table: &EmbeddingTable,
) -> Result<ExplicitFeatures> {
    Ok(ExplicitFeatures {
        r_tto: token_overlap_ratio(&main.title_tokens, &sub.title_tokens),
        r_st: section_title_overlap(main, sub),
        r_indeg: degree_ratio(graph, main.id, sub.id, Direction::In)?,
        r_mt: main_template_overlap(main, sub),
        f_tf: term_frequency(&main.title_tokens, &sub.content_tokens),
        d_mw: milne_witten(graph, main.id, sub.id)?,
        r_outdeg: degree_ratio(graph, main.id, sub.id, Direction::Out)?,
        d_te: title_embedding_distance(table, &main.title_tokens, &sub.title_tokens),
        r_dt: content_overlap(&main.content_tokens, &sub.content_tokens),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    fn fit(values: impl Iterator<Item = f64>) -> Range {
        let mut r = Range {
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        };
        for v in values {
            r.min = r.min.min(v);
            r.max = r.max.max(v);
        }
        if r.min > r.max {
            r = Range { min: 0.0, max: 0.0 };
        }
        r
    }

    fn apply(&self, x: f64) -> f64 {
        if self.max <= self.min {
            0.0
        } else {
            ((x - self.min) / (self.max - self.min)).clamp(0.0, 1.0)
        }
    }
}

/// Min-max scaling of the term-frequency and embedding-distance features.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaler {
    pub f_tf: Range,
    pub d_te: Range,
}

impl Default for FeatureScaler {
    fn default() -> Self {
        let unit = Range { min: 0.0, max: 1.0 };
        FeatureScaler {
            f_tf: unit,
            d_te: unit,
        }
    }
}

impl FeatureScaler {
    /// Fits on training features only. An empty set yields a degenerate
    /// scaler that maps everything to 0.
    pub fn fit<'a>(train: impl IntoIterator<Item = &'a ExplicitFeatures> + Clone) -> Self {
        FeatureScaler {
            f_tf: Range::fit(train.clone().into_iter().map(|f| f.f_tf)),
            d_te: Range::fit(train.into_iter().map(|f| f.d_te)),
        }
    }

    pub fn apply(&self, features: &ExplicitFeatures) -> ExplicitFeatures {
        ExplicitFeatures {
            f_tf: self.f_tf.apply(features.f_tf),
            d_te: self.d_te.apply(features.d_te),
            ..*features
        }
    }
}

/// Tab-separated dump: main id, sub id, then the nine features.
pub fn write_feature_dump<W: Write>(
    rows: impl IntoIterator<Item = (u64, u64, ExplicitFeatures)>,
    w: &mut W,
) -> std::io::Result<()> {
    write!(w, "main_id\tsub_id")?;
    for name in ExplicitFeatures::NAMES {
        write!(w, "\t{name}")?;
    }
    writeln!(w)?;
    for (main, sub, f) in rows {
        write!(w, "{main}\t{sub}")?;
        for v in f.to_array() {
            write!(w, "\t{v:.9}")?;
        }
        writeln!(w)?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Corpus;
    use ndarray::array;

    fn toks(words: &[&str]) -> Vec<String> {
        words.iter().map(|w| w.to_string()).collect()
    }

    #[test]
    fn title_overlap_examples() {
        assert_eq!(
            token_overlap_ratio(
                &toks(&["harry", "potter"]),
                &toks(&["harry", "potter", "in", "translation"])
            ),
            1.0
        );
        assert_eq!(
            token_overlap_ratio(&toks(&["bundeswehr"]), &toks(&["german", "army"])),
            0.0
        );
        let a = toks(&["x", "y", "z"]);
        assert_eq!(token_overlap_ratio(&a, &a), 1.0);
        assert_eq!(token_overlap_ratio(&[], &a), 0.0);
        // set semantics
        assert_eq!(
            token_overlap_ratio(&toks(&["x", "x", "y"]), &toks(&["x"])),
            0.5
        );
    }

    #[test]
    fn section_overlap_examples() {
        let none = Article::from_parts(1, "a", "", &[], &[], &[]);
        let hist = Article::from_parts(2, "b", "", &["History"], &[], &[]);
        let two = Article::from_parts(3, "c", "", &["History", "Economy"], &[], &[]);
        let half = Article::from_parts(4, "d", "", &["Early history", "Culture"], &[], &[]);
        assert_eq!(section_title_overlap(&none, &two), 0.0);
        assert_eq!(section_title_overlap(&two, &none), 0.0);
        assert_eq!(section_title_overlap(&hist, &two), 1.0);
        assert_eq!(section_title_overlap(&half, &two), 0.5);
    }

    #[test]
    fn template_overlap_examples() {
        let plain = Article::from_parts(1, "Germany", "", &[], &[], &[]);
        let army = Article::from_parts(2, "German Army", "", &[], &[], &[]);
        let with_army = Article::from_parts(3, "Germany 2", "", &[], &[], &["German Army"]);
        let with_navy = Article::from_parts(4, "Germany 3", "", &[], &[], &["German Navy"]);
        assert_eq!(main_template_overlap(&plain, &army), 0.0);
        assert_eq!(main_template_overlap(&with_army, &army), 1.0);
        assert_eq!(main_template_overlap(&with_navy, &army), 0.5);
    }

    fn star_graph() -> (Corpus, LinkGraph) {
        // 1..=9 link to 100, 1..=4 link to 200; nothing links to 300
        let mut arts = vec![];
        for id in 1..=9u64 {
            let links: Vec<u64> = if id <= 4 { vec![100, 200] } else { vec![100] };
            arts.push(Article::from_parts(
                id,
                &format!("n{id}"),
                "",
                &[],
                &links,
                &[],
            ));
        }
        arts.push(Article::from_parts(100, "hub", "", &[], &[], &[]));
        arts.push(Article::from_parts(200, "spoke", "", &[], &[], &[]));
        let mut links99 = vec![];
        for id in 1..=9u64 {
            links99.push(id);
        }
        arts.push(Article::from_parts(300, "big", "", &[], &links99, &[]));
        let c = Corpus::from_articles(arts).unwrap();
        let g = LinkGraph::build(&c);
        (c, g)
    }

    #[test]
    fn degree_ratio_examples() {
        let (_, g) = star_graph();
        assert_eq!(g.in_degree(100).unwrap(), 9);
        assert_eq!(g.in_degree(200).unwrap(), 4);
        assert_eq!(degree_ratio(&g, 100, 200, Direction::In).unwrap(), 2.0);
        assert_eq!(degree_ratio(&g, 100, 200, Direction::Out).unwrap(), 1.0);
        assert!(degree_ratio(&g, 100, 999, Direction::In).is_err());
    }

    #[test]
    fn degree_ratio_with_ninety_nine_links() {
        let mut arts: Vec<Article> = (1..=99u64)
            .map(|id| Article::from_parts(id, &format!("src {id}"), "", &[], &[1000], &[]))
            .collect();
        arts.push(Article::from_parts(1000, "target", "", &[], &[], &[]));
        arts.push(Article::from_parts(2000, "lonely", "", &[], &[], &[]));
        let g = LinkGraph::build(&Corpus::from_articles(arts).unwrap());
        assert!((degree_ratio(&g, 2000, 1000, Direction::In).unwrap() - 0.01).abs() < 1e-15);
    }

    #[test]
    fn term_frequency_examples() {
        let title = toks(&["german", "army"]);
        let mut content: Vec<String> = (0..100).map(|i| format!("w{i}")).collect();
        assert_eq!(term_frequency(&title, &content), 0.0);
        content[10] = "german".into();
        content[11] = "army".into();
        content[50] = "german".into();
        content[51] = "army".into();
        assert!((term_frequency(&title, &content) - 0.02).abs() < 1e-15);
        assert_eq!(term_frequency(&title, &[]), 0.0);
    }

    #[test]
    fn milne_witten_examples() {
        // in(a) = {1,2,3,4}, in(b) = {2,3,4,5}, N = 10
        let mut arts = vec![];
        for id in 1..=5u64 {
            let mut links = vec![];
            if id <= 4 {
                links.push(100);
            }
            if id >= 2 {
                links.push(200);
            }
            arts.push(Article::from_parts(
                id,
                &format!("n{id}"),
                "",
                &[],
                &links,
                &[],
            ));
        }
        arts.push(Article::from_parts(100, "a", "", &[], &[], &[]));
        arts.push(Article::from_parts(200, "b", "", &[], &[], &[]));
        arts.push(Article::from_parts(300, "c", "", &[], &[], &[]));
        arts.push(Article::from_parts(400, "d", "", &[], &[], &[]));
        arts.push(Article::from_parts(500, "e", "", &[], &[], &[]));
        let g = LinkGraph::build(&Corpus::from_articles(arts).unwrap());
        assert_eq!(g.n_articles(), 10);
        let expected = (4f64.ln() - 3f64.ln()) / (10f64.ln() - 4f64.ln());
        let got = milne_witten(&g, 100, 200).unwrap();
        assert!((got - expected).abs() < 1e-15);
        assert!((got - 0.3140).abs() < 1e-4);
        assert_eq!(milne_witten(&g, 100, 100).unwrap(), 0.0);
        assert_eq!(milne_witten(&g, 100, 300).unwrap(), 1.0);
    }

    #[test]
    fn disjoint_in_links_are_maximally_distant() {
        let (_, g) = star_graph();
        // in(300) is empty
        assert_eq!(milne_witten(&g, 100, 300).unwrap(), 1.0);
        assert!(milne_witten(&g, 100, 12345).is_err());
    }

    #[test]
    fn title_embedding_distance_examples() {
        let table = EmbeddingTable::new(toks(&["x", "y"]), array![[1.0, 0.0], [0.0, 2.0]]).unwrap();
        assert_eq!(
            title_embedding_distance(&table, &toks(&["x"]), &toks(&["x"])),
            0.0
        );
        assert!(
            (title_embedding_distance(&table, &toks(&["x"]), &toks(&["y"])) - 1.0).abs() < 1e-15
        );
        assert_eq!(
            title_embedding_distance(&table, &toks(&["p"]), &toks(&["q"])),
            1.0
        );
        // OOV tokens are skipped, not counted as distance 1
        assert_eq!(
            title_embedding_distance(&table, &toks(&["x", "p"]), &toks(&["x"])),
            0.0
        );
    }

    #[test]
    fn content_overlap_examples() {
        let c = toks(&["a", "b", "c"]);
        assert_eq!(content_overlap(&c, &c), 1.0);
        assert_eq!(content_overlap(&c, &toks(&["d"])), 0.0);
        assert_eq!(
            content_overlap(
                &toks(&["a", "b", "c", "d"]),
                &toks(&["a", "b", "e", "f", "g", "h"])
            ),
            0.5
        );
        assert_eq!(content_overlap(&[], &c), 0.0);
    }

    #[test]
    fn identity_pair_features() {
        let (c, g) = star_graph();
        let table = EmbeddingTable::new(toks(&["hub"]), array![[1.0]]).unwrap();
        let hub = Article::from_parts(100, "hub", "the hub text", &["Intro"], &[], &[]);
        let f = extract(&hub, &hub, &g, &table).unwrap();
        assert_eq!(f.r_tto, 1.0);
        assert_eq!(f.r_dt, 1.0);
        assert_eq!(f.r_st, 1.0);
        assert_eq!(f.d_mw, 0.0);
        assert_eq!(f.r_indeg, 1.0);
        assert_eq!(f.r_outdeg, 1.0);
        assert_eq!(f.d_te, 0.0);
        assert!(c.contains(100));
    }

    #[test]
    fn disjoint_pair_features() {
        let (_, g) = star_graph();
        let table = EmbeddingTable::new(toks(&["q"]), array![[1.0]]).unwrap();
        let a = Article::from_parts(100, "hub", "alpha beta", &["One"], &[], &["Zeta"]);
        let b = Article::from_parts(300, "big", "gamma delta", &["Two"], &[], &[]);
        let f = extract(&a, &b, &g, &table).unwrap();
        assert_eq!(
            (f.r_tto, f.r_st, f.r_mt, f.r_dt, f.d_mw),
            (0.0, 0.0, 0.0, 0.0, 1.0)
        );
    }

    #[test]
    fn scaler_behaviour() {
        let feats: Vec<ExplicitFeatures> = [0.0, 0.5, 1.0]
            .iter()
            .map(|&x| ExplicitFeatures {
                f_tf: x,
                d_te: 2.0 * x,
                ..Default::default()
            })
            .collect();
        let s = FeatureScaler::fit(&feats);
        for f in &feats {
            let g = s.apply(f);
            assert_eq!(g.f_tf, f.f_tf);
            assert_eq!(g.d_te, f.f_tf);
        }
        let above = ExplicitFeatures {
            f_tf: 7.0,
            d_te: -1.0,
            ..Default::default()
        };
        let g = s.apply(&above);
        assert_eq!((g.f_tf, g.d_te), (1.0, 0.0));

        let constant = vec![
            ExplicitFeatures {
                f_tf: 0.3,
                ..Default::default()
            };
            4
        ];
        let s = FeatureScaler::fit(&constant);
        assert_eq!(s.apply(&constant[0]).f_tf, 0.0);
        assert_eq!(s.apply(&above).f_tf, 0.0);
    }

    #[test]
    fn scaled_check_rejects_raw_values() {
        let ok = ExplicitFeatures {
            r_indeg: 3.0,
            r_outdeg: 0.2,
            ..Default::default()
        };
        assert!(ok.check_scaled().is_ok());
        let bad = ExplicitFeatures { f_tf: 1.5, ..ok };
        assert!(matches!(
            bad.check_scaled(),
            Err(Error::UnscaledFeature { name: "f_TF", .. })
        ));
        let zero_ratio = ExplicitFeatures { r_indeg: 0.0, ..ok };
        assert!(zero_ratio.check_scaled().is_err());
    }

    #[test]
    fn feature_dump_format() {
        let f =
            ExplicitFeatures::from_array([1.0, 0.5, 2.0, 0.0, 0.25, 1.0, 1.0, 0.125, 1.0 / 3.0]);
        let mut buf = Vec::new();
        write_feature_dump([(4, 9, f)], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let line = text.lines().nth(1).unwrap();
        assert_eq!(
            line,
            "4\t9\t1.000000000\t0.500000000\t2.000000000\t0.000000000\t0.250000000\t1.000000000\t1.000000000\t0.125000000\t0.333333333"
        );
    }
}
