use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{LabeledPair, Source};
use crate::corpus::LinkGraph;
use crate::error::{Error, Result};

pub const MIN_NEGATIVES_PER_MAIN: usize = 15;

/// `(sub, main)` as a negative for every positive `(main, sub)`.
pub fn invert_positives(positives: &[LabeledPair]) -> Vec<LabeledPair> {
    positives
        .iter()
        .map(|p| LabeledPair::new(p.sub_id, p.main_id, false, Source::Inverted))
        .collect()
}

fn subs_by_main(positives: &[LabeledPair]) -> BTreeMap<u64, BTreeSet<u64>> {
    let mut by_main: BTreeMap<u64, BTreeSet<u64>> = BTreeMap::new();
    for p in positives.iter().filter(|p| p.label) {
        by_main.entry(p.main_id).or_default().insert(p.sub_id);
    }
    by_main
}

/// Both orders of every pair of sub-articles sharing a main-article.
pub fn sibling_negatives(positives: &[LabeledPair]) -> Vec<LabeledPair> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for subs in subs_by_main(positives).values() {
        for &a in subs {
            for &b in subs {
                if a != b && seen.insert((a, b)) {
                    out.push(LabeledPair::new(a, b, false, Source::Sibling));
                }
            }
        }
    }
    out
}

/// Tops up every main-article to `min_per_main` negatives (counting the
/// `existing` negatives whose main side it is) by replacing the sub side.
/// Known negatives `(main, article)` are used first; the rest are sampled
/// without replacement from articles linked by the main's sub-articles.
/// Output is sorted by `(main, sub)`.
pub fn substitution_negatives(
    positives: &[LabeledPair],
    existing: &[LabeledPair],
    graph: &LinkGraph,
    known_negatives: &[(u64, u64)],
    min_per_main: usize,
    seed: u64,
) -> Result<Vec<LabeledPair>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let positive_keys: HashSet<(u64, u64)> = positives
        .iter()
        .filter(|p| p.label)
        .map(|p| p.key())
        .collect();
    let mut taken: HashSet<(u64, u64)> = existing
        .iter()
        .filter(|p| !p.label)
        .map(|p| p.key())
        .collect();
    let mut have: BTreeMap<u64, usize> = BTreeMap::new();
    for &(m, _) in &taken {
        *have.entry(m).or_default() += 1;
    }
    let mut known: BTreeMap<u64, BTreeSet<u64>> = BTreeMap::new();
    for &(m, c) in known_negatives {
        known.entry(m).or_default().insert(c);
    }

    let mut out = Vec::new();
    let (mut deficit, mut short) = (0, 0);
    for (&main, subs) in &subs_by_main(positives) {
        let count = have.get(&main).copied().unwrap_or(0);
        if count >= min_per_main {
            continue;
        }
        let need = min_per_main - count;
        let usable = |c: u64, taken: &HashSet<(u64, u64)>| {
            c != main
                && graph.contains(c)
                && !positive_keys.contains(&(main, c))
                && !taken.contains(&(main, c))
        };
        let mut from_known: Vec<u64> = known
            .get(&main)
            .map(|k| k.iter().copied().filter(|&c| usable(c, &taken)).collect())
            .unwrap_or_default();
        let mut linked = BTreeSet::new();
        for &s in subs {
            for &c in graph.out_links(s)? {
                if usable(c, &taken) && !from_known.contains(&c) {
                    linked.insert(c);
                }
            }
        }
        let mut linked: Vec<u64> = linked.into_iter().collect();

        let mut chosen: Vec<u64> = if from_known.len() >= need {
            from_known.shuffle(&mut rng);
            from_known.truncate(need);
            from_known
        } else {
            let rest = need - from_known.len();
            if linked.len() < rest {
                deficit += rest - linked.len();
                short += 1;
            } else {
                linked.shuffle(&mut rng);
                linked.truncate(rest);
            }
            from_known.extend(linked);
            from_known
        };
        chosen.sort_unstable();
        for c in chosen {
            taken.insert((main, c));
            out.push(LabeledPair::new(main, c, false, Source::Substitution));
        }
    }
    if deficit > 0 {
        return Err(Error::NegativeDeficit {
            deficit,
            mains: short,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Article, Corpus};

    fn pos(pairs: &[(u64, u64)]) -> Vec<LabeledPair> {
        pairs
            .iter()
            .map(|&(m, s)| LabeledPair::positive(m, s))
            .collect()
    }

    fn keys(pairs: &[LabeledPair]) -> Vec<(u64, u64)> {
        pairs.iter().map(|p| p.key()).collect()
    }

    /// Articles `1..=n`; `links[i]` are the outlinks of article `i + 1`.
    fn graph(n: u64, links: &[(u64, &[u64])]) -> LinkGraph {
        let articles = (1..=n).map(|id| {
            let out = links
                .iter()
                .find(|(a, _)| *a == id)
                .map(|(_, l)| *l)
                .unwrap_or(&[]);
            Article::from_parts(id, &format!("article {id}"), "", &[], out, &[])
        });
        LinkGraph::build(&Corpus::from_articles(articles).unwrap())
    }

    #[test]
    fn inversion() {
        let inv = invert_positives(&pos(&[(1, 2), (3, 4)]));
        assert_eq!(keys(&inv), vec![(2, 1), (4, 3)]);
        assert!(inv.iter().all(|p| !p.label && p.source == Source::Inverted));
        assert!(invert_positives(&[]).is_empty());
    }

    #[test]
    fn siblings() {
        assert!(sibling_negatives(&pos(&[(1, 2)])).is_empty());
        assert_eq!(
            keys(&sibling_negatives(&pos(&[(1, 2), (1, 3)]))),
            vec![(2, 3), (3, 2)]
        );
        let three = sibling_negatives(&pos(&[(1, 4), (1, 2), (1, 3)]));
        assert_eq!(three.len(), 6);
        assert_eq!(
            keys(&three),
            vec![(2, 3), (2, 4), (3, 2), (3, 4), (4, 2), (4, 3)]
        );
    }

    #[test]
    fn floor_already_met_adds_nothing() {
        let g = graph(30, &[(2, &[5, 6, 7])]);
        let existing: Vec<LabeledPair> = (10..30)
            .map(|s| LabeledPair::new(1, s, false, Source::Given))
            .collect();
        let added = substitution_negatives(&pos(&[(1, 2)]), &existing, &g, &[], 15, 0).unwrap();
        assert!(added.is_empty());
    }

    #[test]
    fn known_negatives_come_first_then_links() {
        let links: Vec<u64> = (10..30).collect();
        let g = graph(40, &[(2, &links), (3, &[1, 31])]);
        let positives = pos(&[(1, 2), (1, 3)]);
        let known = [(1, 35), (1, 36), (1, 2)];
        let a = substitution_negatives(&positives, &[], &g, &known, 15, 4).unwrap();
        let b = substitution_negatives(&positives, &[], &g, &known, 15, 4).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 15);
        let subs: BTreeSet<u64> = a.iter().map(|p| p.sub_id).collect();
        assert!(subs.contains(&35) && subs.contains(&36));
        assert!(!subs.contains(&1) && !subs.contains(&2) && !subs.contains(&3));
        assert!(subs
            .iter()
            .all(|s| (10..=31).contains(s) || *s == 35 || *s == 36));
        assert!(a.windows(2).all(|w| w[0].key() < w[1].key()));
    }

    #[test]
    fn deficit_is_reported() {
        let g = graph(10, &[(2, &[5, 6, 7])]);
        let err = substitution_negatives(&pos(&[(1, 2)]), &[], &g, &[], 15, 0).unwrap_err();
        assert!(
            matches!(
                err,
                Error::NegativeDeficit {
                    deficit: 12,
                    mains: 1
                }
            ),
            "{err}"
        );
    }
}
