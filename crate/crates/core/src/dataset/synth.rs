//! Planted-signal corpus. Every main-article owns a two-word entity name and
//! a few topic words. Its sub-articles are titled "<aspect> of <name>", its
//! confusers "<decoy> of <name>"; both kinds share the main's title tokens,
//! mention the name in their first paragraph, link back to the main and are
//! linked from it, so only the aspect/decoy title word tells them apart.
//! Distractor articles draw from a disjoint vocabulary and are reachable
//! through the sub-articles' links.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{LabeledPair, Source};
use crate::corpus::{Article, Corpus, CorpusRecord, TokenTrie};
use crate::error::{Error, Result};

pub const ASPECTS: [&str; 8] = [
    "history",
    "economy",
    "geography",
    "culture",
    "politics",
    "demographics",
    "architecture",
    "climate",
];

pub const DECOYS: [&str; 8] = [
    "list",
    "index",
    "outline",
    "glossary",
    "bibliography",
    "discography",
    "filmography",
    "roster",
];

const SYLLABLES: [&str; 16] = [
    "ka", "lo", "mi", "ra", "ne", "to", "su", "vi", "da", "pe", "zu", "go", "ri", "sa", "ho", "fe",
];

const ENTITY_WORDS: usize = 0;
const TOPIC_WORDS: usize = 20_000;
const GENERAL_WORDS: usize = 40_000;
const DISTRACTOR_WORDS: usize = 50_000;
const SECTION_WORDS: usize = 60_000;
const SECTION_POOL: usize = 12;

fn pseudo_word(mut n: usize) -> String {
    let mut w = String::with_capacity(8);
    for _ in 0..4 {
        w.push_str(SYLLABLES[n % 16]);
        n /= 16;
    }
    w
}

fn capitalized(w: &str) -> String {
    let mut c = w.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SyntheticSpec {
    pub n_mains: usize,
    pub subs_per_main: usize,
    /// Negatives each main-article should end up with; the generator links
    /// enough distractors to make this reachable.
    pub negatives_per_main: usize,
    pub confusers_per_main: usize,
    /// Size of the shared first-paragraph vocabulary.
    pub vocab_size: usize,
    /// Topic words per main-article, shared with its subs and confusers.
    pub topic_tokens: usize,
    pub distractors_per_main: usize,
    pub links_per_sub: usize,
    pub paragraph_len: usize,
    /// Probability that a sub-article is listed in its main's template.
    pub anchor_rate: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_mains: 100,
            subs_per_main: 2,
            negatives_per_main: 15,
            confusers_per_main: 2,
            vocab_size: 300,
            topic_tokens: 4,
            distractors_per_main: 3,
            links_per_sub: 10,
            paragraph_len: 30,
            anchor_rate: 0.3,
            seed: 1,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("synthetic spec: {m}")));
        if self.n_mains == 0
            || self.subs_per_main == 0
            || self.vocab_size < 2
            || self.paragraph_len == 0
        {
            return bad("mains, subs per main, vocabulary and paragraph length must be positive");
        }
        if self.subs_per_main > ASPECTS.len() || self.confusers_per_main > DECOYS.len() {
            return bad("too many subs or confusers per main for the aspect/decoy word lists");
        }
        if self.n_mains * 2 + self.n_mains * self.distractors_per_main * 2 > TOPIC_WORDS
            || self.n_mains * self.topic_tokens > GENERAL_WORDS - TOPIC_WORDS
            || self.vocab_size > DISTRACTOR_WORDS - GENERAL_WORDS
        {
            return bad("too large for the word namespaces");
        }
        if self.distractors_per_main * self.n_mains
            < self.links_per_sub.max(self.covered_distractors())
        {
            return bad(
                "not enough distractors for the requested links per sub or negatives per main",
            );
        }
        if !(0.0..=1.0).contains(&self.anchor_rate) {
            return bad("anchor rate must lie in [0, 1]");
        }
        Ok(())
    }

    /// Distinct distractors each main's subs must link between them so that
    /// substitution can reach the negative floor after the confusers.
    fn covered_distractors(&self) -> usize {
        self.negatives_per_main
            .saturating_sub(self.confusers_per_main)
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticData {
    pub corpus: Corpus,
    pub positives: Vec<LabeledPair>,
    /// `(main, confuser)` pairs known not to be sub-article relations.
    pub known_negatives: Vec<(u64, u64)>,
    /// Entity names, for multi-word tokenization.
    pub dictionary: Vec<String>,
}

impl SyntheticData {
    pub fn trie(&self) -> TokenTrie {
        TokenTrie::from_entries(&self.dictionary)
    }

    pub fn records(&self) -> impl Iterator<Item = &CorpusRecord> {
        self.corpus.articles().map(Article::record)
    }
}

struct Builder {
    rng: ChaCha8Rng,
    records: Vec<CorpusRecord>,
    sections: Vec<String>,
}

impl Builder {
    fn sections(&mut self) -> Vec<String> {
        self.sections
            .choose_multiple(&mut self.rng, 2)
            .cloned()
            .collect()
    }

    /// Words of `phrase` stay together; everything else is shuffled.
    fn paragraph(
        &mut self,
        phrase: &str,
        mentions: usize,
        topics: &[String],
        n_topic: usize,
        pool: (usize, usize),
        len: usize,
    ) -> String {
        let mut units: Vec<String> = (0..mentions).map(|_| phrase.to_owned()).collect();
        for _ in 0..n_topic.min(len) {
            if let Some(t) = topics.choose(&mut self.rng) {
                units.push(t.clone());
            }
        }
        while units.len() < len {
            units.push(pseudo_word(self.rng.gen_range(pool.0..pool.0 + pool.1)));
        }
        units.shuffle(&mut self.rng);
        units.join(" ")
    }
}

pub fn synth_corpus(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let mut b = Builder {
        rng: ChaCha8Rng::seed_from_u64(spec.seed),
        records: Vec::new(),
        sections: (0..SECTION_POOL)
            .map(|i| pseudo_word(SECTION_WORDS + i))
            .collect(),
    };
    let n = spec.n_mains as u64;
    let per = spec.subs_per_main as u64;
    let conf = spec.confusers_per_main as u64;
    let main_id = |m: u64| 1 + m;
    let sub_id = |m: u64, s: u64| 1 + n + m * per + s;
    let confuser_id = |m: u64, c: u64| 1 + n + n * per + m * conf + c;
    let n_distractors = (spec.distractors_per_main * spec.n_mains) as u64;
    let first_distractor = 1 + n + n * per + n * conf;
    let distractor_ids: Vec<u64> = (first_distractor..first_distractor + n_distractors).collect();
    let general = (GENERAL_WORDS, spec.vocab_size);

    let mut positives = Vec::new();
    let mut known_negatives = Vec::new();
    let mut dictionary = Vec::new();
    for m in 0..n {
        let name = format!(
            "{} {}",
            capitalized(&pseudo_word(ENTITY_WORDS + 2 * m as usize)),
            capitalized(&pseudo_word(ENTITY_WORDS + 2 * m as usize + 1))
        );
        dictionary.push(name.to_lowercase());
        let topics: Vec<String> = (0..spec.topic_tokens)
            .map(|t| pseudo_word(TOPIC_WORDS + m as usize * spec.topic_tokens + t))
            .collect();
        let aspects: Vec<&str> = ASPECTS
            .choose_multiple(&mut b.rng, spec.subs_per_main)
            .copied()
            .collect();
        let decoys: Vec<&str> = DECOYS
            .choose_multiple(&mut b.rng, spec.confusers_per_main)
            .copied()
            .collect();

        let cover: Vec<u64> = distractor_ids
            .choose_multiple(&mut b.rng, spec.covered_distractors())
            .copied()
            .collect();
        let mut anchors = Vec::new();
        let mut main_links = Vec::new();
        let related: Vec<(u64, String)> = aspects
            .iter()
            .enumerate()
            .map(|(s, a)| (sub_id(m, s as u64), format!("{} of {name}", capitalized(a))))
            .chain(decoys.iter().enumerate().map(|(c, d)| {
                (
                    confuser_id(m, c as u64),
                    format!("{} of {name}", capitalized(d)),
                )
            }))
            .collect();
        for (i, (id, title)) in related.iter().enumerate() {
            let is_sub = i < aspects.len();
            main_links.push(*id);
            if is_sub {
                positives.push(LabeledPair::new(main_id(m), *id, true, Source::Synthetic));
                if b.rng.gen_bool(spec.anchor_rate) {
                    anchors.push(title.clone());
                }
            } else {
                known_negatives.push((main_id(m), *id));
            }
            let mut links = vec![main_id(m)];
            if is_sub {
                links.extend(cover.iter().skip(i).step_by(aspects.len()));
            }
            for &d in distractor_ids.choose_multiple(&mut b.rng, spec.links_per_sub) {
                if links.len() > spec.links_per_sub {
                    break;
                }
                if !links.contains(&d) {
                    links.push(d);
                }
            }
            let mentions = b.rng.gen_range(1..=2);
            let paragraph = b.paragraph(&name, mentions, &topics, 6, general, spec.paragraph_len);
            let sections = b.sections();
            b.records.push(CorpusRecord {
                id: *id,
                title: title.clone(),
                first_paragraph: paragraph,
                section_titles: sections,
                links,
                main_template_anchors: Vec::new(),
            });
        }
        main_links.extend(distractor_ids.choose_multiple(&mut b.rng, 3.min(distractor_ids.len())));
        let paragraph = b.paragraph(&name, 1, &topics, 6, general, spec.paragraph_len);
        let sections = b.sections();
        b.records.push(CorpusRecord {
            id: main_id(m),
            title: name,
            first_paragraph: paragraph,
            section_titles: sections,
            links: main_links,
            main_template_anchors: anchors,
        });
    }
    for (i, &id) in distractor_ids.iter().enumerate() {
        let title = format!(
            "{} {}",
            capitalized(&pseudo_word(ENTITY_WORDS + 2 * spec.n_mains + 2 * i)),
            capitalized(&pseudo_word(ENTITY_WORDS + 2 * spec.n_mains + 2 * i + 1))
        );
        let links: Vec<u64> = distractor_ids
            .choose_multiple(&mut b.rng, 4.min(distractor_ids.len()))
            .copied()
            .filter(|&l| l != id)
            .take(3)
            .collect();
        // Aspect and decoy words each get their own background context.
        let half = spec.vocab_size / 2;
        let (words, pool) = if i % 2 == 0 {
            (&ASPECTS, (DISTRACTOR_WORDS, half))
        } else {
            (&DECOYS, (DISTRACTOR_WORDS + half, spec.vocab_size - half))
        };
        let words: Vec<String> = words.iter().map(|w| w.to_string()).collect();
        let paragraph = b.paragraph(&title, 1, &words, 2, pool, spec.paragraph_len);
        let sections = b.sections();
        b.records.push(CorpusRecord {
            id,
            title,
            first_paragraph: paragraph,
            section_titles: sections,
            links,
            main_template_anchors: Vec::new(),
        });
    }

    let trie = TokenTrie::from_entries(&dictionary);
    let articles = b.records.into_iter().map(|r| {
        let id = r.id;
        Article::from_record(r, &trie)
            .unwrap_or_else(|| panic!("generated article {id} has an empty title"))
    });
    Ok(SyntheticData {
        corpus: Corpus::from_articles(articles)?,
        positives,
        known_negatives,
        dictionary,
    })
}
