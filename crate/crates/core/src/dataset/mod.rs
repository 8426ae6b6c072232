//! Labeled article pairs: file format, negative generation, fold splits and
//! a planted-signal corpus generator.

mod folds;
mod negatives;
mod synth;

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use folds::{make_folds, FoldSplit};
pub use negatives::{
    invert_positives, sibling_negatives, substitution_negatives, MIN_NEGATIVES_PER_MAIN,
};
pub use synth::{synth_corpus, SyntheticData, SyntheticSpec, ASPECTS, DECOYS};

use crate::corpus::LinkGraph;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Given,
    Inverted,
    Sibling,
    Substitution,
    Synthetic,
}

impl Source {
    pub fn name(self) -> &'static str {
        match self {
            Source::Given => "given",
            Source::Inverted => "inverted",
            Source::Sibling => "sibling",
            Source::Substitution => "substitution",
            Source::Synthetic => "synthetic",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Source {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        [
            Source::Given,
            Source::Inverted,
            Source::Sibling,
            Source::Substitution,
            Source::Synthetic,
        ]
        .into_iter()
        .find(|x| x.name() == s)
        .ok_or_else(|| format!("unknown pair source {s:?}"))
    }
}

/// An ordered candidate pair `(main, sub)` with its label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LabeledPair {
    pub main_id: u64,
    pub sub_id: u64,
    pub label: bool,
    pub source: Source,
}

impl LabeledPair {
    pub fn new(main_id: u64, sub_id: u64, label: bool, source: Source) -> Self {
        debug_assert_ne!(main_id, sub_id, "self-pairs are not candidates");
        LabeledPair {
            main_id,
            sub_id,
            label,
            source,
        }
    }

    pub fn positive(main_id: u64, sub_id: u64) -> Self {
        LabeledPair::new(main_id, sub_id, true, Source::Given)
    }

    pub fn key(&self) -> (u64, u64) {
        (self.main_id, self.sub_id)
    }
}

/// Tab-separated `main_id`, `sub_id`, `label` (0 or 1) and an optional
/// fourth `source` column, written only for sources other than `given`.
pub fn read_pairs(path: &Path) -> Result<Vec<LabeledPair>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_pairs_from(BufReader::new(file), path)
}

pub fn read_pairs_from<R: BufRead>(reader: R, path: &Path) -> Result<Vec<LabeledPair>> {
    let mut pairs = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.is_empty() {
            continue;
        }
        let fail = |message: String| Error::Parse {
            path: path.to_owned(),
            line: i + 1,
            message,
        };
        let cols: Vec<&str> = line.split('\t').collect();
        if !(3..=4).contains(&cols.len()) {
            return Err(fail(format!(
                "expected 3 or 4 tab-separated columns, found {}",
                cols.len()
            )));
        }
        let id = |s: &str| {
            s.parse::<u64>()
                .map_err(|_| fail(format!("bad article id {s:?}")))
        };
        let main_id = id(cols[0])?;
        let sub_id = id(cols[1])?;
        let label = match cols[2] {
            "1" => true,
            "0" => false,
            other => return Err(fail(format!("label must be 0 or 1, found {other:?}"))),
        };
        let source = match cols.get(3) {
            Some(s) => s.parse().map_err(fail)?,
            None => Source::Given,
        };
        if main_id == sub_id {
            return Err(fail(format!("self-pair ({main_id}, {sub_id})")));
        }
        pairs.push(LabeledPair::new(main_id, sub_id, label, source));
    }
    Ok(pairs)
}

pub fn write_pairs(pairs: &[LabeledPair], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_pairs_to(pairs, &mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn write_pairs_to<W: Write>(pairs: &[LabeledPair], w: &mut W) -> std::io::Result<()> {
    for p in pairs {
        write!(w, "{}\t{}\t{}", p.main_id, p.sub_id, p.label as u8)?;
        if p.source != Source::Given {
            write!(w, "\t{}", p.source)?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Positives followed by inverted, sibling and substitution negatives.
/// Negatives that repeat an earlier pair, positive or negative, are dropped.
pub fn assemble(
    positives: &[LabeledPair],
    graph: &LinkGraph,
    known_negatives: &[(u64, u64)],
    min_per_main: usize,
    seed: u64,
) -> Result<Vec<LabeledPair>> {
    let mut seen: HashSet<(u64, u64)> = HashSet::new();
    let mut out = Vec::new();
    for p in positives {
        if seen.insert(p.key()) {
            out.push(*p);
        }
    }
    let mut push_new = |batch: Vec<LabeledPair>, out: &mut Vec<LabeledPair>| {
        for p in batch {
            if seen.insert(p.key()) {
                out.push(p);
            }
        }
    };
    push_new(invert_positives(positives), &mut out);
    push_new(sibling_negatives(positives), &mut out);
    let existing: Vec<LabeledPair> = out.iter().filter(|p| !p.label).copied().collect();
    let extra = substitution_negatives(
        positives,
        &existing,
        graph,
        known_negatives,
        min_per_main,
        seed,
    )?;
    push_new(extra, &mut out);
    Ok(out)
}
