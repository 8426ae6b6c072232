use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use subarticle::corpus::{load_corpus, write_corpus, write_records, Corpus, LinkGraph, TokenTrie};
use subarticle::dataset::{
    assemble, read_pairs, synth_corpus, write_pairs, LabeledPair, SyntheticSpec,
};
use subarticle::embeddings::{train_skipgram, EmbeddingTable};
use subarticle::eval::report::{
    write_ablation_tsv, write_importance_tsv, write_keyed, write_metrics_tsv, write_per_fold_tsv,
    write_predictions_tsv, write_sensitivity_tsv,
};
use subarticle::eval::{
    ablate, cross_validate, garson_importance, sensitivity, MetricsReport, PreparedPairs,
};
use subarticle::features::{extract, write_feature_dump};
use subarticle::model::Checkpoint;
use subarticle::serve::{extract_candidates, serve, write_scored, Scorer, ServeConfig};

use crate::args::*;
use crate::manifest::{manifest_path_for, Run};

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn write_file(
    path: &Path,
    body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<()> {
    let mut w = create(path)?;
    body(&mut w)
        .and_then(|_| w.flush())
        .with_context(|| format!("writing {}", path.display()))
}

fn read_dictionary(path: &Path) -> Result<TokenTrie> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut entries = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line?;
        if !line.trim().is_empty() {
            entries.push(line);
        }
    }
    Ok(TokenTrie::from_entries(&entries))
}

fn load(args: &CorpusArgs, run: &mut Run) -> Result<Corpus> {
    let trie = match &args.dictionary {
        Some(p) => read_dictionary(&run.input(p))?,
        None => TokenTrie::new(),
    };
    let (corpus, report) = load_corpus(&run.input(&args.corpus), &trie)?;
    log::info!(
        "loaded {} articles from {}",
        report.loaded,
        args.corpus.display()
    );
    Ok(corpus)
}

fn read_known_negatives(path: &Path) -> Result<Vec<(u64, u64)>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let parsed = line
            .split_once('\t')
            .and_then(|(a, b)| Some((a.parse().ok()?, b.parse().ok()?)));
        let pair = parsed.ok_or_else(|| subarticle::Error::Parse {
            path: path.to_owned(),
            line: i + 1,
            message: "expected main_id<TAB>article_id".into(),
        })?;
        out.push(pair);
    }
    Ok(out)
}

pub struct Settings {
    pub threads: usize,
}

fn json<T: serde::Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).unwrap_or(serde_json::Value::Null)
}

pub fn run(command: &Command, ctx: &Settings) -> Result<()> {
    let name = command.name();
    match command {
        Command::CorpusBuild(a) => {
            let mut run = Run::new(name, json(a), None, ctx.threads);
            let trie = match &a.dictionary {
                Some(p) => read_dictionary(&run.input(p))?,
                None => TokenTrie::new(),
            };
            let (corpus, report) = load_corpus(&run.input(&a.input), &trie)?;
            for (line, why) in &report.malformed {
                log::warn!("{}:{line}: {why}", a.input.display());
            }
            write_corpus(&corpus, &run.output(&a.output))?;
            println!(
                "{} articles written, {} lines skipped",
                report.loaded,
                report.malformed.len()
            );
            run.finish(&manifest_path_for(&a.output))?;
        }
        Command::EmbedTrain(a) => {
            let mut run = Run::new(name, json(a), Some(a.seed), ctx.threads);
            let corpus = load(&a.corpus, &mut run)?;
            let table = train_skipgram(&corpus.sentences(), &a.skipgram())?;
            table.write(&run.output(&a.output))?;
            println!("{} tokens x {} dims", table.len(), table.dim());
            run.finish(&manifest_path_for(&a.output))?;
        }
        Command::FeaturesExtract(a) => {
            let mut run = Run::new(name, json(a), None, ctx.threads);
            let corpus = load(&a.corpus, &mut run)?;
            let table = EmbeddingTable::read(&run.input(&a.embeddings))?;
            let pairs = read_pairs(&run.input(&a.pairs))?;
            let graph = LinkGraph::build(&corpus);
            let rows = pairs
                .iter()
                .map(|p| {
                    let f = extract(
                        corpus.article(p.main_id)?,
                        corpus.article(p.sub_id)?,
                        &graph,
                        &table,
                    )?;
                    Ok((p.main_id, p.sub_id, f))
                })
                .collect::<subarticle::Result<Vec<_>>>()?;
            write_file(&run.output(&a.output), |w| write_feature_dump(rows, w))?;
            run.finish(&manifest_path_for(&a.output))?;
        }
        Command::DatasetSynth(a) => {
            let mut run = Run::new(name, json(a), Some(a.seed), ctx.threads);
            let spec = SyntheticSpec {
                n_mains: a.mains,
                subs_per_main: a.subs_per_main,
                negatives_per_main: a.negatives_per_main,
                confusers_per_main: a.confusers_per_main,
                vocab_size: a.vocab_size,
                topic_tokens: a.topic_tokens,
                distractors_per_main: a.distractors_per_main,
                links_per_sub: a.links_per_sub,
                paragraph_len: a.paragraph_len,
                anchor_rate: a.anchor_rate,
                seed: a.seed,
            };
            let data = synth_corpus(&spec)?;
            let graph = LinkGraph::build(&data.corpus);
            let pairs = assemble(
                &data.positives,
                &graph,
                &data.known_negatives,
                spec.negatives_per_main,
                spec.seed,
            )?;
            let dir = &a.output_dir;
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            write_file(&run.output(&dir.join("corpus.jsonl")), |w| {
                write_records(data.records(), w)
            })?;
            write_file(&run.output(&dir.join("dictionary.txt")), |w| {
                data.dictionary.iter().try_for_each(|d| writeln!(w, "{d}"))
            })?;
            write_pairs(&data.positives, &run.output(&dir.join("positives.tsv")))?;
            write_file(&run.output(&dir.join("known_negatives.tsv")), |w| {
                data.known_negatives
                    .iter()
                    .try_for_each(|(m, c)| writeln!(w, "{m}\t{c}"))
            })?;
            write_pairs(&pairs, &run.output(&dir.join("pairs.tsv")))?;
            println!(
                "{} articles, {} positives, {} pairs",
                data.corpus.len(),
                data.positives.len(),
                pairs.len()
            );
            run.finish(&dir.join("manifest.json"))?;
        }
        Command::DatasetBuild(a) => {
            let mut run = Run::new(name, json(a), Some(a.seed), ctx.threads);
            let corpus = load(&a.corpus, &mut run)?;
            let positives: Vec<LabeledPair> = read_pairs(&run.input(&a.positives))?
                .into_iter()
                .filter(|p| p.label)
                .collect();
            let known = match &a.known_negatives {
                Some(p) => read_known_negatives(&run.input(p))?,
                None => Vec::new(),
            };
            let graph = LinkGraph::build(&corpus);
            let pairs = assemble(&positives, &graph, &known, a.min_negatives, a.seed)?;
            write_pairs(&pairs, &run.output(&a.output))?;
            let negatives = pairs.iter().filter(|p| !p.label).count();
            println!(
                "{} positives, {negatives} negatives",
                pairs.len() - negatives
            );
            run.finish(&manifest_path_for(&a.output))?;
        }
        Command::Train(a) => {
            let mut run = Run::new(name, json(a), Some(a.model.seed), ctx.threads);
            let (data, table) = prepare(&a.data, &a.model, &mut run)?;
            let (model, scaler, report) = data.train_model(
                &a.model.encoder_config(),
                a.model.features,
                &a.model.train_config(),
            )?;
            let ckpt = Checkpoint {
                model,
                scaler,
                embedding_fingerprint: table.fingerprint(),
            };
            ckpt.save(&run.output(&a.output))?;
            println!(
                "trained {} epoch(s), best epoch {}, validation F1 {:.4}",
                report.epoch_losses.len(),
                report.best_epoch,
                report
                    .validation_f1
                    .get(report.best_epoch.saturating_sub(1))
                    .copied()
                    .unwrap_or(0.0)
            );
            run.finish(&manifest_path_for(&a.output))?;
        }
        Command::EvalCv(a) => {
            let mut run = Run::new(name, json(a), Some(a.model.seed), ctx.threads);
            let (data, _) = prepare(&a.data, &a.model, &mut run)?;
            let report = cross_validate(
                &data,
                &a.model.encoder_config(),
                a.model.features,
                &a.model.train_config(),
                a.folds,
                a.model.seed,
            )?;
            let dir = &a.output_dir;
            let label = format!("{}+{}", a.model.encoder, a.model.features);
            print_table(&[(label.clone(), &report.metrics)])?;
            write_file(&run.output(&dir.join("metrics.tsv")), |w| {
                write_metrics_tsv(&[(label.clone(), &report.metrics)], w)
            })?;
            write_file(&run.output(&dir.join("per_fold.tsv")), |w| {
                write_per_fold_tsv(&report.metrics, w)
            })?;
            write_file(&run.output(&dir.join("metrics.txt")), |w| {
                write_keyed(
                    &format!("{}.{}", a.model.encoder, a.model.features),
                    &report.metrics,
                    w,
                )
            })?;
            write_file(&run.output(&dir.join("predictions.tsv")), |w| {
                write_predictions_tsv(&data.pairs, &report, w)
            })?;
            run.finish(&dir.join("manifest.json"))?;
        }
        Command::EvalAblate(a) => {
            let mut run = Run::new(name, json(a), Some(a.model.seed), ctx.threads);
            let (data, _) = prepare(&a.data, &a.model, &mut run)?;
            let reports = ablate(
                &data,
                &a.model.encoder_config(),
                &a.modes,
                &a.model.train_config(),
                a.folds,
                a.model.seed,
            )?;
            let rows: Vec<(String, &MetricsReport)> = reports
                .iter()
                .map(|r| (r.mode.to_string(), &r.metrics))
                .collect();
            print_table(&rows)?;
            let dir = &a.output_dir;
            write_file(&run.output(&dir.join("ablation.tsv")), |w| {
                write_ablation_tsv(&reports, w)
            })?;
            write_file(&run.output(&dir.join("metrics.txt")), |w| {
                reports.iter().try_for_each(|r| {
                    write_keyed(&format!("{}.{}", a.model.encoder, r.mode), &r.metrics, w)
                })
            })?;
            run.finish(&dir.join("manifest.json"))?;
        }
        Command::EvalImportance(a) => {
            let mut run = Run::new(name, json(a), None, ctx.threads);
            let ckpt = Checkpoint::load(&run.input(&a.model))?;
            let report = garson_importance(&ckpt.model.classifier, ckpt.model.mode());
            write_file(&run.output(&a.output), |w| write_importance_tsv(&report, w))?;
            let stdout = std::io::stdout();
            write_importance_tsv(&report, &mut stdout.lock())?;
            run.finish(&manifest_path_for(&a.output))?;
        }
        Command::EvalSensitivity(a) => {
            let mut run = Run::new(name, json(a), Some(a.model.seed), ctx.threads);
            let (data, _) = prepare(&a.data, &a.model, &mut run)?;
            let points = sensitivity(
                &data,
                &a.model.encoder_config(),
                a.model.features,
                &a.model.train_config(),
                &a.proportions,
                a.folds,
                a.model.seed,
            )?;
            let rows: Vec<(String, &MetricsReport)> = points
                .iter()
                .map(|p| (format!("{:.2}", p.proportion), &p.report.metrics))
                .collect();
            print_table(&rows)?;
            let dir = &a.output_dir;
            write_file(&run.output(&dir.join("sensitivity.tsv")), |w| {
                write_sensitivity_tsv(&points, w)
            })?;
            write_file(&run.output(&dir.join("metrics.txt")), |w| {
                points.iter().try_for_each(|p| {
                    write_keyed(&format!("p{:.2}", p.proportion), &p.report.metrics, w)
                })
            })?;
            run.finish(&dir.join("manifest.json"))?;
        }
        Command::Serve(a) => {
            let mut run = Run::new(name, json(a), None, ctx.threads);
            let corpus = load(&a.corpus, &mut run)?;
            let table = EmbeddingTable::read(&run.input(&a.embeddings))?;
            let ckpt = Checkpoint::load(&run.input(&a.model))?;
            if ckpt.embedding_fingerprint != table.fingerprint() {
                return Err(anyhow!(subarticle::Error::Checkpoint(format!(
                    "model was trained with embeddings {}, got {}",
                    ckpt.embedding_fingerprint,
                    table.fingerprint()
                ))));
            }
            let graph = LinkGraph::build(&corpus);
            let scorer = Scorer {
                model: &ckpt.model,
                scaler: &ckpt.scaler,
                corpus: &corpus,
                graph: &graph,
                table: &table,
            };
            let candidates = extract_candidates(&corpus);
            let config = ServeConfig {
                topk: a.topk,
                shards: a.shards,
                threads: ctx.threads,
            };
            let out = serve(&scorer, &candidates, &config)?;
            write_scored(&out.top, &run.output(&a.output))?;
            let stats_path = stats_path_for(&a.output);
            write_file(&run.output(&stats_path), |w| {
                writeln!(w, "{}", out.stats.summary_line())
            })?;
            println!("{}", out.stats.summary_line());
            run.finish(&manifest_path_for(&a.output))?;
        }
    }
    Ok(())
}

pub fn stats_path_for(output: &Path) -> PathBuf {
    let mut name = output
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    name.push(".stats");
    output.with_file_name(name)
}

fn prepare(
    args: &PairDataArgs,
    model: &ModelArgs,
    run: &mut Run,
) -> Result<(PreparedPairs, EmbeddingTable)> {
    let corpus = load(&args.corpus, run)?;
    let table = EmbeddingTable::read(&run.input(&args.embeddings))?;
    let pairs = read_pairs(&run.input(&args.pairs))?;
    let graph = LinkGraph::build(&corpus);
    let config = model.encoder_config();
    config.validate()?;
    model.train_config().validate()?;
    let data = PreparedPairs::new(&pairs, &corpus, &graph, &table, &config)?;
    Ok((data, table))
}

fn print_table(rows: &[(String, &MetricsReport)]) -> Result<()> {
    let stdout = std::io::stdout();
    let mut w = stdout.lock();
    writeln!(
        w,
        "{:<24} {:>9} {:>9} {:>9}",
        "run", "precision", "recall", "F1"
    )?;
    for (label, m) in rows {
        writeln!(
            w,
            "{label:<24} {:>9.4} {:>9.4} {:>9.4}",
            m.precision, m.recall, m.f1
        )?;
    }
    Ok(())
}
