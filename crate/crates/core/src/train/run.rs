//! Whole-run orchestration: corpus subsampling, per-epoch held-out
//! evaluation, best-checkpoint selection, and crash-safe metrics output.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write as _};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::epoch::{train_epoch, UnlabeledCycle};
use super::{EpochMetrics, TrainConfig, TrainError};
use crate::adam::{Adam, AdamConfig};
use crate::data::batch::{make_batches, BatchSpec};
use crate::data::conll::Sentence;
use crate::data::embeddings::load_pretrained_embeddings;
use crate::data::vocab::{build_vocab, LabelSet, Vocabulary};
use crate::eval::{chunk_f1, extract_spans, pos_accuracy, EvalReport, SpanSet};
use crate::model::{
    init_baseline_params, init_hier_params, overwrite_embeddings, save_checkpoint, AnyModel,
    ModelConfig, ModelKind,
};
use crate::params::ParamStore;
use crate::tape::Tape;
use crate::tensor::TensorData;

/// Seeded sentence-level subsample of ⌈fraction·N⌉ sentences, in original
/// corpus order. Subsamples at growing fractions of the same seed nest.
pub fn subsample_labeled(sentences: &[Sentence], fraction: f64, seed: u64) -> Vec<Sentence> {
    assert!(
        fraction > 0.0 && fraction <= 1.0,
        "labeled fraction must lie in (0, 1], got {fraction}"
    );
    let n = sentences.len();
    let keep = ((fraction * n as f64).ceil() as usize).min(n);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut chosen: Vec<usize> = order.into_iter().take(keep).collect();
    chosen.sort_unstable();
    chosen.into_iter().map(|i| sentences[i].clone()).collect()
}

/// Seeded shuffle then split into train/dev/test by the given fractions
/// (test gets the remainder).
pub fn split_held_out(
    sentences: &[Sentence],
    dev_fraction: f64,
    test_fraction: f64,
    seed: u64,
) -> (Vec<Sentence>, Vec<Sentence>, Vec<Sentence>) {
    assert!(dev_fraction >= 0.0 && test_fraction >= 0.0);
    assert!(dev_fraction + test_fraction < 1.0, "held-out fractions must leave training data");
    let mut shuffled: Vec<Sentence> = sentences.to_vec();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n = shuffled.len();
    let n_dev = (dev_fraction * n as f64).ceil() as usize;
    let n_test = (test_fraction * n as f64).ceil() as usize;
    let test = shuffled.split_off(n - n_test.min(n));
    let dev = shuffled.split_off(shuffled.len() - n_dev.min(shuffled.len()));
    (shuffled, dev, test)
}

fn argmax_row(t: &TensorData<f64>, row: usize) -> usize {
    let cols = t.cols();
    let data = &t.data()[row * cols..(row + 1) * cols];
    let mut best = 0;
    for (j, &v) in data.iter().enumerate() {
        if v > data[best] {
            best = j;
        }
    }
    best
}

/// Tag a labeled corpus with the model and score it. Gold tags are
/// compared as strings, so labels missing from the model's sets can never
/// be predicted but still count against recall and accuracy.
pub fn evaluate_model(
    model: &AnyModel,
    store: &ParamStore<f64>,
    sentences: &[Sentence],
    vocab: &Vocabulary,
    pos_labels: &LabelSet,
    chunk_labels: &LabelSet,
    b: usize,
    t: usize,
) -> EvalReport {
    assert!(!sentences.is_empty(), "cannot evaluate on an empty corpus");
    for (i, s) in sentences.iter().enumerate() {
        assert!(
            s.pos_tags.is_some() && s.chunk_tags.is_some(),
            "evaluation sentence {i} lacks gold tags"
        );
    }

    // Batch over label-stripped copies: gold ids are never needed, which
    // keeps unseen gold labels scoreable.
    let stripped: Vec<Sentence> =
        sentences.iter().map(|s| Sentence::unlabeled(s.tokens.clone())).collect();
    let spec = BatchSpec::new(b, t, model.config().lm_vocab_size, 0);
    let batches = make_batches(&stripped, vocab, None, None, &spec);

    let mut pred_pos: Vec<Vec<String>> =
        sentences.iter().map(|s| vec![String::new(); s.tokens.len()]).collect();
    let mut pred_chunk = pred_pos.clone();
    let mut filled = 0usize;
    for batch in &batches {
        let mut tape = Tape::new();
        let out = model.forward(&mut tape, store, batch);
        let pos_logits = tape.value(out.pos_logits);
        let chunk_logits = tape.value(out.chunk_logits);
        for row in 0..batch.b {
            let (sent, offset) = batch.origin[row];
            for step in 0..batch.t {
                if batch.mask[row * batch.t + step] == 0.0 {
                    continue;
                }
                let tm_row = step * batch.b + row;
                pred_pos[sent][offset + step] =
                    pos_labels.label(argmax_row(pos_logits, tm_row)).to_string();
                pred_chunk[sent][offset + step] =
                    chunk_labels.label(argmax_row(chunk_logits, tm_row)).to_string();
                filled += 1;
            }
        }
    }
    let tokens: usize = sentences.iter().map(|s| s.tokens.len()).sum();
    assert_eq!(filled, tokens, "every real position receives exactly one prediction");

    let gold_pos: Vec<&str> = sentences
        .iter()
        .flat_map(|s| s.pos_tags.as_ref().unwrap().iter().map(String::as_str))
        .collect();
    let pred_pos_flat: Vec<&str> =
        pred_pos.iter().flat_map(|s| s.iter().map(String::as_str)).collect();
    let acc = pos_accuracy(&gold_pos, &pred_pos_flat, &vec![true; tokens]);

    let gold_spans: Vec<SpanSet> =
        sentences.iter().map(|s| extract_spans(s.chunk_tags.as_ref().unwrap())).collect();
    let pred_spans: Vec<SpanSet> = pred_chunk.iter().map(|s| extract_spans(s)).collect();
    let chunk = chunk_f1(&gold_spans, &pred_spans);

    EvalReport::new(acc, &chunk, sentences.len(), tokens)
}

/// Artifact paths and end-of-run results.
#[derive(Debug)]
pub struct RunSummary {
    pub labeled_sentences: usize,
    pub vocab_size: usize,
    pub pretrained_coverage: Option<f64>,
    pub history: Vec<EpochMetrics>,
    pub best_epoch: usize,
    pub best_report: EvalReport,
    pub checkpoint_path: PathBuf,
    pub metrics_path: PathBuf,
    pub config_path: PathBuf,
}

/// Train for the configured number of epochs, evaluating on `dev` after
/// each and keeping the checkpoint with the best chunk F1. The metrics
/// history is appended line by line as epochs finish.
pub fn run_training(
    config: &TrainConfig,
    train: &[Sentence],
    dev: &[Sentence],
    unlabeled: &[Sentence],
    out_dir: &Path,
) -> Result<RunSummary, TrainError> {
    config.validate().map_err(TrainError::Config)?;
    if train.is_empty() || dev.is_empty() {
        return Err(TrainError::Config("train and dev corpora must be nonempty".into()));
    }
    if config.semi_supervised && unlabeled.is_empty() {
        return Err(TrainError::Config(
            "semi-supervised training requires an unlabeled corpus".into(),
        ));
    }
    for (i, s) in train.iter().enumerate() {
        if s.pos_tags.is_none() || s.chunk_tags.is_none() {
            return Err(TrainError::Config(format!(
                "training sentence {i} lacks POS or chunk tags"
            )));
        }
    }

    let train_sub = subsample_labeled(train, config.labeled_fraction, config.seed);
    let vocab = if config.semi_supervised {
        build_vocab(&[&train_sub, unlabeled], config.min_frequency)
    } else {
        build_vocab(&[&train_sub], config.min_frequency)
    };
    let pos_labels = LabelSet::from_labels(
        "pos",
        train_sub.iter().flat_map(|s| s.pos_tags.as_ref().unwrap()).map(String::as_str),
    );
    let chunk_labels = LabelSet::from_labels(
        "chunk",
        train_sub.iter().flat_map(|s| s.chunk_tags.as_ref().unwrap()).map(String::as_str),
    );

    let model_cfg = ModelConfig::new(
        vocab.len(),
        config.d_w,
        config.d_h,
        config.d_lab,
        pos_labels.len(),
        chunk_labels.len(),
        config.lm_vocab_cap,
    );
    let (mut store, model) = match config.arch {
        ModelKind::Hier => {
            let (s, p) = init_hier_params(model_cfg, config.seed);
            (s, AnyModel::Hier(p))
        }
        ModelKind::Baseline => {
            let (s, p) = init_baseline_params(model_cfg, config.seed);
            (s, AnyModel::Baseline(p))
        }
    };

    let mut pretrained_coverage = None;
    if let Some(path) = &config.pretrained {
        let reader = BufReader::new(File::open(path)?);
        let mut emb_rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x9e3779b9));
        let emb = load_pretrained_embeddings(reader, &vocab, &mut emb_rng)?;
        if emb.dim != config.d_w {
            return Err(TrainError::Config(format!(
                "pretrained embeddings are {}-dimensional, model wants {}",
                emb.dim, config.d_w
            )));
        }
        pretrained_coverage = Some(emb.coverage());
        overwrite_embeddings(&mut store, model.embed(), &emb.table);
    }

    let labeled_batches = make_batches(
        &train_sub,
        &vocab,
        Some(&pos_labels),
        Some(&chunk_labels),
        &BatchSpec::new(config.batch_size, config.max_len, model_cfg.lm_vocab_size, config.seed),
    );
    let mut cycle = if config.semi_supervised {
        UnlabeledCycle::new(make_batches(
            unlabeled,
            &vocab,
            None,
            None,
            &BatchSpec::new(
                config.batch_size,
                config.max_len,
                model_cfg.lm_vocab_size,
                config.seed.wrapping_add(1),
            ),
        ))
    } else {
        UnlabeledCycle::empty()
    };
    let gamma = if config.semi_supervised { config.gamma } else { 0.0 };

    let mut adam =
        Adam::new(AdamConfig { lr: config.learning_rate, ..AdamConfig::default() }, &store);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    fs::create_dir_all(out_dir)?;
    let config_path = out_dir.join("config.json");
    fs::write(&config_path, serde_json::to_string_pretty(config)? + "\n")?;
    let metrics_path = out_dir.join("metrics.jsonl");
    let mut metrics_file = BufWriter::new(File::create(&metrics_path)?);
    let checkpoint_path = out_dir.join("checkpoint.bin");

    let mut history = Vec::with_capacity(config.epochs);
    let mut best_epoch = 0usize;
    let mut best_f1 = f64::NEG_INFINITY;
    let mut best_report: Option<EvalReport> = None;
    for epoch in 1..=config.epochs {
        let mut metrics = train_epoch(
            &model,
            &mut store,
            &mut adam,
            &labeled_batches,
            &mut cycle,
            gamma,
            epoch,
            &mut rng,
        )?;
        let report = evaluate_model(
            &model,
            &store,
            dev,
            &vocab,
            &pos_labels,
            &chunk_labels,
            config.batch_size,
            config.max_len,
        );
        metrics.dev_pos_accuracy = report.pos_accuracy;
        metrics.dev_chunk_f1 = report.chunk_f1;
        if report.chunk_f1 > best_f1 {
            best_f1 = report.chunk_f1;
            best_epoch = epoch;
            save_checkpoint(
                &checkpoint_path,
                &model_cfg,
                model.kind(),
                &vocab,
                &pos_labels,
                &chunk_labels,
                &store,
            )?;
            best_report = Some(report);
        }
        serde_json::to_writer(&mut metrics_file, &metrics)?;
        metrics_file.write_all(b"\n")?;
        metrics_file.flush()?;
        history.push(metrics);
    }

    Ok(RunSummary {
        labeled_sentences: train_sub.len(),
        vocab_size: vocab.len(),
        pretrained_coverage,
        history,
        best_epoch,
        best_report: best_report.expect("at least one epoch ran"),
        checkpoint_path,
        metrics_path,
        config_path,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synthetic::gen_synthetic;
    use crate::model::load_checkpoint;

    fn small_config() -> TrainConfig {
        TrainConfig {
            epochs: 2,
            batch_size: 8,
            max_len: 16,
            seed: 11,
            d_w: 6,
            d_h: 5,
            d_lab: 4,
            lm_vocab_cap: 80,
            semi_supervised: true,
            gamma: 0.5,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn subsample_laws() {
        let (corpus, _) = gen_synthetic(5, 100);
        assert_eq!(subsample_labeled(&corpus, 1.0, 4), corpus, "fraction 1 is the identity");
        assert_eq!(subsample_labeled(&corpus, 0.25, 4).len(), 25);
        assert_eq!(subsample_labeled(&corpus, 0.101, 4).len(), 11, "counts round up");

        // Nested ladder under one seed.
        let ladder: Vec<Vec<Sentence>> =
            [0.25, 0.5, 0.75, 1.0].iter().map(|&f| subsample_labeled(&corpus, f, 9)).collect();
        for w in ladder.windows(2) {
            let small = &w[0];
            let big = &w[1];
            assert!(small.iter().all(|s| big.contains(s)), "subsamples must nest");
        }

        let again = subsample_labeled(&corpus, 0.3, 9);
        assert_eq!(again, subsample_labeled(&corpus, 0.3, 9), "same seed, same subsample");
        assert_ne!(again, subsample_labeled(&corpus, 0.3, 10), "seed matters");
    }

    #[test]
    #[should_panic(expected = "labeled fraction must lie in (0, 1]")]
    fn subsample_rejects_zero_fraction() {
        let (corpus, _) = gen_synthetic(5, 10);
        subsample_labeled(&corpus, 0.0, 1);
    }

    #[test]
    fn split_covers_corpus_disjointly() {
        let (corpus, _) = gen_synthetic(6, 50);
        let (train, dev, test) = split_held_out(&corpus, 0.1, 0.1, 3);
        assert_eq!(train.len() + dev.len() + test.len(), corpus.len());
        assert_eq!(dev.len(), 5);
        assert_eq!(test.len(), 5);
        let mut all: Vec<&Sentence> = train.iter().chain(&dev).chain(&test).collect();
        for s in &corpus {
            let pos = all.iter().position(|c| *c == s).expect("sentence lost by split");
            all.remove(pos);
        }
        assert!(all.is_empty());
    }

    #[test]
    fn two_epoch_smoke_writes_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let (labeled, unlabeled) = gen_synthetic(21, 60);
        let (train, dev, _) = split_held_out(&labeled, 0.2, 0.0, 1);
        let config = small_config();
        let summary =
            run_training(&config, &train, &dev, &unlabeled[..200], dir.path()).unwrap();

        assert_eq!(summary.history.len(), 2);
        assert!(summary.best_epoch >= 1);
        assert!(summary.best_report.chunk_f1 >= 0.0 && summary.best_report.chunk_f1 <= 1.0);
        assert!(summary.best_report.pos_accuracy <= 1.0);

        let ckpt = load_checkpoint(&summary.checkpoint_path).unwrap();
        assert_eq!(ckpt.kind, ModelKind::Hier);
        let echoed: TrainConfig =
            serde_json::from_str(&fs::read_to_string(&summary.config_path).unwrap()).unwrap();
        assert_eq!(serde_json::to_string(&echoed).unwrap(), serde_json::to_string(&config).unwrap());
        let lines: Vec<EpochMetrics> = fs::read_to_string(&summary.metrics_path)
            .unwrap()
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0].epoch, 1);
        assert_eq!(lines[1].epoch, 2);
        assert_eq!(lines[1].dev_chunk_f1, summary.history[1].dev_chunk_f1);
    }

    #[test]
    fn reruns_are_byte_identical() {
        let (labeled, unlabeled) = gen_synthetic(22, 40);
        let (train, dev, _) = split_held_out(&labeled, 0.25, 0.0, 2);
        let mut outputs = Vec::new();
        for _ in 0..2 {
            let dir = tempfile::tempdir().unwrap();
            let summary =
                run_training(&small_config(), &train, &dev, &unlabeled[..120], dir.path())
                    .unwrap();
            outputs.push((
                fs::read(&summary.metrics_path).unwrap(),
                fs::read(&summary.checkpoint_path).unwrap(),
            ));
        }
        assert_eq!(outputs[0].0, outputs[1].0, "metrics histories must match byte for byte");
        assert_eq!(outputs[0].1, outputs[1].1, "checkpoints must match byte for byte");
    }

    /// Ten sentences of once-only tokens: every next and previous word is
    /// fully determined, so a small model can drive the loss to the floor.
    fn memorization_corpus() -> Vec<Sentence> {
        let mut out = Vec::new();
        for i in 0..10 {
            let tokens: Vec<String> = (0..3).map(|j| format!("tok{}", i * 3 + j)).collect();
            let pos = vec!["DT".to_string(), "NN".to_string(), "VB".to_string()];
            let chunk =
                vec!["B-NP".to_string(), "I-NP".to_string(), "B-VP".to_string()];
            out.push(Sentence {
                tokens,
                pos_tags: Some(pos),
                chunk_tags: Some(chunk),
            });
        }
        out
    }

    #[test]
    fn memorizes_ten_sentences_within_200_epochs() {
        let corpus = memorization_corpus();
        let dir = tempfile::tempdir().unwrap();
        let config = TrainConfig {
            epochs: 200,
            batch_size: 16,
            max_len: 8,
            learning_rate: 5e-3,
            seed: 3,
            d_w: 12,
            d_h: 16,
            d_lab: 4,
            lm_vocab_cap: 64,
            ..TrainConfig::default()
        };
        let summary = run_training(&config, &corpus, &corpus, &[], dir.path()).unwrap();
        let reached = summary.history.iter().find(|m| {
            let total = m.pos_loss.unwrap() + m.chunk_loss.unwrap() + m.lm_loss.unwrap();
            total / 3.0 < 0.05
        });
        assert!(
            reached.is_some(),
            "training loss stayed above 0.05 for 200 epochs; final epoch: {:?}",
            summary.history.last()
        );
    }
}
