use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use requery::ane::{AneConfig, AneModel};
use requery::datagen::templates::generate_references;
use requery::datagen::{generate_corpus, GenConfig, NeighborIndex, TurnPair};
use requery::diffcore::Tape;
use requery::lexicon::{toy_lexicon, Utterance, Word};
use requery::phonetics::ConfusionMatrix;
use requery::rewriter::{
    train_neural, training_examples, NeuralKind, NeuralModel, Pointer, Rewriter, StepMasks, TrainConfig, Turn,
};

fn small_ane(seed: u64) -> AneModel {
    AneModel::new(AneConfig { dim: 8, char_dim: 6, ..AneConfig::default() }, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn correction_corpus(n: usize, seed: u64) -> Vec<TurnPair> {
    let index = NeighborIndex::new(toy_lexicon(), ConfusionMatrix::default_matrix());
    generate_corpus(&generate_references(n, seed), &index, &GenConfig::training(), seed + 1).unwrap()
}

fn quick_config(epochs: usize) -> TrainConfig {
    TrainConfig { hidden: 16, lr: 0.01, batch: 8, epochs }
}

#[test]
fn loss_halves_within_fifty_epochs_on_a_small_corpus() {
    let corpus = correction_corpus(32, 3);
    let ane = small_ane(4);
    for kind in [NeuralKind::TwoStep, NeuralKind::Pointer] {
        let mut losses = Vec::new();
        train_neural(kind, &corpus, &ane, &quick_config(50), 5, &mut |s, _| losses.push(s.mean_loss)).unwrap();
        let (first, last) = (losses[0], *losses.last().unwrap());
        assert!(last <= 0.5 * first, "{}: {first} -> {last}", kind.tag());
    }
}

#[test]
fn same_seed_gives_identical_checkpoints_and_embedding_stays_frozen() {
    let corpus = correction_corpus(16, 7);
    let ane = small_ane(8);
    let before = ane.to_checkpoint().to_bytes();
    let train = |seed| train_neural(NeuralKind::TwoStep, &corpus, &ane, &quick_config(2), seed, &mut |_, _| {}).unwrap();
    let (a, b, c) = (train(1), train(1), train(2));
    assert_eq!(a.to_checkpoint().to_bytes(), b.to_checkpoint().to_bytes());
    assert_ne!(a.to_checkpoint().to_bytes(), c.to_checkpoint().to_bytes());
    assert_eq!(a.vectors().ane().to_checkpoint().to_bytes(), before);
}

#[test]
fn checkpoint_round_trip_preserves_rewrites() {
    let corpus = correction_corpus(16, 9);
    let model = train_neural(NeuralKind::Pointer, &corpus, &small_ane(2), &quick_config(1), 3, &mut |_, _| {}).unwrap();
    let dir = tempdir();
    let path = dir.join("ptr.ck");
    model.save(&path).unwrap();
    let loaded = NeuralModel::load(&path).unwrap();
    assert_eq!(loaded.kind(), NeuralKind::Pointer);
    for pair in &corpus {
        assert_eq!(model.rewrite(&pair.first_asr, &pair.followup).unwrap(), loaded.rewrite(&pair.first_asr, &pair.followup).unwrap());
    }
    std::fs::remove_dir_all(dir).unwrap();
}

fn tempdir() -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("requery-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn identity_corpus_teaches_turn_one_selection() {
    let index_refs = generate_references(64, 13);
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let corpus: Vec<TurnPair> = index_refs
        .iter()
        .map(|r| TurnPair {
            first_asr: r.clone(),
            followup: index_refs.choose(&mut rng).unwrap().clone(),
            reference: r.clone(),
            is_correction: false,
            error_span: None,
        })
        .collect();
    let model = train_neural(NeuralKind::TwoStep, &corpus, &small_ane(15), &quick_config(15), 16, &mut |_, _| {}).unwrap();
    let net = model.two_step().unwrap();
    let (examples, _) = training_examples(&corpus);
    let (mut total, mut steps) = (0.0, 0usize);
    for ex in &examples {
        let mut tape = Tape::new();
        let inputs = net.encode(&mut tape, model.store(), model.vectors(), &ex.utt1, &ex.utt2).unwrap();
        let mut state = net.initial_state(&mut tape, model.store());
        for &p in ex.target.pointers() {
            let out = net.step(&mut tape, model.store(), &state, &inputs, &StepMasks::default()).unwrap();
            if let Pointer::Word { turn, .. } = p {
                assert_eq!(turn, Turn::First);
                total += out.distribution(&tape, &inputs).p1;
                steps += 1;
            }
            state = net.advance(&state, &out, &inputs, p);
        }
    }
    let mean = total / steps as f64;
    assert!(mean > 0.9, "mean p1 over word steps {mean}");
}

#[test]
fn turn_encodings_are_independent_of_the_other_turn() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let model = NeuralModel::new(NeuralKind::TwoStep, small_ane(22), quick_config(1), &mut rng);
    let net = model.two_step().unwrap();
    let u = |s: &str| Utterance::parse(s).unwrap();
    let mut tape = Tape::new();
    let a = net.encode(&mut tape, model.store(), model.vectors(), &u("call uncle of r"), &u("no i said uncle levar")).unwrap();
    let b = net.encode(&mut tape, model.store(), model.vectors(), &u("call uncle of r"), &u("levar uncle said")).unwrap();
    for (x, y) in a.turn1.vectors.iter().zip(&b.turn1.vectors) {
        assert_eq!(tape.value(*x), tape.value(*y));
    }
    assert_eq!(tape.dim(a.turn1.vectors[0]), 2 * net.hidden());
}

#[test]
fn beam_three_never_loses_to_greedy_and_stays_monotonic() {
    let words: Vec<Word> = toy_lexicon().words();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for case in 0..60 {
        let kind = if case % 3 == 0 { NeuralKind::Pointer } else { NeuralKind::TwoStep };
        let ane = AneModel::new(AneConfig { dim: 4, char_dim: 3, ..AneConfig::default() }, &mut rng);
        let model = NeuralModel::new(kind, ane, TrainConfig { hidden: rng.gen_range(2..=8), ..TrainConfig::for_kind(kind) }, &mut rng);
        let mut utt = |n: usize| Utterance::new((0..n).map(|_| words.choose(&mut rng).unwrap().clone()).collect()).unwrap();
        let (a, b) = (utt(1 + case % 5), utt(1 + case % 4));
        let beam = model.decode(&a, &b, 3, None).unwrap();
        let greedy = model.decode(&a, &b, 1, None).unwrap();
        assert!(beam.log_prob >= greedy.log_prob, "case {case}: {} < {}", beam.log_prob, greedy.log_prob);
        assert_eq!(beam.pointers.last(), Some(&Pointer::Eos));
        if kind == NeuralKind::TwoStep {
            let r = model.rewrite(&a, &b).unwrap();
            assert!(r.pointers.unwrap().is_monotonic());
        }
    }
}
