use qttt_core::arena::non_loss_vs_random;
use qttt_core::engines::{build_engine, EngineSpec, Insertions};
use qttt_core::nn::{huber, AdamState};
use qttt_core::trainer::{never_loses_to_minimax, q_target, self_play_episode, train, TabularQ, TrainConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Replays one episode by hand with one-hot output gradients.
#[test]
fn updates_use_only_the_chosen_output() {
    let spec = EngineSpec::parse("hnn-est-8-tpe-realamplitudes", 3).unwrap();
    let cfg = TrainConfig { episodes: 1, seed: 17, ..Default::default() };
    let mut trained = build_engine(spec).unwrap();
    train(&mut trained, &cfg).unwrap();

    let mut manual = build_engine(spec).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let ep = self_play_episode(&manual, cfg.epsilon_start, &mut rng).unwrap();
    let mut params = manual.params();
    let mut adam = AdamState::new(params.len(), cfg.adam);
    for t in ep.chronological() {
        let target = q_target(t, &manual, cfg.gamma, &mut rng);
        let tape = manual.forward(&t.state, &Insertions::none(), &mut rng).unwrap();
        let (_, d) = huber(tape.values[t.action], target, cfg.huber);
        let mut full = [0.0; 9];
        full[t.action] = d;
        let g = manual.backward(&tape, &full, &mut rng).unwrap();
        // any other component would have moved the update
        let mut noisy = full;
        noisy[(t.action + 1) % 9] += 0.5;
        assert_ne!(manual.backward(&tape, &noisy, &mut rng).unwrap(), g);
        adam.step(&mut params, &g).unwrap();
        manual.set_params(&params).unwrap();
    }
    assert_eq!(manual.params(), trained.params());
}

#[test]
fn identical_seeds_give_identical_weights() {
    let spec = EngineSpec::parse("qnn-9-tpe-efficientsu2", 8).unwrap();
    let cfg = TrainConfig { episodes: 5, seed: 2, ..Default::default() };
    let run = || {
        let mut e = build_engine(spec).unwrap();
        train(&mut e, &cfg).unwrap();
        e.params()
    };
    assert_eq!(run(), run());
}

#[test]
fn short_training_beats_random_more_often() {
    let spec = EngineSpec::parse("ccnn-weaker", 0).unwrap();
    let untrained = build_engine(spec).unwrap();
    let mut trained = untrained.clone();
    train(&mut trained, &TrainConfig { episodes: 3000, seed: 1, ..Default::default() }).unwrap();
    let (_, before) = non_loss_vs_random(&untrained, 1000, 4);
    let (_, after) = non_loss_vs_random(&trained, 1000, 4);
    assert!(after > before, "{before} -> {after}");
}

#[test]
fn tabular_reference_converges() {
    let mut q = TabularQ::new();
    q.train(&TrainConfig { episodes: 1_000_000, seed: 1, ..Default::default() }, 0.3).unwrap();
    assert!(q.states() <= 5478);
    let (_, rate) = non_loss_vs_random(&q, 1000, 9);
    assert!(rate >= 0.99, "{rate}");
    assert!(never_loses_to_minimax(&q));
}
