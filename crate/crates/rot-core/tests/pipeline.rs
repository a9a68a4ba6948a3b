//! End-to-end library pipeline on the bundled toy setup: stimulus corpus ->
//! population capture -> reading vectors -> localization -> steering.

use rot_core::control::{steered_generate, SteeringPolicy};
use rot_core::fixtures;
use rot_core::localization::{localize, score_prefixes};
use rot_core::model::{ModelConfig, SignMode, ToyTransformer};
use rot_core::populations::{
    capture_population, dump_from_model, dump_prompts_for_set, resolve_layers, ActivationDump,
    CaptureSource, DumpDtype, LayerSpec,
};
use rot_core::reading::{extract_reading_vectors, load_reading_vectors, save_reading_vectors};
use rot_core::stimuli::{build_stimulus_set, select_queries, SelectionStrategy};

fn setup() -> (rot_core::model::Tokenizer, ToyTransformer) {
    let tokenizer = fixtures::tokenizer();
    let config = ModelConfig { vocab_size: tokenizer.vocab_size(), ..ModelConfig::default() };
    let model = ToyTransformer::build(7, config).unwrap();
    (tokenizer, model)
}

#[test]
fn read_localize_steer_round_trip() {
    let (tokenizer, model) = setup();
    let registry = fixtures::template_registry().unwrap();
    let task = fixtures::toy_task("coin-parity").unwrap();

    let queries =
        select_queries(&task.queries, 12, SelectionStrategy::Random { seed: 3 }, None).unwrap();
    let stimuli = fixtures::zero_shot_stimuli().unwrap();
    let set = build_stimulus_set(&queries, &stimuli[..1], 1, &registry, "chat").unwrap();
    assert_eq!(set.pairs().len(), 12);

    let layers = resolve_layers(&LayerSpec::Last(5), model.depth()).unwrap();
    let source = CaptureSource::Live { model: &model, tokenizer: &tokenizer };
    let population = capture_population(&source, &set, &layers).unwrap();
    assert_eq!(population.layers(), vec![2, 3, 4, 5, 6]);
    assert_eq!(population.row_count(), 12);

    let readers = extract_reading_vectors(&population, true).unwrap();
    for layer in readers.layers() {
        let r = readers.vector(layer).unwrap();
        assert!((r.norm() - 1.0).abs() < 1e-9);
        // Orientation: mean row projection is non-negative.
        let matrix = population.matrix(layer).unwrap();
        let mean_proj: f64 = matrix
            .rows()
            .iter()
            .map(|row| rot_core::linalg::dot(row, r).unwrap())
            .sum::<f64>()
            / matrix.row_count() as f64;
        assert!(mean_proj >= 0.0, "layer {layer}: {mean_proj}");
    }

    // ROTV round trip.
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("vectors.rotv");
    save_reading_vectors(&readers, &path).unwrap();
    let loaded = load_reading_vectors(&path).unwrap();
    assert_eq!(readers.to_bytes(), loaded.to_bytes());

    // Localization over a generated response.
    let prompt = &task.queries[0].question;
    let prompt_ids = tokenizer.encode_with_bos(prompt);
    let response = model.generate(&prompt_ids, 12, Some(tokenizer.eos_id()), None).unwrap();
    let scores = score_prefixes(&model, &prompt_ids, &response, &loaded, 5.0).unwrap();
    let tokens: Vec<String> =
        response.iter().map(|&id| tokenizer.token(id).unwrap().to_string()).collect();
    let report = localize(&scores, prompt, &tokens).unwrap();
    assert_eq!(report.entries.len(), response.len());

    // Steered generation with the extracted vectors.
    let policy = SteeringPolicy::new(loaded, 1.8, SignMode::FollowProjection).unwrap();
    let (steered, diagnostics) =
        steered_generate(&model, &prompt_ids, &policy, 12, Some(tokenizer.eos_id())).unwrap();
    assert_eq!(diagnostics.alphas.len(), 5);
    assert!(diagnostics.alphas.values().all(|a| a.abs() == 1.8));
    assert_eq!(steered.len(), 12);
}

#[test]
fn dump_capture_agrees_with_live() {
    let (tokenizer, model) = setup();
    let registry = fixtures::template_registry().unwrap();
    let task = fixtures::toy_task("add-small").unwrap();
    let stimuli = fixtures::zero_shot_stimuli().unwrap();
    let set =
        build_stimulus_set(&task.queries[..6], &stimuli[..1], 1, &registry, "chat").unwrap();
    let layers = resolve_layers(&LayerSpec::Last(3), model.depth()).unwrap();

    let live = capture_population(
        &CaptureSource::Live { model: &model, tokenizer: &tokenizer },
        &set,
        &layers,
    )
    .unwrap();

    let prompts = dump_prompts_for_set(&set);
    let dump = dump_from_model(&model, &tokenizer, &prompts, &layers, DumpDtype::F64).unwrap();
    let bytes = dump.to_bytes().unwrap();
    let dump = ActivationDump::from_bytes(&bytes).unwrap();
    let from_dump = capture_population(&CaptureSource::Dump(&dump), &set, &layers).unwrap();

    for (layer, matrix) in live.matrices() {
        let other = from_dump.matrix(layer).unwrap();
        for (a, b) in matrix.rows().iter().zip(other.rows()) {
            for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
                assert!((x - y).abs() <= 1e-9);
            }
        }
    }
}

#[test]
fn few_shot_corpus_works_end_to_end() {
    let (tokenizer, model) = setup();
    let registry = fixtures::template_registry().unwrap();
    let task = fixtures::toy_task("letter-pick").unwrap();
    let few = rot_core::stimuli::Stimulus::few_shot(task.demos.clone()).unwrap();
    let set =
        build_stimulus_set(&task.queries[..4], &[few], 1, &registry, "chat").unwrap();
    for pair in set.pairs() {
        assert!(pair.positive.contains("Q: Pick the first letter of the word cat."));
        assert!(!pair.negative.contains("The answer is c."));
    }
    let layers = resolve_layers(&LayerSpec::Last(2), model.depth()).unwrap();
    let population = capture_population(
        &CaptureSource::Live { model: &model, tokenizer: &tokenizer },
        &set,
        &layers,
    )
    .unwrap();
    let readers = extract_reading_vectors(&population, true).unwrap();
    assert_eq!(readers.layers(), vec![5, 6]);
}
