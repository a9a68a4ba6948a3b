//! Bundled fixtures: toy tasks, demonstration sets, the word lexicon, the
//! template registry, zero-shot instructions, published accuracy groups for
//! the robustness tooling, and the answer-extraction test suite.
//!
//! The toy tasks and lexicon are generated from a fixed seed, so the files
//! under `fixtures/` can always be regenerated byte-identically (see the
//! `gen-fixtures` binary); a test checks the committed files against the
//! generators.

use std::collections::BTreeSet;
use std::fs;
use std::io;
use std::path::Path;

use serde::Deserialize;

use crate::eval::TaskKind;
use crate::model::{self, Tokenizer};
use crate::rng::{subseed, SplitMix64};
use crate::stimuli::{Demonstration, Stimulus, StimuliError, TaskQuery, TemplateRegistry};

/// Root seed all fixture generation derives from.
pub const FIXTURE_SEED: u64 = 17;

/// Queries per generated toy task.
pub const TOY_TASK_SIZE: usize = 160;

pub const TEMPLATES_JSON: &str = include_str!("../fixtures/templates.json");
pub const ZERO_SHOT_INSTRUCTIONS_TXT: &str = include_str!("../fixtures/zero_shot_instructions.txt");
pub const ROBUSTNESS_GROUPS_JSON: &str = include_str!("../fixtures/robustness_groups.json");
pub const EXTRACTION_SUITE_JSON: &str = include_str!("../fixtures/extraction_suite.json");

pub const TASK_DEFAULTS_TOML: &str = include_str!("../fixtures/task_defaults.toml");

pub const ARITHMETIC_DEMOS_JSONL: &str = include_str!("../fixtures/demos/arithmetic_cot.jsonl");
pub const STRATEGYQA_DEMOS_JSONL: &str = include_str!("../fixtures/demos/strategyqa_cot.jsonl");
pub const CSQA_DEMOS_JSONL: &str = include_str!("../fixtures/demos/csqa_cot.jsonl");
pub const RANDOM_LETTER_DEMOS_JSONL: &str =
    include_str!("../fixtures/demos/random_letter_cot.jsonl");
pub const COIN_FLIP_DEMOS_JSONL: &str = include_str!("../fixtures/demos/coin_flip_cot.jsonl");

/// The three bundled zero-shot instructions (Z1-Z3).
pub fn zero_shot_instructions() -> Vec<String> {
    ZERO_SHOT_INSTRUCTIONS_TXT.lines().map(str::to_string).collect()
}

pub fn zero_shot_stimuli() -> Result<Vec<Stimulus>, StimuliError> {
    zero_shot_instructions().into_iter().map(Stimulus::zero_shot).collect()
}

pub fn template_registry() -> Result<TemplateRegistry, StimuliError> {
    TemplateRegistry::from_json_str(TEMPLATES_JSON)
}

/// A generated toy task: queries, its answer kind, and a demonstration set
/// for few-shot runs.
#[derive(Debug, Clone)]
pub struct ToyTask {
    pub name: &'static str,
    pub kind: TaskKind,
    pub queries: Vec<TaskQuery>,
    pub demos: Vec<Demonstration>,
}

pub const TOY_TASK_NAMES: [&str; 3] = ["coin-parity", "letter-pick", "add-small"];

pub fn toy_task(name: &str) -> Option<ToyTask> {
    match name {
        "coin-parity" => Some(coin_parity_task()),
        "letter-pick" => Some(letter_pick_task()),
        "add-small" => Some(add_small_task()),
        _ => None,
    }
}

const NAMES: [&str; 10] = ["Ann", "Ben", "Cal", "Dee", "Eli", "Fay", "Gus", "Hal", "Ivy", "Joe"];
const WORDS: [&str; 12] =
    ["cat", "dog", "sun", "map", "owl", "fox", "bee", "ant", "cow", "pig", "hen", "bat"];

fn demo(q: &str, a: &str) -> Demonstration {
    Demonstration { q: q.to_string(), a: a.to_string() }
}

fn coin_parity_task() -> ToyTask {
    let mut rng = SplitMix64::new(subseed(FIXTURE_SEED, "task.coin-parity"));
    let mut queries = Vec::with_capacity(TOY_TASK_SIZE);
    for i in 0..TOY_TASK_SIZE {
        let actors = 2 + rng.next_below(2) as usize;
        let mut pool: Vec<&str> = NAMES.to_vec();
        rng.shuffle(&mut pool);
        let mut question = String::from("A coin is heads up.");
        let mut flips = 0;
        for name in pool.iter().take(actors) {
            if rng.next_below(2) == 1 {
                question.push_str(&format!(" {name} flips the coin."));
                flips += 1;
            } else {
                question.push_str(&format!(" {name} does not flip the coin."));
            }
        }
        question.push_str(" Is the coin still heads up?");
        let answer = if flips % 2 == 0 { "yes" } else { "no" };
        queries.push(TaskQuery {
            id: format!("q{i:03}"),
            question,
            answer: answer.to_string(),
            demonstrations: None,
        });
    }
    let demos = vec![
        demo(
            "A coin is heads up. Ann flips the coin. Ben flips the coin. Is the coin still heads up?",
            "The coin was flipped 2 times. 2 is an even number. So the answer is yes.",
        ),
        demo(
            "A coin is heads up. Cal flips the coin. Dee does not flip the coin. Is the coin still heads up?",
            "The coin was flipped 1 time. 1 is an odd number. So the answer is no.",
        ),
        demo(
            "A coin is heads up. Eli does not flip the coin. Fay does not flip the coin. Is the coin still heads up?",
            "The coin was flipped 0 times. 0 is an even number. So the answer is yes.",
        ),
        demo(
            "A coin is heads up. Gus flips the coin. Hal flips the coin. Ivy flips the coin. Is the coin still heads up?",
            "The coin was flipped 3 times. 3 is an odd number. So the answer is no.",
        ),
        demo(
            "A coin is heads up. Joe does not flip the coin. Ann flips the coin. Is the coin still heads up?",
            "The coin was flipped 1 time. 1 is an odd number. So the answer is no.",
        ),
    ];
    ToyTask { name: "coin-parity", kind: TaskKind::YesNo, queries, demos }
}

fn letter_pick_task() -> ToyTask {
    let mut rng = SplitMix64::new(subseed(FIXTURE_SEED, "task.letter-pick"));
    let mut queries = Vec::with_capacity(TOY_TASK_SIZE);
    for i in 0..TOY_TASK_SIZE {
        let word = WORDS[rng.next_below(WORDS.len() as u64) as usize];
        let first = rng.next_below(2) == 0;
        let place = if first { "first" } else { "last" };
        let answer = if first {
            word.chars().next().expect("word nonempty")
        } else {
            word.chars().last().expect("word nonempty")
        };
        queries.push(TaskQuery {
            id: format!("q{i:03}"),
            question: format!("Pick the {place} letter of the word {word}."),
            answer: answer.to_string(),
            demonstrations: None,
        });
    }
    let demos = vec![
        demo("Pick the first letter of the word cat.", "The first letter of the word cat is c. The answer is c."),
        demo("Pick the last letter of the word dog.", "The last letter of the word dog is g. The answer is g."),
        demo("Pick the first letter of the word sun.", "The first letter of the word sun is s. The answer is s."),
        demo("Pick the last letter of the word map.", "The last letter of the word map is p. The answer is p."),
        demo("Pick the first letter of the word owl.", "The first letter of the word owl is o. The answer is o."),
    ];
    ToyTask { name: "letter-pick", kind: TaskKind::Letters, queries, demos }
}

fn add_small_task() -> ToyTask {
    let mut rng = SplitMix64::new(subseed(FIXTURE_SEED, "task.add-small"));
    let mut queries = Vec::with_capacity(TOY_TASK_SIZE);
    for i in 0..TOY_TASK_SIZE {
        let a = rng.next_below(21);
        let b = rng.next_below(21);
        queries.push(TaskQuery {
            id: format!("q{i:03}"),
            question: format!("What is {a} plus {b}?"),
            answer: (a + b).to_string(),
            demonstrations: None,
        });
    }
    let demos = vec![
        demo("What is 2 plus 3?", "2 plus 3 is 5. The answer is 5."),
        demo("What is 7 plus 0?", "7 plus 0 is 7. The answer is 7."),
        demo("What is 10 plus 10?", "10 plus 10 is 20. The answer is 20."),
        demo("What is 1 plus 16?", "1 plus 16 is 17. The answer is 17."),
        demo("What is 9 plus 4?", "9 plus 4 is 13. The answer is 13."),
    ];
    ToyTask { name: "add-small", kind: TaskKind::Number, queries, demos }
}

/// The fixture lexicon: specials, punctuation, single letters, digits
/// 0-999 as atoms, then every word appearing in the bundled toy content.
pub fn lexicon() -> Vec<String> {
    let mut tokens: Vec<String> =
        vec![model::BOS.into(), model::EOS.into(), model::UNK.into()];
    for p in ['.', ',', '?', '!', ':', ';', '(', ')', '"', '\''] {
        tokens.push(p.to_string());
    }
    for c in 'a'..='z' {
        tokens.push(c.to_string());
    }
    for c in 'A'..='Z' {
        tokens.push(c.to_string());
    }
    for n in 0..=999 {
        tokens.push(n.to_string());
    }

    let mut corpus = String::new();
    corpus.push_str("USER: ASSISTANT: Q: A:\n");
    corpus.push_str(ZERO_SHOT_INSTRUCTIONS_TXT);
    for kind in [TaskKind::YesNo, TaskKind::MultipleChoice, TaskKind::Number, TaskKind::Letters] {
        corpus.push_str(&crate::eval::ExtractionTemplate::builtin(kind).trigger);
        corpus.push('\n');
    }
    for name in TOY_TASK_NAMES {
        let task = toy_task(name).expect("builtin task");
        for q in &task.queries {
            corpus.push_str(&q.question);
            corpus.push('\n');
            corpus.push_str(&q.answer);
            corpus.push('\n');
        }
        for d in &task.demos {
            corpus.push_str(&d.q);
            corpus.push('\n');
            corpus.push_str(&d.a);
            corpus.push('\n');
        }
    }

    let seen: BTreeSet<String> = tokens.iter().cloned().collect();
    let mut words = BTreeSet::new();
    for line in corpus.lines() {
        for word in line.split_whitespace() {
            for piece in model::split_word_pieces(word) {
                if !seen.contains(piece) {
                    words.insert(piece.to_string());
                }
            }
        }
    }
    tokens.extend(words);
    tokens
}

pub fn lexicon_text() -> String {
    let mut out = String::new();
    for token in lexicon() {
        out.push_str(&token);
        out.push('\n');
    }
    out
}

pub fn tokenizer() -> Tokenizer {
    Tokenizer::from_lines(lexicon()).expect("bundled lexicon is valid")
}

pub fn task_jsonl(task: &ToyTask) -> String {
    let mut out = String::new();
    for q in &task.queries {
        let mut record = serde_json::Map::new();
        record.insert("id".into(), q.id.clone().into());
        record.insert("question".into(), q.question.clone().into());
        record.insert("answer".into(), q.answer.clone().into());
        out.push_str(&serde_json::to_string(&record).expect("task record serializes"));
        out.push('\n');
    }
    out
}

pub fn demos_jsonl(demos: &[Demonstration]) -> String {
    let mut out = String::new();
    for d in demos {
        let mut record = serde_json::Map::new();
        record.insert("q".into(), d.q.clone().into());
        record.insert("a".into(), d.a.clone().into());
        out.push_str(&serde_json::to_string(&record).expect("demo record serializes"));
        out.push('\n');
    }
    out
}

/// One answer-extraction test case.
#[derive(Debug, Clone, Deserialize)]
pub struct ExtractionCase {
    pub kind: String,
    pub response: String,
    pub expected: Option<String>,
}

pub fn extraction_suite() -> Vec<ExtractionCase> {
    serde_json::from_str(EXTRACTION_SUITE_JSON).expect("bundled extraction suite is valid")
}

/// Materialize every bundled fixture under `dir`.
pub fn write_all(dir: &Path) -> io::Result<()> {
    fs::create_dir_all(dir.join("tasks"))?;
    fs::create_dir_all(dir.join("demos"))?;
    fs::write(dir.join("templates.json"), TEMPLATES_JSON)?;
    fs::write(dir.join("task_defaults.toml"), TASK_DEFAULTS_TOML)?;
    fs::write(dir.join("zero_shot_instructions.txt"), ZERO_SHOT_INSTRUCTIONS_TXT)?;
    fs::write(dir.join("robustness_groups.json"), ROBUSTNESS_GROUPS_JSON)?;
    fs::write(dir.join("extraction_suite.json"), EXTRACTION_SUITE_JSON)?;
    fs::write(dir.join("demos/arithmetic_cot.jsonl"), ARITHMETIC_DEMOS_JSONL)?;
    fs::write(dir.join("demos/strategyqa_cot.jsonl"), STRATEGYQA_DEMOS_JSONL)?;
    fs::write(dir.join("demos/csqa_cot.jsonl"), CSQA_DEMOS_JSONL)?;
    fs::write(dir.join("demos/random_letter_cot.jsonl"), RANDOM_LETTER_DEMOS_JSONL)?;
    fs::write(dir.join("demos/coin_flip_cot.jsonl"), COIN_FLIP_DEMOS_JSONL)?;
    fs::write(dir.join("lexicon.txt"), lexicon_text())?;
    for name in TOY_TASK_NAMES {
        let task = toy_task(name).expect("builtin task");
        let stem = name.replace('-', "_");
        fs::write(dir.join(format!("tasks/{stem}.jsonl")), task_jsonl(&task))?;
        fs::write(dir.join(format!("demos/{stem}.jsonl")), demos_jsonl(&task.demos))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stimuli::load_task_jsonl;

    #[test]
    fn toy_tasks_have_consistent_answers() {
        for name in TOY_TASK_NAMES {
            let task = toy_task(name).unwrap();
            assert_eq!(task.queries.len(), TOY_TASK_SIZE);
            for q in &task.queries {
                assert!(!q.answer.is_empty());
            }
        }
        let coin = toy_task("coin-parity").unwrap();
        for q in &coin.queries {
            let flips = q.question.matches(" flips the coin.").count();
            let expected = if flips % 2 == 0 { "yes" } else { "no" };
            assert_eq!(q.answer, expected, "{}", q.question);
        }
        let add = toy_task("add-small").unwrap();
        for q in &add.queries {
            let nums: Vec<u64> = q
                .question
                .split(|c: char| !c.is_ascii_digit())
                .filter(|s| !s.is_empty())
                .map(|s| s.parse().unwrap())
                .collect();
            assert_eq!(nums.len(), 2);
            assert_eq!(q.answer.parse::<u64>().unwrap(), nums[0] + nums[1]);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = task_jsonl(&toy_task("letter-pick").unwrap());
        let b = task_jsonl(&toy_task("letter-pick").unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn toy_task_jsonl_parses_back() {
        for name in TOY_TASK_NAMES {
            let task = toy_task(name).unwrap();
            let parsed = load_task_jsonl(&task_jsonl(&task)).unwrap();
            assert_eq!(parsed.len(), task.queries.len());
        }
    }

    #[test]
    fn lexicon_covers_toy_content() {
        let tok = tokenizer();
        for name in TOY_TASK_NAMES {
            let task = toy_task(name).unwrap();
            for q in &task.queries {
                for &id in &tok.encode(&q.question) {
                    assert_ne!(id, tok.unk_id(), "unknown word in {:?}", q.question);
                }
                for &id in &tok.encode(&q.answer) {
                    assert_ne!(id, tok.unk_id());
                }
            }
            for d in &task.demos {
                for &id in &tok.encode(&d.q) {
                    assert_ne!(id, tok.unk_id(), "unknown word in demo {:?}", d.q);
                }
                for &id in &tok.encode(&d.a) {
                    assert_ne!(id, tok.unk_id(), "unknown word in demo answer {:?}", d.a);
                }
            }
        }
        for instruction in zero_shot_instructions() {
            for &id in &tok.encode(&instruction) {
                assert_ne!(id, tok.unk_id(), "unknown word in {instruction:?}");
            }
        }
    }

    #[test]
    fn bundled_registry_and_instructions_load() {
        let registry = template_registry().unwrap();
        assert!(registry.layout("chat").is_ok());
        assert_eq!(zero_shot_instructions().len(), 3);
        assert_eq!(zero_shot_instructions()[0], "Let's think step by step.");
        assert!(zero_shot_stimuli().unwrap().len() == 3);
    }

    #[test]
    fn extraction_suite_has_thirty_cases() {
        let suite = extraction_suite();
        assert_eq!(suite.len(), 30);
        for kind in ["yes_no", "multiple_choice", "number", "letters"] {
            assert!(suite.iter().any(|c| c.kind == kind), "missing kind {kind}");
        }
    }

    #[test]
    fn robustness_groups_parse() {
        let groups = crate::eval::load_accuracy_groups(ROBUSTNESS_GROUPS_JSON).unwrap();
        assert_eq!(groups.len(), 48);
        assert!(groups.iter().all(|g| g.accuracies.len() >= 2));
        assert!(groups.iter().all(|g| g.published_score.is_some()));
    }

    #[test]
    fn committed_generated_fixtures_match_generators() {
        // The files under fixtures/ are outputs of these generators; keep
        // them in lockstep (regenerate with the gen-fixtures binary).
        let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
        let lex = std::fs::read_to_string(root.join("lexicon.txt")).unwrap();
        assert_eq!(lex, lexicon_text(), "run gen-fixtures to refresh lexicon.txt");
        for name in TOY_TASK_NAMES {
            let task = toy_task(name).unwrap();
            let stem = name.replace('-', "_");
            let committed =
                std::fs::read_to_string(root.join(format!("tasks/{stem}.jsonl"))).unwrap();
            assert_eq!(committed, task_jsonl(&task), "run gen-fixtures to refresh {stem}");
            let committed =
                std::fs::read_to_string(root.join(format!("demos/{stem}.jsonl"))).unwrap();
            assert_eq!(committed, demos_jsonl(&task.demos));
        }
    }

    #[test]
    fn paper_style_demo_files_parse() {
        for text in [
            ARITHMETIC_DEMOS_JSONL,
            STRATEGYQA_DEMOS_JSONL,
            CSQA_DEMOS_JSONL,
            RANDOM_LETTER_DEMOS_JSONL,
            COIN_FLIP_DEMOS_JSONL,
        ] {
            let demos = crate::stimuli::load_demos_jsonl(text).unwrap();
            assert!(demos.len() >= 4);
        }
    }
}
