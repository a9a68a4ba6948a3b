//! Answer extraction, accuracy, the pairwise-difference robustness score,
//! and a benchmark runner comparing base / CoT / steered conditions.
//!
//! Evaluation is two-stage: the model first produces a rationale for the
//! condition's prompt, then the extraction trigger phrase is appended and
//! the model's short completion is parsed for the final answer. A missing
//! answer counts as incorrect.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::{steered_generate, ControlError, SteeringPolicy};
use crate::model::{ModelError, Tokenizer, ToyTransformer};
use crate::stimuli::{
    render_prompt, Stimulus, StimuliError, StimulusKind, TaskQuery, TemplateRegistry,
};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no records to evaluate")]
    EmptyInput,
    #[error("robustness needs at least 2 runs, got {got}")]
    TooFewRuns { got: usize },
    #[error("condition {condition} needs a steering policy")]
    MissingPolicy { condition: String },
    #[error("condition {condition} needs stimulus variant {index}, only {available} available")]
    VariantOutOfRange { condition: String, index: usize, available: usize },
    #[error("invalid extraction template: {0}")]
    InvalidTemplate(String),
    #[error("task file invalid: {0}")]
    TaskFileInvalid(String),
    #[error(transparent)]
    Stimuli(#[from] StimuliError),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Answer format of a task, fixing both the trigger phrase and the parse
/// rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    YesNo,
    MultipleChoice,
    Number,
    Letters,
}

impl TaskKind {
    pub fn parse(text: &str) -> Option<Self> {
        match text {
            "yes_no" => Some(Self::YesNo),
            "multiple_choice" => Some(Self::MultipleChoice),
            "number" => Some(Self::Number),
            "letters" => Some(Self::Letters),
            _ => None,
        }
    }
}

/// Trigger phrase appended before the extraction completion, plus the parse
/// rule implied by the task kind.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExtractionTemplate {
    pub kind: TaskKind,
    pub trigger: String,
}

impl ExtractionTemplate {
    pub fn new(kind: TaskKind, trigger: impl Into<String>) -> Result<Self, EvalError> {
        let trigger = trigger.into();
        if trigger.trim().is_empty() {
            return Err(EvalError::InvalidTemplate("trigger must be nonempty".into()));
        }
        Ok(Self { kind, trigger })
    }

    /// Stock triggers per task kind.
    pub fn builtin(kind: TaskKind) -> Self {
        let trigger = match kind {
            TaskKind::YesNo => "Therefore, the answer (Yes or No) is",
            TaskKind::MultipleChoice => "Therefore, among A through E, the answer is",
            TaskKind::Number => "Therefore, the answer (arabic numerals) is",
            TaskKind::Letters => "Therefore, the answer is",
        };
        Self { kind, trigger: trigger.to_string() }
    }
}

/// Parse the final answer out of the extraction completion. Returns `None`
/// (no answer) when nothing matches; the caller counts that as incorrect.
pub fn extract_answer(response: &str, template: &ExtractionTemplate) -> Option<String> {
    match template.kind {
        TaskKind::YesNo => extract_yes_no(response),
        TaskKind::MultipleChoice => extract_choice(response),
        TaskKind::Number => extract_number(response),
        TaskKind::Letters => extract_letters(response),
    }
}

fn alpha_tokens(text: &str) -> impl Iterator<Item = &str> {
    text.split(|c: char| !c.is_ascii_alphabetic()).filter(|t| !t.is_empty())
}

fn extract_yes_no(response: &str) -> Option<String> {
    for token in alpha_tokens(response) {
        if token.eq_ignore_ascii_case("yes") {
            return Some("yes".into());
        }
        if token.eq_ignore_ascii_case("no") {
            return Some("no".into());
        }
    }
    None
}

fn extract_choice(response: &str) -> Option<String> {
    // First standalone letter a-e, parenthesized or bare.
    for token in alpha_tokens(response) {
        if token.len() == 1 {
            let c = token.chars().next().expect("len 1").to_ascii_lowercase();
            if ('a'..='e').contains(&c) {
                return Some(c.to_string());
            }
        }
    }
    None
}

fn extract_number(response: &str) -> Option<String> {
    let bytes = response.as_bytes();
    let start = bytes.iter().position(|b| b.is_ascii_digit())?;
    let mut out = String::new();
    if start > 0 && bytes[start - 1] == b'-' {
        out.push('-');
    }
    let mut i = start;
    // Integer part: digits with comma group separators.
    while i < bytes.len() {
        let b = bytes[i];
        if b.is_ascii_digit() {
            out.push(b as char);
            i += 1;
        } else if b == b',' && i + 1 < bytes.len() && bytes[i + 1].is_ascii_digit() {
            i += 1; // strip the comma
        } else {
            break;
        }
    }
    // Fractional part only when the dot is followed by a digit, so a
    // sentence-final period is dropped.
    if i + 1 < bytes.len() && bytes[i] == b'.' && bytes[i + 1].is_ascii_digit() {
        out.push('.');
        i += 1;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            out.push(bytes[i] as char);
            i += 1;
        }
    }
    Some(out)
}

fn extract_letters(response: &str) -> Option<String> {
    alpha_tokens(response).next().map(|t| t.to_ascii_lowercase())
}

/// Gold-vs-extracted comparison; numbers compare by parsed value so "8"
/// matches "8.0".
pub fn answers_match(kind: TaskKind, extracted: &str, gold: &str) -> bool {
    let e = extracted.trim().to_lowercase();
    let g = gold.trim().to_lowercase();
    if kind == TaskKind::Number {
        if let (Ok(ev), Ok(gv)) = (e.parse::<f64>(), g.parse::<f64>()) {
            return ev == gv;
        }
    }
    e == g
}

/// One evaluated (condition, query) outcome.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub query_id: String,
    pub condition: String,
    pub raw_response: String,
    /// The extraction-stage completion the answer was parsed from.
    pub answer_text: String,
    pub extracted: Option<String>,
    pub correct: bool,
}

/// `100 * correct / total`, unrounded. Use [`round_percent`] for reporting.
pub fn accuracy(records: &[RunRecord]) -> Result<f64, EvalError> {
    if records.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let correct = records.iter().filter(|r| r.correct).count();
    Ok(100.0 * correct as f64 / records.len() as f64)
}

/// Half-up rounding to two decimals, the reporting convention.
pub fn round_percent(value: f64) -> f64 {
    (value * 100.0).round() / 100.0
}

/// Sum over unordered pairs of absolute accuracy differences; zero iff all
/// accuracies are equal, and |a1 - a2| for two runs.
pub fn robustness_score(accuracies: &[f64]) -> Result<f64, EvalError> {
    if accuracies.len() < 2 {
        return Err(EvalError::TooFewRuns { got: accuracies.len() });
    }
    let mut total = 0.0;
    for i in 0..accuracies.len() {
        for j in (i + 1)..accuracies.len() {
            total += (accuracies[i] - accuracies[j]).abs();
        }
    }
    Ok(total)
}

/// Benchmark condition. Variant indices are 0-based; labels are 1-based to
/// match the usual Z1/Z2/Z3 naming.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Condition {
    Base,
    CotZero(usize),
    RotZero(usize),
    CotFew(usize),
    RotFew(usize),
}

impl Condition {
    pub fn label(&self) -> String {
        match self {
            Self::Base => "base".into(),
            Self::CotZero(i) => format!("cot_z{}", i + 1),
            Self::RotZero(i) => format!("rot_z{}", i + 1),
            Self::CotFew(i) => format!("cot_f{}", i + 1),
            Self::RotFew(i) => format!("rot_f{}", i + 1),
        }
    }

    /// Robustness group this condition belongs to (none for base).
    pub fn group(&self) -> Option<&'static str> {
        match self {
            Self::Base => None,
            Self::CotZero(_) => Some("cot_z"),
            Self::RotZero(_) => Some("rot_z"),
            Self::CotFew(_) => Some("cot_f"),
            Self::RotFew(_) => Some("rot_f"),
        }
    }

    pub fn needs_policy(&self) -> bool {
        matches!(self, Self::RotZero(_) | Self::RotFew(_))
    }
}

/// Text-in, text-out generation surface the benchmark drives. Implemented
/// by the toy model below and by stubs in tests.
pub trait Responder: Sync {
    fn respond(
        &self,
        prompt: &str,
        steering: Option<&SteeringPolicy>,
        max_new_tokens: usize,
    ) -> Result<String, EvalError>;
}

pub struct ModelResponder<'a> {
    pub model: &'a ToyTransformer,
    pub tokenizer: &'a Tokenizer,
}

impl Responder for ModelResponder<'_> {
    fn respond(
        &self,
        prompt: &str,
        steering: Option<&SteeringPolicy>,
        max_new_tokens: usize,
    ) -> Result<String, EvalError> {
        let ids = self.tokenizer.encode_with_bos(prompt);
        let eos = self.tokenizer.eos_id();
        let tokens = match steering {
            None => self.model.generate(&ids, max_new_tokens, Some(eos), None)?,
            Some(policy) => steered_generate(self.model, &ids, policy, max_new_tokens, Some(eos))?.0,
        };
        let trimmed: &[u32] = match tokens.last() {
            Some(&last) if last == eos => &tokens[..tokens.len() - 1],
            _ => &tokens,
        };
        Ok(self.tokenizer.decode(trimmed)?)
    }
}

/// Everything a benchmark run needs.
pub struct BenchmarkSpec<'a> {
    pub task_name: String,
    pub queries: &'a [TaskQuery],
    pub registry: &'a TemplateRegistry,
    pub template_id: String,
    /// Zero-shot instruction variants (Z1, Z2, ...).
    pub zero_variants: Vec<Stimulus>,
    /// Few-shot demonstration variants (original order, shuffled, ...).
    pub few_variants: Vec<Stimulus>,
    pub extraction: ExtractionTemplate,
    pub max_new_tokens: usize,
    pub conditions: Vec<Condition>,
    pub zero_policy: Option<SteeringPolicy>,
    pub few_policy: Option<SteeringPolicy>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SummaryRow {
    pub condition: String,
    pub task: String,
    pub accuracy: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub robustness: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct BenchmarkOutcome {
    pub records: Vec<RunRecord>,
    pub summary: Vec<SummaryRow>,
}

fn condition_inputs<'s>(
    spec: &'s BenchmarkSpec<'s>,
    condition: &Condition,
) -> Result<(StimulusKind, Option<&'s Stimulus>, Option<&'s SteeringPolicy>), EvalError> {
    let pick = |variants: &'s [Stimulus], index: usize| -> Result<&'s Stimulus, EvalError> {
        variants.get(index).ok_or_else(|| EvalError::VariantOutOfRange {
            condition: condition.label(),
            index,
            available: variants.len(),
        })
    };
    let policy = |policy: &'s Option<SteeringPolicy>| -> Result<&'s SteeringPolicy, EvalError> {
        policy.as_ref().ok_or_else(|| EvalError::MissingPolicy { condition: condition.label() })
    };
    Ok(match condition {
        Condition::Base => (StimulusKind::ZeroShot, None, None),
        Condition::CotZero(i) => (StimulusKind::ZeroShot, Some(pick(&spec.zero_variants, *i)?), None),
        Condition::RotZero(i) => (
            StimulusKind::ZeroShot,
            Some(pick(&spec.zero_variants, *i)?),
            Some(policy(&spec.zero_policy)?),
        ),
        Condition::CotFew(i) => (StimulusKind::FewShot, Some(pick(&spec.few_variants, *i)?), None),
        Condition::RotFew(i) => (
            StimulusKind::FewShot,
            Some(pick(&spec.few_variants, *i)?),
            Some(policy(&spec.few_policy)?),
        ),
    })
}

/// Run every condition over every query. Queries evaluate in parallel per
/// condition; records come back in (condition order, query id) order, so
/// the log is deterministic for any worker count.
pub fn run_benchmark(
    spec: &BenchmarkSpec<'_>,
    responder: &dyn Responder,
) -> Result<BenchmarkOutcome, EvalError> {
    if spec.queries.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let mut queries: Vec<&TaskQuery> = spec.queries.iter().collect();
    queries.sort_by(|a, b| a.id.cmp(&b.id));

    let mut records = Vec::new();
    let mut summary = Vec::new();
    let mut group_acc: BTreeMap<&'static str, Vec<f64>> = BTreeMap::new();

    for condition in &spec.conditions {
        let (kind, stimulus, steering) = condition_inputs(spec, condition)?;
        let condition_records: Vec<RunRecord> = queries
            .par_iter()
            .map(|query| -> Result<RunRecord, EvalError> {
                let prompt = render_prompt(
                    spec.registry,
                    &spec.template_id,
                    kind,
                    stimulus,
                    &query.question,
                )?;
                let rationale = responder.respond(&prompt, steering, spec.max_new_tokens)?;
                let extraction_prompt =
                    format!("{prompt} {rationale}\n{}", spec.extraction.trigger);
                let answer_text =
                    responder.respond(&extraction_prompt, steering, spec.max_new_tokens)?;
                let extracted = extract_answer(&answer_text, &spec.extraction);
                let correct = extracted
                    .as_deref()
                    .map(|e| answers_match(spec.extraction.kind, e, &query.answer))
                    .unwrap_or(false);
                Ok(RunRecord {
                    query_id: query.id.clone(),
                    condition: condition.label(),
                    raw_response: rationale,
                    answer_text,
                    extracted,
                    correct,
                })
            })
            .collect::<Result<_, _>>()?;

        let acc = accuracy(&condition_records)?;
        summary.push(SummaryRow {
            condition: condition.label(),
            task: spec.task_name.clone(),
            accuracy: round_percent(acc),
            robustness: None,
        });
        if let Some(group) = condition.group() {
            group_acc.entry(group).or_default().push(round_percent(acc));
        }
        records.extend(condition_records);
    }

    for (group, accs) in &group_acc {
        if accs.len() >= 2 {
            let score = robustness_score(accs)?;
            let mean = accs.iter().sum::<f64>() / accs.len() as f64;
            summary.push(SummaryRow {
                condition: (*group).to_string(),
                task: spec.task_name.clone(),
                accuracy: round_percent(mean),
                robustness: Some(round_percent(score)),
            });
        }
    }

    Ok(BenchmarkOutcome { records, summary })
}

/// A labeled group of published accuracies for robustness-score
/// regeneration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AccuracyGroup {
    pub model: String,
    pub task: String,
    pub method: String,
    pub accuracies: Vec<f64>,
    /// Score reported alongside the accuracies in the source material, when
    /// one exists; regeneration compares against it.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub published_score: Option<f64>,
}

pub fn load_accuracy_groups(json: &str) -> Result<Vec<AccuracyGroup>, EvalError> {
    serde_json::from_str(json).map_err(|e| EvalError::TaskFileInvalid(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stimuli::Demonstration;

    fn record(id: &str, correct: bool) -> RunRecord {
        RunRecord {
            query_id: id.into(),
            condition: "base".into(),
            raw_response: String::new(),
            answer_text: String::new(),
            extracted: None,
            correct,
        }
    }

    #[test]
    fn extract_yes_no_finds_first() {
        let t = ExtractionTemplate::builtin(TaskKind::YesNo);
        assert_eq!(
            extract_answer("… Therefore, the answer (Yes or No) is yes.", &t),
            Some("yes".into())
        );
        assert_eq!(extract_answer(" No, definitely not.", &t), Some("no".into()));
        assert_eq!(extract_answer("maybe?", &t), None);
    }

    #[test]
    fn extract_choice_handles_paren_and_bare() {
        let t = ExtractionTemplate::builtin(TaskKind::MultipleChoice);
        assert_eq!(extract_answer(" So the answer is (b).", &t), Some("b".into()));
        assert_eq!(extract_answer(" C", &t), Some("c".into()));
        assert_eq!(extract_answer("nothing here", &t), None);
    }

    #[test]
    fn extract_number_strips_commas_and_period() {
        let t = ExtractionTemplate::builtin(TaskKind::Number);
        assert_eq!(extract_answer("The answer is 1,234.0", &t), Some("1234.0".into()));
        assert_eq!(extract_answer(" 8.", &t), Some("8".into()));
        assert_eq!(extract_answer(" -17 apples", &t), Some("-17".into()));
        assert_eq!(extract_answer("none", &t), None);
    }

    #[test]
    fn extract_letters_takes_first_token() {
        let t = ExtractionTemplate::builtin(TaskKind::Letters);
        assert_eq!(extract_answer(" JH.", &t), Some("jh".into()));
        assert_eq!(extract_answer(" aco", &t), Some("aco".into()));
        assert_eq!(extract_answer(" 123", &t), None);
    }

    #[test]
    fn numeric_match_is_value_based() {
        assert!(answers_match(TaskKind::Number, "8", "8.0"));
        assert!(answers_match(TaskKind::Number, "1234.0", "1234"));
        assert!(!answers_match(TaskKind::Number, "8", "9"));
        assert!(answers_match(TaskKind::YesNo, "Yes", "yes"));
        assert!(!answers_match(TaskKind::Letters, "8", "8.0"));
    }

    #[test]
    fn accuracy_counts() {
        let records = vec![record("a", true), record("b", false), record("c", false)];
        let acc = accuracy(&records).unwrap();
        assert!((acc - 100.0 / 3.0).abs() < 1e-12);
        assert_eq!(round_percent(acc), 33.33);
        assert_eq!(round_percent(accuracy(&[record("a", true)]).unwrap()), 100.00);
        assert!(matches!(accuracy(&[]), Err(EvalError::EmptyInput)));
    }

    #[test]
    fn accuracy_is_order_invariant() {
        let a = vec![record("a", true), record("b", false)];
        let b = vec![record("b", false), record("a", true)];
        assert_eq!(accuracy(&a).unwrap(), accuracy(&b).unwrap());
    }

    #[test]
    fn accuracy_thirteen_record_fixture() {
        // 9 correct of 13, counted by hand.
        let records: Vec<RunRecord> =
            (0..13).map(|i| record(&format!("q{i}"), i % 3 != 2)).collect();
        assert_eq!(records.iter().filter(|r| r.correct).count(), 9);
        assert_eq!(round_percent(accuracy(&records).unwrap()), 69.23);
    }

    #[test]
    fn robustness_matches_published_groups() {
        let s = robustness_score(&[26.31, 26.23, 23.58]).unwrap();
        assert!((s - 5.46).abs() < 0.005, "{s}");
        let s = robustness_score(&[26.23, 24.72, 25.09]).unwrap();
        assert!((s - 3.02).abs() < 0.005, "{s}");
    }

    #[test]
    fn robustness_properties() {
        assert_eq!(robustness_score(&[4.0, 4.0, 4.0]).unwrap(), 0.0);
        let base = robustness_score(&[1.0, 5.0, 2.0]).unwrap();
        let perm = robustness_score(&[5.0, 2.0, 1.0]).unwrap();
        assert_eq!(base, perm);
        assert_eq!(robustness_score(&[3.5, 7.25]).unwrap(), 3.75);
        assert!(robustness_score(&[1.0]).is_err());
        assert!(robustness_score(&[4.0, 5.0, 3.0]).unwrap() >= 0.0);
    }

    struct OracleResponder;

    impl Responder for OracleResponder {
        fn respond(
            &self,
            prompt: &str,
            _steering: Option<&SteeringPolicy>,
            _max_new_tokens: usize,
        ) -> Result<String, EvalError> {
            // Hand-wired always-correct model for the number task below:
            // answers "2" to plus-one questions, "4" otherwise.
            if prompt.contains("one plus one") {
                Ok(" 2.".into())
            } else {
                Ok(" 4.".into())
            }
        }
    }

    fn toy_queries() -> Vec<TaskQuery> {
        vec![
            TaskQuery {
                id: "q1".into(),
                question: "what is one plus one?".into(),
                answer: "2".into(),
                demonstrations: None,
            },
            TaskQuery {
                id: "q2".into(),
                question: "what is two plus two?".into(),
                answer: "4".into(),
                demonstrations: None,
            },
            TaskQuery {
                id: "q3".into(),
                question: "what is one plus one?".into(),
                answer: "2".into(),
                demonstrations: None,
            },
            TaskQuery {
                id: "q4".into(),
                question: "what is two plus two?".into(),
                answer: "4".into(),
                demonstrations: None,
            },
        ]
    }

    fn spec_with_conditions<'a>(
        queries: &'a [TaskQuery],
        registry: &'a TemplateRegistry,
        conditions: Vec<Condition>,
    ) -> BenchmarkSpec<'a> {
        BenchmarkSpec {
            task_name: "toy".into(),
            queries,
            registry,
            template_id: "chat".into(),
            zero_variants: vec![
                Stimulus::zero_shot("Let's think step by step.").unwrap(),
                Stimulus::zero_shot("Let's think about this logically.").unwrap(),
                Stimulus::zero_shot("Let's solve this problem by splitting it into steps.")
                    .unwrap(),
            ],
            few_variants: vec![Stimulus::few_shot(vec![Demonstration {
                q: "demo".into(),
                a: "2".into(),
            }])
            .unwrap()],
            extraction: ExtractionTemplate::builtin(TaskKind::Number),
            max_new_tokens: 8,
            conditions,
            zero_policy: None,
            few_policy: None,
        }
    }

    #[test]
    fn always_correct_responder_scores_100() {
        let queries = toy_queries();
        let registry = TemplateRegistry::builtin();
        let spec = spec_with_conditions(&queries, &registry, vec![Condition::Base]);
        let outcome = run_benchmark(&spec, &OracleResponder).unwrap();
        assert_eq!(outcome.summary[0].accuracy, 100.00);
        assert_eq!(outcome.records.len(), 4);
        assert!(outcome.records.iter().all(|r| r.correct));
    }

    #[test]
    fn identical_variants_have_zero_robustness() {
        let queries = toy_queries();
        let registry = TemplateRegistry::builtin();
        let spec = spec_with_conditions(
            &queries,
            &registry,
            vec![Condition::CotZero(0), Condition::CotZero(1), Condition::CotZero(2)],
        );
        let outcome = run_benchmark(&spec, &OracleResponder).unwrap();
        let group_row = outcome.summary.iter().find(|r| r.condition == "cot_z").unwrap();
        assert_eq!(group_row.robustness, Some(0.0));
    }

    #[test]
    fn rot_condition_without_policy_errors() {
        let queries = toy_queries();
        let registry = TemplateRegistry::builtin();
        let spec = spec_with_conditions(&queries, &registry, vec![Condition::RotZero(0)]);
        assert!(matches!(
            run_benchmark(&spec, &OracleResponder),
            Err(EvalError::MissingPolicy { .. })
        ));
    }

    #[test]
    fn record_order_is_condition_then_query_id() {
        let queries = toy_queries();
        let registry = TemplateRegistry::builtin();
        let spec = spec_with_conditions(
            &queries,
            &registry,
            vec![Condition::Base, Condition::CotZero(0)],
        );
        let outcome = run_benchmark(&spec, &OracleResponder).unwrap();
        let keys: Vec<(String, String)> = outcome
            .records
            .iter()
            .map(|r| (r.condition.clone(), r.query_id.clone()))
            .collect();
        let mut sorted = keys.clone();
        sorted.sort_by(|a, b| {
            let ca = if a.0 == "base" { 0 } else { 1 };
            let cb = if b.0 == "base" { 0 } else { 1 };
            ca.cmp(&cb).then(a.1.cmp(&b.1))
        });
        assert_eq!(keys, sorted);
    }

    #[test]
    fn condition_labels() {
        assert_eq!(Condition::Base.label(), "base");
        assert_eq!(Condition::CotZero(0).label(), "cot_z1");
        assert_eq!(Condition::RotFew(1).label(), "rot_f2");
        assert_eq!(Condition::RotZero(2).group(), Some("rot_z"));
        assert!(Condition::RotFew(0).needs_policy());
        assert!(!Condition::CotFew(0).needs_policy());
    }

    #[test]
    fn accuracy_group_fixture_parses() {
        let json = r#"[
            {"model": "m", "task": "t", "method": "cot_z",
             "accuracies": [26.31, 26.23, 23.58], "published_score": 5.46}
        ]"#;
        let groups = load_accuracy_groups(json).unwrap();
        assert_eq!(groups.len(), 1);
        let s = robustness_score(&groups[0].accuracies).unwrap();
        assert!((s - groups[0].published_score.unwrap()).abs() < 0.005);
    }
}
