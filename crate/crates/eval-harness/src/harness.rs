//! Prompt construction, log-likelihood scoring, task evaluation and
//! greedy decoding.

use neoxkit_tokenizer::TokenizerModel;

use crate::task::{EvalItem, EvalTask, TaskKind};
use crate::{EvalError, ScoringModel};

/// How exemplars and answers join into prompt text.
#[derive(Debug, Clone)]
pub struct PromptTemplate {
    /// Separator between rendered exemplars and before the query.
    pub exemplar_sep: String,
    /// Inserted between a context and its (gold or scored) continuation.
    pub answer_prefix: String,
}

impl Default for PromptTemplate {
    fn default() -> Self {
        PromptTemplate {
            exemplar_sep: "\n".into(),
            answer_prefix: " ".into(),
        }
    }
}

impl PromptTemplate {
    fn render_exemplar(&self, item: &EvalItem) -> String {
        format!(
            "{}{}{}",
            item.context(),
            self.answer_prefix,
            item.gold_text()
        )
    }

    pub fn continuation(&self, text: &str) -> String {
        format!("{}{}", self.answer_prefix, text)
    }
}

/// First `k` exemplars rendered with their gold answers, newline-joined,
/// followed by the query context; `k = 0` yields the bare context.
pub fn build_prompt(
    context: &str,
    exemplars: &[EvalItem],
    k: usize,
    template: &PromptTemplate,
) -> Result<String, EvalError> {
    if k > exemplars.len() {
        return Err(EvalError::ShotsExceedPool {
            k,
            pool: exemplars.len(),
        });
    }
    if k == 0 {
        return Ok(context.to_string());
    }
    let mut out = String::new();
    for item in &exemplars[..k] {
        out.push_str(&template.render_exemplar(item));
        out.push_str(&template.exemplar_sep);
    }
    out.push_str(context);
    Ok(out)
}

/// Sum of next-token log-probabilities of `continuation` conditioned on
/// `prompt` and the continuation's own prefix. Id-level; always ≤ 0.
pub fn score_ids<M: ScoringModel>(
    model: &M,
    prompt: &[u32],
    continuation: &[u32],
) -> Result<f64, EvalError> {
    if continuation.is_empty() {
        return Err(EvalError::EmptyContinuation);
    }
    if prompt.is_empty() {
        return Err(EvalError::EmptyPrompt);
    }
    let mut full = Vec::with_capacity(prompt.len() + continuation.len());
    full.extend_from_slice(prompt);
    full.extend_from_slice(continuation);
    let rows = model.next_token_logprobs(&full)?;
    let mut total = 0.0;
    for (i, &tok) in continuation.iter().enumerate() {
        total += rows[prompt.len() - 1 + i][tok as usize];
    }
    Ok(total)
}

/// A model paired with the tokenizer that maps task text onto its ids.
pub struct Scorer<'a, M: ScoringModel> {
    pub model: &'a M,
    pub tokenizer: &'a TokenizerModel,
}

impl<'a, M: ScoringModel> Scorer<'a, M> {
    pub fn new(model: &'a M, tokenizer: &'a TokenizerModel) -> Self {
        Scorer { model, tokenizer }
    }

    /// Tokenize prompt and prompt+continuation, scoring the suffix the
    /// continuation contributes. Splitting at the longest common token
    /// prefix absorbs merges that cross the text boundary.
    fn split(&self, prompt: &str, continuation: &str) -> Result<(Vec<u32>, Vec<u32>), EvalError> {
        let full_text = format!("{prompt}{continuation}");
        let full = self.tokenizer.encode(full_text.as_bytes());
        let prompt_ids = self.tokenizer.encode(prompt.as_bytes());
        let common = full
            .iter()
            .zip(&prompt_ids)
            .take_while(|(a, b)| a == b)
            .count();
        if common == 0 {
            return Err(EvalError::EmptyPrompt);
        }
        Ok((full[..common].to_vec(), full[common..].to_vec()))
    }
}

/// Log-likelihood of a text continuation after a text prompt.
pub fn score_choice<M: ScoringModel>(
    scorer: &Scorer<M>,
    prompt: &str,
    continuation: &str,
) -> Result<f64, EvalError> {
    let (prompt_ids, cont_ids) = scorer.split(prompt, continuation)?;
    score_ids(scorer.model, &prompt_ids, &cont_ids)
}

/// Choice scoring rule: raw summed log-likelihood, or normalized by the
/// choice's token count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ChoiceScoring {
    #[default]
    RawSum,
    PerToken,
}

/// Accuracy with its binomial standard error.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub task: String,
    pub shots: usize,
    pub n: usize,
    pub accuracy: f64,
    pub stderr: f64,
}

impl EvalResult {
    pub fn from_counts(task: &str, shots: usize, correct: usize, n: usize) -> Self {
        let accuracy = correct as f64 / n as f64;
        EvalResult {
            task: task.to_string(),
            shots,
            n,
            accuracy,
            stderr: stderr_of(accuracy, n),
        }
    }

    /// `acc ± 2*stderr`, the 95% interval convention.
    pub fn render(&self) -> String {
        format!("{:.3} ± {:.3}", self.accuracy, 2.0 * self.stderr)
    }
}

/// Binomial standard error of an accuracy estimate.
pub fn stderr_of(accuracy: f64, n: usize) -> f64 {
    (accuracy * (1.0 - accuracy) / n as f64).sqrt()
}

/// Evaluate a task at `k` shots.
pub fn evaluate<M: ScoringModel>(
    scorer: &Scorer<M>,
    task: &EvalTask,
    k: usize,
    scoring: ChoiceScoring,
) -> Result<EvalResult, EvalError> {
    evaluate_with(scorer, task, k, scoring, &PromptTemplate::default(), 32)
}

pub fn evaluate_with<M: ScoringModel>(
    scorer: &Scorer<M>,
    task: &EvalTask,
    k: usize,
    scoring: ChoiceScoring,
    template: &PromptTemplate,
    max_gen_tokens: usize,
) -> Result<EvalResult, EvalError> {
    task.validate()?;
    let mut correct = 0usize;
    for item in &task.items {
        let prompt = build_prompt(item.context(), &task.fewshot_pool, k, template)?;
        match (task.kind, item) {
            (TaskKind::MultipleChoice, EvalItem::Choice { choices, gold, .. }) => {
                let mut best = (f64::NEG_INFINITY, 0usize);
                for (idx, choice) in choices.iter().enumerate() {
                    let cont = template.continuation(choice);
                    let (p_ids, c_ids) = scorer.split(&prompt, &cont)?;
                    let mut score = score_ids(scorer.model, &p_ids, &c_ids)?;
                    if scoring == ChoiceScoring::PerToken {
                        score /= c_ids.len() as f64;
                    }
                    if score > best.0 {
                        best = (score, idx);
                    }
                }
                if best.1 == *gold {
                    correct += 1;
                }
            }
            (TaskKind::ExactMatch, EvalItem::Match { answer, .. }) => {
                let gen = generate_greedy(scorer, &prompt, max_gen_tokens, "\n")?;
                if gen.trim() == answer.trim() {
                    correct += 1;
                }
            }
            _ => unreachable!("validate() checked kind/item agreement"),
        }
    }
    Ok(EvalResult::from_counts(
        &task.name,
        k,
        correct,
        task.items.len(),
    ))
}

/// Mean and per-task differences between matched result lists.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaReport {
    pub per_task: Vec<(String, f64)>,
    pub mean: f64,
}

/// Mean accuracy improvement from `zero`-shot to `five`-shot results.
/// The two lists must name the same tasks in the same order.
pub fn fewshot_delta(zero: &[EvalResult], five: &[EvalResult]) -> Result<DeltaReport, EvalError> {
    if zero.len() != five.len() {
        return Err(EvalError::TaskMismatch {
            detail: format!("{} zero-shot tasks vs {} five-shot", zero.len(), five.len()),
        });
    }
    let mismatched: Vec<String> = zero
        .iter()
        .zip(five)
        .filter(|(z, f)| z.task != f.task)
        .map(|(z, f)| format!("{} vs {}", z.task, f.task))
        .collect();
    if !mismatched.is_empty() {
        return Err(EvalError::TaskMismatch {
            detail: mismatched.join(", "),
        });
    }
    if zero.is_empty() {
        return Err(EvalError::EmptyTask);
    }
    let per_task: Vec<(String, f64)> = zero
        .iter()
        .zip(five)
        .map(|(z, f)| (z.task.clone(), f.accuracy - z.accuracy))
        .collect();
    let mean = per_task.iter().map(|(_, d)| d).sum::<f64>() / per_task.len() as f64;
    Ok(DeltaReport { per_task, mean })
}

/// Greedy decoding at the id level: repeated argmax (ties to the lowest
/// id) until the budget runs out.
pub fn generate_greedy_ids<M: ScoringModel>(
    model: &M,
    prompt: &[u32],
    max_tokens: usize,
) -> Result<Vec<u32>, EvalError> {
    if prompt.is_empty() {
        return Err(EvalError::EmptyPrompt);
    }
    let mut ids = prompt.to_vec();
    for _ in 0..max_tokens {
        let rows = model.next_token_logprobs(&ids)?;
        let last = rows.last().expect("non-empty sequence");
        let mut best = (f64::NEG_INFINITY, 0u32);
        for (tok, &lp) in last.iter().enumerate() {
            if lp > best.0 {
                best = (lp, tok as u32);
            }
        }
        ids.push(best.1);
    }
    Ok(ids[prompt.len()..].to_vec())
}

/// Greedy text generation until `stop` appears or the budget runs out;
/// the stop sequence and anything after it is cut.
pub fn generate_greedy<M: ScoringModel>(
    scorer: &Scorer<M>,
    prompt: &str,
    max_tokens: usize,
    stop: &str,
) -> Result<String, EvalError> {
    let prompt_ids = scorer.tokenizer.encode(prompt.as_bytes());
    if prompt_ids.is_empty() {
        return Err(EvalError::EmptyPrompt);
    }
    let mut ids = prompt_ids.clone();
    for _ in 0..max_tokens {
        let rows = scorer.model.next_token_logprobs(&ids)?;
        let last = rows.last().expect("non-empty sequence");
        let mut best = (f64::NEG_INFINITY, 0u32);
        for (tok, &lp) in last.iter().enumerate() {
            if lp > best.0 {
                best = (lp, tok as u32);
            }
        }
        ids.push(best.1);
        let gen_bytes = scorer
            .tokenizer
            .decode(&ids[prompt_ids.len()..])
            .map_err(|e| EvalError::Model(e.to_string()))?;
        let text = String::from_utf8_lossy(&gen_bytes);
        if let Some(pos) = text.find(stop) {
            return Ok(text[..pos].to_string());
        }
    }
    let gen_bytes = scorer
        .tokenizer
        .decode(&ids[prompt_ids.len()..])
        .map_err(|e| EvalError::Model(e.to_string()))?;
    Ok(String::from_utf8_lossy(&gen_bytes).into_owned())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Every next token equally likely.
    struct UniformModel {
        vocab: usize,
    }

    impl ScoringModel for UniformModel {
        fn vocab_size(&self) -> usize {
            self.vocab
        }
        fn next_token_logprobs(&self, ids: &[u32]) -> Result<Vec<Vec<f64>>, EvalError> {
            let lp = -(self.vocab as f64).ln();
            Ok(vec![vec![lp; self.vocab]; ids.len()])
        }
    }

    /// Always prefers one fixed token.
    struct FavoriteModel {
        vocab: usize,
        favorite: u32,
    }

    impl ScoringModel for FavoriteModel {
        fn vocab_size(&self) -> usize {
            self.vocab
        }
        fn next_token_logprobs(&self, ids: &[u32]) -> Result<Vec<Vec<f64>>, EvalError> {
            let mut row = vec![-10.0; self.vocab];
            row[self.favorite as usize] = -0.1;
            Ok(vec![row; ids.len()])
        }
    }

    #[test]
    fn uniform_model_scores_minus_n_log_v() {
        let model = UniformModel { vocab: 50 };
        let score = score_ids(&model, &[1, 2], &[3, 4, 5]).unwrap();
        assert!((score - (-3.0 * (50f64).ln())).abs() < 1e-12);
    }

    #[test]
    fn score_is_additive_over_a_split_continuation() {
        let model = FavoriteModel {
            vocab: 16,
            favorite: 7,
        };
        let prompt = [1u32, 2];
        let a = [7u32, 3];
        let b = [7u32, 7];
        let whole: Vec<u32> = a.iter().chain(&b).copied().collect();
        let joint = score_ids(&model, &prompt, &whole).unwrap();
        let mut prompt_a = prompt.to_vec();
        prompt_a.extend_from_slice(&a);
        let split =
            score_ids(&model, &prompt, &a).unwrap() + score_ids(&model, &prompt_a, &b).unwrap();
        assert!((joint - split).abs() < 1e-12);
    }

    #[test]
    fn longer_continuations_never_score_higher() {
        let model = UniformModel { vocab: 8 };
        let prompt = [0u32];
        let short = score_ids(&model, &prompt, &[1, 2]).unwrap();
        let long = score_ids(&model, &prompt, &[1, 2, 3]).unwrap();
        assert!(long <= short);
    }

    #[test]
    fn empty_continuation_is_an_error() {
        let model = UniformModel { vocab: 8 };
        assert!(matches!(
            score_ids(&model, &[1], &[]),
            Err(EvalError::EmptyContinuation)
        ));
    }

    #[test]
    fn stderr_matches_wsc_row() {
        assert_eq!(format!("{:.3}", stderr_of(0.5, 104)), "0.049");
        assert_eq!(stderr_of(1.0, 25), 0.0);
    }

    #[test]
    fn result_renders_two_standard_errors() {
        let r = EvalResult::from_counts("wsc", 0, 52, 104);
        assert_eq!(r.render(), "0.500 ± 0.098");
        assert!((r.stderr - (0.25 / 104.0f64).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn zero_shot_prompt_is_the_bare_context() {
        let template = PromptTemplate::default();
        let prompt = build_prompt("What is 2+2?", &[], 0, &template).unwrap();
        assert_eq!(prompt, "What is 2+2?");
    }

    #[test]
    fn five_shot_prompt_is_deterministic_and_order_sensitive() {
        let template = PromptTemplate::default();
        let pool: Vec<EvalItem> = (0..5)
            .map(|i| EvalItem::Match {
                context: format!("Q{i}"),
                answer: format!("A{i}"),
            })
            .collect();
        let p1 = build_prompt("Q9", &pool, 5, &template).unwrap();
        let p2 = build_prompt("Q9", &pool, 5, &template).unwrap();
        assert_eq!(p1, p2);
        assert_eq!(p1, "Q0 A0\nQ1 A1\nQ2 A2\nQ3 A3\nQ4 A4\nQ9");
        let reversed: Vec<EvalItem> = pool.iter().rev().cloned().collect();
        let p3 = build_prompt("Q9", &reversed, 5, &template).unwrap();
        assert_ne!(p1, p3);
    }

    #[test]
    fn exemplar_includes_gold_continuation_verbatim() {
        let template = PromptTemplate::default();
        let pool = vec![EvalItem::Choice {
            context: "Pick:".into(),
            choices: vec!["wrong".into(), "the gold answer".into()],
            gold: 1,
        }];
        let prompt = build_prompt("Next:", &pool, 1, &template).unwrap();
        assert!(prompt.contains("the gold answer"));
    }

    #[test]
    fn too_many_shots_error() {
        let template = PromptTemplate::default();
        assert!(matches!(
            build_prompt("q", &[], 1, &template),
            Err(EvalError::ShotsExceedPool { k: 1, pool: 0 })
        ));
    }

    #[test]
    fn fewshot_delta_identity_is_zero() {
        let results = vec![
            EvalResult::from_counts("a", 0, 3, 10),
            EvalResult::from_counts("b", 0, 7, 10),
        ];
        let report = fewshot_delta(&results, &results).unwrap();
        assert_eq!(report.mean, 0.0);
    }

    #[test]
    fn fewshot_delta_mixed_signs() {
        let zero = vec![
            EvalResult::from_counts("a", 0, 50, 100),
            EvalResult::from_counts("b", 0, 52, 100),
        ];
        let five = vec![
            EvalResult::from_counts("a", 5, 60, 100),
            EvalResult::from_counts("b", 5, 50, 100),
        ];
        let report = fewshot_delta(&zero, &five).unwrap();
        assert!((report.mean - 0.04).abs() < 1e-12);
        assert!((report.per_task[0].1 - 0.10).abs() < 1e-12);
        assert!((report.per_task[1].1 + 0.02).abs() < 1e-12);
    }

    #[test]
    fn fewshot_delta_lists_mismatches() {
        let zero = vec![EvalResult::from_counts("a", 0, 1, 10)];
        let five = vec![EvalResult::from_counts("b", 5, 1, 10)];
        match fewshot_delta(&zero, &five) {
            Err(EvalError::TaskMismatch { detail }) => assert!(detail.contains("a vs b")),
            other => panic!("expected TaskMismatch, got {other:?}"),
        }
    }

    #[test]
    fn greedy_ids_repeat_the_favorite_token() {
        let model = FavoriteModel {
            vocab: 16,
            favorite: 7,
        };
        let out = generate_greedy_ids(&model, &[1], 5).unwrap();
        assert_eq!(out, vec![7, 7, 7, 7, 7]);
    }

    #[test]
    fn argmax_ties_break_to_lowest_id() {
        let model = UniformModel { vocab: 16 };
        let out = generate_greedy_ids(&model, &[3], 3).unwrap();
        assert_eq!(out, vec![0, 0, 0]);
    }
}
