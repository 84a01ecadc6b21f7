//! Comparative tokenizer analytics over a component-structured corpus:
//! token counts and count ratios between two tokenizers, whitespace-token
//! exclusion, longest-token listings and worst-case word tokenizations.

use neoxkit_tokenizer::TokenizerModel;

/// One named slice of a corpus (for example one data source).
#[derive(Debug, Clone)]
pub struct CorpusComponent {
    pub name: String,
    pub documents: Vec<Vec<u8>>,
}

impl CorpusComponent {
    pub fn new(name: impl Into<String>, documents: Vec<Vec<u8>>) -> Self {
        CorpusComponent {
            name: name.into(),
            documents,
        }
    }
}

/// Per-component counts under two tokenizers plus the `b/a` ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioRow {
    pub component: String,
    pub count_a: u64,
    pub count_b: u64,
    pub ratio: f64,
}

/// Count comparison table. The totals row sums the columns and recomputes
/// its ratio from the totals, never by averaging per-row ratios.
#[derive(Debug, Clone)]
pub struct CountReport {
    pub rows: Vec<RatioRow>,
    pub totals: RatioRow,
    pub exclude_whitespace: bool,
}

/// A token counts as whitespace when every byte is ASCII whitespace.
pub fn is_whitespace_token(bytes: &[u8]) -> bool {
    !bytes.is_empty() && bytes.iter().all(|b| b.is_ascii_whitespace())
}

/// Total tokens needed to encode a component, optionally skipping tokens
/// that consist only of whitespace characters.
pub fn count_tokens(
    component: &CorpusComponent,
    model: &TokenizerModel,
    exclude_whitespace: bool,
) -> u64 {
    let mut total = 0u64;
    for doc in &component.documents {
        let ids = model.encode(doc);
        if exclude_whitespace {
            total += ids
                .iter()
                .filter(|&&id| !is_whitespace_token(model.token_bytes(id).unwrap_or(b"")))
                .count() as u64;
        } else {
            total += ids.len() as u64;
        }
    }
    total
}

fn ratio_of(count_a: u64, count_b: u64) -> f64 {
    if count_a == 0 {
        if count_b == 0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        count_b as f64 / count_a as f64
    }
}

/// Compare two tokenizers component by component.
pub fn ratio_report(
    corpus: &[CorpusComponent],
    model_a: &TokenizerModel,
    model_b: &TokenizerModel,
    exclude_whitespace: bool,
) -> CountReport {
    let mut rows = Vec::with_capacity(corpus.len());
    let (mut total_a, mut total_b) = (0u64, 0u64);
    for component in corpus {
        let count_a = count_tokens(component, model_a, exclude_whitespace);
        let count_b = count_tokens(component, model_b, exclude_whitespace);
        total_a += count_a;
        total_b += count_b;
        rows.push(RatioRow {
            component: component.name.clone(),
            count_a,
            count_b,
            ratio: ratio_of(count_a, count_b),
        });
    }
    CountReport {
        rows,
        totals: RatioRow {
            component: "Total".into(),
            count_a: total_a,
            count_b: total_b,
            ratio: ratio_of(total_a, total_b),
        },
        exclude_whitespace,
    }
}

/// Top `k` vocabulary entries by byte length, keeping only tokens in
/// which at least half the bytes are letters. Ties break by ascending id.
pub fn longest_tokens(model: &TokenizerModel, k: usize) -> Vec<Vec<u8>> {
    let mut qualifying: Vec<(usize, u32)> = Vec::new();
    for id in 0..model.id_bounds() {
        let bytes = model.token_bytes(id).expect("dense vocab");
        let letters = bytes.iter().filter(|b| b.is_ascii_alphabetic()).count();
        if 2 * letters >= bytes.len() && !bytes.is_empty() {
            qualifying.push((bytes.len(), id));
        }
    }
    qualifying.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    qualifying
        .into_iter()
        .take(k)
        .map(|(_, id)| model.token_bytes(id).unwrap().to_vec())
        .collect()
}

/// One word with its token counts under both models.
#[derive(Debug, Clone, PartialEq)]
pub struct WordDiscrepancy {
    pub word: Vec<u8>,
    pub tokens_a: usize,
    pub tokens_b: usize,
}

/// Worst-case word tokenizations in both directions for one component.
#[derive(Debug, Clone)]
pub struct WorstCaseReport {
    /// Words model A needs many more tokens for than model B.
    pub worst_for_a: Vec<WordDiscrepancy>,
    /// The symmetric list for model B.
    pub worst_for_b: Vec<WordDiscrepancy>,
}

/// Split a document into words: contiguous byte runs delimited by ASCII
/// whitespace or ASCII punctuation.
fn words_of(doc: &[u8]) -> impl Iterator<Item = &[u8]> {
    doc.split(|b| b.is_ascii_whitespace() || b.is_ascii_punctuation())
        .filter(|w| !w.is_empty())
}

/// Rank word-level tokenization discrepancies within one component.
///
/// Words occurring at least `min_count` times in the component are each
/// encoded in their space-prefixed form under both models; the report
/// ranks by token-count difference, descending, ties by word bytes.
pub fn worst_case_words(
    component: &CorpusComponent,
    model_a: &TokenizerModel,
    model_b: &TokenizerModel,
    min_count: u64,
    top: usize,
) -> WorstCaseReport {
    use std::collections::HashMap;
    let mut freq: HashMap<&[u8], u64> = HashMap::new();
    for doc in &component.documents {
        for w in words_of(doc) {
            *freq.entry(w).or_insert(0) += 1;
        }
    }
    // Encoding the bare word yields its space-prefixed token form: the
    // start-of-string boundary is equivalent to a preceding space.
    let mut entries: Vec<WordDiscrepancy> = freq
        .into_iter()
        .filter(|&(_, c)| c >= min_count)
        .map(|(word, _)| WordDiscrepancy {
            word: word.to_vec(),
            tokens_a: model_a.encode(word).len(),
            tokens_b: model_b.encode(word).len(),
        })
        .collect();

    let mut worst_for_a = entries.clone();
    worst_for_a.sort_by(|x, y| {
        let dx = x.tokens_a as i64 - x.tokens_b as i64;
        let dy = y.tokens_a as i64 - y.tokens_b as i64;
        dy.cmp(&dx).then(x.word.cmp(&y.word))
    });
    worst_for_a.truncate(top);

    entries.sort_by(|x, y| {
        let dx = x.tokens_b as i64 - x.tokens_a as i64;
        let dy = y.tokens_b as i64 - y.tokens_a as i64;
        dy.cmp(&dx).then(x.word.cmp(&y.word))
    });
    entries.truncate(top);

    WorstCaseReport {
        worst_for_a,
        worst_for_b: entries,
    }
}

/// `383111734` -> `"383,111,734"`.
pub fn format_count(n: u64) -> String {
    let digits = n.to_string();
    let mut out = String::with_capacity(digits.len() + digits.len() / 3);
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(c);
    }
    out
}

/// Ratios print at five decimal places, matching the reference tables.
pub fn format_ratio(r: f64) -> String {
    format!("{r:.5}")
}

impl CountReport {
    /// Render the table the way the reference tables print: counts with
    /// thousands separators, ratios at five decimals.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let header = if self.exclude_whitespace {
            "component\ttokens_a\ttokens_b\tratio (whitespace excluded)"
        } else {
            "component\ttokens_a\ttokens_b\tratio"
        };
        out.push_str(header);
        out.push('\n');
        for row in self.rows.iter().chain(std::iter::once(&self.totals)) {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                row.component,
                format_count(row.count_a),
                format_count(row.count_b),
                format_ratio(row.ratio)
            ));
        }
        out
    }
}
