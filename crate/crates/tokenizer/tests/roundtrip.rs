//! End-to-end properties of trained tokenizers: byte round trips,
//! whitespace compression and start-of-string consistency.

use neoxkit_tokenizer::{train_bpe, TokenizerModel};

/// Small deterministic generator for fuzz inputs.
struct Lcg(u64);

impl Lcg {
    fn next_u64(&mut self) -> u64 {
        self.0 = self
            .0
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        self.0
    }

    fn byte(&mut self) -> u8 {
        (self.next_u64() >> 33) as u8
    }

    fn below(&mut self, n: usize) -> usize {
        (self.next_u64() >> 16) as usize % n
    }
}

fn fixture_corpus() -> Vec<Vec<u8>> {
    let docs: Vec<&str> = vec![
        "def fibRec(n):\n    if n < 2:\n        return n\n    else:\n        return fibRec(n-1) + fibRec(n-2)",
        "The quick brown fox jumps over the lazy dog.",
        "fn main() {\n    println!(\"hello world\");\n}",
        "for (int i = 0; i < 10; i++) {\n        total += values[i];\n}",
        "Indentation        matters in        source        code.",
        "import numpy as np\n\nx = np.zeros((3, 3))\n",
    ];
    docs.into_iter().map(|d| d.as_bytes().to_vec()).collect()
}

fn trained() -> TokenizerModel {
    train_bpe(&fixture_corpus(), 620, &[]).unwrap().model
}

#[test]
fn random_byte_strings_round_trip() {
    let model = trained();
    let mut rng = Lcg(0x9e3779b97f4a7c15);
    for _ in 0..2000 {
        let len = rng.below(120);
        let input: Vec<u8> = (0..len).map(|_| rng.byte()).collect();
        let ids = model.encode(&input);
        assert_eq!(model.decode(&ids).unwrap(), input, "input {input:?}");
    }
}

#[test]
fn random_unicode_strings_round_trip() {
    let model = trained();
    let mut rng = Lcg(0x2545f4914f6cdd1d);
    let pool: Vec<char> = "ab cde  ف語僕\u{1F600}é\n\tzß ".chars().collect();
    for _ in 0..2000 {
        let len = rng.below(60);
        let s: String = (0..len).map(|_| pool[rng.below(pool.len())]).collect();
        let ids = model.encode(s.as_bytes());
        assert_eq!(model.decode(&ids).unwrap(), s.as_bytes());
    }
}

#[test]
fn whitespace_compression_holds_on_trained_model() {
    let model = trained();
    for k in 1..=24usize {
        assert_eq!(model.encode(&vec![b' '; k]).len(), 1, "{k} spaces");
    }
    for k in 25..=48usize {
        assert_eq!(model.encode(&vec![b' '; k]).len(), 2, "{k} spaces");
    }
}

#[test]
fn start_of_string_words_match_space_prefixed_occurrences() {
    let model = trained();
    let words = [
        "def",
        "return",
        "quick",
        "println",
        "total",
        "values",
        "matters",
        "zeros",
        "import",
        "fibRec",
        "unseenword",
        "Zebra9",
    ];
    for w in words {
        let alone = model.encode(w.as_bytes());
        let in_context = model.encode(format!("x {w}").as_bytes());
        assert!(
            in_context.ends_with(&alone),
            "word {w}: {alone:?} vs {in_context:?}"
        );
    }
}

#[test]
fn space_prefixed_word_tokens_exist_after_training() {
    // Words seen after a single space merge with their boundary space:
    // the first token covering " quick" carries the leading space.
    let model = trained();
    let prefix = model.encode(b"x");
    let ids = model.encode(b"x quick");
    let first_word_token = ids[prefix.len()];
    let bytes = model.token_bytes(first_word_token).unwrap();
    assert!(
        bytes.starts_with(b" "),
        "expected a space-prefixed token, got {bytes:?}"
    );
    assert!(
        bytes.len() > 1,
        "boundary space should have merged into the word"
    );
}

#[test]
fn twenty_four_spaces_is_one_token_even_untrained() {
    let model = TokenizerModel::base();
    assert_eq!(model.encode(&[b' '; 24]).len(), 1);
}

#[test]
fn decode_of_leading_space_string_keeps_the_space() {
    let model = trained();
    for t in [" def", "  def", " def fib", "   x", " \n"] {
        let ids = model.encode(t.as_bytes());
        assert_eq!(model.decode(&ids).unwrap(), t.as_bytes(), "{t:?}");
    }
}

#[test]
fn model_is_shareable_across_threads() {
    fn assert_send_sync<T: Send + Sync>() {}
    assert_send_sync::<TokenizerModel>();

    let model = std::sync::Arc::new(trained());
    let handles: Vec<_> = (0..4)
        .map(|i| {
            let model = std::sync::Arc::clone(&model);
            std::thread::spawn(move || {
                let text = format!("thread {i} says hello   world");
                let ids = model.encode(text.as_bytes());
                assert_eq!(model.decode(&ids).unwrap(), text.as_bytes());
            })
        })
        .collect();
    for h in handles {
        h.join().unwrap();
    }
}
