//! Sentence splitting and word tokenization for tweet text.

/// One sentence of lowercase tokens. `question` is set when the sentence was
/// terminated by a `?`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub tokens: Vec<String>,
    pub question: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Tokenized {
    pub sentences: Vec<Sentence>,
    /// Number of maximal runs of two or more periods.
    pub ellipsis_runs: usize,
}

impl Tokenized {
    pub fn tokens(&self) -> impl Iterator<Item = &String> {
        self.sentences.iter().flat_map(|s| s.tokens.iter())
    }
}

fn is_url(chunk: &str) -> bool {
    let lower = chunk.to_ascii_lowercase();
    lower.starts_with("http://") || lower.starts_with("https://") || lower.starts_with("www.")
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '\'' || c == '_'
}

struct Builder {
    out: Tokenized,
    sentence: Vec<String>,
    word: String,
}

impl Builder {
    fn flush_word(&mut self) {
        let w = self.word.trim_matches('\'');
        // a lone '#' or '@' is not a token
        if !w.is_empty() && w != "@" {
            let w = w.strip_prefix('#').unwrap_or(w);
            if !w.is_empty() {
                self.sentence.push(w.to_string());
            }
        }
        self.word.clear();
    }

    fn end_sentence(&mut self, question: bool) {
        self.flush_word();
        if !self.sentence.is_empty() {
            self.out.sentences.push(Sentence {
                tokens: std::mem::take(&mut self.sentence),
                question,
            });
        }
    }
}

/// Splits text into sentences on `.`, `!` and `?`.
///
/// URLs and `@mentions` stay single tokens, a leading `#` is stripped from
/// hashtags, and each maximal run of two or more periods counts as one
/// ellipsis and is removed rather than ending the sentence. A period between
/// two digits is part of a number.
pub fn tokenize(text: &str) -> Tokenized {
    let mut b = Builder {
        out: Tokenized::default(),
        sentence: Vec::new(),
        word: String::new(),
    };
    for chunk in text.split_whitespace() {
        if is_url(chunk) {
            b.flush_word();
            b.sentence.push(chunk.to_string());
            continue;
        }
        let chars: Vec<char> = chunk.chars().flat_map(char::to_lowercase).collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            match c {
                '.' => {
                    let run = chars[i..].iter().take_while(|&&x| x == '.').count();
                    if run >= 2 {
                        b.out.ellipsis_runs += 1;
                        b.flush_word();
                    } else {
                        let prev_digit = i > 0 && chars[i - 1].is_ascii_digit();
                        let next_digit = chars.get(i + 1).is_some_and(|n| n.is_ascii_digit());
                        if prev_digit && next_digit {
                            b.word.push('.');
                        } else {
                            b.end_sentence(false);
                        }
                    }
                    i += run;
                    continue;
                }
                '!' | '?' => {
                    let run: Vec<char> = chars[i..].iter().take_while(|&&x| x == '!' || x == '?').copied().collect();
                    b.end_sentence(run.contains(&'?'));
                    i += run.len();
                    continue;
                }
                '’' => b.word.push('\''),
                '#' | '@' if b.word.is_empty() => b.word.push(c),
                c if is_word_char(c) => b.word.push(c),
                _ => b.flush_word(),
            }
            i += 1;
        }
        b.flush_word();
    }
    b.end_sentence(false);
    b.out
}

/// Tokens of a lexicon phrase or vocabulary term, ignoring sentence breaks.
pub fn phrase_tokens(phrase: &str) -> Vec<String> {
    tokenize(phrase).sentences.into_iter().flat_map(|s| s.tokens).collect()
}
