use super::{Token, TokenKind};

/// Lowercase, whitespace-collapsing tokenizer.
///
/// A word is a run of alphanumeric characters, optionally joined by single
/// inner hyphens (`sports-minded` stays one token). Every other
/// non-whitespace character becomes its own punctuation token.
pub fn tokenize(text: &str) -> Vec<Token> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_alphanumeric() {
            let start = i;
            while i < chars.len() {
                if chars[i].is_alphanumeric() {
                    i += 1;
                } else if chars[i] == '-'
                    && i + 1 < chars.len()
                    && chars[i + 1].is_alphanumeric()
                {
                    i += 2;
                } else {
                    break;
                }
            }
            let word: String = chars[start..i].iter().collect();
            tokens.push(Token {
                text: word.to_lowercase(),
                kind: TokenKind::Word,
            });
        } else {
            tokens.push(Token {
                text: c.to_lowercase().collect(),
                kind: TokenKind::Punctuation,
            });
            i += 1;
        }
    }
    tokens
}

/// Space-joined surface form; `tokenize(detokenize(t)) == t` for tokenizer output.
pub fn detokenize(tokens: &[Token]) -> String {
    tokens
        .iter()
        .filter(|t| matches!(t.kind, TokenKind::Word | TokenKind::Punctuation))
        .map(|t| t.text.as_str())
        .collect::<Vec<_>>()
        .join(" ")
}
