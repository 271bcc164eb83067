use std::fmt;

/// Characters stripped from both ends of a whitespace chunk.
const BOUNDARY_PUNCT: &[char] = &[
    '?', '!', '.', ',', ';', ':', '\'', '"', '(', ')', '[', ']', '{', '}',
];

/// One question token: the surface text as it should reach the KB, and the
/// lowercased form used for embedding lookup.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Token {
    pub surface: String,
    pub norm: String,
}

impl Token {
    /// Builds a token from a raw chunk, stripping boundary punctuation from
    /// both forms. Returns `None` when nothing is left.
    pub fn new(chunk: &str) -> Option<Self> {
        let stripped = strip_boundary(chunk);
        if stripped.is_empty() {
            return None;
        }
        Some(Self {
            surface: stripped.to_string(),
            norm: stripped.to_lowercase(),
        })
    }

    /// Keeps `surface` as given (e.g. the `F.` of a KB label) and strips only
    /// the normalized form.
    pub fn verbatim(surface: &str) -> Option<Self> {
        let norm = strip_boundary(surface).to_lowercase();
        if norm.is_empty() {
            return None;
        }
        Some(Self {
            surface: surface.to_string(),
            norm,
        })
    }
}

/// A tokenized question.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct TokenSeq {
    tokens: Vec<Token>,
}

impl TokenSeq {
    pub fn new(tokens: Vec<Token>) -> Self {
        Self { tokens }
    }

    /// Tokens taken verbatim from pre-split surfaces (e.g. a QQT question
    /// field or a KB label).
    pub fn from_surfaces<S: AsRef<str>>(surfaces: &[S]) -> Self {
        Self {
            tokens: surfaces
                .iter()
                .filter_map(|s| Token::verbatim(s.as_ref()))
                .collect(),
        }
    }

    /// Whitespace split without touching surfaces.
    pub fn verbatim(text: &str) -> Self {
        Self {
            tokens: text.split_whitespace().filter_map(Token::verbatim).collect(),
        }
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn surfaces(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.surface.as_str()).collect()
    }

    pub fn norms(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.norm.as_str()).collect()
    }

    /// Space-joined surfaces.
    pub fn joined(&self) -> String {
        self.surfaces().join(" ")
    }

    /// Replaces `tokens[start..end]` with `with`.
    pub(crate) fn splice(&mut self, start: usize, end: usize, with: Vec<Token>) {
        self.tokens.splice(start..end, with);
    }
}

impl fmt::Display for TokenSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.joined())
    }
}

fn strip_boundary(chunk: &str) -> &str {
    chunk.trim_matches(|c: char| BOUNDARY_PUNCT.contains(&c))
}

/// Splits on whitespace and strips boundary punctuation from every chunk.
pub fn tokenize(text: &str) -> TokenSeq {
    TokenSeq {
        tokens: text.split_whitespace().filter_map(Token::new).collect(),
    }
}
