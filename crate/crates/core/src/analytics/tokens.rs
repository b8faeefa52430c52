use std::collections::BTreeMap;
use std::sync::Arc;

pub const WHITESPACE: &str = "whitespace";

pub trait Tokenizer: Send + Sync {
    fn count(&self, text: &str) -> usize;
}

/// Counts maximal runs of non-whitespace characters.
#[derive(Debug, Clone, Copy, Default)]
pub struct WhitespaceTokenizer;

impl Tokenizer for WhitespaceTokenizer {
    fn count(&self, text: &str) -> usize {
        text.split_whitespace().count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown tokenizer '{0}'")]
pub struct UnknownTokenizer(pub String);

/// Tokenizers by id. Starts with the whitespace tokenizer registered.
#[derive(Clone)]
pub struct TokenizerRegistry {
    entries: BTreeMap<String, Arc<dyn Tokenizer>>,
}

impl Default for TokenizerRegistry {
    fn default() -> Self {
        let mut registry = TokenizerRegistry { entries: BTreeMap::new() };
        registry.register(WHITESPACE, WhitespaceTokenizer);
        registry
    }
}

impl std::fmt::Debug for TokenizerRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_set().entries(self.entries.keys()).finish()
    }
}

impl TokenizerRegistry {
    pub fn register(&mut self, id: impl Into<String>, tokenizer: impl Tokenizer + 'static) {
        self.entries.insert(id.into(), Arc::new(tokenizer));
    }

    pub fn get(&self, id: &str) -> Result<&dyn Tokenizer, UnknownTokenizer> {
        self.entries.get(id).map(|t| t.as_ref()).ok_or_else(|| UnknownTokenizer(id.to_string()))
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

/// Counts tokens with one of the built-in tokenizers.
pub fn count_tokens(text: &str, tokenizer_id: &str) -> Result<usize, UnknownTokenizer> {
    TokenizerRegistry::default().get(tokenizer_id).map(|t| t.count(text))
}
