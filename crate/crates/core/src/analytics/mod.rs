//! Dialogue persistence and corpus statistics.

mod records;
mod stats;
mod tokens;

pub use records::{
    append_records, parse_records, read_records, read_records_lenient, write_records, DialogueRecord, LenientRead,
    RecordError, RecordWriter, SCHEMA_VERSION,
};
pub use stats::{
    compute_stats, compute_stats_with, failure_label, render_stats_table, FailureCount, GroupBy, SeedStats,
    StatsConfig, StatsError, StatsReport,
};
pub use tokens::{count_tokens, Tokenizer, TokenizerRegistry, UnknownTokenizer, WhitespaceTokenizer, WHITESPACE};
