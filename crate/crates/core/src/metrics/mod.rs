//! Caption evaluation: n-gram overlap (BLEU, ROUGE-L, CIDEr), diversity,
//! sentiment-pair coverage, sentiment-adjective precision/recall and the
//! opinion-lexicon classifier.

mod overlap;
mod report;
mod style;

pub use overlap::{bleu, cider, lcs_len, ngrams, rouge_l, CiderScorer, NGramCounts, BLEU_EPSILON, ROUGE_BETA};
pub use report::{first_sample_report, oracle_top1, render_table, report_for_selection, select_oracle, EvalResources, MetricsReport, Selector};
pub use style::{div_n, has_anp, lexicon_classify, sen_percent, sentiment_pr, DivMode, SenMatch};
