use std::collections::BTreeSet;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::overlap::{bleu, rouge_l, CiderScorer};
use super::style::{div_n, sen_percent, sentiment_pr, DivMode, SenMatch};
use crate::corpus::{AnpTable, Sentiment};
use crate::{Error, Result};

/// Lexical resources and switches for the style metrics.
#[derive(Debug, Clone, Default)]
pub struct EvalResources {
    /// Enables SEN% when set together with `sentiment`.
    pub anps: Option<AnpTable>,
    pub sentiment: Option<Sentiment>,
    /// Sentiment-adjective universe for SP/SR; empty disables them.
    pub adjectives: BTreeSet<String>,
    pub sen_match: SenMatch,
    pub div_mode: DivMode,
}

/// Metric used to pick the oracle caption of each image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selector {
    #[default]
    Cider,
    Bleu4,
    RougeL,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub images: usize,
    /// Candidates per image.
    pub n: usize,
    pub oracle: bool,
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    pub b4: f64,
    /// Not computed; always `None`.
    pub meteor: Option<f64>,
    pub rouge_l: f64,
    pub cider: f64,
    pub sen_pct: Option<f64>,
    pub sp: Option<f64>,
    pub sr: Option<f64>,
    pub div1: f64,
    pub div2: f64,
}

fn check_shapes(candidates: &[Vec<Vec<String>>], references: &[Vec<Vec<String>>]) -> Result<usize> {
    if candidates.len() != references.len() {
        return Err(Error::LengthMismatch {
            expected: references.len(),
            actual: candidates.len(),
        });
    }
    if candidates.is_empty() {
        return Err(Error::Empty("evaluation corpus"));
    }
    let n = candidates[0].len();
    if n == 0 || candidates.iter().any(|c| c.len() != n) {
        return Err(Error::InvalidArgument("every image needs the same number (>= 1) of candidates".into()));
    }
    Ok(n)
}

/// Index of the best candidate per image under `selector`; ties keep the earlier one.
pub fn select_oracle(candidates: &[Vec<Vec<String>>], references: &[Vec<Vec<String>>], selector: Selector) -> Result<Vec<usize>> {
    check_shapes(candidates, references)?;
    let cider = CiderScorer::new(references)?;
    let mut out = Vec::with_capacity(candidates.len());
    for (i, (cands, refs)) in candidates.iter().zip(references).enumerate() {
        let mut best = (0, f64::NEG_INFINITY);
        for (j, c) in cands.iter().enumerate() {
            let s = match selector {
                Selector::Cider => cider.score(c, i),
                Selector::Bleu4 => bleu(&[c.clone()], &[refs.clone()], 4)?[3],
                Selector::RougeL => rouge_l(c, refs),
            };
            if s > best.1 {
                best = (j, s);
            }
        }
        out.push(best.0);
    }
    Ok(out)
}

/// Scores the captions picked by `chosen` (one index per image). Overlap
/// metrics and SEN% use the picked captions; Div-n and SP/SR use every
/// candidate of an image.
pub fn report_for_selection(
    candidates: &[Vec<Vec<String>>],
    references: &[Vec<Vec<String>>],
    chosen: &[usize],
    resources: &EvalResources,
    oracle: bool,
) -> Result<MetricsReport> {
    let n = check_shapes(candidates, references)?;
    let picked: Vec<Vec<String>> = candidates.iter().zip(chosen).map(|(c, &j)| c[j].clone()).collect();
    let b = bleu(&picked, references, 4)?;
    let rouge = picked.iter().zip(references).map(|(c, r)| rouge_l(c, r)).sum::<f64>() / picked.len() as f64;
    let cider_scorer = CiderScorer::new(references)?;
    let cider = picked.iter().enumerate().map(|(i, c)| cider_scorer.score(c, i)).sum::<f64>() / picked.len() as f64;
    let sen_pct = match (&resources.anps, resources.sentiment) {
        (Some(anps), Some(s)) => Some(sen_percent(&picked, anps, s, resources.sen_match)),
        _ => None,
    };
    let (sp, sr) = if resources.adjectives.is_empty() {
        (None, None)
    } else {
        let (p, r) = sentiment_pr(candidates, references, &resources.adjectives);
        (Some(p), Some(r))
    };
    let div = |k| candidates.iter().map(|c| div_n(c, k, resources.div_mode)).sum::<f64>() / candidates.len() as f64;
    Ok(MetricsReport {
        images: candidates.len(),
        n,
        oracle,
        b1: b[0],
        b2: b[1],
        b3: b[2],
        b4: b[3],
        meteor: None,
        rouge_l: rouge,
        cider,
        sen_pct,
        sp,
        sr,
        div1: div(1),
        div2: div(2),
    })
}

/// Report on the first candidate of every image.
pub fn first_sample_report(candidates: &[Vec<Vec<String>>], references: &[Vec<Vec<String>>], resources: &EvalResources) -> Result<MetricsReport> {
    report_for_selection(candidates, references, &vec![0; candidates.len()], resources, false)
}

/// Report on the per-image best candidate under `selector`.
pub fn oracle_top1(candidates: &[Vec<Vec<String>>], references: &[Vec<Vec<String>>], selector: Selector, resources: &EvalResources) -> Result<MetricsReport> {
    let chosen = select_oracle(candidates, references, selector)?;
    report_for_selection(candidates, references, &chosen, resources, true)
}

fn opt(v: Option<f64>, scale: f64, prec: usize) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{:.*}", prec, x * scale))
}

/// Plain-text table, one row per labelled report. BLEU, ROUGE-L and CIDEr
/// are shown x100.
pub fn render_table(rows: &[(String, MetricsReport)]) -> String {
    let header = ["run", "n", "B1", "B2", "B3", "B4", "M", "R", "C", "%SEN", "SP", "SR", "Div-1", "Div-2"];
    let mut cells: Vec<Vec<String>> = vec![header.iter().map(|h| h.to_string()).collect()];
    for (label, r) in rows {
        let name = if r.oracle { format!("{label} (oracle)") } else { label.clone() };
        cells.push(vec![
            name,
            r.n.to_string(),
            format!("{:.1}", r.b1 * 100.0),
            format!("{:.1}", r.b2 * 100.0),
            format!("{:.1}", r.b3 * 100.0),
            format!("{:.1}", r.b4 * 100.0),
            opt(r.meteor, 100.0, 1),
            format!("{:.1}", r.rouge_l * 100.0),
            format!("{:.1}", r.cider * 100.0),
            opt(r.sen_pct, 1.0, 1),
            opt(r.sp, 1.0, 3),
            opt(r.sr, 1.0, 3),
            format!("{:.3}", r.div1),
            format!("{:.3}", r.div2),
        ]);
    }
    let widths: Vec<usize> = (0..header.len()).map(|c| cells.iter().map(|row| row[c].len()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for row in &cells {
        let line: Vec<String> = row
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (cell, &w))| if i == 0 { format!("{cell:<w$}") } else { format!("{cell:>w$}") })
            .collect();
        let _ = writeln!(out, "{}", line.join("  ").trim_end());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    fn fixture() -> (Vec<Vec<Vec<String>>>, Vec<Vec<Vec<String>>>) {
        let refs = vec![
            vec![t("a furry dog on the grass"), t("a dog lying on grass")],
            vec![t("a red truck on the road")],
            vec![t("a cat on a sofa")],
        ];
        let cands = vec![
            vec![t("a cat on the grass"), t("a furry dog on the grass"), t("a dog on grass")],
            vec![t("a truck"), t("a red truck on a road"), t("the road")],
            vec![t("a dog on a sofa"), t("a cat"), t("a cat on a sofa")],
        ];
        (cands, refs)
    }

    #[test]
    fn candidates_equal_references() {
        let refs = vec![vec![t("a dog on grass")], vec![t("a cat on a sofa")]];
        let cands: Vec<Vec<Vec<String>>> = refs.iter().map(|r| vec![r[0].clone()]).collect();
        let r = first_sample_report(&cands, &refs, &EvalResources::default()).unwrap();
        for b in [r.b1, r.b2, r.b3, r.b4, r.rouge_l] {
            assert!((b - 1.0).abs() < 1e-12);
        }
        // n = 1: oracle and plain agree apart from the flag
        let o = oracle_top1(&cands, &refs, Selector::Cider, &EvalResources::default()).unwrap();
        assert_eq!(MetricsReport { oracle: false, ..o }, r);
    }

    #[test]
    fn oracle_golden_selection_and_dominance() {
        let (cands, refs) = fixture();
        let chosen = select_oracle(&cands, &refs, Selector::Cider).unwrap();
        assert_eq!(chosen, [1, 1, 2]);
        let plain = first_sample_report(&cands, &refs, &EvalResources::default()).unwrap();
        let oracle = oracle_top1(&cands, &refs, Selector::Cider, &EvalResources::default()).unwrap();
        assert!(oracle.cider >= plain.cider);
        assert_eq!(plain.div1, oracle.div1);
    }

    #[test]
    fn table_layout() {
        let (cands, refs) = fixture();
        let mut res = EvalResources::default();
        res.adjectives.insert("furry".into());
        let a = first_sample_report(&cands, &refs, &res).unwrap();
        let b = oracle_top1(&cands, &refs, Selector::Cider, &res).unwrap();
        let table = render_table(&[("desk".into(), a), ("desk".into(), b.clone())]);
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("run"));
        assert!(lines[0].contains("%SEN") && lines[0].contains("Div-2"));
        assert!(lines[1].contains("n/a"));
        assert!(lines[2].starts_with("desk (oracle)"));
        let json = serde_json::to_string(&b).unwrap();
        assert!(json.contains("\"meteor\":null"));
    }
}
