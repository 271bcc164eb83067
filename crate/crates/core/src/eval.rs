//! Per-question and aggregate answer-set scoring of a translation run.

use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::assemble::{assemble_query, extract_entities};
use crate::kb::{execute_query, AnswerSet, TripleStore};
use crate::neural::{predict, ModelParams};
use crate::qqt::{read_pairs, QqtError, QqtTriple};
use crate::scalar::Scalar;
use crate::sparql::{parse_query, SparqlQuery};
use crate::text::{tokenize, Preprocessor, TokenSeq};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no questions to score")]
    EmptyRun,
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("test file: {0}")]
    Input(#[from] QqtError),
    #[error("report: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuestionScore {
    pub index: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// A prediction was assembled and executed.
    pub answered: bool,
}

pub fn harmonic_mean(p: f64, r: f64) -> f64 {
    if p * r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Set-based precision and recall of `system` against `gold`. Two empty
/// sets score 1; a missing system answer scores 0.
pub fn score_question(index: usize, system: Option<&AnswerSet>, gold: &AnswerSet) -> QuestionScore {
    let Some(system) = system else {
        return QuestionScore {
            index,
            precision: 0.0,
            recall: 0.0,
            f1: 0.0,
            answered: false,
        };
    };
    let s = system.items();
    let g = gold.items();
    let (precision, recall) = if s.is_empty() && g.is_empty() {
        (1.0, 1.0)
    } else {
        let hit = s.intersection(&g).count() as f64;
        let ratio = |n: usize| if n == 0 { 0.0 } else { hit / n as f64 };
        (ratio(s.len()), ratio(g.len()))
    };
    QuestionScore {
        index,
        precision,
        recall,
        f1: harmonic_mean(precision, recall),
        answered: true,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub questions: Vec<QuestionScore>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    /// Precision averaged over answered questions, recall over all, then
    /// their harmonic mean.
    pub f1_qald: f64,
    pub total: usize,
    pub answered: usize,
    pub errored: usize,
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| sum / n as f64)
}

pub fn aggregate(scores: &[QuestionScore]) -> Result<RunReport, EvalError> {
    if scores.is_empty() {
        return Err(EvalError::EmptyRun);
    }
    let macro_precision = mean(scores.iter().map(|s| s.precision)).unwrap_or(0.0);
    let macro_recall = mean(scores.iter().map(|s| s.recall)).unwrap_or(0.0);
    let macro_f1 = mean(scores.iter().map(|s| s.f1)).unwrap_or(0.0);
    let f1_qald = match mean(scores.iter().filter(|s| s.answered).map(|s| s.precision)) {
        Some(p) => harmonic_mean(p, macro_recall),
        None => 0.0,
    };
    Ok(RunReport {
        questions: scores.to_vec(),
        macro_precision,
        macro_recall,
        macro_f1,
        f1_qald,
        total: scores.len(),
        answered: scores.iter().filter(|s| s.answered).count(),
        errored: 0,
    })
}

/// One test question with its gold query, if the gold could be built.
#[derive(Debug, Clone)]
pub struct TestItem {
    pub question: TokenSeq,
    pub gold: Result<SparqlQuery, String>,
    /// Skip preprocessing because the question is already prepared.
    pub prepared: bool,
}

/// Reads a pair file or, when every record has three fields, a QQT file.
/// QQT gold queries are their templates filled from the gold tags.
pub fn read_test_file<R: BufRead>(reader: R, lang: &str) -> Result<Vec<TestItem>, EvalError> {
    let lines: Vec<String> = reader.lines().collect::<Result<_, _>>()?;
    let records: Vec<&String> = lines.iter().filter(|l| !l.trim().is_empty()).collect();
    let is_qqt = !records.is_empty() && records.iter().all(|l| l.split('\t').count() == 3);
    if is_qqt {
        let mut out = Vec::with_capacity(records.len());
        for line in records {
            let t = QqtTriple::parse_line(line)?;
            let gold = extract_entities(&t.question, &t.tagging)
                .and_then(|e| assemble_query(&t.template, &e, lang))
                .map(|a| a.query)
                .map_err(|e| e.to_string());
            out.push(TestItem {
                question: t.question,
                gold,
                prepared: true,
            });
        }
        return Ok(out);
    }
    let text = lines.join("\n");
    Ok(read_pairs(text.as_bytes())?
        .into_iter()
        .map(|p| TestItem {
            question: tokenize(&p.question),
            gold: parse_query(&p.sparql).map_err(|e| e.to_string()),
            prepared: false,
        })
        .collect())
}

#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub preprocessor: Preprocessor,
    pub lang: String,
}

/// The system query for one question, if every pipeline stage succeeds.
pub fn translate<T: Scalar>(
    q: &TokenSeq,
    model: &ModelParams<T>,
    lang: &str,
) -> Option<SparqlQuery> {
    let pred = predict(q, model).ok()?;
    let entities = extract_entities(q, &pred.tags).ok()?;
    assemble_query(&pred.template, &entities, lang).ok().map(|a| a.query)
}

/// Preprocess, predict, assemble and execute every question, scoring it
/// against its gold answers on the same store. Questions whose gold query
/// fails are excluded and counted as errored.
pub fn evaluate_run<T: Scalar>(
    items: &[TestItem],
    model: &ModelParams<T>,
    store: &TripleStore,
    opts: &EvalOptions,
) -> Result<RunReport, EvalError> {
    let scored: Vec<Option<QuestionScore>> = items
        .par_iter()
        .enumerate()
        .map(|(i, item)| {
            let gold = item.gold.as_ref().ok()?;
            let gold = execute_query(gold, store).ok()?;
            let q = if item.prepared {
                item.question.clone()
            } else {
                opts.preprocessor.apply(&item.question)
            };
            let system = translate(&q, model, &opts.lang).and_then(|s| execute_query(&s, store).ok());
            Some(score_question(i, system.as_ref(), &gold))
        })
        .collect();
    let errored = scored.iter().filter(|s| s.is_none()).count();
    let scores: Vec<QuestionScore> = scored.into_iter().flatten().collect();
    let mut report = aggregate(&scores)?;
    report.errored = errored;
    report.total += errored;
    Ok(report)
}

/// `idx<TAB>P<TAB>R<TAB>F1<TAB>answered` per question, then the aggregates.
pub fn write_report<W: Write>(mut out: W, r: &RunReport) -> std::io::Result<()> {
    writeln!(out, "idx\tprecision\trecall\tf1\tanswered")?;
    for q in &r.questions {
        writeln!(
            out,
            "{}\t{:.6}\t{:.6}\t{:.6}\t{}",
            q.index, q.precision, q.recall, q.f1, q.answered
        )?;
    }
    writeln!(out)?;
    writeln!(out, "macro_precision\t{:.6}", r.macro_precision)?;
    writeln!(out, "macro_recall\t{:.6}", r.macro_recall)?;
    writeln!(out, "macro_f1\t{:.6}", r.macro_f1)?;
    writeln!(
        out,
        "f1_qald\t{:.6}\t# convention: precision over answered questions, recall over all",
        r.f1_qald
    )?;
    writeln!(out, "total\t{}", r.total)?;
    writeln!(out, "answered\t{}", r.answered)?;
    writeln!(out, "errored\t{}", r.errored)?;
    Ok(())
}

pub fn write_report_json<W: Write>(out: W, r: &RunReport) -> Result<(), EvalError> {
    serde_json::to_writer_pretty(out, r)?;
    Ok(())
}
