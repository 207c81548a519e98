//! Meta-feature templates: ordered lists of yes/no rules that turn raw
//! tabular records into `f`-bit codewords.
//!
//! Candidate rules are scored by their single-bit error: split the records
//! by the rule's bit value, let the majority label win inside each split,
//! and count the misses (fuzzy-labeled records contribute fractionally).
//! The `f` best-scoring candidates form the template, best first, and the
//! rule order is the bit order: `rules[0]` produces the most significant
//! bit, so bit significance follows feature quality.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use rayon::prelude::*;

use crate::bitcode::{Codeword, MAX_WIDTH};
use crate::error::{Error, Result};
use crate::labels::LabelDistribution;

/// One raw table cell. An empty (or whitespace-only) cell is missing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cell {
    raw: String,
}

impl Cell {
    pub fn new(raw: impl Into<String>) -> Self {
        Self { raw: raw.into() }
    }

    pub fn is_missing(&self) -> bool {
        self.raw.trim().is_empty()
    }

    pub fn text(&self) -> &str {
        self.raw.trim()
    }

    pub fn as_number(&self) -> Option<f64> {
        if self.is_missing() {
            return None;
        }
        self.raw.trim().parse().ok()
    }
}

/// A raw tabular dataset: named columns and rows of cells.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl RawTable {
    /// Read a CSV stream with a header row.
    pub fn from_csv_reader<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut csv_reader = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let columns: Vec<String> = csv_reader
            .headers()?
            .iter()
            .map(|h| h.trim().to_string())
            .collect();
        let mut rows = Vec::new();
        for record in csv_reader.records() {
            let record = record?;
            rows.push(record.iter().map(Cell::new).collect());
        }
        Ok(Self { columns, rows })
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }
}

/// How one rule maps a cell to a bit.
#[derive(Debug, Clone, PartialEq)]
pub enum RuleKind {
    /// Numeric cell strictly greater than the cutpoint. Missing or
    /// non-numeric cells evaluate to 0.
    Threshold(f64),
    /// Cell text equals the value. Missing cells evaluate to 0.
    Equals(String),
    /// Cell is present (non-missing).
    Presence,
}

/// A single yes/no meta-feature: a rule applied to one source column.
#[derive(Debug, Clone, PartialEq)]
pub struct BinRule {
    pub source_column: usize,
    pub kind: RuleKind,
}

impl BinRule {
    pub fn threshold(source_column: usize, cutpoint: f64) -> Self {
        Self {
            source_column,
            kind: RuleKind::Threshold(cutpoint),
        }
    }

    pub fn equals(source_column: usize, value: impl Into<String>) -> Self {
        Self {
            source_column,
            kind: RuleKind::Equals(value.into()),
        }
    }

    pub fn presence(source_column: usize) -> Self {
        Self {
            source_column,
            kind: RuleKind::Presence,
        }
    }

    /// Evaluate against one record. `rule_index` only feeds the error report.
    fn evaluate_at(&self, record: &[Cell], rule_index: usize) -> Result<bool> {
        let cell = record.get(self.source_column).ok_or(Error::MissingColumn {
            rule: rule_index,
            column: self.source_column,
            available: record.len(),
        })?;
        Ok(match &self.kind {
            RuleKind::Threshold(cut) => cell.as_number().is_some_and(|v| v > *cut),
            RuleKind::Equals(value) => !cell.is_missing() && cell.text() == value,
            RuleKind::Presence => !cell.is_missing(),
        })
    }

    pub fn evaluate(&self, record: &[Cell]) -> Result<bool> {
        self.evaluate_at(record, 0)
    }
}

/// Single-bit statistical error of a candidate rule: one minus the accuracy
/// of the majority-label-per-bit-value classifier, with fuzzy labels
/// contributing their per-class weights.
pub fn rule_error(
    rule: &BinRule,
    records: &[Vec<Cell>],
    labels: &[LabelDistribution],
) -> Result<f64> {
    assert_eq!(records.len(), labels.len());
    if records.is_empty() {
        return Err(Error::Parse {
            line: 0,
            msg: "dataset contains no records".into(),
        });
    }
    let class_count = labels[0].class_count();
    let mut counts = [vec![0.0f64; class_count], vec![0.0f64; class_count]];
    for (record, label) in records.iter().zip(labels) {
        let bit = rule.evaluate(record)? as usize;
        for (acc, p) in counts[bit].iter_mut().zip(label.probs()) {
            *acc += p;
        }
    }
    let correct: f64 = counts
        .iter()
        .map(|side| side.iter().cloned().fold(0.0, f64::max))
        .sum();
    Ok(1.0 - correct / records.len() as f64)
}

/// Ordered list of exactly `f` rules; `rules[0]` produces the MSB.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaFeatureTemplate {
    rules: Vec<BinRule>,
    scores: Vec<f64>,
}

impl MetaFeatureTemplate {
    pub fn new(rules: Vec<BinRule>, scores: Vec<f64>) -> Result<Self> {
        if rules.is_empty() || rules.len() > MAX_WIDTH as usize {
            return Err(Error::InvalidWidth(rules.len() as u32));
        }
        assert_eq!(rules.len(), scores.len());
        for (i, rule) in rules.iter().enumerate() {
            if rules[..i].contains(rule) {
                return Err(Error::Parse {
                    line: 0,
                    msg: format!("duplicate rule at rank {i}"),
                });
            }
        }
        Ok(Self { rules, scores })
    }

    pub fn width(&self) -> u8 {
        self.rules.len() as u8
    }

    pub fn rules(&self) -> &[BinRule] {
        &self.rules
    }

    /// Per-rule ranking scores (statistical errors), aligned with `rules`.
    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    /// Encode one record: bit `i` is 1 iff `rules[i]` holds, packed MSB
    /// first.
    pub fn encode(&self, record: &[Cell]) -> Result<Codeword> {
        let width = self.width();
        let mut bits = 0u32;
        for (i, rule) in self.rules.iter().enumerate() {
            if rule.evaluate_at(record, i)? {
                bits |= 1 << (width as usize - 1 - i);
            }
        }
        Codeword::new(bits, width)
    }

    /// Write the line-oriented text form:
    /// a `FSLBM-TPL v1 f=<f>` header, then one rule per line with
    /// tab-separated `rank`, `kind`, `column`, `param`, `score` fields.
    pub fn save_to<W: Write>(&self, mut writer: W) -> Result<()> {
        writeln!(writer, "FSLBM-TPL v1 f={}", self.width())?;
        for (rank, (rule, score)) in self.rules.iter().zip(&self.scores).enumerate() {
            let (kind, param) = match &rule.kind {
                RuleKind::Threshold(cut) => ("threshold", cut.to_string()),
                RuleKind::Equals(value) => ("equals", escape_param(value)),
                RuleKind::Presence => ("presence", "-".to_string()),
            };
            writeln!(
                writer,
                "{rank}\t{kind}\t{}\t{param}\t{score}",
                rule.source_column
            )?;
        }
        Ok(())
    }

    pub fn load_from<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let (_, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "empty template file".into(),
        })?;
        let header = header?;
        let width: usize = header
            .trim()
            .strip_prefix("FSLBM-TPL v1 f=")
            .and_then(|s| s.parse().ok())
            .ok_or(Error::Parse {
                line: 1,
                msg: format!("bad template header {header:?}"),
            })?;

        let mut rules = Vec::with_capacity(width);
        let mut scores = Vec::with_capacity(width);
        for (i, line) in lines {
            let line_no = i + 1;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 5 {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("expected 5 tab-separated fields, found {}", fields.len()),
                });
            }
            let rank: usize = fields[0].parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("bad rank {:?}", fields[0]),
            })?;
            if rank != rules.len() {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("rank {rank} out of sequence"),
                });
            }
            let column: usize = fields[2].parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("bad column {:?}", fields[2]),
            })?;
            let kind = match fields[1] {
                "threshold" => RuleKind::Threshold(fields[3].parse().map_err(|_| Error::Parse {
                    line: line_no,
                    msg: format!("bad cutpoint {:?}", fields[3]),
                })?),
                "equals" => RuleKind::Equals(unescape_param(fields[3], line_no)?),
                "presence" => RuleKind::Presence,
                other => {
                    return Err(Error::Parse {
                        line: line_no,
                        msg: format!("unknown rule kind {other:?}"),
                    })
                }
            };
            let score: f64 = fields[4].parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("bad score {:?}", fields[4]),
            })?;
            rules.push(BinRule {
                source_column: column,
                kind,
            });
            scores.push(score);
        }
        if rules.len() != width {
            return Err(Error::Parse {
                line: 0,
                msg: format!("header declares f={width} but found {} rules", rules.len()),
            });
        }
        Self::new(rules, scores)
    }
}

fn escape_param(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            other => out.push(other),
        }
    }
    out
}

fn unescape_param(s: &str, line: usize) -> Result<String> {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(ch) = chars.next() {
        if ch != '\\' {
            out.push(ch);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            other => {
                return Err(Error::Parse {
                    line,
                    msg: format!("bad escape sequence \\{}", other.map_or(String::new(), String::from)),
                })
            }
        }
    }
    Ok(out)
}

/// Score every candidate, drop the ones above `error_tolerance` when at
/// least `width` candidates survive the cut, and keep the `width` best,
/// ordered best first. Ties keep the candidates' input order, so the result
/// is deterministic for a given input sequence. Duplicate candidates are
/// collapsed to their first occurrence.
pub fn rank_and_select(
    candidates: Vec<BinRule>,
    records: &[Vec<Cell>],
    labels: &[LabelDistribution],
    width: u8,
    error_tolerance: f64,
) -> Result<MetaFeatureTemplate> {
    assert_eq!(records.len(), labels.len());
    if width == 0 || width > MAX_WIDTH {
        return Err(Error::InvalidWidth(u32::from(width)));
    }
    let mut unique: Vec<BinRule> = Vec::with_capacity(candidates.len());
    for rule in candidates {
        if !unique.contains(&rule) {
            unique.push(rule);
        }
    }
    let need = usize::from(width);
    if unique.len() < need {
        return Err(Error::InsufficientCandidates {
            have: unique.len(),
            need,
        });
    }

    let errors: Vec<f64> = unique
        .par_iter()
        .map(|rule| rule_error(rule, records, labels))
        .collect::<Result<_>>()?;

    let mut order: Vec<usize> = (0..unique.len()).collect();
    order.sort_by(|&a, &b| errors[a].total_cmp(&errors[b]));

    let survivors: Vec<usize> = order
        .iter()
        .copied()
        .filter(|&i| errors[i] <= error_tolerance)
        .collect();
    let chosen: &[usize] = if survivors.len() >= need {
        &survivors[..need]
    } else {
        &order[..need]
    };

    let rules = chosen.iter().map(|&i| unique[i].clone()).collect();
    let scores = chosen.iter().map(|&i| errors[i]).collect();
    MetaFeatureTemplate::new(rules, scores)
}

/// Generate candidate rules from a raw table: a median-split threshold per
/// numeric column, one-vs-rest equality rules for the `class_count` most
/// frequent values of each categorical column, and a presence rule for any
/// column with both missing and present cells. The label column is skipped.
pub fn auto_candidates(table: &RawTable, label_column: usize, class_count: usize) -> Vec<BinRule> {
    let mut out = Vec::new();
    for col in 0..table.columns.len() {
        if col == label_column {
            continue;
        }
        let cells: Vec<&Cell> = table.rows.iter().filter_map(|r| r.get(col)).collect();
        let present: Vec<&Cell> = cells.iter().copied().filter(|c| !c.is_missing()).collect();
        if present.is_empty() {
            continue;
        }

        let numbers: Vec<f64> = present.iter().filter_map(|c| c.as_number()).collect();
        if numbers.len() == present.len() {
            out.push(BinRule::threshold(col, median(numbers)));
        } else {
            // (count, first occurrence) per distinct value.
            let mut freq: HashMap<&str, (usize, usize)> = HashMap::new();
            for (pos, cell) in present.iter().enumerate() {
                let entry = freq.entry(cell.text()).or_insert((0, pos));
                entry.0 += 1;
            }
            let mut values: Vec<(&str, (usize, usize))> = freq.into_iter().collect();
            values.sort_by(|a, b| b.1 .0.cmp(&a.1 .0).then(a.1 .1.cmp(&b.1 .1)));
            for (value, _) in values.into_iter().take(class_count) {
                out.push(BinRule::equals(col, value));
            }
        }

        if present.len() < cells.len() {
            out.push(BinRule::presence(col));
        }
    }
    out
}

fn median(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Parse the label column into fuzzy distributions.
///
/// A label cell is either a single class name (crisp) or comma-separated
/// `name:weight` items; an item only splits on its last `:` when the suffix
/// parses as a number. Class names map to dense ids in lexicographic order,
/// and the returned vector lists the name for each id.
pub fn extract_labels(
    table: &RawTable,
    label_column: usize,
) -> Result<(Vec<LabelDistribution>, Vec<String>)> {
    let mut parsed: Vec<(usize, Vec<(String, f64)>)> = Vec::with_capacity(table.rows.len());
    let mut names: Vec<String> = Vec::new();
    for (row_idx, row) in table.rows.iter().enumerate() {
        let line = row_idx + 2; // header is line 1
        let cell = row.get(label_column).ok_or(Error::Parse {
            line,
            msg: format!("row has no column {label_column}"),
        })?;
        if cell.is_missing() {
            return Err(Error::Parse {
                line,
                msg: "missing label".into(),
            });
        }
        let mut items = Vec::new();
        for item in cell.text().split(',') {
            let item = item.trim();
            if item.is_empty() {
                return Err(Error::Parse {
                    line,
                    msg: "empty label item".into(),
                });
            }
            let (name, weight) = match item.rsplit_once(':') {
                Some((name, w)) if w.trim().parse::<f64>().is_ok() => {
                    (name.trim(), w.trim().parse::<f64>().unwrap())
                }
                _ => (item, 1.0),
            };
            if !(weight.is_finite() && weight >= 0.0) {
                return Err(Error::Parse {
                    line,
                    msg: format!("label weight {weight} out of range"),
                });
            }
            if !names.iter().any(|n| n == name) {
                names.push(name.to_string());
            }
            items.push((name.to_string(), weight));
        }
        parsed.push((line, items));
    }

    names.sort();
    if names.len() < 2 {
        return Err(Error::BadClassCount(names.len()));
    }
    let index: HashMap<&str, usize> = names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), i))
        .collect();

    let mut labels = Vec::with_capacity(parsed.len());
    for (line, items) in parsed {
        let mut weights = vec![0.0f64; names.len()];
        for (name, w) in items {
            weights[index[name.as_str()]] += w;
        }
        let dist = LabelDistribution::from_weights(&weights).map_err(|e| Error::Parse {
            line,
            msg: e.to_string(),
        })?;
        labels.push(dist);
    }
    Ok((labels, names))
}
