//! Line-oriented codeword dataset format.
//!
//! One record per line: an `f`-character binary string, then a TAB and the
//! label field `label:weight[,label:weight...]`. A crisp label may omit
//! `:weight` (weight 1.0). Weights need not be normalized on input; they are
//! normalized when the record is read. Blank lines and lines starting with
//! `#` are skipped.

use std::io::{BufRead, Write};

use crate::bitcode::Codeword;
use crate::error::{Error, Result};
use crate::labels::LabelDistribution;

/// A parsed labeled dataset: uniform-width codewords over a dense class set.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub width: u8,
    pub class_count: usize,
    pub records: Vec<(Codeword, LabelDistribution)>,
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

fn split_line(line: &str) -> (&str, Option<&str>) {
    match line.split_once('\t') {
        Some((code, labels)) => (code, Some(labels)),
        None => (line, None),
    }
}

/// Parse one label field into `(id, weight)` pairs.
fn parse_label_field(field: &str, line: usize) -> Result<Vec<(u16, f64)>> {
    let mut out = Vec::new();
    for item in field.split(',') {
        let item = item.trim();
        if item.is_empty() {
            return Err(parse_err(line, "empty label item"));
        }
        let (id_text, weight) = match item.split_once(':') {
            Some((id, w)) => {
                let weight: f64 = w
                    .trim()
                    .parse()
                    .map_err(|_| parse_err(line, format!("bad label weight {w:?}")))?;
                (id, weight)
            }
            None => (item, 1.0),
        };
        let id: u16 = id_text
            .trim()
            .parse()
            .map_err(|_| parse_err(line, format!("bad label id {id_text:?}")))?;
        if !(weight.is_finite() && weight >= 0.0) {
            return Err(parse_err(line, format!("label weight {weight} out of range")));
        }
        out.push((id, weight));
    }
    Ok(out)
}

/// A record before the class count is known: line number, codeword, and the
/// raw `(id, weight)` pairs.
type RawRecord = (usize, Codeword, Vec<(u16, f64)>);

/// Read a labeled dataset. The first record fixes the codeword width; the
/// class count is one past the largest label id seen (minimum 2).
pub fn read_labeled<R: BufRead>(reader: R) -> Result<LabeledDataset> {
    let mut raw: Vec<RawRecord> = Vec::new();
    let mut width: Option<u8> = None;
    let mut max_id: u16 = 0;

    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let trimmed = line.trim_end_matches(['\r', '\n']);
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (code_text, label_field) = split_line(trimmed);
        let code = Codeword::from_binary_str(code_text)
            .map_err(|e| parse_err(line_no, e.to_string()))?;
        match width {
            None => width = Some(code.width()),
            Some(w) if w != code.width() => {
                return Err(parse_err(
                    line_no,
                    format!("codeword width {} but dataset width {}", code.width(), w),
                ));
            }
            _ => {}
        }
        let field = label_field
            .filter(|f| !f.trim().is_empty())
            .ok_or_else(|| parse_err(line_no, "missing label field"))?;
        let labels = parse_label_field(field, line_no)?;
        max_id = labels.iter().map(|(id, _)| *id).fold(max_id, u16::max);
        raw.push((line_no, code, labels));
    }

    let width = width.ok_or_else(|| parse_err(0, "dataset contains no records"))?;
    let class_count = usize::from(max_id) + 1;
    let class_count = class_count.max(2);

    let mut records = Vec::with_capacity(raw.len());
    for (line_no, code, labels) in raw {
        let mut weights = vec![0.0f64; class_count];
        for (id, w) in labels {
            weights[usize::from(id)] += w;
        }
        let dist = LabelDistribution::from_weights(&weights)
            .map_err(|e| parse_err(line_no, e.to_string()))?;
        records.push((code, dist));
    }

    Ok(LabeledDataset {
        width,
        class_count,
        records,
    })
}

/// Read query codewords: one binary string per line, any label field after a
/// TAB is ignored.
pub fn read_queries<R: BufRead>(reader: R) -> Result<(u8, Vec<Codeword>)> {
    let mut width: Option<u8> = None;
    let mut codes = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let trimmed = line.trim_end_matches(['\r', '\n']);
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (code_text, _) = split_line(trimmed);
        let code = Codeword::from_binary_str(code_text)
            .map_err(|e| parse_err(line_no, e.to_string()))?;
        match width {
            None => width = Some(code.width()),
            Some(w) if w != code.width() => {
                return Err(parse_err(
                    line_no,
                    format!("codeword width {} but dataset width {}", code.width(), w),
                ));
            }
            _ => {}
        }
        codes.push(code);
    }
    let width = width.ok_or_else(|| parse_err(0, "input contains no codewords"))?;
    Ok((width, codes))
}

/// Render one record. Crisp distributions take the shorthand form.
pub fn format_record(code: Codeword, dist: &LabelDistribution) -> String {
    let probs = dist.probs();
    let positive: Vec<usize> = (0..probs.len()).filter(|&i| probs[i] > 0.0).collect();
    if positive.len() == 1 {
        return format!("{}\t{}", code.to_binary_string(), positive[0]);
    }
    let labels: Vec<String> = positive
        .iter()
        .map(|&i| format!("{i}:{}", probs[i]))
        .collect();
    format!("{}\t{}", code.to_binary_string(), labels.join(","))
}

pub fn write_labeled<W: Write>(
    mut writer: W,
    records: &[(Codeword, LabelDistribution)],
) -> Result<()> {
    for (code, dist) in records {
        writeln!(writer, "{}", format_record(*code, dist))?;
    }
    Ok(())
}
