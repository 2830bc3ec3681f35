//! The LETOR / SVMlight-with-qid text format.
//!
//! ```text
//! <label> qid:<id> <index>:<value> ... # optional comment
//! ```
//!
//! Feature indices are 1-based and unlisted features are zero. Lines of the
//! same query need not be contiguous; groups keep the order in which their
//! query id first appears.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::ranking::{Dataset, QueryGroup};

struct PendingGroup {
    id: String,
    labels: Vec<f64>,
    rows: Vec<Vec<(usize, f64)>>,
}

fn parse_line(line: &str, number: usize) -> Result<Option<(f64, String, Vec<(usize, f64)>)>> {
    let data = line.split('#').next().unwrap_or("").trim();
    if data.is_empty() {
        return Ok(None);
    }
    let mut tokens = data.split_whitespace();
    let label_token = tokens.next().unwrap_or_default();
    let label: f64 = label_token
        .parse()
        .map_err(|_| Error::parse(number, format!("label {label_token:?} is not a number")))?;
    if !(0.0..=4.0).contains(&label) {
        return Err(Error::parse(number, format!("label {label} outside [0, 4]")));
    }
    let qid = match tokens.next().and_then(|t| t.strip_prefix("qid:")) {
        Some(id) if !id.is_empty() => id.to_string(),
        _ => return Err(Error::parse(number, "expected qid:<id> after the label")),
    };
    let mut features: Vec<(usize, f64)> = Vec::new();
    for token in tokens {
        let bad = || Error::parse(number, format!("malformed feature {token:?}"));
        let (index, value) = token.split_once(':').ok_or_else(bad)?;
        let index: usize = index.parse().map_err(|_| bad())?;
        let value: f64 = value.parse().map_err(|_| bad())?;
        if index == 0 {
            return Err(Error::parse(number, "feature indices start at 1"));
        }
        if !value.is_finite() {
            return Err(Error::parse(number, format!("feature {index} is not finite")));
        }
        if features.iter().any(|&(i, _)| i == index) {
            return Err(Error::parse(number, format!("feature {index} listed twice")));
        }
        features.push((index, value));
    }
    Ok(Some((label, qid, features)))
}

/// Parses LETOR text. The feature count is the largest index seen.
pub fn parse_letor<R: BufRead>(reader: R) -> Result<Dataset> {
    let mut groups: Vec<PendingGroup> = Vec::new();
    let mut by_id: HashMap<String, usize> = HashMap::new();
    let mut feature_count = 0;
    for (idx, line) in reader.lines().enumerate() {
        let number = idx + 1;
        let line = line.map_err(|e| Error::parse(number, format!("unreadable line: {e}")))?;
        let Some((label, qid, features)) = parse_line(&line, number)? else {
            continue;
        };
        feature_count = features.iter().map(|&(i, _)| i).fold(feature_count, usize::max);
        let slot = *by_id.entry(qid.clone()).or_insert_with(|| {
            groups.push(PendingGroup {
                id: qid,
                labels: Vec::new(),
                rows: Vec::new(),
            });
            groups.len() - 1
        });
        groups[slot].labels.push(label);
        groups[slot].rows.push(features);
    }
    if groups.is_empty() {
        return Err(Error::contract("LETOR input contains no documents"));
    }
    let groups = groups
        .into_iter()
        .map(|g| {
            let mut dense = vec![0.0; g.labels.len() * feature_count];
            for (row, sparse) in g.rows.iter().enumerate() {
                for &(index, value) in sparse {
                    dense[row * feature_count + index - 1] = value;
                }
            }
            QueryGroup::new(g.id, feature_count, dense, g.labels)
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(groups)
}

/// Reads and parses a LETOR file.
pub fn read_letor(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_letor(BufReader::new(file))
}

/// Writes LETOR text. Zero features are omitted except the last one, which is
/// always written so the feature count survives a round trip.
pub fn write_letor<W: Write>(dataset: &Dataset, mut out: W) -> std::io::Result<()> {
    let f = dataset.feature_count();
    for group in dataset.groups() {
        for (row, label) in group.rows().zip(group.labels()) {
            write!(out, "{label} qid:{}", group.query_id())?;
            for (i, &v) in row.iter().enumerate() {
                if v != 0.0 || i + 1 == f {
                    write!(out, " {}:{v}", i + 1)?;
                }
            }
            writeln!(out)?;
        }
    }
    out.flush()
}

/// Writes a dataset to a LETOR file.
pub fn save_letor(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if let Some(g) = dataset
        .groups()
        .iter()
        .find(|g| g.query_id().is_empty() || g.query_id().contains(|c: char| c.is_whitespace() || c == '#'))
    {
        return Err(Error::contract(format!("query id {:?} cannot be written as LETOR", g.query_id())));
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_letor(dataset, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}
