//! Line-oriented text model files.
//!
//! ```text
//! rankforge-model v1
//! feature_count=20
//! tree_count=2
//! objective=yetirank
//! tree 1
//! split 3 0.4375
//! leaves -0.01 0.02
//! tree 1
//! split 0 inf
//! leaves 0 0
//! ```
//!
//! Tree scales are folded into the leaf values on save. Reals use Rust's
//! shortest round-trip formatting, so a loaded model predicts bit-identically.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::tree::{ObliviousTree, Split, MAX_DEPTH};
use super::ObliviousEnsemble;

/// Model format version written by this build.
pub const FORMAT_VERSION: &str = "v1";
const MAGIC: &str = "rankforge-model";

fn check_metadata(model: &ObliviousEnsemble) -> Result<()> {
    for (k, v) in model.metadata() {
        let bad_key = k.is_empty() || k.contains(|c: char| c == '=' || c.is_whitespace());
        if bad_key || v.contains(['\n', '\r']) || k == "feature_count" || k == "tree_count" {
            return Err(Error::contract(format!("metadata entry {k:?}={v:?} cannot be stored")));
        }
    }
    Ok(())
}

fn render(model: &ObliviousEnsemble) -> String {
    let mut baked = model.clone();
    baked.bake_scales();
    let mut s = String::new();
    let _ = writeln!(s, "{MAGIC} {FORMAT_VERSION}");
    let _ = writeln!(s, "feature_count={}", baked.feature_count());
    let _ = writeln!(s, "tree_count={}", baked.len());
    for (k, v) in baked.metadata() {
        let _ = writeln!(s, "{k}={v}");
    }
    for tree in baked.trees() {
        let _ = writeln!(s, "tree {}", tree.depth());
        for split in tree.splits() {
            let _ = writeln!(s, "split {} {}", split.feature, split.border);
        }
        s.push_str("leaves");
        for v in tree.leaf_values() {
            let _ = write!(s, " {v}");
        }
        s.push('\n');
    }
    s
}

/// Writes a model in text form.
pub fn write_model<W: Write>(model: &ObliviousEnsemble, mut out: W) -> Result<()> {
    check_metadata(model)?;
    out.write_all(render(model).as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| Error::io("<stream>", e))
}

/// Saves a model to `path`.
pub fn save_model(model: &ObliviousEnsemble, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    check_metadata(model)?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    out.write_all(render(model).as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}

/// Loads a model saved by [`save_model`].
pub fn load_model(path: impl AsRef<Path>) -> Result<ObliviousEnsemble> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_model(BufReader::new(file))
}

fn number<T: std::str::FromStr>(token: Option<&str>, line: usize, what: &str) -> Result<T> {
    let token = token.ok_or_else(|| Error::parse(line, format!("missing {what}")))?;
    token
        .parse()
        .map_err(|_| Error::parse(line, format!("bad {what} {token:?}")))
}

/// Parses a model from text.
pub fn parse_model<R: BufRead>(reader: R) -> Result<ObliviousEnsemble> {
    let mut lines = reader.lines().enumerate().map(|(i, l)| {
        l.map(|l| (i + 1, l))
            .map_err(|e| Error::parse(i + 1, format!("unreadable line: {e}")))
    });
    let (_, header) = lines.next().transpose()?.ok_or_else(|| Error::parse(1, "empty model file"))?;
    match header.trim_end().split_once(' ') {
        Some((MAGIC, FORMAT_VERSION)) => {}
        Some((MAGIC, found)) => {
            return Err(Error::Version {
                found: found.to_string(),
                expected: FORMAT_VERSION.to_string(),
            })
        }
        _ => return Err(Error::parse(1, format!("expected header \"{MAGIC} {FORMAT_VERSION}\""))),
    }

    let mut feature_count: Option<usize> = None;
    let mut tree_count: Option<usize> = None;
    let mut metadata = Vec::new();
    let mut trees: Vec<ObliviousTree> = Vec::new();
    let mut last_line = 1;
    // Tree currently being read: depth, splits so far, line of its header.
    let mut open: Option<(usize, Vec<Split>, usize)> = None;

    for item in lines {
        let (no, raw) = item?;
        last_line = no;
        let line = raw.trim_end();
        if line.is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let head = tokens.next().unwrap_or_default();
        match (head, open.as_mut()) {
            ("tree", None) => {
                if feature_count.is_none() || tree_count.is_none() {
                    return Err(Error::parse(no, "feature_count and tree_count must precede the trees"));
                }
                let depth: usize = number(tokens.next(), no, "tree depth")?;
                if depth > MAX_DEPTH {
                    return Err(Error::parse(no, format!("tree depth {depth} exceeds {MAX_DEPTH}")));
                }
                open = Some((depth, Vec::with_capacity(depth), no));
            }
            ("split", Some((depth, splits, _))) if splits.len() < *depth => {
                let feature: usize = number(tokens.next(), no, "split feature")?;
                let border: f64 = number(tokens.next(), no, "split border")?;
                let split = Split { feature, border };
                if !split.is_null() && (!border.is_finite() || feature >= feature_count.unwrap_or(0)) {
                    return Err(Error::parse(no, format!("invalid split {feature} {border}")));
                }
                splits.push(split);
            }
            ("leaves", Some((depth, splits, _))) if splits.len() == *depth => {
                let values = tokens
                    .map(|t| number::<f64>(Some(t), no, "leaf value"))
                    .collect::<Result<Vec<_>>>()?;
                let tree = ObliviousTree::new(std::mem::take(splits), values)
                    .map_err(|e| Error::parse(no, e.to_string()))?;
                trees.push(tree);
                open = None;
            }
            (_, None) if trees.is_empty() && line.contains('=') => {
                let (k, v) = line.split_once('=').unwrap_or_default();
                match k {
                    "feature_count" => feature_count = Some(number(Some(v), no, "feature_count")?),
                    "tree_count" => tree_count = Some(number(Some(v), no, "tree_count")?),
                    _ => metadata.push((k.to_string(), v.to_string())),
                }
            }
            _ => return Err(Error::parse(no, format!("unexpected line {line:?}"))),
        }
    }
    if let Some((_, _, start)) = open {
        return Err(Error::parse(last_line + 1, format!("tree starting at line {start} is incomplete")));
    }
    let (Some(feature_count), Some(tree_count)) = (feature_count, tree_count) else {
        return Err(Error::parse(last_line + 1, "missing feature_count or tree_count"));
    };
    if trees.len() != tree_count {
        return Err(Error::parse(
            last_line + 1,
            format!("expected {tree_count} trees, found {}", trees.len()),
        ));
    }
    let mut model = ObliviousEnsemble::empty(feature_count);
    for tree in trees {
        model.push(tree)?;
    }
    for (k, v) in metadata {
        model.set_metadata(k, v);
    }
    Ok(model)
}
