use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How to interpret a label field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelKind {
    /// No label column.
    None,
    /// One class id per point.
    #[default]
    Class,
    /// `;`-separated tag ids per point.
    Tags,
}

impl FromStr for LabelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(LabelKind::None),
            "class" => Ok(LabelKind::Class),
            "tags" => Ok(LabelKind::Tags),
            _ => Err(Error::InvalidConfig(format!(
                "unknown label kind `{s}` (expected none, class or tags)"
            ))),
        }
    }
}

/// Per-point supervision. `None` classes and empty tag sets are unlabeled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Labels {
    Classes(Vec<Option<u32>>),
    /// Sorted, deduplicated tag ids.
    Tags(Vec<Vec<u32>>),
}

impl Labels {
    pub fn len(&self) -> usize {
        match self {
            Labels::Classes(c) => c.len(),
            Labels::Tags(t) => t.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> LabelKind {
        match self {
            Labels::Classes(_) => LabelKind::Class,
            Labels::Tags(_) => LabelKind::Tags,
        }
    }

    pub fn is_labeled(&self, i: usize) -> bool {
        match self {
            Labels::Classes(c) => c[i].is_some(),
            Labels::Tags(t) => !t[i].is_empty(),
        }
    }

    /// `+1` if point `i` here and point `j` of `other` share a class or tag,
    /// `-1` if both are labeled and share nothing, `0` otherwise.
    /// Mixing class and tag labels compares the class id as a one-tag set.
    pub fn similarity(&self, i: usize, other: &Labels, j: usize) -> i8 {
        match (self, other) {
            (Labels::Classes(a), Labels::Classes(b)) => match (a[i], b[j]) {
                (Some(x), Some(y)) => {
                    if x == y {
                        1
                    } else {
                        -1
                    }
                }
                _ => 0,
            },
            (Labels::Tags(a), Labels::Tags(b)) => tag_similarity(&a[i], &b[j]),
            (Labels::Classes(a), Labels::Tags(b)) => match a[i] {
                Some(x) => tag_similarity(&[x], &b[j]),
                None => 0,
            },
            (Labels::Tags(a), Labels::Classes(b)) => match b[j] {
                Some(y) => tag_similarity(&a[i], &[y]),
                None => 0,
            },
        }
    }

    /// Parses one label field.
    pub(crate) fn parse_field(kind: LabelKind, field: &str) -> std::result::Result<Label, String> {
        let field = field.trim();
        match kind {
            LabelKind::None => Ok(Label::Class(None)),
            LabelKind::Class => {
                if field.is_empty() {
                    Ok(Label::Class(None))
                } else {
                    parse_id(field).map(|c| Label::Class(Some(c)))
                }
            }
            LabelKind::Tags => {
                let mut tags = field
                    .split(';')
                    .map(str::trim)
                    .filter(|t| !t.is_empty())
                    .map(parse_id)
                    .collect::<std::result::Result<Vec<_>, _>>()?;
                tags.sort_unstable();
                tags.dedup();
                Ok(Label::Tags(tags))
            }
        }
    }

    pub(crate) fn collect(kind: LabelKind, items: Vec<Label>) -> Option<Labels> {
        match kind {
            LabelKind::None => None,
            LabelKind::Class => Some(Labels::Classes(
                items
                    .into_iter()
                    .map(|l| match l {
                        Label::Class(c) => c,
                        Label::Tags(_) => unreachable!("class parse yields classes"),
                    })
                    .collect(),
            )),
            LabelKind::Tags => Some(Labels::Tags(
                items
                    .into_iter()
                    .map(|l| match l {
                        Label::Tags(t) => t,
                        Label::Class(_) => unreachable!("tag parse yields tags"),
                    })
                    .collect(),
            )),
        }
    }

    pub(crate) fn format_entry(&self, i: usize) -> String {
        match self {
            Labels::Classes(c) => c[i].map(|x| x.to_string()).unwrap_or_default(),
            Labels::Tags(t) => t[i]
                .iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(";"),
        }
    }
}

pub(crate) enum Label {
    Class(Option<u32>),
    Tags(Vec<u32>),
}

fn parse_id(s: &str) -> std::result::Result<u32, String> {
    s.parse::<u32>()
        .map_err(|_| format!("label `{s}` is not a non-negative integer id"))
}

/// Both slices sorted.
fn tag_similarity(a: &[u32], b: &[u32]) -> i8 {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let (mut x, mut y) = (0, 0);
    while x < a.len() && y < b.len() {
        match a[x].cmp(&b[y]) {
            std::cmp::Ordering::Equal => return 1,
            std::cmp::Ordering::Less => x += 1,
            std::cmp::Ordering::Greater => y += 1,
        }
    }
    -1
}

/// Reads a label file, one line per point.
pub fn read_labels(path: &Path, kind: LabelKind) -> Result<Labels> {
    if kind == LabelKind::None {
        return Err(Error::InvalidConfig(
            "label kind `none` has no label file".into(),
        ));
    }
    let text = fs::read_to_string(path)?;
    let mut items = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let item = Labels::parse_field(kind, line)
            .map_err(|e| Error::format(path, format!("line {}: {e}", lineno + 1)))?;
        items.push(item);
    }
    Ok(Labels::collect(kind, items).expect("kind is not none"))
}

pub fn write_labels(path: &Path, labels: &Labels) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for i in 0..labels.len() {
        writeln!(w, "{}", labels.format_entry(i))?;
    }
    w.flush()?;
    Ok(())
}
