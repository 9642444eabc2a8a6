//! CSV ingestion of approvals, groups, external scores and comment text.
//!
//! Users and items are identified by string labels in the files. When every
//! label of a kind is a non-negative integer the labels are used directly as
//! indices (so `0..=max` are all present, absent pairs meaning "no
//! approval"); otherwise labels get indices in order of first appearance.
//! This adapter boundary is the only place that knows about file layouts.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::Read;
use std::path::Path;

use jrank::model::{threshold_probabilistic_approvals, GroupPartition, Instance};
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Open {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("user {user} and item {item} appear in more than one row")]
    DuplicatePair { user: String, item: String },
    #[error("value {value} for user {user}, item {item} is not 0 or 1 (use probability mode)")]
    MixedMode {
        user: String,
        item: String,
        value: f64,
    },
    #[error("user {0} has no group")]
    MissingUser(String),
    #[error("user {0} is listed in more than one group")]
    DuplicateUser(String),
    #[error("item {item} has negative or non-finite score {score}")]
    NegativeScore { item: String, score: f64 },
    #[error(transparent)]
    Model(#[from] jrank::Error),
}

impl From<csv::Error> for IoError {
    fn from(e: csv::Error) -> Self {
        IoError::Parse(e.to_string())
    }
}

pub type Result<T, E = IoError> = std::result::Result<T, E>;

/// How approval values are read.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ApprovalMode {
    /// Values must be exactly 0 or 1.
    Binary,
    /// Values are probabilities in `[0, 1]`, approved when above `cutoff`.
    Probability { cutoff: f64 },
}

/// Bidirectional map between file labels and dense indices.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IdMap {
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl IdMap {
    /// Builds from labels in order of appearance; see the module docs.
    pub fn from_labels<'a, I>(labels: I) -> Self
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut seen: Vec<String> = Vec::new();
        let mut set = BTreeSet::new();
        for label in labels {
            if set.insert(label.to_string()) {
                seen.push(label.to_string());
            }
        }
        let numeric: Option<Vec<usize>> = seen.iter().map(|l| l.parse().ok()).collect();
        match numeric {
            Some(values) if !values.is_empty() => {
                let max = values.into_iter().max().unwrap_or(0);
                Self::numeric(max + 1)
            }
            _ => {
                let index = seen
                    .iter()
                    .enumerate()
                    .map(|(i, l)| (l.clone(), i))
                    .collect();
                Self {
                    labels: seen,
                    index,
                }
            }
        }
    }

    /// Labels `"0"..` up to `len`.
    pub fn numeric(len: usize) -> Self {
        let labels: Vec<String> = (0..len).map(|i| i.to_string()).collect();
        let index = labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.clone(), i))
            .collect();
        Self { labels, index }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, label: &str) -> Option<usize> {
        let label = label.trim();
        self.index.get(label).copied().or_else(|| {
            // Integer labels such as "07" are stored in canonical form.
            let canonical = label.parse::<usize>().ok()?.to_string();
            self.index.get(&canonical).copied()
        })
    }

    pub fn label(&self, index: usize) -> &str {
        &self.labels[index]
    }

    /// Resolves a list of labels, failing on the first unknown one.
    pub fn resolve<'a, I>(&self, labels: I) -> Result<Vec<usize>>
    where
        I: IntoIterator<Item = &'a str>,
    {
        labels
            .into_iter()
            .map(|l| {
                self.get(l)
                    .ok_or_else(|| IoError::Parse(format!("unknown item '{}'", l.trim())))
            })
            .collect()
    }
}

#[derive(Debug, Deserialize)]
struct ApprovalRow {
    user_id: String,
    item_id: String,
    value: f64,
}

#[derive(Debug, Deserialize)]
struct GroupRow {
    user_id: String,
    group_id: String,
}

#[derive(Debug, Deserialize)]
struct ScoreRow {
    item_id: String,
    score: f64,
}

#[derive(Debug, Deserialize)]
struct CommentRow {
    item_id: String,
    text: String,
}

fn open(path: &Path) -> Result<String> {
    let mut text = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|source| IoError::Open {
            path: path.display().to_string(),
            source,
        })?;
    Ok(text)
}

fn rows<T: for<'de> Deserialize<'de>>(text: &str) -> Result<Vec<T>> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
        .deserialize()
        .map(|r| r.map_err(IoError::from))
        .collect()
}

/// Approval rows as read from a file, before user and item indices are fixed.
#[derive(Debug, Clone)]
pub struct ApprovalTable {
    rows: Vec<(String, String, f64)>,
}

impl ApprovalTable {
    pub fn parse(text: &str, mode: ApprovalMode) -> Result<Self> {
        let raw: Vec<ApprovalRow> = rows(text)?;
        if raw.is_empty() {
            return Err(IoError::Parse("no users".into()));
        }
        let mut seen = BTreeSet::new();
        let mut out = Vec::with_capacity(raw.len());
        for row in raw {
            if !seen.insert((row.user_id.clone(), row.item_id.clone())) {
                return Err(IoError::DuplicatePair {
                    user: row.user_id,
                    item: row.item_id,
                });
            }
            match mode {
                ApprovalMode::Binary if row.value != 0.0 && row.value != 1.0 => {
                    return Err(IoError::MixedMode {
                        user: row.user_id,
                        item: row.item_id,
                        value: row.value,
                    });
                }
                _ => {}
            }
            out.push((row.user_id, row.item_id, row.value));
        }
        Ok(Self { rows: out })
    }

    pub fn read(path: &Path, mode: ApprovalMode) -> Result<Self> {
        Self::parse(&open(path)?, mode)
    }

    pub fn user_labels(&self) -> impl Iterator<Item = &str> {
        self.rows.iter().map(|r| r.0.as_str())
    }

    pub fn item_labels(&self) -> impl Iterator<Item = &str> {
        self.rows.iter().map(|r| r.1.as_str())
    }

    /// Dense approval sets over the given index maps.
    pub fn approval_sets(
        &self,
        users: &IdMap,
        items: &IdMap,
        mode: ApprovalMode,
    ) -> Result<Vec<Vec<usize>>> {
        let mut probs = vec![vec![0.0; items.len()]; users.len()];
        for (user, item, value) in &self.rows {
            let u = users.get(user).expect("user map covers the table");
            let i = items.get(item).expect("item map covers the table");
            probs[u][i] = *value;
        }
        let cutoff = match mode {
            ApprovalMode::Binary => 0.5,
            ApprovalMode::Probability { cutoff } => cutoff,
        };
        Ok(threshold_probabilistic_approvals(&probs, cutoff)?)
    }
}

/// `user_id,group_id` rows.
#[derive(Debug, Clone)]
pub struct GroupTable {
    rows: Vec<(String, String)>,
}

impl GroupTable {
    pub fn parse(text: &str) -> Result<Self> {
        let raw: Vec<GroupRow> = rows(text)?;
        let mut seen = BTreeSet::new();
        for row in &raw {
            if !seen.insert(row.user_id.clone()) {
                return Err(IoError::DuplicateUser(row.user_id.clone()));
            }
        }
        Ok(Self {
            rows: raw.into_iter().map(|r| (r.user_id, r.group_id)).collect(),
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&open(path)?)
    }

    pub fn user_labels(&self) -> impl Iterator<Item = &str> {
        self.rows.iter().map(|r| r.0.as_str())
    }

    /// Partition over `users`. Group labels are sorted (numerically when
    /// they are all integers) and numbered from 0.
    pub fn partition(&self, users: &IdMap) -> Result<GroupPartition> {
        let numeric: Option<Vec<usize>> = self.rows.iter().map(|r| r.1.parse().ok()).collect();
        // Each row's group as a sortable key; integers sort numerically.
        let keys: Vec<(usize, String)> = match numeric {
            Some(values) => values.into_iter().map(|v| (v, String::new())).collect(),
            None => self.rows.iter().map(|r| (0, r.1.clone())).collect(),
        };
        let order: BTreeSet<&(usize, String)> = keys.iter().collect();
        let block: HashMap<&(usize, String), usize> = order
            .into_iter()
            .enumerate()
            .map(|(i, key)| (key, i))
            .collect();
        let mut assignment = vec![None; users.len()];
        for ((user, _), key) in self.rows.iter().zip(&keys) {
            let u = users
                .get(user)
                .ok_or_else(|| IoError::Parse(format!("group file names unknown user '{user}'")))?;
            assignment[u] = Some(block[key]);
        }
        let assignment = assignment
            .into_iter()
            .enumerate()
            .map(|(u, g)| g.ok_or_else(|| IoError::MissingUser(users.label(u).to_string())))
            .collect::<Result<Vec<_>>>()?;
        Ok(GroupPartition::from_assignment(assignment)?)
    }
}

/// `item_id,score` rows.
#[derive(Debug, Clone)]
pub struct ScoreTable {
    rows: Vec<(String, f64)>,
}

impl ScoreTable {
    pub fn parse(text: &str) -> Result<Self> {
        let raw: Vec<ScoreRow> = rows(text)?;
        let mut seen = BTreeSet::new();
        for row in &raw {
            if !(row.score.is_finite() && row.score >= 0.0) {
                return Err(IoError::NegativeScore {
                    item: row.item_id.clone(),
                    score: row.score,
                });
            }
            if !seen.insert(row.item_id.clone()) {
                return Err(IoError::Parse(format!(
                    "item {} is scored twice",
                    row.item_id
                )));
            }
        }
        Ok(Self {
            rows: raw.into_iter().map(|r| (r.item_id, r.score)).collect(),
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&open(path)?)
    }

    pub fn item_labels(&self) -> impl Iterator<Item = &str> {
        self.rows.iter().map(|r| r.0.as_str())
    }

    /// Scores indexed by `items`; items without a row are `None`.
    pub fn by_index(&self, items: &IdMap) -> Vec<Option<f64>> {
        let mut out = vec![None; items.len()];
        for (item, score) in &self.rows {
            if let Some(i) = items.get(item) {
                out[i] = Some(*score);
            }
        }
        out
    }
}

/// Item ids to keep after dropping empty and duplicate comments.
///
/// Text is compared exactly after trimming surrounding whitespace; the first
/// occurrence of each text wins.
pub fn dedup_comments(comments: &[(String, String)]) -> Vec<String> {
    let mut seen = BTreeSet::new();
    comments
        .iter()
        .filter(|(_, text)| {
            let text = text.trim();
            !text.is_empty() && seen.insert(text.to_string())
        })
        .map(|(id, _)| id.clone())
        .collect()
}

pub fn parse_comments_csv(text: &str) -> Result<Vec<(String, String)>> {
    let raw: Vec<CommentRow> = csv::ReaderBuilder::new()
        .from_reader(text.as_bytes())
        .deserialize()
        .collect::<std::result::Result<_, _>>()?;
    Ok(raw
        .into_iter()
        .map(|r| (r.item_id.trim().to_string(), r.text))
        .collect())
}

/// An instance together with the labels its indices came from.
#[derive(Debug, Clone)]
pub struct LoadedInstance {
    pub instance: Instance,
    pub users: IdMap,
    pub items: IdMap,
}

impl LoadedInstance {
    /// Wraps an instance whose labels are its indices.
    pub fn indexed(instance: Instance) -> Self {
        Self {
            users: IdMap::numeric(instance.n()),
            items: IdMap::numeric(instance.m()),
            instance,
        }
    }

    pub fn item_labels(&self, items: &[usize]) -> Vec<String> {
        items
            .iter()
            .map(|&i| self.items.label(i).to_string())
            .collect()
    }
}

/// Inputs for assembling an instance from CSV tables.
#[derive(Debug, Clone)]
pub struct CsvSources<'a> {
    pub approvals: &'a ApprovalTable,
    pub mode: ApprovalMode,
    pub groups: Option<&'a GroupTable>,
    pub scores: Option<&'a ScoreTable>,
    /// When present, only these item labels are kept (after comment filtering).
    pub keep_items: Option<&'a [String]>,
    pub k: usize,
}

/// Assembles and validates an instance from parsed CSV tables.
///
/// The item universe is every item named by the approvals or scores file,
/// and the user universe every user named by the approvals or groups file.
pub fn assemble(src: &CsvSources<'_>) -> Result<LoadedInstance> {
    let users = IdMap::from_labels(
        src.approvals
            .user_labels()
            .chain(src.groups.into_iter().flat_map(|g| g.user_labels())),
    );
    let all_items = IdMap::from_labels(
        src.approvals
            .item_labels()
            .chain(src.scores.into_iter().flat_map(|s| s.item_labels())),
    );
    let sets = src.approvals.approval_sets(&users, &all_items, src.mode)?;
    let groups = src.groups.map(|g| g.partition(&users)).transpose()?;
    let mut scores = src.scores.map(|s| s.by_index(&all_items));

    let (items, sets) = match src.keep_items {
        None => (all_items, sets),
        Some(keep) => {
            let kept: Vec<usize> = (0..all_items.len())
                .filter(|&i| keep.iter().any(|k| k == all_items.label(i)))
                .collect();
            let remap: HashMap<usize, usize> = kept
                .iter()
                .enumerate()
                .map(|(new, &old)| (old, new))
                .collect();
            let sets = sets
                .iter()
                .map(|set| set.iter().filter_map(|i| remap.get(i).copied()).collect())
                .collect();
            scores = scores.map(|s| kept.iter().map(|&i| s[i]).collect());
            let labels: Vec<&str> = kept.iter().map(|&i| all_items.label(i)).collect();
            let items = IdMap {
                index: labels
                    .iter()
                    .enumerate()
                    .map(|(i, l)| (l.to_string(), i))
                    .collect(),
                labels: labels.into_iter().map(String::from).collect(),
            };
            (items, sets)
        }
    };

    let external = scores
        .map(|s| {
            s.iter()
                .enumerate()
                .map(|(i, v)| {
                    v.ok_or_else(|| IoError::Parse(format!("item {} has no score", items.label(i))))
                })
                .collect::<Result<Vec<f64>>>()
        })
        .transpose()?;
    let instance = jrank::build_instance(users.len(), items.len(), src.k, &sets, groups, external)?;
    Ok(LoadedInstance {
        instance,
        users,
        items,
    })
}

/// Dense `user_id,item_id,value` CSV for an instance, one row per pair.
pub fn approvals_csv(instance: &Instance) -> String {
    let mut out = String::from("user_id,item_id,value\n");
    for u in 0..instance.n() {
        for i in 0..instance.m() {
            let v = u8::from(instance.profile().approves(u, i));
            out.push_str(&format!("{u},{i},{v}\n"));
        }
    }
    out
}

pub fn groups_csv(groups: &GroupPartition) -> String {
    let mut out = String::from("user_id,group_id\n");
    for (u, g) in groups.assignment().iter().enumerate() {
        out.push_str(&format!("{u},{g}\n"));
    }
    out
}

pub fn scores_csv(scores: &[f64]) -> String {
    let mut out = String::from("item_id,score\n");
    for (i, s) in scores.iter().enumerate() {
        out.push_str(&format!("{i},{}\n", jrank::format_sig(*s)));
    }
    out
}
