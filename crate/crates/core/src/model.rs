//! Approval profiles, group partitions, instances and committees.
//!
//! Items and users are 0-indexed. Approval sets are stored twice as
//! fixed-width bitsets: per user over items (ballots) and per item over
//! users (approvers), so both directions of a membership query are cheap.

use std::fmt;

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scoring::Score;

/// A set of items drawn from `0..m`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct ItemSet {
    bits: FixedBitSet,
}

impl ItemSet {
    pub fn empty(m: usize) -> Self {
        Self {
            bits: FixedBitSet::with_capacity(m),
        }
    }

    pub fn full(m: usize) -> Self {
        let mut bits = FixedBitSet::with_capacity(m);
        bits.insert_range(..);
        Self { bits }
    }

    pub fn from_items<I>(m: usize, items: I) -> Result<Self>
    where
        I: IntoIterator<Item = usize>,
    {
        let mut set = Self::empty(m);
        for item in items {
            if item >= m {
                return Err(Error::IndexOutOfRange { item, m });
            }
            set.bits.insert(item);
        }
        Ok(set)
    }

    /// Width of the universe this set lives in.
    pub fn universe(&self) -> usize {
        self.bits.len()
    }

    pub fn len(&self) -> usize {
        self.bits.count_ones(..)
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_clear()
    }

    pub fn contains(&self, item: usize) -> bool {
        self.bits.contains(item)
    }

    pub fn insert(&mut self, item: usize) {
        self.bits.insert(item);
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.ones()
    }

    pub fn to_vec(&self) -> Vec<usize> {
        self.bits.ones().collect()
    }

    pub fn is_subset(&self, other: &ItemSet) -> bool {
        self.bits.is_subset(&other.bits)
    }

    pub(crate) fn bits(&self) -> &FixedBitSet {
        &self.bits
    }
}

impl fmt::Debug for ItemSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.bits.ones()).finish()
    }
}

/// Per-user approval sets over `m` items.
#[derive(Clone, PartialEq, Eq)]
pub struct ApprovalProfile {
    m: usize,
    ballots: Vec<FixedBitSet>,
    approvers: Vec<FixedBitSet>,
}

impl ApprovalProfile {
    pub fn new<S>(m: usize, approvals: &[S]) -> Result<Self>
    where
        S: AsRef<[usize]>,
    {
        let n = approvals.len();
        if n == 0 || m == 0 {
            return Err(Error::EmptyProfile { n, m });
        }
        let mut ballots = Vec::with_capacity(n);
        let mut approvers = vec![FixedBitSet::with_capacity(n); m];
        for (user, set) in approvals.iter().enumerate() {
            let mut ballot = FixedBitSet::with_capacity(m);
            for &item in set.as_ref() {
                if item >= m {
                    return Err(Error::IndexOutOfRange { item, m });
                }
                ballot.insert(item);
                approvers[item].insert(user);
            }
            ballots.push(ballot);
        }
        Ok(Self {
            m,
            ballots,
            approvers,
        })
    }

    pub fn n(&self) -> usize {
        self.ballots.len()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn approves(&self, user: usize, item: usize) -> bool {
        self.ballots[user].contains(item)
    }

    /// Items approved by `user`, as a bitset of width `m`.
    pub fn ballot(&self, user: usize) -> &FixedBitSet {
        &self.ballots[user]
    }

    /// Users approving `item`, as a bitset of width `n`.
    pub fn approvers(&self, item: usize) -> &FixedBitSet {
        &self.approvers[item]
    }

    pub fn approval_count(&self, item: usize) -> usize {
        self.approvers[item].count_ones(..)
    }

    pub fn approval_set(&self, user: usize) -> Vec<usize> {
        self.ballots[user].ones().collect()
    }

    pub fn approval_sets(&self) -> Vec<Vec<usize>> {
        (0..self.n()).map(|u| self.approval_set(u)).collect()
    }

    /// Users whose ballot shares no item with `set`.
    pub fn unrepresented(&self, set: &ItemSet) -> FixedBitSet {
        let mut out = FixedBitSet::with_capacity(self.n());
        for (user, ballot) in self.ballots.iter().enumerate() {
            if ballot.is_disjoint(set.bits()) {
                out.insert(user);
            }
        }
        out
    }

    /// Keeps only the listed items, renumbered in the given order.
    pub fn restrict_items(&self, kept: &[usize]) -> Result<Self> {
        for &item in kept {
            if item >= self.m {
                return Err(Error::IndexOutOfRange { item, m: self.m });
            }
        }
        let approvals: Vec<Vec<usize>> = self
            .ballots
            .iter()
            .map(|ballot| {
                kept.iter()
                    .enumerate()
                    .filter(|(_, &old)| ballot.contains(old))
                    .map(|(new, _)| new)
                    .collect()
            })
            .collect();
        Self::new(kept.len(), &approvals)
    }
}

impl fmt::Debug for ApprovalProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ApprovalProfile")
            .field("n", &self.n())
            .field("m", &self.m)
            .field("approvals", &self.approval_sets())
            .finish()
    }
}

/// Partition of users `0..n` into `gamma` disjoint non-empty blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupPartition {
    assignment: Vec<usize>,
    sizes: Vec<usize>,
}

impl GroupPartition {
    /// `assignment[u]` is the block of user `u`; block labels must cover `0..gamma`.
    pub fn from_assignment(assignment: Vec<usize>) -> Result<Self> {
        if assignment.is_empty() {
            return Err(Error::BadPartition("no users".into()));
        }
        let gamma = assignment.iter().max().map_or(0, |g| g + 1);
        let mut sizes = vec![0usize; gamma];
        for &g in &assignment {
            sizes[g] += 1;
        }
        if let Some(g) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::BadPartition(format!("block {g} is empty")));
        }
        Ok(Self { assignment, sizes })
    }

    /// Builds from explicit blocks; every user in `0..n` must appear exactly once.
    pub fn from_blocks<B>(n: usize, blocks: &[B]) -> Result<Self>
    where
        B: AsRef<[usize]>,
    {
        let mut assignment = vec![usize::MAX; n];
        for (g, block) in blocks.iter().enumerate() {
            if block.as_ref().is_empty() {
                return Err(Error::BadPartition(format!("block {g} is empty")));
            }
            for &user in block.as_ref() {
                if user >= n {
                    return Err(Error::UserOutOfRange { user, n });
                }
                if assignment[user] != usize::MAX {
                    return Err(Error::BadPartition(format!(
                        "user {user} is in blocks {} and {g}",
                        assignment[user]
                    )));
                }
                assignment[user] = g;
            }
        }
        if let Some(user) = assignment.iter().position(|&g| g == usize::MAX) {
            return Err(Error::BadPartition(format!("user {user} is in no block")));
        }
        Self::from_assignment(assignment)
    }

    pub fn gamma(&self) -> usize {
        self.sizes.len()
    }

    pub fn n(&self) -> usize {
        self.assignment.len()
    }

    pub fn block_of(&self, user: usize) -> usize {
        self.assignment[user]
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn members(&self, block: usize) -> Vec<usize> {
        self.assignment
            .iter()
            .enumerate()
            .filter(|(_, &g)| g == block)
            .map(|(u, _)| u)
            .collect()
    }

    pub fn blocks(&self) -> Vec<Vec<usize>> {
        (0..self.gamma()).map(|g| self.members(g)).collect()
    }
}

/// A selection problem: profile, committee size, and optional groups and
/// external item scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InstanceRecord", into = "InstanceRecord")]
pub struct Instance {
    profile: ApprovalProfile,
    k: usize,
    groups: Option<GroupPartition>,
    external_scores: Option<Vec<f64>>,
}

/// Validated constructor for [`Instance`].
pub fn build_instance<S>(
    n: usize,
    m: usize,
    k: usize,
    approvals: &[S],
    groups: Option<GroupPartition>,
    external_scores: Option<Vec<f64>>,
) -> Result<Instance>
where
    S: AsRef<[usize]>,
{
    if approvals.len() != n {
        return Err(Error::BadParams(format!(
            "expected {n} approval sets, got {}",
            approvals.len()
        )));
    }
    let profile = ApprovalProfile::new(m, approvals)?;
    Instance::new(profile, k, groups, external_scores)
}

impl Instance {
    pub fn new(
        profile: ApprovalProfile,
        k: usize,
        groups: Option<GroupPartition>,
        external_scores: Option<Vec<f64>>,
    ) -> Result<Self> {
        let (n, m) = (profile.n(), profile.m());
        if k == 0 || k > m {
            return Err(Error::BadK { k, m });
        }
        if let Some(groups) = &groups {
            if groups.n() != n {
                return Err(Error::BadPartition(format!(
                    "partition covers {} users, profile has {n}",
                    groups.n()
                )));
            }
        }
        if let Some(scores) = &external_scores {
            if scores.len() != m {
                return Err(Error::IncompleteScores {
                    expected: m,
                    got: scores.len(),
                });
            }
            if let Some((item, &score)) = scores
                .iter()
                .enumerate()
                .find(|(_, s)| !(s.is_finite() && **s >= 0.0))
            {
                return Err(Error::NegativeScore { item, score });
            }
        }
        Ok(Self {
            profile,
            k,
            groups,
            external_scores,
        })
    }

    pub fn profile(&self) -> &ApprovalProfile {
        &self.profile
    }

    pub fn n(&self) -> usize {
        self.profile.n()
    }

    pub fn m(&self) -> usize {
        self.profile.m()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn groups(&self) -> Option<&GroupPartition> {
        self.groups.as_ref()
    }

    pub fn external_scores(&self) -> Option<&[f64]> {
        self.external_scores.as_deref()
    }

    /// True when a group of `size` users reaches the n/k quota (`size * k >= n`).
    pub fn meets_quota(&self, size: usize) -> bool {
        size * self.k >= self.n()
    }

    /// Smallest group size meeting the quota, i.e. `ceil(n / k)`.
    pub fn quota(&self) -> usize {
        self.n().div_ceil(self.k)
    }

    pub fn with_k(&self, k: usize) -> Result<Self> {
        Self::new(
            self.profile.clone(),
            k,
            self.groups.clone(),
            self.external_scores.clone(),
        )
    }

    pub fn with_groups(&self, groups: Option<GroupPartition>) -> Result<Self> {
        Self::new(
            self.profile.clone(),
            self.k,
            groups,
            self.external_scores.clone(),
        )
    }

    pub fn with_external_scores(&self, scores: Option<Vec<f64>>) -> Result<Self> {
        Self::new(self.profile.clone(), self.k, self.groups.clone(), scores)
    }

    pub fn item_set<I>(&self, items: I) -> Result<ItemSet>
    where
        I: IntoIterator<Item = usize>,
    {
        ItemSet::from_items(self.m(), items)
    }
}

/// Plain serialized form of an [`Instance`]; validated on the way in.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct InstanceRecord {
    n: usize,
    m: usize,
    k: usize,
    approvals: Vec<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    groups: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    external_scores: Option<Vec<f64>>,
}

impl TryFrom<InstanceRecord> for Instance {
    type Error = Error;

    fn try_from(rec: InstanceRecord) -> Result<Self> {
        let groups = rec
            .groups
            .map(GroupPartition::from_assignment)
            .transpose()?;
        build_instance(
            rec.n,
            rec.m,
            rec.k,
            &rec.approvals,
            groups,
            rec.external_scores,
        )
    }
}

impl From<Instance> for InstanceRecord {
    fn from(inst: Instance) -> Self {
        Self {
            n: inst.n(),
            m: inst.m(),
            k: inst.k,
            approvals: inst.profile.approval_sets(),
            groups: inst.groups.map(|g| g.assignment),
            external_scores: inst.external_scores,
        }
    }
}

/// Threshold a probabilistic agreement matrix into approval sets.
///
/// User `u` approves item `i` iff `probs[u][i] > cutoff` (strict).
pub fn threshold_probabilistic_approvals<R>(probs: &[R], cutoff: f64) -> Result<Vec<Vec<usize>>>
where
    R: AsRef<[f64]>,
{
    if !(0.0..=1.0).contains(&cutoff) {
        return Err(Error::BadParams(format!("cutoff {cutoff} outside [0, 1]")));
    }
    probs
        .iter()
        .enumerate()
        .map(|(user, row)| {
            let mut set = Vec::new();
            for (item, &p) in row.as_ref().iter().enumerate() {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::BadProbability {
                        user,
                        item,
                        value: p,
                    });
                }
                if p > cutoff {
                    set.push(item);
                }
            }
            Ok(set)
        })
        .collect()
}

/// Whether a committee has been checked against justified representation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JrStatus {
    Satisfied,
    Violated,
    Unchecked,
}

impl JrStatus {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Self::Satisfied
        } else {
            Self::Violated
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Committee {
    pub items: Vec<usize>,
    pub score: Score,
    pub satisfies_jr: JrStatus,
}

impl Committee {
    pub fn size(&self) -> usize {
        self.items.len()
    }
}
