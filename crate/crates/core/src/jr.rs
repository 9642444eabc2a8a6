//! Justified representation: cohesive groups, representation, and checks
//! for n/k-justifying sets.
//!
//! A set `S` fails to be n/k-justifying exactly when some item `c` has at
//! least `n/k` approvers who approve nothing in `S`: those approvers form a
//! cohesive (through `c`) unrepresented group, and every violating cohesive
//! group is contained in such an approver set for its common item. So the
//! check is a scan over items instead of an enumeration of user groups.

use fixedbitset::FixedBitSet;

use crate::error::{Error, Result};
use crate::model::{Instance, ItemSet};

/// Largest `n` accepted by [`verify_jr_bruteforce`].
pub const BRUTE_FORCE_MAX_USERS: usize = 20;

/// A commonly approved item and a large enough group of its approvers that
/// the checked set leaves unrepresented.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JrWitness {
    pub item: usize,
    pub group: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum JrCheck {
    Pass,
    Fail(JrWitness),
}

impl JrCheck {
    pub fn is_pass(&self) -> bool {
        matches!(self, JrCheck::Pass)
    }

    pub fn witness(&self) -> Option<&JrWitness> {
        match self {
            JrCheck::Pass => None,
            JrCheck::Fail(w) => Some(w),
        }
    }
}

fn check_group(group: &[usize], instance: &Instance) -> Result<()> {
    if group.is_empty() {
        return Err(Error::EmptyGroup);
    }
    let n = instance.n();
    match group.iter().find(|&&u| u >= n) {
        Some(&user) => Err(Error::UserOutOfRange { user, n }),
        None => Ok(()),
    }
}

/// True iff all users in `group` approve at least one common item.
pub fn is_cohesive(group: &[usize], instance: &Instance) -> Result<bool> {
    check_group(group, instance)?;
    Ok(!common_items(group, instance).is_clear())
}

fn common_items(group: &[usize], instance: &Instance) -> FixedBitSet {
    let profile = instance.profile();
    let mut common = profile.ballot(group[0]).clone();
    for &u in &group[1..] {
        common.intersect_with(profile.ballot(u));
    }
    common
}

/// True iff some member of `group` approves some item of `set`.
pub fn represents(set: &ItemSet, group: &[usize], instance: &Instance) -> Result<bool> {
    check_group(group, instance)?;
    let profile = instance.profile();
    Ok(group
        .iter()
        .any(|&u| !profile.ballot(u).is_disjoint(set.bits())))
}

/// Checks whether `set` is n/k-justifying for the instance's `k`.
///
/// The size of `set` is not checked. Items are scanned in ascending order
/// and the first violating item is reported together with all of its
/// unrepresented approvers.
pub fn verify_jr(set: &ItemSet, instance: &Instance) -> JrCheck {
    let profile = instance.profile();
    let unrepresented = profile.unrepresented(set);
    for item in 0..instance.m() {
        let count = profile.approvers(item).intersection_count(&unrepresented);
        if count > 0 && instance.meets_quota(count) {
            let mut group = profile.approvers(item).clone();
            group.intersect_with(&unrepresented);
            return JrCheck::Fail(JrWitness {
                item,
                group: group.ones().collect(),
            });
        }
    }
    JrCheck::Pass
}

pub fn is_justifying(set: &ItemSet, instance: &Instance) -> bool {
    verify_jr(set, instance).is_pass()
}

/// Allocation-light variant of [`is_justifying`] for enumeration loops;
/// `uncovered` is scratch space of width `n`.
pub(crate) fn items_justify(
    instance: &Instance,
    items: &[usize],
    uncovered: &mut FixedBitSet,
) -> bool {
    let profile = instance.profile();
    uncovered.insert_range(..);
    for &item in items {
        uncovered.difference_with(profile.approvers(item));
    }
    (0..instance.m()).all(|item| {
        let count = profile.approvers(item).intersection_count(uncovered);
        count == 0 || !instance.meets_quota(count)
    })
}

/// Reference check that enumerates every user subset.
///
/// Subsets are visited in increasing bitmask order; the first cohesive,
/// quota-sized, unrepresented subset is reported with its smallest common item.
pub fn verify_jr_bruteforce(set: &ItemSet, instance: &Instance) -> Result<JrCheck> {
    let n = instance.n();
    if n > BRUTE_FORCE_MAX_USERS {
        return Err(Error::TooLarge {
            n,
            limit: BRUTE_FORCE_MAX_USERS,
        });
    }
    let profile = instance.profile();
    let represented: u32 = (0..n)
        .filter(|&u| !profile.ballot(u).is_disjoint(set.bits()))
        .fold(0, |acc, u| acc | (1 << u));
    for mask in 1u32..(1u32 << n) {
        if mask & represented != 0 || !instance.meets_quota(mask.count_ones() as usize) {
            continue;
        }
        let group: Vec<usize> = (0..n).filter(|&u| mask & (1 << u) != 0).collect();
        if let Some(item) = common_items(&group, instance).minimum() {
            return Ok(JrCheck::Fail(JrWitness { item, group }));
        }
    }
    Ok(JrCheck::Pass)
}

/// Greedy coverage picks: repeatedly add the item with the most uncovered
/// approvers among items whose uncovered approvers still meet the quota.
/// Ties go to the lowest index. Returns the number of picks made.
pub(crate) fn coverage_picks(
    instance: &Instance,
    selected: &mut Vec<usize>,
    uncovered: &mut FixedBitSet,
    limit: usize,
) -> usize {
    let profile = instance.profile();
    let mut picks = 0;
    while selected.len() < limit {
        let mut best: Option<(usize, usize)> = None;
        for item in 0..instance.m() {
            let count = profile.approvers(item).intersection_count(uncovered);
            if count == 0 || !instance.meets_quota(count) {
                continue;
            }
            if best.is_none_or(|(_, c)| count > c) {
                best = Some((item, count));
            }
        }
        let Some((item, _)) = best else { break };
        selected.push(item);
        uncovered.difference_with(profile.approvers(item));
        picks += 1;
    }
    picks
}

/// A size-k n/k-justifying set containing `item`.
///
/// Seeds the selection with `item`, runs coverage picks on the users it
/// leaves uncovered, then pads with the lowest unused indices.
pub fn jr_set_containing(item: usize, instance: &Instance) -> Result<ItemSet> {
    let (n, m) = (instance.n(), instance.m());
    if item >= m {
        return Err(Error::IndexOutOfRange { item, m });
    }
    let profile = instance.profile();
    if profile.approval_count(item) == 0 {
        return Err(Error::Unapproved { item });
    }
    let mut selected = vec![item];
    let mut uncovered = FixedBitSet::with_capacity(n);
    uncovered.insert_range(..);
    uncovered.difference_with(profile.approvers(item));
    coverage_picks(instance, &mut selected, &mut uncovered, instance.k());
    let mut set = ItemSet::from_items(m, selected)?;
    for pad in 0..m {
        if set.len() >= instance.k() {
            break;
        }
        set.insert(pad);
    }
    Ok(set)
}
