//! Who a committee leaves without any approved item, overall and per group.

use jrank::model::{Instance, ItemSet};

#[derive(Debug, Clone, PartialEq)]
pub struct GroupRepresentation {
    pub group: usize,
    pub size: usize,
    pub unrepresented_count: usize,
}

impl GroupRepresentation {
    pub fn unrepresented_fraction(&self) -> f64 {
        self.unrepresented_count as f64 / self.size as f64
    }
}

/// A user is represented when they approve at least one committee item.
#[derive(Debug, Clone, PartialEq)]
pub struct RepresentationReport {
    pub committee: Vec<usize>,
    pub rule: Option<String>,
    pub total_users: usize,
    pub unrepresented_count: usize,
    /// Empty when the instance has no groups.
    pub per_group: Vec<GroupRepresentation>,
}

impl RepresentationReport {
    pub fn unrepresented_fraction(&self) -> f64 {
        self.unrepresented_count as f64 / self.total_users as f64
    }
}

pub fn representation_report(
    set: &ItemSet,
    instance: &Instance,
    rule: Option<&str>,
) -> RepresentationReport {
    let unrepresented = instance.profile().unrepresented(set);
    let per_group = instance
        .groups()
        .map(|groups| {
            (0..groups.gamma())
                .map(|g| {
                    let members = groups.members(g);
                    GroupRepresentation {
                        group: g,
                        size: members.len(),
                        unrepresented_count: members
                            .iter()
                            .filter(|&&u| unrepresented.contains(u))
                            .count(),
                    }
                })
                .collect()
        })
        .unwrap_or_default();
    RepresentationReport {
        committee: set.to_vec(),
        rule: rule.map(String::from),
        total_users: instance.n(),
        unrepresented_count: unrepresented.count_ones(..),
        per_group,
    }
}
