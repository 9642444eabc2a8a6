//! Small hand-built instances used in docs, goldens and tests.

use crate::model::{build_instance, GroupPartition, Instance};

/// Two groups that only meet through two bridging users.
///
/// Users labeled `A..L` are `0..12`; one-based item labels `1..5` are `0..5`.
/// Group one (`A..F`) all approve item 0 and group two (`G..L`) all
/// approve item 1; `F` and `G` additionally approve items 2, 3 and 4.
/// `n = 12`, `m = 5`, `k = 3`.
pub fn bridging_conflict() -> Instance {
    let mut approvals: Vec<Vec<usize>> = Vec::with_capacity(12);
    for user in 0..12 {
        let mut set = vec![if user < 6 { 0 } else { 1 }];
        if user == 5 || user == 6 {
            set.extend([2, 3, 4]);
        }
        approvals.push(set);
    }
    let groups = GroupPartition::from_blocks(12, &[(0..6).collect::<Vec<_>>(), (6..12).collect()])
        .expect("static partition");
    build_instance(12, 5, 3, &approvals, Some(groups), None).expect("static instance")
}

/// Six users, three red (`0..3`) and three blue (`3..6`), choosing 3 of 5 items.
///
/// Two red users share item 0, two blue users share item 1, and one user
/// from each side approves the three bridging items 2, 3 and 4.
pub fn two_clusters() -> Instance {
    let approvals = vec![
        vec![0],
        vec![0],
        vec![2, 3, 4],
        vec![1],
        vec![1],
        vec![2, 3, 4],
    ];
    let groups =
        GroupPartition::from_blocks(6, &[vec![0, 1, 2], vec![3, 4, 5]]).expect("static partition");
    build_instance(6, 5, 3, &approvals, Some(groups), None).expect("static instance")
}
