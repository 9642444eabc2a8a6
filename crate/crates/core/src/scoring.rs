//! Additive item-scoring rules.
//!
//! Rules that are ratios of counts (engagement, the diverse-approval
//! variants) produce exact rationals; file-backed classifier scores are
//! plain `f64`. A set's score is always the sum of its items' scores.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{CheckedMul, ToPrimitive, Zero};
use rand::seq::IteratorRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Instance, ItemSet};

pub type Rational = Ratio<i128>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Score {
    Exact(Rational),
    Real(f64),
}

impl Score {
    pub fn zero_like(&self) -> Score {
        match self {
            Score::Exact(_) => Score::Exact(Rational::zero()),
            Score::Real(_) => Score::Real(0.0),
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Score::Exact(r) => ratio_to_f64(r),
            Score::Real(x) => *x,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Score::Exact(r) => r.is_zero(),
            Score::Real(x) => *x == 0.0,
        }
    }

    pub fn as_exact(&self) -> Option<Rational> {
        match self {
            Score::Exact(r) => Some(*r),
            Score::Real(_) => None,
        }
    }

    /// `self / other`; exact when both sides are exact. `None` when `other` is zero.
    pub fn ratio(&self, other: &Score) -> Option<Score> {
        if other.is_zero() {
            return None;
        }
        Some(match (self, other) {
            (Score::Exact(a), Score::Exact(b)) => Score::Exact(a / b),
            _ => Score::Real(self.to_f64() / other.to_f64()),
        })
    }
}

impl PartialOrd for Score {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (Score::Exact(a), Score::Exact(b)) => Some(a.cmp(b)),
            _ => self.to_f64().partial_cmp(&other.to_f64()),
        }
    }
}

impl fmt::Display for Score {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Score::Exact(r) => write!(f, "{}/{}", r.numer(), r.denom()),
            Score::Real(x) => write!(f, "{x}"),
        }
    }
}

pub(crate) fn ratio_to_f64(r: &Rational) -> f64 {
    // i128 -> f64 is correctly rounded for each side; good enough for reporting.
    r.numer().to_f64().unwrap_or(f64::NAN) / r.denom().to_f64().unwrap_or(f64::NAN)
}

/// Formats `x` with 12 significant digits, printed in its shortest form.
///
/// Used wherever numbers are written to text so outputs are byte-stable.
pub fn format_sig(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{x:.11e}").parse().expect("valid float literal");
    format!("{rounded}")
}

/// A per-item scoring rule `f(i, A) >= 0`.
pub trait ScoringRule: Sync {
    fn name(&self) -> &str;
    fn score(&self, item: usize, instance: &Instance) -> Result<Score>;
}

/// The built-in rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    /// Number of approvers.
    Engagement,
    /// Minimum within-group approval rate.
    MaximinDiverseApproval,
    /// Product of within-group approval rates.
    ProductDiverseApproval,
    /// Externally supplied (classifier) score.
    External,
}

impl Rule {
    pub const ALL: [Rule; 4] = [
        Rule::Engagement,
        Rule::MaximinDiverseApproval,
        Rule::ProductDiverseApproval,
        Rule::External,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Rule::Engagement => "engagement",
            Rule::MaximinDiverseApproval => "mda",
            Rule::ProductDiverseApproval => "pda",
            Rule::External => "external",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Rule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "engagement" | "eng" => Ok(Rule::Engagement),
            "mda" | "maximin" | "maximin_diverse_approval" => Ok(Rule::MaximinDiverseApproval),
            "pda" | "product" | "product_diverse_approval" => Ok(Rule::ProductDiverseApproval),
            "external" | "classifier" => Ok(Rule::External),
            other => Err(Error::BadParams(format!("unknown rule '{other}'"))),
        }
    }
}

impl ScoringRule for Rule {
    fn name(&self) -> &str {
        self.as_str()
    }

    fn score(&self, item: usize, instance: &Instance) -> Result<Score> {
        match self {
            Rule::Engagement => engagement_score(item, instance),
            Rule::MaximinDiverseApproval => maximin_diverse_approval(item, instance),
            Rule::ProductDiverseApproval => product_diverse_approval(item, instance),
            Rule::External => external_score(item, instance),
        }
    }
}

fn check_item(item: usize, instance: &Instance) -> Result<()> {
    if item >= instance.m() {
        return Err(Error::IndexOutOfRange {
            item,
            m: instance.m(),
        });
    }
    Ok(())
}

pub fn engagement_score(item: usize, instance: &Instance) -> Result<Score> {
    check_item(item, instance)?;
    let count = instance.profile().approval_count(item) as i128;
    Ok(Score::Exact(Rational::from_integer(count)))
}

/// Per-block approval counts of `item`.
fn block_counts(item: usize, instance: &Instance) -> Result<(Vec<usize>, &[usize])> {
    check_item(item, instance)?;
    let groups = instance.groups().ok_or(Error::MissingGroups)?;
    let mut counts = vec![0usize; groups.gamma()];
    for user in instance.profile().approvers(item).ones() {
        counts[groups.block_of(user)] += 1;
    }
    Ok((counts, groups.sizes()))
}

pub fn maximin_diverse_approval(item: usize, instance: &Instance) -> Result<Score> {
    let (counts, sizes) = block_counts(item, instance)?;
    let min = counts
        .iter()
        .zip(sizes)
        .map(|(&c, &s)| Rational::new(c as i128, s as i128))
        .min()
        .expect("partitions have at least one block");
    Ok(Score::Exact(min))
}

pub fn product_diverse_approval(item: usize, instance: &Instance) -> Result<Score> {
    let (counts, sizes) = block_counts(item, instance)?;
    let mut exact = Some(Rational::from_integer(1));
    let mut real = 1.0f64;
    for (&c, &s) in counts.iter().zip(sizes) {
        let rate = Rational::new(c as i128, s as i128);
        exact = exact.and_then(|p| p.checked_mul(&rate));
        real *= c as f64 / s as f64;
    }
    Ok(exact.map_or(Score::Real(real), Score::Exact))
}

pub fn external_score(item: usize, instance: &Instance) -> Result<Score> {
    check_item(item, instance)?;
    let scores = instance.external_scores().ok_or(Error::MissingScores)?;
    Ok(Score::Real(scores[item]))
}

/// Scores of every item under one rule, plus an exact integer view for solvers.
#[derive(Debug, Clone)]
pub struct ItemScores {
    scores: Vec<Score>,
    weights: Weights,
}

/// Solver-facing weights: exact numerators over a shared denominator, or reals.
#[derive(Debug, Clone)]
pub(crate) enum Weights {
    Exact { numer: Vec<i128>, denom: i128 },
    Real(Vec<f64>),
}

impl ItemScores {
    pub fn compute(rule: &dyn ScoringRule, instance: &Instance) -> Result<Self> {
        let scores = (0..instance.m())
            .map(|i| rule.score(i, instance))
            .collect::<Result<Vec<_>>>()?;
        if let Some(item) = scores
            .iter()
            .position(|s| s.to_f64().is_nan() || s.to_f64() < 0.0)
        {
            return Err(Error::NegativeScore {
                item,
                score: scores[item].to_f64(),
            });
        }
        Ok(Self::from_scores(scores))
    }

    pub fn from_scores(scores: Vec<Score>) -> Self {
        let weights = exact_weights(&scores)
            .unwrap_or_else(|| Weights::Real(scores.iter().map(Score::to_f64).collect()));
        Self { scores, weights }
    }

    pub fn get(&self, item: usize) -> Score {
        self.scores[item]
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn as_slice(&self) -> &[Score] {
        &self.scores
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.weights, Weights::Exact { .. })
    }

    pub(crate) fn weights(&self) -> &Weights {
        &self.weights
    }

    /// Additive score of a set of items.
    pub fn set_score<I>(&self, items: I) -> Score
    where
        I: IntoIterator<Item = usize>,
    {
        match &self.weights {
            Weights::Exact { numer, denom } => {
                let total: i128 = items.into_iter().map(|i| numer[i]).sum();
                Score::Exact(Rational::new(total, *denom))
            }
            Weights::Real(values) => Score::Real(items.into_iter().map(|i| values[i]).sum()),
        }
    }

    pub fn item_set_score(&self, set: &ItemSet) -> Score {
        self.set_score(set.iter())
    }
}

/// Common-denominator integer view, when every score is exact and nothing overflows.
fn exact_weights(scores: &[Score]) -> Option<Weights> {
    let rationals: Vec<Rational> = scores.iter().map(Score::as_exact).collect::<Option<_>>()?;
    let mut denom: i128 = 1;
    for r in &rationals {
        let g = denom.gcd(r.denom());
        denom = i128::checked_mul(denom / g, *r.denom())?;
    }
    let numer: Vec<i128> = rationals
        .iter()
        .map(|r| i128::checked_mul(*r.numer(), denom / *r.denom()))
        .collect::<Option<_>>()?;
    // Every k-subset sum must also fit.
    numer.iter().try_fold(0i128, |acc, &x| acc.checked_add(x))?;
    Some(Weights::Exact { numer, denom })
}

/// Checks that every item nobody approves scores zero; returns a violating item.
pub fn check_approval_dependent(
    rule: &dyn ScoringRule,
    instance: &Instance,
) -> Result<Option<usize>> {
    for item in 0..instance.m() {
        if instance.profile().approval_count(item) == 0 && !rule.score(item, instance)?.is_zero() {
            return Ok(Some(item));
        }
    }
    Ok(None)
}

/// A single added approval that lowered the item's score.
#[derive(Debug, Clone)]
pub struct MonotonicityWitness {
    pub user: usize,
    pub item: usize,
    pub before: Instance,
    pub after: Instance,
    pub score_before: Score,
    pub score_after: Score,
}

/// Randomized approval-monotonicity check.
///
/// Each trial adds one approval `(u, i)` to the current profile and checks
/// that `f(i)` does not drop. Approvals accumulate across trials; the
/// profile resets to the original once every user approves everything.
pub fn check_approval_monotonic(
    rule: &dyn ScoringRule,
    instance: &Instance,
    trials: usize,
    seed: u64,
) -> Result<Option<MonotonicityWitness>> {
    if trials == 0 {
        return Err(Error::BadParams("trials must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut current = instance.clone();
    for _ in 0..trials {
        let mut sets = current.profile().approval_sets();
        let (n, m) = (current.n(), current.m());
        let open: Vec<(usize, usize)> = (0..n)
            .flat_map(|u| (0..m).map(move |i| (u, i)))
            .filter(|&(u, i)| !current.profile().approves(u, i))
            .collect();
        if open.is_empty() {
            if current == *instance {
                return Ok(None);
            }
            current = instance.clone();
            continue;
        }
        let &(user, item) = open.iter().choose(&mut rng).expect("non-empty");
        sets[user].push(item);
        let profile = crate::model::ApprovalProfile::new(m, &sets)?;
        let after = Instance::new(
            profile,
            current.k(),
            current.groups().cloned(),
            current.external_scores().map(<[f64]>::to_vec),
        )?;
        let score_before = rule.score(item, &current)?;
        let score_after = rule.score(item, &after)?;
        if score_after < score_before {
            return Ok(Some(MonotonicityWitness {
                user,
                item,
                before: current,
                after,
                score_before,
                score_after,
            }));
        }
        // occasionally restart so later trials also probe sparse profiles
        current = if rng.random_bool(0.1) {
            instance.clone()
        } else {
            after
        };
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::bridging_conflict;
    use crate::model::{build_instance, GroupPartition};

    fn r(n: i128, d: i128) -> Score {
        Score::Exact(Rational::new(n, d))
    }

    #[test]
    fn engagement_examples() {
        let inst = bridging_conflict();
        // the first shared item is index 0
        assert_eq!(engagement_score(0, &inst).unwrap(), r(6, 1));
        let nobody = build_instance(2, 2, 1, &[vec![0], vec![0]], None, None).unwrap();
        assert_eq!(engagement_score(1, &nobody).unwrap(), r(0, 1));
        let single = build_instance(1, 3, 1, &[vec![0, 1, 2]], None, None).unwrap();
        for i in 0..3 {
            assert_eq!(engagement_score(i, &single).unwrap(), r(1, 1));
        }
        assert!(matches!(
            engagement_score(5, &single),
            Err(Error::IndexOutOfRange { item: 5, m: 3 })
        ));
    }

    #[test]
    fn mda_bridging_conflict_values() {
        let inst = bridging_conflict();
        assert_eq!(maximin_diverse_approval(0, &inst).unwrap(), r(0, 1));
        assert_eq!(maximin_diverse_approval(1, &inst).unwrap(), r(0, 1));
        for i in 2..5 {
            assert_eq!(maximin_diverse_approval(i, &inst).unwrap(), r(1, 6));
        }
    }

    #[test]
    fn mda_degenerate_partition_and_full_approval() {
        let approvals = vec![vec![0, 1], vec![0], vec![0, 2]];
        let one = GroupPartition::from_assignment(vec![0, 0, 0]).unwrap();
        let inst = build_instance(3, 3, 1, &approvals, Some(one), None).unwrap();
        for i in 0..3 {
            let eng = engagement_score(i, &inst).unwrap().as_exact().unwrap();
            assert_eq!(
                maximin_diverse_approval(i, &inst).unwrap(),
                Score::Exact(eng / Rational::from_integer(3))
            );
            assert_eq!(
                product_diverse_approval(i, &inst).unwrap(),
                Score::Exact(eng / Rational::from_integer(3))
            );
        }
        assert_eq!(maximin_diverse_approval(0, &inst).unwrap(), r(1, 1));
    }

    #[test]
    fn diverse_rules_need_groups() {
        let inst = build_instance(1, 1, 1, &[vec![0]], None, None).unwrap();
        assert_eq!(
            maximin_diverse_approval(0, &inst).unwrap_err(),
            Error::MissingGroups
        );
        assert_eq!(
            product_diverse_approval(0, &inst).unwrap_err(),
            Error::MissingGroups
        );
    }

    #[test]
    fn pda_bridging_item() {
        let inst = bridging_conflict();
        assert_eq!(product_diverse_approval(2, &inst).unwrap(), r(1, 36));
        let nobody = build_instance(2, 2, 1, &[vec![0], vec![0]], None, None)
            .unwrap()
            .with_groups(Some(GroupPartition::from_assignment(vec![0, 1]).unwrap()))
            .unwrap();
        assert_eq!(product_diverse_approval(1, &nobody).unwrap(), r(0, 1));
    }

    #[test]
    fn external_lookup() {
        let inst = build_instance(1, 2, 1, &[vec![0]], None, Some(vec![0.73, 0.0])).unwrap();
        assert_eq!(external_score(0, &inst).unwrap(), Score::Real(0.73));
        let bare = build_instance(1, 2, 1, &[vec![0]], None, None).unwrap();
        assert_eq!(external_score(0, &bare).unwrap_err(), Error::MissingScores);
        let zeros = bare.with_external_scores(Some(vec![0.0, 0.0])).unwrap();
        assert!((0..2).all(|i| external_score(i, &zeros).unwrap().is_zero()));
    }

    #[test]
    fn approval_dependence() {
        let inst = bridging_conflict();
        assert_eq!(
            check_approval_dependent(&Rule::Engagement, &inst).unwrap(),
            None
        );
        assert_eq!(
            check_approval_dependent(&Rule::MaximinDiverseApproval, &inst).unwrap(),
            None
        );
        let unapproved =
            build_instance(1, 1, 1, &[Vec::<usize>::new()], None, Some(vec![1.0])).unwrap();
        assert_eq!(
            check_approval_dependent(&Rule::External, &unapproved).unwrap(),
            Some(0)
        );
    }

    /// Negative control: scores an item by how many users do NOT approve it.
    struct Disapproval;

    impl ScoringRule for Disapproval {
        fn name(&self) -> &str {
            "disapproval"
        }

        fn score(&self, item: usize, instance: &Instance) -> Result<Score> {
            let n = instance.n() as i128;
            let c = instance.profile().approval_count(item) as i128;
            Ok(Score::Exact(Rational::from_integer(n - c)))
        }
    }

    #[test]
    fn monotonicity() {
        let inst = bridging_conflict();
        assert!(check_approval_monotonic(&Rule::Engagement, &inst, 200, 7)
            .unwrap()
            .is_none());
        assert!(
            check_approval_monotonic(&Rule::MaximinDiverseApproval, &inst, 200, 7)
                .unwrap()
                .is_none()
        );
        assert!(
            check_approval_monotonic(&Rule::ProductDiverseApproval, &inst, 200, 7)
                .unwrap()
                .is_none()
        );
        let witness = check_approval_monotonic(&Disapproval, &inst, 10, 7)
            .unwrap()
            .expect("disapproval is not monotonic");
        assert!(witness.score_after < witness.score_before);
        assert!(witness.after.profile().approves(witness.user, witness.item));
        assert!(!witness
            .before
            .profile()
            .approves(witness.user, witness.item));
        assert!(check_approval_monotonic(&Rule::Engagement, &inst, 0, 7).is_err());
    }

    #[test]
    fn set_score_is_exact_sum() {
        let inst = bridging_conflict();
        let table = ItemScores::compute(&Rule::MaximinDiverseApproval, &inst).unwrap();
        assert!(table.is_exact());
        assert_eq!(table.set_score([2, 3, 4]), r(1, 2));
        assert_eq!(table.set_score([0, 1, 2]), r(1, 6));
    }

    #[test]
    fn mixed_tables_fall_back_to_reals() {
        let table = ItemScores::from_scores(vec![r(1, 3), Score::Real(0.5)]);
        assert!(!table.is_exact());
        assert!((table.set_score([0, 1]).to_f64() - (1.0 / 3.0 + 0.5)).abs() < 1e-15);
    }

    #[test]
    fn rule_names_round_trip() {
        for rule in Rule::ALL {
            assert_eq!(rule.as_str().parse::<Rule>().unwrap(), rule);
        }
        assert!("softmax".parse::<Rule>().is_err());
    }
}
