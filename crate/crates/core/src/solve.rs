//! Committee selection with and without the JR constraint, the price of
//! enforcing it, and instance generators for the worst-case constructions.

use std::cmp::Ordering;
use std::fmt;
use std::ops::Add;
use std::str::FromStr;

use fixedbitset::FixedBitSet;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jr::{coverage_picks, is_justifying, items_justify};
use crate::model::{build_instance, Committee, GroupPartition, Instance, JrStatus};
use crate::scoring::{ItemScores, Score, ScoringRule, Weights};

/// Default cap on the number of k-subsets the exact solver may enumerate.
pub const DEFAULT_BUDGET: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    OptUnconstrained,
    OptJrExact,
    GreedyCc,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::OptUnconstrained => "opt_unconstrained",
            Method::OptJrExact => "opt_jr_exact",
            Method::GreedyCc => "greedy_cc",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "opt" | "optimal" | "opt_unconstrained" => Ok(Method::OptUnconstrained),
            "exact" | "opt_jr" | "opt_jr_exact" => Ok(Method::OptJrExact),
            "greedy" | "greedycc" | "greedy_cc" => Ok(Method::GreedyCc),
            other => Err(Error::BadParams(format!("unknown method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    pub committee: Committee,
    pub rule: String,
    pub method: Method,
    /// Items GreedyCC picked for coverage before switching to score; 0 otherwise.
    pub justifying_prefix_size: usize,
    /// Items in the order they were chosen.
    pub pick_order: Vec<usize>,
}

trait Weight: Copy + Send + Sync + Add<Output = Self> {
    const ZERO: Self;
    fn order(&self, other: &Self) -> Ordering;
}

impl Weight for i128 {
    const ZERO: Self = 0;
    fn order(&self, other: &Self) -> Ordering {
        self.cmp(other)
    }
}

impl Weight for f64 {
    const ZERO: Self = 0.0;
    fn order(&self, other: &Self) -> Ordering {
        self.total_cmp(other)
    }
}

/// Item indices sorted by descending weight, ties by ascending index.
fn ranked<W: Weight>(weights: &[W]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| weights[b].order(&weights[a]));
    order
}

fn ranking(scores: &ItemScores) -> Vec<usize> {
    match scores.weights() {
        Weights::Exact { numer, .. } => ranked(numer),
        Weights::Real(values) => ranked(values),
    }
}

fn selection(
    instance: &Instance,
    scores: &ItemScores,
    rule: &str,
    method: Method,
    pick_order: Vec<usize>,
    justifying_prefix_size: usize,
) -> SelectionResult {
    let mut items = pick_order.clone();
    items.sort_unstable();
    let set = instance
        .item_set(items.iter().copied())
        .expect("solver items are in range");
    SelectionResult {
        committee: Committee {
            score: scores.set_score(items.iter().copied()),
            satisfies_jr: JrStatus::from_bool(is_justifying(&set, instance)),
            items,
        },
        rule: rule.to_string(),
        method,
        justifying_prefix_size,
        pick_order,
    }
}

/// Unconstrained optimum: the `k` highest-scoring items, ties by lower index.
pub fn optimal_set(instance: &Instance, rule: &dyn ScoringRule) -> Result<SelectionResult> {
    let scores = ItemScores::compute(rule, instance)?;
    Ok(optimal_set_with(instance, &scores, rule.name()))
}

pub fn optimal_set_with(instance: &Instance, scores: &ItemScores, rule: &str) -> SelectionResult {
    let mut order = ranking(scores);
    order.truncate(instance.k());
    selection(instance, scores, rule, Method::OptUnconstrained, order, 0)
}

/// `C(m, k)`, saturating at `u128::MAX`.
pub fn binomial(m: usize, k: usize) -> u128 {
    if k > m {
        return 0;
    }
    let k = k.min(m - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (m - i) / (i + 1) stays integral at every step
        acc = match acc.checked_mul((m - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Best JR committee by exhaustive enumeration of all k-subsets.
///
/// Ties resolve to the lexicographically smallest item set.
pub fn optimal_jr_set_exact(
    instance: &Instance,
    rule: &dyn ScoringRule,
    budget: u64,
) -> Result<SelectionResult> {
    let scores = ItemScores::compute(rule, instance)?;
    optimal_jr_set_exact_with(instance, &scores, rule.name(), budget)
}

pub fn optimal_jr_set_exact_with(
    instance: &Instance,
    scores: &ItemScores,
    rule: &str,
    budget: u64,
) -> Result<SelectionResult> {
    let (m, k) = (instance.m(), instance.k());
    if binomial(m, k) > budget as u128 {
        return Err(Error::BudgetExceeded { m, k, budget });
    }
    let best = match scores.weights() {
        Weights::Exact { numer, .. } => best_justifying(instance, numer),
        Weights::Real(values) => best_justifying(instance, values),
    };
    // GreedyCC always produces a justifying k-set, so one exists.
    let items = best.expect("a justifying k-subset always exists");
    Ok(selection(
        instance,
        scores,
        rule,
        Method::OptJrExact,
        items,
        0,
    ))
}

fn best_justifying<W: Weight>(instance: &Instance, weights: &[W]) -> Option<Vec<usize>> {
    let (m, k) = (instance.m(), instance.k());
    // One task per leading item; tasks come back in lexicographic order.
    let per_lead: Vec<Option<(Vec<usize>, W)>> = (0..=m - k)
        .into_par_iter()
        .map(|lead| {
            let mut scratch = FixedBitSet::with_capacity(instance.n());
            let mut combo: Vec<usize> = (lead..lead + k).collect();
            let mut best: Option<(Vec<usize>, W)> = None;
            loop {
                let total = combo.iter().fold(W::ZERO, |acc, &i| acc + weights[i]);
                let better = best
                    .as_ref()
                    .is_none_or(|(_, b)| total.order(b) == Ordering::Greater);
                if better && items_justify(instance, &combo, &mut scratch) {
                    best = Some((combo.clone(), total));
                }
                if !next_combination(&mut combo[1..], m) {
                    break;
                }
            }
            best
        })
        .collect();
    let mut best: Option<(Vec<usize>, W)> = None;
    for (combo, total) in per_lead.into_iter().flatten() {
        if best
            .as_ref()
            .is_none_or(|(_, b)| total.order(b) == Ordering::Greater)
        {
            best = Some((combo, total));
        }
    }
    best.map(|(combo, _)| combo)
}

/// Advances a strictly increasing index vector over `0..m` to the next
/// combination in lexicographic order. Returns false when exhausted.
fn next_combination(combo: &mut [usize], m: usize) -> bool {
    let k = combo.len();
    for pos in (0..k).rev() {
        if combo[pos] < m - k + pos {
            combo[pos] += 1;
            for next in pos + 1..k {
                combo[next] = combo[next - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// GreedyCC: coverage picks while some item still has a quota-sized set of
/// unrepresented approvers, then fill the rest by score.
pub fn greedy_cc(instance: &Instance, rule: &dyn ScoringRule) -> Result<SelectionResult> {
    let scores = ItemScores::compute(rule, instance)?;
    Ok(greedy_cc_with(instance, &scores, rule.name()))
}

pub fn greedy_cc_with(instance: &Instance, scores: &ItemScores, rule: &str) -> SelectionResult {
    let k = instance.k();
    let mut picked = Vec::with_capacity(k);
    let mut uncovered = FixedBitSet::with_capacity(instance.n());
    uncovered.insert_range(..);
    let prefix = coverage_picks(instance, &mut picked, &mut uncovered, k);
    let mut taken = FixedBitSet::with_capacity(instance.m());
    picked.iter().for_each(|&i| taken.insert(i));
    for item in ranking(scores) {
        if picked.len() >= k {
            break;
        }
        if !taken.contains(item) {
            taken.insert(item);
            picked.push(item);
        }
    }
    selection(instance, scores, rule, Method::GreedyCc, picked, prefix)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriceMethod {
    Exact { budget: u64 },
    Greedy,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Price {
    Defined(Score),
    /// The constrained score is zero.
    Undefined,
}

impl Price {
    pub fn value(&self) -> Option<Score> {
        match self {
            Price::Defined(s) => Some(*s),
            Price::Undefined => None,
        }
    }

    pub fn to_f64(&self) -> Option<f64> {
        self.value().map(|s| s.to_f64())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriceReport {
    pub score_opt: Score,
    pub score_constrained: Score,
    pub price: Price,
    /// True when the denominator is the exact JR optimum.
    pub exact: bool,
    pub optimal: SelectionResult,
    pub constrained: SelectionResult,
}

/// Ratio of the unconstrained optimum to the JR-constrained (exact or greedy) score.
pub fn price_of_jr(
    instance: &Instance,
    rule: &dyn ScoringRule,
    method: PriceMethod,
) -> Result<PriceReport> {
    let scores = ItemScores::compute(rule, instance)?;
    price_of_jr_with(instance, &scores, rule.name(), method)
}

pub fn price_of_jr_with(
    instance: &Instance,
    scores: &ItemScores,
    rule: &str,
    method: PriceMethod,
) -> Result<PriceReport> {
    let optimal = optimal_set_with(instance, scores, rule);
    let (constrained, exact) = match method {
        PriceMethod::Exact { budget } => (
            optimal_jr_set_exact_with(instance, scores, rule, budget)?,
            true,
        ),
        PriceMethod::Greedy => (greedy_cc_with(instance, scores, rule), false),
    };
    let score_opt = optimal.committee.score;
    let score_constrained = constrained.committee.score;
    let price = score_opt
        .ratio(&score_constrained)
        .map_or(Price::Undefined, Price::Defined);
    Ok(PriceReport {
        score_opt,
        score_constrained,
        price,
        exact,
        optimal,
        constrained,
    })
}

/// Users per group in [`unbounded_price_instance`].
pub const UNBOUNDED_GROUP_SIZE: usize = 2;

/// Unbounded-price construction for profile-independent scores.
///
/// `k` groups of [`UNBOUNDED_GROUP_SIZE`] users each approve one private item
/// scored `epsilon`; one extra item nobody approves is scored `c`. Every JR
/// committee must take all private items, so the exact price is
/// `(c + (k - 1) * epsilon) / (k * epsilon)`.
pub fn unbounded_price_instance(k: usize, epsilon: f64, c: f64) -> Result<Instance> {
    if k == 0 || !(epsilon.is_finite() && c.is_finite()) || epsilon <= 0.0 || c <= epsilon {
        return Err(Error::BadParams(format!(
            "need k >= 1 and 0 < epsilon < c (k = {k}, epsilon = {epsilon}, c = {c})"
        )));
    }
    let n = k * UNBOUNDED_GROUP_SIZE;
    let approvals: Vec<Vec<usize>> = (0..n).map(|u| vec![u / UNBOUNDED_GROUP_SIZE]).collect();
    let blocks: Vec<Vec<usize>> = (0..k)
        .map(|g| (g * UNBOUNDED_GROUP_SIZE..(g + 1) * UNBOUNDED_GROUP_SIZE).collect())
        .collect();
    let mut scores = vec![epsilon; k];
    scores.push(c);
    build_instance(
        n,
        k + 1,
        k,
        &approvals,
        Some(GroupPartition::from_blocks(n, &blocks)?),
        Some(scores),
    )
}

/// Construction where maximin diverse approval pays the largest price.
///
/// `gamma = n k / (n + k)` groups of `n / k + 1` users. Group `g` unanimously
/// approves its consensus item `g`; its first member also approves all `k`
/// shared items `gamma..gamma + k`. The price under maximin diverse approval
/// is `k / (k - gamma) = (n + k) / k`, which equals `k` when `n = k (k - 1)`.
pub fn diverse_approval_worst_case(n: usize, k: usize) -> Result<Instance> {
    if n == 0 || k == 0 {
        return Err(Error::BadParams("n and k must be positive".into()));
    }
    if !(n * k).is_multiple_of(n + k) {
        return Err(Error::BadDivisibility(format!(
            "n + k = {} does not divide n k = {}",
            n + k,
            n * k
        )));
    }
    let gamma = n * k / (n + k);
    if gamma <= 1 {
        return Err(Error::BadDivisibility(format!(
            "gamma = n k / (n + k) = {gamma}, need gamma > 1"
        )));
    }
    if !n.is_multiple_of(gamma) {
        return Err(Error::BadDivisibility(format!(
            "gamma = {gamma} does not divide n = {n}"
        )));
    }
    let size = n / gamma;
    let m = gamma + k;
    let approvals: Vec<Vec<usize>> = (0..n)
        .map(|u| {
            let g = u / size;
            let mut set = vec![g];
            if u % size == 0 {
                set.extend(gamma..m);
            }
            set
        })
        .collect();
    let groups = GroupPartition::from_assignment((0..n).map(|u| u / size).collect())?;
    build_instance(n, m, k, &approvals, Some(groups), None)
}

/// Tight construction for cohesive divided groups.
///
/// `gamma` equal groups each unanimously approve one consensus item
/// `0..gamma` (score 0); `k` further items nobody approves score 1. Every JR
/// committee holds all consensus items, so the exact price is `k / (k - gamma)`.
pub fn cohesive_groups_tight_instance(n: usize, k: usize, gamma: usize) -> Result<Instance> {
    if gamma == 0 || k <= 1 || gamma >= k {
        return Err(Error::BadParams(format!(
            "need k > 1 and 1 <= gamma < k (k = {k}, gamma = {gamma})"
        )));
    }
    if n == 0 || !n.is_multiple_of(gamma) {
        return Err(Error::BadParams(format!(
            "gamma = {gamma} must divide n = {n}"
        )));
    }
    let size = n / gamma;
    let m = gamma + k;
    let approvals: Vec<Vec<usize>> = (0..n).map(|u| vec![u / size]).collect();
    let groups = GroupPartition::from_assignment((0..n).map(|u| u / size).collect())?;
    let mut scores = vec![0.0; gamma];
    scores.extend(std::iter::repeat_n(1.0, k));
    build_instance(n, m, k, &approvals, Some(groups), Some(scores))
}
