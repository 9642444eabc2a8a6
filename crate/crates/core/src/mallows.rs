//! Mallows rankings, mixtures of them, and the price simulations built on top.
//!
//! Rankings are `Vec<usize>` listing items from the top: `ranking[0]` is the
//! most preferred item. A Mallows model with dispersion `phi` and reference
//! `sigma` gives ranking `pi` probability `phi^d(pi, sigma) / Z(phi)` where
//! `d` is the Kendall tau distance.
//!
//! Sampling uses the bottom-up insertion procedure: reference items are
//! inserted from the last one upward, each at a position drawn from a
//! truncated geometric distribution. Each position above the bottom creates
//! one extra discordant pair, which is exactly what the pmf charges for.

use std::fmt;
use std::fmt::Write as _;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{build_instance, GroupPartition, Instance};
use crate::scoring::{format_sig, ItemScores, ScoringRule};
use crate::solve::{price_of_jr_with, PriceMethod};

/// Tolerance on the mixing weights summing to one.
pub const WEIGHT_TOLERANCE: f64 = 1e-12;

fn check_permutation(ranking: &[usize], m: usize) -> Result<()> {
    if ranking.len() != m {
        return Err(Error::NotPermutation { m });
    }
    let mut seen = vec![false; m];
    for &item in ranking {
        if item >= m || std::mem::replace(&mut seen[item], true) {
            return Err(Error::NotPermutation { m });
        }
    }
    Ok(())
}

fn check_phi(phi: f64) -> Result<()> {
    if (0.0..=1.0).contains(&phi) {
        Ok(())
    } else {
        Err(Error::BadParams(format!(
            "dispersion {phi} is outside [0, 1]"
        )))
    }
}

/// Number of item pairs the two rankings order differently.
///
/// Runs in `O(m log m)` by counting inversions of `pi`'s positions read in
/// `sigma`'s order.
pub fn kendall_tau(pi: &[usize], sigma: &[usize]) -> Result<u64> {
    let m = sigma.len();
    check_permutation(sigma, m)?;
    check_permutation(pi, m)?;
    let mut position = vec![0usize; m];
    for (rank, &item) in pi.iter().enumerate() {
        position[item] = rank;
    }
    let mut seq: Vec<usize> = sigma.iter().map(|&item| position[item]).collect();
    let mut buf = vec![0usize; m];
    Ok(count_inversions(&mut seq, &mut buf))
}

/// Merge sort that returns the number of inversions it removed.
fn count_inversions(seq: &mut [usize], buf: &mut [usize]) -> u64 {
    let len = seq.len();
    if len < 2 {
        return 0;
    }
    let mid = len / 2;
    let mut count = {
        let (left, right) = seq.split_at_mut(mid);
        let (lbuf, rbuf) = buf[..len].split_at_mut(mid);
        count_inversions(left, lbuf) + count_inversions(right, rbuf)
    };
    let (mut i, mut j) = (0, mid);
    for slot in buf[..len].iter_mut() {
        if j >= len || (i < mid && seq[i] <= seq[j]) {
            *slot = seq[i];
            i += 1;
        } else {
            // Every element still waiting on the left is larger.
            count += (mid - i) as u64;
            *slot = seq[j];
            j += 1;
        }
    }
    seq.copy_from_slice(&buf[..len]);
    count
}

/// `Z(phi) = 1 * (1 + phi) * ... * (1 + phi + ... + phi^(m-1))`.
pub fn mallows_normalizer(phi: f64, m: usize) -> f64 {
    let mut z = 1.0;
    let mut partial = 0.0;
    let mut power = 1.0;
    for _ in 0..m {
        partial += power;
        power *= phi;
        z *= partial;
    }
    z
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MallowsConfig {
    pub phi: f64,
    pub sigma: Vec<usize>,
}

impl MallowsConfig {
    pub fn new(phi: f64, sigma: Vec<usize>) -> Result<Self> {
        check_phi(phi)?;
        check_permutation(&sigma, sigma.len())?;
        if sigma.is_empty() {
            return Err(Error::BadParams("reference ranking is empty".into()));
        }
        Ok(Self { phi, sigma })
    }

    /// Reference ranking `0, 1, ..., m-1`.
    pub fn identity(phi: f64, m: usize) -> Result<Self> {
        Self::new(phi, (0..m).collect())
    }

    /// Reference ranking `m-1, ..., 1, 0`.
    pub fn reversed(phi: f64, m: usize) -> Result<Self> {
        Self::new(phi, (0..m).rev().collect())
    }

    pub fn m(&self) -> usize {
        self.sigma.len()
    }

    /// Exact probability of `pi` under this model.
    pub fn probability(&self, pi: &[usize]) -> Result<f64> {
        let d = kendall_tau(pi, &self.sigma)?;
        let d = i32::try_from(d).map_err(|_| Error::BadParams("ranking too long".into()))?;
        Ok(self.phi.powi(d) / mallows_normalizer(self.phi, self.m()))
    }
}

/// Draws a 0-based insertion position in `0..slots` with weight `phi^position`.
fn insertion_position<R: Rng + ?Sized>(phi: f64, slots: usize, rng: &mut R) -> usize {
    if phi == 0.0 || slots == 1 {
        return 0;
    }
    if phi == 1.0 {
        return rng.random_range(0..slots);
    }
    let total = (1.0 - phi.powi(slots as i32)) / (1.0 - phi);
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut weight = 1.0;
    for position in 0..slots {
        acc += weight;
        if target < acc {
            return position;
        }
        weight *= phi;
    }
    // Rounding left the target just past the last cumulative weight.
    slots - 1
}

/// Samples a ranking from the Mallows model by bottom-up insertion.
pub fn sample_mallows_bottom_up<R: Rng + ?Sized>(
    config: &MallowsConfig,
    rng: &mut R,
) -> Vec<usize> {
    let m = config.m();
    let mut pi = Vec::with_capacity(m);
    for &item in config.sigma.iter().rev() {
        let position = insertion_position(config.phi, pi.len() + 1, rng);
        pi.insert(position, item);
    }
    pi
}

/// A mixture of Mallows models whose users approve their top `tau` items.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MallowsMixtureConfig {
    pub components: Vec<MallowsConfig>,
    pub lambdas: Vec<f64>,
    pub tau: usize,
}

impl MallowsMixtureConfig {
    pub fn new(components: Vec<MallowsConfig>, lambdas: Vec<f64>, tau: usize) -> Result<Self> {
        let Some(first) = components.first() else {
            return Err(Error::BadParams("mixture has no components".into()));
        };
        let m = first.m();
        if components.iter().any(|c| c.m() != m) {
            return Err(Error::BadParams("mixture components disagree on m".into()));
        }
        if lambdas.len() != components.len() {
            return Err(Error::BadParams(format!(
                "{} weights for {} components",
                lambdas.len(),
                components.len()
            )));
        }
        if lambdas.iter().any(|&l| !(l >= 0.0 && l.is_finite())) {
            return Err(Error::BadParams(
                "mixing weights must be non-negative".into(),
            ));
        }
        let total: f64 = lambdas.iter().sum();
        if (total - 1.0).abs() > WEIGHT_TOLERANCE {
            return Err(Error::BadParams(format!(
                "mixing weights sum to {total}, not 1"
            )));
        }
        if !(1..=m).contains(&tau) {
            return Err(Error::BadParams(format!("tau = {tau} must lie in 1..={m}")));
        }
        Ok(Self {
            components,
            lambdas,
            tau,
        })
    }

    /// Two equally weighted components with opposite reference rankings.
    pub fn polarized(phi: f64, m: usize, tau: usize) -> Result<Self> {
        Self::new(
            vec![
                MallowsConfig::identity(phi, m)?,
                MallowsConfig::reversed(phi, m)?,
            ],
            vec![0.5, 0.5],
            tau,
        )
    }

    pub fn m(&self) -> usize {
        self.components[0].m()
    }

    pub fn gamma(&self) -> usize {
        self.components.len()
    }

    /// Largest dispersion among the components.
    pub fn phi_max(&self) -> f64 {
        self.components.iter().map(|c| c.phi).fold(0.0, f64::max)
    }

    /// Exact probability of `pi` under the mixture.
    pub fn probability(&self, pi: &[usize]) -> Result<f64> {
        self.components
            .iter()
            .zip(&self.lambdas)
            .map(|(c, &l)| Ok(l * c.probability(pi)?))
            .sum()
    }

    /// Draws a component index according to the mixing weights.
    pub fn draw_component<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let target: f64 = rng.random();
        let mut acc = 0.0;
        let mut last_positive = 0;
        for (index, &weight) in self.lambdas.iter().enumerate() {
            if weight > 0.0 {
                acc += weight;
                last_positive = index;
                if target < acc {
                    return index;
                }
            }
        }
        last_positive
    }
}

/// Samples `n` users from the mixture; each approves the top `tau` items of
/// their ranking and is grouped by the component they were drawn from.
///
/// Components no user was drawn from are left out of the partition.
pub fn sample_mixture_instance<R: Rng + ?Sized>(
    config: &MallowsMixtureConfig,
    n: usize,
    k: usize,
    rng: &mut R,
) -> Result<Instance> {
    let mut approvals = Vec::with_capacity(n);
    let mut drawn = Vec::with_capacity(n);
    for _ in 0..n {
        let component = config.draw_component(rng);
        let ranking = sample_mallows_bottom_up(&config.components[component], rng);
        approvals.push(ranking[..config.tau].to_vec());
        drawn.push(component);
    }
    let mut label = vec![usize::MAX; config.gamma()];
    let mut next = 0;
    let assignment: Vec<usize> = drawn
        .iter()
        .map(|&c| {
            if label[c] == usize::MAX {
                label[c] = next;
                next += 1;
            }
            label[c]
        })
        .collect();
    let groups = if n == 0 {
        None
    } else {
        Some(GroupPartition::from_assignment(assignment)?)
    };
    build_instance(n, config.m(), k, &approvals, groups, None)
}

fn check_ranks(m: usize, tau: usize) -> Result<()> {
    if (1..=m).contains(&tau) {
        Ok(())
    } else {
        Err(Error::BadParams(format!("tau = {tau} must lie in 1..={m}")))
    }
}

/// Upper bound on the probability that none of the top `s` reference items
/// lands in the top `tau` of a Mallows sample.
///
/// The probability is exactly 0 once `s > m - tau`, since the `s` items
/// cannot all fit below rank `tau`.
pub fn top_s_miss_bound(phi: f64, m: usize, tau: usize, s: usize) -> Result<f64> {
    check_phi(phi)?;
    check_ranks(m, tau)?;
    if s == 0 {
        return Err(Error::BadParams("s must be at least 1".into()));
    }
    if s > m - tau {
        return Ok(0.0);
    }
    let s = s as f64;
    if phi == 1.0 {
        return Ok((1.0 - tau as f64 / m as f64).powf(s));
    }
    let per_item =
        phi.powi(tau as i32) * (1.0 - phi.powi((m - tau) as i32)) / (1.0 - phi.powi(m as i32));
    Ok(per_item.powf(s))
}

/// A price bound that may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PriceBound {
    Finite(f64),
    Unbounded,
}

impl PriceBound {
    pub fn finite(&self) -> Option<f64> {
        match self {
            PriceBound::Finite(x) => Some(*x),
            PriceBound::Unbounded => None,
        }
    }
}

impl fmt::Display for PriceBound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PriceBound::Finite(x) => f.write_str(&format_sig(*x)),
            PriceBound::Unbounded => f.write_str("unbounded"),
        }
    }
}

/// The high-probability bound on the price of JR for a Mallows mixture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixturePriceBound {
    /// Top items taken from each component's reference ranking.
    pub per_group: usize,
    /// Size of the justifying set the bound relies on: `gamma * per_group`.
    pub q: usize,
    pub bound: PriceBound,
}

/// With probability at least `1 - delta`, the top `per_group` items of each
/// of the `gamma` reference rankings form a justifying set, so the price is
/// at most `k / (k - q)`; unbounded once `q >= k`.
///
/// `per_group` is clamped to at least 1: the set has to contain something
/// from each group even when the sampler is deterministic (`phi = 0`) or
/// every item is approved (`tau = m`).
pub fn mixture_price_bound(
    k: usize,
    gamma: usize,
    phi_max: f64,
    m: usize,
    tau: usize,
    delta: f64,
) -> Result<MixturePriceBound> {
    check_phi(phi_max)?;
    check_ranks(m, tau)?;
    if k == 0 || gamma == 0 {
        return Err(Error::BadParams("k and gamma must be at least 1".into()));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::BadParams(format!(
            "delta = {delta} must lie in (0, 1)"
        )));
    }
    let decay = if phi_max == 1.0 {
        (m as f64).ln() - ((m - tau) as f64).ln()
    } else {
        (-phi_max.powi(m as i32)).ln_1p()
            - tau as f64 * phi_max.ln()
            - (-phi_max.powi((m - tau) as i32)).ln_1p()
    };
    let needed = (k as f64 / delta).ln() / decay;
    let per_group = if needed.is_finite() {
        (needed.ceil() as usize).max(1)
    } else {
        1
    };
    let q = gamma.saturating_mul(per_group);
    let bound = if q >= k {
        PriceBound::Unbounded
    } else {
        PriceBound::Finite(k as f64 / (k - q) as f64)
    };
    Ok(MixturePriceBound {
        per_group,
        q,
        bound,
    })
}

/// Evenly spaced dispersions from `start` to `stop` inclusive.
///
/// Values are computed as `start + i * step` and snapped to 10 decimals so
/// grids like `0.1:1.0:0.05` hit their endpoints exactly.
pub fn phi_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    check_phi(start)?;
    check_phi(stop)?;
    if step.is_nan() || step <= 0.0 || stop < start {
        return Err(Error::BadParams(format!(
            "grid {start}:{stop}:{step} needs step > 0 and start <= stop"
        )));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count)
        .map(|i| {
            let phi = start + i as f64 * step;
            ((phi * 1e10).round() / 1e10).min(1.0)
        })
        .collect())
}

/// Parameters of a price sweep over dispersions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub tau: usize,
    /// Sampled instances per grid point.
    pub sims: usize,
    /// Confidence parameter of the overlaid bound.
    pub delta: f64,
    pub seed: u64,
}

impl Default for SweepConfig {
    /// Desk-scale version of the polarized two-group experiment.
    fn default() -> Self {
        Self {
            n: 100,
            m: 100,
            k: 10,
            tau: 25,
            sims: 100,
            delta: 0.05,
            seed: 0,
        }
    }
}

/// GreedyCC prices at one dispersion.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub phi: f64,
    /// Mean over instances with a defined price; `None` if there were none.
    pub mean_price: Option<f64>,
    pub max_price: Option<f64>,
    pub bound: MixturePriceBound,
    /// Instances whose GreedyCC score was 0.
    pub undefined_count: usize,
    /// Instances whose price exceeded a finite bound.
    pub bound_violations: usize,
}

impl SweepPoint {
    pub fn defined_count(&self, sims: usize) -> usize {
        sims - self.undefined_count
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationReport {
    pub config: SweepConfig,
    pub rule: String,
    pub points: Vec<SweepPoint>,
}

/// The generator for instance `instance` at grid point `phi_index`.
///
/// Each instance gets its own ChaCha stream so parallel and serial runs
/// draw identical samples.
pub fn instance_rng(seed: u64, phi_index: usize, instance: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((phi_index as u64) << 32) | instance as u64);
    rng
}

/// Samples `config.sims` polarized instances at every dispersion and records
/// the GreedyCC price under `rule`, alongside the mixture bound.
pub fn run_price_sweep(
    config: &SweepConfig,
    phis: &[f64],
    rule: &dyn ScoringRule,
) -> Result<SimulationReport> {
    let points = phis
        .iter()
        .enumerate()
        .map(|(phi_index, &phi)| sweep_point(config, phi_index, phi, rule))
        .collect::<Result<_>>()?;
    Ok(SimulationReport {
        config: *config,
        rule: rule.name().to_string(),
        points,
    })
}

fn sweep_point(
    config: &SweepConfig,
    phi_index: usize,
    phi: f64,
    rule: &dyn ScoringRule,
) -> Result<SweepPoint> {
    let mixture = MallowsMixtureConfig::polarized(phi, config.m, config.tau)?;
    let bound = mixture_price_bound(
        config.k,
        mixture.gamma(),
        mixture.phi_max(),
        config.m,
        config.tau,
        config.delta,
    )?;
    let prices = (0..config.sims)
        .into_par_iter()
        .map(|index| {
            let mut rng = instance_rng(config.seed, phi_index, index);
            let instance = sample_mixture_instance(&mixture, config.n, config.k, &mut rng)?;
            let scores = ItemScores::compute(rule, &instance)?;
            let report = price_of_jr_with(&instance, &scores, rule.name(), PriceMethod::Greedy)?;
            Ok(report.price.to_f64())
        })
        .collect::<Result<Vec<Option<f64>>>>()?;

    let defined: Vec<f64> = prices.iter().flatten().copied().collect();
    let undefined_count = prices.len() - defined.len();
    let mean_price =
        (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
    let max_price = defined.iter().copied().reduce(f64::max);
    let bound_violations = match bound.bound {
        PriceBound::Finite(b) => defined.iter().filter(|&&p| p > b).count(),
        PriceBound::Unbounded => 0,
    };
    Ok(SweepPoint {
        phi,
        mean_price,
        max_price,
        bound,
        undefined_count,
        bound_violations,
    })
}

impl SimulationReport {
    pub const CSV_HEADER: &'static str = "phi,mean_price,max_price,bound,s,undefined_count";

    /// One row per grid point. Missing means are `NA` and infinite bounds
    /// are `unbounded`.
    pub fn to_csv(&self) -> String {
        let na = |x: Option<f64>| x.map_or_else(|| "NA".to_string(), format_sig);
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for p in &self.points {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                format_sig(p.phi),
                na(p.mean_price),
                na(p.max_price),
                p.bound.bound,
                self.config.sims,
                p.undefined_count
            );
        }
        out
    }

    /// Line plot of mean price (solid), max price (dotted) and the bound
    /// (dash-dot, broken where it is infinite) against dispersion.
    pub fn to_svg(&self) -> String {
        const W: f64 = 640.0;
        const H: f64 = 400.0;
        const PAD: f64 = 50.0;
        let phis: Vec<f64> = self.points.iter().map(|p| p.phi).collect();
        let (x_lo, x_hi) = phis
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
                (lo.min(x), hi.max(x))
            });
        let (x_lo, x_hi) = if x_lo < x_hi {
            (x_lo, x_hi)
        } else {
            (x_lo - 0.5, x_lo + 0.5)
        };
        let y_hi = self
            .points
            .iter()
            .flat_map(|p| [p.mean_price, p.max_price, p.bound.bound.finite()])
            .flatten()
            .fold(1.0_f64, f64::max)
            * 1.05;
        let y_lo = 1.0;
        let sx = |x: f64| PAD + (x - x_lo) / (x_hi - x_lo) * (W - 2.0 * PAD);
        let sy = |y: f64| H - PAD - (y.clamp(y_lo, y_hi) - y_lo) / (y_hi - y_lo) * (H - 2.0 * PAD);

        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
        );
        let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(
            out,
            r#"<path d="M{PAD},{PAD} V{} H{}" fill="none" stroke="black"/>"#,
            H - PAD,
            W - PAD
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">dispersion phi ({} to {})</text>"#,
            W / 2.0,
            H - 15.0,
            format_sig(x_lo),
            format_sig(x_hi)
        );
        let _ = writeln!(
            out,
            r#"<text x="15" y="{}" font-size="12" transform="rotate(-90 15 {})" text-anchor="middle">GreedyCC price, {} (1 to {})</text>"#,
            H / 2.0,
            H / 2.0,
            self.rule,
            format_sig(y_hi)
        );
        type Accessor = fn(&SweepPoint) -> Option<f64>;
        let series: [(&str, &str, Accessor); 3] = [
            ("mean", "", |p| p.mean_price),
            ("max", r#" stroke-dasharray="2,4""#, |p| p.max_price),
            ("bound", r#" stroke-dasharray="10,4,2,4""#, |p| {
                p.bound.bound.finite()
            }),
        ];
        for (name, dash, value) in &series {
            let mut d = String::new();
            let mut pen_down = false;
            for p in &self.points {
                match value(p) {
                    Some(y) => {
                        let cmd = if pen_down { 'L' } else { 'M' };
                        let _ = write!(d, "{cmd}{:.2},{:.2} ", sx(p.phi), sy(y));
                        pen_down = true;
                    }
                    None => pen_down = false,
                }
            }
            if !d.is_empty() {
                let _ = writeln!(
                    out,
                    r#"<path class="{name}" d="{}" fill="none" stroke="black"{dash}/>"#,
                    d.trim_end()
                );
            }
        }
        out.push_str("</svg>\n");
        out
    }
}
