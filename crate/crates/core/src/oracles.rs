//! Constructive subsource oracles.
//!
//! Each oracle returns an explicit witness event inside the input source.
//! The `check_*` functions recompute every postcondition from the
//! materialised witness and never look at how it was built.

use std::collections::{BTreeMap, BTreeSet};

use num::Zero;
use serde::Serialize;

use crate::bits::{BitString, TreeNode};
use crate::error::{Error, Result};
use crate::source::{log2_mass, ExplicitSource, Fiber, Mass, SubsourceHandle, TOLERANCE};
use crate::tree::{block_threshold, h_threshold, validate_structure, EntropyTree, Label};

/// Outcome of [`fix_function_subsource`].
#[derive(Debug, Clone)]
pub struct FixOutcome<'a> {
    pub value: BitString,
    pub witness: SubsourceHandle<'a>,
}

/// Conditions on the heaviest preimage class of `f`, ties going to the
/// smallest value.
pub fn fix_function_subsource<F>(src: &ExplicitSource, m: usize, f: F) -> Result<FixOutcome<'_>>
where
    F: Fn(&BitString) -> BitString,
{
    let mut classes: BTreeMap<BitString, (Mass, Vec<BitString>)> = BTreeMap::new();
    for (x, p) in src.atoms() {
        let y = f(x);
        if y.len() != m {
            return Err(Error::LengthMismatch { expected: m, found: y.len() });
        }
        let e = classes.entry(y).or_insert_with(|| (Mass::zero(), Vec::new()));
        e.0 += p;
        e.1.push(x.clone());
    }
    let mut best: Option<(&BitString, &(Mass, Vec<BitString>))> = None;
    for entry in &classes {
        if best.map_or(true, |(_, b)| entry.1 .0 > b.0) {
            best = Some(entry);
        }
    }
    let (value, (_, members)) = best.expect("sources are non-empty");
    Ok(FixOutcome { value: value.clone(), witness: src.condition(members)? })
}

/// Exact recheck of a fixing: `f` constant on the witness and deficiency at
/// most `m` and at most `log2` of the number of distinct values of `f`.
pub fn check_fix<F>(src: &ExplicitSource, m: usize, f: F, out: &FixOutcome<'_>) -> bool
where
    F: Fn(&BitString) -> BitString,
{
    let w = out.witness.materialize();
    let constant = w.support().all(|x| f(x) == out.value);
    let distinct: BTreeSet<BitString> = src.support().map(&f).collect();
    let class_mass: Mass = src.atoms().filter(|(x, _)| f(x) == out.value).map(|(_, p)| p.clone()).sum();
    constant
        && class_mass == *out.witness.mass()
        && out.witness.deficiency_at_most(m as f64)
        && out.witness.deficiency() <= (distinct.len() as f64).log2() + TOLERANCE
}

/// Which rule produced the bucket witness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SplitRoute {
    /// Union of the whole fibres of a bucket with mass at least 1/2.
    WholeBucket,
    /// Fibres trimmed to move their conditional entropy into the bucket.
    Trimmed,
    /// Heaviest bucket; the deficiency bound is not met.
    Overrun,
}

#[derive(Debug, Clone)]
pub struct SplitOutcome<'a> {
    pub bucket: usize,
    pub route: SplitRoute,
    pub witness: SubsourceHandle<'a>,
}

fn check_thresholds(n: usize, tau1: f64, tau2: f64) -> Result<()> {
    if !(0.0 < tau1 && tau1 < tau2 && tau2 < n as f64) {
        return Err(Error::InvalidThresholds { tau1, tau2, n });
    }
    Ok(())
}

fn bucket_of(c: f64, tau1: f64, tau2: f64) -> usize {
    if c < tau1 - TOLERANCE {
        0
    } else if c < tau2 - TOLERANCE {
        1
    } else {
        2
    }
}

/// Interval `[lo, hi]` of conditional entropies admitted in `bucket`.
pub fn bucket_range(n: usize, tau1: f64, tau2: f64, bucket: usize) -> (f64, f64) {
    let taus = [0.0, tau1, tau2, n as f64];
    (taus[bucket], taus[bucket + 1])
}

/// Partitions the supported left values by conditional right min-entropy and
/// returns a deficiency-1 witness inside one bucket when one exists.
pub fn split_by_conditional_entropy(src: &ExplicitSource, tau1: f64, tau2: f64) -> Result<SplitOutcome<'_>> {
    check_thresholds(src.n(), tau1, tau2)?;
    let fibers = src.fibers()?;
    let mut buckets: [Vec<&Fiber>; 3] = Default::default();
    for f in &fibers {
        buckets[bucket_of(f.conditional_min_entropy(), tau1, tau2)].push(f);
    }
    let half = Mass::new(1.into(), 2.into());
    let masses: Vec<Mass> = buckets.iter().map(|b| b.iter().map(|f| f.mass.clone()).sum()).collect();

    let whole = |bucket: usize| -> Result<SubsourceHandle<'_>> {
        src.condition(buckets[bucket].iter().flat_map(|f| f.atoms.iter().map(|(r, _)| f.left.concat(r))).collect::<Vec<_>>().iter())
    };
    if let Some(bucket) = (0..3).find(|&i| masses[i] >= half) {
        return Ok(SplitOutcome { bucket, route: SplitRoute::WholeBucket, witness: whole(bucket)? });
    }

    let k = src.min_entropy();
    for bucket in 0..3 {
        let (lo, hi) = bucket_range(src.n(), tau1, tau2, bucket);
        let event: Vec<BitString> = fibers.iter().flat_map(|f| trim_fiber(f, lo, hi).into_iter().map(move |r| f.left.concat(&r))).collect();
        if event.is_empty() {
            continue;
        }
        let witness = src.condition(&event)?;
        if !witness.deficiency_at_most(1.0) {
            continue;
        }
        let left = witness.materialize().left_marginal()?;
        if left.min_entropy() + hi >= k - 1.0 - TOLERANCE {
            return Ok(SplitOutcome { bucket, route: SplitRoute::Trimmed, witness });
        }
    }

    let heaviest = (0..3).fold(0, |b, i| if masses[i] > masses[b] { i } else { b });
    Ok(SplitOutcome { bucket: heaviest, route: SplitRoute::Overrun, witness: whole(heaviest)? })
}

/// Largest-mass subset of a fibre whose conditional min-entropy lies in
/// `[lo, hi]`, found greedily over the choice of the top kept atom.
fn trim_fiber(f: &Fiber, lo: f64, hi: f64) -> Vec<BitString> {
    let mut atoms: Vec<&(BitString, Mass)> = f.atoms.iter().collect();
    atoms.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let mut best: Option<(Mass, Vec<BitString>)> = None;
    for top in 0..atoms.len() {
        let p_top = &atoms[top].1;
        let mut kept = p_top.clone();
        let mut chosen = vec![atoms[top].0.clone()];
        for (r, p) in &atoms[top + 1..] {
            let next = &kept + p;
            // conditional entropy log2(kept / p_top) must stay <= hi
            if log2_mass(&(&next / p_top)) <= hi + TOLERANCE {
                kept = next;
                chosen.push(r.clone());
            }
        }
        let entropy = log2_mass(&(&kept / p_top));
        if entropy >= lo - TOLERANCE && best.as_ref().map_or(true, |(m, _)| kept > *m) {
            best = Some((kept, chosen));
        }
    }
    best.map(|(_, c)| c).unwrap_or_default()
}

/// Exact recheck of the three split postconditions.
#[derive(Debug, Clone, Serialize)]
pub struct SplitCheck {
    pub deficiency: f64,
    pub conditional_range: (f64, f64),
    pub left_min_entropy: f64,
    pub deficiency_ok: bool,
    pub conditionals_ok: bool,
    pub left_ok: bool,
}

impl SplitCheck {
    pub fn pass(&self) -> bool {
        self.deficiency_ok && self.conditionals_ok && self.left_ok
    }
}

pub fn check_split(src: &ExplicitSource, tau1: f64, tau2: f64, out: &SplitOutcome<'_>) -> Result<SplitCheck> {
    let w = out.witness.materialize();
    let (lo, hi) = bucket_range(src.n(), tau1, tau2, out.bucket);
    let conds: Vec<f64> = w.fibers()?.iter().map(Fiber::conditional_min_entropy).collect();
    let cmin = conds.iter().copied().fold(f64::INFINITY, f64::min);
    let cmax = conds.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let left = w.left_marginal()?.min_entropy();
    Ok(SplitCheck {
        deficiency: out.witness.deficiency(),
        conditional_range: (cmin, cmax),
        left_min_entropy: left,
        deficiency_ok: out.witness.deficiency_at_most(1.0),
        conditionals_ok: cmin >= lo - TOLERANCE && cmax <= hi + TOLERANCE,
        left_ok: left + hi >= src.min_entropy() - 1.0 - TOLERANCE,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ThreeCase {
    LeftHeavy,
    BlockSource,
    LeftFixed,
}

#[derive(Debug, Clone)]
pub struct ThreeTypesOutcome<'a> {
    pub case: ThreeCase,
    pub witness: SubsourceHandle<'a>,
    /// Whether the witness meets the deficiency-1 budget.
    pub within_budget: bool,
}

/// `(sqrt(k), k - sqrt(k) - 1)`, rejecting the degenerate range.
pub fn three_type_thresholds(k: f64) -> Result<(f64, f64)> {
    let tau1 = k.sqrt();
    let tau2 = k - tau1 - 1.0;
    if tau1 >= tau2 {
        return Err(Error::DegenerateThresholds { k });
    }
    Ok((tau1, tau2))
}

/// Classifies a subsource of an `(n, k)`-source as left-heavy, a
/// `sqrt(k)`-block-source, or left-fixed with a high-entropy right half.
pub fn three_types(src: &ExplicitSource, k: f64) -> Result<ThreeTypesOutcome<'_>> {
    let actual = src.min_entropy();
    if k <= 1.0 || actual < k - TOLERANCE {
        return Err(Error::EntropyPrecondition { required: k.max(1.0), actual });
    }
    let (tau1, tau2) = three_type_thresholds(k)?;
    let split = split_by_conditional_entropy(src, tau1, tau2)?;
    let within = split.route != SplitRoute::Overrun;
    let (case, witness) = match split.bucket {
        0 => (ThreeCase::LeftHeavy, split.witness),
        1 => (ThreeCase::BlockSource, split.witness),
        _ => {
            let w = split.witness.materialize();
            if w.block_report()?.is_block(tau1) {
                (ThreeCase::BlockSource, split.witness)
            } else {
                let heaviest = w.fibers()?.into_iter().fold(None::<Fiber>, |best, f| match best {
                    Some(b) if b.mass >= f.mass => Some(b),
                    _ => Some(f),
                });
                let left = heaviest.expect("non-empty").left;
                let h = src.n() / 2;
                (ThreeCase::LeftFixed, split.witness.refine(|x| x.slice(0, h) == left)?)
            }
        }
    };
    let within_budget = within && witness.deficiency_at_most(1.0);
    if !within_budget {
        if let Some((case, witness)) = unions_of_buckets(src, tau1, tau2)? {
            return Ok(ThreeTypesOutcome { case, witness, within_budget: true });
        }
    }
    Ok(ThreeTypesOutcome { case, witness, within_budget })
}

/// The whole source or a union of conditional-entropy buckets of mass at
/// least 1/2 that is already left-heavy or a `tau1`-block-source.
fn unions_of_buckets(src: &ExplicitSource, tau1: f64, tau2: f64) -> Result<Option<(ThreeCase, SubsourceHandle<'_>)>> {
    let fibers = src.fibers()?;
    let buckets: Vec<usize> = fibers.iter().map(|f| bucket_of(f.conditional_min_entropy(), tau1, tau2)).collect();
    // the full mask comes first so the whole source is preferred
    for mask in [7u8, 3, 5, 6, 1, 2, 4] {
        let event: Vec<BitString> = fibers
            .iter()
            .zip(&buckets)
            .filter(|(_, b)| mask >> **b & 1 == 1)
            .flat_map(|(f, _)| f.atoms.iter().map(|(r, _)| f.left.concat(r)))
            .collect();
        if event.is_empty() {
            continue;
        }
        let handle = src.condition(&event)?;
        if !handle.deficiency_at_most(1.0) {
            continue;
        }
        let w = handle.materialize();
        if w.left_marginal()?.min_entropy() >= tau2 - TOLERANCE {
            return Ok(Some((ThreeCase::LeftHeavy, handle)));
        }
        if w.block_report()?.is_block(tau1) {
            return Ok(Some((ThreeCase::BlockSource, handle)));
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, Serialize)]
pub struct ThreeTypesCheck {
    pub case: ThreeCase,
    pub deficiency: f64,
    pub case_ok: bool,
    pub deficiency_ok: bool,
}

impl ThreeTypesCheck {
    pub fn pass(&self) -> bool {
        self.case_ok && self.deficiency_ok
    }
}

pub fn check_three_types(k: f64, out: &ThreeTypesOutcome<'_>) -> Result<ThreeTypesCheck> {
    let w = out.witness.materialize();
    let left = w.left_marginal()?;
    let floor = k - k.sqrt() - 1.0 - TOLERANCE;
    let case_ok = match out.case {
        ThreeCase::LeftHeavy => left.min_entropy() >= floor,
        ThreeCase::BlockSource => w.block_report()?.is_block(k.sqrt()),
        ThreeCase::LeftFixed => left.constant_value().is_some() && w.right_marginal()?.min_entropy() >= floor,
    };
    Ok(ThreeTypesCheck {
        case: out.case,
        deficiency: out.witness.deficiency(),
        case_ok,
        deficiency_ok: out.witness.deficiency_at_most(1.0),
    })
}

#[derive(Debug, Clone)]
pub struct TreeDiscovery<'a> {
    pub tree: EntropyTree,
    pub witness: SubsourceHandle<'a>,
    pub budget_used: f64,
    pub budget_bound: f64,
    /// Largest `k` for which the witness carries the tree's structure.
    pub structure_k: f64,
}

/// Digs for nested block-sources by repeated three-way splits, labelling the
/// nodes it passes through.
pub fn find_entropy_tree(src: &ExplicitSource, k: f64, levels: usize) -> Result<TreeDiscovery<'_>> {
    if !(1..=3).contains(&levels) {
        return Err(Error::Config(format!("levels must be 1, 2 or 3, got {levels}")));
    }
    let n = src.n();
    if !n.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(n));
    }
    let actual = src.min_entropy();
    if actual < k - TOLERANCE {
        return Err(Error::EntropyPrecondition { required: k, actual });
    }
    let depth = n.trailing_zeros() as usize;
    let mut tree = EntropyTree::new(depth, levels);
    let mut current = src.whole();
    let mut start = TreeNode::root();

    for &block in &Label::BLOCKS[..levels] {
        let mut v = start.clone();
        let found = loop {
            if v.depth() >= depth {
                return Err(Error::DigExhausted { branch: v.to_string() });
            }
            let local = current.materialize().marginalize(&v)?;
            let kv = local.min_entropy();
            if kv > TOLERANCE && local.block_report()?.is_block(kv.sqrt()) {
                break v;
            }
            let outcome = match three_types(&local, kv) {
                Ok(o) => o,
                Err(Error::DegenerateThresholds { .. } | Error::EntropyPrecondition { .. }) => {
                    return Err(Error::DigExhausted { branch: v.to_string() });
                }
                Err(e) => return Err(e),
            };
            let keep: BTreeSet<BitString> = outcome.witness.event().clone();
            let (start_bit, end_bit) = crate::bits::node_range(n, &v)?;
            current = current.refine(|x| keep.contains(&x.slice(start_bit, end_bit)))?;
            match outcome.case {
                ThreeCase::BlockSource => break v,
                ThreeCase::LeftHeavy => {
                    tree.set(v.clone(), Label::H);
                    v = v.left();
                }
                ThreeCase::LeftFixed => {
                    tree.set(v.clone(), Label::H);
                    tree.set(v.left(), Label::F);
                    v = v.right();
                }
            }
        };
        tree.set(found.clone(), block);
        start = found.left();
    }

    let budget_bound = (levels * depth) as f64;
    let budget_used = current.deficiency();
    if budget_used > budget_bound + TOLERANCE {
        return Err(Error::BudgetExceeded { used: budget_used, bound: budget_bound });
    }
    let structure_k = structure_entropy(&current.materialize(), &tree)?;
    Ok(TreeDiscovery { tree, witness: current, budget_used, budget_bound, structure_k })
}

/// Largest `k` at which `src` satisfies every entropy requirement of `t`.
pub fn structure_entropy(src: &ExplicitSource, t: &EntropyTree) -> Result<f64> {
    let mut k = f64::INFINITY;
    for (node, label) in t.labels() {
        let marginal = src.marginalize(node)?;
        let bound = match label {
            Label::F => continue,
            Label::H => {
                let me = marginal.min_entropy();
                // invert the threshold map, which is k, sqrt(k) or k^(1/4)
                let exponent = (h_threshold(t, node, 16.0)).log2() / 4.0;
                me.powf(1.0 / exponent)
            }
            _ => {
                let kb = marginal.block_report()?.block_entropy();
                let exponent = block_threshold(label, 16.0).log2() / 4.0;
                kb.powf(1.0 / exponent)
            }
        };
        k = k.min(bound);
    }
    Ok(if k.is_finite() { k } else { 0.0 })
}

/// Validates a discovery against its own witness.
pub fn check_discovery(d: &TreeDiscovery<'_>) -> Result<bool> {
    let report = validate_structure(&d.witness.materialize(), &d.tree, d.structure_k * (1.0 - 1e-12), 0.0)?;
    Ok(report.pass && d.budget_used <= d.budget_bound + TOLERANCE)
}

/// Exact recheck of the min-entropy drop of a subsource: at most its
/// deficiency.
pub fn check_entropy_drop(src: &ExplicitSource, witness: &SubsourceHandle<'_>) -> bool {
    // max_x p(x)/Pr[A] <= max p / Pr[A] gives H(X|A) >= H(X) - deficiency
    let w = witness.materialize();
    let lhs = w.max_mass();
    let rhs = src.max_mass() / witness.mass();
    lhs <= rhs
}
