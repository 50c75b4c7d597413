//! Challenge-response: a challenge is answered `Fixed` when it appears as a
//! row of the somewhere-extractor output, `HasEnt` otherwise.

use num::Zero;
use rand::Rng as _;
use rayon::prelude::*;
use serde::Serialize;

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::extract::{se_rows, SomewhereExtractor};
use crate::rng::{self, Rng};
use crate::source::{mass_to_f64, ExplicitSource, Mass, SubsourceRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Verdict {
    Fixed,
    HasEnt,
}

pub fn respond(x: &BitString, y: &BitString, ch: &BitString, se: &dyn SomewhereExtractor) -> Result<Verdict> {
    if ch.len() != se.row_width() {
        return Err(Error::WidthMismatch { expected: se.row_width(), found: ch.len() });
    }
    let rows = se_rows(se, x, y)?;
    Ok(if rows.iter().any(|r| r == ch) { Verdict::Fixed } else { Verdict::HasEnt })
}

/// Wilson score interval at 95% confidence.
pub fn wilson_interval(successes: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054_f64;
    let n = trials as f64;
    let p = successes as f64 / n;
    let denom = 1.0 + z * z / n;
    let centre = (p + z * z / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchStatus {
    /// The full sources already answer `Fixed` on every pair.
    Whole,
    /// Found by exhaustive search over events of the smaller support.
    Found,
    /// No witness found, or the supports are too large to search.
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Witnesses {
    pub x: SubsourceRecord,
    pub y: SubsourceRecord,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BranchFixedReport {
    /// Exact `Pr[Fixed]` over the full sources.
    pub pr_fixed: f64,
    pub ci95: (f64, f64),
    pub challenge: BitString,
    pub status: SearchStatus,
    pub deficiency_bound: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witnesses: Option<Witnesses>,
    pub verified: bool,
}

/// Largest support searched exhaustively on the smaller side.
pub const SEARCH_LIMIT: usize = 20;

/// Looks for subsources of deficiency at most `2 * width` on which the
/// responder always answers `Fixed` to a constant challenge.
pub fn branch_fixed_test<C>(x: &ExplicitSource, y: &ExplicitSource, ch: C, se: &dyn SomewhereExtractor) -> Result<BranchFixedReport>
where
    C: Fn(&BitString, &BitString) -> BitString,
{
    let xs: Vec<(&BitString, &Mass)> = x.atoms().collect();
    let ys: Vec<(&BitString, &Mass)> = y.atoms().collect();
    let a = ch(xs[0].0, ys[0].0);
    let mut fixed = vec![vec![false; ys.len()]; xs.len()];
    let mut pr = Mass::zero();
    for (i, (xv, p)) in xs.iter().enumerate() {
        for (j, (yv, q)) in ys.iter().enumerate() {
            if ch(xv, yv) != a {
                return Err(Error::ChallengeNotConstant);
            }
            if respond(xv, yv, &a, se)? == Verdict::Fixed {
                fixed[i][j] = true;
                pr += *p * *q;
            }
        }
    }
    let bound = 2.0 * se.row_width() as f64;
    let pr_fixed = mass_to_f64(&pr);
    let mut report = BranchFixedReport {
        pr_fixed,
        ci95: (pr_fixed, pr_fixed),
        challenge: a.clone(),
        status: SearchStatus::Inconclusive,
        deficiency_bound: bound,
        witnesses: None,
        verified: false,
    };

    let found = if fixed.iter().all(|row| row.iter().all(|&f| f)) {
        Some((SearchStatus::Whole, (0..xs.len()).collect(), (0..ys.len()).collect()))
    } else {
        search_rectangle(&fixed, &xs, &ys, bound).map(|(ra, rb)| (SearchStatus::Found, ra, rb))
    };
    if let Some((status, rows, cols)) = found {
        let wx = x.condition(rows.iter().map(|&i| xs[i].0))?;
        let wy = y.condition(cols.iter().map(|&j| ys[j].0))?;
        // re-evaluate every pair of the witnesses from scratch
        let mut all_fixed = true;
        for xv in wx.event() {
            for yv in wy.event() {
                all_fixed &= respond(xv, yv, &ch(xv, yv), se)? == Verdict::Fixed;
            }
        }
        report.verified = all_fixed && wx.deficiency_at_most(bound) && wy.deficiency_at_most(bound);
        report.status = status;
        report.witnesses = Some(Witnesses { x: wx.to_record(), y: wy.to_record() });
    }
    Ok(report)
}

/// Exhaustive search over row subsets of the smaller side for an all-`Fixed`
/// rectangle with both sides of mass at least `2^-bound`.
fn search_rectangle(
    fixed: &[Vec<bool>],
    xs: &[(&BitString, &Mass)],
    ys: &[(&BitString, &Mass)],
    bound: f64,
) -> Option<(Vec<usize>, Vec<usize>)> {
    let transpose = xs.len() > ys.len();
    let (rows, cols) = if transpose { (ys, xs) } else { (xs, ys) };
    if rows.len() > SEARCH_LIMIT || cols.len() > 128 {
        return None;
    }
    let at = |r: usize, c: usize| if transpose { fixed[c][r] } else { fixed[r][c] };
    let masks: Vec<u128> = (0..rows.len()).map(|r| (0..cols.len()).filter(|&c| at(r, c)).fold(0u128, |m, c| m | 1 << c)).collect();
    let heavy = |set: &mut dyn Iterator<Item = usize>, side: &[(&BitString, &Mass)]| {
        let mass: Mass = set.map(|i| side[i].1.clone()).sum();
        crate::source::mass_at_least_pow2(&mass, bound)
    };
    let full = if cols.len() == 128 { u128::MAX } else { (1u128 << cols.len()) - 1 };
    for subset in 1u32..(1u32 << rows.len()) {
        let cover = (0..rows.len()).filter(|r| subset >> r & 1 == 1).fold(full, |m, r| m & masks[r]);
        if cover == 0 {
            continue;
        }
        let picked: Vec<usize> = (0..rows.len()).filter(|r| subset >> r & 1 == 1).collect();
        let covered: Vec<usize> = (0..cols.len()).filter(|c| cover >> c & 1 == 1).collect();
        if heavy(&mut picked.iter().copied(), rows) && heavy(&mut covered.iter().copied(), cols) {
            return Some(if transpose { (covered, picked) } else { (picked, covered) });
        }
    }
    None
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BranchEntropyReport {
    pub pr_fixed: f64,
    pub ci95: (f64, f64),
    pub trials: u64,
    pub fixed_count: u64,
    pub bound: f64,
    pub verified: bool,
}

/// Trials per random stream in [`branch_entropy_test`].
const CHUNK: u64 = 4096;

/// Empirical `Pr[Fixed]` over samples of the full sources. `ch` may draw
/// auxiliary randomness from the supplied generator. Passes when the upper
/// Wilson bound is at most `bound`.
pub fn branch_entropy_test<C>(
    x: &ExplicitSource,
    y: &ExplicitSource,
    ch: C,
    se: &dyn SomewhereExtractor,
    trials: u64,
    bound: f64,
    seed: u64,
) -> Result<BranchEntropyReport>
where
    C: Fn(&BitString, &BitString, &mut Rng) -> BitString + Sync,
{
    let (sx, sy) = (x.sampler(), y.sampler());
    let chunks = trials.div_ceil(CHUNK);
    let fixed_count = (0..chunks)
        .into_par_iter()
        .map(|c| -> Result<u64> {
            let mut r = rng::derive(seed, c);
            let count = CHUNK.min(trials - c * CHUNK);
            let mut hits = 0;
            for _ in 0..count {
                let (xv, yv) = (sx.sample(&mut r), sy.sample(&mut r));
                let challenge = ch(&xv, &yv, &mut r);
                hits += u64::from(respond(&xv, &yv, &challenge, se)? == Verdict::Fixed);
            }
            Ok(hits)
        })
        .collect::<Result<Vec<u64>>>()?
        .into_iter()
        .sum();
    let ci95 = wilson_interval(fixed_count, trials);
    Ok(BranchEntropyReport { pr_fixed: fixed_count as f64 / trials as f64, ci95, trials, fixed_count, bound, verified: ci95.1 <= bound })
}

/// A challenge of `width` fresh uniform bits, independent of the sample.
pub fn fresh_uniform(width: usize) -> impl Fn(&BitString, &BitString, &mut Rng) -> BitString + Sync {
    move |_, _, r| BitString::from_bits((0..width).map(|_| r.gen::<bool>()))
}

/// Largest distance to min-entropy `k` of a deterministic challenge over
/// random subsources of deficiency at most `d` on each side.
pub fn spot_check_challenge_entropy<C>(
    x: &ExplicitSource,
    y: &ExplicitSource,
    ch: C,
    width: usize,
    k: f64,
    d: f64,
    samples: usize,
    seed: u64,
) -> Result<f64>
where
    C: Fn(&BitString, &BitString) -> BitString,
{
    let mut r = rng::seeded(seed);
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let ex = random_event(x, d, &mut r)?;
        let ey = random_event(y, d, &mut r)?;
        let (mx, my) = (x.condition(&ex)?.materialize(), y.condition(&ey)?.materialize());
        let mut atoms = Vec::new();
        for (a, p) in mx.atoms() {
            for (b, q) in my.atoms() {
                atoms.push((ch(a, b), p * q));
            }
        }
        let dist = ExplicitSource::from_atoms(width, atoms)?;
        worst = worst.max(dist.distance_to_min_entropy(k.min(width as f64))?);
    }
    Ok(worst)
}

/// A random event of mass at least `2^-d`: support points are added in a
/// random order until the mass threshold is reached.
fn random_event(src: &ExplicitSource, d: f64, r: &mut Rng) -> Result<Vec<BitString>> {
    use rand::seq::SliceRandom;
    let mut points: Vec<(&BitString, &Mass)> = src.atoms().collect();
    points.shuffle(r);
    let target = r.gen_range(0.0..=d.max(0.0));
    let mut mass = Mass::zero();
    let mut event = Vec::new();
    for (x, p) in points {
        event.push(x.clone());
        mass += p;
        if crate::source::mass_at_least_pow2(&mass, target) {
            break;
        }
    }
    Ok(event)
}
