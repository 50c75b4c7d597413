//! Bipartite graphs from the first output bit and monochromatic rectangle
//! search.

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::pipeline::{subext, PipelineConfig};
use crate::rng;

/// Largest `n` for which the full adjacency matrix is built.
pub const MAX_GRAPH_BITS: usize = 12;

pub fn ramsey_edge(u: &BitString, v: &BitString, cfg: &PipelineConfig) -> Result<bool> {
    if cfg.m == 0 {
        return Err(Error::Config("graph edges need m >= 1".into()));
    }
    Ok(subext(u, v, cfg)?.bit(0))
}

/// Bipartite graph stored as a row-major adjacency matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BipartiteGraph {
    pub rows: Vec<Vec<bool>>,
}

impl BipartiteGraph {
    pub fn new(rows: Vec<Vec<bool>>) -> Result<Self> {
        let width = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != width) {
            return Err(Error::Config("ragged adjacency matrix".into()));
        }
        Ok(BipartiteGraph { rows })
    }

    pub fn constant(rows: usize, cols: usize, color: bool) -> Self {
        BipartiteGraph { rows: vec![vec![color; cols]; rows] }
    }

    pub fn random(rows: usize, cols: usize, seed: u64) -> Self {
        let mut r = rng::seeded(seed);
        BipartiteGraph { rows: (0..rows).map(|_| (0..cols).map(|_| r.gen()).collect()).collect() }
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn col_count(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn edge(&self, u: usize, v: usize) -> bool {
        self.rows[u][v]
    }

    /// Rows as `0`/`1` strings.
    pub fn to_strings(&self) -> Vec<String> {
        self.rows.iter().map(|r| r.iter().map(|&b| if b { '1' } else { '0' }).collect()).collect()
    }

    pub fn from_strings<S: AsRef<str>>(rows: &[S]) -> Result<Self> {
        let rows = rows
            .iter()
            .map(|r| {
                r.as_ref()
                    .chars()
                    .map(|c| match c {
                        '0' => Ok(false),
                        '1' => Ok(true),
                        other => Err(Error::Config(format!("bad adjacency character {other:?}"))),
                    })
                    .collect()
            })
            .collect::<Result<Vec<Vec<bool>>>>()?;
        Self::new(rows)
    }

    /// Is the `rows` x `cols` block monochromatic in `color`?
    pub fn is_rectangle(&self, rows: &[usize], cols: &[usize], color: bool) -> bool {
        rows.iter().all(|&u| cols.iter().all(|&v| self.rows[u][v] == color))
    }
}

/// Graph on `{0,1}^n x {0,1}^n` with edges from [`ramsey_edge`].
pub fn adjacency(cfg: &PipelineConfig) -> Result<BipartiteGraph> {
    if cfg.n > MAX_GRAPH_BITS {
        return Err(Error::Config(format!("adjacency is only built for n <= {MAX_GRAPH_BITS}")));
    }
    let vertices: Vec<BitString> = BitString::all(cfg.n).collect();
    let rows = vertices
        .par_iter()
        .map(|u| vertices.iter().map(|v| ramsey_edge(u, v, cfg)).collect::<Result<Vec<bool>>>())
        .collect::<Result<Vec<_>>>()?;
    BipartiteGraph::new(rows)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rectangle {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    pub color: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchMode {
    Exhaustive,
    Randomized,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase", tag = "result")]
pub enum RectangleOutcome {
    Found {
        rectangle: Rectangle,
        work: u128,
    },
    /// Exhaustive search certified that no rectangle exists.
    NoneExists,
    /// Randomized search gave up after its budget of attempts.
    NoneFound {
        attempts: u128,
    },
}

impl RectangleOutcome {
    pub fn rectangle(&self) -> Option<&Rectangle> {
        match self {
            RectangleOutcome::Found { rectangle, .. } => Some(rectangle),
            _ => None,
        }
    }
}

/// Binomial coefficient saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Calls `f` on every increasing `k`-subset of `0..n` until it returns
/// `false`.
fn for_each_subset(n: usize, k: usize, mut f: impl FnMut(&[usize]) -> bool) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        if !f(&idx) {
            return;
        }
        let Some(i) = (0..k).rev().find(|&i| idx[i] != i + n - k) else {
            return;
        };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Columns on which every row of `rows` has colour `color`.
fn common_columns(g: &BipartiteGraph, rows: &[usize], color: bool) -> Vec<usize> {
    (0..g.col_count()).filter(|&v| rows.iter().all(|&u| g.rows[u][v] == color)).collect()
}

fn exhaustive_cost(g: &BipartiteGraph, k: usize) -> u128 {
    binomial(g.row_count(), k).saturating_mul(binomial(g.col_count(), k))
}

fn check_budget(g: &BipartiteGraph, k: usize, budget: u128) -> Result<()> {
    let required = exhaustive_cost(g, k);
    if required > budget {
        return Err(Error::BudgetRefused { required, budget });
    }
    Ok(())
}

/// Searches for a `k x k` monochromatic rectangle. Exhaustive mode refuses
/// when `C(rows, k) * C(cols, k)` exceeds `budget`; randomized mode makes at
/// most `budget` greedy attempts.
pub fn rectangle_search(g: &BipartiteGraph, k: usize, mode: SearchMode, budget: u128, seed: u64) -> Result<RectangleOutcome> {
    if k == 0 {
        return Err(Error::Config("rectangle size must be at least 1".into()));
    }
    if k > g.row_count() || k > g.col_count() {
        return Ok(RectangleOutcome::NoneExists);
    }
    match mode {
        SearchMode::Exhaustive => {
            check_budget(g, k, budget)?;
            let mut found = None;
            let mut work = 0u128;
            for_each_subset(g.row_count(), k, |rows| {
                work += 1;
                for color in [true, false] {
                    let cols = common_columns(g, rows, color);
                    if cols.len() >= k {
                        found = Some(Rectangle { rows: rows.to_vec(), cols: cols[..k].to_vec(), color });
                        return false;
                    }
                }
                true
            });
            Ok(match found {
                Some(rectangle) => RectangleOutcome::Found { rectangle, work },
                None => RectangleOutcome::NoneExists,
            })
        }
        SearchMode::Randomized => randomized(g, k, budget, seed),
    }
}

/// Greedy growth: start from a random row and colour, then repeatedly add the
/// row that keeps the most common columns, breaking ties at random.
fn randomized(g: &BipartiteGraph, k: usize, attempts: u128, seed: u64) -> Result<RectangleOutcome> {
    let mut r = rng::seeded(seed);
    let mut order: Vec<usize> = (0..g.row_count()).collect();
    for attempt in 0..attempts {
        let start = r.gen_range(0..g.row_count());
        let color = g.rows[start][r.gen_range(0..g.col_count())];
        let mut rows = vec![start];
        let mut cols = common_columns(g, &rows, color);
        while rows.len() < k && cols.len() >= k {
            order.shuffle(&mut r);
            let best = order
                .iter()
                .filter(|u| !rows.contains(u))
                .map(|&u| (cols.iter().filter(|&&v| g.rows[u][v] == color).count(), u))
                .max_by_key(|p| p.0);
            let Some((_, u)) = best else { break };
            rows.push(u);
            cols.retain(|&v| g.rows[u][v] == color);
        }
        if rows.len() == k && cols.len() >= k {
            rows.sort_unstable();
            cols.truncate(k);
            return Ok(RectangleOutcome::Found { rectangle: Rectangle { rows, cols, color }, work: attempt + 1 });
        }
    }
    Ok(RectangleOutcome::NoneFound { attempts })
}

/// Number of `k x k` monochromatic rectangles, counted per row subset from
/// the common columns of each colour.
pub fn count_rectangles(g: &BipartiteGraph, k: usize, budget: u128) -> Result<u128> {
    if k == 0 {
        return Err(Error::Config("rectangle size must be at least 1".into()));
    }
    check_budget(g, k, budget)?;
    let mut total = 0u128;
    for_each_subset(g.row_count(), k, |rows| {
        for color in [true, false] {
            total += binomial(common_columns(g, rows, color).len(), k);
        }
        true
    });
    Ok(total)
}

/// `g` with a `k x k` rectangle of `color` written over random rows and
/// columns.
pub fn plant_rectangle(g: &BipartiteGraph, k: usize, color: bool, seed: u64) -> (BipartiteGraph, Rectangle) {
    let mut r = rng::seeded(seed);
    let mut rows: Vec<usize> = (0..g.row_count()).collect::<Vec<_>>().choose_multiple(&mut r, k).copied().collect();
    let mut cols: Vec<usize> = (0..g.col_count()).collect::<Vec<_>>().choose_multiple(&mut r, k).copied().collect();
    rows.sort_unstable();
    cols.sort_unstable();
    let mut out = g.clone();
    for &u in &rows {
        for &v in &cols {
            out.rows[u][v] = color;
        }
    }
    (out, Rectangle { rows, cols, color })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub seed: u64,
    pub rows: Vec<String>,
}

/// Random `size x size` graphs, one per seed.
pub fn corpus(size: usize, seeds: &[u64]) -> Vec<CorpusEntry> {
    seeds.iter().map(|&seed| CorpusEntry { seed, rows: BipartiteGraph::random(size, size, seed).to_strings() }).collect()
}
