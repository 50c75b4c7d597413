//! The three-step sub-extractor.
//!
//! Step 1 builds a `log2(n) x l` challenge matrix for every node of the tree
//! over `x` (and symmetrically over `y`) and follows favoured sons to get the
//! observed paths. Step 2 tests node-path challenges along the observed
//! x-path to pick `vMid`. Step 3 applies the block/weak extractor to
//! `x_vMid . x` against `y`.
//!
//! Trees have depth `log2(n)`, so paths hold `log2(n) + 1` nodes ending at a
//! one-bit leaf. Matrix rows are indexed by depth `0..log2(n)`; a leaf has no
//! row of its own and its matrix is all zero.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bits::{node_range, BitString, TreeNode};
use crate::challenge::Verdict;
use crate::error::{Error, Result};
use crate::extract::{pad_block, BlockWeakExtractor, ExtractorDescriptor, ExtractorKind, SomewhereExtractor};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ChallengeMatrix {
    pub rows: Vec<BitString>,
}

impl ChallengeMatrix {
    pub fn zeros(rows: usize, width: usize) -> Self {
        ChallengeMatrix { rows: vec![BitString::zeros(width); rows] }
    }

    /// Row-major concatenation.
    pub fn flatten(&self) -> BitString {
        self.rows.iter().fold(BitString::default(), |acc, r| acc.concat(r))
    }

    pub fn hex_rows(&self) -> Vec<String> {
        self.rows.iter().map(BitString::to_hex).collect()
    }
}

impl Serialize for ChallengeMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.hex_rows().serialize(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    X,
    Y,
}

/// Where the responder is being consulted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Site<'a> {
    /// Favoured-son decision at `node` of the tree over `side`.
    Favor { side: Side, node: &'a TreeNode },
    /// Step-2 test of `node` on the observed x-path.
    Mid { node: &'a TreeNode },
}

/// Supplies `Fixed`/`HasEnt` verdicts. The default answers by row membership
/// in a somewhere-extractor; tests substitute stubs.
pub trait Responder: Send + Sync + fmt::Debug {
    fn respond(&self, site: Site<'_>, first: &BitString, second: &BitString, challenge: &BitString) -> Result<Verdict>;
}

/// Row-membership responder with one somewhere-extractor per challenge width.
#[derive(Debug, Clone)]
pub struct SeResponder {
    pub step1: Arc<dyn SomewhereExtractor>,
    pub step2: Arc<dyn SomewhereExtractor>,
}

impl Responder for SeResponder {
    fn respond(&self, site: Site<'_>, first: &BitString, second: &BitString, challenge: &BitString) -> Result<Verdict> {
        let se = match site {
            Site::Favor { .. } => &self.step1,
            Site::Mid { .. } => &self.step2,
        };
        crate::challenge::respond(first, second, challenge, se.as_ref())
    }
}

/// Serialised pipeline choice; extractor shapes are filled in from `n`, `l`
/// and `m`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineDescriptor {
    pub n: usize,
    pub l: usize,
    pub m: usize,
    pub bext: ExtractorDescriptor,
    pub se: ExtractorDescriptor,
}

impl PipelineDescriptor {
    pub fn new(n: usize, l: usize, m: usize, bext: ExtractorDescriptor, se: ExtractorDescriptor) -> Self {
        PipelineDescriptor { n, l, m, bext, se }
    }

    pub fn table(n: usize, l: usize, m: usize, seed: u64) -> Self {
        Self::new(n, l, m, ExtractorDescriptor::table(seed), ExtractorDescriptor::new(ExtractorKind::SeRot))
    }
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub descriptor: PipelineDescriptor,
    pub n: usize,
    pub log_n: usize,
    pub l: usize,
    pub l_prime: usize,
    pub m: usize,
    pub bext1: Arc<dyn BlockWeakExtractor>,
    pub bext2: Arc<dyn BlockWeakExtractor>,
    pub bext3: Arc<dyn BlockWeakExtractor>,
    pub responder: Arc<dyn Responder>,
}

/// `max(1, floor(l / log2(n)^3))`.
pub fn l_prime(l: usize, log_n: usize) -> usize {
    (l / log_n.pow(3).max(1)).max(1)
}

impl PipelineConfig {
    pub fn build(d: &PipelineDescriptor) -> Result<Self> {
        let n = d.n;
        if !n.is_power_of_two() || n < 2 {
            return Err(Error::NotPowerOfTwo(n));
        }
        if d.l == 0 || d.m == 0 {
            return Err(Error::Config("challenge width and output length must be positive".into()));
        }
        let log_n = n.trailing_zeros() as usize;
        let lp = l_prime(d.l, log_n);
        let bext1 = d.bext.with_shape(n, d.l).block_weak()?;
        let bext2 = d.bext.with_shape(n, lp).block_weak()?;
        let bext3 = d.bext.with_shape(2 * n, d.m).block_weak()?;
        let step1 = d.se.with_shape(n, log_n * d.l).somewhere()?;
        let step2 = d.se.with_shape(n, log_n * lp).somewhere()?;
        Ok(PipelineConfig {
            descriptor: d.clone(),
            n,
            log_n,
            l: d.l,
            l_prime: lp,
            m: d.m,
            bext1,
            bext2,
            bext3,
            responder: Arc::new(SeResponder { step1, step2 }),
        })
    }

    pub fn with_responder(mut self, responder: Arc<dyn Responder>) -> Self {
        self.responder = responder;
        self
    }

    fn check_inputs(&self, x: &BitString, y: &BitString) -> Result<()> {
        for s in [x, y] {
            if s.len() != self.n {
                return Err(Error::LengthMismatch { expected: self.n, found: s.len() });
            }
        }
        Ok(())
    }
}

/// Heap index of a node: root 0, sons of `i` at `2i + 1` and `2i + 2`.
fn heap_index(v: &TreeNode) -> usize {
    v.path().iter().fold(0, |i, &b| 2 * i + 1 + usize::from(b))
}

#[derive(Debug, Clone, Serialize)]
pub struct NodeDecision {
    pub node: TreeNode,
    pub matrix: ChallengeMatrix,
    /// `Some(true)` when the right son is favoured; `None` at leaves.
    pub favors_right: Option<bool>,
}

/// All challenge matrices of one tree, evaluated leaves first.
#[derive(Debug, Clone)]
pub struct TreeEvaluation {
    pub side: Side,
    pub nodes: Vec<NodeDecision>,
}

impl TreeEvaluation {
    pub fn get(&self, v: &TreeNode) -> &NodeDecision {
        &self.nodes[heap_index(v)]
    }

    /// Root-to-leaf walk through favoured sons.
    pub fn observed_path(&self) -> Vec<TreeNode> {
        let mut v = TreeNode::root();
        let mut path = vec![v.clone()];
        while let Some(right) = self.get(&v).favors_right {
            v = v.child(right);
            path.push(v.clone());
        }
        path
    }
}

/// Step 1 over the tree of `own`, challenged against `other`.
pub fn evaluate_tree(own: &BitString, other: &BitString, side: Side, cfg: &PipelineConfig) -> Result<TreeEvaluation> {
    cfg.check_inputs(own, other)?;
    let depth = cfg.log_n;
    let mut slots: Vec<Option<NodeDecision>> = vec![None; (2usize << depth) - 1];
    for d in (0..=depth).rev() {
        for v in TreeNode::level(d) {
            let decision = if d == depth {
                NodeDecision { node: v.clone(), matrix: ChallengeMatrix::zeros(depth, cfg.l), favors_right: None }
            } else {
                let (s, e) = node_range(cfg.n, &v)?;
                let xv = own.slice(s, e);
                let padded = pad_block(&xv, cfg.n)?;
                let left = slots[heap_index(&v.left())].as_ref().expect("sons first");
                let verdict = cfg.responder.respond(Site::Favor { side, node: &v }, &padded, other, &left.matrix.flatten())?;
                let right = verdict == Verdict::Fixed;
                let source = if right { slots[heap_index(&v.right())].as_ref().expect("sons first") } else { left };
                let mut rows = source.matrix.rows.clone();
                for row in rows.iter_mut().take(d) {
                    *row = BitString::zeros(cfg.l);
                }
                rows[d] = cfg.bext1.try_eval(&padded, other)?;
                NodeDecision { node: v.clone(), matrix: ChallengeMatrix { rows }, favors_right: Some(right) }
            };
            slots[heap_index(&v)] = Some(decision);
        }
    }
    Ok(TreeEvaluation { side, nodes: slots.into_iter().map(|s| s.expect("every node filled")).collect() })
}

/// `ch(x_v, y)` for one node, evaluating only the subtree of `v`.
pub fn challenge_matrix(x: &BitString, y: &BitString, v: &TreeNode, cfg: &PipelineConfig) -> Result<ChallengeMatrix> {
    subtree_matrix(x, y, Side::X, v, cfg)
}

/// The matrix of `v` in the tree over `own` on `side`.
pub fn subtree_matrix(own: &BitString, other: &BitString, side: Side, v: &TreeNode, cfg: &PipelineConfig) -> Result<ChallengeMatrix> {
    cfg.check_inputs(own, other)?;
    if v.depth() > cfg.log_n {
        return Err(Error::NodeTooDeep { depth: v.depth(), max: cfg.log_n });
    }
    fn rec(own: &BitString, other: &BitString, side: Side, v: &TreeNode, cfg: &PipelineConfig) -> Result<ChallengeMatrix> {
        let d = v.depth();
        if d == cfg.log_n {
            return Ok(ChallengeMatrix::zeros(d, cfg.l));
        }
        let (s, e) = node_range(cfg.n, v)?;
        let padded = pad_block(&own.slice(s, e), cfg.n)?;
        let left = rec(own, other, side, &v.left(), cfg)?;
        let verdict = cfg.responder.respond(Site::Favor { side, node: v }, &padded, other, &left.flatten())?;
        let mut rows = if verdict == Verdict::Fixed { rec(own, other, side, &v.right(), cfg)?.rows } else { left.rows };
        for row in rows.iter_mut().take(d) {
            *row = BitString::zeros(cfg.l);
        }
        rows[d] = cfg.bext1.try_eval(&padded, other)?;
        Ok(ChallengeMatrix { rows })
    }
    rec(own, other, side, v, cfg)
}

/// Whether `v` favours its right son in the tree over `own`.
pub fn favors_right(own: &BitString, other: &BitString, side: Side, v: &TreeNode, cfg: &PipelineConfig) -> Result<bool> {
    if v.depth() >= cfg.log_n {
        return Err(Error::NodeTooDeep { depth: v.depth() + 1, max: cfg.log_n });
    }
    let left = subtree_matrix(own, other, side, &v.left(), cfg)?;
    let (s, e) = node_range(cfg.n, v)?;
    let padded = pad_block(&own.slice(s, e), cfg.n)?;
    Ok(cfg.responder.respond(Site::Favor { side, node: v }, &padded, other, &left.flatten())? == Verdict::Fixed)
}

/// `(pObs, qObs)`.
pub fn observed_paths(x: &BitString, y: &BitString, cfg: &PipelineConfig) -> Result<(Vec<TreeNode>, Vec<TreeNode>)> {
    let p = evaluate_tree(x, y, Side::X, cfg)?.observed_path();
    let q = evaluate_tree(y, x, Side::Y, cfg)?.observed_path();
    Ok((p, q))
}

/// Row `j` is the width-`l'` extractor on `y` at the `j`-th path node
/// (block argument, padded) against `x_v` (weak argument, right-padded with
/// zeros to `n` bits).
pub fn node_path_challenge(x: &BitString, y: &BitString, v: &TreeNode, path: &[TreeNode], cfg: &PipelineConfig) -> Result<ChallengeMatrix> {
    cfg.check_inputs(x, y)?;
    if path.len() < cfg.log_n || !path[0].is_root() {
        return Err(Error::Config("node-path challenge needs a root-to-leaf path".into()));
    }
    let (s, e) = node_range(cfg.n, v)?;
    let weak = x.slice(s, e).pad_right(cfg.n);
    let rows = path[..cfg.log_n]
        .iter()
        .map(|w| {
            let (s, e) = node_range(cfg.n, w)?;
            cfg.bext2.eval_padded(&y.slice(s, e), &weak)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ChallengeMatrix { rows })
}

#[derive(Debug, Clone, Serialize)]
pub struct MidTest {
    pub node: TreeNode,
    pub challenge: ChallengeMatrix,
    pub verdict: Verdict,
}

/// Deepest node of `p` whose node-path challenge gets `HasEnt`; the root
/// when there is none.
pub fn observed_vmid(x: &BitString, y: &BitString, p: &[TreeNode], q: &[TreeNode], cfg: &PipelineConfig) -> Result<TreeNode> {
    Ok(mid_tests(x, y, p, q, cfg)?.0)
}

fn mid_tests(x: &BitString, y: &BitString, p: &[TreeNode], q: &[TreeNode], cfg: &PipelineConfig) -> Result<(TreeNode, Vec<MidTest>)> {
    let mut tests = Vec::with_capacity(p.len());
    for v in p {
        let challenge = node_path_challenge(x, y, v, q, cfg)?;
        let verdict = cfg.responder.respond(Site::Mid { node: v }, x, y, &challenge.flatten())?;
        tests.push(MidTest { node: v.clone(), challenge, verdict });
    }
    let vmid = tests.iter().rev().find(|t| t.verdict == Verdict::HasEnt).map_or_else(TreeNode::root, |t| t.node.clone());
    Ok((vmid, tests))
}

/// Step 3: `x_vMid` right-padded to `n` bits forms the left block, `x` the
/// right block; `y` gets `n` zeros appended.
pub fn output_step(x: &BitString, y: &BitString, vmid: &TreeNode, cfg: &PipelineConfig) -> Result<BitString> {
    let (s, e) = node_range(cfg.n, vmid)?;
    let block = x.slice(s, e).pad_right(cfg.n).concat(x);
    let weak = y.pad_right(2 * cfg.n);
    cfg.bext3.try_eval(&block, &weak)
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PipelineTrace {
    pub x: BitString,
    pub y: BitString,
    pub x_tree: Vec<NodeDecision>,
    pub y_tree: Vec<NodeDecision>,
    pub p_obs: Vec<TreeNode>,
    pub q_obs: Vec<TreeNode>,
    pub mid_tests: Vec<MidTest>,
    pub v_mid_obs: TreeNode,
    pub output: BitString,
}

pub fn subext_trace(x: &BitString, y: &BitString, cfg: &PipelineConfig) -> Result<PipelineTrace> {
    let tx = evaluate_tree(x, y, Side::X, cfg)?;
    let ty = evaluate_tree(y, x, Side::Y, cfg)?;
    let (p, q) = (tx.observed_path(), ty.observed_path());
    let (vmid, tests) = mid_tests(x, y, &p, &q, cfg)?;
    let output = output_step(x, y, &vmid, cfg)?;
    Ok(PipelineTrace {
        x: x.clone(),
        y: y.clone(),
        x_tree: tx.nodes,
        y_tree: ty.nodes,
        p_obs: p,
        q_obs: q,
        mid_tests: tests,
        v_mid_obs: vmid,
        output,
    })
}

pub fn subext(x: &BitString, y: &BitString, cfg: &PipelineConfig) -> Result<BitString> {
    let (p, q) = observed_paths(x, y, cfg)?;
    let vmid = observed_vmid(x, y, &p, &q, cfg)?;
    output_step(x, y, &vmid, cfg)
}

/// Trace invariants: zero rows above each node's depth, root-to-leaf
/// favoured paths and `vMid` on `pObs`. Returns the violated rules.
pub fn check_trace(t: &PipelineTrace, cfg: &PipelineConfig) -> Vec<String> {
    let mut bad = Vec::new();
    for (name, tree) in [("x", &t.x_tree), ("y", &t.y_tree)] {
        for d in tree {
            if d.matrix.rows.len() != cfg.log_n || d.matrix.rows.iter().any(|r| r.len() != cfg.l) {
                bad.push(format!("{name}-tree node '{}' has a malformed matrix", d.node));
            }
            if d.matrix.rows.iter().take(d.node.depth()).any(|r| !r.is_zero()) {
                bad.push(format!("{name}-tree node '{}' has a non-zero row above its depth", d.node));
            }
        }
    }
    for (name, path, tree) in [("pObs", &t.p_obs, &t.x_tree), ("qObs", &t.q_obs, &t.y_tree)] {
        if path.len() != cfg.log_n + 1 || !path[0].is_root() {
            bad.push(format!("{name} is not a root-to-leaf path"));
            continue;
        }
        for w in path.windows(2) {
            let favored = tree[heap_index(&w[0])].favors_right.map(|r| w[0].child(r));
            if favored.as_ref() != Some(&w[1]) {
                bad.push(format!("{name} leaves '{}' through a son it does not favour", w[0]));
            }
        }
    }
    if !t.p_obs.contains(&t.v_mid_obs) {
        bad.push("vMidObs is not on pObs".into());
    }
    if t.output.len() != cfg.m {
        bad.push("output has the wrong length".into());
    }
    bad
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extract::{ip_extract, random_table_extract};
    use crate::rng;
    use proptest::prelude::*;
    use rand::Rng;

    fn bs(s: &str) -> BitString {
        s.parse().unwrap()
    }

    fn node(s: &str) -> TreeNode {
        s.parse().unwrap()
    }

    #[derive(Debug)]
    struct Always(Verdict);
    impl Responder for Always {
        fn respond(&self, _: Site<'_>, _: &BitString, _: &BitString, _: &BitString) -> Result<Verdict> {
            Ok(self.0)
        }
    }

    /// `HasEnt` only for the step-2 test of one node.
    #[derive(Debug)]
    struct MidAt(Vec<TreeNode>);
    impl Responder for MidAt {
        fn respond(&self, site: Site<'_>, _: &BitString, _: &BitString, _: &BitString) -> Result<Verdict> {
            Ok(match site {
                Site::Mid { node } if self.0.contains(node) => Verdict::HasEnt,
                _ => Verdict::Fixed,
            })
        }
    }

    fn table_cfg(n: usize, l: usize, m: usize) -> PipelineConfig {
        PipelineConfig::build(&PipelineDescriptor::table(n, l, m, 11)).unwrap()
    }

    #[test]
    fn l_prime_rounding() {
        assert_eq!(l_prime(4, 4), 1);
        assert_eq!(l_prime(200, 4), 3);
        assert_eq!(l_prime(8, 1), 8);
    }

    #[test]
    fn matrices_near_the_leaves() {
        let cfg = table_cfg(8, 2, 2);
        let (x, y) = (bs("10110010"), bs("01101110"));
        let ev = evaluate_tree(&x, &y, Side::X, &cfg).unwrap();
        // one-bit leaves: all zero
        assert!(ev.get(&node("010")).matrix.rows.iter().all(BitString::is_zero));
        // last internal level: only its own row is set
        let v = node("01");
        let m = &ev.get(&v).matrix;
        let expect = cfg.bext1.eval(&pad_block(&x.slice(2, 4), 8).unwrap(), &y);
        assert_eq!(m.rows, vec![BitString::zeros(2), BitString::zeros(2), expect]);
    }

    #[test]
    fn subtree_matrices_agree_with_full_evaluation() {
        let cfg = table_cfg(16, 4, 1);
        let mut r = rng::seeded(2);
        for _ in 0..10 {
            let (x, y) = (BitString::from_u64(r.gen(), 16), BitString::from_u64(r.gen(), 16));
            let ev = evaluate_tree(&x, &y, Side::X, &cfg).unwrap();
            for d in 0..=4 {
                for v in TreeNode::level(d) {
                    assert_eq!(challenge_matrix(&x, &y, &v, &cfg).unwrap(), ev.get(&v).matrix);
                }
            }
        }
    }

    #[test]
    fn always_fixed_follows_the_rightmost_descent() {
        let cfg = table_cfg(8, 2, 1).with_responder(Arc::new(Always(Verdict::Fixed)));
        let (x, y) = (bs("11010011"), bs("00111010"));
        let ev = evaluate_tree(&x, &y, Side::X, &cfg).unwrap();
        let root = &ev.get(&TreeNode::root()).matrix;
        let own = |v: &str| {
            cfg.bext1.eval(&pad_block(&x.slice(node_range(8, &node(v)).unwrap().0, node_range(8, &node(v)).unwrap().1), 8).unwrap(), &y)
        };
        assert_eq!(root.rows, vec![own(""), own("1"), own("11")]);
        assert_eq!(ev.observed_path(), ["", "1", "11", "111"].map(node));
        let (p, q) = observed_paths(&x, &y, &cfg).unwrap();
        assert_eq!(p, q);
        assert_eq!(observed_vmid(&x, &y, &p, &q, &cfg).unwrap(), TreeNode::root());
    }

    #[test]
    fn vmid_selection_rules() {
        let base = table_cfg(8, 2, 1);
        let (x, y) = (bs("11010011"), bs("00111010"));
        let cfg = base.clone().with_responder(Arc::new(MidAt(vec![node("11")])));
        let (p, q) = observed_paths(&x, &y, &cfg).unwrap();
        assert_eq!(observed_vmid(&x, &y, &p, &q, &cfg).unwrap(), node("11"));
        let cfg = base.with_responder(Arc::new(MidAt(vec![node(""), node("1"), node("111")])));
        assert_eq!(observed_vmid(&x, &y, &p, &q, &cfg).unwrap(), node("111"));
    }

    #[test]
    fn node_path_challenge_rows() {
        let cfg = table_cfg(8, 2, 1);
        let (x, y) = (bs("11010011"), bs("00111010"));
        let path = ["", "0", "01", "010"].map(node);
        let ch = node_path_challenge(&x, &y, &TreeNode::root(), &path, &cfg).unwrap();
        assert_eq!(ch.rows.len(), 3);
        assert!(ch.rows.iter().all(|r| r.len() == cfg.l_prime));
        assert_eq!(ch.rows[0], cfg.bext2.eval(&y, &x));
        let v = node("10");
        let ch = node_path_challenge(&x, &y, &v, &path, &cfg).unwrap();
        let weak = bs("01000000");
        assert_eq!(ch.rows[2], cfg.bext2.eval(&bs("00011000"), &weak));
    }

    #[test]
    fn output_with_root_vmid() {
        let cfg = table_cfg(8, 2, 3);
        let (x, y) = (bs("11010011"), bs("00111010"));
        let out = output_step(&x, &y, &TreeNode::root(), &cfg).unwrap();
        let direct = random_table_extract(11, 16, 3).unwrap().eval(&x.concat(&x), &y.concat(&BitString::zeros(8)));
        assert_eq!(out, direct);
        assert_eq!(out.len(), 3);
    }

    #[test]
    fn trace_matches_subext_and_passes_checks() {
        for n in [4usize, 8, 16] {
            let cfg = table_cfg(n, if n == 16 { 4 } else { 2 }, 2);
            let mut r = rng::seeded(n as u64);
            for _ in 0..20 {
                let x = BitString::from_u64(r.gen::<u64>(), n);
                let y = BitString::from_u64(r.gen::<u64>(), n);
                let t = subext_trace(&x, &y, &cfg).unwrap();
                assert_eq!(t.output, subext(&x, &y, &cfg).unwrap());
                assert!(check_trace(&t, &cfg).is_empty(), "{:?}", check_trace(&t, &cfg));
                let swapped = subext_trace(&y, &x, &cfg).unwrap();
                assert_eq!(swapped.p_obs, t.q_obs);
                assert_eq!(swapped.q_obs, t.p_obs);
            }
        }
    }

    #[test]
    fn inner_product_pipeline_runs() {
        let d =
            PipelineDescriptor::new(8, 2, 2, ExtractorDescriptor::new(ExtractorKind::Ip), ExtractorDescriptor::new(ExtractorKind::SeRot));
        let cfg = PipelineConfig::build(&d).unwrap();
        let (x, y) = (bs("11010011"), bs("00111010"));
        let t = subext_trace(&x, &y, &cfg).unwrap();
        assert!(check_trace(&t, &cfg).is_empty());
        assert_eq!(t.x_tree[0].matrix.rows[0], ip_extract(&x, &y, 2).unwrap());
    }

    #[test]
    fn bad_configurations() {
        assert!(PipelineConfig::build(&PipelineDescriptor::table(12, 2, 1, 0)).is_err());
        // step-1 rows are log2(n) * l bits wide and must fit in n bits
        assert!(PipelineConfig::build(&PipelineDescriptor::table(8, 4, 1, 0)).is_err());
        let cfg = table_cfg(8, 2, 1);
        assert!(subext(&bs("1"), &bs("00000000"), &cfg).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn evaluation_is_deterministic(xv in any::<u16>(), yv in any::<u16>()) {
            let cfg = table_cfg(16, 4, 2);
            let (x, y) = (BitString::from_u64(xv as u64, 16), BitString::from_u64(yv as u64, 16));
            let a = serde_json::to_string(&subext_trace(&x, &y, &cfg).unwrap()).unwrap();
            let b = serde_json::to_string(&subext_trace(&x, &y, &cfg).unwrap()).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
