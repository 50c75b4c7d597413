//! Labelled entropy-trees and validation of tree-structured sources.
//!
//! A tree carries labels `F`, `H`, `Btop`, `Bmid`, `Bbot` on some of its
//! nodes. `levels` says how many of the nested block labels the tree holds:
//! a three-level tree has one of each, a one-level tree only `Btop`. The
//! deepest block label present is the *terminal* label; the entropy-path ends
//! there and its sons are unlabelled.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::bits::TreeNode;
use crate::error::{Error, Result};
use crate::source::{ExplicitSource, TOLERANCE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    F,
    H,
    Btop,
    Bmid,
    Bbot,
}

impl Label {
    /// The block labels in nesting order.
    pub const BLOCKS: [Label; 3] = [Label::Btop, Label::Bmid, Label::Bbot];

    pub fn is_block(self) -> bool {
        matches!(self, Label::Btop | Label::Bmid | Label::Bbot)
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntropyTree {
    depth: usize,
    #[serde(default = "default_levels")]
    levels: usize,
    labels: BTreeMap<TreeNode, Label>,
}

fn default_levels() -> usize {
    3
}

impl EntropyTree {
    pub fn new(depth: usize, levels: usize) -> Self {
        assert!((1..=3).contains(&levels), "levels must be 1, 2 or 3");
        EntropyTree { depth, levels, labels: BTreeMap::new() }
    }

    /// Builds a tree from `(path, label)` pairs written as 0/1 strings.
    pub fn with_labels<'s, I>(depth: usize, levels: usize, labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'s str, Label)>,
    {
        let mut t = Self::new(depth, levels);
        for (path, label) in labels {
            t.set(path.parse()?, label);
        }
        Ok(t)
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn set(&mut self, node: TreeNode, label: Label) {
        self.labels.insert(node, label);
    }

    pub fn label(&self, node: &TreeNode) -> Option<Label> {
        self.labels.get(node).copied()
    }

    pub fn labels(&self) -> impl Iterator<Item = (&TreeNode, Label)> {
        self.labels.iter().map(|(n, l)| (n, *l))
    }

    pub fn find(&self, label: Label) -> Option<&TreeNode> {
        self.labels.iter().find(|(_, l)| **l == label).map(|(n, _)| n)
    }

    pub fn terminal_label(&self) -> Label {
        Label::BLOCKS[self.levels - 1]
    }

    pub fn terminal(&self) -> Option<&TreeNode> {
        self.find(self.terminal_label())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serialisable")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let t: EntropyTree = serde_json::from_str(text)?;
        if !(1..=3).contains(&t.levels) {
            return Err(Error::Parse(format!("levels must be 1, 2 or 3, got {}", t.levels)));
        }
        Ok(t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Rule {
    /// Root labelled `H` or `Btop`.
    Root,
    /// Exactly one node per required block label, none for the others.
    Uniqueness,
    /// `Bmid` below `leftson(Btop)`, `Bbot` below `leftson(Bmid)`.
    Nesting,
    /// Sons of unlabelled, `F` and terminal nodes carry no label.
    SonsUnlabeled,
    /// `H`, `Btop`, `Bmid` non-leaves have a labelled left son.
    LeftSonLabeled,
    /// After an `F` left son the right son is labelled and not `F`; otherwise
    /// the right son is unlabelled.
    RightSon,
    /// Labels only on nodes inside the tree.
    Depth,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Rule::Root => "root label",
            Rule::Uniqueness => "uniqueness",
            Rule::Nesting => "nesting",
            Rule::SonsUnlabeled => "sons unlabeled",
            Rule::LeftSonLabeled => "left son labeled",
            Rule::RightSon => "right son",
            Rule::Depth => "depth",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub node: TreeNode,
    pub rule: Rule,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "node '{}': {} ({})", self.node, self.rule, self.detail)
    }
}

pub fn validate_tree(t: &EntropyTree) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |node: &TreeNode, rule, detail: String| out.push(Violation { node: node.clone(), rule, detail });
    let root = TreeNode::root();

    match t.label(&root) {
        Some(Label::H) | Some(Label::Btop) => {}
        other => push(&root, Rule::Root, format!("root labelled {other:?}")),
    }

    for (node, _) in t.labels() {
        if node.depth() > t.depth {
            push(node, Rule::Depth, format!("depth {} > tree depth {}", node.depth(), t.depth));
        }
    }

    for (i, block) in Label::BLOCKS.iter().enumerate() {
        let count = t.labels().filter(|(_, l)| l == block).count();
        let wanted = usize::from(i < t.levels);
        if count != wanted {
            push(&root, Rule::Uniqueness, format!("{count} nodes labelled {block}, expected {wanted}"));
        }
    }
    for pair in Label::BLOCKS[..t.levels].windows(2) {
        if let (Some(upper), Some(lower)) = (t.find(pair[0]), t.find(pair[1])) {
            if !upper.left().is_ancestor_of(lower) {
                push(lower, Rule::Nesting, format!("{} is not below the left son of {} at '{upper}'", pair[1], pair[0]));
            }
        }
    }

    let terminal = t.terminal_label();
    for d in 0..t.depth {
        for v in TreeNode::level(d) {
            let (l, r) = (t.label(&v.left()), t.label(&v.right()));
            match t.label(&v) {
                None | Some(Label::F) => {
                    if l.is_some() || r.is_some() {
                        push(&v, Rule::SonsUnlabeled, format!("{:?} node has labelled sons", t.label(&v)));
                    }
                }
                Some(lab) if lab == terminal => {
                    if l.is_some() || r.is_some() {
                        push(&v, Rule::SonsUnlabeled, format!("terminal {lab} node has labelled sons"));
                    }
                }
                Some(Label::Bbot) => push(&v, Rule::Uniqueness, "Bbot in a tree with fewer levels".into()),
                Some(lab) => match (l, r) {
                    (None, _) => push(&v, Rule::LeftSonLabeled, format!("{lab} node has no labelled left son")),
                    (Some(Label::F), None) | (Some(Label::F), Some(Label::F)) => {
                        push(&v, Rule::RightSon, "left son is F but right son is not a non-F label".into())
                    }
                    (Some(l), Some(_)) if l != Label::F => {
                        push(&v, Rule::RightSon, "left son is labelled non-F but right son is labelled".into())
                    }
                    _ => {}
                },
            }
        }
    }
    out
}

/// The root-to-terminal path; each step moves to the good son.
pub fn entropy_path(t: &EntropyTree) -> Result<Vec<TreeNode>> {
    let violations = validate_tree(t);
    if !violations.is_empty() {
        return Err(Error::InvalidTree(violations.iter().map(ToString::to_string).collect()));
    }
    let end = t.terminal().expect("validated tree has a terminal node");
    Ok((0..=end.depth()).map(|d| TreeNode::from_path(end.path()[..d].iter().copied())).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CheckKind {
    Fixed,
    MinEntropy,
    BlockDistance,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeCheck {
    pub node: TreeNode,
    pub label: Label,
    pub kind: CheckKind,
    pub measured: f64,
    pub required: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StructureReport {
    pub k: f64,
    pub eps: f64,
    pub checks: Vec<NodeCheck>,
    pub pass: bool,
}

impl StructureReport {
    pub fn failures(&self) -> impl Iterator<Item = &NodeCheck> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

/// The min-entropy an `H` node must carry, from its position relative to the
/// `Btop` and `Bmid` nodes of the tree.
pub fn h_threshold(t: &EntropyTree, v: &TreeNode, k: f64) -> f64 {
    let below_top = t.find(Label::Btop).is_some_and(|top| top.is_ancestor_of(v));
    let below_mid = t.find(Label::Bmid).is_some_and(|mid| mid.is_ancestor_of(v));
    if below_mid {
        k.powf(0.25)
    } else if below_top {
        k.sqrt()
    } else {
        k
    }
}

pub fn block_threshold(label: Label, k: f64) -> f64 {
    match label {
        Label::Btop => k.sqrt(),
        Label::Bmid => k.powf(0.25),
        Label::Bbot => k.powf(0.125),
        _ => unreachable!("not a block label"),
    }
}

/// Checks every labelled node of `t` against the source.
pub fn validate_structure(src: &ExplicitSource, t: &EntropyTree, k: f64, eps: f64) -> Result<StructureReport> {
    let violations = validate_tree(t);
    if !violations.is_empty() {
        return Err(Error::InvalidTree(violations.iter().map(ToString::to_string).collect()));
    }
    let n = src.n();
    if !n.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(n));
    }
    if t.depth() > n.trailing_zeros() as usize {
        return Err(Error::NodeTooDeep { depth: t.depth(), max: n.trailing_zeros() as usize });
    }

    let mut checks = Vec::new();
    for (node, label) in t.labels() {
        let marginal = src.marginalize(node)?;
        let check = match label {
            Label::F => {
                let fixed = marginal.constant_value().is_some();
                NodeCheck {
                    node: node.clone(),
                    label,
                    kind: CheckKind::Fixed,
                    measured: marginal.min_entropy(),
                    required: 0.0,
                    pass: fixed,
                }
            }
            Label::H => {
                let required = h_threshold(t, node, k);
                let measured = marginal.min_entropy();
                NodeCheck {
                    node: node.clone(),
                    label,
                    kind: CheckKind::MinEntropy,
                    measured,
                    required,
                    pass: measured >= required - TOLERANCE,
                }
            }
            _ => {
                let kb = block_threshold(label, k);
                let measured = block_distance(&marginal, kb)?;
                NodeCheck {
                    node: node.clone(),
                    label,
                    kind: CheckKind::BlockDistance,
                    measured,
                    required: eps,
                    pass: measured <= eps + TOLERANCE,
                }
            }
        };
        checks.push(check);
    }
    let pass = checks.iter().all(|c| c.pass);
    Ok(StructureReport { k, eps, checks, pass })
}

fn block_distance(marginal: &ExplicitSource, kb: f64) -> Result<f64> {
    if marginal.n() < 2 || kb > (marginal.n() / 2) as f64 + TOLERANCE {
        // no distribution on these halves reaches the target
        return Ok(1.0);
    }
    if marginal.block_report()?.is_block(kb) {
        return Ok(0.0);
    }
    marginal.distance_to_block_source(kb.min((marginal.n() / 2) as f64))
}
