//! Tree-structured fixture sources and their conditioned subsources.
//!
//! A fixture is a source on 16 bits together with an entropy-tree it carries
//! at a stated `k`. The setup for a pipeline run conditions the second
//! source so that every challenge of an F-labelled son on the first source's
//! entropy-path is constant, and forces those constants into the
//! somewhere-extractor as extra rows.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use num::Zero;
use rayon::prelude::*;

use serde::{Deserialize, Serialize};

use crate::bits::{node_range, BitString, TreeNode};
use crate::challenge::{branch_fixed_test, BranchFixedReport};
use crate::error::{Error, Result};
use crate::extract::{DoubleBase, ExtractorKind, Injections};
use crate::oracles::fix_function_subsource;
use crate::pipeline::{favors_right, subtree_matrix, PipelineConfig, PipelineDescriptor, Side};
use crate::source::{ExplicitSource, Mass, SubsourceHandle, SubsourceRecord};
use crate::tree::{entropy_path, validate_structure, EntropyTree, Label, StructureReport};

#[derive(Debug, Clone)]
pub struct Fixture {
    pub name: String,
    pub source: ExplicitSource,
    pub tree: EntropyTree,
    pub k: f64,
}

/// Named shipped fixtures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FixtureName {
    /// Root `H`, left son fixed, right son `Btop` over uniform bits with
    /// `Bmid` as its left son.
    FixedLeft,
    /// Root `Btop`, its left son `H` with a fixed left son and `Bmid` right.
    NestedFixed,
    /// Uniform bits, `Btop`, `Bmid`, `Bbot` down the left spine.
    Uniform,
}

impl FixtureName {
    pub const ALL: [FixtureName; 3] = [FixtureName::FixedLeft, FixtureName::NestedFixed, FixtureName::Uniform];

    pub fn build(self) -> Fixture {
        match self {
            FixtureName::FixedLeft => fixed_left(),
            FixtureName::NestedFixed => nested_fixed(),
            FixtureName::Uniform => uniform(),
        }
    }
}

/// Constant used for F-labelled blocks.
const FIXED_BYTE: u64 = 0b1011_0010;

fn product(parts: &[(usize, Option<u64>)]) -> ExplicitSource {
    // each part is a block of `len` bits, fixed to a value or uniform
    let mut support = vec![BitString::default()];
    for &(len, fixed) in parts {
        let values: Vec<BitString> = match fixed {
            Some(v) => vec![BitString::from_u64(v, len)],
            None => BitString::all(len).collect(),
        };
        support = support.iter().flat_map(|s| values.iter().map(move |v| s.concat(v))).collect();
    }
    let n = parts.iter().map(|p| p.0).sum();
    ExplicitSource::flat(n, support).expect("non-empty")
}

fn tree(labels: &[(&str, Label)], levels: usize) -> EntropyTree {
    EntropyTree::with_labels(4, levels, labels.iter().copied()).expect("valid paths")
}

pub fn fixed_left() -> Fixture {
    fixed_left_with(FIXED_BYTE)
}

/// The fixed-left shape with the constant block set to `value`.
pub fn fixed_left_with(value: u64) -> Fixture {
    Fixture {
        name: "fixed-left".into(),
        source: product(&[(8, Some(value & 0xff)), (8, None)]),
        tree: tree(&[("", Label::H), ("0", Label::F), ("1", Label::Btop), ("10", Label::Bmid)], 2),
        k: 8.0,
    }
}

pub fn nested_fixed() -> Fixture {
    Fixture {
        name: "nested-fixed".into(),
        source: product(&[(4, Some(FIXED_BYTE & 0xf)), (4, None), (8, None)]),
        tree: tree(&[("", Label::Btop), ("0", Label::H), ("00", Label::F), ("01", Label::Bmid)], 2),
        k: 16.0,
    }
}

pub fn uniform() -> Fixture {
    Fixture {
        name: "uniform".into(),
        source: ExplicitSource::uniform(16),
        tree: tree(&[("", Label::Btop), ("0", Label::Bmid), ("00", Label::Bbot)], 3),
        k: 16.0,
    }
}

impl Fixture {
    pub fn validate(&self) -> Result<StructureReport> {
        validate_structure(&self.source, &self.tree, self.k, 0.0)
    }

    /// Validation that turns a failing report into an error.
    pub fn require_valid(&self) -> Result<StructureReport> {
        let report = self.validate()?;
        if !report.pass {
            return Err(Error::StructureFailed(Box::new(report)));
        }
        Ok(report)
    }

    pub fn entropy_path(&self) -> Result<Vec<TreeNode>> {
        entropy_path(&self.tree)
    }

    /// Entropy-path nodes whose left son is labelled `F`.
    pub fn fixed_son_parents(&self) -> Result<Vec<TreeNode>> {
        Ok(self.entropy_path()?.into_iter().filter(|v| self.tree.label(&v.left()) == Some(Label::F)).collect())
    }

    pub fn bmid(&self) -> Option<&TreeNode> {
        self.tree.find(Label::Bmid)
    }
}

/// One forced challenge: the F son `node` on `side` always issues `value`.
#[derive(Debug, Clone, Serialize)]
pub struct ForcedChallenge {
    pub side: Side,
    pub node: TreeNode,
    pub value: BitString,
}

/// Conditioned sources and the pipeline configured with forced rows.
#[derive(Debug, Clone)]
pub struct Setup {
    pub x: Fixture,
    pub y: Fixture,
    pub x_fi: ExplicitSource,
    pub y_fi: ExplicitSource,
    pub x_fi_record: SubsourceRecord,
    pub y_fi_record: SubsourceRecord,
    pub forced: Vec<ForcedChallenge>,
    pub descriptor: PipelineDescriptor,
    pub cfg: PipelineConfig,
}

/// Candidate forced values tried per side.
const MAX_CANDIDATES: usize = 6;

/// Builds the conditioned setup for a pipeline run on `(x, y)`.
///
/// The F sons of `x` are constant on its support, so their challenges depend
/// only on `y`. For a candidate joint value `a`, the extractor gets `a` as
/// extra rows and `y` is conditioned on the pairs whose challenges, under
/// that extractor, equal `a`. The heaviest such subsource wins. The F sons of
/// `y` are then handled the same way with the roles swapped.
pub fn build_setup(x: Fixture, y: Fixture, base: &PipelineDescriptor) -> Result<Setup> {
    if x.source.n() != base.n || y.source.n() != base.n {
        return Err(Error::Config(format!("fixtures are {} and {} bits, pipeline is {}", x.source.n(), y.source.n(), base.n)));
    }
    x.require_valid()?;
    y.require_valid()?;
    let x_nodes = x.fixed_son_parents()?;
    let y_nodes = y.fixed_son_parents()?;

    let (y_event, a, descriptor) = force(&y.source, &x.source, &x_nodes, Side::X, base)?;
    let (x_event, b, descriptor) = force(&x.source, &y.source, &y_nodes, Side::Y, &descriptor)?;
    let cfg = PipelineConfig::build(&descriptor)?;
    let y_handle = y.source.condition(&y_event)?;
    if !y_nodes.is_empty() {
        // rows added for y may have moved the forcing of x's sons
        let still = joint_map(&y_handle.materialize(), &x.source, &x_nodes, Side::X, &cfg);
        if !a.is_empty() && still.iter().any(|(_, v)| *v != joint_value(&a)) {
            return Err(Error::Config("forcing one side disturbed the other".into()));
        }
    }
    let x_handle = x.source.condition(&x_event)?;
    Ok(Setup {
        x_fi: x_handle.materialize(),
        y_fi: y_handle.materialize(),
        x_fi_record: x_handle.to_record(),
        y_fi_record: y_handle.to_record(),
        x,
        y,
        forced: a.into_iter().chain(b).collect(),
        descriptor,
        cfg,
    })
}

fn joint_value(forced: &[ForcedChallenge]) -> BitString {
    forced.iter().fold(BitString::default(), |acc, f| acc.concat(&f.value))
}

/// Joint challenge of the F sons under `nodes` for every string of `other`.
fn joint_map(
    other: &ExplicitSource,
    own: &ExplicitSource,
    nodes: &[TreeNode],
    side: Side,
    cfg: &PipelineConfig,
) -> Vec<(BitString, BitString)> {
    let representative = own.support().next().expect("non-empty").clone();
    let strings: Vec<&BitString> = other.support().collect();
    strings
        .par_iter()
        .map(|o| {
            let joint = nodes.iter().fold(BitString::default(), |acc, v| {
                acc.concat(&subtree_matrix(&representative, o, side, &v.left(), cfg).expect("shapes checked").flatten())
            });
            ((*o).clone(), joint)
        })
        .collect()
}

fn split_joint(value: &BitString, nodes: &[TreeNode], side: Side, width: usize) -> Vec<ForcedChallenge> {
    nodes
        .iter()
        .enumerate()
        .map(|(i, v)| ForcedChallenge { side, node: v.left(), value: value.slice(i * width, (i + 1) * width) })
        .collect()
}

/// Heaviest classes of a map, ties to the smallest value.
fn heaviest(other: &ExplicitSource, map: &[(BitString, BitString)], count: usize) -> Vec<BitString> {
    let mut classes: BTreeMap<&BitString, Mass> = BTreeMap::new();
    for (o, v) in map {
        *classes.entry(v).or_insert_with(Mass::zero) += other.mass(o);
    }
    let mut ranked: Vec<(&BitString, Mass)> = classes.into_iter().collect();
    ranked.sort_by(|p, q| q.1.cmp(&p.1).then_with(|| p.0.cmp(q.0)));
    ranked.into_iter().take(count).map(|p| p.0.clone()).collect()
}

/// Conditions `other` so that the challenges of the F sons under `nodes` in
/// the tree over `own` are constant, returning the event, the forced values
/// and the descriptor carrying them as rows.
fn force(
    other: &ExplicitSource,
    own: &ExplicitSource,
    nodes: &[TreeNode],
    side: Side,
    base: &PipelineDescriptor,
) -> Result<(BTreeSet<BitString>, Vec<ForcedChallenge>, PipelineDescriptor)> {
    if nodes.is_empty() {
        return Ok((other.support().cloned().collect(), Vec::new(), base.clone()));
    }
    let width = base.l * base.n.trailing_zeros() as usize;
    let base_map = joint_map(other, own, nodes, side, &PipelineConfig::build(base)?);
    let mut queue: VecDeque<BitString> = heaviest(other, &base_map, MAX_CANDIDATES).into();
    let base_mass = {
        let top = queue.front().expect("non-empty support");
        base_map.iter().filter(|(_, v)| v == top).map(|(o, _)| other.mass(o)).fold(Mass::zero(), |a, b| a + b)
    };
    let mut tried = BTreeSet::new();
    let mut best: Option<(Mass, BTreeSet<BitString>, Vec<ForcedChallenge>, PipelineDescriptor)> = None;
    while let Some(candidate) = queue.pop_front() {
        if tried.len() >= MAX_CANDIDATES || !tried.insert(candidate.clone()) {
            continue;
        }
        let forced = split_joint(&candidate, nodes, side, width);
        let descriptor = with_injections(base, &forced);
        let map = joint_map(other, own, nodes, side, &PipelineConfig::build(&descriptor)?);
        let event: BTreeSet<BitString> = map.iter().filter(|(_, v)| *v == candidate).map(|(o, _)| o.clone()).collect();
        let mass = other.event_mass(&event);
        if best.as_ref().is_none_or(|b| mass > b.0) {
            best = Some((mass.clone(), event, forced, descriptor));
        }
        if mass.clone() * Mass::from_integer(2.into()) >= base_mass {
            break;
        }
        // chase the class that the added rows made heaviest
        queue.extend(heaviest(other, &map, 1));
    }
    match best {
        Some((mass, event, forced, descriptor)) if !mass.is_zero() => Ok((event, forced, descriptor)),
        _ => Err(Error::Config("no forced challenge value is self-consistent".into())),
    }
}

fn with_injections(base: &PipelineDescriptor, forced: &[ForcedChallenge]) -> PipelineDescriptor {
    let mut d = base.clone();
    if forced.is_empty() {
        return d;
    }
    let base_kind = match d.se.kind {
        ExtractorKind::SeDouble => d.se.base.unwrap_or_default(),
        _ => DoubleBase::Rotation,
    };
    let mut pairs = d.se.inject.as_ref().map(Injections::pairs).unwrap_or_default();
    let first_free = pairs.iter().map(|p| p.0 + 1).max().unwrap_or(0).max(base.n);
    let mut seen = BTreeSet::new();
    for f in forced {
        if seen.insert(f.value.clone()) {
            pairs.push((first_free + seen.len() - 1, f.value.clone()));
        }
    }
    d.se.kind = ExtractorKind::SeDouble;
    d.se.base = Some(base_kind);
    d.se.inject = Some(Injections::Many(pairs));
    d
}

#[derive(Debug, Clone, Serialize)]
pub struct FavorCheck {
    pub node: TreeNode,
    pub side: Side,
    pub pairs: u64,
    pub fixed_son_favored: u64,
    pub branch: BranchFixedReport,
}

impl Setup {
    /// Over the full joint support of the conditioned sources, counts pairs
    /// where an entropy-path parent favours its F-labelled son.
    pub fn check_fixed_sons(&self) -> Result<Vec<FavorCheck>> {
        let mut out = Vec::new();
        for (fixture, own, other, side) in [(&self.x, &self.x_fi, &self.y_fi, Side::X), (&self.y, &self.y_fi, &self.x_fi, Side::Y)] {
            for v in fixture.fixed_son_parents()? {
                let (s, e) = node_range(self.cfg.n, &v)?;
                let padded = own.push_forward(self.cfg.n, |x| crate::extract::pad_block(&x.slice(s, e), self.cfg.n).expect("even"))?;
                let cfg = &self.cfg;
                let ch = |_: &BitString, o: &BitString| {
                    let rep = own.support().next().expect("non-empty");
                    subtree_matrix(rep, o, side, &v.left(), cfg).expect("shapes").flatten()
                };
                let se = self.descriptor.se.with_shape(cfg.n, cfg.log_n * cfg.l).somewhere()?;
                let branch = branch_fixed_test(&padded, other, ch, se.as_ref())?;
                let mut pairs = 0;
                let mut wrong = 0;
                // the decision at v only reads the bits under v
                let mut distinct = BTreeMap::new();
                for a in own.support() {
                    distinct.entry(a.slice(s, e)).or_insert(a);
                }
                for a in distinct.into_values() {
                    for b in other.support() {
                        let favored_right = favors_right(a, b, side, &v, cfg)?;
                        pairs += 1;
                        wrong += u64::from(!favored_right);
                    }
                }
                out.push(FavorCheck { node: v, side, pairs, fixed_son_favored: wrong, branch });
            }
        }
        Ok(out)
    }

    /// Fixes the left sons of the `Bmid` nodes to their heaviest values on
    /// top of the conditioning of [`build_setup`]. The handles are relative
    /// to the conditioned sources.
    pub fn alpha_beta(&self) -> Result<(SubsourceHandle<'_>, SubsourceHandle<'_>)> {
        fn fix<'a>(src: &'a ExplicitSource, f: &Fixture) -> Result<SubsourceHandle<'a>> {
            let Some(mid) = f.bmid() else {
                return Ok(src.whole());
            };
            let (s, e) = node_range(src.n(), &mid.left())?;
            Ok(fix_function_subsource(src, e - s, |x| x.slice(s, e))?.witness)
        }
        Ok((fix(&self.x_fi, &self.x)?, fix(&self.y_fi, &self.y)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_fixtures_validate() {
        for name in FixtureName::ALL {
            let f = name.build();
            let r = f.validate().unwrap();
            assert!(r.pass, "{}: {:?}", f.name, r.failures().collect::<Vec<_>>());
        }
    }

    #[test]
    fn fixtures_fail_above_their_largest_k() {
        // the root block of the uniform fixture caps it at sqrt(k) <= 8
        for (name, largest) in [(FixtureName::FixedLeft, 8.0), (FixtureName::NestedFixed, 16.0), (FixtureName::Uniform, 64.0)] {
            let f = name.build();
            assert!(validate_structure(&f.source, &f.tree, largest, 0.0).unwrap().pass, "{}", f.name);
            assert!(!validate_structure(&f.source, &f.tree, largest + 0.5, 0.0).unwrap().pass, "{}", f.name);
        }
    }

    #[test]
    fn three_level_tree_with_a_fixed_son_validates_only_at_tiny_k() {
        let f = fixed_left();
        let t = tree(&[("", Label::H), ("0", Label::F), ("1", Label::Btop), ("10", Label::Bmid), ("100", Label::Bbot)], 3);
        assert!(validate_structure(&f.source, &t, 1.0, 0.0).unwrap().pass);
        assert!(!validate_structure(&f.source, &t, 1.1, 0.0).unwrap().pass);
    }

    #[test]
    fn entropy_paths_and_fixed_parents() {
        let a = fixed_left();
        assert_eq!(a.entropy_path().unwrap().iter().map(ToString::to_string).collect::<Vec<_>>(), ["", "1", "10"]);
        assert_eq!(a.fixed_son_parents().unwrap(), vec![TreeNode::root()]);
        let b = nested_fixed();
        assert_eq!(b.entropy_path().unwrap().iter().map(ToString::to_string).collect::<Vec<_>>(), ["", "0", "01"]);
        assert_eq!(b.fixed_son_parents().unwrap(), vec!["0".parse().unwrap()]);
        assert!(uniform().fixed_son_parents().unwrap().is_empty());
    }
}
