//! Fixed-length bit strings and the string-to-tree association.
//!
//! Bit 0 is the leftmost bit. Ordering is lexicographic on the bits, which for
//! strings of equal length coincides with the numeric order of
//! [`BitString::to_u64`].

use std::fmt;
use std::str::FromStr;

use bitvec::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct BitString(BitVec<u8, Msb0>);

impl BitString {
    pub fn zeros(len: usize) -> Self {
        BitString(bitvec![u8, Msb0; 0; len])
    }

    pub fn ones(len: usize) -> Self {
        BitString(bitvec![u8, Msb0; 1; len])
    }

    pub fn from_bits<I: IntoIterator<Item = bool>>(bits: I) -> Self {
        BitString(bits.into_iter().collect())
    }

    /// The `len` low-order bits of `value`, most significant first.
    pub fn from_u64(value: u64, len: usize) -> Self {
        assert!(len <= 64, "from_u64 supports at most 64 bits");
        let mut bits = bitvec![u8, Msb0; 0; len];
        if len > 0 {
            bits.store_be(if len == 64 { value } else { value & ((1 << len) - 1) });
        }
        BitString(bits)
    }

    pub fn to_u64(&self) -> u64 {
        assert!(self.len() <= 64, "to_u64 supports at most 64 bits");
        if self.is_empty() {
            0
        } else {
            self.0.load_be()
        }
    }

    /// Every string of length `len` in lexicographic order.
    pub fn all(len: usize) -> impl Iterator<Item = BitString> {
        assert!(len < 64, "cannot enumerate {len}-bit strings");
        (0..1u64 << len).map(move |v| BitString::from_u64(v, len))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bit(&self, i: usize) -> bool {
        self.0[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        self.0.iter().by_vals()
    }

    pub fn count_ones(&self) -> usize {
        self.0.count_ones()
    }

    pub fn is_zero(&self) -> bool {
        self.0.not_any()
    }

    pub fn slice(&self, start: usize, end: usize) -> BitString {
        BitString(self.0[start..end].to_bitvec())
    }

    pub fn left_half(&self) -> BitString {
        self.slice(0, self.len() / 2)
    }

    pub fn right_half(&self) -> BitString {
        self.slice(self.len() / 2, self.len())
    }

    pub fn concat(&self, other: &BitString) -> BitString {
        let mut bits = self.0.clone();
        bits.extend_from_bitslice(&other.0);
        BitString(bits)
    }

    pub fn push(&mut self, bit: bool) {
        self.0.push(bit);
    }

    pub fn extend(&mut self, other: &BitString) {
        self.0.extend_from_bitslice(&other.0);
    }

    /// Cyclic left shift: bit `i` of the result is bit `(i + steps) mod len`.
    pub fn rotate_left(&self, steps: usize) -> BitString {
        let mut bits = self.0.clone();
        if !bits.is_empty() {
            bits.rotate_left(steps % self.len());
        }
        BitString(bits)
    }

    pub fn xor(&self, other: &BitString) -> BitString {
        assert_eq!(self.len(), other.len(), "xor of strings with different lengths");
        BitString(self.0.clone() ^ other.0.as_bitslice())
    }

    /// Inner product over GF(2).
    pub fn inner_product(&self, other: &BitString) -> bool {
        assert_eq!(self.len(), other.len(), "inner product of strings with different lengths");
        if self.len() <= 64 {
            return (self.to_u64() & other.to_u64()).count_ones() % 2 == 1;
        }
        self.0.iter().by_vals().zip(other.0.iter().by_vals()).filter(|(a, b)| *a && *b).count() % 2 == 1
    }

    /// Appends zeros on the right until the string is `len` bits long.
    pub fn pad_right(&self, len: usize) -> BitString {
        assert!(len >= self.len(), "pad_right cannot shrink a string");
        let mut bits = self.0.clone();
        bits.resize(len, false);
        BitString(bits)
    }

    /// Packed bytes, most significant bit first, last byte zero-padded.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.0.chunks(8).map(|chunk| chunk.iter().by_vals().enumerate().fold(0u8, |acc, (i, b)| acc | ((b as u8) << (7 - i)))).collect()
    }

    /// Hex rendering of [`Self::to_bytes`].
    pub fn to_hex(&self) -> String {
        self.to_bytes().iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.0.iter().by_vals() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString({self})")
    }
}

impl FromStr for BitString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::Parse(format!("invalid bit character {other:?} in {s:?}"))),
            })
            .collect::<Result<BitVec<u8, Msb0>>>()
            .map(BitString)
    }
}

impl Serialize for BitString {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BitString {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A node of the complete binary tree associated with a string: the path from
/// the root, `false` for a left step and `true` for a right step.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct TreeNode(Vec<bool>);

impl TreeNode {
    pub fn root() -> Self {
        TreeNode(Vec::new())
    }

    pub fn from_path<I: IntoIterator<Item = bool>>(path: I) -> Self {
        TreeNode(path.into_iter().collect())
    }

    pub fn depth(&self) -> usize {
        self.0.len()
    }

    pub fn path(&self) -> &[bool] {
        &self.0
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    pub fn left(&self) -> TreeNode {
        self.child(false)
    }

    pub fn right(&self) -> TreeNode {
        self.child(true)
    }

    pub fn child(&self, right: bool) -> TreeNode {
        let mut path = self.0.clone();
        path.push(right);
        TreeNode(path)
    }

    pub fn parent(&self) -> Option<TreeNode> {
        if self.0.is_empty() {
            None
        } else {
            Some(TreeNode(self.0[..self.0.len() - 1].to_vec()))
        }
    }

    /// Node-inclusive: every node is its own ancestor.
    pub fn is_ancestor_of(&self, other: &TreeNode) -> bool {
        other.0.len() >= self.0.len() && other.0[..self.0.len()] == self.0[..]
    }

    pub fn is_right_child(&self) -> bool {
        self.0.last().copied().unwrap_or(false)
    }

    /// The node reached by following `rel` from `self`.
    pub fn join(&self, rel: &TreeNode) -> TreeNode {
        let mut path = self.0.clone();
        path.extend_from_slice(&rel.0);
        TreeNode(path)
    }

    /// All nodes at `depth`, left to right.
    pub fn level(depth: usize) -> impl Iterator<Item = TreeNode> {
        (0..1u64 << depth).map(move |v| TreeNode((0..depth).map(|i| (v >> (depth - 1 - i)) & 1 == 1).collect()))
    }
}

impl fmt::Display for TreeNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.0 {
            f.write_str(if *b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for TreeNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TreeNode({self})")
    }
}

impl FromStr for TreeNode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::Parse(format!("invalid node path character {other:?} in {s:?}"))),
            })
            .collect::<Result<Vec<bool>>>()
            .map(TreeNode)
    }
}

impl Serialize for TreeNode {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TreeNode {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// The substring `x_v` associated with node `v`: the root holds `x`, a left son
/// holds the left half of its parent's string and a right son the right half.
pub fn node_substring(x: &BitString, v: &TreeNode) -> Result<BitString> {
    let (start, end) = node_range(x.len(), v)?;
    Ok(x.slice(start, end))
}

/// Bit range `[start, end)` of `x_v` inside an `n`-bit string.
pub fn node_range(n: usize, v: &TreeNode) -> Result<(usize, usize)> {
    if !n.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(n));
    }
    let max_depth = n.trailing_zeros() as usize;
    if v.depth() > max_depth {
        return Err(Error::NodeTooDeep { depth: v.depth(), max: max_depth });
    }
    let mut start = 0;
    let mut width = n;
    for &right in v.path() {
        width /= 2;
        if right {
            start += width;
        }
    }
    Ok((start, start + width))
}
