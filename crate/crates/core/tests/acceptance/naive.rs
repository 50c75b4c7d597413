//! Straight-line re-implementation of the pipeline on integer bit strings,
//! used as the oracle for the stored golden trace.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// `len` bits, bit 0 leftmost and most significant.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Bits {
    pub v: u64,
    pub len: usize,
}

impl Bits {
    pub fn new(v: u64, len: usize) -> Self {
        Bits { v: v & mask(len), len }
    }
    pub fn zeros(len: usize) -> Self {
        Bits { v: 0, len }
    }
    pub fn cat(self, o: Bits) -> Bits {
        Bits::new((self.v << o.len) | o.v, self.len + o.len)
    }
    pub fn sub(self, s: usize, e: usize) -> Bits {
        Bits::new(self.v >> (self.len - e), e - s)
    }
    pub fn pad_right(self, len: usize) -> Bits {
        Bits::new(self.v << (len - self.len), len)
    }
    pub fn rotl(self, j: usize) -> Bits {
        let j = j % self.len;
        if j == 0 {
            return self;
        }
        Bits::new((self.v << j) | (self.v >> (self.len - j)), self.len)
    }
    pub fn text(self) -> String {
        (0..self.len).map(|i| if self.v >> (self.len - 1 - i) & 1 == 1 { '1' } else { '0' }).collect()
    }
    fn bytes(self) -> Vec<u8> {
        let mut out = vec![0u8; self.len.div_ceil(8)];
        for i in 0..self.len {
            if self.v >> (self.len - 1 - i) & 1 == 1 {
                out[i / 8] |= 0x80 >> (i % 8);
            }
        }
        out
    }
}

fn mask(len: usize) -> u64 {
    if len == 64 {
        u64::MAX
    } else {
        (1 << len) - 1
    }
}

/// SHA-256 counter stream over `seed | n | m | block | weak`.
pub fn table(seed: u64, n: usize, m: usize, block: Bits, weak: Bits) -> Bits {
    let mut prefix = Vec::new();
    prefix.extend_from_slice(&seed.to_le_bytes());
    prefix.extend_from_slice(&(n as u32).to_le_bytes());
    prefix.extend_from_slice(&(m as u32).to_le_bytes());
    prefix.extend(block.bytes());
    prefix.extend(weak.bytes());
    let mut out = Bits::zeros(0);
    let mut counter = 0u32;
    while out.len < m {
        let mut msg = prefix.clone();
        msg.extend_from_slice(&counter.to_le_bytes());
        for byte in Sha256::digest(&msg) {
            for i in (0..8).rev() {
                if out.len < m {
                    out = out.cat(Bits::new(u64::from(byte >> i & 1), 1));
                }
            }
        }
        counter += 1;
    }
    out
}

fn ip(x: Bits, y: Bits, width: usize) -> Bits {
    (0..width).fold(Bits::zeros(0), |acc, j| acc.cat(Bits::new(u64::from((x.v & y.rotl(j).v).count_ones() % 2), 1)))
}

/// Row `i` of the rotation somewhere-extractor is `ip(rot_i(x), y)`.
fn fixed(x: Bits, y: Bits, challenge: Bits) -> bool {
    (0..x.len).any(|i| ip(x.rotl(i), y, challenge.len) == challenge)
}

fn pad_block(x: Bits, n: usize) -> Bits {
    let side = Bits::zeros((n - x.len) / 2);
    side.cat(x).cat(side)
}

pub struct Naive {
    pub n: usize,
    pub log_n: usize,
    pub l: usize,
    pub l_prime: usize,
    pub m: usize,
    pub seed: u64,
}

impl Naive {
    pub fn new(n: usize, l: usize, m: usize, seed: u64) -> Self {
        let log_n = n.trailing_zeros() as usize;
        Naive { n, log_n, l, l_prime: (l / log_n.pow(3)).max(1), m, seed }
    }

    fn block(&self, s: Bits, depth: usize, index: usize) -> Bits {
        let w = self.n >> depth;
        s.sub(index * w, (index + 1) * w)
    }

    /// Matrix rows of node `(depth, index)` and whether it favours its right
    /// son.
    fn node(&self, own: Bits, other: Bits, depth: usize, index: usize) -> (Vec<Bits>, Option<bool>) {
        if depth == self.log_n {
            return (vec![Bits::zeros(self.l); self.log_n], None);
        }
        let padded = pad_block(self.block(own, depth, index), self.n);
        let (left, _) = self.node(own, other, depth + 1, 2 * index);
        let flat = left.iter().fold(Bits::zeros(0), |a, r| a.cat(*r));
        let right = fixed(padded, other, flat);
        let mut rows = if right { self.node(own, other, depth + 1, 2 * index + 1).0 } else { left };
        for row in rows.iter_mut().take(depth) {
            *row = Bits::zeros(self.l);
        }
        rows[depth] = table(self.seed, self.n, self.l, padded, other);
        (rows, Some(right))
    }

    /// Favoured path as `(depth, index)` pairs.
    fn path(&self, own: Bits, other: Bits) -> Vec<(usize, usize)> {
        let mut out = vec![(0, 0)];
        let (mut d, mut i) = (0, 0);
        while let (_, Some(right)) = self.node(own, other, d, i) {
            i = 2 * i + usize::from(right);
            d += 1;
            out.push((d, i));
        }
        out
    }

    pub fn run(&self, x: Bits, y: Bits) -> NaiveCase {
        let p = self.path(x, y);
        let q = self.path(y, x);
        let mut vmid = (0, 0);
        for &(d, i) in &p {
            let weak = self.block(x, d, i).pad_right(self.n);
            let challenge = q[..self.log_n].iter().fold(Bits::zeros(0), |a, &(qd, qi)| {
                a.cat(table(self.seed, self.n, self.l_prime, pad_block(self.block(y, qd, qi), self.n), weak))
            });
            if !fixed(x, y, challenge) {
                vmid = (d, i);
            }
        }
        let block = self.block(x, vmid.0, vmid.1).pad_right(self.n).cat(x);
        let out = table(self.seed, 2 * self.n, self.m, block, y.cat(Bits::zeros(self.n)));
        let name = |(d, i): (usize, usize)| Bits::new(i as u64, d).text();
        NaiveCase {
            x: x.text(),
            y: y.text(),
            p_obs: p.into_iter().map(name).collect(),
            q_obs: q.into_iter().map(name).collect(),
            v_mid_obs: name(vmid),
            output: out.text(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NaiveCase {
    pub x: String,
    pub y: String,
    pub p_obs: Vec<String>,
    pub q_obs: Vec<String>,
    pub v_mid_obs: String,
    pub output: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Golden {
    pub n: usize,
    pub l: usize,
    pub m: usize,
    pub seed: u64,
    pub cases: Vec<NaiveCase>,
}
