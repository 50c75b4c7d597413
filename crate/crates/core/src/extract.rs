//! Block-and-weak extractors, somewhere-extractors and an exact verifier.
//!
//! Two block/weak extractors ship: the GF(2) inner product with cyclic shifts
//! (any length) and a keyed pseudo-random table (at most 32 bits per
//! argument). Somewhere-extractors come as a rotation reference and as a
//! test double whose rows can be forced.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num::{BigInt, Signed, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::source::{mass_to_f64, ExplicitSource, Mass};

/// `0^((n-t)/2) . x . 0^((n-t)/2)`.
pub fn pad_block(x: &BitString, n: usize) -> Result<BitString> {
    let t = x.len();
    if t > n || t % 2 == 1 || n % 2 == 1 {
        return Err(Error::Padding { t, n });
    }
    let side = BitString::zeros((n - t) / 2);
    Ok(side.concat(x).concat(&side))
}

/// Bit `j` is the inner product of `x` with `y` cyclically shifted left by
/// `j` places.
pub fn ip_extract(x: &BitString, y: &BitString, m: usize) -> Result<BitString> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch { expected: x.len(), found: y.len() });
    }
    if m > x.len() {
        return Err(Error::OutputTooLong { m, n: x.len() });
    }
    let n = x.len();
    if n <= 64 {
        let (a, b) = (x.to_u64(), y.to_u64());
        let mask = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
        let rot = |j: usize| if j % n == 0 { b } else { ((b << (j % n)) | (b >> (n - j % n))) & mask };
        return Ok(BitString::from_bits((0..m).map(|j| (a & rot(j)).count_ones() % 2 == 1)));
    }
    Ok(BitString::from_bits((0..m).map(|j| x.inner_product(&y.rotate_left(j)))))
}

/// A function of a block argument and a weak argument.
pub trait BlockWeakExtractor: Send + Sync + fmt::Debug {
    fn block_len(&self) -> usize;
    fn weak_len(&self) -> usize;
    fn output_len(&self) -> usize;
    /// Caller guarantees the argument lengths.
    fn eval(&self, block: &BitString, weak: &BitString) -> BitString;

    fn try_eval(&self, block: &BitString, weak: &BitString) -> Result<BitString> {
        if block.len() != self.block_len() {
            return Err(Error::LengthMismatch { expected: self.block_len(), found: block.len() });
        }
        if weak.len() != self.weak_len() {
            return Err(Error::LengthMismatch { expected: self.weak_len(), found: weak.len() });
        }
        Ok(self.eval(block, weak))
    }

    /// Evaluates on a shorter block after [`pad_block`].
    fn eval_padded(&self, block: &BitString, weak: &BitString) -> Result<BitString> {
        self.try_eval(&pad_block(block, self.block_len())?, weak)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IpExtractor {
    pub n: usize,
    pub m: usize,
}

impl IpExtractor {
    pub fn new(n: usize, m: usize) -> Result<Self> {
        if m > n {
            return Err(Error::OutputTooLong { m, n });
        }
        Ok(IpExtractor { n, m })
    }
}

impl BlockWeakExtractor for IpExtractor {
    fn block_len(&self) -> usize {
        self.n
    }
    fn weak_len(&self) -> usize {
        self.n
    }
    fn output_len(&self) -> usize {
        self.m
    }
    fn eval(&self, block: &BitString, weak: &BitString) -> BitString {
        ip_extract(block, weak, self.m).expect("lengths checked at construction")
    }
}

/// Largest argument length accepted by [`TableExtractor`].
pub const TABLE_MAX_BITS: usize = 32;

/// A fixed random function, evaluated lazily: the output for `(x, y)` is the
/// SHA-256 counter stream keyed by the seed and both arguments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TableExtractor {
    pub seed: u64,
    pub n: usize,
    pub m: usize,
}

pub fn random_table_extract(seed: u64, n: usize, m: usize) -> Result<TableExtractor> {
    if n > TABLE_MAX_BITS {
        return Err(Error::TableTooLarge { n, max: TABLE_MAX_BITS });
    }
    Ok(TableExtractor { seed, n, m })
}

impl BlockWeakExtractor for TableExtractor {
    fn block_len(&self) -> usize {
        self.n
    }
    fn weak_len(&self) -> usize {
        self.n
    }
    fn output_len(&self) -> usize {
        self.m
    }
    fn eval(&self, block: &BitString, weak: &BitString) -> BitString {
        let mut key = Sha256::new();
        key.update(self.seed.to_le_bytes());
        key.update((self.n as u32).to_le_bytes());
        key.update((self.m as u32).to_le_bytes());
        key.update(block.to_bytes());
        key.update(weak.to_bytes());
        let mut out = BitString::default();
        let mut counter = 0u32;
        while out.len() < self.m {
            let block = key.clone().chain_update(counter.to_le_bytes()).finalize();
            for byte in block {
                for i in (0..8).rev() {
                    if out.len() < self.m {
                        out.push(byte >> i & 1 == 1);
                    }
                }
            }
            counter += 1;
        }
        out
    }
}

/// `r` rows of `width` bits from two `n`-bit arguments.
pub trait SomewhereExtractor: Send + Sync + fmt::Debug {
    fn input_len(&self) -> usize;
    fn row_width(&self) -> usize;
    fn row_count(&self) -> usize;
    /// Caller guarantees the argument lengths.
    fn eval(&self, x: &BitString, y: &BitString) -> Vec<BitString>;
}

pub fn se_rows(se: &dyn SomewhereExtractor, x: &BitString, y: &BitString) -> Result<Vec<BitString>> {
    for s in [x, y] {
        if s.len() != se.input_len() {
            return Err(Error::LengthMismatch { expected: se.input_len(), found: s.len() });
        }
    }
    Ok(se.eval(x, y))
}

/// Row `i` is `ip_extract(rot_i(x), y, width)`; one row per rotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RotationSe {
    pub n: usize,
    pub width: usize,
}

impl RotationSe {
    pub fn new(n: usize, width: usize) -> Result<Self> {
        if width > n {
            return Err(Error::OutputTooLong { m: width, n });
        }
        Ok(RotationSe { n, width })
    }
}

impl SomewhereExtractor for RotationSe {
    fn input_len(&self) -> usize {
        self.n
    }
    fn row_width(&self) -> usize {
        self.width
    }
    fn row_count(&self) -> usize {
        self.n
    }
    fn eval(&self, x: &BitString, y: &BitString) -> Vec<BitString> {
        (0..self.n).map(|i| ip_extract(&x.rotate_left(i), y, self.width).expect("checked")).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DoubleBase {
    #[default]
    Zero,
    Rotation,
}

/// Base rows (all zero or rotation extracts) with forced rows on top. An
/// injection past the last base row appends rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeDouble {
    pub n: usize,
    pub width: usize,
    pub base: DoubleBase,
    pub base_rows: usize,
    pub injections: BTreeMap<usize, BitString>,
}

impl SeDouble {
    pub fn new(n: usize, width: usize, base: DoubleBase) -> Result<Self> {
        if base == DoubleBase::Rotation && width > n {
            return Err(Error::OutputTooLong { m: width, n });
        }
        Ok(SeDouble { n, width, base, base_rows: n, injections: BTreeMap::new() })
    }

    pub fn inject(mut self, index: usize, value: BitString) -> Result<Self> {
        if value.len() != self.width {
            return Err(Error::WidthMismatch { expected: self.width, found: value.len() });
        }
        self.injections.insert(index, value);
        Ok(self)
    }
}

impl SomewhereExtractor for SeDouble {
    fn input_len(&self) -> usize {
        self.n
    }
    fn row_width(&self) -> usize {
        self.width
    }
    fn row_count(&self) -> usize {
        self.injections.keys().next_back().map_or(self.base_rows, |&i| self.base_rows.max(i + 1))
    }
    fn eval(&self, x: &BitString, y: &BitString) -> Vec<BitString> {
        (0..self.row_count())
            .map(|i| match self.injections.get(&i) {
                Some(v) => v.clone(),
                None => match self.base {
                    DoubleBase::Rotation if i < self.base_rows => ip_extract(&x.rotate_left(i), y, self.width).expect("checked"),
                    _ => BitString::zeros(self.width),
                },
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExtractorKind {
    Ip,
    Table,
    SeRot,
    SeDouble,
}

/// One `[index, "bits"]` pair or a list of them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Injections {
    One((usize, BitString)),
    Many(Vec<(usize, BitString)>),
}

impl Injections {
    pub fn pairs(&self) -> Vec<(usize, BitString)> {
        match self {
            Injections::One(p) => vec![p.clone()],
            Injections::Many(v) => v.clone(),
        }
    }
}

/// Serialised extractor choice. `n` and `m` may be left out when the
/// consumer supplies the shape.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractorDescriptor {
    pub kind: ExtractorKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inject: Option<Injections>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<DoubleBase>,
}

impl ExtractorDescriptor {
    pub fn new(kind: ExtractorKind) -> Self {
        ExtractorDescriptor { kind, n: None, m: None, seed: 0, inject: None, base: None }
    }

    pub fn table(seed: u64) -> Self {
        ExtractorDescriptor { seed, ..Self::new(ExtractorKind::Table) }
    }

    pub fn with_shape(&self, n: usize, m: usize) -> Self {
        ExtractorDescriptor { n: Some(n), m: Some(m), ..self.clone() }
    }

    fn shape(&self) -> Result<(usize, usize)> {
        match (self.n, self.m) {
            (Some(n), Some(m)) => Ok((n, m)),
            _ => Err(Error::Config(format!("{:?} descriptor needs both n and m", self.kind))),
        }
    }

    pub fn block_weak(&self) -> Result<Arc<dyn BlockWeakExtractor>> {
        let (n, m) = self.shape()?;
        Ok(match self.kind {
            ExtractorKind::Ip => Arc::new(IpExtractor::new(n, m)?),
            ExtractorKind::Table => Arc::new(random_table_extract(self.seed, n, m)?),
            k => return Err(Error::Config(format!("{k:?} is not a block/weak extractor"))),
        })
    }

    /// Builds a somewhere-extractor; `m` is the row width. Injections of a
    /// different width are skipped so one descriptor can serve several widths.
    pub fn somewhere(&self) -> Result<Arc<dyn SomewhereExtractor>> {
        let (n, m) = self.shape()?;
        Ok(match self.kind {
            ExtractorKind::SeRot => Arc::new(RotationSe::new(n, m)?),
            ExtractorKind::SeDouble => {
                let mut se = SeDouble::new(n, m, self.base.unwrap_or_default())?;
                for (i, v) in self.inject.as_ref().map(Injections::pairs).unwrap_or_default() {
                    if v.len() == m {
                        se = se.inject(i, v)?;
                    }
                }
                Arc::new(se)
            }
            k => return Err(Error::Config(format!("{k:?} is not a somewhere-extractor"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtractorVerdict {
    pub max_observed_sd: f64,
    pub trials: usize,
    pub family: String,
    pub threshold: f64,
    pub pass: bool,
}

/// Exact distances of one source pair: `SD(E(X,Y), U_m)` and
/// `SD((E(X,Y), Y), (U_m, Y))`.
pub fn exact_output_distance(ext: &dyn BlockWeakExtractor, x: &ExplicitSource, y: &ExplicitSource) -> Result<(Mass, Mass)> {
    let m = ext.output_len();
    let outputs = 1usize << m;
    let uniform = Mass::new(BigInt::from(1), BigInt::from(outputs));
    let mut plain = vec![Mass::zero(); outputs];
    let mut strong = Mass::zero();
    for (b, q) in y.atoms() {
        let mut given = vec![Mass::zero(); outputs];
        for (a, p) in x.atoms() {
            let z = ext.try_eval(a, b)?.to_u64() as usize;
            given[z] += p;
        }
        let sd: Mass = given.iter().map(|g| (g - &uniform).abs()).sum::<Mass>() / BigInt::from(2);
        strong += q * sd;
        for (acc, g) in plain.iter_mut().zip(&given) {
            *acc += q * g;
        }
    }
    let plain = plain.iter().map(|g| (g - &uniform).abs()).sum::<Mass>() / BigInt::from(2);
    Ok((plain, strong))
}

/// Flat block-source on `n` bits of total entropy `k`: `a` bits on the
/// `floor(n/2)`-bit left half and `k - a` bits on the right, per left value.
pub fn random_block_flat<R: Rng + ?Sized>(n: usize, k: u32, rng: &mut R) -> Result<ExplicitSource> {
    let lh = n / 2;
    let rh = n - lh;
    let a = (k / 2).min(lh as u32);
    let b = k - a;
    if b as usize > rh {
        return Err(Error::EntropyOutOfRange { k: k as f64, max: n as f64 });
    }
    let lefts = ExplicitSource::random_flat(lh, a, rng);
    let mut support = Vec::new();
    for l in lefts.support() {
        let rights = ExplicitSource::random_flat(rh, b, rng);
        support.extend(rights.support().map(|r| l.concat(r)));
    }
    ExplicitSource::flat(n, support)
}

/// The standard family: a flat block-source for the block argument and an
/// independent flat source for the weak argument, both of entropy `k`.
pub fn standard_family(n: usize, k: u32) -> impl FnMut(&mut crate::rng::Rng) -> Result<(ExplicitSource, ExplicitSource)> {
    move |rng| Ok((random_block_flat(n, k, rng)?, ExplicitSource::random_flat(n, k, rng)))
}

pub fn verify_extractor<G>(
    ext: &dyn BlockWeakExtractor,
    mut family: G,
    family_name: &str,
    trials: usize,
    threshold: f64,
    seed: u64,
) -> Result<ExtractorVerdict>
where
    G: FnMut(&mut crate::rng::Rng) -> Result<(ExplicitSource, ExplicitSource)>,
{
    let mut rng = crate::rng::seeded(seed);
    let mut worst = Mass::zero();
    for _ in 0..trials {
        let (x, y) = family(&mut rng)?;
        let (plain, strong) = exact_output_distance(ext, &x, &y)?;
        worst = worst.max(plain).max(strong);
    }
    let max_observed_sd = mass_to_f64(&worst);
    Ok(ExtractorVerdict { max_observed_sd, trials, family: family_name.to_string(), threshold, pass: max_observed_sd <= threshold })
}
