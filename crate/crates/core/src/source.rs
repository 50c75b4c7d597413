//! Exactly represented distributions over fixed-length bit strings.
//!
//! Masses are exact rationals. Flat and dyadic sources therefore carry no
//! rounding at all, and every subsource postcondition in the crate can be
//! checked exactly. Quantities reported in bits (min-entropy, deficiency) are
//! `f64` and compared with [`TOLERANCE`].

use std::collections::{BTreeMap, BTreeSet};

use num::bigint::Sign;
use num::{BigInt, BigRational, One, Signed, ToPrimitive, Zero};
use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bits::{node_range, BitString, TreeNode};
use crate::error::{Error, Result};

pub type Mass = BigRational;

/// Comparison tolerance for quantities measured in bits.
pub const TOLERANCE: f64 = 1e-9;

/// `log2` of a positive big integer, accurate for arbitrarily large values.
pub fn log2_bigint(x: &BigInt) -> f64 {
    debug_assert!(x.sign() == Sign::Plus);
    let bits = x.bits();
    if bits <= 1000 {
        return x.to_f64().expect("fits in f64").log2();
    }
    let shift = bits - 64;
    let top: BigInt = x >> shift;
    top.to_f64().expect("fits in f64").log2() + shift as f64
}

pub fn log2_mass(p: &Mass) -> f64 {
    log2_bigint(p.numer()) - log2_bigint(p.denom())
}

pub fn mass_to_f64(p: &Mass) -> f64 {
    p.to_f64().unwrap_or_else(|| log2_mass(p).exp2())
}

/// `2^-k` as an exact mass.
pub fn pow2_neg(k: u32) -> Mass {
    Mass::new(BigInt::one(), BigInt::one() << k)
}

/// Whether `mass >= 2^-bits`, exact when `bits` is an integer.
pub fn mass_at_least_pow2(mass: &Mass, bits: f64) -> bool {
    if bits <= 0.0 {
        return *mass >= Mass::one();
    }
    if bits.fract() == 0.0 && bits < 1e6 {
        return *mass >= pow2_neg(bits as u32);
    }
    -log2_mass(mass) <= bits + TOLERANCE
}

/// Denominator exponent when `p` is dyadic.
pub fn dyadic_exponent(p: &Mass) -> Option<u64> {
    let d = p.denom();
    let tz = d.trailing_zeros()?;
    (d >> tz == BigInt::one()).then_some(tz)
}

#[derive(Clone, PartialEq, Eq)]
pub struct ExplicitSource {
    n: usize,
    atoms: BTreeMap<BitString, Mass>,
}

impl std::fmt::Debug for ExplicitSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut m = f.debug_map();
        for (x, p) in self.atoms.iter().take(16) {
            m.entry(&x.to_string(), &p.to_string());
        }
        m.finish()?;
        if self.atoms.len() > 16 {
            write!(f, " (+{} atoms)", self.atoms.len() - 16)?;
        }
        Ok(())
    }
}

impl ExplicitSource {
    /// Builds a source from exact masses. Repeated strings are merged; the
    /// total must be exactly one.
    pub fn from_atoms<I>(n: usize, atoms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (BitString, Mass)>,
    {
        if n == 0 {
            return Err(Error::InvalidSource("bit length must be positive".into()));
        }
        let mut map: BTreeMap<BitString, Mass> = BTreeMap::new();
        for (x, p) in atoms {
            if x.len() != n {
                return Err(Error::LengthMismatch { expected: n, found: x.len() });
            }
            if p.is_negative() {
                return Err(Error::InvalidSource(format!("negative mass {p} on {x}")));
            }
            if p.is_zero() {
                continue;
            }
            *map.entry(x).or_insert_with(Mass::zero) += p;
        }
        let total: Mass = map.values().sum();
        if !total.is_one() {
            return Err(Error::InvalidSource(format!("masses sum to {total}, not 1")));
        }
        Ok(ExplicitSource { n, atoms: map })
    }

    /// Builds a source from floating-point weights summing to one within
    /// [`TOLERANCE`]. Each weight is taken exactly and the result renormalised.
    pub fn from_weights<I>(n: usize, atoms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (BitString, f64)>,
    {
        let mut exact = Vec::new();
        for (x, w) in atoms {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::InvalidSource(format!("weight {w} on {x} is not a probability")));
            }
            exact.push((x, Mass::from_float(w).expect("finite")));
        }
        let total: Mass = exact.iter().map(|(_, p)| p.clone()).sum();
        if (mass_to_f64(&total) - 1.0).abs() > TOLERANCE {
            return Err(Error::InvalidSource(format!("weights sum to {}, not 1", mass_to_f64(&total))));
        }
        Self::from_atoms(n, exact.into_iter().map(|(x, p)| (x, p / &total)))
    }

    /// Uniform distribution over `support`.
    pub fn flat<I: IntoIterator<Item = BitString>>(n: usize, support: I) -> Result<Self> {
        let support: BTreeSet<BitString> = support.into_iter().collect();
        if support.is_empty() {
            return Err(Error::InvalidSource("flat source over an empty set".into()));
        }
        let p = Mass::new(BigInt::one(), BigInt::from(support.len()));
        Self::from_atoms(n, support.into_iter().map(|x| (x, p.clone())))
    }

    pub fn uniform(n: usize) -> Self {
        Self::flat(n, BitString::all(n)).expect("non-empty")
    }

    pub fn point(x: BitString) -> Self {
        let n = x.len();
        Self::from_atoms(n, [(x, Mass::one())]).expect("valid point mass")
    }

    /// Uniform over a uniformly random subset of size `2^log_size`.
    pub fn random_flat<R: Rng + ?Sized>(n: usize, log_size: u32, rng: &mut R) -> Self {
        assert!(n < 64 && log_size as usize <= n);
        let chosen = index::sample(rng, 1usize << n, 1usize << log_size);
        Self::flat(n, chosen.into_iter().map(|v| BitString::from_u64(v as u64, n))).expect("non-empty")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn support_size(&self) -> usize {
        self.atoms.len()
    }

    pub fn atoms(&self) -> impl Iterator<Item = (&BitString, &Mass)> {
        self.atoms.iter()
    }

    pub fn support(&self) -> impl Iterator<Item = &BitString> {
        self.atoms.keys()
    }

    pub fn contains(&self, x: &BitString) -> bool {
        self.atoms.contains_key(x)
    }

    pub fn mass(&self, x: &BitString) -> Mass {
        self.atoms.get(x).cloned().unwrap_or_else(Mass::zero)
    }

    pub fn event_mass<'e, I: IntoIterator<Item = &'e BitString>>(&self, event: I) -> Mass {
        event.into_iter().filter_map(|x| self.atoms.get(x)).sum()
    }

    pub fn max_mass(&self) -> Mass {
        self.atoms.values().max().cloned().expect("sources are non-empty")
    }

    pub fn min_entropy(&self) -> f64 {
        -log2_mass(&self.max_mass())
    }

    pub fn is_flat(&self) -> bool {
        let first = self.atoms.values().next().expect("sources are non-empty");
        self.atoms.values().all(|p| p == first)
    }

    /// The single supported string, if the source is a point mass.
    pub fn constant_value(&self) -> Option<&BitString> {
        (self.atoms.len() == 1).then(|| self.atoms.keys().next().unwrap())
    }

    /// Distribution of `f(X)` for an `out_len`-bit valued `f`.
    pub fn push_forward<F>(&self, out_len: usize, f: F) -> Result<Self>
    where
        F: Fn(&BitString) -> BitString,
    {
        let mut map: BTreeMap<BitString, Mass> = BTreeMap::new();
        for (x, p) in &self.atoms {
            let y = f(x);
            if y.len() != out_len {
                return Err(Error::LengthMismatch { expected: out_len, found: y.len() });
            }
            *map.entry(y).or_insert_with(Mass::zero) += p;
        }
        Ok(ExplicitSource { n: out_len, atoms: map })
    }

    /// Distribution of the substring `X_v` associated with tree node `v`.
    pub fn marginalize(&self, v: &TreeNode) -> Result<Self> {
        let (start, end) = node_range(self.n, v)?;
        if start == 0 && end == self.n {
            return Ok(self.clone());
        }
        self.push_forward(end - start, |x| x.slice(start, end))
    }

    pub fn left_marginal(&self) -> Result<Self> {
        self.require_even()?;
        let h = self.n / 2;
        self.push_forward(h, |x| x.slice(0, h))
    }

    pub fn right_marginal(&self) -> Result<Self> {
        self.require_even()?;
        let h = self.n / 2;
        self.push_forward(self.n - h, |x| x.slice(h, self.n))
    }

    fn require_even(&self) -> Result<()> {
        if self.n % 2 == 1 {
            Err(Error::OddLength(self.n))
        } else {
            Ok(())
        }
    }

    /// Groups the support by left half: each fibre holds the right halves and
    /// joint masses for one supported left value.
    pub fn fibers(&self) -> Result<Vec<Fiber>> {
        self.require_even()?;
        let h = self.n / 2;
        let mut out: Vec<Fiber> = Vec::new();
        // Lexicographic order keeps strings with the same left half contiguous.
        for (x, p) in &self.atoms {
            let left = x.slice(0, h);
            let right = x.slice(h, self.n);
            match out.last_mut() {
                Some(f) if f.left == left => {
                    f.mass += p;
                    f.atoms.push((right, p.clone()));
                }
                _ => out.push(Fiber { left, mass: p.clone(), atoms: vec![(right, p.clone())] }),
            }
        }
        Ok(out)
    }

    pub fn block_report(&self) -> Result<BlockSourceReport> {
        let fibers = self.fibers()?;
        let left_max = fibers.iter().map(|f| &f.mass).max().cloned().expect("non-empty");
        let cond_max = fibers.iter().map(Fiber::max_conditional).max().expect("non-empty");
        Ok(BlockSourceReport {
            k_left: -log2_mass(&left_max),
            k_right_min: -log2_mass(&cond_max),
            left_max_mass: left_max,
            conditional_max_mass: cond_max,
        })
    }

    /// Exact distance to the set of distributions with min-entropy at least `k`.
    pub fn distance_to_min_entropy(&self, k: f64) -> Result<f64> {
        if !(0.0..=self.n as f64).contains(&k) {
            return Err(Error::EntropyOutOfRange { k, max: self.n as f64 });
        }
        if k.fract() == 0.0 {
            let cap = pow2_neg(k as u32);
            let excess: Mass = self.atoms.values().filter(|p| **p > cap).map(|p| p - &cap).sum();
            return Ok(mass_to_f64(&excess));
        }
        let cap = (-k).exp2();
        Ok(self.atoms.values().map(|p| (mass_to_f64(p) - cap).max(0.0)).sum())
    }

    /// Conditions on `event`, which is intersected with the support first.
    pub fn condition<'e, I>(&self, event: I) -> Result<SubsourceHandle<'_>>
    where
        I: IntoIterator<Item = &'e BitString>,
    {
        let event: BTreeSet<BitString> = event.into_iter().filter(|x| self.contains(x)).cloned().collect();
        SubsourceHandle::new(self, event)
    }

    /// Conditions on the strings satisfying `pred`.
    pub fn condition_on<F: Fn(&BitString) -> bool>(&self, pred: F) -> Result<SubsourceHandle<'_>> {
        let event: BTreeSet<BitString> = self.atoms.keys().filter(|x| pred(x)).cloned().collect();
        SubsourceHandle::new(self, event)
    }

    pub fn whole(&self) -> SubsourceHandle<'_> {
        SubsourceHandle { parent: self, event: self.atoms.keys().cloned().collect(), mass: Mass::one() }
    }

    pub fn sampler(&self) -> Sampler {
        let (values, weights): (Vec<_>, Vec<_>) = self.atoms.iter().map(|(x, p)| (x.clone(), mass_to_f64(p))).unzip();
        Sampler { index: WeightedIndex::new(weights).expect("positive weights"), values }
    }

    /// One draw. Build a [`Sampler`] once for repeated draws.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> BitString {
        self.sampler().sample(rng)
    }

    pub fn to_file(&self) -> SourceFile {
        let atoms = self
            .atoms
            .iter()
            .map(|(x, p)| match dyadic_exponent(p).zip(p.numer().to_u64()) {
                Some((den_pow2, num)) => AtomRecord { bits: x.clone(), num: Some(num), den_pow2: Some(den_pow2 as u32), p: None },
                None => AtomRecord { bits: x.clone(), num: None, den_pow2: None, p: Some(mass_to_f64(p)) },
            })
            .collect();
        SourceFile { n: self.n, atoms }
    }

    pub fn from_file(file: &SourceFile) -> Result<Self> {
        let exact = file.atoms.iter().all(|a| a.num.is_some());
        if exact {
            let atoms = file
                .atoms
                .iter()
                .map(|a| {
                    let den = a.den_pow2.ok_or_else(|| Error::Parse(format!("atom {} has num but no den_pow2", a.bits)))?;
                    Ok((a.bits.clone(), Mass::new(BigInt::from(a.num.unwrap()), BigInt::one() << den)))
                })
                .collect::<Result<Vec<_>>>()?;
            return Self::from_atoms(file.n, atoms);
        }
        let weights = file
            .atoms
            .iter()
            .map(|a| match (a.p, a.num, a.den_pow2) {
                (Some(p), _, _) => Ok((a.bits.clone(), p)),
                (None, Some(num), Some(den)) => Ok((a.bits.clone(), num as f64 / (den as f64).exp2())),
                _ => Err(Error::Parse(format!("atom {} carries neither p nor num/den_pow2", a.bits))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_weights(file.n, weights)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("serialisable")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_file(&serde_json::from_str(text)?)
    }
}

/// Statistical distance `(1/2) sum |a(x) - b(x)|`, exact.
pub fn statistical_distance_exact(a: &ExplicitSource, b: &ExplicitSource) -> Result<Mass> {
    if a.n != b.n {
        return Err(Error::LengthMismatch { expected: a.n, found: b.n });
    }
    let mut total = Mass::zero();
    for (x, p) in &a.atoms {
        let q = b.mass(x);
        if *p > q {
            total += p - q;
        }
    }
    // Both sides sum to one, so the positive part is half the L1 distance.
    Ok(total)
}

pub fn statistical_distance(a: &ExplicitSource, b: &ExplicitSource) -> Result<f64> {
    statistical_distance_exact(a, b).map(|d| mass_to_f64(&d))
}

/// Right halves and joint masses sharing one left half.
#[derive(Debug, Clone)]
pub struct Fiber {
    pub left: BitString,
    pub mass: Mass,
    pub atoms: Vec<(BitString, Mass)>,
}

impl Fiber {
    /// Largest conditional mass `Pr[right = b | left]`.
    pub fn max_conditional(&self) -> Mass {
        let top = self.atoms.iter().map(|(_, p)| p).max().expect("non-empty fibre");
        top / &self.mass
    }

    pub fn conditional_min_entropy(&self) -> f64 {
        -log2_mass(&self.max_conditional())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockSourceReport {
    pub k_left: f64,
    pub k_right_min: f64,
    #[serde(skip)]
    pub left_max_mass: Mass,
    #[serde(skip)]
    pub conditional_max_mass: Mass,
}

impl BlockSourceReport {
    pub fn block_entropy(&self) -> f64 {
        self.k_left.min(self.k_right_min)
    }

    pub fn is_block(&self, k: f64) -> bool {
        self.block_entropy() >= k - TOLERANCE
    }
}

/// A conditioning of a parent source on an event inside its support.
#[derive(Clone)]
pub struct SubsourceHandle<'a> {
    parent: &'a ExplicitSource,
    event: BTreeSet<BitString>,
    mass: Mass,
}

impl std::fmt::Debug for SubsourceHandle<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SubsourceHandle").field("event_size", &self.event.len()).field("deficiency", &self.deficiency()).finish()
    }
}

impl<'a> SubsourceHandle<'a> {
    fn new(parent: &'a ExplicitSource, event: BTreeSet<BitString>) -> Result<Self> {
        let mass = parent.event_mass(&event);
        if mass.is_zero() {
            return Err(Error::ZeroMassEvent);
        }
        Ok(SubsourceHandle { parent, event, mass })
    }

    pub fn parent(&self) -> &'a ExplicitSource {
        self.parent
    }

    pub fn event(&self) -> &BTreeSet<BitString> {
        &self.event
    }

    /// `Pr_parent[event]`.
    pub fn mass(&self) -> &Mass {
        &self.mass
    }

    pub fn deficiency(&self) -> f64 {
        -log2_mass(&self.mass)
    }

    /// Exact check of `deficiency <= d`.
    pub fn deficiency_at_most(&self, d: f64) -> bool {
        mass_at_least_pow2(&self.mass, d)
    }

    pub fn materialize(&self) -> ExplicitSource {
        let atoms = self.event.iter().map(|x| (x.clone(), self.parent.mass(x) / &self.mass)).collect();
        ExplicitSource { n: self.parent.n, atoms }
    }

    /// Further conditioning; the result is still a subsource of the parent.
    pub fn refine<F: Fn(&BitString) -> bool>(&self, pred: F) -> Result<SubsourceHandle<'a>> {
        let event = self.event.iter().filter(|x| pred(x)).cloned().collect();
        SubsourceHandle::new(self.parent, event)
    }

    pub fn to_record(&self) -> SubsourceRecord {
        SubsourceRecord { deficiency: self.deficiency(), mass: self.mass.to_string(), event: self.event.iter().cloned().collect() }
    }
}

/// Serialised form of a [`SubsourceHandle`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubsourceRecord {
    pub deficiency: f64,
    pub mass: String,
    pub event: Vec<BitString>,
}

pub struct Sampler {
    values: Vec<BitString>,
    index: WeightedIndex<f64>,
}

impl Sampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> BitString {
        self.values[self.index.sample(rng)].clone()
    }
}

/// On-disk source format. Exact atoms carry `num / 2^den_pow2`; the `p`
/// variant holds a float weight.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SourceFile {
    pub n: usize,
    pub atoms: Vec<AtomRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AtomRecord {
    pub bits: BitString,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub num: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub den_pow2: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub p: Option<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn bs(s: &str) -> BitString {
        s.parse().unwrap()
    }

    fn dyadic(num: u64, pow: u32) -> Mass {
        Mass::new(BigInt::from(num), BigInt::one() << pow)
    }

    #[test]
    fn min_entropy_examples() {
        assert_eq!(ExplicitSource::uniform(4).min_entropy(), 4.0);
        assert_eq!(ExplicitSource::point(bs("0000")).min_entropy(), 0.0);
        let s = ExplicitSource::from_atoms(2, [(bs("00"), dyadic(1, 1)), (bs("01"), dyadic(1, 2)), (bs("10"), dyadic(1, 2))]).unwrap();
        assert_eq!(s.min_entropy(), 1.0);
    }

    #[test]
    fn invalid_sources_are_rejected() {
        assert!(ExplicitSource::from_atoms(2, [(bs("00"), dyadic(1, 1))]).is_err());
        assert!(matches!(ExplicitSource::from_atoms(2, [(bs("000"), Mass::one())]), Err(Error::LengthMismatch { expected: 2, found: 3 })));
        assert!(ExplicitSource::from_weights(1, [(bs("0"), 0.5), (bs("1"), 0.4)]).is_err());
        let s = ExplicitSource::from_weights(1, [(bs("0"), 0.6), (bs("1"), 0.4 + 1e-12)]).unwrap();
        assert!(s.atoms().map(|(_, p)| p.clone()).sum::<Mass>().is_one());
    }

    #[test]
    fn statistical_distance_examples() {
        let u = ExplicitSource::uniform(1);
        let p0 = ExplicitSource::point(bs("0"));
        let p1 = ExplicitSource::point(bs("1"));
        assert_eq!(statistical_distance(&u, &u).unwrap(), 0.0);
        assert_eq!(statistical_distance(&p0, &p1).unwrap(), 1.0);
        assert_eq!(statistical_distance(&u, &p0).unwrap(), 0.5);
        assert!(statistical_distance(&u, &ExplicitSource::uniform(2)).is_err());
    }

    #[test]
    fn marginal_examples() {
        let u = ExplicitSource::uniform(4);
        assert_eq!(u.marginalize(&TreeNode::root()).unwrap(), u);
        assert_eq!(u.marginalize(&TreeNode::root().left()).unwrap(), ExplicitSource::uniform(2));
        let s = ExplicitSource::flat(4, [bs("0000"), bs("0011")]).unwrap();
        assert_eq!(s.marginalize(&TreeNode::root().left()).unwrap(), ExplicitSource::point(bs("00")));
        assert!(matches!(u.marginalize(&"000".parse().unwrap()), Err(Error::NodeTooDeep { .. })));
    }

    #[test]
    fn condition_examples() {
        let s = ExplicitSource::flat(3, BitString::all(3)).unwrap();
        let ev = [bs("000"), bs("101")];
        let h = s.condition(&ev).unwrap();
        assert_eq!(h.deficiency(), 2.0);
        assert!(h.deficiency_at_most(2.0) && !h.deficiency_at_most(1.999));
        assert_eq!(h.materialize().min_entropy(), 1.0);
        assert_eq!(s.whole().deficiency(), 0.0);
        assert_eq!(s.condition(s.support()).unwrap().deficiency(), 0.0);
        assert!(matches!(s.condition(&[]), Err(Error::ZeroMassEvent)));
        let p = ExplicitSource::point(bs("000"));
        assert!(matches!(p.condition(&[bs("001")]), Err(Error::ZeroMassEvent)));
    }

    #[test]
    fn deficiency_one_event_loses_at_most_one_bit() {
        let s = ExplicitSource::uniform(3);
        let h = s.condition_on(|x| x.bit(0)).unwrap();
        assert_eq!(h.deficiency(), 1.0);
        assert!(h.materialize().min_entropy() >= 2.0);
    }

    #[test]
    fn distance_to_min_entropy_examples() {
        assert_eq!(ExplicitSource::uniform(4).distance_to_min_entropy(4.0).unwrap(), 0.0);
        assert_eq!(ExplicitSource::point(bs("0000")).distance_to_min_entropy(1.0).unwrap(), 0.5);
        let s = ExplicitSource::from_weights(1, [(bs("0"), 0.6), (bs("1"), 0.4)]).unwrap();
        assert!((s.distance_to_min_entropy(1.0).unwrap() - 0.1).abs() < 1e-12);
        assert!(matches!(s.distance_to_min_entropy(2.0), Err(Error::EntropyOutOfRange { .. })));
        // fractional targets take the floating path
        let d = ExplicitSource::uniform(2).distance_to_min_entropy(1.5).unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn block_report_examples() {
        let r = ExplicitSource::uniform(8).block_report().unwrap();
        assert_eq!((r.k_left, r.k_right_min), (4.0, 4.0));
        let copy = ExplicitSource::flat(8, BitString::all(4).map(|l| l.concat(&l))).unwrap();
        assert_eq!(copy.block_report().unwrap().k_right_min, 0.0);
        let fixed = ExplicitSource::flat(8, BitString::all(4).map(|r| bs("1010").concat(&r))).unwrap();
        let r = fixed.block_report().unwrap();
        assert_eq!((r.k_left, r.k_right_min), (0.0, 4.0));
        assert!(r.is_block(0.0) && !r.is_block(0.5));
        assert!(matches!(ExplicitSource::uniform(3).block_report(), Err(Error::OddLength(3))));
    }

    #[test]
    fn sampling_is_reproducible() {
        let p = ExplicitSource::point(bs("0110"));
        let mut r = rng::seeded(1);
        assert!((0..50).all(|_| p.sample(&mut r) == bs("0110")));

        let u = ExplicitSource::uniform(4);
        let sampler = u.sampler();
        let draw = |seed| {
            let mut r = rng::seeded(seed);
            (0..20).map(|_| sampler.sample(&mut r)).collect::<Vec<_>>()
        };
        assert_eq!(draw(9), draw(9));
    }

    #[test]
    fn random_flat_has_expected_entropy() {
        let mut r = rng::seeded(3);
        for j in 0..=6 {
            let s = ExplicitSource::random_flat(6, j, &mut r);
            assert_eq!(s.support_size(), 1 << j);
            assert_eq!(s.min_entropy(), j as f64);
            assert!(s.is_flat());
        }
    }

    #[test]
    fn json_round_trip() {
        let s = ExplicitSource::from_atoms(2, [(bs("00"), dyadic(3, 2)), (bs("11"), dyadic(1, 2))]).unwrap();
        let back = ExplicitSource::from_json(&s.to_json()).unwrap();
        assert_eq!(s, back);
        let text = r#"{"n": 1, "atoms": [{"bits": "0", "p": 0.25}, {"bits": "1", "p": 0.75}]}"#;
        let f = ExplicitSource::from_json(text).unwrap();
        assert_eq!(f.mass(&bs("1")), dyadic(3, 2));
        // non-dyadic masses fall back to the float form
        let third = ExplicitSource::flat(2, [bs("00"), bs("01"), bs("10")]).unwrap();
        assert!(third.to_json().contains("\"p\""));
    }

    #[test]
    fn log2_of_huge_values() {
        let x = BigInt::one() << 5000u32;
        assert_eq!(log2_bigint(&x), 5000.0);
        let p = Mass::new(BigInt::from(3), BigInt::one() << 2000u32);
        assert!((log2_mass(&p) - (3f64.log2() - 2000.0)).abs() < 1e-9);
    }
}
