//! The cancelable transform: a template `x` is enrolled as a biocode
//! `{b, c, p}` where `c = x ⊕ r`, `p` selects word lengths, and `b` holds the
//! parities of `r`'s words. `r` itself is discarded.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bitcore::BitString;
use crate::error::{Error, Result};

/// Template length and the two word lengths. Everything needed to
/// re-derive a biocode's word layout from its selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Geometry {
    pub n: usize,
    pub m1: usize,
    pub m2: usize,
}

impl Geometry {
    /// Standard geometry: `1 <= m1 < m2 <= n`.
    pub fn new(n: usize, m1: usize, m2: usize) -> Result<Self> {
        let g = Geometry { n, m1, m2 };
        g.validate(false)?;
        Ok(g)
    }

    /// Single word length. Only meant for tests of the degenerate case.
    pub fn degenerate(n: usize, m: usize) -> Result<Self> {
        let g = Geometry { n, m1: m, m2: m };
        g.validate(true)?;
        Ok(g)
    }

    pub fn is_degenerate(&self) -> bool {
        self.m1 == self.m2
    }

    pub fn validate(&self, allow_degenerate: bool) -> Result<()> {
        let Geometry { n, m1, m2 } = *self;
        if m1 == 0 || m2 > n || m1 > m2 {
            return Err(Error::InvalidParams(format!(
                "need 1 <= m1 <= m2 <= n, got n={n} m1={m1} m2={m2}"
            )));
        }
        if m1 == m2 && !allow_degenerate {
            return Err(Error::InvalidParams(format!(
                "m1 = m2 = {m1} is only allowed in degenerate mode"
            )));
        }
        Ok(())
    }

    /// Lower bound on the mean word count, `2n / (m1 + m2)`.
    pub fn wald_mean_d2(&self) -> f64 {
        2.0 * self.n as f64 / (self.m1 + self.m2) as f64
    }
}

/// Public parameters of a deployment: geometry plus the decision threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PublicParams {
    #[serde(flatten)]
    pub geometry: Geometry,
    pub tau: usize,
}

impl PublicParams {
    pub fn new(geometry: Geometry, tau: usize) -> Result<Self> {
        if tau == 0 {
            return Err(Error::InvalidParams("tau must be at least 1".into()));
        }
        Ok(PublicParams { geometry, tau })
    }

    /// `tau = max(1, floor(d2 / 4))` with `d2` taken at its expected value.
    pub fn with_default_tau(geometry: Geometry) -> Self {
        let tau = ((geometry.wald_mean_d2() / 4.0).floor() as usize).max(1);
        PublicParams { geometry, tau }
    }

    pub fn n(&self) -> usize {
        self.geometry.n
    }
}

/// Partition of an `n`-bit string into `d2` words.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordLayout {
    lengths: Vec<usize>,
    offsets: Vec<usize>,
    p_prefix: BitString,
}

impl WordLayout {
    pub fn lengths(&self) -> &[usize] {
        &self.lengths
    }

    pub fn d2(&self) -> usize {
        self.lengths.len()
    }

    /// The first `d2` selector bits that produced this layout.
    pub fn p_prefix(&self) -> &BitString {
        &self.p_prefix
    }

    /// `(offset, length)` of each word, offsets 0-based.
    pub fn words(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.offsets.iter().copied().zip(self.lengths.iter().copied())
    }

    /// `(offset, length)` of word `j` (0-based).
    pub fn word(&self, j: usize) -> (usize, usize) {
        (self.offsets[j], self.lengths[j])
    }

    /// Parity of each word of `x` under this layout.
    pub fn word_parities(&self, x: &BitString) -> Result<BitString> {
        let total: usize = self.lengths.iter().sum();
        if total != x.len() {
            return Err(Error::LayoutMismatch {
                layout: total,
                len: x.len(),
            });
        }
        Ok(BitString::from_bools(
            self.words().map(|(off, len)| x.range_parity(off, len)),
        ))
    }
}

/// Walks the selector: while more than `m2` bits remain, bit `i` of `p`
/// picks `m1` (0) or `m2` (1); the remainder becomes one final word.
pub fn derive_layout(p: &BitString, geometry: &Geometry) -> Result<WordLayout> {
    let mut lengths = Vec::new();
    let mut remaining = geometry.n;
    let mut i = 0;
    while remaining > geometry.m2 {
        if i >= p.len() {
            return Err(Error::InsufficientSelector {
                needed: i + 1,
                available: p.len(),
            });
        }
        let w = if p.get(i) { geometry.m2 } else { geometry.m1 };
        lengths.push(w);
        remaining -= w;
        i += 1;
    }
    if remaining > 0 {
        lengths.push(remaining);
    }
    let d2 = lengths.len();
    if p.len() < d2 {
        return Err(Error::InsufficientSelector {
            needed: d2,
            available: p.len(),
        });
    }
    let offsets = lengths
        .iter()
        .scan(0, |acc, &w| {
            let start = *acc;
            *acc += w;
            Some(start)
        })
        .collect();
    Ok(WordLayout {
        lengths,
        offsets,
        p_prefix: p.truncated(d2),
    })
}

/// Output of one enrollment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Biocode {
    b: BitString,
    c: BitString,
    p: BitString,
    geometry: Geometry,
    layout: WordLayout,
}

impl Biocode {
    /// Assembles a biocode from its public components, checking that the
    /// selector yields a layout matching `b` and `c`.
    pub fn from_parts(b: BitString, c: BitString, p: BitString, geometry: Geometry) -> Result<Self> {
        geometry.validate(true)?;
        if c.len() != geometry.n {
            return Err(Error::MalformedBiocode(format!(
                "c has {} bits, expected n = {}",
                c.len(),
                geometry.n
            )));
        }
        let layout = derive_layout(&p, &geometry)?;
        if p.len() != layout.d2() || b.len() != layout.d2() {
            return Err(Error::MalformedBiocode(format!(
                "layout has {} words but |p| = {} and |b| = {}",
                layout.d2(),
                p.len(),
                b.len()
            )));
        }
        Ok(Biocode {
            b,
            c,
            p,
            geometry,
            layout,
        })
    }

    pub fn b(&self) -> &BitString {
        &self.b
    }

    pub fn c(&self) -> &BitString {
        &self.c
    }

    pub fn p(&self) -> &BitString {
        &self.p
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn layout(&self) -> &WordLayout {
        &self.layout
    }

    pub fn d2(&self) -> usize {
        self.layout.d2()
    }

    /// Parity of word `j` (0-based) of the enrolled template:
    /// `parity(word j of c) ⊕ b_j`. Anyone holding the biocode can compute it.
    pub fn leaked_parity(&self, j: usize) -> bool {
        let (off, len) = self.layout.word(j);
        self.c.range_parity(off, len) ^ self.b.get(j)
    }

    /// All leaked word parities of the enrolled template.
    pub fn leaked_parities(&self) -> BitString {
        let mut out = BitString::zeros(self.d2());
        for (j, (off, len)) in self.layout.words().enumerate() {
            out.set(j, self.c.range_parity(off, len) ^ self.b.get(j));
        }
        out
    }

    fn check_template(&self, x: &BitString) -> Result<()> {
        if x.len() != self.geometry.n {
            return Err(Error::LengthMismatch {
                left: x.len(),
                right: self.geometry.n,
            });
        }
        Ok(())
    }
}

/// Enrolls `x` with explicit `r` and `p`, both `n` bits.
pub fn enroll_with(x: &BitString, geometry: &Geometry, r: &BitString, p: &BitString) -> Result<Biocode> {
    if x.len() != geometry.n {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: geometry.n,
        });
    }
    if r.len() != geometry.n || p.len() != geometry.n {
        return Err(Error::LengthMismatch {
            left: r.len().max(p.len()),
            right: geometry.n,
        });
    }
    let layout = derive_layout(p, geometry)?;
    let b = layout.word_parities(r)?;
    let c = x.xor(r)?;
    let p = layout.p_prefix().clone();
    Ok(Biocode {
        b,
        c,
        p,
        geometry: *geometry,
        layout,
    })
}

/// Enrolls `x` with fresh uniform `r` and `p` drawn from `rng` (r first).
pub fn enroll<R: Rng + ?Sized>(x: &BitString, geometry: &Geometry, rng: &mut R) -> Result<Biocode> {
    let r = BitString::random(geometry.n, rng);
    let p = BitString::random(geometry.n, rng);
    enroll_with(x, geometry, &r, &p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    Success,
    Failure,
}

/// Hamming distance between `b` and the word parities of `x_fresh ⊕ c`.
pub fn biocode_distance(biocode: &Biocode, x_fresh: &BitString) -> Result<usize> {
    biocode.check_template(x_fresh)?;
    let r_prime = x_fresh.xor(&biocode.c)?;
    let b_prime = biocode.layout.word_parities(&r_prime)?;
    biocode.b.hamming(&b_prime)
}

/// Accepts when the distance is at most `tau`.
pub fn authenticate(x_fresh: &BitString, biocode: &Biocode, tau: usize) -> Result<(Decision, usize)> {
    let d = biocode_distance(biocode, x_fresh)?;
    let decision = if d <= tau { Decision::Success } else { Decision::Failure };
    Ok((decision, d))
}

#[derive(Serialize, Deserialize)]
struct BiocodeJson {
    b: BitString,
    c: BitString,
    p: BitString,
    n: usize,
    m1: usize,
    m2: usize,
}

impl Serialize for Biocode {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        BiocodeJson {
            b: self.b.clone(),
            c: self.c.clone(),
            p: self.p.clone(),
            n: self.geometry.n,
            m1: self.geometry.m1,
            m2: self.geometry.m2,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Biocode {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = BiocodeJson::deserialize(deserializer)?;
        let geometry = Geometry {
            n: raw.n,
            m1: raw.m1,
            m2: raw.m2,
        };
        Biocode::from_parts(raw.b, raw.c, raw.p, geometry).map_err(serde::de::Error::custom)
    }
}
