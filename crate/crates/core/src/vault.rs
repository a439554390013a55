//! Key binding by chaffing and key release by winnowing.
//!
//! Bit `i` of the key selects whether slot `i` of the vault holds a biocode of
//! the enrolled template (1) or of a fake template (0). Release re-runs the
//! distance test for every slot and checks the rebuilt key against a SHA-256
//! digest stored next to the biocodes.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bioencoding::{biocode_distance, enroll_with, Biocode, PublicParams};
use crate::bitcore::BitString;
use crate::error::{Error, Result};

pub const HASH_ALG: &str = "SHA-256";

/// Bounded retries when a fake template collides with the enrolled one.
const FAKE_RESAMPLE_LIMIT: usize = 64;

/// The bound cryptographic key.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Key(BitString);

impl Key {
    pub fn new(bits: BitString) -> Result<Self> {
        if bits.is_empty() {
            return Err(Error::InvalidParams("key must have at least one bit".into()));
        }
        Ok(Key(bits))
    }

    pub fn from_hex(hex: &str, bits: usize) -> Result<Self> {
        Key::new(BitString::from_hex(hex, bits)?)
    }

    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        Key(BitString::random(len, rng))
    }

    pub fn bits(&self) -> &BitString {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for Key {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl FromStr for Key {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Key::new(s.parse()?)
    }
}

pub type KeyDigest = [u8; 32];

/// SHA-256 of `len as u64 (little-endian) || bits packed LSB-first per byte`.
pub fn digest_key(key: &Key) -> KeyDigest {
    digest_bits(key.bits())
}

pub(crate) fn digest_bits(bits: &BitString) -> KeyDigest {
    let mut h = Sha256::new();
    h.update((bits.len() as u64).to_le_bytes());
    h.update(bits.to_le_bytes());
    h.finalize().into()
}

/// How fake templates are produced during binding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FakePolicy {
    /// One uniformly random fake shared by every zero bit.
    SharedRandom,
    /// One fake obtained by permuting the enrolled template's bits.
    SharedPermuted,
    /// A fresh random fake for every zero bit.
    PerBitRandom,
}

impl FakePolicy {
    pub fn is_shared(self) -> bool {
        !matches!(self, FakePolicy::PerBitRandom)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FakePolicy::SharedRandom => "shared-random",
            FakePolicy::SharedPermuted => "shared-permuted",
            FakePolicy::PerBitRandom => "per-bit-random",
        }
    }
}

impl fmt::Display for FakePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FakePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shared-random" => Ok(FakePolicy::SharedRandom),
            "shared-permuted" => Ok(FakePolicy::SharedPermuted),
            "per-bit-random" => Ok(FakePolicy::PerBitRandom),
            other => Err(Error::InvalidParams(format!("unknown fake policy {other:?}"))),
        }
    }
}

/// Every random choice of one binding, drawn up front.
///
/// `fakes` holds one template for shared policies and one per key bit for
/// [`FakePolicy::PerBitRandom`] (entries for one-bits are ignored). `masks`
/// holds the `(r, p)` pair used for each slot.
#[derive(Debug, Clone)]
pub struct BindingMaterial {
    pub fakes: Vec<BitString>,
    pub masks: Vec<(BitString, BitString)>,
}

impl BindingMaterial {
    /// Draws fakes first, then the `(r, p)` pairs slot by slot.
    pub fn sample<R: Rng + ?Sized>(
        x_enroll: &BitString,
        key_len: usize,
        n: usize,
        policy: FakePolicy,
        rng: &mut R,
    ) -> Result<Self> {
        let fakes = match policy {
            FakePolicy::SharedRandom => vec![sample_random_fake(x_enroll, n, rng)?],
            FakePolicy::SharedPermuted => vec![sample_permuted_fake(x_enroll, rng)?],
            FakePolicy::PerBitRandom => (0..key_len)
                .map(|_| sample_random_fake(x_enroll, n, rng))
                .collect::<Result<_>>()?,
        };
        let masks = (0..key_len)
            .map(|_| (BitString::random(n, rng), BitString::random(n, rng)))
            .collect();
        Ok(BindingMaterial { fakes, masks })
    }
}

fn sample_random_fake<R: Rng + ?Sized>(x: &BitString, n: usize, rng: &mut R) -> Result<BitString> {
    for _ in 0..FAKE_RESAMPLE_LIMIT {
        let f = BitString::random(n, rng);
        if &f != x {
            return Ok(f);
        }
    }
    Err(Error::DegenerateFake)
}

fn sample_permuted_fake<R: Rng + ?Sized>(x: &BitString, rng: &mut R) -> Result<BitString> {
    let mut bits = x.to_bits();
    for _ in 0..FAKE_RESAMPLE_LIMIT {
        bits.shuffle(rng);
        let f = BitString::from_bits(&bits);
        if &f != x {
            return Ok(f);
        }
    }
    Err(Error::DegenerateFake)
}

/// Biocodes, key digest and public parameters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VaultRecord {
    pub params: PublicParams,
    pub biocodes: Vec<Biocode>,
    pub key_digest: KeyDigest,
    /// Bookkeeping only; attacks never read it.
    pub fake_policy: Option<FakePolicy>,
}

/// What an attacker is given: everything in the vault except the policy tag.
#[derive(Debug, Clone, Copy)]
pub struct PublicVault<'a> {
    pub params: &'a PublicParams,
    pub biocodes: &'a [Biocode],
    pub key_digest: &'a KeyDigest,
}

impl VaultRecord {
    pub fn key_len(&self) -> usize {
        self.biocodes.len()
    }

    pub fn public_view(&self) -> PublicVault<'_> {
        PublicVault {
            params: &self.params,
            biocodes: &self.biocodes,
            key_digest: &self.key_digest,
        }
    }

    /// Builds a record from public parts, checking every biocode against
    /// the parameters.
    pub fn from_parts(params: PublicParams, biocodes: Vec<Biocode>, key_digest: KeyDigest) -> Result<Self> {
        if biocodes.is_empty() {
            return Err(Error::InvalidParams("vault holds no biocodes".into()));
        }
        if biocodes.iter().any(|b| b.geometry() != &params.geometry) {
            return Err(Error::ParamMismatch);
        }
        Ok(VaultRecord {
            params,
            biocodes,
            key_digest,
            fake_policy: None,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

impl PublicVault<'_> {
    pub fn matches(&self, candidate: &BitString) -> bool {
        &digest_bits(candidate) == self.key_digest
    }
}

#[derive(Serialize, Deserialize)]
struct VaultJson {
    params: PublicParams,
    biocodes: Vec<Biocode>,
    key_digest_hex: String,
    hash_alg: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fake_policy: Option<FakePolicy>,
}

impl Serialize for VaultRecord {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        VaultJson {
            params: self.params,
            biocodes: self.biocodes.clone(),
            key_digest_hex: hex::encode(self.key_digest),
            hash_alg: HASH_ALG.to_string(),
            fake_policy: self.fake_policy,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for VaultRecord {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = VaultJson::deserialize(deserializer)?;
        if raw.hash_alg != HASH_ALG {
            return Err(D::Error::custom(format!("unsupported hash {}", raw.hash_alg)));
        }
        let bytes = hex::decode(&raw.key_digest_hex).map_err(D::Error::custom)?;
        let key_digest: KeyDigest = bytes
            .try_into()
            .map_err(|_| D::Error::custom("key digest must be 32 bytes"))?;
        let mut vault = VaultRecord::from_parts(raw.params, raw.biocodes, key_digest).map_err(D::Error::custom)?;
        vault.fake_policy = raw.fake_policy;
        Ok(vault)
    }
}

/// Binds `key` to `x_enroll` with pre-drawn randomness.
pub fn key_bind_with(
    x_enroll: &BitString,
    key: &Key,
    params: &PublicParams,
    policy: FakePolicy,
    material: &BindingMaterial,
) -> Result<VaultRecord> {
    let n = params.n();
    if x_enroll.len() != n {
        return Err(Error::LengthMismatch {
            left: x_enroll.len(),
            right: n,
        });
    }
    let l = key.len();
    let expected_fakes = if policy.is_shared() { 1 } else { l };
    if material.fakes.len() != expected_fakes || material.masks.len() != l {
        return Err(Error::InvalidParams(format!(
            "binding material has {} fakes and {} masks for a {l}-bit key",
            material.fakes.len(),
            material.masks.len()
        )));
    }
    let biocodes = (0..l)
        .map(|i| {
            let (r, p) = &material.masks[i];
            let source = if key.bits().get(i) {
                x_enroll
            } else {
                let fake = &material.fakes[if policy.is_shared() { 0 } else { i }];
                if fake == x_enroll {
                    return Err(Error::DegenerateFake);
                }
                fake
            };
            enroll_with(source, &params.geometry, r, p)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(VaultRecord {
        params: *params,
        biocodes,
        key_digest: digest_key(key),
        fake_policy: Some(policy),
    })
}

/// Binds `key` to `x_enroll`, drawing all randomness from `rng`.
pub fn key_bind<R: Rng + ?Sized>(
    x_enroll: &BitString,
    key: &Key,
    params: &PublicParams,
    policy: FakePolicy,
    rng: &mut R,
) -> Result<VaultRecord> {
    if x_enroll.len() != params.n() {
        return Err(Error::LengthMismatch {
            left: x_enroll.len(),
            right: params.n(),
        });
    }
    let material = BindingMaterial::sample(x_enroll, key.len(), params.n(), policy, rng)?;
    key_bind_with(x_enroll, key, params, policy, &material)
}

/// Result of a release attempt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Release {
    Released(Key),
    /// The winnowed key did not match the stored digest.
    Rejected {
        winnowed: BitString,
    },
}

impl Release {
    pub fn key(&self) -> Option<&Key> {
        match self {
            Release::Released(k) => Some(k),
            Release::Rejected { .. } => None,
        }
    }
}

/// Per-slot winnowing: bit `i` is 1 iff the fresh template lands within
/// distance `< tau` of biocode `i`.
pub fn winnow(x_fresh: &BitString, vault: &VaultRecord, tau: usize) -> Result<BitString> {
    let bits = vault
        .biocodes
        .iter()
        .map(|bc| biocode_distance(bc, x_fresh).map(|d| d < tau))
        .collect::<Result<Vec<_>>>()?;
    Ok(BitString::from_bools(bits))
}

pub fn key_release(x_fresh: &BitString, vault: &VaultRecord, tau: usize) -> Result<Release> {
    if x_fresh.len() != vault.params.n() {
        return Err(Error::LengthMismatch {
            left: x_fresh.len(),
            right: vault.params.n(),
        });
    }
    let winnowed = winnow(x_fresh, vault, tau)?;
    if digest_bits(&winnowed) == vault.key_digest {
        Ok(Release::Released(Key(winnowed)))
    } else {
        Ok(Release::Rejected { winnowed })
    }
}
