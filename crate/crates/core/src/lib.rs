//! Cancelable biometrics vault (CBV): the key-binding scheme, the attacks
//! that break it, and a seeded experiment harness measuring them.
//!
//! * [`bitcore`]: packed bit strings.
//! * [`bioencoding`]: the cancelable transform producing biocodes `{b, c, p}`.
//! * [`vault`]: key binding (chaffing) and key release (winnowing).
//! * [`cryptanalysis`]: preimage forgery, linkability, key recovery.
//! * [`bench`]: Monte-Carlo estimators, timing and report emission.

pub mod bench;
pub mod bioencoding;
pub mod bitcore;
pub mod cryptanalysis;
mod error;
pub mod fixtures;
pub mod vault;

pub use bioencoding::{authenticate, biocode_distance, derive_layout, enroll, enroll_with};
pub use bioencoding::{Biocode, Decision, Geometry, PublicParams, WordLayout};
pub use bitcore::BitString;
pub use error::{Error, Result};
pub use vault::{digest_key, key_bind, key_bind_with, key_release, FakePolicy, Key, Release, VaultRecord};
