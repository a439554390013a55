//! The two 8-bit worked examples, kept as regression fixtures.
//!
//! The example biocodes list word lengths rather than selectors. Selector
//! `01` encodes layout `[3,5]` and `10` encodes `[5,3]`; the second bit only
//! marks the final word and does not influence the layout.

use crate::bioencoding::{Biocode, Geometry, PublicParams};
use crate::bitcore::BitString;
use crate::error::Result;
use crate::vault::{digest_key, key_bind_with, BindingMaterial, FakePolicy, Key, VaultRecord};

#[derive(Debug, Clone)]
pub struct WorkedExample {
    pub params: PublicParams,
    pub key: Key,
    pub x_enroll: BitString,
    pub x_fake: BitString,
    pub biocodes: Vec<Biocode>,
    /// The four candidate keys in the order the attack enumerates them.
    pub candidates: [Key; 4],
}

fn bits(s: &str) -> BitString {
    s.parse().expect("fixture bit string")
}

fn key(s: &str) -> Key {
    s.parse().expect("fixture key")
}

fn params() -> PublicParams {
    PublicParams::new(Geometry::new(8, 3, 5).expect("geometry"), 1).expect("params")
}

fn biocode(b: &str, c: &str, lengths: [usize; 2]) -> Biocode {
    let p = if lengths == [3, 5] { "01" } else { "10" };
    Biocode::from_parts(bits(b), bits(c), bits(p), params().geometry).expect("fixture biocode")
}

/// Key `0x4b`, enrolled `0xa9`, fake `0xb3`. Every first-word group is
/// populated, so the attack resolves at depth 1.
pub fn example_one() -> WorkedExample {
    WorkedExample {
        params: params(),
        key: key("11010010"),
        x_enroll: bits("10010101"),
        x_fake: bits("11001101"),
        biocodes: vec![
            biocode("11", "11010010", [3, 5]),
            biocode("10", "11001110", [3, 5]),
            biocode("10", "10100000", [5, 3]),
            biocode("01", "11111000", [3, 5]),
            biocode("10", "10111000", [5, 3]),
            biocode("00", "01110000", [3, 5]),
            biocode("11", "00111010", [5, 3]),
            biocode("01", "00100010", [5, 3]),
        ],
        candidates: [key("00000110"), key("00101101"), key("11010010"), key("11111001")],
    }
}

/// Key `0x23`, enrolled `0x34`, fake `0xa6`. The two templates agree on the
/// first 5-bit word, so the `[5,3]` group only splits on its second word.
pub fn example_two() -> WorkedExample {
    WorkedExample {
        params: params(),
        key: key("11000100"),
        x_enroll: bits("00101100"),
        x_fake: bits("01100101"),
        biocodes: vec![
            biocode("01", "01001011", [3, 5]),
            biocode("10", "00010111", [3, 5]),
            biocode("00", "00000110", [5, 3]),
            biocode("00", "01111000", [3, 5]),
            biocode("11", "00001100", [5, 3]),
            biocode("11", "11010101", [5, 3]),
            biocode("11", "01000100", [5, 3]),
            biocode("01", "00101010", [5, 3]),
        ],
        candidates: [key("00111011"), key("00010100"), key("11101011"), key("11000100")],
    }
}

/// The vault an attacker sees: the example biocodes and the key digest.
pub fn example_vault(ex: &WorkedExample) -> VaultRecord {
    VaultRecord::from_parts(ex.params, ex.biocodes.clone(), digest_key(&ex.key)).expect("fixture vault")
}

/// Per-slot `(r, p)` that reproduce the example biocodes, with
/// `r = c ⊕ source template` and `p` padded to `n` bits.
pub fn example_material(ex: &WorkedExample) -> BindingMaterial {
    let masks = ex
        .biocodes
        .iter()
        .enumerate()
        .map(|(i, bc)| {
            let source = if ex.key.bits().get(i) { &ex.x_enroll } else { &ex.x_fake };
            let r = bc.c().xor(source).expect("fixture lengths");
            let mut p = BitString::zeros(ex.params.n());
            for j in 0..bc.p().len() {
                p.set(j, bc.p().get(j));
            }
            (r, p)
        })
        .collect();
    BindingMaterial {
        fakes: vec![ex.x_fake.clone()],
        masks,
    }
}

/// Re-runs key binding with the injected randomness.
pub fn bind_example(ex: &WorkedExample) -> Result<VaultRecord> {
    key_bind_with(
        &ex.x_enroll,
        &ex.key,
        &ex.params,
        FakePolicy::SharedRandom,
        &example_material(ex),
    )
}
