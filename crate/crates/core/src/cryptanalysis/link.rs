//! Distinguishing whether two biocodes come from the same template.

use serde::{Deserialize, Serialize};

use crate::bioencoding::Biocode;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LinkOutcome {
    SameUser,
    DifferentUsers,
    Failure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkVerdict {
    pub outcome: LinkOutcome,
    /// 1-based index of the word that ended the scan; absent for `SameUser`.
    pub deciding_word: Option<usize>,
}

/// Walks both layouts word by word. Words that are not aligned make the
/// comparison impossible (`Failure`); aligned words with different leaked
/// parities prove different templates (`DifferentUsers`).
///
/// Alignment is decided on word lengths. Before the final word this is the
/// same as comparing selector bits; the final word's selector bit does not
/// affect its length and is ignored.
pub fn link_biocodes(a: &Biocode, b: &Biocode) -> Result<LinkVerdict> {
    if a.geometry() != b.geometry() {
        return Err(Error::ParamMismatch);
    }
    let (la, lb) = (a.layout().lengths(), b.layout().lengths());
    for j in 0..la.len().min(lb.len()) {
        if la[j] != lb[j] {
            return Ok(LinkVerdict {
                outcome: LinkOutcome::Failure,
                deciding_word: Some(j + 1),
            });
        }
        if a.leaked_parity(j) != b.leaked_parity(j) {
            return Ok(LinkVerdict {
                outcome: LinkOutcome::DifferentUsers,
                deciding_word: Some(j + 1),
            });
        }
    }
    Ok(LinkVerdict {
        outcome: LinkOutcome::SameUser,
        deciding_word: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bioencoding::{enroll, enroll_with, Geometry};
    use crate::bitcore::BitString;
    use crate::fixtures;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn worked_example_pairs() {
        let bc = fixtures::example_one().biocodes;
        assert_eq!(
            link_biocodes(&bc[0], &bc[1]).unwrap(),
            LinkVerdict {
                outcome: LinkOutcome::SameUser,
                deciding_word: None
            }
        );
        assert_eq!(
            link_biocodes(&bc[0], &bc[5]).unwrap(),
            LinkVerdict {
                outcome: LinkOutcome::DifferentUsers,
                deciding_word: Some(1)
            }
        );
        assert_eq!(
            link_biocodes(&bc[0], &bc[2]).unwrap(),
            LinkVerdict {
                outcome: LinkOutcome::Failure,
                deciding_word: Some(1)
            }
        );
    }

    #[test]
    fn same_template_never_reads_as_different() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let g = Geometry::new(48, 3, 5).unwrap();
        for _ in 0..200 {
            let x = BitString::random(48, &mut rng);
            let a = enroll(&x, &g, &mut rng).unwrap();
            let b = enroll(&x, &g, &mut rng).unwrap();
            assert_ne!(link_biocodes(&a, &b).unwrap().outcome, LinkOutcome::DifferentUsers);
        }
    }

    #[test]
    fn final_word_selector_bit_is_ignored() {
        let g = Geometry::new(8, 3, 5).unwrap();
        let x: BitString = "10010101".parse().unwrap();
        let r = BitString::zeros(8);
        let a = enroll_with(&x, &g, &r, &"01000000".parse().unwrap()).unwrap();
        let b = enroll_with(&x, &g, &r, &"00000000".parse().unwrap()).unwrap();
        assert_ne!(a.p(), b.p());
        assert_eq!(link_biocodes(&a, &b).unwrap().outcome, LinkOutcome::SameUser);
    }

    #[test]
    fn mismatched_geometry() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = enroll(
            &BitString::random(8, &mut rng),
            &Geometry::new(8, 3, 5).unwrap(),
            &mut rng,
        )
        .unwrap();
        let b = enroll(
            &BitString::random(8, &mut rng),
            &Geometry::new(8, 2, 5).unwrap(),
            &mut rng,
        )
        .unwrap();
        assert!(matches!(link_biocodes(&a, &b), Err(Error::ParamMismatch)));
    }
}
