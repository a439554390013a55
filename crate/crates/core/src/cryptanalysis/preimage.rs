//! Preimages of a single biocode.
//!
//! A biocode pins down the parity of every word of the enrolled template and
//! nothing else, so any template with those word parities authenticates at
//! distance 0.

use num_bigint::BigUint;

use crate::bioencoding::{biocode_distance, Biocode};
use crate::bitcore::BitString;
use crate::error::{Error, Result};

/// Largest template length [`enumerate_preimages`] will walk.
pub const ENUMERATION_LIMIT: usize = 24;

fn binomial(n: usize, k: usize) -> BigUint {
    (0..k).fold(BigUint::from(1u32), |acc, i| acc * (n - i) / (i + 1))
}

fn check_range(n: usize, d2: usize, tau: usize) -> Result<()> {
    if d2 == 0 || d2 > n {
        return Err(Error::OutOfRange(format!("need 1 <= d2 <= n, got d2={d2} n={n}")));
    }
    if tau > d2 {
        return Err(Error::OutOfRange(format!("need tau <= d2, got tau={tau} d2={d2}")));
    }
    Ok(())
}

/// `2^(n - d2)`: templates whose word parities reproduce `b` exactly.
pub fn count_exact_preimages(n: usize, d2: usize) -> Result<BigUint> {
    check_range(n, d2, 0)?;
    Ok(BigUint::from(1u32) << (n - d2))
}

/// The summed closed form `Σ_{i=0}^{tau} C(d2, i) · 2^(n - (d2 - i))`.
///
/// This counts each template once per subset of "free" words it fits, so for
/// `tau >= 1` it overstates the true number of templates within distance
/// `tau`; see [`count_nearby_preimages_exact`].
pub fn count_nearby_preimages(n: usize, d2: usize, tau: usize) -> Result<BigUint> {
    check_range(n, d2, tau)?;
    Ok((0..=tau).map(|i| binomial(d2, i) << (n - (d2 - i))).sum())
}

/// Number of templates whose biocode distance is at most `tau`:
/// `2^(n - d2) · Σ_{i=0}^{tau} C(d2, i)`.
pub fn count_nearby_preimages_exact(n: usize, d2: usize, tau: usize) -> Result<BigUint> {
    check_range(n, d2, tau)?;
    let spheres: BigUint = (0..=tau).map(|i| binomial(d2, i)).sum();
    Ok(spheres << (n - d2))
}

/// Forges a template that authenticates against `biocode` at distance 0,
/// starting from the all-zero template.
pub fn forge_preimage(biocode: &Biocode) -> BitString {
    forge_preimage_from(biocode, &BitString::zeros(biocode.geometry().n)).expect("zero template has the right length")
}

/// Adjusts `base` so that every word has the leaked parity, flipping at most
/// the first bit of each word.
pub fn forge_preimage_from(biocode: &Biocode, base: &BitString) -> Result<BitString> {
    let n = biocode.geometry().n;
    if base.len() != n {
        return Err(Error::LengthMismatch {
            left: base.len(),
            right: n,
        });
    }
    let mut x = base.clone();
    for (j, (off, len)) in biocode.layout().words().enumerate() {
        if x.range_parity(off, len) != biocode.leaked_parity(j) {
            x.flip(off);
        }
    }
    Ok(x)
}

/// Every `n`-bit template within distance `tau` of `biocode`, by exhaustive
/// search through the verifier. Templates come out in increasing integer
/// order (bit 1 least significant).
pub fn enumerate_preimages(biocode: &Biocode, tau: usize) -> Result<Vec<BitString>> {
    let n = biocode.geometry().n;
    if n > ENUMERATION_LIMIT {
        return Err(Error::InstanceTooLarge {
            n,
            limit: ENUMERATION_LIMIT,
        });
    }
    let mut out = Vec::new();
    for v in 0..(1u64 << n) {
        let x = BitString::from_u64(v, n);
        if biocode_distance(biocode, &x)? <= tau {
            out.push(x);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bioencoding::{authenticate, enroll, Decision, Geometry};
    use crate::fixtures;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn exact_count_examples() {
        assert_eq!(count_exact_preimages(8, 2).unwrap(), BigUint::from(64u32));
        assert_eq!(count_exact_preimages(8, 8).unwrap(), BigUint::from(1u32));
        assert_eq!(count_exact_preimages(10, 3).unwrap(), BigUint::from(128u32));
        assert!(count_exact_preimages(8, 0).is_err());
        assert!(count_exact_preimages(8, 9).is_err());
        // wide templates stay exact
        assert_eq!(count_exact_preimages(4096, 1000).unwrap(), BigUint::from(1u32) << 3096);
    }

    #[test]
    fn nearby_count_examples() {
        assert_eq!(
            count_nearby_preimages(8, 2, 0).unwrap(),
            count_exact_preimages(8, 2).unwrap()
        );
        assert_eq!(count_nearby_preimages(8, 2, 1).unwrap(), BigUint::from(320u32));
        assert_eq!(count_nearby_preimages_exact(8, 2, 1).unwrap(), BigUint::from(192u32));
        assert_eq!(count_nearby_preimages_exact(8, 2, 2).unwrap(), BigUint::from(256u32));
        assert!(count_nearby_preimages(8, 2, 3).is_err());
    }

    #[test]
    fn summed_form_bounds_exact_count() {
        for n in 1..=16 {
            for d2 in 1..=n {
                for tau in 0..=d2 {
                    let summed = count_nearby_preimages(n, d2, tau).unwrap();
                    let exact = count_nearby_preimages_exact(n, d2, tau).unwrap();
                    assert!(summed >= exact);
                    assert_eq!(summed == exact, tau == 0);
                }
                assert_eq!(
                    count_nearby_preimages_exact(n, d2, d2).unwrap(),
                    BigUint::from(1u32) << n
                );
            }
        }
    }

    #[test]
    fn exhaustive_count_matches_exact_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let g = Geometry::new(10, 3, 5).unwrap();
        for _ in 0..10 {
            let x = BitString::random(10, &mut rng);
            let bc = enroll(&x, &g, &mut rng).unwrap();
            for tau in 0..=bc.d2() {
                let found = enumerate_preimages(&bc, tau).unwrap();
                assert_eq!(
                    BigUint::from(found.len()),
                    count_nearby_preimages_exact(10, bc.d2(), tau).unwrap()
                );
                if tau == 0 {
                    assert!(found.contains(&x));
                }
            }
        }
    }

    #[test]
    fn forged_template_authenticates() {
        let ex = fixtures::example_one();
        for bc in &ex.biocodes {
            let x = forge_preimage(bc);
            assert_eq!(authenticate(&x, bc, 0).unwrap(), (Decision::Success, 0));
            assert!(enumerate_preimages(bc, 0).unwrap().contains(&x));
        }
    }

    #[test]
    fn forge_from_base_touches_one_bit_per_word() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let g = Geometry::new(64, 3, 5).unwrap();
        let x = BitString::random(64, &mut rng);
        let bc = enroll(&x, &g, &mut rng).unwrap();
        let base = BitString::random(64, &mut rng);
        let forged = forge_preimage_from(&bc, &base).unwrap();
        assert!(forged.hamming(&base).unwrap() <= bc.d2());
        assert_eq!(authenticate(&forged, &bc, 0).unwrap().0, Decision::Success);
        assert!(forge_preimage_from(&bc, &BitString::zeros(3)).is_err());
    }

    #[test]
    fn enumeration_guard() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = Geometry::new(32, 3, 5).unwrap();
        let bc = enroll(&BitString::random(32, &mut rng), &g, &mut rng).unwrap();
        assert!(matches!(
            enumerate_preimages(&bc, 0),
            Err(Error::InstanceTooLarge { n: 32, .. })
        ));
    }
}
