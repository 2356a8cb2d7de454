//! Exhaustive reference computations for small lattice instances.
//!
//! Everything here trades speed for certainty: quotient minimum distances and
//! kissing numbers are found by enumerating coset representatives, and the
//! nearest-point decoders search every candidate coset. The closed-form
//! figures of merit and the fast decoders are tested against these.
//!
//! The key structural fact making exhaustion cheap is that every sublattice
//! of interest contains the coarse lattice `varpi S^n`, whose cosets factor
//! per coordinate: the minimum norm over a coset `v + varpi S^n` is the sum
//! of per-coordinate leader norms, and the number of minimizers is the
//! product of per-coordinate counts.

use num_complex::Complex64;

use crate::code::MessageOdometer;
use crate::eisenstein::EisensteinInt;
use crate::lattice::{volume_per_dim, LatticeSpec};
use crate::residue::Sym;
use crate::Error;

/// Enumeration guard shared by the oracle searches.
const ENUMERATION_BOUND: u128 = 1 << 22;

// --- sublattice selectors ------------------------------------------------------

/// The sublattices of a [`LatticeSpec`] that the toolkit reasons about.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sublattice {
    /// The full multilayer lattice.
    Fine,
    /// `varpi S^n`.
    Coarse,
    /// Layer `i`'s codewords only (all other layers zero).
    Primary(usize),
    /// Points whose layer-`i` projection is the zero codeword.
    Erasure(usize),
}

/// A quotient `ambient / sub` whose merit the toolkit reports.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Quotient {
    FineOverCoarse,
    PrimaryOverCoarse(usize),
    FineOverErasure(usize),
}

/// Exhaustively computed merit of a quotient.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuotientMerit {
    /// Minimum squared norm over ambient-lattice vectors outside the
    /// sublattice.
    pub d2: i128,
    /// Number of vectors achieving it.
    pub kissing: u64,
    /// `d2` over the ambient lattice's per-dimension volume.
    pub gain_linear: f64,
}

// --- coset enumeration ------------------------------------------------------------

/// Message radices for enumerating coset representatives of `sel` modulo the
/// coarse lattice: positions outside the selector are pinned to zero.
fn coset_radices(lat: &LatticeSpec, sel: Sublattice) -> Vec<usize> {
    let mut out = Vec::new();
    for (i, layer) in lat.layers().iter().enumerate() {
        let radices = layer.message_alphabets();
        let active = match sel {
            Sublattice::Fine => true,
            Sublattice::Coarse => false,
            Sublattice::Primary(j) => i == j,
            Sublattice::Erasure(j) => i != j,
        };
        if active {
            out.extend(radices);
        } else {
            out.extend(std::iter::repeat(1).take(radices.len()));
        }
    }
    out
}

fn coset_count(radices: &[usize]) -> u128 {
    radices
        .iter()
        .fold(1u128, |acc, &q| acc.saturating_mul(q as u128))
}

/// Per-constellation-symbol profile of the coset `leader + varpi S`:
/// `(leader norm, number of coset elements of that norm)`.
fn coset_profiles(lat: &LatticeSpec) -> Result<Vec<(i128, u64)>, Error> {
    let varpi = lat.varpi();
    let nv = varpi.norm() as f64;
    let mut out = Vec::with_capacity(lat.ring().q());
    for &leader in lat.ring().leaders() {
        let target = leader.norm();
        // Any coset element of norm `target` is within |leader| + sqrt(target)
        // of the origin, bounding the multiplier box.
        let radius = (2.0 * (target as f64 / nv).sqrt()).ceil() as i64 + 1;
        let mut count = 0u64;
        for a in -radius..=radius {
            for b in -radius..=radius {
                let cand = leader.checked_add(varpi.checked_mul(EisensteinInt::new(a, b))?)?;
                if cand.norm() == target {
                    count += 1;
                }
            }
        }
        debug_assert!(count >= 1, "the leader itself always matches");
        out.push((target, count));
    }
    Ok(out)
}

// --- quotient merit -------------------------------------------------------------

/// Exhaustive minimum distance, kissing number, and nominal coding gain of a
/// quotient. Errors when the ambient coset count exceeds the enumeration
/// bound.
pub fn quotient_merit(lat: &LatticeSpec, q: Quotient) -> Result<QuotientMerit, Error> {
    let (ambient_sel, in_sub): (Sublattice, Box<dyn Fn(&[Sym]) -> bool>) = match q {
        Quotient::FineOverCoarse => (
            Sublattice::Fine,
            Box::new(|flat: &[Sym]| flat.iter().all(|&s| s == 0)),
        ),
        Quotient::PrimaryOverCoarse(i) => (
            Sublattice::Primary(i),
            Box::new(|flat: &[Sym]| flat.iter().all(|&s| s == 0)),
        ),
        Quotient::FineOverErasure(i) => {
            let (lo, hi) = layer_span(lat, i);
            (
                Sublattice::Fine,
                Box::new(move |flat: &[Sym]| flat[lo..hi].iter().all(|&s| s == 0)),
            )
        }
    };
    let radices = coset_radices(lat, ambient_sel);
    let total = coset_count(&radices);
    if total > ENUMERATION_BOUND {
        return Err(Error::CardinalityBound(total, ENUMERATION_BOUND));
    }
    let profiles = coset_profiles(lat)?;
    let mut best: Option<(i128, u64)> = None;
    for flat in MessageOdometer::new(radices) {
        if in_sub(&flat) {
            continue;
        }
        let messages = lat.split_message(&flat);
        let cw = lat.encode(&messages)?;
        let mut d2: i128 = 0;
        let mut mult: u64 = 1;
        for &s in &cw {
            let (norm, count) = profiles[s as usize];
            d2 += norm;
            mult = mult.saturating_mul(count);
        }
        best = Some(match best {
            None => (d2, mult),
            Some((bd, bm)) => {
                if d2 < bd {
                    (d2, mult)
                } else if d2 == bd {
                    (bd, bm + mult)
                } else {
                    (bd, bm)
                }
            }
        });
    }
    let (d2, kissing) = best.ok_or(Error::NoNonzeroCodeword)?;
    let h = match ambient_sel {
        Sublattice::Fine => lat.fine_generator()?,
        Sublattice::Primary(i) => lat.primary_generator(i)?,
        Sublattice::Coarse => lat.coarse_generator()?,
        Sublattice::Erasure(i) => lat.erasure_generator(i)?,
    };
    let gain_linear = d2 as f64 / volume_per_dim(&h);
    Ok(QuotientMerit {
        d2,
        kissing,
        gain_linear,
    })
}

/// Flat message-position range `[lo, hi)` belonging to layer `i`.
fn layer_span(lat: &LatticeSpec, i: usize) -> (usize, usize) {
    let mut lo = 0;
    for layer in &lat.layers()[..i] {
        lo += layer.message_alphabets().len();
    }
    let hi = lo + lat.layers()[i].message_alphabets().len();
    (lo, hi)
}

// --- exact nearest-point decoding --------------------------------------------------

/// Result of a nearest-point search.
#[derive(Clone, Debug)]
pub struct NearestPoint {
    /// The closest sublattice point.
    pub point: Vec<EisensteinInt>,
    /// Its squared Euclidean distance to the target.
    pub distance2: f64,
    /// The flat message tuple of the coset it lies in.
    pub flat_message: Vec<Sym>,
}

/// Exact closest point of the selected sublattice to a complex target,
/// found by trying every coset of the coarse lattice within the sublattice
/// and quantizing each coordinate inside its coset.
pub fn nearest_point(
    lat: &LatticeSpec,
    sel: Sublattice,
    target: &[Complex64],
) -> Result<NearestPoint, Error> {
    if target.len() != lat.n() {
        return Err(Error::Dimension(format!(
            "target of length {} in dimension {}",
            target.len(),
            lat.n()
        )));
    }
    let radices = coset_radices(lat, sel);
    let total = coset_count(&radices);
    if total > ENUMERATION_BOUND {
        return Err(Error::CardinalityBound(total, ENUMERATION_BOUND));
    }
    let varpi = lat.varpi();
    let mut best: Option<NearestPoint> = None;
    for flat in MessageOdometer::new(radices) {
        let messages = lat.split_message(&flat);
        let cw = lat.encode(&messages)?;
        let mut point = Vec::with_capacity(lat.n());
        let mut d2 = 0.0;
        for (j, &s) in cw.iter().enumerate() {
            let leader = lat.ring().leader(s);
            let (z, d) = crate::lattice::nearest_in_coset(target[j], leader, varpi)?;
            point.push(z);
            d2 += d;
        }
        if best.as_ref().map_or(true, |b| d2 < b.distance2) {
            best = Some(NearestPoint {
                point,
                distance2: d2,
                flat_message: flat,
            });
        }
    }
    best.ok_or(Error::Internal("coset enumeration is never empty"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn desk_quotient_merits_match_hand_values() {
        let lat = LatticeSpec::rep12().unwrap();

        let fine = quotient_merit(&lat, Quotient::FineOverCoarse).unwrap();
        assert_eq!(fine.d2, 2);
        assert_eq!(fine.kissing, 6);
        assert!((fine.gain_linear - 2.0 / 3.0).abs() < 1e-12);

        let p0 = quotient_merit(&lat, Quotient::PrimaryOverCoarse(0)).unwrap();
        assert_eq!(p0.d2, 8);
        assert_eq!(p0.kissing, 18);

        let p1 = quotient_merit(&lat, Quotient::PrimaryOverCoarse(1)).unwrap();
        assert_eq!(p1.d2, 6);
        assert_eq!(p1.kissing, 12);

        // Erasing either layer leaves the unit diagonal pairs as the closest
        // outsiders.
        for i in 0..2 {
            let e = quotient_merit(&lat, Quotient::FineOverErasure(i)).unwrap();
            assert_eq!(e.d2, 2);
            assert_eq!(e.kissing, 6);
        }
    }

    #[test]
    fn closed_forms_match_oracle_on_desk() {
        let lat = LatticeSpec::rep12().unwrap();
        for i in 0..2 {
            let formula = lat.primary_gain(i).unwrap();
            let oracle = quotient_merit(&lat, Quotient::PrimaryOverCoarse(i)).unwrap();
            assert!((formula.linear - oracle.gain_linear).abs() < 1e-9);
            let kf = lat.primary_kissing(i).unwrap();
            assert!((kf.value - oracle.kissing as f64).abs() < 1e-9);
        }
        let fine = lat.fine_gain().unwrap();
        let oracle = quotient_merit(&lat, Quotient::FineOverCoarse).unwrap();
        assert!((fine.linear - oracle.gain_linear).abs() < 1e-9);
    }

    #[test]
    fn closed_forms_match_oracle_on_all_presets() {
        use crate::lattice::MeritKind;
        let presets: Vec<(&str, LatticeSpec)> = vec![
            ("rep12", LatticeSpec::rep12().unwrap()),
            ("split21", LatticeSpec::split21().unwrap()),
            ("triple84", LatticeSpec::triple84().unwrap()),
            ("chain9", LatticeSpec::chain9().unwrap()),
            ("chain27", LatticeSpec::chain27().unwrap()),
            ("mixed36", LatticeSpec::mixed36().unwrap()),
        ];
        for (name, lat) in &presets {
            // Composite gain is an exact identity for every construction.
            let fine = lat.fine_gain().unwrap();
            let oracle = quotient_merit(lat, Quotient::FineOverCoarse).unwrap();
            assert!(
                (fine.linear - oracle.gain_linear).abs() < 1e-9,
                "{name}: composite gain {} vs oracle {}",
                fine.linear,
                oracle.gain_linear
            );
            for i in 0..lat.layer_count() {
                let oracle = quotient_merit(lat, Quotient::PrimaryOverCoarse(i)).unwrap();
                let g = lat.primary_gain(i).unwrap();
                match g.kind {
                    MeritKind::Exact => assert!(
                        (g.linear - oracle.gain_linear).abs() < 1e-9,
                        "{name} layer {i}: gain {} vs oracle {}",
                        g.linear,
                        oracle.gain_linear
                    ),
                    _ => assert!(
                        g.linear <= oracle.gain_linear + 1e-9,
                        "{name} layer {i}: bound {} above oracle {}",
                        g.linear,
                        oracle.gain_linear
                    ),
                }
                let k = lat.primary_kissing(i).unwrap();
                match k.kind {
                    MeritKind::Exact => assert!(
                        (k.value - oracle.kissing as f64).abs() < 1e-9,
                        "{name} layer {i}: kissing {} vs oracle {}",
                        k.value,
                        oracle.kissing
                    ),
                    _ => assert!(
                        k.value + 1e-9 >= oracle.kissing as f64,
                        "{name} layer {i}: kissing bound {} below oracle {}",
                        k.value,
                        oracle.kissing
                    ),
                }
            }
        }
    }

    #[test]
    fn nearest_point_beats_windowed_brute_force() {
        let lat = LatticeSpec::rep12().unwrap();
        let varpi = lat.varpi();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        // Candidate pool per coordinate: every constellation coset element
        // within a generous window.
        let mut pool = Vec::new();
        for &leader in lat.ring().leaders() {
            for a in -2..=2i64 {
                for b in -2..=2i64 {
                    pool.push(leader + varpi * EisensteinInt::new(a, b));
                }
            }
        }
        for _ in 0..25 {
            let target = vec![
                Complex64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)),
                Complex64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)),
            ];
            let fast = nearest_point(&lat, Sublattice::Fine, &target).unwrap();
            let mut brute = f64::INFINITY;
            for &x0 in &pool {
                for &x1 in &pool {
                    let v = [x0, x1];
                    if !lat.contains(&v) {
                        continue;
                    }
                    let d = (target[0] - x0.to_complex()).norm_sqr()
                        + (target[1] - x1.to_complex()).norm_sqr();
                    brute = brute.min(d);
                }
            }
            assert!(
                (fast.distance2 - brute).abs() < 1e-9,
                "decoder {} vs brute {}",
                fast.distance2,
                brute
            );
            assert!(lat.contains(&fast.point));
            // The reported message tuple matches the point's own messages.
            let msgs = lat.messages_of_point(&fast.point).unwrap();
            let flat: Vec<Sym> = msgs.into_iter().flatten().collect();
            assert_eq!(flat, fast.flat_message);
        }
    }

    #[test]
    fn coarse_decoder_matches_plain_quantization() {
        let lat = LatticeSpec::rep12().unwrap();
        let target = vec![Complex64::new(0.4, -1.3), Complex64::new(2.2, 0.9)];
        let near = nearest_point(&lat, Sublattice::Coarse, &target).unwrap();
        for (j, &z) in near.point.iter().enumerate() {
            let q = EisensteinInt::quantize(target[j] / lat.varpi().to_complex()).unwrap();
            assert_eq!(z, lat.varpi() * q);
        }
    }
}
