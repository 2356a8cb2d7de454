//! Elementary-divisor lattices over `Z[w]` built from per-layer codes.
//!
//! A modulus `varpi` factors into prime-power layers `p_i^{g_i}`; each layer
//! carries a length-`n` code over `S/(p_i^{g_i})` and the lattice is the set
//! of vectors in `S^n` whose per-layer projections are codewords. The Chinese
//! remainder idempotents `e_i` embed each layer's generator rows into `S^n`,
//! and together with `varpi I` they generate the fine lattice; dropping layer
//! `i`'s rows gives the sublattice that erases layer `i` (the kernel of that
//! layer's message map), while keeping only layer `i` gives its primary
//! sublattice over the coarse lattice `varpi S^n`.
//!
//! The module also provides a Hermite-normal-form canonicalization for
//! generator matrices over `Z[w]` and closed-form nominal coding gains and
//! kissing numbers for the standard quotients, normalized per complex
//! dimension (gain of `A/B` is `d^2(A \ B) / Vol(A)^(1/n)`).
//!
//! # Example
//!
//! ```
//! use lnc_core::lattice::LatticeSpec;
//!
//! // The 12-ary two-layer instance: varpi = 2+4w, [2,1] repetition per layer.
//! let lat = LatticeSpec::rep12().unwrap();
//! assert_eq!(lat.layer_count(), 2);
//! assert_eq!(lat.n(), 2);
//! let msgs = vec![vec![1], vec![2]];
//! let cw = lat.encode(&msgs).unwrap();
//! assert_eq!(lat.messages_of_constellation(&cw).unwrap(), msgs);
//! ```

use num_complex::Complex64;

use crate::code::{BlockCode, MessageOdometer, NestedCode};
use crate::convcode::ConvCode;
use crate::eisenstein::{factor, EisensteinInt, SQRT3_OVER_2, ZERO};
use crate::residue::{ring_table, CrtSystem, Modulus, OpTables, Sym};
use crate::Error;

/// Fundamental area of `Z[w]` per complex dimension.
pub const THETA: f64 = SQRT3_OVER_2;

/// Enumeration guard for codeword/coset searches.
const ENUMERATION_BOUND: u128 = 1 << 22;

// --- layer codes --------------------------------------------------------------

/// The code carried by one prime-power layer.
#[derive(Clone, Debug)]
pub enum LayerCode {
    /// A `[n, k]` code over the whole layer ring `S/(p^g)`.
    Block(BlockCode),
    /// A multilevel code over the chain ring (field blocks scaled by `p^t`).
    Nested(NestedCode),
    /// A terminated convolutional code over the layer field (`g = 1` only);
    /// `iota` is the number of message steps per frame.
    Conv { code: ConvCode, iota: usize },
}

/// One layer: a prime-power modulus and its code.
#[derive(Clone, Debug)]
pub struct LayerSpec {
    modulus: Modulus,
    ring: OpTables,
    code: LayerCode,
}

impl LayerSpec {
    pub fn new(modulus: Modulus, code: LayerCode) -> Result<Self, Error> {
        let ring = ring_table(modulus.value())?;
        match &code {
            LayerCode::Block(c) => {
                if c.ring().modulus_value() != modulus.value() {
                    return Err(Error::ModulusMismatch);
                }
            }
            LayerCode::Nested(c) => {
                if c.modulus() != &modulus {
                    return Err(Error::ModulusMismatch);
                }
            }
            LayerCode::Conv { code: c, .. } => {
                if modulus.exponent() != 1 {
                    return Err(Error::NotAField(modulus.exponent()));
                }
                if c.field().modulus_value() != modulus.value() {
                    return Err(Error::ModulusMismatch);
                }
            }
        }
        Ok(Self {
            modulus,
            ring,
            code,
        })
    }

    pub fn modulus(&self) -> &Modulus {
        &self.modulus
    }

    /// Operation tables of `S/(p^g)`; codeword symbols index its leaders.
    pub fn ring(&self) -> &OpTables {
        &self.ring
    }

    pub fn code(&self) -> &LayerCode {
        &self.code
    }

    /// Codeword length.
    pub fn n(&self) -> usize {
        match &self.code {
            LayerCode::Block(c) => c.n(),
            LayerCode::Nested(c) => c.n(),
            LayerCode::Conv { code, iota } => code.frame_len(*iota),
        }
    }

    /// Alphabet size of each message position.
    pub fn message_alphabets(&self) -> Vec<usize> {
        match &self.code {
            LayerCode::Block(c) => vec![c.ring().q(); c.k()],
            LayerCode::Nested(c) => c.message_alphabets(),
            LayerCode::Conv { code, iota } => {
                vec![code.field().q(); code.message_len(*iota)]
            }
        }
    }

    /// Number of codewords.
    pub fn cardinality(&self) -> u128 {
        self.message_alphabets()
            .iter()
            .fold(1u128, |acc, &q| acc.saturating_mul(q as u128))
    }

    /// Message symbols -> codeword symbols over the layer ring.
    pub fn encode(&self, msg: &[Sym]) -> Result<Vec<Sym>, Error> {
        match &self.code {
            LayerCode::Block(c) => c.encode(msg),
            LayerCode::Nested(c) => c.encode(msg),
            LayerCode::Conv { code, .. } => code.encode(msg),
        }
    }

    /// Codeword symbols -> message symbols; rejects non-codewords.
    pub fn extract(&self, codeword: &[Sym]) -> Result<Vec<Sym>, Error> {
        match &self.code {
            LayerCode::Block(c) => c.extract(codeword),
            LayerCode::Nested(c) => c.extract(codeword),
            LayerCode::Conv { code, iota } => {
                if codeword.len() != code.frame_len(*iota) {
                    return Err(Error::Dimension(format!(
                        "codeword length {} for a frame of {}",
                        codeword.len(),
                        code.frame_len(*iota)
                    )));
                }
                // A zero-cost path exists iff the input is a codeword; the
                // decoder's tie-breaks never matter on an exact match.
                let msg = code.viterbi(*iota, |pos, sym| {
                    if codeword[pos] == sym {
                        0.0
                    } else {
                        1.0
                    }
                })?;
                let check = code.encode(&msg)?;
                if check != codeword {
                    return Err(Error::InvalidCode("input is not a codeword".into()));
                }
                Ok(msg)
            }
        }
    }

    /// Iterates all codewords (bounded); errors when the codebook is too
    /// large to enumerate.
    pub fn codewords(&self) -> Result<Box<dyn Iterator<Item = Vec<Sym>> + '_>, Error> {
        if self.cardinality() > ENUMERATION_BOUND {
            return Err(Error::CardinalityBound(self.cardinality(), ENUMERATION_BOUND));
        }
        let radices = self.message_alphabets();
        let iter = MessageOdometer::new(radices)
            .map(move |msg| self.encode(&msg).expect("odometer messages are in range"));
        Ok(Box::new(iter))
    }

    /// Minimum Euclidean weight over nonzero codewords, with symbols lifted to
    /// the leaders of `S/(p^g)`, plus the number of codewords achieving it.
    /// Convolutional layers fall back to the trellis free weight (and report
    /// no multiplicity) when the codebook is too large.
    pub fn min_euclidean_weight(&self) -> Result<WeightReport, Error> {
        match self.codewords() {
            Ok(words) => {
                let mut best: Option<(i128, u64)> = None;
                for cw in words.skip(1) {
                    let w: i128 = cw.iter().map(|&s| self.ring.leader(s).norm()).sum();
                    best = Some(match best {
                        None => (w, 1),
                        Some((bw, count)) => {
                            if w < bw {
                                (w, 1)
                            } else if w == bw {
                                (bw, count + 1)
                            } else {
                                (bw, count)
                            }
                        }
                    });
                }
                let (weight, multiplicity) = best.ok_or(Error::NoNonzeroCodeword)?;
                Ok(WeightReport {
                    weight,
                    multiplicity: Some(multiplicity),
                })
            }
            Err(Error::CardinalityBound(..)) => match &self.code {
                LayerCode::Conv { code, .. } => {
                    let ring = self.ring.clone();
                    let w = code.free_weight(move |s| ring.leader(s).norm() as f64)?;
                    Ok(WeightReport {
                        weight: w.round() as i128,
                        multiplicity: None,
                    })
                }
                _ => Err(Error::CardinalityBound(self.cardinality(), ENUMERATION_BOUND)),
            },
            Err(e) => Err(e),
        }
    }

    /// Generator rows as exact `Z[w]` vectors (codewords of the unit
    /// messages, lifted to leaders).
    pub fn generator_rows_lifted(&self) -> Result<Vec<Vec<EisensteinInt>>, Error> {
        match &self.code {
            LayerCode::Nested(c) => c.generator_rows_lifted(),
            _ => {
                let alphabets = self.message_alphabets();
                let one = match &self.code {
                    LayerCode::Block(c) => c.ring().one(),
                    LayerCode::Conv { code, .. } => code.field().one(),
                    LayerCode::Nested(_) => unreachable!(),
                };
                let mut rows = Vec::with_capacity(alphabets.len());
                for i in 0..alphabets.len() {
                    let mut msg = vec![0 as Sym; alphabets.len()];
                    msg[i] = one;
                    let cw = self.encode(&msg)?;
                    rows.push(cw.iter().map(|&s| self.ring.leader(s)).collect());
                }
                Ok(rows)
            }
        }
    }
}

/// Minimum-weight search result.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightReport {
    /// Minimum Euclidean weight (sum of squared coordinate norms).
    pub weight: i128,
    /// Number of codewords achieving it; `None` when only a trellis search
    /// was feasible.
    pub multiplicity: Option<u64>,
}

// --- the lattice ----------------------------------------------------------------

/// A complete multilayer lattice instance.
#[derive(Clone, Debug)]
pub struct LatticeSpec {
    varpi: EisensteinInt,
    crt: CrtSystem,
    layers: Vec<LayerSpec>,
    ring: OpTables, // S/(varpi): the transmit constellation
    n: usize,
}

impl LatticeSpec {
    /// Builds the instance. The layer moduli must be exactly the prime-power
    /// factors of `varpi`, ordered by ascending prime `(norm, a, b)`, and all
    /// layer codes must share one length.
    pub fn new(varpi: EisensteinInt, layers: Vec<LayerSpec>) -> Result<Self, Error> {
        let f = factor(varpi)?;
        if f.factors.len() != layers.len() {
            return Err(Error::Config(format!(
                "{} layers supplied but {} prime-power factors",
                layers.len(),
                f.factors.len()
            )));
        }
        // Layers are ordered by ascending prime (norm, then coefficients).
        let mut factors = f.factors.clone();
        factors.sort_by_key(|pp| pp.prime.norm_lex_key());
        for (pp, layer) in factors.iter().zip(&layers) {
            if pp.prime != layer.modulus().prime() || pp.exponent != layer.modulus().exponent() {
                return Err(Error::Config(format!(
                    "layer modulus {} does not match factor ({})^{}",
                    layer.modulus(),
                    pp.prime,
                    pp.exponent
                )));
            }
        }
        let n = layers
            .first()
            .map(|l| l.n())
            .ok_or_else(|| Error::Config("at least one layer required".into()))?;
        if layers.iter().any(|l| l.n() != n) {
            return Err(Error::Config("layer codes must share one length".into()));
        }
        let crt = CrtSystem::new(varpi, layers.iter().map(|l| l.modulus().clone()).collect())?;
        let ring = ring_table(varpi)?;
        Ok(Self {
            varpi,
            crt,
            layers,
            ring,
            n,
        })
    }

    /// The worked 12-point instance: `varpi = 2+4w` with `[2,1]` repetition
    /// codes on both layers (ternary and quaternary).
    pub fn rep12() -> Result<Self, Error> {
        let varpi = EisensteinInt::new(2, 4);
        Self::from_block_rows(varpi, |ring| vec![vec![ring.one(), ring.one()]])
    }

    /// 21-point two-layer instance over the split primes `1+2w` and `3+w`,
    /// with `[2,1]` codes on both layers.
    pub fn split21() -> Result<Self, Error> {
        let varpi = EisensteinInt::new(1, 5);
        Self::from_block_rows(varpi, |ring| {
            let one = ring.one();
            let second = ring.sym(EisensteinInt::new(2, 0));
            vec![vec![one, second]]
        })
    }

    /// 84-point three-layer instance (`varpi = 2 * (1+2w) * (3+w)`), `[2,1]`
    /// codes everywhere.
    pub fn triple84() -> Result<Self, Error> {
        let two = EisensteinInt::new(2, 0);
        let p3 = EisensteinInt::new(1, 2);
        let p7 = EisensteinInt::new(3, 1);
        let varpi = two.checked_mul(p3)?.checked_mul(p7)?;
        Self::from_block_rows(varpi, |ring| vec![vec![ring.one(), ring.one()]])
    }

    /// 9-point single-layer chain instance over `(1+2w)^2` with a two-level
    /// nested code of length 3.
    pub fn chain9() -> Result<Self, Error> {
        let p = EisensteinInt::new(1, 2);
        let varpi = p.checked_mul(p)?;
        let modulus = Modulus::new(p, 2)?;
        let field = ring_table(p)?;
        let one = field.one();
        let two = field.neg(one);
        let blocks = vec![vec![vec![one, 0, one]], vec![vec![0, one, two]]];
        let code = NestedCode::new(modulus.clone(), blocks)?;
        let layer = LayerSpec::new(modulus, LayerCode::Nested(code))?;
        Self::new(varpi, vec![layer])
    }

    /// 27-point single-layer chain instance over `(1+2w)^3`: rows at scales 1
    /// and `p`, nothing new at `p^2`.
    pub fn chain27() -> Result<Self, Error> {
        let p = EisensteinInt::new(1, 2);
        let varpi = p.checked_mul(p)?.checked_mul(p)?;
        let modulus = Modulus::new(p, 3)?;
        let field = ring_table(p)?;
        let one = field.one();
        let two = field.neg(one);
        let blocks = vec![
            vec![vec![one, 0, one]],
            vec![vec![0, one, two]],
            vec![],
        ];
        let code = NestedCode::new(modulus.clone(), blocks)?;
        let layer = LayerSpec::new(modulus, LayerCode::Nested(code))?;
        Self::new(varpi, vec![layer])
    }

    /// 36-point mixed instance over `varpi = 2 * (1+2w)^2`: a nested chain
    /// code on the ternary tower and a `[3,2]` block code on the quaternary
    /// layer.
    pub fn mixed36() -> Result<Self, Error> {
        let p3 = EisensteinInt::new(1, 2);
        let two = EisensteinInt::new(2, 0);
        let varpi = two.checked_mul(p3)?.checked_mul(p3)?;

        let m1 = Modulus::new(p3, 2)?;
        let field = ring_table(p3)?;
        let one = field.one();
        let neg = field.neg(one);
        let nested =
            NestedCode::new(m1.clone(), vec![vec![vec![one, 0, one]], vec![vec![0, one, neg]]])?;
        let layer1 = LayerSpec::new(m1, LayerCode::Nested(nested))?;

        let m2 = Modulus::new(two, 1)?;
        let ring = ring_table(two)?;
        let e = ring.one();
        let block = BlockCode::new(ring, vec![vec![e, 0, e], vec![0, e, e]])?;
        let layer2 = LayerSpec::new(m2, LayerCode::Block(block))?;

        Self::new(varpi, vec![layer1, layer2])
    }

    /// The 12-point instance with the shipped rate-1/2 convolutional codes
    /// on both layers (ternary memory 3, quaternary memory 3); `iota` message
    /// steps per layer, so `n = 2 * (iota + 3)`.
    pub fn coded12(iota: usize) -> Result<Self, Error> {
        let varpi = EisensteinInt::new(2, 4);
        let l1 = LayerSpec::new(
            Modulus::new(EisensteinInt::new(1, 2), 1)?,
            LayerCode::Conv {
                code: ConvCode::half_rate_ternary()?,
                iota,
            },
        )?;
        let l2 = LayerSpec::new(
            Modulus::new(EisensteinInt::new(2, 0), 1)?,
            LayerCode::Conv {
                code: ConvCode::half_rate_quaternary()?,
                iota,
            },
        )?;
        Self::new(varpi, vec![l1, l2])
    }

    /// The 12-point instance with asymmetric rates: rate-1/2 ternary on
    /// layer 1 and rate-3/4 quaternary on layer 2. `iota1` must be odd so the
    /// frame lengths line up: `2 * (iota1 + 3) = 4 * (iota2 + 1)` with
    /// `iota2 = (iota1 + 1) / 2`.
    pub fn coded12_mixed(iota1: usize) -> Result<Self, Error> {
        if iota1 % 2 == 0 {
            return Err(Error::Config(
                "mixed-rate frames need an odd ternary message length".into(),
            ));
        }
        let varpi = EisensteinInt::new(2, 4);
        let l1 = LayerSpec::new(
            Modulus::new(EisensteinInt::new(1, 2), 1)?,
            LayerCode::Conv {
                code: ConvCode::half_rate_ternary()?,
                iota: iota1,
            },
        )?;
        let l2 = LayerSpec::new(
            Modulus::new(EisensteinInt::new(2, 0), 1)?,
            LayerCode::Conv {
                code: ConvCode::three_quarter_quaternary()?,
                iota: (iota1 + 1) / 2,
            },
        )?;
        Self::new(varpi, vec![l1, l2])
    }

    /// Helper for the all-single-level presets: one block code per prime
    /// factor, rows produced from each layer's ring.
    fn from_block_rows(
        varpi: EisensteinInt,
        rows: impl Fn(&OpTables) -> Vec<Vec<Sym>>,
    ) -> Result<Self, Error> {
        let f = factor(varpi)?;
        let mut factors = f.factors.clone();
        factors.sort_by_key(|pp| pp.prime.norm_lex_key());
        let mut layers = Vec::new();
        for pp in &factors {
            let modulus = Modulus::new(pp.prime, pp.exponent)?;
            let ring = ring_table(modulus.value())?;
            let code = BlockCode::new(ring.clone(), rows(&ring))?;
            layers.push(LayerSpec::new(modulus, LayerCode::Block(code))?);
        }
        Self::new(varpi, layers)
    }

    pub fn varpi(&self) -> EisensteinInt {
        self.varpi
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn layer(&self, i: usize) -> Result<&LayerSpec, Error> {
        self.layers
            .get(i)
            .ok_or(Error::LayerIndex(i, self.layers.len()))
    }

    pub fn crt(&self) -> &CrtSystem {
        &self.crt
    }

    /// Tables of the transmit ring `S/(varpi)`.
    pub fn ring(&self) -> &OpTables {
        &self.ring
    }

    // --- encode / message maps ------------------------------------------

    /// Encodes one message per layer and combines them per coordinate into
    /// constellation symbols mod `varpi`.
    pub fn encode(&self, messages: &[Vec<Sym>]) -> Result<Vec<Sym>, Error> {
        if messages.len() != self.layers.len() {
            return Err(Error::Dimension(format!(
                "{} layer messages for {} layers",
                messages.len(),
                self.layers.len()
            )));
        }
        let codewords: Vec<Vec<Sym>> = self
            .layers
            .iter()
            .zip(messages)
            .map(|(layer, msg)| layer.encode(msg))
            .collect::<Result<_, _>>()?;
        let mut out = Vec::with_capacity(self.n);
        for j in 0..self.n {
            let residues: Vec<_> = self
                .layers
                .iter()
                .zip(&codewords)
                .map(|(layer, cw)| layer.modulus().reduce(layer.ring().leader(cw[j])))
                .collect();
            let combined = self.crt.inverse(&residues)?;
            out.push(self.ring.sym(combined));
        }
        Ok(out)
    }

    /// Per-coordinate reduction of an `S^n` vector to constellation symbols.
    pub fn constellation_of_point(&self, x: &[EisensteinInt]) -> Result<Vec<Sym>, Error> {
        if x.len() != self.n {
            return Err(Error::Dimension(format!(
                "point of length {} in dimension {}",
                x.len(),
                self.n
            )));
        }
        Ok(x.iter().map(|&v| self.ring.sym(v)).collect())
    }

    /// Layer `i`'s codeword symbols of a constellation vector.
    pub fn layer_codeword(&self, i: usize, constellation: &[Sym]) -> Result<Vec<Sym>, Error> {
        let layer = self.layer(i)?;
        if constellation.len() != self.n {
            return Err(Error::Dimension("constellation vector of wrong length".into()));
        }
        Ok(constellation
            .iter()
            .map(|&s| {
                layer
                    .ring()
                    .sym(self.ring.leader(s))
            })
            .collect())
    }

    /// Layer `i`'s message of a lattice point; errors with a non-codeword
    /// projection when the point is outside the lattice.
    pub fn layer_message_of_point(
        &self,
        i: usize,
        x: &[EisensteinInt],
    ) -> Result<Vec<Sym>, Error> {
        let v = self.constellation_of_point(x)?;
        self.layer(i)?.extract(&self.layer_codeword(i, &v)?)
    }

    /// All layer messages of a constellation vector (errors if any layer's
    /// projection is not a codeword).
    pub fn messages_of_constellation(&self, v: &[Sym]) -> Result<Vec<Vec<Sym>>, Error> {
        (0..self.layers.len())
            .map(|i| self.layer(i)?.extract(&self.layer_codeword(i, v)?))
            .collect()
    }

    /// All layer messages of an `S^n` point.
    pub fn messages_of_point(&self, x: &[EisensteinInt]) -> Result<Vec<Vec<Sym>>, Error> {
        let v = self.constellation_of_point(x)?;
        self.messages_of_constellation(&v)
    }

    /// Lattice membership.
    pub fn contains(&self, x: &[EisensteinInt]) -> bool {
        self.messages_of_point(x).is_ok()
    }

    // --- generator matrices ----------------------------------------------

    /// Embedded generator rows of layer `i`: the CRT idempotent times each
    /// lifted code row.
    fn embedded_rows(&self, i: usize) -> Result<Vec<Vec<EisensteinInt>>, Error> {
        let eps = self.crt.idempotent(i);
        let rows = self.layer(i)?.generator_rows_lifted()?;
        rows.into_iter()
            .map(|row| {
                row.into_iter()
                    .map(|x| x.checked_mul(eps))
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect()
    }

    fn coarse_rows(&self) -> Vec<Vec<EisensteinInt>> {
        (0..self.n)
            .map(|j| {
                let mut row = vec![ZERO; self.n];
                row[j] = self.varpi;
                row
            })
            .collect()
    }

    /// Hermite-normal-form generator of the fine lattice.
    pub fn fine_generator(&self) -> Result<Vec<Vec<EisensteinInt>>, Error> {
        let mut rows = Vec::new();
        for i in 0..self.layers.len() {
            rows.extend(self.embedded_rows(i)?);
        }
        rows.extend(self.coarse_rows());
        hnf(rows, self.n)
    }

    /// Hermite-normal-form generator of layer `i`'s primary sublattice
    /// (layer `i`'s codewords, all other layers zero).
    pub fn primary_generator(&self, i: usize) -> Result<Vec<Vec<EisensteinInt>>, Error> {
        let mut rows = self.embedded_rows(i)?;
        rows.extend(self.coarse_rows());
        hnf(rows, self.n)
    }

    /// Hermite-normal-form generator of the sublattice that erases layer `i`
    /// (kernel of layer `i`'s message map; all other layers free).
    pub fn erasure_generator(&self, i: usize) -> Result<Vec<Vec<EisensteinInt>>, Error> {
        let mut rows = Vec::new();
        for j in 0..self.layers.len() {
            if j != i {
                rows.extend(self.embedded_rows(j)?);
            }
        }
        rows.extend(self.coarse_rows());
        hnf(rows, self.n)
    }

    /// Generator of the coarse lattice `varpi S^n`.
    pub fn coarse_generator(&self) -> Result<Vec<Vec<EisensteinInt>>, Error> {
        hnf(self.coarse_rows(), self.n)
    }

    // --- figures of merit ---------------------------------------------------

    /// Nominal coding gain of layer `i`'s primary sublattice over the coarse
    /// lattice. Exact for single-level layers; a lower bound for chain-ring
    /// layers built from nested field codes.
    pub fn primary_gain(&self, i: usize) -> Result<GainReport, Error> {
        let layer = self.layer(i)?;
        let p = layer.modulus().prime();
        let gamma = layer.modulus().exponent();
        let np = p.norm() as f64;
        let ndelta = self.crt.cofactor(i).norm() as f64;
        let n = self.n as f64;
        if gamma == 1 {
            // Embedded codeword symbols are cofactor multiples, so their
            // leader norms scale by the cofactor norm.
            let w = layer.min_euclidean_weight()?;
            let omega_embedded = w.weight as f64 * ndelta;
            let k = layer.message_alphabets().len() as f64;
            let value = omega_embedded / (THETA * np.powf(1.0 - k / n) * ndelta);
            // A trellis free-weight fallback can undershoot the terminated
            // frame's true minimum, so only enumeration certifies exactness.
            if w.multiplicity.is_some() {
                Ok(GainReport::exact(value))
            } else {
                Ok(GainReport::lower_bound(value))
            }
        } else {
            let nested = match layer.code() {
                LayerCode::Nested(c) => c,
                _ => {
                    return Err(Error::InvalidCode(
                        "chain-ring gain needs a nested-code layer".into(),
                    ))
                }
            };
            // min over levels t of |p|^(2t) * (embedded field-code weight),
            // scaled by the message-volume factor.
            let mut level_min = f64::INFINITY;
            let mut vol_exponent = 0.0;
            for t in 0..gamma {
                let kt = nested.level_block_rows(t as usize) as f64;
                vol_exponent += (gamma - t) as f64 * kt;
                if let Some(level) = nested.level_code(t as usize)? {
                    let w = level_min_weight(&level)?;
                    let omega_embedded = w as f64 * ndelta;
                    level_min = level_min.min(np.powi(t as i32) * omega_embedded);
                }
            }
            if !level_min.is_finite() {
                return Err(Error::NoNonzeroCodeword);
            }
            let nvarpi = self.varpi.norm() as f64;
            let value = np.powf(vol_exponent / n) * level_min / (THETA * nvarpi);
            Ok(GainReport::lower_bound(value))
        }
    }

    /// Kissing number of layer `i`'s primary sublattice over the coarse
    /// lattice. Exact for single-level layers (when minimum-weight codewords
    /// have unit-leader symbols), an upper bound for chain-ring layers.
    pub fn primary_kissing(&self, i: usize) -> Result<KissingReport, Error> {
        let layer = self.layer(i)?;
        let p = layer.modulus().prime();
        let gamma = layer.modulus().exponent();
        let np = p.norm() as f64;
        let units = 6.0;
        let per_coset = |omega_over_delta: f64, multiplicity: f64| -> f64 {
            if np - 1.0 <= units {
                multiplicity * (units / (np - 1.0)).powf(omega_over_delta)
            } else {
                multiplicity
            }
        };
        if gamma == 1 {
            let w = layer.min_euclidean_weight()?;
            let mult = w.multiplicity.ok_or_else(|| {
                Error::BoundExceeded("kissing numbers need codeword enumeration".into())
            })? as f64;
            // The embedded weight over the cofactor norm is the plain field
            // weight again.
            Ok(KissingReport::exact(per_coset(w.weight as f64, mult)))
        } else {
            let nested = match layer.code() {
                LayerCode::Nested(c) => c,
                _ => {
                    return Err(Error::InvalidCode(
                        "chain-ring kissing needs a nested-code layer".into(),
                    ))
                }
            };
            let mut total = 0.0;
            for t in 0..gamma {
                if let Some(level) = nested.level_code(t as usize)? {
                    let (w, mult) = level_min_weight_with_multiplicity(&level)?;
                    total += per_coset(w as f64, mult as f64);
                }
            }
            Ok(KissingReport::upper_bound(total))
        }
    }

    /// Nominal coding gain of the fine lattice over the coarse lattice:
    /// minimum Euclidean weight of the combined code divided by the fine
    /// lattice's per-dimension volume.
    pub fn fine_gain(&self) -> Result<GainReport, Error> {
        let (w, _) = self.combined_min_weight()?;
        let mut card = 1f64;
        for layer in &self.layers {
            card *= layer.cardinality() as f64;
        }
        let n = self.n as f64;
        let value = w as f64 * card.powf(1.0 / n) / (THETA * self.varpi.norm() as f64);
        Ok(GainReport::exact(value))
    }

    /// Minimum Euclidean weight (and multiplicity) over nonzero combined
    /// codewords, lifted to leaders mod `varpi`.
    pub fn combined_min_weight(&self) -> Result<(i128, u64), Error> {
        let total: u128 = self
            .layers
            .iter()
            .fold(1u128, |acc, l| acc.saturating_mul(l.cardinality()));
        if total > ENUMERATION_BOUND {
            return Err(Error::CardinalityBound(total, ENUMERATION_BOUND));
        }
        let mut best: Option<(i128, u64)> = None;
        let radices: Vec<usize> = self
            .layers
            .iter()
            .flat_map(|l| l.message_alphabets())
            .collect();
        for msg in MessageOdometer::new(radices).skip(1) {
            let messages = self.split_message(&msg);
            let cw = self.encode(&messages)?;
            let w: i128 = cw.iter().map(|&s| self.ring.leader(s).norm()).sum();
            best = Some(match best {
                None => (w, 1),
                Some((bw, c)) => {
                    if w < bw {
                        (w, 1)
                    } else if w == bw {
                        (bw, c + 1)
                    } else {
                        (bw, c)
                    }
                }
            });
        }
        best.ok_or(Error::NoNonzeroCodeword)
    }

    /// Splits a flat message-symbol vector into per-layer messages.
    pub fn split_message(&self, flat: &[Sym]) -> Vec<Vec<Sym>> {
        let mut out = Vec::with_capacity(self.layers.len());
        let mut pos = 0;
        for layer in &self.layers {
            let k = layer.message_alphabets().len();
            out.push(flat[pos..pos + k].to_vec());
            pos += k;
        }
        out
    }
}

fn level_min_weight(code: &BlockCode) -> Result<i128, Error> {
    Ok(level_min_weight_with_multiplicity(code)?.0)
}

fn level_min_weight_with_multiplicity(code: &BlockCode) -> Result<(i128, u64), Error> {
    if code.cardinality() > ENUMERATION_BOUND {
        return Err(Error::CardinalityBound(code.cardinality(), ENUMERATION_BOUND));
    }
    let ring = code.ring();
    let mut best: Option<(i128, u64)> = None;
    for cw in code.codewords().skip(1) {
        let w: i128 = cw.iter().map(|&s| ring.leader(s).norm()).sum();
        best = Some(match best {
            None => (w, 1),
            Some((bw, c)) => {
                if w < bw {
                    (w, 1)
                } else if w == bw {
                    (bw, c + 1)
                } else {
                    (bw, c)
                }
            }
        });
    }
    best.ok_or(Error::NoNonzeroCodeword)
}

// --- gain/kissing reports ----------------------------------------------------

/// How a figure of merit relates to the true lattice quantity.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeritKind {
    Exact,
    LowerBound,
    UpperBound,
}

/// A nominal coding gain.
#[derive(Clone, Copy, Debug)]
pub struct GainReport {
    pub linear: f64,
    pub kind: MeritKind,
}

impl GainReport {
    fn exact(linear: f64) -> Self {
        Self {
            linear,
            kind: MeritKind::Exact,
        }
    }

    fn lower_bound(linear: f64) -> Self {
        Self {
            linear,
            kind: MeritKind::LowerBound,
        }
    }

    pub fn db(&self) -> f64 {
        10.0 * self.linear.log10()
    }
}

/// A kissing number estimate.
#[derive(Clone, Copy, Debug)]
pub struct KissingReport {
    pub value: f64,
    pub kind: MeritKind,
}

impl KissingReport {
    fn exact(value: f64) -> Self {
        Self {
            value,
            kind: MeritKind::Exact,
        }
    }

    fn upper_bound(value: f64) -> Self {
        Self {
            value,
            kind: MeritKind::UpperBound,
        }
    }
}

// --- Hermite normal form ----------------------------------------------------------

/// Hermite normal form of a full-rank generator set over `Z[w]`.
///
/// Returns an `n x n` upper-triangular matrix spanning the same lattice:
/// diagonal entries are canonical associates, entries above each diagonal are
/// reduced modulo it (minimum-norm remainders), and rows below are zero.
pub fn hnf(rows: Vec<Vec<EisensteinInt>>, n: usize) -> Result<Vec<Vec<EisensteinInt>>, Error> {
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::Dimension("generator rows of mixed length".into()));
    }
    let mut work = rows;
    let mut h: Vec<Vec<EisensteinInt>> = Vec::with_capacity(n);
    for col in 0..n {
        loop {
            // Pick the minimum-norm nonzero pivot in this column.
            let mut pivot: Option<usize> = None;
            for (r, row) in work.iter().enumerate() {
                if row[col].is_zero() {
                    continue;
                }
                pivot = Some(match pivot {
                    None => r,
                    Some(p) => {
                        if row[col].norm() < work[p][col].norm() {
                            r
                        } else {
                            p
                        }
                    }
                });
            }
            let p = pivot.ok_or(Error::Dimension(format!(
                "generators do not span column {col}"
            )))?;
            // Reduce every other row against the pivot.
            let mut reduced_any = false;
            for r in 0..work.len() {
                if r == p || work[r][col].is_zero() {
                    continue;
                }
                let (q, _) = work[r][col].divmod(work[p][col])?;
                if !q.is_zero() {
                    for j in 0..n {
                        let t = q.checked_mul(work[p][j])?;
                        work[r][j] = work[r][j].checked_sub(t)?;
                    }
                }
                if !work[r][col].is_zero() {
                    reduced_any = true;
                }
            }
            if !reduced_any {
                // Only the pivot is nonzero: normalize and retire the row.
                let mut row = work.swap_remove(p);
                let (_, u) = row[col].canonical_associate();
                for x in row.iter_mut() {
                    *x = x.checked_mul(u)?;
                }
                h.push(row);
                break;
            }
        }
    }
    // Back-reduce entries above each diagonal.
    for col in (0..n).rev() {
        for r in 0..col {
            let (q, _) = h[r][col].divmod(h[col][col])?;
            if !q.is_zero() {
                for j in 0..n {
                    let t = q.checked_mul(h[col][j])?;
                    h[r][j] = h[r][j].checked_sub(t)?;
                }
            }
        }
    }
    Ok(h)
}

/// `prod N(diag)` of an upper-triangular generator: the index of the lattice
/// in `S^n`.
pub fn hnf_index(h: &[Vec<EisensteinInt>]) -> u128 {
    h.iter()
        .enumerate()
        .map(|(i, row)| row[i].norm() as u128)
        .product()
}

/// Per-complex-dimension fundamental volume of the lattice with the given
/// Hermite normal form: `theta * index^(1/n)`.
pub fn volume_per_dim(h: &[Vec<EisensteinInt>]) -> f64 {
    let n = h.len() as f64;
    THETA * (hnf_index(h) as f64).powf(1.0 / n)
}

// --- complex geometry helpers ---------------------------------------------------

/// Nearest element of `leader + modulus * Z[w]` to a complex target, with the
/// squared Euclidean distance.
pub fn nearest_in_coset(
    target: Complex64,
    leader: EisensteinInt,
    modulus: EisensteinInt,
) -> Result<(EisensteinInt, f64), Error> {
    let shifted = (target - leader.to_complex()) / modulus.to_complex();
    let q = EisensteinInt::quantize(shifted)?;
    let point = leader + modulus * q;
    let d = target - point.to_complex();
    Ok((point, d.norm_sqr()))
}
