//! Linear block codes over residue rings of `Z[w]`.
//!
//! Two code families feed the lattice construction:
//!
//! * [`BlockCode`] — a `k x n` generator over a single residue ring (field or
//!   chain ring), message symbols ranging over the whole ring.
//! * [`NestedCode`] — a multilevel code over a chain ring `S/(p^g)`: level `t`
//!   contributes rows scaled by `p^t` whose coefficients range over
//!   `S/(p^(g-t))`, so the codeword set is the `p`-adic accumulation of a
//!   nested chain of field codes.
//!
//! Both expose deterministic codeword enumeration (for oracle-style minimum
//! searches) and systematic message extraction from pivot columns.
//!
//! # Example
//!
//! ```
//! use lnc_core::eisenstein::EisensteinInt;
//! use lnc_core::residue::{ring_table, Sym};
//! use lnc_core::code::BlockCode;
//!
//! // [2,1] repetition over F4 = Z[w]/(2).
//! let ring = ring_table(EisensteinInt::new(2, 0)).unwrap();
//! let one = ring.one();
//! let code = BlockCode::new(ring, vec![vec![one, one]]).unwrap();
//! assert_eq!(code.cardinality(), 4);
//! let cw = code.encode(&[3]).unwrap();
//! assert_eq!(code.extract(&cw).unwrap(), vec![3 as Sym]);
//! ```

use crate::eisenstein::EisensteinInt;
use crate::residue::{ring_table, Modulus, OpTables, Sym};
use crate::Error;

// --- single-ring block codes -----------------------------------------------

/// A linear `[n, k]` code over one residue ring, given by generator rows.
#[derive(Clone, Debug)]
pub struct BlockCode {
    ring: OpTables,
    k: usize,
    n: usize,
    gen: Vec<Sym>, // row-major k x n
}

impl BlockCode {
    /// Builds the code from generator rows (all of equal length, symbols
    /// in range for the ring).
    pub fn new(ring: OpTables, rows: Vec<Vec<Sym>>) -> Result<Self, Error> {
        let k = rows.len();
        if k == 0 {
            return Err(Error::InvalidCode("generator needs at least one row".into()));
        }
        let n = rows[0].len();
        if n == 0 || k > n {
            return Err(Error::InvalidCode(format!(
                "generator shape {k}x{n} is not a valid code"
            )));
        }
        let mut gen = Vec::with_capacity(k * n);
        for row in &rows {
            if row.len() != n {
                return Err(Error::InvalidCode("ragged generator rows".into()));
            }
            for &s in row {
                if (s as usize) >= ring.q() {
                    return Err(Error::InvalidCode(format!(
                        "symbol {s} out of range for a ring of {} elements",
                        ring.q()
                    )));
                }
                gen.push(s);
            }
        }
        Ok(Self { ring, k, n, gen })
    }

    /// `[n, n]` identity code (the full space).
    pub fn full_space(ring: OpTables, n: usize) -> Result<Self, Error> {
        let one = ring.one();
        let rows = (0..n)
            .map(|i| {
                let mut row = vec![0; n];
                row[i] = one;
                row
            })
            .collect();
        Self::new(ring, rows)
    }

    pub fn ring(&self) -> &OpTables {
        &self.ring
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn generator(&self, row: usize, col: usize) -> Sym {
        self.gen[row * self.n + col]
    }

    /// Number of codewords, `q^k`.
    pub fn cardinality(&self) -> u128 {
        (self.ring.q() as u128).pow(self.k as u32)
    }

    /// True when the left `k x k` block is the identity.
    pub fn is_standard_form(&self) -> bool {
        let one = self.ring.one();
        for i in 0..self.k {
            for j in 0..self.k {
                let want = if i == j { one } else { 0 };
                if self.generator(i, j) != want {
                    return false;
                }
            }
        }
        true
    }

    /// Encodes `k` message symbols into `n` codeword symbols.
    pub fn encode(&self, msg: &[Sym]) -> Result<Vec<Sym>, Error> {
        if msg.len() != self.k {
            return Err(Error::Dimension(format!(
                "message length {} for a k={} code",
                msg.len(),
                self.k
            )));
        }
        let mut cw = vec![0 as Sym; self.n];
        for (i, &w) in msg.iter().enumerate() {
            if (w as usize) >= self.ring.q() {
                return Err(Error::Dimension(format!("message symbol {w} out of range")));
            }
            for j in 0..self.n {
                let term = self.ring.mul(w, self.generator(i, j));
                cw[j] = self.ring.add(cw[j], term);
            }
        }
        Ok(cw)
    }

    /// Reads the message back from the pivot columns of a standard-form code
    /// and verifies the remaining columns by re-encoding.
    pub fn extract(&self, codeword: &[Sym]) -> Result<Vec<Sym>, Error> {
        if codeword.len() != self.n {
            return Err(Error::Dimension(format!(
                "codeword length {} for an n={} code",
                codeword.len(),
                self.n
            )));
        }
        if !self.is_standard_form() {
            return Err(Error::InvalidCode(
                "message extraction needs a standard-form generator".into(),
            ));
        }
        let msg: Vec<Sym> = codeword[..self.k].to_vec();
        let check = self.encode(&msg)?;
        if check != codeword {
            return Err(Error::InvalidCode("input is not a codeword".into()));
        }
        Ok(msg)
    }

    /// Iterates all codewords in message-odometer order (message index 0 —
    /// the all-zero word — comes first).
    pub fn codewords(&self) -> impl Iterator<Item = Vec<Sym>> + '_ {
        MessageOdometer::new(vec![self.ring.q(); self.k]).map(move |msg| {
            self.encode(&msg).expect("odometer messages are in range")
        })
    }
}

// --- multilevel nested codes -------------------------------------------------

/// One level of a [`NestedCode`]: `rows` over the base field, entering the
/// codeword at scale `p^level` with coefficients mod `p^(g-level)`.
#[derive(Clone, Debug)]
struct Level {
    rows: Vec<Vec<Sym>>,
    ring: OpTables, // S/(p^(g-level)) — the coefficient ring of this level
    offset: usize,  // first pivot column of this level in the stacked identity
}

/// A multilevel (chain-ring) code over `S/(p^g)`.
///
/// Given field generator blocks `G_0, .., G_{g-1}` (possibly empty) whose
/// stacked matrix is in standard form, the codewords are
/// `sum_t p^t * (w_t G_t)` with `w_t` over `S/(p^(g-t))`. The stacked
/// standard form makes every pivot column carry exactly one scaled message
/// symbol, so extraction is a per-pivot exact division.
#[derive(Clone, Debug)]
pub struct NestedCode {
    modulus: Modulus,   // p^g
    chain: OpTables,    // output ring S/(p^g)
    field: OpTables,    // S/(p) — alphabet of the generator entries
    levels: Vec<Level>,
    n: usize,
}

impl NestedCode {
    /// Builds the code. `blocks[t]` holds level `t`'s generator rows over the
    /// base field (entries are field symbol indices); empty blocks are
    /// allowed. The stacked matrix must be in standard form.
    pub fn new(modulus: Modulus, blocks: Vec<Vec<Vec<Sym>>>) -> Result<Self, Error> {
        let gamma = modulus.exponent();
        if blocks.len() != gamma as usize {
            return Err(Error::InvalidCode(format!(
                "expected {gamma} generator blocks, got {}",
                blocks.len()
            )));
        }
        let chain = ring_table(modulus.value())?;
        let field = ring_table(modulus.prime())?;
        let n = blocks
            .iter()
            .flat_map(|b| b.iter())
            .map(|row| row.len())
            .next()
            .ok_or_else(|| Error::InvalidCode("all generator blocks are empty".into()))?;
        let mut levels = Vec::with_capacity(blocks.len());
        let mut offset = 0;
        for (t, rows) in blocks.into_iter().enumerate() {
            for row in &rows {
                if row.len() != n {
                    return Err(Error::InvalidCode("ragged generator rows".into()));
                }
                if row.iter().any(|&s| (s as usize) >= field.q()) {
                    return Err(Error::InvalidCode("generator symbol out of field range".into()));
                }
            }
            let mut coeff_value = crate::eisenstein::ONE;
            for _ in 0..(gamma - t as u32) {
                coeff_value = coeff_value.checked_mul(modulus.prime())?;
            }
            let ring = ring_table(coeff_value)?;
            let k_t = rows.len();
            levels.push(Level {
                rows,
                ring,
                offset,
            });
            offset += k_t;
        }
        let total_k = offset;
        if total_k > n {
            return Err(Error::InvalidCode(format!(
                "stacked generator has {total_k} rows but length {n}"
            )));
        }
        let code = Self {
            modulus,
            chain,
            field,
            levels,
            n,
        };
        if !code.stacked_standard_form() {
            return Err(Error::InvalidCode(
                "stacked generator blocks are not in standard form".into(),
            ));
        }
        Ok(code)
    }

    fn stacked_standard_form(&self) -> bool {
        let one = self.field.one();
        let total_k: usize = self.levels.iter().map(|l| l.rows.len()).sum();
        for level in &self.levels {
            for (r, row) in level.rows.iter().enumerate() {
                for j in 0..total_k {
                    let want = if j == level.offset + r { one } else { 0 };
                    if row[j] != want {
                        return false;
                    }
                }
            }
        }
        true
    }

    pub fn modulus(&self) -> &Modulus {
        &self.modulus
    }

    /// Output ring `S/(p^g)`.
    pub fn chain_ring(&self) -> &OpTables {
        &self.chain
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Total number of message positions across levels.
    pub fn k(&self) -> usize {
        self.levels.iter().map(|l| l.rows.len()).sum()
    }

    /// Alphabet size of each message position, in position order.
    pub fn message_alphabets(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.k());
        for level in &self.levels {
            out.extend(std::iter::repeat(level.ring.q()).take(level.rows.len()));
        }
        out
    }

    /// Number of codewords.
    pub fn cardinality(&self) -> u128 {
        self.message_alphabets()
            .iter()
            .fold(1u128, |acc, &q| acc * q as u128)
    }

    /// Encodes one message (level-0 positions first). Position `i` of level
    /// `t` takes a symbol index into the leaders of `S/(p^(g-t))`.
    pub fn encode(&self, msg: &[Sym]) -> Result<Vec<Sym>, Error> {
        if msg.len() != self.k() {
            return Err(Error::Dimension(format!(
                "message length {} for k={}",
                msg.len(),
                self.k()
            )));
        }
        let mut acc = vec![crate::eisenstein::ZERO; self.n];
        let mut pos = 0;
        let mut scale = crate::eisenstein::ONE;
        for level in &self.levels {
            for row in &level.rows {
                let w = msg[pos];
                if (w as usize) >= level.ring.q() {
                    return Err(Error::Dimension(format!("message symbol {w} out of range")));
                }
                let coeff = level.ring.leader(w).checked_mul(scale)?;
                for (j, &g) in row.iter().enumerate() {
                    let term = coeff.checked_mul(self.field.leader(g))?;
                    acc[j] = acc[j].checked_add(term)?;
                }
                pos += 1;
            }
            scale = scale.checked_mul(self.modulus.prime())?;
        }
        Ok(acc.into_iter().map(|x| self.chain.sym(x)).collect())
    }

    /// Recovers the message from pivot columns (exact division by `p^t`),
    /// then verifies by re-encoding.
    pub fn extract(&self, codeword: &[Sym]) -> Result<Vec<Sym>, Error> {
        if codeword.len() != self.n {
            return Err(Error::Dimension(format!(
                "codeword length {} for n={}",
                codeword.len(),
                self.n
            )));
        }
        // The identity entry of a pivot row lifts to the minimum-norm leader
        // of the coset of 1, which is a unit congruent to 1 mod p but not
        // necessarily the literal 1; divide it back out after the level scale.
        let pivot_unit = self.field.leader(self.field.one());
        let pivot_unit_inv = pivot_unit.unit_inverse()?;
        let mut msg = Vec::with_capacity(self.k());
        let mut scale = crate::eisenstein::ONE;
        for level in &self.levels {
            for r in 0..level.rows.len() {
                let col = level.offset + r;
                let x = self.chain.leader(codeword[col]);
                let v = x.exact_div(scale).map_err(|_| {
                    Error::InvalidCode("pivot column is not divisible by its level scale".into())
                })?;
                msg.push(level.ring.sym(v.checked_mul(pivot_unit_inv)?));
            }
            scale = scale.checked_mul(self.modulus.prime())?;
        }
        let check = self.encode(&msg)?;
        if check != codeword {
            return Err(Error::InvalidCode("input is not a codeword".into()));
        }
        Ok(msg)
    }

    /// Iterates all codewords in message-odometer order.
    pub fn codewords(&self) -> impl Iterator<Item = Vec<Sym>> + '_ {
        MessageOdometer::new(self.message_alphabets()).map(move |msg| {
            self.encode(&msg).expect("odometer messages are in range")
        })
    }

    /// The lattice-generator rows of the code: the codeword of each unit
    /// message, lifted to exact `Z[w]` row vectors. Level-`t` rows come out
    /// as `p^t` times the field row.
    pub fn generator_rows_lifted(&self) -> Result<Vec<Vec<EisensteinInt>>, Error> {
        let mut rows = Vec::with_capacity(self.k());
        for i in 0..self.k() {
            let mut msg = vec![0 as Sym; self.k()];
            msg[i] = self.unit_symbol(i);
            let cw = self.encode(&msg)?;
            rows.push(cw.iter().map(|&s| self.chain.leader(s)).collect());
        }
        Ok(rows)
    }

    fn unit_symbol(&self, pos: usize) -> Sym {
        let mut seen = 0;
        for level in &self.levels {
            if pos < seen + level.rows.len() {
                return level.ring.one();
            }
            seen += level.rows.len();
        }
        unreachable!("position bounded by k()");
    }

    /// Number of generator rows introduced at level `t`.
    pub fn level_block_rows(&self, t: usize) -> usize {
        self.levels.get(t).map_or(0, |l| l.rows.len())
    }

    /// The field code active at scale `p^t`: the span of all generator
    /// blocks up to and including level `t` over `S/(p)`. Returns `None`
    /// when no rows have appeared yet at that level.
    pub fn level_code(&self, t: usize) -> Result<Option<BlockCode>, Error> {
        if t >= self.levels.len() {
            return Err(Error::LayerIndex(t, self.levels.len()));
        }
        let rows: Vec<Vec<Sym>> = self.levels[..=t]
            .iter()
            .flat_map(|l| l.rows.iter().cloned())
            .collect();
        if rows.is_empty() {
            return Ok(None);
        }
        Ok(Some(BlockCode::new(self.field.clone(), rows)?))
    }
}

// --- shared enumeration helper --------------------------------------------------

/// Mixed-radix odometer over message symbol tuples; yields the all-zero tuple
/// first and then counts up with the last position fastest.
pub struct MessageOdometer {
    radices: Vec<usize>,
    state: Vec<Sym>,
    done: bool,
}

impl MessageOdometer {
    pub fn new(radices: Vec<usize>) -> Self {
        let state = vec![0; radices.len()];
        let done = radices.iter().any(|&r| r == 0);
        Self {
            radices,
            state,
            done,
        }
    }
}

impl Iterator for MessageOdometer {
    type Item = Vec<Sym>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let out = self.state.clone();
        let mut i = self.state.len();
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            if (self.state[i] as usize) + 1 < self.radices[i] {
                self.state[i] += 1;
                break;
            }
            self.state[i] = 0;
        }
        Some(out)
    }
}
