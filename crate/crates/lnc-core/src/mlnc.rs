//! Transmission chain for the two-way-relay multiple-access hop: shaped,
//! dithered sources, the noisy superposition, and the relay-side decoders
//! that recover one linear combination of messages per layer.
//!
//! # Overview
//!
//! Each source encodes its per-layer messages into a constellation word,
//! adds a dither, and folds the result into the Voronoi cell of the coarse
//! lattice, so every transmitted coordinate is power-bounded. The relay
//! observes `y = Σ hℓ·xℓ + z` and never tries to separate the sources;
//! instead it recovers, layer by layer, the combination `⊕ℓ aℓ·wℓ`. Two
//! decoder families are provided:
//!
//! * [`Relay::lif_decode`] — an integer-forcing quantizer per layer: scale
//!   by α, cancel the dithers, fold each coordinate by the layer kernel, and
//!   search the layer code (trellis for convolutional layers, enumeration
//!   otherwise) for the nearest folded codeword.
//! * [`Relay::lsd_posterior`] and the schedules built on it
//!   ([`Relay::msd_decode`], [`Relay::imsd_decode`],
//!   [`Relay::independent_decode`]) — an exact per-symbol soft detector that
//!   enumerates every message tuple, weighs it by the channel likelihood and
//!   the other layers' beliefs, and feeds per-layer MAP decoders. Only
//!   extrinsic information is exchanged between stages.
//!
//! # Example
//!
//! ```
//! use lnc_core::lattice::LatticeSpec;
//! use lnc_core::mlnc::{self, ChannelConfig, CoefficientPlan, Fading, Relay};
//! use rand::SeedableRng;
//!
//! let lat = LatticeSpec::rep12()?;
//! let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
//! let w1 = vec![vec![1], vec![2]]; // one message symbol per layer
//! let w2 = vec![vec![2], vec![3]];
//! let s1 = mlnc::transmit(&lat, &w1, None, &mut rng)?;
//! let s2 = mlnc::transmit(&lat, &w2, None, &mut rng)?;
//! let config = ChannelConfig::new(Fading::Unit, 1e-12, 2)?;
//! let h = config.realize_fading(&mut rng);
//! let dithers = vec![s1.dither.clone(), s2.dither.clone()];
//! let states = [s1, s2];
//! let y = mlnc::mac_output(&states, &config, &h, &mut rng)?;
//!
//! let p = mlnc::average_power(lat.varpi())?;
//! let plan = CoefficientPlan::unit(&lat, &h, p, config.noise_variance)?;
//! let relay = Relay::new(&lat, &plan, &h, config.noise_variance, dithers)?;
//! let decoded = relay.lif_decode(&y, 0)?.combination;
//! let truth = mlnc::linear_combination(&lat, &plan, 0, &[&w1, &w2])?;
//! assert_eq!(decoded, truth);
//! # Ok::<(), lnc_core::Error>(())
//! ```

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::eisenstein::EisensteinInt;
use crate::lattice::{nearest_in_coset, LatticeSpec, LayerCode};
use crate::logdomain::logsumexp;
use crate::oracle::{self, Sublattice};
use crate::residue::Sym;
use crate::Error;

/// Saturation bound for log-ratio entries. Certainty beyond `exp(±60)` is
/// clipped so belief vectors stay finite through repeated exchanges.
const L_CLAMP: f64 = 60.0;

/// Largest message-tuple product the soft detector will enumerate.
const TUPLE_BOUND: usize = 1 << 20;

// --- channel ---------------------------------------------------------------------

/// Fading law for the multiple-access hop.
#[derive(Clone, Debug)]
pub enum Fading {
    /// `hℓ = 1` for every source.
    Unit,
    /// A fixed, known coefficient per source.
    Fixed(Vec<Complex64>),
    /// Independent unit-variance circular Gaussian per source, redrawn per
    /// frame and known to the relay.
    Rayleigh,
}

/// The multiple-access channel: fading law, noise level, source count.
#[derive(Clone, Debug)]
pub struct ChannelConfig {
    pub fading: Fading,
    /// Noise variance per complex coordinate.
    pub noise_variance: f64,
    pub num_sources: usize,
}

impl ChannelConfig {
    pub fn new(fading: Fading, noise_variance: f64, num_sources: usize) -> Result<Self, Error> {
        if !(noise_variance > 0.0 && noise_variance.is_finite()) {
            return Err(Error::Config(format!(
                "noise variance must be positive and finite, got {noise_variance}"
            )));
        }
        if num_sources == 0 {
            return Err(Error::Config("at least one source".into()));
        }
        if let Fading::Fixed(h) = &fading {
            if h.len() != num_sources {
                return Err(Error::Dimension(format!(
                    "{} fading coefficients for {} sources",
                    h.len(),
                    num_sources
                )));
            }
            if h.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
                return Err(Error::NonFinite);
            }
        }
        Ok(Self {
            fading,
            noise_variance,
            num_sources,
        })
    }

    /// Draws the per-frame fading vector (constant within a frame).
    pub fn realize_fading<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Complex64> {
        match &self.fading {
            Fading::Unit => vec![Complex64::new(1.0, 0.0); self.num_sources],
            Fading::Fixed(h) => h.clone(),
            Fading::Rayleigh => (0..self.num_sources)
                .map(|_| {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
                })
                .collect(),
        }
    }
}

// --- transmitter -----------------------------------------------------------------

/// One source's frame: its messages, the dither it applied, and the channel
/// word it radiates.
#[derive(Clone, Debug)]
pub struct SourceState {
    /// Per-layer message symbols.
    pub messages: Vec<Vec<Sym>>,
    /// Per-coordinate dither, inside the Voronoi cell of the coarse lattice.
    pub dither: Vec<Complex64>,
    /// Transmitted word: constellation plus dither, folded into the cell.
    pub signal: Vec<Complex64>,
}

/// Folds a complex value into the Voronoi cell of `varpi * Z[w]` by
/// subtracting the nearest coarse point.
pub fn fold_coarse(z: Complex64, varpi: EisensteinInt) -> Result<Complex64, Error> {
    if varpi.is_zero() {
        return Err(Error::DivisionByZero);
    }
    let q = EisensteinInt::quantize(z / varpi.to_complex())?;
    let shift = q.checked_mul(varpi)?;
    Ok(z - shift.to_complex())
}

/// Samples one dither coordinate: uniform over the parallelotope spanned by
/// `varpi` and `varpi*w`, then folded, which is exactly uniform over the
/// Voronoi cell of the coarse lattice.
fn sample_dither_coord<R: Rng + ?Sized>(
    varpi: EisensteinInt,
    rng: &mut R,
) -> Result<Complex64, Error> {
    let u: f64 = rng.gen();
    let v: f64 = rng.gen();
    let raw = varpi.to_complex() * u + (varpi * crate::eisenstein::OMEGA).to_complex() * v;
    fold_coarse(raw, varpi)
}

/// Draws a full dither vector, one i.i.d. cell-uniform coordinate per
/// channel use.
pub fn sample_dither<R: Rng + ?Sized>(
    varpi: EisensteinInt,
    n: usize,
    rng: &mut R,
) -> Result<Vec<Complex64>, Error> {
    (0..n).map(|_| sample_dither_coord(varpi, rng)).collect()
}

/// Maps per-layer messages to the transmitted word. With `dither: None` a
/// fresh cell-uniform dither is drawn; the all-zero dither sends the plain
/// minimum-norm constellation.
pub fn transmit<R: Rng + ?Sized>(
    lat: &LatticeSpec,
    messages: &[Vec<Sym>],
    dither: Option<Vec<Complex64>>,
    rng: &mut R,
) -> Result<SourceState, Error> {
    let constellation = lat.encode(messages)?;
    let n = constellation.len();
    let dither = match dither {
        Some(d) => {
            if d.len() != n {
                return Err(Error::Dimension(format!(
                    "dither of length {} for {} channel uses",
                    d.len(),
                    n
                )));
            }
            d
        }
        None => sample_dither(lat.varpi(), n, rng)?,
    };
    let varpi = lat.varpi();
    let ring = lat.ring();
    let mut signal = Vec::with_capacity(n);
    for (t, &sym) in constellation.iter().enumerate() {
        let point = ring.leader(sym).to_complex();
        let x = if dither[t] == Complex64::new(0.0, 0.0) {
            // The leaders are the minimum-norm coset representatives, which
            // already live in the (closed) cell; skipping the fold avoids a
            // boundary tie flipping them to an equal-norm sibling.
            point
        } else {
            fold_coarse(point + dither[t], varpi)?
        };
        signal.push(x);
    }
    Ok(SourceState {
        messages: messages.to_vec(),
        dither,
        signal,
    })
}

/// Second moment per complex coordinate of a cell-uniform transmit word:
/// the mean squared radius of the hexagonal Voronoi cell of `varpi * Z[w]`.
///
/// Evaluated by decomposing the hexagon into six triangles and applying the
/// edge-midpoint rule, which integrates quadratics exactly — no closed-form
/// constant is assumed.
pub fn average_power(varpi: EisensteinInt) -> Result<f64, Error> {
    if varpi.is_zero() {
        return Err(Error::DivisionByZero);
    }
    let w = varpi.to_complex();
    // Cell corners of Z[w] sit at radius 1/sqrt(3), rotated 30 degrees off
    // the nearest-neighbour directions; scaling by varpi is a similarity.
    let corners: Vec<Complex64> = (0..6)
        .map(|k| {
            let ang = std::f64::consts::FRAC_PI_6 + k as f64 * std::f64::consts::FRAC_PI_3;
            w * Complex64::from_polar(1.0 / 3f64.sqrt(), ang)
        })
        .collect();
    let mut second_moment = 0.0;
    let mut area = 0.0;
    for k in 0..6 {
        let a = corners[k];
        let b = corners[(k + 1) % 6];
        let tri_area = 0.5 * (a.conj() * b).im.abs();
        let mids = [a * 0.5, b * 0.5, (a + b) * 0.5];
        second_moment += tri_area / 3.0 * mids.iter().map(|m| m.norm_sqr()).sum::<f64>();
        area += tri_area;
    }
    Ok(second_moment / area)
}

/// Mean energy per symbol of the bare (undithered) constellation: the
/// average squared magnitude of the minimum-norm coset representatives.
/// This is the power actually radiated when dithering is off, slightly
/// above the cell average that dithered words converge to.
pub fn constellation_energy(lat: &LatticeSpec) -> f64 {
    let ring = lat.ring();
    let q = ring.q();
    (0..q)
        .map(|w| ring.leader(w as Sym).to_complex().norm_sqr())
        .sum::<f64>()
        / q as f64
}

/// Superimposes the source words through the fading channel and adds
/// circular Gaussian noise of variance `noise_variance` per coordinate.
pub fn mac_output<R: Rng + ?Sized>(
    states: &[SourceState],
    config: &ChannelConfig,
    h: &[Complex64],
    rng: &mut R,
) -> Result<Vec<Complex64>, Error> {
    if states.len() != config.num_sources || h.len() != config.num_sources {
        return Err(Error::Dimension(format!(
            "{} states and {} fading coefficients for {} sources",
            states.len(),
            h.len(),
            config.num_sources
        )));
    }
    let n = states[0].signal.len();
    if states.iter().any(|s| s.signal.len() != n) {
        return Err(Error::Dimension("sources disagree on frame length".into()));
    }
    let sigma = (config.noise_variance / 2.0).sqrt();
    let mut y = Vec::with_capacity(n);
    for t in 0..n {
        let mut acc = Complex64::new(0.0, 0.0);
        for (state, &hl) in states.iter().zip(h) {
            acc += hl * state.signal[t];
        }
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        y.push(acc + Complex64::new(re * sigma, im * sigma));
    }
    Ok(y)
}

// --- belief vectors ----------------------------------------------------------------

/// Log-ratio belief over a layer alphabet: entry `k` (zero-based) is
/// `log(Pr(V = k+1) / Pr(V = 0))`, so the vector has `q - 1` entries and the
/// zero symbol is the implicit reference.
#[derive(Clone, Debug, PartialEq)]
pub struct LVector {
    values: Vec<f64>,
}

impl LVector {
    /// The no-information belief over a `q`-ary alphabet.
    pub fn zeros(q: usize) -> Self {
        Self {
            values: vec![0.0; q.saturating_sub(1)],
        }
    }

    /// Wraps explicit log-ratios (must be finite).
    pub fn new(values: Vec<f64>) -> Result<Self, Error> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { values })
    }

    /// Builds from unnormalized log-scores over all `q` symbols; entry 0
    /// becomes the reference. Scores are saturated at `L_CLAMP` below the
    /// best one, which preserves the ordering of the plausible symbols even
    /// when the reference symbol itself is wildly unlikely.
    pub fn from_log_scores(scores: &[f64]) -> Self {
        let mx = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sat = |s: f64| -> f64 {
            let r = s - mx;
            if r.is_nan() {
                -L_CLAMP
            } else {
                r.max(-L_CLAMP)
            }
        };
        let base = sat(scores[0]);
        let values = scores[1..].iter().map(|&s| sat(s) - base).collect();
        Self { values }
    }

    /// Builds from a probability vector over all `q` symbols.
    pub fn from_probabilities(p: &[f64]) -> Self {
        let scores: Vec<f64> = p.iter().map(|&x| x.max(1e-300).ln()).collect();
        Self::from_log_scores(&scores)
    }

    /// Alphabet size `q` (entries plus the reference symbol).
    pub fn q(&self) -> usize {
        self.values.len() + 1
    }

    /// The `q - 1` log-ratios, without the implicit leading zero.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Normalized log-probabilities over all `q` symbols.
    pub fn log_probs(&self) -> Vec<f64> {
        let mut full = Vec::with_capacity(self.values.len() + 1);
        full.push(0.0);
        full.extend_from_slice(&self.values);
        let z = logsumexp(&full);
        for v in &mut full {
            *v -= z;
        }
        full
    }

    /// Implied probabilities over all `q` symbols (sum to one).
    pub fn probabilities(&self) -> Vec<f64> {
        self.log_probs().iter().map(|&v| v.exp()).collect()
    }

    /// Most likely symbol; ties resolve to the smallest index.
    pub fn hard(&self) -> Sym {
        let mut best = 0usize;
        let mut best_v = 0.0f64;
        for (k, &v) in self.values.iter().enumerate() {
            if v > best_v {
                best_v = v;
                best = k + 1;
            }
        }
        best as Sym
    }

    /// Entrywise sum of two belief vectors over the same alphabet.
    pub fn sum(&self, other: &Self) -> Result<Self, Error> {
        if self.values.len() != other.values.len() {
            return Err(Error::Dimension("belief vectors of different arity".into()));
        }
        Ok(Self {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }
}

// --- scaling and coefficient selection ------------------------------------------------

/// The variance of the residual `α·y − Σ ãℓ·xℓ` per unit power, as a
/// function of the scaling; its minimizer is the MMSE coefficient and the
/// achievable-rate term is the log of its inverse.
fn residual_variance(h: &[Complex64], a: &[EisensteinInt], snr: f64) -> f64 {
    let a2: f64 = a.iter().map(|x| x.norm() as f64).sum();
    let dot: Complex64 = h
        .iter()
        .zip(a)
        .map(|(hl, al)| hl.conj() * al.to_complex())
        .sum();
    let h2: f64 = h.iter().map(|c| c.norm_sqr()).sum();
    a2 - snr * dot.norm_sqr() / (1.0 + snr * h2)
}

/// MMSE scaling for the combination `Σ ãℓ·xℓ`:
/// `α = P·(hᴴã) / (N₀ + P‖h‖²)`.
pub fn choose_alpha(h: &[Complex64], a_tilde: &[EisensteinInt], p: f64, n0: f64) -> Complex64 {
    let dot: Complex64 = h
        .iter()
        .zip(a_tilde)
        .map(|(hl, al)| hl.conj() * al.to_complex())
        .sum();
    let h2: f64 = h.iter().map(|c| c.norm_sqr()).sum();
    dot * p / (n0 + p * h2)
}

/// Per-layer decoding targets: the integer combination `ãⁱ`, its scaling
/// `αⁱ`, and the reduced coefficients `aⁱℓ` in each layer's own ring.
#[derive(Clone, Debug)]
pub struct CoefficientPlan {
    /// MMSE scaling per layer.
    pub alpha: Vec<Complex64>,
    /// Integer coefficient vector per layer (one entry per source).
    pub a_tilde: Vec<Vec<EisensteinInt>>,
    /// `a_tilde` reduced into each layer's residue ring.
    pub reduced: Vec<Vec<Sym>>,
}

impl CoefficientPlan {
    /// Builds a plan from explicit per-layer integer vectors, deriving the
    /// scalings and reduced coefficients.
    pub fn for_vectors(
        lat: &LatticeSpec,
        h: &[Complex64],
        a_tilde: Vec<Vec<EisensteinInt>>,
        p: f64,
        n0: f64,
    ) -> Result<Self, Error> {
        if a_tilde.len() != lat.layer_count() {
            return Err(Error::Dimension(format!(
                "{} coefficient vectors for {} layers",
                a_tilde.len(),
                lat.layer_count()
            )));
        }
        let mut alpha = Vec::with_capacity(a_tilde.len());
        let mut reduced = Vec::with_capacity(a_tilde.len());
        for (i, ai) in a_tilde.iter().enumerate() {
            if ai.len() != h.len() {
                return Err(Error::Dimension(format!(
                    "layer {i} has {} coefficients for {} sources",
                    ai.len(),
                    h.len()
                )));
            }
            let ring = lat.layer(i)?.ring();
            let red: Vec<Sym> = ai.iter().map(|&x| ring.sym(x)).collect();
            if red.iter().all(|&s| s == 0) {
                return Err(Error::Config(format!(
                    "layer {i} coefficients vanish in its residue ring"
                )));
            }
            alpha.push(choose_alpha(h, ai, p, n0));
            reduced.push(red);
        }
        Ok(Self {
            alpha,
            a_tilde,
            reduced,
        })
    }

    /// The all-ones combination for every layer — the natural choice on a
    /// symmetric unit channel.
    pub fn unit(lat: &LatticeSpec, h: &[Complex64], p: f64, n0: f64) -> Result<Self, Error> {
        let ones = vec![vec![crate::eisenstein::ONE; h.len()]; lat.layer_count()];
        Self::for_vectors(lat, h, ones, p, n0)
    }
}

/// Search criterion for [`choose_coefficients`].
#[derive(Clone, Debug)]
pub enum CoefficientCriterion {
    /// Maximize the per-layer achievable-rate term exactly over the search
    /// ball.
    ExhaustiveRate,
    /// Maximize a Monte Carlo estimate of the per-symbol mutual information
    /// between the channel output and the layer combination, over reduced
    /// coefficient tuples.
    MutualInformation { samples: usize, seed: u64 },
}

/// Integer elements within the coefficient search ball, smallest first and
/// canonical associates ahead of their unit multiples, so exact ties in any
/// later argmin resolve to the canonical representative.
fn coefficient_candidates(norm_bound: i128) -> Vec<EisensteinInt> {
    let r = (norm_bound as f64).sqrt().ceil() as i64 + 1;
    let mut out = Vec::new();
    for a in -r..=r {
        for b in -r..=r {
            let x = EisensteinInt::new(a, b);
            if x.norm() <= norm_bound {
                out.push(x);
            }
        }
    }
    out.sort_by_key(|x| {
        let canonical = x.canonical_associate().0 == *x;
        (x.norm(), !canonical, x.a(), x.b())
    });
    out
}

/// Robust argmin over floats: among scores within a relative whisker of the
/// best, the earliest candidate wins, so structurally tied candidates (for
/// example unit multiples) resolve the same way regardless of rounding.
fn robust_argmin(scores: &[f64]) -> Option<usize> {
    let best = scores.iter().cloned().fold(f64::INFINITY, f64::min);
    if !best.is_finite() {
        return None;
    }
    let tol = 1e-9 * (1.0 + best.abs());
    scores.iter().position(|&s| s <= best + tol)
}

/// Searches the coefficient ball (entry norms ≤ 9) for the best per-layer
/// integer vectors, by exact rate term or by estimated mutual information.
pub fn choose_coefficients(
    lat: &LatticeSpec,
    h: &[Complex64],
    p: f64,
    n0: f64,
    criterion: CoefficientCriterion,
) -> Result<CoefficientPlan, Error> {
    let l = h.len();
    if l == 0 || l > 3 {
        return Err(Error::Config(format!(
            "coefficient search supports 1..=3 sources, got {l}"
        )));
    }
    let snr = p / n0;
    let entries = coefficient_candidates(9);
    let total = entries.len().pow(l as u32);
    let mut a_tilde = Vec::with_capacity(lat.layer_count());
    for i in 0..lat.layer_count() {
        let ring = lat.layer(i)?.ring();
        // Enumerate vectors in lexicographic candidate order.
        let mut vectors: Vec<Vec<EisensteinInt>> = Vec::new();
        let mut variances: Vec<f64> = Vec::new();
        for idx in 0..total {
            let mut rem = idx;
            let mut v = Vec::with_capacity(l);
            for _ in 0..l {
                v.push(entries[rem % entries.len()]);
                rem /= entries.len();
            }
            if v.iter().all(|x| x.is_zero()) {
                continue;
            }
            if v.iter().all(|&x| ring.sym(x) == 0) {
                continue; // invisible to this layer
            }
            variances.push(residual_variance(h, &v, snr));
            vectors.push(v);
        }
        if vectors.is_empty() {
            return Err(Error::Config(format!(
                "no usable coefficient vector for layer {i} within the search ball"
            )));
        }
        let pick = match &criterion {
            CoefficientCriterion::ExhaustiveRate => {
                robust_argmin(&variances).ok_or(Error::NonFinite)?
            }
            CoefficientCriterion::MutualInformation { samples, seed } => {
                // The combination observed by this layer depends only on the
                // reduced tuple, so score each distinct reduction once and
                // break ties toward the lower residual variance.
                let mut seen: Vec<(Vec<Sym>, f64)> = Vec::new();
                let mut neg_mi = vec![0.0f64; vectors.len()];
                for (k, v) in vectors.iter().enumerate() {
                    let red: Vec<Sym> = v.iter().map(|&x| ring.sym(x)).collect();
                    let mi = match seen.iter().find(|(r, _)| *r == red) {
                        Some((_, mi)) => *mi,
                        None => {
                            let mi =
                                reduced_tuple_mi(lat, i, &red, h, n0, *samples, *seed)?;
                            seen.push((red.clone(), mi));
                            mi
                        }
                    };
                    neg_mi[k] = -mi;
                }
                // Two-key robust argmin: best MI, then best rate term.
                let best = neg_mi.iter().cloned().fold(f64::INFINITY, f64::min);
                let tol = 1e-3 * (1.0 + best.abs());
                let mut pick = None;
                let mut pick_var = f64::INFINITY;
                for k in 0..vectors.len() {
                    if neg_mi[k] <= best + tol && variances[k] < pick_var - 1e-12 {
                        pick = Some(k);
                        pick_var = variances[k];
                    }
                }
                pick.ok_or(Error::NonFinite)?
            }
        };
        a_tilde.push(vectors[pick].clone());
    }
    CoefficientPlan::for_vectors(lat, h, a_tilde, p, n0)
}

/// Monte Carlo estimate of the per-symbol mutual information between the
/// noisy superposition and the layer-`i` combination under the reduced
/// coefficients `red`, in bits.
fn reduced_tuple_mi(
    lat: &LatticeSpec,
    i: usize,
    red: &[Sym],
    h: &[Complex64],
    n0: f64,
    samples: usize,
    seed: u64,
) -> Result<f64, Error> {
    if samples == 0 {
        return Err(Error::Config("zero mutual-information samples".into()));
    }
    let mu = tuple_signals(lat, h)?;
    let tuples = mu.len();
    let classes = combination_map(lat, i, red, tuples)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sigma = (n0 / 2.0).sqrt();
    let mut acc = 0.0;
    for _ in 0..samples {
        let tau = rng.gen_range(0..tuples);
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        let y = mu[tau] + Complex64::new(re * sigma, im * sigma);
        let mut num = f64::NEG_INFINITY; // log Σ_{class(tau')=v} exp(...)
        let mut den = f64::NEG_INFINITY; // log Σ_all exp(...)
        let mut class_size = 0usize;
        for tau2 in 0..tuples {
            let ll = -(y - mu[tau2]).norm_sqr() / n0;
            den = logsumexp(&[den, ll]);
            if classes[tau2] == classes[tau] {
                num = logsumexp(&[num, ll]);
                class_size += 1;
            }
        }
        // I = E[log p(y|v)/p(y)] with p(y|v) the class-average density.
        acc += (num - (class_size as f64).ln()) - (den - (tuples as f64).ln());
    }
    Ok(acc / samples as f64 / std::f64::consts::LN_2)
}

/// The layer-`i` combination `⊕ℓ aℓ·wℓ` of the sources' actual messages —
/// the ground truth every relay decoder is judged against.
pub fn linear_combination(
    lat: &LatticeSpec,
    plan: &CoefficientPlan,
    i: usize,
    sources: &[&[Vec<Sym>]],
) -> Result<Vec<Sym>, Error> {
    let ring = lat.layer(i)?.ring();
    let coeffs = plan
        .reduced
        .get(i)
        .ok_or(Error::LayerIndex(i, plan.reduced.len()))?;
    if sources.len() != coeffs.len() {
        return Err(Error::Dimension(format!(
            "{} sources for {} coefficients",
            sources.len(),
            coeffs.len()
        )));
    }
    let len = sources[0][i].len();
    let mut out = vec![0 as Sym; len];
    for (msgs, &c) in sources.iter().zip(coeffs) {
        if msgs[i].len() != len {
            return Err(Error::Dimension("sources disagree on message length".into()));
        }
        for (o, &w) in out.iter_mut().zip(&msgs[i]) {
            *o = ring.add(*o, ring.mul(c, w));
        }
    }
    Ok(out)
}

// --- shared tuple tables ---------------------------------------------------------

/// Superimposed constellation per message tuple (undithered): entry `tau`
/// is `Σℓ hℓ·leader(wℓ)` where `wℓ` is digit `ℓ` of `tau` in base `q`.
pub(crate) fn tuple_signals(
    lat: &LatticeSpec,
    h: &[Complex64],
) -> Result<Vec<Complex64>, Error> {
    let q = lat.ring().q();
    let l = h.len();
    let tuples = q
        .checked_pow(l as u32)
        .filter(|&t| t <= TUPLE_BOUND)
        .ok_or_else(|| Error::BoundExceeded("message-tuple product too large".into()))?;
    let leaders: Vec<Complex64> = (0..q)
        .map(|w| lat.ring().leader(w as Sym).to_complex())
        .collect();
    let mut mu = vec![Complex64::new(0.0, 0.0); tuples];
    for (tau, m) in mu.iter_mut().enumerate() {
        let mut rem = tau;
        for &hl in h.iter().take(l) {
            *m += hl * leaders[rem % q];
            rem /= q;
        }
    }
    Ok(mu)
}

/// Per-symbol projection of the full residue ring onto layer `i`.
pub(crate) fn layer_projection_table(lat: &LatticeSpec, i: usize) -> Result<Vec<Sym>, Error> {
    let layer_ring = lat.layer(i)?.ring();
    Ok((0..lat.ring().q())
        .map(|w| layer_ring.sym(lat.ring().leader(w as Sym)))
        .collect())
}

/// Layer-`j` combination symbol per message tuple: entry `tau` is
/// `⊕ℓ reduced[ℓ]·proj_j(wℓ)` with `wℓ` digit `ℓ` of `tau` in base `q`.
pub(crate) fn combination_map(
    lat: &LatticeSpec,
    j: usize,
    reduced: &[Sym],
    tuples: usize,
) -> Result<Vec<Sym>, Error> {
    let q = lat.ring().q();
    let ring = lat.layer(j)?.ring();
    let proj = layer_projection_table(lat, j)?;
    let mut row = Vec::with_capacity(tuples);
    for tau in 0..tuples {
        let mut acc = 0 as Sym;
        let mut rem = tau;
        for &c in reduced {
            let w = (rem % q) as Sym;
            rem /= q;
            acc = ring.add(acc, ring.mul(c, proj[w as usize]));
        }
        row.push(acc);
    }
    Ok(row)
}

// --- relay -----------------------------------------------------------------------

/// Hard output of the integer-forcing quantizer for one layer.
#[derive(Clone, Debug)]
pub struct LifDecision {
    /// Estimated linear combination (message symbols of the layer code).
    pub combination: Vec<Sym>,
    /// The layer codeword it corresponds to.
    pub codeword: Vec<Sym>,
    /// Accumulated squared distance of the winning folded path.
    pub folded_distance2: f64,
}

/// One layer's result from a soft decoding schedule.
#[derive(Clone, Debug)]
pub struct LayerDecision {
    /// Hard estimate of the layer combination.
    pub combination: Vec<Sym>,
    /// Per-position extrinsic beliefs over the layer codeword symbols.
    pub code_extrinsic: Vec<LVector>,
}

/// All layers' results from one soft decoding schedule.
#[derive(Clone, Debug)]
pub struct SoftOutcome {
    pub layers: Vec<LayerDecision>,
}

/// Relay-side decoder state for one frame: the lattice, the coefficient
/// plan, the realized channel, and the sources' dithers (known to the
/// relay). Construction precomputes the superimposed constellation table.
pub struct Relay<'a> {
    lat: &'a LatticeSpec,
    plan: &'a CoefficientPlan,
    n0: f64,
    dithers: Vec<Vec<Complex64>>,
    /// `mu[t][tau]`: noiseless superposition per tuple; a single row when no
    /// source dithers (the table is then position-independent).
    mu: Vec<Vec<Complex64>>,
    /// `vmap[j][tau]`: layer-`j` combination symbol implied by tuple `tau`.
    vmap: Vec<Vec<Sym>>,
    tuples: usize,
    n: usize,
}

impl<'a> Relay<'a> {
    /// Builds the per-frame decoder. `dithers` holds one vector per source;
    /// an empty vector stands for the all-zero dither.
    pub fn new(
        lat: &'a LatticeSpec,
        plan: &'a CoefficientPlan,
        h: &[Complex64],
        n0: f64,
        dithers: Vec<Vec<Complex64>>,
    ) -> Result<Self, Error> {
        if !(n0 > 0.0 && n0.is_finite()) {
            return Err(Error::Config(format!(
                "noise variance must be positive and finite, got {n0}"
            )));
        }
        let l = h.len();
        if dithers.len() != l {
            return Err(Error::Dimension(format!(
                "{} dither vectors for {} sources",
                dithers.len(),
                l
            )));
        }
        if plan.a_tilde.len() != lat.layer_count()
            || plan.a_tilde.iter().any(|a| a.len() != l)
        {
            return Err(Error::Dimension(
                "coefficient plan does not match lattice and source count".into(),
            ));
        }
        let n = lat.n();
        if dithers.iter().any(|d| !d.is_empty() && d.len() != n) {
            return Err(Error::Dimension(format!(
                "dither vectors must be empty or of length {n}"
            )));
        }
        let q = lat.ring().q();
        let tuples = q
            .checked_pow(l as u32)
            .filter(|&t| t <= TUPLE_BOUND)
            .ok_or_else(|| Error::BoundExceeded("message-tuple product too large".into()))?;

        // Layer projections and per-tuple combination symbols.
        let m = lat.layer_count();
        let mut vmap = Vec::with_capacity(m);
        for j in 0..m {
            vmap.push(combination_map(lat, j, &plan.reduced[j], tuples)?);
        }

        // Superimposed constellation; dithers make it position-dependent.
        let dithered = dithers.iter().any(|d| !d.is_empty());
        let varpi = lat.varpi();
        let leaders: Vec<Complex64> = (0..q)
            .map(|w| lat.ring().leader(w as Sym).to_complex())
            .collect();
        let rows = if dithered { n } else { 1 };
        let mut mu = Vec::with_capacity(rows);
        for t in 0..rows {
            // Per-source folded constellation at this position.
            let mut xt = vec![vec![Complex64::new(0.0, 0.0); q]; l];
            for (src, row) in xt.iter_mut().enumerate() {
                let d = dithers[src].get(t).copied();
                for (w, slot) in row.iter_mut().enumerate() {
                    *slot = match d {
                        Some(d) if d != Complex64::new(0.0, 0.0) => {
                            fold_coarse(leaders[w] + d, varpi)?
                        }
                        _ => leaders[w],
                    };
                }
            }
            let mut row = vec![Complex64::new(0.0, 0.0); tuples];
            for (tau, slot) in row.iter_mut().enumerate() {
                let mut rem = tau;
                for (src, &hl) in h.iter().enumerate() {
                    *slot += hl * xt[src][rem % q];
                    rem /= q;
                }
            }
            mu.push(row);
        }

        Ok(Self {
            lat,
            plan,
            n0,
            dithers,
            mu,
            vmap,
            tuples,
            n,
        })
    }

    /// Convenience constructor for undithered frames.
    pub fn undithered(
        lat: &'a LatticeSpec,
        plan: &'a CoefficientPlan,
        h: &[Complex64],
        n0: f64,
    ) -> Result<Self, Error> {
        let dithers = vec![Vec::new(); h.len()];
        Self::new(lat, plan, h, n0, dithers)
    }

    fn mu_at(&self, t: usize) -> &[Complex64] {
        if self.mu.len() == 1 {
            &self.mu[0]
        } else {
            &self.mu[t]
        }
    }

    fn check_frame(&self, y: &[Complex64]) -> Result<(), Error> {
        if y.len() != self.n {
            return Err(Error::Dimension(format!(
                "received word of length {} for frame length {}",
                y.len(),
                self.n
            )));
        }
        if y.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(())
    }

    /// Scaled, dither-cancelled target for layer `i`:
    /// `αⁱ·y − Σℓ ãⁱℓ·dℓ`.
    fn lif_target(&self, y: &[Complex64], i: usize) -> Result<Vec<Complex64>, Error> {
        let alpha = self.plan.alpha[i];
        let a = &self.plan.a_tilde[i];
        let mut s: Vec<Complex64> = y.iter().map(|&v| alpha * v).collect();
        for (src, d) in self.dithers.iter().enumerate() {
            if d.is_empty() {
                continue;
            }
            let ac = a[src].to_complex();
            for (st, &dt) in s.iter_mut().zip(d) {
                *st -= ac * dt;
            }
        }
        Ok(s)
    }

    /// Integer-forcing decode of layer `i`: folds the scaled target by the
    /// layer kernel coordinate-by-coordinate and searches the layer code for
    /// the nearest folded codeword (trellis for convolutional layers,
    /// enumeration otherwise).
    pub fn lif_decode(&self, y: &[Complex64], i: usize) -> Result<LifDecision, Error> {
        self.check_frame(y)?;
        let layer = self.lat.layer(i)?;
        let s = self.lif_target(y, i)?;
        let ring = layer.ring();
        let modulus = layer.modulus().value();
        let qi = ring.q();
        // Folded per-coordinate cost of hypothesizing each layer symbol.
        let mut cost = vec![vec![0.0f64; qi]; self.n];
        for (t, row) in cost.iter_mut().enumerate() {
            for (sym, slot) in row.iter_mut().enumerate() {
                let (_, d2) = nearest_in_coset(s[t], ring.leader(sym as Sym), modulus)?;
                *slot = d2;
            }
        }
        let combination = match layer.code() {
            LayerCode::Conv { code, iota } => {
                code.viterbi(*iota, |pos, sym| cost[pos][sym as usize])?
            }
            _ => {
                let mut best: Option<(f64, Vec<Sym>)> = None;
                for cw in layer.codewords()? {
                    let total: f64 = cw
                        .iter()
                        .enumerate()
                        .map(|(t, &sym)| cost[t][sym as usize])
                        .sum();
                    if best.as_ref().map_or(true, |(b, _)| total < *b) {
                        best = Some((total, cw));
                    }
                }
                let (_, cw) = best.ok_or(Error::NoNonzeroCodeword)?;
                layer.extract(&cw)?
            }
        };
        let codeword = layer.encode(&combination)?;
        let folded_distance2 = codeword
            .iter()
            .enumerate()
            .map(|(t, &sym)| cost[t][sym as usize])
            .sum();
        Ok(LifDecision {
            combination,
            codeword,
            folded_distance2,
        })
    }

    /// Reference integer-forcing decode via the exhaustive nearest-point
    /// search on the full lattice (desk scale only). Returns the layer
    /// combination and the squared distance of the winning point.
    pub fn lif_decode_exact(
        &self,
        y: &[Complex64],
        i: usize,
    ) -> Result<(Vec<Sym>, f64), Error> {
        self.check_frame(y)?;
        let s = self.lif_target(y, i)?;
        let np = oracle::nearest_point(self.lat, Sublattice::Fine, &s)?;
        let per_layer = self.lat.split_message(&np.flat_message);
        Ok((per_layer[i].clone(), np.distance2))
    }

    /// Exact per-symbol soft detection for layer `i`.
    ///
    /// `priors[j]` carries the current belief about layer `j`'s codeword
    /// symbols (`None` = uninformative); the entry for `i` itself only adds
    /// into the a-posteriori output. Returns `(a-posteriori, extrinsic)`
    /// belief vectors per position, where a-posteriori = own prior +
    /// extrinsic and the extrinsic never includes layer `i`'s own prior.
    pub fn lsd_posterior(
        &self,
        y: &[Complex64],
        i: usize,
        priors: &[Option<&[LVector]>],
    ) -> Result<(Vec<LVector>, Vec<LVector>), Error> {
        self.check_frame(y)?;
        let m = self.lat.layer_count();
        if i >= m {
            return Err(Error::LayerIndex(i, m));
        }
        if priors.len() != m {
            return Err(Error::Dimension(format!(
                "{} prior slots for {} layers",
                priors.len(),
                m
            )));
        }
        let qi = self.lat.layer(i)?.ring().q();
        // Per-layer, per-position log-probabilities of the other layers.
        let mut weight: Vec<Option<Vec<Vec<f64>>>> = vec![None; m];
        for (j, w) in weight.iter_mut().enumerate() {
            if j == i {
                continue;
            }
            if let Some(rows) = priors[j] {
                let qj = self.lat.layer(j)?.ring().q();
                if rows.len() != self.n {
                    return Err(Error::Dimension(format!(
                        "layer {j} prior covers {} of {} positions",
                        rows.len(),
                        self.n
                    )));
                }
                if rows.iter().any(|lv| lv.q() != qj) {
                    return Err(Error::Dimension(format!(
                        "layer {j} prior has wrong alphabet"
                    )));
                }
                *w = Some(rows.iter().map(|lv| lv.log_probs()).collect());
            }
        }
        if let Some(rows) = priors[i] {
            if rows.len() != self.n || rows.iter().any(|lv| lv.q() != qi) {
                return Err(Error::Dimension("own-layer prior of wrong shape".into()));
            }
        }
        let inv_n0 = 1.0 / self.n0;
        let mut score = vec![0.0f64; self.tuples];
        let mut aposteriori = Vec::with_capacity(self.n);
        let mut extrinsic = Vec::with_capacity(self.n);
        for t in 0..self.n {
            let mu = self.mu_at(t);
            for (tau, s) in score.iter_mut().enumerate() {
                let diff = y[t] - mu[tau];
                let mut v = -diff.norm_sqr() * inv_n0;
                for (j, w) in weight.iter().enumerate() {
                    if let Some(w) = w {
                        v += w[t][self.vmap[j][tau] as usize];
                    }
                }
                *s = v;
            }
            // Bucket the tuple scores by the layer-i combination symbol.
            let mut bmax = vec![f64::NEG_INFINITY; qi];
            for (tau, &s) in score.iter().enumerate() {
                let v = self.vmap[i][tau] as usize;
                if s > bmax[v] {
                    bmax[v] = s;
                }
            }
            let mut bsum = vec![0.0f64; qi];
            for (tau, &s) in score.iter().enumerate() {
                let v = self.vmap[i][tau] as usize;
                if bmax[v].is_finite() {
                    bsum[v] += (s - bmax[v]).exp();
                }
            }
            let blog: Vec<f64> = (0..qi)
                .map(|v| {
                    if bmax[v].is_finite() {
                        bmax[v] + bsum[v].ln()
                    } else {
                        f64::NEG_INFINITY
                    }
                })
                .collect();
            let e = LVector::from_log_scores(&blog);
            let d = match priors[i] {
                Some(rows) => rows[t].sum(&e)?,
                None => e.clone(),
            };
            aposteriori.push(d);
            extrinsic.push(e);
        }
        Ok((aposteriori, extrinsic))
    }

    /// MAP-decodes layer `i` from per-position channel beliefs, returning
    /// hard message decisions and per-position extrinsic codeword beliefs.
    fn layer_map_decode(
        &self,
        i: usize,
        channel: &[LVector],
    ) -> Result<(Vec<Sym>, Vec<LVector>), Error> {
        let layer = self.lat.layer(i)?;
        let qi = layer.ring().q();
        if channel.len() != self.n || channel.iter().any(|lv| lv.q() != qi) {
            return Err(Error::Dimension("channel beliefs of wrong shape".into()));
        }
        let rows: Vec<Vec<f64>> = channel
            .iter()
            .map(|lv| {
                let mut r = Vec::with_capacity(qi);
                r.push(0.0);
                r.extend_from_slice(lv.values());
                r
            })
            .collect();
        match layer.code() {
            LayerCode::Conv { code, iota } => {
                let soft = code.forward_backward(*iota, &rows, None)?;
                let q = code.field().q();
                let b = code.input_lanes();
                let mut msg = Vec::with_capacity(code.message_len(*iota));
                for post in &soft.input_posteriors {
                    let mut best = 0usize;
                    for (u, &p) in post.iter().enumerate() {
                        if p > post[best] {
                            best = u;
                        }
                    }
                    let mut rem = best;
                    for _ in 0..b {
                        msg.push((rem % q) as Sym);
                        rem /= q;
                    }
                }
                let ext = soft
                    .output_extrinsics
                    .iter()
                    .map(|p| LVector::from_probabilities(p))
                    .collect();
                Ok((msg, ext))
            }
            _ => {
                // Exact MAP by codeword enumeration (small layer codes).
                let codewords: Vec<Vec<Sym>> = layer.codewords()?.collect();
                let totals: Vec<f64> = codewords
                    .iter()
                    .map(|cw| {
                        cw.iter()
                            .enumerate()
                            .map(|(t, &sym)| rows[t][sym as usize])
                            .sum()
                    })
                    .collect();
                let mut best = 0usize;
                for (k, &v) in totals.iter().enumerate() {
                    if v > totals[best] {
                        best = k;
                    }
                }
                let msg = layer.extract(&codewords[best])?;
                let mut ext = Vec::with_capacity(self.n);
                for t in 0..self.n {
                    let mut scores = vec![f64::NEG_INFINITY; qi];
                    for (cw, &total) in codewords.iter().zip(&totals) {
                        let sym = cw[t] as usize;
                        let s = total - rows[t][sym];
                        scores[sym] = logsumexp(&[scores[sym], s]);
                    }
                    ext.push(LVector::from_log_scores(&scores));
                }
                Ok((msg, ext))
            }
        }
    }

    /// Runs the soft detector and the per-layer decoders over `iterations`
    /// rounds of the given layer schedule, exchanging extrinsic beliefs.
    fn run_soft(
        &self,
        y: &[Complex64],
        schedule: &[usize],
        iterations: usize,
        feed_forward: bool,
        mut trace: Option<&mut Vec<String>>,
    ) -> Result<SoftOutcome, Error> {
        let m = self.lat.layer_count();
        {
            let mut seen = vec![false; m];
            if schedule.len() != m || schedule.iter().any(|&i| i >= m || std::mem::replace(&mut seen[i], true)) {
                return Err(Error::Config("schedule must be a permutation of the layers".into()));
            }
        }
        if iterations == 0 {
            return Err(Error::Config("at least one decoding iteration".into()));
        }
        let mut code_ext: Vec<Option<Vec<LVector>>> = vec![None; m];
        let mut decisions: Vec<Option<Vec<Sym>>> = vec![None; m];
        for it in 0..iterations {
            for &i in schedule {
                let priors: Vec<Option<&[LVector]>> = (0..m)
                    .map(|j| {
                        if feed_forward {
                            code_ext[j].as_deref()
                        } else {
                            None
                        }
                    })
                    .collect();
                let (_, detector_ext) = self.lsd_posterior(y, i, &priors)?;
                let (msg, dec_ext) = self.layer_map_decode(i, &detector_ext)?;
                if let Some(tr) = trace.as_deref_mut() {
                    let det_mean = mean_abs(&detector_ext);
                    let dec_mean = mean_abs(&dec_ext);
                    tr.push(format!(
                        "iter={} layer={} detector_extrinsic_mean={:.4} decoder_extrinsic_mean={:.4}",
                        it + 1,
                        i,
                        det_mean,
                        dec_mean
                    ));
                }
                code_ext[i] = Some(dec_ext);
                decisions[i] = Some(msg);
            }
        }
        let layers = (0..m)
            .map(|i| LayerDecision {
                combination: decisions[i].take().expect("every layer scheduled"),
                code_extrinsic: code_ext[i].take().expect("every layer scheduled"),
            })
            .collect();
        Ok(SoftOutcome { layers })
    }

    /// Each layer decoded on its own, with no cross-layer information.
    pub fn independent_decode(&self, y: &[Complex64]) -> Result<SoftOutcome, Error> {
        let schedule: Vec<usize> = (0..self.lat.layer_count()).collect();
        self.run_soft(y, &schedule, 1, false, None)
    }

    /// One stage-by-stage pass in `schedule` order, each stage using the
    /// extrinsic beliefs of the already-decoded stages.
    pub fn msd_decode(&self, y: &[Complex64], schedule: &[usize]) -> Result<SoftOutcome, Error> {
        self.run_soft(y, schedule, 1, true, None)
    }

    /// Iterative multistage decoding: the first round is the plain staged
    /// pass; every further round reactivates all layers in turn with the
    /// latest extrinsic beliefs from all other layers.
    pub fn imsd_decode(
        &self,
        y: &[Complex64],
        schedule: &[usize],
        iterations: usize,
    ) -> Result<SoftOutcome, Error> {
        self.run_soft(y, schedule, iterations, true, None)
    }

    /// [`Relay::imsd_decode`] with a line-per-stage trace appended to
    /// `trace` (for belief-evolution debugging).
    pub fn imsd_decode_traced(
        &self,
        y: &[Complex64],
        schedule: &[usize],
        iterations: usize,
        trace: &mut Vec<String>,
    ) -> Result<SoftOutcome, Error> {
        self.run_soft(y, schedule, iterations, true, Some(trace))
    }
}

fn mean_abs(rows: &[LVector]) -> f64 {
    let mut acc = 0.0;
    let mut count = 0usize;
    for lv in rows {
        for &v in lv.values() {
            acc += v.abs();
            count += 1;
        }
    }
    if count == 0 {
        0.0
    } else {
        acc / count as f64
    }
}

// --- reproducible streams ----------------------------------------------------------

/// Independent, reproducible random stream for one frame of one experiment:
/// the master seed and the frame index are mixed into the cipher key, so any
/// frame can be regenerated in isolation and results never depend on how
/// frames are distributed over threads.
pub fn frame_rng(master_seed: u64, frame: u64) -> ChaCha8Rng {
    let mut seed = [0u8; 32];
    seed[..8].copy_from_slice(&master_seed.to_le_bytes());
    seed[8..16].copy_from_slice(&frame.to_le_bytes());
    seed[16..24].copy_from_slice(&0x6d61_6372_6f66_726du64.to_le_bytes());
    ChaCha8Rng::from_seed(seed)
}

// --- tests -----------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eisenstein::{EisensteinInt, ONE};
    use crate::lattice::LatticeSpec;

    fn desk() -> LatticeSpec {
        LatticeSpec::rep12().unwrap()
    }

    fn unit_h(l: usize) -> Vec<Complex64> {
        vec![Complex64::new(1.0, 0.0); l]
    }

    fn all_desk_messages(lat: &LatticeSpec) -> Vec<Vec<Vec<Sym>>> {
        let q1 = lat.layer(0).unwrap().message_alphabets()[0] as Sym;
        let q2 = lat.layer(1).unwrap().message_alphabets()[0] as Sym;
        let mut out = Vec::new();
        for m1 in 0..q1 {
            for m2 in 0..q2 {
                out.push(vec![vec![m1], vec![m2]]);
            }
        }
        out
    }

    #[test]
    fn cell_power_matches_quadrature_and_sampling() {
        // The desk modulus has squared magnitude 12; the cell second moment
        // must come out at 5/3 and scale with the squared magnitude.
        let varpi = EisensteinInt::new(2, 4);
        let p = average_power(varpi).unwrap();
        assert!((p - 5.0 / 3.0).abs() < 1e-12, "p = {p}");
        let scaled = average_power(varpi * EisensteinInt::new(2, 0)).unwrap();
        assert!((scaled - 4.0 * p).abs() < 1e-9);
        assert!(average_power(EisensteinInt::new(0, 0)).is_err());

        let mut rng = frame_rng(11, 0);
        let mut acc = 0.0;
        let draws = 200_000;
        for _ in 0..draws {
            acc += sample_dither_coord(varpi, &mut rng).unwrap().norm_sqr();
        }
        let mc = acc / draws as f64;
        assert!(
            (mc - p).abs() / p < 5e-3,
            "monte carlo {mc} vs quadrature {p}"
        );

        // The bare constellation radiates slightly more than the cell
        // average; the twelve minimum-norm representatives have norms
        // summing to 23.
        let es = constellation_energy(&desk());
        assert!((es - 23.0 / 12.0).abs() < 1e-12, "es = {es}");
    }

    #[test]
    fn transmit_folds_into_the_cell_and_reconstructs() {
        let lat = desk();
        let varpi = lat.varpi();
        let p = average_power(varpi).unwrap();
        let mut rng = frame_rng(3, 1);
        // Zero message, zero dither -> zero signal.
        let zero = transmit(
            &lat,
            &[vec![0], vec![0]],
            Some(vec![Complex64::new(0.0, 0.0); 2]),
            &mut rng,
        )
        .unwrap();
        assert!(zero.signal.iter().all(|x| x.norm_sqr() == 0.0));

        // Dithered frames: the fold is reversible given the dither, the
        // signal stays inside the cell, and the power converges to the cell
        // second moment.
        let cell_radius2 = varpi.norm() as f64 / 3.0;
        let mut acc = 0.0;
        let mut count = 0usize;
        for trial in 0..50_000 {
            let msgs = all_desk_messages(&lat)[trial % 12].clone();
            let st = transmit(&lat, &msgs, None, &mut rng).unwrap();
            let constellation = lat.encode(&msgs).unwrap();
            for t in 0..2 {
                let x = st.signal[t];
                assert!(x.norm_sqr() <= cell_radius2 + 1e-9);
                let refold = fold_coarse(
                    lat.ring().leader(constellation[t]).to_complex() + st.dither[t],
                    varpi,
                )
                .unwrap();
                assert!((refold - x).norm_sqr() < 1e-18);
                acc += x.norm_sqr();
                count += 1;
            }
        }
        let mean = acc / count as f64;
        assert!((mean - p).abs() / p < 0.01, "mean power {mean} vs {p}");
    }

    #[test]
    fn mac_noise_calibration() {
        let lat = desk();
        let mut rng = frame_rng(5, 2);
        let n0 = 0.37;
        let config = ChannelConfig::new(Fading::Unit, n0, 2).unwrap();
        let h = config.realize_fading(&mut rng);
        let msgs = vec![vec![1], vec![2]];
        let st1 = transmit(&lat, &msgs, None, &mut rng).unwrap();
        let st2 = transmit(&lat, &msgs, None, &mut rng).unwrap();
        let states = [st1, st2];
        let mut acc = 0.0;
        let trials = 50_000;
        for _ in 0..trials {
            let y = mac_output(&states, &config, &h, &mut rng).unwrap();
            for t in 0..2 {
                let clean = states[0].signal[t] + states[1].signal[t];
                acc += (y[t] - clean).norm_sqr();
            }
        }
        let var = acc / (2 * trials) as f64;
        assert!((var - n0).abs() / n0 < 0.02, "empirical {var} vs {n0}");

        // Vanishing noise, single source, unit gain: the channel is a wire.
        let quiet = ChannelConfig::new(Fading::Unit, 1e-30, 1).unwrap();
        let hq = quiet.realize_fading(&mut rng);
        let y = mac_output(&states[..1], &quiet, &hq, &mut rng).unwrap();
        for t in 0..2 {
            assert!((y[t] - states[0].signal[t]).norm_sqr() < 1e-20);
        }
    }

    #[test]
    fn mmse_alpha_beats_a_grid_search() {
        let h = vec![Complex64::new(0.9, -0.3), Complex64::new(-0.4, 1.1)];
        let a = vec![EisensteinInt::new(1, 0), EisensteinInt::new(0, 1)];
        let p = 1.7;
        let n0 = 0.6;
        let alpha = choose_alpha(&h, &a, p, n0);
        // Expected residual power as a quadratic in alpha:
        //   J(α) = P·Σ|α·hℓ − ãℓ|² + |α|²·N₀.
        let objective = |al: Complex64| -> f64 {
            let mut j = al.norm_sqr() * n0;
            for (hl, at) in h.iter().zip(&a) {
                j += p * (al * hl - at.to_complex()).norm_sqr();
            }
            j
        };
        let base = objective(alpha);
        let mut best_grid = f64::INFINITY;
        let steps = 60;
        for i in 0..=steps {
            for k in 0..=steps {
                let c = Complex64::new(
                    -1.5 + 3.0 * i as f64 / steps as f64,
                    -1.5 + 3.0 * k as f64 / steps as f64,
                );
                best_grid = best_grid.min(objective(c));
            }
        }
        assert!(base <= best_grid + 1e-9, "{base} vs grid {best_grid}");

        // Matched coefficients at vanishing noise: the scaling tends to one.
        let am = vec![ONE, ONE];
        let hm = unit_h(2);
        let a1 = choose_alpha(&hm, &am, 1.0, 1e-12);
        assert!((a1 - Complex64::new(1.0, 0.0)).norm() < 1e-9);
        // Orthogonal coefficients: zero numerator.
        let perp = choose_alpha(
            &[Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
            &[EisensteinInt::new(0, 0), ONE],
            2.0,
            0.5,
        );
        assert_eq!(perp, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn coefficient_search_prefers_the_symmetric_sum() {
        let lat = desk();
        let p = average_power(lat.varpi()).unwrap();
        let n0 = p / 10.0;
        let h = unit_h(2);
        let plan =
            choose_coefficients(&lat, &h, p, n0, CoefficientCriterion::ExhaustiveRate).unwrap();
        for i in 0..2 {
            assert_eq!(plan.a_tilde[i], vec![ONE, ONE], "layer {i}");
        }

        // A single live source pins the combination to that source.
        let h10 = vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
        let plan10 =
            choose_coefficients(&lat, &h10, p, n0, CoefficientCriterion::ExhaustiveRate).unwrap();
        for i in 0..2 {
            assert_eq!(plan10.a_tilde[i][1], EisensteinInt::new(0, 0));
            assert!(!plan10.a_tilde[i][0].is_zero());
        }

        // A common phase on the channel must not change the chosen vectors
        // up to a unit: the selection sees the same magnitudes.
        let phase = Complex64::from_polar(1.0, 0.73);
        let hr: Vec<Complex64> = h.iter().map(|&c| c * phase).collect();
        let planr =
            choose_coefficients(&lat, &hr, p, n0, CoefficientCriterion::ExhaustiveRate).unwrap();
        for i in 0..2 {
            let v0 = residual_variance(&h, &plan.a_tilde[i], p / n0);
            let v1 = residual_variance(&hr, &planr.a_tilde[i], p / n0);
            assert!((v0 - v1).abs() < 1e-9);
        }

        // The mutual-information criterion agrees on the symmetric channel.
        let plan_mi = choose_coefficients(
            &lat,
            &h,
            p,
            n0,
            CoefficientCriterion::MutualInformation {
                samples: 400,
                seed: 9,
            },
        )
        .unwrap();
        for i in 0..2 {
            let red: Vec<Sym> = plan_mi.reduced[i].clone();
            assert!(red.iter().all(|&s| s != 0), "layer {i} picked {red:?}");
        }
    }

    #[test]
    fn lif_recovers_every_noiseless_sum() {
        let lat = desk();
        let p = average_power(lat.varpi()).unwrap();
        let n0 = 1e-12;
        let h = unit_h(2);
        let plan = CoefficientPlan::unit(&lat, &h, p, n0).unwrap();
        let config = ChannelConfig::new(Fading::Unit, n0, 2).unwrap();
        let msgs = all_desk_messages(&lat);
        let mut rng = frame_rng(21, 0);
        for dithered in [false, true] {
            for w1 in &msgs {
                for w2 in &msgs {
                    let (d1, d2) = if dithered {
                        (None, None)
                    } else {
                        (
                            Some(vec![Complex64::new(0.0, 0.0); 2]),
                            Some(vec![Complex64::new(0.0, 0.0); 2]),
                        )
                    };
                    let s1 = transmit(&lat, w1, d1, &mut rng).unwrap();
                    let s2 = transmit(&lat, w2, d2, &mut rng).unwrap();
                    let dithers = vec![s1.dither.clone(), s2.dither.clone()];
                    let states = [s1, s2];
                    let y = mac_output(&states, &config, &h, &mut rng).unwrap();
                    let relay = Relay::new(&lat, &plan, &h, n0, dithers).unwrap();
                    for i in 0..2 {
                        let truth = linear_combination(
                            &lat,
                            &plan,
                            i,
                            &[w1.as_slice(), w2.as_slice()],
                        )
                        .unwrap();
                        let dec = relay.lif_decode(&y, i).unwrap();
                        assert_eq!(dec.combination, truth, "dithered={dithered} layer={i}");
                        assert!(dec.folded_distance2 < 1e-9);
                        let (exact, _) = relay.lif_decode_exact(&y, i).unwrap();
                        assert_eq!(exact, truth);
                    }
                }
            }
        }
    }

    #[test]
    fn single_source_lif_scales_the_message() {
        let lat = desk();
        let p = average_power(lat.varpi()).unwrap();
        let n0 = 1e-12;
        let h = unit_h(1);
        let a = vec![vec![EisensteinInt::new(1, 1)], vec![EisensteinInt::new(1, 1)]];
        let plan = CoefficientPlan::for_vectors(&lat, &h, a, p, n0).unwrap();
        let config = ChannelConfig::new(Fading::Unit, n0, 1).unwrap();
        let mut rng = frame_rng(22, 0);
        for w in all_desk_messages(&lat) {
            let st = transmit(&lat, &w, None, &mut rng).unwrap();
            let dithers = vec![st.dither.clone()];
            let states = [st];
            let y = mac_output(&states, &config, &h, &mut rng).unwrap();
            let relay = Relay::new(&lat, &plan, &h, n0, dithers).unwrap();
            for i in 0..2 {
                let truth =
                    linear_combination(&lat, &plan, i, &[w.as_slice()]).unwrap();
                assert_eq!(relay.lif_decode(&y, i).unwrap().combination, truth);
            }
        }
    }

    #[test]
    fn soft_schedules_recover_every_noiseless_sum() {
        let lat = desk();
        let p = average_power(lat.varpi()).unwrap();
        let n0 = 1e-12;
        let h = unit_h(2);
        let plan = CoefficientPlan::unit(&lat, &h, p, n0).unwrap();
        let config = ChannelConfig::new(Fading::Unit, n0, 2).unwrap();
        let msgs = all_desk_messages(&lat);
        let mut rng = frame_rng(23, 0);
        for dithered in [false, true] {
            for w1 in &msgs {
                for w2 in &msgs {
                    let d = if dithered {
                        None
                    } else {
                        Some(vec![Complex64::new(0.0, 0.0); 2])
                    };
                    let s1 = transmit(&lat, w1, d.clone(), &mut rng).unwrap();
                    let s2 = transmit(&lat, w2, d, &mut rng).unwrap();
                    let dithers = vec![s1.dither.clone(), s2.dither.clone()];
                    let states = [s1, s2];
                    let y = mac_output(&states, &config, &h, &mut rng).unwrap();
                    let relay = Relay::new(&lat, &plan, &h, n0, dithers).unwrap();
                    let truth: Vec<Vec<Sym>> = (0..2)
                        .map(|i| {
                            linear_combination(&lat, &plan, i, &[w1.as_slice(), w2.as_slice()])
                                .unwrap()
                        })
                        .collect();
                    let staged = relay.msd_decode(&y, &[0, 1]).unwrap();
                    let reversed = relay.msd_decode(&y, &[1, 0]).unwrap();
                    let plain = relay.independent_decode(&y).unwrap();
                    let iterated = relay.imsd_decode(&y, &[0, 1], 3).unwrap();
                    for i in 0..2 {
                        assert_eq!(staged.layers[i].combination, truth[i]);
                        assert_eq!(reversed.layers[i].combination, truth[i]);
                        assert_eq!(plain.layers[i].combination, truth[i]);
                        assert_eq!(iterated.layers[i].combination, truth[i]);
                    }
                }
            }
        }
    }

    #[test]
    fn one_iteration_equals_the_staged_pass() {
        let lat = desk();
        let p = average_power(lat.varpi()).unwrap();
        let n0 = 0.9;
        let h = unit_h(2);
        let plan = CoefficientPlan::unit(&lat, &h, p, n0).unwrap();
        let config = ChannelConfig::new(Fading::Unit, n0, 2).unwrap();
        let mut rng = frame_rng(31, 4);
        for _ in 0..40 {
            let w1 = vec![vec![rng.gen_range(0..3) as Sym], vec![rng.gen_range(0..4) as Sym]];
            let w2 = vec![vec![rng.gen_range(0..3) as Sym], vec![rng.gen_range(0..4) as Sym]];
            let s1 = transmit(&lat, &w1, None, &mut rng).unwrap();
            let s2 = transmit(&lat, &w2, None, &mut rng).unwrap();
            let dithers = vec![s1.dither.clone(), s2.dither.clone()];
            let states = [s1, s2];
            let y = mac_output(&states, &config, &h, &mut rng).unwrap();
            let relay = Relay::new(&lat, &plan, &h, n0, dithers).unwrap();
            let a = relay.msd_decode(&y, &[0, 1]).unwrap();
            let b = relay.imsd_decode(&y, &[0, 1], 1).unwrap();
            for i in 0..2 {
                assert_eq!(a.layers[i].combination, b.layers[i].combination);
                assert_eq!(a.layers[i].code_extrinsic, b.layers[i].code_extrinsic);
            }
        }
    }

    #[test]
    fn detector_beliefs_normalize_and_split_into_prior_plus_extrinsic() {
        let lat = desk();
        let p = average_power(lat.varpi()).unwrap();
        let n0 = 0.8;
        let h = unit_h(2);
        let plan = CoefficientPlan::unit(&lat, &h, p, n0).unwrap();
        let config = ChannelConfig::new(Fading::Unit, n0, 2).unwrap();
        let mut rng = frame_rng(37, 9);
        let w1 = vec![vec![2], vec![1]];
        let w2 = vec![vec![1], vec![3]];
        let s1 = transmit(&lat, &w1, None, &mut rng).unwrap();
        let s2 = transmit(&lat, &w2, None, &mut rng).unwrap();
        let dithers = vec![s1.dither.clone(), s2.dither.clone()];
        let states = [s1, s2];
        let y = mac_output(&states, &config, &h, &mut rng).unwrap();
        let relay = Relay::new(&lat, &plan, &h, n0, dithers).unwrap();

        // Random but finite priors on both layers.
        let own: Vec<LVector> = (0..2)
            .map(|_| LVector::new(vec![rng.gen_range(-2.0..2.0); 2]).unwrap())
            .collect();
        let other: Vec<LVector> = (0..2)
            .map(|_| LVector::new(vec![rng.gen_range(-2.0..2.0); 3]).unwrap())
            .collect();
        let priors: Vec<Option<&[LVector]>> = vec![Some(&own), Some(&other)];
        let (d, e) = relay.lsd_posterior(&y, 0, &priors).unwrap();
        for t in 0..2 {
            let sum: f64 = d[t].probabilities().iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
            let sum_e: f64 = e[t].probabilities().iter().sum();
            assert!((sum_e - 1.0).abs() < 1e-9);
            // A-posteriori is exactly own prior plus extrinsic.
            for k in 0..2 {
                let expect = own[t].values()[k] + e[t].values()[k];
                assert!((d[t].values()[k] - expect).abs() < 1e-12);
            }
        }

        // An uninformative channel returns an uninformative extrinsic.
        let flat = ChannelConfig::new(Fading::Unit, 1e9, 2).unwrap();
        let relay_flat = Relay::undithered(&lat, &plan, &h, flat.noise_variance).unwrap();
        let (_, e_flat) = relay_flat
            .lsd_posterior(&y, 0, &[None, None])
            .unwrap();
        for t in 0..2 {
            for &v in e_flat[t].values() {
                assert!(v.abs() < 1e-6, "uninformative channel leaked belief {v}");
            }
        }
    }

    #[test]
    fn noiseless_single_source_extrinsic_is_confident() {
        let lat = desk();
        let p = average_power(lat.varpi()).unwrap();
        let n0 = 1e-12;
        let h = unit_h(1);
        let a = vec![vec![ONE], vec![ONE]];
        let plan = CoefficientPlan::for_vectors(&lat, &h, a, p, n0).unwrap();
        let config = ChannelConfig::new(Fading::Unit, n0, 1).unwrap();
        let mut rng = frame_rng(41, 1);
        let w = vec![vec![2], vec![3]];
        let st = transmit(&lat, &w, None, &mut rng).unwrap();
        let dithers = vec![st.dither.clone()];
        let states = [st];
        let y = mac_output(&states, &config, &h, &mut rng).unwrap();
        let relay = Relay::new(&lat, &plan, &h, n0, dithers).unwrap();
        let (_, e) = relay.lsd_posterior(&y, 1, &[None, None]).unwrap();
        for t in 0..2 {
            let truth = w[1][t % 1]; // single message symbol per layer
            assert_eq!(e[t].hard(), truth);
            let logs = e[t].log_probs();
            let best = logs[truth as usize];
            for (k, &v) in logs.iter().enumerate() {
                if k != truth as usize {
                    assert!(best - v > 20.0, "gap too small: {} vs {}", best, v);
                }
            }
        }
    }

    #[test]
    fn decoding_a_sum_of_frames_gives_the_sum_of_combinations() {
        let lat = desk();
        let p = average_power(lat.varpi()).unwrap();
        let n0 = 1e-12;
        let h = unit_h(2);
        let plan = CoefficientPlan::unit(&lat, &h, p, n0).unwrap();
        let mut rng = frame_rng(43, 0);
        let msgs = all_desk_messages(&lat);
        let relay = Relay::undithered(&lat, &plan, &h, n0).unwrap();
        let zeros = Some(vec![Complex64::new(0.0, 0.0); 2]);
        for trial in 0..60 {
            let w1 = &msgs[trial % 12];
            let w2 = &msgs[(trial * 5 + 3) % 12];
            let v1 = &msgs[(trial * 7 + 1) % 12];
            let v2 = &msgs[(trial * 11 + 2) % 12];
            let frame = |a: &Vec<Vec<Sym>>, b: &Vec<Vec<Sym>>, rng: &mut ChaCha8Rng| {
                let s1 = transmit(&lat, a, zeros.clone(), rng).unwrap();
                let s2 = transmit(&lat, b, zeros.clone(), rng).unwrap();
                let y: Vec<Complex64> = (0..2)
                    .map(|t| s1.signal[t] + s2.signal[t])
                    .collect();
                y
            };
            let ya = frame(w1, w2, &mut rng);
            let yb = frame(v1, v2, &mut rng);
            let ysum: Vec<Complex64> = ya.iter().zip(&yb).map(|(a, b)| a + b).collect();
            for i in 0..2 {
                let ring = lat.layer(i).unwrap().ring();
                let ua = relay.lif_decode(&ya, i).unwrap().combination;
                let ub = relay.lif_decode(&yb, i).unwrap().combination;
                let us = relay.lif_decode(&ysum, i).unwrap().combination;
                let expect: Vec<Sym> = ua
                    .iter()
                    .zip(&ub)
                    .map(|(&x, &y)| ring.add(x, y))
                    .collect();
                assert_eq!(us, expect, "layer {i}");
            }
        }
    }

    #[test]
    fn quantized_residual_membership_predicts_lif_correctness() {
        let lat = desk();
        let p = average_power(lat.varpi()).unwrap();
        let n0 = 1.1; // noisy enough that both outcomes occur
        let h = unit_h(2);
        let plan = CoefficientPlan::unit(&lat, &h, p, n0).unwrap();
        let config = ChannelConfig::new(Fading::Unit, n0, 2).unwrap();
        let mut rng = frame_rng(47, 0);
        let msgs = all_desk_messages(&lat);
        let mut errors = 0usize;
        let mut hits = 0usize;
        for trial in 0..400 {
            let w1 = &msgs[trial % 12];
            let w2 = &msgs[(trial * 5 + 2) % 12];
            let s1 = transmit(&lat, w1, None, &mut rng).unwrap();
            let s2 = transmit(&lat, w2, None, &mut rng).unwrap();
            let dithers = vec![s1.dither.clone(), s2.dither.clone()];
            let states = [s1, s2];
            let y = mac_output(&states, &config, &h, &mut rng).unwrap();
            let relay = Relay::new(&lat, &plan, &h, n0, dithers).unwrap();
            for i in 0..2 {
                let truth =
                    linear_combination(&lat, &plan, i, &[w1.as_slice(), w2.as_slice()])
                        .unwrap();
                let (decoded, _) = relay.lif_decode_exact(&y, i).unwrap();
                // Residual after removing the integer combination of the
                // actual channel words.
                let alpha = plan.alpha[i];
                let neff: Vec<Complex64> = (0..2)
                    .map(|t| {
                        let mut v = alpha * y[t];
                        for (src, st) in states.iter().enumerate() {
                            v -= plan.a_tilde[i][src].to_complex() * st.signal[t];
                        }
                        v
                    })
                    .collect();
                let np = oracle::nearest_point(&lat, Sublattice::Fine, &neff).unwrap();
                let layer_msgs = lat.split_message(&np.flat_message);
                let residual_invisible = layer_msgs[i].iter().all(|&s| s == 0);
                let correct = decoded == truth;
                assert_eq!(
                    correct, residual_invisible,
                    "trial {trial} layer {i}: correctness must track the residual"
                );
                if correct {
                    hits += 1;
                } else {
                    errors += 1;
                }
            }
        }
        assert!(errors > 10, "test needs both outcomes, got {errors} errors");
        assert!(hits > 10, "test needs both outcomes, got {hits} hits");
    }

    #[test]
    fn dither_does_not_change_the_noiseless_decision() {
        let lat = desk();
        let p = average_power(lat.varpi()).unwrap();
        let n0 = 1e-12;
        let h = unit_h(2);
        let plan = CoefficientPlan::unit(&lat, &h, p, n0).unwrap();
        let mut rng = frame_rng(53, 0);
        let msgs = all_desk_messages(&lat);
        for trial in 0..30 {
            let w1 = &msgs[trial % 12];
            let w2 = &msgs[(trial * 7 + 5) % 12];
            // Undithered reference.
            let zeros = Some(vec![Complex64::new(0.0, 0.0); 2]);
            let r1 = transmit(&lat, w1, zeros.clone(), &mut rng).unwrap();
            let r2 = transmit(&lat, w2, zeros, &mut rng).unwrap();
            let y_ref: Vec<Complex64> =
                (0..2).map(|t| r1.signal[t] + r2.signal[t]).collect();
            let relay_ref = Relay::undithered(&lat, &plan, &h, n0).unwrap();
            // Dithered version of the same messages.
            let s1 = transmit(&lat, w1, None, &mut rng).unwrap();
            let s2 = transmit(&lat, w2, None, &mut rng).unwrap();
            let dithers = vec![s1.dither.clone(), s2.dither.clone()];
            let y_dit: Vec<Complex64> =
                (0..2).map(|t| s1.signal[t] + s2.signal[t]).collect();
            let relay_dit = Relay::new(&lat, &plan, &h, n0, dithers).unwrap();
            for i in 0..2 {
                assert_eq!(
                    relay_ref.lif_decode(&y_ref, i).unwrap().combination,
                    relay_dit.lif_decode(&y_dit, i).unwrap().combination,
                );
            }
        }
    }

    #[test]
    fn frame_streams_are_reproducible_and_distinct() {
        let mut a = frame_rng(99, 7);
        let mut b = frame_rng(99, 7);
        let mut c = frame_rng(99, 8);
        let mut d = frame_rng(100, 7);
        let va: Vec<u64> = (0..8).map(|_| a.gen()).collect();
        let vb: Vec<u64> = (0..8).map(|_| b.gen()).collect();
        let vc: Vec<u64> = (0..8).map(|_| c.gen()).collect();
        let vd: Vec<u64> = (0..8).map(|_| d.gen()).collect();
        assert_eq!(va, vb);
        assert_ne!(va, vc);
        assert_ne!(va, vd);
    }

    #[test]
    fn coded_frames_decode_noiselessly_end_to_end() {
        // Convolutional layers drive the Viterbi branch of the folded
        // decoder and the forward/backward branch of the soft schedules.
        for lat in [
            LatticeSpec::coded12(5).unwrap(),
            LatticeSpec::coded12_mixed(5).unwrap(),
        ] {
            let p = average_power(lat.varpi()).unwrap();
            let n0 = 1e-12;
            let h = unit_h(2);
            let plan = CoefficientPlan::unit(&lat, &h, p, n0).unwrap();
            let config = ChannelConfig::new(Fading::Unit, n0, 2).unwrap();
            let mut rng = frame_rng(31, 0);
            let draw = |rng: &mut ChaCha8Rng, lat: &LatticeSpec| -> Vec<Vec<Sym>> {
                (0..lat.layer_count())
                    .map(|i| {
                        lat.layer(i)
                            .unwrap()
                            .message_alphabets()
                            .iter()
                            .map(|&q| rng.gen_range(0..q) as Sym)
                            .collect()
                    })
                    .collect()
            };
            for trial in 0..4 {
                let w1 = draw(&mut rng, &lat);
                let w2 = draw(&mut rng, &lat);
                let s1 = transmit(&lat, &w1, None, &mut rng).unwrap();
                let s2 = transmit(&lat, &w2, None, &mut rng).unwrap();
                let dithers = vec![s1.dither.clone(), s2.dither.clone()];
                let states = [s1, s2];
                let y = mac_output(&states, &config, &h, &mut rng).unwrap();
                let relay = Relay::new(&lat, &plan, &h, n0, dithers).unwrap();
                let truth: Vec<Vec<Sym>> = (0..2)
                    .map(|i| {
                        linear_combination(&lat, &plan, i, &[w1.as_slice(), w2.as_slice()])
                            .unwrap()
                    })
                    .collect();
                for (i, t) in truth.iter().enumerate() {
                    let lif = relay.lif_decode(&y, i).unwrap();
                    assert_eq!(&lif.combination, t, "folded decode, trial {trial}");
                }
                let staged = relay.msd_decode(&y, &[0, 1]).unwrap();
                let iterated = relay.imsd_decode(&y, &[0, 1], 2).unwrap();
                for (i, t) in truth.iter().enumerate() {
                    assert_eq!(&staged.layers[i].combination, t);
                    assert_eq!(&iterated.layers[i].combination, t);
                }
            }
        }
    }
}
