//! Information-theoretic evaluation of the layered relay: achievable
//! computation rates, a union bound on combination-decoding errors, Monte
//! Carlo mutual information of the layer combinations, and extrinsic
//! information transfer curves of the soft detector.
//!
//! # Overview
//!
//! Three questions about a lattice/channel pair are answered numerically:
//!
//! * *How much can be pushed through?* [`computation_rate`] evaluates the
//!   per-layer achievable-rate terms for a given fading vector and integer
//!   combination, and [`mutual_information`] estimates the exact per-symbol
//!   information carried by each layer combination, optionally conditioned
//!   on other layers being known.
//! * *How often does decoding fail?* [`union_bound`] combines the
//!   exhaustively computed distance and neighbour counts of each layer
//!   quotient with the effective-noise variance of the chosen scalings.
//! * *Does iterating help?* [`exit_curve`] sweeps the quality of the
//!   a-priori beliefs fed to the soft detector and measures the extrinsic
//!   information it returns, tracing the detector's transfer characteristic.
//!
//! Monte Carlo estimates carry batch-mean standard errors; every routine is
//! deterministic given its seed.
//!
//! # Example
//!
//! ```
//! use lnc_core::analysis;
//! use lnc_core::eisenstein::ONE;
//! use num_complex::Complex64;
//!
//! let h = vec![Complex64::new(1.0, 0.0); 2];
//! let a = vec![vec![ONE, ONE], vec![ONE, ONE]];
//! let report = analysis::computation_rate(&h, &a, &[10.0, 10.0], 1.0)?;
//! assert!(report.total > 0.0);
//! assert_eq!(report.layer_terms.len(), 2);
//! # Ok::<(), lnc_core::Error>(())
//! ```

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::eisenstein::EisensteinInt;
use crate::lattice::LatticeSpec;
use crate::mlnc::{self, ChannelConfig, CoefficientPlan, Fading, LVector};
use crate::oracle::{self, Quotient};
use crate::residue::Sym;
use crate::Error;

/// Batches used for Monte Carlo standard errors.
const BATCHES: usize = 30;

/// Default number of a-priori grid points for an EXIT sweep.
pub const DEFAULT_EXIT_POINTS: usize = 21;

/// Default frames per EXIT grid point.
pub const DEFAULT_EXIT_FRAMES: usize = 20_000;

// --- computation rates ---------------------------------------------------------------

/// Per-layer achievable-rate terms for one channel realization and one
/// choice of integer combinations.
#[derive(Clone, Debug)]
pub struct RateReport {
    /// Per-layer rate terms in bits per symbol, clamped at zero.
    pub layer_terms: Vec<f64>,
    /// The effective-noise variances whose log-inverses the terms are.
    pub mmse_variances: Vec<f64>,
    /// Sum of the clamped terms.
    pub total: f64,
    /// Echoed inputs.
    pub h: Vec<Complex64>,
    pub a: Vec<Vec<EisensteinInt>>,
    pub p: Vec<f64>,
    pub n0: f64,
    /// Anything unusual found while evaluating (vanishing denominators,
    /// clamped terms).
    pub warnings: Vec<String>,
    /// The rate expression is derived for square-lattice (Gaussian-integer)
    /// shaping; it is evaluated here verbatim with hexagonal-lattice
    /// coefficients. Recorded so downstream reports carry the caveat.
    pub shaping_note: &'static str,
}

/// Evaluates the per-layer achievable-rate terms
/// `log2( (‖aⁱ‖² − Pⁱ|hᴴaⁱ|² / (1 + Pⁱ‖h‖²))⁻¹ )` with `Pⁱ = pⁱ/n0` the
/// per-layer SNR, clamping negative terms to zero.
pub fn computation_rate(
    h: &[Complex64],
    a: &[Vec<EisensteinInt>],
    p: &[f64],
    n0: f64,
) -> Result<RateReport, Error> {
    if h.is_empty() || a.is_empty() {
        return Err(Error::Dimension("empty channel or coefficient set".into()));
    }
    if a.len() != p.len() {
        return Err(Error::Dimension(format!(
            "{} coefficient vectors for {} power entries",
            a.len(),
            p.len()
        )));
    }
    if !(n0 > 0.0 && n0.is_finite()) || p.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(Error::Config("powers and noise variance must be positive".into()));
    }
    let h2: f64 = h.iter().map(|c| c.norm_sqr()).sum();
    let mut layer_terms = Vec::with_capacity(a.len());
    let mut mmse_variances = Vec::with_capacity(a.len());
    let mut warnings = Vec::new();
    for (i, ai) in a.iter().enumerate() {
        if ai.len() != h.len() {
            return Err(Error::Dimension(format!(
                "layer {i} has {} coefficients for {} sources",
                ai.len(),
                h.len()
            )));
        }
        if ai.iter().all(|x| x.is_zero()) {
            return Err(Error::Config(format!("layer {i} coefficients are all zero")));
        }
        let snr = p[i] / n0;
        let a2: f64 = ai.iter().map(|x| x.norm() as f64).sum();
        let dot: Complex64 = h
            .iter()
            .zip(ai)
            .map(|(hl, al)| hl.conj() * al.to_complex())
            .sum();
        let var = a2 - snr * dot.norm_sqr() / (1.0 + snr * h2);
        mmse_variances.push(var);
        let term = if var <= 0.0 {
            warnings.push(format!(
                "layer {i}: effective-noise variance {var:e} is not positive; term reported as infinity"
            ));
            f64::INFINITY
        } else {
            let t = -var.log2();
            if t < 0.0 {
                warnings.push(format!(
                    "layer {i}: rate term {t:.4} clamped to zero"
                ));
                0.0
            } else {
                t
            }
        };
        layer_terms.push(term);
    }
    let total = layer_terms.iter().sum();
    Ok(RateReport {
        layer_terms,
        mmse_variances,
        total,
        h: h.to_vec(),
        a: a.to_vec(),
        p: p.to_vec(),
        n0,
        warnings,
        shaping_note:
            "rate expression derived for square-lattice shaping; evaluated verbatim over the hexagonal ring",
    })
}

// --- union bound ---------------------------------------------------------------------

/// One layer's contribution to the union bound.
#[derive(Clone, Debug)]
pub struct LayerBound {
    pub layer: usize,
    /// Minimum squared distance of the layer quotient.
    pub distance2: f64,
    /// Number of minimum-distance neighbours.
    pub kissing: u64,
    /// Effective noise variance `N₀|α|² + Pⁱ‖αh − aⁱ‖²`.
    pub effective_noise: f64,
    /// `kissing · exp(−distance2 / (4 · effective_noise))`.
    pub bound: f64,
    /// Message-dimension share of this layer.
    pub weight: f64,
}

/// Union bound on combination-decoding error, per layer and averaged by
/// message-dimension share.
#[derive(Clone, Debug)]
pub struct UnionBoundReport {
    pub per_layer: Vec<LayerBound>,
    /// `Σᵢ weightᵢ · boundᵢ`.
    pub expectation: f64,
}

/// The pairwise-error kernel of the bound.
pub fn union_bound_term(distance2: f64, kissing: u64, effective_noise: f64) -> f64 {
    kissing as f64 * (-distance2 / (4.0 * effective_noise)).exp()
}

/// Evaluates the union bound for every layer of `lat` under the coefficient
/// plan: the quotient distance and neighbour count come from the exhaustive
/// lattice search, the noise scale from the plan's scalings.
pub fn union_bound(
    lat: &LatticeSpec,
    plan: &CoefficientPlan,
    h: &[Complex64],
    p: &[f64],
    n0: f64,
) -> Result<UnionBoundReport, Error> {
    let m = lat.layer_count();
    if plan.a_tilde.len() != m || p.len() != m {
        return Err(Error::Dimension(format!(
            "plan covers {} layers and powers {}, lattice has {m}",
            plan.a_tilde.len(),
            p.len()
        )));
    }
    let dims: Vec<f64> = (0..m)
        .map(|i| Ok(lat.layer(i)?.message_alphabets().len() as f64))
        .collect::<Result<_, Error>>()?;
    let dim_total: f64 = dims.iter().sum();
    let mut per_layer = Vec::with_capacity(m);
    let mut expectation = 0.0;
    for i in 0..m {
        let merit = oracle::quotient_merit(lat, Quotient::FineOverErasure(i))?;
        let alpha = plan.alpha[i];
        let mut mismatch = 0.0;
        for (hl, al) in h.iter().zip(&plan.a_tilde[i]) {
            mismatch += (alpha * hl - al.to_complex()).norm_sqr();
        }
        let effective_noise = n0 * alpha.norm_sqr() + p[i] * mismatch;
        let distance2 = merit.d2 as f64;
        let bound = union_bound_term(distance2, merit.kissing, effective_noise);
        let weight = dims[i] / dim_total;
        expectation += weight * bound;
        per_layer.push(LayerBound {
            layer: i,
            distance2,
            kissing: merit.kissing,
            effective_noise,
            bound,
            weight,
        });
    }
    Ok(UnionBoundReport {
        per_layer,
        expectation,
    })
}

// --- mutual information ----------------------------------------------------------------

/// A Monte Carlo mutual-information estimate with its batch-mean error bar.
#[derive(Clone, Debug)]
pub struct MiEstimate {
    /// Estimated information in bits per symbol.
    pub value: f64,
    /// Standard error of the batch means.
    pub std_error: f64,
    pub samples: usize,
    /// Layers whose combinations were the estimation target.
    pub targets: Vec<usize>,
    /// Layers whose combinations were given to the receiver.
    pub conditioning: Vec<usize>,
}

/// Estimates `I(Y, H; Vⁱ | V^cond)` for a single layer; see [`mi_core`]'s
/// description of the sampling model.
pub fn mutual_information(
    lat: &LatticeSpec,
    layer: usize,
    conditioning: &[usize],
    channel: &ChannelConfig,
    samples: usize,
    seed: u64,
) -> Result<MiEstimate, Error> {
    mi_core(lat, &[layer], conditioning, None, channel, samples, seed)
}

/// Estimates the joint information `I(Y, H; V^{i₁} V^{i₂} … | V^cond)`
/// carried by several layer combinations at once.
pub fn joint_mutual_information(
    lat: &LatticeSpec,
    layers: &[usize],
    conditioning: &[usize],
    channel: &ChannelConfig,
    samples: usize,
    seed: u64,
) -> Result<MiEstimate, Error> {
    mi_core(lat, layers, conditioning, None, channel, samples, seed)
}

/// Shared Monte Carlo core. Message tuples are uniform, sources transmit
/// their minimum-norm constellation points, fading follows the channel
/// config (redrawn per sample and known to the receiver), and the
/// conditional densities are exact finite sums over the tuples consistent
/// with the conditioned combination values. `reduced` overrides the
/// combination coefficients per layer (`None` = plain sums).
pub fn mi_core(
    lat: &LatticeSpec,
    targets: &[usize],
    conditioning: &[usize],
    reduced: Option<&[Vec<Sym>]>,
    channel: &ChannelConfig,
    samples: usize,
    seed: u64,
) -> Result<MiEstimate, Error> {
    let m = lat.layer_count();
    if targets.is_empty() {
        return Err(Error::Config("no target layers".into()));
    }
    for &i in targets.iter().chain(conditioning) {
        if i >= m {
            return Err(Error::LayerIndex(i, m));
        }
    }
    if targets.iter().any(|i| conditioning.contains(i)) {
        return Err(Error::Config("a layer cannot be both target and conditioning".into()));
    }
    if samples < BATCHES {
        return Err(Error::Config(format!("need at least {BATCHES} samples")));
    }
    let l = channel.num_sources;
    let q = lat.ring().q();
    let tuples = q.pow(l as u32);
    let n0 = channel.noise_variance;

    // Per-layer combination coefficients, reduced into each layer's ring.
    let coeffs: Vec<Vec<Sym>> = match reduced {
        Some(r) => {
            if r.len() != m {
                return Err(Error::Dimension(format!(
                    "{} coefficient tuples for {m} layers",
                    r.len()
                )));
            }
            r.to_vec()
        }
        None => (0..m)
            .map(|i| {
                Ok(vec![
                    lat.layer(i)?.ring().sym(crate::eisenstein::ONE);
                    l
                ])
            })
            .collect::<Result<_, Error>>()?,
    };

    // Class index per tuple for the target set and the conditioning set.
    let class_of = |layers: &[usize]| -> Result<(Vec<u32>, usize), Error> {
        let mut idx = vec![0u32; tuples];
        let mut stride = 1usize;
        for &j in layers {
            let qj = lat.layer(j)?.ring().q();
            let row = mlnc::combination_map(lat, j, &coeffs[j], tuples)?;
            for (tau, v) in row.iter().enumerate() {
                idx[tau] += (*v as usize * stride) as u32;
            }
            stride *= qj;
        }
        Ok((idx, stride))
    };
    let (tclass, _) = class_of(targets)?;
    let (cclass, ccount) = class_of(conditioning)?;

    // Joint class (target × conditioning) sizes, for the uniform-mixture
    // normalizations of the conditional densities.
    let mut joint_of = vec![0u32; tuples];
    let mut tstride = 0u32;
    for &t in &tclass {
        tstride = tstride.max(t + 1);
    }
    for tau in 0..tuples {
        joint_of[tau] = cclass[tau] * tstride + tclass[tau];
    }
    let mut joint_count = vec![0u32; ccount as usize * tstride as usize];
    let mut cond_count = vec![0u32; ccount];
    for tau in 0..tuples {
        joint_count[joint_of[tau] as usize] += 1;
        cond_count[cclass[tau] as usize] += 1;
    }

    let mut rng = mlnc::frame_rng(seed, 0);
    let sigma = (n0 / 2.0).sqrt();
    let fixed_h = !matches!(channel.fading, Fading::Rayleigh);
    let mut mu = if fixed_h {
        let h = channel.realize_fading(&mut rng);
        mlnc::tuple_signals(lat, &h)?
    } else {
        Vec::new()
    };

    let mut batch_sums = vec![0.0f64; BATCHES];
    let mut batch_sizes = vec![0usize; BATCHES];
    let mut ll = vec![0.0f64; tuples];
    for s in 0..samples {
        if !fixed_h {
            let h = channel.realize_fading(&mut rng);
            mu = mlnc::tuple_signals(lat, &h)?;
        }
        let tau = rng.gen_range(0..tuples);
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        let y = mu[tau] + Complex64::new(re * sigma, im * sigma);
        for (tau2, slot) in ll.iter_mut().enumerate() {
            *slot = -(y - mu[tau2]).norm_sqr() / n0;
        }
        let joint = joint_of[tau];
        let cond = cclass[tau];
        // logsumexp over the two consistency classes, sharing one max pass.
        let mut mx_joint = f64::NEG_INFINITY;
        let mut mx_cond = f64::NEG_INFINITY;
        for tau2 in 0..tuples {
            if cclass[tau2] == cond {
                if ll[tau2] > mx_cond {
                    mx_cond = ll[tau2];
                }
                if joint_of[tau2] == joint && ll[tau2] > mx_joint {
                    mx_joint = ll[tau2];
                }
            }
        }
        let mut sum_joint = 0.0;
        let mut sum_cond = 0.0;
        for tau2 in 0..tuples {
            if cclass[tau2] == cond {
                sum_cond += (ll[tau2] - mx_cond).exp();
                if joint_of[tau2] == joint {
                    sum_joint += (ll[tau2] - mx_joint).exp();
                }
            }
        }
        let log_num = mx_joint + sum_joint.ln() - (joint_count[joint as usize] as f64).ln();
        let log_den = mx_cond + sum_cond.ln() - (cond_count[cond as usize] as f64).ln();
        let bits = (log_num - log_den) / std::f64::consts::LN_2;
        let b = s * BATCHES / samples;
        batch_sums[b] += bits;
        batch_sizes[b] += 1;
    }
    let means: Vec<f64> = batch_sums
        .iter()
        .zip(&batch_sizes)
        .map(|(s, &n)| s / n.max(1) as f64)
        .collect();
    let value: f64 = means.iter().sum::<f64>() / BATCHES as f64;
    let var = means
        .iter()
        .map(|&x| (x - value) * (x - value))
        .sum::<f64>()
        / (BATCHES - 1) as f64;
    let std_error = (var / BATCHES as f64).sqrt();
    // The true quantity lives in [0, log2 #classes]; clip Monte Carlo dust.
    let cap: f64 = (tstride as f64).log2();
    Ok(MiEstimate {
        value: value.clamp(0.0, cap),
        std_error,
        samples,
        targets: targets.to_vec(),
        conditioning: conditioning.to_vec(),
    })
}

// --- a-priori channel ------------------------------------------------------------------

/// Scores for one observation of the synthetic a-priori channel: the true
/// symbol gets a mean shift `t`, every symbol an independent `N(0, t)`
/// perturbation. The softmax of the scores is then exactly the posterior,
/// so the channel is consistent by construction.
fn apriori_scores<R: Rng + ?Sized>(q: usize, truth: Sym, t: f64, rng: &mut R) -> Vec<f64> {
    let sd = t.sqrt();
    (0..q)
        .map(|v| {
            let noise: f64 = rng.sample(StandardNormal);
            noise * sd + if v == truth as usize { t } else { 0.0 }
        })
        .collect()
}

/// Mutual information in bits of the a-priori channel at strength `t`,
/// evaluated on pre-drawn noise (common random numbers keep the bisection
/// monotone).
fn apriori_mi_on(noise: &[Vec<f64>], truths: &[Sym], q: usize, t: f64) -> f64 {
    let sd = t.sqrt();
    let mut acc = 0.0;
    let mut scores = vec![0.0f64; q];
    for (n, &truth) in noise.iter().zip(truths) {
        for (v, s) in scores.iter_mut().enumerate() {
            *s = n[v] * sd + if v == truth as usize { t } else { 0.0 };
        }
        let mx = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = scores.iter().map(|&s| (s - mx).exp()).sum();
        let mut ent = 0.0;
        for &s in &scores {
            let p = (s - mx).exp() / z;
            if p > 0.0 {
                ent += p * p.log2();
            }
        }
        acc += (q as f64).log2() + ent;
    }
    acc / noise.len() as f64
}

/// Finds the a-priori channel strength whose mutual information hits
/// `target` bits over a `q`-ary alphabet, by bisection on common random
/// numbers. Returns `(strength, achieved)`.
pub fn solve_apriori_strength(
    q: usize,
    target: f64,
    samples: usize,
    seed: u64,
) -> Result<(f64, f64), Error> {
    let max_bits = (q as f64).log2();
    if !(0.0..=max_bits + 1e-9).contains(&target) {
        return Err(Error::Config(format!(
            "a-priori target {target} outside [0, {max_bits}]"
        )));
    }
    let mut rng = mlnc::frame_rng(seed, u64::MAX);
    let noise: Vec<Vec<f64>> = (0..samples)
        .map(|_| (0..q).map(|_| rng.sample(StandardNormal)).collect())
        .collect();
    let truths: Vec<Sym> = (0..samples).map(|_| rng.gen_range(0..q) as Sym).collect();
    if target <= 0.0 {
        return Ok((0.0, 0.0));
    }
    let mut hi = 1.0f64;
    while apriori_mi_on(&noise, &truths, q, hi) < target {
        hi *= 2.0;
        if hi > 1e8 {
            // Saturated: the channel is effectively a genie already.
            return Ok((hi, apriori_mi_on(&noise, &truths, q, hi)));
        }
    }
    let mut lo = 0.0f64;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if apriori_mi_on(&noise, &truths, q, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    Ok((t, apriori_mi_on(&noise, &truths, q, t)))
}

// --- EXIT curves -------------------------------------------------------------------------

/// One point of a detector transfer curve.
#[derive(Clone, Debug)]
pub struct ExitPoint {
    /// A-priori information fed about the other layer, bits per symbol.
    pub i_a: f64,
    /// Extrinsic information returned for this layer, bits per symbol.
    pub i_e: f64,
    /// Batch-mean standard error of `i_e`.
    pub std_error: f64,
    pub snr_db: f64,
    pub layer: usize,
    /// Alphabet size of the measured layer (for normalized plots).
    pub alphabet: usize,
}

/// Evenly spaced a-priori targets from zero to the alphabet entropy.
pub fn exit_grid(points: usize, q: usize) -> Vec<f64> {
    let max = (q as f64).log2();
    (0..points)
        .map(|k| max * k as f64 / (points.saturating_sub(1)).max(1) as f64)
        .collect()
}

/// Transfer characteristic of the soft detector for `layer` of a two-layer
/// lattice on the symmetric two-source channel: for each a-priori target,
/// beliefs about the other layer's combination are synthesized at that
/// information level, the detector runs over fresh frames, and the average
/// extrinsic information of its output is measured.
pub fn exit_curve(
    lat: &LatticeSpec,
    layer: usize,
    snr_db: f64,
    targets: &[f64],
    frames: usize,
    seed: u64,
) -> Result<Vec<ExitPoint>, Error> {
    if lat.layer_count() != 2 {
        return Err(Error::Config("transfer curves are defined for two-layer lattices".into()));
    }
    if layer >= 2 {
        return Err(Error::LayerIndex(layer, 2));
    }
    if frames < BATCHES {
        return Err(Error::Config(format!("need at least {BATCHES} frames")));
    }
    let other = 1 - layer;
    let p = mlnc::average_power(lat.varpi())?;
    let n0 = p / 10f64.powf(snr_db / 10.0);
    let h = vec![Complex64::new(1.0, 0.0); 2];
    let plan = CoefficientPlan::unit(lat, &h, p, n0)?;
    let relay = mlnc::Relay::undithered(lat, &plan, &h, n0)?;
    let n = lat.n();
    let qi = lat.layer(layer)?.ring().q();
    let qo = lat.layer(other)?.ring().q();
    let max_bits = (qo as f64).log2();
    let alphabets: Vec<Vec<usize>> = (0..2)
        .map(|j| Ok(lat.layer(j)?.message_alphabets()))
        .collect::<Result<_, Error>>()?;
    let zero_dither = Some(vec![Complex64::new(0.0, 0.0); n]);
    let mut out = Vec::with_capacity(targets.len());
    for (k, &target) in targets.iter().enumerate() {
        if !(0.0..=max_bits + 1e-9).contains(&target) {
            return Err(Error::Config(format!(
                "a-priori target {target} outside [0, {max_bits}]"
            )));
        }
        let (strength, achieved) =
            solve_apriori_strength(qo, target.min(max_bits), 20_000, seed)?;
        let mut batch_sums = vec![0.0f64; BATCHES];
        let mut batch_sizes = vec![0usize; BATCHES];
        for f in 0..frames {
            // Channel randomness is shared across grid points (common
            // frames); the a-priori noise stream is per-point.
            let mut rng = mlnc::frame_rng(seed, f as u64);
            let mut arng = mlnc::frame_rng(seed.wrapping_add(1 + k as u64), f as u64);
            let draw = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<Vec<Sym>> {
                alphabets
                    .iter()
                    .map(|qs| qs.iter().map(|&q| rng.gen_range(0..q) as Sym).collect())
                    .collect()
            };
            let w1 = draw(&mut rng);
            let w2 = draw(&mut rng);
            let s1 = mlnc::transmit(lat, &w1, zero_dither.clone(), &mut rng)?;
            let s2 = mlnc::transmit(lat, &w2, zero_dither.clone(), &mut rng)?;
            let sigma = (n0 / 2.0).sqrt();
            let y: Vec<Complex64> = (0..n)
                .map(|t| {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    s1.signal[t] + s2.signal[t] + Complex64::new(re * sigma, im * sigma)
                })
                .collect();
            // True combination codeword of the other layer, observed through
            // the synthetic a-priori channel.
            let lc = mlnc::linear_combination(lat, &plan, other, &[&w1, &w2])?;
            let cw = lat.layer(other)?.encode(&lc)?;
            let priors_other: Vec<LVector> = cw
                .iter()
                .map(|&v| {
                    LVector::from_log_scores(&apriori_scores(qo, v, strength, &mut arng))
                })
                .collect();
            let mut priors: Vec<Option<&[LVector]>> = vec![None; 2];
            priors[other] = Some(&priors_other);
            let (_, ext) = relay.lsd_posterior(&y, layer, &priors)?;
            let mut acc = 0.0;
            for e in &ext {
                let mut ent = 0.0;
                for p in e.probabilities() {
                    if p > 0.0 {
                        ent += p * p.log2();
                    }
                }
                acc += (qi as f64).log2() + ent;
            }
            let b = f * BATCHES / frames;
            batch_sums[b] += acc / n as f64;
            batch_sizes[b] += 1;
        }
        let means: Vec<f64> = batch_sums
            .iter()
            .zip(&batch_sizes)
            .map(|(s, &c)| s / c.max(1) as f64)
            .collect();
        let i_e: f64 = means.iter().sum::<f64>() / BATCHES as f64;
        let var = means.iter().map(|&x| (x - i_e) * (x - i_e)).sum::<f64>()
            / (BATCHES - 1) as f64;
        out.push(ExitPoint {
            i_a: achieved,
            i_e: i_e.clamp(0.0, (qi as f64).log2()),
            std_error: (var / BATCHES as f64).sqrt(),
            snr_db,
            layer,
            alphabet: qi,
        });
    }
    Ok(out)
}

// --- CSV emitters --------------------------------------------------------------------

/// CSV rows `(snr_db, layer, value, std_error)` for rate or information
/// estimates.
pub fn mi_csv(rows: &[(f64, usize, MiEstimate)]) -> String {
    let mut s = String::from("snr_db,layer,value_bits,std_error\n");
    for (snr, layer, est) in rows {
        s.push_str(&format!(
            "{snr},{layer},{:.6},{:.6}\n",
            est.value, est.std_error
        ));
    }
    s
}

/// CSV rows `(i_a, i_e, snr_db, layer)` plus entropy-normalized copies.
pub fn exit_csv(points: &[ExitPoint]) -> String {
    let mut s = String::from("i_a_bits,i_e_bits,snr_db,layer,i_a_norm,i_e_norm,std_error\n");
    for p in points {
        let full = (p.alphabet as f64).log2();
        s.push_str(&format!(
            "{:.6},{:.6},{},{},{:.6},{:.6},{:.6}\n",
            p.i_a,
            p.i_e,
            p.snr_db,
            p.layer,
            p.i_a / full,
            p.i_e / full,
            p.std_error
        ));
    }
    s
}

// --- tests -----------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eisenstein::ONE;
    use crate::lattice::LatticeSpec;

    fn desk() -> LatticeSpec {
        LatticeSpec::rep12().unwrap()
    }

    fn unit_h() -> Vec<Complex64> {
        vec![Complex64::new(1.0, 0.0); 2]
    }

    fn desk_channel(snr_db: f64) -> (f64, ChannelConfig) {
        let p = mlnc::average_power(EisensteinInt::new(2, 4)).unwrap();
        let n0 = p / 10f64.powf(snr_db / 10.0);
        (p, ChannelConfig::new(Fading::Unit, n0, 2).unwrap())
    }

    #[test]
    fn rate_terms_match_the_scaling_identity() {
        // The term must be the log-inverse of the residual power left by the
        // best scaling, found independently by evaluating the quadratic
        // objective at its closed-form minimizer.
        let h = unit_h();
        let a = vec![ONE, ONE];
        let p = 10.0;
        let n0 = 1.0;
        let report = computation_rate(&h, &[a.clone()], &[p], n0).unwrap();
        let alpha = mlnc::choose_alpha(&h, &a, p, n0);
        let mut j = alpha.norm_sqr() * n0;
        for (hl, al) in h.iter().zip(&a) {
            j += p * (alpha * hl - al.to_complex()).norm_sqr();
        }
        let var = j / p;
        assert!((report.mmse_variances[0] - var).abs() < 1e-12);
        assert!((report.layer_terms[0] - (-var.log2())).abs() < 1e-12);
        assert!(report.warnings.is_empty());
    }

    #[test]
    fn rate_grows_with_power_and_clamps_useless_directions() {
        let h = unit_h();
        let matched = vec![ONE, ONE];
        let mut last = 0.0;
        for &p in &[0.5, 1.0, 5.0, 50.0, 500.0] {
            let r = computation_rate(&h, &[matched.clone()], &[p], 1.0).unwrap();
            assert!(r.layer_terms[0] >= last, "rate must grow with power");
            last = r.layer_terms[0];
        }
        // A combination orthogonal to the channel carries nothing.
        let perp = vec![ONE, EisensteinInt::new(-1, 0)];
        let r = computation_rate(&h, &[perp], &[10.0], 1.0).unwrap();
        assert_eq!(r.layer_terms[0], 0.0);
        assert!(!r.warnings.is_empty());

        // Joint phase rotations of the channel change nothing.
        let phase = Complex64::from_polar(1.0, 1.1);
        let hr: Vec<Complex64> = h.iter().map(|&c| c * phase).collect();
        let r0 = computation_rate(&h, &[matched.clone()], &[10.0], 1.0).unwrap();
        let r1 = computation_rate(&hr, &[matched], &[10.0], 1.0).unwrap();
        assert!((r0.total - r1.total).abs() < 1e-12);

        assert!(computation_rate(&h, &[vec![EisensteinInt::new(0, 0); 2]], &[1.0], 1.0).is_err());
    }

    #[test]
    fn union_bound_kernel_algebra() {
        let t1 = union_bound_term(2.0, 1, 0.5);
        let t2 = union_bound_term(4.0, 1, 0.5);
        assert!((t2 - t1 * t1).abs() < 1e-15, "doubling d2 squares the kernel");
        assert!((union_bound_term(2.0, 6, 0.5) - 6.0 * t1).abs() < 1e-15);
    }

    #[test]
    fn union_bound_on_the_desk_lattice() {
        let lat = desk();
        let h = unit_h();
        let p = mlnc::average_power(lat.varpi()).unwrap();
        let powers = vec![p; 2];
        let n0 = p / 10.0;
        let plan = CoefficientPlan::unit(&lat, &h, p, n0).unwrap();
        let report = union_bound(&lat, &plan, &h, &powers, n0).unwrap();
        assert_eq!(report.per_layer.len(), 2);
        let wsum: f64 = report.per_layer.iter().map(|l| l.weight).sum();
        assert!((wsum - 1.0).abs() < 1e-12);
        let mix: f64 = report
            .per_layer
            .iter()
            .map(|l| l.weight * l.bound)
            .sum();
        assert!((report.expectation - mix).abs() < 1e-15);
        for l in &report.per_layer {
            assert!(l.distance2 > 0.0 && l.kissing > 0);
            assert!(l.bound > 0.0);
        }

        // As the noise vanishes the scalings converge on the combination
        // and the bound collapses to zero.
        let tiny = 1e-9;
        let plan0 = CoefficientPlan::unit(&lat, &h, p, tiny).unwrap();
        let r0 = union_bound(&lat, &plan0, &h, &powers, tiny).unwrap();
        assert!(r0.expectation < 1e-30, "bound {} at tiny noise", r0.expectation);
    }

    #[test]
    fn information_anchors_at_ten_decibels() {
        // The information model transmits the bare constellation, so its
        // operating point is set by the discrete symbol energy, not the
        // dithered cell average. At Es/N0 = 10 dB the first layer carries
        // 0.8 bits unconditioned.
        let lat = desk();
        let es = mlnc::constellation_energy(&lat);
        let n0 = es / 10.0;
        let config = ChannelConfig::new(Fading::Unit, n0, 2).unwrap();
        let plain = mutual_information(&lat, 0, &[], &config, 20_000, 71).unwrap();
        assert!(
            (plain.value - 0.8).abs() < 0.1,
            "unconditioned first-layer information {} ± {}",
            plain.value,
            plain.std_error
        );
        let genie = mutual_information(&lat, 0, &[1], &config, 20_000, 72).unwrap();
        assert!(
            genie.value > plain.value,
            "knowing the other layer must help: {} vs {}",
            genie.value,
            plain.value
        );
        assert!(genie.value <= 3f64.log2() + 3.0 * genie.std_error);
    }

    #[test]
    fn information_obeys_the_chain_rule() {
        let lat = desk();
        let (_, config) = desk_channel(8.0);
        let n = 20_000;
        let first = mutual_information(&lat, 0, &[], &config, n, 101).unwrap();
        let second = mutual_information(&lat, 1, &[0], &config, n, 102).unwrap();
        let joint = joint_mutual_information(&lat, &[0, 1], &[], &config, n, 103).unwrap();
        let lhs = first.value + second.value;
        let err = (first.std_error.powi(2) + second.std_error.powi(2) + joint.std_error.powi(2))
            .sqrt();
        assert!(
            (lhs - joint.value).abs() < 3.0 * err,
            "chain rule: {} + {} vs joint {} (err {})",
            first.value,
            second.value,
            joint.value,
            err
        );
    }

    #[test]
    fn information_saturates_and_dies_at_the_extremes() {
        let lat = desk();
        let (_, loud) = desk_channel(40.0);
        let f3 = mutual_information(&lat, 0, &[1], &loud, 6_000, 55).unwrap();
        assert!((f3.value - 3f64.log2()).abs() < 0.05, "layer 0: {}", f3.value);
        let f4 = mutual_information(&lat, 1, &[0], &loud, 6_000, 56).unwrap();
        assert!((f4.value - 2.0).abs() < 0.05, "layer 1: {}", f4.value);

        let (_, silent) = desk_channel(-30.0);
        let dead = mutual_information(&lat, 0, &[], &silent, 6_000, 57).unwrap();
        assert!(
            dead.value < 3.0 * dead.std_error + 0.01,
            "information {} should vanish in noise",
            dead.value
        );
    }

    #[test]
    fn apriori_channel_hits_requested_information() {
        for q in [3usize, 4] {
            for target in [0.3, 0.8, (q as f64).log2() * 0.9] {
                let (_, achieved) = solve_apriori_strength(q, target, 20_000, 5).unwrap();
                assert!(
                    (achieved - target).abs() < 5e-3,
                    "q={q} target {target} achieved {achieved}"
                );
            }
        }
        let (t0, a0) = solve_apriori_strength(4, 0.0, 1_000, 5).unwrap();
        assert_eq!((t0, a0), (0.0, 0.0));
        assert!(solve_apriori_strength(4, 2.5, 1_000, 5).is_err());
    }

    #[test]
    fn exit_curve_ends_match_the_information_estimates() {
        let lat = desk();
        let snr_db = 10.0;
        let frames = 6_000;
        let grid = [0.0, 1.0, 2.0];
        let curve = exit_curve(&lat, 0, snr_db, &grid, frames, 11).unwrap();
        assert_eq!(curve.len(), 3);

        let (_, config) = desk_channel(snr_db);
        let plain = mutual_information(&lat, 0, &[], &config, 20_000, 11).unwrap();
        let genie = mutual_information(&lat, 0, &[1], &config, 20_000, 12).unwrap();
        let first = &curve[0];
        let last = &curve[2];
        let tol_lo = 3.0 * (first.std_error + plain.std_error) + 1e-3;
        assert!(
            (first.i_e - plain.value).abs() < tol_lo,
            "no-prior point {} vs unconditioned information {}",
            first.i_e,
            plain.value
        );
        let tol_hi = 3.0 * (last.std_error + genie.std_error) + 5e-3;
        assert!(
            (last.i_e - genie.value).abs() < tol_hi,
            "full-prior point {} vs conditioned information {}",
            last.i_e,
            genie.value
        );
        // Monotone within error bars, and never above the genie value.
        for w in curve.windows(2) {
            assert!(
                w[1].i_e >= w[0].i_e - 2.0 * (w[0].std_error + w[1].std_error),
                "transfer curve must not decrease: {} then {}",
                w[0].i_e,
                w[1].i_e
            );
        }
        for pt in &curve {
            assert!(pt.i_e <= genie.value + 3.0 * (pt.std_error + genie.std_error));
            assert!(pt.i_a >= -1e-9 && pt.i_e >= 0.0);
        }
    }

    #[test]
    fn csv_emitters_format_rows() {
        let est = MiEstimate {
            value: 0.8123,
            std_error: 0.004,
            samples: 1000,
            targets: vec![0],
            conditioning: vec![],
        };
        let csv = mi_csv(&[(10.0, 0, est)]);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "snr_db,layer,value_bits,std_error");
        assert!(lines.next().unwrap().starts_with("10,0,0.812"));

        let pt = ExitPoint {
            i_a: 0.5,
            i_e: 0.9,
            std_error: 0.01,
            snr_db: 10.0,
            layer: 1,
            alphabet: 4,
        };
        let csv = exit_csv(&[pt]);
        let row = csv.lines().nth(1).unwrap();
        assert!(row.starts_with("0.500000,0.900000,10,1,0.250000,0.450000"));
    }
}
