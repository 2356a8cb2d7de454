//! Exhaustive desk-scale checks runnable from a shipped binary.
//!
//! Every suite replays an independent brute-force oracle against the closed
//! forms or decoders it guards and reports assertion counts instead of
//! panicking, so a release build can prove its own arithmetic end to end.
//! The suites mirror the crate's property tests but run through the public
//! API only.
//!
//! # Example
//!
//! ```no_run
//! let report = lnc_core::selftest::run().unwrap();
//! print!("{}", report.render());
//! assert!(report.all_passed());
//! ```

use std::collections::HashSet;
use std::time::{Duration, Instant};

use num_complex::Complex64;

use crate::convcode::ConvCode;
use crate::eisenstein::EisensteinInt;
use crate::lattice::{LatticeSpec, MeritKind};
use crate::mlnc::{
    average_power, frame_rng, linear_combination, mac_output, transmit, ChannelConfig,
    CoefficientPlan, Fading, Relay,
};
use crate::oracle::{quotient_merit, Quotient};
use crate::residue::{coset_leaders, CrtSystem, Modulus, Sym};
use crate::Error;

/// One suite's outcome: how many individual assertions ran and failed.
#[derive(Clone, Debug)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: u64,
    pub failed: u64,
    pub elapsed: Duration,
    /// First few failure descriptions, for diagnosis.
    pub notes: Vec<String>,
}

impl SuiteResult {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            passed: 0,
            failed: 0,
            elapsed: Duration::ZERO,
            notes: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, note: impl FnOnce() -> String) {
        if ok {
            self.passed += 1;
        } else {
            self.failed += 1;
            if self.notes.len() < 5 {
                self.notes.push(note());
            }
        }
    }
}

/// Outcome of the full run.
#[derive(Clone, Debug)]
pub struct Report {
    pub suites: Vec<SuiteResult>,
}

impl Report {
    pub fn all_passed(&self) -> bool {
        self.suites.iter().all(|s| s.failed == 0)
    }

    /// Total number of executed assertions.
    pub fn executed(&self) -> u64 {
        self.suites.iter().map(|s| s.passed + s.failed).sum()
    }

    /// Plain-text table, one line per suite.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for s in &self.suites {
            out.push_str(&format!(
                "{:<24} {:>8} passed {:>4} failed   {:.2?}\n",
                s.name, s.passed, s.failed, s.elapsed
            ));
            for n in &s.notes {
                out.push_str(&format!("    {n}\n"));
            }
        }
        out.push_str(&format!(
            "total: {} checks, {}\n",
            self.executed(),
            if self.all_passed() { "all passed" } else { "FAILURES" }
        ));
        out
    }
}

/// Runs every suite on the 12-point instance and its siblings.
pub fn run() -> Result<Report, Error> {
    Ok(Report {
        suites: vec![
            residue_crt()?,
            lattice_decomposition()?,
            message_round_trips()?,
            noiseless_decoding()?,
            merit_formulas()?,
            decoder_oracles()?,
        ],
    })
}

fn timed(mut suite: SuiteResult, start: Instant) -> SuiteResult {
    suite.elapsed = start.elapsed();
    suite
}

/// Membership of `x` in the span of an upper-triangular basis (HNF rows).
fn in_span(rows: &[Vec<EisensteinInt>], x: &[EisensteinInt]) -> bool {
    let mut rem: Vec<EisensteinInt> = x.to_vec();
    for (i, row) in rows.iter().enumerate() {
        let (q, r) = match rem[i].divmod(row[i]) {
            Ok(v) => v,
            Err(_) => return false,
        };
        if !r.is_zero() {
            return false;
        }
        for (j, &h) in row.iter().enumerate().skip(i) {
            rem[j] = rem[j] - q * h;
        }
    }
    rem.iter().all(|v| v.is_zero())
}

// --- suites ----------------------------------------------------------------

/// Ring splitting: the residue map into the layer rings is a bijective ring
/// homomorphism on all 12 residues of `S/(2+4w)`.
pub fn residue_crt() -> Result<SuiteResult, Error> {
    let start = Instant::now();
    let mut suite = SuiteResult::new("residue-crt");
    let varpi = EisensteinInt::new(2, 4);
    let layers = vec![
        Modulus::new(EisensteinInt::new(1, 2), 1)?,
        Modulus::new(EisensteinInt::new(2, 0), 1)?,
    ];
    let crt = CrtSystem::new(varpi, layers)?;
    let leaders = coset_leaders(varpi)?;
    for &x in &leaders {
        for &y in &leaders {
            let fx = crt.forward(x);
            let fy = crt.forward(y);
            let sum = crt.forward(x + y);
            let prod = crt.forward(x * y);
            let sum_ok = (0..2).all(|i| fx[i].add(&fy[i]) == sum[i]);
            let prod_ok = (0..2).all(|i| fx[i].mul(&fy[i]) == prod[i]);
            suite.check(sum_ok, || format!("additive image mismatch at {x} + {y}"));
            suite.check(prod_ok, || format!("multiplicative image mismatch at {x} * {y}"));
        }
        let back = crt.inverse(&crt.forward(x))?;
        let same = (back - x).divisible_by(varpi)?;
        suite.check(same, || format!("round trip moved {x} to {back}"));
    }
    Ok(timed(suite, start))
}

/// Layer decomposition: among all 144 ambient cosets of `S^2/(varpi S^2)`,
/// exactly the 12 code members appear, their per-layer messages biject onto
/// the 3 x 4 message product, and encoding is additive.
pub fn lattice_decomposition() -> Result<SuiteResult, Error> {
    let start = Instant::now();
    let mut suite = SuiteResult::new("lattice-decomposition");
    let lat = LatticeSpec::rep12()?;
    let ring = lat.ring();
    let q = ring.q() as Sym;
    let mut members: Vec<(Vec<Sym>, Vec<Vec<Sym>>)> = Vec::new();
    let mut images = HashSet::new();
    for v1 in 0..q {
        for v2 in 0..q {
            let v = vec![v1, v2];
            let x = [ring.leader(v1), ring.leader(v2)];
            let by_messages = lat.messages_of_constellation(&v).is_ok();
            let by_membership = lat.contains(&x);
            suite.check(by_messages == by_membership, || {
                format!("membership disagreement at constellation {v:?}")
            });
            if let Ok(msgs) = lat.messages_of_constellation(&v) {
                images.insert(msgs.clone());
                members.push((v, msgs));
            }
        }
    }
    suite.check(members.len() == 12, || {
        format!("expected 12 members, found {}", members.len())
    });
    suite.check(images.len() == members.len(), || {
        "message images collide".into()
    });
    let q1 = lat.layer(0)?.message_alphabets()[0] as Sym;
    let q2 = lat.layer(1)?.message_alphabets()[0] as Sym;
    for m1 in 0..q1 {
        for m2 in 0..q2 {
            let hit = images.contains(&vec![vec![m1], vec![m2]]);
            suite.check(hit, || format!("message pair ({m1},{m2}) unreachable"));
        }
    }
    // Additivity of the encoder across all member pairs.
    for (va, wa) in &members {
        for (vb, wb) in &members {
            let sum_w: Vec<Vec<Sym>> = (0..2)
                .map(|i| {
                    let lr = lat.layer(i).unwrap().ring();
                    vec![lr.add(wa[i][0], wb[i][0])]
                })
                .collect();
            let direct = lat.encode(&sum_w)?;
            let summed: Vec<Sym> = (0..2).map(|t| ring.add(va[t], vb[t])).collect();
            suite.check(direct == summed, || {
                format!("encoder is not additive at {wa:?} + {wb:?}")
            });
        }
    }
    Ok(timed(suite, start))
}

/// Message round trips and kernels: decode-of-encode is the identity, the
/// layer projections return each layer's message, and a layer's message
/// vanishes exactly on the matching erasure sublattice.
pub fn message_round_trips() -> Result<SuiteResult, Error> {
    let start = Instant::now();
    let mut suite = SuiteResult::new("message-round-trips");
    let lat = LatticeSpec::rep12()?;
    let q1 = lat.layer(0)?.message_alphabets()[0] as Sym;
    let q2 = lat.layer(1)?.message_alphabets()[0] as Sym;
    let coarse = lat.coarse_generator()?;
    let erasure: Vec<Vec<Vec<EisensteinInt>>> = (0..2)
        .map(|i| lat.erasure_generator(i))
        .collect::<Result<_, _>>()?;
    for m1 in 0..q1 {
        for m2 in 0..q2 {
            let w = vec![vec![m1], vec![m2]];
            let v = lat.encode(&w)?;
            suite.check(lat.messages_of_constellation(&v)? == w, || {
                format!("decode of encode moved ({m1},{m2})")
            });
            for i in 0..2 {
                let proj = lat.layer_codeword(i, &v)?;
                let back = lat.layer(i)?.extract(&proj)?;
                suite.check(back == w[i], || {
                    format!("layer {i} projection broke message ({m1},{m2})")
                });
            }
            // Kernel checks on the leader lift of the encoded point.
            let x: Vec<EisensteinInt> = v.iter().map(|&s| lat.ring().leader(s)).collect();
            let zero = w.iter().all(|wi| wi.iter().all(|&s| s == 0));
            suite.check(zero == in_span(&coarse, &x), || {
                format!("coarse kernel mismatch at ({m1},{m2})")
            });
            for i in 0..2 {
                let layer_zero = w[i].iter().all(|&s| s == 0);
                suite.check(layer_zero == in_span(&erasure[i], &x), || {
                    format!("layer {i} kernel mismatch at ({m1},{m2})")
                });
            }
        }
    }
    Ok(timed(suite, start))
}

/// Noiseless exactness: the folded decoder and every soft schedule return
/// the exact linear combination for all 144 message pairs, with and without
/// dithering.
pub fn noiseless_decoding() -> Result<SuiteResult, Error> {
    let start = Instant::now();
    let mut suite = SuiteResult::new("noiseless-decoding");
    let lat = LatticeSpec::rep12()?;
    let p = average_power(lat.varpi())?;
    let n0 = 1e-12;
    let h = vec![Complex64::new(1.0, 0.0); 2];
    let plan = CoefficientPlan::unit(&lat, &h, p, n0)?;
    let config = ChannelConfig::new(Fading::Unit, n0, 2)?;
    let q1 = lat.layer(0)?.message_alphabets()[0] as Sym;
    let q2 = lat.layer(1)?.message_alphabets()[0] as Sym;
    let mut msgs = Vec::new();
    for m1 in 0..q1 {
        for m2 in 0..q2 {
            msgs.push(vec![vec![m1], vec![m2]]);
        }
    }
    let mut rng = frame_rng(97, 0);
    for dithered in [false, true] {
        for w1 in &msgs {
            for w2 in &msgs {
                let zero = Some(vec![Complex64::new(0.0, 0.0); 2]);
                let d = if dithered { None } else { zero };
                let s1 = transmit(&lat, w1, d.clone(), &mut rng)?;
                let s2 = transmit(&lat, w2, d, &mut rng)?;
                let dithers = vec![s1.dither.clone(), s2.dither.clone()];
                let states = [s1, s2];
                let y = mac_output(&states, &config, &h, &mut rng)?;
                let relay = Relay::new(&lat, &plan, &h, n0, dithers)?;
                let truth: Vec<Vec<Sym>> = (0..2)
                    .map(|i| linear_combination(&lat, &plan, i, &[w1.as_slice(), w2.as_slice()]))
                    .collect::<Result<_, _>>()?;
                for (i, t) in truth.iter().enumerate() {
                    let lif = relay.lif_decode(&y, i)?;
                    suite.check(&lif.combination == t, || {
                        format!("folded decode missed layer {i} at {w1:?}+{w2:?}")
                    });
                }
                let staged = relay.msd_decode(&y, &[0, 1])?;
                let reversed = relay.msd_decode(&y, &[1, 0])?;
                let plain = relay.independent_decode(&y)?;
                let iterated = relay.imsd_decode(&y, &[0, 1], 3)?;
                for (i, t) in truth.iter().enumerate() {
                    suite.check(&staged.layers[i].combination == t, || {
                        format!("staged decode missed layer {i} at {w1:?}+{w2:?}")
                    });
                    suite.check(&reversed.layers[i].combination == t, || {
                        format!("reversed stage order missed layer {i}")
                    });
                    suite.check(&plain.layers[i].combination == t, || {
                        format!("independent decode missed layer {i}")
                    });
                    suite.check(&iterated.layers[i].combination == t, || {
                        format!("iterated decode missed layer {i}")
                    });
                }
            }
        }
    }
    Ok(timed(suite, start))
}

/// Figures of merit: closed-form gains and kissing numbers against the
/// exhaustive shortest-vector oracle on six instances.
pub fn merit_formulas() -> Result<SuiteResult, Error> {
    let start = Instant::now();
    let mut suite = SuiteResult::new("figures-of-merit");
    let presets: Vec<(&str, LatticeSpec)> = vec![
        ("rep12", LatticeSpec::rep12()?),
        ("split21", LatticeSpec::split21()?),
        ("triple84", LatticeSpec::triple84()?),
        ("chain9", LatticeSpec::chain9()?),
        ("chain27", LatticeSpec::chain27()?),
        ("mixed36", LatticeSpec::mixed36()?),
    ];
    for (name, lat) in &presets {
        let fine = lat.fine_gain()?;
        let oracle = quotient_merit(lat, Quotient::FineOverCoarse)?;
        suite.check((fine.linear - oracle.gain_linear).abs() < 1e-9, || {
            format!("{name}: composite gain {} vs oracle {}", fine.linear, oracle.gain_linear)
        });
        for i in 0..lat.layer_count() {
            let oracle = quotient_merit(lat, Quotient::PrimaryOverCoarse(i))?;
            let g = lat.primary_gain(i)?;
            match g.kind {
                MeritKind::Exact => {
                    suite.check((g.linear - oracle.gain_linear).abs() < 1e-9, || {
                        format!("{name} layer {i}: gain {} vs oracle {}", g.linear, oracle.gain_linear)
                    });
                }
                _ => {
                    suite.check(g.linear <= oracle.gain_linear + 1e-9, || {
                        format!("{name} layer {i}: bound {} above oracle {}", g.linear, oracle.gain_linear)
                    });
                }
            }
            let k = lat.primary_kissing(i)?;
            match k.kind {
                MeritKind::Exact => {
                    suite.check((k.value - oracle.kissing as f64).abs() < 1e-9, || {
                        format!("{name} layer {i}: kissing {} vs oracle {}", k.value, oracle.kissing)
                    });
                }
                MeritKind::UpperBound => {
                    suite.check(k.value + 1e-9 >= oracle.kissing as f64, || {
                        format!("{name} layer {i}: kissing bound {} below oracle {}", k.value, oracle.kissing)
                    });
                }
                MeritKind::LowerBound => {
                    suite.check(k.value <= oracle.kissing as f64 + 1e-9, || {
                        format!("{name} layer {i}: kissing bound {} above oracle {}", k.value, oracle.kissing)
                    });
                }
            }
        }
    }
    Ok(timed(suite, start))
}

/// Trellis decoders against exhaustive enumeration: minimum path metric for
/// the hard decoder, exact marginals for the soft one.
pub fn decoder_oracles() -> Result<SuiteResult, Error> {
    use rand::Rng;

    let start = Instant::now();
    let mut suite = SuiteResult::new("decoder-oracles");
    let codes = [ConvCode::half_rate_ternary()?, ConvCode::half_rate_quaternary()?];
    for (ci, code) in codes.iter().enumerate() {
        let q = code.field().q();
        let iota = 5;
        for seed in 0..3u64 {
            let mut rng = frame_rng(1000 + ci as u64, seed);
            let cost: Vec<Vec<f64>> = (0..code.frame_len(iota))
                .map(|_| (0..q).map(|_| rng.gen_range(0.0..1.0)).collect())
                .collect();
            let msg = code.viterbi(iota, |pos, s| cost[pos][s as usize])?;
            let metric: f64 = code
                .encode(&msg)?
                .iter()
                .enumerate()
                .map(|(p, &s)| cost[p][s as usize])
                .sum();
            // Exhaustive minimum over all q^iota messages.
            let mut best = f64::INFINITY;
            let mut m = vec![0 as Sym; iota];
            loop {
                let w: f64 = code
                    .encode(&m)?
                    .iter()
                    .enumerate()
                    .map(|(p, &s)| cost[p][s as usize])
                    .sum();
                best = best.min(w);
                let mut pos = 0;
                while pos < iota {
                    m[pos] += 1;
                    if (m[pos] as usize) < q {
                        break;
                    }
                    m[pos] = 0;
                    pos += 1;
                }
                if pos == iota {
                    break;
                }
            }
            suite.check((metric - best).abs() < 1e-9, || {
                format!("code {ci} seed {seed}: path metric {metric} vs exhaustive {best}")
            });
        }
    }
    // Soft marginals on short frames.
    for (ci, code) in codes.iter().enumerate() {
        let q = code.field().q();
        let iota = 4;
        let mut rng = frame_rng(2000 + ci as u64, 0);
        let loglik: Vec<Vec<f64>> = (0..code.frame_len(iota))
            .map(|_| (0..q).map(|_| rng.gen_range(-3.0..0.0)).collect())
            .collect();
        let soft = code.forward_backward(iota, &loglik, None)?;
        let mut post = vec![vec![0.0f64; q]; iota];
        let mut total = 0.0;
        let mut m = vec![0 as Sym; iota];
        loop {
            let w: f64 = code
                .encode(&m)?
                .iter()
                .enumerate()
                .map(|(p, &s)| loglik[p][s as usize])
                .sum::<f64>()
                .exp();
            total += w;
            for (t, &s) in m.iter().enumerate() {
                post[t][s as usize] += w;
            }
            let mut pos = 0;
            while pos < iota {
                m[pos] += 1;
                if (m[pos] as usize) < q {
                    break;
                }
                m[pos] = 0;
                pos += 1;
            }
            if pos == iota {
                break;
            }
        }
        for t in 0..iota {
            for v in 0..q {
                let exact = post[t][v] / total;
                suite.check((soft.input_posteriors[t][v] - exact).abs() < 1e-9, || {
                    format!("code {ci}: marginal mismatch at ({t},{v})")
                });
            }
        }
    }
    Ok(timed(suite, start))
}
