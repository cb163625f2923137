//! The interactive certification protocol: prover and verifier state
//! machines, transport drivers, and adversarial provers for soundness
//! experiments.
//!
//! The prover runs the resolution procedure up front and then defends the
//! claim that the final formula's arithmetisation is a nonzero constant.
//! Each round reduces a claim about φ_i to one about φ_{i-1}: the prover
//! sends the partial evaluation of φ_{i-1}'s arithmetisation in the round's
//! pivot variable, the verifier applies the round map matching the
//! macrostep, checks consistency at the current point, and substitutes a
//! fresh random challenge. The final claim about φ_0 is checked directly.

use std::collections::VecDeque;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::arith::{
    delta_metered, eval_b_metered, eval_poly_metered, gamma_metered, shape_check, ShapeKind,
    UnivariatePoly,
};
use crate::dp::{build_schedule, validate_permutation, Macrostep, MacrostepKind, Trace, Verdict};
use crate::field::{pick_protocol_prime, sample_prime, PrimeField};
use crate::formula::{Assignment, Formula, Var};
use crate::wire::{check_reduced, encode, hex, ChannelTransport, Message, Transport, TranscriptEntry, WireError};

#[derive(Debug, Clone)]
pub struct ProtocolParams {
    /// Bit length of the protocol prime (the per-round error is 6/q).
    pub prime_bits: u32,
    /// Independent repetitions; all must accept.
    pub repetitions: u32,
    /// Pin the prime instead of sampling it (replay and soundness tests).
    pub forced_prime: Option<u64>,
    /// Start the protocol even when the verdict is satisfiable; the header
    /// then claims 0 and the verifier rejects.
    pub force_start: bool,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        ProtocolParams {
            prime_bits: 62,
            repetitions: 1,
            forced_prime: None,
            force_start: false,
        }
    }
}

/// Machine-readable rejection causes, also used as verdict reason codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RejectReason {
    /// Bad header: zero claim, non-permutation order, or composite modulus.
    Header,
    /// Round polynomial has a coefficient the honest prover cannot produce.
    Shape,
    /// Round map output disagrees with the tracked claim.
    Consistency,
    /// Final self-check of φ_0 failed.
    Final,
}

impl RejectReason {
    pub fn code(self) -> u8 {
        match self {
            RejectReason::Header => 1,
            RejectReason::Shape => 2,
            RejectReason::Consistency => 3,
            RejectReason::Final => 4,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            1 => RejectReason::Header,
            2 => RejectReason::Shape,
            3 => RejectReason::Consistency,
            4 => RejectReason::Final,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Accept,
    Reject(RejectReason),
}

/// Prover behaviours: honest, or one of the scripted adversaries used to
/// measure the soundness bound empirically.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProverKind {
    Honest,
    /// Add `offset` to coefficient `coeff` of the round polynomial at the
    /// given play-order round (1-based), leaving other rounds honest.
    TamperRound { round: usize, coeff: usize, offset: u64 },
    /// Perturb the claimed header constant by one.
    FlipFinalClaim,
    /// Set a coefficient forbidden by the shape check at the given round.
    DegreeViolation { round: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Header {
    pub q: u64,
    pub n: u32,
    pub order: Vec<Var>,
    pub claimed_constant: u64,
}

impl Header {
    pub fn to_message(&self) -> Message {
        Message::Header {
            q: self.q,
            n: self.n,
            order: self.order.clone(),
            claimed_constant: self.claimed_constant,
        }
    }
}

#[derive(Debug, Error)]
pub enum StartError {
    #[error("instance is satisfiable; nothing to certify")]
    NothingToCertify,
}

#[derive(Debug, Error)]
pub enum ProtocolAbort {
    #[error("transport failure: {0}")]
    Wire(#[from] WireError),
    #[error("unexpected message tag {0:#04x}")]
    UnexpectedMessage(u8),
}

/// The prover state machine. Owns the completed trace and mirrors the
/// verifier's assignment as challenges arrive.
pub struct Prover<'a> {
    trace: &'a Trace,
    pub field: PrimeField,
    kind: ProverKind,
    sigma: Assignment,
    /// Next round to play, 1-based in play order; round r reduces the claim
    /// about φ_{k-r+1}.
    round: usize,
}

impl<'a> Prover<'a> {
    pub fn start<R: rand::Rng>(
        trace: &'a Trace,
        params: &ProtocolParams,
        kind: ProverKind,
        rng: &mut R,
    ) -> Result<(Prover<'a>, Header), StartError> {
        if trace.verdict == Verdict::Satisfiable && !params.force_start {
            return Err(StartError::NothingToCertify);
        }
        let mult = trace.last().empty_clause_multiplicity();
        let field = match params.forced_prime {
            Some(q) => PrimeField::with_modulus(q),
            None if num_traits::Zero::is_zero(&mult) => {
                PrimeField::new(sample_prime(params.prime_bits, rng))
            }
            None => pick_protocol_prime(&mult, params.prime_bits, rng).0,
        };
        let mut claimed = field.reduce_big(&mult);
        if kind == ProverKind::FlipFinalClaim {
            claimed = field.add(claimed, 1 % field.modulus());
        }
        let header = Header {
            q: field.modulus(),
            n: trace.num_vars(),
            order: trace.order.clone(),
            claimed_constant: claimed,
        };
        let prover = Prover {
            trace,
            field,
            kind,
            sigma: Assignment::undefined(trace.num_vars()),
            round: 1,
        };
        Ok((prover, header))
    }

    pub fn rounds(&self) -> usize {
        self.trace.rounds()
    }

    pub fn set_initial_assignment(&mut self, values: Vec<u64>) {
        assert_eq!(values.len(), self.trace.num_vars() as usize);
        self.sigma = Assignment::total(values);
    }

    fn current_step(&self) -> Macrostep {
        let k = self.trace.rounds();
        self.trace.schedule[k - self.round]
    }

    /// The round polynomial: the partial evaluation of φ_{i-1} in the pivot,
    /// possibly tampered by the adversary script.
    pub fn round_poly(&self) -> UnivariatePoly {
        let k = self.trace.rounds();
        let step = self.current_step();
        let phi_prev = &self.trace.formulas[k - self.round];
        let partial = self.sigma.without(step.pivot);
        let mut p = crate::arith::partial_eval_b(phi_prev, &partial, step.pivot, &self.field);
        match self.kind {
            ProverKind::TamperRound { round, coeff, offset } if round == self.round => {
                p.coeffs[coeff] = self.field.add(p.coeffs[coeff], self.field.reduce(offset));
            }
            ProverKind::DegreeViolation { round } if round == self.round => {
                p.coeffs[5] = self.field.add(p.coeffs[5], 1);
            }
            _ => {}
        }
        p
    }

    pub fn apply_challenge(&mut self, r: u64) {
        let step = self.current_step();
        self.sigma.set(step.pivot, r);
        self.round += 1;
    }
}

/// Source of the verifier's randomness: a seeded generator, or a script of
/// pinned values for replay tests.
#[derive(Debug)]
pub enum VerifierRandomness {
    Seeded(Box<ChaCha8Rng>),
    Scripted {
        sigma: Vec<u64>,
        challenges: VecDeque<u64>,
    },
}

impl VerifierRandomness {
    pub fn seeded(seed: u64) -> Self {
        VerifierRandomness::Seeded(Box::new(ChaCha8Rng::seed_from_u64(seed)))
    }

    pub fn scripted(sigma: Vec<u64>, challenges: Vec<u64>) -> Self {
        VerifierRandomness::Scripted {
            sigma,
            challenges: challenges.into(),
        }
    }

    fn initial_assignment(&mut self, n: u32, field: &PrimeField) -> Vec<u64> {
        match self {
            VerifierRandomness::Seeded(rng) => (0..n).map(|_| field.sample(rng)).collect(),
            VerifierRandomness::Scripted { sigma, .. } => {
                assert_eq!(sigma.len(), n as usize, "scripted assignment has wrong arity");
                sigma.clone()
            }
        }
    }

    fn draw(&mut self, field: &PrimeField) -> u64 {
        match self {
            VerifierRandomness::Seeded(rng) => field.sample(rng),
            VerifierRandomness::Scripted { challenges, .. } => {
                challenges.pop_front().expect("script ran out of challenges")
            }
        }
    }
}

/// The verifier state machine. Tracks one claim (round index, value,
/// assignment); per-round work is constant, only the final check reads φ_0.
#[derive(Debug)]
pub struct Verifier {
    pub field: PrimeField,
    schedule: Vec<Macrostep>,
    sigma: Assignment,
    w: u64,
    /// Index of the formula the current claim is about; counts down to 0.
    i: usize,
    randomness: VerifierRandomness,
    /// Field-operation counts, one entry per completed round.
    pub round_ops: Vec<u64>,
    /// Field-operation count of the final φ_0 evaluation.
    pub finalize_ops: u64,
}

impl Verifier {
    pub fn start(header: &Header, randomness: VerifierRandomness) -> Result<Verifier, RejectReason> {
        // q is taken from the header as given (range-checked only): every
        // check below is valid mod any q, and a prover gains nothing from a
        // composite modulus beyond weakening its own soundness guarantee
        if header.q < 3 || header.q >= (1 << 63) {
            return Err(RejectReason::Header);
        }
        if header.claimed_constant == 0 || header.claimed_constant >= header.q {
            return Err(RejectReason::Header);
        }
        if validate_permutation(&header.order, header.n).is_err() {
            return Err(RejectReason::Header);
        }
        let field = PrimeField::with_modulus(header.q);
        // the schedule is rebuilt locally; only π is trusted from the wire
        let schedule = build_schedule(&header.order).expect("validated permutation");
        let mut randomness = randomness;
        let sigma = Assignment::total(randomness.initial_assignment(header.n, &field));
        Ok(Verifier {
            field,
            i: schedule.len(),
            schedule,
            sigma,
            w: header.claimed_constant,
            randomness,
            round_ops: Vec::new(),
            finalize_ops: 0,
        })
    }

    pub fn rounds_remaining(&self) -> usize {
        self.i
    }

    pub fn current_claim(&self) -> (usize, u64, &Assignment) {
        (self.i, self.w, &self.sigma)
    }

    pub fn initial_assignment(&self) -> Vec<u64> {
        self.sigma.to_values().expect("initial assignment is total")
    }

    /// One claim reduction. Returns the fresh challenge on success.
    pub fn round(&mut self, p: &UnivariatePoly) -> Result<u64, RejectReason> {
        assert!(self.i >= 1, "no rounds remaining");
        let step = self.schedule[self.i - 1];
        let mut ops = 0u64;
        let (kind, mapped) = match step.kind {
            MacrostepKind::Resolution => {
                if !shape_check(p, ShapeKind::Resolution) {
                    return Err(RejectReason::Shape);
                }
                (ShapeKind::Resolution, gamma_metered(p, &self.field, &mut ops))
            }
            MacrostepKind::Cleanup => {
                if !shape_check(p, ShapeKind::Cleanup) {
                    return Err(RejectReason::Shape);
                }
                (ShapeKind::Cleanup, delta_metered(p, &self.field, &mut ops))
            }
        };
        debug_assert!(shape_check(&mapped, kind));
        let at_pivot = self.sigma.get(step.pivot).expect("assignment is total");
        let check = eval_poly_metered(&mapped, at_pivot, &self.field, &mut ops);
        if check != self.w {
            return Err(RejectReason::Consistency);
        }
        let r = self.randomness.draw(&self.field);
        self.w = eval_poly_metered(p, r, &self.field, &mut ops);
        self.sigma.set(step.pivot, r);
        self.i -= 1;
        self.round_ops.push(ops);
        Ok(r)
    }

    /// Final self-check: evaluate φ_0's arithmetisation at σ and compare.
    /// The only verifier step whose cost scales with the formula.
    pub fn finalize(&mut self, phi0: &Formula) -> Result<(), RejectReason> {
        assert_eq!(self.i, 0, "rounds still remaining");
        let value = eval_b_metered(phi0, &self.sigma, &self.field, &mut self.finalize_ops);
        if value == self.w {
            Ok(())
        } else {
            Err(RejectReason::Final)
        }
    }
}

/// Per-run measurements of a transport-driven protocol execution.
#[derive(Debug, Clone, Default)]
pub struct RunMetrics {
    pub prover_time: Duration,
    pub verifier_time: Duration,
    pub p2v_bytes: u64,
    pub v2p_bytes: u64,
    pub rounds: u64,
    pub repetitions: u32,
    pub verifier_round_ops: Vec<u64>,
    pub verifier_finalize_ops: u64,
}

#[derive(Debug)]
pub struct ProtocolReport {
    pub outcome: Outcome,
    pub metrics: RunMetrics,
    pub transcript: Option<Vec<TranscriptEntry>>,
}

/// Drive the prover side of one protocol run over a transport.
/// Returns the verdict relayed by the verifier and the prover compute time.
pub fn drive_prover<T: Transport>(
    trace: &Trace,
    params: &ProtocolParams,
    kind: ProverKind,
    rng: &mut ChaCha8Rng,
    transport: &mut T,
) -> Result<(Outcome, Duration), ProtocolAbort> {
    let mut elapsed = Duration::ZERO;
    let t0 = Instant::now();
    let started = Prover::start(trace, params, kind, rng);
    let (mut prover, header) = match started {
        Ok(x) => x,
        Err(StartError::NothingToCertify) => unreachable!("caller checks the verdict first"),
    };
    let header_msg = header.to_message();
    elapsed += t0.elapsed();
    transport.send(&header_msg)?;

    match transport.recv()? {
        Message::InitialAssignment(values) => prover.set_initial_assignment(values),
        Message::Verdict { accept, reason } => return Ok((verdict_outcome(accept, reason), elapsed)),
        other => return Err(ProtocolAbort::UnexpectedMessage(other.tag())),
    }

    for _ in 0..trace.rounds() {
        let t = Instant::now();
        let p = prover.round_poly();
        elapsed += t.elapsed();
        transport.send(&Message::RoundPoly(p))?;
        match transport.recv()? {
            Message::Challenge(r) => {
                let t = Instant::now();
                prover.apply_challenge(r);
                elapsed += t.elapsed();
            }
            Message::Verdict { accept, reason } => {
                return Ok((verdict_outcome(accept, reason), elapsed))
            }
            other => return Err(ProtocolAbort::UnexpectedMessage(other.tag())),
        }
    }

    match transport.recv()? {
        Message::Verdict { accept, reason } => Ok((verdict_outcome(accept, reason), elapsed)),
        other => Err(ProtocolAbort::UnexpectedMessage(other.tag())),
    }
}

fn verdict_outcome(accept: bool, reason: u8) -> Outcome {
    if accept {
        Outcome::Accept
    } else {
        Outcome::Reject(RejectReason::from_code(reason).unwrap_or(RejectReason::Header))
    }
}

/// Everything the verifier driver reports after one run.
pub struct VerifierRun {
    pub outcome: Outcome,
    pub compute_time: Duration,
    pub round_ops: Vec<u64>,
    pub finalize_ops: u64,
    pub transcript: Vec<TranscriptEntry>,
}

/// Drive the verifier side of one protocol run over a transport.
pub fn drive_verifier<T: Transport>(
    phi0: &Formula,
    randomness: VerifierRandomness,
    transport: &mut T,
) -> Result<VerifierRun, ProtocolAbort> {
    let mut transcript = Vec::new();
    let mut elapsed = Duration::ZERO;

    let msg = transport.recv()?;
    log_entry(&mut transcript, "p2v", &msg);
    let header = match msg {
        Message::Header {
            q,
            n,
            order,
            claimed_constant,
        } => Header {
            q,
            n,
            order,
            claimed_constant,
        },
        other => return Err(ProtocolAbort::UnexpectedMessage(other.tag())),
    };

    let t0 = Instant::now();
    let started = Verifier::start(&header, randomness);
    elapsed += t0.elapsed();
    let mut verifier = match started {
        Ok(v) => v,
        Err(reason) => {
            let verdict = Message::Verdict {
                accept: false,
                reason: reason.code(),
            };
            log_entry(&mut transcript, "v2p", &verdict);
            transport.send(&verdict)?;
            return Ok(VerifierRun {
                outcome: Outcome::Reject(reason),
                compute_time: elapsed,
                round_ops: Vec::new(),
                finalize_ops: 0,
                transcript,
            });
        }
    };

    let init = Message::InitialAssignment(verifier.initial_assignment());
    log_entry(&mut transcript, "v2p", &init);
    transport.send(&init)?;

    while verifier.rounds_remaining() > 0 {
        let msg = transport.recv()?;
        log_entry(&mut transcript, "p2v", &msg);
        let poly = match msg {
            Message::RoundPoly(p) => p,
            other => return Err(ProtocolAbort::UnexpectedMessage(other.tag())),
        };
        let t = Instant::now();
        let reduced_ok = check_reduced(&Message::RoundPoly(poly), verifier.field.modulus()).is_ok();
        let result = if reduced_ok {
            verifier.round(&poly)
        } else {
            Err(RejectReason::Shape)
        };
        elapsed += t.elapsed();
        match result {
            Ok(r) => {
                let challenge = Message::Challenge(r);
                log_entry(&mut transcript, "v2p", &challenge);
                transport.send(&challenge)?;
            }
            Err(reason) => {
                let verdict = Message::Verdict {
                    accept: false,
                    reason: reason.code(),
                };
                log_entry(&mut transcript, "v2p", &verdict);
                transport.send(&verdict)?;
                return Ok(VerifierRun {
                    outcome: Outcome::Reject(reason),
                    compute_time: elapsed,
                    round_ops: verifier.round_ops,
                    finalize_ops: verifier.finalize_ops,
                    transcript,
                });
            }
        }
    }

    let t = Instant::now();
    let final_result = verifier.finalize(phi0);
    elapsed += t.elapsed();
    let (outcome, verdict) = match final_result {
        Ok(()) => (
            Outcome::Accept,
            Message::Verdict {
                accept: true,
                reason: 0,
            },
        ),
        Err(reason) => (
            Outcome::Reject(reason),
            Message::Verdict {
                accept: false,
                reason: reason.code(),
            },
        ),
    };
    log_entry(&mut transcript, "v2p", &verdict);
    transport.send(&verdict)?;
    Ok(VerifierRun {
        outcome,
        compute_time: elapsed,
        round_ops: verifier.round_ops,
        finalize_ops: verifier.finalize_ops,
        transcript,
    })
}

fn log_entry(transcript: &mut Vec<TranscriptEntry>, dir: &'static str, msg: &Message) {
    let bytes = encode(msg);
    transcript.push(TranscriptEntry {
        dir,
        tag: msg.tag(),
        payload: hex(&bytes[5..]),
    });
}

/// Run the full protocol in-process: prover on a worker thread, verifier on
/// the calling thread, connected by a message-queue transport. Repetitions
/// use fresh primes and fresh verifier randomness; all must accept.
pub fn run_protocol(
    trace: &Trace,
    kind: ProverKind,
    params: &ProtocolParams,
    prover_seed: u64,
    verifier_seed: u64,
) -> Result<ProtocolReport, StartError> {
    if trace.verdict == Verdict::Satisfiable && !params.force_start {
        return Err(StartError::NothingToCertify);
    }
    let phi0 = trace.initial();
    let mut metrics = RunMetrics {
        repetitions: params.repetitions,
        ..Default::default()
    };
    let mut transcript = Vec::new();
    let mut outcome = Outcome::Accept;

    let mut prover_rng = ChaCha8Rng::seed_from_u64(prover_seed);
    let mut verifier_rng = ChaCha8Rng::seed_from_u64(verifier_seed);

    for _rep in 0..params.repetitions {
        let (mut prover_end, mut verifier_end) = ChannelTransport::pair();
        let randomness = VerifierRandomness::seeded(rand::Rng::gen(&mut verifier_rng));
        let run = std::thread::scope(|scope| {
            let prover_rng = &mut prover_rng;
            let handle = scope.spawn(move || {
                drive_prover(trace, params, kind, prover_rng, &mut prover_end)
            });
            let verifier_run = drive_verifier(phi0, randomness, &mut verifier_end);
            let prover_run = handle.join().expect("prover thread panicked");
            (prover_run, verifier_run, verifier_end)
        });
        let (prover_run, verifier_run, verifier_end) = run;
        let (_, prover_time) = prover_run.expect("in-process transport failed");
        let vrun = verifier_run.expect("in-process transport failed");

        let (p2v, v2p) = crate::wire::count_bytes(&vrun.transcript);
        metrics.prover_time += prover_time;
        metrics.verifier_time += vrun.compute_time;
        metrics.p2v_bytes += p2v;
        metrics.v2p_bytes += v2p;
        metrics.rounds += vrun.round_ops.len() as u64;
        metrics.verifier_round_ops.extend(vrun.round_ops.iter());
        metrics.verifier_finalize_ops += vrun.finalize_ops;
        transcript.extend(vrun.transcript);
        let _ = verifier_end;

        if let Outcome::Reject(r) = vrun.outcome {
            outcome = Outcome::Reject(r);
            break;
        }
    }

    Ok(ProtocolReport {
        outcome,
        metrics,
        transcript: Some(transcript),
    })
}
