//! Instance generators, resolution-proof emission, and the experiment
//! harness behind the `bench` subcommand.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dp::{run_with_deadline, choose_order, MacrostepKind, OrderPolicy, Trace, Verdict};
use crate::formula::{resolvent, Clause, Formula, Literal, Var};
use crate::protocol::{run_protocol, Outcome, ProtocolParams, ProverKind};

/// Pigeonhole instance php(p): p+1 pigeons into p holes, unsatisfiable.
/// Variable (i-1)*holes + j means pigeon i sits in hole j.
pub fn gen_php(p: u32) -> Formula {
    gen_php_pigeons(p + 1, p)
}

/// General pigeonhole family; satisfiable iff pigeons <= holes.
pub fn gen_php_pigeons(pigeons: u32, holes: u32) -> Formula {
    let var = |i: u32, j: u32| -> Var { (i - 1) * holes + j };
    let mut phi = Formula::new(pigeons * holes);
    for i in 1..=pigeons {
        phi.add_clause_once(Clause::from_literals((1..=holes).map(|j| Literal::pos(var(i, j)))));
    }
    for j in 1..=holes {
        for i1 in 1..=pigeons {
            for i2 in (i1 + 1)..=pigeons {
                phi.add_clause_once(Clause::from_literals([
                    Literal::neg(var(i1, j)),
                    Literal::neg(var(i2, j)),
                ]));
            }
        }
    }
    phi
}

/// Uniform random k-CNF: m clauses over n variables, each clause k distinct
/// variables with independent random polarity. k is clamped to n.
pub fn gen_random_kcnf(n: u32, m: u32, k: u32, seed: u64) -> Formula {
    assert!(n >= 1, "need at least one variable");
    let k = k.min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vars: Vec<Var> = (1..=n).collect();
    let mut phi = Formula::new(n);
    for _ in 0..m {
        let chosen = vars.choose_multiple(&mut rng, k as usize);
        let clause = Clause::from_literals(chosen.map(|&v| {
            if rng.gen::<bool>() {
                Literal::pos(v)
            } else {
                Literal::neg(v)
            }
        }));
        phi.add_clause_once(clause);
    }
    phi
}

#[derive(Debug, Error)]
pub enum ProofError {
    #[error("line {0}: {1}")]
    Malformed(usize, String),
    #[error("line {line}: clause is not in the input formula")]
    NotAnInputClause { line: usize },
    #[error("line {line}: antecedent {index} out of range")]
    BadAntecedent { line: usize, index: usize },
    #[error("line {line}: stated clause is not the resolvent of its antecedents")]
    WrongResolvent { line: usize },
    #[error("proof does not derive the empty clause")]
    NoEmptyClause,
    #[error("run did not reach the empty clause; nothing to extract")]
    NotRefuted,
}

fn set_clause(c: &Clause) -> Clause {
    c.dedup()
}

fn clause_lits(c: &Clause) -> String {
    let mut s = String::new();
    for lit in c.distinct_literals() {
        s.push_str(&lit.to_dimacs().to_string());
        s.push(' ');
    }
    s.push('0');
    s
}

/// Extract a plain resolution refutation from a completed run.
///
/// Lines are implicitly indexed from 1. Inputs are `i <lits> 0`; derived
/// clauses are `r <a1> <a2> <pivot> <lits> 0` where a1 contains the pivot
/// positively and a2 negatively. Cleanup steps contribute nothing: every
/// resolvent is recorded set-normalized the moment it is produced, and
/// duplicates reuse their first index.
pub fn emit_resolution_trace(trace: &Trace) -> Result<String, ProofError> {
    if trace.verdict != Verdict::Unsatisfiable {
        return Err(ProofError::NotRefuted);
    }
    let mut lines: Vec<String> = Vec::new();
    let mut index: HashMap<Clause, usize> = HashMap::new();
    for (clause, _) in trace.initial().iter() {
        if let std::collections::hash_map::Entry::Vacant(e) = index.entry(set_clause(clause)) {
            lines.push(format!("i {}", clause_lits(e.key())));
            e.insert(lines.len());
        }
    }
    for (t, step) in trace.schedule.iter().enumerate() {
        if step.kind != MacrostepKind::Resolution {
            continue;
        }
        let x = step.pivot;
        let phi = &trace.formulas[t];
        let pos: Vec<&Clause> = phi
            .iter()
            .map(|(c, _)| c)
            .filter(|c| c.count(Literal::pos(x)) > 0)
            .collect();
        let neg: Vec<&Clause> = phi
            .iter()
            .map(|(c, _)| c)
            .filter(|c| c.count(Literal::neg(x)) > 0)
            .collect();
        for cp in &pos {
            for cn in &neg {
                let res = set_clause(&resolvent(cp, cn, x));
                if res.is_tautology() || index.contains_key(&res) {
                    continue;
                }
                let a1 = index[&set_clause(cp)];
                let a2 = index[&set_clause(cn)];
                lines.push(format!("r {} {} {} {}", a1, a2, x, clause_lits(&res)));
                index.insert(res, lines.len());
            }
        }
    }
    if !index.contains_key(&Clause::empty()) {
        return Err(ProofError::NoEmptyClause);
    }
    let mut out = lines.join("\n");
    out.push('\n');
    Ok(out)
}

fn parse_lits(line_no: usize, parts: &[&str]) -> Result<Clause, ProofError> {
    let mut lits = Vec::new();
    let mut terminated = false;
    for p in parts {
        let v: i64 = p
            .parse()
            .map_err(|_| ProofError::Malformed(line_no, format!("bad literal {p:?}")))?;
        if v == 0 {
            terminated = true;
            break;
        }
        lits.push(Literal::from_dimacs(v));
    }
    if !terminated {
        return Err(ProofError::Malformed(line_no, "missing 0 terminator".into()));
    }
    Ok(Clause::from_literals(lits))
}

/// Check a resolution refutation against the formula it claims to refute.
/// Every step is recomputed; returns the number of resolution lines.
pub fn check_resolution_trace(text: &str, phi0: &Formula) -> Result<usize, ProofError> {
    let inputs: std::collections::HashSet<Clause> =
        phi0.iter().map(|(c, _)| set_clause(c)).collect();
    let mut clauses: Vec<Clause> = Vec::new();
    let mut resolutions = 0usize;
    let mut derived_empty = false;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let parts: Vec<&str> = raw.split_whitespace().collect();
        if parts.is_empty() {
            continue;
        }
        match parts[0] {
            "i" => {
                let clause = parse_lits(line_no, &parts[1..])?;
                if !inputs.contains(&clause) {
                    return Err(ProofError::NotAnInputClause { line: line_no });
                }
                clauses.push(clause);
            }
            "r" => {
                if parts.len() < 5 {
                    return Err(ProofError::Malformed(line_no, "too few fields".into()));
                }
                let a1: usize = parts[1]
                    .parse()
                    .map_err(|_| ProofError::Malformed(line_no, "bad antecedent".into()))?;
                let a2: usize = parts[2]
                    .parse()
                    .map_err(|_| ProofError::Malformed(line_no, "bad antecedent".into()))?;
                let pivot: Var = parts[3]
                    .parse()
                    .map_err(|_| ProofError::Malformed(line_no, "bad pivot".into()))?;
                let stated = parse_lits(line_no, &parts[4..])?;
                for &a in &[a1, a2] {
                    if a == 0 || a > clauses.len() {
                        return Err(ProofError::BadAntecedent { line: line_no, index: a });
                    }
                }
                let (c1, c2) = (&clauses[a1 - 1], &clauses[a2 - 1]);
                if c1.count(Literal::pos(pivot)) != 1 || c2.count(Literal::neg(pivot)) != 1 {
                    return Err(ProofError::WrongResolvent { line: line_no });
                }
                let res = set_clause(&resolvent(c1, c2, pivot));
                if res != stated {
                    return Err(ProofError::WrongResolvent { line: line_no });
                }
                if stated.is_empty() {
                    derived_empty = true;
                }
                clauses.push(stated);
                resolutions += 1;
            }
            other => {
                return Err(ProofError::Malformed(line_no, format!("unknown tag {other:?}")))
            }
        }
    }
    if !derived_empty {
        return Err(ProofError::NoEmptyClause);
    }
    Ok(resolutions)
}

/// DRAT rendering of the same run: one addition per fresh resolvent, one
/// deletion per clause a step removes, terminated by the empty-clause line.
/// Meant for size comparisons; additions are resolvents, so the proof is
/// RUP-valid, but we only ever measure its byte size.
pub fn emit_drat(trace: &Trace) -> Result<String, ProofError> {
    if trace.verdict != Verdict::Unsatisfiable {
        return Err(ProofError::NotRefuted);
    }
    let mut out = String::new();
    for (t, step) in trace.schedule.iter().enumerate() {
        let before = &trace.formulas[t];
        let after = &trace.formulas[t + 1];
        if step.kind == MacrostepKind::Resolution {
            for (clause, _) in after.iter() {
                if before.multiplicity(clause) == 0u32.into() {
                    out.push_str(&clause_lits(&set_clause(clause)));
                    out.push('\n');
                }
            }
        }
        for (clause, _) in before.iter() {
            if after.multiplicity(clause) == 0u32.into() {
                out.push_str("d ");
                out.push_str(&clause_lits(&set_clause(clause)));
                out.push('\n');
            }
        }
    }
    out.push_str("0\n");
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub policies: Vec<OrderPolicy>,
    pub prime_bits: u32,
    pub repetitions: u32,
    pub seed: u64,
    pub timeout: Duration,
    /// Also emit and measure resolution/DRAT proofs per instance.
    pub emit_proofs: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            policies: vec![OrderPolicy::Lexi, OrderPolicy::Greedy, OrderPolicy::Unit],
            prime_bits: 62,
            repetitions: 1,
            seed: 1,
            timeout: Duration::from_secs(60),
            emit_proofs: true,
        }
    }
}

/// One CSV row; `None` measurements mean the run was censored by timeout.
#[derive(Debug, Clone)]
pub struct ExperimentRow {
    pub instance: String,
    pub policy: &'static str,
    pub n: u32,
    pub clauses: usize,
    pub k: usize,
    pub verdict: String,
    pub dp_ms: Option<f64>,
    pub prover_ms: Option<f64>,
    pub verifier_ms: Option<f64>,
    pub p2v_bytes: Option<u64>,
    pub v2p_bytes: Option<u64>,
    pub res_trace_bytes: Option<u64>,
    pub drat_bytes: Option<u64>,
    pub repetitions: u32,
    pub q_bits: u32,
    pub seed: u64,
}

pub const CSV_HEADER: &str = "instance,policy,n,clauses,k,verdict,dp_ms,prover_ms,verifier_ms,\
p2v_bytes,v2p_bytes,res_trace_bytes,drat_bytes,repetitions,q_bits,seed";

fn csv_opt<T: std::fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map(|x| x.to_string()).unwrap_or_default()
}

impl ExperimentRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.instance,
            self.policy,
            self.n,
            self.clauses,
            self.k,
            self.verdict,
            csv_opt(&self.dp_ms.map(|v| format!("{v:.3}"))),
            csv_opt(&self.prover_ms.map(|v| format!("{v:.3}"))),
            csv_opt(&self.verifier_ms.map(|v| format!("{v:.3}"))),
            csv_opt(&self.p2v_bytes),
            csv_opt(&self.v2p_bytes),
            csv_opt(&self.res_trace_bytes),
            csv_opt(&self.drat_bytes),
            self.repetitions,
            self.q_bits,
            self.seed,
        )
    }
}

pub fn rows_to_csv(rows: &[ExperimentRow]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for row in rows {
        s.push_str(&row.to_csv());
        s.push('\n');
    }
    s
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

/// Run every (instance, policy) pair: decide, certify, optionally measure
/// proof sizes. Timed-out runs produce censored rows instead of aborting.
pub fn run_experiment(instances: &[(String, Formula)], cfg: &ExperimentConfig) -> Vec<ExperimentRow> {
    let mut rows = Vec::new();
    for (name, raw) in instances {
        let phi = raw.preprocess();
        for policy in &cfg.policies {
            let mut row = ExperimentRow {
                instance: name.clone(),
                policy: policy.name(),
                n: phi.num_vars(),
                clauses: phi.num_distinct_clauses(),
                k: 0,
                verdict: String::new(),
                dp_ms: None,
                prover_ms: None,
                verifier_ms: None,
                p2v_bytes: None,
                v2p_bytes: None,
                res_trace_bytes: None,
                drat_bytes: None,
                repetitions: cfg.repetitions,
                q_bits: cfg.prime_bits,
                seed: cfg.seed,
            };
            let deadline = Instant::now() + cfg.timeout;
            let t0 = Instant::now();
            let order = choose_order(&phi, *policy);
            let trace = match run_with_deadline(&phi, &order, Some(deadline)) {
                Ok(t) => t,
                Err(_) => {
                    row.verdict = "timeout".into();
                    rows.push(row);
                    continue;
                }
            };
            row.dp_ms = Some(ms(t0.elapsed()));
            row.k = trace.rounds();
            row.verdict = match trace.verdict {
                Verdict::Satisfiable => "sat".into(),
                Verdict::Unsatisfiable => "unsat".into(),
            };
            if trace.verdict == Verdict::Unsatisfiable {
                let params = ProtocolParams {
                    prime_bits: cfg.prime_bits,
                    repetitions: cfg.repetitions,
                    ..Default::default()
                };
                let report = run_protocol(
                    &trace,
                    ProverKind::Honest,
                    &params,
                    cfg.seed,
                    cfg.seed.wrapping_add(1),
                )
                .expect("unsat trace certifies");
                assert_eq!(report.outcome, Outcome::Accept);
                row.prover_ms = Some(ms(report.metrics.prover_time));
                row.verifier_ms = Some(ms(report.metrics.verifier_time));
                row.p2v_bytes = Some(report.metrics.p2v_bytes);
                row.v2p_bytes = Some(report.metrics.v2p_bytes);
                if cfg.emit_proofs {
                    let res = emit_resolution_trace(&trace).expect("refutation exists");
                    debug_assert!(check_resolution_trace(&res, trace.initial()).is_ok());
                    row.res_trace_bytes = Some(res.len() as u64);
                    let drat = emit_drat(&trace).expect("refutation exists");
                    row.drat_bytes = Some(drat.len() as u64);
                }
            }
            rows.push(row);
        }
    }
    rows
}
