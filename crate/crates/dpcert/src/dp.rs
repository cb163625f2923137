//! The Davis-Putnam resolution procedure: full x-resolution and full
//! x-cleanup macrosteps, the fixed macrostep schedule, variable-ordering
//! policies, and trace recording.

use std::time::Instant;

use num_bigint::{BigInt, BigUint};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::formula::{resolvent, Clause, Formula, Literal, Var};

/// One macrostep of the schedule: full resolution or full cleanup on a pivot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MacrostepKind {
    Resolution,
    Cleanup,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Macrostep {
    pub kind: MacrostepKind,
    pub pivot: Var,
}

/// Variable-ordering policy for the procedure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrderPolicy {
    /// Identity order 1..n.
    Lexi,
    /// Seed-deterministic uniform permutation.
    Random(u64),
    /// At each resolution step, pick the unresolved variable minimizing the
    /// clause-count delta of full resolution; ties break to the lowest index.
    Greedy,
    /// Pick a unit-clause variable when one exists, otherwise greedy.
    Unit,
}

impl OrderPolicy {
    pub fn name(&self) -> &'static str {
        match self {
            OrderPolicy::Lexi => "lexi",
            OrderPolicy::Random(_) => "random",
            OrderPolicy::Greedy => "greedy",
            OrderPolicy::Unit => "unit",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Satisfiable,
    Unsatisfiable,
}

/// The full run record: every intermediate formula plus the schedule that
/// produced it. The prover replays these backwards during certification.
#[derive(Debug, Clone)]
pub struct Trace {
    pub formulas: Vec<Formula>,
    pub schedule: Vec<Macrostep>,
    pub order: Vec<Var>,
    pub verdict: Verdict,
}

impl Trace {
    pub fn num_vars(&self) -> Var {
        self.formulas[0].num_vars()
    }

    pub fn rounds(&self) -> usize {
        self.schedule.len()
    }

    pub fn initial(&self) -> &Formula {
        &self.formulas[0]
    }

    pub fn last(&self) -> &Formula {
        self.formulas.last().unwrap()
    }

    /// Debug dump: one section per step with the formula contents.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for (i, step) in self.schedule.iter().enumerate() {
            let kind = match step.kind {
                MacrostepKind::Resolution => "R",
                MacrostepKind::Cleanup => "C",
            };
            s.push_str(&format!("step {} {} {}\n", i + 1, kind, step.pivot));
            s.push_str(&self.formulas[i + 1].dump());
        }
        s
    }
}

#[derive(Debug, Error)]
pub enum DpError {
    #[error("order is not a permutation of 1..{0}")]
    NotAPermutation(Var),
    #[error("timeout exceeded")]
    Timeout,
}

/// Full x-resolution R_x: add the resolvent of every (C1 ∋ x, C2 ∋ ¬x) pair,
/// then drop every clause mentioning x. Requires C(x) + C(¬x) ≤ 1 for every
/// clause. Resolvent multiplicities multiply.
pub fn full_resolution(phi: &Formula, x: Var) -> Formula {
    let pos = Literal::pos(x);
    let neg = Literal::neg(x);
    let mut with_pos: Vec<(&Clause, &BigUint)> = Vec::new();
    let mut with_neg: Vec<(&Clause, &BigUint)> = Vec::new();
    let mut out = Formula::new(phi.num_vars());
    for (clause, mult) in phi.iter() {
        let cx = clause.count(pos) + clause.count(neg);
        assert!(cx <= 1, "full resolution requires C(x)+C(¬x) ≤ 1");
        if clause.count(pos) == 1 {
            with_pos.push((clause, mult));
        } else if clause.count(neg) == 1 {
            with_neg.push((clause, mult));
        } else {
            out.add_clause(clause.clone(), mult.clone());
        }
    }
    for (c1, m1) in &with_pos {
        for (c2, m2) in &with_neg {
            out.add_clause(resolvent(c1, c2, x), *m1 * *m2);
        }
    }
    out
}

/// Full x-cleanup C_x: drop clauses containing both x and ¬x, cap the counts
/// of x and ¬x at 1 in the rest. Requires C(x) + C(¬x) ≤ 2 for every clause.
pub fn full_cleanup(phi: &Formula, x: Var) -> Formula {
    let pos = Literal::pos(x);
    let neg = Literal::neg(x);
    let mut out = Formula::new(phi.num_vars());
    for (clause, mult) in phi.iter() {
        let cp = clause.count(pos);
        let cn = clause.count(neg);
        assert!(cp + cn <= 2, "full cleanup requires C(x)+C(¬x) ≤ 2");
        if cp > 0 && cn > 0 {
            continue;
        }
        if cp > 1 || cn > 1 {
            let mut c = clause.clone();
            c.remove(pos, cp.saturating_sub(1));
            c.remove(neg, cn.saturating_sub(1));
            out.add_clause(c, mult.clone());
        } else {
            out.add_clause(clause.clone(), mult.clone());
        }
    }
    out
}

/// The macrostep schedule for a permutation π:
/// R_{π1}, C_{π2}..C_{πn}, R_{π2}, C_{π3}..C_{πn}, ..., R_{πn}.
/// Length n(n+1)/2; depends only on π, so both parties derive it locally.
pub fn build_schedule(order: &[Var]) -> Result<Vec<Macrostep>, DpError> {
    let n = order.len() as Var;
    validate_permutation(order, n)?;
    let mut schedule = Vec::with_capacity(n as usize * (n as usize + 1) / 2);
    for i in 0..order.len() {
        schedule.push(Macrostep {
            kind: MacrostepKind::Resolution,
            pivot: order[i],
        });
        for &later in &order[i + 1..] {
            schedule.push(Macrostep {
                kind: MacrostepKind::Cleanup,
                pivot: later,
            });
        }
    }
    Ok(schedule)
}

pub fn validate_permutation(order: &[Var], n: Var) -> Result<(), DpError> {
    if order.len() != n as usize {
        return Err(DpError::NotAPermutation(n));
    }
    let mut seen = vec![false; n as usize];
    for &v in order {
        if v < 1 || v > n || seen[v as usize - 1] {
            return Err(DpError::NotAPermutation(n));
        }
        seen[v as usize - 1] = true;
    }
    Ok(())
}

/// Clause-count delta of R_x: n_x·n_{¬x} − n_x − n_{¬x}, with clause counts
/// taken with multiplicity.
fn resolution_delta(phi: &Formula, x: Var) -> BigInt {
    let pos = Literal::pos(x);
    let neg = Literal::neg(x);
    let mut n_pos = BigUint::default();
    let mut n_neg = BigUint::default();
    for (clause, mult) in phi.iter() {
        if clause.count(pos) > 0 {
            n_pos += mult;
        } else if clause.count(neg) > 0 {
            n_neg += mult;
        }
    }
    let p = BigInt::from(n_pos);
    let n = BigInt::from(n_neg);
    &p * &n - p - n
}

/// Pick the pivot permutation for a policy. Greedy and unit simulate the
/// procedure once, committing the whole permutation up front.
pub fn choose_order(phi: &Formula, policy: OrderPolicy) -> Vec<Var> {
    let n = phi.num_vars();
    match policy {
        OrderPolicy::Lexi => (1..=n).collect(),
        OrderPolicy::Random(seed) => {
            let mut order: Vec<Var> = (1..=n).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            order.shuffle(&mut rng);
            order
        }
        OrderPolicy::Greedy => simulate_order(phi, false),
        OrderPolicy::Unit => simulate_order(phi, true),
    }
}

fn simulate_order(phi: &Formula, unit_rule: bool) -> Vec<Var> {
    let n = phi.num_vars();
    let mut remaining: Vec<Var> = (1..=n).collect();
    let mut order = Vec::with_capacity(n as usize);
    let mut current = phi.clone();
    while !remaining.is_empty() {
        let pick = if unit_rule {
            lowest_unit_variable(&current, &remaining)
        } else {
            None
        };
        let pivot = pick.unwrap_or_else(|| {
            *remaining
                .iter()
                .min_by_key(|&&v| resolution_delta(&current, v))
                .unwrap()
        });
        order.push(pivot);
        remaining.retain(|&v| v != pivot);
        current = full_resolution(&current, pivot);
        for &v in &remaining {
            current = full_cleanup(&current, v);
        }
    }
    order
}

fn lowest_unit_variable(phi: &Formula, remaining: &[Var]) -> Option<Var> {
    phi.iter()
        .filter(|(c, _)| c.len() == 1)
        .map(|(c, _)| c.distinct_literals().next().unwrap().var)
        .filter(|v| remaining.contains(v))
        .min()
}

/// Run the procedure with a fixed pivot permutation, recording every
/// intermediate formula. The formula must be preprocessed (a set of sets).
pub fn run(phi: &Formula, order: &[Var]) -> Result<Trace, DpError> {
    run_with_deadline(phi, order, None)
}

pub fn run_with_deadline(
    phi: &Formula,
    order: &[Var],
    deadline: Option<Instant>,
) -> Result<Trace, DpError> {
    let schedule = build_schedule(order)?;
    let mut formulas = Vec::with_capacity(schedule.len() + 1);
    formulas.push(phi.clone());
    for step in &schedule {
        if let Some(d) = deadline {
            if Instant::now() > d {
                return Err(DpError::Timeout);
            }
        }
        let prev = formulas.last().unwrap();
        let next = match step.kind {
            MacrostepKind::Resolution => full_resolution(prev, step.pivot),
            MacrostepKind::Cleanup => full_cleanup(prev, step.pivot),
        };
        formulas.push(next);
    }
    let verdict = if formulas.last().unwrap().contains_empty_clause() {
        Verdict::Unsatisfiable
    } else {
        Verdict::Satisfiable
    };
    Ok(Trace {
        formulas,
        schedule,
        order: order.to_vec(),
        verdict,
    })
}

/// Convenience: preprocess, choose order, run.
pub fn solve(phi: &Formula, policy: OrderPolicy) -> Result<Trace, DpError> {
    let pre = phi.preprocess();
    let order = choose_order(&pre, policy);
    run(&pre, &order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse_dimacs;
    use num_bigint::BigUint;

    fn clause(lits: &[i64]) -> Clause {
        Clause::from_literals(lits.iter().map(|&l| Literal::from_dimacs(l)))
    }

    /// The worked three-variable example: x=1, y=2, z=3.
    pub(crate) fn example_formula() -> Formula {
        let text = "p cnf 3 6\n1 2 0\n1 -2 -3 0\n-1 -3 0\n-1 -2 -3 0\n2 3 0\n-2 3 0\n";
        parse_dimacs(text.as_bytes()).unwrap().formula
    }

    fn counted(entries: &[(&[i64], u64)]) -> Formula {
        let mut f = Formula::new(3);
        for (lits, mult) in entries {
            let mut c = Clause::empty();
            for &l in lits.iter() {
                c.insert(Literal::from_dimacs(l), 1);
            }
            f.add_clause(c, BigUint::from(*mult));
        }
        f
    }

    #[test]
    fn worked_example_replay() {
        let phi = example_formula().preprocess();
        let trace = run(&phi, &[1, 2, 3]).unwrap();
        assert_eq!(trace.rounds(), 6);

        // φ_1 = R_x: {{y,¬z},{y,¬y,¬z},{¬y,¬z,¬z},{¬y,¬z,¬y,¬z},{y,z},{¬y,z}}
        let phi1 = counted(&[
            (&[2, -3], 1),
            (&[2, -2, -3], 1),
            (&[-2, -3, -3], 1),
            (&[-2, -3, -2, -3], 1),
            (&[2, 3], 1),
            (&[-2, 3], 1),
        ]);
        assert_eq!(trace.formulas[1], phi1);

        // φ_2 = C_y: {{y,¬z}, 2·{¬y,¬z,¬z}, {y,z}, {¬y,z}}
        let phi2 = counted(&[(&[2, -3], 1), (&[-2, -3, -3], 2), (&[2, 3], 1), (&[-2, 3], 1)]);
        assert_eq!(trace.formulas[2], phi2);

        // φ_3 = C_z: {{y,¬z}, 2·{¬y,¬z}, {y,z}, {¬y,z}}
        let phi3 = counted(&[(&[2, -3], 1), (&[-2, -3], 2), (&[2, 3], 1), (&[-2, 3], 1)]);
        assert_eq!(trace.formulas[3], phi3);

        // φ_4 = R_y: {2·{¬z,¬z}, 3·{¬z,z}, {z,z}}
        let phi4 = counted(&[(&[-3, -3], 2), (&[-3, 3], 3), (&[3, 3], 1)]);
        assert_eq!(trace.formulas[4], phi4);

        // φ_5 = C_z: {2·{¬z}, {z}}
        let phi5 = counted(&[(&[-3], 2), (&[3], 1)]);
        assert_eq!(trace.formulas[5], phi5);

        // φ_6 = R_z: {2·□}
        assert_eq!(
            trace.formulas[6].empty_clause_multiplicity(),
            BigUint::from(2u32)
        );
        assert_eq!(trace.formulas[6].num_distinct_clauses(), 1);
        assert_eq!(trace.verdict, Verdict::Unsatisfiable);
    }

    #[test]
    fn resolution_single_pair_gives_empty_clause() {
        let mut phi = Formula::new(1);
        phi.add_clause_once(clause(&[1]));
        phi.add_clause_once(clause(&[-1]));
        let r = full_resolution(&phi, 1);
        assert_eq!(r.empty_clause_multiplicity(), BigUint::from(1u32));
        assert_eq!(r.num_distinct_clauses(), 1);
    }

    #[test]
    fn resolution_absent_pivot_is_noop() {
        let mut phi = Formula::new(3);
        phi.add_clause_once(clause(&[2, 3]));
        assert_eq!(full_resolution(&phi, 1), phi);
    }

    #[test]
    fn cleanup_removes_tautology() {
        let mut phi = Formula::new(1);
        phi.add_clause_once(clause(&[1, -1]));
        assert!(full_cleanup(&phi, 1).is_empty());
    }

    #[test]
    fn schedule_shape() {
        let s = build_schedule(&[1, 2, 3]).unwrap();
        let expect = [
            (MacrostepKind::Resolution, 1),
            (MacrostepKind::Cleanup, 2),
            (MacrostepKind::Cleanup, 3),
            (MacrostepKind::Resolution, 2),
            (MacrostepKind::Cleanup, 3),
            (MacrostepKind::Resolution, 3),
        ];
        assert_eq!(s.len(), 6);
        for (step, (kind, pivot)) in s.iter().zip(expect) {
            assert_eq!(step.kind, kind);
            assert_eq!(step.pivot, pivot);
        }

        assert_eq!(build_schedule(&[1]).unwrap().len(), 1);

        let s2 = build_schedule(&[2, 1]).unwrap();
        assert_eq!(s2.len(), 3);
        assert_eq!(s2[0].pivot, 2);
        assert_eq!(s2[1].pivot, 1);
        assert_eq!(s2[2].pivot, 1);

        assert!(build_schedule(&[1, 1]).is_err());
        assert!(build_schedule(&[2, 3]).is_err());
    }

    #[test]
    fn lexi_and_random_orders() {
        let phi = example_formula().preprocess();
        assert_eq!(choose_order(&phi, OrderPolicy::Lexi), vec![1, 2, 3]);
        let a = choose_order(&phi, OrderPolicy::Random(9));
        let b = choose_order(&phi, OrderPolicy::Random(9));
        assert_eq!(a, b);
        validate_permutation(&a, 3).unwrap();
    }

    #[test]
    fn greedy_picks_minimal_delta() {
        // {{x1},{¬x1},{x2,x3}}: Δ_{x1} = 1·1−1−1 = −1, ties broken low.
        let mut phi = Formula::new(3);
        phi.add_clause_once(clause(&[1]));
        phi.add_clause_once(clause(&[-1]));
        phi.add_clause_once(clause(&[2, 3]));
        let order = choose_order(&phi, OrderPolicy::Greedy);
        assert_eq!(order[0], 1);
    }

    #[test]
    fn unit_rule_fires_first() {
        // {{x2},{x1,¬x3}} → first pivot is x2
        let mut phi = Formula::new(3);
        phi.add_clause_once(clause(&[2]));
        phi.add_clause_once(clause(&[1, -3]));
        let order = choose_order(&phi, OrderPolicy::Unit);
        assert_eq!(order[0], 2);
    }

    #[test]
    fn single_positive_unit_is_satisfiable() {
        let mut phi = Formula::new(1);
        phi.add_clause_once(clause(&[1]));
        let trace = run(&phi, &[1]).unwrap();
        assert!(trace.formulas[1].is_empty());
        assert_eq!(trace.verdict, Verdict::Satisfiable);
    }

    #[test]
    fn degenerate_no_clauses_no_vars() {
        let phi = Formula::new(0);
        let trace = run(&phi, &[]).unwrap();
        assert_eq!(trace.rounds(), 0);
        assert_eq!(trace.verdict, Verdict::Satisfiable);
    }

    #[test]
    fn verdict_matches_brute_force_small_random() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..60 {
            let n = rng.gen_range(1..=5u32);
            let m = rng.gen_range(0..=10u32);
            let phi = crate::bench::gen_random_kcnf(n, m, n.min(3), rng.gen());
            let pre = phi.preprocess();
            let trace = run(&pre, &choose_order(&pre, OrderPolicy::Lexi)).unwrap();
            let expect = if phi.brute_force_satisfiable() {
                Verdict::Satisfiable
            } else {
                Verdict::Unsatisfiable
            };
            assert_eq!(trace.verdict, expect, "formula:\n{}", phi.dump());
        }
    }

    #[test]
    fn multiplicity_growth_bounded_by_square() {
        let phi = example_formula().preprocess();
        let trace = run(&phi, &[1, 2, 3]).unwrap();
        for (i, step) in trace.schedule.iter().enumerate() {
            if step.kind == MacrostepKind::Resolution {
                let before = trace.formulas[i].num_clauses();
                let after = trace.formulas[i + 1].num_clauses();
                assert!(after <= &before * &before);
            }
        }
    }
}
