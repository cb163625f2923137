//! The non-standard arithmetisation used by the protocol: positive literals
//! map to 1−x, negative literals to x³, conjunction to + and disjunction
//! to ·, so a binary assignment satisfies a formula exactly when the
//! polynomial evaluates to 0. This module evaluates the map over F_q or the
//! integers, partially evaluates it down to a univariate polynomial in a
//! pivot variable, and implements the round maps that simulate the two
//! macrosteps on polynomials.

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::field::PrimeField;
use crate::formula::{Assignment, Formula, Var};

pub const MAX_DEGREE: usize = 6;

/// Dense degree-≤6 univariate polynomial over F_q, low coefficients first.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UnivariatePoly {
    pub coeffs: [u64; 7],
}

impl UnivariatePoly {
    pub fn constant(c: u64) -> Self {
        UnivariatePoly {
            coeffs: [c, 0, 0, 0, 0, 0, 0],
        }
    }

    pub fn degree(&self) -> usize {
        (0..7).rev().find(|&d| self.coeffs[d] != 0).unwrap_or(0)
    }
}

/// Which coefficient pattern an honest round polynomial may have.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapeKind {
    /// Before a resolution step every clause has C(x)+C(¬x) ≤ 1, so only
    /// degrees {0, 1, 3} occur.
    Resolution,
    /// Before a cleanup step C(x)+C(¬x) ≤ 2; degrees {0,1,2,3,4,6} occur,
    /// but never x^5.
    Cleanup,
}

/// True iff nonzero coefficients occur only at degrees an honest prover can
/// produce for the macrostep kind.
pub fn shape_check(p: &UnivariatePoly, kind: ShapeKind) -> bool {
    match kind {
        ShapeKind::Resolution => {
            p.coeffs[2] == 0 && p.coeffs[4] == 0 && p.coeffs[5] == 0 && p.coeffs[6] == 0
        }
        ShapeKind::Cleanup => p.coeffs[5] == 0,
    }
}

/// The resolution round map: a₃x³ + a₁x + a₀ ↦ −a₃a₁ + a₁ + a₀ (constant).
pub fn gamma(p: &UnivariatePoly, f: &PrimeField) -> UnivariatePoly {
    gamma_metered(p, f, &mut 0)
}

pub fn gamma_metered(p: &UnivariatePoly, f: &PrimeField, ops: &mut u64) -> UnivariatePoly {
    debug_assert!(shape_check(p, ShapeKind::Resolution));
    let a0 = p.coeffs[0];
    let a1 = p.coeffs[1];
    let a3 = p.coeffs[3];
    let c = f.add(f.sub(a1, f.mul(a3, a1)), a0);
    *ops += 3;
    UnivariatePoly::constant(c)
}

/// The cleanup round map:
/// a₆x⁶ + ⋯ + a₀ ↦ (a₆+a₄+a₃)x³ + (a₂+a₁)x + a₀. Requires a₅ = 0.
pub fn delta(p: &UnivariatePoly, f: &PrimeField) -> UnivariatePoly {
    delta_metered(p, f, &mut 0)
}

pub fn delta_metered(p: &UnivariatePoly, f: &PrimeField, ops: &mut u64) -> UnivariatePoly {
    debug_assert!(shape_check(p, ShapeKind::Cleanup));
    let a = &p.coeffs;
    let cubic = f.add(f.add(a[6], a[4]), a[3]);
    let linear = f.add(a[2], a[1]);
    *ops += 3;
    UnivariatePoly {
        coeffs: [a[0], linear, 0, cubic, 0, 0, 0],
    }
}

/// Horner evaluation over F_q.
pub fn eval_poly(p: &UnivariatePoly, r: u64, f: &PrimeField) -> u64 {
    eval_poly_metered(p, r, f, &mut 0)
}

pub fn eval_poly_metered(p: &UnivariatePoly, r: u64, f: &PrimeField, ops: &mut u64) -> u64 {
    let mut acc = 0u64;
    for &c in p.coeffs.iter().rev() {
        acc = f.add(f.mul(acc, r), c);
        *ops += 2;
    }
    acc
}

fn literal_factor_mod(value: u64, negated: bool, f: &PrimeField, ops: &mut u64) -> u64 {
    if negated {
        *ops += 2;
        f.mul(f.mul(value, value), value)
    } else {
        *ops += 1;
        f.sub(1 % f.modulus(), value)
    }
}

/// Evaluate the arithmetisation of φ at a total assignment over F_q.
/// Single pass, O(total literal count) field operations.
pub fn eval_b(phi: &Formula, sigma: &Assignment, f: &PrimeField) -> u64 {
    eval_b_metered(phi, sigma, f, &mut 0)
}

pub fn eval_b_metered(phi: &Formula, sigma: &Assignment, f: &PrimeField, ops: &mut u64) -> u64 {
    let mut acc = 0u64;
    for (clause, mult) in phi.iter() {
        let mut term = f.reduce_big(mult);
        for (lit, count) in clause.iter() {
            let value = sigma
                .get(lit.var)
                .unwrap_or_else(|| panic!("assignment missing variable {}", lit.var));
            let factor = literal_factor_mod(value, lit.negated, f, ops);
            for _ in 0..count {
                term = f.mul(term, factor);
                *ops += 1;
            }
        }
        acc = f.add(acc, term);
        *ops += 1;
    }
    acc
}

/// Exact evaluation over the integers. Assignment values are read as
/// non-negative integers; the result can be negative. Test oracle for the
/// zero-means-satisfied property.
pub fn eval_b_int(phi: &Formula, sigma: &Assignment) -> BigInt {
    let mut acc = BigInt::zero();
    for (clause, mult) in phi.iter() {
        let mut term = BigInt::from(mult.clone());
        for (lit, count) in clause.iter() {
            let v = BigInt::from(
                sigma
                    .get(lit.var)
                    .unwrap_or_else(|| panic!("assignment missing variable {}", lit.var)),
            );
            let factor = if lit.negated {
                &v * &v * &v
            } else {
                BigInt::one() - &v
            };
            for _ in 0..count {
                term *= &factor;
            }
        }
        acc += term;
    }
    acc
}

/// Partially evaluate the arithmetisation of φ at σ, leaving the pivot
/// variable free. Every clause must satisfy C(x)+C(¬x) ≤ 2 for the pivot x,
/// which keeps the degree at 6.
pub fn partial_eval_b(
    phi: &Formula,
    sigma: &Assignment,
    pivot: Var,
    f: &PrimeField,
) -> UnivariatePoly {
    let mut coeffs = [0u64; 7];
    let mut ops = 0u64;
    for (clause, mult) in phi.iter() {
        let mut base = f.reduce_big(mult);
        let mut c_pos = 0u32;
        let mut c_neg = 0u32;
        for (lit, count) in clause.iter() {
            if lit.var == pivot {
                if lit.negated {
                    c_neg += count;
                } else {
                    c_pos += count;
                }
                continue;
            }
            let value = sigma
                .get(lit.var)
                .unwrap_or_else(|| panic!("assignment missing variable {}", lit.var));
            let factor = literal_factor_mod(value, lit.negated, f, &mut ops);
            for _ in 0..count {
                base = f.mul(base, factor);
            }
        }
        assert!(
            c_pos + c_neg <= 2,
            "pivot occurs more than twice in a clause"
        );
        // contribution of (1-x)^{c_pos} * x^{3*c_neg}
        match (c_pos, c_neg) {
            (0, 0) => add_at(&mut coeffs, 0, base, false, f),
            (1, 0) => {
                add_at(&mut coeffs, 0, base, false, f);
                add_at(&mut coeffs, 1, base, true, f);
            }
            (2, 0) => {
                add_at(&mut coeffs, 0, base, false, f);
                add_at(&mut coeffs, 1, f.add(base, base), true, f);
                add_at(&mut coeffs, 2, base, false, f);
            }
            (0, 1) => add_at(&mut coeffs, 3, base, false, f),
            (0, 2) => add_at(&mut coeffs, 6, base, false, f),
            (1, 1) => {
                add_at(&mut coeffs, 3, base, false, f);
                add_at(&mut coeffs, 4, base, true, f);
            }
            _ => unreachable!(),
        }
    }
    UnivariatePoly { coeffs }
}

fn add_at(coeffs: &mut [u64; 7], degree: usize, v: u64, negate: bool, f: &PrimeField) {
    let v = if negate { f.neg(v) } else { v };
    coeffs[degree] = f.add(coeffs[degree], v);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dp::{full_cleanup, full_resolution};
    use crate::formula::{parse_dimacs, Clause, Literal};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn example_formula() -> Formula {
        let text = "p cnf 3 6\n1 2 0\n1 -2 -3 0\n-1 -3 0\n-1 -2 -3 0\n2 3 0\n-2 3 0\n";
        parse_dimacs(text.as_bytes()).unwrap().formula
    }

    fn f15871() -> PrimeField {
        PrimeField::with_modulus(15871)
    }

    fn poly(f: &PrimeField, signed: [i64; 7]) -> UnivariatePoly {
        let q = f.modulus() as i64;
        let mut coeffs = [0u64; 7];
        for (i, &c) in signed.iter().enumerate() {
            coeffs[i] = c.rem_euclid(q) as u64;
        }
        UnivariatePoly { coeffs }
    }

    #[test]
    fn eval_b_worked_example() {
        // σ = {x↦2, y↦1, z↦3}: clause terms 0 − 27 + 216 + 216 + 0 − 2 = 403
        let f = f15871();
        let sigma = Assignment::total(vec![2, 1, 3]);
        assert_eq!(eval_b(&example_formula(), &sigma, &f), 403);
        assert_eq!(eval_b_int(&example_formula(), &sigma), BigInt::from(403));
    }

    #[test]
    fn eval_b_satisfied_clause_is_zero() {
        let f = f15871();
        let phi = parse_dimacs("p cnf 2 1\n1 2 0\n".as_bytes()).unwrap().formula;
        let sigma = Assignment::total(vec![1, 0]);
        assert_eq!(eval_b(&phi, &sigma, &f), 0);
    }

    #[test]
    fn eval_b_empty_clauses() {
        // {2·□}: the empty product is 1, so the value is the multiplicity
        let f = f15871();
        let mut phi = Formula::new(3);
        phi.add_clause(Clause::empty(), 2u32.into());
        let sigma = Assignment::total(vec![5, 6, 7]);
        assert_eq!(eval_b(&phi, &sigma, &f), 2);
    }

    #[test]
    fn partial_eval_last_round() {
        // φ_5 = {2·{¬z}, {z}} at σ' = {x↦3, y↦4} → 2z³ − z + 1
        let f = f15871();
        let mut phi = Formula::new(3);
        phi.add_clause(Clause::from_literals([Literal::neg(3)]), 2u32.into());
        phi.add_clause_once(Clause::from_literals([Literal::pos(3)]));
        let mut sigma = Assignment::total(vec![3, 4, 0]);
        sigma.unset(3);
        let p = partial_eval_b(&phi, &sigma, 3, &f);
        assert_eq!(p, poly(&f, [1, -1, 0, 2, 0, 0, 0]));
    }

    #[test]
    fn partial_eval_degree_six_round() {
        // φ_1 of the worked example at σ' = {x↦3, z↦3}, pivot y
        // → 729y⁶ − 27y⁴ + 754y³ − 25y + 25
        let f = f15871();
        let phi1 = full_resolution(&example_formula().preprocess(), 1);
        let mut sigma = Assignment::total(vec![3, 0, 3]);
        sigma.unset(2);
        let p = partial_eval_b(&phi1, &sigma, 2, &f);
        assert_eq!(p, poly(&f, [25, -25, 0, 754, -27, 0, 729]));
    }

    #[test]
    fn partial_eval_absent_pivot_is_constant() {
        let f = f15871();
        let phi = parse_dimacs("p cnf 3 1\n2 3 0\n".as_bytes()).unwrap().formula;
        let sigma = Assignment::total(vec![9, 5, 7]).without(1);
        let p = partial_eval_b(&phi, &sigma, 1, &f);
        let full = Assignment::total(vec![123, 5, 7]);
        assert_eq!(p, UnivariatePoly::constant(eval_b(&phi, &full, &f)));
    }

    #[test]
    fn gamma_table_values() {
        let f = f15871();
        assert_eq!(
            gamma(&poly(&f, [1, -1, 0, 2, 0, 0, 0]), &f),
            UnivariatePoly::constant(2)
        );
        assert_eq!(
            gamma(&poly(&f, [25, -27, 0, 54, 0, 0, 0]), &f),
            UnivariatePoly::constant(1456)
        );
        assert_eq!(
            gamma(&poly(&f, [7, -7, 0, 15, 0, 0, 0]), &f),
            UnivariatePoly::constant(105)
        );
    }

    #[test]
    fn delta_table_values() {
        let f = f15871();
        assert_eq!(
            delta(&poly(&f, [1, -2, 1, 3, -3, 0, 2]), &f),
            poly(&f, [1, -1, 0, 2, 0, 0, 0])
        );
        assert_eq!(
            delta(&poly(&f, [25, -25, 0, 754, -27, 0, 729]), &f),
            poly(&f, [25, -25, 0, 1456, 0, 0, 0])
        );
        assert_eq!(
            delta(&poly(&f, [7, -7, 0, -1, 0, 0, 16]), &f),
            poly(&f, [7, -7, 0, 15, 0, 0, 0])
        );
    }

    #[test]
    fn eval_poly_table_values() {
        let f = f15871();
        assert_eq!(eval_poly(&poly(&f, [1, -1, 0, 2, 0, 0, 0]), 4, &f), 125);
        assert_eq!(eval_poly(&poly(&f, [7, -7, 0, -1, 0, 0, 16]), 3, &f), 11623);
        assert_eq!(eval_poly(&UnivariatePoly::constant(42), 999, &f), 42);
    }

    #[test]
    fn shapes() {
        let f = f15871();
        assert!(shape_check(
            &poly(&f, [5, 3, 0, 9, 0, 0, 0]),
            ShapeKind::Resolution
        ));
        assert!(!shape_check(
            &poly(&f, [0, 0, 1, 0, 0, 0, 0]),
            ShapeKind::Resolution
        ));
        assert!(!shape_check(
            &poly(&f, [0, 0, 0, 0, 0, 1, 0]),
            ShapeKind::Cleanup
        ));
        assert!(shape_check(
            &poly(&f, [1, 1, 1, 1, 1, 0, 1]),
            ShapeKind::Cleanup
        ));
    }

    #[test]
    fn zero_means_satisfied_exhaustive_small() {
        // the zero-means-true property at every binary assignment
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..40 {
            let n = rng.gen_range(1..=5u32);
            let m = rng.gen_range(0..=8u32);
            let phi = crate::bench::gen_random_kcnf(n, m, n.min(3), rng.gen());
            for bits in 0u64..(1 << n) {
                let sigma = Assignment::total((0..n).map(|i| (bits >> i) & 1).collect());
                let satisfied = phi.iter().all(|(c, _)| {
                    c.distinct_literals()
                        .any(|l| (sigma.get(l.var).unwrap() == 1) != l.negated)
                });
                let value = eval_b_int(&phi, &sigma);
                assert_eq!(satisfied, value.is_zero());
            }
        }
    }

    #[test]
    fn compatibility_diagrams_random() {
        // pointwise commuting diagram for both macrosteps at random points
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..300 {
            let n = rng.gen_range(1..=5u32);
            let m = rng.gen_range(1..=8u32);
            let phi = crate::bench::gen_random_kcnf(n, m, n.min(3), rng.gen())
                .preprocess();
            let q = crate::field::sample_prime(rng.gen_range(8..=20), &mut rng);
            let f = PrimeField::new(q);
            let pivot = rng.gen_range(1..=n);
            let sigma = Assignment::total((0..n).map(|_| f.sample(&mut rng)).collect());
            let partial = sigma.without(pivot);
            let r = sigma.get(pivot).unwrap();

            let p = partial_eval_b(&phi, &partial, pivot, &f);
            let lhs = eval_poly(&gamma(&p, &f), r, &f);
            let rhs = eval_b(&full_resolution(&phi, pivot), &sigma, &f);
            assert_eq!(lhs, rhs, "resolution diagram failed");

            // exercise cleanup on a formula with duplicated pivot literals
            let doubled = full_resolution(&phi, pivot);
            for v in 1..=n {
                if v == pivot {
                    continue;
                }
                let partial_v = sigma.without(v);
                let rv = sigma.get(v).unwrap();
                let pv = partial_eval_b(&doubled, &partial_v, v, &f);
                let lhs = eval_poly(&delta(&pv, &f), rv, &f);
                let rhs = eval_b(&full_cleanup(&doubled, v), &sigma, &f);
                assert_eq!(lhs, rhs, "cleanup diagram failed");
            }
        }
    }

    #[test]
    fn partial_eval_is_additive_over_union() {
        let f = f15871();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..50 {
            let n = 4u32;
            let a = crate::bench::gen_random_kcnf(n, 4, 3, rng.gen());
            let b = crate::bench::gen_random_kcnf(n, 4, 3, rng.gen());
            let mut union = a.clone();
            for (c, m) in b.iter() {
                union.add_clause(c.clone(), m.clone());
            }
            let sigma = Assignment::total((0..n).map(|_| f.sample(&mut rng)).collect());
            let pivot = rng.gen_range(1..=n);
            let partial = sigma.without(pivot);
            let pa = partial_eval_b(&a, &partial, pivot, &f);
            let pb = partial_eval_b(&b, &partial, pivot, &f);
            let pu = partial_eval_b(&union, &partial, pivot, &f);
            for d in 0..7 {
                assert_eq!(pu.coeffs[d], f.add(pa.coeffs[d], pb.coeffs[d]));
            }
        }
    }
}
