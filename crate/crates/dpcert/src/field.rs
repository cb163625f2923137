//! Prime field arithmetic over F_q for q < 2^63, deterministic primality
//! testing, and protocol prime selection.

use num_bigint::BigUint;
use num_traits::Zero;
use rand::Rng;

/// A prime field F_q with 3 ≤ q < 2^63. Elements are plain `u64` values,
/// always reduced mod q; the field object carries the modulus.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrimeField {
    q: u64,
}

impl PrimeField {
    pub fn new(q: u64) -> Self {
        assert!(is_prime(q), "modulus must be prime");
        Self::with_modulus(q)
    }

    /// Construct without the primality check. Replay and attack harnesses
    /// pin the modulus, and every operation the protocol uses (add, mul,
    /// pow) is well defined mod any q; only `inv` needs primality.
    pub fn with_modulus(q: u64) -> Self {
        assert!((3..(1 << 63)).contains(&q), "modulus out of range");
        PrimeField { q }
    }

    pub fn modulus(&self) -> u64 {
        self.q
    }

    pub fn reduce(&self, v: u64) -> u64 {
        v % self.q
    }

    pub fn reduce_big(&self, v: &BigUint) -> u64 {
        let m = v % BigUint::from(self.q);
        m.iter_u64_digits().next().unwrap_or(0)
    }

    pub fn add(&self, a: u64, b: u64) -> u64 {
        debug_assert!(a < self.q && b < self.q);
        let s = a + b; // q < 2^63, no overflow
        if s >= self.q {
            s - self.q
        } else {
            s
        }
    }

    pub fn sub(&self, a: u64, b: u64) -> u64 {
        debug_assert!(a < self.q && b < self.q);
        if a >= b {
            a - b
        } else {
            a + self.q - b
        }
    }

    pub fn neg(&self, a: u64) -> u64 {
        debug_assert!(a < self.q);
        if a == 0 {
            0
        } else {
            self.q - a
        }
    }

    pub fn mul(&self, a: u64, b: u64) -> u64 {
        debug_assert!(a < self.q && b < self.q);
        ((a as u128 * b as u128) % self.q as u128) as u64
    }

    pub fn pow(&self, mut base: u64, mut exp: u64) -> u64 {
        let mut acc = 1u64 % self.q;
        base %= self.q;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            exp >>= 1;
        }
        acc
    }

    pub fn inv(&self, a: u64) -> u64 {
        assert!(!a.is_multiple_of(self.q), "zero has no inverse");
        self.pow(a, self.q - 2)
    }

    /// Uniform field element.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> u64 {
        rng.gen_range(0..self.q)
    }
}

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1u64 % m;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Deterministic Miller-Rabin. The witness set {2,3,5,7,11,13,17,19,23,29,31,37}
/// is exact for all m < 2^64 (Sorenson & Webster).
pub fn is_prime(m: u64) -> bool {
    if m < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if m == p {
            return true;
        }
        if m.is_multiple_of(p) {
            return false;
        }
    }
    let d = (m - 1) >> (m - 1).trailing_zeros();
    let s = (m - 1).trailing_zeros();
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = pow_mod(a, d, m);
        if x == 1 || x == m - 1 {
            continue;
        }
        for _ in 0..s - 1 {
            x = mul_mod(x, x, m);
            if x == m - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Sample a prime uniformly from [2^bits, 2^{bits+1}) by rejection over odd
/// candidates. Seed-deterministic given the rng.
pub fn sample_prime<R: Rng>(bits: u32, rng: &mut R) -> u64 {
    assert!((3..=62).contains(&bits), "bits must be in 3..=62");
    let lo = 1u64 << bits;
    let hi = 1u64 << (bits + 1);
    loop {
        let candidate = rng.gen_range(lo..hi) | 1;
        if is_prime(candidate) {
            return candidate;
        }
    }
}

/// Pick a protocol prime q of the requested bit length such that the final
/// □-multiplicity is nonzero mod q, redrawing on failure. Returns the field
/// and the number of redraws.
pub fn pick_protocol_prime<R: Rng>(
    final_multiplicity: &BigUint,
    bits: u32,
    rng: &mut R,
) -> (PrimeField, u32) {
    assert!(
        !final_multiplicity.is_zero(),
        "nothing to certify: final multiplicity is zero"
    );
    let mut redraws = 0;
    loop {
        let q = sample_prime(bits, rng);
        if (final_multiplicity % BigUint::from(q)) != BigUint::zero() {
            return (PrimeField::new(q), redraws);
        }
        redraws += 1;
    }
}
