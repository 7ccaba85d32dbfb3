//! Quadratic residues over `Z_p` for odd primes `p`.
//!
//! The direct constructions multiply base blocks through the squares `C_0^2`
//! (or a transversal `C_0^2 / {1,-1}`), so this module provides the square
//! tables, the smallest non-residue `xi`, and the special element `theta`
//! with `theta, theta - 1` non-squares and `theta + 1` a square.

use crate::error::{Error, Result};

/// Square testing below this prime size uses a precomputed bitmap; above it,
/// Euler's criterion via modular exponentiation.
const TABLE_LIMIT: u64 = 1 << 14;

/// Residue tables for one odd prime.
#[derive(Clone, Debug)]
pub struct ResidueTables {
    p: u64,
    omega: u64,
    xi: u64,
    /// `squares[x] == true` iff `x` is a nonzero square; only for small `p`.
    table: Option<Vec<bool>>,
}

/// Deterministic primality test (trial division; the crate only ever tests
/// moduli well below 10^10).
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n % 2 == 0 {
        return n == 2;
    }
    let mut d = 3u64;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 2;
    }
    true
}

pub fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1u128;
    let mut b = (base % m) as u128;
    base = 0;
    let _ = base;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * b % m as u128;
        }
        b = b * b % m as u128;
        exp >>= 1;
    }
    acc as u64
}

fn prime_factors(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut d = 2u64;
    while d * d <= n {
        if n % d == 0 {
            out.push(d);
            while n % d == 0 {
                n /= d;
            }
        }
        d += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

fn smallest_primitive_root(p: u64) -> u64 {
    let factors = prime_factors(p - 1);
    'cand: for g in 2..p {
        for &q in &factors {
            if pow_mod(g, (p - 1) / q, p) == 1 {
                continue 'cand;
            }
        }
        return g;
    }
    unreachable!("every prime has a primitive root")
}

impl ResidueTables {
    pub fn build(p: u64) -> Result<Self> {
        if p == 2 || !is_prime(p) {
            return Err(Error::NotOddPrime(p));
        }
        let table = if p < TABLE_LIMIT {
            let mut t = vec![false; p as usize];
            for x in 1..p {
                t[(x * x % p) as usize] = true;
            }
            Some(t)
        } else {
            None
        };
        let mut rt = ResidueTables {
            p,
            omega: 0,
            xi: 0,
            table,
        };
        rt.omega = smallest_primitive_root(p);
        rt.xi = (2..p)
            .find(|&x| !rt.is_square_u(x))
            .expect("an odd prime has a non-residue");
        Ok(rt)
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    /// The smallest primitive root of `Z_p`.
    pub fn omega(&self) -> u64 {
        self.omega
    }

    /// The smallest quadratic non-residue.
    pub fn xi(&self) -> u64 {
        self.xi
    }

    fn is_square_u(&self, x: u64) -> bool {
        debug_assert!(x % self.p != 0);
        match &self.table {
            Some(t) => t[(x % self.p) as usize],
            None => pow_mod(x % self.p, (self.p - 1) / 2, self.p) == 1,
        }
    }

    /// Whether `x` (nonzero mod `p`) lies in `C_0^2`.
    pub fn is_square(&self, x: i64) -> Result<bool> {
        let r = x.rem_euclid(self.p as i64) as u64;
        if r == 0 {
            return Err(Error::ResidueDomain {
                what: "square class of 0",
                p: self.p,
            });
        }
        Ok(self.is_square_u(r))
    }

    /// The squares `C_0^2` as a sorted list.
    pub fn squares(&self) -> Vec<u64> {
        (1..self.p).filter(|&x| self.is_square_u(x)).collect()
    }

    /// The non-squares `C_1^2` as a sorted list.
    pub fn nonsquares(&self) -> Vec<u64> {
        (1..self.p).filter(|&x| !self.is_square_u(x)).collect()
    }

    /// The element `theta` with `theta, theta - 1` non-squares and
    /// `theta + 1` a square, computed from the smallest pair of consecutive
    /// non-squares `(y, y+1)` as `z - 1`, where `z` is the smallest square in
    /// `{y+2, ..., p-1}`.
    ///
    /// Taking the smallest pair makes the output deterministic. For `p = 7`
    /// no such element exists (the only consecutive non-squares are `5, 6`
    /// and no square follows them), and the constructions never need one
    /// there; this returns a domain error in that case.
    pub fn find_theta(&self) -> Result<u64> {
        let err = Err(Error::ResidueDomain {
            what: "theta",
            p: self.p,
        });
        if self.p < 5 {
            return err;
        }
        let mut y = None;
        for cand in 2..self.p.saturating_sub(1) {
            if !self.is_square_u(cand) && !self.is_square_u(cand + 1) {
                y = Some(cand);
                break;
            }
        }
        let Some(y) = y else { return err };
        let z = ((y + 2)..self.p).find(|&z| self.is_square_u(z));
        match z {
            Some(z) => Ok(z - 1),
            None => err,
        }
    }

    /// One representative per `{s, -s}` pair of squares: the squares lying in
    /// `[1, (p-1)/2]`. Defined for `p = 1 (mod 4)`, where `-1` is a square
    /// and the squares pair off under negation.
    pub fn square_representatives_mod_sign(&self) -> Result<Vec<u64>> {
        if self.p % 4 != 1 {
            return Err(Error::ResidueDomain {
                what: "C_0^2 / {1,-1}",
                p: self.p,
            });
        }
        Ok((1..=(self.p - 1) / 2)
            .filter(|&x| self.is_square_u(x))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tables_small_primes() {
        let t = ResidueTables::build(7).unwrap();
        assert_eq!(t.squares(), vec![1, 2, 4]);
        assert_eq!(t.xi(), 3);

        let t = ResidueTables::build(13).unwrap();
        assert_eq!(t.squares(), vec![1, 3, 4, 9, 10, 12]);
        assert_eq!(t.xi(), 2);

        let t = ResidueTables::build(17).unwrap();
        assert_eq!(t.xi(), 3);
        for v in [t.xi() as i64 - 2, t.xi() as i64 - 1, t.xi() as i64 + 1] {
            assert!(t.is_square(v).unwrap());
        }
    }

    #[test]
    fn rejects_non_primes() {
        assert!(ResidueTables::build(2).is_err());
        assert!(ResidueTables::build(9).is_err());
        assert!(ResidueTables::build(1).is_err());
    }

    #[test]
    fn square_classification() {
        let t = ResidueTables::build(13).unwrap();
        assert!(t.is_square(-1).unwrap());
        let t = ResidueTables::build(7).unwrap();
        assert!(t.is_square(2).unwrap());
        assert!(!t.is_square(3).unwrap());
        assert!(t.is_square(0).is_err());
    }

    #[test]
    fn theta_values() {
        assert_eq!(ResidueTables::build(5).unwrap().find_theta().unwrap(), 3);
        assert_eq!(ResidueTables::build(13).unwrap().find_theta().unwrap(), 8);
        assert_eq!(ResidueTables::build(17).unwrap().find_theta().unwrap(), 7);
        assert!(ResidueTables::build(3).unwrap().find_theta().is_err());
        // p = 7: exhaustively no element satisfies the three conditions
        let t = ResidueTables::build(7).unwrap();
        assert!(t.find_theta().is_err());
        for theta in 2..6 {
            let ok = !t.is_square(theta).unwrap()
                && !t.is_square(theta - 1).unwrap()
                && t.is_square(theta + 1).unwrap();
            assert!(!ok);
        }
    }

    #[test]
    fn theta_conditions_hold_where_defined() {
        for p in (5u64..500).filter(|&p| is_prime(p) && p != 7) {
            let t = ResidueTables::build(p).unwrap();
            let theta = t.find_theta().unwrap();
            assert!(!t.is_square(theta as i64).unwrap(), "p={p}");
            assert!(!t.is_square(theta as i64 - 1).unwrap(), "p={p}");
            assert!(t.is_square(theta as i64 + 1).unwrap(), "p={p}");
        }
    }

    #[test]
    fn square_representatives() {
        let t = ResidueTables::build(13).unwrap();
        assert_eq!(t.square_representatives_mod_sign().unwrap(), vec![1, 3, 4]);
        let t = ResidueTables::build(5).unwrap();
        assert_eq!(t.square_representatives_mod_sign().unwrap(), vec![1]);
        let t = ResidueTables::build(17).unwrap();
        assert_eq!(t.square_representatives_mod_sign().unwrap(), vec![1, 2, 4, 8]);
        assert!(ResidueTables::build(7)
            .unwrap()
            .square_representatives_mod_sign()
            .is_err());
    }

    #[test]
    fn euler_path_agrees_with_table() {
        // first prime above the table limit exercises the Euler branch
        let p = (TABLE_LIMIT..).find(|&n| is_prime(n)).unwrap();
        let big = ResidueTables::build(p).unwrap();
        assert!(big.table.is_none());
        let mut count = 0;
        for x in 1..200 {
            let e = pow_mod(x, (p - 1) / 2, p) == 1;
            assert_eq!(big.is_square(x as i64).unwrap(), e);
            count += e as usize;
        }
        assert!(count > 0);
    }

    #[test]
    fn xi_is_prime_small_sweep() {
        for p in (3u64..2000).filter(|&p| is_prime(p)) {
            let t = ResidueTables::build(p).unwrap();
            assert!(is_prime(t.xi()), "xi({p}) = {} not prime", t.xi());
        }
    }

    #[test]
    fn primitive_root_is_primitive() {
        for p in [3u64, 5, 7, 13, 97, 101] {
            let t = ResidueTables::build(p).unwrap();
            let mut seen = vec![false; p as usize];
            let mut x = 1u64;
            for _ in 0..p - 1 {
                x = x * t.omega() % p;
                seen[x as usize] = true;
            }
            assert!((1..p).all(|v| seen[v as usize]));
        }
    }
}
