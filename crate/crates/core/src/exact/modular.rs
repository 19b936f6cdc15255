//! Multi-modular nullspace computation with exact certification.
//!
//! Large sampled matrices (a thousand columns and more) are reduced modulo
//! 31-bit primes, the canonical nullspace basis is lifted by Chinese
//! remaindering and rational reconstruction, and every lifted vector is
//! checked exactly by the caller before it is returned. Reduction mod p
//! never increases rank, so a certified basis of the mod-p nullity is the
//! exact rational nullspace.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use super::rat::Rat;
use super::ExactError;

pub const PRIMES: [u64; 24] = [
    2147483647, 2147483629, 2147483587, 2147483579, 2147483563, 2147483549, 2147483543, 2147483497,
    2147483489, 2147483477, 2147483423, 2147483399, 2147483353, 2147483323, 2147483269, 2147483249,
    2147483237, 2147483179, 2147483171, 2147483137, 2147483123, 2147483077, 2147483069, 2147483059,
];

/// A matrix that can be materialised modulo a prime.
pub trait ModRows {
    fn shape(&self) -> (usize, usize);
    /// Fills `out` (row-major) with entries mod `p`. Returns `false` when an
    /// entry has a denominator divisible by `p`.
    fn fill_mod(&self, p: u64, out: &mut [u64]) -> bool;
}

pub fn pow_mod(mut b: u64, mut e: u64, p: u64) -> u64 {
    let mut r = 1u64;
    b %= p;
    while e > 0 {
        if e & 1 == 1 {
            r = r * b % p;
        }
        b = b * b % p;
        e >>= 1;
    }
    r
}

pub fn inv_mod(x: u64, p: u64) -> u64 {
    pow_mod(x, p - 2, p)
}

/// `n/d mod p`, or `None` if `p | d`.
pub fn rat_mod(r: &Rat, p: u64) -> Option<u64> {
    let pb = BigInt::from(p);
    let d = r.denom().mod_floor(&pb);
    if d.is_zero() {
        return None;
    }
    let n = r.numer().mod_floor(&pb);
    let n: u64 = n.try_into().expect("reduced below p");
    let d: u64 = d.try_into().expect("reduced below p");
    Some(n * inv_mod(d, p) % p)
}

/// Forward elimination mod `P` with unit pivots; returns pivot columns.
/// Rows `0..rank` of `a` hold the echelon form afterwards.
fn echelon<const P: u64>(a: &mut [u64], rows: usize, cols: usize) -> Vec<usize> {
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| a[i * cols + c] != 0) else { continue };
        if p != r {
            for j in c..cols {
                a.swap(p * cols + j, r * cols + j);
            }
        }
        let inv = inv_mod(a[r * cols + c], P);
        for j in c..cols {
            a[r * cols + j] = a[r * cols + j] * inv % P;
        }
        let (top, rest) = a.split_at_mut((r + 1) * cols);
        let pivot_row = &top[r * cols..];
        for row in rest.chunks_exact_mut(cols) {
            let f = row[c];
            if f == 0 {
                continue;
            }
            let nf = P - f;
            for j in c..cols {
                row[j] = (row[j] + nf * pivot_row[j]) % P;
            }
        }
        pivots.push(c);
        r += 1;
    }
    pivots
}

macro_rules! dispatch_echelon {
    ($idx:expr, $a:expr, $rows:expr, $cols:expr; $($i:literal)*) => {
        match $idx {
            $($i => echelon::<{ PRIMES[$i] }>($a, $rows, $cols),)*
            _ => unreachable!("prime index out of range"),
        }
    };
}

/// Canonical nullspace basis mod `PRIMES[idx]`: one vector per free
/// column with 1 there and 0 at the other free columns.
pub fn nullspace_mod(idx: usize, a: &mut [u64], rows: usize, cols: usize) -> (Vec<usize>, Vec<Vec<u64>>) {
    let p = PRIMES[idx];
    let pivots = dispatch_echelon!(idx, a, rows, cols; 0 1 2 3 4 5 6 7 8 9 10 11 12 13 14 15 16 17 18 19 20 21 22 23);
    let free: Vec<usize> = (0..cols).filter(|c| pivots.binary_search(c).is_err()).collect();
    let mut basis = Vec::with_capacity(free.len());
    for &f in &free {
        let mut x = vec![0u64; cols];
        x[f] = 1;
        for i in (0..pivots.len()).rev() {
            let pc = pivots[i];
            let row = &a[i * cols..(i + 1) * cols];
            let mut s = 0u64;
            for j in pc + 1..cols {
                if x[j] != 0 && row[j] != 0 {
                    s = (s + row[j] * x[j]) % p;
                }
            }
            x[pc] = (p - s) % p;
        }
        basis.push(x);
    }
    (free, basis)
}

/// Rational `r/s` with `r ≡ a·s (mod m)` and both bounded by `sqrt(m/2)`.
pub fn rational_reconstruct(a: &BigInt, m: &BigInt) -> Option<Rat> {
    let bound = (m / 2u32).sqrt();
    let (mut r0, mut r1) = (m.clone(), a.mod_floor(m));
    let (mut s0, mut s1) = (BigInt::zero(), BigInt::one());
    while r1 > bound {
        let q = &r0 / &r1;
        let r2 = &r0 - &q * &r1;
        let s2 = &s0 - &q * &s1;
        r0 = std::mem::replace(&mut r1, r2);
        s0 = std::mem::replace(&mut s1, s2);
    }
    if s1.is_zero() || s1.abs() > bound || !r1.gcd(&s1).is_one() {
        return None;
    }
    Some(Rat::new(r1, s1))
}

#[derive(Debug, Clone)]
pub struct CertifiedNullspace {
    pub rank: usize,
    pub free_columns: Vec<usize>,
    pub basis: Vec<Vec<Rat>>,
    pub primes_used: usize,
}

/// Lifts the canonical nullspace of `src` to the rationals. `verify` must
/// return `true` only for vectors that are exactly in the rational
/// nullspace.
pub fn certified_nullspace(
    src: &impl ModRows,
    verify: impl Fn(&[Rat]) -> bool,
) -> Result<CertifiedNullspace, ExactError> {
    let (rows, cols) = src.shape();
    let mut buf = vec![0u64; rows * cols];
    let mut modulus = BigInt::one();
    let mut residues: Vec<Vec<BigInt>> = Vec::new();
    let mut free: Option<Vec<usize>> = None;
    let mut used = 0;
    let mut previous: Option<Vec<Vec<Rat>>> = None;

    for (idx, &p) in PRIMES.iter().enumerate() {
        if !src.fill_mod(p, &mut buf) {
            continue;
        }
        let (f, basis) = nullspace_mod(idx, &mut buf, rows, cols);
        match &free {
            Some(cur) if f.len() > cur.len() => continue,
            Some(cur) if f.len() == cur.len() && f != *cur => continue,
            Some(cur) if f.len() == cur.len() => {}
            _ => {
                // First prime, or a smaller nullity exposed an unlucky prime.
                free = Some(f.clone());
                modulus = BigInt::one();
                residues = vec![vec![BigInt::zero(); cols]; f.len()];
                previous = None;
                used = 0;
            }
        }
        used += 1;
        let pb = BigInt::from(p);
        let m_inv = BigInt::from(inv_mod((&modulus % &pb).try_into().expect("< p"), p));
        for (res, v) in residues.iter_mut().zip(&basis) {
            for (x, &r) in res.iter_mut().zip(v) {
                // x' ≡ x (mod M), x' ≡ r (mod p)
                let t = ((BigInt::from(r) - &*x) * &m_inv).mod_floor(&pb);
                *x += &modulus * t;
            }
        }
        modulus *= &pb;

        let lifted: Option<Vec<Vec<Rat>>> = residues
            .iter()
            .map(|res| res.iter().map(|x| rational_reconstruct(x, &modulus)).collect())
            .collect();
        let Some(lifted) = lifted else { continue };
        if previous.as_ref() == Some(&lifted) && lifted.iter().all(|v| verify(v)) {
            let free_columns = free.expect("set with first prime");
            return Ok(CertifiedNullspace { rank: cols - free_columns.len(), free_columns, basis: lifted, primes_used: used });
        }
        previous = Some(lifted);
    }
    Err(ExactError::Unlifted)
}
