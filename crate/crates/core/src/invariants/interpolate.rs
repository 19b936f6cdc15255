//! Discovery of homogeneous forms vanishing on a map's image, by exact
//! interpolation at random points.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{CoordinateMap, InvariantError};
use crate::exact::modular::{certified_nullspace, ModRows};
use crate::exact::rat::{common_denominator, primitive_integer_vector};
use crate::exact::{Mono, Poly, Rat, Var};
use crate::models::ParamAssignment;

#[derive(Debug, Clone)]
pub struct Interpolation {
    /// Normalised basis of the vanishing forms of the requested degree.
    pub forms: Vec<Poly>,
    pub num_monomials: usize,
    pub samples: usize,
    pub primes_used: usize,
}

/// Exponent vectors of degree `d` in `n` variables, lexicographically
/// decreasing (`x0^d` first).
pub fn monomial_exponents(n: usize, d: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut cur = vec![0u32; n];
    fn rec(i: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if i + 1 == cur.len() {
            cur[i] = left;
            out.push(cur.clone());
            return;
        }
        for e in (0..=left).rev() {
            cur[i] = e;
            rec(i + 1, left - e, cur, out);
        }
    }
    if n > 0 {
        rec(0, d, &mut cur, &mut out);
    }
    out
}

/// Sample points as primitive integer coordinate vectors. Homogeneous
/// forms vanish at a point iff they vanish at any rescaling of it.
struct Samples<'a> {
    points: Vec<Vec<BigInt>>,
    exps: &'a [Vec<u32>],
    degree: u32,
}

impl ModRows for Samples<'_> {
    fn shape(&self) -> (usize, usize) {
        (self.points.len(), self.exps.len())
    }

    fn fill_mod(&self, p: u64, out: &mut [u64]) -> bool {
        let pb = BigInt::from(p);
        let cols = self.exps.len();
        for (r, pt) in self.points.iter().enumerate() {
            let pows: Vec<Vec<u64>> = pt
                .iter()
                .map(|x| {
                    let x: u64 = x.mod_floor(&pb).try_into().expect("reduced below p");
                    let mut v = vec![1u64; self.degree as usize + 1];
                    for e in 1..v.len() {
                        v[e] = v[e - 1] * x % p;
                    }
                    v
                })
                .collect();
            for (c, ex) in self.exps.iter().enumerate() {
                out[r * cols + c] = ex.iter().enumerate().fold(1u64, |acc, (i, &e)| acc * pows[i][e as usize] % p);
            }
        }
        true
    }
}

fn power_table(pt: &[BigInt], d: u32) -> Vec<Vec<BigInt>> {
    pt.iter()
        .map(|x| {
            let mut v = vec![BigInt::one(); d as usize + 1];
            for e in 1..v.len() {
                v[e] = &v[e - 1] * x;
            }
            v
        })
        .collect()
}

/// Whether the integer vector `coeffs` annihilates every sample row.
fn annihilates(points: &[Vec<BigInt>], exps: &[Vec<u32>], degree: u32, coeffs: &[BigInt]) -> bool {
    let check = |pt: &Vec<BigInt>| {
        let pows = power_table(pt, degree);
        let mut acc = BigInt::zero();
        for (ex, c) in exps.iter().zip(coeffs) {
            if c.is_zero() {
                continue;
            }
            let mut t = c.clone();
            for (i, &e) in ex.iter().enumerate() {
                if e > 0 {
                    t *= &pows[i][e as usize];
                }
            }
            acc += t;
        }
        acc.is_zero()
    };
    let workers = std::thread::available_parallelism().map_or(1, |w| w.get()).min(points.len().max(1));
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|w| s.spawn(move || points.iter().skip(w).step_by(workers).all(check)))
            .collect();
        handles.into_iter().all(|h| h.join().expect("verification thread"))
    })
}

fn integer_point(values: &[Rat]) -> Vec<BigInt> {
    let den = common_denominator(values);
    let ints: Vec<BigInt> = values.iter().map(|v| (v * Rat::from_integer(den.clone())).to_integer()).collect();
    let g = ints.iter().fold(BigInt::zero(), |a, x| a.gcd(x));
    if g.is_zero() {
        return ints;
    }
    ints.into_iter().map(|x| x / &g).collect()
}

fn sample_points(map: &impl CoordinateMap, count: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<BigInt>>, InvariantError> {
    let params = map.parameters();
    (0..count)
        .map(|_| Ok(integer_point(&map.eval_exact(&ParamAssignment::random(&params, rng))?)))
        .collect()
}

/// All degree-`degree` forms in the map's coordinates that vanish on its
/// image. Rows come from at least `#monomials + 10` random points; the
/// nullspace is computed modulo primes, lifted, certified against every
/// sample row exactly, then re-checked at 10 fresh points. A failed
/// re-check means the sample was not generic: the search is repeated with
/// more points.
pub fn interpolate_vanishing_forms(
    map: &impl CoordinateMap,
    degree: u32,
    seed: u64,
) -> Result<Interpolation, InvariantError> {
    let n = map.num_coordinates();
    let exps = monomial_exponents(n, degree);
    let vars: Vec<Var> = (0..n).map(|i| Var::new(&map.coordinate_name(i))).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut extra = 10;
    for _attempt in 0..3 {
        let samples = Samples { points: sample_points(map, exps.len() + extra, &mut rng)?, exps: &exps, degree };
        let ns = certified_nullspace(&samples, |v| {
            let ints = primitive_integer_vector(v);
            annihilates(&samples.points, &exps, degree, &ints)
        })
        .map_err(|e| InvariantError::Interpolation(e.to_string()))?;
        let fresh = sample_points(map, 10, &mut rng)?;
        let ok = ns.basis.iter().all(|v| annihilates(&fresh, &exps, degree, &primitive_integer_vector(v)));
        if !ok {
            extra *= 4;
            continue;
        }
        let forms = ns
            .basis
            .iter()
            .map(|v| {
                Poly::from_terms(exps.iter().zip(v).filter(|(_, c)| !c.is_zero()).map(|(ex, c)| {
                    (Mono::from_exponents(vars.iter().copied().zip(ex.iter().copied())), c.clone())
                }))
                .normalized()
            })
            .collect();
        return Ok(Interpolation { forms, num_monomials: exps.len(), samples: samples.points.len(), primes_used: ns.primes_used });
    }
    Err(InvariantError::Interpolation("vanishing forms did not stabilise after resampling".into()))
}
