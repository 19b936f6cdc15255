//! Sparse multivariate polynomials with exact rational coefficients.
//!
//! Terms are kept in graded lexicographic order on variable ids, leading
//! term first. Zero coefficients and zero exponents are never stored.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use super::rat::{common_denominator, format_rat, Rat};
use super::var::Var;
use super::ExactError;

/// A power product of variables, sorted by variable id.
#[derive(Clone, PartialEq, Eq, Hash, Default, Debug)]
pub struct Mono(Vec<(Var, u32)>);

impl Mono {
    pub fn one() -> Mono {
        Mono(Vec::new())
    }

    pub fn var(v: Var) -> Mono {
        Mono(vec![(v, 1)])
    }

    /// Builds a monomial from a list of factors with repetition.
    pub fn from_factors(factors: impl IntoIterator<Item = Var>) -> Mono {
        let mut v: Vec<Var> = factors.into_iter().collect();
        v.sort_unstable();
        let mut out: Vec<(Var, u32)> = Vec::with_capacity(v.len());
        for x in v {
            match out.last_mut() {
                Some((y, e)) if *y == x => *e += 1,
                _ => out.push((x, 1)),
            }
        }
        Mono(out)
    }

    pub fn from_exponents(exps: impl IntoIterator<Item = (Var, u32)>) -> Mono {
        let mut map: BTreeMap<Var, u32> = BTreeMap::new();
        for (v, e) in exps {
            *map.entry(v).or_default() += e;
        }
        Mono(map.into_iter().filter(|&(_, e)| e > 0).collect())
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|&(_, e)| e).sum()
    }

    pub fn exponent(&self, v: Var) -> u32 {
        self.0.iter().find(|&&(x, _)| x == v).map_or(0, |&(_, e)| e)
    }

    pub fn factors(&self) -> &[(Var, u32)] {
        &self.0
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn mul(&self, other: &Mono) -> Mono {
        let (a, b) = (&self.0, &other.0);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => {
                    out.push(a[i]);
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push(b[j]);
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    out.push((a[i].0, a[i].1 + b[j].1));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        Mono(out)
    }

    fn pow(&self, n: u32) -> Mono {
        Mono(self.0.iter().map(|&(v, e)| (v, e * n)).collect())
    }

    /// Whether every variable of `self` appears with at least the same
    /// power in `other`.
    pub fn divides(&self, other: &Mono) -> bool {
        self.0.iter().all(|&(v, e)| other.exponent(v) >= e)
    }

    pub fn gcd(&self, other: &Mono) -> Mono {
        Mono(
            self.0
                .iter()
                .filter_map(|&(v, e)| {
                    let m = e.min(other.exponent(v));
                    (m > 0).then_some((v, m))
                })
                .collect(),
        )
    }

    pub fn eval(&self, value: &impl Fn(Var) -> Option<Rat>) -> Result<Rat, ExactError> {
        let mut acc = Rat::one();
        for &(v, e) in &self.0 {
            let x = value(v).ok_or_else(|| ExactError::MissingVariable(v.name()))?;
            acc *= num_traits::pow(x, e as usize);
        }
        Ok(acc)
    }
}

impl Ord for Mono {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        use std::cmp::Ordering::*;
        match other.degree().cmp(&self.degree()) {
            Equal => {}
            ord => return ord,
        }
        for (&(va, ea), &(vb, eb)) in self.0.iter().zip(&other.0) {
            if va != vb {
                return va.cmp(&vb);
            }
            if ea != eb {
                return eb.cmp(&ea);
            }
        }
        other.0.len().cmp(&self.0.len())
    }
}

impl PartialOrd for Mono {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Mono {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("1");
        }
        for (i, &(v, e)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("*")?;
            }
            if e == 1 {
                write!(f, "{v}")?;
            } else {
                write!(f, "{v}^{e}")?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, PartialEq, Eq, Hash, Default, Debug)]
pub struct Poly {
    terms: BTreeMap<Mono, Rat>,
}

impl Poly {
    pub fn zero() -> Poly {
        Poly::default()
    }

    pub fn one() -> Poly {
        Poly::constant(Rat::one())
    }

    pub fn constant(c: Rat) -> Poly {
        Poly::term(Mono::one(), c)
    }

    pub fn var(v: Var) -> Poly {
        Poly::term(Mono::var(v), Rat::one())
    }

    /// Shorthand for `Poly::var(Var::new(name))`.
    pub fn named(name: &str) -> Poly {
        Poly::var(Var::new(name))
    }

    pub fn term(m: Mono, c: Rat) -> Poly {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(m, c);
        }
        Poly { terms }
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (Mono, Rat)>) -> Poly {
        let mut p = Poly::zero();
        for (m, c) in terms {
            p.add_term(m, c);
        }
        p
    }

    pub fn add_term(&mut self, m: Mono, c: Rat) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                *e.get_mut() += c;
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Mono, &Rat)> {
        self.terms.iter()
    }

    pub fn leading_term(&self) -> Option<(&Mono, &Rat)> {
        self.terms.iter().next()
    }

    pub fn coefficient(&self, m: &Mono) -> Rat {
        self.terms.get(m).cloned().unwrap_or_else(Rat::zero)
    }

    pub fn constant_value(&self) -> Option<Rat> {
        match self.terms.len() {
            0 => Some(Rat::zero()),
            1 => self.terms.get(&Mono::one()).cloned(),
            _ => None,
        }
    }

    /// Total degree when all terms share it; `None` for zero or
    /// inhomogeneous polynomials.
    pub fn homogeneous_degree(&self) -> Option<u32> {
        let mut it = self.terms.keys().map(Mono::degree);
        let d = it.next()?;
        it.all(|x| x == d).then_some(d)
    }

    pub fn total_degree(&self) -> Option<u32> {
        self.terms.keys().map(Mono::degree).max()
    }

    /// Degree of every term in the given variable family, if constant.
    pub fn degree_in(&self, family: &BTreeSet<Var>) -> Option<u32> {
        let mut it = self
            .terms
            .keys()
            .map(|m| m.factors().iter().filter(|(v, _)| family.contains(v)).map(|&(_, e)| e).sum::<u32>());
        let d = it.next()?;
        it.all(|x| x == d).then_some(d)
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        self.terms.keys().flat_map(|m| m.factors().iter().map(|&(v, _)| v)).collect()
    }

    pub fn scale(&self, c: &Rat) -> Poly {
        if c.is_zero() {
            return Poly::zero();
        }
        Poly { terms: self.terms.iter().map(|(m, x)| (m.clone(), x * c)).collect() }
    }

    pub fn mul_mono(&self, mono: &Mono) -> Poly {
        Poly { terms: self.terms.iter().map(|(m, x)| (m.mul(mono), x.clone())).collect() }
    }

    pub fn pow(&self, n: u32) -> Poly {
        if n == 0 {
            return Poly::one();
        }
        if self.terms.len() == 1 {
            let (m, c) = self.terms.iter().next().expect("one term");
            return Poly::term(m.pow(n), num_traits::pow(c.clone(), n as usize));
        }
        let mut result = Poly::one();
        let mut base = self.clone();
        let mut n = n;
        while n > 0 {
            if n & 1 == 1 {
                result = &result * &base;
            }
            n >>= 1;
            if n > 0 {
                base = &base * &base;
            }
        }
        result
    }

    pub fn eval(&self, values: &HashMap<Var, Rat>) -> Result<Rat, ExactError> {
        self.eval_with(&|v| values.get(&v).cloned())
    }

    pub fn eval_with(&self, value: &impl Fn(Var) -> Option<Rat>) -> Result<Rat, ExactError> {
        let mut acc = Rat::zero();
        for (m, c) in &self.terms {
            acc += m.eval(value)? * c;
        }
        Ok(acc)
    }

    pub fn eval_f64(&self, value: &impl Fn(Var) -> Option<f64>) -> Result<f64, ExactError> {
        let mut acc = 0.0;
        for (m, c) in &self.terms {
            let mut t = super::rat::to_f64(c);
            for &(v, e) in m.factors() {
                let x = value(v).ok_or_else(|| ExactError::MissingVariable(v.name()))?;
                t *= x.powi(e as i32);
            }
            acc += t;
        }
        Ok(acc)
    }

    /// Simultaneous substitution; unmapped variables are kept.
    pub fn substitute(&self, subst: &HashMap<Var, Poly>) -> Poly {
        let mut powers: HashMap<(Var, u32), Poly> = HashMap::new();
        let mut out = Poly::zero();
        for (m, c) in &self.terms {
            let mut t = Poly::constant(c.clone());
            for &(v, e) in m.factors() {
                let p = powers.entry((v, e)).or_insert_with(|| match subst.get(&v) {
                    Some(base) => base.pow(e),
                    None => Poly::term(Mono::from_exponents([(v, e)]), Rat::one()),
                });
                t = &t * p;
            }
            out += &t;
        }
        out
    }

    /// Renames variables; unmapped variables are kept.
    pub fn rename(&self, map: &HashMap<Var, Var>) -> Poly {
        Poly::from_terms(self.terms.iter().map(|(m, c)| {
            let mono = Mono::from_exponents(m.factors().iter().map(|&(v, e)| (*map.get(&v).unwrap_or(&v), e)));
            (mono, c.clone())
        }))
    }

    pub fn derivative(&self, v: Var) -> Poly {
        let mut out = Poly::zero();
        for (m, c) in &self.terms {
            let e = m.exponent(v);
            if e == 0 {
                continue;
            }
            let mono = Mono(
                m.factors()
                    .iter()
                    .filter_map(|&(x, k)| if x == v { (k > 1).then_some((x, k - 1)) } else { Some((x, k)) })
                    .collect(),
            );
            out.add_term(mono, c * Rat::from_integer(BigInt::from(e)));
        }
        out
    }

    /// Integer coefficients with content removed and a positive leading
    /// coefficient.
    pub fn normalized(&self) -> Poly {
        if self.is_zero() {
            return Poly::zero();
        }
        let den = common_denominator(self.terms.values());
        let ints: Vec<BigInt> = self.terms.values().map(|c| (c * Rat::from_integer(den.clone())).to_integer()).collect();
        let mut g = ints.iter().fold(BigInt::zero(), |a, x| a.gcd(x));
        if ints[0].is_negative() {
            g = -g;
        }
        Poly {
            terms: self
                .terms
                .keys()
                .zip(ints)
                .map(|(m, x)| (m.clone(), Rat::from_integer(x / &g)))
                .collect(),
        }
    }

    /// Operation counts of the fully expanded form: one multiplication per
    /// extra factor in each term, one addition between consecutive terms.
    /// Numeric coefficients are free.
    pub fn expanded_op_counts(&self) -> (usize, usize) {
        let muls = self.terms.keys().map(|m| (m.degree() as usize).saturating_sub(1)).sum();
        (muls, self.terms.len().saturating_sub(1))
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (i, (m, c)) in self.terms.iter().enumerate() {
            let neg = c.is_negative();
            match (i, neg) {
                (0, true) => f.write_str("-")?,
                (0, false) => {}
                (_, true) => f.write_str(" - ")?,
                (_, false) => f.write_str(" + ")?,
            }
            let a = c.abs();
            if m.is_one() {
                f.write_str(&format_rat(&a))?;
            } else if a.is_one() {
                write!(f, "{m}")?;
            } else {
                write!(f, "{}*{m}", format_rat(&a))?;
            }
        }
        Ok(())
    }
}

impl<'a> Add<&'a Poly> for &'a Poly {
    type Output = Poly;
    fn add(self, rhs: &Poly) -> Poly {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl Add for Poly {
    type Output = Poly;
    fn add(mut self, rhs: Poly) -> Poly {
        self += &rhs;
        self
    }
}

impl AddAssign<&Poly> for Poly {
    fn add_assign(&mut self, rhs: &Poly) {
        for (m, c) in &rhs.terms {
            self.add_term(m.clone(), c.clone());
        }
    }
}

impl SubAssign<&Poly> for Poly {
    fn sub_assign(&mut self, rhs: &Poly) {
        for (m, c) in &rhs.terms {
            self.add_term(m.clone(), -c.clone());
        }
    }
}

impl<'a> Sub<&'a Poly> for &'a Poly {
    type Output = Poly;
    fn sub(self, rhs: &Poly) -> Poly {
        let mut out = self.clone();
        out -= rhs;
        out
    }
}

impl Sub for Poly {
    type Output = Poly;
    fn sub(mut self, rhs: Poly) -> Poly {
        self -= &rhs;
        self
    }
}

impl Neg for Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        Poly { terms: self.terms.into_iter().map(|(m, c)| (m, -c)).collect() }
    }
}

impl<'a> Mul<&'a Poly> for &'a Poly {
    type Output = Poly;
    fn mul(self, rhs: &Poly) -> Poly {
        let mut acc: HashMap<Mono, Rat> = HashMap::with_capacity(self.terms.len() * rhs.terms.len());
        for (ma, ca) in &self.terms {
            for (mb, cb) in &rhs.terms {
                *acc.entry(ma.mul(mb)).or_insert_with(Rat::zero) += ca * cb;
            }
        }
        Poly { terms: acc.into_iter().filter(|(_, c)| !c.is_zero()).collect() }
    }
}

impl Mul for Poly {
    type Output = Poly;
    fn mul(self, rhs: Poly) -> Poly {
        &self * &rhs
    }
}

impl std::iter::Sum for Poly {
    fn sum<I: Iterator<Item = Poly>>(iter: I) -> Poly {
        let mut out = Poly::zero();
        for p in iter {
            out += &p;
        }
        out
    }
}

impl std::iter::Product for Poly {
    fn product<I: Iterator<Item = Poly>>(iter: I) -> Poly {
        iter.fold(Poly::one(), |a, b| &a * &b)
    }
}

// ---- text format -------------------------------------------------------

struct PolyParser<'a> {
    s: &'a [u8],
    pos: usize,
}

impl PolyParser<'_> {
    fn err(&self, msg: &str) -> ExactError {
        ExactError::Parse { pos: self.pos, msg: msg.to_string() }
    }

    fn ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.ws();
        self.s.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<Poly, ExactError> {
        let mut acc = self.product()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    acc += &self.product()?;
                }
                Some(b'-') => {
                    self.pos += 1;
                    acc -= &self.product()?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn product(&mut self) -> Result<Poly, ExactError> {
        let mut acc = self.unary()?;
        while self.peek() == Some(b'*') {
            self.pos += 1;
            acc = &acc * &self.unary()?;
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<Poly, ExactError> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(-self.unary()?)
            }
            Some(b'+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Poly, ExactError> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let e = self.integer()?;
            let e: u32 = e.try_into().map_err(|_| self.err("exponent too large"))?;
            return Ok(base.pow(e));
        }
        Ok(base)
    }

    fn integer(&mut self) -> Result<BigInt, ExactError> {
        self.ws();
        let start = self.pos;
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("expected integer"));
        }
        Ok(std::str::from_utf8(&self.s[start..self.pos]).expect("ascii digits").parse().expect("digits"))
    }

    fn atom(&mut self) -> Result<Poly, ExactError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let p = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.err("expected ')'"));
                }
                self.pos += 1;
                Ok(p)
            }
            Some(c) if c.is_ascii_digit() => {
                let n = self.integer()?;
                let mut d = BigInt::one();
                if self.peek() == Some(b'/') {
                    self.pos += 1;
                    d = self.integer()?;
                    if d.is_zero() {
                        return Err(self.err("zero denominator"));
                    }
                }
                Ok(Poly::constant(Rat::new(n, d)))
            }
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.pos;
                while self.pos < self.s.len() && (self.s[self.pos].is_ascii_alphanumeric() || self.s[self.pos] == b'_') {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.s[start..self.pos]).expect("ascii");
                Ok(Poly::var(Var::new(name)))
            }
            _ => Err(self.err("expected number, variable or '('")),
        }
    }
}

impl FromStr for Poly {
    type Err = ExactError;

    /// Parses sums of `coeff*var^e*...` terms; parentheses are accepted.
    fn from_str(s: &str) -> Result<Poly, ExactError> {
        let mut p = PolyParser { s: s.as_bytes(), pos: 0 };
        let out = p.expr()?;
        if p.peek().is_some() {
            return Err(p.err("trailing input"));
        }
        Ok(out)
    }
}

/// Convenience parser for tests and fixtures; panics on bad input.
pub fn poly(s: &str) -> Poly {
    s.parse().unwrap_or_else(|e| panic!("bad polynomial {s:?}: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::rat::{int, rat};

    #[test]
    fn eval_examples() {
        let p = poly("x + y");
        let vals: HashMap<Var, Rat> = [(Var::new("x"), rat(1, 2)), (Var::new("y"), rat(1, 2))].into();
        assert_eq!(p.eval(&vals).unwrap(), int(1));
        assert_eq!(poly("7").eval(&HashMap::new()).unwrap(), int(7));
        assert!(matches!(p.eval(&HashMap::new()), Err(ExactError::MissingVariable(_))));
    }

    #[test]
    fn substitute_examples() {
        let subst: HashMap<Var, Poly> = [(Var::new("x"), poly("a + b")), (Var::new("y"), poly("a - b"))].into();
        assert_eq!(poly("x*y").substitute(&subst), poly("a^2 - b^2"));
        let id: HashMap<Var, Poly> = [(Var::new("x"), poly("x")), (Var::new("y"), poly("y"))].into();
        let p = poly("3*x^2*y - 1/2*y + 4");
        assert_eq!(p.substitute(&id), p);
        assert_eq!(poly("z^2 + x").substitute(&id), poly("z^2 + x"));
    }

    #[test]
    fn text_round_trip() {
        let p = poly("-3/4*a0*b1^2 + c0 - 2 + a0^3");
        let s = p.to_string();
        assert_eq!(s, "a0^3 - 3/4*a0*b1^2 + c0 - 2");
        assert_eq!(poly(&s), p);
        assert_eq!(Poly::zero().to_string(), "0");
        assert_eq!(poly("(x+1)^2"), poly("x^2 + 2*x + 1"));
        assert!("x +".parse::<Poly>().is_err());
        assert!("1/0".parse::<Poly>().is_err());
        assert!("x y".parse::<Poly>().is_err());
    }

    #[test]
    fn graded_lex_order() {
        let (a, b) = (Var::new("glx_a"), Var::new("glx_b"));
        assert!(a < b);
        let p = poly("glx_b + glx_a^2 + glx_a*glx_b + 1 + glx_a + glx_b^2");
        assert_eq!(p.to_string(), "glx_a^2 + glx_a*glx_b + glx_b^2 + glx_a + glx_b + 1");
    }

    #[test]
    fn derivative_and_normalize() {
        let p = poly("x^3*y + 2*x*y");
        assert_eq!(p.derivative(Var::new("x")), poly("3*x^2*y + 2*y"));
        assert_eq!(p.derivative(Var::new("z")), Poly::zero());
        let q = poly("-2/3*x + 4/9*y");
        let n = q.normalized();
        assert_eq!(n.leading_term().unwrap().1, &int(3));
        assert_eq!(n, poly("3*x - 2*y"));
    }

    #[test]
    fn op_counts_of_expanded_form() {
        assert_eq!(poly("p*a^4 + p*a*b*c^2 + q*c^2*a^2 + q*c^3*d").expanded_op_counts(), (16, 3));
    }
}
