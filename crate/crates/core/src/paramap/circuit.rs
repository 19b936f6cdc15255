//! Sum-product circuits with structural sharing.

use std::collections::HashMap;

use num_traits::{One, Zero};

use crate::exact::rat::to_f64;
use crate::exact::{ExactError, Poly, Rat, Var};

pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Op {
    Const(Rat),
    Var(Var),
    /// Children sorted, so commuted operands hash alike.
    Add(Vec<NodeId>),
    Mul(Vec<NodeId>),
}

/// A DAG of additions and multiplications. Children always precede their
/// parents, so node order is a topological order.
#[derive(Debug, Clone, Default)]
pub struct Circuit {
    nodes: Vec<Op>,
    index: HashMap<Op, NodeId>,
}

/// Values a circuit can be evaluated over.
pub trait Scalar: Clone {
    fn from_rat(r: &Rat) -> Self;
    fn add(&self, other: &Self) -> Self;
    fn mul(&self, other: &Self) -> Self;
}

impl Scalar for Rat {
    fn from_rat(r: &Rat) -> Self {
        r.clone()
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
}

impl Scalar for f64 {
    fn from_rat(r: &Rat) -> Self {
        to_f64(r)
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
}

impl Scalar for Poly {
    fn from_rat(r: &Rat) -> Self {
        Poly::constant(r.clone())
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct OpCounts {
    pub multiplications: usize,
    pub additions: usize,
}

impl Circuit {
    pub fn new() -> Circuit {
        Circuit::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn op(&self, id: NodeId) -> &Op {
        &self.nodes[id]
    }

    fn intern(&mut self, op: Op) -> NodeId {
        if let Some(&id) = self.index.get(&op) {
            return id;
        }
        let id = self.nodes.len();
        self.nodes.push(op.clone());
        self.index.insert(op, id);
        id
    }

    pub fn constant(&mut self, c: Rat) -> NodeId {
        self.intern(Op::Const(c))
    }

    pub fn var(&mut self, v: Var) -> NodeId {
        self.intern(Op::Var(v))
    }

    fn const_value(&self, id: NodeId) -> Option<&Rat> {
        match &self.nodes[id] {
            Op::Const(c) => Some(c),
            _ => None,
        }
    }

    /// Sum of the operands; zero constants are dropped.
    pub fn add(&mut self, terms: &[NodeId]) -> NodeId {
        let mut kids: Vec<NodeId> =
            terms.iter().copied().filter(|&t| !self.const_value(t).is_some_and(|c| c.is_zero())).collect();
        match kids.len() {
            0 => self.constant(Rat::zero()),
            1 => kids[0],
            _ => {
                kids.sort_unstable();
                self.intern(Op::Add(kids))
            }
        }
    }

    /// Binary product; unit constants are dropped and zero absorbs.
    pub fn mul(&mut self, x: NodeId, y: NodeId) -> NodeId {
        match (self.const_value(x), self.const_value(y)) {
            (Some(c), _) | (_, Some(c)) if c.is_zero() => self.constant(Rat::zero()),
            (Some(c), _) if c.is_one() => y,
            (_, Some(c)) if c.is_one() => x,
            _ => {
                let mut kids = vec![x, y];
                kids.sort_unstable();
                self.intern(Op::Mul(kids))
            }
        }
    }

    /// Left-to-right chain of binary products.
    pub fn product(&mut self, factors: &[NodeId]) -> NodeId {
        match factors.split_first() {
            None => self.constant(Rat::one()),
            Some((&first, rest)) => rest.iter().fold(first, |acc, &f| self.mul(acc, f)),
        }
    }

    /// Operations needed for `outputs`, each shared node counted once.
    /// Multiplying by a constant is free.
    pub fn op_counts(&self, outputs: &[NodeId]) -> OpCounts {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack: Vec<NodeId> = outputs.to_vec();
        let mut counts = OpCounts::default();
        while let Some(id) = stack.pop() {
            if std::mem::replace(&mut seen[id], true) {
                continue;
            }
            match &self.nodes[id] {
                Op::Const(_) | Op::Var(_) => {}
                Op::Add(kids) => {
                    counts.additions += kids.len() - 1;
                    stack.extend(kids);
                }
                Op::Mul(kids) => {
                    let non_const = kids.iter().filter(|&&k| self.const_value(k).is_none()).count();
                    counts.multiplications += non_const.saturating_sub(1);
                    stack.extend(kids);
                }
            }
        }
        counts
    }

    /// Evaluates the nodes reachable from `outputs`.
    pub fn eval<S: Scalar>(
        &self,
        outputs: &[NodeId],
        value: &impl Fn(Var) -> Option<S>,
    ) -> Result<Vec<S>, ExactError> {
        let mut needed = vec![false; self.nodes.len()];
        let mut stack: Vec<NodeId> = outputs.to_vec();
        while let Some(id) = stack.pop() {
            if std::mem::replace(&mut needed[id], true) {
                continue;
            }
            if let Op::Add(k) | Op::Mul(k) = &self.nodes[id] {
                stack.extend(k);
            }
        }
        let mut vals: Vec<Option<S>> = vec![None; self.nodes.len()];
        for id in 0..self.nodes.len() {
            if !needed[id] {
                continue;
            }
            let get = |k: &NodeId| vals[*k].as_ref().expect("children precede parents");
            let v = match &self.nodes[id] {
                Op::Const(c) => S::from_rat(c),
                Op::Var(x) => value(*x).ok_or_else(|| ExactError::MissingVariable(x.name()))?,
                Op::Add(k) => k[1..].iter().fold(get(&k[0]).clone(), |acc, c| acc.add(get(c))),
                Op::Mul(k) => k[1..].iter().fold(get(&k[0]).clone(), |acc, c| acc.mul(get(c))),
            };
            vals[id] = Some(v);
        }
        Ok(outputs.iter().map(|&o| vals[o].clone().expect("evaluated")).collect())
    }

    /// Symbolic expansion of one node.
    pub fn expand(&self, output: NodeId) -> Poly {
        self.eval::<Poly>(&[output], &|v| Some(Poly::var(v))).expect("variables map to themselves").remove(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::poly;
    use crate::exact::rat::{int, rat};

    #[test]
    fn sharing_and_counts() {
        let mut c = Circuit::new();
        let x = c.var(Var::new("cx_x"));
        let y = c.var(Var::new("cx_y"));
        let xy = c.mul(x, y);
        let yx = c.mul(y, x);
        assert_eq!(xy, yx);
        let s = c.add(&[xy, x]);
        let half = c.constant(rat(1, 2));
        let out = c.mul(half, s);
        assert_eq!(c.op_counts(&[out]), OpCounts { multiplications: 1, additions: 1 });
        assert_eq!(c.expand(out), poly("1/2*cx_x*cx_y + 1/2*cx_x"));
        let vals = c.eval(&[out], &|v| Some(if v.name() == "cx_x" { int(2) } else { int(3) })).unwrap();
        assert_eq!(vals, vec![int(4)]);
    }

    #[test]
    fn unit_and_zero_folding() {
        let mut c = Circuit::new();
        let x = c.var(Var::new("cx_x"));
        let one = c.constant(int(1));
        let zero = c.constant(int(0));
        assert_eq!(c.mul(x, one), x);
        assert_eq!(c.mul(zero, x), zero);
        assert_eq!(c.add(&[zero, x]), x);
        assert!(c.eval::<f64>(&[x], &|_| None).is_err());
    }
}
