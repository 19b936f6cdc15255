//! The joint-probability map of a tree model, as expanded polynomials and
//! as a shared sum-product circuit.

pub mod circuit;

use std::collections::HashMap;
use std::sync::OnceLock;

use num_traits::Zero;

use crate::exact::rat::rat;
use crate::exact::{ExactError, Mono, Poly, Rat, Var};
use crate::models::{ModelSpec, ParamAssignment, RootSpec};

pub use circuit::{Circuit, NodeId, Op, OpCounts, Scalar};

/// States at the observed nodes, with flat index `sum σ_i k^(m-i)` (the
/// first node is the most significant digit).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LeafPattern {
    pub k: usize,
    pub states: Vec<usize>,
}

impl LeafPattern {
    pub fn from_flat(mut index: usize, k: usize, len: usize) -> LeafPattern {
        let mut states = vec![0; len];
        for s in states.iter_mut().rev() {
            *s = index % k;
            index /= k;
        }
        LeafPattern { k, states }
    }

    pub fn flat(&self) -> usize {
        self.states.iter().fold(0, |acc, &s| acc * self.k + s)
    }

    /// `ACGT` letters for four states, digits otherwise.
    pub fn label(&self) -> String {
        self.states.iter().map(|&s| state_char(self.k, s)).collect()
    }

    /// Inverse of [`LeafPattern::label`].
    pub fn parse(label: &str, k: usize) -> Option<LeafPattern> {
        let states = label.chars().map(|c| state_index(k, c)).collect::<Option<Vec<_>>>()?;
        Some(LeafPattern { k, states })
    }
}

pub fn state_char(k: usize, s: usize) -> char {
    if k == 4 {
        b"ACGT"[s] as char
    } else {
        char::from_digit(s as u32, 10).expect("k <= 10")
    }
}

pub fn state_index(k: usize, c: char) -> Option<usize> {
    let s = if k == 4 { "ACGT".find(c.to_ascii_uppercase())? } else { c.to_digit(10)? as usize };
    (s < k).then_some(s)
}

/// Builds one circuit output per coordinate by passing messages up the
/// tree. The message of node `v` in state `s` is the product over its
/// children of `sum_t M_child(s, t) * message(child, t)`.
pub fn build_circuit(model: &ModelSpec) -> (Circuit, Vec<NodeId>) {
    let tree = &model.tree;
    let k = model.k;
    let observed = model.observed_nodes();
    let mut slot = vec![None; tree.num_nodes()];
    for (i, &v) in observed.iter().enumerate() {
        slot[v] = Some(i);
    }
    let post = tree.postorder();
    let mut c = Circuit::new();
    let one = c.constant(rat(1, 1));
    let zero = c.constant(Rat::zero());
    let mut outputs = Vec::with_capacity(model.num_coordinates());
    let mut msg: Vec<Vec<NodeId>> = vec![Vec::new(); tree.num_nodes()];
    for idx in 0..model.num_coordinates() {
        let pattern = LeafPattern::from_flat(idx, k, observed.len());
        for &v in &post {
            let fixed = slot[v].map(|i| pattern.states[i]);
            let mut m = Vec::with_capacity(k);
            for s in 0..k {
                if fixed.is_some_and(|f| f != s) {
                    m.push(zero);
                    continue;
                }
                let mut factors = Vec::new();
                for &ch in tree.children(v) {
                    let t = &model.edges[tree.edge_above(ch).expect("child has an edge")];
                    let mut terms = Vec::new();
                    for (u, &cm) in msg[ch].iter().enumerate() {
                        if cm == zero {
                            continue;
                        }
                        let cell = c.var(t.cell(s, u));
                        terms.push(c.mul(cell, cm));
                    }
                    factors.push(c.add(&terms));
                }
                m.push(if factors.is_empty() { one } else { c.product(&factors) });
            }
            msg[v] = m;
        }
        let root_msg = msg[tree.root()].clone();
        let out = match &model.root {
            RootSpec::Uniform => {
                let s = c.add(&root_msg);
                let w = c.constant(rat(1, k as i64));
                c.mul(w, s)
            }
            RootSpec::Free(pi) => {
                let terms: Vec<NodeId> = pi
                    .iter()
                    .zip(&root_msg)
                    .filter(|(_, &m)| m != zero)
                    .map(|(&p, &m)| {
                        let pv = c.var(p);
                        c.mul(pv, m)
                    })
                    .collect();
                c.add(&terms)
            }
        };
        outputs.push(out);
    }
    (c, outputs)
}

/// Expands one coordinate by summing over all states of the hidden nodes.
pub fn expand_coordinate(model: &ModelSpec, index: usize) -> Poly {
    let tree = &model.tree;
    let k = model.k;
    let observed = model.observed_nodes();
    let pattern = LeafPattern::from_flat(index, k, observed.len());
    let mut state = vec![0usize; tree.num_nodes()];
    let mut is_hidden = vec![true; tree.num_nodes()];
    for (i, &v) in observed.iter().enumerate() {
        state[v] = pattern.states[i];
        is_hidden[v] = false;
    }
    let hidden: Vec<usize> = (0..tree.num_nodes()).filter(|&v| is_hidden[v]).collect();
    let weight = match model.root {
        RootSpec::Uniform => rat(1, k as i64),
        RootSpec::Free(_) => rat(1, 1),
    };
    let mut out = Poly::zero();
    for h in 0..k.pow(hidden.len() as u32) {
        let hs = LeafPattern::from_flat(h, k, hidden.len());
        for (&v, &s) in hidden.iter().zip(&hs.states) {
            state[v] = s;
        }
        let mut factors: Vec<Var> = Vec::with_capacity(tree.num_edges() + 1);
        if let RootSpec::Free(pi) = &model.root {
            factors.push(pi[state[tree.root()]]);
        }
        for (e, t) in model.edges.iter().enumerate() {
            let (p, ch) = tree.edge(e).expect("valid edge");
            factors.push(t.cell(state[p], state[ch]));
        }
        out.add_term(Mono::from_factors(factors), weight.clone());
    }
    out
}

/// The map φ of a model: coordinates are indexed by patterns at the
/// observed nodes.
#[derive(Debug)]
pub struct JointMap {
    model: ModelSpec,
    circuit: Circuit,
    outputs: Vec<NodeId>,
    polys: Vec<OnceLock<Poly>>,
}

/// Builds the map; coordinate polynomials are expanded on first use.
pub fn expand_map(model: &ModelSpec) -> JointMap {
    JointMap::new(model.clone())
}

/// Coordinates with identical polynomials, and their sum.
#[derive(Debug, Clone, PartialEq)]
pub struct AccumulatedClass {
    pub members: Vec<usize>,
    pub poly: Poly,
}

impl JointMap {
    pub fn new(model: ModelSpec) -> JointMap {
        let (circuit, outputs) = build_circuit(&model);
        let polys = (0..outputs.len()).map(|_| OnceLock::new()).collect();
        JointMap { model, circuit, outputs, polys }
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    pub fn num_coordinates(&self) -> usize {
        self.outputs.len()
    }

    pub fn pattern(&self, index: usize) -> LeafPattern {
        LeafPattern::from_flat(index, self.model.k, self.model.observed_nodes().len())
    }

    /// `p` followed by the pattern label, e.g. `pAAC` or `p0110`.
    pub fn coordinate_name(&self, index: usize) -> String {
        format!("p{}", self.pattern(index).label())
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        let p = LeafPattern::parse(label.strip_prefix('p').unwrap_or(label), self.model.k)?;
        (p.states.len() == self.model.observed_nodes().len()).then(|| p.flat())
    }

    pub fn coordinate(&self, index: usize) -> &Poly {
        self.polys[index].get_or_init(|| expand_coordinate(&self.model, index))
    }

    /// Expands every coordinate, in parallel.
    pub fn expand_all(&self) -> Vec<&Poly> {
        let n = self.num_coordinates();
        let workers = std::thread::available_parallelism().map_or(1, |w| w.get()).min(n.max(1));
        std::thread::scope(|s| {
            for w in 0..workers {
                s.spawn(move || {
                    for i in (w..n).step_by(workers) {
                        self.coordinate(i);
                    }
                });
            }
        });
        (0..n).map(|i| self.coordinate(i)).collect()
    }

    pub fn circuit(&self) -> &Circuit {
        &self.circuit
    }

    pub fn output(&self, index: usize) -> NodeId {
        self.outputs[index]
    }

    pub fn circuit_op_counts(&self, index: usize) -> OpCounts {
        self.circuit.op_counts(&[self.outputs[index]])
    }

    pub fn expanded_op_counts(&self, index: usize) -> OpCounts {
        let (m, a) = self.coordinate(index).expanded_op_counts();
        OpCounts { multiplications: m, additions: a }
    }

    pub fn eval_exact(&self, params: &ParamAssignment) -> Result<Vec<Rat>, ExactError> {
        self.circuit.eval(&self.outputs, &|v| params.get(v).cloned())
    }

    pub fn eval_f64(&self, values: &HashMap<Var, f64>) -> Result<Vec<f64>, ExactError> {
        self.circuit.eval(&self.outputs, &|v| values.get(&v).copied())
    }

    /// Common total degree of all nonzero coordinates, if there is one.
    pub fn degree_profile(&self) -> Option<u32> {
        let mut deg = None;
        for p in self.expand_all() {
            if p.is_zero() {
                continue;
            }
            let d = p.homogeneous_degree()?;
            if deg.is_some_and(|x| x != d) {
                return None;
            }
            deg = Some(d);
        }
        deg
    }

    /// Coordinates grouped by equal polynomials, classes ordered by their
    /// smallest index.
    pub fn symmetry_classes(&self) -> Vec<Vec<usize>> {
        let polys = self.expand_all();
        let mut class_of: HashMap<&Poly, usize> = HashMap::new();
        let mut classes: Vec<Vec<usize>> = Vec::new();
        for (i, p) in polys.into_iter().enumerate() {
            let c = *class_of.entry(p).or_insert_with(|| {
                classes.push(Vec::new());
                classes.len() - 1
            });
            classes[c].push(i);
        }
        classes
    }

    /// Per class, class size times the shared polynomial.
    pub fn accumulate_classes(&self) -> Vec<AccumulatedClass> {
        self.symmetry_classes()
            .into_iter()
            .map(|members| {
                let poly = self.coordinate(members[0]).scale(&rat(members.len() as i64, 1));
                AccumulatedClass { members, poly }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::poly;
    use crate::models::{make_model, ModelKind, RootMode};
    use crate::tree::Tree;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn three() -> Tree {
        Tree::parse_newick("(1,(2,3));").unwrap()
    }

    #[test]
    fn patterns() {
        let p = LeafPattern::from_flat(6, 2, 3);
        assert_eq!(p.states, vec![1, 1, 0]);
        assert_eq!(p.flat(), 6);
        assert_eq!(LeafPattern::from_flat(1, 4, 3).label(), "AAC");
        assert_eq!(LeafPattern::parse("AAC", 4).unwrap().flat(), 1);
    }

    #[test]
    fn general_markov_coordinate() {
        let m = make_model(&three(), ModelKind::GeneralMarkov, RootMode::Free, Some(2)).unwrap();
        let map = expand_map(&m);
        let p = map.coordinate(map.index_of("p101").unwrap());
        let expected = poly("pi0*a01*b00*c00*d01 + pi0*a01*b01*c10*d11 + pi1*a11*b10*c00*d01 + pi1*a11*b11*c10*d11");
        assert_eq!(p, &expected);
        assert_eq!(map.degree_profile(), Some(5));
        assert_eq!(map.symmetry_classes().len(), 8);
    }

    #[test]
    fn degrees() {
        let m = make_model(&three(), ModelKind::GeneralMarkov, RootMode::Uniform, Some(2)).unwrap();
        assert_eq!(expand_map(&m).degree_profile(), Some(4));
        let one = Tree::parse_newick("(1);").unwrap();
        let m = make_model(&one, ModelKind::GeneralMarkov, RootMode::Free, Some(3)).unwrap();
        assert_eq!(expand_map(&m).degree_profile(), Some(2));
    }

    #[test]
    fn circuit_matches_expansion() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (nwk, kind, root, k) in [
            ("(1,(2,3));", ModelKind::JcDna, RootMode::Uniform, None),
            ("((1,2),(3,4));", ModelKind::GeneralMarkov, RootMode::Free, Some(2)),
            ("(1,2,3);", ModelKind::Kimura3, RootMode::Free, None),
        ] {
            let m = make_model(&Tree::parse_newick(nwk).unwrap(), kind, root, k).unwrap();
            let map = expand_map(&m);
            let p = ParamAssignment::random(&m.parameters(), &mut rng);
            let vals = map.eval_exact(&p).unwrap();
            for (i, v) in vals.iter().enumerate() {
                assert_eq!(&map.coordinate(i).eval(&p.values).unwrap(), v);
            }
        }
    }

    #[test]
    fn homogeneous_op_counts() {
        let kind = ModelKind::Homogeneous(Box::new(ModelKind::GeneralMarkov));
        let m = make_model(&three(), kind, RootMode::Free, Some(2)).unwrap();
        let map = expand_map(&m);
        let c = map.circuit_op_counts(0);
        assert_eq!((c.multiplications, c.additions), (10, 3));
        let e = map.expanded_op_counts(0);
        assert_eq!((e.multiplications, e.additions), (16, 3));
    }

    #[test]
    fn observed_internal_nodes_give_monomials() {
        let m = make_model(&three(), ModelKind::GeneralMarkov, RootMode::Free, Some(2)).unwrap().without_hidden_nodes();
        let map = expand_map(&m);
        assert_eq!(map.num_coordinates(), 32);
        assert!(map.expand_all().iter().all(|p| p.num_terms() == 1));
    }
}
