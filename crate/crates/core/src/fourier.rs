//! Group-based models in Fourier coordinates.
//!
//! States are elements of Z2 or Z2×Z2 encoded as integers whose bits are
//! the coordinates, so addition is xor and the character pairing is
//! `χ_g(h) = (-1)^popcount(g & h)`. Because the flat index of a pattern
//! concatenates the per-leaf bits, the transform of a whole tensor is a
//! single Walsh-Hadamard transform over the flat index.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::ops::{Add, Sub};

use num_traits::Zero;
use thiserror::Error;

use crate::exact::rat::{int, rat};
use crate::exact::{Matrix, Mono, Poly, Rat, Var};
use crate::models::{ModelSpec, ParamAssignment, RootSpec};
use crate::paramap::LeafPattern;
use crate::tree::{Subforest, Tree};

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum FourierError {
    #[error("no character group for {0} states")]
    NoGroup(usize),
    #[error("tensor length {len} is not a power of {k}")]
    KMismatch { len: usize, k: usize },
    #[error("model {0} is not group-based")]
    NotGroupBased(String),
    #[error("the monomial map needs a uniform root distribution")]
    RootNotUniform,
    #[error("binomial search supports degree 1 to 3, not {0}")]
    Degree(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Group {
    Z2,
    Z2xZ2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroupSpec {
    pub group: Group,
}

impl GroupSpec {
    pub fn for_states(k: usize) -> Result<GroupSpec, FourierError> {
        match k {
            2 => Ok(GroupSpec { group: Group::Z2 }),
            4 => Ok(GroupSpec { group: Group::Z2xZ2 }),
            _ => Err(FourierError::NoGroup(k)),
        }
    }

    pub fn order(&self) -> usize {
        match self.group {
            Group::Z2 => 2,
            Group::Z2xZ2 => 4,
        }
    }

    /// Elements in fixed order, identity first.
    pub fn elements(&self) -> Vec<usize> {
        (0..self.order()).collect()
    }

    pub fn add(&self, g: usize, h: usize) -> usize {
        g ^ h
    }

    pub fn character(&self, g: usize, h: usize) -> i64 {
        if (g & h).count_ones().is_multiple_of(2) {
            1
        } else {
            -1
        }
    }

    pub fn character_table(&self) -> Vec<Vec<i64>> {
        let els = self.elements();
        els.iter().map(|&g| els.iter().map(|&h| self.character(g, h)).collect()).collect()
    }
}

fn tensor_order(len: usize, k: usize) -> Result<usize, FourierError> {
    let mut n = 0;
    let mut m = 1;
    while m < len {
        m *= k;
        n += 1;
    }
    if m != len || len == 0 {
        return Err(FourierError::KMismatch { len, k });
    }
    Ok(n)
}

/// In-place Walsh-Hadamard transform of a power-of-two length vector.
pub fn walsh_hadamard<T>(v: &mut [T])
where
    T: Clone,
    for<'a> &'a T: Add<&'a T, Output = T> + Sub<&'a T, Output = T>,
{
    let n = v.len();
    assert!(n.is_power_of_two(), "length must be a power of two");
    let mut h = 1;
    while h < n {
        for start in (0..n).step_by(2 * h) {
            for i in start..start + h {
                let x = &v[i] + &v[i + h];
                let y = &v[i] - &v[i + h];
                v[i] = x;
                v[i + h] = y;
            }
        }
        h *= 2;
    }
}

/// `q_g = sum_σ p_σ prod_i χ_{g_i}(σ_i)` over the whole tensor.
pub fn transform_tensor(p: &[Rat], group: GroupSpec) -> Result<Vec<Rat>, FourierError> {
    tensor_order(p.len(), group.order())?;
    let mut q = p.to_vec();
    walsh_hadamard(&mut q);
    Ok(q)
}

/// Inverse transform: the adjoint scaled by `1/k^n`.
pub fn inverse_transform(q: &[Rat], group: GroupSpec) -> Result<Vec<Rat>, FourierError> {
    tensor_order(q.len(), group.order())?;
    let mut p = q.to_vec();
    walsh_hadamard(&mut p);
    let scale = rat(1, q.len() as i64);
    Ok(p.into_iter().map(|x| x * &scale).collect())
}

pub fn transform_tensor_f64(p: &[f64], group: GroupSpec) -> Result<Vec<f64>, FourierError> {
    tensor_order(p.len(), group.order())?;
    let mut q = p.to_vec();
    walsh_hadamard(&mut q);
    Ok(q)
}

/// Group labels on the edges, in edge order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FourierIndex {
    pub labels: Vec<usize>,
}

impl FourierIndex {
    /// Edges with a non-identity label.
    pub fn indicator(&self) -> Subforest {
        Subforest(self.labels.iter().map(|&h| h != 0).collect())
    }
}

/// Edge labels induced by leaf labels: each edge gets the sum of the
/// labels below it. `None` when the leaf labels do not sum to the
/// identity, where the coordinate vanishes on the model.
pub fn leaf_to_edge_labels(tree: &Tree, leaf_labels: &[usize]) -> Option<FourierIndex> {
    assert_eq!(leaf_labels.len(), tree.num_leaves(), "one label per leaf");
    if leaf_labels.iter().fold(0, |a, &g| a ^ g) != 0 {
        return None;
    }
    let mut below = vec![0usize; tree.num_nodes()];
    for (i, &leaf) in tree.leaves().iter().enumerate() {
        below[leaf] = leaf_labels[i];
    }
    for v in tree.postorder() {
        if let Some(p) = tree.parent(v) {
            below[p] ^= below[v];
        }
    }
    let labels = (0..tree.num_edges()).map(|e| below[tree.edge(e).expect("valid").1]).collect();
    Some(FourierIndex { labels })
}

/// Edge-label vectors of all zero-sum leaf labellings, reduced to the
/// non-identity indicator. For the Jukes-Cantor models these are exactly
/// the subforests.
pub fn support_classes(tree: &Tree, group: GroupSpec) -> BTreeSet<Subforest> {
    let k = group.order();
    let n = tree.num_leaves();
    (0..k.pow(n as u32))
        .filter_map(|i| leaf_to_edge_labels(tree, &LeafPattern::from_flat(i, k, n).states))
        .map(|f| f.indicator())
        .collect()
}

/// Per edge, the transformed parameters `û_e(g) = sum_x M_e(0, x) χ_g(x)`
/// as linear forms, grouped into classes of equal value. Class 0 holds the
/// identity.
#[derive(Debug, Clone)]
pub struct TransformedParams {
    pub group: GroupSpec,
    /// `values[e][g]`.
    pub values: Vec<Vec<Poly>>,
    /// `class[e][g]`.
    pub class: Vec<Vec<usize>>,
    /// `symbols[e][c]`: uppercase family letter followed by the class.
    pub symbols: Vec<Vec<Var>>,
}

pub fn transform_params(model: &ModelSpec) -> Result<TransformedParams, FourierError> {
    if !model.kind.is_group_based() || !model.edges.iter().all(|t| t.is_group_translation()) {
        return Err(FourierError::NotGroupBased(model.kind.to_string()));
    }
    let group = GroupSpec::for_states(model.k)?;
    let mut values = Vec::new();
    let mut class = Vec::new();
    let mut symbols = Vec::new();
    for t in &model.edges {
        let vals: Vec<Poly> = group
            .elements()
            .into_iter()
            .map(|g| (0..model.k).map(|x| Poly::var(t.cell(0, x)).scale(&int(group.character(g, x)))).sum())
            .collect();
        let mut distinct: Vec<&Poly> = Vec::new();
        let cls: Vec<usize> = vals
            .iter()
            .map(|v| match distinct.iter().position(|d| *d == v) {
                Some(c) => c,
                None => {
                    distinct.push(v);
                    distinct.len() - 1
                }
            })
            .collect();
        let fam = t.family.to_uppercase();
        symbols.push((0..distinct.len()).map(|c| Var::new(&format!("{fam}{c}"))).collect());
        class.push(cls);
        values.push(vals);
    }
    Ok(TransformedParams { group, values, class, symbols })
}

impl TransformedParams {
    /// Transformed symbol to linear form in the original symbols.
    pub fn substitution(&self) -> HashMap<Var, Poly> {
        let mut out = HashMap::new();
        for e in 0..self.values.len() {
            for (g, &c) in self.class[e].iter().enumerate() {
                out.entry(self.symbols[e][c]).or_insert_with(|| self.values[e][g].clone());
            }
        }
        out
    }

    /// Values of the transformed symbols at a point of the original
    /// parameters.
    pub fn evaluate(&self, params: &ParamAssignment) -> Result<ParamAssignment, crate::exact::ExactError> {
        let mut out = ParamAssignment::new();
        for (v, p) in self.substitution() {
            out.set(v, p.eval(&params.values)?);
        }
        Ok(out)
    }

    /// Distinct transformed symbols in edge order.
    pub fn parameters(&self) -> Vec<Var> {
        let mut seen = BTreeSet::new();
        self.symbols.iter().flatten().copied().filter(|v| seen.insert(*v)).collect()
    }
}

/// The toric parameterisation `q_F = prod_e û_e(F_e)`, one coordinate per
/// realisable vector `F` of per-edge classes (for the Jukes-Cantor models,
/// per subforest).
#[derive(Debug, Clone)]
pub struct MonomialMap {
    pub tree: Tree,
    pub k: usize,
    pub params: TransformedParams,
    /// Class vectors, lexicographically ordered.
    pub keys: Vec<Vec<usize>>,
    pub monos: Vec<Mono>,
    /// Flat leaf-label indices realising each key.
    pub labellings: Vec<Vec<usize>>,
}

pub fn monomial_map(model: &ModelSpec) -> Result<MonomialMap, FourierError> {
    let params = transform_params(model)?;
    if model.root != RootSpec::Uniform {
        return Err(FourierError::RootNotUniform);
    }
    let tree = &model.tree;
    let k = model.k;
    let n = tree.num_leaves();
    let mut groups: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
    for i in 0..k.pow(n as u32) {
        if let Some(idx) = leaf_to_edge_labels(tree, &LeafPattern::from_flat(i, k, n).states) {
            let key: Vec<usize> = idx.labels.iter().enumerate().map(|(e, &h)| params.class[e][h]).collect();
            groups.entry(key).or_default().push(i);
        }
    }
    let keys: Vec<Vec<usize>> = groups.keys().cloned().collect();
    let monos = keys
        .iter()
        .map(|key| Mono::from_factors(key.iter().enumerate().map(|(e, &c)| params.symbols[e][c])))
        .collect();
    let labellings = groups.into_values().collect();
    Ok(MonomialMap { tree: tree.clone(), k, params, keys, monos, labellings })
}

pub fn key_string(key: &[usize]) -> String {
    key.iter().map(|c| char::from_digit(*c as u32, 10).expect("class < 10")).collect()
}

impl MonomialMap {
    pub fn num_coordinates(&self) -> usize {
        self.keys.len()
    }

    /// `q` followed by the per-edge classes, e.g. `q1101`.
    pub fn coordinate_name(&self, i: usize) -> String {
        format!("q{}", key_string(&self.keys[i]))
    }

    pub fn coordinate_var(&self, i: usize) -> Var {
        Var::new(&self.coordinate_name(i))
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        let s = name.strip_prefix('q').unwrap_or(name);
        self.keys.iter().position(|k| key_string(k) == s)
    }

    pub fn parameters(&self) -> Vec<Var> {
        self.params.parameters()
    }

    /// A raw character index whose transformed coordinate equals `q_F` on
    /// the model.
    pub fn representative(&self, i: usize) -> usize {
        self.labellings[i][0]
    }

    /// Picks the class coordinates out of a raw transformed tensor.
    pub fn reindex_raw<T: Clone>(&self, raw: &[T]) -> Vec<T> {
        (0..self.keys.len()).map(|i| raw[self.representative(i)].clone()).collect()
    }

    pub fn coordinate_poly(&self, i: usize) -> Poly {
        Poly::term(self.monos[i].clone(), int(1))
    }

    /// Rows are transformed parameters, columns coordinates.
    pub fn exponent_matrix(&self) -> Vec<Vec<u32>> {
        self.parameters().iter().map(|&v| self.monos.iter().map(|m| m.exponent(v)).collect()).collect()
    }

    pub fn exponent_csv(&self) -> String {
        let mut s = String::from("parameter");
        for i in 0..self.num_coordinates() {
            s.push(',');
            s.push_str(&self.coordinate_name(i));
        }
        s.push('\n');
        for (v, row) in self.parameters().iter().zip(self.exponent_matrix()) {
            s.push_str(&v.name());
            for x in row {
                s.push_str(&format!(",{x}"));
            }
            s.push('\n');
        }
        s
    }

    /// Values at a point given in transformed parameters.
    pub fn eval(&self, values: &ParamAssignment) -> Result<Vec<Rat>, crate::exact::ExactError> {
        self.monos.iter().map(|m| m.eval(&|v| values.get(v).cloned())).collect()
    }
}

/// Coefficients expressing the Fourier coordinates through accumulated
/// class sums: entry `[F][C]` is the average over `σ ∈ C` and over the
/// labellings `g` of `F` of `prod_i χ_{g_i}(σ_i)`. On the model, where `p`
/// is constant on each class, `q_F = sum_C c[F][C] * P_C`.
pub fn accumulated_coefficients(mm: &MonomialMap, classes: &[Vec<usize>]) -> Matrix<Rat> {
    let group = mm.params.group;
    Matrix::from_fn(mm.num_coordinates(), classes.len(), |f, c| {
        let ls = &mm.labellings[f];
        let mut total = Rat::zero();
        for &sigma in &classes[c] {
            for &g in ls {
                total += int(group.character(g, sigma));
            }
        }
        total / rat((ls.len() * classes[c].len()) as i64, 1)
    })
}

/// All binomials `q^α - q^β` of degree at most `d` whose monomials have
/// equal images and disjoint supports, normalised and without repeats.
/// Ordered by degree, then by first appearance in a lexicographic walk.
pub fn binomials_up_to_degree(mm: &MonomialMap, d: usize) -> Result<Vec<Poly>, FourierError> {
    if !(1..=3).contains(&d) {
        return Err(FourierError::Degree(d));
    }
    let n = mm.num_coordinates();
    let vars: Vec<Var> = (0..n).map(|i| mm.coordinate_var(i)).collect();
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for deg in 1..=d {
        let mut index: HashMap<Mono, usize> = HashMap::new();
        let mut groups: Vec<Vec<Vec<usize>>> = Vec::new();
        for ms in multisets(n, deg) {
            let image = ms.iter().fold(Mono::one(), |acc, &i| acc.mul(&mm.monos[i]));
            let g = *index.entry(image).or_insert_with(|| {
                groups.push(Vec::new());
                groups.len() - 1
            });
            groups[g].push(ms);
        }
        for group in &groups {
            for (i, a) in group.iter().enumerate() {
                for b in &group[i + 1..] {
                    if a.iter().any(|x| b.contains(x)) {
                        continue;
                    }
                    let mono = |ms: &[usize]| Poly::term(Mono::from_factors(ms.iter().map(|&j| vars[j])), int(1));
                    let p = (mono(a) - mono(b)).normalized();
                    if seen.insert(p.to_string()) {
                        out.push(p);
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Non-decreasing index sequences of length `t` over `0..n`.
fn multisets(n: usize, t: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(t);
    fn rec(start: usize, n: usize, t: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == t {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i, n, t, cur, out);
            cur.pop();
        }
    }
    rec(0, n, t, &mut cur, &mut out);
    out
}
