//! Flattenings, rank tests, vanishing checks, Jacobian dimensions and
//! mixtures.

pub mod interpolate;

use std::collections::{BTreeSet, HashMap, HashSet};

use num_traits::Zero;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::exact::matrix::rank;
use crate::exact::{ExactError, Matrix, Poly, Rat, Var};
use crate::fourier::{transform_tensor, FourierError, GroupSpec, MonomialMap};
use crate::models::{ModelSpec, ParamAssignment, RootSpec};
use crate::paramap::{JointMap, LeafPattern};
use crate::tree::{Split, Tree, TreeError};

pub use interpolate::{interpolate_vanishing_forms, Interpolation};

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum InvariantError {
    #[error("'{0}' is not a coordinate of this map")]
    UnknownCoordinate(String),
    #[error("bad shape: {0}")]
    Shape(String),
    #[error("mixture components disagree: {0}")]
    Mixture(String),
    #[error("interpolation failed: {0}")]
    Interpolation(String),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Exact(#[from] ExactError),
    #[error(transparent)]
    Fourier(#[from] FourierError),
}

/// A polynomial map from parameters to named coordinates.
pub trait CoordinateMap: Sync {
    fn num_coordinates(&self) -> usize;
    fn coordinate_name(&self, i: usize) -> String;
    fn parameters(&self) -> Vec<Var>;
    fn coordinate(&self, i: usize) -> Poly;
    fn eval_exact(&self, params: &ParamAssignment) -> Result<Vec<Rat>, ExactError>;

    fn index_of(&self, name: &str) -> Option<usize> {
        (0..self.num_coordinates()).find(|&i| self.coordinate_name(i) == name)
    }
}

impl CoordinateMap for JointMap {
    fn num_coordinates(&self) -> usize {
        JointMap::num_coordinates(self)
    }
    fn coordinate_name(&self, i: usize) -> String {
        JointMap::coordinate_name(self, i)
    }
    fn parameters(&self) -> Vec<Var> {
        self.model().parameters()
    }
    fn coordinate(&self, i: usize) -> Poly {
        JointMap::coordinate(self, i).clone()
    }
    fn eval_exact(&self, params: &ParamAssignment) -> Result<Vec<Rat>, ExactError> {
        JointMap::eval_exact(self, params)
    }
    fn index_of(&self, name: &str) -> Option<usize> {
        JointMap::index_of(self, name)
    }
}

impl CoordinateMap for MonomialMap {
    fn num_coordinates(&self) -> usize {
        MonomialMap::num_coordinates(self)
    }
    fn coordinate_name(&self, i: usize) -> String {
        MonomialMap::coordinate_name(self, i)
    }
    fn parameters(&self) -> Vec<Var> {
        MonomialMap::parameters(self)
    }
    fn coordinate(&self, i: usize) -> Poly {
        self.coordinate_poly(i)
    }
    fn eval_exact(&self, params: &ParamAssignment) -> Result<Vec<Rat>, ExactError> {
        self.eval(params)
    }
    fn index_of(&self, name: &str) -> Option<usize> {
        MonomialMap::index_of(self, name)
    }
}

/// An explicit list of named coordinate polynomials.
#[derive(Debug, Clone)]
pub struct PolyMap {
    pub names: Vec<String>,
    pub polys: Vec<Poly>,
    params: Vec<Var>,
}

impl PolyMap {
    /// Parameters are the variables of `polys`, sorted by name.
    pub fn new(names: Vec<String>, polys: Vec<Poly>) -> PolyMap {
        assert_eq!(names.len(), polys.len(), "one name per coordinate");
        let vars: BTreeSet<Var> = polys.iter().flat_map(|p| p.vars()).collect();
        let mut params: Vec<Var> = vars.into_iter().collect();
        params.sort_by_key(|v| v.name());
        PolyMap { names, polys, params }
    }

    /// The selected coordinates of another map.
    pub fn select(map: &impl CoordinateMap, indices: &[usize]) -> PolyMap {
        PolyMap::new(
            indices.iter().map(|&i| map.coordinate_name(i)).collect(),
            indices.iter().map(|&i| map.coordinate(i)).collect(),
        )
    }
}

impl CoordinateMap for PolyMap {
    fn num_coordinates(&self) -> usize {
        self.polys.len()
    }
    fn coordinate_name(&self, i: usize) -> String {
        self.names[i].clone()
    }
    fn parameters(&self) -> Vec<Var> {
        self.params.clone()
    }
    fn coordinate(&self, i: usize) -> Poly {
        self.polys[i].clone()
    }
    fn eval_exact(&self, params: &ParamAssignment) -> Result<Vec<Rat>, ExactError> {
        self.polys.iter().map(|p| p.eval(&params.values)).collect()
    }
}

/// Sum of tree-model maps with disjoint symbol pools. Component `j` has
/// its symbols suffixed `_j` (1-based). When every component has a uniform
/// root an explicit weight `s{j-1}` multiplies component `j`.
#[derive(Debug)]
pub struct MixtureMap {
    pub components: Vec<JointMap>,
    pub weights: Option<Vec<Var>>,
}

pub fn mixture_map(components: &[ModelSpec]) -> Result<MixtureMap, InvariantError> {
    let first = components.first().ok_or_else(|| InvariantError::Mixture("no components".into()))?;
    for c in &components[1..] {
        if c.k != first.k {
            return Err(InvariantError::Mixture(format!("{} states vs {}", c.k, first.k)));
        }
        if c.tree.leaf_labels() != first.tree.leaf_labels() {
            return Err(InvariantError::Mixture("leaf sets differ".into()));
        }
        if c.observed_nodes().len() != first.observed_nodes().len() {
            return Err(InvariantError::Mixture("observed node counts differ".into()));
        }
    }
    if components.len() == 1 {
        return Ok(MixtureMap { components: vec![JointMap::new(first.clone())], weights: None });
    }
    let maps = components.iter().enumerate().map(|(j, m)| JointMap::new(m.with_suffix(&format!("_{}", j + 1)))).collect();
    let weights = components
        .iter()
        .all(|m| m.root == RootSpec::Uniform)
        .then(|| (0..components.len()).map(|j| Var::new(&format!("s{j}"))).collect());
    Ok(MixtureMap { components: maps, weights })
}

impl MixtureMap {
    /// Parameters of the components alone, without mixing weights.
    pub fn component_parameter_count(&self) -> usize {
        self.components.iter().map(|c| c.model().parameters().len()).sum()
    }
}

impl CoordinateMap for MixtureMap {
    fn num_coordinates(&self) -> usize {
        self.components[0].num_coordinates()
    }
    fn coordinate_name(&self, i: usize) -> String {
        self.components[0].coordinate_name(i)
    }
    fn parameters(&self) -> Vec<Var> {
        let mut out: Vec<Var> = self.components.iter().flat_map(|c| c.model().parameters()).collect();
        if let Some(w) = &self.weights {
            out.extend(w);
        }
        out
    }
    fn coordinate(&self, i: usize) -> Poly {
        self.components
            .iter()
            .enumerate()
            .map(|(j, c)| match &self.weights {
                Some(w) => c.coordinate(i) * &Poly::var(w[j]),
                None => c.coordinate(i).clone(),
            })
            .sum()
    }
    fn eval_exact(&self, params: &ParamAssignment) -> Result<Vec<Rat>, ExactError> {
        let mut acc = vec![Rat::zero(); self.num_coordinates()];
        for (j, c) in self.components.iter().enumerate() {
            let vals = c.eval_exact(params)?;
            let w = match &self.weights {
                Some(w) => Some(params.get(w[j]).ok_or_else(|| ExactError::MissingVariable(w[j].name()))?),
                None => None,
            };
            for (a, v) in acc.iter_mut().zip(vals) {
                match w {
                    Some(w) => *a += v * w,
                    None => *a += v,
                }
            }
        }
        Ok(acc)
    }
}

/// Fourier coordinates `q_F` of any map into probability coordinates,
/// read off the raw transform at a representative character index.
pub struct FourierView<'a, M: CoordinateMap> {
    pub inner: &'a M,
    pub mm: &'a MonomialMap,
    group: GroupSpec,
}

impl<'a, M: CoordinateMap> FourierView<'a, M> {
    pub fn new(inner: &'a M, mm: &'a MonomialMap) -> Result<Self, InvariantError> {
        let group = GroupSpec::for_states(mm.k)?;
        if inner.num_coordinates() != mm.k.pow(mm.tree.num_leaves() as u32) {
            return Err(InvariantError::Shape("map and monomial map have different leaf counts".into()));
        }
        Ok(FourierView { inner, mm, group })
    }
}

impl<M: CoordinateMap> CoordinateMap for FourierView<'_, M> {
    fn num_coordinates(&self) -> usize {
        self.mm.num_coordinates()
    }
    fn coordinate_name(&self, i: usize) -> String {
        self.mm.coordinate_name(i)
    }
    fn parameters(&self) -> Vec<Var> {
        self.inner.parameters()
    }
    fn coordinate(&self, i: usize) -> Poly {
        let g = self.mm.representative(i);
        (0..self.inner.num_coordinates())
            .map(|s| self.inner.coordinate(s).scale(&Rat::from_integer(self.group.character(g, s).into())))
            .sum()
    }
    fn eval_exact(&self, params: &ParamAssignment) -> Result<Vec<Rat>, ExactError> {
        let p = self.inner.eval_exact(params)?;
        let q = transform_tensor(&p, self.group).expect("length checked in FourierView::new");
        Ok(self.mm.reindex_raw(&q))
    }
    fn index_of(&self, name: &str) -> Option<usize> {
        self.mm.index_of(name)
    }
}

/// Symbols `p<pattern>` for all `k^n` patterns.
pub fn symbolic_tensor(n: usize, k: usize) -> Vec<Poly> {
    (0..k.pow(n as u32)).map(|i| Poly::named(&format!("p{}", LeafPattern::from_flat(i, k, n).label()))).collect()
}

/// Matrix with rows indexed by the states on `split.below` and columns by
/// the states on `split.above`, both in lexicographic order with the
/// earlier leaf most significant.
pub fn flatten<T: Clone>(tensor: &[T], k: usize, split: &Split) -> Result<Matrix<T>, InvariantError> {
    let n = split.below.len() + split.above.len();
    if tensor.len() != k.pow(n as u32) {
        return Err(InvariantError::Shape(format!("tensor of length {} is not {k}^{n}", tensor.len())));
    }
    if split.below.is_empty() || split.above.is_empty() {
        return Err(TreeError::EmptySide.into());
    }
    let (nb, na) = (split.below.len(), split.above.len());
    Ok(Matrix::from_fn(k.pow(nb as u32), k.pow(na as u32), |r, c| {
        let rs = LeafPattern::from_flat(r, k, nb).states;
        let cs = LeafPattern::from_flat(c, k, na).states;
        let mut states = vec![0; n];
        for (&leaf, s) in split.below.iter().zip(rs) {
            states[leaf] = s;
        }
        for (&leaf, s) in split.above.iter().zip(cs) {
            states[leaf] = s;
        }
        tensor[LeafPattern { k, states }.flat()].clone()
    }))
}

pub fn flattening_rank(tensor: &[Rat], k: usize, split: &Split) -> Result<usize, InvariantError> {
    Ok(rank(&flatten(tensor, k, split)?))
}

/// Exact rank of a flattening of the map's tensor at `params`.
pub fn rank_at_point(
    map: &impl CoordinateMap,
    k: usize,
    split: &Split,
    params: &ParamAssignment,
) -> Result<usize, InvariantError> {
    flattening_rank(&map.eval_exact(params)?, k, split)
}

/// Whether every flattening along an internal edge of `tree` has rank at
/// most `r`.
pub fn variety_membership_minors(tensor: &[Rat], tree: &Tree, k: usize, r: usize) -> Result<bool, InvariantError> {
    for s in tree.internal_splits() {
        if flattening_rank(tensor, k, &s)? > r {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VanishingMode {
    /// Substitute and expand.
    Symbolic,
    /// Evaluate at random exact points.
    Randomized { points: usize, seed: u64 },
}

impl VanishingMode {
    pub fn randomized(seed: u64) -> VanishingMode {
        VanishingMode::Randomized { points: 25, seed }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub params: ParamAssignment,
    pub value: Rat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VanishingReport {
    pub vanishes: bool,
    pub witness: Option<Witness>,
}

fn coordinate_lookup(form: &Poly, map: &impl CoordinateMap) -> Result<Vec<(Var, usize)>, InvariantError> {
    form.vars()
        .into_iter()
        .map(|v| map.index_of(&v.name()).map(|i| (v, i)).ok_or_else(|| InvariantError::UnknownCoordinate(v.name())))
        .collect()
}

/// Whether `form`, a polynomial in the map's coordinate names, vanishes on
/// the image of the map.
pub fn vanishing_check(
    form: &Poly,
    map: &impl CoordinateMap,
    mode: VanishingMode,
) -> Result<VanishingReport, InvariantError> {
    let lookup = coordinate_lookup(form, map)?;
    match mode {
        VanishingMode::Symbolic => {
            let subst: HashMap<Var, Poly> = lookup.iter().map(|&(v, i)| (v, map.coordinate(i))).collect();
            Ok(VanishingReport { vanishes: form.substitute(&subst).is_zero(), witness: None })
        }
        VanishingMode::Randomized { points, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let params = map.parameters();
            for _ in 0..points {
                let p = ParamAssignment::random(&params, &mut rng);
                let vals = map.eval_exact(&p)?;
                let at: HashMap<Var, Rat> = lookup.iter().map(|&(v, i)| (v, vals[i].clone())).collect();
                let value = form.eval(&at)?;
                if !value.is_zero() {
                    return Ok(VanishingReport { vanishes: false, witness: Some(Witness { params: p, value }) });
                }
            }
            Ok(VanishingReport { vanishes: true, witness: None })
        }
    }
}

/// Distinct nonzero coordinate polynomials.
fn distinct_coordinates(map: &impl CoordinateMap) -> Vec<Poly> {
    let mut seen = HashSet::new();
    (0..map.num_coordinates()).map(|i| map.coordinate(i)).filter(|p| !p.is_zero() && seen.insert(p.clone())).collect()
}

/// Symbolic Jacobian: rows are distinct coordinates, columns parameters.
pub struct Jacobian {
    pub params: Vec<Var>,
    pub entries: Vec<Vec<Poly>>,
}

impl Jacobian {
    pub fn of(map: &impl CoordinateMap) -> Jacobian {
        let params = map.parameters();
        let entries =
            distinct_coordinates(map).iter().map(|p| params.iter().map(|&v| p.derivative(v)).collect()).collect();
        Jacobian { params, entries }
    }

    pub fn at(&self, point: &ParamAssignment) -> Result<Matrix<Rat>, ExactError> {
        let rows = self
            .entries
            .iter()
            .map(|row| row.iter().map(|p| p.eval(&point.values)).collect::<Result<Vec<_>, _>>())
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Matrix::from_rows(rows))
    }

    pub fn at_f64(&self, point: &HashMap<Var, f64>) -> Result<Vec<Vec<f64>>, ExactError> {
        self.entries.iter().map(|row| row.iter().map(|p| p.eval_f64(&|v| point.get(&v).copied())).collect()).collect()
    }

    pub fn rank_at(&self, point: &ParamAssignment) -> Result<usize, ExactError> {
        Ok(rank(&self.at(point)?))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dimension {
    pub affine_rank: usize,
    pub projective_dim: isize,
    /// Rank at each sampled point.
    pub ranks: Vec<usize>,
}

/// Maximum exact Jacobian rank over `points` random rational points; the
/// projective dimension is one less.
pub fn jacobian_dimension(map: &impl CoordinateMap, points: usize, seed: u64) -> Result<Dimension, InvariantError> {
    let jac = Jacobian::of(map);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ranks = (0..points)
        .map(|_| jac.rank_at(&ParamAssignment::random(&jac.params, &mut rng)))
        .collect::<Result<Vec<_>, _>>()?;
    let affine_rank = ranks.iter().copied().max().unwrap_or(0);
    Ok(Dimension { affine_rank, projective_dim: affine_rank as isize - 1, ranks })
}

/// Rank of the span of `polys` and a basis of the linear relations
/// `sum λ_i polys[i] = 0`.
pub fn linear_relations(polys: &[Poly]) -> (usize, Vec<Vec<Rat>>) {
    let monos: Vec<_> = polys.iter().flat_map(|p| p.terms().map(|(m, _)| m.clone())).collect::<BTreeSet<_>>().into_iter().collect();
    let a = Matrix::from_fn(monos.len(), polys.len(), |r, c| polys[c].coefficient(&monos[r]));
    crate::exact::rank_nullspace(&a)
}

/// Renders a relation vector as a linear form in the given names.
pub fn relation_form(coeffs: &[Rat], names: &[String]) -> Poly {
    coeffs.iter().zip(names).filter(|(c, _)| !c.is_zero()).map(|(c, n)| Poly::named(n).scale(c)).sum::<Poly>().normalized()
}

/// The three splits of four leaves, named as in `X_(12)(34)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NamedVariety {
    X12_34,
    X13_24,
    X14_23,
}

impl NamedVariety {
    pub const ALL: [NamedVariety; 3] = [NamedVariety::X12_34, NamedVariety::X13_24, NamedVariety::X14_23];

    pub fn split(self) -> Split {
        let below = match self {
            NamedVariety::X12_34 => [0, 1],
            NamedVariety::X13_24 => [0, 2],
            NamedVariety::X14_23 => [0, 3],
        };
        Split::from_indices(4, &below).expect("valid split")
    }
}

/// Whether all 3×3 minors of the flattening vanish, i.e. it has rank at
/// most 2. Needs a 2×2×2×2 tensor.
pub fn named_variety_check(tensor: &[Rat], which: NamedVariety) -> Result<bool, InvariantError> {
    if tensor.len() != 16 {
        return Err(InvariantError::Shape(format!("expected 16 entries, got {}", tensor.len())));
    }
    Ok(flattening_rank(tensor, 2, &which.split())? <= 2)
}

/// Substitutes `p_σ -> p_{|σ|}` (the number of ones) and drops repeated
/// rows and columns: the reduction under `u = v = w = x`.
pub fn diagonal_specialization(m: &Matrix<Poly>) -> Matrix<Poly> {
    let subst = |p: &Poly| -> Poly {
        let map: HashMap<Var, Var> = p
            .vars()
            .into_iter()
            .map(|v| {
                let name = v.name();
                let ones = name.chars().skip(1).filter(|&c| c == '1').count();
                (v, Var::new(&format!("p{ones}")))
            })
            .collect();
        p.rename(&map)
    };
    let full = m.map(subst);
    let mut rows: Vec<Vec<Poly>> = Vec::new();
    for r in 0..full.rows() {
        let row = full.row(r).to_vec();
        if !rows.contains(&row) {
            rows.push(row);
        }
    }
    let t = Matrix::from_rows(rows).transpose();
    let mut cols: Vec<Vec<Poly>> = Vec::new();
    for c in 0..t.rows() {
        let col = t.row(c).to_vec();
        if !cols.contains(&col) {
            cols.push(col);
        }
    }
    Matrix::from_rows(cols).transpose()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::poly;
    use crate::exact::rat::{int, rat};
    use crate::models::{make_model, ModelKind, RootMode};

    #[test]
    fn two_leaf_flattening() {
        let t = symbolic_tensor(2, 3);
        let m = flatten(&t, 3, &Split::from_indices(2, &[0]).unwrap()).unwrap();
        assert_eq!(m.rows(), 3);
        assert_eq!(m.get(1, 2), &poly("p12"));
        assert!(flatten(&t[..8], 3, &Split::from_indices(2, &[0]).unwrap()).is_err());
    }

    #[test]
    fn linear_relation_space() {
        let ps = [poly("x + y"), poly("x - y"), poly("x"), poly("y")];
        let (r, rel) = linear_relations(&ps);
        assert_eq!(r, 2);
        assert_eq!(rel.len(), 2);
        for v in rel {
            let s: Poly = ps.iter().zip(&v).map(|(p, c)| p.scale(c)).sum();
            assert!(s.is_zero());
        }
    }

    #[test]
    fn random_linear_form_does_not_vanish() {
        let t = Tree::parse_newick("(1,(2,3));").unwrap();
        let m = make_model(&t, ModelKind::GeneralMarkov, RootMode::Free, Some(2)).unwrap();
        let map = JointMap::new(m);
        let form = poly("3*p000 - 2*p011 + 5*p110");
        let r = vanishing_check(&form, &map, VanishingMode::randomized(1)).unwrap();
        assert!(!r.vanishes);
        let w = r.witness.unwrap();
        let vals = map.eval_exact(&w.params).unwrap();
        assert_eq!(w.value, int(3) * &vals[0] - int(2) * &vals[3] + int(5) * &vals[6]);
        assert!(!vanishing_check(&form, &map, VanishingMode::Symbolic).unwrap().vanishes);
        assert!(matches!(
            vanishing_check(&poly("p0000"), &map, VanishingMode::Symbolic),
            Err(InvariantError::UnknownCoordinate(_))
        ));
    }

    #[test]
    fn single_component_mixture_is_the_map() {
        let t = Tree::parse_newick("(1,(2,3));").unwrap();
        let m = make_model(&t, ModelKind::JcBinary, RootMode::Uniform, None).unwrap();
        let mix = mixture_map(std::slice::from_ref(&m)).unwrap();
        let map = JointMap::new(m);
        for i in 0..8 {
            assert_eq!(&mix.coordinate(i), map.coordinate(i));
        }
        let other = make_model(&t, ModelKind::JcDna, RootMode::Uniform, None).unwrap();
        assert!(mixture_map(&[map.model().clone(), other]).is_err());
    }

    #[test]
    fn hankel_reduction() {
        let t = symbolic_tensor(4, 2);
        for v in NamedVariety::ALL {
            let h = diagonal_specialization(&flatten(&t, 2, &v.split()).unwrap());
            assert_eq!(h.rows(), 3);
            assert_eq!(h.get(1, 1), &poly("p2"));
            assert_eq!(h.get(2, 0), &poly("p2"));
        }
        let tensor: Vec<Rat> = (0..16).map(|i| rat(i * i + 1, 1)).collect();
        assert!(named_variety_check(&tensor[..8], NamedVariety::X12_34).is_err());
    }
}
