//! Model families: per-edge transition-matrix templates with tied cells,
//! and the root distribution.
//!
//! States of the four-state models are identified with Z2×Z2 as
//! A=(0,0), C=(0,1), G=(1,0), T=(1,1), i.e. state `s` is the group element
//! with bits `s`, and group addition is xor.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use num_traits::{One, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exact::rat::{format_rat, parse_rat, rat};
use crate::exact::{Rat, Var};
use crate::tree::{edge_letter, NewickError, Tree};

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("unsupported model kind '{0}'")]
    UnsupportedKind(String),
    #[error("model {kind} has {expected} states, not {given}")]
    KMismatch { kind: String, expected: usize, given: usize },
    #[error("model {0} needs an explicit number of states")]
    MissingK(String),
    #[error("unsupported number of states {0}")]
    BadK(usize),
    #[error("model {0} requires a uniform root distribution")]
    RootMode(String),
    #[error("unknown root mode '{0}'")]
    UnknownRoot(String),
    #[error("no value for parameter '{0}'")]
    MissingSymbol(String),
    #[error("unknown parameter '{0}'")]
    UnknownSymbol(String),
    #[error("cannot parse rational '{0}'")]
    BadRational(String),
    #[error(transparent)]
    Newick(#[from] NewickError),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ModelKind {
    GeneralMarkov,
    JcBinary,
    JcDna,
    Kimura2,
    Kimura3,
    Reversible,
    Homogeneous(Box<ModelKind>),
}

impl ModelKind {
    /// Number of states fixed by the kind, if any.
    pub fn fixed_k(&self) -> Option<usize> {
        match self {
            ModelKind::JcBinary => Some(2),
            ModelKind::JcDna | ModelKind::Kimura2 | ModelKind::Kimura3 => Some(4),
            ModelKind::GeneralMarkov | ModelKind::Reversible => None,
            ModelKind::Homogeneous(base) => base.fixed_k(),
        }
    }

    /// Transition matrices constant on the cosets of Z2 or Z2×Z2.
    pub fn is_group_based(&self) -> bool {
        match self {
            ModelKind::JcBinary | ModelKind::JcDna | ModelKind::Kimura2 | ModelKind::Kimura3 => true,
            ModelKind::Homogeneous(base) => base.is_group_based(),
            _ => false,
        }
    }

    pub fn base(&self) -> &ModelKind {
        match self {
            ModelKind::Homogeneous(b) => b.base(),
            k => k,
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelKind::GeneralMarkov => f.write_str("general-markov"),
            ModelKind::JcBinary => f.write_str("jc-binary"),
            ModelKind::JcDna => f.write_str("jc-dna"),
            ModelKind::Kimura2 => f.write_str("kimura2"),
            ModelKind::Kimura3 => f.write_str("kimura3"),
            ModelKind::Reversible => f.write_str("reversible"),
            ModelKind::Homogeneous(b) => write!(f, "homogeneous:{b}"),
        }
    }
}

impl FromStr for ModelKind {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if let Some(base) = s.strip_prefix("homogeneous") {
            let base = base.strip_prefix(':').unwrap_or(if base.is_empty() { "general-markov" } else { base });
            let base: ModelKind = base.parse()?;
            if matches!(base, ModelKind::Homogeneous(_)) {
                return Err(ModelError::UnsupportedKind(s.to_string()));
            }
            return Ok(ModelKind::Homogeneous(Box::new(base)));
        }
        Ok(match s {
            "general-markov" | "gm" => ModelKind::GeneralMarkov,
            "jc-binary" | "jc2" => ModelKind::JcBinary,
            "jc-dna" | "jc" | "jc4" => ModelKind::JcDna,
            "kimura2" | "k2p" => ModelKind::Kimura2,
            "kimura3" | "k3p" => ModelKind::Kimura3,
            "reversible" => ModelKind::Reversible,
            _ => return Err(ModelError::UnsupportedKind(s.to_string())),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RootMode {
    Uniform,
    Free,
}

impl FromStr for RootMode {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "uniform" => Ok(RootMode::Uniform),
            "free" => Ok(RootMode::Free),
            other => Err(ModelError::UnknownRoot(other.to_string())),
        }
    }
}

impl fmt::Display for RootMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RootMode::Uniform => "uniform",
            RootMode::Free => "free",
        })
    }
}

/// A k×k matrix of parameter symbols; repeated symbols encode ties.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeTemplate {
    pub k: usize,
    /// Symbol family, the edge letter (or the shared letter of a
    /// homogeneous model).
    pub family: String,
    cells: Vec<Var>,
}

impl EdgeTemplate {
    fn build(kind: &ModelKind, k: usize, family: &str) -> EdgeTemplate {
        let name = |suffix: String| Var::new(&format!("{family}{suffix}"));
        let cells = (0..k * k)
            .map(|idx| {
                let (i, j) = (idx / k, idx % k);
                match kind {
                    ModelKind::GeneralMarkov => name(format!("{i}{j}")),
                    ModelKind::JcBinary | ModelKind::JcDna => name(if i == j { "0" } else { "1" }.into()),
                    ModelKind::Kimura3 => name(format!("{}", i ^ j)),
                    // Transversions (xor 1 and 3) share a1; transitions A<->G, C<->T use a2.
                    ModelKind::Kimura2 => name(match i ^ j {
                        0 => "0".into(),
                        2 => "2".into(),
                        _ => "1".into(),
                    }),
                    ModelKind::Reversible => name(format!("{}{}", i.min(j), i.max(j))),
                    ModelKind::Homogeneous(_) => unreachable!("homogeneous kinds are unwrapped first"),
                }
            })
            .collect();
        EdgeTemplate { k, family: family.to_string(), cells }
    }

    pub fn cell(&self, i: usize, j: usize) -> Var {
        self.cells[i * self.k + j]
    }

    pub fn cells(&self) -> &[Var] {
        &self.cells
    }

    /// Distinct symbols in row-major first-appearance order.
    pub fn symbols(&self) -> Vec<Var> {
        let mut seen = BTreeSet::new();
        self.cells.iter().copied().filter(|v| seen.insert(*v)).collect()
    }

    /// `true` when cell (i,j) depends only on `i xor j`.
    pub fn is_group_translation(&self) -> bool {
        (0..self.k).all(|i| (0..self.k).all(|j| self.cell(i, j) == self.cell(0, i ^ j)))
    }

    fn renamed(&self, map: &HashMap<Var, Var>) -> EdgeTemplate {
        EdgeTemplate {
            k: self.k,
            family: self.family.clone(),
            cells: self.cells.iter().map(|v| *map.get(v).unwrap_or(v)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RootSpec {
    /// Constant weight 1/k for every state.
    Uniform,
    Free(Vec<Var>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub k: usize,
    pub tree: Tree,
    pub edges: Vec<EdgeTemplate>,
    pub root: RootSpec,
    /// When set, internal nodes are observed too and the map is monomial.
    pub observe_internal: bool,
}

/// Builds the model on `tree`. Edge symbol families are the edge letters
/// `a, b, c, ...` in edge order; homogeneous models share family `a`.
pub fn make_model(tree: &Tree, kind: ModelKind, root: RootMode, k: Option<usize>) -> Result<ModelSpec, ModelError> {
    let k = match (kind.fixed_k(), k) {
        (Some(f), Some(g)) if f != g => return Err(ModelError::KMismatch { kind: kind.to_string(), expected: f, given: g }),
        (Some(f), _) => f,
        (None, Some(g)) => g,
        (None, None) => return Err(ModelError::MissingK(kind.to_string())),
    };
    if !(1..=10).contains(&k) {
        return Err(ModelError::BadK(k));
    }
    if matches!(kind.base(), ModelKind::Reversible) && root == RootMode::Free {
        return Err(ModelError::RootMode(kind.to_string()));
    }
    let edges = match &kind {
        ModelKind::Homogeneous(base) => {
            let t = EdgeTemplate::build(base, k, "a");
            vec![t; tree.num_edges()]
        }
        base => (0..tree.num_edges()).map(|e| EdgeTemplate::build(base, k, &edge_letter(e))).collect(),
    };
    let root = match root {
        RootMode::Uniform => RootSpec::Uniform,
        RootMode::Free => RootSpec::Free((0..k).map(|i| Var::new(&format!("pi{i}"))).collect()),
    };
    Ok(ModelSpec { kind, k, tree: tree.clone(), edges, root, observe_internal: false })
}

impl ModelSpec {
    pub fn root_mode(&self) -> RootMode {
        match self.root {
            RootSpec::Uniform => RootMode::Uniform,
            RootSpec::Free(_) => RootMode::Free,
        }
    }

    /// The same model with every internal node observed.
    pub fn without_hidden_nodes(mut self) -> ModelSpec {
        self.observe_internal = true;
        self
    }

    /// Nodes whose states index the coordinates: the leaves in leaf order,
    /// followed by the internal nodes in pre-order when those are observed.
    pub fn observed_nodes(&self) -> Vec<usize> {
        let mut v = self.tree.leaves().to_vec();
        if self.observe_internal {
            v.extend((0..self.tree.num_nodes()).filter(|&x| !self.tree.is_leaf(x)));
        }
        v
    }

    pub fn num_coordinates(&self) -> usize {
        self.k.pow(self.observed_nodes().len() as u32)
    }

    /// Distinct parameter symbols: edge symbols in edge order, then the
    /// root symbols.
    pub fn parameters(&self) -> Vec<Var> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for t in &self.edges {
            for v in t.symbols() {
                if seen.insert(v) {
                    out.push(v);
                }
            }
        }
        if let RootSpec::Free(pi) = &self.root {
            out.extend(pi.iter().copied());
        }
        out
    }

    /// Symbols of one edge's template.
    pub fn edge_family(&self, e: usize) -> BTreeSet<Var> {
        self.edges[e].symbols().into_iter().collect()
    }

    /// Copy with every symbol renamed to `name + suffix`.
    pub fn with_suffix(&self, suffix: &str) -> ModelSpec {
        let map: HashMap<Var, Var> =
            self.parameters().into_iter().map(|v| (v, Var::new(&format!("{}{suffix}", v.name())))).collect();
        let mut out = self.clone();
        out.edges = self.edges.iter().map(|t| t.renamed(&map)).collect();
        if let RootSpec::Free(pi) = &self.root {
            out.root = RootSpec::Free(pi.iter().map(|v| map[v]).collect());
        }
        out
    }
}

pub fn parameter_count(model: &ModelSpec) -> usize {
    model.parameters().len()
}

/// Values for the model symbols.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamAssignment {
    pub values: HashMap<Var, Rat>,
}

impl ParamAssignment {
    pub fn new() -> ParamAssignment {
        ParamAssignment::default()
    }

    pub fn set(&mut self, v: Var, x: Rat) {
        self.values.insert(v, x);
    }

    pub fn set_named(&mut self, name: &str, x: Rat) {
        self.values.insert(Var::new(name), x);
    }

    pub fn get(&self, v: Var) -> Option<&Rat> {
        self.values.get(&v)
    }

    /// Errors on the first symbol of `vars` without a value.
    pub fn require(&self, vars: &[Var]) -> Result<(), ModelError> {
        match vars.iter().find(|v| !self.values.contains_key(v)) {
            Some(v) => Err(ModelError::MissingSymbol(v.name())),
            None => Ok(()),
        }
    }

    /// Values `n/d` with `n, d` uniform in 1..=97.
    pub fn random(vars: &[Var], rng: &mut impl Rng) -> ParamAssignment {
        let mut p = ParamAssignment::new();
        for &v in vars {
            p.set(v, random_rat(rng));
        }
        p
    }

    /// Parses `{"a0": "3/4", ...}`.
    pub fn from_strings(map: &BTreeMap<String, String>) -> Result<ParamAssignment, ModelError> {
        let mut p = ParamAssignment::new();
        for (k, s) in map {
            if !crate::exact::var::is_valid_name(k) {
                return Err(ModelError::UnknownSymbol(k.clone()));
            }
            let x = parse_rat(s).ok_or_else(|| ModelError::BadRational(s.clone()))?;
            p.set_named(k, x);
        }
        Ok(p)
    }

    pub fn to_strings(&self) -> BTreeMap<String, String> {
        self.values.iter().map(|(v, x)| (v.name(), format_rat(x))).collect()
    }

    pub fn merged(mut self, other: &ParamAssignment) -> ParamAssignment {
        self.values.extend(other.values.iter().map(|(k, v)| (*k, v.clone())));
        self
    }
}

pub fn random_rat(rng: &mut impl Rng) -> Rat {
    rat(rng.random_range(1..=97), rng.random_range(1..=97))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowCheck {
    pub edge: usize,
    pub row: usize,
    pub sum: String,
    pub sums_to_one: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StochasticReport {
    pub rows: Vec<RowCheck>,
    /// Symbols whose value lies outside [0, 1].
    pub out_of_range: Vec<String>,
    /// `None` for a uniform root.
    pub root_sums_to_one: Option<bool>,
}

impl StochasticReport {
    pub fn is_stochastic(&self) -> bool {
        self.rows.iter().all(|r| r.sums_to_one) && self.out_of_range.is_empty() && self.root_sums_to_one != Some(false)
    }
}

/// Which rows sum to one and which values lie in [0, 1]. Advisory: the
/// symbolic code never needs stochastic parameters.
pub fn validate_stochastic(model: &ModelSpec, params: &ParamAssignment) -> Result<StochasticReport, ModelError> {
    let vars = model.parameters();
    params.require(&vars)?;
    let mut rows = Vec::new();
    for (e, t) in model.edges.iter().enumerate() {
        for i in 0..t.k {
            let sum: Rat = (0..t.k).map(|j| params.values[&t.cell(i, j)].clone()).sum();
            rows.push(RowCheck { edge: e, row: i, sums_to_one: sum.is_one(), sum: format_rat(&sum) });
        }
    }
    let out_of_range = vars
        .iter()
        .filter(|v| {
            let x = &params.values[v];
            x < &Rat::zero() || x > &Rat::one()
        })
        .map(|v| v.name())
        .collect();
    let root_sums_to_one = match &model.root {
        RootSpec::Uniform => None,
        RootSpec::Free(pi) => Some(pi.iter().map(|v| params.values[v].clone()).sum::<Rat>().is_one()),
    };
    Ok(StochasticReport { rows, out_of_range, root_sums_to_one })
}

/// Random stochastic parameters with all entries strictly positive.
pub fn random_stochastic(model: &ModelSpec, rng: &mut impl Rng) -> ParamAssignment {
    let k = model.k;
    let mut p = ParamAssignment::new();
    let positive = |rng: &mut dyn rand::RngCore| Rat::from_integer(rng.random_range(1..=40).into());
    let mut done = BTreeSet::new();
    for t in &model.edges {
        if !done.insert(t.cells().to_vec()) {
            continue;
        }
        match model.kind.base() {
            ModelKind::GeneralMarkov => {
                for i in 0..k {
                    let w: Vec<Rat> = (0..k).map(|_| positive(rng)).collect();
                    let s: Rat = w.iter().sum();
                    for (j, x) in w.into_iter().enumerate() {
                        p.set(t.cell(i, j), x / &s);
                    }
                }
            }
            ModelKind::Reversible => {
                // Symmetric and doubly stochastic: average of symmetrised permutations.
                let mut m = vec![Rat::zero(); k * k];
                let mut total = Rat::zero();
                for _ in 0..k + 2 {
                    let w = positive(rng);
                    let mut perm: Vec<usize> = (0..k).collect();
                    for i in (1..k).rev() {
                        perm.swap(i, rng.random_range(0..=i));
                    }
                    for (i, &j) in perm.iter().enumerate() {
                        m[i * k + j] += &w;
                        m[j * k + i] += &w;
                    }
                    total += &w * rat(2, 1);
                }
                for i in 0..k {
                    for j in i..k {
                        p.set(t.cell(i, j), &m[i * k + j] / &total);
                    }
                }
            }
            _ => {
                // Group-based: row 0 determines the matrix.
                let mut weights: HashMap<Var, Rat> = HashMap::new();
                for j in 0..k {
                    weights.entry(t.cell(0, j)).or_insert_with(|| positive(rng));
                }
                // Keep the diagonal dominant so the matrix is generic and invertible.
                let diag = t.cell(0, 0);
                *weights.get_mut(&diag).expect("diagonal symbol") += rat(40 * k as i64, 1);
                let s: Rat = (0..k).map(|j| weights[&t.cell(0, j)].clone()).sum();
                for (v, w) in weights {
                    p.set(v, w / &s);
                }
            }
        }
    }
    if let RootSpec::Free(pi) = &model.root {
        let w: Vec<Rat> = pi.iter().map(|_| positive(rng)).collect();
        let s: Rat = w.iter().sum();
        for (v, x) in pi.iter().zip(w) {
            p.set(*v, x / &s);
        }
    }
    p
}

/// Model configuration file contents.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ModelConfig {
    pub newick: String,
    pub kind: String,
    pub root: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<BTreeMap<String, String>>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub no_hidden_nodes: bool,
}

impl ModelConfig {
    pub fn build(&self) -> Result<(ModelSpec, Option<ParamAssignment>), ModelError> {
        let tree = Tree::parse_newick(&self.newick)?;
        let mut model = make_model(&tree, self.kind.parse()?, self.root.parse()?, self.k)?;
        model.observe_internal = self.no_hidden_nodes;
        let params = match &self.params {
            None => None,
            Some(m) => {
                let p = ParamAssignment::from_strings(m)?;
                let known: BTreeSet<Var> = model.parameters().into_iter().collect();
                if let Some(v) = p.values.keys().find(|v| !known.contains(v)) {
                    return Err(ModelError::UnknownSymbol(v.name()));
                }
                Some(p)
            }
        };
        Ok((model, params))
    }
}
