#![allow(dead_code)]

use std::collections::HashMap;

use phylo_ag::exact::{int, Poly, Rat, Var};
use phylo_ag::models::{make_model, ModelKind, ModelSpec, ParamAssignment, RootMode};
use phylo_ag::tree::Tree;

pub const JC3: &str = "(1,(2,3));";
pub const JC4: &str = "((1,2),(3,4));";
pub const JC5: &str = "((1,2),(3,(4,5)));";

/// Below-sets of the edges of `JC4`, in the order used by the reference
/// six-digit subforest indices.
pub const JC4_EDGES: [&[&str]; 6] = [&["1"], &["2"], &["1", "2"], &["3", "4"], &["3"], &["4"]];
/// Same for `JC5` and its eight-digit indices.
pub const JC5_EDGES: [&[&str]; 8] =
    [&["1"], &["2"], &["1", "2"], &["3", "4", "5"], &["3"], &["4", "5"], &["4"], &["5"]];

pub fn tree(newick: &str) -> Tree {
    Tree::parse_newick(newick).unwrap()
}

pub fn model(newick: &str, kind: ModelKind, root: RootMode, k: Option<usize>) -> ModelSpec {
    make_model(&tree(newick), kind, root, k).unwrap()
}

pub fn jc_dna(newick: &str) -> ModelSpec {
    model(newick, ModelKind::JcDna, RootMode::Uniform, None)
}

/// Rewrites a coordinate name `q<digits>` given in the external edge order
/// into the crate's pre-order edge order.
pub fn to_preorder(t: &Tree, order: &[&[&str]], name: &str) -> String {
    let digits: Vec<char> = name[1..].chars().collect();
    assert_eq!(digits.len(), order.len(), "{name}");
    let mut out = vec!['0'; order.len()];
    for (pos, below) in order.iter().enumerate() {
        out[t.edge_with_below(below).unwrap()] = digits[pos];
    }
    format!("q{}", out.into_iter().collect::<String>())
}

/// Rewrites every variable of `p` with `to_preorder`.
pub fn poly_to_preorder(t: &Tree, order: &[&[&str]], p: &Poly) -> Poly {
    let map: HashMap<Var, Var> = p.vars().into_iter().map(|v| (v, Var::new(&to_preorder(t, order, &v.name())))).collect();
    p.rename(&map)
}

/// All 2x2 minors of a matrix of coordinate names.
pub fn minors2(rows: &[&[&str]]) -> Vec<Poly> {
    let mut out = Vec::new();
    for r1 in 0..rows.len() {
        for r2 in r1 + 1..rows.len() {
            for c1 in 0..rows[0].len() {
                for c2 in c1 + 1..rows[0].len() {
                    let v = |r: usize, c: usize| Poly::named(rows[r][c]);
                    out.push(&v(r1, c1) * &v(r2, c2) - &v(r1, c2) * &v(r2, c1));
                }
            }
        }
    }
    out
}

/// Jukes-Cantor parameters with `x0 + 3 x1 = 1` per edge.
pub fn jc_params(diag: &[(i64, i64)]) -> ParamAssignment {
    let mut p = ParamAssignment::new();
    for (e, &(num, den)) in diag.iter().enumerate() {
        let a0 = Rat::new(num.into(), den.into());
        let a1 = (int(1) - &a0) / int(3);
        let letter = (b'a' + e as u8) as char;
        p.set_named(&format!("{letter}0"), a0);
        p.set_named(&format!("{letter}1"), a1);
    }
    p
}
