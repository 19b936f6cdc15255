//! Command-line front end.
//!
//! Exit codes: 0 success, 2 invalid input, 3 numerically degenerate data.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use phylo_ag::exact::{minors, Matrix, Poly};
use phylo_ag::fourier::{binomials_up_to_degree, monomial_map, transform_params};
use phylo_ag::invariants::{
    flatten, interpolate_vanishing_forms, jacobian_dimension, linear_relations, mixture_map, relation_form,
    symbolic_tensor, vanishing_check, CoordinateMap, FourierView, PolyMap, VanishingMode,
};
use phylo_ag::models::{make_model, validate_stochastic, ModelKind, ModelSpec, ParamAssignment, RootMode};
use phylo_ag::paramap::JointMap;
use phylo_ag::pipeline::{
    exact_distribution, sample_alignment, score_splits, tv_distance, Alignment, EmpiricalTensor, PipelineError,
    QuartetReport,
};
use phylo_ag::tree::Tree;

#[derive(Parser)]
#[command(name = "phylo-ag", version, about = "Algebraic tools for phylogenetic tree models")]
struct Cli {
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    format: Format,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum, PartialEq, Eq)]
enum Format {
    Text,
    Json,
}

#[derive(Args, Clone)]
struct ModelArgs {
    /// Newick file, or a Newick string.
    #[arg(long)]
    tree: String,
    #[arg(long, default_value = "jc-dna")]
    model: String,
    #[arg(long, default_value = "uniform")]
    root: String,
    /// Number of states, for models without a fixed alphabet.
    #[arg(long)]
    k: Option<usize>,
    /// Observe every node, not just the leaves.
    #[arg(long)]
    no_hidden_nodes: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Coordinate polynomials of the joint probability map.
    Param {
        #[command(flatten)]
        model: ModelArgs,
        /// Pattern label such as AAC or 011.
        #[arg(long)]
        coordinate: Option<String>,
        #[arg(long)]
        accumulated: bool,
        /// Linear relations among the class sums, each class named by its first member.
        #[arg(long)]
        relations: bool,
        #[arg(long)]
        circuit_stats: bool,
    },
    /// Fourier coordinates of a group-based model.
    Fourier {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        coordinates: bool,
        /// Exponent matrix as CSV.
        #[arg(long)]
        map: bool,
        /// Binomial invariants up to this degree (at most 3).
        #[arg(long)]
        binomials: Option<usize>,
    },
    /// Flattenings, minors, interpolation, dimension and membership checks.
    Invariants {
        #[command(flatten)]
        model: ModelArgs,
        /// Split such as 1,2|3,4.
        #[arg(long)]
        flatten: Option<String>,
        /// Size of the minors of the flattening.
        #[arg(long, requires = "flatten")]
        minors: Option<usize>,
        /// Degree of vanishing forms to interpolate.
        #[arg(long)]
        interpolate: Option<u32>,
        /// File of coordinate names (one per line) to interpolate in.
        #[arg(long)]
        coords: Option<PathBuf>,
        /// Interpolate in the symmetry-class sums, each named by its first member.
        #[arg(long, conflicts_with_all = ["coords", "fourier"])]
        accumulated: bool,
        #[arg(long)]
        dim: bool,
        /// Number of mixture components.
        #[arg(long, default_value_t = 1)]
        mixture: usize,
        /// File of polynomials (one per line) to test on the image.
        #[arg(long)]
        check: Option<PathBuf>,
        /// Work in Fourier coordinates.
        #[arg(long)]
        fourier: bool,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Sample an alignment from the model.
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        /// JSON object mapping parameter names to rationals.
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        length: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Also write the pattern counts as CSV.
        #[arg(long)]
        tensor: Option<PathBuf>,
    },
    /// Score the three quartet splits of a four-taxon alignment.
    InferQuartet {
        #[arg(long)]
        alignment: PathBuf,
        #[arg(long, default_value_t = 4)]
        k: usize,
        /// Target rank; defaults to k.
        #[arg(long)]
        rank: Option<usize>,
    },
    /// Check stochasticity of parameters and vanishing of forms.
    Check {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        forms: Option<PathBuf>,
        /// Expand symbolically instead of evaluating at random points.
        #[arg(long)]
        symbolic: bool,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Dimension of the image from the Jacobian rank.
    Dim {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 1)]
        mixture: usize,
        #[arg(long, default_value_t = 10)]
        points: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

enum Failure {
    Invalid(String),
    Degenerate(String),
}

type Out = Result<(String, Value), Failure>;

fn invalid(e: impl std::fmt::Display) -> Failure {
    Failure::Invalid(e.to_string())
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Failure {
        if e.is_validation() {
            Failure::Invalid(e.to_string())
        } else {
            Failure::Degenerate(e.to_string())
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))
}

fn build(args: &ModelArgs) -> Result<ModelSpec, Failure> {
    let text = if Path::new(&args.tree).is_file() { read(Path::new(&args.tree))? } else { args.tree.clone() };
    let tree = Tree::parse_newick(text.trim()).map_err(invalid)?;
    let kind: ModelKind = args.model.parse().map_err(invalid)?;
    let root: RootMode = args.root.parse().map_err(invalid)?;
    let mut m = make_model(&tree, kind, root, args.k).map_err(invalid)?;
    if args.no_hidden_nodes {
        m = m.without_hidden_nodes();
    }
    Ok(m)
}

fn read_params(path: &Path) -> Result<ParamAssignment, Failure> {
    let map: BTreeMap<String, String> = serde_json::from_str(&read(path)?).map_err(invalid)?;
    ParamAssignment::from_strings(&map).map_err(invalid)
}

fn read_lines(path: &Path) -> Result<Vec<String>, Failure> {
    Ok(read(path)?.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')).map(String::from).collect())
}

fn read_forms(path: &Path) -> Result<Vec<Poly>, Failure> {
    read_lines(path)?.iter().map(|l| l.parse::<Poly>().map_err(invalid)).collect()
}

fn lines<T: ToString>(items: &[T]) -> String {
    items.iter().map(|x| x.to_string() + "\n").collect()
}

fn param(model: ModelSpec, coordinate: Option<String>, accumulated: bool, relations: bool, stats: bool) -> Out {
    let map = JointMap::new(model);
    let mut text = String::new();
    let mut js = serde_json::Map::new();
    let indices: Vec<usize> = match &coordinate {
        Some(c) => vec![map.index_of(c).ok_or_else(|| Failure::Invalid(format!("no coordinate {c}")))?],
        None if accumulated || relations => Vec::new(),
        None => (0..map.num_coordinates()).collect(),
    };
    let mut coords = Vec::new();
    for &i in &indices {
        let p = map.coordinate(i);
        let name = map.coordinate_name(i);
        text += &format!("{name} = {p}\n");
        let mut entry = json!({"name": name, "poly": p.to_string()});
        if stats {
            let c = map.circuit_op_counts(i);
            let x = map.expanded_op_counts(i);
            text += &format!(
                "  circuit: {} mul, {} add; expanded: {} mul, {} add\n",
                c.multiplications, c.additions, x.multiplications, x.additions
            );
            entry["circuit"] = json!({"multiplications": c.multiplications, "additions": c.additions});
            entry["expanded"] = json!({"multiplications": x.multiplications, "additions": x.additions});
        }
        coords.push(entry);
    }
    js.insert("coordinates".into(), Value::Array(coords));
    if accumulated {
        let mut classes = Vec::new();
        for c in map.accumulate_classes() {
            let names: Vec<String> = c.members.iter().map(|&i| map.coordinate_name(i)).collect();
            text += &format!("[{}] = {}\n", names.join(" "), c.poly);
            classes.push(json!({"members": names, "poly": c.poly.to_string()}));
        }
        js.insert("accumulated".into(), Value::Array(classes));
    }
    if relations {
        let classes = map.accumulate_classes();
        let names: Vec<String> = classes.iter().map(|c| map.coordinate_name(c.members[0])).collect();
        let polys: Vec<Poly> = classes.into_iter().map(|c| c.poly).collect();
        let (rank, basis) = linear_relations(&polys);
        let forms: Vec<String> = basis.iter().map(|r| relation_form(r, &names).to_string()).collect();
        text += &format!("{} classes spanning dimension {rank}; {} relations\n", names.len(), forms.len());
        for f in &forms {
            text += &format!("{f} = 0\n");
        }
        js.insert("relations".into(), json!({"classes": names.len(), "span": rank, "forms": forms}));
    }
    Ok((text, Value::Object(js)))
}

fn fourier(model: ModelSpec, coordinates: bool, map: bool, binomials: Option<usize>) -> Out {
    let mm = monomial_map(&model).map_err(invalid)?;
    let tp = transform_params(&model).map_err(invalid)?;
    let mut text = String::new();
    let mut js = serde_json::Map::new();
    if coordinates || (!map && binomials.is_none()) {
        let entries: Vec<(String, String)> =
            (0..mm.num_coordinates()).map(|i| (mm.coordinate_name(i), mm.coordinate_poly(i).to_string())).collect();
        for (n, p) in &entries {
            text += &format!("{n} = {p}\n");
        }
        let subst: Vec<Value> = tp
            .substitution()
            .into_iter()
            .map(|(v, p)| json!({"symbol": v.name(), "value": p.to_string()}))
            .collect();
        js.insert("coordinates".into(), json!(entries.iter().map(|(n, p)| json!({"name": n, "poly": p})).collect::<Vec<_>>()));
        js.insert("transformed_parameters".into(), Value::Array(subst));
    }
    if map {
        let csv = mm.exponent_csv();
        text += &csv;
        js.insert("exponent_csv".into(), json!(csv));
    }
    if let Some(d) = binomials {
        let b = binomials_up_to_degree(&mm, d).map_err(invalid)?;
        text += &lines(&b);
        js.insert("binomials".into(), json!(b.iter().map(|p| p.to_string()).collect::<Vec<_>>()));
    }
    Ok((text, Value::Object(js)))
}

fn coordinate_map(model: &ModelSpec, mixture: usize, fourier: bool) -> Result<Box<dyn Fn() -> Result<PolyMap, Failure>>, Failure> {
    if mixture == 0 {
        return Err(Failure::Invalid("mixture needs at least one component".into()));
    }
    let model = model.clone();
    Ok(Box::new(move || {
        let mix = mixture_map(&vec![model.clone(); mixture]).map_err(invalid)?;
        let all: Vec<usize> = (0..mix.num_coordinates()).collect();
        if fourier {
            let mm = monomial_map(&model).map_err(invalid)?;
            let view = FourierView::new(&mix, &mm).map_err(invalid)?;
            Ok(PolyMap::select(&view, &(0..view.num_coordinates()).collect::<Vec<_>>()))
        } else {
            Ok(PolyMap::select(&mix, &all))
        }
    }))
}

enum Coords {
    All,
    File(PathBuf),
    Accumulated,
}

/// Interpolation systems beyond this many monomials are refused.
const MAX_MONOMIALS: u64 = 20_000;

#[allow(clippy::too_many_arguments)]
fn invariants(
    model: ModelSpec,
    split: Option<String>,
    t: Option<usize>,
    interpolate: Option<u32>,
    coords: Coords,
    dim: bool,
    mixture: usize,
    check: Option<PathBuf>,
    fourier: bool,
    seed: u64,
) -> Out {
    let mut text = String::new();
    let mut js = serde_json::Map::new();
    if let Some(s) = split {
        let below: Vec<&str> = s.split('|').next().unwrap_or("").split(',').map(str::trim).collect();
        let sp = model.tree.split_from_labels(&below).map_err(invalid)?;
        let n = model.tree.num_leaves();
        let tensor = symbolic_tensor(n, model.k);
        let m = flatten(&tensor, model.k, &sp).map_err(invalid)?;
        text += &format!("{m}");
        js.insert("flattening".into(), matrix_json(&m));
        if let Some(t) = t {
            let ms: Vec<Poly> = minors(&m, t).map_err(invalid)?.into_iter().filter(|p| !p.is_zero()).collect();
            text += &lines(&ms);
            js.insert("minors".into(), json!(ms.iter().map(|p| p.to_string()).collect::<Vec<_>>()));
        }
    }
    let make = coordinate_map(&model, mixture, fourier)?;
    if let Some(d) = interpolate {
        let map = match &coords {
            Coords::All => make()?,
            Coords::Accumulated => {
                if mixture != 1 {
                    return Err(Failure::Invalid("--accumulated needs a single component".into()));
                }
                let jm = JointMap::new(model.clone());
                let classes = jm.accumulate_classes();
                let names = classes.iter().map(|c| jm.coordinate_name(c.members[0])).collect();
                PolyMap::new(names, classes.into_iter().map(|c| c.poly).collect())
            }
            Coords::File(f) => {
                let full = make()?;
                let idx = read_lines(f)?
                    .iter()
                    .map(|c| full.index_of(c).ok_or_else(|| Failure::Invalid(format!("unknown coordinate {c}"))))
                    .collect::<Result<Vec<_>, _>>()?;
                PolyMap::select(&full, &idx)
            }
        };
        let size = num_integer::binomial(map.num_coordinates() as u64 + d as u64 - 1, d as u64);
        if size > MAX_MONOMIALS {
            return Err(Failure::Invalid(format!(
                "{size} monomials of degree {d} in {} coordinates; restrict with --coords or --accumulated",
                map.num_coordinates()
            )));
        }
        let r = interpolate_vanishing_forms(&map, d, seed).map_err(|e| Failure::Degenerate(e.to_string()))?;
        text += &format!("# {} vanishing forms of degree {d} among {} monomials\n", r.forms.len(), r.num_monomials);
        text += &lines(&r.forms);
        js.insert(
            "interpolation".into(),
            json!({"degree": d, "monomials": r.num_monomials, "nullity": r.forms.len(),
                   "forms": r.forms.iter().map(|p| p.to_string()).collect::<Vec<_>>()}),
        );
    }
    if dim {
        let map = make()?;
        let (t, v) = dimension(&map, 10, seed)?;
        text += &t;
        js.insert("dimension".into(), v);
    }
    if let Some(f) = check {
        let map = make()?;
        let (t, v) = check_forms(&map, &read_forms(&f)?, VanishingMode::randomized(seed))?;
        text += &t;
        js.insert("checks".into(), v);
    }
    Ok((text, Value::Object(js)))
}

fn matrix_json(m: &Matrix<Poly>) -> Value {
    json!((0..m.rows()).map(|r| m.row(r).iter().map(|p| p.to_string()).collect::<Vec<_>>()).collect::<Vec<_>>())
}

fn dimension(map: &impl CoordinateMap, points: usize, seed: u64) -> Out {
    let d = jacobian_dimension(map, points, seed).map_err(invalid)?;
    Ok((
        format!("affine rank {}, projective dimension {}\n", d.affine_rank, d.projective_dim),
        json!({"affine_rank": d.affine_rank, "projective_dimension": d.projective_dim, "ranks": d.ranks}),
    ))
}

fn check_forms(map: &impl CoordinateMap, forms: &[Poly], mode: VanishingMode) -> Out {
    let mut text = String::new();
    let mut out = Vec::new();
    for f in forms {
        let r = vanishing_check(f, map, mode).map_err(invalid)?;
        text += &format!("{} {}\n", if r.vanishes { "vanishes" } else { "NONZERO" }, f);
        let mut e = json!({"form": f.to_string(), "vanishes": r.vanishes});
        if let Some(w) = r.witness {
            e["witness"] = json!({"params": w.params.to_strings(), "value": w.value.to_string()});
        }
        out.push(e);
    }
    Ok((text, Value::Array(out)))
}

fn simulate(model: ModelSpec, params: PathBuf, length: usize, seed: u64, out: PathBuf, tensor: Option<PathBuf>) -> Out {
    if length == 0 {
        return Err(Failure::Invalid("length must be at least 1".into()));
    }
    let p = read_params(&params)?;
    let map = JointMap::new(model);
    let exact = exact_distribution(&map, &p)?;
    let a = sample_alignment(&map, &p, length, seed)?;
    std::fs::write(&out, a.to_fasta()).map_err(invalid)?;
    let t = EmpiricalTensor::from_alignment(&a);
    if let Some(path) = tensor {
        std::fs::write(path, t.to_csv()).map_err(invalid)?;
    }
    let tv = tv_distance(&t.frequencies(), &exact);
    Ok((
        format!("wrote {length} sites to {}; total variation to the model {tv:.6}\n", out.display()),
        json!({"sites": length, "seed": seed, "out": out.display().to_string(), "tv_distance": tv,
               "generator": "ChaCha20, one stream per site"}),
    ))
}

fn infer_quartet(path: PathBuf, k: usize, rank: Option<usize>) -> Out {
    let a = Alignment::from_fasta(&read(&path)?, k)?;
    if a.labels.len() != 4 {
        return Err(Failure::Invalid(format!("need 4 sequences, found {}", a.labels.len())));
    }
    let t = EmpiricalTensor::from_alignment(&a);
    let scores = score_splits(&t.frequencies(), &a.labels, rank.unwrap_or(k))?;
    let report = QuartetReport { labels: a.labels.clone(), sites: t.length, scores };
    let mut text = String::new();
    for s in &report.scores.scores {
        text += &format!("{}\t{:.6e}\n", s.split, s.score);
    }
    text += &format!("best: {}\n", report.scores.best.join(" "));
    Ok((text, serde_json::to_value(&report).map_err(invalid)?))
}

fn check(model: ModelSpec, params: Option<PathBuf>, forms: Option<PathBuf>, symbolic: bool, seed: u64) -> Out {
    let mut text = String::new();
    let mut js = serde_json::Map::new();
    if let Some(p) = params {
        let r = validate_stochastic(&model, &read_params(&p)?).map_err(invalid)?;
        text += &format!("stochastic: {}\n", r.is_stochastic());
        js.insert("stochastic".into(), serde_json::to_value(&r).map_err(invalid)?);
        if !r.is_stochastic() {
            return Err(Failure::Invalid(format!("parameters are not stochastic: {}", js["stochastic"])));
        }
    }
    if let Some(f) = forms {
        let map = JointMap::new(model);
        let mode = if symbolic { VanishingMode::Symbolic } else { VanishingMode::randomized(seed) };
        let (t, v) = check_forms(&map, &read_forms(&f)?, mode)?;
        text += &t;
        js.insert("forms".into(), v);
    }
    Ok((text, Value::Object(js)))
}

fn run(cli: Cli) -> Out {
    match cli.cmd {
        Cmd::Param { model, coordinate, accumulated, relations, circuit_stats } => {
            param(build(&model)?, coordinate, accumulated, relations, circuit_stats)
        }
        Cmd::Fourier { model, coordinates, map, binomials } => fourier(build(&model)?, coordinates, map, binomials),
        Cmd::Invariants { model, flatten, minors, interpolate, coords, accumulated, dim, mixture, check, fourier, seed } => {
            let coords = match (coords, accumulated) {
                (Some(f), _) => Coords::File(f),
                (None, true) => Coords::Accumulated,
                (None, false) => Coords::All,
            };
            invariants(build(&model)?, flatten, minors, interpolate, coords, dim, mixture, check, fourier, seed)
        }
        Cmd::Simulate { model, params, length, seed, out, tensor } => {
            simulate(build(&model)?, params, length, seed, out, tensor)
        }
        Cmd::InferQuartet { alignment, k, rank } => infer_quartet(alignment, k, rank),
        Cmd::Check { model, params, forms, symbolic, seed } => check(build(&model)?, params, forms, symbolic, seed),
        Cmd::Dim { model, mixture, points, seed } => {
            let m = build(&model)?;
            let map = coordinate_map(&m, mixture, false)?()?;
            dimension(&map, points, seed)
        }
    }
}

/// Writes to stdout, ignoring a closed pipe.
fn emit(s: &str) {
    let _ = std::io::stdout().write_all(s.as_bytes());
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let format = cli.format;
    match run(cli) {
        Ok((text, value)) => {
            match format {
                Format::Text => emit(&text),
                Format::Json => emit(&(serde_json::to_string_pretty(&value).expect("serializable") + "\n")),
            }
            ExitCode::SUCCESS
        }
        Err(f) => {
            let (code, msg) = match f {
                Failure::Invalid(m) => (2, m),
                Failure::Degenerate(m) => (3, m),
            };
            match format {
                Format::Text => eprintln!("error: {msg}"),
                Format::Json => emit(&(json!({"error": msg, "exit_code": code}).to_string() + "\n")),
            }
            ExitCode::from(code)
        }
    }
}
