//! Command-line front end. Every subcommand produces a `Report`; exit code 0 iff all
//! checks pass, 1 on a failed check, 2 on bad input.

use crate::fiber::FiberModel;
use crate::flat::{homology, holonomy_on_homology, igusa_export, monomial_check, sign_group, edge_transport, CwBoundary};
use crate::gen::{self, GenParams};
use crate::instance::Instance;
use crate::mixed::{ChainMapData, MixedConnection};
use crate::rational::{parse_q, to_f64};
use crate::report::{form_matrix_json, Report};
use crate::simplex::Simplex;
use crate::smoothing::{self, PartitionOfUnity, PartitionSpec};
use crate::wk::{self, FlowParams};
use clap::{Args, Parser, Subcommand};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::path::PathBuf;

#[derive(Parser, Debug)]
#[command(name = "ftsc", about = "Exact family Thom–Smale constructions over simplicial bases")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Instance JSON file.
    #[arg(long)]
    pub instance: Option<PathBuf>,
    /// Use the seeded random instance when no file is given.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write the report JSON here instead of stdout.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Polynomial degree ceiling for form extensions.
    #[arg(long, default_value_t = 8)]
    pub max_degree: usize,
    /// Maximal base dimension of generated instances.
    #[arg(long, default_value_t = 2)]
    pub gen_dim: usize,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Fineness, partial orders, triangularity, flatness and ∂² = 0.
    Validate(Common),
    /// Complete the coefficient system skeleton by skeleton.
    Extend {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        to_dim: Option<usize>,
        /// Completed instance file; stdout when absent.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Build a′ and verify every recursion step.
    BuildAprime(Common),
    /// Build a′ and I′ against the instance's fiber model (cochain model by default).
    BuildIprime(Common),
    /// Pull back a′ along a partition of unity and verify the global superconnection.
    Smooth {
        #[command(flatten)]
        common: Common,
        /// default, smoothstep, linear, or a partition JSON file.
        #[arg(long, default_value = "default")]
        partition: String,
    },
    /// Export the Igusa system on every maximal simplex and check its relation.
    Igusa(Common),
    /// Edge transports and homology holonomy around every 2-simplex.
    Holonomy(Common),
    /// Betti numbers at every vertex, and against the fiber model when declared.
    Homology(Common),
    /// Integrate W_k from a start point, or sweep random starts.
    Flow(FlowArgs),
}

#[derive(Args, Debug, Clone)]
pub struct FlowArgs {
    #[arg(long)]
    pub k: Option<usize>,
    /// Barycentric coordinates x0,...,xk; rationals allowed.
    #[arg(long)]
    pub start: Option<String>,
    #[arg(long)]
    pub backward: bool,
    /// Number of random starts per k (k = 1..4 unless --k is given).
    #[arg(long)]
    pub sweep: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 200.0)]
    pub horizon: f64,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

/// A failure to read or interpret input; exit code 2.
#[derive(Debug)]
pub struct InputError(pub String);

impl std::fmt::Display for InputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

fn input<E: std::fmt::Display>(e: E) -> InputError {
    InputError(e.to_string())
}

/// What a run produced: the report, and for `extend` the completed instance.
pub struct Outcome {
    pub report: Report,
    pub artifact: Option<String>,
}

fn load(c: &Common) -> Result<Instance, InputError> {
    match (&c.instance, c.seed) {
        (Some(p), _) => Instance::load(p).map_err(input),
        (None, Some(seed)) => {
            let p = GenParams { max_dim: c.gen_dim.max(1), ..GenParams::default() };
            Ok(Instance::from_generated(&gen::instance(seed, &p)))
        }
        (None, None) => Err(InputError("either --instance or --seed is required".into())),
    }
}

fn require_complete(inst: &Instance) -> Result<(), InputError> {
    let missing: Vec<String> = inst.complex.all().filter(|s| !inst.coeffs.coeffs.contains_key(*s)).map(Simplex::key).collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(InputError(format!("coefficients missing on {}; run `extend` first", missing.join(" "))))
    }
}

fn fiber_model(inst: &Instance) -> Result<FiberModel, InputError> {
    match inst.fiber_model().map_err(input)? {
        Some(fm) => Ok(fm),
        None => FiberModel::cochain_model(&inst.complex, &inst.leaves, &inst.coeffs).map_err(input),
    }
}

pub fn run(cli: &Cli) -> Result<Outcome, InputError> {
    match &cli.command {
        Command::Validate(c) => Ok(Outcome { report: validate(&load(c)?), artifact: None }),
        Command::Extend { common, to_dim, output: _ } => extend(&load(common)?, *to_dim),
        Command::BuildAprime(c) => build_aprime(&load(c)?, c.max_degree).map(plain),
        Command::BuildIprime(c) => build_iprime(&load(c)?, c.max_degree).map(plain),
        Command::Smooth { common, partition } => smooth(&load(common)?, common.max_degree, partition).map(plain),
        Command::Igusa(c) => igusa(&load(c)?).map(plain),
        Command::Holonomy(c) => holonomy(&load(c)?).map(plain),
        Command::Homology(c) => homology_cmd(&load(c)?).map(plain),
        Command::Flow(f) => flow(f).map(plain),
    }
}

fn plain(report: Report) -> Outcome {
    Outcome { report, artifact: None }
}

pub fn validate(inst: &Instance) -> Report {
    let (s, l, a) = (&inst.complex, &inst.leaves, &inst.coeffs);
    let mut r = Report::new("validate");
    r.check("Fineness", l.validate(s));
    let mut order = Vec::new();
    let mut refine = Vec::new();
    for sigma in s.all() {
        order.extend(l.check_partial_order(sigma));
        if sigma.dim() >= 1 {
            for j in 0..sigma.len() {
                refine.extend(l.check_refinement(sigma, &sigma.delete(j)));
            }
        }
    }
    r.check("PartialOrder", order);
    r.check("Refinement", refine);
    let violations = r.timed("flatness", || a.validate(s, l));
    let mut by: BTreeMap<&str, Vec<_>> = BTreeMap::new();
    for name in ["TriangularityViolation", "VertexSquareNonzero", "ResidualNonzero"] {
        by.insert(name, Vec::new());
    }
    for v in &violations {
        by.entry(v.check.as_str()).or_default().push(v.clone());
    }
    for (name, vs) in by {
        r.check(name, vs);
    }
    let present = s.all().filter(|x| a.coeffs.contains_key(*x)).count();
    r.result("simplices", s.len());
    r.result("simplices_with_coefficients", present);
    let closed = a.coeffs.keys().all(|x| x.faces().iter().all(|f| a.coeffs.contains_key(f)));
    if closed {
        match r.timed("cw_boundary", || CwBoundary::new(a, s, l.dim())) {
            Ok(cw) => {
                let ok = cw.squares_to_zero();
                r.result("cw_cells", cw.cells.len());
                r.check("CwBoundarySquare", if ok { vec![] } else { vec![json!("∂∂ ≠ 0")] });
            }
            Err(e) => r.fail("CwBoundarySquare", json!(e.to_string())),
        }
    } else {
        r.fail("CoefficientsFaceClosed", json!("some simplex has coefficients but a face does not"));
    }
    r
}

fn extend(inst: &Instance, to_dim: Option<usize>) -> Result<Outcome, InputError> {
    let mut inst = inst.clone();
    let to_dim = to_dim.unwrap_or(inst.complex.dim().max(0) as usize);
    for v in inst.complex.simplices(0) {
        if !inst.coeffs.coeffs.contains_key(v) {
            return Err(InputError(format!("vertex {} has no differential a(v)", v.key())));
        }
    }
    let mut r = Report::new("extend");
    let res = r.timed("extend", || inst.coeffs.extend_to_dim(&inst.complex, &inst.leaves, to_dim, None::<&mut ChaCha8Rng>));
    match res {
        Ok(added) => {
            r.result("added", added);
            r.check::<Value>("Extension", []);
            let v = validate(&inst);
            for c in v.checks {
                r.passed &= c.passed;
                r.checks.push(c);
            }
            inst.sync_coefficients();
            Ok(Outcome { report: r, artifact: Some(inst.to_json_string()) })
        }
        Err(e) => {
            r.fail("Extension", json!(e.to_string()));
            Ok(Outcome { report: r, artifact: None })
        }
    }
}

fn aprime_json(mc: &MixedConnection) -> Value {
    let m: serde_json::Map<String, Value> = mc
        .ap
        .iter()
        .map(|((s, f), fm)| (format!("({}, {})", s.key(), if f.is_empty() { "∅".into() } else { f.key() }), form_matrix_json(fm)))
        .collect();
    Value::Object(m)
}

fn iprime_json(cm: &ChainMapData) -> Value {
    let m: serde_json::Map<String, Value> = cm
        .ip
        .iter()
        .map(|((s, f), bm)| {
            let b: serde_json::Map<String, Value> = bm.b.iter().map(|(t, m)| (t.key(), form_matrix_json(m))).collect();
            (format!("({}, {})", s.key(), if f.is_empty() { "∅".into() } else { f.key() }), Value::Object(b))
        })
        .collect();
    Value::Object(m)
}

/// Flatness precheck shared by the build commands; None when the system is not flat.
fn flat_precheck(inst: &Instance, r: &mut Report) -> bool {
    let v = inst.coeffs.validate(&inst.complex, &inst.leaves);
    r.check("CoefficientSystemValid", v)
}

fn mixed_checks(r: &mut Report, mc: &MixedConnection, inst: &Instance) {
    let incompatible: Vec<_> = mc.steps.iter().filter(|s| !s.compatible).cloned().collect();
    r.check("CheckCompat", incompatible);
    let violations = r.timed("verify_aprime", || mc.verify(&inst.leaves));
    for name in ["NotFlat", "TotalDegree", "DegreeBound", "Triangularity", "FaceCoherence"] {
        r.check(&format!("Aprime{name}"), violations.iter().filter(|v| v.check == name).cloned());
    }
    r.result("steps", mc.steps.len());
    r.result("max_poly_degree", mc.steps.iter().map(|s| s.max_poly_degree).max().unwrap_or(0));
}

fn build_aprime(inst: &Instance, cap: usize) -> Result<Report, InputError> {
    require_complete(inst)?;
    let mut r = Report::new("build-aprime");
    if !flat_precheck(inst, &mut r) {
        return Ok(r);
    }
    match r.timed("build_aprime", || MixedConnection::build(&inst.complex, &inst.leaves, &inst.coeffs, cap)) {
        Ok(mc) => {
            mixed_checks(&mut r, &mc, inst);
            r.result("aprime", aprime_json(&mc));
        }
        Err(e) => r.fail("BuildAprime", json!(e.to_string())),
    }
    Ok(r)
}

fn build_iprime(inst: &Instance, cap: usize) -> Result<Report, InputError> {
    require_complete(inst)?;
    let fm = fiber_model(inst)?;
    let mut r = Report::new("build-iprime");
    if !flat_precheck(inst, &mut r) {
        return Ok(r);
    }
    if !r.check("FiberModel", fm.validate(&inst.complex, &inst.leaves, &inst.coeffs)) {
        return Ok(r);
    }
    let mc = match r.timed("build_aprime", || MixedConnection::build(&inst.complex, &inst.leaves, &inst.coeffs, cap)) {
        Ok(mc) => mc,
        Err(e) => {
            r.fail("BuildAprime", json!(e.to_string()));
            return Ok(r);
        }
    };
    mixed_checks(&mut r, &mc, inst);
    match r.timed("build_iprime", || ChainMapData::build(&inst.complex, &inst.leaves, &inst.coeffs, &mc, &fm, cap)) {
        Ok(cm) => {
            let mut chain = Vec::new();
            for sigma in inst.complex.all() {
                match cm.chain_residual(sigma, &mc, &fm) {
                    Ok(res) if res.is_zero() => {}
                    _ => chain.push(sigma.key()),
                }
            }
            r.check("ChainIdentity", chain);
            let v = cm.verify(&inst.leaves);
            for name in ["SelfNonzero", "BDegree", "BSupport", "FaceCoherence"] {
                r.check(&format!("Iprime{name}"), v.iter().filter(|x| x.check == name).cloned());
            }
            if fm.tags.is_some() {
                r.check("Locality", cm.locality_check(&fm, &inst.leaves));
            }
            r.result("fiber_dim", fm.dim());
            r.result("iprime", iprime_json(&cm));
        }
        Err(e) => r.fail("BuildIprime", json!(e.to_string())),
    }
    Ok(r)
}

fn partition_spec(inst: &Instance, arg: &str) -> Result<PartitionSpec, InputError> {
    match arg {
        "default" => inst.partition().map_err(input),
        "smoothstep" => Ok(PartitionSpec::Profile(smoothing::Profile::Smoothstep)),
        "linear" => Ok(PartitionSpec::Profile(smoothing::Profile::Linear)),
        path => {
            let text = std::fs::read_to_string(path).map_err(|e| InputError(format!("cannot read {path}: {e}")))?;
            let v: Value = serde_json::from_str(&text).map_err(input)?;
            PartitionSpec::from_json(&v).map_err(InputError)
        }
    }
}

fn smooth(inst: &Instance, cap: usize, partition: &str) -> Result<Report, InputError> {
    require_complete(inst)?;
    let spec = partition_spec(inst, partition)?;
    let pu = PartitionOfUnity::build(&inst.complex, &spec).map_err(InputError)?;
    let mut r = Report::new("smooth");
    r.result("partition", spec.to_json());
    let pv = pu.validate();
    for name in ["PartitionSum", "StarSupport", "PartitionFaceMismatch", "PartitionFirstOrder"] {
        r.check(name, pv.iter().filter(|v| v.check == name).cloned());
    }
    if !flat_precheck(inst, &mut r) {
        return Ok(r);
    }
    let mc = match r.timed("build_aprime", || MixedConnection::build(&inst.complex, &inst.leaves, &inst.coeffs, cap)) {
        Ok(mc) => mc,
        Err(e) => {
            r.fail("BuildAprime", json!(e.to_string()));
            return Ok(r);
        }
    };
    let g = match smoothing::pullback_global(&inst.complex, &mc, &pu) {
        Ok(g) => g,
        Err(e) => {
            r.fail("Pullback", json!(e.to_string()));
            return Ok(r);
        }
    };
    for line in r.timed("verify_global", || smoothing::verify_global(&inst.complex, &mc, &pu, &g)) {
        r.check(&line.check, line.failures);
    }
    if inst.file.fiber_model.is_some() {
        let fm = fiber_model(inst)?;
        match ChainMapData::build(&inst.complex, &inst.leaves, &inst.coeffs, &mc, &fm, cap)
            .and_then(|cm| smoothing::assemble_and_verify_i(&inst.complex, &cm, &fm, &pu, &g))
        {
            Ok(lines) => {
                for line in lines {
                    r.check(&line.check, line.failures);
                }
            }
            Err(e) => r.fail("AssembleI", json!(e.to_string())),
        }
    }
    Ok(r)
}

fn igusa(inst: &Instance) -> Result<Report, InputError> {
    require_complete(inst)?;
    let mut r = Report::new("igusa");
    let mut failing = Vec::new();
    let mut tuples = 0;
    for sigma in inst.complex.maximal() {
        let e = igusa_export(&inst.coeffs, sigma).map_err(input)?;
        tuples += e.e.len();
        failing.extend(e.check().into_iter().map(|t| format!("{} in {}", t.key(), sigma.key())));
    }
    failing.sort();
    failing.dedup();
    r.check("IgusaRelation", failing);
    r.result("tuples_checked", tuples);
    let mono = monomial_check(&inst.coeffs, &inst.leaves, &sign_group());
    r.result("monomial", mono);
    Ok(r)
}

fn holonomy(inst: &Instance) -> Result<Report, InputError> {
    require_complete(inst)?;
    let mut r = Report::new("holonomy");
    let mut chain = Vec::new();
    if inst.complex.dim() >= 1 {
        for e in inst.complex.simplices(1) {
            if let Err(err) = edge_transport(&inst.coeffs, e) {
                chain.push(err.to_string());
            }
        }
    }
    let ok = r.check("EdgeTransportChainMap", chain);
    if ok && inst.complex.dim() >= 2 {
        let mut reports = Vec::new();
        let mut bad = Vec::new();
        for t in inst.complex.simplices(2) {
            let h = holonomy_on_homology(&inst.coeffs, t).map_err(input)?;
            if !h.identity {
                bad.push(h.simplex.clone());
            }
            reports.push(h);
        }
        r.check("HolonomyIdentity", bad);
        r.result("triangles", reports);
    }
    Ok(r)
}

fn homology_cmd(inst: &Instance) -> Result<Report, InputError> {
    let mut r = Report::new("homology");
    let mut betti = BTreeMap::new();
    let mut bad = Vec::new();
    for v in inst.complex.simplices(0) {
        let a = inst.coeffs.get(v).map_err(input)?;
        match homology(a, &inst.leaves.degrees()) {
            Ok(b) => {
                betti.insert(v.key(), b.into_iter().filter(|x| x.1 > 0).collect::<BTreeMap<_, _>>());
            }
            Err(e) => bad.push(format!("{}: {e}", v.key())),
        }
    }
    r.check("VertexDifferential", bad);
    r.result("vertex_betti", betti);
    if inst.file.fiber_model.is_some() {
        require_complete(inst)?;
        let fm = fiber_model(inst)?;
        r.check("FiberModel", fm.validate(&inst.complex, &inst.leaves, &inst.coeffs));
        match smoothing::quasi_iso_ranks(&fm, &inst.coeffs, &inst.complex, &inst.leaves) {
            Ok(q) => {
                r.check("QuasiIsomorphism", q.mismatches.clone());
                r.check("HolonomyIdentity", q.holonomy.iter().filter(|h| !h.1).map(|h| h.0.clone()));
                r.result("fiber_betti", q.fiber_betti);
            }
            Err(e) => r.fail("QuasiIsomorphism", json!(e.to_string())),
        }
    }
    Ok(r)
}

fn parse_start(s: &str) -> Result<Vec<f64>, InputError> {
    s.split(',').map(|t| parse_q(t.trim()).map(|x| to_f64(&x)).map_err(InputError)).collect()
}

fn flow(f: &FlowArgs) -> Result<Report, InputError> {
    let p = FlowParams { horizon: f.horizon, ..FlowParams::default() };
    let mut r = Report::new("flow");
    if let Some(n) = f.sweep {
        let ks: Vec<usize> = match f.k {
            Some(k) => vec![k],
            None => (1..=4).collect(),
        };
        let mut sweeps = Vec::new();
        for k in ks {
            let s = r.timed(&format!("sweep_k{k}"), || wk::sweep(k, n, f.seed, &p));
            // at least 99% agreement, exact agreement expected away from faces
            let ok = s.agreements * 100 >= s.starts * 99 && s.max_vertex_error < 1e-6;
            r.check(&format!("OracleAgreement_k{k}"), if ok { vec![] } else { s.failures.clone() });
            r.check(&format!("Monotone_k{k}"), if s.max_height_drop <= 1e-9 { vec![] } else { vec![s.max_height_drop] });
            let lin: Vec<String> = (0..=k)
                .map(|j| wk::vertex_linearization(k, j))
                .filter(|l| l.stable != l.vertex || l.unstable != k - l.vertex || l.span_residual > 1e-9)
                .map(|l| format!("vertex {}: {} stable, {} unstable", l.vertex, l.stable, l.unstable))
                .collect();
            r.check(&format!("Linearization_k{k}"), lin);
            sweeps.push(s);
        }
        r.result("sweeps", sweeps);
        return Ok(r);
    }
    let start = f.start.as_deref().ok_or_else(|| InputError("flow needs --start or --sweep".into()))?;
    let x0 = parse_start(start)?;
    if let Some(k) = f.k {
        if x0.len() != k + 1 {
            return Err(InputError(format!("--start has {} coordinates, expected {}", x0.len(), k + 1)));
        }
    }
    let (lo, hi) = wk::classify_limits(&x0);
    match wk::flow(&x0, f.backward, &p) {
        Ok(t) => {
            let want = if f.backward { lo } else { hi };
            r.check("OracleAgreement", if t.limit == want { vec![] } else { vec![json!({"flow": t.limit, "oracle": want})] });
            let drop = t.max_height_drop();
            r.check("Monotone", if drop <= 1e-9 { vec![] } else { vec![drop] });
            r.result("limit", t.limit);
            r.result("oracle", json!({"backward": lo, "forward": hi}));
            r.result("trajectory", &t);
        }
        Err(wk::FlowError::OutsideSimplex(s)) => return Err(InputError(format!("start point outside the simplex: {s}"))),
        Err(e) => r.fail("Convergence", json!(e.to_string())),
    }
    Ok(r)
}
