//! Command-line surface for the sphere-cubics library.
//!
//! Exit codes: 0 = a verdict was computed (inside or outside alike),
//! 1 = usage/input error, 2 = numerical failure.

use std::io::Read;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use sphere_cubics::cones::{
    generated_nonneg_system, in_cone_cd, in_dual_cone, in_unit_ball, substitute_unit_ball,
    theorem_nonneg_system, theorem_unit_ball_system, verify_certificate, NonnegCertificate,
    Verdict,
};
use sphere_cubics::hermitian::{dup_gamma, HermitianMatrix};
use sphere_cubics::optimize::{
    extract_atoms, maximize_on_sphere, minimize_on_sphere, oracle_minimum, scale_to_ball_boundary,
    OptimizeOptions, DEFAULT_RANK_TOL,
};
use sphere_cubics::sdp;
use sphere_cubics::sphere_moment::{
    moment_matrix, poly_to_h, to_sphere, CubicOnSphere, RiemannPoint,
};
use sphere_cubics::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Parser, Debug)]
#[command(
    name = "sphere-cubics",
    about = "Nonnegativity, unit-ball membership, and exact optimization of ternary cubics on the unit sphere",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Read the input JSON document from a file ("-" for stdin).
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    /// Inline input JSON document.
    #[arg(long, global = true)]
    inline: Option<String>,
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Relative duality-gap tolerance of the interior-point solver.
    #[arg(long, global = true, default_value_t = sdp::DEFAULT_TOL_GAP)]
    tol_gap: f64,
    /// Feasibility tolerance of the interior-point solver.
    #[arg(long, global = true, default_value_t = sdp::DEFAULT_TOL_FEAS)]
    tol_feas: f64,
    /// Grid size of the sampling oracle.
    #[arg(long, global = true, default_value_t = 20_000)]
    grid: usize,
    /// Seed for `random`.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Process a file of newline-separated JSON input documents, emitting
    /// one JSON report per line.
    #[arg(long, global = true)]
    batch: Option<PathBuf>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Cmd {
    /// Decide nonnegativity of a cubic on the sphere (certifies either way).
    Certify,
    /// Decide unit-ball membership of a homogeneous cubic (max |p| <= 1).
    Ball,
    /// Certified global minimum over the sphere, with minimizers.
    Minimize,
    /// Certified global maximum over the sphere, with maximizers.
    Maximize,
    /// Largest lambda with lambda*p in the unit ball (homogeneous cubics).
    Scale,
    /// Re-verify a stored certificate against a stored polynomial.
    VerifyCert,
    /// Emit a seeded random cubic for scripting.
    Random,
    /// Run the built-in invariant suite.
    Selftest,
}

/// A usage error (exit 1) as opposed to a numerical failure (exit 2).
fn is_usage_error(e: &Error) -> bool {
    matches!(
        e,
        Error::InvalidInput(_) | Error::BadCoefficient { .. } | Error::SizeMismatch(_) | Error::NotHermitian(_)
    )
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if is_usage_error(&e) {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

fn read_document(cli: &Cli) -> Result<String, Error> {
    match (&cli.input, &cli.inline) {
        (Some(_), Some(_)) => Err(Error::InvalidInput(
            "give exactly one of --input and --inline".into(),
        )),
        (None, Some(s)) => Ok(s.clone()),
        (Some(p), None) if p.as_os_str() == "-" => {
            let mut buf = String::new();
            std::io::stdin()
                .read_to_string(&mut buf)
                .map_err(|e| Error::InvalidInput(format!("reading stdin: {e}")))?;
            Ok(buf)
        }
        (Some(p), None) => std::fs::read_to_string(p)
            .map_err(|e| Error::InvalidInput(format!("reading {}: {e}", p.display()))),
        (None, None) => {
            let mut buf = String::new();
            std::io::stdin()
                .read_to_string(&mut buf)
                .map_err(|e| Error::InvalidInput(format!("reading stdin: {e}")))?;
            if buf.trim().is_empty() {
                return Err(Error::InvalidInput(
                    "no input: pass --input FILE, --inline JSON, or pipe a document to stdin".into(),
                ));
            }
            Ok(buf)
        }
    }
}

fn parse_poly(doc: &str) -> Result<CubicOnSphere, Error> {
    serde_json::from_str::<CubicOnSphere>(doc)
        .map_err(|e| Error::InvalidInput(format!("input JSON: {e}")))
}

fn tolerances_json(cli: &Cli) -> Value {
    json!({"tol_gap": cli.tol_gap, "tol_feas": cli.tol_feas})
}

fn verdict_str(v: Verdict) -> &'static str {
    match v {
        Verdict::Inside => "inside",
        Verdict::Outside => "outside",
        Verdict::Boundary => "boundary",
    }
}

/// A representative evaluation point for a separating moment matrix: the
/// atom of `A` at which `p` is most negative, or the oracle minimizer when
/// extraction is impossible.
fn separating_point(p: &CubicOnSphere, a: &HermitianMatrix, grid: usize) -> (Vec<f64>, f64) {
    let candidates: Vec<RiemannPoint> = match extract_atoms(a, DEFAULT_RANK_TOL) {
        Ok(m) => m.atoms.into_iter().map(|(_, z)| z).collect(),
        Err(_) => Vec::new(),
    };
    let mut best: Option<(f64, [f64; 3])> = None;
    for z in &candidates {
        let x = to_sphere(z);
        let v = p.eval(&x);
        if best.map_or(true, |(bv, _)| v < bv) {
            best = Some((v, x.x));
        }
    }
    if best.is_none() {
        let (v, x) = oracle_minimum(p, grid.max(1000), 20);
        best = Some((v, x.x));
    }
    let (v, x) = best.unwrap();
    (x.to_vec(), v)
}

fn run_certify(cli: &Cli, doc: &str) -> Result<Value, Error> {
    let p = parse_poly(doc)?;
    let h = poly_to_h(&p);
    let r = in_dual_cone(&h, cli.tol_gap, cli.tol_feas)?;
    let mut out = json!({
        "command": "certify",
        "coeffs": serde_json::to_value(&p).unwrap()["coeffs"],
        "verdict": verdict_str(r.verdict),
        "margin": r.margin,
        "exact": r.exact,
        "tolerances": tolerances_json(cli),
    });
    if let Some(cert) = &r.certificate {
        out["certificate"] = cert.to_json_value();
    }
    if r.verdict == Verdict::Outside {
        if let Some(a) = &r.separating {
            let (x, v) = separating_point(&p, a, cli.grid);
            out["separating_point"] = json!(x);
            out["separating_value"] = json!(v);
            out["separating_matrix"] = a.to_json_value();
        }
    }
    Ok(out)
}

fn run_ball(cli: &Cli, doc: &str) -> Result<Value, Error> {
    let p = parse_poly(doc)?;
    let r = in_unit_ball(&p, cli.tol_gap, cli.tol_feas)?;
    let mut out = json!({
        "command": "ball",
        "coeffs": serde_json::to_value(&p).unwrap()["coeffs"],
        "verdict": verdict_str(r.verdict),
        "margin": r.margin,
        "boundary_tolerance": r.verdict == Verdict::Boundary,
        "tolerances": tolerances_json(cli),
    });
    if let Some(cert) = &r.certificate {
        out["certificate"] = cert.to_json_value();
    }
    Ok(out)
}

fn run_opt(cli: &Cli, doc: &str, maximize: bool) -> Result<Value, Error> {
    let p = parse_poly(doc)?;
    let opts = OptimizeOptions {
        tol_gap: cli.tol_gap,
        tol_feas: cli.tol_feas,
        n_grid: cli.grid.max(1000),
        ..OptimizeOptions::default()
    };
    let r = if maximize {
        maximize_on_sphere(&p, &opts)?
    } else {
        minimize_on_sphere(&p, &opts)?
    };
    let mut out = r.to_json_value();
    out["command"] = json!(if maximize { "maximize" } else { "minimize" });
    out["coeffs"] = serde_json::to_value(&p).unwrap()["coeffs"].clone();
    out["tolerances"] = tolerances_json(cli);
    Ok(out)
}

fn run_scale(cli: &Cli, doc: &str) -> Result<Value, Error> {
    let p = parse_poly(doc)?;
    let opts = OptimizeOptions {
        tol_gap: cli.tol_gap,
        tol_feas: cli.tol_feas,
        n_grid: cli.grid.max(1000),
        ..OptimizeOptions::default()
    };
    let r = scale_to_ball_boundary(&p, &opts)?;
    Ok(json!({
        "command": "scale",
        "coeffs": serde_json::to_value(&p).unwrap()["coeffs"],
        "lambda": r.lambda,
        "cross_check": r.cross_check,
        "agreement": (r.lambda - r.cross_check).abs(),
        "tolerances": tolerances_json(cli),
    }))
}

fn run_verify_cert(cli: &Cli, doc: &str) -> Result<Value, Error> {
    let v: Value = serde_json::from_str(doc)
        .map_err(|e| Error::InvalidInput(format!("input JSON: {e}")))?;
    let p: CubicOnSphere = serde_json::from_value(json!({"coeffs": v.get("coeffs").cloned().ok_or_else(
        || Error::InvalidInput("verify-cert input needs a \"coeffs\" map".into()))?}))
        .map_err(|e| Error::InvalidInput(format!("input JSON: {e}")))?;
    let cert_v = v
        .get("certificate")
        .ok_or_else(|| Error::InvalidInput("verify-cert input needs a \"certificate\" object".into()))?;
    let cert = NonnegCertificate::from_json_value(cert_v)?;
    let rep = verify_certificate(&poly_to_h(&p), &cert)?;
    Ok(json!({
        "command": "verify-cert",
        "pass": rep.pass,
        "residual": rep.residual,
        "psd_margins": [rep.psd_margin_b, rep.psd_margin_c],
        "failures": rep.failures,
        "tolerances": tolerances_json(cli),
    }))
}

fn run_random(cli: &Cli) -> Result<Value, Error> {
    let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
    let mut p = CubicOnSphere::zero();
    for c in &mut p.coeffs {
        *c = rng.gen_range(-1.0..1.0);
    }
    Ok(serde_json::to_value(&p).unwrap())
}

fn render_text(v: &Value) -> String {
    fn walk(out: &mut String, prefix: &str, v: &Value) {
        match v {
            Value::Object(map) => {
                for (k, val) in map {
                    let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                    walk(out, &key, val);
                }
            }
            other => {
                out.push_str(prefix);
                out.push_str(" = ");
                out.push_str(&compact(other));
                out.push('\n');
            }
        }
    }
    fn compact(v: &Value) -> String {
        serde_json::to_string(v).unwrap()
    }
    let mut s = String::new();
    walk(&mut s, "", v);
    s
}

fn emit(cli: &Cli, v: &Value) {
    match cli.format {
        Format::Json => println!("{}", serde_json::to_string_pretty(v).unwrap()),
        Format::Text => print!("{}", render_text(v)),
    }
}

fn run_selftest() -> Result<ExitCode, Error> {
    let mut all_ok = true;
    let mut check = |name: &str, ok: bool| {
        println!("{} {name}", if ok { "PASS" } else { "FAIL" });
        all_ok &= ok;
    };

    // Kronecker structure of the partially transposed duplication
    let mut rng = ChaCha8Rng::seed_from_u64(12345);
    let mut kron_ok = true;
    for _ in 0..200 {
        let z = num_complex::Complex64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        for d in [2usize, 3] {
            let zm = moment_matrix(&RiemannPoint::Finite(z), d);
            let g = dup_gamma(&zm).unwrap();
            let mut kron = HermitianMatrix::zeros(2 * d);
            for bi in 0..2 {
                for bj in 0..2 {
                    let factor = match (bi, bj) {
                        (0, 0) => num_complex::Complex64::new(1.0, 0.0),
                        (0, 1) => z,
                        (1, 0) => z.conj(),
                        _ => num_complex::Complex64::new(z.norm_sqr(), 0.0),
                    };
                    for i in 0..d {
                        for j in 0..d {
                            if bi * d + i <= bj * d + j {
                                kron.set(bi * d + i, bj * d + j, factor * zm.get(i, j));
                            }
                        }
                    }
                }
            }
            if g.sub(&kron).norm_fro() > 1e-12 * zm.norm_fro() {
                kron_ok = false;
            }
        }
    }
    check("kronecker-identity", kron_ok);

    // bijection round trip
    let mut bij_ok = true;
    for _ in 0..100 {
        let mut p = CubicOnSphere::zero();
        for c in &mut p.coeffs {
            *c = rng.gen_range(-1.0..1.0);
        }
        let q = sphere_cubics::sphere_moment::h_to_poly(&poly_to_h(&p)).unwrap();
        let dev = p
            .coeffs
            .iter()
            .zip(&q.coeffs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        if dev > 1e-10 {
            bij_ok = false;
        }
    }
    check("bijection-round-trip", bij_ok);

    // theorem systems against the machine-generated ones
    let gen = generated_nonneg_system()?;
    check(
        "nonneg-system-vs-generated",
        theorem_nonneg_system().max_deviation_from_generated(&gen) <= 1e-12,
    );
    check(
        "unit-ball-system-substitution",
        theorem_unit_ball_system()
            .max_row_deviation(&substitute_unit_ball(&theorem_nonneg_system()))
            <= 1e-12,
    );

    // PSD equivalence A >= 0 iff G_A >= 0 on random matrices
    let mut psd_ok = true;
    for _ in 0..50 {
        let a = HermitianMatrix::from_upper_fn(4, |i, j| {
            if i == j {
                num_complex::Complex64::new(rng.gen_range(-1.0..1.0), 0.0)
            } else {
                num_complex::Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            }
        });
        let ga = sphere_cubics::hermitian::duplicate_center(&a).unwrap();
        let ga_min = ga.matrix().min_eigenvalue()?;
        let a_min = a.min_eigenvalue()?;
        if (a_min >= -1e-10) != (ga_min >= -1e-9 * (1.0 + ga.matrix().norm_fro())) {
            psd_ok = false;
        }
    }
    check("psd-equivalence-a-vs-ga", psd_ok);

    // solver sanity
    let mut prob = sdp::SdpProblem::new(vec![2]);
    prob.objective = vec![nalgebra::DMatrix::identity(2, 2)];
    let mut e00 = nalgebra::DMatrix::zeros(2, 2);
    e00[(0, 0)] = 1.0;
    prob.add_constraint(vec![e00], 1.0);
    let sol = sdp::solve(&prob, 1e-9, 1e-9, sdp::DEFAULT_MAX_ITER)?;
    check(
        "sdp-trace-example",
        sol.status == sdp::SdpStatus::Optimal && (sol.primal_obj - 1.0).abs() < 1e-7,
    );

    // optimization landmarks
    let x1 = CubicOnSphere::from_terms(&[((3, 0, 0), 1.0), ((1, 2, 0), 1.0), ((1, 0, 2), 1.0)])
        .unwrap();
    let opts = OptimizeOptions { n_grid: 5000, ..OptimizeOptions::default() };
    let r = minimize_on_sphere(&x1, &opts)?;
    check("minimize-x1-landmark", (r.value - -1.0).abs() < 1e-7);
    let x1c = CubicOnSphere::from_terms(&[((3, 0, 0), 1.0)]).unwrap();
    let s = scale_to_ball_boundary(&x1c, &opts)?;
    check("scale-x1cubed-landmark", (s.lambda - 1.0).abs() < 1e-7);

    // membership of moment matrices in the cone
    let z = moment_matrix(&RiemannPoint::finite(0.3, -1.2), 3);
    check("moment-matrix-in-cone", in_cone_cd(&z, 3)?.is_inside());

    Ok(if all_ok { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn dispatch(cli: &Cli, doc: &str) -> Result<Value, Error> {
    match cli.cmd {
        Cmd::Certify => run_certify(cli, doc),
        Cmd::Ball => run_ball(cli, doc),
        Cmd::Minimize => run_opt(cli, doc, false),
        Cmd::Maximize => run_opt(cli, doc, true),
        Cmd::Scale => run_scale(cli, doc),
        Cmd::VerifyCert => run_verify_cert(cli, doc),
        Cmd::Random | Cmd::Selftest => unreachable!("handled before dispatch"),
    }
}

fn run(cli: &Cli) -> Result<ExitCode, Error> {
    if cli.tol_gap <= 0.0 || cli.tol_feas <= 0.0 {
        return Err(Error::InvalidInput("tolerances must be positive".into()));
    }
    match cli.cmd {
        Cmd::Random => {
            let v = run_random(cli)?;
            emit(cli, &v);
            return Ok(ExitCode::SUCCESS);
        }
        Cmd::Selftest => return run_selftest(),
        _ => {}
    }
    if let Some(batch) = &cli.batch {
        let content = std::fs::read_to_string(batch)
            .map_err(|e| Error::InvalidInput(format!("reading {}: {e}", batch.display())))?;
        let mut worst = ExitCode::SUCCESS;
        for line in content.lines().filter(|l| !l.trim().is_empty()) {
            match dispatch(cli, line) {
                Ok(v) => println!("{}", serde_json::to_string(&v).unwrap()),
                Err(e) => {
                    if is_usage_error(&e) {
                        return Err(e);
                    }
                    println!("{}", json!({"error": e.to_string()}));
                    worst = ExitCode::from(2);
                }
            }
        }
        return Ok(worst);
    }
    let doc = read_document(cli)?;
    let v = dispatch(cli, &doc)?;
    emit(cli, &v);
    Ok(ExitCode::SUCCESS)
}
