//! Study execution: meshing, solving, the fixed CSV schema, run manifests,
//! and golden-file comparison.
//!
//! One CSV schema serves every study so downstream tooling never branches on
//! the command. Derived columns (convergence rates, energy ratios) are
//! appended after the fixed block. The manifest records the resolved
//! configuration and a digest of the CSV with the wall-clock column removed:
//! re-running the same configuration single-threaded reproduces that digest
//! bitwise.

use crate::config::{self, CliError, LcSpec, Study, StudyArgs};
use rmfem::analysis::{energy, error_norms, FieldSolution};
use rmfem::assembly::{assemble, assemble_with_rule, Formulation};
use rmfem::cases::{self, BenchmarkCase};
use rmfem::linsys::solve;
use rmfem::mesh::QuadMesh;
use rmfem::par;
use rmfem::refspaces::gauss_rule;
use sha2::{Digest, Sha256};
use std::fs;
use std::path::Path;
use std::time::Instant;

/// Fixed column block shared by every study CSV.
pub const SCHEMA: [&str; 20] = [
    "case",
    "formulation",
    "order",
    "nx",
    "ny",
    "ndof_u",
    "ndof_zeta",
    "ndof_m",
    "lc",
    "l2_u",
    "l2_zeta",
    "l2_curl_zeta",
    "hcurl_zeta",
    "rel_hcurl_zeta",
    "graddiff",
    "curlnorm",
    "energy_total",
    "energy_internal",
    "residual",
    "wall_ms",
];

/// Relative tolerance for float columns in golden comparisons.
const GOLDEN_FLOAT_TOL: f64 = 1e-2;

/// Everything a CSV row needs from one assemble-solve-measure pass.
struct PointResult {
    report: rmfem::analysis::ErrorReport,
    energy_total: f64,
    energy_internal: f64,
    residual: f64,
    wall_ms: f64,
}

/// Error quadrature: comfortably above the assembly order, capped by the
/// tabulated Gauss rules.
fn norm_quad(order: usize) -> usize {
    (order + 3).min(6)
}

fn header_with(extra: &[&str]) -> Vec<String> {
    SCHEMA
        .iter()
        .copied()
        .chain(extra.iter().copied())
        .map(str::to_string)
        .collect()
}

/// Shortest round-trip formatting keeps the CSV bitwise reproducible and
/// exact to re-parse.
fn fmt_f(v: f64) -> String {
    format!("{v}")
}

fn build_mesh(study: &Study, n: Option<usize>) -> Result<(usize, usize, QuadMesh), CliError> {
    match (n, &study.mesh_file) {
        (Some(n), _) => {
            let raw =
                QuadMesh::generate_structured(n, n, study.case.lower, study.case.upper)?;
            let raw = if study.perturb > 0.0 {
                raw.perturb_interior(study.perturb, study.seed)?
            } else {
                raw
            };
            Ok((n, n, study.case.prepare_mesh(raw)?))
        }
        (None, Some(path)) => {
            let text = fs::read_to_string(path).map_err(|e| {
                CliError::Config(format!("cannot read mesh file {}: {e}", path.display()))
            })?;
            let mesh = QuadMesh::from_json(&text)?;
            Ok((0, 0, study.case.prepare_mesh(mesh)?))
        }
        (None, None) => unreachable!("grid presence is validated per command"),
    }
}

fn run_point(
    study: &Study,
    formulation: Formulation,
    mesh: &QuadMesh,
    lc: LcSpec,
    measure: &BenchmarkCase,
) -> Result<PointResult, CliError> {
    let params = study.case.default_params.with_lc(lc.to_characteristic());
    let start = Instant::now();
    let sys = match study.quad {
        Some(q) => assemble_with_rule(mesh, formulation, &params, &study.case, gauss_rule(q))?,
        None => assemble(mesh, formulation, &params, &study.case)?,
    };
    let rep = solve(&sys)?;
    let sol = FieldSolution::new(mesh, &sys.dof_map, &rep.solution);
    let report = error_norms(&sol, measure, &params, norm_quad(formulation.order()))?;
    let energy_total = energy(&sol, &params, &study.case, true);
    let energy_internal = energy(&sol, &params, &study.case, false);
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(PointResult {
        report,
        energy_total,
        energy_internal,
        residual: rep.residual,
        wall_ms,
    })
}

fn base_row(
    case: &str,
    formulation: Formulation,
    nx: usize,
    ny: usize,
    lc: LcSpec,
    p: &PointResult,
) -> Vec<String> {
    let r = &p.report;
    vec![
        case.to_string(),
        formulation.to_string(),
        formulation.order().to_string(),
        nx.to_string(),
        ny.to_string(),
        r.ndof_u.to_string(),
        r.ndof_zeta.to_string(),
        r.ndof_m.to_string(),
        lc.label(),
        fmt_f(r.l2_u),
        fmt_f(r.l2_zeta),
        fmt_f(r.l2_curl_zeta),
        fmt_f(r.hcurl_zeta),
        fmt_f(r.rel_hcurl_zeta),
        fmt_f(r.graddiff),
        fmt_f(r.curlnorm),
        fmt_f(p.energy_total),
        fmt_f(p.energy_internal),
        fmt_f(p.residual),
        format!("{:.3}", p.wall_ms),
    ]
}

/// Observed order of convergence between two ladder points, blank when a
/// quantity is absent or degenerate.
fn rate_cell(prev: Option<(f64, f64)>, cur: f64, h: f64) -> String {
    match prev {
        Some((e0, h0))
            if e0.is_finite() && cur.is_finite() && e0 > 0.0 && cur > 0.0 && h0 != h =>
        {
            format!("{:.4}", (e0 / cur).ln() / (h0 / h).ln())
        }
        _ => String::new(),
    }
}

fn rows_solve(study: &Study) -> Result<(Vec<String>, Vec<Vec<String>>), CliError> {
    let measure = study.measure_case();
    let (nx, ny, mesh) = build_mesh(study, study.grids.first().copied())?;
    let p = run_point(study, study.formulation, &mesh, study.lcs[0], &measure)?;
    let row = base_row(study.case.name, study.formulation, nx, ny, study.lcs[0], &p);
    Ok((header_with(&[]), vec![row]))
}

fn rows_convergence(study: &Study) -> Result<(Vec<String>, Vec<Vec<String>>), CliError> {
    let measure = study.measure_case();
    let lc = study.lcs[0];
    let mut rows = Vec::new();
    // (h, l2_u, l2_zeta, hcurl_zeta) of the previous ladder point.
    let mut prev: Option<(f64, f64, f64, f64)> = None;
    for &n in &study.grids {
        let (nx, ny, mesh) = build_mesh(study, Some(n))?;
        let p = run_point(study, study.formulation, &mesh, lc, &measure)?;
        let r = &p.report;
        let mut row = base_row(study.case.name, study.formulation, nx, ny, lc, &p);
        row.push(rate_cell(prev.map(|(h, e, _, _)| (e, h)), r.l2_u, r.h));
        row.push(rate_cell(prev.map(|(h, _, e, _)| (e, h)), r.l2_zeta, r.h));
        row.push(rate_cell(prev.map(|(h, _, _, e)| (e, h)), r.hcurl_zeta, r.h));
        rows.push(row);
        prev = Some((r.h, r.l2_u, r.l2_zeta, r.hcurl_zeta));
    }
    Ok((
        header_with(&["rate_l2_u", "rate_l2_zeta", "rate_hcurl_zeta"]),
        rows,
    ))
}

fn rows_lc_sweep(study: &Study) -> Result<(Vec<String>, Vec<Vec<String>>), CliError> {
    let measure = study.measure_case();
    // With a limit companion the sweep tracks the distance to the limit
    // fields; otherwise the coupling defect |grad u - zeta| is the decaying
    // quantity of interest.
    let has_limit = measure.name != study.case.name;
    let (nx, ny, mesh) = build_mesh(study, study.grids.first().copied())?;
    let mut rows = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    for &lc in &study.lcs {
        let p = run_point(study, study.formulation, &mesh, lc, &measure)?;
        let err = if has_limit {
            p.report.rel_hcurl_zeta
        } else {
            p.report.graddiff
        };
        let mut row = base_row(study.case.name, study.formulation, nx, ny, lc, &p);
        row.push(match (prev, lc.finite()) {
            (Some((e0, l0)), Some(l))
                if e0.is_finite()
                    && err.is_finite()
                    && e0 > 0.0
                    && err > 0.0
                    && l0 > 0.0
                    && l > 0.0
                    && l0 != l =>
            {
                // Positive when the quantity decays as Lc grows; 2 marks
                // the 1/Lc^2 regime.
                format!("{:.4}", (e0 / err).ln() / (l / l0).ln())
            }
            _ => String::new(),
        });
        rows.push(row);
        prev = lc.finite().map(|l| (err, l));
    }
    Ok((header_with(&["lc_decay_rate"]), rows))
}

fn rows_energy_sweep(study: &Study) -> Result<(Vec<String>, Vec<Vec<String>>), CliError> {
    let measure = study.measure_case();
    let (nx, ny, mesh) = build_mesh(study, study.grids.first().copied())?;
    let formulations = [
        study.formulation,
        Formulation::FullGradientNodal(study.formulation.order()),
    ];
    let mut rows = Vec::new();
    for formulation in formulations {
        let mut prev: Option<f64> = None;
        for &lc in &study.lcs {
            let p = run_point(study, formulation, &mesh, lc, &measure)?;
            let mut row = base_row(study.case.name, formulation, nx, ny, lc, &p);
            row.push(match prev {
                Some(e0) if e0.is_finite() && e0 != 0.0 && p.energy_total.is_finite() => {
                    format!("{:.6}", p.energy_total / e0)
                }
                _ => String::new(),
            });
            rows.push(row);
            prev = Some(p.energy_total);
        }
    }
    Ok((header_with(&["energy_ratio"]), rows))
}

fn render_csv(header: &[String], rows: &[Vec<String>]) -> String {
    let mut text = header.join(",");
    text.push('\n');
    for row in rows {
        text.push_str(&row.join(","));
        text.push('\n');
    }
    text
}

/// SHA-256 of the CSV with the wall_ms column removed from every line; the
/// reproducibility contract covers everything but wall-clock time.
fn digest_excluding_wall(csv: &str) -> String {
    let mut lines = csv.lines();
    let header: Vec<&str> = match lines.next() {
        Some(h) => h.split(',').collect(),
        None => return String::new(),
    };
    let wall = header.iter().position(|c| *c == "wall_ms");
    let mut hasher = Sha256::new();
    for line in csv.lines() {
        let kept: Vec<&str> = line
            .split(',')
            .enumerate()
            .filter(|(i, _)| Some(*i) != wall)
            .map(|(_, f)| f)
            .collect();
        hasher.update(kept.join(","));
        hasher.update("\n");
    }
    format!("{:x}", hasher.finalize())
}

fn manifest_path(out: &Path) -> std::path::PathBuf {
    out.with_extension("manifest.json")
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))
}

fn write_manifest(study: &Study, outputs: serde_json::Value) -> Result<(), CliError> {
    let manifest = serde_json::json!({
        "tool": { "name": "rmfem", "version": env!("CARGO_PKG_VERSION") },
        "config": study.config_json(),
        "seeds": {
            "mesh_perturbation": study.seed,
            // Fixed internal seed of the strong-form sampling in
            // residual checks; recorded so reruns are exact.
            "residual_sampling": 0x5eed,
        },
        "outputs": outputs,
        "reproducibility": "re-running this configuration with --threads 1 reproduces every \
                            output column except wall_ms bitwise",
    });
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_file(&manifest_path(&study.out), &text)
}

pub fn run_study(command: &'static str, args: StudyArgs) -> Result<(), CliError> {
    let study = config::validate(command, &args)?;
    let (header, rows) = par::with_threads(study.threads, || match command {
        "solve" => rows_solve(&study),
        "convergence" => rows_convergence(&study),
        "lc-sweep" => rows_lc_sweep(&study),
        "energy-sweep" => rows_energy_sweep(&study),
        other => unreachable!("unknown study command {other}"),
    })?;
    let csv = render_csv(&header, &rows);

    write_file(&study.out, &csv)?;
    write_manifest(
        &study,
        serde_json::json!({
            "csv": study.out.display().to_string(),
            "rows": rows.len(),
            "csv_digest_excluding_wall": digest_excluding_wall(&csv),
        }),
    )?;
    print!("{csv}");
    eprintln!(
        "wrote {} and {}",
        study.out.display(),
        manifest_path(&study.out).display()
    );

    if let Some(golden) = &study.golden {
        let golden_text = fs::read_to_string(golden).map_err(|e| {
            CliError::Config(format!("cannot read golden file {}: {e}", golden.display()))
        })?;
        compare_golden(&csv, &golden_text).map_err(CliError::Golden)?;
        eprintln!("golden comparison passed: {}", golden.display());
    }
    Ok(())
}

pub fn run_mesh_gen(args: StudyArgs) -> Result<(), CliError> {
    let study = config::validate("mesh-gen", &args)?;
    let n = study.grids[0];
    let raw = QuadMesh::generate_structured(n, n, study.case.lower, study.case.upper)?;
    let raw = if study.perturb > 0.0 {
        raw.perturb_interior(study.perturb, study.seed)?
    } else {
        raw
    };
    let mesh = study.case.prepare_mesh(raw)?;
    let text = mesh.to_json();

    write_file(&study.out, &text)?;
    let mut hasher = Sha256::new();
    hasher.update(&text);
    write_manifest(
        &study,
        serde_json::json!({
            "mesh": study.out.display().to_string(),
            "nodes": mesh.nodes.len(),
            "elems": mesh.elems.len(),
            "digest": format!("{:x}", hasher.finalize()),
        }),
    )?;
    println!(
        "wrote {} ({} nodes, {} elements on [{}, {}] x [{}, {}])",
        study.out.display(),
        mesh.nodes.len(),
        mesh.elems.len(),
        study.case.lower[0],
        study.case.upper[0],
        study.case.lower[1],
        study.case.upper[1],
    );
    Ok(())
}

pub fn run_residual_check(args: StudyArgs) -> Result<(), CliError> {
    let study = config::validate("residual-check", &args)?;
    const N_SAMPLES: usize = 100;
    const FD_STEP: f64 = 1e-4;
    // Central differences with step 1e-4 carry O(1e-8) truncation error on
    // these smooth loads; residuals above this bound indicate a genuine
    // load/strong-form mismatch rather than differencing noise.
    const TOL: f64 = 1e-5;

    let list: Vec<BenchmarkCase> = if study.all_cases {
        cases::registry()
    } else {
        vec![cases::by_name(study.case.name).expect("validated case name")]
    };
    let lc_override = if args.lc.is_empty() {
        None
    } else {
        Some(study.lcs[0])
    };

    let header: Vec<String> = ["case", "n_samples", "fd_step", "r1_max", "r2_max", "status"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for case in &list {
        let params = match lc_override {
            Some(lc) => case.default_params.with_lc(lc.to_characteristic()),
            None => case.default_params,
        };
        let report = cases::strong_residual_check(case, &params, N_SAMPLES, FD_STEP);
        let ok = report.r1_max <= TOL && report.r2_max <= TOL;
        println!(
            "residual-check case={} r1_max={:.3e} r2_max={:.3e} {}",
            case.name,
            report.r1_max,
            report.r2_max,
            if ok { "pass" } else { "FAIL" }
        );
        if !ok {
            failures.push(case.name.to_string());
        }
        rows.push(vec![
            case.name.to_string(),
            report.n_samples.to_string(),
            fmt_f(FD_STEP),
            fmt_f(report.r1_max),
            fmt_f(report.r2_max),
            if ok { "pass" } else { "fail" }.to_string(),
        ]);
    }
    let csv = render_csv(&header, &rows);

    write_file(&study.out, &csv)?;
    write_manifest(
        &study,
        serde_json::json!({
            "csv": study.out.display().to_string(),
            "rows": rows.len(),
            "csv_digest_excluding_wall": digest_excluding_wall(&csv),
            "tolerance": TOL,
        }),
    )?;

    if let Some(golden) = &study.golden {
        let golden_text = fs::read_to_string(golden).map_err(|e| {
            CliError::Config(format!("cannot read golden file {}: {e}", golden.display()))
        })?;
        compare_golden(&csv, &golden_text).map_err(CliError::Golden)?;
        eprintln!("golden comparison passed: {}", golden.display());
    }
    if !failures.is_empty() {
        return Err(CliError::Golden(format!(
            "strong-form residuals exceed {TOL:.0e} for: {}",
            failures.join(", ")
        )));
    }
    Ok(())
}

/// Tolerance class of a CSV column in golden comparisons.
enum ColumnRule {
    ExactText,
    NumericIdentity,
    Float,
    ResidualBound,
    Ignore,
}

fn column_rule(name: &str) -> ColumnRule {
    match name {
        "case" | "formulation" | "status" | "order" | "nx" | "ny" | "ndof_u" | "ndof_zeta"
        | "ndof_m" | "n_samples" => ColumnRule::ExactText,
        "lc" | "fd_step" => ColumnRule::NumericIdentity,
        "residual" => ColumnRule::ResidualBound,
        "wall_ms" => ColumnRule::Ignore,
        _ => ColumnRule::Float,
    }
}

fn float_matches(produced: f64, golden: f64, rel_tol: f64) -> bool {
    if produced.is_nan() && golden.is_nan() {
        return true;
    }
    if golden == 0.0 {
        return produced.abs() <= 1e-12;
    }
    ((produced - golden) / golden).abs() <= rel_tol
}

/// Per-column comparison of a produced CSV against a golden file. Exact
/// identity for discrete columns, a relative tolerance for measured floats,
/// a one-sided bound for solver residuals, and wall-clock time is ignored.
fn compare_golden(produced: &str, golden: &str) -> Result<(), String> {
    let p_lines: Vec<&str> = produced.lines().collect();
    let g_lines: Vec<&str> = golden.lines().filter(|l| !l.trim().is_empty()).collect();
    if g_lines.is_empty() {
        return Err("golden file is empty".to_string());
    }
    let p_header: Vec<&str> = p_lines[0].split(',').collect();
    let g_header: Vec<&str> = g_lines[0].split(',').collect();
    if p_header != g_header {
        return Err(format!(
            "column schema differs: produced [{}], golden [{}]",
            p_header.join(" "),
            g_header.join(" ")
        ));
    }
    if p_lines.len() != g_lines.len() {
        return Err(format!(
            "row count differs: produced {}, golden {}",
            p_lines.len() - 1,
            g_lines.len() - 1
        ));
    }

    let mut mismatches = Vec::new();
    for (i, (p_line, g_line)) in p_lines.iter().zip(&g_lines).enumerate().skip(1) {
        let p_fields: Vec<&str> = p_line.split(',').collect();
        let g_fields: Vec<&str> = g_line.split(',').collect();
        if p_fields.len() != g_fields.len() {
            mismatches.push(format!("row {i}: field count differs"));
            continue;
        }
        for (c, name) in p_header.iter().enumerate() {
            let (p, g) = (p_fields[c], g_fields[c]);
            if p == g {
                continue;
            }
            let ok = match column_rule(name) {
                ColumnRule::ExactText => false,
                ColumnRule::Ignore => true,
                ColumnRule::NumericIdentity => match (p.parse::<f64>(), g.parse::<f64>()) {
                    (Ok(pv), Ok(gv)) => float_matches(pv, gv, 1e-12),
                    _ => false,
                },
                ColumnRule::Float => match (p.parse::<f64>(), g.parse::<f64>()) {
                    (Ok(pv), Ok(gv)) => float_matches(pv, gv, GOLDEN_FLOAT_TOL),
                    _ => false,
                },
                ColumnRule::ResidualBound => match (p.parse::<f64>(), g.parse::<f64>()) {
                    (Ok(pv), Ok(gv)) => pv <= (10.0 * gv).max(1e-12),
                    _ => false,
                },
            };
            if !ok {
                mismatches.push(format!("row {i}, column {name}: produced {p}, golden {g}"));
                if mismatches.len() >= 8 {
                    mismatches.push("further mismatches suppressed".to_string());
                    return Err(mismatches.join("; "));
                }
            }
        }
    }
    if mismatches.is_empty() {
        Ok(())
    } else {
        Err(mismatches.join("; "))
    }
}
