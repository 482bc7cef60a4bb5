//! Deterministic serialization of a run: `report.json` plus CSV tables.
//!
//! Every float is written as `{:.16e}` (17 significant digits), so two runs
//! with the same inputs produce byte-identical files. Complex numbers are
//! `[re, im]`; non-finite values become the strings `"inf"`, `"-inf"`, `"nan"`.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DMatrix;
use serde_json::{json, Map, Value};

use crate::error::{LabError, Result};
use crate::geometry::C64;
use crate::pipeline::{RunOutput, VerifyRow, IN_SCOPE_TAGS};

pub const REPORT_VERSION: u32 = 1;

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn num(x: f64) -> Value {
    if x.is_finite() {
        serde_json::from_str(&fmt_f64(x)).expect("formatted float is a JSON number")
    } else if x.is_nan() {
        Value::String("nan".into())
    } else if x > 0.0 {
        Value::String("inf".into())
    } else {
        Value::String("-inf".into())
    }
}

fn cnum(z: C64) -> Value {
    Value::Array(vec![num(z.re), num(z.im)])
}

fn cvec(v: &[C64]) -> Value {
    Value::Array(v.iter().map(|&z| cnum(z)).collect())
}

fn rvec(v: &[f64]) -> Value {
    Value::Array(v.iter().map(|&x| num(x)).collect())
}

fn cmat(m: &DMatrix<C64>) -> Value {
    Value::Array((0..m.nrows()).map(|i| Value::Array((0..m.ncols()).map(|j| cnum(m[(i, j)])).collect())).collect())
}

fn rmat(m: &DMatrix<f64>) -> Value {
    Value::Array((0..m.nrows()).map(|i| Value::Array((0..m.ncols()).map(|j| num(m[(i, j)])).collect())).collect())
}

/// Four-index tensor flattened `[((i·m + j)·m + k)·m + l]`, nested as
/// `[i][j][k][l]`.
fn tensor4(v: &[C64], m: usize) -> Value {
    let at = |i: usize, j: usize, k: usize, l: usize| v[((i * m + j) * m + k) * m + l];
    Value::Array(
        (0..m)
            .map(|i| {
                Value::Array(
                    (0..m)
                        .map(|j| Value::Array((0..m).map(|k| Value::Array((0..m).map(|l| cnum(at(i, j, k, l))).collect())).collect()))
                        .collect(),
                )
            })
            .collect(),
    )
}

fn opt<T>(x: &Option<T>, f: impl Fn(&T) -> Value) -> Value {
    x.as_ref().map_or(Value::Null, f)
}

fn row_json(r: &VerifyRow) -> Value {
    json!({
        "check": r.check,
        "residual": num(r.residual),
        "tolerance": num(r.tolerance),
        "pass": r.pass,
        "applicable": r.applicable,
        "note": r.note,
    })
}

pub fn report_json(out: &RunOutput) -> Value {
    let sc = &out.scenario;
    let m = sc.family.base_dim;
    let mut residuals: BTreeMap<&str, Vec<Value>> = BTreeMap::new();
    for tag in IN_SCOPE_TAGS {
        residuals.insert(tag, Vec::new());
    }
    for r in &out.rows {
        residuals.entry(r.tag).or_default().push(row_json(r));
    }
    let residuals: Map<String, Value> = residuals.into_iter().map(|(k, v)| (k.to_string(), Value::Array(v))).collect();

    let geometry = json!({
        "n": sc.geometry.periods.len(),
        "N": sc.geometry.grid,
        "periods": sc.geometry.periods.iter().map(|p| rvec(p)).collect::<Vec<_>>(),
        "metric": sc.geometry.metric.iter().map(|p| rvec(p)).collect::<Vec<_>>(),
        "volume": sc.geometry().map(|g| num(g.volume())).unwrap_or(Value::Null),
    });
    let family = json!({
        "scenario": sc.name,
        "seed": out.seed,
        "rank": sc.bundle.rank,
        "base_dim": m,
        "center": sc.family.center.iter().map(|p| rvec(p)).collect::<Vec<_>>(),
        "eps": num(sc.family.eps),
        "richardson": sc.family.richardson,
        "stencil_points": out.stencil_points,
        "lambda_range": rvec(&[out.lambda_range.0, out.lambda_range.1]),
        "max_stencil_residual": num(out.max_point_residual),
        "tasks": sc.tasks,
    });
    let flow = json!({
        "iterations": out.flow.iterations,
        "residual_sup": num(out.flow.residual_sup),
        "residual_l2": num(out.flow.residual_l2),
        "converged": out.flow.converged,
    });
    let r = json!({
        "curvature": opt(&out.curvature, |c| tensor4(&c.r112, c.m)),
        "green_form": opt(&out.curvature, |c| tensor4(&c.r111, c.m)),
        "finite_difference": opt(&out.fd_curvature, |v| tensor4(v, m)),
        "symmetry_defect": opt(&out.curvature, |c| num(c.symmetry)),
        "first_block_min": opt(&out.curvature, |c| num(c.first_block_min)),
        "green_block_max": opt(&out.curvature, |c| num(c.green_block_max)),
        "sectional": opt(&out.sectional, |v| Value::Array(v.iter().map(|x| rvec(&[x.0, x.1])).collect())),
    });
    let checks = json!({
        "kahler": opt(&out.kahler, |k| json!({
            "fd_vs_formula": num(k.fd_vs_formula),
            "symmetry": num(k.symmetry),
            "orthogonality": num(k.orthogonality),
        })),
        "harmonicity": opt(&out.harmonicity, |v| Value::Array(v.iter().map(|x| rvec(&[x.0, x.1])).collect())),
        "identities": opt(&out.identities, |ids| {
            Value::Object(ids.rows().into_iter().map(|(k, v)| (k.to_string(), num(v))).collect())
        }),
        "sigma": opt(&out.sigma, |s| json!({
            "antisymmetry": num(s.antisymmetry),
            "c": s.c.map_or(Value::Null, num),
            "dnu_residual": num(s.dnu_residual),
            "nu_dbar": num(s.nu_dbar),
            "pi_dbar": num(s.pi_dbar),
        })),
        "fiber_integral": opt(&out.fiber, |f| json!({
            "curvature_term": cmat(&f.curvature_term),
            "lambda_term": cmat(&f.lambda_term),
            "higgs_term": cmat(&f.higgs_term),
            "total": cmat(&f.total),
        })),
        "chern": json!({
            "c1": Value::Array(out.chern.c1.iter().map(|v| cvec(v)).collect()),
            "ch2": Value::Array(out.chern.ch2.iter().map(|v| cvec(v)).collect()),
            "c1_lambda_integral": cnum(out.chern.c1_lambda_integral),
        }),
    });
    let hyperkahler = opt(&out.hyperkahler, |h| {
        let a = &h.assumptions;
        json!({
            "assumptions": {
                "proj_flat_residual": num(a.proj_flat_residual),
                "proj_flat_constant": cnum(a.proj_flat_constant),
                "dbar_theta_sym_residual": num(a.dbar_theta_sym_residual),
                "h2_dim_estimate": a.h2_dim_estimate,
                "h2_tracefree_dim": a.h2_tracefree_dim,
                "h2_gap_ratio": num(a.h2_gap_ratio),
                "h2_ritz": rvec(&a.h2_ritz),
                "canonical_captured": num(a.canonical_captured),
                "canonical_closed": num(a.canonical_closed),
                "A": a.proj_flat_residual.max(a.dbar_theta_sym_residual) <= 1e-8,
                "B": a.b_holds(),
                "B_prime": a.b_prime_holds(),
            },
            "xi": {
                "d_xi": num(h.xi.d_xi),
                "d_star_xi": num(h.xi.d_star_xi),
                "epsilon_coefficient": cnum(h.xi.epsilon_coefficient),
                "off_epsilon": num(h.xi.off_epsilon),
            },
            "iota": {
                "claim1": rvec(&h.iota.claim1),
                "claim2": rvec(&h.iota.claim2),
                "d_iota": rvec(&h.iota.d_iota),
                "isometry": num(h.iota.isometry),
                "involution": num(h.iota.involution),
            },
            "perturbation": Value::Array(h.perturbation.iter().map(|p| json!({
                "delta": num(p.delta),
                "assumption_a": num(p.assumption_a),
                "claim2": num(p.claim2),
                "claim3": num(p.claim3),
                "claim4": num(p.claim4),
            })).collect()),
            "quaternions": {
                "I": rmat(&h.quaternions.i),
                "J": rmat(&h.quaternions.j),
                "K": rmat(&h.quaternions.k),
                "projection_residual": num(h.quaternions.projection_residual),
                "relations": num(h.quaternions.relations),
                "span_invariant": h.span_invariant,
            },
            "pi_from_iota": cmat(&h.pi_from_iota),
            "forms": {
                "omega_I": cmat(&h.forms.omega_i),
                "omega_J": rmat(&h.forms.omega_j),
                "omega_K": rmat(&h.forms.omega_k),
                "closed_I": num(h.forms.closed_i),
                "closed_JK": num(h.forms.closed_jk),
                "pi_min_singular": num(h.forms.pi_min_singular),
                "pi_nondegenerate": h.forms.pi_nondegenerate,
                "even_dimension": h.forms.even_dimension,
            },
        })
    });
    json!({
        "report_version": REPORT_VERSION,
        "schema_version": sc.schema_version,
        "pass": out.all_pass(),
        "geometry": geometry,
        "family": family,
        "lambda": num(out.lambda),
        "flow": flow,
        "G": opt(&out.g, cmat),
        "dG": opt(&out.dg, |v| Value::Array(v.iter().map(cmat).collect())),
        "R": r,
        "pi": opt(&out.sigma, |s| cmat(&s.pi)),
        "nu": opt(&out.sigma, |s| cvec(&s.nu)),
        "chi": num(out.chi),
        "checks": checks,
        "residuals": Value::Object(residuals),
        "hyperkahler": hyperkahler,
    })
}

/// Pretty-printed JSON with a trailing newline.
pub fn report_string(out: &RunOutput) -> String {
    let mut s = serde_json::to_string_pretty(&report_json(out)).expect("serializable");
    s.push('\n');
    s
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> LabError {
    LabError::Output(format!("{}: {e}", path.display()))
}

fn write_csv(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(header).map_err(|e| io_err(path, e))?;
    for r in rows {
        w.write_record(&r).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

fn matrix_rows(m: &DMatrix<C64>) -> impl Iterator<Item = Vec<String>> + '_ {
    (0..m.nrows()).flat_map(move |i| {
        (0..m.ncols()).map(move |j| vec![i.to_string(), j.to_string(), fmt_f64(m[(i, j)].re), fmt_f64(m[(i, j)].im)])
    })
}

/// Writes `report.json`, `convergence.csv` and one long-format CSV per
/// matrix that was computed. Returns the file names written.
pub fn write_outputs(out: &RunOutput, dir: &Path) -> Result<Vec<String>> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut written = Vec::new();
    let path = dir.join("report.json");
    std::fs::write(&path, report_string(out)).map_err(|e| io_err(&path, e))?;
    written.push("report.json".to_string());

    let path = dir.join("convergence.csv");
    write_csv(
        &path,
        &["step", "residual_sup", "residual_l2", "dt"],
        out.flow.history.iter().map(|s| vec![s.step.to_string(), fmt_f64(s.residual_sup), fmt_f64(s.residual_l2), fmt_f64(s.dt)]),
    )?;
    written.push("convergence.csv".to_string());

    let ij = ["i", "j", "re", "im"];
    let mut mats: Vec<(String, &DMatrix<C64>)> = Vec::new();
    if let Some(g) = &out.g {
        mats.push(("G.csv".into(), g));
    }
    if let Some(dg) = &out.dg {
        for (k, m) in dg.iter().enumerate() {
            mats.push((format!("dG_{k}.csv"), m));
        }
    }
    if let Some(s) = &out.sigma {
        mats.push(("pi.csv".into(), &s.pi));
    }
    for (name, m) in mats {
        let path = dir.join(&name);
        write_csv(&path, &ij, matrix_rows(m))?;
        written.push(name);
    }
    if let Some(s) = &out.sigma {
        let path = dir.join("nu.csv");
        write_csv(&path, &["i", "re", "im"], s.nu.iter().enumerate().map(|(i, z)| vec![i.to_string(), fmt_f64(z.re), fmt_f64(z.im)]))?;
        written.push("nu.csv".to_string());
    }
    if let Some(c) = &out.curvature {
        let m = c.m;
        let path = dir.join("R.csv");
        let rows = (0..m.pow(4)).map(|f| {
            let (i, j, k, l) = (f / (m * m * m), (f / (m * m)) % m, (f / m) % m, f % m);
            let z = c.r112[f];
            vec![i.to_string(), j.to_string(), k.to_string(), l.to_string(), fmt_f64(z.re), fmt_f64(z.im)]
        });
        write_csv(&path, &["i", "j", "k", "l", "re", "im"], rows)?;
        written.push("R.csv".to_string());
    }
    let path = dir.join("verify.csv");
    write_csv(
        &path,
        &["tag", "check", "residual", "tolerance", "pass", "applicable", "note"],
        out.rows.iter().map(|r| {
            vec![r.tag.to_string(), r.check.clone(), fmt_f64(r.residual), fmt_f64(r.tolerance), r.pass.to_string(), r.applicable.to_string(), r.note.clone()]
        }),
    )?;
    written.push("verify.csv".to_string());
    Ok(written)
}
