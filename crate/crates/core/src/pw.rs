//! Petersson-Weil geometry of a solved family chart: the metric
//! `G_{ij̄} = ⟨η_i, η_j⟩`, its Kähler property, its curvature, the forms
//! `π`, `ν`, `χ` and the fiber-integral identity.

use nalgebra::DMatrix;

use crate::complex::{ComplexElement, Dolbeault};
use crate::error::{LabError, Result};
use crate::family::{FamilyChart, Offset};
use crate::form::{comp_index, FiberMetric, FormField};
use crate::gauge::GaugeConfig;
use crate::geometry::{C64, I};
use crate::hodge::{Hodge, HodgeOptions, HarmonicSpace};
use crate::linalg::{self, ONE, ZERO};

pub type CMatrix = DMatrix<C64>;

/// Graded bracket `[x ∧ y]` of complex elements, summed over parts.
pub fn bracket_elements(x: &ComplexElement, y: &ComplexElement) -> Result<ComplexElement> {
    let bundle = x.bundle().clone();
    let mut out = ComplexElement::zeros(&bundle, x.degree() + y.degree())?;
    for a in x.parts() {
        for b in y.parts() {
            let (p, _) = a.bidegree();
            let (p2, _) = b.bidegree();
            if let Some(slot) = out.part_mut(p + p2) {
                if let Ok(v) = a.bracket(b) {
                    slot.axpy(ONE, &v)?;
                }
            }
        }
    }
    Ok(out)
}

/// `∫ tr(a · b) g dV` for `(0,0)` fields.
pub fn integral_tr_product(a: &FormField, b: &FormField) -> C64 {
    let r = a.rank();
    let geom = a.geom();
    let mut s = ZERO;
    for pt in 0..geom.npts() {
        s += linalg::trace(&linalg::mul(a.at(0, pt), b.at(0, pt), r), r);
    }
    s * geom.weight()
}

/// `∫ g^{β̄α} tr(a_α b_β̄) g dV` for a `(1,0)`-form `a` and a `(0,1)`-form `b`.
pub fn contract_tr(a: &FormField, b: &FormField) -> C64 {
    let n = a.bundle().n();
    let r = a.rank();
    let geom = a.geom();
    let mut s = ZERO;
    for alpha in 0..n {
        for beta in 0..n {
            let g = geom.metric_inv(beta, alpha);
            if g == ZERO {
                continue;
            }
            let mut t = ZERO;
            for pt in 0..geom.npts() {
                t += linalg::trace(&linalg::mul(a.at(alpha, pt), b.at(beta, pt), r), r);
            }
            s += g * t;
        }
    }
    s * geom.weight()
}

fn gram(etas: &[ComplexElement], h: &FiberMetric) -> Result<CMatrix> {
    let m = etas.len();
    let mut g = CMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            g[(i, j)] = etas[i].inner(&etas[j], h)?;
        }
    }
    Ok(g)
}

fn flat(m: &CMatrix) -> Vec<C64> {
    (0..m.nrows()).flat_map(|i| (0..m.ncols()).map(move |j| (i, j))).map(|(i, j)| m[(i, j)]).collect()
}

fn unflat(v: &[C64], k: usize) -> CMatrix {
    CMatrix::from_fn(k, k, |i, j| v[i * k + j])
}

/// `G^{PW}_{ij̄}` at a stencil offset.
pub fn pw_metric_at(chart: &FamilyChart, k: &[i64]) -> Result<CMatrix> {
    let etas = chart.etas_at(k)?;
    let p = chart.point(k)?;
    gram(&etas, p.cfg.metric())
}

pub fn pw_metric(chart: &FamilyChart) -> Result<CMatrix> {
    pw_metric_at(chart, &chart.origin())
}

/// `∂_k G_{ij̄}` by finite differences, indexed `[k][(i, j)]`.
pub fn pw_metric_derivative(chart: &FamilyChart) -> Result<Vec<CMatrix>> {
    let m = chart.base_dim();
    let o = chart.origin();
    (0..m)
        .map(|k| Ok(unflat(&chart.fd(&o, k, false, |q| Ok(flat(&pw_metric_at(chart, q)?)))?, m)))
        .collect()
}

/// Directions whose `G_{ii̅}` is below `1e−10`.
pub fn ineffective_directions(g: &CMatrix) -> Vec<usize> {
    (0..g.nrows()).filter(|&i| g[(i, i)].re < 1e-10).collect()
}

#[derive(Clone, Debug)]
pub struct KahlerCheck {
    /// `max |∂_k G_{ij̄} − ⟨η_{i;k}, η_j⟩|`
    pub fd_vs_formula: f64,
    /// `max |∂_k G_{ij̄} − ∂_i G_{kj̄}|`
    pub symmetry: f64,
    /// `max |⟨η_i, dR_{jk̄}⟩|`
    pub orthogonality: f64,
}

pub fn pw_kahler_check(chart: &FamilyChart) -> Result<KahlerCheck> {
    let m = chart.base_dim();
    let o = chart.origin();
    let dg = pw_metric_derivative(chart)?;
    let p = chart.point(&o)?;
    let h = p.cfg.metric();
    let dol = Dolbeault::new(&p.cfg);
    let etas = chart.etas_at(&o)?;
    let mut out = KahlerCheck { fd_vs_formula: 0.0, symmetry: 0.0, orthogonality: 0.0 };
    for k in 0..m {
        for i in 0..m {
            let eik = chart.eta_cov(&o, i, k)?;
            for j in 0..m {
                let formula = eik.inner(&etas[j], h)?;
                out.fd_vs_formula = out.fd_vs_formula.max((dg[k][(i, j)] - formula).norm());
                out.symmetry = out.symmetry.max((dg[k][(i, j)] - dg[i][(k, j)]).norm());
                let drjk = dol.d0(&chart.base_curvature(&o, j, k)?)?;
                out.orthogonality = out.orthogonality.max(etas[i].inner(&drjk, h)?.norm());
            }
        }
    }
    Ok(out)
}

/// Harmonicity of the Kodaira-Spencer forms: `(‖dη_i‖/‖η_i‖, ‖d*η_i‖/‖η_i‖)`.
pub fn harmonicity(chart: &FamilyChart) -> Result<Vec<(f64, f64)>> {
    let o = chart.origin();
    let p = chart.point(&o)?;
    let h = p.cfg.metric();
    let dol = Dolbeault::new(&p.cfg);
    chart
        .etas_at(&o)?
        .iter()
        .map(|e| {
            let nrm = e.norm(h);
            if nrm < 1e-14 {
                return Ok((0.0, 0.0));
            }
            Ok((dol.d(e)?.norm(h) / nrm, dol.d_star(e)?.norm(h) / nrm))
        })
        .collect()
}

/// Residual norms of the six identities for the covariant derivatives of
/// `η`, each the maximum over index pairs.
#[derive(Clone, Debug, Default)]
pub struct EtaIdentities {
    /// `η_{i;k} = η_{k;i}`
    pub etasymm: f64,
    /// `dη_{i;k} + [η_i ∧ η_k] = 0`
    pub deta_ik: f64,
    /// `d*η_{i;k} = 0`
    pub formetastarik: f64,
    /// `η_{i;j̄} = dR_{ij̄}`
    pub d_rij: f64,
    /// `d*dR_{ij̄} = d*η_{i;j̄}`
    pub box_r: f64,
    /// `d*η_{i;j̄} = g^{β̄α}([φ_{α;i}, φ*_{β̄;j̄}] + [R_{iβ̄}, R_{αj̄}])`
    pub dstaretaij: f64,
}

impl EtaIdentities {
    pub fn rows(&self) -> [(&'static str, f64); 6] {
        [
            ("etasymm", self.etasymm),
            ("deta_ik", self.deta_ik),
            ("formetastarik", self.formetastarik),
            ("dRij", self.d_rij),
            ("boxR", self.box_r),
            ("dstaretaij", self.dstaretaij),
        ]
    }
}

/// `Λ_{ij̄} = g^{β̄α}([φ_{α;i}, φ*_{β̄;j̄}] + [R_{iβ̄}, R_{αj̄}])` built from the
/// pointwise data at the center, with `R_{αj̄} = (R_{jᾱ})^{*h}`.
pub fn lambda_pair(chart: &FamilyChart, i: usize, j: usize) -> Result<FormField> {
    let o = chart.origin();
    let p = chart.point(&o)?;
    let h = p.cfg.metric();
    let n = chart.bundle().n();
    let r = chart.bundle().rank();
    let npts = chart.bundle().geom().npts();
    let (pi_, ri) = (chart.higgs_deriv(&o, i)?, chart.mixed_curv(&o, i)?);
    let (pj, rj) = (chart.higgs_deriv(&o, j)?, chart.mixed_curv(&o, j)?);
    let mut v = FormField::zeros(chart.bundle(), 1, 1)?;
    for alpha in 0..n {
        for beta in 0..n {
            let c = comp_index(n, 1, 1, 1 << alpha, 1 << beta);
            for pt in 0..npts {
                let ps = h.adjoint_at(pj.at(beta, pt), pt, r);
                let rs = h.adjoint_at(rj.at(alpha, pt), pt, r);
                let dst = v.at_mut(c, pt);
                linalg::commutator_acc(pi_.at(alpha, pt), &ps, ONE, dst, r);
                linalg::commutator_acc(ri.at(beta, pt), &rs, ONE, dst, r);
            }
        }
    }
    v.lambda_contract()
}

fn zero_elem(chart: &FamilyChart, f: FormField) -> Result<ComplexElement> {
    ComplexElement::from_parts(chart.bundle(), 0, vec![f])
}

pub fn eta_identity_suite(chart: &FamilyChart) -> Result<EtaIdentities> {
    let m = chart.base_dim();
    let o = chart.origin();
    let p = chart.point(&o)?;
    let h = p.cfg.metric();
    let dol = Dolbeault::new(&p.cfg);
    let etas = chart.etas_at(&o)?;
    let mut out = EtaIdentities::default();
    let mut cov: Vec<Vec<ComplexElement>> = Vec::with_capacity(m);
    for i in 0..m {
        cov.push((0..m).map(|k| chart.eta_cov(&o, i, k)).collect::<Result<_>>()?);
    }
    for i in 0..m {
        for k in 0..m {
            out.etasymm = out.etasymm.max(cov[i][k].minus(&cov[k][i])?.norm(h));
            let mut lhs = dol.d(&cov[i][k])?;
            lhs.axpy(ONE, &bracket_elements(&etas[i], &etas[k])?)?;
            out.deta_ik = out.deta_ik.max(lhs.norm(h));
            out.formetastarik = out.formetastarik.max(dol.d_star(&cov[i][k])?.norm(h));
        }
        for j in 0..m {
            let rij = chart.base_curvature(&o, i, j)?;
            let drij = dol.d0(&rij)?;
            let ebar = chart.eta_bar(&o, i, j)?;
            out.d_rij = out.d_rij.max(ebar.minus(&drij)?.norm(h));
            let ds_ebar = dol.d_star(&ebar)?;
            out.box_r = out.box_r.max(dol.d_star(&drij)?.minus(&ds_ebar)?.norm(h));
            let rhs = zero_elem(chart, lambda_pair(chart, i, j)?)?;
            out.dstaretaij = out.dstaretaij.max(ds_ebar.minus(&rhs)?.norm(h));
        }
    }
    Ok(out)
}

/// The curvature tensor evaluated three ways, flattened as
/// `[((i·m + j)·m + k)·m + l]`.
#[derive(Clone, Debug)]
pub struct CurvatureReport {
    pub m: usize,
    /// Laplacian form: `∫ tr(R_{ij̄} □R_{kl̄} + R_{il̄} □R_{kj̄}) − ⟨G[η_i∧η_k], [η_j∧η_l]⟩`.
    pub r112: Vec<C64>,
    /// Green-operator form built from `Λ_{ij̄}` at the center.
    pub r111: Vec<C64>,
    /// Largest symmetry defect of `r112`.
    pub symmetry: f64,
    /// Smallest eigenvalue of the Gram block `⟨dR_{ij̄}, dR_{kl̄}⟩`.
    pub first_block_min: f64,
    /// Largest eigenvalue of the Green block `−⟨G[η_i∧η_k], [η_j∧η_l]⟩`.
    pub green_block_max: f64,
    pub green_residual: f64,
    pub h0_dim: usize,
    pub h2_dim: usize,
}

impl CurvatureReport {
    pub fn idx(&self, i: usize, j: usize, k: usize, l: usize) -> usize {
        ((i * self.m + j) * self.m + k) * self.m + l
    }
    pub fn at(&self, i: usize, j: usize, k: usize, l: usize) -> C64 {
        self.r112[self.idx(i, j, k, l)]
    }
}

fn max_eig(m: &CMatrix, lowest: bool) -> f64 {
    let k = m.nrows();
    if k == 0 {
        return 0.0;
    }
    let herm = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let (vals, _) = linalg::hermitian_eigen(&flat(&herm), k);
    if lowest {
        vals[0]
    } else {
        vals[k - 1]
    }
}

/// Symmetry defect `max |R_{ij̄kl̄} − R_{kj̄il̄}|, |R_{ij̄kl̄} − R_{il̄kj̄}|,
/// |conj R_{ij̄kl̄} − R_{jīlk̄}|`.
pub fn curvature_symmetry(r: &[C64], m: usize) -> f64 {
    let id = |i: usize, j: usize, k: usize, l: usize| ((i * m + j) * m + k) * m + l;
    let mut s: f64 = 0.0;
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                for l in 0..m {
                    let v = r[id(i, j, k, l)];
                    s = s.max((v - r[id(k, j, i, l)]).norm());
                    s = s.max((v - r[id(i, l, k, j)]).norm());
                    s = s.max((v.conj() - r[id(j, i, l, k)]).norm());
                }
            }
        }
    }
    s
}

pub fn pw_curvature(chart: &FamilyChart, hopts: &HodgeOptions) -> Result<CurvatureReport> {
    let m = chart.base_dim();
    let o = chart.origin();
    let p = chart.point(&o)?;
    let h = p.cfg.metric();
    let dol = Dolbeault::new(&p.cfg);
    let hodge = Hodge::new(&dol, hopts.clone());
    let k0 = hodge.harmonic_space(0)?;
    let k2 = hodge.harmonic_space(2)?;
    let etas = chart.etas_at(&o)?;
    let mut green_residual: f64 = 0.0;

    let mut rb = vec![vec![None; m]; m];
    let mut box_r = vec![vec![None; m]; m];
    let mut drs = Vec::new();
    for i in 0..m {
        for j in 0..m {
            let r = chart.base_curvature(&o, i, j)?;
            let dr = dol.d0(&r)?;
            box_r[i][j] = Some(dol.d_star(&dr)?.parts()[0].clone());
            drs.push(dr);
            rb[i][j] = Some(r);
        }
    }
    let mut brackets = Vec::new();
    for i in 0..m {
        for k in 0..m {
            brackets.push(bracket_elements(&etas[i], &etas[k])?);
        }
    }
    let mut green_b = Vec::new();
    for b in &brackets {
        if b.norm(h) < 1e-300 {
            green_b.push(b.zeros_like());
            continue;
        }
        let (g, stats) = solve_green(&hodge, b, &k2)?;
        green_residual = green_residual.max(stats);
        green_b.push(g);
    }
    let mut lam = vec![vec![None; m]; m];
    let mut green_lam = vec![vec![None; m]; m];
    for i in 0..m {
        for j in 0..m {
            let l = lambda_pair(chart, i, j)?;
            let e = zero_elem(chart, l.clone())?;
            let (g, stats) = if e.norm(h) < 1e-300 { (e.zeros_like(), 0.0) } else { solve_green(&hodge, &e, &k0)? };
            green_residual = green_residual.max(stats);
            green_lam[i][j] = Some(g.parts()[0].clone());
            lam[i][j] = Some(l);
        }
    }
    let get = |v: &Vec<Vec<Option<FormField>>>, a: usize, b: usize| v[a][b].clone().expect("filled");
    let mut r112 = vec![ZERO; m * m * m * m];
    let mut r111 = vec![ZERO; m * m * m * m];
    let mut green_block = CMatrix::zeros(m * m, m * m);
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                for l in 0..m {
                    let t3 = -green_b[i * m + k].inner(&brackets[j * m + l], h)?;
                    green_block[(i * m + k, j * m + l)] = t3;
                    let t1 = integral_tr_product(&get(&rb, i, j), &get(&box_r, k, l))
                        + integral_tr_product(&get(&rb, i, l), &get(&box_r, k, j));
                    let s1 = integral_tr_product(&get(&green_lam, i, j), &get(&lam, k, l))
                        + integral_tr_product(&get(&green_lam, i, l), &get(&lam, k, j));
                    let id = ((i * m + j) * m + k) * m + l;
                    r112[id] = t1 + t3;
                    r111[id] = s1 + t3;
                }
            }
        }
    }
    let first = CMatrix::from_fn(m * m, m * m, |a, b| drs[b].inner(&drs[a], h).unwrap_or(ZERO));
    Ok(CurvatureReport {
        m,
        symmetry: curvature_symmetry(&r112, m),
        r112,
        r111,
        first_block_min: max_eig(&first, true),
        green_block_max: max_eig(&green_block, false),
        green_residual,
        h0_dim: k0.dim(),
        h2_dim: k2.dim(),
    })
}

fn solve_green(hodge: &Hodge, x: &ComplexElement, space: &HarmonicSpace) -> Result<(ComplexElement, f64)> {
    let (g, stats) = hodge.green(x, space)?;
    Ok((g, stats.residual))
}

/// Curvature from the metric alone:
/// `R_{ij̄kl̄} = −∂_k∂_l̄ G_{ij̄} + G^{pq̄} ∂_k G_{iq̄} ∂_l̄ G_{pj̄}`.
pub fn fd_curvature(chart: &FamilyChart) -> Result<Vec<C64>> {
    let m = chart.base_dim();
    let o = chart.origin();
    let g = pw_metric(chart)?;
    let dg = pw_metric_derivative(chart)?;
    let ginv_t = g.transpose().try_inverse().ok_or(LabError::Ineffective(0))?;
    let mut out = vec![ZERO; m * m * m * m];
    for k in 0..m {
        for l in 0..m {
            let ddg = chart.fd(&o, k, false, |q| chart.fd(q, l, true, |q2| Ok(flat(&pw_metric_at(chart, q2)?))))?;
            for i in 0..m {
                for j in 0..m {
                    let mut v = -ddg[i * m + j];
                    for pp in 0..m {
                        for qq in 0..m {
                            // ∂_l̄ G_{pj̄} = conj(∂_l G_{jp̄})
                            v += ginv_t[(pp, qq)] * dg[k][(i, qq)] * dg[l][(j, pp)].conj();
                        }
                    }
                    out[((i * m + j) * m + k) * m + l] = v;
                }
            }
        }
    }
    Ok(out)
}

/// Relative discrepancy `max |a − b| / scale`.
pub fn relative_discrepancy(a: &[C64], b: &[C64], scale: f64) -> f64 {
    let d = a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
    d / scale.max(f64::MIN_POSITIVE)
}

/// Holomorphic sectional curvature along `v` by two paths: contraction of
/// the assembled tensor, and `2‖dR_{vv̄}‖² − ⟨G[η_v∧η_v], [η_v∧η_v]⟩` (one
/// complex dimension).
pub fn holomorphic_sectional(chart: &FamilyChart, curv: &CurvatureReport, v: &[C64], hopts: &HodgeOptions) -> Result<(f64, f64)> {
    let m = chart.base_dim();
    if chart.bundle().n() != 1 {
        return Err(LabError::Shape("holomorphic sectional curvature formula needs n = 1".into()));
    }
    let o = chart.origin();
    let g = pw_metric(chart)?;
    let mut gvv = ZERO;
    for i in 0..m {
        for j in 0..m {
            gvv += v[i] * v[j].conj() * g[(i, j)];
        }
    }
    if gvv.re < 1e-10 {
        return Err(LabError::Ineffective(0));
    }
    let mut rv = ZERO;
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                for l in 0..m {
                    rv += curv.at(i, j, k, l) * v[i] * v[j].conj() * v[k] * v[l].conj();
                }
            }
        }
    }
    let p = chart.point(&o)?;
    let h = p.cfg.metric();
    let dol = Dolbeault::new(&p.cfg);
    let mut rvv = FormField::zeros(chart.bundle(), 0, 0)?;
    let etas = chart.etas_at(&o)?;
    let mut ev = etas[0].zeros_like();
    for i in 0..m {
        ev.axpy(v[i], &etas[i])?;
        for j in 0..m {
            rvv.axpy(v[i] * v[j].conj(), &chart.base_curvature(&o, i, j)?)?;
        }
    }
    let dr = dol.d0(&rvv)?;
    let b = bracket_elements(&ev, &ev)?;
    let mut second = 2.0 * dr.inner(&dr, h)?.re;
    if b.norm(h) > 1e-300 {
        let hodge = Hodge::new(&dol, hopts.clone());
        let k2 = hodge.harmonic_space(2)?;
        let (gb, _) = hodge.green(&b, &k2)?;
        second -= gb.inner(&b, h)?.re;
    }
    let g2 = gvv.re * gvv.re;
    Ok((rv.re / g2, second / g2))
}

/// `π_{ik}` and `ν_i` at a stencil offset.
pub fn sigma_at(chart: &FamilyChart, k: &[i64]) -> Result<(CMatrix, Vec<C64>)> {
    let m = chart.base_dim();
    let p = chart.point(k)?;
    let phis: Vec<FormField> = (0..m).map(|i| chart.higgs_deriv(k, i)).collect::<Result<_>>()?;
    let rs: Vec<FormField> = (0..m).map(|i| chart.mixed_curv(k, i)).collect::<Result<_>>()?;
    let pi = CMatrix::from_fn(m, m, |i, kk| contract_tr(&phis[i], &rs[kk]) - contract_tr(&phis[kk], &rs[i]));
    let nu = (0..m).map(|i| C64::new(2.0, 0.0) * contract_tr(p.cfg.phi(), &rs[i])).collect();
    Ok((pi, nu))
}

#[derive(Clone, Debug)]
pub struct SigmaReport {
    pub pi: CMatrix,
    pub nu: Vec<C64>,
    /// `max |π_{ik} + π_{ki}|`
    pub antisymmetry: f64,
    /// Least-squares `c` in `∂_i ν_k − ∂_k ν_i = c π_{ik}`, absent if `π = 0`.
    pub c: Option<f64>,
    pub dnu_residual: f64,
    /// `max |∂_l̄ ν_i|`, `max |∂_l̄ π_{ik}|`
    pub nu_dbar: f64,
    pub pi_dbar: f64,
}

pub fn sigma_forms(chart: &FamilyChart) -> Result<SigmaReport> {
    let m = chart.base_dim();
    let o = chart.origin();
    let (pi, nu) = sigma_at(chart, &o)?;
    let mut antisymmetry: f64 = 0.0;
    for i in 0..m {
        for k in 0..m {
            antisymmetry = antisymmetry.max((pi[(i, k)] + pi[(k, i)]).norm());
        }
    }
    let dnu: Vec<Vec<C64>> = (0..m).map(|i| chart.fd(&o, i, false, |q| Ok(sigma_at(chart, q)?.1))).collect::<Result<_>>()?;
    let mut num = ZERO;
    let mut den = 0.0;
    for i in 0..m {
        for k in 0..m {
            let curl = dnu[i][k] - dnu[k][i];
            num += pi[(i, k)].conj() * curl;
            den += pi[(i, k)].norm_sqr();
        }
    }
    let c = if den > 1e-20 { Some((num / den).re) } else { None };
    let cc = c.unwrap_or(0.0);
    let mut dnu_residual: f64 = 0.0;
    for i in 0..m {
        for k in 0..m {
            dnu_residual = dnu_residual.max((dnu[i][k] - dnu[k][i] - pi[(i, k)] * cc).norm());
        }
    }
    let mut nu_dbar: f64 = 0.0;
    let mut pi_dbar: f64 = 0.0;
    for l in 0..m {
        let d = chart.fd(&o, l, true, |q| {
            let (p, n) = sigma_at(chart, q)?;
            let mut v = flat(&p);
            v.extend(n);
            Ok(v)
        })?;
        for (idx, x) in d.iter().enumerate() {
            if idx < m * m {
                pi_dbar = pi_dbar.max(x.norm());
            } else {
                nu_dbar = nu_dbar.max(x.norm());
            }
        }
    }
    Ok(SigmaReport { pi, nu, antisymmetry, c, dnu_residual, nu_dbar, pi_dbar })
}

/// `χ = ∫ g^{β̄α} tr(φ_α φ*_β̄) g dV`.
pub fn chi_value(cfg: &GaugeConfig) -> f64 {
    contract_tr(cfg.phi(), &cfg.phi_star()).re
}

/// Chern forms of `(E, h)`: `c₁ = tr(√−1/2π Ω)` by `(1,1)` component and
/// `ch₂ = ½ tr((√−1/2π Ω)∧(√−1/2π Ω))` by `(2,2)` component (empty for
/// `n = 1`), each a scalar grid function.
#[derive(Clone, Debug)]
pub struct ChernForms {
    pub c1: Vec<Vec<C64>>,
    pub ch2: Vec<Vec<C64>>,
    /// `∫ Λ c₁ g dV`, which equals `(√−1/2π) r λ Vol`.
    pub c1_lambda_integral: C64,
}

pub fn chern_forms(cfg: &GaugeConfig) -> Result<ChernForms> {
    let omega = cfg.curvature();
    let a = I / (2.0 * std::f64::consts::PI);
    let c1: Vec<Vec<C64>> = (0..omega.ncomps()).map(|c| omega.trace(c).into_iter().map(|v| a * v).collect()).collect();
    let ch2 = match omega.wedge_mul(&omega) {
        Ok(w) => (0..w.ncomps()).map(|c| w.trace(c).into_iter().map(|v| 0.5 * a * a * v).collect()).collect(),
        Err(_) => Vec::new(),
    };
    let lc = omega.lambda_contract()?;
    Ok(ChernForms { c1, ch2, c1_lambda_integral: a * lc.integral_trace(0) })
}

/// The three fiber integrals as coefficient matrices of `√−1 ds^i∧ds^j̄`.
#[derive(Clone, Debug)]
pub struct FiberIntegral {
    /// `∫ g^{β̄α} tr(R_{αj̄} R_{iβ̄} − R_{αβ̄} R_{ij̄}) g dV`
    pub curvature_term: CMatrix,
    /// `λ ∫ tr R_{ij̄} g dV`
    pub lambda_term: CMatrix,
    /// `∂_i ∂_j̄ χ`
    pub higgs_term: CMatrix,
    pub total: CMatrix,
}

pub fn fiber_integral_form(chart: &FamilyChart) -> Result<FiberIntegral> {
    let m = chart.base_dim();
    let n = chart.bundle().n();
    let o = chart.origin();
    let p = chart.point(&o)?;
    let lambda = p.report.lambda;
    let curv = p.cfg.curvature();
    let mut t1 = CMatrix::zeros(m, m);
    let mut t2 = CMatrix::zeros(m, m);
    let mut t3 = CMatrix::zeros(m, m);
    let mixed: Vec<FormField> = (0..m).map(|i| chart.mixed_curv(&o, i)).collect::<Result<_>>()?;
    let geom = chart.bundle().geom();
    for i in 0..m {
        for j in 0..m {
            let raj = chart.fiber_mixed(&o, j)?;
            let rij = chart.base_curvature(&o, i, j)?;
            let mut v = contract_tr(&raj, &mixed[i]);
            for alpha in 0..n {
                for beta in 0..n {
                    let g = geom.metric_inv(beta, alpha);
                    let c = comp_index(n, 1, 1, 1 << alpha, 1 << beta);
                    let comp = FormField::from_scalar(chart.bundle(), 0, 0, 0, &linalg::identity(chart.bundle().rank()), |_| ONE)?
                        .map_points(|_, pt, _| curv.at(c, pt).to_vec());
                    v -= g * integral_tr_product(&comp, &rij);
                }
            }
            t1[(i, j)] = v;
            t2[(i, j)] = C64::new(lambda, 0.0) * rij.integral_trace(0);
            t3[(i, j)] = chart.fd(&o, i, false, |q| chart.fd(q, j, true, |q2| Ok(C64::new(chi_value(&chart.point(q2)?.cfg), 0.0))))?;
        }
    }
    let total = &t1 + &t2 + &t3;
    Ok(FiberIntegral { curvature_term: t1, lambda_term: t2, higgs_term: t3, total })
}

/// Offsets needed for `depth` nested base derivatives around the center.
pub fn stencil_depth(chart: &FamilyChart, depth: usize) -> Vec<Offset> {
    chart.reach(&[chart.origin()], depth).into_iter().collect()
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::family::{FamilyGenerator, FamilyOptions, FieldKind, GeneratorTerm};
    use crate::form::Bundle;
    use crate::geometry::TorusGeometry;

    pub(crate) fn rank2_normal(grid: usize) -> FamilyChart {
        rank2_normal_eps(grid, 1e-2)
    }

    pub(crate) fn rank2_normal_eps(grid: usize, eps: f64) -> FamilyChart {
        let b = Bundle::trivial(TorusGeometry::unit_curve(grid), 2);
        let d = vec![ONE, ZERO, ZERO, -ONE];
        let half: Vec<C64> = d.iter().map(|v| v * 0.5).collect();
        let terms = vec![
            GeneratorTerm { field: FieldKind::Connection, direction: 0, monomial: vec![1, 0], coefficient: d.clone(), mode: Some(vec![1, 0]) },
            GeneratorTerm { field: FieldKind::Connection, direction: 0, monomial: vec![0, 1], coefficient: half.clone(), mode: None },
            GeneratorTerm { field: FieldKind::Higgs, direction: 0, monomial: vec![0, 1], coefficient: d, mode: None },
            GeneratorTerm { field: FieldKind::Higgs, direction: 0, monomial: vec![1, 1], coefficient: half, mode: None },
        ];
        let gen = FamilyGenerator::new(&b, 2, terms).unwrap();
        FamilyChart::new(gen, vec![C64::new(0.05, 0.02), C64::new(0.2, -0.1)], FamilyOptions { eps, ..FamilyOptions::default() }).unwrap()
    }

    #[test]
    fn tstar_jacobian_oracle() {
        let chart = crate::family::tests::tstar_jacobian(8);
        chart.prefetch(3).unwrap();
        let g = pw_metric(&chart).unwrap();
        assert!((g[(0, 0)] - ONE).norm() < 1e-9 && (g[(1, 1)] - ONE).norm() < 1e-9 && g[(0, 1)].norm() < 1e-9);
        let kc = pw_kahler_check(&chart).unwrap();
        assert!(kc.fd_vs_formula < 1e-8 && kc.symmetry < 1e-8 && kc.orthogonality < 1e-8, "{kc:?}");
        let curv = pw_curvature(&chart, &HodgeOptions::default()).unwrap();
        assert!(curv.r112.iter().all(|v| v.norm() < 1e-8));
        let fd = fd_curvature(&chart).unwrap();
        assert!(fd.iter().all(|v| v.norm() < 1e-6), "{fd:?}");
        let s = sigma_forms(&chart).unwrap();
        assert!((s.pi[(0, 1)] + ONE).norm() < 1e-9, "{:?}", s.pi);
        assert!((s.c.unwrap() - 2.0).abs() < 1e-6);
        let fi = fiber_integral_form(&chart).unwrap();
        assert!((&fi.total - &g).iter().all(|v| v.norm() < 1e-6), "{fi:?}");
        let ids = eta_identity_suite(&chart).unwrap();
        for (name, v) in ids.rows() {
            assert!(v < 1e-8, "{name} {v}");
        }
    }

    #[test]
    fn rank_two_normal_family() {
        let chart = rank2_normal(16);
        chart.prefetch(3).unwrap();
        let g = pw_metric(&chart).unwrap();
        assert!(ineffective_directions(&g).is_empty(), "{g}");
        assert!((&g - g.adjoint()).iter().all(|v| v.norm() < 1e-10));
        let kc = pw_kahler_check(&chart).unwrap();
        assert!(kc.fd_vs_formula < 1e-6 && kc.symmetry < 1e-6 && kc.orthogonality < 1e-8, "{kc:?}");
        let ids = eta_identity_suite(&chart).unwrap();
        for (name, v) in ids.rows() {
            assert!(v < 1e-6, "{name} {v}");
        }
        let curv = pw_curvature(&chart, &HodgeOptions::default()).unwrap();
        let fd = fd_curvature(&chart).unwrap();
        let scale = g.iter().map(|v| v.norm()).fold(1e-300, f64::max);
        assert!(relative_discrepancy(&curv.r112, &fd, scale) < 1e-4, "{:?} {:?}", curv.r112, fd);
        assert!(relative_discrepancy(&curv.r112, &curv.r111, scale) < 1e-6);
        let s = sigma_forms(&chart).unwrap();
        assert!(s.antisymmetry < 1e-10 && s.dnu_residual < 1e-6, "{s:?}");
        let fi = fiber_integral_form(&chart).unwrap();
        assert!((&fi.total - &g).iter().all(|v| v.norm() < 1e-5), "{fi:?}");
    }
}

