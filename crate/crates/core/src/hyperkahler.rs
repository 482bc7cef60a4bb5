//! The involution `ι(a, b) = (−b*, a*)` on degree-one elements, the field
//! `ξ`, the hypotheses under which `ι` preserves harmonic forms, and the
//! quaternionic structure it induces on a family's tangent space.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::complex::{canonical_h2_class, ComplexElement, Dolbeault};
use crate::error::{LabError, Result};
use crate::family::FamilyChart;
use crate::form::{comp_index, FiberMetric, FormField};
use crate::gauge::GaugeConfig;
use crate::geometry::{C64, I};
use crate::hodge::{Hodge, HodgeOptions};
use crate::linalg::{self, ONE, ZERO};
use crate::pw::{self, CMatrix};

/// `ι(a, b) = (−b*, a*)`.
pub fn iota(x: &ComplexElement, h: &FiberMetric) -> Result<ComplexElement> {
    if x.degree() != 1 {
        return Err(LabError::UnsupportedDegree(x.degree()));
    }
    let a = &x.parts()[0];
    let b = &x.parts()[1];
    ComplexElement::from_parts(x.bundle(), 1, vec![b.star(h).scaled(-ONE), a.star(h)])
}

/// `φ_{α;γ} dz^α ∧ dz^γ` for the fiber Chern connection; zero for `n = 1`.
pub fn higgs_covariant_two_form(cfg: &GaugeConfig) -> Result<FormField> {
    let n = cfg.n();
    let r = cfg.rank();
    let mut out = FormField::zeros(cfg.bundle(), 2, 0).or_else(|_| FormField::zeros(cfg.bundle(), 0, 0))?;
    if n < 2 {
        return Ok(out);
    }
    let theta = cfg.theta();
    let phi = cfg.phi();
    let npts = cfg.bundle().geom().npts();
    // cov[α][γ] = φ_{α;γ} = ∂_γ φ_α + [θ_γ, φ_α]
    let mut cov = vec![vec![Vec::new(); n]; n];
    for gamma in 0..n {
        let d = phi.derivative(gamma, false)?;
        for alpha in 0..n {
            let mut c = d.comp(alpha).to_vec();
            for pt in 0..npts {
                linalg::commutator_acc(theta.at(gamma, pt), phi.at(alpha, pt), ONE, &mut c[pt * r * r..(pt + 1) * r * r], r);
            }
            cov[alpha][gamma] = c;
        }
    }
    for alpha in 0..n {
        for gamma in alpha + 1..n {
            let c = comp_index(n, 2, 0, (1 << alpha) | (1 << gamma), 0);
            for ((d, x), y) in out.comp_mut(c).iter_mut().zip(&cov[alpha][gamma]).zip(&cov[gamma][alpha]) {
                *d = x - y;
            }
        }
    }
    Ok(out)
}

/// `R_{αβ̄} + [φ_α, φ*_β̄]` as a `(1,1)`-form.
pub fn twisted_curvature(cfg: &GaugeConfig) -> Result<FormField> {
    cfg.curvature().plus(&cfg.phi().bracket(&cfg.phi_star())?)
}

/// `ξ = (φ_{α;γ} dz^α∧dz^γ, (R_{αβ̄} + [φ_α, φ*_β̄]) dz^α∧dz^β̄, −φ*_{β̄;δ̄} dz^β̄∧dz^δ̄)`.
pub fn xi_field(cfg: &GaugeConfig) -> Result<ComplexElement> {
    let v = twisted_curvature(cfg)?;
    if cfg.n() < 2 {
        return ComplexElement::from_parts(cfg.bundle(), 2, vec![v]);
    }
    let u = higgs_covariant_two_form(cfg)?;
    let w = u.star(cfg.metric()).scaled(-ONE);
    ComplexElement::from_parts(cfg.bundle(), 2, vec![u, v, w])
}

/// `‖dx‖`, zero in the top degree where `d` vanishes.
fn d_norm(dol: &Dolbeault, x: &ComplexElement, h: &FiberMetric) -> Result<f64> {
    if x.degree() >= 2 * x.bundle().n() {
        return Ok(0.0);
    }
    Ok(dol.d(x)?.norm(h))
}

#[derive(Clone, Debug)]
pub struct AssumptionReport {
    /// `sup |R + [φ, φ*] − c g id|` with `c` fitted by least squares.
    pub proj_flat_residual: f64,
    pub proj_flat_constant: C64,
    /// `sup |φ_{α;γ} − φ_{γ;α}|`
    pub dbar_theta_sym_residual: f64,
    pub h2_dim_estimate: usize,
    pub h2_gap_ratio: f64,
    pub h2_ritz: Vec<f64>,
    /// `‖Hε‖ / ‖ε‖` for the canonical class.
    pub canonical_captured: f64,
    /// `‖dε‖ + ‖d*ε‖`
    pub canonical_closed: f64,
    pub h2_tracefree_dim: usize,
}

impl AssumptionReport {
    /// Assumption B: the degree-two kernel is exactly the canonical line and
    /// the estimate is separated by a gap of at least 100.
    pub fn b_holds(&self) -> bool {
        self.h2_dim_estimate == 1 && self.h2_gap_ratio >= 100.0 && self.canonical_captured > 1.0 - 1e-6
    }
    pub fn b_prime_holds(&self) -> bool {
        self.h2_tracefree_dim == 0 && self.h2_gap_ratio >= 100.0
    }
}

pub fn check_assumptions(cfg: &GaugeConfig, hopts: &HodgeOptions) -> Result<AssumptionReport> {
    let h = cfg.metric();
    let n = cfg.n();
    let r = cfg.rank();
    let geom = cfg.bundle().geom();
    let v = twisted_curvature(cfg)?;
    // least-squares constant c with v ≈ c g id
    let mut num = ZERO;
    let mut den = 0.0;
    for alpha in 0..n {
        for beta in 0..n {
            let g = geom.metric(alpha, beta);
            let c = comp_index(n, 1, 1, 1 << alpha, 1 << beta);
            for pt in 0..geom.npts() {
                num += g.conj() * linalg::trace(v.at(c, pt), r);
                den += g.norm_sqr() * r as f64;
            }
        }
    }
    let lam = if den > 0.0 { num / den } else { ZERO };
    let mut flat_res: f64 = 0.0;
    for alpha in 0..n {
        for beta in 0..n {
            let g = geom.metric(alpha, beta) * lam;
            let c = comp_index(n, 1, 1, 1 << alpha, 1 << beta);
            for pt in 0..geom.npts() {
                let m = v.at(c, pt);
                for a in 0..r {
                    for b in 0..r {
                        let target = if a == b { g } else { ZERO };
                        flat_res = flat_res.max((m[a * r + b] - target).norm());
                    }
                }
            }
        }
    }
    let sym = if n < 2 { 0.0 } else { higgs_covariant_two_form(cfg)?.sup_norm() };

    let dol = Dolbeault::new(cfg);
    let hodge = Hodge::new(&dol, hopts.clone());
    let k2 = hodge.harmonic_space(2)?;
    let eps = canonical_h2_class(cfg.bundle());
    let captured = hodge.project(&eps, &k2)?.norm(h) / eps.norm(h);
    let canonical_closed = d_norm(&dol, &eps, h)? + dol.d_star(&eps)?.norm(h);
    // rank of the trace-free parts of the kernel basis
    let tf: Vec<ComplexElement> = k2.basis.iter().map(|b| b.trace_free_split().0).collect();
    let k = tf.len();
    let gram: Vec<C64> = (0..k).flat_map(|i| (0..k).map(move |j| (i, j))).map(|(i, j)| tf[j].inner(&tf[i], h).unwrap_or(ZERO)).collect();
    let tf_dim = if k == 0 { 0 } else { linalg::hermitian_eigen(&gram, k).0.iter().filter(|&&s| s > 1e-6).count() };
    Ok(AssumptionReport {
        proj_flat_residual: flat_res,
        proj_flat_constant: lam,
        dbar_theta_sym_residual: sym,
        h2_dim_estimate: k2.dim(),
        h2_gap_ratio: k2.gap_ratio,
        h2_ritz: k2.ritz.iter().take(k2.dim() + 3).copied().collect(),
        canonical_captured: captured,
        canonical_closed,
        h2_tracefree_dim: tf_dim,
    })
}

/// Norms of `dξ` and `d*ξ`, and the split of the harmonic part of `ξ`
/// into its `ε` component `c` and the remainder.
#[derive(Clone, Debug)]
pub struct XiReport {
    pub d_xi: f64,
    pub d_star_xi: f64,
    pub epsilon_coefficient: C64,
    pub off_epsilon: f64,
}

fn xi_report_for(cfg: &GaugeConfig, hopts: &HodgeOptions) -> Result<XiReport> {
    let h = cfg.metric();
    let dol = Dolbeault::new(cfg);
    let xi = xi_field(cfg)?;
    let d_xi = d_norm(&dol, &xi, h)?;
    let d_star_xi = dol.d_star(&xi)?.norm(h);
    let hodge = Hodge::new(&dol, hopts.clone());
    let k2 = hodge.harmonic_space(2)?;
    let hx = hodge.project(&xi, &k2)?;
    let eps = canonical_h2_class(cfg.bundle());
    let c = hx.inner(&eps, h)? / eps.inner(&eps, h)?;
    let mut rest = hx.clone();
    rest.axpy(-c, &eps)?;
    Ok(XiReport { d_xi, d_star_xi, epsilon_coefficient: c, off_epsilon: rest.norm(h) })
}

/// Claims 3 and 4 at the center of the chart.
pub fn xi_report(chart: &FamilyChart, hopts: &HodgeOptions) -> Result<XiReport> {
    xi_report_for(&chart.point(&chart.origin())?.cfg, hopts)
}

/// Claims 1 and 2 for each basis vector: `‖d(ιη_i) − ∂_ī ξ‖` and `‖d*(ιη_i)‖`,
/// together with `‖d(ιη_i)‖`.
#[derive(Clone, Debug)]
pub struct IotaHarmonic {
    pub claim1: Vec<f64>,
    pub claim2: Vec<f64>,
    pub d_iota: Vec<f64>,
    /// `max |‖ιη_i‖ − ‖η_i‖|`
    pub isometry: f64,
    /// `max ‖ι²η_i + η_i‖`
    pub involution: f64,
}

pub fn iota_preserves_harmonic(chart: &FamilyChart) -> Result<IotaHarmonic> {
    let o = chart.origin();
    let p = chart.point(&o)?;
    let h = p.cfg.metric();
    let dol = Dolbeault::new(&p.cfg);
    let mut out = IotaHarmonic { claim1: vec![], claim2: vec![], d_iota: vec![], isometry: 0.0, involution: 0.0 };
    for (i, eta) in chart.etas_at(&o)?.iter().enumerate() {
        let ie = iota(eta, h)?;
        let d = dol.d(&ie)?;
        let dxi = chart.fd(&o, i, true, |q| xi_field(&chart.point(q)?.cfg))?;
        out.claim1.push(d.minus(&dxi)?.norm(h));
        out.d_iota.push(d.norm(h));
        out.claim2.push(dol.d_star(&ie)?.norm(h));
        out.isometry = out.isometry.max((ie.norm(h) - eta.norm(h)).abs());
        out.involution = out.involution.max(iota(&ie, h)?.plus(eta)?.sup_norm());
    }
    Ok(out)
}

/// Claims 2-4 and the assumption-A residual after replacing the metric by
/// `L exp(δP) L†` for a fixed seeded hermitian `P`.
#[derive(Clone, Debug)]
pub struct PerturbationSample {
    pub delta: f64,
    pub assumption_a: f64,
    pub claim2: f64,
    pub claim3: f64,
    pub claim4: f64,
}

pub fn perturbed_claims(chart: &FamilyChart, deltas: &[f64], seed: u64) -> Result<Vec<PerturbationSample>> {
    let o = chart.origin();
    let p = chart.point(&o)?;
    let cfg = &p.cfg;
    let bundle = cfg.bundle();
    let r = cfg.rank();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw = FormField::random(bundle, 0, 0, 1, &mut rng)?;
    let pert = raw.map_points(|_, _, m| {
        let d = linalg::dagger(m, r);
        m.iter().zip(&d).map(|(a, b)| (a + b) * 0.5).collect()
    });
    let etas = chart.etas_at(&o)?;
    let h0 = cfg.metric().h();
    let mut out = Vec::new();
    for &delta in deltas {
        let hnew = h0.map_points(|_, pt, m| {
            let l = linalg::cholesky(m, r).expect("metric is positive");
            let e = linalg::hermitian_function(pert.at(0, pt), r, |x| (delta * x).exp());
            linalg::mul(&linalg::mul(&l, &e, r), &linalg::dagger(&l, r), r)
        });
        let pc = cfg.with_metric(FiberMetric::new(hnew)?);
        let hm = pc.metric();
        let dol = Dolbeault::new(&pc);
        let xi = xi_field(&pc)?;
        let mut claim2: f64 = 0.0;
        for eta in &etas {
            claim2 = claim2.max(dol.d_star(&iota(eta, hm)?)?.norm(hm));
        }
        let a = {
            let v = twisted_curvature(&pc)?;
            let base = twisted_curvature(cfg)?;
            v.minus(&base)?.sup_norm()
        };
        out.push(PerturbationSample {
            delta,
            assumption_a: a,
            claim2,
            claim3: d_norm(&dol, &xi, hm)?,
            claim4: dol.d_star(&xi)?.norm(hm),
        });
    }
    Ok(out)
}

/// Real `2m × 2m` matrices of `I`, `J`, `K` on the basis
/// `{η_1..η_m, √−1 η_1..√−1 η_m}` and their defects.
#[derive(Clone, Debug)]
pub struct QuaternionReport {
    pub i: DMatrix<f64>,
    pub j: DMatrix<f64>,
    pub k: DMatrix<f64>,
    /// `max ‖ι(e) − Σ c e‖ / ‖e‖`: how far `ι` leaves the span of the basis.
    pub projection_residual: f64,
    /// Largest entry defect over `I²+1, J²+1, K²+1, IJ−K, JI+K`.
    pub relations: f64,
}

fn coefficients(target: &ComplexElement, basis: &[ComplexElement], gram_inv: &CMatrix, h: &FiberMetric) -> Result<(Vec<C64>, f64)> {
    let m = basis.len();
    let rhs: Vec<C64> = basis.iter().map(|b| target.inner(b, h)).collect::<Result<_>>()?;
    // target = Σ c_l b_l  ⇒  ⟨target, b_j⟩ = Σ_l c_l G_{lj}
    let c: Vec<C64> = (0..m).map(|l| (0..m).map(|j| rhs[j] * gram_inv[(j, l)]).sum()).collect();
    let mut rest = target.clone();
    for (cl, b) in c.iter().zip(basis) {
        rest.axpy(-*cl, b)?;
    }
    let nrm = target.norm(h).max(f64::MIN_POSITIVE);
    Ok((c, rest.norm(h) / nrm))
}

pub fn quaternion_suite(chart: &FamilyChart) -> Result<QuaternionReport> {
    let o = chart.origin();
    let p = chart.point(&o)?;
    let h = p.cfg.metric();
    let etas = chart.etas_at(&o)?;
    let m = etas.len();
    let g = pw::pw_metric(chart)?;
    let gram_inv = g.try_inverse().ok_or(LabError::Ineffective(0))?;
    let basis: Vec<ComplexElement> = etas.iter().cloned().chain(etas.iter().map(|e| e.scaled(I))).collect();
    let mut worst: f64 = 0.0;
    let mut matrix = |op: &dyn Fn(&ComplexElement) -> Result<ComplexElement>| -> Result<DMatrix<f64>> {
        let mut mat = DMatrix::zeros(2 * m, 2 * m);
        for (col, e) in basis.iter().enumerate() {
            let (c, res) = coefficients(&op(e)?, &etas, &gram_inv, h)?;
            worst = worst.max(res);
            for l in 0..m {
                mat[(l, col)] = c[l].re;
                mat[(m + l, col)] = c[l].im;
            }
        }
        Ok(mat)
    };
    let mi = matrix(&|e| Ok(e.scaled(I)))?;
    let mj = matrix(&|e| iota(e, h))?;
    let mk = matrix(&|e| Ok(iota(e, h)?.scaled(I)))?;
    let id = DMatrix::<f64>::identity(2 * m, 2 * m);
    let defects = [&mi * &mi + &id, &mj * &mj + &id, &mk * &mk + &id, &mi * &mj - &mk, &mj * &mi + &mk];
    let relations = defects.iter().map(|d| d.amax()).fold(0.0, f64::max);
    Ok(QuaternionReport { i: mi, j: mj, k: mk, projection_residual: worst, relations })
}

/// `π_{ik} = ⟨η_k, ι(η_i)⟩`.
pub fn pi_from_iota(chart: &FamilyChart) -> Result<CMatrix> {
    let o = chart.origin();
    let p = chart.point(&o)?;
    let h = p.cfg.metric();
    let etas = chart.etas_at(&o)?;
    let m = etas.len();
    let ie: Vec<ComplexElement> = etas.iter().map(|e| iota(e, h)).collect::<Result<_>>()?;
    let mut out = CMatrix::zeros(m, m);
    for i in 0..m {
        for k in 0..m {
            out[(i, k)] = etas[k].inner(&ie[i], h)?;
        }
    }
    Ok(out)
}

/// The three 2-forms as coefficient matrices: `ω_I = G`, `ω_J = Re π̄`,
/// `ω_K = Im π̄`, with closedness defects and the non-degeneracy of `π`.
#[derive(Clone, Debug)]
pub struct HyperkahlerForms {
    pub omega_i: CMatrix,
    pub omega_j: DMatrix<f64>,
    pub omega_k: DMatrix<f64>,
    /// `max |∂_k G_{ij̄} − ∂_i G_{kj̄}|`
    pub closed_i: f64,
    /// `max |∂_l̄ π_{ik}|` and the cyclic sum `max |∂_l π_{ik} + ∂_i π_{kl} + ∂_k π_{li}|`
    pub closed_jk: f64,
    pub pi_min_singular: f64,
    pub pi_nondegenerate: bool,
    pub even_dimension: bool,
}

pub fn hyperkahler_forms(chart: &FamilyChart, sigma: &pw::SigmaReport, kahler: &pw::KahlerCheck) -> Result<HyperkahlerForms> {
    let m = chart.base_dim();
    let o = chart.origin();
    let g = pw::pw_metric(chart)?;
    let pibar = sigma.pi.map(|z| z.conj());
    let dpi: Vec<CMatrix> = (0..m)
        .map(|l| {
            let v = chart.fd(&o, l, false, |q| Ok(pw::sigma_at(chart, q)?.0.iter().copied().collect::<Vec<C64>>()))?;
            Ok(CMatrix::from_column_slice(m, m, &v))
        })
        .collect::<Result<_>>()?;
    let mut cyclic: f64 = 0.0;
    for i in 0..m {
        for k in 0..m {
            for l in 0..m {
                cyclic = cyclic.max((dpi[l][(i, k)] + dpi[i][(k, l)] + dpi[k][(l, i)]).norm());
            }
        }
    }
    let sv = sigma.pi.clone().singular_values();
    let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let nondeg = m > 0 && smin > 1e-8 * smax.max(1e-300) && smax > 1e-10;
    Ok(HyperkahlerForms {
        omega_i: g,
        omega_j: pibar.map(|z| z.re),
        omega_k: pibar.map(|z| z.im),
        closed_i: kahler.symmetry,
        closed_jk: cyclic.max(sigma.pi_dbar),
        pi_min_singular: if m == 0 { 0.0 } else { smin },
        pi_nondegenerate: nondeg,
        even_dimension: m.is_multiple_of(2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::tests::tstar_jacobian;

    #[test]
    fn iota_squares_to_minus_identity() {
        let chart = tstar_jacobian(8);
        chart.prefetch(1).unwrap();
        let ih = iota_preserves_harmonic(&chart).unwrap();
        assert_eq!(ih.involution, 0.0);
        assert!(ih.isometry < 1e-12);
        assert!(ih.claim1.iter().chain(&ih.claim2).all(|&v| v < 1e-8), "{ih:?}");
    }

    #[test]
    fn tstar_jacobian_quaternions_and_pi() {
        let chart = tstar_jacobian(8);
        chart.prefetch(2).unwrap();
        let q = quaternion_suite(&chart).unwrap();
        assert!(q.relations < 1e-12 && q.projection_residual < 1e-12, "{q:?}");
        let s = pw::sigma_forms(&chart).unwrap();
        let p2 = pi_from_iota(&chart).unwrap();
        assert!((&p2 - &s.pi).iter().all(|v| v.norm() < 1e-9), "{p2} {}", s.pi);
        let kc = pw::pw_kahler_check(&chart).unwrap();
        let f = hyperkahler_forms(&chart, &s, &kc).unwrap();
        assert!(f.pi_nondegenerate && f.closed_jk < 1e-8);
        let a = check_assumptions(&chart.point(&chart.origin()).unwrap().cfg, &HodgeOptions::default()).unwrap();
        assert!(a.proj_flat_residual < 1e-10 && a.b_holds(), "{a:?}");
        let x = xi_report(&chart, &HodgeOptions::default()).unwrap();
        assert!(x.d_xi < 1e-10 && x.d_star_xi < 1e-10 && x.off_epsilon < 1e-10, "{x:?}");
    }

    #[test]
    fn rank_two_normal_family_claims() {
        let chart = crate::pw::tests::rank2_normal(16);
        chart.prefetch(2).unwrap();
        let ih = iota_preserves_harmonic(&chart).unwrap();
        assert!(ih.claim1.iter().chain(&ih.claim2).all(|&v| v < 1e-7), "{ih:?}");
        let q = quaternion_suite(&chart).unwrap();
        assert!(q.relations < 1e-9 && q.projection_residual < 1e-7, "{q:?}");
        let s = pw::sigma_forms(&chart).unwrap();
        let p2 = pi_from_iota(&chart).unwrap();
        assert!((&p2 - &s.pi).iter().all(|v| v.norm() < 1e-9), "{p2} {}", s.pi);
        let cfg = &chart.point(&chart.origin()).unwrap().cfg;
        let a = check_assumptions(cfg, &HodgeOptions::default()).unwrap();
        // polystable but not stable: the commuting σ₃ adds a second class
        assert_eq!((a.h2_dim_estimate, a.h2_tracefree_dim), (2, 1));
        assert!(a.proj_flat_residual < 1e-10 && a.canonical_captured > 1.0 - 1e-9);
        let s = perturbed_claims(&chart, &[1e-3, 1e-4], 7).unwrap();
        let ratio = s[0].claim4 / s[1].claim4;
        assert!((8.0..12.0).contains(&ratio), "{s:?}");
        assert!(s.iter().all(|x| x.claim4 < 10.0 * x.assumption_a), "{s:?}");
    }
}
