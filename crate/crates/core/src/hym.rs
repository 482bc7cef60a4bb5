//! Hermitian-Yang-Mills metrics for Higgs pairs.
//!
//! The equation is `g^{β̄α}(R_{αβ̄} + [φ_α, φ*_β̄]) = λ · id`. The flow
//! moves `h` along `h ↦ h · exp(−Δt · K)` with `K` the residual, written
//! symmetrically through the Cholesky factor `h = L L†` and smoothed by the
//! inverse of the flat Laplacian so that a unit step is close to a Newton
//! step.

use std::sync::Arc;

use crate::error::{LabError, Result};
use crate::form::{Bundle, FiberMetric, FormField};
use crate::gauge::GaugeConfig;
use crate::geometry::{TorusGeometry, Twist, C64};
use crate::linalg::{self, ONE, ZERO};

#[derive(Clone, Debug)]
pub struct HymOptions {
    pub tol: f64,
    pub max_steps: usize,
    pub dt_initial: f64,
    pub dt_max: f64,
}

impl Default for HymOptions {
    fn default() -> Self {
        HymOptions { tol: 1e-10, max_steps: 2000, dt_initial: 1.0, dt_max: 8.0 }
    }
}

/// One accepted step of the flow.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowStep {
    pub step: usize,
    pub residual_sup: f64,
    pub residual_l2: f64,
    pub dt: f64,
}

#[derive(Clone, Debug)]
pub struct HymReport {
    pub lambda: f64,
    pub residual_sup: f64,
    pub residual_l2: f64,
    pub iterations: usize,
    pub converged: bool,
    pub history: Vec<FlowStep>,
}

/// `λ = (1 / (r · Vol)) ∫ tr(g^{β̄α} R_{αβ̄}) g dV`, the unique constant for
/// which the trace of the HYM equation holds.
pub fn determine_lambda(cfg: &GaugeConfig) -> f64 {
    let lr = cfg.curvature().lambda_contract().expect("(1,1)");
    let geom = cfg.bundle().geom();
    lr.integral_trace(0).re / (cfg.rank() as f64 * geom.volume())
}

/// `K = g^{β̄α}(R_{αβ̄} + [φ_α, φ*_β̄]) − λ · id` together with `λ`.
pub fn hym_residual(cfg: &GaugeConfig) -> (FormField, f64) {
    let lambda = determine_lambda(cfg);
    (residual_with(cfg, lambda), lambda)
}

fn residual_with(cfg: &GaugeConfig, lambda: f64) -> FormField {
    let mut v = cfg.curvature();
    let comm = cfg.phi().bracket(&cfg.phi_star()).expect("(1,0) with (0,1)");
    v.axpy(ONE, &comm).expect("same shape");
    let mut k = v.lambda_contract().expect("(1,1)");
    let id = FormField::identity(cfg.bundle());
    k.axpy(C64::new(-lambda, 0.0), &id).expect("same shape");
    // the equation only sees the h-self-adjoint part; round-off leaves a
    // tiny remainder that no metric change can remove
    let h = cfg.metric();
    k.map_points(|_, pt, m| {
        let adj = h.adjoint_at(m, pt, m.len().isqrt());
        m.iter().zip(&adj).map(|(a, b)| (a + b) * 0.5).collect()
    })
}

fn norms(k: &FormField, h: &FiberMetric) -> (f64, f64) {
    (k.sup_norm(), k.norm(h))
}

/// Rescale `h` so that the mean of `log det h` vanishes.
fn normalize(h: &mut FormField) {
    let r = h.rank();
    let npts = h.geom().npts();
    let mean: f64 = (0..npts)
        .map(|pt| {
            let (vals, _) = linalg::hermitian_eigen(h.at(0, pt), r);
            vals.iter().map(|v| v.ln()).sum::<f64>()
        })
        .sum::<f64>()
        / npts as f64;
    h.scale(C64::new((-mean / r as f64).exp(), 0.0));
}

fn flow_step(cfg: &GaugeConfig, k: &FormField, dt: f64, mu: f64) -> Result<FiberMetric> {
    let r = cfg.rank();
    let h = cfg.h();
    let npts = h.geom().npts();
    let mut lfac = h.zeros_like();
    let mut s = h.zeros_like();
    for pt in 0..npts {
        let l = linalg::cholesky(h.at(0, pt), r).ok_or(LabError::NotPositive(pt))?;
        let li = linalg::inverse(&l, r).ok_or(LabError::NotPositive(pt))?;
        // L† K L⁻† is hermitian because K is h-self-adjoint
        let ld = linalg::dagger(&l, r);
        let lid = linalg::dagger(&li, r);
        let t = linalg::mul(&linalg::mul(&ld, k.at(0, pt), r), &lid, r);
        let herm = linalg::dagger(&t, r);
        let sym: Vec<C64> = t.iter().zip(&herm).map(|(a, b)| (a + b) * 0.5).collect();
        s.at_mut(0, pt).copy_from_slice(&sym);
        lfac.at_mut(0, pt).copy_from_slice(&l);
    }
    let geom = h.geom().clone();
    let smooth = s.apply_symbol(|kk| C64::new(mu / (geom.laplace_symbol(kk) + mu), 0.0));
    let mut hn = h.zeros_like();
    for pt in 0..npts {
        let m = smooth.at(0, pt);
        let herm: Vec<C64> = {
            let d = linalg::dagger(m, r);
            m.iter().zip(&d).map(|(a, b)| (a + b) * 0.5).collect()
        };
        let e = linalg::hermitian_function(&herm, r, |v| (-dt * v / mu).exp());
        let l = lfac.at(0, pt);
        let v = linalg::mul(&linalg::mul(l, &e, r), &linalg::dagger(l, r), r);
        hn.at_mut(0, pt).copy_from_slice(&v);
    }
    normalize(&mut hn);
    FiberMetric::new(hn)
}

/// Evolve the metric until the HYM residual drops below `opts.tol`.
///
/// On failure to converge the best iterate is returned with
/// `converged == false`.
pub fn hym_flow(cfg: &GaugeConfig, opts: &HymOptions) -> Result<(GaugeConfig, HymReport)> {
    let geom = cfg.bundle().geom();
    let lambda = determine_lambda(cfg);
    let mut mu = f64::INFINITY;
    geom.for_each_wavenumber(&vec![0.0; geom.real_dims()], |_, k| {
        let s = geom.laplace_symbol(k);
        if s > 1e-12 {
            mu = mu.min(s);
        }
    });
    mu *= 0.5;
    let mut cur = cfg.clone();
    let mut k = residual_with(&cur, lambda);
    let (mut sup, mut l2) = norms(&k, cur.metric());
    let mut history = vec![FlowStep { step: 0, residual_sup: sup, residual_l2: l2, dt: 0.0 }];
    let mut dt = opts.dt_initial;
    let mut step = 0;
    while sup > opts.tol && step < opts.max_steps {
        step += 1;
        let mut accepted = false;
        while dt > 1e-12 {
            let trial = cur.with_metric(flow_step(&cur, &k, dt, mu)?);
            let kt = residual_with(&trial, lambda);
            let (st, lt) = norms(&kt, trial.metric());
            if lt <= l2 {
                cur = trial;
                k = kt;
                sup = st;
                l2 = lt;
                accepted = true;
                history.push(FlowStep { step, residual_sup: sup, residual_l2: l2, dt });
                dt = (dt * 1.1).min(opts.dt_max);
                break;
            }
            dt *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let report = HymReport {
        lambda,
        residual_sup: sup,
        residual_l2: l2,
        iterations: step,
        converged: sup <= opts.tol,
        history,
    };
    Ok((cur, report))
}

/// HYM metric of a rank-one configuration by one spectral Poisson solve:
/// `h = e^u` with `g^{β̄α} ∂_α ∂_β̄ u = 2 Re g^{β̄α} ∂_α A_β̄ − λ` and mean
/// `u = 0`, the same normalization the flow uses.
pub fn rank_one_direct(cfg: &GaugeConfig) -> Result<FiberMetric> {
    if cfg.rank() != 1 {
        return Err(LabError::Shape("direct solve needs rank one".into()));
    }
    let bundle = cfg.bundle();
    let geom = bundle.geom();
    let n = geom.complex_dim();
    let mut rhs = vec![ZERO; geom.npts()];
    for a in 0..n {
        let da = cfg.a().derivative(a, false)?;
        for b in 0..n {
            let c = geom.metric_inv(b, a);
            for (pt, v) in rhs.iter_mut().enumerate() {
                *v += c * da.at(b, pt)[0];
            }
        }
    }
    for v in rhs.iter_mut() {
        *v = C64::new(2.0 * v.re, 0.0);
    }
    let zero_shift = vec![0.0; geom.real_dims()];
    geom.apply_symbol(&mut rhs, &zero_shift, |k| {
        let s = geom.laplace_symbol(k);
        if s > 1e-12 {
            C64::new(-1.0 / s, 0.0)
        } else {
            ZERO
        }
    });
    let h = FormField::from_scalar(bundle, 0, 0, 0, &[ONE], |pt| C64::new(rhs[pt].re.exp(), 0.0))?;
    FiberMetric::new(h)
}

/// Rank-one configuration with `A = 0`, `h = 1` and constant
/// `φ = Σ c_α dz^α`.
pub fn make_flat_abelian(geom: &TorusGeometry, phi: &[C64]) -> Result<GaugeConfig> {
    let bundle = Bundle::trivial(geom.clone(), 1);
    if phi.len() != geom.complex_dim() {
        return Err(LabError::Shape("one Higgs coefficient per complex direction".into()));
    }
    let mut f = FormField::zeros(&bundle, 1, 0)?;
    for (alpha, &c) in phi.iter().enumerate() {
        f.comp_mut(alpha).iter_mut().for_each(|v| *v = c);
    }
    GaugeConfig::new(FormField::zeros(&bundle, 0, 1)?, f, FiberMetric::identity(&bundle), 0.0)
}

/// Direct sum of flat line bundles with diagonal constant Higgs field
/// `φ_α = diag(phi[α])`, optionally twisted by constant unitary factors of
/// automorphy.
pub fn make_normal_config(geom: &TorusGeometry, phi: &[Vec<C64>], twist: Option<Twist>) -> Result<GaugeConfig> {
    let n = geom.complex_dim();
    if phi.len() != n {
        return Err(LabError::Shape("one diagonal per complex direction".into()));
    }
    let r = phi[0].len();
    if phi.iter().any(|d| d.len() != r) {
        return Err(LabError::Shape("ragged Higgs diagonals".into()));
    }
    let twist = twist.unwrap_or_else(|| Twist::trivial(r, geom.real_dims()));
    if twist.rank() != r {
        return Err(LabError::Shape("twist rank differs from the Higgs field".into()));
    }
    let bundle: Arc<Bundle> = Bundle::new(geom.clone(), twist)?;
    let mut f = FormField::zeros(&bundle, 1, 0)?;
    for (alpha, diag) in phi.iter().enumerate() {
        let mut m = vec![ZERO; r * r];
        for a in 0..r {
            m[a * r + a] = diag[a];
        }
        for pt in 0..geom.npts() {
            f.at_mut(alpha, pt).copy_from_slice(&m);
        }
    }
    GaugeConfig::new(FormField::zeros(&bundle, 0, 1)?, f, FiberMetric::identity(&bundle), 0.0)
}

/// Rank-one bundle of degree `d` on a curve, modelled by the central
/// curvature `2π d / Vol`.
pub fn make_degree_line(geom: &TorusGeometry, degree: i64) -> Result<GaugeConfig> {
    let bundle = Bundle::trivial(geom.clone(), 1);
    let n = geom.complex_dim() as f64;
    let flux = 2.0 * std::f64::consts::PI * degree as f64 / (n * geom.volume());
    GaugeConfig::new(FormField::zeros(&bundle, 0, 1)?, FormField::zeros(&bundle, 1, 0)?, FiberMetric::identity(&bundle), flux)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::I;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn trivial_witnesses_have_zero_residual() {
        let geom = TorusGeometry::unit_curve(8);
        let cfg = make_flat_abelian(&geom, &[C64::new(0.4, -1.0)]).unwrap();
        let (k, lambda) = hym_residual(&cfg);
        assert_eq!(lambda, 0.0);
        assert!(k.sup_norm() < 1e-15);
        let cfg = make_normal_config(&geom, &[vec![ONE, -ONE]], None).unwrap();
        assert!(hym_residual(&cfg).0.sup_norm() < 1e-15);
    }

    #[test]
    fn nilpotent_higgs_field_residual() {
        let geom = TorusGeometry::new(&[(1.0, 1.0)], &[C64::new(2.0, 0.0)], 8).unwrap();
        let b = Bundle::trivial(geom, 2);
        let phi = FormField::constant(&b, 1, 0, 0, &[ZERO, ONE, ZERO, ZERO]).unwrap();
        let cfg = GaugeConfig::new(FormField::zeros(&b, 0, 1).unwrap(), phi, FiberMetric::identity(&b), 0.0).unwrap();
        let (k, lambda) = hym_residual(&cfg);
        assert_eq!(lambda, 0.0);
        // g^{1̄1} [φ, φ*] = ½ diag(1, −1)
        let m = k.at(0, 3);
        assert!((m[0] - C64::new(0.5, 0.0)).norm() < 1e-15 && (m[3] + C64::new(0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn degree_line_lambda() {
        let geom = TorusGeometry::new(&[(1.0, 2.0)], &[C64::new(1.5, 0.0)], 8).unwrap();
        let cfg = make_degree_line(&geom, 3).unwrap();
        let lambda = determine_lambda(&cfg);
        let expect = 2.0 * std::f64::consts::PI * 3.0 / geom.volume();
        assert!((lambda - expect).abs() < 1e-12 * expect);
    }

    #[test]
    fn rank_one_flow_matches_poisson_solve() {
        let geom = TorusGeometry::unit_curve(32);
        let b = Bundle::trivial(geom.clone(), 1);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = FormField::random(&b, 0, 1, 3, &mut rng).unwrap().scaled(C64::new(0.2, 0.0));
        let phi = FormField::constant(&b, 1, 0, 0, &[C64::new(0.3, 0.2)]).unwrap();
        let cfg = GaugeConfig::new(a.clone(), phi, FiberMetric::identity(&b), 0.0).unwrap();
        let (solved, rep) = hym_flow(&cfg, &HymOptions::default()).unwrap();
        assert!(rep.converged, "{:?}", rep.residual_sup);
        assert!(rep.iterations <= 200);
        // h = e^u with u_{zz̄} = 2 Re ∂_z A and mean u = 0
        let mut rhs: Vec<C64> = a.derivative(0, false).unwrap().comp(0).iter().map(|v| C64::new(2.0 * v.re, 0.0)).collect();
        geom.forward_coefficients(&mut rhs, &[0.0, 0.0]);
        let n = geom.grid();
        for (idx, v) in rhs.iter_mut().enumerate() {
            let (jx, jy) = (idx / n, idx % n);
            let kx = 2.0 * std::f64::consts::PI * geom.signed_mode(jx).map_or(-(n as f64) / 2.0, |m| m as f64) / 1.0;
            let ky = 2.0 * std::f64::consts::PI * geom.signed_mode(jy).map_or(-(n as f64) / 2.0, |m| m as f64) / 0.5;
            let sym = -(kx * kx + ky * ky) / 4.0;
            *v = if idx == 0 { ZERO } else { *v / sym };
        }
        geom.inverse_coefficients(&mut rhs, &[0.0, 0.0]);
        let err = (0..geom.npts())
            .map(|pt| (solved.h().at(0, pt)[0].re.ln() - rhs[pt].re).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-9, "{err}");
        let direct = rank_one_direct(&cfg).unwrap();
        let err = (0..geom.npts()).map(|pt| (direct.h().at(0, pt)[0] - solved.h().at(0, pt)[0]).norm()).fold(0.0, f64::max);
        assert!(err < 1e-9, "{err}");
        let _ = I;
    }

    #[test]
    fn perturbed_normal_configuration_converges() {
        let geom = TorusGeometry::unit_curve(32);
        let cfg = make_normal_config(&geom, &[vec![ONE, -ONE]], None).unwrap();
        let b = cfg.bundle().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let pert = FormField::random(&b, 0, 0, 2, &mut rng).unwrap();
        let h = FormField::identity(&b).plus(&pert.plus(&pert.map_points(|_, _, m| linalg::dagger(m, 2))).unwrap().map_points(|_, _, m| {
            vec![ZERO, m[1] * 0.025, m[2] * 0.025, ZERO]
        }))
        .unwrap();
        let start = cfg.with_metric(FiberMetric::new(h).unwrap());
        let (_, rep) = hym_flow(&start, &HymOptions { tol: 1e-8, ..Default::default() }).unwrap();
        assert!(rep.converged, "{}", rep.residual_sup);
        assert!(rep.history.windows(2).all(|w| w[1].residual_l2 <= w[0].residual_l2));
    }
}
