//! Higgs pairs in a fixed smooth trivialization.
//!
//! The holomorphic structure is `∂̄ + A` with `A` an `End(E)`-valued
//! `(0,1)`-form, `φ` is the Higgs field and `h` the fiber metric. A constant
//! central `flux` models a line-bundle factor of nonzero degree: it adds
//! `flux · g_{αβ̄} · id` to the curvature and is invisible to `End(E)`.

use std::sync::Arc;

use crate::error::{LabError, Result};
use crate::form::{comp_index, Bundle, FiberMetric, FormField};
use crate::geometry::C64;
use crate::linalg::{self, ONE};

#[derive(Clone, Debug)]
pub struct GaugeConfig {
    bundle: Arc<Bundle>,
    a: FormField,
    phi: FormField,
    metric: FiberMetric,
    flux: f64,
}

impl GaugeConfig {
    pub fn new(a: FormField, phi: FormField, metric: FiberMetric, flux: f64) -> Result<Self> {
        if a.bidegree() != (0, 1) {
            let (p, q) = a.bidegree();
            return Err(LabError::Bidegree { expected: "(0,1)".into(), p, q });
        }
        if phi.bidegree() != (1, 0) {
            let (p, q) = phi.bidegree();
            return Err(LabError::Bidegree { expected: "(1,0)".into(), p, q });
        }
        let bundle = a.bundle().clone();
        if phi.geom() != a.geom() || phi.rank() != a.rank() || metric.h().geom() != a.geom() || metric.h().rank() != a.rank() {
            return Err(LabError::Shape("A, φ and h must share the bundle".into()));
        }
        Ok(GaugeConfig { bundle, a, phi, metric, flux })
    }

    /// `A = 0`, `φ = 0`, `h = id`.
    pub fn flat(bundle: &Arc<Bundle>) -> Self {
        GaugeConfig {
            bundle: bundle.clone(),
            a: FormField::zeros(bundle, 0, 1).expect("fits"),
            phi: FormField::zeros(bundle, 1, 0).expect("fits"),
            metric: FiberMetric::identity(bundle),
            flux: 0.0,
        }
    }

    pub fn bundle(&self) -> &Arc<Bundle> {
        &self.bundle
    }
    pub fn a(&self) -> &FormField {
        &self.a
    }
    pub fn phi(&self) -> &FormField {
        &self.phi
    }
    pub fn metric(&self) -> &FiberMetric {
        &self.metric
    }
    pub fn h(&self) -> &FormField {
        self.metric.h()
    }
    pub fn flux(&self) -> f64 {
        self.flux
    }
    pub fn n(&self) -> usize {
        self.bundle.n()
    }
    pub fn rank(&self) -> usize {
        self.bundle.rank()
    }

    pub fn with_metric(&self, metric: FiberMetric) -> Self {
        GaugeConfig { metric, ..self.clone() }
    }

    pub fn with_fields(&self, a: FormField, phi: FormField) -> Result<Self> {
        Self::new(a, phi, self.metric.clone(), self.flux)
    }

    /// `φ*`, components `φ*_β̄ = (φ_β)^{*h}`.
    pub fn phi_star(&self) -> FormField {
        self.phi.star(&self.metric)
    }

    /// Connection form `θ_α = h⁻¹ ∂_α h − (A_ᾱ)^{*h}` of the Chern connection.
    pub fn theta(&self) -> FormField {
        let n = self.n();
        let r = self.rank();
        let h = self.metric.h();
        let a_star = self.a.star(&self.metric);
        let mut theta = FormField::zeros(&self.bundle, 1, 0).expect("fits");
        for alpha in 0..n {
            let dh = h.derivative(alpha, false).expect("index in range");
            let hinv = self.metric.hinv();
            for pt in 0..h.geom().npts() {
                let mut m = linalg::mul(hinv.at(0, pt), dh.at(0, pt), r);
                for (x, y) in m.iter_mut().zip(a_star.at(alpha, pt)) {
                    *x -= y;
                }
                theta.at_mut(alpha, pt).copy_from_slice(&m);
            }
        }
        theta
    }

    /// Curvature components
    /// `R_{αβ̄} = −∂_β̄ θ_α + ∂_α A_β̄ + [θ_α, A_β̄] + flux · g_{αβ̄} id`.
    pub fn curvature(&self) -> FormField {
        let theta = self.theta();
        self.curvature_from_theta(&theta)
    }

    pub fn curvature_from_theta(&self, theta: &FormField) -> FormField {
        let n = self.n();
        let r = self.rank();
        let geom = self.bundle.geom();
        let mut out = FormField::zeros(&self.bundle, 1, 1).expect("fits");
        let dbar_theta: Vec<FormField> = (0..n).map(|b| theta.derivative(b, true).expect("index")).collect();
        let d_a: Vec<FormField> = (0..n).map(|al| self.a.derivative(al, false).expect("index")).collect();
        for alpha in 0..n {
            for beta in 0..n {
                let c = comp_index(n, 1, 1, 1 << alpha, 1 << beta);
                let g = geom.metric(alpha, beta) * self.flux;
                for pt in 0..geom.npts() {
                    let dst = out.at_mut(c, pt);
                    for ((d, x), y) in dst.iter_mut().zip(dbar_theta[beta].at(alpha, pt)).zip(d_a[alpha].at(beta, pt)) {
                        *d = y - x;
                    }
                    linalg::commutator_acc(theta.at(alpha, pt), self.a.at(beta, pt), ONE, dst, r);
                    for k in 0..r {
                        dst[k * r + k] += g;
                    }
                }
            }
        }
        out
    }

    /// `‖φ ∧ φ‖_∞`, zero for integrable Higgs fields.
    pub fn integrability_residual(&self) -> f64 {
        if self.n() < 2 {
            return 0.0;
        }
        self.phi.wedge_mul(&self.phi).map(|f| f.sup_norm()).unwrap_or(0.0)
    }

    /// Conjugate all data by a constant unitary `u`: `A ↦ uAu⁻¹`, `φ ↦ uφu⁻¹`,
    /// `h ↦ u h u†`.
    pub fn gauge_conjugate(&self, u: &[C64]) -> Result<Self> {
        let r = self.rank();
        if !self.bundle.twist().is_trivial() {
            return Err(LabError::Shape("constant gauge conjugation requires a trivial twist".into()));
        }
        let ud = linalg::dagger(u, r);
        let conj = |f: &FormField| f.map_points(|_, _, m| linalg::mul(&linalg::mul(u, m, r), &ud, r));
        let h = conj(self.metric.h());
        let metric = if self.metric.is_identity() { FiberMetric::identity(&self.bundle) } else { FiberMetric::new(h)? };
        Self::new(conj(&self.a), conj(&self.phi), metric, self.flux)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::TorusGeometry;

    #[test]
    fn flat_configuration_has_zero_curvature() {
        let b = Bundle::trivial(TorusGeometry::square(2, 1.0, 1.0, 4).unwrap(), 2);
        let cfg = GaugeConfig::flat(&b);
        assert_eq!(cfg.curvature().sup_norm(), 0.0);
        assert_eq!(cfg.integrability_residual(), 0.0);
    }

    #[test]
    fn constant_connection_is_flat() {
        let b = Bundle::trivial(TorusGeometry::unit_curve(8), 1);
        let a = FormField::constant(&b, 0, 1, 0, &[C64::new(0.3, -0.7)]).unwrap();
        let phi = FormField::zeros(&b, 1, 0).unwrap();
        let cfg = GaugeConfig::new(a, phi, FiberMetric::identity(&b), 0.0).unwrap();
        assert!(cfg.curvature().sup_norm() < 1e-14);
        // θ = −A* for h = 1
        assert!((cfg.theta().at(0, 0)[0] - C64::new(-0.3, -0.7)).norm() < 1e-15);
    }
}
