//! The double complex `C^{p,q}` with `d″ = ∂̄ + [A, ·]`, `d′ = [·, φ]` and
//! the single complex `C^k = ⊕_{p+q=k} C^{p,q}` with
//! `d = d″ + (−1)^{q+1} d′`.
//!
//! Adjoints are adjoints of the discrete operators: `d* = M⁻¹ d† M`, where
//! `d†` is the plain ℓ² adjoint and `M` turns the ℓ² pairing into the
//! hermitian one. This makes `⟨dx, y⟩ = ⟨x, d*y⟩` exact up to round-off.

use std::sync::Arc;

use crate::error::{LabError, Result};
use crate::form::{basis, count_above, count_below, parity, Bundle, FiberMetric, FormField};
use crate::gauge::GaugeConfig;
use crate::geometry::{C64, I};
use crate::linalg::{self, ONE, ZERO};

/// Element of `C^k`, stored as its `(p, k−p)` parts with `p` descending:
/// degree 1 is `(a, b) ∈ C^{1,0} ⊕ C^{0,1}`, degree 2 is `(u, v, w)`.
#[derive(Clone, Debug)]
pub struct ComplexElement {
    degree: usize,
    parts: Vec<FormField>,
}

fn p_range(n: usize, k: usize) -> Vec<usize> {
    let lo = k.saturating_sub(n);
    let hi = k.min(n);
    (lo..=hi).rev().collect()
}

impl ComplexElement {
    pub fn zeros(bundle: &Arc<Bundle>, degree: usize) -> Result<Self> {
        let n = bundle.n();
        if degree > 2 * n {
            return Err(LabError::UnsupportedDegree(degree));
        }
        let parts = p_range(n, degree)
            .into_iter()
            .map(|p| FormField::zeros(bundle, p, degree - p))
            .collect::<Result<_>>()?;
        Ok(ComplexElement { degree, parts })
    }

    /// Assemble from parts; any bidegree of the degree may be omitted and is
    /// then zero.
    pub fn from_parts(bundle: &Arc<Bundle>, degree: usize, given: Vec<FormField>) -> Result<Self> {
        let mut out = Self::zeros(bundle, degree)?;
        for f in given {
            let (p, q) = f.bidegree();
            if p + q != degree {
                return Err(LabError::Bidegree { expected: format!("total degree {degree}"), p, q });
            }
            let slot = out.slot(p).ok_or(LabError::DegreeOverflow { p, q, n: bundle.n() })?;
            out.parts[slot].same_shape(&f)?;
            out.parts[slot] = f;
        }
        Ok(out)
    }

    pub fn random<R: rand::Rng>(bundle: &Arc<Bundle>, degree: usize, max_mode: usize, rng: &mut R) -> Result<Self> {
        let n = bundle.n();
        let parts = p_range(n, degree)
            .into_iter()
            .map(|p| FormField::random(bundle, p, degree - p, max_mode, rng))
            .collect::<Result<_>>()?;
        Ok(ComplexElement { degree, parts })
    }

    fn slot(&self, p: usize) -> Option<usize> {
        self.parts.iter().position(|f| f.bidegree().0 == p)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }
    pub fn parts(&self) -> &[FormField] {
        &self.parts
    }
    pub fn bundle(&self) -> &Arc<Bundle> {
        self.parts[0].bundle()
    }

    /// Part of bidegree `(p, degree − p)`, if it exists for this `n`.
    pub fn part(&self, p: usize) -> Option<&FormField> {
        self.slot(p).map(|s| &self.parts[s])
    }

    pub fn part_mut(&mut self, p: usize) -> Option<&mut FormField> {
        self.slot(p).map(move |s| &mut self.parts[s])
    }

    pub fn axpy(&mut self, c: C64, other: &ComplexElement) -> Result<()> {
        if self.degree != other.degree {
            return Err(LabError::Shape(format!("degree {} vs {}", self.degree, other.degree)));
        }
        for (a, b) in self.parts.iter_mut().zip(&other.parts) {
            a.axpy(c, b)?;
        }
        Ok(())
    }

    pub fn scale(&mut self, c: C64) {
        self.parts.iter_mut().for_each(|f| f.scale(c));
    }

    pub fn scaled(&self, c: C64) -> Self {
        let mut out = self.clone();
        out.scale(c);
        out
    }

    pub fn plus(&self, other: &ComplexElement) -> Result<Self> {
        let mut out = self.clone();
        out.axpy(ONE, other)?;
        Ok(out)
    }

    pub fn minus(&self, other: &ComplexElement) -> Result<Self> {
        let mut out = self.clone();
        out.axpy(-ONE, other)?;
        Ok(out)
    }

    pub fn zeros_like(&self) -> Self {
        ComplexElement { degree: self.degree, parts: self.parts.iter().map(|f| f.zeros_like()).collect() }
    }

    pub fn inner(&self, other: &ComplexElement, h: &FiberMetric) -> Result<C64> {
        if self.degree != other.degree {
            return Err(LabError::Shape(format!("degree {} vs {}", self.degree, other.degree)));
        }
        let mut s = ZERO;
        for (a, b) in self.parts.iter().zip(&other.parts) {
            s += a.inner(b, h)?;
        }
        Ok(s)
    }

    pub fn norm(&self, h: &FiberMetric) -> f64 {
        self.inner(self, h).map(|v| v.re.max(0.0).sqrt()).unwrap_or(0.0)
    }

    pub fn frobenius_inner(&self, other: &ComplexElement) -> C64 {
        self.parts.iter().zip(&other.parts).map(|(a, b)| a.frobenius_inner(b)).sum()
    }

    pub fn sup_norm(&self) -> f64 {
        self.parts.iter().map(|f| f.sup_norm()).fold(0.0, f64::max)
    }

    pub fn metric_power(&self, h: &FiberMetric, t: f64) -> Self {
        ComplexElement { degree: self.degree, parts: self.parts.iter().map(|f| f.metric_power(h, t)).collect() }
    }

    pub fn map_parts(&self, f: impl Fn(&FormField) -> FormField) -> Self {
        ComplexElement { degree: self.degree, parts: self.parts.iter().map(f).collect() }
    }

    /// `(x₀, x_s)`: trace-free part and scalar part, `pr(x) = x₀`.
    pub fn trace_free_split(&self) -> (Self, Self) {
        let (free, scalar): (Vec<_>, Vec<_>) = self.parts.iter().map(|f| f.trace_free_split()).unzip();
        (
            ComplexElement { degree: self.degree, parts: free },
            ComplexElement { degree: self.degree, parts: scalar },
        )
    }
}

/// Differential operators of the complex attached to one configuration.
#[derive(Clone, Debug)]
pub struct Dolbeault {
    cfg: GaugeConfig,
    a_dag: FormField,
    phi_dag: FormField,
}

impl Dolbeault {
    pub fn new(cfg: &GaugeConfig) -> Self {
        let r = cfg.rank();
        let dag = |f: &FormField| f.map_points(|_, _, m| linalg::dagger(m, r));
        Dolbeault { a_dag: dag(cfg.a()), phi_dag: dag(cfg.phi()), cfg: cfg.clone() }
    }

    pub fn cfg(&self) -> &GaugeConfig {
        &self.cfg
    }
    pub fn metric(&self) -> &FiberMetric {
        self.cfg.metric()
    }
    fn n(&self) -> usize {
        self.cfg.n()
    }

    /// `d″x = Σ_β dz̄^β ∧ (∂_β̄ x + [A_β̄, x])`
    pub fn dbar(&self, x: &FormField) -> Result<FormField> {
        let (p, q) = x.bidegree();
        let n = self.n();
        if q >= n {
            return Err(LabError::DegreeOverflow { p, q: q + 1, n });
        }
        let mut out = FormField::zeros(x.bundle(), p, q + 1)?;
        let tgt = out.labels();
        let r = x.rank();
        let rr = r * r;
        for beta in 0..n {
            let dx = x.derivative(beta, true)?;
            for (c, &(i, j)) in x.labels().iter().enumerate() {
                if j & (1 << beta) != 0 {
                    continue;
                }
                let tc = tgt.iter().position(|&l| l == (i, j | 1 << beta)).expect("label");
                let s = C64::new(parity(p as u32 + count_below(j, beta)), 0.0);
                let dst = out.comp_mut(tc);
                for (d, v) in dst.iter_mut().zip(dx.comp(c)) {
                    *d += s * v;
                }
                for pt in 0..x.geom().npts() {
                    linalg::commutator_acc(
                        self.cfg.a().at(beta, pt),
                        x.at(c, pt),
                        s,
                        &mut dst[pt * rr..(pt + 1) * rr],
                        r,
                    );
                }
            }
        }
        Ok(out)
    }

    /// ℓ² adjoint of `d″`, from `(p, q+1)` back to `(p, q)`.
    fn dbar_l2_adjoint(&self, y: &FormField) -> Result<FormField> {
        let (p, q1) = y.bidegree();
        if q1 == 0 {
            return Err(LabError::Bidegree { expected: "q ≥ 1".into(), p, q: q1 });
        }
        let n = self.n();
        let mut out = FormField::zeros(y.bundle(), p, q1 - 1)?;
        let src = y.labels();
        let r = y.rank();
        let rr = r * r;
        for beta in 0..n {
            let dy = y.derivative(beta, false)?;
            for (c, &(i, j)) in out.labels().iter().enumerate() {
                if j & (1 << beta) != 0 {
                    continue;
                }
                let sc = src.iter().position(|&l| l == (i, j | 1 << beta)).expect("label");
                let s = C64::new(parity(p as u32 + count_below(j, beta)), 0.0);
                let dst = out.comp_mut(c);
                for (d, v) in dst.iter_mut().zip(dy.comp(sc)) {
                    *d -= s * v;
                }
                for pt in 0..y.geom().npts() {
                    linalg::commutator_acc(self.a_dag.at(beta, pt), y.at(sc, pt), s, &mut dst[pt * rr..(pt + 1) * rr], r);
                }
            }
        }
        Ok(out)
    }

    /// `d′x = [x, φ]` with `dz^α` placed last.
    pub fn dprime(&self, x: &FormField) -> Result<FormField> {
        let (p, q) = x.bidegree();
        let n = self.n();
        if p >= n {
            return Err(LabError::DegreeOverflow { p: p + 1, q, n });
        }
        let mut out = FormField::zeros(x.bundle(), p + 1, q)?;
        let tgt = out.labels();
        let r = x.rank();
        let rr = r * r;
        for alpha in 0..n {
            for (c, &(i, j)) in x.labels().iter().enumerate() {
                if i & (1 << alpha) != 0 {
                    continue;
                }
                let tc = tgt.iter().position(|&l| l == (i | 1 << alpha, j)).expect("label");
                let s = C64::new(parity(q as u32 + count_above(i, alpha)), 0.0);
                let dst = out.comp_mut(tc);
                for pt in 0..x.geom().npts() {
                    linalg::commutator_acc(x.at(c, pt), self.cfg.phi().at(alpha, pt), s, &mut dst[pt * rr..(pt + 1) * rr], r);
                }
            }
        }
        Ok(out)
    }

    fn dprime_l2_adjoint(&self, y: &FormField) -> Result<FormField> {
        let (p1, q) = y.bidegree();
        if p1 == 0 {
            return Err(LabError::Bidegree { expected: "p ≥ 1".into(), p: p1, q });
        }
        let n = self.n();
        let mut out = FormField::zeros(y.bundle(), p1 - 1, q)?;
        let src = y.labels();
        let r = y.rank();
        let rr = r * r;
        for alpha in 0..n {
            for (c, &(i, j)) in out.labels().iter().enumerate() {
                if i & (1 << alpha) != 0 {
                    continue;
                }
                let sc = src.iter().position(|&l| l == (i | 1 << alpha, j)).expect("label");
                let s = C64::new(parity(q as u32 + count_above(i, alpha)), 0.0);
                let dst = out.comp_mut(c);
                for pt in 0..y.geom().npts() {
                    linalg::commutator_acc(y.at(sc, pt), self.phi_dag.at(alpha, pt), s, &mut dst[pt * rr..(pt + 1) * rr], r);
                }
            }
        }
        Ok(out)
    }

    /// Total differential `d = d″ + (−1)^{q+1} d′` from `C^k` to `C^{k+1}`.
    pub fn d(&self, x: &ComplexElement) -> Result<ComplexElement> {
        let n = self.n();
        let k = x.degree();
        if k >= 2 * n {
            return Err(LabError::UnsupportedDegree(k + 1));
        }
        let mut out = ComplexElement::zeros(x.bundle(), k + 1)?;
        for f in x.parts() {
            let (p, q) = f.bidegree();
            if q < n {
                let t = self.dbar(f)?;
                out.part_mut(p).expect("slot").axpy(ONE, &t)?;
            }
            if p < n {
                let t = self.dprime(f)?;
                out.part_mut(p + 1).expect("slot").axpy(C64::new(parity(q as u32 + 1), 0.0), &t)?;
            }
        }
        Ok(out)
    }

    /// ℓ² adjoint of `d`, from `C^{k+1}` to `C^k`.
    pub fn d_l2_adjoint(&self, y: &ComplexElement) -> Result<ComplexElement> {
        let k1 = y.degree();
        if k1 == 0 {
            return Err(LabError::UnsupportedDegree(0));
        }
        let n = self.n();
        let mut out = ComplexElement::zeros(y.bundle(), k1 - 1)?;
        for slot in 0..out.parts.len() {
            let (p, q) = out.parts[slot].bidegree();
            if q < n {
                if let Some(src) = y.part(p) {
                    let t = self.dbar_l2_adjoint(src)?;
                    out.parts[slot].axpy(ONE, &t)?;
                }
            }
            if p < n {
                if let Some(src) = y.part(p + 1) {
                    let t = self.dprime_l2_adjoint(src)?;
                    out.parts[slot].axpy(C64::new(parity(q as u32 + 1), 0.0), &t)?;
                }
            }
        }
        Ok(out)
    }

    /// Hermitian adjoint `d* = M⁻¹ d† M`.
    pub fn d_star(&self, y: &ComplexElement) -> Result<ComplexElement> {
        let h = self.metric();
        let my = y.metric_power(h, 1.0);
        Ok(self.d_l2_adjoint(&my)?.metric_power(h, -1.0))
    }

    /// `∂̄*` on a single form: adjoint of `d″`.
    pub fn dbar_star(&self, y: &FormField) -> Result<FormField> {
        let h = self.metric();
        Ok(self.dbar_l2_adjoint(&y.metric_power(h, 1.0))?.metric_power(h, -1.0))
    }

    /// `□ = d*d + dd*`.
    pub fn laplacian(&self, x: &ComplexElement) -> Result<ComplexElement> {
        let mut out = if x.degree() < 2 * self.n() { self.d_star(&self.d(x)?)? } else { x.zeros_like() };
        if x.degree() > 0 {
            out.axpy(ONE, &self.d(&self.d_star(x)?)?)?;
        }
        Ok(out)
    }

    /// `d⁰(f) = (−[f, φ], ∂̄f)`
    pub fn d0(&self, f: &FormField) -> Result<ComplexElement> {
        self.d(&ComplexElement::from_parts(f.bundle(), 0, vec![f.clone()])?)
    }

    /// The displayed formula `d⁰*(a, b) = −Λ[a, φ*] + ∂̄*b`.
    pub fn d0_star_formula(&self, x: &ComplexElement) -> Result<FormField> {
        if x.degree() != 1 {
            return Err(LabError::UnsupportedDegree(x.degree()));
        }
        let phi_star = self.cfg.phi_star();
        let a = x.part(1).expect("(1,0) part");
        let b = x.part(0).expect("(0,1) part");
        let mut out = a.bracket(&phi_star)?.lambda_contract()?;
        out.scale(-ONE);
        out.axpy(ONE, &self.dbar_star(b)?)?;
        Ok(out)
    }

    /// The displayed formula
    /// `d¹*(u, v, w) = (Λ[u, φ*] + ∂̄*v, Λ̃[v, φ*] + ∂̄*w)`.
    pub fn d1_star_formula(&self, y: &ComplexElement) -> Result<ComplexElement> {
        if y.degree() != 2 {
            return Err(LabError::UnsupportedDegree(y.degree()));
        }
        let phi_star = self.cfg.phi_star();
        let v = y.part(1).expect("(1,1) part");
        let mut first = self.dbar_star(v)?;
        if let Some(u) = y.part(2) {
            first.axpy(ONE, &u.bracket(&phi_star)?.lambda_contract()?)?;
        }
        let mut second = FormField::tilde_lambda_bracket(v, &phi_star)?;
        if let Some(w) = y.part(0) {
            second.axpy(ONE, &self.dbar_star(w)?)?;
        }
        ComplexElement::from_parts(y.bundle(), 1, vec![first, second])
    }

    /// Covariant derivative `σ_{;α} = ∂_α σ + [θ_α, σ]` of a section of
    /// `End(E)`, returned as a `(1,0)`-form.
    pub fn covariant_holomorphic(&self, sigma: &FormField, theta: &FormField) -> Result<FormField> {
        if sigma.bidegree() != (0, 0) {
            let (p, q) = sigma.bidegree();
            return Err(LabError::Bidegree { expected: "(0,0)".into(), p, q });
        }
        let n = self.n();
        let r = sigma.rank();
        let rr = r * r;
        let mut out = FormField::zeros(sigma.bundle(), 1, 0)?;
        for alpha in 0..n {
            let ds = sigma.derivative(alpha, false)?;
            let dst = out.comp_mut(alpha);
            dst.copy_from_slice(ds.comp(0));
            for pt in 0..sigma.geom().npts() {
                linalg::commutator_acc(theta.at(alpha, pt), sigma.at(0, pt), ONE, &mut dst[pt * rr..(pt + 1) * rr], r);
            }
        }
        Ok(out)
    }
}

/// Kähler form times identity, `ω_X · id = √−1 g_{αβ̄} dz^α ∧ dz̄^β · id`.
pub fn kahler_form(bundle: &Arc<Bundle>) -> FormField {
    let n = bundle.n();
    let r = bundle.rank();
    let geom = bundle.geom();
    let mut out = FormField::zeros(bundle, 1, 1).expect("fits");
    for (c, &(i, j)) in basis(n, 1, 1).iter().enumerate() {
        let g = I * geom.metric(i.trailing_zeros() as usize, j.trailing_zeros() as usize);
        for pt in 0..geom.npts() {
            let m = out.at_mut(c, pt);
            for a in 0..r {
                m[a * r + a] = g;
            }
        }
    }
    out
}

/// The canonical class `ε = (0, ω_X · id, 0)` of degree 2.
pub fn canonical_h2_class(bundle: &Arc<Bundle>) -> ComplexElement {
    ComplexElement::from_parts(bundle, 2, vec![kahler_form(bundle)]).expect("(1,1) is a degree-2 part")
}

/// Result of the parallel-endomorphism check.
#[derive(Clone, Debug)]
pub struct ParallelReport {
    pub holomorphy_residual: f64,
    pub commutator_residual: f64,
    pub covariant_residual: f64,
}

/// Check that an endomorphism which is holomorphic and commutes with `φ` is
/// parallel for the Chern connection of an HYM metric.
pub fn check_parallel_endomorphism(sigma: &FormField, cfg: &GaugeConfig, hym_residual: f64, tol: f64) -> Result<ParallelReport> {
    let dol = Dolbeault::new(cfg);
    let holo = dol.dbar(sigma)?.sup_norm();
    let comm = dol.dprime(sigma)?.sup_norm();
    let scale = 1.0 + sigma.sup_norm();
    for (what, v) in [("hermitian-Yang-Mills", hym_residual), ("holomorphy of σ", holo / scale), ("[σ, φ] = 0", comm / scale)] {
        if v > tol {
            return Err(LabError::Precondition { what: what.into(), residual: v, tol });
        }
    }
    let theta = cfg.theta();
    let cov = dol.covariant_holomorphic(sigma, &theta)?.sup_norm();
    Ok(ParallelReport { holomorphy_residual: holo, commutator_residual: comm, covariant_residual: cov })
}
