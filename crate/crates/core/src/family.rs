//! Holomorphic families `s ↦ (A(s), φ(s))` over a chart in `ℂ^m`, solved for
//! HYM metrics on a lattice of stencil points around the center.
//!
//! Stencil points are `s₀ + u·(k_re + i·k_im)` with integer offsets `k` and
//! lattice unit `u = ε/2`, so that steps `ε` and `ε/2` share points. Base
//! derivatives are central differences in `Re s^i`, `Im s^i`, combined into
//! `∂_i = ½(∂_x − i∂_y)`, `∂_ī = ½(∂_x + i∂_y)`, optionally with one
//! Richardson step.
//!
//! Base-direction conventions, extending the fiber ones:
//! `θ_i = h⁻¹ ∂_i h`, `φ_{α;i} = ∂_i φ_α + [θ_i, φ_α]`,
//! `R_{iβ̄} = −∂_β̄ θ_i + ∂_i A_β̄ + [θ_i, A_β̄]`, `R_{αj̄} = −∂_j̄ θ_α`,
//! `R_{ij̄} = −∂_j̄ θ_i`.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::{Arc, Mutex};

use crate::complex::{ComplexElement, Dolbeault};
use crate::error::{LabError, Result};
use crate::form::{Bundle, FormField};
use crate::gauge::GaugeConfig;
use crate::geometry::C64;
use crate::hym::{hym_flow, HymOptions, HymReport};
use crate::linalg::{self, ONE, ZERO};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldKind {
    /// Component of the Higgs field, `dz^α`.
    Higgs,
    /// Component of the `(0,1)`-connection form, `dz̄^α`.
    Connection,
}

/// One monomial `s^a · M · e^{2πi k·x/P}` of a generator.
#[derive(Clone, Debug)]
pub struct GeneratorTerm {
    pub field: FieldKind,
    pub direction: usize,
    pub monomial: Vec<u32>,
    pub coefficient: Vec<C64>,
    /// Fourier mode per real dimension; `None` is the constant profile.
    pub mode: Option<Vec<i64>>,
}

#[derive(Clone, Debug)]
pub struct FamilyGenerator {
    bundle: Arc<Bundle>,
    base_dim: usize,
    terms: Vec<GeneratorTerm>,
    profiles: Vec<Option<Vec<C64>>>,
}

fn monomial(a: &[u32], s: &[C64]) -> C64 {
    a.iter().zip(s).fold(ONE, |acc, (&e, &z)| acc * z.powu(e))
}

fn monomial_derivative(a: &[u32], s: &[C64], i: usize) -> C64 {
    if a[i] == 0 {
        return ZERO;
    }
    let mut b = a.to_vec();
    b[i] -= 1;
    C64::new(a[i] as f64, 0.0) * monomial(&b, s)
}

impl FamilyGenerator {
    pub fn new(bundle: &Arc<Bundle>, base_dim: usize, terms: Vec<GeneratorTerm>) -> Result<Self> {
        let geom = bundle.geom();
        let r = bundle.rank();
        let mut profiles = Vec::with_capacity(terms.len());
        for t in &terms {
            if t.direction >= bundle.n() {
                return Err(LabError::Direction { index: t.direction, n: bundle.n() });
            }
            if t.monomial.len() != base_dim {
                return Err(LabError::Shape(format!("monomial has {} exponents, base dimension is {base_dim}", t.monomial.len())));
            }
            if t.coefficient.len() != r * r {
                return Err(LabError::Shape(format!("coefficient must be {r}×{r}")));
            }
            for e in 0..r * r {
                if t.coefficient[e] != ZERO && !bundle.entry_is_periodic(e) {
                    return Err(LabError::Shape(format!("entry {e} is twisted and cannot carry a periodic profile")));
                }
            }
            profiles.push(match &t.mode {
                None => None,
                Some(k) => {
                    if k.len() != geom.real_dims() {
                        return Err(LabError::Shape("mode needs one integer per real dimension".into()));
                    }
                    let per = geom.periods();
                    Some(
                        (0..geom.npts())
                            .map(|pt| {
                                let x = geom.coords(pt);
                                let arg: f64 = (0..x.len()).map(|d| k[d] as f64 * x[d] / per[d]).sum();
                                C64::from_polar(1.0, 2.0 * std::f64::consts::PI * arg)
                            })
                            .collect(),
                    )
                }
            });
        }
        Ok(FamilyGenerator { bundle: bundle.clone(), base_dim, terms, profiles })
    }

    pub fn bundle(&self) -> &Arc<Bundle> {
        &self.bundle
    }
    pub fn base_dim(&self) -> usize {
        self.base_dim
    }
    pub fn terms(&self) -> &[GeneratorTerm] {
        &self.terms
    }

    fn assemble(&self, weight: impl Fn(&GeneratorTerm) -> C64) -> (FormField, FormField) {
        let b = &self.bundle;
        let mut a = FormField::zeros(b, 0, 1).expect("fits");
        let mut phi = FormField::zeros(b, 1, 0).expect("fits");
        let rr = b.rank() * b.rank();
        for (t, prof) in self.terms.iter().zip(&self.profiles) {
            let w = weight(t);
            if w == ZERO {
                continue;
            }
            let dst = match t.field {
                FieldKind::Higgs => phi.comp_mut(t.direction),
                FieldKind::Connection => a.comp_mut(t.direction),
            };
            for (pt, chunk) in dst.chunks_mut(rr).enumerate() {
                let f = prof.as_ref().map_or(w, |p| w * p[pt]);
                for (d, m) in chunk.iter_mut().zip(&t.coefficient) {
                    *d += f * m;
                }
            }
        }
        (a, phi)
    }

    /// `(A(s), φ(s))`.
    pub fn fields_at(&self, s: &[C64]) -> (FormField, FormField) {
        self.assemble(|t| monomial(&t.monomial, s))
    }

    /// `(∂_i A, ∂_i φ)` at `s`, exact.
    pub fn derivative_at(&self, s: &[C64], i: usize) -> (FormField, FormField) {
        self.assemble(|t| monomial_derivative(&t.monomial, s, i))
    }
}

/// Values that finite differences can combine.
pub trait FdValue: Clone {
    fn zero_like(&self) -> Self;
    fn add_scaled(&mut self, c: C64, other: &Self);
}

impl FdValue for FormField {
    fn zero_like(&self) -> Self {
        self.zeros_like()
    }
    fn add_scaled(&mut self, c: C64, other: &Self) {
        self.axpy(c, other).expect("same shape");
    }
}

impl FdValue for ComplexElement {
    fn zero_like(&self) -> Self {
        self.zeros_like()
    }
    fn add_scaled(&mut self, c: C64, other: &Self) {
        self.axpy(c, other).expect("same shape");
    }
}

impl FdValue for C64 {
    fn zero_like(&self) -> Self {
        ZERO
    }
    fn add_scaled(&mut self, c: C64, other: &Self) {
        *self += c * other;
    }
}

impl FdValue for Vec<C64> {
    fn zero_like(&self) -> Self {
        vec![ZERO; self.len()]
    }
    fn add_scaled(&mut self, c: C64, other: &Self) {
        for (a, b) in self.iter_mut().zip(other) {
            *a += c * b;
        }
    }
}

#[derive(Clone, Debug)]
pub struct FamilyOptions {
    pub eps: f64,
    pub richardson: bool,
    pub hym: HymOptions,
    /// Bound on `‖∂̄_A φ‖` and `‖φ∧φ‖` at every stencil point.
    pub holomorphy_tol: f64,
}

impl Default for FamilyOptions {
    fn default() -> Self {
        FamilyOptions {
            eps: 1e-2,
            richardson: true,
            hym: HymOptions { tol: 1e-12, ..HymOptions::default() },
            holomorphy_tol: 1e-9,
        }
    }
}

/// HYM-solved configuration at one stencil point.
#[derive(Clone, Debug)]
pub struct StencilPoint {
    pub s: Vec<C64>,
    pub cfg: GaugeConfig,
    pub report: HymReport,
    pub holomorphy_residual: f64,
    pub integrability_residual: f64,
}

/// Kodaira-Spencer data at the chart center.
#[derive(Clone, Debug)]
pub struct KodairaSpencerBasis {
    pub eta: Vec<ComplexElement>,
    pub theta_base: Vec<FormField>,
    pub mixed_curv: Vec<FormField>,
    pub higgs_deriv: Vec<FormField>,
}

pub type Offset = Vec<i64>;

pub struct FamilyChart {
    gen: FamilyGenerator,
    s0: Vec<C64>,
    opts: FamilyOptions,
    points: Mutex<BTreeMap<Offset, Arc<StencilPoint>>>,
    thetas: Mutex<BTreeMap<Offset, Arc<Vec<FormField>>>>,
}

impl FamilyChart {
    pub fn new(gen: FamilyGenerator, s0: Vec<C64>, opts: FamilyOptions) -> Result<Self> {
        if s0.len() != gen.base_dim() {
            return Err(LabError::Shape(format!("center has {} coordinates, base dimension is {}", s0.len(), gen.base_dim())));
        }
        if !(opts.eps > 0.0) {
            return Err(LabError::Scenario("stencil spacing must be positive".into()));
        }
        Ok(FamilyChart { gen, s0, opts, points: Mutex::new(BTreeMap::new()), thetas: Mutex::new(BTreeMap::new()) })
    }

    pub fn generator(&self) -> &FamilyGenerator {
        &self.gen
    }
    pub fn bundle(&self) -> &Arc<Bundle> {
        self.gen.bundle()
    }
    pub fn base_dim(&self) -> usize {
        self.gen.base_dim()
    }
    pub fn center(&self) -> &[C64] {
        &self.s0
    }
    pub fn options(&self) -> &FamilyOptions {
        &self.opts
    }
    pub fn origin(&self) -> Offset {
        vec![0; 2 * self.base_dim()]
    }

    fn unit(&self) -> f64 {
        self.opts.eps / 2.0
    }

    pub fn s_at(&self, k: &[i64]) -> Vec<C64> {
        let u = self.unit();
        self.s0.iter().enumerate().map(|(i, z)| z + C64::new(u * k[2 * i] as f64, u * k[2 * i + 1] as f64)).collect()
    }

    fn solve_point(&self, k: &[i64]) -> Result<StencilPoint> {
        let s = self.s_at(k);
        let (a, phi) = self.gen.fields_at(&s);
        let cfg = GaugeConfig::new(a, phi, crate::form::FiberMetric::identity(self.bundle()), 0.0)?;
        let dol = Dolbeault::new(&cfg);
        let holo = dol.dbar(cfg.phi())?.sup_norm();
        let integ = cfg.integrability_residual();
        let tol = self.opts.holomorphy_tol;
        if holo > tol {
            return Err(LabError::Precondition { what: "holomorphy of φ".into(), residual: holo, tol });
        }
        if integ > tol {
            return Err(LabError::Precondition { what: "integrability φ∧φ = 0".into(), residual: integ, tol });
        }
        let (solved, report) = hym_flow(&cfg, &self.opts.hym)?;
        if !report.converged {
            return Err(LabError::NoConvergence { iterations: report.iterations, residual: report.residual_sup });
        }
        Ok(StencilPoint { s, cfg: solved, report, holomorphy_residual: holo, integrability_residual: integ })
    }

    /// HYM-solved configuration at lattice offset `k`.
    pub fn point(&self, k: &[i64]) -> Result<Arc<StencilPoint>> {
        if let Some(p) = self.points.lock().expect("lock").get(k) {
            return Ok(p.clone());
        }
        let p = Arc::new(self.solve_point(k)?);
        self.points.lock().expect("lock").insert(k.to_vec(), p.clone());
        Ok(p)
    }

    fn steps(&self) -> &'static [i64] {
        if self.opts.richardson {
            &[2, 1]
        } else {
            &[2]
        }
    }

    /// Offsets reachable from `centers` by `depth` nested derivatives.
    pub fn reach(&self, centers: &[Offset], depth: usize) -> BTreeSet<Offset> {
        let mut set: BTreeSet<Offset> = centers.iter().cloned().collect();
        let dims = 2 * self.base_dim();
        for _ in 0..depth {
            let mut next = set.clone();
            for k in &set {
                for d in 0..dims {
                    for &st in self.steps() {
                        for sg in [-1, 1] {
                            let mut q = k.clone();
                            q[d] += sg * st;
                            next.insert(q);
                        }
                    }
                }
            }
            set = next;
        }
        set
    }

    /// Solve every point reachable from the center by `depth` nested
    /// derivatives, in parallel when available.
    pub fn prefetch(&self, depth: usize) -> Result<()> {
        let want: Vec<Offset> = {
            let have = self.points.lock().expect("lock");
            self.reach(&[self.origin()], depth).into_iter().filter(|k| !have.contains_key(k)).collect()
        };
        let solved: Vec<Result<StencilPoint>> = crate::par::map(&want, |k| self.solve_point(k));
        let mut have = self.points.lock().expect("lock");
        for (k, p) in want.into_iter().zip(solved) {
            have.insert(k, Arc::new(p?));
        }
        Ok(())
    }

    /// Solve the center and its first-order stencil.
    pub fn solve(&self) -> Result<()> {
        self.prefetch(1)
    }

    /// Number of solved stencil points.
    pub fn solved_points(&self) -> usize {
        self.points.lock().expect("lock").len()
    }

    /// `(min, max)` over solved points of λ and the largest HYM residual.
    pub fn solved_summary(&self) -> (f64, f64, f64) {
        let pts = self.points.lock().expect("lock");
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut res: f64 = 0.0;
        for p in pts.values() {
            lo = lo.min(p.report.lambda);
            hi = hi.max(p.report.lambda);
            res = res.max(p.report.residual_sup);
        }
        (lo, hi, res)
    }

    /// Stencil of `∂_i` (or `∂_ī` when `conj`) as `(offset, weight)` pairs.
    pub fn stencil(&self, i: usize, conj: bool) -> Vec<(Offset, C64)> {
        let u = self.unit();
        let mut out = Vec::new();
        let rich: &[(i64, f64)] = if self.opts.richardson { &[(2, -1.0 / 3.0), (1, 4.0 / 3.0)] } else { &[(2, 1.0)] };
        let im = if conj { C64::new(0.0, 0.5) } else { C64::new(0.0, -0.5) };
        for (dim, factor) in [(2 * i, C64::new(0.5, 0.0)), (2 * i + 1, im)] {
            for &(st, w) in rich {
                let c = factor * (w / (2.0 * st as f64 * u));
                let mut plus = self.origin();
                plus[dim] = st;
                let mut minus = self.origin();
                minus[dim] = -st;
                out.push((plus, c));
                out.push((minus, -c));
            }
        }
        out
    }

    /// `∂_i f` (or `∂_ī f`) at offset `k` by central differences.
    pub fn fd<T: FdValue>(&self, k: &[i64], i: usize, conj: bool, f: impl Fn(&[i64]) -> Result<T>) -> Result<T> {
        let mut acc: Option<T> = None;
        for (o, w) in self.stencil(i, conj) {
            let q: Offset = k.iter().zip(&o).map(|(a, b)| a + b).collect();
            let v = f(&q)?;
            match acc.as_mut() {
                None => {
                    let mut z = v.zero_like();
                    z.add_scaled(w, &v);
                    acc = Some(z);
                }
                Some(a) => a.add_scaled(w, &v),
            }
        }
        Ok(acc.expect("nonempty stencil"))
    }

    /// `θ_i = h⁻¹ ∂_i h` for all base directions at `k`.
    pub fn theta_base(&self, k: &[i64]) -> Result<Arc<Vec<FormField>>> {
        if let Some(t) = self.thetas.lock().expect("lock").get(k) {
            return Ok(t.clone());
        }
        let p = self.point(k)?;
        let r = self.bundle().rank();
        let hinv = p.cfg.metric().hinv();
        let mut out = Vec::with_capacity(self.base_dim());
        for i in 0..self.base_dim() {
            let dh = self.fd(k, i, false, |q| Ok(self.point(q)?.cfg.h().clone()))?;
            out.push(dh.map_points(|_, pt, m| linalg::mul(hinv.at(0, pt), m, r)));
        }
        let out = Arc::new(out);
        self.thetas.lock().expect("lock").insert(k.to_vec(), out.clone());
        Ok(out)
    }

    /// `φ_{α;i} dz^α` at `k`.
    pub fn higgs_deriv(&self, k: &[i64], i: usize) -> Result<FormField> {
        let p = self.point(k)?;
        let theta = self.theta_base(k)?;
        let (_, dphi) = self.gen.derivative_at(&p.s, i);
        dphi.plus(&theta[i].bracket(p.cfg.phi())?)
    }

    /// `R_{iβ̄} dz^β̄` at `k`.
    pub fn mixed_curv(&self, k: &[i64], i: usize) -> Result<FormField> {
        let p = self.point(k)?;
        let theta = self.theta_base(k)?;
        let (da, _) = self.gen.derivative_at(&p.s, i);
        let n = self.bundle().n();
        let mut out = da.plus(&theta[i].bracket(p.cfg.a())?)?;
        for beta in 0..n {
            let d = theta[i].derivative(beta, true)?;
            for (x, y) in out.comp_mut(beta).iter_mut().zip(d.comp(0)) {
                *x -= y;
            }
        }
        Ok(out)
    }

    /// `η_i = (φ_{α;i} dz^α, R_{iβ̄} dz^β̄)` at `k`.
    pub fn eta_at(&self, k: &[i64], i: usize) -> Result<ComplexElement> {
        ComplexElement::from_parts(self.bundle(), 1, vec![self.higgs_deriv(k, i)?, self.mixed_curv(k, i)?])
    }

    /// All `η_i` at `k`.
    pub fn etas_at(&self, k: &[i64]) -> Result<Vec<ComplexElement>> {
        (0..self.base_dim()).map(|i| self.eta_at(k, i)).collect()
    }

    pub fn kodaira_spencer(&self) -> Result<KodairaSpencerBasis> {
        let o = self.origin();
        let m = self.base_dim();
        Ok(KodairaSpencerBasis {
            eta: self.etas_at(&o)?,
            theta_base: self.theta_base(&o)?.as_ref().clone(),
            mixed_curv: (0..m).map(|i| self.mixed_curv(&o, i)).collect::<Result<_>>()?,
            higgs_deriv: (0..m).map(|i| self.higgs_deriv(&o, i)).collect::<Result<_>>()?,
        })
    }

    /// `η_{i;k} = ∂_k η_i + [θ_k, η_i]`.
    pub fn eta_cov(&self, at: &[i64], i: usize, k: usize) -> Result<ComplexElement> {
        let mut d = self.fd(at, k, false, |q| self.eta_at(q, i))?;
        let theta = self.theta_base(at)?;
        let eta = self.eta_at(at, i)?;
        let br = eta.map_parts(|f| theta[k].bracket(f).expect("degree fits"));
        d.axpy(ONE, &br)?;
        Ok(d)
    }

    /// `η_{i;j̄} = ∂_j̄ η_i`; the base has no `(0,1)` connection form.
    pub fn eta_bar(&self, at: &[i64], i: usize, j: usize) -> Result<ComplexElement> {
        self.fd(at, j, true, |q| self.eta_at(q, i))
    }

    /// `R_{ij̄} = −∂_j̄ θ_i`.
    pub fn base_curvature(&self, at: &[i64], i: usize, j: usize) -> Result<FormField> {
        Ok(self.fd(at, j, true, |q| Ok(self.theta_base(q)?[i].clone()))?.scaled(-ONE))
    }

    /// `R_{αj̄} dz^α = −∂_j̄ θ_α dz^α`.
    pub fn fiber_mixed(&self, at: &[i64], j: usize) -> Result<FormField> {
        Ok(self.fd(at, j, true, |q| Ok(self.point(q)?.cfg.theta()))?.scaled(-ONE))
    }

    /// Largest `‖∂_ī (A, φ)‖` of the generator at the center.
    pub fn cauchy_riemann_residual(&self) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for i in 0..self.base_dim() {
            let d = self.fd(&self.origin(), i, true, |q| {
                let (a, phi) = self.gen.fields_at(&self.s_at(q));
                ComplexElement::from_parts(self.bundle(), 1, vec![phi, a])
            })?;
            worst = worst.max(d.sup_norm());
        }
        Ok(worst)
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::geometry::TorusGeometry;

    pub(crate) fn tstar_jacobian(grid: usize) -> FamilyChart {
        let b = Bundle::trivial(TorusGeometry::unit_curve(grid), 1);
        let terms = vec![
            GeneratorTerm { field: FieldKind::Connection, direction: 0, monomial: vec![1, 0], coefficient: vec![ONE], mode: None },
            GeneratorTerm { field: FieldKind::Higgs, direction: 0, monomial: vec![0, 1], coefficient: vec![ONE], mode: None },
        ];
        let gen = FamilyGenerator::new(&b, 2, terms).unwrap();
        FamilyChart::new(gen, vec![C64::new(0.1, 0.2), C64::new(0.3, -0.1)], FamilyOptions::default()).unwrap()
    }

    #[test]
    fn rank_one_family_has_flat_metrics_and_constant_eta() {
        let chart = tstar_jacobian(8);
        chart.solve().unwrap();
        let (lo, hi, res) = chart.solved_summary();
        assert!(lo.abs() < 1e-14 && hi.abs() < 1e-14 && res < 1e-12);
        let ks = chart.kodaira_spencer().unwrap();
        // η₁ = (0, dz̄), η₂ = (dz, 0)
        let e1 = &ks.eta[0];
        let e2 = &ks.eta[1];
        assert!(e1.part(1).unwrap().sup_norm() < 1e-12);
        assert!((e1.part(0).unwrap().at(0, 5)[0] - ONE).norm() < 1e-10);
        assert!((e2.part(1).unwrap().at(0, 5)[0] - ONE).norm() < 1e-10);
        assert!(e2.part(0).unwrap().sup_norm() < 1e-10);
        assert!(chart.cauchy_riemann_residual().unwrap() < 1e-12);
    }

    #[test]
    fn twisted_entries_reject_periodic_profiles() {
        let geom = TorusGeometry::unit_curve(8);
        let b = Bundle::new(geom, crate::geometry::Twist::new(vec![vec![0.0, 0.0], vec![0.5, 0.0]]).unwrap()).unwrap();
        let t = GeneratorTerm { field: FieldKind::Higgs, direction: 0, monomial: vec![1], coefficient: vec![ZERO, ONE, ZERO, ZERO], mode: None };
        assert!(FamilyGenerator::new(&b, 1, vec![t]).is_err());
    }
}
