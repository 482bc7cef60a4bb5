//! Matrix-valued `(p,q)`-forms on the torus: the cells `C^{p,q}` of the
//! Dolbeault double complex with values in `End(E)`.
//!
//! A component is labelled by a pair of index bitmasks `(I, J)` meaning the
//! basis form `dz^I ∧ dz̄^J` (holomorphic factors first, each block in
//! increasing order). Each component stores one row-major `r × r` matrix per
//! grid point.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{LabError, Result};
use crate::geometry::{TorusGeometry, Twist, C64};
use crate::linalg::{self, ONE, ZERO};

/// Geometry plus the bundle data every field shares: rank and twist.
#[derive(Debug)]
pub struct Bundle {
    geom: TorusGeometry,
    twist: Twist,
    rank: usize,
    shifts: Vec<Vec<f64>>,
}

impl Bundle {
    pub fn new(geom: TorusGeometry, twist: Twist) -> Result<Arc<Self>> {
        let rank = twist.rank();
        if rank == 0 {
            return Err(LabError::Geometry("bundle rank must be positive".into()));
        }
        if twist.phases()[0].len() != geom.real_dims() {
            return Err(LabError::Geometry("twist must list one phase per real lattice direction".into()));
        }
        let mut shifts = Vec::with_capacity(rank * rank);
        for a in 0..rank {
            for b in 0..rank {
                shifts.push((0..geom.real_dims()).map(|d| twist.entry_shift(a, b, d)).collect());
            }
        }
        Ok(Arc::new(Bundle { geom, twist, rank, shifts }))
    }

    pub fn trivial(geom: TorusGeometry, rank: usize) -> Arc<Self> {
        let dims = geom.real_dims();
        Self::new(geom, Twist::trivial(rank, dims)).expect("trivial twist is valid")
    }

    pub fn geom(&self) -> &TorusGeometry {
        &self.geom
    }
    pub fn twist(&self) -> &Twist {
        &self.twist
    }
    pub fn rank(&self) -> usize {
        self.rank
    }
    pub fn n(&self) -> usize {
        self.geom.complex_dim()
    }
    /// Quasi-periodicity shift of matrix entry `e = a·r + b`.
    pub fn entry_shift(&self, e: usize) -> &[f64] {
        &self.shifts[e]
    }
    pub fn entry_is_periodic(&self, e: usize) -> bool {
        self.shifts[e].iter().all(|&s| s == 0.0)
    }
}

/// Bitmasks of the `k`-element subsets of `{0..n}`, in lexicographic order.
pub fn index_sets(n: usize, k: usize) -> Vec<u8> {
    let mut out: Vec<u8> = (0u8..(1u8 << n)).filter(|m| m.count_ones() as usize == k).collect();
    out.sort_by_key(|&m| (0..n).filter(|&i| m & (1 << i) != 0).collect::<Vec<_>>());
    out
}

/// Component labels `(I, J)` of bidegree `(p, q)`.
pub fn basis(n: usize, p: usize, q: usize) -> Vec<(u8, u8)> {
    let js = index_sets(n, q);
    index_sets(n, p)
        .into_iter()
        .flat_map(|i| js.iter().map(move |&j| (i, j)))
        .collect()
}

pub fn comp_index(n: usize, p: usize, q: usize, i: u8, j: u8) -> usize {
    basis(n, p, q)
        .iter()
        .position(|&c| c == (i, j))
        .expect("component label belongs to bidegree")
}

/// Number of elements of `mask` strictly below `a`.
pub fn count_below(mask: u8, a: usize) -> u32 {
    (mask & ((1u8 << a) - 1)).count_ones()
}

/// Number of elements of `mask` strictly above `a`.
pub fn count_above(mask: u8, a: usize) -> u32 {
    (mask >> (a + 1)).count_ones()
}

/// `(−1)^k`
pub fn parity(k: u32) -> f64 {
    if k.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Sign of `dz^I ∧ dz^K` relative to `dz^{I∪K}` in increasing order, or
/// `None` when the sets intersect.
fn merge_sign(i: u8, k: u8) -> Option<f64> {
    if i & k != 0 {
        return None;
    }
    let mut inv = 0;
    for a in 0..8 {
        if k & (1 << a) != 0 {
            inv += count_above(i, a);
        }
    }
    Some(parity(inv))
}

fn bits(mask: u8) -> Vec<usize> {
    (0..8).filter(|&a| mask & (1 << a) != 0).collect()
}

fn sub_det(m: &dyn Fn(usize, usize) -> C64, rows: &[usize], cols: &[usize]) -> C64 {
    match rows.len() {
        0 => ONE,
        1 => m(rows[0], cols[0]),
        2 => m(rows[0], cols[0]) * m(rows[1], cols[1]) - m(rows[0], cols[1]) * m(rows[1], cols[0]),
        _ => unreachable!("complex dimension is at most 2"),
    }
}

/// Pointwise inner products of basis forms: entry `(c, c')` is
/// `⟨dz^I ∧ dz̄^J, dz^{I'} ∧ dz̄^{J'}⟩`, built from `⟨dz^α, dz^γ⟩ = g^{γ̄α}`
/// and `⟨dz̄^β, dz̄^δ⟩ = g^{β̄δ}`.
pub fn form_metric(geom: &TorusGeometry, p: usize, q: usize) -> DMatrix<C64> {
    let n = geom.complex_dim();
    let b = basis(n, p, q);
    let k1 = |a: usize, c: usize| geom.metric_inv(c, a);
    let k0 = |a: usize, c: usize| geom.metric_inv(a, c);
    DMatrix::from_fn(b.len(), b.len(), |x, y| {
        let (i, j) = b[x];
        let (i2, j2) = b[y];
        sub_det(&k1, &bits(i), &bits(i2)) * sub_det(&k0, &bits(j), &bits(j2))
    })
}

/// Real power of the hermitian positive form metric, transposed so that it
/// acts on component vectors: `(K^t x)_{c'} = Σ_c (Kᵗ)^t_{c'c} x_c`.
fn form_metric_power(geom: &TorusGeometry, p: usize, q: usize, t: f64) -> DMatrix<C64> {
    let k = form_metric(geom, p, q).transpose();
    let dim = k.nrows();
    let flat: Vec<C64> = (0..dim).flat_map(|i| (0..dim).map(move |j| (i, j))).map(|(i, j)| k[(i, j)]).collect();
    linalg::to_dmatrix(&linalg::hermitian_function(&flat, dim, |v| v.powf(t)), dim)
}

/// Hermitian fiber metric `h` with the pointwise functions of it that the
/// inner products and adjoints need.
#[derive(Clone, Debug)]
pub struct FiberMetric {
    h: FormField,
    hinv: FormField,
    sqrt: FormField,
    sqrt_inv: FormField,
    identity: bool,
}

impl FiberMetric {
    pub fn identity(bundle: &Arc<Bundle>) -> Self {
        let id = FormField::identity(bundle);
        FiberMetric {
            h: id.clone(),
            hinv: id.clone(),
            sqrt: id.clone(),
            sqrt_inv: id,
            identity: true,
        }
    }

    pub fn new(h: FormField) -> Result<Self> {
        if h.bidegree() != (0, 0) {
            return Err(LabError::Bidegree { expected: "(0,0)".into(), p: h.p, q: h.q });
        }
        let r = h.rank();
        let mut hinv = h.zeros_like();
        let mut sqrt = h.zeros_like();
        let mut sqrt_inv = h.zeros_like();
        for pt in 0..h.geom().npts() {
            let m = h.at(0, pt);
            let (vals, _) = linalg::hermitian_eigen(m, r);
            if vals[0] <= 0.0 || !vals[0].is_finite() {
                return Err(LabError::NotPositive(pt));
            }
            hinv.at_mut(0, pt).copy_from_slice(&linalg::hermitian_function(m, r, |v| 1.0 / v));
            sqrt.at_mut(0, pt).copy_from_slice(&linalg::hermitian_function(m, r, f64::sqrt));
            sqrt_inv.at_mut(0, pt).copy_from_slice(&linalg::hermitian_function(m, r, |v| 1.0 / v.sqrt()));
        }
        Ok(FiberMetric { h, hinv, sqrt, sqrt_inv, identity: false })
    }

    pub fn h(&self) -> &FormField {
        &self.h
    }
    pub fn hinv(&self) -> &FormField {
        &self.hinv
    }
    pub fn is_identity(&self) -> bool {
        self.identity
    }

    /// Pointwise `h⁻¹ a† h`, the adjoint of an endomorphism.
    pub fn adjoint_at(&self, a: &[C64], pt: usize, r: usize) -> Vec<C64> {
        let ad = linalg::dagger(a, r);
        if self.identity {
            return ad;
        }
        let t = linalg::mul(self.hinv.at(0, pt), &ad, r);
        linalg::mul(&t, self.h.at(0, pt), r)
    }

    /// Conjugation `x ↦ h^t x h^{−t}` for `t ∈ {1, −1, ½, −½}`.
    fn conjugate_at(&self, x: &[C64], pt: usize, r: usize, t: f64) -> Vec<C64> {
        if self.identity {
            return x.to_vec();
        }
        let (left, right) = if t == 1.0 {
            (&self.h, &self.hinv)
        } else if t == -1.0 {
            (&self.hinv, &self.h)
        } else if t == 0.5 {
            (&self.sqrt, &self.sqrt_inv)
        } else {
            (&self.sqrt_inv, &self.sqrt)
        };
        let tmp = linalg::mul(left.at(0, pt), x, r);
        linalg::mul(&tmp, right.at(0, pt), r)
    }
}

#[derive(Clone, Debug)]
pub struct FormField {
    bundle: Arc<Bundle>,
    p: usize,
    q: usize,
    comps: Vec<Vec<C64>>,
}

impl FormField {
    pub fn zeros(bundle: &Arc<Bundle>, p: usize, q: usize) -> Result<Self> {
        let n = bundle.n();
        if p > n || q > n {
            return Err(LabError::DegreeOverflow { p, q, n });
        }
        let len = bundle.geom().npts() * bundle.rank() * bundle.rank();
        let count = basis(n, p, q).len();
        Ok(FormField {
            bundle: bundle.clone(),
            p,
            q,
            comps: vec![vec![ZERO; len]; count],
        })
    }

    pub fn zeros_like(&self) -> Self {
        FormField {
            bundle: self.bundle.clone(),
            p: self.p,
            q: self.q,
            comps: vec![vec![ZERO; self.comps[0].len()]; self.comps.len()],
        }
    }

    pub fn identity(bundle: &Arc<Bundle>) -> Self {
        let mut f = Self::zeros(bundle, 0, 0).expect("(0,0) always fits");
        let r = bundle.rank();
        for pt in 0..bundle.geom().npts() {
            let m = f.at_mut(0, pt);
            for a in 0..r {
                m[a * r + a] = ONE;
            }
        }
        f
    }

    /// Field with a single component `comp` equal to `m · f(x)` where `f` is a
    /// scalar function of the grid index.
    pub fn from_scalar(bundle: &Arc<Bundle>, p: usize, q: usize, comp: usize, m: &[C64], f: impl Fn(usize) -> C64) -> Result<Self> {
        let mut out = Self::zeros(bundle, p, q)?;
        if comp >= out.comps.len() {
            return Err(LabError::Shape(format!("component {comp} out of range")));
        }
        let rr = bundle.rank() * bundle.rank();
        if m.len() != rr {
            return Err(LabError::Shape("matrix size does not match rank".into()));
        }
        for pt in 0..bundle.geom().npts() {
            let v = f(pt);
            for (dst, &src) in out.at_mut(comp, pt).iter_mut().zip(m) {
                *dst = src * v;
            }
        }
        Ok(out)
    }

    /// Constant matrix `m` in component `comp`.
    pub fn constant(bundle: &Arc<Bundle>, p: usize, q: usize, comp: usize, m: &[C64]) -> Result<Self> {
        Self::from_scalar(bundle, p, q, comp, m, |_| ONE)
    }

    /// Seeded random band-limited field with Fourier modes `|k_d| ≤ max_mode`
    /// in every real direction; twisted entries carry their shift.
    pub fn random<R: Rng>(bundle: &Arc<Bundle>, p: usize, q: usize, max_mode: usize, rng: &mut R) -> Result<Self> {
        let mut out = Self::zeros(bundle, p, q)?;
        let geom = bundle.geom();
        let rr = bundle.rank() * bundle.rank();
        let dims = geom.real_dims();
        let mut buf = vec![ZERO; geom.npts()];
        for c in 0..out.comps.len() {
            for e in 0..rr {
                for (idx, v) in buf.iter_mut().enumerate() {
                    let mi = geom.multi_index(idx);
                    let inside = (0..dims).all(|d| matches!(geom.signed_mode(mi[d]), Some(m) if m.unsigned_abs() as usize <= max_mode));
                    *v = if inside {
                        C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                    } else {
                        ZERO
                    };
                }
                geom.inverse_coefficients(&mut buf, bundle.entry_shift(e));
                // unit-size pointwise values regardless of the mode count
                let scale = geom.npts() as f64 / ((2 * max_mode + 1) as f64).powi(dims as i32).sqrt();
                out.set_entry(c, e, buf.iter().map(|v| v * scale));
            }
        }
        Ok(out)
    }

    pub fn bundle(&self) -> &Arc<Bundle> {
        &self.bundle
    }
    pub fn geom(&self) -> &TorusGeometry {
        self.bundle.geom()
    }
    pub fn rank(&self) -> usize {
        self.bundle.rank()
    }
    pub fn bidegree(&self) -> (usize, usize) {
        (self.p, self.q)
    }
    pub fn degree(&self) -> usize {
        self.p + self.q
    }
    pub fn ncomps(&self) -> usize {
        self.comps.len()
    }
    pub fn labels(&self) -> Vec<(u8, u8)> {
        basis(self.bundle.n(), self.p, self.q)
    }
    pub fn comp(&self, c: usize) -> &[C64] {
        &self.comps[c]
    }
    pub fn comp_mut(&mut self, c: usize) -> &mut [C64] {
        &mut self.comps[c]
    }
    pub fn at(&self, c: usize, pt: usize) -> &[C64] {
        let rr = self.rank() * self.rank();
        &self.comps[c][pt * rr..(pt + 1) * rr]
    }
    pub fn at_mut(&mut self, c: usize, pt: usize) -> &mut [C64] {
        let rr = self.rank() * self.rank();
        &mut self.comps[c][pt * rr..(pt + 1) * rr]
    }

    /// Values of matrix entry `e` of component `c` across the grid.
    pub fn entry(&self, c: usize, e: usize) -> Vec<C64> {
        let rr = self.rank() * self.rank();
        self.comps[c].iter().skip(e).step_by(rr).copied().collect()
    }

    pub fn set_entry(&mut self, c: usize, e: usize, vals: impl Iterator<Item = C64>) {
        let rr = self.rank() * self.rank();
        for (dst, v) in self.comps[c].iter_mut().skip(e).step_by(rr).zip(vals) {
            *dst = v;
        }
    }

    pub fn same_shape(&self, other: &FormField) -> Result<()> {
        if !Arc::ptr_eq(&self.bundle, &other.bundle) && (self.geom() != other.geom() || self.rank() != other.rank()) {
            return Err(LabError::Shape("fields live on different bundles".into()));
        }
        if self.bidegree() != other.bidegree() {
            return Err(LabError::Shape(format!(
                "bidegree ({},{}) vs ({},{})",
                self.p, self.q, other.p, other.q
            )));
        }
        Ok(())
    }

    /// `self += c · other`
    pub fn axpy(&mut self, c: C64, other: &FormField) -> Result<()> {
        self.same_shape(other)?;
        for (a, b) in self.comps.iter_mut().zip(&other.comps) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += c * y;
            }
        }
        Ok(())
    }

    pub fn scale(&mut self, c: C64) {
        for a in &mut self.comps {
            for x in a.iter_mut() {
                *x *= c;
            }
        }
    }

    pub fn scaled(&self, c: C64) -> Self {
        let mut out = self.clone();
        out.scale(c);
        out
    }

    pub fn plus(&self, other: &FormField) -> Result<Self> {
        let mut out = self.clone();
        out.axpy(ONE, other)?;
        Ok(out)
    }

    pub fn minus(&self, other: &FormField) -> Result<Self> {
        let mut out = self.clone();
        out.axpy(-ONE, other)?;
        Ok(out)
    }

    /// Largest pointwise Frobenius norm over grid points, summed over
    /// components in quadrature.
    pub fn sup_norm(&self) -> f64 {
        let rr = self.rank() * self.rank();
        let npts = self.geom().npts();
        (0..npts)
            .map(|pt| {
                self.comps
                    .iter()
                    .map(|c| c[pt * rr..(pt + 1) * rr].iter().map(|v| v.norm_sqr()).sum::<f64>())
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// Component-wise partial derivative `∂_α` (or `∂_ᾱ` when `conj`).
    pub fn derivative(&self, alpha: usize, conj: bool) -> Result<Self> {
        let n = self.bundle.n();
        if alpha >= n {
            return Err(LabError::Direction { index: alpha, n });
        }
        let mut out = self.zeros_like();
        let rr = self.rank() * self.rank();
        let geom = self.geom();
        for c in 0..self.comps.len() {
            for e in 0..rr {
                let mut buf = self.entry(c, e);
                geom.apply_symbol(&mut buf, self.bundle.entry_shift(e), |k| {
                    TorusGeometry::derivative_symbol(k, alpha, conj)
                });
                out.set_entry(c, e, buf.into_iter());
            }
        }
        Ok(out)
    }

    /// Apply a Fourier symbol entry-wise (with twist shifts) to every
    /// component.
    pub fn apply_symbol(&self, symbol: impl Fn(&[f64]) -> C64 + Copy) -> Self {
        let mut out = self.zeros_like();
        let rr = self.rank() * self.rank();
        for c in 0..self.comps.len() {
            for e in 0..rr {
                let mut buf = self.entry(c, e);
                self.geom().apply_symbol(&mut buf, self.bundle.entry_shift(e), symbol);
                out.set_entry(c, e, buf.into_iter());
            }
        }
        out
    }

    /// Form wedge combined with the matrix product, `χ ∧ ψ`.
    pub fn wedge_mul(&self, other: &FormField) -> Result<Self> {
        let n = self.bundle.n();
        let (p, q) = (self.p + other.p, self.q + other.q);
        if p > n || q > n {
            return Err(LabError::DegreeOverflow { p, q, n });
        }
        let mut out = FormField::zeros(&self.bundle, p, q)?;
        let r = self.rank();
        let npts = self.geom().npts();
        let target = basis(n, p, q);
        for (c1, &(i1, j1)) in self.labels().iter().enumerate() {
            for (c2, &(i2, j2)) in other.labels().iter().enumerate() {
                let (Some(si), Some(sj)) = (merge_sign(i1, i2), merge_sign(j1, j2)) else {
                    continue;
                };
                // dz^{I1} dz̄^{J1} dz^{I2} dz̄^{J2} = (−1)^{|J1||I2|} dz^{I1 I2} dz̄^{J1 J2}
                let sign = si * sj * parity(j1.count_ones() * i2.count_ones());
                let tc = target.iter().position(|&t| t == (i1 | i2, j1 | j2)).expect("merged label");
                let coef = C64::new(sign, 0.0);
                for pt in 0..npts {
                    let rr = r * r;
                    let a = &self.comps[c1][pt * rr..(pt + 1) * rr];
                    let b = &other.comps[c2][pt * rr..(pt + 1) * rr];
                    linalg::mul_acc(a, b, coef, &mut out.comps[tc][pt * rr..(pt + 1) * rr], r);
                }
            }
        }
        Ok(out)
    }

    /// Graded bracket `[χ ∧ ψ] = χ ∧ ψ − (−1)^{deg χ · deg ψ} ψ ∧ χ`.
    pub fn bracket(&self, other: &FormField) -> Result<Self> {
        let mut out = self.wedge_mul(other)?;
        let back = other.wedge_mul(self)?;
        let s = parity((self.degree() * other.degree()) as u32);
        out.axpy(C64::new(-s, 0.0), &back)?;
        Ok(out)
    }

    /// Metric contraction `Λ`: removes one `dz^α` and one `dz̄^β` with weight
    /// `g^{β̄α}`; on `(1,1)`-forms this is `g^{β̄α} v_{αβ̄}`. Each factor is
    /// taken from the front of its own block, `dz^α ∧ dz^I ∧ dz̄^β ∧ dz̄^J`.
    pub fn lambda_contract(&self) -> Result<Self> {
        if self.p == 0 || self.q == 0 {
            return Err(LabError::Bidegree { expected: "(p,q) with p,q ≥ 1".into(), p: self.p, q: self.q });
        }
        let n = self.bundle.n();
        let geom = self.geom();
        let mut out = FormField::zeros(&self.bundle, self.p - 1, self.q - 1)?;
        let src = self.labels();
        for (tc, &(i, j)) in out.labels().iter().enumerate() {
            for alpha in 0..n {
                if i & (1 << alpha) != 0 {
                    continue;
                }
                for beta in 0..n {
                    if j & (1 << beta) != 0 {
                        continue;
                    }
                    let sc = src.iter().position(|&l| l == (i | 1 << alpha, j | 1 << beta)).expect("label");
                    let sign = parity(count_below(i, alpha) + count_below(j, beta));
                    let w = geom.metric_inv(beta, alpha) * sign;
                    for (d, s) in out.comps[tc].iter_mut().zip(&self.comps[sc]) {
                        *d += w * s;
                    }
                }
            }
        }
        Ok(out)
    }

    /// `Λ̃[v, ψ] = −g^{δ̄α} [v_{αβ̄}, ψ_δ̄] dz̄^β` for `v ∈ C^{1,1}` and
    /// `ψ ∈ C^{0,1}`; contracts only the indicated pair.
    pub fn tilde_lambda_bracket(v: &FormField, psi: &FormField) -> Result<Self> {
        if v.bidegree() != (1, 1) {
            return Err(LabError::Bidegree { expected: "(1,1)".into(), p: v.p, q: v.q });
        }
        if psi.bidegree() != (0, 1) {
            return Err(LabError::Bidegree { expected: "(0,1)".into(), p: psi.p, q: psi.q });
        }
        let n = v.bundle.n();
        let r = v.rank();
        let rr = r * r;
        let geom = v.geom();
        let mut out = FormField::zeros(&v.bundle, 0, 1)?;
        for beta in 0..n {
            for alpha in 0..n {
                let vc = comp_index(n, 1, 1, 1 << alpha, 1 << beta);
                for delta in 0..n {
                    let w = -geom.metric_inv(delta, alpha);
                    for pt in 0..geom.npts() {
                        let a = &v.comps[vc][pt * rr..(pt + 1) * rr];
                        let b = &psi.comps[delta][pt * rr..(pt + 1) * rr];
                        linalg::commutator_acc(a, b, w, &mut out.comps[beta][pt * rr..(pt + 1) * rr], r);
                    }
                }
            }
        }
        Ok(out)
    }

    /// Adjoint form `f*` of bidegree `(q,p)`: the matrix part is replaced by
    /// its `h`-adjoint and `dz^I ∧ dz̄^J` by its conjugate, reordered as
    /// `(−1)^{pq} dz^J ∧ dz̄^I`.
    pub fn star(&self, h: &FiberMetric) -> Self {
        let n = self.bundle.n();
        let mut out = FormField::zeros(&self.bundle, self.q, self.p).expect("swapped bidegree fits");
        let r = self.rank();
        let sign = C64::new(parity((self.p * self.q) as u32), 0.0);
        let tgt = out.labels();
        for (c, &(i, j)) in self.labels().iter().enumerate() {
            let tc = tgt.iter().position(|&l| l == (j, i)).expect("label");
            for pt in 0..self.geom().npts() {
                let adj = h.adjoint_at(self.at(c, pt), pt, r);
                for (d, s) in out.at_mut(tc, pt).iter_mut().zip(adj) {
                    *d = sign * s;
                }
            }
        }
        let _ = n;
        out
    }

    /// `M^t x` for the operator `M` that realizes the hermitian pairing as a
    /// Frobenius pairing: `⟨x, y⟩ = Σ ∫ tr((Mx) y†)`.
    pub fn metric_power(&self, h: &FiberMetric, t: f64) -> Self {
        let k = form_metric_power(self.geom(), self.p, self.q, t);
        let r = self.rank();
        let rr = r * r;
        let nc = self.comps.len();
        let mut out = self.zeros_like();
        for pt in 0..self.geom().npts() {
            let conj: Vec<Vec<C64>> = (0..nc).map(|c| h.conjugate_at(self.at(c, pt), pt, r, t)).collect();
            for tc in 0..nc {
                let dst = &mut out.comps[tc][pt * rr..(pt + 1) * rr];
                for (sc, m) in conj.iter().enumerate() {
                    let w = k[(tc, sc)];
                    if w == ZERO {
                        continue;
                    }
                    for (d, s) in dst.iter_mut().zip(m) {
                        *d += w * s;
                    }
                }
            }
        }
        out
    }

    /// Plain Frobenius/ℓ² pairing `Σ ∫ tr(x y†)` without the form metric.
    pub fn frobenius_inner(&self, other: &FormField) -> C64 {
        let mut s = ZERO;
        for (a, b) in self.comps.iter().zip(&other.comps) {
            for (x, y) in a.iter().zip(b) {
                s += x * y.conj();
            }
        }
        s * self.geom().weight()
    }

    /// L² pairing `⟨x, y⟩ = ∫ Σ ⟨dz^c, dz^{c'}⟩ tr(x_c y_{c'}*) g dV`.
    pub fn inner(&self, other: &FormField, h: &FiberMetric) -> Result<C64> {
        self.same_shape(other)?;
        Ok(self.metric_power(h, 1.0).frobenius_inner(other))
    }

    pub fn norm(&self, h: &FiberMetric) -> f64 {
        self.inner(self, h).map(|v| v.re.max(0.0).sqrt()).unwrap_or(0.0)
    }

    /// Pointwise trace of every component.
    pub fn trace(&self, c: usize) -> Vec<C64> {
        let r = self.rank();
        (0..self.geom().npts()).map(|pt| linalg::trace(self.at(c, pt), r)).collect()
    }

    /// `∫ tr(x_c) g dV`
    pub fn integral_trace(&self, c: usize) -> C64 {
        self.trace(c).iter().sum::<C64>() * self.geom().weight()
    }

    /// `(χ − tr(χ)/r · id, tr(χ)/r · id)`
    pub fn trace_free_split(&self) -> (Self, Self) {
        let r = self.rank();
        let mut scalar = self.zeros_like();
        for c in 0..self.comps.len() {
            for pt in 0..self.geom().npts() {
                let t = linalg::trace(self.at(c, pt), r) / r as f64;
                let m = scalar.at_mut(c, pt);
                for a in 0..r {
                    m[a * r + a] = t;
                }
            }
        }
        let free = self.minus(&scalar).expect("same shape");
        (free, scalar)
    }

    /// Apply `f` to the matrix of every component at every point.
    pub fn map_points(&self, mut f: impl FnMut(usize, usize, &[C64]) -> Vec<C64>) -> Self {
        let mut out = self.zeros_like();
        for c in 0..self.comps.len() {
            for pt in 0..self.geom().npts() {
                let v = f(c, pt, self.at(c, pt));
                out.at_mut(c, pt).copy_from_slice(&v);
            }
        }
        out
    }

    /// Matrix product with a `(0,0)` field on the left or right.
    pub fn mul_function(&self, f: &FormField, left: bool) -> Self {
        let r = self.rank();
        self.map_points(|_, pt, m| if left { linalg::mul(f.at(0, pt), m, r) } else { linalg::mul(m, f.at(0, pt), r) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::I;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn unit(rank: usize) -> Arc<Bundle> {
        Bundle::trivial(TorusGeometry::unit_curve(16), rank)
    }

    #[test]
    fn component_counts_are_binomial() {
        assert_eq!(basis(2, 1, 1).len(), 4);
        assert_eq!(basis(2, 2, 0).len(), 1);
        assert_eq!(basis(2, 1, 2).len(), 2);
        assert_eq!(basis(1, 1, 1).len(), 1);
        assert_eq!(index_sets(2, 1), vec![1, 2]);
    }

    #[test]
    fn inner_product_anchors() {
        let b = unit(2);
        let id = FormField::identity(&b);
        let h = FiberMetric::identity(&b);
        assert!((id.inner(&id, &h).unwrap() - c(2.0)).norm() < 1e-13);
        let b1 = unit(1);
        let h1 = FiberMetric::identity(&b1);
        let dz = FormField::constant(&b1, 1, 0, 0, &[ONE]).unwrap();
        assert!((dz.inner(&dz, &h1).unwrap() - ONE).norm() < 1e-13);
        let geom = b1.geom().clone();
        let wave = FormField::from_scalar(&b1, 0, 0, 0, &[ONE], |pt| C64::from_polar(1.0, 2.0 * std::f64::consts::PI * geom.coords(pt)[0])).unwrap();
        let one = FormField::identity(&b1);
        assert!(wave.inner(&one, &h1).unwrap().norm() < 1e-13);
    }

    #[test]
    fn bracket_of_nilpotents_is_diagonal() {
        let b = unit(2);
        let a = FormField::constant(&b, 1, 0, 0, &[c(0.0), c(1.0), c(0.0), c(0.0)]).unwrap();
        let bb = FormField::constant(&b, 0, 1, 0, &[c(0.0), c(0.0), c(1.0), c(0.0)]).unwrap();
        let br = a.bracket(&bb).unwrap();
        assert_eq!(br.bidegree(), (1, 1));
        let m = br.at(0, 5);
        assert!((m[0] - ONE).norm() < 1e-15 && (m[3] + ONE).norm() < 1e-15);
        assert!(m[1].norm() < 1e-15 && m[2].norm() < 1e-15);
        // dz ∧ dz = 0 in one dimension
        assert!(a.bracket(&a).is_err());
    }

    #[test]
    fn lambda_normalization() {
        let geom = TorusGeometry::new(&[(1.0, 1.0), (1.0, 1.0)], &[c(2.0), C64::new(0.3, 0.2), C64::new(0.3, -0.2), c(1.0)], 4).unwrap();
        let b = Bundle::trivial(geom.clone(), 2);
        // Σ g_{αβ̄} dz^α ∧ dz̄^β · id
        let mut v = FormField::zeros(&b, 1, 1).unwrap();
        for (k, &(i, j)) in v.labels().iter().enumerate() {
            let a = i.trailing_zeros() as usize;
            let be = j.trailing_zeros() as usize;
            let g = geom.metric(a, be);
            for pt in 0..geom.npts() {
                let m = v.at_mut(k, pt);
                m[0] = g;
                m[3] = g;
            }
        }
        let l = v.lambda_contract().unwrap();
        let m = l.at(0, 0);
        assert!((m[0] - c(2.0)).norm() < 1e-14 && (m[3] - c(2.0)).norm() < 1e-14);
        // the Kähler form itself carries the extra factor √−1
        let omega = v.scaled(I);
        assert!((omega.lambda_contract().unwrap().at(0, 0)[0] - 2.0 * I).norm() < 1e-14);
    }

    #[test]
    fn star_of_nilpotent() {
        let b = unit(2);
        let h = FiberMetric::identity(&b);
        let a = FormField::constant(&b, 1, 0, 0, &[c(0.0), c(1.0), c(0.0), c(0.0)]).unwrap();
        let s = a.star(&h);
        assert_eq!(s.bidegree(), (0, 1));
        assert_eq!(s.at(0, 3), &[c(0.0), c(0.0), c(1.0), c(0.0)]);
        assert!(FormField::identity(&b).star(&h).minus(&FormField::identity(&b)).unwrap().sup_norm() == 0.0);
    }

    #[test]
    fn star_is_involutive_and_antihomomorphic_for_brackets() {
        let geom = TorusGeometry::square(2, 1.0, 1.0, 4).unwrap();
        let b = Bundle::trivial(geom, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let hraw = FormField::random(&b, 0, 0, 1, &mut rng).unwrap();
        let hpos = hraw.map_points(|_, _, m| {
            let mut p = linalg::mul(m, &linalg::dagger(m, 2), 2);
            p[0] += c(1.0);
            p[3] += c(1.0);
            p
        });
        let h = FiberMetric::new(hpos).unwrap();
        let x = FormField::random(&b, 1, 1, 1, &mut rng).unwrap();
        let back = x.star(&h).star(&h);
        assert!(back.minus(&x).unwrap().sup_norm() < 1e-12 * x.sup_norm());
        let a = FormField::random(&b, 1, 0, 1, &mut rng).unwrap();
        let bb = FormField::random(&b, 0, 1, 1, &mut rng).unwrap();
        let lhs = a.bracket(&bb).unwrap().star(&h);
        let rhs = a.star(&h).bracket(&bb.star(&h)).unwrap();
        assert!(lhs.plus(&rhs).unwrap().sup_norm() <= 1e-12 * (1.0 + lhs.sup_norm()));
    }

    #[test]
    fn random_round_trip_through_coefficients() {
        let b = unit(2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = FormField::random(&b, 0, 1, 4, &mut rng).unwrap();
        let geom = b.geom();
        for e in 0..4 {
            let orig = f.entry(0, e);
            let mut buf = orig.clone();
            geom.forward_coefficients(&mut buf, b.entry_shift(e));
            geom.inverse_coefficients(&mut buf, b.entry_shift(e));
            let err = orig.iter().zip(&buf).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
            assert!(err < 1e-12);
        }
    }
}
