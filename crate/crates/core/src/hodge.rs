//! Hodge theory of the complex: numerical kernel of `□`, harmonic
//! projection and Green operator.
//!
//! The kernel is found by inverse iteration on a trial space of lowest
//! Fourier modes (one per component and matrix entry) plus a few random
//! vectors, followed by Rayleigh-Ritz. The Green operator is a deflated
//! preconditioned conjugate gradient in the hermitian inner product.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::complex::{ComplexElement, Dolbeault};
use crate::error::{LabError, Result};
use crate::form::{Bundle, FiberMetric, FormField};
use crate::geometry::C64;
use crate::linalg::{self, ONE, ZERO};

#[derive(Clone, Debug)]
pub struct HodgeOptions {
    /// Relative residual at which the conjugate gradient stops.
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    /// Kernel threshold relative to the grid-scale norm of `□`.
    pub kernel_rel: f64,
    pub inverse_iterations: usize,
    pub random_trials: usize,
    pub seed: u64,
}

impl Default for HodgeOptions {
    fn default() -> Self {
        HodgeOptions {
            cg_tol: 1e-10,
            cg_max_iter: 2000,
            kernel_rel: 1e-8,
            inverse_iterations: 3,
            random_trials: 2,
            seed: 0x5eed,
        }
    }
}

/// Outcome of one conjugate-gradient solve.
#[derive(Clone, Debug)]
pub struct SolveStats {
    pub iterations: usize,
    pub residual: f64,
}

/// Numerical harmonic space in one degree.
#[derive(Clone, Debug)]
pub struct HarmonicSpace {
    pub degree: usize,
    /// Orthonormal basis of the detected kernel.
    pub basis: Vec<ComplexElement>,
    /// All Rayleigh-Ritz values on the trial space, ascending.
    pub ritz: Vec<f64>,
    pub threshold: f64,
    /// First Ritz value above the threshold divided by the threshold.
    pub gap_ratio: f64,
}

impl HarmonicSpace {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }
}

/// Solver for one configuration.
pub struct Hodge<'a> {
    dol: &'a Dolbeault,
    opts: HodgeOptions,
    sigma_max: f64,
    sigma_min: f64,
}

impl<'a> Hodge<'a> {
    pub fn new(dol: &'a Dolbeault, opts: HodgeOptions) -> Self {
        let bundle = dol.cfg().bundle();
        let geom = bundle.geom();
        let mut sigma_max: f64 = 0.0;
        let mut sigma_min = f64::INFINITY;
        for e in 0..bundle.rank() * bundle.rank() {
            geom.for_each_wavenumber(bundle.entry_shift(e), |_, k| {
                let s = geom.laplace_symbol(k);
                sigma_max = sigma_max.max(s);
                if s > 1e-12 {
                    sigma_min = sigma_min.min(s);
                }
            });
        }
        // zeroth-order terms of □ scale with |φ|² and |A|²
        let cfg = dol.cfg();
        let lower = cfg.phi().sup_norm().powi(2) + cfg.a().sup_norm().powi(2);
        Hodge { dol, opts, sigma_max: sigma_max + lower, sigma_min }
    }

    pub fn options(&self) -> &HodgeOptions {
        &self.opts
    }

    pub fn metric(&self) -> &FiberMetric {
        self.dol.metric()
    }

    /// Kernel threshold `τ_ker`.
    pub fn threshold(&self) -> f64 {
        self.opts.kernel_rel * self.sigma_max
    }

    /// Grid-scale norm of `□` used for the threshold.
    pub fn operator_scale(&self) -> f64 {
        self.sigma_max
    }

    fn precondition(&self, x: &ComplexElement, mu: f64) -> ComplexElement {
        let h = self.metric();
        let shift = mu + self.sigma_min;
        let geom = x.bundle().geom().clone();
        let half = x.metric_power(h, 0.5);
        let smoothed = half.map_parts(|f| f.apply_symbol(|k| C64::new(1.0 / (geom.laplace_symbol(k) + shift), 0.0)));
        smoothed.metric_power(h, -0.5)
    }

    fn project_out(&self, x: &mut ComplexElement, basis: &[ComplexElement]) -> Result<()> {
        let h = self.metric();
        for v in basis {
            let c = x.inner(v, h)?;
            x.axpy(-c, v)?;
        }
        Ok(())
    }

    /// Solve `(□ + μ) x = b` on the orthogonal complement of `deflate`.
    pub fn solve(&self, b: &ComplexElement, mu: f64, deflate: &[ComplexElement]) -> Result<(ComplexElement, SolveStats)> {
        let h = self.metric();
        let mut rhs = b.clone();
        self.project_out(&mut rhs, deflate)?;
        let bnorm = rhs.norm(h);
        let mut x = rhs.zeros_like();
        if bnorm == 0.0 {
            return Ok((x, SolveStats { iterations: 0, residual: 0.0 }));
        }
        let apply = |v: &ComplexElement| -> Result<ComplexElement> {
            let mut out = self.dol.laplacian(v)?;
            if mu != 0.0 {
                out.axpy(C64::new(mu, 0.0), v)?;
            }
            Ok(out)
        };
        let mut r = rhs.clone();
        let mut z = self.precondition(&r, mu);
        self.project_out(&mut z, deflate)?;
        let mut p = z.clone();
        let mut rz = r.inner(&z, h)?.re;
        let mut res = 1.0;
        for it in 0..self.opts.cg_max_iter {
            let ap = apply(&p)?;
            let pap = p.inner(&ap, h)?.re;
            if pap <= 0.0 {
                return Err(LabError::NoConvergence { iterations: it, residual: res });
            }
            let alpha = rz / pap;
            x.axpy(C64::new(alpha, 0.0), &p)?;
            r.axpy(C64::new(-alpha, 0.0), &ap)?;
            self.project_out(&mut r, deflate)?;
            res = r.norm(h) / bnorm;
            if res <= self.opts.cg_tol {
                self.project_out(&mut x, deflate)?;
                return Ok((x, SolveStats { iterations: it + 1, residual: res }));
            }
            z = self.precondition(&r, mu);
            self.project_out(&mut z, deflate)?;
            let rz_new = r.inner(&z, h)?.re;
            let beta = rz_new / rz;
            rz = rz_new;
            let mut np = z.clone();
            np.axpy(C64::new(beta, 0.0), &p)?;
            p = np;
        }
        Err(LabError::NoConvergence { iterations: self.opts.cg_max_iter, residual: res })
    }

    fn trial_space(&self, bundle: &std::sync::Arc<Bundle>, degree: usize) -> Result<Vec<ComplexElement>> {
        let template = ComplexElement::zeros(bundle, degree)?;
        let geom = bundle.geom();
        let rr = bundle.rank() * bundle.rank();
        let mut out = Vec::new();
        for (slot, part) in template.parts().iter().enumerate() {
            for c in 0..part.ncomps() {
                for e in 0..rr {
                    let mut buf = vec![ZERO; geom.npts()];
                    buf[0] = C64::new(geom.npts() as f64, 0.0);
                    geom.inverse_coefficients(&mut buf, bundle.entry_shift(e));
                    let mut f = part.zeros_like();
                    f.set_entry(c, e, buf.into_iter());
                    let mut parts: Vec<FormField> = template.parts().to_vec();
                    parts[slot] = f;
                    out.push(ComplexElement::from_parts(bundle, degree, parts)?);
                }
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.opts.seed ^ degree as u64);
        for _ in 0..self.opts.random_trials {
            out.push(ComplexElement::random(bundle, degree, 2, &mut rng)?);
        }
        Ok(out)
    }

    /// Detect `ker □` in the given degree.
    pub fn harmonic_space(&self, degree: usize) -> Result<HarmonicSpace> {
        let bundle = self.dol.cfg().bundle().clone();
        let h = self.metric();
        let mu = 1e-3 * self.sigma_min;
        let mut trial = self.trial_space(&bundle, degree)?;
        for _ in 0..self.opts.inverse_iterations {
            for v in trial.iter_mut() {
                let (x, _) = self.solve(v, mu, &[])?;
                let nrm = x.norm(h);
                *v = if nrm > 0.0 { x.scaled(C64::new(1.0 / nrm, 0.0)) } else { x };
            }
        }
        let images: Vec<ComplexElement> = trial.iter().map(|v| self.dol.laplacian(v)).collect::<Result<_>>()?;
        let k = trial.len();
        let s = DMatrix::from_fn(k, k, |i, j| trial[j].inner(&trial[i], h).unwrap_or(ZERO));
        let a = DMatrix::from_fn(k, k, |i, j| images[j].inner(&trial[i], h).unwrap_or(ZERO));
        // orthonormalize the trial space, dropping dependent directions
        let sflat: Vec<C64> = (0..k).flat_map(|i| (0..k).map(move |j| (i, j))).map(|(i, j)| s[(i, j)]).collect();
        let (svals, svecs) = linalg::hermitian_eigen(&sflat, k);
        let smax = svals.last().copied().unwrap_or(0.0);
        let keep: Vec<usize> = (0..k).filter(|&i| svals[i] > 1e-12 * smax).collect();
        let w = DMatrix::from_fn(k, keep.len(), |i, j| svecs[(i, keep[j])] / svals[keep[j]].sqrt());
        let ar = w.adjoint() * &a * &w;
        let aflat: Vec<C64> = (0..keep.len()).flat_map(|i| (0..keep.len()).map(move |j| (i, j))).map(|(i, j)| ar[(i, j)]).collect();
        let (ritz, y) = linalg::hermitian_eigen(&aflat, keep.len());
        let coeffs = &w * y;
        let tau = self.threshold();
        let mut basis = Vec::new();
        for (col, &val) in ritz.iter().enumerate() {
            if val >= tau {
                break;
            }
            let mut v = trial[0].zeros_like();
            for (i, t) in trial.iter().enumerate() {
                v.axpy(coeffs[(i, col)], t)?;
            }
            basis.push(v);
        }
        // re-orthonormalize against round-off
        let mut ortho: Vec<ComplexElement> = Vec::new();
        for mut v in basis {
            self.project_out(&mut v, &ortho)?;
            let nrm = v.norm(h);
            ortho.push(v.scaled(C64::new(1.0 / nrm, 0.0)));
        }
        let next = ritz.get(ortho.len()).copied().unwrap_or(f64::INFINITY);
        Ok(HarmonicSpace { degree, basis: ortho, ritz, threshold: tau, gap_ratio: next / tau })
    }

    /// Orthogonal projection `H` onto a detected harmonic space.
    pub fn project(&self, x: &ComplexElement, space: &HarmonicSpace) -> Result<ComplexElement> {
        let h = self.metric();
        let mut out = x.zeros_like();
        for v in &space.basis {
            out.axpy(x.inner(v, h)?, v)?;
        }
        Ok(out)
    }

    /// Green operator: `□ G(x) = x − H(x)` with `G(x) ⊥ ker □`.
    pub fn green(&self, x: &ComplexElement, space: &HarmonicSpace) -> Result<(ComplexElement, SolveStats)> {
        self.solve(x, 0.0, &space.basis)
    }
}

/// Relative residual `‖□G(x) − (x − H(x))‖ / ‖x‖`.
pub fn green_residual(dol: &Dolbeault, hodge: &Hodge, x: &ComplexElement, gx: &ComplexElement, space: &HarmonicSpace) -> Result<f64> {
    let h = dol.metric();
    let mut lhs = dol.laplacian(gx)?;
    let hx = hodge.project(x, space)?;
    lhs.axpy(-ONE, x)?;
    lhs.axpy(ONE, &hx)?;
    Ok(lhs.norm(h) / x.norm(h).max(f64::MIN_POSITIVE))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauge::GaugeConfig;
    use crate::geometry::TorusGeometry;

    #[test]
    fn degree_zero_kernel_of_flat_rank_one_is_constants() {
        let b = Bundle::trivial(TorusGeometry::unit_curve(8), 1);
        let phi = FormField::constant(&b, 1, 0, 0, &[C64::new(0.7, 0.1)]).unwrap();
        let cfg = GaugeConfig::new(FormField::zeros(&b, 0, 1).unwrap(), phi, FiberMetric::identity(&b), 0.0).unwrap();
        let dol = Dolbeault::new(&cfg);
        let hodge = Hodge::new(&dol, HodgeOptions::default());
        let k0 = hodge.harmonic_space(0).unwrap();
        assert_eq!(k0.dim(), 1);
        assert!(k0.gap_ratio > 100.0);
        let k1 = hodge.harmonic_space(1).unwrap();
        assert_eq!(k1.dim(), 2);
        let k2 = hodge.harmonic_space(2).unwrap();
        assert_eq!(k2.dim(), 1);
    }

    #[test]
    fn green_operator_inverts_laplacian_off_kernel() {
        let b = Bundle::trivial(TorusGeometry::unit_curve(16), 2);
        let phi = FormField::constant(&b, 1, 0, 0, &[C64::new(1.0, 0.0), ZERO, ZERO, C64::new(-1.0, 0.0)]).unwrap();
        let cfg = GaugeConfig::new(FormField::zeros(&b, 0, 1).unwrap(), phi, FiberMetric::identity(&b), 0.0).unwrap();
        let dol = Dolbeault::new(&cfg);
        let hodge = Hodge::new(&dol, HodgeOptions::default());
        let space = hodge.harmonic_space(1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = ComplexElement::random(&b, 1, 4, &mut rng).unwrap();
        let (gx, stats) = hodge.green(&x, &space).unwrap();
        assert!(stats.iterations > 0);
        let res = green_residual(&dol, &hodge, &x, &gx, &space).unwrap();
        assert!(res < 1e-9, "{res}");
        let ggh = hodge.green(&hodge.project(&x, &space).unwrap(), &space).unwrap().0;
        assert!(ggh.norm(cfg.metric()) < 1e-9 * x.norm(cfg.metric()));
    }
}
