//! Flat Kähler tori and the Fourier machinery used for every spatial
//! derivative.
//!
//! A torus of complex dimension `n` is `ℂⁿ / Λ` with the rectangular lattice
//! generated by `L_α` (real direction) and `i·M_α` (imaginary direction).
//! Real coordinate `d = 2α` is `x_α`, `d = 2α + 1` is `y_α`, and
//! `z^α = x_α + i y_α`. The Kähler form is `ω = i g_{αβ̄} dz^α ∧ dz̄^β` with a
//! constant hermitian positive-definite `g`, so the volume element
//! `ωⁿ/n!` integrates to `2ⁿ det(g) ∏ L_α M_α`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{LabError, Result};

pub type C64 = Complex64;

pub const I: C64 = C64::new(0.0, 1.0);

/// Factors of automorphy for the bundle: a constant diagonal unitary
/// `diag(e^{2πi θ_a[d]})` per real lattice direction `d`. An `End(E)` entry
/// `(a, b)` picks up `e^{2πi (θ_a[d] − θ_b[d])}` across period `d`.
#[derive(Clone, Debug, PartialEq)]
pub struct Twist {
    phases: Vec<Vec<f64>>,
}

impl Twist {
    pub fn trivial(rank: usize, real_dims: usize) -> Self {
        Twist {
            phases: vec![vec![0.0; real_dims]; rank],
        }
    }

    /// `phases[a][d]` in units of full turns.
    pub fn new(phases: Vec<Vec<f64>>) -> Result<Self> {
        let dims = phases.first().map(|p| p.len()).unwrap_or(0);
        if phases.iter().any(|p| p.len() != dims) {
            return Err(LabError::Geometry("ragged twist phase table".into()));
        }
        Ok(Twist { phases })
    }

    pub fn rank(&self) -> usize {
        self.phases.len()
    }

    pub fn is_trivial(&self) -> bool {
        self.phases.iter().flatten().all(|&p| p == 0.0)
    }

    pub fn phases(&self) -> &[Vec<f64>] {
        &self.phases
    }

    /// Quasi-periodicity shift of entry `(a, b)` along real direction `d`.
    pub fn entry_shift(&self, a: usize, b: usize, d: usize) -> f64 {
        self.phases[a][d] - self.phases[b][d]
    }
}

#[derive(Clone)]
pub struct TorusGeometry {
    n: usize,
    periods: Vec<f64>,
    metric: Vec<C64>,
    metric_inv: Vec<C64>,
    grid: usize,
    npts: usize,
    volume: f64,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for TorusGeometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TorusGeometry")
            .field("n", &self.n)
            .field("periods", &self.periods)
            .field("metric", &self.metric)
            .field("grid", &self.grid)
            .field("volume", &self.volume)
            .finish()
    }
}

impl PartialEq for TorusGeometry {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n
            && self.periods == other.periods
            && self.metric == other.metric
            && self.grid == other.grid
    }
}

impl TorusGeometry {
    /// `periods` lists `(L_α, M_α)` for each complex direction; `metric` is
    /// the row-major `n × n` matrix `g_{αβ̄}`.
    pub fn new(periods: &[(f64, f64)], metric: &[C64], grid: usize) -> Result<Self> {
        let n = periods.len();
        if !(1..=2).contains(&n) {
            return Err(LabError::Geometry(format!("complex dimension {n} not in {{1,2}}")));
        }
        if metric.len() != n * n {
            return Err(LabError::Geometry("metric must be n×n".into()));
        }
        if grid < 4 || !grid.is_power_of_two() {
            return Err(LabError::Geometry(format!("grid size {grid} must be a power of two ≥ 4")));
        }
        if periods.iter().any(|&(l, m)| !(l > 0.0 && m > 0.0 && l.is_finite() && m.is_finite())) {
            return Err(LabError::Geometry("lattice periods must be positive".into()));
        }
        for a in 0..n {
            for b in 0..n {
                if (metric[a * n + b] - metric[b * n + a].conj()).norm() > 1e-14 * (1.0 + metric[a * n + b].norm()) {
                    return Err(LabError::Geometry("metric is not hermitian".into()));
                }
            }
        }
        let det = match n {
            1 => metric[0].re,
            _ => (metric[0] * metric[3] - metric[1] * metric[2]).re,
        };
        if metric[0].re <= 0.0 || det <= 0.0 {
            return Err(LabError::Geometry("metric is not positive definite".into()));
        }
        let metric_inv = match n {
            1 => vec![C64::new(1.0 / metric[0].re, 0.0)],
            _ => {
                let d = metric[0] * metric[3] - metric[1] * metric[2];
                vec![metric[3] / d, -metric[1] / d, -metric[2] / d, metric[0] / d]
            }
        };
        let flat: Vec<f64> = periods.iter().flat_map(|&(l, m)| [l, m]).collect();
        let npts = grid.pow(2 * n as u32);
        let volume = 2f64.powi(n as i32) * det * flat.iter().product::<f64>();
        let mut planner = FftPlanner::new();
        Ok(TorusGeometry {
            n,
            periods: flat,
            metric: metric.to_vec(),
            metric_inv,
            grid,
            npts,
            volume,
            fft: planner.plan_fft_forward(grid),
            ifft: planner.plan_fft_inverse(grid),
        })
    }

    /// Square torus `L = M = side` with metric `g = scale·id`.
    pub fn square(n: usize, side: f64, scale: f64, grid: usize) -> Result<Self> {
        let mut metric = vec![C64::new(0.0, 0.0); n * n];
        for a in 0..n {
            metric[a * n + a] = C64::new(scale, 0.0);
        }
        Self::new(&vec![(side, side); n], &metric, grid)
    }

    /// One-dimensional torus with `g = 1` and total volume one.
    pub fn unit_curve(grid: usize) -> Self {
        Self::new(&[(1.0, 0.5)], &[C64::new(1.0, 0.0)], grid).expect("valid unit curve")
    }

    pub fn complex_dim(&self) -> usize {
        self.n
    }
    pub fn real_dims(&self) -> usize {
        2 * self.n
    }
    pub fn grid(&self) -> usize {
        self.grid
    }
    pub fn npts(&self) -> usize {
        self.npts
    }
    pub fn volume(&self) -> f64 {
        self.volume
    }
    pub fn periods(&self) -> &[f64] {
        &self.periods
    }
    /// `g_{αβ̄}`
    pub fn metric(&self, a: usize, b: usize) -> C64 {
        self.metric[a * self.n + b]
    }
    /// Inverse matrix entries `(G⁻¹)_{ab}`; the inverse metric `g^{β̄α}` is
    /// `metric_inv(β, α)`.
    pub fn metric_inv(&self, a: usize, b: usize) -> C64 {
        self.metric_inv[a * self.n + b]
    }
    pub fn metric_det(&self) -> f64 {
        match self.n {
            1 => self.metric[0].re,
            _ => (self.metric[0] * self.metric[3] - self.metric[1] * self.metric[2]).re,
        }
    }
    /// Quadrature weight of one grid point.
    pub fn weight(&self) -> f64 {
        self.volume / self.npts as f64
    }

    pub fn multi_index(&self, mut idx: usize) -> Vec<usize> {
        let dims = self.real_dims();
        let mut out = vec![0; dims];
        for d in (0..dims).rev() {
            out[d] = idx % self.grid;
            idx /= self.grid;
        }
        out
    }

    /// Real coordinates of grid point `idx`.
    pub fn coords(&self, idx: usize) -> Vec<f64> {
        self.multi_index(idx)
            .iter()
            .enumerate()
            .map(|(d, &j)| j as f64 * self.periods[d] / self.grid as f64)
            .collect()
    }

    /// Complex coordinates `z^α` of grid point `idx`.
    pub fn z(&self, idx: usize) -> Vec<C64> {
        let x = self.coords(idx);
        (0..self.n).map(|a| C64::new(x[2 * a], x[2 * a + 1])).collect()
    }

    /// Signed Fourier mode of index `j`, or `None` at the Nyquist frequency.
    pub fn signed_mode(&self, j: usize) -> Option<i64> {
        let n = self.grid as i64;
        let j = j as i64;
        if j == n / 2 {
            None
        } else if j < n / 2 {
            Some(j)
        } else {
            Some(j - n)
        }
    }

    /// Fourier multiplier of `∂_{z^α}` (or `∂_{z̄^α}` when `conj`).
    pub fn derivative_symbol(k: &[f64], alpha: usize, conj: bool) -> C64 {
        let (kx, ky) = (k[2 * alpha], k[2 * alpha + 1]);
        if conj {
            C64::new(-0.5 * ky, 0.5 * kx)
        } else {
            C64::new(0.5 * ky, 0.5 * kx)
        }
    }

    /// Symbol of the flat `∂̄*∂̄` on functions: `g^{β̄α} k_α k̄_β`-type
    /// quadratic form, non-negative.
    pub fn laplace_symbol(&self, k: &[f64]) -> f64 {
        let n = self.n;
        let mut s = C64::new(0.0, 0.0);
        for a in 0..n {
            for b in 0..n {
                let ma = Self::derivative_symbol(k, a, true);
                let mb = Self::derivative_symbol(k, b, true);
                // ⟨dz̄^a, dz̄^b⟩ = (G⁻¹)_{ab}
                s += self.metric_inv(a, b) * ma * mb.conj();
            }
        }
        s.re.max(0.0)
    }

    fn fft_axis(&self, buf: &mut [C64], axis: usize, inverse: bool, line: &mut Vec<C64>) {
        let n = self.grid;
        let dims = self.real_dims();
        let stride = n.pow((dims - 1 - axis) as u32);
        let block = stride * n;
        let plan = if inverse { &self.ifft } else { &self.fft };
        line.resize(n, C64::new(0.0, 0.0));
        for outer in (0..self.npts).step_by(block) {
            for inner in 0..stride {
                let base = outer + inner;
                for j in 0..n {
                    line[j] = buf[base + j * stride];
                }
                plan.process(line);
                for j in 0..n {
                    buf[base + j * stride] = line[j];
                }
            }
        }
    }

    /// In-place multi-dimensional FFT over all real directions. The inverse
    /// transform includes the `1/npts` normalization.
    pub fn fft_nd(&self, buf: &mut [C64], inverse: bool) {
        assert_eq!(buf.len(), self.npts);
        let mut line = Vec::with_capacity(self.grid);
        for axis in 0..self.real_dims() {
            self.fft_axis(buf, axis, inverse, &mut line);
        }
        if inverse {
            let s = 1.0 / self.npts as f64;
            buf.iter_mut().for_each(|v| *v *= s);
        }
    }

    /// Per-axis shifted angular wavenumbers, indexed `[d][j]`. The Nyquist
    /// mode is kept as `−N/2`: fields are complex, and zeroing it would put
    /// spurious checkerboard modes into the kernel of every Laplacian.
    pub fn axis_wavenumbers(&self, shift: &[f64]) -> Vec<Vec<f64>> {
        (0..self.real_dims())
            .map(|d| {
                (0..self.grid)
                    .map(|j| {
                        let mode = self.signed_mode(j).map_or(-(self.grid as f64) / 2.0, |m| m as f64);
                        2.0 * PI * (mode + shift[d]) / self.periods[d]
                    })
                    .collect()
            })
            .collect()
    }

    /// Visit every grid point with its shifted wavenumber vector, in flat
    /// index order.
    pub fn for_each_wavenumber(&self, shift: &[f64], mut f: impl FnMut(usize, &[f64])) {
        let table = self.axis_wavenumbers(shift);
        let dims = self.real_dims();
        let mut mi = [0usize; 4];
        let mut k = [0.0f64; 4];
        for idx in 0..self.npts {
            for d in 0..dims {
                k[d] = table[d][mi[d]];
            }
            f(idx, &k[..dims]);
            for d in (0..dims).rev() {
                mi[d] += 1;
                if mi[d] < self.grid {
                    break;
                }
                mi[d] = 0;
            }
        }
    }

    fn twist_phase(&self, shift: &[f64], inverse: bool, buf: &mut [C64]) {
        if shift.iter().all(|&s| s == 0.0) {
            return;
        }
        let sign = if inverse { 1.0 } else { -1.0 };
        let dims = self.real_dims();
        let tables: Vec<Vec<C64>> = (0..dims)
            .map(|d| {
                (0..self.grid)
                    .map(|j| C64::from_polar(1.0, sign * 2.0 * PI * shift[d] * j as f64 / self.grid as f64))
                    .collect()
            })
            .collect();
        let mut mi = [0usize; 4];
        for v in buf.iter_mut() {
            let mut ph = C64::new(1.0, 0.0);
            for d in 0..dims {
                ph *= tables[d][mi[d]];
            }
            *v *= ph;
            for d in (0..dims).rev() {
                mi[d] += 1;
                if mi[d] < self.grid {
                    break;
                }
                mi[d] = 0;
            }
        }
    }

    /// Apply a Fourier multiplier to a (possibly quasi-periodic) grid
    /// function. `symbol` receives the shifted angular wavenumbers.
    pub fn apply_symbol(&self, buf: &mut [C64], shift: &[f64], symbol: impl Fn(&[f64]) -> C64) {
        self.twist_phase(shift, false, buf);
        self.fft_nd(buf, false);
        self.for_each_wavenumber(shift, |idx, k| buf[idx] *= symbol(k));
        self.fft_nd(buf, true);
        self.twist_phase(shift, true, buf);
    }

    /// Forward transform of a quasi-periodic function: Fourier coefficients
    /// of its periodic factor.
    pub fn forward_coefficients(&self, buf: &mut [C64], shift: &[f64]) {
        self.twist_phase(shift, false, buf);
        self.fft_nd(buf, false);
    }

    pub fn inverse_coefficients(&self, buf: &mut [C64], shift: &[f64]) {
        self.fft_nd(buf, true);
        self.twist_phase(shift, true, buf);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn volume_matches_lattice_and_metric() {
        let g = TorusGeometry::new(&[(1.0, 2.0), (0.5, 1.5)], &[
            C64::new(2.0, 0.0),
            C64::new(0.3, 0.4),
            C64::new(0.3, -0.4),
            C64::new(1.0, 0.0),
        ], 4)
        .unwrap();
        let det = 2.0 - 0.25;
        let expect = 4.0 * det * 1.0 * 2.0 * 0.5 * 1.5;
        assert!((g.volume() - expect).abs() <= 1e-12 * expect);
        let quad: f64 = (0..g.npts()).map(|_| g.weight()).sum();
        assert!((quad - expect).abs() <= 1e-12 * expect);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(TorusGeometry::square(3, 1.0, 1.0, 8).is_err());
        assert!(TorusGeometry::square(1, 1.0, 1.0, 12).is_err());
        assert!(TorusGeometry::new(&[(1.0, 1.0)], &[C64::new(-1.0, 0.0)], 8).is_err());
        assert!(TorusGeometry::new(
            &[(1.0, 1.0), (1.0, 1.0)],
            &[C64::new(1.0, 0.0), C64::new(0.0, 1.0), C64::new(0.0, 1.0), C64::new(1.0, 0.0)],
            8
        )
        .is_err());
    }

    #[test]
    fn fft_round_trip() {
        let g = TorusGeometry::square(2, 1.0, 1.0, 8).unwrap();
        let orig: Vec<C64> = (0..g.npts()).map(|i| C64::new((i as f64).sin(), (i as f64 * 0.7).cos())).collect();
        let mut buf = orig.clone();
        g.fft_nd(&mut buf, false);
        g.fft_nd(&mut buf, true);
        let err = orig.iter().zip(&buf).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-13);
    }

    #[test]
    fn twisted_derivative_of_antiperiodic_mode() {
        let g = TorusGeometry::square(1, 1.0, 1.0, 16).unwrap();
        // f(x) = exp(iπx) is anti-periodic in x; shift 1/2 in direction 0.
        let mut buf: Vec<C64> = (0..g.npts()).map(|i| C64::from_polar(1.0, PI * g.coords(i)[0])).collect();
        let orig = buf.clone();
        g.apply_symbol(&mut buf, &[0.5, 0.0], |k| C64::new(0.0, k[0]));
        for (a, b) in buf.iter().zip(&orig) {
            assert!((a - I * PI * b).norm() < 1e-12);
        }
    }
}
