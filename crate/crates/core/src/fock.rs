//! Truncated Fock-space kernel: ladder operators, states, density matrices,
//! quadrature eigensystems, Wigner functions and fidelities.
//!
//! Quadratures follow `m_phi = m e^{-i phi} + m^dag e^{i phi}`, so the vacuum
//! has unit variance in every direction.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, TruncationWarning};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub const DEFAULT_DIM: usize = 40;

const DENSITY_TOL: f64 = 1e-10;
const TRUNCATION_TOL: f64 = 1e-6;

/// Number of Fock levels retained, basis `|0>..|dim-1>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct FockCutoff {
    dim: usize,
}

impl FockCutoff {
    pub fn new(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidCutoff(dim));
        }
        Ok(FockCutoff { dim })
    }

    pub fn dim(self) -> usize {
        self.dim
    }

    /// Working dimension used when building states that are truncated
    /// afterwards. Generous because a displacement applied to a squeezed state
    /// spreads its high Fock components well above the cutoff.
    pub fn padded(self) -> FockCutoff {
        FockCutoff {
            dim: 2 * self.dim + 20,
        }
    }
}

impl Default for FockCutoff {
    fn default() -> Self {
        FockCutoff { dim: DEFAULT_DIM }
    }
}

impl TryFrom<usize> for FockCutoff {
    type Error = Error;
    fn try_from(dim: usize) -> Result<Self> {
        FockCutoff::new(dim)
    }
}

impl From<FockCutoff> for usize {
    fn from(c: FockCutoff) -> usize {
        c.dim
    }
}

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

pub fn annihilation_operator(cutoff: FockCutoff) -> CMatrix {
    let d = cutoff.dim();
    let mut a = CMatrix::zeros(d, d);
    for n in 1..d {
        a[(n - 1, n)] = re((n as f64).sqrt());
    }
    a
}

pub fn creation_operator(cutoff: FockCutoff) -> CMatrix {
    annihilation_operator(cutoff).adjoint()
}

pub fn number_operator(cutoff: FockCutoff) -> CMatrix {
    CMatrix::from_diagonal(&CVector::from_fn(cutoff.dim(), |n, _| re(n as f64)))
}

pub fn parity_operator(cutoff: FockCutoff) -> CMatrix {
    CMatrix::from_diagonal(&CVector::from_fn(cutoff.dim(), |n, _| {
        re(if n % 2 == 0 { 1.0 } else { -1.0 })
    }))
}

/// `m e^{-i phi} + m^dag e^{i phi}`.
pub fn quadrature_operator(phi: f64, cutoff: FockCutoff) -> CMatrix {
    let a = annihilation_operator(cutoff);
    let e = Complex64::from_polar(1.0, -phi);
    a.map(|x| x * e) + a.adjoint().map(|x| x * e.conj())
}

fn displacement_generator(alpha: Complex64, dim: usize) -> CMatrix {
    let a = annihilation_operator(FockCutoff { dim });
    a.adjoint() * alpha - a * alpha.conj()
}

fn squeezing_generator(r: f64, psi: f64, dim: usize) -> CMatrix {
    let a = annihilation_operator(FockCutoff { dim });
    let a2 = &a * &a;
    let e = Complex64::from_polar(0.5 * r, -2.0 * psi);
    a2.map(|x| x * e) - a2.adjoint().map(|x| x * e.conj())
}

/// Compares low columns of the operator built in `dim` against a padded
/// construction; flags lost norm.
fn truncation_check(
    generator: impl Fn(usize) -> CMatrix,
    cutoff: FockCutoff,
    heuristic_violated: bool,
    what: &str,
) -> Option<TruncationWarning> {
    let d = cutoff.dim();
    let big = generator(d + (d / 2).max(20)).exp();
    let cols = (d / 8).max(1);
    let mut dev: f64 = 0.0;
    for n in 0..cols {
        let norm: f64 = (0..d).map(|k| big[(k, n)].norm_sqr()).sum::<f64>().sqrt();
        dev = dev.max((1.0 - norm).abs());
    }
    if dev > TRUNCATION_TOL || heuristic_violated {
        Some(TruncationWarning {
            what: what.to_string(),
            deviation: dev,
        })
    } else {
        None
    }
}

/// `exp(alpha m^dag - alpha^* m)` in the truncated space.
pub fn displacement_operator(
    alpha: Complex64,
    cutoff: FockCutoff,
) -> (CMatrix, Option<TruncationWarning>) {
    let d = cutoff.dim();
    let op = displacement_generator(alpha, d).exp();
    let heuristic = alpha.norm_sqr() > d as f64 / 4.0;
    let warn = truncation_check(
        |n| displacement_generator(alpha, n),
        cutoff,
        heuristic,
        &format!("displacement alpha = {alpha}"),
    );
    (op, warn)
}

/// `exp[(r/2)(e^{-2i psi} m^2 - e^{2i psi} m^dag^2)]` in the truncated space.
pub fn squeezing_operator(
    r: f64,
    psi: f64,
    cutoff: FockCutoff,
) -> (CMatrix, Option<TruncationWarning>) {
    let d = cutoff.dim();
    let op = squeezing_generator(r, psi, d).exp();
    let heuristic = (2.0 * r.abs()).exp() > d as f64 / 6.0;
    let warn = truncation_check(
        |n| squeezing_generator(r, psi, n),
        cutoff,
        heuristic,
        &format!("squeezing r = {r}"),
    );
    (op, warn)
}

/// Hermitian eigendecomposition with eigenvalues sorted ascending.
pub fn hermitian_eigen(m: &CMatrix) -> Result<(DVector<f64>, CMatrix)> {
    let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, 0).ok_or(Error::EigenFailure)?;
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = DVector::from_fn(n, |k, _| eig.eigenvalues[order[k]]);
    let vecs = CMatrix::from_fn(n, n, |r, k| eig.eigenvectors[(r, order[k])]);
    Ok((vals, vecs))
}

/// Real eigenbasis of `m_0 = m + m^dag`. Column `k` is normalised with a
/// positive vacuum component.
#[derive(Debug, Clone)]
pub struct QuadratureBasis {
    pub eigenvalues: Vec<f64>,
    pub vectors: DMatrix<f64>,
    /// Gauss-Hermite weights for the unit normal, `vectors[(0, k)]^2` in exact
    /// arithmetic but accurate to full relative precision at the outer nodes.
    pub weights: Vec<f64>,
}

/// `1 / sum_{i<d} h_i(x)^2` with `h_i = He_i / sqrt(i!)`.
fn christoffel(x: f64, d: usize) -> f64 {
    let (mut prev, mut cur) = (0.0, 1.0);
    let mut sum = 1.0;
    for i in 1..d {
        let next = (x * cur - ((i - 1) as f64).sqrt() * prev) / (i as f64).sqrt();
        prev = cur;
        cur = next;
        sum += cur * cur;
    }
    1.0 / sum
}

impl QuadratureBasis {
    pub fn new(cutoff: FockCutoff) -> Self {
        let d = cutoff.dim();
        let mut jac = DMatrix::<f64>::zeros(d, d);
        for n in 1..d {
            let s = (n as f64).sqrt();
            jac[(n - 1, n)] = s;
            jac[(n, n - 1)] = s;
        }
        let eig = SymmetricEigen::new(jac);
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = DMatrix::from_fn(d, d, |r, k| {
            let c = order[k];
            let sign = if eig.eigenvectors[(0, c)] < 0.0 {
                -1.0
            } else {
                1.0
            };
            sign * eig.eigenvectors[(r, c)]
        });
        let weights = eigenvalues.iter().map(|&x| christoffel(x, d)).collect();
        QuadratureBasis {
            eigenvalues,
            vectors,
            weights,
        }
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Gap between the two eigenvalues closest to zero.
    pub fn central_spacing(&self) -> f64 {
        let d = self.dim();
        let mid = d / 2;
        if d % 2 == 0 {
            self.eigenvalues[mid] - self.eigenvalues[mid - 1]
        } else {
            0.5 * (self.eigenvalues[mid + 1] - self.eigenvalues[mid - 1])
        }
    }

    /// Eigenvectors of `m_phi`: `U_phi = diag(e^{i phi n}) U_0`.
    pub fn rotated(&self, phi: f64) -> CMatrix {
        let d = self.dim();
        CMatrix::from_fn(d, d, |n, k| {
            Complex64::from_polar(self.vectors[(n, k)], phi * n as f64)
        })
    }
}

#[derive(Debug, Clone)]
pub struct QuadratureEigensystem {
    pub phi: f64,
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: CMatrix,
}

impl QuadratureEigensystem {
    /// `U f(Lambda) U^dag`.
    pub fn apply_function(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let u = &self.eigenvectors;
        let scaled = CMatrix::from_fn(u.nrows(), u.ncols(), |r, k| {
            u[(r, k)] * f(self.eigenvalues[k])
        });
        scaled * u.adjoint()
    }
}

pub fn quadrature_eigensystem(phi: f64, cutoff: FockCutoff) -> QuadratureEigensystem {
    let basis = QuadratureBasis::new(cutoff);
    QuadratureEigensystem {
        phi,
        eigenvalues: DVector::from_vec(basis.eigenvalues.clone()),
        eigenvectors: basis.rotated(phi),
    }
}

/// Normalised state vector in the Fock basis.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amplitudes: CVector,
}

impl PureState {
    /// Normalises `amplitudes`; fails on a zero or non-finite vector.
    pub fn new(amplitudes: CVector) -> Result<Self> {
        if amplitudes.len() < 2 {
            return Err(Error::InvalidCutoff(amplitudes.len()));
        }
        let norm = amplitudes.norm();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::InvalidParameter(
                "state vector has zero or non-finite norm".into(),
            ));
        }
        Ok(PureState {
            amplitudes: amplitudes / re(norm),
        })
    }

    pub fn basis(n: usize, cutoff: FockCutoff) -> Result<Self> {
        if n >= cutoff.dim() {
            return Err(Error::FockOutOfRange {
                n,
                dim: cutoff.dim(),
            });
        }
        let mut v = CVector::zeros(cutoff.dim());
        v[n] = re(1.0);
        Ok(PureState { amplitudes: v })
    }

    pub fn vacuum(cutoff: FockCutoff) -> Self {
        PureState::basis(0, cutoff).expect("vacuum fits every cutoff")
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &PureState) -> Complex64 {
        self.amplitudes.dotc(&other.amplitudes)
    }

    pub fn expectation(&self, op: &CMatrix) -> Complex64 {
        self.amplitudes.dotc(&(op * &self.amplitudes))
    }

    pub fn mean_m(&self) -> Complex64 {
        let d = self.dim();
        (1..d)
            .map(|n| self.amplitudes[n - 1].conj() * self.amplitudes[n] * (n as f64).sqrt())
            .sum()
    }

    pub fn populations(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|c| c.norm_sqr()).collect()
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix {
            elements: &self.amplitudes * self.amplitudes.adjoint(),
        }
    }
}

/// Deviations of a matrix from the density-matrix invariants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Validity {
    pub hermiticity: f64,
    pub trace_deviation: f64,
    pub min_eigenvalue: f64,
}

impl Validity {
    pub fn is_valid(&self, tol: f64) -> bool {
        self.hermiticity < tol && self.trace_deviation < tol && self.min_eigenvalue > -tol
    }
}

/// Hermitian, positive semidefinite, unit-trace matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    elements: CMatrix,
}

impl DensityMatrix {
    /// Validates the invariants at 1e-10.
    pub fn new(elements: CMatrix) -> Result<Self> {
        if !elements.is_square() {
            return Err(Error::DimensionMismatch {
                expected: elements.nrows(),
                found: elements.ncols(),
            });
        }
        if elements.nrows() < 2 {
            return Err(Error::InvalidCutoff(elements.nrows()));
        }
        let rho = DensityMatrix { elements };
        let v = rho.validity()?;
        if !v.is_valid(DENSITY_TOL) {
            return Err(Error::InvalidDensity(format!(
                "hermiticity {:e}, trace deviation {:e}, min eigenvalue {:e}",
                v.hermiticity, v.trace_deviation, v.min_eigenvalue
            )));
        }
        Ok(rho)
    }

    /// Wraps a matrix without checks; callers guarantee the invariants.
    pub fn from_matrix_unchecked(elements: CMatrix) -> Self {
        DensityMatrix { elements }
    }

    pub fn vacuum(cutoff: FockCutoff) -> Self {
        PureState::vacuum(cutoff).to_density()
    }

    /// `sum_i w_i |psi_i><psi_i|` with weights normalised to one.
    pub fn mixture(components: &[(f64, &PureState)]) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::InvalidParameter("empty mixture".into()))?;
        let d = first.1.dim();
        let total: f64 = components.iter().map(|(w, _)| *w).sum();
        if components.iter().any(|(w, _)| *w < 0.0) || total <= 0.0 {
            return Err(Error::InvalidParameter(
                "mixture weights must be nonnegative".into(),
            ));
        }
        let mut m = CMatrix::zeros(d, d);
        for (w, psi) in components {
            if psi.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: psi.dim(),
                });
            }
            m += psi.to_density().elements * re(*w / total);
        }
        Ok(DensityMatrix { elements: m })
    }

    pub fn elements(&self) -> &CMatrix {
        &self.elements
    }

    pub fn into_elements(self) -> CMatrix {
        self.elements
    }

    pub fn dim(&self) -> usize {
        self.elements.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.elements.trace().re
    }

    pub fn purity(&self) -> f64 {
        self.elements.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn populations(&self) -> Vec<f64> {
        (0..self.dim()).map(|n| self.elements[(n, n)].re).collect()
    }

    /// `Tr[rho m]`.
    pub fn mean_m(&self) -> Complex64 {
        (1..self.dim())
            .map(|n| self.elements[(n, n - 1)] * (n as f64).sqrt())
            .sum()
    }

    pub fn expectation(&self, op: &CMatrix) -> Complex64 {
        (&self.elements * op).trace()
    }

    pub fn eigen(&self) -> Result<(DVector<f64>, CMatrix)> {
        hermitian_eigen(&self.elements)
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.eigen()?.0[0])
    }

    pub fn validity(&self) -> Result<Validity> {
        let m = &self.elements;
        let hermiticity = (m - m.adjoint())
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max);
        let trace_deviation = (m.trace() - re(1.0)).norm();
        let sym = (m + m.adjoint()) * re(0.5);
        let min_eigenvalue = hermitian_eigen(&sym)?.0[0];
        Ok(Validity {
            hermiticity,
            trace_deviation,
            min_eigenvalue,
        })
    }

    pub fn validate(&self) -> Result<()> {
        DensityMatrix::new(self.elements.clone()).map(|_| ())
    }
}

/// `sqrt(<psi|rho|psi>)`.
pub fn fidelity(target: &PureState, rho: &DensityMatrix) -> Result<f64> {
    if target.dim() != rho.dim() {
        return Err(Error::DimensionMismatch {
            expected: target.dim(),
            found: rho.dim(),
        });
    }
    let e = target.expectation(rho.elements()).re;
    if e < -DENSITY_TOL {
        return Err(Error::NegativeExpectation(e));
    }
    Ok(e.clamp(0.0, 1.0).sqrt())
}

fn psd_sqrt(rho: &DensityMatrix) -> Result<CMatrix> {
    let (vals, vecs) = rho.eigen()?;
    let d = vals.len();
    // Round-off eigenvalues of a rank-deficient matrix would otherwise be
    // lifted to ~1e-8 by the square root.
    let floor = 1e-14 * vals[d - 1].abs().max(1.0);
    let scaled = CMatrix::from_fn(d, d, |r, k| {
        let v = if vals[k] > floor { vals[k].sqrt() } else { 0.0 };
        vecs[(r, k)] * v
    });
    Ok(&scaled * vecs.adjoint())
}

/// Uhlmann fidelity `Tr sqrt(sqrt(rho_a) rho_b sqrt(rho_a))`.
pub fn mixed_fidelity(rho_a: &DensityMatrix, rho_b: &DensityMatrix) -> Result<f64> {
    if rho_a.dim() != rho_b.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho_a.dim(),
            found: rho_b.dim(),
        });
    }
    // Trace norm of sqrt(rho_a) sqrt(rho_b); equal to the Uhlmann form.
    let prod = psd_sqrt(rho_a)? * psd_sqrt(rho_b)?;
    let svd = prod
        .try_svd(false, false, f64::EPSILON, 0)
        .ok_or(Error::EigenFailure)?;
    let f: f64 = svd.singular_values.iter().sum();
    Ok(f.clamp(0.0, 1.0))
}

/// Rectangular phase-space grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub p_min: f64,
    pub p_max: f64,
    pub np: usize,
}

impl GridSpec {
    pub fn square(half_width: f64, points: usize) -> Self {
        GridSpec {
            x_min: -half_width,
            x_max: half_width,
            nx: points,
            p_min: -half_width,
            p_max: half_width,
            np: points,
        }
    }

    fn axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        if n == 1 {
            return vec![lo];
        }
        let step = (hi - lo) / (n - 1) as f64;
        (0..n).map(|i| lo + step * i as f64).collect()
    }

    pub fn x_axis(&self) -> Vec<f64> {
        Self::axis(self.x_min, self.x_max, self.nx)
    }

    pub fn p_axis(&self) -> Vec<f64> {
        Self::axis(self.p_min, self.p_max, self.np)
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec::square(8.0, 161)
    }
}

pub const WIGNER_CONVENTION: &str =
    "x = m_0, p = m_{pi/2}; vacuum variance 1; integral over dx dp is 1; vacuum W(0,0) = 1/(2 pi)";

#[derive(Debug, Clone)]
pub struct WignerGrid {
    pub x_axis: Vec<f64>,
    pub p_axis: Vec<f64>,
    /// `values[(i, j)] = W(x_i, p_j)`.
    pub values: DMatrix<f64>,
    pub convention: &'static str,
}

impl WignerGrid {
    fn step(axis: &[f64]) -> f64 {
        if axis.len() > 1 {
            axis[1] - axis[0]
        } else {
            1.0
        }
    }

    pub fn cell_area(&self) -> f64 {
        Self::step(&self.x_axis) * Self::step(&self.p_axis)
    }

    /// Riemann sum of the grid values.
    pub fn integral(&self) -> f64 {
        self.values.sum() * self.cell_area()
    }

    pub fn min(&self) -> f64 {
        self.values.min()
    }

    pub fn max(&self) -> f64 {
        self.values.max()
    }

    /// Integral over `p` at each `x`, a density in `x`.
    pub fn x_marginal(&self) -> Vec<f64> {
        let dp = Self::step(&self.p_axis);
        (0..self.x_axis.len())
            .map(|i| self.values.row(i).sum() * dp)
            .collect()
    }

    /// Largest boundary magnitude relative to the peak magnitude.
    pub fn boundary_ratio(&self) -> f64 {
        let (nx, np) = self.values.shape();
        let peak = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if peak == 0.0 {
            return 0.0;
        }
        let mut edge: f64 = 0.0;
        for i in 0..nx {
            edge = edge
                .max(self.values[(i, 0)].abs())
                .max(self.values[(i, np - 1)].abs());
        }
        for j in 0..np {
            edge = edge
                .max(self.values[(0, j)].abs())
                .max(self.values[(nx - 1, j)].abs());
        }
        edge / peak
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "x,p,w")?;
        for (i, x) in self.x_axis.iter().enumerate() {
            for (j, p) in self.p_axis.iter().enumerate() {
                writeln!(out, "{:.16e},{:.16e},{:.16e}", x, p, self.values[(i, j)])?;
            }
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        self.write_csv(&mut w)?;
        w.flush()?;
        Ok(())
    }
}

/// Displaced-parity Wigner function at one phase-space point, using the
/// recurrence for `<n| D(beta) Pi D^dag(beta) |m>` with `beta = (x + i p)/2`.
fn wigner_point_with(rho: &CMatrix, x: f64, p: f64, wl: &mut [Complex64]) -> f64 {
    let d = rho.nrows();
    let a = Complex64::new(0.5 * x, 0.5 * p);
    let a2 = a * 2.0;
    let ac2 = a.conj() * 2.0;
    wl[0] = re((-2.0 * a.norm_sqr()).exp() / PI);
    let mut w = rho[(0, 0)].re * wl[0].re;
    for n in 1..d {
        wl[n] = a2 * wl[n - 1] / (n as f64).sqrt();
        w += 2.0 * (rho[(0, n)] * wl[n]).re;
    }
    for m in 1..d {
        let sm = (m as f64).sqrt();
        let mut temp = wl[m];
        wl[m] = (ac2 * temp - wl[m - 1] * sm) / sm;
        w += (rho[(m, m)] * wl[m]).re;
        for n in m + 1..d {
            let next = (a2 * wl[n - 1] - temp * sm) / (n as f64).sqrt();
            temp = wl[n];
            wl[n] = next;
            w += 2.0 * (rho[(m, n)] * wl[n]).re;
        }
    }
    0.5 * w
}

pub fn wigner_point(rho: &DensityMatrix, x: f64, p: f64) -> f64 {
    let mut wl = vec![Complex64::default(); rho.dim()];
    wigner_point_with(rho.elements(), x, p, &mut wl)
}

/// Wigner function on a grid; each row is computed independently so the
/// result does not depend on the thread count.
pub fn wigner(rho: &DensityMatrix, grid: &GridSpec) -> WignerGrid {
    let xs = grid.x_axis();
    let ps = grid.p_axis();
    let m = rho.elements();
    let rows: Vec<Vec<f64>> = xs
        .par_iter()
        .map(|&x| {
            let mut wl = vec![Complex64::default(); m.nrows()];
            ps.iter()
                .map(|&p| wigner_point_with(m, x, p, &mut wl))
                .collect()
        })
        .collect();
    let values = DMatrix::from_fn(xs.len(), ps.len(), |i, j| rows[i][j]);
    let out = WignerGrid {
        x_axis: xs,
        p_axis: ps,
        values,
        convention: WIGNER_CONVENTION,
    };
    let ratio = out.boundary_ratio();
    if ratio > 1e-3 {
        log::warn!("Wigner grid may not cover the state: boundary/peak = {ratio:e}");
    }
    out
}
