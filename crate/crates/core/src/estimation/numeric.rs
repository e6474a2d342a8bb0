//! Numerical Fisher information for a 1D periodic object: the single-photon
//! density operator in the position basis, the eigenbasis QFI formula, and
//! classical FI by direct quadrature over the mean image.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{FddError, Result};
use crate::field::RealField;

/// Eigenvalues below this fraction of the largest are treated as zero.
pub const SUPPORT_THRESHOLD: f64 = 1e-12;
/// Eigenvalue pairs closer than this use the symmetrized cross term.
pub const DEGENERACY_THRESHOLD: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    pub n: usize,
    /// Period L in nm (or any length unit used consistently).
    pub length: f64,
}

impl Grid1D {
    pub fn new(n: usize, length: f64) -> Result<Self> {
        if n < 16 || n % 2 != 0 {
            return Err(FddError::InvalidGrid(format!("1D grid needs an even n >= 16, got {n}")));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(FddError::InvalidGrid(format!("period must be positive, got {length}")));
        }
        Ok(Self { n, length })
    }

    pub fn dx(&self) -> f64 {
        self.length / self.n as f64
    }

    pub fn dk(&self) -> f64 {
        2.0 * PI / self.length
    }

    pub fn position(&self, i: usize) -> f64 {
        i as f64 * self.dx()
    }
}

/// Pupil given as a symmetric set of integer frequency bins.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pupil1D {
    pub bins: Vec<i64>,
}

impl Pupil1D {
    /// Bins -q..=q. The OTF is the triangle 1 - |s|/(2q+1), vanishing at
    /// k_c = (2q+1)·dk.
    pub fn centered(half_width: i64) -> Self {
        Self { bins: (-half_width..=half_width).collect() }
    }

    /// Central part |q| <= inner and the symmetric outer pair.
    pub fn split(&self, inner_half_width: i64) -> (Self, Self) {
        let (inner, outer): (Vec<i64>, Vec<i64>) = self.bins.iter().partition(|q| q.abs() <= inner_half_width);
        (Self { bins: inner }, Self { bins: outer })
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    /// Number of bin pairs separated by `shift`, divided by `full_count`.
    pub fn otf(&self, shift: i64, full_count: usize) -> f64 {
        let overlap = self.bins.iter().filter(|&&q| self.bins.contains(&(q + shift))).count();
        overlap as f64 / full_count as f64
    }

    /// Real amplitude PSF Ψ(x_i) = Σ_q cos(q·dk·x_i)/√(L·M) on the periodic grid,
    /// where M is the bin count of the full pupil.
    pub fn apsf(&self, grid: &Grid1D, full_count: usize) -> Vec<f64> {
        let norm = (grid.length * full_count as f64).sqrt();
        (0..grid.n)
            .map(|i| {
                let x = grid.position(i);
                self.bins.iter().map(|&q| (q as f64 * grid.dk() * x).cos()).sum::<f64>() / norm
            })
            .collect()
    }
}

/// Intensity a0 + Σ_l a_l cos(k_l x) + b_l sin(k_l x) with k_l = bins[l]·dk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample1D {
    pub a0: f64,
    pub bins: Vec<i64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl Sample1D {
    pub fn intensity(&self, grid: &Grid1D) -> Vec<f64> {
        (0..grid.n)
            .map(|i| {
                let x = grid.position(i);
                let mut v = self.a0;
                for (l, &q) in self.bins.iter().enumerate() {
                    let kx = q as f64 * grid.dk() * x;
                    v += self.a[l] * kx.cos() + self.b[l] * kx.sin();
                }
                v
            })
            .collect()
    }

    /// Parameter labels a_1..a_L, b_1..b_L.
    pub fn labels(&self) -> Vec<String> {
        let a = self.bins.iter().map(|q| format!("a{q}"));
        let b = self.bins.iter().map(|q| format!("b{q}"));
        a.chain(b).collect()
    }
}

/// Single-photon density operator over the grid points, with its
/// eigendecomposition.
#[derive(Debug, Clone)]
pub struct DensityOperator1D {
    pub matrix: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
    /// Columns are eigenvectors, in the order of `eigenvalues`.
    pub eigenvectors: DMatrix<f64>,
    /// Indices of eigenvalues above the support threshold.
    pub support: Vec<usize>,
}

impl DensityOperator1D {
    pub fn from_matrix(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(FddError::InvalidParameter("density matrix must be square".into()));
        }
        let asym = max_asymmetry(&matrix);
        if asym > 1e-10 {
            return Err(FddError::NonHermitianOperator { deviation: asym });
        }
        let trace = matrix.trace();
        if (trace - 1.0).abs() > 1e-8 {
            return Err(FddError::NotNormalized { integral: trace, tolerance: 1e-8 });
        }
        let eig = SymmetricEigen::new(matrix.clone());
        let eigenvalues: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        let lowest = eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        if lowest < -1e-10 {
            return Err(FddError::InvalidParameter(format!("density matrix has eigenvalue {lowest:e}")));
        }
        let top = eigenvalues.iter().copied().fold(0.0, f64::max);
        let support = (0..eigenvalues.len())
            .filter(|&i| eigenvalues[i] > SUPPORT_THRESHOLD * top)
            .collect();
        Ok(Self { matrix, eigenvalues, eigenvectors: eig.eigenvectors, support })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// ⟨ψ_l|D|ψ_m⟩ for l in the support (rows) and all m (columns).
    pub fn project(&self, derivative: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let asym = max_asymmetry(derivative);
        let scale = derivative.amax().max(1.0);
        if asym > 1e-10 * scale {
            return Err(FddError::NonHermitianOperator { deviation: asym });
        }
        let vs = self.eigenvectors.select_columns(&self.support);
        Ok(vs.transpose() * derivative * &self.eigenvectors)
    }
}

fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in i + 1..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Periodic displaced-APSF matrix P[m, j] = Ψ(x_m - x_j)·√dx, so that
/// ρ = P·diag(f·dx)·Pᵀ.
#[derive(Debug, Clone)]
pub struct Model1D {
    pub grid: Grid1D,
    pub pupil: Pupil1D,
    pub projector: DMatrix<f64>,
}

impl Model1D {
    pub fn new(grid: Grid1D, pupil: Pupil1D) -> Result<Self> {
        if pupil.is_empty() {
            return Err(FddError::EmptyMask);
        }
        let max_bin = pupil.bins.iter().map(|q| q.abs()).max().unwrap_or(0);
        if 2 * max_bin >= grid.n as i64 / 2 {
            return Err(FddError::GridTooSmall {
                cutoff: (2 * max_bin + 1) as f64 * grid.dk(),
                half_extent: grid.n as f64 / 2.0 * grid.dk(),
            });
        }
        let psi = pupil.apsf(&grid, pupil.len());
        let n = grid.n;
        let root = grid.dx().sqrt();
        let projector = DMatrix::from_fn(n, n, |m, j| psi[(m + n - j) % n] * root);
        Ok(Self { grid, pupil, projector })
    }

    /// Cutoff of the full pupil's OTF.
    pub fn cutoff(&self) -> f64 {
        let max_bin = self.pupil.bins.iter().map(|q| q.abs()).max().unwrap_or(0);
        (2 * max_bin + 1) as f64 * self.grid.dk()
    }

    pub fn density(&self, intensity: &[f64]) -> Result<DensityOperator1D> {
        let peak = intensity.iter().copied().fold(0.0, f64::max);
        if let Some(index) = intensity.iter().position(|&v| v < -1e-12 * peak.max(1.0)) {
            return Err(FddError::NegativeIntensity { index, value: intensity[index] });
        }
        let dx = self.grid.dx();
        let mut weighted = self.projector.clone();
        for (j, mut col) in weighted.column_iter_mut().enumerate() {
            col *= intensity[j] * dx;
        }
        let mut rho = weighted * self.projector.transpose();
        rho = (&rho + rho.transpose()) * 0.5;
        let trace = rho.trace();
        if trace <= 0.0 {
            return Err(FddError::NotNormalized { integral: trace, tolerance: 1e-8 });
        }
        rho /= trace;
        DensityOperator1D::from_matrix(rho)
    }

    /// Derivatives of ρ with respect to a_l (cos) then b_l (sin), already
    /// projected onto the eigenbasis (support rows × all columns).
    pub fn projected_mode_derivatives(&self, rho: &DensityOperator1D, bins: &[i64]) -> Vec<DMatrix<f64>> {
        let n = self.grid.n;
        let w = rho.eigenvectors.transpose() * &self.projector;
        let ws = w.select_rows(&rho.support);
        let wt = w.transpose();
        let dx = self.grid.dx();
        let mut out = Vec::with_capacity(2 * bins.len());
        for sine in [false, true] {
            for &q in bins {
                let k = q as f64 * self.grid.dk();
                let mut scaled = ws.clone();
                for j in 0..n {
                    let phase = k * self.grid.position(j);
                    let c = if sine { phase.sin() } else { phase.cos() } * dx;
                    scaled.column_mut(j).scale_mut(c);
                }
                out.push(scaled * &wt);
            }
        }
        out
    }
}

/// Build ρ for a 1D sample seen through `pupil`.
pub fn build_density_operator_1d(sample: &Sample1D, pupil: &Pupil1D, grid: &Grid1D) -> Result<DensityOperator1D> {
    let model = Model1D::new(*grid, pupil.clone())?;
    model.density(&sample.intensity(grid))
}

/// Dense symmetric Fisher matrix with parameter labels.
#[derive(Debug, Clone)]
pub struct FisherMatrix {
    pub labels: Vec<String>,
    pub matrix: DMatrix<f64>,
}

impl FisherMatrix {
    /// Symmetrizes after checking the asymmetry is within 1e-9 of the
    /// largest entry.
    pub fn new(labels: Vec<String>, matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() != labels.len() || !matrix.is_square() {
            return Err(FddError::GridMismatch(format!(
                "{} labels for a {}x{} matrix",
                labels.len(),
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let asym = max_asymmetry(&matrix);
        if asym > 1e-9 * matrix.amax().max(f64::MIN_POSITIVE) {
            return Err(FddError::NonHermitianOperator { deviation: asym });
        }
        let matrix = (&matrix + matrix.transpose()) * 0.5;
        Ok(Self { labels, matrix })
    }

    pub fn diagonal(&self) -> Vec<f64> {
        self.matrix.diagonal().iter().copied().collect()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.matrix.clone()).eigenvalues.min()
    }

    /// Σ off-diagonal² / Σ diagonal².
    pub fn offdiagonal_mass_ratio(&self) -> f64 {
        let total: f64 = self.matrix.iter().map(|v| v * v).sum();
        let diag: f64 = self.matrix.diagonal().iter().map(|v| v * v).sum();
        (total - diag) / diag
    }

    /// Diagonal of the inverse: the per-parameter Cramér-Rao bounds.
    pub fn crb_diagonal(&self) -> Result<Vec<f64>> {
        let inv = self
            .matrix
            .clone()
            .try_inverse()
            .ok_or(FddError::SingularWeights)?;
        Ok(inv.diagonal().iter().copied().collect())
    }

    pub fn sub(&self, other: &FisherMatrix) -> Result<FisherMatrix> {
        if self.labels != other.labels {
            return Err(FddError::GridMismatch("Fisher matrices over different parameters".into()));
        }
        Ok(FisherMatrix { labels: self.labels.clone(), matrix: &self.matrix - &other.matrix })
    }
}

/// Pair weights of the eigenbasis QFI formula, rows = support, columns = all.
fn qfi_pair_weights(rho: &DensityOperator1D) -> DMatrix<f64> {
    let xi = &rho.eigenvalues;
    let n = rho.dim();
    let mut in_support = vec![false; n];
    for &l in &rho.support {
        in_support[l] = true;
    }
    DMatrix::from_fn(rho.support.len(), n, |row, m| {
        let l = rho.support[row];
        let (xl, xm) = (xi[l], xi[m]);
        if m == l {
            return 1.0 / xl;
        }
        let gap = xl - xm;
        if gap.abs() < DEGENERACY_THRESHOLD {
            return if xl + xm > 0.0 { 2.0 / (xl + xm) } else { 0.0 };
        }
        let mut w = 4.0 * xl / (gap * gap);
        if in_support[m] {
            w -= 8.0 * xl * xm / ((xl + xm) * gap * gap);
        }
        w
    })
}

/// QFI matrix from derivatives already projected with
/// [`DensityOperator1D::project`]:
/// Σ_l (∂ξ_l)²/ξ_l + 4Σ_{l,m} ξ_l|⟨ψ_m|∂ψ_l⟩|² - 8Σ_{l,m∈S} ξ_lξ_m/(ξ_l+ξ_m)|⟨ψ_m|∂ψ_l⟩|².
pub fn qfi_from_projected(rho: &DensityOperator1D, projected: &[DMatrix<f64>], labels: Vec<String>) -> Result<FisherMatrix> {
    let weights = qfi_pair_weights(rho);
    let p = projected.len();
    let len = weights.len();
    let mut x = DMatrix::zeros(p, len);
    let mut y = DMatrix::zeros(p, len);
    for (i, d) in projected.iter().enumerate() {
        if d.shape() != weights.shape() {
            return Err(FddError::GridMismatch("projected derivative has the wrong shape".into()));
        }
        for (c, (v, w)) in d.iter().zip(weights.iter()).enumerate() {
            x[(i, c)] = *v;
            y[(i, c)] = v * w;
        }
    }
    FisherMatrix::new(labels, x * y.transpose())
}

/// QFI matrix from full position-basis derivatives ∂ρ/∂θ_i.
pub fn qfi_from_derivatives(rho: &DensityOperator1D, derivatives: &[DMatrix<f64>], labels: Vec<String>) -> Result<FisherMatrix> {
    let projected = derivatives.iter().map(|d| rho.project(d)).collect::<Result<Vec<_>>>()?;
    qfi_from_projected(rho, &projected, labels)
}

/// QFI of the Fourier coefficients of a 1D sample.
pub fn qfi_numeric_1d(model: &Model1D, rho: &DensityOperator1D, sample: &Sample1D) -> Result<FisherMatrix> {
    let projected = model.projected_mode_derivatives(rho, &sample.bins);
    qfi_from_projected(rho, &projected, sample.labels())
}

/// Classical FI per photon, ∬ (∂_i⟨g⟩)(∂_j⟨g⟩)/⟨g⟩ d r / N, by direct
/// quadrature with `cell` the pixel measure. The mean is floored at
/// 1e-12 of its peak.
pub fn fi_numeric(mean: &[f64], derivatives: &[Vec<f64>], cell: f64, photons: f64, labels: Vec<String>) -> Result<FisherMatrix> {
    let peak = mean.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(peak > 0.0) {
        let index = mean.iter().position(|v| !(*v > 0.0)).unwrap_or(0);
        return Err(FddError::NonPositiveMean { index });
    }
    let floor = 1e-12 * peak;
    let inv_sqrt: Vec<f64> = mean.iter().map(|&g| 1.0 / g.max(floor).sqrt()).collect();
    let p = derivatives.len();
    let n = mean.len();
    let mut z = DMatrix::zeros(p, n);
    for (i, d) in derivatives.iter().enumerate() {
        if d.len() != n {
            return Err(FddError::GridMismatch("derivative image length differs from the mean".into()));
        }
        for j in 0..n {
            z[(i, j)] = d[j] * inv_sqrt[j];
        }
    }
    let fi = (&z * z.transpose()) * (cell / photons);
    FisherMatrix::new(labels, fi)
}

/// [`fi_numeric`] over 2D fields.
pub fn fi_numeric_fields(mean: &RealField, derivatives: &[RealField], photons: f64, labels: Vec<String>) -> Result<FisherMatrix> {
    for d in derivatives {
        d.grid.ensure_same(&mean.grid, "derivative image")?;
    }
    let ds: Vec<Vec<f64>> = derivatives.iter().map(|d| d.values.clone()).collect();
    fi_numeric(&mean.values, &ds, mean.grid.cell_area(), photons, labels)
}

/// Mean image of one frame whose pupil has transfer `otf(shift)` and photon
/// weight `weight`: weight·[β(0)a0 + Σ β(k)(a cos + b sin)], plus its
/// derivatives with respect to a_l then b_l.
pub fn frame_mean_and_derivatives(
    sample: &Sample1D,
    grid: &Grid1D,
    otf: impl Fn(i64) -> f64,
    weight: f64,
) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = grid.n;
    let beta: Vec<f64> = sample.bins.iter().map(|&q| weight * otf(q)).collect();
    let dc = weight * otf(0);
    let mut mean = vec![dc * sample.a0; n];
    let mut cos_d = Vec::with_capacity(beta.len());
    let mut sin_d = Vec::with_capacity(beta.len());
    for (l, &q) in sample.bins.iter().enumerate() {
        let k = q as f64 * grid.dk();
        let c: Vec<f64> = (0..n).map(|i| beta[l] * (k * grid.position(i)).cos()).collect();
        let s: Vec<f64> = (0..n).map(|i| beta[l] * (k * grid.position(i)).sin()).collect();
        for i in 0..n {
            mean[i] += sample.a[l] * c[i] + sample.b[l] * s[i];
        }
        cos_d.push(c);
        sin_d.push(s);
    }
    cos_d.extend(sin_d);
    (mean, cos_d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small() -> (Grid1D, Pupil1D) {
        (Grid1D::new(64, 1.0).unwrap(), Pupil1D::centered(5))
    }

    fn smooth_sample(bins: &[i64], scale: f64) -> Sample1D {
        let a = bins.iter().map(|&q| scale * (0.3 + 0.1 * q as f64).sin()).collect();
        let b = bins.iter().map(|&q| scale * (0.7 * q as f64).cos()).collect();
        Sample1D { a0: 1.0, bins: bins.to_vec(), a, b }
    }

    /// Reference: Σ_{l,m: ξ_l+ξ_m>0} 2 D_lm D'_lm/(ξ_l+ξ_m) in the eigenbasis.
    fn qfi_reference(rho: &DensityOperator1D, derivs: &[DMatrix<f64>]) -> DMatrix<f64> {
        let v = &rho.eigenvectors;
        let full: Vec<DMatrix<f64>> = derivs.iter().map(|d| v.transpose() * d * v).collect();
        let xi = &rho.eigenvalues;
        let top = xi.iter().copied().fold(0.0, f64::max);
        let p = derivs.len();
        DMatrix::from_fn(p, p, |i, j| {
            let mut s = 0.0;
            for l in 0..xi.len() {
                for m in 0..xi.len() {
                    let den = xi[l] + xi[m];
                    if den > 1e-12 * top {
                        s += 2.0 * full[i][(l, m)] * full[j][(l, m)] / den;
                    }
                }
            }
            s
        })
    }

    fn full_derivatives(model: &Model1D, bins: &[i64]) -> Vec<DMatrix<f64>> {
        let g = model.grid;
        let p = &model.projector;
        let mut out = Vec::new();
        for sine in [false, true] {
            for &q in bins {
                let k = q as f64 * g.dk();
                let mut w = p.clone();
                for (j, mut col) in w.column_iter_mut().enumerate() {
                    let ph = k * g.position(j);
                    col *= if sine { ph.sin() } else { ph.cos() } * g.dx();
                }
                out.push(w * p.transpose());
            }
        }
        out
    }

    #[test]
    fn triangle_otf() {
        let p = Pupil1D::centered(24);
        assert_eq!(p.otf(0, 49), 1.0);
        assert!((p.otf(10, 49) - 39.0 / 49.0).abs() < 1e-15);
        assert_eq!(p.otf(49, 49), 0.0);
        let (inner, outer) = p.split(17);
        assert_eq!(inner.len() + outer.len(), 49);
        for s in -60..60 {
            assert!(inner.otf(s, 49) + outer.otf(s, 49) <= p.otf(s, 49) + 1e-15);
        }
    }

    #[test]
    fn apsf_unit_norm() {
        let (g, p) = small();
        let psi = p.apsf(&g, p.len());
        let norm: f64 = psi.iter().map(|v| v * v).sum::<f64>() * g.dx();
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn point_source_gives_pure_state() {
        let (g, p) = small();
        let model = Model1D::new(g, p).unwrap();
        let mut f = vec![0.0; g.n];
        f[7] = 1.0 / g.dx();
        let rho = model.density(&f).unwrap();
        assert_eq!(rho.support.len(), 1);
        let top = rho.eigenvalues.iter().copied().fold(0.0, f64::max);
        assert!((top - 1.0).abs() < 1e-10);
    }

    #[test]
    fn uniform_sample_unit_trace() {
        let (g, p) = small();
        let model = Model1D::new(g, p).unwrap();
        let rho = model.density(&vec![1.0; g.n]).unwrap();
        let sum: f64 = rho.eigenvalues.iter().sum();
        assert!((sum - 1.0).abs() < 1e-10);
        assert_eq!(rho.support.len(), 11);
    }

    #[test]
    fn negative_intensity_and_asymmetric_input_rejected() {
        let (g, p) = small();
        let model = Model1D::new(g, p).unwrap();
        let mut f = vec![1.0; g.n];
        f[3] = -0.5;
        assert!(matches!(model.density(&f), Err(FddError::NegativeIntensity { index: 3, .. })));
        let mut m = DMatrix::identity(4, 4) * 0.25;
        m[(0, 1)] = 0.1;
        assert!(matches!(DensityOperator1D::from_matrix(m), Err(FddError::NonHermitianOperator { .. })));
        let rho = model.density(&vec![1.0; g.n]).unwrap();
        let mut d = DMatrix::zeros(g.n, g.n);
        d[(0, 1)] = 1.0;
        assert!(qfi_from_derivatives(&rho, &[d], vec!["x".into()]).is_err());
    }

    #[test]
    fn eigenbasis_formula_matches_reference() {
        let (g, p) = small();
        let model = Model1D::new(g, p).unwrap();
        let s = smooth_sample(&[1, 2, 3, 4, 5, 7, 9], 0.08);
        let rho = model.density(&s.intensity(&g)).unwrap();
        let derivs = full_derivatives(&model, &s.bins);
        let ours = qfi_from_derivatives(&rho, &derivs, s.labels()).unwrap();
        let fast = qfi_numeric_1d(&model, &rho, &s).unwrap();
        let reference = qfi_reference(&rho, &derivs);
        let scale = reference.amax();
        assert!((&ours.matrix - &reference).amax() < 1e-8 * scale);
        assert!((&fast.matrix - &reference).amax() < 1e-8 * scale);
    }

    #[test]
    fn degenerate_spectrum_handled() {
        // uniform sample: eigenvalues pair up (cos/sin of the same frequency)
        let (g, p) = small();
        let model = Model1D::new(g, p).unwrap();
        let s = smooth_sample(&[1, 2, 3], 0.0);
        let rho = model.density(&s.intensity(&g)).unwrap();
        let derivs = full_derivatives(&model, &s.bins);
        let ours = qfi_from_derivatives(&rho, &derivs, s.labels()).unwrap();
        assert!(ours.matrix.iter().all(|v| v.is_finite()));
        let reference = qfi_reference(&rho, &derivs);
        assert!((&ours.matrix - &reference).amax() < 1e-8 * reference.amax());
        // and the uniform sample gives β/(2a0²) with a0 = 1/L
        for (i, &q) in [1i64, 2, 3].iter().enumerate() {
            let beta = model.pupil.otf(q, 11);
            assert!((ours.matrix[(i, i)] - beta / 2.0).abs() < 1e-8);
            assert!((ours.matrix[(i + 3, i + 3)] - beta / 2.0).abs() < 1e-8);
        }
    }

    #[test]
    fn pure_state_qfi() {
        let n = 12;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
        let v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
        let psi_of = |t: f64| {
            let w: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a + t * b).collect();
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            nalgebra::DVector::from_iterator(n, w.into_iter().map(|x| x / norm))
        };
        let psi = psi_of(0.0);
        let h = 1e-6;
        let dpsi = (psi_of(h) - psi_of(-h)) / (2.0 * h);
        let rho = DensityOperator1D::from_matrix(&psi * psi.transpose()).unwrap();
        let drho = &dpsi * psi.transpose() + &psi * dpsi.transpose();
        let q = qfi_from_derivatives(&rho, &[drho], vec!["t".into()]).unwrap();
        let overlap = psi.dot(&dpsi);
        let expected = 4.0 * (dpsi.dot(&dpsi) - overlap * overlap);
        assert!((q.matrix[(0, 0)] - expected).abs() < 1e-6 * expected);
    }

    #[test]
    fn fi_uniform_mean_matches_analytic() {
        let g = Grid1D::new(128, 1.0).unwrap();
        let p = Pupil1D::centered(10);
        let s = smooth_sample(&[1, 4, 8, 15], 0.0);
        let (mean, d) = frame_mean_and_derivatives(&s, &g, |q| p.otf(q, 21), 1.0);
        let fi = fi_numeric(&mean, &d, g.dx(), 1.0, s.labels()).unwrap();
        for (i, &q) in s.bins.iter().enumerate() {
            let beta = p.otf(q, 21);
            let expected = beta * beta / 2.0;
            assert!((fi.matrix[(i, i)] - expected).abs() < 1e-12, "{q}");
            assert!((fi.matrix[(i + 4, i + 4)] - expected).abs() < 1e-12);
        }
        assert!(fi.offdiagonal_mass_ratio() < 1e-20);
    }

    #[test]
    fn fi_disjoint_supports_uncorrelated() {
        let n = 64;
        let mean = vec![2.0; n];
        let mut d1 = vec![0.0; n];
        let mut d2 = vec![0.0; n];
        d1[..20].iter_mut().for_each(|v| *v = 1.0);
        d2[40..].iter_mut().for_each(|v| *v = -0.5);
        let fi = fi_numeric(&mean, &[d1, d2], 0.1, 3.0, vec!["p".into(), "q".into()]).unwrap();
        assert_eq!(fi.matrix[(0, 1)], 0.0);
        assert!((fi.matrix[(0, 0)] - 20.0 / 2.0 * 0.1 / 3.0).abs() < 1e-14);
        assert!(matches!(
            fi_numeric(&vec![0.0; n], &[vec![1.0; n]], 1.0, 1.0, vec!["p".into()]),
            Err(FddError::NonPositiveMean { .. })
        ));
    }

    #[test]
    fn di_mean_equals_density_diagonal() {
        let (g, p) = small();
        let model = Model1D::new(g, p.clone()).unwrap();
        let s = smooth_sample(&[1, 2, 3, 6, 8], 0.1);
        let rho = model.density(&s.intensity(&g)).unwrap();
        let (mean, _) = frame_mean_and_derivatives(&s, &g, |q| p.otf(q, p.len()), 1.0);
        for i in 0..g.n {
            assert!((rho.matrix[(i, i)] / g.dx() - mean[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn qfi_dominates_fi() {
        let (g, p) = small();
        let model = Model1D::new(g, p.clone()).unwrap();
        let s = smooth_sample(&[1, 2, 3, 4, 6, 8], 0.12);
        let rho = model.density(&s.intensity(&g)).unwrap();
        let q = qfi_numeric_1d(&model, &rho, &s).unwrap();
        let (mean, d) = frame_mean_and_derivatives(&s, &g, |k| p.otf(k, p.len()), 1.0);
        let f = fi_numeric(&mean, &d, g.dx(), 1.0, s.labels()).unwrap();
        assert!(q.sub(&f).unwrap().min_eigenvalue() > -1e-8);
        assert!(f.min_eigenvalue() > -1e-10);
    }

    #[test]
    fn matrix_checks() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5 + 1e-3, 2.0]);
        assert!(FisherMatrix::new(vec!["a".into(), "b".into()], m).is_err());
        let m = DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 0.5]);
        let f = FisherMatrix::new(vec!["a".into(), "b".into()], m).unwrap();
        assert_eq!(f.crb_diagonal().unwrap(), vec![0.25, 2.0]);
        assert!(FisherMatrix::new(vec!["a".into()], DMatrix::zeros(2, 2)).is_err());
    }
}
