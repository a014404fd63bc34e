//! Element grid of the surface, Jakes spatial correlation, the PSD-repaired
//! correlation square root and principal submatrices for a selection of
//! active elements.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{bessel_j0_cylindrical, bessel_j0_spherical};

/// Planar `m_x × m_z` element grid spread uniformly over a
/// `w_x λ × w_z λ` aperture.
///
/// Elements are indexed 0-based in row-major order: element `i` sits in
/// column `i mod m_x` of row `i / m_x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceGeometry {
    m_x: usize,
    m_z: usize,
    w_x: f64,
    w_z: f64,
    wavelength: f64,
}

impl SurfaceGeometry {
    pub fn new(m_x: usize, m_z: usize, w_x: f64, w_z: f64, wavelength: f64) -> Result<Self> {
        if m_x == 0 || m_z == 0 {
            return Err(Error::InvalidGeometry(format!(
                "element counts must be positive, got {m_x}x{m_z}"
            )));
        }
        for (name, v) in [("w_x", w_x), ("w_z", w_z), ("wavelength", wavelength)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidGeometry(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(Self {
            m_x,
            m_z,
            w_x,
            w_z,
            wavelength,
        })
    }

    pub fn m_x(&self) -> usize {
        self.m_x
    }

    pub fn m_z(&self) -> usize {
        self.m_z
    }

    pub fn w_x(&self) -> f64 {
        self.w_x
    }

    pub fn w_z(&self) -> f64 {
        self.w_z
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    /// Total element count `M = m_x · m_z`.
    pub fn num_elements(&self) -> usize {
        self.m_x * self.m_z
    }

    /// Spacing between neighbours in a row, in meters.
    pub fn spacing_x(&self) -> f64 {
        self.w_x * self.wavelength / self.m_x as f64
    }

    /// Spacing between neighbours in a column, in meters.
    pub fn spacing_z(&self) -> f64 {
        self.w_z * self.wavelength / self.m_z as f64
    }

    /// Same aperture and wavelength, different grid density.
    pub fn with_grid(&self, m_x: usize, m_z: usize) -> Result<Self> {
        Self::new(m_x, m_z, self.w_x, self.w_z, self.wavelength)
    }

    fn check_index(&self, index: usize) -> Result<()> {
        if index >= self.num_elements() {
            return Err(Error::IndexOutOfRange {
                index,
                len: self.num_elements(),
            });
        }
        Ok(())
    }

    fn grid_coords(&self, index: usize) -> (usize, usize) {
        (index % self.m_x, index / self.m_x)
    }

    /// Physical `(x, z)` position of an element in meters, origin at element 0.
    pub fn element_position(&self, index: usize) -> Result<(f64, f64)> {
        self.check_index(index)?;
        let (col, row) = self.grid_coords(index);
        Ok((col as f64 * self.spacing_x(), row as f64 * self.spacing_z()))
    }

    /// Euclidean distance between two elements in meters.
    pub fn pairwise_distance(&self, i: usize, j: usize) -> Result<f64> {
        self.check_index(i)?;
        self.check_index(j)?;
        Ok(self.distance_unchecked(i, j))
    }

    fn distance_unchecked(&self, i: usize, j: usize) -> f64 {
        let (ci, ri) = self.grid_coords(i);
        let (cj, rj) = self.grid_coords(j);
        let dx = (ci as f64 - cj as f64) * self.spacing_x();
        let dz = (ri as f64 - rj as f64) * self.spacing_z();
        dx.hypot(dz)
    }
}

/// Correlation kernel applied to `2π d / λ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    /// `sin(x)/x`
    #[default]
    Spherical,
    /// Cylindrical `J₀(x)`, the classical Jakes form.
    Cylindrical,
}

pub fn jakes_coefficient(distance: f64, wavelength: f64, kernel: Kernel) -> f64 {
    let arg = 2.0 * PI * distance / wavelength;
    match kernel {
        Kernel::Spherical => bessel_j0_spherical(arg),
        Kernel::Cylindrical => bessel_j0_cylindrical(arg),
    }
}

/// Real symmetric correlation matrix with unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    entries: DMatrix<f64>,
}

impl CorrelationMatrix {
    /// Wraps an arbitrary matrix after checking squareness, exact symmetry,
    /// unit diagonal and entries in `[-1, 1]`.
    pub fn from_matrix(entries: DMatrix<f64>) -> Result<Self> {
        let n = entries.nrows();
        if entries.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: entries.ncols(),
            });
        }
        if n == 0 {
            return Err(Error::InvalidGeometry("empty correlation matrix".into()));
        }
        for i in 0..n {
            if entries[(i, i)] != 1.0 {
                return Err(Error::Numerical(format!(
                    "correlation diagonal entry {i} is {}, expected 1",
                    entries[(i, i)]
                )));
            }
            for j in 0..i {
                let v = entries[(i, j)];
                if v != entries[(j, i)] || !(-1.0..=1.0).contains(&v) {
                    return Err(Error::Numerical(format!(
                        "correlation entry ({i}, {j}) = {v} is asymmetric or outside [-1, 1]"
                    )));
                }
            }
        }
        Ok(Self { entries })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            entries: DMatrix::identity(n, n),
        }
    }

    /// Jakes correlation over all element pairs of `geom`.
    pub fn build(geom: &SurfaceGeometry, kernel: Kernel) -> Self {
        let m = geom.num_elements();
        let mut entries = DMatrix::identity(m, m);
        for i in 0..m {
            for j in 0..i {
                let c = jakes_coefficient(geom.distance_unchecked(i, j), geom.wavelength, kernel).clamp(-1.0, 1.0);
                entries[(i, j)] = c;
                entries[(j, i)] = c;
            }
        }
        Self { entries }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// `J̃`: rows and columns of the selected elements.
    pub fn principal_submatrix(&self, sel: &SelectionSet) -> Result<Self> {
        sel.check_bound(self.dim())?;
        let idx = sel.indices();
        let entries = DMatrix::from_fn(idx.len(), idx.len(), |a, b| self.entries[(idx[a], idx[b])]);
        Ok(Self { entries })
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.entries.clone().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_matrix_csv(out, &self.entries)
    }
}

/// Symmetric PSD square root of a correlation matrix.
#[derive(Debug, Clone)]
pub struct CorrelationSqrt {
    entries: DMatrix<f64>,
    clamped_count: usize,
}

impl CorrelationSqrt {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Number of eigenvalues that were set to zero during the repair.
    pub fn clamped_count(&self) -> usize {
        self.clamped_count
    }

    /// Rows of the square root at the selected elements (`S J^{1/2}`).
    pub fn selected_rows(&self, sel: &SelectionSet) -> Result<DMatrix<f64>> {
        sel.check_bound(self.dim())?;
        let idx = sel.indices();
        Ok(DMatrix::from_fn(idx.len(), self.dim(), |a, c| {
            self.entries[(idx[a], c)]
        }))
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_matrix_csv(out, &self.entries)
    }
}

/// Relative eigenvalue floor used when `psd_sqrt` gets no explicit tolerance.
pub const DEFAULT_CLAMP_RELATIVE: f64 = 1e-12;

/// Square root via eigendecomposition. Eigenvalues below `clamp_tol`
/// (default `1e-12 · λ_max`) are set to zero, which repairs the slightly
/// indefinite spectra that dense sinc grids produce.
pub fn psd_sqrt(j: &CorrelationMatrix, clamp_tol: Option<f64>) -> Result<CorrelationSqrt> {
    let n = j.dim();
    let eig = SymmetricEigen::try_new(j.entries.clone(), f64::EPSILON, 0)
        .ok_or_else(|| Error::Numerical(format!("eigendecomposition of {n}x{n} matrix did not converge")))?;
    let lambda_max = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tol = clamp_tol.unwrap_or(DEFAULT_CLAMP_RELATIVE * lambda_max.max(0.0));
    let mut clamped_count = 0;
    let roots: Vec<f64> = eig
        .eigenvalues
        .iter()
        .map(|&l| {
            if l < tol {
                clamped_count += 1;
                0.0
            } else {
                l.sqrt()
            }
        })
        .collect();
    let v = &eig.eigenvectors;
    let mut scaled = v.clone();
    for (c, r) in roots.iter().enumerate() {
        scaled.column_mut(c).scale_mut(*r);
    }
    let mut entries = &scaled * v.transpose();
    // Exact symmetry; the product is symmetric only up to rounding.
    for i in 0..n {
        for k in 0..i {
            let avg = 0.5 * (entries[(i, k)] + entries[(k, i)]);
            entries[(i, k)] = avg;
            entries[(k, i)] = avg;
        }
    }
    Ok(CorrelationSqrt { entries, clamped_count })
}

/// Strictly increasing set of active element indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SelectionSet(Vec<usize>);

impl SelectionSet {
    /// Validates a selection against a surface with `m` elements.
    pub fn new(indices: Vec<usize>, m: usize) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidSelection("selection is empty".into()));
        }
        if indices.len() > m {
            return Err(Error::InvalidSelection(format!(
                "{} indices exceed the {m} available elements",
                indices.len()
            )));
        }
        if let Some(w) = indices.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::InvalidSelection(format!(
                "indices must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        let s = Self(indices);
        s.check_bound(m)?;
        Ok(s)
    }

    pub fn all(m: usize) -> Self {
        Self((0..m).collect())
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub(crate) fn check_bound(&self, m: usize) -> Result<()> {
        match self.0.last() {
            Some(&last) if last >= m => Err(Error::IndexOutOfRange { index: last, len: m }),
            _ => Ok(()),
        }
    }

    /// Most evenly spread `k_x × k_z` subgrid: per axis the rounded points of
    /// `linspace(0, m - 1, k)`, with `k = 1` picking the first gridpoint.
    pub fn uniform_grid(geom: &SurfaceGeometry, k_x: usize, k_z: usize) -> Result<Self> {
        if k_x == 0 || k_z == 0 || k_x > geom.m_x || k_z > geom.m_z {
            return Err(Error::InvalidSelection(format!(
                "cannot place a {k_x}x{k_z} subgrid on a {}x{} grid",
                geom.m_x, geom.m_z
            )));
        }
        let xs = spread(geom.m_x, k_x);
        let zs = spread(geom.m_z, k_z);
        let indices = zs
            .iter()
            .flat_map(|&z| xs.iter().map(move |&x| z * geom.m_x + x))
            .collect();
        Self::new(indices, geom.num_elements())
    }
}

fn spread(m: usize, k: usize) -> Vec<usize> {
    if k == 1 {
        return vec![0];
    }
    let step = (m - 1) as f64 / (k - 1) as f64;
    (0..k).map(|i| (i as f64 * step).round() as usize).collect()
}

/// Square matrix as CSV: a `dim,<n>` line then `n` rows at 17 significant digits.
pub fn write_matrix_csv<W: Write>(mut out: W, m: &DMatrix<f64>) -> Result<()> {
    writeln!(out, "dim,{}", m.nrows())?;
    for r in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|c| format!("{:.16e}", m[(r, c)])).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}
