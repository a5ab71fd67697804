//! Partial Dirichlet-to-Neumann maps on boundary patches: a sine basis of
//! Navier data supported in the input patch, column-wise assembly through
//! forward solves, and the weighted operator norm of a DtN difference via
//! power iteration on the normal operator.

use crate::diff::normal_derivative;
use crate::error::{Error, Result};
use crate::field::{BoundaryField, BoundaryPair, FaceField, C64, ZERO};
use crate::grid::{decode_dims, BoundaryPatch, GridSpec};
use crate::norms;
use crate::par;
use crate::pde::{self, Coefficients, Condition, NavierProblem, SolverConfig};
use crate::spectral::SineTransform;

/// Which slot of the Navier pair a basis entry lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    /// Dirichlet value `f = u`.
    F,
    /// Laplacian trace `g = lap u`.
    G,
}

/// Ordered sine basis of boundary pairs supported in one patch window:
/// the lowest window modes, first filling the `f` slot, then the `g` slot.
#[derive(Debug, Clone)]
pub struct BoundaryBasis {
    pub patch: BoundaryPatch,
    /// Window mode multi-indices, lowest eigenvalues first.
    pub modes: Vec<Vec<usize>>,
    /// Laplacian eigenvalue of each mode.
    pub eigenvalues: Vec<f64>,
    pub grid: GridSpec,
}

impl BoundaryBasis {
    pub fn lowest_modes(grid: &GridSpec, patch: &BoundaryPatch, per_axis: usize) -> Result<Self> {
        let dims = patch.window_dims();
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::EmptyPatch);
        }
        let counts: Vec<usize> = dims.iter().map(|&d| d.min(per_axis)).collect();
        let transforms: Vec<SineTransform> =
            dims.iter().map(|&d| SineTransform::new(d)).collect();
        let mut modes: Vec<Vec<usize>> = Vec::new();
        let total: usize = counts.iter().product();
        let mut kidx = vec![0usize; dims.len()];
        for flat in 0..total {
            decode_dims(flat, &counts, &mut kidx);
            modes.push(kidx.clone());
        }
        let eig = |k: &Vec<usize>| -> f64 {
            k.iter()
                .enumerate()
                .map(|(a, &kk)| transforms[a].eigenvalue(kk, grid.spacing))
                .sum()
        };
        modes.sort_by(|a, b| {
            eig(a)
                .partial_cmp(&eig(b))
                .unwrap()
                .then_with(|| a.cmp(b))
        });
        let eigenvalues = modes.iter().map(eig).collect();
        Ok(BoundaryBasis {
            patch: patch.clone(),
            modes,
            eigenvalues,
            grid: *grid,
        })
    }

    /// Number of modes per slot.
    pub fn mode_count(&self) -> usize {
        self.modes.len()
    }

    /// Total basis entries (`f` slot then `g` slot).
    pub fn len(&self) -> usize {
        2 * self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// Face data of window mode `m`: the tensor sine mode inside the window,
    /// zero outside.
    pub fn mode_face(&self, m: usize) -> FaceField {
        let g = self.grid;
        let patch = &self.patch;
        let ranges = patch.window.index_ranges(&g);
        let dims = patch.window_dims();
        let mut out = FaceField::zeros(&g, patch.face);
        let tdims = vec![g.pts; g.n - 1];
        let mut tidx = vec![0usize; g.n - 1];
        for (flat, v) in out.values.iter_mut().enumerate() {
            decode_dims(flat, &tdims, &mut tidx);
            let mut inside = true;
            let mut val = 1.0;
            for (a, &i) in tidx.iter().enumerate() {
                let (lo, hi) = ranges[a];
                if i < lo || i >= hi {
                    inside = false;
                    break;
                }
                let loc = i - lo;
                let k = self.modes[m][a];
                val *= (std::f64::consts::PI * (k as f64 + 1.0) * (loc as f64 + 1.0)
                    / (dims[a] as f64 + 1.0))
                    .sin();
            }
            if inside {
                *v = C64::new(val, 0.0);
            }
        }
        out
    }

    /// Boundary pair of basis entry `j` (entries `0..mode_count` fill the
    /// `f` slot, the rest the `g` slot).
    pub fn entry(&self, j: usize) -> BoundaryPair {
        let m = j % self.mode_count();
        let slot = if j < self.mode_count() { Slot::F } else { Slot::G };
        let face_data = self.mode_face(m);
        let mut pair = BoundaryPair::zeros(&self.grid);
        let target = match slot {
            Slot::F => &mut pair.f,
            Slot::G => &mut pair.g,
        };
        target.faces[self.patch.face.index()] = face_data;
        pair
    }

    /// Sobolev weights of the entries: `(1+lambda)^t` per mode with `t` for
    /// the `f` slot and `g` slot respectively, times the face-norm constant.
    pub fn weights(&self, t_f: f64, t_g: f64) -> Vec<f64> {
        let n = self.grid.n;
        let w0 = 0.5f64.powi((n - 1) as i32);
        let mut w: Vec<f64> = self
            .eigenvalues
            .iter()
            .map(|&l| w0 * (1.0 + l).powf(t_f))
            .collect();
        w.extend(self.eigenvalues.iter().map(|&l| w0 * (1.0 + l).powf(t_g)));
        w
    }

    /// Window-sine coefficients of face data restricted to the patch.
    pub fn analyze_face(&self, data: &FaceField) -> Vec<C64> {
        let g = self.grid;
        let ranges = self.patch.window.index_ranges(&g);
        let dims = self.patch.window_dims();
        let wlen: usize = dims.iter().product();
        let mut win = vec![ZERO; wlen];
        let tdims = vec![g.pts; g.n - 1];
        let mut tidx = vec![0usize; g.n - 1];
        let mut lidx = vec![0usize; g.n - 1];
        for (flat, &v) in data.values.iter().enumerate() {
            decode_dims(flat, &tdims, &mut tidx);
            let mut inside = true;
            for (a, &i) in tidx.iter().enumerate() {
                let (lo, hi) = ranges[a];
                if i < lo || i >= hi {
                    inside = false;
                    break;
                }
                lidx[a] = i - lo;
            }
            if inside {
                win[crate::grid::encode_dims(&lidx, &dims)] = v;
            }
        }
        let coeffs = norms::FaceCoeffs::analyze(&win, &dims, g.spacing);
        self.modes
            .iter()
            .map(|k| coeffs.values[crate::grid::encode_dims(k, &dims)])
            .collect()
    }
}

/// Dense matrix of a partial DtN map over truncated sine bases, with the
/// Sobolev weights of the input and output coefficient spaces attached.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialDtnMatrix {
    pub rows: usize,
    pub cols: usize,
    /// Row-major complex entries.
    pub data: Vec<C64>,
    /// Input weights `(7/2, 3/2)` per basis entry.
    pub weights_in: Vec<f64>,
    /// Output weights `(5/2, 1/2)` per output mode.
    pub weights_out: Vec<f64>,
}

impl PartialDtnMatrix {
    pub fn check_finite(&self) -> Result<()> {
        if self.data.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite("dtn matrix"))
        }
    }

    pub fn sub(&self, other: &PartialDtnMatrix) -> Result<PartialDtnMatrix> {
        if self.rows != other.rows
            || self.cols != other.cols
            || self.weights_in != other.weights_in
            || self.weights_out != other.weights_out
        {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(PartialDtnMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
            weights_in: self.weights_in.clone(),
            weights_out: self.weights_out.clone(),
        })
    }
}

/// Assemble the partial DtN matrix: column `j` holds the weighted-space
/// coefficients on the output patch of `(d_nu u, d_nu lap u)` where `u`
/// solves the homogeneous Navier problem with boundary data = basis entry
/// `j`. Columns are independent forward solves, run in parallel and joined
/// in index order.
pub fn assemble_dtn(
    coeffs: &Coefficients,
    basis: &BoundaryBasis,
    gamma2: &BoundaryPatch,
    per_axis_out: usize,
    solver: &SolverConfig,
) -> Result<PartialDtnMatrix> {
    let g = *coeffs.grid();
    let out_basis = BoundaryBasis::lowest_modes(&g, gamma2, per_axis_out)?;
    let m_out = out_basis.mode_count();
    let rows = 2 * m_out;
    let cols = basis.len();
    let zero_rhs = crate::field::ScalarField::zeros(&g);

    let columns: Vec<Result<Vec<C64>>> = par::map_indexed(cols, |j| {
        let pair = basis.entry(j);
        let problem = NavierProblem {
            coeffs: coeffs.clone(),
            rhs: zero_rhs.clone(),
            traces: pair.clone(),
        };
        let sol = pde::solve_navier(&problem, solver).map_err(|e| Error::DtnColumn {
            column: j,
            source: Box::new(e),
        })?;
        if sol.report.condition == Condition::NearSingular {
            return Err(Error::DtnColumn {
                column: j,
                source: Box::new(Error::NearSingular {
                    residual: sol.report.residual,
                    iterations: sol.report.iterations,
                }),
            });
        }
        // one-sided normal derivatives on the output face
        let face = gamma2.face;
        let f_bdry = pair.f.face(face).clone();
        let g_bdry = pair.g.face(face).clone();
        let dnu_u = normal_derivative(&sol.u, &f_bdry);
        let dnu_lap_u = normal_derivative(&sol.lap_u, &g_bdry);
        let mut col = out_basis.analyze_face(&dnu_u);
        col.extend(out_basis.analyze_face(&dnu_lap_u));
        Ok(col)
    });

    let mut data = vec![ZERO; rows * cols];
    for (j, col) in columns.into_iter().enumerate() {
        let col = col?;
        for (i, v) in col.into_iter().enumerate() {
            data[i * cols + j] = v;
        }
    }
    let m = PartialDtnMatrix {
        rows,
        cols,
        data,
        weights_in: basis.weights(3.5, 1.5),
        weights_out: out_basis.weights(2.5, 0.5),
    };
    m.check_finite()?;
    Ok(m)
}

fn mat_vec(m: &PartialDtnMatrix, x: &[C64], out: &mut [C64]) {
    for i in 0..m.rows {
        let row = &m.data[i * m.cols..(i + 1) * m.cols];
        out[i] = par::sum_complex(m.cols, |j| row[j] * x[j]);
    }
}

fn mat_vec_adj(m: &PartialDtnMatrix, y: &[C64], out: &mut [C64]) {
    for (j, o) in out.iter_mut().enumerate().take(m.cols) {
        *o = par::sum_complex(m.rows, |i| m.data[i * m.cols + j].conj() * y[i]);
    }
}

/// Largest generalized singular value of `m1 - m2` between the weighted
/// coefficient spaces, by power iteration on the weighted normal operator
/// with a fixed seeded start vector.
pub fn dtn_difference_norm(m1: &PartialDtnMatrix, m2: &PartialDtnMatrix, seed: u64) -> Result<f64> {
    let d = m1.sub(m2)?;
    Ok(weighted_sigma_max(&d, seed, 1e-8, 50_000))
}

/// Power iteration for `|W_out^{1/2} M W_in^{-1/2}|_2`.
pub fn weighted_sigma_max(m: &PartialDtnMatrix, seed: u64, tol: f64, max_iter: usize) -> f64 {
    let win_sqrt: Vec<f64> = m.weights_in.iter().map(|w| w.sqrt()).collect();
    let wout_sqrt: Vec<f64> = m.weights_out.iter().map(|w| w.sqrt()).collect();
    let apply_b = |x: &[C64], y: &mut [C64], tmp: &mut [C64]| {
        for j in 0..m.cols {
            tmp[j] = x[j] / win_sqrt[j];
        }
        mat_vec(m, tmp, y);
        for i in 0..m.rows {
            y[i] *= wout_sqrt[i];
        }
    };
    let apply_bh = |y: &[C64], x: &mut [C64], tmp: &mut [C64]| {
        for i in 0..m.rows {
            tmp[i] = y[i] * wout_sqrt[i];
        }
        mat_vec_adj(m, tmp, x);
        for j in 0..m.cols {
            x[j] /= win_sqrt[j];
        }
    };

    // deterministic start vector
    let mut state = seed ^ 0x5DEECE66D;
    let mut next = move || {
        state = state.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        ((z ^ (z >> 31)) >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    let mut x: Vec<C64> = (0..m.cols).map(|_| C64::new(next(), next())).collect();
    let nx = par::norm(&x);
    if nx == 0.0 {
        return 0.0;
    }
    for v in &mut x {
        *v /= nx;
    }
    let mut y = vec![ZERO; m.rows];
    let mut tmp_in = vec![ZERO; m.cols];
    let mut tmp_out = vec![ZERO; m.rows];
    let mut z = vec![ZERO; m.cols];
    let mut sigma = 0.0f64;
    for _ in 0..max_iter {
        apply_b(&x, &mut y, &mut tmp_in);
        let s = par::norm(&y);
        if s == 0.0 {
            return 0.0;
        }
        apply_bh(&y, &mut z, &mut tmp_out);
        let nz = par::norm(&z);
        if nz == 0.0 {
            return s;
        }
        for (xi, zi) in x.iter_mut().zip(&z) {
            *xi = zi / nz;
        }
        if (s - sigma).abs() <= tol * s.max(1e-300) {
            return s;
        }
        sigma = s;
    }
    sigma
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{ScalarField, VectorField};
    use crate::grid::{FaceId, Side, Window};

    fn grid() -> GridSpec {
        GridSpec::new(3, 10).unwrap()
    }

    fn patch(g: &GridSpec, axis: usize, side: Side) -> BoundaryPatch {
        BoundaryPatch::new(g, FaceId { axis, side }, Window::full(3)).unwrap()
    }

    fn toy_matrix(rows: usize, cols: usize, data: Vec<C64>) -> PartialDtnMatrix {
        PartialDtnMatrix {
            rows,
            cols,
            data,
            weights_in: vec![1.0; cols],
            weights_out: vec![1.0; rows],
        }
    }

    #[test]
    fn basis_entries_supported_in_patch() {
        let g = grid();
        let w = Window {
            ranges: vec![(0.0, 1.0), (0.0, 0.5)],
        };
        let p = BoundaryPatch::new(&g, FaceId { axis: 0, side: Side::Lo }, w).unwrap();
        let basis = BoundaryBasis::lowest_modes(&g, &p, 4).unwrap();
        for j in 0..basis.len() {
            assert!(basis.entry(j).supported_in(&p), "entry {j} escapes the patch");
        }
        // lowest mode first
        assert!(basis.eigenvalues.windows(2).all(|w| w[0] <= w[1] + 1e-12));
    }

    #[test]
    fn analyze_inverts_mode_synthesis() {
        let g = grid();
        let p = patch(&g, 1, Side::Hi);
        let basis = BoundaryBasis::lowest_modes(&g, &p, 3).unwrap();
        for m in 0..basis.mode_count() {
            let face = basis.mode_face(m);
            let coeffs = basis.analyze_face(&face);
            for (i, c) in coeffs.iter().enumerate() {
                let expect = if i == m { 1.0 } else { 0.0 };
                assert!(
                    (c - C64::new(expect, 0.0)).norm() < 1e-12,
                    "mode {m} coeff {i} = {c}"
                );
            }
        }
    }

    #[test]
    fn zero_entry_gives_zero_column_and_determinism() {
        let g = grid();
        let gamma1 = patch(&g, 0, Side::Lo);
        let gamma2 = patch(&g, 1, Side::Hi);
        let basis = BoundaryBasis::lowest_modes(&g, &gamma1, 2).unwrap();
        let coeffs = Coefficients::zero(&g);
        let cfg = SolverConfig::default();
        let m1 = assemble_dtn(&coeffs, &basis, &gamma2, 2, &cfg).unwrap();
        let m2 = assemble_dtn(&coeffs, &basis, &gamma2, 2, &cfg).unwrap();
        assert_eq!(m1, m2, "assembly must be bit-for-bit deterministic");
        assert!(m1.data.iter().any(|v| v.norm() > 0.0));
    }

    #[test]
    fn difference_norm_zero_and_diagonal() {
        let m = toy_matrix(
            2,
            2,
            vec![
                C64::new(2.0, 0.0),
                ZERO,
                ZERO,
                C64::new(1.0, 0.0),
            ],
        );
        assert_eq!(dtn_difference_norm(&m, &m, 7).unwrap(), 0.0);
        let z = toy_matrix(2, 2, vec![ZERO; 4]);
        let s = dtn_difference_norm(&m, &z, 7).unwrap();
        assert!((s - 2.0).abs() < 1e-8, "sigma {s}");
    }

    #[test]
    fn shape_mismatch_rejected() {
        let a = toy_matrix(2, 2, vec![ZERO; 4]);
        let b = toy_matrix(2, 3, vec![ZERO; 6]);
        assert!(dtn_difference_norm(&a, &b, 0).is_err());
    }

    /// Independent sigma_max oracle: form the Hermitian normal matrix
    /// B^H B, embed it as a real symmetric matrix, and run the classical
    /// real Jacobi eigenvalue sweep.
    fn dense_sigma_max_oracle(rows: usize, cols: usize, b: &[C64]) -> f64 {
        let m = cols;
        // g = b^H b (Hermitian m x m)
        let mut gmat = vec![ZERO; m * m];
        for p in 0..m {
            for q in 0..m {
                let mut acc = ZERO;
                for i in 0..rows {
                    acc += b[i * cols + p].conj() * b[i * cols + q];
                }
                gmat[p * m + q] = acc;
            }
        }
        // real symmetric embedding [[Re, -Im],[Im, Re]], eigenvalues doubled
        let nn = 2 * m;
        let mut a = vec![0.0f64; nn * nn];
        for p in 0..m {
            for q in 0..m {
                let v = gmat[p * m + q];
                a[p * nn + q] = v.re;
                a[p * nn + (q + m)] = -v.im;
                a[(p + m) * nn + q] = v.im;
                a[(p + m) * nn + (q + m)] = v.re;
            }
        }
        // classical Jacobi sweeps
        for _ in 0..100 {
            let mut off = 0.0f64;
            for p in 0..nn {
                for q in p + 1..nn {
                    off = off.max(a[p * nn + q].abs());
                }
            }
            if off < 1e-13 {
                break;
            }
            for p in 0..nn {
                for q in p + 1..nn {
                    let apq = a[p * nn + q];
                    if apq.abs() < 1e-300 {
                        continue;
                    }
                    let theta = 0.5 * (2.0 * apq).atan2(a[q * nn + q] - a[p * nn + p]);
                    let (s, c) = theta.sin_cos();
                    for k in 0..nn {
                        let akp = a[k * nn + p];
                        let akq = a[k * nn + q];
                        a[k * nn + p] = c * akp - s * akq;
                        a[k * nn + q] = s * akp + c * akq;
                    }
                    for k in 0..nn {
                        let apk = a[p * nn + k];
                        let aqk = a[q * nn + k];
                        a[p * nn + k] = c * apk - s * aqk;
                        a[q * nn + k] = s * apk + c * aqk;
                    }
                }
            }
        }
        let lmax = (0..nn).map(|i| a[i * nn + i]).fold(f64::MIN, f64::max);
        lmax.max(0.0).sqrt()
    }

    #[test]
    fn power_iteration_matches_jacobi_oracle() {
        let rows = 20;
        let cols = 20;
        let mut state = 12345u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 33) as f64 / (1u64 << 31) as f64) - 1.0
        };
        let data: Vec<C64> = (0..rows * cols).map(|_| C64::new(next(), next())).collect();
        let w_in: Vec<f64> = (0..cols).map(|_| 0.5 + next().abs() * 3.0).collect();
        let w_out: Vec<f64> = (0..rows).map(|_| 0.5 + next().abs() * 3.0).collect();
        let m = PartialDtnMatrix {
            rows,
            cols,
            data: data.clone(),
            weights_in: w_in.clone(),
            weights_out: w_out.clone(),
        };
        let sigma = weighted_sigma_max(&m, 99, 1e-10, 200_000);
        // oracle: explicitly weighted dense matrix, one-sided Jacobi
        let mut wm = vec![ZERO; rows * cols];
        for i in 0..rows {
            for j in 0..cols {
                wm[i * cols + j] = data[i * cols + j] * w_out[i].sqrt() / w_in[j].sqrt();
            }
        }
        let oracle = dense_sigma_max_oracle(rows, cols, &wm);
        assert!(
            (sigma - oracle).abs() < 1e-6 * oracle,
            "power {sigma} vs jacobi {oracle}"
        );
    }
}
