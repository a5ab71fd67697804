//! Complex grid fields: interior fields on the cube, padded fields carrying
//! boundary and one collar layer, fields on the periodic enclosing box, and
//! per-face boundary data.

use crate::error::{Error, Result};
use crate::grid::{decode_dims, FaceId, GridSpec, Mask, Side};
use num_complex::Complex64;

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Complex field on the interior nodes of the cube.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: GridSpec,
    pub values: Vec<C64>,
}

impl ScalarField {
    pub fn zeros(grid: &GridSpec) -> Self {
        ScalarField {
            grid: *grid,
            values: vec![ZERO; grid.len()],
        }
    }

    pub fn from_fn(grid: &GridSpec, f: impl Fn(&[f64]) -> C64) -> Self {
        let mut idx = vec![0usize; grid.n];
        let mut x = vec![0.0f64; grid.n];
        let values = (0..grid.len())
            .map(|flat| {
                grid.decode(flat, &mut idx);
                grid.node_coords(&idx, &mut x);
                f(&x)
            })
            .collect();
        ScalarField { grid: *grid, values }
    }

    pub fn from_real_fn(grid: &GridSpec, f: impl Fn(&[f64]) -> f64) -> Self {
        Self::from_fn(grid, |x| C64::new(f(x), 0.0))
    }

    pub fn check_finite(&self, what: &'static str) -> Result<()> {
        if self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite(what))
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Max modulus over nodes selected by `mask`.
    pub fn max_abs_on(&self, mask: &Mask) -> f64 {
        self.values
            .iter()
            .zip(&mask.values)
            .filter(|(_, &m)| m)
            .map(|(v, _)| v.norm())
            .fold(0.0, f64::max)
    }

    pub fn scale(&mut self, c: C64) {
        for v in &mut self.values {
            *v *= c;
        }
    }

    pub fn add_scaled(&mut self, other: &ScalarField, c: C64) {
        for (v, o) in self.values.iter_mut().zip(&other.values) {
            *v += c * o;
        }
    }

    pub fn sub(&self, other: &ScalarField) -> ScalarField {
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        ScalarField {
            grid: self.grid,
            values,
        }
    }

    /// Pointwise multiply by a real cutoff.
    pub fn mul_real(&self, w: &[f64]) -> ScalarField {
        let values = self
            .values
            .iter()
            .zip(w)
            .map(|(v, &c)| v * c)
            .collect();
        ScalarField {
            grid: self.grid,
            values,
        }
    }
}

/// n-tuple of scalar fields sharing one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub components: Vec<ScalarField>,
}

impl VectorField {
    pub fn zeros(grid: &GridSpec) -> Self {
        VectorField {
            components: (0..grid.n).map(|_| ScalarField::zeros(grid)).collect(),
        }
    }

    pub fn from_fns(grid: &GridSpec, f: impl Fn(usize, &[f64]) -> C64) -> Self {
        VectorField {
            components: (0..grid.n)
                .map(|a| ScalarField::from_fn(grid, |x| f(a, x)))
                .collect(),
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.components[0].grid
    }

    pub fn max_abs(&self) -> f64 {
        self.components.iter().map(|c| c.max_abs()).fold(0.0, f64::max)
    }

    pub fn sub(&self, other: &VectorField) -> VectorField {
        VectorField {
            components: self
                .components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| a.sub(b))
                .collect(),
        }
    }

    pub fn check_finite(&self, what: &'static str) -> Result<()> {
        for c in &self.components {
            c.check_finite(what)?;
        }
        Ok(())
    }
}

/// Antisymmetric two-form: one scalar field per index pair `(j,k)`, `j < k`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoFormField {
    pub grid: GridSpec,
    /// Components in lexicographic pair order.
    pub components: Vec<ScalarField>,
}

impl TwoFormField {
    pub fn pair_count(n: usize) -> usize {
        n * (n - 1) / 2
    }

    /// Lexicographic pairs `(j,k)`, `j < k`.
    pub fn pairs(n: usize) -> Vec<(usize, usize)> {
        let mut v = Vec::with_capacity(Self::pair_count(n));
        for j in 0..n {
            for k in (j + 1)..n {
                v.push((j, k));
            }
        }
        v
    }

    pub fn zeros(grid: &GridSpec) -> Self {
        TwoFormField {
            grid: *grid,
            components: (0..Self::pair_count(grid.n))
                .map(|_| ScalarField::zeros(grid))
                .collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.components.iter().map(|c| c.max_abs()).fold(0.0, f64::max)
    }

    pub fn sub(&self, other: &TwoFormField) -> TwoFormField {
        TwoFormField {
            grid: self.grid,
            components: self
                .components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| a.sub(b))
                .collect(),
        }
    }
}

/// Field on the closed cube plus one collar layer per side: per axis the
/// padded index `p in 0..pts+4` sits at coordinate `(p-1)*spacing`, so
/// `p = 1` and `p = pts+2` are the boundary planes.
#[derive(Debug, Clone)]
pub struct PaddedField {
    pub grid: GridSpec,
    pub values: Vec<C64>,
}

impl PaddedField {
    pub const PAD: usize = 2;

    pub fn side(grid: &GridSpec) -> usize {
        grid.pts + 2 * Self::PAD
    }

    pub fn len(grid: &GridSpec) -> usize {
        Self::side(grid).pow(grid.n as u32)
    }

    pub fn zeros(grid: &GridSpec) -> Self {
        PaddedField {
            grid: *grid,
            values: vec![ZERO; Self::len(grid)],
        }
    }

    #[inline]
    pub fn coord(grid: &GridSpec, p: usize) -> f64 {
        (p as f64 - 1.0) * grid.spacing
    }

    pub fn from_fn(grid: &GridSpec, f: impl Fn(&[f64]) -> C64) -> Self {
        let side = Self::side(grid);
        let dims = vec![side; grid.n];
        let mut idx = vec![0usize; grid.n];
        let mut x = vec![0.0f64; grid.n];
        let values = (0..Self::len(grid))
            .map(|flat| {
                decode_dims(flat, &dims, &mut idx);
                for a in 0..grid.n {
                    x[a] = Self::coord(grid, idx[a]);
                }
                f(&x)
            })
            .collect();
        PaddedField { grid: *grid, values }
    }

    #[inline]
    pub fn stride(&self, a: usize) -> usize {
        Self::side(&self.grid).pow((self.grid.n - 1 - a) as u32)
    }

    /// Flat padded index of a padded multi-index.
    #[inline]
    pub fn encode(&self, idx: &[usize]) -> usize {
        let side = Self::side(&self.grid);
        let mut flat = 0;
        for a in 0..self.grid.n {
            flat = flat * side + idx[a];
        }
        flat
    }

    /// Restrict to the interior nodes.
    pub fn interior(&self) -> ScalarField {
        let g = self.grid;
        let mut out = ScalarField::zeros(&g);
        let mut idx = vec![0usize; g.n];
        let mut pid = vec![0usize; g.n];
        for flat in 0..g.len() {
            g.decode(flat, &mut idx);
            for a in 0..g.n {
                pid[a] = idx[a] + Self::PAD;
            }
            out.values[flat] = self.values[self.encode(&pid)];
        }
        out
    }

    /// Values on one boundary face (transverse interior nodes only).
    pub fn face_values(&self, face: FaceId) -> FaceField {
        let g = self.grid;
        let tdims = vec![g.pts; g.n - 1];
        let tax = face.transverse(g.n);
        let mut tidx = vec![0usize; g.n - 1];
        let mut pid = vec![0usize; g.n];
        let mut values = vec![ZERO; g.face_len()];
        let p_axis = match face.side {
            Side::Lo => 1,
            Side::Hi => g.pts + 2,
        };
        for (flat, v) in values.iter_mut().enumerate() {
            decode_dims(flat, &tdims, &mut tidx);
            pid[face.axis] = p_axis;
            for (t, &a) in tax.iter().enumerate() {
                pid[a] = tidx[t] + Self::PAD;
            }
            *v = self.values[self.encode(&pid)];
        }
        FaceField {
            grid: g,
            face,
            values,
        }
    }
}

/// Complex data on the interior nodes of one face.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceField {
    pub grid: GridSpec,
    pub face: FaceId,
    pub values: Vec<C64>,
}

impl FaceField {
    pub fn zeros(grid: &GridSpec, face: FaceId) -> Self {
        FaceField {
            grid: *grid,
            face,
            values: vec![ZERO; grid.face_len()],
        }
    }

    pub fn from_fn(grid: &GridSpec, face: FaceId, f: impl Fn(&[f64]) -> C64) -> Self {
        let tdims = vec![grid.pts; grid.n - 1];
        let tax = face.transverse(grid.n);
        let mut tidx = vec![0usize; grid.n - 1];
        let mut x = vec![0.0f64; grid.n];
        let values = (0..grid.face_len())
            .map(|flat| {
                decode_dims(flat, &tdims, &mut tidx);
                x[face.axis] = face.plane_coord();
                for (t, &a) in tax.iter().enumerate() {
                    x[a] = grid.coord(tidx[t]);
                }
                f(&x)
            })
            .collect();
        FaceField {
            grid: *grid,
            face,
            values,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// Data on all 2n faces, ordered as `FaceId::all`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryField {
    pub faces: Vec<FaceField>,
}

impl BoundaryField {
    pub fn zeros(grid: &GridSpec) -> Self {
        BoundaryField {
            faces: FaceId::all(grid.n)
                .into_iter()
                .map(|f| FaceField::zeros(grid, f))
                .collect(),
        }
    }

    pub fn from_fn(grid: &GridSpec, f: impl Fn(&[f64]) -> C64) -> Self {
        BoundaryField {
            faces: FaceId::all(grid.n)
                .into_iter()
                .map(|face| FaceField::from_fn(grid, face, &f))
                .collect(),
        }
    }

    pub fn face(&self, id: FaceId) -> &FaceField {
        &self.faces[id.index()]
    }

    pub fn max_abs(&self) -> f64 {
        self.faces.iter().map(|f| f.max_abs()).fold(0.0, f64::max)
    }
}

/// Navier data pair: `f = u` and `g = lap u` on the boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryPair {
    pub f: BoundaryField,
    pub g: BoundaryField,
}

impl BoundaryPair {
    pub fn zeros(grid: &GridSpec) -> Self {
        BoundaryPair {
            f: BoundaryField::zeros(grid),
            g: BoundaryField::zeros(grid),
        }
    }

    /// Checks that the data is supported inside the patch window.
    pub fn supported_in(&self, patch: &crate::grid::BoundaryPatch) -> bool {
        for bf in [&self.f, &self.g] {
            for face in &bf.faces {
                if face.face == patch.face {
                    for (v, &m) in face.values.iter().zip(&patch.mask) {
                        if !m && v.norm() > 0.0 {
                            return false;
                        }
                    }
                } else if face.max_abs() > 0.0 {
                    return false;
                }
            }
        }
        true
    }
}

/// Periodic enclosing box of side 2 sharing the cube's mesh width. The cube
/// `(0,1)^n` sits at box indices `off+1 ..= off+pts` per axis, so interior,
/// boundary, and one collar layer are all box nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxGrid {
    pub grid: GridSpec,
    /// Nodes per axis: `2*(pts+1)`.
    pub m: usize,
    /// Index offset of the cube's `x = 0` plane.
    pub off: usize,
}

impl BoxGrid {
    pub const SIDE: f64 = 2.0;

    pub fn enclosing(grid: &GridSpec) -> Self {
        let m = 2 * (grid.pts + 1);
        let off = (grid.pts + 1) / 2;
        BoxGrid { grid: *grid, m, off }
    }

    pub fn len(&self) -> usize {
        self.m.pow(self.grid.n as u32)
    }

    #[inline]
    pub fn coord(&self, j: usize) -> f64 {
        (j as f64 - self.off as f64) * self.grid.spacing
    }

    /// Coordinate of box node index 0.
    pub fn origin(&self) -> f64 {
        -(self.off as f64) * self.grid.spacing
    }

    #[inline]
    pub fn stride(&self, a: usize) -> usize {
        self.m.pow((self.grid.n - 1 - a) as u32)
    }

    #[inline]
    pub fn decode(&self, mut flat: usize, idx: &mut [usize]) {
        for a in (0..self.grid.n).rev() {
            idx[a] = flat % self.m;
            flat /= self.m;
        }
    }

    #[inline]
    pub fn encode(&self, idx: &[usize]) -> usize {
        let mut flat = 0;
        for a in 0..self.grid.n {
            flat = flat * self.m + idx[a];
        }
        flat
    }

    /// Box index of the interior node `i` along one axis.
    #[inline]
    pub fn interior_to_box(&self, i: usize) -> usize {
        self.off + 1 + i
    }

    /// Signed Fourier index of DFT bin `k`.
    #[inline]
    pub fn signed(&self, k: usize) -> i64 {
        if k <= (self.m - 1) / 2 {
            k as i64
        } else {
            k as i64 - self.m as i64
        }
    }

    /// Continuous frequency of DFT bin `k`: `2*pi*signed(k)/SIDE = pi*signed(k)`.
    #[inline]
    pub fn freq(&self, k: usize) -> f64 {
        2.0 * std::f64::consts::PI * self.signed(k) as f64 / Self::SIDE
    }

    /// Largest symmetric signed index (both `+k` and `-k` representable).
    pub fn nyquist_sym(&self) -> i64 {
        (self.m as i64 - 1) / 2
    }
}

/// Complex field on the periodic box.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxField {
    pub boxg: BoxGrid,
    pub values: Vec<C64>,
}

impl BoxField {
    pub fn zeros(boxg: &BoxGrid) -> Self {
        BoxField {
            boxg: *boxg,
            values: vec![ZERO; boxg.len()],
        }
    }

    pub fn from_fn(boxg: &BoxGrid, f: impl Fn(&[f64]) -> C64) -> Self {
        let n = boxg.grid.n;
        let mut idx = vec![0usize; n];
        let mut x = vec![0.0f64; n];
        let values = (0..boxg.len())
            .map(|flat| {
                boxg.decode(flat, &mut idx);
                for a in 0..n {
                    x[a] = boxg.coord(idx[a]);
                }
                f(&x)
            })
            .collect();
        BoxField {
            boxg: *boxg,
            values,
        }
    }

    /// Zero-extend an interior field into the box.
    pub fn embed(boxg: &BoxGrid, f: &ScalarField) -> Self {
        let g = f.grid;
        let mut out = Self::zeros(boxg);
        let mut idx = vec![0usize; g.n];
        let mut bid = vec![0usize; g.n];
        for flat in 0..g.len() {
            g.decode(flat, &mut idx);
            for a in 0..g.n {
                bid[a] = boxg.interior_to_box(idx[a]);
            }
            out.values[boxg.encode(&bid)] = f.values[flat];
        }
        out
    }

    /// Restrict to the cube's interior nodes.
    pub fn restrict_interior(&self) -> ScalarField {
        let g = self.boxg.grid;
        let mut out = ScalarField::zeros(&g);
        let mut idx = vec![0usize; g.n];
        let mut bid = vec![0usize; g.n];
        for flat in 0..g.len() {
            g.decode(flat, &mut idx);
            for a in 0..g.n {
                bid[a] = self.boxg.interior_to_box(idx[a]);
            }
            out.values[flat] = self.values[self.boxg.encode(&bid)];
        }
        out
    }

    /// Restrict to the padded lattice (interior + boundary + collar).
    pub fn restrict_padded(&self) -> PaddedField {
        let g = self.boxg.grid;
        let side = PaddedField::side(&g);
        let dims = vec![side; g.n];
        let mut out = PaddedField::zeros(&g);
        let mut idx = vec![0usize; g.n];
        let mut bid = vec![0usize; g.n];
        for flat in 0..PaddedField::len(&g) {
            decode_dims(flat, &dims, &mut idx);
            for a in 0..g.n {
                // padded p at coord (p-1)*s corresponds to box index off + p - 1
                bid[a] = self.boxg.off + idx[a];
            }
            out.values[flat] = self.values[self.boxg.encode(&bid)];
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// Encode (j,k) pair, j<k, into the lexicographic pair index.
pub fn pair_index(n: usize, j: usize, k: usize) -> usize {
    debug_assert!(j < k && k < n);
    // pairs before row j: sum_{r<j} (n-1-r)
    j * (2 * n - j - 1) / 2 + (k - j - 1)
}
