//! Discrete domain: the unit cube in n >= 3 dimensions, boundary patches,
//! nested boundary collars and smooth cutoff functions.
//!
//! Interior nodes per axis are indexed `0..pts` at coordinates `(i+1)*spacing`
//! with `spacing = 1/(pts+1)`, so coordinate 0 and 1 are the boundary planes.
//! Distance to the boundary is the exact L-infinity distance on a cube.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Tensor grid on the unit cube `(0,1)^n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Spatial dimension, `>= 3`.
    pub n: usize,
    /// Interior points per axis, `>= 8`.
    pub pts: usize,
    /// Mesh width `1/(pts+1)`.
    pub spacing: f64,
    pub box_origin: f64,
    pub box_side: f64,
}

impl GridSpec {
    pub fn new(n: usize, pts: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::DimensionTooLow(n));
        }
        if pts < 8 {
            return Err(Error::GridTooCoarse(pts));
        }
        Ok(GridSpec {
            n,
            pts,
            spacing: 1.0 / (pts as f64 + 1.0),
            box_origin: 0.0,
            box_side: 1.0,
        })
    }

    /// Number of interior nodes.
    pub fn len(&self) -> usize {
        self.pts.pow(self.n as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coordinate of interior index `i` along one axis.
    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        (i as f64 + 1.0) * self.spacing
    }

    /// Decode a flat interior index into a multi-index (row-major, axis 0 slowest).
    #[inline]
    pub fn decode(&self, mut flat: usize, idx: &mut [usize]) {
        for a in (0..self.n).rev() {
            idx[a] = flat % self.pts;
            flat /= self.pts;
        }
    }

    #[inline]
    pub fn encode(&self, idx: &[usize]) -> usize {
        let mut flat = 0;
        for a in 0..self.n {
            flat = flat * self.pts + idx[a];
        }
        flat
    }

    /// Stride of axis `a` in the flat interior ordering.
    #[inline]
    pub fn stride(&self, a: usize) -> usize {
        self.pts.pow((self.n - 1 - a) as u32)
    }

    /// Fill `x` with the coordinates of the interior node `idx`.
    #[inline]
    pub fn node_coords(&self, idx: &[usize], x: &mut [f64]) {
        for a in 0..self.n {
            x[a] = self.coord(idx[a]);
        }
    }

    /// Exact L-infinity distance from an interior node to the cube boundary.
    #[inline]
    pub fn dist_to_boundary(&self, idx: &[usize]) -> f64 {
        let mut d = f64::INFINITY;
        for a in 0..self.n {
            let c = self.coord(idx[a]);
            d = d.min(c.min(1.0 - c));
        }
        d
    }

    /// Node count of one face (interior nodes of an (n-1)-dim grid).
    pub fn face_len(&self) -> usize {
        self.pts.pow((self.n - 1) as u32)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Lo,
    Hi,
}

/// One of the 2n faces of the cube.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FaceId {
    pub axis: usize,
    pub side: Side,
}

impl FaceId {
    pub fn all(n: usize) -> Vec<FaceId> {
        let mut v = Vec::with_capacity(2 * n);
        for axis in 0..n {
            v.push(FaceId { axis, side: Side::Lo });
            v.push(FaceId { axis, side: Side::Hi });
        }
        v
    }

    /// Position of this face in the `FaceId::all` ordering.
    pub fn index(&self) -> usize {
        2 * self.axis + if self.side == Side::Lo { 0 } else { 1 }
    }

    /// Transverse axes of this face in increasing order.
    pub fn transverse(&self, n: usize) -> Vec<usize> {
        (0..n).filter(|&a| a != self.axis).collect()
    }

    /// Outward normal sign along `axis`.
    pub fn normal_sign(&self) -> f64 {
        match self.side {
            Side::Lo => -1.0,
            Side::Hi => 1.0,
        }
    }

    /// Boundary coordinate along `axis`.
    pub fn plane_coord(&self) -> f64 {
        match self.side {
            Side::Lo => 0.0,
            Side::Hi => 1.0,
        }
    }
}

impl std::fmt::Display for FaceId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "x{}_{}",
            self.axis,
            if self.side == Side::Lo { "lo" } else { "hi" }
        )
    }
}

/// Axis-aligned open sub-rectangle of a face, in face coordinates.
/// One `(lo, hi)` range per transverse axis; a node is inside when
/// `lo <= coord < hi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub ranges: Vec<(f64, f64)>,
}

impl Window {
    pub fn full(n: usize) -> Self {
        Window {
            ranges: vec![(0.0, 1.0 + 1e-12); n - 1],
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.ranges.len() != n - 1 {
            return Err(Error::BadWindow(format!(
                "expected {} ranges, got {}",
                n - 1,
                self.ranges.len()
            )));
        }
        for &(lo, hi) in &self.ranges {
            if !(lo < hi) || lo < 0.0 || hi > 1.0 + 1e-9 {
                return Err(Error::BadWindow(format!("range ({lo}, {hi})")));
            }
        }
        Ok(())
    }

    /// Half-open index ranges `[lo, hi)` of face nodes inside the window.
    pub fn index_ranges(&self, grid: &GridSpec) -> Vec<(usize, usize)> {
        self.ranges
            .iter()
            .map(|&(lo, hi)| {
                let mut i_lo = grid.pts;
                let mut i_hi = 0;
                for i in 0..grid.pts {
                    let c = grid.coord(i);
                    if c >= lo && c < hi {
                        if i < i_lo {
                            i_lo = i;
                        }
                        i_hi = i + 1;
                    }
                }
                (i_lo.min(i_hi), i_hi)
            })
            .collect()
    }
}

/// Boolean mask over interior nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    pub grid: GridSpec,
    pub values: Vec<bool>,
}

impl Mask {
    pub fn from_fn(grid: &GridSpec, f: impl Fn(&[usize]) -> bool) -> Self {
        let mut idx = vec![0usize; grid.n];
        let values = (0..grid.len())
            .map(|flat| {
                grid.decode(flat, &mut idx);
                f(&idx)
            })
            .collect();
        Mask { grid: *grid, values }
    }

    pub fn count(&self) -> usize {
        self.values.iter().filter(|&&b| b).count()
    }

    /// Pointwise implication `self => other`.
    pub fn implies(&self, other: &Mask) -> bool {
        self.values
            .iter()
            .zip(&other.values)
            .all(|(&a, &b)| !a || b)
    }
}

/// Open subset of the boundary: a set of faces with per-face node masks.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryPatch {
    pub grid: GridSpec,
    pub face: FaceId,
    pub window: Window,
    /// Mask over the face nodes (row-major over transverse axes).
    pub mask: Vec<bool>,
}

impl BoundaryPatch {
    /// Select the open window on `face`. Errors when the window is empty or
    /// falls outside the face; patches must be nonempty open sets.
    pub fn new(grid: &GridSpec, face: FaceId, window: Window) -> Result<Self> {
        window.validate(grid.n)?;
        let ranges = window.index_ranges(grid);
        let mut mask = vec![false; grid.face_len()];
        let tdims = vec![grid.pts; grid.n - 1];
        let mut idx = vec![0usize; grid.n - 1];
        for (flat, m) in mask.iter_mut().enumerate() {
            decode_dims(flat, &tdims, &mut idx);
            *m = idx
                .iter()
                .zip(&ranges)
                .all(|(&i, &(lo, hi))| i >= lo && i < hi);
        }
        if !mask.iter().any(|&b| b) {
            return Err(Error::EmptyPatch);
        }
        Ok(BoundaryPatch {
            grid: *grid,
            face,
            window,
            mask,
        })
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    /// Window node counts per transverse axis.
    pub fn window_dims(&self) -> Vec<usize> {
        self.window
            .index_ranges(&self.grid)
            .iter()
            .map(|&(lo, hi)| hi - lo)
            .collect()
    }
}

/// Four nested collars of the boundary, `omega_0 .. omega_3`,
/// `mask_j = { dist(x, boundary) < w_j }` with strict nesting.
#[derive(Debug, Clone)]
pub struct NeighborhoodChain {
    pub widths: [f64; 4],
    pub masks: [Mask; 4],
}

impl NeighborhoodChain {
    pub fn new(grid: &GridSpec, widths: [f64; 4]) -> Result<Self> {
        let s = grid.spacing;
        for k in 0..3 {
            if !(widths[k] > widths[k + 1]) {
                return Err(Error::BadWidths(format!(
                    "not strictly decreasing: {:?}",
                    widths
                )));
            }
            if widths[k] - widths[k + 1] <= s {
                return Err(Error::BadWidths(format!(
                    "gap {} below one grid layer {}",
                    widths[k] - widths[k + 1],
                    s
                )));
            }
        }
        if widths[3] <= s {
            return Err(Error::BadWidths(format!(
                "innermost width {} not resolvable at spacing {}",
                widths[3], s
            )));
        }
        let masks = [
            Mask::from_fn(grid, |idx| grid.dist_to_boundary(idx) < widths[0]),
            Mask::from_fn(grid, |idx| grid.dist_to_boundary(idx) < widths[1]),
            Mask::from_fn(grid, |idx| grid.dist_to_boundary(idx) < widths[2]),
            Mask::from_fn(grid, |idx| grid.dist_to_boundary(idx) < widths[3]),
        ];
        // strict nesting with at least one layer in between
        for j in 1..4 {
            if !masks[j].implies(&masks[j - 1]) || masks[j].count() >= masks[j - 1].count() {
                return Err(Error::BadWidths(format!(
                    "masks not strictly nested at level {j}"
                )));
            }
        }
        if masks[3].count() == 0 {
            return Err(Error::BadWidths("innermost collar empty".into()));
        }
        Ok(NeighborhoodChain { widths, masks })
    }

    /// Mask of the shell `omega_2 \ omega_3`.
    pub fn shell23(&self) -> Mask {
        let mut m = self.masks[2].clone();
        for (v, &inner) in m.values.iter_mut().zip(&self.masks[3].values) {
            *v = *v && !inner;
        }
        m
    }
}

/// Quintic smoothstep `6t^5 - 15t^4 + 10t^3` clamped to [0,1].
#[inline]
pub fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
}

/// Smooth scalar cutoff over interior nodes: exactly 0 for
/// `dist(x, boundary) <= zero_width`, exactly 1 for `dist >= one_width`,
/// quintic-smoothstep ramp in between.
#[derive(Debug, Clone)]
pub struct Cutoff {
    pub grid: GridSpec,
    pub inner_width: f64,
    pub outer_width: f64,
    pub values: Vec<f64>,
}

impl Cutoff {
    /// `zero_region` and `one_region` are the collar `dist < zero_width` and
    /// the core `dist >= one_width`. Requires at least 3 node layers strictly
    /// inside the transition band so discrete derivatives stay bounded.
    pub fn between(grid: &GridSpec, zero_width: f64, one_width: f64) -> Result<Self> {
        if !(zero_width > 0.0) {
            return Err(Error::BadCutoff(
                "zero region must be nonempty (a constant-one cutoff is not admissible)".into(),
            ));
        }
        if !(one_width > zero_width) {
            return Err(Error::BadCutoff(format!(
                "regions overlap: zero_width {zero_width} >= one_width {one_width}"
            )));
        }
        let s = grid.spacing;
        let layers = (1..=grid.pts)
            .map(|k| k as f64 * s)
            .filter(|&d| d > zero_width && d < one_width)
            .count();
        if layers < 3 {
            return Err(Error::BadCutoff(format!(
                "only {layers} transition layers between {zero_width} and {one_width} at spacing {s}"
            )));
        }
        let mut idx = vec![0usize; grid.n];
        let values = (0..grid.len())
            .map(|flat| {
                grid.decode(flat, &mut idx);
                let d = grid.dist_to_boundary(&idx);
                if d <= zero_width {
                    0.0
                } else if d >= one_width {
                    1.0
                } else {
                    smoothstep((d - zero_width) / (one_width - zero_width))
                }
            })
            .collect();
        Ok(Cutoff {
            grid: *grid,
            inner_width: zero_width,
            outer_width: one_width,
            values,
        })
    }

    /// Constant-one cutoff; only meaningful in tests of mask identities.
    #[doc(hidden)]
    pub fn constant_one(grid: &GridSpec) -> Self {
        Cutoff {
            grid: *grid,
            inner_width: 0.0,
            outer_width: 0.0,
            values: vec![1.0; grid.len()],
        }
    }
}

pub(crate) fn decode_dims(mut flat: usize, dims: &[usize], idx: &mut [usize]) {
    for a in (0..dims.len()).rev() {
        idx[a] = flat % dims[a];
        flat /= dims[a];
    }
}

pub(crate) fn encode_dims(idx: &[usize], dims: &[usize]) -> usize {
    let mut flat = 0;
    for a in 0..dims.len() {
        flat = flat * dims[a] + idx[a];
    }
    flat
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_arithmetic() {
        let g = GridSpec::new(3, 16).unwrap();
        assert!((g.spacing - 1.0 / 17.0).abs() < 1e-15);
        assert!((g.spacing * (g.pts as f64 + 1.0) - g.box_side).abs() < 1e-15);
        let g31 = GridSpec::new(3, 31).unwrap();
        assert_eq!(g31.len(), 29791);
    }

    #[test]
    fn rejects_low_dimension_and_coarse_grid() {
        assert!(matches!(GridSpec::new(2, 16), Err(Error::DimensionTooLow(2))));
        assert!(matches!(GridSpec::new(3, 4), Err(Error::GridTooCoarse(4))));
    }

    #[test]
    fn full_face_patch_covers_all_nodes() {
        let g = GridSpec::new(3, 16).unwrap();
        let p = BoundaryPatch::new(
            &g,
            FaceId { axis: 0, side: Side::Lo },
            Window::full(3),
        )
        .unwrap();
        assert_eq!(p.count(), 16 * 16);
    }

    #[test]
    fn quarter_window_count() {
        for pts in [16usize, 31] {
            let g = GridSpec::new(3, pts).unwrap();
            let w = Window {
                ranges: vec![(0.0, 0.5), (0.0, 0.5)],
            };
            let p = BoundaryPatch::new(&g, FaceId { axis: 0, side: Side::Hi }, w).unwrap();
            assert_eq!(p.count(), (pts / 2) * (pts / 2));
        }
    }

    #[test]
    fn window_outside_face_errors() {
        let g = GridSpec::new(3, 16).unwrap();
        let w = Window {
            ranges: vec![(0.2, 1.4), (0.0, 0.5)],
        };
        assert!(BoundaryPatch::new(&g, FaceId { axis: 1, side: Side::Lo }, w).is_err());
        let empty = Window {
            ranges: vec![(0.3, 0.3), (0.0, 0.5)],
        };
        assert!(BoundaryPatch::new(&g, FaceId { axis: 1, side: Side::Lo }, empty).is_err());
    }

    #[test]
    fn patch_masks_idempotent() {
        let g = GridSpec::new(3, 12).unwrap();
        let w = Window {
            ranges: vec![(0.1, 0.8), (0.0, 0.6)],
        };
        let p1 = BoundaryPatch::new(&g, FaceId { axis: 2, side: Side::Hi }, w.clone()).unwrap();
        let p2 = BoundaryPatch::new(&g, FaceId { axis: 2, side: Side::Hi }, w).unwrap();
        assert_eq!(p1.mask, p2.mask);
    }

    #[test]
    fn nested_shells() {
        let g = GridSpec::new(3, 31).unwrap();
        let c = NeighborhoodChain::new(&g, [0.20, 0.15, 0.10, 0.05]).unwrap();
        for j in 1..4 {
            assert!(c.masks[j].implies(&c.masks[j - 1]));
            assert!(c.masks[j].count() < c.masks[j - 1].count());
        }
        assert!(c.shell23().count() > 0);
    }

    #[test]
    fn non_monotone_widths_error() {
        let g = GridSpec::new(3, 31).unwrap();
        assert!(NeighborhoodChain::new(&g, [0.1, 0.1, 0.05, 0.02]).is_err());
    }

    #[test]
    fn cutoff_plateaus_are_exact() {
        let g = GridSpec::new(3, 24).unwrap();
        let chi = Cutoff::between(&g, 0.06, 0.18).unwrap();
        let mut idx = vec![0usize; 3];
        let mut seen_zero = false;
        let mut seen_one = false;
        let mut seen_mid = false;
        for flat in 0..g.len() {
            g.decode(flat, &mut idx);
            let d = g.dist_to_boundary(&idx);
            let v = chi.values[flat];
            assert!((0.0..=1.0).contains(&v));
            if d <= 0.06 {
                assert_eq!(v, 0.0);
                seen_zero = true;
            } else if d >= 0.18 {
                assert_eq!(v, 1.0);
                seen_one = true;
            } else {
                seen_mid = true;
            }
        }
        assert!(seen_zero && seen_one && seen_mid);
    }

    #[test]
    fn cutoff_discrete_gradient_bounded() {
        let g = GridSpec::new(3, 24).unwrap();
        let chi = Cutoff::between(&g, 0.06, 0.18).unwrap();
        let bound = 2.0 / (0.18 - 0.06);
        let mut idx = vec![0usize; 3];
        for flat in 0..g.len() {
            g.decode(flat, &mut idx);
            for a in 0..3 {
                if idx[a] + 1 < g.pts {
                    let d = (chi.values[flat + g.stride(a)] - chi.values[flat]).abs() / g.spacing;
                    assert!(d <= bound + 1e-12, "gradient {d} exceeds {bound}");
                }
            }
        }
    }

    #[test]
    fn constant_one_cutoff_rejected_in_production() {
        let g = GridSpec::new(3, 16).unwrap();
        assert!(Cutoff::between(&g, 0.0, 0.2).is_err());
    }

    #[test]
    fn cutoff_needs_three_layers() {
        let g = GridSpec::new(3, 24).unwrap();
        // gap of one layer only
        assert!(Cutoff::between(&g, 0.05, 0.10).is_err());
    }
}
