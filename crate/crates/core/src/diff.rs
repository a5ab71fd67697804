//! Discrete differential operators: gradient, divergence, exterior
//! derivative, and Dirichlet Laplacians with boundary traces.
//!
//! Central second-order differences inside; second-order one-sided stencils
//! on the first interior layer when no boundary value is available.

use crate::error::Result;
use crate::field::{BoundaryField, FaceField, ScalarField, TwoFormField, VectorField, C64, ZERO};
use crate::grid::{GridSpec, Side};
use crate::par;

/// Partial derivative along `axis`; one-sided second order at the layer.
pub fn partial(f: &ScalarField, axis: usize) -> ScalarField {
    let g = f.grid;
    let s2 = 2.0 * g.spacing;
    let stride = g.stride(axis);
    let mut out = ScalarField::zeros(&g);
    let vals = &f.values;
    par::for_each_chunk_mut(&mut out.values, 1 << 12, |start, sl| {
        let mut idx = vec![0usize; g.n];
        for (k, o) in sl.iter_mut().enumerate() {
            let flat = start + k;
            g.decode(flat, &mut idx);
            let i = idx[axis];
            *o = if i == 0 {
                (-3.0 * vals[flat] + 4.0 * vals[flat + stride] - vals[flat + 2 * stride]) / s2
            } else if i == g.pts - 1 {
                (3.0 * vals[flat] - 4.0 * vals[flat - stride] + vals[flat - 2 * stride]) / s2
            } else {
                (vals[flat + stride] - vals[flat - stride]) / s2
            };
        }
    });
    out
}

/// Partial derivative along `axis` for a field with zero Dirichlet trace:
/// central everywhere, using 0 at the boundary planes.
pub fn partial_dirichlet0(f: &ScalarField, axis: usize) -> ScalarField {
    let g = f.grid;
    let s2 = 2.0 * g.spacing;
    let stride = g.stride(axis);
    let mut out = ScalarField::zeros(&g);
    let vals = &f.values;
    par::for_each_chunk_mut(&mut out.values, 1 << 12, |start, sl| {
        let mut idx = vec![0usize; g.n];
        for (k, o) in sl.iter_mut().enumerate() {
            let flat = start + k;
            g.decode(flat, &mut idx);
            let i = idx[axis];
            let hi = if i + 1 < g.pts { vals[flat + stride] } else { ZERO };
            let lo = if i > 0 { vals[flat - stride] } else { ZERO };
            *o = (hi - lo) / s2;
        }
    });
    out
}

pub fn gradient(f: &ScalarField) -> VectorField {
    VectorField {
        components: (0..f.grid.n).map(|a| partial(f, a)).collect(),
    }
}

/// Gradient of a field with zero boundary values (central at the layer).
pub fn gradient_dirichlet0(f: &ScalarField) -> VectorField {
    VectorField {
        components: (0..f.grid.n).map(|a| partial_dirichlet0(f, a)).collect(),
    }
}

pub fn divergence(v: &VectorField) -> ScalarField {
    let g = *v.grid();
    let mut out = ScalarField::zeros(&g);
    for a in 0..g.n {
        let d = partial(&v.components[a], a);
        out.add_scaled(&d, crate::field::ONE);
    }
    out
}

/// Exterior derivative: components `d_j A_k - d_k A_j` for `j < k`.
pub fn d_operator(v: &VectorField) -> TwoFormField {
    let g = *v.grid();
    let mut comps = Vec::with_capacity(TwoFormField::pair_count(g.n));
    for (j, k) in TwoFormField::pairs(g.n) {
        let djak = partial(&v.components[k], j);
        let mut c = djak;
        let dkaj = partial(&v.components[j], k);
        c.add_scaled(&dkaj, C64::new(-1.0, 0.0));
        comps.push(c);
    }
    TwoFormField {
        grid: g,
        components: comps,
    }
}

/// Dirichlet Laplacian with prescribed boundary values `trace`.
pub fn laplacian_with_trace(f: &ScalarField, trace: &BoundaryField) -> ScalarField {
    let g = f.grid;
    let s2 = g.spacing * g.spacing;
    let mut out = ScalarField::zeros(&g);
    let vals = &f.values;
    par::for_each_chunk_mut(&mut out.values, 1 << 12, |start, sl| {
        let mut idx = vec![0usize; g.n];
        for (k, o) in sl.iter_mut().enumerate() {
            let flat = start + k;
            g.decode(flat, &mut idx);
            let mut acc = ZERO;
            for a in 0..g.n {
                let stride = g.stride(a);
                let i = idx[a];
                let lo = if i > 0 {
                    vals[flat - stride]
                } else {
                    trace.faces[2 * a].values[face_flat(&g, a, &idx)]
                };
                let hi = if i + 1 < g.pts {
                    vals[flat + stride]
                } else {
                    trace.faces[2 * a + 1].values[face_flat(&g, a, &idx)]
                };
                acc += lo - 2.0 * vals[flat] + hi;
            }
            *o = acc / s2;
        }
    });
    out
}

/// Homogeneous Dirichlet Laplacian (zero boundary values), matrix-free.
pub fn laplacian0(f: &ScalarField) -> ScalarField {
    let mut out = ScalarField::zeros(&f.grid);
    laplacian0_into(&f.grid, &f.values, &mut out.values);
    out
}

pub(crate) fn laplacian0_into(g: &GridSpec, vals: &[C64], out: &mut [C64]) {
    let s2 = g.spacing * g.spacing;
    let n = g.n;
    let pts = g.pts;
    par::for_each_chunk_mut(out, 1 << 12, |start, sl| {
        let mut idx = vec![0usize; n];
        for (k, o) in sl.iter_mut().enumerate() {
            let flat = start + k;
            g.decode(flat, &mut idx);
            let mut acc = -2.0 * n as f64 * vals[flat];
            for a in 0..n {
                let stride = g.stride(a);
                let i = idx[a];
                if i > 0 {
                    acc += vals[flat - stride];
                }
                if i + 1 < pts {
                    acc += vals[flat + stride];
                }
            }
            *o = acc / s2;
        }
    });
}

/// Flat index into a face array for an interior node adjacent to face
/// `(axis, *)`: drop the `axis` coordinate.
#[inline]
pub(crate) fn face_flat(g: &GridSpec, axis: usize, idx: &[usize]) -> usize {
    let mut flat = 0;
    for a in 0..g.n {
        if a != axis {
            flat = flat * g.pts + idx[a];
        }
    }
    flat
}

/// One-sided second-order outward normal derivative on a face, from the
/// boundary value `b` and the first two interior layers.
pub fn normal_derivative(f: &ScalarField, boundary: &FaceField) -> FaceField {
    let g = f.grid;
    let face = boundary.face;
    let stride = g.stride(face.axis);
    let s2 = 2.0 * g.spacing;
    let mut out = FaceField::zeros(&g, face);
    let tdims = vec![g.pts; g.n - 1];
    let tax = face.transverse(g.n);
    let mut tidx = vec![0usize; g.n - 1];
    let mut idx = vec![0usize; g.n];
    for flat in 0..g.face_len() {
        crate::grid::decode_dims(flat, &tdims, &mut tidx);
        for (t, &a) in tax.iter().enumerate() {
            idx[a] = tidx[t];
        }
        idx[face.axis] = match face.side {
            Side::Lo => 0,
            Side::Hi => g.pts - 1,
        };
        let i0 = g.encode(&idx);
        let (u1, u2) = match face.side {
            Side::Lo => (f.values[i0], f.values[i0 + stride]),
            Side::Hi => (f.values[i0], f.values[i0 - stride]),
        };
        // outward derivative: (3 u_b - 4 u_1 + u_2) / (2 s)
        out.values[flat] = (3.0 * boundary.values[flat] - 4.0 * u1 + u2) / s2;
    }
    out
}

/// Normal derivatives on all faces.
pub fn normal_derivative_all(f: &ScalarField, trace: &BoundaryField) -> BoundaryField {
    BoundaryField {
        faces: trace
            .faces
            .iter()
            .map(|bf| normal_derivative(f, bf))
            .collect(),
    }
}

/// Integer-order Sobolev norm on the grid: L2 norms of all iterated
/// derivatives up to `order`, via repeated application of `gradient`.
/// Valid for fields that need not vanish at the boundary.
pub fn sobolev_grid_norm(f: &ScalarField, order: usize) -> f64 {
    let mut level: Vec<ScalarField> = vec![f.clone()];
    let mut total = crate::norms::l2_norm(f).powi(2);
    for _ in 0..order {
        let mut next = Vec::with_capacity(level.len() * f.grid.n);
        for fld in &level {
            for a in 0..f.grid.n {
                let d = partial(fld, a);
                total += crate::norms::l2_norm(&d).powi(2);
                next.push(d);
            }
        }
        level = next;
    }
    total.sqrt()
}

/// Same restricted to a mask: quadrature only over masked nodes.
pub fn sobolev_grid_norm_on(f: &ScalarField, order: usize, mask: &crate::grid::Mask) -> f64 {
    let mut level: Vec<ScalarField> = vec![f.clone()];
    let mut total = crate::norms::l2_norm_on(f, mask).powi(2);
    for _ in 0..order {
        let mut next = Vec::with_capacity(level.len() * f.grid.n);
        for fld in &level {
            for a in 0..f.grid.n {
                let d = partial(fld, a);
                total += crate::norms::l2_norm_on(&d, mask).powi(2);
                next.push(d);
            }
        }
        level = next;
    }
    total.sqrt()
}

pub fn check_finite_result(f: &ScalarField, what: &'static str) -> Result<()> {
    f.check_finite(what)
}
