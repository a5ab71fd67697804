//! Discrete operators `lap^2 + A.D + q`, the formal adjoint, the Green
//! identity with exact summation-by-parts boundary fluxes, a fast
//! sine-diagonalization Poisson solver, and the monolithic Navier forward
//! solver (BiCGStab preconditioned by the unperturbed block inverse).

use crate::diff::{self, face_flat};
use crate::error::{Error, Result};
use crate::field::{
    BoundaryField, BoundaryPair, PaddedField, ScalarField, VectorField, C64, ONE, ZERO,
};
use crate::grid::{GridSpec, Mask, Side};
use crate::norms;
use crate::par;
use crate::spectral::SineTransform;
use serde::{Deserialize, Serialize};

/// First- and zeroth-order coefficients of the operator.
#[derive(Debug, Clone)]
pub struct Coefficients {
    pub a: VectorField,
    pub q: ScalarField,
    /// Nodes where the set coincides with its reference pair.
    pub agreement_mask: Option<Mask>,
}

impl Coefficients {
    pub fn zero(grid: &GridSpec) -> Self {
        Coefficients {
            a: VectorField::zeros(grid),
            q: ScalarField::zeros(grid),
            agreement_mask: None,
        }
    }

    /// Unchecked construction for manufactured tests.
    pub fn free(a: VectorField, q: ScalarField) -> Self {
        Coefficients {
            a,
            q,
            agreement_mask: None,
        }
    }

    /// Admissible-set construction: `|A|_{H^s} <= bound`, `|q|_Linf <= bound`,
    /// and equality with the reference pair on the collar mask.
    pub fn admissible(
        a: VectorField,
        q: ScalarField,
        a0: &VectorField,
        q0: &ScalarField,
        omega0: &Mask,
        bound: f64,
        s: f64,
    ) -> Result<Self> {
        a.check_finite("coefficient A")?;
        q.check_finite("coefficient q")?;
        let qmax = q.max_abs();
        if qmax > bound {
            return Err(Error::NotAdmissible(format!(
                "|q|_Linf = {qmax:.3e} exceeds M = {bound}"
            )));
        }
        let a_norm = match norms::hs_norm_vec(&a, s) {
            Ok(v) => v,
            // fields that do not vanish near the boundary fall back to the
            // integer-order grid norm
            Err(Error::ZeroExtensionInvalid(_)) => {
                let k = s.ceil() as usize;
                a.components
                    .iter()
                    .map(|c| diff::sobolev_grid_norm(c, k).powi(2))
                    .sum::<f64>()
                    .sqrt()
            }
            Err(e) => return Err(e),
        };
        if a_norm > bound {
            return Err(Error::NotAdmissible(format!(
                "|A|_Hs = {a_norm:.3e} exceeds M = {bound}"
            )));
        }
        for (c, c0) in a.components.iter().zip(&a0.components) {
            let d = c.sub(c0).max_abs_on(omega0);
            if d > 1e-13 {
                return Err(Error::NotAdmissible(format!(
                    "A differs from the reference by {d:.3e} on the known collar"
                )));
            }
        }
        let dq = q.sub(q0).max_abs_on(omega0);
        if dq > 1e-13 {
            return Err(Error::NotAdmissible(format!(
                "q differs from the reference by {dq:.3e} on the known collar"
            )));
        }
        Ok(Coefficients {
            a,
            q,
            agreement_mask: Some(omega0.clone()),
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.q.grid
    }

    /// Coefficients of the formal adjoint: `conj(A)` and
    /// `conj(q) - i div(conj(A))` with the grid divergence.
    pub fn adjoint_fields(&self) -> (VectorField, ScalarField) {
        let g = *self.grid();
        let a_bar = VectorField {
            components: self
                .a
                .components
                .iter()
                .map(|c| ScalarField {
                    grid: g,
                    values: c.values.iter().map(|v| v.conj()).collect(),
                })
                .collect(),
        };
        let div = diff::divergence(&a_bar);
        let mut q_adj = ScalarField {
            grid: g,
            values: self.q.values.iter().map(|v| v.conj()).collect(),
        };
        q_adj.add_scaled(&div, C64::new(0.0, -1.0));
        (a_bar, q_adj)
    }
}

/// Side length of the closed lattice (interior + boundary planes).
fn closed_side(g: &GridSpec) -> usize {
    g.pts + 2
}

fn closed_len(g: &GridSpec) -> usize {
    closed_side(g).pow(g.n as u32)
}

fn closed_encode(g: &GridSpec, idx: &[usize]) -> usize {
    let side = closed_side(g);
    let mut flat = 0;
    for a in 0..g.n {
        flat = flat * side + idx[a];
    }
    flat
}

/// Five-point Laplacian at every closed node, from padded values.
/// Closed index `c` corresponds to padded index `c + 1`.
fn laplacian_closed(u: &PaddedField) -> Vec<C64> {
    let g = u.grid;
    let s2 = g.spacing * g.spacing;
    let side = closed_side(&g);
    let dims = vec![side; g.n];
    let mut out = vec![ZERO; closed_len(&g)];
    let vals = &u.values;
    par::for_each_chunk_mut(&mut out, 1 << 12, |start, sl| {
        let mut idx = vec![0usize; g.n];
        let mut pid = vec![0usize; g.n];
        for (k, o) in sl.iter_mut().enumerate() {
            crate::grid::decode_dims(start + k, &dims, &mut idx);
            for a in 0..g.n {
                pid[a] = idx[a] + 1;
            }
            let center = vals[u.encode(&pid)];
            let mut acc = -2.0 * g.n as f64 * center;
            for a in 0..g.n {
                let st = u.stride(a);
                let base = u.encode(&pid);
                acc += vals[base - st] + vals[base + st];
            }
            *o = acc / s2;
        }
    });
    out
}

/// Laplacian of a closed-lattice array at the interior nodes.
fn laplacian_of_closed(g: &GridSpec, w: &[C64]) -> ScalarField {
    let s2 = g.spacing * g.spacing;
    let side = closed_side(g);
    let mut out = ScalarField::zeros(g);
    par::for_each_chunk_mut(&mut out.values, 1 << 12, |start, sl| {
        let mut idx = vec![0usize; g.n];
        let mut cid = vec![0usize; g.n];
        for (k, o) in sl.iter_mut().enumerate() {
            g.decode(start + k, &mut idx);
            for a in 0..g.n {
                cid[a] = idx[a] + 1;
            }
            let base = closed_encode(g, &cid);
            let mut acc = -2.0 * g.n as f64 * w[base];
            for a in 0..g.n {
                let st = side.pow((g.n - 1 - a) as u32);
                acc += w[base - st] + w[base + st];
            }
            *o = acc / s2;
        }
    });
    out
}

/// `A . D u` at interior nodes with central differences from padded values.
fn first_order_term(a: &VectorField, u: &PaddedField) -> ScalarField {
    let g = u.grid;
    let s2 = 2.0 * g.spacing;
    let mut out = ScalarField::zeros(&g);
    let vals = &u.values;
    par::for_each_chunk_mut(&mut out.values, 1 << 12, |start, sl| {
        let mut idx = vec![0usize; g.n];
        let mut pid = vec![0usize; g.n];
        for (k, o) in sl.iter_mut().enumerate() {
            let flat = start + k;
            g.decode(flat, &mut idx);
            for ax in 0..g.n {
                pid[ax] = idx[ax] + PaddedField::PAD;
            }
            let base = u.encode(&pid);
            let mut acc = ZERO;
            for ax in 0..g.n {
                let st = u.stride(ax);
                let du = (vals[base + st] - vals[base - st]) / s2;
                acc += a.components[ax].values[flat] * C64::new(0.0, -1.0) * du;
            }
            *o = acc;
        }
    });
    out
}

/// Apply `L_{A,q} = lap^2 + A.D + q` to a padded field; the biharmonic part
/// is the composition of two five-point Laplacians through the closed lattice.
pub fn apply_l(coeffs: &Coefficients, u: &PaddedField) -> Result<ScalarField> {
    let w = laplacian_closed(u);
    let mut out = laplacian_of_closed(&u.grid, &w);
    let ad = first_order_term(&coeffs.a, u);
    out.add_scaled(&ad, ONE);
    let ui = u.interior();
    for (o, (qv, uv)) in out
        .values
        .iter_mut()
        .zip(coeffs.q.values.iter().zip(&ui.values))
    {
        *o += qv * uv;
    }
    out.check_finite("apply_l output")?;
    Ok(out)
}

/// Apply the formal adjoint `lap^2 + conj(A).D + (conj(q) - i div conj(A))`.
pub fn apply_l_adjoint(coeffs: &Coefficients, u: &PaddedField) -> Result<ScalarField> {
    let (a_bar, q_adj) = coeffs.adjoint_fields();
    let adj = Coefficients::free(a_bar, q_adj);
    apply_l(&adj, u)
}

/// Volume quadrature `spacing^n sum f conj(g)` over interior nodes.
fn volume_pairing(g: &GridSpec, f: &[C64], v: &[C64]) -> C64 {
    let w = g.spacing.powi(g.n as i32);
    w * par::sum_complex(f.len(), |i| f[i] * v[i].conj())
}

/// Green identity report: volume pairings, the five boundary terms in the
/// discrete summation-by-parts form, and the defect.
#[derive(Debug, Clone)]
pub struct GreensReport {
    /// `<L u, v>`
    pub lhs_volume: C64,
    /// `<u, L* v>`
    pub rhs_volume: C64,
    /// `-i int nu.(u A conj v)`, `int d_nu(lap u) conj v`,
    /// `-int lap u d_nu(conj v)`, `int d_nu u lap(conj v)`,
    /// `-int u d_nu(lap conj v)`.
    pub boundary_terms: [C64; 5],
    pub residual: f64,
}

/// Evaluate the Green identity defect
/// `|<L u, v> - <u, L* v> - (five boundary terms)|` on padded fields
/// carrying full traces. Boundary fluxes use the first-order one-sided
/// differences that make the pure-biharmonic identity exact; the residual
/// then measures the discrete product-rule gap, `O(spacing^2)` for smooth
/// nonconstant coefficients and rounding-level for constant ones.
pub fn greens_identity(
    coeffs: &Coefficients,
    u: &PaddedField,
    v: &PaddedField,
) -> Result<GreensReport> {
    let g = u.grid;
    let lu = apply_l(coeffs, u)?;
    let lsv = apply_l_adjoint(coeffs, v)?;
    let ui = u.interior();
    let vi = v.interior();
    let lhs_volume = volume_pairing(&g, &lu.values, &vi.values);
    let rhs_volume = volume_pairing(&g, &ui.values, &lsv.values);

    let wu = laplacian_closed(u);
    let wv = laplacian_closed(v);

    let s = g.spacing;
    let area = s.powi((g.n - 1) as i32);
    let mut t_a = ZERO;
    let mut t2 = ZERO;
    let mut t3 = ZERO;
    let mut t4 = ZERO;
    let mut t5 = ZERO;

    let tdims = vec![g.pts; g.n - 1];
    let mut tidx = vec![0usize; g.n - 1];
    let mut pid = vec![0usize; g.n];
    let mut cid = vec![0usize; g.n];
    let mut iid = vec![0usize; g.n];

    for axis in 0..g.n {
        for side in [Side::Lo, Side::Hi] {
            let nu = if side == Side::Lo { -1.0 } else { 1.0 };
            let tax: Vec<usize> = (0..g.n).filter(|&a| a != axis).collect();
            for tflat in 0..g.face_len() {
                crate::grid::decode_dims(tflat, &tdims, &mut tidx);
                // padded indices of boundary node and first interior node
                for (t, &a) in tax.iter().enumerate() {
                    pid[a] = tidx[t] + PaddedField::PAD;
                    cid[a] = tidx[t] + 1;
                    iid[a] = tidx[t];
                }
                let (pb, pa, ib, ia) = match side {
                    Side::Lo => (1usize, 2usize, 0usize, 0usize),
                    Side::Hi => (g.pts + 2, g.pts + 1, g.pts + 1, g.pts - 1),
                };
                pid[axis] = pb;
                cid[axis] = ib;
                iid[axis] = ia;
                let u_b = u.values[u.encode(&pid)];
                let v_b = v.values[v.encode(&pid)];
                let wu_b = wu[closed_encode(&g, &cid)];
                let wv_b = wv[closed_encode(&g, &cid)];
                pid[axis] = pa;
                cid[axis] = if side == Side::Lo { 1 } else { g.pts };
                let u_a = u.values[u.encode(&pid)];
                let v_a = v.values[v.encode(&pid)];
                let wu_a = wu[closed_encode(&g, &cid)];
                let wv_a = wv[closed_encode(&g, &cid)];

                // first-order outward fluxes
                let dnu_u = (u_b - u_a) / s;
                let dnu_v = (v_b - v_a) / s;
                let dnu_wu = (wu_b - wu_a) / s;
                let dnu_wv = (wv_b - wv_a) / s;

                t2 += area * dnu_wu * v_b.conj();
                t3 -= area * wu_b * dnu_v.conj();
                t4 += area * dnu_u * wv_b.conj();
                t5 -= area * u_b * dnu_wv.conj();

                // A-term flux, with A linearly extrapolated to the boundary
                let iflat = g.encode(&iid);
                let mut iid2 = iid.clone();
                iid2[axis] = match side {
                    Side::Lo => 1,
                    Side::Hi => g.pts - 2,
                };
                let iflat2 = g.encode(&iid2);
                let a_adj = coeffs.a.components[axis].values[iflat];
                let a_b = 2.0 * a_adj - coeffs.a.components[axis].values[iflat2];
                // conj(conj(A_a) v) = A_a conj(v)
                let g_adj = a_adj * v_a.conj();
                let g_b = a_b * v_b.conj();
                t_a += nu * C64::new(0.0, -1.0) * 0.5 * area * (u_b * g_adj + u_a * g_b);
            }
        }
    }

    let boundary_terms = [t_a, t2, t3, t4, t5];
    let total: C64 = boundary_terms.iter().sum();
    let residual = (lhs_volume - rhs_volume - total).norm();
    Ok(GreensReport {
        lhs_volume,
        rhs_volume,
        boundary_terms,
        residual,
    })
}

/// Exact solver for the homogeneous-Dirichlet Poisson problem
/// `lap_h phi = rhs`, `phi = 0` on the boundary, by sine diagonalization.
pub struct PoissonSolver {
    grid: GridSpec,
    st: SineTransform,
    eig: Vec<f64>,
}

impl PoissonSolver {
    pub fn new(grid: &GridSpec) -> Self {
        let st = SineTransform::new(grid.pts);
        let eig = (0..grid.pts).map(|k| st.eigenvalue(k, grid.spacing)).collect();
        PoissonSolver {
            grid: *grid,
            st,
            eig,
        }
    }

    pub fn solve(&self, rhs: &ScalarField) -> ScalarField {
        let mut out = rhs.clone();
        self.solve_in_place(&mut out.values);
        out
    }

    pub fn solve_in_place(&self, values: &mut [C64]) {
        let g = self.grid;
        let dims = vec![g.pts; g.n];
        self.st.analysis(values, &dims);
        let eig = &self.eig;
        par::for_each_chunk_mut(values, 1 << 12, |start, sl| {
            let mut kidx = vec![0usize; g.n];
            for (t, v) in sl.iter_mut().enumerate() {
                g.decode(start + t, &mut kidx);
                let lam: f64 = kidx.iter().map(|&k| eig[k]).sum();
                *v /= -lam;
            }
        });
        self.st.synthesis(values, &dims);
    }

    /// Max modulus of the sine synthesis evaluated on the boundary planes;
    /// zero up to rounding by construction, reported rather than assumed.
    pub fn boundary_residual(&self, phi: &ScalarField) -> f64 {
        // sin(pi k (i+1)/(pts+1)) at i+1 = 0 or pts+1 is sin(0) or sin(pi k)
        let g = self.grid;
        let dims = vec![g.pts; g.n];
        let mut coeffs = phi.values.clone();
        self.st.analysis(&mut coeffs, &dims);
        let mut mx: f64 = 0.0;
        for k in 0..g.pts {
            let edge = (std::f64::consts::PI * (k as f64 + 1.0)).sin().abs();
            mx = mx.max(edge);
        }
        let total: f64 = coeffs.iter().map(|c| c.norm()).sum();
        mx * total
    }
}

/// Dirichlet data for the Navier problem.
pub type NavierTraces = BoundaryPair;

#[derive(Debug, Clone)]
pub struct NavierProblem {
    pub coeffs: Coefficients,
    /// Interior source `F`.
    pub rhs: ScalarField,
    /// `f = u` and `g = lap u` on the boundary.
    pub traces: NavierTraces,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Condition {
    Ok,
    NearSingular,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    /// True relative residual of the monolithic block system.
    pub residual: f64,
    pub condition: Condition,
}

#[derive(Debug, Clone)]
pub struct NavierSolution {
    pub u: ScalarField,
    /// `lap u` on interior nodes (the auxiliary block unknown).
    pub lap_u: ScalarField,
    pub report: SolveReport,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
    /// Grids up to this size may fall back to a dense direct solve when the
    /// Krylov iteration stagnates.
    pub direct_max_pts: usize,
    /// Relative residual above which the system is flagged near-singular.
    pub near_singular_threshold: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: 1e-10,
            max_iter: 400,
            direct_max_pts: 12,
            near_singular_threshold: 1e-6,
        }
    }
}

/// The monolithic block operator
/// `[lap, -I; A.D + q, lap]` acting on `(u, v)` with homogeneous traces.
struct BlockOperator<'a> {
    g: GridSpec,
    coeffs: &'a Coefficients,
}

impl BlockOperator<'_> {
    fn apply(&self, x: &[C64], out: &mut [C64]) {
        let g = self.g;
        let len = g.len();
        let (u, v) = x.split_at(len);
        let s2 = g.spacing * g.spacing;
        let s2c = 2.0 * g.spacing;
        let coeffs = self.coeffs;
        let (o1, o2) = out.split_at_mut(len);
        // row 1: lap0 u - v
        par::for_each_chunk_mut(o1, 1 << 12, |start, sl| {
            let mut idx = vec![0usize; g.n];
            for (k, o) in sl.iter_mut().enumerate() {
                let flat = start + k;
                g.decode(flat, &mut idx);
                let mut acc = -2.0 * g.n as f64 * u[flat];
                for a in 0..g.n {
                    let st = g.stride(a);
                    if idx[a] > 0 {
                        acc += u[flat - st];
                    }
                    if idx[a] + 1 < g.pts {
                        acc += u[flat + st];
                    }
                }
                *o = acc / s2 - v[flat];
            }
        });
        // row 2: lap0 v + A.D0 u + q u
        par::for_each_chunk_mut(o2, 1 << 12, |start, sl| {
            let mut idx = vec![0usize; g.n];
            for (k, o) in sl.iter_mut().enumerate() {
                let flat = start + k;
                g.decode(flat, &mut idx);
                let mut acc = -2.0 * g.n as f64 * v[flat];
                let mut first = ZERO;
                for a in 0..g.n {
                    let st = g.stride(a);
                    let lo = if idx[a] > 0 { v[flat - st] } else { ZERO };
                    let hi = if idx[a] + 1 < g.pts { v[flat + st] } else { ZERO };
                    acc += lo + hi;
                    let ulo = if idx[a] > 0 { u[flat - st] } else { ZERO };
                    let uhi = if idx[a] + 1 < g.pts { u[flat + st] } else { ZERO };
                    first += coeffs.a.components[a].values[flat]
                        * C64::new(0.0, -1.0)
                        * ((uhi - ulo) / s2c);
                }
                *o = acc / s2 + first + coeffs.q.values[flat] * u[flat];
            }
        });
    }
}

/// Assemble the trace-lifted right-hand side `(b1, b2)`.
fn assemble_rhs(problem: &NavierProblem) -> Vec<C64> {
    let g = *problem.coeffs.grid();
    let len = g.len();
    let s2 = g.spacing * g.spacing;
    let s2c = 2.0 * g.spacing;
    let mut b = vec![ZERO; 2 * len];
    let (b1, b2) = b.split_at_mut(len);
    let f = &problem.traces.f;
    let gg = &problem.traces.g;
    let mut idx = vec![0usize; g.n];
    for flat in 0..len {
        g.decode(flat, &mut idx);
        let mut lift1 = ZERO;
        let mut lift2 = ZERO;
        let mut lift_d = ZERO;
        for a in 0..g.n {
            if idx[a] == 0 {
                let ff = f.faces[2 * a].values[face_flat(&g, a, &idx)];
                let gv = gg.faces[2 * a].values[face_flat(&g, a, &idx)];
                lift1 += ff / s2;
                lift2 += gv / s2;
                // central D at the layer sees -f_lo/(2s)
                lift_d += problem.coeffs.a.components[a].values[flat]
                    * C64::new(0.0, -1.0)
                    * (-ff / s2c);
            }
            if idx[a] + 1 == g.pts {
                let ff = f.faces[2 * a + 1].values[face_flat(&g, a, &idx)];
                let gv = gg.faces[2 * a + 1].values[face_flat(&g, a, &idx)];
                lift1 += ff / s2;
                lift2 += gv / s2;
                lift_d += problem.coeffs.a.components[a].values[flat]
                    * C64::new(0.0, -1.0)
                    * (ff / s2c);
            }
        }
        b1[flat] = -lift1;
        b2[flat] = problem.rhs.values[flat] - lift2 - lift_d;
    }
    b
}

/// Exact inverse of the unperturbed block `[lap, -I; 0, lap]`.
struct BlockPreconditioner {
    poisson: PoissonSolver,
}

impl BlockPreconditioner {
    fn apply(&self, r: &[C64], out: &mut [C64]) {
        let len = r.len() / 2;
        let (r1, r2) = r.split_at(len);
        let (o1, o2) = out.split_at_mut(len);
        o2.copy_from_slice(r2);
        self.poisson.solve_in_place(o2);
        for i in 0..len {
            o1[i] = r1[i] + o2[i];
        }
        self.poisson.solve_in_place(o1);
    }
}

/// Solve the Navier problem `L u = F`, `u = f`, `lap u = g` on the boundary.
/// Near-singular systems are flagged in the report, never silently accepted.
pub fn solve_navier(problem: &NavierProblem, cfg: &SolverConfig) -> Result<NavierSolution> {
    problem.rhs.check_finite("navier rhs")?;
    let g = *problem.coeffs.grid();
    let len = g.len();
    let op = BlockOperator {
        g,
        coeffs: &problem.coeffs,
    };
    let b = assemble_rhs(problem);
    let pre = BlockPreconditioner {
        poisson: PoissonSolver::new(&g),
    };
    let bnorm = par::norm(&b);
    let mut x = vec![ZERO; 2 * len];
    if bnorm == 0.0 {
        return Ok(NavierSolution {
            u: ScalarField::zeros(&g),
            lap_u: ScalarField::zeros(&g),
            report: SolveReport {
                iterations: 0,
                residual: 0.0,
                condition: Condition::Ok,
            },
        });
    }

    let (iterations, _) = bicgstab(&op, &pre, &b, &mut x, cfg.tol, cfg.max_iter);
    // true residual of the block system
    let mut ax = vec![ZERO; 2 * len];
    op.apply(&x, &mut ax);
    for i in 0..2 * len {
        ax[i] = b[i] - ax[i];
    }
    let mut residual = par::norm(&ax) / bnorm;

    let mut condition = Condition::Ok;
    if residual > cfg.tol {
        if g.pts <= cfg.direct_max_pts {
            if let Some(xd) = dense_direct_solve(&op, &b) {
                op.apply(&xd, &mut ax);
                for i in 0..2 * len {
                    ax[i] = b[i] - ax[i];
                }
                let rd = par::norm(&ax) / bnorm;
                if rd < residual {
                    x = xd;
                    residual = rd;
                }
            }
        }
        if residual > cfg.near_singular_threshold {
            condition = Condition::NearSingular;
        }
    }

    let u = ScalarField {
        grid: g,
        values: x[..len].to_vec(),
    };
    let lap_u = ScalarField {
        grid: g,
        values: x[len..].to_vec(),
    };
    Ok(NavierSolution {
        u,
        lap_u,
        report: SolveReport {
            iterations,
            residual,
            condition,
        },
    })
}

/// Right-preconditioned BiCGStab; deterministic for fixed inputs because all
/// reductions run in fixed chunk order.
fn bicgstab(
    op: &BlockOperator,
    pre: &BlockPreconditioner,
    b: &[C64],
    x: &mut [C64],
    tol: f64,
    max_iter: usize,
) -> (usize, f64) {
    let n = b.len();
    let bnorm = par::norm(b);
    let mut r = b.to_vec(); // x = 0
    let rhat = r.clone();
    let mut rho = ONE;
    let mut alpha = ONE;
    let mut omega = ONE;
    let mut p = vec![ZERO; n];
    let mut v = vec![ZERO; n];
    let mut phat = vec![ZERO; n];
    let mut shat = vec![ZERO; n];
    let mut t = vec![ZERO; n];
    let mut rel = 1.0;
    for it in 1..=max_iter {
        let rho1 = par::dot(&rhat, &r);
        if rho1.norm() < 1e-300 {
            return (it, rel);
        }
        let beta = (rho1 / rho) * (alpha / omega);
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        pre.apply(&p, &mut phat);
        op.apply(&phat, &mut v);
        let denom = par::dot(&rhat, &v);
        if denom.norm() < 1e-300 {
            return (it, rel);
        }
        alpha = rho1 / denom;
        // s = r - alpha v (reuse r)
        for i in 0..n {
            r[i] -= alpha * v[i];
        }
        rel = par::norm(&r) / bnorm;
        if rel < tol {
            for i in 0..n {
                x[i] += alpha * phat[i];
            }
            return (it, rel);
        }
        pre.apply(&r, &mut shat);
        op.apply(&shat, &mut t);
        let tt = par::norm_sq(&t);
        if tt < 1e-300 {
            return (it, rel);
        }
        omega = par::dot(&t, &r) / tt;
        for i in 0..n {
            x[i] += alpha * phat[i] + omega * shat[i];
            r[i] -= omega * t[i];
        }
        rho = rho1;
        rel = par::norm(&r) / bnorm;
        if rel < tol {
            return (it, rel);
        }
    }
    (max_iter, rel)
}

/// Dense LU direct solve of the block system, assembled column by column
/// from the matrix-free operator. Only for small grids.
fn dense_direct_solve(op: &BlockOperator, b: &[C64]) -> Option<Vec<C64>> {
    let n = b.len();
    if n > 6000 {
        return None;
    }
    let mut mat = vec![ZERO; n * n];
    let mut e = vec![ZERO; n];
    let mut col = vec![ZERO; n];
    for j in 0..n {
        e[j] = ONE;
        op.apply(&e, &mut col);
        e[j] = ZERO;
        for i in 0..n {
            mat[i * n + j] = col[i];
        }
    }
    let mut rhs = b.to_vec();
    lu_solve_in_place(&mut mat, &mut rhs, n).then_some(rhs)
}

/// Partial-pivot complex LU; returns false on a vanishing pivot.
pub(crate) fn lu_solve_in_place(mat: &mut [C64], rhs: &mut [C64], n: usize) -> bool {
    for k in 0..n {
        let mut piv = k;
        let mut mx = mat[k * n + k].norm();
        for i in k + 1..n {
            let m = mat[i * n + k].norm();
            if m > mx {
                mx = m;
                piv = i;
            }
        }
        if mx < 1e-300 {
            return false;
        }
        if piv != k {
            for j in 0..n {
                mat.swap(k * n + j, piv * n + j);
            }
            rhs.swap(k, piv);
        }
        let d = mat[k * n + k];
        for i in k + 1..n {
            let f = mat[i * n + k] / d;
            if f == ZERO {
                continue;
            }
            mat[i * n + k] = f;
            for j in k + 1..n {
                let upper = mat[k * n + j];
                mat[i * n + j] -= f * upper;
            }
            rhs[i] -= f * rhs[k];
        }
    }
    for i in (0..n).rev() {
        let mut acc = rhs[i];
        for j in i + 1..n {
            acc -= mat[i * n + j] * rhs[j];
        }
        rhs[i] = acc / mat[i * n + i];
    }
    true
}

/// Solve `lap_h phi = rhs`, `phi = 0` on the boundary.
pub fn solve_poisson_dirichlet(rhs: &ScalarField) -> Result<ScalarField> {
    rhs.check_finite("poisson rhs")?;
    Ok(PoissonSolver::new(&rhs.grid).solve(rhs))
}

/// Boundary traces of a closed-form function and of its Laplacian.
pub fn traces_from_fns(
    g: &GridSpec,
    f: impl Fn(&[f64]) -> C64,
    lap_f: impl Fn(&[f64]) -> C64,
) -> BoundaryPair {
    BoundaryPair {
        f: BoundaryField::from_fn(g, f),
        g: BoundaryField::from_fn(g, lap_f),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diff::laplacian0;
    use std::f64::consts::PI;

    fn grid(pts: usize) -> GridSpec {
        GridSpec::new(3, pts).unwrap()
    }

    fn splitmix(seed: &mut u64) -> f64 {
        *seed = seed.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = *seed;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        ((z ^ (z >> 31)) >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    }

    #[test]
    fn biharmonic_exact_on_quartic() {
        let g = grid(10);
        let u = PaddedField::from_fn(&g, |x| C64::new(x[0].powi(4), 0.0));
        let coeffs = Coefficients::zero(&g);
        let lu = apply_l(&coeffs, &u).unwrap();
        let expect = ScalarField::from_fn(&g, |_| C64::new(24.0, 0.0));
        assert!(lu.sub(&expect).max_abs() < 1e-9, "{}", lu.sub(&expect).max_abs());
    }

    #[test]
    fn first_order_term_on_linear() {
        let g = grid(10);
        let u = PaddedField::from_fn(&g, |x| C64::new(x[0], 0.0));
        let a = VectorField::from_fns(&g, |c, _| if c == 0 { ONE } else { ZERO });
        let coeffs = Coefficients::free(a, ScalarField::zeros(&g));
        let lu = apply_l(&coeffs, &u).unwrap();
        let expect = ScalarField::from_fn(&g, |_| C64::new(0.0, -1.0));
        // rounding through the composed 1/s^4 stencil sits near 1e-11
        assert!(lu.sub(&expect).max_abs() < 1e-9);
    }

    #[test]
    fn greens_identity_random_constant_coefficients() {
        let g = grid(10);
        let mut seed = 42u64;
        let ac: Vec<C64> = (0..3)
            .map(|_| C64::new(splitmix(&mut seed), splitmix(&mut seed)))
            .collect();
        let qc = C64::new(splitmix(&mut seed), splitmix(&mut seed));
        let a = VectorField::from_fns(&g, |c, _| ac[c]);
        let q = ScalarField::from_fn(&g, |_| qc);
        let coeffs = Coefficients::free(a, q);
        let u = PaddedField::from_fn(&g, |x| {
            C64::new(
                (2.0 * x[0]).sin() * x[1] + x[2] * x[2],
                x[0] * x[1] * x[2],
            )
        });
        let v = PaddedField::from_fn(&g, |x| {
            C64::new((3.0 * x[1]).cos(), x[0] * x[0] - 0.5 * x[2])
        });
        let rep = greens_identity(&coeffs, &u, &v).unwrap();
        let scale = rep.lhs_volume.norm().max(rep.rhs_volume.norm()).max(1.0);
        assert!(
            rep.residual < 1e-8 * scale,
            "residual {} scale {scale}",
            rep.residual
        );
    }

    #[test]
    fn greens_identity_polynomial_pair() {
        let g = grid(10);
        let a = VectorField::from_fns(&g, |c, _| match c {
            0 => C64::new(0.3, -0.7),
            1 => C64::new(-1.1, 0.2),
            _ => C64::new(0.5, 0.9),
        });
        let coeffs = Coefficients::free(a, ScalarField::zeros(&g));
        let u = PaddedField::from_fn(&g, |x| C64::new(x[0] * x[0], 0.0));
        let v = PaddedField::from_fn(&g, |x| C64::new(x[1] * x[1], 0.0));
        let rep = greens_identity(&coeffs, &u, &v).unwrap();
        assert!(rep.residual < 1e-8, "residual {}", rep.residual);
    }

    #[test]
    fn greens_identity_sine_pair() {
        let g = grid(31);
        let coeffs = Coefficients::zero(&g);
        let sine = |x: &[f64]| {
            C64::new((PI * x[0]).sin() * (PI * x[1]).sin() * (PI * x[2]).sin(), 0.0)
        };
        let u = PaddedField::from_fn(&g, sine);
        let rep = greens_identity(&coeffs, &u, &u.clone()).unwrap();
        assert!(rep.residual < 1e-6, "residual {}", rep.residual);
        for t in rep.boundary_terms {
            assert!(t.norm() < 1e-9, "boundary term {t}");
        }
        // both volume terms near 9 pi^4 |u|^2 (u is a discrete eigenfunction)
        let l2 = norms::l2_norm(&u.interior());
        let expect = 9.0 * PI.powi(4) * l2 * l2;
        for vterm in [rep.lhs_volume, rep.rhs_volume] {
            assert!(
                (vterm.re - expect).abs() < 0.01 * expect && vterm.im.abs() < 1e-9,
                "volume {vterm} vs {expect}"
            );
        }
    }

    #[test]
    fn greens_identity_compactly_supported_pair() {
        // all boundary terms vanish; the defect is the product-rule gap,
        // O(spacing^2) for nonconstant coefficients
        let residuals: Vec<f64> = [10usize, 20]
            .iter()
            .map(|&pts| {
                let g = grid(pts);
                let bump = |x: &[f64]| {
                    let mut w = 1.0;
                    for &xi in x {
                        let t: f64 = (xi - 0.5) / 0.4;
                        if t.abs() >= 1.0 {
                            return 0.0;
                        }
                        w *= (1.0 - 1.0 / (1.0 - t * t)).exp();
                    }
                    w
                };
                let a = VectorField::from_fns(&g, |c, x| {
                    C64::new((1.0 + c as f64) * (2.0 * x[0]).sin(), x[1])
                });
                let q = ScalarField::from_fn(&g, |x| C64::new(x[2], -x[0]));
                let coeffs = Coefficients::free(a, q);
                let u = PaddedField::from_fn(&g, |x| C64::new(bump(x), 0.0));
                let v = PaddedField::from_fn(&g, |x| C64::new(0.0, bump(x) * x[0]));
                let rep = greens_identity(&coeffs, &u, &v).unwrap();
                for t in rep.boundary_terms {
                    assert!(t.norm() < 1e-12);
                }
                rep.residual
            })
            .collect();
        assert!(
            residuals[0] / residuals[1] > 2.0,
            "no second-order decay: {residuals:?}"
        );
    }

    #[test]
    fn poisson_zero_and_exact_inverse() {
        let g = grid(12);
        let zero = ScalarField::zeros(&g);
        assert_eq!(solve_poisson_dirichlet(&zero).unwrap().max_abs(), 0.0);

        let sine = ScalarField::from_real_fn(&g, |x| {
            (PI * x[0]).sin() * (PI * x[1]).sin() * (PI * x[2]).sin()
        });
        let rhs = laplacian0(&sine);
        let phi = solve_poisson_dirichlet(&rhs).unwrap();
        assert!(phi.sub(&sine).max_abs() < 1e-12);
    }

    #[test]
    fn poisson_apply_operator_oracle() {
        let g = grid(12);
        let mut seed = 7u64;
        let mut rhs = ScalarField::zeros(&g);
        for v in &mut rhs.values {
            *v = C64::new(splitmix(&mut seed), splitmix(&mut seed));
        }
        let phi = solve_poisson_dirichlet(&rhs).unwrap();
        let back = laplacian0(&phi);
        assert!(back.sub(&rhs).max_abs() < 1e-11 * rhs.max_abs().max(1.0));
    }

    #[test]
    fn navier_harmonic_linear_solution() {
        let g = grid(12);
        let problem = NavierProblem {
            coeffs: Coefficients::zero(&g),
            rhs: ScalarField::zeros(&g),
            traces: traces_from_fns(&g, |x| C64::new(x[0], 0.0), |_| ZERO),
        };
        let sol = solve_navier(&problem, &SolverConfig::default()).unwrap();
        assert_eq!(sol.report.condition, Condition::Ok);
        let expect = ScalarField::from_real_fn(&g, |x| x[0]);
        assert!(sol.u.sub(&expect).max_abs() < 1e-8, "{}", sol.u.sub(&expect).max_abs());
    }

    #[test]
    fn navier_cubic_manufactured() {
        let g = grid(12);
        // u* = x0^3 x1: lap u* = 6 x0 x1 (discrete-exact), lap^2 u* = 0
        let problem = NavierProblem {
            coeffs: Coefficients::zero(&g),
            rhs: ScalarField::zeros(&g),
            traces: traces_from_fns(
                &g,
                |x| C64::new(x[0].powi(3) * x[1], 0.0),
                |x| C64::new(6.0 * x[0] * x[1], 0.0),
            ),
        };
        let sol = solve_navier(&problem, &SolverConfig::default()).unwrap();
        let expect = ScalarField::from_real_fn(&g, |x| x[0].powi(3) * x[1]);
        assert!(sol.u.sub(&expect).max_abs() < 1e-8);
    }

    #[test]
    fn navier_quartic_with_discrete_traces() {
        let g = grid(10);
        let h2 = g.spacing * g.spacing;
        // u* = x0^4 + x1^4: discrete lap = 12 x0^2 + 12 x1^2 + 4 h^2,
        // composed biharmonic = 48 exactly
        let problem = NavierProblem {
            coeffs: Coefficients::zero(&g),
            rhs: ScalarField::from_fn(&g, |_| C64::new(48.0, 0.0)),
            traces: traces_from_fns(
                &g,
                |x| C64::new(x[0].powi(4) + x[1].powi(4), 0.0),
                move |x| C64::new(12.0 * x[0] * x[0] + 12.0 * x[1] * x[1] + 4.0 * h2, 0.0),
            ),
        };
        let sol = solve_navier(&problem, &SolverConfig::default()).unwrap();
        let expect = ScalarField::from_real_fn(&g, |x| x[0].powi(4) + x[1].powi(4));
        assert!(
            sol.u.sub(&expect).max_abs() < 1e-8,
            "err {}",
            sol.u.sub(&expect).max_abs()
        );
    }

    #[test]
    fn navier_near_singular_flagged() {
        let g = grid(8);
        // constant q = -lambda_min^2 makes 0 an eigenvalue of lap^2 + q
        let st = SineTransform::new(g.pts);
        let lam_min = 3.0 * st.eigenvalue(0, g.spacing);
        let q = ScalarField::from_fn(&g, move |_| C64::new(-lam_min * lam_min, 0.0));
        let problem = NavierProblem {
            coeffs: Coefficients::free(VectorField::zeros(&g), q),
            rhs: ScalarField::from_real_fn(&g, |x| x[0] * x[1] * x[2]),
            traces: BoundaryPair::zeros(&g),
        };
        let cfg = SolverConfig {
            max_iter: 120,
            direct_max_pts: 0,
            ..SolverConfig::default()
        };
        let sol = solve_navier(&problem, &cfg).unwrap();
        assert_eq!(sol.report.condition, Condition::NearSingular);
    }

    #[test]
    fn adjoint_fields_match_product_rule_for_constants() {
        let g = grid(8);
        let a = VectorField::from_fns(&g, |_, _| C64::new(0.4, -0.3));
        let q = ScalarField::from_fn(&g, |_| C64::new(0.1, 0.2));
        let coeffs = Coefficients::free(a, q);
        let (ab, qa) = coeffs.adjoint_fields();
        assert!((ab.components[0].values[0] - C64::new(0.4, 0.3)).norm() < 1e-15);
        // div of a constant vanishes
        let expect = C64::new(0.1, -0.2);
        assert!((qa.values[0] - expect).norm() < 1e-12);
    }

    #[test]
    fn admissibility_checks() {
        let g = grid(12);
        let chain =
            crate::grid::NeighborhoodChain::new(&g, [0.34, 0.26, 0.18, 0.10]).unwrap();
        let bump = |x: &[f64]| {
            let mut w = 1.0;
            for &xi in x {
                let t: f64 = (xi - 0.5) / 0.15;
                if t.abs() >= 1.0 {
                    return 0.0;
                }
                w *= (1.0 - 1.0 / (1.0 - t * t)).exp();
            }
            w
        };
        let a = VectorField::from_fns(&g, |c, x| {
            if c == 0 {
                C64::new(2e-4 * bump(x), 0.0)
            } else {
                ZERO
            }
        });
        let q = ScalarField::from_real_fn(&g, |x| 0.1 * bump(x));
        let a0 = VectorField::zeros(&g);
        let q0 = ScalarField::zeros(&g);
        assert!(Coefficients::admissible(
            a.clone(),
            q.clone(),
            &a0,
            &q0,
            &chain.masks[0],
            10.0,
            4.0
        )
        .is_ok());
        // q too large
        let mut big_q = q.clone();
        big_q.scale(C64::new(1e4, 0.0));
        assert!(Coefficients::admissible(a, big_q, &a0, &q0, &chain.masks[0], 10.0, 4.0).is_err());
    }
}
