//! Complex geometric optics solutions `u = e^{i x.zeta/tau} (a + r)`:
//! the zeta-vector algebra, transport amplitudes, and the remainder from a
//! regularized periodic Faddeev-type FFT inversion of the conjugated symbol
//! `(tau^2 lap + 2 i tau zeta.grad)^2`, iterated against the first- and
//! zeroth-order perturbation.

use crate::error::{Error, Result};
use crate::field::{
    BoundaryField, BoundaryPair, BoxField, PaddedField, ScalarField, VectorField, C64, ZERO,
};
use crate::grid::GridSpec;
use crate::norms;
use crate::par;
use crate::pde::Coefficients;
use crate::spectral::SpectralBox;
use serde::{Deserialize, Serialize};

/// Direction data of one CGO pair member.
#[derive(Debug, Clone, PartialEq)]
pub struct CgoDirections {
    pub mu1: Vec<f64>,
    pub mu2: Vec<f64>,
    pub xi: Vec<f64>,
    pub tau: f64,
    pub zeta1: Vec<C64>,
    pub zeta2: Vec<C64>,
}

fn dot_r(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Complex bilinear (not Hermitian) dot product.
pub fn dot_c(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl CgoDirections {
    /// Build the zeta pair
    /// `zeta1 = tau xi/2 + c mu1 + i mu2`, `zeta2 = -tau xi/2 + c mu1 - i mu2`
    /// with `c = sqrt(1 - tau^2 |xi|^2/4)`, and verify the algebra:
    /// `zeta_j.zeta_j = 0` and `(zeta2 - conj(zeta1))/tau = -xi`.
    pub fn new(xi: &[f64], mu1: &[f64], mu2: &[f64], tau: f64) -> Result<Self> {
        let n = xi.len();
        if mu1.len() != n || mu2.len() != n {
            return Err(Error::BadDirections("vector lengths differ".into()));
        }
        if !(tau > 0.0) {
            return Err(Error::BadDirections(format!("tau = {tau} not positive")));
        }
        let n1 = dot_r(mu1, mu1).sqrt();
        let n2 = dot_r(mu2, mu2).sqrt();
        if (n1 - 1.0).abs() > 1e-10 || (n2 - 1.0).abs() > 1e-10 {
            return Err(Error::BadDirections(format!(
                "mu vectors not unit: |mu1| = {n1}, |mu2| = {n2}"
            )));
        }
        let xi_norm = dot_r(xi, xi).sqrt();
        for (name, v) in [("mu1.mu2", dot_r(mu1, mu2)),
                          ("mu1.xi", dot_r(mu1, xi)),
                          ("mu2.xi", dot_r(mu2, xi))] {
            if v.abs() > 1e-10 * xi_norm.max(1.0) {
                return Err(Error::BadDirections(format!("{name} = {v:.3e} not orthogonal")));
            }
        }
        let disc = 1.0 - tau * tau * xi_norm * xi_norm / 4.0;
        if disc < 0.0 {
            return Err(Error::TauTooLarge(tau * xi_norm));
        }
        let c = disc.sqrt();
        let mut zeta1 = Vec::with_capacity(n);
        let mut zeta2 = Vec::with_capacity(n);
        for d in 0..n {
            zeta1.push(C64::new(tau * xi[d] / 2.0 + c * mu1[d], mu2[d]));
            zeta2.push(C64::new(-tau * xi[d] / 2.0 + c * mu1[d], -mu2[d]));
        }
        let dirs = CgoDirections {
            mu1: mu1.to_vec(),
            mu2: mu2.to_vec(),
            xi: xi.to_vec(),
            tau,
            zeta1,
            zeta2,
        };
        for (j, z) in [(1, &dirs.zeta1), (2, &dirs.zeta2)] {
            let zz = dot_c(z, z);
            if zz.norm() > 1e-13 {
                return Err(Error::BadDirections(format!(
                    "zeta{j}.zeta{j} = {zz:.3e} not isotropic"
                )));
            }
        }
        for d in 0..n {
            let diff = (dirs.zeta2[d] - dirs.zeta1[d].conj()) / tau + xi[d];
            if diff.norm() > 1e-12 {
                return Err(Error::BadDirections(format!(
                    "difference identity off by {diff:.3e} in component {d}"
                )));
            }
        }
        Ok(dirs)
    }

    /// `zeta^{(0)}` limit `mu1 + i mu2` (the transport direction).
    pub fn zeta0(&self) -> Vec<C64> {
        self.mu1
            .iter()
            .zip(&self.mu2)
            .map(|(&a, &b)| C64::new(a, b))
            .collect()
    }
}

/// Fixed generic rotation angle applied inside the orthogonal frame so the
/// `Im(zeta).eta = 0` hyperplane of the conjugated symbol avoids low dual
/// lattice points; axis-aligned frames put whole lattice planes on the
/// characteristic variety and flood the remainder with near-resonant bins.
pub const FRAME_ROTATION: f64 = 1.0;

/// Deterministic orthonormal basis of the plane orthogonal to `xi`:
/// Gram-Schmidt of the coordinate axes least aligned with `xi`, then a fixed
/// generic rotation of each consecutive pair (see [`FRAME_ROTATION`]).
pub fn orthonormal_frame(xi: &[f64]) -> Vec<Vec<f64>> {
    let n = xi.len();
    let xn = dot_r(xi, xi).sqrt();
    assert!(xn > 0.0, "frame undefined at xi = 0");
    let hat: Vec<f64> = xi.iter().map(|v| v / xn).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        hat[a]
            .abs()
            .partial_cmp(&hat[b].abs())
            .unwrap()
            .then(a.cmp(&b))
    });
    let mut frame: Vec<Vec<f64>> = Vec::with_capacity(n - 1);
    for &axis in order.iter().take(n - 1) {
        let mut v = vec![0.0; n];
        v[axis] = 1.0;
        let c = dot_r(&v, &hat);
        for d in 0..n {
            v[d] -= c * hat[d];
        }
        for w in &frame {
            let c = dot_r(&v, w);
            for d in 0..n {
                v[d] -= c * w[d];
            }
        }
        let nv = dot_r(&v, &v).sqrt();
        for x in &mut v {
            *x /= nv;
        }
        frame.push(v);
    }
    let (s, c) = FRAME_ROTATION.sin_cos();
    for pair in frame.chunks_mut(2) {
        if let [a, b] = pair {
            for d in 0..n {
                let (va, vb) = (a[d], b[d]);
                a[d] = c * va + s * vb;
                b[d] = -s * va + c * vb;
            }
        }
    }
    frame
}

/// Transport amplitude: either the constant 1 or the linear function
/// `mu1 . x` solving `(mu1 -+ i mu2).grad a = 1`.
#[derive(Debug, Clone, PartialEq)]
pub enum Amplitude {
    One,
    Linear { dir: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AmplitudeKind {
    One,
    LinearTransport,
}

pub fn make_amplitude(dirs: &CgoDirections, kind: AmplitudeKind) -> Amplitude {
    match kind {
        AmplitudeKind::One => Amplitude::One,
        AmplitudeKind::LinearTransport => Amplitude::Linear {
            dir: dirs.mu1.clone(),
        },
    }
}

impl Amplitude {
    pub fn eval(&self, x: &[f64]) -> C64 {
        match self {
            Amplitude::One => C64::new(1.0, 0.0),
            Amplitude::Linear { dir } => C64::new(dot_r(dir, x), 0.0),
        }
    }

    /// Constant gradient.
    pub fn grad(&self, n: usize) -> Vec<f64> {
        match self {
            Amplitude::One => vec![0.0; n],
            Amplitude::Linear { dir } => dir.clone(),
        }
    }

    /// Samples on the cube grid.
    pub fn field(&self, g: &GridSpec) -> ScalarField {
        ScalarField::from_fn(g, |x| self.eval(x))
    }
}

/// Which equation the solution satisfies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    /// `L*_{A,q} u = 0` (test-function side).
    AdjointSide,
    /// `L_{A,q} u = 0` (data side).
    DirectSide,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CgoConfig {
    /// Relative update tolerance of the Neumann iteration.
    pub neumann_tol: f64,
    pub neumann_max: usize,
    /// Cubic part of the symbol floor, `eps_reg_coeff * tau^3`.
    pub eps_reg_coeff: f64,
    /// Lattice part of the symbol floor, `eps_reg_lattice * (tau * dxi)^2`
    /// with `dxi` the dual-lattice spacing. Near the characteristic set the
    /// symbol varies by O(tau * dxi) per bin, so bins inside this floor are
    /// resonance artifacts of the lattice, not features of the continuum
    /// operator; clamping them keeps `|r| = O(tau)` uniformly.
    pub eps_reg_lattice: f64,
    /// Relative conjugated-symbol residual above which a solution is rejected.
    pub residual_guard: f64,
}

impl Default for CgoConfig {
    fn default() -> Self {
        CgoConfig {
            neumann_tol: 1e-10,
            neumann_max: 50,
            eps_reg_coeff: 1e-2,
            eps_reg_lattice: 1.0,
            residual_guard: 1e-4,
        }
    }
}

impl CgoConfig {
    /// Symbol floor at semiclassical parameter `tau` on a box with dual
    /// lattice spacing `dxi`.
    pub fn eps_reg(&self, tau: f64, dxi: f64) -> f64 {
        self.eps_reg_coeff * tau.powi(3) + self.eps_reg_lattice * (tau * dxi).powi(2)
    }
}

/// Conjugated biharmonic symbol `(tau^2 |xi_k|^2 + 2 tau zeta.xi_k)^2`
/// at DFT bin `kidx`.
fn symbol(sb: &SpectralBox, dirs: &CgoDirections, zeta: &[C64], kidx: &[usize]) -> C64 {
    let bx = sb.boxg;
    let tau = dirs.tau;
    let mut q = 0.0;
    let mut zdot = ZERO;
    for (a, &k) in kidx.iter().enumerate() {
        let xi = bx.freq(k);
        q += xi * xi;
        zdot += zeta[a] * xi;
    }
    let t = tau * tau * q + 2.0 * tau * zdot;
    t * t
}

/// Multiply DFT bins by the regularized inverse symbol `1/p_reg`,
/// `p_reg = eps * p/|p|` when `|p| < eps` (phase-preserving floor).
/// Errors when the floor swallows the whole spectrum.
pub fn faddeev_apply_inverse(
    sb: &SpectralBox,
    dirs: &CgoDirections,
    zeta: &[C64],
    rhs: &BoxField,
    eps_reg: f64,
) -> Result<BoxField> {
    let mut bins = sb.dft(rhs);
    let bx = sb.boxg;
    let n = bx.grid.n;
    let clamped = std::sync::atomic::AtomicUsize::new(0);
    par::for_each_chunk_mut(&mut bins, 1 << 12, |start, sl| {
        let mut kidx = vec![0usize; n];
        let mut local = 0usize;
        for (t, v) in sl.iter_mut().enumerate() {
            bx.decode(start + t, &mut kidx);
            let p = symbol(sb, dirs, zeta, &kidx);
            let pn = p.norm();
            let p_reg = if pn >= eps_reg {
                p
            } else {
                local += 1;
                if pn == 0.0 {
                    C64::new(eps_reg, 0.0)
                } else {
                    eps_reg * p / pn
                }
            };
            *v /= p_reg;
        }
        clamped.fetch_add(local, std::sync::atomic::Ordering::Relaxed);
    });
    let total = bx.len();
    let nclamped = clamped.into_inner();
    if nclamped == total {
        return Err(Error::SymbolFloorDominates(total));
    }
    Ok(sb.idft(bins))
}

/// A CGO solution: directions, amplitude, the periodic remainder, and the
/// relative conjugated-equation residual measured on the cube.
#[derive(Debug, Clone)]
pub struct CgoSolution {
    pub directions: CgoDirections,
    pub amplitude: Amplitude,
    pub role: Role,
    /// Which zeta vector drives the phase (`zeta1` for the adjoint side,
    /// `zeta2` for the direct side in the reconstruction pairing).
    pub zeta: Vec<C64>,
    pub remainder: BoxField,
    pub rel_residual: f64,
    pub neumann_iterations: usize,
}

/// Operator coefficient fields on the periodic box (zero-extended).
struct BoxCoefficients {
    a: Vec<BoxField>,
    q: BoxField,
}

fn vanishes_near_boundary(f: &ScalarField) -> bool {
    let g = f.grid;
    let mut idx = vec![0usize; g.n];
    let scale = f.max_abs().max(1e-300);
    for (flat, v) in f.values.iter().enumerate() {
        g.decode(flat, &mut idx);
        if idx.iter().any(|&i| i < 2 || i + 2 >= g.pts) && v.norm() > 1e-12 * scale {
            return false;
        }
    }
    true
}

fn embed_coefficients(sb: &SpectralBox, a: &VectorField, q: &ScalarField) -> Result<BoxCoefficients> {
    for c in a.components.iter().chain(std::iter::once(q)) {
        if !vanishes_near_boundary(c) {
            return Err(Error::ZeroExtensionInvalid(
                c.max_abs(),
            ));
        }
    }
    Ok(BoxCoefficients {
        a: a.components
            .iter()
            .map(|c| BoxField::embed(&sb.boxg, c))
            .collect(),
        q: BoxField::embed(&sb.boxg, q),
    })
}

/// Build the CGO solution for the given role by Neumann iteration of
/// `r = -G[tau^4 (A.(D + zeta/tau) + q)(a + r)]`.
pub fn build_cgo(
    sb: &SpectralBox,
    coeffs: &Coefficients,
    dirs: &CgoDirections,
    amplitude: Amplitude,
    role: Role,
    cfg: &CgoConfig,
) -> Result<CgoSolution> {
    let (zeta, bc) = match role {
        Role::DirectSide => (
            dirs.zeta2.clone(),
            embed_coefficients(sb, &coeffs.a, &coeffs.q)?,
        ),
        Role::AdjointSide => {
            let (a_bar, q_adj) = coeffs.adjoint_fields();
            (dirs.zeta1.clone(), embed_coefficients(sb, &a_bar, &q_adj)?)
        }
    };
    let bx = sb.boxg;
    let n = bx.grid.n;
    let tau = dirs.tau;
    let tau4 = tau.powi(4);
    let dxi = 2.0 * std::f64::consts::PI / crate::field::BoxGrid::SIDE;
    let eps_reg = cfg.eps_reg(tau, dxi);
    let grad_a = amplitude.grad(n);
    // D a = -i grad a (constant)
    let da: Vec<C64> = grad_a.iter().map(|&g| C64::new(0.0, -g)).collect();
    let zeta_over_tau: Vec<C64> = zeta.iter().map(|z| z / tau).collect();

    // amplitude samples on the box (only used where coefficients live)
    let a_box = BoxField::from_fn(&bx, |x| amplitude.eval(x));

    let len = bx.len();
    let mut r = BoxField::zeros(&bx);
    let mut update_history: Vec<f64> = Vec::new();
    let mut iterations = 0;
    for it in 1..=cfg.neumann_max {
        iterations = it;
        // K(a + r) pointwise, with D r spectral
        let r_bins = sb.dft(&r.clone());
        let mut w = vec![ZERO; len];
        for d in 0..n {
            let mut bins = r_bins.clone();
            let bxc = bx;
            par::for_each_chunk_mut(&mut bins, 1 << 12, |start, sl| {
                let mut kidx = vec![0usize; n];
                for (t, v) in sl.iter_mut().enumerate() {
                    bxc.decode(start + t, &mut kidx);
                    // D_d = -i d_d: multiply by -i * (i xi) = xi
                    *v *= bxc.freq(kidx[d]);
                }
            });
            let dr = sb.idft(bins);
            let ad = &bc.a[d].values;
            par::for_each_chunk_mut(&mut w, 1 << 13, |start, sl| {
                for (t, o) in sl.iter_mut().enumerate() {
                    let i = start + t;
                    if ad[i] != ZERO {
                        let phi = a_box.values[i] + r.values[i];
                        *o += ad[i] * (dr.values[i] + da[d] + zeta_over_tau[d] * phi);
                    }
                }
            });
        }
        {
            let qv = &bc.q.values;
            par::for_each_chunk_mut(&mut w, 1 << 13, |start, sl| {
                for (t, o) in sl.iter_mut().enumerate() {
                    let i = start + t;
                    if qv[i] != ZERO {
                        *o += qv[i] * (a_box.values[i] + r.values[i]);
                    }
                }
            });
        }
        for v in &mut w {
            *v *= tau4;
        }
        let rhs = BoxField { boxg: bx, values: w };
        let mut r_new = faddeev_apply_inverse(sb, dirs, &zeta, &rhs, eps_reg)?;
        for v in &mut r_new.values {
            *v = -*v;
        }
        let update = par::sum_real(len, |i| (r_new.values[i] - r.values[i]).norm_sqr()).sqrt();
        let scale = par::norm_sq(&r_new.values).sqrt().max(1.0);
        r = r_new;
        let rel_update = update / scale;
        update_history.push(rel_update);
        if rel_update <= cfg.neumann_tol {
            break;
        }
        let m = update_history.len();
        if m >= 3
            && update_history[m - 1] > update_history[m - 2]
            && update_history[m - 2] > update_history[m - 3]
        {
            return Err(Error::NeumannDivergent(
                update_history[m - 3],
                update_history[m - 2],
                update_history[m - 1],
            ));
        }
    }

    let sol = CgoSolution {
        directions: dirs.clone(),
        amplitude,
        role,
        zeta,
        remainder: r,
        rel_residual: 0.0,
        neumann_iterations: iterations,
    };
    let rel_residual = conjugated_residual(sb, &sol, &bc, tau4)?;
    Ok(CgoSolution {
        rel_residual,
        ..sol
    })
}

/// Relative residual of the conjugated equation on the cube:
/// `|e^{ix.zeta/tau} (T^2 r / tau^4 + K(a + r))|_{L2} / |u|_{L2}`.
fn conjugated_residual(
    sb: &SpectralBox,
    sol: &CgoSolution,
    bc: &BoxCoefficients,
    tau4: f64,
) -> Result<f64> {
    let bx = sb.boxg;
    let n = bx.grid.n;
    let zeta = &sol.zeta;
    let dirs = &sol.directions;
    // T^2 r with the exact (unclamped) symbol
    let mut bins = sb.dft(&sol.remainder);
    par::for_each_chunk_mut(&mut bins, 1 << 12, |start, sl| {
        let mut kidx = vec![0usize; n];
        for (t, v) in sl.iter_mut().enumerate() {
            bx.decode(start + t, &mut kidx);
            *v *= symbol(sb, dirs, zeta, &kidx);
        }
    });
    let t2r = sb.idft(bins);
    // K(a + r) as in the iteration
    let grad_a = sol.amplitude.grad(n);
    let da: Vec<C64> = grad_a.iter().map(|&g| C64::new(0.0, -g)).collect();
    let zot: Vec<C64> = zeta.iter().map(|z| z / dirs.tau).collect();
    let a_box = BoxField::from_fn(&bx, |x| sol.amplitude.eval(x));
    let r_bins = sb.dft(&sol.remainder);
    let mut k_field = vec![ZERO; bx.len()];
    for d in 0..n {
        let mut dbins = r_bins.clone();
        par::for_each_chunk_mut(&mut dbins, 1 << 12, |start, sl| {
            let mut kidx = vec![0usize; n];
            for (t, v) in sl.iter_mut().enumerate() {
                bx.decode(start + t, &mut kidx);
                *v *= bx.freq(kidx[d]);
            }
        });
        let dr = sb.idft(dbins);
        for i in 0..bx.len() {
            if bc.a[d].values[i] != ZERO {
                let phi = a_box.values[i] + sol.remainder.values[i];
                k_field[i] += bc.a[d].values[i] * (dr.values[i] + da[d] + zot[d] * phi);
            }
        }
    }
    for i in 0..bx.len() {
        if bc.q.values[i] != ZERO {
            k_field[i] += bc.q.values[i] * (a_box.values[i] + sol.remainder.values[i]);
        }
    }
    // restrict to the cube, attach the phase, take L2
    let g = bx.grid;
    let mut resid = ScalarField::zeros(&g);
    let mut u = ScalarField::zeros(&g);
    let mut idx = vec![0usize; g.n];
    let mut bid = vec![0usize; g.n];
    let mut x = vec![0.0f64; g.n];
    for flat in 0..g.len() {
        g.decode(flat, &mut idx);
        for a in 0..g.n {
            bid[a] = bx.interior_to_box(idx[a]);
            x[a] = g.coord(idx[a]);
        }
        let b = bx.encode(&bid);
        let phase = phase_at(&x, zeta, dirs.tau)?;
        resid.values[flat] = phase * (t2r.values[b] / tau4 + k_field[b]);
        u.values[flat] = phase * (a_box.values[b] + sol.remainder.values[b]);
    }
    let un = norms::l2_norm(&u);
    if un == 0.0 {
        return Ok(0.0);
    }
    Ok(norms::l2_norm(&resid) / un)
}

fn phase_at(x: &[f64], zeta: &[C64], tau: f64) -> Result<C64> {
    let mut re = 0.0;
    let mut im = 0.0;
    for (xd, z) in x.iter().zip(zeta) {
        re += xd * z.re;
        im += xd * z.im;
    }
    let exponent = -im / tau;
    if exponent.abs() > 600.0 {
        return Err(Error::NonFinite("cgo phase overflow; tau too small"));
    }
    Ok(C64::from_polar(exponent.exp(), re / tau))
}

impl CgoSolution {
    /// `u` on the interior nodes.
    pub fn u_interior(&self) -> Result<ScalarField> {
        let bx = self.remainder.boxg;
        let g = bx.grid;
        let mut out = ScalarField::zeros(&g);
        let mut idx = vec![0usize; g.n];
        let mut bid = vec![0usize; g.n];
        let mut x = vec![0.0f64; g.n];
        for flat in 0..g.len() {
            g.decode(flat, &mut idx);
            for a in 0..g.n {
                bid[a] = bx.interior_to_box(idx[a]);
                x[a] = g.coord(idx[a]);
            }
            let phase = phase_at(&x, &self.zeta, self.directions.tau)?;
            out.values[flat] = phase
                * (self.amplitude.eval(&x) + self.remainder.values[bx.encode(&bid)]);
        }
        Ok(out)
    }

    /// `u` on the padded lattice (boundary and collar included).
    pub fn u_padded(&self) -> Result<PaddedField> {
        let bx = self.remainder.boxg;
        let g = bx.grid;
        let side = PaddedField::side(&g);
        let dims = vec![side; g.n];
        let mut out = PaddedField::zeros(&g);
        let mut idx = vec![0usize; g.n];
        let mut bid = vec![0usize; g.n];
        let mut x = vec![0.0f64; g.n];
        for flat in 0..PaddedField::len(&g) {
            crate::grid::decode_dims(flat, &dims, &mut idx);
            for a in 0..g.n {
                bid[a] = bx.off + idx[a];
                x[a] = PaddedField::coord(&g, idx[a]);
            }
            let phase = phase_at(&x, &self.zeta, self.directions.tau)?;
            out.values[flat] = phase
                * (self.amplitude.eval(&x) + self.remainder.values[bx.encode(&bid)]);
        }
        Ok(out)
    }

    /// Gradient-side factor `(D + zeta/tau)(a + r)` on the box (no phase).
    pub fn conjugated_d(&self, sb: &SpectralBox) -> Vec<BoxField> {
        let bx = self.remainder.boxg;
        let n = bx.grid.n;
        let tau = self.directions.tau;
        let grad_a = self.amplitude.grad(n);
        let a_box = BoxField::from_fn(&bx, |x| self.amplitude.eval(x));
        let r_bins = sb.dft(&self.remainder);
        (0..n)
            .map(|d| {
                let mut bins = r_bins.clone();
                par::for_each_chunk_mut(&mut bins, 1 << 12, |start, sl| {
                    let mut kidx = vec![0usize; n];
                    for (t, v) in sl.iter_mut().enumerate() {
                        bx.decode(start + t, &mut kidx);
                        *v *= bx.freq(kidx[d]);
                    }
                });
                let mut f = sb.idft(bins);
                let zd = self.zeta[d] / tau;
                let dad = C64::new(0.0, -grad_a[d]);
                for i in 0..bx.len() {
                    f.values[i] += dad + zd * (a_box.values[i] + self.remainder.values[i]);
                }
                f
            })
            .collect()
    }

    /// `D u` on the interior nodes (phase attached).
    pub fn du_interior(&self, sb: &SpectralBox) -> Result<VectorField> {
        let parts = self.conjugated_d(sb);
        let bx = self.remainder.boxg;
        let g = bx.grid;
        let mut comps = Vec::with_capacity(g.n);
        for part in parts {
            let mut out = ScalarField::zeros(&g);
            let mut idx = vec![0usize; g.n];
            let mut bid = vec![0usize; g.n];
            let mut x = vec![0.0f64; g.n];
            for flat in 0..g.len() {
                g.decode(flat, &mut idx);
                for a in 0..g.n {
                    bid[a] = bx.interior_to_box(idx[a]);
                    x[a] = g.coord(idx[a]);
                }
                let phase = phase_at(&x, &self.zeta, self.directions.tau)?;
                out.values[flat] = phase * part.values[bx.encode(&bid)];
            }
            comps.push(out);
        }
        Ok(VectorField { components: comps })
    }

    /// Navier traces `(u, lap u)` of the solution, with `lap u` evaluated
    /// spectrally through the conjugated operator.
    pub fn traces(&self, sb: &SpectralBox) -> Result<BoundaryPair> {
        let bx = self.remainder.boxg;
        let g = bx.grid;
        let n = g.n;
        let tau = self.directions.tau;
        // lap u = phase * [ lap r + (2i/tau) zeta.grad r + (2i/tau) zeta.grad a ]
        let lap_r = sb.spectral_laplacian(&self.remainder);
        let mut zgrad = BoxField::zeros(&bx);
        for d in 0..n {
            let dr = sb.spectral_partial(&self.remainder, d);
            for i in 0..bx.len() {
                zgrad.values[i] += self.zeta[d] * dr.values[i];
            }
        }
        let grad_a = self.amplitude.grad(n);
        let zga: C64 = self
            .zeta
            .iter()
            .zip(&grad_a)
            .map(|(z, &ga)| z * ga)
            .sum();
        let two_i_over_tau = C64::new(0.0, 2.0 / tau);
        let conj_lap = |i: usize| -> C64 {
            lap_r.values[i] + two_i_over_tau * (zgrad.values[i] + zga)
        };

        let mut f = BoundaryField::zeros(&g);
        let mut gg = BoundaryField::zeros(&g);
        let tdims = vec![g.pts; g.n - 1];
        for (fi, face) in crate::grid::FaceId::all(n).into_iter().enumerate() {
            let tax = face.transverse(n);
            let mut tidx = vec![0usize; n - 1];
            let mut bid = vec![0usize; n];
            let mut x = vec![0.0f64; n];
            let axis_box = match face.side {
                crate::grid::Side::Lo => bx.off,
                crate::grid::Side::Hi => bx.off + g.pts + 1,
            };
            for flat in 0..g.face_len() {
                crate::grid::decode_dims(flat, &tdims, &mut tidx);
                bid[face.axis] = axis_box;
                x[face.axis] = face.plane_coord();
                for (t, &a) in tax.iter().enumerate() {
                    bid[a] = bx.interior_to_box(tidx[t]);
                    x[a] = g.coord(tidx[t]);
                }
                let b = bx.encode(&bid);
                let phase = phase_at(&x, &self.zeta, tau)?;
                f.faces[fi].values[flat] =
                    phase * (self.amplitude.eval(&x) + self.remainder.values[b]);
                gg.faces[fi].values[flat] = phase * conj_lap(b);
            }
        }
        Ok(BoundaryPair { f, g: gg })
    }

    /// Remainder restricted to the cube.
    pub fn remainder_interior(&self) -> ScalarField {
        self.remainder.restrict_interior()
    }

    /// Guard used by consumers of the solution.
    pub fn check_residual(&self, guard: f64) -> Result<()> {
        if self.rel_residual > guard {
            return Err(Error::CgoResidualGuard(self.rel_residual, guard));
        }
        Ok(())
    }
}
