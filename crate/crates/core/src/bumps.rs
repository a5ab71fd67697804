//! Analytic compactly supported coefficient recipes.
//!
//! The 1-D profile is `g(t) = cos^6(pi t / 2)` on `|t| < 1`, zero outside,
//! expanded as the cosine sum `(10 + 15 cos(pi t) + 6 cos(2 pi t) +
//! cos(3 pi t))/32` so that every derivative has an exact closed form.
//! `g` vanishes to sixth order at the support edge, keeping grid Sobolev
//! norms of the recipes stable under refinement.

use crate::field::{ScalarField, VectorField, C64, ZERO};
use crate::grid::GridSpec;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const COEF: [f64; 4] = [10.0 / 32.0, 15.0 / 32.0, 6.0 / 32.0, 1.0 / 32.0];

/// k-th derivative of the profile at `t` (k = 0..=4).
pub fn profile(t: f64, k: usize) -> f64 {
    if t.abs() >= 1.0 {
        return 0.0;
    }
    let mut acc = 0.0;
    for (j, &c) in COEF.iter().enumerate() {
        let w = j as f64 * PI;
        let phase = w * t + k as f64 * PI / 2.0;
        acc += c * w.powi(k as i32) * phase.cos();
    }
    acc
}

/// Smooth product bump `amp * prod_d g((x_d - center_d)/width)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: Vec<f64>,
    pub width: f64,
    pub amp: f64,
}

impl Bump {
    fn t(&self, x: &[f64], d: usize) -> f64 {
        (x[d] - self.center[d]) / self.width
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut v = self.amp;
        for d in 0..x.len() {
            v *= profile(self.t(x, d), 0);
            if v == 0.0 {
                return 0.0;
            }
        }
        v
    }

    /// First partial derivative.
    pub fn d1(&self, x: &[f64], d: usize) -> f64 {
        let mut v = self.amp / self.width;
        for e in 0..x.len() {
            v *= profile(self.t(x, e), if e == d { 1 } else { 0 });
            if v == 0.0 {
                return 0.0;
            }
        }
        v
    }

    /// Second partial derivative `d_a d_b`.
    pub fn d2(&self, x: &[f64], a: usize, b: usize) -> f64 {
        let mut v = self.amp / (self.width * self.width);
        for e in 0..x.len() {
            let k = (e == a) as usize + (e == b) as usize;
            v *= profile(self.t(x, e), k);
            if v == 0.0 {
                return 0.0;
            }
        }
        v
    }

    /// Support half-width check: the closed support must stay inside the
    /// region where `dist(x, boundary) > margin`.
    pub fn supported_inside(&self, margin: f64) -> bool {
        self.center
            .iter()
            .all(|&c| c - self.width > margin && c + self.width < 1.0 - margin)
    }
}

/// One first-order coefficient term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum VectorBump {
    /// Divergence-free rotation in the `(axes.0, axes.1)` plane:
    /// `A_{a0} = d_{a1} b`, `A_{a1} = -d_{a0} b`.
    Curl { bump: Bump, axes: (usize, usize) },
    /// Pure potential part `A = grad b`; `d A = 0` and `div A = lap b`.
    Grad { bump: Bump },
}

impl VectorBump {
    pub fn eval_component(&self, x: &[f64], k: usize) -> f64 {
        match self {
            VectorBump::Curl { bump, axes } => {
                if k == axes.0 {
                    bump.d1(x, axes.1)
                } else if k == axes.1 {
                    -bump.d1(x, axes.0)
                } else {
                    0.0
                }
            }
            VectorBump::Grad { bump } => bump.d1(x, k),
        }
    }

    /// Exterior-derivative component `d_j A_k - d_k A_j` from the closed
    /// forms of the second partials.
    pub fn eval_da(&self, x: &[f64], j: usize, k: usize) -> f64 {
        match self {
            VectorBump::Curl { bump, axes } => {
                let (a0, a1) = *axes;
                let d_of = |dir: usize, comp: usize| -> f64 {
                    if comp == a0 {
                        bump.d2(x, dir, a1)
                    } else if comp == a1 {
                        -bump.d2(x, dir, a0)
                    } else {
                        0.0
                    }
                };
                d_of(j, k) - d_of(k, j)
            }
            VectorBump::Grad { .. } => 0.0,
        }
    }

    /// Divergence (nonzero only for the potential part).
    pub fn eval_div(&self, x: &[f64]) -> f64 {
        match self {
            VectorBump::Curl { .. } => 0.0,
            VectorBump::Grad { bump } => {
                (0..x.len()).map(|d| bump.d2(x, d, d)).sum()
            }
        }
    }

    pub fn bump(&self) -> &Bump {
        match self {
            VectorBump::Curl { bump, .. } => bump,
            VectorBump::Grad { bump } => bump,
        }
    }
}

/// Analytic recipe for one coefficient pair difference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct CoefficientRecipe {
    pub a_terms: Vec<VectorBump>,
    pub q_terms: Vec<Bump>,
}

impl CoefficientRecipe {
    pub fn eval_a(&self, x: &[f64], k: usize) -> f64 {
        self.a_terms.iter().map(|t| t.eval_component(x, k)).sum()
    }

    pub fn eval_q(&self, x: &[f64]) -> f64 {
        self.q_terms.iter().map(|t| t.eval(x)).sum()
    }

    pub fn eval_da(&self, x: &[f64], j: usize, k: usize) -> f64 {
        self.a_terms.iter().map(|t| t.eval_da(x, j, k)).sum()
    }

    pub fn sample_a(&self, g: &GridSpec, scale: f64) -> VectorField {
        VectorField::from_fns(g, |k, x| C64::new(scale * self.eval_a(x, k), 0.0))
    }

    pub fn sample_q(&self, g: &GridSpec, scale: f64) -> ScalarField {
        ScalarField::from_fn(g, |x| C64::new(scale * self.eval_q(x), 0.0))
    }

    /// Sample the true exterior derivative of the `A` part.
    pub fn sample_da(&self, g: &GridSpec, scale: f64) -> crate::field::TwoFormField {
        let pairs = crate::field::TwoFormField::pairs(g.n);
        let components = pairs
            .iter()
            .map(|&(j, k)| {
                ScalarField::from_fn(g, |x| C64::new(scale * self.eval_da(x, j, k), 0.0))
            })
            .collect();
        crate::field::TwoFormField {
            grid: *g,
            components,
        }
    }

    /// Every support must sit strictly inside `dist > margin`.
    pub fn supported_inside(&self, margin: f64) -> bool {
        self.a_terms
            .iter()
            .all(|t| t.bump().supported_inside(margin))
            && self.q_terms.iter().all(|t| t.supported_inside(margin))
    }

    pub fn is_a_zero(&self) -> bool {
        self.a_terms.is_empty()
    }
}
