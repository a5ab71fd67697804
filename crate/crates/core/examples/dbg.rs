use bihlab_core::bumps::*;
use bihlab_core::cgo::*;
use bihlab_core::grid::*;
use bihlab_core::norms;
use bihlab_core::pde::Coefficients;
use bihlab_core::spectral::SpectralBox;

fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let num: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let den: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    num / den
}

fn main() {
    let taus = [0.4, 0.2, 0.1, 0.05];
    let pts = 24usize;
    let g = GridSpec::new(3, pts).unwrap();
    let sb = SpectralBox::for_grid(&g);
    let recipe = CoefficientRecipe {
        a_terms: vec![
            VectorBump::Curl { bump: Bump { center: vec![0.48, 0.5, 0.54], width: 0.26, amp: 1.0 }, axes: (0, 1) },
            VectorBump::Curl { bump: Bump { center: vec![0.55, 0.48, 0.45], width: 0.22, amp: 0.8 }, axes: (1, 2) },
        ],
        q_terms: vec![Bump { center: vec![0.5, 0.53, 0.48], width: 0.24, amp: 0.5 }],
    };
    let coeffs = Coefficients::free(recipe.sample_a(&g, 1e-5), recipe.sample_q(&g, 1e-5));
    for xi_len in [2.0f64, std::f64::consts::PI] {
        for eps_lat in [0.1f64, 0.3, 1.0] {
            let cfg = CgoConfig { eps_reg_lattice: eps_lat, ..CgoConfig::default() };
            let mut lt = Vec::new();
            let mut ln = Vec::new();
            for &tau in &taus {
                let xi = vec![0.0, 0.0, xi_len];
                let fr = orthonormal_frame(&xi);
                let d = CgoDirections::new(&xi, &fr[0], &fr[1], tau).unwrap();
                let sol = build_cgo(&sb, &coeffs, &d, Amplitude::One, Role::DirectSide, &cfg).unwrap();
                lt.push(tau.ln());
                ln.push(norms::h1_scl_norm(&sol.remainder_interior(), tau).ln());
            }
            println!("xi={xi_len:.2} eps_lat={eps_lat}: slope={:.3} ln={:?}",
                slope(&lt, &ln), ln.iter().map(|v| (v * 100.0).round() / 100.0).collect::<Vec<_>>());
        }
    }
}
