//! Reference computations that do not share code paths with the library
//! routines they check.

use std::f64::consts::PI;

use rand::Rng;

use nullwave_core::nullforms::CoefficientTensor;

/// Null verdict by dense sampling of `q^{αβ} ξ_α ξ_β` over `ξ = (±1, cos θ, sin θ)`.
pub fn null_by_sampling(tensor: &CoefficientTensor) -> bool {
    let m = tensor.components();
    let n = m.pow(4);
    for code in 0..n {
        let ijkl = [code / (m * m * m), (code / (m * m)) % m, (code / m) % m, code % m];
        let mut scale = 0.0f64;
        for a in 0..3 {
            for b in 0..3 {
                scale += tensor.get(ijkl, a, b).abs();
            }
        }
        if scale == 0.0 {
            continue;
        }
        for k in 0..720 {
            let th = 2.0 * PI * k as f64 / 720.0;
            for sign in [1.0, -1.0] {
                let xi = [sign, th.cos(), th.sin()];
                let mut s = 0.0;
                for a in 0..3 {
                    for b in 0..3 {
                        s += tensor.get(ijkl, a, b) * xi[a] * xi[b];
                    }
                }
                if s.abs() > 1e-9 * scale {
                    return false;
                }
            }
        }
    }
    true
}

/// Random tensor with small integer entries: about half are built from
/// `Q0`/`Q_{αβ}` combinations (null), the rest are such a combination with
/// one entry perturbed.
pub fn random_tensor(rng: &mut impl Rng, m: usize) -> CoefficientTensor {
    let mut t = CoefficientTensor::zeros(m);
    let blocks = rng.gen_range(1..=3);
    for _ in 0..blocks {
        let ijkl = [0; 4].map(|_| rng.gen_range(0..m));
        let c0 = rng.gen_range(-3i32..=3) as f64;
        t.add(ijkl, 0, 0, c0);
        t.add(ijkl, 1, 1, -c0);
        t.add(ijkl, 2, 2, -c0);
        for (a, b) in [(0, 1), (0, 2), (1, 2)] {
            let c = rng.gen_range(-2i32..=2) as f64;
            t.add(ijkl, a, b, c);
            t.add(ijkl, b, a, -c);
        }
    }
    if rng.gen_bool(0.5) {
        let ijkl = [0; 4].map(|_| rng.gen_range(0..m));
        let (a, b) = (rng.gen_range(0..3), rng.gen_range(0..3));
        let bump = [-2.0, -1.0, 1.0, 2.0][rng.gen_range(0..4)];
        t.add(ijkl, a, b, bump);
    }
    t
}
