use coincidence_core::quadrature::{integrate_1d, integrate_2d, mean_density};
use coincidence_core::spwf::Spwf;
use coincidence_core::{Interval, Rectangle};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random test integrand with a closed-form integral.
enum Case {
    Poly(Vec<f64>),
    Exp(f64),
    Cos(f64, f64),
}

impl Case {
    fn eval(&self, x: f64) -> f64 {
        match self {
            Case::Poly(c) => c.iter().rev().fold(0.0, |acc, k| acc * x + k),
            Case::Exp(k) => (k * x).exp(),
            Case::Cos(k, p) => (k * x + p).cos(),
        }
    }

    fn integral(&self, lo: f64, hi: f64) -> f64 {
        match self {
            Case::Poly(c) => {
                let prim = |x: f64| c.iter().enumerate().rev().fold(0.0, |acc, (i, k)| acc * x + k / (i + 1) as f64) * x;
                prim(hi) - prim(lo)
            }
            Case::Exp(k) => ((k * hi).exp() - (k * lo).exp()) / k,
            Case::Cos(k, p) => ((k * hi + p).sin() - (k * lo + p).sin()) / k,
        }
    }
}

#[test]
fn error_estimates_are_honest() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let trials = 600;
    let mut honest = 0;
    for _ in 0..trials {
        let case = match rng.gen_range(0..3) {
            0 => Case::Poly((0..rng.gen_range(10..60)).map(|_| rng.gen_range(-1.0..1.0)).collect()),
            1 => Case::Exp(rng.gen_range(-8.0..8.0)),
            _ => Case::Cos(rng.gen_range(1.0..60.0), rng.gen_range(0.0..6.0)),
        };
        let lo = rng.gen_range(-1.0..0.5);
        let hi = lo + rng.gen_range(0.1..1.5);
        let rel_tol = 10f64.powi(-rng.gen_range(4..13));
        let r = integrate_1d(|x| case.eval(x), Interval::new(lo, hi).unwrap(), rel_tol).unwrap();
        assert!(r.converged);
        let err = (r.value - case.integral(lo, hi)).abs();
        // the closed forms carry their own rounding
        let floor = 1e-14 * case.integral(lo, hi).abs().max(1.0);
        if err <= 10.0 * r.abs_error_estimate + floor {
            honest += 1;
        }
    }
    assert!(honest as f64 >= 0.99 * trials as f64, "{honest}/{trials}");
}

#[test]
fn node_window_integral_is_shift_invariant() {
    // box n = 2 of length 2 * shift has its middle node at x0 = shift
    for shift in [0.5, 1.0, 1e2, 1e4, 1e6] {
        let l = 2.0 * shift;
        let psi = Spwf::box_state(2, l).unwrap();
        for frac in [1e-8, 1e-5, 1e-3] {
            let delta = frac * l;
            let v = integrate_1d(|u| psi.evaluate_near(shift, u).norm_sqr(), Interval::new(-delta, delta).unwrap(), 1e-12)
                .unwrap()
                .value;
            // (2 / L) (delta - L sin(t) / (4 pi)), t = 4 pi delta / L, by series
            let t = 4.0 * std::f64::consts::PI * delta / l;
            let t2 = t * t;
            let exact = 2.0 / l * delta * (t2 / 6.0 - t2 * t2 / 120.0 + t2 * t2 * t2 / 5040.0);
            assert!(((v - exact) / exact).abs() < 1e-10, "shift {shift}, delta {delta}: {v} vs {exact}");
        }
    }
}

#[test]
fn local_windows_keep_precision_far_from_the_origin() {
    for x0 in [0.0, 1.0, 1e3, 1e6] {
        let psi = Spwf::local_node(num_complex::Complex64::new(1.0, 0.0), x0).unwrap();
        for delta in [1e-8, 1e-5, 1e-2] {
            let r = integrate_1d(|u| psi.evaluate_near(x0, u).norm_sqr(), Interval::new(-delta, delta).unwrap(), 1e-12)
                .unwrap();
            let exact = 2.0 * delta.powi(3) / 3.0;
            assert!(((r.value - exact) / exact).abs() < 1e-12, "x0 {x0}, delta {delta}");
        }
    }
}

#[test]
fn separable_window_products() {
    for delta in [1e-8, 1e-6, 1e-4, 1e-2] {
        let eta = 0.7 * delta;
        let l = Interval::new(-eta - delta, -eta + delta).unwrap();
        let r = Interval::new(eta - delta, eta + delta).unwrap();
        let v = integrate_2d(|u1, u2| u1 * u1 + u2 * u2, Rectangle::new(l, r), 1e-12).unwrap();
        let exact = 2.0 * 2.0 * delta * 2.0 * delta * (eta * eta + delta * delta / 3.0);
        assert!(((v.value - exact) / exact).abs() < 1e-12);
        let v = integrate_2d(|u1, u2| u1 * u2, Rectangle::new(l, r), 1e-12).unwrap();
        let exact = -4.0 * delta * delta * eta * eta;
        assert!(((v.value - exact) / exact).abs() < 1e-12);
    }
}

#[test]
fn nested_window_means_converge_quadratically() {
    let psi = Spwf::box_state(1, 1.0).unwrap();
    let x0 = 0.3;
    let point = psi.evaluate(x0).norm_sqr();
    let means: Vec<f64> = (0..8)
        .map(|i| {
            let h = 5e-3 * 0.5f64.powi(i);
            mean_density(|x| psi.evaluate(x).norm_sqr(), Interval::centered(x0, h).unwrap(), 1e-13).unwrap().value
        })
        .collect();
    let diffs: Vec<f64> = means.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    for w in diffs.windows(2) {
        assert!(w[0] / w[1] >= 3.9, "{} / {}", w[0], w[1]);
    }
    assert!((means.last().unwrap() - point).abs() < 1e-6);
}
