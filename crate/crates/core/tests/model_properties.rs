use fermi_income::models::{eval, gradient, ModelFamily, ModelParams};
use proptest::prelude::*;

fn params() -> impl Strategy<Value = ModelParams> {
    (0.05f64..3.0, -5.0f64..20.0, 0.1f64..10.0).prop_map(|(t, mu, c)| ModelParams::new(t, mu, c))
}

fn family() -> impl Strategy<Value = ModelFamily> {
    prop::sample::select(ModelFamily::ALL.to_vec())
}

proptest! {
    #[test]
    fn fermi_dirac_is_strictly_decreasing(p in params()) {
        let n = 1000;
        let (lo, hi) = (p.mu - 20.0 * p.t, p.mu + 20.0 * p.t);
        let ys: Vec<f64> = (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .map(|x| eval(ModelFamily::FermiDirac, &p, x).unwrap())
            .collect();
        for w in ys.windows(2) {
            prop_assert!(w[1] < w[0], "{} !< {}", w[1], w[0]);
        }
        prop_assert!(ys.iter().all(|&y| y > 0.0 && y < p.c));
    }

    #[test]
    fn fermi_dirac_midpoint(p in params()) {
        let y = eval(ModelFamily::FermiDirac, &p, p.mu).unwrap();
        prop_assert!((y - p.c / 2.0).abs() < 1e-12);
    }

    #[test]
    fn fermi_dirac_asymptotes(p in params()) {
        let left = eval(ModelFamily::FermiDirac, &p, p.mu - 50.0 * p.t).unwrap();
        prop_assert!(left >= p.c * (1.0 - 1e-9) && left <= p.c);
        let right = eval(ModelFamily::FermiDirac, &p, p.mu + 50.0 * p.t).unwrap();
        prop_assert!(right < p.c * 1e-9);
    }

    #[test]
    fn family_ordering_above_mu(p in params(), u in 0.01f64..30.0) {
        let x = p.mu + u * p.t;
        let be = eval(ModelFamily::BoseEinstein, &p, x).unwrap();
        let bg = eval(ModelFamily::BoltzmannGibbs, &p, x).unwrap();
        let fd = eval(ModelFamily::FermiDirac, &p, x).unwrap();
        prop_assert!(be > bg && bg > fd);
    }

    #[test]
    fn gradient_matches_central_differences(fam in family(), p in params(), u in 0.1f64..6.0, neg in any::<bool>()) {
        let x = p.mu + if neg { -u } else { u } * p.t;
        let g = gradient(fam, &p, x).unwrap();
        let f = |q: ModelParams| eval(fam, &q, x).unwrap();
        let h = 1e-6;
        let num = [
            (f(ModelParams { t: p.t + h, ..p }) - f(ModelParams { t: p.t - h, ..p })) / (2.0 * h),
            (f(ModelParams { mu: p.mu + h, ..p }) - f(ModelParams { mu: p.mu - h, ..p })) / (2.0 * h),
            (f(ModelParams { c: p.c + h, ..p }) - f(ModelParams { c: p.c - h, ..p })) / (2.0 * h),
        ];
        for (a, n) in [g.d_t, g.d_mu, g.d_c].into_iter().zip(num) {
            let rel = (a - n).abs() / a.abs().max(n.abs());
            prop_assert!(rel < 1e-5, "{fam:?} analytic {a} numeric {n}");
        }
    }

    #[test]
    fn evaluation_is_pure(fam in family(), p in params(), u in 0.1f64..6.0) {
        let x = p.mu + u * p.t;
        prop_assert_eq!(eval(fam, &p, x).unwrap().to_bits(), eval(fam, &p, x).unwrap().to_bits());
    }
}
