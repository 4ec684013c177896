use proptest::prelude::*;
use stylecurve_core::curves::{eval_curve, monotone_slopes, sample_curve, CurveKnots};

fn knots(v: &[f64]) -> CurveKnots {
    CurveKnots::new(v.to_vec()).unwrap()
}

/// Nondecreasing knot vectors, with flat runs mixed in.
fn monotone_knots() -> impl Strategy<Value = Vec<f64>> {
    (
        -2.0f64..2.0,
        prop::collection::vec(prop_oneof![1 => Just(0.0), 4 => 0.0f64..1.0], 1..32),
    )
        .prop_map(|(start, steps)| {
            let mut u = vec![start];
            for s in steps {
                let last = *u.last().unwrap();
                u.push(last + s);
            }
            u
        })
}

fn any_knots() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, 2..24)
}

/// Textbook Fritsch-Carlson evaluation on uniform knots, written out with
/// the Hermite basis functions and the same tangent choices.
fn textbook_eval(u: &[f64], t: f64) -> f64 {
    let m = u.len();
    let h = 1.0 / (m - 1) as f64;
    // secants as slopes in value per unit t
    let delta: Vec<f64> = (0..m - 1).map(|k| (u[k + 1] - u[k]) / h).collect();
    let mut d = vec![0.0; m];
    if m == 2 {
        d = vec![delta[0]; 2];
    } else {
        for k in 1..m - 1 {
            let (a, b) = (delta[k - 1], delta[k]);
            d[k] = if a * b > 0.0 {
                2.0 / (1.0 / a + 1.0 / b)
            } else {
                0.0
            };
        }
        let end = |near: f64, far: f64| {
            let e = 1.5 * near - 0.5 * far;
            if e.signum() != near.signum() || near == 0.0 {
                0.0
            } else if near.signum() != far.signum() && e.abs() > 3.0 * near.abs() {
                3.0 * near
            } else {
                e
            }
        };
        d[0] = end(delta[0], delta[1]);
        d[m - 1] = end(delta[m - 2], delta[m - 3]);
    }
    let k = ((t / h).floor() as usize).min(m - 2);
    let s = (t - k as f64 * h) / h;
    let h00 = 2.0 * s.powi(3) - 3.0 * s.powi(2) + 1.0;
    let h10 = s.powi(3) - 2.0 * s.powi(2) + s;
    let h01 = -2.0 * s.powi(3) + 3.0 * s.powi(2);
    let h11 = s.powi(3) - s.powi(2);
    h00 * u[k] + h10 * h * d[k] + h01 * u[k + 1] + h11 * h * d[k + 1]
}

#[test]
fn frozen_reference_values() {
    // scipy.interpolate.PchipInterpolator on uniform abscissae
    let cases: [(&[f64], &[(f64, f64)]); 3] = [
        (&[0.0, 1.0, 0.5, 2.0], &[(0.4, 0.948)]),
        (
            &[0.0, 0.1, 0.15, 0.5, 0.55, 0.56, 0.8, 0.95, 1.0],
            &[
                (0.03, 0.028924800000000004),
                (0.2, 0.1262),
                (0.37, 0.4952735999999999),
                (0.5, 0.55),
                (0.61, 0.5580295424),
                (0.77, 0.8295207384615385),
                (0.99, 0.9995328),
            ],
        ),
        (
            &[0.3, -0.2, 0.4, 0.4, -0.1],
            &[
                (0.1, -0.027200000000000026),
                (0.3, -0.13760000000000003),
                (0.55, 0.4),
                (0.8, 0.372),
                (0.95, 0.04800000000000018),
            ],
        ),
    ];
    for (u, points) in cases {
        for &(t, want) in points {
            let got = eval_curve(&knots(u), t).unwrap();
            assert!((got - want).abs() < 1e-12, "{u:?} at {t}: {got} vs {want}");
        }
    }
}

#[test]
fn matches_textbook_oracle() {
    let mut state = 12345u64;
    let mut next = || {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    for _ in 0..200 {
        let m = 2 + (next() * 15.0) as usize;
        let u: Vec<f64> = (0..m).map(|_| next() * 4.0 - 2.0).collect();
        for _ in 0..20 {
            let t = next();
            let got = eval_curve(&knots(&u), t).unwrap();
            let want = textbook_eval(&u, t);
            assert!((got - want).abs() < 1e-12, "{u:?} at {t}: {got} vs {want}");
        }
    }
}

#[test]
fn dense_samples_agree_with_pointwise_evaluation() {
    let u = knots(&[0.05, 0.3, 0.2, 0.9, 0.6, 1.1, 0.4, 0.45, 0.95]);
    let s = sample_curve(&u, 256).unwrap();
    for (k, v) in s.values().iter().enumerate() {
        assert_eq!(*v, eval_curve(&u, k as f64 / 255.0).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn monotone_knots_give_monotone_samples(u in monotone_knots(), n in 2usize..600) {
        let s = sample_curve(&knots(&u), n).unwrap();
        for w in s.values().windows(2) {
            prop_assert!(w[1] >= w[0], "{u:?}: {} then {}", w[0], w[1]);
        }
        // and mirrored data stays nonincreasing
        let neg: Vec<f64> = u.iter().map(|v| -v).collect();
        let s = sample_curve(&knots(&neg), n).unwrap();
        for w in s.values().windows(2) {
            prop_assert!(w[1] <= w[0]);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn knots_are_reproduced(u in any_knots()) {
        let c = knots(&u);
        let m = u.len();
        for (k, want) in u.iter().enumerate() {
            let got = eval_curve(&c, k as f64 / (m - 1) as f64).unwrap();
            prop_assert!((got - want).abs() <= 1e-12);
        }
    }

    #[test]
    fn lines_are_reproduced(a in -2.0f64..2.0, b in -2.0f64..2.0, m in 2usize..30, n in 2usize..300) {
        let u: Vec<f64> = (0..m).map(|k| a + b * k as f64 / (m - 1) as f64).collect();
        let s = sample_curve(&knots(&u), n).unwrap();
        for (k, v) in s.values().iter().enumerate() {
            let want = a + b * k as f64 / (n - 1) as f64;
            prop_assert!((v - want).abs() <= 1e-12, "{v} vs {want}");
        }
        let d = monotone_slopes(&u).unwrap();
        for v in d {
            prop_assert!((v - b / (m - 1) as f64).abs() <= 1e-12);
        }
    }

    #[test]
    fn positively_homogeneous(u in any_knots(), beta in 0.0f64..2.0, t in 0.0f64..=1.0) {
        let scaled: Vec<f64> = u.iter().map(|v| beta * v).collect();
        let lhs = eval_curve(&knots(&scaled), t).unwrap();
        let rhs = beta * eval_curve(&knots(&u), t).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12, "{lhs} vs {rhs}");
    }

    #[test]
    fn sampling_is_pointwise_evaluation(u in any_knots(), n in 2usize..200) {
        let c = knots(&u);
        let s = sample_curve(&c, n).unwrap();
        for (k, v) in s.values().iter().enumerate() {
            prop_assert_eq!(*v, eval_curve(&c, k as f64 / (n - 1) as f64).unwrap());
        }
    }
}
