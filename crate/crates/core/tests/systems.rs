use iifs::ifs::*;
use iifs::systems::*;
use iifs::{Exact, Interval, Scalar};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use proptest::prelude::*;

fn q(n: i64, d: i64) -> Exact {
    BigRational::new(n.into(), d.into())
}

fn ds(d: &[u64]) -> DigitString {
    DigitString::new(d.to_vec()).unwrap()
}

fn dyadic() -> Gls {
    Gls::dyadic(OrientationBits::all_increasing())
}

fn mixed_gls() -> Gls {
    Gls::dyadic(OrientationBits {
        head: vec![],
        pattern: vec![true, true, false, false],
    })
}

/// Continuant oracle: `q_k = a_k q_{k-1} + q_{k-2}`.
fn continuant_length(digits: &[u64]) -> Exact {
    let (mut prev, mut cur) = (BigInt::zero(), BigInt::one());
    for &a in digits {
        let next = BigInt::from(a) * &cur + &prev;
        prev = cur;
        cur = next;
    }
    BigRational::new(BigInt::one(), &cur * (&cur + &prev))
}

#[test]
fn compose_examples() {
    assert_eq!(
        compose_map::<Exact>(&Gauss, &ds(&[1]), &q(0, 1)).unwrap(),
        q(1, 1)
    );
    assert_eq!(
        compose_map::<Exact>(&Gauss, &ds(&[1, 1]), &q(1, 1)).unwrap(),
        q(1, 1) / (q(1, 1) + q(1, 1) / q(2, 1))
    );
    assert_eq!(
        compose_map::<Exact>(&Gauss, &ds(&[1, 1]), &q(1, 1)).unwrap(),
        q(2, 3)
    );
    assert_eq!(
        compose_map::<Exact>(&Luroth, &DigitString::empty(), &q(3, 7)).unwrap(),
        q(3, 7)
    );
    assert!(compose_map::<Exact>(&Gauss, &ds(&[1]), &q(3, 2)).is_err());
    assert!(DigitString::new(vec![1, 0]).is_err());
}

#[test]
fn fundamental_interval_examples() {
    let iv = fundamental_interval::<Exact>(&Gauss, &ds(&[1]));
    assert_eq!(
        (iv.lo.clone(), iv.hi.clone(), iv.length()),
        (q(1, 2), q(1, 1), q(1, 2))
    );
    let iv = fundamental_interval::<Exact>(&Gauss, &ds(&[1, 1]));
    assert_eq!((iv.lo.clone(), iv.hi.clone()), (q(1, 2), q(2, 3)));
    assert_eq!(iv.length(), continuant_length(&[1, 1]));
    let iv = fundamental_interval::<Exact>(&Luroth, &ds(&[2]));
    assert_eq!(
        (iv.lo.clone(), iv.hi.clone(), iv.length()),
        (q(1, 3), q(1, 2), q(1, 6))
    );
}

#[test]
fn natural_projection_examples() {
    let golden = (5f64.sqrt() - 1.0) / 2.0;
    let iv = natural_projection::<Exact>(&Gauss, &mut std::iter::repeat(1), 20).unwrap();
    assert!(iv.lo.lower() <= golden && golden <= iv.hi.upper());
    assert!(iv.length() < q(1, 10_000_000));

    let iv = natural_projection::<Exact>(&Luroth, &mut std::iter::repeat(2), 10).unwrap();
    assert!(iv.lo < q(2, 5) && q(2, 5) < iv.hi);
    assert_eq!(iv.length(), q(1, 6i64.pow(10)));

    let iv = natural_projection::<Exact>(&Gauss, &mut std::iter::empty(), 0).unwrap();
    assert_eq!((iv.lo, iv.hi), (q(0, 1), q(1, 1)));
    assert!(natural_projection::<Exact>(&Gauss, &mut [1u64, 2].into_iter(), 3).is_err());
}

#[test]
fn digits_of_examples() {
    assert_eq!(
        digits_of::<Exact>(&Gauss, &q(2, 5), 2).unwrap(),
        ds(&[2, 2])
    );
    assert_eq!(luroth_digit(&q(2, 5)).unwrap(), 3);
    // consecutive Fibonacci ratios bracket the golden mean
    let golden = Interval::from_bounds(q(144, 233), q(89, 144)).unwrap();
    assert_eq!(digits_of(&Gauss, &golden, 5).unwrap(), ds(&[1, 1, 1, 1, 1]));
    // 2/5 is a shared endpoint of I(2,1) and I(2,2): the Gauss map resolves
    // it, the strict decoder refuses
    let iv = fundamental_interval::<Exact>(&Gauss, &ds(&[2, 2]));
    assert!(iv.lo <= q(2, 5) && q(2, 5) <= iv.hi);
    assert!(matches!(
        digits_of_strict::<Exact>(&Gauss, &q(2, 5), 2),
        Err(iifs::Error::Ambiguous { position: 2 })
    ));
    assert!(matches!(
        digits_of_strict::<Exact>(&Gauss, &q(1, 2), 3),
        Err(iifs::Error::Ambiguous { position: 1 })
    ));
    assert!(matches!(
        digits_of_strict::<Exact>(&Luroth, &q(1, 3), 1),
        Err(iifs::Error::Ambiguous { .. })
    ));
    // rationals have finite continued fractions: the orbit reaches 0
    assert!(matches!(
        digits_of::<Exact>(&Gauss, &q(2, 5), 3),
        Err(iifs::Error::Ambiguous { position: 3 })
    ));
    assert_eq!(
        digits_of::<Exact>(&Luroth, &q(1, 3), 3).unwrap(),
        ds(&[3, 1, 1])
    );
    assert_eq!(
        digits_of::<Exact>(&dyadic(), &q(1, 2), 2).unwrap(),
        ds(&[2, 1])
    );
    // an enclosure straddling 1/2 cannot be decoded
    let straddle = Interval::from_bounds(q(49, 100), q(51, 100)).unwrap();
    assert!(matches!(
        digits_of(&Gauss, &straddle, 1),
        Err(iifs::Error::Ambiguous { position: 1 })
    ));
    assert!(matches!(
        digits_of::<Exact>(&Gauss, &q(5, 4), 1),
        Err(iifs::Error::Domain(_))
    ));
}

#[test]
fn gauss_length_law_matches_continuants() {
    for s in random_strings(15, 30, 300, 7)
        .into_iter()
        .chain(all_strings(4, 5))
    {
        for depth in [1, s.depth() / 2, s.depth()] {
            let prefix = ds(&s.digits()[..depth.max(1)]);
            let iv = fundamental_interval::<Exact>(&Gauss, &prefix);
            assert_eq!(iv.length(), continuant_length(prefix.digits()), "{prefix}");
        }
    }
}

#[test]
fn affine_length_law() {
    let gls = mixed_gls();
    for s in random_strings(12, 25, 200, 11) {
        let luroth_product = s
            .digits()
            .iter()
            .fold(q(1, 1), |acc, &a| acc * q(1, (a * (a + 1)) as i64));
        assert_eq!(
            fundamental_interval::<Exact>(&Luroth, &s).length(),
            luroth_product
        );
        let gls_product = s
            .digits()
            .iter()
            .fold(q(1, 1), |acc, &a| acc * gls.lengths.length(a));
        assert_eq!(
            fundamental_interval::<Exact>(&gls, &s).length(),
            gls_product
        );
    }
}

#[test]
fn round_trip_depth_twelve() {
    let strings = random_strings(12, 20, 400, 3);
    assert!(verify_round_trip::<Exact>(&Gauss, &strings).passes);
    assert!(verify_round_trip::<Exact>(&Luroth, &strings).passes);
    assert!(verify_round_trip::<Exact>(&dyadic(), &strings).passes);
    assert!(verify_round_trip::<Exact>(&mixed_gls(), &strings).passes);
    let short: Vec<_> = strings.iter().take(40).cloned().collect();
    assert!(verify_round_trip::<Interval>(&QuadraticGauss::standard(), &short).passes);
}

#[test]
fn open_set_condition() {
    assert!(verify_open_set::<Exact>(&Gauss, 3, 8).passes);
    assert!(verify_open_set::<Exact>(&Luroth, 3, 8).passes);
    assert!(verify_open_set::<Exact>(&mixed_gls(), 3, 8).passes);
    assert!(verify_open_set::<Interval>(&QuadraticGauss::standard(), 2, 12).passes);
}

#[test]
fn contraction_decay() {
    fn check<S: Scalar>(system: &dyn Iifs<S>, depth: usize) {
        let params = system.params();
        let rho = params.rho_f64();
        for n in 1..=depth {
            let bound = rho.powi((n / params.m) as i32);
            let max_len = all_strings(n, 6)
                .iter()
                .map(|s| fundamental_interval(system, s).length().upper())
                .fold(0.0, f64::max);
            assert!(
                max_len <= bound * (1.0 + 1e-12),
                "{} depth {n}: {max_len} > {bound}",
                system.label()
            );
        }
    }
    check::<Exact>(&Gauss, 5);
    check::<Exact>(&Luroth, 5);
    check::<Exact>(&mixed_gls(), 5);
    check::<Interval>(&QuadraticGauss::standard(), 4);
}

#[test]
fn quadratic_enclosures_shrink() {
    let qg = QuadraticGauss::standard();
    for s in random_strings(10, 15, 30, 5) {
        for n in 1..=8 {
            let w = |k: usize| {
                fundamental_interval::<Interval>(&qg, &ds(&s.digits()[..k]))
                    .length()
                    .rational_upper()
            };
            assert!(w(n + 2) <= w(n) / q(2, 1), "{s} depth {n}");
        }
    }
}

#[test]
fn contraction_at_declared_rho() {
    let grid = uniform_grid::<Exact>(8);
    let r = verify_contraction::<Exact>(&Luroth, &grid, 1000).unwrap();
    assert!(r.passes);
    assert_eq!(r.measured_sup, 0.5);
    assert_eq!(r.witness_digits, vec![1]);
    let r = verify_contraction::<Exact>(&dyadic(), &grid, 1000).unwrap();
    assert!(r.passes && r.measured_sup == 0.5);
    assert!(
        verify_contraction::<Exact>(&mixed_gls(), &grid, 1000)
            .unwrap()
            .passes
    );

    let fgrid = uniform_grid::<f64>(16);
    let r = verify_contraction::<f64>(&Gauss, &fgrid, 1000).unwrap();
    assert!(r.passes && r.measured_sup <= 0.5, "{r:?}");
    let r = verify_contraction::<f64>(&QuadraticGauss::standard(), &fgrid, 1000).unwrap();
    assert!(r.passes && r.measured_sup == 0.5, "{r:?}");
    assert!(
        verify_contraction::<Exact>(&Gauss, &grid, 40)
            .unwrap()
            .passes
    );
}

#[test]
fn distortion() {
    let strings = random_strings(6, 50, 200, 1);
    let grid = uniform_grid::<Exact>(6);
    for system in [&Luroth as &dyn Iifs<Exact>, &dyadic(), &mixed_gls()] {
        let r = estimate_distortion(system, &strings, &grid).unwrap();
        assert!(r.exactly_one && r.passes, "{}", system.label());
    }
    let shallow =
        estimate_distortion::<Exact>(&Gauss, &random_strings(5, 20, 200, 2), &grid).unwrap();
    let deep =
        estimate_distortion::<Exact>(&Gauss, &random_strings(10, 20, 200, 2), &grid).unwrap();
    assert!(shallow.passes && deep.passes);
    assert!(shallow.measured >= 1.0 && deep.measured <= 4.0);
    let qg = estimate_distortion::<Interval>(
        &QuadraticGauss::standard(),
        &random_strings(4, 10, 30, 2),
        &uniform_grid(4),
    )
    .unwrap();
    assert!(qg.passes, "{qg:?}");
}

#[test]
fn regularity_fits() {
    let grid = uniform_grid::<Exact>(8);
    let fit = fit_regularity::<Exact>(&Luroth, 0.1, 200, &grid).unwrap();
    assert!(fit.verified);
    // best constants are ξ_1^{±ε}, so c1 = c2 = 1 is admissible
    assert!(fit.c1 >= 1.0 && fit.c2 <= 1.0, "{fit:?}");
    let fit = fit_regularity::<f64>(&Gauss, 0.1, 1000, &uniform_grid(16)).unwrap();
    assert!(fit.verified);
    // n = 1 gives |f_1'(1)| = 1/4 and |f_1'(0)| = 1 with ξ_1 = 1
    assert!(fit.c1 <= 0.25 && fit.c1 > 0.0 && fit.c2 >= 1.0, "{fit:?}");
    let fit = fit_regularity::<Exact>(&dyadic(), 0.1, 60, &grid).unwrap();
    assert!(fit.verified && fit.c1 >= 1.0 && fit.c2 <= 1.0, "{fit:?}");
    assert!(fit_regularity::<Exact>(&Gauss, 0.1, 10, &[]).is_err());
}

#[test]
fn gauss_frame_against_composition() {
    let frame = Iifs::<Exact>::prefix_frame(&Gauss, 3, &7u32.into()).unwrap();
    let prefix = ds(&[3; 7]);
    let iv = fundamental_interval::<Exact>(&Gauss, &prefix);
    assert!(frame.ln_length_upper >= iv.length().lower().ln());
    assert!(frame.ln_length_upper <= iv.length().upper().ln() + 1e-9);
    let inner = (q(1, 7), q(2, 9));
    let f = |x: &Exact| compose_map::<Exact>(&Gauss, &prefix, x).unwrap();
    let truth = Signed::abs(&(f(&inner.1) - f(&inner.0)));
    let ln_hi = frame.ln_length_upper_of::<Exact>(&Gauss, &inner.0, &inner.1);
    assert!(ln_hi >= truth.upper().ln() - 1e-12);
    let ln_lo = frame.ln_length_lower_of::<Exact>(&Gauss, &inner.0, &inner.1);
    assert!(ln_lo <= truth.lower().ln() + 1e-12 && ln_hi - ln_lo < 1e-9);
}

#[test]
fn prefix_frames_bracket_log_lengths() {
    // explicit prefixes: the truth is the composed interval
    let systems: [(&dyn Iifs<Exact>, u64); 3] = [(&Gauss, 2), (&Luroth, 3), (&mixed_gls(), 2)];
    for (system, digit) in systems {
        for len in [0u64, 1, 9, 40] {
            let frame = system.prefix_frame(digit, &len.into()).unwrap();
            let iv = fundamental_interval(
                system,
                &DigitString::new(vec![digit; len as usize]).unwrap(),
            );
            let truth = iv.length().lower().ln();
            assert!(
                frame.ln_length_lower <= truth + 1e-12 && truth <= frame.ln_length_upper + 1e-12
            );
        }
    }
    // a long golden prefix: |I_L| = 1/(F_{L+1} F_{L+2}), F_n ≈ φ^n/√5
    let len = 5000u64;
    let frame = Iifs::<Exact>::prefix_frame(&Gauss, 1, &len.into()).unwrap();
    let ln_phi = ((1.0 + 5f64.sqrt()) / 2.0).ln();
    let truth = -((2 * len + 3) as f64) * ln_phi + 5f64.ln();
    assert!(frame.ln_length_lower < truth && truth < frame.ln_length_upper);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn nesting_and_round_trip(digits in proptest::collection::vec(1u64..=20, 1..=12), extra in 1u64..=20) {
        let s = DigitString::new(digits).unwrap();
        for system in [&Gauss as &dyn Iifs<Exact>, &Luroth, &mixed_gls()] {
            let parent = fundamental_interval(system, &s);
            let child = fundamental_interval(system, &s.extended(extra));
            prop_assert!(parent.encloses(&child));
            prop_assert!(parent.lo < parent.hi);
            prop_assert_eq!(digits_of(system, &parent.midpoint(), s.depth()).unwrap(), s.clone());
        }
    }

    #[test]
    fn equal_depth_intervals_are_disjoint(
        a in proptest::collection::vec(1u64..=9, 4),
        b in proptest::collection::vec(1u64..=9, 4),
    ) {
        prop_assume!(a != b);
        for system in [&Gauss as &dyn Iifs<Exact>, &Luroth, &mixed_gls()] {
            let x = fundamental_interval(system, &DigitString::new(a.clone()).unwrap());
            let y = fundamental_interval(system, &DigitString::new(b.clone()).unwrap());
            prop_assert!(x.hi <= y.lo || y.hi <= x.lo);
        }
    }
}
