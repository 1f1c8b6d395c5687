use std::sync::Arc;

use l1lab_core::convex_geometry::{
    chebyshev, diameter, empirical_modulus, separation_check, slack, slack_by_parts,
    ChebyshevOptions, ConvexBody,
};
use l1lab_core::fixed_point_lab::{
    alspach_map, apply_map, check_in_example_set, km_iterate, lipschitz_estimate,
    sample_example_set, MapSpec, SampleDomain,
};
use l1lab_core::grid_space::{
    extract_measure_cauchy_subsequence, l1_norm, local_measure_distance, rearrange_decreasing,
    truncate,
};
use l1lab_core::integrability::{
    absolute_continuity_delta, build_orlicz, family_difference, family_scale, layer_cake_bound,
    orlicz_integral, tail_profile, tail_threshold, ui_certificate,
};
use l1lab_core::lorentz::{lorentz_p1_norm, FiniteSequence};
use l1lab_core::{FunctionFamily, GridFunction, Partition};
use proptest::prelude::*;

fn two_window() -> Arc<Partition> {
    Arc::new(Partition::new(vec![vec![0.25, 0.5, 0.25], vec![1.0, 0.5]]).unwrap())
}

fn on(p: &Arc<Partition>, v: Vec<f64>) -> GridFunction {
    GridFunction::new(p.clone(), v).unwrap()
}

fn vals(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0..3.0f64, n)
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn l1_norm_is_a_norm(a in vals(5), b in vals(5), s in -4.0..4.0f64) {
        let p = two_window();
        let (f, g) = (on(&p, a), on(&p, b));
        prop_assert!(close(l1_norm(&f.scale(s)), s.abs() * l1_norm(&f), 1e-12));
        prop_assert!(l1_norm(&f.add(&g).unwrap()) <= l1_norm(&f) + l1_norm(&g) + 1e-12);
    }

    #[test]
    fn local_measure_distance_is_a_metric(a in vals(5), b in vals(5), c in vals(5)) {
        let p = two_window();
        let (f, g, h) = (on(&p, a), on(&p, b), on(&p, c));
        let fg = local_measure_distance(&f, &g).unwrap();
        prop_assert_eq!(fg, local_measure_distance(&g, &f).unwrap());
        prop_assert_eq!(local_measure_distance(&f, &f).unwrap(), 0.0);
        if f.values() != g.values() {
            prop_assert!(fg > 0.0);
        }
        let via = local_measure_distance(&f, &h).unwrap() + local_measure_distance(&h, &g).unwrap();
        prop_assert!(fg <= via + 1e-12);
    }

    #[test]
    fn truncation_is_nonexpansive(a in vals(5), b in vals(5), k in 0.0..3.0f64) {
        let p = two_window();
        let (f, g) = (on(&p, a), on(&p, b));
        let d = truncate(&f, k).unwrap().l1_distance(&truncate(&g, k).unwrap()).unwrap();
        prop_assert!(d <= f.l1_distance(&g).unwrap() + 1e-12);
    }

    #[test]
    fn rearrangement_preserves_norm_and_measure(a in vals(5)) {
        let p = two_window();
        let f = on(&p, a);
        let r = rearrange_decreasing(&f);
        prop_assert!(r.windows(2).all(|w| w[0].0 >= w[1].0));
        let mass: f64 = r.iter().map(|(v, m)| v * m).sum();
        let measure: f64 = r.iter().map(|(_, m)| m).sum();
        let mut total = p.measures().to_vec();
        total.sort_by(f64::total_cmp);
        let mut seen: Vec<f64> = r.iter().map(|(_, m)| *m).collect();
        seen.sort_by(f64::total_cmp);
        prop_assert_eq!(seen, total);
        prop_assert!(close(mass, l1_norm(&f), 1e-12));
        prop_assert!(close(measure, p.total_measure(), 1e-12));
    }

    #[test]
    fn cauchy_extraction_is_pairwise_close(seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let p = Arc::new(Partition::uniform(4, 0.25).unwrap());
        let seq: Vec<GridFunction> = (0..100)
            .map(|_| on(&p, (0..4).map(|_| r.random::<f64>()).collect()))
            .collect();
        let tol = 0.05;
        let idx = extract_measure_cauchy_subsequence(&seq, tol).unwrap();
        prop_assert!(!idx.is_empty());
        prop_assert!(idx.windows(2).all(|w| w[0] < w[1]));
        for &i in &idx {
            for &j in &idx {
                prop_assert!(local_measure_distance(&seq[i], &seq[j]).unwrap() < tol);
            }
        }
    }
}

fn family_on(p: &Arc<Partition>, rows: Vec<Vec<f64>>) -> FunctionFamily {
    FunctionFamily::new("f", rows.into_iter().map(|v| on(p, v)).collect()).unwrap()
}

fn family_rows() -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-4.0..4.0f64, 6), 1..6)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn tail_profile_monotone_and_scale_exact(rows in family_rows(), t in 0.0..4.0f64, dt in 0.0..2.0f64) {
        let p = Arc::new(Partition::new(vec![vec![0.1, 0.2, 0.3, 0.15, 0.05, 0.2]]).unwrap());
        let fam = family_on(&p, rows);
        prop_assert!(tail_profile(&fam, t + dt).unwrap() <= tail_profile(&fam, t).unwrap());
        let a = 4.0;
        let scaled = family_scale(&fam, a).unwrap();
        prop_assert_eq!(tail_profile(&scaled, a * t).unwrap(), tail_profile(&fam, t).unwrap());
    }

    #[test]
    fn orlicz_ladder_properties(rows in family_rows()) {
        let p = Arc::new(Partition::new(vec![vec![0.1, 0.2, 0.3, 0.15, 0.05, 0.2]]).unwrap());
        let fam = family_on(&p, rows);
        let phi = build_orlicz(&fam).unwrap();
        let s = phi.breakpoints();
        prop_assert!(s.windows(2).all(|w| w[0] < w[1]));
        for (k, &sk) in s.iter().enumerate() {
            prop_assert!(tail_profile(&fam, sk).unwrap() <= 0.5f64.powi(k as i32 + 1) + 1e-15);
        }
        let slopes = phi.slopes();
        prop_assert!(slopes.windows(2).all(|w| w[0] <= w[1]));
        let bound = layer_cake_bound(&phi, &fam).unwrap();
        for f in fam.members() {
            prop_assert!(orlicz_integral(&phi, f) <= bound + 1e-9);
        }
    }

    #[test]
    fn difference_family_delta_and_m_bounds(rows in family_rows()) {
        let p = Arc::new(Partition::uniform(6, 1.0 / 6.0).unwrap());
        let fam = family_on(&p, rows);
        let diff = family_difference(&fam).unwrap();
        for eps in [0.5, 0.2, 0.05] {
            if let Some(d) = absolute_continuity_delta(&fam, eps / 2.0).unwrap() {
                let dd = absolute_continuity_delta(&diff, eps).unwrap();
                prop_assert!(dd.is_some_and(|dd| dd >= d), "eps {eps}: {dd:?} < {d}");
            }
            // tail_G(2M) <= 4 sup tail_F(M), so M doubles when eps is quartered
            if let Some(m) = tail_threshold(&fam, eps / 4.0).unwrap() {
                let md = tail_threshold(&diff, eps).unwrap();
                prop_assert!(md.is_some_and(|md| md <= 2.0 * m), "eps {eps}: {md:?} > 2*{m}");
            }
        }
    }

    #[test]
    fn certificate_is_monotone(rows in family_rows()) {
        let p = Arc::new(Partition::new(vec![vec![0.1, 0.2, 0.3, 0.15, 0.05, 0.2]]).unwrap());
        let fam = family_on(&p, rows);
        let cert = ui_certificate(&fam, &[0.5, 0.2, 0.1, 0.05, 0.01], f64::INFINITY).unwrap();
        // eps descends along the grid, so delta must not grow and M must not shrink
        let deltas: Vec<f64> = cert.delta.iter().map(|d| d.unwrap_or(0.0)).collect();
        prop_assert!(deltas.windows(2).all(|w| w[0] >= w[1]));
        let ms: Vec<f64> = cert.m.iter().map(|m| m.unwrap_or(f64::INFINITY)).collect();
        prop_assert!(ms.windows(2).all(|w| w[0] <= w[1]));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn slack_identities(a in vals(5), b in vals(5)) {
        let p = two_window();
        let (f, g) = (on(&p, a), on(&p, b));
        let s = slack(&f, &g).unwrap();
        prop_assert!(s >= 0.0);
        let same_sign = f.values().iter().zip(g.values()).all(|(x, y)| x * y >= 0.0);
        prop_assert_eq!(s == 0.0, same_sign);
        let direct = l1_norm(&f) + l1_norm(&g) - l1_norm(&f.add(&g).unwrap());
        prop_assert!(close(direct, s, 1e-12));
        prop_assert!(close(slack_by_parts(&f, &g).unwrap(), s, 1e-12));
    }

    #[test]
    fn modulus_nonincreasing_as_eta_drops(rows in family_rows(), seed in any::<u64>()) {
        let p = Arc::new(Partition::uniform(6, 1.0 / 6.0).unwrap());
        let fam = family_on(&p, rows);
        let mut last: Option<f64> = None;
        for eta in [0.9, 0.6, 0.3, 0.1] {
            match empirical_modulus(&fam, eta, 400, seed) {
                Ok(m) => {
                    prop_assert!(m.delta_hat >= 0.0);
                    if let Some(prev) = last {
                        prop_assert!(m.delta_hat <= prev);
                    }
                    last = Some(m.delta_hat);
                }
                Err(l1lab_core::Error::NoQualifyingPair) => prop_assert!(last.is_none()),
                Err(e) => return Err(TestCaseError::fail(e.to_string())),
            }
        }
    }
}

fn body_rows() -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-2.0..2.0f64, 3), 2..5)
}

fn body_on(p: &Arc<Partition>, rows: &[Vec<f64>]) -> ConvexBody {
    ConvexBody::new("b", rows.iter().map(|v| on(p, v.clone())).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn radius_bracketed_and_invariant(rows in body_rows(), shift in -3.0..3.0f64, scale in 0.2..5.0f64) {
        let p = Arc::new(Partition::new(vec![vec![0.5, 0.25, 0.25]]).unwrap());
        let body = body_on(&p, &rows);
        let diam = diameter(&body);
        prop_assume!(diam > 1e-6);
        let opts = ChebyshevOptions::default();
        let rad = chebyshev(&body, 1e-12, opts).unwrap().radius;
        prop_assert!(rad >= diam / 2.0 - 1e-9 && rad <= diam + 1e-9);

        let moved: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|v| v + shift).collect()).collect();
        let r_moved = chebyshev(&body_on(&p, &moved), 1e-12, opts).unwrap().radius;
        prop_assert!((r_moved - rad).abs() <= 1e-9, "translate: {r_moved} vs {rad}");

        let grown: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|v| v * scale).collect()).collect();
        let r_grown = chebyshev(&body_on(&p, &grown), 1e-12, opts).unwrap().radius;
        prop_assert!((r_grown - scale * rad).abs() <= 1e-9 * (1.0 + scale * rad), "scale: {r_grown} vs {}", scale * rad);
    }

    #[test]
    fn diameter_dominates_hull_samples(rows in body_rows(), seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let p = Arc::new(Partition::uniform(3, 1.0 / 3.0).unwrap());
        let body = body_on(&p, &rows);
        let diam = diameter(&body);
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut hull_point = || {
            let w: Vec<f64> = rows.iter().map(|_| r.random::<f64>() + 1e-3).collect();
            let total: f64 = w.iter().sum();
            let v = (0..3)
                .map(|c| rows.iter().zip(&w).map(|(row, wi)| row[c] * wi / total).sum())
                .collect();
            on(&p, v)
        };
        for _ in 0..50 {
            let (x, y) = (hull_point(), hull_point());
            prop_assert!(x.l1_distance(&y).unwrap() <= diam + 1e-12);
        }
    }

    #[test]
    fn separation_matches_enumeration(rows in body_rows(), a in vals(3), b in vals(3), eta in 0.05..0.95f64) {
        let p = Arc::new(Partition::uniform(3, 1.0 / 3.0).unwrap());
        let body = body_on(&p, &rows);
        let (c1, c2) = (on(&p, a), on(&p, b));
        let got = separation_check(&c1, &c2, &body, eta).unwrap();
        let num = c1.l1_distance(&c2).unwrap();
        let expected = body.generators().iter().any(|w| {
            let d = c1.l1_distance(w).unwrap() + c2.l1_distance(w).unwrap();
            d > 0.0 && num / d >= eta
        });
        prop_assert_eq!(got.holds, expected);
        if let Some(k) = got.witness {
            prop_assert!(got.ratio.unwrap() >= eta);
            prop_assert!(k < rows.len());
        }
    }
}

fn in_k(seed: u64, extra: u32) -> (GridFunction, GridFunction) {
    let fam = sample_example_set(seed, 2, 64).unwrap();
    let m = fam.members();
    (
        m[0].refine_dyadic(extra).unwrap(),
        m[1].refine_dyadic(extra).unwrap(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn alspach_preserves_k_and_distance(seed in any::<u64>()) {
        let (f, g) = (in_k(seed, 3).0, in_k(seed, 3).1);
        let (tf, tg) = (alspach_map(&f).unwrap(), alspach_map(&g).unwrap());
        check_in_example_set(&tf).unwrap();
        check_in_example_set(&tg).unwrap();
        prop_assert!((tf.integral() - 0.5).abs() <= 1e-12);
        let gap = tf.l1_distance(&tg).unwrap() - f.l1_distance(&g).unwrap();
        prop_assert!(gap.abs() <= 1e-12);
    }

    #[test]
    fn km_residuals_monotone_and_step_exact(seed in any::<u64>(), lambda in 0.05..0.95f64, which in 0usize..4) {
        let (x0, other) = in_k(seed, 0);
        let spec = match which {
            0 => MapSpec::alspach_projected(),
            1 => MapSpec::convex_combination(vec![
                (0.3, MapSpec::alspach_projected()),
                (0.7, MapSpec::constant(other.clone())),
            ]).unwrap(),
            2 => MapSpec::composition(vec![MapSpec::alspach_projected(), MapSpec::alspach_projected()]).unwrap(),
            _ => MapSpec::identity(),
        };
        let trace = km_iterate(&spec, &x0, lambda, 60, 0.0).unwrap();
        let r = trace.residuals();
        prop_assert!(r.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{r:?}");
        for rec in &trace.records {
            prop_assert!((rec.step_norm - lambda * rec.residual).abs() <= 1e-12);
        }
    }

    #[test]
    fn combined_specs_stay_nonexpansive(seed in any::<u64>()) {
        let (c, _) = in_k(seed ^ 0x5eed, 4);
        let specs = [
            MapSpec::convex_combination(vec![(0.5, MapSpec::alspach()), (0.5, MapSpec::identity())]).unwrap(),
            MapSpec::composition(vec![MapSpec::alspach(), MapSpec::alspach()]).unwrap(),
            MapSpec::convex_combination(vec![(0.25, MapSpec::constant(c)), (0.75, MapSpec::alspach())]).unwrap(),
        ];
        let domain = SampleDomain::ExampleSet { resolution: 64, headroom: 4 };
        for spec in &specs {
            prop_assert!(lipschitz_estimate(spec, seed, 8, domain).unwrap() <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn alspach_output_stays_on_grid(seed in any::<u64>()) {
        let (f, _) = in_k(seed, 1);
        let tf = apply_map(&MapSpec::alspach(), &f).unwrap();
        prop_assert_eq!(tf.values().len(), f.values().len());
        prop_assert_eq!(tf.effective_resolution(), f.effective_resolution().map(|d| d + 1));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn lorentz_norm_properties(
        x in prop::collection::vec(-5.0..5.0f64, 1..12),
        y in prop::collection::vec(-5.0..5.0f64, 1..12),
        p in 1.01..6.0f64,
        rot in 0usize..12,
    ) {
        let n = x.len().max(y.len());
        let pad = |v: &[f64]| {
            let mut v = v.to_vec();
            v.resize(n, 0.0);
            v
        };
        let (xs, ys) = (pad(&x), pad(&y));
        let nx = lorentz_p1_norm(&FiniteSequence(xs.clone()), p).unwrap();
        let ny = lorentz_p1_norm(&FiniteSequence(ys.clone()), p).unwrap();

        let mut perm = xs.clone();
        perm.rotate_left(rot % n);
        perm.reverse();
        prop_assert!(close(lorentz_p1_norm(&FiniteSequence(perm), p).unwrap(), nx, 1e-12));

        let sum: Vec<f64> = xs.iter().zip(&ys).map(|(a, b)| a + b).collect();
        prop_assert!(lorentz_p1_norm(&FiniteSequence(sum), p).unwrap() <= nx + ny + 1e-12);

        let bigger: Vec<f64> = xs.iter().map(|v| v.abs() + 0.5).collect();
        prop_assert!(lorentz_p1_norm(&FiniteSequence(bigger), p).unwrap() >= nx);

        prop_assert!(nx <= xs.iter().map(|v| v.abs()).sum::<f64>() + 1e-12);
    }
}
