use goalflow::gp::GpData;
use goalflow::{
    chi_square_gof, dispersion_factor, dispersion_index, expected_frequencies,
    expected_frequencies_exposure, gp_fit_mle, parse_dataset, GpParams, PoolingRule,
};
use proptest::prelude::*;

fn counts() -> impl Strategy<Value = Vec<u32>> {
    prop::collection::vec(0u32..9, 5..60)
        .prop_filter("positive total", |v| v.iter().any(|&x| x > 0))
}

fn gof_stat(x: &[u32]) -> Option<f64> {
    let table = expected_frequencies(x, PoolingRule::default()).ok()?;
    chi_square_gof(&table).ok().map(|g| g.statistic)
}

fn timeline() -> impl Strategy<Value = String> {
    prop::collection::vec((1u32..=90, prop::bool::ANY), 0..7).prop_map(|mut goals| {
        goals.sort();
        goals
            .iter()
            .map(|(m, a)| format!("{m}:{}", if *a { 'A' } else { 'B' }))
            .collect::<Vec<_>>()
            .join(";")
    })
}

proptest! {
    #[test]
    fn statistics_ignore_match_order(x in counts(), seed in any::<u64>()) {
        let mut y = x.clone();
        let k = y.len();
        y.rotate_left((seed as usize) % k);
        y.swap(0, k / 2);
        let (a, b) = (dispersion_index(&x).unwrap(), dispersion_index(&y).unwrap());
        prop_assert!((a - b).abs() < 1e-9);
        match (gof_stat(&x), gof_stat(&y)) {
            (Some(a), Some(b)) => prop_assert!((a - b).abs() < 1e-9),
            (None, None) => {}
            other => prop_assert!(false, "{other:?}"),
        }
    }

    #[test]
    fn csv_roundtrip(lines in prop::collection::vec(timeline(), 1..12)) {
        let mut text = String::from("match_id,stage,team_a,team_b,duration_min,goal_timeline\n");
        for (i, tl) in lines.iter().enumerate() {
            text.push_str(&format!("M{i:02},Group,Home {i},Away {i},90,{tl}\n"));
        }
        let t = parse_dataset(&text).unwrap();
        let again = parse_dataset(&t.to_csv().unwrap()).unwrap();
        prop_assert_eq!(t, again);
    }

    #[test]
    fn constant_exposure_mixture_is_plain_poisson(x in counts()) {
        let n = x.len();
        let mean = x.iter().sum::<u32>() as f64 / n as f64;
        let plain = expected_frequencies(&x, PoolingRule::default());
        let mixed = expected_frequencies_exposure(&x, &vec![90; n], mean / 90.0, PoolingRule::default());
        match (plain, mixed) {
            (Ok(p), Ok(m)) => {
                prop_assert_eq!(p.cells.len(), m.cells.len());
                for (a, b) in p.cells.iter().zip(&m.cells) {
                    prop_assert_eq!(a.observed, b.observed);
                    prop_assert!((a.expected - b.expected).abs() < 1e-12);
                }
            }
            (Err(_), Err(_)) => {}
            other => prop_assert!(false, "{other:?}"),
        }
    }

    #[test]
    fn dispersion_factor_increases_with_delta(a in -0.95f64..0.95, b in -0.95f64..0.95) {
        prop_assume!(a < b);
        let f = |d| dispersion_factor(GpParams::new(2.0, d).unwrap());
        prop_assert!(f(a) < f(b));
    }

    #[test]
    fn gp_nests_poisson(x in counts()) {
        prop_assume!(x.len() >= 3 && x.iter().any(|&c| c != x[0]));
        let fit = gp_fit_mle(&x).unwrap();
        let mean = x.iter().sum::<u32>() as f64 / x.len() as f64;
        let poisson = GpData::new(&x).loglik(mean, 0.0);
        prop_assert!((fit.poisson_loglik - poisson).abs() < 1e-9);
        prop_assert!(fit.loglik >= poisson - 1e-9, "{} < {}", fit.loglik, poisson);
    }
}
