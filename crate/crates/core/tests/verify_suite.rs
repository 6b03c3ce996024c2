use occupancy_core::verify::{
    check_condition1, check_condition2_3_5, check_condition4, check_corollary41, check_helper_inequalities, check_lemma32, efron_stein_variances,
    Grid, HelperRanges, Lemma32Ranges, McBudget,
};
use occupancy_core::OccupancyParams;

fn small_grid() -> Grid {
    Grid::new(2, vec![10, 20, 40], vec![0.5, 1.0, 2.0])
}

#[test]
fn conditions_on_small_grid() {
    let g = small_grid();
    let c1 = check_condition1(&g, &McBudget { samples: 4000, seed: 5 }).unwrap();
    assert!(c1.sup.is_finite() && c1.sup > 0.0);
    for rep in check_condition2_3_5(&g).unwrap() {
        assert!(rep.sup.is_finite(), "{rep:?}");
    }
    let c4 = check_condition4(&g).unwrap();
    assert!(c4.mu_ratio.sup.is_finite());
}

#[test]
fn efron_stein_small_point() {
    let reps = efron_stein_variances(&OccupancyParams::new(20, 10, 2), 20_000, 1, 1e3).unwrap();
    assert_eq!(reps.len(), 3);
    assert!(reps.iter().all(|r| r.within_ceiling && r.precise), "{reps:?}");
}

#[test]
fn helper_inequalities_on_reduced_ranges() {
    let ranges = HelperRanges {
        stirling_max_n: 20,
        hoeffding_max_n: 60,
        elementary_max: 60,
        ..HelperRanges::default()
    };
    let rep = check_helper_inequalities(&ranges);
    assert!(rep.pass, "{rep:?}");
}

#[test]
fn lemma32_defaults_pass() {
    let rep = check_lemma32(&Lemma32Ranges::default()).unwrap();
    assert!(rep.pass);
}

#[test]
fn corollary_sequences() {
    let rep = check_corollary41(&[7.0], &[1000, 10_000, 100_000, 1_000_000], &[5, 6]).unwrap();
    assert!(rep.pass);
}
