mod common;

use common::{gaussian_config, score_gaussian, train_gaussian};

#[test]
fn learned_map_recovers_gaussian_posterior() {
    let (map, report) = train_gaussian(4000, &gaussian_config(1));
    let score = score_gaussian(&map, 13);
    for (y, m, v) in &score.per_y {
        eprintln!("y={y:+.2} mean={m:+.4} (exact {:+.4}) var={v:.4}", y / 2.0);
    }
    eprintln!("train {:.1}s", report.seconds);
    assert!(score.mean_abs_error < 0.1, "mean error {}", score.mean_abs_error);
    assert!((0.35..=0.65).contains(&score.variance), "variance {}", score.variance);
}
