use super::*;
use crate::error::Error;
use crate::linalg::dot;
use crate::model::{LinearSystem, Term};
use crate::rng::{stream_rng, Stream};

fn system(terms: &[(usize, usize, f64)], y: Vec<f64>, lower: Vec<f64>, upper: Vec<f64>) -> LinearSystem {
    LinearSystem::new(
        lower.len(),
        terms.iter().map(|&(eq, var, coeff)| Term { eq, var, coeff }).collect(),
        y,
        lower,
        upper,
    )
    .unwrap()
}

fn names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("x{i}")).collect()
}

fn triangle() -> LinearSystem {
    // x0 + x1 + s = 1: the triangle x0 + x1 <= 1 with slack s.
    system(
        &[(0, 0, 1.0), (0, 1, 1.0), (0, 2, 1.0)],
        vec![1.0],
        vec![0.0; 3],
        vec![1.0; 3],
    )
}

#[test]
fn equality_chart() {
    let s = system(&[(0, 0, 1.0), (0, 1, -1.0)], vec![0.0], vec![0.0; 2], vec![1.0; 2]);
    let c = chart(&s).unwrap();
    assert_eq!(c.reduced_dim(), 1);
    let b = &c.basis[0];
    assert!((b[0].abs() - 0.5f64.sqrt()).abs() < 1e-12 && (b[0] - b[1]).abs() < 1e-12);
    assert!((c.point[0] - 0.5).abs() < 1e-6 && (c.point[1] - 0.5).abs() < 1e-6);
}

#[test]
fn chart_invariants_hold() {
    let s = system(
        &[
            (0, 0, 1.0),
            (0, 1, 1.0),
            (0, 2, -1.0),
            (1, 1, 1.0),
            (1, 3, 1.0),
            (1, 4, -1.0),
            (2, 0, 2.0),
            (2, 4, 1.0),
            (2, 5, -1.0),
        ],
        vec![0.3, 0.2, 0.5],
        vec![0.0; 6],
        vec![1.0, 1.0, 2.0, 1.0, 2.0, 3.0],
    );
    let c = chart(&s).unwrap();
    assert_eq!(c.reduced_dim(), 3);
    assert!(s.is_feasible(&c.point, 1e-9, 0.0));
    assert!(c.margin > 0.0);
    let dense = s.dense_matrix();
    for (i, v) in c.basis.iter().enumerate() {
        for row in &dense {
            assert!(dot(row, v).abs() < 1e-10);
        }
        for (j, w) in c.basis.iter().enumerate() {
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((dot(v, w) - want).abs() < 1e-10);
        }
    }
}

#[test]
fn infeasible_chart() {
    let s = system(&[(0, 0, 1.0), (0, 1, 1.0)], vec![3.0], vec![0.0; 2], vec![1.0; 2]);
    assert!(matches!(chart(&s), Err(Error::Infeasible(_))));
}

#[test]
fn redundant_rows_reduce_rank() {
    let s = system(
        &[
            (0, 0, 1.0),
            (0, 1, -1.0),
            (1, 1, 1.0),
            (1, 2, -1.0),
            (2, 0, 1.0),
            (2, 2, -1.0),
        ],
        vec![0.0; 3],
        vec![0.0; 3],
        vec![1.0; 3],
    );
    let c = chart(&s).unwrap();
    assert_eq!(c.rank, 2);
    assert_eq!(c.reduced_dim(), 1);
}

#[test]
fn chord_by_hand() {
    let s = system(&[(0, 0, 1.0), (0, 1, -1.0)], vec![0.0], vec![0.0; 2], vec![1.0; 2]);
    let c = chart(&s).unwrap();
    let d = [0.5f64.sqrt(); 2];
    let (lo, hi) = c.chord(&[0.5, 0.5], &d);
    assert!((lo + 0.5f64.sqrt()).abs() < 1e-15 && (hi - 0.5f64.sqrt()).abs() < 1e-15);
    let (lo, hi) = c.chord(&[0.0, 0.0], &d);
    assert_eq!(lo, 0.0);
    assert!((hi - 2f64.sqrt()).abs() < 1e-15);
}

#[test]
fn single_draw_is_feasible() {
    let s = triangle();
    let c = chart(&s).unwrap();
    let set = sample(&c, names(3), 1, 1, 9).unwrap();
    assert_eq!(set.n_samples(), 1);
    assert!(s.is_feasible(&set.rows[0], 1e-8, 1e-12));
}

#[test]
fn every_draw_is_feasible() {
    let s = system(
        &[
            (0, 0, 1.0),
            (0, 1, 1.0),
            (0, 2, -1.0),
            (1, 1, 1.0),
            (1, 3, 1.0),
            (1, 4, -1.0),
        ],
        vec![0.3, 0.2],
        vec![0.0, 0.0, 0.0, -1.0, 0.0],
        vec![1.0, 1.0, 2.0, 1.0, 2.0],
    );
    let c = chart(&s).unwrap();
    let set = sample(&c, names(5), 2000, 3, 1).unwrap();
    for r in &set.rows {
        assert!(s.is_feasible(r, 1e-8, 1e-12));
    }
}

#[test]
fn triangle_marginal_matches_closed_form() {
    let c = chart(&triangle()).unwrap();
    let set = sample(&c, names(3), 10_000, 1, 5).unwrap();
    let edges = uniform_edges(0.0, 1.0, 5);
    let h = histogram(&set.column(0), &edges);
    // P(a < x0 < b) for density 2(1 - x) is (1 - a)^2 - (1 - b)^2.
    let exact: Vec<f64> = edges
        .windows(2)
        .map(|w| (1.0 - w[0]).powi(2) - (1.0 - w[1]).powi(2))
        .collect();
    let l1 = l1_distance(&h.mass, &exact);
    assert!(l1 < 0.05, "L1 {l1}");
}

#[test]
fn long_run_mean_within_three_standard_errors() {
    let s = system(&[(0, 0, 1.0), (0, 1, -1.0)], vec![0.0], vec![0.0; 2], vec![1.0; 2]);
    let c = chart(&s).unwrap();
    let set = sample(&c, names(2), 40_000, 1, 11).unwrap();
    let xs = set.column(0);
    // Batch means absorb the chain's autocorrelation.
    let batch = 400;
    let means: Vec<f64> = xs
        .chunks(batch)
        .map(|b| b.iter().sum::<f64>() / b.len() as f64)
        .collect();
    let m = means.iter().sum::<f64>() / means.len() as f64;
    let var = means.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (means.len() - 1) as f64;
    let se = (var / means.len() as f64).sqrt();
    assert!((m - 0.5).abs() < 3.0 * se, "{m} ± {se}");
    assert!((set.mean(1) - m).abs() < 1e-12);
}

#[test]
fn transitions_are_balanced() {
    let c = chart(&triangle()).unwrap();
    let mut rng = stream_rng(17, Stream::Mcmc);
    let mut x = c.point.clone();
    let (mut up, mut down) = (0.0f64, 0.0f64);
    for _ in 0..50_000 {
        let y = har_step(&c, &x, &mut rng).unwrap();
        let (bx, by) = (x[0] < 0.25, y[0] < 0.25);
        if bx && !by {
            up += 1.0;
        } else if !bx && by {
            down += 1.0;
        }
        x = y;
    }
    let chi2 = (up - down).powi(2) / (up + down);
    assert!(chi2 < 6.63, "{up} vs {down}");
}

#[test]
fn different_seeds_agree() {
    let c = chart(&triangle()).unwrap();
    let edges = uniform_edges(0.0, 1.0, 4);
    let a = histogram(&sample(&c, names(3), 20_000, 2, 1).unwrap().column(1), &edges);
    let b = histogram(&sample(&c, names(3), 20_000, 2, 2).unwrap().column(1), &edges);
    for (p, q) in a.mass.iter().zip(&b.mass) {
        // Independent-draw sigma inflated for autocorrelation.
        let sigma = (p * (1.0 - p) / 20_000.0).sqrt() * 4.0;
        assert!((p - q).abs() < 3.0 * sigma * 2f64.sqrt(), "{p} vs {q}");
    }
}

#[test]
fn csv_export_has_header_and_rows() {
    let c = chart(&triangle()).unwrap();
    let set = sample(&c, names(3), 3, 1, 0).unwrap();
    let mut buf = Vec::new();
    set.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(text.starts_with("x0,x1,x2\n"));
}

#[test]
fn start_is_interior_on_large_instance() {
    // Alternating projections stall on the boundary here; chords from there are empty.
    let spec = crate::ensembles::EnsembleSpec::er(400, 100, 4.0, 20_240_611);
    let s = crate::ensembles::generate(&spec).unwrap();
    let c = chart(&s).unwrap();
    assert!(c.margin > 1e-3, "margin {}", c.margin);
    let mut rng = stream_rng(1, Stream::Mcmc);
    let mut x = c.point.clone();
    for _ in 0..200 {
        x = har_step(&c, &x, &mut rng).unwrap();
    }
    assert!(s.is_feasible(&x, 1e-8, 1e-12));
}
