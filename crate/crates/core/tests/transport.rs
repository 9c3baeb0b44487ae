use mldmae_core::discrepancy::{
    optimal_plan, sliced_w1, uniform_plan, w1_1d, w1_discrete_exact, w1_uniform, GroundMetric, W1Options,
};
use mldmae_core::rng::Rng;
use mldmae_core::{Error, Matrix};
use proptest::prelude::*;

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

fn brute_force(x: &Matrix, y: &Matrix) -> f64 {
    let n = x.rows();
    permutations(n)
        .iter()
        .map(|p| p.iter().enumerate().map(|(i, &j)| dist(x.row(i), y.row(j))).sum::<f64>() / n as f64)
        .fold(f64::INFINITY, f64::min)
}

fn random_set(rng: &mut Rng, n: usize, d: usize) -> Matrix {
    Matrix::new(n, d, rng.normal_vec(n * d)).unwrap()
}

#[test]
fn shifted_pair_example() {
    let x = Matrix::column(&[0.0, 1.0]);
    let y = Matrix::column(&[0.5, 1.5]);
    assert!((w1_uniform(&x, &y, &W1Options::default()).unwrap() - 0.5).abs() < 1e-15);
}

#[test]
fn matches_permutation_brute_force() {
    let mut rng = Rng::new(2024);
    for trial in 0..200 {
        let n = 1 + trial % 6;
        let d = 1 + trial % 3;
        let x = random_set(&mut rng, n, d);
        let y = random_set(&mut rng, n, d);
        let exact = w1_uniform(&x, &y, &W1Options::default()).unwrap();
        let brute = brute_force(&x, &y);
        assert!((exact - brute).abs() <= 1e-10, "trial {trial}: {exact} vs {brute}");
    }
}

#[test]
fn matches_closed_form_in_one_dimension() {
    let mut rng = Rng::new(77);
    for trial in 0..200 {
        let n = 1 + trial % 40;
        let m = if trial % 2 == 0 { n } else { 1 + (trial * 7) % 33 };
        let x = rng.normal_vec(n);
        let y: Vec<f64> = rng.normal_vec(m).iter().map(|v| 0.5 + 2.0 * v).collect();
        let exact = w1_uniform(&Matrix::column(&x), &Matrix::column(&y), &W1Options::default()).unwrap();
        let closed = w1_1d(&x, &y).unwrap();
        assert!((exact - closed).abs() <= 1e-10, "trial {trial} ({n} vs {m}): {exact} vs {closed}");
    }
}

#[test]
fn frozen_weighted_instance() {
    // Optimal values from an independent LP solver (HiGHS).
    let x = Matrix::from_rows(&[
        [0.001, 0.299],
        [-0.274, -0.891],
        [-0.455, -0.992],
        [0.06, 1.34],
        [-0.492, -0.62],
        [0.49, 0.357],
        [0.105, -0.93],
    ])
    .unwrap();
    let y = Matrix::from_rows(&[
        [0.471, 1.195],
        [-0.844, 0.042],
        [-1.401, -0.79],
        [-1.342, 0.265],
        [-0.767, 0.771],
        [0.657, 0.313],
        [-2.017, -0.039],
        [0.451, 0.613],
        [-1.03, 0.022],
    ])
    .unwrap();
    let wx: Vec<f64> = [1.0, 2.0, 3.0, 1.0, 2.0, 1.0, 2.0].iter().map(|v| v / 12.0).collect();
    let wy: Vec<f64> = [1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 4.0].iter().map(|v| v / 12.0).collect();
    let l2 = w1_discrete_exact(&x, &wx, &y, &wy, &W1Options::default()).unwrap();
    assert!((l2 - 1.058_021_653_508_354_9).abs() < 1e-8, "{l2}");
    let l1_opts = W1Options {
        metric: GroundMetric::L1,
        ..W1Options::default()
    };
    let l1 = w1_discrete_exact(&x, &wx, &y, &wy, &l1_opts).unwrap();
    assert!((l1 - 1.442_666_666_666_666_8).abs() < 1e-8, "{l1}");
}

#[test]
fn frozen_assignment_instance() {
    // Optimal assignment cost from the Hungarian algorithm.
    let a = Matrix::from_rows(&[
        [-1.23, 0.768, -1.198],
        [-0.522, -1.985, 1.32],
        [-1.382, -0.93, 1.521],
        [0.039, 1.389, 0.559],
        [0.967, -1.634, 0.165],
        [0.031, 1.485, -0.555],
        [0.393, -1.763, -0.449],
        [-0.708, -1.399, 1.265],
    ])
    .unwrap();
    let b = Matrix::from_rows(&[
        [-0.482, 1.915, 0.36],
        [0.42, 0.552, 0.706],
        [-1.397, -0.239, -1.042],
        [-0.39, -1.613, 1.871],
        [-1.14, 0.687, -0.798],
        [1.496, 0.649, -1.474],
        [1.38, 1.78, 1.616],
        [0.279, -1.418, -1.23],
    ])
    .unwrap();
    let v = w1_uniform(&a, &b, &W1Options::default()).unwrap();
    assert!((v - 1.584_841_654_133_781_3).abs() < 1e-12, "{v}");
}

/// Primal feasibility, dual feasibility and a zero duality gap.
fn assert_certificate(x: &Matrix, wx: &[f64], y: &Matrix, wy: &[f64], metric: GroundMetric) {
    let opts = W1Options {
        metric,
        ..W1Options::default()
    };
    let plan = optimal_plan(x, wx, y, wy, &opts).unwrap();
    let (n, m) = (x.rows(), y.rows());
    let mut rows = vec![0.0; n];
    let mut cols = vec![0.0; m];
    for &(i, j, f) in &plan.entries {
        assert!(f > 0.0);
        rows[i] += f;
        cols[j] += f;
    }
    for (r, w) in rows.iter().zip(wx) {
        assert!((r - w).abs() < 1e-9);
    }
    for (c, w) in cols.iter().zip(wy) {
        assert!((c - w).abs() < 1e-9);
    }
    let (u, v) = plan.potentials.split_at(n);
    let mut scale = 1.0f64;
    for i in 0..n {
        for j in 0..m {
            let c = metric.distance(x.row(i), y.row(j));
            scale = scale.max(c);
            assert!(v[j] - u[i] <= c + 1e-9, "dual violation at ({i}, {j})");
        }
    }
    let dual: f64 = v.iter().zip(wy).map(|(a, b)| a * b).sum::<f64>() - u.iter().zip(wx).map(|(a, b)| a * b).sum::<f64>();
    assert!((dual - plan.cost).abs() < 1e-9 * scale, "gap {} vs {}", plan.cost, dual);
}

#[test]
fn duality_certificates_on_random_weighted_instances() {
    let mut rng = Rng::new(9);
    for trial in 0..30 {
        let n = 5 + (trial * 13) % 60;
        let m = 3 + (trial * 29) % 70;
        let x = random_set(&mut rng, n, 2);
        let y = random_set(&mut rng, m, 2);
        let mut wx: Vec<f64> = (0..n).map(|_| rng.uniform() + 0.01).collect();
        let mut wy: Vec<f64> = (0..m).map(|_| rng.uniform() + 0.01).collect();
        let sx: f64 = wx.iter().sum();
        let sy: f64 = wy.iter().sum();
        wx.iter_mut().for_each(|w| *w /= sx);
        wy.iter_mut().for_each(|w| *w /= sy);
        let metric = if trial % 2 == 0 { GroundMetric::L2 } else { GroundMetric::L1 };
        assert_certificate(&x, &wx, &y, &wy, metric);
    }
}

#[test]
fn large_uniform_instance_is_optimal() {
    let mut rng = Rng::new(31);
    let x = random_set(&mut rng, 600, 3);
    let y = random_set(&mut rng, 450, 3);
    let plan = uniform_plan(&x, &y, &W1Options::default()).unwrap();
    let wx = vec![1.0 / 600.0; 600];
    let wy = vec![1.0 / 450.0; 450];
    let weighted = w1_discrete_exact(&x, &wx, &y, &wy, &W1Options::default()).unwrap();
    assert!((plan.cost - weighted).abs() < 1e-9);
    assert_certificate(&x, &wx, &y, &wy, GroundMetric::L2);
}

#[test]
fn degenerate_coincident_supports() {
    let x = Matrix::from_rows(&[[0.0, 0.0], [0.0, 0.0], [1.0, 1.0], [1.0, 1.0]]).unwrap();
    assert_eq!(w1_uniform(&x, &x, &W1Options::default()).unwrap(), 0.0);
    let y = Matrix::from_rows(&[[0.0, 0.0], [1.0, 1.0]]).unwrap();
    assert!(w1_uniform(&x, &y, &W1Options::default()).unwrap().abs() < 1e-15);
}

#[test]
fn cap_error_suggests_subsampling() {
    let x = Matrix::zeros(10, 1);
    let err = w1_uniform(
        &x,
        &x,
        &W1Options {
            support_cap: 5,
            ..W1Options::default()
        },
    )
    .unwrap_err();
    assert!(matches!(err, Error::SupportTooLarge { size: 10, cap: 5 }));
    assert!(err.to_string().contains("subsample"));
}

#[test]
fn sliced_w1_of_a_shift() {
    // For a shift c e_1, every projection is a shift by c |theta_1|.
    let mut rng = Rng::new(5);
    let d = 3;
    let x = random_set(&mut rng, 400, d);
    let c = 2.0;
    let mut y = x.clone();
    for i in 0..y.rows() {
        y.row_mut(i)[0] += c;
    }
    let sw = sliced_w1(&x, &y, 500, 17).unwrap();
    let mut mc = 0.0;
    let mut orng = Rng::new(1);
    for _ in 0..200_000 {
        let v = orng.normal_vec(d);
        mc += v[0].abs() / v.iter().map(|a| a * a).sum::<f64>().sqrt();
    }
    let expected = c * mc / 200_000.0;
    assert!((sw - expected).abs() < 0.05 * expected, "{sw} vs {expected}");
}

#[test]
fn sliced_w1_in_one_dimension_is_w1() {
    let mut rng = Rng::new(3);
    let x = rng.normal_vec(50);
    let y = rng.normal_vec(70);
    let sw = sliced_w1(&Matrix::column(&x), &Matrix::column(&y), 7, 0).unwrap();
    assert!((sw - w1_1d(&x, &y).unwrap()).abs() < 1e-12);
}

fn set_strategy(max: usize, d: usize) -> impl Strategy<Value = Matrix> {
    (1..=max).prop_flat_map(move |n| {
        prop::collection::vec(-3.0f64..3.0, n * d).prop_map(move |v| Matrix::new(n, d, v).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn w1_is_symmetric(x in set_strategy(12, 2), y in set_strategy(12, 2)) {
        let o = W1Options::default();
        prop_assert_eq!(w1_uniform(&x, &y, &o).unwrap(), w1_uniform(&y, &x, &o).unwrap());
    }

    #[test]
    fn w1_triangle(x in set_strategy(8, 2), y in set_strategy(8, 2), z in set_strategy(8, 2)) {
        let o = W1Options::default();
        let xz = w1_uniform(&x, &z, &o).unwrap();
        let xy = w1_uniform(&x, &y, &o).unwrap();
        let yz = w1_uniform(&y, &z, &o).unwrap();
        prop_assert!(xz <= xy + yz + 1e-9);
    }

    #[test]
    fn w1_vanishes_on_permuted_copies(x in set_strategy(15, 3), seed in any::<u64>()) {
        let mut idx: Vec<usize> = (0..x.rows()).collect();
        Rng::new(seed).shuffle(&mut idx);
        let y = x.select_rows(&idx);
        prop_assert!(w1_uniform(&x, &y, &W1Options::default()).unwrap().abs() < 1e-12);
    }
}
