use std::f64::consts::PI;

use proptest::collection::vec;
use proptest::prelude::*;
use ratbary::aaa::{residual_argmax, sv_aaa, AaaConfig};
use ratbary::io::{HistoryRow, MatrixFile, Method, ModelFile, ModelMetadata};
use ratbary::linalg::{norm_p_inf, rrqr, singular_values, CMatrix, PNorm, C64};
use ratbary::pqr::{extension_count, m_plus, zeta, PartitionPlan};
use ratbary::qr_aaa::{ColumnScaling, TolMode};
use ratbary::{evaluate, evaluate_grid, Axis, BarycentricModel, SampleGrid};

fn c64() -> impl Strategy<Value = C64> {
    (-1e3f64..1e3, -1e3f64..1e3).prop_map(|(a, b)| C64::new(a, b))
}

fn matrix(rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> impl Strategy<Value = CMatrix> {
    (rows, cols).prop_flat_map(|(r, c)| vec(c64(), r * c).prop_map(move |d| CMatrix::from_col_major(r, c, d).unwrap()))
}

/// Sums of simple poles sampled on `[-1, 1]`; the poles stay off the segment.
fn rational_data() -> impl Strategy<Value = (SampleGrid, CMatrix)> {
    let pole = (-2.0f64..2.0, 0.05f64..1.0, any::<bool>()).prop_map(|(a, b, up)| C64::new(a, if up { b } else { -b }));
    (vec(pole, 1..5), 1usize..4, 30usize..80, vec(c64(), 16)).prop_map(|(poles, ncols, n, res)| {
        let grid = SampleGrid::segment(-1.0, 1.0, n, Axis::Real).unwrap();
        let f = CMatrix::from_fn(n, ncols, |i, j| {
            let z = grid.points()[i];
            poles
                .iter()
                .enumerate()
                .map(|(k, p)| res[(k + 4 * j) % 16] / (z - p))
                .sum()
        });
        (grid, f)
    })
}

fn fit(grid: &SampleGrid, f: &CMatrix) -> BarycentricModel {
    let mut cfg = AaaConfig::with_tol(1e-9);
    cfg.max_degree = 20;
    sv_aaa(f, grid, &cfg).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn matrix_file_bytes_round_trip(f in matrix(2..20, 1..6), imag in any::<bool>(), labelled in any::<bool>()) {
        let axis = if imag { Axis::Imag } else { Axis::Real };
        let grid = SampleGrid::segment(-3.0, 5.0, f.rows(), axis).unwrap();
        let mut file = MatrixFile::new(grid, f).unwrap();
        if labelled {
            file.labels = Some((0..file.matrix.cols()).map(|j| format!("col {j} ü")).collect());
        }
        let bytes = file.to_bytes();
        let back = MatrixFile::from_bytes(&bytes).unwrap();
        prop_assert_eq!(back.to_bytes(), bytes);
        prop_assert_eq!(&back.matrix, &file.matrix);
        prop_assert_eq!(back.grid.points(), file.grid.points());
        prop_assert_eq!(back.labels, file.labels);
    }

    #[test]
    fn fitted_models_interpolate_and_round_trip((grid, f) in rational_data()) {
        let model = fit(&grid, &f);

        let wn: f64 = model.weights.iter().map(|w| w.norm_sqr()).sum::<f64>().sqrt();
        prop_assert!((wn - 1.0).abs() <= 1e-12);

        let mut idx = model.support_indices.clone();
        idx.sort_unstable();
        idx.dedup();
        prop_assert_eq!(idx.len(), model.m());

        let on_grid = evaluate_grid(&model, &grid).unwrap();
        for (k, &i) in model.support_indices.iter().enumerate() {
            prop_assert_eq!(model.supports[k], grid.points()[i]);
            prop_assert_eq!(model.snapshots.row(k), f.row(i));
            prop_assert_eq!(evaluate(&model, model.supports[k]).unwrap(), f.row(i));
            prop_assert_eq!(on_grid.row(i), f.row(i));
        }

        let meta = ModelMetadata {
            method: Method::Sv,
            tol: 1e-9,
            tol_mode: TolMode::Practical,
            p_norm: PNorm::Inf,
            seed: 0,
            partitions: 1,
            rank: None,
            merge: None,
            extension: None,
            history: HistoryRow::from_entries(&model.history, "sv"),
            communication: None,
            diagnostics: None,
        };
        let file = ModelFile::new(&model, ColumnScaling::of(&f), meta).unwrap();
        let bytes = file.to_bytes().unwrap();
        let back = ModelFile::from_bytes(&bytes).unwrap();
        prop_assert_eq!(back.to_bytes().unwrap(), bytes);
        let m2 = back.model().unwrap();
        prop_assert_eq!(&m2.weights, &model.weights);
        prop_assert_eq!(&m2.snapshots, &model.snapshots);
    }

    #[test]
    fn norm_sandwich(x in matrix(1..30, 1..8)) {
        let r = norm_p_inf(&x, PNorm::Two).unwrap();
        let s2 = singular_values(&x)[0];
        let fro = x.norm_fro();
        let rt = (x.rows() as f64).sqrt();
        let slack = 1.0 + 1e-12;
        prop_assert!(r <= s2 * slack);
        prop_assert!(s2 <= rt * r * slack);
        prop_assert!(r <= fro * slack);
        prop_assert!(fro <= rt * r * slack);
        prop_assert!(norm_p_inf(&x, PNorm::Inf).unwrap() <= r * slack);
    }

    #[test]
    fn rrqr_structure(f in matrix(4..25, 1..10), tol_exp in -12i32..-2) {
        let tol = 10f64.powi(tol_exp) * f.norm_fro();
        prop_assume!(tol > 0.0);
        let qr = rrqr(&f, tol).unwrap();
        let k = qr.rank;
        prop_assert!(k <= f.rows().min(f.cols()));
        let mut perm = qr.perm.clone();
        perm.sort_unstable();
        prop_assert_eq!(perm, (0..f.cols()).collect::<Vec<_>>());
        if k == 0 {
            return Ok(());
        }
        let d = qr.diag_abs();
        prop_assert!(d.windows(2).all(|w| w[0] >= w[1] * (1.0 - 1e-12)));
        for i in 0..k {
            for j in i..f.cols() {
                prop_assert!(qr.r[(i, j)].norm() <= d[i] * (1.0 + 1e-12));
            }
        }
        let qhq = qr.q.adjoint().matmul(&qr.q).unwrap();
        let dev = qhq.sub(&CMatrix::identity(k)).unwrap().max_abs();
        prop_assert!(dev <= 1e-12 * (k as f64).sqrt(), "orthogonality {dev}");

        // every column is reproduced up to the truncation threshold
        let rec = qr.q.matmul(&qr.r_unpermuted()).unwrap();
        let diff = f.sub(&rec).unwrap();
        for j in 0..f.cols() {
            let e: f64 = diff.col(j).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            prop_assert!(e <= tol * (1.0 + 1e-6) + 1e-13 * f.norm_fro(), "column {j}: {e} vs {tol}");
        }
    }

    #[test]
    fn zeta_is_at_least_the_even_gap(mut x in vec(-1.0f64..1.0, 0..40), ends in any::<bool>()) {
        if ends {
            x.push(-1.0);
            x.push(1.0);
        }
        prop_assume!(!x.is_empty());
        x.sort_by(f64::total_cmp);
        let z = zeta(&x).unwrap();
        let n = x.len() as f64;
        prop_assert!(z <= PI);
        prop_assert!(z >= PI / (n + 1.0) * (1.0 - 1e-12));
        if ends && x.len() > 1 {
            prop_assert!(z >= PI / (n - 1.0) * (1.0 - 1e-12));
        }
    }

    #[test]
    fn extension_sizes(u in 1usize..500) {
        let mp = m_plus(u);
        prop_assert_eq!(mp, 2 * u - 2);
        let big = extension_count(mp);
        prop_assert!(big as f64 >= 3.0 * PI * mp as f64);
        prop_assert!((big as f64) < 3.0 * PI * mp as f64 + 1.0);
    }

    #[test]
    fn contiguous_plans_cover_every_column_once(ncols in 1usize..300, p in 1usize..40) {
        prop_assume!(p <= ncols);
        let plan = PartitionPlan::contiguous(ncols, p, 0).unwrap();
        let mut seen = vec![0usize; ncols];
        let mut sizes = Vec::new();
        let mut next = 0;
        for mu in 0..p {
            let cols = plan.columns(mu);
            prop_assert!(!cols.is_empty());
            prop_assert_eq!(cols[0], next);
            prop_assert!(cols.windows(2).all(|w| w[1] == w[0] + 1));
            next = cols[cols.len() - 1] + 1;
            cols.iter().for_each(|&j| seen[j] += 1);
            sizes.push(cols.len());
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }

    #[test]
    fn argmax_ignores_column_scaling((grid, f) in rational_data(), shifts in vec(-20i32..20, 3), p2 in any::<bool>()) {
        let mut cfg = AaaConfig::with_tol(1e-9);
        cfg.max_degree = 3;
        cfg.p_norm = if p2 { PNorm::Two } else { PNorm::Inf };
        let model = sv_aaa(&f, &grid, &cfg).unwrap();
        let excluded = model.support_indices.clone();

        // powers of two keep every product exact
        let c: Vec<f64> = (0..f.cols()).map(|j| 2f64.powi(shifts[j])).collect();
        let mut g = f.clone();
        g.scale_cols(&c);
        let mut scaled = model.clone();
        scaled.snapshots.scale_cols(&c);
        let mut cfg_g = cfg.clone();
        cfg_g.column_weights = Some(c.iter().map(|x| 1.0 / x).collect());

        let (i, r) = residual_argmax(&f, &model, &grid, &cfg, &excluded).unwrap();
        let (ig, rg) = residual_argmax(&g, &scaled, &grid, &cfg_g, &excluded).unwrap();
        prop_assert_eq!(i, ig);
        prop_assert_eq!(r, rg);
    }
}

#[test]
fn zero_and_nonfinite_inputs_are_rejected() {
    let grid = SampleGrid::segment(-1.0, 1.0, 5, Axis::Real).unwrap();
    let mut f = CMatrix::zeros(5, 2);
    f[(3, 1)] = C64::new(f64::NAN, 0.0);
    assert!(sv_aaa(&f, &grid, &AaaConfig::default()).is_err());
    assert!(rrqr(&f, 1e-8).is_err());
    assert!(MatrixFile::from_bytes(b"SVAA").is_err());
}
