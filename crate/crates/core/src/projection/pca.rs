//! Principal component projection via a cyclic Jacobi eigensolver, sized
//! for label-embedding tables (a few dozen rows, d_lab columns).

use super::LabeledPoints;
use crate::tensor::TensorData;

/// Eigendecomposition of a symmetric matrix: (values, vectors), sorted by
/// descending eigenvalue, vectors unit-length rows of the result.
pub(crate) fn jacobi_eigen(mat: &[f64], d: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    assert_eq!(mat.len(), d * d);
    let mut a = mat.to_vec();
    let mut v = vec![0.0; d * d];
    for i in 0..d {
        v[i * d + i] = 1.0;
    }
    let scale: f64 = mat.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
    for _sweep in 0..100 {
        let off: f64 = (0..d)
            .flat_map(|p| (p + 1..d).map(move |q| (p, q)))
            .map(|(p, q)| a[p * d + q] * a[p * d + q])
            .sum();
        if off.sqrt() <= 1e-14 * scale {
            break;
        }
        for p in 0..d {
            for q in p + 1..d {
                let apq = a[p * d + q];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let tau = (a[q * d + q] - a[p * d + p]) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..d {
                    let akp = a[k * d + p];
                    let akq = a[k * d + q];
                    a[k * d + p] = c * akp - s * akq;
                    a[k * d + q] = s * akp + c * akq;
                }
                for k in 0..d {
                    let apk = a[p * d + k];
                    let aqk = a[q * d + k];
                    a[p * d + k] = c * apk - s * aqk;
                    a[q * d + k] = s * apk + c * aqk;
                }
                for k in 0..d {
                    let vkp = v[k * d + p];
                    let vkq = v[k * d + q];
                    v[k * d + p] = c * vkp - s * vkq;
                    v[k * d + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| a[j * d + j].partial_cmp(&a[i * d + i]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| a[i * d + i]).collect();
    let vectors: Vec<Vec<f64>> =
        order.iter().map(|&col| (0..d).map(|k| v[k * d + col]).collect()).collect();
    (values, vectors)
}

fn fix_sign(vector: &mut [f64]) {
    let mut best = 0;
    for (i, x) in vector.iter().enumerate() {
        if x.abs() > vector[best].abs() {
            best = i;
        }
    }
    if vector[best] < 0.0 {
        for x in vector.iter_mut() {
            *x = -*x;
        }
    }
}

/// Center the points and project them onto the top two principal
/// directions. Each component's sign is fixed so its largest-magnitude
/// coordinate is positive, making the output order-independent.
pub fn pca_2d(points: &LabeledPoints) -> LabeledPoints {
    let (n, d) = (points.len(), points.dim());
    assert!(n >= 2, "need at least 2 points to project, got {n}");
    assert!(d >= 2, "need at least 2 input dimensions, got {d}");

    let x = points.coords().data();
    let mut mean = vec![0.0; d];
    for row in 0..n {
        for j in 0..d {
            mean[j] += x[row * d + j];
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut cov = vec![0.0; d * d];
    for row in 0..n {
        for i in 0..d {
            let xi = x[row * d + i] - mean[i];
            for j in i..d {
                cov[i * d + j] += xi * (x[row * d + j] - mean[j]);
            }
        }
    }
    let denom = (n - 1) as f64;
    for i in 0..d {
        for j in i..d {
            cov[i * d + j] /= denom;
            cov[j * d + i] = cov[i * d + j];
        }
    }

    let (_, mut vectors) = jacobi_eigen(&cov, d);
    vectors.truncate(2);
    for vec in &mut vectors {
        fix_sign(vec);
    }

    let mut out = TensorData::zeros(vec![n, 2]);
    for row in 0..n {
        for (k, vec) in vectors.iter().enumerate() {
            let mut dot = 0.0;
            for j in 0..d {
                dot += (x[row * d + j] - mean[j]) * vec[j];
            }
            out.data_mut()[row * 2 + k] = dot;
        }
    }
    LabeledPoints::new(points.labels().to_vec(), out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn points_from(rows: &[Vec<f64>]) -> LabeledPoints {
        let labels = (0..rows.len()).map(|i| format!("label{i}")).collect();
        LabeledPoints::new(labels, TensorData::from_rows(rows))
    }

    fn random_points(n: usize, d: usize, seed: u64) -> LabeledPoints {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> =
            (0..n).map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        points_from(&rows)
    }

    /// Independent oracle: power iteration finds the dominant eigenpair.
    fn power_iteration(mat: &[f64], d: usize) -> (f64, Vec<f64>) {
        let mut v = vec![1.0; d];
        for _ in 0..20_000 {
            let mut next = vec![0.0; d];
            for i in 0..d {
                for j in 0..d {
                    next[i] += mat[i * d + j] * v[j];
                }
            }
            let norm = next.iter().map(|x| x * x).sum::<f64>().sqrt();
            for x in &mut next {
                *x /= norm;
            }
            v = next;
        }
        let mut av = vec![0.0; d];
        for i in 0..d {
            for j in 0..d {
                av[i] += mat[i * d + j] * v[j];
            }
        }
        let lambda = v.iter().zip(&av).map(|(a, b)| a * b).sum();
        (lambda, v)
    }

    #[test]
    fn jacobi_matches_power_iteration_oracle() {
        let d = 6;
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let mut m = vec![0.0; d * d];
        for i in 0..d {
            for j in i..d {
                let x = rng.random_range(-1.0..1.0);
                m[i * d + j] = x;
                m[j * d + i] = x;
            }
        }
        // Shift to make it positive definite so the dominant eigenvalue is
        // the largest one.
        for i in 0..d {
            m[i * d + i] += 4.0;
        }
        let (values, vectors) = jacobi_eigen(&m, d);
        let (top, top_vec) = power_iteration(&m, d);
        assert!((values[0] - top).abs() < 1e-9, "jacobi {} vs power {top}", values[0]);
        let dot: f64 = vectors[0].iter().zip(&top_vec).map(|(a, b)| a * b).sum();
        assert!((dot.abs() - 1.0).abs() < 1e-8, "eigenvectors should align, |dot|={}", dot.abs());
        for w in values.windows(2) {
            assert!(w[0] >= w[1] - 1e-12, "eigenvalues must come sorted");
        }
    }

    #[test]
    fn full_rank_2d_input_is_an_isometry() {
        let pts = random_points(12, 2, 7);
        // Both components are kept, so the map is a rotation/reflection of
        // the centered input and pairwise distances survive.
        let out = pca_2d(&pts);
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                let din = super::super::euclidean(pts.row(i), pts.row(j));
                let dout = super::super::euclidean(out.row(i), out.row(j));
                assert!((din - dout).abs() < 1e-9, "distance {i},{j}: {din} vs {dout}");
            }
        }
    }

    #[test]
    fn collinear_points_have_zero_second_component() {
        let pts = points_from(&[
            vec![0.0, 0.0, 0.0],
            vec![1.0, 2.0, -1.0],
            vec![2.0, 4.0, -2.0],
            vec![3.0, 6.0, -3.0],
        ]);
        let out = pca_2d(&pts);
        let var2: f64 = (0..out.len()).map(|i| out.row(i)[1] * out.row(i)[1]).sum();
        assert!(var2 < 1e-18, "second component variance should vanish, got {var2}");
    }

    #[test]
    fn reconstruction_error_is_sum_of_trailing_eigenvalues() {
        let pts = random_points(15, 5, 13);
        let (n, d) = (pts.len(), pts.dim());
        let x = pts.coords().data();
        let mut mean = vec![0.0; d];
        for row in 0..n {
            for j in 0..d {
                mean[j] += x[row * d + j] / n as f64;
            }
        }
        let mut cov = vec![0.0; d * d];
        for row in 0..n {
            for i in 0..d {
                for j in 0..d {
                    cov[i * d + j] +=
                        (x[row * d + i] - mean[i]) * (x[row * d + j] - mean[j]) / (n - 1) as f64;
                }
            }
        }
        let (values, _) = jacobi_eigen(&cov, d);
        let trailing: f64 = values[2..].iter().sum();

        let out = pca_2d(&pts);
        // Residual variance: total centered variance minus what the two
        // kept components carry.
        let total: f64 = (0..n)
            .map(|row| {
                (0..d).map(|j| (x[row * d + j] - mean[j]).powi(2)).sum::<f64>()
            })
            .sum::<f64>()
            / (n - 1) as f64;
        let kept: f64 = (0..n)
            .map(|row| out.row(row).iter().map(|v| v * v).sum::<f64>())
            .sum::<f64>()
            / (n - 1) as f64;
        assert!(
            ((total - kept) - trailing).abs() < 1e-9,
            "residual {} vs trailing eigenvalue sum {}",
            total - kept,
            trailing
        );
    }

    #[test]
    fn order_invariant_up_to_label_pairing() {
        let pts = random_points(9, 4, 29);
        let out = pca_2d(&pts);

        let perm: Vec<usize> = vec![4, 1, 7, 0, 8, 2, 6, 5, 3];
        let rows: Vec<Vec<f64>> = perm.iter().map(|&i| pts.row(i).to_vec()).collect();
        let labels: Vec<String> = perm.iter().map(|&i| pts.labels()[i].clone()).collect();
        let permuted = LabeledPoints::new(labels, TensorData::from_rows(&rows));
        let out_p = pca_2d(&permuted);

        for (k, &i) in perm.iter().enumerate() {
            let a = out.row(i);
            let b = out_p.row(k);
            assert!(
                (a[0] - b[0]).abs() < 1e-9 && (a[1] - b[1]).abs() < 1e-9,
                "label {} moved: {a:?} vs {b:?}",
                pts.labels()[i]
            );
        }
    }
}
