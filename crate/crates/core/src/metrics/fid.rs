use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::corpus_io::EmbeddedCorpus;
use crate::error::{Error, Result};

use super::{check_same_dim, MetricId};

/// Eigenvalues below this fraction of the largest one are treated as zero.
const EIGEN_CLAMP: f64 = 1e-10;

/// Sample mean and covariance (denominator `N - 1`) of an embedding matrix.
#[derive(Debug, Clone)]
pub struct GaussianMoments {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

impl GaussianMoments {
    pub fn from_embeddings(ec: &EmbeddedCorpus) -> Result<Self> {
        let n = ec.rows();
        if n < 2 {
            return Err(Error::metric("FID", format!("need at least 2 rows, got {n}")));
        }
        let d = ec.dim();
        let x = DMatrix::from_row_slice(n, d, ec.as_slice());
        let mean = DVector::from_iterator(d, x.column_iter().map(|c| c.mean()));
        let mut centered = x;
        for mut row in centered.row_iter_mut() {
            row -= mean.transpose();
        }
        let mut covariance = centered.transpose() * &centered / (n as f64 - 1.0);
        symmetrize(&mut covariance);
        Ok(GaussianMoments { mean, covariance })
    }
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let t = m.transpose();
    *m += t;
    *m *= 0.5;
}

fn clamped_eigenvalues(m: DMatrix<f64>) -> SymmetricEigen<f64, nalgebra::Dyn> {
    let mut eig = SymmetricEigen::new(m);
    let largest = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let floor = EIGEN_CLAMP * largest;
    for v in eig.eigenvalues.iter_mut() {
        if *v < floor {
            *v = 0.0;
        }
    }
    eig
}

fn sym_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = clamped_eigenvalues(m.clone());
    let roots = eig.eigenvalues.map(f64::sqrt);
    let mut out = &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose();
    symmetrize(&mut out);
    out
}

/// `Tr((A B)^{1/2})` for symmetric PSD `A`, `B`, computed as the trace of
/// the square root of the symmetric matrix `A^{1/2} B A^{1/2}`.
pub fn matrix_sqrt_trace(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let ra = sym_sqrt(a);
    let mut m = &ra * b * &ra;
    symmetrize(&mut m);
    clamped_eigenvalues(m).eigenvalues.iter().map(|v| v.sqrt()).sum()
}

/// Squared 2-Wasserstein distance between Gaussians fitted to `p` and `q`.
pub fn fid(p: &EmbeddedCorpus, q: &EmbeddedCorpus) -> Result<f64> {
    check_same_dim(MetricId::Fid, p, q)?;
    let mp = GaussianMoments::from_embeddings(p)?;
    let mq = GaussianMoments::from_embeddings(q)?;
    let mean_term = (&mp.mean - &mq.mean).norm_squared();
    let cross = matrix_sqrt_trace(&mp.covariance, &mq.covariance);
    let value = mean_term + mp.covariance.trace() + mq.covariance.trace() - 2.0 * cross;
    Ok(value.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Pad 1-D samples with a constant second column so the matrix has
    /// D = 2; the constant column has zero variance and equal means, so it
    /// contributes nothing.
    fn one_d(values: &[f64]) -> EmbeddedCorpus {
        let rows: Vec<Vec<f64>> = values.iter().map(|&v| vec![v, 1.0]).collect();
        EmbeddedCorpus::from_rows("x", &rows).unwrap()
    }

    fn sample_moments(v: &[f64]) -> (f64, f64) {
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        (m, v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
    }

    #[test]
    fn one_d_closed_form() {
        // sample moments (0, 1) and (3, 1)
        let a = [-1.0, 0.0, 1.0];
        let b = [2.0, 3.0, 4.0];
        assert_eq!(sample_moments(&a), (0.0, 1.0));
        assert_eq!(sample_moments(&b), (3.0, 1.0));
        assert!((fid(&one_d(&a), &one_d(&b)).unwrap() - 9.0).abs() < 1e-6);

        // sample moments (0, 1) and (0, 4): (1 - 2)^2 = 1
        let c = [-2.0, 0.0, 2.0];
        assert_eq!(sample_moments(&c), (0.0, 4.0));
        assert!((fid(&one_d(&a), &one_d(&c)).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn one_d_closed_form_on_irregular_data() {
        let a = [0.3, -1.2, 2.5, 0.7, 1.1, -0.4];
        let b = [5.0, 3.2, 4.4, 6.1, 2.9];
        let (ma, va) = sample_moments(&a);
        let (mb, vb) = sample_moments(&b);
        let want = (ma - mb).powi(2) + (va.sqrt() - vb.sqrt()).powi(2);
        assert!((fid(&one_d(&a), &one_d(&b)).unwrap() - want).abs() < 1e-6);
    }

    #[test]
    fn identical_inputs_give_zero() {
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|i| {
                let t = i as f64;
                vec![t.sin(), (2.0 * t).cos(), t * 0.1, (t * 0.7).sin() + 0.2]
            })
            .collect();
        let p = EmbeddedCorpus::from_rows("p", &rows).unwrap();
        assert!(fid(&p, &p.clone()).unwrap() <= 1e-6);
    }

    #[test]
    fn commuting_covariances_match_diagonal_formula() {
        // diagonal covariances: FID = sum over axes of the 1-D formula
        let p = EmbeddedCorpus::from_rows(
            "p",
            &[vec![-1.0, 0.0], vec![1.0, 0.0], vec![0.0, -3.0], vec![0.0, 3.0]],
        )
        .unwrap();
        let q = EmbeddedCorpus::from_rows(
            "q",
            &[vec![-2.0, 2.0], vec![2.0, 2.0], vec![0.0, 1.0], vec![0.0, 3.0]],
        )
        .unwrap();
        let mp = GaussianMoments::from_embeddings(&p).unwrap();
        let mq = GaussianMoments::from_embeddings(&q).unwrap();
        assert!(mp.covariance[(0, 1)].abs() < 1e-12 && mq.covariance[(0, 1)].abs() < 1e-12);
        let want: f64 = (0..2)
            .map(|k| {
                (mp.mean[k] - mq.mean[k]).powi(2)
                    + (mp.covariance[(k, k)].sqrt() - mq.covariance[(k, k)].sqrt()).powi(2)
            })
            .sum();
        assert!((fid(&p, &q).unwrap() - want).abs() < 1e-9);
    }

    #[test]
    fn errors() {
        let p = one_d(&[1.0, 2.0]);
        let single = one_d(&[1.0]);
        assert!(fid(&p, &single).is_err());
        let wide = EmbeddedCorpus::from_rows("w", &[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]).unwrap();
        assert!(fid(&p, &wide).is_err());
    }
}
