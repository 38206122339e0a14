//! Fisher-z conditional-independence test on partial correlations computed
//! from the precision matrix of the correlation submatrix.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::invert_spd;
use crate::scalar::{real, Real};
use crate::stats;
use crate::tabular::Dataset;

/// Guard keeping the z-transform finite on (near-)duplicate columns.
const CORR_CLAMP: f64 = 1e-12;

/// Outcome of one conditional-independence test; symmetric in `(i, j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct CiResult<F: Real> {
    pub i: usize,
    pub j: usize,
    pub cond_set: Vec<usize>,
    pub partial_corr: F,
    pub statistic: F,
    pub p_value: F,
    pub n: usize,
}

/// Pairwise Pearson correlations of every dataset column, computed once and
/// shared by all tests over the same data.
#[derive(Debug, Clone)]
pub struct CorrelationMatrix<F: Real> {
    k: usize,
    n: usize,
    values: Vec<F>,
    names: Vec<String>,
}

impl<F: Real> CorrelationMatrix<F> {
    pub fn from_dataset(data: &Dataset<F>) -> Result<Self> {
        let k = data.n_cols();
        let n = data.n_rows();
        let mut centered: Vec<Vec<F>> = Vec::with_capacity(k);
        for j in 0..k {
            let col = data.column(j);
            let m = stats::mean(col);
            let s = stats::std_dev(col);
            if !(s > F::zero()) || !s.is_finite() {
                return Err(Error::DegenerateData {
                    columns: vec![data.name(j).to_string()],
                });
            }
            centered.push(col.iter().map(|&v| (v - m) / s).collect());
        }
        let nf = F::from_usize_lossy(n);
        let mut values = vec![F::zero(); k * k];
        for a in 0..k {
            values[a * k + a] = F::one();
            for b in a + 1..k {
                let c = crate::linalg::dot(&centered[a], &centered[b]) / nf;
                values[a * k + b] = c;
                values[b * k + a] = c;
            }
        }
        Ok(CorrelationMatrix {
            k,
            n,
            values,
            names: data.names().to_vec(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> F {
        self.values[a * self.k + b]
    }

    /// Partial correlation of `i` and `j` given `cond`: invert the
    /// correlation submatrix over `[i, j, cond...]` and normalize the
    /// off-diagonal precision entry. Fails loudly on singular submatrices.
    pub fn partial_correlation(&self, i: usize, j: usize, cond: &[usize]) -> Result<F> {
        if cond.is_empty() {
            return Ok(self.get(i, j));
        }
        let mut idx = Vec::with_capacity(cond.len() + 2);
        idx.push(i);
        idx.push(j);
        idx.extend_from_slice(cond);
        let m = idx.len();
        let mut sub = vec![F::zero(); m * m];
        for (a, &va) in idx.iter().enumerate() {
            for (b, &vb) in idx.iter().enumerate() {
                sub[a * m + b] = self.get(va, vb);
            }
        }
        let precision = invert_spd(&sub, m).ok_or_else(|| Error::DegenerateData {
            columns: idx.iter().map(|&v| self.names[v].clone()).collect(),
        })?;
        let p00 = precision[0];
        let p11 = precision[m + 1];
        let p01 = precision[1];
        if !(p00 > F::zero()) || !(p11 > F::zero()) {
            return Err(Error::DegenerateData {
                columns: idx.iter().map(|&v| self.names[v].clone()).collect(),
            });
        }
        Ok(-p01 / (p00 * p11).sqrt())
    }

    /// Fisher-z test of `i` independent of `j` given `cond`.
    pub fn fisher_z(&self, i: usize, j: usize, cond: &[usize]) -> Result<CiResult<F>> {
        debug_assert!(i != j && !cond.contains(&i) && !cond.contains(&j));
        let s = cond.len();
        if self.n <= s + 3 {
            return Err(Error::SampleSize {
                needed: s + 3,
                actual: self.n,
            });
        }
        let raw = self.partial_correlation(i, j, cond)?;
        let clamp = real::<F>(1.0 - CORR_CLAMP);
        let r = raw.max(-clamp).min(clamp);
        let z = real::<F>(0.5) * ((F::one() + r) / (F::one() - r)).ln();
        let dof = F::from_usize_lossy(self.n - s - 3);
        let statistic = dof.sqrt() * z;
        let p_value = stats::two_sided_p(statistic);
        Ok(CiResult {
            i,
            j,
            cond_set: cond.to_vec(),
            partial_corr: r,
            statistic,
            p_value,
            n: self.n,
        })
    }
}

/// One-off Fisher-z test straight from a dataset. Repeated testing should go
/// through a shared [`CorrelationMatrix`], which this wraps.
pub fn fisher_z_test<F: Real>(
    data: &Dataset<F>,
    i: usize,
    j: usize,
    cond_set: &[usize],
) -> Result<CiResult<F>> {
    if i == j || cond_set.contains(&i) || cond_set.contains(&j) {
        return Err(Error::Invariant(
            "test variables must be distinct from each other and the conditioning set".into(),
        ));
    }
    let corr = CorrelationMatrix::from_dataset(data)?;
    corr.fisher_z(i, j, cond_set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::ColumnRole;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dataset(cols: Vec<Vec<f64>>) -> Dataset<f64> {
        let names = (0..cols.len()).map(|i| format!("c{i}")).collect();
        let roles = vec![ColumnRole::Parameter; cols.len()];
        Dataset::new(names, roles, cols).unwrap()
    }

    fn gaussian_cols(n: usize, k: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..k)
            .map(|_| {
                (0..n)
                    .map(|_| {
                        rand_distr::Distribution::<f64>::sample(
                            &rand_distr::StandardNormal,
                            &mut rng,
                        )
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn zero_correlation_gives_unit_p_value() {
        // Construct two exactly uncorrelated columns.
        let a = vec![1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0];
        let b = vec![1.0, 1.0, -1.0, -1.0, 1.0, 1.0, -1.0, -1.0];
        let d = dataset(vec![a, b]);
        let r = fisher_z_test(&d, 0, 1, &[]).unwrap();
        assert!(r.partial_corr.abs() < 1e-15);
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn known_marginal_case_matches_high_precision_reference() {
        // n = 100, empty conditioning set, r = 0.5:
        // statistic = atanh(0.5) sqrt(97) = 5.41003810519899...,
        // p = 6.30113401583537e-8 (mpmath, 30 digits).
        let statistic = 0.5_f64.atanh() * 97.0_f64.sqrt();
        assert!((statistic - 5.410038105198993).abs() < 1e-12);
        let p = crate::stats::two_sided_p(statistic);
        assert!(
            ((p - 6.30113401583537e-8) / 6.30113401583537e-8).abs() < 1e-9,
            "p = {p}"
        );
    }

    #[test]
    fn duplicated_column_clamps_and_rejects_hard() {
        let mut cols = gaussian_cols(200, 1, 3);
        cols.push(cols[0].clone());
        let d = dataset(cols);
        let r = fisher_z_test(&d, 0, 1, &[]).unwrap();
        assert!(r.partial_corr <= 1.0 - 1e-13);
        assert!(r.statistic.is_finite());
        assert!(r.statistic > 100.0);
        assert!(r.p_value < 1e-300);
    }

    #[test]
    fn partial_correlation_removes_a_common_cause() {
        let n = 50_000;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let z: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
        let x: Vec<f64> = z.iter().map(|&v| v + 0.3 * (rng.gen::<f64>() - 0.5)).collect();
        let y: Vec<f64> = z.iter().map(|&v| -v + 0.3 * (rng.gen::<f64>() - 0.5)).collect();
        let d = dataset(vec![x, y, z]);
        let marginal = fisher_z_test(&d, 0, 1, &[]).unwrap();
        assert!(marginal.partial_corr < -0.9);
        let partial = fisher_z_test(&d, 0, 1, &[2]).unwrap();
        assert!(
            partial.partial_corr.abs() < 0.02,
            "partial corr {} should vanish",
            partial.partial_corr
        );
    }

    #[test]
    fn symmetric_in_i_and_j() {
        let cols = gaussian_cols(500, 4, 5);
        let d = dataset(cols);
        let a = fisher_z_test(&d, 0, 2, &[1, 3]).unwrap();
        let b = fisher_z_test(&d, 2, 0, &[1, 3]).unwrap();
        assert!((a.partial_corr - b.partial_corr).abs() < 1e-12);
        assert!((a.statistic - b.statistic).abs() < 1e-12);
    }

    #[test]
    fn affine_rescaling_leaves_the_statistic_unchanged() {
        let cols = gaussian_cols(1_000, 3, 7);
        let d = dataset(cols.clone());
        let mut scaled = cols;
        for v in scaled[1].iter_mut() {
            *v = 10.0 * *v + 5.0;
        }
        let ds = dataset(scaled);
        let a = fisher_z_test(&d, 0, 1, &[2]).unwrap();
        let b = fisher_z_test(&ds, 0, 1, &[2]).unwrap();
        assert!(
            (a.statistic - b.statistic).abs() < 1e-8,
            "{} vs {}",
            a.statistic,
            b.statistic
        );
    }

    #[test]
    fn collinear_conditioning_set_fails_loudly() {
        let mut cols = gaussian_cols(300, 2, 11);
        cols.push(cols[1].clone()); // c2 duplicates c1
        let d = dataset(cols);
        let err = fisher_z_test(&d, 0, 1, &[2]).unwrap_err();
        match err {
            Error::DegenerateData { columns } => {
                assert!(columns.contains(&"c1".to_string()));
                assert!(columns.contains(&"c2".to_string()));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn too_small_samples_error() {
        let cols = gaussian_cols(5, 4, 13);
        let d = dataset(cols);
        assert_eq!(
            fisher_z_test(&d, 0, 1, &[2, 3]).unwrap_err().category(),
            "sample-size"
        );
    }
}
