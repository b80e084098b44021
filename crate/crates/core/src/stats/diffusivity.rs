use super::{mean, normal_quantile, Estimate, EstimatorReport, Z95};
use crate::error::{Error, Result};

fn check_rows(rows: &[Vec<f64>]) -> Result<usize> {
    let d = rows.first().map(Vec::len).ok_or_else(|| Error::domain("no displacement vectors"))?;
    if d == 0 || rows.iter().any(|r| r.len() != d) {
        return Err(Error::domain("displacement vectors must share a nonzero dimension"));
    }
    Ok(d)
}

fn column(rows: &[Vec<f64>], c: usize) -> Vec<f64> {
    rows.iter().map(|r| r[c]).collect()
}

/// Diffusivity from endpoint barycenter displacements over horizon `m`.
///
/// `sigma2` is the pooled per-coordinate sample variance divided by `m`. Its
/// standard error comes from the per-replica pooled squared deviations, so it
/// does not assume Gaussian endpoints. Per-coordinate estimates are reported
/// as `sigma2_c{k}`.
pub fn estimate_sigma2(endpoints: &[Vec<f64>], m: f64) -> Result<EstimatorReport> {
    let n = endpoints.len();
    if n < 2 {
        return Err(Error::domain(format!("need at least 2 replicas, got {n}")));
    }
    if !(m > 0.0) {
        return Err(Error::domain("horizon must be positive"));
    }
    let d = check_rows(endpoints)?;
    let nf = n as f64;
    let bessel = nf / (nf - 1.0);
    let means: Vec<f64> = (0..d).map(|c| mean(&column(endpoints, c))).collect();

    let mut report = EstimatorReport::new("sigma2", n);
    let mut pooled = vec![0.0; n];
    for c in 0..d {
        let sq: Vec<f64> = endpoints.iter().map(|r| (r[c] - means[c]).powi(2)).collect();
        for (p, s) in pooled.iter_mut().zip(&sq) {
            *p += s / d as f64;
        }
        let est = mean(&sq) * bessel / m;
        let se = super::variance(&sq).sqrt() / nf.sqrt() * bessel / m;
        report.push(Estimate::new(format!("sigma2_c{c}"), est, se, Z95));
    }
    let est = mean(&pooled) * bessel / m;
    let se = super::variance(&pooled).sqrt() / nf.sqrt() * bessel / m;
    report.estimates.insert(0, Estimate::new("sigma2", est, se, Z95));
    Ok(report)
}

/// Drift and isotropy of displacement vectors.
///
/// * `mean_c{k}` per coordinate, checked against zero at 3 standard errors.
/// * `cov_{i}{j}` for `i < j`, checked against zero at 3 standard errors.
/// * Diagonal homogeneity: for each pair of coordinates the mean of
///   `u_i^2 - u_j^2` (centered values) is z-tested against zero at an overall
///   1% level, Bonferroni-split across pairs.
///
/// For `d = 1` only the drift part is produced.
pub fn drift_and_isotropy(increments: &[Vec<f64>]) -> Result<EstimatorReport> {
    let n = increments.len();
    if n < 2 {
        return Err(Error::domain(format!("need at least 2 increments, got {n}")));
    }
    let d = check_rows(increments)?;
    let nf = n as f64;
    let sqrt_n = nf.sqrt();
    let mut report = EstimatorReport::new("drift_isotropy", n);

    let means: Vec<f64> = (0..d).map(|c| mean(&column(increments, c))).collect();
    for c in 0..d {
        let col = column(increments, c);
        let se = super::variance(&col).sqrt() / sqrt_n;
        report.push(Estimate::new(format!("mean_c{c}"), means[c], se, Z95));
        let z = if se > 0.0 { means[c] / se } else { 0.0 };
        report.check(format!("drift_c{c}_within_3se"), z.abs() <= 3.0, z, 3.0);
    }
    if d == 1 {
        report.notes.push("isotropy skipped for d = 1".into());
        return Ok(report);
    }

    let centred: Vec<Vec<f64>> = increments.iter().map(|r| r.iter().zip(&means).map(|(x, m)| x - m).collect()).collect();
    for c in 0..d {
        let sq: Vec<f64> = centred.iter().map(|r| r[c] * r[c]).collect();
        let se = super::variance(&sq).sqrt() / sqrt_n;
        report.push(Estimate::new(format!("var_c{c}"), mean(&sq) * nf / (nf - 1.0), se, Z95));
    }
    let pairs = d * (d - 1) / 2;
    let z_homog = normal_quantile(1.0 - 0.01 / (2.0 * pairs as f64));
    for i in 0..d {
        for j in (i + 1)..d {
            let prod: Vec<f64> = centred.iter().map(|r| r[i] * r[j]).collect();
            let se = super::variance(&prod).sqrt() / sqrt_n;
            let cov = mean(&prod) * nf / (nf - 1.0);
            report.push(Estimate::new(format!("cov_{i}{j}"), cov, se, Z95));
            let z = if se > 0.0 { cov / se } else { 0.0 };
            report.check(format!("cov_{i}{j}_within_3se"), z.abs() <= 3.0, z, 3.0);

            let diff: Vec<f64> = centred.iter().map(|r| r[i] * r[i] - r[j] * r[j]).collect();
            let se = super::variance(&diff).sqrt() / sqrt_n;
            let z = if se > 0.0 { mean(&diff) / se } else { 0.0 };
            report.check(format!("homogeneity_{i}{j}"), z.abs() <= z_homog, z, z_homog);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian_rows(n: usize, sds: &[f64], seed: u64) -> Vec<Vec<f64>> {
        let mut rng = RngStream::new(seed, 0);
        (0..n)
            .map(|_| {
                sds.iter()
                    .map(|s| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        s * z
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn synthetic_variance_two() {
        let m: f64 = 50.0;
        let rows = gaussian_rows(20_000, &[(2.0 * m).sqrt(); 2], 4);
        let r = estimate_sigma2(&rows, m).unwrap();
        let e = r.estimate("sigma2").unwrap();
        assert!(e.ci.0 <= 2.0 && 2.0 <= e.ci.1, "{e:?}");
        assert!(r.estimate("sigma2_c1").is_some());
    }

    #[test]
    fn needs_two_replicas() {
        assert!(estimate_sigma2(&[vec![1.0]], 1.0).is_err());
        assert!(estimate_sigma2(&[], 1.0).is_err());
        assert!(drift_and_isotropy(&[vec![1.0]]).is_err());
    }

    #[test]
    fn relabeling_invariance() {
        let rows = gaussian_rows(500, &[1.0, 2.0], 6);
        let mut rev = rows.clone();
        rev.reverse();
        let a = estimate_sigma2(&rows, 3.0).unwrap().estimate("sigma2").unwrap().value;
        let b = estimate_sigma2(&rev, 3.0).unwrap().estimate("sigma2").unwrap().value;
        assert!((a - b).abs() <= 1e-12 * a.abs());
    }

    #[test]
    fn anisotropy_is_rejected() {
        let rows = gaussian_rows(10_000, &[1.0, 2.0], 8);
        let r = drift_and_isotropy(&rows).unwrap();
        assert!(!r.get_check("homogeneity_01").unwrap().passed);
    }

    #[test]
    fn isotropic_input_passes() {
        let rows = gaussian_rows(10_000, &[1.5, 1.5, 1.5], 10);
        let r = drift_and_isotropy(&rows).unwrap();
        assert!(r.passed(), "{:#?}", r.checks);
        assert_eq!(r.checks.iter().filter(|c| c.name.starts_with("homogeneity")).count(), 3);
    }

    #[test]
    fn one_dimension_skips_isotropy() {
        let rows = gaussian_rows(100, &[1.0], 1);
        let r = drift_and_isotropy(&rows).unwrap();
        assert!(r.estimate("mean_c0").is_some());
        assert!(r.checks.iter().all(|c| c.name.starts_with("drift")));
    }
}
