use crate::error::{Error, Result};

/// Rescaled path `t -> m^{-1/2} (S(floor(t m)) - t m alpha)` sampled at
/// `t = k / steps`, `k = 0..=steps`. `partial_sums[j]` is `S(j)` and must
/// cover `j = 0..=m`.
pub fn donsker_rescale(partial_sums: &[f64], m: usize, alpha: f64, steps: usize) -> Result<Vec<(f64, f64)>> {
    if m == 0 {
        return Err(Error::domain("m must be at least 1"));
    }
    if partial_sums.len() <= m {
        return Err(Error::domain(format!("need S(0..={m}), got {} values", partial_sums.len())));
    }
    if steps == 0 {
        return Err(Error::domain("need at least one grid step"));
    }
    let scale = (m as f64).sqrt().recip();
    Ok((0..=steps)
        .map(|k| {
            let t = k as f64 / steps as f64;
            // guard against t * m landing just below an integer
            let j = ((t * m as f64) + 1e-9).floor() as usize;
            (t, scale * (partial_sums[j.min(m)] - t * m as f64 * alpha))
        })
        .collect())
}

/// Number of renewal times `tau_1 <= tau_2 <= ...` at or before `s`, i.e.
/// the `k` with `tau_k <= s < tau_{k+1}` (0 before the first renewal).
pub fn renewal_index(times: &[f64], s: f64) -> usize {
    times.partition_point(|&t| t <= s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_path() {
        let p = donsker_rescale(&[0.0; 11], 10, 0.0, 5).unwrap();
        assert!(p.iter().all(|&(_, v)| v == 0.0));
    }

    #[test]
    fn single_step() {
        let p = donsker_rescale(&[0.0, 2.5], 1, 0.5, 4).unwrap();
        assert_eq!(p.last().unwrap(), &(1.0, 2.0));
        assert_eq!(p[2], (0.5, -0.25));
    }

    #[test]
    fn bad_inputs() {
        assert!(donsker_rescale(&[0.0], 1, 0.0, 2).is_err());
        assert!(donsker_rescale(&[0.0, 1.0], 0, 0.0, 2).is_err());
    }

    #[test]
    fn renewal_counts() {
        let taus = [1.0, 2.5, 4.0];
        assert_eq!(renewal_index(&taus, 0.5), 0);
        assert_eq!(renewal_index(&taus, 2.5), 2);
        assert_eq!(renewal_index(&taus, 10.0), 3);
    }
}
