use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::PointCloud;
use crate::error::{Error, Result};

/// Sliding-window embedding: point `t` is `signal[t*step .. t*step + window]`.
pub fn delay_embedding(signal: &[f64], window: usize, step: usize) -> Result<PointCloud> {
    let len = signal.len();
    if window == 0 || window > len {
        return Err(Error::param(
            "window",
            format!("need 1 <= window <= {len}, got {window}"),
        ));
    }
    if step == 0 {
        return Err(Error::param("step", "step must be at least 1"));
    }
    let count = (len - window) / step + 1;
    let mut coords = Vec::with_capacity(count * window);
    for t in 0..count {
        coords.extend_from_slice(&signal[t * step..t * step + window]);
    }
    PointCloud::from_flat(window, coords)
}

/// Greedy farthest-point sampling from a seed-chosen start point.
pub fn maxmin_subsample(cloud: &PointCloud, m: usize, seed: u64) -> Result<Vec<usize>> {
    let n = cloud.len();
    let start = ChaCha8Rng::seed_from_u64(seed).random_range(0..n);
    maxmin_subsample_from(cloud, m, start)
}

/// Greedy farthest-point sampling from `start`; ties go to the lower index.
pub fn maxmin_subsample_from(cloud: &PointCloud, m: usize, start: usize) -> Result<Vec<usize>> {
    let n = cloud.len();
    if m == 0 || m > n {
        return Err(Error::param("m", format!("need 1 <= m <= {n}, got {m}")));
    }
    if start >= n {
        return Err(Error::param("start", format!("start {start} out of range")));
    }
    let mut chosen = Vec::with_capacity(m);
    let mut nearest = vec![f64::INFINITY; n];
    let mut current = start;
    loop {
        chosen.push(current);
        if chosen.len() == m {
            break;
        }
        let p = cloud.point(current);
        let mut best = (f64::NEG_INFINITY, usize::MAX);
        for (i, d) in nearest.iter_mut().enumerate() {
            let dist = super::euclidean(cloud.point(i), p);
            if dist < *d {
                *d = dist;
            }
            if *d > best.0 {
                best = (*d, i);
            }
        }
        current = best.1;
    }
    Ok(chosen)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delay_embedding_counts() {
        let signal: Vec<f64> = (0..10).map(f64::from).collect();
        let cloud = delay_embedding(&signal, 3, 1).unwrap();
        assert_eq!((cloud.len(), cloud.dim()), (8, 3));
        assert_eq!(cloud.point(7), &[7.0, 8.0, 9.0]);

        let strided = delay_embedding(&signal, 3, 3).unwrap();
        assert_eq!(strided.len(), 3);
        assert_eq!(strided.point(2), &[6.0, 7.0, 8.0]);
    }

    #[test]
    fn delay_embedding_errors() {
        let signal = [1.0, 2.0];
        assert!(delay_embedding(&signal, 3, 1).is_err());
        assert!(delay_embedding(&signal, 1, 0).is_err());
    }

    #[test]
    fn window_of_300() {
        let signal: Vec<f64> = (0..674 + 299).map(|i| (i as f64 * 0.01).sin()).collect();
        let cloud = delay_embedding(&signal, 300, 1).unwrap();
        assert_eq!((cloud.len(), cloud.dim()), (674, 300));
    }

    fn line(n: usize) -> PointCloud {
        PointCloud::from_rows(&(0..n).map(|x| vec![x as f64]).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn maxmin_on_a_line() {
        assert_eq!(maxmin_subsample_from(&line(11), 3, 0).unwrap(), vec![0, 10, 5]);
    }

    #[test]
    fn maxmin_extremes() {
        let cloud = line(7);
        let all = maxmin_subsample(&cloud, 7, 3).unwrap();
        let mut sorted = all.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..7).collect::<Vec<_>>());

        let one = maxmin_subsample(&cloud, 1, 3).unwrap();
        assert_eq!(one, vec![all[0]]);
        assert!(maxmin_subsample(&cloud, 8, 3).is_err());
        assert_eq!(maxmin_subsample(&cloud, 4, 9).unwrap(), maxmin_subsample(&cloud, 4, 9).unwrap());
    }
}
