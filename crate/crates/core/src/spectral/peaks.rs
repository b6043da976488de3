use serde::{Deserialize, Serialize};

/// A local maximum with its topographic prominence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub index: usize,
    pub height: f64,
    pub prominence: f64,
}

/// Local maxima of `y` whose prominence is at least `min_prominence`.
///
/// Flat tops report their middle sample. The prominence of a peak is its
/// height above the higher of the two lowest points separating it from
/// taller terrain (or the record edge) on either side.
pub fn find_peaks(y: &[f64], min_prominence: f64) -> Vec<Peak> {
    let n = y.len();
    let mut out = Vec::new();
    if n < 3 {
        return out;
    }
    let mut i = 1;
    while i < n - 1 {
        if y[i - 1] < y[i] {
            let mut j = i;
            while j + 1 < n && y[j + 1] == y[i] {
                j += 1;
            }
            if j + 1 < n && y[j + 1] < y[i] {
                let index = (i + j) / 2;
                let prominence = prominence(y, i, j);
                if prominence >= min_prominence {
                    out.push(Peak {
                        index,
                        height: y[index],
                        prominence,
                    });
                }
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    out
}

fn prominence(y: &[f64], first: usize, last: usize) -> f64 {
    let h = y[first];
    let mut left_min = h;
    for k in (0..first).rev() {
        if y[k] > h {
            break;
        }
        left_min = left_min.min(y[k]);
    }
    let mut right_min = h;
    for &v in &y[last + 1..] {
        if v > h {
            break;
        }
        right_min = right_min.min(v);
    }
    h - left_min.max(right_min)
}

/// Sub-sample vertex of the parabola through `y[i-1..=i+1]`, as a fractional index.
pub fn parabolic_vertex(y: &[f64], i: usize) -> f64 {
    if i == 0 || i + 1 >= y.len() {
        return i as f64;
    }
    let (a, b, c) = (y[i - 1], y[i], y[i + 1]);
    let denom = a - 2.0 * b + c;
    if denom >= 0.0 {
        return i as f64;
    }
    i as f64 + (0.5 * (a - c) / denom).clamp(-0.5, 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prominence_matches_hand_computation() {
        let y = [0.0, 3.0, 1.0, 2.0, 0.5, 4.0, 0.0];
        let p = find_peaks(&y, 0.0);
        assert_eq!(p.len(), 3);
        assert_eq!((p[0].index, p[0].prominence), (1, 2.5));
        assert_eq!((p[1].index, p[1].prominence), (3, 1.0));
        assert_eq!((p[2].index, p[2].prominence), (5, 4.0));
        assert_eq!(find_peaks(&y, 1.5).len(), 2);
    }

    #[test]
    fn plateau_reports_middle() {
        let y = [0.0, 1.0, 2.0, 2.0, 2.0, 1.0];
        let p = find_peaks(&y, 0.0);
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].index, 3);
    }

    #[test]
    fn edges_and_monotone_have_no_peaks() {
        assert!(find_peaks(&[3.0, 2.0, 1.0], 0.0).is_empty());
        assert!(find_peaks(&[1.0, 2.0, 3.0], 0.0).is_empty());
        assert!(find_peaks(&[], 0.0).is_empty());
    }

    #[test]
    fn vertex_of_sampled_parabola() {
        let y: Vec<f64> = (0..5).map(|k| -(k as f64 - 2.3).powi(2)).collect();
        assert!((parabolic_vertex(&y, 2) - 2.3).abs() < 1e-12);
    }
}
