//! Rank and sample statistics: Kendall's tau, average ranks, and the
//! Kolmogorov-Smirnov uniformity statistic.

/// Sample Kendall's tau (tau-b) of two equal-length slices, computed by
/// Knight's merge-sort algorithm in O(n log n).
pub fn kendall_tau(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len();
    assert!(n >= 2);

    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| {
        x[a].partial_cmp(&x[b])
            .unwrap()
            .then(y[a].partial_cmp(&y[b]).unwrap())
    });

    // Ties in x (and joint ties) from the sorted order.
    let mut ties_x = 0u64;
    let mut ties_xy = 0u64;
    let mut run_x = 1u64;
    let mut run_xy = 1u64;
    for w in 1..n {
        if x[idx[w]] == x[idx[w - 1]] {
            run_x += 1;
            if y[idx[w]] == y[idx[w - 1]] {
                run_xy += 1;
            } else {
                ties_xy += run_xy * (run_xy - 1) / 2;
                run_xy = 1;
            }
        } else {
            ties_x += run_x * (run_x - 1) / 2;
            run_x = 1;
            ties_xy += run_xy * (run_xy - 1) / 2;
            run_xy = 1;
        }
    }
    ties_x += run_x * (run_x - 1) / 2;
    ties_xy += run_xy * (run_xy - 1) / 2;

    // Count discordant pairs as merge-sort inversions of y in x-order.
    let mut ys: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
    let mut buf = vec![0.0; n];
    let swaps = merge_count(&mut ys, &mut buf);

    // Ties in y overall.
    let mut ysorted = y.to_vec();
    ysorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut ties_y = 0u64;
    let mut run_y = 1u64;
    for w in 1..n {
        if ysorted[w] == ysorted[w - 1] {
            run_y += 1;
        } else {
            ties_y += run_y * (run_y - 1) / 2;
            run_y = 1;
        }
    }
    ties_y += run_y * (run_y - 1) / 2;

    let total = (n as u64) * (n as u64 - 1) / 2;
    let num = total as f64 - ties_x as f64 - ties_y as f64 + ties_xy as f64
        - 2.0 * swaps as f64;
    let den = ((total - ties_x) as f64 * (total - ties_y) as f64).sqrt();
    num / den
}

fn merge_count(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n <= 1 {
        return 0;
    }
    let mid = n / 2;
    let (left, right) = v.split_at_mut(mid);
    let mut swaps = merge_count(left, &mut buf[..mid]) + merge_count(right, &mut buf[mid..]);
    let (mut i, mut j, mut k) = (0, 0, 0);
    while i < left.len() && j < right.len() {
        if right[j] < left[i] {
            swaps += (left.len() - i) as u64;
            buf[k] = right[j];
            j += 1;
        } else {
            buf[k] = left[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + left.len() - i].copy_from_slice(&left[i..]);
    buf[k + left.len() - i..n].copy_from_slice(&right[j..]);
    v.copy_from_slice(&buf[..n]);
    swaps
}

/// Mean pairwise sample Kendall's tau over all coordinate pairs of an
/// n-by-p sample stored row-major.
pub fn mean_pairwise_tau(rows: &[Vec<f64>]) -> f64 {
    let p = rows[0].len();
    let mut sum = 0.0;
    let mut count = 0;
    for a in 0..p {
        for b in (a + 1)..p {
            let xa: Vec<f64> = rows.iter().map(|r| r[a]).collect();
            let xb: Vec<f64> = rows.iter().map(|r| r[b]).collect();
            sum += kendall_tau(&xa, &xb);
            count += 1;
        }
    }
    sum / count as f64
}

/// One-sample Kolmogorov-Smirnov statistic against Uniform(0,1).
pub fn ks_uniform_statistic(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let upper = (i as f64 + 1.0) / n - x;
        let lower = x - i as f64 / n;
        d = d.max(upper).max(lower);
    }
    d
}

/// Asymptotic Kolmogorov critical value at significance `alpha`:
/// reject uniformity when D_n > c(alpha)/sqrt(n).
pub fn ks_critical_value(alpha: f64, n: usize) -> f64 {
    (-0.5 * (alpha / 2.0).ln()).sqrt() / (n as f64).sqrt()
}

/// Average ranks (1-based, ties averaged) of a column.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| x[a].partial_cmp(&x[b]).unwrap());
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        // positions i..=j share the averaged rank
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &pos in &idx[i..=j] {
            ranks[pos] = avg;
        }
        i = j + 1;
    }
    ranks
}
