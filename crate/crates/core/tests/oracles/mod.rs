//! Slow reference implementations used to check the library.
#![allow(dead_code)]

/// BLEU by explicit n-gram enumeration: every hypothesis n-gram is matched
/// against a reference n-gram not yet used, one at a time.
pub fn bleu(hyps: &[Vec<&str>], refs: &[Vec<&str>], max_n: usize) -> f64 {
    let mut matched = vec![0usize; max_n];
    let mut total = vec![0usize; max_n];
    let (mut c, mut r) = (0usize, 0usize);
    for (h, rf) in hyps.iter().zip(refs) {
        c += h.len();
        r += rf.len();
        for n in 1..=max_n {
            if h.len() < n {
                continue;
            }
            let ref_grams: Vec<&[&str]> = if rf.len() >= n {
                (0..=rf.len() - n).map(|i| &rf[i..i + n]).collect()
            } else {
                Vec::new()
            };
            let mut used = vec![false; ref_grams.len()];
            for i in 0..=h.len() - n {
                total[n - 1] += 1;
                let g = &h[i..i + n];
                if let Some(k) = (0..ref_grams.len()).find(|&k| !used[k] && ref_grams[k] == g) {
                    used[k] = true;
                    matched[n - 1] += 1;
                }
            }
        }
    }
    if c == 0 || matched.contains(&0) {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for n in 0..max_n {
        log_sum += (matched[n] as f64 / total[n] as f64).ln();
    }
    let bp = if c > r { 1.0 } else { (1.0 - r as f64 / c as f64).exp() };
    100.0 * bp * (log_sum / max_n as f64).exp()
}

/// Exact randomization p-value (without smoothing): the share of all 2^n
/// swap patterns whose absolute difference reaches the observed one.
pub fn exact_randomization_p(sys: &[bool], base: &[bool]) -> f64 {
    let n = sys.len();
    let d: Vec<i64> = sys
        .iter()
        .zip(base)
        .map(|(&s, &b)| s as i64 - b as i64)
        .collect();
    let observed = d.iter().sum::<i64>().abs();
    let mut hits = 0u64;
    for mask in 0u64..(1 << n) {
        let s: i64 = (0..n)
            .map(|i| if mask >> i & 1 == 1 { -d[i] } else { d[i] })
            .sum();
        if s.abs() >= observed {
            hits += 1;
        }
    }
    hits as f64 / (1u64 << n) as f64
}
