//! Brute-force reference implementations. Deliberately naive: n-grams are
//! enumerated as slices and counted by linear scan, statistics use the
//! textbook pairwise definitions.

fn ngrams<T>(seq: &[T], n: usize) -> Vec<&[T]> {
    if seq.len() < n {
        return Vec::new();
    }
    (0..=seq.len() - n).map(|i| &seq[i..i + n]).collect()
}

fn occurrences<T: PartialEq>(list: &[&[T]], g: &[T]) -> usize {
    list.iter().filter(|x| **x == g).count()
}

/// Sum over distinct hyp n-grams of min(hyp count, ref count).
fn clipped_overlap<T: PartialEq>(hyp: &[&[T]], reference: &[&[T]]) -> usize {
    let mut seen: Vec<&[T]> = Vec::new();
    let mut total = 0;
    for g in hyp {
        if seen.contains(g) {
            continue;
        }
        seen.push(g);
        total += occurrences(hyp, g).min(occurrences(reference, g));
    }
    total
}

#[derive(Debug, Clone, PartialEq)]
pub struct BleuCounts {
    pub matched: Vec<usize>,
    pub total: Vec<usize>,
    pub hyp_len: usize,
    pub ref_len: usize,
}

pub fn bleu_counts(hyp: &[String], refs: &[Vec<String>], max_order: usize) -> BleuCounts {
    let mut matched = Vec::new();
    let mut total = Vec::new();
    for n in 1..=max_order {
        let h = ngrams(hyp, n);
        let mut seen: Vec<&[String]> = Vec::new();
        let mut m = 0;
        for g in &h {
            if seen.contains(g) {
                continue;
            }
            seen.push(g);
            let max_ref = refs
                .iter()
                .map(|r| occurrences(&ngrams(r, n), g))
                .max()
                .unwrap_or(0);
            m += occurrences(&h, g).min(max_ref);
        }
        matched.push(m);
        total.push(h.len());
    }
    // Closest reference length, ties to the shorter one.
    let c = hyp.len() as i64;
    let mut best: Option<usize> = None;
    for r in refs {
        let len = r.len();
        best = match best {
            None => Some(len),
            Some(b) => {
                let (db, dl) = ((b as i64 - c).abs(), (len as i64 - c).abs());
                if dl < db || (dl == db && len < b) {
                    Some(len)
                } else {
                    Some(b)
                }
            }
        };
    }
    BleuCounts {
        matched,
        total,
        hyp_len: hyp.len(),
        ref_len: best.unwrap_or(0),
    }
}

pub fn sum_counts(parts: &[BleuCounts]) -> BleuCounts {
    let orders = parts[0].matched.len();
    let mut out = BleuCounts {
        matched: vec![0; orders],
        total: vec![0; orders],
        hyp_len: 0,
        ref_len: 0,
    };
    for p in parts {
        for i in 0..orders {
            out.matched[i] += p.matched[i];
            out.total[i] += p.total[i];
        }
        out.hyp_len += p.hyp_len;
        out.ref_len += p.ref_len;
    }
    out
}

/// BLEU from counts. `exp_smoothing == false` means no smoothing.
pub fn bleu_from_counts(c: &BleuCounts, exp_smoothing: bool) -> f64 {
    if c.total.contains(&0) || c.matched[0] == 0 {
        return 0.0;
    }
    let mut s = 1.0;
    let mut log_sum = 0.0;
    for (&m, &t) in c.matched.iter().zip(&c.total) {
        let p = if m > 0 {
            m as f64 / t as f64
        } else if exp_smoothing {
            s *= 2.0;
            1.0 / (s * t as f64)
        } else {
            return 0.0;
        };
        log_sum += p.ln();
    }
    let geo = (log_sum / c.matched.len() as f64).exp();
    let bp = if c.hyp_len >= c.ref_len {
        1.0
    } else {
        (1.0 - c.ref_len as f64 / c.hyp_len as f64).exp()
    };
    bp * geo * 100.0
}

pub fn bleu(hyp: &[String], refs: &[Vec<String>], max_order: usize, exp_smoothing: bool) -> f64 {
    bleu_from_counts(&bleu_counts(hyp, refs, max_order), exp_smoothing)
}

fn chars(text: &str) -> Vec<char> {
    text.chars().filter(|c| !c.is_whitespace()).collect()
}

/// Per-order (matched, hyp total, ref total) character n-gram statistics.
pub fn chrf_stats(hyp: &str, reference: &str, n_max: usize) -> Vec<(usize, usize, usize)> {
    let (h, r) = (chars(hyp), chars(reference));
    (1..=n_max)
        .map(|n| {
            let (hg, rg) = (ngrams(&h, n), ngrams(&r, n));
            (clipped_overlap(&hg, &rg), hg.len(), rg.len())
        })
        .collect()
}

pub fn chrf_from_stats(stats: &[(usize, usize, usize)], beta: f64) -> f64 {
    let b2 = beta * beta;
    let mut sum = 0.0;
    let mut orders = 0;
    for &(m, h, r) in stats {
        if h == 0 && r == 0 {
            continue;
        }
        orders += 1;
        if h == 0 || r == 0 || m == 0 {
            continue;
        }
        let p = m as f64 / h as f64;
        let rec = m as f64 / r as f64;
        sum += (1.0 + b2) * p * rec / (b2 * p + rec);
    }
    if orders == 0 {
        100.0
    } else {
        sum / orders as f64 * 100.0
    }
}

/// Segment chrF against the best reference; returns (score, best index).
pub fn chrf(hyp: &str, refs: &[String], n_max: usize, beta: f64) -> (f64, usize) {
    let mut best = (f64::NEG_INFINITY, 0);
    for (i, r) in refs.iter().enumerate() {
        let s = chrf_from_stats(&chrf_stats(hyp, r, n_max), beta);
        if s > best.0 {
            best = (s, i);
        }
    }
    best
}

pub fn chrf_corpus(pairs: &[(String, Vec<String>)], n_max: usize, beta: f64) -> f64 {
    let mut acc = vec![(0, 0, 0); n_max];
    for (hyp, refs) in pairs {
        let (_, best) = chrf(hyp, refs, n_max, beta);
        for (a, s) in acc.iter_mut().zip(chrf_stats(hyp, &refs[best], n_max)) {
            a.0 += s.0;
            a.1 += s.1;
            a.2 += s.2;
        }
    }
    chrf_from_stats(&acc, beta)
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

pub fn rouge_n(hyp: &[String], refs: &[Vec<String>], n: usize) -> f64 {
    let h = ngrams(hyp, n);
    refs.iter()
        .map(|r| {
            let rg = ngrams(r, n);
            if h.is_empty() || rg.is_empty() {
                return 0.0;
            }
            let o = clipped_overlap(&h, &rg) as f64;
            f1(o / h.len() as f64, o / rg.len() as f64)
        })
        .fold(0.0, f64::max)
        * 100.0
}

fn is_subsequence(needle: &[&String], hay: &[String]) -> bool {
    let mut it = hay.iter();
    needle.iter().all(|x| it.any(|y| y == *x))
}

/// LCS by enumerating every subsequence of `a` (|a| ≤ ~16).
pub fn lcs_enumerate(a: &[String], b: &[String]) -> usize {
    let mut best = 0;
    for mask in 0u32..(1 << a.len()) {
        let len = mask.count_ones() as usize;
        if len <= best {
            continue;
        }
        let sub: Vec<&String> = (0..a.len()).filter(|i| mask & (1 << i) != 0).map(|i| &a[i]).collect();
        if is_subsequence(&sub, b) {
            best = len;
        }
    }
    best
}

pub fn rouge_l(hyp: &[String], refs: &[Vec<String>]) -> f64 {
    refs.iter()
        .map(|r| {
            if hyp.is_empty() || r.is_empty() {
                return 0.0;
            }
            let l = lcs_enumerate(hyp, r) as f64;
            f1(l / hyp.len() as f64, l / r.len() as f64)
        })
        .fold(0.0, f64::max)
        * 100.0
}

/// (correct, used) over all unordered pairs; human ties skipped, metric ties wrong.
pub fn pairwise_accuracy(metric: &[f64], human: &[f64]) -> (usize, usize) {
    let (mut correct, mut used) = (0, 0);
    for i in 0..metric.len() {
        for j in 0..metric.len() {
            if i >= j || human[i] == human[j] {
                continue;
            }
            used += 1;
            let agree = (metric[i] > metric[j] && human[i] > human[j])
                || (metric[i] < metric[j] && human[i] < human[j]);
            if agree {
                correct += 1;
            }
        }
    }
    (correct, used)
}

pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx.sqrt() * syy.sqrt()))
}

/// τ-b from all O(n²) pairs.
pub fn kendall_tau_b(x: &[f64], y: &[f64]) -> Option<f64> {
    let (mut conc, mut disc, mut tie_x, mut tie_y) = (0i64, 0i64, 0i64, 0i64);
    let mut n0 = 0i64;
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            n0 += 1;
            let dx = x[i] - x[j];
            let dy = y[i] - y[j];
            if dx == 0.0 {
                tie_x += 1;
            }
            if dy == 0.0 {
                tie_y += 1;
            }
            if dx != 0.0 && dy != 0.0 {
                if (dx > 0.0) == (dy > 0.0) {
                    conc += 1;
                } else {
                    disc += 1;
                }
            }
        }
    }
    let denom = ((n0 - tie_x) * (n0 - tie_y)) as f64;
    if denom == 0.0 {
        return None;
    }
    Some((conc - disc) as f64 / denom.sqrt())
}

/// Average ranks (1-based) by counting smaller and equal values.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|a| {
            let less = v.iter().filter(|b| *b < a).count() as f64;
            let equal = v.iter().filter(|b| *b == a).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}

pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    pearson(&average_ranks(x), &average_ranks(y))
}
