//! Unit-cost Levenshtein distance over Unicode scalar values.

/// Edit distance between `a` and `b`, counting chars rather than bytes.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    levenshtein_chars(&a, &b)
}

fn trim_common<'a>(mut a: &'a [char], mut b: &'a [char]) -> (&'a [char], &'a [char]) {
    while let (Some(x), Some(y)) = (a.first(), b.first()) {
        if x != y {
            break;
        }
        a = &a[1..];
        b = &b[1..];
    }
    while let (Some(x), Some(y)) = (a.last(), b.last()) {
        if x != y {
            break;
        }
        a = &a[..a.len() - 1];
        b = &b[..b.len() - 1];
    }
    (a, b)
}

pub fn levenshtein_chars(a: &[char], b: &[char]) -> usize {
    let (a, b) = trim_common(a, b);
    let (a, b) = if a.len() < b.len() { (b, a) } else { (a, b) };
    if b.is_empty() {
        return a.len();
    }
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, &ca) in a.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let above = row[j + 1];
            row[j + 1] = if ca == cb {
                diag
            } else {
                1 + diag.min(above).min(row[j])
            };
            diag = above;
        }
    }
    row[b.len()]
}

/// Distance if it is at most `max`, otherwise `None`.
///
/// Only the diagonal band of width `2 * max + 1` is filled, and the scan
/// stops as soon as a whole row exceeds `max`.
pub fn levenshtein_bounded(a: &[char], b: &[char], max: usize) -> Option<usize> {
    let (a, b) = trim_common(a, b);
    let (a, b) = if a.len() < b.len() { (b, a) } else { (a, b) };
    if a.len() - b.len() > max {
        return None;
    }
    if b.is_empty() {
        return Some(a.len());
    }
    const INF: usize = usize::MAX / 2;
    let width = b.len() + 1;
    let mut prev = vec![INF; width];
    let mut cur = vec![INF; width];
    for (j, slot) in prev.iter_mut().enumerate().take(max.min(b.len()) + 1) {
        *slot = j;
    }
    for i in 1..=a.len() {
        let lo = i.saturating_sub(max);
        let hi = (i + max).min(b.len());
        cur.fill(INF);
        if lo == 0 {
            cur[0] = i;
        }
        let mut row_min = if lo == 0 { i } else { INF };
        for j in lo.max(1)..=hi {
            let sub = prev[j - 1] + usize::from(a[i - 1] != b[j - 1]);
            let del = prev[j] + 1;
            let ins = cur[j - 1] + 1;
            let v = sub.min(del).min(ins);
            cur[j] = v;
            row_min = row_min.min(v);
        }
        if row_min > max {
            return None;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    let d = prev[b.len()];
    (d <= max).then_some(d)
}
