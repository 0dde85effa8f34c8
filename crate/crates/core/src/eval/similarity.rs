use std::collections::BTreeMap;

fn trigrams(s: &str) -> BTreeMap<[char; 3], u32> {
    let padded: Vec<char> = std::iter::once(' ')
        .chain(s.trim().to_lowercase().chars())
        .chain(std::iter::once(' '))
        .collect();
    let mut out = BTreeMap::new();
    for w in padded.windows(3) {
        *out.entry([w[0], w[1], w[2]]).or_insert(0) += 1;
    }
    out
}

/// Cosine similarity of character-trigram count vectors (lowercased, one
/// space of padding at each end).
pub fn trigram_cosine(a: &str, b: &str) -> f64 {
    let (ta, tb) = (trigrams(a), trigrams(b));
    let dot: f64 = ta.iter().filter_map(|(k, &x)| tb.get(k).map(|&y| x as f64 * y as f64)).sum();
    let norm = |t: &BTreeMap<[char; 3], u32>| t.values().map(|&v| (v as f64).powi(2)).sum::<f64>().sqrt();
    let d = norm(&ta) * norm(&tb);
    if d == 0.0 {
        0.0
    } else {
        dot / d
    }
}

/// Label set ordered by the best similarity to any of the tags, ties kept in
/// label-set order.
pub fn rank_labels<'a>(tags: impl IntoIterator<Item = &'a str> + Clone, label_set: &[String]) -> Vec<String> {
    let mut scored: Vec<(usize, f64)> = label_set
        .iter()
        .enumerate()
        .map(|(i, l)| (i, tags.clone().into_iter().map(|t| trigram_cosine(t, l)).fold(0.0, f64::max)))
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.into_iter().map(|(i, _)| label_set[i].clone()).collect()
}
