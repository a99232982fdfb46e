use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Dataset, MlError};

/// Training-set size: `N·ratio` rounded down, with a small guard so that
/// products like 10 × 0.7 land on 7.
pub fn train_size(n: usize, ratio: f64) -> usize {
    ((n as f64 * ratio + 1e-9).floor() as usize).clamp(1, n - 1)
}

fn check(n: usize, ratio: f64) -> Result<(), MlError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(MlError::InvalidParameter(format!("split ratio {ratio}")));
    }
    if n < 2 {
        return Err(MlError::TooFewSamples { need: 2, have: n });
    }
    Ok(())
}

/// Seeded shuffle, then the first [`train_size`] rows train.
pub fn train_test_split(ds: &Dataset, ratio: f64, seed: u64) -> Result<(Dataset, Dataset), MlError> {
    check(ds.len(), ratio)?;
    let mut order: Vec<usize> = (0..ds.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let k = train_size(ds.len(), ratio);
    Ok((ds.subset(&order[..k]), ds.subset(&order[k..])))
}

/// Split applied within each group (for example cathode class) so both
/// sides keep the group mix. Groups with one member go to training.
pub fn stratified_split(ds: &Dataset, groups: &[String], ratio: f64, seed: u64) -> Result<(Dataset, Dataset), MlError> {
    check(ds.len(), ratio)?;
    if groups.len() != ds.len() {
        return Err(MlError::InvalidParameter(format!("{} group labels for {} rows", groups.len(), ds.len())));
    }
    let mut by_group: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, g) in groups.iter().enumerate() {
        by_group.entry(g).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for rows in by_group.values_mut() {
        rows.shuffle(&mut rng);
        let k = if rows.len() < 2 { rows.len() } else { train_size(rows.len(), ratio) };
        train.extend_from_slice(&rows[..k]);
        test.extend_from_slice(&rows[k..]);
    }
    if test.is_empty() {
        return Err(MlError::TooFewSamples { need: 2, have: ds.len() });
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((ds.subset(&train), ds.subset(&test)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ml::Task;
    use std::collections::BTreeSet;

    fn toy(n: usize) -> Dataset {
        Dataset::new(
            (0..n).map(|i| vec![i as f64]).collect(),
            (0..n).map(|i| i as f64).collect(),
            (0..n).map(|i| format!("r{i}")).collect(),
            Task::Regression,
        )
        .unwrap()
    }

    #[test]
    fn sizes() {
        assert_eq!(train_size(10, 0.7), 7);
        assert_eq!(train_size(295, 0.7), 206);
        let (tr, te) = train_test_split(&toy(10), 0.7, 1).unwrap();
        assert_eq!((tr.len(), te.len()), (7, 3));
    }

    #[test]
    fn disjoint_cover_and_deterministic() {
        let ds = toy(57);
        let (tr, te) = train_test_split(&ds, 0.7, 9).unwrap();
        let a: BTreeSet<_> = tr.ids.iter().collect();
        let b: BTreeSet<_> = te.ids.iter().collect();
        assert!(a.is_disjoint(&b));
        assert_eq!(a.len() + b.len(), 57);
        assert_eq!(train_test_split(&ds, 0.7, 9).unwrap(), (tr, te));
    }

    #[test]
    fn errors() {
        assert!(matches!(train_test_split(&toy(1), 0.7, 0), Err(MlError::TooFewSamples { .. })));
        assert!(matches!(train_test_split(&toy(5), 1.0, 0), Err(MlError::InvalidParameter(_))));
    }

    #[test]
    fn stratified_keeps_groups_on_both_sides() {
        let ds = toy(20);
        let groups: Vec<String> = (0..20).map(|i| if i % 4 == 0 { "lfp" } else { "ncm" }.to_string()).collect();
        let (tr, te) = stratified_split(&ds, &groups, 0.7, 3).unwrap();
        assert_eq!(tr.len() + te.len(), 20);
        let lfp_test = te.ids.iter().filter(|id| id[1..].parse::<usize>().unwrap() % 4 == 0).count();
        assert_eq!(lfp_test, 2);
    }
}
