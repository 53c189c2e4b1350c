use rand::seq::SliceRandom;

use super::{DataError, Dataset};
use crate::rng;

/// Shuffles `dataset` with `seed` and cuts it into train and test parts.
///
/// The train part holds `round(train_fraction * n)` rows, rounding halves up.
pub fn split_dataset(
    dataset: &Dataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(Dataset, Dataset), DataError> {
    dataset.require_non_empty()?;
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(DataError::InvalidFraction(train_fraction));
    }
    let n = dataset.len();
    let n_train = (train_fraction * n as f64 + 0.5).floor() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::rng(seed));
    let (train, test) = order.split_at(n_train.min(n));
    Ok((dataset.subset(train), dataset.subset(test)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, GeneratorConfig};

    fn data(n: usize, seed: u64) -> Dataset {
        generate_synthetic(&GeneratorConfig {
            n,
            seed,
            ..GeneratorConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn default_sized_split() {
        let (train, test) = split_dataset(&data(2280, 1), 0.8, 7).unwrap();
        assert_eq!((train.len(), test.len()), (1824, 456));
    }

    #[test]
    fn half_rounds_up() {
        let (train, test) = split_dataset(&data(5, 1), 0.5, 3).unwrap();
        assert_eq!((train.len(), test.len()), (3, 2));
    }

    #[test]
    fn same_seed_same_partition() {
        let d = data(50, 2);
        assert_eq!(split_dataset(&d, 0.8, 9).unwrap(), split_dataset(&d, 0.8, 9).unwrap());
        assert_ne!(
            split_dataset(&d, 0.8, 9).unwrap().0,
            split_dataset(&d, 0.8, 10).unwrap().0
        );
    }

    #[test]
    fn errors() {
        let empty = Dataset::new(vec![], crate::data::Provenance::Csv);
        assert_eq!(split_dataset(&empty, 0.8, 1), Err(DataError::EmptyDataset));
        assert!(matches!(
            split_dataset(&data(4, 1), 1.0, 1),
            Err(DataError::InvalidFraction(_))
        ));
    }
}
