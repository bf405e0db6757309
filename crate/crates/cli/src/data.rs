use std::path::Path;

use sfdma_core::io::{gaussian_blobs, gradient_images, load_image, load_mnist, BlobSpec, MnistSplit};
use sfdma_core::nncore::SeededRng;
use sfdma_core::recon::ImageSet;
use sfdma_core::rib::LabeledDataset;

use crate::config::{DatasetSpec, ExperimentConfig};
use crate::CliError;

/// Stream for dataset synthesis, apart from the training streams.
const DATA_STREAM: u64 = 0x6461_7461;

pub enum Split {
    Labeled { train: LabeledDataset, test: LabeledDataset },
    Images { train: ImageSet, test: ImageSet },
}

pub fn load(cfg: &ExperimentConfig) -> Result<Split, CliError> {
    let mut rng = SeededRng::with_stream(cfg.seed, DATA_STREAM);
    match &cfg.dataset {
        DatasetSpec::Mnist { path, train_limit, test_limit } => {
            let train = load_mnist(path, MnistSplit::Train)?;
            let test = load_mnist(path, MnistSplit::Test)?;
            let train = train_limit.map_or(train.clone(), |n| train.head(n));
            let test = test_limit.map_or(test.clone(), |n| test.head(n));
            Ok(Split::Labeled { train, test })
        }
        DatasetSpec::Blobs { train, test_samples } => {
            let train_set = gaussian_blobs(train, &mut rng)?;
            let test = gaussian_blobs(&BlobSpec { samples: *test_samples, ..*train }, &mut rng)?;
            Ok(Split::Labeled { train: train_set, test })
        }
        DatasetSpec::Gradients { train_count, test_count } => {
            let spec = cfg.autoencoder_spec();
            let train = gradient_images(*train_count, spec.height, spec.width, spec.channels, &mut rng)?;
            let test = gradient_images(*test_count, spec.height, spec.width, spec.channels, &mut rng)?;
            Ok(Split::Images { train, test })
        }
        DatasetSpec::Images { path, test_count } => {
            let mut all = load_dir(path)?;
            if *test_count == 0 || *test_count >= all.len() {
                return Err(CliError::Config(format!(
                    "dataset.test_count: {test_count} leaves no training images out of {}",
                    all.len()
                )));
            }
            let test = all.split_off(all.len() - test_count);
            let spec = cfg.autoencoder_spec();
            let want = [spec.height, spec.width, spec.channels];
            let train = ImageSet::new(all)?;
            if train.shape() != want {
                return Err(CliError::Config(format!(
                    "dataset.path: images are {:?}, autoencoder expects {want:?}",
                    train.shape()
                )));
            }
            Ok(Split::Images { train, test: ImageSet::new(test)? })
        }
    }
}

/// Every `.pgm`/`.ppm` file in `dir`, sorted by file name.
fn load_dir(dir: &Path) -> Result<Vec<sfdma_core::recon::ImageTensor>, CliError> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)?.map(|e| e.map(|e| e.path())).collect::<Result<_, _>>()?;
    paths.retain(|p| p.extension().is_some_and(|e| e == "pgm" || e == "ppm"));
    paths.sort();
    paths.iter().map(|p| load_image(p).map_err(CliError::from)).collect()
}
