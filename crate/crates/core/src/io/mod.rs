//! File formats: MNIST IDX, binary PGM/PPM, versioned JSON checkpoints, CSV
//! reports, plus synthetic datasets for desk-scale runs.

mod checkpoint;
mod idx;
mod pnm;
mod synth;
mod table;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, Payload, CHECKPOINT_VERSION};
pub use idx::{load_idx_images, load_idx_labels, load_mnist, IdxHeader, MnistSplit};
pub use pnm::{load_image, save_image};
pub use synth::{gaussian_blobs, gradient_images, BlobSpec};
pub use table::{read_csv, write_csv, CsvTable};
