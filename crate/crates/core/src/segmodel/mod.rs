//! Per-pixel segmentation: windowed spectral features, a logistic model
//! trained with weighted BCE and Adam, inference, and hard negative mining.

mod checkpoint;
mod features;
mod hnm;
mod loss;
mod model;
mod optim;
mod train;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use features::{extract_features, FeatureConfig, PixelFeatures};
pub use hnm::{hard_negative_pairs, mine_hard_negatives, HardNegative, HnmConfig, HnmScene};
pub use loss::{sigmoid, softplus, weighted_bce, weighted_bce_logit, BCE_EPS};
pub use model::{predict, predict_proba, PixelModel, Scaler, SegModel};
pub use optim::{Adam, AdamConfig};
pub use train::{
    class_weights, epoch_lrs, train, PlateauSchedule, TrainConfig, TrainReport, TrainingPair, LOSS_IMPROVEMENT,
};
