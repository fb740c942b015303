//! Fully-connected binary classifier: sigmoid output, ReLU hidden layers,
//! dropout after the first hidden layer, cross-entropy training with Adam.

mod dataset;
mod network;
mod train;

pub use dataset::{DatasetMeta, LabeledDataset};
pub use network::{bce_loss, init_model, sigmoid, FnnConfig, FnnModel, Gradients, Layer, PRED_CLAMP};
pub use train::{
    evaluate, fit, load_model, predict_all, predict_proba, predict_rows, save_model, train, EpochStats, TrainOptions,
    TrainingReport, MODEL_VERSION,
};
