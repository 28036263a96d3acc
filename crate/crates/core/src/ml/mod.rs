//! Feedforward networks trained from scratch: the local classifier, the
//! feature-unifying autoencoder, and the shallow stacking learner.

mod io;
mod matrix;
mod network;
mod train;

pub use io::{read_network, write_network};
pub use matrix::Matrix;
pub use network::{
    accuracy, encode, predict_proba, Activation, DenseLayer, DenseNetwork, ProbabilityMatrix, Standardizer,
};
pub use train::{
    continue_classifier, fit, init_autoencoder, init_classifier, loss_and_gradients, mean_loss, reconstruction_mse,
    split_autoencoder, train_autoencoder, train_classifier, AutoencoderConfig, ClassifierConfig, LayerGrad, Loss,
    SgdConfig, Targets,
};
