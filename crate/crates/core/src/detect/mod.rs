//! Sequence classifiers over power windows: LSTM, bidirectional LSTM,
//! temporal convolutional network, and an LSTM autoencoder feeding an MLP.
//! Gradients are computed by hand-written backpropagation.

mod config;
mod gradcheck;
mod io;
mod layers;
mod metrics;
mod model;
mod nets;
mod optim;
mod tensor;
mod train;

pub use config::{Arch, DetectorConfig};
pub use gradcheck::{
    gradient_check, gradient_check_arch, gradient_check_case, gradient_check_with_step, tiny_config, FD_STEP,
    MAX_CHECK_PARAMS,
};
pub use io::{load_model, model_from_str, model_to_string, save_model, MODEL_MAGIC, MODEL_VERSION};
pub use layers::{CausalConv, Dense, Lstm, LstmTrace};
pub use metrics::{confusion, cross_validate, evaluate, Confusion, CvReport, MetricSummary, Metrics};
pub use model::{forward, ClassProbs, DetectorModel};
pub use nets::{AeMlpNet, BiLstmNet, LinearNet, LstmNet, Net, TcnBlock, TcnNet, RECON_WEIGHT};
pub use optim::{clip_global_norm, Adam};
pub use tensor::{softmax, Tensor};
pub use train::{train, TrainReport, CLIP_NORM};
