//! Desk-scale end-to-end training of a parameter predictor through the operator.

pub mod adam;
pub mod loss;
pub mod predictor;
pub mod synth;
pub mod trainer;

pub use adam::{Adam, AdamCfg};
pub use loss::{charbonnier_loss, charbonnier_loss_grad, combined_loss, CharbonnierCfg};
pub use predictor::{load_checkpoint, save_checkpoint, PredictorCfg, ToyPredictor};
pub use synth::{synth_generate, Motion, MotionFamily, Pattern, SynthSample, SynthSpec, SynthStream};
pub use trainer::{episode_loss, evaluate, loss_and_grad, train, train_from, EvalReport, Episode, TrainCfg, TrainOutcome};
