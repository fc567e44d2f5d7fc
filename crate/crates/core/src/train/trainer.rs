use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{Frame, FrameStack};
use crate::gdconv::{gdconv_backward, gdconv_forward, FreedomVariant, GDConvParams};
use crate::interp::InterpKind;
use crate::metrics::psnr;

use super::adam::{Adam, AdamCfg};
use super::loss::{charbonnier_loss_grad, CharbonnierCfg};
use super::predictor::{PredictorCfg, ToyPredictor};
use super::synth::{SynthSample, SynthStream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainCfg {
    /// Stack indices sampled by the operator.
    pub reference_indices: Vec<usize>,
    /// Stack indices fed to the predictor.
    pub generation_indices: Vec<usize>,
    pub kind: InterpKind,
    pub steps: usize,
    pub variant: FreedomVariant,
    pub n_points: usize,
    pub hidden: usize,
    pub layers: usize,
    pub adam: AdamCfg,
    pub loss: CharbonnierCfg,
    /// Seeds the predictor initialization.
    pub init_seed: u64,
}

impl Default for TrainCfg {
    fn default() -> Self {
        Self {
            reference_indices: vec![1, 2],
            generation_indices: vec![0, 1, 2, 3],
            kind: InterpKind::poly(),
            steps: 2000,
            variant: FreedomVariant::Full,
            n_points: 4,
            hidden: 32,
            layers: 4,
            adam: AdamCfg::default(),
            loss: CharbonnierCfg::default(),
            init_seed: 0,
        }
    }
}

impl TrainCfg {
    pub fn predictor_cfg(&self) -> PredictorCfg {
        PredictorCfg {
            hidden: self.hidden,
            layers: self.layers,
            ..PredictorCfg::new(self.generation_indices.len(), self.n_points, self.reference_indices.len())
        }
    }

    fn validate(&self, stack_len: usize) -> Result<()> {
        if self.reference_indices.len() < 2 {
            return Err(Error::Arity("at least two reference frames are required".into()));
        }
        if self.generation_indices.is_empty() {
            return Err(Error::Arity("generation indices must be non-empty".into()));
        }
        for &i in self.reference_indices.iter().chain(&self.generation_indices) {
            if i >= stack_len {
                return Err(Error::Index(format!("frame index {i} outside stack of {stack_len}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub predictor: ToyPredictor,
    /// Loss of every step, before that step's update.
    pub loss_curve: Vec<f64>,
}

/// One sequence split into the predictor input, the operator input and the target.
pub struct Episode {
    pub generation: FrameStack,
    pub reference: FrameStack,
    pub target: Frame,
    /// Target time on the reference stack's index axis.
    pub target_z: f64,
}

impl Episode {
    pub fn new(sample: SynthSample, target_time: f64, cfg: &TrainCfg) -> Result<Self> {
        cfg.validate(sample.stack.len())?;
        let reference = sample.stack.select(&cfg.reference_indices)?;
        let target_z = reference.time_to_index(target_time)?;
        Ok(Self {
            generation: sample.stack.select(&cfg.generation_indices)?,
            reference,
            target: sample.target,
            target_z,
        })
    }

    /// Parameters the predictor proposes for this episode under `variant`.
    pub fn params(&self, predictor: &ToyPredictor, variant: FreedomVariant) -> Result<GDConvParams> {
        predictor.predictor_forward(&self.generation)?.with_freedom(variant, self.target_z)
    }

    /// Pixelwise mean of the reference frames.
    pub fn baseline(&self) -> Frame {
        let frames = self.reference.frames();
        let (h, w, c) = frames[0].shape();
        let k = frames.len() as f64;
        let mut acc = vec![0.0; h * w * c];
        for f in frames {
            acc.iter_mut().zip(f.data()).for_each(|(a, v)| *a += v / k);
        }
        Frame::new(h, w, c, acc).expect("mean has the frame shape")
    }
}

/// Loss and predictor gradient for one episode.
pub fn loss_and_grad(predictor: &ToyPredictor, episode: &Episode, cfg: &TrainCfg) -> Result<(f64, Vec<f64>)> {
    let tape = predictor.forward_tape(&episode.generation)?;
    let params = predictor.params_from_tape(&tape)?.with_freedom(cfg.variant, episode.target_z)?;
    let out = gdconv_forward(&episode.reference, &params, &cfg.kind)?;
    let (loss, upstream) = charbonnier_loss_grad(&out, &episode.target, &cfg.loss)?;
    let grads = gdconv_backward(&episode.reference, &params, &cfg.kind, &upstream)?;
    Ok((loss, predictor.backward(&tape, &grads)?))
}

/// Loss only, for finite-difference checks.
pub fn episode_loss(predictor: &ToyPredictor, episode: &Episode, cfg: &TrainCfg) -> Result<f64> {
    let params = episode.params(predictor, cfg.variant)?;
    let out = gdconv_forward(&episode.reference, &params, &cfg.kind)?;
    super::loss::charbonnier_loss(&out, &episode.target, &cfg.loss)
}

/// Single-sample Adam on the stream's sequences `0..steps`.
pub fn train(stream: &SynthStream, cfg: &TrainCfg) -> Result<TrainOutcome> {
    cfg.validate(stream.frame_times.len())?;
    let mut predictor = ToyPredictor::new(cfg.predictor_cfg(), cfg.init_seed)?;
    train_from(stream, cfg, &mut predictor).map(|loss_curve| TrainOutcome { predictor, loss_curve })
}

/// Continues training an existing predictor; returns the loss curve.
pub fn train_from(stream: &SynthStream, cfg: &TrainCfg, predictor: &mut ToyPredictor) -> Result<Vec<f64>> {
    cfg.validate(stream.frame_times.len())?;
    if predictor.cfg() != &cfg.predictor_cfg() {
        return Err(Error::Shape("predictor architecture differs from the training configuration".into()));
    }
    let mut adam = Adam::new(cfg.adam, predictor.params().len());
    let mut curve = Vec::with_capacity(cfg.steps);
    for step in 0..cfg.steps {
        let episode = Episode::new(stream.sample(step as u64)?, stream.target_time, cfg)?;
        let (loss, grad) = loss_and_grad(predictor, &episode, cfg)?;
        if !loss.is_finite() {
            return Err(Error::NonFinite(step));
        }
        adam.step(predictor.params_mut(), &grad);
        curve.push(loss);
    }
    Ok(curve)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub samples: usize,
    /// Mean PSNR of the synthesized frame against the target.
    pub model_psnr: f64,
    /// Mean PSNR of the reference-frame average against the target.
    pub baseline_psnr: f64,
}

impl EvalReport {
    pub fn gain(&self) -> f64 {
        self.model_psnr - self.baseline_psnr
    }
}

/// Mean PSNR over the stream's sequences `0..samples`.
pub fn evaluate(predictor: &ToyPredictor, stream: &SynthStream, cfg: &TrainCfg, samples: usize) -> Result<EvalReport> {
    if samples == 0 {
        return Err(Error::Domain("evaluation needs at least one sample".into()));
    }
    let (mut model, mut base) = (0.0, 0.0);
    for i in 0..samples {
        let episode = Episode::new(stream.sample(i as u64)?, stream.target_time, cfg)?;
        let params = episode.params(predictor, cfg.variant)?;
        let out = gdconv_forward(&episode.reference, &params, &cfg.kind)?;
        model += psnr(&out, &episode.target, 1.0)?;
        base += psnr(&episode.baseline(), &episode.target, 1.0)?;
    }
    Ok(EvalReport {
        samples,
        model_psnr: model / samples as f64,
        baseline_psnr: base / samples as f64,
    })
}
