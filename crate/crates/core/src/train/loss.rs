use crate::error::{Error, Result};
use crate::frame::Frame;

/// Charbonnier penalty `sqrt(x^2 + eps^2)` and the warped-loss weight.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CharbonnierCfg {
    pub epsilon: f64,
    /// Weight of the warped-frame term relative to the refined-frame term.
    pub lambda_w: f64,
}

impl Default for CharbonnierCfg {
    fn default() -> Self {
        Self {
            epsilon: 1e-6,
            lambda_w: 0.5,
        }
    }
}

impl CharbonnierCfg {
    fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || !(self.lambda_w >= 0.0) {
            return Err(Error::Domain(format!(
                "Charbonnier needs epsilon > 0 and lambda_w >= 0, got {} / {}",
                self.epsilon, self.lambda_w
            )));
        }
        Ok(())
    }
}

/// `sum_x sqrt((pred - gt)^2 + eps^2)` over every entry.
pub fn charbonnier_loss(pred: &Frame, gt: &Frame, cfg: &CharbonnierCfg) -> Result<f64> {
    Ok(charbonnier_loss_grad(pred, gt, cfg)?.0)
}

/// Loss together with its gradient with respect to `pred`.
pub fn charbonnier_loss_grad(pred: &Frame, gt: &Frame, cfg: &CharbonnierCfg) -> Result<(f64, Frame)> {
    cfg.validate()?;
    pred.ensure_same_shape(gt, "charbonnier inputs")?;
    let eps2 = cfg.epsilon * cfg.epsilon;
    let mut loss = 0.0;
    let grad: Vec<f64> = pred
        .data()
        .iter()
        .zip(gt.data())
        .map(|(p, g)| {
            let d = p - g;
            let phi = (d * d + eps2).sqrt();
            loss += phi;
            d / phi
        })
        .collect();
    let (h, w, c) = pred.shape();
    Ok((loss, Frame::new(h, w, c, grad)?))
}

/// Refined-frame loss plus `lambda_w` times the warped-frame loss.
pub fn combined_loss(refined: &Frame, warped: &Frame, gt: &Frame, cfg: &CharbonnierCfg) -> Result<f64> {
    Ok(charbonnier_loss(refined, gt, cfg)? + cfg.lambda_w * charbonnier_loss(warped, gt, cfg)?)
}
