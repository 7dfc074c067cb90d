use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecoderKind {
    /// Dense 3D convolutions over the full radar grid.
    Dense,
    /// Convolutions restricted to the active set of the matching encoder stage; the output is zero
    /// elsewhere.
    Sparse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdversarialForm {
    LogForm,
    LeastSquares,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeneratorConfig {
    pub encoder_stages: usize,
    pub decoder_stages: usize,
    /// Channels of the first encoder stage; each further stage doubles them.
    pub base_channels: usize,
    pub r_in: f64,
    pub r_out: f64,
    pub kernel: usize,
    pub leaky_slope: f64,
    pub decoder: DecoderKind,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            encoder_stages: 4,
            decoder_stages: 1,
            base_channels: 16,
            r_in: 0.05,
            r_out: 0.4,
            kernel: 3,
            leaky_slope: 0.2,
            decoder: DecoderKind::Dense,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let (e, d) = (self.encoder_stages, self.decoder_stages);
        if e == 0 || d > e {
            return Err(Error::Config(format!(
                "generator needs 1 <= decoder_stages <= encoder_stages, got E={e} D={d}"
            )));
        }
        if self.base_channels == 0 || self.kernel.is_multiple_of(2) {
            return Err(Error::Config(
                "generator.base_channels must be positive and generator.kernel odd".into(),
            ));
        }
        if !(self.r_in > 0.0 && self.r_out > 0.0) {
            return Err(Error::Config("resolutions must be positive".into()));
        }
        let implied = self.r_in * f64::powi(2.0, (e - d) as i32);
        if (implied - self.r_out).abs() > 1e-9 * self.r_out {
            return Err(Error::Config(format!(
                "resolution alignment violated: r_in * 2^(E-D) = {implied} but r_out = {}",
                self.r_out
            )));
        }
        Ok(())
    }

    /// Channels of encoder stage `s` (1-based); stage 0 is the input and uses `base_channels`
    /// whenever a decoder stage produces it.
    pub fn stage_channels(&self, s: usize) -> usize {
        self.base_channels << s.saturating_sub(1)
    }

    /// Ratio between radar and LiDAR voxel sizes.
    pub fn scale_factor(&self) -> usize {
        1 << (self.encoder_stages - self.decoder_stages)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiscriminatorConfig {
    pub scales: usize,
    pub blocks: usize,
    pub base_channels: usize,
    pub kernel: usize,
    pub leaky_slope: f64,
}

impl Default for DiscriminatorConfig {
    fn default() -> Self {
        Self {
            scales: 3,
            blocks: 3,
            base_channels: 16,
            kernel: 3,
            leaky_slope: 0.2,
        }
    }
}

impl DiscriminatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.scales == 0 || self.blocks == 0 || self.base_channels == 0 || self.kernel.is_multiple_of(2) {
            return Err(Error::Config(format!("invalid discriminator settings {self:?}")));
        }
        Ok(())
    }

    /// Feature taps per scale: every block output plus the score map.
    pub fn taps(&self) -> usize {
        self.blocks + 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossWeights {
    /// Weight of the adversarial term; 0 disables the discriminator altogether when `lambda_fm`
    /// is also 0.
    pub lambda_gan: f64,
    pub lambda_fm: f64,
    pub lambda_l1: f64,
    pub adversarial: AdversarialForm,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_gan: 1.0,
            lambda_fm: 10.0,
            lambda_l1: 100.0,
            adversarial: AdversarialForm::LogForm,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if [self.lambda_gan, self.lambda_fm, self.lambda_l1]
            .iter()
            .any(|w| !(*w >= 0.0 && w.is_finite()))
        {
            return Err(Error::Config(format!("loss weights must be >= 0, got {self:?}")));
        }
        Ok(())
    }

    pub fn uses_discriminator(&self) -> bool {
        self.lambda_gan > 0.0 || self.lambda_fm > 0.0
    }
}
