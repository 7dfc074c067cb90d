//! Conditional adversarial radar synthesis: generator, multi-scale discriminator, objectives,
//! training loop and a blur baseline.

mod baseline;
mod check;
mod config;
mod data;
mod discriminator;
mod generator;
mod losses;
mod train;

pub use baseline::BlurBaseline;
pub use check::{joint_objective, model_gradcheck, GanModels, MODEL_PROBES};
pub use config::{AdversarialForm, DecoderKind, DiscriminatorConfig, GeneratorConfig, LossWeights};
pub use data::{GeneratorInput, Sample};
pub use discriminator::{Discriminator, ScaleOutput};
pub use generator::{Binding, Generator};
pub use losses::{
    discriminator_loss, feature_matching_loss, generator_adv_loss, l1_loss, sum_terms, total_generator_loss,
};
pub use train::{bev_scores, evaluate_generator, train, EpochRecord, EvalSummary, StepLosses, Trainer};
