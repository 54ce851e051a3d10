//! Data-driven acceleration of electrochemical life tests.
//!
//! Two pipelines live here:
//!
//! * [`pcdp`] reconstructs full performance-characterization data (EIS, I-V,
//!   CV and LSV curves, and the aging indicators derived from them) from four
//!   impedance values measured at two preset frequencies.
//! * [`lpalt`] predicts late-stage aging indicators from the difference
//!   between two early check-ups, using two-point features searched by
//!   [`sisso`] and random-forest regressors from [`forest`].
//!
//! [`numerics`] holds the shared kernels, [`model`] the data model and
//! [`data_io`] the on-disk dataset format plus a synthetic generator used as
//! an offline ground truth.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data_io;
pub mod forest;
pub mod lpalt;
pub mod model;
pub mod numerics;
pub mod pcdp;
pub mod seed;
pub mod sisso;

pub use forest::{Forest, ForestParams, HyperGrid, MaxFeatures, TreeParams};
pub use model::{
    AgingIndicators, CheckUp, CurveKind, DeviceClass, EisSpectrum, Indicator, LifeTest,
    SampledCurve, SplitSpec, StageSelector, StageSpec, StageTime, TestConditions, TimeUnit, Unit,
};
pub use numerics::{GridSpec, MetricsReport};
pub use sisso::{FeatureFormula, SissoConfig};
