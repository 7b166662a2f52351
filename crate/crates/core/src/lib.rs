//! Neural motion message passing for multi-actor trajectory forecasting.
//!
//! The crate holds the message-passing core ([`nmmp`]), the adversarial pedestrian
//! forecaster ([`pedestrian`]), the joint pedestrian/vehicle forecaster ([`joint`]) with
//! its scene rasterizer ([`raster`]), data ingestion ([`datasets`]), training
//! ([`training`]) and evaluation ([`metrics`]). Everything runs on a small reverse-mode
//! autodiff engine ([`autodiff`]) over dense row-major matrices ([`tensor`]).

pub mod autodiff;
pub mod datasets;
pub mod error;
pub mod gradcheck;
pub mod joint;
pub mod metrics;
pub mod nmmp;
pub mod nn;
pub mod params;
pub mod pedestrian;
pub mod raster;
pub mod tensor;
pub mod training;
pub mod trajectory;

pub use datasets::{DatasetManifest, DatasetSplit, RawRecord, SynthOptions, SynthRule};
pub use error::{Error, Result};
pub use joint::{JointConfig, JointModel, JointSceneSample};
pub use metrics::MetricsReport;
pub use nmmp::{InteractionGraphState, NmmpConfig, NmmpModel, NmmpOutput};
pub use pedestrian::{PedestrianConfig, PedestrianModel, PredictionBatch};
pub use raster::{RasterImage, RasterSpec};
pub use tensor::{Matrix, Scalar};
pub use training::{Checkpoint, SystemKind, TrainConfig};
pub use trajectory::{ActorType, Point, SceneSample, TrajectoryWindow, Units};
