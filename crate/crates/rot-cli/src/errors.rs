//! Error-to-exit-code mapping.
//!
//! 0 success, 2 config error, 3 data error, 4 missing artifact,
//! 5 model/layer mismatch, 6 corrupt file; 1 for anything unclassified.

use std::io;
use std::path::Path;

use rot_core::control::ControlError;
use rot_core::eval::EvalError;
use rot_core::format::FormatError;
use rot_core::linalg::LinalgError;
use rot_core::localization::LocalizationError;
use rot_core::model::ModelError;
use rot_core::populations::PopulationError;
use rot_core::reading::ReadingError;
use rot_core::stimuli::StimuliError;

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_DATA: u8 = 3;
pub const EXIT_MISSING: u8 = 4;
pub const EXIT_MISMATCH: u8 = 5;
pub const EXIT_CORRUPT: u8 = 6;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new(EXIT_CONFIG, message)
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self::new(EXIT_DATA, message)
    }

    /// Filesystem reads at the CLI boundary: a missing path is a missing
    /// artifact, anything else is unclassified.
    pub fn from_io(path: &Path, err: io::Error) -> Self {
        let message = format!("{}: {err}", path.display());
        if err.kind() == io::ErrorKind::NotFound {
            Self::new(EXIT_MISSING, message)
        } else {
            Self::new(1, message)
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.message)
    }
}

fn format_code(err: &FormatError) -> u8 {
    match err {
        FormatError::Corrupt(_) => EXIT_CORRUPT,
        FormatError::Io(e) if e.kind() == io::ErrorKind::NotFound => EXIT_MISSING,
        FormatError::Io(_) => 1,
    }
}

fn model_code(err: &ModelError) -> u8 {
    match err {
        ModelError::InvalidConfig(_) | ModelError::NonFinite { .. } => EXIT_CONFIG,
        ModelError::TokenOutOfRange { .. } | ModelError::LayerOutOfRange { .. } => EXIT_MISMATCH,
        ModelError::EmptySequence
        | ModelError::SequenceTooShort
        | ModelError::SequenceTooLong { .. } => EXIT_DATA,
        ModelError::Lexicon(_) => EXIT_CORRUPT,
        ModelError::File(e) => format_code(e),
    }
}

fn stimuli_code(err: &StimuliError) -> u8 {
    match err {
        StimuliError::UnknownTemplate(_)
        | StimuliError::InsufficientStimuli { .. }
        | StimuliError::InvalidStimulus(_)
        | StimuliError::MixedStimulusKinds => EXIT_CONFIG,
        StimuliError::NotEnoughSamples { .. } | StimuliError::TaskFileInvalid(_) => EXIT_DATA,
        StimuliError::Model(e) => model_code(e),
    }
}

fn population_code(err: &PopulationError) -> u8 {
    match err {
        PopulationError::LayerOutOfRange { .. }
        | PopulationError::DumpMissingLayer { .. }
        | PopulationError::DimensionMismatch { .. } => EXIT_MISMATCH,
        PopulationError::EmptyLayerSelection => EXIT_CONFIG,
        PopulationError::EmptyPrompt { .. }
        | PopulationError::DumpMissingPrompt { .. }
        | PopulationError::Linalg(_) => EXIT_DATA,
        PopulationError::Model(e) => model_code(e),
        PopulationError::File(e) => format_code(e),
    }
}

fn reading_code(err: &ReadingError) -> u8 {
    match err {
        ReadingError::Degenerate { .. } | ReadingError::Empty | ReadingError::Linalg(_) => {
            EXIT_DATA
        }
        ReadingError::NormViolation { .. } => EXIT_CORRUPT,
        ReadingError::File(e) => format_code(e),
    }
}

fn localization_code(err: &LocalizationError) -> u8 {
    match err {
        LocalizationError::LayerMismatch { .. } | LocalizationError::DimensionMismatch { .. } => {
            EXIT_MISMATCH
        }
        LocalizationError::EmptyResponse
        | LocalizationError::LengthMismatch { .. }
        | LocalizationError::MissingPrefixRecord { .. }
        | LocalizationError::Linalg(_) => EXIT_DATA,
        LocalizationError::Model(e) => model_code(e),
        LocalizationError::Population(e) => population_code(e),
    }
}

fn control_code(err: &ControlError) -> u8 {
    match err {
        ControlError::LayerMismatch { .. } | ControlError::DimensionMismatch { .. } => {
            EXIT_MISMATCH
        }
        ControlError::InvalidPolicy(_) => EXIT_CONFIG,
        ControlError::Linalg(_) => EXIT_DATA,
        ControlError::Model(e) => model_code(e),
        ControlError::File(e) => format_code(e),
    }
}

fn eval_code(err: &EvalError) -> u8 {
    match err {
        EvalError::EmptyInput | EvalError::TooFewRuns { .. } | EvalError::TaskFileInvalid(_) => {
            EXIT_DATA
        }
        EvalError::MissingPolicy { .. }
        | EvalError::VariantOutOfRange { .. }
        | EvalError::InvalidTemplate(_) => EXIT_CONFIG,
        EvalError::Stimuli(e) => stimuli_code(e),
        EvalError::Control(e) => control_code(e),
        EvalError::Model(e) => model_code(e),
    }
}

macro_rules! impl_from {
    ($ty:ty, $code:path) => {
        impl From<$ty> for CliError {
            fn from(err: $ty) -> Self {
                CliError::new($code(&err), err.to_string())
            }
        }
    };
}

impl_from!(ModelError, model_code);
impl_from!(StimuliError, stimuli_code);
impl_from!(PopulationError, population_code);
impl_from!(ReadingError, reading_code);
impl_from!(LocalizationError, localization_code);
impl_from!(ControlError, control_code);
impl_from!(EvalError, eval_code);
impl_from!(FormatError, format_code);

impl From<LinalgError> for CliError {
    fn from(err: LinalgError) -> Self {
        CliError::new(EXIT_DATA, err.to_string())
    }
}
