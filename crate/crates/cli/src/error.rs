use spillcast_core::artifact::ArtifactError;
use spillcast_core::carrycap::CarryCapError;
use spillcast_core::epimodel::ModelError;
use spillcast_core::eval::EvalError;
use spillcast_core::ingest::IngestError;
use spillcast_core::onset::OnsetError;
use spillcast_core::pipeline::PipelineError;
use spillcast_core::severity::SeverityError;
use spillcast_core::trend::TrendError;
use spillcast_core::weathercast::ArError;

/// Exit code for bad input files, arguments or insufficient data.
pub const EXIT_INPUT: i32 = 2;
/// Exit code for numerical failures during fitting or simulation.
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Numerical(m) => m,
        }
    }

    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }
}

fn model_is_numerical(e: &ModelError) -> bool {
    !matches!(e, ModelError::LengthMismatch { .. } | ModelError::ZeroSteps)
}

fn ar_is_numerical(e: &ArError) -> bool {
    matches!(e, ArError::SingularDesign)
}

fn carrycap_is_numerical(e: &CarryCapError) -> bool {
    match e {
        CarryCapError::DegenerateBin(_) => true,
        CarryCapError::Model(m) => model_is_numerical(m),
        CarryCapError::Ar(a) => ar_is_numerical(a),
        _ => false,
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        let numerical = match &e {
            PipelineError::Model(m) => model_is_numerical(m),
            PipelineError::CarryCap(c) => carrycap_is_numerical(c),
            PipelineError::Ar(a) => ar_is_numerical(a),
            PipelineError::Onset(o) => matches!(o, OnsetError::ZeroBandwidth(_)),
            PipelineError::Severity(s) => matches!(
                s,
                SeverityError::ZeroEvidence(_)
                    | SeverityError::ZeroPriorMass
                    | SeverityError::ZeroBandwidth(_)
            ),
            PipelineError::Eval(ev) => matches!(ev, EvalError::UnnormalizedDist(_)),
            PipelineError::Ingest(_) | PipelineError::Invalid(_) => false,
        };
        let msg = e.to_string();
        if numerical {
            CliError::Numerical(msg)
        } else {
            CliError::Input(msg)
        }
    }
}

impl From<TrendError> for CliError {
    fn from(e: TrendError) -> Self {
        let numerical = match &e {
            TrendError::Model(m) => model_is_numerical(m),
            TrendError::CarryCap(c) => carrycap_is_numerical(c),
            TrendError::DegenerateResiduals => true,
            _ => false,
        };
        let msg = e.to_string();
        if numerical {
            CliError::Numerical(msg)
        } else {
            CliError::Input(msg)
        }
    }
}

macro_rules! via_pipeline {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                PipelineError::from(e).into()
            }
        }
    )*};
}

via_pipeline!(
    IngestError,
    ModelError,
    CarryCapError,
    ArError,
    OnsetError,
    SeverityError,
    EvalError
);

impl From<ArtifactError> for CliError {
    fn from(e: ArtifactError) -> Self {
        CliError::Input(format!("model file: {e}"))
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(format!("i/o error: {e}"))
    }
}
