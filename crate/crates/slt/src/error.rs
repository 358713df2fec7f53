use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch{}: {detail}", layer.map(|l| format!(" at layer {l}")).unwrap_or_default())]
    Shape { layer: Option<usize>, detail: String },

    #[error("non-finite activation in layer {layer} ({kind})")]
    NonFinite { layer: usize, kind: &'static str },

    #[error("label {label} out of range for {num_classes} classes")]
    LabelOutOfRange { label: usize, num_classes: usize },

    #[error("layer {layer} has no parameters")]
    NoParams { layer: usize },

    #[error(
        "sparsity {k} outside searchable window [{lower}, {upper}] (free-active count {required} of {available} free)"
    )]
    WindowViolation { k: f32, lower: f32, upper: f32, required: i64, available: usize },

    #[error("infeasible plan: {0}")]
    InfeasiblePlan(String),

    #[error("subset-sum instance too large: {free} free variables exceeds exact-solver bound {bound}")]
    InstanceTooLarge { free: usize, bound: usize },

    #[error("ticket format error: {0}")]
    Format(String),

    #[error("ticket version mismatch: file has {found}, this build reads {expected}")]
    VersionMismatch { found: u16, expected: u16 },

    #[error("ticket checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    Checksum { stored: u32, computed: u32 },

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn shape(layer: impl Into<Option<usize>>, detail: impl Into<String>) -> Self {
        Error::Shape { layer: layer.into(), detail: detail.into() }
    }
}
