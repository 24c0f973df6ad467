use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DataError {
    #[error("dataset has no rows")]
    Empty,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("missing cell at row {row}, variable `{variable}`")]
    MissingCell { row: usize, variable: String },
    #[error("variable `{variable}` has {levels} level(s); at least 2 are required")]
    TooFewLevels { variable: String, levels: usize },
    #[error("variable `{variable}` lists level `{level}` twice")]
    DuplicateLevel { variable: String, level: String },
    #[error("row {row}, variable `{variable}`: code {code} out of range")]
    CodeOutOfRange {
        row: usize,
        variable: String,
        code: usize,
    },
    #[error("row {row}, variable `{variable}`: unknown level `{level}`")]
    UnknownLevel {
        row: usize,
        variable: String,
        level: String,
    },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("Newton-Raphson did not converge after {iterations} iterations (gradient norm {grad_norm:.3e}); try a larger ridge penalty")]
    NonConvergence { iterations: usize, grad_norm: f64 },
    #[error("categories are separated by the scores, the unpenalized estimates diverge (curvature {curvature:.3e}); use a positive ridge penalty")]
    Separation { curvature: f64 },
    #[error("indicator matrix has fewer than {requested} positive principal axes ({available} found)")]
    RankDeficient { requested: usize, available: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("categories {0} and {1} have identical parameters on the display plane")]
    DegeneratePair(usize, usize),
    #[error("bounding box is empty or not finite")]
    EmptyBox,
    #[error("display plane needs two distinct dimensions below {dims}, got ({0}, {1})", .plane.0, .plane.1)]
    BadPlane { plane: (usize, usize), dims: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InversionError {
    #[error("tessellation has no edge shared by two visible regions")]
    NoInteriorEdges,
    #[error("constraint rows are inconsistent (residual {residual:.3e})")]
    InfeasibleConstraints { residual: f64 },
}
