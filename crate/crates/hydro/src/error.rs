use thiserror::Error;

#[derive(Debug, Error)]
pub enum HydroError {
    #[error("cannot read network: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed network description: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("malformed data file: {0}")]
    Csv(#[from] csv::Error),
    #[error("duplicate node id {0}")]
    DuplicateNode(u32),
    #[error("duplicate pipe id {0}")]
    DuplicatePipe(u32),
    #[error("pipe {pipe} references unknown node {node}")]
    UnknownNode { pipe: u32, node: u32 },
    #[error("pipe {0} connects a node to itself")]
    SelfLoop(u32),
    #[error("pipe {id}: {reason}")]
    BadPipe { id: u32, reason: String },
    #[error("node {0} has a non-finite demand")]
    BadDemand(u32),
    #[error("node {0} is not connected to the reservoir")]
    Disconnected(u32),
    #[error("loop {index} references unknown pipe {pipe}")]
    UnknownLoopPipe { index: usize, pipe: u32 },
    #[error("loop {index} is not closed at node {node}")]
    LoopNotClosed { index: usize, node: u32 },
    #[error("expected {expected} independent loops, found {found}")]
    LoopCount { expected: usize, found: usize },
    #[error("loops are not independent")]
    DependentLoops,
    #[error("invalid constant: {0}")]
    BadConstant(String),
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension { what: &'static str, expected: usize, got: usize },
    #[error("data error: {0}")]
    Data(String),
}

pub type Result<T> = std::result::Result<T, HydroError>;
