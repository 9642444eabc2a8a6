//! Library side of the `jrank` command: file formats, representation
//! metrics, the dataset cache and output rendering.

pub mod fetch;
pub mod io;
pub mod render;
pub mod report;

pub use fetch::{fetch_dataset, FetchError, FetchOptions};
pub use io::{ApprovalMode, IoError, LoadedInstance};
pub use render::Format;
pub use report::{representation_report, RepresentationReport};
