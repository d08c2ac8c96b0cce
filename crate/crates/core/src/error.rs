use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot decode image {path}: {message}")]
    Decode { path: PathBuf, message: String },

    #[error("image is {width}x{height}, at least 3x3 pixels are required")]
    DegenerateImage { width: u32, height: u32 },

    #[error("format error: {0}")]
    Format(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),

    #[error("no feature row for item `{0}`")]
    MissingItem(String),

    #[error("item `{item}`: {source}")]
    Item {
        item: String,
        #[source]
        source: Box<Error>,
    },

    #[error("item sets differ: {} only in the first set {:?}, {} only in the second set {:?}", only_left.len(), only_left, only_right.len(), only_right)]
    ItemMismatch { only_left: Vec<String>, only_right: Vec<String> },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn for_item(item: impl Into<String>, source: Error) -> Self {
        Error::Item { item: item.into(), source: Box::new(source) }
    }
}
