//! Optional JSON configuration file.
//!
//! The file holds one object per subcommand, keyed by the subcommand name,
//! whose fields are the long flag names with `_` in place of `-`:
//!
//! ```json
//! { "flow": { "n": 3, "system": "phase", "phi": 4.0, "psi": -0.1 },
//!   "experiment": { "n": 3, "N": 6.0 } }
//! ```
//!
//! A flag given on the command line overrides the file.

use std::path::Path;

use serde::Deserialize;

use crate::check::CheckArgs;
use crate::experiment::ExperimentArgs;
use crate::flow::FlowArgs;
use crate::portrait::PortraitArgs;
use crate::CliError;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub flow: Option<FlowArgs>,
    pub experiment: Option<ExperimentArgs>,
    pub portrait: Option<PortraitArgs>,
    pub check: Option<CheckArgs>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Field-wise `flag.or(file)` for structs whose fields are all `Option`s.
macro_rules! overlay {
    ($ty:ident { $($field:ident),* $(,)? } $(, vec $vfield:ident)*) => {
        impl $ty {
            pub fn overlay(self, file: Self) -> Self {
                Self {
                    $($field: self.$field.or(file.$field),)*
                    $($vfield: if self.$vfield.is_empty() { file.$vfield } else { self.$vfield },)*
                }
            }
        }
    };
}
pub(crate) use overlay;
