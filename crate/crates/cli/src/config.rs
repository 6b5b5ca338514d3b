use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::Failure;

/// Parameter file: an optional output directory and one section per command.
/// Section keys mirror the long flag names.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ConfigFile {
    pub out: Option<PathBuf>,
    pub smd: Option<crate::smd::SmdArgs>,
    pub zo: Option<crate::zo::ZoArgs>,
    pub casino: Option<crate::online::CasinoArgs>,
    pub traffic_equilibrium: Option<crate::traffic::EquilibriumArgs>,
    pub traffic_logit: Option<crate::traffic::LogitArgs>,
    pub traffic_dual: Option<crate::traffic::DualArgs>,
    pub traffic_check: Option<crate::traffic::CheckArgs>,
    pub bench: Option<crate::bench::BenchArgs>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Failure::InvalidConfig(format!("config: cannot read {}: {e}", path.display()))
        })?;
        serde_json::from_str(&text)
            .map_err(|e| Failure::InvalidConfig(format!("config: {}: {e}", path.display())))
    }
}

/// Fills every field not given on the command line from the config section.
macro_rules! merge_fields {
    ($cli:ident, $file:ident; $($opt:ident),* ; $($flag:ident),*) => {{
        $( if $cli.$opt.is_none() { $cli.$opt = $file.$opt.take(); } )*
        $( $cli.$flag |= $file.$flag; )*
    }};
}
pub(crate) use merge_fields;

/// A required value, or an invalid-config failure naming the field.
pub fn required<T>(v: Option<T>, field: &str) -> Result<T, Failure> {
    v.ok_or_else(|| {
        Failure::InvalidConfig(format!(
            "{field}: missing (give --{field} or set it in the config file)"
        ))
    })
}

pub fn check(ok: bool, field: &str, msg: &str) -> Result<(), Failure> {
    if ok {
        Ok(())
    } else {
        Err(Failure::InvalidConfig(format!("{field}: {msg}")))
    }
}

/// Seeds `base .. base + count`, or an explicit list.
pub fn seed_list(
    count: Option<usize>,
    base: Option<u64>,
    list: Option<Vec<u64>>,
) -> Result<Vec<u64>, Failure> {
    if let Some(list) = list {
        check(!list.is_empty(), "seed-list", "must not be empty")?;
        return Ok(list);
    }
    let count = count.unwrap_or(1);
    check(count >= 1, "seeds", "must be at least 1")?;
    let base = base.unwrap_or(0);
    Ok((base..base + count as u64).collect())
}
