use crate::error::Result;
use crate::model::{io::read_json, LinearSystem};

const RBC_JSON: &str = include_str!("../../data/rbc.json");

/// A red-blood-cell-scale metabolic network: 46 irreversible reactions, 34 metabolites.
///
/// Reversible steps appear as forward/backward pairs; the cofactor pools make the
/// stoichiometric matrix rank deficient.
pub fn rbc_network() -> Result<LinearSystem> {
    read_json(RBC_JSON.as_bytes())
}
