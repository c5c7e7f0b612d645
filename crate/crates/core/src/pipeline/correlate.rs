use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::io::CorrelationRow;
use crate::pdb_ingest::SmeFeatureTable;
use crate::stats::{pearson_r, StatsError};

/// Pearson r for every `(CDER column, SME column)` pair over the sample ids
/// present in both tables, joined with optional importances by feature name.
/// Rows are ordered CDER-major. Constant columns give `NaN`.
pub fn correlate(
    cder: &SmeFeatureTable,
    sme: &SmeFeatureTable,
    cder_importance: Option<&[(String, f64)]>,
    sme_importance: Option<&[(String, f64)]>,
) -> Result<Vec<CorrelationRow>> {
    let matched: Vec<(&[f64], &[f64])> = cder
        .ids
        .iter()
        .zip(&cder.rows)
        .filter_map(|(id, row)| sme.get(id).map(|s| (row.as_slice(), s)))
        .collect();
    if matched.len() < 2 {
        return Err(Error::Data(format!(
            "need at least two sample ids shared by both feature tables, found {}",
            matched.len()
        )));
    }
    let column = |k: usize, left: bool| -> Vec<f64> {
        matched
            .iter()
            .map(|(c, s)| if left { c[k] } else { s[k] })
            .collect()
    };
    let lookup = |imp: Option<&[(String, f64)]>| -> HashMap<String, f64> {
        imp.map(|v| v.iter().cloned().collect()).unwrap_or_default()
    };
    let (ci, si) = (lookup(cder_importance), lookup(sme_importance));

    let sme_cols: Vec<Vec<f64>> = (0..sme.columns.len()).map(|k| column(k, false)).collect();
    let mut out = Vec::with_capacity(cder.columns.len() * sme.columns.len());
    for (a, a_name) in cder.columns.iter().enumerate() {
        let x = column(a, true);
        for (b, b_name) in sme.columns.iter().enumerate() {
            let r = match pearson_r(&x, &sme_cols[b]) {
                Ok(r) => r,
                Err(StatsError::ZeroVariance) => f64::NAN,
                Err(e) => return Err(e.into()),
            };
            out.push(CorrelationRow {
                cder_feature: a_name.clone(),
                sme_feature: b_name.clone(),
                r,
                cder_importance: ci.get(a_name).copied(),
                sme_importance: si.get(b_name).copied(),
            });
        }
    }
    Ok(out)
}
