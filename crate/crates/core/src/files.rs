//! Interchange documents: packings, difference matrices and pattern codes
//! as UTF-8 JSON.

use serde::{Deserialize, Serialize};

use crate::abelian::Group;
use crate::error::{Error, Result};
use crate::oospc::{Codeword, PatternSet};
use crate::packing::{Block, Certificate, Packing};

/// Packing document: `group` (moduli), `K`, `blocks` as coordinate tuples,
/// the optional claimed leave shape and an optional certificate.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PackingFile {
    pub group: Vec<u32>,
    #[serde(rename = "K")]
    pub k: Vec<usize>,
    pub blocks: Vec<Vec<Vec<i64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub claimed_leave: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<Certificate>,
}

impl PackingFile {
    pub fn from_packing(p: &Packing, certificate: Option<Certificate>) -> Self {
        PackingFile {
            group: p.group.moduli().to_vec(),
            k: p.sizes.clone(),
            blocks: p
                .blocks
                .iter()
                .map(|b| {
                    b.elements()
                        .iter()
                        .map(|e| e.coords().iter().map(|&c| c as i64).collect())
                        .collect()
                })
                .collect(),
            claimed_leave: p.claimed_leave.clone(),
            certificate,
        }
    }

    pub fn to_packing(&self) -> Result<Packing> {
        let group = Group::new(self.group.clone())?;
        let blocks = self
            .blocks
            .iter()
            .map(|b| {
                let elems = b
                    .iter()
                    .map(|coords| group.elem(coords))
                    .collect::<Result<Vec<_>>>()?;
                Block::new(&group, elems)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut p = Packing::new(group, self.k.clone(), blocks)?;
        p.claimed_leave = self.claimed_leave.clone();
        Ok(p)
    }
}

/// Pattern-code document: dims, one 0/1 string per matrix row, weights,
/// and the correlation bound (always 1 here).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OospcFile {
    pub dims: [u32; 2],
    pub codewords: Vec<Vec<String>>,
    pub weights: Vec<usize>,
    pub lambda: u32,
}

impl OospcFile {
    pub fn from_patterns(ps: &PatternSet) -> Self {
        OospcFile {
            dims: [ps.rows, ps.cols],
            codewords: ps
                .codewords
                .iter()
                .map(|cw| {
                    (0..ps.rows)
                        .map(|i| {
                            (0..ps.cols)
                                .map(|j| if cw.get(i, j) { '1' } else { '0' })
                                .collect()
                        })
                        .collect()
                })
                .collect(),
            weights: ps.weights(),
            lambda: 1,
        }
    }

    pub fn to_patterns(&self) -> Result<PatternSet> {
        let [rows, cols] = self.dims;
        let mut codewords = Vec::with_capacity(self.codewords.len());
        for (idx, rows_text) in self.codewords.iter().enumerate() {
            if rows_text.len() != rows as usize {
                return Err(Error::Format(format!(
                    "codeword {idx}: {} rows, expected {rows}",
                    rows_text.len()
                )));
            }
            let mut cw = Codeword::zero(rows, cols);
            for (i, row) in rows_text.iter().enumerate() {
                if row.len() != cols as usize {
                    return Err(Error::Format(format!(
                        "codeword {idx} row {i}: {} columns, expected {cols}",
                        row.len()
                    )));
                }
                for (j, ch) in row.chars().enumerate() {
                    match ch {
                        '0' => {}
                        '1' => cw.set(i as u32, j as u32, true),
                        _ => {
                            return Err(Error::Format(format!(
                                "codeword {idx} row {i}: invalid character {ch:?}"
                            )))
                        }
                    }
                }
            }
            codewords.push(cw);
        }
        Ok(PatternSet {
            rows,
            cols,
            codewords,
        })
    }
}

/// Recognized document kinds, for `verify FILE` dispatch.
pub enum Document {
    Packing(PackingFile),
    Dm(crate::diffmat::DmDocument),
    Oospc(OospcFile),
}

/// Sniffs the document type from its fields: `rows`+`moduli` is a
/// difference matrix, `dims`+`codewords` a pattern code, `group`+`blocks`
/// a packing.
pub fn parse_document(text: &str) -> Result<Document> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    let obj = value
        .as_object()
        .ok_or_else(|| Error::Format("expected a JSON object".into()))?;
    if obj.contains_key("moduli") && obj.contains_key("rows") {
        Ok(Document::Dm(serde_json::from_value(value)?))
    } else if obj.contains_key("dims") && obj.contains_key("codewords") {
        Ok(Document::Oospc(serde_json::from_value(value)?))
    } else if obj.contains_key("group") && obj.contains_key("blocks") {
        Ok(Document::Packing(serde_json::from_value(value)?))
    } else {
        Err(Error::Format(
            "unrecognized document (expected a packing, difference matrix or pattern code)".into(),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::oospc::to_patterns;

    #[test]
    fn packing_roundtrip() {
        let p = catalog::base_bdp(2, 36).unwrap();
        let doc = PackingFile::from_packing(&p, None);
        let text = serde_json::to_string_pretty(&doc).unwrap();
        let parsed = match parse_document(&text).unwrap() {
            Document::Packing(f) => f,
            _ => panic!("wrong kind"),
        };
        let back = parsed.to_packing().unwrap();
        assert_eq!(back.group, p.group);
        assert_eq!(back.blocks, p.blocks);
        assert_eq!(back.claimed_leave, p.claimed_leave);
    }

    #[test]
    fn oospc_roundtrip() {
        let ps = to_patterns(&catalog::optimal_4x24()).unwrap();
        let doc = OospcFile::from_patterns(&ps);
        let text = serde_json::to_string(&doc).unwrap();
        let parsed = match parse_document(&text).unwrap() {
            Document::Oospc(f) => f,
            _ => panic!("wrong kind"),
        };
        let back = parsed.to_patterns().unwrap();
        assert_eq!(back, ps);
        assert_eq!(doc.lambda, 1);
    }

    #[test]
    fn rejects_malformed() {
        assert!(parse_document("[]").is_err());
        assert!(parse_document("{\"a\": 1}").is_err());
        let bad = OospcFile {
            dims: [2, 3],
            codewords: vec![vec!["00".into(), "000".into()]],
            weights: vec![0],
            lambda: 1,
        };
        assert!(bad.to_patterns().is_err());
    }
}
