//! Search advertisement records and the corpus JSONL format.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::join_sentences;

pub const MAX_TITLES: usize = 3;
pub const MAX_DESCRIPTIONS: usize = 2;

#[derive(Debug, Error)]
pub enum AdError {
    #[error("ad {0}: no text in title or description fields")]
    EmptyAd(String),
    #[error("ad {id}: {reason}")]
    Invalid { id: String, reason: String },
    #[error("unknown domain {0:?} (expected MS or PH)")]
    UnknownDomain(String),
    #[error("corpus line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Advertising domain: medical symptoms or public health.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Domain {
    #[serde(rename = "MS")]
    MedicalSymptoms,
    #[serde(rename = "PH")]
    PublicHealth,
}

impl Domain {
    pub const ALL: [Domain; 2] = [Domain::MedicalSymptoms, Domain::PublicHealth];

    pub fn code(self) -> &'static str {
        match self {
            Domain::MedicalSymptoms => "MS",
            Domain::PublicHealth => "PH",
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Domain {
    type Err = AdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "MS" => Ok(Domain::MedicalSymptoms),
            "PH" => Ok(Domain::PublicHealth),
            _ => Err(AdError::UnknownDomain(s.to_string())),
        }
    }
}

/// One search ad with up to three title and two description fields.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ad {
    pub id: String,
    pub query: String,
    pub domain: Domain,
    #[serde(rename = "title")]
    pub titles: Vec<String>,
    #[serde(rename = "description")]
    pub descriptions: Vec<String>,
    pub impressions: u64,
    pub clicks: u64,
    #[serde(default)]
    pub url: Option<String>,
}

impl Ad {
    /// Clicks over impressions; `None` for an ad never shown.
    pub fn ctr(&self) -> Option<f64> {
        (self.impressions > 0).then(|| self.clicks as f64 / self.impressions as f64)
    }

    pub fn validate(&self) -> Result<(), AdError> {
        let invalid = |reason: &str| AdError::Invalid {
            id: self.id.clone(),
            reason: reason.to_string(),
        };
        if self.clicks > self.impressions {
            return Err(invalid("clicks exceed impressions"));
        }
        if self.titles.len() > MAX_TITLES {
            return Err(invalid("more than 3 title fields"));
        }
        if self.descriptions.len() > MAX_DESCRIPTIONS {
            return Err(invalid("more than 2 description fields"));
        }
        if !self.titles.iter().any(|t| !t.trim().is_empty()) {
            return Err(invalid("no non-empty title field"));
        }
        if !self.descriptions.iter().any(|d| !d.trim().is_empty()) {
            return Err(invalid("no non-empty description field"));
        }
        Ok(())
    }
}

/// Title and description fields as one paragraph: fields are joined with
/// ". " (or a space after existing terminal punctuation), empty fields are
/// skipped.
pub fn concat_text(ad: &Ad) -> Result<String, AdError> {
    let text = join_sentences(
        ad.titles
            .iter()
            .chain(ad.descriptions.iter())
            .map(String::as_str),
    );
    if text.is_empty() {
        return Err(AdError::EmptyAd(ad.id.clone()));
    }
    Ok(text)
}

/// Reads a JSONL corpus, one ad per non-blank line, validating each ad.
pub fn read_corpus(reader: impl BufRead) -> Result<Vec<Ad>, AdError> {
    let mut ads = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let ad: Ad =
            serde_json::from_str(&line).map_err(|source| AdError::Parse { line: i + 1, source })?;
        ad.validate()?;
        ads.push(ad);
    }
    Ok(ads)
}

pub fn write_corpus(mut writer: impl Write, ads: &[Ad]) -> Result<(), AdError> {
    for ad in ads {
        let line = serde_json::to_string(ad).expect("ads always serialize");
        writeln!(writer, "{line}")?;
    }
    Ok(())
}

#[cfg(test)]
pub(crate) fn test_ad(id: &str, query: &str, impressions: u64, clicks: u64) -> Ad {
    Ad {
        id: id.to_string(),
        query: query.to_string(),
        domain: Domain::MedicalSymptoms,
        titles: vec![format!("Title {id}")],
        descriptions: vec![format!("Description for {id}.")],
        impressions,
        clicks,
        url: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ad(titles: &[&str], descriptions: &[&str]) -> Ad {
        Ad {
            titles: titles.iter().map(|s| s.to_string()).collect(),
            descriptions: descriptions.iter().map(|s| s.to_string()).collect(),
            ..test_ad("a", "q", 10, 1)
        }
    }

    #[test]
    fn concat_joins_fields() {
        assert_eq!(concat_text(&ad(&["A"], &["B", "C"])).unwrap(), "A. B. C");
        assert_eq!(concat_text(&ad(&["A", ""], &["", "C!"])).unwrap(), "A. C!");
        assert!(matches!(
            concat_text(&ad(&["", " "], &[""])),
            Err(AdError::EmptyAd(_))
        ));
    }

    #[test]
    fn validation() {
        assert!(ad(&["A"], &["B"]).validate().is_ok());
        assert!(ad(&[""], &["B"]).validate().is_err());
        assert!(ad(&["A"], &[""]).validate().is_err());
        assert!(ad(&["A", "B", "C", "D"], &["B"]).validate().is_err());
        let mut bad = ad(&["A"], &["B"]);
        bad.clicks = 11;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn ctr() {
        assert_eq!(test_ad("a", "q", 200, 10).ctr(), Some(0.05));
        assert_eq!(test_ad("a", "q", 0, 0).ctr(), None);
    }

    #[test]
    fn corpus_json_fields() {
        let line = r#"{"id":"1","query":"cough","domain":"PH","title":["T1","T2"],"description":["D"],"impressions":100,"clicks":3,"url":null}"#;
        let ads = read_corpus(line.as_bytes()).unwrap();
        assert_eq!(ads[0].domain, Domain::PublicHealth);
        assert_eq!(ads[0].titles, ["T1", "T2"]);
        let mut out = Vec::new();
        write_corpus(&mut out, &ads).unwrap();
        assert_eq!(String::from_utf8(out).unwrap().trim(), line);
    }

    #[test]
    fn unknown_domain_rejected() {
        let line = r#"{"id":"1","query":"q","domain":"XX","title":["T"],"description":["D"],"impressions":1,"clicks":0}"#;
        assert!(matches!(read_corpus(line.as_bytes()), Err(AdError::Parse { line: 1, .. })));
        assert!("xx".parse::<Domain>().is_err());
        assert_eq!("ms".parse::<Domain>().unwrap(), Domain::MedicalSymptoms);
    }
}
