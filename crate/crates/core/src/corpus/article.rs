use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coarse political orientation of an outlet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Liberal,
    Neutral,
    Conservative,
}

impl Orientation {
    pub const ALL: [Orientation; 3] = [
        Orientation::Liberal,
        Orientation::Neutral,
        Orientation::Conservative,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Orientation::Liberal => "liberal",
            Orientation::Neutral => "neutral",
            Orientation::Conservative => "conservative",
        }
    }
}

impl fmt::Display for Orientation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Orientation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "liberal" => Ok(Orientation::Liberal),
            "neutral" => Ok(Orientation::Neutral),
            "conservative" => Ok(Orientation::Conservative),
            other => Err(Error::InvalidInput(format!("unknown orientation {other:?}"))),
        }
    }
}

/// Five-level outlet rating.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubLabel {
    Left,
    LeanLeft,
    Center,
    LeanRight,
    Right,
}

impl SubLabel {
    /// The coarse group this rating aggregates into.
    pub fn orientation(self) -> Orientation {
        match self {
            SubLabel::Left | SubLabel::LeanLeft => Orientation::Liberal,
            SubLabel::Center => Orientation::Neutral,
            SubLabel::LeanRight | SubLabel::Right => Orientation::Conservative,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SubLabel::Left => "left",
            SubLabel::LeanLeft => "lean-left",
            SubLabel::Center => "center",
            SubLabel::LeanRight => "lean-right",
            SubLabel::Right => "right",
        }
    }
}

impl FromStr for SubLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "left" => Ok(SubLabel::Left),
            "lean-left" => Ok(SubLabel::LeanLeft),
            "center" => Ok(SubLabel::Center),
            "lean-right" => Ok(SubLabel::LeanRight),
            "right" => Ok(SubLabel::Right),
            other => Err(Error::InvalidInput(format!("unknown sub-label {other:?}"))),
        }
    }
}

/// One news text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Article {
    pub id: String,
    pub text: String,
    pub outlet: String,
    pub orientation: Orientation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sub_label: Option<SubLabel>,
    /// Publication year; absent when no date could be extracted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub year: Option<i32>,
    pub language: String,
}

impl Article {
    pub fn new(
        id: impl Into<String>,
        text: impl Into<String>,
        outlet: impl Into<String>,
        orientation: Orientation,
        year: Option<i32>,
    ) -> Result<Self> {
        let article = Article {
            id: id.into(),
            text: text.into(),
            outlet: outlet.into(),
            orientation,
            sub_label: None,
            year,
            language: "en".to_owned(),
        };
        article.validate()?;
        Ok(article)
    }

    pub fn with_sub_label(mut self, sub_label: SubLabel) -> Result<Self> {
        self.sub_label = Some(sub_label);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.text.trim().is_empty() {
            return Err(Error::InvalidInput(format!(
                "article {:?} has empty text",
                self.id
            )));
        }
        if let Some(sub) = self.sub_label {
            if sub.orientation() != self.orientation {
                return Err(Error::InvalidInput(format!(
                    "sub-label {} is inconsistent with orientation {}",
                    sub.as_str(),
                    self.orientation
                )));
            }
        }
        Ok(())
    }
}

/// Raw line-delimited record as found in input files.
#[derive(Debug, Deserialize)]
pub(crate) struct ArticleRecord {
    #[serde(default)]
    id: Option<String>,
    text: String,
    #[serde(default)]
    outlet: String,
    orientation: String,
    #[serde(default)]
    sub_label: Option<String>,
    #[serde(default)]
    date: Option<serde_json::Value>,
    #[serde(default)]
    language: Option<String>,
}

/// Outcome of date parsing for one record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum DateField {
    Missing,
    Unparseable,
    Year(i32),
}

impl ArticleRecord {
    pub(crate) fn into_article(self, line: usize) -> Result<(Article, DateField)> {
        // `orientation` may carry either the coarse group or a five-level rating.
        let (orientation, implied_sub) = match self.orientation.parse::<Orientation>() {
            Ok(o) => (o, None),
            Err(_) => {
                let sub = self
                    .orientation
                    .parse::<SubLabel>()
                    .map_err(|e| Error::record(line, e.to_string()))?;
                (sub.orientation(), Some(sub))
            }
        };
        let explicit_sub = match self.sub_label.as_deref() {
            Some(s) if !s.trim().is_empty() => Some(
                s.parse::<SubLabel>()
                    .map_err(|e| Error::record(line, e.to_string()))?,
            ),
            _ => None,
        };
        if let (Some(a), Some(b)) = (implied_sub, explicit_sub) {
            if a != b {
                return Err(Error::record(
                    line,
                    format!("orientation {} conflicts with sub_label {}", a.as_str(), b.as_str()),
                ));
            }
        }
        let date = match &self.date {
            None | Some(serde_json::Value::Null) => DateField::Missing,
            Some(serde_json::Value::String(s)) => match parse_year(s) {
                Some(y) => DateField::Year(y),
                None => DateField::Unparseable,
            },
            Some(serde_json::Value::Number(n)) => match n.as_i64() {
                Some(y) if (1000..=9999).contains(&y) => DateField::Year(y as i32),
                _ => DateField::Unparseable,
            },
            Some(_) => DateField::Unparseable,
        };
        let article = Article {
            id: self.id.unwrap_or_else(|| format!("line-{line}")),
            text: self.text,
            outlet: self.outlet,
            orientation,
            sub_label: explicit_sub.or(implied_sub),
            year: match date {
                DateField::Year(y) => Some(y),
                _ => None,
            },
            language: self
                .language
                .filter(|l| !l.trim().is_empty())
                .unwrap_or_else(|| "und".to_owned()),
        };
        article
            .validate()
            .map_err(|e| Error::record(line, e.to_string()))?;
        Ok((article, date))
    }
}

/// Extract the year from an ISO-8601 date, date-time, year-month or bare year.
pub fn parse_year(raw: &str) -> Option<i32> {
    use chrono::{DateTime, Datelike, NaiveDate, NaiveDateTime};

    let s = raw.trim();
    if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return Some(d.year());
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.year());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(dt.year());
        }
    }
    let bare_year = |y: &str| -> Option<i32> {
        (y.len() == 4 && y.bytes().all(|b| b.is_ascii_digit()))
            .then(|| y.parse().ok())
            .flatten()
    };
    if let Some((y, m)) = s.split_once('-') {
        let month: u32 = m.parse().ok()?;
        return (m.len() == 2 && (1..=12).contains(&month))
            .then(|| bare_year(y))
            .flatten();
    }
    bare_year(s)
}
