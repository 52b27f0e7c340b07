use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Two social-group target lists and two attribute lists.
///
/// A positive effect size means `group_1` is closer to `attribute_1` (and
/// `group_2` to `attribute_2`) than the other way around.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeatTestSpec {
    pub name: String,
    #[serde(default)]
    pub version: u32,
    #[serde(default)]
    pub provenance: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub group_1_label: String,
    pub group_1: Vec<String>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub group_2_label: String,
    pub group_2: Vec<String>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub attribute_1_label: String,
    pub attribute_1: Vec<String>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub attribute_2_label: String,
    pub attribute_2: Vec<String>,
}

/// Names of the specs shipped with the crate.
pub const BUILTIN_SPECS: [&str; 3] = ["gender", "ethnicity", "religion"];

impl WeatTestSpec {
    pub fn new<S: AsRef<str>>(
        name: &str,
        group_1: &[S],
        group_2: &[S],
        attribute_1: &[S],
        attribute_2: &[S],
    ) -> Result<Self> {
        let owned = |l: &[S]| l.iter().map(|s| s.as_ref().to_owned()).collect();
        let spec = WeatTestSpec {
            name: name.to_owned(),
            version: 1,
            provenance: String::new(),
            group_1_label: String::new(),
            group_1: owned(group_1),
            group_2_label: String::new(),
            group_2: owned(group_2),
            attribute_1_label: String::new(),
            attribute_1: owned(attribute_1),
            attribute_2_label: String::new(),
            attribute_2: owned(attribute_2),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn builtin(name: &str) -> Option<Self> {
        let json = match name {
            "gender" => include_str!("../../data/weat/gender.json"),
            "ethnicity" => include_str!("../../data/weat/ethnicity.json"),
            "religion" => include_str!("../../data/weat/religion.json"),
            _ => return None,
        };
        Some(serde_json::from_str(json).expect("shipped WEAT specs are valid JSON"))
    }

    /// A builtin name or a path to a spec file.
    pub fn resolve(name_or_path: &str) -> Result<Self> {
        match Self::builtin(name_or_path) {
            Some(spec) => Ok(spec),
            None => Self::load(Path::new(name_or_path)),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: WeatTestSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn lists(&self) -> [(&'static str, &[String]); 4] {
        [
            ("group_1", &self.group_1),
            ("group_2", &self.group_2),
            ("attribute_1", &self.attribute_1),
            ("attribute_2", &self.attribute_2),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        for (name, list) in self.lists() {
            if list.is_empty() {
                return Err(Error::InvalidInput(format!("{}: {name} is empty", self.name)));
            }
            let mut seen = HashSet::new();
            if let Some(dup) = list.iter().find(|w| !seen.insert(w.as_str())) {
                return Err(Error::InvalidInput(format!(
                    "{}: {name} lists {dup:?} twice",
                    self.name
                )));
            }
        }
        let disjoint = |a: &[String], b: &[String], what: &str| {
            let a: HashSet<_> = a.iter().collect();
            match b.iter().find(|w| a.contains(w)) {
                Some(w) => Err(Error::InvalidInput(format!(
                    "{}: {w:?} appears in both {what}",
                    self.name
                ))),
                None => Ok(()),
            }
        };
        disjoint(&self.group_1, &self.group_2, "group lists")?;
        disjoint(&self.attribute_1, &self.attribute_2, "attribute lists")
    }

    /// The same test with the attribute lists exchanged.
    pub fn swap_attributes(&self) -> Self {
        let mut s = self.clone();
        std::mem::swap(&mut s.attribute_1, &mut s.attribute_2);
        std::mem::swap(&mut s.attribute_1_label, &mut s.attribute_2_label);
        s
    }

    /// The same test with the group lists exchanged.
    pub fn swap_groups(&self) -> Self {
        let mut s = self.clone();
        std::mem::swap(&mut s.group_1, &mut s.group_2);
        std::mem::swap(&mut s.group_1_label, &mut s.group_2_label);
        s
    }

    /// Every word of the four lists.
    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.lists().into_iter().flat_map(|(_, l)| l.iter().map(String::as_str))
    }
}
