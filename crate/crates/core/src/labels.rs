//! Class vocabularies seen by the classifier.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::annotations::ComponentClass;

pub const OTHER: &str = "other";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelScheme {
    /// metal_piece, battery, pcb, glass
    #[default]
    FourClass,
    /// battery vs everything else
    BatteryVsOther,
}

impl LabelScheme {
    pub fn classes(self) -> Vec<String> {
        match self {
            LabelScheme::FourClass => ComponentClass::ALL.iter().map(|c| c.as_str().to_string()).collect(),
            LabelScheme::BatteryVsOther => vec![ComponentClass::Battery.as_str().to_string(), OTHER.to_string()],
        }
    }

    pub fn num_classes(self) -> usize {
        match self {
            LabelScheme::FourClass => 4,
            LabelScheme::BatteryVsOther => 2,
        }
    }

    pub fn index_of(self, class: ComponentClass) -> usize {
        match self {
            LabelScheme::FourClass => ComponentClass::ALL.iter().position(|&c| c == class).unwrap(),
            LabelScheme::BatteryVsOther => usize::from(class != ComponentClass::Battery),
        }
    }

    pub fn label_of(self, class: ComponentClass) -> String {
        self.classes()[self.index_of(class)].clone()
    }

    /// Maps four-class names onto this scheme's names.
    pub fn mapping(self) -> BTreeMap<String, String> {
        ComponentClass::ALL
            .iter()
            .map(|&c| (c.as_str().to_string(), self.label_of(c)))
            .collect()
    }

    pub fn from_classes(classes: &[String]) -> Option<LabelScheme> {
        [LabelScheme::FourClass, LabelScheme::BatteryVsOther]
            .into_iter()
            .find(|s| s.classes() == classes)
    }
}
