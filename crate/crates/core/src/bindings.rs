use std::fmt;

use serde::{Deserialize, Serialize};

use crate::kg::RangeValue;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Slot {
    Dom,
    Ran,
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Slot::Dom => "#DOM#",
            Slot::Ran => "#RAN#",
        })
    }
}

/// What a placeholder is bound to. Participants are bound as their entity ids.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "lowercase")]
pub enum Filler {
    Entity(String),
    Str(String),
    Int(i64),
}

impl Filler {
    pub fn entity_id(&self) -> Option<&str> {
        match self {
            Filler::Entity(id) => Some(id),
            _ => None,
        }
    }

    pub fn to_range(&self) -> RangeValue {
        match self {
            Filler::Entity(id) => RangeValue::Entity(id.clone()),
            Filler::Str(s) => RangeValue::Str(s.clone()),
            Filler::Int(n) => RangeValue::Int(*n),
        }
    }
}

impl From<RangeValue> for Filler {
    fn from(value: RangeValue) -> Self {
        match value {
            RangeValue::Entity(id) => Filler::Entity(id),
            RangeValue::Str(s) => Filler::Str(s),
            RangeValue::Int(n) => Filler::Int(n),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Bindings {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dom: Option<Filler>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ran: Option<Filler>,
}

impl Bindings {
    pub fn new(dom: Option<Filler>, ran: Option<Filler>) -> Self {
        Bindings { dom, ran }
    }

    pub fn get(&self, slot: Slot) -> Option<&Filler> {
        match slot {
            Slot::Dom => self.dom.as_ref(),
            Slot::Ran => self.ran.as_ref(),
        }
    }

    pub fn set(&mut self, slot: Slot, filler: Option<Filler>) {
        match slot {
            Slot::Dom => self.dom = filler,
            Slot::Ran => self.ran = filler,
        }
    }

    pub fn has(&self, slot: Slot) -> bool {
        self.get(slot).is_some()
    }

    pub fn entity_ids(&self) -> impl Iterator<Item = &str> {
        self.dom
            .iter()
            .chain(self.ran.iter())
            .filter_map(Filler::entity_id)
    }
}
