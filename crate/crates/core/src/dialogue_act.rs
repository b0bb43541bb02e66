//! Hierarchical dialogue-act taxonomy.
//!
//! Every class is the root-to-leaf path of a three-tier tree (`da.<group>.<leaf>`).
//! The `Act` group has no leaves of its own and is represented by the path `da.Act`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Second tier of the taxonomy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ActGroup {
    Que,
    Ans,
    Inf,
    Act,
    Req,
    Cont,
    Form,
    Inv,
}

impl ActGroup {
    pub fn as_str(self) -> &'static str {
        match self {
            ActGroup::Que => "Que",
            ActGroup::Ans => "Ans",
            ActGroup::Inf => "Inf",
            ActGroup::Act => "Act",
            ActGroup::Req => "Req",
            ActGroup::Cont => "Cont",
            ActGroup::Form => "Form",
            ActGroup::Inv => "Inv",
        }
    }
}

macro_rules! acts {
    ($( $variant:ident => ($group:ident, $leaf:expr, $swbd:expr) ),* $(,)?) => {
        /// A dialogue-act class.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum DialogueAct {
            $( $variant ),*
        }

        impl DialogueAct {
            /// Every class, leaves first in table order, followed by the leafless `da.Act`.
            pub const ALL: &'static [DialogueAct] = &[ $( DialogueAct::$variant ),* ];

            pub fn group(self) -> ActGroup {
                match self { $( DialogueAct::$variant => ActGroup::$group ),* }
            }

            /// Third-tier tag; `None` only for the leafless `Act` group.
            pub fn leaf(self) -> Option<&'static str> {
                match self { $( DialogueAct::$variant => $leaf ),* }
            }

            /// Informational Switchboard tags.
            pub fn swbd_tags(self) -> &'static str {
                match self { $( DialogueAct::$variant => $swbd ),* }
            }
        }
    };
}

acts! {
    QueYesno => (Que, Some("Yesno"), "qy, qy^d, ^d"),
    QueWh => (Que, Some("Wh"), "qw, qw^d"),
    QueWhOb => (Que, Some("WhOb"), ""),
    QueWhSub => (Que, Some("WhSub"), ""),
    QueChoice => (Que, Some("Choice"), "qrr"),
    QueHowabout => (Que, Some("Howabout"), "qo"),
    AnsAffirm => (Ans, Some("Affirm"), "ny, na, aa, aap_am"),
    AnsDeny => (Ans, Some("Deny"), "nn, ng, ar, arp_nd"),
    AnsAgree => (Ans, Some("Agree"), "aa, aap_am"),
    AnsRefuse => (Ans, Some("Refuse"), "ar, arp_nd"),
    AnsSuspend => (Ans, Some("Suspend"), "^h"),
    AnsTosummons => (Ans, Some("Tosummons"), ""),
    AnsClash => (Ans, Some("Clash"), ""),
    InfObj => (Inf, Some("Obj"), "sd, no"),
    InfSubj => (Inf, Some("Subj"), "sv, ^q, no"),
    InfRepeat => (Inf, Some("Repeat"), "b^m"),
    InfClarif => (Inf, Some("Clarif"), "sd, no, sv, ^q, b^m"),
    ReqRepeat => (Req, Some("Repeat"), "br"),
    ReqClarif => (Req, Some("Clarif"), ""),
    ReqSummons => (Req, Some("Summons"), ""),
    ReqAction => (Req, Some("Action"), "ad"),
    ReqVerif => (Req, Some("Verif"), "bf"),
    ReqSugg => (Req, Some("Sugg"), "ad"),
    ContRhet => (Cont, Some("Rhet"), "qh"),
    ContHm => (Cont, Some("Hm"), "b, ba"),
    ContQue => (Cont, Some("Que"), "bh"),
    ContAckn => (Cont, Some("Ackn"), "bk"),
    ContCollab => (Cont, Some("Collab"), "^2"),
    FormHello => (Form, Some("Hello"), "fp"),
    FormBye => (Form, Some("Bye"), "fc"),
    FormOpen => (Form, Some("Open"), "fp"),
    FormClose => (Form, Some("Close"), "fc"),
    FormThx => (Form, Some("Thx"), "ft"),
    FormSorry => (Form, Some("Sorry"), "fa"),
    FormNw => (Form, Some("Nw"), "bd"),
    InvInv => (Inv, Some("Inv"), "%, x"),
    InvOther => (Inv, Some("Other"), "fo_o_fw_by_bc, t1, t3"),
    Act => (Act, None, ""),
}

impl DialogueAct {
    /// Number of leaf classes in the taxonomy.
    pub const LEAF_COUNT: usize = 37;

    /// Root-to-leaf class string, e.g. `da.Que.Yesno`.
    pub fn path(self) -> String {
        match self.leaf() {
            Some(leaf) => format!("da.{}.{}", self.group().as_str(), leaf),
            None => format!("da.{}", self.group().as_str()),
        }
    }

    /// Whether this class lies under a dotted class prefix such as `da.Que` or `da.Que.Wh`.
    ///
    /// Prefixes match whole path components only, except that a leaf prefix also
    /// matches leaves that extend it (`da.Que.Wh` covers `WhOb` and `WhSub`).
    pub fn matches_prefix(self, prefix: &str) -> bool {
        let path = self.path();
        if path == prefix {
            return true;
        }
        let Some(rest) = path.strip_prefix(prefix) else {
            return false;
        };
        if rest.starts_with('.') {
            return true;
        }
        // leaf extension: prefix has three components
        prefix.matches('.').count() == 2
    }

    pub fn is_question(self) -> bool {
        self.group() == ActGroup::Que
    }
}

impl fmt::Display for DialogueAct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.path())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("unknown dialogue act class `{0}`")]
pub struct UnknownAct(pub String);

impl FromStr for DialogueAct {
    type Err = UnknownAct;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DialogueAct::ALL
            .iter()
            .copied()
            .find(|act| act.path() == s)
            .ok_or_else(|| UnknownAct(s.to_string()))
    }
}

/// Checks that a class prefix names at least one class of the taxonomy.
pub fn is_valid_prefix(prefix: &str) -> bool {
    DialogueAct::ALL.iter().any(|act| act.matches_prefix(prefix))
}

impl Serialize for DialogueAct {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.path())
    }
}

impl<'de> Deserialize<'de> for DialogueAct {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn taxonomy_has_37_leaves() {
        let leaves = DialogueAct::ALL.iter().filter(|a| a.leaf().is_some()).count();
        assert_eq!(leaves, DialogueAct::LEAF_COUNT);
        let paths: HashSet<_> = DialogueAct::ALL.iter().map(|a| a.path()).collect();
        assert_eq!(paths.len(), DialogueAct::ALL.len());
    }

    #[test]
    fn path_round_trip() {
        for act in DialogueAct::ALL {
            assert_eq!(act.path().parse::<DialogueAct>().unwrap(), *act);
        }
        assert_eq!(DialogueAct::QueYesno.path(), "da.Que.Yesno");
        assert_eq!(DialogueAct::Act.path(), "da.Act");
        assert!("da.Que.Nope".parse::<DialogueAct>().is_err());
    }

    #[test]
    fn prefix_matching() {
        assert!(DialogueAct::QueWhOb.matches_prefix("da.Que"));
        assert!(DialogueAct::QueWhOb.matches_prefix("da.Que.Wh"));
        assert!(DialogueAct::QueWhOb.matches_prefix("da"));
        assert!(!DialogueAct::QueYesno.matches_prefix("da.Que.Wh"));
        assert!(!DialogueAct::InfObj.matches_prefix("da.In"));
        assert!(DialogueAct::AnsAffirm.matches_prefix("da.Ans.Affirm"));
        assert!(is_valid_prefix("da.Form.Thx"));
        assert!(!is_valid_prefix("da.Foo"));
    }
}
