//! Color filter array tiles.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    R = 0,
    G = 1,
    B = 2,
}

impl Channel {
    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CfaKind {
    BayerRGGB,
    XTrans,
}

impl CfaKind {
    pub fn name(self) -> &'static str {
        match self {
            CfaKind::BayerRGGB => "BayerRGGB",
            CfaKind::XTrans => "XTrans",
        }
    }
}

impl fmt::Display for CfaKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CfaKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        match s.to_ascii_lowercase().as_str() {
            "bayerrggb" | "bayer" | "rggb" => Ok(CfaKind::BayerRGGB),
            "xtrans" | "x-trans" => Ok(CfaKind::XTrans),
            _ => Err(Error::InvalidParameter(format!("unknown CFA pattern {s:?}"))),
        }
    }
}

use Channel::{B, G, R};

const BAYER_RGGB: [Channel; 4] = [R, G, G, B];

// Fujifilm X-Trans layout as used by dcraw/RawTherapee.
const XTRANS: [Channel; 36] = [
    G, G, R, G, G, B, //
    G, G, B, G, G, R, //
    B, R, G, R, B, G, //
    G, G, B, G, G, R, //
    G, G, R, G, G, B, //
    R, B, G, B, R, G, //
];

/// A periodic tile of channel assignments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "CfaKind", from = "CfaKind")]
pub struct CfaPattern {
    kind: CfaKind,
}

impl From<CfaKind> for CfaPattern {
    fn from(kind: CfaKind) -> Self {
        CfaPattern { kind }
    }
}

impl From<CfaPattern> for CfaKind {
    fn from(p: CfaPattern) -> Self {
        p.kind
    }
}

impl CfaPattern {
    pub fn bayer_rggb() -> Self {
        CfaKind::BayerRGGB.into()
    }

    pub fn xtrans() -> Self {
        CfaKind::XTrans.into()
    }

    pub fn kind(&self) -> CfaKind {
        self.kind
    }

    pub fn tile_h(&self) -> usize {
        match self.kind {
            CfaKind::BayerRGGB => 2,
            CfaKind::XTrans => 6,
        }
    }

    pub fn tile_w(&self) -> usize {
        self.tile_h()
    }

    pub fn tile(&self) -> &'static [Channel] {
        match self.kind {
            CfaKind::BayerRGGB => &BAYER_RGGB,
            CfaKind::XTrans => &XTRANS,
        }
    }

    /// Channel sampled at image position `(x, y)`.
    #[inline]
    pub fn channel_at(&self, x: usize, y: usize) -> Channel {
        let (th, tw) = (self.tile_h(), self.tile_w());
        self.tile()[(y % th) * tw + x % tw]
    }

    /// Number of R, G, B sites in one tile.
    pub fn counts(&self) -> [usize; 3] {
        let mut n = [0; 3];
        for c in self.tile() {
            n[c.index()] += 1;
        }
        n
    }

    pub fn is_bayer(&self) -> bool {
        self.kind == CfaKind::BayerRGGB
    }
}
