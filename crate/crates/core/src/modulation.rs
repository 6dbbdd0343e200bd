//! Asynchronous modulatory transfer functions combining a receptive-field
//! drive `r` with a context signal `c`.
//!
//! `Cooperation` is `ReLU(r² + 2r + 2c(1 + |r|))`. The four alternatives are
//! returned raw, without an outer nonlinearity:
//!
//! | kind | value                 |
//! |------|-----------------------|
//! | TM1  | `½ r (1 + exp(r c))`  |
//! | TM2  | `r + r c`             |
//! | TM3  | `r (1 + tanh(r c))`   |
//! | TM4  | `r · 2^(r c)`         |

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::numerics::relu;

/// Bound on `r·c` before exponentiation in TM1/TM4; `exp(500)` is still finite.
pub const EXP_ARG_LIMIT: f64 = 500.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModulationKind {
    Cooperation,
    Tm1,
    Tm2,
    Tm3,
    Tm4,
}

impl ModulationKind {
    pub const ALL: [ModulationKind; 5] = [
        ModulationKind::Cooperation,
        ModulationKind::Tm1,
        ModulationKind::Tm2,
        ModulationKind::Tm3,
        ModulationKind::Tm4,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModulationKind::Cooperation => "cooperation",
            ModulationKind::Tm1 => "tm1",
            ModulationKind::Tm2 => "tm2",
            ModulationKind::Tm3 => "tm3",
            ModulationKind::Tm4 => "tm4",
        }
    }
}

impl fmt::Display for ModulationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModulationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModulationKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::UnknownName {
                what: "modulation kind",
                value: s.to_string(),
            })
    }
}

/// Pre-activation of the cooperation transfer function.
#[inline]
pub fn cooperation_preact(r: f64, c: f64) -> f64 {
    r * r + 2.0 * r + 2.0 * c * (1.0 + r.abs())
}

#[inline]
fn clamped_product(r: f64, c: f64) -> f64 {
    (r * c).clamp(-EXP_ARG_LIMIT, EXP_ARG_LIMIT)
}

#[inline]
pub fn modulate(kind: ModulationKind, r: f64, c: f64) -> f64 {
    match kind {
        ModulationKind::Cooperation => relu(cooperation_preact(r, c)),
        ModulationKind::Tm1 => 0.5 * r * (1.0 + clamped_product(r, c).exp()),
        ModulationKind::Tm2 => r + r * c,
        ModulationKind::Tm3 => r * (1.0 + (r * c).tanh()),
        ModulationKind::Tm4 => r * clamped_product(r, c).exp2(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const ALTERNATIVES: [ModulationKind; 4] = [
        ModulationKind::Tm1,
        ModulationKind::Tm2,
        ModulationKind::Tm3,
        ModulationKind::Tm4,
    ];

    #[test]
    fn cooperation_preact_examples() {
        assert_eq!(cooperation_preact(0.0, 1.75), 3.5);
        assert_eq!(cooperation_preact(1.0, 0.0), 3.0);
        assert_eq!(cooperation_preact(-1.0, 1.0), 3.0);
    }

    #[test]
    fn modulate_examples() {
        assert_eq!(modulate(ModulationKind::Tm2, 2.0, 0.5), 3.0);
        assert_eq!(modulate(ModulationKind::Tm4, 1.0, 1.0), 2.0);
        assert_eq!(modulate(ModulationKind::Cooperation, -2.0, -1.0), 0.0);
        assert_eq!(modulate(ModulationKind::Tm1, 2.0, 0.0), 2.0);
        assert!((modulate(ModulationKind::Tm3, 1.0, 1.0) - (1.0 + 1f64.tanh())).abs() < 1e-15);
    }

    #[test]
    fn exponent_clamp_keeps_values_finite() {
        for kind in [ModulationKind::Tm1, ModulationKind::Tm4] {
            assert!(modulate(kind, 1e3, 1e3).is_finite());
            assert!(modulate(kind, -1e3, 1e3).is_finite());
        }
        assert_eq!(modulate(ModulationKind::Tm4, 1.0, 1e6), 2f64.powi(500));
    }

    #[test]
    fn names_round_trip() {
        for k in ModulationKind::ALL {
            assert_eq!(k.name().parse::<ModulationKind>().unwrap(), k);
        }
        assert!("tm5".parse::<ModulationKind>().is_err());
        assert!("Cooperation".parse::<ModulationKind>().is_err());
    }

    proptest! {
        #[test]
        fn zero_drive_silences_alternatives(c in -1e3f64..1e3) {
            for k in ALTERNATIVES {
                prop_assert_eq!(modulate(k, 0.0, c), 0.0);
            }
        }

        #[test]
        fn zero_context_passes_drive(r in -1e3f64..1e3) {
            for k in ALTERNATIVES {
                prop_assert_eq!(modulate(k, r, 0.0), r);
            }
        }

        #[test]
        fn context_alone_drives_cooperation(c in -1e3f64..1e3) {
            prop_assert_eq!(cooperation_preact(0.0, c), 2.0 * c);
            if c != 0.0 {
                prop_assert!(cooperation_preact(0.0, c) != 0.0);
            }
        }

        #[test]
        fn strictly_increasing_in_context(r in -10f64..10.0, c1 in -10f64..10.0, dc in 1e-6f64..10.0) {
            prop_assert!(cooperation_preact(r, c1) < cooperation_preact(r, c1 + dc));
        }

        #[test]
        fn amplify_and_suppress(r in 0f64..10.0, c in 0f64..10.0, rr in -10f64..10.0) {
            prop_assert!(cooperation_preact(r, c) >= r * r + 2.0 * r);
            // c < -(r²+2r)/(2(1+|r|)) makes the pre-activation negative
            let c_low = -(rr * rr + 2.0 * rr).abs() / (2.0 * (1.0 + rr.abs())) - 1.0;
            prop_assert_eq!(modulate(ModulationKind::Cooperation, rr, c_low), 0.0);
        }
    }
}
