//! Built-in scenario corpus, embedded at compile time from `scenarios/`.

pub struct Builtin {
    pub name: &'static str,
    pub description: &'static str,
    pub toml: &'static str,
}

macro_rules! builtin {
    ($name:literal, $desc:literal) => {
        Builtin {
            name: $name,
            description: $desc,
            toml: include_str!(concat!("../scenarios/", $name, ".toml")),
        }
    };
}

pub const BUILTINS: &[Builtin] = &[
    builtin!(
        "ab-quantization",
        "vortex of flux 2π: holonomy 1 on loops around it, plus a flux sweep"
    ),
    builtin!("ab-half-flux", "vortex of flux π: holonomy −1"),
    builtin!(
        "shielded-electric",
        "moving obstacle shielding an electric field: cross-section and spatial fluxes"
    ),
    builtin!("shielded-magnetic", "moving shielded vortex: spatial flux equals b(t)"),
    builtin!(
        "vortex-equivalence",
        "vortex fluxes b and b + 2π: equivalent, winding 1, gauge round trip"
    ),
    builtin!(
        "vortex-half-quantum",
        "vortex fluxes b and b + π: inequivalent with witness −1"
    ),
    builtin!(
        "gauge-round-trip",
        "moving obstacle, smooth potential and a winding gauge: reconstruction error"
    ),
    builtin!("ray-family", "broken rays reflecting off two obstacles"),
    builtin!("broken-ray-gauge", "200 broken rays: transforms of a gauge pair agree"),
    builtin!(
        "yang-mills-radon",
        "non-abelian Radon transform: unitarity and gauge invariance"
    ),
    builtin!(
        "schrodinger-gauge-pair",
        "Schrödinger boundary data of a gauge pair on a 64² grid"
    ),
    builtin!(
        "dtn-conjugation",
        "D-to-N map of a pair related by a boundary-trivial gauge"
    ),
];

pub fn find(name: &str) -> Option<&'static Builtin> {
    BUILTINS.iter().find(|b| b.name == name)
}
