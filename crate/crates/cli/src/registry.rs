//! Experiment catalog.

use crate::config::Check;

#[derive(Clone, Copy, Debug)]
pub struct Experiment {
    pub name: &'static str,
    pub summary: &'static str,
    /// Library routine the experiment exercises, as `module::function`.
    pub operation: &'static str,
    pub checks: &'static [Check],
}

/// Sorted by name.
pub const CATALOG: &[Experiment] = &[
    Experiment {
        name: "cole_hopf_oracle",
        summary: "Picard fixed point against the Cole-Hopf reference solution",
        operation: "oracle::cole_hopf",
        checks: &[Check::OracleCompare],
    },
    Experiment {
        name: "fixed_point",
        summary: "successive approximations to the fixed point; records and residual only",
        operation: "scheme::run_picard",
        checks: &[],
    },
    Experiment {
        name: "gronwall",
        summary: "difference of two linear transport solutions bounded by the coefficient gaps",
        operation: "verify::check_gronwall",
        checks: &[Check::Gronwall],
    },
    Experiment {
        name: "heat_scaling",
        summary: "Hölder-norm decay rate of the heat semigroup on lacunary data",
        operation: "heat::holder_scaling_probe",
        checks: &[Check::HeatScaling],
    },
    Experiment {
        name: "interpolation",
        summary: "Hölder seminorm interpolated between the sup norm and the gradient",
        operation: "norms::interpolation_gap",
        checks: &[Check::Interpolation],
    },
    Experiment {
        name: "schauder",
        summary: "interior parabolic Schauder bounds on the fixed point over a shrinking ball",
        operation: "verify::check_schauder_instance",
        checks: &[Check::Schauder],
    },
    Experiment {
        name: "short_time",
        summary: "increments contract geometrically below the initial horizon",
        operation: "verify::check_short_time",
        checks: &[Check::ShortTime],
    },
    Experiment {
        name: "uniform_estimates",
        summary: "maximum principle and uniform derivative bounds on every iterate",
        operation: "verify::check_uniform",
        checks: &[Check::Uniform],
    },
];

pub fn find(name: &str) -> Option<&'static Experiment> {
    CATALOG.iter().find(|e| e.name == name)
}

/// Catalog text printed by `burgers list`.
pub fn listing() -> String {
    let width = CATALOG.iter().map(|e| e.name.len()).max().unwrap_or(0);
    let mut out = String::new();
    for e in CATALOG {
        let checks: Vec<&str> = e.checks.iter().map(|c| c.name()).collect();
        out.push_str(&format!(
            "{:width$}  {}  [{}; checks: {}]\n",
            e.name,
            e.summary,
            e.operation,
            if checks.is_empty() { "none".to_string() } else { checks.join(", ") }
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Address of a library routine named in the catalog.
    fn resolve(operation: &str) -> Option<usize> {
        use burgers_core::{heat, norms, oracle, scheme, verify};
        Some(match operation {
            "oracle::cole_hopf" => oracle::cole_hopf as *const () as usize,
            "scheme::run_picard" => scheme::run_picard as *const () as usize,
            "verify::check_gronwall" => verify::check_gronwall as *const () as usize,
            "heat::holder_scaling_probe" => heat::holder_scaling_probe as *const () as usize,
            "norms::interpolation_gap" => norms::interpolation_gap as *const () as usize,
            "verify::check_schauder_instance" => verify::check_schauder_instance as *const () as usize,
            "verify::check_short_time" => verify::check_short_time as *const () as usize,
            "verify::check_uniform" => verify::check_uniform as *const () as usize,
            _ => return None,
        })
    }

    #[test]
    fn catalog_is_sorted_and_unique() {
        assert!(CATALOG.windows(2).all(|w| w[0].name < w[1].name));
    }

    #[test]
    fn required_entries_present() {
        for name in ["uniform_estimates", "short_time", "gronwall"] {
            assert!(find(name).is_some(), "{name}");
        }
    }

    #[test]
    fn every_operation_resolves() {
        for e in CATALOG {
            assert!(resolve(e.operation).is_some_and(|p| p != 0), "{} -> {}", e.name, e.operation);
        }
    }

    #[test]
    fn listing_is_stable() {
        assert_eq!(listing(), listing());
        assert_eq!(listing().lines().count(), CATALOG.len());
    }
}
