//! Feasibility classification, density/ratio tables and the numeric
//! maximizer behind the three-robot lower bound.

use thiserror::Error;

use crate::adversary::{best_response, SweepOptions, WorstCaseReport};
use crate::engine::SimError;
use crate::rational::{rat, Rational};
use crate::strategies::{
    derive_chain_schedule, smallest_chain_f, ChainStep, ChainVariant, StrategySpec,
};

/// How hard the search problem is for a given (n, f).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Feasibility {
    /// n >= 4f + 2: two majority groups find the target in time d.
    TrivialOptimal,
    /// 2f + 1 <= n <= 4f + 1: solvable, ratio above 1 in the worst case.
    Nontrivial,
    /// n <= 2f: no algorithm can ever be certain of the target.
    Unsolvable,
}

/// Classifies `(n, f)`.
pub fn feasibility(n: usize, f: usize) -> Feasibility {
    if n >= 4 * f + 2 {
        Feasibility::TrivialOptimal
    } else if n <= 2 * f {
        Feasibility::Unsolvable
    } else {
        Feasibility::Nontrivial
    }
}

/// One row of the asymptotic density table.
#[derive(Clone, Debug)]
pub struct DensityRow {
    /// Largest faulty density the strategy family handles.
    pub beta_upper: Rational,
    pub ub_ratio: u32,
    pub lb_ratio: u32,
    pub strategy: String,
    /// Smallest admissible f in the family, used for certification runs.
    pub certified_f: usize,
    /// Spec of the certified instance.
    pub spec: StrategySpec,
}

fn chain_row(variants: &[ChainVariant]) -> (usize, Vec<ChainStep>) {
    smallest_chain_f(variants).expect("chain family has admissible instances")
}

/// The upper/lower bound table over faulty densities, with the strategy
/// certifying each upper bound at its smallest admissible f.
pub fn density_table() -> Vec<DensityRow> {
    use ChainVariant::{Rec1, Rec2};
    let mut rows = Vec::new();

    rows.push(DensityRow {
        beta_upper: rat(1, 4),
        ub_ratio: 1,
        lb_ratio: 1,
        strategy: "two_group".into(),
        certified_f: 1,
        spec: StrategySpec::TwoGroup { n: 6, f: 1 },
    });
    rows.push(DensityRow {
        beta_upper: rat(3, 10),
        ub_ratio: 2,
        lb_ratio: 2,
        strategy: "thirds".into(),
        certified_f: 2,
        spec: StrategySpec::Thirds { f: 2 },
    });
    rows.push(DensityRow {
        beta_upper: rat(1, 3),
        ub_ratio: 3,
        lb_ratio: 2,
        strategy: "fifths".into(),
        certified_f: 4,
        spec: StrategySpec::Fifths { f: 4 },
    });
    rows.push(DensityRow {
        beta_upper: rat(5, 14),
        ub_ratio: 3,
        lb_ratio: 3,
        strategy: "fifths".into(),
        certified_f: 4,
        spec: StrategySpec::Fifths { f: 4 },
    });

    let chains: [(Rational, u32, &str, Vec<ChainVariant>); 5] = [
        (rat(13, 34), 4, "chain(rec1)+thirds", vec![Rec1]),
        (rat(19, 46), 5, "chain(rec2)+fifths", vec![Rec2]),
        (rat(47, 110), 6, "chain(rec1,rec1)+thirds", vec![Rec1, Rec1]),
        (rat(65, 146), 7, "chain(rec2,rec2)+fifths", vec![Rec2, Rec2]),
        (
            rat(157, 396),
            8,
            "chain(rec1,rec1,rec1)+thirds",
            vec![Rec1, Rec1, Rec1],
        ),
    ];
    for (beta, ub, name, variants) in chains {
        let (f, schedule) = chain_row(&variants);
        rows.push(DensityRow {
            beta_upper: beta,
            ub_ratio: ub,
            lb_ratio: 3,
            strategy: name.into(),
            certified_f: f,
            spec: StrategySpec::Chain { f, schedule },
        });
    }

    rows.push(DensityRow {
        beta_upper: rat(1, 2),
        ub_ratio: 9,
        lb_ratio: 3,
        strategy: "zigzag".into(),
        certified_f: 1,
        spec: StrategySpec::Zigzag {
            n: 3,
            f: 1,
            r0: Rational::ONE,
        },
    });
    rows
}

/// Certification sweep for one density row: the structured worst pattern at
/// the row's smallest admissible instance.
pub fn certify_density_row(
    row: &DensityRow,
    m: usize,
    d: Rational,
) -> Result<WorstCaseReport, SimError> {
    let opts = SweepOptions {
        node_budget: 2_000_000,
        two_announcement_pattern: true,
        check_paths: false,
    };
    best_response(&row.spec, m, d, &opts)
}

/// Worst ratios of a strategy family across a sequence of f values.
///
/// The true asymptotic limit over all f is not computable; this finite
/// sweep is labelled empirical and is checked against the family bound.
pub fn asymptotic_probe(
    family: &str,
    fs: &[usize],
    m: usize,
    opts: &SweepOptions,
) -> Result<Vec<(usize, Rational)>, SimError> {
    let mut out = Vec::new();
    for &f in fs {
        let spec = spec_for_family(family, f).map_err(SimError::StrategyInapplicable)?;
        let report = best_response(&spec, m, Rational::ONE, opts)?;
        out.push((f, report.sup_ratio));
    }
    Ok(out)
}

fn spec_for_family(
    family: &str,
    f: usize,
) -> Result<StrategySpec, crate::strategies::StrategyError> {
    match family {
        "thirds" => Ok(StrategySpec::Thirds { f }),
        "fifths" => Ok(StrategySpec::Fifths { f }),
        name if name.starts_with("middle") => {
            let i = name
                .trim_start_matches("middle")
                .trim_matches(|c| c == '(' || c == ')' || c == 'i' || c == '=')
                .parse()
                .unwrap_or(3);
            Ok(StrategySpec::Middle { f, i })
        }
        "chain4" => derive_chain_schedule(f, &[ChainVariant::Rec1])
            .map(|schedule| StrategySpec::Chain { f, schedule })
            .map_err(|e| crate::strategies::StrategyError {
                strategy: "chain",
                constraint: e.to_string(),
            }),
        "chain5" => derive_chain_schedule(f, &[ChainVariant::Rec2])
            .map(|schedule| StrategySpec::Chain { f, schedule })
            .map_err(|e| crate::strategies::StrategyError {
                strategy: "chain",
                constraint: e.to_string(),
            }),
        other => Err(crate::strategies::StrategyError {
            strategy: "probe",
            constraint: format!("unknown family {other}"),
        }),
    }
}

/// Errors from the alpha maximizer.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum AlphaError {
    #[error("tolerance must be in (0, 1)")]
    BadTolerance,
}

/// Whether some x < y satisfy the double bound
/// (alpha-1)/2 <= x < y <= 2/(alpha-3) with y/x in the same interval.
///
/// For alpha in (3, 5) with L = (alpha-1)/2 and U = 2/(alpha-3), taking
/// x = L and y = L^2 realizes the constraints exactly when L^2 <= U, and no
/// choice works otherwise: the ratio y/x must be at least L while x >= L,
/// forcing y >= L^2.
pub fn alpha_feasible(alpha: Rational) -> bool {
    let three = Rational::int(3);
    if alpha <= three {
        return true;
    }
    if alpha >= Rational::int(5) {
        return false;
    }
    let l = (alpha - Rational::ONE) / Rational::int(2);
    let u = Rational::int(2) / (alpha - three);
    l * l <= u
}

/// Grid cross-check of [`alpha_feasible`]: samples x on a step-`1/step`
/// grid over [L, U] and tests whether the admissible y-interval
/// [max(Lx, x), min(Ux, U)] contains a grid point above x.
pub fn alpha_feasible_grid(alpha: Rational, step: u32) -> bool {
    let three = Rational::int(3);
    if alpha <= three {
        return true;
    }
    if alpha >= Rational::int(5) {
        return false;
    }
    let l = (alpha - Rational::ONE) / Rational::int(2);
    let u = Rational::int(2) / (alpha - three);
    if l > u {
        return false;
    }
    let h = Rational::new(1, step as i128);
    let mut x = ceil_to_grid(l, step);
    while x <= u {
        let y_lo_raw = (l * x).max(x);
        let y_hi = (u * x).min(u);
        let mut y = ceil_to_grid(y_lo_raw, step);
        if y <= x {
            y = x + h;
        }
        if y <= y_hi {
            return true;
        }
        x += h;
    }
    false
}

fn ceil_to_grid(v: Rational, step: u32) -> Rational {
    let scaled = v * Rational::int(step as i64);
    let num = scaled.numerator();
    let den = scaled.denominator();
    let q = num.div_euclid(den) + if num.rem_euclid(den) == 0 { 0 } else { 1 };
    Rational::new(q, step as i128)
}

/// Largest alpha in (3, 5) passing [`alpha_feasible`], within `tolerance`.
pub fn alpha_max(tolerance: Rational) -> Result<Rational, AlphaError> {
    if !tolerance.is_positive() || tolerance >= Rational::ONE {
        return Err(AlphaError::BadTolerance);
    }
    let mut lo = Rational::int(3);
    let mut hi = Rational::int(5);
    debug_assert!(alpha_feasible(lo + rat(1, 2)));
    debug_assert!(!alpha_feasible(hi));
    while hi - lo > tolerance {
        let mid = (lo + hi) / Rational::int(2);
        if alpha_feasible(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo + hi) / Rational::int(2))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn feasibility_examples() {
        assert_eq!(feasibility(6, 1), Feasibility::TrivialOptimal);
        assert_eq!(feasibility(4, 2), Feasibility::Unsolvable);
        assert_eq!(feasibility(5, 2), Feasibility::Nontrivial);
    }

    #[test]
    fn feasibility_matches_strategy_applicability() {
        for f in 0..6usize {
            for n in 1..30usize {
                let feas = feasibility(n, f);
                let two = StrategySpec::TwoGroup { n, f }.build().is_ok();
                let zig = StrategySpec::Zigzag {
                    n,
                    f,
                    r0: Rational::ONE,
                }
                .build()
                .is_ok();
                match feas {
                    Feasibility::TrivialOptimal => assert!(two && zig),
                    Feasibility::Nontrivial => assert!(!two && zig),
                    Feasibility::Unsolvable => assert!(!two && !zig),
                }
            }
        }
    }

    #[test]
    fn alpha_examples() {
        // x = 5/4, y = 7/2 satisfies all four bounds at alpha = 7/2.
        let alpha = rat(7, 2);
        let l = (alpha - Rational::ONE) / Rational::int(2);
        let u = Rational::int(2) / (alpha - Rational::int(3));
        let (x, y) = (rat(5, 4), rat(7, 2));
        assert!(l <= x && x < y && y <= u);
        assert!(l <= y / x && y / x <= u);
        assert!(alpha_feasible(alpha));

        // At alpha = 21/5 the squared lower bound exceeds 2/(alpha-3).
        let alpha = rat(21, 5);
        let l = (alpha - Rational::ONE) / Rational::int(2);
        let u = Rational::int(2) / (alpha - Rational::int(3));
        assert!(l * l > u);
        assert!(!alpha_feasible(alpha));
    }

    #[test]
    fn analytic_matches_grid_on_probes() {
        for i in 0..20 {
            let alpha = rat(340 + i, 100); // 3.40 .. 3.59 and beyond
            let alpha = alpha + rat(i, 25); // spread probes over (3.4, 4.4)
            assert_eq!(
                alpha_feasible(alpha),
                alpha_feasible_grid(alpha, 256),
                "disagreement at alpha = {alpha}"
            );
        }
    }

    #[test]
    fn alpha_max_brackets_known_root() {
        let a = alpha_max(rat(1, 100)).unwrap();
        assert!(a >= rat(392, 100) && a <= rat(394, 100), "alpha = {a}");
    }

    #[test]
    fn bad_tolerance_rejected() {
        assert_eq!(alpha_max(Rational::ZERO), Err(AlphaError::BadTolerance));
    }

    #[test]
    fn density_rows_match_published_bounds() {
        let rows = density_table();
        let betas: Vec<Rational> = rows.iter().map(|r| r.beta_upper).collect();
        assert_eq!(
            betas,
            vec![
                rat(1, 4),
                rat(3, 10),
                rat(1, 3),
                rat(5, 14),
                rat(13, 34),
                rat(19, 46),
                rat(47, 110),
                rat(65, 146),
                rat(157, 396),
                rat(1, 2),
            ]
        );
        let ubs: Vec<u32> = rows.iter().map(|r| r.ub_ratio).collect();
        assert_eq!(ubs, vec![1, 2, 3, 3, 4, 5, 6, 7, 8, 9]);
        let lbs: Vec<u32> = rows.iter().map(|r| r.lb_ratio).collect();
        assert_eq!(lbs, vec![1, 2, 2, 3, 3, 3, 3, 3, 3, 3]);
        for row in &rows {
            // Every certified instance must actually build, and its density
            // must not exceed the row's bound.
            let n = row.spec.n().unwrap();
            let beta = Rational::new(row.spec.f() as i128, n as i128);
            assert!(beta <= row.beta_upper, "{}: {beta}", row.strategy);
        }
    }
}
