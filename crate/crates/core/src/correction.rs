//! Decision-corrected arrival rates: from demand scenarios to a rate profile
//! whose fluid-optimal staffing is optimal for the scenarios.

use serde::{Deserialize, Serialize};

use crate::demand::DemandScenarioSet;
use crate::error::{Error, Result};
use crate::existence::{self, CertificateY, Membership, MembershipOptions, RequiredPools, CERT_TOL, EPS_STAFF};
use crate::network::ServiceNetwork;
use crate::twostage::{self, ArrivalRateProfile, StaffingSolution, TieBreak};

/// Relative tolerance of the re-solve check.
pub const CHECK_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Universal,
    DistributionDependent,
    Nonexistent,
}

/// Which activities carried the staffing into the rate profile.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ConstructionTrace {
    /// `(pool, activity)` for every staffed pool, used in all periods.
    Columns { columns: Vec<(usize, usize)> },
    /// The certificate whose witnesses were used period by period.
    Certificate { certificate: CertificateY },
    None,
}

/// Re-solve verification of a corrected profile.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    /// Staffing returned by the fluid problem at the corrected profile.
    pub fluid_b: Vec<f64>,
    /// Its cost under the scenario distribution.
    pub fluid_b_cost: f64,
    pub saa_optimum: f64,
    /// Whether `b*` itself is optimal for the fluid problem at the profile.
    pub b_star_fluid_optimal: bool,
    pub tol: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrectionResult {
    pub outcome: Outcome,
    pub lambda: Option<ArrivalRateProfile>,
    pub b_star: Vec<f64>,
    pub saa_objective: f64,
    pub trace: ConstructionTrace,
    pub check: Option<CheckReport>,
    /// Tie-break used for the fluid re-solve; corrected rates are not unique.
    pub tie_break: String,
    /// Per-period cost convention: staffing costs `c~ = c T`.
    pub periods: usize,
}

#[derive(Clone, Debug, Default)]
pub struct CorrectionOptions {
    /// Pools that must pass the parameter-only test for the universal construction.
    pub pools_from_saa: bool,
    pub membership: MembershipOptions,
}

/// Constant profile from one classwise-cheapest column per staffed pool.
pub fn construct_universal_lambda(net: &ServiceNetwork, b_star: &[f64], t: usize) -> Result<(ArrivalRateProfile, Vec<(usize, usize)>)> {
    let rep = existence::universal_existence(net, &RequiredPools::StaffedBy(b_star.to_vec()));
    if !rep.holds {
        let failing: Vec<usize> = rep.per_pool_witness.iter().filter(|w| w.activity.is_none()).map(|w| w.pool).collect();
        return Err(Error::Precondition(format!(
            "pools {failing:?} have no classwise-cheapest column within penalty; use the certificate construction"
        )));
    }
    let mut x = vec![0.0; net.k()];
    let mut columns = Vec::new();
    for w in &rep.per_pool_witness {
        let j = w.activity.expect("holds");
        x[j] = b_star[w.pool] / net.usage(j);
        columns.push((w.pool, j));
    }
    let rate = net.r_times(&x);
    Ok((ArrivalRateProfile::constant(rate, t)?, columns))
}

/// Period-by-period profile from a certificate's witnesses.
pub fn construct_lambda_from_certificate(net: &ServiceNetwork, b_star: &[f64], cert: &CertificateY) -> Result<ArrivalRateProfile> {
    let bad = existence::check_certificate(net, b_star, cert, CERT_TOL);
    if !bad.is_empty() {
        return Err(Error::Certificate(bad.join("; ")));
    }
    let mut lambda = Vec::with_capacity(cert.periods());
    for (s, ys) in cert.y.iter().enumerate() {
        let mut x = vec![0.0; net.k()];
        for h in 0..net.m() {
            if ys[h] > CERT_TOL {
                let j = cert.witnesses[s][h].ok_or_else(|| Error::Certificate(format!("period {s}, pool {h}: no witness")))?;
                x[j] = b_star[h] / net.usage(j);
            }
        }
        lambda.push(net.r_times(&x));
    }
    ArrivalRateProfile::new(lambda)
}

/// Re-solves the fluid problem at `lambda` and prices the result under `ds`.
pub fn check_profile(net: &ServiceNetwork, ds: &DemandScenarioSet, lambda: &ArrivalRateProfile, saa: &StaffingSolution) -> Result<CheckReport> {
    let fluid = twostage::solve_fluid(net, lambda, TieBreak::MinNorm)?;
    let cost = twostage::expected_cost(net, ds, &fluid.b)?;
    let at_star = twostage::expected_cost(net, &lambda.as_scenario_set(), &saa.b)?;
    let tol = CHECK_TOL * (1.0 + saa.objective.abs());
    Ok(CheckReport {
        fluid_b: fluid.b,
        fluid_b_cost: cost,
        saa_optimum: saa.objective,
        b_star_fluid_optimal: at_star <= fluid.objective + CHECK_TOL * (1.0 + fluid.objective.abs()),
        tol,
        pass: (cost - saa.objective).abs() <= tol,
    })
}

/// Full pipeline: SAA staffing, then the universal construction if the
/// parameters allow it, else a certificate of membership in `B`, else nothing.
pub fn run_algorithm1(net: &ServiceNetwork, ds: &DemandScenarioSet, opts: &CorrectionOptions) -> Result<CorrectionResult> {
    let saa = twostage::solve_saa(net, ds)?;
    let t = ds.periods();
    let b_star: Vec<f64> = saa.b.iter().map(|v| if *v > EPS_STAFF { *v } else { 0.0 }).collect();
    let required = if opts.pools_from_saa {
        RequiredPools::StaffedBy(b_star.clone())
    } else {
        RequiredPools::All
    };
    let universal = existence::universal_existence(net, &required).holds;
    let (outcome, lambda, trace) = if universal {
        let (lambda, columns) = construct_universal_lambda(net, &b_star, t)?;
        (Outcome::Universal, Some(lambda), ConstructionTrace::Columns { columns })
    } else {
        match existence::membership_in_b(net, t, &b_star, &opts.membership)? {
            Membership::InB { certificate, .. } => {
                let lambda = construct_lambda_from_certificate(net, &b_star, &certificate)?;
                (Outcome::DistributionDependent, Some(lambda), ConstructionTrace::Certificate { certificate })
            }
            Membership::NotInB { .. } => (Outcome::Nonexistent, None, ConstructionTrace::None),
            Membership::Undecided { message } => return Err(Error::Precondition(format!("membership undecided: {message}"))),
        }
    };
    let check = match &lambda {
        Some(l) => Some(check_profile(net, ds, l, &saa)?),
        None => None,
    };
    Ok(CorrectionResult {
        outcome,
        lambda,
        b_star,
        saa_objective: saa.objective,
        trace,
        check,
        tie_break: TieBreak::MinNorm.label().to_string(),
        periods: t,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demand::generate_days;
    use crate::network::{catalog, decompose};

    fn coupled() -> ServiceNetwork {
        let ed = catalog::emergency_department();
        let comp = decompose(&ed).into_iter().find(|c| c.pools.len() == 3).unwrap();
        ed.restrict(&comp).unwrap()
    }

    #[test]
    fn bridge_two_scenarios_has_no_correction() {
        let net = catalog::two_class_bridge();
        let ds = DemandScenarioSet::equal_weights(vec![vec![vec![3.0, 0.0]], vec![vec![0.0, 3.0]]]).unwrap();
        let r = run_algorithm1(&net, &ds, &CorrectionOptions::default()).unwrap();
        assert_eq!(r.outcome, Outcome::Nonexistent);
        assert!(r.lambda.is_none() && r.check.is_none());
        assert!((r.saa_objective - 18.0).abs() < 1e-9);
    }

    #[test]
    fn deterministic_alternation_is_corrected_by_a_varying_profile() {
        let net = catalog::two_class_bridge();
        let path = vec![vec![3.0, 0.0], vec![0.0, 3.0]];
        let ds = DemandScenarioSet::single(path.clone()).unwrap();
        let r = run_algorithm1(&net, &ds, &CorrectionOptions::default()).unwrap();
        assert_ne!(r.outcome, Outcome::Universal);
        assert!((r.b_star[1] - 3.0).abs() < 1e-9);
        assert!(r.check.as_ref().unwrap().pass);
        // the demand itself is a corrected profile
        let own = ArrivalRateProfile::new(path).unwrap();
        let saa = twostage::solve_saa(&net, &ds).unwrap();
        assert!(check_profile(&net, &ds, &own, &saa).unwrap().pass);
    }

    #[test]
    fn scalar_profile_is_the_quantile() {
        let net = catalog::single(1.0, 4.0, 1.0);
        let paths: Vec<Vec<Vec<f64>>> = (0..8).map(|i| vec![vec![i as f64]]).collect();
        let ds = DemandScenarioSet::equal_weights(paths).unwrap();
        let r = run_algorithm1(&net, &ds, &CorrectionOptions::default()).unwrap();
        assert_eq!(r.outcome, Outcome::Universal);
        // lower 0.75 quantile of 0..7
        assert!((r.lambda.as_ref().unwrap().lambda[0][0] - 5.0).abs() < 1e-9);
        assert!(r.check.unwrap().pass);
    }

    #[test]
    fn zero_staffing_gives_zero_profile() {
        let net = catalog::two_class_bridge();
        let (l, cols) = construct_universal_lambda(&net, &[0.0; 3], 2).unwrap();
        assert!(cols.is_empty());
        assert!(l.lambda.iter().flatten().all(|v| *v == 0.0));
        let l = construct_lambda_from_certificate(&net, &[0.0; 3], &CertificateY::zero(&net, 2)).unwrap();
        assert!(l.lambda.iter().flatten().all(|v| *v == 0.0));
        assert!(construct_universal_lambda(&net, &[0.0, 1.0, 0.0], 1).is_err());
    }

    #[test]
    fn dedicated_pools_profile_and_certificate_profile() {
        let net = catalog::two_class_bridge();
        let pruned = net
            .restrict(&crate::network::NetworkComponent {
                pools: vec![0, 2],
                classes: vec![0, 1],
                activities: vec![0, 3],
            })
            .unwrap();
        let (l, cols) = construct_universal_lambda(&pruned, &[3.0, 3.0], 1).unwrap();
        assert_eq!(cols, vec![(0, 0), (1, 1)]);
        assert_eq!(l.lambda, vec![vec![3.0, 3.0]]);
        let f = twostage::solve_fluid(&pruned, &l, TieBreak::MinNorm).unwrap();
        assert!((f.b[0] - 3.0).abs() < 1e-9 && (f.b[1] - 3.0).abs() < 1e-9);

        let cert = CertificateY {
            y: vec![vec![4.0, 5.0, 5.0]],
            witnesses: vec![vec![Some(0), Some(2), Some(3)]],
            slack_b1: vec![0.0, 1.0, 0.0],
        };
        let l = construct_lambda_from_certificate(&net, &[3.0, 0.0, 3.0], &cert).unwrap();
        assert_eq!(l.lambda, vec![vec![3.0, 3.0]]);
        let mut sol = twostage::solve_fluid(&net, &l, TieBreak::MinNorm).unwrap();
        assert!((sol.b[0] - 3.0).abs() < 1e-9 && sol.b[1].abs() < 1e-9 && (sol.b[2] - 3.0).abs() < 1e-9);
        sol.y = vec![cert.y.clone()];
        sol.z = vec![vec![vec![26.0, 27.0]]];
        assert!(twostage::verify_kkt(&net, &l, &sol).pass);

        let mut broken = cert.clone();
        broken.witnesses[0][2] = None;
        assert!(matches!(construct_lambda_from_certificate(&net, &[3.0, 0.0, 3.0], &broken), Err(Error::Certificate(_))));
    }

    #[test]
    fn coupled_chain_with_random_demand() {
        let net = coupled();
        let day = vec![vec![4.0, 7.0, 9.0, 5.0], vec![3.0, 6.0, 8.0, 6.0]];
        for seed in 0..4 {
            let ds = generate_days(&day, 1.0, 30, seed).unwrap();
            let r = run_algorithm1(&net, &ds, &CorrectionOptions::default()).unwrap();
            assert_ne!(r.outcome, Outcome::Universal);
            if r.outcome == Outcome::DistributionDependent {
                let c = r.check.unwrap();
                assert!(c.pass, "{c:?}");
            }
        }
    }

    #[test]
    fn single_scenario_always_corrects() {
        let net = coupled();
        let ds = DemandScenarioSet::single(vec![vec![2.0, 5.0], vec![6.0, 1.0], vec![3.0, 3.0]]).unwrap();
        let r = run_algorithm1(&net, &ds, &CorrectionOptions::default()).unwrap();
        assert_ne!(r.outcome, Outcome::Nonexistent);
        assert!(r.check.unwrap().pass);
    }
}
