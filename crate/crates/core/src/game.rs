//! Backward induction over the two-period game.
//!
//! Period 2 is summarized by a stage-value table (one row per possible
//! owner, plus the non-builder row). Period 1 is a second-price auction in
//! which each builder bids its willingness to pay: its profit as owner minus
//! the smallest surplus it would keep as a loser.

use rayon::prelude::*;
use serde::Serialize;

use crate::distributions::ValueDistribution;
use crate::error::{Error, Result};
use crate::numerics::RandomStream;
use crate::resale::{baseline_jit, stage_values, Budget, Method, ResaleMechanism, ResalePolicy, StageValues};

#[derive(Debug, Clone, PartialEq)]
pub struct GameSpec {
    pub builders: Vec<ValueDistribution>,
    pub policy: ResalePolicy,
    pub method: Method,
    pub budget: Budget,
    pub stream: RandomStream,
    pub include_nonbuilder: bool,
}

impl GameSpec {
    pub fn new(
        builders: Vec<ValueDistribution>,
        policy: ResalePolicy,
        method: Method,
        budget: Budget,
        stream: RandomStream,
    ) -> Result<Self> {
        let spec = Self { builders, policy, method, budget, stream, include_nonbuilder: true };
        spec.validate()?;
        Ok(spec)
    }

    pub fn without_nonbuilder(mut self) -> Self {
        self.include_nonbuilder = false;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.builders.len() < 2 {
            return Err(Error::Domain(format!("a game needs at least two builders, got {}", self.builders.len())));
        }
        // Building each owner's mechanism checks the policy constraints.
        for owner in 0..self.builders.len() {
            ResaleMechanism::new(owner, &self.builders, self.policy)?;
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.builders.len()
    }

    fn owner_stream(&self, owner: Option<usize>) -> RandomStream {
        self.stream.derive(owner.map_or(0, |o| o as u64 + 1))
    }
}

/// Stage values for every builder-owner and for the non-builder owner.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageTable {
    pub owners: Vec<StageValues>,
    pub baseline: StageValues,
}

impl StageTable {
    pub fn get(&self, owner: Option<usize>) -> &StageValues {
        match owner {
            Some(i) => &self.owners[i],
            None => &self.baseline,
        }
    }

    /// Rows in report order: builder owners first, then the non-builder.
    pub fn rows(&self) -> impl Iterator<Item = &StageValues> {
        self.owners.iter().chain(std::iter::once(&self.baseline))
    }
}

pub fn stage_table(spec: &GameSpec) -> Result<StageTable> {
    spec.validate()?;
    let n = spec.n();
    let mut rows: Vec<Result<StageValues>> = (0..=n)
        .into_par_iter()
        .map(|k| {
            if k < n {
                stage_values(k, &spec.builders, spec.policy, spec.method, spec.budget, spec.owner_stream(Some(k)))
            } else {
                baseline_jit(&spec.builders, spec.method, spec.budget, spec.owner_stream(None))
            }
        })
        .collect();
    let baseline = rows.pop().expect("baseline row")?;
    let owners = rows.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(StageTable { owners, baseline })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WtpVector {
    pub wtp: Vec<f64>,
    pub nonbuilder_wtp: f64,
    /// Numerical error of each entry (stderr for Monte Carlo, tolerance
    /// bound for quadrature).
    pub error: Vec<f64>,
    /// Owner scenario (`None` = non-builder) attaining each builder's
    /// minimum losing surplus.
    pub worst_rival: Vec<Option<usize>>,
}

pub fn wtp_from_table(table: &StageTable, include_nonbuilder: bool, rel_tol: f64) -> WtpVector {
    let n = table.owners.len();
    let mut wtp = Vec::with_capacity(n);
    let mut error = Vec::with_capacity(n);
    let mut worst_rival = Vec::with_capacity(n);
    for i in 0..n {
        let mut scenarios: Vec<Option<usize>> = (0..n).filter(|&j| j != i).map(Some).collect();
        if include_nonbuilder {
            scenarios.push(None);
        }
        let (who, s_min) = scenarios
            .into_iter()
            .map(|j| (j, table.get(j).s[i]))
            .fold((None, f64::INFINITY), |acc, (j, s)| if s < acc.1 { (j, s) } else { acc });
        let own = &table.owners[i];
        wtp.push(own.p - s_min);
        worst_rival.push(who);
        let rival = table.get(who);
        let err = match (&own.stderr, &rival.stderr) {
            (Some(a), Some(b)) => (a.p * a.p + b.s[i] * b.s[i]).sqrt(),
            _ => rel_tol * (own.p.abs() + s_min.abs()),
        };
        error.push(err);
    }
    WtpVector { wtp, nonbuilder_wtp: table.baseline.p, error, worst_rival }
}

pub fn wtp_vector(spec: &GameSpec) -> Result<WtpVector> {
    Ok(wtp_from_table(&stage_table(spec)?, spec.include_nonbuilder, spec.budget.rel_tol))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumResult {
    pub stage_table: StageTable,
    pub wtp: Vec<f64>,
    pub wtp_error: Vec<f64>,
    pub nonbuilder_wtp: f64,
    pub winner: usize,
    pub price: f64,
    pub shares_ea: Vec<f64>,
    pub shares_baseline: Vec<f64>,
    pub tie_flag: bool,
}

/// Truthful equilibrium of the period-1 second-price auction.
pub fn solve_equilibrium(spec: &GameSpec) -> Result<EquilibriumResult> {
    let table = stage_table(spec)?;
    Ok(equilibrium_from_table(table, spec.include_nonbuilder, spec.budget.rel_tol))
}

pub fn equilibrium_from_table(table: StageTable, include_nonbuilder: bool, rel_tol: f64) -> EquilibriumResult {
    let w = wtp_from_table(&table, include_nonbuilder, rel_tol);
    let mut order: Vec<usize> = (0..w.wtp.len()).collect();
    // Stable sort keeps the lowest index first among equal bids.
    order.sort_by(|&a, &b| w.wtp[b].total_cmp(&w.wtp[a]));
    let winner = order[0];
    let runner_up = order[1];
    let gap = w.wtp[winner] - w.wtp[runner_up];
    let noise = 3.0 * (w.error[winner].powi(2) + w.error[runner_up].powi(2)).sqrt();
    let tie_flag = gap <= noise;
    let winner = if tie_flag { winner.min(runner_up) } else { winner };

    let mut bids: Vec<f64> = w.wtp.clone();
    if include_nonbuilder {
        bids.push(w.nonbuilder_wtp);
    }
    bids.sort_by(|a, b| b.total_cmp(a));
    let price = bids[1].min(w.wtp[winner]);

    EquilibriumResult {
        shares_ea: table.owners[winner].shares.clone(),
        shares_baseline: table.baseline.shares.clone(),
        stage_table: table,
        wtp: w.wtp,
        wtp_error: w.error,
        nonbuilder_wtp: w.nonbuilder_wtp,
        winner,
        price,
        tie_flag,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// Ahead-of-time auction followed by resale by the given owner.
    Ea { owner: usize },
    /// Just-in-time auction with no prior owner (MEV-Boost).
    Baseline,
}

/// Probability that each builder ends up proposing under a regime.
pub fn proposal_shares(spec: &GameSpec, regime: Regime) -> Result<Vec<f64>> {
    spec.validate()?;
    let sv = match regime {
        Regime::Ea { owner } => {
            if owner >= spec.n() {
                return Err(Error::Domain(format!("owner index {owner} out of range")));
            }
            stage_values(owner, &spec.builders, spec.policy, spec.method, spec.budget, spec.owner_stream(Some(owner)))?
        }
        Regime::Baseline => baseline_jit(&spec.builders, spec.method, spec.budget, spec.owner_stream(None))?,
    };
    Ok(sv.shares)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn u(lo: f64, hi: f64) -> ValueDistribution {
        ValueDistribution::uniform(lo, hi).unwrap()
    }

    fn quad_spec(builders: Vec<ValueDistribution>) -> GameSpec {
        GameSpec::new(builders, ResalePolicy::OptimalOffer, Method::Quadrature, Budget::default(), RandomStream::new(1))
            .unwrap()
    }

    #[test]
    fn example_one_wtp_and_winner() {
        let spec = quad_spec(vec![u(0.0, 1.25), u(0.0, 1.0)]);
        let eq = solve_equilibrium(&spec).unwrap();
        assert!((eq.wtp[0] - 301.0 / 480.0).abs() < 1e-8);
        assert!((eq.wtp[1] - 143.0 / 240.0).abs() < 1e-8);
        assert!((eq.nonbuilder_wtp - 11.0 / 30.0).abs() < 1e-8);
        assert_eq!(eq.winner, 0);
        assert!(!eq.tie_flag);
        assert!((eq.price - 143.0 / 240.0).abs() < 1e-8);
        assert!((eq.shares_ea[0] - 0.8).abs() < 1e-8);
        assert!((eq.shares_baseline[0] - 0.6).abs() < 1e-8);
    }

    #[test]
    fn rival_only_minimum() {
        let spec = quad_spec(vec![u(0.0, 1.25), u(0.0, 1.0)]).without_nonbuilder();
        let w = wtp_vector(&spec).unwrap();
        assert_eq!(w.worst_rival, vec![Some(1), Some(0)]);
        assert!((w.wtp[0] - 301.0 / 480.0).abs() < 1e-8);
    }

    #[test]
    fn identical_builders_tie() {
        let eq = solve_equilibrium(&quad_spec(vec![u(0.0, 1.0), u(0.0, 1.0)])).unwrap();
        assert!(eq.tie_flag);
        assert_eq!(eq.winner, 0);
        assert!((eq.wtp[0] - eq.wtp[1]).abs() < 1e-12);
    }

    #[test]
    fn identical_builders_tie_under_monte_carlo() {
        let spec = GameSpec::new(
            vec![u(0.0, 1.0), u(0.0, 1.0)],
            ResalePolicy::OptimalOffer,
            Method::MonteCarlo,
            Budget::samples(100_000),
            RandomStream::new(3),
        )
        .unwrap();
        let eq = solve_equilibrium(&spec).unwrap();
        assert!(eq.tie_flag);
        assert!((eq.wtp[0] - eq.wtp[1]).abs() <= 3.0 * (eq.wtp_error[0].powi(2) + eq.wtp_error[1].powi(2)).sqrt());
    }

    #[test]
    fn proposal_shares_regimes() {
        let spec = quad_spec(vec![u(0.0, 1.25), u(0.0, 1.0)]);
        let ea = proposal_shares(&spec, Regime::Ea { owner: 0 }).unwrap();
        assert!((ea[1] - 0.2).abs() < 1e-9);
        let base = proposal_shares(&spec, Regime::Baseline).unwrap();
        assert!((base[0] - 0.6).abs() < 1e-9);
        assert!(proposal_shares(&spec, Regime::Ea { owner: 2 }).is_err());
    }

    #[test]
    fn rejects_optimal_offer_with_three_builders() {
        let r = GameSpec::new(
            vec![u(0.0, 1.0); 3],
            ResalePolicy::OptimalOffer,
            Method::MonteCarlo,
            Budget::default(),
            RandomStream::new(0),
        );
        assert!(matches!(r, Err(Error::MechanismUnsupported(_))));
    }

    #[test]
    fn lognormal_pair_satisfies_chain() {
        let spec = quad_spec(vec![
            ValueDistribution::lognormal(2.18, 1.0).unwrap(),
            ValueDistribution::lognormal(1.99, 1.0).unwrap(),
        ]);
        let eq = solve_equilibrium(&spec).unwrap();
        assert!(eq.wtp[0] > eq.wtp[1] && eq.wtp[1] > eq.nonbuilder_wtp, "{:?}", eq.wtp);
        assert_eq!(eq.winner, 0);
        assert!(eq.shares_ea[0] > eq.shares_baseline[0]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn stronger_builder_wins_hazard_ordered_pairs(h2 in 0.2f64..3.0, ratio in 1.05f64..3.0) {
            let spec = quad_spec(vec![u(0.0, h2 * ratio), u(0.0, h2)]);
            let eq = solve_equilibrium(&spec).unwrap();
            prop_assert!(eq.wtp[0] > eq.wtp[1]);
            prop_assert!(eq.wtp[1] > eq.nonbuilder_wtp);
            prop_assert_eq!(eq.winner, 0);
            prop_assert!(eq.price <= eq.wtp[eq.winner]);
            prop_assert!(eq.shares_ea[0] > eq.shares_baseline[0]);
            // builder 2 is worse off as a loser to builder 1 than in the JIT auction
            prop_assert!(eq.stage_table.owners[0].s[1] <= eq.stage_table.baseline.s[1] + 1e-12);
            prop_assert!((eq.shares_ea.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!((eq.shares_baseline.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn rescaling_values_rescales_wtp(c in 0.1f64..10.0) {
            let base = vec![u(0.0, 1.25), u(0.0, 1.0)];
            let scaled: Vec<_> = base.iter().map(|d| d.scaled(c).unwrap()).collect();
            let a = solve_equilibrium(&quad_spec(base)).unwrap();
            let b = solve_equilibrium(&quad_spec(scaled)).unwrap();
            prop_assert_eq!(a.winner, b.winner);
            for i in 0..2 {
                prop_assert!((b.wtp[i] - c * a.wtp[i]).abs() <= 1e-8 * c);
                prop_assert!((b.shares_ea[i] - a.shares_ea[i]).abs() <= 1e-8);
            }
        }
    }
}
