//! Monte Carlo market simulation of the two-stage game.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::contracts::{ClosureMechanism, ContractMenu, DirectMechanism, Selection};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::numerics::linspace;
use crate::solver::{q2_star, AllocationTable, FirstBestTable};

/// Draws per parallel batch.
pub const BATCH: usize = 4096;

/// Number of equal-width type bins for the buyout table.
pub const BUYOUT_BINS: usize = 20;

/// Report magnitude that realizes the "always buy" or "never buy" outcome.
const EXTREME_REPORT: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub n_draws: u64,
    pub revenue_mean: f64,
    pub revenue_se: f64,
    pub welfare_mean: f64,
    pub welfare_se: f64,
    pub participation_rate: f64,
    /// Share of participating draws that buy the remaining quantity.
    pub buyout_rate: f64,
    pub truthful_selection_rate: f64,
    pub seed: u64,
}

/// Buyout counts for participating draws whose type falls in `[lo, hi)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BuyoutBin {
    pub lo: f64,
    pub hi: f64,
    pub draws: u64,
    pub buyouts: u64,
    /// Σ P(buy) over the bin's draws.
    pub expected: f64,
    /// Σ P(buy)(1 − P(buy)).
    pub variance: f64,
}

#[derive(Debug, Clone)]
pub struct MenuSimulation {
    pub result: SimulationResult,
    pub buyout: Vec<BuyoutBin>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

#[derive(Debug, Clone, Default)]
struct Tally {
    n: u64,
    revenue: f64,
    revenue_sq: f64,
    welfare: f64,
    welfare_sq: f64,
    participants: u64,
    buyouts: u64,
    truthful: u64,
    bins: Vec<(u64, u64, f64, f64)>,
}

impl Tally {
    fn with_bins(n_bins: usize) -> Self {
        Self {
            bins: vec![(0, 0, 0.0, 0.0); n_bins],
            ..Self::default()
        }
    }

    fn record(&mut self, payment: f64, welfare: f64, participated: bool, bought: bool, truthful: bool) {
        self.n += 1;
        self.revenue += payment;
        self.revenue_sq += payment * payment;
        self.welfare += welfare;
        self.welfare_sq += welfare * welfare;
        self.participants += participated as u64;
        self.buyouts += bought as u64;
        self.truthful += truthful as u64;
    }

    fn merge(&mut self, o: &Tally) {
        self.n += o.n;
        self.revenue += o.revenue;
        self.revenue_sq += o.revenue_sq;
        self.welfare += o.welfare;
        self.welfare_sq += o.welfare_sq;
        self.participants += o.participants;
        self.buyouts += o.buyouts;
        self.truthful += o.truthful;
        for (a, b) in self.bins.iter_mut().zip(&o.bins) {
            a.0 += b.0;
            a.1 += b.1;
            a.2 += b.2;
            a.3 += b.3;
        }
    }

    fn finish(&self, seed: u64) -> SimulationResult {
        let n = self.n as f64;
        let mean_se = |s: f64, s2: f64| {
            let mean = s / n;
            let var = if self.n > 1 {
                ((s2 - n * mean * mean) / (n - 1.0)).max(0.0)
            } else {
                0.0
            };
            (mean, (var / n).sqrt())
        };
        let (revenue_mean, revenue_se) = mean_se(self.revenue, self.revenue_sq);
        let (welfare_mean, welfare_se) = mean_se(self.welfare, self.welfare_sq);
        SimulationResult {
            n_draws: self.n,
            revenue_mean,
            revenue_se,
            welfare_mean,
            welfare_se,
            participation_rate: self.participants as f64 / n,
            buyout_rate: if self.participants > 0 {
                self.buyouts as f64 / self.participants as f64
            } else {
                0.0
            },
            truthful_selection_rate: self.truthful as f64 / n,
            seed,
        }
    }
}

/// Generator for draw `index`: one ChaCha8 stream per draw under a common seed.
pub fn draw_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Runs `per_draw` over `n` draws in batches and reduces in batch order.
fn run_batches<F>(n: u64, n_bins: usize, per_draw: F) -> Result<Tally>
where
    F: Fn(u64, &mut Tally) -> Result<()> + Sync,
{
    if n == 0 {
        return Err(Error::invalid("n_draws", "must be at least 1"));
    }
    let batches = n.div_ceil(BATCH as u64);
    let tallies = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut t = Tally::with_bins(n_bins);
            let end = ((b + 1) * BATCH as u64).min(n);
            for i in b * BATCH as u64..end {
                per_draw(i, &mut t)?;
            }
            Ok(t)
        })
        .collect::<Result<Vec<Tally>>>()?;
    let mut total = Tally::with_bins(n_bins);
    for t in &tallies {
        total.merge(t);
    }
    Ok(total)
}

/// Plays the menu: each type picks its best line by full scan, consumes the
/// trial, observes v₂ and buys the rest iff v₁ + v₂ ≥ p₂.
pub fn simulate_menu(model: &Model, menu: &ContractMenu, n: u64, seed: u64) -> Result<MenuSimulation> {
    let entries = menu.entries();
    let step = entries.windows(2).map(|w| w[1].v1 - w[0].v1).fold(0.0, f64::max);
    let cutoff = menu.cutoff();
    let bin_width = (1.0 - cutoff) / BUYOUT_BINS as f64;

    let tally = run_batches(n, BUYOUT_BINS, |i, t| {
        let mut rng = draw_rng(seed, i);
        let v1 = model.prior().sample(&mut rng);
        let (selection, _) = menu.best_response(model, v1)?;
        let Selection::Entry(k) = selection else {
            t.record(0.0, 0.0, false, false, v1 < cutoff + step);
            return Ok(());
        };
        let c = entries[k].contract();
        let (v2, v2_true) = model.signal().sample(c.q1, &mut rng);
        let bought = c.q1 < 1.0 && v1 + v2 >= c.p2;
        let payment = c.p1 + if bought { (1.0 - c.q1) * c.p2 } else { 0.0 };
        let consumed = if bought { 1.0 } else { c.q1 };
        let truthful = (entries[k].v1 - v1).abs() <= step;
        t.record(payment, consumed * (v1 + v2_true), true, bought, truthful);

        if v1 >= cutoff {
            let b = (((v1 - cutoff) / bin_width) as usize).min(BUYOUT_BINS - 1);
            let p = if c.q1 < 1.0 {
                1.0 - model.signal().cdf(c.p2 - v1, c.q1)
            } else {
                0.0
            };
            let bin = &mut t.bins[b];
            bin.0 += 1;
            bin.1 += bought as u64;
            bin.2 += p;
            bin.3 += p * (1.0 - p);
        }
        Ok(())
    })?;

    let buyout = tally
        .bins
        .iter()
        .enumerate()
        .map(|(b, &(draws, buyouts, expected, variance))| BuyoutBin {
            lo: cutoff + b as f64 * bin_width,
            hi: if b + 1 == BUYOUT_BINS {
                1.0
            } else {
                cutoff + (b + 1) as f64 * bin_width
            },
            draws,
            buyouts,
            expected,
            variance,
        })
        .collect();
    Ok(MenuSimulation {
        result: tally.finish(seed),
        buyout,
    })
}

/// Pearson statistic Σ (O − E)²/V over bins with positive variance.
pub fn buyout_chi_square(bins: &[BuyoutBin]) -> ChiSquareTest {
    let used: Vec<&BuyoutBin> = bins.iter().filter(|b| b.variance > 0.0).collect();
    let statistic: f64 = used
        .iter()
        .map(|b| (b.buyouts as f64 - b.expected).powi(2) / b.variance)
        .sum();
    let dof = used.len();
    let p_value = if dof == 0 {
        1.0
    } else {
        let chi = ChiSquared::new(dof as f64).expect("positive degrees of freedom");
        1.0 - chi.cdf(statistic)
    };
    ChiSquareTest {
        statistic,
        dof,
        p_value,
    }
}

/// Checks 0 ≤ q₁ ≤ 1 and 0 ≤ q₂ ≤ 1 − q₁ on a report lattice.
pub fn check_feasibility(mech: &dyn DirectMechanism) -> Result<()> {
    const SLACK: f64 = 1e-12;
    for r1 in linspace(0.0, 1.0, 101) {
        let q1 = mech.q1(r1);
        for r2 in linspace(-5.0, 5.0, 101) {
            let q2 = mech.q2(r1, r2);
            let ok = (0.0..=1.0).contains(&q1) && q2 >= 0.0 && q2 <= 1.0 - q1 + SLACK;
            if !ok {
                return Err(Error::InfeasibleMechanism { v1: r1, v2: r2, q1, q2 });
            }
        }
    }
    Ok(())
}

/// Plays a direct mechanism with truthful first-stage reports. In the second
/// stage the buyer compares the truthful report with the two extreme reports
/// and keeps the truthful one unless another is strictly better.
pub fn simulate_mechanism(model: &Model, mech: &dyn DirectMechanism, n: u64, seed: u64) -> Result<SimulationResult> {
    check_feasibility(mech)?;
    let tally = run_batches(n, 0, |i, t| {
        let mut rng = draw_rng(seed, i);
        let v1 = model.prior().sample(&mut rng);
        let q1 = mech.q1(v1);
        let (v2, v2_true) = model.signal().sample(q1, &mut rng);
        let mut best = (v2, (v1 + v2) * mech.q2(v1, v2) - mech.transfer(v1, v2)?);
        for r2 in [EXTREME_REPORT, -EXTREME_REPORT] {
            let u = (v1 + v2) * mech.q2(v1, r2) - mech.transfer(v1, r2)?;
            if u > best.1 {
                best = (r2, u);
            }
        }
        let r2 = best.0;
        let q2 = mech.q2(v1, r2);
        let payment = mech.transfer(v1, r2)?;
        let participated = q1 > 0.0 || q2 > 0.0 || payment != 0.0;
        t.record(
            payment,
            (q1 + q2) * (v1 + v2_true),
            participated,
            participated && q2 > 0.0,
            r2 == v2,
        );
        Ok(())
    })?;
    Ok(tally.finish(seed))
}

/// The efficient allocation with transfers equal to reported consumption value.
pub fn first_best_mechanism(fb: &FirstBestTable) -> ClosureMechanism {
    let (a, b, c) = (fb.clone(), fb.clone(), fb.clone());
    ClosureMechanism::new(
        "first_best",
        move |r1| a.q1_fb_at(r1),
        move |r1, r2| b.q2_fb(r1, r2),
        move |r1, r2| c.q1_fb_at(r1) * r1 + c.q2_fb(r1, r2) * (r1 + r2),
    )
}

/// One lattice cell of the consumption comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DistortionCell {
    pub v1: f64,
    pub v2: f64,
    /// Sign of q₂^FB − q₂*.
    pub q2_sign: i8,
    pub total_fb: f64,
    pub total_star: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DistortionProfile {
    pub cells: Vec<DistortionCell>,
    /// Total consumption under the optimum never exceeds first best.
    pub downward: bool,
}

/// Compares total consumption q₁ + q₂ under the optimum and first best on
/// an (n_v1 × n_v2) lattice over [0, 1] × [v2_lo, v2_hi].
pub fn distortion_profile(
    model: &Model,
    alloc: &AllocationTable,
    fb: &FirstBestTable,
    n_v1: usize,
    n_v2: usize,
    v2_range: (f64, f64),
) -> DistortionProfile {
    let mut cells = Vec::with_capacity(n_v1 * n_v2);
    for v1 in linspace(0.0, 1.0, n_v1) {
        let q1s = alloc.q1_at(v1);
        let q1f = fb.q1_fb_at(v1);
        for v2 in linspace(v2_range.0, v2_range.1, n_v2) {
            let q2s = q2_star(alloc, model, v1, v2);
            let q2f = fb.q2_fb(v1, v2);
            let d = q2f - q2s;
            cells.push(DistortionCell {
                v1,
                v2,
                q2_sign: if d > 0.0 {
                    1
                } else if d < 0.0 {
                    -1
                } else {
                    0
                },
                total_fb: q1f + q2f,
                total_star: q1s + q2s,
            });
        }
    }
    let downward = cells.iter().all(|c| c.total_star <= c.total_fb);
    DistortionProfile { cells, downward }
}
