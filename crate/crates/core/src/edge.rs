//! Jump detection and two-level reconstruction of periodic bang-bang signals
//! from their Fourier interpolant.
//!
//! The interpolant is evaluated on a fine grid of `M` points spanning
//! `[0, T]` with both endpoints included. Interpolant values near the
//! separation line (midway between the refined extremes) mark jumps
//! directly; every remaining crossing of the separation line is estimated by
//! the midpoint of the fine-grid cell where it happens. The corrected signal
//! alternates between the two plateau levels across those points.

use std::f64::consts::TAU;

use argmin::core::{CostFunction, Error as ArgminError, Executor};
use argmin::solver::brent::BrentOpt;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fourier::FourierInterpolant;

/// Relative tolerance of the bounded line search on the extremum brackets.
pub const LINE_SEARCH_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EdgeConfig {
    /// Number of fine-grid points `M`, endpoints included.
    pub fine_grid_size: usize,
    /// Half-width of the discontinuity zone relative to the interpolant range.
    pub epsilon_tilde: f64,
    /// Candidates within this many fine-grid indices of a zone hit are dropped.
    pub r1: usize,
    /// Last AD point snaps to `T` when its index is within `r2` of the end.
    pub r2: usize,
}

impl Default for EdgeConfig {
    fn default() -> Self {
        Self {
            fine_grid_size: 1000,
            epsilon_tilde: 0.01,
            r1: 1,
            r2: 2,
        }
    }
}

impl EdgeConfig {
    pub fn new(fine_grid_size: usize, epsilon_tilde: f64, r1: usize, r2: usize) -> Result<Self> {
        let cfg = Self {
            fine_grid_size,
            epsilon_tilde,
            r1,
            r2,
        };
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<()> {
        if !(self.epsilon_tilde > 0.0 && self.epsilon_tilde <= 0.01) {
            return Err(invalid(format!(
                "epsilon_tilde must lie in (0, 0.01], got {}",
                self.epsilon_tilde
            )));
        }
        if self.r1 == 0 || self.r2 == 0 {
            return Err(invalid("r1 and r2 must be positive"));
        }
        if self.fine_grid_size < 8 {
            return Err(invalid("fine grid needs at least 8 points"));
        }
        Ok(())
    }

    /// Checks the configuration against an interpolant with `n` nodes.
    pub fn validate(&self, n: usize) -> Result<()> {
        self.check()?;
        if self.fine_grid_size < 2 * n {
            return Err(invalid(format!(
                "fine grid of {} points does not oversample {n} nodes (need >= {})",
                self.fine_grid_size,
                2 * n
            )));
        }
        Ok(())
    }

    /// `y_i = T i / (M - 1)`, `i = 0..M`.
    pub fn fine_grid(&self, period: f64) -> Vec<f64> {
        let m = self.fine_grid_size;
        let mut y: Vec<f64> = (0..m).map(|i| period * i as f64 / (m - 1) as f64).collect();
        y[m - 1] = period;
        y
    }
}

/// Refined extreme values of an interpolant and where they occur.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extrema {
    pub max: f64,
    pub min: f64,
    pub argmax: f64,
    pub argmin: f64,
}

impl Extrema {
    pub fn separation_value(&self) -> f64 {
        0.5 * (self.max + self.min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LevelSource {
    Medians,
    KnownExtremes,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Levels {
    pub upper: f64,
    pub lower: f64,
}

/// Outcome of edge detection on one interpolant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeReport {
    pub period: f64,
    /// Approximate discontinuity points, strictly increasing, in `(0, T]`.
    pub ad_points: Vec<f64>,
    /// Zone hits kept as AD points (`L1`).
    #[serde(rename = "L1")]
    pub first_pass_count: usize,
    /// Separation-line crossings on the fine grid (`L2`).
    #[serde(rename = "L2")]
    pub candidate_count: usize,
    /// Crossings resolved by cell midpoints (`L3`).
    #[serde(rename = "L3")]
    pub filtered_count: usize,
    /// Raw number of fine-grid values inside the discontinuity zone.
    pub zone_hits: usize,
    pub levels: Levels,
    pub level_source: LevelSource,
    /// `None` when the interpolant is flat.
    pub interpolant_extrema: Option<Extrema>,
    pub separation_value: f64,
    /// Whether the last AD point was moved onto `T`.
    pub snapped_to_period: bool,
}

impl EdgeReport {
    pub fn is_empty(&self) -> bool {
        self.ad_points.is_empty()
    }

    /// Largest distance between detected and reference switch points, or
    /// `None` when the counts differ.
    pub fn max_abs_error(&self, truth: &[f64]) -> Option<f64> {
        (truth.len() == self.ad_points.len()).then(|| {
            self.ad_points
                .iter()
                .zip(truth)
                .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
        })
    }
}

/// Periodic two-level signal: `values[i]` holds on `[switches[i-1], switches[i])`
/// with `switches[-1] = 0`, and the last value holds on `[switches[L-1], T]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseConstant {
    period: f64,
    switches: Vec<f64>,
    values: Vec<f64>,
}

impl PiecewiseConstant {
    pub fn new(period: f64, switches: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if !(period > 0.0 && period.is_finite()) {
            return Err(invalid("period must be positive"));
        }
        if values.len() != switches.len() + 1 {
            return Err(invalid("need exactly one more value than switch points"));
        }
        if switches.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("switch points must be strictly increasing"));
        }
        if switches.iter().any(|&s| !(s > 0.0 && s <= period)) {
            return Err(invalid("switch points must lie in (0, T]"));
        }
        if values.first() != values.last() {
            return Err(invalid("signal must take the same value at 0 and T"));
        }
        Ok(Self {
            period,
            switches,
            values,
        })
    }

    /// Two-level signal starting at `first` and alternating with `second`.
    pub fn alternating(period: f64, switches: Vec<f64>, first: f64, second: f64) -> Result<Self> {
        if switches.len() % 2 != 0 {
            return Err(Error::Structural(format!(
                "a periodic two-level signal needs an even number of switches, got {}",
                switches.len()
            )));
        }
        let values = (0..=switches.len())
            .map(|i| if i % 2 == 0 { first } else { second })
            .collect();
        Self::new(period, switches, values)
    }

    pub fn constant(period: f64, value: f64) -> Result<Self> {
        Self::new(period, Vec::new(), vec![value])
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn switches(&self) -> &[f64] {
        &self.switches
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `[0, ξ_1, ..., ξ_L, T]`.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b = Vec::with_capacity(self.switches.len() + 2);
        b.push(0.0);
        b.extend(&self.switches);
        if self.switches.last() != Some(&self.period) {
            b.push(self.period);
        }
        b
    }

    pub fn evaluate(&self, t: f64) -> f64 {
        let u = if t == self.period { t } else { t.rem_euclid(self.period) };
        let idx = self.switches.partition_point(|&s| s <= u);
        self.values[idx]
    }

    pub fn sample(&self, ts: &[f64]) -> Vec<f64> {
        ts.iter().map(|&t| self.evaluate(t)).collect()
    }
}

struct Negated<'a> {
    interp: &'a FourierInterpolant,
    sign: f64,
}

impl CostFunction for Negated<'_> {
    type Param = f64;
    type Output = f64;

    fn cost(&self, t: &f64) -> std::result::Result<f64, ArgminError> {
        Ok(self.sign * self.interp.evaluate(*t))
    }
}

/// Minimizes `sign * I_N f` on `[a, b]`, returning `(t, I_N f(t))`.
fn line_search(interp: &FourierInterpolant, sign: f64, a: f64, b: f64) -> Option<(f64, f64)> {
    let solver = BrentOpt::new(a, b).set_tolerance(LINE_SEARCH_TOLERANCE, 1e-12 * interp.period());
    let res = Executor::new(Negated { interp, sign }, solver)
        .configure(|s| s.max_iters(200))
        .run()
        .ok()?;
    let t = res.state.best_param?;
    Some((t, interp.evaluate(t)))
}

/// Refines the discrete fine-grid extremes of `interp` by a bounded line
/// search on the neighbouring cells. Returns `None` for a flat interpolant.
pub fn refine_extrema(interp: &FourierInterpolant, config: &EdgeConfig) -> Result<Option<Extrema>> {
    config.validate(interp.grid().len())?;
    let y = config.fine_grid(interp.period());
    let v = interp.evaluate_many(&y);
    Ok(refine_from_samples(interp, &y, &v))
}

fn refine_from_samples(interp: &FourierInterpolant, y: &[f64], v: &[f64]) -> Option<Extrema> {
    let last = y.len() - 1;
    let (mut dmax, mut dmin) = (0, 0);
    for (i, &vi) in v.iter().enumerate() {
        if vi > v[dmax] {
            dmax = i;
        }
        if vi < v[dmin] {
            dmin = i;
        }
    }
    if v[dmax] - v[dmin] < 1e-14 * (1.0 + v[dmax].abs()) {
        return None;
    }

    let bracket = |d: usize| (y[d.saturating_sub(1)], y[(d + 1).min(last)]);
    let refine = |d: usize, sign: f64| {
        let (a, b) = bracket(d);
        match line_search(interp, sign, a, b) {
            Some((t, val)) if sign * val < sign * v[d] => (t, val),
            _ => (y[d], v[d]),
        }
    };
    let (argmax, max) = refine(dmax, -1.0);
    let (argmin, min) = refine(dmin, 1.0);
    Some(Extrema {
        max,
        min,
        argmax,
        argmin,
    })
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

fn empty_report(interp: &FourierInterpolant, v: &[f64], known: Option<(f64, f64)>) -> EdgeReport {
    let level = v.first().copied().unwrap_or_else(|| interp.evaluate(0.0));
    let (levels, level_source) = match known {
        Some((a, b)) => (
            Levels {
                upper: a.max(b),
                lower: a.min(b),
            },
            LevelSource::KnownExtremes,
        ),
        None => (
            Levels {
                upper: level,
                lower: level,
            },
            LevelSource::Medians,
        ),
    };
    EdgeReport {
        period: interp.period(),
        ad_points: Vec::new(),
        first_pass_count: 0,
        candidate_count: 0,
        filtered_count: 0,
        zone_hits: 0,
        levels,
        level_source,
        interpolant_extrema: None,
        separation_value: level,
        snapped_to_period: false,
    }
}

/// Locates the jumps of a periodic bang-bang signal from its interpolant.
///
/// `known_extremes`, when given, replaces the median plateau estimates.
pub fn detect_edges(
    interp: &FourierInterpolant,
    config: &EdgeConfig,
    known_extremes: Option<(f64, f64)>,
) -> Result<EdgeReport> {
    config.validate(interp.grid().len())?;
    if let Some((a, b)) = known_extremes {
        if !(a.is_finite() && b.is_finite() && a != b) {
            return Err(invalid("known extremes must be two distinct finite values"));
        }
    }
    let period = interp.period();
    let y = config.fine_grid(period);
    let v = interp.evaluate_many(&y);
    let m = y.len();

    let Some(ext) = refine_from_samples(interp, &y, &v) else {
        return Ok(empty_report(interp, &v, known_extremes));
    };
    // Ripple far smaller than the known jump is not a jump.
    if let Some((a, b)) = known_extremes {
        if ext.max - ext.min < config.epsilon_tilde * (b - a).abs() {
            return Ok(empty_report(interp, &v, known_extremes));
        }
    }
    let eps = config.epsilon_tilde * (ext.max - ext.min);
    let ave = ext.separation_value();

    // y_0 and y_{M-1} are the same point of the period; keep the right one.
    let zone: Vec<usize> = (1..m).filter(|&i| (v[i] - ave).abs() <= eps).collect();

    // Ties on the separation line go to the lower level.
    let high: Vec<bool> = v.iter().map(|&vi| vi > ave).collect();
    let candidates: Vec<usize> = (0..m - 1).filter(|&j| high[j] != high[j + 1]).collect();
    if candidates.len() % 2 != 0 {
        return Err(Error::Structural(format!(
            "odd number ({}) of separation-line crossings; not bang-bang at this resolution",
            candidates.len()
        )));
    }
    if let Some(w) = candidates.windows(2).find(|w| w[1] - w[0] <= 1) {
        return Err(Error::Structural(format!(
            "crossing cells {} and {} share a boundary",
            w[0], w[1]
        )));
    }

    // Each crossing is represented either by the nearest unclaimed zone hit
    // within r1 indices or, failing that, by the midpoint of its cell.
    let mut claimed = vec![false; zone.len()];
    let mut points: Vec<(f64, usize)> = Vec::with_capacity(candidates.len());
    let mut first_pass = 0;
    for &j in &candidates {
        let near = zone
            .iter()
            .enumerate()
            .filter(|&(k, &i)| !claimed[k] && i.abs_diff(j) <= config.r1)
            .min_by_key(|&(_, &i)| (i.abs_diff(j), i));
        let any_near = zone.iter().any(|&i| i.abs_diff(j) <= config.r1);
        match near {
            Some((k, &i)) => {
                claimed[k] = true;
                first_pass += 1;
                points.push((y[i], i));
            }
            None if any_near => {
                return Err(Error::Structural(format!(
                    "crossing at cell {j} competes for an already assigned zone point"
                )));
            }
            None => points.push((0.5 * (y[j] + y[j + 1]), j)),
        }
    }
    points.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut snapped = false;
    if let Some(lastp) = points.last_mut() {
        if lastp.1 + config.r2 + 1 >= m {
            lastp.0 = period;
            snapped = true;
        }
    }
    let ad_points: Vec<f64> = points.iter().map(|p| p.0).collect();

    let (levels, level_source) = match known_extremes {
        Some((a, b)) => (
            Levels {
                upper: a.max(b),
                lower: a.min(b),
            },
            LevelSource::KnownExtremes,
        ),
        None => {
            let up: Vec<f64> = v.iter().copied().filter(|&x| x > ave).collect();
            let down: Vec<f64> = v.iter().copied().filter(|&x| x <= ave).collect();
            (
                Levels {
                    upper: median(up),
                    lower: median(down),
                },
                LevelSource::Medians,
            )
        }
    };

    Ok(EdgeReport {
        period,
        first_pass_count: first_pass,
        candidate_count: candidates.len(),
        filtered_count: candidates.len() - first_pass,
        zone_hits: zone.len(),
        ad_points,
        levels,
        level_source,
        interpolant_extrema: Some(ext),
        separation_value: ave,
        snapped_to_period: snapped,
    })
}

/// Corrected two-level signal built from an edge report.
pub fn reconstruct(interp: &FourierInterpolant, report: &EdgeReport) -> Result<PiecewiseConstant> {
    if report.ad_points.len() % 2 != 0 {
        return Err(Error::Structural(format!(
            "odd number ({}) of discontinuity points",
            report.ad_points.len()
        )));
    }
    if report.ad_points.is_empty() {
        // no jumps: the signal is the single level it sits on
        return PiecewiseConstant::constant(report.period, report.separation_value);
    }
    let Levels { upper, lower } = report.levels;
    let (first, second) = if interp.evaluate(0.0) > report.separation_value {
        (upper, lower)
    } else {
        (lower, upper)
    };
    PiecewiseConstant::alternating(report.period, report.ad_points.clone(), first, second)
}

/// Named periodic bang-bang benchmark signals on `[0, 2π]`.
pub mod signals {
    use super::*;

    #[derive(Debug, Clone)]
    pub struct TestSignal {
        pub name: &'static str,
        pub signal: PiecewiseConstant,
    }

    impl TestSignal {
        /// True switch points, including a jump at `T` when present.
        pub fn switches(&self) -> &[f64] {
            self.signal.switches()
        }

        pub fn evaluate(&self, t: f64) -> f64 {
            self.signal.evaluate(t)
        }
    }

    fn make(name: &'static str, switches: &[f64], values: &[f64]) -> TestSignal {
        TestSignal {
            name,
            signal: PiecewiseConstant::new(TAU, switches.to_vec(), values.to_vec())
                .expect("benchmark signal is well formed"),
        }
    }

    pub fn f() -> TestSignal {
        make("f", &[6.01, TAU], &[2.0, 0.0, 2.0])
    }

    pub fn g() -> TestSignal {
        make("g", &[0.45, 1.97], &[-1.0, 3.0, -1.0])
    }

    pub fn h() -> TestSignal {
        make("h", &[0.28, 0.96, 2.98, TAU], &[41.12, -2.5, 41.12, -2.5, 41.12])
    }

    pub fn w() -> TestSignal {
        make("w", &[0.71, 1.08, 4.81, TAU], &[200.0, 0.0, 200.0, 0.0, 200.0])
    }

    pub fn constant() -> TestSignal {
        make("constant", &[], &[5.0])
    }

    /// The four two-level benchmarks.
    pub fn all() -> Vec<TestSignal> {
        vec![f(), g(), h(), w()]
    }

    pub fn by_name(name: &str) -> Option<TestSignal> {
        match name {
            "f" => Some(f()),
            "g" => Some(g()),
            "h" => Some(h()),
            "w" => Some(w()),
            "constant" => Some(constant()),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::EquispacedGrid;

    fn interp_of(sig: &PiecewiseConstant, n: usize) -> FourierInterpolant {
        let grid = EquispacedGrid::new(sig.period(), n).unwrap();
        FourierInterpolant::new(&grid, &sig.sample(grid.nodes())).unwrap()
    }

    fn table1_config() -> EdgeConfig {
        EdgeConfig::new(200, 0.01, 1, 2).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(EdgeConfig::new(200, 0.0, 1, 2).is_err());
        assert!(EdgeConfig::new(200, 0.02, 1, 2).is_err());
        assert!(EdgeConfig::new(200, 0.01, 0, 2).is_err());
        let cfg = EdgeConfig::new(150, 0.01, 1, 2).unwrap();
        assert!(cfg.validate(100).is_err());
        assert!(cfg.validate(74).is_ok());
        let y = cfg.fine_grid(TAU);
        assert_eq!(y.len(), 150);
        assert_eq!(y[0], 0.0);
        assert_eq!(y[149], TAU);
    }

    #[test]
    fn constant_input_has_no_edges() {
        let sig = signals::constant();
        let p = interp_of(&sig.signal, 100);
        assert_eq!(refine_extrema(&p, &table1_config()).unwrap(), None);
        let rep = detect_edges(&p, &table1_config(), None).unwrap();
        assert!(rep.is_empty());
        assert!((rep.levels.upper - 5.0).abs() < 1e-12);
        let rec = reconstruct(&p, &rep).unwrap();
        assert!((rec.evaluate(1.0) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn sine_extremum_has_no_overshoot() {
        let grid = EquispacedGrid::natural(16).unwrap();
        let s: Vec<f64> = grid.nodes().iter().map(|t| t.sin()).collect();
        let p = FourierInterpolant::new(&grid, &s).unwrap();
        let ext = refine_extrema(&p, &EdgeConfig::new(200, 0.01, 1, 2).unwrap())
            .unwrap()
            .unwrap();
        assert!((ext.max - 1.0).abs() < 1e-9);
        assert!((ext.min + 1.0).abs() < 1e-9);
        assert!((ext.argmax - std::f64::consts::FRAC_PI_2).abs() < 1e-4);
    }

    #[test]
    fn refined_extrema_of_g_show_gibbs_overshoot() {
        let p = interp_of(&signals::g().signal, 100);
        let ext = refine_extrema(&p, &table1_config()).unwrap().unwrap();
        // oracle: dense evaluation of the same interpolant
        let dense: Vec<f64> = (0..1_000_000).map(|i| p.evaluate(TAU * i as f64 / 1e6)).collect();
        let dmax = dense.iter().cloned().fold(f64::MIN, f64::max);
        let dmin = dense.iter().cloned().fold(f64::MAX, f64::min);
        assert!(ext.max > 3.0 && ext.max < 3.0 + 0.2 * 4.0, "max {}", ext.max);
        assert!(ext.min < -1.0 && ext.min > -1.0 - 0.2 * 4.0, "min {}", ext.min);
        assert!(ext.max >= dmax - 1e-9 && ext.min <= dmin + 1e-9);
    }

    #[test]
    fn table1_points_are_reproduced() {
        let expected: [(&str, &[f64]); 4] = [
            ("f", &[6.0148, 6.2832]),
            ("g", &[0.4578, 1.9734]),
            ("h", &[0.2842, 0.9630, 2.9837, 6.2832]),
            ("w", &[0.7104, 1.0893, 4.8150, 6.2832]),
        ];
        for (name, want) in expected {
            let sig = signals::by_name(name).unwrap();
            let p = interp_of(&sig.signal, 100);
            let rep = detect_edges(&p, &table1_config(), None).unwrap();
            assert_eq!(rep.ad_points.len(), want.len(), "{name}");
            for (a, b) in rep.ad_points.iter().zip(want) {
                assert!((a - b).abs() < 5e-5, "{name}: {a} vs {b}");
            }
            assert!(rep.first_pass_count <= rep.candidate_count);
            assert_eq!(rep.first_pass_count + rep.filtered_count, rep.candidate_count);
        }
    }

    #[test]
    fn g_reconstruction_with_known_extremes() {
        let sig = signals::g();
        let p = interp_of(&sig.signal, 100);
        let rep = detect_edges(&p, &table1_config(), Some((-1.0, 3.0))).unwrap();
        assert_eq!(rep.level_source, LevelSource::KnownExtremes);
        let rec = reconstruct(&p, &rep).unwrap();
        let mut rng = 0x2545_f491_4f6c_dd1d_u64;
        for _ in 0..1000 {
            rng ^= rng << 13;
            rng ^= rng >> 7;
            rng ^= rng << 17;
            let t = TAU * (rng >> 11) as f64 / (1u64 << 53) as f64;
            if sig.switches().iter().any(|s| (s - t).abs() < 0.01) {
                continue;
            }
            assert_eq!(rec.evaluate(t), sig.evaluate(t), "t = {t}");
        }
        let mut levels = rec.values().to_vec();
        levels.dedup();
        assert_eq!(levels, vec![-1.0, 3.0, -1.0]);
    }

    #[test]
    fn median_levels_are_close_to_plateaus() {
        let sig = signals::g();
        let p = interp_of(&sig.signal, 100);
        let rep = detect_edges(&p, &table1_config(), None).unwrap();
        assert_eq!(rep.level_source, LevelSource::Medians);
        assert!((rep.levels.upper - 3.0).abs() < 0.05);
        assert!((rep.levels.lower + 1.0).abs() < 0.05);
    }

    #[test]
    fn square_wave_is_recovered() {
        let sq = PiecewiseConstant::alternating(TAU, vec![std::f64::consts::PI, TAU], 1.0, -1.0).unwrap();
        let p = interp_of(&sq, 64);
        let cfg = EdgeConfig::new(400, 0.01, 1, 2).unwrap();
        let rep = detect_edges(&p, &cfg, None).unwrap();
        let rec = reconstruct(&p, &rep).unwrap();
        // a jump on a node is only located to within the localization bound
        let radius = TAU / 64.0 + 2.0 * TAU / 400.0;
        for i in 0..2000 {
            let t = TAU * (i as f64 + 0.5) / 2000.0;
            if [0.0, std::f64::consts::PI, TAU].iter().any(|s| (s - t).abs() < radius) {
                continue;
            }
            assert!((rec.evaluate(t) - sq.evaluate(t)).abs() < 1e-3, "t = {t}");
        }
    }

    #[test]
    fn known_extremes_pass_through() {
        let sq = PiecewiseConstant::alternating(TAU, vec![1.0, 4.0], 140.0, 0.0).unwrap();
        let p = interp_of(&sq, 64);
        let cfg = EdgeConfig::new(400, 0.01, 1, 2).unwrap();
        let rep = detect_edges(&p, &cfg, Some((0.0, 140.0))).unwrap();
        assert_eq!(
            rep.levels,
            Levels {
                upper: 140.0,
                lower: 0.0
            }
        );
        let rec = reconstruct(&p, &rep).unwrap();
        let mut v = rec.values().to_vec();
        v.sort_by(f64::total_cmp);
        v.dedup();
        assert_eq!(v, vec![0.0, 140.0]);
    }

    #[test]
    fn odd_report_is_rejected() {
        let p = interp_of(&signals::g().signal, 100);
        let mut rep = detect_edges(&p, &table1_config(), None).unwrap();
        rep.ad_points.pop();
        assert!(matches!(reconstruct(&p, &rep), Err(Error::Structural(_))));
    }

    #[test]
    fn piecewise_constant_invariants() {
        let pc = PiecewiseConstant::alternating(10.0, vec![2.0, 7.0], 1.0, 0.0).unwrap();
        assert_eq!(pc.evaluate(0.0), pc.evaluate(10.0));
        assert_eq!(pc.evaluate(2.0), 0.0);
        assert_eq!(pc.evaluate(12.5), 0.0);
        assert_eq!(pc.breakpoints(), vec![0.0, 2.0, 7.0, 10.0]);
        assert!(PiecewiseConstant::alternating(10.0, vec![2.0], 1.0, 0.0).is_err());
        assert!(PiecewiseConstant::new(10.0, vec![7.0, 2.0], vec![1.0, 0.0, 1.0]).is_err());
        assert!(PiecewiseConstant::new(10.0, vec![0.0, 2.0], vec![1.0, 0.0, 1.0]).is_err());
    }

    #[test]
    fn report_json_uses_short_count_keys() {
        let p = interp_of(&signals::f().signal, 100);
        let rep = detect_edges(&p, &table1_config(), None).unwrap();
        let json = serde_json::to_value(&rep).unwrap();
        assert_eq!(json["L2"], 2);
        assert_eq!(json["level_source"], "medians");
        assert!(json["levels"]["upper"].is_number());
    }
}
