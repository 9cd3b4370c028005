//! Seeded random-instance checks of the distance, pushforward and tower
//! properties, the worked example and the metric axioms.
//!
//! Each check produces one or more [`VerdictReport`]s. Reports marked
//! `must_hold` are expected to finish without violations; the others are
//! findings, which record counterexamples with witnesses but never count as
//! failures. Every check draws from its own ChaCha stream derived from the
//! run seed and a fixed per-claim salt, so selecting a subset of claims does
//! not change the reports of the others.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::example1;
use crate::measure::IdempotentMeasure;
use crate::semiring::{oplus_h, MaxPlus, TOL};
use crate::space::{FiniteMetricSpace, Modulus, PointMap};
use crate::tower::{map_element, LimitPoint, Tower, TowerElement, TowerError};
use crate::transport::{self, Algorithm, Mode, DEFAULT_ENUMERATION_CAP};

/// Every claim id understood by [`run`], in report order.
pub const CLAIMS: [&str; 15] = [
    "ORACLE-FAST",
    "L1",
    "L2",
    "L3",
    "L3-counterexample",
    "L4",
    "P1",
    "T1-D1",
    "T1-D2",
    "T1-D3",
    "T1-D4",
    "EQ2",
    "EX1",
    "METRIC-AXIOMS",
    "DEQUANT",
];

pub const DEFAULT_INSTANCES: usize = 500;
pub const DEFAULT_EPS: [f64; 3] = [0.5, 1.0, 2.0];
/// Retain at most this many witnesses per report.
const MAX_WITNESSES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    HoldsOnSample,
    Violated,
    Reproduced,
    NotAsserted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportMode {
    Paper,
    Coupling,
    Both,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerdictReport {
    pub claim: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scope: Option<String>,
    pub mode: ReportMode,
    pub instances: usize,
    pub status: Status,
    pub must_hold: bool,
    /// Total number of violations; `violations` keeps the first few.
    pub violation_count: usize,
    pub violations: Vec<Value>,
    pub findings: Vec<Value>,
    pub summary: BTreeMap<String, f64>,
    pub seed: u64,
}

impl VerdictReport {
    fn new(claim: &str, mode: ReportMode, must_hold: bool, seed: u64) -> Self {
        VerdictReport {
            claim: claim.to_string(),
            scope: None,
            mode,
            instances: 0,
            status: Status::HoldsOnSample,
            must_hold,
            violation_count: 0,
            violations: Vec::new(),
            findings: Vec::new(),
            summary: BTreeMap::new(),
            seed,
        }
    }

    fn scoped(mut self, scope: &str) -> Self {
        self.scope = Some(scope.to_string());
        self
    }

    fn violation(&mut self, witness: Value) {
        self.violation_count += 1;
        if self.violations.len() < MAX_WITNESSES {
            self.violations.push(witness);
        }
    }

    fn finding(&mut self, note: Value) {
        if self.findings.len() < MAX_WITNESSES {
            self.findings.push(note);
        }
    }

    fn stat_max(&mut self, key: &str, v: f64) {
        if v.is_finite() {
            let e = self.summary.entry(key.to_string()).or_insert(v);
            *e = e.max(v);
        }
    }

    fn count(&mut self, key: &str) {
        *self.summary.entry(key.to_string()).or_insert(0.0) += 1.0;
    }

    /// Sets the status from the violations; `quiet` is used when none occurred.
    fn close(mut self, quiet: Status) -> Self {
        self.status = if self.violation_count > 0 { Status::Violated } else { quiet };
        self
    }

    /// A must-hold report with at least one violation.
    pub fn failed(&self) -> bool {
        self.must_hold && self.violation_count > 0
    }
}

/// Full output of a verification run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyRun {
    pub seed: u64,
    pub instances: usize,
    pub reports: Vec<VerdictReport>,
}

impl VerifyRun {
    pub fn failed(&self) -> bool {
        self.reports.iter().any(VerdictReport::failed)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyConfig {
    pub seed: u64,
    pub instances: usize,
    pub bounds: SizeBounds,
    pub eps: Vec<f64>,
}

impl VerifyConfig {
    pub fn new(seed: u64, instances: usize) -> Self {
        VerifyConfig { seed, instances, bounds: SizeBounds::default(), eps: DEFAULT_EPS.to_vec() }
    }
}

/// Caps on randomly generated instances.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SizeBounds {
    pub min_points: usize,
    pub max_points: usize,
    pub max_support: usize,
    pub measures: usize,
    pub maps: usize,
    pub lipschitz_maps: bool,
}

impl Default for SizeBounds {
    fn default() -> Self {
        SizeBounds { min_points: 2, max_points: 5, max_support: 4, measures: 2, maps: 1, lipschitz_maps: false }
    }
}

/// A random space on the line together with measures and self-maps.
#[derive(Debug, Clone)]
pub struct Instance {
    pub coords: Vec<f64>,
    pub space: Arc<FiniteMetricSpace>,
    pub measures: Vec<IdempotentMeasure>,
    pub maps: Vec<PointMap>,
}

/// Deterministic in `seed`; see [`SizeBounds`] for what is generated.
pub fn gen_instance(seed: u64, bounds: &SizeBounds) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    gen_instance_with(&mut rng, bounds)
}

fn gen_instance_with(rng: &mut ChaCha8Rng, b: &SizeBounds) -> Instance {
    let n = rng.gen_range(b.min_points.max(1)..=b.max_points.max(b.min_points.max(1)));
    let line = LineSpace::random(rng, n);
    let measures = (0..b.measures).map(|_| gen_measure(rng, &line.space, b.max_support)).collect();
    let maps = (0..b.maps)
        .map(|_| {
            if b.lipschitz_maps {
                gen_lipschitz_map(rng, &line, &line)
            } else {
                gen_map(rng, &line.space, &line.space)
            }
        })
        .collect();
    Instance { coords: line.coords, space: line.space, measures, maps }
}

/// Multiples of 1/64 keep coordinates and weights dyadic, so most
/// arithmetic in the checks is exact.
const GRID: f64 = 64.0;

#[derive(Debug, Clone)]
struct LineSpace {
    coords: Vec<f64>,
    space: Arc<FiniteMetricSpace>,
}

impl LineSpace {
    fn from_coords(mut coords: Vec<f64>, prefix: &str) -> Self {
        coords.sort_by(f64::total_cmp);
        let labels = (0..coords.len()).map(|i| format!("{prefix}{i}")).collect();
        let space = FiniteMetricSpace::on_line(labels, &coords).expect("distinct points on a line");
        LineSpace { coords, space: Arc::new(space) }
    }

    /// `n` distinct grid points in `[0, 10]`.
    fn random(rng: &mut ChaCha8Rng, n: usize) -> Self {
        let ticks: Vec<i64> = rand::seq::index::sample(rng, 641, n).into_iter().map(|t| t as i64).collect();
        Self::from_coords(ticks.into_iter().map(|t| t as f64 / GRID).collect(), "p")
    }

    /// The same points plus up to `extra` new ones strictly inside the hull,
    /// so the diameter is unchanged. Point order is shuffled.
    fn widen(&self, rng: &mut ChaCha8Rng, extra: usize) -> (Self, PointMap) {
        let lo = (self.coords[0] * GRID) as i64;
        let hi = (self.coords[self.coords.len() - 1] * GRID) as i64;
        let mut coords = self.coords.clone();
        for _ in 0..extra {
            if hi - lo < 2 {
                break;
            }
            let c = rng.gen_range(lo + 1..hi) as f64 / GRID;
            if !coords.contains(&c) {
                coords.push(c);
            }
        }
        coords.shuffle(rng);
        let labels = (0..coords.len()).map(|i| format!("q{i}")).collect();
        let space = Arc::new(FiniteMetricSpace::on_line(labels, &coords).expect("distinct points"));
        let assignment = self.coords.iter().map(|c| coords.iter().position(|d| d == c).expect("kept")).collect();
        let inclusion = PointMap::new(self.space.clone(), space.clone(), assignment).expect("valid map");
        (LineSpace { coords, space }, inclusion)
    }
}

fn gen_weights(rng: &mut ChaCha8Rng, space: &FiniteMetricSpace, max_support: usize) -> Vec<(usize, MaxPlus)> {
    let k = rng.gen_range(1..=max_support.min(space.len()).max(1));
    rand::seq::index::sample(rng, space.len(), k)
        .into_iter()
        .map(|i| (i, MaxPlus::Finite(-(rng.gen_range(0..=512) as f64) / GRID)))
        .collect()
}

/// Weights drawn from `[−8, 0]`, then normalized.
fn gen_measure(rng: &mut ChaCha8Rng, space: &Arc<FiniteMetricSpace>, max_support: usize) -> IdempotentMeasure {
    let w = gen_weights(rng, space, max_support);
    IdempotentMeasure::from_indexed(space.clone(), w).expect("nonempty")
}

fn gen_map(rng: &mut ChaCha8Rng, source: &Arc<FiniteMetricSpace>, target: &Arc<FiniteMetricSpace>) -> PointMap {
    let assignment = (0..source.len()).map(|_| rng.gen_range(0..target.len())).collect();
    PointMap::new(source.clone(), target.clone(), assignment).expect("valid map")
}

/// On the line a map is 1-Lipschitz iff consecutive points move no further
/// apart, so each image is drawn near the previous one.
fn gen_lipschitz_map(rng: &mut ChaCha8Rng, source: &LineSpace, target: &LineSpace) -> PointMap {
    let mut assignment = Vec::with_capacity(source.coords.len());
    let mut prev: Option<usize> = None;
    for (i, &x) in source.coords.iter().enumerate() {
        let j = match prev {
            None => rng.gen_range(0..target.coords.len()),
            Some(p) => {
                let step = x - source.coords[i - 1];
                let near: Vec<usize> =
                    (0..target.coords.len()).filter(|&j| (target.coords[j] - target.coords[p]).abs() <= step).collect();
                *near.choose(rng).expect("previous image is always near")
            }
        };
        assignment.push(j);
        prev = Some(j);
    }
    let f = PointMap::new(source.space.clone(), target.space.clone(), assignment).expect("valid map");
    debug_assert!(f.lipschitz_constant() <= 1.0 + TOL);
    f
}

/// A level-`level` element whose supports have at most `max_support` entries.
fn gen_tower_element(
    rng: &mut ChaCha8Rng,
    space: &Arc<FiniteMetricSpace>,
    level: usize,
    max_support: usize,
) -> TowerElement {
    if level == 0 {
        return TowerElement::Point(rng.gen_range(0..space.len()));
    }
    if level == 1 {
        return TowerElement::from_measure(&gen_measure(rng, space, max_support));
    }
    let k = rng.gen_range(1..=max_support.max(1));
    let pairs: Vec<(TowerElement, MaxPlus)> = (0..k)
        .map(|_| {
            let e = gen_tower_element(rng, space, level - 1, max_support);
            (e, MaxPlus::Finite(-(rng.gen_range(0..=512) as f64) / GRID))
        })
        .collect();
    TowerElement::measure(pairs).expect("nonempty")
}

fn measure_json(mu: &IdempotentMeasure) -> Value {
    let s = mu.space();
    Value::Object(mu.weights().map(|(i, w)| (s.label(i).to_string(), json!(w))).collect())
}

fn space_json(line: &LineSpace) -> Value {
    Value::Object(line.space.labels().iter().zip(&line.coords).map(|(l, c)| (l.clone(), json!(c))).collect())
}

fn map_json(f: &PointMap) -> Value {
    Value::Object(
        (0..f.source().len()).map(|i| (f.source().label(i).to_string(), json!(f.target().label(f.apply(i))))).collect(),
    )
}

fn element_json(e: &TowerElement, base: &FiniteMetricSpace) -> Value {
    serde_json::to_value(crate::formats::TowerJson::from_element(e, base)).expect("serializable")
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= TOL
}

fn rng_for(seed: u64, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Coupling-mode distance by the fast algorithm, cross-checked against the
/// oracle whenever the instance is within the enumeration cap.
fn coupling_distance(report: &mut VerdictReport, mu: &IdempotentMeasure, nu: &IdempotentMeasure) -> f64 {
    let fast = transport::distance_fast(mu, nu).expect("same space").value;
    if mu.support().len() * nu.support().len() <= DEFAULT_ENUMERATION_CAP {
        let oracle = transport::distance_oracle(mu, nu).expect("within cap").value;
        report.count("oracle_cross_checks");
        if oracle != fast {
            report.violation(json!({
                "kind": "oracle-fast-mismatch",
                "mu": measure_json(mu), "nu": measure_json(nu),
                "fast": fast, "oracle": oracle,
            }));
        }
    }
    fast
}

fn paper_distance(mu: &IdempotentMeasure, nu: &IdempotentMeasure) -> f64 {
    transport::distance_paper_mode(mu, nu).expect("same space").value
}

/// Level-`k` coupling distance, with the oracle tower as a cross-check.
fn tower_distance(
    report: &mut VerdictReport,
    base: &Arc<FiniteMetricSpace>,
    a: &TowerElement,
    b: &TowerElement,
) -> Result<f64, TowerError> {
    let fast = Tower::new(base.clone()).level_metric(a, b)?;
    let oracle = Tower::new(base.clone()).with_metric(Mode::Coupling, Algorithm::Oracle).level_metric(a, b);
    match oracle {
        Ok(o) if o != fast => report.violation(json!({
            "kind": "oracle-fast-mismatch", "level": a.level(),
            "a": element_json(a, base), "b": element_json(b, base), "fast": fast, "oracle": o,
        })),
        Ok(_) => report.count("oracle_cross_checks"),
        Err(_) => {}
    }
    Ok(fast)
}

/// Oracle and fast algorithm on random small instances.
pub fn check_oracle_fast(seed: u64, n: usize) -> VerdictReport {
    let mut rng = rng_for(seed, 1);
    let mut r = VerdictReport::new("ORACLE-FAST", ReportMode::Coupling, true, seed);
    let bounds = SizeBounds { min_points: 1, max_points: 5, max_support: 3, ..SizeBounds::default() };
    for _ in 0..n {
        let inst = gen_instance_with(&mut rng, &bounds);
        let (mu, nu) = (&inst.measures[0], &inst.measures[1]);
        let o = transport::distance_oracle(mu, nu).expect("within cap");
        let f = transport::distance_fast(mu, nu).expect("same space");
        if o.value != f.value {
            r.violation(json!({"mu": measure_json(mu), "nu": measure_json(nu), "fast": f.value, "oracle": o.value}));
        }
        r.instances += 1;
    }
    r.close(Status::HoldsOnSample)
}

/// Dirac embedding is an isometry, in both modes.
pub fn check_dirac_isometry(seed: u64, n: usize, bounds: &SizeBounds) -> VerdictReport {
    let mut rng = rng_for(seed, 2);
    let mut r = VerdictReport::new("L1", ReportMode::Both, true, seed);
    for _ in 0..n {
        let size = rng.gen_range(bounds.min_points..=bounds.max_points);
        let line = LineSpace::random(&mut rng, size);
        let x = &line.space;
        for i in 0..x.len() {
            for j in 0..x.len() {
                let (a, b) = (IdempotentMeasure::dirac_at(x.clone(), i), IdempotentMeasure::dirac_at(x.clone(), j));
                let c = coupling_distance(&mut r, &a, &b);
                let p = paper_distance(&a, &b);
                r.count("pairs");
                if !close(c, x.dist(i, j)) || !close(p, x.dist(i, j)) {
                    r.violation(json!({
                        "space": space_json(&line), "x": x.label(i), "y": x.label(j),
                        "rho": x.dist(i, j), "coupling": c, "paper": p,
                    }));
                }
            }
        }
        r.instances += 1;
    }
    r.close(Status::HoldsOnSample)
}

/// Distances never exceed the diameter, and Dirac measures at a diameter
/// pair attain it.
pub fn check_diameter_bound(seed: u64, n: usize, bounds: &SizeBounds) -> VerdictReport {
    let mut rng = rng_for(seed, 3);
    let mut r = VerdictReport::new("L2", ReportMode::Coupling, true, seed);
    for _ in 0..n {
        let inst = gen_instance_with(&mut rng, bounds);
        let diam = inst.space.diameter();
        let d = coupling_distance(&mut r, &inst.measures[0], &inst.measures[1]);
        if diam > 0.0 {
            r.stat_max("max_distance_over_diameter", d / diam);
        }
        if d > diam + TOL {
            r.violation(json!({
                "kind": "exceeds-diameter", "diameter": diam, "distance": d,
                "mu": measure_json(&inst.measures[0]), "nu": measure_json(&inst.measures[1]),
            }));
        }
        let (i, j) = inst.space.diameter_pair();
        let (a, b) =
            (IdempotentMeasure::dirac_at(inst.space.clone(), i), IdempotentMeasure::dirac_at(inst.space.clone(), j));
        let attained = coupling_distance(&mut r, &a, &b);
        if !close(attained, diam) {
            r.violation(json!({"kind": "diameter-not-attained", "diameter": diam, "dirac_distance": attained}));
        }
        r.instances += 1;
    }
    r.close(Status::HoldsOnSample)
}

/// (a) pushforward along an isometric embedding between spaces of equal
/// diameter preserves distances; (b) with unequal diameters the two-point
/// construction gives different distances.
pub fn check_embedding_invariance(seed: u64, n: usize, bounds: &SizeBounds) -> (VerdictReport, VerdictReport) {
    let mut rng = rng_for(seed, 4);
    let mut a = VerdictReport::new("L3", ReportMode::Coupling, true, seed);
    for _ in 0..n {
        let size = rng.gen_range(bounds.min_points..=bounds.max_points);
        let line = LineSpace::random(&mut rng, size);
        let extra = rng.gen_range(0..=2);
        let (wide, inc) = line.widen(&mut rng, extra);
        debug_assert!(inc.is_isometric_embedding());
        let mu = gen_measure(&mut rng, &line.space, bounds.max_support);
        let nu = gen_measure(&mut rng, &line.space, bounds.max_support);
        let before = coupling_distance(&mut a, &mu, &nu);
        let (pmu, pnu) = (mu.pushforward(&inc).unwrap(), nu.pushforward(&inc).unwrap());
        let after = coupling_distance(&mut a, &pmu, &pnu);
        if !close(before, after) || !close(line.space.diameter(), wide.space.diameter()) {
            a.violation(json!({
                "x": space_json(&line), "y": space_json(&wide), "embedding": map_json(&inc),
                "mu": measure_json(&mu), "nu": measure_json(&nu), "before": before, "after": after,
            }));
        }
        a.instances += 1;
    }

    let mut b = VerdictReport::new("L3-counterexample", ReportMode::Both, true, seed);
    for _ in 0..n {
        let size = rng.gen_range(3..=bounds.max_points.max(3));
        let big = LineSpace::random(&mut rng, size);
        // two adjacent points: their distance is below the diameter
        let k = rng.gen_range(0..big.coords.len() - 1);
        let small = LineSpace::from_coords(vec![big.coords[k], big.coords[k + 1]], "s");
        let zeta = PointMap::new(small.space.clone(), big.space.clone(), vec![k, k + 1]).expect("valid");
        let (d1, d2) = (small.space.diameter(), big.space.diameter());
        let l1 = -(rng.gen_range(0..=128) as f64) / GRID;
        let l2 = l1 - d2 - rng.gen_range(1..=192) as f64 / GRID;
        let mu1 = IdempotentMeasure::from_indexed(small.space.clone(), [(0, MaxPlus::ONE), (1, MaxPlus::Finite(l1))])
            .unwrap();
        let mu2 = IdempotentMeasure::from_indexed(small.space.clone(), [(0, MaxPlus::ONE), (1, MaxPlus::Finite(l2))])
            .unwrap();
        let (p1, p2) = (mu1.pushforward(&zeta).unwrap(), mu2.pushforward(&zeta).unwrap());
        let values = [
            ("coupling", coupling_distance(&mut b, &mu1, &mu2), coupling_distance(&mut b, &p1, &p2)),
            ("paper", paper_distance(&mu1, &mu2), paper_distance(&p1, &p2)),
        ];
        for (mode, small_d, big_d) in values {
            if !close(small_d, d1) || !close(big_d, d2) || close(small_d, big_d) {
                b.violation(json!({
                    "mode": mode, "x1": space_json(&small), "x2": space_json(&big),
                    "lambda1": l1, "lambda2": l2, "in_x1": small_d, "in_x2": big_d,
                }));
            }
        }
        b.instances += 1;
    }
    (a.close(Status::HoldsOnSample), b.close(Status::Reproduced))
}

/// Pushforward does not increase distances, at levels 1 and 2. Reported for
/// 1-Lipschitz maps into a space of equal diameter and for arbitrary maps.
pub fn check_pushforward_contraction(seed: u64, n: usize, bounds: &SizeBounds) -> Vec<VerdictReport> {
    let mut rng = rng_for(seed, 5);
    let mut out = Vec::new();
    for lipschitz in [true, false] {
        let scope = if lipschitz { "lipschitz-equal-diameter" } else { "unrestricted" };
        let mut r = VerdictReport::new("L4", ReportMode::Coupling, false, seed).scoped(scope);
        for _ in 0..n {
            let size = rng.gen_range(bounds.min_points..=bounds.max_points);
            let line = LineSpace::random(&mut rng, size);
            let (target, f) = if lipschitz {
                let extra = rng.gen_range(0..=2);
                let (wide, _) = line.widen(&mut rng, extra);
                let f = gen_lipschitz_map(&mut rng, &line, &wide);
                (wide, f)
            } else {
                let size = rng.gen_range(bounds.min_points..=bounds.max_points);
                let other = LineSpace::random(&mut rng, size);
                let f = gen_map(&mut rng, &line.space, &other.space);
                (other, f)
            };
            r.stat_max("max_lipschitz_constant", f.lipschitz_constant());
            for level in [1usize, 2] {
                let support = if level == 1 { bounds.max_support } else { 2 };
                let a = gen_tower_element(&mut rng, &line.space, level, support);
                let b = gen_tower_element(&mut rng, &line.space, level, support);
                let (fa, fb) = (map_element(&f, &a).unwrap(), map_element(&f, &b).unwrap());
                let before = tower_distance(&mut r, &line.space, &a, &b);
                let after = tower_distance(&mut r, &target.space, &fa, &fb);
                match (before, after) {
                    (Ok(before), Ok(after)) => {
                        r.stat_max("max_expansion", after - before);
                        if after > before + TOL {
                            r.violation(json!({
                                "level": level, "x": space_json(&line), "y": space_json(&target),
                                "map": map_json(&f), "a": element_json(&a, &line.space),
                                "b": element_json(&b, &line.space), "before": before, "after": after,
                            }));
                        }
                    }
                    (x, y) => {
                        r.count("inner_metric_failures");
                        let err = x.err().or(y.err()).map(|e| e.to_string());
                        r.finding(json!({"kind": "inner-metric-failure", "level": level, "error": err}));
                    }
                }
            }
            r.instances += 1;
        }
        out.push(r.close(Status::HoldsOnSample));
    }
    out
}

/// The `(ε, δ)` transfer: with `δ = modulus(f, ε)`, measure pairs closer
/// than `δ` should be sent less than `ε` apart, at levels 1 and 2.
pub fn check_continuity_transfer(seed: u64, n: usize, eps: &[f64], bounds: &SizeBounds) -> VerdictReport {
    let mut rng = rng_for(seed, 6);
    let mut r = VerdictReport::new("P1", ReportMode::Coupling, false, seed);
    for _ in 0..n {
        let size = rng.gen_range(bounds.min_points..=bounds.max_points);
        let line = LineSpace::random(&mut rng, size);
        let extra = rng.gen_range(0..=2);
        let (wide, _) = line.widen(&mut rng, extra);
        let f = gen_map(&mut rng, &line.space, &wide.space);
        for level in [1usize, 2] {
            let support = if level == 1 { bounds.max_support } else { 2 };
            let a = gen_tower_element(&mut rng, &line.space, level, support);
            let b = gen_tower_element(&mut rng, &line.space, level, support);
            let (fa, fb) = (map_element(&f, &a).unwrap(), map_element(&f, &b).unwrap());
            let (Ok(before), Ok(after)) =
                (tower_distance(&mut r, &line.space, &a, &b), tower_distance(&mut r, &wide.space, &fa, &fb))
            else {
                r.count("inner_metric_failures");
                continue;
            };
            for &e in eps {
                let delta = f.modulus(e);
                if before >= delta.as_f64() {
                    r.count("vacuous");
                    continue;
                }
                r.count("tested");
                if after >= e {
                    r.violation(json!({
                        "level": level, "eps": e,
                        "delta": match delta { Modulus::Bounded(d) => json!(d), Modulus::Unconstrained => json!("unconstrained") },
                        "x": space_json(&line), "y": space_json(&wide), "map": map_json(&f),
                        "a": element_json(&a, &line.space), "b": element_json(&b, &line.space),
                        "before": before, "after": after,
                    }));
                }
            }
        }
        r.instances += 1;
    }
    r.close(Status::HoldsOnSample)
}

/// Empirical uniform continuity of `I⁺(f)` on limit points of level `≤ 2`,
/// using the base modulus as `δ`. Reported, not asserted.
pub fn check_limit_continuity(seed: u64, n: usize, eps: &[f64], bounds: &SizeBounds) -> VerdictReport {
    let mut rng = rng_for(seed, 7);
    let mut r = VerdictReport::new("T1-D4", ReportMode::Coupling, false, seed);
    for _ in 0..n {
        let size = rng.gen_range(bounds.min_points..=bounds.max_points);
        let line = LineSpace::random(&mut rng, size);
        let extra = rng.gen_range(0..=2);
        let (wide, _) = line.widen(&mut rng, extra);
        let f = gen_map(&mut rng, &line.space, &wide.space);
        let (tx, ty) = (Tower::new(line.space.clone()), Tower::new(wide.space.clone()));
        let lp = rng.gen_range(0..=2);
        let lq = rng.gen_range(0..=2);
        let p = LimitPoint::new(gen_tower_element(&mut rng, &line.space, lp, 2));
        let q = LimitPoint::new(gen_tower_element(&mut rng, &line.space, lq, 2));
        let distances = tx.limit_distance(&p, &q).and_then(|before| {
            let fp = tx.limit_map(&f, &p)?;
            let fq = tx.limit_map(&f, &q)?;
            Ok((before, ty.limit_distance(&fp, &fq)?))
        });
        let Ok((before, after)) = distances else {
            r.count("inner_metric_failures");
            continue;
        };
        for &e in eps {
            if before >= f.modulus(e).as_f64() {
                r.count("vacuous");
                continue;
            }
            r.count("tested");
            if after >= e {
                r.violation(json!({
                    "eps": e, "levels": [lp, lq], "map": map_json(&f),
                    "p": element_json(&p.element, &line.space), "q": element_json(&q.element, &line.space),
                    "before": before, "after": after,
                }));
            }
        }
        r.instances += 1;
    }
    r.close(Status::NotAsserted)
}

/// Representative independence of the direct-limit metric and the Dirac
/// isometry at levels 1 and 2.
pub fn check_limit_metric(seed: u64, n: usize, bounds: &SizeBounds) -> VerdictReport {
    let mut rng = rng_for(seed, 8);
    let mut r = VerdictReport::new("EQ2", ReportMode::Coupling, true, seed);
    for _ in 0..n {
        let size = rng.gen_range(bounds.min_points..=bounds.max_points);
        let line = LineSpace::random(&mut rng, size);
        let tower = Tower::new(line.space.clone());
        let (lp, lq) = (rng.gen_range(0..=1), rng.gen_range(0..=1));
        let p = LimitPoint::new(gen_tower_element(&mut rng, &line.space, lp, 3));
        let q = LimitPoint::new(gen_tower_element(&mut rng, &line.space, lq, 3));
        let m = p.level().max(q.level());
        let at_m = tower.limit_distance_at(&p, &q, m);
        let at_next = tower.limit_distance_at(&p, &q, m + 1);
        match (&at_m, &at_next) {
            (Ok(x), Ok(y)) if x == y => {}
            _ => r.violation(json!({
                "kind": "representative-dependence",
                "p": element_json(&p.element, &line.space), "q": element_json(&q.element, &line.space),
                "at_m": at_m.as_ref().ok(), "at_m_plus_1": at_next.as_ref().ok(), "m": m,
            })),
        }
        // Dirac lift at levels 1 and 2
        for level in [0usize, 1] {
            let a = gen_tower_element(&mut rng, &line.space, level, 3);
            let b = gen_tower_element(&mut rng, &line.space, level, 3);
            let below = tower_distance(&mut r, &line.space, &a, &b);
            let above = tower_distance(&mut r, &line.space, &a.lift(), &b.lift());
            r.count("lift_checks");
            match (below, above) {
                (Ok(x), Ok(y)) if close(x, y) => {}
                (x, y) => r.violation(json!({
                    "kind": "lift-not-isometric", "lifted_to": level + 1,
                    "a": element_json(&a, &line.space), "b": element_json(&b, &line.space),
                    "below": x.ok(), "above": y.ok(),
                })),
            }
        }
        r.instances += 1;
    }
    r.close(Status::HoldsOnSample)
}

/// The worked example: paper-mode values are asserted; coupling-mode values
/// and the gap between the two are recorded.
pub fn check_worked_example(seed: u64) -> VerdictReport {
    let mut r = VerdictReport::new("EX1", ReportMode::Both, true, seed);
    let (mu1, mu2) = example1::measures();
    let f = example1::map();
    let (p1, p2) = (mu1.pushforward(&f).unwrap(), mu2.pushforward(&f).unwrap());
    for (name, a, b, expected) in [("X", &mu1, &mu2, 5.5), ("Y", &p1, &p2, 5.0)] {
        let paper = paper_distance(a, b);
        r.summary.insert(format!("paper_{name}"), paper);
        if paper != expected {
            r.violation(json!({"kind": "paper-value", "space": name, "expected": expected, "got": paper}));
        }
        let oracle = transport::distance_oracle(a, b).unwrap();
        let fast = transport::distance_fast(a, b).unwrap();
        r.summary.insert(format!("coupling_{name}"), oracle.value);
        if oracle.value != fast.value {
            r.violation(
                json!({"kind": "oracle-fast-mismatch", "space": name, "oracle": oracle.value, "fast": fast.value}),
            );
        }
        if oracle.value > paper {
            r.violation(json!({"kind": "coupling-above-paper", "space": name, "oracle": oracle.value, "paper": paper}));
        }
        if oracle.value != paper {
            r.finding(json!({
                "kind": "paper-vs-coupling", "space": name, "paper": paper,
                "coupling": oracle.value, "coupling_witness": oracle,
            }));
        }
        r.instances += 1;
    }
    r.close(Status::Reproduced)
}

/// Coupling mode: identity and symmetry (asserted), triangle inequality
/// (reported). Paper mode: a measure at positive distance from itself.
pub fn check_metric_axioms(seed: u64, n: usize, bounds: &SizeBounds) -> Vec<VerdictReport> {
    let mut rng = rng_for(seed, 9);
    let three = SizeBounds { measures: 3, maps: 0, ..*bounds };
    let mut ident = VerdictReport::new("METRIC-AXIOMS", ReportMode::Coupling, true, seed).scoped("identity-symmetry");
    let mut tri = VerdictReport::new("METRIC-AXIOMS", ReportMode::Coupling, false, seed).scoped("triangle");
    let mut paper = VerdictReport::new("METRIC-AXIOMS", ReportMode::Paper, true, seed).scoped("paper-identity-failure");
    for _ in 0..n {
        let inst = gen_instance_with(&mut rng, &three);
        let [a, b, c] = [&inst.measures[0], &inst.measures[1], &inst.measures[2]];
        let aa = coupling_distance(&mut ident, a, a);
        let ab = coupling_distance(&mut ident, a, b);
        let ba = coupling_distance(&mut ident, b, a);
        if aa != 0.0 {
            ident.violation(json!({"kind": "identity", "mu": measure_json(a), "d": aa}));
        }
        if ab != ba {
            ident.violation(
                json!({"kind": "symmetry", "mu": measure_json(a), "nu": measure_json(b), "d_mu_nu": ab, "d_nu_mu": ba}),
            );
        }
        ident.instances += 1;

        let bc = coupling_distance(&mut tri, b, c);
        let ac = coupling_distance(&mut tri, a, c);
        tri.stat_max("max_triangle_excess", ac - (ab + bc));
        if ac > ab + bc + TOL {
            tri.violation(json!({
                "space": inst.coords, "a": measure_json(a), "b": measure_json(b), "c": measure_json(c),
                "d_ac": ac, "d_ab": ab, "d_bc": bc,
            }));
        }
        tri.instances += 1;

        let self_gap = paper_distance(a, a);
        paper.instances += 1;
        if self_gap > 0.0 {
            paper.count("positive_self_distance");
            paper.stat_max("max_self_distance", self_gap);
        }
    }
    let (mu1, _) = example1::measures();
    let d = paper_distance(&mu1, &mu1);
    paper.instances += 1;
    if d > 0.0 {
        paper.finding(json!({"kind": "identity-failure", "mu": measure_json(&mu1), "d_mu_mu": d}));
    } else {
        paper.violation(json!({"kind": "identity-failure-not-reproduced", "mu": measure_json(&mu1), "d_mu_mu": d}));
    }
    vec![ident.close(Status::HoldsOnSample), tri.close(Status::HoldsOnSample), paper.close(Status::Reproduced)]
}

/// `max(u, v) ≤ u ⊕_h v ≤ max(u, v) + h ln 2`.
pub fn check_dequantization(seed: u64, n: usize) -> VerdictReport {
    let mut rng = rng_for(seed, 10);
    let mut r = VerdictReport::new("DEQUANT", ReportMode::None, true, seed);
    const FIXED_H: [f64; 3] = [1.0, 1e-3, 1e-9];
    for k in 0..n {
        let u = rng.gen_range(-100.0..100.0);
        let v = if k % 7 == 0 { u } else { rng.gen_range(-100.0..100.0) };
        let h = if k % 4 < 3 { FIXED_H[k % 4] } else { 10f64.powf(rng.gen_range(-9.0..1.0)) };
        let s = oplus_h(u, v, h).expect("h > 0");
        let m = u.max(v);
        r.stat_max("max_gap_over_h", (s - m) / h);
        if s < m || s > m + h * std::f64::consts::LN_2 + TOL {
            r.violation(json!({"u": u, "v": v, "h": h, "oplus_h": s}));
        }
        r.instances += 1;
    }
    r.close(Status::HoldsOnSample)
}

fn alias(report: &VerdictReport, claim: &str) -> VerdictReport {
    VerdictReport { claim: claim.to_string(), ..report.clone() }
}

/// Runs the selected claims (all of [`CLAIMS`] when `claims` is empty) in
/// the fixed order of [`CLAIMS`]. Unknown claim ids are returned as `Err`.
pub fn run(config: &VerifyConfig, claims: &[String]) -> Result<VerifyRun, String> {
    if let Some(bad) = claims.iter().find(|c| !CLAIMS.contains(&c.as_str())) {
        return Err(format!("unknown claim {bad:?}; known claims: {}", CLAIMS.join(", ")));
    }
    let wanted = |c: &str| claims.is_empty() || claims.iter().any(|x| x == c);
    let (seed, n, b) = (config.seed, config.instances, &config.bounds);
    let mut reports = Vec::new();
    let mut dirac = None;
    let mut diameter = None;
    let mut embedding = None;
    for claim in CLAIMS {
        if !wanted(claim) {
            continue;
        }
        match claim {
            "ORACLE-FAST" => reports.push(check_oracle_fast(seed, n.max(1000))),
            "L1" | "T1-D2" => {
                let r = dirac.get_or_insert_with(|| check_dirac_isometry(seed, n, b));
                reports.push(alias(r, claim));
            }
            "L2" | "T1-D3" => {
                let r = diameter.get_or_insert_with(|| check_diameter_bound(seed, n, b));
                reports.push(alias(r, claim));
            }
            "L3" | "L3-counterexample" | "T1-D1" => {
                let (a, c) = embedding.get_or_insert_with(|| check_embedding_invariance(seed, n, b));
                reports.push(match claim {
                    "L3-counterexample" => c.clone(),
                    _ => alias(a, claim),
                });
            }
            "L4" => reports.extend(check_pushforward_contraction(seed, n, b)),
            "P1" => reports.push(check_continuity_transfer(seed, n, &config.eps, b)),
            "T1-D4" => reports.push(check_limit_continuity(seed, n, &config.eps, b)),
            "EQ2" => reports.push(check_limit_metric(seed, n, b)),
            "EX1" => reports.push(check_worked_example(seed)),
            "METRIC-AXIOMS" => reports.extend(check_metric_axioms(seed, n, b)),
            "DEQUANT" => reports.push(check_dequantization(seed, (n * 20).max(10_000))),
            _ => unreachable!(),
        }
    }
    Ok(VerifyRun { seed, instances: n, reports })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gen_instance_is_deterministic_and_valid() {
        let b = SizeBounds { lipschitz_maps: true, ..SizeBounds::default() };
        let x = gen_instance(7, &b);
        let y = gen_instance(7, &b);
        assert_eq!(x.coords, y.coords);
        assert_eq!(x.measures, y.measures);
        assert_eq!(x.maps[0].assignment(), y.maps[0].assignment());
        let again = FiniteMetricSpace::validate(x.space.labels().to_vec(), x.space.matrix().to_vec()).unwrap();
        assert_eq!(again, *x.space);
        for m in &x.measures {
            assert_eq!(m.weights().map(|(_, w)| w).fold(f64::NEG_INFINITY, f64::max), 0.0);
            assert!(m.weights().all(|(_, w)| (-8.0..=0.0).contains(&w)));
        }
        assert!(x.maps[0].lipschitz_constant() <= 1.0);
    }

    #[test]
    fn lipschitz_generator_stays_lipschitz() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let line = LineSpace::random(&mut rng, 5);
            let (wide, inc) = line.widen(&mut rng, 2);
            assert!(inc.is_isometric_embedding());
            assert_eq!(line.space.diameter(), wide.space.diameter());
            let f = gen_lipschitz_map(&mut rng, &line, &wide);
            assert!(f.lipschitz_constant() <= 1.0 + TOL);
        }
    }

    #[test]
    fn worked_example_report() {
        let r = check_worked_example(0);
        assert_eq!(r.status, Status::Reproduced);
        assert_eq!(r.summary["paper_X"], 5.5);
        assert_eq!(r.summary["paper_Y"], 5.0);
        assert_eq!(r.summary["coupling_X"], 5.0);
        assert_eq!(r.summary["coupling_Y"], 4.0);
        assert_eq!(r.findings.len(), 2);
    }

    #[test]
    fn must_hold_checks_pass_on_small_runs() {
        let b = SizeBounds::default();
        assert_eq!(check_dirac_isometry(1, 20, &b).violation_count, 0);
        assert_eq!(check_diameter_bound(1, 20, &b).violation_count, 0);
        let (a, c) = check_embedding_invariance(1, 20, &b);
        assert_eq!((a.violation_count, c.violation_count), (0, 0));
        assert_eq!(c.status, Status::Reproduced);
        assert_eq!(check_limit_metric(1, 20, &b).violation_count, 0);
        assert_eq!(check_dequantization(1, 500).violation_count, 0);
    }

    #[test]
    fn run_rejects_unknown_claims_and_is_deterministic() {
        let cfg = VerifyConfig::new(11, 10);
        assert!(run(&cfg, &["L9".to_string()]).is_err());
        let claims = vec!["L1".to_string(), "T1-D2".to_string(), "EX1".to_string()];
        let a = serde_json::to_string(&run(&cfg, &claims).unwrap()).unwrap();
        let b = serde_json::to_string(&run(&cfg, &claims).unwrap()).unwrap();
        assert_eq!(a, b);
        let parsed: Value = serde_json::from_str(&a).unwrap();
        assert_eq!(parsed["reports"][1]["claim"], "T1-D2");
    }

    #[test]
    fn status_matches_violations() {
        let run = run(&VerifyConfig::new(5, 15), &[]).unwrap();
        for r in &run.reports {
            assert_eq!(r.violation_count > 0, r.status == Status::Violated, "{}", r.claim);
        }
    }
}
