//! Instance generators: seeded random families hitting an exact prediction
//! error, and the adversarial constructions as named fixtures.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::audit::Deviation;
use crate::error::{FacError, Result};
use crate::metric::{lp_norm, Instance, MetricSpec, Point, Profile};
use crate::oracle::{optimal, SolverOptions};

const MAX_REDRAWS: usize = 64;

/// Derives an independent 64-bit seed for `(namespace, counters)` from a root
/// seed. Pure, so parallel schedules see the same streams.
pub fn derive_seed(root: u64, namespace: &str, counters: &[u64]) -> u64 {
    // FNV-1a over the namespace, then splitmix64 over each counter.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in namespace.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    let mut s = splitmix(root ^ h);
    for &c in counters {
        s = splitmix(s ^ splitmix(c.wrapping_add(0x9e37_79b9_7f4a_7c15)));
    }
    s
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub metric: MetricSpec,
    pub n: usize,
    /// Coordinate range `(lo, hi)`, applied to every axis.
    pub coord_box: (f64, f64),
    pub eta_target: Option<f64>,
    pub seed: u64,
}

/// Uniform agents in the box; the prediction sits at distance
/// `eta_target * r` from the optimum along a seeded direction, or uniformly
/// in the box inflated by its width when no target is given.
pub fn gen_random(spec: &FamilySpec, opts: SolverOptions) -> Result<Instance> {
    let (lo, hi) = spec.coord_box;
    if spec.n == 0 {
        return Err(FacError::input("family needs n >= 1"));
    }
    if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(FacError::input(format!(
            "degenerate coordinate box [{lo}, {hi}]"
        )));
    }
    if let Some(eta) = spec.eta_target {
        if !(eta >= 0.0) || !eta.is_finite() {
            return Err(FacError::input(format!(
                "eta target must be finite and >= 0, got {eta}"
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let dim = spec.metric.dim();
    let draw = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| -> Point {
        match dim {
            1 => Point::Line(rng.gen_range(lo..hi)),
            _ => Point::Plane([rng.gen_range(lo..hi), rng.gen_range(lo..hi)]),
        }
    };
    for _ in 0..MAX_REDRAWS {
        let profile = Profile::new((0..spec.n).map(|_| draw(&mut rng, lo, hi)).collect())?;
        let Some(eta) = spec.eta_target else {
            let w = hi - lo;
            let pi = draw(&mut rng, lo - w, hi + w);
            return Instance::new(spec.metric, profile, pi);
        };
        let o = optimal(&spec.metric, &profile, opts)?;
        if o.cost <= 0.0 {
            if eta == 0.0 {
                return Instance::new(spec.metric, profile, o.location);
            }
            continue;
        }
        let reach = eta * o.cost;
        let pi = match o.location {
            Point::Line(c) => {
                let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                Point::Line(c + sign * reach)
            }
            Point::Plane([a, b]) => {
                let theta = rng.gen_range(0.0..2.0 * PI);
                let (u, v) = (theta.cos(), theta.sin());
                // the l_p distance is homogeneous, so one division hits the target
                let s = reach / lp_norm(u, v, spec.metric.p().unwrap_or(2.0));
                Point::Plane([a + s * u, b + s * v])
            }
        };
        return Instance::new(spec.metric, profile, pi);
    }
    Err(FacError::input(format!(
        "no instance with positive optimal cost after {MAX_REDRAWS} draws"
    )))
}

/// Profile `(0, 2)` with the prediction right of the midpoint; MinMaxP's
/// ratio on it is exactly `1 + min(1, eta)`.
pub fn fixture_minmaxp_tight(eta: f64) -> Result<Instance> {
    if !(eta >= 0.0) || !eta.is_finite() {
        return Err(FacError::input(format!(
            "eta must be finite and >= 0, got {eta}"
        )));
    }
    Instance::line(&[0.0, 2.0], 1.0 + eta)
}

/// Two instances sharing the prediction 1: `(0, 2)` with error 0 and
/// `(0, 4)` with error 1/2.
pub fn fixture_rand_lb() -> (Instance, Instance) {
    (
        Instance::line(&[0.0, 2.0], 1.0).expect("valid fixture"),
        Instance::line(&[0.0, 4.0], 1.0).expect("valid fixture"),
    )
}

/// Three agents on the unit l_p sphere around the origin with the
/// prediction on the diagonal at error `eta`.
pub fn fixture_bbox_tight(p: f64, eta: f64) -> Result<Instance> {
    if !(eta >= 0.0) || !eta.is_finite() {
        return Err(FacError::input(format!(
            "eta must be finite and >= 0, got {eta}"
        )));
    }
    let metric = MetricSpec::plane(p)?;
    let c = 2f64.powf(-1.0 / p);
    let s = (eta.powf(p) / 2.0).powf(1.0 / p);
    Instance::new(
        metric,
        Profile::plane(&[[-c, -c], [0.0, 1.0], [1.0, 0.0]])?,
        Point::Plane([s, s]),
    )
}

/// Two agents at the origin and one at `(1, 1)`: the coordinate-wise median
/// lands on the origin, twice the optimal cost. The prediction is the optimum.
pub fn fixture_cm_tight(p: f64) -> Result<Instance> {
    let metric = MetricSpec::plane(p)?;
    Instance::new(
        metric,
        Profile::plane(&[[0.0, 0.0], [0.0, 0.0], [1.0, 1.0]])?,
        Point::Plane([0.5, 0.5]),
    )
}

/// Profile `(0, 1, 2)` where all three agents report 1: agent 2 gains 1/2
/// under LRM and the outer agents are indifferent.
pub fn fixture_lrm_sgsp() -> (Instance, Deviation) {
    let inst = Instance::line(&[0.0, 1.0, 2.0], 1.0).expect("valid fixture");
    let w = Deviation {
        coalition: vec![0, 1, 2],
        misreports: vec![Point::Line(1.0); 3],
        cost_deltas: vec![0.0, 0.5, 0.0],
        detail: None,
    };
    (inst, w)
}

/// Profiles `(0, 1, 2 + 0.01 j)` for `j = 0..=k`, each with prediction 0.
pub fn fixture_sgsp_moving(k: usize) -> Vec<Instance> {
    (0..=k)
        .map(|j| Instance::line(&[0.0, 1.0, 2.0 + 0.01 * j as f64], 0.0).expect("valid fixture"))
        .collect()
}

/// Resolves a fixture by its stable name, e.g. `minmaxp_tight:0.5`,
/// `rand_lb:1`, `bbox_tight:2:1`, `cm_tight:3`, `lrm_sgsp`, `sgsp_moving:100`.
pub fn fixture_by_name(name: &str) -> Result<Instance> {
    let mut parts = name.split(':');
    let head = parts.next().unwrap_or_default();
    let args: Vec<&str> = parts.collect();
    let num = |k: usize| -> Result<f64> {
        args.get(k)
            .ok_or_else(|| FacError::input(format!("fixture {head} needs argument {}", k + 1)))?
            .parse::<f64>()
            .map_err(|e| FacError::input(format!("fixture {name}: {e}")))
    };
    let arity = |want: usize| -> Result<()> {
        if args.len() != want {
            return Err(FacError::input(format!(
                "fixture {head} takes {want} argument(s), got {}",
                args.len()
            )));
        }
        Ok(())
    };
    match head {
        "minmaxp_tight" => {
            arity(1)?;
            fixture_minmaxp_tight(num(0)?)
        }
        "rand_lb" => {
            arity(1)?;
            match args[0] {
                "0" | "first" => Ok(fixture_rand_lb().0),
                "1" | "second" => Ok(fixture_rand_lb().1),
                other => Err(FacError::input(format!(
                    "rand_lb index must be 0 or 1, got {other}"
                ))),
            }
        }
        "bbox_tight" => {
            arity(2)?;
            fixture_bbox_tight(num(0)?, num(1)?)
        }
        "cm_tight" => {
            arity(1)?;
            fixture_cm_tight(num(0)?)
        }
        "lrm_sgsp" => {
            arity(0)?;
            Ok(fixture_lrm_sgsp().0)
        }
        "sgsp_moving" => {
            arity(1)?;
            let k = args[0]
                .parse::<usize>()
                .map_err(|e| FacError::input(format!("fixture {name}: {e}")))?;
            Ok(fixture_sgsp_moving(k).pop().expect("k + 1 instances"))
        }
        _ => Err(FacError::input(format!("unknown fixture {name:?}"))),
    }
}

/// Where a sweep draws its instances for a given target error.
#[derive(Debug, Clone, PartialEq)]
pub enum InstanceFamily {
    /// [`gen_random`] with the given metric, agent count range and box.
    Random {
        metric: MetricSpec,
        n_range: (usize, usize),
        coord_box: (f64, f64),
    },
    /// [`fixture_minmaxp_tight`]; every trial is the same instance.
    MinMaxPTight,
    /// [`fixture_bbox_tight`] at exponent `p`.
    BoundingBoxTight { p: f64 },
}

impl InstanceFamily {
    pub fn metric(&self) -> Result<MetricSpec> {
        match self {
            InstanceFamily::Random { metric, .. } => Ok(*metric),
            InstanceFamily::MinMaxPTight => Ok(MetricSpec::Line),
            InstanceFamily::BoundingBoxTight { p } => MetricSpec::plane(*p),
        }
    }

    pub fn instance(
        &self,
        eta: f64,
        trial: u64,
        seed: u64,
        opts: SolverOptions,
    ) -> Result<Instance> {
        match self {
            InstanceFamily::Random {
                metric,
                n_range,
                coord_box,
            } => {
                let s = derive_seed(seed, "family", &[eta.to_bits(), trial]);
                let (lo, hi) = *n_range;
                let n = lo + (s % (hi - lo + 1) as u64) as usize;
                gen_random(
                    &FamilySpec {
                        metric: *metric,
                        n,
                        coord_box: *coord_box,
                        eta_target: Some(eta),
                        seed: s,
                    },
                    opts,
                )
            }
            InstanceFamily::MinMaxPTight => fixture_minmaxp_tight(eta),
            InstanceFamily::BoundingBoxTight { p } => fixture_bbox_tight(*p, eta),
        }
    }
}
